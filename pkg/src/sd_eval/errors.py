"""Exception hierarchy shared across the package."""

from __future__ import annotations


class SdEvalError(Exception):
    """Base class for every error raised by sd_eval."""


class InvalidNameError(SdEvalError, ValueError):
    pass


class InvalidLoopError(SdEvalError, ValueError):
    pass


class LoopExplosionError(SdEvalError):
    def __init__(self, cap: int) -> None:
        super().__init__(f"simple-cycle count exceeds the cap of {cap} loops")
        self.cap = cap


class VocabularyError(SdEvalError, ValueError):
    pass


class InvalidLengthError(SdEvalError, ValueError):
    pass


class ContractViolation(SdEvalError, AssertionError):
    """A function was called outside its documented preconditions."""


class ConfigurationError(SdEvalError):
    pass


class ParameterError(SdEvalError, ValueError):
    pass


class EngineNotFoundError(SdEvalError, LookupError):
    def __init__(self, name: str, available: list[str]) -> None:
        catalog = ", ".join(available) or "<none>"
        super().__init__(f"unknown engine {name!r}; available engines: {catalog}")
        self.name = name
        self.available = available


class ParseError(SdEvalError, ValueError):
    """Model output is not a well-formed JSON causal map."""


class SchemaError(ParseError):
    """Model output is JSON but violates the causal-map schema."""


class TransportError(SdEvalError):
    """Network failure, timeout, or retries exhausted."""


class ProviderError(SdEvalError):
    def __init__(self, status: int, body: str) -> None:
        super().__init__(f"provider returned HTTP {status}: {body[:500]}")
        self.status = status
        self.body = body


class TranscriptMissingError(TransportError):
    def __init__(self, request_hash: str, directory: str) -> None:
        super().__init__(f"no recorded transcript {request_hash} in {directory}")
        self.request_hash = request_hash


class InvalidMapError(SdEvalError, ValueError):
    pass
