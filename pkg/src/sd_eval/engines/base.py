"""Engine interface, request/response types, and the engine registry."""

from __future__ import annotations

import abc
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from typing import Any

from ..errors import EngineNotFoundError, ParameterError
from ..graph import CausalMap

PARAMETER_KINDS = ("text", "integer", "boolean", "choice")


@dataclass(frozen=True)
class ParameterSpec:
    name: str
    kind: str
    description: str
    required: bool = False
    default: Any = None
    choices: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in PARAMETER_KINDS:
            raise ValueError(f"parameter kind must be one of {PARAMETER_KINDS}, got {self.kind!r}")
        if self.kind == "choice" and not self.choices:
            raise ValueError(f"choice parameter {self.name!r} needs choices")
        if not self.required and self.default is not None:
            self.check(self.default)

    def check(self, value: Any) -> Any:
        ok = {
            "text": isinstance(value, str),
            "integer": isinstance(value, int) and not isinstance(value, bool),
            "boolean": isinstance(value, bool),
            "choice": value in self.choices,
        }[self.kind]
        if not ok:
            expected = f"one of {list(self.choices)}" if self.kind == "choice" else self.kind
            raise ParameterError(f"parameter {self.name!r} expects {expected}, got {value!r}")
        return value

    def to_wire(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "name": self.name,
            "kind": self.kind,
            "required": self.required,
            "default": self.default,
            "description": self.description,
        }
        if self.choices:
            doc["choices"] = list(self.choices)
        return doc


@dataclass(frozen=True)
class GenerateRequest:
    prompt: str
    problem_statement: str | None = None
    background_knowledge: str | None = None
    current_map: CausalMap | None = None
    parameters: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not isinstance(self.prompt, str) or not self.prompt.strip():
            raise ParameterError("prompt must be a non-empty string")


@dataclass(frozen=True)
class GenerateResponse:
    map: CausalMap
    raw_model_output: str
    usage: Mapping[str, int] | None = None
    latency: float = 0.0


class Engine(abc.ABC):
    """A pluggable model generator: a parameter catalog plus ``generate``."""

    name: str = ""
    description: str = ""

    @abc.abstractmethod
    def parameters(self) -> list[ParameterSpec]: ...

    @abc.abstractmethod
    def generate(self, request: GenerateRequest) -> GenerateResponse: ...

    def resolve_parameters(self, supplied: Mapping[str, Any] | None) -> dict[str, Any]:
        """Type-check ``supplied`` against the catalog and fill in defaults."""
        specs = {spec.name: spec for spec in self.parameters()}
        supplied = dict(supplied or {})
        unknown = sorted(set(supplied) - set(specs))
        if unknown:
            raise ParameterError(
                f"unknown parameter(s) {unknown} for engine {self.name!r}; "
                f"valid parameters: {sorted(specs)}"
            )
        resolved = {}
        for name, spec in specs.items():
            if name in supplied:
                resolved[name] = spec.check(supplied[name])
            elif spec.required:
                raise ParameterError(f"engine {self.name!r} requires parameter {name!r}")
            else:
                resolved[name] = spec.default
        return resolved

    def describe(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "description": self.description,
            "parameters": [p.to_wire() for p in self.parameters()],
        }


class EngineRegistry:
    def __init__(self, engines: Iterable[Engine] = ()) -> None:
        self._engines: dict[str, Engine] = {}
        for engine in engines:
            self.register(engine)

    def register(self, engine: Engine) -> None:
        if not engine.name:
            raise ValueError("engine has no name")
        if engine.name in self._engines:
            raise ValueError(f"engine {engine.name!r} is already registered")
        self._engines[engine.name] = engine

    def get(self, name: str) -> Engine:
        try:
            return self._engines[name]
        except KeyError:
            raise EngineNotFoundError(name, self.names()) from None

    def names(self) -> list[str]:
        return sorted(self._engines)

    def list_engines(self) -> list[dict[str, Any]]:
        return [self._engines[name].describe() for name in self.names()]

    def __contains__(self, name: object) -> bool:
        return name in self._engines

    def __len__(self) -> int:
        return len(self._engines)
