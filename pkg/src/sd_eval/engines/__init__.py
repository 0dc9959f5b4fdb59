from .base import Engine, EngineRegistry, GenerateRequest, GenerateResponse, ParameterSpec
from .builtin import (
    PREDPREY_MAP,
    AdvancedEngine,
    DefaultEngine,
    LLMEngine,
    PredPreyEngine,
    default_registry,
    list_engines,
)
from .prompts import PromptConfig, build_prompt
from .provider import (
    CAUSAL_MAP_SCHEMA,
    ProviderClient,
    ProviderConfig,
    TranscriptStore,
    build_payload,
    llm_generate,
    parse_structured_map,
    request_hash,
)

__all__ = [
    "CAUSAL_MAP_SCHEMA",
    "PREDPREY_MAP",
    "AdvancedEngine",
    "DefaultEngine",
    "Engine",
    "EngineRegistry",
    "GenerateRequest",
    "GenerateResponse",
    "LLMEngine",
    "ParameterSpec",
    "PredPreyEngine",
    "PromptConfig",
    "ProviderClient",
    "ProviderConfig",
    "TranscriptStore",
    "build_payload",
    "build_prompt",
    "default_registry",
    "list_engines",
    "llm_generate",
    "parse_structured_map",
    "request_hash",
]
