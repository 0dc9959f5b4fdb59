"""The three engines shipped with the service."""

from __future__ import annotations

import dataclasses
import json
import time
from pathlib import Path
from typing import Any

import httpx

from ..graph import CausalMap
from .base import Engine, EngineRegistry, GenerateRequest, GenerateResponse, ParameterSpec
from .prompts import PromptConfig, build_prompt
from .provider import CAUSAL_MAP_SCHEMA, REASONING_EFFORTS, ProviderClient, ProviderConfig, parse_structured_map

PREDPREY_MAP = CausalMap.build(
    [
        ("predators", "prey", "-", "Predators eat prey, so more predators means fewer prey."),
        ("prey", "predators", "+", "More prey means more food for predators."),
    ]
)


class PredPreyEngine(Engine):
    """Returns the same two-variable predator/prey model for any input."""

    name = "predprey"
    description = "Dummy engine that always returns a fixed predator/prey model."

    def parameters(self) -> list[ParameterSpec]:
        return []

    def generate(self, request: GenerateRequest) -> GenerateResponse:
        self.resolve_parameters(request.parameters)
        return GenerateResponse(PREDPREY_MAP, json.dumps(PREDPREY_MAP.to_wire()))


class LLMEngine(Engine):
    """Zero-shot, one-pass generation through an OpenAI-compatible provider."""

    def __init__(
        self,
        provider: ProviderConfig | None = None,
        *,
        prompts: PromptConfig | None = None,
        transport: httpx.BaseTransport | None = None,
        replay_dir: str | Path | None = None,
        record_dir: str | Path | None = None,
    ) -> None:
        self.provider = provider or ProviderConfig()
        self.prompts = prompts or PromptConfig.default()
        self.client_options: dict[str, Any] = {
            "transport": transport,
            "replay_dir": replay_dir,
            "record_dir": record_dir,
        }

    def configure(self, params: dict[str, Any]) -> tuple[ProviderConfig, PromptConfig]:
        return dataclasses.replace(self.provider, model=params["model"]), self.prompts

    def build_messages(self, request: GenerateRequest) -> tuple[ProviderConfig, list[dict[str, str]]]:
        provider, prompts = self.configure(self.resolve_parameters(request.parameters))
        return provider, build_prompt(request, prompts)

    def generate(self, request: GenerateRequest) -> GenerateResponse:
        provider, messages = self.build_messages(request)
        client = ProviderClient(provider, **self.client_options)
        started = time.perf_counter()
        completion = client.complete(messages, CAUSAL_MAP_SCHEMA)
        latency = time.perf_counter() - started
        return GenerateResponse(
            parse_structured_map(completion.content), completion.content, completion.usage, latency
        )


class DefaultEngine(LLMEngine):
    name = "default"
    description = "LLM-backed engine with built-in prompts; only the model is selectable."

    def parameters(self) -> list[ParameterSpec]:
        return [
            ParameterSpec("model", "text", "Model identifier sent to the provider.", default=self.provider.model),
        ]


class AdvancedEngine(LLMEngine):
    name = "advanced"
    description = "LLM-backed engine with every prompt segment and the model selection exposed."

    def parameters(self) -> list[ParameterSpec]:
        return [
            ParameterSpec("model", "text", "Model identifier sent to the provider.", default=self.provider.model),
            ParameterSpec(
                "reasoning_effort",
                "choice",
                "Reasoning effort for models that accept it; empty to omit.",
                default=self.provider.reasoning_effort or "",
                choices=("", *REASONING_EFFORTS),
            ),
            ParameterSpec("system_prompt", "text", "System instructions.", default=self.prompts.system_prompt),
            ParameterSpec(
                "background_prompt",
                "text",
                "Template for background knowledge; {background_knowledge} is substituted.",
                default=self.prompts.background_prompt,
            ),
            ParameterSpec(
                "problem_statement_prompt",
                "text",
                "Template for the problem statement; {problem_statement} is substituted.",
                default=self.prompts.problem_statement_prompt,
            ),
        ]

    def configure(self, params: dict[str, Any]) -> tuple[ProviderConfig, PromptConfig]:
        provider = dataclasses.replace(
            self.provider,
            model=params["model"],
            reasoning_effort=params["reasoning_effort"] or None,
        )
        prompts = PromptConfig(
            system_prompt=params["system_prompt"],
            background_prompt=params["background_prompt"],
            problem_statement_prompt=params["problem_statement_prompt"],
        )
        return provider, prompts


def default_registry(
    provider: ProviderConfig | None = None,
    *,
    transport: httpx.BaseTransport | None = None,
    replay_dir: str | Path | None = None,
    record_dir: str | Path | None = None,
) -> EngineRegistry:
    options = {"transport": transport, "replay_dir": replay_dir, "record_dir": record_dir}
    return EngineRegistry(
        [
            PredPreyEngine(),
            DefaultEngine(provider, **options),
            AdvancedEngine(provider, **options),
        ]
    )


def list_engines(registry: EngineRegistry | None = None) -> list[str]:
    return (registry or default_registry()).names()
