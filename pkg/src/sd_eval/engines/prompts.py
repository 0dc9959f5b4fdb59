"""Zero-shot, single-request prompt construction."""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from functools import lru_cache
from importlib import resources

from .base import GenerateRequest

Message = dict[str, str]


@lru_cache(maxsize=1)
def default_prompt_texts() -> dict[str, str]:
    text = resources.files("sd_eval").joinpath("data/prompts.json").read_text("utf-8")
    return json.loads(text)


@dataclass(frozen=True)
class PromptConfig:
    system_prompt: str
    background_prompt: str
    problem_statement_prompt: str

    @classmethod
    def default(cls) -> PromptConfig:
        texts = default_prompt_texts()
        return cls(**{f.name: texts[f.name] for f in fields(cls)})


def build_prompt(request: GenerateRequest, config: PromptConfig) -> list[Message]:
    """System message, then the current map as an assistant turn if given, then the user prompt.

    No worked examples are included. The background and problem-statement
    sections are appended to the system message only when non-blank.
    """
    system = [config.system_prompt]
    if request.background_knowledge and request.background_knowledge.strip():
        system.append(
            config.background_prompt.replace("{background_knowledge}", request.background_knowledge)
        )
    if request.problem_statement and request.problem_statement.strip():
        system.append(
            config.problem_statement_prompt.replace(
                "{problem_statement}", request.problem_statement
            )
        )
    messages = [{"role": "system", "content": "\n\n".join(s for s in system if s)}]
    if request.current_map is not None:
        messages.append(
            {"role": "assistant", "content": json.dumps(request.current_map.to_wire(), indent=2)}
        )
    messages.append({"role": "user", "content": request.prompt})
    return messages
