"""Shared test doubles: an oracle engine and a scripted chat-completions provider."""

from __future__ import annotations

import json
from collections.abc import Iterable

import httpx

from sd_eval.engines import Engine, GenerateResponse
from sd_eval.engines.prompts import default_prompt_texts
from sd_eval.graph import CausalMap
from sd_eval.synthesis import ConformanceConstraint, canonical_suites, parse_description


def conforming_map(constraint: ConformanceConstraint) -> CausalMap:
    """A hub-and-spoke map that satisfies ``constraint``: k two-cycles on a hub plus a tail."""
    loops = constraint.min_loops if constraint.min_loops is not None else 1
    if constraint.max_loops is not None:
        loops = min(loops, constraint.max_loops)
    n = max(constraint.min_variables or 0, loops + 1, len(constraint.required_variables), 3)
    names = list(constraint.required_variables) + [f"factor {i}" for i in range(n)]
    names = names[:n]
    return hub_map(names, loops)


def hub_map(names: list[str], loops: int) -> CausalMap:
    rels = []
    for v in names[1 : loops + 1]:
        rels += [(names[0], v, "+"), (v, names[0], "+")]
    tail = names[loops:]
    for a, b in zip(tail, tail[1:]):
        if loops == 0 or a != names[0]:
            rels.append((a, b, "+"))
    return CausalMap.build(rels, names)


class OracleEngine(Engine):
    """Reads the ground truth back out of the description; conforms to every constraint."""

    name = "oracle"

    def parameters(self):
        return []

    def generate(self, request):
        if request.background_knowledge:
            specs = parse_description(request.background_knowledge)
            cmap = CausalMap.build([s.relationship for s in specs])
        else:
            case = next(c for c in canonical_suites(0)[1] if c.prompt == request.prompt)
            cmap = conforming_map(case.constraint)
        return GenerateResponse(cmap, json.dumps(cmap.to_wire()))


class ScriptedModel:
    """A chat-completions endpoint that answers like a model with a chosen failure pattern.

    Causal tests get their ground truth back unless listed in ``causal_fail``,
    in which case one polarity is flipped. Conformance tests get a conforming
    map unless listed in ``conformance_fail``, in which case they get a
    two-variable map.
    """

    def __init__(self, causal_fail: Iterable[str] = (), conformance_fail: Iterable[str] = (), seed: int = 0):
        self.causal_fail = set(causal_fail)
        self.conformance_fail = set(conformance_fail)
        self.causal, self.conformance = canonical_suites(seed)
        self.calls = 0

    def answer(self, messages: list[dict[str, str]]) -> CausalMap:
        system, user = messages[0]["content"], messages[-1]["content"]
        if user == default_prompt_texts()["causal_task_prompt"]:
            case = max((c for c in self.causal if c.description in system), key=lambda c: len(c.description))
            rels = [(r.source, r.target, r.polarity.value) for r in case.truth.relationships]
            if case.id in self.causal_fail:
                a, b, p = rels[0]
                rels[0] = (a, b, "-" if p == "+" else "+")
            return CausalMap.build(rels)
        case = next(c for c in self.conformance if c.prompt == user)
        if case.id in self.conformance_fail:
            return CausalMap.build([("x", "y", "+"), ("y", "x", "-")])
        return conforming_map(case.constraint)

    def __call__(self, request: httpx.Request) -> httpx.Response:
        self.calls += 1
        payload = json.loads(request.content)
        content = json.dumps(self.answer(payload["messages"]).to_wire())
        body = {
            "id": f"cmpl-{self.calls}",
            "choices": [{"index": 0, "message": {"role": "assistant", "content": content}}],
            "usage": {"prompt_tokens": 100, "completion_tokens": 50, "total_tokens": 150},
        }
        return httpx.Response(200, json=body)

    def transport(self) -> httpx.MockTransport:
        return httpx.MockTransport(self)
