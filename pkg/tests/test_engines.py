from __future__ import annotations

import json
import re
import warnings

import httpx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sd_eval.engines import (
    CAUSAL_MAP_SCHEMA,
    PREDPREY_MAP,
    AdvancedEngine,
    DefaultEngine,
    Engine,
    GenerateRequest,
    GenerateResponse,
    ParameterSpec,
    PromptConfig,
    ProviderClient,
    ProviderConfig,
    TranscriptStore,
    build_payload,
    build_prompt,
    default_registry,
    list_engines,
    llm_generate,
    parse_structured_map,
    request_hash,
)
from sd_eval.errors import (
    ConfigurationError,
    EngineNotFoundError,
    ParameterError,
    ParseError,
    ProviderError,
    SchemaError,
    TranscriptMissingError,
    TransportError,
)
from sd_eval.graph import CausalMap, DuplicateRelationshipWarning, LoopPolarity, UndeclaredVariableWarning, enumerate_loops

ENV = {"SD_EVAL_API_KEY": "test-key"}
MAP_DOC = {
    "variables": [{"name": "Stock"}, {"name": "Flow"}],
    "relationships": [
        {"from": "Stock", "to": "Flow", "polarity": "+", "reasoning": "more stock, more flow"},
        {"from": "Flow", "to": "Stock", "polarity": "-", "reasoning": "outflow drains"},
    ],
}


class FakeProvider:
    """Counts chat-completion calls and replies from a script of (status, content) pairs."""

    def __init__(self, *replies):
        self.replies = list(replies) or [(200, json.dumps(MAP_DOC))]
        self.requests: list[httpx.Request] = []

    def __call__(self, request: httpx.Request) -> httpx.Response:
        self.requests.append(request)
        status, content = self.replies[min(len(self.requests), len(self.replies)) - 1]
        if isinstance(content, Exception):
            raise content
        if status != 200:
            return httpx.Response(status, text=content)
        body = {
            "choices": [{"message": {"role": "assistant", "content": content}}],
            "usage": {"prompt_tokens": 11, "completion_tokens": 7, "total_tokens": 18},
        }
        return httpx.Response(200, json=body)

    @property
    def payloads(self):
        return [json.loads(r.content) for r in self.requests]

    def transport(self):
        return httpx.MockTransport(self)


def client(fake, config=None, **kwargs):
    kwargs.setdefault("env", ENV)
    return ProviderClient(config or ProviderConfig(), transport=fake.transport(), sleep=lambda s: None, **kwargs)


def engine_with(cls, fake, **kwargs):
    engine = cls(ProviderConfig(), transport=fake.transport(), **kwargs)
    return engine


@pytest.fixture(autouse=True)
def api_key(monkeypatch):
    monkeypatch.setenv("SD_EVAL_API_KEY", "test-key")


def test_registry_lists_three_engines():
    assert list_engines() == ["advanced", "default", "predprey"]
    descriptors = default_registry().list_engines()
    assert all("parameters" in d for d in descriptors)


def test_registry_is_extensible_and_reports_catalog():
    class Mine(Engine):
        name = "myengine"

        def parameters(self):
            return []

        def generate(self, request):
            return GenerateResponse(CausalMap(), "{}")

    registry = default_registry()
    registry.register(Mine())
    assert len(registry.names()) == 4
    with pytest.raises(ValueError):
        registry.register(Mine())
    with pytest.raises(EngineNotFoundError, match="advanced, default, myengine, predprey"):
        registry.get("missing")


def test_predprey_ignores_input():
    engine = default_registry().get("predprey")
    a = engine.generate(GenerateRequest(prompt="anything"))
    b = engine.generate(GenerateRequest(prompt="something else", background_knowledge="x"))
    assert a.map == b.map == PREDPREY_MAP
    assert a.raw_model_output == b.raw_model_output
    assert len(a.map.variables) == 2 and len(a.map.relationships) == 2
    (loop,) = enumerate_loops(a.map)
    assert loop.polarity is LoopPolarity.BALANCING


def test_request_requires_prompt():
    with pytest.raises(ParameterError):
        GenerateRequest(prompt="  ")


def test_parameter_spec_checks_types():
    spec = ParameterSpec("n", "integer", "count", default=1)
    assert spec.check(3) == 3
    with pytest.raises(ParameterError):
        spec.check("3")
    with pytest.raises(ParameterError):
        spec.check(True)


def test_prompt_without_current_map_or_background():
    messages = build_prompt(GenerateRequest(prompt="go"), PromptConfig.default())
    assert [m["role"] for m in messages] == ["system", "user"]
    assert "background information" not in messages[0]["content"]
    assert messages[-1]["content"] == "go"


def test_prompt_with_background_problem_and_current_map():
    current = CausalMap.from_wire(MAP_DOC)
    request = GenerateRequest(
        prompt="go", background_knowledge="BK-TEXT", problem_statement="PS-TEXT", current_map=current
    )
    messages = build_prompt(request, PromptConfig.default())
    assert [m["role"] for m in messages] == ["system", "assistant", "user"]
    assert "BK-TEXT" in messages[0]["content"] and "PS-TEXT" in messages[0]["content"]
    assert json.loads(messages[1]["content"]) == MAP_DOC


def test_prompts_are_zero_shot():
    """No built prompt carries a worked example map or relationship."""
    request = GenerateRequest(prompt="Extract the relationships.", background_knowledge="The more a there are.")
    for engine in (DefaultEngine(), AdvancedEngine()):
        _, messages = engine.build_messages(request)
        for message in messages:
            text = message["content"]
            assert '"relationships"' not in text
            assert "-->" not in text
            assert not re.search(r'"(from|to|polarity)"\s*:', text)
    system = PromptConfig.default().system_prompt.lower()
    assert "feedback" in system and "polarity" in system


def test_one_provider_call_per_generation():
    fake = FakeProvider()
    engine = engine_with(DefaultEngine, fake)
    response = engine.generate(GenerateRequest(prompt="model road rage"))
    assert len(fake.requests) == 1
    assert response.map == CausalMap.from_wire(MAP_DOC)
    assert response.raw_model_output == json.dumps(MAP_DOC)
    assert response.usage["total_tokens"] == 18


def test_request_wire_format():
    fake = FakeProvider()
    engine = engine_with(DefaultEngine, fake)
    engine.generate(GenerateRequest(prompt="p"))
    (request,) = fake.requests
    assert str(request.url) == "https://api.openai.com/v1/chat/completions"
    assert request.headers["authorization"] == "Bearer test-key"
    payload = fake.payloads[0]
    assert payload["model"] == "gpt-4o"
    assert payload["response_format"]["type"] == "json_schema"
    assert payload["response_format"]["json_schema"]["strict"] is True
    assert payload["response_format"]["json_schema"]["schema"] == CAUSAL_MAP_SCHEMA
    assert "reasoning_effort" not in payload


def test_llm_generate_returns_content_verbatim():
    fake = FakeProvider((200, '{"variables": [], "relationships": []}'))
    raw = llm_generate(ProviderConfig(), [{"role": "user", "content": "x"}], transport=fake.transport(), env=ENV)
    assert raw == '{"variables": [], "relationships": []}'


def test_retry_after_429():
    fake = FakeProvider((429, "slow down"), (200, json.dumps(MAP_DOC)))
    delays = []
    c = ProviderClient(ProviderConfig(backoff_jitter=0), transport=fake.transport(), sleep=delays.append, env=ENV)
    completion = c.complete([{"role": "user", "content": "x"}])
    assert json.loads(completion.content) == MAP_DOC
    assert len(fake.requests) == 2
    assert delays == [1.0]


def test_backoff_is_exponential():
    config = ProviderConfig(backoff_jitter=0)
    assert [config.backoff_delay(i) for i in range(4)] == [1.0, 2.0, 4.0, 8.0]


def test_retries_exhausted_is_transport_error():
    fake = FakeProvider((503, "down"))
    with pytest.raises(TransportError, match="3 attempt"):
        client(fake, ProviderConfig(max_retries=2)).complete([{"role": "user", "content": "x"}])
    assert len(fake.requests) == 3


def test_timeout_is_transport_error():
    fake = FakeProvider((200, httpx.ReadTimeout("slow")))
    with pytest.raises(TransportError, match="timed out"):
        client(fake, ProviderConfig(max_retries=0)).complete([{"role": "user", "content": "x"}])


def test_non_retryable_4xx_is_provider_error():
    fake = FakeProvider((400, "bad schema"))
    with pytest.raises(ProviderError) as info:
        client(fake).complete([{"role": "user", "content": "x"}])
    assert info.value.status == 400 and "bad schema" in info.value.body
    assert len(fake.requests) == 1


def test_missing_api_key_fails_before_network():
    fake = FakeProvider()
    with pytest.raises(ConfigurationError, match="SD_EVAL_API_KEY"):
        client(fake, env={}).complete([{"role": "user", "content": "x"}])
    assert fake.requests == []


def test_custom_key_variable(monkeypatch):
    fake = FakeProvider()
    c = client(fake, ProviderConfig(api_key_env="OTHER_KEY"), env={"OTHER_KEY": "k2"})
    c.complete([{"role": "user", "content": "x"}])
    assert fake.requests[0].headers["authorization"] == "Bearer k2"


def test_record_then_replay(tmp_path):
    fake = FakeProvider()
    messages = [{"role": "user", "content": "x"}]
    client(fake, record_dir=tmp_path).complete(messages)
    payload = build_payload(ProviderConfig(), messages, CAUSAL_MAP_SCHEMA)
    doc = json.loads((tmp_path / f"{request_hash(payload)}.json").read_text())
    assert set(doc) == {"request_hash", "messages", "response_body", "model", "timestamp"}

    offline = FakeProvider()
    replayed = client(offline, replay_dir=tmp_path, env={}).complete(messages)
    assert json.loads(replayed.content) == MAP_DOC
    assert offline.requests == []


def test_replay_miss_is_reported(tmp_path):
    with pytest.raises(TranscriptMissingError):
        client(FakeProvider(), replay_dir=tmp_path).complete([{"role": "user", "content": "unseen"}])


def test_transcript_store_round_trip(tmp_path):
    store = TranscriptStore(tmp_path)
    store.save("abc", {"messages": [], "model": "m"}, {"choices": []})
    assert store.load("abc")["response_body"] == {"choices": []}


def test_request_hash_ignores_key_order():
    assert request_hash({"a": 1, "b": [1, 2]}) == request_hash({"b": [1, 2], "a": 1})


def test_default_and_advanced_agree_under_defaults():
    request = GenerateRequest(prompt="p", background_knowledge="bk", problem_statement="ps")
    default_provider, default_messages = DefaultEngine().build_messages(request)
    advanced_provider, advanced_messages = AdvancedEngine().build_messages(request)
    assert default_messages == advanced_messages
    assert default_provider == advanced_provider

    fake_a, fake_b = FakeProvider(), FakeProvider()
    out_a = engine_with(DefaultEngine, fake_a).generate(request)
    out_b = engine_with(AdvancedEngine, fake_b).generate(request)
    assert fake_a.payloads == fake_b.payloads
    assert out_a.map == out_b.map


def test_advanced_system_prompt_override():
    engine = AdvancedEngine()
    _, messages = engine.build_messages(GenerateRequest(prompt="p", parameters={"system_prompt": "X"}))
    assert messages[0] == {"role": "system", "content": "X"}


def test_advanced_model_and_reasoning_override():
    fake = FakeProvider()
    engine = engine_with(AdvancedEngine, fake)
    engine.generate(GenerateRequest(prompt="p", parameters={"model": "o3-mini", "reasoning_effort": "high"}))
    payload = fake.payloads[0]
    assert payload["model"] == "o3-mini"
    assert payload["reasoning_effort"] == "high"


def test_default_engine_only_exposes_model():
    assert [p.name for p in DefaultEngine().parameters()] == ["model"]
    with pytest.raises(ParameterError, match="valid parameters: \\['model'\\]"):
        DefaultEngine().build_messages(GenerateRequest(prompt="p", parameters={"system_prompt": "X"}))


def test_advanced_rejects_unknown_parameter_with_catalog():
    with pytest.raises(ParameterError, match="problem_statement_prompt"):
        AdvancedEngine().build_messages(GenerateRequest(prompt="p", parameters={"temperature": 1}))
    with pytest.raises(ParameterError):
        AdvancedEngine().build_messages(GenerateRequest(prompt="p", parameters={"reasoning_effort": "max"}))


def test_parse_valid_document():
    cmap = parse_structured_map(json.dumps(MAP_DOC))
    assert len(cmap.relationships) == 2


def test_parse_merges_duplicates_with_warning():
    doc = {"variables": [{"name": "a"}, {"name": "b"}], "relationships": [{"from": "a", "to": "b", "polarity": "+"}] * 2}
    with pytest.warns(DuplicateRelationshipWarning):
        cmap = parse_structured_map(json.dumps(doc))
    assert len(cmap.relationships) == 1


def test_parse_repairs_undeclared_variables():
    doc = {"variables": [{"name": "a"}], "relationships": [{"from": "a", "to": "B", "polarity": "-"}]}
    with pytest.warns(UndeclaredVariableWarning):
        cmap = parse_structured_map(json.dumps(doc))
    assert cmap.variables == ("a", "b")


@pytest.mark.parametrize(
    "raw, error",
    [
        ("not json", ParseError),
        ('{"variables": [], "relationships": [{"from": "a", "to": "b", "polarity": "±"}]}', SchemaError),
        ('{"variables": []}', SchemaError),
        ("[1, 2]", SchemaError),
        ('{"variables": [], "relationships": [{"from": " ", "to": "b", "polarity": "+"}]}', SchemaError),
    ],
)
def test_parse_errors(raw, error):
    with pytest.raises(error):
        parse_structured_map(raw)


def test_malformed_provider_output_propagates():
    fake = FakeProvider((200, "this is not json"))
    with pytest.raises(ParseError):
        engine_with(DefaultEngine, fake).generate(GenerateRequest(prompt="p"))


names = st.text(alphabet="abcXYZ ", min_size=1, max_size=6).filter(lambda s: s.strip())


@given(st.lists(st.tuples(names, names, st.sampled_from("+-")), max_size=8))
def test_wire_round_trip_is_idempotent(triples):
    doc = {
        "variables": [],
        "relationships": [{"from": a, "to": b, "polarity": p, "reasoning": "r"} for a, b, p in triples],
    }
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        once = parse_structured_map(json.dumps(doc))
        twice = parse_structured_map(json.dumps(once.to_wire()))
    assert once == twice
    assert once.to_wire() == twice.to_wire()
