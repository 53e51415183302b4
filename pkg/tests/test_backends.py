"""Generation/embedding client contracts: retry behavior, batch ordering,
and the HTTP implementations against an in-process mock transport."""

import json
import threading
from dataclasses import dataclass

import httpx
import numpy as np
import pytest

from cyclesynth.backends import (
    DIRECTION_FORWARD,
    BackendError,
    BackendUnreachable,
    ContextOverflowError,
    EmbeddingVector,
    GenerationBackend,
    GenerationFailure,
    GenerationParams,
    HTTPBackend,
    HTTPEncoder,
    ModelHandle,
    RetryPolicy,
    generate_many,
    generate_with_retry,
)


@dataclass(frozen=True)
class FakePrompt:
    text: str


class ScriptedBackend(GenerationBackend):
    """Replays a fixed sequence of outcomes; exceptions are raised, strings
    returned."""

    deterministic = True

    def __init__(self, script):
        self.script = list(script)
        self.calls = 0
        self.threads = set()

    def generate(self, handle, prompt, params):
        self.threads.add(threading.get_ident())
        outcome = self.script[min(self.calls, len(self.script) - 1)]
        self.calls += 1
        if isinstance(outcome, BaseException):
            raise outcome
        return outcome

    def estimate_tokens(self, text):
        return len(text.split())


def no_sleep_policy(max_attempts=5, delays=None):
    sink = delays if delays is not None else []
    return RetryPolicy(max_attempts=max_attempts, sleep=sink.append)


def test_generation_params_validation():
    with pytest.raises(ValueError):
        GenerationParams(temperature=-0.1)
    with pytest.raises(ValueError):
        GenerationParams(top_k=0)
    with pytest.raises(ValueError):
        GenerationParams(max_new_tokens=0)
    with pytest.raises(ValueError):
        GenerationParams(max_model_len=-5)


def test_model_handle_direction_and_lineage():
    with pytest.raises(ValueError):
        ModelHandle(handle_id="m", direction="sideways")
    base = ModelHandle(handle_id="m")
    fwd = base.with_direction(DIRECTION_FORWARD)
    assert fwd.direction == DIRECTION_FORWARD and fwd.handle_id == "m"
    tuned = fwd.trained("job-1").trained("job-2", handle_id="m-v2")
    assert tuned.lineage == ("job-1", "job-2")
    assert tuned.handle_id == "m-v2"
    assert ModelHandle.from_record(tuned.to_record()) == tuned


def test_embedding_vector_shape_check():
    with pytest.raises(ValueError):
        EmbeddingVector(values=np.zeros(3), dim=4, encoder_id="e")
    EmbeddingVector(values=np.zeros(4), dim=4, encoder_id="e")


def test_retry_policy_delays_are_capped():
    policy = RetryPolicy(backoff_base=0.5, backoff_cap=16.0)
    assert [policy.delay(a) for a in range(7)] == [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 16.0]


def test_retry_recovers_from_transient_errors(base_handle, params):
    backend = ScriptedBackend([BackendUnreachable("down"), "", "recovered"])
    delays = []
    text = generate_with_retry(backend, base_handle, FakePrompt("q"), params,
                               policy=no_sleep_policy(delays=delays))
    assert text == "recovered"
    assert backend.calls == 3
    assert backend.retry_count == 2          # one unreachable + one empty completion
    assert delays == [0.5, 1.0]


def test_retry_budget_exhaustion(base_handle, params):
    backend = ScriptedBackend([BackendUnreachable("down")])
    with pytest.raises(GenerationFailure, match="after 3 attempts"):
        generate_with_retry(backend, base_handle, FakePrompt("q"), params,
                            policy=no_sleep_policy(max_attempts=3))
    assert backend.calls == 3
    assert backend.retry_count == 3


def test_non_retryable_errors_propagate_immediately(base_handle, params):
    backend = ScriptedBackend([GenerationFailure("rejected")])
    with pytest.raises(GenerationFailure, match="rejected"):
        generate_with_retry(backend, base_handle, FakePrompt("q"), params,
                            policy=no_sleep_policy())
    assert backend.calls == 1
    assert backend.retry_count == 0


def test_context_overflow_precheck(base_handle):
    backend = ScriptedBackend(["never reached"])
    tight = GenerationParams(max_new_tokens=10, max_model_len=12)
    prompt = FakePrompt("one two three four five")
    with pytest.raises(ContextOverflowError) as excinfo:
        generate_with_retry(backend, base_handle, prompt, tight,
                            policy=no_sleep_policy(), item_id="item-7")
    assert excinfo.value.item_id == "item-7"
    assert backend.calls == 0


def test_generate_many_preserves_order_and_isolates_failures(base_handle, params):
    backend = ScriptedBackend(["a", GenerationFailure("bad item"), "c"])
    prompts = [FakePrompt(p) for p in ("p0", "p1", "p2")]
    results = generate_many(backend, base_handle, prompts, params,
                            policy=no_sleep_policy(), item_ids=["i0", "i1", "i2"])
    assert results[0] == ("a", None)
    assert results[2] == ("c", None)
    text, err = results[1]
    assert text is None and isinstance(err, GenerationFailure)


def test_generate_many_runs_deterministic_backend_single_flight(base_handle, params):
    backend = ScriptedBackend(["x"] * 20)
    prompts = [FakePrompt(f"p{i}") for i in range(20)]
    generate_many(backend, base_handle, prompts, params, max_concurrency=8,
                  policy=no_sleep_policy())
    assert backend.threads == {threading.get_ident()}


def test_generate_many_validates_item_ids(base_handle, params):
    backend = ScriptedBackend(["x"])
    with pytest.raises(ValueError, match="item_ids"):
        generate_many(backend, base_handle, [FakePrompt("p")], params,
                      item_ids=["a", "b"])


def _http_backend(handler, **kwargs):
    client = httpx.Client(transport=httpx.MockTransport(handler))
    return HTTPBackend("http://gen.test/", client=client, **kwargs)


def test_http_backend_payload_and_response(base_handle):
    seen = {}

    def handler(request):
        seen["url"] = str(request.url)
        seen["payload"] = json.loads(request.content)
        return httpx.Response(200, json={
            "choices": [{"message": {"content": "body [END] trailer"}}]
        })

    backend = _http_backend(handler)
    params = GenerationParams(temperature=0.7, top_k=3, max_new_tokens=64,
                              stop=("[END]", "[ALT]"), seed=11)
    text = backend.generate(base_handle, FakePrompt("hello"), params)
    assert text == "body "                    # truncated at the earliest stop token
    assert seen["url"] == "http://gen.test/v1/chat/completions"
    assert seen["payload"] == {
        "model": "base",
        "messages": [{"role": "user", "content": "hello"}],
        "temperature": 0.7,
        "top_k": 3,
        "max_tokens": 64,
        "stop": ["[END]", "[ALT]"],
        "seed": 11,
    }


def test_http_backend_error_mapping(base_handle, params):
    backend = _http_backend(lambda req: httpx.Response(503))
    with pytest.raises(BackendUnreachable):
        backend.generate(base_handle, FakePrompt("x"), params)

    backend = _http_backend(lambda req: httpx.Response(422, text="bad request"))
    with pytest.raises(GenerationFailure, match="422"):
        backend.generate(base_handle, FakePrompt("x"), params)

    backend = _http_backend(lambda req: httpx.Response(200, json={"choices": []}))
    with pytest.raises(GenerationFailure, match="malformed"):
        backend.generate(base_handle, FakePrompt("x"), params)

    def down(request):
        raise httpx.ConnectError("no route", request=request)

    backend = _http_backend(down)
    with pytest.raises(BackendUnreachable):
        backend.generate(base_handle, FakePrompt("x"), params)


def test_http_backend_token_estimate():
    backend = _http_backend(lambda req: httpx.Response(500))
    assert backend.estimate_tokens("") == 1
    assert backend.estimate_tokens("a" * 8) == 3
    wide = _http_backend(lambda req: httpx.Response(500), chars_per_token=2.0)
    assert wide.estimate_tokens("a" * 8) == 5


def test_http_encoder_round_trip():
    def handler(request):
        payload = json.loads(request.content)
        assert payload["model"] == "enc-1"
        rows = [{"embedding": [float(len(t)), 0.0]} for t in payload["input"]]
        return httpx.Response(200, json={"data": rows})

    client = httpx.Client(transport=httpx.MockTransport(handler))
    encoder = HTTPEncoder("http://emb.test", model="enc-1", dim=2, client=client)
    matrix = encoder.embed_matrix(["ab", "abcd"])
    assert matrix.tolist() == [[2.0, 0.0], [4.0, 0.0]]
    vectors = encoder.embed(["xyz"])
    assert vectors[0].dim == 2 and vectors[0].encoder_id == "enc-1"


def test_http_encoder_error_paths():
    client = httpx.Client(transport=httpx.MockTransport(lambda req: httpx.Response(500)))
    encoder = HTTPEncoder("http://emb.test", model="enc-1", dim=2, client=client)
    with pytest.raises(BackendUnreachable):
        encoder.embed_matrix(["x"])

    def wrong_dim(request):
        return httpx.Response(200, json={"data": [{"embedding": [1.0, 2.0, 3.0]}]})

    client = httpx.Client(transport=httpx.MockTransport(wrong_dim))
    encoder = HTTPEncoder("http://emb.test", model="enc-1", dim=2, client=client)
    with pytest.raises(BackendError, match="shape"):
        encoder.embed_matrix(["x"])
    with pytest.raises(ValueError):
        encoder.embed([])
