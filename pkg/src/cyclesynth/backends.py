"""Client contracts for text generation and embedding.

Two implementations ship with the package: a deterministic mock (see
cyclesynth.mock) used for desk-scale runs and tests, and HTTP clients
speaking the ubiquitous chat-completion / embedding JSON protocol.
"""

from __future__ import annotations

import abc
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

DIRECTION_FORWARD = "forward"    # instruction -> response generator
DIRECTION_BACKWARD = "backward"  # response -> instruction generator
DIRECTION_BASE = "base"
DIRECTION_JUDGE = "judge"
DIRECTION_ENCODER = "encoder"

DIRECTIONS = (
    DIRECTION_FORWARD,
    DIRECTION_BACKWARD,
    DIRECTION_BASE,
    DIRECTION_JUDGE,
    DIRECTION_ENCODER,
)


class BackendError(RuntimeError):
    """Base class for backend failures."""

    retryable = False


class BackendUnreachable(BackendError):
    retryable = True


class ContextOverflowError(BackendError):
    """Prompt plus generation budget exceeds the model context; not retryable."""

    def __init__(self, message: str, item_id: Optional[str] = None):
        super().__init__(message)
        self.item_id = item_id


class EmptyCompletionError(BackendError):
    retryable = True


class GenerationFailure(BackendError):
    """Terminal per-item failure after retries; recorded, never fatal to a run."""


@dataclass(frozen=True)
class GenerationParams:
    temperature: float = 0.2
    top_k: int = 10
    max_new_tokens: int = 500
    max_model_len: int = 2048
    stop: Optional[Tuple[str, ...]] = None
    seed: Optional[int] = None

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.top_k <= 0 or self.max_new_tokens <= 0 or self.max_model_len <= 0:
            raise ValueError("top_k, max_new_tokens and max_model_len must be positive")


@dataclass(frozen=True)
class ModelHandle:
    handle_id: str
    direction: str = DIRECTION_BASE
    lineage: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ValueError(f"unknown direction {self.direction!r}")

    def with_direction(self, direction: str) -> "ModelHandle":
        return replace(self, direction=direction)

    def trained(self, job_id: str, handle_id: Optional[str] = None,
                direction: Optional[str] = None) -> "ModelHandle":
        return ModelHandle(
            handle_id=handle_id or self.handle_id,
            direction=direction or self.direction,
            lineage=self.lineage + (job_id,),
        )

    def to_record(self) -> dict:
        return {
            "handle_id": self.handle_id,
            "direction": self.direction,
            "lineage": list(self.lineage),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "ModelHandle":
        return cls(rec["handle_id"], rec["direction"], tuple(rec.get("lineage", ())))


@dataclass(frozen=True)
class EmbeddingVector:
    values: np.ndarray
    dim: int
    encoder_id: str

    def __post_init__(self):
        if self.values.shape != (self.dim,):
            raise ValueError(f"embedding shape {self.values.shape} != ({self.dim},)")


@dataclass
class RetryPolicy:
    max_attempts: int = 5
    backoff_base: float = 0.5
    backoff_cap: float = 16.0
    sleep: Callable[[float], None] = field(default=time.sleep, repr=False)

    def delay(self, attempt: int) -> float:
        return min(self.backoff_cap, self.backoff_base * (2 ** attempt))


class GenerationBackend(abc.ABC):
    """Text generation contract; completions never echo the prompt."""

    #: deterministic backends are run single-flight so transcripts are byte-stable
    deterministic: bool = False
    #: retries consumed across this backend's lifetime (manifest bookkeeping)
    retry_count: int = 0

    @abc.abstractmethod
    def generate(self, handle: ModelHandle, prompt, params: GenerationParams) -> str:
        """Return the completion text. Raises BackendError subclasses on failure."""

    @abc.abstractmethod
    def estimate_tokens(self, text: str) -> int:
        """Backend-provided token-count estimate used for context budgeting."""

    def check_context(self, prompt_text: str, params: GenerationParams,
                      item_id: Optional[str] = None) -> None:
        est = self.estimate_tokens(prompt_text)
        if est + params.max_new_tokens > params.max_model_len:
            raise ContextOverflowError(
                f"{est} prompt tokens + {params.max_new_tokens} new tokens "
                f"> max_model_len {params.max_model_len}",
                item_id=item_id,
            )


class Encoder(abc.ABC):
    """Deterministic text embedding: one fixed encoder per filtering pass."""

    encoder_id: str
    dim: int

    @abc.abstractmethod
    def _embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        """(len(texts), dim) float64 matrix."""

    def embed(self, texts: Sequence[str]) -> List[EmbeddingVector]:
        if not texts:
            raise ValueError("embed requires at least one text")
        matrix = self._embed_texts(list(texts))
        return [EmbeddingVector(values=row, dim=self.dim, encoder_id=self.encoder_id)
                for row in matrix]

    def embed_matrix(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            raise ValueError("embed requires at least one text")
        return self._embed_texts(list(texts))


def generate_with_retry(backend: GenerationBackend, handle: ModelHandle, prompt,
                        params: GenerationParams, policy: Optional[RetryPolicy] = None,
                        item_id: Optional[str] = None) -> str:
    """Generate with exponential backoff on retryable errors.

    Non-retryable errors (context overflow) propagate immediately; exhausting
    the attempt budget raises GenerationFailure.
    """
    policy = policy or RetryPolicy()
    backend.check_context(prompt.text, params, item_id=item_id)
    last: Optional[BackendError] = None
    for attempt in range(policy.max_attempts):
        try:
            text = backend.generate(handle, prompt, params)
        except BackendError as exc:
            if not exc.retryable:
                raise
            last = exc
            backend.retry_count += 1
            policy.sleep(policy.delay(attempt))
            continue
        if not text:
            last = EmptyCompletionError("backend returned an empty completion")
            backend.retry_count += 1
            policy.sleep(policy.delay(attempt))
            continue
        return text
    raise GenerationFailure(
        f"generation failed after {policy.max_attempts} attempts: {last}"
    ) from last


def generate_many(backend: GenerationBackend, handle: ModelHandle,
                  prompts: Sequence, params: GenerationParams,
                  max_concurrency: int = 8,
                  policy: Optional[RetryPolicy] = None,
                  item_ids: Optional[Sequence[str]] = None) -> List[Tuple[Optional[str], Optional[BackendError]]]:
    """Batch generation keyed by request index; output order equals input order.

    Deterministic backends are run single-flight so replay transcripts stay
    byte-stable. Each element of the result is (text, None) on success or
    (None, error) on per-item failure.
    """
    ids = list(item_ids) if item_ids is not None else [None] * len(prompts)
    if len(ids) != len(prompts):
        raise ValueError("item_ids length must match prompts length")

    def one(idx: int) -> Tuple[Optional[str], Optional[BackendError]]:
        try:
            return generate_with_retry(backend, handle, prompts[idx], params,
                                       policy=policy, item_id=ids[idx]), None
        except BackendError as exc:
            return None, exc

    if backend.deterministic or max_concurrency <= 1 or len(prompts) <= 1:
        return [one(i) for i in range(len(prompts))]
    with ThreadPoolExecutor(max_workers=max_concurrency) as pool:
        return list(pool.map(one, range(len(prompts))))


class HTTPBackend(GenerationBackend):
    """Chat-completions client: POST {base_url}/v1/chat/completions."""

    def __init__(self, base_url: str, api_key: Optional[str] = None,
                 timeout: float = 120.0, chars_per_token: float = 4.0,
                 client=None):
        import httpx

        self.base_url = base_url.rstrip("/")
        self.chars_per_token = chars_per_token
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = client or httpx.Client(timeout=timeout, headers=headers)

    def estimate_tokens(self, text: str) -> int:
        return max(1, int(len(text) / self.chars_per_token) + 1)

    def generate(self, handle: ModelHandle, prompt, params: GenerationParams) -> str:
        import httpx

        payload = {
            "model": handle.handle_id,
            "messages": [{"role": "user", "content": prompt.text}],
            "temperature": params.temperature,
            "top_k": params.top_k,
            "max_tokens": params.max_new_tokens,
        }
        if params.stop:
            payload["stop"] = list(params.stop)
        if params.seed is not None:
            payload["seed"] = params.seed
        try:
            resp = self._client.post(f"{self.base_url}/v1/chat/completions", json=payload)
        except httpx.HTTPError as exc:
            raise BackendUnreachable(f"generation endpoint unreachable: {exc}") from exc
        if resp.status_code >= 500:
            raise BackendUnreachable(f"generation endpoint returned {resp.status_code}")
        if resp.status_code != 200:
            raise GenerationFailure(f"generation rejected ({resp.status_code}): {resp.text[:500]}")
        try:
            text = resp.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, ValueError) as exc:
            raise GenerationFailure(f"malformed generation response: {exc}") from exc
        return _strip_stop(text or "", params.stop)


class HTTPEncoder(Encoder):
    """Embeddings client: POST {base_url}/v1/embeddings."""

    def __init__(self, base_url: str, model: str, dim: int,
                 api_key: Optional[str] = None, timeout: float = 120.0, client=None):
        import httpx

        self.base_url = base_url.rstrip("/")
        self.encoder_id = model
        self.dim = dim
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = client or httpx.Client(timeout=timeout, headers=headers)

    def _embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        import httpx

        try:
            resp = self._client.post(
                f"{self.base_url}/v1/embeddings",
                json={"model": self.encoder_id, "input": list(texts)},
            )
        except httpx.HTTPError as exc:
            raise BackendUnreachable(f"embedding endpoint unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise BackendUnreachable(f"embedding endpoint returned {resp.status_code}")
        data = resp.json()["data"]
        matrix = np.asarray([row["embedding"] for row in data], dtype=np.float64)
        if matrix.shape != (len(texts), self.dim):
            raise BackendError(f"embedding shape {matrix.shape} != ({len(texts)}, {self.dim})")
        return matrix


def _strip_stop(text: str, stop: Optional[Tuple[str, ...]]) -> str:
    if not stop:
        return text
    cut = len(text)
    for token in stop:
        idx = text.find(token)
        if idx != -1:
            cut = min(cut, idx)
    return text[:cut]
