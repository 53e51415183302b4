"""Training job specs and trainer-service clients.

Fine-tuning itself happens out of process. A job carries a direction-tagged
SFT dataset of {input, target} examples plus hyperparameters; the trainer
service resolves it to a model handle. The loss contract is NLL of the
target tokens conditioned on the input (input tokens masked out).

Wire protocol:
    POST /v1/training-jobs
        {job_id, direction, dataset_url_or_inline, hyperparameters, base_model}
        -> {job_id}
    GET /v1/training-jobs/{id} -> {status, model_id?}
"""

from __future__ import annotations

import abc
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from .backends import DIRECTION_BACKWARD, DIRECTION_FORWARD, ModelHandle
from .ioutils import read_jsonl, write_jsonl

OBJECTIVE_MASKED_NLL = "nll_target_given_input"


class TrainingError(RuntimeError):
    pass


class TrainerRejected(TrainingError):
    """Trainer refused the job (schema or validation problem)."""


class TrainerJobFailed(TrainingError):
    pass


class TrainerTimeout(TrainingError):
    """Polling budget exhausted; the run can be resumed once the job settles."""


@dataclass(frozen=True)
class TrainingHyperparams:
    lora_rank: int = 8
    lora_alpha: int = 16
    lora_dropout: float = 0.05
    learning_rate: float = 1e-4
    lr_schedule: str = "cosine"
    micro_batch: int = 4
    effective_batch: int = 32
    cutoff_len: int = 1024
    epochs: int = 3

    def to_record(self) -> Dict:
        return asdict(self)


@dataclass(frozen=True)
class SftExample:
    input: str
    target: str


@dataclass
class TrainingJobSpec:
    job_id: str
    direction: str
    examples: List[SftExample]
    hyperparams: TrainingHyperparams = field(default_factory=TrainingHyperparams)
    base_handle: ModelHandle = field(default_factory=lambda: ModelHandle("base"))
    objective: str = OBJECTIVE_MASKED_NLL
    dataset_path: Optional[Path] = None

    def __post_init__(self):
        if self.direction not in (DIRECTION_FORWARD, DIRECTION_BACKWARD):
            raise TrainingError(f"job direction must be forward/backward, got {self.direction!r}")
        if not self.examples:
            raise TrainingError(f"job {self.job_id!r}: empty training set")

    def write_dataset(self, path: str | Path) -> Path:
        path = Path(path)
        write_jsonl(path, ({"input": ex.input, "target": ex.target} for ex in self.examples))
        self.dataset_path = path
        return path

    def to_record(self, dataset_path: Optional[str] = None) -> Dict:
        return {
            "job_id": self.job_id,
            "direction": self.direction,
            "objective": self.objective,
            "dataset_path": dataset_path or (str(self.dataset_path) if self.dataset_path else None),
            "n_examples": len(self.examples),
            "hyperparameters": self.hyperparams.to_record(),
            "base_model": self.base_handle.to_record(),
        }

    @classmethod
    def from_record(cls, rec: Dict, dataset_root: Optional[Path] = None) -> "TrainingJobSpec":
        dataset_path = rec.get("dataset_path")
        if dataset_path is None:
            raise TrainingError("job record has no dataset_path")
        path = Path(dataset_path)
        if dataset_root is not None and not path.is_absolute():
            path = dataset_root / path
        examples = [SftExample(input=row["input"], target=row["target"])
                    for row in read_jsonl(path)]
        return cls(
            job_id=rec["job_id"],
            direction=rec["direction"],
            examples=examples,
            hyperparams=TrainingHyperparams(**rec["hyperparameters"]),
            base_handle=ModelHandle.from_record(rec["base_model"]),
            objective=rec.get("objective", OBJECTIVE_MASKED_NLL),
            dataset_path=path,
        )


class TrainerClient(abc.ABC):
    """Blocking submit-and-poll interface to a trainer service."""

    @abc.abstractmethod
    def submit(self, job: TrainingJobSpec) -> ModelHandle:
        """Run the job to completion and return the trained model handle."""


class MockTrainer(TrainerClient):
    """Identity trainer: returns the base handle tagged with the job id.

    With the invertible mock backend this realizes a zero-reconstruction-loss
    fixed point, which is exactly what desk-scale determinism tests need.
    """

    def __init__(self):
        self.jobs: List[TrainingJobSpec] = []

    def submit(self, job: TrainingJobSpec) -> ModelHandle:
        self.jobs.append(job)
        return job.base_handle.trained(job.job_id, direction=job.direction)


class HTTPTrainer(TrainerClient):
    def __init__(self, base_url: str, api_key: Optional[str] = None,
                 poll_interval: float = 2.0, poll_timeout: float = 3600.0,
                 inline_dataset: bool = True, client=None):
        import httpx

        self.base_url = base_url.rstrip("/")
        self.poll_interval = poll_interval
        self.poll_timeout = poll_timeout
        self.inline_dataset = inline_dataset
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = client or httpx.Client(timeout=120.0, headers=headers)

    def submit(self, job: TrainingJobSpec) -> ModelHandle:
        if self.inline_dataset:
            dataset = [{"input": ex.input, "target": ex.target} for ex in job.examples]
        else:
            if job.dataset_path is None:
                raise TrainingError("dataset_path required when not inlining the dataset")
            dataset = str(job.dataset_path)
        payload = {
            "job_id": job.job_id,
            "direction": job.direction,
            "dataset_url_or_inline": dataset,
            "hyperparameters": job.hyperparams.to_record(),
            "base_model": job.base_handle.handle_id,
        }
        resp = self._client.post(f"{self.base_url}/v1/training-jobs", json=payload)
        if resp.status_code in (400, 422):
            raise TrainerRejected(f"trainer rejected job {job.job_id!r}: {resp.text[:500]}")
        if resp.status_code != 200:
            raise TrainingError(f"trainer returned {resp.status_code}: {resp.text[:500]}")
        job_id = resp.json()["job_id"]
        return self._poll(job, job_id)

    def _poll(self, job: TrainingJobSpec, job_id: str) -> ModelHandle:
        deadline = time.monotonic() + self.poll_timeout
        while time.monotonic() < deadline:
            resp = self._client.get(f"{self.base_url}/v1/training-jobs/{job_id}")
            if resp.status_code != 200:
                raise TrainingError(f"job status returned {resp.status_code}: {resp.text[:500]}")
            state = resp.json()
            status = state.get("status")
            if status == "done":
                model_id = state.get("model_id")
                if not model_id:
                    raise TrainingError(f"job {job_id!r} done but no model_id reported")
                return job.base_handle.trained(job_id, handle_id=model_id,
                                               direction=job.direction)
            if status == "failed":
                raise TrainerJobFailed(f"job {job_id!r} failed: {state.get('reason', 'unknown')}")
            time.sleep(self.poll_interval)
        raise TrainerTimeout(f"job {job_id!r} did not settle within {self.poll_timeout}s")
