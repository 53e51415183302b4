"""HTTP service: training jobs, chat completions, embeddings.

Wire protocol (the same one the pipeline's clients speak):
    POST /v1/training-jobs
        {job_id, direction, dataset_url_or_inline, hyperparameters, base_model}
        -> {job_id}
    GET  /v1/training-jobs/{id} -> {status, model_id?, reason?, loss_curve, ...}
    POST /v1/chat/completions   -> {choices: [{message: {content}}]}
    POST /v1/embeddings         -> {data: [{embedding: [...]}]}

One training job runs at a time; later submissions queue behind a lock.
Serving endpoints are read-only and answer concurrently throughout.
"""

from __future__ import annotations

import copy
import json
import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import torch
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import tokenizer
from .lora import adapter_state, apply_lora
from .model import ModelConfig, TinyCausalLM
from .registry import CheckpointRegistry, RegistryError
from .sft import SftError, TrainerHyperparams, train

log = logging.getLogger("trainer_ref")

BASE_MODEL_ID = "base"


class SftRow(BaseModel):
    input: str
    target: str


class TrainingJobRequest(BaseModel):
    job_id: str = Field(min_length=1)
    direction: str
    dataset_url_or_inline: Union[List[SftRow], str]
    hyperparameters: Dict = Field(default_factory=dict)
    base_model: str = BASE_MODEL_ID


class ChatMessage(BaseModel):
    role: str
    content: str


class ChatRequest(BaseModel):
    model: str
    messages: List[ChatMessage]
    temperature: float = 0.0
    top_k: int = 0
    max_tokens: int = 256
    stop: Optional[List[str]] = None
    seed: Optional[int] = None


class EmbeddingRequest(BaseModel):
    model: str
    input: List[str]


@dataclass
class JobState:
    job_id: str
    direction: str
    status: str = "queued"
    model_id: Optional[str] = None
    reason: Optional[str] = None
    loss_curve: List[float] = field(default_factory=list)
    n_truncated: int = 0
    n_examples: int = 0

    def to_record(self) -> dict:
        return {
            "job_id": self.job_id,
            "direction": self.direction,
            "status": self.status,
            "model_id": self.model_id,
            "reason": self.reason,
            "loss_curve": self.loss_curve,
            "n_truncated": self.n_truncated,
            "n_examples": self.n_examples,
        }


@torch.no_grad()
def generate_text(model: TinyCausalLM, prompt: str, max_new_tokens: int,
                  temperature: float = 0.0, top_k: int = 0,
                  seed: Optional[int] = None,
                  stop: Optional[List[str]] = None) -> str:
    """Sample byte tokens until EOS, budget, or the context fills up."""
    model.eval()
    ids = [tokenizer.BOS_ID] + tokenizer.encode(prompt)
    ids = ids[-(model.config.max_seq - 1):]
    generator = torch.Generator().manual_seed(0 if seed is None else seed)
    out: List[int] = []
    for _ in range(max(1, max_new_tokens)):
        if len(ids) + len(out) >= model.config.max_seq:
            break
        logits = model(torch.tensor([ids + out], dtype=torch.long))[0, -1]
        logits[tokenizer.PAD_ID] = float("-inf")
        logits[tokenizer.BOS_ID] = float("-inf")
        if temperature <= 0.0:
            token = int(logits.argmax())
        else:
            scaled = logits / temperature
            if top_k > 0:
                threshold = scaled.topk(min(top_k, scaled.shape[0])).values[-1]
                scaled[scaled < threshold] = float("-inf")
            probs = torch.softmax(scaled, dim=-1)
            token = int(torch.multinomial(probs, 1, generator=generator))
        if token == tokenizer.EOS_ID:
            break
        out.append(token)
    text = tokenizer.decode(out)
    for marker in stop or []:
        cut = text.find(marker)
        if cut != -1:
            text = text[:cut]
    return text


class TrainerService:
    """App state: the frozen base model, the registry, and the job table."""

    def __init__(self, registry_dir: str | Path,
                 model_config: Optional[ModelConfig] = None, base_seed: int = 0):
        self.model_config = model_config or ModelConfig()
        self.base_seed = base_seed
        self.base = TinyCausalLM(self.model_config, seed=base_seed)
        self.base.eval()
        self.registry = CheckpointRegistry(registry_dir)
        self.jobs: Dict[str, JobState] = {}
        self._jobs_lock = threading.Lock()
        self._train_lock = threading.Lock()
        self._serve_cache: Dict[str, TinyCausalLM] = {}

    # -- resolution ---------------------------------------------------------

    def resolve(self, model_id: str) -> TinyCausalLM:
        if model_id == BASE_MODEL_ID:
            return self.base
        with self._jobs_lock:
            cached = self._serve_cache.get(model_id)
        if cached is not None:
            return cached
        try:
            model = self.registry.instantiate(model_id)
        except RegistryError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        with self._jobs_lock:
            self._serve_cache[model_id] = model
        return model

    def _resolve_rows(self, req: TrainingJobRequest) -> List:
        payload = req.dataset_url_or_inline
        if isinstance(payload, str):
            path = Path(payload)
            if not path.is_file():
                raise SftError(f"dataset file not found: {payload}")
            rows = []
            with path.open(encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        rec = json.loads(line)
                        rows.append((rec["input"], rec["target"]))
            return rows
        return [(row.input, row.target) for row in payload]

    # -- training -----------------------------------------------------------

    def submit(self, req: TrainingJobRequest) -> JobState:
        if req.direction not in ("forward", "backward"):
            raise SftError(f"direction must be forward/backward, got {req.direction!r}")
        rows = self._resolve_rows(req)
        if not rows:
            raise SftError("empty training set")
        hp = TrainerHyperparams.from_record(req.hyperparameters)
        if req.base_model != BASE_MODEL_ID and not self.registry.exists(req.base_model):
            raise SftError(f"unknown base_model: {req.base_model!r}")
        with self._jobs_lock:
            if req.job_id in self.jobs:
                raise SftError(f"duplicate job_id: {req.job_id!r}")
            state = JobState(job_id=req.job_id, direction=req.direction,
                             n_examples=len(rows))
            self.jobs[req.job_id] = state
        worker = threading.Thread(target=self._run_job, args=(req, rows, hp, state),
                                  name=f"train-{req.job_id}", daemon=True)
        worker.start()
        return state

    def _build_trainee(self, req: TrainingJobRequest, hp: TrainerHyperparams
                       ) -> TinyCausalLM:
        if req.base_model == BASE_MODEL_ID:
            model = copy.deepcopy(self.base)
            apply_lora(model, rank=hp.lora_rank, alpha=hp.lora_alpha,
                       dropout=hp.lora_dropout)
            return model
        # Continue from an earlier checkpoint's adapters (chained training).
        model = self.registry.instantiate(req.base_model)
        for module in model.modules():
            if hasattr(module, "lora_a"):
                module.dropout.p = hp.lora_dropout
        for name, p in model.named_parameters():
            p.requires_grad_(".lora_a" in name or ".lora_b" in name)
        return model

    def _run_job(self, req: TrainingJobRequest, rows, hp: TrainerHyperparams,
                 state: JobState) -> None:
        with self._train_lock:
            state.status = "running"
            try:
                model = self._build_trainee(req, hp)
                result = train(model, rows, hp, seed=self.base_seed,
                               log=lambda epoch, loss:
                                   log.info("job %s epoch %d loss %.4f",
                                            req.job_id, epoch, loss))
                assert len(result.loss_curve) == hp.epochs
                model_id = f"m-{req.job_id}"
                self.registry.save(model_id, adapter_state(model), self.model_config,
                                   self.base_seed, meta={
                                       "job_id": req.job_id,
                                       "direction": req.direction,
                                       "lora_rank": hp.lora_rank,
                                       "lora_alpha": hp.lora_alpha,
                                       "parent": req.base_model,
                                   })
                model.eval()
                with self._jobs_lock:
                    self._serve_cache[model_id] = model
                state.loss_curve = result.loss_curve
                state.n_truncated = result.n_truncated
                state.model_id = model_id
                state.status = "done"
            except Exception as exc:  # report, don't crash the service
                log.exception("job %s failed", req.job_id)
                state.reason = f"{type(exc).__name__}: {exc}"
                state.status = "failed"


def create_app(registry_dir: str | Path,
               model_config: Optional[ModelConfig] = None,
               base_seed: int = 0) -> FastAPI:
    service = TrainerService(registry_dir, model_config, base_seed)
    app = FastAPI(title="trainer-ref")
    app.state.service = service

    @app.post("/v1/training-jobs")
    def submit_job(req: TrainingJobRequest):
        try:
            state = service.submit(req)
        except SftError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {"job_id": state.job_id}

    @app.get("/v1/training-jobs/{job_id}")
    def job_status(job_id: str):
        with service._jobs_lock:
            state = service.jobs.get(job_id)
        if state is None:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id!r}")
        return state.to_record()

    @app.post("/v1/chat/completions")
    def chat(req: ChatRequest):
        model = service.resolve(req.model)
        prompt = "\n".join(m.content for m in req.messages if m.role == "user")
        text = generate_text(model, prompt, req.max_tokens, req.temperature,
                             req.top_k, req.seed, req.stop)
        return {"choices": [{"message": {"role": "assistant", "content": text}}]}

    @app.post("/v1/embeddings")
    def embeddings(req: EmbeddingRequest):
        model = service.resolve(req.model)
        data = []
        for index, text in enumerate(req.input):
            ids = ([tokenizer.BOS_ID] + tokenizer.encode(text))[:model.config.max_seq]
            vector = model.embed_text_ids(torch.tensor([ids], dtype=torch.long))[0]
            data.append({"index": index, "embedding": vector.tolist()})
        return {"data": data, "model": req.model}

    return app
