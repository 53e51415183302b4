"""Quality evaluation of synthetic pairs and correlation reporting.

A judge model scores a seeded sample of pairs on a 0-10 relevance scale;
the kit parses the replies, reports the mean, and can correlate per-method
quality means against externally measured downstream metrics. It never
runs benchmarks itself; performance numbers arrive via a scores file.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .backends import GenerationBackend, GenerationParams, ModelHandle, generate_many
from .cycle import PseudoPair
from .ioutils import ensure_dir, write_json, write_jsonl
from .prompts import PromptRegistry
from .stats import StatsError, pearson

# Order used to align vectors when correlating across methods. Methods
# outside this list follow in lexicographic order.
CANONICAL_METHODS = (
    "rand-5", "rand-10", "rand-20",
    "clust-5", "clust-10", "clust-20",
    "cycle",
)

FLAG_THRESHOLD = 0.10

_SCORE_TOKEN = re.compile(r"\d+(?:\.\d+)?")


class EvalError(ValueError):
    pass


@dataclass(frozen=True)
class JudgeScore:
    pair_id: str
    score: float
    raw_reply: str

    def to_record(self) -> dict:
        return {"pair_id": self.pair_id, "score": self.score, "raw_reply": self.raw_reply}


@dataclass
class JudgeSummary:
    scores: List[JudgeScore]
    failures: List[dict]  # {pair_id, reason, raw_reply?}
    n_sampled: int
    rng_seed: int
    flagged: bool

    @property
    def mean(self) -> Optional[float]:
        if not self.scores:
            return None
        return sum(s.score for s in self.scores) / len(self.scores)

    @property
    def meta(self) -> dict:
        return {
            "n_sampled": self.n_sampled,
            "n_parsed": len(self.scores),
            "n_failures": len(self.failures),
            "mean": self.mean,
            "flagged": self.flagged,
            "rng_seed": self.rng_seed,
        }


def parse_score(reply: str) -> Optional[float]:
    """First unsigned numeric token, if it lies in [0, 10]."""
    m = _SCORE_TOKEN.search(reply)
    if m is None:
        return None
    value = float(m.group(0))
    if value > 10.0:
        return None
    return value


def judge_pairs(pairs: Sequence[PseudoPair], judge: ModelHandle,
                backend: GenerationBackend, registry: PromptRegistry,
                params: Optional[GenerationParams] = None, sample_n: int = 500,
                rng_seed: int = 0, max_concurrency: int = 8) -> JudgeSummary:
    """Score a seeded sample (without replacement) of the pairs.

    Unparseable or failed replies are excluded from the mean and counted;
    the summary is flagged when they exceed 10% of the sample.
    """
    if not pairs:
        raise EvalError("no pairs to judge")
    if sample_n < 1:
        raise EvalError(f"sample_n must be positive, got {sample_n}")
    rng = np.random.default_rng(rng_seed)
    take = min(sample_n, len(pairs))
    idx = sorted(int(i) for i in rng.choice(len(pairs), size=take, replace=False))
    sampled = [pairs[i] for i in idx]

    prompts = [registry.render("qa_judge", {"answer": p.response, "question": p.instruction})
               for p in sampled]
    results = generate_many(backend, judge, prompts, params or GenerationParams(),
                            max_concurrency=max_concurrency,
                            item_ids=[p.pair_id for p in sampled])

    scores: List[JudgeScore] = []
    failures: List[dict] = []
    for pair, (text, error) in zip(sampled, results):
        if error is not None or text is None:
            failures.append({"pair_id": pair.pair_id, "reason": str(error)})
            continue
        value = parse_score(text)
        if value is None:
            failures.append({"pair_id": pair.pair_id, "reason": "unparseable score",
                             "raw_reply": text})
            continue
        scores.append(JudgeScore(pair_id=pair.pair_id, score=value, raw_reply=text))

    flagged = len(failures) > FLAG_THRESHOLD * take
    return JudgeSummary(scores=scores, failures=failures, n_sampled=take,
                        rng_seed=rng_seed, flagged=flagged)


@dataclass
class CorrelationReport:
    methods: List[str]
    quality: List[float]
    performance: List[float]
    r: float
    p: float

    @property
    def n(self) -> int:
        return len(self.methods)

    def to_record(self) -> dict:
        return {
            "methods": self.methods,
            "quality": self.quality,
            "performance": self.performance,
            "r": self.r,
            "p": self.p,
            "n": self.n,
        }


def method_order(methods: Sequence[str]) -> List[str]:
    canon = [m for m in CANONICAL_METHODS if m in methods]
    extra = sorted(m for m in methods if m not in CANONICAL_METHODS)
    return canon + extra


def build_report(quality: Dict[str, float], perf: Dict[str, float]) -> CorrelationReport:
    """Correlate per-method quality means against downstream metrics."""
    if set(quality) != set(perf):
        missing = set(quality) ^ set(perf)
        raise EvalError(f"method keys differ between quality and performance: {sorted(missing)}")
    methods = method_order(list(quality))
    x = [quality[m] for m in methods]
    y = [perf[m] for m in methods]
    try:
        r, p = pearson(x, y)
    except StatsError as exc:
        raise EvalError(str(exc)) from exc
    return CorrelationReport(methods=methods, quality=x, performance=y, r=r, p=p)


def load_scores(path: str | Path) -> Dict[str, float]:
    """Scores file: either one JSON object {method: value} or JSONL rows
    with "method" and "value" keys."""
    text = Path(path).read_text(encoding="utf-8").strip()
    if not text:
        raise EvalError(f"empty scores file: {path}")
    if text.startswith("{") and "\n{" not in text:
        data = json.loads(text)
        return {str(k): float(v) for k, v in data.items()}
    out: Dict[str, float] = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        out[str(rec["method"])] = float(rec["value"])
    return out


def write_judge_outputs(summary: JudgeSummary, out_dir: str | Path) -> None:
    out_dir = ensure_dir(out_dir)
    write_jsonl(out_dir / "judge_scores.jsonl", (s.to_record() for s in summary.scores))
    if summary.failures:
        write_jsonl(out_dir / "judge_failures.jsonl", summary.failures)
    write_json(out_dir / "judge_summary.json", summary.meta)


def write_correlation_report(report: CorrelationReport, path: str | Path) -> None:
    write_json(path, report.to_record())
