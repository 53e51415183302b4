"""Consistency filtering of the synthetic dataset.

Every pair's pseudo side is passed once through the opposite final model;
the L2 distance between the embeddings of the gold side and that
reconstruction scores the pair. Gold sides are clustered with k-means and
each cluster is pruned independently, either by dropping the farthest
fraction (distance_rank) or by greedy coverage retention
(kcenter_coverage).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .backends import (
    DIRECTION_BACKWARD,
    DIRECTION_FORWARD,
    Encoder,
    GenerationBackend,
    GenerationParams,
    ModelHandle,
    generate_many,
    generate_with_retry,
)
from .clustering import ClusterModel, kmeans
from .cycle import GOLD_INSTRUCTION, FinalDataset, PseudoPair
from .ioutils import ensure_dir, iter_jsonl, write_json, write_jsonl
from .kernels import kcenter_select
from .prompts import PromptRegistry

MODE_DISTANCE_RANK = "distance_rank"
MODE_KCENTER = "kcenter_coverage"

SCOPE_JOINT = "joint"
SCOPE_PER_SIDE = "per_side"

REASON_UNRECONSTRUCTABLE = "unreconstructable"


class FilterError(ValueError):
    pass


@dataclass(frozen=True)
class FilterConfig:
    k_clusters: int = 200
    drop_fraction: float = 0.05
    kmeans_max_iters: int = 100
    rng_seed: int = 0
    pruning_mode: str = MODE_DISTANCE_RANK
    cluster_scope: str = SCOPE_JOINT

    def __post_init__(self):
        if self.k_clusters < 1:
            raise FilterError(f"k_clusters must be positive, got {self.k_clusters}")
        if not (0.0 <= self.drop_fraction < 1.0):
            raise FilterError(f"drop_fraction must be in [0, 1), got {self.drop_fraction}")
        if self.pruning_mode not in (MODE_DISTANCE_RANK, MODE_KCENTER):
            raise FilterError(f"unknown pruning_mode {self.pruning_mode!r}")
        if self.cluster_scope not in (SCOPE_JOINT, SCOPE_PER_SIDE):
            raise FilterError(f"unknown cluster_scope {self.cluster_scope!r}")


@dataclass(frozen=True)
class FilterVerdict:
    """Outcome for one pair. distance is None when reconstruction failed;
    such pairs keep a cluster id (the gold side always embeds) but are
    dropped unconditionally."""

    pair_id: str
    reconstruction: str
    distance: Optional[float]
    cluster_id: int
    kept: bool
    reason: Optional[str] = None

    def to_record(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "reconstruction": self.reconstruction,
            "distance": self.distance,
            "cluster_id": self.cluster_id,
            "kept": self.kept,
            "reason": self.reason,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "FilterVerdict":
        return cls(pair_id=rec["pair_id"], reconstruction=rec["reconstruction"],
                   distance=rec["distance"], cluster_id=int(rec["cluster_id"]),
                   kept=bool(rec["kept"]), reason=rec.get("reason"))


def _reconstruction_prompt(pair: PseudoPair, registry: PromptRegistry):
    if pair.gold_side == GOLD_INSTRUCTION:
        return registry.render("pseudo_instruction", {"output": pair.response.strip()})
    return registry.render("pseudo_answer", {"instruction": pair.instruction.strip()})


def reconstruct(pair: PseudoPair, fwd_final: ModelHandle, bwd_final: ModelHandle,
                backend: GenerationBackend, registry: PromptRegistry,
                params: GenerationParams) -> str:
    """One-step reconstruction of the gold side from the pseudo side."""
    handle = bwd_final if pair.gold_side == GOLD_INSTRUCTION else fwd_final
    expect = DIRECTION_BACKWARD if pair.gold_side == GOLD_INSTRUCTION else DIRECTION_FORWARD
    if handle.direction != expect:
        raise FilterError(f"pair {pair.pair_id!r} needs a {expect} handle, got {handle.direction!r}")
    return generate_with_retry(backend, handle, _reconstruction_prompt(pair, registry), params)


def distance(gold: str, recon: str, encoder: Encoder) -> float:
    """L2 distance between the embeddings of gold text and reconstruction."""
    mat = encoder.embed_matrix([gold, recon])
    return float(np.linalg.norm(mat[0] - mat[1]))


def prune_cluster(members: Sequence[FilterVerdict], config: FilterConfig,
                  embeddings: Optional[np.ndarray] = None) -> List[FilterVerdict]:
    """Decide survivors within one cluster.

    The drop quota is floor(drop_fraction * |members|), capped so at least
    one member survives, and is charged against reconstructable members;
    unreconstructable ones are dropped on top of it. kcenter_coverage mode
    needs the members' gold embeddings (row-aligned with members).
    """
    if not members:
        raise FilterError("prune_cluster: empty cluster")
    cluster_ids = {m.cluster_id for m in members}
    if len(cluster_ids) != 1:
        raise FilterError(f"prune_cluster: mixed cluster_ids {sorted(cluster_ids)}")
    if embeddings is not None and len(embeddings) != len(members):
        raise FilterError("embeddings not aligned with members")

    quota = math.floor(config.drop_fraction * len(members))
    quota = min(quota, len(members) - 1)

    order = sorted(range(len(members)), key=lambda i: members[i].pair_id)
    recon = [i for i in order if members[i].distance is not None]
    if not recon:
        return []
    n_drop = min(quota, len(recon) - 1)
    n_keep = len(recon) - n_drop

    if config.pruning_mode == MODE_DISTANCE_RANK:
        # Sort candidates worst-first: distance descending, then pair_id
        # descending so equal distances shed the larger id first.
        by_id_desc = sorted(recon, key=lambda i: members[i].pair_id, reverse=True)
        worst_first = sorted(by_id_desc, key=lambda i: members[i].distance, reverse=True)
        kept_idx = set(worst_first[n_drop:])
    else:
        if embeddings is None:
            raise FilterError("kcenter_coverage requires member embeddings")
        points = np.ascontiguousarray(embeddings[recon], dtype=np.float64)
        seed_local = min(range(len(recon)),
                         key=lambda j: (members[recon[j]].distance, members[recon[j]].pair_id))
        selected = kcenter_select(points, n_keep, seed_local)
        kept_idx = {recon[j] for j in selected}

    return [members[i] for i in order if i in kept_idx]


@dataclass
class FilterResult:
    kept: List[PseudoPair]
    verdicts: List[FilterVerdict]
    models: Dict[str, ClusterModel]
    summary: dict


def _batch_reconstruct(pairs: Sequence[PseudoPair], fwd: ModelHandle, bwd: ModelHandle,
                       backend: GenerationBackend, registry: PromptRegistry,
                       params: GenerationParams, max_concurrency: int) -> List[Optional[str]]:
    """Reconstructions aligned with pairs; None where generation failed."""
    out: List[Optional[str]] = [None] * len(pairs)
    q_side = [i for i, p in enumerate(pairs) if p.gold_side == GOLD_INSTRUCTION]
    a_side = [i for i, p in enumerate(pairs) if p.gold_side != GOLD_INSTRUCTION]
    for index, handle in ((q_side, bwd), (a_side, fwd)):
        if not index:
            continue
        prompts = [_reconstruction_prompt(pairs[i], registry) for i in index]
        results = generate_many(backend, handle, prompts, params,
                                max_concurrency=max_concurrency,
                                item_ids=[pairs[i].pair_id for i in index])
        for i, (text, error) in zip(index, results):
            if error is None and text is not None and text.strip():
                out[i] = text
    return out


def _cluster_pool(pairs: Sequence[PseudoPair], gold_mat: np.ndarray,
                  config: FilterConfig) -> Tuple[np.ndarray, Dict[str, ClusterModel]]:
    """Cluster ids per pair. Joint scope pools both gold sides into one
    k-means; per_side runs one k-means per side with disjoint id ranges."""
    labels = np.empty(len(pairs), dtype=np.int64)
    models: Dict[str, ClusterModel] = {}
    if config.cluster_scope == SCOPE_JOINT:
        model = kmeans(gold_mat, config.k_clusters, max_iters=config.kmeans_max_iters,
                       seed=config.rng_seed, n_init=1,
                       keys=[p.pair_id for p in pairs])
        labels[:] = model.labels
        models[SCOPE_JOINT] = model
        return labels, models
    offset = 0
    for side in (GOLD_INSTRUCTION, "response"):
        idx = [i for i, p in enumerate(pairs) if p.gold_side == side]
        if not idx:
            continue
        model = kmeans(gold_mat[idx], config.k_clusters, max_iters=config.kmeans_max_iters,
                       seed=config.rng_seed, n_init=1,
                       keys=[pairs[i].pair_id for i in idx])
        labels[idx] = model.labels + offset
        models[side] = model
        offset += model.k
    return labels, models


def filter_dataset(final: FinalDataset, fwd_final: ModelHandle, bwd_final: ModelHandle,
                   backend: GenerationBackend, registry: PromptRegistry,
                   encoder: Encoder, config: FilterConfig,
                   params: Optional[GenerationParams] = None,
                   max_concurrency: int = 8) -> FilterResult:
    """Full pass: reconstruct, score, cluster, prune. Returns the surviving
    pairs in their original dataset order plus one verdict per input pair."""
    pairs = final.pairs
    if not pairs:
        raise FilterError("cannot filter an empty dataset")
    params = params or GenerationParams()

    recons = _batch_reconstruct(pairs, fwd_final, bwd_final, backend, registry,
                                params, max_concurrency)

    gold_mat = encoder.embed_matrix([p.gold_text for p in pairs])
    recon_index = [i for i, r in enumerate(recons) if r is not None]
    dists: List[Optional[float]] = [None] * len(pairs)
    if recon_index:
        recon_mat = encoder.embed_matrix([recons[i] for i in recon_index])
        diffs = gold_mat[recon_index] - recon_mat
        for row, i in enumerate(recon_index):
            dists[i] = float(np.linalg.norm(diffs[row]))

    labels, models = _cluster_pool(pairs, gold_mat, config)

    verdicts = [
        FilterVerdict(pair_id=p.pair_id,
                      reconstruction=recons[i] if recons[i] is not None else "",
                      distance=dists[i], cluster_id=int(labels[i]), kept=False,
                      reason=None if recons[i] is not None else REASON_UNRECONSTRUCTABLE)
        for i, p in enumerate(pairs)
    ]

    kept_ids = set()
    per_cluster: Dict[int, dict] = {}
    for cid in sorted(set(int(x) for x in labels)):
        member_idx = [i for i in range(len(pairs)) if labels[i] == cid]
        members = [verdicts[i] for i in member_idx]
        kept_members = prune_cluster(members, config, embeddings=gold_mat[member_idx])
        kept_ids.update(v.pair_id for v in kept_members)
        n_unrecon = sum(1 for v in members if v.distance is None)
        per_cluster[cid] = {
            "members": len(members),
            "kept": len(kept_members),
            "unreconstructable": n_unrecon,
            "retention": len(kept_members) / len(members),
        }

    verdicts = [replace(v, kept=v.pair_id in kept_ids) for v in verdicts]
    kept_pairs = [p for p in pairs if p.pair_id in kept_ids]
    summary = {
        "n_pairs": len(pairs),
        "n_kept": len(kept_pairs),
        "n_unreconstructable": sum(1 for v in verdicts if v.distance is None),
        "retention": len(kept_pairs) / len(pairs),
        "pruning_mode": config.pruning_mode,
        "cluster_scope": config.cluster_scope,
        "k_clusters": config.k_clusters,
        "drop_fraction": config.drop_fraction,
        "clusters": {str(cid): info for cid, info in per_cluster.items()},
    }
    return FilterResult(kept=kept_pairs, verdicts=verdicts, models=models, summary=summary)


def write_filter_outputs(result: FilterResult, out_dir: str | Path) -> None:
    out_dir = ensure_dir(out_dir)
    write_jsonl(out_dir / "d_cycle.jsonl", (p.to_record() for p in result.kept))
    write_jsonl(out_dir / "filter_report.jsonl", (v.to_record() for v in result.verdicts))
    write_json(out_dir / "filter_summary.json", result.summary)


def read_filter_report(path: str | Path) -> List[FilterVerdict]:
    return [FilterVerdict.from_record(rec) for rec in iter_jsonl(path)]
