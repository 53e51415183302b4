"""Seed selection and back-translation baselines: count arithmetic,
reproducibility, cluster coverage, and the emission mirrors."""

import pytest

from cyclesynth.backends import DIRECTION_BACKWARD, ModelHandle
from cyclesynth.baselines import (
    METHOD_CLUSTER,
    METHOD_RANDOM,
    BaselineError,
    GoldPair,
    SeedSet,
    emit_bt_training,
    emit_inverse_training,
    generate_pseudo_questions,
    load_gold_pairs,
    sample_seed,
    seed_count,
    write_seed_set,
)
from cyclesynth.reformat import KIND_RESPONSE, Record
from cyclesynth.training import TrainingHyperparams


def gold_corpus(n=40):
    return [GoldPair(pair_id=f"g{i:03d}",
                     question=f"What does part {i} of the manual cover?",
                     answer=f"Part {i} covers routine upkeep of unit {i % 7}.")
            for i in range(n)]


def test_seed_count_rounds_half_up():
    assert seed_count(10, 0.05) == 1      # 0.5 rounds up, not to even
    assert seed_count(10, 0.1) == 1
    assert seed_count(10, 0.25) == 3      # 2.5 -> 3
    assert seed_count(100, 0.05) == 5
    assert seed_count(31, 0.10) == 3      # 3.1 -> 3
    assert seed_count(15, 0.10) == 2      # 1.5 -> 2
    assert seed_count(7, 1.0) == 7


@pytest.mark.parametrize("fraction,expected", [(0.05, 2), (0.10, 4), (0.20, 8)])
def test_random_selection_counts(fraction, expected):
    seed = sample_seed(gold_corpus(40), METHOD_RANDOM, fraction, rng_seed=0)
    assert len(seed.pairs) == expected
    assert seed.meta["n_selected"] == expected
    assert seed.meta["n_gold"] == 40


def test_random_selection_reproducible_and_seed_sensitive():
    gold = gold_corpus(40)
    a = sample_seed(gold, METHOD_RANDOM, 0.2, rng_seed=7)
    b = sample_seed(gold, METHOD_RANDOM, 0.2, rng_seed=7)
    assert [p.pair_id for p in a.pairs] == [p.pair_id for p in b.pairs]
    c = sample_seed(gold, METHOD_RANDOM, 0.2, rng_seed=8)
    assert [p.pair_id for p in c.pairs] != [p.pair_id for p in a.pairs]
    # selection preserves corpus order and never repeats
    ids = [p.pair_id for p in a.pairs]
    assert ids == sorted(ids)
    assert len(set(ids)) == len(ids)


def test_cluster_selection_covers_every_cluster(encoder):
    # Four well-separated answer groups; asking for four representatives
    # must return one from each group.
    gold = []
    for group, stem in enumerate(("alpha alpha alpha", "bravo bravo bravo",
                                  "charlie charlie charlie", "delta delta delta")):
        for i in range(5):
            gold.append(GoldPair(pair_id=f"g{group}{i}",
                                 question=f"Q {group}-{i}?",
                                 answer=f"{stem} {stem} variant {i}"))
    seed = sample_seed(gold, METHOD_CLUSTER, 0.2, rng_seed=0, encoder=encoder)
    assert len(seed.pairs) == 4
    groups = {p.pair_id[1] for p in seed.pairs}
    assert groups == {"0", "1", "2", "3"}


def test_cluster_selection_is_reproducible(encoder):
    gold = gold_corpus(30)
    a = sample_seed(gold, METHOD_CLUSTER, 0.1, rng_seed=3, encoder=encoder)
    b = sample_seed(gold, METHOD_CLUSTER, 0.1, rng_seed=3, encoder=encoder)
    assert [p.pair_id for p in a.pairs] == [p.pair_id for p in b.pairs]
    assert len(a.pairs) == 3


def test_cluster_selection_fills_shortfall_to_exact_count(encoder):
    # All answers identical: k-means collapses to one representative, the
    # rest of the quota is filled with the lowest-index pairs.
    gold = [GoldPair(pair_id=f"g{i}", question=f"Q{i}?", answer="same text")
            for i in range(10)]
    seed = sample_seed(gold, METHOD_CLUSTER, 0.5, rng_seed=0, encoder=encoder)
    assert len(seed.pairs) == 5


def test_sample_seed_validation(encoder):
    gold = gold_corpus(10)
    with pytest.raises(BaselineError, match="empty"):
        sample_seed([], METHOD_RANDOM, 0.1, rng_seed=0)
    with pytest.raises(BaselineError, match="fraction"):
        sample_seed(gold, METHOD_RANDOM, 0.0, rng_seed=0)
    with pytest.raises(BaselineError, match="fraction"):
        sample_seed(gold, METHOD_RANDOM, 1.5, rng_seed=0)
    with pytest.raises(BaselineError, match="selects nothing"):
        sample_seed(gold, METHOD_RANDOM, 0.01, rng_seed=0)
    with pytest.raises(BaselineError, match="encoder"):
        sample_seed(gold, METHOD_CLUSTER, 0.5, rng_seed=0)
    with pytest.raises(BaselineError, match="unknown selection"):
        sample_seed(gold, "stratified", 0.5, rng_seed=0)


def test_seed_set_rejects_duplicates():
    pair = GoldPair(pair_id="g0", question="Q?", answer="A.")
    with pytest.raises(BaselineError, match="duplicate"):
        SeedSet(pairs=[pair, pair], selection=METHOD_RANDOM, fraction=0.5,
                rng_seed=0, n_gold=4)


def test_inverse_training_emission(registry):
    seed = sample_seed(gold_corpus(10), METHOD_RANDOM, 0.3, rng_seed=1)
    job = emit_inverse_training(seed, TrainingHyperparams(),
                                ModelHandle("base", direction=DIRECTION_BACKWARD),
                                "job-inv", registry)
    assert job.direction == DIRECTION_BACKWARD
    assert len(job.examples) == 3
    for pair, ex in zip(seed.pairs, job.examples):
        assert ex.target == pair.question
        rendered = registry.render("pseudo_instruction", {"output": pair.answer.strip()})
        assert ex.input == rendered.text


def test_bt_flow_preserves_gold_answers(registry, backend, params):
    answers = [Record(record_id=f"a{i:03d}", kind=KIND_RESPONSE,
                      text=f"Step {i}: tighten the clamp.", raw_text="", source="t")
               for i in range(6)]
    inv = ModelHandle("inv", direction=DIRECTION_BACKWARD, lineage=("job-inv",))
    pairs, failures = generate_pseudo_questions(answers, inv, backend, registry, params)
    assert not failures
    assert len(pairs) == 6
    assert all(p.iteration == 0 for p in pairs)
    assert all(p.pair_id.startswith("bwd:00:") for p in pairs)

    job = emit_bt_training(pairs, TrainingHyperparams(),
                           ModelHandle("base", direction="forward"),
                           "job-bt", registry)
    targets = {ex.target for ex in job.examples}
    assert targets == {rec.text for rec in answers}   # gold answers verbatim


def test_seed_set_round_trip(tmp_path):
    seed = sample_seed(gold_corpus(20), METHOD_RANDOM, 0.25, rng_seed=4)
    write_seed_set(seed, tmp_path)
    loaded = load_gold_pairs(tmp_path / "seed_set.jsonl")
    assert loaded == seed.pairs
    import json

    meta = json.loads((tmp_path / "seed_set.meta.json").read_text())
    assert meta == seed.meta


def test_load_gold_pairs_fallback_ids(tmp_path):
    path = tmp_path / "gold.jsonl"
    path.write_text('{"question": "Q?", "answer": "A."}\n', encoding="utf-8")
    pairs = load_gold_pairs(path)
    assert pairs[0].pair_id == "gold-000000"
