"""Kernel parity and correctness: compiled vs pure implementations against
slow hand-written oracles, with exact tie-breaking checks."""

import os
import subprocess
import sys

import numpy as np
import pytest

from cyclesynth.kernels import KERNEL_BACKEND, available_backends

BACKENDS = available_backends()


def oracle_assign(points, centroids):
    """Exhaustive nearest-centroid scan, strict < keeps the lowest index."""
    labels, sqds = [], []
    for p in points:
        best_j, best_s = 0, None
        for j, c in enumerate(centroids):
            s = sum((float(a) - float(b)) ** 2 for a, b in zip(p, c))
            if best_s is None or s < best_s:
                best_j, best_s = j, s
        labels.append(best_j)
        sqds.append(best_s)
    return labels, sqds


def oracle_kcenter(points, n_select, seed_index):
    """Greedy maximin in plain Python; ties resolve to the lowest index."""
    pts = [tuple(float(v) for v in p) for p in points]

    def sqd(a, b):
        return sum((x - y) ** 2 for x, y in zip(a, b))

    selected = [seed_index]
    remaining = sorted(set(range(len(pts))) - {seed_index})
    while len(selected) < n_select:
        best_i, best_d = None, -1.0
        for i in remaining:
            d = min(sqd(pts[i], pts[s]) for s in selected)
            if d > best_d:
                best_i, best_d = i, d
        selected.append(best_i)
        remaining.remove(best_i)
    return selected


def oracle_bigrams(text, dim):
    row = [0.0] * dim
    for a, b in zip(text, text[1:]):
        row[((ord(a) * 1000003) ^ ord(b)) % dim] += 1.0
    return row


def test_compiled_backend_is_built():
    # The package ships a compiled core; a missing extension would silently
    # fall back, so pin it here.
    assert "cython" in BACKENDS
    assert "python" in BACKENDS
    assert KERNEL_BACKEND == "cython"


def test_env_override_forces_pure_backend():
    env = dict(os.environ, CYCLESYNTH_PURE_KERNELS="1")
    out = subprocess.run(
        [sys.executable, "-c", "from cyclesynth.kernels import KERNEL_BACKEND; print(KERNEL_BACKEND)"],
        capture_output=True, text=True, env=env, check=True,
    )
    assert out.stdout.strip() == "python"


@pytest.mark.parametrize("impl", BACKENDS.values(), ids=list(BACKENDS))
def test_assign_nearest_matches_oracle_on_integer_grids(impl):
    rng = np.random.default_rng(4021)
    for _ in range(200):
        n = int(rng.integers(1, 12))
        k = int(rng.integers(1, 6))
        d = int(rng.integers(1, 5))
        points = rng.integers(-5, 6, size=(n, d)).astype(np.float64)
        centroids = rng.integers(-5, 6, size=(k, d)).astype(np.float64)
        labels, sqdists = impl.assign_nearest(points, centroids)
        exp_labels, exp_sqds = oracle_assign(points, centroids)
        assert labels.tolist() == exp_labels
        assert sqdists.tolist() == exp_sqds


@pytest.mark.parametrize("impl", BACKENDS.values(), ids=list(BACKENDS))
def test_assign_nearest_ties_pick_lowest_index(impl):
    # Point exactly between two centroids, and an exact duplicate centroid.
    labels, sqdists = impl.assign_nearest(
        np.array([[1.0], [3.0]]), np.array([[0.0], [2.0], [2.0]])
    )
    assert labels.tolist() == [0, 1]
    assert sqdists.tolist() == [1.0, 1.0]


@pytest.mark.parametrize("impl", BACKENDS.values(), ids=list(BACKENDS))
def test_assign_nearest_single_centroid(impl):
    points = np.arange(12, dtype=np.float64).reshape(4, 3)
    labels, sqdists = impl.assign_nearest(points, points[1:2])
    assert labels.tolist() == [0, 0, 0, 0]
    assert sqdists[1] == 0.0


def test_assign_nearest_backend_parity_on_floats():
    rng = np.random.default_rng(77)
    for _ in range(50):
        points = rng.normal(size=(rng.integers(1, 40), 8))
        centroids = rng.normal(size=(rng.integers(1, 7), 8))
        results = {
            name: impl.assign_nearest(points, centroids)
            for name, impl in BACKENDS.items()
        }
        base_labels, base_sqd = results["python"]
        for labels, sqd in results.values():
            assert np.array_equal(labels, base_labels)
            np.testing.assert_allclose(sqd, base_sqd, rtol=1e-12, atol=0)


@pytest.mark.parametrize("impl", BACKENDS.values(), ids=list(BACKENDS))
def test_kcenter_matches_oracle(impl):
    rng = np.random.default_rng(5150)
    for _ in range(200):
        n = int(rng.integers(1, 11))
        d = int(rng.integers(1, 4))
        points = rng.integers(-4, 5, size=(n, d)).astype(np.float64)
        n_select = int(rng.integers(1, n + 1))
        seed_index = int(rng.integers(0, n))
        got = impl.kcenter_select(points, n_select, seed_index)
        assert got.tolist() == oracle_kcenter(points, n_select, seed_index)


@pytest.mark.parametrize("impl", BACKENDS.values(), ids=list(BACKENDS))
def test_kcenter_square_tie_order(impl):
    # Unit square from corner 0: opposite corner first, then the tie between
    # the two remaining corners resolves to the lower index.
    square = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    assert impl.kcenter_select(square, 4, 0).tolist() == [0, 3, 1, 2]


@pytest.mark.parametrize("impl", BACKENDS.values(), ids=list(BACKENDS))
def test_kcenter_identical_points(impl):
    points = np.ones((5, 2))
    assert impl.kcenter_select(points, 4, 2).tolist() == [2, 0, 1, 3]


@pytest.mark.parametrize("impl", BACKENDS.values(), ids=list(BACKENDS))
def test_kcenter_rejects_bad_arguments(impl):
    points = np.zeros((3, 2))
    with pytest.raises(ValueError):
        impl.kcenter_select(points, 0, 0)
    with pytest.raises(ValueError):
        impl.kcenter_select(points, 4, 0)
    with pytest.raises(ValueError):
        impl.kcenter_select(points, 2, -1)
    with pytest.raises(ValueError):
        impl.kcenter_select(points, 2, 3)


@pytest.mark.parametrize("impl", BACKENDS.values(), ids=list(BACKENDS))
def test_bigram_counts_matches_dict_oracle(impl):
    rng = np.random.default_rng(8080)
    alphabet = list("abcdefg XYZ?.!？éß𝄞\n")
    texts = [
        "".join(rng.choice(alphabet, size=rng.integers(0, 30)))
        for _ in range(100)
    ]
    for dim in (1, 7, 64):
        got = impl.bigram_counts(texts, dim)
        assert got.shape == (len(texts), dim)
        for i, text in enumerate(texts):
            assert got[i].tolist() == oracle_bigrams(text, dim)


@pytest.mark.parametrize("impl", BACKENDS.values(), ids=list(BACKENDS))
def test_bigram_counts_edge_cases(impl):
    out = impl.bigram_counts(["", "a", "ab"], 16)
    assert not out[0].any()
    assert not out[1].any()
    assert out[2].sum() == 1.0
    # Row mass equals the number of adjacent pairs.
    out = impl.bigram_counts(["hello world"], 8)
    assert out[0].sum() == 10.0
    with pytest.raises(ValueError):
        impl.bigram_counts(["x"], 0)
