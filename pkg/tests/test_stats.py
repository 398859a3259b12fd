import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sle_lab.ensemble import chunks, concat, map_chunks, resolve_jobs
from sle_lab.stats import EnsembleStats, RunningMoments, dumps, ols_fit

floats = st.floats(-1e3, 1e3, allow_nan=False)


@given(st.lists(floats, min_size=1, max_size=40), st.lists(floats, min_size=1, max_size=40))
def test_running_moments_merge_matches_pooled(xs, ys):
    m = RunningMoments.of(xs).merge(RunningMoments.of(ys))
    ref = RunningMoments.of(xs + ys)
    assert m.count == ref.count
    assert m.mean == pytest.approx(ref.mean, abs=1e-9)
    assert m.m2 == pytest.approx(ref.m2, rel=1e-7, abs=1e-6)


@given(st.lists(floats, min_size=3, max_size=30), st.lists(floats, min_size=1, max_size=30),
       st.lists(floats, min_size=1, max_size=30))
def test_running_moments_merge_associative(a, b, c):
    A, B, C = (RunningMoments.of(v) for v in (a, b, c))
    left, right = A.merge(B).merge(C), A.merge(B.merge(C))
    assert left.mean == pytest.approx(right.mean, abs=1e-9)
    assert left.m2 == pytest.approx(right.m2, rel=1e-7, abs=1e-6)


def test_running_moments_empty_and_stderr():
    assert RunningMoments.of([]).count == 0
    assert RunningMoments().merge(RunningMoments()).count == 0
    m = RunningMoments.of([1.0, 3.0])
    assert m.variance == 2.0 and m.stderr == 1.0
    assert math.isnan(RunningMoments.of([1.0]).stderr)


def test_ensemble_stats_zscore():
    es = EnsembleStats.from_samples([1.0, 3.0], 1.0, 0.1)
    assert es.zscore == pytest.approx(1.0) and es.passes()
    assert EnsembleStats.from_samples([2.0, 2.0], 2.0, 0.1).zscore == 0.0
    assert EnsembleStats.from_samples([2.0, 2.0], 1.0, 0.1).zscore == math.inf
    assert set(es.to_dict()) == {"n_paths", "mean", "stderr", "target", "zscore", "dt"}


def test_ols_exact_line():
    x = np.linspace(0, 1, 7)
    fit = ols_fit(x, 3 * x - 2)
    assert fit.slope == pytest.approx(3) and fit.intercept == pytest.approx(-2)
    assert fit.r2 == pytest.approx(1) and fit.stderr == pytest.approx(0, abs=1e-12)
    with pytest.raises(ValueError):
        ols_fit([1.0], [2.0])


def test_ols_matches_polyfit():
    rng = np.random.default_rng(0)
    x = rng.random(30)
    y = 2 * x + rng.normal(size=30)
    slope, intercept = np.polyfit(x, y, 1)
    fit = ols_fit(x, y)
    assert fit.slope == pytest.approx(slope) and fit.intercept == pytest.approx(intercept)


def test_dumps_handles_numpy_and_complex():
    s = dumps({"a": np.arange(3), "b": np.float64(1.5), "c": 1 + 2j})
    assert json.loads(s) == {"a": [0, 1, 2], "b": 1.5, "c": [1.0, 2.0]}


def _square(indices, *, k):
    return {"v": np.array([i * i + k for i in indices])}


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 50), st.integers(1, 60))
def test_chunks_cover_in_order(n, size):
    idx = [i for c in chunks(n, size) for i in c]
    assert idx == list(range(n))


def test_map_chunks_independent_of_workers(monkeypatch):
    a = concat(map_chunks(_square, 23, 5, 1, k=1), "v")
    b = concat(map_chunks(_square, 23, 4, 3, k=1), "v")
    assert np.array_equal(a, b)
    monkeypatch.setenv("SLE_LAB_JOBS", "3")
    assert resolve_jobs(None) == 3
    assert resolve_jobs(0) == 1
