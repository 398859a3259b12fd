import math

import numpy as np
import pytest

from sle_lab.dimension import (
    box_count_dimension,
    box_counts,
    default_scales,
    dimension_ensemble,
    holder_report,
    step_spacing,
    variation_dimension,
)
from sle_lab.driving import constant_driver, sample_brownian_driver
from sle_lab.loewner import Trace, trace
from sle_lab.params import DomainError


def segment(n=4096, direction=1.0):
    t = np.linspace(0.0, 1.0, n + 1)
    return Trace(t, direction * t + 0.1j, y0=0.0)


def test_box_count_segment():
    # coarse boxes see the end effect N = L/eps + 1, so fit over fine scales
    scales = np.geomspace(1e-3, 10**-1.5, 8)
    assert box_count_dimension(segment(), scales).slope == pytest.approx(1.0, abs=0.05)


def test_box_count_filled_square():
    g = np.linspace(0, 1, 400)
    pts = (g[:, None] + 1j * g[None, :]).ravel()
    scales = np.geomspace(0.005, 0.2, 8)
    assert box_count_dimension(pts, scales, polyline=False).slope == pytest.approx(2.0, abs=0.1)


def test_box_count_rigid_motion_invariance():
    tr = trace(sample_brownian_driver(1.0, 1 / 4096, seed=3, a=0.75))
    pts = tr.window(0.1)
    scales = default_scales(pts)
    base = box_count_dimension(pts, scales).slope
    moved = pts * np.exp(0.7j) + (3 - 2j)
    assert box_count_dimension(moved, scales).slope == pytest.approx(base, abs=0.05)


def test_box_count_validation():
    pts = segment().points
    with pytest.raises(DomainError):
        box_count_dimension(pts, [0.01, 0.02, 0.04])
    with pytest.raises(DomainError):
        box_count_dimension(pts, np.geomspace(0.01, 0.1, 5))
    with pytest.raises(DomainError):
        box_count_dimension(pts, np.geomspace(1e-5, 0.1, 6))


def test_box_counts_single_point_and_scale_order():
    c = box_counts(np.array([0.3 + 0.3j]), [0.1, 0.2], polyline=False)
    assert np.all(c == 1)
    pts = segment().points
    c = box_counts(pts, np.geomspace(0.01, 0.3, 6))
    assert np.all(np.diff(c) <= 0)


def test_step_spacing():
    assert step_spacing(segment(100).points) == pytest.approx(0.01)


def test_variation_segment():
    assert variation_dimension(segment(4096))["estimate"] == pytest.approx(1.0, abs=0.05)


def test_variation_random_walk():
    rng = np.random.default_rng(5)
    steps = rng.choice([1, -1, 1j, -1j], size=2**16)
    walk = np.concatenate([[0], np.cumsum(steps)]) / 256
    t = np.arange(walk.size) / (walk.size - 1)
    est = variation_dimension(Trace(t, walk, y0=0.0))["estimate"]
    assert est == pytest.approx(2.0, abs=0.15)


def test_variation_kappa6():
    ests = [variation_dimension(trace(sample_brownian_driver(1.0, 2.0**-14, seed=s, a=1 / 3)))["estimate"]
            for s in range(4)]
    assert np.mean(ests) == pytest.approx(1.75, abs=0.15)


def test_variation_needs_dyadic_length():
    with pytest.raises(DomainError):
        variation_dimension(segment(1000))


def test_holder_segment_and_zero_driver():
    assert holder_report(segment(), 0.5).slope == pytest.approx(1.0, abs=0.02)
    tr = trace(constant_driver(1.0, 1 / 4096), a=0.5)
    assert holder_report(tr).slope == pytest.approx(1.0, abs=0.05)
    with pytest.raises(DomainError):
        holder_report(tr, t1=0.0)


def test_holder_kappa83_positive():
    tr = trace(sample_brownian_driver(1.0, 1 / 4096, seed=1, a=0.75))
    fit = holder_report(tr)
    assert 0 < fit.slope < 1


def test_dimension_ensemble_small():
    rep = dimension_ensemble(8 / 3, n_paths=3, n_points=4096, seed=0, method="box", jobs=1)
    assert rep["target"] == pytest.approx(4 / 3)
    assert len(rep["estimates"]) == 3 and "passed" in rep
    h = dimension_ensemble(8 / 3, n_paths=2, n_points=2048, method="holder")
    assert "passed" not in h
    with pytest.raises(DomainError):
        dimension_ensemble(8 / 3, method="other")
