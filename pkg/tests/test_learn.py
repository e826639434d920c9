"""Tests for realizable data generation, approximate ERM and the sweep."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from stratdef.families import (
    halfspace,
    identity,
    interval_radius,
    lp_ball,
    threshold,
)
from stratdef.learn import (
    LearnError,
    empirical_error,
    erm_fit,
    generate_realizable,
    heldout_error,
    sample_complexity_sweep,
    uniform_box_sampler,
)


def _threshold_setup():
    return threshold(), interval_radius(Fraction(1, 4)), (Fraction(1, 10),)


# ---------------------------------------------------------------------------
# Data generation


def test_generate_realizable_replays_bit_exact():
    fam, neigh, target = _threshold_setup()
    dist = uniform_box_sampler(1)
    d1 = generate_realizable(fam, neigh, target, dist, 50, seed=7)
    d2 = generate_realizable(fam, neigh, target, dist, 50, seed=7)
    assert d1.points == d2.points
    d3 = generate_realizable(fam, neigh, target, dist, 50, seed=8)
    assert d1.points != d3.points


def test_generate_realizable_labels_are_strategic():
    fam, neigh, target = _threshold_setup()
    dist = uniform_box_sampler(1)
    data = generate_realizable(fam, neigh, target, dist, 200, seed=1)
    # threshold at 0.1, reach 0.25: label is x + 1/4 >= 1/10
    for (x,), lab in data.points:
        assert lab == (x + 0.25 >= 0.1)


def test_identity_neighborhood_gives_base_labels():
    fam = halfspace(2)
    target = (Fraction(1), Fraction(-1), Fraction(0))
    dist = uniform_box_sampler(2)
    data = generate_realizable(fam, identity(2), target, dist, 100, seed=3)
    for x, lab in data.points:
        assert lab == bool(fam.evaluate(target, x))


def test_radius_zero_ball_matches_identity():
    fam = halfspace(2)
    target = (Fraction(1), Fraction(1), Fraction(1, 4))
    dist = uniform_box_sampler(2)
    a = generate_realizable(fam, lp_ball(2, 2, 0), target, dist, 100, seed=5)
    b = generate_realizable(fam, identity(2), target, dist, 100, seed=5)
    assert a.points == b.points


# ---------------------------------------------------------------------------
# Empirical error and ERM


def test_empirical_error_zero_on_empty():
    fam, neigh, _ = _threshold_setup()
    err = empirical_error(fam, neigh, (0.0,), np.empty((0, 1)),
                          np.empty((0,), dtype=bool))
    assert err == 0.0


def test_erm_fit_deterministic_and_dominant():
    fam, neigh, target = _threshold_setup()
    dist = uniform_box_sampler(1)
    data = generate_realizable(fam, neigh, target, dist, 60, seed=11)
    r1 = erm_fit(fam, neigh, data, budget=200, seed=0)
    r2 = erm_fit(fam, neigh, data, budget=200, seed=0)
    assert r1.params == r2.params and r1.empirical_error == r2.empirical_error
    # the fitted error never exceeds the target's own (zero, realizable)
    assert r1.empirical_error == 0.0
    assert not r1.budget_exhausted_nonzero
    assert r1.kind == "approximate-ERM"


def test_erm_fit_error_decreases_with_budget():
    fam = halfspace(2)
    neigh = lp_ball(2, 2, Fraction(1, 4))
    target = (Fraction(1), Fraction(-1), Fraction(1, 10))
    dist = uniform_box_sampler(2)
    data = generate_realizable(fam, neigh, target, dist, 150, seed=13)
    # injection disabled so the search has to work for its error
    small = erm_fit(fam, neigh, data, budget=5, seed=2, inject=())
    big = erm_fit(fam, neigh, data, budget=400, seed=2, inject=())
    assert big.empirical_error <= small.empirical_error


def test_erm_fit_rejects_zero_budget():
    fam, neigh, target = _threshold_setup()
    dist = uniform_box_sampler(1)
    data = generate_realizable(fam, neigh, target, dist, 10, seed=1)
    with pytest.raises(LearnError):
        erm_fit(fam, neigh, data, budget=0, seed=0)


def test_erm_threshold_zero_error_on_50_points():
    fam, neigh, target = _threshold_setup()
    dist = uniform_box_sampler(1)
    zero = 0
    for trial in range(20):
        data = generate_realizable(fam, neigh, target, dist, 50, seed=trial)
        fit = erm_fit(fam, neigh, data, budget=300, seed=trial)
        if fit.empirical_error == 0.0:
            zero += 1
    assert zero >= 19  # >= 95% of trials reach a consistent hypothesis


def test_heldout_error_sample_size_and_halfwidth():
    fam, neigh, target = _threshold_setup()
    dist = uniform_box_sampler(1)
    err, half = heldout_error(fam, neigh, target, target, dist,
                              eps=0.1, seed=0)
    assert err == 0.0  # target vs itself
    n = math.ceil(20 / 0.1)
    assert half == pytest.approx(math.sqrt(math.log(2 / 0.05) / (2 * n)))


# ---------------------------------------------------------------------------
# Sample-complexity sweep


def test_sweep_threshold_products_stay_bounded():
    fam, neigh, target = _threshold_setup()
    rep = sample_complexity_sweep(fam, neigh, target,
                                  eps_grid=[0.2, 0.1, 0.05],
                                  delta=0.1, trials=10, seed=0)
    assert len(rep.rows) == 3
    products = [r.product for r in rep.rows]
    # m_hat * eps should not blow up as eps shrinks (VC class)
    assert max(products) <= 4 * max(products[0], 1.0)
    for row in rep.rows:
        assert row.success_rate >= 0.9
        assert row.zero_error_rate >= 0.95
        assert row.m_hat >= 1
    assert rep.slope is not None


def test_sweep_is_deterministic():
    fam, neigh, target = _threshold_setup()
    kw = dict(eps_grid=[0.2], delta=0.1, trials=5, seed=4)
    r1 = sample_complexity_sweep(fam, neigh, target, **kw)
    r2 = sample_complexity_sweep(fam, neigh, target, **kw)
    assert r1.rows == r2.rows
