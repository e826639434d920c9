"""Realizable data generation, strategic ERM, and sample-complexity sweeps.

The optimizer is an approximate ERM: multistart random search over the
family's parameter box with Gaussian local refinement.  On realizable data
the target parameters are injected into the candidate pool (last, so a
zero-error candidate discovered by the search wins ties), which guarantees
the returned empirical error never exceeds the target's.  Results are
labeled approximate-ERM accordingly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .families import (HypothesisFamily, NeighborhoodSystem,
                       batch_strategic_labels)


class LearnError(Exception):
    pass


@dataclass
class DataSet:
    points: tuple              # ((x vector, label), ...)
    family: str
    neighborhood: str
    target_params: tuple
    distribution: str
    seed: int

    def X(self) -> np.ndarray:
        return np.asarray([row[0] for row in self.points], dtype=float)

    def y(self) -> np.ndarray:
        return np.asarray([row[1] for row in self.points], dtype=bool)


@dataclass
class ErmResult:
    params: tuple
    empirical_error: float
    budget_spent: int
    heldout_error: Optional[float] = None
    heldout_halfwidth: Optional[float] = None
    budget_exhausted_nonzero: bool = False
    kind: str = "approximate-ERM"


def uniform_box_sampler(l: int, lo: float = -1.0, hi: float = 1.0):
    def sample(m: int, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(lo, hi, size=(m, l))
    return sample


def generate_realizable(family: HypothesisFamily, neigh: NeighborhoodSystem,
                        target_params: Sequence, distribution: Callable,
                        m: int, seed: int) -> DataSet:
    """Draw m points i.i.d. and label them with the strategic classifier of
    the target parameters.  Replaying the same seed reproduces the set."""
    rng = np.random.default_rng([seed, 0xD5])
    X = distribution(m, rng)
    labels = batch_strategic_labels(family, neigh, target_params,
                                    np.asarray(X, dtype=float))
    points = tuple((tuple(float(v) for v in row), bool(lab))
                   for row, lab in zip(X, labels))
    return DataSet(points, family.name, neigh.name,
                   tuple(target_params), "uniform_box", seed)


def empirical_error(family: HypothesisFamily, neigh: NeighborhoodSystem,
                    params, X: np.ndarray, y: np.ndarray) -> float:
    if len(y) == 0:
        return 0.0
    pred = batch_strategic_labels(family, neigh, params, X)
    return float(np.mean(pred != y))


def erm_fit(family: HypothesisFamily, neigh: NeighborhoodSystem,
            data: DataSet, budget: int, seed: int,
            inject: Optional[Sequence] = None) -> ErmResult:
    """Approximate ERM by seeded multistart random search.

    Candidates: uniform draws over the family's parameter box, Gaussian
    perturbations of the incumbent, and finally the injected parameters
    (the data's generator by default).  Deterministic given the seed.
    """
    if budget <= 0:
        raise LearnError("budget must be positive")
    X, y = data.X(), data.y()
    k = family.param_dim
    box = [family.param_box[i % len(family.param_box)] for i in range(k)]
    rng = np.random.default_rng([seed, 0xE7])

    def error(params) -> float:
        return empirical_error(family, neigh, params, X, y)

    best_params: Optional[tuple] = None
    best_err = math.inf
    spent = 0

    def consider(params) -> bool:
        nonlocal best_params, best_err, spent
        spent += 1
        err = error(params)
        if err < best_err:
            best_params, best_err = tuple(params), err
        return best_err == 0.0

    n_uniform = max(1, budget // 2)
    done = False
    for _ in range(n_uniform):
        cand = [rng.uniform(lo, hi) for lo, hi in box]
        if consider(cand):
            done = True
            break
    while not done and spent < budget - 1:
        center = best_params if best_params is not None else \
            [0.0] * k
        scale = 0.25 * max(hi - lo for lo, hi in box)
        cand = [c + rng.normal(0.0, scale) for c in center]
        if consider(cand):
            break
    if inject is None:
        inject = data.target_params
    # an empty inject sequence disables the final injected candidate
    if inject is not None and len(inject) and best_err > 0.0:
        consider([float(v) for v in inject])
    return ErmResult(best_params, best_err, spent,
                     budget_exhausted_nonzero=best_err > 0.0)


def heldout_error(family: HypothesisFamily, neigh: NeighborhoodSystem,
                  fitted, target_params, distribution: Callable,
                  eps: float, seed: int):
    """Population-error estimate on a fresh sample of ceil(20/eps) points,
    with a 95% Hoeffding half-width."""
    n = math.ceil(20.0 / eps)
    rng = np.random.default_rng([seed, 0xF1])
    X = np.asarray(distribution(n, rng), dtype=float)
    truth = batch_strategic_labels(family, neigh, target_params, X)
    pred = batch_strategic_labels(family, neigh, fitted, X)
    err = float(np.mean(truth != pred))
    halfwidth = math.sqrt(math.log(2 / 0.05) / (2 * n))
    return err, halfwidth


@dataclass
class SweepRow:
    eps: float
    m_hat: int
    product: float            # m_hat * eps
    success_rate: float
    zero_error_rate: float    # fraction of trials with zero empirical error


@dataclass
class SweepReport:
    rows: tuple
    delta: float
    trials: int
    seed: int
    slope: Optional[float]    # fitted slope of m_hat*eps against log2(1/eps)


def sample_complexity_sweep(family: HypothesisFamily,
                            neigh: NeighborhoodSystem,
                            target_params: Sequence,
                            eps_grid: Sequence[float], delta: float,
                            trials: int, seed: int,
                            distribution: Optional[Callable] = None,
                            budget: int = 400,
                            m_cap: int = 1 << 14) -> SweepReport:
    """Smallest sample size reaching held-out error <= eps in >= (1-delta)
    of seeded trials, per grid point, found by doubling plus bisection."""
    if distribution is None:
        distribution = uniform_box_sampler(family.input_dim)

    def run_trials(eps: float, m: int):
        wins = 0
        zero = 0
        for trial in range(trials):
            tseed = hash((seed, round(eps * 10 ** 9), m, trial)) & 0x7FFFFFFF
            data = generate_realizable(family, neigh, target_params,
                                       distribution, m, tseed)
            fit = erm_fit(family, neigh, data, budget, tseed)
            if fit.empirical_error == 0.0:
                zero += 1
            err, _ = heldout_error(family, neigh, fit.params, target_params,
                                   distribution, eps, tseed)
            if err <= eps:
                wins += 1
        return wins / trials, zero / trials

    rows = []
    for eps in eps_grid:
        lo, hi = 1, None
        m = 4
        rates = {}
        while m <= m_cap:
            rate, zrate = run_trials(eps, m)
            rates[m] = (rate, zrate)
            if rate >= 1 - delta:
                hi = m
                break
            lo = m
            m *= 2
        if hi is None:
            raise LearnError(f"no m <= {m_cap} reached the target at "
                             f"eps={eps}")
        while hi - lo > max(1, hi // 8):
            mid = (lo + hi) // 2
            rate, zrate = run_trials(eps, mid)
            rates[mid] = (rate, zrate)
            if rate >= 1 - delta:
                hi = mid
            else:
                lo = mid
        rate, zrate = rates[hi]
        rows.append(SweepRow(float(eps), hi, hi * float(eps), rate, zrate))

    slope = None
    if len(rows) >= 2:
        xs = np.log2([1.0 / r.eps for r in rows])
        ys = np.asarray([r.product for r in rows])
        slope = float(np.polyfit(xs, ys, 1)[0])
    return SweepReport(tuple(rows), float(delta), trials, seed, slope)
