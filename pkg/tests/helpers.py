"""Shared oracle helpers for the test suite.

Everything here is deliberately implemented independently of the package's
own algorithms (vectorized formula evaluation, exhaustive vertex
enumeration, one-variable interval feasibility) so tests compare two
separate computation paths.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np

from stratdef import formula as fm
from stratdef.solve import LinearSystem, LPInstance

TOL = 1e-9


# ---------------------------------------------------------------------------
# Vectorized formula evaluation over numpy arrays


def np_eval_term(t, env):
    if isinstance(t, fm.Var):
        return env[t.block][:, t.index]
    if isinstance(t, fm.Const):
        return float(t.value)
    if isinstance(t, fm.Sum):
        out = 0.0
        for s in t.terms:
            out = out + np_eval_term(s, env)
        return out
    if isinstance(t, fm.Product):
        out = 1.0
        for s in t.factors:
            out = out * np_eval_term(s, env)
        return out
    return np.exp(np_eval_term(t.arg, env))


def np_eval_formula(f, env):
    """Boolean array; env maps block -> (N, dim) arrays. Equalities and
    non-strict comparisons get the same float boundary tolerance as the
    scalar evaluator."""
    if isinstance(f, fm.Atom):
        at = f.atom
        if isinstance(at, fm.ExpGraph):
            lhs = np_eval_term(at.lhs, env)
            rhs = np.exp(np_eval_term(at.rhs, env))
            return np.abs(lhs - rhs) <= TOL * np.maximum(1.0, np.abs(rhs))
        d = np_eval_term(at.lhs, env) - np_eval_term(at.rhs, env)
        if at.rel == "=":
            return np.abs(d) <= TOL
        if at.rel in ("<", "<="):
            return d <= TOL
        return d >= -TOL
    if isinstance(f, fm.Not):
        return ~np_eval_formula(f.body, env)
    if isinstance(f, fm.And):
        out = None
        for p in f.parts:
            v = np_eval_formula(p, env)
            out = v if out is None else out & v
        return out if out is not None else np.ones(1, dtype=bool)
    if isinstance(f, fm.Or):
        out = None
        for p in f.parts:
            v = np_eval_formula(p, env)
            out = v if out is None else out | v
        return out if out is not None else np.zeros(1, dtype=bool)
    raise AssertionError("quantifier in vectorized evaluation")


# ---------------------------------------------------------------------------
# Exact linear algebra for vertex enumeration


def gauss_solve(rows, rhs):
    """Solve a square rational system; None when singular."""
    n = len(rows)
    a = [list(map(Fraction, r)) + [Fraction(v)]
         for r, v in zip(rows, rhs)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            return None
        a[col], a[piv] = a[piv], a[col]
        inv = a[col][col]
        a[col] = [v / inv for v in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [v - f * p for v, p in zip(a[r], a[col])]
    return [a[r][n] for r in range(n)]


def lp_by_vertex_enumeration(lp: LPInstance):
    """Exact optimum of a bounded LP by enumerating basic feasible points.

    Treats rows and the lower bounds as the constraint set; assumes the
    feasible region is a bounded polytope (every vertex is an intersection
    of n constraint hyperplanes).  Returns (value, point) or None when
    infeasible.
    """
    n = len(lp.objective)
    planes = []
    for row, rel, b in zip(lp.matrix, lp.relations, lp.rhs):
        planes.append((list(row), Fraction(b)))
    for i, lb in enumerate(lp.lower):
        row = [Fraction(0)] * n
        row[i] = Fraction(1)
        planes.append((row, Fraction(lb)))

    def feasible(pt):
        for row, rel, b in zip(lp.matrix, lp.relations, lp.rhs):
            lhs = sum(c * v for c, v in zip(row, pt))
            if rel == "<=" and lhs > b:
                return False
            if rel == ">=" and lhs < b:
                return False
            if rel == "=" and lhs != b:
                return False
        return all(v >= lb for v, lb in zip(pt, lp.lower))

    best = None
    for combo in itertools.combinations(range(len(planes)), n):
        rows = [planes[i][0] for i in combo]
        rhs = [planes[i][1] for i in combo]
        pt = gauss_solve(rows, rhs)
        if pt is None or not feasible(pt):
            continue
        val = sum(c * v for c, v in zip(lp.objective, pt))
        if best is None or val < best[0]:
            best = (val, tuple(pt))
    return best


# ---------------------------------------------------------------------------
# One-variable feasibility oracle for projection tests


def feasible_with_one_witness(sys: LinearSystem, witness: str,
                              point: dict) -> bool:
    """Exact test of 'exists witness: constraints hold' with every other
    variable pinned to the rational values in point, done by intersecting
    the induced one-variable bounds (no Fourier-Motzkin combination)."""
    j = sys.variables.index(witness)
    lo, lo_strict = None, False
    hi, hi_strict = None, False
    for c in sys.constraints:
        rest = sum(co * Fraction(point[v])
                   for v, co in zip(sys.variables, c.coeffs) if v != witness)
        cj = c.coeffs[j]
        if cj == 0:
            sat = {"<": rest < c.rhs, "<=": rest <= c.rhs,
                   "=": rest == c.rhs}[c.rel]
            if not sat:
                return False
            continue
        bound = (c.rhs - rest) / cj
        strict = c.rel == "<"
        if c.rel == "=":
            if (lo is not None and (bound < lo or (bound == lo and lo_strict))) \
               or (hi is not None and (bound > hi or (bound == hi and hi_strict))):
                return False
            lo, hi = bound, bound
            lo_strict = hi_strict = False
            continue
        if cj > 0:  # upper bound
            if hi is None or bound < hi or (bound == hi and strict):
                hi, hi_strict = bound, strict
        else:       # lower bound
            if lo is None or bound > lo or (bound == lo and strict):
                lo, lo_strict = bound, strict
    if lo is None or hi is None:
        return True
    if lo < hi:
        return True
    if lo == hi:
        return not (lo_strict or hi_strict)
    return False


def system_holds_at(sys: LinearSystem, point: dict) -> bool:
    return sys.satisfied_by([point[v] for v in sys.variables])
