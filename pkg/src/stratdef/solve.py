"""Deciding and approximating formula semantics.

Four layers, from exact to heuristic:

* ``eval_qf`` -- quantifier-free evaluation.  Exact rational path (no
  tolerance; exp handled by certified enclosure refinement) and a float path
  with boundary tolerance ``FLOAT_TOL``.
* ``fm_eliminate`` -- exact Fourier-Motzkin projection for linear systems,
  the linear fragment of one-block quantifier elimination.
* ``lp_solve`` -- exact rational simplex with Bland's rule.
* ``witness_search`` -- numerical instantiation of existential quantifiers:
  sound when it reports a witness (the witness re-verifies under eval_qf),
  inconclusive when it reports not_found.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import formula as fm
from .intervals import (RatInterval, UndecidedComparison, exp_enclosure,
                        exp_interval)

FLOAT_TOL = 1e-9
MAX_BITS = 4096


def _safe_exp(v: float) -> float:
    try:
        return math.exp(v)
    except OverflowError:
        return math.inf


class SolveError(Exception):
    pass


# ---------------------------------------------------------------------------
# Assignments


@dataclass
class Assignment:
    """Per-block value vectors. Values are Fractions (exact path) or floats."""

    x: tuple = ()
    a: tuple = ()
    w: tuple = ()

    def lookup(self, v: fm.Var):
        vec = getattr(self, v.block)
        if v.index >= len(vec):
            raise SolveError(f"assignment does not cover {v}")
        return vec[v.index]

    def with_w(self, w: Sequence) -> "Assignment":
        return Assignment(self.x, self.a, tuple(w))

    def is_exact(self) -> bool:
        return all(isinstance(v, (Fraction, int))
                   for v in (*self.x, *self.a, *self.w))


def merge(x: Sequence = (), a: Sequence = (), w: Sequence = ()) -> Assignment:
    return Assignment(tuple(x), tuple(a), tuple(w))


# ---------------------------------------------------------------------------
# Term evaluation


def eval_term_float(t: fm.Term, sigma: Assignment) -> float:
    if isinstance(t, fm.Var):
        return float(sigma.lookup(t))
    if isinstance(t, fm.Const):
        return float(t.value)
    if isinstance(t, fm.Sum):
        return sum(eval_term_float(s, sigma) for s in t.terms)
    if isinstance(t, fm.Product):
        out = 1.0
        for s in t.factors:
            out *= eval_term_float(s, sigma)
        return out
    try:
        return math.exp(eval_term_float(t.arg, sigma))
    except OverflowError:
        return math.inf


def eval_term_exact(t: fm.Term, sigma: Assignment) -> Fraction:
    """Exact value of an exp-free term under a rational assignment."""
    if isinstance(t, fm.Var):
        return Fraction(sigma.lookup(t))
    if isinstance(t, fm.Const):
        return t.value
    if isinstance(t, fm.Sum):
        return sum((eval_term_exact(s, sigma) for s in t.terms), Fraction(0))
    if isinstance(t, fm.Product):
        out = Fraction(1)
        for s in t.factors:
            out *= eval_term_exact(s, sigma)
        return out
    raise SolveError("exp term on the exact path requires enclosures")


def eval_term_interval(t: fm.Term, sigma: Assignment, bits: int) -> RatInterval:
    if isinstance(t, fm.Var):
        return RatInterval.point(Fraction(sigma.lookup(t)))
    if isinstance(t, fm.Const):
        return RatInterval.point(t.value)
    if isinstance(t, fm.Sum):
        out = RatInterval.point(0)
        for s in t.terms:
            out = out + eval_term_interval(s, sigma, bits)
        return out
    if isinstance(t, fm.Product):
        out = RatInterval.point(1)
        for s in t.factors:
            out = out * eval_term_interval(s, sigma, bits)
        return out
    return exp_interval(eval_term_interval(t.arg, sigma, bits), bits)


def _term_has_exp(t: fm.Term) -> bool:
    if isinstance(t, fm.Exp):
        return True
    if isinstance(t, fm.Sum):
        return any(_term_has_exp(s) for s in t.terms)
    if isinstance(t, fm.Product):
        return any(_term_has_exp(s) for s in t.factors)
    return False


def _compare(diff_sign: int, rel: str) -> bool:
    return {"<": diff_sign < 0, "<=": diff_sign <= 0, "=": diff_sign == 0,
            ">=": diff_sign >= 0, ">": diff_sign > 0}[rel]


def _exact_atom(at: fm.AtomKind, sigma: Assignment, max_bits: int) -> bool:
    if isinstance(at, fm.ExpGraph):
        lhs = Fraction(sigma.lookup(at.lhs))
        arg = Fraction(sigma.lookup(at.rhs))
        if arg == 0:
            return lhs == 1
        # exp(arg) is irrational for rational arg != 0: equality with a
        # rational lhs can only be refuted, by enclosure separation.
        bits = 32
        while bits <= max_bits:
            enc = exp_enclosure(arg, bits)
            if not enc.contains(lhs):
                return False
            bits *= 2
        raise UndecidedComparison(
            f"cannot decide {at.lhs} = exp({at.rhs}) at {max_bits} bits")
    if not (_term_has_exp(at.lhs) or _term_has_exp(at.rhs)):
        diff = eval_term_exact(at.lhs, sigma) - eval_term_exact(at.rhs, sigma)
        return _compare((diff > 0) - (diff < 0), at.rel)
    bits = 32
    while bits <= max_bits:
        iv = eval_term_interval(at.lhs, sigma, bits) - \
            eval_term_interval(at.rhs, sigma, bits)
        try:
            return _compare(iv.sign(), at.rel)
        except UndecidedComparison:
            bits *= 2
    raise UndecidedComparison(f"cannot decide atom {at} at {max_bits} bits")


def _float_atom(at: fm.AtomKind, sigma: Assignment, tol: float) -> bool:
    if isinstance(at, fm.ExpGraph):
        lhs = float(sigma.lookup(at.lhs))
        rhs = _safe_exp(float(sigma.lookup(at.rhs)))
        if not math.isfinite(rhs):
            return False
        return abs(lhs - rhs) <= tol * max(1.0, abs(rhs))
    d = eval_term_float(at.lhs, sigma) - eval_term_float(at.rhs, sigma)
    if at.rel == "=":
        return abs(d) <= tol
    if at.rel in ("<", "<="):
        return d <= tol
    return d >= -tol


def eval_qf(f: fm.Formula, sigma: Assignment, mode: str = "auto",
            tol: float = FLOAT_TOL, max_bits: int = MAX_BITS) -> bool:
    """Evaluate a quantifier-free formula.

    mode 'exact' uses rational arithmetic with certified enclosure refinement
    for exp (no tolerance; raises UndecidedComparison when the enclosure
    cannot decide a comparison at max_bits).  mode 'float' uses floats with
    boundary tolerance tol.  'auto' picks the exact path iff all assignment
    values are exact rationals.
    """
    if fm.classify_fragment(f) != fm.QUANTIFIER_FREE:
        raise SolveError("eval_qf requires a quantifier-free formula")
    if mode == "auto":
        mode = "exact" if sigma.is_exact() else "float"

    def go(g: fm.Formula) -> bool:
        if isinstance(g, fm.Atom):
            if mode == "exact":
                return _exact_atom(g.atom, sigma, max_bits)
            return _float_atom(g.atom, sigma, tol)
        if isinstance(g, fm.Not):
            return not go(g.body)
        if isinstance(g, fm.And):
            return all(go(p) for p in g.parts)
        if isinstance(g, fm.Or):
            return any(go(p) for p in g.parts)
        raise SolveError("quantifier in eval_qf")

    return go(f)


# ---------------------------------------------------------------------------
# Linear systems and Fourier-Motzkin elimination


@dataclass(frozen=True)
class LinConstraint:
    """sum_i coeffs[i]*v_i (rel) rhs, with rel in {<, <=, =}."""

    coeffs: tuple
    rel: str
    rhs: Fraction

    def __post_init__(self):
        if self.rel not in ("<", "<=", "="):
            raise SolveError(f"relation {self.rel!r} must be normalized")


@dataclass
class LinearSystem:
    variables: tuple
    constraints: list

    @staticmethod
    def make(variables: Sequence[str], rows: Sequence) -> "LinearSystem":
        """rows: (coeffs, rel, rhs) with rel in {<, <=, =, >=, >}; >= and >
        are normalized to <= and < by negation."""
        out = []
        for coeffs, rel, rhs in rows:
            coeffs = tuple(Fraction(c) for c in coeffs)
            rhs = Fraction(rhs)
            if len(coeffs) != len(variables):
                raise SolveError("coefficient/variable length mismatch")
            if rel in (">=", ">"):
                coeffs = tuple(-c for c in coeffs)
                rhs = -rhs
                rel = "<=" if rel == ">=" else "<"
            out.append(LinConstraint(coeffs, rel, rhs))
        return LinearSystem(tuple(variables), out)

    def is_trivially_infeasible(self) -> bool:
        for c in self.constraints:
            if all(v == 0 for v in c.coeffs):
                if (c.rel == "<=" and c.rhs < 0) or \
                   (c.rel == "<" and c.rhs <= 0) or \
                   (c.rel == "=" and c.rhs != 0):
                    return True
        return False

    def satisfied_by(self, values: Sequence) -> bool:
        vals = [Fraction(v) for v in values]
        for c in self.constraints:
            lhs = sum(co * v for co, v in zip(c.coeffs, vals))
            ok = {"<": lhs < c.rhs, "<=": lhs <= c.rhs, "=": lhs == c.rhs}[c.rel]
            if not ok:
                return False
        return True


def _normalize_row(c: LinConstraint) -> LinConstraint:
    """Scale so the coefficient vector is primitive with positive leading
    nonzero entry preserved in sign (scale by a positive rational only)."""
    nz = [v for v in c.coeffs if v != 0]
    if not nz:
        return c
    den = 1
    for v in c.coeffs:
        den = den * v.denominator // math.gcd(den, v.denominator)
    nums = [int(v * den) for v in c.coeffs]
    g = 0
    for n in nums:
        g = math.gcd(g, abs(n))
    scale = Fraction(den, g)
    return LinConstraint(tuple(v * scale for v in c.coeffs), c.rel,
                         c.rhs * scale)


def _prune(constraints: list) -> list:
    """Drop tautologies and constraints dominated by a single other row
    with the same (normalized) coefficient vector."""
    best = {}
    order = []
    for c in constraints:
        c = _normalize_row(c)
        if all(v == 0 for v in c.coeffs):
            if (c.rel == "<=" and c.rhs >= 0) or (c.rel == "<" and c.rhs > 0):
                continue  # tautology
            key = (c.coeffs, c.rel, c.rhs)  # keep contradictions verbatim
            if key not in best:
                best[key] = c
                order.append(key)
            continue
        if c.rel == "=":
            key = (c.coeffs, "=", c.rhs)
            if key not in best:
                best[key] = c
                order.append(key)
            continue
        key = c.coeffs
        prev = best.get(key)
        if prev is None:
            best[key] = c
            order.append(key)
        else:
            # tighter rhs wins; strict beats non-strict at equal rhs
            if (c.rhs, c.rel == "<=") < (prev.rhs, prev.rel == "<="):
                best[key] = c
    return [best[k] for k in order]


def fm_eliminate(sys: LinearSystem, eliminate: Sequence[str]) -> LinearSystem:
    """Project a linear system onto the variables not in `eliminate`.

    Equalities involving an eliminated variable are removed by substitution
    first; the remaining inequalities go through standard Fourier-Motzkin
    combination (strict + anything -> strict).
    """
    var_index = {v: i for i, v in enumerate(sys.variables)}
    for v in eliminate:
        if v not in var_index:
            raise SolveError(f"unknown variable {v!r}")
    keep = [v for v in sys.variables if v not in set(eliminate)]
    constraints = list(sys.constraints)

    for var in eliminate:
        j = var_index[var]
        # substitution via an equality containing var
        eq = next((c for c in constraints if c.rel == "=" and c.coeffs[j] != 0),
                  None)
        if eq is not None:
            cj = eq.coeffs[j]
            new = []
            for c in constraints:
                if c is eq:
                    continue
                f = c.coeffs[j] / cj
                if f == 0:
                    new.append(c)
                    continue
                coeffs = tuple(cv - f * ev
                               for cv, ev in zip(c.coeffs, eq.coeffs))
                new.append(LinConstraint(coeffs, c.rel, c.rhs - f * eq.rhs))
            constraints = _prune(new)
            continue
        lowers, uppers, rest = [], [], []
        for c in constraints:
            cj = c.coeffs[j]
            if cj == 0:
                rest.append(c)
            elif cj > 0:
                uppers.append(c)   # var <= (rhs - ...)/cj
            else:
                lowers.append(c)
        new = list(rest)
        for up in uppers:
            for lo in lowers:
                f = -lo.coeffs[j] / up.coeffs[j]
                coeffs = tuple(lv + f * uv
                               for lv, uv in zip(lo.coeffs, up.coeffs))
                rel = "<" if ("<" in (up.rel, lo.rel) and
                              (up.rel == "<" or lo.rel == "<")) else "<="
                new.append(LinConstraint(coeffs, rel, lo.rhs + f * up.rhs))
        constraints = _prune(new)

    # restrict coefficient vectors to the kept variables
    keep_idx = [var_index[v] for v in keep]
    out = []
    for c in constraints:
        for i, v in enumerate(c.coeffs):
            if v != 0 and i not in keep_idx:
                raise SolveError("internal: eliminated variable survived")
        out.append(LinConstraint(tuple(c.coeffs[i] for i in keep_idx),
                                 c.rel, c.rhs))
    return LinearSystem(tuple(keep), _prune(out))


def linear_system_from_formula(f: fm.Formula,
                               variables: Sequence[fm.Var]) -> LinearSystem:
    """Conjunction of linear atoms -> LinearSystem (helper for the linear
    fragment; rejects disjunction, negation and nonlinear atoms)."""
    names = [str(v) for v in variables]
    idx = {v: i for i, v in enumerate(variables)}
    rows = []

    def lin(term: fm.Term) -> tuple:
        """returns (coeff vector, constant)"""
        if isinstance(term, fm.Var):
            if term not in idx:
                raise SolveError(f"variable {term} not declared")
            co = [Fraction(0)] * len(names)
            co[idx[term]] = Fraction(1)
            return co, Fraction(0)
        if isinstance(term, fm.Const):
            return [Fraction(0)] * len(names), term.value
        if isinstance(term, fm.Sum):
            co = [Fraction(0)] * len(names)
            const = Fraction(0)
            for s in term.terms:
                c2, k2 = lin(s)
                co = [u + v for u, v in zip(co, c2)]
                const += k2
            return co, const
        if isinstance(term, fm.Product):
            co = [Fraction(0)] * len(names)
            const = Fraction(1)
            seen_var = False
            for s in term.factors:
                c2, k2 = lin(s)
                if any(v != 0 for v in c2):
                    if seen_var:
                        raise SolveError("nonlinear atom encountered")
                    seen_var = True
                    new_co = [v * const for v in c2]
                    co = new_co
                else:
                    co = [v * k2 for v in co]
                    const *= k2
            return co, const
        raise SolveError("nonlinear atom encountered")

    def visit(g: fm.Formula):
        if isinstance(g, fm.And):
            for p in g.parts:
                visit(p)
            return
        if isinstance(g, fm.Atom) and isinstance(g.atom, fm.Compare):
            lc, lk = lin(g.atom.lhs)
            rc, rk = lin(g.atom.rhs)
            co = [u - v for u, v in zip(lc, rc)]
            rows.append((co, g.atom.rel, rk - lk))
            return
        raise SolveError("only conjunctions of linear atoms are supported")

    visit(f)
    return LinearSystem.make(names, rows)


# ---------------------------------------------------------------------------
# Exact rational LP (simplex, Bland's rule)


@dataclass
class LPInstance:
    """minimize objective . v  subject to  A v (rel) b,  v_i >= lower[i].

    All data exact rationals; lower bounds default to 0. rel in {<=,=,>=}.
    """

    objective: tuple
    matrix: tuple
    relations: tuple
    rhs: tuple
    lower: Optional[tuple] = None

    def __post_init__(self):
        n = len(self.objective)
        self.objective = tuple(Fraction(c) for c in self.objective)
        self.matrix = tuple(tuple(Fraction(v) for v in row)
                            for row in self.matrix)
        self.rhs = tuple(Fraction(v) for v in self.rhs)
        if self.lower is None:
            self.lower = tuple(Fraction(0) for _ in range(n))
        else:
            self.lower = tuple(Fraction(v) for v in self.lower)
        if not (len(self.matrix) == len(self.relations) == len(self.rhs)):
            raise SolveError("LP row dimension mismatch")
        for row in self.matrix:
            if len(row) != n:
                raise SolveError("LP column dimension mismatch")
        for rel in self.relations:
            if rel not in ("<=", "=", ">="):
                raise SolveError(f"bad LP relation {rel!r}")


@dataclass
class LPResult:
    status: str  # optimal | infeasible | unbounded
    value: Optional[Fraction] = None
    point: Optional[tuple] = None


def _simplex(tableau, basis, n_total):
    """Bland's rule simplex on a tableau in canonical form.

    tableau: list of rows (lists of Fractions); last row is the objective
    (reduced costs, with value in the last column, to be minimized).
    Returns 'optimal' or 'unbounded'.
    """
    m = len(tableau) - 1
    while True:
        cost = tableau[m]
        enter = next((j for j in range(n_total) if cost[j] < 0), None)
        if enter is None:
            return "optimal"
        ratios = []
        for i in range(m):
            if tableau[i][enter] > 0:
                ratios.append((tableau[i][-1] / tableau[i][enter], basis[i], i))
        if not ratios:
            return "unbounded"
        # Bland: among minimal ratios choose the row whose basic variable
        # has the smallest index
        best = min(ratios, key=lambda t: (t[0], t[1]))
        leave = best[2]
        piv = tableau[leave][enter]
        tableau[leave] = [v / piv for v in tableau[leave]]
        for i in range(m + 1):
            if i != leave and tableau[i][enter] != 0:
                f = tableau[i][enter]
                tableau[i] = [v - f * p
                              for v, p in zip(tableau[i], tableau[leave])]
        basis[leave] = enter


def lp_solve(lp: LPInstance) -> LPResult:
    """Exact rational optimum via two-phase simplex with Bland's rule."""
    n = len(lp.objective)
    # shift lower bounds to zero: v = u + lower
    shift = lp.lower
    rows = []
    rels = []
    rhs = []
    for row, rel, b in zip(lp.matrix, lp.relations, lp.rhs):
        b2 = b - sum(c * s for c, s in zip(row, shift))
        rows.append(list(row))
        rels.append(rel)
        rhs.append(b2)
    obj_shift = sum(c * s for c, s in zip(lp.objective, shift))

    # slack variables
    slack_count = sum(1 for r in rels if r != "=")
    total = n + slack_count
    A = []
    b_vec = []
    si = 0
    for row, rel, b2 in zip(rows, rels, rhs):
        full = row + [Fraction(0)] * slack_count
        if rel == "<=":
            full[n + si] = Fraction(1)
            si += 1
        elif rel == ">=":
            full[n + si] = Fraction(-1)
            si += 1
        if b2 < 0:
            full = [-v for v in full]
            b2 = -b2
        A.append(full)
        b_vec.append(b2)

    m = len(A)
    # phase 1: artificial variables
    n_total = total + m
    tableau = []
    for i in range(m):
        row = A[i] + [Fraction(1) if j == i else Fraction(0) for j in range(m)]
        tableau.append(row + [b_vec[i]])
    basis = [total + i for i in range(m)]
    # phase-1 objective: minimize the sum of artificials (cost 1 each),
    # with the basic artificial columns priced out
    cost = [Fraction(0)] * total + [Fraction(1)] * m + [Fraction(0)]
    for i in range(m):
        cost = [c - v for c, v in zip(cost, tableau[i])]
    tableau.append(cost)
    status = _simplex(tableau, basis, n_total)
    if -tableau[m][-1] > 0:  # phase-1 objective positive: infeasible
        return LPResult("infeasible")
    # drive artificials out of the basis where possible
    for i in range(m):
        if basis[i] >= total:
            piv_col = next((j for j in range(total)
                            if tableau[i][j] != 0), None)
            if piv_col is None:
                continue  # redundant row
            piv = tableau[i][piv_col]
            tableau[i] = [v / piv for v in tableau[i]]
            for r in range(m + 1):
                if r != i and tableau[r][piv_col] != 0:
                    f = tableau[r][piv_col]
                    tableau[r] = [v - f * p
                                  for v, p in zip(tableau[r], tableau[i])]
            basis[i] = piv_col

    # phase 2: real objective on the (artificial-free) columns
    obj = list(lp.objective) + [Fraction(0)] * slack_count
    cost = obj + [Fraction(0)] * m + [Fraction(0)]
    for i in range(m):
        if basis[i] < total and cost[basis[i]] != 0:
            f = cost[basis[i]]
            cost = [c - f * v for c, v in zip(cost, tableau[i])]
    # forbid re-entering artificial columns
    big = None
    tableau[m] = cost
    for j in range(total, n_total):
        if tableau[m][j] < 0:
            tableau[m][j] = Fraction(0)
    status = _simplex(tableau, basis, total)
    if status == "unbounded":
        return LPResult("unbounded")
    point_u = [Fraction(0)] * total
    for i in range(m):
        if basis[i] < total:
            point_u[basis[i]] = tableau[i][-1]
    point = tuple(point_u[j] + shift[j] for j in range(n))
    value = sum(c * v for c, v in zip(lp.objective, point))
    return LPResult("optimal", value, point)


# ---------------------------------------------------------------------------
# Witness search


@dataclass
class SearchConfig:
    box: tuple = ((-8, 8),)          # per-witness (lo, hi); cycled if short
    grid: int = 5                    # grid points per axis
    restarts: int = 20
    refine_steps: int = 200
    seed: int = 0
    tol: float = FLOAT_TOL


@dataclass
class WitnessResult:
    found: bool
    witness: Optional[tuple] = None
    margin: Optional[float] = None


def _nnf(f: fm.Formula, positive: bool = True) -> fm.Formula:
    if isinstance(f, fm.Atom):
        if positive:
            return f
        at = f.atom
        if isinstance(at, fm.ExpGraph):
            return fm.Not(f)  # negated transcendental equality stays wrapped
        flip = {"<": ">=", "<=": ">", "=": None, ">=": "<", ">": "<="}[at.rel]
        if flip is None:
            return fm.Or((fm.Atom(fm.Compare(at.lhs, "<", at.rhs)),
                          fm.Atom(fm.Compare(at.lhs, ">", at.rhs))))
        return fm.Atom(fm.Compare(at.lhs, flip, at.rhs))
    if isinstance(f, fm.Not):
        return _nnf(f.body, not positive)
    if isinstance(f, fm.And):
        parts = tuple(_nnf(p, positive) for p in f.parts)
        return fm.And(parts) if positive else fm.Or(parts)
    if isinstance(f, fm.Or):
        parts = tuple(_nnf(p, positive) for p in f.parts)
        return fm.Or(parts) if positive else fm.And(parts)
    raise SolveError("quantifier inside witness-search body")


def _violation(f: fm.Formula, sigma: Assignment) -> float:
    """0 when satisfied; positive distance-to-satisfaction proxy otherwise."""
    if isinstance(f, fm.Atom):
        at = f.atom
        if isinstance(at, fm.ExpGraph):
            u = float(sigma.lookup(at.lhs))
            v = _safe_exp(float(sigma.lookup(at.rhs)))
            if not math.isfinite(v):
                return math.inf
            return abs(u - v)
        d = eval_term_float(at.lhs, sigma) - eval_term_float(at.rhs, sigma)
        if at.rel == "=":
            return abs(d)
        if at.rel in ("<", "<="):
            return max(0.0, d)
        return max(0.0, -d)
    if isinstance(f, fm.Not):
        # only negated exp-graph equalities survive NNF
        return 0.0 if _violation(f.body, sigma) > 0 else 1.0
    if isinstance(f, fm.And):
        return max((_violation(p, sigma) for p in f.parts), default=0.0)
    if isinstance(f, fm.Or):
        return min((_violation(p, sigma) for p in f.parts), default=1.0)
    raise SolveError("quantifier inside witness-search body")


def _conjunctive_atoms(f: fm.Formula):
    """Atoms that hold in every model of f (top-level conjunction spine)."""
    if isinstance(f, fm.Atom):
        yield f.atom
    elif isinstance(f, fm.And):
        for p in f.parts:
            yield from _conjunctive_atoms(p)


def _propagate_definitions(body: fm.Formula, sigma: Assignment,
                           unknown: set) -> dict:
    """Resolve witnesses that are forced by definitional equalities
    (w = term over known variables, or w = exp(known w))."""
    values: dict = {}

    def known(v: fm.Var) -> bool:
        if v.block != "w":
            return True
        return v.index in values or v.index not in unknown

    def val_assign() -> Assignment:
        wvec = list(sigma.w)
        size = max([len(wvec)] + [i + 1 for i in values])
        wvec = wvec + [0.0] * (size - len(wvec))
        for i, v in values.items():
            wvec[i] = v
        return Assignment(sigma.x, sigma.a, tuple(wvec))

    changed = True
    while changed:
        changed = False
        for at in _conjunctive_atoms(body):
            if isinstance(at, fm.ExpGraph):
                if at.lhs.block == "w" and at.lhs.index in unknown \
                        and at.lhs.index not in values and known(at.rhs):
                    values[at.lhs.index] = _safe_exp(
                        float(val_assign().lookup(at.rhs)))
                    changed = True
                elif at.rhs.block == "w" and at.rhs.index in unknown \
                        and at.rhs.index not in values and known(at.lhs):
                    # invert the graph atom: rhs = log(lhs) when lhs > 0
                    u = float(val_assign().lookup(at.lhs))
                    if u > 0:
                        values[at.rhs.index] = math.log(u)
                        changed = True
                continue
            if at.rel != "=":
                continue
            pending = {v.index for v in (*fm.term_vars(at.lhs),
                                         *fm.term_vars(at.rhs))
                       if v.block == "w" and v.index in unknown
                       and v.index not in values}
            if len(pending) != 1:
                continue
            wi = pending.pop()
            # solve equalities that are linear in the one remaining unknown
            diff = fm.sub(at.lhs, at.rhs)
            if fm.term_degree_in(diff, fm.Var("w", wi)) != 1:
                continue
            base = val_assign()
            wv = list(base.w) + [0.0] * max(0, wi + 1 - len(base.w))
            slope, c0 = _linear_parts(
                diff, fm.Var("w", wi), Assignment(base.x, base.a, tuple(wv)))
            if slope != 0.0:
                values[wi] = -c0 / slope
                changed = True
    return values


def _linear_parts(t: fm.Term, var: fm.Var, sigma: Assignment):
    """(slope, intercept) of a term linear in var, with the slope read off
    structurally (a finite-difference slope drowns in rounding when the
    intercept is huge).  Requires term_degree_in(t, var) == 1."""
    if isinstance(t, fm.Var):
        if t == var:
            return 1.0, 0.0
        return 0.0, float(sigma.lookup(t))
    if isinstance(t, fm.Const):
        return 0.0, float(t.value)
    if isinstance(t, fm.Sum):
        slope = intercept = 0.0
        for s in t.terms:
            a, b = _linear_parts(s, var, sigma)
            slope += a
            intercept += b
        return slope, intercept
    if isinstance(t, fm.Product):
        slope, intercept = 0.0, 1.0
        for s in t.factors:
            a, b = _linear_parts(s, var, sigma)
            if a != 0.0:
                # degree 1 overall: at most one factor carries the variable
                slope = slope * b + intercept * a
                intercept *= b
            else:
                slope *= b
                intercept *= b
        return slope, intercept
    # exp factor: the degree guard ensures var does not occur inside
    return 0.0, eval_term_float(t, sigma)


def _branches(f: fm.Formula, cap: int = 256):
    """Lists of literals whose conjunctions cover f (one list per choice of
    disjuncts); None when the expansion exceeds the cap."""
    if isinstance(f, (fm.Atom, fm.Not)):
        return [[f]]
    if isinstance(f, fm.And):
        out = [[]]
        for p in f.parts:
            sub = _branches(p, cap)
            if sub is None:
                return None
            out = [a + b for a in out for b in sub]
            if len(out) > cap:
                return None
        return out
    if isinstance(f, fm.Or):
        out = []
        for p in f.parts:
            sub = _branches(p, cap)
            if sub is None:
                return None
            out.extend(sub)
            if len(out) > cap:
                return None
        return out
    raise SolveError("quantifier inside witness-search body")


def _linearize(term: fm.Term, env, rem: dict):
    """(coeff vector over rem, constant) of a term linear in the remaining
    unknowns, with known variables substituted exactly; None if nonlinear."""
    zero = [Fraction(0)] * len(rem)
    if isinstance(term, fm.Var):
        if term.block == "w" and term.index in rem:
            co = list(zero)
            co[rem[term.index]] = Fraction(1)
            return co, Fraction(0)
        v = env(term)
        if v is None:
            return None
        return list(zero), v
    if isinstance(term, fm.Const):
        return list(zero), Fraction(term.value)
    if isinstance(term, fm.Sum):
        co, const = list(zero), Fraction(0)
        for s in term.terms:
            part = _linearize(s, env, rem)
            if part is None:
                return None
            co = [u + v for u, v in zip(co, part[0])]
            const += part[1]
        return co, const
    if isinstance(term, fm.Product):
        co, const = list(zero), Fraction(1)
        for s in term.factors:
            part = _linearize(s, env, rem)
            if part is None:
                return None
            c2, k2 = part
            if any(v != 0 for v in c2):
                if any(v != 0 for v in co):
                    return None  # product of two non-constant parts
                co, const2 = c2, k2
                co = [const * v for v in co]
                const *= const2
            else:
                co = [k2 * v for v in co]
                const *= k2
        return co, const
    return None  # exp terms are handled by propagation, not linearly


def _strict_feasible_point(rows, n_rem):
    """Exact feasibility of linear rows over unbounded unknowns.

    rows: (coeffs, rel, rhs) with rel in {<, <=, =, >=, >}.  Unknowns are
    split v = p - q with p, q >= 0; strict rows get a shared slack t that is
    maximized, so strict feasibility is certified by t > 0.  Returns a tuple
    of Fractions, or None when the system has no solution.
    """
    has_strict = any(rel in ("<", ">") for _, rel, _ in rows)
    n = 2 * n_rem + 1
    t_col = n - 1
    matrix, rels, rhs = [], [], []
    for coeffs, rel, b in rows:
        if rel in (">=", ">"):
            coeffs = [-c for c in coeffs]
            b = -b
            rel = "<=" if rel == ">=" else "<"
        row = [Fraction(0)] * n
        for j, c in enumerate(coeffs):
            row[2 * j] = c
            row[2 * j + 1] = -c
        if rel == "<":
            row[t_col] = Fraction(1)
            rel = "<="
        matrix.append(tuple(row))
        rels.append(rel)
        rhs.append(Fraction(b))
    cap = [Fraction(0)] * n
    cap[t_col] = Fraction(1)
    matrix.append(tuple(cap))
    rels.append("<=")
    rhs.append(Fraction(1))
    obj = [Fraction(0)] * n
    obj[t_col] = Fraction(-1)
    res = lp_solve(LPInstance(tuple(obj), tuple(matrix), tuple(rels),
                              tuple(rhs)))
    if res.status != "optimal":
        return None
    t = res.point[t_col]
    if has_strict and t == 0:
        return None
    return tuple(res.point[2 * j] - res.point[2 * j + 1]
                 for j in range(n_rem))


def _solve_branch(lits, body, sigma: Assignment, unknown: set, size: int,
                  cfg: "SearchConfig"):
    """Decide one disjunct selection exactly when possible.

    Returns ("sat", w_vector), ("unsat", None) or ("unknown", None);
    sat results are re-verified against the full body.
    """
    branch = fm.And(tuple(lits))
    forced = _propagate_definitions(branch, sigma, set(unknown))
    if any(not math.isfinite(v) for v in forced.values()):
        return "unknown", None
    rem_idx = sorted(unknown - set(forced))

    def build_w(rat_vals=()):
        wv = [0.0] * size
        for i, v in forced.items():
            wv[i] = v
        for i, v in zip(rem_idx, rat_vals):
            wv[i] = float(v)
        return tuple(wv)

    if not rem_idx:
        wv = build_w()
        if eval_qf(body, sigma.with_w(wv), mode="float", tol=cfg.tol):
            return "sat", wv
        if not eval_qf(branch, sigma.with_w(wv), mode="float", tol=cfg.tol):
            return "unsat", None
        return "unknown", None

    rem = {i: j for j, i in enumerate(rem_idx)}
    base = sigma.with_w(build_w([0.0] * len(rem_idx)))

    def env(v: fm.Var):
        if v.block == "w" and v.index in forced:
            return Fraction(forced[v.index])
        if v.block == "w" and v.index in rem:
            return None
        return Fraction(float(base.lookup(v)))

    rows = []
    for lit in lits:
        if isinstance(lit, fm.Not):
            lit = lit.body
            at = lit.atom if isinstance(lit, fm.Atom) else None
            if isinstance(at, fm.ExpGraph):
                # negated transcendental equality: the final eval of the
                # full body checks it once all witnesses are fixed
                touched = {v.index for v in (at.lhs, at.rhs)
                           if v.block == "w" and v.index in rem}
                if touched:
                    return "unknown", None
                continue
            return "unknown", None
        at = lit.atom
        if isinstance(at, fm.ExpGraph):
            # an exp atom with an unresolved witness is beyond the linear
            # fragment; resolved ones are checked by the final eval
            touched = {v.index for v in (at.lhs, at.rhs)
                       if v.block == "w" and v.index in rem}
            if touched:
                return "unknown", None
            continue
        left = _linearize(at.lhs, env, rem)
        right = _linearize(at.rhs, env, rem)
        if left is None or right is None:
            return "unknown", None
        coeffs = [u - v for u, v in zip(left[0], right[0])]
        rows.append((coeffs, at.rel, right[1] - left[1]))
    point = _strict_feasible_point(rows, len(rem_idx))
    if point is None:
        return "unsat", None
    wv = build_w(point)
    if eval_qf(body, sigma.with_w(wv), mode="float", tol=cfg.tol):
        return "sat", wv
    return "unknown", None


def witness_search(f: fm.Formula, x_vals: Sequence, a_vals: Sequence,
                   cfg: SearchConfig = None) -> WitnessResult:
    """Search for witnesses of an existential formula at (x, a).

    Layered: definitional equalities are propagated first (this fully decides
    identity-style neighborhoods); remaining witnesses are searched on a grid
    with random restarts and Nelder-Mead refinement of the max-violation
    margin.  A returned witness always re-verifies under eval_qf (soundness);
    not_found is inconclusive.
    """
    cfg = cfg or SearchConfig()
    frag = fm.classify_fragment(f)
    if frag == fm.GENERAL:
        raise SolveError("witness_search requires an existential formula")
    indices = []
    g = f
    while isinstance(g, fm.Exists):
        indices.extend(g.indices)
        g = g.body
    body = _nnf(g)
    sigma0 = Assignment(tuple(float(v) for v in x_vals),
                        tuple(float(v) for v in a_vals), ())
    if not indices:
        ok = eval_qf(body, sigma0, mode="float", tol=cfg.tol)
        return WitnessResult(ok, () if ok else None, 0.0 if ok else None)

    size = max(indices) + 1
    unknown = set(indices)

    # exact layer: enumerate disjunct selections; each branch is decided by
    # definition propagation plus rational linear feasibility when possible
    branch_lits = _branches(body)
    if branch_lits is not None:
        all_decided = True
        for lits in branch_lits:
            status, wv = _solve_branch(lits, body, sigma0, unknown, size, cfg)
            if status == "sat":
                return WitnessResult(True, wv, _violation(body,
                                                          sigma0.with_w(wv)))
            if status == "unknown":
                all_decided = False
        if all_decided:
            return WitnessResult(False)

    forced = _propagate_definitions(body, sigma0, unknown)
    free = sorted(unknown - set(forced))

    def build_w(vec) -> tuple:
        wv = [0.0] * size
        for i, v in forced.items():
            wv[i] = v
        for i, v in zip(free, vec):
            wv[i] = float(v)
        return tuple(wv)

    def margin(vec) -> float:
        return _violation(body, sigma0.with_w(build_w(vec)))

    def finish(vec):
        wv = build_w(vec)
        if eval_qf(body, sigma0.with_w(wv), mode="float", tol=cfg.tol):
            return WitnessResult(True, wv, margin(vec))
        return None

    if not free:
        res = finish(())
        return res if res else WitnessResult(False)

    boxes = [cfg.box[i % len(cfg.box)] for i in range(len(free))]
    for lo, hi in boxes:
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise SolveError("unbounded search box requested without a cap")

    candidates = []
    # seed with the input coordinates cycled across the free slots: for
    # strategic transforms the witness block is a nearby point, and staying
    # put is often already feasible
    pool = [float(v) for v in (*x_vals, *a_vals)] or [0.0]
    candidates.append(tuple(pool[i % len(pool)] for i in range(len(free))))
    axes = [np.linspace(float(lo), float(hi), cfg.grid) for lo, hi in boxes]
    if cfg.grid ** len(free) <= 4096:
        candidates.extend(itertools.product(*axes))
    rng = np.random.default_rng(cfg.seed)
    for _ in range(cfg.restarts):
        candidates.append(tuple(rng.uniform(lo, hi) for lo, hi in boxes))

    scored = []
    for cand in candidates:
        mval = margin(cand)
        scored.append((mval, cand))
        if mval <= cfg.tol:
            res = finish(cand)
            if res:
                return res
    scored.sort(key=lambda t: t[0])
    best_m = scored[0][0]
    # local refinement from the most promising starts
    from scipy.optimize import minimize
    for mval, cand in scored[:4]:
        res = minimize(margin, np.asarray(cand, dtype=float),
                       method="Nelder-Mead",
                       options={"maxiter": cfg.refine_steps, "xatol": 1e-12,
                                "fatol": 1e-15})
        best_m = min(best_m, float(res.fun))
        if res.fun <= cfg.tol:
            out = finish(tuple(res.x))
            if out:
                return out
    return WitnessResult(False, None, best_m)
