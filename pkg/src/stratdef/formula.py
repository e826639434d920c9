"""First-order formula AST over the reals with exponentiation.

Formulas are block-typed: variables live in the blocks ``x`` (inputs),
``a`` (parameters) and ``w`` (existential witnesses).  Constants are exact
rationals.  The module provides the s-expression grammar (parse / print),
fragment classification, the graph-form rewriting that isolates every
exponential into an atom ``u = exp(v)``, and the syntactic format/degree
complexity of a graph-form formula.

Everything here is pure syntax; evaluation lives in :mod:`stratdef.solve`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional, Union

BLOCKS = ("x", "a", "w")


class FormulaError(Exception):
    pass


class ParseError(FormulaError):
    def __init__(self, msg: str, pos: int = -1, line: int = -1, col: int = -1):
        loc = f" at line {line}, col {col}" if line >= 0 else ""
        super().__init__(msg + loc)
        self.pos, self.line, self.col = pos, line, col


# ---------------------------------------------------------------------------
# Terms


@dataclass(frozen=True)
class Var:
    block: str
    index: int

    def __post_init__(self):
        if self.block not in BLOCKS:
            raise FormulaError(f"unknown block {self.block!r}")
        if self.index < 0:
            raise FormulaError("negative variable index")

    def __str__(self):
        return f"{self.block}{self.index}"


@dataclass(frozen=True)
class Const:
    value: Fraction

    def __str__(self):
        v = self.value
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


@dataclass(frozen=True)
class Sum:
    terms: tuple

    def __str__(self):
        return "(+ " + " ".join(map(str, self.terms)) + ")"


@dataclass(frozen=True)
class Product:
    factors: tuple

    def __str__(self):
        return "(* " + " ".join(map(str, self.factors)) + ")"


@dataclass(frozen=True)
class Exp:
    arg: "Term"

    def __str__(self):
        return f"(exp {self.arg})"


Term = Union[Var, Const, Sum, Product, Exp]


def const(v) -> Const:
    return Const(Fraction(v))


def x(i: int) -> Var:
    return Var("x", i)


def a(i: int) -> Var:
    return Var("a", i)


def w(i: int) -> Var:
    return Var("w", i)


def add(*terms: Term) -> Term:
    return terms[0] if len(terms) == 1 else Sum(tuple(terms))


def mul(*factors: Term) -> Term:
    return factors[0] if len(factors) == 1 else Product(tuple(factors))


def neg(t: Term) -> Term:
    return Product((Const(Fraction(-1)), t))


def sub(l: Term, r: Term) -> Term:
    return Sum((l, neg(r)))


# ---------------------------------------------------------------------------
# Atoms and formulas


RELATIONS = ("<", "<=", "=", ">=", ">")


@dataclass(frozen=True)
class Compare:
    lhs: Term
    rel: str
    rhs: Term

    def __post_init__(self):
        if self.rel not in RELATIONS:
            raise FormulaError(f"unknown relation {self.rel!r}")

    def __str__(self):
        return f"({self.rel} {self.lhs} {self.rhs})"


@dataclass(frozen=True)
class ExpGraph:
    """Atom lhs = exp(rhs), both sides plain variables."""

    lhs: Var
    rhs: Var

    def __str__(self):
        return f"(= {self.lhs} (exp {self.rhs}))"


AtomKind = Union[Compare, ExpGraph]


@dataclass(frozen=True)
class Atom:
    atom: AtomKind

    def __str__(self):
        return str(self.atom)


@dataclass(frozen=True)
class Not:
    body: "Formula"

    def __str__(self):
        return f"(not {self.body})"


@dataclass(frozen=True)
class And:
    parts: tuple

    def __str__(self):
        return "(and" + "".join(" " + str(p) for p in self.parts) + ")"


@dataclass(frozen=True)
class Or:
    parts: tuple

    def __str__(self):
        return "(or" + "".join(" " + str(p) for p in self.parts) + ")"


@dataclass(frozen=True)
class Exists:
    indices: tuple  # w-block indices
    body: "Formula"

    def __str__(self):
        vs = " ".join(f"w{i}" for i in self.indices)
        return f"(exists ({vs}) {self.body})"


@dataclass(frozen=True)
class ForAll:
    indices: tuple
    body: "Formula"

    def __str__(self):
        vs = " ".join(f"w{i}" for i in self.indices)
        return f"(forall ({vs}) {self.body})"


Formula = Union[Atom, Not, And, Or, Exists, ForAll]


def conj(*parts: Formula) -> Formula:
    return And(tuple(parts))


def disj(*parts: Formula) -> Formula:
    return Or(tuple(parts))


def atom(lhs: Term, rel: str, rhs: Term) -> Atom:
    return Atom(Compare(lhs, rel, rhs))


TRUE = And(())  # empty conjunction


def print_formula(f: Formula) -> str:
    return str(f)


# ---------------------------------------------------------------------------
# Traversal helpers


def term_vars(t: Term) -> Iterator[Var]:
    if isinstance(t, Var):
        yield t
    elif isinstance(t, Sum):
        for s in t.terms:
            yield from term_vars(s)
    elif isinstance(t, Product):
        for s in t.factors:
            yield from term_vars(s)
    elif isinstance(t, Exp):
        yield from term_vars(t.arg)


def atom_vars(at: AtomKind) -> Iterator[Var]:
    if isinstance(at, Compare):
        yield from term_vars(at.lhs)
        yield from term_vars(at.rhs)
    else:
        yield at.lhs
        yield at.rhs


def formula_atoms(f: Formula) -> Iterator[AtomKind]:
    if isinstance(f, Atom):
        yield f.atom
    elif isinstance(f, Not):
        yield from formula_atoms(f.body)
    elif isinstance(f, (And, Or)):
        for p in f.parts:
            yield from formula_atoms(p)
    elif isinstance(f, (Exists, ForAll)):
        yield from formula_atoms(f.body)


def free_vars(f: Formula) -> set:
    """Free variables of a formula (bound w-vars excluded)."""

    def go(g: Formula, bound: frozenset) -> set:
        if isinstance(g, Atom):
            return {v for v in atom_vars(g.atom)
                    if not (v.block == "w" and v.index in bound)}
        if isinstance(g, Not):
            return go(g.body, bound)
        if isinstance(g, (And, Or)):
            out = set()
            for p in g.parts:
                out |= go(p, bound)
            return out
        return go(g.body, bound | frozenset(g.indices))

    return go(f, frozenset())


def validate(f: Formula) -> None:
    """Check the block discipline: every w-variable is bound."""
    for v in free_vars(f):
        if v.block == "w":
            raise FormulaError(f"unbound witness variable {v}")


def map_vars(f: Formula, fn) -> Formula:
    """Structurally rebuild f, replacing every Var v by the term fn(v)."""

    def t(term: Term) -> Term:
        if isinstance(term, Var):
            return fn(term)
        if isinstance(term, Const):
            return term
        if isinstance(term, Sum):
            return Sum(tuple(t(s) for s in term.terms))
        if isinstance(term, Product):
            return Product(tuple(t(s) for s in term.factors))
        return Exp(t(term.arg))

    def g(h: Formula) -> Formula:
        if isinstance(h, Atom):
            at = h.atom
            if isinstance(at, Compare):
                return Atom(Compare(t(at.lhs), at.rel, t(at.rhs)))
            l, r = fn(at.lhs), fn(at.rhs)
            if isinstance(l, Var) and isinstance(r, Var):
                return Atom(ExpGraph(l, r))
            return Atom(Compare(l, "=", Exp(r)))
        if isinstance(h, Not):
            return Not(g(h.body))
        if isinstance(h, And):
            return And(tuple(g(p) for p in h.parts))
        if isinstance(h, Or):
            return Or(tuple(g(p) for p in h.parts))
        if isinstance(h, Exists):
            return Exists(h.indices, g(h.body))
        return ForAll(h.indices, g(h.body))

    return g(f)


def rename_witnesses(f: Formula, mapping: dict) -> Formula:
    """Rename w-variable indices throughout (bound and free occurrences)."""

    def fn(v: Var) -> Var:
        if v.block == "w" and v.index in mapping:
            return Var("w", mapping[v.index])
        return v

    def g(h: Formula) -> Formula:
        if isinstance(h, Exists):
            return Exists(tuple(mapping.get(i, i) for i in h.indices), g(h.body))
        if isinstance(h, ForAll):
            return ForAll(tuple(mapping.get(i, i) for i in h.indices), g(h.body))
        if isinstance(h, Not):
            return Not(g(h.body))
        if isinstance(h, And):
            return And(tuple(g(p) for p in h.parts))
        if isinstance(h, Or):
            return Or(tuple(g(p) for p in h.parts))
        return map_vars(h, fn)

    return g(f)


# ---------------------------------------------------------------------------
# Parsing


def _tokenize(text: str):
    toks = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
        elif c.isspace():
            i += 1
            col += 1
        elif c in "()":
            toks.append((c, line, col))
            i += 1
            col += 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "()":
                j += 1
            toks.append((text[i:j], line, col))
            col += j - i
            i = j
    return toks


def _parse_rational(tok: str) -> Optional[Fraction]:
    try:
        if "/" in tok or "." in tok or tok.lstrip("+-").isdigit():
            return Fraction(tok)
    except (ValueError, ZeroDivisionError):
        return None
    return None


def _parse_var(tok: str) -> Optional[Var]:
    if len(tok) >= 2 and tok[0] in BLOCKS and tok[1:].isdigit():
        return Var(tok[0], int(tok[1:]))
    return None


class _Reader:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.pos = 0

    def peek(self):
        if self.pos >= len(self.toks):
            raise ParseError("unexpected end of input")
        return self.toks[self.pos]

    def next(self):
        t = self.peek()
        self.pos += 1
        return t

    def expect(self, s: str):
        tok, line, col = self.next()
        if tok != s:
            raise ParseError(f"expected {s!r}, got {tok!r}", line=line, col=col)

    def done(self) -> bool:
        return self.pos >= len(self.toks)


def _read_term(r: _Reader) -> Term:
    tok, line, col = r.next()
    if tok == "(":
        op, oline, ocol = r.next()
        args = []
        while r.peek()[0] != ")":
            args.append(_read_term(r))
        r.next()  # ")"
        if op == "+":
            if not args:
                raise ParseError("empty sum", line=oline, col=ocol)
            return Sum(tuple(args)) if len(args) > 1 else args[0]
        if op == "*":
            if not args:
                raise ParseError("empty product", line=oline, col=ocol)
            return Product(tuple(args)) if len(args) > 1 else args[0]
        if op == "exp":
            if len(args) != 1:
                raise ParseError("exp takes one argument", line=oline, col=ocol)
            return Exp(args[0])
        if op == "-":
            if len(args) == 1:
                return neg(args[0])
            if len(args) == 2:
                return sub(args[0], args[1])
            raise ParseError("- takes one or two arguments", line=oline, col=ocol)
        raise ParseError(f"unknown term operator {op!r}", line=oline, col=ocol)
    v = _parse_var(tok)
    if v is not None:
        return v
    q = _parse_rational(tok)
    if q is not None:
        return Const(q)
    raise ParseError(f"cannot parse term token {tok!r}", line=line, col=col)


def _read_formula(r: _Reader) -> Formula:
    tok, line, col = r.next()
    if tok != "(":
        raise ParseError(f"expected '(', got {tok!r}", line=line, col=col)
    op, oline, ocol = r.next()
    if op in RELATIONS:
        lhs = _read_term(r)
        rhs = _read_term(r)
        r.expect(")")
        # recognize the canonical exp-graph atom (= u (exp v)) / (= (exp v) u)
        if op == "=":
            if isinstance(rhs, Exp) and isinstance(rhs.arg, Var) and isinstance(lhs, Var):
                return Atom(ExpGraph(lhs, rhs.arg))
            if isinstance(lhs, Exp) and isinstance(lhs.arg, Var) and isinstance(rhs, Var):
                return Atom(ExpGraph(rhs, lhs.arg))
        return Atom(Compare(lhs, op, rhs))
    if op in ("and", "or"):
        parts = []
        while r.peek()[0] != ")":
            parts.append(_read_formula(r))
        r.next()
        return And(tuple(parts)) if op == "and" else Or(tuple(parts))
    if op == "not":
        body = _read_formula(r)
        r.expect(")")
        return Not(body)
    if op in ("exists", "forall"):
        r.expect("(")
        indices = []
        while r.peek()[0] != ")":
            vtok, vline, vcol = r.next()
            v = _parse_var(vtok)
            if v is None:
                raise ParseError(f"bad variable {vtok!r}", line=vline, col=vcol)
            if v.block != "w":
                raise ParseError(
                    f"cannot quantify {v}: only w-block variables may be bound",
                    line=vline, col=vcol)
            indices.append(v.index)
        r.next()  # ")"
        body = _read_formula(r)
        r.expect(")")
        node = Exists if op == "exists" else ForAll
        return node(tuple(indices), body)
    raise ParseError(f"unknown operator {op!r}", line=oline, col=ocol)


def parse(text: str) -> Formula:
    """Parse the s-expression grammar into a Formula; validates bindings."""
    r = _Reader(text)
    f = _read_formula(r)
    if not r.done():
        tok, line, col = r.peek()
        raise ParseError(f"trailing input {tok!r}", line=line, col=col)
    validate(f)
    return f


# ---------------------------------------------------------------------------
# Fragment classification

QUANTIFIER_FREE = "QuantifierFree"
EXISTENTIAL = "Existential"
GENERAL = "General"


def _has_quantifier(f: Formula) -> bool:
    if isinstance(f, (Exists, ForAll)):
        return True
    if isinstance(f, Not):
        return _has_quantifier(f.body)
    if isinstance(f, (And, Or)):
        return any(_has_quantifier(p) for p in f.parts)
    return False


def classify_fragment(f: Formula) -> str:
    if not _has_quantifier(f):
        return QUANTIFIER_FREE
    g = f
    while isinstance(g, Exists):
        g = g.body
    if not _has_quantifier(g):
        return EXISTENTIAL
    return GENERAL


# ---------------------------------------------------------------------------
# Graph form


@dataclass(frozen=True)
class WitnessDef:
    """Definition of a graph-form witness: either a polynomial term over
    earlier variables (kind='term') or the exp of another variable
    (kind='exp', with source the argument variable)."""

    index: int
    kind: str  # "term" | "exp"
    term: Optional[Term] = None
    source: Optional[Var] = None


@dataclass(frozen=True)
class GraphForm:
    """Result of to_graph_form: an equivalent existential formula whose
    atoms are polynomial comparisons and exp-graph atoms only, plus the
    completion recipe for the witnesses it introduced."""

    formula: Formula
    defs: tuple  # tuple[WitnessDef, ...] in dependency order


def _term_has_exp(t: Term) -> bool:
    if isinstance(t, Exp):
        return True
    if isinstance(t, Sum):
        return any(_term_has_exp(s) for s in t.terms)
    if isinstance(t, Product):
        return any(_term_has_exp(s) for s in t.factors)
    return False


def is_graph_form(f: Formula) -> bool:
    """True if f is (optionally) an Exists prefix over a body whose atoms are
    polynomial comparisons and ExpGraph atoms only."""
    g = f
    while isinstance(g, Exists):
        g = g.body
    if _has_quantifier(g):
        return False
    for at in formula_atoms(g):
        if isinstance(at, Compare) and (_term_has_exp(at.lhs) or _term_has_exp(at.rhs)):
            return False
    return True


def to_graph_form(f: Formula) -> GraphForm:
    """Rewrite an existential/quantifier-free formula into graph form.

    Each nested exp(t) is replaced by fresh witnesses: v = t (skipped when t
    is already a variable) and u = exp(v).  Identical exp arguments share one
    witness.  The definitional constraints are conjoined at the top of the
    body, so the new witnesses are determined functions of the remaining
    variables.
    """
    frag = classify_fragment(f)
    if frag == GENERAL:
        raise FormulaError("graph form requires an existential or "
                           "quantifier-free formula")
    if is_graph_form(f):
        return GraphForm(f, ())

    prefix = []
    g = f
    while isinstance(g, Exists):
        prefix.extend(g.indices)
        g = g.body

    used = [v.index for at in formula_atoms(g) for v in atom_vars(at)
            if v.block == "w"]
    counter = max(used + list(prefix), default=-1) + 1
    defs: list = []
    memo: dict = {}

    def fresh() -> int:
        nonlocal counter
        i = counter
        counter += 1
        return i

    def rewrite_term(t: Term) -> Term:
        if isinstance(t, (Var, Const)):
            return t
        if isinstance(t, Sum):
            return Sum(tuple(rewrite_term(s) for s in t.terms))
        if isinstance(t, Product):
            return Product(tuple(rewrite_term(s) for s in t.factors))
        arg = rewrite_term(t.arg)
        key = ("exp", arg)
        if key in memo:
            return memo[key]
        if isinstance(arg, Var):
            src = arg
        else:
            vkey = ("term", arg)
            if vkey in memo:
                src = memo[vkey]
            else:
                src = Var("w", fresh())
                defs.append(WitnessDef(src.index, "term", term=arg))
                memo[vkey] = src
        u = Var("w", fresh())
        defs.append(WitnessDef(u.index, "exp", source=src))
        memo[key] = u
        return u

    def rewrite(h: Formula) -> Formula:
        if isinstance(h, Atom):
            at = h.atom
            if isinstance(at, ExpGraph):
                return h
            lhs, rhs = at.lhs, at.rhs
            # recognize var = exp(var) before introducing witnesses
            if at.rel == "=":
                if isinstance(rhs, Exp) and isinstance(rhs.arg, Var) and isinstance(lhs, Var):
                    return Atom(ExpGraph(lhs, rhs.arg))
                if isinstance(lhs, Exp) and isinstance(lhs.arg, Var) and isinstance(rhs, Var):
                    return Atom(ExpGraph(rhs, lhs.arg))
            return Atom(Compare(rewrite_term(lhs), at.rel, rewrite_term(rhs)))
        if isinstance(h, Not):
            return Not(rewrite(h.body))
        if isinstance(h, And):
            return And(tuple(rewrite(p) for p in h.parts))
        return Or(tuple(rewrite(p) for p in h.parts))

    body = rewrite(g)
    def_atoms = []
    for d in defs:
        if d.kind == "term":
            def_atoms.append(Atom(Compare(Var("w", d.index), "=", d.term)))
        else:
            def_atoms.append(Atom(ExpGraph(Var("w", d.index), d.source)))
    if def_atoms:
        body = And(tuple([body] + def_atoms))
    new_indices = tuple(prefix) + tuple(d.index for d in defs)
    out = Exists(new_indices, body) if new_indices else body
    return GraphForm(out, tuple(defs))


# ---------------------------------------------------------------------------
# Complexity (format / degree)


@dataclass(frozen=True)
class ComplexityProfile:
    format: int      # free-tuple arity (l + k) + witnesses + exp-atoms
    degree: int      # sum of polynomial total degrees + exp-atoms
    input_dim: int   # l
    param_dim: int   # k
    witness_dim: int
    exp_atoms: int
    free_vars: int

    def to_json(self) -> dict:
        return {"format": self.format, "degree": self.degree,
                "input_dim": self.input_dim, "param_dim": self.param_dim,
                "witness_dim": self.witness_dim, "exp_atoms": self.exp_atoms,
                "free_vars": self.free_vars}


def term_degree(t: Term) -> int:
    """Total polynomial degree after flattening; exp arguments are rejected."""
    if isinstance(t, Var):
        return 1
    if isinstance(t, Const):
        return 0
    if isinstance(t, Sum):
        return max((term_degree(s) for s in t.terms), default=0)
    if isinstance(t, Product):
        return sum(term_degree(s) for s in t.factors)
    raise FormulaError("exp term inside a polynomial atom; "
                       "call to_graph_form first")


def term_degree_in(t: Term, v: Var) -> float:
    """Degree of a term in one variable; infinite when v sits under exp."""
    if isinstance(t, Var):
        return 1 if t == v else 0
    if isinstance(t, Const):
        return 0
    if isinstance(t, Sum):
        return max((term_degree_in(s, v) for s in t.terms), default=0)
    if isinstance(t, Product):
        return sum(term_degree_in(s, v) for s in t.factors)
    return math.inf if any(u == v for u in term_vars(t)) else 0


def complexity(f: Formula, input_dim: Optional[int] = None,
               param_dim: Optional[int] = None) -> ComplexityProfile:
    """Format/degree of a graph-form formula.

    Duplicate atoms (structurally equal) are counted once: a formula is a
    Boolean combination over its atom inventory.
    """
    if not is_graph_form(f):
        raise FormulaError("complexity requires a graph-form formula")
    g = f
    witnesses: set = set()
    while isinstance(g, Exists):
        witnesses.update(g.indices)
        g = g.body

    free = free_vars(f)
    n = len(free)
    atoms = []
    seen = set()
    for at in formula_atoms(g):
        if at not in seen:
            seen.add(at)
            atoms.append(at)
    r = sum(1 for at in atoms if isinstance(at, ExpGraph))
    deg = sum(max(term_degree(at.lhs), term_degree(at.rhs))
              for at in atoms if isinstance(at, Compare))
    x_idx = [v.index for v in free if v.block == "x"]
    a_idx = [v.index for v in free if v.block == "a"]
    l = input_dim if input_dim is not None else (max(x_idx) + 1 if x_idx else 0)
    k = param_dim if param_dim is not None else (max(a_idx) + 1 if a_idx else 0)
    # format counts the arity of the free-variable tuple (l + k), not the
    # occurrence count: a coordinate the formula ignores still belongs to
    # the signature, and the additivity law for composed formulas needs it
    return ComplexityProfile(
        format=l + k + len(witnesses) + r,
        degree=deg + r,
        input_dim=l,
        param_dim=k,
        witness_dim=len(witnesses),
        exp_atoms=r,
        free_vars=n,
    )


# ---------------------------------------------------------------------------
# JSON export


def term_to_json(t: Term):
    if isinstance(t, Var):
        return {"var": str(t)}
    if isinstance(t, Const):
        return {"const": str(Const(t.value))}
    if isinstance(t, Sum):
        return {"sum": [term_to_json(s) for s in t.terms]}
    if isinstance(t, Product):
        return {"product": [term_to_json(s) for s in t.factors]}
    return {"exp": term_to_json(t.arg)}


def formula_to_json(f: Formula):
    if isinstance(f, Atom):
        at = f.atom
        if isinstance(at, Compare):
            return {"atom": {"rel": at.rel, "lhs": term_to_json(at.lhs),
                             "rhs": term_to_json(at.rhs)}}
        return {"exp_graph": {"lhs": str(at.lhs), "rhs": str(at.rhs)}}
    if isinstance(f, Not):
        return {"not": formula_to_json(f.body)}
    if isinstance(f, And):
        return {"and": [formula_to_json(p) for p in f.parts]}
    if isinstance(f, Or):
        return {"or": [formula_to_json(p) for p in f.parts]}
    key = "exists" if isinstance(f, Exists) else "forall"
    return {key: {"witnesses": list(f.indices), "body": formula_to_json(f.body)}}


def formula_to_json_str(f: Formula) -> str:
    return json.dumps(formula_to_json(f), sort_keys=True)
