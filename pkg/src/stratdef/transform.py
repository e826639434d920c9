"""The strategic transform on definable classifier families.

Input: a hypothesis formula Phi_H(x, a) over input variables x0..x{l-1} and
parameters, and a neighborhood formula Phi_N(x, y) over a doubled input
block (source point x0..x{l-1}, target point x{l}..x{2l-1}).  Output: the
formula

    exists y . Phi_N(x, y) and Phi_H(y, a)

where y becomes a fresh block of witnesses, so the strategic classifier
(accept x iff some point reachable from x is accepted) stays in the
existential fragment.  Complexity accounting (format = free variables +
witnesses + exp atoms, degree = total atom degree + exp atoms) is computed
on the graph forms of the input and output formulas.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import formula as fm


class TransformError(Exception):
    pass


@dataclass
class StrategicClassSpec:
    """A strategic classifier family: formulas plus complexity accounting."""

    hypothesis: fm.Formula
    neighborhood: fm.Formula
    transformed: fm.Formula
    input_dim: int
    hypothesis_profile: Optional[fm.ComplexityProfile]
    neighborhood_profile: Optional[fm.ComplexityProfile]
    transformed_profile: Optional[fm.ComplexityProfile]
    fragment: str = fm.EXISTENTIAL


def _strip_exists(f: fm.Formula):
    indices = []
    while isinstance(f, fm.Exists):
        indices.extend(f.indices)
        f = f.body
    return tuple(indices), f


def _max_block_index(f: fm.Formula, block: str) -> int:
    out = -1
    for at in fm.formula_atoms(f):
        for v in fm.atom_vars(at):
            if v.block == block:
                out = max(out, v.index)
    return out


def strategic_transform(phi_h: fm.Formula, phi_n: fm.Formula,
                        input_dim: Optional[int] = None,
                        allow_general: bool = False) -> StrategicClassSpec:
    """Build the formula for the strategic version of a definable family.

    input_dim is the dimension l of a single input point; when omitted it is
    inferred from the neighborhood formula (whose x block has 2l variables).
    Both inputs must be quantifier-free or existential; formulas with
    universal quantifiers are rejected unless allow_general is set, in which
    case the output carries no quantitative complexity guarantees.
    """
    for name, f in (("hypothesis", phi_h), ("neighborhood", phi_n)):
        frag = fm.classify_fragment(f)
        if frag == fm.GENERAL and not allow_general:
            raise TransformError(
                f"{name} formula is outside the existential fragment")

    if input_dim is None:
        top = _max_block_index(phi_n, "x") + 1
        if top % 2 != 0:
            raise TransformError(
                "cannot infer input dimension: neighborhood formula has an "
                "odd number of point coordinates; pass input_dim explicitly")
        input_dim = top // 2
    l = input_dim
    if _max_block_index(phi_h, "x") + 1 > l:
        raise TransformError("hypothesis formula uses more input coordinates "
                             "than the declared input dimension")
    if _max_block_index(phi_n, "x") + 1 > 2 * l:
        raise TransformError("neighborhood formula uses more than a doubled "
                             "input block")

    # disjoint witness blocks, then a fresh block for the target point y
    n_idx, n_body = _strip_exists(phi_n)
    h_idx, h_body = _strip_exists(phi_h)
    n_map = {old: new for new, old in enumerate(n_idx)}
    h_map = {old: len(n_idx) + new for new, old in enumerate(h_idx)}
    n_body = fm.rename_witnesses(n_body, n_map)
    h_body = fm.rename_witnesses(h_body, h_map)
    y_base = len(n_idx) + len(h_idx)

    def n_sub(v: fm.Var) -> fm.Var:
        if v.block == "x" and v.index >= l:
            return fm.Var("w", y_base + (v.index - l))
        return v

    def h_sub(v: fm.Var) -> fm.Var:
        if v.block == "x":
            return fm.Var("w", y_base + v.index)
        return v

    n_body = fm.map_vars(n_body, n_sub)
    h_body = fm.map_vars(h_body, h_sub)
    all_idx = tuple(range(y_base + l))
    out = fm.Exists(all_idx, fm.conj(n_body, h_body))

    k = _max_block_index(phi_h, "a") + 1

    def profile(f: fm.Formula, **kw) -> Optional[fm.ComplexityProfile]:
        # format/degree accounting is only defined on the existential
        # fragment; formulas admitted via allow_general get no profile
        if fm.classify_fragment(f) == fm.GENERAL:
            return None
        return fm.complexity(fm.to_graph_form(f).formula, **kw)

    prof_h = profile(phi_h, input_dim=l, param_dim=k)
    prof_n = profile(phi_n, input_dim=2 * l)
    prof_out = profile(out, input_dim=l, param_dim=k)
    frag = fm.classify_fragment(out)
    return StrategicClassSpec(phi_h, phi_n, out, l, prof_h, prof_n, prof_out,
                              fragment=frag)


def complexity_report(spec: StrategicClassSpec) -> dict:
    """Numeric format/degree accounting plus symbolic capacity bounds.

    The symbolic bounds are templates with unspecified absolute constants:
    they are reported as strings, not evaluated numbers.
    """
    ph, pn, po = (spec.hypothesis_profile, spec.neighborhood_profile,
                  spec.transformed_profile)

    def block(p: Optional[fm.ComplexityProfile]) -> dict:
        if p is None:
            return {"note": "outside the existential fragment; no "
                            "format/degree accounting"}
        return {"format": p.format, "degree": p.degree,
                "witnesses": p.witness_dim, "exp_atoms": p.exp_atoms}

    rep = {
        "input_dim": spec.input_dim,
        "param_dim": ph.param_dim if ph is not None else None,
        "fragment": spec.fragment,
        "hypothesis": block(ph),
        "neighborhood": block(pn),
        "transformed": block(po),
    }
    if spec.fragment == fm.GENERAL or po is None:
        rep["symbolic_bounds"] = {
            "note": "formula is outside the existential fragment; no "
                    "quantitative bounds are claimed"}
        return rep
    rep["format_additivity"] = {
        "expected_witnesses_upper":
            pn.witness_dim + ph.witness_dim + spec.input_dim,
    }
    rep["symbolic_bounds"] = {
        "vc_dimension":
            f"O_F(log D) with F={po.format}, D={po.degree}; "
            "absolute constant unspecified",
        "erm_sample_complexity":
            f"O((k*log(1/eps) + g(F)*log(D) + log(1/delta))/eps) with "
            f"k={ph.param_dim}, F={po.format}, D={po.degree}; "
            "function g and constant unspecified",
        "quantifier_elimination_atoms":
            f"s^((k+1)*(l+1)) * d^O(k*l) with s=atoms, d=degree for a "
            "one-block elimination; exponent constant unspecified",
    }
    return rep
