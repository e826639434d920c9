"""Definability toolkit for strategic classification.

Formulas over the reals with exponentiation, the strategic transform on
definable classifier families, exact linear solvers, lower-bound
constructions with machine-checked certificates, capacity estimation and
ERM experiments.
"""

__version__ = "0.1.0"
