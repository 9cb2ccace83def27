"""Ensemble specifications and the design-rate evaluator.

Specs are immutable descriptions of random factor graph ensembles:
regular (fixed variable degree l, factor degree r), irregular (node-perspective
degree distributions) and Poisson (alpha*N factors of fixed degree k).
"""

import math
from dataclasses import dataclass

import numpy as np

from .factors import FactorTable

_DIST_TOL = 1e-9


@dataclass(frozen=True)
class RegularSpec:
    """(l, r)-regular ensemble with one shared factor of arity r."""

    l: int
    r: int
    factor: FactorTable

    def __post_init__(self):
        if self.l < 1 or self.r < 1:
            raise ValueError("degrees must be >= 1")
        if self.factor.arity != self.r:
            raise ValueError(f"factor arity {self.factor.arity} != r={self.r}")

    @property
    def alphabet(self):
        return self.factor.alphabet


@dataclass(frozen=True)
class IrregularSpec:
    """Irregular ensemble with node-perspective degree distributions.

    variable_degrees maps i -> L_i, check_degrees maps j -> R_j, and factors
    maps each check degree j to the arity-j table used by those nodes.
    """

    variable_degrees: dict
    check_degrees: dict
    factors: dict

    def __post_init__(self):
        L, R = self.variable_degrees, self.check_degrees
        for dist, name in ((L, "variable"), (R, "check")):
            if not dist:
                raise ValueError(f"empty {name} degree distribution")
            if any(d < 1 for d in dist):
                raise ValueError("all degrees must be >= 1")
            if any(w < 0 for w in dist.values()):
                raise ValueError("degree probabilities must be nonnegative")
            if abs(sum(dist.values()) - 1.0) > _DIST_TOL:
                raise ValueError(f"{name} degree distribution must sum to 1")
        for j in R:
            if j not in self.factors:
                raise ValueError(f"no factor given for check degree {j}")
            if self.factors[j].arity != j:
                raise ValueError(f"factor for degree {j} has arity {self.factors[j].arity}")
        alphas = {f.alphabet.labels for f in self.factors.values()}
        if len(alphas) > 1:
            raise ValueError("all factors must share one alphabet")

    @property
    def mean_variable_degree(self):
        return sum(i * w for i, w in self.variable_degrees.items())

    @property
    def mean_check_degree(self):
        return sum(j * w for j, w in self.check_degrees.items())

    @property
    def alphabet(self):
        return next(iter(self.factors.values())).alphabet


@dataclass(frozen=True)
class PoissonSpec:
    """alpha*N factor nodes of degree k with independently chosen neighbors."""

    alpha: float
    k: int
    factor: FactorTable

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.factor.arity != self.k:
            raise ValueError(f"factor arity {self.factor.arity} != k={self.k}")

    @property
    def alphabet(self):
        return self.factor.alphabet


@dataclass(frozen=True)
class FieldSpec:
    """Per-symbol nonnegative reweighting applied at every variable node."""

    weights: tuple

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        object.__setattr__(self, "weights", w)
        if any(x < 0 for x in w):
            raise ValueError("field weights must be nonnegative")
        if not any(x > 0 for x in w):
            raise ValueError("at least one field weight must be positive")

    @property
    def array(self):
        return np.asarray(self.weights, dtype=float)

    @classmethod
    def from_mapping(cls, alphabet, mapping):
        w = [0.0] * alphabet.q
        for label, val in mapping.items():
            w[alphabet.index(label)] = float(val)
        return cls(tuple(w))


@dataclass(frozen=True)
class RandomFieldSpec:
    """Finite mixture of per-variable fields drawn i.i.d. across variables."""

    fields: tuple
    probs: tuple

    def __post_init__(self):
        fields = tuple(self.fields)
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "fields", fields)
        object.__setattr__(self, "probs", probs)
        if not fields or len(fields) != len(probs):
            raise ValueError("fields and probs must be nonempty and aligned")
        if any(p < 0 for p in probs):
            raise ValueError("field probabilities must be nonnegative")
        if abs(sum(probs) - 1.0) > _DIST_TOL:
            raise ValueError("field probabilities must sum to 1")


def design_rate(spec):
    """log q + (l/r) log(N_f / q^r), valid when the uniform point is stationary.

    Requires constant socket marginals (so that uniform messages are a fixed
    point); raises ValueError otherwise.
    """
    if not isinstance(spec, RegularSpec):
        raise TypeError("design_rate is defined for regular specs")
    f = spec.factor
    if not f.has_constant_socket_marginals():
        raise ValueError("socket marginals are not constant; "
                         "the uniform stationary point does not exist")
    q = f.q
    return math.log(q) + (spec.l / spec.r) * math.log(f.total / q ** spec.r)
