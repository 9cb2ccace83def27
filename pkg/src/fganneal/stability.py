"""Local stability of the uniform (paramagnetic) point of the fixed-type iteration.

Linearizing the iteration around uniform messages gives a q x q response
operator A acting on message perturbations; the uniform point is stable when
every eigenvalue not carried by the all-ones direction has modulus below 1.
The all-ones direction always has eigenvalue -(r-1) and is removed by
normalization.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .factors import _composition_levels, multinomial

_MARGINAL_BAND = 1e-9


@dataclass
class StabilityReport:
    matrix: np.ndarray
    eigenvalues: list
    trivial_eigenvalue: float
    max_nontrivial_abs: float
    stable: bool
    marginal: bool


def linearized_operator(factor, r=None):
    """Response matrix A[x, y] = -(sum_i sum_{x_i=x} f * #{j != i: x_j = y}) / S_x.

    Requires constant socket marginals so that the uniform point is stationary.
    """
    if r is not None and r != factor.arity:
        raise ValueError("r must match the factor arity")
    r = factor.arity
    if not factor.has_constant_socket_marginals():
        raise ValueError("socket marginals are not constant; no uniform stationary point")
    q = factor.q
    if factor.perm_invariant:
        # branch 1 with symbol x at slot 1: companions form a composition c of
        # r-1; each such tuple appears multinomial(r-1; c) times and carries
        # c_y companions equal to y.  The common factor r over branches cancels.
        _, type_values, _, _ = factor.type_data()
        levels, push = _composition_levels(q, r)
        sub = levels[r - 1]
        bump = push[r - 1]
        num = np.zeros((q, q))
        den = np.zeros(q)
        for ci, comp in enumerate(sub):
            w = float(multinomial(r - 1, comp))
            for x in range(q):
                val = w * type_values[bump[ci, x]]
                den[x] += val
                for y in range(q):
                    num[x, y] += val * comp[y]
    else:
        num = np.zeros((q, q))
        den = np.zeros(q)
        for i in range(r):
            axes = tuple(a for a in range(r) if a != i)
            den += factor.values.sum(axis=axes) if axes else factor.values
            for j in range(r):
                if j == i:
                    continue
                keep = tuple(a for a in range(r) if a not in (i, j))
                pair = factor.values.sum(axis=keep) if keep else factor.values
                # pair axes ordered (min(i,j), max(i,j)); orient as (slot i, slot j)
                if j < i:
                    pair = pair.T
                num += pair
    return -num / den[:, None]


def paramagnetic_stability(factor, r=None):
    """Spectral stability report of the uniform point for this interaction."""
    a = linearized_operator(factor, r)
    symmetric = np.allclose(a, a.T, atol=1e-12)
    if symmetric:
        vals, vecs = np.linalg.eigh(a)
    else:
        vals, vecs = np.linalg.eig(a)
    ones = np.ones(factor.q) / math.sqrt(factor.q)
    overlaps = np.abs(vecs.T.conj() @ ones)
    norms = np.linalg.norm(vecs, axis=0)
    trivial_idx = int(np.argmax(overlaps / norms))
    nontrivial = [abs(v) for i, v in enumerate(vals) if i != trivial_idx]
    max_nt = max(nontrivial) if nontrivial else 0.0
    stable = max_nt < 1.0
    marginal = abs(max_nt - 1.0) <= 1e-9
    return StabilityReport(
        matrix=a,
        eigenvalues=[complex(v) if np.iscomplexobj(vals) else float(v) for v in vals],
        trivial_eigenvalue=float(np.real(vals[trivial_idx])),
        max_nontrivial_abs=float(max_nt),
        stable=stable,
        marginal=marginal,
    )


def binary_csp_stability_fraction(r, k):
    """Exact nontrivial eigenvalue magnitude for the near-balanced exclusion factor.

    C(r-1, r/2-k) (2k-1) / (2 sum_{i<r/2-k} C(r-1, i) + C(r-1, r/2-k)), in
    exact rational arithmetic to avoid cancellation at large r.
    """
    if r % 2 != 0:
        raise ValueError("r must be even")
    if not (1 <= k <= r // 2):
        raise ValueError("k must satisfy 1 <= k <= r/2")
    m = r // 2 - k
    top = math.comb(r - 1, m) * (2 * k - 1)
    bottom = 2 * sum(math.comb(r - 1, i) for i in range(m)) + math.comb(r - 1, m)
    return Fraction(top, bottom)


def binary_csp_stability_value(r, k):
    """Float value of binary_csp_stability_fraction."""
    return float(binary_csp_stability_fraction(r, k))
