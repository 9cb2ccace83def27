"""Exact and exhaustive finite-size computations of the expected partition function.

Ground truth for the asymptotic formulas.  The type route sums the closed-form
expected count of assignments per (variable-type, factor-type) pair in exact
rational arithmetic; the matching route enumerates socket matchings directly
and never touches the counting formula, so agreement between the two is an
end-to-end check.
"""

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import BudgetExceeded

_ENUM_BUDGET = 10_000_000
_FACTORIAL_BUDGET = 10_000_000
_BRUTE_FORCE_CAP = 1_000_000


def log_factorial_table(n):
    """log k! for k = 0..n via cumulative sums (no gamma approximation)."""
    return np.concatenate([[0.0], np.cumsum(np.log(np.arange(1, n + 1)))])


@dataclass
class FiniteTypePair:
    """Integer variable-type counts v on X and factor-type counts u on X^r."""

    v: tuple
    u: dict  # index tuple -> count

    def validate(self, n_vars, spec):
        l, r, q = spec.l, spec.r, spec.factor.q
        if len(self.v) != q or any(c < 0 for c in self.v):
            raise ValueError("v must be q nonnegative counts")
        if sum(self.v) != n_vars:
            raise ValueError("v must sum to N")
        if (n_vars * l) % r != 0:
            raise ValueError("N*l must be divisible by r")
        m = n_vars * l // r
        if any(c < 0 for c in self.u.values()):
            raise ValueError("u counts must be nonnegative")
        if sum(self.u.values()) != m:
            raise ValueError("u must sum to (l/r) N")
        socket = [0] * q
        for idx, c in self.u.items():
            if len(idx) != r:
                raise ValueError("u keys must be r-tuples")
            for z in idx:
                socket[z] += c
        if any(socket[z] != l * self.v[z] for z in range(q)):
            raise ValueError("(v, u) violate the socket consistency condition")


def expected_type_count(n_vars, spec, v, u):
    """log of the expected number of assignments with types (v, u).

    multinomial(N; v) * multinomial((l/r)N; u) * prod_x (v(x) l)! / (N l)!,
    evaluated through a log-factorial table.
    """
    pair = FiniteTypePair(tuple(v), dict(u))
    pair.validate(n_vars, spec)
    l, r = spec.l, spec.r
    m = n_vars * l // r
    lf = log_factorial_table(n_vars * l)
    out = lf[n_vars] - sum(lf[c] for c in pair.v)
    out += lf[m] - sum(lf[c] for c in pair.u.values())
    out += sum(lf[c * l] for c in pair.v)
    out -= lf[n_vars * l]
    return float(out)


def _exact_type_weight(n_vars, spec, v, u_counts, u_cells):
    """Expected count times the interaction weight, as an exact Fraction."""
    l, r = spec.l, spec.r
    m = n_vars * l // r
    num = math.factorial(n_vars)
    for c in v:
        num //= math.factorial(c)
    num2 = math.factorial(m)
    for c in u_counts:
        num2 //= math.factorial(c)
    weight = Fraction(num) * num2
    weight *= Fraction(math.prod(math.factorial(c * l) for c in v),
                       math.factorial(n_vars * l))
    flat = spec.factor.values
    for cell, c in zip(u_cells, u_counts):
        if c:
            weight *= Fraction(float(flat[cell])) ** c
    return weight


def _consistent_u_assignments(cells, cell_counts, m, targets):
    """Yield count tuples over `cells` summing to m with given socket totals.

    cell_counts[t][z] is how many sockets of symbol z one factor of cell t
    uses; targets[z] is the required total.  Prunes on partial socket sums.
    """
    q = len(targets)
    n_cells = len(cells)
    # remaining socket capacity if every later cell were usable without limit
    suffix_max = [[0] * q for _ in range(n_cells + 1)]
    for t in range(n_cells - 1, -1, -1):
        for z in range(q):
            suffix_max[t][z] = suffix_max[t + 1][z] + (m * cell_counts[t][z])

    state = [0] * n_cells
    socket = [0] * q

    def rec(t, left):
        if t == n_cells:
            if left == 0 and all(socket[z] == targets[z] for z in range(q)):
                yield tuple(state)
            return
        counts = cell_counts[t]
        cap = left
        for z in range(q):
            if counts[z]:
                cap = min(cap, (targets[z] - socket[z]) // counts[z])
        for c in range(cap, -1, -1):
            for z in range(q):
                socket[z] += c * counts[z]
            feasible = all(socket[z] + suffix_max[t + 1][z] >= targets[z]
                           for z in range(q))
            if feasible:
                state[t] = c
                yield from rec(t + 1, left - c)
            for z in range(q):
                socket[z] -= c * counts[z]
        state[t] = 0

    yield from rec(0, m)


def finite_expected_z(n_vars, spec, type_filter=None, budget=_ENUM_BUDGET):
    """E[Z] at N variables by exhaustive enumeration of consistent types, exact.

    type_filter, if given, receives (v, u_dict) and may veto a pair.
    """
    l, r, q = spec.l, spec.r, spec.factor.q
    if (n_vars * l) % r != 0:
        raise ValueError("N*l must be divisible by r")
    m = n_vars * l // r
    f = spec.factor
    cells = [idx for idx in itertools.product(range(q), repeat=r)
             if f.values[idx] > 0]
    cell_counts = [[idx.count(z) for z in range(q)] for idx in cells]
    est = math.comb(m + len(cells) - 1, max(len(cells) - 1, 0)) * (n_vars + 1) ** (q - 1)
    if est > budget:
        raise BudgetExceeded(f"type enumeration would visit ~{est} candidates "
                             f"(budget {budget})")
    total = Fraction(0)
    from .factors import compositions
    for v in compositions(n_vars, q):
        targets = [l * c for c in v]
        for u_counts in _consistent_u_assignments(cells, cell_counts, m, targets):
            if type_filter is not None:
                u_dict = {cells[t]: c for t, c in enumerate(u_counts) if c}
                if not type_filter(v, u_dict):
                    continue
            total += _exact_type_weight(n_vars, spec, v, u_counts, cells)
    return total


def exact_annealed_finite(n_vars, spec, type_filter=None, budget=_ENUM_BUDGET):
    """(1/N) log E[Z] from the exact type enumeration."""
    total = finite_expected_z(n_vars, spec, type_filter=type_filter, budget=budget)
    if total <= 0:
        return float("-inf")
    return (math.log(total.numerator) - math.log(total.denominator)) / n_vars


# -- direct socket-matching enumeration ---------------------------------------------


def _multiset_permutations(counts):
    """All distinct sequences using counts[i] copies of item i, lexicographic."""
    items = [i for i, c in enumerate(counts) for _ in range(c)]
    n = len(items)
    seq = []
    remaining = list(counts)

    def rec():
        if len(seq) == n:
            yield tuple(seq)
            return
        for i, c in enumerate(remaining):
            if c:
                remaining[i] -= 1
                seq.append(i)
                yield from rec()
                seq.pop()
                remaining[i] += 1

    yield from rec()


def _assignment_matrix(q, n_vars):
    """All q^N assignments as an (q^N, N) int array, row-major symbol order."""
    if q ** n_vars > _BRUTE_FORCE_CAP:
        raise BudgetExceeded(f"per-graph brute force needs q^N = {q ** n_vars} "
                             f"assignments (cap {_BRUTE_FORCE_CAP})")
    idx = np.arange(q ** n_vars, dtype=np.int64)
    cols = [(idx // q ** (n_vars - 1 - pos)) % q for pos in range(n_vars)]
    return np.stack(cols, axis=1).astype(np.int8)


def _z_for_matchings(slot_vars, spec, assignments, weights=None):
    """Partition functions of the multigraphs given by slot->variable maps.

    slot_vars: (B, N*l) variable index per factor-socket position (position
    p belongs to factor p // r, slot p % r).  Returns (B,) array; exact
    integers when the table is integral and no weights are given.
    """
    f = spec.factor
    q, r = f.q, f.arity
    n_factors = slot_vars.shape[1] // r
    flat = f.values.reshape(-1)
    integral = weights is None and np.all(flat == np.round(flat)) and np.max(flat) < 2 ** 20
    strides = q ** np.arange(r - 1, -1, -1, dtype=np.int64)
    sym = assignments[:, slot_vars]                  # (A, B, N*l)
    sym = sym.reshape(assignments.shape[0], slot_vars.shape[0], n_factors, r)
    cell = np.tensordot(sym.astype(np.int64), strides, axes=(3, 0))
    vals = flat[cell]                                # (A, B, n_factors)
    if integral:
        prod = np.round(vals).astype(np.int64)
        out = prod[:, :, 0].copy()
        for a in range(1, n_factors):
            out *= prod[:, :, a]
        if weights is not None:
            raise AssertionError
        return out.sum(axis=0)
    prod = np.prod(vals, axis=2)
    if weights is not None:
        prod = prod * weights[:, None]
    return prod.sum(axis=0)


def exhaustive_E_Z(n_vars, spec, mode="exact", samples=10_000, seed=0,
                   field=None, random_field=None, return_stderr=False):
    """E[Z] over uniformly random socket matchings, independent of type counting.

    exact mode enumerates matchings (grouped by the within-variable socket
    relabelings, which leave the multigraph unchanged and carry equal weight)
    and returns an exact Fraction when the table is integral, else a float.
    sampled mode averages over random matchings; a random_field is resampled
    per matching.
    """
    l, r = spec.l, spec.r
    if (n_vars * l) % r != 0:
        raise ValueError("N*l must be divisible by r")
    n_sockets = n_vars * l
    assignments = _assignment_matrix(spec.factor.q, n_vars)
    base_weights = None
    if field is not None:
        hw = field.array
        base_weights = np.prod(hw[assignments], axis=1)

    if mode == "exact":
        if random_field is not None:
            raise ValueError("random fields require sampled mode")
        if math.factorial(n_sockets) > _FACTORIAL_BUDGET:
            raise BudgetExceeded(f"{n_sockets}! matchings exceed the exact-mode budget")
        batch, acc_int, acc_float, count = [], 0, 0.0, 0
        integral = base_weights is None
        for perm in _multiset_permutations([l] * n_vars):
            batch.append(perm)
            if len(batch) == 4096:
                z = _z_for_matchings(np.array(batch, dtype=np.int64), spec,
                                     assignments, base_weights)
                count += len(batch)
                if z.dtype.kind == "i":
                    acc_int += int(z.sum())
                else:
                    integral = False
                    acc_float += float(z.sum())
                batch = []
        if batch:
            z = _z_for_matchings(np.array(batch, dtype=np.int64), spec,
                                 assignments, base_weights)
            count += len(batch)
            if z.dtype.kind == "i":
                acc_int += int(z.sum())
            else:
                integral = False
                acc_float += float(z.sum())
        if integral:
            return Fraction(acc_int, count)
        return (acc_int + acc_float) / count

    if mode != "sampled":
        raise ValueError("mode must be 'exact' or 'sampled'")
    rng = np.random.default_rng(seed)
    zs = np.empty(samples)
    done = 0
    while done < samples:
        b = min(2048, samples - done)
        perms = np.empty((b, n_sockets), dtype=np.int64)
        socket_owner = np.repeat(np.arange(n_vars), l)
        for i in range(b):
            perms[i] = socket_owner[rng.permutation(n_sockets)]
        weights = base_weights
        if random_field is not None:
            # fields are resampled per matching: evaluate one at a time
            probs = np.asarray(random_field.probs)
            tables = np.stack([fs.array for fs in random_field.fields])
            var_idx = np.arange(n_vars)
            for i in range(b):
                picks = rng.choice(len(probs), size=n_vars, p=probs)
                w = np.prod(tables[picks][var_idx[None, :], assignments], axis=1)
                z = _z_for_matchings(perms[i:i + 1], spec, assignments, w)
                zs[done + i] = float(z[0])
            done += b
            continue
        z = _z_for_matchings(perms, spec, assignments, weights)
        zs[done:done + b] = np.asarray(z, dtype=float)
        done += b
    mean = float(zs.mean())
    if return_stderr:
        return mean, float(zs.std(ddof=1) / math.sqrt(samples))
    return mean
