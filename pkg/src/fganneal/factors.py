"""Alphabets and dense factor tables.

A factor table stores a nonnegative interaction on X^r densely, where X is a
finite alphabet of q symbols.  Permutation-invariant tables additionally carry
a compressed per-type representation (one value per symbol-count vector) that
the solvers use to evaluate branch sums in O(#types) instead of O(q^r).
"""

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import BudgetExceeded

MAX_TABLE_ENTRIES = 10_000_000
PERM_CHECK_LIMIT = 1_000_000
_PERM_SPOT_CHECKS = 512


@dataclass(frozen=True)
class Alphabet:
    """Finite symbol set shared by every variable node."""

    labels: tuple

    def __post_init__(self):
        labels = tuple(str(s) for s in self.labels)
        object.__setattr__(self, "labels", labels)
        if len(labels) < 2:
            raise ValueError("alphabet needs at least two symbols")
        if len(set(labels)) != len(labels):
            raise ValueError("alphabet labels must be distinct")
        if any((not s) or any(c.isspace() for c in s) for s in labels):
            raise ValueError("alphabet labels must be nonempty and whitespace-free")

    @property
    def q(self):
        return len(self.labels)

    def index(self, label):
        return self.labels.index(str(label))


def default_alphabet(q):
    """Alphabet with labels "0".."q-1"."""
    return Alphabet(tuple(str(i) for i in range(q)))


BINARY = default_alphabet(2)


def compositions(total, parts):
    """All tuples of `parts` nonnegative ints summing to `total`, lexicographic."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in compositions(total - head, parts - 1):
            yield (head,) + rest


def multinomial(total, counts):
    """Exact multinomial coefficient total! / prod(counts!)."""
    if sum(counts) != total:
        raise ValueError("counts must sum to total")
    out = 1
    rem = total
    for c in counts:
        out *= math.comb(rem, c)
        rem -= c
    return out


@lru_cache(maxsize=None)
def _composition_levels(q, r):
    """Cached DP structure for products of r independent symbol draws.

    Returns (levels, push) where levels[t] is the ordered list of compositions
    of t into q parts and push[t][i, x] is the index in levels[t+1] of
    levels[t][i] + e_x.
    """
    levels = [list(compositions(t, q)) for t in range(r + 1)]
    index = [{c: i for i, c in enumerate(lv)} for lv in levels]
    push = []
    for t in range(r):
        nxt = np.empty((len(levels[t]), q), dtype=np.int64)
        for i, c in enumerate(levels[t]):
            for x in range(q):
                bumped = list(c)
                bumped[x] += 1
                nxt[i, x] = index[t + 1][tuple(bumped)]
        push.append(nxt)
    return levels, push


def count_product_weights(m, r):
    """Coefficients W(c) = multinomial(r; c) * prod_x m[x]^c_x over compositions of r.

    Ordered like _composition_levels(q, r)[0][r].
    """
    m = np.asarray(m, dtype=float)
    q = m.shape[0]
    levels, push = _composition_levels(q, r)
    dp = np.ones(1)
    for t in range(r):
        nxt = np.zeros(len(levels[t + 1]))
        for x in range(q):
            np.add.at(nxt, push[t][:, x], dp * m[x])
        dp = nxt
    return dp


class FactorTable:
    """Dense nonnegative function on X^r.

    Immutable after construction.  `perm_invariant` is verified exhaustively
    when the table is small enough, by sampling otherwise (the caller must
    declare invariance for tables too large to check exhaustively).
    """

    def __init__(self, arity, alphabet, values, perm_invariant=None,
                 max_entries=MAX_TABLE_ENTRIES, _trusted=False):
        if arity < 1:
            raise ValueError("arity must be >= 1")
        q = alphabet.q
        size = q ** arity
        if size > max_entries:
            raise BudgetExceeded(
                f"dense table with q={q}, r={arity} needs {size} entries "
                f"(cap {max_entries})")
        vals = np.asarray(values, dtype=float).reshape((q,) * arity)
        if not _trusted:
            if not np.all(np.isfinite(vals)):
                raise ValueError("factor values must be finite")
            if np.any(vals < 0):
                raise ValueError("factor values must be nonnegative")
            if not np.any(vals > 0):
                raise ValueError("factor table must have at least one positive entry")
        vals = np.ascontiguousarray(vals)
        vals.setflags(write=False)
        self.arity = int(arity)
        self.alphabet = alphabet
        self.values = vals
        self._type_cache = None
        self._counts_cache = None
        if perm_invariant is None:
            if size <= PERM_CHECK_LIMIT:
                perm_invariant = self._detect_perm_invariance()
            else:
                raise ValueError(
                    "table too large for exhaustive permutation check; "
                    "pass perm_invariant explicitly")
        elif perm_invariant and not _trusted:
            if size <= PERM_CHECK_LIMIT:
                if not self._detect_perm_invariance():
                    raise ValueError("table is not permutation invariant as declared")
            else:
                self._spot_check_perm_invariance()
        self.perm_invariant = bool(perm_invariant)

    # -- basic quantities -----------------------------------------------------

    @property
    def q(self):
        return self.alphabet.q

    @property
    def size(self):
        return self.values.size

    @property
    def total(self):
        """Sum of all entries (the satisfying-count N_f for 0/1 tables)."""
        return float(self.values.sum())

    def value_at(self, idx_tuple):
        return float(self.values[tuple(idx_tuple)])

    def socket_marginals(self):
        """S_x = sum over branches i of the marginal of the table onto slot i."""
        r = self.arity
        s = np.zeros(self.q)
        for i in range(r):
            axes = tuple(j for j in range(r) if j != i)
            s += self.values.sum(axis=axes) if axes else self.values
        return s

    def has_constant_socket_marginals(self, rtol=1e-9):
        s = self.socket_marginals()
        return bool(np.max(np.abs(s - s[0])) <= rtol * max(1.0, abs(float(s[0]))))

    # -- permutation-invariance machinery -------------------------------------

    def _symbol_counts(self):
        """Per-entry symbol count vectors, shape (q^r, q), int16; cached."""
        if self._counts_cache is None:
            q, r = self.q, self.arity
            idx = np.arange(q ** r, dtype=np.int64)
            counts = np.zeros((q ** r, q), dtype=np.int16)
            for pos in range(r):
                digit = (idx // (q ** (r - 1 - pos))) % q
                for x in range(q):
                    counts[:, x] += (digit == x)
            self._counts_cache = counts
        return self._counts_cache

    def _detect_perm_invariance(self):
        counts = self._symbol_counts()
        key = counts.astype(np.int64) @ ((self.arity + 1) ** np.arange(self.q))
        flat = self.values.reshape(-1)
        order = np.argsort(key, kind="stable")
        sk, sv = key[order], flat[order]
        boundaries = np.flatnonzero(np.diff(sk)) + 1
        groups = np.split(sv, boundaries)
        return all(g.max() - g.min() == 0 for g in groups)

    def _spot_check_perm_invariance(self):
        rng = np.random.default_rng(0)
        q, r = self.q, self.arity
        for _ in range(_PERM_SPOT_CHECKS):
            t = tuple(rng.integers(0, q, size=r))
            p = tuple(rng.permutation(list(t)))
            if self.values[t] != self.values[p]:
                raise ValueError("declared perm_invariant but a sampled permutation differs")

    def type_data(self):
        """(comps, type_values, multinoms, type_id) for perm-invariant tables.

        comps: ordered compositions of r into q parts,
        type_values[k]: table value on any tuple of type comps[k],
        multinoms[k]: number of tuples of that type,
        type_id: flat-index -> type index (int32).
        """
        if not self.perm_invariant:
            raise ValueError("type_data requires a permutation-invariant table")
        if self._type_cache is None:
            q, r = self.q, self.arity
            levels, _ = _composition_levels(q, r)
            comps = levels[r]
            radix = (r + 1) ** np.arange(q, dtype=np.int64)
            comp_keys = np.array([np.dot(c, radix) for c in comps], dtype=np.int64)
            key_order = np.argsort(comp_keys)
            counts = self._symbol_counts()
            entry_keys = counts.astype(np.int64) @ radix
            type_id = key_order[np.searchsorted(comp_keys[key_order], entry_keys)]
            type_id = type_id.astype(np.int32)
            flat = self.values.reshape(-1)
            type_values = np.zeros(len(comps))
            type_values[type_id] = flat
            multinoms = np.array([multinomial(r, c) for c in comps], dtype=float)
            self._type_cache = (comps, type_values, multinoms, type_id)
        return self._type_cache

    # -- derived tables --------------------------------------------------------

    def restrict(self, support):
        """Sub-table on a subset of symbols (at least two), same arity."""
        support = sorted(int(i) for i in support)
        if len(support) < 2:
            raise ValueError("restriction needs at least two symbols")
        sub_alpha = Alphabet(tuple(self.alphabet.labels[i] for i in support))
        sl = np.ix_(*([support] * self.arity))
        return FactorTable(self.arity, sub_alpha, self.values[sl],
                           perm_invariant=self.perm_invariant, _trusted=True)


def build_factor_table(arity, alphabet, entries, perm_invariant=None,
                       max_entries=MAX_TABLE_ENTRIES):
    """Dense table from a sparse {index-tuple: value} mapping; missing entries are 0."""
    q = alphabet.q
    values = np.zeros((q,) * arity)
    for key, val in entries.items():
        key = (key,) if isinstance(key, int) else tuple(key)
        if len(key) != arity:
            raise ValueError(f"entry {key} does not have arity {arity}")
        if any(not (0 <= k < q) for k in key):
            raise ValueError(f"entry {key} outside alphabet of size {q}")
        if val < 0:
            raise ValueError("factor values must be nonnegative")
        values[key] = val
    return FactorTable(arity, alphabet, values, perm_invariant=perm_invariant,
                       max_entries=max_entries)


def _table_from_weight_profile(r, profile, max_entries=MAX_TABLE_ENTRIES):
    """Binary perm-invariant table whose value depends only on the number of 1s."""
    profile = np.asarray(profile, dtype=float)
    if profile.shape != (r + 1,):
        raise ValueError("weight profile must have length r+1")
    size = 2 ** r
    if size > max_entries:
        raise BudgetExceeded(f"dense table with 2^{r} entries exceeds cap {max_entries}")
    idx = np.arange(size, dtype=np.int64)
    weight = np.zeros(size, dtype=np.int64)
    for pos in range(r):
        weight += (idx >> pos) & 1
    return FactorTable(r, BINARY, profile[weight], perm_invariant=True, _trusted=True)


def all_ones_factor(r, alphabet=BINARY):
    """The trivial interaction f == 1."""
    return FactorTable(r, alphabet, np.ones((alphabet.q,) * r),
                       perm_invariant=True, _trusted=True)


def not_equal_factor(alphabet=BINARY):
    """Arity-2 proper-coloring interaction: 1 iff the two symbols differ."""
    q = alphabet.q
    return FactorTable(2, alphabet, 1.0 - np.eye(q), perm_invariant=True, _trusted=True)


def equality_factor(alphabet=BINARY):
    """Arity-2 interaction: 1 iff the two symbols agree."""
    return FactorTable(2, alphabet, np.eye(alphabet.q), perm_invariant=True,
                       _trusted=True)


def parity_check_factor(r, alphabet=BINARY):
    """Binary even-parity constraint: 1 iff the number of 1s is even."""
    if alphabet.q != 2:
        raise ValueError("parity check factor requires a binary alphabet")
    profile = np.array([1.0 if w % 2 == 0 else 0.0 for w in range(r + 1)])
    return _table_from_weight_profile(r, profile)


def binary_csp_factor(r, k):
    """Near-balanced-assignment exclusion: 0 iff r/2-k < weight < r/2+k, else 1."""
    if r % 2 != 0:
        raise ValueError("r must be even")
    if not (1 <= k <= r // 2):
        raise ValueError("k must satisfy 1 <= k <= r/2")
    lo, hi = r // 2 - k, r // 2 + k
    profile = np.array([0.0 if lo < w < hi else 1.0 for w in range(r + 1)])
    return _table_from_weight_profile(r, profile)


def replicate_factor(factor, n, max_entries=MAX_TABLE_ENTRIES):
    """n-fold replica table on the product alphabet X^n.

    The value at an r-tuple of n-symbol blocks is the product of the base
    values of the n per-replica r-tuples.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        return factor
    q, r = factor.q, factor.arity
    if (q ** n) ** r > max_entries:
        raise BudgetExceeded(
            f"replicated table needs {(q ** n) ** r} entries (cap {max_entries}); reduce n")
    labels = tuple("|".join(combo)
                   for combo in itertools.product(factor.alphabet.labels, repeat=n))
    alpha = Alphabet(labels)
    # axes of the replicated tensor: r blocks of n base axes; replica i uses
    # axis i of every block
    big = np.ones((q,) * (n * r))
    for i in range(n):
        shape = [1] * (n * r)
        for j in range(r):
            shape[j * n + i] = q
        big = big * factor.values.reshape(shape)
    big = big.reshape(((q ** n),) * r)
    return FactorTable(r, alpha, big, perm_invariant=factor.perm_invariant,
                       max_entries=max_entries, _trusted=True)


# -- text serialization -------------------------------------------------------

def save_factor_table(factor, path):
    """Write `arity q` header plus one `symbols... value` line per nonzero entry."""
    lines = [f"{factor.arity} {factor.q}"]
    labels = factor.alphabet.labels
    for idx in itertools.product(range(factor.q), repeat=factor.arity):
        v = float(factor.values[idx])
        if v != 0.0:
            lines.append(" ".join(labels[i] for i in idx) + f" {v!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_factor_table(path, alphabet=None, perm_invariant=None):
    """Inverse of save_factor_table.

    Without an explicit alphabet the labels "0".."q-1" are assumed.
    """
    with open(path) as fh:
        raw = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not raw:
        raise ValueError("empty factor file")
    head = raw[0].split()
    if len(head) != 2:
        raise ValueError("factor file header must be 'arity q'")
    arity, q = int(head[0]), int(head[1])
    if alphabet is None:
        alphabet = default_alphabet(q)
    if alphabet.q != q:
        raise ValueError("alphabet size does not match file header")
    entries = {}
    for ln in raw[1:]:
        parts = ln.split()
        if len(parts) != arity + 1:
            raise ValueError(f"bad factor line: {ln!r}")
        idx = tuple(alphabet.index(s) for s in parts[:arity])
        entries[idx] = float(parts[arity])
    return build_factor_table(arity, alphabet, entries, perm_invariant=perm_invariant)
