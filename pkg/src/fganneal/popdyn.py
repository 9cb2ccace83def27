"""Replica-symmetric free energy by population dynamics.

Two populations of normalized message vectors represent the distributional
fixed point: P-members play the variable-to-factor role, Phat-members the
factor-to-variable role.  A sweep replaces members in place at uniformly
chosen victim positions (sequential, so runs are reproducible given a seed).
The free energy is a Monte-Carlo average of three log-partition brackets.

Binary permutation-invariant interactions use an O(r^2) weight-convolution
for the factor-side update; other interactions fall back to dense tensor
contraction and are only practical for small q^r.
"""

import math
from dataclasses import dataclass

import numpy as np

from .bp import MessagePair, SolveOptions, solve_regular
from .errors import DegenerateMessage
from .free_energy import annealed_regular

_MAX_RESAMPLE = 100
_DENSE_CAP = 65_536


@dataclass
class PdOptions:
    population: int = 10_000
    sweeps: int = 1_000
    samples: int = 100_000
    rng_seed: int = 0

    def __post_init__(self):
        if self.population < 100:
            raise ValueError("population must be at least 100")
        if self.sweeps < 0 or self.samples < 1:
            raise ValueError("sweeps and samples must be positive")


@dataclass
class RsReport:
    value: float
    stderr: float
    term_means: tuple
    term_stderrs: tuple
    sweeps: int
    drift: float
    split_half_gap: float
    equilibrated: bool
    resamples: int
    init: str


@dataclass
class RsEqualityCheck:
    annealed: float
    rs_value: float
    stderr: float
    difference: float
    within_tolerance: bool
    rs_report: RsReport


def _weight_profile(factor):
    """Value per number-of-ones for binary perm-invariant tables, else None."""
    if factor.q != 2 or not factor.perm_invariant:
        return None
    comps, type_values, _, _ = factor.type_data()
    r = factor.arity
    prof = np.empty(r + 1)
    for i, c in enumerate(comps):
        prof[c[1]] = type_values[i]
    return prof


def _ones_weight_distribution(p_ones):
    """Distribution of the number of ones among independent binary draws.

    p_ones: (..., r) success probabilities; returns (..., r+1).
    """
    p = np.asarray(p_ones, dtype=float)
    lead = p.shape[:-1]
    r = p.shape[-1]
    dist = np.zeros(lead + (r + 1,))
    dist[..., 0] = 1.0
    for j in range(r):
        pj = p[..., j][..., None]
        new = np.zeros_like(dist)
        new[..., : j + 1] += dist[..., : j + 1] * (1 - pj)
        new[..., 1: j + 2] += dist[..., : j + 1] * pj
        dist = new
    return dist


def _branch_value_distinct(factor, msgs, branch):
    """Branch marginalization of the table against distinct slot messages.

    msgs: (r-1, q) companion messages in slot order (slot `branch` removed).
    """
    prof = _weight_profile(factor)
    if prof is not None:
        dist = _ones_weight_distribution(msgs[:, 1])
        return np.array([dist @ prof[:-1], dist @ prof[1:]])
    if factor.values.size > _DENSE_CAP:
        raise ValueError("dense population update too large; "
                         "need a binary permutation-invariant interaction")
    t = np.moveaxis(factor.values, branch, -1)
    for j in range(factor.arity - 1):
        t = np.tensordot(msgs[j], t, axes=(0, 0))
    return t


def de_step(pop_p, pop_phat, factor, l, r, rng):
    """One in-place sweep of both populations.

    Returns (resamples, drift): the number of degenerate draws that were
    rejected and the mean L-infinity change of replaced members.
    """
    s = pop_p.shape[0]
    resamples = 0
    drift = 0.0
    for _ in range(s):
        for attempt in range(_MAX_RESAMPLE + 1):
            picks = rng.integers(0, s, size=max(l - 1, 0))
            new = np.prod(pop_phat[picks], axis=0) if picks.size else np.ones(factor.q)
            tot = new.sum()
            if tot > 0:
                break
            resamples += 1
        else:
            raise DegenerateMessage("population product update kept vanishing")
        new = new / tot
        victim = int(rng.integers(0, s))
        drift += float(np.max(np.abs(new - pop_p[victim])))
        pop_p[victim] = new
    for _ in range(s):
        for attempt in range(_MAX_RESAMPLE + 1):
            picks = rng.integers(0, s, size=r - 1)
            branch = int(rng.integers(0, r))
            new = _branch_value_distinct(factor, pop_p[picks], branch)
            tot = new.sum()
            if tot > 0:
                break
            resamples += 1
        else:
            raise DegenerateMessage("population branch update kept vanishing")
        new = new / tot
        victim = int(rng.integers(0, s))
        drift += float(np.max(np.abs(new - pop_phat[victim])))
        pop_phat[victim] = new
    return resamples, drift / (2 * s)


def _init_populations(spec, opts, init, init_messages, rng):
    q = spec.factor.q
    s = opts.population
    if init == "random":
        p = rng.dirichlet(np.ones(q), size=s)
        phat = rng.dirichlet(np.ones(q), size=s)
    elif init == "uniform":
        p = np.full((s, q), 1.0 / q)
        phat = np.full((s, q), 1.0 / q)
    elif init == "delta":
        if init_messages is None:
            raise ValueError("delta init needs init_messages")
        p = np.tile(init_messages.m_vf, (s, 1))
        phat = np.tile(init_messages.m_fv, (s, 1))
    else:
        raise ValueError(f"unknown init {init!r}")
    return p, phat


def _sample_log_zv(pop_phat, l, n, rng):
    s = pop_phat.shape[0]
    out = np.empty(n)
    done = 0
    while done < n:
        b = min(65_536, n - done)
        idx = rng.integers(0, s, size=(b, l))
        zv = np.prod(pop_phat[idx], axis=1).sum(axis=1)
        good = zv > 0
        k = int(good.sum())
        out[done:done + k] = np.log(zv[good])
        done += k
    return out


def _sample_log_zf(pop_p, factor, r, n, rng):
    s = pop_p.shape[0]
    prof = _weight_profile(factor)
    out = np.empty(n)
    done = 0
    while done < n:
        b = min(16_384, n - done)
        idx = rng.integers(0, s, size=(b, r))
        if prof is not None:
            dist = _ones_weight_distribution(pop_p[idx][:, :, 1])
            zf = dist @ prof
        else:
            if factor.values.size > _DENSE_CAP:
                raise ValueError("dense sampling too large; need a binary "
                                 "permutation-invariant interaction")
            t = np.broadcast_to(factor.values, (b,) + factor.values.shape)
            for j in range(r):
                mj = pop_p[idx[:, j]]
                t = np.einsum("na,na...->n...", mj, t)
            zf = t
        good = zf > 0
        k = int(good.sum())
        out[done:done + k] = np.log(zf[good])
        done += k
    return out


def _sample_log_zfv(pop_p, pop_phat, n, rng):
    s = pop_p.shape[0]
    out = np.empty(n)
    done = 0
    while done < n:
        b = min(65_536, n - done)
        zfv = np.sum(pop_p[rng.integers(0, s, size=b)]
                     * pop_phat[rng.integers(0, s, size=b)], axis=1)
        good = zfv > 0
        k = int(good.sum())
        out[done:done + k] = np.log(zfv[good])
        done += k
    return out


def rs_free_energy(spec, opts=None, init="random", init_messages=None):
    """Replica-symmetric exponent (l/r)<log Z_f> + <log Z_v> - l <log Z_fv>.

    Runs opts.sweeps population sweeps, then Monte-Carlo estimates the three
    brackets with opts.samples draws each (l i.i.d. Phat-members for Z_v, r
    i.i.d. P-members for Z_f, one of each for Z_fv).  Equilibration is flagged
    by a split-half comparison of the assembled estimate against twice its
    standard error.
    """
    opts = opts or PdOptions()
    l, r = spec.l, spec.r
    rng = np.random.default_rng(opts.rng_seed)
    pop_p, pop_phat = _init_populations(spec, opts, init, init_messages, rng)
    resamples = 0
    drift = math.nan
    for _ in range(opts.sweeps):
        res, drift = de_step(pop_p, pop_phat, spec.factor, l, r, rng)
        resamples += res
    n = opts.samples
    log_zv = _sample_log_zv(pop_phat, l, n, rng)
    log_zf = _sample_log_zf(pop_p, spec.factor, r, n, rng)
    log_zfv = _sample_log_zfv(pop_p, pop_phat, n, rng)
    coeffs = (l / r, 1.0, -l)
    terms = (log_zf, log_zv, log_zfv)
    value = sum(c * t.mean() for c, t in zip(coeffs, terms))
    variances = [t.var(ddof=1) / n for t in terms]
    stderr = math.sqrt(sum(c * c * v for c, v in zip(coeffs, variances)))
    half = n // 2
    first = sum(c * t[:half].mean() for c, t in zip(coeffs, terms))
    second = sum(c * t[half:].mean() for c, t in zip(coeffs, terms))
    gap = abs(first - second)
    return RsReport(
        value=float(value),
        stderr=float(stderr),
        term_means=tuple(float(t.mean()) for t in terms),
        term_stderrs=tuple(float(math.sqrt(v)) for v in variances),
        sweeps=opts.sweeps,
        drift=float(drift),
        split_half_gap=float(gap),
        equilibrated=bool(gap <= 2.0 * stderr + 1e-12),
        resamples=resamples,
        init=init,
    )


def check_annealed_rs_equality(spec, opts=None, solve_opts=None):
    """Delta-initialized RS estimate against the annealed exponent.

    Requires a permutation-invariant interaction (delta populations at an
    unconstrained stationary point are then sweep-invariant).  The tolerance
    is 3 standard errors plus a tiny absolute guard for the deterministic
    delta-population limit where the standard error collapses to zero.
    """
    if not spec.factor.perm_invariant:
        raise ValueError("equality check requires a permutation-invariant interaction")
    opts = opts or PdOptions()
    solve_opts = solve_opts or SolveOptions()
    mp, rep = solve_regular(spec, solve_opts)
    if not rep.converged or mp is None:
        raise DegenerateMessage("no converged unconstrained fixed point to anchor on")
    annealed, _ = annealed_regular(spec, opts=solve_opts)
    rs = rs_free_energy(spec, opts, init="delta", init_messages=mp)
    diff = abs(rs.value - annealed)
    within = diff <= 3.0 * rs.stderr + 1e-10
    return RsEqualityCheck(annealed=float(annealed), rs_value=rs.value,
                           stderr=rs.stderr, difference=float(diff),
                           within_tolerance=bool(within), rs_report=rs)


def rs_fixed_points(spec, opts=None, solve_opts=None):
    """RS estimates from the standard initialization library, best first.

    Returns a list of RsReport from uniform-delta, annealed-delta (when an
    unconstrained fixed point converges) and random initializations; callers
    take the max and can flag multiplicity when estimates disagree.
    """
    opts = opts or PdOptions()
    solve_opts = solve_opts or SolveOptions()
    q = spec.factor.q
    uniform = MessagePair(np.full(q, 1.0 / q), np.full(q, 1.0 / q))
    runs = [("uniform-delta", "delta", uniform)]
    mp, rep = solve_regular(spec, solve_opts)
    if rep.converged and mp is not None:
        runs.append(("annealed-delta", "delta", mp))
    runs.append(("random", "random", None))
    reports = []
    for name, kind, anchor in runs:
        rs = rs_free_energy(spec, opts, init=kind, init_messages=anchor)
        reports.append(RsReport(**{**rs.__dict__, "init": name}))
    reports.sort(key=lambda rep_: rep_.value, reverse=True)
    return reports
