"""Single-edge message updates and fixed-point solvers.

All solvers work on ensemble-averaged single-edge quantities: one variable-to
-factor message and one factor-to-variable message on the alphabet, plus the
extra scalars needed by the Poisson and irregular variants.  Messages are kept
normalized after every update; arithmetic that risks underflow (powers m^(l-1)
for large l) runs in the log domain with max subtraction.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMessage, SolverAbort
from .factors import count_product_weights, _composition_levels

_NORM_TOL = 1e-12
_POISSON_RATE_CAP = 1e6


def normalize(vec):
    """Scale to sum 1; raises DegenerateMessage on all-zero or non-finite input."""
    v = np.asarray(vec, dtype=float)
    s = v.sum()
    if not np.isfinite(s) or s <= 0.0 or np.any(v < 0):
        raise DegenerateMessage(f"cannot normalize message {v!r}")
    return v / s


def normalize_log(logvec):
    """Normalized exp(logvec) computed with max subtraction."""
    lv = np.asarray(logvec, dtype=float)
    m = np.max(lv)
    if not np.isfinite(m):
        raise DegenerateMessage("log-domain message has no finite entry")
    return normalize(np.exp(lv - m))


def random_simplex_point(rng, q):
    return rng.dirichlet(np.ones(q))


@dataclass
class MessagePair:
    """Variable-to-factor and factor-to-variable messages on the alphabet."""

    m_vf: np.ndarray
    m_fv: np.ndarray

    def __post_init__(self):
        self.m_vf = np.asarray(self.m_vf, dtype=float)
        self.m_fv = np.asarray(self.m_fv, dtype=float)
        for m in (self.m_vf, self.m_fv):
            if np.any(m < 0) or abs(m.sum() - 1.0) > _NORM_TOL:
                raise ValueError("messages must be normalized probability vectors")

    def copy(self):
        return MessagePair(self.m_vf.copy(), self.m_fv.copy())


def uniform_messages(q):
    u = np.full(q, 1.0 / q)
    return MessagePair(u.copy(), u.copy())


@dataclass
class SolveOptions:
    """Iteration controls shared by every solver."""

    tol: float = 1e-10
    max_iters: int = 10_000
    damping: float = 0.0
    restarts: int = 8
    rng_seed: int = 0

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if not (0.0 <= self.damping < 1.0):
            raise ValueError("damping must be in [0, 1)")


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    residual: float
    objective: float = math.nan
    restart_index: int = -1
    provenance: str = ""
    failure: str | None = None


# -- elementary updates --------------------------------------------------------

def _branch_sum_perm(factor, m):
    """Single-branch sum over the r-1 companion slots (perm-invariant tables)."""
    q, r = factor.q, factor.arity
    _, type_values, _, _ = factor.type_data()
    # push[r-1][i, x] is the type index of (companion composition i) + e_x
    _, push = _composition_levels(q, r)
    w = count_product_weights(m, r - 1)
    bump = push[r - 1]
    out = np.empty(q)
    for x in range(q):
        out[x] = w @ type_values[bump[:, x]]
    return out


def _branch_sums_dense(factor, m):
    """Sum over every branch i of the table contracted against m on slots != i."""
    r = factor.arity
    total = np.zeros(factor.q)
    for i in range(r):
        t = np.moveaxis(factor.values, i, -1)
        for _ in range(r - 1):
            t = np.tensordot(m, t, axes=(0, 0))
        total += t
    return total


def branch_sums(factor, m):
    """Unnormalized factor-to-variable numerator.

    For permutation-invariant tables this is the single-branch form (the full
    branch sum is r times it, which normalization absorbs).
    """
    m = np.asarray(m, dtype=float)
    if factor.perm_invariant:
        return _branch_sum_perm(factor, m)
    return _branch_sums_dense(factor, m)


def update_f_to_v(factor, m_vf):
    """Factor-to-variable update: marginalize the table against the companions."""
    return normalize(branch_sums(factor, m_vf))


def update_v_to_f_regular(m_fv, l):
    """Variable-to-factor update m_vf proportional to m_fv^(l-1), log domain."""
    with np.errstate(divide="ignore"):
        return normalize_log((l - 1) * np.log(np.asarray(m_fv, dtype=float)))


def update_v_to_f_fixed_type(nu, m_fv):
    """Fixed-variable-type update m_vf proportional to nu / m_fv, log domain."""
    nu = np.asarray(nu, dtype=float)
    m_fv = np.asarray(m_fv, dtype=float)
    if np.any((nu > 0) & (m_fv <= 0)):
        raise DegenerateMessage("m_fv vanishes on the support of nu")
    out = np.full_like(nu, -np.inf)
    pos = nu > 0
    out[pos] = np.log(nu[pos]) - np.log(m_fv[pos])
    return normalize_log(out)


def update_v_to_f_field(h, m_fv, l):
    """Field-weighted variable-to-factor update: m_vf ~ h * m_fv^(l-1)."""
    hw = h.array if hasattr(h, "array") else np.asarray(h, dtype=float)
    with np.errstate(divide="ignore"):
        return normalize_log(np.log(hw) + (l - 1) * np.log(np.asarray(m_fv, dtype=float)))


def factor_partition(factor, m_vf):
    """Z_f = sum over tuples of f(x) * prod_i m_vf(x_i)."""
    m = np.asarray(m_vf, dtype=float)
    if factor.perm_invariant:
        _, type_values, _, _ = factor.type_data()
        w = count_product_weights(m, factor.arity)
        return float(w @ type_values)
    t = factor.values
    for _ in range(factor.arity):
        t = np.tensordot(m, t, axes=(0, 0))
    return float(t)


# -- generic damped iteration ----------------------------------------------------

def _damp(new, old, gamma):
    return new if gamma == 0.0 or old is None else (1 - gamma) * new + gamma * old


def _iterate(step, m_fv0, opts):
    """Run `step` (m_vf, m_fv) -> (m_vf, m_fv) until the L-inf residual drops.

    Returns (m_vf, m_fv, iterations, residual, converged).
    """
    gamma = opts.damping
    m_fv = np.asarray(m_fv0, dtype=float)
    m_vf = None
    residual = math.inf
    for it in range(1, opts.max_iters + 1):
        new_vf, new_fv = step(m_vf, m_fv)
        new_vf = _damp(new_vf, m_vf, gamma)
        new_fv = _damp(new_fv, m_fv, gamma)
        if m_vf is not None:
            residual = max(np.max(np.abs(new_vf - m_vf)),
                           np.max(np.abs(new_fv - m_fv)))
        m_vf, m_fv = new_vf, new_fv
        if residual <= opts.tol:
            return m_vf, m_fv, it, residual, True
    return m_vf, m_fv, opts.max_iters, residual, False


def _starts(opts, q, init=None, include_uniform=True):
    """Initial m_fv schedule: optional explicit init, uniform, seeded randoms."""
    rng = np.random.default_rng(opts.rng_seed)
    starts = []
    if init is not None:
        starts.append(("init", np.asarray(init.m_fv, dtype=float)))
    if include_uniform:
        starts.append(("uniform", np.full(q, 1.0 / q)))
    for i in range(opts.restarts):
        starts.append((f"random-{i}", random_simplex_point(rng, q)))
    if not starts:
        starts.append(("random-0", random_simplex_point(rng, q)))
    return starts


def _safe_objective(objective, mp):
    try:
        return objective(mp)
    except (DegenerateMessage, ValueError, ZeroDivisionError,
            FloatingPointError, OverflowError):
        return -math.inf


def _run_restarts(step_factory, objective, opts, q, init=None,
                  include_uniform=True, stop_on_init=True):
    """Shared restart loop: keep the converged point with the best objective."""
    best = None          # (objective, mp, report)
    best_failed = None   # (residual, mp, report)
    for idx, (tag, m_fv0) in enumerate(_starts(opts, q, init, include_uniform)):
        try:
            m_vf, m_fv, iters, res, ok = _iterate(step_factory(), m_fv0, opts)
            mp = MessagePair(normalize(m_vf), normalize(m_fv))
        except DegenerateMessage as exc:
            rep = SolveReport(False, 0, math.inf, restart_index=idx,
                              provenance=tag, failure=str(exc))
            if best_failed is None:
                best_failed = (math.inf, None, rep)
            continue
        if ok:
            obj = _safe_objective(objective, mp)
            rep = SolveReport(True, iters, res, objective=obj,
                              restart_index=idx, provenance=tag)
            if best is None or obj > best[0]:
                best = (obj, mp, rep)
            if tag == "init" and stop_on_init:
                return mp, rep
        else:
            rep = SolveReport(False, iters, res,
                              objective=_safe_objective(objective, mp),
                              restart_index=idx, provenance=tag)
            if best_failed is None or res < best_failed[0]:
                best_failed = (res, mp, rep)
    if best is not None:
        return best[1], best[2]
    if best_failed is not None and best_failed[1] is not None:
        return best_failed[1], best_failed[2]
    # every start died with a degenerate message
    return None, best_failed[2]


# -- solvers --------------------------------------------------------------------

def solve_regular(spec, opts=None, init=None):
    """Fixed point of the unconstrained (l, r)-regular message equations.

    Runs from `init` if given (returning it directly when it converges), then
    from the uniform point plus seeded random restarts, and keeps the converged
    point with the largest saddle objective.
    """
    from .free_energy import annealed_regular_at
    opts = opts or SolveOptions()
    f, l = spec.factor, spec.l

    def step_factory():
        def step(m_vf, m_fv):
            new_vf = update_v_to_f_regular(m_fv, l)
            new_fv = update_f_to_v(f, new_vf)
            return new_vf, new_fv
        return step

    return _run_restarts(step_factory, lambda mp: annealed_regular_at(mp, spec),
                         opts, f.q, init=init)


def solve_fixed_type(spec, nu, opts=None, init=None):
    """Fixed point of the fixed-variable-type iteration at type nu.

    The variable degree never enters the iteration; it only weighs the
    objective.  Default starts are seeded random points (the uniform point is
    excluded because it is an exact fixed point of this iteration whenever the
    socket marginals are constant, which would mask instability).
    Non-convergence is a legitimate reported outcome.
    """
    from .free_energy import growth_rate_fixed_type
    opts = opts or SolveOptions()
    f = spec.factor
    nu = np.asarray(nu, dtype=float)

    def step_factory():
        def step(m_vf, m_fv):
            new_vf = update_v_to_f_fixed_type(nu, m_fv)
            new_fv = update_f_to_v(f, new_vf)
            return new_vf, new_fv
        return step

    return _run_restarts(step_factory,
                         lambda mp: growth_rate_fixed_type(spec, nu, mp),
                         opts, f.q, init=init, include_uniform=False)


def solve_field(spec, h, opts=None, init=None):
    """Fixed point of the field-weighted regular equations."""
    from .free_energy import annealed_field_at
    opts = opts or SolveOptions()
    f, l = spec.factor, spec.l

    def step_factory():
        def step(m_vf, m_fv):
            new_vf = update_v_to_f_field(h, m_fv, l)
            new_fv = update_f_to_v(f, new_vf)
            return new_vf, new_fv
        return step

    return _run_restarts(step_factory, lambda mp: annealed_field_at(mp, spec, h),
                         opts, f.q, init=init)


def solve_random_field(spec, rf, opts=None, init=None):
    """Fixed point of the mixture-field equations.

    The per-field weight g(h) = P(h)/Z_v(h) is eliminated, leaving an update
    m_vf ~ sum_h P(h) * h * m_fv^(l-1) / Z_v(h) with Z_v(h) = sum_x h(x) m_fv(x)^l.
    """
    from .free_energy import annealed_random_field_at
    opts = opts or SolveOptions()
    f, l = spec.factor, spec.l
    fields = [np.asarray(fs.array, dtype=float) for fs in rf.fields]
    probs = np.asarray(rf.probs, dtype=float)

    def mixture_v_update(m_fv):
        with np.errstate(divide="ignore"):
            log_fv = np.log(np.asarray(m_fv, dtype=float))
        acc = np.zeros(f.q)
        for hw, p in zip(fields, probs):
            if p == 0.0:
                continue
            with np.errstate(divide="ignore"):
                log_t = np.log(hw) + (l - 1) * log_fv
                log_zh = _logsumexp(np.log(hw) + l * log_fv)
            acc += p * np.exp(log_t - log_zh)
        return normalize(acc)

    def step_factory():
        def step(m_vf, m_fv):
            new_vf = mixture_v_update(m_fv)
            new_fv = update_f_to_v(f, new_vf)
            return new_vf, new_fv
        return step

    return _run_restarts(step_factory,
                         lambda mp: annealed_random_field_at(mp, spec, rf),
                         opts, f.q, init=init)


@dataclass
class PoissonState:
    """Messages plus the mean variable degree e of the Poisson ensemble."""

    messages: MessagePair
    e: float

    def __post_init__(self):
        if self.e <= 0:
            raise ValueError("mean degree e must be positive")


def solve_poisson(spec, opts=None):
    """Fixed point of the Poisson-ensemble equations.

    Iterates the branch update for m_fv, the exponential-tilt update
    m_vf ~ exp(e * m_fv), and the coupling identity e = alpha*k / sum_x
    m_vf(x) m_fv(x) (exact at any point where m_fv is the branch update of
    m_vf, so the coupling term of the objective equals alpha*k at fixed
    points).  Aborts if e exceeds 1e6.
    """
    from .free_energy import annealed_poisson_at
    opts = opts or SolveOptions()
    f, alpha, k = spec.factor, spec.alpha, spec.k
    q = f.q
    target = alpha * k

    best = None
    best_failed = None
    for idx, (tag, m_fv0) in enumerate(_starts(opts, q)):
        m_fv = np.asarray(m_fv0, dtype=float)
        m_vf = np.full(q, 1.0 / q)
        e = target * q
        residual = math.inf
        ok = False
        it = 0
        try:
            for it in range(1, opts.max_iters + 1):
                new_fv = update_f_to_v(f, m_vf)
                new_fv = _damp(new_fv, m_fv, opts.damping)
                e_new = target / float(np.dot(m_vf, new_fv))
                if not np.isfinite(e_new) or e_new > _POISSON_RATE_CAP:
                    raise SolverAbort(
                        f"Poisson mean degree diverged (e={e_new:.3g} > {_POISSON_RATE_CAP:g})")
                new_vf = normalize_log(e_new * new_fv)
                new_vf = _damp(new_vf, m_vf, opts.damping)
                residual = max(np.max(np.abs(new_vf - m_vf)),
                               np.max(np.abs(new_fv - m_fv)),
                               abs(e_new - e) / max(1.0, abs(e)))
                m_vf, m_fv, e = new_vf, new_fv, e_new
                if residual <= opts.tol:
                    ok = True
                    break
        except DegenerateMessage as exc:
            rep = SolveReport(False, it, math.inf, restart_index=idx,
                              provenance=tag, failure=str(exc))
            if best_failed is None:
                best_failed = (math.inf, None, rep)
            continue
        state = PoissonState(MessagePair(m_vf, m_fv), e)
        obj = _safe_objective(lambda _: annealed_poisson_at(state, spec), None)
        rep = SolveReport(ok, it, residual, objective=obj,
                          restart_index=idx, provenance=tag)
        if ok:
            if best is None or obj > best[0]:
                best = (obj, state, rep)
        elif best_failed is None or residual < best_failed[0]:
            best_failed = (residual, state, rep)
    if best is not None:
        return best[1], best[2]
    if best_failed is not None and best_failed[1] is not None:
        return best_failed[1], best_failed[2]
    return None, best_failed[2]


@dataclass
class IrregularState:
    """Messages plus the edge-perspective degree weights of the stationarity system."""

    messages: MessagePair
    l_w: dict
    r_w: dict


def solve_irregular(spec, opts=None, init=None):
    """Fixed point of the irregular-ensemble equations.

    The auxiliary degree weights satisfy l(i) ~ L_i / Z_v(i) and
    r(j) ~ R_j / Z_f(j); messages follow the degree-mixed updates.  With
    degenerate degree distributions the trajectory coincides with
    solve_regular from the same start.
    """
    from .free_energy import annealed_irregular_at
    opts = opts or SolveOptions()
    L = spec.variable_degrees
    R = spec.check_degrees
    factors = spec.factors
    q = spec.alphabet.q
    v_degs = sorted(L)
    c_degs = sorted(R)

    def degree_weights(m_vf, m_fv):
        zv = {i: float(np.sum(m_fv ** i)) for i in v_degs}
        zf = {j: factor_partition(factors[j], m_vf) for j in c_degs}
        lw = normalize(np.array([L[i] / zv[i] for i in v_degs]))
        rw = normalize(np.array([R[j] / zf[j] for j in c_degs]))
        return dict(zip(v_degs, lw)), dict(zip(c_degs, rw))

    def step_factory():
        def step(m_vf, m_fv):
            if m_vf is None:
                lw = {i: L[i] for i in v_degs}
                rw = {j: R[j] for j in c_degs}
            else:
                lw, rw = degree_weights(m_vf, m_fv)
            new_vf = normalize(sum(i * lw[i] * m_fv ** (i - 1) for i in v_degs))
            new_fv = normalize(sum(rw[j] * branch_sums(factors[j], new_vf)
                                   for j in c_degs))
            return new_vf, new_fv
        return step

    def objective(mp):
        lw, rw = degree_weights(mp.m_vf, mp.m_fv)
        state = IrregularState(mp, lw, rw)
        return annealed_irregular_at(state, spec)

    mp, rep = _run_restarts(step_factory, objective, opts, q, init=init)
    if mp is None:
        return None, rep
    lw, rw = degree_weights(mp.m_vf, mp.m_fv)
    return IrregularState(mp, lw, rw), rep


def _logsumexp(v):
    v = np.asarray(v, dtype=float)
    m = np.max(v)
    if not np.isfinite(m):
        return -math.inf
    return float(m + np.log(np.sum(np.exp(v - m))))
