"""Free-energy evaluators and the global maximization strategy.

Pointwise evaluators compute the exponent expressions at stationary messages;
the orchestrators combine multi-restart message iteration with a variable-type
grid sweep (each grid section solved by the message iteration with a concave
dual Newton fallback) and keep the best stationary value found.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bp import (MessagePair, SolveOptions, SolveReport, branch_sums,
                 factor_partition, normalize_log, solve_field,
                 solve_fixed_type, solve_irregular, solve_poisson,
                 solve_random_field, solve_regular)
from .ensembles import RegularSpec
from .errors import DegenerateMessage, Infeasible
from .factors import replicate_factor
from .newton import NewtonOptions, fixed_type_newton, maximize_with_constraints_inner

NEG_INF = float("-inf")
_CONSISTENCY_TOL = 1e-10


def entropy(p):
    """Shannon entropy in nats, with 0 log 0 = 0."""
    p = np.asarray(p, dtype=float)
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def _logsumexp(v):
    v = np.asarray(v, dtype=float)
    m = np.max(v)
    if not np.isfinite(m):
        return NEG_INF
    return float(m + np.log(np.sum(np.exp(v - m))))


# -- variable/factor type pairs --------------------------------------------------

@dataclass
class TypeAssignment:
    """Variable-type distribution and consistent factor-type distribution."""

    nu: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        self.nu = np.asarray(self.nu, dtype=float)
        self.mu = np.asarray(self.mu, dtype=float)
        if abs(self.nu.sum() - 1.0) > 1e-9 or np.any(self.nu < 0):
            raise ValueError("nu must be a distribution")
        if abs(self.mu.sum() - 1.0) > 1e-9 or np.any(self.mu < 0):
            raise ValueError("mu must be a distribution")

    @property
    def r(self):
        return self.mu.ndim

    def edge_marginal(self):
        """(1/r) sum over slots i of the marginal of mu onto slot i."""
        r = self.r
        out = np.zeros(self.nu.shape[0])
        for i in range(r):
            axes = tuple(j for j in range(r) if j != i)
            out += self.mu.sum(axis=axes) if axes else self.mu
        return out / r

    def consistency_residual(self):
        return float(np.max(np.abs(self.edge_marginal() - self.nu)))

    def check_consistency(self, tol=_CONSISTENCY_TOL):
        res = self.consistency_residual()
        if res > tol:
            raise ValueError(f"type assignment inconsistent: residual {res:.3e} > {tol:.0e}")


def bethe_type_objective(spec, ta, consistency_tol=_CONSISTENCY_TOL):
    """Exponent (l/r) H(mu) - (l-1) H(nu) + (l/r) E_mu[log f] of a type pair.

    Returns -inf when mu puts mass where the interaction vanishes.
    """
    ta.check_consistency(consistency_tol)
    f = spec.factor
    mu = ta.mu
    if np.any((mu > 0) & (f.values == 0)):
        return NEG_INF
    pos = mu > 0
    energy = float((mu[pos] * np.log(f.values[pos])).sum())
    return ((spec.l / spec.r) * (entropy(mu) + energy)
            - (spec.l - 1) * entropy(ta.nu))


def reconstruct_type_assignment(mp, spec):
    """Type pair implied by stationary messages: nu ~ m_fv^l, mu ~ f prod m_vf."""
    f, l = spec.factor, spec.l
    with np.errstate(divide="ignore"):
        nu = normalize_log(l * np.log(mp.m_fv))
        log_prod = np.zeros(f.values.shape)
        lm = np.log(mp.m_vf)
    for i in range(f.arity):
        shape = [1] * f.arity
        shape[i] = f.q
        log_prod = log_prod + lm.reshape(shape)
    with np.errstate(divide="ignore"):
        log_mu = np.where(f.values > 0, np.log(f.values, where=f.values > 0), NEG_INF) + log_prod
    m = np.max(log_mu)
    mu = np.exp(log_mu - m)
    mu /= mu.sum()
    return TypeAssignment(nu, mu)


# -- pointwise evaluators ---------------------------------------------------------

def annealed_regular_at(mp, spec):
    """(l/r) log Z_f + log Z_v - l log Z_fv at a message pair.

    Meaningful at stationary points; no fixed-point check is performed so the
    same evaluator can rank non-converged iterates.
    """
    f, l, r = spec.factor, spec.l, spec.r
    z_fv = float(np.dot(mp.m_fv, mp.m_vf))
    if z_fv <= 0:
        raise ValueError("Z_fv must be positive")
    with np.errstate(divide="ignore"):
        log_zv = _logsumexp(l * np.log(mp.m_fv))
    z_f = factor_partition(f, mp.m_vf)
    if z_f <= 0:
        return NEG_INF
    return (l / r) * math.log(z_f) + log_zv - l * math.log(z_fv)


def growth_rate_fixed_type(spec, nu, mp):
    """l((1/r) log Z_f + sum_x nu log m_fv - log Z_fv) + H(nu) at type nu."""
    f, l, r = spec.factor, spec.l, spec.r
    nu = np.asarray(nu, dtype=float)
    if np.any((nu > 0) & (mp.m_fv <= 0)):
        return NEG_INF
    z_fv = float(np.dot(mp.m_fv, mp.m_vf))
    z_f = factor_partition(f, mp.m_vf)
    if z_f <= 0 or z_fv <= 0:
        return NEG_INF
    pos = nu > 0
    cross = float((nu[pos] * np.log(mp.m_fv[pos])).sum())
    return l * (math.log(z_f) / r + cross - math.log(z_fv)) + entropy(nu)


def annealed_field_at(mp, spec, h):
    """Field-weighted saddle value: Z_v = sum_x h(x) m_fv(x)^l."""
    f, l, r = spec.factor, spec.l, spec.r
    hw = h.array if hasattr(h, "array") else np.asarray(h, dtype=float)
    z_fv = float(np.dot(mp.m_fv, mp.m_vf))
    z_f = factor_partition(f, mp.m_vf)
    if z_f <= 0 or z_fv <= 0:
        return NEG_INF
    with np.errstate(divide="ignore"):
        log_zv = _logsumexp(np.log(hw) + l * np.log(mp.m_fv))
    return (l / r) * math.log(z_f) + log_zv - l * math.log(z_fv)


def annealed_random_field_at(mp, spec, rf):
    """Mixture-field saddle value: sum_h P(h) log Z_v(h) replaces log Z_v."""
    f, l, r = spec.factor, spec.l, spec.r
    z_fv = float(np.dot(mp.m_fv, mp.m_vf))
    z_f = factor_partition(f, mp.m_vf)
    if z_f <= 0 or z_fv <= 0:
        return NEG_INF
    with np.errstate(divide="ignore"):
        log_fv = np.log(mp.m_fv)
        acc = 0.0
        for fs, p in zip(rf.fields, rf.probs):
            if p == 0.0:
                continue
            acc += p * _logsumexp(np.log(fs.array) + l * log_fv)
    return (l / r) * math.log(z_f) + acc - l * math.log(z_fv)


def annealed_poisson_at(state, spec):
    """alpha log Z_f + log Z_v - e sum_x m_vf m_fv (coupling term; alpha*k at fixed points)."""
    mp, e = state.messages, state.e
    z_f = factor_partition(spec.factor, mp.m_vf)
    if z_f <= 0:
        return NEG_INF
    log_zv = _logsumexp(e * mp.m_fv)
    return spec.alpha * math.log(z_f) + log_zv - e * float(np.dot(mp.m_vf, mp.m_fv))


def annealed_irregular_at(state, spec):
    """Degree-averaged saddle value with the node-perspective weights.

    (L'(1)/R'(1)) sum_j R_j log Z_f(j) + sum_i L_i log Z_v(i) - L'(1) log Z_fv.
    """
    mp = state.messages
    lp = spec.mean_variable_degree
    rp = spec.mean_check_degree
    z_fv = float(np.dot(mp.m_fv, mp.m_vf))
    if z_fv <= 0:
        return NEG_INF
    with np.errstate(divide="ignore"):
        log_fv = np.log(mp.m_fv)
    acc_f = 0.0
    for j, w in spec.check_degrees.items():
        z_fj = factor_partition(spec.factors[j], mp.m_vf)
        if z_fj <= 0:
            return NEG_INF
        acc_f += w * math.log(z_fj)
    acc_v = sum(w * _logsumexp(i * log_fv)
                for i, w in spec.variable_degrees.items())
    return (lp / rp) * acc_f + acc_v - lp * math.log(z_fv)


def poisson_fixed_type_value(spec, nu):
    """H(nu) + alpha log sum_x f prod nu(x_i): the Poisson exponent at type nu."""
    nu = np.asarray(nu, dtype=float)
    z_f = factor_partition(spec.factor, nu)
    if z_f <= 0:
        return NEG_INF
    return entropy(nu) + spec.alpha * math.log(z_f)


# -- stationarity diagnostics ------------------------------------------------------

def saddle_objective(factor, l, m_vf, m_fv, field=None):
    """Scale-invariant saddle function on raw nonnegative message vectors.

    (l/r) log Z_f + log sum_x h(x) m_fv(x)^l - l log Z_fv with h == 1 without a
    field.  Its partial derivatives vanish exactly at stationary points, which
    is what the finite-difference gradient check probes.
    """
    r = factor.arity
    hw = (field.array if hasattr(field, "array")
          else np.ones(factor.q) if field is None else np.asarray(field, dtype=float))
    z_f = factor_partition(factor, m_vf)
    z_fv = float(np.dot(m_fv, m_vf))
    z_v = float(np.dot(hw, m_fv ** l))
    if z_f <= 0 or z_fv <= 0 or z_v <= 0:
        return NEG_INF
    return (l / r) * math.log(z_f) + math.log(z_v) - l * math.log(z_fv)


def saddle_gradients(factor, l, mp, field=None):
    """Analytic partials of saddle_objective at a message pair."""
    r = factor.arity
    hw = (field.array if hasattr(field, "array")
          else np.ones(factor.q) if field is None else np.asarray(field, dtype=float))
    z_f = factor_partition(factor, mp.m_vf)
    z_fv = float(np.dot(mp.m_fv, mp.m_vf))
    z_v = float(np.dot(hw, mp.m_fv ** l))
    b = branch_sums(factor, mp.m_vf)
    if factor.perm_invariant:
        b = b * r  # single-branch form carries an absorbed factor of r
    g_fv = l * hw * mp.m_fv ** (l - 1) / z_v - l * mp.m_vf / z_fv
    g_vf = (l / r) * b / z_f - l * mp.m_fv / z_fv
    return g_vf, g_fv


def finite_diff_saddle_gradient(factor, l, mp, field=None, step=1e-6):
    """Max |central finite difference| of saddle_objective over all coordinates."""
    worst = 0.0
    for which in (0, 1):
        base = [mp.m_vf.copy(), mp.m_fv.copy()]
        for x in range(factor.q):
            hi = [b.copy() for b in base]
            lo = [b.copy() for b in base]
            hi[which][x] += step
            lo[which][x] -= step
            fp = saddle_objective(factor, l, hi[0], hi[1], field)
            fm = saddle_objective(factor, l, lo[0], lo[1], field)
            worst = max(worst, abs((fp - fm) / (2 * step)))
    return worst


def implied_field(nu, m_fv, l):
    """Field weights h ~ nu / m_fv^l recovered from a fixed-type stationary point."""
    nu = np.asarray(nu, dtype=float)
    with np.errstate(divide="ignore"):
        h = np.where(nu > 0, nu / np.maximum(m_fv, 1e-300) ** l, 0.0)
    return h / h.max()


# -- variable-type grid sweep -------------------------------------------------------

@dataclass
class GridPoint:
    """One section of the growth-rate curve."""

    nu: np.ndarray
    value: float
    bp_converged: bool
    solver: str
    iterations: int
    messages: MessagePair | None
    boundary: bool = False
    newton_value: float | None = None


def default_grid(q, points=None):
    """Variable-type grid: all count vectors at the chosen resolution.

    For q == 2 this is `points` evenly spaced values of nu(1) in [0, 1].
    """
    from .factors import compositions
    if points is None:
        points = 201 if q == 2 else (41 if q == 3 else 21)
    denom = points - 1
    grid = [np.array(c[::-1], dtype=float) / denom for c in compositions(denom, q)]
    if q == 2:
        grid.sort(key=lambda v: v[1])
    return grid


def fixed_type_value(spec, nu, opts=None, newton_opts=None):
    """Growth-rate section at type nu.

    The concave dual runs first: it is cheap, detects infeasible types
    immediately, and its value cross-checks the message iteration, which then
    runs on feasible types to report honest convergence.  The returned value
    is the iteration's own where it converges, the dual's otherwise.
    """
    opts = opts or SolveOptions()
    newton_opts = newton_opts or NewtonOptions()
    nu = np.asarray(nu, dtype=float)
    f = spec.factor
    support = np.flatnonzero(nu > 1e-15)
    if support.size == 0:
        raise ValueError("nu must be a distribution")
    if support.size == 1:
        x = int(support[0])
        fxx = f.value_at((x,) * f.arity)
        value = (spec.l / spec.r) * math.log(fxx) if fxx > 0 else NEG_INF
        return GridPoint(nu, value, True, "boundary", 0, None, boundary=True)
    if support.size < f.q:
        sub_spec = RegularSpec(spec.l, spec.r, f.restrict(support))
        inner = fixed_type_value(sub_spec, nu[support], opts, newton_opts)
        return GridPoint(nu, inner.value, inner.bp_converged, inner.solver,
                         inner.iterations, None, boundary=True,
                         newton_value=inner.newton_value)

    try:
        n_value, mp_n, nrep = fixed_type_newton(spec, nu, newton_opts)
    except (Infeasible, DegenerateMessage):
        return GridPoint(nu, NEG_INF, False, "infeasible", 0, None)
    mp, rep = solve_fixed_type(spec, nu, opts)
    if rep.converged:
        return GridPoint(nu, rep.objective, True, "bp", rep.iterations, mp,
                         newton_value=n_value)
    return GridPoint(nu, n_value, False, "newton",
                     rep.iterations + nrep.iterations, mp_n, newton_value=n_value)


def growth_rate_curve(spec, grid=None, opts=None, newton_opts=None,
                      grid_points=None, threads=1):
    """Growth-rate sections over a variable-type grid, in grid order.

    Each point runs with a seed derived deterministically from the base seed
    and the grid index, so results do not depend on scheduling.
    """
    opts = opts or SolveOptions()
    newton_opts = newton_opts or NewtonOptions()
    if grid is None:
        grid = default_grid(spec.factor.q, grid_points)

    def solve_point(item):
        idx, nu = item
        seed = (opts.rng_seed * 1_000_003 + idx) % (2 ** 63)
        local = SolveOptions(tol=opts.tol, max_iters=opts.max_iters,
                             damping=opts.damping, restarts=opts.restarts,
                             rng_seed=seed)
        return fixed_type_value(spec, nu, local, newton_opts)

    items = list(enumerate(grid))
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(solve_point, items))
    return [solve_point(it) for it in items]


def annealed_regular(spec, opts=None, grid=None, grid_points=None, threads=1):
    """Best stationary exponent: max over message fixed points and grid sections.

    Returns (value, report); report.provenance names the winning candidate.
    """
    opts = opts or SolveOptions()
    candidates = []
    mp, rep = solve_regular(spec, opts)
    if rep.converged and mp is not None:
        candidates.append((rep.objective, f"bp:{rep.provenance}", rep))
    curve = growth_rate_curve(spec, grid=grid, opts=opts,
                              grid_points=grid_points, threads=threads)
    for pt in curve:
        if np.isfinite(pt.value):
            tag = f"grid:nu={np.array2string(pt.nu, precision=4)}:{pt.solver}"
            candidates.append((pt.value, tag, None))
    if not candidates:
        return NEG_INF, SolveReport(False, 0, math.inf,
                                    provenance="no stationary point found")
    value, tag, base = max(candidates, key=lambda c: c[0])
    report = SolveReport(True, base.iterations if base else 0,
                         base.residual if base else 0.0,
                         objective=value, provenance=tag)
    return value, report


def annealed_regular_messages(spec, opts=None):
    """Converged unconstrained message fixed point with the best objective."""
    mp, rep = solve_regular(spec, opts or SolveOptions())
    return mp, rep


# -- decorated ensembles -------------------------------------------------------------

def annealed_field(spec, h, opts=None):
    """Annealed exponent of the field-decorated regular ensemble."""
    opts = opts or SolveOptions()
    mp, rep = solve_field(spec, h, opts)
    if rep.converged:
        return rep.objective
    # fall back to the Legendre section sweep: max_nu {G(nu) + sum nu log h}
    hw = h.array if hasattr(h, "array") else np.asarray(h, dtype=float)
    best = NEG_INF
    for pt in growth_rate_curve(spec, opts=opts):
        if not np.isfinite(pt.value):
            continue
        with np.errstate(divide="ignore"):
            shift = float(np.dot(pt.nu, np.where(pt.nu > 0, np.log(hw), 0.0)))
        best = max(best, pt.value + shift)
    return best


def annealed_random_field(spec, rf, opts=None):
    """Annealed exponent of the mixture-field ensemble."""
    opts = opts or SolveOptions()
    if len(rf.fields) == 1:
        return annealed_field(spec, rf.fields[0], opts)
    mp, rep = solve_random_field(spec, rf, opts)
    if rep.converged:
        return rep.objective
    raise DegenerateMessage("random-field iteration did not converge from any start")


def annealed_irregular(spec, opts=None):
    """Annealed exponent of the irregular ensemble."""
    opts = opts or SolveOptions()
    state, rep = solve_irregular(spec, opts)
    if not rep.converged:
        raise DegenerateMessage("irregular iteration did not converge from any start")
    return rep.objective


def annealed_poisson(spec, opts=None):
    """Annealed exponent of the Poisson ensemble."""
    opts = opts or SolveOptions()
    state, rep = solve_poisson(spec, opts)
    if not rep.converged:
        raise DegenerateMessage("Poisson iteration did not converge from any start")
    return rep.objective


def moment_exponent(spec, n, opts=None, grid_points=None):
    """Exponent of the n-th moment: the replicated table on X^n, same degrees."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rep_factor = replicate_factor(spec.factor, n)
    rep_spec = RegularSpec(spec.l, spec.r, rep_factor)
    value, _ = annealed_regular(rep_spec, opts=opts, grid_points=grid_points)
    return value


# -- closed-form binary parity growth rate ----------------------------------------------

@dataclass
class LdpcParams:
    """Solved tilt parameters of the binary parity growth-rate closed form."""

    omega: float
    h: float
    y: float   # m_fv(0) - m_fv(1)
    z: float   # m_vf(0) - m_vf(1)

    @property
    def omega_prime(self):
        return 1.0 - 2.0 * self.omega


def ldpc_params(l, r, omega):
    """Solve the (h, y, z) tilt system so the tilted type hits nu(1) = omega.

    The system y = z^(r-1), z = tanh(h + (l-1) atanh(y)) is parametrized by z
    alone: h = atanh(z) - (l-1) atanh(y), and the achieved bias becomes
    omega' = tanh(atanh(z) + atanh(y)) = (z + y)/(1 + z y), which increases
    with z, so a single bisection on z solves the whole system (the damped
    fixed-point iteration loses the middle branch where it turns unstable).
    """
    if not (0.0 < omega < 1.0):
        raise ValueError("omega must lie in (0, 1)")
    target = 1.0 - 2.0 * omega

    def tilt(z):
        y = z ** (r - 1)
        return (z + y) / (1.0 + z * y)

    eps = 1e-15
    lo, hi = -1.0 + eps, 1.0 - eps
    if tilt(lo) > target or tilt(hi) < target:
        raise ValueError("bisection bracket does not cover omega")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if tilt(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-16:
            break
    z = 0.5 * (lo + hi)
    if abs(target) < 1e-15:
        z = 0.0
    y = z ** (r - 1)
    h = math.atanh(z) - (l - 1) * math.atanh(y)
    return LdpcParams(omega, h, y, z)


def ldpc_growth_rate_closed_form(l, r, omega, opts=None):
    """Growth rate of the binary (l, r) parity ensemble at relative weight omega."""
    p = ldpc_params(l, r, omega)
    h, y, z = p.h, p.y, p.z
    ln2 = math.log(2.0)
    log_zf = math.log1p(z ** r) - ln2
    log_zv = np.logaddexp(h + l * (math.log1p(y) - ln2),
                          -h + l * (math.log1p(-y) - ln2))
    log_zfv = math.log1p(y * z) - ln2
    return (l / r) * log_zf + float(log_zv) - l * log_zfv - p.omega_prime * h


# -- linear constraints ----------------------------------------------------------------

@dataclass(frozen=True)
class NuConstraint:
    """sum_x a(x) nu(x) = b."""

    a: tuple
    b: float


@dataclass(frozen=True)
class MuConstraint:
    """sum_x c(x) mu(x) = d with c given densely on X^r."""

    c: object
    d: float


def maximize_with_linear_constraints(spec, nu_constraints=(), mu_constraints=(),
                                     opts=None, newton_opts=None, grid_points=None):
    """Best exponent subject to extra linear constraints on the types.

    Without constraints this is the plain annealed exponent.  The variable
    type is swept over the affine slice cut out by the nu-constraints; each
    section solves the (possibly moment-constrained) concave inner problem.
    """
    opts = opts or SolveOptions()
    newton_opts = newton_opts or NewtonOptions()
    q = spec.factor.q
    mu_feats = [np.asarray(mc.c, dtype=float) for mc in mu_constraints]
    mu_targets = [float(mc.d) for mc in mu_constraints]

    def section(nu):
        if mu_constraints:
            if np.any(nu <= 0):
                return NEG_INF
            try:
                _, mu, rep = maximize_with_constraints_inner(
                    spec.factor, nu, mu_feats, mu_targets, newton_opts)
            except Infeasible:
                return NEG_INF
            if not rep.converged:
                return NEG_INF
            return (spec.l / spec.r) * rep.dual_value - (spec.l - 1) * entropy(nu)
        try:
            return fixed_type_value(spec, nu, opts, newton_opts).value
        except (Infeasible, DegenerateMessage):
            return NEG_INF

    if not nu_constraints:
        if not mu_constraints:
            return annealed_regular(spec, opts=opts, grid_points=grid_points)[0]
        best = max(section(np.asarray(nu)) for nu in default_grid(q, grid_points))
        if best == NEG_INF:
            raise Infeasible("no feasible variable type on the grid")
        return best

    rows = [np.asarray(c.a, dtype=float) for c in nu_constraints]
    rhs = [float(c.b) for c in nu_constraints]
    rows.append(np.ones(q))
    rhs.append(1.0)
    a_mat = np.stack(rows)
    b_vec = np.asarray(rhs)
    particular, *_ = np.linalg.lstsq(a_mat, b_vec, rcond=None)
    if np.max(np.abs(a_mat @ particular - b_vec)) > 1e-9:
        raise Infeasible("nu-constraints are inconsistent")
    _, s, vt = np.linalg.svd(a_mat)
    rank = int(np.sum(s > 1e-12))
    null = vt[rank:].T  # (q, dim)
    dim = null.shape[1]

    if dim == 0:
        nu = particular
        if np.any(nu < -1e-12):
            raise Infeasible("the unique constrained nu has negative entries")
        nu = np.clip(nu, 0.0, None)
        nu = nu / nu.sum()
        val = section(nu)
        if val == NEG_INF:
            raise Infeasible("constrained nu lies outside the interaction support")
        return val
    if dim > 3:
        raise ValueError("constrained sweep supports at most 3 free dimensions")

    span = math.sqrt(q)
    best = NEG_INF
    center = particular
    width = span
    pts_per_dim = 21
    for _ in range(4):  # progressive refinement around the best point
        axes = [np.linspace(-width, width, pts_per_dim)] * dim
        mesh = np.meshgrid(*axes, indexing="ij")
        coords = np.stack([m.ravel() for m in mesh], axis=1)
        round_best = None
        for t in coords:
            nu = center + null @ t
            if np.any(nu < -1e-12) or abs(nu.sum() - 1.0) > 1e-9:
                continue
            nu = np.clip(nu, 0.0, None)
            nu = nu / nu.sum()
            val = section(nu)
            if round_best is None or val > round_best[0]:
                round_best = (val, nu)
        if round_best is None:
            break
        if round_best[0] > best:
            best = round_best[0]
            center = round_best[1]
        width /= pts_per_dim / 2.5
    if best == NEG_INF:
        raise Infeasible("no feasible nu satisfies the constraints")
    return best
