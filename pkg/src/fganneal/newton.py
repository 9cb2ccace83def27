"""Concave inner maximization over the factor-type at a fixed variable type.

The factor-type subproblem (maximize entropy plus the log-interaction average
subject to prescribed slot marginals) is solved through its smooth convex
dual over per-symbol potentials tau: minimize

    D(tau) = log sum_x f(x) exp(sum_i tau(x_i)) - r * sum_z tau(z) nu(z).

The dual dimension is q-1 after gauge fixing (adding a constant to tau leaves
the tilted distribution unchanged), its Hessian is the covariance of the slot
symbol counts, and the optimizer reconstructs mu(x) ~ f(x) exp(sum_i tau(x_i)).
This is the fallback used wherever the fixed-type message iteration fails to
converge.
"""

import math
from dataclasses import dataclass

import numpy as np

from .bp import MessagePair, branch_sums, normalize
from .errors import Infeasible

_HESS_REG = 1e-12
_DIVERGE_VALUE = -1e12
_DIVERGE_NORM = 1e8


@dataclass
class NewtonOptions:
    grad_tol: float = 1e-12
    max_iters: int = 100
    backtrack: float = 0.5
    armijo: float = 1e-4

    def __post_init__(self):
        if self.grad_tol <= 0:
            raise ValueError("grad_tol must be positive")


@dataclass
class NewtonReport:
    converged: bool
    iterations: int
    grad_norm: float
    dual_value: float


def _logsumexp_w(logits):
    m = np.max(logits)
    if not np.isfinite(m):
        raise Infeasible("empty support: every tilted weight vanished")
    w = np.exp(logits - m)
    s = w.sum()
    return float(m + np.log(s)), w / s


def dual_objective(tau, nu, factor, extra_features=None, extra_targets=None):
    """Value, gradient and Hessian of the count-moment dual at tau.

    With extra linear moment constraints on the factor type, tau is extended
    by one multiplier per constraint and the per-tuple feature vector becomes
    (symbol counts, constraint values).  The Hessian is the feature covariance
    under the tilted distribution, hence positive semidefinite.
    """
    tau = np.asarray(tau, dtype=float)
    nu = np.asarray(nu, dtype=float)
    q, r = factor.q, factor.arity
    targets = r * nu
    if extra_targets is not None:
        targets = np.concatenate([targets, np.asarray(extra_targets, dtype=float)])

    if factor.perm_invariant and extra_features is None:
        comps, type_values, multinoms, _ = factor.type_data()
        feats = np.array(comps, dtype=float)              # (n_types, q)
        with np.errstate(divide="ignore"):
            logits = np.log(type_values) + np.log(multinoms) + feats @ tau
    else:
        feats = factor._symbol_counts().astype(float)     # (q^r, q)
        if extra_features is not None:
            extra = np.asarray(extra_features, dtype=float).reshape(-1, feats.shape[0])
            feats = np.concatenate([feats, extra.T], axis=1)
        with np.errstate(divide="ignore"):
            logits = np.log(factor.values.reshape(-1)) + feats @ tau

    value_log, w = _logsumexp_w(logits)
    mean = w @ feats
    centered = feats - mean
    hess = (centered * w[:, None]).T @ centered
    value = value_log - float(np.dot(tau, targets))
    grad = mean - targets
    return value, grad, hess


def _newton_minimize(x0, eval_fn, opts, gauge_index, on_accept=None):
    """Damped Newton with Armijo backtracking on a smooth convex function.

    The coordinate `gauge_index` is a flat direction and is held at zero.
    Divergence of the value or the iterate signals an infeasible target (dual
    unbounded below).  on_accept, if given, receives the value of every
    accepted step.
    """
    x = np.asarray(x0, dtype=float).copy()
    free = np.array([i for i in range(x.shape[0]) if i != gauge_index])
    value, grad, hess = eval_fn(x)
    for it in range(1, opts.max_iters + 1):
        gnorm = float(np.max(np.abs(grad)))
        if gnorm <= opts.grad_tol:
            return x, NewtonReport(True, it - 1, gnorm, value)
        g_red = grad[free]
        h_red = hess[np.ix_(free, free)] + _HESS_REG * np.eye(free.size)
        try:
            step = np.linalg.solve(h_red, -g_red)
        except np.linalg.LinAlgError:
            step = -g_red
        direction = np.zeros_like(x)
        direction[free] = step
        slope = float(np.dot(grad, direction))
        if slope >= 0:
            direction[free] = -g_red
            slope = float(np.dot(grad, direction))
        alpha = 1.0
        while True:
            cand = x + alpha * direction
            cand_value, cand_grad, cand_hess = eval_fn(cand)
            if cand_value <= value + opts.armijo * alpha * slope:
                break
            alpha *= opts.backtrack
            if alpha < 1e-18:
                # flat to rounding: accept what we have
                return x, NewtonReport(gnorm <= 1e-6, it, gnorm, value)
        x, value, grad, hess = cand, cand_value, cand_grad, cand_hess
        if on_accept is not None:
            on_accept(value)
        if value < _DIVERGE_VALUE or np.linalg.norm(x) > _DIVERGE_NORM:
            cert = x / max(np.linalg.norm(x), 1.0)
            raise Infeasible("dual unbounded below: requested marginals are "
                             "not achievable inside the interaction support",
                             certificate=cert)
    gnorm = float(np.max(np.abs(grad)))
    return x, NewtonReport(False, opts.max_iters, gnorm, value)


def _solve_dual(factor, nu, opts):
    """Gauge-fixed dual minimization for slot marginals r*nu; returns (tau, report)."""
    q = factor.q

    def eval_fn(tau):
        return dual_objective(tau, nu, factor)

    return _newton_minimize(np.zeros(q), eval_fn, opts, gauge_index=q - 1)


def _messages_from_tau(factor, tau):
    """Stationary message pair implied by the dual potentials."""
    m_vf = normalize(np.exp(tau - np.max(tau)))
    m_fv = normalize(branch_sums(factor, m_vf))
    return MessagePair(m_vf, m_fv)


def _mu_from_tau(factor, tau, zeta=None, extra_features=None):
    """Tilted factor type mu(x) ~ f(x) exp(sum_i tau(x_i) + zeta . c(x)), dense."""
    if factor.perm_invariant and zeta is None:
        comps, type_values, _, type_id = factor.type_data()
        feats = np.array(comps, dtype=float)
        with np.errstate(divide="ignore"):
            logits = np.log(type_values) + feats @ tau
        flat = np.exp(logits - np.max(logits))[type_id]
    else:
        counts = factor._symbol_counts().astype(float)
        with np.errstate(divide="ignore"):
            logits = np.log(factor.values.reshape(-1)) + counts @ tau
        if zeta is not None:
            extra = np.asarray(extra_features, dtype=float).reshape(len(zeta), -1)
            logits = logits + extra.T @ zeta
        flat = np.exp(logits - np.max(logits))
    flat = flat / flat.sum()
    return flat.reshape(factor.values.shape)


def _assemble_value(spec, nu, dual_value):
    """(l/r) * max_mu {H(mu) + E[log f]} - (l-1) H(nu); the max equals the dual min."""
    nz = nu[nu > 0]
    h_nu = float(-(nz * np.log(nz)).sum())
    return (spec.l / spec.r) * dual_value - (spec.l - 1) * h_nu


def maximize_mu_given_nu(spec, nu, opts=None):
    """Best factor type for a fixed variable type, via the concave dual.

    Returns (mu, value, report) where value is the fixed-type growth objective
    (l/r)(H(mu) + E_mu[log f]) - (l-1) H(nu).  Zero entries of nu restrict the
    problem to the support sub-alphabet; mu carries zeros outside it.
    Raises Infeasible when no factor type inside the interaction support has
    the required marginals.
    """
    opts = opts or NewtonOptions()
    nu = np.asarray(nu, dtype=float)
    factor = spec.factor
    support = np.flatnonzero(nu > 0)
    if support.size == 0:
        raise ValueError("nu must be a distribution")
    if support.size == 1:
        x = int(support[0])
        fxx = factor.value_at((x,) * factor.arity)
        if fxx <= 0.0:
            raise Infeasible("single-symbol type lies outside the interaction support",
                             certificate=np.eye(factor.q)[x])
        mu = np.zeros_like(factor.values)
        mu[(x,) * factor.arity] = 1.0
        value = (spec.l / spec.r) * math.log(fxx)
        return mu, value, NewtonReport(True, 0, 0.0, math.log(fxx))

    if support.size < factor.q:
        sub = factor.restrict(support)
        sub_spec = type(spec)(spec.l, spec.r, sub)
        sub_mu, value, report = maximize_mu_given_nu(sub_spec, nu[support], opts)
        mu = np.zeros_like(factor.values)
        mu[np.ix_(*([support] * factor.arity))] = sub_mu
        return mu, value, report

    tau, report = _solve_dual(factor, nu, opts)
    mu = _mu_from_tau(factor, tau)
    value = _assemble_value(spec, nu, report.dual_value)
    return mu, value, report


def fixed_type_newton(spec, nu, opts=None):
    """Lean variant returning (value, messages, report) without densifying mu.

    nu must have full support (callers restrict beforehand).
    """
    opts = opts or NewtonOptions()
    nu = np.asarray(nu, dtype=float)
    tau, report = _solve_dual(spec.factor, nu, opts)
    mp = _messages_from_tau(spec.factor, tau)
    return _assemble_value(spec, nu, report.dual_value), mp, report


def maximize_with_constraints_inner(factor, nu, mu_features, mu_targets, opts=None):
    """Extended dual with extra linear moment constraints on the factor type.

    mu_features: list of dense constraint coefficient arrays on X^r;
    mu_targets: required moments.  Returns (tau_full, mu, report), where
    tau_full stacks the q symbol potentials and one multiplier per constraint.
    """
    opts = opts or NewtonOptions()
    q = factor.q
    t = len(mu_targets)
    feats = np.stack([np.asarray(c, dtype=float).reshape(-1) for c in mu_features])
    x0 = np.zeros(q + t)

    def eval_full(tau_full):
        return dual_objective(tau_full, nu, factor, extra_features=feats,
                              extra_targets=mu_targets)

    tau_full, report = _newton_minimize(x0, eval_full, opts, gauge_index=q - 1)
    mu = _mu_from_tau(factor, tau_full[:q], zeta=tau_full[q:], extra_features=feats)
    return tau_full, mu, report
