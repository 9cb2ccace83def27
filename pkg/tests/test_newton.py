import numpy as np
import pytest

import fganneal as fg
from fganneal import Infeasible, NewtonOptions, RegularSpec, SolveOptions
from fganneal.free_energy import entropy
from fganneal.newton import (_newton_minimize, dual_objective, fixed_type_newton,
                             maximize_mu_given_nu)

B = fg.default_alphabet(2)


def random_factor(rng, q, r):
    vals = rng.random((q,) * r) + 0.05
    return fg.FactorTable(r, fg.default_alphabet(q), vals)


class TestDualObjective:
    def test_ones_uniform_gradient_zero(self):
        f = fg.all_ones_factor(3)
        _, grad, _ = dual_objective(np.zeros(2), np.full(2, 0.5), f)
        assert np.max(np.abs(grad)) < 1e-14

    def test_equality_gradient(self):
        # tilt zero on the equality factor: mu is uniform on {(0,0),(1,1)},
        # expected slot counts are (1, 1); targets are r*nu = (0.6, 1.4)
        f = fg.equality_factor()
        _, grad, _ = dual_objective(np.zeros(2), np.array([0.3, 0.7]), f)
        assert grad == pytest.approx([0.4, -0.4], abs=1e-14)

    def test_hessian_psd_on_random_instances(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            q = int(rng.integers(2, 4))
            r = int(rng.integers(2, 5))
            f = random_factor(rng, q, r)
            tau = rng.normal(size=q)
            nu = rng.dirichlet(np.ones(q))
            _, _, hess = dual_objective(tau, nu, f)
            assert np.linalg.eigvalsh(hess).min() >= -1e-10

    def test_type_path_matches_dense_path(self):
        f = fg.binary_csp_factor(6, 2)
        dense = fg.FactorTable(6, B, f.values, perm_invariant=False)
        tau = np.array([0.3, -0.1])
        nu = np.array([0.4, 0.6])
        for a, b in zip(dual_objective(tau, nu, f), dual_objective(tau, nu, dense)):
            assert np.allclose(a, b, atol=1e-12)

    def test_gradient_matches_finite_difference(self):
        f = fg.parity_check_factor(4)
        nu = np.array([0.45, 0.55])
        tau = np.array([0.2, -0.3])
        value, grad, _ = dual_objective(tau, nu, f)
        eps = 1e-7
        for i in range(2):
            d = np.zeros(2)
            d[i] = eps
            vp, _, _ = dual_objective(tau + d, nu, f)
            vm, _, _ = dual_objective(tau - d, nu, f)
            assert (vp - vm) / (2 * eps) == pytest.approx(grad[i], abs=1e-7)


class TestMaximizeMuGivenNu:
    def test_ones_gives_product_type(self):
        spec = RegularSpec(3, 3, fg.all_ones_factor(3))
        nu = np.array([0.3, 0.7])
        mu, value, rep = maximize_mu_given_nu(spec, nu)
        assert rep.converged
        product = np.einsum("a,b,c->abc", nu, nu, nu)
        assert np.max(np.abs(mu - product)) < 1e-10
        assert value == pytest.approx(entropy(nu), abs=1e-12)

    def test_k3_center_where_iteration_fails(self):
        spec = RegularSpec(10, 20, fg.binary_csp_factor(20, 3))
        mu, value, rep = maximize_mu_given_nu(spec, np.full(2, 0.5))
        assert rep.converged
        assert value == pytest.approx(fg.design_rate(spec), abs=1e-10)

    def test_agrees_with_converged_iteration(self):
        spec = RegularSpec(10, 20, fg.binary_csp_factor(20, 2))
        nu = np.array([0.72, 0.28])
        mp, rep = fg.solve_fixed_type(spec, nu, SolveOptions(restarts=2))
        assert rep.converged
        _, value, _ = maximize_mu_given_nu(spec, nu)
        assert value == pytest.approx(rep.objective, abs=1e-8)

    def test_reconstructed_mu_is_consistent(self):
        spec = RegularSpec(3, 6, fg.parity_check_factor(6))
        nu = np.array([0.6, 0.4])
        mu, _, _ = maximize_mu_given_nu(spec, nu)
        ta = fg.TypeAssignment(nu, mu)
        assert ta.consistency_residual() <= 1e-10

    def test_boundary_nu_restricts(self):
        spec = RegularSpec(3, 6, fg.parity_check_factor(6))
        mu, value, rep = maximize_mu_given_nu(spec, np.array([1.0, 0.0]))
        assert value == pytest.approx(0.0, abs=1e-14)  # all-zeros tuple allowed
        assert mu[(0,) * 6] == 1.0

    def test_infeasible_marginals(self):
        # the two-symbol disagree interaction forces balanced marginals
        spec = RegularSpec(2, 2, fg.not_equal_factor())
        with pytest.raises(Infeasible) as err:
            maximize_mu_given_nu(spec, np.array([0.4, 0.6]),
                                 NewtonOptions(max_iters=500))
        assert err.value.certificate is not None


class TestNewtonBehavior:
    def test_dual_value_monotone_decrease(self):
        f = fg.binary_csp_factor(8, 2)
        nu = np.array([0.35, 0.65])
        accepted = []
        _, rep = _newton_minimize(np.zeros(2), lambda t: dual_objective(t, nu, f),
                                  NewtonOptions(), gauge_index=1,
                                  on_accept=accepted.append)
        assert rep.converged
        assert len(accepted) >= 1
        assert all(b <= a + 1e-15 for a, b in zip(accepted, accepted[1:]))

    def test_gauge_invariance(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            q = int(rng.integers(2, 4))
            f = random_factor(rng, q, 3)
            tau = rng.normal(size=q)
            nu = rng.dirichlet(np.ones(q))
            v1, g1, _ = dual_objective(tau, nu, f)
            v2, g2, _ = dual_objective(tau + 1.37, nu, f)
            assert v2 == pytest.approx(v1, abs=1e-9)
            assert g2 == pytest.approx(g1, abs=1e-9)

    def test_agreement_on_41_point_grid(self):
        spec = RegularSpec(10, 20, fg.binary_csp_factor(20, 1))
        opts = SolveOptions(restarts=2, max_iters=3000)
        for w in np.linspace(0.025, 0.975, 39):
            nu = np.array([1 - w, w])
            mp, rep = fg.solve_fixed_type(spec, nu, opts)
            if not rep.converged:
                continue
            value, _, _ = fixed_type_newton(spec, nu)
            assert abs(value - rep.objective) <= 1e-8
