import math
from fractions import Fraction

import numpy as np
import pytest

import fganneal as fg
from fganneal import MessagePair, RegularSpec, SolveOptions
from fganneal.stability import (binary_csp_stability_fraction,
                                binary_csp_stability_value,
                                linearized_operator, paramagnetic_stability)


def closed_form_fraction(r, k):
    # independent arithmetic: C(r-1, r/2-k)(2k-1) / (2 sum_{i<r/2-k} C(r-1,i) + C(r-1, r/2-k))
    m = r // 2 - k
    return Fraction(math.comb(r - 1, m) * (2 * k - 1),
                    2 * sum(math.comb(r - 1, i) for i in range(m)) + math.comb(r - 1, m))


class TestClosedForm:
    def test_exact_fractions(self):
        for r in range(4, 22, 2):
            for k in range(1, r // 2 + 1):
                assert binary_csp_stability_fraction(r, k) == closed_form_fraction(r, k)

    def test_reference_constants(self):
        # tolerances at the printed 6-figure precision of the constants
        assert binary_csp_stability_value(20, 2) == pytest.approx(0.859049, abs=5e-6)
        assert binary_csp_stability_value(20, 3) == pytest.approx(1.825917, abs=5e-6)
        # exact arithmetic gives 92378/431910 for (20, 1)
        assert binary_csp_stability_fraction(20, 1) == Fraction(92378, 431910)
        assert binary_csp_stability_value(20, 1) == pytest.approx(0.213882, abs=5e-6)

    def test_argument_validation(self):
        with pytest.raises(ValueError):
            binary_csp_stability_value(7, 1)
        with pytest.raises(ValueError):
            binary_csp_stability_value(8, 5)


class TestLinearizedOperator:
    def test_ones_factor_entries(self):
        a = linearized_operator(fg.all_ones_factor(6))
        assert np.allclose(a, -2.5)  # -(r-1)/q everywhere

    def test_all_ones_vector_eigenvalue(self):
        for f in (fg.binary_csp_factor(8, 2), fg.parity_check_factor(5),
                  fg.all_ones_factor(4, fg.default_alphabet(3))):
            a = linearized_operator(f)
            ones = np.ones(f.q)
            assert np.max(np.abs(a @ ones + (f.arity - 1) * ones)) < 1e-10

    def test_perm_path_matches_dense_path(self):
        f = fg.binary_csp_factor(8, 3)
        dense = fg.FactorTable(8, fg.default_alphabet(2), f.values,
                               perm_invariant=False)
        assert np.allclose(linearized_operator(f), linearized_operator(dense),
                           atol=1e-12)

    def test_nonconstant_marginals_rejected(self):
        f = fg.build_factor_table(2, fg.default_alphabet(2),
                                  {(0, 0): 1.0, (0, 1): 1.0})
        with pytest.raises(ValueError):
            linearized_operator(f)


class TestParamagneticStability:
    @pytest.mark.parametrize("r", range(4, 22, 2))
    def test_matches_closed_form(self, r):
        for k in range(1, r // 2 + 1):
            rep = paramagnetic_stability(fg.binary_csp_factor(r, k))
            assert abs(rep.max_nontrivial_abs
                       - binary_csp_stability_value(r, k)) <= 1e-12

    def test_reference_cases(self):
        rep = paramagnetic_stability(fg.binary_csp_factor(20, 2))
        assert rep.max_nontrivial_abs == pytest.approx(0.859049, abs=5e-7)
        assert rep.stable
        rep = paramagnetic_stability(fg.binary_csp_factor(20, 3))
        assert rep.max_nontrivial_abs == pytest.approx(1.825917, abs=5e-7)
        assert not rep.stable

    def test_ones_factor_is_flat(self):
        rep = paramagnetic_stability(fg.all_ones_factor(5))
        assert rep.max_nontrivial_abs == pytest.approx(0.0, abs=1e-14)
        assert rep.stable
        assert rep.trivial_eigenvalue == pytest.approx(-4.0, abs=1e-12)

    def test_matrix_is_symmetric_for_binary_perm_factors(self):
        rep = paramagnetic_stability(fg.binary_csp_factor(12, 2))
        assert np.allclose(rep.matrix, rep.matrix.T, atol=1e-13)


class TestIterationConsistency:
    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_perturbed_center_iteration(self, k):
        # the perturbed fixed-type iteration at the balanced type returns to
        # uniform exactly when the spectral value is below one
        spec = RegularSpec(10, 20, fg.binary_csp_factor(20, k))
        eps = 1e-6
        init = MessagePair(np.full(2, 0.5), np.array([0.5 + eps, 0.5 - eps]))
        mp, rep = fg.solve_fixed_type(spec, np.full(2, 0.5),
                                      SolveOptions(max_iters=3000, restarts=0),
                                      init=init)
        returned = rep.converged and np.max(np.abs(mp.m_fv - 0.5)) < 1e-8
        assert returned == (binary_csp_stability_value(20, k) < 1.0)
