import math

import numpy as np
import pytest

import fganneal as fg
from fganneal import PdOptions, RegularSpec, SolveOptions
from fganneal.popdyn import (check_annealed_rs_equality, de_step, rs_fixed_points,
                             rs_free_energy)

PARITY36 = RegularSpec(3, 6, fg.parity_check_factor(6))


class TestDeStep:
    def test_uniform_populations_stay_uniform(self):
        f = fg.binary_csp_factor(6, 1)  # constant socket marginals
        p = np.full((200, 2), 0.5)
        phat = np.full((200, 2), 0.5)
        rng = np.random.default_rng(0)
        _, drift = de_step(p, phat, f, 3, 6, rng)
        assert drift < 1e-14
        assert np.allclose(p, 0.5) and np.allclose(phat, 0.5)

    def test_delta_population_at_fixed_point_is_invariant(self):
        spec = RegularSpec(10, 20, fg.binary_csp_factor(20, 1))
        mp, rep = fg.solve_regular(spec, SolveOptions(restarts=3, rng_seed=1))
        assert rep.converged
        p = np.tile(mp.m_vf, (300, 1))
        phat = np.tile(mp.m_fv, (300, 1))
        rng = np.random.default_rng(1)
        for _ in range(3):
            _, drift = de_step(p, phat, spec.factor, spec.l, spec.r, rng)
            assert drift < 1e-12

    def test_members_stay_normalized(self):
        rng = np.random.default_rng(5)
        p = rng.dirichlet(np.ones(2), size=150)
        phat = rng.dirichlet(np.ones(2), size=150)
        de_step(p, phat, PARITY36.factor, 3, 6, rng)
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)
        assert np.allclose(phat.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(p >= 0) and np.all(phat >= 0)

    def test_parity_random_init_flows_to_uniform(self):
        rng = np.random.default_rng(7)
        p = rng.dirichlet(np.ones(2), size=400)
        phat = rng.dirichlet(np.ones(2), size=400)
        for _ in range(40):
            de_step(p, phat, PARITY36.factor, 3, 6, rng)
        assert np.max(np.abs(phat - 0.5)) < 1e-3


class TestRsFreeEnergy:
    def test_ones_gives_log_q(self):
        spec = RegularSpec(3, 4, fg.all_ones_factor(4))
        rep = rs_free_energy(spec, PdOptions(population=400, sweeps=40,
                                             samples=4000, rng_seed=2))
        assert rep.value == pytest.approx(math.log(2), abs=1e-9)

    def test_parity_bounded_below_by_annealed(self):
        annealed, _ = fg.annealed_regular(PARITY36, opts=SolveOptions(restarts=2))
        rep = rs_free_energy(PARITY36, PdOptions(population=800, sweeps=30,
                                                 samples=8000, rng_seed=3),
                             init="random")
        assert rep.value >= annealed - 3 * rep.stderr - 1e-9

    def test_stderr_scales_as_inverse_sqrt(self):
        # heterogeneous (unswept) populations give a nonzero sampling variance
        sizes = [500, 2000, 8000, 32000]
        errs = []
        for i, n in enumerate(sizes):
            rep = rs_free_energy(PARITY36, PdOptions(population=500, sweeps=0,
                                                     samples=n, rng_seed=10 + i),
                                 init="random")
            errs.append(rep.stderr)
        slope = np.polyfit(np.log(sizes), np.log(errs), 1)[0]
        assert slope == pytest.approx(-0.5, abs=0.1)

    def test_report_fields(self):
        rep = rs_free_energy(PARITY36, PdOptions(population=300, sweeps=5,
                                                 samples=1500, rng_seed=0))
        assert rep.sweeps == 5
        assert rep.stderr >= 0
        assert len(rep.term_means) == 3


class TestEqualityCheck:
    def test_parity_3_6(self):
        check = check_annealed_rs_equality(
            PARITY36,
            PdOptions(population=800, sweeps=15, samples=8000, rng_seed=4),
            SolveOptions(restarts=3))
        assert check.within_tolerance
        assert check.annealed == pytest.approx(0.5 * math.log(2), abs=1e-10)

    def test_csp_10_20_k1(self):
        spec = RegularSpec(10, 20, fg.binary_csp_factor(20, 1))
        check = check_annealed_rs_equality(
            spec, PdOptions(population=600, sweeps=10, samples=5000, rng_seed=5),
            SolveOptions(restarts=3, max_iters=4000))
        assert check.within_tolerance

    def test_non_perm_invariant_rejected(self):
        f = fg.build_factor_table(2, fg.default_alphabet(2),
                                  {(0, 1): 1.0, (0, 0): 0.5})
        with pytest.raises(ValueError):
            check_annealed_rs_equality(RegularSpec(2, 2, f))


class TestInitializationLibrary:
    def test_three_inits_reported(self):
        reports = rs_fixed_points(PARITY36,
                                  PdOptions(population=300, sweeps=5,
                                            samples=1500, rng_seed=6),
                                  SolveOptions(restarts=2))
        names = {rep.init for rep in reports}
        assert {"uniform-delta", "annealed-delta", "random"} <= names
        assert reports[0].value == max(rep.value for rep in reports)
