import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fganneal import (
    Alphabet,
    BudgetExceeded,
    RegularSpec,
    all_ones_factor,
    binary_csp_factor,
    build_factor_table,
    default_alphabet,
    design_rate,
    equality_factor,
    load_factor_table,
    not_equal_factor,
    parity_check_factor,
    replicate_factor,
    save_factor_table,
)

B = default_alphabet(2)


class TestAlphabet:
    def test_needs_two_symbols(self):
        with pytest.raises(ValueError):
            Alphabet(("a",))

    def test_labels_unique(self):
        with pytest.raises(ValueError):
            Alphabet(("a", "a"))

    def test_index(self):
        a = default_alphabet(3)
        assert a.q == 3
        assert a.index("2") == 2


class TestBuildFactorTable:
    def test_uniform_unary(self):
        f = build_factor_table(1, B, {0: 1.0, 1: 1.0})
        assert f.values.tolist() == [1.0, 1.0]
        assert f.perm_invariant

    def test_not_equal_perm_invariant(self):
        f = build_factor_table(2, B, {(0, 1): 1.0, (1, 0): 1.0})
        assert f.perm_invariant
        assert f.total == 2.0

    def test_asymmetric_detected(self):
        f = build_factor_table(2, B, {(0, 1): 1.0})
        assert not f.perm_invariant

    def test_missing_entries_default_zero(self):
        f = build_factor_table(2, B, {(0, 0): 2.0})
        assert f.values[1, 1] == 0.0

    def test_negative_value_rejected(self):
        with pytest.raises(ValueError):
            build_factor_table(1, B, {0: -1.0})

    def test_all_zero_rejected(self):
        with pytest.raises(ValueError):
            build_factor_table(2, B, {(0, 0): 0.0})

    def test_arity_mismatch_rejected(self):
        with pytest.raises(ValueError):
            build_factor_table(2, B, {(0, 1, 0): 1.0})

    def test_false_perm_declaration_rejected(self):
        with pytest.raises(ValueError):
            build_factor_table(2, B, {(0, 1): 1.0}, perm_invariant=True)

    def test_size_cap(self):
        with pytest.raises(BudgetExceeded):
            build_factor_table(4, B, {(0, 0, 0, 0): 1.0}, max_entries=8)

    def test_large_table_requires_declaration(self):
        import fganneal.factors as fx
        big = np.ones((2,) * 21)  # above the exhaustive permutation-check limit
        with pytest.raises(ValueError, match="perm_invariant"):
            fx.FactorTable(21, B, big)
        f = fx.FactorTable(21, B, big, perm_invariant=True)  # sampled spot check
        assert f.perm_invariant


class TestBinaryCsp:
    def test_r4_k1_zero_on_weight_two(self):
        f = binary_csp_factor(4, 1)
        zeros = [t for t in itertools.product((0, 1), repeat=4) if f.values[t] == 0]
        assert len(zeros) == 6
        assert all(sum(t) == 2 for t in zeros)

    def test_r20_k3_count_is_binomial_sum(self):
        f = binary_csp_factor(20, 3)
        expected = sum(math.comb(20, i) for i in range(21) if not (7 < i < 13))
        assert f.total == expected

    def test_r2_k1_is_equality(self):
        f = binary_csp_factor(2, 1)
        assert np.array_equal(f.values, equality_factor().values)

    def test_odd_r_rejected(self):
        with pytest.raises(ValueError):
            binary_csp_factor(5, 1)

    def test_k_out_of_range(self):
        with pytest.raises(ValueError):
            binary_csp_factor(4, 3)

    @given(st.integers(min_value=2, max_value=12).filter(lambda r: r % 2 == 0),
           st.data())
    @settings(max_examples=25, deadline=None)
    def test_always_perm_invariant(self, r, data):
        k = data.draw(st.integers(min_value=1, max_value=r // 2))
        assert binary_csp_factor(r, k).perm_invariant


class TestParity:
    def test_r2_is_equality(self):
        assert np.array_equal(parity_check_factor(2).values, equality_factor().values)

    def test_r3_four_satisfying(self):
        assert parity_check_factor(3).total == 4

    def test_r6_count(self):
        assert parity_check_factor(6).total == 32  # 2^(r-1)

    def test_non_binary_rejected(self):
        with pytest.raises(ValueError):
            parity_check_factor(3, default_alphabet(3))


class TestReplicate:
    def test_identity(self):
        f = not_equal_factor()
        assert replicate_factor(f, 1) is f

    def test_not_equal_pairs(self):
        f2 = replicate_factor(not_equal_factor(), 2)
        assert f2.q == 4
        assert f2.total == 4.0  # both replicas must differ: 2 choices each
        assert f2.values[f2.alphabet.index("0|1"), f2.alphabet.index("1|0")] == 1.0

    def test_ones(self):
        f2 = replicate_factor(all_ones_factor(2), 2)
        assert np.all(f2.values == 1.0)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_total_is_power(self, n):
        for f in (not_equal_factor(), parity_check_factor(3), binary_csp_factor(4, 2)):
            assert replicate_factor(f, n).total == pytest.approx(f.total ** n)

    def test_budget(self):
        with pytest.raises(BudgetExceeded):
            replicate_factor(binary_csp_factor(20, 1), 2)


class TestSocketMarginals:
    def test_exhaustive_against_enumeration(self):
        f = binary_csp_factor(6, 2)
        s = np.zeros(2)
        for t in itertools.product((0, 1), repeat=6):
            for i, x in enumerate(t):
                s[x] += f.values[t]
        assert np.allclose(f.socket_marginals(), s)
        assert f.has_constant_socket_marginals()

    def test_nonconstant(self):
        f = build_factor_table(2, B, {(0, 0): 1.0, (0, 1): 1.0})
        assert not f.has_constant_socket_marginals()


class TestDesignRate:
    def test_ones_gives_log_q(self):
        for q in (2, 3, 4):
            spec = RegularSpec(3, 4, all_ones_factor(4, default_alphabet(q)))
            assert design_rate(spec) == pytest.approx(math.log(q), abs=1e-14)

    def test_parity_3_6(self):
        spec = RegularSpec(3, 6, parity_check_factor(6))
        assert design_rate(spec) == pytest.approx(0.5 * math.log(2), abs=1e-14)

    def test_csp_10_20_k1(self):
        nf = sum(math.comb(20, i) for i in range(21) if i != 10)
        spec = RegularSpec(10, 20, binary_csp_factor(20, 1))
        expected = math.log(2) + 0.5 * math.log(nf / 2 ** 20)
        assert design_rate(spec) == pytest.approx(expected, abs=1e-14)

    def test_precondition_checked(self):
        bad = build_factor_table(2, B, {(0, 0): 1.0, (0, 1): 1.0})
        with pytest.raises(ValueError):
            design_rate(RegularSpec(2, 2, bad))


class TestTextFormat:
    def test_round_trip(self, tmp_path):
        f = binary_csp_factor(4, 1)
        path = tmp_path / "f.txt"
        save_factor_table(f, path)
        g = load_factor_table(path)
        assert np.array_equal(f.values, g.values)
        assert g.perm_invariant

    def test_round_trip_weighted(self, tmp_path):
        f = build_factor_table(2, default_alphabet(3), {(0, 1): 0.25, (2, 2): 1.5})
        path = tmp_path / "w.txt"
        save_factor_table(f, path)
        g = load_factor_table(path)
        assert np.array_equal(f.values, g.values)

    def test_header_checked(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("2\n0 1 1.0\n")
        with pytest.raises(ValueError):
            load_factor_table(path)
