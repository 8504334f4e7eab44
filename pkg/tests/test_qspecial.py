import math

import numpy as np
import pytest

from qtangent.errors import DivergentTerm, NonConvergent, TruncationExceeded
from qtangent.qspecial import (
    DEFAULT_POLICY,
    QParams,
    TruncationPolicy,
    phi_qk,
    phi_star,
    psi_qk,
    psi_star,
    q_pochhammer_inf,
    tail_product_ratio,
)


def brute_pochhammer(a, q, terms):
    prod = 1.0
    for k in range(terms):
        prod *= 1.0 - a * q ** k
    return prod


class TestQParams:
    def test_endpoints(self):
        p = QParams(0.0)
        assert p.x_plus == 2.0
        assert p.x_minus == -2.0

    def test_symmetry_and_monotonicity(self):
        qs = [-0.9, -0.5, 0.0, 0.5, 0.9]
        xps = [QParams(q).x_plus for q in qs]
        assert all(QParams(q).x_plus == -QParams(q).x_minus for q in qs)
        assert all(b > a for a, b in zip(xps, xps[1:]))

    @pytest.mark.parametrize("q", [-1.0, 1.0, 1.5])
    def test_invalid_q(self, q):
        with pytest.raises(NonConvergent):
            QParams(q)


class TestPochhammer:
    def test_a_zero(self):
        assert q_pochhammer_inf(0.0, 0.5) == 1.0

    def test_q_zero_single_factor(self):
        assert q_pochhammer_inf(0.5, 0.0) == 0.5

    def test_against_brute_force(self):
        # partial product stabilizes well before 60 terms at q = 0.5
        expected = brute_pochhammer(0.5, 0.5, 61)
        got = q_pochhammer_inf(0.5, 0.5)
        assert got == pytest.approx(expected, rel=1e-13)

    def test_negative_q(self):
        expected = brute_pochhammer(0.3, -0.7, 200)
        assert q_pochhammer_inf(0.3, -0.7) == pytest.approx(expected, rel=1e-13)

    def test_exact_zero_when_a_hits_inverse_power(self):
        # a = q^{-1} makes the k = 1 factor vanish exactly
        assert q_pochhammer_inf(2.0, 0.5) == 0.0

    def test_nonconvergent(self):
        with pytest.raises(NonConvergent):
            q_pochhammer_inf(0.5, 1.0)

    def test_truncation_exceeded(self):
        with pytest.raises(TruncationExceeded):
            q_pochhammer_inf(0.5, 0.999, TruncationPolicy(rel_tol=1e-14, k_max=3))

    def test_kmax_doubling_stability(self):
        base = q_pochhammer_inf(0.7, 0.9, TruncationPolicy(1e-14, 5000))
        double = q_pochhammer_inf(0.7, 0.9, TruncationPolicy(1e-14, 10000))
        assert abs(double - base) <= 1e-14 * abs(base)

    def test_underflow_near_q_one_is_graceful(self):
        # (q; q)_inf ~ exp(-pi^2/(6(1-q))) collapses below double range near 1
        val = q_pochhammer_inf(0.999, 0.999, TruncationPolicy(1e-14, 100_000))
        assert val == 0.0


class TestPhiPsi:
    def test_phi_qk_large_k_is_one(self):
        assert phi_qk(0.5, 2000, 0.7, 1.0, -1.0) == 1.0

    def test_phi_qk_q_zero_k_positive(self):
        assert phi_qk(0.0, 1, 1.0, 1.0, 1.0) == 1.0

    def test_phi_q0_hyperbolic_identity_spot(self):
        # cross-check via the sinh/cosh rearrangement of the k = 0 form
        q, d, x, y = 0.5, 0.3, 0.2, -0.1
        expected = math.exp(-2 * d) * (
            4 * math.sinh(d) ** 2 + (1 - q) * (x - y) ** 2
            + 2 * (1 - q) * x * y * (1 - math.cosh(d))
        )
        assert phi_qk(q, 0, d, x, y) == pytest.approx(expected, rel=1e-14)

    def test_phi_q0_hyperbolic_identity_randomized(self):
        gen = np.random.default_rng(42)
        for _ in range(200):
            q = gen.uniform(-0.95, 0.95)
            d = gen.uniform(0.01, 5.0)
            xp = 2 / math.sqrt(1 - q)
            x, y = gen.uniform(-xp, xp, 2)
            expected = math.exp(-2 * d) * (
                4 * math.sinh(d) ** 2 + (1 - q) * (x - y) ** 2
                + 2 * (1 - q) * x * y * (1 - math.cosh(d))
            )
            assert phi_qk(q, 0, d, x, y) == pytest.approx(expected, rel=1e-12)

    def test_phi_symmetry(self):
        gen = np.random.default_rng(7)
        for _ in range(50):
            q = gen.uniform(-0.9, 0.9)
            d = gen.uniform(0.05, 3.0)
            x, y = gen.uniform(-1.5, 1.5, 2)
            k = gen.integers(0, 5)
            assert phi_qk(q, k, d, x, y) == phi_qk(q, k, d, y, x)

    def test_phi_lower_bound_product_form(self):
        # min over the state square is (1 - e^{-d} |q|^k)^4
        gen = np.random.default_rng(3)
        for _ in range(300):
            q = gen.uniform(-0.9, 0.9)
            d = gen.uniform(0.05, 3.0)
            xp = 2 / math.sqrt(1 - q)
            x, y = gen.uniform(-xp, xp, 2)
            k = int(gen.integers(0, 8))
            bound = (1 - math.exp(-d) * abs(q) ** k) ** 4
            assert phi_qk(q, k, d, x, y) >= bound - 1e-12

    def test_phi_q0_sinh4_bound(self):
        gen = np.random.default_rng(4)
        for _ in range(300):
            q = gen.uniform(-0.9, 0.9)
            d = gen.uniform(0.05, 3.0)
            xp = 2 / math.sqrt(1 - q)
            x, y = gen.uniform(-xp, xp, 2)
            bound = math.exp(-2 * d) * (16 * math.sinh(d / 2) ** 4 + (1 - q) * (x - y) ** 2)
            assert phi_qk(q, 0, d, x, y) >= bound - 1e-12

    def test_psi_qk_values(self):
        assert psi_qk(0.0, 1, 123.0) == 1.0
        assert psi_qk(0.5, 1, 0.0) == 2.25
        assert psi_qk(0.5, 2, 1.0) == pytest.approx(1.4375, abs=0)

    def test_phi_star_q_zero(self):
        assert phi_star(0.0, 1, 1.0, 2.0, 0.3, -5.0) == 4.0

    def test_psi_star_q_zero(self):
        assert psi_star(0.0, 1, 1.0, 2.0, 1.0) == 4.0

    def test_phi_star_k0_spot(self):
        assert phi_star(0.0, 0, 1.0, 2.0, 0.5, 0.5) == pytest.approx(1.0, abs=1e-15)


class TestTailProductRatio:
    def test_q_zero_is_one(self):
        val = tail_product_ratio(0.0, lambda k: 1.0 + 0.0 ** k, lambda k: 1.0)
        assert val == pytest.approx(1.0)

    def test_identical_sequences_cancel(self):
        term = lambda k: 1.0 + 0.5 ** k
        assert tail_product_ratio(0.5, term, term) == 1.0

    def test_matches_kernel_factorization(self):
        # same product the q-OU kernel accumulates internally
        q, d, x, y = 0.6, 0.8, 0.4, -0.9
        e1, e2 = math.exp(-d), math.exp(-2 * d)
        num = lambda k: (1 - e2 * q ** k) * psi_qk(q, k, y)
        den = lambda k: phi_qk(q, k, d, x, y)
        got = tail_product_ratio(q, num, den)
        brute = 1.0
        for k in range(1, 400):
            brute *= num(k) / den(k)
        assert got == pytest.approx(brute, rel=1e-12)

    def test_divergent_term(self):
        num = lambda k: 1.0 + 0.5 ** k
        den = lambda k: -1.0 if k == 3 else 1.0 + 0.5 ** k
        with pytest.raises(DivergentTerm):
            tail_product_ratio(0.5, num, den)

    def test_partial_product_excursion_beyond_double_range(self):
        # partials spike to ~1e300 and recover; the final value stays representable
        def num(k):
            if k == 1:
                return 1e300
            if k == 2:
                return 1e-300
            return 1.0 + 0.5 ** k

        got = tail_product_ratio(0.5, num, lambda k: 1.0)
        brute = 1.0
        for k in range(3, 200):
            brute *= 1.0 + 0.5 ** k
        assert got == pytest.approx(brute, rel=1e-12)

    def test_truncation_exceeded(self):
        slow = lambda k: 1.0 + 1.0 / (k + 1.0)  # not geometric
        with pytest.raises(TruncationExceeded):
            tail_product_ratio(0.9, slow, lambda k: 1.0, TruncationPolicy(1e-14, 50))


def test_default_policy_values():
    assert DEFAULT_POLICY.rel_tol == 1e-14
    assert DEFAULT_POLICY.k_max == 10_000


def test_policy_validation():
    with pytest.raises(ValueError):
        TruncationPolicy(rel_tol=0.0)
    with pytest.raises(ValueError):
        TruncationPolicy(k_max=0)
