import math

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moebius_lab.numeric import ConvergenceError, DomainError, NumericContext
from moebius_lab.series import (
    PowerSeries,
    alpha_series,
    beta_series,
    eval_series,
    guard_bits,
    hardy_H,
    hardy_series,
    load_coefficients,
    monomial_series,
    polynomial,
    riesz_R,
    riesz_series,
    star_series,
    working_precision,
)
from moebius_lab.zeta import zeta_int

TIGHT = NumericContext(tolerance=1e-20)


def _direct(coeff, x, terms, prec=400):
    """Plain high-precision partial sum used as a reference."""
    with mpmath.workprec(prec):
        return mpmath.fsum(coeff(n) * mpmath.mpf(x) ** n for n in range(1, terms))


class TestEvalSeries:
    def test_zero_series(self):
        r = eval_series(polynomial({}), 3.0)
        assert r.value == 0 and r.error == 0

    def test_exponential_minus_one(self):
        s = PowerSeries(lambda n, p: 1 / mpmath.factorial(n), lambda n: 1 / mpmath.factorial(n),
                        ratio_monotone=True, name="exp-1")
        r = eval_series(s, 1.0, TIGHT)
        with mpmath.workprec(100):
            assert abs(r.value - (mpmath.e - 1)) <= r.error
        assert r.certified

    def test_radius_enforced(self):
        geometric = PowerSeries(lambda n, p: mpmath.mpf(1), lambda n: 1, radius=1.0)
        with pytest.raises(DomainError):
            eval_series(geometric, 1.5)

    def test_nonpositive_x_rejected(self):
        with pytest.raises(DomainError):
            eval_series(riesz_series(), 0.0)

    def test_max_terms(self):
        slow = PowerSeries(lambda n, p: mpmath.mpf(1) / n**2, lambda n: 1 / n**2, radius=1.0)
        with pytest.raises(ConvergenceError):
            eval_series(slow, 0.999, NumericContext(tolerance=1e-30, max_terms=200))


class TestPresets:
    def test_riesz_tiny_x(self):
        x = 1e-6
        r = riesz_R(x)
        leading = x / float(zeta_int(2))
        assert abs(float(r.value) - leading) <= x**2 / float(zeta_int(4)) + r.error

    def test_riesz_positive_near_zero(self):
        assert riesz_R(1e-8).value > 0

    def test_hardy_tiny_x(self):
        x = 1e-6
        r = hardy_H(x)
        assert abs(float(r.value) + x / float(zeta_int(3))) <= x**2 / (2 * float(zeta_int(5))) + r.error

    def test_hardy_vanishes_at_zero(self):
        assert abs(hardy_H(1e-300).value) < 1e-299

    @pytest.mark.parametrize("x, expected", [
        (1.0, 0.0439818046882665),
        (10.0, -0.780675581252196),
        (100.0, -0.151937244547233),
    ])
    def test_riesz_frozen_values(self, x, expected):
        r = riesz_R(x)
        assert abs(float(r.value) - expected) <= r.error + 1e-15

    @pytest.mark.parametrize("x, expected", [(1.0, -0.480533800796074), (50.0, -0.0367629795630369)])
    def test_hardy_frozen_values(self, x, expected):
        r = hardy_H(x)
        assert abs(float(r.value) - expected) <= r.error + 1e-15

    def test_riesz_against_direct_sum(self):
        ref = _direct(lambda n: (-1) ** (n + 1) / (mpmath.factorial(n - 1) * mpmath.zeta(2 * n)), 10, 120)
        r = riesz_R(10.0, TIGHT)
        assert abs(r.value - ref) <= r.error

    def test_riesz_guard_bits_stable_at_10(self):
        a = riesz_R(10.0, TIGHT)
        b = riesz_R(10.0, TIGHT.replace(guard_bits=TIGHT.guard_bits + 64))
        assert abs(a.value - b.value) <= 1e-18

    @pytest.mark.parametrize("fn, x", [(riesz_R, 1), (riesz_R, 10), (riesz_R, 50), (riesz_R, 100),
                                       (hardy_H, 1), (hardy_H, 10), (hardy_H, 50), (hardy_H, 100)])
    def test_error_is_honest(self, fn, x):
        ctx = NumericContext(tolerance=1e-15)
        lo = fn(float(x), ctx)
        hi = fn(float(x), ctx.replace(guard_bits=ctx.guard_bits + 64, tolerance=1e-30))
        with mpmath.workprec(hi.info["working_precision"]):
            assert abs(lo.value - hi.value) <= lo.error

    def test_alpha_beta_closed_forms(self):
        for x in (0.3, 1.0, 2.5):
            a = eval_series(alpha_series(), x, TIGHT)
            b = eval_series(beta_series(), x, TIGHT)
            assert float(a.value) == pytest.approx(x * (1 - 2 * x * x) * math.exp(-x * x), abs=1e-15)
            assert float(b.value) == pytest.approx(-2 * x * x * math.exp(-x * x), abs=1e-15)

    def test_coefficient_bounds_dominate(self):
        for s in (riesz_series(), hardy_series(), alpha_series(), beta_series()):
            for n in range(1, 101):
                # coefficient at 128 bits, bound at 53: allow one rounding of the latter
                assert abs(s.coeff(n, 128)) <= s.bound(n) * (1 + 2.0**-50)


class TestGuardLaw:
    @pytest.mark.parametrize("x", [1, 10, 50, 100])
    def test_guard_bits_formula(self, x):
        expected = math.ceil(x * math.log2(math.e)) + math.ceil(math.log2(max(x, 2))) + 32
        assert guard_bits(x, 32) == expected
        assert working_precision(x, NumericContext()) == 128 + expected

    def test_evaluation_uses_guard_law(self):
        r = riesz_R(100.0)
        assert r.info["working_precision"] == working_precision(100.0, NumericContext())

    def test_largest_term_within_law(self):
        for x in (1.0, 10.0, 50.0, 100.0):
            r = riesz_R(x)
            assert r.info["max_abs_sum"] <= x * math.exp(x) * 1.0001
            h = hardy_H(x)
            assert h.info["max_abs_sum"] <= math.exp(x) * 1.0001


class TestStarSeries:
    def test_linear_monomial(self):
        s = star_series(monomial_series(1))
        with mpmath.workprec(128):
            assert abs(s.coeff(1, 128) - 6 / mpmath.pi**2) < mpmath.mpf(2) ** -120

    def test_zero_series(self):
        s = star_series(polynomial({}))
        assert eval_series(s, 2.0).value == 0

    def test_alpha_star_is_riesz(self):
        for x in (0.5, 1.0, 2.0):
            a = eval_series(star_series(alpha_series()), x, TIGHT)
            r = riesz_R(x * x, TIGHT)
            with mpmath.workprec(200):
                assert abs(a.value - r.value / x) <= a.error + r.error / x

    def test_beta_star_is_hardy(self):
        for x in (0.5, 1.0, 2.0):
            b = eval_series(star_series(beta_series()), x, TIGHT)
            h = hardy_H(x * x, TIGHT)
            with mpmath.workprec(200):
                assert abs(b.value - h.value) <= b.error + h.error

    @given(st.dictionaries(st.integers(1, 30), st.integers(-50, 50).filter(bool), min_size=1, max_size=6),
           st.floats(0.1, 3))
    @settings(max_examples=20, deadline=None)
    def test_matches_manual_star(self, coeffs, x):
        starred = eval_series(star_series(polynomial(coeffs)), x, TIGHT)
        with mpmath.workprec(200):
            manual = mpmath.fsum(a * mpmath.mpf(x) ** n / (n * mpmath.zeta(n + 1)) for n, a in coeffs.items())
            assert abs(starred.value - manual) <= starred.error + mpmath.mpf(10) ** -25


class TestCoefficientFile:
    def test_load(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("# cubic\n1 0.5\n3 -2  # comment\n")
        s = load_coefficients(path)
        assert s.degree == 3
        assert float(eval_series(s, 2.0).value) == pytest.approx(1 - 16)

    @pytest.mark.parametrize("text", ["1 2\n1 3\n", "0 1\n", "1\n", "x 1\n", "# nothing\n"])
    def test_rejects_bad_files(self, tmp_path, text):
        path = tmp_path / "c.txt"
        path.write_text(text)
        with pytest.raises(ValueError):
            load_coefficients(path)
