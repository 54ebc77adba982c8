"""Cascade model: closed form, adaptive integration, and lemma suites."""

import math

import numpy as np
import pytest

from vortexlab.cascade import (
    CascadeParams,
    CoefficientFamily,
    FixedPointError,
    HolderPrediction,
    SizingError,
    chained_upper_recursion,
    closed_form_cascade,
    fixed_point_a,
    holder_exponent_prediction,
    integrate_cascade,
    lower_envelope,
    lower_envelope_limit,
    remark_bound,
    verify_int_le,
    verify_monotone_ratio,
)


def bisect_oracle(f, lo, hi, tol=1e-12):
    """Independent bisection used to freeze fixed-point expectations."""
    flo = f(lo)
    assert flo * f(hi) < 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if flo * f(mid) <= 0:
            hi = mid
        else:
            lo = mid
            flo = f(mid)
    return 0.5 * (lo + hi)


def rk4_oracle(A, n_levels, t_end, steps=200000):
    """Fixed-step classical RK4 on the unit-coefficient cascade in log space."""
    lnA = math.log(A)
    y = lnA * np.arange(n_levels, dtype=float)
    tril = np.tril(np.ones((n_levels, n_levels)), k=-1)

    def f(y):
        return tril @ np.exp(y)

    h = t_end / steps
    for _ in range(steps):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return np.exp(y)


class TestClosedForm:
    def test_level_zero_is_constant(self):
        traj = closed_form_cascade(1.3, 4, np.linspace(-2, 0, 11))
        assert np.all(traj.levels[0] == 1.0)

    def test_heights_at_time_zero(self):
        A = 1.07
        traj = closed_form_cascade(A, 10, [-0.4, 0.0])
        np.testing.assert_allclose(traj.levels[:, -1], A ** np.arange(10), rtol=1e-14)

    def test_matches_adaptive_rk(self):
        # adaptive RK oracle at tolerance 1e-12 (spec example, A=1.1, n=15)
        times = np.linspace(-0.5, 0.0, 21)
        cf = closed_form_cascade(1.1, 15, times)
        params = CascadeParams(growth_ratio=1.1, n_levels=15, t_min=-0.5,
                               coeff_spec="one", tol=1e-12)
        tr = integrate_cascade(params, times)
        np.testing.assert_allclose(tr.levels, cf.levels, rtol=1e-8)

    def test_matches_fixed_step_rk4_oracle(self):
        x = rk4_oracle(1.1, 8, -0.5)
        cf = closed_form_cascade(1.1, 8, [-0.5])
        np.testing.assert_allclose(cf.levels[:, 0], x, rtol=1e-10)

    def test_satisfies_ode_by_finite_differences(self):
        # d/dt x_k = x_k sum_{j<k} x_j, checked at interior points, O(h^2)
        A, n = 1.2, 6
        t0, h = -0.3, 1e-5
        tr = closed_form_cascade(A, n, [t0 - h, t0, t0 + h])
        x = tr.levels
        deriv = (x[:, 2] - x[:, 0]) / (2 * h)
        rhs = x[:, 1] * np.concatenate([[0.0], np.cumsum(x[:-1, 1])])
        np.testing.assert_allclose(deriv, rhs, rtol=1e-8, atol=1e-12)

    def test_z_recursion_consistency(self):
        # numerically integrated z_k equals A(e^{z_{k-1}} - 1)
        tr = closed_form_cascade(1.15, 5, np.linspace(-0.6, 0, 9))
        for k in range(1, 5):
            np.testing.assert_allclose(
                tr.z[k], 1.15 * np.expm1(tr.z[k - 1]), rtol=1e-13, atol=1e-15)

    def test_overflow_guard(self):
        with pytest.raises(SizingError):
            closed_form_cascade(2.0, 2000, [-0.1])

    def test_rejects_forward_times(self):
        with pytest.raises(ValueError):
            closed_form_cascade(1.1, 3, [0.5])


class TestIntegrateCascade:
    def test_single_level_constant(self):
        params = CascadeParams(growth_ratio=1.5, n_levels=1, t_min=-2.0)
        tr = integrate_cascade(params)
        np.testing.assert_allclose(tr.levels[0], 1.0, rtol=1e-12)

    def test_positivity(self):
        params = CascadeParams(growth_ratio=1.3, n_levels=8, t_min=-1.5,
                               coeff_lo=0.5, coeff_hi=1.5, coeff_spec="random",
                               seed=11)
        tr = integrate_cascade(params)
        assert np.all(tr.levels > 0.0)

    def test_constant_b_equals_rescaled_closed_form(self):
        # a == b constant equals the closed form under t -> b t
        b = 1.3
        times = np.linspace(-0.4, 0.0, 17)
        params = CascadeParams(growth_ratio=1.1, n_levels=8, t_min=-0.4,
                               coeff_spec="constant", coeff_value=b, tol=1e-12)
        tr = integrate_cascade(params, times)
        cf = closed_form_cascade(1.1, 8, b * times)
        np.testing.assert_allclose(tr.levels, cf.levels, rtol=1e-8)

    def test_blowup_envelope_at_zero(self):
        params = CascadeParams(growth_ratio=1.25, n_levels=12, t_min=-0.5,
                               coeff_lo=1.0, coeff_hi=1.2, coeff_spec="random",
                               seed=2)
        tr = integrate_cascade(params)
        np.testing.assert_allclose(tr.levels[:, -1], 1.25 ** np.arange(12),
                                   rtol=1e-9)

    def test_dense_output_matches_samples(self):
        params = CascadeParams(growth_ratio=1.2, n_levels=4, t_min=-1.0,
                               coeff_lo=0.8, coeff_hi=1.0, coeff_spec="random",
                               seed=7)
        tr = integrate_cascade(params)
        f = tr.dense_x(3)
        i = 40
        np.testing.assert_allclose(f(tr.times[i]), tr.levels[3, i], rtol=1e-12)


class TestFixedPoint:
    def test_value_b1_A11(self):
        # frozen from the independent bisection oracle on a = A(1 - e^{-a})
        oracle = bisect_oracle(lambda a: 1.1 * (-math.expm1(-a)) - a, 1e-6, 1.0)
        assert abs(oracle - 0.1937475580) < 1e-9
        assert abs(fixed_point_a(1.1, 1.0) - oracle) < 1e-10

    def test_residual(self):
        for A, b in [(1.05, 1.0), (1.1, 1.2), (1.01, 1.4)]:
            a = fixed_point_a(A, b)
            res = A * math.exp((b - 1) * a) * (-math.expm1(-a)) - a
            assert abs(res) <= 1e-12

    def test_limit_A_to_one(self):
        assert fixed_point_a(1.0001, 1.0) < 3e-4

    def test_remark_bound(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            A = 1.0 + 0.2 * rng.random()
            b = 1.0 + 0.4 * rng.random()
            bound = remark_bound(A, b)
            if bound is None:
                continue
            try:
                a = fixed_point_a(A, b)
            except FixedPointError:
                pytest.fail("remark hypotheses hold but no fixed point found")
            assert a <= bound + 1e-12

    def test_no_root_raises(self):
        with pytest.raises(FixedPointError):
            fixed_point_a(1.2, 1.4)


class TestIntLe:
    def test_equality_case_unit_coefficients(self):
        # with a == 1 the chained recursion is exact: integral == a at all levels
        A = 1.1
        a = fixed_point_a(A, 1.0)
        params = CascadeParams(growth_ratio=A, n_levels=6, t_min=-1.1 * a,
                               coeff_spec="one", tol=1e-12)
        tr = integrate_cascade(params)
        for v in verify_int_le(tr, A, 1.0):
            assert v.passed
            assert abs(v.detail["integral"] - a) < 1e-9

    def test_chained_recursion_constant_at_fixed_point(self):
        A, b = 1.08, 1.1
        a = fixed_point_a(A, b)
        Z = chained_upper_recursion(A, b, a, 10)
        np.testing.assert_allclose(Z, a, rtol=1e-11)

    def test_seeded_random_band(self):
        # small version of the acceptance suite
        A, b = 1.05, 1.3
        a = fixed_point_a(A, b)
        for seed in range(5):
            params = CascadeParams(growth_ratio=A, n_levels=8, t_min=-1.05 * a,
                                   coeff_lo=1.0, coeff_hi=b,
                                   coeff_spec="random", seed=seed)
            tr = integrate_cascade(params)
            assert all(v.passed for v in verify_int_le(tr, A, b))

    def test_precondition_violation(self):
        params = CascadeParams(growth_ratio=1.05, n_levels=3, t_min=-1.0,
                               coeff_lo=0.5, coeff_hi=0.9, coeff_spec="random",
                               seed=0)
        tr = integrate_cascade(params)
        with pytest.raises(ValueError):
            verify_int_le(tr, 1.05, 1.0)


class TestIntGe:
    def test_level_zero_equality(self):
        params = CascadeParams(growth_ratio=1.1, n_levels=3, t_min=-0.7,
                               coeff_lo=0.8, coeff_hi=1.0, coeff_spec="random",
                               seed=1)
        tr = integrate_cascade(params)
        I, verdicts = lower_envelope(tr, 1.1, 0.8, -0.5)
        assert I[0] == 0.5
        assert verdicts[0].passed

    def test_seeded_random_band(self):
        for seed in range(5):
            params = CascadeParams(growth_ratio=1.15, n_levels=8, t_min=-0.9,
                                   coeff_lo=0.7, coeff_hi=1.0,
                                   coeff_spec="random", seed=seed)
            tr = integrate_cascade(params)
            _, verdicts = lower_envelope(tr, 1.15, 0.7, -0.6)
            assert all(v.passed for v in verdicts)

    def test_envelope_limit_above_one(self):
        # A e^{(1-b)t} > 1: I_n increases/decreases to the positive root a'
        A, b, t = 1.2, 0.9, -0.3
        ap = lower_envelope_limit(A, b, t)
        pref = A * math.exp((1 - b) * t)
        assert ap > 0
        assert abs(pref * (-math.expm1(-ap)) - ap) < 1e-11
        I = abs(t)
        for _ in range(5000):
            I = pref * (-math.expm1(-I))
        assert abs(I - ap) < 1e-10

    def test_envelope_limit_below_one(self):
        # A e^{(1-b)t} <= 1: I_n decreases to 0 and the limit is reported as 0
        A, b, t = 1.05, 0.5, -2.0
        pref = A * math.exp((1 - b) * t)
        assert pref < 1.0
        assert lower_envelope_limit(A, b, t) == 0.0
        I = abs(t)
        seq = []
        for _ in range(200):
            I = pref * (-math.expm1(-I))
            seq.append(I)
        assert seq[-1] < 1e-3 and all(np.diff(seq) < 0)


class TestMonotoneRatio:
    def test_unit_coefficients(self):
        params = CascadeParams(growth_ratio=1.3, n_levels=6, t_min=-1.0,
                               coeff_spec="one")
        tr = integrate_cascade(params)
        assert verify_monotone_ratio(tr).passed

    def test_seeded_shared_random(self):
        for seed in range(5):
            params = CascadeParams(growth_ratio=1.2, n_levels=6, t_min=-1.0,
                                   coeff_lo=0.3, coeff_hi=2.0,
                                   coeff_spec="random", shared_coeffs=True,
                                   seed=seed)
            tr = integrate_cascade(params)
            assert verify_monotone_ratio(tr).passed

    def test_equal_levels_ratio_constant(self):
        params = CascadeParams(growth_ratio=1.2, n_levels=4, t_min=-0.5,
                               coeff_spec="one")
        tr = integrate_cascade(params)
        ratio = tr.levels[2] / tr.levels[2]
        np.testing.assert_allclose(ratio, 1.0)

    def test_rejects_non_shared(self):
        params = CascadeParams(growth_ratio=1.2, n_levels=4, t_min=-0.5,
                               coeff_lo=0.5, coeff_hi=1.5, coeff_spec="random",
                               seed=0)
        tr = integrate_cascade(params)
        with pytest.raises(ValueError):
            verify_monotone_ratio(tr)


class TestHolderPrediction:
    def test_a0_exceeds_lnA(self):
        for A in [1.01, 1.05, 1.2, 1.8]:
            h = holder_exponent_prediction(A, 0.2)
            assert h.a_zero > math.log(A)

    def test_small_A_limit(self):
        h = holder_exponent_prediction(1.0005, 0.2)
        assert 0.0 < h.exponent < 5e-3

    def test_flagged_when_prefactor_below_one(self):
        # b < 1 with very negative t drives A e^{(1-b)t} below 1
        h = holder_exponent_prediction(1.05, 0.2, b=0.5, t=-1.0)
        assert not h.positive and h.note

    def test_matches_cascade_asymptotics(self):
        # measured exponent ln x_k(t) / (k ln r + y_k(t) - y_k(0)) approaches
        # the prediction as k grows; the approach is slow (z_k -> -a' is
        # geometric with ratio A e^{-a'} close to 1)
        A, r, t = 1.05, 0.2, -0.05
        h = holder_exponent_prediction(A, r, 1.0, t)

        def measured(k):
            traj = closed_form_cascade(A, k + 1, [t])
            y_t = traj.log_levels[k, 0]
            return y_t / (k * math.log(r) + (y_t - k * math.log(A)))

        gaps = [abs(measured(k) - h.exponent) / h.exponent for k in (40, 800)]
        assert gaps[1] < gaps[0]          # monotone approach (O(1/k) correction)
        assert gaps[1] < 0.05             # close at deep k


class TestCoefficients:
    def test_deterministic(self):
        f1 = CoefficientFamily(4, -1.0, 0.5, 1.5, seed=9)
        f2 = CoefficientFamily(4, -1.0, 0.5, 1.5, seed=9)
        np.testing.assert_array_equal(f1.values, f2.values)

    def test_band_respected(self):
        f = CoefficientFamily(5, -1.0, 0.7, 1.3, seed=4)
        assert f.values.min() >= 0.7 and f.values.max() <= 1.3

    def test_csv_rows(self):
        tr = closed_form_cascade(1.1, 3, [-0.5, 0.0])
        rows = tr.to_csv_rows()
        assert len(rows) == 6
        assert rows[0][0] == -0.5 and rows[0][1] == 0
