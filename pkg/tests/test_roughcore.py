import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from roughflow.errors import DimensionError, InputError, ParameterError
from roughflow.grid import TimeGrid, loglog_slope
from roughflow.roughcore import (
    MAX_DEGREE,
    RoughPath,
    TruncTensor,
    TwoParamFn,
    chen_defect,
    degree_from_exponent,
    delta_defect_norm,
    geometric_lift,
    holder_norm,
    rough_distance,
    sewing_integrate,
    tensor_product,
)
from tests.conftest import fbm_path


class TestDegreeFromExponent:
    @pytest.mark.parametrize("gamma,expected", [
        (0.49, 2), (0.4, 2), (1.0 / 3.0, 3), (0.3, 3), (0.25, 4), (0.2, 5), (0.17, 5),
    ])
    def test_floor_values(self, gamma, expected):
        assert degree_from_exponent(gamma) == expected

    def test_exact_reciprocal_not_bumped_by_rounding(self):
        # 1/0.2 = 5.000000000000001 in floats; the guard must keep p = 5
        assert degree_from_exponent(0.2) == 5

    @pytest.mark.parametrize("gamma", [0.0, -0.1, 0.5, 0.7])
    def test_out_of_range(self, gamma):
        with pytest.raises(ParameterError):
            degree_from_exponent(gamma)

    def test_degree_cap(self):
        assert degree_from_exponent(1.0 / MAX_DEGREE) == MAX_DEGREE
        with pytest.raises(ParameterError):
            degree_from_exponent(0.12)


class TestTruncTensor:
    def test_product_by_hand(self):
        a = TruncTensor([1.0, 2.0, 2.0])
        b = TruncTensor([1.0, 3.0, 4.5])
        assert_allclose(tensor_product(a, b).levels, [1.0, 5.0, 12.5])

    def test_exp_lifts_multiply_by_increment_addition(self):
        a = TruncTensor.exp_lift(0.2, 5)
        b = TruncTensor.exp_lift(0.3, 5)
        assert_allclose(tensor_product(a, b).levels, TruncTensor.exp_lift(0.5, 5).levels,
                        atol=1e-15)

    def test_neutral_element(self):
        e = TruncTensor([1.0, 0.0, 0.0])
        a = TruncTensor([1.0, -0.7, 0.4])
        assert tensor_product(e, a) == a
        assert tensor_product(a, e) == a

    def test_level_zero_must_be_one(self):
        with pytest.raises(InputError):
            TruncTensor([2.0, 1.0])

    def test_degree_mismatch(self):
        with pytest.raises(DimensionError):
            tensor_product(TruncTensor([1.0, 1.0]), TruncTensor([1.0, 1.0, 1.0]))

    @given(x=st.floats(-2, 2), y=st.floats(-2, 2), z=st.floats(-2, 2))
    @settings(max_examples=50, deadline=None)
    def test_product_is_associative(self, x, y, z):
        a, b, c = (TruncTensor.exp_lift(v, 4) for v in (x, y, z))
        left = tensor_product(tensor_product(a, b), c)
        right = tensor_product(a, tensor_product(b, c))
        assert_allclose(left.levels, right.levels, rtol=1e-12, atol=1e-12)


class TestGeometricLift:
    def test_levels_are_powers_over_factorials(self):
        g = TimeGrid(1.0, 8)
        vals = np.sin(3.0 * g.points)
        x = geometric_lift(vals, g, 0.3)
        inc = vals[4] - vals[1]
        for n in range(1, 4):
            assert x.level(n)[1, 4] == pytest.approx(inc**n / math.factorial(n))
        assert x.level(1)[4, 1] == 0.0  # lower triangle unused

    def test_base_path_roundtrip(self):
        g = TimeGrid(2.0, 16)
        vals = np.cos(g.points)
        x = geometric_lift(vals, g, 0.25)
        assert_allclose(x.base_path(), vals - vals[0], atol=1e-15)

    def test_level_count_follows_gamma(self):
        g = TimeGrid(1.0, 8)
        assert geometric_lift(g.points, g, 0.2).degree == 5
        assert geometric_lift(g.points, g, 0.45).degree == 2

    def test_shape_validation(self):
        g = TimeGrid(1.0, 8)
        with pytest.raises(DimensionError):
            geometric_lift(np.zeros(5), g, 0.3)
        with pytest.raises(InputError):
            RoughPath(g, 0.3, [np.zeros((9, 9))])  # needs 3 levels


class TestChenDefect:
    def test_geometric_lift_is_multiplicative(self, rng):
        g = TimeGrid(1.0, 64)
        for p_gamma in (0.4, 0.3, 0.2):
            vals = np.cumsum(rng.standard_normal(g.n_points)) * 0.1
            assert chen_defect(geometric_lift(vals, g, p_gamma)) < 1e-13

    def test_corrupted_level_detected(self, rng):
        g = TimeGrid(1.0, 32)
        vals = np.cumsum(rng.standard_normal(g.n_points)) * 0.1
        x = geometric_lift(vals, g, 0.3)
        x.levels[1][3, 20] += 0.01
        assert chen_defect(x) > 1e-4

    def test_fbm_lift(self):
        path, g = fbm_path(0.25, 128, seed=7)
        assert chen_defect(geometric_lift(path, g, 0.2)) < 1e-12


class TestHolderNorm:
    def test_linear_path_alpha_one(self):
        g = TimeGrid(1.0, 32)
        assert holder_norm(g.points, g, 1.0) == pytest.approx(1.0)

    def test_constant_path_is_zero(self):
        g = TimeGrid(1.0, 32)
        assert holder_norm(np.ones(g.n_points), g, 0.5) == 0.0

    def test_sqrt_scaling_norm(self):
        # |t^0.5 - s^0.5| <= |t-s|^0.5 with equality at s=0
        g = TimeGrid(1.0, 256)
        assert holder_norm(np.sqrt(g.points), g, 0.5) == pytest.approx(1.0, rel=1e-9)

    def test_two_parameter_array(self):
        g = TimeGrid(1.0, 16)
        f = np.triu(np.ones((g.n_points, g.n_points)), k=1)
        # constant 1 against (t-s)^0.5: sup at the smallest lag
        assert holder_norm(f, g, 0.5) == pytest.approx(1.0 / g.dt**0.5)

    def test_validation(self):
        g = TimeGrid(1.0, 16)
        with pytest.raises(ParameterError):
            holder_norm(g.points, g, 0.0)
        with pytest.raises(DimensionError):
            holder_norm(np.zeros(7), g, 0.5)


class TestRoughDistance:
    def test_zero_iff_equal(self, rng):
        g = TimeGrid(1.0, 32)
        vals = np.cumsum(rng.standard_normal(g.n_points)) * 0.1
        x = geometric_lift(vals, g, 0.3)
        assert rough_distance(x, x) == 0.0
        y = geometric_lift(vals + 0.01 * np.sin(g.points), g, 0.3)
        assert rough_distance(x, y) > 0.0

    def test_triangle_inequality(self, rng):
        g = TimeGrid(1.0, 24)
        lifts = [geometric_lift(np.cumsum(rng.standard_normal(g.n_points)) * 0.1, g, 0.3)
                 for _ in range(3)]
        d = rough_distance
        a, b, c = lifts
        assert d(a, c) <= d(a, b) + d(b, c) + 1e-12

    def test_grid_and_gamma_guards(self):
        x = geometric_lift(TimeGrid(1.0, 8).points, TimeGrid(1.0, 8), 0.3)
        y = geometric_lift(TimeGrid(1.0, 16).points, TimeGrid(1.0, 16), 0.3)
        with pytest.raises(DimensionError):
            rough_distance(x, y)
        z = geometric_lift(TimeGrid(1.0, 8).points, TimeGrid(1.0, 8), 0.25)
        with pytest.raises(ParameterError):
            rough_distance(x, z)


class TestSewing:
    def test_exact_germ_reproduces_function(self):
        # Xi_st = F_t - F_s sews to I_t = F_t - F_0 with zero remainder
        g = TimeGrid(1.0, 64)
        f = np.exp(g.points)
        xi = np.triu(f[None, :] - f[:, None], k=1)
        res = sewing_integrate(xi, g, 0.5, 1.2)
        assert_allclose(res.values, f - f[0], atol=1e-14)
        assert res.remainder_constant < 1e-12

    def test_beta_must_exceed_one(self):
        g = TimeGrid(1.0, 8)
        xi = np.zeros((g.n_points, g.n_points))
        with pytest.raises(ParameterError):
            sewing_integrate(xi, g, 0.5, 1.0)
        with pytest.raises(ParameterError):
            sewing_integrate(xi, g, 1.5, 1.2)

    def test_remainder_constant_measures_perturbation(self):
        # adding c*(t-s)^beta to an additive germ leaves a sewing gap of
        # c*dt^beta*(k^beta - k) at lag k, so the constant lies in (c/2, c]
        g = TimeGrid(1.0, 128)
        beta = 1.25
        span = np.triu(g.points[None, :] - g.points[:, None], k=1)
        xi = 2.0 * span + 0.7 * span**beta
        res = sewing_integrate(xi, g, 1.0, beta)
        assert 0.35 < res.remainder_constant <= 0.7 + 1e-12

    def test_young_germ_against_quadrature(self):
        # Xi_st = Y_s (X_t - X_s) for smooth Y, X converges to the
        # Stieltjes integral; check against the closed form at N=512
        g = TimeGrid(1.0, 512)
        y = np.cos(g.points)
        x = np.sin(g.points)
        xi = np.triu(y[:, None] * (x[None, :] - x[:, None]), k=1)
        res = sewing_integrate(xi, g, 0.5, 1.3)
        closed = 0.5 * (1.0 + np.cos(1.0) * np.sin(1.0))  # int cos^2
        assert res.endpoint == pytest.approx(closed, abs=2e-3)

    def test_lag_profile_supports_rate_fit(self):
        # the gap profile k -> dt^beta*(k^beta - k) of a span**beta
        # perturbation fits at slope >= beta (the k-term only steepens it),
        # which is the passing side of every rate criterion built on it
        g = TimeGrid(1.0, 256)
        beta = 1.4
        span = np.triu(g.points[None, :] - g.points[:, None], k=1)
        xi = span + 0.5 * span**beta
        res = sewing_integrate(xi, g, 1.0, beta)
        lags, maxima = res.lag_profile
        keep = maxima > 1e-14
        slope = loglog_slope(lags[keep] * g.dt, maxima[keep])
        assert beta - 0.1 <= slope < 2.0


class TestTwoParam:
    def test_delta_norm_of_additive_function_is_zero(self):
        g = TimeGrid(1.0, 32)
        f = np.exp(g.points)
        vals = np.triu(f[None, :] - f[:, None], k=1)
        fn = TwoParamFn(g, vals, alpha=1.0, beta=1.5)
        assert fn.delta_norm_beta() < 1e-12
        assert fn.norm_alpha() > 0.0

    def test_delta_norm_detects_nonadditivity(self):
        g = TimeGrid(1.0, 32)
        span = np.triu(g.points[None, :] - g.points[:, None], k=1)
        vals = span**1.5
        assert delta_defect_norm(vals, g, 1.5) > 0.1

    def test_stride_upper_bounds_full_scan(self):
        g = TimeGrid(1.0, 64)
        rng = np.random.default_rng(3)
        vals = np.triu(rng.standard_normal((g.n_points, g.n_points)), k=1)
        full = delta_defect_norm(vals, g, 1.2, k_stride=1)
        strided = delta_defect_norm(vals, g, 1.2, k_stride=4)
        assert strided <= full


@given(seed=st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_chen_relation_property(seed):
    rng = np.random.default_rng(seed)
    g = TimeGrid(1.0, 16)
    vals = np.cumsum(rng.standard_normal(g.n_points)) * 0.3
    assert chen_defect(geometric_lift(vals, g, 0.2)) < 1e-13
