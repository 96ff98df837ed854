import numpy as np
import pytest
from numpy.testing import assert_allclose

from roughflow.errors import DimensionError, ParameterError
from roughflow.grid import (
    TimeGrid,
    check_same_grid,
    dyadic_lags,
    holder_norm_from_maxima,
    lag_maxima,
    loglog_slope,
    path_increment_maxima,
)


class TestTimeGrid:
    def test_points_and_step(self):
        g = TimeGrid(2.0, 4)
        assert g.n_points == 5
        assert g.dt == 0.5
        assert_allclose(g.points, [0.0, 0.5, 1.0, 1.5, 2.0])

    def test_validation(self):
        with pytest.raises(ParameterError):
            TimeGrid(0.0, 8)
        with pytest.raises(ParameterError):
            TimeGrid(-1.0, 8)
        with pytest.raises(ParameterError):
            TimeGrid(1.0, 1)

    def test_equality_and_hash(self):
        assert TimeGrid(1.0, 8) == TimeGrid(1.0, 8)
        assert TimeGrid(1.0, 8) != TimeGrid(1.0, 16)
        assert hash(TimeGrid(1.0, 8)) == hash(TimeGrid(1.0, 8))

    def test_index_of(self):
        g = TimeGrid(1.0, 10)
        assert g.index_of(0.0) == 0
        assert g.index_of(0.3) == 3
        assert g.index_of(1.0) == 10
        with pytest.raises(ParameterError):
            g.index_of(0.35)
        with pytest.raises(ParameterError):
            g.index_of(1.2)

    def test_coarsen(self):
        g = TimeGrid(1.0, 16)
        c = g.coarsen(4)
        assert c.n_steps == 4
        assert_allclose(c.points, g.points[::4])
        with pytest.raises(ParameterError):
            g.coarsen(3)

    def test_check_same_grid(self):
        check_same_grid(TimeGrid(1.0, 8), TimeGrid(1.0, 8))
        with pytest.raises(DimensionError):
            check_same_grid(TimeGrid(1.0, 8), TimeGrid(2.0, 8))


class TestLagMaxima:
    def test_matches_brute_force(self, rng):
        vals = np.triu(rng.standard_normal((12, 12)), k=1)
        lags, maxima = lag_maxima(vals)
        for lag, mx in zip(lags, maxima):
            brute = max(abs(vals[i, i + lag]) for i in range(12 - lag))
            assert mx == pytest.approx(brute)

    def test_path_increments(self):
        path = np.array([0.0, 1.0, 3.0, 2.0])
        lags, maxima = path_increment_maxima(path, np.array([1, 2, 3]))
        assert_allclose(maxima, [2.0, 3.0, 2.0])

    def test_holder_norm_linear_path(self):
        # |t - s| increments against alpha = 1 give norm exactly 1
        g = TimeGrid(1.0, 32)
        lags, maxima = path_increment_maxima(g.points)
        assert holder_norm_from_maxima(lags, maxima, g.dt, 1.0) == pytest.approx(1.0)


class TestDyadicLags:
    def test_powers_of_two_plus_top(self):
        lags = dyadic_lags(16)
        assert lags.tolist() == [1, 2, 4, 8, 16]

    def test_non_power_grid_stops_below_top(self):
        assert dyadic_lags(12).tolist() == [1, 2, 4, 8]

    def test_min_lag_scales_sequence(self):
        assert dyadic_lags(16, min_lag=3).tolist() == [3, 6, 12]


class TestLoglogSlope:
    def test_exact_power_law(self):
        x = np.array([1.0, 2.0, 4.0, 8.0])
        assert loglog_slope(x, 3.0 * x**1.7) == pytest.approx(1.7)

    def test_rejects_nonpositive(self):
        with pytest.raises(ParameterError):
            loglog_slope(np.array([1.0, 2.0]), np.array([1.0, 0.0]))
