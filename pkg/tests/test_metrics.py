import numpy as np
import pytest

from powernet.metrics import ErrorCurve, MetricError, error_curve, mape, mse


def mse_oracle(a, f):
    """Definitional loop."""
    total = 0.0
    for x, y in zip(a, f):
        total += (x - y) ** 2
    return total / len(a)


def mape_oracle(a, f, floor=1e-6):
    terms = [abs((x - y) / x) for x, y in zip(a, f) if abs(x) > floor]
    return 100.0 * sum(terms) / len(terms)


class TestMse:
    def test_perfect_forecast_is_zero(self):
        a = np.array([1.0, 2.0, 3.0])
        assert mse(a, a) == 0.0

    def test_hand_computed(self):
        # errors 1, -2, 0 -> (1 + 4 + 0) / 3
        assert mse([1, 2, 3], [0, 4, 3]) == pytest.approx(5 / 3, abs=1e-15)

    def test_matches_oracle_on_random_fixtures(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            n = int(rng.integers(1, 200))
            a = rng.normal(2, 1, n)
            f = rng.normal(2, 1, n)
            assert mse(a, f) == pytest.approx(mse_oracle(a, f), abs=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        a, f = rng.normal(size=50), rng.normal(size=50)
        assert mse(a, f) == mse(f, a)

    def test_shape_mismatch(self):
        with pytest.raises(MetricError):
            mse([1, 2], [1, 2, 3])

    def test_empty(self):
        with pytest.raises(MetricError):
            mse([], [])


class TestMape:
    def test_perfect_forecast_is_zero(self):
        a = np.array([1.0, 2.0])
        assert mape(a, a) == 0.0

    def test_hand_computed_percent(self):
        # |2-1|/2 and |4-5|/4 -> (0.5 + 0.25)/2 * 100 = 37.5
        assert mape([2, 4], [1, 5]) == pytest.approx(37.5, abs=1e-12)

    def test_matches_oracle_on_random_fixtures(self):
        rng = np.random.default_rng(2)
        for _ in range(30):
            n = int(rng.integers(1, 200))
            a = rng.uniform(0.5, 3.0, n)
            f = a + rng.normal(0, 0.3, n)
            assert mape(a, f) == pytest.approx(mape_oracle(a, f), abs=1e-12)

    def test_zero_actuals_excluded(self):
        # only the nonzero term contributes
        assert mape([0.0, 2.0], [1.0, 1.0]) == pytest.approx(50.0, abs=1e-12)

    def test_all_zero_actuals_rejected(self):
        with pytest.raises(MetricError, match="floor"):
            mape([0.0, 0.0], [1.0, 1.0])

    def test_negative_floor_rejected(self):
        with pytest.raises(MetricError):
            mape([1.0], [1.0], zero_floor=-1.0)


class TestErrorCurve:
    def test_cumulative_prefix_definition(self):
        rng = np.random.default_rng(3)
        a = rng.uniform(0.5, 3.0, 60)
        f = a + rng.normal(0, 0.2, 60)
        c = error_curve(a, f, window=24)
        for i in (0, 7, 30, 59):
            assert c.cum_mse[i] == pytest.approx(mse(a[:i + 1], f[:i + 1]), abs=1e-12)
            assert c.cum_mape[i] == pytest.approx(mape(a[:i + 1], f[:i + 1]), abs=1e-12)

    def test_rolling_window_definition(self):
        rng = np.random.default_rng(4)
        a = rng.uniform(0.5, 3.0, 60)
        f = a + rng.normal(0, 0.2, 60)
        c = error_curve(a, f, window=24)
        for i in (0, 10, 40, 59):
            lo = max(0, i - 23)
            assert c.roll_mse[i] == pytest.approx(mse(a[lo:i + 1], f[lo:i + 1]), abs=1e-12)
            assert c.roll_mape[i] == pytest.approx(mape(a[lo:i + 1], f[lo:i + 1]), abs=1e-12)

    def test_hours_one_based(self):
        c = error_curve([1.0, 1.0], [1.0, 1.0], window=2)
        assert list(c.hours) == [1, 2]

    def test_invalid_window(self):
        with pytest.raises(MetricError):
            error_curve([1.0], [1.0], window=0)

    def test_csv_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        a = rng.uniform(0.5, 3.0, 30)
        f = a + rng.normal(0, 0.2, 30)
        c = error_curve(a, f)
        path = tmp_path / "curve.csv"
        c.write_csv(path)
        rows = path.read_text().strip().splitlines()
        assert rows[0] == "hour,cum_mape,cum_mse,roll_mape,roll_mse"
        assert len(rows) == 31
        first = rows[1].split(",")
        assert float(first[2]) == pytest.approx(c.cum_mse[0], abs=0)
