import math

import pytest

from simplex_lab.tools.statistics import (
    ensemble_summary,
    linear_fit,
    relative_change,
    spread_ratio,
)


class TestEnsembleSummary:
    def test_basic_statistics(self):
        summary = ensemble_summary([1.0, 2.0, 3.0, 4.0], "ratio")
        assert summary["label"] == "ratio"
        assert summary["count"] == 4
        assert summary["mean"] == 2.5
        assert summary["median"] == 2.5
        assert summary["min"] == 1.0
        assert summary["max"] == 4.0
        assert summary["percentile_25"] == pytest.approx(1.25)
        assert summary["percentile_75"] == pytest.approx(3.75)

    def test_non_finite_trials_are_counted_only(self):
        summary = ensemble_summary([1.0, math.nan, math.inf, 3.0])
        assert summary["count"] == 4
        assert summary["finite"] == 2
        assert summary["max"] == 3.0

    def test_single_value(self):
        summary = ensemble_summary([5.0])
        assert summary["std"] == 0.0
        assert summary["percentile_25"] == summary["percentile_75"] == 5.0

    @pytest.mark.parametrize("values", [[], [math.nan, math.inf]])
    def test_nothing_finite(self, values):
        summary = ensemble_summary(values, "error")
        assert "error" in summary
        assert summary["count"] == len(values)


class TestLinearFit:
    def test_exact_line(self):
        fit = linear_fit([0, 1, 2, 3], [1, 3, 5, 7])
        assert fit["slope"] == pytest.approx(2.0)
        assert fit["intercept"] == pytest.approx(1.0)
        assert fit["r_squared"] == pytest.approx(1.0)
        assert fit["points"] == 4

    def test_drops_exact_zeros_on_log_scale(self):
        fit = linear_fit([1, 2, 3, 4], [-1.0, -2.0, -math.inf, -4.0])
        assert fit["points"] == 3
        assert fit["slope"] == pytest.approx(-1.0)

    def test_all_zero_sweep(self):
        assert linear_fit([1, 2], [-math.inf, -math.inf])["slope"] == -math.inf

    def test_too_few_points(self):
        assert math.isnan(linear_fit([1, 2], [1.0, math.nan])["slope"])

    def test_shape_mismatch(self):
        assert "error" in linear_fit([1, 2, 3], [1, 2])

    def test_flat_data(self):
        fit = linear_fit([1, 2, 3], [2.0, 2.0, 2.0])
        assert fit["slope"] == pytest.approx(0.0, abs=1e-12)
        assert fit["r_squared"] == 1.0


class TestRatios:
    def test_relative_change(self):
        assert relative_change(2.0, 3.0) == 0.5
        assert relative_change(0.0, 0.0) == 0.0
        assert relative_change(0.0, 1.0) == math.inf

    def test_spread_ratio(self):
        assert spread_ratio([1.0, 2.0, 4.0]) == 4.0
        assert spread_ratio([0.0, -1.0, 2.0, math.inf, 3.0]) == 1.5
        assert spread_ratio([]) == math.inf
