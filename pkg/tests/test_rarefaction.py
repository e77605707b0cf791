import numpy as np
import pytest

from crowdbench import (
    EstimationError,
    KernelSpec,
    RarefactionCurve,
    default_grid,
    drift_pair,
    pairwise_mean_crowding,
    rarefaction_curve,
    relative_drift,
)
from conftest import make_response, mixture_table, singleton_units, two_point_mixture


def curve_from_means(grid, means, repeats=1, seed=0):
    bands = tuple((m, m) for m in means)
    return RarefactionCurve(
        grid=tuple(grid), means=tuple(means), bands=bands,
        repeats=repeats, seed=seed, ci_level=0.95,
    )


class TestRarefactionCurve:
    def make_inputs(self, seed=1, n=30, q=0.5):
        responses, vectors = two_point_mixture(seed, n, q, "human")
        return singleton_units(responses), mixture_table([vectors])

    def test_full_draw_equals_full_sample_mean(self):
        units, table = self.make_inputs(n=12)
        spec = KernelSpec("semantic")
        curve = rarefaction_curve(units, spec, [12], repeats=20, seed=3, table=table)
        ordered = [u.responses[0] for u in sorted(units, key=lambda u: u.unit_id)]
        full = pairwise_mean_crowding(ordered, spec, table)
        assert curve.means[0] == full
        lo, hi = curve.bands[0]
        assert lo == hi == full

    def test_constant_kernel_flat_curve(self):
        units = singleton_units([make_response(i, bucket_id=7) for i in range(20)])
        curve = rarefaction_curve(units, KernelSpec("bucket"), [5, 10, 15, 20], repeats=10, seed=2)
        assert all(m == 1.0 for m in curve.means)
        assert all(lo == hi == 1.0 for lo, hi in curve.bands)

    def test_tracks_analytic_expectation(self):
        # q = 0.3 two-point mixture: E[K] = 1 - q(1-q) = 0.79; the size-n
        # pairwise-mean sd is bounded by the U-statistic rate.
        units, table = self.make_inputs(seed=8, n=60, q=0.3)
        grid = [10, 20, 30, 40, 50]
        curve = rarefaction_curve(units, KernelSpec("semantic"), grid, repeats=100, seed=4, table=table)
        var_g = 0.3 * 0.65**2 + 0.7 * 0.85**2 - 0.79**2
        for n, mean in zip(curve.grid, curve.means):
            sigma = np.sqrt(4.0 * var_g / n)
            assert abs(mean - 0.79) <= 3.0 * sigma

    def test_bands_contain_means_and_range(self):
        units, table = self.make_inputs(n=25)
        curve = rarefaction_curve(units, KernelSpec("semantic"), [5, 10, 20], repeats=30, seed=9, table=table)
        for mean, (lo, hi) in zip(curve.means, curve.bands):
            assert 0.0 <= lo <= mean <= hi <= 1.0

    def test_exact_invariance_to_unit_order(self):
        units, table = self.make_inputs(n=20)
        spec = KernelSpec("semantic")
        fwd = rarefaction_curve(units, spec, [5, 10], repeats=15, seed=6, table=table)
        rev = rarefaction_curve(units[::-1], spec, [5, 10], repeats=15, seed=6, table=table)
        assert fwd == rev

    def test_grid_exceeding_units_rejected(self):
        units, table = self.make_inputs(n=10)
        with pytest.raises(EstimationError, match="exceeds"):
            rarefaction_curve(units, KernelSpec("semantic"), [5, 11], table=table)

    def test_tiny_grid_rejected(self):
        units, table = self.make_inputs(n=10)
        with pytest.raises(EstimationError, match="n >= 2"):
            rarefaction_curve(units, KernelSpec("semantic"), [1, 5], table=table)


class TestRelativeDrift:
    def test_benchmark_slogan_drift(self):
        curve = curve_from_means([40, 50], [0.926871, 0.926327])
        assert round(relative_drift(curve, 40, 50), 4) == 0.0587

    def test_benchmark_story_drift(self):
        curve = curve_from_means([25, 35], [0.701182, 0.687392])
        assert round(relative_drift(curve, 25, 35), 4) == 2.0061

    def test_no_drift(self):
        curve = curve_from_means([10, 20], [0.5, 0.5])
        assert relative_drift(curve, 10, 20) == 0.0

    def test_off_grid_rejected(self):
        curve = curve_from_means([10, 20], [0.5, 0.5])
        with pytest.raises(EstimationError, match="grid"):
            relative_drift(curve, 10, 30)

    def test_zero_denominator_rejected(self):
        curve = curve_from_means([10, 20], [0.5, 0.0])
        with pytest.raises(EstimationError, match="zero"):
            relative_drift(curve, 10, 20)


class TestGridHelpers:
    def test_default_grid_caps_at_fifty(self):
        assert default_grid(200) == [5, 10, 15, 20, 25, 30, 35, 40, 45, 50]

    def test_default_grid_respects_available_units(self):
        assert default_grid(37) == [5, 10, 15, 20, 25, 30, 35]

    def test_drift_pair_standard(self):
        assert drift_pair(default_grid(200)) == (40, 50)

    def test_drift_pair_short_grid(self):
        # Mirrors the reduced human-story grid: top point 35, partner 25.
        assert drift_pair(default_grid(35)) == (25, 35)

    def test_drift_pair_needs_two_points(self):
        with pytest.raises(EstimationError):
            drift_pair([5])
