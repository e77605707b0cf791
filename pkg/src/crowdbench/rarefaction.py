"""Finite-sample stability diagnostics.

Rarefaction subsamples n units WITHOUT replacement (one response per
drawn unit), repeats R times per grid point, and tracks the mean pairwise
crowding as n grows. Unlike the bootstrap estimator this is true
rarefaction: it asks how the estimate would look at a smaller real sample
size, so drawn units are distinct.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import SamplingUnit
from .errors import EstimationError
from .estimators import _features_for_items, _kernel_matrix, _offdiag_mean, _percentile_ci
from .kernels import KernelSpec
from .rng import derive_rng

DEFAULT_REPEATS = 200


@dataclass(frozen=True)
class RarefactionCurve:
    """Mean crowding and percentile band per subsample size."""

    grid: tuple[int, ...]
    means: tuple[float, ...]
    bands: tuple[tuple[float, float], ...]
    repeats: int
    seed: int
    ci_level: float

    def mean_at(self, n: int) -> float:
        try:
            return self.means[self.grid.index(n)]
        except ValueError:
            raise EstimationError(f"n={n} is not on the rarefaction grid {self.grid}") from None


def default_grid(available_units: int, step: int = 5, cap: int = 50) -> list[int]:
    """Grid {step, 2*step, ...} up to min(cap, available units)."""
    top = min(cap, available_units)
    return [n for n in range(step, top + 1, step) if n >= 2]


def drift_pair(grid: list[int] | tuple[int, ...], gap: int = 10) -> tuple[int, int]:
    """Default (n_low, n_high) for drift: the top grid point and the
    largest grid point at least ``gap`` below it."""
    n_high = max(grid)
    lows = [n for n in grid if n <= n_high - gap]
    n_low = max(lows) if lows else min(grid)
    if n_low == n_high:
        raise EstimationError("grid has a single point; drift needs two")
    return n_low, n_high


def rarefaction_curve(
    units: list[SamplingUnit],
    spec: KernelSpec,
    grid: list[int],
    repeats: int = DEFAULT_REPEATS,
    seed: int = 0,
    table=None,
    ci_level: float = 0.95,
) -> RarefactionCurve:
    """Participant-aware rarefaction curve over the given n grid.

    Deterministic given the seed, and exactly invariant to the order the
    units are passed in (units are keyed by unit_id internally).
    """
    if repeats < 1:
        raise EstimationError("repeats must be >= 1")
    grid = sorted(set(int(n) for n in grid))
    if not grid:
        raise EstimationError("empty rarefaction grid")
    if grid[0] < 2:
        raise EstimationError("rarefaction needs n >= 2")
    units = sorted(units, key=lambda u: u.unit_id)
    if grid[-1] > len(units):
        raise EstimationError(
            f"grid point {grid[-1]} exceeds the {len(units)} available units"
        )

    flat = []
    unit_offsets = np.empty(len(units), dtype=np.int64)
    unit_sizes = np.empty(len(units), dtype=np.int64)
    for k, unit in enumerate(units):
        unit_offsets[k] = len(flat)
        unit_sizes[k] = len(unit.responses)
        flat.extend(unit.responses)
    matrix = _kernel_matrix(_features_for_items(flat, spec, table), spec)

    means = []
    bands = []
    for n in grid:
        values = np.empty(repeats)
        for rep in range(repeats):
            rng = derive_rng(seed, "rarefaction", n, rep)
            unit_idx = np.sort(rng.choice(len(units), size=n, replace=False))
            offsets = rng.integers(0, unit_sizes[unit_idx])
            resp_idx = unit_offsets[unit_idx] + offsets
            values[rep] = _offdiag_mean(matrix[np.ix_(resp_idx, resp_idx)].tolist())
        # Mean of identical repeats is that value exactly (an exhaustive
        # draw must reproduce the full-sample mean bit for bit).
        means.append(float(values[0]) if np.ptp(values) == 0.0 else float(np.mean(values)))
        bands.append(_percentile_ci(values, ci_level))
    return RarefactionCurve(
        grid=tuple(grid),
        means=tuple(means),
        bands=tuple(bands),
        repeats=repeats,
        seed=seed,
        ci_level=ci_level,
    )


def relative_drift(curve: RarefactionCurve, n_low: int, n_high: int) -> float:
    """Relative change |k(n_high) - k(n_low)| / |k(n_high)|, as a percentage."""
    k_low = curve.mean_at(n_low)
    k_high = curve.mean_at(n_high)
    if k_high == 0.0:
        raise EstimationError("relative drift undefined: k(n_high) is zero")
    return abs(k_high - k_low) / abs(k_high) * 100.0
