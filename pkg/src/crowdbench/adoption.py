"""Closed-form adoption-game layer.

Excess crowding converts to population costs through an exponential
exposure model: with X other adopters of the same model-condition, the
expected distinctiveness loss is gamma * (1 - exp(-X * delta)). From
there: critical private-benefit thresholds, binomial expected costs over
an adoption process, and mass-adoption limits. A seeded Monte Carlo
oracle cross-checks the binomial expectation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import derive_rng


def _check_exposure(x) -> int:
    if isinstance(x, bool) or not isinstance(x, (int, np.integer)):
        raise TypeError(f"exposure must be an integer count of creators, got {x!r}")
    if x < 0:
        raise ValueError(f"exposure must be nonnegative, got {x}")
    return int(x)


def _check_delta(delta: float) -> float:
    if delta < 0:
        raise ValueError(f"excess crowding must be nonnegative, got {delta}")
    return float(delta)


@dataclass(frozen=True)
class AdoptionScenario:
    """Inputs for the game-layer computations. ``delta`` may be given
    directly or derived from (rho, kappa_h)."""

    gamma: float = 1.0
    delta: float | None = None
    rho: float | None = None
    kappa_h: float | None = None

    def resolve_delta(self) -> float:
        if self.delta is not None:
            return _check_delta(self.delta)
        if self.rho is None or self.kappa_h is None:
            raise ValueError("scenario needs delta, or rho together with kappa_h")
        return delta_from_rho(self.rho, self.kappa_h)


def delta_from_rho(rho: float, kappa_h: float) -> float:
    """Excess crowding implied by a diversity ratio: max{0, (1-rho)(1-kappa_h)}.

    At or above parity (rho >= 1) the excess is zero.
    """
    if not 0.0 <= kappa_h < 1.0:
        raise ValueError(f"kappa_h must lie in [0, 1), got {kappa_h}")
    return max(0.0, (1.0 - rho) * (1.0 - kappa_h))


def critical_benefit(delta: float, exposure) -> float:
    """Normalized adoption threshold 1 - exp(-X * delta) in [0, 1).

    Using the model is rational iff the private benefit exceeds this
    fraction of the task's distinctiveness value.
    """
    x = _check_exposure(exposure)
    d = _check_delta(delta)
    return -math.expm1(-x * d)


def redundancy_cost(gamma: float, delta: float, exposure) -> float:
    """Expected distinctiveness loss gamma * (1 - exp(-X * delta))."""
    if gamma < 0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    return gamma * critical_benefit(delta, exposure)


def expected_cost(gamma: float, delta: float, population: int, adoption_prob: float) -> float:
    """Expected redundancy cost when each of the other N-1 creators adopts
    independently with probability p:

        gamma * [1 - (1 - p + p * exp(-delta))^(N-1)]

    p = 1 reduces exactly to the realized-exposure cost at X = N - 1.
    """
    if population < 1:
        raise ValueError(f"population must be >= 1, got {population}")
    if not 0.0 <= adoption_prob <= 1.0:
        raise ValueError(f"adoption probability must lie in [0, 1], got {adoption_prob}")
    if gamma < 0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    d = _check_delta(delta)
    if adoption_prob == 1.0:
        # Degenerate binomial; route through the realized-exposure form so
        # the identity with redundancy_cost holds bit for bit.
        return redundancy_cost(gamma, d, population - 1)
    base = 1.0 - adoption_prob + adoption_prob * math.exp(-d)
    return gamma * (1.0 - base ** (population - 1))


@dataclass(frozen=True)
class MonteCarloCost:
    estimate: float
    std_error: float
    trials: int


def monte_carlo_expected_cost(
    gamma: float,
    delta: float,
    population: int,
    adoption_prob: float,
    trials: int = 100_000,
    seed: int = 0,
    block_size: int = 20_000,
) -> MonteCarloCost:
    """Monte Carlo oracle for the binomial expected cost.

    Draws X ~ Binomial(N-1, p) in seeded blocks and averages the realized
    costs. Deterministic given the seed.
    """
    if trials < 10_000:
        raise ValueError("use at least 10^4 trials for a meaningful oracle")
    if population < 1:
        raise ValueError(f"population must be >= 1, got {population}")
    if not 0.0 <= adoption_prob <= 1.0:
        raise ValueError(f"adoption probability must lie in [0, 1], got {adoption_prob}")
    d = _check_delta(delta)
    costs = np.empty(trials)
    for block, start in enumerate(range(0, trials, block_size)):
        stop = min(start + block_size, trials)
        rng = derive_rng(seed, "mc-expected-cost", block)
        draws = rng.binomial(population - 1, adoption_prob, size=stop - start)
        costs[start:stop] = gamma * -np.expm1(-draws * d)
    if np.ptp(costs) == 0.0:
        # All draws realized the same exposure; the mean is that value exactly.
        return MonteCarloCost(estimate=float(costs[0]), std_error=0.0, trials=trials)
    estimate = float(np.mean(costs))
    std_error = float(np.std(costs, ddof=1) / math.sqrt(trials))
    return MonteCarloCost(estimate=estimate, std_error=std_error, trials=trials)


@dataclass(frozen=True)
class ParityReport:
    delta: float
    rho: float
    parity: bool


def parity_check(kappa_h: float, kappa_a: float) -> ParityReport:
    """Excess crowding and diversity ratio for a (kappa_h, kappa_a) pair.

    Parity (no excess crowding) holds exactly when delta = 0, equivalently
    rho >= 1; the equivalence is asserted.
    """
    if not 0.0 <= kappa_h < 1.0:
        raise ValueError(f"kappa_h must lie in [0, 1), got {kappa_h}")
    if not 0.0 <= kappa_a <= 1.0:
        raise ValueError(f"kappa_a must lie in [0, 1], got {kappa_a}")
    delta = max(0.0, kappa_a - kappa_h)
    rho = (1.0 - kappa_a) / (1.0 - kappa_h)
    parity = delta == 0.0
    assert parity == (rho >= 1.0), "no-externality equivalence violated"
    return ParityReport(delta=delta, rho=rho, parity=parity)


def mass_adoption_limit(gamma: float, delta: float) -> float:
    """Limit of the redundancy cost as exposure grows: 0 at parity
    (delta = 0), the full distinctiveness value gamma below parity."""
    _check_delta(delta)
    return 0.0 if delta == 0.0 else float(gamma)
