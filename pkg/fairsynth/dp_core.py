"""
Rényi-DP primitives: Gaussian and exponential mechanisms, a composition ledger and conversion to (ε, δ)-DP.

Every mechanism here has a cost that is linear in α, γ(α) = α·ρ, so a cost is carried as its ρ and
composition is plain addition. Noise comes from numpy's PCG64 generator (ziggurat normals); substreams
are split from the root seed by hashing a label. Floating-point side channels are not addressed.
"""

from __future__ import annotations

import hashlib
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.special import softmax

from .errors import BudgetExceededError, ConfigError

logger = logging.getLogger(__name__)

DEFAULT_ALPHAS: tuple[float, ...] = (
    1.25, 1.5, 1.75, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0, 16.0, 20.0, 24.0, 32.0, 48.0, 64.0,
)  # fmt: skip
BUDGET_TOLERANCE = 1e-12
_RHO_SEARCH_CEILING = 1e12
_MAX_ALPHA = 1e9


@dataclass(frozen=True)
class RdpCost:
    """An (α, α·ρ)-RDP guarantee."""

    rho: float

    def __post_init__(self) -> None:
        if self.rho < 0 or math.isnan(self.rho):
            msg = f"RDP cost must be non-negative, got {self.rho}"
            raise ConfigError(msg)

    def gamma(self, alpha: float) -> float:
        return alpha * self.rho


@dataclass(frozen=True)
class LedgerEntry:
    label: str
    rho: float
    mechanism: str = ""
    parameter: float | None = None


@dataclass
class RdpAccountant:
    """Single-writer ledger of RDP charges."""

    entries: list[LedgerEntry] = field(default_factory=list)

    def charge(self, label: str, cost: RdpCost, mechanism: str = "", parameter: float | None = None) -> None:
        self.entries.append(LedgerEntry(label, cost.rho, mechanism, parameter))
        logger.debug("Charged %s: rho=%.6g (running total %.6g)", label, cost.rho, self.total_rho)

    @property
    def total_rho(self) -> float:
        return math.fsum(e.rho for e in self.entries)

    def assert_total(self, rho_budget: float) -> None:
        """Raise before any release if the ledger went over budget."""
        total = self.total_rho
        if total > rho_budget + BUDGET_TOLERANCE:
            msg = f"Privacy budget exceeded: spent rho={total!r}, budget rho={rho_budget!r}"
            raise BudgetExceededError(msg)

    def to_dict(self, delta: float, alphas: Sequence[float] = DEFAULT_ALPHAS) -> dict[str, object]:
        epsilon, alpha = rdp_to_dp(self.total_rho, delta, alphas)
        return {
            "entries": [
                {"label": e.label, "rho": e.rho, "mechanism": e.mechanism, "parameter": e.parameter}
                for e in self.entries
            ],
            "total_rho": self.total_rho,
            "delta": delta,
            "epsilon": epsilon,
            "best_alpha": alpha,
        }


def derive_rng(seed: int, label: str) -> np.random.Generator:
    """Independent generator for a named stage, split from the root seed by hashing the label."""
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    sequence = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, int.from_bytes(digest[:8], "little")])
    return np.random.Generator(np.random.PCG64(sequence))


def gaussian_rho(sensitivity: float, sigma: float) -> float:
    return sensitivity**2 / (2.0 * sigma**2)


def gaussian_sigma(rho: float, sensitivity: float = 1.0) -> float:
    """Noise scale whose Gaussian mechanism costs exactly rho."""
    if rho <= 0:
        msg = f"Gaussian mechanism needs a positive rho share, got {rho}"
        raise ConfigError(msg)
    return sensitivity / math.sqrt(2.0 * rho)


def gaussian_mechanism(
    value: float | np.ndarray,
    sensitivity: float,
    sigma: float,
    rng: np.random.Generator,
) -> tuple[float | np.ndarray, RdpCost]:
    """Add N(0, σ²) noise to a scalar or to every entry of a vector."""
    if sigma <= 0 or math.isnan(sigma):
        msg = f"Gaussian mechanism needs sigma > 0, got {sigma}"
        raise ConfigError(msg)
    if sensitivity <= 0:
        msg = f"Gaussian mechanism needs positive sensitivity, got {sensitivity}"
        raise ConfigError(msg)
    cost = RdpCost(gaussian_rho(sensitivity, sigma))
    if np.isscalar(value):
        return float(value) + float(rng.normal(0.0, sigma)), cost
    array = np.asarray(value, dtype=np.float64)
    return array + rng.normal(0.0, sigma, size=array.shape), cost


def exponential_probabilities(scores: Sequence[float] | np.ndarray, epsilon: float, sensitivity: float) -> np.ndarray:
    """Selection probabilities ∝ exp(ε·s/(2Δ)), stabilised by subtracting the maximum score."""
    logits = np.asarray(scores, dtype=np.float64) * (epsilon / (2.0 * sensitivity))
    return softmax(logits - logits.max())


def exponential_mechanism(
    candidates: Sequence[object],
    scores: Sequence[float] | np.ndarray,
    epsilon: float,
    sensitivity: float,
    rng: np.random.Generator,
) -> tuple[int, RdpCost]:
    """Sample a candidate index; each call costs ρ = ε²/8."""
    if not len(candidates):
        msg = "Exponential mechanism needs at least one candidate"
        raise ConfigError(msg)
    if len(scores) != len(candidates):
        msg = f"Got {len(scores)} scores for {len(candidates)} candidates"
        raise ConfigError(msg)
    if epsilon <= 0 or sensitivity <= 0:
        msg = f"Exponential mechanism needs epsilon > 0 and sensitivity > 0, got {epsilon}, {sensitivity}"
        raise ConfigError(msg)
    cost = RdpCost(epsilon**2 / 8.0)
    if len(candidates) == 1:
        return 0, cost
    probabilities = exponential_probabilities(scores, epsilon, sensitivity)
    return int(rng.choice(len(candidates), p=probabilities)), cost


def _check_conversion_inputs(delta: float, alphas: Sequence[float]) -> np.ndarray:
    if not 0 < delta <= 1:
        msg = f"delta must lie in (0, 1], got {delta}"
        raise ConfigError(msg)
    grid = np.sort(np.asarray(alphas, dtype=np.float64))
    if grid.size == 0:
        msg = "The alpha grid is empty"
        raise ConfigError(msg)
    if (grid <= 1).any():
        msg = f"Every alpha must exceed 1, got {grid.tolist()}"
        raise ConfigError(msg)
    return grid


def rdp_to_dp(rho: float, delta: float, alphas: Sequence[float] = DEFAULT_ALPHAS) -> tuple[float, float]:
    """Smallest ε over the grid of α·ρ + ln(1/δ)/(α−1), with the minimising α (ties go to the smaller α)."""
    if rho < 0:
        msg = f"rho must be non-negative, got {rho}"
        raise ConfigError(msg)
    grid = _check_conversion_inputs(delta, alphas)
    epsilons = grid * rho + math.log(1.0 / delta) / (grid - 1.0)
    best = int(np.argmin(epsilons))
    return float(epsilons[best]), float(grid[best])


def dp_to_rho(epsilon_target: float, delta: float, alphas: Sequence[float] = DEFAULT_ALPHAS) -> float:
    """Largest ρ whose conversion reaches ε_target, found by bisection."""
    if epsilon_target <= 0:
        msg = f"Target epsilon must be positive, got {epsilon_target}"
        raise ConfigError(msg)
    _check_conversion_inputs(delta, alphas)
    floor, _ = rdp_to_dp(0.0, delta, alphas)
    if floor > epsilon_target:
        msg = (
            f"epsilon={epsilon_target} is unattainable at delta={delta}: even rho=0 converts to epsilon={floor:.6g} "
            "on this alpha grid"
        )
        raise ConfigError(msg)
    low, high = 0.0, 1.0
    while rdp_to_dp(high, delta, alphas)[0] < epsilon_target:
        high *= 2.0
        if high > _RHO_SEARCH_CEILING:
            msg = f"rho search bounds exhausted for epsilon={epsilon_target}"
            raise ConfigError(msg)
    for _ in range(200):
        mid = 0.5 * (low + high)
        if rdp_to_dp(mid, delta, alphas)[0] <= epsilon_target:
            low = mid
        else:
            high = mid
        if high - low <= 1e-15 * max(1.0, high):
            break
    return low


def alphas_for_target(
    epsilon_target: float,
    delta: float,
    alphas: Sequence[float] = DEFAULT_ALPHAS,
    *,
    log_term_share: float = 0.5,
) -> tuple[float, ...]:
    """
    The alpha grid, extended by doubling its largest order until ln(1/δ)/(α−1) fits in a share of ε_target.

    Small ε at δ = 1/n² needs orders far beyond the default grid: at ρ = 0 the largest default order
    already converts to ln(n²)/63. A grid that leaves at least `log_term_share` of the target for ρ is
    returned unchanged.
    """
    if epsilon_target <= 0:
        msg = f"Target epsilon must be positive, got {epsilon_target}"
        raise ConfigError(msg)
    if not 0 < log_term_share < 1:
        msg = f"log_term_share must lie in (0, 1), got {log_term_share}"
        raise ConfigError(msg)
    grid = _check_conversion_inputs(delta, alphas)
    log_term = math.log(1.0 / delta)
    extended = [float(a) for a in grid]
    while log_term / (extended[-1] - 1.0) > log_term_share * epsilon_target:
        if extended[-1] > _MAX_ALPHA:
            msg = f"No alpha up to {_MAX_ALPHA:g} reaches epsilon={epsilon_target} at delta={delta}"
            raise ConfigError(msg)
        extended.append(extended[-1] * 2.0)
    if len(extended) > grid.size:
        logger.info("Extended the alpha grid to %g for epsilon=%g at delta=%.3g", extended[-1], epsilon_target, delta)
    return tuple(extended)
