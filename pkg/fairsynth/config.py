"""Run configuration for the generate pipeline."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .dp_core import DEFAULT_ALPHAS, alphas_for_target, dp_to_rho
from .errors import ConfigError
from .marginals import SCORE_SENSITIVITY
from .selection import DEFAULT_QUEUE_CAP, SelectionMode

DEFAULT_SPLIT = (1 / 3, 1 / 3, 1 / 3)
SPLIT_TOLERANCE = 1e-9
STAGES = ("one_way", "selection", "measure")


def parse_split(text: str) -> tuple[float, float, float]:
    """Parse 'a,b,c' into the one-way, selection and measure fractions."""
    try:
        parts = tuple(float(p) for p in text.split(","))
    except ValueError as e:
        msg = f"Budget split must be three comma-separated numbers, got {text!r}"
        raise ConfigError(msg) from e
    if len(parts) != len(STAGES):
        msg = f"Budget split needs {len(STAGES)} fractions ({', '.join(STAGES)}), got {len(parts)}"
        raise ConfigError(msg)
    return parts[0], parts[1], parts[2]


@dataclass(frozen=True)
class RunConfig:
    """
    Everything one generate run needs.

    Either epsilon (with an optional delta) or rho sets the budget; a noiseless run takes neither.
    """

    input_path: Path | None
    roles_path: Path | None = None
    epsilon: float | None = None
    delta: float | None = None
    rho: float | None = None
    split: tuple[float, float, float] = DEFAULT_SPLIT
    selector: SelectionMode = SelectionMode.GREEDY
    noiseless: bool = False
    n_out: int | None = None
    seed: int = 0
    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    sensitivity: float = SCORE_SENSITIVITY
    queue_cap: int = DEFAULT_QUEUE_CAP
    output_dir: Path = field(default_factory=lambda: Path("output"))
    graph_path: Path | str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "selector", SelectionMode(self.selector))
        if self.input_path is None and self.graph_path is None:
            msg = "A run needs an input CSV or a graph"
            raise ConfigError(msg)
        if self.noiseless:
            if self.epsilon is not None or self.rho is not None:
                msg = "A noiseless run takes no privacy budget"
                raise ConfigError(msg)
        elif (self.epsilon is None) == (self.rho is None):
            msg = "Give exactly one of epsilon (with optional delta) and rho"
            raise ConfigError(msg)
        if self.rho is not None and not (self.rho > 0 and math.isfinite(self.rho)):
            msg = f"rho must be positive and finite, got {self.rho}"
            raise ConfigError(msg)
        if self.epsilon is not None and not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            msg = f"epsilon must be positive and finite, got {self.epsilon}"
            raise ConfigError(msg)
        if self.delta is not None:
            if self.rho is not None:
                msg = "delta goes with epsilon; a rho budget reports epsilon at delta = 1/n^2"
                raise ConfigError(msg)
            if not 0 < self.delta < 1:
                msg = f"delta must lie in (0, 1), got {self.delta}"
                raise ConfigError(msg)
        if len(self.split) != len(STAGES) or any(f <= 0 for f in self.split):
            msg = f"Budget split fractions must be three positive numbers, got {self.split}"
            raise ConfigError(msg)
        if abs(math.fsum(self.split) - 1.0) > SPLIT_TOLERANCE:
            msg = f"Budget split fractions must sum to 1, got {self.split} (sum {math.fsum(self.split)})"
            raise ConfigError(msg)
        if self.n_out is not None and self.n_out < 0:
            msg = f"n_out must be non-negative, got {self.n_out}"
            raise ConfigError(msg)
        if not self.alphas or any(a <= 1 for a in self.alphas):
            msg = f"Every alpha must exceed 1, got {self.alphas}"
            raise ConfigError(msg)

    def resolve_delta(self, n_rows: int) -> float:
        """Configured delta, else 1/n^2 (1 for an empty table)."""
        if self.delta is not None:
            return self.delta
        return 1.0 / max(n_rows, 1) ** 2

    def effective_alphas(self, delta: float) -> tuple[float, ...]:
        """Configured alpha grid, extended when an epsilon target is too small for it at this delta."""
        if self.epsilon is None or self.noiseless:
            return self.alphas
        return alphas_for_target(self.epsilon, delta, self.alphas)

    def resolve_rho(self, n_rows: int) -> tuple[float, float]:
        """The zCDP budget and the delta it is reported at; a noiseless run has rho 0."""
        delta = self.resolve_delta(n_rows)
        if self.noiseless:
            return 0.0, delta
        if self.rho is not None:
            return self.rho, delta
        return dp_to_rho(float(self.epsilon), delta, self.effective_alphas(delta)), delta  # type: ignore[arg-type]

    def stage_budgets(self, rho: float) -> dict[str, float]:
        """Split rho over the stages; the last stage takes the remainder so the shares add up exactly."""
        shares = {stage: rho * fraction for stage, fraction in zip(STAGES[:-1], self.split[:-1], strict=True)}
        shares[STAGES[-1]] = rho - math.fsum(shares.values())
        return shares

