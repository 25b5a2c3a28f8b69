"""Binomial detection counts with standard errors and intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Z95 = 1.959963984540054


@dataclass(frozen=True)
class DetectionStats:
    """Empirical detection frequency over independent trials.

    Parameters
    ----------
    trials : int
        Number of Bernoulli trials.
    detections : int
        Number of trials in which the adversary was detected.
    label : str
        Free-form description carried into reports.
    """

    trials: int
    detections: int
    label: str = ""

    def __post_init__(self):
        if self.trials < 0 or not 0 <= self.detections <= self.trials:
            raise ValueError(f"need 0 <= detections <= trials, got {self.detections}/{self.trials}")
        object.__setattr__(self, "trials", int(self.trials))
        object.__setattr__(self, "detections", int(self.detections))

    @classmethod
    def from_flags(cls, flags, label: str = "") -> "DetectionStats":
        flags = np.asarray(flags, dtype=bool).ravel()
        return cls(flags.size, int(flags.sum()), label)

    @property
    def estimate(self) -> float:
        return self.detections / self.trials if self.trials else math.nan

    @property
    def pass_rate(self) -> float:
        return 1.0 - self.estimate

    @property
    def stderr(self) -> float:
        if not self.trials:
            return math.nan
        p = self.estimate
        return math.sqrt(p * (1.0 - p) / self.trials)

    @property
    def interval(self) -> tuple[float, float]:
        """95% interval: normal approximation, Wilson score at 0 or ``trials``."""
        n, p = self.trials, self.estimate
        if not n:
            return (0.0, 1.0)
        if self.detections in (0, n):
            z2 = Z95 * Z95
            centre = (p + z2 / (2 * n)) / (1 + z2 / n)
            half = Z95 * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n)
            lo, hi = centre - half, centre + half
            # the observed boundary value must stay inside
            return (min(lo, p), max(hi, p))
        half = Z95 * self.stderr
        return (max(0.0, p - half), min(1.0, p + half))

    def sigma_at(self, target: float) -> float:
        """Binomial standard error if ``target`` were the true rate."""
        return math.sqrt(max(target * (1.0 - target), 0.0) / self.trials)

    def z_score(self, target: float) -> float:
        s = self.sigma_at(target)
        diff = self.estimate - target
        if s == 0.0:
            return 0.0 if diff == 0.0 else math.copysign(math.inf, diff)
        return diff / s

    def within(self, target: float, k: float = 4.0) -> bool:
        """True if the estimate lies within ``k`` standard errors of ``target``.

        The error is evaluated at the target, so an all-or-nothing sample is
        still judged against the spread the target itself predicts.
        """
        return abs(self.estimate - target) <= k * self.sigma_at(target) + 1e-15

    def at_least(self, target: float, k: float = 4.0) -> bool:
        return self.estimate >= target - k * self.sigma_at(target) - 1e-15

    def at_most(self, target: float, k: float = 4.0) -> bool:
        return self.estimate <= target + k * self.sigma_at(target) + 1e-15

    def merge(self, other: "DetectionStats") -> "DetectionStats":
        return DetectionStats(self.trials + other.trials, self.detections + other.detections, self.label or other.label)

    def to_dict(self) -> dict:
        lo, hi = self.interval
        return {
            "label": self.label,
            "trials": self.trials,
            "detections": self.detections,
            "estimate": self.estimate,
            "stderr": self.stderr,
            "ci_low": lo,
            "ci_high": hi,
        }

    def __str__(self) -> str:
        lo, hi = self.interval
        return f"{self.label or 'stats'}: {self.detections}/{self.trials} = {self.estimate:.6f} [{lo:.6f}, {hi:.6f}]"
