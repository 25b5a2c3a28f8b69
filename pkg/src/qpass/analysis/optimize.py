"""Derivative-free maximisation of the no-card pass probability."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from qpass.adversary import ForgedInput
from qpass.analysis.bounds import ps_closed_form, ps_direct
from qpass.primitives import LockUnitary, ProtocolParams
from qpass.qcore import RngStream

DEFAULT_STARTS = 64
DEFAULT_BUDGET = 400_000
MIN_STEP = 1e-9
MIN_GAIN = 1e-12


def theta_to_psi(theta: np.ndarray) -> np.ndarray:
    """Map 7 reals to a normalised state with ``Psi_00`` real and non-negative."""
    t = np.asarray(theta, dtype=np.float64)
    psi = np.array([abs(t[0]), t[1] + 1j * t[2], t[3] + 1j * t[4], t[5] + 1j * t[6]])
    n = np.linalg.norm(psi)
    if n == 0.0:
        psi = np.array([1.0, 0, 0, 0], dtype=np.complex128)
        n = 1.0
    return psi / n


def psi_to_theta(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=np.complex128)
    if abs(psi[0]) > 0:
        psi = psi * np.exp(-1j * np.angle(psi[0]))
    return np.array([psi[0].real, psi[1].real, psi[1].imag, psi[2].real, psi[2].imag, psi[3].real, psi[3].imag])


@dataclass(frozen=True)
class OptimizeResult:
    """Best forgery found by :func:`ps_maximize`.

    ``value`` is re-evaluated with the direct trace oracle at ``forged``.
    """

    forged: ForgedInput
    value: float
    search_value: float
    converged: bool
    evaluations: int
    starts: int

    def to_dict(self) -> dict:
        return {
            "psi": self.forged.to_list(),
            "value": self.value,
            "search_value": self.search_value,
            "converged": self.converged,
            "evaluations": self.evaluations,
            "starts": self.starts,
        }


def _refine(f, theta, step, budget):
    """Compass search with step halving; returns (theta, value, evals, converged)."""
    best = f(theta)
    evals = 1
    dim = theta.size
    while evals < budget:
        gain = 0.0
        for i in range(dim):
            for sgn in (1.0, -1.0):
                if evals >= budget:
                    return theta, best, evals, False
                trial = theta.copy()
                trial[i] += sgn * step
                v = f(trial)
                evals += 1
                if v > best:
                    gain += v - best
                    theta, best = trial, v
                    break
        if gain < MIN_GAIN:
            if step < MIN_STEP:
                return theta, best, evals, True
            step *= 0.5
    return theta, best, evals, False


def ps_maximize(
    params: ProtocolParams,
    budget: int = DEFAULT_BUDGET,
    starts: int = DEFAULT_STARTS,
    seed: int = 0,
    lock: LockUnitary | None = None,
) -> OptimizeResult:
    """Multi-start coordinate search for the largest no-card pass probability.

    Parameters
    ----------
    budget : int
        Total objective evaluations shared by all starts.
    starts : int
        Number of random starting points.

    Notes
    -----
    ``converged`` is true only if every start met the stopping rule
    (no gain above 1e-12 at a step below 1e-9) within the budget.
    """
    if budget < 1 or starts < 1:
        raise ValueError("budget and starts must be >= 1")

    def f(theta):
        return ps_closed_form(ForgedInput(theta_to_psi(theta)), params)

    rng = RngStream(seed, 0)
    per_start = max(1, budget // starts)
    best_theta, best_val = None, -np.inf
    used, all_converged = 0, True
    for s in range(starts):
        remaining = budget - used
        if remaining <= 0:
            all_converged = False
            break
        theta0 = rng.child(s).generator.normal(size=7)
        theta, val, evals, ok = _refine(f, theta0, 0.25, min(per_start, remaining))
        used += evals
        all_converged &= ok
        if val > best_val:
            best_theta, best_val = theta, val
    forged = ForgedInput(theta_to_psi(best_theta))
    return OptimizeResult(
        forged=forged,
        value=ps_direct(forged, params, lock),
        search_value=float(best_val),
        converged=bool(all_converged),
        evaluations=used,
        starts=starts,
    )
