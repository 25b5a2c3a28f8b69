"""Named Monte Carlo scenarios with seeded, chunked execution.

Trials are cut into fixed-size chunks and chunk ``c`` always draws from
``RngStream(seed, c)``. Chunks are merged in index order, so the result is
the same for any number of workers.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from qpass import adversary
from qpass.analysis.bounds import (
    decoy_session_detection,
    delta_e_closed_form,
    ps_closed_form,
    ps_operator,
    ps_supremum,
    total_detection,
)
from qpass.analysis.stats import DetectionStats
from qpass.primitives import DECOY_SYMBOLS, KET0, ProtocolParams, decoy_arrays
from qpass.protocol.parties import Prover, ProtocolConfig, Verifier, enroll
from qpass.protocol.session import run_session
from qpass.qcore import RngStream

CHUNK = 2048


@dataclass(frozen=True)
class Scenario:
    """A protocol mode, an attack and the quantity to count.

    ``metric`` is ``"block"`` (per Bell block, or per decoy for
    intercept-resend) or ``"session"``. One trial is one session.
    """

    name: str
    attack: str
    mode: str = "basic"
    N: int = 8
    N_D: int = 0
    alpha: float = 0.5
    xi: float = 0.5
    metric: str = "session"
    options: dict = field(default_factory=dict)

    @property
    def params(self) -> ProtocolParams:
        return ProtocolParams.from_xi(self.alpha, self.xi)

    @property
    def config(self) -> ProtocolConfig:
        return ProtocolConfig(N=self.N, N_D=self.N_D, params=self.params, mode=self.mode)

    def with_(self, **kw) -> "Scenario":
        return dataclasses.replace(self, **kw)

    def target(self) -> float | None:
        """Analytic value the estimate should match, where one exists."""
        return _TARGETS[self.attack](self)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _forged(s: Scenario) -> adversary.ForgedInput:
    which = s.options.get("forged", "best")
    if which == "best":
        return adversary.ForgedInput.normalized(ps_supremum(s.params)[1])
    if which == "psi00":
        return adversary.ForgedInput.product(KET0, KET0)
    return adversary.ForgedInput.normalized(np.asarray(which, dtype=np.complex128))


def _password(s: Scenario) -> adversary.CardStealPassword:
    which = s.options.get("password", "optimal")
    if which == "optimal":
        return adversary.CardStealPassword.optimal(s.params)
    return adversary.CardStealPassword(**which)


def _policy(s: Scenario) -> adversary.BasisPolicy:
    return adversary.BasisPolicy(**s.options.get("policy", {"kind": "random"}))


def _pick(res: adversary.AttackResult, metric: str) -> DetectionStats:
    return res.block if metric == "block" else res.session


def _run_honest(s: Scenario, trials: int, rng: RngStream) -> DetectionStats:
    cfg = s.config
    rejected = []
    for t in range(trials):
        trng = rng.child(t)
        card, store, pw = enroll(cfg, rng=trng.child(0))
        tr = run_session(Prover(card, pw, cfg.params), Verifier(store, params=cfg.params), cfg, rng=trng.child(1))
        rejected.append(not tr.accepted)
    return DetectionStats.from_flags(rejected)


def _run_no_card(s, trials, rng):
    engine = s.options.get("engine", "vectorized")
    return _pick(adversary.attack_no_card(_forged(s), s.config, trials, rng, engine=engine), s.metric)


def _run_card_steal(s, trials, rng):
    engine = s.options.get("engine", "vectorized")
    return _pick(adversary.attack_with_stolen_card(_password(s), s.config, trials, rng, engine=engine), s.metric)


def _run_mitm(s, trials, rng):
    forward = s.options.get("forward", True)
    forged = _forged(s) if forward else None
    return adversary.attack_mitm(s.config, trials, rng, forged=forged, forward=forward).session


def _run_intercept(s, trials, rng):
    return _pick(adversary.attack_intercept_resend(_policy(s), s.config, trials, rng), s.metric)


_RUNNERS: dict[str, Callable] = {
    "honest": _run_honest,
    "no-card-forgery": _run_no_card,
    "card-steal": _run_card_steal,
    "man-in-the-middle": _run_mitm,
    "intercept-resend-decoys": _run_intercept,
}


def _no_card_target(s):
    p = ps_closed_form(_forged(s), s.params)
    return 1.0 - p if s.metric == "block" else total_detection(1.0 - p, s.N)


def _card_steal_target(s):
    p = delta_e_closed_form(_password(s), s.params)
    return p if s.metric == "block" else total_detection(p, s.N)


def _intercept_target(s):
    flag = adversary.decoy_flag_probability(_policy(s))
    return flag if s.metric == "block" else decoy_session_detection(s.N_D, flag)


def _mitm_target(s):
    if not s.options.get("forward", True):
        return 1.0
    forged = _forged(s)
    if s.mode == "basic":
        return total_detection(1.0 - ps_closed_form(forged, s.params), s.N)
    # decoys and blocks each see an independent copy of the forged marginals
    rho_k, rho_a = forged.marginals()
    kets, bases, expected = decoy_arrays(DECOY_SYMBOLS)
    flag = np.mean([np.real(b[1 - e].conj() @ rho_k @ b[1 - e]) for b, e in zip(bases, expected)])
    p_pass = np.real(np.trace(ps_operator(s.params) @ np.kron(rho_k, rho_a)))
    return 1.0 - (1.0 - flag) ** s.N_D * p_pass**s.N


_TARGETS: dict[str, Callable] = {
    "honest": lambda s: 0.0,
    "no-card-forgery": _no_card_target,
    "card-steal": _card_steal_target,
    "man-in-the-middle": _mitm_target,
    "intercept-resend-decoys": _intercept_target,
}


SCENARIOS: dict[str, Scenario] = {
    s.name: s
    for s in (
        Scenario("honest-basic", "honest"),
        Scenario("honest-extended", "honest", mode="extended", N_D=32),
        Scenario("no-card-best-block", "no-card-forgery", N=1, metric="block"),
        Scenario("no-card-best", "no-card-forgery", N=20),
        Scenario("no-card-psi00-block", "no-card-forgery", N=1, metric="block", options={"forged": "psi00"}),
        Scenario("card-steal-optimal-block", "card-steal", N=1, metric="block"),
        Scenario("card-steal-optimal", "card-steal", N=8),
        Scenario("card-steal-r1-block", "card-steal", N=1, metric="block", options={"password": {"r": 1.0}}),
        Scenario("mitm-forward", "man-in-the-middle", N=20, options={"forged": "psi00"}),
        Scenario("mitm-silent", "man-in-the-middle", options={"forward": False}),
        Scenario("mitm-extended", "man-in-the-middle", mode="extended", N_D=32, options={"forged": "psi00"}),
        Scenario("intercept-random-decoy", "intercept-resend-decoys", mode="extended", N_D=64, metric="block"),
        Scenario("intercept-random", "intercept-resend-decoys", mode="extended", N_D=32),
        Scenario(
            "intercept-breidbart",
            "intercept-resend-decoys",
            mode="extended",
            N_D=32,
            options={"policy": {"kind": "angle", "angle": math.pi / 4}},
        ),
    )
}


def get_scenario(name: str, **overrides) -> Scenario:
    try:
        s = SCENARIOS[name]
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; known: {sorted(SCENARIOS)}") from None
    return s.with_(**overrides) if overrides else s


def _chunk(args) -> DetectionStats:
    scenario, index, count, seed = args
    return _RUNNERS[scenario.attack](scenario, count, RngStream(seed, index))


def monte_carlo(
    scenario: Scenario | str,
    trials: int,
    seed: int,
    workers: int = 1,
    chunk: int = CHUNK,
) -> DetectionStats:
    """Run ``trials`` independent sessions of ``scenario``.

    Deterministic in ``(scenario, trials, seed, chunk)``; ``workers`` only
    changes wall time.
    """
    if isinstance(scenario, str):
        scenario = get_scenario(scenario)
    if scenario.attack not in _RUNNERS:
        raise KeyError(f"unknown attack {scenario.attack!r}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    jobs = [(scenario, c, min(chunk, trials - c * chunk), seed) for c in range(math.ceil(trials / chunk))]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk, jobs))
    else:
        parts = [_chunk(j) for j in jobs]
    total = parts[0]
    for p in parts[1:]:
        total = total.merge(p)
    return DetectionStats(total.trials, total.detections, scenario.name)


__all__ = [
    "SCENARIOS",
    "Scenario",
    "get_scenario",
    "monte_carlo",
]
