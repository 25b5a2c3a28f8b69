"""Command-line entry point: ``qpass {enroll,run,attack,verify-bounds,report}``.

Every output file echoes the effective configuration. Exit codes:

0  success
1  a bound check or acceptance condition failed
2  malformed configuration or arguments
3  missing or unreadable fixture
4  output could not be written
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from qpass import __version__
from qpass.primitives import ParameterError, ProtocolParams
from qpass.protocol.parties import (
    ENROLL_STREAM,
    ClassicalPassword,
    ProtocolConfig,
    Prover,
    SmartCard,
    Verifier,
    VerifierStore,
    enroll,
)
from qpass.protocol.session import run_session
from qpass.qcore import QubitRegister, RngStream

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_FIXTURE = 3
EXIT_WRITE = 4

CONFIG_SCHEMA = "qpass.config/1"
FIXTURE_SCHEMA = "qpass.fixture/1"

ATTACK_ALIASES = {
    "no-card": "no-card-forgery",
    "no-card-forgery": "no-card-forgery",
    "card-steal": "card-steal",
    "mitm": "man-in-the-middle",
    "man-in-the-middle": "man-in-the-middle",
    "intercept-resend": "intercept-resend-decoys",
    "intercept-resend-decoys": "intercept-resend-decoys",
    "accumulate": "accumulate-discarded",
    "accumulate-discarded": "accumulate-discarded",
}


class ConfigError(ValueError):
    """One or more configuration problems, reported together."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class FixtureError(RuntimeError):
    pass


class WriteError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# Configuration
# --------------------------------------------------------------------------


@dataclass
class RunConfig:
    """Everything a command needs, after merging file values and flags."""

    N: int = 8
    N_D: int = 0
    mode: str = "basic"
    alpha: float = 0.5
    delta: float = math.pi / 3
    decoy_error_budget: int = 0
    seed: int | None = None
    trials: int = 1000
    attack_kind: str | None = None
    attack_params: dict = field(default_factory=dict)
    output_dir: str | None = None

    def protocol(self) -> ProtocolConfig:
        return ProtocolConfig(
            N=self.N,
            N_D=self.N_D,
            params=ProtocolParams(self.alpha, self.delta),
            seed=self.seed or 0,
            mode=self.mode,
            decoy_error_budget=self.decoy_error_budget,
        )

    def validate(self, need_seed: bool = False) -> None:
        problems = []
        if need_seed and self.seed is None:
            problems.append("--seed is required for this command")
        if not 0.0 < self.alpha < 1.0:
            problems.append(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 < self.delta < math.pi / 2:
            problems.append(f"delta must lie in (0, pi/2), got {self.delta}")
        if self.N < 1:
            problems.append(f"N must be >= 1, got {self.N}")
        if self.N_D < 0:
            problems.append(f"N_D must be >= 0, got {self.N_D}")
        if self.mode not in ("basic", "extended"):
            problems.append(f"mode must be basic or extended, got {self.mode!r}")
        elif self.mode == "extended" and self.N_D < 1:
            problems.append("extended mode needs --decoys >= 1")
        if self.trials < 1:
            problems.append(f"trials must be >= 1, got {self.trials}")
        if self.decoy_error_budget < 0:
            problems.append("decoy_error_budget must be >= 0")
        if self.attack_kind is not None and self.attack_kind not in ATTACK_ALIASES:
            problems.append(f"unknown attack kind {self.attack_kind!r}; choose from {sorted(ATTACK_ALIASES)}")
        if problems:
            raise ConfigError(problems)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["schema"] = CONFIG_SCHEMA
        d["xi"] = math.cos(self.delta)
        return d


_FILE_KEYS = {
    "N": int,
    "N_D": int,
    "mode": str,
    "alpha": float,
    "delta": float,
    "decoy_error_budget": int,
    "seed": int,
    "trials": int,
}


def load_config_file(path: str | None) -> tuple[RunConfig, list[str]]:
    """Read a JSON config. Problems are collected rather than raised."""
    cfg, problems = RunConfig(), []
    if path is None:
        return cfg, problems
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        return cfg, [f"cannot read config {path}: {exc}"]
    if not isinstance(data, dict):
        return cfg, ["config must be a JSON object"]
    schema = data.get("schema")
    if schema != CONFIG_SCHEMA:
        problems.append(f"config schema must be {CONFIG_SCHEMA!r}, got {schema!r}")
    flat = dict(data.get("protocol", {}))
    for k in ("seed", "trials"):
        if k in data:
            flat[k] = data[k]
    if "xi" in flat:
        if "delta" in flat:
            problems.append("give either xi or delta, not both")
        else:
            try:
                flat["delta"] = math.acos(float(flat.pop("xi")))
            except (TypeError, ValueError) as exc:
                problems.append(f"xi: {exc}")
    for k, v in flat.items():
        if k not in _FILE_KEYS:
            problems.append(f"unknown protocol key {k!r}")
            continue
        try:
            setattr(cfg, k, _FILE_KEYS[k](v))
        except (TypeError, ValueError):
            problems.append(f"{k}: cannot convert {v!r}")
    attack = data.get("attack", {})
    if attack:
        cfg.attack_kind = attack.get("kind")
        cfg.attack_params = dict(attack.get("params", {}))
    cfg.output_dir = data.get("output", {}).get("dir")
    return cfg, problems


def resolve_config(args, need_seed: bool = False) -> RunConfig:
    """File values, then flag overrides, then validation."""
    cfg, problems = load_config_file(getattr(args, "config", None))
    overrides = {
        "N": getattr(args, "N", None),
        "N_D": getattr(args, "decoys", None),
        "mode": getattr(args, "mode", None),
        "alpha": getattr(args, "alpha", None),
        "delta": getattr(args, "delta", None),
        "decoy_error_budget": getattr(args, "decoy_error_budget", None),
        "seed": getattr(args, "seed", None),
        "trials": getattr(args, "trials", None),
        "attack_kind": getattr(args, "kind", None),
        "output_dir": getattr(args, "output_dir", None),
    }
    xi = getattr(args, "xi", None)
    if xi is not None:
        if overrides["delta"] is not None:
            problems.append("give either --xi or --delta, not both")
        elif not 0.0 < xi < 1.0:
            problems.append(f"xi must lie in (0, 1), got {xi}")
        else:
            overrides["delta"] = math.acos(xi)
    for k, v in overrides.items():
        if v is not None:
            setattr(cfg, k, v)
    try:
        cfg.validate(need_seed)
    except ConfigError as exc:
        problems.extend(exc.problems)
    if problems:
        raise ConfigError(problems)
    return cfg


# --------------------------------------------------------------------------
# Output helpers
# --------------------------------------------------------------------------


def _outdir(cfg: RunConfig) -> Path:
    from qpass.analysis.report import output_dir

    try:
        return output_dir(cfg.output_dir)
    except OSError as exc:
        raise WriteError(f"cannot create output directory: {exc}") from exc


def _write(fn, obj, path: Path) -> Path:
    try:
        return fn(obj, path)
    except OSError as exc:
        raise WriteError(f"cannot write {path}: {exc}") from exc


def _write_json(obj, path):
    from qpass.analysis.report import write_json

    return _write(write_json, obj, path)


def _write_csv(rows, path):
    from qpass.analysis.report import write_csv

    return _write(write_csv, rows, path)


# --------------------------------------------------------------------------
# Fixtures
# --------------------------------------------------------------------------


def _cplx_to_pairs(a: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def fixture_dict(card: SmartCard, store: VerifierStore, password: ClassicalPassword, cfg: RunConfig) -> dict:
    reg = card.register
    return {
        "schema": FIXTURE_SCHEMA,
        "note": "simulation artifact; plain-text K and states, not a secure storage format",
        "config": cfg.to_dict(),
        "password": str(password),
        "labels": list(reg.labels),
        "card_label": card.label,
        "store_label": store.label,
        "blocks": _cplx_to_pairs(reg.data),
    }


def load_fixture(path: str):
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FixtureError(f"cannot read fixture {path}: {exc}") from exc
    if data.get("schema") != FIXTURE_SCHEMA:
        raise FixtureError(f"fixture schema must be {FIXTURE_SCHEMA!r}")
    try:
        blocks = np.array(data["blocks"], dtype=np.float64)
        reg = QubitRegister(data["labels"], blocks[..., 0] + 1j * blocks[..., 1])
        card = SmartCard(reg, data["card_label"])
        store = VerifierStore(reg, data["store_label"])
        password = ClassicalPassword.from_string(data["password"])
    except (KeyError, ValueError, IndexError) as exc:
        raise FixtureError(f"malformed fixture {path}: {exc}") from exc
    return card, store, password, data.get("config", {})


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def cmd_enroll(args) -> int:
    cfg = resolve_config(args)
    pcfg = cfg.protocol()
    rng = RngStream(cfg.seed or 0, ENROLL_STREAM)
    try:
        card, store, password = enroll(pcfg, args.password, rng=rng)
    except ValueError as exc:
        raise ConfigError([str(exc)]) from exc
    path = Path(args.out) if args.out else _outdir(cfg) / "fixture.json"
    _write_json(fixture_dict(card, store, password, cfg), path)
    print(f"enrolled N={pcfg.N} -> {path}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = resolve_config(args, need_seed=True)
    pcfg = cfg.protocol()
    if args.fixture:
        card, store, password, _ = load_fixture(args.fixture)
        if len(card) != pcfg.N:
            raise ConfigError([f"fixture holds {len(card)} blocks but N = {pcfg.N}"])
    else:
        card, store, password = enroll(pcfg, rng=RngStream(cfg.seed, ENROLL_STREAM))
    prover = Prover(card, password, pcfg.params)
    verifier = Verifier(store, params=pcfg.params)
    transcripts = []
    for r in range(args.sessions):
        tr = run_session(prover, verifier, pcfg, round_id=r, rng=RngStream(cfg.seed, r))
        transcripts.append(tr.to_dict())
    out = {"config": cfg.to_dict(), "transcripts": transcripts}
    path = Path(args.out) if args.out else _outdir(cfg) / "transcripts.json"
    _write_json(out, path)
    verdicts = [t["verdict"] for t in transcripts]
    print(f"{len(verdicts)} session(s): " + ", ".join(f"{v}={verdicts.count(v)}" for v in sorted(set(verdicts))))
    print(f"transcripts -> {path}")
    return EXIT_OK


def _stats_row(stats, target, scenario: str, metric: str, cfg: RunConfig) -> dict:
    row = {"scenario": scenario, "metric": metric, **stats.to_dict()}
    row["target"] = target
    row["within_4sigma"] = None if target is None else stats.within(target)
    row["config"] = json.dumps(cfg.to_dict(), sort_keys=True)
    return row


def cmd_attack(args) -> int:
    from qpass import adversary
    from qpass.analysis.montecarlo import Scenario, monte_carlo

    cfg = resolve_config(args, need_seed=True)
    if cfg.attack_kind is None:
        raise ConfigError(["--kind (or attack.kind in the config) is required"])
    kind = ATTACK_ALIASES[cfg.attack_kind]
    pcfg = cfg.protocol()
    params = dict(cfg.attack_params)
    for k in ("forged", "policy", "angle", "rounds", "password"):
        v = getattr(args, k, None)
        if v is not None:
            params[k] = v
    out = _outdir(cfg)
    rows = []

    if kind == "accumulate-discarded":
        rounds = int(params.get("rounds", 200))
        checkpoints = sorted({1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, rounds} & set(range(1, rounds + 1)))
        rep = adversary.attack_accumulate_discarded(
            rounds, pcfg, RngStream(cfg.seed, 0), trials=cfg.trials, checkpoints=checkpoints
        )
        for i, c in enumerate(rep.checkpoints):
            st = rep.stats(i)
            target = adversary.majority_accuracy(rep.single_shot, c) if pcfg.mode == "basic" else 0.5
            rows.append(_stats_row(st, target, kind, f"accuracy@{c}", cfg))
    else:
        options = {}
        if kind in ("no-card-forgery", "man-in-the-middle"):
            options["forged"] = params.get("forged", "best" if kind == "no-card-forgery" else "psi00")
        if kind == "man-in-the-middle":
            options["forward"] = bool(params.get("forward", True))
        if kind == "card-steal" and "password" in params:
            pw = params["password"]
            options["password"] = json.loads(pw) if isinstance(pw, str) else pw
        if kind == "intercept-resend-decoys":
            if pcfg.mode != "extended":
                raise ConfigError(["intercept-resend needs --mode extended with --decoys >= 1"])
            policy = {"kind": params.get("policy", "random")}
            if "angle" in params:
                policy["angle"] = float(params["angle"])
            options["policy"] = policy
        metrics = ["block", "session"] if kind != "man-in-the-middle" else ["session"]
        for metric in metrics:
            sc = Scenario(
                kind,
                kind,
                mode=pcfg.mode,
                N=pcfg.N,
                N_D=pcfg.N_D,
                alpha=cfg.alpha,
                xi=math.cos(cfg.delta),
                metric=metric,
                options=options,
            )
            st = monte_carlo(sc, cfg.trials, cfg.seed, workers=args.workers)
            rows.append(_stats_row(st, sc.target(), kind, metric, cfg))
    path = Path(args.out) if args.out else out / f"attack_{kind}.csv"
    _write_csv(rows, path)
    for r in rows:
        tgt = "n/a" if r["target"] is None else f"{r['target']:.6g}"
        print(f"{r['metric']:>14s}: {r['detections']}/{r['trials']} = {r['estimate']:.6f} (target {tgt})")
    print(f"stats -> {path}")
    return EXIT_OK


def cmd_verify_bounds(args) -> int:
    from qpass.analysis.report import GRID, bounds_summary, verify_bounds

    cfg = resolve_config(args)
    single = args.alpha is not None or args.delta is not None or args.xi is not None
    alphas = [cfg.alpha] if single else list(GRID)
    xis = [math.cos(cfg.delta)] if single else list(GRID)
    reports = verify_bounds(
        alphas,
        xis,
        forgeries=args.forgeries,
        seed=cfg.seed or 0,
        optimize=not args.no_optimize,
        starts=args.starts,
        budget=args.budget,
    )
    out = _outdir(cfg)
    rows = [r.to_dict() for r in reports]
    csv_path = Path(args.out) if args.out else out / "bounds.csv"
    _write_csv(rows, csv_path)
    summary = bounds_summary(reports)
    summary["config"] = cfg.to_dict()
    _write_json({**summary, "reports": rows}, csv_path.with_suffix(".json"))
    for r in reports:
        if not single and r.passed:
            continue
        pv = ", ".join(f"{k}={v:.4g}" for k, v in r.params.items())
        print(f"{r.verdict.upper():4s} {r.quantity:26s} [{pv}] closed={r.closed_form:.10g} oracle={r.oracle:.10g} |d|={r.discrepancy:.2e}")
    print(f"{len(reports)} checks, {sum(not r.passed for r in reports)} failed -> {csv_path}")
    return EXIT_OK if summary["passed"] else EXIT_CHECK_FAILED


def cmd_report(args) -> int:
    import csv

    from qpass.analysis.report import headline

    cfg = resolve_config(args)
    out = _outdir(cfg)
    params = ProtocolParams(cfg.alpha, cfg.delta)
    summary = {"config": cfg.to_dict(), "headline": headline(params), "bounds": None, "attacks": {}, "sessions": None}
    bpath = out / "bounds.json"
    if bpath.exists():
        b = json.loads(bpath.read_text())
        summary["bounds"] = {k: b[k] for k in ("passed", "checks", "quantities")}
    for p in sorted(out.glob("attack_*.csv")):
        with p.open() as fh:
            summary["attacks"][p.stem[len("attack_"):]] = [
                {k: v for k, v in row.items() if k != "config"} for row in csv.DictReader(fh)
            ]
    tpath = out / "transcripts.json"
    if tpath.exists():
        ts = json.loads(tpath.read_text())["transcripts"]
        verdicts = [t["verdict"] for t in ts]
        summary["sessions"] = {v: verdicts.count(v) for v in sorted(set(verdicts))}
    _write_json(summary, out / "summary.json")
    _write_csv(summary["headline"]["curves"], out / "summary.csv")
    h = summary["headline"]
    print(f"p_n closed form {h['p_n']['closed_form']:.6f}, grid {h['p_n']['grid']:.6f}")
    print(f"p_s upper bound {h['p_s']['upper_bound']}, largest achievable {h['p_s']['supremum']:.6f}")
    print(f"summary -> {out / 'summary.json'}")
    return EXIT_OK


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------


def _protocol_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file (flags override it)")
    p.add_argument("--alpha", type=float, help="password amplitude alpha in (0, 1)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--delta", type=float, help="lock phase delta in radians, (0, pi/2)")
    g.add_argument("--xi", type=float, help="sets delta = arccos(xi)")
    p.add_argument("--N", type=int, help="password length in bits")
    p.add_argument("--decoys", type=int, help="decoy count N_D (extended mode)")
    p.add_argument("--mode", choices=("basic", "extended"))
    p.add_argument("--decoy-error-budget", type=int)
    p.add_argument("--output-dir", help="default: $QPASS_OUTPUT_DIR or ./qpass-out")
    p.add_argument("--out", help="explicit output file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qpass", description="Quantum password authentication simulator.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enroll", help="create a session fixture (states + K)")
    _protocol_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--password", help="bit string K (random if omitted)")
    p.set_defaults(func=cmd_enroll)

    p = sub.add_parser("run", help="run honest sessions and write transcripts")
    _protocol_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--fixture", help="fixture from 'enroll' (fresh enrollment if omitted)")
    p.add_argument("--sessions", type=int, default=1)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("attack", help="Monte Carlo an attack; write DetectionStats CSV")
    _protocol_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--kind", help="no-card, card-steal, mitm, intercept-resend or accumulate")
    p.add_argument("--trials", type=int, help="sessions (accumulate: independent cards)")
    p.add_argument("--forged", help="no-card / mitm forgery: best or psi00")
    p.add_argument("--policy", choices=("random", "Z", "X", "angle"), help="intercept-resend basis policy")
    p.add_argument("--angle", type=float, help="basis angle for --policy angle")
    p.add_argument("--rounds", type=int, help="accumulate: rounds per card")
    p.add_argument("--password", help='card-steal rho_E as JSON, e.g. {"r": 1.0}')
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("verify-bounds", help="closed form vs oracle vs optimiser checks")
    _protocol_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--forgeries", type=int, default=100)
    p.add_argument("--starts", type=int, default=64)
    p.add_argument("--budget", type=int, default=400_000)
    p.add_argument("--no-optimize", action="store_true")
    p.set_defaults(func=cmd_verify_bounds)

    p = sub.add_parser("report", help="aggregate outputs and headline numbers")
    _protocol_flags(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print("configuration error(s):", file=sys.stderr)
        for prob in exc.problems:
            print(f"  - {prob}", file=sys.stderr)
        return EXIT_CONFIG
    except ParameterError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FixtureError as exc:
        print(f"fixture error: {exc}", file=sys.stderr)
        return EXIT_FIXTURE
    except WriteError as exc:
        print(f"write error: {exc}", file=sys.stderr)
        return EXIT_WRITE


if __name__ == "__main__":
    sys.exit(main())
