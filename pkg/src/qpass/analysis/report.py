"""Bound verification over parameter grids, headline numbers and writers."""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

from qpass.adversary import CardStealPassword, ForgedInput
from qpass.analysis.bounds import (
    PS_UPPER_BOUND,
    TOL_ALGEBRAIC,
    TOL_GRID,
    BoundCheckReport,
    alternate_lock,
    decoy_session_detection,
    delta_e_closed_form,
    delta_e_direct,
    lock_residuals,
    no_card_detection_bound,
    pn_closed_form,
    pn_minimize_direct,
    ps_closed_form,
    ps_direct,
    ps_supremum,
    ps_supremum_closed_form,
    random_unitary2,
    total_detection,
)
from qpass.analysis.optimize import ps_maximize
from qpass.primitives import ProtocolParams
from qpass.qcore import RngStream

GRID = tuple(float(v) for v in np.linspace(0.1, 0.9, 9))
TOL_LOCK = 1e-12
TOL_OPTIMIZER = 1e-6


def _pdict(p: ProtocolParams) -> dict:
    return {"alpha": p.alpha, "xi": p.xi, "delta": p.delta}


def pw_grid(n_r: int = 5, n_x: int = 5, n_y: int = 3) -> list[CardStealPassword]:
    """Points of the Bloch ball: ``r`` levels, then ``x``, then ``y`` inside."""
    out = []
    for r in np.linspace(0.0, 1.0, n_r):
        s = np.sqrt(r * (1.0 - r))
        for x in np.linspace(-s, s, n_x):
            ymax = np.sqrt(max(r * (1.0 - r) - x * x, 0.0))
            for y in np.linspace(-ymax, ymax, n_y):
                out.append(CardStealPassword(float(r), float(x), float(y)))
    return out


def check_point(
    params: ProtocolParams,
    *,
    forgeries: int = 100,
    seed: int = 0,
    optimize: bool = True,
    starts: int = 64,
    budget: int = 400_000,
) -> list[BoundCheckReport]:
    """Every closed-form / oracle / optimiser check at one parameter point."""
    pd = _pdict(params)
    rng = RngStream(seed, 0)
    reports = []

    res = lock_residuals(params)
    worst = max(res, key=res.get)
    reports.append(
        BoundCheckReport("lock_unitary", pd, 0.0, res[worst], TOL_LOCK, note=f"worst property: {worst}")
    )

    alt = alternate_lock(params, random_unitary2(rng.child(1)))
    ps_worst = comp_worst = (0.0, 0.0, 0.0)
    for i in range(forgeries):
        f = ForgedInput.random(rng.child(100 + i))
        c, o, o2 = ps_closed_form(f, params), ps_direct(f, params), ps_direct(f, params, alt)
        if abs(c - o) >= ps_worst[2]:
            ps_worst = (c, o, abs(c - o))
        if abs(o - o2) >= comp_worst[2]:
            comp_worst = (o, o2, abs(o - o2))
    reports.append(BoundCheckReport("ps_direct", pd, *ps_worst[:2], TOL_ALGEBRAIC, note=f"{forgeries} random forgeries"))
    reports.append(
        BoundCheckReport("ps_completion_invariance", pd, *comp_worst[:2], TOL_ALGEBRAIC, note="two u_ij completions")
    )

    sup, _ = ps_supremum(params)
    opt = ps_maximize(params, budget=budget, starts=starts, seed=seed) if optimize else None
    best = opt.value if opt is not None else sup
    reports.append(
        BoundCheckReport(
            "ps_supremum",
            pd,
            ps_supremum_closed_form(params),
            sup,
            TOL_OPTIMIZER,
            optimizer=best,
            discrepancy=max(abs(ps_supremum_closed_form(params) - sup), abs(best - sup)),
            note="closed form (1 + alpha eta / d)/4, top eigenvalue, optimiser",
        )
    )
    reports.append(
        BoundCheckReport(
            "ps_upper_bound",
            pd,
            PS_UPPER_BOUND,
            sup,
            1e-9,
            optimizer=best,
            discrepancy=max(0.0, best - PS_UPPER_BOUND, sup - PS_UPPER_BOUND),
            note="inequality p_s <= 1/2; attainment is not checked here",
        )
    )

    d_worst, y_spread = (0.0, 0.0, 0.0), 0.0
    groups: dict[tuple, list[float]] = {}
    for pw in pw_grid():
        c, o = delta_e_closed_form(pw, params), delta_e_direct(pw, params)
        if abs(c - o) >= d_worst[2]:
            d_worst = (c, o, abs(c - o))
        groups.setdefault((round(pw.r, 12), round(pw.x, 12)), []).append(o)
    y_spread = max(max(v) - min(v) for v in groups.values())
    reports.append(BoundCheckReport("delta_e_direct", pd, *d_worst[:2], TOL_ALGEBRAIC, note="5x5x3 (r, x, y) grid"))
    reports.append(
        BoundCheckReport("delta_e_y_invariance", pd, 0.0, y_spread, TOL_ALGEBRAIC, note="spread over y at fixed (r, x)")
    )

    pn_c = pn_closed_form(params)
    pn_g, _ = pn_minimize_direct(params)
    reports.append(BoundCheckReport("pn", pd, pn_c, pn_g, TOL_GRID, note="grid search over pure rho_E"))
    return reports


def verify_bounds(
    alphas=GRID,
    xis=GRID,
    *,
    forgeries: int = 100,
    seed: int = 0,
    optimize: bool = True,
    starts: int = 64,
    budget: int = 400_000,
) -> list[BoundCheckReport]:
    """Run :func:`check_point` over the ``alphas x xis`` grid in grid order."""
    out = []
    for i, a in enumerate(alphas):
        for j, x in enumerate(xis):
            out.extend(
                check_point(
                    ProtocolParams.from_xi(a, x),
                    forgeries=forgeries,
                    seed=seed + 1000 * i + j,
                    optimize=optimize,
                    starts=starts,
                    budget=budget,
                )
            )
    return out


def headline(params: ProtocolParams | None = None, ns=(1, 2, 4, 8, 16, 20, 32, 64)) -> dict:
    """Headline security numbers and detection curves against ``N``."""
    params = params or ProtocolParams.from_xi(0.5, 0.5)
    pn = pn_closed_form(params)
    sup, _ = ps_supremum(params)
    return {
        "params": _pdict(params),
        "p_n": {"closed_form": pn, "grid": pn_minimize_direct(params)[0]},
        "p_s": {"upper_bound": PS_UPPER_BOUND, "supremum": sup, "supremum_closed_form": ps_supremum_closed_form(params)},
        "delta_e_r1": delta_e_closed_form(CardStealPassword(1.0, 0.0, 0.0), params),
        "curves": [
            {
                "N": n,
                "card_steal": total_detection(pn, n),
                "no_card_bound": no_card_detection_bound(n),
                "no_card_best_forgery": total_detection(1.0 - sup, n),
                "decoy_intercept": decoy_session_detection(n),
            }
            for n in ns
        ],
    }


# --------------------------------------------------------------------------
# Writers
# --------------------------------------------------------------------------


def output_dir(path: str | os.PathLike | None = None) -> Path:
    """``path``, else ``$QPASS_OUTPUT_DIR``, else ``./qpass-out``; created."""
    p = Path(path or os.environ.get("QPASS_OUTPUT_DIR") or "qpass-out")
    p.mkdir(parents=True, exist_ok=True)
    return p


def write_csv(rows: list[dict], path: str | os.PathLike) -> Path:
    path = Path(path)
    keys: list[str] = []
    for r in rows:
        keys.extend(k for k in r if k not in keys)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        w.writerows(rows)
    return path


def write_json(obj, path: str | os.PathLike) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=False, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def bounds_summary(reports: list[BoundCheckReport]) -> dict:
    failed = [r.to_dict() for r in reports if not r.passed]
    by_q: dict[str, dict] = {}
    for r in reports:
        q = by_q.setdefault(r.quantity, {"checks": 0, "failed": 0, "max_discrepancy": 0.0, "tolerance": r.tolerance})
        q["checks"] += 1
        q["failed"] += int(not r.passed)
        q["max_discrepancy"] = max(q["max_discrepancy"], r.discrepancy)
    return {"passed": not failed, "checks": len(reports), "quantities": by_q, "failures": failed}
