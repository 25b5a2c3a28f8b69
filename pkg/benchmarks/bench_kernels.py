"""Compare the compiled and numpy kernel backends.

Usage::

    python3 benchmarks/bench_kernels.py [--sizes 1000 100000] [--repeat 5]

Each kernel is timed on identical inputs for every available backend and
the outputs are checked for agreement before any timing is reported.
"""

from __future__ import annotations

import argparse
import json
import sys
import timeit

import numpy as np

from qpass._kernels import BACKENDS
from qpass.primitives import ProtocolParams, X_BASIS, Z_BASIS, build_lock_unitary


def _inputs(n: int, seed: int = 0) -> dict:
    g = np.random.default_rng(seed)
    states = g.normal(size=(n, 8)) + 1j * g.normal(size=(n, 8))
    states /= np.linalg.norm(states, axis=1, keepdims=True)
    qubits = states[:, :2] / np.linalg.norm(states[:, :2], axis=1, keepdims=True)
    probs = g.random((n, 4))
    probs /= probs.sum(axis=1, keepdims=True)
    bases = np.where(g.random(n)[:, None, None] < 0.5, Z_BASIS[None], X_BASIS[None])
    return {
        "unitary": build_lock_unitary(ProtocolParams.from_xi(0.5, 0.5)).matrix,
        "states": np.ascontiguousarray(states),
        "qubits": np.ascontiguousarray(qubits),
        "bases": np.ascontiguousarray(bases),
        "probs": np.ascontiguousarray(probs),
        "uniforms": g.random(n),
    }


CASES = {
    "unlock_bell_probs": lambda k, x: k.unlock_bell_probs(x["unitary"], x["states"]),
    "qubit_probs": lambda k, x: k.qubit_probs(x["qubits"], x["bases"]),
    "sample_categorical": lambda k, x: k.sample_categorical(x["probs"], x["uniforms"]),
}


def run(sizes, repeat: int) -> list[dict]:
    rows = []
    for n in sizes:
        x = _inputs(n)
        for case, fn in CASES.items():
            outs = {name: np.asarray(fn(mod, x)) for name, mod in BACKENDS.items()}
            ref = outs["python"]
            for name, out in outs.items():
                if not np.allclose(out, ref, atol=1e-12):
                    raise AssertionError(f"{case}: backend {name} disagrees with python at n={n}")
            times = {}
            for name, mod in BACKENDS.items():
                loops = max(1, 20_000 // n)
                best = min(timeit.repeat(lambda: fn(mod, x), number=loops, repeat=repeat)) / loops
                times[name] = best
            row = {"kernel": case, "n": n, **{f"{k}_s": v for k, v in times.items()}}
            if "cython" in times:
                row["speedup"] = times["python"] / times["cython"]
            rows.append(row)
    return rows


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[100, 10_000, 1_000_000])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", action="store_true", help="print rows as JSON")
    args = ap.parse_args(argv)
    if "cython" not in BACKENDS:
        print("compiled backend not built; timing the numpy fallback only", file=sys.stderr)
    rows = run(args.sizes, args.repeat)
    if args.json:
        print(json.dumps(rows, indent=2))
        return 0
    print(f"{'kernel':20s} {'n':>9s} {'python (ms)':>12s} {'cython (ms)':>12s} {'speedup':>8s}")
    for r in rows:
        cy = r.get("cython_s")
        print(
            f"{r['kernel']:20s} {r['n']:9d} {1e3 * r['python_s']:12.4f} "
            f"{'-' if cy is None else f'{1e3 * cy:12.4f}':>12s} {r.get('speedup', float('nan')):8.2f}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
