"""Compare the numba and numpy screening kernels.

Two measurements:

* micro: ``_kernels.screen`` on random bases with k non-basic coordinates,
  for a few k.  Both backends must return the same mask.
* end to end: vertex enumeration of the 18-ray assignment polytope, which
  is the heaviest call the package makes.

Usage::

    python3 benchmarks/bench_vertex_kernel.py [--repeat 3] [--json out.json]

The first numba call compiles the kernel (cached on disk afterwards); it is
timed separately and excluded from the per-call figures.
"""

from __future__ import annotations

import argparse
import json
import statistics
import time

import numpy as np

from contextlab import _kernels
from contextlab.ks_polytope import CEGA18, assignment_polytope
from contextlab.polytope_engine import enumerate_vertices


def best_of(fn, repeat: int) -> tuple[float, float]:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times), statistics.median(times)


def micro(repeat: int) -> list[dict]:
    rows = []
    rng = np.random.default_rng(0)
    for nb, r, k in ((2000, 4, 8), (500, 6, 12), (40, 8, 16)):
        c = rng.uniform(-0.2, 1.2, size=(nb, r))
        M = rng.choice([-1.0, -0.5, 0.0, 0.5, 1.0], size=(nb, r, k)) * 0.3
        a = _kernels.screen(c, M, backend="numpy")
        b = _kernels.screen(c, M, backend="numba")
        if not np.array_equal(a, b):
            raise SystemExit(f"backends disagree at nb={nb}, r={r}, k={k}")
        row = {"bases": nb, "basic": r, "free": k, "patterns": nb * (1 << k)}
        for backend in ("numpy", "numba"):
            best, med = best_of(lambda: _kernels.screen(c, M, backend=backend), repeat)
            row[f"{backend}_best_s"] = best
            row[f"{backend}_median_s"] = med
        row["speedup"] = row["numpy_best_s"] / row["numba_best_s"]
        rows.append(row)
    return rows


def end_to_end(repeat: int) -> dict:
    poly = assignment_polytope(CEGA18)
    out: dict = {}
    counts = {}
    for backend in ("numpy", "numba"):
        best, med = best_of(lambda: counts.__setitem__(backend, len(enumerate_vertices(poly, backend=backend))), repeat)
        out[f"{backend}_best_s"] = best
        out[f"{backend}_median_s"] = med
    if counts["numpy"] != counts["numba"]:
        raise SystemExit(f"vertex counts disagree: {counts}")
    out["vertices"] = counts["numba"]
    out["speedup"] = out["numpy_best_s"] / out["numba_best_s"]
    return out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", dest="json_path", default=None, help="Also write the results here.")
    args = ap.parse_args()

    t0 = time.perf_counter()
    _kernels.screen(np.zeros((1, 1)), np.zeros((1, 1, 1)), backend="numba")
    warm = time.perf_counter() - t0

    results = {"numba_warmup_s": warm, "micro": micro(args.repeat), "cega18": end_to_end(args.repeat)}

    print(f"numba warm-up (compile or cache load): {warm:.3f}s")
    print(f"{'bases':>6} {'basic':>5} {'free':>4} {'patterns':>10} {'numpy s':>9} {'numba s':>9} {'speedup':>8}")
    for row in results["micro"]:
        print(f"{row['bases']:>6} {row['basic']:>5} {row['free']:>4} {row['patterns']:>10} "
              f"{row['numpy_best_s']:>9.4f} {row['numba_best_s']:>9.4f} {row['speedup']:>7.1f}x")
    e = results["cega18"]
    print(f"18-ray polytope ({e['vertices']} vertices): numpy {e['numpy_best_s']:.2f}s, "
          f"numba {e['numba_best_s']:.2f}s, speedup {e['speedup']:.1f}x")
    if args.json_path:
        with open(args.json_path, "w", encoding="utf-8") as fh:
            json.dump(results, fh, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
