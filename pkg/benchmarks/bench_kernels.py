"""Compare the numba and numpy paths of the per-cell Stiefel kernels.

Each backend runs in its own interpreter because the switch is read at import
time. Usage::

    python3 benchmarks/bench_kernels.py [--cells 400 6400 14400] [--repeat 5] [--solve]

The numba timings exclude compilation (one warm-up call per kernel). Results
of both paths are compared elementwise at the end.
"""

import argparse
import json
import os
import subprocess
import sys
import tempfile
import time
from pathlib import Path

WORKER = r"""
import json, sys, time, warnings
import numpy as np
from isoplate import _accel, stiefel

cells, repeat, solve, dump = json.loads(sys.argv[1])
rng = np.random.default_rng(7)
out = {"backend": _accel.backend(), "kernels": {}}
arrays = {}
for n in cells:
    U = stiefel.random_stiefel(rng, n)
    W = stiefel.batch_tangent_project(U, 0.3 * rng.standard_normal((n, 3, 2)))
    for name, fn in (("batch_exp_map", stiefel.batch_exp_map), ("batch_dexp_jacobian", stiefel.batch_dexp_jacobian)):
        res = fn(U, W, 2.0)  # warm-up, triggers compilation
        best = np.inf
        for _ in range(repeat):
            t0 = time.perf_counter()
            fn(U, W, 2.0)
            best = min(best, time.perf_counter() - t0)
        out["kernels"][f"{name}/{n}"] = best
        arrays[f"{name}_{n}"] = res
if solve:
    from isoplate.bench_io import benchmarks
    warnings.simplefilter("ignore")
    t0 = time.perf_counter()
    r = benchmarks.run(benchmarks.weak_force(10))
    out["solve"] = {"wall": time.perf_counter() - t0, "E_h": r.report.E_h, "newton": r.report.newton_total}
np.savez(dump, **arrays)
print(json.dumps(out))
"""


def run_backend(flag, args, dump):
    env = dict(os.environ, ISOPLATE_NUMBA=flag)
    payload = json.dumps([args.cells, args.repeat, args.solve, dump])
    proc = subprocess.run([sys.executable, "-c", WORKER, payload], env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", type=int, nargs="+", default=[400, 6400, 14400])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--solve", action="store_true", help="also time the 400-cell weak-force solve")
    args = ap.parse_args(argv)

    import numpy as np

    with tempfile.TemporaryDirectory() as tmp:
        dumps = {f: str(Path(tmp) / f"{f}.npz") for f in ("1", "0")}
        res = {f: run_backend(f, args, dumps[f]) for f in ("1", "0")}
        a, b = np.load(dumps["1"]), np.load(dumps["0"])
        gap = max(float(np.abs(a[k] - b[k]).max()) for k in a.files)

    nb, npy = res["1"], res["0"]
    print(f"{'kernel':<28}{'cells':>7}{nb['backend']:>12}{npy['backend']:>12}{'speedup':>9}")
    for key, t_nb in nb["kernels"].items():
        name, n = key.split("/")
        t_np = npy["kernels"][key]
        print(f"{name:<28}{n:>7}{t_nb * 1e3:>10.2f}ms{t_np * 1e3:>10.2f}ms{t_np / t_nb:>8.1f}x")
    if args.solve:
        for r in (nb, npy):
            s = r["solve"]
            print(f"weak-force 400 solve [{r['backend']}]: {s['wall']:.2f} s, E_h {s['E_h']:.6e}, Newton {s['newton']}")
    print(f"max |numba - numpy| over all kernel outputs: {gap:.2e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
