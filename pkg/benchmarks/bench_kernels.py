"""Time the numba and numpy backends of the ≈ table and closure kernels.

    python3 benchmarks/bench_kernels.py [--agents 4] [--bound 4] [--repeat 3]

Both backends are run on the same tables and their class labels compared.
The first numba call includes compilation and is reported separately.
"""

import argparse
import time

import numpy as np

from gossipscope._accel import HAVE_NUMBA
from gossipscope.core import CallType
from gossipscope.indist import agent_table
from gossipscope.kernels import closure_labels
from gossipscope.universe import Universe


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--agents", type=int, default=4)
    ap.add_argument("--bound", type=int, default=4)
    ap.add_argument("--calltypes", default="p1,pushpull,after;p3,pushpull,before;p2,push,after")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba not installed; only the numpy backend can run")
        return 1

    for tag in args.calltypes.split(";"):
        u = Universe(args.agents, args.bound, CallType.parse(tag))
        t = time.perf_counter()
        agent_table(u, 0, backend="numba")
        compile_t = time.perf_counter() - t

        row = {}
        labels = {}
        for backend in ("numba", "numpy"):
            dt, (flat, bk) = best_of(lambda: agent_table(u, 0, backend=backend), args.repeat)
            dc, lab = best_of(lambda: closure_labels(flat, bk, u.size, backend), args.repeat)
            row[backend] = (dt, dc)
            labels[backend] = lab
        same = np.array_equal(labels["numba"], labels["numpy"])
        (tn, cn), (tp, cp) = row["numba"], row["numpy"]
        print(f"{tag:22s} size={u.size:7d} pairs={bk.pairs:10d}  "
              f"table numba {tn * 1e3:8.1f} ms numpy {tp * 1e3:8.1f} ms ({tp / tn:5.1f}x)  "
              f"closure numba {cn * 1e3:8.1f} ms numpy {cp * 1e3:8.1f} ms ({cp / cn:5.1f}x)  "
              f"first call {compile_t:.2f} s  labels equal: {same}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
