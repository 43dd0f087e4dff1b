"""Time the hot kernels with numba and with the pure-Python fallback.

Each backend runs in its own interpreter because the choice is fixed at
import time by ``RWRE_DISABLE_NUMBA``.  Usage::

    python benchmarks/bench_kernels.py [--scale 1.0]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import textwrap

WORKER = textwrap.dedent("""
    import json, sys, time
    from rwre import env as E, backend
    from rwre.walk import sample_blocks, run_quenched, first_regeneration_times
    from rwre.exactq import propagate

    scale = float(sys.argv[1])
    cases = {
        "quenched_path 1d": lambda: run_quenched(E.Environment(E.one_two_jump(), 1), 0, int(20_000 * scale), 2),
        "sample_blocks 1d": lambda: sample_blocks(E.lazy_nn(), count=int(2_000 * scale), master_seed=1),
        "sample_blocks 2d": lambda: sample_blocks(E.abscont(), count=int(1_000 * scale), master_seed=1),
        "first_regeneration": lambda: first_regeneration_times(E.lazy_nn(), int(2_000 * scale), 1),
        "propagate 1d": lambda: propagate(E.Environment(E.lazy_nn(), 3), 0, int(2_000 * scale)),
    }
    out = {"backend": backend(), "seconds": {}}
    for name, fn in cases.items():
        fn()  # warm-up (compilation or cache load)
        t = time.perf_counter()
        fn()
        out["seconds"][name] = time.perf_counter() - t
    print(json.dumps(out))
""")


def run(disable: bool, scale: float) -> dict:
    env = {**os.environ, "RWRE_DISABLE_NUMBA": "1" if disable else "0"}
    r = subprocess.run([sys.executable, "-c", WORKER, str(scale)], capture_output=True, text=True, env=env, check=True)
    return json.loads(r.stdout)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", type=float, default=1.0, help="multiplies every workload size")
    ap.add_argument("--json", action="store_true", help="print raw JSON instead of a table")
    args = ap.parse_args()
    fast, slow = run(False, args.scale), run(True, args.scale)
    if args.json:
        print(json.dumps({"numba": fast, "fallback": slow}, indent=2))
        return
    print(f"{'kernel':<22}{fast['backend']:>12}{slow['backend']:>12}{'speed-up':>10}")
    for name, t_fast in fast["seconds"].items():
        t_slow = slow["seconds"][name]
        print(f"{name:<22}{t_fast:>11.4f}s{t_slow:>11.4f}s{t_slow / t_fast:>9.1f}x")


if __name__ == "__main__":
    main()
