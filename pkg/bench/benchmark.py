#!/usr/bin/env python3
"""Compare the compiled integration kernel against the pure-Python lane.

The workload is the bisection-style usage pattern: one-sided shots to the
tail abscissa at several velocities.  The pure lane is exercised in a
subprocess with HARMAP_BACKEND=python so that both lanes load cleanly.

Run:  python bench/benchmark.py [--shots 120]
"""

import argparse
import json
import os
import subprocess
import sys
import time

_WORKER = r"""
import json, sys, time
import harmap
from harmap import ActionParams, State
from harmap.integrate import integrate

shots = int(sys.argv[1])
p = ActionParams(4, 1)
t0 = time.perf_counter()
acc = 0.0
for i in range(shots):
    v = -1.0 + 2.0 * i / max(1, shots - 1)
    traj = integrate(p, State(0.0, 1.9634954084936207, v), -23.7, tol=1e-12, hmax=1.0)
    acc += traj.rs[0]
dt = time.perf_counter() - t0
print(json.dumps({"backend": harmap.backend_name(), "seconds": dt,
                  "shots": shots, "checksum": acc}))
"""


def run_lane(backend: str, shots: int) -> dict:
    env = dict(os.environ)
    env["HARMAP_BACKEND"] = backend
    out = subprocess.run(
        [sys.executable, "-c", _WORKER, str(shots)],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--shots", type=int, default=120)
    args = ap.parse_args()

    res_py = run_lane("python", args.shots)
    res_c = run_lane("", args.shots)
    print(f"workload: {args.shots} one-sided shots, g=4 m=1, tol 1e-12, |x| -> 23.7")
    print(f"  pure python : {res_py['seconds']:8.3f} s   (backend {res_py['backend']})")
    print(f"  compiled    : {res_c['seconds']:8.3f} s   (backend {res_c['backend']})")
    if res_c["backend"] != "cython":
        print("compiled kernel not available; both lanes ran pure Python")
        return
    speedup = res_py["seconds"] / res_c["seconds"]
    dev = abs(res_py["checksum"] - res_c["checksum"])
    print(f"  speedup     : {speedup:8.1f} x")
    print(f"  |checksum difference| = {dev:.3e}")


if __name__ == "__main__":
    main()
