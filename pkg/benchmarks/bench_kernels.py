"""Time the integrator kernels with numba and with the interpreted fallback.

Each backend runs in its own interpreter because the switch is read at import:

    python benchmarks/bench_kernels.py [--repeat 3] [--horizon 100]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json, sys, time
from planar_riccati import RiccatiSpec, SystemSpec, backend_name, solve_riccati, solve_system

horizon, repeat = float(sys.argv[1]), int(sys.argv[2])
sys_ = SystemSpec.of("0.1*sin(t)", "1 + 0.5*cos(0.3*t)", "-1 - 0.2*sin(t)^2", "-0.1*cos(t)")
spec = RiccatiSpec.of("1", "0.2*sin(t)", "-1 - 0.3*cos(t)")

def once():
    a = solve_system(sys_, (1.0, 0.0), (0.0, horizon))
    b = solve_riccati(spec, 0.5, (0.0, horizon))
    return a.times.size + b.times.size

t = time.perf_counter(); steps = once(); first = time.perf_counter() - t
runs = []
for _ in range(repeat):
    t = time.perf_counter(); once(); runs.append(time.perf_counter() - t)
print(json.dumps({"backend": backend_name(), "first_call": first, "best": min(runs), "steps": steps}))
"""


def run(disable_jit: bool, horizon: float, repeat: int) -> dict:
    env = dict(os.environ, PLANAR_RICCATI_DISABLE_JIT="1" if disable_jit else "0")
    out = subprocess.run([sys.executable, "-c", WORKLOAD, str(horizon), str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--horizon", type=float, default=100.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    jit = run(False, args.horizon, args.repeat)
    py = run(True, args.horizon, args.repeat)
    print(f"{'backend':<8} {'first call [s]':>15} {'best [s]':>10} {'steps':>7}")
    for r in (jit, py):
        print(f"{r['backend']:<8} {r['first_call']:>15.4f} {r['best']:>10.4f} {r['steps']:>7d}")
    print(f"speed-up (best): {py['best'] / jit['best']:.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
