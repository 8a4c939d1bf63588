import os
import subprocess
import sys

SCRIPT = """
import numpy as np
from planar_riccati import SystemSpec, solve_system
from planar_riccati import backend_name
tr = solve_system(SystemSpec.of(a12="1", a21="-1"), (1.0, 0.0), (0.0, 6.0), tol=1e-10)
print(backend_name(), abs(float(tr(6.0, "phi")) - np.cos(6.0)))
"""


def _run(flag):
    env = dict(os.environ, PLANAR_RICCATI_DISABLE_JIT=flag)
    out = subprocess.run([sys.executable, "-c", SCRIPT], capture_output=True, text=True, env=env, timeout=600)
    assert out.returncode == 0, out.stderr
    name, err = out.stdout.split()
    return name, float(err)


def test_pure_python_backend_matches_compiled():
    slow, slow_err = _run("1")
    fast, fast_err = _run("0")
    assert slow == "python" and fast == "numba"
    assert slow_err < 1e-8 and fast_err < 1e-8
