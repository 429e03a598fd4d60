"""Compare the numba and pure-numpy kernel backends.

Runs each backend in a subprocess (the backend is chosen once at import via
HWDKIT_BACKEND), times conv/pool forward+backward on backbone-sized tensors,
and checks that both backends agree bitwise-closely on identical inputs.

Usage: python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import json
import os
import subprocess
import sys
import tempfile

_WORKER = r"""
import json, os, sys, time
import numpy as np
from hwdkit import kernels

def rng32(seed, shape):
    return np.random.default_rng(seed).uniform(-1, 1, shape).astype(np.float32)

repeats = int(sys.argv[1])
cases = {
    "conv 64x32x256": (rng32(0, (64, 32, 256)), rng32(1, (64, 64, 3, 3)), rng32(2, (64,))),
    "conv 128x2x16": (rng32(3, (128, 2, 16)), rng32(4, (128, 128, 3, 3)), rng32(5, (128,))),
}
out = {"backend": kernels.BACKEND, "timings": {}, "checks": {}}

for name, (x, w, b) in cases.items():
    y = kernels.conv2d_forward(x, w, b)  # warm up (numba compiles here)
    gy = rng32(9, y.shape)
    kernels.conv2d_backward(x, w, gy)
    t0 = time.perf_counter()
    for _ in range(repeats):
        y = kernels.conv2d_forward(x, w, b)
    t1 = time.perf_counter()
    for _ in range(repeats):
        kernels.conv2d_backward(x, w, gy)
    t2 = time.perf_counter()
    out["timings"][name + " fwd"] = (t1 - t0) / repeats
    out["timings"][name + " bwd"] = (t2 - t1) / repeats
    out["checks"][name] = float(np.float64(y.astype(np.float64).sum()))

x = rng32(6, (64, 32, 256))
kernels.maxpool2_forward(x)
t0 = time.perf_counter()
for _ in range(repeats):
    p, idx = kernels.maxpool2_forward(x)
t1 = time.perf_counter()
out["timings"]["pool 64x32x256 fwd"] = (t1 - t0) / repeats
out["checks"]["pool 64x32x256"] = float(p.astype(np.float64).sum())

json.dump(out, open(sys.argv[2], "w"))
"""


def run_backend(backend, repeats):
    env = dict(os.environ, HWDKIT_BACKEND=backend)
    with tempfile.NamedTemporaryFile(mode="r", suffix=".json") as f:
        subprocess.run([sys.executable, "-c", _WORKER, str(repeats), f.name],
                       env=env, check=True)
        return json.load(open(f.name))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=10)
    args = ap.parse_args()

    results = {b: run_backend(b, args.repeats) for b in ("numpy", "numba")}
    for b in results:
        assert results[b]["backend"] == b, results[b]["backend"]

    print(f"{'case':28s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s}")
    for case in results["numpy"]["timings"]:
        tn = results["numpy"]["timings"][case]
        tb = results["numba"]["timings"][case]
        print(f"{case:28s} {tn * 1e3:9.2f}ms {tb * 1e3:9.2f}ms {tn / tb:7.2f}x")

    print("\nagreement (float64 output sums):")
    for case in results["numpy"]["checks"]:
        a = results["numpy"]["checks"][case]
        b = results["numba"]["checks"][case]
        rel = abs(a - b) / max(abs(a), 1e-12)
        status = "OK" if rel < 1e-6 else "MISMATCH"
        print(f"  {case:26s} numpy={a:.6f} numba={b:.6f} rel={rel:.2e} {status}")
        if rel >= 1e-6:
            sys.exit(1)


if __name__ == "__main__":
    main()
