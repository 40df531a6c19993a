"""Benchmark the numba kernels against the pure-numpy fallback.

Both code paths live in drt_harness.audiopipe._kernels; the backend is
fixed at import time, so each path runs in a subprocess with
DRT_HARNESS_NUMBA set accordingly. Usage:

    python3 benchmarks/bench_kernels.py            # run both, print table
    python3 benchmarks/bench_kernels.py --inner    # single-backend worker
"""

import json
import os
import subprocess
import sys
import time


def run_backend(use_numba: bool) -> dict:
    env = dict(os.environ, DRT_HARNESS_NUMBA="1" if use_numba else "0")
    out = subprocess.run(
        [sys.executable, os.path.abspath(__file__), "--inner"],
        env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def inner() -> None:
    import numpy as np

    from drt_harness.audiopipe import (
        USE_NUMBA,
        AudioBuffer,
        apply_pcmu_nb,
        mulaw_encode_array,
        resample,
    )

    rng = np.random.Generator(np.random.PCG64(1))
    seconds = 60
    x48 = rng.standard_normal(48000 * seconds) * 0.1
    buf48 = AudioBuffer(48000, x48)
    x16 = rng.standard_normal(16000 * seconds) * 0.1
    buf16 = AudioBuffer(16000, x16)
    linear = rng.uniform(-8159, 8159, 16000 * seconds)

    # Warm-up triggers JIT compilation so timings measure steady state.
    resample(AudioBuffer(48000, x48[:4800]), 16000)
    mulaw_encode_array(linear[:1000])
    apply_pcmu_nb(AudioBuffer(16000, x16[:1600]))

    results = {"backend": "numba" if USE_NUMBA else "numpy"}

    t0 = time.perf_counter()
    resample(buf48, 16000)
    results["resample_48k_to_16k_60s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    for _ in range(5):
        mulaw_encode_array(linear)
    results["mulaw_encode_60s_x5"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    apply_pcmu_nb(buf16)
    results["pcmu_chain_60s"] = time.perf_counter() - t0

    print(json.dumps(results))


def main() -> None:
    numba_res = run_backend(True)
    numpy_res = run_backend(False)
    keys = [k for k in numba_res if k != "backend"]
    width = max(len(k) for k in keys)
    print(f"{'kernel':<{width}}  {'numba':>10}  {'numpy':>10}  {'speedup':>8}")
    for key in keys:
        a, b = numba_res[key], numpy_res[key]
        print(f"{key:<{width}}  {a:>9.3f}s  {b:>9.3f}s  {b / a:>7.2f}x")


if __name__ == "__main__":
    if "--inner" in sys.argv:
        inner()
    else:
        main()
