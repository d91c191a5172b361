"""Time apply_transform on a large float32 image (best of several runs after warm-up).

    python scripts/throughput.py --size 4096 --repeats 5
"""
import argparse
import os
import time

import numba
import numpy as np

from quadenhance.transform import apply_transform


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=4096)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--dtype", choices=("float32", "float64"), default="float32")
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    img = rng.random((args.size, args.size, 3), dtype=np.float32).astype(args.dtype)
    theta = rng.standard_normal((10, 3)) * 0.05
    out = np.empty_like(img)
    apply_transform(img[:8, :8], theta)  # compile / load cache
    times = []
    for _ in range(args.repeats):
        t0 = time.perf_counter()
        apply_transform(img, theta, out=out)
        times.append(time.perf_counter() - t0)
    mpix = args.size * args.size / 1e6
    print(f"{args.size}x{args.size} {args.dtype}: best {min(times) * 1e3:.1f} ms, "
          f"median {np.median(times) * 1e3:.1f} ms ({mpix / min(times):.0f} Mpix/s), "
          f"{numba.get_num_threads()} threads of {os.cpu_count()} CPUs, layer {numba.threading_layer()}")


if __name__ == "__main__":
    main()
