#!/usr/bin/env python3
"""Benchmark the scanning kernels: numba JIT vs the numpy/decoder fallback.

Builds a synthetic executable section of a few MiB with a realistic sprinkle
of free-branch bytes, then times terminator scanning and full gadget
enumeration under both backends.  Run directly:

    python3 benchmarks/bench_scan.py [--size-mib 4] [--repeats 3]
"""

from __future__ import annotations

import argparse
import os
import random
import time

from ropforge import kernels
from ropforge.elfbuild import SectionSpec, build_elf
from ropforge.gadgets import enumerate_gadgets
from ropforge.image import load_image


def synth_section(size: int, seed: int = 1337) -> bytes:
    rng = random.Random(seed)
    weighted = list(range(256)) + [0xC3, 0xC2, 0xFF, 0x58, 0x5B, 0x5D, 0x90] * 8
    return bytes(rng.choice(weighted) for _ in range(size))


def timed(fn, repeats: int) -> tuple[float, object]:
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--size-mib", type=float, default=4.0)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--max-insns", type=int, default=5)
    parser.add_argument("--window-back", type=int, default=20)
    args = parser.parse_args()

    data = synth_section(int(args.size_mib * 1024 * 1024))
    image = load_image(build_elf([SectionSpec(".text", 0x08048000, data, "ax")]))
    backends = ["numpy"] + (["numba"] if kernels.HAVE_NUMBA else [])
    if not kernels.HAVE_NUMBA:
        print("numba not importable; benchmarking the fallback only")

    rows = []
    for backend in backends:
        os.environ[kernels.ENV_BACKEND] = backend
        if backend == "numba":  # JIT warmup outside the timed region
            kernels.scan_gadget_windows(data[:4096], args.window_back, args.max_insns)

        t_scan, hits = timed(lambda: kernels.scan_free_branches(data), args.repeats)
        t_enum, gset = timed(
            lambda: enumerate_gadgets(
                image, max_insns=args.max_insns, window_back=args.window_back
            ),
            args.repeats,
        )
        rows.append((backend, t_scan, len(hits), t_enum, len(gset)))

    os.environ.pop(kernels.ENV_BACKEND, None)

    print(f"\nsection: {len(data) / 1024 / 1024:.1f} MiB, best of {args.repeats}")
    print(f"{'backend':<8} {'terminator scan':>16} {'hits':>9} {'enumerate':>12} {'gadgets':>9}")
    for backend, t_scan, hits, t_enum, count in rows:
        print(f"{backend:<8} {t_scan * 1000:>13.1f} ms {hits:>9} {t_enum:>9.2f} s {count:>9}")
    if len(rows) == 2:
        print(
            f"\nspeedup (numba vs fallback): scan x{rows[0][1] / rows[1][1]:.1f}, "
            f"enumerate x{rows[0][3] / rows[1][3]:.1f}"
        )


if __name__ == "__main__":
    main()
