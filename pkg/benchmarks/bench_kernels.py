"""Filter-tick throughput, compiled extension vs pure-python fallback.

Usage: python3 benchmarks/bench_kernels.py [--ticks N]
"""

import argparse
import time

import numpy as np

from roboshim._kernels import backends


def bench(impl, ticks: int) -> float:
    """Ticks per second for one lane over a reproducible target stream."""
    rng = np.random.default_rng(7)
    params = np.array([0.01, 1.0, 0.25, 1.0, 50.0])
    box = np.array([0.0, -0.5, 0.0, 0.8, 0.5, 0.9])
    state = np.zeros(9)
    state[0:3] = [0.3, 0.0, 0.5]
    # pre-draw targets so the RNG stays out of the timed loop
    switches = rng.uniform([-0.2, -0.8, -0.2], [1.0, 0.8, 1.2], size=(ticks // 20 + 1, 3))
    tick = impl.filter_tick
    t0 = time.perf_counter()
    for i in range(ticks):
        tick(state, switches[i // 20], params, box)
    return ticks / (time.perf_counter() - t0)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ticks", type=int, default=50000)
    args = ap.parse_args()

    lanes = backends()
    rates = {}
    for name in sorted(lanes):
        bench(lanes[name], min(2000, args.ticks))  # warm-up
        rates[name] = bench(lanes[name], args.ticks)

    base = rates.get("purepy")
    for name in sorted(rates):
        rate = rates[name]
        rel = f"  ({rate / base:5.1f}x)" if base and name != "purepy" else ""
        print(f"{name:>9}: {rate:12,.0f} ticks/s   {1e6 / rate:8.2f} us/tick{rel}")


if __name__ == "__main__":
    main()
