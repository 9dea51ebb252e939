"""Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import math
import timeit

import numpy as np

from cpwlab.kernels import available_backends


def cases(n_points):
    f = np.linspace(4.49e9, 4.51e9, n_points)
    ks = np.linspace(0.01, 0.99, 1000)
    kps = np.sqrt((1 - ks) * (1 + ks))
    v_ph = 299792458.0 / math.sqrt(6.225)
    length = v_ph / (4 * 4.5e9)
    return {
        "ellipke_agm x1000": lambda m: [m.ellipke_agm(k, kp) for k, kp in zip(ks, kps)],
        f"notch_model n={n_points}": lambda m: m.notch_model(f, 4.5e9, 1e5, 2e5, 0.1, 0.9,
                                                             0.3, 3e-8),
        f"abcd_shunt_s21 n={n_points}": lambda m: m.abcd_shunt_s21(f, 50.0, 50.0, length,
                                                                   2e-15, v_ph, 5e-7, 1e-3),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--points", type=int, default=2001)
    args = ap.parse_args()
    backends = available_backends()
    if "cython" not in backends:
        print("compiled backend not built; timing the numpy fallback only")
    names = list(backends)
    print(f"{'kernel':<28}" + "".join(f"{n + ' [us]':>16}" for n in names) + f"{'speedup':>10}")
    for label, fn in cases(args.points).items():
        best = {}
        for name in names:
            mod = backends[name]
            timer = timeit.Timer(lambda: fn(mod))
            number, _ = timer.autorange()
            best[name] = min(timer.repeat(args.repeat, number)) / number * 1e6
        row = f"{label:<28}" + "".join(f"{best[n]:>16.1f}" for n in names)
        if "cython" in best:
            row += f"{best['python'] / best['cython']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
