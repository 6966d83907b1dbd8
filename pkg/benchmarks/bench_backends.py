"""Time the compiled and pure-Python kernel backends on the same workloads.

    python3 benchmarks/bench_backends.py [--repeat 3] [--days 60]
"""

import argparse
import timeit
import warnings

import numpy as np

from poshawkes import kernels
from poshawkes.intensity import compensator, excitation_values, fit_hawkes
from poshawkes.simulate import SyntheticTruth, default_calendar, forecast, generate_synthetic

DAY = 86400.0


def workloads(ds, cal):
    model = fit_hawkes(ds, cal)
    grid = np.linspace(ds.t_a, ds.t_b, 20000)
    horizon = (ds.t_b, ds.t_b + 2 * DAY)
    return {
        "excitation (20k points)": lambda: excitation_values(model, ds, grid),
        "compensator": lambda: compensator(model, ds, cal),
        "synthetic 10 days": lambda: generate_synthetic(SyntheticTruth(), cal, (0.0, 10 * DAY), 1),
        "fit_hawkes": lambda: fit_hawkes(ds, cal),
        "forecast 48 h x 5": lambda: forecast(model, ds, cal, horizon, 5, 0),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--days", type=int, default=60)
    args = ap.parse_args()
    warnings.simplefilter("ignore", RuntimeWarning)

    cal = default_calendar(args.days + 5)
    ds = generate_synthetic(SyntheticTruth(), cal, (0.0, args.days * DAY), 7)
    print(f"dataset: {args.days} days, {len(ds.cascades)} originals, {ds.n_events} events")

    available = ["python"]
    try:
        from poshawkes import _core  # noqa: F401

        available.insert(0, "cython")
    except ImportError:
        print("compiled core not built; timing the python backend only")
    previous = kernels.backend_name()
    timings = {}
    for name in available:
        kernels.set_backend(name)
        for label, fn in workloads(ds, cal).items():
            timings[label, name] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
    kernels.set_backend(previous)

    labels = list(dict.fromkeys(label for label, _ in timings))
    print(f"{'workload':<26}" + "".join(f"{n:>12}" for n in available) + ("     speedup" if len(available) > 1 else ""))
    for label in labels:
        row = "".join(f"{timings[label, n]:11.4f}s" for n in available)
        if len(available) > 1:
            row += f"{timings[label, 'python'] / timings[label, 'cython']:11.1f}x"
        print(f"{label:<26}{row}")


if __name__ == "__main__":
    main()
