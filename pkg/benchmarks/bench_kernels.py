"""Time the compiled kernels against the numpy/scipy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each kernel is run on identical inputs under both backends; results are
checked to agree before timings are reported.
"""
import argparse
import time

import numpy as np

from hilltrunc._backend import available_backends
from hilltrunc.coeffs import KronigPenney, Mathieu, PeriodicCoefficients, cosine_series
from hilltrunc.oracle import assemble
from hilltrunc.propagate import segment_pieces


def cases():
    kp = PeriodicCoefficients(1.0, KronigPenney(10.0, 0.5))
    w, p, q, s = segment_pieces(kp, 0.0, 16.0)
    lams = np.linspace(0.0, 200.0, 4096)
    op = assemble(kp, 0.0, 8, 8192)
    per = assemble(kp, 0.0, 1, 4000, "antiperiodic")
    shifts = np.linspace(0.0, 100.0, 64)
    mat = cosine_series(PeriodicCoefficients(1.0, Mathieu(20.0)))
    return {
        "transfer_product_many (32 segs x 4096 lambdas)":
            lambda k: k.transfer_product_many(w, p, q, s, lams),
        "sturm_counts (M=8192 x 64 shifts)":
            lambda k: k.sturm_counts(op.diag, op.offdiag, op.mass_diag, shifts),
        "sturm_counts_cyclic (M=4000 x 64 shifts)":
            lambda k: k.sturm_counts_cyclic(per.diag, per.offdiag, per.corner, per.mass_diag, shifts),
        "cosine_transfer (Mathieu A=20, one period, lambda=50)":
            lambda k: np.array(k.cosine_transfer(mat, 1.0, 50.0, 0.0, 1.0, 1e-12, 1e-14)),
    }


def best_time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    backends = available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; only the python backend is available")
    names = sorted(backends)
    print(f"{'kernel':55s}" + "".join(f"{n:>14s}" for n in names) + ("      speedup" if len(names) > 1 else ""))
    for label, run in cases().items():
        outs = {n: np.asarray(run(backends[n]), dtype=float) for n in names}
        if len(names) > 1:
            ref = outs["python"]
            diff = np.max(np.abs(outs["compiled"] - ref) / np.maximum(np.abs(ref), 1.0))
            if diff > 1e-8:
                raise SystemExit(f"{label}: backends disagree (max rel diff {diff:.2e})")
        times = {n: best_time(lambda: run(backends[n]), args.repeat) for n in names}
        row = f"{label:55s}" + "".join(f"{times[n] * 1e3:12.3f}ms" for n in names)
        if len(names) > 1:
            row += f"{times['python'] / times['compiled']:12.1f}x"
        print(row)


if __name__ == "__main__":
    main()
