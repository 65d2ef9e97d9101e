"""Benchmark: repeated parallel reductions inside vs. outside compiled code.

Estimates pi by midpoint-rule integration of 4/(1+x^2) over (0,1), split
across ranks in contiguous blocks.  Two numerically identical variants are
timed: one keeps the whole accumulate-and-allreduce loop inside a single
JIT-compiled region, the other re-enters the interpreter on every iteration
to dispatch the reduction through mpi4py.  The ratio of the two timings is
the cost of those interpreter roundtrips.

Run under mpiexec, e.g.::

    mpiexec -n 4 python -m jitmpi.bench_pi --n-intervals 1000,10000 \
        --n-times 10000 --output pi_bench.csv
"""

import argparse
import csv
from dataclasses import dataclass

import numba
import numpy as np
from mpi4py import MPI

from .collectives import allreduce
from .runtime import barrier, rank, size, wtime

CSV_HEADER = "n_intervals,n_times,time_in_kernel_s,time_roundtrip_s,speedup,pi_estimate"


@numba.jit(nopython=True)
def get_pi_part(n_intervals, rank=0, size=1):
    """Partial midpoint Riemann sum of 4/(1+x^2) for this rank's block.

    Sub-interval i has midpoint x = (i + 0.5) / n_intervals; rank r of s
    owns the contiguous block [r*n//s, (r+1)*n//s).  The full sum over all
    ranks approximates pi with O(1/n^2) error.
    """
    lo = rank * n_intervals // size
    hi = (rank + 1) * n_intervals // size
    part = 0.0
    for i in range(lo, hi):
        x = (i + 0.5) / n_intervals
        part += 4.0 / (1.0 + x * x)
    return part / n_intervals


@numba.jit(nopython=True)
def pi_in_kernel(n_times, n_intervals):
    """Estimate pi n_times over, reducing inside the compiled region."""
    my_rank = rank()
    ranks = size()
    part = np.empty(1, np.float64)
    total = np.empty(1, np.float64)
    for _ in range(n_times):
        part[0] = get_pi_part(n_intervals, my_rank, ranks)
        status = allreduce(part, total)
        if status != 0:
            raise RuntimeError("allreduce failed inside pi kernel")
    return total[0]


def pi_roundtrip(n_times, n_intervals):
    """Same numerics, but every reduction goes through the interpreter."""
    comm = MPI.COMM_WORLD
    my_rank = comm.Get_rank()
    ranks = comm.Get_size()
    part = np.empty(1, np.float64)
    total = np.empty(1, np.float64)
    for _ in range(n_times):
        part[0] = get_pi_part(n_intervals, my_rank, ranks)
        comm.Allreduce(part, total, op=MPI.SUM)
    return total[0]


@dataclass
class BenchConfig:
    """Benchmark parameters; n_repeat >= 3 so the minimum excludes warm-up."""

    n_intervals_list: list
    n_times: int
    n_repeat: int = 10
    output_path: str = "pi_bench.csv"
    output_format: str = "csv"

    def __post_init__(self):
        if self.n_times < 1 or self.n_repeat < 3:
            raise ValueError("n_times must be >= 1 and n_repeat >= 3")
        if not self.n_intervals_list or min(self.n_intervals_list) < 1:
            raise ValueError("n_intervals_list must hold positive integers")
        if self.output_format not in ("csv", "svg"):
            raise ValueError("output_format must be 'csv' or 'svg'")


@dataclass
class BenchRecord:
    n_intervals: int
    n_times: int
    time_in_kernel: float
    time_roundtrip: float
    speedup: float
    pi_estimate: float


def _time_min(func, n_times, n_intervals, n_repeat):
    best = np.inf
    value = np.nan
    for _ in range(n_repeat):
        barrier()
        start = wtime()
        value = func(n_times, n_intervals)
        elapsed = wtime() - start
        best = min(best, elapsed)
    return best, value


def run_benchmark(cfg):
    """Time both variants for each interval count; rank 0 writes the output.

    Returns one BenchRecord per interval count (timings are this rank's own
    minima; ranks stay in lockstep through the barriers).  Raises if the two
    variants ever disagree bit-for-bit on the estimate.
    """
    records = []
    for n_intervals in cfg.n_intervals_list:
        t_kernel, est_kernel = _time_min(pi_in_kernel, cfg.n_times, n_intervals, cfg.n_repeat)
        t_round, est_round = _time_min(pi_roundtrip, cfg.n_times, n_intervals, cfg.n_repeat)
        if est_kernel != est_round:
            raise RuntimeError(
                f"variants disagree at n_intervals={n_intervals}: "
                f"{est_kernel!r} vs {est_round!r}"
            )
        records.append(
            BenchRecord(
                n_intervals=n_intervals,
                n_times=cfg.n_times,
                time_in_kernel=t_kernel,
                time_roundtrip=t_round,
                speedup=t_round / t_kernel,
                pi_estimate=est_kernel,
            )
        )
    if rank() == 0:
        if cfg.output_format == "csv":
            _write_csv(cfg.output_path, records)
        else:
            _write_svg(cfg.output_path, records)
    return records


def _write_csv(path, records):
    with open(path, "w", newline="") as out:
        writer = csv.writer(out)
        writer.writerow(CSV_HEADER.split(","))
        for r in records:
            writer.writerow(
                [r.n_intervals, r.n_times, repr(r.time_in_kernel), repr(r.time_roundtrip),
                 repr(r.speedup), repr(r.pi_estimate)]
            )


def _write_svg(path, records):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    x = [r.n_times / r.n_intervals for r in records]
    y = [r.speedup for r in records]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(x, y, "o-")
    ax.set_xscale("log")
    ax.set_xlabel("reductions per interval (n_times / n_intervals)")
    ax.set_ylabel("in-kernel speedup over interpreter roundtrips")
    ax.set_title(f"{size()} ranks")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n-intervals", default="1000,10000,100000",
                        help="comma-separated interval counts")
    parser.add_argument("--n-times", type=int, default=10_000,
                        help="reductions per measurement")
    parser.add_argument("--n-repeat", type=int, default=10,
                        help="measurement repetitions; the minimum is kept")
    parser.add_argument("--output", default="pi_bench.csv", help="output file path")
    parser.add_argument("--format", choices=("csv", "svg"), default="csv")
    args = parser.parse_args(argv)

    cfg = BenchConfig(
        n_intervals_list=[int(n) for n in args.n_intervals.split(",")],
        n_times=args.n_times,
        n_repeat=args.n_repeat,
        output_path=args.output,
        output_format=args.format,
    )
    records = run_benchmark(cfg)
    if rank() == 0:
        print(CSV_HEADER)
        for r in records:
            print(f"{r.n_intervals},{r.n_times},{r.time_in_kernel:.6f},"
                  f"{r.time_roundtrip:.6f},{r.speedup:.3f},{r.pi_estimate!r}")
        print(f"wrote {cfg.output_path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
