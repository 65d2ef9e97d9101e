"""Domain-decomposed explicit solver for a reaction-extended Cahn-Hilliard
equation on a 2-D periodic grid.

    dc/dt = lap(c^3 - c - lap c) - k (c - c0)

The grid is split into contiguous row blocks, one per rank, each padded with
one ghost row above and below.  Every time step refreshes the ghost rows
twice (once for the field, once for the chemical potential) with blocking
sends and receives, so the evolved field is bit-identical to a single-process
run: the per-cell arithmetic is the same compiled code either way, and
communication only moves bytes.

Initial conditions come from a 32-bit linear congruential generator seeded
identically on every rank, making runs reproducible across rank counts and
platforms.

Run under mpiexec, e.g.::

    mpiexec -n 4 python -m jitmpi.halo_demo --rows 64 --cols 64 --steps 100
"""

import argparse
from dataclasses import dataclass

import numba
import numpy as np

from .collectives import allreduce
from .p2p import recv, send
from .runtime import barrier, rank, size, wtime

_TAG_UPWARD = 21    # first owned row travelling to the rank above
_TAG_DOWNWARD = 22  # last owned row travelling to the rank below

_LCG_MULT = np.uint64(1664525)
_LCG_INC = np.uint64(1013904223)
_LCG_MASK = np.uint64(0xFFFFFFFF)


@dataclass
class SubdomainState:
    """One rank's block of the global field, padded with ghost rows.

    ``c`` and the scratch field ``mu`` have shape (owned_rows + 2, cols);
    row 0 and row -1 are ghosts mirroring the neighbours' boundary rows.
    """

    c: np.ndarray
    mu: np.ndarray
    row_offset: int
    up: int
    down: int
    k: float
    c0: float
    dt: float
    dx: float


@dataclass
class RunReport:
    steps: int
    wall_time: float
    global_mean: float
    checksum: int


def decompose(rows, nranks, this_rank):
    """Contiguous row block (count, offset) for a rank; sizes differ by <= 1."""
    base, rem = rows // nranks, rows % nranks
    count = base + (1 if this_rank < rem else 0)
    offset = this_rank * base + min(this_rank, rem)
    return count, offset


@numba.jit(nopython=True)
def _lcg_fill(block, start_index, seed, c0):
    # cell with global row-major index n gets the (n+1)-th LCG iterate,
    # mapped into [c0 - 0.1, c0 + 0.1)
    state = np.uint64(seed) & _LCG_MASK
    for _ in range(start_index):
        state = (_LCG_MULT * state + _LCG_INC) & _LCG_MASK
    for i in range(block.shape[0]):
        for j in range(block.shape[1]):
            state = (_LCG_MULT * state + _LCG_INC) & _LCG_MASK
            block[i, j] = c0 + 0.2 * (state / 4294967296.0 - 0.5)


@numba.jit(nopython=True)
def _exchange(field, up, down):
    # refresh ghost rows: row 0 from the rank above, row -1 from below;
    # even ranks send first, odd ranks receive first, so some pair in the
    # ring always matches and no ordering relies on MPI buffering
    nranks = size()
    if nranks == 1:
        field[0, :] = field[-2, :]
        field[-1, :] = field[1, :]
        return 0
    me = rank()
    last = field.shape[0] - 2
    if me % 2 == 0:
        status = send(field[1], up, _TAG_UPWARD)
        if status != 0:
            return status
        status = recv(field[last + 1], down, _TAG_UPWARD)
        if status != 0:
            return status
        status = send(field[last], down, _TAG_DOWNWARD)
        if status != 0:
            return status
        return recv(field[0], up, _TAG_DOWNWARD)
    status = recv(field[last + 1], down, _TAG_UPWARD)
    if status != 0:
        return status
    status = send(field[1], up, _TAG_UPWARD)
    if status != 0:
        return status
    status = recv(field[0], up, _TAG_DOWNWARD)
    if status != 0:
        return status
    return send(field[last], down, _TAG_DOWNWARD)


@numba.jit(nopython=True)
def _compute_mu(c, mu, dx):
    # mu = c^3 - c - lap c on owned rows; 5-point stencil, periodic columns
    owned = c.shape[0] - 2
    cols = c.shape[1]
    inv_dx2 = 1.0 / (dx * dx)
    for i in range(1, owned + 1):
        for j in range(cols):
            jp = j + 1 if j < cols - 1 else 0
            jm = j - 1 if j > 0 else cols - 1
            cc = c[i, j]
            lap = (c[i + 1, j] + c[i - 1, j] + c[i, jp] + c[i, jm] - 4.0 * cc) * inv_dx2
            mu[i, j] = cc * cc * cc - cc - lap


@numba.jit(nopython=True)
def _apply_update(c, mu, dt, dx, k, c0):
    # c += dt * (lap mu - k (c - c0)) on owned rows
    owned = c.shape[0] - 2
    cols = c.shape[1]
    inv_dx2 = 1.0 / (dx * dx)
    for i in range(1, owned + 1):
        for j in range(cols):
            jp = j + 1 if j < cols - 1 else 0
            jm = j - 1 if j > 0 else cols - 1
            lap = (mu[i + 1, j] + mu[i - 1, j] + mu[i, jp] + mu[i, jm] - 4.0 * mu[i, j]) * inv_dx2
            c[i, j] = c[i, j] + dt * (lap - k * (c[i, j] - c0))


@numba.jit(nopython=True)
def _step_kernel(c, mu, up, down, dt, dx, k, c0):
    status = _exchange(c, up, down)
    if status != 0:
        return status
    _compute_mu(c, mu, dx)
    status = _exchange(mu, up, down)
    if status != 0:
        return status
    _apply_update(c, mu, dt, dx, k, c0)
    return 0


def init_field(global_rows, global_cols, c0, seed):
    """Serial form of the initial condition: the full global field."""
    if global_rows < 4 or global_cols < 4:
        raise ValueError("grid must be at least 4x4")
    field = np.empty((global_rows, global_cols), np.float64)
    _lcg_fill(field, 0, seed, c0)
    return field


def init_subdomain(global_rows, global_cols, k, c0, dt, dx, seed):
    """Parallel form of the initial condition: this rank's SubdomainState.

    Owned rows are filled from the same generator sequence as the serial
    field, indexed by global position, so the decomposed initial state is
    bit-identical to the serial one.
    """
    if global_rows < 4 or global_cols < 4:
        raise ValueError("grid must be at least 4x4")
    nranks = size()
    if global_rows < nranks:
        raise ValueError("grid must have at least one row per rank")
    me = rank()
    owned, offset = decompose(global_rows, nranks, me)
    c = np.zeros((owned + 2, global_cols), np.float64)
    _lcg_fill(c[1:owned + 1], offset * global_cols, seed, c0)
    return SubdomainState(
        c=c,
        mu=np.zeros_like(c),
        row_offset=offset,
        up=(me - 1) % nranks,
        down=(me + 1) % nranks,
        k=k,
        c0=c0,
        dt=dt,
        dx=dx,
    )


def exchange_ghosts(state):
    """Refresh the ghost rows of ``state.c`` from the periodic neighbours."""
    return int(_exchange(state.c, state.up, state.down))


def step(state):
    """Advance the subdomain by one explicit Euler step (two ghost swaps)."""
    status = _step_kernel(
        state.c, state.mu, state.up, state.down, state.dt, state.dx, state.k, state.c0
    )
    if status != 0:
        raise RuntimeError(f"ghost exchange failed with status {status}")


def _gather_field(state, global_rows):
    nranks = size()
    owned = state.c.shape[0] - 2
    cols = state.c.shape[1]
    if rank() != 0:
        status = send(state.c[1:owned + 1], 0, 77)
        if status != 0:
            raise RuntimeError(f"field gather failed with status {status}")
        return None
    field = np.empty((global_rows, cols), np.float64)
    field[:owned] = state.c[1:owned + 1]
    for other in range(1, nranks):
        count, offset = decompose(global_rows, nranks, other)
        status = recv(field[offset:offset + count], other, 77)
        if status != 0:
            raise RuntimeError(f"field gather failed with status {status}")
    return field


def field_checksum(field):
    """Order-independent 64-bit sum of the cells' IEEE-754 bit patterns."""
    bits = np.ascontiguousarray(field, np.float64).view(np.uint64)
    return int(bits.sum(dtype=np.uint64))


def _any_nonfinite(state):
    owned = state.c.shape[0] - 2
    bad = np.array([0 if np.isfinite(state.c[1:owned + 1]).all() else 1], np.int32)
    bad_anywhere = np.empty(1, np.int32)
    status = allreduce(bad, bad_anywhere)
    if status != 0:
        raise RuntimeError(f"stability check allreduce failed with status {status}")
    return bad_anywhere[0] != 0


# steps between coordinated instability checks; non-finite values persist
# and spread through the stencil, so sparse checks cannot miss them
_CHECK_INTERVAL = 25


def run(global_rows, global_cols, steps, dt, dx, k, c0, seed):
    """Evolve the field for ``steps`` steps; rank 0 returns a RunReport.

    Wall time covers the step loop only, bracketed by barriers.  Any
    non-finite cell aborts the run with a diagnostic (checked every
    ``_CHECK_INTERVAL`` steps and after the final step).
    """
    state = init_subdomain(global_rows, global_cols, k, c0, dt, dx, seed)
    # compile the step kernel on a throwaway one-row block so the timed
    # loop measures the solver, not the JIT compiler
    warm_c = np.zeros((3, global_cols), np.float64)
    warm_mu = np.zeros_like(warm_c)
    _step_kernel(warm_c, warm_mu, state.up, state.down, dt, dx, k, c0)
    barrier()
    start = wtime()
    for n in range(steps):
        step(state)
        if ((n + 1) % _CHECK_INTERVAL == 0 or n + 1 == steps) and _any_nonfinite(state):
            raise RuntimeError(
                f"non-finite cell detected by step {n + 1}; "
                f"reduce dt (explicit scheme unstable at dt={dt}, dx={dx})"
            )
    barrier()
    wall = wtime() - start
    field = _gather_field(state, global_rows)
    if field is None:
        return None
    return RunReport(
        steps=steps,
        wall_time=wall,
        global_mean=float(field.mean()),
        checksum=field_checksum(field),
    )


def run_serial_oracle(global_rows, global_cols, steps, dt, dx, k, c0, seed):
    """Single-process reference evolution with self-periodic ghost rows.

    Runs the same compiled per-cell arithmetic as the decomposed solver but
    never communicates; returns the evolved global field.
    """
    if global_rows < 4 or global_cols < 4:
        raise ValueError("grid must be at least 4x4")
    c = np.zeros((global_rows + 2, global_cols), np.float64)
    mu = np.zeros_like(c)
    _lcg_fill(c[1:global_rows + 1], 0, seed, c0)
    for _ in range(steps):
        c[0, :] = c[-2, :]
        c[-1, :] = c[1, :]
        _compute_mu(c, mu, dx)
        mu[0, :] = mu[-2, :]
        mu[-1, :] = mu[1, :]
        _apply_update(c, mu, dt, dx, k, c0)
    return c[1:global_rows + 1].copy()


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=64)
    parser.add_argument("--cols", type=int, default=64)
    parser.add_argument("--steps", type=int, default=100)
    parser.add_argument("--dt", type=float, default=0.005,
                        help="time step (default verified stable for dx=1)")
    parser.add_argument("--dx", type=float, default=1.0)
    parser.add_argument("--k", type=float, default=0.01, help="reaction rate")
    parser.add_argument("--c0", type=float, default=0.5, help="target composition")
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--report", default=None,
                        help="write a one-line CSV report "
                             "(ranks,rows,cols,steps,wall_time_s,global_mean,checksum)")
    args = parser.parse_args(argv)

    report = run(args.rows, args.cols, args.steps, args.dt, args.dx,
                 args.k, args.c0, args.seed)
    if report is not None:
        line = (f"{size()},{args.rows},{args.cols},{report.steps},"
                f"{report.wall_time:.6f},{report.global_mean!r},{report.checksum}")
        print(line)
        if args.report:
            with open(args.report, "w") as out:
                out.write(line + "\n")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
