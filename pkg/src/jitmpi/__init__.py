"""Procedural MPI bindings callable from inside Numba JIT-compiled kernels.

Importing the package initializes the MPI runtime (idempotently) and
registers a process-exit finalize hook.  Every communication routine takes
NumPy arrays, deduces counts and datatypes from them, and returns an integer
status code where 0 means success.  The same functions work from plain
Python and from inside ``@numba.jit(nopython=True)`` code.
"""

from .runtime import (
    CONSTANTS,
    MpiConstants,
    REQUEST_NULL,
    SUCCESS,
    barrier,
    initialize,
    initialized,
    library_version,
    rank,
    size,
    thread_level,
    wtime,
)
from .arrays import (
    ElementKind,
    SUPPORTED_DTYPES,
    datatype_handle,
    element_kind,
    is_contiguous,
    pack,
    total_count,
    unpack,
)
from .p2p import (
    REQUEST_NULL_U64,
    irecv,
    isend,
    recv,
    send,
    staging_count,
    test,
    testall,
    testany,
    wait,
    waitall,
    waitany,
)
from .collectives import Operator, allgather, allreduce, bcast, gather, scatter

__all__ = [
    "CONSTANTS",
    "ElementKind",
    "MpiConstants",
    "Operator",
    "REQUEST_NULL",
    "REQUEST_NULL_U64",
    "SUCCESS",
    "SUPPORTED_DTYPES",
    "allgather",
    "allreduce",
    "barrier",
    "bcast",
    "datatype_handle",
    "element_kind",
    "gather",
    "initialize",
    "initialized",
    "irecv",
    "is_contiguous",
    "isend",
    "library_version",
    "pack",
    "rank",
    "recv",
    "scatter",
    "send",
    "size",
    "staging_count",
    "test",
    "testall",
    "testany",
    "thread_level",
    "total_count",
    "unpack",
    "wait",
    "waitall",
    "waitany",
    "wtime",
]

__version__ = "0.1.0"
