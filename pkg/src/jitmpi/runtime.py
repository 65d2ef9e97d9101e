"""MPI runtime bridge: library loading, symbol/handle resolution, lifecycle.

The MPI shared library is located through mpi4py (which has already loaded
it into the process) and its C entry points are exposed as ctypes functions.
Numba supports calling ctypes functions from nopython code, so every wrapper
built on top of this module works both from plain Python and from inside
JIT-compiled kernels.

All MPI handles (communicators, datatypes, operators, requests) are treated
as opaque machine-word integers obtained from mpi4py at import time; no
numeric constant is hard-coded, which keeps the bridge portable across MPI
implementations with int-sized (MPICH family) or pointer-sized (Open MPI)
handles.
"""

import atexit
import ctypes
import ctypes.util
import os

import numpy as np
from numba.extending import register_jitable

import mpi4py

# Request the highest thread support level before mpi4py initializes the
# runtime (a no-op if the application imported mpi4py.MPI first, which by
# default requests the same level).
mpi4py.rc.threads = True
mpi4py.rc.thread_level = "multiple"

from mpi4py import MPI as _mpi  # noqa: E402  (import initializes MPI)


def _locate_library():
    """Return a ctypes handle through which MPI_* symbols resolve.

    Open MPI promotes its symbols to the global namespace during init, so
    dlopen(NULL) usually suffices.  MPICH-style libraries stay private to
    the mpi4py extension; for those, re-open the exact shared object mpi4py
    linked against (visible in /proc/self/maps) with RTLD_GLOBAL.
    """
    try:
        lib = ctypes.CDLL(None)
        lib.MPI_Initialized
        return lib
    except (OSError, AttributeError):
        pass

    candidates = []
    if os.path.exists("/proc/self/maps"):
        with open("/proc/self/maps") as maps:
            for line in maps:
                path = line.split()[-1]
                name = os.path.basename(path)
                if name.startswith("libmpi") and ".so" in name:
                    candidates.append(path)
    found = ctypes.util.find_library("mpi")
    if found:
        candidates.append(found)
    for path in dict.fromkeys(candidates):
        try:
            lib = ctypes.CDLL(path, mode=ctypes.RTLD_GLOBAL)
            lib.MPI_Initialized
            return lib
        except (OSError, AttributeError):
            continue
    raise ImportError(
        "could not locate the MPI shared library loaded by mpi4py; "
        f"tried dlopen(NULL) and {candidates or 'no candidate paths'}"
    )


_LIB = _locate_library()

_c_int = ctypes.c_int
_c_double = ctypes.c_double
# Handles are passed as void* regardless of the implementation's handle
# width: int-sized handles ride in the low half of the argument register,
# which every supported ABI reads correctly for an int parameter.
_c_handle = ctypes.c_void_p
_c_ptr = ctypes.c_void_p


def _sym(name, restype, argtypes):
    try:
        fn = getattr(_LIB, name)
    except AttributeError as exc:
        raise ImportError(f"MPI symbol {name} not found in the loaded library") from exc
    fn.restype = restype
    fn.argtypes = argtypes
    return fn


_MPI_Initialized = _sym("MPI_Initialized", _c_int, [_c_ptr])
_MPI_Finalized = _sym("MPI_Finalized", _c_int, [_c_ptr])
_MPI_Comm_size = _sym("MPI_Comm_size", _c_int, [_c_handle, _c_ptr])
_MPI_Comm_rank = _sym("MPI_Comm_rank", _c_int, [_c_handle, _c_ptr])
_MPI_Barrier = _sym("MPI_Barrier", _c_int, [_c_handle])
_MPI_Wtime = _sym("MPI_Wtime", _c_double, [])

_MPI_Send = _sym("MPI_Send", _c_int, [_c_ptr, _c_int, _c_handle, _c_int, _c_int, _c_handle])
_MPI_Recv = _sym(
    "MPI_Recv", _c_int, [_c_ptr, _c_int, _c_handle, _c_int, _c_int, _c_handle, _c_ptr]
)
_MPI_Isend = _sym(
    "MPI_Isend", _c_int, [_c_ptr, _c_int, _c_handle, _c_int, _c_int, _c_handle, _c_ptr]
)
_MPI_Irecv = _sym(
    "MPI_Irecv", _c_int, [_c_ptr, _c_int, _c_handle, _c_int, _c_int, _c_handle, _c_ptr]
)
_MPI_Wait = _sym("MPI_Wait", _c_int, [_c_ptr, _c_ptr])
_MPI_Waitall = _sym("MPI_Waitall", _c_int, [_c_int, _c_ptr, _c_ptr])
_MPI_Waitany = _sym("MPI_Waitany", _c_int, [_c_int, _c_ptr, _c_ptr, _c_ptr])
_MPI_Test = _sym("MPI_Test", _c_int, [_c_ptr, _c_ptr, _c_ptr])
_MPI_Testall = _sym("MPI_Testall", _c_int, [_c_int, _c_ptr, _c_ptr, _c_ptr])
_MPI_Testany = _sym("MPI_Testany", _c_int, [_c_int, _c_ptr, _c_ptr, _c_ptr, _c_ptr])

_MPI_Bcast = _sym("MPI_Bcast", _c_int, [_c_ptr, _c_int, _c_handle, _c_int, _c_handle])
_MPI_Scatter = _sym(
    "MPI_Scatter",
    _c_int,
    [_c_ptr, _c_int, _c_handle, _c_ptr, _c_int, _c_handle, _c_int, _c_handle],
)
_MPI_Gather = _sym(
    "MPI_Gather",
    _c_int,
    [_c_ptr, _c_int, _c_handle, _c_ptr, _c_int, _c_handle, _c_int, _c_handle],
)
_MPI_Allgather = _sym(
    "MPI_Allgather", _c_int, [_c_ptr, _c_int, _c_handle, _c_ptr, _c_int, _c_handle, _c_handle]
)
_MPI_Allreduce = _sym(
    "MPI_Allreduce", _c_int, [_c_ptr, _c_ptr, _c_int, _c_handle, _c_handle, _c_handle]
)
_MPI_Type_get_extent = _sym("MPI_Type_get_extent", _c_int, [_c_handle, _c_ptr, _c_ptr])

# restype c_size_t: the address comes back as a plain integer on the host
# path (ctypes c_void_p would yield None for NULL) and as uint64 under numba
_libc_malloc = _sym("malloc", ctypes.c_size_t, [ctypes.c_size_t])
_libc_free = _sym("free", None, [_c_ptr])
_libc_memcpy = _sym("memcpy", _c_ptr, [_c_ptr, _c_ptr, ctypes.c_size_t])


def _handle(obj):
    return int(_mpi._handleof(obj))


# --- implementation-specific constants, resolved once at import -------------

SUCCESS = int(_mpi.SUCCESS)
if SUCCESS != 0:  # the MPI standard fixes this; communication code relies on it
    raise ImportError(f"MPI_SUCCESS expected to be 0, got {SUCCESS}")

COMM_WORLD = _handle(_mpi.COMM_WORLD)
REQUEST_NULL = _handle(_mpi.REQUEST_NULL)
UNDEFINED = int(_mpi.UNDEFINED)

ERR_BUFFER = int(_mpi.ERR_BUFFER)
ERR_COUNT = int(_mpi.ERR_COUNT)
ERR_OP = int(_mpi.ERR_OP)
ERR_OTHER = int(_mpi.ERR_OTHER)

REQUEST_BYTES = int(_mpi._sizeof(_mpi.Request))
STATUS_BYTES = int(_mpi._sizeof(_mpi.Status))
if REQUEST_BYTES not in (4, 8):
    raise ImportError(f"unsupported MPI_Request width: {REQUEST_BYTES} bytes")

_DATATYPE_NULL = _handle(_mpi.DATATYPE_NULL)

# Native complex datatypes where the implementation provides them, otherwise
# a committed pair-of-reals contiguous type (kept alive module-wide).
_derived_types = []


def _complex_handle(native, base):
    if _handle(native) != _DATATYPE_NULL:
        return _handle(native), True
    derived = base.Create_contiguous(2)
    derived.Commit()
    _derived_types.append(derived)
    return _handle(derived), False


_C64_HANDLE, COMPLEX64_NATIVE = _complex_handle(_mpi.C_FLOAT_COMPLEX, _mpi.FLOAT)
_C128_HANDLE, COMPLEX128_NATIVE = _complex_handle(_mpi.C_DOUBLE_COMPLEX, _mpi.DOUBLE)

DATATYPE_HANDLES = {
    "int32": _handle(_mpi.INT32_T),
    "int64": _handle(_mpi.INT64_T),
    "float32": _handle(_mpi.FLOAT),
    "float64": _handle(_mpi.DOUBLE),
    "complex64": _C64_HANDLE,
    "complex128": _C128_HANDLE,
}

OP_HANDLES = {
    "SUM": _handle(_mpi.SUM),
    "MIN": _handle(_mpi.MIN),
    "MAX": _handle(_mpi.MAX),
    "PROD": _handle(_mpi.PROD),
}

_THREAD_LEVEL_NAMES = {
    int(_mpi.THREAD_SINGLE): "single",
    int(_mpi.THREAD_FUNNELED): "funneled",
    int(_mpi.THREAD_SERIALIZED): "serialized",
    int(_mpi.THREAD_MULTIPLE): "multiple",
}


class MpiConstants:
    """Snapshot of the handles and widths resolved from the installed MPI.

    Statuses have no portable ignore-sentinel, so instead of a
    ``status_ignore`` handle the bridge records ``status_bytes`` and each
    call passes a throwaway status buffer of exactly that size.
    """

    def __init__(self):
        self.comm_world = COMM_WORLD
        self.datatype_handles = dict(DATATYPE_HANDLES)
        self.op_handles = dict(OP_HANDLES)
        self.request_null = REQUEST_NULL
        self.success_code = SUCCESS
        self.request_bytes = REQUEST_BYTES
        self.status_bytes = STATUS_BYTES

    def __repr__(self):
        return (
            f"MpiConstants(comm_world={self.comm_world:#x}, "
            f"request_null={self.request_null:#x}, "
            f"request_bytes={self.request_bytes}, status_bytes={self.status_bytes})"
        )


CONSTANTS = MpiConstants()


# --- lifecycle ---------------------------------------------------------------


def _finalize_hook():
    if _mpi.Is_initialized() and not _mpi.Is_finalized():
        _mpi.Finalize()


def initialize():
    """Initialize the MPI runtime (idempotent); returns a status code.

    Invoked automatically at import.  Requests the highest thread support
    level, registers a process-exit finalize hook and switches the world
    communicator's error handler to return-codes mode so that communication
    failures surface as nonzero statuses instead of aborting the process.
    Returns nonzero once the runtime has been finalized.
    """
    if _mpi.Is_finalized():
        return ERR_OTHER
    if not _mpi.Is_initialized():
        try:
            _mpi.Init_thread(_mpi.THREAD_MULTIPLE)
        except _mpi.Exception as exc:  # pragma: no cover - depends on launcher
            return exc.Get_error_code() or ERR_OTHER
        atexit.register(_finalize_hook)
    _mpi.COMM_WORLD.Set_errhandler(_mpi.ERRORS_RETURN)
    return SUCCESS


@register_jitable
def initialized():
    """True iff the MPI runtime is initialized and not finalized."""
    flag = np.zeros(1, np.int32)
    _MPI_Initialized(flag.ctypes.data)
    if flag[0] == 0:
        return False
    _MPI_Finalized(flag.ctypes.data)
    return flag[0] == 0


@register_jitable
def size():
    """Number of processes in the world communicator."""
    out = np.empty(1, np.int32)
    _MPI_Comm_size(COMM_WORLD, out.ctypes.data)
    return out[0]


@register_jitable
def rank():
    """This process's rank within the world communicator."""
    out = np.empty(1, np.int32)
    _MPI_Comm_rank(COMM_WORLD, out.ctypes.data)
    return out[0]


@register_jitable
def barrier():
    """Block until every rank has entered; returns a status code."""
    return _MPI_Barrier(COMM_WORLD)


@register_jitable
def wtime():
    """Monotonic wall-clock seconds from the MPI runtime."""
    return _MPI_Wtime()


def thread_level():
    """Granted thread support level: single/funneled/serialized/multiple."""
    return _THREAD_LEVEL_NAMES.get(_mpi.Query_thread(), "unknown")


def library_version():
    """Version string reported by the loaded MPI library."""
    return _mpi.Get_library_version().strip()


def datatype_extent(handle):
    """MPI-reported extent in bytes of a datatype handle (diagnostic query)."""
    lb = np.zeros(1, np.intp)
    extent = np.zeros(1, np.intp)
    status = _MPI_Type_get_extent(handle, lb.ctypes.data, extent.ctypes.data)
    if status != SUCCESS:
        raise RuntimeError(f"MPI_Type_get_extent failed with status {status}")
    return int(extent[0])


_INIT_STATUS = initialize()
