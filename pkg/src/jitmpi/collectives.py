"""Collective operations over the world communicator.

Counts and datatypes are deduced from the arrays themselves.  Where the two
buffers of a call let a rank validate consistency locally (allgather and
allreduce everywhere, scatter and gather on the root), a mismatch returns a
nonzero status before any MPI call is made; silent truncation never happens.
"""

import enum

import numpy as np
from numba.extending import overload, register_jitable

from .arrays import (
    _dtype_handle,
    _is_complex_kind,
    _is_row_major,
    _real_scalar_handle,
    pack,
    unpack,
)
from .runtime import (
    COMM_WORLD,
    ERR_BUFFER,
    ERR_COUNT,
    ERR_OP,
    OP_HANDLES,
    SUCCESS,
    _MPI_Allgather,
    _MPI_Allreduce,
    _MPI_Bcast,
    _MPI_Gather,
    _MPI_Scatter,
    rank,
    size,
)


class Operator(enum.IntEnum):
    """Reduction operators; SUM is the default everywhere it applies."""

    SUM = 0
    MIN = 1
    MAX = 2
    PROD = 3


_OP_SUM = OP_HANDLES["SUM"]
_OP_MIN = OP_HANDLES["MIN"]
_OP_MAX = OP_HANDLES["MAX"]
_OP_PROD = OP_HANDLES["PROD"]


@register_jitable
def _op_handle(operator):
    if operator == Operator.MIN:
        return _OP_MIN
    if operator == Operator.MAX:
        return _OP_MAX
    if operator == Operator.PROD:
        return _OP_PROD
    return _OP_SUM


def _same_kind(a, b):
    return a.dtype == b.dtype


@overload(_same_kind)
def _ol_same_kind(a, b):
    match = str(a.dtype) == str(b.dtype)

    def impl(a, b):
        return match

    return impl


@register_jitable
def _span(view):
    # half-open byte range [lo, hi) touched by the view; strides may be negative
    base = view.ctypes.data
    lo = base
    hi = base
    for axis in range(view.ndim):
        extent = (view.shape[axis] - 1) * view.strides[axis]
        if extent < 0:
            lo += extent
        else:
            hi += extent
    return lo, hi + view.itemsize


@register_jitable
def _overlaps(a, b):
    if a.size == 0 or b.size == 0:
        return False
    a_lo, a_hi = _span(a)
    b_lo, b_hi = _span(b)
    return a_lo < b_hi and b_lo < a_hi


@register_jitable
def bcast(data, root):
    """Broadcast the root's view content to every rank's view."""
    if _is_row_major(data):
        return _MPI_Bcast(data.ctypes.data, data.size, _dtype_handle(data), root, COMM_WORLD)
    staged = pack(data)
    status = _MPI_Bcast(staged.ctypes.data, staged.size, _dtype_handle(data), root, COMM_WORLD)
    if status == SUCCESS and rank() != root:
        unpack(staged, data)
    return status


@register_jitable
def scatter(send, recv, root):
    """Split the root's send view into equal rank-ordered blocks.

    The block size is recv's element count on every rank; the root checks
    ``size() * count(recv) == count(send)`` and fails with a nonzero status
    on mismatch.
    """
    me = rank()
    if me == root:
        if send.size != size() * recv.size or not _same_kind(send, recv):
            return ERR_COUNT
        sbuf = pack(send)
    else:
        sbuf = np.empty(0, send.dtype)
    if _is_row_major(recv):
        return _MPI_Scatter(
            sbuf.ctypes.data, recv.size, _dtype_handle(recv),
            recv.ctypes.data, recv.size, _dtype_handle(recv), root, COMM_WORLD,
        )
    scratch = np.empty(recv.size, recv.dtype)
    status = _MPI_Scatter(
        sbuf.ctypes.data, recv.size, _dtype_handle(recv),
        scratch.ctypes.data, recv.size, _dtype_handle(recv), root, COMM_WORLD,
    )
    if status == SUCCESS:
        unpack(scratch, recv)
    return status


@register_jitable
def gather(send, recv, root):
    """Concatenate every rank's send view into the root's recv view.

    Non-root recv views are left untouched.  The root checks
    ``size() * count(send) == count(recv)``.
    """
    me = rank()
    sbuf = pack(send)
    if me != root:
        dummy = np.empty(0, recv.dtype)
        return _MPI_Gather(
            sbuf.ctypes.data, sbuf.size, _dtype_handle(send),
            dummy.ctypes.data, sbuf.size, _dtype_handle(send), root, COMM_WORLD,
        )
    if recv.size != size() * send.size or not _same_kind(send, recv):
        return ERR_COUNT
    if _is_row_major(recv):
        return _MPI_Gather(
            sbuf.ctypes.data, sbuf.size, _dtype_handle(send),
            recv.ctypes.data, sbuf.size, _dtype_handle(send), root, COMM_WORLD,
        )
    scratch = np.empty(recv.size, recv.dtype)
    status = _MPI_Gather(
        sbuf.ctypes.data, sbuf.size, _dtype_handle(send),
        scratch.ctypes.data, sbuf.size, _dtype_handle(send), root, COMM_WORLD,
    )
    if status == SUCCESS:
        unpack(scratch, recv)
    return status


@register_jitable
def allgather(send, recv):
    """Rank-ordered concatenation of all send views, delivered everywhere."""
    if recv.size != size() * send.size or not _same_kind(send, recv):
        return ERR_COUNT
    sbuf = pack(send)
    if _is_row_major(recv):
        return _MPI_Allgather(
            sbuf.ctypes.data, sbuf.size, _dtype_handle(send),
            recv.ctypes.data, sbuf.size, _dtype_handle(send), COMM_WORLD,
        )
    scratch = np.empty(recv.size, recv.dtype)
    status = _MPI_Allgather(
        sbuf.ctypes.data, sbuf.size, _dtype_handle(send),
        scratch.ctypes.data, sbuf.size, _dtype_handle(send), COMM_WORLD,
    )
    if status == SUCCESS:
        unpack(scratch, recv)
    return status


@register_jitable
def allreduce(send, recv, operator=Operator.SUM):
    """Elementwise reduction across ranks, result delivered everywhere.

    Complex kinds support SUM only (computed on the native complex datatype
    where the implementation provides one, otherwise componentwise on pairs
    of reals).  Send and recv must not alias; overlap is rejected.
    """
    if send.size != recv.size or not _same_kind(send, recv):
        return ERR_COUNT
    if _overlaps(send, recv):
        return ERR_BUFFER
    count = send.size
    if _is_complex_kind(send):
        if operator != Operator.SUM:
            return ERR_OP
        dtype_h = _complex_sum_handle(send)
        count = _complex_sum_count(send)
    else:
        dtype_h = _dtype_handle(send)
    sbuf = pack(send)
    if _is_row_major(recv):
        return _MPI_Allreduce(
            sbuf.ctypes.data, recv.ctypes.data, count, dtype_h,
            _op_handle(operator), COMM_WORLD,
        )
    scratch = np.empty(recv.size, recv.dtype)
    status = _MPI_Allreduce(
        sbuf.ctypes.data, scratch.ctypes.data, count, dtype_h,
        _op_handle(operator), COMM_WORLD,
    )
    if status == SUCCESS:
        unpack(scratch, recv)
    return status


def _complex_sum_handle(data):
    from .runtime import COMPLEX64_NATIVE, COMPLEX128_NATIVE

    native = COMPLEX64_NATIVE if data.dtype.itemsize == 8 else COMPLEX128_NATIVE
    if native:
        return _dtype_handle(data)
    return _real_scalar_handle(data)


@overload(_complex_sum_handle)
def _ol_complex_sum_handle(data):
    from .runtime import COMPLEX64_NATIVE, COMPLEX128_NATIVE, DATATYPE_HANDLES

    name = str(data.dtype)
    native = COMPLEX64_NATIVE if name == "complex64" else COMPLEX128_NATIVE
    if native:
        handle = DATATYPE_HANDLES[name]
    else:
        handle = DATATYPE_HANDLES["float32" if name == "complex64" else "float64"]

    def impl(data):
        return handle

    return impl


def _complex_sum_count(data):
    from .runtime import COMPLEX64_NATIVE, COMPLEX128_NATIVE

    native = COMPLEX64_NATIVE if data.dtype.itemsize == 8 else COMPLEX128_NATIVE
    return data.size if native else 2 * data.size


@overload(_complex_sum_count)
def _ol_complex_sum_count(data):
    from .runtime import COMPLEX64_NATIVE, COMPLEX128_NATIVE

    native = COMPLEX64_NATIVE if str(data.dtype) == "complex64" else COMPLEX128_NATIVE
    if native:
        def impl(data):
            return data.size
    else:
        def impl(data):
            return 2 * data.size

    return impl
