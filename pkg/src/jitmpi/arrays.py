"""Strided array model: element kinds, contiguity, pack/unpack.

Transfers treat every array as a logical sequence of elements in row-major
index order, regardless of how the array is laid out in memory.  Views that
are not dense row-major get packed into (or unpacked from) a contiguous
buffer around the underlying MPI call.
"""

import enum

import numpy as np
from numba.extending import overload, register_jitable

from . import runtime
from .runtime import DATATYPE_HANDLES


class ElementKind(enum.IntEnum):
    """Supported element types; each maps to exactly one MPI datatype."""

    INT32 = 0
    INT64 = 1
    FLOAT32 = 2
    FLOAT64 = 3
    COMPLEX64 = 4
    COMPLEX128 = 5

    @property
    def dtype(self):
        return np.dtype(_KIND_TO_DTYPE[self])

    @property
    def itemsize(self):
        return self.dtype.itemsize


_KIND_TO_DTYPE = {
    ElementKind.INT32: "int32",
    ElementKind.INT64: "int64",
    ElementKind.FLOAT32: "float32",
    ElementKind.FLOAT64: "float64",
    ElementKind.COMPLEX64: "complex64",
    ElementKind.COMPLEX128: "complex128",
}
_DTYPE_TO_KIND = {name: kind for kind, name in _KIND_TO_DTYPE.items()}

SUPPORTED_DTYPES = tuple(_DTYPE_TO_KIND)


def element_kind(obj):
    """ElementKind for a kind, dtype or array; raises on unsupported input."""
    if isinstance(obj, ElementKind):
        return obj
    name = str(np.dtype(obj.dtype if isinstance(obj, np.ndarray) else obj))
    try:
        return _DTYPE_TO_KIND[name]
    except KeyError:
        raise ValueError(
            f"unsupported element kind {name!r}; supported: {SUPPORTED_DTYPES}"
        ) from None


def datatype_handle(kind):
    """Opaque MPI datatype handle matching the kind's width and arithmetic."""
    return DATATYPE_HANDLES[_KIND_TO_DTYPE[element_kind(kind)]]


def _dtype_handle(data):
    # per-array MPI datatype handle; jitted calls resolve it at compile time
    return DATATYPE_HANDLES[str(data.dtype)]


@overload(_dtype_handle)
def _ol_dtype_handle(data):
    handle = DATATYPE_HANDLES[str(data.dtype)]

    def impl(data):
        return handle

    return impl


def _is_complex_kind(data):
    return data.dtype.kind == "c"


@overload(_is_complex_kind)
def _ol_is_complex_kind(data):
    flag = str(data.dtype).startswith("complex")

    def impl(data):
        return flag

    return impl


def _real_scalar_handle(data):
    # handle of the real scalar type underlying a complex array
    return DATATYPE_HANDLES["float32" if data.dtype.itemsize == 8 else "float64"]


@overload(_real_scalar_handle)
def _ol_real_scalar_handle(data):
    handle = DATATYPE_HANDLES["float32" if str(data.dtype) == "complex64" else "float64"]

    def impl(data):
        return handle

    return impl


@register_jitable
def total_count(view):
    """Number of elements addressed by the view (1 for zero-dimensional)."""
    return view.size


@register_jitable
def _is_row_major(view):
    # dense C layout; extent-1 dimensions carry no stride information
    if view.size == 0:
        return True
    expected = view.itemsize
    for axis in range(view.ndim - 1, -1, -1):
        n = view.shape[axis]
        if n == 1:
            continue
        if view.strides[axis] != expected:
            return False
        expected *= n
    return True


@register_jitable
def _is_col_major(view):
    if view.size == 0:
        return True
    expected = view.itemsize
    for axis in range(view.ndim):
        n = view.shape[axis]
        if n == 1:
            continue
        if view.strides[axis] != expected:
            return False
        expected *= n
    return True


@register_jitable
def is_contiguous(view):
    """True iff the view is dense in row-major or column-major order."""
    return _is_row_major(view) or _is_col_major(view)


def pack(view):
    """Copy the view into a fresh contiguous buffer in row-major index order.

    Dense row-major input is returned as a flat view without copying.
    """
    return np.ascontiguousarray(view).reshape(-1)


@overload(pack)
def _ol_pack(view):
    def impl(view):
        if _is_row_major(view):
            return view.ravel()
        out = np.empty(view.size, view.dtype)
        k = 0
        for idx in np.ndindex(view.shape):
            out[k] = view[idx]
            k += 1
        return out

    return impl


def unpack(buffer, view):
    """Write a contiguous element sequence into the view in row-major order.

    Inverse of :func:`pack`: ``unpack(pack(v), v)`` leaves ``v`` unchanged.
    """
    if buffer.size != view.size:
        raise ValueError("buffer length does not match the view's element count")
    view[...] = buffer.reshape(view.shape)


@overload(unpack)
def _ol_unpack(buffer, view):
    def impl(buffer, view):
        if buffer.size != view.size:
            raise ValueError("buffer length does not match the view's element count")
        k = 0
        for idx in np.ndindex(view.shape):
            view[idx] = buffer[k]
            k += 1

    return impl
