"""Point-to-point transfers: blocking, non-blocking and request completion.

Requests are exposed as plain unsigned 64-bit integers so that arrays of
pending requests can live inside numeric arrays in JIT-compiled kernels.
``isend`` on a non-contiguous view packs the data into a malloc-backed
staging buffer owned by the request; the buffer is registered in a small
process-global table keyed by the request handle and released by whichever
wait/test call completes the request.

The registry table is read and written through raw memcpy against its
address: Numba freezes module-level arrays as compile-time constants, so
direct global indexing would observe a stale snapshot from inside kernels.
"""

import numpy as np
from numba.extending import overload, register_jitable

from .arrays import _dtype_handle, _is_row_major, pack, unpack
from .runtime import (
    COMM_WORLD,
    ERR_BUFFER,
    ERR_OTHER,
    REQUEST_BYTES,
    REQUEST_NULL,
    STATUS_BYTES,
    SUCCESS,
    UNDEFINED,
    _libc_free,
    _libc_malloc,
    _libc_memcpy,
    _MPI_Irecv,
    _MPI_Isend,
    _MPI_Recv,
    _MPI_Send,
    _MPI_Test,
    _MPI_Testall,
    _MPI_Testany,
    _MPI_Wait,
    _MPI_Waitall,
    _MPI_Waitany,
)

_REQUEST_IS_INT = REQUEST_BYTES == 4

# staging registry: _CAPACITY slots of (request handle, buffer address)
_CAPACITY = 256
_registry = np.zeros(2 * _CAPACITY, dtype=np.uint64)
_REGISTRY_ADDR = _registry.ctypes.data


def _free_ptr(ptr):
    # host ctypes only accepts plain ints for void*; numba converts uint64
    _libc_free(int(ptr))


@overload(_free_ptr)
def _ol_free_ptr(ptr):
    def impl(ptr):
        _libc_free(ptr)

    return impl


@register_jitable
def _registry_put(handle, ptr):
    # claim the first free slot; False when the table is full
    slot = np.empty(2, np.uint64)
    for i in range(_CAPACITY):
        _libc_memcpy(slot.ctypes.data, _REGISTRY_ADDR + 16 * i, 16)
        if slot[1] == 0:
            slot[0] = handle
            slot[1] = ptr
            _libc_memcpy(_REGISTRY_ADDR + 16 * i, slot.ctypes.data, 16)
            return True
    return False


@register_jitable
def _registry_release(handle):
    # free the staging buffer attached to the handle, if any
    slot = np.empty(2, np.uint64)
    for i in range(_CAPACITY):
        _libc_memcpy(slot.ctypes.data, _REGISTRY_ADDR + 16 * i, 16)
        if slot[1] != 0 and slot[0] == handle:
            _free_ptr(slot[1])
            slot[0] = 0
            slot[1] = 0
            _libc_memcpy(_REGISTRY_ADDR + 16 * i, slot.ctypes.data, 16)
            return


def staging_count():
    """Number of live staging buffers (diagnostic; 0 after all waits)."""
    return int(np.count_nonzero(_registry[1::2]))


@register_jitable
def _new_request_slot():
    if _REQUEST_IS_INT:
        return np.zeros(1, np.int32)
    return np.zeros(1, np.int64)


@register_jitable
def _slot_to_handle(slot):
    # zero-extend the native request value into the public uint64 form
    if _REQUEST_IS_INT:
        return np.uint64(np.uint32(slot[0]))
    return np.uint64(slot[0])


@register_jitable
def _handle_to_slot(handle, slot, i):
    if _REQUEST_IS_INT:
        slot[i] = np.int32(np.uint32(handle & np.uint64(0xFFFFFFFF)))
    else:
        slot[i] = np.int64(handle)


@register_jitable
def _native_requests(reqs):
    if _REQUEST_IS_INT:
        native = np.empty(reqs.size, np.int32)
    else:
        native = np.empty(reqs.size, np.int64)
    for i in range(reqs.size):
        _handle_to_slot(reqs[i], native, i)
    return native


@register_jitable
def _status_scratch(n):
    return np.empty(max(n, 1) * STATUS_BYTES, np.uint8)


REQUEST_NULL_U64 = np.uint64(REQUEST_NULL & (2**64 - 1))


@register_jitable
def send(data, dest, tag=0):
    """Blocking send of the view's row-major logical content to ``dest``."""
    if _is_row_major(data):
        return _MPI_Send(data.ctypes.data, data.size, _dtype_handle(data), dest, tag, COMM_WORLD)
    staged = pack(data)
    return _MPI_Send(staged.ctypes.data, staged.size, _dtype_handle(data), dest, tag, COMM_WORLD)


@register_jitable
def recv(data, source, tag=0):
    """Blocking receive into the view (row-major logical order)."""
    status_buf = _status_scratch(1)
    if _is_row_major(data):
        return _MPI_Recv(
            data.ctypes.data, data.size, _dtype_handle(data), source, tag, COMM_WORLD,
            status_buf.ctypes.data,
        )
    scratch = np.empty(data.size, data.dtype)
    status = _MPI_Recv(
        scratch.ctypes.data, scratch.size, _dtype_handle(data), source, tag, COMM_WORLD,
        status_buf.ctypes.data,
    )
    if status == SUCCESS:
        unpack(scratch, data)
    return status


@register_jitable
def isend(data, dest, tag=0):
    """Non-blocking send; returns ``(status, request)``.

    Contiguous data is sent in place and must not be mutated until the
    request completes.  Non-contiguous data is packed into a staging buffer
    owned by the request, so the source may be mutated immediately after
    this call returns.
    """
    slot = _new_request_slot()
    if _is_row_major(data):
        status = _MPI_Isend(
            data.ctypes.data, data.size, _dtype_handle(data), dest, tag, COMM_WORLD,
            slot.ctypes.data,
        )
        if status != SUCCESS:
            return status, REQUEST_NULL_U64
        return status, _slot_to_handle(slot)

    staged = pack(data)
    nbytes = staged.size * staged.itemsize
    ptr = _libc_malloc(nbytes + 1)
    if ptr == 0:
        return ERR_OTHER, REQUEST_NULL_U64
    _libc_memcpy(ptr, staged.ctypes.data, nbytes)
    status = _MPI_Isend(
        ptr, staged.size, _dtype_handle(data), dest, tag, COMM_WORLD, slot.ctypes.data
    )
    if status != SUCCESS:
        _libc_free(ptr)
        return status, REQUEST_NULL_U64
    handle = _slot_to_handle(slot)
    if not _registry_put(handle, np.uint64(ptr)):
        # registry full: degrade to a blocking send so nothing leaks or dangles
        status_buf = _status_scratch(1)
        status = _MPI_Wait(slot.ctypes.data, status_buf.ctypes.data)
        _libc_free(ptr)
        return status, REQUEST_NULL_U64
    return status, handle


@register_jitable
def irecv(data, source, tag=0):
    """Non-blocking receive; returns ``(status, request)``.

    The destination must be dense row-major; other layouts are rejected
    with a nonzero status because their unpack step cannot be deferred to
    request completion.
    """
    if not _is_row_major(data):
        return ERR_BUFFER, REQUEST_NULL_U64
    slot = _new_request_slot()
    status = _MPI_Irecv(
        data.ctypes.data, data.size, _dtype_handle(data), source, tag, COMM_WORLD,
        slot.ctypes.data,
    )
    if status != SUCCESS:
        return status, REQUEST_NULL_U64
    return status, _slot_to_handle(slot)


@register_jitable
def wait(req):
    """Block until the request completes; releases its staging buffer."""
    slot = _new_request_slot()
    _handle_to_slot(req, slot, 0)
    status_buf = _status_scratch(1)
    status = _MPI_Wait(slot.ctypes.data, status_buf.ctypes.data)
    if status == SUCCESS:
        _registry_release(req)
    return status


@register_jitable
def waitall(reqs):
    """Block until all requests in the uint64 array complete.

    Completed entries are overwritten with the null-request handle.
    """
    n = reqs.size
    native = _native_requests(reqs)
    status_buf = _status_scratch(n)
    status = _MPI_Waitall(n, native.ctypes.data, status_buf.ctypes.data)
    if status == SUCCESS:
        for i in range(n):
            _registry_release(reqs[i])
            reqs[i] = REQUEST_NULL_U64
    return status


@register_jitable
def waitany(reqs):
    """Block until one request completes; returns ``(status, index)``.

    The completed entry is overwritten with the null-request handle.  The
    index equals the MPI undefined constant when every entry was null.
    """
    n = reqs.size
    native = _native_requests(reqs)
    index = np.empty(1, np.int32)
    status_buf = _status_scratch(1)
    status = _MPI_Waitany(n, native.ctypes.data, index.ctypes.data, status_buf.ctypes.data)
    idx = index[0]
    if status == SUCCESS and idx != UNDEFINED:
        _registry_release(reqs[idx])
        reqs[idx] = REQUEST_NULL_U64
    return status, idx


@register_jitable
def test(req):
    """Poll one request; returns ``(status, completed)`` without blocking."""
    slot = _new_request_slot()
    _handle_to_slot(req, slot, 0)
    flag = np.zeros(1, np.int32)
    status_buf = _status_scratch(1)
    status = _MPI_Test(slot.ctypes.data, flag.ctypes.data, status_buf.ctypes.data)
    done = flag[0] != 0
    if status == SUCCESS and done:
        _registry_release(req)
    return status, done


@register_jitable
def testall(reqs):
    """Poll all requests; returns ``(status, all_completed)``.

    On completion every entry is overwritten with the null-request handle;
    a False flag leaves the array untouched.
    """
    n = reqs.size
    native = _native_requests(reqs)
    flag = np.zeros(1, np.int32)
    status_buf = _status_scratch(n)
    status = _MPI_Testall(n, native.ctypes.data, flag.ctypes.data, status_buf.ctypes.data)
    done = flag[0] != 0
    if status == SUCCESS and done:
        for i in range(n):
            _registry_release(reqs[i])
            reqs[i] = REQUEST_NULL_U64
    return status, done


@register_jitable
def testany(reqs):
    """Poll for any completion; returns ``(status, completed, index)``.

    The index is undefined when the flag is False.
    """
    n = reqs.size
    native = _native_requests(reqs)
    index = np.empty(1, np.int32)
    flag = np.zeros(1, np.int32)
    status_buf = _status_scratch(1)
    status = _MPI_Testany(
        n, native.ctypes.data, index.ctypes.data, flag.ctypes.data, status_buf.ctypes.data
    )
    done = flag[0] != 0
    idx = index[0]
    if status == SUCCESS and done and idx != UNDEFINED:
        _registry_release(reqs[idx])
        reqs[idx] = REQUEST_NULL_U64
    return status, done, idx
