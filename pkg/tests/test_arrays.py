import itertools

import numba
import numpy as np
import pytest

import jitmpi
from jitmpi import runtime
from jitmpi.arrays import ElementKind, element_kind

ALL_DTYPES = [np.dtype(name) for name in jitmpi.SUPPORTED_DTYPES]


# --- independent oracles ------------------------------------------------------


def nested_loop_pack(view):
    """Reference pack: explicit element-by-element copy in index order."""
    out = np.empty(view.size, view.dtype)
    for k, idx in enumerate(np.ndindex(view.shape)):
        out[k] = view[idx]
    return out


def nested_loop_unpack(buffer, view):
    for k, idx in enumerate(np.ndindex(view.shape)):
        view[idx] = buffer[k]


def element_addresses(view, order):
    base = view.ctypes.data
    addrs = []
    for idx in np.ndindex(view.shape if order == "C" else view.shape[::-1]):
        if order == "F":
            idx = idx[::-1]
        addrs.append(base + sum(i * s for i, s in zip(idx, view.strides)))
    return addrs


def brute_force_contiguous(view):
    """A view is contiguous iff enumerating its elements in row-major or
    column-major index order walks memory in steps of exactly one item."""
    if view.size == 0:
        return True
    item = view.itemsize
    for order in ("C", "F"):
        addrs = element_addresses(view, order)
        if all(b - a == item for a, b in zip(addrs, addrs[1:])):
            return True
    return False


def sample_views(rng, dtype, n=40):
    """Assorted small views: dense, transposed, sliced, negative steps."""
    views = []
    for _ in range(n):
        ndim = rng.integers(1, 4)
        shape = tuple(int(s) for s in rng.integers(1, 5, size=ndim))
        base = rng.integers(-50, 50, size=shape).astype(dtype)
        if dtype.kind == "c":
            base = base + 1j * rng.integers(-50, 50, size=shape).astype(dtype)
        order = rng.choice(["C", "F"])
        arr = np.asfortranarray(base) if order == "F" else np.ascontiguousarray(base)
        view = arr
        for axis in range(ndim):
            if rng.random() < 0.5:
                step = int(rng.choice([-2, -1, 1, 2, 3]))
                start = int(rng.integers(0, shape[axis]))
                sl = [slice(None)] * ndim
                sl[axis] = slice(start, None, step) if step > 0 else slice(start, None, step)
                view = view[tuple(sl)]
        if view.size and rng.random() < 0.3:
            view = view.T
        views.append(view)
    return views


# --- contiguity ---------------------------------------------------------------


def test_is_contiguous_row_major_example():
    a = np.zeros((2, 3), np.float64)
    assert a.strides == (24, 8)
    assert jitmpi.is_contiguous(a)


def test_is_contiguous_column_major_example():
    a = np.asfortranarray(np.zeros((2, 3), np.float64))
    assert a.strides == (8, 16)
    assert jitmpi.is_contiguous(a)


def test_is_contiguous_column_slice_example():
    a = np.arange(6, dtype=np.int64).reshape(2, 3)
    col = a[:, 1]
    assert col.shape == (2,) and col.strides == (24,)
    assert not jitmpi.is_contiguous(col)


def test_is_contiguous_ignores_unit_extent_dims():
    a = np.zeros((1, 5), np.float64)
    assert jitmpi.is_contiguous(a)
    assert jitmpi.is_contiguous(a.T)
    assert jitmpi.is_contiguous(np.zeros((3, 1, 2), np.float64))


def test_is_contiguous_matches_brute_force_enumeration():
    base_c = np.arange(64, dtype=np.float64).reshape(4, 4, 4)
    base_f = np.asfortranarray(base_c)
    steps = (1, 2, 3, -1, -2)
    starts = (0, 1)
    views = [np.zeros(()), np.zeros(0), np.zeros((0, 3))]
    for base in (base_c, base_f):
        for s0, s1 in itertools.product(steps, starts):
            views.append(base[::s0])
            views.append(base[s1, ::s0])
            views.append(base[s1, s1, ::s0])
            views.append(base[::s0, s1, :])
            views.append(base[::s0, ::s0])
            views.append(base[s1:, ::s0, s1:])
            views.append(base[::s0].T)
    for view in views:
        assert jitmpi.is_contiguous(view) == brute_force_contiguous(view), (
            view.shape, view.strides)


# --- total_count --------------------------------------------------------------


def test_total_count():
    assert jitmpi.total_count(np.zeros((2, 3))) == 6
    assert jitmpi.total_count(np.zeros(())) == 1
    assert jitmpi.total_count(np.zeros((0, 5))) == 0


# --- pack / unpack ------------------------------------------------------------


def test_pack_column_slice_example():
    a = np.array([[0, 1, 2], [10, 11, 12]], np.int64)
    assert jitmpi.pack(a[:, 1]).tolist() == [1, 11]


def test_pack_contiguous_identity():
    a = np.arange(12, dtype=np.float32).reshape(3, 4)
    packed = jitmpi.pack(a)
    assert packed.tolist() == a.ravel().tolist()
    assert packed.dtype == a.dtype


def test_pack_random_strided_views_match_nested_loop_oracle():
    rng = np.random.default_rng(42)
    for dtype in ALL_DTYPES:
        for view in sample_views(rng, dtype):
            expected = nested_loop_pack(view)
            got = jitmpi.pack(view)
            assert np.array_equal(got, expected), (view.shape, view.strides, dtype)


def test_pack_independent_of_storage_order():
    rng = np.random.default_rng(7)
    content = rng.standard_normal((3, 4, 2))
    c_copy = np.ascontiguousarray(content)
    f_copy = np.asfortranarray(content)
    assert np.array_equal(jitmpi.pack(c_copy), jitmpi.pack(f_copy))


def test_unpack_restores_column_slice():
    a = np.array([[0, 1, 2], [10, 11, 12]], np.int64)
    col = a[:, 1]
    buf = jitmpi.pack(col)
    a[:, 1] = -1
    jitmpi.unpack(buf, col)
    assert a.tolist() == [[0, 1, 2], [10, 11, 12]]


def test_unpack_empty_is_noop():
    a = np.zeros((0, 3))
    jitmpi.unpack(np.zeros(0), a)


def test_unpack_length_mismatch_raises():
    with pytest.raises(ValueError):
        jitmpi.unpack(np.zeros(3), np.zeros((2, 2)))


def test_pack_unpack_roundtrip_is_identity():
    rng = np.random.default_rng(3)
    for dtype in ALL_DTYPES:
        for view in sample_views(rng, dtype, n=25):
            if view.size == 0:
                continue
            before = view.copy()
            jitmpi.unpack(jitmpi.pack(view), view)
            assert np.array_equal(view, before)


def test_unpack_mutated_buffer_matches_loop_assignment_oracle():
    rng = np.random.default_rng(11)
    base = rng.standard_normal((4, 5, 3))
    view = base[::2, 1::2, ::-1]
    buf = jitmpi.pack(view)
    buf *= 2.0
    expected_base = base.copy()
    nested_loop_unpack(buf, expected_base[::2, 1::2, ::-1])
    jitmpi.unpack(buf, view)
    assert np.array_equal(base, expected_base)


# --- datatype handles ---------------------------------------------------------


@pytest.mark.parametrize(
    "kind,extent",
    [
        (ElementKind.INT32, 4),
        (ElementKind.INT64, 8),
        (ElementKind.FLOAT32, 4),
        (ElementKind.FLOAT64, 8),
        (ElementKind.COMPLEX64, 8),
        (ElementKind.COMPLEX128, 16),
    ],
)
def test_datatype_handle_extent_matches_mpi_query(kind, extent):
    # oracle: ask the MPI library itself for the datatype's extent
    assert runtime.datatype_extent(jitmpi.datatype_handle(kind)) == extent
    assert kind.itemsize == extent


def test_datatype_handle_accepts_dtype_spellings():
    h = jitmpi.datatype_handle(ElementKind.FLOAT64)
    assert jitmpi.datatype_handle("float64") == h
    assert jitmpi.datatype_handle(np.float64) == h
    assert jitmpi.datatype_handle(np.dtype("float64")) == h


def test_unsupported_kind_rejected():
    with pytest.raises(ValueError):
        jitmpi.datatype_handle("float16")
    with pytest.raises(ValueError):
        element_kind(np.zeros(1, np.uint8))


def test_element_kind_of_array():
    assert element_kind(np.zeros(1, np.complex64)) is ElementKind.COMPLEX64


# --- kernel/host parity -------------------------------------------------------


@numba.njit
def _arrays_kernel(view):
    packed = jitmpi.pack(view)
    contig = jitmpi.is_contiguous(view)
    return packed, contig, jitmpi.total_count(view)


@numba.njit
def _unpack_kernel(buf, view):
    jitmpi.unpack(buf, view)


def test_pack_and_queries_in_kernel_match_host():
    samples = [
        np.arange(12, dtype=np.float64).reshape(3, 4),
        np.asfortranarray(np.arange(12, dtype=np.int32).reshape(3, 4)),
        np.arange(24, dtype=np.float32).reshape(4, 6)[::2, 1::2],
        np.arange(10, dtype=np.complex128)[::-1],
    ]
    for view in samples:
        packed, contig, count = _arrays_kernel(view)
        assert np.array_equal(packed, jitmpi.pack(view))
        assert contig == jitmpi.is_contiguous(view)
        assert count == view.size


def test_unpack_in_kernel_matches_host():
    base = np.arange(24, dtype=np.float64).reshape(4, 6)
    view = base[1::2, ::2]
    buf = np.arange(view.size, dtype=np.float64) * -1
    expected_base = base.copy()
    expected_base[1::2, ::2] = buf.reshape(view.shape)
    _unpack_kernel(buf, view)
    assert np.array_equal(base, expected_base)
