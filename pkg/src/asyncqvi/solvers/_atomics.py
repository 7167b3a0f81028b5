"""Atomic memory operations on int64 array elements for nopython code.

Each helper takes ``(array, index, ...)`` and operates on that element in place.
"""

import ctypes

from numba import njit
from numba.core import cgutils
from numba.extending import intrinsic

SPINS_BEFORE_YIELD = 64

_libc = ctypes.CDLL(None)
_sched_yield = _libc.sched_yield
_sched_yield.restype = ctypes.c_int
_sched_yield.argtypes = []


def _element_pointer(context, builder, aryty, ary, idx):
    array = context.make_array(aryty)(context, builder, ary)
    return cgutils.get_item_pointer(context, builder, aryty, array, [idx])


@intrinsic
def atomic_cas(typingctx, arr, idx, expected, desired):
    """Compare-and-swap; returns the value found before the operation."""
    sig = arr.dtype(arr, idx, arr.dtype, arr.dtype)

    def codegen(context, builder, signature, args):
        ptr = _element_pointer(context, builder, signature.args[0], args[0], args[1])
        res = builder.cmpxchg(ptr, args[2], args[3], "acq_rel", "acquire")
        return builder.extract_value(res, 0)
    return sig, codegen


def _rmw(op):
    @intrinsic
    def impl(typingctx, arr, idx, val):
        sig = arr.dtype(arr, idx, arr.dtype)

        def codegen(context, builder, signature, args):
            ptr = _element_pointer(context, builder, signature.args[0], args[0], args[1])
            return builder.atomic_rmw(op, ptr, args[2], "seq_cst")
        return sig, codegen
    return impl


atomic_add = _rmw("add")     # returns the previous value
atomic_max = _rmw("max")     # signed max; returns the previous value
atomic_xchg = _rmw("xchg")


@intrinsic
def atomic_load(typingctx, arr, idx):
    sig = arr.dtype(arr, idx)

    def codegen(context, builder, signature, args):
        ptr = _element_pointer(context, builder, signature.args[0], args[0], args[1])
        return builder.load_atomic(ptr, "acquire", 8)
    return sig, codegen


@njit(nogil=True)
def spin_acquire(words, idx):
    spins = 0
    while True:
        if atomic_load(words, idx) == 0 and atomic_cas(words, idx, 0, 1) == 0:
            return
        spins += 1
        if spins >= SPINS_BEFORE_YIELD:
            _sched_yield()
            spins = 0


@njit(nogil=True)
def release(words, idx):
    atomic_xchg(words, idx, 0)


@njit(nogil=True)
def claim_iteration(counter, limit):
    """Atomically reserve the next iteration index below ``limit``; -1 when exhausted."""
    while True:
        t = atomic_load(counter, 0)
        if t >= limit:
            return -1
        if atomic_cas(counter, 0, t, t + 1) == t:
            return t
