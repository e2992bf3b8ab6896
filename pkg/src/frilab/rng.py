"""Counter-based random streams (Philox4x64-10) usable from numba kernels.

A stream is identified by ``(master_seed, key)`` where ``key`` is a
``(purpose, index, sub)`` triple.  The seed is the Philox key, the packed
triple occupies counter word 2 and a substream id occupies counter word 1,
so distinct keys (or substreams) walk disjoint counter ranges and never
overlap.  Word 0 counts blocks inside a substream.

The block function is bit-compatible with ``numpy.random.Philox``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from llvmlite import ir
from numba import njit, types, uint64
from numba.extending import intrinsic

PURPOSE_BITS = 16
INDEX_BITS = 32
SUB_BITS = 16

# purpose tags
WALK = 1
CAPACITY = 2
FRI = 3
EDGE_INPUTS = 4
EDGE_DIRECT = 5
COUPLING = 6
SWEEP = 7
CLIMB = 8
TEST = 255

_M0 = uint64(0xD2E7470EE14C6C93)
_M1 = uint64(0xCA5A826395121157)
_W0 = uint64(0x9E3779B97F4A7C15)
_W1 = uint64(0xBB67AE8584CAA73B)
_LO32 = uint64(0xFFFFFFFF)
_S32 = uint64(32)
_S11 = uint64(11)
_ONE = uint64(1)
_ZERO = uint64(0)

STATE_DTYPE = np.dtype(
    [
        ("k0", "u8"), ("k1", "u8"),
        ("c0", "u8"), ("c1", "u8"), ("c2", "u8"), ("c3", "u8"),
        ("buf", "u8", (4,)), ("pos", "u8"),
        ("half", "u8"), ("has_half", "u8"),
    ]
)


@intrinsic
def _mulhilo(typingctx, a, b):
    """Full 64x64 -> 128-bit product as (hi, lo), one native multiply."""
    sig = types.UniTuple(types.uint64, 2)(types.uint64, types.uint64)

    def codegen(context, builder, signature, args):
        i128 = ir.IntType(128)
        p = builder.mul(builder.zext(args[0], i128), builder.zext(args[1], i128))
        lo = builder.trunc(p, ir.IntType(64))
        hi = builder.trunc(builder.lshr(p, ir.Constant(i128, 64)), ir.IntType(64))
        return context.make_tuple(builder, signature.return_type, [hi, lo])

    return sig, codegen


@njit(cache=True)
def philox_block(c0, c1, c2, c3, k0, k1):
    for r in range(10):
        if r > 0:
            k0 = k0 + _W0
            k1 = k1 + _W1
        hi0, lo0 = _mulhilo(_M0, c0)
        hi1, lo1 = _mulhilo(_M1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


# Kernels take the state as a record (``arr[0]``); records are passed by
# pointer, arrays would pay a refcount round-trip on every draw.


@njit(inline="always")
def next_u64(st):
    pos = st.pos
    if pos >= uint64(4):
        # 256-bit counter increment with carry, as numpy does
        st.c0 += _ONE
        if st.c0 == _ZERO:
            st.c1 += _ONE
            if st.c1 == _ZERO:
                st.c2 += _ONE
                if st.c2 == _ZERO:
                    st.c3 += _ONE
        b0, b1, b2, b3 = philox_block(st.c0, st.c1, st.c2, st.c3, st.k0, st.k1)
        st.buf[0] = b0
        st.buf[1] = b1
        st.buf[2] = b2
        st.buf[3] = b3
        pos = _ZERO
    st.pos = pos + _ONE
    return st.buf[np.intp(pos)]


@njit(inline="always")
def next_u32(st):
    if st.has_half != _ZERO:
        st.has_half = _ZERO
        return st.half
    v = next_u64(st)
    st.half = v >> _S32
    st.has_half = _ONE
    return v & _LO32


@njit(inline="always")
def next_double(st):
    """Uniform on (0, 1] with 53-bit resolution."""
    return np.float64((next_u64(st) >> _S11) + _ONE) * (1.0 / 9007199254740992.0)


@njit(inline="always")
def next_below(st, n):
    """Uniform integer in [0, n) for 1 <= n < 2**32 (Lemire, unbiased)."""
    nn = uint64(n)
    m = next_u32(st) * nn
    low = m & _LO32
    if low < nn:
        t = (uint64(4294967296) - nn) % nn
        while low < t:
            m = next_u32(st) * nn
            low = m & _LO32
    return np.int64(m >> _S32)


@njit(inline="always")
def geometric(st, inv_log_q):
    """G >= 0 with P(G >= k) = q**k, by inverting the CDF on one uniform.

    ``inv_log_q`` is 1/log(q); pass 0.0 for q = 0 (G is always 0).
    """
    if inv_log_q == 0.0:
        return 0
    return np.int64(math.floor(math.log(next_double(st)) * inv_log_q))


@njit(cache=True)
def poisson(st, lam):
    if lam <= 0.0:
        return 0
    if lam < 10.0:
        u = next_double(st)
        p = math.exp(-lam)
        f = p
        k = 0
        while u > f and k < 1000:
            k += 1
            p *= lam / k
            f += p
        return k
    # PTRS transformed rejection (Hoermann 1993)
    slam = math.sqrt(lam)
    loglam = math.log(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        u = next_double(st) - 0.5
        v = next_double(st)
        us = 0.5 - abs(u)
        k = math.floor((2.0 * a / us + b) * u + lam + 0.43)
        if us >= 0.07 and v <= vr:
            return np.int64(k)
        if k < 0 or (us < 0.013 and v > us):
            continue
        if (math.log(v) + math.log(invalpha) - math.log(a / (us * us) + b)) <= (
            -lam + k * loglam - math.lgamma(k + 1.0)
        ):
            return np.int64(k)


def pack_key(key: tuple[int, int, int]) -> int:
    if len(key) != 3:
        raise ValueError(f"stream key must be (purpose, index, sub), got {key!r}")
    purpose, index, sub = (int(k) for k in key)
    if not 0 <= purpose < 1 << PURPOSE_BITS:
        raise ValueError(f"purpose tag {purpose} outside [0, 2^{PURPOSE_BITS})")
    if not 0 <= index < 1 << INDEX_BITS:
        raise ValueError(f"index {index} outside [0, 2^{INDEX_BITS})")
    if not 0 <= sub < 1 << SUB_BITS:
        raise ValueError(f"sub-index {sub} outside [0, 2^{SUB_BITS})")
    return (purpose << (INDEX_BITS + SUB_BITS)) | (index << SUB_BITS) | sub


@njit(cache=True)
def init_state(seed, packed_key, substream):
    """One-element state array; kernels use ``arr[0]``."""
    arr = np.zeros(1, dtype=STATE_DTYPE)
    st = arr[0]
    st.k0 = uint64(seed)
    st.c1 = uint64(substream)
    st.c2 = uint64(packed_key)
    st.pos = uint64(4)
    return arr


@njit(inline="always")
def reset(st, seed, packed_key, substream):
    """Re-point an existing state record at another substream (no allocation)."""
    st.k0 = uint64(seed)
    st.k1 = _ZERO
    st.c0 = _ZERO
    st.c1 = uint64(substream)
    st.c2 = uint64(packed_key)
    st.c3 = _ZERO
    st.pos = uint64(4)
    st.half = _ZERO
    st.has_half = _ZERO


@dataclass(frozen=True)
class RngStream:
    """Handle naming a family of substreams; cheap to copy and send to workers."""

    master_seed: int
    key: tuple[int, int, int]

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 1 << 64:
            raise ValueError("master seed must fit in 64 unsigned bits")
        pack_key(self.key)

    @property
    def packed(self) -> int:
        return pack_key(self.key)

    def state(self, substream: int = 0) -> np.ndarray:
        """Fresh one-element state array for one substream."""
        if not 0 <= substream < 1 << 64:
            raise ValueError("substream id must fit in 64 unsigned bits")
        return init_state(np.uint64(self.master_seed), np.uint64(self.packed), np.uint64(substream))

    def with_key(self, purpose: int, index: int = 0, sub: int = 0) -> "RngStream":
        return RngStream(self.master_seed, (purpose, index, sub))

    def raw(self, n: int, substream: int = 0) -> np.ndarray:
        return _raw(self.state(substream), n)

    def uniforms(self, n: int, substream: int = 0) -> np.ndarray:
        return _uniforms(self.state(substream), n)


def derive_stream(master_seed: int, key: tuple[int, int, int]) -> RngStream:
    return RngStream(int(master_seed), tuple(int(k) for k in key))


@njit(cache=True)
def _raw(arr, n):
    st = arr[0]
    out = np.empty(n, dtype=np.uint64)
    for i in range(n):
        out[i] = next_u64(st)
    return out


@njit(cache=True)
def _uniforms(arr, n):
    st = arr[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        out[i] = next_double(st)
    return out


@njit(cache=True)
def substream_id(group, chunk):
    # group in high 24 bits, chunk in low 40 bits
    return (uint64(group) << uint64(40)) | uint64(chunk)

