# ============================================================================== #
# MIT License                                                                    #
#                                                                                #
# Copyright (c) 2024 Nathan Juraj Michlo                                         #
#                                                                                #
# Permission is hereby granted, free of charge, to any person obtaining a copy   #
# of this software and associated documentation files (the "Software"), to deal  #
# in the Software without restriction, including without limitation the rights   #
# to use, copy, modify, merge, publish, distribute, sublicense, and/or sell      #
# copies of the Software, and to permit persons to whom the Software is          #
# furnished to do so, subject to the following conditions:                       #
#                                                                                #
# The above copyright notice and this permission notice shall be included in all #
# copies or substantial portions of the Software.                                #
#                                                                                #
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR     #
# IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,       #
# FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE    #
# AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER         #
# LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,  #
# OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE  #
# SOFTWARE.                                                                      #
# ============================================================================== #

"""
Three-pass convolution for n = l * m.

    y = B (I_m (x) F_l) D' (I_m (x) F_l^{-1}) B^{-1} u

B holds m x m blocks that are each diagonal of size l, so one multiply
streams the buffer once in column tiles. The middle phase is m independent
length-l convolutions that each fit in the working set. D' is the kernel
spectrum n * F_n^{-1} k, stride permuted into m runs of length l.
"""

import dataclasses
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
import pydantic

from longconv._core.butterfly import (
    ButterflyPlan,
    ConvMode,
    DirectionEnum,
    apply_plan,
    build_plan,
    conv_transform_size,
    fold_to_length,
)
from longconv._core.types import (
    ComplexSequence,
    IncompatibleOperandsError,
    InvalidSequenceError,
    as_complex_sequence,
    as_real_batch,
    pad_to_length,
)
from longconv._core.utils import smallest_divisor_at_least

LOGGER = logging.getLogger(__name__)


DEFAULT_WORKING_SET = 8192
DEFAULT_BLOCK_SIZE = 16
CONDITION_LIMIT = 1e12


# ========================================================================= #
# ERRORS                                                                    #
# ========================================================================= #


class FactorizationError(ValueError):
    pass


class SingularBlockError(RuntimeError):
    pass


class WorkingSetExceededError(ValueError):
    pass


# ========================================================================= #
# PASS COUNTER                                                              #
# ========================================================================= #


PHASES = (1, 2, 3)


class PassReport(pydantic.BaseModel, extra="forbid"):
    n: int
    working_set: int
    sweeps: int
    phases: List[int]
    reads: Dict[int, int]
    writes: Dict[int, int]
    max_reads_per_element: Dict[int, int]
    peak_working_set: int


class PassCounter:
    """
    Counts reads and writes of the length-n global buffer per phase.

    A phase counts as a sweep once every element has been touched in it.
    Records may come from several worker threads.
    """

    def __init__(self, n: int, working_set: int = DEFAULT_WORKING_SET):
        if n < 1:
            raise ValueError(f"n must be >= 1, got: {repr(n)}")
        if working_set < 1:
            raise ValueError(f"working_set must be >= 1, got: {repr(working_set)}")
        self.n = n
        self.working_set = working_set
        self._reads = np.zeros((len(PHASES), n), dtype=np.int64)
        self._writes = np.zeros((len(PHASES), n), dtype=np.int64)
        self._peak = 0
        self._lock = threading.Lock()

    def _row(self, phase: int) -> int:
        if phase not in PHASES:
            raise ValueError(f"phase must be one of {PHASES}, got: {repr(phase)}")
        return phase - 1

    def record(
        self,
        phase: int,
        indices: np.ndarray,
        resident: int,
        *,
        read: bool = True,
        write: bool = True,
    ):
        row = self._row(phase)
        with self._lock:
            if read:
                np.add.at(self._reads[row], indices, 1)
            if write:
                np.add.at(self._writes[row], indices, 1)
            self._peak = max(self._peak, int(resident))

    def check_resident(self, resident: int, what: str):
        if resident > self.working_set:
            raise WorkingSetExceededError(
                f"{what} needs {resident} resident elements, working set is {self.working_set}"
            )

    @property
    def phases(self) -> List[int]:
        touched = (self._reads + self._writes).sum(axis=1) > 0
        return [p for p, t in zip(PHASES, touched) if t]

    @property
    def sweeps(self) -> int:
        covered = ((self._reads + self._writes) > 0).all(axis=1)
        return int(covered.sum())

    @property
    def peak_working_set(self) -> int:
        return self._peak

    def reads(self, phase: int) -> int:
        return int(self._reads[self._row(phase)].sum())

    def writes(self, phase: int) -> int:
        return int(self._writes[self._row(phase)].sum())

    def max_reads_per_element(self, phase: int) -> int:
        return int(self._reads[self._row(phase)].max())

    def report(self) -> PassReport:
        return PassReport(
            n=self.n,
            working_set=self.working_set,
            sweeps=self.sweeps,
            phases=self.phases,
            reads={p: self.reads(p) for p in PHASES},
            writes={p: self.writes(p) for p in PHASES},
            max_reads_per_element={p: self.max_reads_per_element(p) for p in PHASES},
            peak_working_set=self.peak_working_set,
        )


# ========================================================================= #
# BLOCK MATRIX OF DIAGONAL BLOCKS                                           #
# ========================================================================= #


def _block_entries(n: int, l: int, m: int) -> np.ndarray:
    j = np.arange(m, dtype=np.int64)[:, None, None]
    k = np.arange(m, dtype=np.int64)[None, :, None]
    tau = np.arange(l, dtype=np.int64)[None, None, :]
    return np.exp(-2j * np.pi * ((k * (j * l + tau)) % n) / n)


@dataclasses.dataclass(frozen=True)
class BlockDiagonalButterfly:
    """
    m x m grid of diagonal l x l blocks, stored as `blocks[j, k, tau]`.
    """

    n: int
    l: int
    m: int
    blocks: np.ndarray  # (m, m, l)
    inverse_blocks: np.ndarray  # (m, m, l)

    @classmethod
    def build(cls, n: int, l: int) -> "BlockDiagonalButterfly":
        if l < 1 or n % l != 0:
            raise FactorizationError(f"l={l} must divide n={n}")
        m = n // l
        blocks = _block_entries(n, l, m)
        inverse = _invert_blocks(blocks)
        return cls(n=n, l=l, m=m, blocks=blocks, inverse_blocks=inverse)

    def dense(self, inverse: bool = False) -> np.ndarray:
        blocks = self.inverse_blocks if inverse else self.blocks
        out = np.zeros((self.n, self.n), dtype=np.complex128)
        tau = np.arange(self.l)
        for j in range(self.m):
            for k in range(self.m):
                out[j * self.l + tau, k * self.l + tau] = blocks[j, k]
        return out

    def matvec(
        self,
        x: "npt.ArrayLike",
        counter: Optional[PassCounter] = None,
        phase: int = 1,
        inverse: bool = False,
    ) -> ComplexSequence:
        x = as_complex_sequence(x, name="x")
        if x.shape[0] != self.n:
            raise IncompatibleOperandsError(
                f"block matrix covers n={self.n}, got length {x.shape[0]}"
            )
        blocks = self.inverse_blocks if inverse else self.blocks
        return _stream_blocks(blocks, x, self.l, self.m, counter, phase)


def _stream_blocks(
    blocks: np.ndarray,
    x: np.ndarray,
    l: int,
    m: int,
    counter: Optional[PassCounter],
    phase: int,
) -> np.ndarray:
    # column tiles of width t hold the m * t inputs that feed the same outputs
    working_set = counter.working_set if counter is not None else DEFAULT_WORKING_SET
    if counter is not None:
        counter.check_resident(m, "a block-row sweep")
    tile = max(1, min(l, working_set // m))
    src = x.reshape(m, l)
    out = np.empty((m, l), dtype=np.complex128)
    rows = np.arange(m, dtype=np.int64)[:, None] * l
    for start in range(0, l, tile):
        cols = slice(start, min(start + tile, l))
        out[:, cols] = np.einsum("jkt,kt->jt", blocks[:, :, cols], src[:, cols])
        if counter is not None:
            indices = (rows + np.arange(cols.start, cols.stop)[None, :]).ravel()
            counter.record(phase, indices, resident=indices.size)
    return out.reshape(-1)


def _invert_blocks(blocks: np.ndarray) -> np.ndarray:
    # one dense m x m system per diagonal position tau
    systems = np.ascontiguousarray(blocks.transpose(2, 0, 1))
    cond = np.linalg.cond(systems)
    worst = float(np.max(cond))
    if not np.isfinite(worst) or worst > CONDITION_LIMIT:
        tau = int(np.argmax(np.where(np.isfinite(cond), cond, np.inf)))
        raise SingularBlockError(
            f"block system at position {tau} has condition number {worst:.3e} > {CONDITION_LIMIT:.0e}, the (l, m) factorization is invalid"
        )
    return np.linalg.inv(systems).transpose(1, 2, 0)


def invert_block_butterfly(b: BlockDiagonalButterfly) -> BlockDiagonalButterfly:
    """
    Invert through the l independent m x m systems, the result swaps the
    stored forward and inverse blocks.
    """
    inverse = _invert_blocks(b.blocks)
    return BlockDiagonalButterfly(n=b.n, l=b.l, m=b.m, blocks=inverse, inverse_blocks=b.blocks)


# ========================================================================= #
# PLAN                                                                      #
# ========================================================================= #


def default_factorization(n: int, working_set: int = DEFAULT_WORKING_SET) -> Tuple[int, int]:
    """
    Pick l as the smallest divisor of n that is >= sqrt(n).
    """
    l = smallest_divisor_at_least(n, int(np.ceil(np.sqrt(n))))
    m = n // l
    if l > working_set or m > working_set:
        raise WorkingSetExceededError(
            f"n={n} splits into l={l}, m={m}, which does not fit a working set of {working_set}"
        )
    return l, m


@dataclasses.dataclass(frozen=True)
class ThreePassPlan:
    n: int
    l: int
    m: int
    outer: BlockDiagonalButterfly
    inner: ButterflyPlan
    spectrum: np.ndarray  # (m, l)


def kernel_spectrum(k: np.ndarray, l: int, m: int, r: int = DEFAULT_BLOCK_SIZE) -> np.ndarray:
    n = l * m
    # n * F_n^{-1} k, entry c + m * a moves to run c, position a
    spectrum = apply_plan(build_plan(n, r), k, DirectionEnum.inverse) * n
    return np.ascontiguousarray(spectrum.reshape(l, m).T)


def build_three_pass(
    k: "npt.ArrayLike",
    l: int,
    m: int,
    r: int = DEFAULT_BLOCK_SIZE,
) -> ThreePassPlan:
    k = as_complex_sequence(k, name="k")
    n = k.shape[0]
    if l < 1 or m < 1 or l * m != n:
        raise FactorizationError(f"three-pass plan needs n = l * m, got n={n}, l={l}, m={m}")
    plan = ThreePassPlan(
        n=n,
        l=l,
        m=m,
        outer=BlockDiagonalButterfly.build(n, l),
        inner=build_plan(l, r),
        spectrum=kernel_spectrum(k, l, m, r),
    )
    LOGGER.debug(f"[three_pass] built plan n={n}, l={l}, m={m}, inner factors={list(plan.inner.factors)}")
    return plan


# ========================================================================= #
# CONVOLUTION                                                               #
# ========================================================================= #


def _conv_block(plan: ThreePassPlan, v: np.ndarray, c: int) -> np.ndarray:
    run = v[c * plan.l : (c + 1) * plan.l]
    inner = apply_plan(plan.inner, run, DirectionEnum.inverse)
    return apply_plan(plan.inner, plan.spectrum[c] * inner)


def conv_three_pass(
    plan: ThreePassPlan,
    u: "npt.ArrayLike",
    counter: Optional[PassCounter] = None,
    block_order: Optional[Sequence[int]] = None,
    threads: Optional[int] = None,
) -> ComplexSequence:
    """
    Circular convolution of `u` with the plan's kernel in three phases.

    The m middle-phase blocks are independent, `block_order` and `threads`
    change the schedule but never the result.
    """
    u = as_complex_sequence(u, name="u")
    if u.shape[0] != plan.n:
        raise IncompatibleOperandsError(f"plan covers n={plan.n}, got length {u.shape[0]}")
    if counter is None:
        counter = PassCounter(plan.n)
    elif counter.n != plan.n:
        raise IncompatibleOperandsError(f"counter covers n={counter.n}, plan covers n={plan.n}")
    order = list(range(plan.m)) if block_order is None else [int(c) for c in block_order]
    if sorted(order) != list(range(plan.m)):
        raise ValueError(f"block_order must be a permutation of range({plan.m}), got: {order}")
    # phase 1
    v = _stream_blocks(plan.outer.inverse_blocks, u, plan.l, plan.m, counter, phase=1)
    # phase 2
    counter.check_resident(plan.l, "a middle-phase run")
    w = np.empty_like(v)

    def task(c: int):
        w[c * plan.l : (c + 1) * plan.l] = _conv_block(plan, v, c)
        indices = np.arange(c * plan.l, (c + 1) * plan.l)
        counter.record(2, indices, resident=2 * plan.l)

    if threads is not None and threads > 1 and plan.m > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(task, order))
    else:
        for c in order:
            task(c)
    # phase 3
    return _stream_blocks(plan.outer.blocks, w, plan.l, plan.m, counter, phase=3)


def three_pass_convolve(
    u: "npt.ArrayLike",
    k: "npt.ArrayLike",
    mode: ConvMode = ConvMode.circular,
    l: Optional[int] = None,
    r: int = DEFAULT_BLOCK_SIZE,
    working_set: int = DEFAULT_WORKING_SET,
    threads: Optional[int] = None,
    counter: Optional[PassCounter] = None,
) -> ComplexSequence:
    u = as_complex_sequence(u, name="u")
    k = as_complex_sequence(k, name="k")
    if u.shape != k.shape:
        raise IncompatibleOperandsError(
            f"convolution operands must have equal lengths, got {u.shape[0]} and {k.shape[0]}"
        )
    n = u.shape[0]
    if l is None:
        size, fold = conv_transform_size(n, r, mode)
        l, m = default_factorization(size, working_set)
    else:
        size, fold = (n if ConvMode(mode) == ConvMode.circular else 2 * n), False
        if size % l != 0:
            raise FactorizationError(f"l={l} must divide the transform length {size}")
        m = size // l
    plan = build_three_pass(pad_to_length(k, size), l, m, r)
    if counter is None:
        counter = PassCounter(size, working_set)
    y = conv_three_pass(plan, pad_to_length(u, size), counter, threads=threads)
    return fold_to_length(y, n, fold)


# ========================================================================= #
# REAL PACKING                                                              #
# ========================================================================= #


def _real_spectrum(x: np.ndarray, plan: ButterflyPlan) -> np.ndarray:
    # length-2L spectrum of a real sequence from one length-L complex transform
    half = plan.n
    z = apply_plan(plan, x[..., 0::2] + 1j * x[..., 1::2])
    z_neg = np.conj(np.roll(z[..., ::-1], 1, axis=-1))
    even = (z + z_neg) / 2
    odd = (z - z_neg) / 2j
    twiddle = np.exp(-1j * np.pi * np.arange(half) / half)
    return np.concatenate([even + twiddle * odd, even - twiddle * odd], axis=-1)


def _real_inverse(y: np.ndarray, plan: ButterflyPlan) -> np.ndarray:
    half = plan.n
    lo, hi = y[..., :half], y[..., half:]
    twiddle = np.exp(1j * np.pi * np.arange(half) / half)
    w = apply_plan(plan, (lo + hi) / 2 + 1j * (lo - hi) * twiddle / 2, DirectionEnum.inverse)
    out = np.empty(w.shape[:-1] + (2 * half,), dtype=np.float64)
    out[..., 0::2] = w.real
    out[..., 1::2] = w.imag
    return out


def conv_real_packed(
    u: "npt.ArrayLike",
    k: "npt.ArrayLike",
    mode: ConvMode = ConvMode.circular,
    r: int = DEFAULT_BLOCK_SIZE,
) -> np.ndarray:
    """
    Real convolution of even length 2L through complex transforms of length L,
    adjacent pairs are packed as (even + i * odd). Leading axes broadcast.
    """
    u = as_real_batch(u, name="u")
    k = as_real_batch(k, name="k")
    if u.shape[-1] != k.shape[-1]:
        raise IncompatibleOperandsError(
            f"convolution operands must have equal lengths, got {u.shape[-1]} and {k.shape[-1]}"
        )
    n = u.shape[-1]
    if n % 2 != 0:
        raise InvalidSequenceError(f"packed real convolution needs an even length, got: {n}")
    size = n if ConvMode(mode) == ConvMode.circular else 2 * n
    plan = build_plan(size // 2, r)
    u_hat = _real_spectrum(pad_to_length(u, size), plan)
    k_hat = _real_spectrum(pad_to_length(k, size), plan)
    return _real_inverse(u_hat * k_hat, plan)[..., :n]


# ========================================================================= #
# END                                                                       #
# ========================================================================= #


__all__ = (
    "DEFAULT_WORKING_SET",
    "DEFAULT_BLOCK_SIZE",
    "CONDITION_LIMIT",
    "FactorizationError",
    "SingularBlockError",
    "WorkingSetExceededError",
    "PHASES",
    "PassReport",
    "PassCounter",
    "BlockDiagonalButterfly",
    "invert_block_butterfly",
    "default_factorization",
    "ThreePassPlan",
    "kernel_spectrum",
    "build_three_pass",
    "conv_three_pass",
    "three_pass_convolve",
    "conv_real_packed",
)
