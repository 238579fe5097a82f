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
Butterfly decomposition of the DFT with a configurable block size `r`.

An n-point plan splits n = n1 * n2 with n1 the largest admissible block
(<= r) and recurses on n2. One stage applied to a length-n vector is

    P                     reshape to (n1, n2) and transpose
    I_{n2} (x) F_{n1}     n2 dense n1-point blocks on contiguous runs
    P^T                   transpose back
    D                     twiddles, the (n1, n2) matrix exp(-2*pi*i*j*k/n) flattened
    I_{n1} (x) F_{n2}     the remaining stages, recursively
    P                     final transpose into output order

Stages are applied right to left of the written factorisation, input side
first. The same scaffold runs with learned blocks in place of the DFT blocks.
"""

import dataclasses
import functools
import logging
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
import pydantic

from longconv._core.dft_reference import dense_dft_matrix
from longconv._core.types import (
    ComplexSequence,
    IncompatibleOperandsError,
    SeededRng,
    as_complex_batch,
    pad_to_length,
    standard_normal_draws,
)
from longconv._core.utils import next_power_of_two

LOGGER = logging.getLogger(__name__)

# ========================================================================= #
# ERRORS & ENUMS                                                            #
# ========================================================================= #


class InadmissibleSizeError(ValueError):
    pass


class PlanSizeError(ValueError):
    pass


class DirectionEnum(str, Enum):
    forward = "forward"
    inverse = "inverse"


class ConvMode(str, Enum):
    circular = "circular"
    causal = "causal"


# ========================================================================= #
# PERMUTATIONS & TWIDDLES                                                   #
# ========================================================================= #


@dataclasses.dataclass(frozen=True)
class StridePermutation:
    """
    Reshape to (n1, n2) and transpose: flat j1*n2 + j2 moves to j2*n1 + j1.
    """

    n: int
    n1: int
    n2: int

    def __post_init__(self):
        if self.n1 * self.n2 != self.n or min(self.n1, self.n2) < 1:
            raise ValueError(
                f"stride permutation needs n = n1 * n2, got n={self.n}, n1={self.n1}, n2={self.n2}"
            )

    @functools.cached_property
    def mapping(self) -> np.ndarray:
        # destination index of every source index
        mapping = np.arange(self.n).reshape(self.n2, self.n1).T.ravel()
        mapping.flags.writeable = False
        return mapping

    @property
    def inverse(self) -> "StridePermutation":
        return StridePermutation(n=self.n, n1=self.n2, n2=self.n1)

    def apply(self, x: np.ndarray) -> np.ndarray:
        lead = x.shape[:-1]
        return x.reshape(*lead, self.n1, self.n2).swapaxes(-1, -2).reshape(*lead, self.n)

    def inverse_apply(self, x: np.ndarray) -> np.ndarray:
        return self.inverse.apply(x)


def twiddle_matrix(n: int, n1: int, n2: int) -> np.ndarray:
    j = np.arange(n1, dtype=np.int64)[:, None]
    k = np.arange(n2, dtype=np.int64)[None, :]
    return np.exp(-2j * np.pi * ((j * k) % n) / n)


@dataclasses.dataclass(frozen=True)
class TwiddleDiagonal:
    n: int
    n1: int
    n2: int

    @functools.cached_property
    def diagonal(self) -> np.ndarray:
        diagonal = twiddle_matrix(self.n, self.n1, self.n2).ravel()
        diagonal.flags.writeable = False
        return diagonal


# ========================================================================= #
# PLAN                                                                      #
# ========================================================================= #


def plan_factors(n: int, r: int) -> Tuple[int, ...]:
    """
    Greedy mixed-radix split: the largest divisor <= r at every level.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got: {repr(n)}")
    if r < 2:
        raise ValueError(f"block size r must be >= 2, got: {repr(r)}")
    factors = []
    rest = n
    while rest > 1:
        for f in range(min(r, rest), 1, -1):
            if rest % f == 0:
                break
        else:
            raise InadmissibleSizeError(
                f"n={n} has a factor {rest} with no divisor <= r={r}, pad the sequence, e.g. to {next_power_of_two(n)}"
            )
        factors.append(f)
        rest //= f
    return tuple(factors)


@dataclasses.dataclass(frozen=True)
class ButterflyStage:
    permutation: StridePermutation
    block: np.ndarray  # (n1, n1)
    twiddle: TwiddleDiagonal

    @property
    def n(self) -> int:
        return self.permutation.n

    @property
    def n1(self) -> int:
        return self.permutation.n1

    @property
    def n2(self) -> int:
        return self.permutation.n2


class ButterflyPlanInfo(pydantic.BaseModel, extra="forbid"):
    n: int
    r: int
    factors: List[int]
    stage_costs: List[int]


@dataclasses.dataclass(frozen=True)
class ButterflyPlan:
    n: int
    block_size: int
    stages: Tuple[ButterflyStage, ...]

    @property
    def factors(self) -> Tuple[int, ...]:
        return tuple(stage.n1 for stage in self.stages)

    @property
    def num_stages(self) -> int:
        return len(self.stages)

    @property
    def blocks(self) -> Tuple[np.ndarray, ...]:
        # shared across heads, the leading axis broadcasts
        return tuple(stage.block[None] for stage in self.stages)

    @property
    def stage_costs(self) -> Tuple[int, ...]:
        """
        Dense complex multiply-adds of each stage, (n / r_i) * r_i^2.
        """
        return tuple((self.n // f) * f * f for f in self.factors)

    def describe(self) -> ButterflyPlanInfo:
        return ButterflyPlanInfo(
            n=self.n,
            r=self.block_size,
            factors=list(self.factors),
            stage_costs=list(self.stage_costs),
        )

    def dense(self, direction: DirectionEnum = DirectionEnum.forward) -> np.ndarray:
        return apply_plan(self, np.eye(self.n, dtype=np.complex128), direction).T


@functools.lru_cache(maxsize=128)
def build_plan(n: int, r: int) -> ButterflyPlan:
    stages = []
    level_n = n
    for f in plan_factors(n, r):
        n2 = level_n // f
        block = dense_dft_matrix(f)
        stages.append(
            ButterflyStage(
                permutation=StridePermutation(n=level_n, n1=f, n2=n2),
                block=block,
                twiddle=TwiddleDiagonal(n=level_n, n1=f, n2=n2),
            )
        )
        level_n = n2
    LOGGER.debug(f"[butterfly] built plan n={n}, r={r}, factors={[s.n1 for s in stages]}")
    return ButterflyPlan(n=n, block_size=r, stages=tuple(stages))


# ========================================================================= #
# SCAFFOLD                                                                  #
# ========================================================================= #


def _scaffold_forward(
    z: np.ndarray,
    stages: Sequence[ButterflyStage],
    blocks: Sequence[np.ndarray],
    level: int = 0,
    cache: Optional[List[np.ndarray]] = None,
) -> np.ndarray:
    # z: (L, H, M, n_level), blocks[i]: (1 or H, n1, n1)
    if level == len(stages):
        return z
    stage = stages[level]
    n, n1, n2 = stage.n, stage.n1, stage.n2
    L, H, M, _ = z.shape
    p = stage.permutation.apply(z)
    if cache is not None:
        cache.append(p)
    blk = np.swapaxes(blocks[level], -1, -2)[None, :, None]
    b = (p.reshape(L, H, M, n2, n1) @ blk).reshape(L, H, M, n)
    t = stage.permutation.inverse_apply(b) * stage.twiddle.diagonal
    c = _scaffold_forward(t.reshape(L, H, M * n1, n2), stages, blocks, level + 1, cache)
    return stage.permutation.apply(c.reshape(L, H, M, n))


def _scaffold_backward(
    g: np.ndarray,
    stages: Sequence[ButterflyStage],
    blocks: Sequence[np.ndarray],
    cache: Sequence[np.ndarray],
    grads: List[Optional[np.ndarray]],
    level: int = 0,
) -> np.ndarray:
    if level == len(stages):
        return g
    stage = stages[level]
    n, n1, n2 = stage.n, stage.n1, stage.n2
    L, H, M, _ = g.shape
    g_c = stage.permutation.inverse_apply(g)
    g_t = _scaffold_backward(
        g_c.reshape(L, H, M * n1, n2), stages, blocks, cache, grads, level + 1
    ).reshape(L, H, M, n)
    g_b = stage.permutation.apply(g_t * np.conj(stage.twiddle.diagonal))
    g_b = g_b.reshape(L, H, M, n2, n1)
    p = cache[level].reshape(L, H, M, n2, n1)
    # outer products of output adjoints with conjugated stage inputs
    grad = np.einsum("lhmqj,lhmqk->hjk", g_b, np.conj(p))
    if blocks[level].shape[0] == 1:
        grad = grad.sum(axis=0, keepdims=True)
    grads[level] = grad
    g_p = g_b @ np.conj(blocks[level])[None, :, None]
    return stage.permutation.inverse_apply(g_p.reshape(L, H, M, n))


# ========================================================================= #
# FIXED PLAN                                                                #
# ========================================================================= #


def apply_plan(
    plan: ButterflyPlan,
    x: "npt.ArrayLike",
    direction: DirectionEnum = DirectionEnum.forward,
) -> ComplexSequence:
    """
    Forward equals the unnormalised DFT along the last axis, inverse includes 1/n.
    Leading axes are treated as a batch.
    """
    x = as_complex_batch(x, name="x")
    if x.shape[-1] != plan.n:
        raise PlanSizeError(f"plan covers n={plan.n}, got length {x.shape[-1]}")
    direction = DirectionEnum(direction)
    if direction == DirectionEnum.inverse:
        # F^{-1} x = conj(F conj(x)) / n
        return np.conj(apply_plan(plan, np.conj(x), DirectionEnum.forward)) / plan.n
    z = x.reshape(-1, 1, 1, plan.n)
    y = _scaffold_forward(z, plan.stages, plan.blocks)
    return y.reshape(x.shape)


def conv_butterfly(
    u: "npt.ArrayLike",
    k: "npt.ArrayLike",
    plan: ButterflyPlan,
    mode: ConvMode = ConvMode.circular,
) -> ComplexSequence:
    """
    FFT convolution along the last axis, leading axes of u and k broadcast.
    Causal mode needs a plan over 2N, inputs are zero padded and the result truncated.
    """
    u = as_complex_batch(u, name="u")
    k = as_complex_batch(k, name="k")
    if u.shape[-1] != k.shape[-1]:
        raise IncompatibleOperandsError(
            f"convolution operands must have equal lengths, got {u.shape[-1]} and {k.shape[-1]}"
        )
    n = u.shape[-1]
    mode = ConvMode(mode)
    size = n if mode == ConvMode.circular else 2 * n
    if plan.n != size:
        raise PlanSizeError(
            f"{mode.value} convolution of length {n} needs a plan over {size}, got {plan.n}"
        )
    u_hat = apply_plan(plan, pad_to_length(u, size))
    k_hat = apply_plan(plan, pad_to_length(k, size))
    y = apply_plan(plan, u_hat * k_hat, DirectionEnum.inverse)
    return y[..., :n]


def plan_for_conv(n: int, r: int, mode: ConvMode = ConvMode.circular) -> ButterflyPlan:
    return build_plan(n if ConvMode(mode) == ConvMode.circular else 2 * n, r)


def is_admissible(n: int, r: int) -> bool:
    try:
        plan_factors(n, r)
    except InadmissibleSizeError:
        return False
    return True


def conv_transform_size(
    n: int,
    r: int,
    mode: ConvMode = ConvMode.circular,
    packed: bool = False,
) -> Tuple[int, bool]:
    """
    Transform length for a length-n convolution, and whether the circular
    result must be folded back modulo n.

    Lengths with a prime factor above r pad to the next power of two >= 2n,
    where the circular product is the linear convolution. Packed transforms
    run at half the length, so it is the half that must be admissible.
    """
    mode = ConvMode(mode)
    size = n if mode == ConvMode.circular else 2 * n
    if packed:
        ok = size % 2 == 0 and is_admissible(size // 2, r)
    else:
        ok = is_admissible(size, r)
    if ok:
        return size, False
    padded = next_power_of_two(2 * n)
    LOGGER.debug(f"[butterfly] length {size} is not admissible for r={r}, padding to {padded}")
    return padded, mode == ConvMode.circular


def fold_to_length(y: np.ndarray, n: int, fold: bool) -> np.ndarray:
    # a linear convolution of length 2n - 1 wraps onto the circular one
    if fold:
        return y[..., :n] + y[..., n : 2 * n]
    return y[..., :n]


# ========================================================================= #
# LEARNED BUTTERFLY                                                         #
# ========================================================================= #


@dataclasses.dataclass(frozen=True)
class LearnedButterfly:
    """
    The plan's permutations and twiddles with one learned r_i x r_i block per
    stage and head, shared across the n / r_i blocks of that stage.
    """

    plan: ButterflyPlan
    blocks: Tuple[np.ndarray, ...]  # stage i: (H, r_i, r_i)

    def __post_init__(self):
        if len(self.blocks) != self.plan.num_stages:
            raise IncompatibleOperandsError(
                f"expected {self.plan.num_stages} stage blocks, got {len(self.blocks)}"
            )
        blocks = []
        heads = None
        for stage, block in zip(self.plan.stages, self.blocks):
            block = np.array(block, dtype=np.complex128)
            if block.ndim != 3 or block.shape[1:] != (stage.n1, stage.n1):
                raise IncompatibleOperandsError(
                    f"stage block must have shape (H, {stage.n1}, {stage.n1}), got: {block.shape}"
                )
            if heads is None:
                heads = block.shape[0]
            elif block.shape[0] != heads:
                raise IncompatibleOperandsError("all stages must have the same number of heads")
            block.flags.writeable = False
            blocks.append(block)
        object.__setattr__(self, "blocks", tuple(blocks))

    @property
    def n(self) -> int:
        return self.plan.n

    @property
    def heads(self) -> int:
        return self.blocks[0].shape[0] if self.blocks else 1

    @property
    def num_parameters(self) -> int:
        return self.heads * sum(f * f for f in self.plan.factors)

    @classmethod
    def from_plan(cls, plan: ButterflyPlan, heads: int = 1) -> "LearnedButterfly":
        blocks = tuple(
            np.broadcast_to(stage.block, (heads, stage.n1, stage.n1)).copy()
            for stage in plan.stages
        )
        return cls(plan=plan, blocks=blocks)

    @classmethod
    def random(cls, plan: ButterflyPlan, heads: int, rng: SeededRng) -> "LearnedButterfly":
        blocks = []
        for i, stage in enumerate(plan.stages):
            shape = (heads, stage.n1, stage.n1)
            count = int(np.prod(shape))
            stream = rng.child(i)
            re = standard_normal_draws(stream, count)
            im = standard_normal_draws(stream, count)
            blocks.append(((re + 1j * im) / np.sqrt(2 * stage.n1)).reshape(shape))
        return cls(plan=plan, blocks=tuple(blocks))

    def with_blocks(self, blocks: Sequence[np.ndarray]) -> "LearnedButterfly":
        return LearnedButterfly(plan=self.plan, blocks=tuple(blocks))

    def dense(self, head: int = 0) -> np.ndarray:
        eye = np.broadcast_to(
            np.eye(self.n, dtype=np.complex128)[:, None, :], (self.n, self.heads, self.n)
        )
        return learned_forward(self, eye)[:, head, :].T


def _as_head_batch(lb: LearnedButterfly, x: np.ndarray, name: str) -> np.ndarray:
    if x.shape[-1] != lb.n:
        raise PlanSizeError(f"operator covers n={lb.n}, got length {x.shape[-1]}")
    # single-head operators take any (..., n) batch
    if lb.heads == 1:
        return x.reshape(-1, 1, 1, lb.n)
    if x.ndim == 1:
        raise IncompatibleOperandsError(
            f"{name} must have shape (..., {lb.heads}, {lb.n}) for a multi-head operator"
        )
    if x.shape[-2] != lb.heads:
        raise IncompatibleOperandsError(
            f"{name} must have shape (..., {lb.heads}, {lb.n}), got: {x.shape}"
        )
    return x.reshape(-1, lb.heads, 1, lb.n)


def learned_forward(lb: LearnedButterfly, x: "npt.ArrayLike") -> ComplexSequence:
    x = as_complex_batch(x, name="x")
    z = _as_head_batch(lb, x, "x")
    return _scaffold_forward(z, lb.plan.stages, lb.blocks).reshape(x.shape)


def learned_gradients(
    lb: LearnedButterfly,
    x: "npt.ArrayLike",
    upstream: "npt.ArrayLike",
) -> "Tuple[Tuple[np.ndarray, ...], np.ndarray]":
    """
    Adjoints of the real objective Re(sum(conj(upstream) * learned_forward(lb, x))).

    Gradients are returned as d/dRe + i d/dIm, so the input gradient is the
    conjugate transposed operator applied to `upstream`, and each block gradient
    sums outer products of stage output adjoints with conjugated stage inputs.
    """
    x = as_complex_batch(x, name="x")
    upstream = as_complex_batch(upstream, name="upstream")
    if x.shape != upstream.shape:
        raise IncompatibleOperandsError(
            f"upstream must match the input shape {x.shape}, got: {upstream.shape}"
        )
    z = _as_head_batch(lb, x, "x")
    g = _as_head_batch(lb, upstream, "upstream")
    cache: List[np.ndarray] = []
    _scaffold_forward(z, lb.plan.stages, lb.blocks, cache=cache)
    grads: List[Optional[np.ndarray]] = [None] * lb.plan.num_stages
    grad_x = _scaffold_backward(g, lb.plan.stages, lb.blocks, cache, grads)
    return tuple(grads), grad_x.reshape(x.shape)


# ========================================================================= #
# END                                                                       #
# ========================================================================= #


__all__ = (
    "InadmissibleSizeError",
    "PlanSizeError",
    "DirectionEnum",
    "ConvMode",
    "StridePermutation",
    "TwiddleDiagonal",
    "twiddle_matrix",
    "plan_factors",
    "ButterflyStage",
    "ButterflyPlanInfo",
    "ButterflyPlan",
    "build_plan",
    "apply_plan",
    "conv_butterfly",
    "plan_for_conv",
    "is_admissible",
    "conv_transform_size",
    "fold_to_length",
    "LearnedButterfly",
    "learned_forward",
    "learned_gradients",
)
