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

import logging
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from typing import Optional

import numpy as np
import numpy.typing as npt
import pydantic
import scipy.fft
from scipy.ndimage import uniform_filter1d

from longconv._core.butterfly import (
    ConvMode,
    build_plan,
    conv_butterfly,
    conv_transform_size,
    fold_to_length,
)
from longconv._core.dft_reference import conv_causal_naive, conv_circular_naive
from longconv._core.three_pass import (
    DEFAULT_BLOCK_SIZE,
    FactorizationError,
    build_three_pass,
    conv_real_packed,
    conv_three_pass,
    default_factorization,
)
from longconv._core.types import (
    IncompatibleOperandsError,
    KernelBank,
    SeededRng,
    SignalBatch,
    as_real_batch,
    pad_to_length,
    standard_normal_draws,
)
from longconv._core.utils import assert_non_negative

LOGGER = logging.getLogger(__name__)


# ========================================================================= #
# CONFIG                                                                    #
# ========================================================================= #


class ConvEngine(str, Enum):
    naive = "naive"
    butterfly = "butterfly"
    three_pass = "three_pass"
    packed = "packed"


class InitKind(str, Enum):
    random = "random"
    geometric = "geometric"


class SmoothDomain(str, Enum):
    time = "time"
    frequency = "frequency"


class RegularizationConfig(pydantic.BaseModel, extra="forbid", populate_by_name=True):
    # squash threshold
    lambda_: float = pydantic.Field(default=0.0, alias="lambda")
    # half width of the averaging window
    smooth_width: int = 0
    dropout_rate: float = 0.0
    smooth_domain: SmoothDomain = SmoothDomain.time
    seed: int = 0

    @pydantic.field_validator("lambda_")
    @classmethod
    def _validate_lambda(cls, v):
        if v < 0:
            raise ValueError(f"lambda must be >= 0, got: {repr(v)}")
        return v

    @pydantic.field_validator("smooth_width")
    @classmethod
    def _validate_smooth_width(cls, v):
        if v < 0:
            raise ValueError(f"smooth_width must be >= 0, got: {repr(v)}")
        return v

    @pydantic.field_validator("dropout_rate")
    @classmethod
    def _validate_dropout_rate(cls, v):
        if not (0.0 <= v < 1.0):
            raise ValueError(f"dropout_rate must be in [0, 1), got: {repr(v)}")
        return v

    @pydantic.field_validator("seed")
    @classmethod
    def _validate_seed(cls, v):
        if not (0 <= v < 2**64):
            raise ValueError(f"seed must be a 64-bit unsigned integer, got: {repr(v)}")
        return v


class InitConfig(pydantic.BaseModel, extra="forbid"):
    kind: InitKind = InitKind.random
    heads: int
    length: int
    seed: int = 0

    @pydantic.field_validator("heads", "length")
    @classmethod
    def _validate_positive(cls, v):
        if v < 1:
            raise ValueError(f"heads and length must be >= 1, got: {repr(v)}")
        return v


# ========================================================================= #
# OPERATORS                                                                 #
# ========================================================================= #


def squash(k: "npt.ArrayLike", lambda_: float) -> np.ndarray:
    """
    Soft threshold, sign(k) * max(|k| - lambda, 0), the L1 proximal step.
    """
    lambda_ = assert_non_negative(lambda_, "lambda")
    k = as_real_batch(k, name="k")
    return np.sign(k) * np.maximum(np.abs(k) - lambda_, 0.0)


def smooth(k: "npt.ArrayLike", p: int) -> np.ndarray:
    """
    Mean over the centered window of width 2p+1 along the last axis,
    neighbours outside the kernel count as zero.
    """
    p = assert_non_negative(p, "smooth width")
    k = as_real_batch(k, name="k")
    return uniform_filter1d(k, size=2 * p + 1, axis=-1, mode="constant", cval=0.0)


def smooth_frequency(k: "npt.ArrayLike", p: int) -> np.ndarray:
    p = assert_non_negative(p, "smooth width")
    k = as_real_batch(k, name="k")
    spectrum = scipy.fft.fft(k, axis=-1)
    # the spectrum is periodic, wrapping keeps it conjugate symmetric
    size = 2 * p + 1
    re = uniform_filter1d(spectrum.real, size=size, axis=-1, mode="wrap")
    im = uniform_filter1d(spectrum.imag, size=size, axis=-1, mode="wrap")
    return scipy.fft.ifft(re + 1j * im, axis=-1).real


def kernel_dropout(
    k: "npt.ArrayLike",
    rate: float,
    rng: SeededRng,
    training: bool,
) -> np.ndarray:
    """
    Inverted dropout over (H, N) or (N,) kernels, head h draws from `rng.child(h)`.
    """
    if not (0.0 <= rate < 1.0):
        raise ValueError(f"dropout rate must be in [0, 1), got: {repr(rate)}")
    k = as_real_batch(k, name="k")
    if not training or rate == 0.0:
        return k
    heads = k.reshape(-1, k.shape[-1])
    out = np.empty_like(heads)
    for h, row in enumerate(heads):
        keep = rng.child(h).uniform(row.shape[0]) >= rate
        out[h] = np.where(keep, row / (1.0 - rate), 0.0)
    return out.reshape(k.shape)


def regularize_kernels(
    kernels: "npt.ArrayLike",
    cfg: RegularizationConfig,
    training: bool = False,
) -> np.ndarray:
    k = kernel_dropout(kernels, cfg.dropout_rate, SeededRng(cfg.seed), training)
    if cfg.smooth_domain == SmoothDomain.frequency:
        k = smooth_frequency(k, cfg.smooth_width)
    else:
        k = smooth(k, cfg.smooth_width)
    return squash(k, cfg.lambda_)


# ========================================================================= #
# INITIALISATION                                                            #
# ========================================================================= #


def geometric_envelope(
    heads: int,
    length: int,
    h: "npt.ArrayLike",
    k: "npt.ArrayLike",
) -> np.ndarray:
    h = np.asarray(h, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    return np.exp(-(k / length) * (heads / 2) ** (h / heads))


def init_kernels(cfg: InitConfig) -> KernelBank:
    rng = SeededRng(cfg.seed)
    x = standard_normal_draws(rng.child(0), cfg.heads * cfg.length)
    kernels = x.reshape(cfg.heads, cfg.length)
    if cfg.kind == InitKind.geometric:
        kernels = kernels * geometric_envelope(
            cfg.heads,
            cfg.length,
            np.arange(cfg.heads)[:, None],
            np.arange(cfg.length)[None, :],
        )
    skip_gain = standard_normal_draws(rng.child(1), cfg.heads)
    LOGGER.debug(f"[init] {cfg.kind.value} bank with H={cfg.heads}, N={cfg.length}, seed={cfg.seed}")
    return KernelBank(kernels=kernels, skip_gain=skip_gain)


# ========================================================================= #
# LAYER                                                                     #
# ========================================================================= #


def _conv_naive(u: np.ndarray, k: np.ndarray, mode: ConvMode) -> np.ndarray:
    fn = conv_circular_naive if mode == ConvMode.circular else conv_causal_naive
    B, H, N = u.shape
    y = np.empty((B, H, N), dtype=np.float64)
    for b in range(B):
        for h in range(H):
            y[b, h] = fn(u[b, h], k[h]).real
    return y


def _conv_three_pass(
    u: np.ndarray,
    k: np.ndarray,
    mode: ConvMode,
    block_size: int,
    threads: Optional[int],
    l: Optional[int] = None,
) -> np.ndarray:
    B, H, N = u.shape
    if l is None:
        size, fold = conv_transform_size(N, block_size, mode)
        l, m = default_factorization(size)
    else:
        size, fold = (N if mode == ConvMode.circular else 2 * N), False
    if l < 1 or size % l != 0:
        raise FactorizationError(f"l={l} must divide the transform length {size}")
    m = size // l
    plans = [build_three_pass(pad_to_length(k[h], size), l, m, block_size) for h in range(H)]

    def task(pair):
        b, h = pair
        return fold_to_length(conv_three_pass(plans[h], pad_to_length(u[b, h], size)), N, fold).real

    pairs = [(b, h) for b in range(B) for h in range(H)]
    if threads is not None and threads > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(task, pairs))
    else:
        results = [task(pair) for pair in pairs]
    return np.stack(results).reshape(B, H, N)


def regularized_long_conv(
    u: SignalBatch,
    bank: KernelBank,
    cfg: RegularizationConfig,
    engine: ConvEngine = ConvEngine.butterfly,
    mode: ConvMode = ConvMode.causal,
    training: bool = False,
    threads: Optional[int] = None,
    block_size: int = DEFAULT_BLOCK_SIZE,
    l: Optional[int] = None,
) -> SignalBatch:
    """
    Regularised long convolution layer.

    Kernels go through dropout, smooth and squash, then every (batch, head)
    pair is convolved with its head's kernel and the per-head skip gain adds
    `skip_gain[h] * u[b, h]`. The engine only changes how the convolution is
    computed, `l` only applies to the three-pass engine and defaults to
    the smallest divisor of the transform length that is at least its root.
    """
    if bank.heads != u.heads or bank.length != u.length:
        raise IncompatibleOperandsError(
            f"kernel bank of shape {bank.kernels.shape} does not match signals of shape {u.shape}"
        )
    engine = ConvEngine(engine)
    mode = ConvMode(mode)
    k = regularize_kernels(bank.kernels, cfg, training=training)
    x = u.data
    if engine == ConvEngine.naive:
        y = _conv_naive(x, k, mode)
    elif engine == ConvEngine.butterfly:
        size, fold = conv_transform_size(u.length, block_size, mode)
        plan = build_plan(size, block_size)
        y = conv_butterfly(pad_to_length(x, size), pad_to_length(k, size)[None], plan).real
        y = fold_to_length(y, u.length, fold)
    elif engine == ConvEngine.three_pass:
        y = _conv_three_pass(x, k, mode, block_size, threads, l=l)
    elif engine == ConvEngine.packed:
        size, fold = conv_transform_size(u.length, block_size, mode, packed=True)
        y = conv_real_packed(pad_to_length(x, size), pad_to_length(k, size)[None], ConvMode.circular, block_size)
        y = fold_to_length(y, u.length, fold)
    else:
        raise RuntimeError(f"[BUG] unsupported engine: {repr(engine)}")
    y = y + bank.skip_gain[None, :, None] * x
    return SignalBatch(data=y)


# ========================================================================= #
# END                                                                       #
# ========================================================================= #


__all__ = (
    "ConvEngine",
    "InitKind",
    "SmoothDomain",
    "RegularizationConfig",
    "InitConfig",
    "squash",
    "smooth",
    "smooth_frequency",
    "kernel_dropout",
    "regularize_kernels",
    "geometric_envelope",
    "init_kernels",
    "regularized_long_conv",
)
