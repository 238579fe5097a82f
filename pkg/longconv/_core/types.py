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
Shared numeric containers and deterministic randomness.

Sequences are plain one dimensional `numpy` arrays of `complex128`, which numpy
stores interleaved as (re, im) pairs of 64-bit floats. Functions across the
package accept anything array-like and normalise it with `as_complex_sequence`.
Batched data keeps the sequence axis last (row-major, N innermost).
"""

import dataclasses
from typing import Tuple

import numpy as np
import numpy.typing as npt

# alias used in signatures, always a 1-D complex128 array after validation
ComplexSequence = np.ndarray

# ========================================================================= #
# ERRORS                                                                    #
# ========================================================================= #


class IncompatibleOperandsError(ValueError):
    pass


class InvalidSequenceError(ValueError):
    pass


# ========================================================================= #
# SEQUENCES                                                                 #
# ========================================================================= #


def _assert_finite(x: np.ndarray, name: str) -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise InvalidSequenceError(f"{name} contains non-finite values")
    return x


def as_complex_sequence(x: "npt.ArrayLike", name: str = "sequence") -> ComplexSequence:
    arr = np.asarray(x, dtype=np.complex128)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise InvalidSequenceError(
            f"{name} must be one dimensional, got shape: {arr.shape}"
        )
    if arr.size < 1:
        raise InvalidSequenceError(f"{name} must have length >= 1")
    return _assert_finite(arr, name)


def as_complex_batch(x: "npt.ArrayLike", name: str = "sequence") -> np.ndarray:
    """
    Like `as_complex_sequence`, but allows leading batch axes.
    """
    arr = np.asarray(x, dtype=np.complex128)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.shape[-1] < 1:
        raise InvalidSequenceError(f"{name} must have length >= 1")
    return _assert_finite(arr, name)


def as_real_batch(x: "npt.ArrayLike", name: str = "sequence") -> np.ndarray:
    arr = np.asarray(x)
    if np.iscomplexobj(arr):
        raise InvalidSequenceError(f"{name} must be real valued")
    arr = arr.astype(np.float64, copy=False)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.shape[-1] < 1:
        raise InvalidSequenceError(f"{name} must have length >= 1")
    return _assert_finite(arr, name)


def max_abs_diff(a: "npt.ArrayLike", b: "npt.ArrayLike") -> float:
    """
    Largest complex modulus of `a - b`, the comparison metric for every oracle.
    """
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.shape != b.shape:
        raise IncompatibleOperandsError(
            f"cannot compare operands of shape {a.shape} and {b.shape}"
        )
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b)))


def pad_to_length(x: np.ndarray, length: int) -> np.ndarray:
    """
    Zero pad the last axis of `x` up to `length`.
    """
    n = x.shape[-1]
    if length < n:
        raise IncompatibleOperandsError(f"cannot pad length {n} down to {length}")
    if length == n:
        return x
    pad = [(0, 0)] * (x.ndim - 1) + [(0, length - n)]
    return np.pad(x, pad)


# ========================================================================= #
# CONTAINERS                                                                #
# ========================================================================= #


@dataclasses.dataclass(frozen=True)
class SignalBatch:
    data: np.ndarray  # (B, H, N) float64

    def __post_init__(self):
        data = as_real_batch(self.data, name="signal batch")
        if data.ndim != 3:
            raise InvalidSequenceError(
                f"signal batch must have shape (B, H, N), got: {data.shape}"
            )
        data = np.ascontiguousarray(data)
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def batch_size(self) -> int:
        return self.data.shape[0]

    @property
    def heads(self) -> int:
        return self.data.shape[1]

    @property
    def length(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.data.shape


@dataclasses.dataclass(frozen=True)
class KernelBank:
    kernels: np.ndarray  # (H, N) float64
    skip_gain: np.ndarray  # (H,) float64

    def __post_init__(self):
        kernels = as_real_batch(self.kernels, name="kernels")
        if kernels.ndim != 2:
            raise InvalidSequenceError(
                f"kernels must have shape (H, N), got: {kernels.shape}"
            )
        skip_gain = as_real_batch(self.skip_gain, name="skip_gain")
        if skip_gain.shape != (kernels.shape[0],):
            raise IncompatibleOperandsError(
                f"skip_gain must have shape ({kernels.shape[0]},), got: {skip_gain.shape}"
            )
        kernels = np.ascontiguousarray(kernels)
        skip_gain = np.ascontiguousarray(skip_gain)
        kernels.flags.writeable = False
        skip_gain.flags.writeable = False
        object.__setattr__(self, "kernels", kernels)
        object.__setattr__(self, "skip_gain", skip_gain)

    @property
    def heads(self) -> int:
        return self.kernels.shape[0]

    @property
    def length(self) -> int:
        return self.kernels.shape[1]

    def with_kernels(self, kernels: np.ndarray) -> "KernelBank":
        return KernelBank(kernels=kernels, skip_gain=self.skip_gain)


# ========================================================================= #
# RANDOMNESS                                                                #
# ========================================================================= #


class SeededRng:
    """
    Deterministic random stream built on numpy's counter-based Philox generator.

    A stream is identified by `(seed, *stream_path)`, child streams extend the
    path so parallel consumers (heads, tasks) never share state. Normal draws use
    Box-Muller on the uniform stream so values only depend on Philox output.
    """

    def __init__(self, seed: int, stream_path: Tuple[int, ...] = ()):
        if isinstance(seed, bool) or int(seed) != seed or not (0 <= seed < 2**64):
            raise ValueError(f"seed must be a 64-bit unsigned integer, got: {repr(seed)}")
        self._seed = int(seed)
        self._stream_path = tuple(int(s) for s in stream_path)
        sequence = np.random.SeedSequence(
            entropy=self._seed, spawn_key=self._stream_path
        )
        self._generator = np.random.Generator(np.random.Philox(sequence))

    @property
    def seed(self) -> int:
        return self._seed

    @property
    def stream_path(self) -> Tuple[int, ...]:
        return self._stream_path

    def child(self, stream_id: int) -> "SeededRng":
        return SeededRng(self._seed, self._stream_path + (int(stream_id),))

    def uniform(self, count: int) -> np.ndarray:
        """
        `count` draws from [0, 1).
        """
        return self._generator.random(count, dtype=np.float64)

    def __repr__(self):
        return f"{self.__class__.__name__}(seed={self._seed}, stream_path={self._stream_path})"


def standard_normal_draws(rng: SeededRng, count: int) -> np.ndarray:
    if isinstance(count, bool) or int(count) != count or count < 1:
        raise ValueError(f"count must be >= 1, got: {repr(count)}")
    count = int(count)
    pairs = (count + 1) // 2
    # 1 - U lies in (0, 1], keeps the log finite
    u1 = 1.0 - rng.uniform(pairs)
    u2 = rng.uniform(pairs)
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    out = np.empty(2 * pairs, dtype=np.float64)
    out[0::2] = radius * np.cos(angle)
    out[1::2] = radius * np.sin(angle)
    return out[:count]


# ========================================================================= #
# END                                                                       #
# ========================================================================= #


__all__ = (
    "ComplexSequence",
    "IncompatibleOperandsError",
    "InvalidSequenceError",
    "as_complex_sequence",
    "as_complex_batch",
    "as_real_batch",
    "max_abs_diff",
    "pad_to_length",
    "SignalBatch",
    "KernelBank",
    "SeededRng",
    "standard_normal_draws",
)
