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
Constant-recursive kernels.

Indices inside this module are 1-based to match the recurrences

    K_{i,r} = k_{i,r}                                          1 <= i <= p
    K_{i,r} = sum_{j=1..min(p, i-p)} a_{j,r} K_{i-p-j+1, r}    i > p

and the materialised kernel is sum_r K_{i,r}. Sequences crossing the module
boundary are plain 0-based arrays, position t holds index i = t + 1.
"""

import dataclasses
import logging
from typing import List, Tuple

import numpy as np
import numpy.typing as npt
import pydantic

from longconv._core.ssm_bridge import DiagonalSsm
from longconv._core.types import (
    ComplexSequence,
    IncompatibleOperandsError,
    as_complex_batch,
    as_complex_sequence,
)
from longconv._core.utils import assert_positive_int

LOGGER = logging.getLogger(__name__)


# ========================================================================= #
# ERRORS                                                                    #
# ========================================================================= #


class RecurrenceShapeError(ValueError):
    pass


# ========================================================================= #
# KERNEL                                                                    #
# ========================================================================= #


class _ConstantRecursiveModel(pydantic.BaseModel, extra="forbid"):
    length: int
    # (re, im) pairs, shape (p, d)
    seeds: List[List[Tuple[float, float]]]
    coeffs: List[List[Tuple[float, float]]]


def _as_table(x: "npt.ArrayLike", name: str) -> np.ndarray:
    arr = as_complex_batch(x, name=name)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise RecurrenceShapeError(f"{name} must have shape (p, d), got: {arr.shape}")
    return arr


@dataclasses.dataclass(frozen=True)
class ConstantRecursiveKernel:
    seeds: np.ndarray  # (p, d), k_{i,r}
    coeffs: np.ndarray  # (p, d), a_{j,r}
    length: int

    def __post_init__(self):
        seeds = _as_table(self.seeds, "seeds")
        coeffs = _as_table(self.coeffs, "coeffs")
        if seeds.shape != coeffs.shape:
            raise RecurrenceShapeError(
                f"seeds and coeffs must have the same shape (p, d), got {seeds.shape} and {coeffs.shape}"
            )
        length = assert_positive_int(self.length, "length")
        seeds.flags.writeable = False
        coeffs.flags.writeable = False
        object.__setattr__(self, "seeds", seeds)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "length", length)

    @property
    def power(self) -> int:
        return self.seeds.shape[0]

    @property
    def dim(self) -> int:
        return self.seeds.shape[1]

    def component(self, r: int) -> "ConstantRecursiveKernel":
        if not (0 <= r < self.dim):
            raise IndexError(f"component must be in [0, {self.dim}), got: {repr(r)}")
        return ConstantRecursiveKernel(
            seeds=self.seeds[:, r : r + 1],
            coeffs=self.coeffs[:, r : r + 1],
            length=self.length,
        )

    def to_json(self) -> str:
        def pairs(x):
            return [[(float(v.real), float(v.imag)) for v in row] for row in x]

        return _ConstantRecursiveModel(
            length=self.length, seeds=pairs(self.seeds), coeffs=pairs(self.coeffs)
        ).model_dump_json()

    @classmethod
    def from_json(cls, raw: str) -> "ConstantRecursiveKernel":
        model = _ConstantRecursiveModel.model_validate_json(raw)

        def table(x):
            return np.array([[complex(re, im) for re, im in row] for row in x], dtype=np.complex128)

        return cls(seeds=table(model.seeds), coeffs=table(model.coeffs), length=model.length)


def materialize(crk: ConstantRecursiveKernel) -> ComplexSequence:
    p, n = crk.power, crk.length
    K = np.zeros((n, crk.dim), dtype=np.complex128)
    K[: min(p, n)] = crk.seeds[: min(p, n)]
    for i in range(p + 1, n + 1):
        for j in range(1, min(p, i - p) + 1):
            K[i - 1] += crk.coeffs[j - 1] * K[i - p - j]
    return K.sum(axis=1)


# ========================================================================= #
# RECURRENT EVALUATION                                                      #
# ========================================================================= #


def conv_recurrent(crk: ConstantRecursiveKernel, u: "npt.ArrayLike") -> ComplexSequence:
    """
    Causal convolution of `u` with the materialised kernel, evaluated through
    the output recurrence in O(N * p) without building the kernel:

        y_i = sum_{j=1..min(i, p)} k_j u_{i-j+1} + sum_{j=1..min(p, i-p)} a_j y_{i-p-j+1}
    """
    if crk.dim != 1:
        raise RecurrenceShapeError(
            f"recurrent evaluation needs d=1, got d={crk.dim}, use conv_recurrent_multi"
        )
    u = as_complex_sequence(u, name="u")
    n = u.shape[0]
    if n != crk.length:
        raise IncompatibleOperandsError(f"u must have length {crk.length}, got: {n}")
    p = crk.power
    k = crk.seeds[:, 0]
    a = crk.coeffs[:, 0]
    y = np.zeros(n, dtype=np.complex128)
    for i in range(1, n + 1):
        acc = 0j
        for j in range(1, min(i, p) + 1):
            acc += k[j - 1] * u[i - j]
        for j in range(1, min(p, i - p) + 1):
            acc += a[j - 1] * y[i - p - j]
        y[i - 1] = acc
    return y


def conv_recurrent_multi(crk: ConstantRecursiveKernel, u: "npt.ArrayLike") -> ComplexSequence:
    # per-component passes summed in component order
    out = np.zeros(crk.length, dtype=np.complex128)
    for r in range(crk.dim):
        out += conv_recurrent(crk.component(r), u)
    return out


# ========================================================================= #
# COMPANION & SSM                                                           #
# ========================================================================= #


def companion_matrix(a: "npt.ArrayLike") -> np.ndarray:
    """
    Ones on the superdiagonal, the coefficients in the last row.
    """
    a = as_complex_sequence(a, name="a")
    p = a.shape[0]
    A = np.eye(p, k=1, dtype=np.complex128)
    A[-1, :] = a
    return A


def companion_kernel(a: "npt.ArrayLike", k: "npt.ArrayLike", n: int) -> ComplexSequence:
    A = companion_matrix(a)
    state = as_complex_sequence(k, name="k")
    if state.shape[0] != A.shape[0]:
        raise RecurrenceShapeError(
            f"seeds and coefficients must both have length p, got {state.shape[0]} and {A.shape[0]}"
        )
    assert_positive_int(n, "n")
    out = np.empty(n, dtype=np.complex128)
    for i in range(n):
        # C = e_1
        out[i] = state[0]
        state = A @ state
    return out


def s4d_case(crk: ConstantRecursiveKernel) -> DiagonalSsm:
    if crk.power != 1:
        raise RecurrenceShapeError(f"only p=1 kernels are diagonal SSMs, got p={crk.power}")
    return DiagonalSsm(a=crk.coeffs[0], b=crk.seeds[0])


# ========================================================================= #
# END                                                                       #
# ========================================================================= #


__all__ = (
    "RecurrenceShapeError",
    "ConstantRecursiveKernel",
    "materialize",
    "conv_recurrent",
    "conv_recurrent_multi",
    "companion_matrix",
    "companion_kernel",
    "s4d_case",
)
