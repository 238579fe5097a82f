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
Direct, O(N^2) reference transforms and convolutions.

Every fast path in the package is accepted only by agreement with this module.
Convention: forward DFT is unnormalised with kernel exp(-2*pi*i*j*k/N), the
inverse carries the 1/N factor. Indices run from 0.
"""

import dataclasses

import numpy as np
import numpy.typing as npt

from longconv._core.types import (
    ComplexSequence,
    IncompatibleOperandsError,
    as_complex_sequence,
)

# rows of the dense matrix materialised at once, bounds memory at large n
_ROW_CHUNK = 256

# ========================================================================= #
# DENSE DFT MATRIX                                                          #
# ========================================================================= #


def _dft_rows(n: int, start: int, stop: int, sign: float) -> np.ndarray:
    j = np.arange(start, stop, dtype=np.int64)[:, None]
    k = np.arange(n, dtype=np.int64)[None, :]
    # reduce jk mod n before scaling, keeps the angle small and exact
    return np.exp(sign * 2j * np.pi * ((j * k) % n) / n)


@dataclasses.dataclass(frozen=True)
class DenseDftMatrix:
    n: int
    entries: np.ndarray

    @classmethod
    def build(cls, n: int) -> "DenseDftMatrix":
        if n < 1:
            raise ValueError(f"n must be >= 1, got: {repr(n)}")
        entries = _dft_rows(n, 0, n, sign=-1.0)
        entries.flags.writeable = False
        return cls(n=n, entries=entries)


def dense_dft_matrix(n: int) -> np.ndarray:
    return DenseDftMatrix.build(n).entries


# ========================================================================= #
# TRANSFORMS                                                                #
# ========================================================================= #


def _dft_direct(x: np.ndarray, sign: float) -> np.ndarray:
    n = x.shape[0]
    y = np.empty(n, dtype=np.complex128)
    for start in range(0, n, _ROW_CHUNK):
        stop = min(start + _ROW_CHUNK, n)
        y[start:stop] = _dft_rows(n, start, stop, sign) @ x
    return y


def dft_naive(x: "npt.ArrayLike") -> ComplexSequence:
    x = as_complex_sequence(x, name="x")
    return _dft_direct(x, sign=-1.0)


def idft_naive(x: "npt.ArrayLike") -> ComplexSequence:
    x = as_complex_sequence(x, name="x")
    return _dft_direct(x, sign=+1.0) / x.shape[0]


# ========================================================================= #
# CONVOLUTIONS                                                              #
# ========================================================================= #


def _check_pair(u: "npt.ArrayLike", k: "npt.ArrayLike"):
    u = as_complex_sequence(u, name="u")
    k = as_complex_sequence(k, name="k")
    if u.shape != k.shape:
        raise IncompatibleOperandsError(
            f"convolution operands must have equal lengths, got {u.shape[0]} and {k.shape[0]}"
        )
    return u, k


def conv_circular_naive(u: "npt.ArrayLike", k: "npt.ArrayLike") -> ComplexSequence:
    """
    y_i = sum_j u_j * k_{(i - j) mod N}
    """
    u, k = _check_pair(u, k)
    y = np.zeros_like(u)
    for j in range(u.shape[0]):
        y += u[j] * np.roll(k, j)
    return y


def conv_causal_naive(u: "npt.ArrayLike", k: "npt.ArrayLike") -> ComplexSequence:
    """
    y_i = sum_{j <= i} k_j * u_{i - j}
    """
    u, k = _check_pair(u, k)
    n = u.shape[0]
    y = np.zeros_like(u)
    for j in range(n):
        y[j:] += k[j] * u[: n - j]
    return y


# ========================================================================= #
# END                                                                       #
# ========================================================================= #


__all__ = (
    "DenseDftMatrix",
    "dense_dft_matrix",
    "dft_naive",
    "idft_naive",
    "conv_circular_naive",
    "conv_causal_naive",
)
