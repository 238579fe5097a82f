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


import numpy as np
import pytest

from longconv._core.dft_reference import (
    DenseDftMatrix,
    conv_causal_naive,
    conv_circular_naive,
    dft_naive,
    idft_naive,
)
from longconv._core.types import IncompatibleOperandsError, max_abs_diff

DFT_1234 = [10, -2 + 2j, -2, -2 - 2j]

# ========================================================================= #
# TESTS - TRANSFORMS                                                        #
# ========================================================================= #


def test_dft_naive():
    assert max_abs_diff(dft_naive([3 - 1j]), [3 - 1j]) == 0
    assert max_abs_diff(dft_naive([1, 0, 0, 0]), [1, 1, 1, 1]) < 1e-15
    assert max_abs_diff(dft_naive([1, 2, 3, 4]), DFT_1234) < 1e-12


def test_idft_naive():
    assert max_abs_diff(idft_naive(dft_naive([1, 2, 3, 4])), [1, 2, 3, 4]) < 1e-12
    assert max_abs_diff(idft_naive([1, 1, 1, 1]), [1, 0, 0, 0]) < 1e-15
    assert max_abs_diff(idft_naive(DFT_1234), [1, 2, 3, 4]) < 1e-12


def test_dense_matrix():
    F = DenseDftMatrix.build(4).entries
    assert max_abs_diff(F @ np.asarray([1, 2, 3, 4]), DFT_1234) < 1e-12
    assert max_abs_diff(F, F.T) == 0
    assert max_abs_diff(F @ F.conj().T, 4 * np.eye(4)) < 1e-12
    with pytest.raises(ValueError):
        DenseDftMatrix.build(0)


def test_dft_matches_library():
    x = np.random.default_rng(0).normal(size=300) + 0j
    assert max_abs_diff(dft_naive(x), np.fft.fft(x)) < 1e-9


# ========================================================================= #
# TESTS - CONVOLUTIONS                                                      #
# ========================================================================= #


def test_conv_circular_naive():
    u = [1, 2, 3, 4]
    assert max_abs_diff(conv_circular_naive(u, [1, 0, 0, 0]), u) == 0
    assert max_abs_diff(conv_circular_naive(u, [1, 1, 0, 0]), [5, 3, 5, 7]) == 0
    assert max_abs_diff(conv_circular_naive(u, [1, 1, 1, 1]), [10, 10, 10, 10]) == 0
    with pytest.raises(IncompatibleOperandsError):
        conv_circular_naive(u, [1, 1])


def test_conv_causal_naive():
    u = [1, 2, 3, 4]
    assert max_abs_diff(conv_causal_naive(u, [1, 0, 0, 0]), u) == 0
    assert max_abs_diff(conv_causal_naive(u, [1, 1, 0, 0]), [1, 3, 5, 7]) == 0
    assert max_abs_diff(conv_causal_naive([0, 0, 0, 1], [1, 0, 0, 0]), [0, 0, 0, 1]) == 0
    with pytest.raises(IncompatibleOperandsError):
        conv_causal_naive(u, [1, 1, 1])


def test_convolution_theorem():
    rng = np.random.default_rng(1)
    u = rng.normal(size=16) + 1j * rng.normal(size=16)
    k = rng.normal(size=16) + 1j * rng.normal(size=16)
    y = idft_naive(dft_naive(u) * dft_naive(k))
    assert max_abs_diff(y, conv_circular_naive(u, k)) < 1e-12
