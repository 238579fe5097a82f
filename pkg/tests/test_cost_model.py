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


import pydantic
import pytest

from longconv._core.butterfly import InadmissibleSizeError
from longconv._core.cost_model import (
    CostModelConfig,
    PassAlgorithm,
    butterfly_flops,
    num_stages,
    pass_counts,
)
from longconv._core.three_pass import WorkingSetExceededError

# ========================================================================= #
# TESTS - FLOPS                                                             #
# ========================================================================= #


def test_num_stages():
    assert num_stages(4096, 2) == 12
    assert num_stages(4096, 16) == 3
    assert num_stages(4096, 8) == 4
    assert num_stages(1, 16) == 0
    assert num_stages(17, 16) == 2


def test_butterfly_flops_padded_blocks():
    est = butterfly_flops(4096, 2)
    assert est.stages == 12
    assert est.effective_flops / est.theoretical_flops == 8
    assert est.theoretical_flops == 6.0 * 4096 * 2 * 12


def test_butterfly_flops_full_blocks():
    est = butterfly_flops(4096, 16)
    assert est.stages == 3
    assert est.effective_flops == est.theoretical_flops
    assert est.effective_complex_ops == 4096 * 16 * 3


def test_butterfly_flops_trend():
    costs = [butterfly_flops(4096, r).effective_flops for r in (2, 4, 8, 16)]
    assert all(a > b for a, b in zip(costs, costs[1:]))


def test_butterfly_flops_large_blocks():
    ests = [butterfly_flops(4096, r) for r in (16, 32, 64)]
    assert [e.effective_complex_ops for e in ests] == [196608, 393216, 524288]
    assert all(a.effective_flops < b.effective_flops for a, b in zip(ests, ests[1:]))


def test_butterfly_flops_config():
    est = butterfly_flops(4096, 8, CostModelConfig(matmul_unit=8, counts_complex_as=1.0))
    assert est.effective_flops == est.theoretical_flops == 4096 * 8 * 4
    with pytest.raises(InadmissibleSizeError):
        butterfly_flops(17, 4)
    with pytest.raises(pydantic.ValidationError):
        CostModelConfig(matmul_unit=0)
    with pytest.raises(pydantic.ValidationError):
        CostModelConfig(counts_complex_as=0)


# ========================================================================= #
# TESTS - PASSES                                                            #
# ========================================================================= #


@pytest.mark.parametrize("n", [1, 64, 4096, 16384, 2**20])
def test_pass_counts_three_pass(n: int):
    assert pass_counts(n, PassAlgorithm.three_pass) == 3


def test_pass_counts_fused():
    assert pass_counts(4096, PassAlgorithm.fused) == 1
    assert pass_counts(8192, PassAlgorithm.fused) == 1
    with pytest.raises(WorkingSetExceededError, match="exceeds working set"):
        pass_counts(16384, PassAlgorithm.fused)
    assert pass_counts(16384, PassAlgorithm.fused, CostModelConfig(sram_elements=16384)) == 1


def test_pass_counts_unfused():
    assert pass_counts(4096, PassAlgorithm.unfused_fft) == 3
    assert pass_counts(16384, PassAlgorithm.unfused_fft) == 5
    assert pass_counts(32768, PassAlgorithm.unfused_fft) == 7
    assert pass_counts(32768, PassAlgorithm.unfused_fft) > pass_counts(32768, PassAlgorithm.three_pass)
    with pytest.raises(ValueError):
        pass_counts(64, "bogus")
