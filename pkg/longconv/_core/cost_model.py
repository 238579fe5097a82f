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

from enum import Enum
from typing import NamedTuple

import pydantic

from longconv._core.butterfly import plan_factors
from longconv._core.three_pass import DEFAULT_WORKING_SET, WorkingSetExceededError
from longconv._core.utils import assert_positive_int

# ========================================================================= #
# CONFIG                                                                    #
# ========================================================================= #


class PassAlgorithm(str, Enum):
    fused = "fused"
    three_pass = "three_pass"
    unfused_fft = "unfused_fft"


class CostModelConfig(pydantic.BaseModel, extra="forbid"):
    # width of the hardware b x b matrix unit
    matmul_unit: int = 16
    # on-chip working set in elements
    sram_elements: int = DEFAULT_WORKING_SET
    # real flops per complex multiply-add
    counts_complex_as: float = 6.0

    @pydantic.field_validator("matmul_unit", "sram_elements")
    @classmethod
    def _validate_positive(cls, v):
        if v < 1:
            raise ValueError(f"must be >= 1, got: {repr(v)}")
        return v

    @pydantic.field_validator("counts_complex_as")
    @classmethod
    def _validate_multiplier(cls, v):
        if not v > 0:
            raise ValueError(f"counts_complex_as must be > 0, got: {repr(v)}")
        return v


# ========================================================================= #
# FLOPS                                                                     #
# ========================================================================= #


class FlopEstimate(NamedTuple):
    theoretical_flops: float
    effective_flops: float
    stages: int
    theoretical_complex_ops: int
    effective_complex_ops: int


def num_stages(n: int, r: int) -> int:
    """
    ceil(log n / log r), computed exactly on integers.
    """
    stages, reach = 0, 1
    while reach < n:
        reach *= r
        stages += 1
    return stages


def butterfly_flops(n: int, r: int, cfg: CostModelConfig = CostModelConfig()) -> FlopEstimate:
    """
    Theoretical cost n * r per stage, effective cost pads every block up to
    the b-wide matrix unit, so blocks smaller than b cost as much as b.
    """
    n = assert_positive_int(n, "n")
    # raises InadmissibleSizeError
    plan_factors(n, r)
    stages = num_stages(n, r)
    theoretical = n * r * stages
    effective = n * max(r, cfg.matmul_unit) * stages
    return FlopEstimate(
        theoretical_flops=cfg.counts_complex_as * theoretical,
        effective_flops=cfg.counts_complex_as * effective,
        stages=stages,
        theoretical_complex_ops=theoretical,
        effective_complex_ops=effective,
    )


# ========================================================================= #
# PASSES                                                                    #
# ========================================================================= #


def pass_counts(
    n: int,
    algorithm: PassAlgorithm,
    cfg: CostModelConfig = CostModelConfig(),
) -> int:
    """
    Full sweeps over the length-n buffer in main memory.

    The unfused count is a comparison model only: 3 passes plus 2 more for
    every doubling of n beyond the working set.
    """
    n = assert_positive_int(n, "n")
    algorithm = PassAlgorithm(algorithm)
    w = cfg.sram_elements
    if algorithm == PassAlgorithm.fused:
        if n > w:
            raise WorkingSetExceededError(
                f"fused convolution of n={n} exceeds working set of {w} elements"
            )
        return 1
    if algorithm == PassAlgorithm.three_pass:
        return 3
    if algorithm == PassAlgorithm.unfused_fft:
        doublings, reach = 0, w
        while reach < n:
            reach *= 2
            doublings += 1
        return 3 + 2 * doublings
    raise RuntimeError(f"[BUG] unsupported algorithm: {repr(algorithm)}")


# ========================================================================= #
# END                                                                       #
# ========================================================================= #


__all__ = (
    "PassAlgorithm",
    "CostModelConfig",
    "FlopEstimate",
    "num_stages",
    "butterfly_flops",
    "pass_counts",
)
