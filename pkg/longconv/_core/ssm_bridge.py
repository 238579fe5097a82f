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
Diagonal SSMs and convolution kernels.

A diagonal SSM with poles a_j and weights b_j (C folded into B, D = 0)
materialises to K_i = sum_j b_j * a_j^i for i = 0..n-1. Any length-N kernel
can be written that way by solving a Vandermonde system on N distinct
nodes, then split into N/M SSMs with state M.
"""

import dataclasses
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
import pydantic
from scipy.linalg import lu_factor, lu_solve

from longconv._core.types import (
    ComplexSequence,
    IncompatibleOperandsError,
    InvalidSequenceError,
    as_complex_sequence,
)
from longconv._core.utils import assert_divides, assert_positive_int

LOGGER = logging.getLogger(__name__)


MIN_NODE_DISTANCE = 1e-9
RESIDUAL_TOLERANCE = 1e-8
REAL_NODES_WARN_ABOVE = 16


# ========================================================================= #
# ERRORS                                                                    #
# ========================================================================= #


class ConditioningError(RuntimeError):
    pass


# ========================================================================= #
# DIAGONAL SSM                                                              #
# ========================================================================= #


class _DiagonalSsmModel(pydantic.BaseModel, extra="forbid"):
    a: List[Tuple[float, float]]
    b: List[Tuple[float, float]]


def _to_pairs(x: np.ndarray) -> List[Tuple[float, float]]:
    return [(float(v.real), float(v.imag)) for v in x]


def _from_pairs(pairs: Sequence[Tuple[float, float]]) -> np.ndarray:
    return np.array([complex(re, im) for re, im in pairs], dtype=np.complex128)


@dataclasses.dataclass(frozen=True)
class DiagonalSsm:
    a: np.ndarray  # poles, (d,)
    b: np.ndarray  # weights, (d,)

    def __post_init__(self):
        a = as_complex_sequence(self.a, name="a")
        b = as_complex_sequence(self.b, name="b")
        if a.shape != b.shape:
            raise IncompatibleOperandsError(
                f"a and b must have the same state dimension, got {a.shape[0]} and {b.shape[0]}"
            )
        a.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def state_dim(self) -> int:
        return self.a.shape[0]

    def concat(self, other: "DiagonalSsm") -> "DiagonalSsm":
        return DiagonalSsm(a=np.concatenate([self.a, other.a]), b=np.concatenate([self.b, other.b]))

    def to_json(self) -> str:
        return _DiagonalSsmModel(a=_to_pairs(self.a), b=_to_pairs(self.b)).model_dump_json()

    @classmethod
    def from_json(cls, raw: str) -> "DiagonalSsm":
        model = _DiagonalSsmModel.model_validate_json(raw)
        return cls(a=_from_pairs(model.a), b=_from_pairs(model.b))


def ssm_to_kernel(ssm: DiagonalSsm, n: int) -> ComplexSequence:
    assert_positive_int(n, "n")
    powers = np.ones((n, ssm.state_dim), dtype=np.complex128)
    if n > 1:
        powers[1:] = np.cumprod(np.broadcast_to(ssm.a, (n - 1, ssm.state_dim)), axis=0)
    return powers @ ssm.b


def ssms_to_kernel(ssms: Sequence[DiagonalSsm], n: int) -> ComplexSequence:
    if not ssms:
        raise InvalidSequenceError("at least one SSM is required")
    return np.sum([ssm_to_kernel(ssm, n) for ssm in ssms], axis=0)


# ========================================================================= #
# VANDERMONDE                                                               #
# ========================================================================= #


@dataclasses.dataclass(frozen=True)
class VandermondeSystem:
    """
    V[i, j] = nodes[j] ** i, so V @ b is the kernel of the SSM (nodes, b).
    """

    nodes: np.ndarray

    def __post_init__(self):
        nodes = as_complex_sequence(self.nodes, name="nodes")
        if nodes.shape[0] > 1:
            dist = np.abs(nodes[:, None] - nodes[None, :])
            dist[np.diag_indices_from(dist)] = np.inf
            closest = float(dist.min())
            if closest <= MIN_NODE_DISTANCE:
                raise InvalidSequenceError(
                    f"nodes must be pairwise distinct, closest pair is {closest:.3e} apart"
                )
        nodes.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)

    @property
    def n(self) -> int:
        return self.nodes.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return self.nodes[None, :] ** np.arange(self.n)[:, None]


def vandermonde_solve(sys: VandermondeSystem, rhs: "npt.ArrayLike") -> ComplexSequence:
    rhs = as_complex_sequence(rhs, name="rhs")
    if rhs.shape[0] != sys.n:
        raise IncompatibleOperandsError(f"rhs must have length {sys.n}, got: {rhs.shape[0]}")
    V = sys.matrix
    b = lu_solve(lu_factor(V), rhs)
    residual = float(np.max(np.abs(V @ b - rhs)))
    limit = RESIDUAL_TOLERANCE * (1 + float(np.max(np.abs(rhs))))
    if not np.isfinite(residual) or residual > limit:
        raise ConditioningError(
            f"Vandermonde solve on {sys.n} nodes has residual {residual:.3e} > {limit:.3e}, choose better conditioned nodes"
        )
    return b


def roots_of_unity(n: int, phase: float = 0.0) -> np.ndarray:
    """
    exp(-2*pi*i*j/n + i*phase), with phase 0 the Vandermonde matrix is the DFT matrix.
    """
    assert_positive_int(n, "n")
    return np.exp(-2j * np.pi * np.arange(n) / n + 1j * phase)


def real_nodes(n: int) -> np.ndarray:
    assert_positive_int(n, "n")
    if n > REAL_NODES_WARN_ABOVE:
        LOGGER.warning(
            f"[ssm] real nodes are badly conditioned above n={REAL_NODES_WARN_ABOVE}, got n={n}"
        )
    # chebyshev points of the first kind
    nodes = np.cos((2 * np.arange(n) + 1) * np.pi / (2 * n))
    return nodes.astype(np.complex128)


def kernel_to_ssm(
    k: "npt.ArrayLike",
    m: int,
    nodes: Optional["npt.ArrayLike"] = None,
) -> List[DiagonalSsm]:
    """
    Fit N weights on N distinct nodes, then split the (node, weight) pairs
    into N/m contiguous groups. Summing the returned SSMs gives back `k`.
    """
    k = as_complex_sequence(k, name="k")
    n = k.shape[0]
    assert_positive_int(m, "m")
    assert_divides(m, n, name="m")
    if nodes is None:
        nodes = roots_of_unity(n)
    system = VandermondeSystem(nodes=nodes)
    if system.n != n:
        raise IncompatibleOperandsError(f"expected {n} nodes, got: {system.n}")
    b = vandermonde_solve(system, k)
    return [
        DiagonalSsm(a=system.nodes[g * m : (g + 1) * m], b=b[g * m : (g + 1) * m])
        for g in range(n // m)
    ]


# ========================================================================= #
# BUNDLES                                                                   #
# ========================================================================= #


class SsmBundle(pydantic.BaseModel, extra="forbid"):
    """
    The SSMs of every head of a kernel bank, with the skip gains they replace.
    """

    length: int
    skip_gain: List[float]
    heads: List[List[_DiagonalSsmModel]]

    @pydantic.model_validator(mode="after")
    def _validate_heads(self):
        if len(self.heads) != len(self.skip_gain):
            raise ValueError(
                f"bundle has {len(self.heads)} heads but {len(self.skip_gain)} skip gains"
            )
        return self


def dump_ssm_bundle(
    heads: Sequence[Sequence[DiagonalSsm]],
    length: int,
    skip_gain: "npt.ArrayLike",
) -> str:
    bundle = SsmBundle(
        length=length,
        skip_gain=[float(g) for g in np.asarray(skip_gain, dtype=np.float64)],
        heads=[
            [_DiagonalSsmModel(a=_to_pairs(s.a), b=_to_pairs(s.b)) for s in ssms]
            for ssms in heads
        ],
    )
    return bundle.model_dump_json(indent=2)


def load_ssm_bundle(raw: str) -> "Tuple[List[List[DiagonalSsm]], int, np.ndarray]":
    bundle = SsmBundle.model_validate_json(raw)
    heads = [
        [DiagonalSsm(a=_from_pairs(s.a), b=_from_pairs(s.b)) for s in ssms]
        for ssms in bundle.heads
    ]
    return heads, bundle.length, np.asarray(bundle.skip_gain, dtype=np.float64)


# ========================================================================= #
# END                                                                       #
# ========================================================================= #


__all__ = (
    "MIN_NODE_DISTANCE",
    "RESIDUAL_TOLERANCE",
    "ConditioningError",
    "DiagonalSsm",
    "ssm_to_kernel",
    "ssms_to_kernel",
    "VandermondeSystem",
    "vandermonde_solve",
    "roots_of_unity",
    "real_nodes",
    "kernel_to_ssm",
    "SsmBundle",
    "dump_ssm_bundle",
    "load_ssm_bundle",
)
