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
from enum import Enum
from typing import Callable, Dict, Iterator, List, Optional, Tuple

import numpy as np
import pydantic
import scipy.fft

from longconv._core.butterfly import (
    ConvMode,
    DirectionEnum,
    LearnedButterfly,
    apply_plan,
    build_plan,
    conv_butterfly,
    learned_forward,
    learned_gradients,
    plan_for_conv,
)
from longconv._core.constant_recursive import (
    ConstantRecursiveKernel,
    companion_kernel,
    companion_matrix,
    conv_recurrent,
    materialize,
    s4d_case,
)
from longconv._core.cost_model import PassAlgorithm, pass_counts
from longconv._core.dft_reference import (
    conv_causal_naive,
    conv_circular_naive,
    dft_naive,
    idft_naive,
)
from longconv._core.regularize import (
    ConvEngine,
    RegularizationConfig,
    SmoothDomain,
    regularized_long_conv,
    smooth,
    smooth_frequency,
    squash,
)
from longconv._core.ssm_bridge import (
    DiagonalSsm,
    kernel_to_ssm,
    roots_of_unity,
    ssm_to_kernel,
    ssms_to_kernel,
)
from longconv._core.three_pass import (
    DEFAULT_WORKING_SET,
    BlockDiagonalButterfly,
    PassCounter,
    build_three_pass,
    conv_real_packed,
    conv_three_pass,
    default_factorization,
)
from longconv._core.types import (
    KernelBank,
    SeededRng,
    SignalBatch,
    max_abs_diff,
    standard_normal_draws,
)

LOGGER = logging.getLogger(__name__)


# ========================================================================= #
# REPORT                                                                    #
# ========================================================================= #


class VerifySuite(str, Enum):
    all = "all"
    fft = "fft"
    butterfly = "butterfly"
    three_pass = "three_pass"
    regularize = "regularize"
    ssm = "ssm"
    recursive = "recursive"


class CheckResult(pydantic.BaseModel, extra="forbid"):
    suite: str
    name: str
    passed: bool
    detail: str


class VerifyReport(pydantic.BaseModel, extra="forbid"):
    suite: str
    max_n: int
    checks: List[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def num_failed(self) -> int:
        return sum(not c.passed for c in self.checks)

    def iter_lines(self, colorize: Optional[Callable[[str, bool], str]] = None) -> Iterator[str]:
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            if colorize is not None:
                status = colorize(status, c.passed)
            yield f"{status} [{c.suite}] {c.name}: {c.detail}"
        yield f"{len(self.checks) - self.num_failed}/{len(self.checks)} checks passed"


class _Recorder:
    def __init__(self, suite: VerifySuite):
        self.suite = suite
        self.checks: List[CheckResult] = []

    def error(self, name: str, err: float, limit: float):
        self.checks.append(
            CheckResult(
                suite=self.suite.value,
                name=name,
                passed=bool(np.isfinite(err) and err <= limit),
                detail=f"err={err:.3e} limit={limit:.3e}",
            )
        )

    def holds(self, name: str, cond: bool, detail: str):
        self.checks.append(
            CheckResult(suite=self.suite.value, name=name, passed=bool(cond), detail=detail)
        )


# ========================================================================= #
# HELPERS                                                                   #
# ========================================================================= #


def complex_draws(rng: SeededRng, n: int) -> np.ndarray:
    x = standard_normal_draws(rng, 2 * n)
    return x[0::2] + 1j * x[1::2]


def _sup(x: np.ndarray) -> float:
    return float(np.max(np.abs(x)))


def conv_tolerance(scale: float, n: int, u: np.ndarray, k: np.ndarray) -> float:
    return scale * np.sqrt(n) * (1 + _sup(u)) * (1 + _sup(k))


def _sizes(candidates: Tuple[int, ...], max_n: int) -> List[int]:
    return [n for n in candidates if n <= max_n]


def learned_gradient_error(
    lb: LearnedButterfly,
    x: np.ndarray,
    upstream: np.ndarray,
    step: float = 1e-5,
) -> float:
    """
    Largest relative error of the analytic gradients against central finite
    differences of Re(sum(conj(upstream) * learned_forward(lb, x))).
    """

    def loss(op: LearnedButterfly, xx: np.ndarray) -> float:
        return float(np.real(np.sum(np.conj(upstream) * learned_forward(op, xx))))

    grads, grad_x = learned_gradients(lb, x, upstream)
    numeric, analytic = [], []
    for s, block in enumerate(lb.blocks):
        for idx in np.ndindex(*block.shape):
            parts = []
            for direction in (1.0, 1j):
                blocks = [b.copy() for b in lb.blocks]
                blocks[s][idx] += direction * step
                plus = loss(lb.with_blocks(blocks), x)
                blocks[s][idx] -= 2 * direction * step
                minus = loss(lb.with_blocks(blocks), x)
                parts.append((plus - minus) / (2 * step))
            numeric.append(parts[0] + 1j * parts[1])
            analytic.append(grads[s][idx])
    for idx in np.ndindex(*x.shape):
        parts = []
        for direction in (1.0, 1j):
            xp = x.copy()
            xp[idx] += direction * step
            plus = loss(lb, xp)
            xp[idx] -= 2 * direction * step
            minus = loss(lb, xp)
            parts.append((plus - minus) / (2 * step))
        numeric.append(parts[0] + 1j * parts[1])
        analytic.append(grad_x[idx])
    numeric = np.array(numeric)
    analytic = np.array(analytic)
    return float(np.max(np.abs(numeric - analytic)) / max(_sup(analytic), 1e-300))


# ========================================================================= #
# SUITES                                                                    #
# ========================================================================= #


def _suite_fft(max_n: int) -> List[CheckResult]:
    rec = _Recorder(VerifySuite.fft)
    rng = SeededRng(101)
    for n in _sizes((1, 2, 4, 8, 16, 64, 256, 1024), max_n):
        x, y, k = (complex_draws(rng.child(n * 10 + i), n) for i in range(3))
        fx = dft_naive(x)
        rel = abs(np.sum(np.abs(fx) ** 2) - n * np.sum(np.abs(x) ** 2)) / (n * np.sum(np.abs(x) ** 2))
        rec.error(f"parseval n={n}", rel, 1e-10)
        alpha, beta = 0.7 - 0.2j, -1.3 + 0.4j
        lhs = dft_naive(alpha * x + beta * y)
        rhs = alpha * fx + beta * dft_naive(y)
        rec.error(f"linearity n={n}", max_abs_diff(lhs, rhs), 1e-10 * np.sqrt(n) * (1 + _sup(lhs)))
        rec.error(f"inverse roundtrip n={n}", max_abs_diff(idft_naive(fx), x), 1e-10)
        theorem = idft_naive(fx * dft_naive(k))
        rec.error(
            f"convolution theorem n={n}",
            max_abs_diff(theorem, conv_circular_naive(x, k)),
            conv_tolerance(1e-10, n, x, k),
        )
    return rec.checks


def _suite_butterfly(max_n: int) -> List[CheckResult]:
    rec = _Recorder(VerifySuite.butterfly)
    rng = SeededRng(202)
    for n in _sizes((4, 8, 16, 64, 256, 1024, 4096), max_n):
        x = complex_draws(rng.child(n), n)
        fx = dft_naive(x)
        pairs = []
        for i in range(10):
            u = complex_draws(rng.child(n * 100 + 2 * i), n)
            k = complex_draws(rng.child(n * 100 + 2 * i + 1), n)
            naive = {ConvMode.circular: conv_circular_naive(u, k), ConvMode.causal: conv_causal_naive(u, k)}
            pairs.append((u, k, naive))
        reference = None
        for r in (2, 4, 8, 16, 32):
            plan = build_plan(n, r)
            fwd = apply_plan(plan, x)
            rec.error(f"factorization n={n} r={r}", max_abs_diff(fwd, fx), 1e-9 * np.sqrt(n) * (1 + _sup(x)))
            rec.error(f"inverse roundtrip n={n} r={r}", max_abs_diff(apply_plan(plan, fwd, DirectionEnum.inverse), x), 1e-10)
            energy = np.sum(np.abs(x) ** 2)
            rec.error(f"unitarity n={n} r={r}", abs(np.sum(np.abs(fwd) ** 2) - n * energy) / (n * energy), 1e-9)
            for mode in ConvMode:
                conv_plan = plan_for_conv(n, r, mode)
                # worst error relative to tolerance over all pairs
                worst = 0.0
                for u, k, naive in pairs:
                    y = conv_butterfly(u, k, conv_plan, mode)
                    worst = max(worst, max_abs_diff(y, naive[mode]) / conv_tolerance(1e-9, n, u, k))
                rec.error(f"conv {mode.value} n={n} r={r} pairs={len(pairs)}", worst, 1.0)
            u, k, _ = pairs[0]
            y = conv_butterfly(u, k, plan, ConvMode.circular)
            if reference is None:
                reference = y
            rec.error(f"block size invariance n={n} r={r}", max_abs_diff(y, reference), 2e-9 * np.sqrt(n) * (1 + _sup(reference)))
    # learned operator
    for n, r in _sizes_pairs(((8, 2), (16, 4), (32, 4)), max_n):
        plan = build_plan(n, r)
        lb = LearnedButterfly.from_plan(plan)
        xs = complex_draws(rng.child(1000 + n), 100 * n).reshape(100, n)
        rec.error(f"learned init equals plan n={n} r={r}", max_abs_diff(learned_forward(lb, xs), apply_plan(plan, xs)), 1e-12)
        lr = LearnedButterfly.random(plan, 1, rng.child(2000 + n))
        a, b = complex_draws(rng.child(3000 + n), n), complex_draws(rng.child(4000 + n), n)
        _, adj = learned_gradients(lr, a, b)
        lhs = np.vdot(b, learned_forward(lr, a))
        rhs = np.vdot(adj, a)
        rec.error(f"adjoint identity n={n} r={r}", abs(lhs - rhs) / max(abs(lhs), 1e-300), 1e-10)
        rec.error(f"gradient finite differences n={n} r={r}", learned_gradient_error(lr, a, b), 1e-6)
    return rec.checks


def _sizes_pairs(pairs, max_n: int):
    return [(n, r) for n, r in pairs if n <= max_n]


def _factorizations(n: int) -> List[Tuple[int, int]]:
    l, m = default_factorization(n)
    out = [(l, m)]
    # a single run has to fit the working set
    if n <= DEFAULT_WORKING_SET:
        out.append((n, 1))
    if m != l:
        out.append((m, l))
    return out


def _suite_three_pass(max_n: int) -> List[CheckResult]:
    rec = _Recorder(VerifySuite.three_pass)
    rng = SeededRng(303)
    for n in _sizes((8, 16, 64, 256, 1024, 4096, 16384), max_n):
        u, k = complex_draws(rng.child(n), n), complex_draws(rng.child(n + 1), n)
        if n <= 4096:
            expected, scale = conv_circular_naive(u, k), 1e-9
        else:
            expected, scale = conv_butterfly(u, k, build_plan(n, 16)), 2e-9
        for l, m in _factorizations(n):
            plan = build_three_pass(k, l, m)
            counter = PassCounter(n)
            y = conv_three_pass(plan, u, counter)
            name = f"n={n} l={l} m={m}"
            rec.error(f"conv {name}", max_abs_diff(y, expected), conv_tolerance(scale, n, u, k))
            rec.holds(f"passes <= 3 {name}", counter.sweeps <= 3, f"sweeps={counter.sweeps} phases={counter.phases}")
            rec.holds(
                f"cost model agrees {name}",
                counter.sweeps == pass_counts(n, PassAlgorithm.three_pass),
                f"measured={counter.sweeps} model={pass_counts(n, PassAlgorithm.three_pass)}",
            )
            if m > 1:
                reordered = conv_three_pass(plan, u, block_order=list(range(m))[::-1])
                rec.holds(f"block order independence {name}", np.array_equal(y, reordered), "bit-identical")
            if n <= 256:
                b = BlockDiagonalButterfly.build(n, l)
                eye = np.eye(n)
                rec.error(f"inverse blocks {name}", max_abs_diff(b.dense() @ b.dense(inverse=True), eye), 1e-10)
        ur = np.real(u)
        kr = np.real(k)
        for mode in ConvMode:
            y = conv_real_packed(ur, kr, mode)
            fn = conv_circular_naive if mode == ConvMode.circular else conv_causal_naive
            rec.error(f"real packing {mode.value} n={n}", max_abs_diff(y, fn(ur, kr)), conv_tolerance(1e-9, n, ur, kr))
    return rec.checks


def _suite_regularize(max_n: int) -> List[CheckResult]:
    rec = _Recorder(VerifySuite.regularize)
    rng = SeededRng(404)
    # proximal map, brute force over a grid
    w = 2 * standard_normal_draws(rng.child(0), 100)
    lam = 2 * rng.child(1).uniform(100)
    grid = np.arange(-12.0, 12.0, 1e-4)
    worst = 0.0
    for wi, li in zip(w, lam):
        best = grid[np.argmin(li * np.abs(grid) + 0.5 * (grid - wi) ** 2)]
        worst = max(worst, abs(best - squash(wi, li)[0]))
    rec.error("squash is the l1 proximal step", worst, 1e-4)
    a, b = standard_normal_draws(rng.child(2), 64), standard_normal_draws(rng.child(3), 64)
    expansion = _sup(squash(a, 0.3) - squash(b, 0.3)) - _sup(a - b)
    rec.holds("squash is non-expansive", expansion <= 1e-15, f"excess={expansion:.3e}")
    rec.error("smooth window", max_abs_diff(smooth([1.0, 1.0, 1.0], 1), [2 / 3, 1.0, 2 / 3]), 1e-15)
    kf = standard_normal_draws(rng.child(4), 64)
    spectrum = scipy.fft.fft(kf)
    size = 5
    smoothed = sum(np.roll(spectrum, s) for s in range(-2, 3)) / size
    rec.error("frequency smooth is real", _sup(scipy.fft.ifft(smoothed).imag), 1e-10)
    rec.error("frequency smooth matches", max_abs_diff(smooth_frequency(kf, 2), scipy.fft.ifft(smoothed).real), 1e-12)
    # engines, 17 pads every engine
    for n in [min(8, max_n)] + [n for n in (17,) if n <= max_n]:
        u = SignalBatch(data=standard_normal_draws(rng.child(5 + 10 * n), 2 * 3 * n).reshape(2, 3, n))
        bank = KernelBank(
            kernels=standard_normal_draws(rng.child(6 + 10 * n), 3 * n).reshape(3, n),
            skip_gain=standard_normal_draws(rng.child(7 + 10 * n), 3),
        )
        for domain in SmoothDomain:
            cfg = RegularizationConfig(lambda_=0.1, smooth_width=1, smooth_domain=domain, seed=17)
            for mode in ConvMode:
                base = regularized_long_conv(u, bank, cfg, ConvEngine.naive, mode)
                for engine in (ConvEngine.butterfly, ConvEngine.three_pass, ConvEngine.packed):
                    y = regularized_long_conv(u, bank, cfg, engine, mode)
                    rec.error(
                        f"engine {engine.value} {mode.value} {domain.value} n={n}",
                        max_abs_diff(y.data, base.data),
                        1e-9,
                    )
    return rec.checks


def _suite_ssm(max_n: int) -> List[CheckResult]:
    rec = _Recorder(VerifySuite.ssm)
    rng = SeededRng(505)
    for n in _sizes((4, 8, 16, 32, 64), max_n):
        for m in (d for d in range(1, n + 1) if n % d == 0):
            worst = 0.0
            for i in range(10):
                k = complex_draws(rng.child(n * 1000 + m * 10 + i), n)
                rebuilt = ssms_to_kernel(kernel_to_ssm(k, m), n)
                worst = max(worst, max_abs_diff(rebuilt, k) / _sup(k))
            rec.error(f"roundtrip n={n} m={m}", worst, 1e-7)
        k = complex_draws(rng.child(n), n)
        shifted = ssms_to_kernel(kernel_to_ssm(k, n, nodes=roots_of_unity(n, phase=0.1)), n)
        rec.error(f"node set invariance n={n}", max_abs_diff(shifted, ssms_to_kernel(kernel_to_ssm(k, n), n)), 1e-7 * _sup(k))
    s1 = DiagonalSsm(a=0.9 * np.exp(2j * np.pi * rng.child(1).uniform(3)), b=complex_draws(rng.child(2), 3))
    s2 = DiagonalSsm(a=0.9 * np.exp(2j * np.pi * rng.child(3).uniform(2)), b=complex_draws(rng.child(4), 2))
    n = 32
    rec.error("superposition", max_abs_diff(ssm_to_kernel(s1.concat(s2), n), ssm_to_kernel(s1, n) + ssm_to_kernel(s2, n)), 1e-12)
    return rec.checks


def random_recursive_kernel(rng: SeededRng, p: int, d: int, n: int) -> ConstantRecursiveKernel:
    seeds = complex_draws(rng.child(0), p * d).reshape(p, d)
    # keeps the recurrence from blowing up over long kernels
    coeffs = (0.3 / p) * complex_draws(rng.child(1), p * d).reshape(p, d)
    return ConstantRecursiveKernel(seeds=seeds, coeffs=coeffs, length=n)


def _suite_recursive(max_n: int) -> List[CheckResult]:
    rec = _Recorder(VerifySuite.recursive)
    rng = SeededRng(606)
    for p in (1, 2, 3, 5):
        for n in _sizes((8, 16, 32, 64, 128, 256), max_n):
            worst = 0.0
            for seed in range(10):
                stream = rng.child(p * 100000 + n * 100 + seed)
                crk = random_recursive_kernel(stream, p, 1, n)
                u = complex_draws(stream.child(2), n)
                k = materialize(crk)
                err = max_abs_diff(conv_recurrent(crk, u), conv_causal_naive(u, k))
                worst = max(worst, err / conv_tolerance(1e-9, n, u, k))
            rec.error(f"recurrent output p={p} n={n}", worst, 1.0)
        a = (0.3 / p) * complex_draws(rng.child(p), p)
        seeds = complex_draws(rng.child(p + 10), p)
        A = companion_matrix(a)
        dense = np.array([(np.linalg.matrix_power(A, i) @ seeds)[0] for i in range(20)])
        rec.error(f"companion p={p}", max_abs_diff(companion_kernel(a, seeds, 20), dense), 1e-10)
    crk = random_recursive_kernel(rng.child(12), 1, 3, 32)
    rec.error("s4d case", max_abs_diff(ssm_to_kernel(s4d_case(crk), 32), materialize(crk)), 1e-12)
    return rec.checks


_SUITES: Dict[VerifySuite, Callable[[int], List[CheckResult]]] = {
    VerifySuite.fft: _suite_fft,
    VerifySuite.butterfly: _suite_butterfly,
    VerifySuite.three_pass: _suite_three_pass,
    VerifySuite.regularize: _suite_regularize,
    VerifySuite.ssm: _suite_ssm,
    VerifySuite.recursive: _suite_recursive,
}


def run_verify(suite: VerifySuite = VerifySuite.all, max_n: int = 1024) -> VerifyReport:
    suite = VerifySuite(suite)
    if max_n < 1:
        raise ValueError(f"max_n must be >= 1, got: {repr(max_n)}")
    names = list(_SUITES) if suite == VerifySuite.all else [suite]
    checks = []
    for name in names:
        LOGGER.info(f"[verify] running suite: {name.value} (max_n={max_n})")
        checks.extend(_SUITES[name](max_n))
    return VerifyReport(suite=suite.value, max_n=max_n, checks=checks)


# ========================================================================= #
# END                                                                       #
# ========================================================================= #


__all__ = (
    "VerifySuite",
    "CheckResult",
    "VerifyReport",
    "complex_draws",
    "conv_tolerance",
    "learned_gradient_error",
    "random_recursive_kernel",
    "run_verify",
)
