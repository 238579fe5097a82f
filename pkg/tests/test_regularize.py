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
import pydantic
import pytest

from longconv._core.butterfly import ConvMode
from longconv._core.dft_reference import idft_naive
from longconv._core.regularize import (
    ConvEngine,
    InitConfig,
    InitKind,
    RegularizationConfig,
    SmoothDomain,
    geometric_envelope,
    init_kernels,
    kernel_dropout,
    regularize_kernels,
    regularized_long_conv,
    smooth,
    smooth_frequency,
    squash,
)
from longconv._core.three_pass import FactorizationError
from longconv._core.types import (
    IncompatibleOperandsError,
    KernelBank,
    SeededRng,
    SignalBatch,
    max_abs_diff,
    standard_normal_draws,
)

# ========================================================================= #
# fixture                                                                   #
# ========================================================================= #


@pytest.fixture()
def layer_inputs():
    rng = SeededRng(17)
    u = SignalBatch(data=standard_normal_draws(rng.child(0), 2 * 3 * 8).reshape(2, 3, 8))
    bank = KernelBank(
        kernels=standard_normal_draws(rng.child(1), 3 * 8).reshape(3, 8),
        skip_gain=standard_normal_draws(rng.child(2), 3),
    )
    return u, bank


# ========================================================================= #
# TESTS - CONFIG                                                            #
# ========================================================================= #


def test_regularization_config():
    cfg = RegularizationConfig.model_validate({"lambda": 0.5, "smooth_width": 2})
    assert cfg.lambda_ == 0.5
    assert cfg.smooth_domain == SmoothDomain.time
    assert RegularizationConfig(lambda_=0.5, smooth_width=2) == cfg
    for bad in [{"lambda": -1}, {"smooth_width": -1}, {"dropout_rate": 1.0}, {"seed": -1}, {"unknown": 1}]:
        with pytest.raises(pydantic.ValidationError):
            RegularizationConfig.model_validate(bad)


def test_init_config():
    assert InitConfig(heads=2, length=8).kind == InitKind.random
    with pytest.raises(pydantic.ValidationError):
        InitConfig(heads=0, length=8)


# ========================================================================= #
# TESTS - OPERATORS                                                         #
# ========================================================================= #


def test_squash():
    k = np.asarray([0.5, -0.3, 0.1])
    assert np.array_equal(squash(k, 0.0), k)
    assert max_abs_diff(squash(k, 0.2), [0.3, -0.1, 0.0]) < 1e-15
    assert np.all(squash(k, 0.5) == 0)
    with pytest.raises(ValueError):
        squash(k, -0.1)
    with pytest.raises(ValueError, match="lambda must be >= 0"):
        squash(k, float("nan"))


def test_smooth():
    k = standard_normal_draws(SeededRng(1), 16)
    assert max_abs_diff(smooth(k, 0), k) < 1e-15
    assert max_abs_diff(smooth([1.0, 1.0, 1.0], 1), [2 / 3, 1.0, 2 / 3]) < 1e-15
    y = smooth(np.full(10, 3.5), 2)
    assert max_abs_diff(y[2:-2], np.full(6, 3.5)) < 1e-15
    with pytest.raises(ValueError):
        smooth(k, -1)


def test_smooth_frequency():
    k = standard_normal_draws(SeededRng(2), 64)
    assert max_abs_diff(smooth_frequency(k, 0), k) < 1e-12
    delta = np.eye(8)[0]
    # the spectrum of a delta is flat, so smoothing leaves it unchanged
    assert max_abs_diff(smooth_frequency(delta, 1), idft_naive(np.ones(8))) < 1e-12
    spectrum = np.fft.fft(k)
    smoothed = sum(np.roll(spectrum, s) for s in range(-2, 3)) / 5
    assert np.abs(np.fft.ifft(smoothed).imag).max() < 1e-10
    assert max_abs_diff(smooth_frequency(k, 2), np.fft.ifft(smoothed).real) < 1e-12


def test_kernel_dropout():
    k = standard_normal_draws(SeededRng(3), 32)
    assert np.array_equal(kernel_dropout(k, 0.0, SeededRng(0), training=True), k)
    assert np.array_equal(kernel_dropout(k, 0.9, SeededRng(0), training=False), k)
    with pytest.raises(ValueError):
        kernel_dropout(k, 1.0, SeededRng(0), training=True)


def test_kernel_dropout_statistics():
    k = 1.0 + SeededRng(4).uniform(10000)
    y = kernel_dropout(k, 0.5, SeededRng(21), training=True)
    dropped = y == 0
    assert abs(dropped.mean() - 0.5) < 0.02
    assert max_abs_diff(y[~dropped], 2 * k[~dropped]) < 1e-12
    assert abs(y.mean() - k.mean()) < 0.05


def test_kernel_dropout_heads_differ():
    k = np.ones((2, 64))
    y = kernel_dropout(k, 0.5, SeededRng(5), training=True)
    assert not np.array_equal(y[0], y[1])
    assert np.array_equal(y, kernel_dropout(k, 0.5, SeededRng(5), training=True))


def test_regularize_kernels_order():
    k = standard_normal_draws(SeededRng(6), 2 * 16).reshape(2, 16)
    cfg = RegularizationConfig(lambda_=0.2, smooth_width=1, dropout_rate=0.25, seed=9)
    expected = squash(smooth(kernel_dropout(k, 0.25, SeededRng(9), training=True), 1), 0.2)
    assert np.array_equal(regularize_kernels(k, cfg, training=True), expected)
    # inference skips dropout
    expected = squash(smooth(k, 1), 0.2)
    assert np.array_equal(regularize_kernels(k, cfg, training=False), expected)


# ========================================================================= #
# TESTS - INIT                                                              #
# ========================================================================= #


def test_geometric_envelope():
    assert np.all(geometric_envelope(4, 16, np.arange(4), 0) == 1.0)
    assert geometric_envelope(4, 16, 4, 16) == pytest.approx(np.exp(-2.0))
    assert geometric_envelope(6, 10, 6, 10) == pytest.approx(np.exp(-3.0))


def test_init_kernels():
    cfg = InitConfig(heads=8, length=4096, seed=3)
    bank = init_kernels(cfg)
    assert (bank.heads, bank.length) == (8, 4096)
    assert np.array_equal(bank.kernels, init_kernels(cfg).kernels)
    assert abs(bank.kernels.mean()) < 0.02
    assert abs(bank.kernels.var() - 1) < 0.05
    geo = init_kernels(InitConfig(kind=InitKind.geometric, heads=8, length=4096, seed=3))
    envelope = geometric_envelope(8, 4096, np.arange(8)[:, None], np.arange(4096)[None, :])
    assert max_abs_diff(geo.kernels, bank.kernels * envelope) < 1e-15
    assert np.array_equal(geo.skip_gain, bank.skip_gain)


# ========================================================================= #
# TESTS - LAYER                                                             #
# ========================================================================= #


@pytest.mark.parametrize("engine", list(ConvEngine))
@pytest.mark.parametrize("mode", list(ConvMode))
def test_layer_identity(layer_inputs, engine: ConvEngine, mode: ConvMode):
    u, _ = layer_inputs
    bank = KernelBank(kernels=np.tile(np.eye(8)[0], (3, 1)), skip_gain=np.zeros(3))
    y = regularized_long_conv(u, bank, RegularizationConfig(), engine=engine, mode=mode)
    assert max_abs_diff(y.data, u.data) < 1e-12


def test_layer_skip_only(layer_inputs):
    u, bank = layer_inputs
    cfg = RegularizationConfig(lambda_=1e6)
    y = regularized_long_conv(u, bank, cfg)
    assert max_abs_diff(y.data, bank.skip_gain[None, :, None] * u.data) < 1e-12


@pytest.mark.parametrize("engine", [ConvEngine.butterfly, ConvEngine.three_pass, ConvEngine.packed])
@pytest.mark.parametrize("mode", list(ConvMode))
@pytest.mark.parametrize("domain", list(SmoothDomain))
def test_layer_engines_agree(layer_inputs, engine: ConvEngine, mode: ConvMode, domain: SmoothDomain):
    u, bank = layer_inputs
    cfg = RegularizationConfig(lambda_=0.1, smooth_width=1, smooth_domain=domain)
    base = regularized_long_conv(u, bank, cfg, engine=ConvEngine.naive, mode=mode)
    y = regularized_long_conv(u, bank, cfg, engine=engine, mode=mode, threads=2)
    assert max_abs_diff(y.data, base.data) < 1e-9


@pytest.mark.parametrize("n", [17, 19, 34])
@pytest.mark.parametrize("engine", [ConvEngine.butterfly, ConvEngine.three_pass, ConvEngine.packed])
@pytest.mark.parametrize("mode", list(ConvMode))
def test_layer_engines_agree_prime_lengths(n: int, engine: ConvEngine, mode: ConvMode):
    rng = SeededRng(n)
    u = SignalBatch(data=standard_normal_draws(rng.child(0), 2 * 2 * n).reshape(2, 2, n))
    bank = KernelBank(
        kernels=standard_normal_draws(rng.child(1), 2 * n).reshape(2, n),
        skip_gain=standard_normal_draws(rng.child(2), 2),
    )
    cfg = RegularizationConfig(lambda_=0.1)
    base = regularized_long_conv(u, bank, cfg, engine=ConvEngine.naive, mode=mode)
    y = regularized_long_conv(u, bank, cfg, engine=engine, mode=mode)
    assert y.shape == (2, 2, n)
    assert max_abs_diff(y.data, base.data) < 1e-9


@pytest.mark.parametrize("l", [2, 4])
@pytest.mark.parametrize("mode", list(ConvMode))
def test_layer_three_pass_rows(layer_inputs, l: int, mode: ConvMode):
    u, bank = layer_inputs
    cfg = RegularizationConfig(lambda_=0.1)
    base = regularized_long_conv(u, bank, cfg, engine=ConvEngine.naive, mode=mode)
    y = regularized_long_conv(u, bank, cfg, engine=ConvEngine.three_pass, mode=mode, l=l)
    assert max_abs_diff(y.data, base.data) < 1e-9


def test_layer_three_pass_rows_must_divide(layer_inputs):
    u, bank = layer_inputs
    with pytest.raises(FactorizationError, match="l=3"):
        regularized_long_conv(u, bank, RegularizationConfig(), engine=ConvEngine.three_pass, l=3)


def test_layer_training_is_seeded(layer_inputs):
    u, bank = layer_inputs
    cfg = RegularizationConfig(dropout_rate=0.5, seed=4)
    a = regularized_long_conv(u, bank, cfg, training=True)
    b = regularized_long_conv(u, bank, cfg, training=True)
    c = regularized_long_conv(u, bank, cfg, training=False)
    assert np.array_equal(a.data, b.data)
    assert not np.array_equal(a.data, c.data)


def test_layer_shape_mismatch(layer_inputs):
    u, bank = layer_inputs
    small = KernelBank(kernels=bank.kernels[:2], skip_gain=bank.skip_gain[:2])
    with pytest.raises(IncompatibleOperandsError):
        regularized_long_conv(u, small, RegularizationConfig())
