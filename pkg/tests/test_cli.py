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


import json
import logging
import sys
from pathlib import Path

import numpy as np
import pytest

from longconv.__main__ import EXIT_USAGE, _cli
from longconv._cli import (
    THREADS_ENV_VAR,
    LongconvCfg,
    atomic_output_ctx,
    check_files_differ,
    resolve_threads,
)
from longconv._core.regularize import ConvEngine
from longconv._core.signal_io import (
    SignalFormatEnum,
    encode_cseq,
    load_kernel_bank,
    read_signal,
    save_kernel_bank,
    write_signal,
)
from longconv._core.types import KernelBank, SeededRng, max_abs_diff, standard_normal_draws

# ========================================================================= #
# fixture                                                                   #
# ========================================================================= #


@pytest.fixture()
def signal_files(tmp_path: Path):
    data = standard_normal_draws(SeededRng(1), 2 * 3 * 8).reshape(2, 3, 8)
    write_signal(tmp_path / "u.cseq", data)
    write_signal(tmp_path / "u.csv", data, fmt=SignalFormatEnum.csv)
    delta = KernelBank(kernels=np.tile(np.eye(8)[0], (3, 1)), skip_gain=np.zeros(3))
    save_kernel_bank(tmp_path / "delta.cseq", delta)
    return tmp_path, data


# ========================================================================= #
# TESTS - CONFIG                                                            #
# ========================================================================= #


def test_config_files(tmp_path: Path):
    (tmp_path / "pyproject.toml").write_text(
        '[project]\nname = "x"\n\n[tool.longconv]\nengine = "naive"\nregularization = {lambda = 0.5}\n'
    )
    cfg = LongconvCfg.from_file_automatic(tmp_path / "pyproject.toml")
    assert cfg.engine == ConvEngine.naive
    assert cfg.regularization.lambda_ == 0.5
    (tmp_path / ".longconv.toml").write_text("block_size = 4\n[cost_model]\nmatmul_unit = 8\n")
    cfg = LongconvCfg.from_file_automatic(tmp_path / ".longconv.toml")
    assert cfg.block_size == 4
    assert cfg.with_cost_model(sram_elements=16).model_dump() == {
        "matmul_unit": 8,
        "sram_elements": 16,
        "counts_complex_as": 6.0,
    }
    assert cfg.with_regularization(lambda_=None, smooth_width=2).smooth_width == 2
    (tmp_path / ".longconv.yaml").write_text("")
    with pytest.raises(ValueError):
        LongconvCfg.from_file_automatic(tmp_path / ".longconv.yaml")
    (tmp_path / "bad.toml").write_text("block_size = 1\n")
    with pytest.raises(ValueError):
        LongconvCfg.from_file_automatic(tmp_path / "bad.toml")


def test_resolve_threads(monkeypatch):
    assert resolve_threads(3) == 3
    monkeypatch.setenv(THREADS_ENV_VAR, "5")
    assert resolve_threads() == 5
    monkeypatch.setenv(THREADS_ENV_VAR, "many")
    with pytest.raises(ValueError):
        resolve_threads()
    monkeypatch.delenv(THREADS_ENV_VAR)
    assert resolve_threads() >= 1
    with pytest.raises(ValueError):
        resolve_threads(0)


# ========================================================================= #
# TESTS - OUTPUT                                                            #
# ========================================================================= #


def test_atomic_output_ctx(tmp_path: Path, caplog):
    target = tmp_path / "out.txt"
    with caplog.at_level(logging.INFO):
        with atomic_output_ctx(target) as temp_path:
            assert temp_path.parent != tmp_path
            temp_path.write_text("a\n")
            Path(f"{temp_path}.json").write_text("{}\n")
    assert target.read_text() == "a\n"
    assert (tmp_path / "out.txt.json").exists()
    assert "[GEN] changed" in caplog.text
    caplog.clear()
    with caplog.at_level(logging.INFO):
        with atomic_output_ctx(target) as temp_path:
            temp_path.write_text("a\n")
    assert "[GEN] remaining the same" in caplog.text
    # failures leave the target untouched
    with pytest.raises(RuntimeError):
        with atomic_output_ctx(target) as temp_path:
            temp_path.write_text("b\n")
            raise RuntimeError("failed")
    assert target.read_text() == "a\n"
    with pytest.raises(FileNotFoundError):
        with atomic_output_ctx(tmp_path / "missing" / "out.txt"):
            pass


def test_check_files_differ(tmp_path: Path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert not check_files_differ(a, b)
    a.write_bytes(b"1")
    assert check_files_differ(a, b)
    b.write_bytes(b"1")
    assert not check_files_differ(a, b)
    b.write_bytes(b"2")
    assert check_files_differ(a, b)


# ========================================================================= #
# TESTS - VERIFY                                                            #
# ========================================================================= #


def test_cli_verify(capsys):
    assert _cli(["verify", "--suite", "fft", "--max-n", "16"]) == 0
    out = capsys.readouterr().out
    assert "parseval n=16" in out
    assert out.strip().endswith("checks passed")
    assert _cli(["verify", "--suite", "three_pass", "--max-n", "64", "--json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["suite"] == "three_pass"
    assert any(c["name"].startswith("passes <= 3") for c in report["checks"])


def test_cli_verify_bogus_suite():
    with pytest.raises(SystemExit) as e:
        _cli(["verify", "--suite", "bogus"])
    assert e.value.code == EXIT_USAGE


# ========================================================================= #
# TESTS - CONVOLVE                                                          #
# ========================================================================= #


@pytest.mark.parametrize("engine", [e.value for e in ConvEngine])
def test_cli_convolve_identity(signal_files, engine: str):
    root, data = signal_files
    out = root / "y.cseq"
    args = ["convolve", "--input", str(root / "u.cseq"), "--kernel", str(root / "delta.cseq")]
    assert _cli(args + ["--output", str(out), "--engine", engine, "--threads", "2"]) == 0
    y, fmt = read_signal(out)
    assert fmt == SignalFormatEnum.cseq
    assert max_abs_diff(y, data) < 1e-12


def test_cli_convolve_csv(signal_files):
    root, data = signal_files
    out = root / "y.csv"
    args = ["convolve", "--input", str(root / "u.csv"), "--kernel", str(root / "delta.cseq")]
    assert _cli(args + ["--output", str(out), "--mode", "circular"]) == 0
    y, fmt = read_signal(out)
    assert fmt == SignalFormatEnum.csv
    assert max_abs_diff(y, data) < 1e-12


def test_cli_convolve_config_defaults(signal_files):
    root, data = signal_files
    (root / ".longconv.toml").write_text('engine = "naive"\n[regularization]\nlambda = 10.0\n')
    args = [
        "--config", str(root / ".longconv.toml"),
        "convolve", "--input", str(root / "u.cseq"), "--kernel", str(root / "delta.cseq"),
    ]
    assert _cli(args + ["--output", str(root / "a.cseq")]) == 0
    assert np.all(read_signal(root / "a.cseq")[0] == 0)
    # explicit flags win over the config
    assert _cli(args + ["--output", str(root / "b.cseq"), "--lambda", "0"]) == 0
    assert max_abs_diff(read_signal(root / "b.cseq")[0], data) < 1e-12


def test_cli_convolve_three_pass_rows(signal_files):
    root, data = signal_files
    out = root / "y.cseq"
    args = ["convolve", "--input", str(root / "u.cseq"), "--kernel", str(root / "delta.cseq"), "--output", str(out)]
    assert _cli(args + ["--engine", "three_pass", "--l", "4"]) == 0
    assert max_abs_diff(read_signal(out)[0], data) < 1e-12
    out.unlink()
    assert _cli(args + ["--engine", "three_pass", "--l", "3"]) == EXIT_USAGE
    assert not out.exists()


@pytest.mark.parametrize("engine", ["butterfly", "three_pass", "packed"])
def test_cli_convolve_prime_length(tmp_path: Path, engine: str):
    data = standard_normal_draws(SeededRng(3), 2 * 17).reshape(1, 2, 17)
    write_signal(tmp_path / "u.cseq", data)
    delta = KernelBank(kernels=np.tile(np.eye(17)[0], (2, 1)), skip_gain=np.zeros(2))
    save_kernel_bank(tmp_path / "delta.cseq", delta)
    args = ["convolve", "--input", str(tmp_path / "u.cseq"), "--kernel", str(tmp_path / "delta.cseq")]
    assert _cli(args + ["--output", str(tmp_path / "y.cseq"), "--engine", engine]) == 0
    assert max_abs_diff(read_signal(tmp_path / "y.cseq")[0], data) < 1e-12


def test_cli_convolve_errors(signal_files):
    root, _ = signal_files
    raw = (root / "u.cseq").read_bytes()
    (root / "bad.cseq").write_bytes(raw[:-5])
    out = root / "y.cseq"
    args = ["convolve", "--kernel", str(root / "delta.cseq"), "--output", str(out)]
    assert _cli(args + ["--input", str(root / "bad.cseq")]) == EXIT_USAGE
    assert not out.exists()
    (root / "wide.cseq").write_bytes(encode_cseq(np.ones((1, 2, 8))))
    assert _cli(args + ["--input", str(root / "wide.cseq")]) == EXIT_USAGE
    assert _cli(args + ["--input", str(root / "missing.cseq")]) == EXIT_USAGE
    (root / "huge.csv").write_text("b,h,n,value\n0,0,0,1.0\n0,0,99999999999,1.0\n")
    assert _cli(args + ["--input", str(root / "huge.csv")]) == EXIT_USAGE
    assert not out.exists()


# ========================================================================= #
# TESTS - KERNEL                                                            #
# ========================================================================= #


def test_cli_kernel_init(tmp_path: Path):
    for name in ["a.cseq", "b.cseq"]:
        args = ["kernel", "init", "--output", str(tmp_path / name), "--heads", "3", "--n", "8", "--seed", "5"]
        assert _cli(args + ["--kind", "geometric"]) == 0
    assert (tmp_path / "a.cseq").read_bytes() == (tmp_path / "b.cseq").read_bytes()
    bank, meta = load_kernel_bank(tmp_path / "a.cseq")
    assert (bank.heads, bank.length) == (3, 8)
    assert meta.init.seed == 5
    assert _cli(["kernel", "init", "--output", str(tmp_path / "c.cseq")]) == EXIT_USAGE


def test_cli_kernel_regularize(tmp_path: Path):
    src, dst = str(tmp_path / "k.cseq"), str(tmp_path / "r.cseq")
    assert _cli(["kernel", "init", "--output", src, "--heads", "2", "--n", "16"]) == 0
    assert _cli(["kernel", "regularize", "--input", src, "--output", dst, "--lambda", "10"]) == 0
    bank, meta = load_kernel_bank(dst)
    original, _ = load_kernel_bank(src)
    assert np.all(bank.kernels == 0)
    assert np.array_equal(bank.skip_gain, original.skip_gain)
    assert meta.regularization.lambda_ == 10
    assert meta.init.heads == 2


def test_cli_kernel_ssm_roundtrip(tmp_path: Path):
    src, ssm, dst = str(tmp_path / "k.cseq"), str(tmp_path / "k.ssm.json"), str(tmp_path / "back.cseq")
    assert _cli(["kernel", "init", "--output", src, "--heads", "2", "--n", "8"]) == 0
    assert _cli(["kernel", "to-ssm", "--input", src, "--output", ssm, "--m", "4"]) == 0
    assert len(json.loads(Path(ssm).read_text())["heads"][0]) == 2
    assert _cli(["kernel", "from-ssm", "--input", ssm, "--output", dst]) == 0
    original, _ = load_kernel_bank(src)
    back, _ = load_kernel_bank(dst)
    assert max_abs_diff(back.kernels, original.kernels) < 1e-8
    assert np.array_equal(back.skip_gain, original.skip_gain)
    assert _cli(["kernel", "to-ssm", "--input", src, "--output", ssm, "--m", "3"]) == EXIT_USAGE


def test_cli_kernel_from_recursive(tmp_path: Path):
    out = tmp_path / "fib.cseq"
    args = ["kernel", "from-recursive", "--output", str(out), "--seeds", "1,1", "--coeffs", "1,1", "--n", "8"]
    assert _cli(args) == 0
    bank, _ = load_kernel_bank(out)
    assert np.array_equal(bank.kernels[0], [1, 1, 1, 2, 2, 3, 4, 5])
    assert _cli(["kernel", "from-recursive", "--output", str(out), "--seeds", "1"]) == EXIT_USAGE


# ========================================================================= #
# TESTS - BENCH                                                             #
# ========================================================================= #


def test_cli_bench(tmp_path: Path):
    out = tmp_path / "bench.csv"
    args = ["bench", "--n", "16", "17", "--r", "2", "4", "--engine", "butterfly", "three_pass"]
    assert _cli(args + ["--output", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("engine,n,r,b,")
    assert len(lines) == 1 + 2 * 2 * 2
    assert sum("skipped: " in line for line in lines) == 4
    assert _cli(args + ["--output", str(out), "--repetitions", "1"]) == EXIT_USAGE


# ========================================================================= #
# TESTS - MAIN                                                              #
# ========================================================================= #


def test_cli_help():
    import subprocess

    # run the help
    result = subprocess.run(
        [sys.executable, "-m", "longconv", "--help"],
        capture_output=True,
        check=False,
    )
    assert result.returncode == 0
    assert b"Longconv: long convolutions via butterfly FFTs" in result.stdout
    assert result.stderr == b""

    # run the cli without a command
    result = subprocess.run(
        [sys.executable, "-m", "longconv"], capture_output=True, check=False
    )
    assert result.returncode == 2
    assert result.stdout == b""
    assert b"arguments are required: command" in result.stderr

    # run a failing command
    result = subprocess.run(
        [sys.executable, "-m", "longconv", "verify", "--suite", "bogus"],
        capture_output=True,
        check=False,
    )
    assert result.returncode == 2
    assert b"invalid choice" in result.stderr


# ========================================================================= #
# END                                                                       #
# ========================================================================= #
