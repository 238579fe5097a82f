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

from longconv._colors import color_status
from longconv._core.bench import (
    BENCH_FIELDS,
    BenchRow,
    bench_rows_to_csv,
    run_bench,
)
from longconv._core.cost_model import CostModelConfig
from longconv._core.regularize import ConvEngine
from longconv._core.verify import VerifySuite, run_verify

# ========================================================================= #
# TESTS - VERIFY                                                            #
# ========================================================================= #


@pytest.mark.parametrize("suite", [s for s in VerifySuite if s != VerifySuite.all])
def test_verify_suites_pass(suite: VerifySuite):
    report = run_verify(suite, max_n=64)
    assert report.checks
    failed = [f"{c.name}: {c.detail}" for c in report.checks if not c.passed]
    assert not failed
    assert report.passed
    assert all(c.suite == suite.value for c in report.checks)


def test_verify_fft_names():
    names = [c.name for c in run_verify(VerifySuite.fft, max_n=16).checks]
    for prefix in ["parseval", "linearity", "convolution theorem", "inverse roundtrip"]:
        assert any(name.startswith(prefix) for name in names)


def test_verify_three_pass_lines():
    report = run_verify(VerifySuite.three_pass, max_n=64)
    lines = list(report.iter_lines())
    assert any("passes <= 3" in line for line in lines)
    assert lines[-1] == f"{len(report.checks)}/{len(report.checks)} checks passed"
    colored = list(report.iter_lines(colorize=color_status))
    assert colored[0].startswith(color_status("PASS", True))


def test_verify_all_and_errors():
    report = run_verify(VerifySuite.all, max_n=8)
    assert {c.suite for c in report.checks} == {s.value for s in VerifySuite if s != VerifySuite.all}
    with pytest.raises(ValueError):
        run_verify(VerifySuite.fft, max_n=0)
    with pytest.raises(ValueError):
        run_verify("bogus")


# ========================================================================= #
# TESTS - BENCH                                                             #
# ========================================================================= #


def test_run_bench_rows():
    engines = [ConvEngine.naive, ConvEngine.butterfly, ConvEngine.three_pass, ConvEngine.packed]
    rows = run_bench([16, 64], [2, 4], engines, repetitions=3)
    assert len(rows) == 16
    assert all(row.status == "ok" for row in rows)
    assert all(row.measured_wall_time_ns is not None and row.measured_wall_time_ns >= 0 for row in rows)
    for row in rows:
        if row.engine == ConvEngine.three_pass:
            assert row.passes == 3
            assert row.measured_passes == 3
            assert row.l * row.m == row.n
    row = next(r for r in rows if r.n == 64 and r.r == 2)
    assert row.stages == 6
    assert row.effective_flops / row.theoretical_flops == 8


def test_run_bench_skipped_rows():
    rows = run_bench([17], [4], [ConvEngine.butterfly], repetitions=3)
    assert rows[0].status.startswith("skipped: ")
    assert rows[0].measured_wall_time_ns is None
    rows = run_bench([64], [4], [ConvEngine.three_pass], cfg=CostModelConfig(sram_elements=4))
    assert rows[0].status.startswith("skipped: ")
    rows = run_bench([9], [3], [ConvEngine.packed])
    assert rows[0].status.startswith("skipped: ")


def test_run_bench_errors():
    with pytest.raises(ValueError):
        run_bench([16], [2], [ConvEngine.naive], repetitions=2)
    with pytest.raises(ValueError):
        run_bench([], [2], [ConvEngine.naive])
    with pytest.raises(pydantic.ValidationError):
        BenchRow(engine=ConvEngine.naive, n=4, r=2, b=16, repetitions=1)


def test_bench_csv():
    rows = run_bench([16], [4], [ConvEngine.butterfly, ConvEngine.packed]) + run_bench(
        [17], [4], [ConvEngine.naive]
    )
    text = bench_rows_to_csv(rows)
    lines = text.split("\n")
    assert lines[0] == ",".join(BENCH_FIELDS)
    assert "measured_wall_time_ns" in BENCH_FIELDS
    assert lines[1].startswith("butterfly,16,4,16,,,3,")
    assert lines[2].startswith("packed,16,4,16,,,3,")
    assert lines[3].startswith("naive,17,4,16,,,3,,")
    assert lines[-1] == ""
    assert len(lines) == 5
    assert np.isfinite(float(lines[1].split(",")[BENCH_FIELDS.index("theoretical_flops")]))
