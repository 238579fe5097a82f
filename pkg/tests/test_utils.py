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


import io
from pathlib import Path

import pytest

import longconv._colors as C
from longconv._core.utils import (
    assert_divides,
    assert_non_negative,
    assert_positive_int,
    load_toml_document,
    next_power_of_two,
    smallest_divisor_at_least,
    txt_file_dump,
)


def test_colors():
    for attr in ["RST", "lRED", "lGRN"]:
        assert hasattr(C, attr)
    assert C.color_status("PASS", True) == f"{C.lGRN}PASS{C.RST}"
    assert C.color_status("FAIL", False) == f"{C.lRED}FAIL{C.RST}"
    # string buffers are never terminals
    assert not C.stream_supports_color(io.StringIO())


def test_assert_positive_int():
    assert assert_positive_int(3, "n") == 3
    assert assert_positive_int(4.0, "n") == 4
    with pytest.raises(ValueError):
        assert_positive_int(0, "n")
    with pytest.raises(TypeError):
        assert_positive_int(2.5, "n")
    with pytest.raises(TypeError):
        assert_positive_int(True, "n")


def test_assert_non_negative_and_divides():
    assert assert_non_negative(0.0, "lambda") == 0.0
    with pytest.raises(ValueError):
        assert_non_negative(-1e-3, "lambda")
    with pytest.raises(ValueError):
        assert_non_negative(float("nan"), "lambda")
    assert assert_divides(4, 16) == 4
    with pytest.raises(ValueError):
        assert_divides(3, 16)
    with pytest.raises(ValueError):
        assert_divides(0, 16)


def test_size_helpers():
    assert next_power_of_two(1) == 1
    assert next_power_of_two(5) == 8
    assert next_power_of_two(8) == 8
    assert next_power_of_two(4097) == 8192
    assert smallest_divisor_at_least(16, 4) == 4
    assert smallest_divisor_at_least(8, 3) == 4
    assert smallest_divisor_at_least(13, 4) == 13
    assert smallest_divisor_at_least(1, 1) == 1


def test_load_and_dump(tmp_path: Path):
    path = tmp_path / "cfg.toml"
    txt_file_dump(file=path, contents='[tool.longconv]\nengine = "naive"')
    assert path.read_bytes() == b'[tool.longconv]\nengine = "naive"\n'
    doc = load_toml_document(path)
    assert doc.unwrap() == {"tool": {"longconv": {"engine": "naive"}}}
    with pytest.raises(FileNotFoundError):
        load_toml_document(tmp_path / "missing.toml")
