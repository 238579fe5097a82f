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

from pathlib import Path
from typing import Union

# ========================================================================= #
# ASSERTIONS                                                                #
# ========================================================================= #


def assert_positive_int(value: int, name: str) -> int:
    if isinstance(value, bool):
        raise TypeError(f"{name} must be an integer, got: {repr(value)}")
    if not isinstance(value, int):
        try:
            as_int = int(value)
        except (TypeError, ValueError):
            raise TypeError(f"{name} must be an integer, got: {repr(value)}")
        if as_int != value:
            raise TypeError(f"{name} must be an integer, got: {repr(value)}")
        value = as_int
    if value < 1:
        raise ValueError(f"{name} must be >= 1, got: {repr(value)}")
    return value


def assert_non_negative(value: float, name: str) -> float:
    if not value >= 0:
        raise ValueError(f"{name} must be >= 0, got: {repr(value)}")
    return value


def assert_divides(divisor: int, n: int, name: str = "m") -> int:
    if divisor < 1 or n % divisor != 0:
        raise ValueError(f"{name}={repr(divisor)} must divide n={repr(n)}")
    return n // divisor


# ========================================================================= #
# SIZE HELPERS                                                              #
# ========================================================================= #


def next_power_of_two(n: int) -> int:
    n = assert_positive_int(n, "n")
    return 1 << (n - 1).bit_length()


def smallest_divisor_at_least(n: int, lower: int) -> int:
    """
    The smallest divisor of `n` that is >= `lower`, `n` itself if none is smaller.
    """
    for d in range(max(1, lower), n + 1):
        if n % d == 0:
            return d
    return n


# ========================================================================= #
# LOAD                                                                      #
# ========================================================================= #


def load_toml_document(
    path: "Union[str, Path]",
) -> "tomlkit.toml_document.TOMLDocument":
    import tomlkit
    import tomlkit.toml_document

    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"path is not a file: {path}")
    with open(path) as fp:
        toml = tomlkit.load(fp)
        assert isinstance(
            toml, tomlkit.toml_document.TOMLDocument
        ), f"got {type(toml)}, not TOMLDocument"
    return toml


# ========================================================================= #
# WRITE                                                                     #
# ========================================================================= #


def txt_file_dump(
    *,
    file: "Union[str, Path]",
    contents: "str",
):
    # LF endings on every platform, reports are diffed byte-for-byte
    with open(file, "w", newline="\n") as fp:
        fp.write(contents)
        if not contents.endswith("\n"):
            fp.write("\n")


# ========================================================================= #
# END                                                                       #
# ========================================================================= #


__all__ = (
    "assert_positive_int",
    "assert_non_negative",
    "assert_divides",
    "next_power_of_two",
    "smallest_divisor_at_least",
    "load_toml_document",
    "txt_file_dump",
)
