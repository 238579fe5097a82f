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
Signal containers on disk.

CSEQ1 (canonical): 8-byte magic `CSEQ0001`, three little-endian uint64 B, H, N,
then B*H*N little-endian float64 values, N innermost. The CSV alternative has a
`b,h,n,value` header and one row per value. Kernel banks reuse CSEQ1 with B = 1
plus a JSON sidecar (`<file>.json`) carrying skip gains and the configs that
produced the bank.
"""

import logging
import math
from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import pydantic

from longconv._core.regularize import InitConfig, RegularizationConfig
from longconv._core.types import KernelBank

LOGGER = logging.getLogger(__name__)

CSEQ_MAGIC = b"CSEQ0001"
CSEQ_HEADER_SIZE = len(CSEQ_MAGIC) + 3 * 8
CSV_HEADER = "b,h,n,value"

# ========================================================================= #
# ERRORS                                                                    #
# ========================================================================= #


class SignalFormatError(ValueError):

    def __init__(self, message: str, byte_offset: int):
        super().__init__(f"{message} (at byte offset {byte_offset})")
        self.byte_offset = byte_offset


class SignalFormatEnum(str, Enum):
    cseq = "cseq"
    csv = "csv"


# ========================================================================= #
# CSEQ1                                                                     #
# ========================================================================= #


def encode_cseq(data: np.ndarray) -> bytes:
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 3:
        raise ValueError(f"CSEQ1 stores (B, H, N) arrays, got shape: {data.shape}")
    header = np.asarray(data.shape, dtype="<u8").tobytes()
    return CSEQ_MAGIC + header + np.ascontiguousarray(data, dtype="<f8").tobytes()


def decode_cseq(raw: bytes) -> np.ndarray:
    if len(raw) < len(CSEQ_MAGIC):
        raise SignalFormatError("truncated CSEQ1 magic", byte_offset=len(raw))
    if raw[: len(CSEQ_MAGIC)] != CSEQ_MAGIC:
        raise SignalFormatError(
            f"bad magic {repr(raw[:len(CSEQ_MAGIC)])}, expected {repr(CSEQ_MAGIC)}",
            byte_offset=0,
        )
    if len(raw) < CSEQ_HEADER_SIZE:
        raise SignalFormatError("truncated CSEQ1 dimensions", byte_offset=len(raw))
    b, h, n = (
        int(v) for v in np.frombuffer(raw, dtype="<u8", count=3, offset=len(CSEQ_MAGIC))
    )
    if min(b, h, n) < 1:
        raise SignalFormatError(
            f"dimensions must be >= 1, got B={b}, H={h}, N={n}",
            byte_offset=len(CSEQ_MAGIC),
        )
    expected_end = CSEQ_HEADER_SIZE + 8 * b * h * n
    if len(raw) < expected_end:
        raise SignalFormatError(
            f"truncated payload, expected {expected_end} bytes, got {len(raw)}",
            byte_offset=len(raw),
        )
    if len(raw) > expected_end:
        raise SignalFormatError(
            f"{len(raw) - expected_end} trailing bytes after payload",
            byte_offset=expected_end,
        )
    values = np.frombuffer(raw, dtype="<f8", count=b * h * n, offset=CSEQ_HEADER_SIZE)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise SignalFormatError(
            "non-finite value in payload",
            byte_offset=CSEQ_HEADER_SIZE + 8 * int(bad[0]),
        )
    return values.astype(np.float64).reshape(b, h, n)


# ========================================================================= #
# CSV                                                                       #
# ========================================================================= #


def encode_csv(data: np.ndarray) -> str:
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 3:
        raise ValueError(f"CSV stores (B, H, N) arrays, got shape: {data.shape}")
    lines = [CSV_HEADER]
    for (b, h, n), v in np.ndenumerate(data):
        lines.append(f"{b},{h},{n},{repr(float(v))}")
    lines.append("")
    return "\n".join(lines)


def decode_csv(raw: bytes) -> np.ndarray:
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise SignalFormatError("CSV is not valid utf-8", byte_offset=e.start)
    offset = 0
    entries: List[Tuple[int, int, int, float, int]] = []
    for lineno, line in enumerate(text.split("\n")):
        line_offset = offset
        offset += len(line.encode("utf-8")) + 1
        line = line.rstrip("\r")
        if lineno == 0:
            if line.strip() != CSV_HEADER:
                raise SignalFormatError(
                    f"expected header {repr(CSV_HEADER)}, got {repr(line)}",
                    byte_offset=0,
                )
            continue
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise SignalFormatError(
                f"line {lineno + 1}: expected 4 fields, got {len(parts)}",
                byte_offset=line_offset,
            )
        try:
            b, h, n = (int(p) for p in parts[:3])
            value = float(parts[3])
        except ValueError:
            raise SignalFormatError(
                f"line {lineno + 1}: cannot parse {repr(line)}",
                byte_offset=line_offset,
            )
        if min(b, h, n) < 0 or not np.isfinite(value):
            raise SignalFormatError(
                f"line {lineno + 1}: invalid entry {repr(line)}",
                byte_offset=line_offset,
            )
        entries.append((b, h, n, value, line_offset))
    if not entries:
        raise SignalFormatError("CSV contains no values", byte_offset=len(raw))
    shape = tuple(1 + max(e[i] for e in entries) for i in range(3))
    # checked on python ints before anything of that shape is allocated
    if math.prod(shape) > len(entries):
        b, h, n, _, line_offset = max(entries, key=lambda e: (e[0] * shape[1] + e[1]) * shape[2] + e[2])
        raise SignalFormatError(
            f"missing entry: {len(entries)} values cannot fill shape {shape}, (b, h, n)={(b, h, n)} is out of range",
            byte_offset=line_offset,
        )
    data = np.zeros(shape, dtype=np.float64)
    seen = np.zeros(shape, dtype=bool)
    for b, h, n, value, line_offset in entries:
        if seen[b, h, n]:
            raise SignalFormatError(
                f"duplicate entry for b={b}, h={h}, n={n}", byte_offset=line_offset
            )
        seen[b, h, n] = True
        data[b, h, n] = value
    return data


# ========================================================================= #
# FILES                                                                     #
# ========================================================================= #


def sniff_format(path: "Union[str, Path]", raw: Optional[bytes] = None) -> SignalFormatEnum:
    path = Path(path)
    if raw is None:
        with open(path, "rb") as fp:
            raw = fp.read(len(CSEQ_MAGIC))
    if raw[: len(CSEQ_MAGIC)] == CSEQ_MAGIC:
        return SignalFormatEnum.cseq
    if path.suffix.lower() == ".csv" or raw.startswith(b"b,h,n"):
        return SignalFormatEnum.csv
    # neither, let the CSEQ1 decoder report the bad magic
    return SignalFormatEnum.cseq


def read_signal(path: "Union[str, Path]") -> "Tuple[np.ndarray, SignalFormatEnum]":
    raw = Path(path).read_bytes()
    fmt = sniff_format(path, raw=raw)
    if fmt == SignalFormatEnum.cseq:
        return decode_cseq(raw), fmt
    return decode_csv(raw), fmt


def write_signal(
    path: "Union[str, Path]",
    data: np.ndarray,
    fmt: SignalFormatEnum = SignalFormatEnum.cseq,
):
    path = Path(path)
    if fmt == SignalFormatEnum.cseq:
        path.write_bytes(encode_cseq(data))
    elif fmt == SignalFormatEnum.csv:
        with open(path, "w", newline="\n") as fp:
            fp.write(encode_csv(data))
    else:
        raise ValueError(f"unsupported signal format: {repr(fmt)}")


# ========================================================================= #
# KERNEL BANKS                                                              #
# ========================================================================= #


class KernelSidecar(pydantic.BaseModel, extra="forbid"):
    skip_gain: List[float]
    init: Optional[InitConfig] = None
    regularization: Optional[RegularizationConfig] = None


def sidecar_path(path: "Union[str, Path]") -> Path:
    path = Path(path)
    return path.with_name(f"{path.name}.json")


def save_kernel_bank(
    path: "Union[str, Path]",
    bank: KernelBank,
    *,
    fmt: SignalFormatEnum = SignalFormatEnum.cseq,
    sidecar: "Optional[Union[str, Path]]" = None,
    init: Optional[InitConfig] = None,
    regularization: Optional[RegularizationConfig] = None,
):
    write_signal(path, bank.kernels[None, :, :], fmt=fmt)
    meta = KernelSidecar(
        skip_gain=[float(g) for g in bank.skip_gain],
        init=init,
        regularization=regularization,
    )
    with open(sidecar_path(path) if sidecar is None else sidecar, "w", newline="\n") as fp:
        fp.write(meta.model_dump_json(indent=2, by_alias=True))
        fp.write("\n")


def load_kernel_bank(
    path: "Union[str, Path]",
) -> "Tuple[KernelBank, Optional[KernelSidecar]]":
    data, _ = read_signal(path)
    if data.shape[0] != 1:
        raise SignalFormatError(
            f"kernel banks are stored with B=1, got B={data.shape[0]}",
            byte_offset=len(CSEQ_MAGIC),
        )
    kernels = data[0]
    meta_path = sidecar_path(path)
    if meta_path.exists():
        meta = KernelSidecar.model_validate_json(meta_path.read_text())
        if len(meta.skip_gain) != kernels.shape[0]:
            raise ValueError(
                f"sidecar {meta_path} has {len(meta.skip_gain)} skip gains for {kernels.shape[0]} heads"
            )
        return KernelBank(kernels=kernels, skip_gain=np.asarray(meta.skip_gain)), meta
    LOGGER.info(f"[signal-io] no sidecar found for: {path}, using zero skip gains")
    return KernelBank(kernels=kernels, skip_gain=np.zeros(kernels.shape[0])), None


# ========================================================================= #
# END                                                                       #
# ========================================================================= #


__all__ = (
    "CSEQ_MAGIC",
    "SignalFormatError",
    "SignalFormatEnum",
    "encode_cseq",
    "decode_cseq",
    "encode_csv",
    "decode_csv",
    "sniff_format",
    "read_signal",
    "write_signal",
    "KernelSidecar",
    "sidecar_path",
    "save_kernel_bank",
    "load_kernel_bank",
)
