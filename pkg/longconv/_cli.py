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

import contextlib
import logging
import os
import shutil
import sys
import tempfile
from enum import Enum
from pathlib import Path
from typing import List, Optional, Sequence, TextIO, Union

import numpy as np
import pydantic
from typing_extensions import Annotated

from longconv._colors import color_status, stream_supports_color
from longconv._core.bench import bench_rows_to_csv, run_bench
from longconv._core.butterfly import ConvMode
from longconv._core.constant_recursive import ConstantRecursiveKernel, materialize
from longconv._core.cost_model import CostModelConfig
from longconv._core.regularize import (
    ConvEngine,
    InitConfig,
    InitKind,
    RegularizationConfig,
    init_kernels,
    regularize_kernels,
    regularized_long_conv,
)
from longconv._core.signal_io import (
    SignalFormatEnum,
    load_kernel_bank,
    read_signal,
    save_kernel_bank,
    write_signal,
)
from longconv._core.ssm_bridge import (
    dump_ssm_bundle,
    kernel_to_ssm,
    load_ssm_bundle,
    ssms_to_kernel,
)
from longconv._core.three_pass import DEFAULT_BLOCK_SIZE
from longconv._core.types import (
    IncompatibleOperandsError,
    KernelBank,
    SignalBatch,
)
from longconv._core.utils import load_toml_document, txt_file_dump
from longconv._core.verify import VerifySuite, run_verify

LOGGER = logging.getLogger(__name__)


THREADS_ENV_VAR = "LONGCONV_THREADS"


# ========================================================================= #
# CONFIGS                                                                   #
# ========================================================================= #


PositiveInt = Annotated[int, pydantic.Field(ge=1)]


class LongconvCfg(pydantic.BaseModel, extra="forbid"):
    """
    Defaults for the command line, loaded from `[tool.longconv]` in a
    pyproject.toml or from the top level of a .longconv.toml file.
    Explicit flags always win.
    """

    engine: ConvEngine = ConvEngine.butterfly
    mode: ConvMode = ConvMode.causal
    block_size: PositiveInt = DEFAULT_BLOCK_SIZE
    three_pass_l: Optional[PositiveInt] = None
    threads: Optional[PositiveInt] = None
    regularization: RegularizationConfig = pydantic.Field(default_factory=RegularizationConfig)
    cost_model: CostModelConfig = pydantic.Field(default_factory=CostModelConfig)

    @pydantic.field_validator("block_size")
    @classmethod
    def _validate_block_size(cls, v):
        if v < 2:
            raise ValueError(f"block_size must be >= 2, got: {repr(v)}")
        return v

    @classmethod
    def from_pyproject(cls, path: Path) -> "LongconvCfg":
        toml = load_toml_document(path)
        pyproject = _PyprojectToml.model_validate(toml.unwrap())
        return pyproject.tool.longconv

    @classmethod
    def from_toml_config(cls, path: Path) -> "LongconvCfg":
        toml = load_toml_document(path)
        return cls.model_validate(toml.unwrap())

    @classmethod
    def from_file_automatic(cls, path: "Union[str, Path]") -> "LongconvCfg":
        path = Path(path)
        if path.name == "pyproject.toml":
            return cls.from_pyproject(path)
        elif path.name == ".longconv.toml":
            return cls.from_toml_config(path)
        elif path.suffix == ".toml":
            LOGGER.warning(
                f"using config file with non-standard name: {repr(path.name)}, expected one of: 'pyproject.toml' OR '.longconv.toml'"
            )
            return cls.from_toml_config(path)
        else:
            raise ValueError(f"unsupported config file extension: {path.suffix} for: {path}")

    def with_regularization(self, **overrides) -> RegularizationConfig:
        values = self.regularization.model_dump()
        values.update({k: v for k, v in overrides.items() if v is not None})
        return RegularizationConfig.model_validate(values)

    def with_cost_model(self, **overrides) -> CostModelConfig:
        values = self.cost_model.model_dump()
        values.update({k: v for k, v in overrides.items() if v is not None})
        return CostModelConfig.model_validate(values)


class _PyprojectTomlTools(pydantic.BaseModel, extra="ignore"):
    longconv: LongconvCfg = pydantic.Field(default_factory=LongconvCfg)


class _PyprojectToml(pydantic.BaseModel, extra="ignore"):
    tool: _PyprojectTomlTools = pydantic.Field(default_factory=_PyprojectTomlTools)


def resolve_threads(threads: Optional[int] = None) -> int:
    if threads is None:
        env = os.environ.get(THREADS_ENV_VAR)
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise ValueError(f"{THREADS_ENV_VAR} must be an integer, got: {repr(env)}")
        else:
            threads = os.cpu_count() or 1
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got: {repr(threads)}")
    return threads


# ========================================================================= #
# OUTPUT HELPER                                                             #
# ========================================================================= #


def check_files_differ(
    src: "Union[str, Path]",
    dst: "Union[str, Path]",
) -> bool:
    src = Path(src)
    dst = Path(dst)
    # if src and dst do not exist, then they are the same
    src_exists = src.exists()
    dst_exists = dst.exists()
    if not src_exists and not dst_exists:
        return False
    # if only one exists, then they are different
    if src_exists != dst_exists:
        return True
    return src.read_bytes() != dst.read_bytes()


@contextlib.contextmanager
def atomic_output_ctx(file: "Union[str, Path]"):
    """
    Yield a temporary path to write to. On success every file written into
    the temporary directory, e.g. a kernel bank and its sidecar, is moved next
    to `file`. On failure nothing is moved.
    """
    final_path = Path(file)
    del file
    if not final_path.parent.is_dir():
        raise FileNotFoundError(f"output directory does not exist: {final_path.parent}")
    with tempfile.TemporaryDirectory(dir=final_path.parent) as temp_dir:
        yield Path(temp_dir) / final_path.name
        for produced in sorted(Path(temp_dir).iterdir()):
            target = final_path.parent / produced.name
            if check_files_differ(src=produced, dst=target):
                shutil.move(str(produced), str(target))
                LOGGER.info(f"[GEN] changed: {target}")
            else:
                LOGGER.info(f"[GEN] remaining the same: {target}")


def _format_for(path: "Union[str, Path]") -> SignalFormatEnum:
    return SignalFormatEnum.csv if Path(path).suffix.lower() == ".csv" else SignalFormatEnum.cseq


# ========================================================================= #
# COMMANDS                                                                  #
# ========================================================================= #


def cmd_verify(
    suite: VerifySuite = VerifySuite.all,
    max_n: int = 1024,
    json_output: bool = False,
    stream: Optional[TextIO] = None,
) -> int:
    stream = sys.stdout if stream is None else stream
    report = run_verify(suite, max_n)
    if json_output:
        stream.write(report.model_dump_json(indent=2) + "\n")
    else:
        colorize = color_status if stream_supports_color(stream) else None
        for line in report.iter_lines(colorize):
            stream.write(line + "\n")
    return 0 if report.passed else 1


def cmd_convolve(
    input_path: "Union[str, Path]",
    kernel_path: "Union[str, Path]",
    output_path: "Union[str, Path]",
    *,
    engine: ConvEngine = ConvEngine.butterfly,
    mode: ConvMode = ConvMode.causal,
    regularization: Optional[RegularizationConfig] = None,
    block_size: int = DEFAULT_BLOCK_SIZE,
    l: Optional[int] = None,
    threads: Optional[int] = None,
    training: bool = False,
) -> int:
    data, fmt = read_signal(input_path)
    bank, _ = load_kernel_bank(kernel_path)
    u = SignalBatch(data=data)
    if bank.heads != u.heads or bank.length != u.length:
        raise IncompatibleOperandsError(
            f"kernel bank {kernel_path} has shape (H={bank.heads}, N={bank.length}), input {input_path} has (H={u.heads}, N={u.length})"
        )
    y = regularized_long_conv(
        u,
        bank,
        RegularizationConfig() if regularization is None else regularization,
        engine=engine,
        mode=mode,
        training=training,
        threads=resolve_threads(threads),
        block_size=block_size,
        l=l,
    )
    with atomic_output_ctx(output_path) as temp_path:
        write_signal(temp_path, y.data, fmt=fmt)
    return 0


def cmd_bench(
    ns: Sequence[int],
    rs: Sequence[int],
    engines: Sequence[ConvEngine],
    output_path: "Union[str, Path]",
    *,
    repetitions: int = 3,
    cost_model: Optional[CostModelConfig] = None,
    seed: int = 0,
) -> int:
    rows = run_bench(ns, rs, engines, repetitions=repetitions, cfg=cost_model, seed=seed)
    with atomic_output_ctx(output_path) as temp_path:
        txt_file_dump(file=temp_path, contents=bench_rows_to_csv(rows))
    return 0


class KernelAction(str, Enum):
    init = "init"
    regularize = "regularize"
    from_ssm = "from-ssm"
    to_ssm = "to-ssm"
    from_recursive = "from-recursive"


class KernelParams(pydantic.BaseModel, extra="forbid"):
    input: Optional[str] = None
    kind: InitKind = InitKind.random
    heads: PositiveInt = 1
    n: Optional[PositiveInt] = None
    seed: int = 0
    regularization: RegularizationConfig = pydantic.Field(default_factory=RegularizationConfig)
    training: bool = False
    m: Optional[PositiveInt] = None
    seeds: Optional[List[float]] = None
    coeffs: Optional[List[float]] = None

    def require(self, *names: str):
        missing = [name for name in names if getattr(self, name) is None]
        if missing:
            raise ValueError(f"missing required parameters: {', '.join(repr(m) for m in missing)}")


def _kernel_init(params: KernelParams, temp_path: Path):
    params.require("n")
    cfg = InitConfig(kind=params.kind, heads=params.heads, length=params.n, seed=params.seed)
    save_kernel_bank(temp_path, init_kernels(cfg), fmt=_format_for(temp_path), init=cfg)


def _kernel_regularize(params: KernelParams, temp_path: Path):
    params.require("input")
    bank, meta = load_kernel_bank(params.input)
    kernels = regularize_kernels(bank.kernels, params.regularization, training=params.training)
    save_kernel_bank(
        temp_path,
        bank.with_kernels(kernels),
        fmt=_format_for(temp_path),
        init=None if meta is None else meta.init,
        regularization=params.regularization,
    )


def _kernel_to_ssm(params: KernelParams, temp_path: Path):
    params.require("input", "m")
    bank, _ = load_kernel_bank(params.input)
    heads = [kernel_to_ssm(k, params.m) for k in bank.kernels]
    txt_file_dump(file=temp_path, contents=dump_ssm_bundle(heads, bank.length, bank.skip_gain))


def _kernel_from_ssm(params: KernelParams, temp_path: Path):
    params.require("input")
    heads, length, skip_gain = load_ssm_bundle(Path(params.input).read_text())
    kernels = np.stack([ssms_to_kernel(ssms, length) for ssms in heads])
    residue = float(np.max(np.abs(kernels.imag)))
    if residue > 1e-9 * (1 + float(np.max(np.abs(kernels.real)))):
        LOGGER.warning(f"[kernel] dropping imaginary part of magnitude {residue:.3e}")
    bank = KernelBank(kernels=kernels.real, skip_gain=skip_gain)
    save_kernel_bank(temp_path, bank, fmt=_format_for(temp_path))


def _kernel_from_recursive(params: KernelParams, temp_path: Path):
    if params.input is not None:
        crk = ConstantRecursiveKernel.from_json(Path(params.input).read_text())
        if params.n is not None:
            crk = ConstantRecursiveKernel(seeds=crk.seeds, coeffs=crk.coeffs, length=params.n)
    else:
        params.require("seeds", "coeffs", "n")
        crk = ConstantRecursiveKernel(seeds=params.seeds, coeffs=params.coeffs, length=params.n)
    kernel = materialize(crk)
    bank = KernelBank(kernels=kernel.real[None, :], skip_gain=np.zeros(1))
    save_kernel_bank(temp_path, bank, fmt=_format_for(temp_path))


_KERNEL_ACTIONS = {
    KernelAction.init: _kernel_init,
    KernelAction.regularize: _kernel_regularize,
    KernelAction.to_ssm: _kernel_to_ssm,
    KernelAction.from_ssm: _kernel_from_ssm,
    KernelAction.from_recursive: _kernel_from_recursive,
}


def cmd_kernel(
    action: KernelAction,
    output_path: "Union[str, Path]",
    params: Optional[KernelParams] = None,
) -> int:
    action = KernelAction(action)
    params = KernelParams() if params is None else params
    with atomic_output_ctx(output_path) as temp_path:
        _KERNEL_ACTIONS[action](params, temp_path)
    return 0


# ========================================================================= #
# END                                                                       #
# ========================================================================= #


__all__ = (
    "THREADS_ENV_VAR",
    "LongconvCfg",
    "resolve_threads",
    "check_files_differ",
    "atomic_output_ctx",
    "cmd_verify",
    "cmd_convolve",
    "cmd_bench",
    "KernelAction",
    "KernelParams",
    "cmd_kernel",
)
