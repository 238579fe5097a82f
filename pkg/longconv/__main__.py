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


import argparse
import logging
import typing
from typing import List, Optional

from longconv._cli import (
    KernelAction,
    KernelParams,
    LongconvCfg,
    cmd_bench,
    cmd_convolve,
    cmd_kernel,
    cmd_verify,
)
from longconv._core.butterfly import ConvMode
from longconv._core.regularize import ConvEngine, InitKind, SmoothDomain
from longconv._core.ssm_bridge import ConditioningError
from longconv._core.three_pass import SingularBlockError
from longconv._core.verify import VerifySuite

LOGGER = logging.getLogger(__name__)

# usage, io and validation errors, verification failures exit with 1
EXIT_USAGE = 2

# ========================================================================= #
# CLI                                                                       #
# ========================================================================= #


if typing.TYPE_CHECKING:

    class LongconvCliArgsProto(typing.Protocol):
        command: str
        config: Optional[str]
        # verify
        suite: str
        max_n: int
        json: bool
        # convolve
        input: Optional[str]
        kernel: str
        output: str
        engine: Optional[str]
        mode: Optional[str]
        lambda_: Optional[float]
        p: Optional[int]
        dropout: Optional[float]
        smooth_domain: Optional[str]
        seed: Optional[int]
        r: Optional[int]
        l: Optional[int]
        threads: Optional[int]
        training: bool
        # bench
        ns: List[int]
        rs: List[int]
        engines: List[str]
        repetitions: int
        b: Optional[int]
        w: Optional[int]
        # kernel
        action: str
        kind: str
        heads: int
        n: Optional[int]
        m: Optional[int]
        seeds: Optional[List[float]]
        coeffs: Optional[List[float]]


def _float_list(raw: str) -> List[float]:
    try:
        return [float(v) for v in raw.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got: {repr(raw)}")


def _add_regularization_args(parser: argparse.ArgumentParser):
    parser.add_argument("--lambda", dest="lambda_", type=float, default=None, help="Squash threshold.")
    parser.add_argument("--p", type=int, default=None, help="Half width of the smoothing window.")
    parser.add_argument("--dropout", type=float, default=None, help="Kernel dropout rate in [0, 1).")
    parser.add_argument(
        "--smooth-domain",
        choices=[d.value for d in SmoothDomain],
        default=None,
        help="Smooth the kernel in the time or the frequency domain.",
    )
    parser.add_argument("--seed", type=int, default=None, help="Seed of the dropout stream.")
    parser.add_argument("--training", action="store_true", help="Apply kernel dropout.")


def _parse_args(argv: Optional[List[str]] = None) -> "LongconvCliArgsProto":
    """
    Make argument parser with subcommands:
    `verify`, run the oracle suites
    `convolve`, apply the regularised long convolution to a signal file
    `bench`, time the engines and write a CSV with cost model columns
    `kernel`, generate, regularise and convert kernel banks

    Then parse the arguments and return them.
    """
    parser = argparse.ArgumentParser(
        prog="longconv",
        description="Longconv: long convolutions via butterfly FFTs and three-pass plans, with oracles and benchmarks.",
    )
    parser.add_argument(
        "--config",
        type=str,
        default=None,
        help="A pyproject.toml with [tool.longconv] or a .longconv.toml providing defaults.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    # verify
    p_verify = sub.add_parser("verify", help="Run oracle suites and print a pass/fail report.")
    p_verify.add_argument("--suite", choices=[s.value for s in VerifySuite], default=VerifySuite.all.value)
    p_verify.add_argument("--max-n", type=int, default=1024)
    p_verify.add_argument("--json", action="store_true", help="Print the report as JSON.")

    # convolve
    p_conv = sub.add_parser("convolve", help="Convolve a signal file with a kernel bank.")
    p_conv.add_argument("--input", type=str, required=True, help="CSEQ1 or CSV signal of shape (B, H, N).")
    p_conv.add_argument("--kernel", type=str, required=True, help="Kernel bank file, sidecar is optional.")
    p_conv.add_argument("--output", type=str, required=True, help="Written in the format of the input.")
    p_conv.add_argument("--engine", choices=[e.value for e in ConvEngine], default=None)
    p_conv.add_argument("--mode", choices=[m.value for m in ConvMode], default=None)
    p_conv.add_argument("--r", type=int, default=None, help="Butterfly block size.")
    p_conv.add_argument("--l", type=int, default=None, help="Three-pass row count, must divide the transform length.")
    p_conv.add_argument("--threads", type=int, default=None)
    _add_regularization_args(p_conv)

    # bench
    p_bench = sub.add_parser("bench", help="Time engines over sizes and block sizes.")
    p_bench.add_argument("--n", dest="ns", type=int, nargs="+", required=True)
    p_bench.add_argument("--r", dest="rs", type=int, nargs="+", required=True)
    p_bench.add_argument(
        "--engine",
        dest="engines",
        choices=[e.value for e in ConvEngine],
        nargs="+",
        default=[ConvEngine.butterfly.value],
    )
    p_bench.add_argument("--repetitions", type=int, default=3)
    p_bench.add_argument("--output", type=str, required=True)
    p_bench.add_argument("--b", type=int, default=None, help="Matrix unit width of the cost model.")
    p_bench.add_argument("--w", type=int, default=None, help="Working set of the cost model, in elements.")
    p_bench.add_argument("--seed", type=int, default=0)

    # kernel
    p_kernel = sub.add_parser("kernel", help="Generate, regularise and convert kernel banks.")
    p_kernel.add_argument("action", choices=[a.value for a in KernelAction])
    p_kernel.add_argument("--output", type=str, required=True)
    p_kernel.add_argument("--input", type=str, default=None)
    p_kernel.add_argument("--kind", choices=[k.value for k in InitKind], default=InitKind.random.value)
    p_kernel.add_argument("--heads", type=int, default=1)
    p_kernel.add_argument("--n", type=int, default=None)
    p_kernel.add_argument("--m", type=int, default=None, help="State size of each SSM.")
    p_kernel.add_argument("--seeds", type=_float_list, default=None, help="Recurrence seeds k_1..k_p.")
    p_kernel.add_argument("--coeffs", type=_float_list, default=None, help="Recurrence coefficients a_1..a_p.")
    _add_regularization_args(p_kernel)

    return parser.parse_args(argv)


def _run(args: "LongconvCliArgsProto") -> int:
    cfg = LongconvCfg() if args.config is None else LongconvCfg.from_file_automatic(args.config)

    if args.command == "verify":
        return cmd_verify(VerifySuite(args.suite), args.max_n, json_output=args.json)

    if args.command == "convolve":
        return cmd_convolve(
            args.input,
            args.kernel,
            args.output,
            engine=ConvEngine(args.engine or cfg.engine),
            mode=ConvMode(args.mode or cfg.mode),
            regularization=cfg.with_regularization(
                lambda_=args.lambda_,
                smooth_width=args.p,
                dropout_rate=args.dropout,
                smooth_domain=args.smooth_domain,
                seed=args.seed,
            ),
            block_size=cfg.block_size if args.r is None else args.r,
            l=cfg.three_pass_l if args.l is None else args.l,
            threads=cfg.threads if args.threads is None else args.threads,
            training=args.training,
        )

    if args.command == "bench":
        return cmd_bench(
            args.ns,
            args.rs,
            [ConvEngine(e) for e in args.engines],
            args.output,
            repetitions=args.repetitions,
            cost_model=cfg.with_cost_model(matmul_unit=args.b, sram_elements=args.w),
            seed=args.seed,
        )

    if args.command == "kernel":
        params = KernelParams(
            input=args.input,
            kind=InitKind(args.kind),
            heads=args.heads,
            n=args.n,
            seed=0 if args.seed is None else args.seed,
            regularization=cfg.with_regularization(
                lambda_=args.lambda_,
                smooth_width=args.p,
                dropout_rate=args.dropout,
                smooth_domain=args.smooth_domain,
                seed=args.seed,
            ),
            training=args.training,
            m=args.m,
            seeds=args.seeds,
            coeffs=args.coeffs,
        )
        return cmd_kernel(KernelAction(args.action), args.output, params)

    raise RuntimeError(f"[BUG] unsupported command: {repr(args.command)}")


def _cli(argv: Optional[List[str]] = None) -> int:
    # args
    args = _parse_args(argv)

    # run
    try:
        return _run(args)
    except (ValueError, OSError, SingularBlockError, ConditioningError) as e:
        LOGGER.critical(f"[longconv] {args.command} failed: {e}")
        return EXIT_USAGE


if __name__ == "__main__":
    # set default log level to info
    logging.basicConfig(level=logging.INFO)
    # run cli
    exit(_cli())


# ========================================================================= #
# END                                                                       #
# ========================================================================= #
