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

import csv
import io
import logging
import time
from typing import Callable, List, Optional, Sequence

import numpy as np
import pydantic

from longconv._core.butterfly import InadmissibleSizeError, build_plan, conv_butterfly
from longconv._core.cost_model import (
    CostModelConfig,
    PassAlgorithm,
    butterfly_flops,
    pass_counts,
)
from longconv._core.dft_reference import conv_circular_naive
from longconv._core.regularize import ConvEngine
from longconv._core.three_pass import (
    PassCounter,
    WorkingSetExceededError,
    build_three_pass,
    conv_real_packed,
    conv_three_pass,
    default_factorization,
)
from longconv._core.types import InvalidSequenceError, SeededRng, standard_normal_draws

LOGGER = logging.getLogger(__name__)


MIN_REPETITIONS = 3


# ========================================================================= #
# ROWS                                                                      #
# ========================================================================= #


class BenchRow(pydantic.BaseModel, extra="forbid"):
    engine: ConvEngine
    n: int
    r: int
    b: int
    l: Optional[int] = None
    m: Optional[int] = None
    repetitions: int
    # median over the repetitions
    measured_wall_time_ns: Optional[int] = None
    stages: Optional[int] = None
    theoretical_flops: Optional[float] = None
    effective_flops: Optional[float] = None
    passes: Optional[int] = None
    measured_passes: Optional[int] = None
    status: str = "ok"

    @pydantic.field_validator("repetitions")
    @classmethod
    def _validate_repetitions(cls, v):
        if v < MIN_REPETITIONS:
            raise ValueError(f"repetitions must be >= {MIN_REPETITIONS}, got: {repr(v)}")
        return v


BENCH_FIELDS = tuple(BenchRow.model_fields)


def bench_rows_to_csv(rows: Sequence[BenchRow]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=BENCH_FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        values = row.model_dump(mode="json")
        writer.writerow({k: ("" if v is None else v) for k, v in values.items()})
    return buffer.getvalue()


# ========================================================================= #
# SWEEP                                                                     #
# ========================================================================= #


def _median_ns(fn: Callable[[], object], repetitions: int) -> int:
    times = []
    for _ in range(repetitions):
        t0 = time.perf_counter_ns()
        fn()
        times.append(time.perf_counter_ns() - t0)
    return int(np.median(times))


def _bench_one(
    engine: ConvEngine,
    n: int,
    r: int,
    repetitions: int,
    cfg: CostModelConfig,
    rng: SeededRng,
) -> BenchRow:
    row = dict(engine=engine, n=n, r=r, b=cfg.matmul_unit, repetitions=repetitions)
    flops = butterfly_flops(n, r, cfg)
    row.update(
        stages=flops.stages,
        theoretical_flops=flops.theoretical_flops,
        effective_flops=flops.effective_flops,
    )
    draws = standard_normal_draws(rng, 4 * n)
    u = draws[0 : 2 * n : 2] + 1j * draws[1 : 2 * n : 2]
    k = draws[2 * n :: 2] + 1j * draws[2 * n + 1 :: 2]
    if engine == ConvEngine.naive:
        fn = lambda: conv_circular_naive(u, k)
    elif engine == ConvEngine.butterfly:
        plan = build_plan(n, r)
        fn = lambda: conv_butterfly(u, k, plan)
        row.update(passes=pass_counts(n, PassAlgorithm.unfused_fft, cfg))
    elif engine == ConvEngine.three_pass:
        l, m = default_factorization(n, cfg.sram_elements)
        plan = build_three_pass(k, l, m, r)
        counters = []

        def fn():
            counters.append(PassCounter(n, cfg.sram_elements))
            return conv_three_pass(plan, u, counters[-1])

        row.update(l=l, m=m, passes=pass_counts(n, PassAlgorithm.three_pass, cfg))
    elif engine == ConvEngine.packed:
        if n % 2:
            raise InvalidSequenceError(f"packed engine needs an even length, got: {n}")
        fn = lambda: conv_real_packed(u.real, k.real, r=r)
    else:
        raise RuntimeError(f"[BUG] unsupported engine: {repr(engine)}")
    row.update(measured_wall_time_ns=_median_ns(fn, repetitions))
    if engine == ConvEngine.three_pass:
        row.update(measured_passes=counters[-1].sweeps)
    return BenchRow(**row)


def run_bench(
    ns: Sequence[int],
    rs: Sequence[int],
    engines: Sequence[ConvEngine],
    repetitions: int = MIN_REPETITIONS,
    cfg: Optional[CostModelConfig] = None,
    seed: int = 0,
) -> List[BenchRow]:
    """
    Time every (engine, n, r) combination and attach the cost model columns.
    Pairs the plans cannot handle become rows with a `skipped: ...` status.
    """
    if not ns or not rs or not engines:
        raise ValueError("bench needs at least one n, one r and one engine")
    if repetitions < MIN_REPETITIONS:
        raise ValueError(f"repetitions must be >= {MIN_REPETITIONS}, got: {repr(repetitions)}")
    if cfg is None:
        cfg = CostModelConfig()
    rng = SeededRng(seed)
    rows = []
    for engine in map(ConvEngine, engines):
        for n in ns:
            for r in rs:
                try:
                    row = _bench_one(engine, n, r, repetitions, cfg, rng.child(n))
                except (InadmissibleSizeError, WorkingSetExceededError, InvalidSequenceError) as e:
                    LOGGER.warning(f"[bench] skipping engine={engine.value} n={n} r={r}: {e}")
                    row = BenchRow(
                        engine=engine,
                        n=n,
                        r=r,
                        b=cfg.matmul_unit,
                        repetitions=repetitions,
                        status=f"skipped: {e}",
                    )
                else:
                    LOGGER.info(f"[bench] engine={engine.value} n={n} r={r}: {row.measured_wall_time_ns} ns")
                rows.append(row)
    return rows


# ========================================================================= #
# END                                                                       #
# ========================================================================= #


__all__ = (
    "MIN_REPETITIONS",
    "BenchRow",
    "BENCH_FIELDS",
    "bench_rows_to_csv",
    "run_bench",
)
