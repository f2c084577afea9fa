"""Wall-clock and counter benchmarks over a grid of module sizes.

Each grid point runs the full residual module for both mechanisms on
identical seeded inputs, records instrumented counters next to the
analytical estimates, and emits one CSV row per (size, mechanism). Rows
whose simulated memory need exceeds the budget are emitted with status
"OOM" instead of timings. Timing is the median of `repeats` runs after one
untimed warm-up.
"""

import statistics
import time
from dataclasses import dataclass

from .errors import BudgetError
from .mechanism import Mechanism, Normalization
from .module import AttentionConfig, init_weights, module_forward
from .resource import CostQuery, estimate, measure
from .tensor import Rng, max_relative_difference

CSV_HEADER = (
    "mechanism,norm,n,d,d_k,d_v,wall_time_ns,estimated_macc,measured_macc,"
    "estimated_peak_floats,measured_peak_floats,status,max_equiv_error"
)


@dataclass
class BenchRecord:
    mechanism: Mechanism
    norm: Normalization
    n: int
    d: int
    d_k: int
    d_v: int
    wall_time_ns: int | None
    estimated_macc: int
    measured_macc: int | None
    estimated_peak_floats: int
    measured_peak_floats: int | None
    status: str
    max_equiv_error: float | None

    def csv_row(self) -> str:
        def cell(value, fmt=None):
            if value is None:
                return ""
            return fmt.format(value) if fmt else str(value)

        return ",".join(
            [
                self.mechanism.value,
                self.norm.value,
                str(self.n),
                str(self.d),
                str(self.d_k),
                str(self.d_v),
                cell(self.wall_time_ns),
                str(self.estimated_macc),
                cell(self.measured_macc),
                str(self.estimated_peak_floats),
                cell(self.measured_peak_floats),
                self.status,
                cell(self.max_equiv_error, "{:.6e}"),
            ]
        )


def parse_size_token(token: str) -> tuple:
    """ "64x64" -> (64, 64); "28x28x4" -> (28, 28, 4); "4096" -> (4096, 1)."""
    parts = [int(p) for p in token.lower().split("x")]
    if any(p < 1 for p in parts):
        raise ValueError(f"extents must be >= 1 in {token!r}")
    if len(parts) == 1:
        return (parts[0], 1)
    if len(parts) in (2, 3):
        return tuple(parts)
    raise ValueError(f"size {token!r} must have 1, 2, or 3 extents")


def run_grid(
    spatial_sizes,
    d: int,
    norm: Normalization,
    repeats: int,
    seed: int,
    budget_bytes: int | None,
) -> list[BenchRecord]:
    """Benchmark both mechanisms at every spatial size; d_k = d/2, d_v = d."""
    if repeats < 3:
        raise ValueError(f"repeats must be >= 3 for a meaningful median, got {repeats}")
    d_k, d_v = d // 2, d
    rng = Rng(seed)
    records = []
    for spatial in spatial_sizes:
        x = rng.uniform(tuple(spatial) + (d,))
        n = x.size // d
        weights = init_weights(rng, d, d_k, d_v, scheme="uniform")
        outputs = {}
        per_size = []
        for mech in (Mechanism.EFFICIENT, Mechanism.DOT_PRODUCT):
            cfg = AttentionConfig(d_k=d_k, d_v=d_v, norm=norm, mechanism=mech)
            est = estimate(CostQuery(n=n, d=d, mechanism=mech))
            record = BenchRecord(
                mechanism=mech,
                norm=norm,
                n=n,
                d=d,
                d_k=d_k,
                d_v=d_v,
                wall_time_ns=None,
                estimated_macc=est.macc,
                measured_macc=None,
                estimated_peak_floats=est.memory_floats,
                measured_peak_floats=None,
                status="ok",
                max_equiv_error=None,
            )
            try:
                counters = measure(
                    lambda: outputs.__setitem__(
                        mech, module_forward(x, weights, cfg, budget_bytes=budget_bytes)
                    )
                )
            except BudgetError:
                record.status = "OOM"
                per_size.append(record)
                continue
            record.measured_macc = counters.total_macc
            record.measured_peak_floats = counters.peak_live_floats
            times = []
            for _ in range(repeats):
                t0 = time.perf_counter_ns()
                module_forward(x, weights, cfg, budget_bytes=budget_bytes)
                times.append(time.perf_counter_ns() - t0)
            record.wall_time_ns = int(statistics.median(times))
            per_size.append(record)
        if Mechanism.EFFICIENT in outputs and Mechanism.DOT_PRODUCT in outputs:
            gap = max_relative_difference(
                outputs[Mechanism.EFFICIENT], outputs[Mechanism.DOT_PRODUCT]
            )
            for record in per_size:
                if record.mechanism is Mechanism.EFFICIENT:
                    record.max_equiv_error = gap
        records.extend(per_size)
    return records


def write_csv(records, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        for record in records:
            fh.write(record.csv_row() + "\n")
