"""Analytical memory/computation model plus runtime instrumentation hooks.

The closed forms assume the common sizing d_v = d, d_k = d/2 (hence d must
be even). Counting scalars at 4 bytes each, so reported byte figures match
single-precision accelerator budgets even though this package computes in
binary64:

    efficient    memory = 4*d*n + d^2/2      macc = (6*d^2 + d)*n
    dot-product  memory = 4*d*n + n^2        macc = (4*d^2 + d)*n + 3*d*n^2

The analytical model is canonical for headline numbers; the instrumented
counters are validated against per-matmul sums instead, because the two use
different accounting granularity. Both are reported side by side and never
reconciled silently.
"""

from dataclasses import dataclass

from .errors import DimensionError
from .instrument import Counters, track
from .mechanism import Mechanism

# Scalar width used for reported byte figures (single precision).
BYTES_PER_FLOAT_REPORTED = 4


@dataclass(frozen=True)
class ResourceEstimate:
    memory_floats: int
    memory_bytes: int
    macc: int


@dataclass(frozen=True)
class CostQuery:
    n: int
    d: int
    mechanism: Mechanism

    def __post_init__(self):
        if self.n < 1:
            raise DimensionError(f"input size n must be >= 1, got {self.n}")
        if self.d < 2 or self.d % 2 != 0:
            raise DimensionError(f"channel count d must be even and >= 2, got {self.d}")


def estimate(q: CostQuery) -> ResourceEstimate:
    """Evaluate the closed-form cost model for one mechanism at one size."""
    n, d = q.n, q.d
    if q.mechanism is Mechanism.EFFICIENT:
        memory = 4 * d * n + d * d // 2
        macc = (6 * d * d + d) * n
    else:
        memory = 4 * d * n + n * n
        macc = (4 * d * d + d) * n + 3 * d * n * n
    return ResourceEstimate(
        memory_floats=memory,
        memory_bytes=memory * BYTES_PER_FLOAT_REPORTED,
        macc=macc,
    )


@dataclass(frozen=True)
class Comparison:
    n: int
    d: int
    efficient: ResourceEstimate
    dot_product: ResourceEstimate
    memory_ratio: float
    computation_ratio: float


def compare(n: int, d: int) -> Comparison:
    """Dot-product cost divided by efficient cost at one input size."""
    eff = estimate(CostQuery(n=n, d=d, mechanism=Mechanism.EFFICIENT))
    dp = estimate(CostQuery(n=n, d=d, mechanism=Mechanism.DOT_PRODUCT))
    return Comparison(
        n=n,
        d=d,
        efficient=eff,
        dot_product=dp,
        memory_ratio=dp.memory_floats / eff.memory_floats,
        computation_ratio=dp.macc / eff.macc,
    )


@dataclass(frozen=True)
class SweepRow:
    label: str
    n: int
    d: int
    mechanism: Mechanism
    estimate: ResourceEstimate


# Reference sweep: 2D maps of side 64/128/256 plus two 3D volumes, at d = 64
# (d_v = d, d_k = d/2 = 32).
REFERENCE_SIZES = (
    ("64x64", 64 * 64),
    ("128x128", 128 * 128),
    ("256x256", 256 * 256),
    ("28x28x4", 28 * 28 * 4),
    ("64x64x32", 64 * 64 * 32),
)


def sweep(sizes=None, mechanisms=(Mechanism.EFFICIENT, Mechanism.DOT_PRODUCT)) -> list[SweepRow]:
    """Evaluate the model over a grid of (n, d) sizes, one row per mechanism.

    `sizes` is a list of (n, d) pairs or (label, n, d) triples; the default
    is the reference sweep at d = 64.
    """
    if sizes is None:
        sizes = [(label, n, 64) for label, n in REFERENCE_SIZES]
    if not sizes:
        raise ValueError("sizes must be nonempty")
    rows = []
    for entry in sizes:
        if len(entry) == 3:
            label, n, d = entry
        else:
            n, d = entry
            label = str(n)
        for mech in mechanisms:
            rows.append(
                SweepRow(
                    label=str(label),
                    n=int(n),
                    d=int(d),
                    mechanism=mech,
                    estimate=estimate(CostQuery(n=int(n), d=int(d), mechanism=mech)),
                )
            )
    return rows


@dataclass(frozen=True)
class Placement:
    name: str
    spatial: tuple
    n: int
    d: int


def placement_presets(d: int = 256) -> dict:
    """Named feature-map sizes at common backbone/FPN insertion points."""
    spatials = {
        "res3": (56, 80),
        "res4": (28, 40),
        "fpn1": (224, 320),
        "fpn2": (112, 160),
        "fpn3": (56, 80),
        "fpn4": (28, 40),
        "fpn5": (14, 20),
    }
    return {
        name: Placement(name=name, spatial=hw, n=hw[0] * hw[1], d=d)
        for name, hw in spatials.items()
    }


def measure(run) -> Counters:
    """Run a closure (one forward call) under fresh counters and return them."""
    with track() as counters:
        run()
    return counters
