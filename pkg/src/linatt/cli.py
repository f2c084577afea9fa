"""Command-line interface.

Subcommands: equiv (mechanism equivalence check), gradcheck (analytic vs
finite-difference gradients), estimate (analytical cost model), bench
(instrumented wall-clock grid), maps (template attention map export).

Exit codes: 0 success / checks passed, 1 runtime or check failure, 2 usage
error. All commands are deterministic given --seed (bench wall-clock timings
aside).
"""

import argparse
import sys
from pathlib import Path

from . import plots
from .bench import parse_size_token, run_grid, write_csv
from .errors import LinattError
from .grad import check_mechanism_gradients, check_module_gradients
from .mechanism import (
    Mechanism,
    Normalization,
    QkvTriple,
    dot_product_attention,
    efficient_attention,
    global_context,
    softmax_approximation_gap,
    template_attention_maps,
)
from .module import DEFAULT_BUDGET_BYTES, AttentionConfig, flatten, init_weights
from .resource import compare, CostQuery, estimate, placement_presets, sweep
from .tensor import Rng, matmul, max_relative_difference
from .tensorio import read_tensor, write_tensor

NORMS = {"scaling": Normalization.SCALING, "softmax": Normalization.SOFTMAX}
MECHS = {"efficient": Mechanism.EFFICIENT, "dot-product": Mechanism.DOT_PRODUCT}
SCALING_EQUIV_TOL = 1e-10

ESTIMATE_CSV_HEADER = (
    "mechanism,n,d,memory_floats,memory_bytes,macc,memory_ratio,computation_ratio"
)


def _u64(text):
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 bits, got {text}")
    return value


def _common_flags():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_u64, default=argparse.SUPPRESS,
                        help="64-bit seed for all randomness (default 0)")
    common.add_argument("--format", choices=("table", "csv"), default=argparse.SUPPRESS,
                        help="stdout report style (default table)")
    common.add_argument("--budget-bytes", type=int, dest="budget_bytes",
                        default=argparse.SUPPRESS,
                        help="simulated memory cap for the quadratic path "
                             f"(default {DEFAULT_BUDGET_BYTES})")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(
        prog="linatt",
        description="Attention mechanisms, equivalence and gradient checks, "
                    "and the memory/computation cost model.",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("equiv", parents=[common],
                       help="compare efficient vs dot-product attention on random inputs")
    p.add_argument("--norm", choices=sorted(NORMS), default="scaling")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--d-k", type=int, default=32, dest="d_k")
    p.add_argument("--d-v", type=int, default=64, dest="d_v")
    p.add_argument("--trials", type=int, default=100)
    p.set_defaults(handler=cmd_equiv)

    p = sub.add_parser("gradcheck", parents=[common],
                       help="verify analytic gradients against central finite differences")
    p.add_argument("--sizes", action="append", metavar="NxDKxDV",
                   help="problem size as n x d_k x d_v; repeatable "
                        "(default 5x2x3 and 8x4x4)")
    p.add_argument("--tolerance", type=float, default=1e-5)
    p.add_argument("--step", type=float, default=1e-5,
                   help="finite-difference step size h")
    p.set_defaults(handler=cmd_gradcheck)

    p = sub.add_parser("estimate", parents=[common],
                       help="evaluate the analytical cost model at one input size")
    p.add_argument("--n", type=int, help="input size (number of positions)")
    p.add_argument("--preset", help="named placement preset instead of --n")
    p.add_argument("--d", type=int,
                   help="channel count, even (default 64, or 256 with --preset)")
    p.add_argument("--mechanism", choices=sorted(MECHS) + ["both"], default="both")
    p.add_argument("--output", help="also write a CSV file plus a chart PNG next to it")
    p.set_defaults(handler=cmd_estimate)

    p = sub.add_parser("bench", parents=[common],
                       help="run the instrumented wall-clock benchmark grid")
    p.add_argument("--sizes",
                   help="comma-separated spatial sizes, e.g. 64x64,28x28x4,4096 "
                        "(default: the reference sweep)")
    p.add_argument("--d", type=int, default=64, help="channel count, even")
    p.add_argument("--norm", choices=sorted(NORMS), default="scaling")
    p.add_argument("--repeats", type=int, default=5, help="timed runs per point (>= 3)")
    p.add_argument("--output", required=True, help="CSV output path")
    p.add_argument("--no-plot", action="store_true", help="skip the chart PNG")
    p.set_defaults(handler=cmd_bench)

    p = sub.add_parser("maps", parents=[common],
                       help="export template attention maps and the global context matrix")
    p.add_argument("--input", help="feature-map tensor file (h x w x d or t x h x w x d)")
    p.add_argument("--shape", help="random feature map of this shape, e.g. 8x8x16")
    p.add_argument("--d-k", type=int, default=4, dest="d_k",
                   help="key dimensionality when weights are generated")
    p.add_argument("--d-v", type=int, dest="d_v",
                   help="value dimensionality when weights are generated (default d)")
    p.add_argument("--norm", choices=sorted(NORMS), default="softmax")
    p.add_argument("--wk", help="key projection weights tensor file (d x d_k)")
    p.add_argument("--wv", help="value projection weights tensor file (d x d_v)")
    p.add_argument("--out-dir", required=True, dest="out_dir")
    p.add_argument("--encoding", choices=("f32", "f64"), default="f32")
    p.add_argument("--no-plot", action="store_true", help="skip heatmap PNGs")
    p.set_defaults(handler=cmd_maps)

    return parser


def _seed(args) -> int:
    return getattr(args, "seed", 0)


def _format(args) -> str:
    return getattr(args, "format", "table")


def _budget(args) -> int:
    return getattr(args, "budget_bytes", DEFAULT_BUDGET_BYTES)


def cmd_equiv(args, parser) -> int:
    if min(args.n, args.d_k, args.d_v, args.trials) < 1:
        parser.error("--n, --d-k, --d-v, and --trials must all be >= 1")
    norm = NORMS[args.norm]
    rng = Rng(_seed(args))
    worst_out = 0.0
    worst_gap = 0.0
    for _ in range(args.trials):
        t = QkvTriple(
            rng.uniform((args.n, args.d_k)),
            rng.uniform((args.n, args.d_k)),
            rng.uniform((args.n, args.d_v)),
        )
        diff = max_relative_difference(
            efficient_attention(t, norm), dot_product_attention(t, norm)
        )
        worst_out = max(worst_out, diff)
        if norm is Normalization.SOFTMAX:
            worst_gap = max(worst_gap, softmax_approximation_gap(t.q, t.k))
    size = f"n={args.n} d_k={args.d_k} d_v={args.d_v} trials={args.trials}"
    if norm is Normalization.SCALING:
        verdict = "PASS" if worst_out <= SCALING_EQUIV_TOL else "FAIL"
        print(f"scaling equivalence: max relative error {worst_out:.6e} "
              f"(tolerance {SCALING_EQUIV_TOL:.0e}) [{size}] {verdict}")
        return 0 if worst_out <= SCALING_EQUIV_TOL else 1
    print(f"softmax approximation: max output relative gap {worst_out:.6e}, "
          f"max mixing-matrix Frobenius gap {worst_gap:.6e} [{size}]")
    print("softmax mode reports the gap only; no tolerance is asserted")
    return 0


def _parse_gradcheck_sizes(args, parser):
    tokens = args.sizes if args.sizes else ["5x2x3", "8x4x4"]
    sizes = []
    for token in tokens:
        parts = token.lower().split("x")
        if len(parts) != 3:
            parser.error(f"--sizes entries must look like NxDKxDV, got {token!r}")
        n, d_k, d_v = (int(p) for p in parts)
        if min(n, d_k, d_v) < 1:
            parser.error(f"size extents must be >= 1, got {token!r}")
        sizes.append((n, d_k, d_v))
    return sizes


def cmd_gradcheck(args, parser) -> int:
    if args.tolerance <= 0:
        parser.error("--tolerance must be positive")
    if args.step <= 0:
        parser.error("--step must be positive")
    sizes = _parse_gradcheck_sizes(args, parser)
    rng = Rng(_seed(args))
    reports = []
    for n, d_k, d_v in sizes:
        t = QkvTriple(
            rng.uniform((n, d_k)), rng.uniform((n, d_k)), rng.uniform((n, d_v))
        )
        upstream = rng.uniform((n, d_v))
        for mech in (Mechanism.EFFICIENT, Mechanism.DOT_PRODUCT):
            for norm in (Normalization.SCALING, Normalization.SOFTMAX):
                reports.append(
                    (f"n={n}", check_mechanism_gradients(
                        t, norm, mech, upstream, h=args.step, tolerance=args.tolerance))
                )
        x = rng.uniform((n, 1, d_v))
        weights = init_weights(rng, d_v, d_k, d_v, scheme="uniform")
        up_x = rng.uniform((n, 1, d_v))
        for mech in (Mechanism.EFFICIENT, Mechanism.DOT_PRODUCT):
            for norm in (Normalization.SCALING, Normalization.SOFTMAX):
                cfg = AttentionConfig(d_k=d_k, d_v=d_v, norm=norm, mechanism=mech)
                reports.append(
                    (f"n={n}", check_module_gradients(
                        x, weights, cfg, up_x, h=args.step, tolerance=args.tolerance))
                )
    if _format(args) == "csv":
        print("size,check,parameter,max_rel_error,max_abs_error,h,pass")
        for size, report in reports:
            for name in report.max_rel_error:
                print(f"{size},{report.label},{name},"
                      f"{report.max_rel_error[name]:.6e},"
                      f"{report.max_abs_error[name]:.6e},"
                      f"{report.h:.0e},{str(report.passed).lower()}")
    else:
        print(f"{'size':8s} {'check':28s} {'worst param':12s} "
              f"{'max rel err':>12s} {'max abs err':>12s}  result")
        for size, report in reports:
            worst = max(report.max_rel_error, key=report.max_rel_error.get)
            print(f"{size:8s} {report.label:28s} {worst:12s} "
                  f"{report.max_rel_error[worst]:12.3e} "
                  f"{report.max_abs_error[worst]:12.3e}  "
                  f"{'pass' if report.passed else 'FAIL'}")
    failures = sum(1 for _, report in reports if not report.passed)
    print(f"{len(reports) - failures}/{len(reports)} gradient checks passed "
          f"(tolerance {args.tolerance:g}, h {args.step:g})")
    return 0 if failures == 0 else 1


def cmd_estimate(args, parser) -> int:
    if (args.n is None) == (args.preset is None):
        parser.error("exactly one of --n or --preset is required")
    if args.preset is not None:
        presets = placement_presets(d=args.d if args.d else 256)
        if args.preset not in presets:
            parser.error(f"unknown preset {args.preset!r}; "
                         f"valid names: {', '.join(sorted(presets))}")
        chosen = presets[args.preset]
        n, d = chosen.n, chosen.d
        label = f"{args.preset} ({chosen.spatial[0]}x{chosen.spatial[1]})"
    else:
        n, d = args.n, args.d if args.d else 64
        label = str(n)
    if n < 1:
        parser.error("--n must be >= 1")
    if d < 2 or d % 2:
        parser.error(f"--d must be even and >= 2, got {d}")

    if args.mechanism == "both":
        comp = compare(n, d)
        rows = [
            (Mechanism.EFFICIENT, comp.efficient),
            (Mechanism.DOT_PRODUCT, comp.dot_product),
        ]
        ratios = (comp.memory_ratio, comp.computation_ratio)
    else:
        mech = MECHS[args.mechanism]
        rows = [(mech, estimate(CostQuery(n=n, d=d, mechanism=mech)))]
        ratios = None

    lines = _estimate_report(label, n, d, rows, ratios, _format(args))
    for line in lines:
        print(line)

    if args.output:
        out = Path(args.output)
        csv_lines = _estimate_report(label, n, d, rows, ratios, "csv")
        out.write_text("\n".join(csv_lines) + "\n", encoding="utf-8")
        chart = out.with_suffix(".png")
        plots.save_cost_chart(
            sweep([(label, n, d)], mechanisms=[m for m, _ in rows]), chart
        )
        print(f"wrote {out} and {chart}")
    return 0


def _estimate_report(label, n, d, rows, ratios, fmt):
    lines = []
    if fmt == "csv":
        lines.append(ESTIMATE_CSV_HEADER)
        for mech, est in rows:
            ratio_cells = (
                f",{ratios[0]:.6f},{ratios[1]:.6f}" if ratios is not None else ",,"
            )
            lines.append(
                f"{mech.value},{n},{d},{est.memory_floats},{est.memory_bytes},"
                f"{est.macc}{ratio_cells}"
            )
    else:
        lines.append(f"input size {label}: n={n}, d={d} (d_v=d, d_k=d/2)")
        lines.append(f"{'mechanism':12s} {'memory_floats':>14s} {'memory_bytes':>14s} "
                     f"{'macc':>16s}")
        for mech, est in rows:
            lines.append(f"{mech.value:12s} {est.memory_floats:14d} "
                         f"{est.memory_bytes:14d} {est.macc:16d}")
        if ratios is not None:
            lines.append(f"memory ratio (dot-product / efficient): {ratios[0]:.4f}")
            lines.append(f"computation ratio (dot-product / efficient): {ratios[1]:.4f}")
    return lines


def cmd_bench(args, parser) -> int:
    if args.d < 2 or args.d % 2:
        parser.error(f"--d must be even and >= 2, got {args.d}")
    if args.repeats < 3:
        parser.error("--repeats must be >= 3")
    if args.sizes:
        try:
            spatial_sizes = [parse_size_token(tok) for tok in args.sizes.split(",") if tok]
        except ValueError as exc:
            parser.error(str(exc))
    else:
        spatial_sizes = [(64, 64), (128, 128), (256, 256), (28, 28, 4), (64, 64, 32)]
    if not spatial_sizes:
        parser.error("--sizes must name at least one size")

    records = run_grid(
        spatial_sizes,
        d=args.d,
        norm=NORMS[args.norm],
        repeats=args.repeats,
        seed=_seed(args),
        budget_bytes=_budget(args),
    )
    write_csv(records, args.output)
    ok = sum(1 for r in records if r.status == "ok")
    oom = len(records) - ok
    print(f"wrote {len(records)} records to {args.output} ({ok} ok, {oom} OOM)")
    if not args.no_plot:
        chart = Path(args.output).with_suffix(".png")
        plots.save_bench_chart(records, chart)
        print(f"wrote {chart}")
    return 0


def cmd_maps(args, parser) -> int:
    if (args.input is None) == (args.shape is None):
        parser.error("exactly one of --input or --shape is required")
    rng = Rng(_seed(args))
    if args.input is not None:
        x = read_tensor(args.input)
        if x.ndim not in (3, 4):
            parser.error(f"input must be h x w x d or t x h x w x d, got shape {tuple(x.shape)}")
    else:
        extents = tuple(int(p) for p in args.shape.lower().split("x"))
        if len(extents) not in (3, 4) or min(extents) < 1:
            parser.error(f"--shape must have 3 or 4 extents >= 1, got {args.shape!r}")
        x = rng.uniform(extents)
    d = x.shape[-1]
    spatial = x.shape[:-1]

    if (args.wk is None) != (args.wv is None):
        parser.error("--wk and --wv must be given together")
    if args.wk is not None:
        w_k = read_tensor(args.wk)
        w_v = read_tensor(args.wv)
        for name, mat in (("--wk", w_k), ("--wv", w_v)):
            if mat.ndim != 2 or mat.shape[0] != d:
                parser.error(f"{name} must have shape {d}x*, got {tuple(mat.shape)}")
    else:
        d_v = args.d_v if args.d_v else d
        if min(args.d_k, d_v) < 1:
            parser.error("--d-k and --d-v must be >= 1")
        weights = init_weights(rng, d, args.d_k, d_v, scheme="uniform")
        w_k, w_v = weights.w_k, weights.w_v

    norm = NORMS[args.norm]
    x_flat = flatten(x)
    keys = matmul(x_flat, w_k)
    values = matmul(x_flat, w_v)
    maps = template_attention_maps(keys, norm)
    context = global_context(keys, values, norm)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for j in range(maps.shape[0]):
        map_spatial = maps[j].reshape(spatial)
        write_tensor(out_dir / f"map_{j:03d}.tensor", map_spatial, encoding=args.encoding)
        if not args.no_plot:
            image = map_spatial if map_spatial.ndim == 2 else map_spatial[map_spatial.shape[0] // 2]
            plots.save_map_image(image, out_dir / f"map_{j:03d}.png", title=f"template map {j}")
    write_tensor(out_dir / "context.tensor", context, encoding=args.encoding)
    print(f"wrote {maps.shape[0]} template maps and a "
          f"{context.shape[0]}x{context.shape[1]} context matrix to {out_dir}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args, parser)
    except LinattError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
