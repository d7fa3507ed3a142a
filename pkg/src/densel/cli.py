"""Command-line front end.

Subcommands: ``select`` (one penalized selection on a fresh sample),
``slope-path`` (the exact K -> model path as CSV), ``simulate`` (the
oracle-ratio study on example 1 or 2), ``conc-check`` (Monte-Carlo tail
checks), and ``sweep`` (selection along a penalty-constant grid).  All
randomness derives from ``--seed``; re-running any invocation produces
byte-identical output files, whatever ``--threads`` says.

Flags can be preloaded from a flat ``key = value`` config file via
``--config``; explicit flags win.  Unknown config keys are rejected.
"""

from __future__ import annotations

import argparse
import sys

from . import report
from .conclab import (check_p_concentration, check_resampling_concentration,
                      check_ustat_concentration, regularization_comparison)
from .densities import density_from_config
from .fitting import fit_model
from .harness import (DEFAULT_METHODS, parse_method, penalty_sweep,
                      run_example)
from .models import build_collection
from .penalties import (dimension_penalty, ideal_deterministic_penalty,
                        resampling_penalty)
from .rng import RngStream
from .slope import select, slope_path


class UsageError(Exception):
    """Invalid flag combination or config content (exit code 2)."""


def _parse_floats(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip() != ""]


def _parse_grid(text: str) -> list[float]:
    """Either 'lo:hi:step' or a comma list."""
    if ":" in text:
        lo, hi, step = (float(t) for t in text.split(":"))
        count = int(round((hi - lo) / step)) + 1
        return [lo + i * step for i in range(count)]
    return _parse_floats(text)


def _density_from_args(args) -> object:
    breaks = _parse_floats(args.breaks) if getattr(args, "breaks", None) else None
    heights = _parse_floats(args.heights) if getattr(args, "heights", None) else None
    return density_from_config(args.density, breaks=breaks, heights=heights)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n", type=int, default=100,
                        help="sample size / collection index (default 100)")
    parser.add_argument("--seed", type=int, default=0,
                        help="experiment seed (default 0)")
    parser.add_argument("--density", default="powerlaw",
                        choices=["powerlaw", "uniform", "piecewise"],
                        help="true density (default powerlaw)")
    parser.add_argument("--breaks", default=None,
                        help="piecewise density breakpoints, comma list")
    parser.add_argument("--heights", default=None,
                        help="piecewise density heights, comma list")
    parser.add_argument("--config", default=None,
                        help="flat key=value config file; flags override it")
    parser.add_argument("--out", default=None, help="output CSV path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="densel",
        description="Penalized least-squares density estimation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("select", help="one penalized selection on a sample")
    _add_common(p)
    p.add_argument("--collection", default="regular-hist",
                   choices=["regular-hist", "two-block", "fourier"])
    p.add_argument("--penalty", default="resampling",
                   help="resampling | dimension:K | ideal:K (default resampling)")

    p = sub.add_parser("slope-path", help="exact K -> model path as CSV")
    _add_common(p)
    p.add_argument("--collection", default="regular-hist",
                   choices=["regular-hist", "two-block", "fourier"])
    p.add_argument("--complexity", default="dim", choices=["dim", "dmw"],
                   help="per-model complexity for the path (default dim)")
    p.add_argument("--jump-rule", default="max", choices=["max", "log"],
                   help="calibration rule reported on stdout (default max)")

    p = sub.add_parser("simulate", help="oracle-ratio study (examples 1/2)")
    _add_common(p)
    p.add_argument("--example", type=int, default=1, choices=[1, 2])
    p.add_argument("--reps", type=int, default=None,
                   help="replications (default 1000 for ex. 1, 200 for ex. 2)")
    p.add_argument("--methods", default=None,
                   help="comma list: slope-dim,resampling,resampling-slope,ideal:K")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--raw-out", default=None,
                   help="also write per-replication ratios to this CSV")

    p = sub.add_parser("conc-check", help="Monte-Carlo concentration checks")
    _add_common(p)
    p.add_argument("--bound", default="p",
                   choices=["p", "resampling", "ustat", "regularization"])
    p.add_argument("--dim", type=int, default=10,
                   help="regular-histogram cells of the checked model")
    p.add_argument("--basis", default="hist", choices=["hist", "fourier"],
                   help="basis of the checked model (default hist)")
    p.add_argument("--reps", type=int, default=10_000)
    p.add_argument("--x", default="1,5,20,40,80",
                   help="comma list of deviation levels")

    p = sub.add_parser("sweep", help="selection along a penalty-constant grid")
    _add_common(p)
    p.add_argument("--collection", default="regular-hist",
                   choices=["regular-hist", "two-block", "fourier"])
    p.add_argument("--k-grid", default="0.2:1.8:0.2",
                   help="'lo:hi:step' or comma list (default 0.2:1.8:0.2)")
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--threads", type=int, default=1)

    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    """Parse argv; then reparse with config-file values as defaults."""
    args = parser.parse_args(argv)
    if getattr(args, "config", None) is None:
        return args
    entries: dict[str, str] = {}
    with open(args.config, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{args.config}:{lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            entries[key.replace("-", "_")] = value
    valid = set(vars(args))
    unknown = sorted(set(entries) - valid)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    # flags override config: reparse with config values as defaults
    config_argv = []
    explicit = {tok.split("=", 1)[0] for tok in argv if tok.startswith("--")}
    for key, value in entries.items():
        flag = "--" + key.replace("_", "-")
        if flag in explicit:
            continue
        config_argv.extend([flag, value])
    return parser.parse_args(argv + config_argv)


# ---------------------------------------------------------------------------
# Command implementations
# ---------------------------------------------------------------------------

def _cmd_select(args) -> int:
    density = _density_from_args(args)
    collection = build_collection(args.collection, args.n)
    sample = density.sample(args.n, RngStream(args.seed, 0, "data"))
    fits = [fit_model(m, sample) for m in collection]
    spec = args.penalty.strip().lower()
    if spec == "resampling":
        pens = [resampling_penalty(f, sample) for f in fits]
    elif spec.startswith("dimension:"):
        k_const = float(spec.split(":", 1)[1])
        pens = [dimension_penalty(m, k_const, args.n) for m in collection]
    elif spec.startswith("ideal:"):
        k_const = float(spec.split(":", 1)[1])
        from .models import exact_quantities
        pens = [ideal_deterministic_penalty(exact_quantities(m, density, args.n),
                                            args.n, k_const)
                for m in collection]
    else:
        raise UsageError(f"unknown penalty spec {args.penalty!r}")
    dims = {m.id: m.dim for m in collection}
    result = select([(f.model.id, f.emp_contrast) for f in fits], pens, dims)
    if spec == "resampling":
        chosen = next(f for f in fits if f.model.id == result.model_id)
        from dataclasses import replace
        from .penalties import resampling_dmw
        result = replace(result, dmw=resampling_dmw(chosen, sample))
    elif spec.startswith("ideal:"):
        from dataclasses import replace
        from .models import exact_quantities
        chosen_model = collection.by_id(result.model_id)
        result = replace(
            result,
            d_exact=exact_quantities(chosen_model, density, args.n).d_exact)
    rows = report.selection_rows(result)
    if args.out:
        report.write_csv(args.out, report.SELECTION_HEADER, rows)
    print(f"selected {result.model_id} criterion={result.criterion:.6g} "
          f"penalty={result.penalty:.6g}")
    return 0


def _cmd_slope_path(args) -> int:
    density = _density_from_args(args)
    sample = density.sample(args.n, RngStream(args.seed, 0, "data"))
    collection = build_collection(args.collection, args.n)
    fits = [fit_model(m, sample) for m in collection]
    if args.complexity == "dim":
        deltas = {m.id: float(m.dim) for m in collection}
    else:
        deltas = {f.model.id: resampling_penalty(f, sample).value * args.n / 2.0
                  for f in fits}
    path = slope_path([(f.model.id, f.emp_contrast, deltas[f.model.id])
                       for f in fits])
    if args.out:
        report.write_csv(args.out, report.PATH_HEADER, report.path_rows(path))
    from .slope import LOG_THRESHOLD, MAX_JUMP, NoJumpError, detect_kmin
    rule = MAX_JUMP if args.jump_rule == "max" else LOG_THRESHOLD
    try:
        k_min = detect_kmin(path, rule, args.n,
                            delta_max=max(deltas.values()))
        final = path.model_at(2.0 * k_min)
        print(f"segments={len(path.segments)} K_min={k_min:.6g} "
              f"selected={final}")
    except NoJumpError:
        print(f"segments={len(path.segments)} K_min=undefined (no jump)")
    return 0


def _cmd_simulate(args) -> int:
    density = _density_from_args(args)
    reps = args.reps if args.reps is not None else (1000 if args.example == 1 else 200)
    if args.methods:
        methods = tuple(parse_method(tok) for tok in args.methods.split(","))
    else:
        methods = DEFAULT_METHODS
    rep_out = run_example(args.example, args.n, reps, methods=methods,
                          seed=args.seed, density=density,
                          threads=args.threads)
    if args.out:
        report.write_csv(args.out, report.SUMMARY_HEADER,
                         report.summary_rows(rep_out))
    if args.raw_out:
        report.write_csv(args.raw_out, report.RAW_HEADER,
                         report.raw_rows(rep_out))
    for method in rep_out.methods:
        mean, median, q95 = rep_out.stats(method)
        print(f"{method}: mean={mean:.4g} median={median:.4g} q95={q95:.4g} "
              f"flagged={rep_out.flagged(method)}")
    return 0


def _cmd_conc_check(args) -> int:
    density = _density_from_args(args)
    if args.basis == "hist":
        from .models import build_regular_histograms
        model = build_regular_histograms(args.dim).models[-1]
    else:
        from .models import fourier_model
        model = fourier_model(max(1, (args.dim - 1) // 2))
    xs = _parse_floats(args.x)
    rng = RngStream(args.seed, 0, f"conc-{args.bound}")
    if args.bound == "regularization":
        rep_out = regularization_comparison(model, density, args.n,
                                            reps=args.reps, rng=rng)
        rows = report.regularization_rows(rep_out)
        if args.out:
            report.write_csv(args.out, report.REGULARIZATION_HEADER, rows)
        print(f"sd(dmw)={rep_out.sd_dmw:.6g} sd(n*p)={rep_out.sd_np:.6g} "
              f"ratio={rep_out.ratio:.6g}")
        return 0
    check = {"p": check_p_concentration,
             "resampling": check_resampling_concentration,
             "ustat": check_ustat_concentration}[args.bound]
    rep_out = check(model, density, args.n, xs=xs, reps=args.reps, rng=rng)
    if args.out:
        report.write_csv(args.out, report.TAIL_HEADER, report.tail_rows(rep_out))
    for row in rep_out.rows:
        status = "pass" if row.passed else "FAIL"
        print(f"{row.label} x={row.x:g}: freq={row.frequency:.5f} "
              f"cap={row.cap:.5f} {status}")
    return 0 if rep_out.all_passed else 1


def _cmd_sweep(args) -> int:
    density = _density_from_args(args)
    k_grid = _parse_grid(args.k_grid)
    rep_out = penalty_sweep(args.collection, args.n, k_grid, args.reps,
                            seed=args.seed, density=density,
                            threads=args.threads)
    if args.out:
        report.write_csv(args.out, report.SWEEP_HEADER,
                         report.sweep_rows(rep_out))
    for k, d, o in zip(rep_out.k_grid, rep_out.mean_d_ratio,
                       rep_out.mean_oracle_ratio):
        print(f"K={k:.3g}: mean D ratio={d:.4f} mean oracle ratio={o:.4g}")
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        handler = {"select": _cmd_select,
                   "slope-path": _cmd_slope_path,
                   "simulate": _cmd_simulate,
                   "conc-check": _cmd_conc_check,
                   "sweep": _cmd_sweep}[args.command]
        return handler(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
