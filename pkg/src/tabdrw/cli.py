"""Command-line entry point: ``tabdrw <command> [options]``.

Reports are JSON (stdout or ``--report``); grids are also written as CSV.
Exit status is 0 whenever the command ran, whatever the detection verdict,
1 on operational errors and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import attacks, detect, embed, fidelity, keying, sweep, synth, table, theory, transform


def _read_flat_config(path: str) -> dict[str, str]:
    kv = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}: expected key = value, got {line!r}")
            kv[key.strip().replace("-", "_")] = value.strip()
    return kv


def _emit(report: dict, path: str | None) -> None:
    text = json.dumps(report, indent=2)
    if path:
        Path(path).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _load_table(args) -> table.Table:
    schema = table.read_schema(args.schema) if getattr(args, "schema", None) else None
    return table.read_csv(args.input, schema, max_decimals=getattr(args, "max_decimals", 0))


def _embed_config(args) -> embed.EmbedConfig:
    cols = tuple(c.strip() for c in args.columns.split(",")) if args.columns else None
    return embed.EmbedConfig(
        gamma=args.gamma, delta=args.delta, key=keying.parse_key(args.key), columns=cols,
        privacy=args.privacy, bit_mode=args.bit_mode, postprocess=not args.no_postprocess,
        clip_continuous=args.clip_continuous, include_categorical=args.include_categorical,
        subset_size=args.subset_size,
    )


# ---------------------------------------------------------------- commands

def cmd_synth(args) -> dict:
    cov, rho = synth.parse_covariance(args.cov)
    t = synth.generate(synth.GaussianSpec(args.rows, args.cols, cov, rho, seed=args.seed))
    if args.label:
        t = synth.add_label_column(t, args.seed, _floats(args.label))
    table.write_csv(t, args.output)
    return {"command": "synth", "output": args.output, "rows": t.n_rows, "cols": t.n_cols,
            "covariance": args.cov, "seed": args.seed}


def cmd_embed(args) -> dict:
    t = _load_table(args)
    cfg = _embed_config(args)
    marked, report = embed.embed(t, cfg)
    table.write_csv(marked, args.output)
    if args.state:
        transform.save_state(report.state.frozen(), args.state)
    return {"command": "embed", "output": args.output, "seed": args.seed,
            "gamma": cfg.gamma, "delta": cfg.delta, "privacy": cfg.privacy,
            "bit_mode": cfg.bit_mode, **report.to_dict()}


def _null_for(args, m: int | None = None):
    if args.null in (None, "theoretical"):
        return None
    return detect.load_null(args.null)


def cmd_detect(args) -> dict:
    t = _load_table(args)
    cfg = _embed_config(args)
    state = transform.load_state(args.state) if args.state else None
    rep = detect.detect(t, cfg, _null_for(args), args.threshold, state)
    return {"command": "detect", "seed": args.seed, "transform": "frozen" if state else "refit",
            **rep.to_dict()}


def cmd_calibrate(args) -> dict:
    cfg = _embed_config(args)
    if args.tables:
        tables = [table.read_csv(p) for p in args.tables]
        rows = args.rows_per_table
    else:
        cov, rho = synth.parse_covariance(args.cov)
        seeds = keyed_prng_seeds(args.seed, args.n_tables)
        tables = (synth.generate(synth.GaussianSpec(args.rows, args.cols, cov, rho, seed=s))
                  for s in seeds)
        rows = args.rows_per_table or args.rows
    null = detect.calibrate_null(tables, cfg, n_resamples=args.resamples,
                                 alphas=_floats(args.alpha), rows_per_table=rows, seed=args.seed)
    detect.save_null(null, args.output)
    return {"command": "calibrate", "output": args.output, "seed": args.seed, **null.to_dict()}


def keyed_prng_seeds(seed: int, n: int) -> list[int]:
    return [int(s) for s in keying.keyed_prng(seed, "calibrate").u64(n)]


def cmd_attack(args) -> dict:
    t = _load_table(args)
    ref = table.read_csv(args.reference, list(t.schema)) if args.reference else None
    spec = attacks.AttackSpec(args.kind, args.strength, seed=args.seed, target=args.target,
                              attacker_key=keying.parse_key(args.attacker_key),
                              gamma=args.gamma, delta=args.delta)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        out = attacks.apply_attack(t, spec, ref)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    table.write_csv(out, args.output)
    return {"command": "attack", "kind": spec.kind, "strength": spec.strength, "seed": args.seed,
            "rows_in": t.n_rows, "rows_out": out.n_rows, "output": args.output,
            "warnings": [str(w.message) for w in caught]}


def cmd_sweep(args) -> dict:
    cfg = sweep.read_sweep_config(args.sweep_config, seed=args.explicit_seed)
    rows = sweep.run_sweep(cfg)
    if args.csv:
        sweep.write_sweep_csv(rows, args.csv)
    if args.plot:
        from .plotting import plot_sweep

        plot_sweep(rows, args.plot)
    report = json.loads(sweep.sweep_json(rows, cfg))
    report.update(command="sweep", seed=cfg.seed)
    return report


def cmd_fidelity(args) -> dict:
    real = table.read_csv(args.real)
    other = table.read_csv(args.synthetic, list(real.schema))
    rep = fidelity.fidelity_report(real, other)
    return {"command": "fidelity", "seed": args.seed, **json.loads(rep.to_json())}


def cmd_bound(args) -> dict:
    sigmas = _floats(args.sigma)
    rows = []
    for s in sigmas:
        prm = theory.BoundParams(args.N, args.p, args.gamma, args.delta, s,
                                 args.lambda_min, args.lambda_max)
        row = {"sigma": s, "z_lower_bound": theory.z_lower_bound(prm)}
        if args.sample_size:
            row["sample_size"] = theory.sample_size_bound(args.alpha, args.beta, prm, args.q)
        rows.append(row)
    fields = list(rows[0]) if rows else ["sigma"]
    lines = [",".join(fields)] + [",".join(_fmt(r[f]) for f in fields) for r in rows]
    if args.output:
        Path(args.output).write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        print("\n".join(lines))
    if args.plot:
        from .plotting import plot_bounds

        key = "sample_size" if args.sample_size else "z_lower_bound"
        label = "required rows" if args.sample_size else "lower bound on E[Z]"
        plot_bounds(sigmas, [r[key] for r in rows], args.plot, ylabel=label)
    return {"command": "bound", "seed": args.seed, "N": args.N, "p": args.p,
            "gamma": args.gamma, "delta": args.delta, "rows": rows}


def _fmt(v) -> str:
    return f"{v:.4f}" if isinstance(v, float) else str(v)


def cmd_trace(args) -> dict:
    if args.rank is not None:
        if args.m is None:
            raise ValueError("--rank needs --m")
        bits = keying.bits_for_rank(args.rank, args.m, args.bit_mode)
        return {"command": "trace", "seed": args.seed, "normalized_rank": args.rank, "m": args.m,
                "leaf": keying.leaf_index(args.rank, args.m, args.bit_mode),
                "bits": list(bits.bits), "mode": args.bit_mode}
    if args.input is None or args.key is None or args.row is None:
        raise ValueError("trace needs either --rank/--m or an input table with --key and --row")
    t = _load_table(args)
    cfg = _embed_config(args)
    Z = detect.standardized_block(t, cfg)
    if not 0 <= args.row < t.n_rows:
        raise ValueError(f"row {args.row} outside [0, {t.n_rows})")
    ctx = keying.rank_context(Z, cfg.key, cfg.subset_size)
    m = transform.n_effective(Z.shape[1])
    r = float(ctx.normalized_ranks[args.row])
    bits = keying.bits_for_rank(r, m, cfg.bit_mode)
    im = transform.dft_rows(Z[args.row:args.row + 1])[0, 1:m + 1].imag
    return {"command": "trace", "seed": args.seed, "row": args.row, "subset": list(ctx.subset),
            "score": float(ctx.scores[args.row]), "rank": int(ctx.ranks[args.row]),
            "normalized_rank": r, "leaf": keying.leaf_index(r, m, cfg.bit_mode), "m": m,
            "bits": list(bits.bits), "imag_parts": [float(v) for v in im],
            "aligned": int(np.sum(im * (2.0 * np.array(bits.bits) - 1.0) > 0))}


# ------------------------------------------------------------------ parser

def _add_watermark_flags(p: argparse.ArgumentParser, key_required: bool = True) -> None:
    p.add_argument("--key", help="64-bit key, decimal or 0x-hex" + (" (required)" if key_required else ""))
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--columns", help="comma-separated watermark columns (default: all numeric)")
    p.add_argument("--privacy", action="store_true", help="keyed column permutation variant")
    p.add_argument("--bit-mode", choices=keying.BIT_MODES, default=keying.GRAY2)
    p.add_argument("--no-postprocess", action="store_true", help="skip rounding and clipping")
    p.add_argument("--clip-continuous", action="store_true",
                   help="also clip continuous columns to their bounds")
    p.add_argument("--include-categorical", action="store_true")
    p.add_argument("--subset-size", type=int, help="override the ceil(p/2) rank subset size")


def _add_input(p: argparse.ArgumentParser, required: bool = True) -> None:
    if required:
        p.add_argument("input", help="input CSV")
    else:
        p.add_argument("input", nargs="?", help="input CSV")
    p.add_argument("--schema", help="sidecar schema file")
    p.add_argument("--max-decimals", type=int, default=0,
                   help="largest decimal grid inferred as discrete (default 0)")


def _add_global_flags(p: argparse.ArgumentParser, default) -> None:
    p.add_argument("--seed", type=int, default=default, help="global seed, recorded in reports")
    p.add_argument("--config", default=default,
                   help="flat key = value file supplying option defaults")
    p.add_argument("--report", default=default, help="write the JSON report here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tabdrw", description=__doc__.splitlines()[0])
    _add_global_flags(parser, argparse.SUPPRESS)
    parser.set_defaults(seed=None, config=None, report=None)
    # the same flags are accepted after the subcommand name too
    common = argparse.ArgumentParser(add_help=False)
    _add_global_flags(common, argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)
    _add_parser = sub.add_parser
    sub.add_parser = lambda name, **kw: _add_parser(name, parents=[common], **kw)

    p = sub.add_parser("synth", help="write a synthetic Gaussian table")
    p.add_argument("--rows", type=int, default=1000)
    p.add_argument("--cols", type=int, default=11)
    p.add_argument("--cov", default="identity", help="identity or ar1:<rho>")
    p.add_argument("--label", help="append a categorical label with these class weights, e.g. 0.7,0.3")
    p.add_argument("--output", "-o", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("embed", help="watermark a CSV table")
    _add_input(p)
    _add_watermark_flags(p)
    p.add_argument("--output", "-o", required=True)
    p.add_argument("--state", help="also save the frozen transform state here")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("detect", help="test a CSV table for a watermark")
    _add_input(p)
    _add_watermark_flags(p)
    p.add_argument("--null", default="theoretical", help="'theoretical' or a calibration file")
    p.add_argument("--threshold", type=float, default=detect.DEFAULT_THRESHOLD)
    p.add_argument("--state", help="frozen transform state (idealized detection)")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("calibrate", help="Monte-Carlo null statistics for one key")
    _add_watermark_flags(p)
    p.add_argument("--tables", nargs="*", help="unwatermarked CSV tables (default: synthetic)")
    p.add_argument("--n-tables", type=int, default=100)
    p.add_argument("--rows", type=int, default=1000)
    p.add_argument("--cols", type=int, default=11)
    p.add_argument("--cov", default="identity")
    p.add_argument("--rows-per-table", type=int)
    p.add_argument("--resamples", type=int, default=100_000)
    p.add_argument("--alpha", default="0.001", help="comma-separated significance levels")
    p.add_argument("--output", "-o", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("attack", help="apply one attack to a CSV table")
    _add_input(p)
    p.add_argument("--kind", required=True, choices=attacks.ATTACK_KINDS)
    p.add_argument("--strength", "--frac", type=float,
                   help="fraction, count, noise level, bin count or key count, by attack")
    p.add_argument("--target", help="categorical column for resample")
    p.add_argument("--attacker-key", default="0")
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--reference", help="unwatermarked CSV for col_del / cell_del replacements")
    p.add_argument("--output", "-o", required=True)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("sweep", help="robustness grid from a sweep config file")
    p.add_argument("sweep_config", metavar="config")
    p.add_argument("--csv", help="write the grid as CSV")
    p.add_argument("--plot", help="write a bar chart (PNG/PDF/SVG)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fidelity", help="density and correlation scores of two CSVs")
    p.add_argument("real")
    p.add_argument("synthetic")
    p.set_defaults(func=cmd_fidelity)

    p = sub.add_parser("bound", help="robustness bounds over a sigma grid, as CSV")
    p.add_argument("--N", type=int, default=1000)
    p.add_argument("--p", type=int, default=11)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--sigma", default="0.1,0.5,1.0", help="comma-separated noise levels")
    p.add_argument("--lambda-min", type=float, default=1.0)
    p.add_argument("--lambda-max", type=float, default=1.0)
    p.add_argument("--sample-size", action="store_true", help="also report required rows")
    p.add_argument("--alpha", type=float, default=0.001)
    p.add_argument("--beta", type=float, default=0.01)
    p.add_argument("--q", type=float, help="critical value (default: exact normal quantile)")
    p.add_argument("--output", "-o", help="CSV path (default stdout)")
    p.add_argument("--plot", help="write a figure of the bound against sigma")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("trace", help="show the rank and bits behind one row")
    _add_input(p, required=False)
    _add_watermark_flags(p, key_required=False)
    p.add_argument("--row", type=int)
    p.add_argument("--rank", type=float, help="normalized rank to trace without a table")
    p.add_argument("--m", type=int)
    p.set_defaults(func=cmd_trace)
    return parser


_KEYED_COMMANDS = ("embed", "detect", "calibrate")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            defaults = _read_flat_config(args.config)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in subparser._actions}
        unknown = set(defaults) - known
        if unknown:
            parser.error(f"unknown setting(s) in {args.config}: {', '.join(sorted(unknown))}")
        subparser.set_defaults(**defaults)
        args = parser.parse_args(argv)
        for a in subparser._actions:  # config values arrive as strings
            if a.dest in defaults and a.type is not None and isinstance(getattr(args, a.dest), str):
                setattr(args, a.dest, a.type(getattr(args, a.dest)))
            elif a.dest in defaults and a.const is True:
                setattr(args, a.dest, str(getattr(args, a.dest)).lower() in ("1", "true", "yes"))
    # checked here rather than by argparse so the key may come from --config
    if args.command in _KEYED_COMMANDS and getattr(args, "key", None) is None:
        parser.error(f"{args.command}: --key is required")
    args.explicit_seed = args.seed
    if args.seed is None:
        args.seed = 0
    try:
        report = args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.command == "bound" and not args.report:
        return 0
    _emit(report, args.report)
    return 0


if __name__ == "__main__":
    sys.exit(main())
