"""Command-line driver: ``fracprox {gen,solve,bench,metrics}``.

Exit status is 0 on success, 2 on a configuration error and 3 on a model
violation (infeasible iterate, vanishing denominator, ...).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import textio
from .config import ConfigError, apply_overrides, load_config, parse_config, preset_spec
from .experiment import (build_dataset, build_problem, compute_metrics, load_dataset,
                         rows_to_csv, rows_to_json, run_bench, run_once,
                         save_dataset, _row)
from .problems import ModelViolation
from .prox import InfeasibleError

EXIT_OK, EXIT_CONFIG, EXIT_MODEL = 0, 2, 3


def _resolve_spec(args, manifest_dir=None):
    if args.config:
        spec = load_config(args.config, preset=args.preset)
    elif args.preset:
        spec = preset_spec(args.preset)
    elif manifest_dir is not None:
        manifest = json.loads((Path(manifest_dir) / "manifest.json").read_text())
        if "config" not in manifest:
            raise ConfigError(f"{manifest_dir}/manifest.json carries no config; pass --config")
        spec = parse_config(manifest["config"])
    else:
        raise ConfigError("one of --config or --preset is required")
    return apply_overrides(spec, seed=args.seed, out=args.out,
                           mode=getattr(args, "mode", None))


def _emit(rows, out_dir, stem, spec):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows_to_csv(rows, out / f"{stem}.csv")
    if spec.outputs.json:
        rows_to_json(rows, out / f"{stem}.json")


def cmd_gen(args):
    """Write the dataset for ``base_seed`` (``--seed``) and its manifest."""
    spec = _resolve_spec(args)
    out = Path(spec.outputs.dir)
    save_dataset(build_dataset(spec, spec.base_seed), out, spec)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_solve(args):
    spec = _resolve_spec(args, manifest_dir=args.data)
    if args.data:
        ds = load_dataset(args.data)
        if ds.family != spec.family:
            raise ConfigError(f"dataset family {ds.family!r} does not match config "
                              f"family {spec.family!r}")
        seed = ds.seed
    else:
        seed = spec.base_seed
        ds = build_dataset(spec, seed)
    row, res = run_once(spec, seed, dataset=ds)
    out = Path(spec.outputs.dir)
    _emit([row], out, "result", spec)
    if res is None:
        print(row["status"], file=sys.stderr)
        return EXIT_MODEL
    if spec.outputs.trace:
        res.trace.to_csv(out / "trace.csv")
    textio.save_dense(out / "x_final.txt", res.x_final)
    for w in res.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(rows_to_csv([row]), end="")
    return EXIT_OK


def cmd_bench(args):
    spec = _resolve_spec(args)
    rows, mean = run_bench(spec, threads=args.threads)
    _emit(rows + [mean], spec.outputs.dir, "bench", spec)
    print(rows_to_csv(rows + [mean]), end="")
    return EXIT_OK


def cmd_metrics(args):
    spec = _resolve_spec(args, manifest_dir=args.data)
    ds = load_dataset(args.data)
    x_path = Path(args.x) if args.x else Path(spec.outputs.dir) / "x_final.txt"
    x = textio.load_vector(x_path)
    problem, _, x_star = build_problem(spec, ds)
    m = compute_metrics(spec, problem, x, x_star)
    row = _row(spec, ds.seed, status="ok", count=1, **m)
    _emit([row], spec.outputs.dir, "metrics", spec)
    print(rows_to_csv([row]), end="")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="fracprox", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, mode=True):
        sp.add_argument("--config", metavar="PATH")
        sp.add_argument("--preset", metavar="NAME")
        sp.add_argument("--seed", type=int, metavar="U64")
        sp.add_argument("--out", metavar="DIR")
        if mode:
            sp.add_argument("--mode", choices=("fixed", "linesearch"))
        return sp

    common(sub.add_parser("gen", help="write datasets and a manifest"), mode=False)
    sp = common(sub.add_parser("solve", help="solve one instance"))
    sp.add_argument("--data", metavar="DIR", help="dataset written by 'gen'")
    sp = common(sub.add_parser("bench", help="repeated runs plus a mean row"))
    sp.add_argument("--threads", type=int, default=1, metavar="N")
    sp = common(sub.add_parser("metrics", help="recompute metrics for a saved iterate"),
                mode=False)
    sp.add_argument("--data", metavar="DIR", required=True)
    sp.add_argument("--x", metavar="PATH", help="iterate file (default: OUT/x_final.txt)")
    return p


COMMANDS = {"gen": cmd_gen, "solve": cmd_solve, "bench": cmd_bench, "metrics": cmd_metrics}


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ModelViolation, InfeasibleError) as exc:
        print(f"model violation: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
