#!/usr/bin/env python3
"""Sparse recovery over many seeds: StatRes and relative error per seed."""

import argparse
from dataclasses import replace

from fracprox import metrics
from fracprox.config import load_config, preset_spec
from fracprox.experiment import build_dataset, build_problem, run_once


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", help="config file (default: l1sk preset at n = 256)")
    ap.add_argument("--seeds", type=int, default=20)
    args = ap.parse_args()

    if args.config:
        spec = load_config(args.config)
    else:
        spec = preset_spec("l1sk")
        spec = replace(spec, data={**spec.data, "n": 256})
    print(f"{'seed':>4} {'Err(x0)':>9} {'Err':>9} {'StatRes':>9} {'its':>5}")
    good = 0
    for seed in range(spec.base_seed, spec.base_seed + args.seeds):
        row, _ = run_once(spec, seed)
        if row["status"] != "ok":
            print(f"{seed:>4} {row['status']}")
            continue
        _, x0, xs = build_problem(spec, build_dataset(spec, seed))
        e0 = metrics.rel_err(x0, xs)
        good += row["StatRes"] <= 1e-3 and row["Err"] < e0
        print(f"{seed:>4} {e0:>9.2e} {row['Err']:>9.2e} {row['StatRes']:>9.2e} "
              f"{row['iterations']:>5}")
    print(f"{good}/{args.seeds} seeds with StatRes <= 1e-3 and Err < Err(x0)")


if __name__ == "__main__":
    main()
