"""Datasets, single runs and repeated benchmarks for the four families."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import datagen, metrics, textio
from .config import ExperimentSpec, OutputSpec, serialize_config
from .operators import dense_matrix, mini_radon, sparse_matrix
from .problems import ModelViolation, make_ct, make_l1_sk, make_portfolio, make_sharpe
from .prox import InfeasibleError
from .solver import solve

__all__ = ["Dataset", "build_dataset", "save_dataset", "load_dataset", "build_problem",
           "run_once", "run_bench", "ROW_FIELDS", "rows_to_csv", "read_rows_csv",
           "mean_row", "compute_metrics", "rows_to_json"]

FORMAT_VERSION = 1

ROW_FIELDS = ("family", "params", "seed", "ObjVal", "StatRes", "Err", "RMSE", "SSIM",
              "Infeas", "iterations", "cpu_seconds", "converged", "status", "count")
METRIC_FIELDS = ("ObjVal", "StatRes", "Err", "RMSE", "SSIM", "Infeas")


@dataclass
class Dataset:
    family: str
    seed: int
    arrays: dict
    params: dict


def build_dataset(spec: ExperimentSpec, seed: int) -> Dataset:
    d = spec.data
    if spec.family == "l1sk":
        A = datagen.gen_odct(d["m"], d["n"], d["F"], seed)
        xs, _ = datagen.gen_sparse_signal(d["n"], d["kappa"], d["F"], seed)
        b = datagen.add_noise(A @ xs, d["noise"], seed)
        x0 = datagen.gen_l1sk_start(xs, seed, d["lo"], d["hi"])
        arrays = dict(A=A, xstar=xs, b=b, x0=x0)
    elif spec.family == "ct":
        A = mini_radon(d["side"], d["angles"], d["max_angle"], d["rays"] or None).matrix
        xs = datagen.gen_shepp_logan(d["side"])
        b = datagen.add_noise(A @ xs, d["noise"], seed)
        arrays = dict(A=A, xstar=xs.reshape(d["side"], d["side"]), b=b)
    elif spec.family == "portfolio":
        sigma, L, mu, dd = datagen.gen_portfolio(d["n"], d["m"], seed)
        arrays = dict(Sigma=sigma, L=L, mu=mu, d=dd)
    elif spec.family == "sharpe":
        a, r, K = datagen.gen_sharpe(d["n"], seed)
        arrays = dict(a=a, r=np.array([r]), K=K)
    else:
        raise ValueError(f"unknown family {spec.family!r}")
    return Dataset(spec.family, seed, arrays, dict(d))


def save_dataset(ds: Dataset, out_dir, spec: ExperimentSpec = None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for name, arr in ds.arrays.items():
        fname = f"{name}.txt"
        if ds.family == "ct" and name == "A":
            textio.save_sparse(out / fname, arr)
        else:
            textio.save_dense(out / fname, arr)
        files.append(fname)
    manifest = dict(format_version=FORMAT_VERSION, family=ds.family, seed=ds.seed,
                    params=ds.params, files=files)
    if spec is not None:
        # the output dir is not part of the dataset; keep manifests path-independent
        manifest["config"] = serialize_config(replace(spec, outputs=OutputSpec()))
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return files


def load_dataset(in_dir) -> Dataset:
    src = Path(in_dir)
    manifest = json.loads((src / "manifest.json").read_text())
    arrays = {}
    for fname in manifest["files"]:
        name = fname[: -len(".txt")]
        if manifest["family"] == "ct" and name == "A":
            arrays[name] = textio.load_sparse(src / fname)
        else:
            a = textio.load_dense(src / fname)
            arrays[name] = a.ravel() if a.shape[1] == 1 and name not in ("L", "K") else a
    return Dataset(manifest["family"], manifest["seed"], arrays, manifest["params"])


def build_problem(spec: ExperimentSpec, ds: Dataset):
    """Return ``(problem, x0, x_star)``; ``x_star`` is ``None`` without a ground truth."""
    a, d = ds.arrays, spec.data
    if spec.family == "l1sk":
        A = dense_matrix(*np.shape(a["A"]), np.asarray(a["A"]).ravel())
        p = make_l1_sk(A, a["b"], d["lambda"], d["kappa"], d["lo"], d["hi"])
        return p, np.asarray(a["x0"], float).ravel(), np.asarray(a["xstar"]).ravel()
    if spec.family == "ct":
        A = sparse_matrix(a["A"])
        p = make_ct(A, a["b"], d["lambda"], d["side"], d["lo"], d["hi"], spec.admm)
        x0 = np.zeros(p.dim) if d["start"] == "zero" else p.feasible_start
        return p, x0, np.asarray(a["xstar"]).ravel()
    if spec.family == "portfolio":
        p = make_portfolio(a["Sigma"], a["L"], a["mu"], a["d"])
        return p, p.feasible_start, None
    if spec.family == "sharpe":
        K = np.atleast_2d(a["K"])
        p = make_sharpe(a["a"], float(np.ravel(a["r"])[0]), dense_matrix(*K.shape, K.ravel()))
        return p, p.feasible_start, None
    raise ValueError(f"unknown family {spec.family!r}")


def compute_metrics(spec, problem, x, x_star):
    """Metric dict for a final iterate; ``None`` marks a metric undefined for the family."""
    m = dict.fromkeys(METRIC_FIELDS)
    m["ObjVal"] = metrics.objective(problem, x)
    if problem.statres_support.kind != "unsupported":
        m["StatRes"] = metrics.statres(problem, x)
    if x_star is not None:
        m["Err"] = metrics.rel_err(x, x_star)
    if spec.family == "ct":
        m["RMSE"] = metrics.rmse(x, x_star)
        m["SSIM"] = metrics.ssim(x, x_star)
    if spec.family == "portfolio":
        m["Infeas"] = metrics.infeas_portfolio(x, problem.data["d"])
    if spec.family == "sharpe":
        m["Infeas"] = metrics.infeas_portfolio(x, np.full(x.size, np.inf))
    return m


def _row(spec, seed, **kw):
    row = dict.fromkeys(ROW_FIELDS)
    row.update(family=spec.family, params=spec.params_label(), seed=seed)
    row.update(kw)
    return row


def run_once(spec: ExperimentSpec, seed: int, dataset: Dataset = None):
    """Solve one instance. Returns ``(row, result)``; ``result`` is ``None`` on failure.

    Model violations are caught and reported in ``row["status"]``.
    """
    ds = dataset if dataset is not None else build_dataset(spec, seed)
    try:
        problem, x0, x_star = build_problem(spec, ds)
        t = time.perf_counter()
        res = solve(problem, spec.solver, x0)
        cpu = time.perf_counter() - t
        m = compute_metrics(spec, problem, res.x_final, x_star)
    except (ModelViolation, InfeasibleError) as exc:
        return _row(spec, seed, status=f"model_violation: {exc}", count=0), None
    if not all(v is None or math.isfinite(v) for v in m.values()):
        return _row(spec, seed, status="model_violation: non-finite metric", count=0), None
    row = _row(spec, seed, iterations=res.iterations, cpu_seconds=cpu,
               converged=res.converged, status="ok", count=1, **m)
    return row, res


def mean_row(spec, rows):
    ok = [r for r in rows if r["status"] == "ok"]
    out = _row(spec, "mean", status="mean", count=len(ok))
    if not ok:
        return out
    for k in METRIC_FIELDS + ("iterations", "cpu_seconds"):
        vals = [r[k] for r in ok if r[k] is not None]
        if vals:
            out[k] = math.fsum(float(v) for v in vals) / len(vals)
    out["converged"] = math.fsum(1.0 for r in ok if r["converged"]) / len(ok)
    return out


def run_bench(spec: ExperimentSpec, threads: int = 1):
    """Run ``spec.repetitions`` seeds ``base_seed + i``; returns ``(rows, mean)``."""
    seeds = [spec.base_seed + i for i in range(spec.repetitions)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = [r for r, _ in pool.map(lambda s: run_once(spec, s), seeds)]
    else:
        rows = [run_once(spec, s)[0] for s in seeds]
    return rows, mean_row(spec, rows)


def _cell(v, with_time=True, key=None):
    if key == "cpu_seconds" and not with_time:
        return "NA"
    if v is None:
        return "NA"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows, path=None, with_time=True):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ROW_FIELDS)
    for r in rows:
        w.writerow([_cell(r[k], with_time, k) for k in ROW_FIELDS])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_rows_csv(path):
    """Parse a results CSV back into dicts with typed values (``NA`` -> ``None``)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames) != ROW_FIELDS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        rows = []
        for r in reader:
            out = {}
            for k, v in r.items():
                if v == "NA":
                    out[k] = None
                elif k in METRIC_FIELDS or k == "cpu_seconds":
                    out[k] = float(v)
                elif k == "converged":
                    out[k] = v == "true" if v in ("true", "false") else float(v)
                elif k in ("iterations", "count"):
                    out[k] = float(v) if "." in v or "e" in v else int(v)
                else:
                    out[k] = v
            rows.append(out)
    return rows


def rows_to_json(rows, path=None):
    text = json.dumps(rows, indent=2) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text
