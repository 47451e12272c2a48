"""Experiment configuration: a strict sectioned ``key = value`` format.

Example::

    [experiment]
    family = portfolio
    preset = portfolio
    repetitions = 20

    [data]
    n = 200
    m = 5

Sections are ``[experiment]``, ``[data]``, ``[solver]`` and ``[output]``.
Unknown sections or keys, duplicate keys and malformed values are errors
reported with their line number. Blank lines and ``#`` comments are ignored.

Value precedence: built-in default < preset < explicit key < CLI flag.

Defaults
--------
=============  ===============  ==========================================
section        key              default
=============  ===============  ==========================================
experiment     family           (required)
experiment     preset           none
experiment     repetitions      1 (l1sk, portfolio presets: 20)
experiment     base_seed        0
solver         mode             linesearch
solver         delta            none (fixed mode: 0.5 / L)
solver         sigma            1.0
solver         rho1             1e-3
solver         q                0.95
solver         T                5
solver         N                250
solver         varsigma         0.8
solver         tol              1e-6
solver         max_iter         5000
solver         delta_min        1e-12
solver         delta_max        1e6
solver         override_guard   false
solver         record_statres   false
solver         admm_alpha       5.0
solver         admm_beta        5e-4
solver         admm_max_outer   3
solver         admm_cg_tol      1e-8
solver         admm_cg_max      100
output         dir              out
output         trace            true
output         json             true
data (l1sk)    m n kappa F      (required)
data (l1sk)    lambda lo hi     1e-3, -1.0, 1.0
data (l1sk)    noise            0.0
data (ct)      side             (required)
data (ct)      angles           30
data (ct)      max_angle        150.0
data (ct)      rays             0 (auto: ceil(side*sqrt 2))
data (ct)      noise            0.0
data (ct)      lambda           0.25 (1.0 when noise >= 0.5% under the ct preset)
data (ct)      lo hi            0.0, 1.0
data (ct)      start            zero
data (portf.)  n m              (required)
data (sharpe)  n                (required)
=============  ===============  ==========================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

from .prox import AdmmConfig
from .solver import SolverConfig

__all__ = ["ConfigError", "ExperimentSpec", "OutputSpec", "PRESETS", "parse_config",
           "serialize_config", "load_config", "apply_overrides"]

FAMILIES = ("l1sk", "ct", "portfolio", "sharpe")


class ConfigError(ValueError):
    def __init__(self, msg, line=None):
        super().__init__(msg if line is None else f"line {line}: {msg}")
        self.line = line


def _bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "1"):
        return True
    if t in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text):
    return None if text.strip().lower() == "none" else float(text)


def _opt_str(text):
    return None if text.strip().lower() == "none" else text.strip()


def _uint(text):
    v = int(text)
    if v < 0 or v >= 2 ** 64:
        raise ValueError(f"not an unsigned 64-bit integer: {text!r}")
    return v


def _fmt(v):
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


# key -> (parser, default); None default with required=True marks a required key
EXPERIMENT_KEYS = {
    "family": (str, None),
    "preset": (_opt_str, None),
    "repetitions": (int, 1),
    "base_seed": (_uint, 0),
}

SOLVER_KEYS = {
    "mode": (str, "linesearch"),
    "delta": (_opt_float, None),
    "sigma": (float, 1.0),
    "rho1": (float, 1e-3),
    "q": (float, 0.95),
    "T": (int, 5),
    "N": (int, 250),
    "varsigma": (float, 0.8),
    "tol": (float, 1e-6),
    "max_iter": (int, 5000),
    "delta_min": (float, 1e-12),
    "delta_max": (float, 1e6),
    "override_guard": (_bool, False),
    "record_statres": (_bool, False),
}

ADMM_KEYS = {
    "admm_alpha": (float, 5.0),
    "admm_beta": (float, 5e-4),
    "admm_max_outer": (int, 3),
    "admm_cg_tol": (float, 1e-8),
    "admm_cg_max": (int, 100),
}

OUTPUT_KEYS = {
    "dir": (str, "out"),
    "trace": (_bool, True),
    "json": (_bool, True),
}

REQUIRED = object()

DATA_KEYS = {
    "l1sk": {
        "m": (int, REQUIRED), "n": (int, REQUIRED), "kappa": (int, REQUIRED),
        "F": (float, REQUIRED), "lambda": (float, 1e-3), "lo": (float, -1.0),
        "hi": (float, 1.0), "noise": (float, 0.0),
    },
    "ct": {
        "side": (int, REQUIRED), "angles": (int, 30), "max_angle": (float, 150.0),
        "rays": (int, 0), "noise": (float, 0.0), "lambda": (float, 0.25),
        "lo": (float, 0.0), "hi": (float, 1.0), "start": (str, "zero"),
    },
    "portfolio": {"n": (int, REQUIRED), "m": (int, REQUIRED)},
    "sharpe": {"n": (int, REQUIRED)},
}

# Solver and data settings per benchmark family.
PRESETS = {
    "l1sk": dict(
        family="l1sk",
        solver=dict(sigma=1.35, rho1=1e-3, varsigma=0.8, q=0.9, T=20, N=250,
                    tol=1e-6, max_iter=5000),
        data=dict(m=64, n=1024, kappa=4, F=1.0, **{"lambda": 1e-3}),
        repetitions=20,
    ),
    "ct": dict(
        family="ct",
        solver=dict(sigma=1.0, varsigma=0.8, q=0.95, T=5, rho1=1e-3, N=250, tol=1e-6,
                    max_iter=5000, admm_alpha=5.0, admm_beta=5e-4, admm_max_outer=3),
        data=dict(side=32, angles=30, max_angle=150.0),
    ),
    "portfolio": dict(
        family="portfolio",
        solver=dict(sigma=1.05, rho1=1e-3, varsigma=0.82, q=0.95, T=20, N=250,
                    tol=1e-8, max_iter=3000),
        data=dict(n=200, m=5),
        repetitions=20,
    ),
    "sharpe": dict(
        family="sharpe",
        solver=dict(tol=1e-8, max_iter=3000),
        data=dict(n=10),
    ),
}


@dataclass(frozen=True)
class OutputSpec:
    dir: str = "out"
    trace: bool = True
    json: bool = True


@dataclass
class ExperimentSpec:
    family: str
    data: dict
    solver: SolverConfig = field(default_factory=SolverConfig)
    admm: AdmmConfig = field(default_factory=AdmmConfig)
    repetitions: int = 1
    base_seed: int = 0
    preset: str = None
    outputs: OutputSpec = field(default_factory=OutputSpec)

    def params_label(self):
        return ";".join(f"{k}={_fmt(v)}" for k, v in self.data.items())


def _tokenize(text):
    """Yield ``(line_no, section, key, value)``."""
    section = None
    seen = set()
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", no)
            section = line[1:-1].strip()
            if section not in ("experiment", "data", "solver", "output"):
                raise ConfigError(f"unknown section [{section}]", no)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", no)
        if section is None:
            raise ConfigError("key outside of any section", no)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", no)
        if (section, key) in seen:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", no)
        seen.add((section, key))
        yield no, section, key, value


def _convert(table, section, key, value, no):
    if key not in table:
        raise ConfigError(f"unknown key {key!r} in section [{section}]", no)
    parser = table[key][0]
    try:
        return parser(value)
    except ValueError as exc:
        raise ConfigError(f"bad value for {section}.{key}: {exc}", no) from None


def parse_config(text, preset=None) -> ExperimentSpec:
    """Parse config text into an :class:`ExperimentSpec`.

    ``preset`` (e.g. from a CLI flag) takes precedence over the file's
    ``experiment.preset``.
    """
    raw = {"experiment": {}, "data": {}, "solver": {}, "output": {}}
    lines = {}
    for no, section, key, value in _tokenize(text):
        raw[section][key] = value
        lines[(section, key)] = no

    exp = {k: _convert(EXPERIMENT_KEYS, "experiment", k, v, lines[("experiment", k)])
           for k, v in raw["experiment"].items()}
    stable = {**SOLVER_KEYS, **ADMM_KEYS}
    # unknown keys are reported before anything that depends on values
    for section, table in (("solver", stable), ("output", OUTPUT_KEYS)):
        for k in raw[section]:
            if k not in table:
                raise ConfigError(f"unknown key {k!r} in section [{section}]",
                                  lines[(section, k)])
    preset = preset if preset is not None else exp.get("preset")
    pre = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r} (known: {', '.join(PRESETS)})")
        pre = PRESETS[preset]
    family = exp.get("family", pre.get("family"))
    if family is None:
        raise ConfigError("missing required key 'family' in section [experiment]")
    if family not in FAMILIES:
        raise ConfigError(f"unknown family {family!r} (known: {', '.join(FAMILIES)})",
                          lines.get(("experiment", "family")))

    dtable = DATA_KEYS[family]
    for k in raw["data"]:
        if k not in dtable:
            raise ConfigError(f"unknown key {k!r} in section [data] for family {family}",
                              lines[("data", k)])
    data = {k: d for k, (_, d) in dtable.items()}
    for k, v in pre.get("data", {}).items():
        if pre.get("family") == family:
            data[k] = v
    explicit = {}
    for k, v in raw["data"].items():
        explicit[k] = _convert(dtable, "data", k, v, lines[("data", k)])
    data.update(explicit)
    if family == "ct" and preset == "ct" and "lambda" not in explicit:
        data["lambda"] = 1.0 if data["noise"] >= 0.005 else 0.25
    missing = [k for k, v in data.items() if v is REQUIRED]
    if missing:
        raise ConfigError(f"missing required key(s) {', '.join(missing)} in section [data]")
    for k, (conv, _) in dtable.items():
        if conv is float:
            data[k] = float(data[k])

    solver = {k: d for k, (_, d) in stable.items()}
    solver.update(pre.get("solver", {}))
    for k, v in raw["solver"].items():
        solver[k] = _convert(stable, "solver", k, v, lines[("solver", k)])
    out = {k: d for k, (_, d) in OUTPUT_KEYS.items()}
    for k, v in raw["output"].items():
        out[k] = _convert(OUTPUT_KEYS, "output", k, v, lines[("output", k)])

    admm_kw = {k[len("admm_"):]: solver.pop(k) for k in list(ADMM_KEYS)}
    try:
        scfg = SolverConfig(**solver)
        acfg = AdmmConfig(**admm_kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid solver settings: {exc}") from None
    spec = ExperimentSpec(
        family=family, data=data, solver=scfg, admm=acfg,
        repetitions=exp.get("repetitions", pre.get("repetitions", 1)), base_seed=exp.get("base_seed", 0),
        preset=preset, outputs=OutputSpec(**out),
    )
    validate(spec)
    return spec


def validate(spec):
    if spec.repetitions < 1:
        raise ConfigError("experiment.repetitions must be >= 1")
    d = spec.data
    if spec.family == "l1sk":
        if min(d["m"], d["n"]) < 1 or not d["F"] > 0:
            raise ConfigError("data: need m, n >= 1 and F > 0")
        if not 1 <= d["kappa"] <= d["n"] or d["kappa"] * 2 * d["F"] > d["n"]:
            raise ConfigError("data: need 1 <= kappa and kappa*2F <= n")
        if d["lo"] > d["hi"] or d["lambda"] <= 0 or d["noise"] < 0:
            raise ConfigError("data: need lo <= hi, lambda > 0, noise >= 0")
    elif spec.family == "ct":
        if d["side"] < 16 or d["angles"] < 1 or d["rays"] < 0:
            raise ConfigError("data: need side >= 16, angles >= 1, rays >= 0")
        if d["lo"] > d["hi"] or d["lambda"] <= 0 or d["noise"] < 0:
            raise ConfigError("data: need lo <= hi, lambda > 0, noise >= 0")
        if d["start"] not in ("zero", "backprojection"):
            raise ConfigError("data.start must be 'zero' or 'backprojection'")
    elif spec.family == "portfolio":
        if not 0 < d["m"] < d["n"]:
            raise ConfigError("data: need 0 < m < n")
    elif spec.family == "sharpe":
        if d["n"] < 1:
            raise ConfigError("data: need n >= 1")


def serialize_config(spec) -> str:
    """Canonical text: every key written explicitly, fixed order."""
    out = ["[experiment]", f"family = {spec.family}", f"preset = {_fmt(spec.preset)}",
           f"repetitions = {spec.repetitions}", f"base_seed = {spec.base_seed}", "",
           "[data]"]
    for k in DATA_KEYS[spec.family]:
        out.append(f"{k} = {_fmt(spec.data[k])}")
    out += ["", "[solver]"]
    for k in SOLVER_KEYS:
        out.append(f"{k} = {_fmt(getattr(spec.solver, k))}")
    for k in ADMM_KEYS:
        out.append(f"{k} = {_fmt(getattr(spec.admm, k[len('admm_'):]))}")
    out += ["", "[output]"]
    for f in fields(OutputSpec):
        out.append(f"{f.name} = {_fmt(getattr(spec.outputs, f.name))}")
    return "\n".join(out) + "\n"


def load_config(path, preset=None):
    with open(path) as fh:
        return parse_config(fh.read(), preset=preset)


def apply_overrides(spec, seed=None, out=None, mode=None):
    """CLI flag overrides on top of a parsed spec."""
    if seed is not None:
        spec = replace(spec, base_seed=seed)
    if out is not None:
        spec = replace(spec, outputs=replace(spec.outputs, dir=out))
    if mode is not None:
        spec = replace(spec, solver=spec.solver.with_(mode=mode))
    return spec


def preset_spec(name):
    """Spec built from a preset alone (no config file)."""
    return parse_config(f"[experiment]\npreset = {name}\n")


def is_finite(v):
    return v is None or (isinstance(v, (int, float)) and math.isfinite(v))
