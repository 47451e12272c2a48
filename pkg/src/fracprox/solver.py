"""Single-loop proximal subgradient iterations for fractional programs.

Two drivers share one iteration:

* ``solve_fixed`` runs the relaxed scheme with a constant step ``delta``,
* ``solve_linesearch`` picks ``delta`` per iteration from a Barzilai-Borwein
  style seed and backtracks against a nonmonotone (windowed max) test.

Every iteration is recorded in an :class:`IterationTrace` so the descent
and Fenchel-Young diagnostics can be replayed after the fact.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .problems import ModelViolation, theta as merit

log = logging.getLogger(__name__)

EPS = np.finfo(float).eps

__all__ = [
    "SolverConfig",
    "SolverState",
    "TraceRecord",
    "IterationTrace",
    "SolveResult",
    "fpsa_step",
    "solve",
    "solve_fixed",
    "solve_linesearch",
    "initial_delta",
    "stop_check",
    "window_max",
]


@dataclass(frozen=True)
class SolverConfig:
    """Tunables for both solver modes.

    ``delta`` is only read in fixed mode (``None`` means ``0.5 / L``).
    ``override_guard`` allows a fixed ``delta >= 1/L``.
    """

    mode: str = "linesearch"
    delta: Optional[float] = None
    sigma: float = 1.0
    rho1: float = 1e-3
    q: float = 0.95
    T: int = 5
    N: int = 250
    varsigma: float = 0.8
    tol: float = 1e-6
    max_iter: int = 5000
    delta_min: float = 1e-12
    delta_max: float = 1e6
    override_guard: bool = False
    record_statres: bool = False

    def __post_init__(self):
        if self.mode not in ("fixed", "linesearch"):
            raise ValueError(f"mode must be 'fixed' or 'linesearch', got {self.mode!r}")
        if not 0 < self.sigma < 2:
            raise ValueError("sigma must lie in (0, 2)")
        if not 0 < self.q < 1:
            raise ValueError("q must lie in (0, 1)")
        if not 0 < self.varsigma <= 1:
            raise ValueError("varsigma must lie in (0, 1]")
        if self.rho1 <= 0 or self.tol <= 0:
            raise ValueError("rho1 and tol must be positive")
        if self.T < 1 or self.N < 1 or self.max_iter < 1:
            raise ValueError("T, N and max_iter must be positive integers")
        if not 0 < self.delta_min <= self.delta_max:
            raise ValueError("need 0 < delta_min <= delta_max")
        if self.delta is not None and self.delta <= 0:
            raise ValueError("delta must be positive")

    def with_(self, **kw):
        return replace(self, **kw)


@dataclass
class SolverState:
    x: np.ndarray
    y: Optional[np.ndarray]
    u: np.ndarray
    theta_k: float
    k: int = 0
    admm_state: object = None


@dataclass(frozen=True)
class TraceRecord:
    k: int
    theta: float
    phi: float
    f_kx: float
    nu: float
    delta: float
    backtracks: int
    step_norm: float
    u_step_norm: float
    statres: Optional[float]
    wall_ms: float
    # acceptance bookkeeping (line-search mode)
    window_max: float = math.inf
    exhausted: bool = False


CSV_HEADER = ("k", "theta", "phi", "f_kx", "nu", "delta", "backtracks",
              "step_norm", "u_step_norm", "statres", "wall_ms")


@dataclass
class IterationTrace:
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def to_csv(self, path=None, with_time=True):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.records:
            w.writerow([
                r.k, repr(r.theta), repr(r.phi), repr(r.f_kx), repr(r.nu),
                repr(r.delta), r.backtracks, repr(r.step_norm), repr(r.u_step_norm),
                "NA" if r.statres is None else repr(r.statres),
                repr(r.wall_ms) if with_time else "NA",
            ])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


@dataclass
class SolveResult:
    x_final: np.ndarray
    theta_final: float
    iterations: int
    converged: bool
    trace: IterationTrace
    warnings: list
    theta0: float
    f0: float
    u_final: np.ndarray = None
    config: SolverConfig = None


def stop_check(x_new, x_old, tol, k, max_iter):
    """Relative-step test ``||x_new - x_old|| / max(||x_old||, eps) < tol`` or ``k > max_iter``."""
    if k > max_iter:
        return True
    return np.linalg.norm(x_new - x_old) / max(np.linalg.norm(x_old), EPS) < tol


def initial_delta(x_k, x_prev, grad_k, grad_prev, varsigma, k, delta_min, delta_max):
    """Seed step for the backtracking loop, clamped to ``[delta_min, delta_max]``."""
    if k == 0:
        val = np.linalg.norm(x_k) / max(np.linalg.norm(grad_k), EPS)
    else:
        val = varsigma * np.linalg.norm(x_k - x_prev) / max(
            np.linalg.norm(grad_k - grad_prev), EPS)
    return float(min(max(val, delta_min), delta_max))


def window_max(thetas, k, T):
    """Max of ``theta_s`` over the last ``T`` indices ``max(k-T+1, 0) <= s <= k``.

    ``thetas`` maps index -> value; indices without a value (an undefined
    starting merit) are skipped. Returns ``inf`` for an empty window.
    """
    vals = [thetas[s] for s in range(max(k - T + 1, 0), k + 1) if s in thetas]
    return max(vals) if vals else math.inf


def _statres_or_none(problem, x):
    if problem.statres_support.kind == "unsupported":
        return None
    from .metrics import statres
    return statres(problem, x)


def _initial_merit(problem, x0):
    """``(theta0, f0)``; ``theta0`` is ``None`` when ``f(K x0)`` vanishes."""
    f0 = problem.f_value(problem.K.apply(x0))
    if f0 > 0:
        return problem.numerator(x0) / f0, f0
    return None, f0


def _check_start(problem, x0):
    x0 = np.array(x0, dtype=float)
    if x0.shape != (problem.dim,):
        raise ValueError(f"x0 must have shape ({problem.dim},)")
    if not problem.feasible(x0):
        raise ModelViolation("x0 is not feasible")
    return x0


def fpsa_step(problem, state, delta, sigma, iteration=None):
    """One relaxed proximal subgradient step with constant ``delta``.

    Returns ``(new_state, info)``; ``info`` holds phi, f(Kx^{k+1}), nu and
    the step norms.
    """
    x, u, th = state.x, state.u, state.theta_k
    Kx = problem.K.apply(x)
    y = problem.f_subgradient(Kx)
    f_prev = problem.f_value(Kx)
    z = u - delta * problem.h_gradient(x) + th * delta * problem.K.adjoint(y)
    incumbent, margin = None, 0.0
    if problem.inexact_prox and problem.lipschitz_grad_h:
        # an inexact prox must still beat x^k by the descent-lemma curvature
        incumbent, margin = x, 0.5 * problem.lipschitz_grad_h
    x_new, admm = problem.constrained_prox(z, delta, warm=state.admm_state,
                                           incumbent=incumbent, margin=margin)
    u_new = (1.0 - sigma) * u + sigma * x_new
    mv = merit(problem, x_new, u_new, delta, iteration)
    nu = f_prev + float(y @ problem.K.apply(x_new - x))
    new = SolverState(x_new, y, u_new, mv.theta, state.k + 1, admm)
    info = dict(phi=mv.phi, f_kx=mv.f_at_Kx, nu=nu,
                step_norm=float(np.linalg.norm(x_new - x)),
                u_step_norm=float(np.linalg.norm(u_new - u)))
    return new, info


def solve_fixed(problem, config, x0=None):
    """Constant-step iteration until the relative step drops below ``tol``."""
    cfg = config
    x0 = _check_start(problem, problem.feasible_start if x0 is None else x0)
    L = problem.lipschitz_grad_h
    delta = cfg.delta
    if delta is None:
        delta = 0.5 / L if L else 1.0
    if L and delta * L >= 1.0 and not cfg.override_guard:
        raise ValueError(f"delta = {delta:.3e} violates delta < 1/L = {1.0 / L:.3e}")
    th0, f0 = _initial_merit(problem, x0)
    if th0 is None:
        raise ModelViolation("f(K x0) is not positive", 0)

    warnings = []
    trace = IterationTrace()
    state = SolverState(x0, None, x0.copy(), th0, 0, None)
    t0 = time.perf_counter()
    converged = False
    for k in range(cfg.max_iter):
        new, info = fpsa_step(problem, state, delta, cfg.sigma, iteration=k + 1)
        trace.records.append(TraceRecord(
            k=k + 1, theta=new.theta_k, phi=info["phi"], f_kx=info["f_kx"],
            nu=info["nu"], delta=delta, backtracks=0,
            step_norm=info["step_norm"], u_step_norm=info["u_step_norm"],
            statres=_statres_or_none(problem, new.x) if cfg.record_statres else None,
            wall_ms=1e3 * (time.perf_counter() - t0),
        ))
        done = stop_check(new.x, state.x, cfg.tol, k, cfg.max_iter)
        state = new
        if done:
            converged = True
            break
    if not converged:
        warnings.append(f"max_iter={cfg.max_iter} reached without meeting tol")
    return SolveResult(state.x, state.theta_k, len(trace), converged, trace, warnings,
                       th0, f0, state.u, cfg)


def solve_linesearch(problem, config, x0=None):
    """Nonmonotone backtracking variant.

    Candidates use ``delta_{k,j} = delta_{k,0} * q**(j-1)`` and are accepted
    when ``theta(x_cand, u^k; delta) < window_max - rho1*||x_cand - x^k||^2``.
    If all ``N`` candidates fail, the last one is kept and a warning logged.
    """
    cfg = config
    x0 = _check_start(problem, problem.feasible_start if x0 is None else x0)
    th0, f0 = _initial_merit(problem, x0)
    warnings = []
    if th0 is None:
        # only the start may have f(Kx) = 0; the subgradient selector returns
        # 0 there so theta_0 drops out of the first step
        warnings.append("f(K x0) = 0: theta_0 undefined, first step accepted unconditionally")
    thetas = {} if th0 is None else {0: th0}
    trace = IterationTrace()
    x, u, th = x0, x0.copy(), (0.0 if th0 is None else th0)
    grad = problem.h_gradient(x)
    x_prev = grad_prev = None
    admm = None
    t0 = time.perf_counter()
    converged = False
    L = problem.lipschitz_grad_h

    for k in range(cfg.max_iter):
        if k == 0 and np.linalg.norm(x) == 0.0 and L:
            d0 = float(min(max(1.0 / L, cfg.delta_min), cfg.delta_max))
        else:
            d0 = initial_delta(x, x_prev, grad, grad_prev, cfg.varsigma, k,
                               cfg.delta_min, cfg.delta_max)
        Kx = problem.K.apply(x)
        y = problem.f_subgradient(Kx)
        f_prev = problem.f_value(Kx)
        Kty = problem.K.adjoint(y)
        ref = window_max(thetas, k, cfg.T)
        accepted = False
        for j in range(1, cfg.N + 1):
            delta = d0 * cfg.q ** (j - 1)
            z = u - delta * grad + th * delta * Kty
            cand, cand_admm = problem.constrained_prox(z, delta, warm=admm)
            mv = merit(problem, cand, u, delta, k + 1)
            dx = cand - x
            if mv.theta < ref - cfg.rho1 * float(dx @ dx):
                accepted = True
                break
        if not accepted:
            msg = f"iteration {k + 1}: line search exhausted N={cfg.N} trials"
            warnings.append(msg)
            log.warning(msg)
        u_new = (1.0 - cfg.sigma) * u + cfg.sigma * cand
        nu = f_prev + float(y @ problem.K.apply(cand - x))
        trace.records.append(TraceRecord(
            k=k + 1, theta=mv.theta, phi=mv.phi, f_kx=mv.f_at_Kx, nu=nu,
            delta=delta, backtracks=j - 1,
            step_norm=float(np.linalg.norm(dx)),
            u_step_norm=float(np.linalg.norm(u_new - u)),
            statres=_statres_or_none(problem, cand) if cfg.record_statres else None,
            wall_ms=1e3 * (time.perf_counter() - t0),
            window_max=ref, exhausted=not accepted,
        ))
        thetas[k + 1] = mv.theta
        thetas.pop(k + 1 - cfg.T, None)
        done = stop_check(cand, x, cfg.tol, k, cfg.max_iter)
        x_prev, grad_prev = x, grad
        x, u, th, admm = cand, u_new, mv.theta, cand_admm
        grad = problem.h_gradient(x)
        if done:
            converged = True
            break
    if not converged:
        warnings.append(f"max_iter={cfg.max_iter} reached without meeting tol")
    return SolveResult(x, th, len(trace), converged, trace, warnings,
                       math.nan if th0 is None else th0, f0, u, cfg)


def solve(problem, config, x0=None):
    if config.mode == "fixed":
        return solve_fixed(problem, config, x0)
    return solve_linesearch(problem, config, x0)
