"""Fractional programs ``min_{x in S} (g(x) + h(x)) / f(Kx)`` and instances."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import prox as px
from .operators import LinearOperator, grad2d, identity, power_norm, row_vector

__all__ = [
    "ModelViolation",
    "StatresSupport",
    "FractionalProblem",
    "MeritValue",
    "phi",
    "theta",
    "make_l1_sk",
    "make_ct",
    "make_portfolio",
    "make_sharpe",
    "DENOM_FLOOR",
]

DENOM_FLOOR = 1e-14
FEAS_TOL = 1e-9


class ModelViolation(RuntimeError):
    """A standing assumption of the model failed (infeasible point, f(Kx) <= 0, ...)."""

    def __init__(self, msg, iteration=None):
        super().__init__(msg if iteration is None else f"iteration {iteration}: {msg}")
        self.iteration = iteration


@dataclass(frozen=True)
class StatresSupport:
    """How to evaluate ``dg(x) + N_S(x)`` for the stationarity residual.

    ``kind == "separable"``: ``intervals(x)`` returns arrays ``(lo, hi)`` of
    per-coordinate intervals (entries may be infinite).
    ``kind == "linear_constraint"``: ``g == 0`` and
    ``S = {sum(x) = 1, lo <= x <= hi}``; ``lo``/``hi`` hold the box.
    """

    kind: str
    intervals: Optional[Callable] = None
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None


@dataclass
class FractionalProblem:
    dim: int
    K: LinearOperator
    h_value: Callable
    h_gradient: Callable
    lipschitz_grad_h: Optional[float]
    g_value: Callable
    f_value: Callable
    f_subgradient: Callable
    # (z, delta, warm=None, incumbent=None, margin=0.0) -> (x, state)
    constrained_prox: Callable
    feasible: Callable
    feasible_start: np.ndarray
    statres_support: StatresSupport
    family: str = "custom"
    data: dict = field(default_factory=dict)
    # numerator must stay >= 0 on iterates (checked where the family can break it)
    check_numerator: bool = False
    inexact_prox: bool = False

    def numerator(self, x):
        return self.g_value(x) + self.h_value(x)

    def denominator(self, x, iteration=None):
        fk = self.f_value(self.K.apply(x))
        if not fk > DENOM_FLOOR:
            raise ModelViolation(f"f(Kx) = {fk:.3e} is not positive", iteration)
        return fk

    def objective(self, x, iteration=None):
        return self.numerator(x) / self.denominator(x, iteration)


@dataclass(frozen=True)
class MeritValue:
    phi: float
    theta: float
    f_at_Kx: float


def phi(problem, x, u, delta, iteration=None):
    """``g(x) + h(x) + ||x - u||^2 / (2 delta)`` for feasible ``x``."""
    if not problem.feasible(x):
        raise ModelViolation("x is outside S (indicator is +inf)", iteration)
    d = x - u
    num = problem.numerator(x)
    if problem.check_numerator and num < -1e-12:
        raise ModelViolation(f"numerator g+h = {num:.3e} is negative", iteration)
    return num + (d @ d) / (2.0 * delta)


def theta(problem, x, u, delta, iteration=None) -> MeritValue:
    p = phi(problem, x, u, delta, iteration)
    fk = problem.denominator(x, iteration)
    return MeritValue(p, p / fk, fk)


def _box(lo, hi, n):
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (n,)).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (n,)).copy()
    if np.any(lo > hi):
        raise ValueError("box has lo > hi")
    return lo, hi


def _in_box(lo, hi):
    def feasible(x):
        return bool(np.all(x >= lo - FEAS_TOL) and np.all(x <= hi + FEAS_TOL))
    return feasible


def _plain(prox_fn):
    """Adapt a stateless ``(z, delta) -> x`` prox to the solver signature."""

    def constrained_prox(z, delta, warm=None, incumbent=None, margin=0.0):
        return prox_fn(z, delta), None

    return constrained_prox


def make_l1_sk(A, b, lam, kappa, lo=-1.0, hi=1.0) -> FractionalProblem:
    """``(lam*||x||_1 + 0.5*||Ax - b||^2) / ||x||_(kappa)`` over a box."""
    n = A.input_dim
    if not 1 <= kappa <= n:
        raise ValueError(f"kappa must lie in [1, {n}], got {kappa}")
    b = np.asarray(b, dtype=float)
    lo, hi = _box(lo, hi, n)

    def h_value(x):
        r = A.apply(x) - b
        return 0.5 * (r @ r)

    def h_gradient(x):
        return A.adjoint(A.apply(x) - b)

    def intervals(x):
        ilo = np.where(x > 0, lam, -lam)
        ihi = np.where(x < 0, -lam, lam)
        ilo = np.where(x <= lo, -np.inf, ilo)
        ihi = np.where(x >= hi, np.inf, ihi)
        return ilo, ihi

    start = np.clip(np.zeros(n), lo, hi)
    if not np.any(start):
        start = np.clip(np.full(n, 0.5), lo, hi)
    return FractionalProblem(
        dim=n,
        K=identity(n),
        h_value=h_value,
        h_gradient=h_gradient,
        lipschitz_grad_h=A.norm_estimate ** 2,
        g_value=lambda x: lam * np.abs(x).sum(),
        f_value=lambda w: px.topk_norm(w, kappa),
        f_subgradient=lambda w: px.topk_subgradient(w, kappa),
        constrained_prox=_plain(lambda z, d: px.prox_l1_box(z, lam * d, lo, hi)),
        feasible=_in_box(lo, hi),
        feasible_start=start,
        statres_support=StatresSupport("separable", intervals=intervals, lo=lo, hi=hi),
        family="l1sk",
        data=dict(A=A, b=b, lam=lam, kappa=kappa, lo=lo, hi=hi),
    )


def make_ct(A, b, lam, side, lo=0.0, hi=1.0, admm_cfg=px.AdmmConfig()) -> FractionalProblem:
    """``(lam*||grad x||_1 + 0.5*||Ax - b||^2) / ||grad x||_2`` over a box."""
    n = side * side
    if A.input_dim != n:
        raise ValueError(f"A has {A.input_dim} columns, expected {n}")
    b = np.asarray(b, dtype=float)
    lo, hi = _box(lo, hi, n)
    G = grad2d(side)

    def h_value(x):
        r = A.apply(x) - b
        return 0.5 * (r @ r)

    def h_gradient(x):
        return A.adjoint(A.apply(x) - b)

    def constrained_prox(z, delta, warm=None, incumbent=None, margin=0.0):
        return px.tv_prox_admm(z, lam, delta, lo, hi, admm_cfg, warm=warm,
                               incumbent=incumbent, margin=margin)

    # normalised back-projection: a nonconstant feasible image
    bp = A.adjoint(b)
    scale = np.abs(bp).max()
    start = np.clip(bp / scale if scale > 0 else bp, lo, hi)
    prob = FractionalProblem(
        dim=n,
        K=G,
        h_value=h_value,
        h_gradient=h_gradient,
        lipschitz_grad_h=A.norm_estimate ** 2,
        g_value=lambda x: lam * np.abs(G.apply(x)).sum(),
        f_value=lambda w: float(np.linalg.norm(w)),
        f_subgradient=px.l2_subgradient,
        constrained_prox=constrained_prox,
        feasible=_in_box(lo, hi),
        feasible_start=start,
        statres_support=StatresSupport("unsupported"),
        family="ct",
        data=dict(A=A, b=b, lam=lam, side=side, lo=lo, hi=hi, admm=admm_cfg),
        inexact_prox=True,
    )
    prob.denominator(start)
    return prob


def make_portfolio(sigma_diag, L, mu, d) -> FractionalProblem:
    """``x^T V x / mu^T x`` over ``{sum(x) = 1, 0 <= x <= d}``, ``V = Sigma + L L^T``."""
    sig = np.asarray(sigma_diag, dtype=float).ravel()
    n = sig.size
    L = np.asarray(L, dtype=float).reshape(n, -1)
    mu = np.asarray(mu, dtype=float).ravel()
    d = np.asarray(d, dtype=float).ravel()
    if np.any(mu <= 0):
        raise ValueError("mu must be componentwise positive")
    if np.any(d < 0) or d.sum() < 1.0:
        raise px.InfeasibleError(f"simplex-box set is empty: sum(d) = {d.sum()}")
    Lt = L.T.copy()

    def vmul(x):
        return sig * x + L @ (Lt @ x)

    v_norm = power_norm(vmul, vmul, n)
    lo = np.zeros(n)

    def feasible(x):
        return bool(abs(x.sum() - 1.0) <= FEAS_TOL and np.all(x >= -FEAS_TOL)
                    and np.all(x <= d + FEAS_TOL))

    return FractionalProblem(
        dim=n,
        K=row_vector(mu),
        h_value=lambda x: float(x @ vmul(x)),
        h_gradient=lambda x: 2.0 * vmul(x),
        lipschitz_grad_h=2.0 * v_norm,
        g_value=lambda x: 0.0,
        f_value=lambda w: float(w[0]),
        f_subgradient=lambda w: np.ones(1),
        constrained_prox=_plain(lambda z, delta: px.project_simplex_box(z, d)),
        feasible=feasible,
        feasible_start=np.full(n, 1.0 / n),
        statres_support=StatresSupport("linear_constraint", lo=lo, hi=d.copy()),
        family="portfolio",
        data=dict(sigma=sig, L=L, mu=mu, d=d, vmul=vmul),
    )


def make_sharpe(a, r, K_chol) -> FractionalProblem:
    """``(r - a^T x) / ||K x||`` over the unit simplex, ``C = K^T K``."""
    a = np.asarray(a, dtype=float).ravel()
    n = a.size
    if K_chol.input_dim != n:
        raise ValueError(f"K has {K_chol.input_dim} columns, expected {n}")
    r = float(r)

    def feasible(x):
        return bool(abs(x.sum() - 1.0) <= FEAS_TOL and np.all(x >= -FEAS_TOL))

    prob = FractionalProblem(
        dim=n,
        K=K_chol,
        h_value=lambda x: r - float(a @ x),
        h_gradient=lambda x: -a.copy(),
        lipschitz_grad_h=0.0,
        g_value=lambda x: 0.0,
        f_value=lambda w: float(np.linalg.norm(w)),
        f_subgradient=px.l2_subgradient,
        constrained_prox=_plain(lambda z, delta: px.project_simplex(z)),
        feasible=feasible,
        feasible_start=np.full(n, 1.0 / n),
        statres_support=StatresSupport("linear_constraint", lo=np.zeros(n),
                                       hi=np.full(n, np.inf)),
        family="sharpe",
        data=dict(a=a, r=r, K=K_chol),
        check_numerator=True,
    )
    if prob.numerator(prob.feasible_start) < 0:
        raise ModelViolation("r - a^T x < 0 at the feasible start")
    prob.denominator(prob.feasible_start)
    return prob
