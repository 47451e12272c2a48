"""Evaluation metrics for solver outputs."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .operators import side_of
from .problems import ModelViolation

EPS = np.finfo(float).eps

__all__ = ["StatresUnavailable", "statres", "rel_err", "rmse", "ssim",
           "infeas_portfolio", "objective"]


class StatresUnavailable(ValueError):
    """The instance has no tractable description of dg + N_S."""


def _dist_to_intervals(t, lo, hi):
    return np.where(t < lo, lo - t, np.where(t > hi, t - hi, 0.0))


def _linear_constraint_residual(a, at_lo, at_hi, tol=1e-12):
    """``min_eta sqrt(sum_i dist(a_i + eta, N_i)^2)`` for box normal cones ``N_i``.

    ``N_i`` is ``(-inf, 0]`` at a lower bound, ``[0, inf)`` at an upper bound
    and ``{0}`` otherwise. The squared distance is convex piecewise quadratic
    in ``eta``; its derivative is bisected.
    """

    def resid(eta):
        s = a + eta
        return np.where(at_lo, np.minimum(s, 0.0), np.where(at_hi, np.maximum(s, 0.0), s))

    def slope(eta):
        return resid(eta).sum()

    span = np.abs(a).max() + 1.0
    lo, hi = -span, span
    # slope is nondecreasing; if it is flat at 0 over a whole side we are done
    if slope(lo) >= 0:
        eta = lo
    elif slope(hi) <= 0:
        eta = hi
    else:
        while hi - lo > tol * max(1.0, abs(lo), abs(hi)):
            mid = 0.5 * (lo + hi)
            if slope(mid) > 0:
                hi = mid
            else:
                lo = mid
        eta = 0.5 * (lo + hi)
    r = resid(eta)
    return float(np.sqrt(r @ r))


def statres(problem, x):
    """Lifted stationarity residual with a fixed subgradient selector.

    ``dist(0, f(Kx) (grad h(x) + dg(x) + N_S(x)) - (g+h)(x) K^T y)`` where
    ``y = problem.f_subgradient(Kx)``. Because ``y`` is one element of
    ``df(Kx)`` rather than the whole set, the value is an upper bound on the
    residual over all subgradients.
    """
    sup = problem.statres_support
    if sup.kind == "unsupported":
        raise StatresUnavailable(f"statres unavailable for family {problem.family!r}")
    if not problem.feasible(x):
        raise ModelViolation("statres needs a feasible point")
    Kx = problem.K.apply(x)
    fk = problem.f_value(Kx)
    num = problem.numerator(x)
    kty = problem.K.adjoint(problem.f_subgradient(Kx))
    gh = problem.h_gradient(x)
    if sup.kind == "separable":
        t = num * kty - fk * gh
        ilo, ihi = sup.intervals(x)
        with np.errstate(invalid="ignore"):
            d = _dist_to_intervals(t, fk * ilo, fk * ihi)
        return float(np.sqrt(d @ d))
    if sup.kind == "linear_constraint":
        # element: fk*(gh + eta*e + nu) - num*kty, nu in the box normal cone;
        # scaling eta and nu by fk > 0 leaves the cones unchanged
        a = fk * gh - num * kty
        return _linear_constraint_residual(a, x <= sup.lo, x >= sup.hi)
    raise ValueError(f"unknown statres kind {sup.kind!r}")


def rel_err(x, x_star):
    x, x_star = np.asarray(x, float), np.asarray(x_star, float)
    return float(np.linalg.norm(x - x_star) / max(np.linalg.norm(x_star), EPS))


def _as_image(u):
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        n = side_of(u.size)
        return u.reshape(n, n)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"expected a square image, got shape {u.shape}")
    return u


def rmse(x, x_star):
    """``||x - x*||_F / n**2`` for ``n x n`` images."""
    a, b = _as_image(x), _as_image(x_star)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b) / a.size)


def ssim(u, v, c1=0.05, c2=0.05):
    """Mean SSIM over all 3x3 windows (stride 1, valid positions).

    Variances and covariance use the unbiased 1/8 normalisation.
    """
    a, b = _as_image(u), _as_image(v)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.shape[0] < 3:
        raise ValueError("images must be at least 3x3")
    wa = sliding_window_view(a, (3, 3)).reshape(-1, 9)
    wb = sliding_window_view(b, (3, 3)).reshape(-1, 9)
    ma, mb = wa.mean(axis=1), wb.mean(axis=1)
    da, db = wa - ma[:, None], wb - mb[:, None]

    def cov(p, q):
        return (p * q).sum(axis=1) / 8.0

    num = (2.0 * ma * mb + c1) * (2.0 * cov(da, db) + c2)
    den = (ma * ma + mb * mb + c1) * (cov(da, da) + cov(db, db) + c2)
    return float(np.mean(num / den))


def infeas_portfolio(x, d):
    x = np.asarray(x, dtype=float)
    d = np.asarray(d, dtype=float)
    return float(abs(x.sum() - 1.0) + np.maximum(-x, 0.0).sum()
                 + np.maximum(x - d, 0.0).sum())


def objective(problem, x):
    """``(g(x) + h(x)) / f(Kx)`` for a feasible ``x``."""
    if not problem.feasible(x):
        raise ModelViolation("objective needs a feasible point")
    return float(problem.objective(x))
