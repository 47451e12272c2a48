"""Proximal maps, projections and subgradient selectors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .operators import grad2d, side_of

__all__ = [
    "Interval",
    "AdmmConfig",
    "AdmmState",
    "InfeasibleError",
    "shrink",
    "clamp",
    "prox_l1_box",
    "project_simplex_box",
    "project_simplex",
    "topk_norm",
    "topk_subgradient",
    "l2_subgradient",
    "tv_objective",
    "tv_prox_admm",
    "cg",
]


class InfeasibleError(ValueError):
    """The constraint set is empty."""


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    def __add__(self, other):
        return Interval(self.lo + other.lo, self.hi + other.hi)

    def scale(self, c):
        if c < 0:
            return Interval(c * self.hi, c * self.lo)
        return Interval(c * self.lo, c * self.hi)

    def dist(self, t):
        if t < self.lo:
            return self.lo - t
        if t > self.hi:
            return t - self.hi
        return 0.0

    def __contains__(self, t):
        return self.lo <= t <= self.hi


def shrink(v, kappa):
    """Soft threshold, the prox of ``kappa * ||.||_1``."""
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    v = np.asarray(v, dtype=float)
    return np.maximum(np.abs(v) - kappa, 0.0) * np.sign(v)


def clamp(x, lo, hi):
    return np.minimum(np.maximum(x, lo), hi)


def prox_l1_box(z, weight, lo, hi):
    """argmin over ``[lo, hi]`` of ``weight*||x||_1 + 0.5*||x - z||^2``.

    Both terms are coordinate-separable and each 1-D objective is convex, so
    clamping the unconstrained minimiser is exact.
    """
    lo = np.broadcast_to(np.asarray(lo, dtype=float), np.shape(z))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), np.shape(z))
    if np.any(lo > hi):
        raise ValueError("box has lo > hi")
    return clamp(shrink(z, weight), lo, hi)


def _bisect_shift(z, d, tol_l=1e-12, tol_w=1e-14):
    """Root of ``sum(clip(z - eta, 0, d)) - 1`` by bracketed bisection."""

    def l(eta):
        return np.minimum(np.maximum(z - eta, 0.0), d).sum() - 1.0

    a, b = float(z.min()) - 1.0, float(z.max())
    step = 1.0
    while l(a) < 0:
        a -= step
        step *= 2.0
    step = 1.0
    while l(b) > 0:
        b += step
        step *= 2.0
    la = l(a)
    while True:
        mid = 0.5 * (a + b)
        lm = l(mid)
        if abs(lm) <= tol_l or (b - a) <= tol_w * max(1.0, abs(mid)) or mid in (a, b):
            return mid
        if (lm > 0) == (la > 0):
            a, la = mid, lm
        else:
            b = mid


def project_simplex_box(z, d):
    """Euclidean projection onto ``{x : sum(x) = 1, 0 <= x <= d}``.

    Returns ``clip(z - eta*e, 0, d)`` where ``eta`` zeroes the monotone
    piecewise-linear residual of the sum constraint. Entries of ``d`` may be
    ``inf``.
    """
    z = np.asarray(z, dtype=float)
    d = np.broadcast_to(np.asarray(d, dtype=float), z.shape)
    if np.any(d < 0) or d.sum() < 1.0:
        raise InfeasibleError(f"simplex-box set is empty: sum(d) = {d.sum()} < 1")
    eta = _bisect_shift(z, d)
    x = np.minimum(np.maximum(z - eta, 0.0), d)
    # polish: exact shift on the free set, then absorb rounding in the sum
    free = (x > 0.0) & (x < d)
    if free.any():
        capped = x >= d
        eta = (z[free].sum() + d[capped].sum() - 1.0) / free.sum()
        x = np.minimum(np.maximum(z - eta, 0.0), d)
        free = (x > 0.0) & (x < d)
        if free.any():
            x[free] += (1.0 - x.sum()) / free.sum()
            x = np.minimum(np.maximum(x, 0.0), d)
    return x


def project_simplex(z):
    z = np.asarray(z, dtype=float)
    return project_simplex_box(z, np.full(z.shape, np.inf))


def _check_kappa(n, kappa):
    if not 1 <= kappa <= n:
        raise ValueError(f"kappa must lie in [1, {n}], got {kappa}")


def _topk_index(x, kappa):
    # stable sort on -|x| => ties go to the lowest index
    return np.argsort(-np.abs(x), kind="stable")[:kappa]


def topk_norm(x, kappa):
    """Sum of the ``kappa`` largest absolute entries, correctly rounded."""
    x = np.asarray(x, dtype=float)
    _check_kappa(x.size, kappa)
    return math.fsum(np.abs(x[_topk_index(x, kappa)]))


def topk_subgradient(x, kappa):
    x = np.asarray(x, dtype=float)
    _check_kappa(x.size, kappa)
    s = np.zeros_like(x)
    idx = _topk_index(x, kappa)
    s[idx] = np.sign(x[idx])
    return s


def l2_subgradient(v):
    v = np.asarray(v, dtype=float)
    nv = np.linalg.norm(v)
    if nv > 1e-14:
        return v / nv
    return np.zeros_like(v)


# -- TV prox ---------------------------------------------------------------


@dataclass(frozen=True)
class AdmmConfig:
    alpha: float = 5.0
    beta: float = 5e-4
    max_outer: int = 3
    cg_tol: float = 1e-8
    cg_max: int = 100
    # extra sweeps allowed when a decrease against an incumbent is demanded
    max_extra: int = 500

    def __post_init__(self):
        for name in ("alpha", "beta", "max_outer", "cg_tol", "cg_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"AdmmConfig.{name} must be positive")


@dataclass
class AdmmState:
    x: np.ndarray
    w: np.ndarray
    v: np.ndarray
    h: np.ndarray
    mu: np.ndarray
    sweeps: int = 0
    cg_failures: int = 0
    objectives: list = field(default_factory=list)

    def copy(self):
        return AdmmState(self.x.copy(), self.w.copy(), self.v.copy(), self.h.copy(),
                         self.mu.copy(), self.sweeps, self.cg_failures, [])


def cg(matvec, b, x0, tol, maxiter):
    """Conjugate gradients for an SPD operator. Returns ``(x, converged)``."""
    x = x0.copy()
    r = b - matvec(x)
    p = r.copy()
    rr = r @ r
    bn = max(np.linalg.norm(b), 1e-300)
    if math.sqrt(rr) <= tol * bn:
        return x, True
    for _ in range(maxiter):
        ap = matvec(p)
        step = rr / (p @ ap)
        x += step * p
        r -= step * ap
        rr_new = r @ r
        if math.sqrt(rr_new) <= tol * bn:
            return x, True
        p = r + (rr_new / rr) * p
        rr = rr_new
    return x, False


def tv_objective(x, z, lam, delta, grad=None):
    """``lam*||grad x||_1 + ||x - z||^2 / (2*delta)``."""
    if grad is None:
        grad = grad2d(side_of(x.size))
    return lam * np.abs(grad.apply(x)).sum() + ((x - z) @ (x - z)) / (2.0 * delta)


def tv_prox_admm(z, lam, delta, lo, hi, cfg=AdmmConfig(), warm=None,
                 incumbent=None, margin=0.0):
    """Approximate ``argmin_{lo<=x<=hi} lam*||grad x||_1 + ||x-z||^2/(2 delta)``.

    ADMM on the splitting ``w = grad x``, ``h = x`` with penalties
    ``cfg.alpha`` and ``cfg.beta``; the x-update is solved by matrix-free CG.
    Runs ``cfg.max_outer`` sweeps starting from ``warm`` (or a cold start at
    ``clamp(z)``). The returned point is ``clamp(x)`` so it is always feasible.

    When ``incumbent`` is given, sweeps continue (up to ``cfg.max_extra``
    more) until the output beats the incumbent's objective by at least
    ``margin * ||out - incumbent||^2``.

    Returns ``(x_out, state)``; ``state`` can be passed back as ``warm``.
    """
    z = np.asarray(z, dtype=float)
    n = side_of(z.size)
    grad = grad2d(n)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), z.shape)
    hi = np.broadcast_to(np.asarray(hi, dtype=float), z.shape)
    a, b = cfg.alpha, cfg.beta
    c = 1.0 / delta + b

    if warm is None:
        x = clamp(z, lo, hi)
        st = AdmmState(x, grad.apply(x), np.zeros(2 * n * n), x.copy(), np.zeros_like(x))
    else:
        st = warm.copy()

    def matvec(q):
        return a * grad.adjoint(grad.apply(q)) + c * q

    def sweep():
        st.w = shrink(grad.apply(st.x) + st.v, lam / a)
        rhs = z / delta + a * grad.adjoint(st.w - st.v) + b * (st.h - st.mu)
        st.x, ok = cg(matvec, rhs, st.x, cfg.cg_tol, cfg.cg_max)
        if not ok:
            st.cg_failures += 1
        st.h = clamp(st.x + st.mu, lo, hi)
        st.v = st.v + grad.apply(st.x) - st.w
        st.mu = st.mu + st.x - st.h
        st.sweeps += 1
        out = clamp(st.x, lo, hi)
        st.objectives.append(tv_objective(out, z, lam, delta, grad))
        return out

    for _ in range(cfg.max_outer):
        out = sweep()
    if incumbent is not None:
        inc_obj = tv_objective(incumbent, z, lam, delta, grad)
        extra = 0
        while True:
            gap = out - incumbent
            if st.objectives[-1] <= inc_obj - margin * (gap @ gap):
                break
            if extra >= cfg.max_extra:
                out = np.array(incumbent, dtype=float)
                break
            out = sweep()
            extra += 1
    return out, st
