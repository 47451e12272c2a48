"""Linear operators with explicit adjoints.

Every operator maps flat float64 vectors to flat float64 vectors. Images are
flattened row-major, so an ``n x n`` image is a vector of length ``n**2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import rng as _rng

__all__ = [
    "LinearOperator",
    "dense_matrix",
    "identity",
    "grad2d",
    "mini_radon",
    "ray_intersections",
    "row_vector",
    "sparse_matrix",
    "power_norm",
    "side_of",
]


def side_of(length: int) -> int:
    """Return ``n`` for a vector of length ``n**2``; raise otherwise."""
    n = math.isqrt(int(length))
    if n * n != length or n == 0:
        raise ValueError(f"length {length} is not a perfect square")
    return n


def power_norm(apply, adjoint, input_dim, iters=1000, rtol=1e-12, seed=0):
    """Estimate the largest singular value by power iteration on K^T K."""
    v = _rng.stream(seed, "power_norm").standard_normal(input_dim)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = adjoint(apply(v))
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        new = math.sqrt(nw)
        v = w / nw
        if est > 0 and abs(new - est) <= rtol * new:
            est = new
            break
        est = new
    return est


@dataclass(frozen=True)
class LinearOperator:
    """A linear map ``R^input_dim -> R^output_dim`` with its adjoint.

    ``matrix`` holds the explicit (dense or sparse) representation when one
    exists; it is used for saving and for a few fast paths.
    """

    input_dim: int
    output_dim: int
    _apply: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    _adjoint: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    norm_estimate: float = 0.0
    name: str = "linop"
    matrix: object = field(default=None, repr=False, compare=False)

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.input_dim,):
            raise ValueError(
                f"{self.name}: expected input of shape ({self.input_dim},), got {x.shape}")
        return self._apply(x)

    def adjoint(self, y):
        y = np.asarray(y, dtype=float)
        if y.shape != (self.output_dim,):
            raise ValueError(
                f"{self.name}: expected adjoint input of shape ({self.output_dim},), got {y.shape}")
        return self._adjoint(y)

    __call__ = apply

    @property
    def shape(self):
        return (self.output_dim, self.input_dim)


def dense_matrix(rows, cols, entries) -> LinearOperator:
    """Wrap a row-major list of ``rows*cols`` entries as a matrix operator."""
    a = np.asarray(entries, dtype=float)
    if a.size != rows * cols:
        raise ValueError(f"expected {rows * cols} entries, got {a.size}")
    a = a.reshape(rows, cols).copy()
    a.setflags(write=False)
    at = a.T
    nrm = power_norm(a.__matmul__, at.__matmul__, cols)
    return LinearOperator(cols, rows, a.__matmul__, at.__matmul__, nrm, "dense", a)


def sparse_matrix(matrix) -> LinearOperator:
    """Wrap a scipy sparse matrix (converted to CSR)."""
    a = sp.csr_matrix(matrix, dtype=float)
    at = a.T.tocsr()
    rows, cols = a.shape
    nrm = power_norm(a.__matmul__, at.__matmul__, cols)
    return LinearOperator(cols, rows, a.__matmul__, at.__matmul__, nrm, "sparse", a)


def identity(n: int) -> LinearOperator:
    return LinearOperator(n, n, lambda x: x.copy(), lambda y: y.copy(), 1.0, "identity")


def row_vector(mu) -> LinearOperator:
    """The functional ``x -> <mu, x>`` viewed as a ``1 x n`` operator."""
    mu = np.asarray(mu, dtype=float).ravel().copy()
    if mu.size == 0:
        raise ValueError("mu must be nonempty")
    mu.setflags(write=False)
    return LinearOperator(
        mu.size, 1,
        lambda x: np.array([mu @ x]),
        lambda t: t[0] * mu,
        float(np.linalg.norm(mu)),
        "row_vector",
        mu.reshape(1, -1),
    )


def _grad_apply(x, n):
    u = x.reshape(n, n)
    gx = np.zeros_like(u)
    gy = np.zeros_like(u)
    gx[:, :-1] = u[:, 1:] - u[:, :-1]
    gy[:-1, :] = u[1:, :] - u[:-1, :]
    return np.concatenate([gx.ravel(), gy.ravel()])


def _grad_adjoint(p, n):
    px = p[: n * n].reshape(n, n)
    py = p[n * n:].reshape(n, n)
    out = np.zeros((n, n))
    # negative divergence with the boundary handling matching the forward map
    out[:, :-1] -= px[:, :-1]
    out[:, 1:] += px[:, :-1]
    out[:-1, :] -= py[:-1, :]
    out[1:, :] += py[:-1, :]
    return out.ravel()


def grad2d(n: int) -> LinearOperator:
    """Forward-difference gradient of an ``n x n`` image.

    Output is ``[grad_x u, grad_y u]`` stacked, each ``n*n`` long. ``grad_x``
    differences along a row (zero in the last column), ``grad_y`` along a
    column (zero in the last row). ``||grad||^2 <= 8``.
    """
    if n < 1:
        raise ValueError("side must be positive")
    return LinearOperator(
        n * n, 2 * n * n,
        lambda x: _grad_apply(x, n),
        lambda p: _grad_adjoint(p, n),
        math.sqrt(8.0),
        "grad2d",
    )


def ray_intersections(side, angle, offset):
    """Pixel indices and intersection lengths of one line with the grid.

    The grid has unit pixels and is centred at the origin, covering
    ``[-side/2, side/2]^2``; pixel ``(i, j)`` (row ``i`` from the top) spans
    ``x in [j - side/2, j + 1 - side/2]`` and
    ``y in [side/2 - i - 1, side/2 - i]``. The line has direction
    ``(cos a, sin a)`` and signed distance ``offset`` from the origin along the
    normal ``(-sin a, cos a)``.
    """
    half = side / 2.0
    c, s = math.cos(angle), math.sin(angle)
    px, py = -s * offset, c * offset
    t_lo, t_hi = -math.inf, math.inf
    for p0, d in ((px, c), (py, s)):
        if abs(d) < 1e-15:
            if p0 < -half or p0 > half:
                return np.empty(0, dtype=np.int64), np.empty(0)
            continue
        t1, t2 = (-half - p0) / d, (half - p0) / d
        t_lo, t_hi = max(t_lo, min(t1, t2)), min(t_hi, max(t1, t2))
    if not t_hi > t_lo:
        return np.empty(0, dtype=np.int64), np.empty(0)

    ts = [np.array([t_lo, t_hi])]
    grid = np.arange(side + 1) - half
    for p0, d in ((px, c), (py, s)):
        if abs(d) >= 1e-15:
            tg = (grid - p0) / d
            ts.append(tg[(tg > t_lo) & (tg < t_hi)])
    t = np.unique(np.concatenate(ts))
    seg = np.diff(t)
    keep = seg > 1e-12
    tm = 0.5 * (t[:-1] + t[1:])[keep]
    seg = seg[keep]
    xm, ym = px + tm * c, py + tm * s
    j = np.clip(np.floor(xm + half).astype(np.int64), 0, side - 1)
    i = np.clip(np.floor(half - ym).astype(np.int64), 0, side - 1)
    return i * side + j, seg


def mini_radon(side, num_angles, max_angle_deg, rays_per_angle=None) -> LinearOperator:
    """Parallel-beam ray-driven projector with exact intersection lengths.

    Angles are ``k * max_angle / num_angles`` for ``k = 0..num_angles``
    (``num_angles + 1`` views). Detector bins are centred and uniformly span
    the grid diagonal. Rows are ordered view-major.
    """
    if side < 8:
        raise ValueError("side must be >= 8")
    if rays_per_angle is None:
        rays_per_angle = int(math.ceil(side * math.sqrt(2.0)))
    if num_angles < 0 or rays_per_angle < 1:
        raise ValueError("degenerate geometry: no rays")
    span = side * math.sqrt(2.0)
    spacing = span / rays_per_angle
    offsets = (np.arange(rays_per_angle) + 0.5) * spacing - span / 2.0
    angles = np.deg2rad(np.arange(num_angles + 1) * max_angle_deg / max(num_angles, 1))
    rows, cols, vals = [], [], []
    r = 0
    for a in angles:
        for off in offsets:
            idx, ln = ray_intersections(side, float(a), float(off))
            rows.append(np.full(idx.size, r))
            cols.append(idx)
            vals.append(ln)
            r += 1
    a = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(r, side * side),
    )
    op = sparse_matrix(a)
    return LinearOperator(op.input_dim, op.output_dim, op._apply, op._adjoint,
                          op.norm_estimate, "mini_radon", a)
