"""Seeded data generators for the benchmark families.

Each generator draws from its own named Philox stream (see :mod:`fracprox.rng`),
so outputs depend only on ``(parameters, seed)``.
"""

from __future__ import annotations

import numpy as np

from .rng import stream

__all__ = [
    "gen_odct",
    "gen_sparse_signal",
    "gen_l1sk_start",
    "gen_portfolio",
    "gen_sharpe",
    "gen_shepp_logan",
    "add_noise",
    "SHEPP_LOGAN_MODIFIED",
]


def gen_odct(m, n, F, seed, w=None):
    """Oversampled DCT sensing matrix, column ``j`` = ``cos(2 pi w j / F) / sqrt(m)``.

    ``w`` overrides the random frequencies (uniform on [0, 1]).
    """
    if m < 1 or n < 1 or not F > 0:
        raise ValueError("need m, n >= 1 and F > 0")
    if w is None:
        w = stream(seed, "odct.w").uniform(0.0, 1.0, size=m)
    w = np.asarray(w, dtype=float)
    j = np.arange(1, n + 1)
    return np.cos(2.0 * np.pi * np.outer(w, j) / F) / np.sqrt(m)


def gen_sparse_signal(n, kappa, F, seed, max_tries=10000):
    """``kappa``-sparse signal with entries ``+-1/2`` and support gaps ``>= 2F``.

    Returns ``(x_star, support)`` with ``support`` sorted.
    """
    gap = 2.0 * F
    if kappa < 1 or kappa * gap > n:
        raise ValueError(f"cannot place {kappa} spikes at spacing {gap} in {n} slots")
    rng = stream(seed, "sparse.support")
    for _ in range(max_tries):
        supp = np.sort(rng.choice(n, size=kappa, replace=False))
        if kappa == 1 or np.diff(supp).min() >= gap:
            break
    else:
        raise ValueError(f"no admissible support found in {max_tries} draws")
    y = stream(seed, "sparse.sign").standard_normal(kappa)
    x = np.zeros(n)
    x[supp] = np.sign(y) / 2.0
    return x, supp


def gen_l1sk_start(x_star, seed, lo=-1.0, hi=1.0, scale=0.2):
    """``x* + scale*z`` with ``z ~ U[-1, 1]^n``, clipped into the box."""
    z = stream(seed, "l1sk.start").uniform(-1.0, 1.0, size=x_star.size)
    return np.clip(x_star + scale * z, lo, hi)


def gen_portfolio(n, m, seed):
    """``(Sigma_diag, L, mu, d)`` with ``Sigma = 2I``, ``L ~ U[-1,1]``, ``mu ~ U(0,1)``, ``d = 1.75/n``."""
    if not 0 < m < n:
        raise ValueError(f"need 0 < m < n, got m={m}, n={n}")
    sigma = np.full(n, 2.0)
    L = stream(seed, "portfolio.L").uniform(-1.0, 1.0, size=(n, m))
    mu = stream(seed, "portfolio.mu").uniform(0.0, 1.0, size=n)
    # U(0,1) is open at 0; a drawn exact zero would break mu > 0
    mu = np.where(mu > 0, mu, np.finfo(float).tiny)
    d = np.full(n, 1.75 / n)
    return sigma, L, mu, d


def gen_sharpe(n, seed, margin=0.1):
    """``(a, r, K)`` for a Sharpe-ratio instance with ``C = K^T K`` positive definite.

    ``a ~ U(0, 1)``, ``r = max(a) + margin`` so ``r - a^T x > 0`` on the
    simplex, ``C = B B^T / n + 0.1 I`` with Gaussian ``B``; ``K`` is the
    transposed lower Cholesky factor.
    """
    if n < 1:
        raise ValueError("n must be positive")
    a = stream(seed, "sharpe.a").uniform(0.0, 1.0, size=n)
    B = stream(seed, "sharpe.B").standard_normal((n, n))
    C = B @ B.T / n + 0.1 * np.eye(n)
    K = np.linalg.cholesky(C).T
    return a, float(a.max() + margin), K


# (intensity, semi-axis a, semi-axis b, centre x, centre y, rotation deg)
SHEPP_LOGAN_MODIFIED = (
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0),
    (-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0),
    (-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0),
    (0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0),
    (0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0),
    (0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0),
    (0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0),
)


def gen_shepp_logan(side, table=SHEPP_LOGAN_MODIFIED):
    """Rasterise the 10-ellipse Shepp-Logan head at pixel centres.

    The image covers ``[-1, 1]^2``, row 0 at the top. Returns a flat
    row-major array of length ``side**2`` clipped to ``[0, 1]``.
    """
    if side < 16:
        raise ValueError("side must be >= 16")
    c = (np.arange(side) + 0.5) / side * 2.0 - 1.0
    X, Y = np.meshgrid(c, -c)
    img = np.zeros((side, side))
    for val, ea, eb, x0, y0, phi in table:
        t = np.deg2rad(phi)
        xr = (X - x0) * np.cos(t) + (Y - y0) * np.sin(t)
        yr = -(X - x0) * np.sin(t) + (Y - y0) * np.cos(t)
        img[(xr / ea) ** 2 + (yr / eb) ** 2 <= 1.0] += val
    return np.clip(img, 0.0, 1.0).ravel()


def add_noise(b, level, seed):
    """``b + level*||b|| * g/||g||`` with standard Gaussian ``g``."""
    if level < 0:
        raise ValueError("noise level must be nonnegative")
    b = np.asarray(b, dtype=float)
    if level == 0:
        return b.copy()
    g = stream(seed, "noise").standard_normal(b.size)
    return b + level * np.linalg.norm(b) * g / np.linalg.norm(g)
