"""Batched maximum-volume inscribed ellipsoids of symmetric convex bodies.

A body K = {x : rho(x) <= 1} is sampled through its boundary points u / rho(u).
Their symmetric convex hull P is a polytope {x : |a_i . x| <= 1} contained in K.
The largest centered ellipsoid inside P is the polar of the smallest centered
ellipsoid containing the facet normals a_i, found with the Todd-Yildirim
away-step iteration.  The returned matrix A satisfies ``{|Ax| <= 1} ⊆ P ⊆ K``,
so the lower bound rho(x) <= |Ax| holds for every x, not just sampled ones.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import ConvexHull
from scipy.stats import norm, qmc

GOLDEN = 0.6180339887498949


def directions(d: int, n: int, fresh: bool = False) -> np.ndarray:
    """Deterministic unit vectors covering the projective sphere, shape (n, d)."""
    if d == 1:
        return np.ones((1, 1))
    if d == 2:
        off = GOLDEN if fresh else 0.0
        th = np.pi * (np.arange(n) + off) / n
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    if d == 3:
        # Fibonacci sphere; the fresh set uses a rotated lattice
        i = np.arange(n) + 0.5
        z = 1.0 - 2.0 * i / n
        phi = np.pi * (3.0 - np.sqrt(5.0)) * i + (1.0 if fresh else 0.0)
        r = np.sqrt(1.0 - z**2)
        return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    # d >= 4: scrambled-free Halton points pushed through the normal quantile
    h = qmc.Halton(d, scramble=False).random(n + 1 + (n if fresh else 0))[1:]
    h = h[-n:]
    g = norm.ppf(np.clip(h, 1e-12, 1 - 1e-12))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _facets_2d(X: np.ndarray) -> np.ndarray:
    """Facet normals of the symmetric polygon through X (b, J, 2) ordered by angle on a half circle."""
    nxt = np.concatenate([X[:, 1:], -X[:, :1]], axis=1)
    det = X[..., 0] * nxt[..., 1] - X[..., 1] * nxt[..., 0]
    # solve [x; y] a = (1, 1)
    a0 = (nxt[..., 1] - X[..., 1]) / det
    a1 = (X[..., 0] - nxt[..., 0]) / det
    return np.stack([a0, a1], axis=-1)


def _facets_hull(X: np.ndarray) -> list[np.ndarray]:
    out = []
    for pts in X:
        hull = ConvexHull(np.vstack([pts, -pts]))
        eq = hull.equations
        out.append(eq[:, :-1] / (-eq[:, -1:]))
    return out


def centered_mvee(a: np.ndarray, tol: float = 1e-7, max_iter: int = 20000) -> tuple[np.ndarray, np.ndarray]:
    """Smallest centered ellipsoid {y : y^T Q^{-1} y <= 1} containing rows of a, batched.

    a has shape (b, J, d).  Returns (Q, kappa/d) with Q = kappa * M, M the design
    matrix and kappa = max_i a_i^T M^{-1} a_i, so every a_i lies inside.
    """
    b, J, d = a.shape
    u = np.full((b, J), 1.0 / J)
    active = np.ones(b, dtype=bool)
    rows = np.arange(b)
    for _ in range(max_iter):
        idx = rows[active]
        if idx.size == 0:
            break
        aa = a[idx]
        uu = u[idx]
        M = np.swapaxes(aa * uu[..., None], 1, 2) @ aa
        g = np.sum((aa @ np.linalg.inv(M)) * aa, axis=-1)
        jp = np.argmax(g, axis=1)
        kp = g[np.arange(idx.size), jp]
        gm = np.where(uu > 0, g, np.inf)
        jm = np.argmin(gm, axis=1)
        km = gm[np.arange(idx.size), jm]
        ep = kp / d - 1.0
        em = 1.0 - km / d
        done = np.maximum(ep, em) <= tol
        active[idx[done]] = False
        go = ~done
        if not go.any():
            break
        toward = go & (ep >= em)
        away = go & ~toward
        r = np.arange(idx.size)
        if toward.any():
            t = r[toward]
            lam = (kp[t] - d) / (d * (kp[t] - 1.0))
            uu[t] *= (1.0 - lam)[:, None]
            uu[t, jp[t]] += lam
        if away.any():
            t = r[away]
            uj = uu[t, jm[t]]
            cap = uj / (1.0 - uj)
            with np.errstate(divide="ignore", invalid="ignore"):
                lam = np.where(km[t] > 1.0, (d - km[t]) / (d * (km[t] - 1.0)), cap)
            lam = np.minimum(lam, cap)
            uu[t] *= (1.0 + lam)[:, None]
            uu[t, jm[t]] -= lam
            uu[t, jm[t]] = np.maximum(uu[t, jm[t]], 0.0)
        u[idx] = uu
    M = np.swapaxes(a * u[..., None], 1, 2) @ a
    g = np.sum((a @ np.linalg.inv(M)) * a, axis=-1)
    kappa = g.max(axis=1)
    return kappa[:, None, None] * M, kappa / d


def sym_sqrt(Q: np.ndarray) -> np.ndarray:
    lam, V = np.linalg.eigh(Q)
    return np.einsum("...ij,...j,...kj->...ik", V, np.sqrt(np.maximum(lam, 0.0)), V)


def inscribed_from_rho(U: np.ndarray, rho: np.ndarray, tol: float = 1e-7) -> tuple[np.ndarray, np.ndarray]:
    """Reducing matrices A with {|Ax| <= 1} inside the hull of the points U_j / rho_j.

    U: (J, d) unit directions (half circle ordered by angle when d == 2).
    rho: (b, J) positive values of the norm at those directions.
    Returns (A, kappa_ratio) with kappa_ratio -> 1 at the optimum.
    """
    b, J = rho.shape
    d = U.shape[1]
    X = U[None] / rho[..., None]
    if d == 2:
        a = _facets_2d(X)
        Q, kr = centered_mvee(a, tol)
    else:
        faces = _facets_hull(X)
        Q = np.empty((b, d, d))
        kr = np.empty(b)
        for n, fa in enumerate(faces):
            q, k = centered_mvee(fa[None], tol)
            Q[n], kr[n] = q[0], k[0]
    return sym_sqrt(Q), kr
