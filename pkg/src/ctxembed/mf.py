"""Low-rank factorization of explicit context matrices (NetMF, HOPE)."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .context import chunk_seed
from .sgns import EmbeddingSet


@dataclass(frozen=True)
class FactorizationResult:
    phi: np.ndarray
    theta: np.ndarray
    singular_values: np.ndarray
    residual: float
    u: np.ndarray
    v: np.ndarray

    def embedding(self, ids=None) -> EmbeddingSet:
        return EmbeddingSet(self.phi, self.theta, ids)


def _dense(c):
    return c.toarray() if sp.issparse(c) else np.asarray(c, dtype=np.float64)


def frobenius_residual(c, phi, theta, block=1024) -> float:
    """``||C - phi theta^T||_F`` accumulated over row blocks."""
    total = 0.0
    m = phi.shape[0]
    csr = sp.csr_matrix(c) if sp.issparse(c) else None
    for lo in range(0, m, block):
        hi = min(m, lo + block)
        if csr is not None:
            rows = csr[lo:hi].toarray()
        elif isinstance(c, spla.LinearOperator):
            pick = np.zeros((m, hi - lo))
            pick[np.arange(lo, hi), np.arange(hi - lo)] = 1.0
            rows = np.asarray(c.T @ pick).T
        else:
            rows = np.asarray(c[lo:hi], dtype=np.float64)
        total += float(np.sum((rows - phi[lo:hi] @ theta.T) ** 2))
    return float(np.sqrt(total))


def randomized_svd(c, rank, oversample=10, power_iters=4, seed=0):
    """Rank-``rank`` SVD by randomized subspace iteration.

    A Gaussian sketch of width ``rank + oversample`` is refined by
    ``power_iters`` rounds of ``C C^T`` with QR re-orthonormalization
    between every product.
    """
    m, n = c.shape
    width = min(rank + oversample, m, n)
    rng = np.random.default_rng(chunk_seed(seed, 0x5BD))
    q, _ = np.linalg.qr(c @ rng.standard_normal((n, width)))
    ct = c.T
    for _ in range(power_iters):
        z, _ = np.linalg.qr(ct @ q)
        q, _ = np.linalg.qr(c @ z)
    b = np.asarray((ct @ q).T)
    ub, s, vt = np.linalg.svd(b, full_matrices=False)
    u = q @ ub
    return u[:, :rank], s[:rank], vt[:rank].T


def factorize(c, d: int, oversample: int = 10, power_iters: int = 4, seed: int = 0) -> FactorizationResult:
    """Rank-d factors ``phi = U sqrt(S)``, ``theta = V sqrt(S)`` with ``phi theta^T ~ C``.

    ``c`` may be dense, sparse or a ``LinearOperator``.
    """
    m, n = c.shape
    if d < 1 or d > min(m, n):
        raise ValueError(f"d must lie in [1, {min(m, n)}]")
    if sp.issparse(c):
        c = sp.csr_matrix(c, dtype=np.float64)
        if not np.all(np.isfinite(c.data)):
            raise ValueError("context matrix has non-finite entries")
    elif isinstance(c, spla.LinearOperator):
        pass
    else:
        c = np.asarray(c, dtype=np.float64)
        if not np.all(np.isfinite(c)):
            raise ValueError("context matrix has non-finite entries")
    u, s, v = randomized_svd(c, d, oversample, power_iters, seed)
    cutoff = max(m, n) * np.finfo(float).eps * (s[0] if len(s) and s[0] > 0 else 1.0)
    null = s <= cutoff
    if null.any():
        warnings.warn(f"requested rank {d} exceeds numerical rank {int((~null).sum())}; "
                      "padding with zero columns", RuntimeWarning)
        s = np.where(null, 0.0, s)
        u = u.copy()
        v = v.copy()
        u[:, null] = 0.0
        v[:, null] = 0.0
    root = np.sqrt(s)
    phi = u * root
    theta = v * root
    return FactorizationResult(phi, theta, s, frobenius_residual(c, phi, theta), u, v)


def residual_check(c, r: FactorizationResult) -> float:
    """Recompute ``||C - phi theta^T||_F`` densely, independent of the factorizer."""
    dense = _dense(c)
    if dense.shape != (r.phi.shape[0], r.theta.shape[0]) or r.phi.shape[1] != r.theta.shape[1]:
        raise ValueError("factor dimensions do not match the matrix")
    return float(np.linalg.norm(dense - r.phi @ r.theta.T, "fro"))


def jacobi_svd(a, tol=1e-15, max_sweeps=60):
    """Dense SVD by one-sided Jacobi rotations (reference oracle for tests).

    Returns ``(U, s, V)`` with singular values sorted descending.
    """
    a = np.array(a, dtype=np.float64)
    transposed = a.shape[0] < a.shape[1]
    if transposed:
        a = a.T
    m, n = a.shape
    u = a.copy()
    v = np.eye(n)
    for _ in range(max_sweeps):
        rotated = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                alpha = u[:, i] @ u[:, i]
                beta = u[:, j] @ u[:, j]
                gamma = u[:, i] @ u[:, j]
                if abs(gamma) <= tol * np.sqrt(alpha * beta) or gamma == 0.0:
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.sign(zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta)) if zeta != 0 else 1.0
                cs = 1.0 / np.sqrt(1.0 + t * t)
                sn = cs * t
                ui = u[:, i].copy()
                u[:, i] = cs * ui - sn * u[:, j]
                u[:, j] = sn * ui + cs * u[:, j]
                vi = v[:, i].copy()
                v[:, i] = cs * vi - sn * v[:, j]
                v[:, j] = sn * vi + cs * v[:, j]
        if not rotated:
            break
    s = np.linalg.norm(u, axis=0)
    order = np.argsort(-s)
    s = s[order]
    u = u[:, order]
    v = v[:, order]
    u = np.divide(u, s, out=np.zeros_like(u), where=s > 0)
    if transposed:
        u, v = v, u
    return u, s, v


def optimal_residual(c, d: int) -> float:
    """Eckart-Young optimum ``sqrt(sum_{i>d} s_i^2)`` via :func:`jacobi_svd`."""
    _, s, _ = jacobi_svd(_dense(c))
    return float(np.sqrt(np.sum(s[d:] ** 2)))
