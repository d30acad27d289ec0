"""Dense linear-algebra kernels for the small matrices this package works on.

Symmetric eigenproblems go through a cyclic Jacobi sweep, which converges
unconditionally for symmetric matrices and is exact on already-diagonal
input; dimensions above ``_JACOBI_MAX_DIM`` fall back to LAPACK.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "jacobi_eigh",
    "eigh_small",
    "min_eigenvalue",
    "spectral_norm",
    "orthonormal_columns",
    "principal_angles",
    "max_principal_angle",
    "restricted_eigenvalues",
    "sqrtm_positive",
]

_JACOBI_MAX_DIM = 8


def jacobi_eigh(a, tol=1e-14, max_sweeps=60):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(w, v)`` with eigenvalues ascending and eigenvectors in the
    columns of ``v``. Sweeps stop once the off-diagonal mass drops below
    ``tol`` relative to the largest entry.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    if n == 1:
        return np.array([a[0, 0]]), v
    scale = float(np.max(np.abs(a)))
    if scale == 0.0:
        return np.zeros(n), v
    for _ in range(max_sweeps):
        off = np.sqrt(2.0 * np.sum(np.tril(a, -1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 0.1 * tol * scale:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                sgn = 1.0 if tau >= 0.0 else -1.0
                t = sgn / (abs(tau) + np.hypot(1.0, tau))
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                col_p = c * a[:, p] - s * a[:, q]
                col_q = s * a[:, p] + c * a[:, q]
                a[:, p] = col_p
                a[:, q] = col_q
                row_p = c * a[p, :] - s * a[q, :]
                row_q = s * a[p, :] + c * a[q, :]
                a[p, :] = row_p
                a[q, :] = row_q
                vec_p = c * v[:, p] - s * v[:, q]
                vec_q = s * v[:, p] + c * v[:, q]
                v[:, p] = vec_p
                v[:, q] = vec_q
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def eigh_small(a):
    """Symmetric eigendecomposition; Jacobi for small matrices."""
    a = np.asarray(a, dtype=float)
    if a.shape[0] <= _JACOBI_MAX_DIM:
        return jacobi_eigh(a)
    return np.linalg.eigh(a)


def min_eigenvalue(a):
    return float(eigh_small(a)[0][0])


def spectral_norm(a):
    """Spectral norm of a symmetric matrix."""
    w, _ = eigh_small(a)
    return float(np.max(np.abs(w))) if w.size else 0.0


def orthonormal_columns(b, rtol=1e-12):
    """Orthonormal basis for the column span of ``b`` (must be full rank)."""
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if b.shape[0] < b.shape[1]:
        raise ValueError("more columns than ambient dimension")
    q, r = np.linalg.qr(b)
    diag = np.abs(np.diag(r))
    if diag.size and np.min(diag) <= rtol * max(1.0, np.max(diag)):
        raise ValueError("rank-deficient basis")
    return q


def principal_angles(a, b):
    """Principal angles (ascending, radians) between two column spans."""
    qa = orthonormal_columns(a)
    qb = orthonormal_columns(b)
    s = np.linalg.svd(qa.T @ qb, compute_uv=False)
    s = np.clip(s, -1.0, 1.0)
    return np.sort(np.arccos(s))


def max_principal_angle(a, b):
    return float(principal_angles(a, b)[-1])


def restricted_eigenvalues(m, basis):
    """Eigenvalues of the symmetric matrix ``m`` restricted to the span of
    ``basis`` columns, reduced by the Gram matrix of the basis.

    Solves the generalized problem (B^T m B) w = mu (B^T B) w, so the
    spectrum does not depend on the particular basis of the subspace.
    """
    b = np.atleast_2d(np.asarray(basis, dtype=float))
    gram = b.T @ b
    c = np.linalg.cholesky(gram)
    k = b.T @ m @ b
    tmp = np.linalg.solve(c, k)
    reduced = np.linalg.solve(c, tmp.T).T
    reduced = 0.5 * (reduced + reduced.T)
    w, _ = eigh_small(reduced)
    return w


def sqrtm_positive(m, tol=1e-14, max_iter=100, residual_tol=1e-6):
    """Square root of a matrix with real positive spectrum.

    Scaled Denman-Beavers iteration; quadratically convergent, needs no
    eigenvector basis, so clustered eigenvalues are harmless. Exits on the
    rounding plateau of ill-conditioned inputs and then verifies the
    residual Y*Y = M.
    """
    m = np.array(m, dtype=float)
    n = m.shape[0]
    y = m.copy()
    z = np.eye(n)
    prev_delta = np.inf
    for _ in range(max_iter):
        det_prod = abs(np.linalg.det(y) * np.linalg.det(z))
        if np.isfinite(det_prod) and det_prod > 0.0:
            gamma = det_prod ** (-0.5 / n)
            y = gamma * y
            z = gamma * z
        y_next = 0.5 * (y + np.linalg.inv(z))
        z_next = 0.5 * (z + np.linalg.inv(y))
        delta = np.linalg.norm(y_next - y) / max(np.linalg.norm(y_next), 1e-300)
        y, z = y_next, z_next
        # converged, or stalled on the rounding plateau of an
        # ill-conditioned input (the residual check below still guards)
        if delta < tol or (delta < 1e-6 and delta >= 0.9 * prev_delta):
            break
        prev_delta = delta
    residual = np.linalg.norm(y @ y - m) / max(np.linalg.norm(m), 1e-300)
    if residual > residual_tol:
        raise np.linalg.LinAlgError(
            f"matrix square-root residual {residual:.3e} too large")
    return y
