"""Shared fixtures and independent oracles for the test suite.

Oracles here deliberately avoid the package's own code paths: brute-force
cone sampling for admissible-delta intervals, central finite differences
for Jacobians, and scipy's scaling-and-squaring exponential for linear
cocycles.
"""

import numpy as np
import pytest

from cone_verify import QuadraticFormField, builtin


# ---------------------------------------------------------------------------
# canonical fixtures: saddle with eigenvalues -3 < -1 < 0 < 2

LAMBDAS = (-3.0, -1.0, 2.0)


@pytest.fixture
def saddle_field():
    return builtin("linear_diag", list(LAMBDAS))


@pytest.fixture
def form_index1():
    return QuadraticFormField.diagonal([-1.0, 1.0, 1.0])


@pytest.fixture
def form_index2():
    return QuadraticFormField.diagonal([-1.0, -1.0, 1.0])


@pytest.fixture
def form_not_separated():
    return QuadraticFormField.diagonal([1.0, -1.0, 1.0])


# ---------------------------------------------------------------------------
# oracles

def oracle_delta_interval(j, tilde, lo=-20.0, hi=20.0, n_grid=40001):
    """Dense delta grid + exact eigenvalue check; None when nothing works."""
    deltas = np.linspace(lo, hi, n_grid)
    admissible = [d for d in deltas
                  if np.linalg.eigvalsh(tilde - d * j)[0] >= -1e-11]
    if not admissible:
        return None
    return min(admissible), max(admissible)


def oracle_rayleigh_bounds(j, tilde, n_vectors=100000, seed=0, include_axes=True):
    """Kuhne-style bounds: inf over the positive cone and sup over the
    negative cone of <tilde v, v> / <J v, v> on sampled unit vectors."""
    rng = np.random.default_rng(seed)
    n = j.shape[0]
    vecs = rng.normal(size=(n_vectors, n))
    vecs /= np.linalg.norm(vecs, axis=1)[:, None]
    if include_axes:
        vecs = np.vstack([vecs, np.eye(n), -np.eye(n)])
    jq = np.einsum("ij,jk,ik->i", vecs, j, vecs)
    tq = np.einsum("ij,jk,ik->i", vecs, tilde, vecs)
    pos = jq > 1e-10
    neg = jq < -1e-10
    r_plus = np.min(tq[pos] / jq[pos]) if np.any(pos) else np.inf
    r_minus = np.max(tq[neg] / jq[neg]) if np.any(neg) else -np.inf
    return r_minus, r_plus


def oracle_jacobian_fd(x_at, x, h=1e-5):
    """Central finite differences, column by column."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        cols.append((x_at(x + e) - x_at(x - e)) / (2.0 * h))
    return np.column_stack(cols)


def random_orthonormal(rng, n):
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    return q * np.sign(np.diag(r))


def random_indefinite_form(rng, n, index):
    """Random well-conditioned symmetric matrix with the given index."""
    q = random_orthonormal(rng, n)
    mags = rng.uniform(0.5, 2.0, size=n)
    signs = np.array([-1.0] * index + [1.0] * (n - index))
    return QuadraticFormField.from_matrix(q @ np.diag(signs * mags) @ q.T)


def make_j_separated(rng, n, index, monotone=None):
    """Construct a separated map L = R U against the standard diagonal form.

    R is built from a J-orthonormal eigenframe with negative-side values
    below the positive-side ones (that ordering is exactly cone
    preservation), U = exp(eta K) with K antisymmetric is a form isometry.
    ``monotone`` forces the strict-monotonicity sign when not None.
    """
    from scipy.linalg import expm

    from cone_verify import pseudo_gram_schmidt

    eta = np.diag([-1.0] * index + [1.0] * (n - index))
    form = QuadraticFormField.from_matrix(eta)
    # J-orthonormal frame: columns ordered negative side first
    for _ in range(100):
        try:
            frame = pseudo_gram_schmidt(form, None,
                                        np.eye(n) + 0.3 * rng.normal(size=(n, n)))
        except Exception:
            continue
        vals = np.array([frame[:, i] @ eta @ frame[:, i] for i in range(n)])
        if np.sum(vals < 0) == index:
            order = np.argsort(vals)  # negatives first
            frame = frame[:, order]
            break
    else:
        raise RuntimeError("could not build a J-orthonormal frame")
    if monotone is True:
        r_neg = rng.uniform(0.3, 0.9, size=index)
        r_pos = rng.uniform(1.1, 3.0, size=n - index)
    elif monotone is False:
        r_neg = rng.uniform(1.05, 1.4, size=index)
        r_pos = rng.uniform(1.5, 3.0, size=n - index)
    else:
        r_neg = rng.uniform(0.3, 1.2, size=index)
        r_pos = rng.uniform(np.max(r_neg) + 0.1, np.max(r_neg) + 2.0,
                            size=n - index)
    values = np.concatenate([r_neg, r_pos])
    r = frame @ np.diag(values) @ np.linalg.inv(frame)
    k = rng.normal(size=(n, n)) * 0.4
    k = k - k.T
    u = expm(eta @ k)
    return form, r @ u, r, u, np.sort(r_neg), np.sort(r_pos)
