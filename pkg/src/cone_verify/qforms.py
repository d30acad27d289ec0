"""Pseudo-Euclidean linear algebra for fields of indefinite quadratic forms.

A form field assigns to each point a non-degenerate symmetric matrix J with
a fixed number q of negative eigenvalues (0 < q < n). The quadratic value
J(v) = <Jv, v> splits the tangent space into positive/negative cones, and
the usual inner-product constructions (orthogonal complement, Gram-Schmidt,
adjoint) carry over with signs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import (
    DegenerateSubspace,
    FormValidationError,
    NonDegeneracyViolation,
)
from .linalg import eigh_small

__all__ = [
    "ConeClass",
    "QuadraticFormField",
    "evaluate",
    "cone_membership",
    "lagrange_normalize",
    "pseudo_orthogonal_complement",
    "pseudo_gram_schmidt",
    "j_adjoint",
    "parse_form_spec",
]

#: an eigenvalue is treated as zero when below this fraction of the largest
DEGENERACY_RTOL = 1e-9

#: default relative tolerance for the Zero cone class
CONE_RTOL = 1e-10


class ConeClass(Enum):
    POSITIVE = "Positive"
    NEGATIVE = "Negative"
    ZERO = "Zero"


def _validate_matrix(m, dimension, expected_index=None):
    m = np.asarray(m, dtype=float)
    if m.shape != (dimension, dimension):
        raise FormValidationError(
            f"form matrix has shape {m.shape}, expected {(dimension, dimension)}"
        )
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(m - m.T)) > 1e-9 * scale:
        raise FormValidationError("form matrix is not symmetric")
    m = 0.5 * (m + m.T)
    w, _ = eigh_small(m)
    top = float(np.max(np.abs(w)))
    if top == 0.0 or float(np.min(np.abs(w))) < DEGENERACY_RTOL * top:
        raise NonDegeneracyViolation(
            "form has an eigenvalue below the degeneracy tolerance"
        )
    q = int(np.sum(w < 0.0))
    if not 0 < q < dimension:
        raise FormValidationError(
            f"form must be indefinite, got {q} negative directions in dim {dimension}"
        )
    if expected_index is not None and q != expected_index:
        raise FormValidationError(
            f"form has index {q} at a queried point, declared {expected_index}"
        )
    return m, q


@dataclass
class QuadraticFormField:
    """Point-dependent non-degenerate symmetric bilinear form of fixed index.

    ``matrix_fn`` maps a point to the representing matrix. Constant fields
    are validated once; varying fields are re-validated per queried point
    (with a small cache) so a drifting index is caught early.
    """

    matrix_fn: object
    dimension: int
    index: int
    constant: bool = True
    cone_tol: float = CONE_RTOL
    flow_derivative: bool = False
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_matrix(cls, m, cone_tol=CONE_RTOL):
        m = np.asarray(m, dtype=float)
        n = m.shape[0]
        mat, q = _validate_matrix(m, n)
        form = cls(matrix_fn=None, dimension=n, index=q, constant=True, cone_tol=cone_tol)
        form._cache["const"] = mat
        return form

    @classmethod
    def diagonal(cls, entries, cone_tol=CONE_RTOL):
        return cls.from_matrix(np.diag(np.asarray(entries, dtype=float)), cone_tol)

    @classmethod
    def from_callable(cls, fn, dimension, index, cone_tol=CONE_RTOL,
                      flow_derivative=False):
        return cls(matrix_fn=fn, dimension=dimension, index=index, constant=False,
                   cone_tol=cone_tol, flow_derivative=flow_derivative)

    def matrix_at(self, x):
        """Validated symmetric matrix of the form at ``x``."""
        if self.constant:
            return self._cache["const"]
        x = np.asarray(x, dtype=float)
        key = x.tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        mat, _ = _validate_matrix(self.matrix_fn(x), self.dimension, self.index)
        if len(self._cache) > 1024:
            self._cache.clear()
        self._cache[key] = mat
        return mat

    def negated(self):
        """The form -J, with index n - q."""
        if self.constant:
            return QuadraticFormField.from_matrix(-self.matrix_at(None), self.cone_tol)
        fn = self.matrix_fn
        return QuadraticFormField.from_callable(
            lambda x: -np.asarray(fn(x), dtype=float),
            self.dimension, self.dimension - self.index, self.cone_tol,
            self.flow_derivative)


def _check_vector(form, v):
    v = np.asarray(v, dtype=float)
    if v.shape != (form.dimension,):
        raise ValueError(
            f"vector has shape {v.shape}, expected ({form.dimension},)")
    return v


def _as_columns(form, vectors):
    """Column-stack a sequence of vectors; n-by-k column arrays pass through."""
    arr = np.asarray(vectors, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    elif arr.shape[1] == form.dimension:
        arr = arr.T
    if arr.shape[0] != form.dimension:
        raise ValueError("vectors do not match the form dimension")
    return arr


def evaluate(form, x, v):
    """Quadratic value <J_x v, v>."""
    v = _check_vector(form, v)
    j = form.matrix_at(x)
    return float(v @ j @ v)


def cone_membership(form, x, v, tol=None):
    """Classify ``v`` against the cones of the form at ``x``.

    Positive / Negative when the quadratic value clears ``tol * |v|^2``
    in the corresponding direction; Zero otherwise.
    """
    if tol is None:
        tol = form.cone_tol
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    v = _check_vector(form, v)
    val = evaluate(form, x, v)
    thr = tol * float(v @ v)
    if val > thr:
        return ConeClass.POSITIVE
    if val < -thr:
        return ConeClass.NEGATIVE
    return ConeClass.ZERO


def lagrange_normalize(form, x=None):
    """Basis change ``B`` with ``B^T J_x B = diag(-1,...,-1,+1,...,+1)``.

    Negative directions come first. Implemented through the symmetric
    eigendecomposition, which is numerically equivalent to completing
    squares but stable. Also accepts a raw symmetric matrix, so definite
    matrices (outside the indefinite field type) can be normalized too.
    """
    if isinstance(form, np.ndarray):
        j = 0.5 * (form + form.T)
        n = j.shape[0]
    else:
        j = form.matrix_at(x)
        n = form.dimension
    w, v = eigh_small(j)
    top = float(np.max(np.abs(w)))
    if top == 0.0 or float(np.min(np.abs(w))) < DEGENERACY_RTOL * top:
        raise NonDegeneracyViolation("cannot normalize a degenerate form")
    b = v / np.sqrt(np.abs(w))[None, :]
    q = int(np.sum(w < 0.0))
    return b, (q, n - q)


def pseudo_orthogonal_complement(form, x, subspace):
    """Basis of ``{w : <J_x v, w> = 0 for all v in the subspace}``.

    The subspace must be J-non-degenerate (invertible Gram matrix),
    otherwise the complement is not transverse and ``DegenerateSubspace``
    is raised.
    """
    j = form.matrix_at(x)
    v = _as_columns(form, subspace)
    norms = np.linalg.norm(v, axis=0)
    if np.any(norms == 0.0):
        raise DegenerateSubspace("zero vector in subspace basis")
    v = v / norms[None, :]
    gram = v.T @ j @ v
    s = np.linalg.svd(gram, compute_uv=False)
    jscale = float(np.max(np.abs(j)))
    if s.size == 0 or s[-1] <= 1e-10 * max(jscale, float(s[0])):
        raise DegenerateSubspace("subspace is degenerate for the form")
    m = v.T @ j
    _, _, vh = np.linalg.svd(m)
    k = v.shape[1]
    comp = vh[k:].T
    return comp


def pseudo_gram_schmidt(form, x, basis, tol=None):
    """J-orthonormalize a basis: output columns satisfy <J u_i, u_j> = ±δij.

    Null pivots are handled by reordering the remaining vectors first and,
    when every single remaining vector is null against the current span,
    by pivoting to a sum of two remaining vectors (which preserves the
    span). If no pivot works the input spans a degenerate subspace.
    """
    if tol is None:
        tol = max(form.cone_tol, 1e-12)
    j = form.matrix_at(x)
    vecs = _as_columns(form, basis)
    remaining = [vecs[:, i].copy() for i in range(vecs.shape[1])]
    done = []
    signs = []

    def reduce_against_done(w):
        for u, sg in zip(done, signs):
            w = w - sg * float(u @ j @ w) * u
        return w

    def try_accept(cand):
        w = reduce_against_done(cand)
        nw2 = float(w @ w)
        if nw2 <= 1e-24:
            return None
        val = float(w @ j @ w)
        if abs(val) <= tol * nw2:
            return None
        u = w / np.sqrt(abs(val))
        return u, 1.0 if val > 0 else -1.0

    while remaining:
        accepted = None
        for i, cand in enumerate(remaining):
            res = try_accept(cand)
            if res is not None:
                accepted = (i, None, res)
                break
        if accepted is None:
            for i in range(len(remaining)):
                for k in range(i + 1, len(remaining)):
                    res = try_accept(remaining[i] + remaining[k])
                    if res is not None:
                        accepted = (i, k, res)
                        break
                if accepted is not None:
                    break
        if accepted is None:
            raise DegenerateSubspace("no J-non-null pivot available")
        i, _, (u, sg) = accepted
        remaining.pop(i)
        done.append(u)
        signs.append(sg)
    return np.column_stack(done)


def j_adjoint(form, x, matrix):
    """Pseudo-adjoint ``L+ = J^{-1} L^T J`` so that <JLv, w> = <Jv, L+ w>.

    Like lagrange_normalize, also accepts a raw symmetric matrix in place
    of a form field (the identity gives the ordinary transpose).
    """
    j = form if isinstance(form, np.ndarray) else form.matrix_at(x)
    m = np.asarray(matrix, dtype=float)
    if m.shape != j.shape:
        raise ValueError("operator shape does not match the form dimension")
    return np.linalg.solve(j, m.T @ j)


def parse_form_spec(spec, dimension):
    """Parse a CLI/config form description.

    Accepted shapes: ``diag:a,b,...`` for constant diagonal forms,
    ``matrix:[...]`` row-major for constant dense forms, and ``adapted``
    to request construction from a computed splitting (returned as the
    string sentinel ``"adapted"``).
    """
    spec = spec.strip()
    if spec == "adapted":
        return "adapted"
    if spec.startswith("diag:"):
        entries = [float(t) for t in spec[len("diag:"):].split(",") if t.strip()]
        if len(entries) != dimension:
            raise FormValidationError(
                f"diag form has {len(entries)} entries, expected {dimension}")
        return QuadraticFormField.diagonal(entries)
    if spec.startswith("matrix:"):
        body = spec[len("matrix:"):].strip()
        for ch in "[]":
            body = body.replace(ch, " ")
        entries = [float(t) for t in body.replace(",", " ").split() if t]
        if len(entries) != dimension * dimension:
            raise FormValidationError(
                f"matrix form has {len(entries)} entries, expected {dimension * dimension}")
        return QuadraticFormField.from_matrix(
            np.asarray(entries, dtype=float).reshape(dimension, dimension))
    raise FormValidationError(f"unrecognized form spec '{spec}'")
