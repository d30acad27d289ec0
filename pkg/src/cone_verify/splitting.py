"""Invariant-bundle extraction, polar factorization and classification.

Strict separation forces nested cone images to shrink onto invariant
subbundles; iterating the block cocycle on reference subspaces recovers
them numerically. Rates fitted along orbits, the sign trend of the
delta area and a discrete area-expansion test then sort the splitting
into the dominated / partially hyperbolic / hyperbolic taxonomy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from . import qforms
from .cocycle import delta_area, integrate_cocycle
from .errors import (
    IllConditionedSplitting,
    InconclusiveClassification,
    IntegrationError,
    NoConvergence,
    NonPositiveSpectrum,
    NotJSeparated,
    SeparationFailedOnOrbit,
    SingularityInRegion,
)
from .linalg import (
    eigh_small,
    max_principal_angle,
    min_eigenvalue,
    orthonormal_columns,
    spectral_norm,
    sqrtm_positive,
)
from .separation import Verdict, check_separation

__all__ = [
    "SplittingClass",
    "SplittingSample",
    "SplittingEstimate",
    "JPolarDecomposition",
    "BundleEvidence",
    "extract_bundles",
    "j_polar_decompose",
    "sigma_d",
    "cone_image_contraction",
    "estimate_domination",
    "check_sectional_expansion",
    "calibrate_block_time",
    "classify_splitting",
    "classify_region",
    "build_adapted_form",
    "flow_direction_check",
    "dual_form_hyperbolicity",
    "singularity_index_ok",
    "DualFormResult",
    "ClassificationReport",
]


class SplittingClass(Enum):
    DOMINATED_ONLY = "DominatedOnly"
    PH_CONTRACTING = "PartiallyHyperbolicContracting"
    PH_EXPANDING = "PartiallyHyperbolicExpanding"
    HYPERBOLIC = "Hyperbolic"
    SECTIONAL_HYPERBOLIC = "SectionalHyperbolic"
    NONE = "None"


@dataclass
class SplittingSample:
    point: np.ndarray
    f_minus: np.ndarray  # (n, q) columns
    f_plus: np.ndarray   # (n, p) columns


@dataclass
class SplittingEstimate:
    samples: list
    domination_rate: float
    fit_constant: float
    classification: SplittingClass
    flow_in_plus: bool

    def to_json_dict(self):
        """JSON shape: bases as row-major vector arrays, rates, class string."""
        return {
            "samples": [
                {
                    "point": [float(v) for v in s.point],
                    "f_minus": [[float(v) for v in row] for row in
                                np.asarray(s.f_minus).T],
                    "f_plus": [[float(v) for v in row] for row in
                               np.asarray(s.f_plus).T],
                }
                for s in self.samples
            ],
            "domination_rate": float(self.domination_rate),
            "fit_constant": float(self.fit_constant),
            "classification": self.classification.value,
            "flow_in_plus": bool(self.flow_in_plus),
        }


@dataclass
class JPolarDecomposition:
    """Factorization L = R U with R form-symmetric positive and U a form isometry."""

    r_matrix: np.ndarray
    u_matrix: np.ndarray
    minus_values: np.ndarray  # ascending, eigenvectors in the negative cone
    plus_values: np.ndarray   # ascending, eigenvectors in the positive cone

    @property
    def spectrum(self):
        return np.concatenate([self.minus_values, self.plus_values])

    @property
    def r_minus_top(self):
        """Largest negative-side value (the contraction witness)."""
        return float(self.minus_values[-1])

    @property
    def r_plus_bottom(self):
        """Smallest positive-side value (the expansion witness)."""
        return float(self.plus_values[0])


@dataclass
class BundleEvidence:
    domination_rate: Optional[float] = None
    sectional_ok: Optional[bool] = None
    singularities_ok: Optional[bool] = None


def _reference_subspaces(form, x):
    """Standard negative/positive subspaces of the normalized form at x."""
    b, (q, _) = qforms.lagrange_normalize(form, x)
    return b[:, :q], b[:, q:]


def _require_strict(form, vf, x, t):
    cert = check_separation(form, vf, x)
    if cert.verdict is not Verdict.STRICT:
        raise SeparationFailedOnOrbit(t, x, cert.verdict.value)


def extract_bundles(form, vf, x, block_time, iters, dt=1e-3, angle_tol=1e-8,
                    stagnation_tol=1e-6):
    """Recover the invariant bundles at ``x`` by iterated cone images.

    The positive bundle is the limit of block-cocycle images of the
    reference positive subspace seeded ever further down the backward
    orbit; the negative bundle mirrors the construction with time
    reversed. Convergence is measured by the principal-angle gap between
    successive iterates at ``x``.
    """
    x = np.asarray(x, dtype=float)
    if block_time <= 0:
        raise ValueError("block_time must be positive")
    if iters < 1:
        raise ValueError("iters must be at least 1")
    _require_strict(form, vf, x, 0.0)

    def collect_legs(model, orientation):
        """Anchors and one-block fundamentals along an orbit of ``model``."""
        anchors = [x]
        blocks = []
        cur = x
        for j in range(iters):
            leg = integrate_cocycle(model, cur, block_time, dt=dt,
                                    self_check=False, enforce_region=False)
            cur = leg.states[-1]
            _require_strict(form, vf, cur, orientation * (j + 1) * block_time)
            anchors.append(cur)
            blocks.append(leg.fundamentals[-1])
        return anchors, blocks

    def iterate(seed_side, blocks, anchors):
        # prefix product maps the seed at anchor k back to the base point
        prefix = np.eye(vf.dimension)
        prev = None
        angles = []
        subspace = None
        for k in range(1, iters + 1):
            prefix = prefix @ blocks[k - 1]
            prefix = prefix / max(np.linalg.norm(prefix), 1e-300)
            seed = _reference_subspaces(form, anchors[k])[seed_side]
            subspace = orthonormal_columns(prefix @ seed)
            if prev is not None:
                gap = max_principal_angle(subspace, prev)
                angles.append(gap)
                if gap < angle_tol:
                    return subspace, angles
            prev = subspace
        if angles and angles[-1] >= stagnation_tol:
            raise NoConvergence(angles[-1])
        return subspace, angles

    # each backward leg provides the next anchor and, inverted, the forward
    # block A_T mapping that anchor one block toward the base point
    back_anchors, back_blocks = collect_legs(vf.reversed(), -1)
    plus_blocks = [np.linalg.inv(b) for b in back_blocks]
    f_plus, plus_angles = iterate(1, plus_blocks, back_anchors)

    # reversed roles for the negative bundle: forward anchors, inverse blocks
    fwd_anchors, fwd_blocks = collect_legs(vf, +1)
    minus_blocks = [np.linalg.inv(b) for b in fwd_blocks]
    f_minus, minus_angles = iterate(0, minus_blocks, fwd_anchors)

    return f_minus, f_plus, {"minus": minus_angles, "plus": plus_angles}


def j_polar_decompose(form, x, matrix, n_checks=50, seed=0, rtol=1e-8):
    """Polar factorization of a cone-preserving map: L = R U.

    R is the form-symmetric square root of L L+ (positive spectrum) and
    U = R^{-1} L preserves the quadratic value. The eigenvectors of R sort
    its spectrum into a negative-cone side and a positive-cone side.
    """
    x = None if x is None else np.asarray(x, dtype=float)
    mat = np.asarray(matrix, dtype=float)
    n = form.dimension
    if mat.shape != (n, n):
        raise ValueError("operator shape does not match the form dimension")

    # cone-preservation spot check on sampled positive vectors
    rng = np.random.default_rng(seed)
    accepted = 0
    tries = 0
    while accepted < n_checks and tries < 100 * n_checks + 100:
        tries += 1
        u = rng.normal(size=n)
        u /= max(np.linalg.norm(u), 1e-300)
        if qforms.cone_membership(form, x, u) is not qforms.ConeClass.POSITIVE:
            continue
        accepted += 1
        if qforms.evaluate(form, x, mat @ u) <= 0.0:
            raise NotJSeparated("a positive-cone vector maps out of the cone")

    lplus = qforms.j_adjoint(form, x, mat)
    m = mat @ lplus
    eigvals, eigvecs = np.linalg.eig(m)
    top = float(np.max(np.abs(eigvals)))
    if np.any(np.abs(eigvals.imag) > 1e-8 * max(top, 1.0)) or \
            np.any(eigvals.real <= 1e-12 * max(top, 1.0)):
        raise NonPositiveSpectrum(
            "L L+ does not have a real positive spectrum")
    r = sqrtm_positive(m)
    u = np.linalg.solve(r, mat)
    # Newton polish toward the isometry manifold (U+ U = Id), then refit R;
    # recovers accuracy lost to the square root on ill-conditioned inputs
    for _ in range(4):
        u_adj = qforms.j_adjoint(form, x, u)
        u_next = 0.5 * (u + np.linalg.inv(u_adj))
        step = np.linalg.norm(u_next - u) / max(np.linalg.norm(u), 1e-300)
        u = u_next
        if step < 1e-15:
            break
    r = mat @ np.linalg.inv(u)
    r = 0.5 * (r + qforms.j_adjoint(form, x, r))
    minus_vals, plus_vals = _split_spectrum_by_cone(form, x, eigvals.real,
                                                    eigvecs)
    if len(minus_vals) != form.index:
        raise NotJSeparated(
            f"{len(minus_vals)} negative-side polar directions, expected {form.index}")
    residual = np.linalg.norm(r @ u - mat) / max(np.linalg.norm(mat), 1e-300)
    if residual > rtol:
        raise NonPositiveSpectrum(
            f"polar residual {residual:.3e} above tolerance {rtol:g}")
    return JPolarDecomposition(r_matrix=r, u_matrix=u,
                               minus_values=minus_vals, plus_values=plus_vals)


def _invariant_subspace_basis(columns, size):
    """Real orthonormal basis of the span of (possibly complex) eigvecs.

    Near-degenerate real eigenvalues may come back from the eigensolver as
    a conjugate pair whose real parts coincide; spanning with the real and
    imaginary parts together recovers the right subspace.
    """
    stacked = np.column_stack([columns.real, columns.imag])
    u, s, _ = np.linalg.svd(stacked, full_matrices=False)
    if s[size - 1] <= 1e-10 * max(s[0], 1.0):
        raise NonPositiveSpectrum("polar eigenspace is numerically defective")
    return u[:, :size]


def _split_spectrum_by_cone(form, x, eigvals, eigvecs, group_rtol=1e-6):
    """Sort sqrt-eigenvalues into negative/positive cone sides.

    Repeated eigenvalues leave individual eigenvectors arbitrary, so
    near-equal values are grouped and the group eigenspace contributes its
    form signature (a negatives, b positives) instead of per-vector signs.
    """
    j = form.matrix_at(x)
    order = np.argsort(eigvals, kind="stable")
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    top = max(float(eigvals[-1]), 1.0)
    minus_vals = []
    plus_vals = []
    start = 0
    n = eigvals.shape[0]
    while start < n:
        stop = start + 1
        while stop < n and eigvals[stop] - eigvals[stop - 1] <= group_rtol * top:
            stop += 1
        basis = _invariant_subspace_basis(eigvecs[:, start:stop], stop - start)
        gram = basis.T @ j @ basis
        w, _ = eigh_small(0.5 * (gram + gram.T))
        scale = max(float(np.max(np.abs(w))), 1e-300)
        if np.any(np.abs(w) <= 1e-8 * scale):
            raise NotJSeparated("polar eigenspace touches the cone boundary")
        values = np.sqrt(eigvals[start:stop])
        n_neg = int(np.sum(w < 0.0))
        minus_vals.extend(values[:n_neg])
        plus_vals.extend(values[n_neg:])
        start = stop
    return np.sort(np.asarray(minus_vals)), np.sort(np.asarray(plus_vals))


def sigma_d(decomp, d):
    """Least d-volume expansion on positive-cone subspaces: r+^1 ... r+^d."""
    p = decomp.plus_values.shape[0]
    if not 1 <= d <= p:
        raise ValueError(f"d must be in [1, {p}]")
    return float(np.prod(decomp.plus_values[:d]))


def _graph_subspace(frame, q, tail):
    """Subspace of the positive cone as a graph over the positive axes."""
    p = frame.shape[1] - q
    return frame @ np.vstack([tail, np.eye(p)])


def cone_image_contraction(form, vf, x, block_time, n_pairs, seed=0, dt=1e-3,
                           max_tail=0.25):
    """Empirical shrinkage of the positive-cone Grassmannian under one block.

    Pairs of positive-cone subspaces are sampled as graphs over the
    normalized positive axes with tail norm up to ``max_tail``; the metric
    is the max principal angle. The contraction factor is not asserted here
    (it is only derivable on special fixtures); callers compare the
    returned max ratio against 1 or a fixture-specific bound.
    """
    x = np.asarray(x, dtype=float)
    if block_time == 0.0:
        return 1.0
    traj = integrate_cocycle(vf, x, block_time, dt=dt, self_check=False,
                             enforce_region=False)
    stride = max(1, len(traj.times) // 16)
    for i in range(0, len(traj.times), stride):
        _require_strict(form, vf, traj.states[i], traj.times[i])
    _require_strict(form, vf, traj.states[-1], traj.times[-1])
    amat = traj.fundamentals[-1]
    frame, (q, p) = qforms.lagrange_normalize(form, x)

    rng = np.random.default_rng(seed)
    worst = 0.0
    produced = 0
    while produced < n_pairs:
        tails = []
        for _ in range(2):
            t = rng.normal(size=(q, p))
            norm = np.linalg.svd(t, compute_uv=False)[0]
            t *= max_tail * rng.random() / max(norm, 1e-300)
            tails.append(t)
        s1 = _graph_subspace(frame, q, tails[0])
        s2 = _graph_subspace(frame, q, tails[1])
        gap0 = max_principal_angle(s1, s2)
        if gap0 < 1e-10:
            continue
        produced += 1
        gap1 = max_principal_angle(amat @ s1, amat @ s2)
        worst = max(worst, gap1 / gap0)
    return float(worst)


def estimate_domination(traj, f_minus, f_plus):
    """Least-squares domination rate from transported bundles.

    Fits log(|A_t restricted to F-| * |(A_t restricted to F+)^-1|)
    against log(K) - lambda t over the whole grid; a positive lambda is
    the domination rate.
    """
    b_minus = orthonormal_columns(np.asarray(f_minus, dtype=float))
    b_plus = orthonormal_columns(np.asarray(f_plus, dtype=float))
    times = traj.times
    y = np.empty(len(times))
    for i in range(len(times)):
        a = traj.fundamentals[i]
        s_minus = np.linalg.svd(a @ b_minus, compute_uv=False)
        s_plus = np.linalg.svd(a @ b_plus, compute_uv=False)
        y[i] = math.log(s_minus[0]) - math.log(s_plus[-1])
    coeffs = np.polyfit(times, y, 1)
    lam = -float(coeffs[0])
    k_hat = float(math.exp(min(coeffs[1], 700.0)))
    return k_hat, lam


def calibrate_block_time(traj, f_minus, factor=0.5):
    """Smallest grid time at which the negative bundle is contracted below
    ``factor``; None when the horizon is too short."""
    b_minus = orthonormal_columns(np.asarray(f_minus, dtype=float))
    for i in range(1, len(traj.times)):
        norm = np.linalg.svd(traj.fundamentals[i] @ b_minus, compute_uv=False)[0]
        if norm < factor:
            return float(traj.times[i])
    return None


def check_sectional_expansion(traj, f_plus, n_planes, block_time, seed=0,
                              threshold=2.0):
    """Discrete area-expansion test on random 2-planes of the positive bundle.

    The determinant of the block map restricted to each plane (Gram ratio)
    must exceed the threshold.
    """
    b_plus = orthonormal_columns(np.asarray(f_plus, dtype=float))
    p = b_plus.shape[1]
    if p < 2:
        raise ValueError("sectional test needs a bundle of dimension >= 2")
    idx = traj.index_of_time(block_time)
    amat = traj.fundamentals[idx]
    rng = np.random.default_rng(seed)
    worst = math.inf
    for _ in range(n_planes):
        w = orthonormal_columns(rng.normal(size=(p, 2)))
        plane = b_plus @ w
        image = amat @ plane
        gram = image.T @ image
        det = math.sqrt(max(float(np.linalg.det(gram)), 0.0))
        worst = min(worst, det)
    return worst > threshold, float(worst)


def singularity_index_ok(vf, index, re_tol=1e-8):
    """Hyperbolicity and index compatibility of the listed singularities.

    Every singularity must have eigenvalues off the imaginary axis and a
    stable index equal to the splitting index or one more.
    """
    if not vf.singularities:
        return True
    for sigma in vf.singularities:
        eigvals = np.linalg.eigvals(vf.DX_at(np.asarray(sigma, dtype=float)))
        if np.any(np.abs(eigvals.real) <= re_tol):
            return False
        ind = int(np.sum(eigvals.real < 0.0))
        if ind not in (index, index + 1):
            return False
    return True


def classify_splitting(region_certificates, delta_trends, bundle_checks,
                       slope_tol=1e-3):
    """Sort sampled evidence into the splitting taxonomy.

    Requires strict certificates everywhere. Hyperbolic needs the
    derivative operator itself positive definite (equivalently zero in the
    interior of every admissible interval); otherwise a uniform sign of
    the delta-area slope gives the partially hyperbolic verdicts, refined
    to sectional when the area test and the singularity conditions hold.
    """
    certs = list(region_certificates)
    if not certs:
        raise InconclusiveClassification("no samples")
    for cert in certs:
        if cert.verdict is not Verdict.STRICT:
            raise ValueError("classification requires strict separation at "
                             "every sample")

    def tilde_positive(cert):
        threshold = 1e-8 * spectral_norm(cert.tilde_matrix)
        return (cert.r_minus < 0.0 < cert.r_plus
                and min_eigenvalue(cert.tilde_matrix) > threshold)

    if all(tilde_positive(c) for c in certs):
        return SplittingClass.HYPERBOLIC

    slopes = np.asarray(list(delta_trends), dtype=float)
    has_pos = bool(np.any(slopes > slope_tol))
    has_neg = bool(np.any(slopes < -slope_tol))
    if has_pos and has_neg:
        raise InconclusiveClassification("delta-area slopes change sign across samples")
    if has_pos and np.all(slopes > slope_tol):
        return SplittingClass.PH_EXPANDING
    if has_neg and np.all(slopes < -slope_tol):
        if bundle_checks is not None and bundle_checks.sectional_ok \
                and bundle_checks.singularities_ok:
            return SplittingClass.SECTIONAL_HYPERBOLIC
        return SplittingClass.PH_CONTRACTING
    if bundle_checks is not None and bundle_checks.domination_rate is not None \
            and bundle_checks.domination_rate > 0.0:
        return SplittingClass.DOMINATED_ONLY
    return SplittingClass.NONE


@dataclass
class ClassificationReport:
    classification: SplittingClass
    estimate: Optional[SplittingEstimate]
    certificates: list
    delta_slopes: list
    evidence: BundleEvidence


def classify_region(form, vf, points, horizon=50.0, dt=1e-3, trend_grid=512,
                    block_time=1.0, iters=12, n_trend_samples=4,
                    flow_angle_tol=1e-6):
    """End-to-end classification pipeline over sampled points.

    Computes certificates at every point, delta-area slopes over the
    second half of the horizon at a few of them, extracts bundles at the
    first point for the domination / sectional evidence, and hands
    everything to the classifier.
    """
    pts = [np.asarray(p, dtype=float) for p in points]
    certs = [check_separation(form, vf, p) for p in pts]
    if any(c.verdict is Verdict.FAIL for c in certs):
        return ClassificationReport(SplittingClass.NONE, None, certs, [],
                                    BundleEvidence())
    if any(c.verdict is not Verdict.STRICT for c in certs):
        raise InconclusiveClassification("non-strict samples present")

    trend_dt = max(dt, horizon / float(trend_grid))
    slopes = []
    for p in pts[:max(1, n_trend_samples)]:
        traj = integrate_cocycle(vf, p, horizon, dt=trend_dt, self_check=False)
        half = traj.times[len(traj.times) // 2]
        area = delta_area(form, vf, traj, half, traj.times[-1])
        span = float(traj.times[-1] - half)
        slopes.append(area.midpoint / span if span > 0 else 0.0)

    evidence = BundleEvidence()
    estimate = None
    try:
        f_minus, f_plus, _ = extract_bundles(form, vf, pts[0], block_time,
                                             iters, dt=dt)
    except (NoConvergence, SeparationFailedOnOrbit, IntegrationError):
        # no bundle evidence (diverging legs or lost separation along the
        # orbit); trends and certificates still decide what they can
        pass
    else:
        fit_horizon = min(5.0, horizon)
        fit_traj = integrate_cocycle(vf, pts[0], fit_horizon, dt=dt,
                                     self_check=False)
        k_hat, lam = estimate_domination(fit_traj, f_minus, f_plus)
        evidence.domination_rate = lam
        calibrated = calibrate_block_time(fit_traj, f_minus)
        if calibrated is not None and f_plus.shape[1] >= 2:
            ok, _ = check_sectional_expansion(fit_traj, f_plus, 16, calibrated)
            evidence.sectional_ok = ok
        evidence.singularities_ok = singularity_index_ok(vf, form.index)
        flow_ok = flow_direction_check(
            vf, [SplittingSample(pts[0], f_minus, f_plus)], flow_angle_tol)
        estimate = SplittingEstimate(
            samples=[SplittingSample(pts[0], f_minus, f_plus)],
            domination_rate=lam, fit_constant=k_hat,
            classification=SplittingClass.NONE, flow_in_plus=flow_ok)

    classification = classify_splitting(certs, slopes, evidence)
    if estimate is not None:
        estimate.classification = classification
    return ClassificationReport(classification, estimate, certs, slopes, evidence)


def build_adapted_form(samples, angle_floor=1e-6):
    """Quadratic-form field adapted to sampled bundles.

    At each sample the matrix is P+^T P+ - P-^T P- built from the oblique
    projections onto each bundle along the other; between samples the
    nearest sample wins.
    """
    prepared = []
    for sample in samples:
        point = np.asarray(sample.point, dtype=float)
        b_minus = orthonormal_columns(np.asarray(sample.f_minus, dtype=float))
        b_plus = orthonormal_columns(np.asarray(sample.f_plus, dtype=float))
        n = b_minus.shape[0]
        q = b_minus.shape[1]
        full = np.column_stack([b_minus, b_plus])
        if full.shape[1] != n:
            raise ValueError("bundle dimensions do not fill the space")
        if _min_bundle_angle(b_minus, b_plus) < angle_floor:
            raise IllConditionedSplitting(
                "bundles are closer than the conditioning floor")
        inv = np.linalg.inv(full)
        proj_minus = full[:, :q] @ inv[:q, :]
        proj_plus = full[:, q:] @ inv[q:, :]
        j = proj_plus.T @ proj_plus - proj_minus.T @ proj_minus
        prepared.append((point, 0.5 * (j + j.T), q))

    q0 = prepared[0][2]
    n0 = prepared[0][1].shape[0]
    if any(q != q0 for _, _, q in prepared):
        raise ValueError("samples disagree on the bundle dimensions")
    points = np.array([p for p, _, _ in prepared])
    matrices = [m for _, m, _ in prepared]

    if len(prepared) == 1:
        return qforms.QuadraticFormField.from_matrix(matrices[0])

    def lookup(x):
        x = np.asarray(x, dtype=float)
        idx = int(np.argmin(np.linalg.norm(points - x[None, :], axis=1)))
        return matrices[idx]

    return qforms.QuadraticFormField.from_callable(
        lookup, n0, q0, flow_derivative=True)


def _min_bundle_angle(b_minus, b_plus):
    """Smallest principal angle between two (orthonormal) bundles."""
    s = np.linalg.svd(b_minus.T @ b_plus, compute_uv=False)
    s = np.clip(s, -1.0, 1.0)
    return float(np.arccos(np.max(s))) if s.size else math.pi / 2.0


def flow_direction_check(vf, samples, angle_tol):
    """True when the field lies inside the positive bundle at every sample."""
    for sample in samples:
        x = np.asarray(sample.point, dtype=float)
        flow = np.asarray(vf.X_at(x), dtype=float)
        speed = np.linalg.norm(flow)
        if speed <= 1e-8:
            continue
        b_plus = orthonormal_columns(np.asarray(sample.f_plus, dtype=float))
        cosine = np.linalg.norm(b_plus.T @ (flow / speed))
        angle = math.acos(min(1.0, max(-1.0, cosine)))
        if angle > angle_tol:
            return False
    return True


@dataclass
class DualFormResult:
    hyperbolic: bool
    forward_certificates: list
    backward_certificates: list
    forward_nonnegative: bool
    backward_nonnegative: bool


def dual_form_hyperbolicity(form_j, form_g, vf, region_samples, sing_tol=1e-8):
    """Two-sided separation test for uniform hyperbolicity.

    The forward field must be strictly separated and nonnegative for the
    index-s form; the reversed field must be strictly separated and
    nonnegative for the negated second form (of index n-s-1). Both checks
    require a singularity-free sample set.
    """
    n = vf.dimension
    s = form_j.index
    if not s < n - 2:
        raise ValueError("first form index must satisfy s < n - 2")
    if form_g.index != n - s - 1:
        raise ValueError(
            f"second form must have index {n - s - 1}, got {form_g.index}")
    samples = [np.asarray(p, dtype=float) for p in region_samples]
    for p in samples:
        if np.linalg.norm(vf.X_at(p)) < sing_tol:
            raise SingularityInRegion(p)

    reversed_vf = vf.reversed()
    neg_g = form_g.negated()
    fwd_certs = [check_separation(form_j, vf, p) for p in samples]
    bwd_certs = [check_separation(neg_g, reversed_vf, p) for p in samples]
    fwd_nonneg = all(
        qforms.evaluate(form_j, p, vf.X_at(p)) >= -1e-12 for p in samples)
    bwd_nonneg = all(
        qforms.evaluate(neg_g, p, vf.X_at(p)) >= -1e-12 for p in samples)
    ok = (all(c.verdict is Verdict.STRICT for c in fwd_certs) and fwd_nonneg
          and all(c.verdict is Verdict.STRICT for c in bwd_certs) and bwd_nonneg)
    return DualFormResult(
        hyperbolic=bool(ok),
        forward_certificates=fwd_certs,
        backward_certificates=bwd_certs,
        forward_nonnegative=bool(fwd_nonneg),
        backward_nonnegative=bool(bwd_nonneg))
