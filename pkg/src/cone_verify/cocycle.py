"""Flow and derivative-cocycle integration plus orbit-level inequalities.

One fixed-step classical 4th-order integrator advances the state and the
fundamental matrix on a shared grid, so quadrature of the separation rate
and the cocycle live on the same time points. Growth and quotient bounds
are then a matter of comparing logs along the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import qforms
from .errors import (
    EscapedRegion,
    IntegrationError,
    NegativeVectorEscapedCone,
    NonFinite,
    SeparationFailedOnOrbit,
)
from .separation import Verdict, check_separation

__all__ = [
    "TrajectoryCocycle",
    "DeltaArea",
    "integrate_flow",
    "integrate_cocycle",
    "delta_area",
    "verify_growth_bound",
    "verify_quotient_bound",
    "cone_invariance_test",
    "GrowthCheck",
    "ConeInvarianceResult",
    "orbit_delta_endpoints",
]


@dataclass
class TrajectoryCocycle:
    """States and fundamental matrices of the variational equation on a grid."""

    times: np.ndarray        # (k+1,)
    states: np.ndarray       # (k+1, n)
    fundamentals: np.ndarray  # (k+1, n, n)
    step: float
    method_order: int = 4

    @property
    def dimension(self):
        return self.states.shape[1]

    def index_of_time(self, t, tol=1e-9):
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > tol * max(1.0, abs(t)):
            raise ValueError(f"t={t} is not on the trajectory grid")
        return idx

    def to_csv(self, path):
        """Dump as CSV with header t,x1..xn,Y11..Ynn (row-major)."""
        n = self.dimension
        header = ",".join(
            ["t"] + [f"x{i+1}" for i in range(n)]
            + [f"Y{i+1}{j+1}" for i in range(n) for j in range(n)])
        flat = self.fundamentals.reshape(len(self.times), n * n)
        data = np.column_stack([self.times, self.states, flat])
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(header + "\n")
            for row in data:
                fh.write(",".join(format(v, ".17g") for v in row) + "\n")


@dataclass
class DeltaArea:
    """Integrals of the separation-rate endpoints along an orbit segment."""

    lower: float
    upper: float
    midpoint: float
    horizon: tuple


def _grid(t_final, dt):
    if t_final < 0:
        raise ValueError("t_final must be nonnegative; reverse the field instead")
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_final == 0.0:
        return 0, dt
    k = max(1, int(round(t_final / dt)))
    return k, t_final / k


def _check_state(x, t, vf, enforce_region):
    if not np.all(np.isfinite(x)):
        raise NonFinite(t)
    if enforce_region and vf.region is not None and not vf.region.contains(x):
        raise EscapedRegion(t, x)


def _run_flow(vf, x0, n_steps, dt, enforce_region):
    n = x0.shape[0]
    states = np.empty((n_steps + 1, n))
    states[0] = x0
    x = x0.copy()
    f = vf.X_at
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n_steps):
            k1 = f(x)
            k2 = f(x + 0.5 * dt * k1)
            k3 = f(x + 0.5 * dt * k2)
            k4 = f(x + dt * k3)
            x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            _check_state(x, (i + 1) * dt, vf, enforce_region)
            states[i + 1] = x
    return states


def _run_cocycle(vf, x0, n_steps, dt, enforce_region):
    n = x0.shape[0]
    states = np.empty((n_steps + 1, n))
    fundamentals = np.empty((n_steps + 1, n, n))
    states[0] = x0
    fundamentals[0] = np.eye(n)
    x = x0.copy()
    y = np.eye(n)
    f, df = vf.X_at, vf.DX_at
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n_steps):
            k1 = f(x)
            m1 = df(x) @ y
            x2 = x + 0.5 * dt * k1
            k2 = f(x2)
            m2 = df(x2) @ (y + 0.5 * dt * m1)
            x3 = x + 0.5 * dt * k2
            k3 = f(x3)
            m3 = df(x3) @ (y + 0.5 * dt * m2)
            x4 = x + dt * k3
            k4 = f(x4)
            m4 = df(x4) @ (y + dt * m3)
            x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            y = y + (dt / 6.0) * (m1 + 2.0 * m2 + 2.0 * m3 + m4)
            t = (i + 1) * dt
            _check_state(x, t, vf, enforce_region)
            if not np.all(np.isfinite(y)):
                raise NonFinite(t)
            states[i + 1] = x
            fundamentals[i + 1] = y
    return states, fundamentals


def integrate_flow(vf, x0, t_final, dt=1e-3, self_check=True, check_tol=1e-6,
                   enforce_region=True, max_halvings=6):
    """Integrate the state path over [0, t_final] on a fixed grid.

    When ``self_check`` is on, the terminal state is compared against a
    halved-step rerun; the step halves until the two agree to ``check_tol``
    relative.
    """
    x0 = np.asarray(x0, dtype=float)
    _check_state(x0, 0.0, vf, enforce_region)
    for _ in range(max_halvings + 1):
        n_steps, eff_dt = _grid(t_final, dt)
        states = _run_flow(vf, x0, n_steps, eff_dt, enforce_region)
        if not self_check or n_steps == 0:
            times = np.arange(n_steps + 1) * eff_dt
            return times, states
        fine = _run_flow(vf, x0, 2 * n_steps, 0.5 * eff_dt, enforce_region)
        err = np.linalg.norm(states[-1] - fine[-1]) / (1.0 + np.linalg.norm(fine[-1]))
        if err <= check_tol:
            times = np.arange(n_steps + 1) * eff_dt
            return times, states
        dt *= 0.5
    raise IntegrationError(
        f"step halving did not reach self-consistency {check_tol:g}")


def integrate_cocycle(vf, x0, t_final, dt=1e-3, self_check=True, check_tol=1e-6,
                      enforce_region=True, max_halvings=6):
    """Joint integration of the state and the fundamental matrix.

    The fundamental matrix solves Ydot = DX(X_t(x)) Y with Y(0) = Id on the
    same grid as the state.
    """
    x0 = np.asarray(x0, dtype=float)
    _check_state(x0, 0.0, vf, enforce_region)
    for _ in range(max_halvings + 1):
        n_steps, eff_dt = _grid(t_final, dt)
        states, fundamentals = _run_cocycle(vf, x0, n_steps, eff_dt, enforce_region)
        if not self_check or n_steps == 0:
            return TrajectoryCocycle(np.arange(n_steps + 1) * eff_dt,
                                     states, fundamentals, eff_dt)
        fine_states, _ = _run_cocycle(vf, x0, 2 * n_steps, 0.5 * eff_dt, enforce_region)
        err = (np.linalg.norm(states[-1] - fine_states[-1])
               / (1.0 + np.linalg.norm(fine_states[-1])))
        if err <= check_tol:
            return TrajectoryCocycle(np.arange(n_steps + 1) * eff_dt,
                                     states, fundamentals, eff_dt)
        dt *= 0.5
    raise IntegrationError(
        f"step halving did not reach self-consistency {check_tol:g}")


def orbit_delta_endpoints(form, vf, traj, start=0, stop=None):
    """Admissible-delta endpoints at every grid state of a trajectory.

    Raises SeparationFailedOnOrbit at the first grid state whose
    certificate is Fail.
    """
    stop = len(traj.times) if stop is None else stop
    r_minus = np.empty(stop - start)
    r_plus = np.empty(stop - start)
    for k, i in enumerate(range(start, stop)):
        cert = check_separation(form, vf, traj.states[i])
        if cert.verdict is Verdict.FAIL:
            raise SeparationFailedOnOrbit(traj.times[i], traj.states[i],
                                          cert.verdict.value)
        r_minus[k] = cert.r_minus
        r_plus[k] = cert.r_plus
    return r_minus, r_plus


def _cumtrapz(values, dt):
    out = np.empty(values.shape[0])
    out[0] = 0.0
    if values.shape[0] > 1:
        out[1:] = np.cumsum(0.5 * (values[1:] + values[:-1]) * dt)
    return out


def delta_area(form, vf, traj, s, t):
    """Trapezoidal integrals of the delta endpoints over [s, t] of the orbit."""
    i0 = traj.index_of_time(s)
    i1 = traj.index_of_time(t)
    if i1 < i0:
        raise ValueError("need s <= t")
    r_minus, r_plus = orbit_delta_endpoints(form, vf, traj, i0, i1 + 1)
    dt = traj.step
    lower = float(np.trapezoid(r_minus, dx=dt)) if i1 > i0 else 0.0
    upper = float(np.trapezoid(r_plus, dx=dt)) if i1 > i0 else 0.0
    return DeltaArea(lower=lower, upper=upper, midpoint=0.5 * (lower + upper),
                     horizon=(float(s), float(t)))


@dataclass
class GrowthCheck:
    ok: bool
    worst_margin: float
    margins: np.ndarray


def verify_growth_bound(form, vf, traj, v, delta_choice="lower", tol=1e-8):
    """Check |J(A_t v)| >= |J(v)| exp(Delta_0^t) along the whole grid.

    ``delta_choice`` picks which endpoint of the admissible interval feeds
    the area integral; margins are logarithmic, so 0 means the bound is
    attained exactly.
    """
    if delta_choice not in ("lower", "upper", "mid"):
        raise ValueError("delta_choice must be lower, upper or mid")
    v = np.asarray(v, dtype=float)
    j0 = qforms.evaluate(form, traj.states[0], v)
    if j0 <= 0.0:
        raise ValueError("initial vector must be form-positive")
    r_minus, r_plus = orbit_delta_endpoints(form, vf, traj)
    if delta_choice == "lower":
        rate = r_minus
    elif delta_choice == "upper":
        rate = r_plus
    else:
        rate = 0.5 * (r_minus + r_plus)
    area = _cumtrapz(rate, traj.step)
    margins = np.empty(len(traj.times))
    for i in range(len(traj.times)):
        ji = qforms.evaluate(form, traj.states[i], traj.fundamentals[i] @ v)
        if ji == 0.0:
            margins[i] = -math.inf
        else:
            margins[i] = math.log(abs(ji)) - math.log(abs(j0)) - area[i]
    worst = float(np.min(margins))
    return GrowthCheck(ok=bool(worst >= -tol), worst_margin=worst, margins=margins)


def verify_quotient_bound(form, vf, traj, w, v, tol=1e-8):
    """Check |J(A_t w)| / J(A_t v) <= (|J(w)|/J(v)) exp(2 Delta_0^t).

    The area uses the upper endpoint of the admissible interval; the
    negative vector must stay in the negative cone along the grid.
    """
    w = np.asarray(w, dtype=float)
    v = np.asarray(v, dtype=float)
    jv0 = qforms.evaluate(form, traj.states[0], v)
    jw0 = qforms.evaluate(form, traj.states[0], w)
    if jv0 <= 0.0:
        raise ValueError("v must be form-positive at the start")
    if jw0 >= 0.0:
        raise ValueError("w must be form-negative at the start")
    _, r_plus = orbit_delta_endpoints(form, vf, traj)
    area = _cumtrapz(r_plus, traj.step)
    margins = np.empty(len(traj.times))
    for i in range(len(traj.times)):
        a = traj.fundamentals[i]
        jw = qforms.evaluate(form, traj.states[i], a @ w)
        jv = qforms.evaluate(form, traj.states[i], a @ v)
        if jw >= 0.0:
            raise NegativeVectorEscapedCone(traj.times[i])
        if jv <= 0.0:
            raise SeparationFailedOnOrbit(traj.times[i], traj.states[i],
                                          "positive vector left its cone")
        margins[i] = (math.log(abs(jw0) / jv0) + 2.0 * area[i]
                      - math.log(abs(jw) / jv))
    worst = float(np.min(margins))
    return GrowthCheck(ok=bool(worst >= -tol), worst_margin=worst, margins=margins)


@dataclass
class ConeInvarianceResult:
    fraction: float
    counterexample: Optional[tuple]  # (vector, time) of the first violation


def cone_invariance_test(form, vf, x0, horizon, n_samples, seed, dt=1e-3):
    """Push random positive-cone unit vectors through the cocycle.

    Reports the fraction whose image is still in the open positive cone at
    the final time, and the first (vector, time) violation on the grid.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    x0 = np.asarray(x0, dtype=float)
    rng = np.random.default_rng(seed)
    n = x0.shape[0]
    vectors = []
    tries = 0
    while len(vectors) < n_samples and tries < 1000 * n_samples + 1000:
        tries += 1
        u = rng.normal(size=n)
        u /= max(np.linalg.norm(u), 1e-300)
        if qforms.cone_membership(form, x0, u) is qforms.ConeClass.POSITIVE:
            vectors.append(u)
    if len(vectors) < n_samples:
        raise ValueError("could not sample the positive cone; is the form indefinite?")
    vmat = np.column_stack(vectors)

    traj = integrate_cocycle(vf, x0, horizon, dt=dt)
    counterexample = None
    survived = np.ones(n_samples, dtype=bool)
    for i in range(len(traj.times)):
        j = form.matrix_at(traj.states[i])
        images = traj.fundamentals[i] @ vmat
        vals = np.einsum("ij,ij->j", images, j @ images)
        norms2 = np.einsum("ij,ij->j", images, images)
        positive = vals > form.cone_tol * norms2
        if counterexample is None and not np.all(positive):
            bad = int(np.argmin(positive))
            counterexample = (vmat[:, bad].copy(), float(traj.times[i]))
        survived &= positive
    return ConeInvarianceResult(
        fraction=float(np.mean(survived)),
        counterexample=counterexample)
