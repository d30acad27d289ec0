import numpy as np
import pytest
from scipy.linalg import expm

from cone_verify import (
    QuadraticFormField,
    builtin,
    cone_invariance_test,
    delta_area,
    integrate_cocycle,
    integrate_flow,
    verify_growth_bound,
    verify_quotient_bound,
)
from cone_verify.errors import (
    EscapedRegion,
    NonFinite,
    SeparationFailedOnOrbit,
)
from cone_verify.fields import Ball

from conftest import LAMBDAS


def test_flow_equilibrium_stays_put():
    model = builtin("lorenz", {"sigma": 10, "rho": 28, "beta": 8 / 3})
    _, states = integrate_flow(model, np.zeros(3), 2.0, dt=1e-2)
    np.testing.assert_allclose(states, 0.0, atol=1e-14)


def test_flow_scalar_decay():
    model = builtin("linear_diag", [-1.0])
    _, states = integrate_flow(model, np.array([1.0]), 1.0, dt=1e-3)
    assert states[-1][0] == pytest.approx(np.exp(-1.0), abs=1e-8)


def test_flow_rotation_closes():
    model = builtin("linear_dense", [[0.0, -1.0], [1.0, 0.0]])
    _, states = integrate_flow(model, np.array([1.0, 0.0]), 2 * np.pi, dt=1e-3)
    np.testing.assert_allclose(states[-1], [1.0, 0.0], atol=1e-6)


def test_flow_fourth_order_convergence():
    # halving the step must shrink the terminal error by about 2^4
    model = builtin("lorenz")
    x0 = np.array([1.0, 1.0, 20.0])
    _, ref = integrate_flow(model, x0, 0.5, dt=1e-4, self_check=False)
    errs = []
    for dt in (4e-3, 2e-3, 1e-3):
        _, states = integrate_flow(model, x0, 0.5, dt=dt, self_check=False)
        errs.append(np.linalg.norm(states[-1] - ref[-1]))
    assert 10.0 < errs[0] / errs[1] < 22.0
    assert 10.0 < errs[1] / errs[2] < 22.0


def test_flow_time_reversal_returns():
    model = builtin("lorenz")
    x0 = np.array([1.0, 2.0, 14.0])
    _, fwd = integrate_flow(model, x0, 1.0, dt=2e-4, self_check=False)
    _, back = integrate_flow(model.reversed(), fwd[-1], 1.0, dt=2e-4,
                             self_check=False)
    np.testing.assert_allclose(back[-1], x0, atol=1e-5)


def test_flow_escape_detection():
    model = builtin("linear_diag", [1.0, 1.0])
    model.region = Ball(np.zeros(2), 1.0)
    with pytest.raises(EscapedRegion):
        integrate_flow(model, np.array([0.9, 0.0]), 2.0, dt=1e-2)


def test_flow_overflow_detection():
    model = builtin("linear_diag", [400.0])
    with pytest.raises(NonFinite):
        integrate_flow(model, np.array([1.0]), 10.0, dt=1e-2, self_check=False)


def test_cocycle_identity_at_time_zero():
    model = builtin("lorenz")
    traj = integrate_cocycle(model, np.array([1.0, 1.0, 1.0]), 0.0)
    assert len(traj.times) == 1
    np.testing.assert_allclose(traj.fundamentals[0], np.eye(3))


def test_cocycle_matches_matrix_exponential():
    rng = np.random.default_rng(4)
    for _ in range(5):
        a = rng.normal(size=(3, 3)) * 0.8
        model = builtin("linear_dense", a.tolist())
        traj = integrate_cocycle(model, rng.normal(size=3), 5.0, dt=1e-3,
                                 self_check=False)
        oracle = expm(5.0 * a)
        err = np.linalg.norm(traj.fundamentals[-1] - oracle) / np.linalg.norm(oracle)
        assert err <= 1e-6


def test_cocycle_lorenz_origin_matches_linearization():
    model = builtin("lorenz")
    traj = integrate_cocycle(model, np.zeros(3), 2.0, dt=1e-3, self_check=False)
    oracle = expm(2.0 * model.DX_at(np.zeros(3)))
    err = np.linalg.norm(traj.fundamentals[-1] - oracle) / np.linalg.norm(oracle)
    assert err <= 1e-6


def test_cocycle_property_on_random_split_points():
    model = builtin("lorenz")
    x0 = np.array([2.0, 3.0, 15.0])
    traj = integrate_cocycle(model, x0, 1.0, dt=1e-3, self_check=False)
    rng = np.random.default_rng(6)
    for _ in range(5):
        mid = int(rng.integers(1, len(traj.times) - 1))
        t_mid = traj.times[mid]
        rest = integrate_cocycle(model, traj.states[mid],
                                 traj.times[-1] - t_mid, dt=1e-3,
                                 self_check=False)
        recomposed = rest.fundamentals[-1] @ traj.fundamentals[mid]
        err = (np.linalg.norm(recomposed - traj.fundamentals[-1])
               / np.linalg.norm(traj.fundamentals[-1]))
        assert err <= 1e-6


def test_cocycle_orientation_preserved():
    model = builtin("lorenz")
    traj = integrate_cocycle(model, np.array([1.0, 1.0, 20.0]), 1.0, dt=1e-3,
                             self_check=False)
    dets = np.linalg.det(traj.fundamentals)
    assert np.all(dets > 0)


def test_delta_area_constant_integrand(saddle_field, form_index1, form_index2):
    horizon = 2.0
    traj = integrate_cocycle(saddle_field, np.array([0.1, 0.1, 0.1]), horizon,
                             dt=1e-2, self_check=False)
    area1 = delta_area(form_index1, saddle_field, traj, 0.0, horizon)
    assert area1.lower == pytest.approx(-6.0 * horizon, rel=1e-9)
    assert area1.upper == pytest.approx(-2.0 * horizon, rel=1e-9)
    area2 = delta_area(form_index2, saddle_field, traj, 0.0, horizon)
    assert area2.lower == pytest.approx(-2.0 * horizon, rel=1e-9)
    assert area2.upper == pytest.approx(4.0 * horizon, rel=1e-9)
    assert area2.lower <= area2.midpoint <= area2.upper


def test_delta_area_empty_horizon(saddle_field, form_index1):
    traj = integrate_cocycle(saddle_field, np.array([0.1, 0.1, 0.1]), 1.0,
                             dt=1e-2, self_check=False)
    area = delta_area(form_index1, saddle_field, traj, 0.5, 0.5)
    assert area.lower == area.upper == area.midpoint == 0.0


def test_delta_area_additive(saddle_field, form_index2):
    traj = integrate_cocycle(saddle_field, np.array([0.2, 0.1, 0.1]), 2.0,
                             dt=1e-2, self_check=False)
    whole = delta_area(form_index2, saddle_field, traj, 0.0, 2.0)
    first = delta_area(form_index2, saddle_field, traj, 0.0, 1.0)
    second = delta_area(form_index2, saddle_field, traj, 1.0, 2.0)
    assert whole.lower == pytest.approx(first.lower + second.lower, abs=1e-9)
    assert whole.upper == pytest.approx(first.upper + second.upper, abs=1e-9)


def test_delta_area_fails_on_unseparated_form(saddle_field, form_not_separated):
    traj = integrate_cocycle(saddle_field, np.array([0.1, 0.1, 0.1]), 1.0,
                             dt=1e-2, self_check=False)
    with pytest.raises(SeparationFailedOnOrbit):
        delta_area(form_not_separated, saddle_field, traj, 0.0, 1.0)


def test_growth_bound_expanding_axis(saddle_field, form_index2):
    horizon = 2.0
    traj = integrate_cocycle(saddle_field, np.array([0.1, 0.1, 0.1]), horizon,
                             dt=1e-2, self_check=False)
    v = np.array([0.0, 0.0, 1.0])
    lower = verify_growth_bound(form_index2, saddle_field, traj, v, "lower")
    assert lower.ok
    assert lower.worst_margin == pytest.approx(0.0, abs=1e-9)
    # J(A_t e3) grows like e^{4t}; with the lower endpoint (rate -2) the
    # log-slack at the end of the horizon is (4 - (-2)) * T
    assert lower.margins[-1] == pytest.approx(6.0 * horizon, rel=1e-6)
    # the upper endpoint (rate 4) is attained exactly by the expanding
    # axis, so the margin is zero up to integration error
    upper = verify_growth_bound(form_index2, saddle_field, traj, v, "upper",
                                tol=1e-6)
    assert upper.ok
    assert abs(upper.margins[-1]) <= 1e-6


def test_growth_bound_rejects_negative_start(saddle_field, form_index2):
    traj = integrate_cocycle(saddle_field, np.array([0.1, 0.1, 0.1]), 1.0,
                             dt=1e-2, self_check=False)
    with pytest.raises(ValueError):
        verify_growth_bound(form_index2, saddle_field, traj,
                            np.array([1.0, 0.0, 0.0]), "lower")


def test_quotient_bound_fixture(saddle_field, form_index2):
    traj = integrate_cocycle(saddle_field, np.array([0.1, 0.1, 0.1]), 2.0,
                             dt=1e-2, self_check=False)
    w = np.array([1.0, 0.0, 0.0])
    v = np.array([0.0, 0.0, 1.0])
    result = verify_quotient_bound(form_index2, saddle_field, traj, w, v)
    assert result.ok
    assert result.worst_margin >= -1e-9
    # ratio decays like e^{-10t} against a bound growing like e^{8t}
    assert result.margins[-1] == pytest.approx(18.0 * 2.0, rel=1e-6)


def test_quotient_bound_zero_time_equality(saddle_field, form_index2):
    traj = integrate_cocycle(saddle_field, np.array([0.1, 0.1, 0.1]), 0.0)
    result = verify_quotient_bound(form_index2, saddle_field, traj,
                                   np.array([1.0, 0.0, 0.0]),
                                   np.array([0.0, 0.0, 1.0]))
    assert result.worst_margin == pytest.approx(0.0, abs=1e-12)


def test_quotient_bound_refuses_unseparated_form(saddle_field, form_not_separated):
    traj = integrate_cocycle(saddle_field, np.array([0.1, 0.1, 0.1]), 1.0,
                             dt=1e-2, self_check=False)
    with pytest.raises(SeparationFailedOnOrbit):
        verify_quotient_bound(form_not_separated, saddle_field, traj,
                              np.array([0.0, 1.0, 0.0]),
                              np.array([0.0, 0.0, 1.0]))


def test_quotient_bound_reports_violation_for_sink_spectrum():
    # with no expansion in the positive cone (all-negative spectrum) the
    # upper-endpoint bound decays faster than the true ratio; the check
    # must report the violation rather than mask it
    model = builtin("linear_diag", [-3.0, -1.0, -0.5])
    form = QuadraticFormField.diagonal([-1.0, -1.0, 1.0])
    traj = integrate_cocycle(model, np.array([0.1, 0.1, 0.1]), 5.0, dt=1e-2,
                             self_check=False)
    result = verify_quotient_bound(form, model, traj,
                                   np.array([0.0, 1.0, 0.0]),
                                   np.array([0.0, 0.0, 1.0]))
    assert not result.ok
    # true ratio decays like e^{(r- - r+) t} = e^{-t} against the bound
    # e^{2 r+ t} = e^{-2t}: the log margin at the horizon is -T
    assert result.margins[-1] == pytest.approx(-5.0, rel=1e-5)


def test_cone_invariance_separated_fixture(saddle_field, form_index2):
    result = cone_invariance_test(form_index2, saddle_field,
                                  np.array([0.1, 0.1, 0.1]),
                                  horizon=5.0, n_samples=100, seed=3, dt=1e-2)
    assert result.fraction == 1.0
    assert result.counterexample is None


def test_cone_invariance_violated_for_bad_form(saddle_field, form_not_separated):
    result = cone_invariance_test(form_not_separated, saddle_field,
                                  np.array([0.1, 0.1, 0.1]),
                                  horizon=5.0, n_samples=200, seed=3, dt=1e-2)
    assert result.fraction < 1.0
    assert result.counterexample is not None
    vec, t_bad = result.counterexample
    # the recorded counterexample really does leave the cone at that time
    traj = integrate_cocycle(saddle_field, np.array([0.1, 0.1, 0.1]), 5.0,
                             dt=1e-2, self_check=False)
    idx = traj.index_of_time(t_bad)
    j = form_not_separated.matrix_at(traj.states[idx])
    image = traj.fundamentals[idx] @ vec
    assert image @ j @ image <= form_not_separated.cone_tol * (image @ image)


def test_cone_invariance_zero_horizon(saddle_field, form_index2):
    result = cone_invariance_test(form_index2, saddle_field,
                                  np.array([0.1, 0.1, 0.1]),
                                  horizon=0.0, n_samples=20, seed=1)
    assert result.fraction == 1.0


def test_concurrent_integration_matches_serial(saddle_field):
    # trajectories are independent: a thread pool over disjoint initial
    # conditions reproduces the serial results exactly
    from concurrent.futures import ThreadPoolExecutor

    model = builtin("lorenz")
    rng = np.random.default_rng(13)
    starts = [rng.uniform(-5, 5, size=3) for _ in range(6)]
    serial = [integrate_cocycle(model, x0, 0.5, dt=5e-3, self_check=False)
              for x0 in starts]
    with ThreadPoolExecutor(max_workers=4) as pool:
        threaded = list(pool.map(
            lambda x0: integrate_cocycle(model, x0, 0.5, dt=5e-3,
                                         self_check=False), starts))
    for a, b in zip(serial, threaded):
        np.testing.assert_array_equal(a.states, b.states)
        np.testing.assert_array_equal(a.fundamentals, b.fundamentals)


def test_trajectory_csv_dump(tmp_path, saddle_field):
    traj = integrate_cocycle(saddle_field, np.array([0.1, 0.2, 0.3]), 0.01,
                             dt=5e-3, self_check=False)
    path = tmp_path / "traj.csv"
    traj.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,x1,x2,x3,Y11,Y12,Y13,Y21,Y22,Y23,Y31,Y32,Y33"
    assert len(lines) == 1 + len(traj.times)
    first = np.array([float(v) for v in lines[1].split(",")])
    np.testing.assert_allclose(first[4:].reshape(3, 3), np.eye(3))


def test_growth_bound_never_false_on_strict_random_fixtures():
    # strictly separated diagonal fixtures: the lower-endpoint bound holds
    # on every grid point for positive start vectors
    rng = np.random.default_rng(14)
    for _ in range(10):
        lams = np.sort(rng.uniform(-3, 3, size=3))
        while lams[1] - lams[0] < 0.3 or lams[2] - lams[1] < 0.3:
            lams = np.sort(rng.uniform(-3, 3, size=3))
        q = int(rng.integers(1, 3))
        signs = np.array([-1.0] * q + [1.0] * (3 - q))
        form = QuadraticFormField.diagonal(signs)
        model = builtin("linear_diag", lams.tolist())
        traj = integrate_cocycle(model, rng.normal(size=3), 3.0, dt=1e-2,
                                 self_check=False)
        for _ in range(5):
            v = rng.normal(size=3)
            if float(v @ np.diag(signs) @ v) <= 0.1:
                continue
            result = verify_growth_bound(form, model, traj, v, "lower")
            assert result.ok, f"margin {result.worst_margin}"
