import numpy as np
import pytest

from cone_verify import (
    ConeClass,
    QuadraticFormField,
    Verdict,
    LPFVerdict,
    builtin,
    check_lpf_monotonicity,
    check_separation,
    cone_membership,
    delta_interval,
    derivative_residual,
    evaluate,
    hat_j,
    tilde_j,
)
from cone_verify.errors import FlowDirectionNotPositive, SingularPoint

from conftest import (
    LAMBDAS,
    oracle_delta_interval,
    oracle_rayleigh_bounds,
    random_indefinite_form,
    random_orthonormal,
)


def test_tilde_matches_symbolic_diagonal(saddle_field, form_index1, form_index2):
    l1, l2, l3 = LAMBDAS
    got1 = tilde_j(form_index1, saddle_field, np.zeros(3))
    np.testing.assert_allclose(got1, np.diag([-2 * l1, 2 * l2, 2 * l3]), atol=1e-14)
    got2 = tilde_j(form_index2, saddle_field, np.zeros(3))
    np.testing.assert_allclose(got2, np.diag([-2 * l1, -2 * l2, 2 * l3]), atol=1e-14)


def test_tilde_zero_for_constant_field(form_index1):
    # constant fields have DX = 0 so the derivative operator vanishes
    const = builtin("saddle_suspension_constant")
    form = QuadraticFormField.diagonal([-1.0, 1.0])
    np.testing.assert_allclose(tilde_j(form, const, np.zeros(2)), 0.0, atol=1e-15)


def test_tilde_antisymmetric_under_time_reversal():
    rng = np.random.default_rng(2)
    model = builtin("lorenz")
    rev = model.reversed()
    form = QuadraticFormField.diagonal([-1.0, -1.0, 1.0])
    for _ in range(10):
        x = rng.uniform(-3, 3, size=3)
        np.testing.assert_allclose(tilde_j(form, rev, x),
                                   -tilde_j(form, model, x), atol=1e-12)


def test_nonconstant_form_requires_optin(saddle_field):
    varying = QuadraticFormField.from_callable(
        lambda x: np.diag([-1.0 - 0.1 * float(np.sin(x[0])), 1.0, 1.0]),
        3, 1, flow_derivative=False)
    with pytest.raises(ValueError):
        tilde_j(varying, saddle_field, np.array([0.2, 0.1, 0.4]))


def test_nonconstant_form_transport_term(saddle_field):
    # with the opt-in enabled, the extra term is the directional derivative
    # of J along X (finite differences against an analytic derivative)
    def jmat(x):
        return np.diag([-1.0 - 0.1 * np.sin(x[0]), 1.0, 1.0])

    varying = QuadraticFormField.from_callable(jmat, 3, 1, flow_derivative=True)
    x = np.array([0.2, 0.1, 0.4])
    flow = saddle_field.X_at(x)
    analytic = np.diag([-0.1 * np.cos(x[0]) * flow[0], 0.0, 0.0])
    base = jmat(x) @ saddle_field.DX_at(x) + saddle_field.DX_at(x).T @ jmat(x)
    got = tilde_j(varying, saddle_field, x)
    np.testing.assert_allclose(got, base + analytic, atol=1e-6)


@pytest.mark.parametrize("form_name,expect", [
    ("form_index1", (-6.0, -2.0)),
    ("form_index2", (-2.0, 4.0)),
    ("form_not_separated", None),
])
def test_delta_interval_fixtures(request, saddle_field, form_name, expect):
    form = request.getfixturevalue(form_name)
    tilde = tilde_j(form, saddle_field, np.zeros(3))
    got = delta_interval(form, tilde, np.zeros(3))
    # independent oracle: dense delta grid with exact eigenvalue checks
    oracle = oracle_delta_interval(form.matrix_at(None), tilde)
    if expect is None:
        assert got is None
        assert oracle is None
    else:
        assert got == pytest.approx(expect, abs=1e-8)
        assert oracle == pytest.approx(expect, abs=1e-2)


def test_delta_interval_matches_rayleigh_oracle(saddle_field, form_index1,
                                                form_index2):
    # Rayleigh-quotient construction: inf over the positive cone and sup
    # over the negative cone (sample set includes the optimizing axes)
    for form in (form_index1, form_index2):
        tilde = tilde_j(form, saddle_field, np.zeros(3))
        r_minus, r_plus = delta_interval(form, tilde, np.zeros(3))
        o_minus, o_plus = oracle_rayleigh_bounds(form.matrix_at(None), tilde)
        assert r_minus == pytest.approx(o_minus, abs=1e-6)
        assert r_plus == pytest.approx(o_plus, abs=1e-6)


def test_delta_interval_random_forms_sandwich():
    # sampled Rayleigh bounds can only shrink the interval: computed
    # endpoints must lie inside them (up to sampling tolerance)
    rng = np.random.default_rng(8)
    for _ in range(10):
        n = int(rng.integers(2, 5))
        q = int(rng.integers(1, n))
        form = random_indefinite_form(rng, n, q)
        a = rng.normal(size=(n, n))
        j = form.matrix_at(None)
        tilde = j @ a + a.T @ j
        result = delta_interval(form, tilde, None)
        o_minus, o_plus = oracle_rayleigh_bounds(j, tilde, n_vectors=20000,
                                                 seed=int(rng.integers(1 << 30)))
        if result is None:
            assert o_minus >= o_plus - 1e-6
        else:
            assert result[0] >= o_minus - 1e-6
            assert result[1] <= o_plus + 1e-6


def test_delta_interval_invariant_under_congruence():
    # congruence J -> P^T J P, tilde -> P^T tilde P preserves semidefinite
    # pencils, so the interval of the transformed pair must stay [2l_q,
    # 2l_{q+1}] from the diagonal closed form
    rng = np.random.default_rng(28)
    for _ in range(20):
        lams = np.sort(rng.uniform(-3, 3, size=3))
        while lams[1] - lams[0] < 0.3 or lams[2] - lams[1] < 0.3:
            lams = np.sort(rng.uniform(-3, 3, size=3))
        q = int(rng.integers(1, 3))
        signs = np.array([-1.0] * q + [1.0] * (3 - q))
        j = np.diag(signs)
        tilde = np.diag(2.0 * lams * signs)
        p = rng.normal(size=(3, 3)) + 0.5 * np.eye(3)
        while abs(np.linalg.det(p)) < 0.1:
            p = rng.normal(size=(3, 3)) + 0.5 * np.eye(3)
        form_c = QuadraticFormField.from_matrix(p.T @ j @ p)
        got = delta_interval(form_c, p.T @ tilde @ p, None)
        assert got is not None
        assert got[0] == pytest.approx(2.0 * lams[q - 1], rel=1e-7, abs=1e-7)
        assert got[1] == pytest.approx(2.0 * lams[q], rel=1e-7, abs=1e-7)


def test_check_separation_fixture_values(saddle_field, form_index1):
    cert = check_separation(form_index1, saddle_field, np.zeros(3))
    assert cert.verdict is Verdict.STRICT
    assert cert.chosen_delta == pytest.approx(-4.0, abs=1e-8)
    # eigenvalues of diag(6,-2,4) + 4*diag(-1,1,1) = diag(2,2,8)
    assert cert.min_eig_margin == pytest.approx(2.0, abs=1e-8)


def test_check_separation_hint(saddle_field, form_index1):
    cert = check_separation(form_index1, saddle_field, np.zeros(3), delta_hint=-5.0)
    assert cert.chosen_delta == -5.0
    inadmissible = check_separation(form_index1, saddle_field, np.zeros(3),
                                    delta_hint=10.0)
    assert inadmissible.chosen_delta == pytest.approx(-4.0, abs=1e-8)


def test_check_separation_fail(saddle_field, form_not_separated):
    cert = check_separation(form_not_separated, saddle_field, np.zeros(3))
    assert cert.verdict is Verdict.FAIL
    assert np.isnan(cert.r_minus) and np.isnan(cert.r_plus)


def test_check_separation_nonstrict_for_constant_field():
    const = builtin("saddle_suspension_constant")
    form = QuadraticFormField.diagonal([-1.0, 1.0])
    cert = check_separation(form, const, np.array([0.3, 0.7]))
    assert cert.verdict is Verdict.NONSTRICT
    assert cert.chosen_delta == pytest.approx(0.0, abs=1e-9)
    assert cert.r_minus == pytest.approx(0.0, abs=1e-9)
    assert cert.r_plus == pytest.approx(0.0, abs=1e-9)


def test_check_separation_with_varying_form(saddle_field):
    # a gently point-dependent form with the transport term enabled stays
    # strict near the diagonal fixture, with endpoints close to the
    # constant-form values
    def jmat(x):
        wobble = 0.05 * np.sin(x[0])
        return np.diag([-1.0 - wobble, -1.0, 1.0 + wobble])

    varying = QuadraticFormField.from_callable(jmat, 3, 2, flow_derivative=True)
    cert = check_separation(varying, saddle_field, np.array([0.1, 0.2, 0.3]))
    assert cert.verdict is Verdict.STRICT
    assert cert.r_minus == pytest.approx(-2.0, abs=0.2)
    assert cert.r_plus == pytest.approx(4.0, abs=0.2)


def test_margin_invariant_under_orthogonal_conjugation(saddle_field, form_index2):
    rng = np.random.default_rng(12)
    x = np.zeros(3)
    base = check_separation(form_index2, saddle_field, x)
    for _ in range(5):
        q = random_orthonormal(rng, 3)
        form_c = QuadraticFormField.from_matrix(q.T @ form_index2.matrix_at(None) @ q)
        field_c = builtin("linear_dense",
                          (q.T @ np.diag(LAMBDAS) @ q).tolist())
        cert = check_separation(form_c, field_c, x)
        assert cert.min_eig_margin == pytest.approx(base.min_eig_margin, rel=1e-6)
        assert cert.r_minus == pytest.approx(base.r_minus, rel=1e-6)
        assert cert.r_plus == pytest.approx(base.r_plus, rel=1e-6)


def test_strict_certificate_implies_cone_invariance(saddle_field, form_index2):
    # push 200 random positive vectors through the cocycle and watch the sign
    from cone_verify import cone_invariance_test

    result = cone_invariance_test(form_index2, saddle_field, np.array([0.1, 0.1, 0.1]),
                                  horizon=3.0, n_samples=200, seed=5, dt=1e-2)
    assert result.fraction == 1.0
    assert result.counterexample is None


def test_hat_j_fixture(form_index2, saddle_field):
    x = np.array([0.0, 0.0, 1.0])
    hat, basis = hat_j(form_index2, saddle_field, x)
    # flow direction (0,0,2): normal space is span{e1,e2}; restricted
    # operator is diag(6,2) by hand evaluation
    np.testing.assert_allclose(hat[:2, :2], np.diag([6.0, 2.0]), atol=1e-12)
    np.testing.assert_allclose(hat[2], 0.0, atol=1e-12)
    jx = form_index2.matrix_at(x) @ saddle_field.X_at(x)
    np.testing.assert_allclose(basis.T @ jx, 0.0, atol=1e-9)
    assert basis.shape == (3, 2)


def test_hat_j_rejects_null_flow_direction(form_index1):
    # at x = e2 + e3-mix the image can be made J-null: use a point where
    # J(X) = 0 for the index-1 form: X = (x1*l1, x2*l2, x3*l3)
    field = builtin("linear_diag", [1.0, 1.0, np.sqrt(2.0)])
    x = np.array([1.0, 1.0, 0.0])  # X(x) = (1,1,0), J1-null
    with pytest.raises(FlowDirectionNotPositive):
        hat_j(form_index1, field, x)


def test_hat_j_rejects_singularity(form_index1, saddle_field):
    with pytest.raises(SingularPoint):
        hat_j(form_index1, saddle_field, np.zeros(3))


def test_hat_symmetric_for_random_fields():
    rng = np.random.default_rng(21)
    model = builtin("lorenz")
    form = QuadraticFormField.diagonal([-1.0, -1.0, 1.0])
    found = 0
    while found < 10:
        x = rng.uniform(-5, 5, size=3)
        flow = model.X_at(x)
        if evaluate(form, x, flow) <= 1e-6:
            continue
        found += 1
        hat, _ = hat_j(form, model, x)
        np.testing.assert_allclose(hat, hat.T, atol=1e-12)


def test_lpf_monotonicity_fixture(form_index2, saddle_field):
    cert = check_lpf_monotonicity(form_index2, saddle_field, np.array([0.0, 0.0, 1.0]))
    assert cert.verdict is LPFVerdict.STRICTLY_MONOTONE
    assert cert.alpha1 == pytest.approx(2.0, abs=1e-10)
    np.testing.assert_allclose(np.sort(cert.restricted_spectrum), [2.0, 6.0],
                               atol=1e-10)


def test_lpf_monotonicity_time_reversed_fails(form_index2, saddle_field):
    cert = check_lpf_monotonicity(form_index2, saddle_field.reversed(),
                                  np.array([0.0, 0.0, 1.0]))
    assert cert.verdict is LPFVerdict.FAIL
    np.testing.assert_allclose(np.sort(cert.restricted_spectrum), [-6.0, -2.0],
                               atol=1e-10)


def test_lpf_monotone_zero_operator():
    # constant field with DX = 0 at a point where the form is positive on
    # the flow direction: the operator vanishes, verdict Monotone
    const = builtin("saddle_suspension_constant")
    form = QuadraticFormField.diagonal([-1.0, 1.0])
    cert = check_lpf_monotonicity(form, const, np.array([0.2, 0.4]))
    assert cert.verdict is LPFVerdict.MONOTONE
    assert cert.alpha1 == pytest.approx(0.0, abs=1e-12)


def test_lpf_verdict_invariant_under_field_rescaling(form_index2, saddle_field):
    rng = np.random.default_rng(33)
    found = 0
    while found < 10:
        x = rng.normal(size=3)
        x /= np.linalg.norm(x)
        if evaluate(form_index2, x, saddle_field.X_at(x)) <= 1e-6:
            continue
        found += 1
        base = check_lpf_monotonicity(form_index2, saddle_field, x)
        for c in (0.5, 2.0, 7.5):
            scaled = builtin("linear_dense", (c * np.diag(LAMBDAS)).tolist())
            cert = check_lpf_monotonicity(form_index2, scaled, x)
            assert cert.verdict is base.verdict
            # the spectrum scales with c but keeps its sign pattern
            np.testing.assert_allclose(np.sign(cert.restricted_spectrum),
                                       np.sign(base.restricted_spectrum))


def test_certificate_invariants_on_random_systems():
    # dataclass contract: Strict implies a real interval with positive
    # midpoint margin; Fail implies NaN endpoints; all tilde matrices are
    # symmetric to machine precision
    rng = np.random.default_rng(47)
    from cone_verify import builtin as make_builtin

    for _ in range(50):
        n = int(rng.integers(2, 5))
        q = int(rng.integers(1, n))
        form = random_indefinite_form(rng, n, q)
        field = make_builtin("linear_dense", rng.normal(size=(n, n)).tolist())
        cert = check_separation(form, field, rng.normal(size=n))
        np.testing.assert_allclose(cert.tilde_matrix, cert.tilde_matrix.T,
                                   atol=1e-12)
        if cert.verdict is Verdict.STRICT:
            assert cert.r_minus < cert.r_plus
            mid = 0.5 * (cert.r_minus + cert.r_plus)
            j = form.matrix_at(None)
            from cone_verify.linalg import min_eigenvalue

            assert min_eigenvalue(cert.tilde_matrix - mid * j) > 0
        elif cert.verdict is Verdict.FAIL:
            assert np.isnan(cert.r_minus) and np.isnan(cert.r_plus)
        else:
            assert cert.r_minus <= cert.r_plus


def test_derivative_residual_linear_closed_form(form_index2, saddle_field):
    v = np.array([1.0, 1.0, 1.0])
    x = np.array([0.2, -0.4, 0.3])
    res = derivative_residual(form_index2, saddle_field, x, v, h=1e-4)
    tilde = tilde_j(form_index2, saddle_field, x)
    assert res <= 1e-3 * (1.0 + abs(v @ tilde @ v))


def test_derivative_residual_zero_vector(form_index1, saddle_field):
    assert derivative_residual(form_index1, saddle_field,
                               np.array([0.1, 0.2, 0.3]), np.zeros(3),
                               h=1e-5) == 0.0


def test_derivative_residual_lorenz_origin(form_index2):
    model = builtin("lorenz")
    res = derivative_residual(form_index2, model, np.zeros(3),
                              np.array([0.0, 0.0, 1.0]), h=1e-5)
    tilde = tilde_j(form_index2, model, np.zeros(3))
    scale = abs(np.array([0, 0, 1.0]) @ tilde @ np.array([0, 0, 1.0]))
    assert res <= 1e-4 * (1.0 + scale)
