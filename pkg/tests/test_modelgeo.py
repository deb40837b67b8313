import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import iv

from steklov_lab import modelgeo, symcalc
from steklov_lab.errors import DirichletEigenvalueError, PreconditionError, RankDeficiencyError
from steklov_lab.modelgeo import RadialProfile, SteklovSpectrum

KS = np.arange(50, 201)
# wide window for the higher-order coefficients, whose fits need small k
KS_WIDE = np.arange(20, 401)


# -- spectra ------------------------------------------------------------------


def test_ball_exact_counts():
    spec = modelgeo.ball_steklov_exact(3, 10)
    assert spec.total == 121
    assert spec.entries[:3] == [(0.0, 1), (1.0, 3), (2.0, 5)]
    disk = modelgeo.ball_steklov_exact(2, 4)
    assert disk.multiplicity.tolist() == [1, 2, 2, 2, 2]


def test_unsupported_dimension():
    with pytest.raises(PreconditionError):
        modelgeo.ball_steklov_exact(4, 5)


def test_cylinder_closed_form():
    L = 2.0
    spec = modelgeo.cylinder_steklov(L, [0.0, 1.0, 1.0])
    want = sorted([0.0, 2 / L, math.tanh(1.0), 1 / math.tanh(1.0)])
    np.testing.assert_allclose(spec.sigma, want)
    assert spec.multiplicity.tolist() == [1, 2, 1, 2]


def test_cylinder_rejects_bad_input():
    with pytest.raises(PreconditionError):
        modelgeo.cylinder_steklov(0.0, [1.0])
    with pytest.raises(PreconditionError):
        modelgeo.cylinder_steklov(1.0, [-1.0])


def test_spectrum_invariants():
    with pytest.raises(PreconditionError):
        SteklovSpectrum([1.0, 0.5], [1, 1], 3)
    with pytest.raises(PreconditionError):
        SteklovSpectrum([1.0], [0], 3)
    with pytest.raises(PreconditionError):
        SteklovSpectrum([-1.0], [1], 3, "exact")
    SteklovSpectrum([-1.0], [1], 3, "synthetic")


@given(st.lists(st.floats(0, 50, allow_nan=False), max_size=30))
def test_csv_and_json_round_trip(values):
    spec = SteklovSpectrum.from_values(values, 3)
    back = SteklovSpectrum.from_csv(spec.to_csv(), 3)
    np.testing.assert_array_equal(back.sigma, spec.sigma)
    np.testing.assert_array_equal(back.multiplicity, spec.multiplicity)
    back = SteklovSpectrum.from_json(spec.to_json())
    np.testing.assert_array_equal(back.sigma, spec.sigma)
    assert back.total == len(values)


def test_csv_header_required():
    with pytest.raises(PreconditionError):
        SteklovSpectrum.from_csv("a,b\n1,1\n", 3)


def test_counting_function():
    spec = modelgeo.ball_steklov_exact(3, 5)
    assert spec.counting([0.0, 0.5, 1.0, 5.0]).tolist() == [1, 1, 4, 36]


# -- profiles -----------------------------------------------------------------


def test_profile_derivatives():
    p = RadialProfile.polynomial([1.0, 0.0, 2.0])
    assert p.at_boundary(0) == 3.0
    assert p.at_boundary(1) == 4.0
    assert p.at_boundary(2) == 4.0


@pytest.mark.parametrize("J", [0, 1, 2, 3])
def test_matched_jet_profile(J):
    eps = 0.3
    p = RadialProfile.matched_jet(J, eps)
    assert p.at_boundary(0) == pytest.approx(1.0)
    for m in range(1, J + 1):
        assert p.at_boundary(m) == pytest.approx(0.0, abs=1e-12)
    # outward derivative of (1 - r^2)^(J+1) at r = 1 is (J+1)! (-2)^(J+1)
    assert p.at_boundary(J + 1) == pytest.approx(eps * (-1) ** (J + 1))


def test_conformal_profile_must_be_one_on_boundary():
    with pytest.raises(PreconditionError):
        modelgeo.radial_conformal_modes(RadialProfile("2 + r**2"), [1], 3)


# -- radial solvers -----------------------------------------------------------


def test_constant_potential_against_bessel():
    # f = r^{-1/2} I_{k+1/2}(sqrt(q) r) in n = 3
    q = 2.0
    ks = np.arange(0, 30)
    w = math.sqrt(q)
    sig = modelgeo.radial_potential_modes(q, ks, 3)
    want = [w * (iv(k + 0.5 - 1, w) + iv(k + 0.5 + 1, w)) / (2 * iv(k + 0.5, w)) - 0.5 for k in ks]
    np.testing.assert_allclose(sig, want, rtol=1e-9)


def test_constant_potential_against_bessel_2d():
    q = 1.5
    ks = np.arange(0, 30)
    w = math.sqrt(q)
    sig = modelgeo.radial_potential_modes(q, ks, 2)
    want = [w * (iv(k - 1, w) + iv(k + 1, w)) / (2 * iv(k, w)) for k in ks]
    np.testing.assert_allclose(sig, want, rtol=1e-9)


@pytest.mark.parametrize("name", ["bump", "exp", "normal_slope", "matched_jet"])
def test_integrators_agree(name):
    prof = RadialProfile.preset(name)
    ks = np.arange(0, 101)
    a = modelgeo.radial_conformal_modes(prof, ks, 3, scheme="linear-bdf")
    b = modelgeo.radial_conformal_modes(prof, ks, 3, scheme="riccati-radau")
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-8)


def test_step_refinement_is_stable():
    prof = RadialProfile.preset("exp")
    ks = np.arange(0, 60)
    coarse = modelgeo.radial_conformal_modes(prof, ks, 3)
    fine = modelgeo.radial_conformal_modes(prof, ks, 3, max_step=0.05, rtol=1e-12)
    np.testing.assert_allclose(coarse, fine, atol=1e-8)


def test_constant_factor_leaves_ball_unchanged():
    sig = modelgeo.radial_conformal_modes(RadialProfile.constant(1.0), np.arange(0, 50), 3)
    np.testing.assert_allclose(sig, np.arange(0, 50), atol=1e-10)


def test_dirichlet_eigenvalue_detected():
    # -Delta u = pi^2 u on the unit ball (n = 3) has the radial Dirichlet mode sin(pi r)/r
    with pytest.raises(DirichletEigenvalueError):
        modelgeo.radial_potential_modes(-math.pi**2, [0], 3)


def test_unknown_scheme():
    with pytest.raises(PreconditionError):
        modelgeo.radial_conformal_modes(RadialProfile.preset("bump"), [1], 3, scheme="euler")


# -- symbol predictions against the ODE ---------------------------------------


@pytest.mark.parametrize("J", [0, 2])
def test_conformal_leading_coefficient_matches_modes(J):
    # the degree -J term predicted from the jet is the 1/k^J coefficient of sigma_k - k
    eps = 0.5
    prof = RadialProfile.matched_jet(J, eps)
    jet = symcalc.BoundaryJet.from_derivatives("conformal", [prof.at_boundary(m) for m in range(J + 2)])
    pred = float(symcalc.conformal_leading_term(jet, J + 1, 3).coeff[0])
    d = modelgeo.radial_conformal_modes(prof, KS_WIDE, 3) - KS_WIDE
    fit = modelgeo.asymptotic_fit(KS_WIDE, d, order=J + 4, k_min=20)
    assert fit.coefficients[J] == pytest.approx(pred, rel=2e-2)


@pytest.mark.parametrize("j", [1, 2, 3])
def test_potential_leading_coefficient_matches_modes(j):
    eps = 0.4
    # q with (j-2) vanishing outward derivatives and d^{j-1} q = eps
    q = RadialProfile(f"{eps} * (r - 1)**{j - 1} / factorial({j - 1})")
    jet = symcalc.BoundaryJet.from_derivatives("potential", [q.at_boundary(m) for m in range(j)])
    zero = symcalc.BoundaryJet.from_derivatives("potential", [0.0] * j)
    pred = float(symcalc.potential_leading_term(zero, jet, j).coeff[0])
    d = modelgeo.radial_potential_modes(q, KS_WIDE, 3) - KS_WIDE
    fit = modelgeo.asymptotic_fit(KS_WIDE, d, order=j + 3, k_min=20)
    assert fit.coefficients[j] == pytest.approx(pred, rel=2e-2)


def test_schrodinger_identity_holds_for_operator_form_only():
    prof = RadialProfile.preset("bump")
    ks = np.arange(0, 40)
    lhs = modelgeo.radial_conformal_modes(prof, ks, 3)
    shift = 0.25 * prof.at_boundary(1)

    def modes(form):
        q = lambda r: -symcalc.conformal_schrodinger_potential(prof, 3, [r], form=form)[0]
        return modelgeo.radial_potential_modes(q, ks, 3) - shift

    assert np.max(np.abs(lhs - modes("operator"))) < 1e-6
    assert np.max(np.abs(lhs - modes("literal"))) > 1e-3


# -- asymptotic fits ----------------------------------------------------------


def test_asymptotic_fit_recovers_synthetic_coefficients():
    ks = np.arange(20, 120).astype(float)
    fit = modelgeo.asymptotic_fit(ks, 0.3 - 0.2 / ks + 1.5 / ks**2)
    np.testing.assert_allclose(fit.coefficients, [0.3, -0.2, 1.5], atol=1e-10)


def test_asymptotic_fit_errors():
    ks = np.arange(20, 25).astype(float)
    with pytest.raises(PreconditionError):
        modelgeo.asymptotic_fit(ks, ks * 0)
    ks = np.full(12, 30.0) + np.arange(12) * 1e-9
    with pytest.raises(RankDeficiencyError):
        modelgeo.asymptotic_fit(ks, ks * 0, order=3)
