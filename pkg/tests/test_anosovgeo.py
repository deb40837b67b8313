import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from steklov_lab import anosovgeo as ag
from steklov_lab.errors import PreconditionError, RankDeficiencyError

SYSTOLE = 2 * math.acosh(1 + math.sqrt(2))
words = st.text(alphabet=ag.LETTERS, min_size=1, max_size=8)


# -- group and words ----------------------------------------------------------


def test_generators_are_hyperbolic_side_pairings(surface):
    for ch in ag.LETTERS:
        M = surface.generators[ch]
        assert np.linalg.det(M) == pytest.approx(1.0, abs=1e-13)
        assert abs(np.trace(M)) == pytest.approx(2 * (1 + math.sqrt(2)), rel=1e-14)
        # a side pairing moves i to the center of the adjacent polygon
        assert float(ag.hyperbolic_distance(ag.mobius(M, 1j), 1j)) == pytest.approx(SYSTOLE, rel=1e-13)


def test_relation_holds_in_high_precision(surface):
    M = surface.word_matrix_mp(ag.RELATION, 60)
    err = min(mpmath.mnorm(M - mpmath.eye(2), 1), mpmath.mnorm(M + mpmath.eye(2), 1))
    assert err < mpmath.mpf(10) ** -50


@given(words)
def test_inverse_word_is_an_involution(w):
    assert ag.inverse_word(ag.inverse_word(w)) == w


@given(words, st.integers(0, 7))
def test_canonical_word_ignores_rotation_and_orientation(w, k):
    rot = w[k % len(w):] + w[: k % len(w)]
    assert ag.canonical_word(rot) == ag.canonical_word(w) == ag.canonical_word(ag.inverse_word(w))


def test_primitive_root():
    assert ag.primitive_root("abab") == ("ab", 2)
    assert ag.primitive_root("abc") == ("abc", 1)


def test_from_word_rejects_unreduced(surface):
    with pytest.raises(PreconditionError):
        ag.ClosedGeodesicClass.from_word(surface, "aA")
    with pytest.raises(PreconditionError):
        ag.ClosedGeodesicClass.from_word(surface, "abA")


def test_reduce_point_lands_in_domain(surface):
    rng = np.random.default_rng(0)
    for _ in range(50):
        w = "".join(rng.choice(list(ag.LETTERS), 5))
        z = complex(ag.mobius(surface.word_matrix(w), complex(rng.uniform(-0.3, 0.3), rng.uniform(0.8, 1.2))))
        r, h = surface.reduce_point(z)
        assert surface.in_domain(r, atol=1e-9)[0]
        assert complex(ag.mobius(h, z)) == pytest.approx(r, abs=1e-9)


# -- enumeration --------------------------------------------------------------


def test_systoles(classes3):
    sy = [c for c in classes3 if abs(c.length - SYSTOLE) < 1e-9]
    # the regular-octagon surface with opposite sides paired has 12 systolic geodesics
    assert len(sy) == 12
    assert classes3[0].length == pytest.approx(SYSTOLE, abs=1e-12)


def test_class_counts(surface):
    assert [len(ag.enumerate_classes(surface, W)) for W in (1, 2, 3)] == [4, 20, 76]


def test_traces_are_integral_in_sqrt2(classes3, surface):
    # the group is arithmetic: every trace is m + n sqrt(2) with integers m, n
    for c in classes3:
        with mpmath.workdps(40):
            M = surface.word_matrix_mp(c.word, 40)
            tr = abs(M[0, 0] + M[1, 1])
            best = min(
                (abs(tr - (m + n * mpmath.sqrt(2))), m, n)
                for n in range(int(tr / mpmath.sqrt(2)) + 2)
                for m in [int(mpmath.nint(tr - n * mpmath.sqrt(2)))]
            )
            assert best[0] < mpmath.mpf(10) ** -30, c.word


def test_lengths_match_high_precision(classes3, surface):
    for c in classes3:
        assert c.length == pytest.approx(float(ag.exact_length(surface, c.word)), abs=1e-10)


def test_relator_halves_are_merged(classes4):
    words = {c.word for c in classes4}
    aliases = {a for c in classes4 for a in c.aliases}
    assert aliases and not (aliases & words)
    # every alias has the length of the class that absorbed it
    for c in classes4:
        for a in c.aliases:
            M = c.group.word_matrix(a)
            assert 2 * math.acosh(abs(np.trace(M)) / 2) == pytest.approx(c.length, rel=1e-10)


def test_enumeration_budget(surface):
    with pytest.raises(PreconditionError):
        ag.enumerate_classes(surface, 7)
    with pytest.raises(PreconditionError):
        ag.enumerate_classes(surface, 0)


def test_collision_report_flags_symmetric_pairs(classes3):
    coll = ag.length_spectrum_report(classes3[:30], 1e-9)
    assert coll and all(c.exact for c in coll)


def test_classes_csv(classes3):
    lines = ag.classes_to_csv(classes3).splitlines()
    assert lines[0] == "word,length,primitive,multiplicity,poincare_factor"
    assert len(lines) == len(classes3) + 1


def test_poincare_factor(classes3):
    for c in classes3[:10]:
        assert c.poincare_factor == pytest.approx(2 * math.sinh(c.length / 2))


# -- X-ray transform ----------------------------------------------------------


def test_samples_stay_in_domain_and_have_unit_speed(surface, classes3):
    for c in classes3[::7]:
        z, zd = ag.geodesic_samples(c, 128)
        assert np.all(surface.in_domain(z, atol=1e-8))
        np.testing.assert_allclose(np.abs(zd) / z.imag, 1.0, atol=1e-10)


def test_sample_count_precondition(classes3):
    with pytest.raises(PreconditionError):
        ag.geodesic_samples(classes3[0], 32)


def test_xray_of_constant(classes3):
    for c in classes3[:5]:
        assert ag.xray_function(2.5, c) == pytest.approx(2.5)


def test_bumps_match_brute_force_periodization(surface, small_basis):
    # sum over every group element of word length <= 6, deduplicated by image point
    ball = ag._ball(surface, 6)
    rng = np.random.default_rng(4)
    pts = [surface.reduce_point(complex(x, y))[0] for x, y in zip(rng.uniform(-2, 2, 12), rng.uniform(0.2, 3, 12))]
    # points close to a vertex of the polygon, where translates are easiest to miss
    F0 = ag.axis_frame(surface.word_matrix("adC"))[0]
    for s in np.linspace(0, 3, 40):
        G = surface.reduce_frame(F0 @ np.diag([math.exp(s / 2), math.exp(-s / 2)]))[0]
        pts.append(complex(ag.mobius(G, 1j)))
    pts = np.array(pts)
    want = np.zeros((pts.size, len(small_basis)))
    for j, c in enumerate(small_basis.centers):
        imgs = (ball[:, 0, 0] * c + ball[:, 0, 1]) / (ball[:, 1, 0] * c + ball[:, 1, 1])
        _, keep = np.unique(np.round(imgs, 8), return_index=True)
        d = ag.hyperbolic_distance(pts[:, None], imgs[keep][None, :])
        want[:, j] = np.exp(-(d**2) / (2 * small_basis.width**2)).sum(axis=1)
    np.testing.assert_allclose(small_basis.evaluate(pts), want, atol=1e-12)


def test_xray_independent_of_representative(surface, classes3, small_basis):
    g = surface.word_matrix("bD")
    for c in classes3[::9]:
        a = ag.xray_function(small_basis, c)
        b = ag.xray_function(small_basis, c.conjugated(g))
        np.testing.assert_allclose(a, b, atol=1e-10)


def test_xray_of_power_equals_primitive(surface, small_basis):
    one = ag.ClosedGeodesicClass.from_word(surface, "ab")
    two = ag.ClosedGeodesicClass.from_word(surface, "abab")
    assert two.multiplicity == 2 and two.length == pytest.approx(2 * one.length)
    np.testing.assert_allclose(ag.xray_function(small_basis, two), ag.xray_function(small_basis, one), atol=1e-10)


def test_xray_against_direct_quadrature(small_basis, classes3):
    # high-order trapezoid sum at a fixed large sample count as the reference
    c = classes3[20]
    z, _ = ag.geodesic_samples(c, 8192)
    ref = small_basis.evaluate(z).mean(axis=0)
    np.testing.assert_allclose(ag.xray_function(small_basis, c), ref, atol=1e-10)


def test_derivative_along_matches_finite_differences(small_basis, classes3):
    c = classes3[11]
    n = 4096
    z, zd = ag.geodesic_samples(c, n)
    coeffs = np.arange(1, len(small_basis) + 1, dtype=float)
    f = small_basis.evaluate(z, coeffs)
    h = c.length / n
    # periodic central differences; samples jump between translates but the bumps are invariant
    fd = (np.roll(f, -1) - np.roll(f, 1)) / (2 * h)
    np.testing.assert_allclose(small_basis.derivative_along(z, zd, coeffs), fd, atol=1e-4)


# -- linear systems -----------------------------------------------------------


def test_system_shape_and_round_trip(small_system):
    A = small_system.matrix
    assert A.shape == (len(small_system.classes), len(small_system.basis))
    x0 = np.linspace(-1, 1, A.shape[1])
    np.testing.assert_allclose(ag.xray_invert(small_system, A @ x0), x0, atol=1e-9)
    doc = small_system.to_json()
    assert doc["schema"] == "xray/v1" and doc["shape"] == list(A.shape)


def test_under_determined_system(surface):
    basis = ag.BumpBasis.random(surface, 6, seed=0)
    with pytest.raises(PreconditionError):
        ag.build_xray_system(basis, ag.enumerate_classes(surface, 1))


def test_rank_deficient_system_needs_ridge(surface, classes3):
    c = 0.9j + 0.1
    basis = ag.BumpBasis.create(surface, [c, c])
    system = ag.build_xray_system(basis, classes3[:10])
    assert system.rank_deficient
    v = system.matrix @ np.array([1.0, 1.0])
    with pytest.raises(RankDeficiencyError):
        ag.xray_invert(system, v)
    x = ag.xray_invert(system, v, ridge=1e-12)
    np.testing.assert_allclose(x, [1.0, 1.0], atol=1e-6)
    with pytest.raises(PreconditionError):
        ag.xray_invert(system, v, ridge=-1.0)


def test_discrepancy_ridge_hits_target(small_system):
    rng = np.random.default_rng(2)
    A = small_system.matrix
    noise = 1e-3 * rng.standard_normal(A.shape[0])
    v = A @ np.ones(A.shape[1]) + noise
    lam = ag.discrepancy_ridge(small_system, v, np.linalg.norm(noise))
    resid = np.linalg.norm(A @ ag.xray_invert(small_system, v, lam) - v)
    assert resid == pytest.approx(np.linalg.norm(noise), rel=1e-3)


def test_constant_basis_design_matrix(classes3):
    A = ag.design_matrix(ag.ConstantBasis(), classes3[:5])
    np.testing.assert_allclose(A, 1.0)


@settings(max_examples=10, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=6, max_size=6))
def test_xray_is_linear(small_system, coeffs):
    c = small_system.classes[3]
    f = small_system.basis.function(coeffs)
    assert ag.xray_function(f, c) == pytest.approx(float(small_system.matrix[3] @ coeffs), abs=1e-9)
