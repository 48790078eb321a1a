from itertools import product
from math import e, pi, sqrt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phaseless.lattices import (
    GAUSSIAN_ALPHA,
    SL2Mat,
    SqrtLattice,
    als_preset,
    generate,
    matrix_from_preset,
    parse_matrix,
    rect_thresholds,
    rotation,
    shear,
    shear_admissible_root,
    sl2_threshold,
    sqrt_set,
)
from phaseless.windows import GrowthEnvelope


def test_sqrt_set():
    np.testing.assert_allclose(sqrt_set(3), [-sqrt(3), -sqrt(2), -1, 0, 1, sqrt(2), sqrt(3)])
    assert list(sqrt_set(0)) == [0.0]
    s4 = sqrt_set(4)
    assert len(s4) == 9 and s4[s4 > 0][3] == 2.0
    with pytest.raises(ValueError):
        sqrt_set(-1)


def brute(A, radius, n):
    vals = sqrt_set(n)
    pts = {tuple(np.round(A @ np.array(v), 12)) for v in product(vals, repeat=2)}
    return {p for p in pts if np.hypot(*p) <= radius * (1 + 1e-12)}


def test_identity_radius_15():
    ps = generate(SqrtLattice(np.eye(2), 1.5))
    assert len(ps) == 13
    assert {tuple(np.round(p, 12)) for p in ps.points} == brute(np.eye(2), 1.5, 3)


@pytest.mark.parametrize("A,radius", [
    (np.eye(2), 3.0),
    (0.24 * np.eye(2), 1.0),
    (0.3 * rotation(0.4).matrix, 1.2),
    (0.2 * shear(0.5).matrix, 1.0),
    (np.array([[0.5, 0.1], [-0.2, 0.7]]), 2.0),
])
def test_generate_matches_brute_force(A, radius):
    ps = generate(SqrtLattice(A, radius))
    n = int(np.ceil((np.linalg.norm(np.linalg.inv(A), 2) * radius) ** 2)) + 2
    got = [tuple(np.round(p, 12)) for p in ps.points]
    assert len(got) == len(set(got))
    assert set(got) == brute(A, radius, n)


def test_degenerate_radii():
    ps = generate(SqrtLattice(np.eye(2), 0.0))
    assert len(ps) == 1 and np.all(ps.points == 0)
    assert len(generate(SqrtLattice(2 * np.eye(2), 1.9))) == 1


def test_singular_rejected():
    with pytest.raises(ValueError):
        SqrtLattice(np.array([[1.0, 2.0], [2.0, 4.0]]), 1.0)
    with pytest.raises(ValueError):
        SqrtLattice(np.ones((2, 3)), 1.0)


def test_replay_and_radius(lattice_024):
    np.testing.assert_array_equal(lattice_024.replay(), lattice_024.points)
    assert np.all(np.linalg.norm(lattice_024.points, axis=1) <= 4.0 * (1 + 1e-12))


def test_identity_symmetric():
    pts = generate(SqrtLattice(np.eye(2), 2.5)).points
    s = {tuple(np.round(p, 12)) for p in pts}
    for sx, sy in product((1, -1), repeat=2):
        assert {tuple(np.round(p * [sx, sy], 12)) for p in pts} == s


def test_order_is_lexicographic_in_signed_indices():
    ps = generate(SqrtLattice(np.eye(2), 2.0))
    signed = ps.indices[..., 0] * ps.indices[..., 1]
    keys = [tuple(r) for r in signed]
    assert keys == sorted(keys)


def test_rotation_shear_pq():
    r = rotation(0.7)
    assert (r.p, r.q) == pytest.approx((1.0, 0.0), abs=1e-15)
    s = shear(0.5)
    assert (s.p, s.q) == pytest.approx((0.8, 0.5))
    s0 = shear(0.0)
    assert (s0.p, s0.q) == (1.0, 0.0)


def test_sl2_determinant_check():
    SL2Mat(1, 0, 0, 1 + 5e-11)
    with pytest.raises(ValueError):
        SL2Mat(1, 0, 0, 1 + 2e-10)


def test_rect_thresholds_gaussian():
    rep = rect_thresholds(GrowthEnvelope(pi, pi))
    assert rep.tau_max[0] == pytest.approx(0.2419707245, abs=1e-10)
    assert rep.nu_max[0] == pytest.approx(rep.tau_max[0], rel=1e-14)
    assert rep.alpha_max == pytest.approx(GAUSSIAN_ALPHA, rel=1e-14)


def test_rect_thresholds_limit_of_polygaussian():
    gamma = 1.3
    for eps in (1e-3, 1e-6):
        rep = rect_thresholds(GrowthEnvelope(gamma - eps, gamma + eps))
        assert rep.tau_max[0] == pytest.approx(sqrt(1 / (2 * gamma * e)), rel=2 * eps)
        assert rep.nu_max[0] == pytest.approx(sqrt(gamma / (2 * pi ** 2 * e)), rel=2 * eps)


def test_rect_thresholds_vector():
    rep = rect_thresholds(GrowthEnvelope((1, 4), (1, 4)))
    assert rep.tau_max == pytest.approx((0.4289, 0.2145), abs=1e-4)


def test_rect_admissibility_strict():
    env = GrowthEnvelope(pi, pi)
    assert rect_thresholds(env, (0.24, 0.24)).admissible
    assert not rect_thresholds(env, (GAUSSIAN_ALPHA, 0.1)).admissible
    assert not rect_thresholds(env, (0.1, 0.25)).admissible


@pytest.mark.parametrize("theta", [0.0, 0.3, pi / 4, 0.7, 1.2])
def test_rotation_thresholds(theta):
    for variant in ("conservative", "printed"):
        rep = sl2_threshold(rotation(theta), variant)
        assert rep.alpha_max == pytest.approx(GAUSSIAN_ALPHA, rel=1e-12)
    assert rect_thresholds(GrowthEnvelope(pi, pi)).alpha_max == pytest.approx(
        sl2_threshold(rotation(theta)).alpha_max, rel=1e-12)


def test_shear_05_variants():
    cons = sl2_threshold(shear(0.5), "conservative")
    prin = sl2_threshold(shear(0.5), "printed")
    assert cons.alpha_max == pytest.approx(GAUSSIAN_ALPHA * sqrt(0.3), rel=1e-12)
    assert prin.alpha_max == pytest.approx(GAUSSIAN_ALPHA * sqrt(1.3), rel=1e-12)
    assert cons.alpha_max == pytest.approx(0.1325, abs=1e-4)
    assert prin.alpha_max == pytest.approx(0.2759, abs=1e-4)


def test_default_variant_is_conservative():
    assert sl2_threshold(shear(0.5)).rule == "sl2_conservative"
    with pytest.raises(ValueError):
        sl2_threshold(shear(0.5), "other")


def test_shear_beyond_root_inadmissible():
    rep = sl2_threshold(shear(0.69))
    assert not rep.admissible and rep.reason == "p - q <= 0"
    assert rep.tau_max == () and rep.nu_max == ()


@settings(max_examples=60, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), c=st.floats(-3, 3))
def test_conservative_never_exceeds_printed(a, b, c):
    if abs(a) < 0.05:
        return
    S = SL2Mat(a, b, c, (1 + b * c) / a)
    cons, prin = sl2_threshold(S, "conservative"), sl2_threshold(S, "printed")
    if cons.tau_max:
        assert cons.alpha_max <= prin.alpha_max * (1 + 1e-12)


def test_shear_root():
    r = shear_admissible_root()
    assert r == pytest.approx(0.6823, abs=1e-4)
    assert 1 / (1 + r * r) == pytest.approx(r, abs=1e-10)
    assert sl2_threshold(shear(r - 1e-3)).tau_max
    assert not sl2_threshold(shear(r + 1e-3)).admissible


def test_als_preset():
    pts = {tuple(np.round(p, 12)) for p in als_preset(1).points}
    s2 = round(sqrt(2), 12)
    assert pts == {(0, 0), (s2, 0), (-s2, 0), (0, s2), (0, -s2), (1, 0), (0, 1)}
    assert {tuple(p) for p in als_preset(0).points} == {(0, 0), (1, 0), (0, 1)}


def test_presets_and_matrix_parsing():
    np.testing.assert_array_equal(matrix_from_preset("rect:0.2,0.3"), np.diag([0.2, 0.3]))
    np.testing.assert_array_equal(matrix_from_preset("rect", 0.5), 0.5 * np.eye(2))
    np.testing.assert_allclose(matrix_from_preset("shear:0.5", 0.13), 0.13 * np.array([[1, 0.5], [0, 1]]))
    np.testing.assert_array_equal(parse_matrix("I"), np.eye(2))
    np.testing.assert_array_equal(parse_matrix("1,2,3,4"), [[1, 2], [3, 4]])
    with pytest.raises(ValueError):
        parse_matrix("1,2,3")
    with pytest.raises(ValueError):
        matrix_from_preset("hex:1")
