import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tilepath import augment as ag
from tilepath.errors import DegenerateTransformError, IngestError
from tilepath.numerics import make_rng

from oracles import warp_bilinear_loop, warp_nearest_loop


def _hand_product(*ms):
    """Plain-Python 3x3 matrix product, independent of numpy."""
    out = [[1.0 if i == j else 0.0 for j in range(3)] for i in range(3)]
    for m in ms:
        out = [[sum(out[i][k] * m[k][j] for k in range(3)) for j in range(3)] for i in range(3)]
    return out


def _apply(m, r, c):
    return (m[0][0] * r + m[0][1] * c + m[0][2], m[1][0] * r + m[1][1] * c + m[1][2])


def test_rotation_zero_is_identity():
    np.testing.assert_array_equal(ag.rotation_matrix(0, 50, 50), np.eye(3))


def test_rotation_90_maps_corner():
    # T(c) R(90) T(-c) with c = (26, 26): (1, 1) - c = (-25, -25);
    # R(90) (r, c) = (cos r - sin c, sin r + cos c) = (25, -25); + c = (51, 1)
    t = math.radians(90)
    T = [[1, 0, 26.0], [0, 1, 26.0], [0, 0, 1]]
    R = [[math.cos(t), -math.sin(t), 0], [math.sin(t), math.cos(t), 0], [0, 0, 1]]
    Tm = [[1, 0, -26.0], [0, 1, -26.0], [0, 0, 1]]
    expected = _apply(_hand_product(T, R, Tm), 1, 1)
    assert expected == pytest.approx((51.0, 1.0), abs=1e-12)
    got = ag.map_point(ag.rotation_matrix(90, 51, 51), 1, 1)
    assert got == pytest.approx(expected, abs=1e-12)


@given(st.floats(-720, 720))
def test_rotation_preserves_area(theta):
    m = ag.rotation_matrix(theta, 7, 9)
    assert np.linalg.det(m[:2, :2]) == pytest.approx(1.0, abs=1e-12)


def test_shift():
    np.testing.assert_array_equal(ag.shift_matrix(0, 0), np.eye(3))
    assert ag.map_point(ag.shift_matrix(5, 0), 10, 10) == (15.0, 10.0)


@given(*(st.floats(-100, 100) for _ in range(4)))
def test_shift_composition(a, b, c, d):
    np.testing.assert_allclose(ag.shift_matrix(a, b) @ ag.shift_matrix(c, d),
                               ag.shift_matrix(a + c, b + d), atol=1e-12)


def test_shear():
    np.testing.assert_array_equal(ag.shear_matrix(0, 10, 10), np.eye(3))
    for s in (-60, -10, 25, 80):
        m = ag.shear_matrix(s, 10, 12)
        assert np.linalg.det(m[:2, :2]) == pytest.approx(math.cos(math.radians(s)), abs=1e-12)
    with pytest.raises(DegenerateTransformError):
        ag.shear_matrix(90, 10, 10)
    with pytest.raises(DegenerateTransformError):
        ag.shear_matrix(-95, 10, 10)


@given(st.floats(-85, 85), st.floats(-30, 30), st.floats(-30, 30))
def test_shear_round_trip(shear, r, c):
    m = ag.shear_matrix(shear, 21, 33)
    back = ag.map_point(ag.invert_affine(m), *ag.map_point(m, r, c))
    assert back == pytest.approx((r, c), abs=1e-9)


def test_invert_affine_against_numpy(rng):
    for _ in range(50):
        m = ag.rotation_matrix(rng.uniform(-180, 180), 9, 11) @ ag.zoom_matrix(*rng.uniform(0.5, 2, 2), 9, 11)
        np.testing.assert_allclose(ag.invert_affine(m), np.linalg.inv(m), atol=1e-12)
    with pytest.raises(DegenerateTransformError):
        ag.invert_affine(np.diag([1.0, 0.0, 1.0]))


def test_zoom():
    np.testing.assert_array_equal(ag.zoom_matrix(1, 1, 10, 10), np.eye(3))
    h, w = 10, 14
    center = ((h + 1) / 2, (w + 1) / 2)
    assert ag.map_point(ag.zoom_matrix(1.7, 0.3, h, w), *center) == pytest.approx(center)
    r, c = ag.map_point(ag.zoom_matrix(2, 1, h, w), 2, 9)
    assert r - center[0] == pytest.approx(2 * (2 - center[0]))
    assert c == pytest.approx(9)
    with pytest.raises(DegenerateTransformError):
        ag.zoom_matrix(0, 1, 5, 5)


def test_constructed_matrices_are_affine():
    for m in (ag.rotation_matrix(33, 5, 8), ag.shift_matrix(1, 2), ag.shear_matrix(20, 5, 8),
              ag.zoom_matrix(1.2, 0.9, 5, 8)):
        assert m[2].tolist() == [0.0, 0.0, 1.0]
        assert abs(np.linalg.det(m)) > 1e-12


def test_apply_identity_bit_identical(rng):
    img = rng.random((6, 5, 3))
    for interp in ("nearest", "bilinear"):
        assert ag.apply_affine(img, np.eye(3), interp).tobytes() == img.tobytes()


def test_rotate_2x2_by_90():
    img = np.array([[1.0, 2.0], [3.0, 4.0]])
    m = ag.rotation_matrix(90, 2, 2)
    expected = warp_nearest_loop(img.tolist(), ag.invert_affine(m).tolist())
    assert expected == [[2.0, 4.0], [1.0, 3.0]]
    np.testing.assert_array_equal(ag.apply_affine(img, m), expected)


@pytest.mark.parametrize("interp", ["nearest", "bilinear"])
def test_constant_image_stays_constant(interp):
    img = np.full((7, 7, 3), 0.37)
    m = ag.rotation_matrix(31, 7, 7) @ ag.zoom_matrix(0.6, 1.4, 7, 7) @ ag.shift_matrix(2.3, -1.1)
    assert np.all(ag.apply_affine(img, m, interp, fill=0.37) == 0.37)


def test_singular_matrix_rejected():
    with pytest.raises(DegenerateTransformError):
        ag.apply_affine(np.zeros((3, 3)), np.diag([0.0, 1.0, 1.0]))


def _param_grid():
    thetas = (-90, -30, 0, 45, 180)
    shifts = (-2.5, -1, 0, 1, 3)
    zooms = (0.5, 0.8, 1, 1.25, 2)
    for t, s, z in itertools.product(thetas, shifts, zooms):
        yield (ag.shift_matrix(s, -s) @ ag.zoom_matrix(z, z, 8, 8) @ ag.rotation_matrix(t, 8, 8))


def test_nearest_matches_loop_oracle_on_grid(rng):
    images = [np.arange(64.0).reshape(8, 8)] + [rng.random((8, 8)) for _ in range(2)]
    for m in _param_grid():
        inv = ag.invert_affine(m).tolist()
        for img in images:
            np.testing.assert_array_equal(ag.apply_affine(img, m), warp_nearest_loop(img.tolist(), inv))


def test_bilinear_matches_loop_oracle_on_grid(rng):
    img = rng.random((8, 8))
    for m in _param_grid():
        expected = warp_bilinear_loop(img.tolist(), ag.invert_affine(m).tolist(), fill=0.25)
        np.testing.assert_allclose(ag.apply_affine(img, m, "bilinear", fill=0.25), expected, atol=1e-6)


@settings(max_examples=40, deadline=None)
@given(st.integers(-4, 4), st.integers(-4, 4), st.integers(-4, 4), st.integers(-4, 4))
def test_integer_translation_composition(a, b, c, d):
    img = np.arange(48.0).reshape(6, 8)
    m1, m2 = ag.shift_matrix(a, b), ag.shift_matrix(c, d)
    twice = ag.apply_affine(ag.apply_affine(img, m1), m2)
    once = ag.apply_affine(img, m2 @ m1)
    # exact only when no intermediate pixel is pushed off the canvas and brought back
    if a * c >= 0 and b * d >= 0:
        np.testing.assert_array_equal(once, twice)


def test_horizontal_flip(rng):
    img = rng.random((4, 5, 3))
    np.testing.assert_array_equal(ag.horizontal_flip(ag.horizontal_flip(img)), img)
    np.testing.assert_array_equal(ag.horizontal_flip(np.array([[1.0, 2.0]])), [[2.0, 1.0]])
    np.testing.assert_allclose(ag.horizontal_flip(img).sum(axis=1), img.sum(axis=1))


def test_normalize():
    assert ag.normalize(np.array([255.0]))[0] == 1.0
    assert ag.normalize(np.array([0.0]))[0] == 0.0
    assert ag.normalize(np.array([51.0]))[0] == pytest.approx(0.2)
    with pytest.raises(IngestError):
        ag.normalize(np.array([256.0]))
    with pytest.raises(IngestError):
        ag.normalize(np.array([-1.0]))
    vals = ag.normalize(np.arange(256.0))
    assert np.all(np.diff(vals) > 0)


def test_sample_all_zero_is_identity():
    s = ag.sample_augmentation(ag.AugmentConfig(), make_rng(1))
    np.testing.assert_array_equal(s.matrix, np.eye(3))
    assert s.flip is False


def test_sample_deterministic():
    cfg = ag.AugmentConfig(theta_range=20, tx_range=3, ty_range=3, shear_range=10, zoom_range=(0.8, 1.2),
                           horizontal_flip=True)
    a = ag.sample_augmentation(cfg, make_rng(7))
    b = ag.sample_augmentation(cfg, make_rng(7))
    assert a.matrix.tobytes() == b.matrix.tobytes() and a.flip == b.flip


def test_sampled_angles_within_range():
    cfg = ag.AugmentConfig(theta_range=10)
    rng = make_rng(3)
    thetas = [ag.sample_augmentation(cfg, rng).params["theta"] for _ in range(1000)]
    assert all(-10 <= t <= 10 for t in thetas)
    assert min(thetas) < -9 and max(thetas) > 9


def test_sample_composition_order():
    cfg = ag.AugmentConfig(theta_range=(30, 30), shear_range=(10, 10), zoom_range=(1.2, 1.2),
                           tx_range=(2, 2), ty_range=(-1, -1), image_height=9, image_width=9)
    s = ag.sample_augmentation(cfg, make_rng(0))
    expected = (ag.shift_matrix(2, -1) @ ag.zoom_matrix(1.2, 1.2, 9, 9) @ ag.shear_matrix(10, 9, 9)
                @ ag.rotation_matrix(30, 9, 9))
    np.testing.assert_allclose(s.matrix, expected, atol=1e-12)


def test_config_validation():
    with pytest.raises(DegenerateTransformError):
        ag.AugmentConfig(zoom_range=(0.0, 1.0))
    with pytest.raises(DegenerateTransformError):
        ag.AugmentConfig(shear_range=90)
    with pytest.raises(ValueError):
        ag.AugmentConfig(theta_range=(5, -5))
    assert ag.AugmentConfig(theta_range=15).theta_range == (-15.0, 15.0)


def test_augmenter_estimator(rng):
    X = rng.random((3, 10, 10, 3))
    aug = ag.RandomAffineAugmenter(theta_range=15, n_copies=2, seed=4)
    Xa, ya = aug.fit(X).transform_xy(X, np.array([0, 1, 2]))
    assert Xa.shape == (9, 10, 10, 3)
    assert ya.tolist() == [0, 1, 2] * 3
    np.testing.assert_array_equal(Xa[:3], X)
    again = ag.RandomAffineAugmenter(theta_range=15, n_copies=2, seed=4).fit(X).transform(X)
    assert again.tobytes() == Xa.tobytes()
    assert "theta_range" in aug.get_params()
