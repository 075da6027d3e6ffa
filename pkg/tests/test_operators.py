import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from turbforward.analysis import shape_correlation
from turbforward.operators import (
    MAX_MATRIX_PIXELS,
    OperatorMatrix,
    apply_blur,
    apply_tilt,
    blur_then_tilt,
    build_blur_matrix,
    build_tilt_matrix,
    build_tilt_then_blur_matrix,
    commutator_report,
    full_model,
    inverse_warp,
    load_matrix_text,
    matrix_of,
    shift_matrix,
    tilt_then_blur,
)
from turbforward.psf import PsfField, calibrate_tilt_gain, synthesize_psf

UNIT_SHIFT_N6 = np.array(
    [
        [0, 1, 0, 0, 0, 0],
        [0, 0, 1, 0, 0, 0],
        [0, 0, 0, 1, 0, 0],
        [0, 0, 0, 0, 1, 0],
        [0, 0, 0, 0, 0, 1],
        [0, 0, 0, 0, 0, 0],
    ],
    dtype=float,
)


def gaussian_kernel(size, sigma):
    x = np.arange(size) - size // 2
    g = np.exp(-(x[:, None] ** 2 + x[None, :] ** 2) / (2 * sigma**2))
    return g / g.sum()


def random_field(rng, shape, lattice, k, interp="nearest"):
    kernels = rng.random(lattice + (k, k))
    kernels /= kernels.sum(axis=(2, 3), keepdims=True)
    return PsfField(kernels, shape, interp)


# -- tilt ------------------------------------------------------------------------------


def test_unit_shift_matrix():
    t = shift_matrix(6)
    np.testing.assert_array_equal(t.matrix, UNIT_SHIFT_N6)
    assert t.kind == "TILT"


def test_zero_tilt_identity():
    np.testing.assert_array_equal(build_tilt_matrix(np.zeros((3, 4, 2))).matrix, np.eye(12))


def test_permutation_tilts_doubly_stochastic(rng):
    n = 10
    perm = rng.permutation(n)
    t = build_tilt_matrix(perm - np.arange(n))
    np.testing.assert_array_equal(t.matrix.sum(axis=0), 1)
    np.testing.assert_array_equal(t.matrix.sum(axis=1), 1)
    assert set(np.unique(t.matrix)) == {0.0, 1.0}


def test_tilt_matrix_rejects_fractional_and_large():
    with pytest.raises(ValueError, match="integer"):
        build_tilt_matrix(np.full(5, 0.5))
    with pytest.raises(ValueError):
        build_tilt_matrix(np.zeros(MAX_MATRIX_PIXELS + 1))


def test_apply_tilt_integer_is_shift():
    img = np.zeros((6, 6))
    img[2, 3] = 1.0
    t = np.zeros((6, 6, 2))
    t[2, 3] = (1, -2)
    out = apply_tilt(img, t)
    assert out[3, 1] == 1.0 and out.sum() == 1.0


def test_apply_tilt_mass_conservation(rng):
    img = np.zeros((32, 32))
    img[8:24, 8:24] = rng.random((16, 16))
    t = rng.uniform(-2, 2, (32, 32, 2))
    out, lost = apply_tilt(img, t, return_mass_loss=True)
    assert out.sum() == pytest.approx(img.sum(), abs=1e-9)
    assert lost == pytest.approx(0.0, abs=1e-9)
    assert out.min() >= 0


def test_apply_tilt_drops_outside(rng):
    img = np.ones((4, 4))
    t = np.zeros((4, 4, 2))
    t[..., 1] = 1.0
    out, lost = apply_tilt(img, t, return_mass_loss=True)
    assert lost == pytest.approx(4.0)
    np.testing.assert_array_equal(out[:, 0], 0)


def test_apply_tilt_1d_matches_matrix(rng):
    j = rng.random(16)
    t = rng.integers(-2, 3, 16).astype(float)
    np.testing.assert_allclose(apply_tilt(j, t), build_tilt_matrix(t).apply(j), atol=1e-12)


def test_inverse_warp_integer_shift():
    img = np.arange(25.0).reshape(5, 5)
    t = np.zeros((5, 5, 2))
    t[..., 0] = 1
    out = inverse_warp(img, t)
    np.testing.assert_allclose(out[1:], img[:-1], atol=1e-12)


def test_tilt_validation():
    with pytest.raises(ValueError):
        apply_tilt(np.ones((4, 4)), np.zeros((4, 5, 2)))
    with pytest.raises(ValueError):
        apply_tilt(np.ones((4, 4)), np.full((4, 4, 2), np.nan))
    with pytest.raises(ValueError):
        apply_tilt(np.ones((2, 2, 2)), np.zeros((2, 2, 2)))


# -- blur ------------------------------------------------------------------------------


def test_delta_kernels_identity():
    field = PsfField(np.ones((2, 2, 1, 1)), (6, 6))
    np.testing.assert_array_equal(build_blur_matrix(field).matrix, np.eye(36))


def test_invariant_blur_matrix_toeplitz(rng):
    k = rng.random((1, 1, 1, 5))
    b = build_blur_matrix(PsfField(k / k.sum(), (1, 12))).matrix
    for d in range(-2, 3):
        diag = np.diagonal(b, d)
        np.testing.assert_allclose(diag, diag[0])


def test_blur_interior_row_sums(rng):
    field = random_field(rng, (12, 12), (3, 3), 3, "bilinear")
    b = build_blur_matrix(field).matrix.reshape(12, 12, -1)
    np.testing.assert_allclose(b[1:-1, 1:-1].sum(axis=-1), 1.0, atol=1e-6)


@pytest.mark.parametrize("interp", ["nearest", "bilinear"])
def test_blur_16x16_g4_matches_matrix(rng, interp):
    field = random_field(rng, (16, 16), (4, 4), 5, interp)
    j = rng.random((16, 16))
    np.testing.assert_allclose(apply_blur(j, field), build_blur_matrix(field).apply(j), atol=1e-6)


def test_blur_field_shape_checked(rng):
    with pytest.raises(ValueError):
        apply_blur(np.ones((8, 8)), random_field(rng, (8, 9), (1, 1), 3))


# -- compositions ----------------------------------------------------------------------


def test_blur_then_tilt_1d_matrix(rng):
    j = rng.random(16)
    k = rng.random((1, 1, 1, 3))
    field = PsfField(k / k.sum(), (1, 16))
    t = rng.integers(-3, 4, 16).astype(float)
    expected = build_tilt_matrix(t).matrix @ build_blur_matrix(field).matrix @ j
    np.testing.assert_allclose(blur_then_tilt(j, t, field), expected, atol=1e-6)


def test_tilt_then_blur_1d_shift_matrix(rng):
    j = rng.random(16)
    k = rng.random((1, 1, 1, 5))
    field = PsfField(k / k.sum(), (1, 16))
    t = -np.ones(16)
    b = build_blur_matrix(field).matrix
    tm = shift_matrix(16).matrix
    np.testing.assert_allclose(tilt_then_blur(j, t, field), b @ tm @ j, atol=1e-6)


def test_tilt_then_blur_varying_matches_anchor_sum(rng):
    field = random_field(rng, (10, 10), (2, 2), 3, "bilinear")
    t = rng.integers(-2, 3, (10, 10, 2)).astype(float)
    j = rng.random((10, 10))
    np.testing.assert_allclose(
        tilt_then_blur(j, t, field), build_tilt_then_blur_matrix(t, field).apply(j), atol=1e-12
    )


@pytest.mark.parametrize("shift", ["cubic", "bilinear"])
def test_point_source_shape_preserved(shift):
    kernel = gaussian_kernel(21, 3.0)
    field = PsfField.invariant(kernel, (64, 64))
    img = np.zeros((64, 64))
    img[32, 32] = 1.0
    rng = np.random.default_rng(5)
    t = rng.normal(0, 2.0, (64, 64, 2))
    out = tilt_then_blur(img, t, field, kernel_shift=shift)
    corr, fit = shape_correlation(out[8:57, 8:57], kernel, 4)
    assert corr > 0.999
    np.testing.assert_allclose(fit, t[32, 32], atol=0.05)


def test_point_source_shape_destroyed_by_blur_then_tilt():
    kernel = gaussian_kernel(21, 3.0)
    field = PsfField.invariant(kernel, (64, 64))
    img = np.zeros((64, 64))
    img[32, 32] = 1.0
    t = np.random.default_rng(5).normal(0, 2.0, (64, 64, 2))
    out = blur_then_tilt(img, t, field)
    corr, _ = shape_correlation(out[8:57, 8:57], kernel, 4)
    assert corr < 0.95


def test_constant_tilt_orderings_commute(rng):
    kernel = gaussian_kernel(9, 1.5)
    field = PsfField.invariant(kernel, (40, 40))
    img = np.zeros((40, 40))
    img[12:28, 12:28] = rng.random((16, 16))
    t = np.broadcast_to(np.array([1.0, -2.0]), (40, 40, 2))
    np.testing.assert_allclose(blur_then_tilt(img, t, field), tilt_then_blur(img, t, field), atol=1e-12)


def test_unknown_method(rng):
    field = PsfField.invariant(np.ones((1, 1)), (4, 4))
    for op in (blur_then_tilt, tilt_then_blur):
        with pytest.raises(ValueError):
            op(np.ones((4, 4)), np.zeros((4, 4, 2)), field, method="fft")


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(0, 2**31 - 1),
    alpha=st.floats(-3, 3),
    beta=st.floats(-3, 3),
    method=st.sampled_from(["scatter", "gather"]),
)
def test_linearity(seed, alpha, beta, method):
    rng = np.random.default_rng(seed)
    field = random_field(rng, (12, 12), (2, 2), 3, "bilinear")
    t = rng.normal(0, 1.5, (12, 12, 2))
    j1, j2 = rng.random((2, 12, 12))
    for op in (blur_then_tilt, tilt_then_blur):
        lhs = op(alpha * j1 + beta * j2, t, field, method=method)
        rhs = alpha * op(j1, t, field, method=method) + beta * op(j2, t, field, method=method)
        scale = max(1.0, np.abs(rhs).max())
        assert np.abs(lhs - rhs).max() <= 1e-9 * scale


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_nonnegativity(seed):
    rng = np.random.default_rng(seed)
    field = random_field(rng, (12, 12), (2, 2), 3)
    t = rng.normal(0, 1.5, (12, 12, 2))
    j = rng.random((12, 12))
    assert apply_tilt(j, t).min() >= 0
    assert apply_blur(j, field).min() >= 0
    assert blur_then_tilt(j, t, field).min() >= 0
    assert tilt_then_blur(j, t, field, kernel_shift="bilinear").min() >= 0


def test_cubic_kernel_shift_undershoot_small(rng):
    # the Keys kernel can dip below zero; the dip stays tiny for smooth PSFs
    kernel = gaussian_kernel(15, 2.0)
    field = PsfField.invariant(kernel, (32, 32))
    img = np.zeros((32, 32))
    img[16, 16] = 1.0
    t = np.broadcast_to(np.array([0.5, 0.3]), (32, 32, 2))
    out = tilt_then_blur(img, t, field)
    assert out.min() > -2e-3 * out.max()


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), one_d=st.booleans())
def test_matrix_oracle_property(seed, one_d):
    rng = np.random.default_rng(seed)
    shape = (1, int(rng.integers(2, 65))) if one_d else tuple(rng.integers(2, 17, 2))
    k = int(rng.choice([1, 3, 5]))
    kernels = rng.random((1, 1) + ((1, k) if one_d else (k, k)))
    field = PsfField(kernels / kernels.sum(), shape)
    t = rng.integers(-3, 4, shape + (2,)).astype(float)
    if one_d:
        t[..., 0] = 0
    j = rng.standard_normal(shape)
    tm = build_tilt_matrix(t, shape).matrix
    bm = build_blur_matrix(field).matrix
    np.testing.assert_allclose(blur_then_tilt(j, t, field).ravel(), tm @ bm @ j.ravel(), atol=1e-6)
    np.testing.assert_allclose(tilt_then_blur(j, t, field).ravel(), bm @ tm @ j.ravel(), atol=1e-6)


# -- full model ------------------------------------------------------------------------


def test_full_model_zero_coefficients_is_diffraction_blur(stack):
    img = np.zeros((40, 40))
    img[20, 20] = 2.0
    img[10, 25] = 1.0
    coeffs = np.zeros((40, 40, 10))
    out = full_model(img, coeffs, stack.grid, stack, kernel_size=15, pad=4)
    airy = synthesize_psf(np.zeros(stack.grid.mask.shape), stack.grid, 15, 4)
    expected = apply_blur(img, PsfField.invariant(airy, (40, 40)))
    np.testing.assert_allclose(out, expected, atol=1e-14)


def test_full_model_matrix_equals_bt_integer_tilts(stack):
    # a 1 x 24 signal embedded in the middle row of a 7-row frame, so the
    # kernels' vertical spread stays inside the frame
    kappa = calibrate_tilt_gain(stack, pad=4)
    rng = np.random.default_rng(2)
    frame = (7, 24)
    tilts = rng.integers(-2, 3, 24).astype(float)
    tilts[:3] = np.maximum(tilts[:3], 0)
    tilts[-3:] = np.minimum(tilts[-3:], 0)
    coeffs = np.zeros(frame + (10,))
    coeffs[..., 3:] = rng.normal(0, 0.05, 7)  # one shared blur
    coeffs[..., 2] = tilts / kappa  # column tilt through mode 3
    kernel = synthesize_psf(np.tensordot(coeffs[0, 0, 3:], stack.planes[3:10], axes=1), stack.grid, 7, 4)
    h = np.zeros((7 * 24, 24))
    for j in range(24):
        e = np.zeros(frame)
        e[3, j] = 1.0
        h[:, j] = full_model(e, coeffs, stack.grid, stack, kernel_size=7, pad=4, gain=kappa).ravel()
    b = build_blur_matrix(PsfField.invariant(kernel, frame)).matrix
    t2 = np.zeros(frame + (2,))
    t2[..., 1] = tilts
    tm = build_tilt_matrix(t2).matrix
    cols = np.ravel_multi_index((np.full(24, 3), np.arange(24)), frame)
    np.testing.assert_allclose(h, (b @ tm)[:, cols], atol=1e-12)


def test_full_model_coefficient_shape_checked(stack):
    with pytest.raises(ValueError):
        full_model(np.ones((8, 8)), np.zeros((8, 9, 4)), stack.grid, stack, kernel_size=5)


# -- dense matrices --------------------------------------------------------------------


def test_commutator_structure(rng):
    n = 8
    b = OperatorMatrix(rng.random((n, n)) + np.arange(n)[:, None], "BLUR", (1, n))
    report = commutator_report(shift_matrix(n), b)
    assert report.max_abs > 0 and not report.commute
    assert report.tb_rows == "up"
    assert report.bt_columns == "right"
    tb = shift_matrix(n).matrix @ b.matrix
    np.testing.assert_array_equal(tb[:-1], b.matrix[1:])
    np.testing.assert_array_equal(tb[-1], 0)


def test_commutator_identity_zero(rng):
    b = OperatorMatrix(rng.random((5, 5)), "BLUR", (1, 5))
    report = commutator_report(build_tilt_matrix(np.zeros(5)), b)
    assert report.commute and report.frobenius == 0.0


def test_commutator_shape_check():
    with pytest.raises(ValueError):
        commutator_report(shift_matrix(3), shift_matrix(4))


def test_matrix_text_roundtrip(tmp_path, rng):
    m = OperatorMatrix(rng.random((6, 6)), "BLUR", (2, 3))
    path = m.save_text(tmp_path / "b.txt")
    assert len(path.read_text().splitlines()) == 6
    np.testing.assert_array_equal(load_matrix_text(path), m.matrix)


def test_matrix_apply_shape_check(rng):
    m = OperatorMatrix(np.eye(6), "TILT", (2, 3))
    with pytest.raises(ValueError):
        m.apply(np.ones((3, 2)))


def test_matrix_of_recovers_blur(rng):
    field = random_field(rng, (6, 6), (2, 2), 3)
    np.testing.assert_allclose(
        matrix_of(lambda j: apply_blur(j, field), (6, 6), "BLUR").matrix, build_blur_matrix(field).matrix, atol=1e-15
    )
