import warnings

import numpy as np
import pytest

from turbforward.turbulence import (
    CoefficientField,
    CorrelationModel,
    OpticsConfig,
    d_over_r0,
    default_variance_table,
    fried_parameter,
    modal_variances,
    parse_variance_table,
    sample_coefficient_field,
    tilt_field_from_coefficients,
)

REFERENCE_R0 = 4.0191135384561765e-08  # (0.423 k^2 Cn2 L)^(-3/5) for the default optics


def test_fried_parameter_frozen():
    assert fried_parameter(OpticsConfig()) == pytest.approx(REFERENCE_R0, rel=1e-12)


def test_reference_strength_is_capped():
    with pytest.warns(RuntimeWarning, match="clamping"):
        assert d_over_r0(OpticsConfig()) == 50.0


def test_explicit_r0_used():
    cfg = OpticsConfig(r0=0.05)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert d_over_r0(cfg) == pytest.approx(0.2034 / 0.05)


@pytest.mark.parametrize(
    "kwargs", [{"aperture_diameter": -1.0}, {"wavelength": 0.0}, {"cn2": -1e-15}, {"height": 0}, {"n_modes": 2}]
)
def test_optics_validation(kwargs):
    with pytest.raises(ValueError):
        OpticsConfig(**kwargs)


def test_noll_variance_table_frozen():
    table = default_variance_table()
    assert table[1] == 0.0
    assert table[2] == table[3] == pytest.approx(0.448, abs=5e-4)
    assert table[4] == pytest.approx(0.0232, abs=1e-4)
    assert table[7] == pytest.approx(0.00619, abs=2e-5)
    assert len(table) == 66
    # variances fall with radial order
    assert table[11] < table[7] < table[4] < table[2]


def test_variance_table_parsing():
    assert parse_variance_table("# c\n1 = 0\n2 = 0.5  # tilt\n") == {1: 0.0, 2: 0.5}
    for bad in ("2 0.5", "2 = -1", "1 = 0\n1 = 0", "0 = 1"):
        with pytest.raises(ValueError):
            parse_variance_table(bad)


def test_modal_variance_units():
    cfg = OpticsConfig(r0=0.2034 / 2.0, n_modes=6)
    var = modal_variances(cfg)
    expected = 0.448153 * 2.0 ** (5 / 3) / (2 * np.pi) ** 2
    assert var[1] == pytest.approx(expected, rel=1e-6)
    assert var[0] == 0.0


def test_missing_modes_rejected():
    with pytest.raises(ValueError, match="lacks modes"):
        modal_variances(OpticsConfig(r0=0.1, n_modes=6), {1: 0.0, 2: 1.0})


@pytest.mark.parametrize("kind, size, scale", [("independent", 100, 1.0), ("smoothed", 256, 1.5)])
def test_sample_variance_within_ten_percent(kind, size, scale):
    # correlated pixels inflate the sampling error (about sqrt(2 pi l^2 / N)),
    # so the smoothed case uses a larger frame and a short length scale
    cfg = OpticsConfig(r0=0.05, height=size, width=size, n_modes=10, seed=3)
    corr = CorrelationModel(kind, scale)
    field = sample_coefficient_field(cfg, corr)
    empirical = field.values.reshape(-1, 10).var(axis=0)
    np.testing.assert_allclose(empirical[1:], field.variances[1:], rtol=0.10)
    assert np.all(field.values[..., 0] == 0)


def test_smoothed_neighbours_correlated():
    cfg = OpticsConfig(r0=0.05, height=128, width=128, n_modes=4, seed=0)
    v = sample_coefficient_field(cfg, CorrelationModel("smoothed", 8.0)).values[..., 1]
    rho = np.corrcoef(v[:, :-1].ravel(), v[:, 1:].ravel())[0, 1]
    # Gaussian correlation at distance 1: exp(-1 / (2 * 64))
    assert rho == pytest.approx(np.exp(-1 / 128), abs=0.02)
    w = sample_coefficient_field(cfg, CorrelationModel("independent")).values[..., 1]
    assert abs(np.corrcoef(w[:, :-1].ravel(), w[:, 1:].ravel())[0, 1]) < 0.05


def test_sampling_deterministic_and_streamed():
    cfg = OpticsConfig(r0=0.05, height=32, width=32, n_modes=6, seed=7)
    a = sample_coefficient_field(cfg).values
    b = sample_coefficient_field(cfg).values
    c = sample_coefficient_field(cfg, stream="other").values
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not a.flags.writeable


def test_correlation_validation():
    with pytest.raises(ValueError):
        CorrelationModel("fractal")
    with pytest.raises(ValueError):
        CorrelationModel("smoothed", 0.0)
    assert CorrelationModel("independent").describe() == "independent"


def test_tilt_field_is_gain_times_tilt_modes():
    values = np.zeros((4, 5, 6))
    values[..., 1] = 0.25
    values[..., 2] = -0.5
    t = tilt_field_from_coefficients(values, gain=-16.0)
    np.testing.assert_allclose(t.values[..., 0], -4.0)
    np.testing.assert_allclose(t.values[..., 1], 8.0)
    assert t.shape == (4, 5)
    np.testing.assert_allclose(t.scaled(0.5).values, t.values * 0.5)
    with pytest.raises(ValueError):
        tilt_field_from_coefficients(np.zeros((4, 5, 2)), 1.0)


def test_coefficient_field_properties():
    cfg = OpticsConfig(r0=0.05, height=8, width=9, n_modes=5)
    field = sample_coefficient_field(cfg)
    assert isinstance(field, CoefficientField)
    assert field.shape == (8, 9) and field.n_modes == 5
