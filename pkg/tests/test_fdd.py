import json

import numpy as np
import pytest
import scipy.integrate
import scipy.special
from hypothesis import given, strategies as st

from mwcomplete.errors import ConfigError
from mwcomplete.fdd import (
    ChannelConfig, angles_json, array_response, bessel_j0, correlation_entry, correlation_matrix,
    draw_channel, draw_scatterers, expected_grams, monte_carlo_correlation, prior_angles_from_velocity,
)


def j0_quad(x):
    # defining integral (1/pi) int_0^pi cos(x sin t) dt
    val, _ = scipy.integrate.quad(lambda t: np.cos(x * np.sin(t)), 0.0, np.pi, limit=200, epsabs=1e-12, epsrel=0.0)
    return val / np.pi


@given(st.floats(-60.0, 60.0))
def test_j0_matches_scipy(x):
    assert bessel_j0(x) == pytest.approx(scipy.special.j0(x), abs=1e-11)


def test_j0_backends_agree(monkeypatch):
    x = np.linspace(-50, 50, 2001)
    monkeypatch.setenv("MWCOMPLETE_DISABLE_NUMBA", "0")
    a = bessel_j0(x)
    monkeypatch.setenv("MWCOMPLETE_DISABLE_NUMBA", "1")
    b = bessel_j0(x)
    assert np.allclose(a, b, atol=1e-15, rtol=0)


@pytest.mark.parametrize("x", [0.0, 0.5, 2.404825557695773, 7.99, 8.0, 13.9, 14.1, 30.0, -42.0])
def test_j0_matches_quadrature(x):
    assert bessel_j0(x) == pytest.approx(j0_quad(x), abs=1e-10)


def test_j0_shapes():
    assert isinstance(bessel_j0(1.0), float)
    assert bessel_j0(np.zeros((2, 3))).shape == (2, 3)
    with pytest.raises(ValueError):
        bessel_j0(np.inf)


def test_config_validation_and_round_trip():
    cfg = ChannelConfig(velocities=(1, 2, 3, 4), seed=3)
    assert ChannelConfig.from_json(json.dumps(cfg.to_dict())) == cfg
    for bad in ({"velocities": [1, 2]}, {"wavelength": 0}, {"scatterers": [0, 3]},
                {"t1": 0.0, "t2": 1.0}, {"velocities": [-1, 1, 1, 1]}, {"bogus": 1}):
        with pytest.raises(ConfigError):
            ChannelConfig.from_dict(bad)
    with pytest.raises(ConfigError):
        ChannelConfig.from_json("[1, 2]")
    with pytest.raises(ConfigError):
        ChannelConfig.from_json("{nope")


def test_array_response_unit_modulus():
    cfg = ChannelConfig()
    a = array_response(np.linspace(0, np.pi, 7), cfg)
    assert a.shape == (7, 20)
    assert np.allclose(np.abs(a), 1.0)


def test_channel_energy_and_determinism():
    cfg = ChannelConfig(seed=5)
    h1 = draw_channel(cfg, cfg.t1).h
    assert np.array_equal(h1, draw_channel(cfg, cfg.t1).h)
    energies = [np.sum(np.abs(draw_channel(cfg, 0.0, seed=s).h[:, 0]) ** 2) for s in range(4000)]
    assert np.mean(energies) == pytest.approx(1.0, abs=0.05)


def test_shared_scatterers_link_snapshots():
    cfg = ChannelConfig(velocities=(0, 0, 0, 0))
    sc = draw_scatterers(cfg, np.random.default_rng(0))
    # static users: the channel does not change over time
    a = draw_channel(cfg, cfg.t1, scatterers=sc).h
    b = draw_channel(cfg, cfg.t2, scatterers=sc).h
    assert np.allclose(a, b)


def test_correlation_symmetries():
    cfg = ChannelConfig(velocities=(1, 3, 5, 7))
    p = correlation_matrix(cfg, 1, 1)
    assert np.allclose(p, p.conj().T)
    assert correlation_entry(cfg, 0, 0, 4, 4, 0.0, 0.0) == pytest.approx(1.0)
    with pytest.raises(IndexError):
        correlation_entry(cfg, 0, 4, 0, 0)


@pytest.mark.parametrize("k, l", [(0, 0), (0, 2)])
def test_correlation_vs_monte_carlo(k, l):
    cfg = ChannelConfig(n_antennas=6, velocities=(20, 20, 40, 40), t1=2e-3, t2=1e-3)
    mean, se = monte_carlo_correlation(cfg, k, l, draws=20_000, seed=1)
    ref = correlation_matrix(cfg, k, l)
    z = np.abs(mean - ref) / np.maximum(se, 1e-12)
    assert z.max() < 4.5


def test_expected_grams_hermitian_psd():
    cfg = ChannelConfig(velocities=(1, 2, 3, 4))
    for ta, tb in ((cfg.t1, cfg.t1), (cfg.t2, cfg.t2)):
        col, row = expected_grams(cfg, ta, tb)
        for g in (col, row):
            assert np.allclose(g, g.conj().T)
            assert np.linalg.eigvalsh(g).min() > -1e-12


def test_angles_monotone_in_velocity():
    cfg = ChannelConfig(seed=0)
    maxima = [prior_angles_from_velocity(cfg.with_velocity(v))[0].max() for v in (0, 1, 2, 4, 8, 16)]
    assert maxima[0] == pytest.approx(0.0, abs=1e-6)
    assert np.all(np.diff(maxima) >= -1e-12)


def test_angles_shape_range_and_options():
    cfg = ChannelConfig(velocities=(1, 5, 10, 30))
    for whiten in (True, False):
        tu, tv = prior_angles_from_velocity(cfg, whiten=whiten)
        for t in (tu, tv):
            assert t.shape == (4,)
            assert np.all((t >= 0) & (t <= np.pi / 2))
            assert np.all(np.diff(t) <= 1e-12)
    assert prior_angles_from_velocity(cfg, r=2)[0].shape == (2,)
    with pytest.raises(ConfigError):
        prior_angles_from_velocity(cfg, r=9)
    doc = json.loads(angles_json(tu, tv))
    assert np.allclose(doc["theta_u_deg"], np.degrees(tu))
