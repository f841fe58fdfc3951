import numpy as np
import pytest

from dnls_lattice.lattice import LatticeWindow, exponential, single_site, two_site, zero_potential
from dnls_lattice.scattering import (classify_genericity, jost_wronskian, jost_wronskian_grid, scattering_data,
                                     scattering_grid_fast, wronskian)
from dnls_lattice.jost import jost_m
from oracles import plane_wave_coefficients, raw_jost, single_site_scattering

W = LatticeWindow.symmetric(24)


def test_single_site_closed_form():
    th = np.linspace(0.1, np.pi - 0.1, 25)
    for v in (-1.0, 0.7):
        d = scattering_grid_fast(single_site(W, v), th)
        T, R = single_site_scattering(v, th)
        np.testing.assert_allclose(d["T"], T, atol=1e-13)
        np.testing.assert_allclose(d["R_plus"], R, atol=1e-13)
        np.testing.assert_allclose(d["R_minus"], R, atol=1e-13)


def test_point_values_at_quarter_band():
    sd = scattering_data(single_site(W), np.pi / 2)
    assert sd.T == pytest.approx(0.8 - 0.4j)
    assert sd.R_plus == pytest.approx(-0.2 - 0.4j)


def test_transfer_matrix_oracle_two_site():
    p = two_site(W, -0.8, 0.6, 0, 2)
    for th in (0.4, 1.3, 2.5, -1.1):
        sd = scattering_data(p, th)
        fp = raw_jost(p.q, p.sites, th, "+")
        fm = raw_jost(p.q, p.sites, th, "-")
        A, B = plane_wave_coefficients(fp, p.sites, th, 0)
        assert sd.T == pytest.approx(1 / A, abs=1e-12)
        assert sd.R_minus == pytest.approx(B / A, abs=1e-12)
        A, B = plane_wave_coefficients(fm, p.sites, th, p.window.size - 2)
        assert sd.R_plus == pytest.approx(A / B, abs=1e-12)


def test_wronskian_is_site_independent():
    p = exponential(W, c=-0.5, a=0.5)
    th = 1.1
    fp, fm = jost_m(p, "+", th).f, jost_m(p, "-", th).f
    vals = [wronskian(fp, fm, n, W) for n in range(-10, 10)]
    assert np.ptp(np.abs(vals)) < 1e-12
    assert jost_wronskian(p, th) == pytest.approx(vals[10])


def test_identities_on_grid():
    th = np.linspace(0.05, np.pi - 0.05, 200)
    for p in (zero_potential(W), single_site(W), single_site(W, 1.0), two_site(W), exponential(W)):
        d = scattering_grid_fast(p, th)
        assert max(d["unitarity_plus"].max(), d["unitarity_minus"].max(), d["cross"].max()) < 1e-12


def test_free_case_is_reflectionless():
    sd = scattering_data(zero_potential(W), 0.7)
    assert sd.T == pytest.approx(1.0) and abs(sd.R_plus) < 1e-15


def test_edges_flagged_undefined():
    sd = scattering_data(single_site(W), 0.0)
    assert not sd.defined


def test_genericity():
    rz = classify_genericity(zero_potential(W))
    assert not rz.is_generic and set(rz.resonant_edges) == {0, 4}
    rd = classify_genericity(single_site(W))
    assert rd.is_generic and rd.W_at_0 == pytest.approx(1.0)
    rp = classify_genericity(single_site(W, 1.0))
    assert rp.W_at_0 == pytest.approx(-1.0)
    assert rd.to_dict()["is_generic"] is True


def test_wronskian_grid_matches_pointwise():
    p = two_site(W)
    th = np.array([0.2, 1.0, 2.0])
    np.testing.assert_allclose(jost_wronskian_grid(p, th), [jost_wronskian(p, t) for t in th], atol=1e-14)


def test_wronskian_by_hand():
    w = LatticeWindow.symmetric(6)
    one, n = np.ones(w.size), w.sites.astype(float)
    assert wronskian(one, n, 2, w) == pytest.approx(-1.0)
    assert wronskian(n, n, 0, w) == 0
    th = np.pi / 3
    fp, fm = np.exp(-1j * th * w.sites), np.exp(1j * th * w.sites)
    for site in (-3, 0, 4):
        assert wronskian(fp, fm, site, w) == pytest.approx(-1j * np.sqrt(3))


def test_free_wronskian_and_coefficients():
    for th in (0.3, 2.0):
        sd = scattering_data(zero_potential(W), th)
        assert sd.W == pytest.approx(-2j * np.sin(th))
        assert sd.T == pytest.approx(1.0) and abs(sd.R_minus) < 1e-15


def test_conjugation_symmetry():
    p = exponential(W, -0.5, 0.7)
    for th in (0.4, 2.3):
        a, b = scattering_data(p, th), scattering_data(p, -th)
        for x, y in ((a.T, b.T), (a.R_plus, b.R_plus), (a.R_minus, b.R_minus)):
            assert y == pytest.approx(np.conj(x), abs=1e-13)


def test_edge_values_agree_and_classification_is_deterministic():
    for p in (single_site(W), two_site(W), exponential(W)):
        r = classify_genericity(p)
        assert abs(r.W_at_pi - r.W_at_minus_pi) < 1e-10
    a = classify_genericity(single_site(W, -2.0)).to_dict()
    b = classify_genericity(single_site(W, -2.0)).to_dict()
    assert a == b
    # transfer-matrix value of the edge Wronskian for q = -delta_0
    f_p = raw_jost(single_site(W).q, W.sites, 0.0, "+")
    f_m = raw_jost(single_site(W).q, W.sites, 0.0, "-")
    i = W.index(0)
    assert classify_genericity(single_site(W)).W_at_0 == pytest.approx(f_p[i + 1] * f_m[i] - f_p[i] * f_m[i + 1])
