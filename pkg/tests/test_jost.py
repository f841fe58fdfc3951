import numpy as np
import pytest

from dnls_lattice.jost import (JostOverflowError, SpectralPoint, fourier_bound, fourier_coefficients, jost_m,
                               jost_m_derivative, jost_phase, jost_series_terms, modified_jost_grid,
                               theta_from_z, verify_jost_bounds, volterra_kernel, volterra_kernel_dot,
                               volterra_residual, z_from_theta)
from dnls_lattice.lattice import LatticeWindow, exponential, single_site, two_site, zero_potential
from oracles import raw_jost

W = LatticeWindow.symmetric(40)


def test_free_case_is_identically_one():
    jd = jost_m(zero_potential(W), "+", 0.9)
    np.testing.assert_array_equal(jd.m, np.ones(W.size))
    np.testing.assert_allclose(jd.f, np.exp(-0.9j * W.sites))


def test_single_site_by_hand():
    # m_+(n) = 1 for n >= 0 and m_+(-1) = 1 - e^{-i theta} q(0) ... = 1 + i at theta = pi/2, q = -delta_0
    jd = jost_m(single_site(W), "+", np.pi / 2)
    assert jd.m[W.index(0)] == pytest.approx(1.0)
    assert jd.m[W.index(-1)] == pytest.approx(1 + 1j)


@pytest.mark.parametrize("theta", [0.3, 1.7, -2.2, 0.4 - 0.3j])
@pytest.mark.parametrize("sign", ["+", "-"])
def test_recursion_against_raw_three_term_recursion(theta, sign):
    p = two_site(W, -0.8, 0.6)
    jd = jost_m(p, sign, theta)
    f = raw_jost(p.q, p.sites, theta, sign)
    np.testing.assert_allclose(jd.f, f, rtol=1e-11, atol=1e-11)


def test_volterra_residual_is_rounding_level():
    p = exponential(W, c=-0.5, a=1.0)
    for th in (0.2, 2.9, 1.0 - 0.2j):
        for sign in "+-":
            jd = jost_m(p, sign, th)
            assert np.max(np.abs(volterra_residual(p, sign, th, jd.m))) < 1e-12


def test_volterra_kernel_edges():
    mu = np.array([-3, -1, 2])
    np.testing.assert_allclose(volterra_kernel(mu, 0.0), -mu)
    np.testing.assert_allclose(volterra_kernel(mu, np.pi), mu)
    # continuity across the series cut-off
    for th in (1e-3, np.pi - 1e-3):
        a = volterra_kernel(mu, th)
        x = th if th < 1 else th - np.pi
        exact = (1 - np.exp(2j * mu * th)) / (2j * np.sin(th))
        np.testing.assert_allclose(a, exact, rtol=1e-10)
        assert abs(x) < 0.01
    np.testing.assert_allclose(volterra_kernel_dot(mu, 0.0), -1j * mu ** 2, atol=1e-14)


def test_derivative_matches_finite_difference():
    p = exponential(W, c=-0.5, a=0.8)
    th, h = 0.9, 1e-5
    d = jost_m_derivative(p, "+", th)
    fd = (jost_m(p, "+", th + h).m - jost_m(p, "+", th - h).m) / (2 * h)
    # central-difference truncation grows like h^2 |n|^3 across the window
    np.testing.assert_allclose(d, fd, rtol=1e-6, atol=1e-8)


def test_derivative_at_edge_is_finite():
    d = jost_m_derivative(single_site(W), "+", 0.0)
    assert np.all(np.isfinite(d))


def test_born_series_converges_to_recursion():
    p = exponential(W, c=0.05, a=1.0)
    th = 0.8
    terms = jost_series_terms(p, "+", th, 12)
    m = jost_m(p, "+", th).m
    assert np.max(np.abs(1 + terms.sum(axis=0) - m)) < 1e-12
    with pytest.raises(ValueError):
        jost_series_terms(p, "+", th, 0)


def test_fourier_resummation_matches_recursion():
    p = exponential(LatticeWindow.symmetric(16), c=-0.5, a=1.0)
    th = np.linspace(-3, 3, 17)
    for sign in "+-":
        tab = fourier_coefficients(p, sign)
        np.testing.assert_allclose(tab.resum(th), modified_jost_grid(p, sign, th), atol=1e-12)
        bound = fourier_bound(p, sign, tab.nu_max)
        assert np.all(np.abs(tab.B) <= bound * (1 + 1e-12) + 1e-15)


def test_overflow_reports_site():
    p = single_site(LatticeWindow.symmetric(512))
    with pytest.raises(JostOverflowError) as err:
        jost_m(p, "+", 0.5 - 5j)
    assert err.value.site < 0


def test_spectral_point_conversions():
    for z in (-1.0, 5.0, 2 + 1j, 1.5 - 0.5j):
        th = theta_from_z(z)
        assert np.imag(th) <= 1e-15
        assert z_from_theta(th) == pytest.approx(z)
    assert SpectralPoint.from_theta(0.5).is_real
    assert not SpectralPoint.from_z(-1.0).is_real


def test_upper_half_plane_theta_rejected():
    with pytest.raises(ValueError):
        jost_m(single_site(W), "+", 0.5 + 0.1j)


def test_phase_factor():
    np.testing.assert_allclose(jost_phase(W, "-", [0.3])[0], np.exp(0.3j * W.sites))


def test_bound_report_constants_are_finite():
    p = exponential(W, c=-0.5, a=1.0)
    grid = np.linspace(-np.pi, np.pi, 129)[1:-1]
    rep = verify_jost_bounds(p, "+", grid, sigma=1.0, with_derivative=True)
    assert rep["violations"] == []
    assert all(np.isfinite(rep[k]) for k in ("C_bound1", "C_bound2", "C_bound3"))


def test_first_born_term_single_site():
    g1 = jost_series_terms(single_site(W), "+", np.pi / 2, 1)[0]
    n = W.sites
    expect = np.where(n <= 0, -volterra_kernel(n, np.pi / 2), 0.0)
    np.testing.assert_allclose(g1, expect, atol=1e-15)
    assert g1[W.index(-1)] == pytest.approx(1j)


def test_born_terms_obey_factorial_majorant_near_edge():
    p = exponential(W, c=-0.5, a=1.0)
    gamma = p.gamma_tail
    for th in (0.0, 1e-3):
        terms = jost_series_terms(p, "+", th, 6)
        for ell in range(1, 7):
            bound = gamma ** ell / float(np.prod(np.arange(1, ell + 1)))
            assert np.all(np.abs(terms[ell - 1]) <= bound * (1 + 1e-9) + 1e-15)


def test_periodicity_and_cauchy_riemann():
    p = two_site(W)
    th = np.array([0.4, -2.0])
    np.testing.assert_allclose(modified_jost_grid(p, "+", th), modified_jost_grid(p, "+", th + 2 * np.pi),
                               atol=1e-12)
    # analyticity below the real axis: d/dx = -i d/dy for m(x + iy)
    z0, h = 0.8 - 0.3j, 1e-4
    m = lambda z: modified_jost_grid(p, "-", [z])[0]  # noqa: E731
    dx = (m(z0 + h) - m(z0 - h)) / (2 * h)
    dy = (m(z0 + 1j * h) - m(z0 - 1j * h)) / (2 * h)
    assert np.max(np.abs(dx + 1j * dy)) < 1e-6


def test_first_fourier_coefficient_and_free_case():
    p = two_site(LatticeWindow.symmetric(12), -0.7, 0.4)
    tab = fourier_coefficients(p, "+", nu_max=8)
    n = p.sites
    expect = np.array([p.q[(n > k)].sum() for k in n])
    np.testing.assert_allclose(tab.B[:, 0], expect, atol=1e-15)
    assert np.all(fourier_coefficients(zero_potential(W), "+", nu_max=8).B == 0)
    assert np.all(jost_m_derivative(zero_potential(W), "+", 0.7) == 0)


def test_bound_constants_scale_with_potential():
    grid = np.linspace(-np.pi, np.pi, 65)[1:-1]
    z = verify_jost_bounds(zero_potential(W), "+", grid)
    assert z["C_bound1"] == 0 and z["C_bound2"] == 0
    c1 = verify_jost_bounds(single_site(W), "+", grid)
    c2 = verify_jost_bounds(single_site(W, -2.0), "+", grid)
    assert np.isfinite(c1["C_bound2"]) and c2["C_bound2"] >= c1["C_bound2"]
    assert c2["C_bound1"] >= c1["C_bound1"]
