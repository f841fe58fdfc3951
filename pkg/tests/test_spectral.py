import numpy as np
import pytest

from dnls_lattice.lattice import LatticeWindow, exponential, hamiltonian_matrix, single_site, two_site, zero_potential
from dnls_lattice.spectral import (boundary_resolvent, boundary_theta, discrete_spectrum, limiting_absorption_constant,
                                   projector_diagnostics, quadrature_size, reduced_resolvent_solve, resolvent_kernel,
                                   spectral_projectors, stabilized_sin, tridiagonal_solve)
from oracles import banded_resolvent_columns, eigen_data

BIG = LatticeWindow.symmetric(256)


def test_kernel_matches_banded_solve():
    p = two_site(BIG, -0.9, 0.4)
    sites = np.arange(-12, 13)
    cols = sites - BIG.n_min
    for z in (-1.0, 5.5, 2 + 0.8j, 1 - 1.5j):
        K = resolvent_kernel(p, z, sites=sites).K
        ref = banded_resolvent_columns(p.q, z, cols)[cols]
        assert np.max(np.abs(K - ref)) < 1e-12


def test_kernel_residual_full_window():
    p = single_site(LatticeWindow.symmetric(32))
    rk = resolvent_kernel(p, 1.0 + 0.5j)
    assert rk.residual(p) < 1e-12


def test_on_band_and_eigenvalue_rejected():
    p = single_site(BIG)
    with pytest.raises(ValueError):
        resolvent_kernel(p, 2.0)
    E = discrete_spectrum(p).eigenvalues[0]
    with pytest.raises(ValueError):
        resolvent_kernel(p, E)


def test_boundary_value_is_limit_from_above():
    p = single_site(LatticeWindow.symmetric(2048))
    sites = np.arange(-5, 6)
    lam = 1.3
    Kb = boundary_resolvent(p, lam, "+", sites=sites).K
    Ke = resolvent_kernel(p, lam + 1e-5j, sites=sites).K
    assert np.max(np.abs(Kb - Ke)) < 1e-4
    Km = boundary_resolvent(p, lam, "-", sites=sites).K
    np.testing.assert_allclose(Km, np.conj(Kb), atol=1e-14)
    assert boundary_theta(lam, "+") < 0


def test_band_edge_on_resonant_operator_rejected():
    with pytest.raises(ValueError):
        boundary_resolvent(zero_potential(BIG), 0.0, "+")


def test_discrete_spectrum_single_site():
    sd = discrete_spectrum(single_site(BIG))
    assert sd.count == 1
    # q = -delta_0: E = 2 - sqrt(5)
    assert sd.eigenvalues[0] == pytest.approx(2 - np.sqrt(5), abs=1e-13)
    lam, V, bound = eigen_data(single_site(BIG).q)
    assert np.sum(bound) == 1
    assert np.max(sd.eigenvectors[:, 0]) > 0
    assert discrete_spectrum(zero_potential(BIG)).count == 0


def test_above_band_bound_state():
    sd = discrete_spectrum(single_site(BIG, 1.0))
    assert sd.eigenvalues[0] == pytest.approx(2 + np.sqrt(5), abs=1e-13)


def test_projector_algebra_and_contour():
    p = exponential(LatticeWindow.symmetric(64))
    sd = spectral_projectors(p, contour=True)
    d = projector_diagnostics(p, sd)
    assert d["idempotence"] < 1e-12 and d["commutator"] < 1e-12 and d["identity"] < 1e-12
    assert d["contour_deviation"] < 1e-9
    H = hamiltonian_matrix(p)
    u = np.random.default_rng(0).standard_normal(p.window.size)
    assert abs(sd.eigenvectors[:, 0] @ sd.project_continuous(u)) < 1e-13
    np.testing.assert_allclose(sd.project_discrete(u) + sd.project_continuous(u), u)
    assert np.allclose(H @ sd.eigenvectors[:, 0], sd.eigenvalues[0] * sd.eigenvectors[:, 0])


def test_reduced_resolvent():
    p = single_site(LatticeWindow.symmetric(64))
    sd = discrete_spectrum(p)
    rhs = np.random.default_rng(2).standard_normal(p.window.size)
    z = -0.5
    x = reduced_resolvent_solve(p, sd, z, rhs)
    H = hamiltonian_matrix(p)
    np.testing.assert_allclose((H - z * np.eye(len(x))) @ x, sd.project_continuous(rhs), atol=1e-12)
    np.testing.assert_allclose(tridiagonal_solve(p, 2 + 1j, rhs),
                               np.linalg.solve(H - (2 + 1j) * np.eye(len(x)), rhs), atol=1e-12)


def test_limiting_absorption_constant_finite_and_stable():
    p = single_site(LatticeWindow.symmetric(256))
    a = limiting_absorption_constant(p, 1.5, n_lambda=32, half_width=64)
    b = limiting_absorption_constant(p, 1.5, n_lambda=64, half_width=64)
    assert np.isfinite(a["C"]) and abs(a["C"] - b["C"]) < 0.05 * b["C"]
    with pytest.raises(ValueError):
        limiting_absorption_constant(p, 1.0)


def test_quadrature_helpers():
    assert quadrature_size() == 1024 and quadrature_size(100, 10) % 2 == 0
    th = np.array([1e-9, 0.5, -2.0, 3.0])
    np.testing.assert_allclose(stabilized_sin(th), np.sin(th), rtol=1e-12)
    # near pi the distance is measured from the floating-point edge itself
    x = 1e-9
    assert stabilized_sin(np.array([np.pi - x]))[0] == pytest.approx(x, rel=1e-6)


def test_free_resolvent_closed_form():
    w = LatticeWindow.symmetric(20)
    sites = np.arange(-6, 7)
    for z in (-1.0, 2 - 1j):
        rk = resolvent_kernel(zero_potential(w), z, sites=sites)
        th = rk.theta
        expect = -0.5j / np.sin(th) * np.exp(-1j * th * np.abs(sites[:, None] - sites[None, :]))
        np.testing.assert_allclose(rk.K, expect, atol=1e-14)
    lam = 2.0
    K = boundary_resolvent(zero_potential(w), lam, "+", sites=sites).K
    th = boundary_theta(lam, "+")
    np.testing.assert_allclose(K, -0.5j / np.sin(th) * np.exp(-1j * th * np.abs(sites[:, None] - sites[None, :])),
                               atol=1e-14)


def test_boundary_value_is_the_limit_from_either_side():
    p = two_site(BIG, -0.9, 0.4)
    sites = np.arange(-8, 9)
    lam = 1.3
    for side, sgn in (("+", 1), ("-", -1)):
        K0 = boundary_resolvent(p, lam, side, sites=sites).K
        errs = [np.max(np.abs(resolvent_kernel(p, lam + sgn * 1j * eps, sites=sites).K - K0))
                for eps in (1e-2, 1e-3, 1e-4)]
        assert errs[0] > errs[1] > errs[2]
        assert errs[2] < 1e-3


def test_eigenvalue_approaches_edge_as_coupling_vanishes():
    w = LatticeWindow.symmetric(400)
    prev = -np.inf
    for c in (1.0, 0.5, 0.2):
        lam = discrete_spectrum(single_site(w, -c)).eigenvalues
        assert lam.size == 1 and prev < lam[0] < 0
        assert lam[0] == pytest.approx(2 - np.sqrt(4 + c * c), rel=1e-8)
        prev = lam[0]


def test_free_projectors_are_trivial():
    sd = spectral_projectors(zero_potential(LatticeWindow.symmetric(24)))
    assert sd.count == 0
    np.testing.assert_allclose(sd.P_c, np.eye(49), atol=1e-6)


def test_limiting_absorption_monotone_in_tau_and_grid():
    p = single_site(LatticeWindow.symmetric(64))
    c11 = limiting_absorption_constant(p, 1.1, n_lambda=64, half_width=32)["C"]
    c2 = limiting_absorption_constant(p, 2.0, n_lambda=64, half_width=32)["C"]
    assert c2 <= c11
    c2b = limiting_absorption_constant(p, 2.0, n_lambda=128, half_width=32)["C"]
    assert abs(c2b - c2) / c2 < 0.05


def test_free_limiting_absorption_grows_toward_edges():
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = limiting_absorption_constant(zero_potential(LatticeWindow.symmetric(64)), 2.0, n_lambda=64,
                                           half_width=32)
    norms = res["norms"][0]
    mid = norms[len(norms) // 2]
    assert norms[0] > mid and norms[-1] > mid
