"""Brute-force reference computations that share no code path with the package."""

from __future__ import annotations

import numpy as np
from scipy.linalg import eigh_tridiagonal, solve_banded
from scipy.special import jv


def tridiagonal(q: np.ndarray):
    """Diagonal and off-diagonal of -Delta + q with Dirichlet truncation."""
    return 2.0 + np.asarray(q, float), -np.ones(len(q) - 1)


def dense_hamiltonian(q: np.ndarray) -> np.ndarray:
    d, e = tridiagonal(q)
    return np.diag(d) + np.diag(e, 1) + np.diag(e, -1)


def raw_jost(q: np.ndarray, sites: np.ndarray, theta: float, sign: str) -> np.ndarray:
    """f_pm by the unmodified three-term recursion u(n-1) = (2 + q - z) u(n) - u(n+1)."""
    z = 2.0 - 2.0 * np.cos(theta)
    N = len(q)
    f = np.zeros(N, dtype=complex)
    if sign == "+":
        ph = lambda n: np.exp(-1j * n * theta)  # noqa: E731
        f[-1], f[-2] = ph(sites[-1]), ph(sites[-2])
        for i in range(N - 2, 0, -1):
            f[i - 1] = (2.0 + q[i] - z) * f[i] - f[i + 1]
    else:
        ph = lambda n: np.exp(1j * n * theta)  # noqa: E731
        f[0], f[1] = ph(sites[0]), ph(sites[1])
        for i in range(1, N - 1):
            f[i + 1] = (2.0 + q[i] - z) * f[i] - f[i - 1]
    return f


def plane_wave_coefficients(f: np.ndarray, sites: np.ndarray, theta: float, i: int) -> tuple[complex, complex]:
    """(A, B) with f(n) = A e^{-in theta} + B e^{in theta} at sites i, i+1 (where q vanishes)."""
    n0, n1 = sites[i], sites[i + 1]
    M = np.array([[np.exp(-1j * n0 * theta), np.exp(1j * n0 * theta)],
                  [np.exp(-1j * n1 * theta), np.exp(1j * n1 * theta)]])
    A, B = np.linalg.solve(M, f[i:i + 2])
    return complex(A), complex(B)


def single_site_scattering(v: float, theta):
    """T and R for q = v delta_0 in this package's theta orientation."""
    s = 2j * np.sin(theta)
    return s / (s + v), -v / (s + v)


def banded_resolvent_columns(q: np.ndarray, z: complex, cols: np.ndarray) -> np.ndarray:
    """(H - z)^{-1} e_c for each column index c, by a banded solve on the truncated window."""
    d, e = tridiagonal(q)
    N = len(q)
    ab = np.zeros((3, N), dtype=complex)
    ab[0, 1:] = e
    ab[1] = d - z
    ab[2, :-1] = e
    rhs = np.zeros((N, len(cols)), dtype=complex)
    rhs[cols, np.arange(len(cols))] = 1.0
    return solve_banded((1, 1), ab, rhs)


def eigen_data(q: np.ndarray, guard: float = 1e-9):
    """All eigenpairs of the truncated H, split into bound (outside [0, 4]) and continuum."""
    d, e = tridiagonal(q)
    lam, V = eigh_tridiagonal(d, e)
    bound = (lam < -guard) | (lam > 4 + guard)
    return lam, V, bound


def eigen_propagator(q: np.ndarray, t: float, sign: int = -1, block: slice | None = None) -> np.ndarray:
    """exp(sign i t H) P_c on the truncated window, from the full eigendecomposition."""
    lam, V, bound = eigen_data(q)
    Vc, lc = V[:, ~bound], lam[~bound]
    if block is not None:
        Vc = Vc[block]
    return (Vc * np.exp(sign * 1j * t * lc)) @ Vc.T


def free_kernel(t: float, k) -> np.ndarray:
    """exp(-itH0)(k) = e^{-2it} i^{|k|} J_{|k|}(2t) summed from the Bessel series of the symbol."""
    k = np.abs(np.asarray(k))
    return np.exp(-2j * t) * (1j ** (k % 4)) * jv(k, 2 * t)


def free_sup(t: float) -> float:
    kmax = int(2 * t + 60 + 10 * t ** (1 / 3))
    return float(np.max(np.abs(jv(np.arange(kmax), 2 * t))))


def strang_reference(q: np.ndarray, u0: np.ndarray, t: float, dt: float, power: int = 7) -> np.ndarray:
    """Plain Strang splitting with the free flow applied through a dense ring exponential."""
    from scipy.linalg import expm

    N = len(u0)
    L = 2.0 * np.eye(N) - np.eye(N, k=1) - np.eye(N, k=-1)
    L[0, -1] = L[-1, 0] = -1.0
    free = expm(-1j * dt * L)
    u = np.array(u0, dtype=complex)
    steps = int(round(t / dt))
    for _ in range(steps):
        u = np.exp(0.5j * dt * (np.abs(u) ** (power - 1) - q)) * u
        u = free @ u
        u = np.exp(0.5j * dt * (np.abs(u) ** (power - 1) - q)) * u
    return u
