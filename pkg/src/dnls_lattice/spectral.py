"""Resolvent kernels, discrete spectrum, spectral projectors and limiting absorption.

Boundary values: ``lambda + i0`` corresponds to ``theta = -arccos(1 - lambda/2)``
and ``lambda - i0`` to ``+arccos(1 - lambda/2)`` (the lower half strip is
approached from ``Im theta < 0``).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal, solve_banded

from .jost import modified_jost_grid, theta_from_z
from .lattice import LatticeWindow, Potential, hamiltonian_bands, japanese_bracket
from .scattering import classify_genericity, jost_wronskian_grid

EDGE_GUARD = 1e-6


@dataclass(frozen=True)
class ResolventKernel:
    z: complex
    theta: complex
    side: str | None
    window: LatticeWindow
    K: np.ndarray

    def residual(self, pot: Potential) -> float:
        """max |(H - z) K - I| over interior rows."""
        d, e = hamiltonian_bands(pot)
        K = self.K
        HK = d[:, None] * K
        HK[:-1] += e[:, None] * K[1:]
        HK[1:] += e[:, None] * K[:-1]
        R = HK - self.z * K - np.eye(K.shape[0])
        return float(np.max(np.abs(R[1:-1])))


def _jost_kernel(pot: Potential, theta: complex, sites: np.ndarray | None = None) -> np.ndarray:
    """-f_+(max) f_-(min) / W on the window, in overflow-free modified form."""
    th = np.array([theta], dtype=complex)
    mp = modified_jost_grid(pot, "+", th)[0]
    mm = modified_jost_grid(pot, "-", th)[0]
    W = jost_wronskian_grid(pot, th)[0]
    n = pot.sites
    if sites is not None:
        idx = sites - pot.window.n_min
        mp, mm, n = mp[idx], mm[idx], sites
    hi = n[:, None] >= n[None, :]
    # m_+ at the larger site, m_- at the smaller one
    Mp = np.where(hi, mp[:, None], mp[None, :])
    Mm = np.where(hi, mm[None, :], mm[:, None])
    dist = np.abs(n[:, None] - n[None, :])
    return -np.exp(-1j * theta * dist) * Mp * Mm / W


def resolvent_kernel(pot: Potential, z: complex, rel_threshold: float = 1e-10,
                     sites: np.ndarray | None = None) -> ResolventKernel:
    """Kernel of (H - z)^{-1} from the Jost solutions, z off [0, 4] and not an eigenvalue."""
    z = complex(z)
    if z.imag == 0.0 and 0.0 <= z.real <= 4.0:
        raise ValueError(f"z={z} lies on the continuous spectrum [0, 4]; use boundary_resolvent")
    theta = complex(theta_from_z(z))
    W = complex(jost_wronskian_grid(pot, [theta])[0])
    scale = max(1.0, abs(2.0 * np.sin(theta)))
    if abs(W) < rel_threshold * scale:
        raise ValueError(f"z={z} is (numerically) an eigenvalue of H: |W| = {abs(W):.3e}")
    return ResolventKernel(z, theta, None, pot.window, _jost_kernel(pot, theta, sites))


def boundary_theta(lam: float, side: str) -> float:
    if side not in ("+", "-"):
        raise ValueError("side must be '+' or '-'")
    th0 = float(np.arccos(1.0 - lam / 2.0))
    return -th0 if side == "+" else th0


def boundary_resolvent(pot: Potential, lam: float, side: str, generic: bool | None = None,
                       sites: np.ndarray | None = None) -> ResolventKernel:
    """R^pm(lambda) = lim R(lambda pm i eps) as a real-theta Jost kernel."""
    lam = float(lam)
    if not 0.0 <= lam <= 4.0:
        raise ValueError(f"lambda={lam} outside [0, 4]")
    if lam in (0.0, 4.0):
        if generic is None:
            generic = classify_genericity(pot).is_generic
        if not generic:
            raise ValueError("band-edge boundary values do not exist for a resonant H")
    theta = boundary_theta(lam, side)
    return ResolventKernel(complex(lam), complex(theta), side, pot.window, _jost_kernel(pot, theta, sites))


def weighted_hs_norm(K: np.ndarray, sites: np.ndarray, sigma: float) -> float:
    w = japanese_bracket(sites) ** (-sigma)
    return float(np.linalg.norm(w[:, None] * K * w[None, :]))


# --------------------------------------------------------------- spectrum

@dataclass(frozen=True)
class SpectralDecomposition:
    window: LatticeWindow
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns, real, l2-normalised
    multiplicity_ok: bool
    P_d: np.ndarray | None = None
    P_c: np.ndarray | None = None
    contour_deviation: float | None = None

    @property
    def count(self) -> int:
        return int(self.eigenvalues.size)

    def ground_state(self) -> tuple[float, np.ndarray]:
        """(E0, phi0) for the single eigenvalue -E0 < 0 demanded by the nonlinear modules."""
        neg = np.nonzero(self.eigenvalues < 0)[0]
        if self.count != 1 or neg.size != 1:
            raise ValueError(
                f"need exactly one eigenvalue, and it must be negative; found {self.eigenvalues.tolist()}")
        return float(-self.eigenvalues[neg[0]]), self.eigenvectors[:, neg[0]].copy()

    def project_discrete(self, u: np.ndarray) -> np.ndarray:
        V = self.eigenvectors
        return V @ (V.T @ u)

    def project_continuous(self, u: np.ndarray) -> np.ndarray:
        return u - self.project_discrete(u)


def discrete_spectrum(pot: Potential, edge_guard: float = EDGE_GUARD, degeneracy_tol: float = 1e-10) -> SpectralDecomposition:
    """Eigenpairs of the truncated H lying outside [-guard, 4 + guard]."""
    d, e = hamiltonian_bands(pot)
    lo = eigh_tridiagonal(d, e, select="v", select_range=(-np.inf, -edge_guard))
    hi = eigh_tridiagonal(d, e, select="v", select_range=(4.0 + edge_guard, np.inf))
    vals = np.concatenate([lo[0], hi[0]])
    vecs = np.concatenate([lo[1], hi[1]], axis=1) if vals.size else np.zeros((pot.window.size, 0))
    vecs = vecs.copy()
    for j in range(vecs.shape[1]):
        # sign convention: the largest entry is positive
        k = np.argmax(np.abs(vecs[:, j]))
        if vecs[k, j] < 0:
            vecs[:, j] *= -1
        vecs[:, j] /= np.linalg.norm(vecs[:, j])
    ok = True
    if vals.size > 1:
        gaps = np.diff(np.sort(vals))
        ok = bool(np.all(gaps > degeneracy_tol * max(1.0, np.max(np.abs(vals)))))
    if not ok:
        warnings.warn("degenerate eigenvalue found: window too small or input violates simplicity")
    return SpectralDecomposition(pot.window, vals, vecs, ok)


# ------------------------------------------------------------ theta quadrature

def quadrature_size(t: float = 0.0, span: int = 0, minimum: int = 1024) -> int:
    """Trapezoid points for the theta integral.

    ``16 t`` resolves the phase 2t(1 - cos theta); ``2 span + 2.2 t + 256``
    keeps the aliased frequency ``|n - nu| + 2t + M`` out of reach.
    """
    t = abs(float(t))
    M = max(minimum, int(np.ceil(16.0 * t)), int(np.ceil(2 * span + 2.2 * t + 256)))
    return int(2 * ((M + 1) // 2))


def theta_grid(M: int) -> np.ndarray:
    """Offset periodic grid on [-pi, pi) that never lands on 0 or pm pi."""
    return -np.pi + (np.arange(M) + 0.5) * (2.0 * np.pi / M)


def stabilized_sin(theta: np.ndarray) -> np.ndarray:
    """sin(theta) evaluated as 1 / (1/(2 tan(x/2)) + tan(x/2)/2), x measured from the nearest edge."""
    theta = np.asarray(theta, dtype=float)
    x = np.where(theta > np.pi / 2, np.pi - theta, np.where(theta < -np.pi / 2, -np.pi - theta, theta))
    tx = np.tan(x / 2.0)
    with np.errstate(divide="ignore"):
        return 1.0 / (1.0 / (2.0 * tx) + tx / 2.0)


@dataclass
class ThetaSampling:
    """Jost data on a trapezoid grid, shared by projector and propagator assemblies."""

    theta: np.ndarray
    weight_factor: np.ndarray  # sin(theta) / W(theta) / (pi i) * (2 pi / M)
    A: np.ndarray  # e^{-i n theta} m_+(n, theta), shape (N_sites, M)
    B: np.ndarray  # e^{+i n theta} m_-(n, theta), shape (M, N_sites)
    sites: np.ndarray


def sample_theta(pot: Potential, M: int, sites: np.ndarray | None = None,
                 stabilized: bool = True) -> ThetaSampling:
    th = theta_grid(M)
    mp = modified_jost_grid(pot, "+", th)
    mm = modified_jost_grid(pot, "-", th)
    W = jost_wronskian_grid(pot, th)
    s = stabilized_sin(th) if stabilized else np.sin(th)
    weight = s / W / (np.pi * 1j) * (2.0 * np.pi / M)
    if sites is None:
        sites = pot.sites
        idx = slice(None)
    else:
        sites = np.asarray(sites)
        idx = sites - pot.window.n_min
    A = (np.exp(-1j * np.outer(th, sites)) * mp[:, idx]).T
    B = np.exp(1j * np.outer(th, sites)) * mm[:, idx]
    return ThetaSampling(th, weight, np.ascontiguousarray(A), B, sites)


def assemble_kernel(samp: ThetaSampling, g_values: np.ndarray | None = None) -> np.ndarray:
    """(1/(pi i)) int g(2 - 2cos theta) f_+(max) f_-(min) sin theta / W d theta."""
    w = samp.weight_factor if g_values is None else samp.weight_factor * g_values
    full = samp.A @ (w[:, None] * samp.B)
    n = samp.sites
    lower = n[:, None] >= n[None, :]
    return np.where(lower, full, full.T)


def contour_projector(pot: Potential, M: int | None = None, sites: np.ndarray | None = None) -> np.ndarray:
    """P_c from the boundary-value integral over the continuous spectrum."""
    s = pot.sites if sites is None else np.asarray(sites)
    if M is None:
        M = quadrature_size(0.0, int(s[-1] - s[0]))
    return assemble_kernel(sample_theta(pot, M, s))


def spectral_projectors(pot: Potential, contour: bool = True, M: int | None = None,
                        tol: float = 1e-6) -> SpectralDecomposition:
    sd = discrete_spectrum(pot)
    V = sd.eigenvectors
    P_d = V @ V.T
    P_c = np.eye(pot.window.size) - P_d
    dev = None
    if contour:
        Pc_int = contour_projector(pot, M)
        dev = float(np.max(np.abs(Pc_int - P_c)))
        if dev > tol:
            warnings.warn(f"contour projector deviates from I - P_d by {dev:.2e}; theta grid under-resolved")
    return SpectralDecomposition(sd.window, sd.eigenvalues, sd.eigenvectors, sd.multiplicity_ok, P_d, P_c, dev)


def projector_diagnostics(pot: Potential, sd: SpectralDecomposition) -> dict:
    """Idempotence, commutation and resolution-of-identity residuals."""
    from .lattice import hamiltonian_matrix

    H = hamiltonian_matrix(pot)
    Pc, Pd = sd.P_c, sd.P_d
    interior = slice(1, -1)
    comm = (Pc @ H - H @ Pc)[interior, interior]
    return {
        "idempotence": float(np.max(np.abs(Pc @ Pc - Pc))),
        "commutator": float(np.max(np.abs(comm))),
        "identity": float(np.max(np.abs(Pc + Pd - np.eye(Pc.shape[0])))),
        "trace_P_d": float(np.trace(Pd)),
        "contour_deviation": sd.contour_deviation,
    }


# ---------------------------------------------------------- limiting absorption

def reduced_resolvent_solve(pot: Potential, sd: SpectralDecomposition, z: float, rhs: np.ndarray) -> np.ndarray:
    """Solve (H - z) x = P_c rhs on Ran P_c for real z at or near an eigenvalue.

    Shifting the discrete part away, (H - z + P_d) x = P_c rhs has the same
    solution on Ran P_c and forces P_d x = 0.
    """
    from scipy.linalg import lu_factor, lu_solve

    d, e = hamiltonian_bands(pot)
    A = np.diag(d - z) + np.diag(e, 1) + np.diag(e, -1)
    V = sd.eigenvectors
    A += V @ V.T
    lu = lu_factor(A)
    return lu_solve(lu, sd.project_continuous(rhs))


def limiting_absorption_constant(pot: Potential, tau: float, n_lambda: int = 64, half_width: int = 128,
                                 generic: bool | None = None) -> dict:
    """sup over lambda in (0, 4) and both sides of || <n>^-tau R^pm(lambda) P_c <m>^-tau ||_2.

    The lambda grid is uniform in theta (midpoints), so it never touches 0 or 4.
    """
    if tau <= 1:
        raise ValueError("tau must exceed 1")
    if generic is None:
        generic = classify_genericity(pot).is_generic
    if not generic:
        warnings.warn("resonant H: the constant is measured on an interior lambda grid only")
    sd = discrete_spectrum(pot)
    sites = np.arange(max(pot.window.n_min, -half_width), min(pot.window.n_max, half_width) + 1)
    idx = sites - pot.window.n_min
    V = sd.eigenvectors[idx]
    w = japanese_bracket(sites) ** (-tau)
    th0 = (np.arange(n_lambda) + 0.5) * np.pi / n_lambda
    lams = 2.0 - 2.0 * np.cos(th0)
    vals = np.empty((2, n_lambda))
    for j, lam in enumerate(lams):
        for k, side in enumerate("+-"):
            K = _jost_kernel(pot, boundary_theta(lam, side), sites)
            # R P_c = R - sum_j phi_j phi_j^T / (lambda_j - lambda)
            if sd.count:
                K = K - (V / (sd.eigenvalues - lam)) @ V.T
            vals[k, j] = np.linalg.norm(w[:, None] * K * w[None, :], 2)
    return {"tau": tau, "C": float(vals.max()), "lambda": lams, "norms": vals,
            "n_lambda": n_lambda, "half_width": half_width, "generic": bool(generic)}


def tridiagonal_solve(pot: Potential, z: complex, rhs: np.ndarray) -> np.ndarray:
    """(H - z) x = rhs on the Dirichlet window."""
    d, e = hamiltonian_bands(pot)
    N = d.size
    ab = np.zeros((3, N), dtype=complex)
    ab[0, 1:] = e
    ab[1] = d - z
    ab[2, :-1] = e
    return solve_banded((1, 1), ab, rhs)
