"""Standing waves H phi - phi^7 = -omega phi bifurcating from the ground state of H.

With ``phi = a phi0 + a^7 g``, ``<g, phi0> = 0`` and ``s = a^6`` the
equation splits into

    s <(phi0 + s g)^7, phi0> = omega - E0,
    g = R_H(-E0) P_c [ (E0 - omega) g + (phi0 + s g)^7 ],

solved alternately: damped fixed point in ``g``, scalar Newton in ``s``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve, solve_banded

from .lattice import Potential, apply_hamiltonian, hamiltonian_bands
from .spectral import SpectralDecomposition, discrete_spectrum

POWER = 7


class BifurcationError(RuntimeError):
    pass


@dataclass(frozen=True)
class BranchEntry:
    omega: float
    a: float
    g: np.ndarray
    phi: np.ndarray
    residual: float
    converged: bool
    iterations: int
    newton_gap: float | None = None

    @property
    def s(self) -> float:
        return self.a ** 6


@dataclass
class StandingWaveBranch:
    pot: Potential
    E0: float
    phi0: np.ndarray
    power: int = POWER
    entries: list = field(default_factory=list)
    _solver: "_ReducedResolvent" = field(default=None, repr=False)

    def omegas(self) -> np.ndarray:
        return np.array([e.omega for e in self.entries])

    def entry(self, omega: float) -> BranchEntry:
        for e in self.entries:
            if np.isclose(e.omega, omega, rtol=0, atol=1e-14 * max(1.0, abs(omega))):
                return e
        raise KeyError(f"omega={omega} not on the branch grid")

    def phi8_norm8(self) -> float:
        return float(np.sum(self.phi0 ** 8))

    def solve(self, omega: float, **kw) -> BranchEntry:
        """Solve at one more omega without storing it."""
        return _solve_entry(self, omega, **kw)


class _ReducedResolvent:
    """x = R_H(-E0) P_c y, computed as (H + E0 + P_d)^{-1} P_c y."""

    def __init__(self, pot: Potential, sd: SpectralDecomposition, E0: float):
        d, e = hamiltonian_bands(pot)
        A = np.diag(d + E0) + np.diag(e, 1) + np.diag(e, -1)
        V = sd.eigenvectors
        A += V @ V.T
        self.V = V
        self.lu = lu_factor(A)

    def project(self, y: np.ndarray) -> np.ndarray:
        return y - self.V @ (self.V.T @ y)

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return self.project(lu_solve(self.lu, self.project(y)))


def nonlinear_residual(pot: Potential, phi: np.ndarray, omega: float, power: int = POWER) -> float:
    """|| H phi - |phi|^{p-1} phi + omega phi ||_2."""
    return float(np.linalg.norm(apply_hamiltonian(pot, phi) - np.abs(phi) ** (power - 1) * phi + omega * phi))


def _solve_entry(branch: StandingWaveBranch, omega: float, tol: float = 1e-13, max_iter: int = 500,
                 damping: float = 0.5, g_seed: np.ndarray | None = None) -> BranchEntry:
    E0, phi0, p = branch.E0, branch.phi0, branch.power
    R = branch._solver
    if omega <= E0:
        raise ValueError(f"omega={omega} must exceed E0={E0}")
    delta = omega - E0
    g = R(phi0 ** p) if g_seed is None else g_seed.copy()
    s = delta / branch.phi8_norm8()

    def solve_s(s, g):
        for _ in range(60):
            v = phi0 + s * g
            F = s * np.dot(v ** p, phi0) - delta
            dF = np.dot(v ** p, phi0) + s * p * np.dot(v ** (p - 1) * g, phi0)
            step = F / dF
            s -= step
            if abs(step) <= 1e-15 * abs(s):
                break
        return s

    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        s = solve_s(s, g)
        g_new = R((E0 - omega) * g + (phi0 + s * g) ** p)
        step = float(np.max(np.abs(g_new - g)))
        g = (1 - damping) * g + damping * g_new if damping < 1 else g_new
        if step < tol * max(1.0, float(np.max(np.abs(g)))):
            converged = True
            break
    s = solve_s(s, g)
    if s <= 0:
        raise BifurcationError(f"no positive root a^6 at omega={omega}")
    a = s ** (1.0 / 6.0)
    phi = a * phi0 + a ** 7 * g
    return BranchEntry(float(omega), float(a), g, phi, nonlinear_residual(branch.pot, phi, omega, p), converged, it)


def ground_state(pot: Potential) -> tuple[float, np.ndarray, SpectralDecomposition]:
    sd = discrete_spectrum(pot)
    if sd.count != 1 or sd.eigenvalues[0] >= 0:
        raise BifurcationError(
            f"H must have exactly one eigenvalue and it must be negative; found {sd.eigenvalues.tolist()}")
    E0, phi0 = sd.ground_state()
    if np.any(phi0 < -1e-14):
        raise BifurcationError("ground state is not positive")
    return E0, np.abs(phi0), sd


def new_branch(pot: Potential, power: int = POWER) -> StandingWaveBranch:
    E0, phi0, sd = ground_state(pot)
    br = StandingWaveBranch(pot, E0, phi0, power)
    br._solver = _ReducedResolvent(pot, sd, E0)
    return br


def solve_branch(pot: Potential, omega_list, power: int = POWER, polish: bool = True, **kw) -> StandingWaveBranch:
    """Bifurcation solutions at each omega; ``polish`` runs the full Newton refinement."""
    br = new_branch(pot, power)
    g_prev = None
    for omega in sorted(float(o) for o in omega_list):
        e = _solve_entry(br, omega, g_seed=g_prev, **kw)
        if polish:
            phi_n = newton_standing_wave(pot, omega, e.phi, power)
            gap = float(np.max(np.abs(phi_n - e.phi)))
            e = BranchEntry(e.omega, e.a, e.g, e.phi, e.residual, e.converged, e.iterations, gap)
        br.entries.append(e)
        if e.converged:
            g_prev = e.g
    return br


def default_omegas(E0: float, count: int = 10, eta: float | None = None, lo: float = 1e-3) -> np.ndarray:
    """Log-spaced omega - E0 in [lo eta, eta], eta = 0.2 E0 by default."""
    eta = 0.2 * E0 if eta is None else eta
    return E0 + eta * np.geomspace(lo, 1.0, count)


# ------------------------------------------------------------------ oracles

def linearized_bands(pot: Potential, phi: np.ndarray, omega: float, power: int = POWER):
    d, e = hamiltonian_bands(pot)
    ab = np.zeros((3, d.size))
    ab[0, 1:] = e
    ab[1] = d + omega - power * np.abs(phi) ** (power - 1)
    ab[2, :-1] = e
    return ab


def newton_standing_wave(pot: Potential, omega: float, phi_seed: np.ndarray, power: int = POWER,
                         tol: float = 1e-15, max_iter: int = 50) -> np.ndarray:
    """Full Newton on H phi - phi^p + omega phi = 0 with the tridiagonal Jacobian."""
    phi = np.asarray(phi_seed, dtype=float).copy()
    for _ in range(max_iter):
        F = apply_hamiltonian(pot, phi) - np.abs(phi) ** (power - 1) * phi + omega * phi
        step = solve_banded((1, 1), linearized_bands(pot, phi, omega, power), F)
        phi -= step
        if np.max(np.abs(step)) < tol * max(1.0, np.max(np.abs(phi))):
            break
    return phi


def d_omega_exact(pot: Potential, phi: np.ndarray, omega: float, power: int = POWER) -> np.ndarray:
    """d phi / d omega from L dphi = -phi with L = H + omega - p phi^{p-1}."""
    return solve_banded((1, 1), linearized_bands(pot, phi, omega, power), -phi)


def d2_omega_exact(pot: Potential, phi: np.ndarray, omega: float, power: int = POWER) -> tuple[np.ndarray, np.ndarray]:
    """(d phi, d^2 phi): L d2 = -2 d + p (p-1) phi^{p-2} d^2."""
    ab = linearized_bands(pot, phi, omega, power)
    d1 = solve_banded((1, 1), ab, -phi)
    rhs = -2.0 * d1 + power * (power - 1) * phi ** (power - 2) * d1 ** 2
    return d1, solve_banded((1, 1), ab, rhs)


# ------------------------------------------------------------------ diagnostics

def d_omega_phi(branch: StandingWaveBranch, omega: float, rel_h: float = 1e-4, h: float | None = None) -> np.ndarray:
    """Five-point centred difference of omega -> phi_omega with h = rel_h (omega - E0)."""
    delta = omega - branch.E0
    if delta <= 0:
        raise ValueError("omega must exceed E0")
    h = rel_h * delta if h is None else h
    if omega - 2 * h <= branch.E0:
        raise ValueError("stencil reaches below E0")
    vals = {}
    for k in (-2, -1, 1, 2):
        e = _solve_entry(branch, omega + k * h)
        if not e.converged:
            raise BifurcationError(f"re-solve failed at omega={omega + k * h}")
        vals[k] = newton_standing_wave(branch.pot, omega + k * h, e.phi, branch.power)
    return (vals[-2] - 8 * vals[-1] + 8 * vals[1] - vals[2]) / (12 * h)


def decay_rate_fit(phi: np.ndarray, sites: np.ndarray, floor: float = 1e-250) -> dict:
    """Fit log|phi(n)| = c - a |n| over the region where |phi| exceeds ``floor`` (and rounding)."""
    amp = np.abs(phi)
    top = amp.max()
    keep = (amp > max(floor, 1e-13 * top)) & (sites != 0)
    x = np.abs(sites[keep]).astype(float)
    y = np.log(amp[keep])
    A = np.vstack([np.ones_like(x), -x]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return {"a_dec": float(coef[1]), "log_C": float(coef[0]), "r2": 1.0 - ss_res / ss_tot if ss_tot else 1.0,
            "n_points": int(keep.sum())}


def verify_expansion(branch: StandingWaveBranch) -> dict:
    """rho(omega) = || phi (omega-E0)^{-1/6} ||phi0||_8^{4/3} - phi0 ||_2 and its power-law fit."""
    if len(branch.entries) < 3:
        raise ValueError("need at least three branch entries")
    delta = branch.omegas() - branch.E0
    if delta.max() / delta.min() < 10:
        raise ValueError("omega - E0 must span at least a decade")
    n8 = branch.phi8_norm8() ** (1.0 / 8.0)
    rho = np.array([np.linalg.norm(e.phi * d ** (-1 / 6) * n8 ** (4 / 3) - branch.phi0)
                    for e, d in zip(branch.entries, delta)])
    power, log_c = np.polyfit(np.log(delta), np.log(rho), 1)
    order = np.argsort(delta)
    return {
        "delta": delta.tolist(),
        "rho": rho.tolist(),
        "rho_over_delta": (rho / delta).tolist(),
        "fitted_power": float(power),
        "coefficient": float(np.exp(log_c)),
        "monotone": bool(np.all(np.diff(rho[order]) > 0)),
        "positive_overlap": bool(all(np.dot(e.phi, branch.phi0) > 0 for e in branch.entries)),
        "a6_over_delta": [e.s / d for e, d in zip(branch.entries, delta)],
        "phi0_l8_pow_minus8": 1.0 / branch.phi8_norm8(),
    }
