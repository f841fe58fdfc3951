"""Wronskians, transmission and reflection coefficients, and edge classification."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .jost import jost_m, jost_phase, modified_jost_grid
from .lattice import LatticeWindow, Potential

EDGE_THETAS = (0.0, np.pi, -np.pi)
DEFAULT_SITES = (-2, -1, 0, 1, 2)


def wronskian(u: np.ndarray, v: np.ndarray, n: int, window: LatticeWindow) -> complex:
    """[u, v](n) = u(n+1) v(n) - u(n) v(n+1)."""
    if not (window.n_min <= n and n + 1 <= window.n_max):
        raise IndexError(f"Wronskian site {n} needs n, n+1 inside [{window.n_min}, {window.n_max}]")
    i = n - window.n_min
    return complex(u[i + 1] * v[i] - u[i] * v[i + 1])


def jost_wronskian_grid(pot: Potential, thetas, n: int = 0) -> np.ndarray:
    """W(theta) = [f_+, f_-](n) for an array of theta, evaluated without forming f.

    In terms of the modified solutions
    W = e^{-i theta} m_+(n+1) m_-(n) - e^{i theta} m_+(n) m_-(n+1),
    which stays finite for complex theta where f_pm overflow.
    """
    th = np.atleast_1d(np.asarray(thetas, dtype=complex))
    i = pot.window.index(n)
    pot.window.index(n + 1)
    mp = modified_jost_grid(pot, "+", th)
    mm = modified_jost_grid(pot, "-", th)
    return np.exp(-1j * th) * mp[:, i + 1] * mm[:, i] - np.exp(1j * th) * mp[:, i] * mm[:, i + 1]


def jost_wronskian(pot: Potential, theta, n: int = 0) -> complex:
    return complex(jost_wronskian_grid(pot, [complex(theta)], n)[0])


@dataclass(frozen=True)
class ScatteringData:
    theta: float
    W: complex
    W1: complex
    T: complex
    R_plus: complex
    R_minus: complex
    defined: bool = True
    wronskian_spread: float = 0.0

    def residuals(self) -> dict:
        if not self.defined:
            return {"unitarity_plus": np.nan, "unitarity_minus": np.nan,
                    "cross": np.nan, "tw": np.nan}
        return {
            "unitarity_plus": abs(abs(self.T) ** 2 + abs(self.R_plus) ** 2 - 1.0),
            "unitarity_minus": abs(abs(self.T) ** 2 + abs(self.R_minus) ** 2 - 1.0),
            "cross": abs(self.T * np.conj(self.R_plus) + self.R_minus * np.conj(self.T)),
            "tw": abs(self.T * self.W + 2j * np.sin(self.theta)),
        }


def _wronskians_at(pot: Potential, theta: float, sites) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    fp = jost_m(pot, "+", theta).f
    fm = jost_m(pot, "-", theta).f
    W = np.array([wronskian(fp, fm, n, pot.window) for n in sites])
    W1 = np.array([wronskian(fp, np.conj(fm), n, pot.window) for n in sites])
    Wc = np.array([wronskian(fm, np.conj(fp), n, pot.window) for n in sites])
    return W, W1, Wc


def scattering_data(pot: Potential, theta: float, n: int = 0, sites=DEFAULT_SITES,
                    rtol: float = 1e-9) -> ScatteringData:
    """T, R_pm and the Wronskians W = [f_+, f_-], W1 = [f_+, conj f_-] at real theta."""
    theta = float(theta)
    if not -np.pi <= theta <= np.pi:
        raise ValueError(f"theta={theta} outside [-pi, pi]")
    sites = tuple(sites) if n in sites else tuple(sites) + (n,)
    W_all, W1_all, Wc_all = _wronskians_at(pot, theta, sites)
    k = sites.index(n)
    W, W1, Wc = W_all[k], W1_all[k], Wc_all[k]
    scale = max(abs(W), abs(W1), 1.0)
    spread = float(max(np.ptp(np.abs(W_all - W)), np.max(np.abs(W1_all - W1))) / scale)
    if spread > rtol:
        raise FloatingPointError(f"Wronskian not constant across sites {sites}: spread {spread:.3e}")
    s = np.sin(theta)
    if abs(s) < 1e-14 or theta in EDGE_THETAS:
        return ScatteringData(theta, W, W1, np.nan, np.nan, np.nan, defined=False, wronskian_spread=spread)
    T = -2j * s / W
    # the opposite convention, 2i sin / [f_-, f_+], must coincide
    T_alt = 2j * s / (-W)
    assert abs(T - T_alt) <= 1e-12 * max(1.0, abs(T))
    # R_+ = -[f_-, conj f_+] / [f_-, f_+] and [f_-, f_+] = -W
    R_plus = Wc / W
    R_minus = -W1 / W
    return ScatteringData(theta, W, W1, complex(T), complex(R_plus), complex(R_minus),
                          defined=True, wronskian_spread=spread)


def scattering_grid(pot: Potential, thetas) -> list[ScatteringData]:
    return [scattering_data(pot, th) for th in np.asarray(thetas, dtype=float)]


def scattering_grid_fast(pot: Potential, thetas, n: int = 0) -> dict:
    """Vectorised T, R_pm and identity residuals on a real theta grid (no per-site checks)."""
    th = np.asarray(thetas, dtype=float)
    i = pot.window.index(n)
    mp = modified_jost_grid(pot, "+", th)
    mm = modified_jost_grid(pot, "-", th)
    fp = jost_phase(pot.window, "+", th) * mp
    fm = jost_phase(pot.window, "-", th) * mm

    def wr(u, v):
        return u[:, i + 1] * v[:, i] - u[:, i] * v[:, i + 1]

    W = wr(fp, fm)
    W1 = wr(fp, np.conj(fm))
    Wc = wr(fm, np.conj(fp))
    s = np.sin(th)
    with np.errstate(divide="ignore", invalid="ignore"):
        T = -2j * s / W
        Rp = Wc / W
        Rm = -W1 / W
    return {"theta": th, "W": W, "W1": W1, "T": T, "R_plus": Rp, "R_minus": Rm,
            "unitarity_plus": np.abs(np.abs(T) ** 2 + np.abs(Rp) ** 2 - 1.0),
            "unitarity_minus": np.abs(np.abs(T) ** 2 + np.abs(Rm) ** 2 - 1.0),
            "cross": np.abs(T * np.conj(Rp) + Rm * np.conj(T))}


@dataclass(frozen=True)
class GenericityReport:
    W_at_0: complex
    W_at_pi: complex
    W_at_minus_pi: complex
    is_generic: bool
    resonant_edges: tuple
    threshold: float
    scale: float
    min_ratio_W_over_2sin: float = field(default=np.inf)

    def to_dict(self) -> dict:
        return {
            "W_at_0": [self.W_at_0.real, self.W_at_0.imag],
            "W_at_pi": [self.W_at_pi.real, self.W_at_pi.imag],
            "W_at_minus_pi": [self.W_at_minus_pi.real, self.W_at_minus_pi.imag],
            "is_generic": bool(self.is_generic),
            "resonant_edges": list(self.resonant_edges),
            "threshold": self.threshold,
            "scale": self.scale,
            "min_ratio_W_over_2sin": self.min_ratio_W_over_2sin,
        }


def classify_genericity(pot: Potential, grid_size: int = 512, rel_threshold: float = 1e-8) -> GenericityReport:
    """Evaluate W at the band edges and decide whether H is generic."""
    grid = np.linspace(-np.pi, np.pi, grid_size + 1)
    W_grid = jost_wronskian_grid(pot, grid)
    scale = float(np.max(np.abs(W_grid)))
    thr = rel_threshold * max(scale, np.finfo(float).tiny)
    W0, Wpi, Wmpi = (jost_wronskian(pot, th) for th in EDGE_THETAS)
    resonant = []
    if abs(W0) <= thr:
        resonant.append(0)
    if abs(Wpi) <= thr or abs(Wmpi) <= thr:
        resonant.append(4)
    s2 = 2.0 * np.abs(np.sin(grid))
    keep = s2 > 1e-12
    ratio = float(np.min(np.abs(W_grid[keep]) / s2[keep])) if keep.any() else np.inf
    return GenericityReport(W0, Wpi, Wmpi, not resonant, tuple(resonant), thr, scale, ratio)
