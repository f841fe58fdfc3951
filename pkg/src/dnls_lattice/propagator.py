"""The continuous-spectrum propagator, the free Bessel kernel, decay scans and norm suites.

The canonical evolution is ``exp(-i t H)`` (sign ``-1``).  ``sign=+1`` gives
``exp(+i t H)``, the operator appearing in the dispersive estimate; both share
the same modulus.

Free kernel: with ``H0 = -Delta``,

    exp(s i t H0)(n, n + k) = (1/2pi) int exp(s i t (2 - 2cos th) + i k th) d th
                            = exp(2 s i t) (-s i)^{|k|} J_{|k|}(2t).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import jv

from .lattice import Potential, japanese_bracket
from .spectral import SpectralDecomposition, assemble_kernel, discrete_spectrum, quadrature_size, sample_theta


def _check_sign(sign: int) -> int:
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    return sign


def free_propagator(t: float, k, sign: int = -1):
    """Kernel entry exp(sign i t (-Delta))(n, n + k); ``k`` may be an array."""
    _check_sign(sign)
    k = np.abs(np.asarray(k, dtype=int))
    phase = (-sign * 1j) ** (k % 4)
    out = np.exp(2j * sign * t) * phase * jv(k, 2.0 * t)
    return complex(out) if out.ndim == 0 else out


def free_kernel_matrix(t: float, sites: np.ndarray, sign: int = -1) -> np.ndarray:
    sites = np.asarray(sites)
    return free_propagator(t, sites[:, None] - sites[None, :], sign)


def free_propagator_support(t: float, tol: float = 1e-17) -> int:
    """Offset beyond which |J_k(2t)| < tol."""
    k = int(2 * abs(t) + 20)
    while abs(jv(k, 2 * abs(t))) > tol:
        k += 10
    return k


@dataclass(frozen=True)
class PropagatorKernel:
    t: float
    sign: int
    sites: np.ndarray
    K: np.ndarray
    M: int
    convergence: float | None = None

    def apply(self, u: np.ndarray) -> np.ndarray:
        return self.K @ u


def continuous_propagator(pot: Potential, t: float, sign: int = -1, sites: np.ndarray | None = None,
                          M: int | None = None, check_convergence: bool = False,
                          tol: float = 1e-9) -> PropagatorKernel:
    """exp(sign i t H) P_c as a theta integral over the Jost kernel, trapezoid rule."""
    _check_sign(sign)
    s = pot.sites if sites is None else np.asarray(sites)
    if M is None:
        M = quadrature_size(t, int(s[-1] - s[0]))
    samp = sample_theta(pot, M, s)
    lam = 2.0 - 2.0 * np.cos(samp.theta)
    K = assemble_kernel(samp, np.exp(sign * 1j * t * lam))
    conv = None
    if check_convergence:
        samp2 = sample_theta(pot, 2 * M, s)
        lam2 = 2.0 - 2.0 * np.cos(samp2.theta)
        K2 = assemble_kernel(samp2, np.exp(sign * 1j * t * lam2))
        conv = float(np.max(np.abs(K2 - K)))
        if conv > tol:
            raise ArithmeticError(f"theta quadrature not converged at t={t}: doubling M changes kernel by {conv:.2e}")
    return PropagatorKernel(float(t), sign, s, K, M, conv)


class EigenPropagator:
    """exp(sign i t H) restricted to Ran P_c via the dense eigendecomposition of the truncated H.

    Exact on the Dirichlet window; used for norm suites where many time
    samples are needed.
    """

    def __init__(self, pot: Potential, sd: SpectralDecomposition | None = None):
        from .lattice import hamiltonian_matrix

        self.pot = pot
        self.sd = sd if sd is not None else discrete_spectrum(pot)
        lam, V = np.linalg.eigh(hamiltonian_matrix(pot))
        keep = np.ones(lam.size, dtype=bool)
        for ev in self.sd.eigenvalues:
            keep[np.argmin(np.abs(lam - ev))] = False
        self.lam = lam[keep]
        self.V = V[:, keep]

    def coefficients(self, u: np.ndarray) -> np.ndarray:
        return self.V.T @ u

    def evolve(self, u: np.ndarray, times, sign: int = -1) -> np.ndarray:
        """Rows are exp(sign i t H) P_c u at each t."""
        c = self.coefficients(u)
        ph = np.exp(sign * 1j * np.outer(np.atleast_1d(times), self.lam))
        return (ph * c[None, :]) @ self.V.T

    def kernel(self, t: float, sign: int = -1) -> np.ndarray:
        return (self.V * np.exp(sign * 1j * t * self.lam)) @ self.V.T

    def duhamel(self, g: np.ndarray, dt: float, sign: int = -1) -> np.ndarray:
        """D(t_k) = int_0^{t_k} exp(sign i (t-s) H) P_c g(s) ds for samples g[k] at t_k = k dt.

        Exact for g linear between samples in each eigen-coordinate.
        """
        gh = g @ self.V  # (T, modes)
        a = sign * 1j * self.lam
        z = a * dt
        e = np.exp(z)
        # weights of g(t_{k-1}) and g(t_k) in int_0^dt e^{a(dt-s)} g(s) ds
        small = np.abs(z) < 1e-2
        zs = np.where(small, 1.0, z)
        w_old = np.where(small, dt * (0.5 + z / 3 + z * z / 8 + z ** 3 / 30),
                         dt * (e * (zs - 1) + 1) / (zs * zs))
        w_new = np.where(small, dt * (0.5 + z / 6 + z * z / 24 + z ** 3 / 120),
                         dt * (e - 1 - zs) / (zs * zs))
        c = np.zeros(self.lam.size, dtype=complex)
        out = np.empty((g.shape[0], self.V.shape[0]), dtype=complex)
        out[0] = 0.0
        for k in range(1, g.shape[0]):
            c = e * c + w_old * gh[k - 1] + w_new * gh[k]
            out[k] = self.V @ c
        return out


@dataclass(frozen=True)
class DecayScan:
    times: np.ndarray
    sup_kernel: np.ndarray
    weighted: np.ndarray
    C_measured: float
    slope: float | None
    slope_range: tuple | None
    grid_sizes: np.ndarray = field(default=None)

    def to_dict(self) -> dict:
        return {"C_measured": self.C_measured, "slope": self.slope,
                "slope_range": list(self.slope_range) if self.slope_range else None,
                "t_min": float(self.times[0]), "t_max": float(self.times[-1]), "n_times": int(self.times.size)}


def fit_decay_slope(times: np.ndarray, values: np.ndarray, t_lo: float = 10.0, t_hi: float | None = None) -> float:
    """Least-squares slope of log(values) against log(t) on [t_lo, t_hi]."""
    sel = times >= t_lo
    if t_hi is not None:
        sel &= times <= t_hi
    if np.count_nonzero(sel) < 2:
        raise ValueError("fewer than two times in the fit range")
    return float(np.polyfit(np.log(times[sel]), np.log(values[sel]), 1)[0])


def free_sup(t: float) -> float:
    """sup_k |J_k(2t)|, the free kernel's l1 -> l_inf norm."""
    kmax = free_propagator_support(t, 1e-20)
    return float(np.max(np.abs(jv(np.arange(kmax + 1), 2.0 * t))))


def decay_scan(pot: Potential, t_grid, sign: int = 1, fit_range: tuple | None = (10.0, None),
               sites: np.ndarray | None = None) -> DecayScan:
    """sup_{n,m} |exp(sign i t H) P_c (n, m)| along t_grid and its <t>^{1/3} weighting."""
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid < 0) or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be nonnegative and strictly increasing")
    free = pot.support is None
    sups = np.empty(t_grid.size)
    Ms = np.zeros(t_grid.size, dtype=int)
    for j, t in enumerate(t_grid):
        if free:
            sups[j] = free_sup(t)
        else:
            pk = continuous_propagator(pot, t, sign, sites=sites)
            sups[j] = float(np.max(np.abs(pk.K)))
            Ms[j] = pk.M
    weighted = sups * japanese_bracket(t_grid) ** (1.0 / 3.0)
    slope = None
    if fit_range is not None and np.count_nonzero(t_grid >= fit_range[0]) >= 2:
        slope = fit_decay_slope(t_grid, sups, *fit_range)
    return DecayScan(t_grid, sups, weighted, float(np.max(weighted)), slope, fit_range, Ms)


# ---------------------------------------------------------------- norms

def admissible_p(r: float) -> float:
    """p with 2/r + 1/p = 1/2, for r in [4, inf]."""
    if not (4.0 <= r <= np.inf):
        raise ValueError(f"r={r} outside [4, inf]")
    inv = 0.5 - 2.0 / r
    return np.inf if inv == 0 else 1.0 / inv


def check_admissible(r: float, p: float) -> None:
    if not (4.0 <= r <= np.inf) or not (2.0 <= p <= np.inf):
        raise ValueError(f"(r, p) = ({r}, {p}) outside [4, inf] x [2, inf]")
    lhs = (0.0 if np.isinf(r) else 2.0 / r) + (0.0 if np.isinf(p) else 1.0 / p)
    if abs(lhs - 0.5) > 1e-12:
        raise ValueError(f"(r, p) = ({r}, {p}) is not admissible: 2/r + 1/p = {lhs}")


def _lp(x: np.ndarray, p: float, axis=-1) -> np.ndarray:
    a = np.abs(x)
    if np.isinf(p):
        return np.max(a, axis=axis)
    return np.sum(a ** p, axis=axis) ** (1.0 / p)


def strichartz_norm(samples: np.ndarray, dt: float, r: float, p: float) -> float:
    """Birman-Solomjak norm l^{3r/2}_j ( max_{t in [j, j+1)} ||u(t)||_{l^p} ).

    ``samples[k]`` is the field at time ``k dt``; 1/dt must be an integer and
    the time-sup is the sample max on each unit interval.
    """
    check_admissible(r, p)
    per_unit = 1.0 / dt
    if abs(per_unit - round(per_unit)) > 1e-9:
        raise ValueError("dt must divide the unit interval")
    per_unit = int(round(per_unit))
    samples = np.asarray(samples)
    n_int = samples.shape[0] // per_unit
    if n_int == 0:
        raise ValueError("trajectory shorter than one unit interval")
    spatial = _lp(samples[: n_int * per_unit], p, axis=1).reshape(n_int, per_unit).max(axis=1)
    outer = 1.5 * r
    return float(_lp(spatial, outer, axis=0))


def weighted_l2_time_norm(samples: np.ndarray, dt: float, sites: np.ndarray, sigma: float) -> float:
    """|| u ||_{l^{2,sigma} L^2_t} by the trapezoid rule in time."""
    w2 = japanese_bracket(sites) ** (2.0 * sigma)
    dens = np.abs(samples) ** 2 @ w2
    return float(np.sqrt(trapezoid(dens, dx=dt)))


def smoothing_norms(pot: Potential, f: np.ndarray, tau: float, T_max: float, dt: float = 1 / 32,
                    g=None, C_tau: float | None = None, ep: EigenPropagator | None = None) -> dict:
    """Kato smoothing norms on [0, T_max].

    (i)   || e^{-itH} P_c f ||_{l^{2,-tau} L^2_t}
    (ii)  || int_0^t e^{-i(t-s)H} P_c g(s) ds ||_{l^{2,-tau} L^2_t}
    (iii) the same Duhamel term in L^inf_t l^2 and in l^6(L^inf_t[n,n+1] l^inf)
    ``g`` is a callable g(t) -> field or an array of samples; if absent,
    g(s) = e^{-s} f is used.
    """
    if tau <= 1:
        raise ValueError("tau must exceed 1")
    ep = ep if ep is not None else EigenPropagator(pot)
    times = np.arange(int(round(T_max / dt)) + 1) * dt
    sites = pot.sites
    u = ep.evolve(f, times, -1)
    n_i = weighted_l2_time_norm(u, dt, sites, -tau)
    if g is None:
        G = np.exp(-times)[:, None] * np.asarray(f)[None, :]
    elif callable(g):
        G = np.array([g(t) for t in times])
    else:
        G = np.asarray(g)
    D = ep.duhamel(G, dt, -1)
    n_ii = weighted_l2_time_norm(D, dt, sites, -tau)
    g_norm = weighted_l2_time_norm(G, dt, sites, tau)
    n_iii_linf = float(np.max(np.linalg.norm(D, axis=1)))
    n_iii_bs = strichartz_norm(D, dt, 4.0, np.inf)
    f_norm = float(np.linalg.norm(f))
    out = {
        "tau": tau, "T_max": T_max, "dt": dt,
        "smoothing": n_i, "f_l2": f_norm,
        "ratio_smoothing": n_i / f_norm if f_norm else 0.0,
        "duhamel_smoothing": n_ii, "g_weighted": g_norm,
        "ratio_duhamel": n_ii / g_norm if g_norm else 0.0,
        "duhamel_linf_l2": n_iii_linf, "duhamel_l6_linf": n_iii_bs,
        "ratio_retarded": max(n_iii_linf, n_iii_bs) / g_norm if g_norm else 0.0,
        "time_sup_note": "L^inf in time approximated by the sample max, spacing dt",
    }
    if C_tau is not None:
        out["C_tau"] = C_tau
        out["predicted_bound"] = 2.0 * np.sqrt(np.pi * C_tau)
    return out
