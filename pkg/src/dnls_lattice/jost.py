"""Modified Jost solutions of H f = z f and their Fourier coefficients.

Conventions: z = 2(1 - cos theta) with theta in the closed lower half strip
``-pi <= Re theta <= pi, Im theta <= 0``.  The Jost solutions are
``f_+(n) = exp(-i n theta) m_+(n)`` and ``f_-(n) = exp(+i n theta) m_-(n)``
with ``m_pm -> 1`` as ``n -> pm infinity``.

The Volterra sum for ``m_+`` collapses to the first-order recursion

    d(n-1) = e^{-i theta} q(n) m(n) + e^{-2 i theta} d(n),
    m(n-1) = m(n) + d(n-1),          d(n) := m(n) - m(n+1),

which is exact, linear in the window size, and contains no division by
``sin theta``, so the band edges theta in {0, pm pi} need no special case.
``m_-`` is obtained by reflecting the potential.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import lambertw

from .lattice import LatticeWindow, Potential, japanese_bracket

SIGNS = ("+", "-")


class JostOverflowError(FloatingPointError):
    def __init__(self, site: int, theta):
        super().__init__(f"non-finite Jost value at site n={site} for theta={theta}")
        self.site = site
        self.theta = theta


def _check_sign(sign: str) -> str:
    if sign not in SIGNS:
        raise ValueError(f"sign must be '+' or '-', got {sign!r}")
    return sign


def _wrap_real(x):
    """Map real parts into [-pi, pi], keeping +pi fixed."""
    y = np.mod(np.real(x) + np.pi, 2 * np.pi) - np.pi
    return np.where(np.isclose(np.real(x), np.pi) & np.isclose(y, -np.pi), np.pi, y)


def theta_from_z(z) -> np.ndarray | complex:
    """The unique theta in the closed lower strip with 2(1 - cos theta) = z.

    For z on [0, 4] the real root in [0, pi] is returned.
    """
    z_arr = np.asarray(z, dtype=complex)
    th = np.arccos(1.0 - z_arr / 2.0)
    th = np.where(th.imag > 0, -th, th)
    # arccos may hand back a tiny positive imaginary part on the real axis
    th = np.where((z_arr.imag == 0) & (z_arr.real >= 0) & (z_arr.real <= 4), th.real + 0j, th)
    if np.ndim(z) == 0:
        return complex(th)
    return th


def z_from_theta(theta):
    return 2.0 * (1.0 - np.cos(theta))


@dataclass(frozen=True)
class SpectralPoint:
    theta: complex
    z: complex

    @classmethod
    def from_theta(cls, theta) -> "SpectralPoint":
        theta = complex(theta)
        if theta.imag > 0:
            raise ValueError(f"theta={theta} lies above the real axis")
        re = float(_wrap_real(theta.real))
        theta = complex(re, theta.imag)
        return cls(theta, complex(z_from_theta(theta)))

    @classmethod
    def from_z(cls, z) -> "SpectralPoint":
        th = theta_from_z(complex(z))
        return cls(th, complex(z_from_theta(th)))

    @property
    def is_real(self) -> bool:
        return self.theta.imag == 0.0


# ------------------------------------------------------------------ kernel

_SERIES_CUT = 0.02


def _nearest_edge(theta):
    """Split theta = edge + x with edge in {0, pm pi}; sign of sin(edge + x) = s sin x."""
    theta = np.asarray(theta, dtype=complex)
    re = theta.real
    edge = np.where(re > np.pi / 2, np.pi, np.where(re < -np.pi / 2, -np.pi, 0.0))
    s = np.where(edge == 0.0, 1.0, -1.0)
    return theta - edge, s


def _sin_ratio(mu, x):
    """S = sin(mu x)/sin(x) and dS/dx, stable for small x."""
    mu = np.asarray(mu, dtype=float)
    x = np.asarray(x, dtype=complex)
    mu, x = np.broadcast_arrays(mu, x)
    small = np.abs(mu * x) < _SERIES_CUT
    m2 = mu * mu
    c2 = (1.0 - m2) / 6.0
    c4 = (3.0 * m2 * m2 - 10.0 * m2 + 7.0) / 360.0
    c6 = (-3.0 * m2 ** 3 + 21.0 * m2 * m2 - 49.0 * m2 + 31.0) / 15120.0
    x2 = x * x
    S_ser = mu * (1.0 + x2 * (c2 + x2 * (c4 + x2 * c6)))
    dS_ser = mu * x * (2.0 * c2 + x2 * (4.0 * c4 + 6.0 * c6 * x2))
    with np.errstate(divide="ignore", invalid="ignore"):
        sx = np.sin(x)
        S_dir = np.sin(mu * x) / sx
        dS_dir = (mu * np.cos(mu * x) - S_dir * np.cos(x)) / sx
    return np.where(small, S_ser, S_dir), np.where(small, dS_ser, dS_dir)


def volterra_kernel(mu, theta):
    """D(mu, theta) = (1 - exp(2 i mu theta)) / (2 i sin theta), with its edge limits.

    D(mu, 0) = -mu and D(mu, pm pi) = mu.
    """
    x, s = _nearest_edge(theta)
    S, _ = _sin_ratio(mu, x)
    return -np.exp(1j * np.asarray(mu) * x) * S / s


def volterra_kernel_dot(mu, theta):
    """Analytic theta-derivative of :func:`volterra_kernel`.

    Edge limits: -i mu^2 at theta = 0 and +i mu^2 at theta = pm pi.
    """
    x, s = _nearest_edge(theta)
    mu = np.asarray(mu, dtype=float)
    S, dS = _sin_ratio(mu, x)
    return -np.exp(1j * mu * x) * (1j * mu * S + dS) / s


# ------------------------------------------------------------- recursion

def _modified_jost_plus(q: np.ndarray, thetas, derivative: bool = False):
    """m_+(n, theta) over the window for each theta; shape (len(thetas), N).

    ``q`` is the potential array on the window; m = 1 beyond the right edge.
    """
    th = np.atleast_1d(np.asarray(thetas, dtype=complex))
    N = q.size
    e1 = np.exp(-1j * th)
    e2 = e1 * e1
    m = np.empty((th.size, N), dtype=complex)
    m[:, N - 1] = 1.0
    d = np.zeros(th.size, dtype=complex)
    if derivative:
        md = np.empty_like(m)
        md[:, N - 1] = 0.0
        dd = np.zeros(th.size, dtype=complex)
    for i in range(N - 1, 0, -1):
        mi = m[:, i]
        if derivative:
            mdi = md[:, i]
            dd = -1j * e1 * q[i] * mi + e1 * q[i] * mdi - 2j * e2 * d + e2 * dd
            md[:, i - 1] = mdi + dd
        d = e1 * q[i] * mi + e2 * d
        m[:, i - 1] = mi + d
    if derivative:
        return m, md
    return m


def modified_jost_grid(pot: Potential, sign: str, thetas, derivative: bool = False):
    """m_pm on a theta grid: array (len(thetas), N), optionally with d/dtheta."""
    _check_sign(sign)
    if sign == "+":
        return _modified_jost_plus(pot.q, thetas, derivative)
    out = _modified_jost_plus(pot.q[::-1], thetas, derivative)
    if derivative:
        return out[0][:, ::-1], out[1][:, ::-1]
    return out[:, ::-1]


def jost_phase(window: LatticeWindow, sign: str, thetas) -> np.ndarray:
    """exp(-+ i n theta) for the given sign; shape (len(thetas), N)."""
    s = -1.0 if _check_sign(sign) == "+" else 1.0
    th = np.atleast_1d(np.asarray(thetas, dtype=complex))
    return np.exp(s * 1j * np.outer(th, window.sites))


@dataclass(frozen=True)
class JostData:
    sign: str
    theta: SpectralPoint
    window: LatticeWindow
    m: np.ndarray
    f: np.ndarray
    m_dot: np.ndarray | None = None


def _as_point(theta) -> SpectralPoint:
    if isinstance(theta, SpectralPoint):
        return theta
    return SpectralPoint.from_theta(theta)


def jost_m(pot: Potential, sign: str, theta) -> JostData:
    """Modified Jost solution m_pm(n, theta) and f_pm on the window."""
    pt = _as_point(theta)
    m = modified_jost_grid(pot, sign, [pt.theta])[0]
    bad = ~np.isfinite(m)
    if bad.any():
        raise JostOverflowError(int(pot.sites[np.argmax(bad)]), pt.theta)
    with np.errstate(over="ignore", invalid="ignore"):
        f = jost_phase(pot.window, sign, [pt.theta])[0] * m
    bad = ~np.isfinite(f)
    if bad.any():
        # first offending site in the direction of the sweep
        idx = np.nonzero(bad)[0]
        site = idx[-1] if sign == "+" else idx[0]
        raise JostOverflowError(int(pot.sites[site]), pt.theta)
    return JostData(sign, pt, pot.window, m, f)


def jost_m_derivative(pot: Potential, sign: str, theta) -> np.ndarray:
    """d/dtheta m_pm(n, theta) by differentiating the recursion exactly."""
    pt = _as_point(theta)
    _, md = modified_jost_grid(pot, sign, [pt.theta], derivative=True)
    return md[0]


def jost_with_derivative(pot: Potential, sign: str, theta) -> JostData:
    jd = jost_m(pot, sign, theta)
    return JostData(jd.sign, jd.theta, jd.window, jd.m, jd.f, jost_m_derivative(pot, sign, jd.theta))


def volterra_residual(pot: Potential, sign: str, theta, m: np.ndarray) -> np.ndarray:
    """Site-wise residual of m(n) - 1 - sum_nu D(n - nu) q(nu) m(nu) (direct O(N^2) sum)."""
    _check_sign(sign)
    n = pot.sites
    theta = complex(_as_point(theta).theta)
    if sign == "+":
        mu = n[:, None] - n[None, :]
        mask = mu < 0
    else:
        mu = n[None, :] - n[:, None]
        mask = mu < 0
    Dm = np.where(mask, volterra_kernel(mu, theta), 0.0)
    return m - 1.0 - Dm @ (pot.q * m)


# ------------------------------------------------------------------ series

def _volterra_matrix(pot: Potential, sign: str, theta: complex) -> np.ndarray:
    n = pot.sites
    if sign == "+":
        mu = n[:, None] - n[None, :]
    else:
        mu = n[None, :] - n[:, None]
    D = np.where(mu < 0, volterra_kernel(mu, theta), 0.0)
    return D * pot.q[None, :]


def jost_series_terms(pot: Potential, sign: str, theta, ell_max: int) -> np.ndarray:
    """g_1 ... g_{ell_max} stacked, shape (ell_max, N)."""
    _check_sign(sign)
    if ell_max < 1:
        raise ValueError("ell must be a positive integer (g_0 = 1 is implicit)")
    V = _volterra_matrix(pot, sign, complex(_as_point(theta).theta))
    out = np.empty((ell_max, pot.window.size), dtype=complex)
    g = np.ones(pot.window.size, dtype=complex)
    for k in range(ell_max):
        g = V @ g
        out[k] = g
    return out


def jost_series_term(pot: Potential, sign: str, theta, ell: int) -> np.ndarray:
    """Born term g_ell(n, theta), with g_ell = sum D q g_{ell-1} and g_0 = 1."""
    if ell < 1:
        raise ValueError("ell must be a positive integer (g_0 = 1 is implicit)")
    return jost_series_terms(pot, sign, theta, ell)[-1]


# ------------------------------------------------------------------ Fourier

@dataclass(frozen=True)
class FourierTable:
    """B(n, nu) for nu = 1..nu_max; column nu-1 holds B(., nu)."""

    sign: str
    window: LatticeWindow
    B: np.ndarray
    iterations: int
    last_increment: float
    truncation_bound: float

    @property
    def nu_max(self) -> int:
        return self.B.shape[1]

    def resum(self, thetas) -> np.ndarray:
        """1 + sum_nu B(n, nu) exp(-i nu theta); shape (len(thetas), N)."""
        th = np.atleast_1d(np.asarray(thetas, dtype=float))
        nu = np.arange(1, self.nu_max + 1)
        E = np.exp(-1j * np.outer(th, nu))
        return 1.0 + E @ self.B.T

    def l1_norms(self) -> np.ndarray:
        return np.sum(np.abs(self.B), axis=1)


def _shear_sum(T: np.ndarray, V: int) -> np.ndarray:
    """R[i, k-1] = sum_{l=0}^{k-1} T[i + k - l, l] for k = 1..V (T zero past its rows)."""
    N = T.shape[0]
    G = np.zeros((N + V, V), dtype=T.dtype)
    for l in range(V):
        G[l:l + N, l] = T[:, l]
    C = np.cumsum(G, axis=1)
    i = np.arange(N)[:, None]
    k = np.arange(1, V + 1)[None, :]
    return C[i + k, k - 1]


def _fourier_plus(q: np.ndarray, nu_max: int, tol: float, max_iter: int):
    N = q.size
    V = (nu_max + 1) // 2
    S = np.cumsum(q[::-1])[::-1]  # S[i] = sum_{j >= i} q_j
    # K_0(n, 2k-1) = S(n + k)
    idx = np.arange(N)[:, None] + np.arange(1, V + 1)[None, :]
    odd = np.where(idx < N, S[np.minimum(idx, N - 1)], 0.0)
    even = np.zeros((N, V))
    B_odd, B_even = odd.copy(), even.copy()
    inc = float(np.max(np.abs(odd))) if odd.size else 0.0
    it = 0
    while inc >= tol and it < max_iter:
        it += 1
        T_odd = np.cumsum((q[:, None] * odd)[::-1], axis=0)[::-1]
        ext = np.zeros((N, V))
        ext[:, 1:] = even[:, :-1]
        T_even = np.cumsum((q[:, None] * ext)[::-1], axis=0)[::-1]
        even, odd = _shear_sum(T_odd, V), _shear_sum(T_even, V)
        B_odd += odd
        B_even += even
        inc = max(float(np.max(np.abs(odd))), float(np.max(np.abs(even))))
    B = np.empty((N, 2 * V))
    B[:, 0::2] = B_odd
    B[:, 1::2] = B_even
    return B[:, :nu_max], it, inc


def fourier_coefficients(pot: Potential, sign: str, nu_max: int | None = None,
                         tol: float = 1e-14, max_iter: int = 2000) -> FourierTable:
    """B_pm(n, nu) of m_pm(n, theta) = 1 + sum_nu B(n, nu) exp(-i nu theta).

    Built from the K_m iteration (seed K_0(n, 2nu-1) = sum_{l >= n+nu} q(l),
    K_0(n, 2nu) = 0) until max |K_m| < tol.
    """
    _check_sign(sign)
    if nu_max is None:
        nu_max = 4 * pot.window.size
    if nu_max < 1:
        raise ValueError("nu_max must be positive")
    q = pot.q if sign == "+" else pot.q[::-1]
    B, it, inc = _fourier_plus(q, nu_max, tol, max_iter)
    if sign == "-":
        B = B[::-1]
    # coefficients past nu_max are bounded by e^{gamma(n)} eta(n + [nu/2]) per site
    ref = pot if sign == "+" else pot.reflected()
    n0 = ref.window.n_min
    tail = np.exp(ref.gamma_at(n0)) * sum(ref.eta_at(n0 + nu // 2) for nu in range(nu_max + 1, nu_max + 1 + 2 * ref.window.size))
    return FourierTable(sign, pot.window, B, it, inc, float(tail))


def fourier_bound(pot: Potential, sign: str, nu_max: int) -> np.ndarray:
    """e^{gamma(n)} eta(n + [nu/2]) on the (n, nu) table (mirrored for sign '-')."""
    ref = pot if sign == "+" else pot.reflected()
    n = ref.sites
    nu = np.arange(1, nu_max + 1)
    eta_ext = np.concatenate([ref.eta, np.zeros(nu_max // 2 + 1)])
    idx = (n - ref.window.n_min)[:, None] + (nu // 2)[None, :]
    bound = np.exp(ref.gamma_tail)[:, None] * eta_ext[idx]
    return bound if sign == "+" else bound[::-1]


# ------------------------------------------------------------------ bounds

def verify_jost_bounds(pot: Potential, sign: str, thetas, sigma: float = 1.0,
                       with_derivative: bool = False) -> dict:
    """Smallest empirical constants in the |m - 1| and |m_dot| bounds over a real theta grid.

    bound1: |m-1| <= C <n^pm>^{-sigma} |sin th|^{-1} exp(C/|sin th|)   (sin th != 0)
    bound2: |m-1| <= C <n^pm>^{-(sigma-1)} <sin th>^{-1} (1 + n^mp)
    bound3: |m_dot| <= C <n^mp>^2
    """
    _check_sign(sign)
    th = np.asarray(thetas, dtype=float)
    if with_derivative:
        m, md = modified_jost_grid(pot, sign, th, derivative=True)
    else:
        m = modified_jost_grid(pot, sign, th)
    n = pot.sites.astype(float)
    n_same = np.maximum(n, 0.0) if sign == "+" else np.maximum(-n, 0.0)
    n_other = np.maximum(-n, 0.0) if sign == "+" else np.maximum(n, 0.0)
    dev = np.abs(m - 1.0)
    s = np.abs(np.sin(th))[:, None]

    report = {"sign": sign, "sigma": sigma, "n_theta": int(th.size)}
    ok = (s[:, 0] > 1e-12)
    if ok.any():
        # C e^{C/s} = y s  =>  C = s W(y)
        y = dev[ok] * japanese_bracket(n_same)[None, :] ** sigma
        C1 = s[ok] * np.real(lambertw(y))
        report["C_bound1"] = float(np.max(C1))
    else:
        report["C_bound1"] = 0.0
    C2 = dev * japanese_bracket(n_same)[None, :] ** (sigma - 1.0) * japanese_bracket(s) / (1.0 + n_other)[None, :]
    report["C_bound2"] = float(np.max(C2))
    if with_derivative:
        C3 = np.abs(md) / japanese_bracket(n_other)[None, :] ** 2
        report["C_bound3"] = float(np.max(C3))
    report["violations"] = [k for k, v in report.items() if k.startswith("C_") and not np.isfinite(v)]
    return report
