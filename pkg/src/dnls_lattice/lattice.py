"""Truncated lattice windows, potentials and the discrete Schrodinger operator.

Sequences on Z are stored as dense numpy arrays over a finite window
``[n_min, n_max]``; sites outside the window read as zero (Dirichlet
truncation).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DEFAULT_HALF_WIDTH = 512


@dataclass(frozen=True)
class LatticeWindow:
    n_min: int
    n_max: int

    def __post_init__(self):
        if not (self.n_min < 0 < self.n_max):
            raise ValueError(f"window [{self.n_min}, {self.n_max}] must contain the origin strictly inside")
        if self.n_max - self.n_min + 1 < 3:
            raise ValueError("window must contain at least 3 sites")

    @classmethod
    def symmetric(cls, half_width: int = DEFAULT_HALF_WIDTH) -> "LatticeWindow":
        return cls(-int(half_width), int(half_width))

    @property
    def size(self) -> int:
        return self.n_max - self.n_min + 1

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.n_min, self.n_max + 1)

    def index(self, n: int) -> int:
        if not (self.n_min <= n <= self.n_max):
            raise IndexError(f"site {n} outside window [{self.n_min}, {self.n_max}]")
        return n - self.n_min

    def contains(self, other: "LatticeWindow") -> bool:
        return self.n_min <= other.n_min and other.n_max <= self.n_max

    def delta(self, n: int = 0) -> np.ndarray:
        u = np.zeros(self.size, dtype=complex)
        u[self.index(n)] = 1.0
        return u

    def embed(self, u: np.ndarray, inner: "LatticeWindow") -> np.ndarray:
        """Zero-pad a field living on ``inner`` to this window."""
        if not self.contains(inner):
            raise ValueError("inner window not contained in this window")
        out = np.zeros(self.size, dtype=np.result_type(u, float))
        start = inner.n_min - self.n_min
        out[start:start + inner.size] = u
        return out

    def restrict(self, u: np.ndarray, inner: "LatticeWindow") -> np.ndarray:
        if not self.contains(inner):
            raise ValueError("inner window not contained in this window")
        start = inner.n_min - self.n_min
        return u[start:start + inner.size]


def japanese_bracket(n) -> np.ndarray:
    """<n> = sqrt(1 + n^2)."""
    n = np.asarray(n, dtype=float)
    return np.sqrt(1.0 + n * n)


@dataclass(frozen=True)
class Potential:
    """Real potential q on a window, with its tail sums.

    ``eta[i] = sum_{m >= n_i} |q(m)|`` and
    ``gamma_tail[i] = sum_{m >= n_i} (m - n_i) |q(m)|``.
    """

    window: LatticeWindow
    q: np.ndarray
    name: str = "custom"
    eta: np.ndarray = field(init=False, repr=False)
    gamma_tail: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        q = np.asarray(self.q)
        if np.iscomplexobj(q):
            if np.any(q.imag != 0):
                raise ValueError("potential must be real")
            q = q.real
        q = np.array(q, dtype=float)
        if q.shape != (self.window.size,):
            raise ValueError(f"q has shape {q.shape}, window needs ({self.window.size},)")
        if not np.all(np.isfinite(q)):
            raise ValueError("potential has non-finite entries")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)
        eta, gam = tail_sums(q)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "gamma_tail", gam)

    @property
    def sites(self) -> np.ndarray:
        return self.window.sites

    def at(self, n: int) -> float:
        if self.window.n_min <= n <= self.window.n_max:
            return float(self.q[n - self.window.n_min])
        return 0.0

    def eta_at(self, n: int) -> float:
        if n > self.window.n_max:
            return 0.0
        return float(self.eta[max(n, self.window.n_min) - self.window.n_min])

    def gamma_at(self, n: int) -> float:
        if n > self.window.n_max:
            return 0.0
        if n >= self.window.n_min:
            return float(self.gamma_tail[n - self.window.n_min])
        # below the window gamma grows linearly with the distance
        return float(self.gamma_tail[0] + (self.window.n_min - n) * self.eta[0])

    def weighted_l1(self, sigma: float) -> float:
        return float(np.sum(japanese_bracket(self.sites) ** sigma * np.abs(self.q)))

    @property
    def support(self) -> tuple[int, int] | None:
        nz = np.nonzero(self.q)[0]
        if nz.size == 0:
            return None
        return int(self.sites[nz[0]]), int(self.sites[nz[-1]])

    def reflected(self) -> "Potential":
        """q(-n) on the mirrored window."""
        w = LatticeWindow(-self.window.n_max, -self.window.n_min)
        return Potential(w, self.q[::-1].copy(), name=f"{self.name}[reflected]")

    def scaled(self, c: float) -> "Potential":
        return Potential(self.window, c * self.q, name=f"{c:g}*{self.name}")

    def diagnostics(self) -> dict:
        return {
            "name": self.name,
            "n_min": self.window.n_min,
            "n_max": self.window.n_max,
            "l1_1": self.weighted_l1(1.0),
            "l1_2": self.weighted_l1(2.0),
            "sup": float(np.max(np.abs(self.q))) if self.q.size else 0.0,
        }


def tail_sums(q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    aq = np.abs(q)
    # suffix sums; eta(n_max + 1) = 0 implicitly
    eta = np.cumsum(aq[::-1])[::-1]
    # gamma(n) = sum_{m>n} eta(m) = gamma(n+1) + eta(n+1)
    gam = np.zeros_like(eta)
    if eta.size > 1:
        gam[:-1] = np.cumsum(eta[:0:-1])[::-1]
    eta.setflags(write=False)
    gam.setflags(write=False)
    return eta, gam


# ---------------------------------------------------------------- families

def zero_potential(window: LatticeWindow) -> Potential:
    return Potential(window, np.zeros(window.size), name="zero")


def single_site(window: LatticeWindow, value: float = -1.0, site: int = 0) -> Potential:
    q = np.zeros(window.size)
    q[window.index(site)] = value
    return Potential(window, q, name=f"single_site({value:g}@{site})")


def two_site(window: LatticeWindow, v0: float = -1.0, v1: float = -0.5,
             s0: int = 0, s1: int = 1) -> Potential:
    q = np.zeros(window.size)
    q[window.index(s0)] += v0
    q[window.index(s1)] += v1
    return Potential(window, q, name=f"two_site({v0:g}@{s0},{v1:g}@{s1})")


def exponential(window: LatticeWindow, c: float = -0.5, a: float = 1.0) -> Potential:
    """q(n) = c exp(-a |n|) truncated to the window."""
    n = window.sites
    return Potential(window, c * np.exp(-a * np.abs(n)), name=f"exponential(c={c:g},a={a:g})")


def load_potential(path: str | Path, window: LatticeWindow | None = None) -> Potential:
    """Read ``n value`` records (one per line, ``#`` comments allowed)."""
    records = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'n value', got {line!r}")
        records[int(parts[0])] = records.get(int(parts[0]), 0.0) + float(parts[1])
    if window is None:
        lo = min(records, default=-1)
        hi = max(records, default=1)
        half = max(abs(lo), abs(hi), 1) + 1
        window = LatticeWindow(-half, half)
    q = np.zeros(window.size)
    for n, v in records.items():
        q[window.index(n)] += v
    return Potential(window, q, name=f"file:{Path(path).name}")


def save_potential(pot: Potential, path: str | Path) -> None:
    lines = [f"{n:d} {v:.17g}" for n, v in zip(pot.sites, pot.q) if v != 0.0]
    Path(path).write_text("\n".join(lines) + "\n")


def make_potential(family: str, window: LatticeWindow, **params) -> Potential:
    family = family.replace("-", "_")
    if family == "zero":
        return zero_potential(window)
    if family == "single_site":
        return single_site(window, params.get("value", -1.0), int(params.get("site", 0)))
    if family == "two_site":
        return two_site(window, params.get("v0", -1.0), params.get("v1", -0.5),
                        int(params.get("s0", 0)), int(params.get("s1", 1)))
    if family == "exponential":
        return exponential(window, params.get("c", -0.5), params.get("a", 1.0))
    raise ValueError(f"unknown potential family {family!r}")


# --------------------------------------------------------------- operators

def apply_laplacian(u: np.ndarray) -> np.ndarray:
    """(Delta u)(n) = u(n+1) + u(n-1) - 2u(n), zero beyond the window."""
    u = np.asarray(u)
    v = -2.0 * u
    v[:-1] += u[1:]
    v[1:] += u[:-1]
    return v


def apply_hamiltonian(pot: Potential, u: np.ndarray, u_window: LatticeWindow | None = None) -> np.ndarray:
    """(H u)(n) = -(Delta u)(n) + q(n) u(n) on the potential's window."""
    u = np.asarray(u)
    if u_window is not None and u_window != pot.window:
        if not pot.window.contains(u_window):
            raise ValueError("field window is not contained in the potential window")
        u = pot.window.embed(u, u_window)
    if u.shape[-1] != pot.window.size:
        raise ValueError(f"field has {u.shape[-1]} sites, potential window has {pot.window.size}")
    return -apply_laplacian(u) + pot.q * u


def hamiltonian_bands(pot: Potential) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal of the truncated tridiagonal H."""
    return 2.0 + pot.q, -np.ones(pot.window.size - 1)


def hamiltonian_matrix(pot: Potential) -> np.ndarray:
    d, e = hamiltonian_bands(pot)
    return np.diag(d) + np.diag(e, 1) + np.diag(e, -1)


def weighted_norm(u: np.ndarray, p: float, sigma: float, window: LatticeWindow) -> float:
    """||u||_{l^{p,sigma}} with weight <n>^sigma; p may be ``np.inf``."""
    w = japanese_bracket(window.sites) ** sigma
    a = np.abs(np.asarray(u)) * w
    if np.isinf(p):
        return float(np.max(a)) if a.size else 0.0
    if p < 1:
        raise ValueError("exponent p must be >= 1")
    return float(np.sum(a ** p) ** (1.0 / p))


def inner(u: np.ndarray, v: np.ndarray) -> complex:
    """<u, v> = sum conj(u) v."""
    return complex(np.vdot(u, v))
