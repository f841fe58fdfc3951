"""Run configuration with an INI round-trip."""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .lattice import DEFAULT_HALF_WIDTH, LatticeWindow, Potential, load_potential, make_potential

OUTPUT_ENV = "DNLS_LATTICE_OUTPUT"

DEFAULT_TOLERANCES = {
    "scattering_identity": 1e-10,
    "resolvent": 1e-9,
    "projector": 1e-9,
    "contour": 1e-6,
    "propagator": 1e-7,
    "standing_wave_residual": 1e-10,
    "norm_drift_per_unit_time": 1e-8,
    "genericity_relative": 1e-8,
    "constraint": 1e-10,
}


@dataclass(frozen=True)
class PotentialSpec:
    family: str = "single_site"
    params: tuple = ()
    path: str | None = None

    def build(self, window: LatticeWindow) -> Potential:
        if self.path:
            return load_potential(self.path, window)
        return make_potential(self.family, window, **dict(self.params))

    def describe(self) -> str:
        if self.path:
            return f"file:{self.path}"
        inner = ",".join(f"{k}={v:g}" for k, v in self.params)
        return f"{self.family}({inner})"


def parse_params(text: str | None) -> tuple:
    """'c=-0.5,a=1' -> (('a', 1.0), ('c', -0.5))."""
    if not text:
        return ()
    out = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        key, sep, val = item.partition("=")
        if not sep:
            raise ValueError(f"potential parameter {item!r} is not key=value")
        out[key.strip()] = float(val)
    return tuple(sorted(out.items()))


@dataclass(frozen=True)
class RunConfig:
    window: LatticeWindow = field(default_factory=LatticeWindow.symmetric)
    theta_grid_size: int = 1024
    lambda_grid_size: int = 64
    tolerances: tuple = tuple(sorted(DEFAULT_TOLERANCES.items()))
    potential_spec: PotentialSpec = field(default_factory=PotentialSpec)
    seed: int = 0
    output_dir: str = "runs"

    def __post_init__(self):
        for name, val in self.tolerances:
            if not val > 0:
                raise ValueError(f"tolerance {name} must be positive, got {val}")
        if self.theta_grid_size < 64 or self.lambda_grid_size < 64:
            raise ValueError("grid sizes must be at least 64")

    def tol(self, name: str) -> float:
        return dict(self.tolerances)[name]

    def potential(self) -> Potential:
        return self.potential_spec.build(self.window)

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    # ---------------------------------------------------------------- io
    def to_parser(self) -> configparser.ConfigParser:
        cp = configparser.ConfigParser()
        cp["lattice"] = {"n_min": str(self.window.n_min), "n_max": str(self.window.n_max)}
        pot = {"family": self.potential_spec.family,
               "params": ",".join(f"{k}={v!r}" for k, v in self.potential_spec.params)}
        if self.potential_spec.path:
            pot["path"] = self.potential_spec.path
        cp["potential"] = pot
        cp["grids"] = {"theta_grid_size": str(self.theta_grid_size),
                       "lambda_grid_size": str(self.lambda_grid_size)}
        cp["tolerances"] = {k: repr(v) for k, v in self.tolerances}
        cp["run"] = {"seed": str(self.seed), "output_dir": self.output_dir}
        return cp

    def dumps(self) -> str:
        import io

        buf = io.StringIO()
        self.to_parser().write(buf)
        return buf.getvalue()

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser()
        cp.read_string(text)
        return cls.from_parser(cp)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.loads(Path(path).read_text())

    @classmethod
    def from_parser(cls, cp: configparser.ConfigParser) -> "RunConfig":
        base = cls.default()
        kw = {}
        if cp.has_section("lattice"):
            s = cp["lattice"]
            kw["window"] = LatticeWindow(s.getint("n_min", base.window.n_min), s.getint("n_max", base.window.n_max))
        if cp.has_section("potential"):
            s = cp["potential"]
            kw["potential_spec"] = PotentialSpec(s.get("family", "single_site"), parse_params(s.get("params")),
                                                 s.get("path") or None)
        if cp.has_section("grids"):
            s = cp["grids"]
            kw["theta_grid_size"] = s.getint("theta_grid_size", base.theta_grid_size)
            kw["lambda_grid_size"] = s.getint("lambda_grid_size", base.lambda_grid_size)
        if cp.has_section("tolerances"):
            tol = dict(base.tolerances)
            unknown = set(cp["tolerances"]) - set(tol)
            if unknown:
                raise ValueError(f"unknown tolerances: {sorted(unknown)}")
            tol.update({k: float(v) for k, v in cp["tolerances"].items()})
            kw["tolerances"] = tuple(sorted(tol.items()))
        if cp.has_section("run"):
            s = cp["run"]
            kw["seed"] = s.getint("seed", base.seed)
            kw["output_dir"] = s.get("output_dir", base.output_dir)
        return replace(base, **kw)

    @classmethod
    def default(cls) -> "RunConfig":
        return cls(window=LatticeWindow.symmetric(DEFAULT_HALF_WIDTH),
                   output_dir=os.environ.get(OUTPUT_ENV, "runs"))

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            val = getattr(self, f.name)
            if isinstance(val, LatticeWindow):
                val = {"n_min": val.n_min, "n_max": val.n_max}
            elif isinstance(val, PotentialSpec):
                val = {"family": val.family, "params": dict(val.params), "path": val.path}
            elif f.name == "tolerances":
                val = dict(val)
            out[f.name] = val
        return out
