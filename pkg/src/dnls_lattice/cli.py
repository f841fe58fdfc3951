"""Command-line entry point: ``dnls-lattice <subcommand> [flags]``.

Every run writes into ``<output-dir>/<subcommand>/`` (or ``--run-dir``) a
``manifest.json`` listing the config echo, library versions, wall time, the
measured constants and every file produced.  Failures write ``error.json``
there, print the same record on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time
import traceback
from dataclasses import replace
from pathlib import Path

import numpy as np
import scipy
from threadpoolctl import threadpool_limits

from . import __version__
from ._io import complex_columns, write_csv, write_json
from .config import OUTPUT_ENV, PotentialSpec, RunConfig, parse_params
from .lattice import LatticeWindow

SUBCOMMANDS = ("jost", "scatter", "classify", "spectrum", "resolvent", "propagate", "decay-scan",
               "norms", "standing-wave", "simulate", "sweep")


class CLIError(Exception):
    """Invalid flags or configuration detected before any computation."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        record = {"status": "error", "type": "UsageError", "message": message}
        sys.stderr.write(json.dumps(record) + "\n")
        self.print_usage(sys.stderr)
        sys.exit(2)


def parse_complex(text: str) -> complex:
    return complex(text.strip().replace(" ", "").replace("i", "j"))


def float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def versions() -> dict:
    return {"dnls_lattice": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


class Run:
    """Output directory, file registry and measured constants for one invocation."""

    def __init__(self, subcommand: str, config: RunConfig, flags: dict, run_dir: str | None = None):
        self.subcommand = subcommand
        self.config = config
        self.flags = flags
        self.dir = Path(run_dir) if run_dir else Path(config.output_dir) / subcommand
        self.outputs: list[str] = []
        self.measured: dict = {}

    def path(self, name: str) -> Path:
        return self.dir / name

    def csv(self, name: str, header, columns) -> None:
        write_csv(self.path(name), header, columns)
        self.outputs.append(name)

    def json(self, name: str, obj) -> None:
        write_json(self.path(name), obj)
        self.outputs.append(name)

    def manifest(self, status: str, wall: float, error: dict | None = None) -> dict:
        m = {"subcommand": self.subcommand, "status": status, "config": self.config.to_dict(),
             "potential": self.config.potential_spec.describe(), "flags": self.flags,
             "versions": versions(), "wall_time_s": wall, "measured": self.measured,
             "outputs": sorted(set(self.outputs))}
        if error:
            m["error"] = error
        return m


# ---------------------------------------------------------------- handlers

def _kernel_csv(run: Run, name: str, sites, K) -> None:
    n = np.repeat(sites, sites.size)
    m = np.tile(sites, sites.size)
    K = np.asarray(K).ravel()
    run.csv(name, ["n", "m", "re", "im"], [n, m, K.real, K.imag])


def _sub_sites(pot, half_width: int) -> np.ndarray:
    return np.arange(max(pot.window.n_min, -half_width), min(pot.window.n_max, half_width) + 1)


def cmd_jost(run: Run, f: dict) -> None:
    from .jost import fourier_coefficients, jost_m, verify_jost_bounds

    pot = run.config.potential()
    theta = parse_complex(f["theta"])
    jd = jost_m(pot, f["sign"], theta)
    run.csv("m.csv", ["n", "re", "im"], [pot.sites, *complex_columns(jd.m)])
    run.csv("f.csv", ["n", "re", "im"], [pot.sites, *complex_columns(jd.f)])
    M = run.config.theta_grid_size
    grid = -np.pi + (np.arange(M) + 0.5) * 2 * np.pi / M
    report = verify_jost_bounds(pot, f["sign"], grid, f["sigma"], with_derivative=True)
    report["theta"] = [theta.real, theta.imag]
    report["z"] = [*complex_columns(2 - 2 * np.cos(theta))]
    if f["nu_max"] is not None:
        tab = fourier_coefficients(pot, f["sign"], nu_max=f["nu_max"])
        report["fourier"] = {"nu_max": tab.nu_max, "iterations": tab.iterations,
                             "last_increment": tab.last_increment, "truncation_bound": tab.truncation_bound,
                             "max_l1_norm": float(np.max(tab.l1_norms()))}
    run.json("bounds.json", report)
    run.measured.update({k: v for k, v in report.items() if k.startswith("C_")})


def cmd_scatter(run: Run, f: dict) -> None:
    from .scattering import scattering_grid_fast

    pot = run.config.potential()
    count = f["count"] or run.config.theta_grid_size
    lo = -np.pi if f["theta_min"] is None else f["theta_min"]
    hi = np.pi if f["theta_max"] is None else f["theta_max"]
    # cell midpoints keep the band edges (where T, R are undefined) off the grid
    th = lo + (np.arange(count) + 0.5) * (hi - lo) / count
    d = scattering_grid_fast(pot, th)
    cols = [th]
    header = ["theta"]
    for key in ("W", "W1", "T", "R_plus", "R_minus"):
        cols += complex_columns(d[key])
        header += [f"re_{key}", f"im_{key}"]
    for key in ("unitarity_plus", "unitarity_minus", "cross"):
        cols.append(d[key])
        header.append(key)
    run.csv("scattering.csv", header, cols)
    run.measured["max_identity_residual"] = float(max(np.max(d[k]) for k in
                                                      ("unitarity_plus", "unitarity_minus", "cross")))


def cmd_classify(run: Run, f: dict) -> None:
    from .scattering import classify_genericity

    rep = classify_genericity(run.config.potential(), f["grid_size"], run.config.tol("genericity_relative"))
    run.json("classify.json", rep.to_dict())
    run.measured.update({"is_generic": rep.is_generic, "resonant_edges": list(rep.resonant_edges)})


def cmd_spectrum(run: Run, f: dict) -> None:
    from .spectral import limiting_absorption_constant, projector_diagnostics, spectral_projectors

    pot = run.config.potential()
    sd = spectral_projectors(pot, contour=not f["no_contour"], tol=run.config.tol("contour"))
    run.csv("eigenvalues.csv", ["index", "eigenvalue"], [np.arange(sd.count), sd.eigenvalues])
    run.csv("eigenvectors.csv", ["n"] + [f"phi_{j}" for j in range(sd.count)],
            [pot.sites] + [sd.eigenvectors[:, j] for j in range(sd.count)])
    diag = projector_diagnostics(pot, sd)
    lac = limiting_absorption_constant(pot, f["tau"], run.config.lambda_grid_size, f["lac_half_width"])
    run.csv("limiting_absorption.csv", ["lambda", "norm_plus", "norm_minus"],
            [lac["lambda"], lac["norms"][0], lac["norms"][1]])
    out = {"eigenvalues": sd.eigenvalues, "multiplicity_ok": sd.multiplicity_ok, "projectors": diag,
           "limiting_absorption": {k: v for k, v in lac.items() if k not in ("lambda", "norms")}}
    run.json("spectrum.json", out)
    run.measured.update({"eigenvalues": sd.eigenvalues.tolist(), "C_tau": lac["C"], **diag})


def cmd_resolvent(run: Run, f: dict) -> None:
    from .spectral import boundary_resolvent, resolvent_kernel

    pot = run.config.potential()
    sites = _sub_sites(pot, f["kernel_half_width"])
    if f["z"] is not None:
        rk = resolvent_kernel(pot, parse_complex(f["z"]), sites=sites)
    elif f["lam"] is not None:
        rk = boundary_resolvent(pot, f["lam"], f["side"], sites=sites)
    else:
        raise CLIError("resolvent needs --z or --lam")
    _kernel_csv(run, "kernel.csv", sites, rk.K)
    full = rk if sites.size == pot.sites.size else None
    run.measured.update({"z": [rk.z.real, rk.z.imag], "theta": [rk.theta.real, rk.theta.imag],
                         "side": rk.side, "max_abs": float(np.max(np.abs(rk.K)))})
    if full is not None:
        run.measured["residual"] = full.residual(pot)


def cmd_propagate(run: Run, f: dict) -> None:
    from .propagator import continuous_propagator

    pot = run.config.potential()
    sites = _sub_sites(pot, f["kernel_half_width"])
    pk = continuous_propagator(pot, f["t"], f["sign"], sites=sites, check_convergence=f["check"],
                               tol=run.config.tol("propagator"))
    _kernel_csv(run, "kernel.csv", sites, pk.K)
    run.measured.update({"t": pk.t, "sign": pk.sign, "M": pk.M, "convergence": pk.convergence,
                         "sup_kernel": float(np.max(np.abs(pk.K)))})


def cmd_decay_scan(run: Run, f: dict) -> None:
    from .propagator import decay_scan

    pot = run.config.potential()
    t = np.geomspace(f["t_min"], f["t_max"], f["t_count"])
    half = min(-pot.window.n_min, pot.window.n_max)
    # the kernel maximum sits about 2t sites from the potential, so the window must reach that far
    if half < 2 * f["t_max"] + 32:
        raise CLIError(f"window half-width {half} is too small for t_max={f['t_max']}: "
                       f"need at least {int(2 * f['t_max'] + 32)} (set --half-width)")
    scan = decay_scan(pot, t, f["sign"], (f["fit_min"], None))
    run.csv("decay.csv", ["t", "sup", "sup_weighted"], [scan.times, scan.sup_kernel, scan.weighted])
    run.json("decay.json", scan.to_dict())
    run.measured.update(scan.to_dict())


def cmd_norms(run: Run, f: dict) -> None:
    from .propagator import EigenPropagator, smoothing_norms, strichartz_norm
    from .spectral import limiting_absorption_constant

    pot = run.config.potential()
    ep = EigenPropagator(pot)
    rng = np.random.default_rng(run.config.seed)
    n = pot.sites
    if f["field"] == "delta":
        u0 = pot.window.delta(0).astype(complex)
    else:
        env = np.exp(-(n / 4.0) ** 2 / 2)
        u0 = env * (rng.standard_normal(n.size) + 1j * rng.standard_normal(n.size))
    u0 = u0 / np.linalg.norm(u0)
    dt = f["dt"]
    times = np.arange(int(round(f["t_max"] / dt)) + 1) * dt
    U = ep.evolve(u0, times, -1)
    f_norm = float(np.linalg.norm(ep.V @ ep.coefficients(u0)))
    rows = []
    for r, p in f["pairs"]:
        val = strichartz_norm(U, dt, r, p)
        rows.append({"r": r, "p": p, "norm": val, "ratio": val / f_norm})
    C_tau = None
    if not f["skip_lap"]:
        C_tau = limiting_absorption_constant(pot, f["tau"], run.config.lambda_grid_size, 128)["C"]
    sm = smoothing_norms(pot, u0, f["tau"], f["t_max"], dt, C_tau=C_tau, ep=ep)
    run.json("norms.json", {"field": f["field"], "P_c_f_l2": f_norm, "strichartz": rows, "smoothing": sm})
    run.measured.update({"max_strichartz_ratio": max(r["ratio"] for r in rows),
                         "ratio_smoothing": sm["ratio_smoothing"], "ratio_duhamel": sm["ratio_duhamel"]})


def cmd_standing_wave(run: Run, f: dict) -> None:
    from .standing_wave import decay_rate_fit, default_omegas, ground_state, solve_branch, verify_expansion

    pot = run.config.potential()
    E0, _, _ = ground_state(pot)
    eta = f["eta"] * E0
    omegas = default_omegas(E0, f["count"], eta, f["lo"])
    br = solve_branch(pot, omegas)
    entries = []
    for j, e in enumerate(br.entries):
        name = f"phi_{j:03d}.csv"
        run.csv(name, ["n", "phi"], [pot.sites, e.phi])
        fit = decay_rate_fit(e.phi, pot.sites)
        entries.append({"file": name, "omega": e.omega, "a": e.a, "residual": e.residual,
                        "converged": e.converged, "iterations": e.iterations, "newton_gap": e.newton_gap,
                        "decay_fit": fit, "decay_rate_linear": float(np.arccosh(1 + e.omega / 2))})
    report = {"E0": E0, "entries": entries}
    if len(br.entries) >= 3:
        report["expansion"] = verify_expansion(br)
    run.json("branch.json", report)
    run.measured.update({"E0": E0, "max_residual": max(e.residual for e in br.entries),
                         "all_converged": all(e.converged for e in br.entries)})
    if "expansion" in report:
        run.measured["fitted_power"] = report["expansion"]["fitted_power"]


def _stability_cell(run: Run, f: dict, pot, omega0: float, epsilon: float, prefix: str = "") -> dict:
    from .dynamics import extract_scattering_state, modulation_l1_curve, perturbation_profile, stability_run
    from .standing_wave import solve_branch

    br = solve_branch(pot, [omega0])
    pert = perturbation_profile(f["shape"], pot.window, epsilon, f["width"], f["site"], f["perturbation_file"],
                                run.config.seed)
    rep = stability_run(pot, br, omega0, pert, f["t_final"], f["dt"], f["stride"], eps_max=f["eps_max"],
                        order=f["order"])
    summary = rep.summary()
    if rep.exit_time is None and rep.tail_states and len(rep.tail_states) >= 2:
        sc = extract_scattering_state(pot, br, rep)
        summary["scattering"] = {k: v for k, v in sc.items() if not isinstance(v, np.ndarray)}
    run.csv(prefix + "curves.csv",
            ["t", "omega", "gamma", "Theta", "omega_dot", "gamma_dot", "r_l2", "r_weighted", "r_linf",
             "constraint_ratio", "modulation_l1"],
            [rep.times, rep.omega_curve, rep.gamma_curve, rep.Theta_curve, rep.omega_dot, rep.gamma_dot,
             rep.r_l2, rep.r_weighted, rep.r_linf, rep.constraint_max, modulation_l1_curve(rep)])
    if not f.get("no_snapshots"):
        ts, ns, re, im = [], [], [], []
        snaps = dict(rep.tail_states)
        if rep.final_state is not None and rep.times.size:
            snaps.setdefault(round(float(rep.times[-1]), 9), (rep.final_state, None, None))
        for t in sorted(snaps):
            u = snaps[t][0]
            ts.append(np.full(u.size, t))
            ns.append(pot.sites)
            re.append(u.real)
            im.append(u.imag)
        if ts:
            run.csv(prefix + "snapshots.csv", ["t", "n", "re", "im"],
                    [np.concatenate(ts), np.concatenate(ns), np.concatenate(re), np.concatenate(im)])
    run.json(prefix + "report.json", summary)
    return summary


def _omega0(f: dict, E0: float) -> float:
    return f["omega0"] if f["omega0"] is not None else f["omega_factor"] * E0


def cmd_simulate(run: Run, f: dict) -> None:
    from .standing_wave import ground_state

    pot = run.config.potential()
    E0, _, _ = ground_state(pot)
    s = _stability_cell(run, f, pot, _omega0(f, E0), f["epsilon"])
    run.measured.update({k: s[k] for k in ("omega0", "omega_plus", "sup_omega_deviation", "modulation_l1",
                                           "max_constraint_ratio", "norm_drift", "exit_time")})


def cmd_sweep(run: Run, f: dict) -> None:
    from .standing_wave import ground_state

    pot = run.config.potential()
    E0, _, _ = ground_state(pot)
    cells = []
    for factor in f["omega_factors"]:
        for eps in f["epsilons"]:
            tag = f"cell_w{factor:.6g}_e{eps:.6g}/"
            s = _stability_cell(run, {**f, "no_snapshots": True}, pot, factor * E0, eps, prefix=tag)
            cells.append({"omega_factor": factor, "omega0": factor * E0, "epsilon": eps,
                          "report": tag + "report.json", "exit_time": s["exit_time"],
                          "omega_plus": s["omega_plus"], "sup_omega_deviation": s["sup_omega_deviation"],
                          "modulation_l1": s["modulation_l1"], "max_constraint_ratio": s["max_constraint_ratio"]})
    run.json("index.json", {"E0": E0, "cells": cells})
    run.measured["cells"] = len(cells)
    run.measured["exits"] = sum(c["exit_time"] is not None for c in cells)


HANDLERS = {"jost": cmd_jost, "scatter": cmd_scatter, "classify": cmd_classify, "spectrum": cmd_spectrum,
            "resolvent": cmd_resolvent, "propagate": cmd_propagate, "decay-scan": cmd_decay_scan,
            "norms": cmd_norms, "standing-wave": cmd_standing_wave, "simulate": cmd_simulate, "sweep": cmd_sweep}


# ---------------------------------------------------------------- driver

def _clear_previous(run_dir: Path) -> None:
    """Remove the files an earlier manifest in ``run_dir`` lists, so none outlive their manifest."""
    old = run_dir / "manifest.json"
    if not old.exists():
        return
    try:
        listed = json.loads(old.read_text()).get("outputs", [])
    except (ValueError, OSError):
        return
    root = run_dir.resolve()
    for name in listed:
        p = (run_dir / name).resolve()
        if root in p.parents and p.is_file():
            p.unlink()
    old.unlink()

def run(subcommand: str, config: RunConfig, flags: dict | None = None, run_dir: str | None = None,
        threads: int | None = None) -> int:
    """Execute one subcommand; returns the process exit status."""
    flags = dict(flags or {})
    if subcommand not in HANDLERS:
        record = {"status": "error", "type": "UnknownSubcommand", "message": f"unknown subcommand {subcommand!r}",
                  "valid": list(SUBCOMMANDS)}
        sys.stderr.write(json.dumps(record) + "\n")
        return 2
    r = Run(subcommand, config, flags, run_dir)
    r.dir.mkdir(parents=True, exist_ok=True)
    _clear_previous(r.dir)
    config.save(r.path("config.ini"))
    r.outputs.append("config.ini")
    t0 = time.perf_counter()
    try:
        with threadpool_limits(limits=threads):
            HANDLERS[subcommand](r, flags)
    except Exception as exc:  # noqa: BLE001 - every failure becomes an error record
        wall = time.perf_counter() - t0
        err = {"status": "error", "subcommand": subcommand, "type": type(exc).__name__, "message": str(exc),
               "traceback": traceback.format_exc().splitlines()[-6:]}
        write_json(r.path("error.json"), err)
        r.outputs.append("error.json")
        write_json(r.path("manifest.json"), r.manifest("error", wall, err))
        sys.stderr.write(json.dumps({k: v for k, v in err.items() if k != "traceback"}) + "\n")
        return 2 if isinstance(exc, CLIError) else 1
    wall = time.perf_counter() - t0
    write_json(r.path("manifest.json"), r.manifest("ok", wall))
    print(str(r.path("manifest.json")))
    return 0


class _HelpFormatter(argparse.ArgumentDefaultsHelpFormatter):
    """Show defaults, except for flags whose default is resolved from the config."""

    def _get_help_string(self, action):
        if action.default is None:
            return action.help
        return super()._get_help_string(action)


def build_parser() -> argparse.ArgumentParser:
    fmt = _HelpFormatter
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("common")
    g.add_argument("--config", help="INI file; flags given on the command line override it")
    g.add_argument("--potential", default=None,
                   help="built-in family: zero, single_site, two_site, exponential (default single_site)")
    g.add_argument("--params", default=None,
                   help="family parameters, e.g. 'value=-1' or 'c=-0.5,a=1' (default value=-1)")
    g.add_argument("--potential-file", default=None, help="file of 'n value' records")
    g.add_argument("--half-width", type=int, default=None, help="window is [-L, L] (default 512)")
    g.add_argument("--theta-grid-size", type=int, default=None, help="theta grid size (default 1024)")
    g.add_argument("--lambda-grid-size", type=int, default=None, help="lambda grid size (default 64)")
    g.add_argument("--seed", type=int, default=None, help="seed for random fields (default 0)")
    g.add_argument("--output-dir", default=None, help=f"output root (default ${OUTPUT_ENV} or ./runs)")
    g.add_argument("--run-dir", default=None, help="exact output directory (default <output-dir>/<subcommand>)")
    g.add_argument("--threads", type=int, default=None, help="cap on BLAS/LAPACK threads")

    p = _Parser(prog="dnls-lattice", description="Spectral and scattering theory of discrete Schrodinger "
                "operators and stability of DNLS standing waves.", formatter_class=fmt)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_, description=help_, formatter_class=fmt)

    s = add("jost", "Jost solutions at one theta plus the bound report")
    s.add_argument("--sign", choices=["+", "-"], default="+")
    s.add_argument("--theta", default="1.0", help="real or complex, e.g. '0.5+0.2j'")
    s.add_argument("--sigma", type=float, default=1.0)
    s.add_argument("--nu-max", type=int, default=None, help="also compute Fourier coefficients up to nu_max")

    s = add("scatter", "T, R+, R- and identity residuals on a theta grid")
    s.add_argument("--count", type=int, default=None, help="grid size (default: theta grid size)")
    s.add_argument("--theta-min", type=float, default=None, help="default -pi")
    s.add_argument("--theta-max", type=float, default=None, help="default pi")

    s = add("classify", "generic / resonant band edges")
    s.add_argument("--grid-size", type=int, default=512)

    s = add("spectrum", "eigenvalues, projectors and the limiting absorption constant")
    s.add_argument("--tau", type=float, default=1.5)
    s.add_argument("--lac-half-width", type=int, default=128)
    s.add_argument("--no-contour", action="store_true", help="skip the contour-integral P_c check")

    s = add("resolvent", "resolvent kernel at z, or boundary value at lambda +- i0")
    s.add_argument("--z", default=None, help="complex spectral parameter off [0, 4]")
    s.add_argument("--lam", type=float, default=None, help="real lambda in [0, 4]")
    s.add_argument("--side", choices=["+", "-"], default="+")
    s.add_argument("--kernel-half-width", type=int, default=16)

    s = add("propagate", "kernel of exp(sign i t H) P_c")
    s.add_argument("--t", type=float, default=10.0)
    s.add_argument("--sign", type=int, choices=[-1, 1], default=-1)
    s.add_argument("--kernel-half-width", type=int, default=32)
    s.add_argument("--check", action="store_true", help="verify the quadrature by doubling M")

    s = add("decay-scan", "sup of the propagator kernel against t")
    s.add_argument("--t-min", type=float, default=1.0)
    s.add_argument("--t-max", type=float, default=200.0)
    s.add_argument("--t-count", type=int, default=24)
    s.add_argument("--sign", type=int, choices=[-1, 1], default=1)
    s.add_argument("--fit-min", type=float, default=10.0)

    s = add("norms", "Strichartz and smoothing norms of exp(-itH) P_c f")
    s.add_argument("--field", choices=["delta", "random"], default="delta")
    s.add_argument("--t-max", type=float, default=50.0)
    s.add_argument("--dt", type=float, default=1 / 16)
    s.add_argument("--tau", type=float, default=1.5)
    s.add_argument("--pairs", default="4:inf,6:6,inf:2", help="admissible (r:p) pairs")
    s.add_argument("--skip-lap", action="store_true", help="skip the limiting absorption constant")

    s = add("standing-wave", "bifurcation branch from the ground state")
    s.add_argument("--count", type=int, default=10)
    s.add_argument("--eta", type=float, default=0.2, help="omega - E0 spans [lo eta E0, eta E0]")
    s.add_argument("--lo", type=float, default=1e-3)

    def stability_flags(s):
        s.add_argument("--shape", choices=["delta", "gaussian", "random", "file"], default="gaussian")
        s.add_argument("--width", type=float, default=3.0)
        s.add_argument("--site", type=int, default=0)
        s.add_argument("--perturbation-file", default=None, help="CSV rows n,re[,im]")
        s.add_argument("--dt", type=float, default=0.01)
        s.add_argument("--t-final", type=float, default=200.0)
        s.add_argument("--stride", type=float, default=0.25, help="output and decomposition spacing")
        s.add_argument("--order", type=int, choices=[2, 4], default=4, help="splitting order")
        s.add_argument("--eps-max", type=float, default=0.05)

    s = add("simulate", "perturbed standing wave with modulation tracking")
    s.add_argument("--omega0", type=float, default=None, help="absolute omega0 (overrides --omega-factor)")
    s.add_argument("--omega-factor", type=float, default=1.1, help="omega0 = factor * E0")
    s.add_argument("--epsilon", type=float, default=1e-3)
    stability_flags(s)

    s = add("sweep", "grid of simulate runs over (epsilon, omega0)")
    s.add_argument("--epsilons", type=float_list, default=[5e-4, 1e-3])
    s.add_argument("--omega-factors", type=float_list, default=[1.05, 1.1])
    stability_flags(s)
    return p


_COMMON = {"config", "potential", "params", "potential_file", "half_width", "theta_grid_size",
           "lambda_grid_size", "seed", "output_dir", "run_dir", "threads", "subcommand"}


def _parse_pairs(text: str) -> list[tuple[float, float]]:
    out = []
    for item in text.split(","):
        r, _, p = item.partition(":")
        out.append((float(r), float(p)))
    return out


def config_from_args(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig.default()
    if args.output_dir is None and not args.config and os.environ.get(OUTPUT_ENV):
        cfg = replace(cfg, output_dir=os.environ[OUTPUT_ENV])
    spec = cfg.potential_spec
    if args.potential_file:
        spec = PotentialSpec(spec.family, spec.params, args.potential_file)
    elif args.potential or args.params:
        family = args.potential or spec.family
        params = parse_params(args.params) if args.params is not None else (
            spec.params if family == spec.family else ())
        spec = PotentialSpec(family, params, None)
    elif spec.family == "single_site" and not spec.params and not spec.path:
        spec = PotentialSpec("single_site", (("value", -1.0),))
    window = LatticeWindow.symmetric(args.half_width) if args.half_width else None
    return cfg.with_overrides(window=window, potential_spec=spec, theta_grid_size=args.theta_grid_size,
                              lambda_grid_size=args.lambda_grid_size, seed=args.seed, output_dir=args.output_dir)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        flags = {k: v for k, v in vars(args).items() if k not in _COMMON}
        if "pairs" in flags:
            flags["pairs"] = _parse_pairs(flags["pairs"])
    except Exception as exc:  # noqa: BLE001
        sys.stderr.write(json.dumps({"status": "error", "type": type(exc).__name__, "message": str(exc)}) + "\n")
        return 2
    return run(args.subcommand, cfg, flags, args.run_dir, args.threads)


if __name__ == "__main__":
    sys.exit(main())
