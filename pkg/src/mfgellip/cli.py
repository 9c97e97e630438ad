"""Batch front door: ``solve``, ``verify``, ``sweep`` and ``selftest``.

Configuration files are TOML.  A minimal strictly elliptic example::

    [problem]
    d = 1
    T = 1.0

    [problem.hamiltonian]
    M = [[1.0]]
    V = { modes = [ { k = [1], cos = 0.1 } ] }

    [problem.coupling]
    family = "PowerLog"
    a = 1.0
    b_log = 1.0

    [problem.initial]
    m0 = { constant = 1.0, modes = [ { k = [1], cos = 0.3 } ] }

    [grid]
    nx = 64
    nt = 32

Exit codes: 0 success, 1 failed verification or self-test, 2 solver
stalled, 3 configuration or input error.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from . import diagnostics as diag
from . import grid as gr
from . import model
from . import solver as sv

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("mfgellip")

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_STALLED = 2
EXIT_CONFIG = 3


class ConfigError(ValueError):
    """Configuration problem; the message names the offending field."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass
class DiagnosticsConfig:
    tol_factor: float = 10.0
    hj_tol: float = 1e-8
    fp_tol: float | None = None
    energy_tol: float | None = None
    calibrate: bool = True


@dataclass
class OutputConfig:
    directory: str = "out"
    plots: bool = True


@dataclass
class RunConfig:
    spec: model.ProblemSpec
    grid: gr.GridSpec
    newton: sv.NewtonSettings = field(default_factory=sv.NewtonSettings)
    continuation: sv.ContinuationSettings = field(default_factory=sv.ContinuationSettings)
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    sweep_epsilons: list[float] | None = None


def _take(table: dict, path: str, allowed: set[str]) -> dict:
    if not isinstance(table, dict):
        raise ConfigError(f"{path}: expected a table")
    extra = set(table) - allowed
    if extra:
        raise ConfigError(f"{path}: unknown key(s) {sorted(extra)}")
    return table


def _number(table: dict, key: str, path: str, default=None, kind=float):
    if key not in table:
        if default is None:
            raise ConfigError(f"{path}.{key}: required")
        return default
    v = table[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number, got {v!r}")
    if kind is int:
        if isinstance(v, float) and not v.is_integer():
            raise ConfigError(f"{path}.{key}: expected an integer, got {v!r}")
        return int(v)
    return float(v)


def _trig(value, path: str, d: int) -> model.TrigPoly:
    if value is None:
        return model.TrigPoly()
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return model.TrigPoly(float(value))
    _take(value, path, {"constant", "modes"})
    modes = []
    for n, mode in enumerate(value.get("modes", [])):
        mp = f"{path}.modes[{n}]"
        _take(mode, mp, {"k", "cos", "sin"})
        k = mode.get("k")
        if not isinstance(k, list) or len(k) != d or not all(isinstance(v, int) for v in k):
            raise ConfigError(f"{mp}.k: expected {d} integer(s), got {k!r}")
        modes.append((tuple(k), _number(mode, "cos", mp, 0.0), _number(mode, "sin", mp, 0.0)))
    try:
        return model.TrigPoly(_number(value, "constant", path, 0.0), tuple(modes))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _settings(cls, table: dict, path: str):
    names = {f.name for f in fields(cls)}
    _take(table, path, names)
    kw = {}
    for f in fields(cls):
        if f.name in table:
            kind = int if f.type in ("int", int) else float
            kw[f.name] = _number(table, f.name, path, kind=kind)
    try:
        return cls(**kw)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def parse_config(data: dict) -> RunConfig:
    _take(data, "<root>", {"problem", "grid", "solver", "diagnostics", "output", "sweep"})
    prob = _take(data.get("problem", {}), "problem", {"d", "T", "hamiltonian", "coupling", "terminal", "initial"})
    d = _number(prob, "d", "problem", 1, int)
    T = _number(prob, "T", "problem", 1.0)
    if d not in (1, 2):
        raise ConfigError(f"problem.d: must be 1 or 2, got {d}")

    h = _take(prob.get("hamiltonian", {}), "problem.hamiltonian", {"M", "V", "C0", "tau"})
    M = h.get("M", np.eye(d).tolist())
    try:
        Mx = np.array(M, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"problem.hamiltonian.M: not a numeric matrix: {M!r}") from None
    if Mx.shape != (d, d):
        raise ConfigError(f"problem.hamiltonian.M: expected a {d}x{d} matrix")
    if not np.allclose(Mx, Mx.T) or np.linalg.eigvalsh(0.5 * (Mx + Mx.T)).min() <= 0:
        raise ConfigError("problem.hamiltonian.M: must be symmetric positive definite")
    ham = model.HamiltonianSpec(
        M=Mx,
        V=_trig(h.get("V"), "problem.hamiltonian.V", d),
        C0=_number(h, "C0", "problem.hamiltonian", 10.0),
        tau=_number(h, "tau", "problem.hamiltonian", 0.0),
    )

    c = _take(prob.get("coupling", {}), "problem.coupling", {"family", "a", "theta_exp", "b_log", "F"})
    try:
        coup = model.CouplingSpec(
            family=str(c.get("family", "Log")),
            a=_number(c, "a", "problem.coupling", 0.0),
            theta_exp=_number(c, "theta_exp", "problem.coupling", 1.0),
            b_log=_number(c, "b_log", "problem.coupling", 0.0 if c.get("family") in ("Power", "Linear") else 1.0),
            F=_trig(c.get("F"), "problem.coupling.F", d),
        )
    except ValueError as exc:
        raise ConfigError(f"problem.coupling: {exc}") from None

    t = _take(prob.get("terminal", {}), "problem.terminal", {"c", "kappa", "e", "G"})
    try:
        term = model.TerminalSpec(
            c=_number(t, "c", "problem.terminal", 1.0),
            kappa=_number(t, "kappa", "problem.terminal", 1.0),
            e=_number(t, "e", "problem.terminal", 0.0),
            G=_trig(t.get("G"), "problem.terminal.G", d),
        )
    except ValueError as exc:
        raise ConfigError(f"problem.terminal: {exc}") from None

    i = _take(prob.get("initial", {}), "problem.initial", {"m0", "normalize"})
    m0 = _trig(i.get("m0", 1.0), "problem.initial.m0", d)
    try:
        init = model.InitialDensitySpec.normalized(m0) if i.get("normalize", False) else model.InitialDensitySpec(m0)
        spec = model.ProblemSpec(ham, coup, term, init, T=T, d=d)
    except ValueError as exc:
        raise ConfigError(f"problem: {exc}") from None

    g = _take(data.get("grid", {}), "grid", {"nx", "nt"})
    try:
        grid = gr.GridSpec(d, _number(g, "nx", "grid", 32, int), _number(g, "nt", "grid", 16, int), T)
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None

    s = _take(data.get("solver", {}), "solver", {"newton", "continuation"})
    newton = _settings(sv.NewtonSettings, s.get("newton", {}), "solver.newton")
    cont = _settings(sv.ContinuationSettings, s.get("continuation", {}), "solver.continuation")

    dg = _take(data.get("diagnostics", {}), "diagnostics", {f.name for f in fields(DiagnosticsConfig)})
    dcfg = DiagnosticsConfig(
        tol_factor=_number(dg, "tol_factor", "diagnostics", 10.0),
        hj_tol=_number(dg, "hj_tol", "diagnostics", 1e-8),
        fp_tol=_number(dg, "fp_tol", "diagnostics") if "fp_tol" in dg else None,
        energy_tol=_number(dg, "energy_tol", "diagnostics") if "energy_tol" in dg else None,
        calibrate=bool(dg.get("calibrate", True)),
    )
    o = _take(data.get("output", {}), "output", {"directory", "plots"})
    out = OutputConfig(str(o.get("directory", "out")), bool(o.get("plots", True)))

    sw = _take(data.get("sweep", {}), "sweep", {"epsilons"})
    eps = sw.get("epsilons")
    if eps is not None:
        if not isinstance(eps, list) or not eps or any(isinstance(e, bool) or not isinstance(e, (int, float)) or e <= 0 for e in eps):
            raise ConfigError("sweep.epsilons: expected a non-empty list of positive numbers")
        eps = [float(e) for e in eps]
    return RunConfig(spec, grid, newton, cont, dcfg, out, eps)


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    try:
        return parse_config(data)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _say(args, *msg):
    if not getattr(args, "quiet", False):
        print(*msg)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(diag._jsonable(payload), indent=2, sort_keys=False) + "\n")


def _bound_tolerance(cfg: RunConfig, u: gr.SpaceTimeField, epsilon: float) -> tuple[float, str]:
    """10x the Richardson error estimate from a half-resolution solve."""
    g = cfg.grid
    if not cfg.diagnostics.calibrate or g.nx < 16 or g.nt < 8 or g.nx % 2 or g.nt % 2:
        return 1e-6, "fixed"
    coarse = g.coarsened()
    cont = cfg.continuation
    rep = sv.continuation_solve(cfg.spec, coarse, cfg.newton, cont)
    if not rep.converged:
        return 1e-6, "fixed (coarse solve failed)"
    U = rep.u.values
    if rep.epsilon != epsilon:
        # land on the fine grid's final epsilon
        r = sv.newton_solve(cfg.spec, coarse, U, cfg.newton, epsilon)
        if not r.converged:
            return 1e-6, "fixed (coarse solve failed)"
        U = r.U
    err = diag.refinement_error(U, coarse, u, g)
    return diag.calibrated_tolerance(err, cfg.diagnostics.tol_factor), f"calibrated from {coarse.nx}x{coarse.nt}"


def scheme_residual_entry(spec, grid, u, epsilon, newton: sv.NewtonSettings) -> diag.DiagnosticEntry:
    try:
        F, J = sv.assemble_residual_and_jacobian(spec, grid, u.values, epsilon)
    except model.DomainError as exc:
        return diag.DiagnosticEntry("scheme-residual", None, passed=False, note=str(exc))
    tol = max(100 * newton.abs_tol, 10 * sv.roundoff_floor(J, u.values.ravel()))
    r = float(np.abs(F).max())
    return diag.DiagnosticEntry("scheme-residual", r, 0.0, tol, r <= tol)


def density_consistency_entry(spec, u, m, epsilon, tol: float = 1e-8) -> diag.DiagnosticEntry:
    try:
        rec = diag.recover_density(spec, u, epsilon)
    except model.DomainError as exc:
        return diag.DiagnosticEntry("density-consistency", None, passed=False, note=str(exc))
    err = float(np.abs(rec.values - m.values).max() / max(1.0, np.abs(m.values).max()))
    return diag.DiagnosticEntry("density-consistency", err, 0.0, tol, err <= tol)


def full_diagnostics(cfg: RunConfig, u, m, epsilon: float, sequence=None) -> tuple[diag.DiagnosticsReport, str]:
    tol, how = _bound_tolerance(cfg, u, epsilon)
    dc = cfg.diagnostics
    rep = diag.run_diagnostics(cfg.spec, u, m, epsilon, tol, dc.hj_tol, dc.fp_tol, dc.energy_tol, sequence)
    rep.add(scheme_residual_entry(cfg.spec, cfg.grid, u, epsilon, cfg.newton))
    rep.add(density_consistency_entry(cfg.spec, u, m, epsilon, dc.hj_tol))
    return rep, how


def _slices_csv(path: Path, grid: gr.GridSpec, u, m) -> None:
    pts = grid.space_points().reshape(-1, grid.d)
    names = ["x"] if grid.d == 1 else ["x1", "x2"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["u_0", "u_T", "m_0", "m_T"])
        cols = [u[0].ravel(), u[-1].ravel(), m[0].ravel(), m[-1].ravel()]
        for k, x in enumerate(pts):
            w.writerow([repr(float(v)) for v in x] + [repr(float(c[k])) for c in cols])


def _history_csv(path: Path, report: sv.SolveReport) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "theta", "epsilon", "newton_iters", "final_residual", "accepted"])
        for n, e in enumerate(report.path):
            w.writerow([n, e.theta, e.epsilon, e.newton_iters, e.final_residual, int(e.accepted)])
    if report.epsilon_sequence:
        with open(path.with_name("epsilon_history.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epsilon", "cauchy_increment"])
            for e in report.epsilon_sequence:
                w.writerow([e.epsilon, "" if e.cauchy_increment is None else e.cauchy_increment])


def write_plots(out: Path, grid: gr.GridSpec, u: np.ndarray, m: np.ndarray, report: sv.SolveReport) -> list[str]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = []
    if grid.d == 1:
        x = grid.space_points()[..., 0]
        for name, field_ in (("u", u), ("m", m)):
            fig, ax = plt.subplots(figsize=(5, 3.5))
            ax.plot(x, field_[0], label=f"{name}(x, 0)")
            ax.plot(x, field_[-1], label=f"{name}(x, T)")
            ax.set_xlabel("x")
            ax.legend()
            fig.tight_layout()
            fig.savefig(out / f"{name}_slices.svg")
            plt.close(fig)
            written.append(f"{name}_slices.svg")
    for name, field_ in (("u", u), ("m", m)):
        img = field_ if grid.d == 1 else field_[-1]
        fig, ax = plt.subplots(figsize=(5, 3.5))
        extent = [0, 1, 0, grid.T] if grid.d == 1 else [0, 1, 0, 1]
        im = ax.imshow(img, origin="lower", aspect="auto", extent=extent)
        ax.set_xlabel("x" if grid.d == 1 else "x2")
        ax.set_ylabel("t" if grid.d == 1 else "x1")
        fig.colorbar(im, ax=ax, label=name if grid.d == 1 else f"{name}(., T)")
        fig.tight_layout()
        fig.savefig(out / f"{name}_heatmap.svg")
        plt.close(fig)
        written.append(f"{name}_heatmap.svg")

    fig, ax = plt.subplots(figsize=(5, 3.5))
    res = [e.final_residual for e in report.path]
    ax.semilogy(range(len(res)), np.maximum(res, 1e-300), "o-", label="final Newton residual")
    if report.epsilon_sequence[1:]:
        inc = [e.cauchy_increment for e in report.epsilon_sequence[1:]]
        ax.semilogy(range(len(res) - len(inc), len(res)), inc, "s-", label="Cauchy increment")
    ax.set_xlabel("continuation step")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "convergence.svg")
    plt.close(fig)
    written.append("convergence.svg")
    return written


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_solve(args) -> int:
    out = Path(args.out) if args.out else None
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        if out:
            out.mkdir(parents=True, exist_ok=True)
            _write_json(out / "report.json", {"status": "config_error", "error": str(exc)})
        return EXIT_CONFIG
    out = out or Path(cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    validation = model.validate_assumptions(cfg.spec)
    t0 = time.perf_counter()
    report = sv.continuation_solve(cfg.spec, cfg.grid, cfg.newton, cfg.continuation)
    elapsed = time.perf_counter() - t0
    payload: dict[str, Any] = {
        "status": report.status,
        "solve": report.to_dict(),
        "elapsed_seconds": elapsed,
        "assumptions": [vars(c) for c in validation.checks],
    }
    if not report.converged:
        payload["error"] = report.message
        _write_json(out / "report.json", payload)
        print(f"solve {report.status}: {report.message}", file=sys.stderr)
        return EXIT_CONFIG if report.status == "domain_failure" else EXIT_STALLED

    u, m = report.u, report.m
    gr.write_fields_csv(out / "solution.csv", cfg.grid, u=u.values, m=m.values)
    seq = report.epsilon_sequence or None
    drep, how = full_diagnostics(cfg, u, m, report.epsilon, seq)
    payload["diagnostics"] = drep.to_dict()
    payload["diagnostics"]["tolerance_source"] = how
    _slices_csv(out / "slices.csv", cfg.grid, u.values, m.values)
    _history_csv(out / "history.csv", report)
    if cfg.output.plots:
        payload["plots"] = write_plots(out, cfg.grid, u.values, m.values, report)
    _write_json(out / "report.json", payload)

    _say(args, f"converged in {report.total_newton_iterations} Newton iterations ({elapsed:.2f} s), epsilon={report.epsilon:g}")
    for w in report.warnings:
        _say(args, f"warning: {w}")
    _print_entries(args, drep)
    return EXIT_OK


def _print_entries(args, drep: diag.DiagnosticsReport) -> None:
    for e in drep.entries:
        flag = {True: "pass", False: "FAIL", None: "info"}[e.passed]
        _say(args, f"  [{flag}] {e.check}: {_short(e.value)}" + (f" (tol {e.tol:.3g})" if e.tol is not None else ""))


def _short(v) -> str:
    if isinstance(v, list):
        return "[" + ", ".join(_short(x) for x in v[:6]) + (", ..." if len(v) > 6 else "") + "]"
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def _epsilon_for(csv_path: Path, override: float | None) -> float:
    if override is not None:
        return override
    rep = csv_path.with_name("report.json")
    if rep.exists():
        try:
            return float(json.loads(rep.read_text())["solve"]["epsilon"])
        except (KeyError, ValueError, TypeError):
            pass
    return 0.0


def cmd_verify(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    path = Path(args.csv)
    try:
        data = gr.read_fields_csv(path, cfg.grid)
    except (OSError, ValueError) as exc:
        print(f"input mismatch: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if "u" not in data:
        print("input mismatch: solution file has no 'u' column", file=sys.stderr)
        return EXIT_CONFIG
    eps = _epsilon_for(path, args.epsilon)
    u = gr.SpaceTimeField(data["u"], cfg.grid)
    try:
        m = gr.SpaceTimeField(data["m"], cfg.grid) if "m" in data else diag.recover_density(cfg.spec, u, eps)
    except model.DomainError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    try:
        drep, how = full_diagnostics(cfg, u, m, eps)
    except model.DomainError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    out = Path(args.out) if args.out else path.parent
    out.mkdir(parents=True, exist_ok=True)
    payload = {"status": "verified" if drep.ok else "failed", "epsilon": eps, "diagnostics": drep.to_dict()}
    payload["diagnostics"]["tolerance_source"] = how
    _write_json(out / "verify_report.json", payload)
    _print_entries(args, drep)
    if not drep.ok:
        names = ", ".join(e.check for e in drep.failures())
        print(f"verification failed: {names}", file=sys.stderr)
        return EXIT_FAIL
    _say(args, "verification passed")
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out or cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    grid, spec = cfg.grid, cfg.spec
    rows = []
    if cfg.sweep_epsilons:
        prev_u, prev_m = None, None
        for eps in cfg.sweep_epsilons:
            if prev_u is None:
                rep = sv.continuation_solve(spec.with_viscosity(eps), grid, cfg.newton, cfg.continuation, epsilon_phase=False)
                ok, U = rep.converged, (rep.u.values if rep.converged else None)
            else:
                r = sv.newton_solve(spec, grid, prev_u, cfg.newton, eps)
                ok, U = r.converged, r.U
            if not ok:
                print(f"sweep stalled at epsilon={eps:g}", file=sys.stderr)
                return EXIT_STALLED
            m = sv.density_from_u(spec, grid, U, eps)
            inc = None if prev_m is None else math.sqrt(gr.integrate((m - prev_m) ** 2, grid))
            rows.append(_sweep_row(spec, grid, eps, U.reshape(grid.shape), m, inc))
            prev_u, prev_m = U, m
    else:
        rep = sv.continuation_solve(spec, grid, cfg.newton, cfg.continuation, epsilon_phase=True)
        if not rep.converged:
            print(f"sweep {rep.status}: {rep.message}", file=sys.stderr)
            return EXIT_STALLED
        for e in rep.epsilon_sequence:
            rows.append(_sweep_row(spec, grid, e.epsilon, e.u, e.m, e.cauchy_increment))
    header = ["epsilon", "cauchy_increment", "max_grad", "energy_residual", "mass_drift", "min_m"]
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    _say(args, "  ".join(f"{h:>16}" for h in header))
    for r in rows:
        _say(args, "  ".join(f"{'-' if v is None else format(v, '.6g'):>16}" for v in r))
    return EXIT_OK


def _sweep_row(spec, grid, eps, u, m, inc):
    fp = diag.fp_residual(spec, u, m, grid)
    return [
        eps,
        inc,
        diag.max_gradient_norm(u, grid),
        diag.energy_identity_residual(spec, u, m, eps, grid),
        fp.mass_drift,
        float(np.min(m)),
    ]


def cmd_selftest(args) -> int:
    from . import selftest

    results = selftest.run_all()
    width = max(len(r.name) for r in results)
    for r in results:
        _say(args, f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL'}  {r.detail}")
    ok = all(r.passed for r in results)
    _say(args, f"{sum(r.passed for r in results)}/{len(results)} checks passed")
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--quiet", action="store_true", help="suppress progress output")
    common.add_argument("--threads", type=int, metavar="N", help="cap BLAS/LAPACK threads")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    p = argparse.ArgumentParser(prog="mfgellip", description="Elliptic-reduction solver for first-order mean field games.")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("solve", parents=[common], help="solve a configured problem")
    s.add_argument("config")
    s.set_defaults(func=cmd_solve)
    v = sub.add_parser("verify", parents=[common], help="re-check a stored solution")
    v.add_argument("csv")
    v.add_argument("config")
    v.add_argument("--epsilon", type=float, help="viscosity of the stored solution (default: from report.json)")
    v.set_defaults(func=cmd_verify)
    w = sub.add_parser("sweep", parents=[common], help="epsilon study table")
    w.add_argument("config")
    w.set_defaults(func=cmd_sweep)
    t = sub.add_parser("selftest", parents=[common], help="run the built-in property checks")
    t.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    ctx = contextlib.nullcontext()
    if args.threads:
        from threadpoolctl import threadpool_limits

        ctx = threadpool_limits(limits=args.threads)
    with ctx:
        return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
