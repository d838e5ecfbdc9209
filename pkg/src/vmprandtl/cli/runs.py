"""Mode drivers. Each returns an exit code and leaves its artifacts plus a manifest in the output directory."""

from __future__ import annotations

import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .. import __version__
from ..barriers import build_barriers, sandwich_check, violation_margins
from ..cubic_roots import scaled_roots
from ..errors import ConfigError, VMPrandtlError
from ..initial_data import build_default_w0
from ..ode_separable import characteristic_roots, separable_initial_profile, shoot, threshold_scan
from ..physical_fields import decay_fit, reconstruct_uv
from ..profiles import benchmark_setup, kappa_of, validate
from ..vm_march import (GridConfig, SolutionField, StepConfig, StepLog, derivative_diagnostics,
                        field_difference, grid_difference, make_domain, march)
from . import artifacts
from .config import RunConfig

EXIT_OK, EXIT_CONFIG, EXIT_HYPOTHESIS, EXIT_SOLVER, EXIT_IO, EXIT_VERIFY, EXIT_SWEEP = range(7)
FIELD_FILE = "field.csv"


class _Failure(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _say(msg):
    print(msg, file=sys.stderr)


class Run:
    """Output directory bookkeeping shared by all modes."""

    def __init__(self, config: RunConfig, out_dir):
        self.config = config
        self.out = Path(out_dir)
        self.files = []
        self.checks = {}
        self.t0 = time.perf_counter()

    def csv(self, name, columns, rows):
        self.files.append(artifacts.write_csv(self.out / name, columns, rows))

    def columns(self, name, columns, arrays):
        self.files.append(artifacts.write_columns(self.out / name, columns, arrays))

    def json(self, name, payload):
        self.files.append(artifacts.write_json(self.out / name, payload))

    def finish(self):
        artifacts.write_manifest(self.out, self.config.echo(), __version__,
                                 round(time.perf_counter() - self.t0, 6), self.checks, self.files)


# --- shared building blocks ------------------------------------------------------------------

def _setup_and_profile(cfg: RunConfig, run: Run):
    setup = cfg.setup.build()
    report = validate(setup)
    run.json("validation.json", report.to_dict())
    run.checks["hypotheses"] = report.passed
    if not report.passed:
        raise _Failure(EXIT_HYPOTHESIS, "standing hypotheses violated: " + ", ".join(report.failed_names()))
    ini = cfg.initial
    try:
        if ini.kind == "separable":
            k = ini.alpha_param if ini.alpha_param is not None else float(kappa_of(setup, 0.0))
            profile = separable_initial_profile(k, float(setup.psi0(0.0)))
        else:
            profile = build_default_w0(setup, ini.B, tuple(ini.window))
    except VMPrandtlError as exc:
        raise _Failure(EXIT_SOLVER, f"initial data: {exc}") from None
    return setup, profile


def _grid(cfg, n_s=None):
    s = cfg.solver
    return GridConfig(int(n_s if n_s is not None else s.n_s), float(s.clustering))


def _steps(cfg):
    s = cfg.solver
    return StepConfig(dy0=s.dy0, dy_min=s.dy_min, dy_max=s.dy_max, newton_tol=float(s.newton_tol),
                      max_iter=int(s.max_iter), n_out=int(s.n_out))


def _use_numba(cfg):
    return {"auto": None, "numba": True, "numpy": False}[cfg.solver.backend]


def _solve(cfg, setup, profile, eps=None, n_s=None):
    try:
        return march(profile, setup, float(eps if eps is not None else cfg.solver.eps), _grid(cfg, n_s),
                     _steps(cfg), output_y=tuple(cfg.solver.output_y), use_numba=_use_numba(cfg))
    except VMPrandtlError as exc:
        raise _Failure(EXIT_SOLVER, f"march failed: {type(exc).__name__}: {exc}") from None


def _levels(field, cadence):
    m = field.y_levels.size
    keep = list(range(0, m, cadence))
    if keep[-1] != m - 1:
        keep.append(m - 1)
    return keep


def _write_field(run, field, cadence):
    keep = _levels(field, cadence)
    rows = []
    for k in keep:
        y = field.y_levels[k]
        psi = field.domain.psi(y)
        rows.extend((k, y, j, field.s[j], psi[j], field.w[k, j]) for j in range(field.s.size))
    run.csv(FIELD_FILE, ["level", "y", "node", "s", "psi", "w"], rows)
    if field.p is not None:
        rows = []
        for k in keep:
            rows.extend((k, field.y_levels[k], j, field.p[k, j], field.q[k, j], field.r[k, j])
                        for j in range(field.s.size))
        run.csv("diagnostics.csv", ["level", "y", "node", "p", "q", "r"], rows)
    log = field.step_log
    run.columns("steps.csv", ["y", "dy", "iterations", "residual"], [log.y, log.dy, log.iterations, log.residual])
    if "npz" in run.config.output.formats:
        path = run.out / "field.npz"
        np.savez(path, y=field.y_levels, s=field.s, w=field.w)
        run.files.append(path)


def read_field(path, cfg: RunConfig, setup, profile) -> SolutionField:
    """Rebuild a field from ``field.csv``; the grid must match the ``[solver]`` block."""
    columns, data = artifacts.read_csv(path)
    if columns != ["level", "y", "node", "s", "psi", "w"]:
        raise ConfigError(f"{path}: unexpected columns {columns}")
    domain = make_domain(setup, float(cfg.solver.eps), _grid(cfg))
    n1 = domain.s_nodes.size
    if data.shape[0] % n1:
        raise ConfigError(f"{path}: row count does not match n_s = {domain.n_s}")
    blocks = data.reshape(-1, n1, 6)
    if np.max(np.abs(blocks[0, :, 3] - domain.s_nodes)) > 1e-14:
        raise ConfigError(f"{path}: node positions do not match the [solver] grid")
    y = blocks[:, 0, 1].copy()
    w = blocks[:, :, 5].copy()
    nan = np.full_like(w, np.nan)
    return SolutionField(domain, profile, y, w, nan, np.full(y.size, np.nan), StepLog(),
                         {"eps": domain.eps, "n_s": domain.n_s, "source": str(path)})


def _diag_summary(field):
    return {name: {"passed": c.passed, "value": c.value, **c.detail} for name, c in field.checks.items()}


# --- modes ----------------------------------------------------------------------------------------

def run_solve(cfg, run):
    setup, profile = _setup_and_profile(cfg, run)
    field = _solve(cfg, setup, profile)
    derivative_diagnostics(field, setup, mu=cfg.solver.mu)
    _write_field(run, field, int(cfg.output.cadence))
    run.checks["diagnostics"] = _diag_summary(field)
    run.checks["march"] = {**field.step_log.summary(), "backend": field.meta["backend"]}
    return EXIT_OK


def run_verify(cfg, run):
    setup, profile = _setup_and_profile(cfg, run)
    bcfg = cfg.barrier
    if bcfg.field_dir is not None:
        path = Path(bcfg.field_dir) / FIELD_FILE
        if not path.is_file():
            raise _Failure(EXIT_IO, f"missing field file {path}")
        field = read_field(path, cfg, setup, profile)
    else:
        field = _solve(cfg, setup, profile)
    try:
        bset = build_barriers(profile, setup, field.eps, bcfg.mu, field=field, alpha_cap_exp=int(bcfg.alpha_cap))
    except VMPrandtlError as exc:
        raise _Failure(EXIT_VERIFY, f"barrier construction failed: {exc}") from None
    report = sandwich_check(field, bset)
    run.json("barrier_report.json", report.to_dict())
    lower, upper = violation_margins(field, bset)
    yy = np.repeat(field.y_levels, field.s.size)
    ss = np.tile(field.s, field.y_levels.size)
    run.columns("barrier_margins.csv", ["y", "s", "margin_lower", "margin_upper"], [yy, ss, lower, upper])
    run.checks["sandwich"] = {c.name: c.passed for c in report.checks}
    if not report.passed:
        for c in report.checks:
            if c.gated and not c.passed:
                where = ", ".join(f"{k}={v}" for k, v in c.location.items())
                _say(f"{c.name}: worst violation {c.worst_violation:.3e} {c.note} {where}".rstrip())
        return EXIT_VERIFY
    return EXIT_OK


def run_fields(cfg, run):
    setup, profile = _setup_and_profile(cfg, run)
    field = _solve(cfg, setup, profile)
    derivative_diagnostics(field, setup, mu=cfg.solver.mu)
    phys = reconstruct_uv(field, setup)
    keep = _levels(field, int(cfg.output.cadence))
    rows = []
    for k in keep:
        lev = phys.levels[k]
        rows.extend((k, lev.y, lev.xi[j], lev.psi[j], lev.v[j], lev.u[j]) for j in range(lev.psi.size))
    run.csv("physical.csv", ["level", "y", "xi", "psi", "v", "u"], rows)
    fits = []
    for k in keep:
        y = float(field.y_levels[k])
        try:
            f = decay_fit(phys, y, setup=setup)
            fits.append((y, f.rate, f.prefactor, f.a, f.relative_gap, f.samples, ""))
        except VMPrandtlError as exc:
            fits.append((y, math.nan, math.nan, math.nan, math.nan, 0, type(exc).__name__))
    run.csv("decay.csv", ["y", "rate", "prefactor", "a", "relative_gap", "samples", "error"], fits)
    run.checks["u_wall_max"] = float(max(abs(lev.u[0]) for lev in phys.levels))
    return EXIT_OK


def run_ode(cfg, run):
    o = cfg.ode
    try:
        sol = shoot(o.alpha_param, o.Xi, o.tol)
    except VMPrandtlError as exc:
        raise _Failure(EXIT_SOLVER, f"shooting failed: {exc}") from None
    run.columns("ode.csv", ["xi", "phi", "dphi", "d2phi"], sol.table().T)
    decaying, growing = characteristic_roots(o.alpha_param)
    summary = {"alpha_param": o.alpha_param, "shoot_value": sol.shoot_value, "monotone": sol.monotone,
               "far_residual": sol.far_residual, "far_mismatch": sol.far_mismatch,
               "sign_change_xi": sol.sign_change_xi, "xi_end": sol.xi_end,
               "slowest_decay_root": [decaying[0].real, decaying[0].imag], "growing_root": growing}
    if sol.monotone:
        summary["fitted_decay_rate"] = sol.decay_rate()
    if o.threshold_scan:
        try:
            summary["threshold"] = threshold_scan(*o.scan_range, Xi=o.Xi, tol=o.tol)
        except VMPrandtlError as exc:
            raise _Failure(EXIT_SOLVER, f"threshold scan failed: {exc}") from None
    run.json("ode_summary.json", summary)
    run.checks["monotone"] = sol.monotone
    return EXIT_OK


def sweep_row(kappa, sweep):
    """One sweep row; failures are captured in the ``error`` column."""
    row = {"parameter": kappa, "a": math.nan, "monotone": None, "decay_rate_gap": math.nan,
           "sandwich_pass": None, "error": ""}
    try:
        sol = shoot(kappa)
        row["monotone"] = sol.monotone
    except VMPrandtlError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row
    try:
        row["a"] = scaled_roots(kappa)[0]
    except VMPrandtlError as exc:
        row["error"] = type(exc).__name__
        return row
    if sol.monotone:
        row["decay_rate_gap"] = abs(sol.decay_rate() - row["a"]) / row["a"]
        if sweep.solve:
            try:
                setup = benchmark_setup(slope=kappa, Y=sweep.Y)
                profile = separable_initial_profile(kappa, 1.0)
                field = march(profile, setup, sweep.eps, GridConfig(int(sweep.n_s)))
                bset = build_barriers(profile, setup, sweep.eps, sweep.mu, field=field)
                row["sandwich_pass"] = sandwich_check(field, bset).passed
            except VMPrandtlError as exc:
                row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def run_sweep(cfg, run, workers=None):
    sw = cfg.sweep
    kappas = [float(k) for k in sw.kappas]
    if not kappas:
        raise _Failure(EXIT_CONFIG, "sweep range is empty")
    workers = int(workers if workers is not None else sw.workers)
    if workers > 1 and len(kappas) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(kappas))) as pool:
            rows = list(pool.map(sweep_row, kappas, [sw] * len(kappas)))
    else:
        rows = [sweep_row(k, sw) for k in kappas]
    rows.sort(key=lambda r: r["parameter"])
    columns = ["parameter", "a", "monotone", "decay_rate_gap", "sandwich_pass", "error"]
    run.csv("sweep.csv", columns, ([r[c] for c in columns] for r in rows))
    failed = [r for r in rows if r["error"]]
    run.checks["rows"] = len(rows)
    run.checks["failed_rows"] = len(failed)
    return EXIT_SWEEP if len(failed) == len(rows) else EXIT_OK


def run_convergence(cfg, run):
    setup, profile = _setup_and_profile(cfg, run)
    conv = cfg.convergence
    rows = []
    eps_list = sorted((float(e) for e in conv.eps_list), reverse=True)
    fields = [_solve(cfg, setup, profile, eps=e) for e in eps_list]
    prev = None
    for (ea, fa), (eb, fb) in zip(zip(eps_list, fields), zip(eps_list[1:], fields[1:])):
        d = field_difference(fa, fb, int(conv.compare_points))
        rows.append(("eps", ea, eb, d, d / prev if prev else math.nan))
        prev = d
    n_list = sorted(int(n) for n in conv.n_s_list)
    grids = [_solve(cfg, setup, profile, n_s=n) for n in n_list]
    prev = None
    for (na, ga), (nb, gb) in zip(zip(n_list, grids), zip(n_list[1:], grids[1:])):
        d = grid_difference(ga, gb)
        rows.append(("n_s", na, nb, d, d / prev if prev else math.nan))
        prev = d
    run.csv("convergence.csv", ["study", "coarse", "fine", "sup_difference", "ratio"], rows)
    ratios = [r[4] for r in rows if r[0] == "eps" and math.isfinite(r[4])]
    run.checks["eps_ratios"] = ratios
    return EXIT_OK


MODES = {"solve": run_solve, "verify": run_verify, "fields": run_fields, "ode": run_ode,
         "sweep": run_sweep, "convergence": run_convergence}


def execute(cfg: RunConfig, out_dir=None, workers=None) -> int:
    out = Path(out_dir if out_dir is not None else cfg.output.dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        _say(f"cannot create output directory: {exc}")
        return EXIT_IO
    run = Run(cfg, out)
    try:
        if cfg.mode == "sweep":
            code = run_sweep(cfg, run, workers)
        else:
            code = MODES[cfg.mode](cfg, run)
    except _Failure as exc:
        _say(str(exc))
        code = exc.code
    except ConfigError as exc:
        _say(f"configuration error: {exc}")
        code = EXIT_CONFIG
    except OSError as exc:
        _say(f"I/O error: {exc}")
        code = EXIT_IO
    run.checks["exit_code"] = code
    try:
        run.finish()
    except OSError as exc:
        _say(f"I/O error while writing the manifest: {exc}")
        return EXIT_IO
    return code
