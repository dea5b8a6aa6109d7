"""Command-line runner: ``hystrol <mode> --config <path> [--out <dir>] [--seed <u64>]``.

Every run writes ``report.json`` (deterministic for a fixed config and seed)
and ``manifest.json`` (config hash, versions, backend, wall time). Failures
write ``failure.json`` and exit with a code identifying the failure class.
"""
import argparse
from dataclasses import asdict
import hashlib
from importlib import metadata
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import _backend
from .adjoint import (
    default_tol_z,
    discrete_gradient,
    limit_diagnostics,
    mu_density,
    partition_times,
    reduced_gradient,
    solve_adjoint_regularized,
    verify_adjoint_identity,
)
from .config import MODES, build_problem, parse_config
from .dynamics import (
    ControlTrajectory,
    bound_audit,
    cost_eval,
    memory_energy,
    random_smooth_field,
    reg_cost_eval,
    resample_control,
    solve_state,
    solve_state_regularized,
    stop_drift,
)
from .errors import ConfigError, ConvergenceFailure, InvalidInputError, NumericalFailure, RegistryError
from .io import load_checkpoint, save_checkpoint, write_csv, write_json
from .optimizer import epsilon_continuation, minimize_regularized, stationarity_residual, value_function_scan

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_CONFIG = 2
EXIT_REGISTRY = 3
EXIT_NUMERICAL = 4
EXIT_CONVERGENCE = 5


class RunContext:
    def __init__(self, cfg, problem, opt, out, seed):
        self.cfg, self.problem, self.opt, self.out, self.seed = cfg, problem, opt, out, seed
        self.formats = set(cfg.get("output.formats"))
        self.artifacts = []

    @property
    def system(self):
        return self.problem.system

    def csv(self, name, header, columns):
        if "csv" in self.formats:
            write_csv(self.out / name, header, columns)
            self.artifacts.append(name)

    def npz(self, name, **arrays):
        if "npz" in self.formats:
            save_checkpoint(self.out / name, **arrays)
            self.artifacts.append(name)

    def rng(self, *stream):
        return np.random.default_rng([self.seed, *stream])


def initial_control(ctx, system=None):
    """Control from ``run.checkpoint`` if given, else the configured init profile."""
    system = system or ctx.system
    cfg = ctx.cfg
    if cfg.get("run.checkpoint"):
        data = load_checkpoint(cfg.get("run.checkpoint"))
        if "control" not in data or "t" not in data:
            raise InvalidInputError("checkpoint lacks 'control' or 't' arrays")
        u = ControlTrajectory(data["t"], data["control"], system.injector.weights())
        return u if np.array_equal(u.t, system.t) else resample_control(u, system.t)
    u = system.zero_control()
    amp = cfg.get("control.init_value")
    profile = np.ones_like(u.values)
    if cfg.get("control.init_profile") == "sine":
        profile *= np.sin(np.pi * system.t / system.horizon).reshape((-1,) + (1,) * (u.values.ndim - 1))
        if system.injector.kind == "distributed":
            grid = system.op.grid
            profile *= np.sin(np.pi * grid.nodes / grid.length)
    if system.injector.kind == "distributed":
        profile = np.where(system.mask, profile, 0.0)
    return u.like(amp * profile)


def random_control(system, rng):
    """Seeded smooth control direction on the active control support."""
    t = system.t
    if system.injector.kind == "distributed":
        grid = system.op.grid
        field = random_smooth_field(t, grid.nodes, grid.m, rng)
        return system.zero_control().like(np.where(system.mask, field, 0.0))
    k = system.injector.snapshot_shape[0]
    field = random_smooth_field(t, np.zeros(1), k, rng)[:, :, 0]
    return system.zero_control().like(field)


def _export_state(ctx, state, stem="trajectory"):
    ctx.csv(f"{stem}.csv", ["t", "Sy", "z"], [state.t, state.Sy, state.z.values])
    grid = ctx.system.op.grid
    header, cols = ["x"], [grid.nodes]
    for tau in ctx.cfg.get("output.sample_times"):
        k = int(np.clip(round(tau / ctx.system.dt), 0, ctx.system.steps))
        for j in range(grid.m):
            header.append(f"y{j}_t{state.t[k]:.6g}")
            cols.append(state.y[k, j])
    ctx.csv(f"{stem}_snapshots.csv", header, cols)


def _state_summary(state, ctx):
    return {
        "steps": ctx.system.steps,
        "sup_abs_y": float(np.max(np.abs(state.y))),
        "sup_abs_Sy": float(np.max(np.abs(state.Sy))),
        "z_min": float(np.min(state.z.values)),
        "z_max": float(np.max(state.z.values)),
        "tracking_cost": cost_eval(state, ctx.system.zero_control(), ctx.problem.target, ctx.problem.kappa, ctx.system),
    }


def run_solve_forward(ctx):
    u = initial_control(ctx)
    state = solve_state(u, ctx.system)
    _export_state(ctx, state)
    return {"summary": _state_summary(state, ctx), "control_norm": u.norm()}, None


def run_solve_regularized(ctx):
    eps = ctx.cfg.get("run.epsilon")
    u = initial_control(ctx)
    state = solve_state_regularized(u, ctx.system, eps)
    _export_state(ctx, state)
    energy, scaled_peak, peak = memory_energy(state, ctx.system.penalty, eps)
    states = [solve_state_regularized(u, ctx.system, e) for e in ctx.cfg.get("run.eps")]
    audit = bound_audit(states, u, ctx.system)
    return {
        "eps": eps,
        "summary": _state_summary(state, ctx),
        "memory_energy": energy,
        "penalty_peak_over_eps": scaled_peak,
        "penalty_peak": peak,
        "stop_drift": stop_drift(state, ctx.system),
        "bound_audit": asdict(audit),
    }, None


def run_adjoint_check(ctx):
    eps = ctx.cfg.get("run.epsilon")
    samples = ctx.cfg.get("run.samples")
    levels = {}
    for label, system in (("full", ctx.system), ("half", ctx.system.with_steps(max(ctx.system.steps // 2, 1)))):
        u = initial_control(ctx, system)
        base = solve_state_regularized(u, system, eps)
        grid = system.op.grid
        res = []
        for k in range(samples):
            rng = ctx.rng(1, k)
            h = random_control(system, rng)
            nu = np.where(system.mask, random_smooth_field(system.t, grid.nodes, grid.m, rng), 0.0)
            r, left, right = verify_adjoint_identity(u, system, eps, h, nu, base=base)
            res.append({"sample": k, "residual": r, "left": left, "right": right})
        levels[label] = {"steps": system.steps, "pairs": res, "max_residual": max(p["residual"] for p in res)}
    ratios = [h["residual"] / max(f["residual"], 1e-300) for f, h in zip(levels["full"]["pairs"], levels["half"]["pairs"])]
    return {
        "eps": eps,
        "seed": ctx.seed,
        "levels": levels,
        "refinement_ratios": ratios,
        "min_refinement_ratio": min(ratios),
        "max_ratio": levels["half"]["max_residual"] / max(levels["full"]["max_residual"], 1e-300),
    }, None


def run_gradient_check(ctx):
    eps = ctx.cfg.get("run.epsilon")
    kappa = ctx.problem.kappa
    lam0 = ctx.cfg.get("run.fd_step")
    levels = {}
    for label, problem in (("full", ctx.problem), ("double", ctx.problem.with_steps(2 * ctx.system.steps))):
        system = problem.system
        u = initial_control(ctx, system)
        ref = system.zero_control()
        cont = reduced_gradient(u, system, eps, problem.target, kappa, ref).gradient
        disc = discrete_gradient(u, system, eps, problem.target, kappa, ref).gradient

        def cost(v):
            return reg_cost_eval(solve_state_regularized(v, system, eps), v, problem.target, kappa, ref, system)

        rows = []
        for k in range(ctx.cfg.get("run.samples")):
            h = random_control(system, ctx.rng(2, k))
            lam = lam0 * max(u.norm(), 1.0) / h.norm()
            fd = (cost(u + lam * h) - cost(u - lam * h)) / (2 * lam)
            rows.append({
                "direction": k,
                "finite_difference": fd,
                "reduced": cont.inner(h),
                "discrete": disc.inner(h),
                "reduced_mismatch": abs(cont.inner(h) - fd) / max(abs(fd), 1e-300),
                "discrete_mismatch": abs(disc.inner(h) - fd) / max(abs(fd), 1e-300),
            })
        levels[label] = {
            "steps": system.steps,
            "directions": rows,
            "max_reduced_mismatch": max(r["reduced_mismatch"] for r in rows),
            "max_discrete_mismatch": max(r["discrete_mismatch"] for r in rows),
        }
    return {
        "eps": eps,
        "seed": ctx.seed,
        "levels": levels,
        "improves_under_refinement": levels["double"]["max_reduced_mismatch"] < levels["full"]["max_reduced_mismatch"],
    }, None


def run_optimize(ctx):
    eps = ctx.cfg.get("run.epsilon")
    u0 = initial_control(ctx)
    res = minimize_regularized(eps, u0, u0, ctx.opt, ctx.problem, prox_weight=0.0)
    _export_state(ctx, res.state)
    ctx.npz("checkpoint.npz", t=res.control.t, control=res.control.values, eps=np.array(eps))
    report = {
        "eps": eps,
        "value": res.value,
        "converged": res.converged,
        "iterations": res.iterations,
        "stationarity": res.stationarity,
        "message": res.message,
        "history": res.history,
        "control_norm": res.control.norm(),
        "summary": _state_summary(res.state, ctx),
    }
    failure = None if res.converged else ConvergenceFailure(f"optimizer stopped: {res.message}")
    return report, failure


def _continuation(ctx):
    rep = epsilon_continuation(ctx.opt, ctx.problem, init=initial_control(ctx))
    _export_state(ctx, rep.limit_state)
    ctx.npz("checkpoint.npz", t=rep.limit_control.t, control=rep.limit_control.values,
            eps=np.array(ctx.opt.eps_schedule[-1]))
    return rep


def _continuation_report(ctx, rep):
    summary = rep.summary()
    states = [solve_state_regularized(rep.limit_control, ctx.system, e) for e in ctx.opt.eps_schedule]
    summary["bound_audit"] = asdict(bound_audit(states, rep.limit_control, ctx.system))
    summary["limit_control_norm"] = rep.limit_control.norm()
    summary["limit_stop_drift"] = stop_drift(rep.limit_state, ctx.system)
    return summary


def run_continuation(ctx):
    rep = _continuation(ctx)
    failure = None if rep.limit_converged else ConvergenceFailure("continuation limit did not converge")
    return _continuation_report(ctx, rep), failure


def run_limit_diagnostics(ctx):
    diag_eps = ctx.cfg.get("run.diag_eps")
    missing = [e for e in diag_eps if e not in ctx.opt.eps_schedule]
    if missing:
        raise ConfigError(f"run.diag_eps values {missing} are not in run.eps", ctx.cfg.lines.get("run.diag_eps"))
    rep = _continuation(ctx)
    system, target = ctx.system, ctx.problem.target
    states = [rep.states[rep.eps.index(e)] for e in diag_eps]
    adjoints = [solve_adjoint_regularized(st, system, e, st.y - target) for st, e in zip(states, diag_eps)]
    exact = solve_state(rep.limit_control, system)
    partition = partition_times(exact.z, system.bounds, default_tol_z(0.0, exact.Sy, system.t))
    limit_diagnostics(states, adjoints, system, partition)
    dens = mu_density(adjoints[-1], states[-1], system, diag_eps[-1], partition)
    ctx.csv("limit_adjoint.csv", ["t", "q", "mu_density", "label"],
            [system.t, adjoints[-1].q.values, dens.density, partition.labels])
    report = _continuation_report(ctx, rep)
    report["partition"] = partition.as_dict()
    report["mu_interval_integrals"] = dens.interval_integrals
    report["stationarity_at_smallest_eps"] = stationarity_residual(
        rep.limit_control, ctx.problem, diag_eps[-1], ctx.opt.grad_floor)
    return report, None


def run_value_scan(ctx):
    if not ctx.problem.boxed:
        raise ConfigError("value-scan needs control.lower and control.upper")
    rep = _continuation(ctx)
    system = ctx.system
    direction = system.zero_control()
    ones = np.ones_like(direction.values)
    if system.injector.kind == "distributed":
        ones = np.where(system.mask, ones, 0.0)
    direction = direction.like(ones)
    direction = direction * (1.0 / direction.norm())
    perts = [direction * m for m in ctx.cfg.get("run.scan_magnitudes")]
    scan = value_function_scan(perts, ctx.opt, ctx.problem, init=rep.limit_control)
    ctx.csv("value_scan.csv", ["index", "r_norm", "value", "minimizer_norm"],
            list(zip(*scan.as_rows())) if scan.entries else [[], [], [], []])
    report = {
        "entries": [asdict(e) for e in scan.entries],
        "empirical_modulus": scan.empirical_modulus,
        "gradient_lipschitz": scan.local_lipschitz,
        "consecutive_jumps": scan.consecutive_jumps,
        "jump_free": scan.jump_free,
        "gradient_consistent": scan.gradient_consistent,
        "unperturbed_value": rep.limit_cost,
    }
    zero = [e for e, m in zip(scan.entries, ctx.cfg.get("run.scan_magnitudes")) if m == 0.0 and not e.failed]
    if zero:
        gap = abs(zero[0].value - rep.limit_cost) / max(abs(rep.limit_cost), 1e-300)
        report["zero_shift_relative_gap"] = gap
        report["zero_shift_reproduces"] = gap <= ctx.opt.grad_tol
    failure = None
    if not all(e.converged for e in scan.entries):
        failure = ConvergenceFailure("a value-scan sample did not converge")
    return report, failure


PIPELINES = {
    "solve-forward": run_solve_forward,
    "solve-regularized": run_solve_regularized,
    "adjoint-check": run_adjoint_check,
    "gradient-check": run_gradient_check,
    "optimize": run_optimize,
    "continuation": run_continuation,
    "limit-diagnostics": run_limit_diagnostics,
    "value-scan": run_value_scan,
}
assert set(PIPELINES) == set(MODES)


def _u64(text):
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser():
    parser = argparse.ArgumentParser(prog="hystrol", description=__doc__.splitlines()[0])
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", required=True, help="key = value experiment file")
    parser.add_argument("--out", help="output directory (default: output.dir from the config)")
    parser.add_argument("--seed", type=_u64, help="seed for randomized checks (overrides run.seed)")
    return parser


def _classify(exc):
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG, {"kind": "config", "line": exc.line, "column": exc.column, "message": exc.message}
    if isinstance(exc, RegistryError):
        return EXIT_REGISTRY, {"kind": "registry", "line": exc.line, "message": exc.message}
    if isinstance(exc, KeyError):
        return EXIT_REGISTRY, {"kind": "registry", "message": str(exc.args[0]) if exc.args else ""}
    if isinstance(exc, NumericalFailure):
        return EXIT_NUMERICAL, {"kind": "numerical", "step": exc.step, "message": str(exc)}
    if isinstance(exc, ConvergenceFailure):
        return EXIT_CONVERGENCE, {"kind": "convergence", "message": str(exc)}
    if isinstance(exc, OSError):
        return EXIT_CONFIG, {"kind": "io", "message": str(exc)}
    return EXIT_OTHER, {"kind": type(exc).__name__, "message": str(exc)}


def _versions():
    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return {"python": platform.python_version(), "numpy": np.__version__, "hystrol": pkg}


def run(mode, config_path, out=None, seed=None):
    """Execute one pipeline; returns the exit status. Never raises for pipeline failures."""
    started = time.perf_counter()
    out_dir = Path(out) if out else None
    manifest = {"mode": mode, "config_path": str(config_path), "config_sha256": None,
                "backend": _backend.NAME, "versions": _versions(), "seed": seed}
    status, failure, ctx = EXIT_OK, None, None
    try:
        raw = Path(config_path).read_bytes()
        manifest["config_sha256"] = hashlib.sha256(raw).hexdigest()
        cfg = parse_config(raw.decode("utf-8"))
        out_dir = out_dir or Path(cfg.get("output.dir"))
        out_dir.mkdir(parents=True, exist_ok=True)
        seed = cfg.get("run.seed") if seed is None else seed
        manifest["seed"] = seed
        problem, opt = build_problem(cfg)
        ctx = RunContext(cfg, problem, opt, out_dir, seed)
        report, soft_failure = PIPELINES[mode](ctx)
        report = {"mode": mode, **report}
        write_json(out_dir / "report.json", report)
        ctx.artifacts.append("report.json")
        if soft_failure is not None:
            raise soft_failure
    except Exception as exc:  # every failure becomes a structured record
        status, failure = _classify(exc)
        if isinstance(exc, InvalidInputError) and status == EXIT_OTHER:
            status, failure = EXIT_CONFIG, {"kind": "invalid-input", "message": str(exc)}
    out_dir = out_dir or Path("out")
    out_dir.mkdir(parents=True, exist_ok=True)
    if failure is not None:
        write_json(out_dir / "failure.json", {"status": "error", "exit_code": status, "mode": mode, **failure})
        print(f"hystrol {mode}: {failure['kind']} error: {failure['message']}", file=sys.stderr)
    manifest["exit_code"] = status
    manifest["artifacts"] = sorted(ctx.artifacts) if ctx else []
    manifest["wall_time_s"] = time.perf_counter() - started
    write_json(out_dir / "manifest.json", manifest)
    if status == EXIT_OK:
        print(f"hystrol {mode}: ok, artifacts in {out_dir}")
    return status


def main(argv=None):
    args = build_parser().parse_args(argv)
    return run(args.mode, args.config, args.out, args.seed)


if __name__ == "__main__":
    sys.exit(main())
