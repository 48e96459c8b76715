"""Command-line interface: configuration, run orchestration and CSV emission.

Configuration files are TOML.  Every run writes into its own directory (a
manifest echoing the resolved configuration, the trace CSV, the constants
ledger and the verdicts); outputs are deterministic for identical
configurations, with floats printed at 17 significant digits.  The sweep
subcommand fans runs out over worker threads and merges summary rows by
sorted key.
"""

from __future__ import annotations

import argparse
import math
import os
import shutil
import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__, coefficient, discretization, dynamics, stability, statics

OUTPUT_ROOT_ENV = "DEGENBEAM_OUTPUT_ROOT"
HARDY_MESH_FINE = 512
HARDY_MESH_COARSE = 256


class ConfigError(ValueError):
    """Malformed or out-of-range run configuration."""


@dataclass(frozen=True)
class RunConfig:
    family: str = "power"
    alpha: float = 0.5
    c: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    n_elements: int = 128
    grading: float = 2.0
    dt: float = 1e-3
    t_end: float = 20.0
    snapshot_stride: int = 10
    y0: str = "bump"
    y0_amplitude: float = 1.0
    y1: str = "zero"
    y1_amplitude: float = 1.0
    delta_policy: str = "scan"
    out_dir: str = "runs"
    label: str = "run"
    sweep_alphas: tuple = (0.3, 0.7, 1.0, 1.5)
    sweep_betas: tuple = (0.0, 1.0, 2.0)
    sweep_gammas: tuple = (0.0, 1.0, 2.0)


_SCHEMA = {
    "coefficient": {"family": str, "alpha": float, "c": float},
    "boundary": {"beta": float, "gamma": float},
    "mesh": {"n_elements": int, "grading": float},
    "time": {"dt": float, "t_end": float, "snapshot_stride": int},
    "initial": {"y0": str, "y0_amplitude": float, "y1": str, "y1_amplitude": float},
    "delta": {"policy": str},
    "output": {"directory": str, "label": str},
    "sweep": {"alphas": list, "betas": list, "gammas": list},
}

_KEY_MAP = {
    ("coefficient", "family"): "family",
    ("coefficient", "alpha"): "alpha",
    ("coefficient", "c"): "c",
    ("boundary", "beta"): "beta",
    ("boundary", "gamma"): "gamma",
    ("mesh", "n_elements"): "n_elements",
    ("mesh", "grading"): "grading",
    ("time", "dt"): "dt",
    ("time", "t_end"): "t_end",
    ("time", "snapshot_stride"): "snapshot_stride",
    ("initial", "y0"): "y0",
    ("initial", "y0_amplitude"): "y0_amplitude",
    ("initial", "y1"): "y1",
    ("initial", "y1_amplitude"): "y1_amplitude",
    ("delta", "policy"): "delta_policy",
    ("output", "directory"): "out_dir",
    ("output", "label"): "label",
    ("sweep", "alphas"): "sweep_alphas",
    ("sweep", "betas"): "sweep_betas",
    ("sweep", "gammas"): "sweep_gammas",
}


def parse_config(path: str | Path) -> RunConfig:
    """Read and validate a TOML run configuration, filling defaults."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_mapping(raw, source=str(path))


def config_from_mapping(raw: dict, source: str = "<config>") -> RunConfig:
    updates: dict = {}
    for key, value in raw.items():
        spec = _SCHEMA.get(key)
        if spec is None:
            raise ConfigError(f"{source}: unknown key {key!r}")
        if isinstance(spec, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{source}: section {key!r} must be a table")
            for sub, subval in value.items():
                if sub not in spec:
                    raise ConfigError(f"{source}: unknown key {key}.{sub}")
                updates[_KEY_MAP[(key, sub)]] = _coerce(f"{key}.{sub}", subval, spec[sub], source)
        else:
            updates[_KEY_MAP[(key,)]] = _coerce(key, value, spec, source)
    cfg = replace(RunConfig(), **updates)
    _validate(cfg, source)
    return cfg


def _coerce(name, value, typ, source):
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{source}: {name} must be a number, got {value!r}")
        return float(value)
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{source}: {name} must be an integer, got {value!r}")
        return int(value)
    if typ is str:
        if not isinstance(value, str):
            raise ConfigError(f"{source}: {name} must be a string, got {value!r}")
        return value
    if typ is list:
        if not isinstance(value, list) or not all(isinstance(v, (int, float)) for v in value):
            raise ConfigError(f"{source}: {name} must be a list of numbers")
        return tuple(float(v) for v in value)
    raise AssertionError(typ)


def _validate(cfg: RunConfig, source: str) -> None:
    if cfg.family not in ("power", "power_smooth"):
        raise ConfigError(f"{source}: coefficient.family must be 'power' or 'power_smooth'")
    if not 0.0 < cfg.alpha:
        raise ConfigError(f"{source}: coefficient.alpha must be positive, got {cfg.alpha:g}")
    if cfg.c < 0.0:
        raise ConfigError(f"{source}: coefficient.c must be non-negative, got {cfg.c:g}")
    if cfg.beta < 0.0:
        raise ConfigError(f"{source}: beta must be non-negative, got {cfg.beta:g}")
    if cfg.gamma < 0.0:
        raise ConfigError(f"{source}: gamma must be non-negative, got {cfg.gamma:g}")
    if cfg.n_elements < 4:
        raise ConfigError(f"{source}: mesh.n_elements must be >= 4, got {cfg.n_elements}")
    if cfg.grading < 1.0:
        raise ConfigError(f"{source}: mesh.grading must be >= 1, got {cfg.grading:g}")
    if cfg.dt <= 0.0 or cfg.t_end <= cfg.dt:
        raise ConfigError(f"{source}: need 0 < dt < t_end, got dt={cfg.dt:g}, t_end={cfg.t_end:g}")
    if cfg.snapshot_stride < 1:
        raise ConfigError(f"{source}: time.snapshot_stride must be >= 1")
    for which in (cfg.y0, cfg.y1):
        if which not in dynamics.INITIAL_DATA_MENU:
            raise ConfigError(
                f"{source}: initial data {which!r} not in menu {sorted(dynamics.INITIAL_DATA_MENU)}"
            )
    if cfg.delta_policy not in ("scan", "fixed_fraction"):
        raise ConfigError(f"{source}: delta.policy must be 'scan' or 'fixed_fraction'")
    for amp in (cfg.y0_amplitude, cfg.y1_amplitude):
        if not math.isfinite(amp):
            raise ConfigError(f"{source}: initial amplitudes must be finite")
    # the coefficient classification (k < 2) is enforced at construction
    try:
        make_coefficient(cfg)
    except coefficient.CoefficientError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def make_coefficient(cfg: RunConfig, alpha: float | None = None) -> coefficient.DegeneracyCoefficient:
    alpha = cfg.alpha if alpha is None else alpha
    if cfg.family == "power":
        return coefficient.power_law(alpha)
    return coefficient.power_law_times_smooth(alpha, cfg.c)


def fmt(x) -> str:
    """Fixed 17-significant-digit scientific float formatting for CSV output."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17e}"


def _resolve_out_dir(cfg: RunConfig, override: str | None) -> Path:
    out = Path(override) if override else Path(cfg.out_dir)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not out.is_absolute():
        out = Path(root) / out
    return out


def _write_manifest(
    directory: Path,
    cfg: RunConfig,
    subcommand: str,
    disc: discretization.BeamDiscretization | None = None,
) -> None:
    lines = [f"tool=degenbeam {__version__}", f"subcommand={subcommand}"]
    for f in fields(cfg):
        lines.append(f"{f.name}={getattr(cfg, f.name)}")
    if disc is not None:
        lines += _discretization_summary(disc)
    (directory / "manifest.txt").write_text("\n".join(lines) + "\n")


def _discretization_summary(disc: discretization.BeamDiscretization) -> list[str]:
    import scipy.linalg as sla

    pencil = sla.eigh(disc.S + disc.B, disc.M_w, eigvals_only=True, subset_by_index=[0, 0])[0]
    pencil_hi = sla.eigh(
        disc.S + disc.B, disc.M_w, eigvals_only=True, subset_by_index=[disc.n_dof - 1, disc.n_dof - 1]
    )[0]
    return [
        f"disc_n_elements={disc.n_elements}",
        f"disc_grading={disc.grading}",
        f"disc_n_dof={disc.n_dof}",
        "disc_half_bandwidth=3",
        f"disc_pencil_eig_min={fmt(pencil)}",
        f"disc_pencil_eig_max={fmt(pencil_hi)}",
    ]


def _write_matrices(directory: Path, disc: discretization.BeamDiscretization) -> None:
    for name, mat in (("M_w", disc.M_w), ("S", disc.S), ("B", disc.B), ("C", disc.C)):
        rows = ["i j value"]
        nz = np.argwhere(mat != 0.0)
        for i, j in nz:
            rows.append(f"{i} {j} {fmt(mat[i, j])}")
        (directory / f"matrix_{name}.txt").write_text("\n".join(rows) + "\n")


def _trace_csv_lines(trace: dynamics.EnergyTrace) -> list[str]:
    lines = ["t,E,dissipation,bound,trace_y1,trace_yx1"]
    bound = trace.bound if trace.bound is not None else np.full_like(trace.times, math.nan)
    for i in range(len(trace.times)):
        lines.append(
            ",".join(
                fmt(v)
                for v in (
                    trace.times[i],
                    trace.energy[i],
                    trace.dissipation[i],
                    bound[i],
                    trace.trace_y[i],
                    trace.trace_yx[i],
                )
            )
        )
    return lines


def _constants_lines(report: coefficient.CoefficientReport, consts: stability.StabilityConstants, m_low: float, m_high: float) -> list[str]:
    lines = [
        f"coefficient={report.name}",
        f"klass={report.klass.value}",
        f"hypothesis_ok={fmt(report.hypothesis_ok)}",
        f"hardy_mesh_n={report.hardy_mesh_n}",
    ]
    for key, val in consts.as_dict().items():
        lines.append(f"{key}={fmt(val)}")
    lines.append(f"m_low={fmt(m_low)}")
    lines.append(f"m_high={fmt(m_high)}")
    return lines


def parse_constants_file(path: str | Path) -> stability.StabilityConstants:
    values: dict = {}
    for line in Path(path).read_text().splitlines():
        if "=" not in line:
            continue
        key, _, val = line.partition("=")
        values[key.strip()] = val.strip()
    kwargs = {}
    for f in fields(stability.StabilityConstants):
        if f.name not in values:
            raise ConfigError(f"{path}: missing constant {f.name!r}")
        kwargs[f.name] = float(values[f.name])
    return stability.StabilityConstants(**kwargs)


def read_trace_csv(path: str | Path) -> dynamics.EnergyTrace:
    data = np.genfromtxt(path, delimiter=",", names=True)
    times = np.atleast_1d(data["t"])
    energies = np.atleast_1d(data["E"])
    return dynamics.EnergyTrace(
        times=times,
        energy=energies,
        dissipation=np.atleast_1d(data["dissipation"]),
        trace_y=np.atleast_1d(data["trace_y1"]),
        trace_yx=np.atleast_1d(data["trace_yx1"]),
        step_dissipation=np.zeros(max(len(times) - 1, 0)),
        bound=np.atleast_1d(data["bound"]),
    )


@dataclass
class RunResult:
    cfg: RunConfig
    report: coefficient.CoefficientReport
    consts: stability.StabilityConstants
    disc: discretization.BeamDiscretization
    trace: dynamics.EnergyTrace
    decay: stability.DecayReport
    obs: stability.ObservabilityReport | None
    identity_residual: float
    integral_ok: bool

    @property
    def ok(self) -> bool:
        obs_ok = self.obs is None or (self.obs.prop33_ok and self.obs.prop34_ok)
        return bool(
            self.decay.ok
            and obs_ok
            and self.identity_residual <= dynamics.IDENTITY_TOL
            and self.integral_ok
        )


_hardy_cache: dict = {}
_hardy_lock = threading.Lock()


def characterize_cached(cfg: RunConfig, alpha: float) -> tuple[coefficient.CoefficientReport, float]:
    """Coefficient report at the fine Hardy mesh plus the coarse-mesh c_hp."""
    key = (cfg.family, alpha, cfg.c)
    with _hardy_lock:
        if key in _hardy_cache:
            return _hardy_cache[key]
    coeff = make_coefficient(cfg, alpha)
    report = coefficient.characterize(coeff, hardy_mesh_n=HARDY_MESH_FINE)
    coarse = coefficient.estimate_hardy_constant(coeff, HARDY_MESH_COARSE).c_hp
    with _hardy_lock:
        _hardy_cache[key] = (report, coarse)
    return report, coarse


def execute_run(cfg: RunConfig, alpha: float | None = None, beta: float | None = None, gamma: float | None = None) -> RunResult:
    """Simulate one configuration and evaluate all verdicts."""
    alpha = cfg.alpha if alpha is None else alpha
    beta = cfg.beta if beta is None else beta
    gamma = cfg.gamma if gamma is None else gamma
    report, _ = characterize_cached(cfg, alpha)
    coeff = make_coefficient(cfg, alpha)
    consts = stability.compute_constants(report, beta, gamma, cfg.delta_policy)
    disc = discretization.build(coeff, cfg.n_elements, beta, gamma, cfg.grading)
    y0 = dynamics.initial_data(disc, cfg.y0, cfg.y0_amplitude)
    y1 = dynamics.initial_data(disc, cfg.y1, cfg.y1_amplitude)
    trace = dynamics.simulate(disc, y0, y1, cfg.dt, cfg.t_end, cfg.snapshot_stride)
    stability.attach_bound(trace, consts)
    horizon = max(cfg.t_end, 3.0 * consts.m)
    decay = stability.certify_decay(disc, trace, consts, horizon)
    identity_residual = dynamics.energy_derivative_identity_residual(trace)

    obs = None
    s_obs = 0.1
    if trace.initial_energy > 0.0 and cfg.t_end > s_obs:
        obs = stability.verify_observability_estimates(disc, trace.states, consts, s_obs, cfg.t_end)

    integral_ok = True
    if trace.initial_energy > 0.0:
        for s in (0.1, 1.0):
            if s >= cfg.t_end:
                continue
            lhs, rhs = stability.integral_inequality_residual(trace, consts, s)
            integral_ok = integral_ok and lhs <= rhs * 1.05
    return RunResult(
        cfg=cfg,
        report=report,
        consts=consts,
        disc=disc,
        trace=trace,
        decay=decay,
        obs=obs,
        identity_residual=identity_residual,
        integral_ok=integral_ok,
    )


def _stage_dir(final_dir: Path) -> Path:
    staging = final_dir.with_name(final_dir.name + f".partial-{os.getpid()}")
    if staging.exists():
        shutil.rmtree(staging)
    staging.mkdir(parents=True)
    return staging


def _commit_dir(staging: Path, final_dir: Path) -> None:
    if final_dir.exists():
        shutil.rmtree(final_dir)
    staging.rename(final_dir)


def write_run_outputs(
    directory: Path,
    cfg: RunConfig,
    result: RunResult,
    subcommand: str,
    debug_matrices: bool = False,
    alpha: float | None = None,
    beta: float | None = None,
    gamma: float | None = None,
) -> None:
    alpha = cfg.alpha if alpha is None else alpha
    beta = cfg.beta if beta is None else beta
    gamma = cfg.gamma if gamma is None else gamma
    _write_manifest(directory, cfg, subcommand, result.disc)
    trace_name = f"{cfg.label}_{alpha:g}_{beta:g}_{gamma:g}.csv"
    (directory / trace_name).write_text("\n".join(_trace_csv_lines(result.trace)) + "\n")
    consts_coarse = stability.with_c_hp(result.consts, _hardy_cache[(cfg.family, alpha, cfg.c)][1])
    c_fine = result.consts.c_hp
    c_coarse = consts_coarse.c_hp
    c_extrap = c_fine + (c_fine - c_coarse) / 3.0
    m_high = stability.with_c_hp(result.consts, c_extrap).m
    (directory / "constants.txt").write_text(
        "\n".join(_constants_lines(result.report, result.consts, consts_coarse.m, m_high)) + "\n"
    )
    verdict_lines = [
        f"decay_ok={fmt(result.decay.ok)}",
        f"decay_margin={fmt(result.decay.margin)}",
        f"fitted_rate={fmt(result.decay.fitted_rate)}",
        f"identity_residual={fmt(result.identity_residual)}",
        f"integral_inequality_ok={fmt(result.integral_ok)}",
    ]
    if result.obs is not None:
        verdict_lines += [
            f"prop33_ok={fmt(result.obs.prop33_ok)}",
            f"prop34_ok={fmt(result.obs.prop34_ok)}",
            f"prop33_slack={fmt(result.obs.slack33)}",
            f"prop34_slack={fmt(result.obs.slack34)}",
        ]
    verdict_lines.append(f"ok={fmt(result.ok)}")
    (directory / "verdicts.txt").write_text("\n".join(verdict_lines) + "\n")
    if debug_matrices:
        _write_matrices(directory, result.disc)


SWEEP_COLUMNS = [
    "alpha",
    "beta",
    "gamma",
    "K",
    "c_hp",
    "eps0",
    "nu",
    "delta",
    "c_delta",
    "c1",
    "c2",
    "c3",
    "M",
    "fitted_rate",
    "decay_ok",
    "prop33_slack",
    "prop34_slack",
]


def _sweep_row(result: RunResult, alpha: float, beta: float, gamma: float) -> str:
    c = result.consts
    obs = result.obs
    vals = [
        alpha,
        beta,
        gamma,
        c.k,
        c.c_hp,
        c.eps0,
        c.nu,
        c.delta,
        c.c_delta,
        c.c1,
        c.c2,
        c.c3,
        c.m,
        result.decay.fitted_rate,
        result.decay.ok,
        obs.slack33 if obs is not None else math.nan,
        obs.slack34 if obs is not None else math.nan,
    ]
    return ",".join(fmt(v) for v in vals)


def cmd_simulate(cfg: RunConfig, out_dir: Path, debug_matrices: bool) -> int:
    staging = _stage_dir(out_dir / cfg.label)
    try:
        result = execute_run(cfg)
        write_run_outputs(staging, cfg, result, "simulate", debug_matrices)
    except Exception:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    _commit_dir(staging, out_dir / cfg.label)
    print(f"run written to {out_dir / cfg.label} (ok={result.ok})")
    return 0 if result.ok else 1


def cmd_constants(cfg: RunConfig) -> int:
    report, c_coarse = characterize_cached(cfg, cfg.alpha)
    consts = stability.compute_constants(report, cfg.beta, cfg.gamma, cfg.delta_policy)
    m_low = stability.with_c_hp(consts, c_coarse).m
    c_extrap = consts.c_hp + (consts.c_hp - c_coarse) / 3.0
    m_high = stability.with_c_hp(consts, c_extrap).m
    for line in _constants_lines(report, consts, m_low, m_high):
        print(line)
    return 0


def cmd_hardy(cfg: RunConfig) -> int:
    report, _ = characterize_cached(cfg, cfg.alpha)
    print(f"K={fmt(report.k)}")
    print(f"klass={report.klass.value}")
    print(f"a_1={fmt(report.a_at_1)}")
    print(f"c_hp={fmt(report.c_hp)}")
    print(f"hypothesis_ok={fmt(report.hypothesis_ok)}")
    print("K,klass,a_1,c_hp,hypothesis_ok")
    print(
        ",".join(
            [
                fmt(report.k),
                report.klass.value,
                fmt(report.a_at_1),
                fmt(report.c_hp),
                fmt(report.hypothesis_ok),
            ]
        )
    )
    return 0


def cmd_static_solve(cfg: RunConfig, lam: float, mu: float, emit_csv: bool) -> int:
    coeff = make_coefficient(cfg)
    disc = discretization.build(coeff, cfg.n_elements, cfg.beta, cfg.gamma, cfg.grading)
    prob = statics.StaticProblem(lam=lam, mu=mu, beta=cfg.beta, gamma=cfg.gamma)
    oracle = statics.cubic_oracle(prob)
    z = statics.solve_variational(disc, prob)
    report, _ = characterize_cached(cfg, cfg.alpha)
    est = statics.verify_estimates(disc, prob, z, report.c_hp)
    z_oracle = statics.interpolate_cubic(disc, oracle)
    diff = z - z_oracle
    mismatch = math.sqrt(max(discretization.triple_norm_sq(disc, diff), 0.0))
    print(f"p={fmt(oracle.p)}")
    print(f"q={fmt(oracle.q)}")
    print(f"triple_norm_sq={fmt(est.triple_lhs)}")
    print(f"weighted_norm_sq={fmt(est.weighted_lhs)}")
    print(f"oracle_mismatch={fmt(mismatch)}")
    print(f"estimates_ok={fmt(est.ok)}")
    if emit_csv:
        print("p,q,triple_norm_sq,weighted_norm_sq,oracle_mismatch,estimates_ok")
        print(
            ",".join(
                fmt(v)
                for v in (oracle.p, oracle.q, est.triple_lhs, est.weighted_lhs, mismatch, est.ok)
            )
        )
    return 0 if est.ok else 1


def cmd_sweep(cfg: RunConfig, out_dir: Path, jobs: int, debug_matrices: bool) -> int:
    combos = sorted(
        (a, b, g) for a in cfg.sweep_alphas for b in cfg.sweep_betas for g in cfg.sweep_gammas
    )
    staging = _stage_dir(out_dir / cfg.label)

    def one(combo):
        a, b, g = combo
        result = execute_run(cfg, alpha=a, beta=b, gamma=g)
        sub = staging / f"{cfg.label}_a{a:g}_b{b:g}_g{g:g}"
        sub.mkdir()
        write_run_outputs(sub, cfg, result, "sweep", debug_matrices, alpha=a, beta=b, gamma=g)
        return combo, result

    try:
        results = {}
        with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
            for combo, result in pool.map(one, combos):
                results[combo] = result
        rows = [",".join(SWEEP_COLUMNS)]
        all_ok = True
        for combo in combos:
            result = results[combo]
            rows.append(_sweep_row(result, *combo))
            all_ok = all_ok and result.ok
        (staging / "summary.csv").write_text("\n".join(rows) + "\n")
        _write_manifest(staging, cfg, "sweep")
    except Exception:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    _commit_dir(staging, out_dir / cfg.label)
    print(f"sweep written to {out_dir / cfg.label} ({len(combos)} runs, all_ok={all_ok})")
    return 0 if all_ok else 1


def cmd_verify(trace_path: str, constants_path: str) -> int:
    consts = parse_constants_file(constants_path)
    trace = read_trace_csv(trace_path)
    report = stability.verify_decay(trace, consts)
    print(f"decay_ok={fmt(report.ok)}")
    print(f"margin={fmt(report.margin)}")
    print(f"fitted_rate={fmt(report.fitted_rate)}")
    return 0 if report.ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="degenbeam",
        description="Degenerate clamped beam: simulation and decay-certificate verification.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="path to a TOML run configuration")
    common.add_argument("--out", help="output directory (overrides the config)")
    common.add_argument("--label", help="run label (overrides the config)")
    common.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="sweep parallelism")
    common.add_argument("--debug-matrices", action="store_true", help="dump assembled matrices")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="run one simulation and its verdicts")
    sub.add_parser("constants", parents=[common], help="print the full constants ledger")
    static_p = sub.add_parser("static-solve", parents=[common], help="solve the boundary-driven static problem")
    static_p.add_argument("--lam", type=float, default=1.0, help="value-trace load")
    static_p.add_argument("--mu", type=float, default=0.0, help="slope-trace load")
    static_p.add_argument("--csv", action="store_true", help="also print a CSV row")
    sub.add_parser("hardy", parents=[common], help="print the coefficient report")
    sub.add_parser("sweep", parents=[common], help="run the alpha x beta x gamma sweep")
    verify_p = sub.add_parser("verify", parents=[common], help="re-check a written trace")
    verify_p.add_argument("--trace", required=True, help="trace CSV path")
    verify_p.add_argument("--constants", required=True, help="constants file path")
    return parser


def _load_config(args) -> RunConfig:
    cfg = parse_config(args.config) if args.config else RunConfig()
    if args.label:
        cfg = replace(cfg, label=args.label)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return cmd_verify(args.trace, args.constants)
        cfg = _load_config(args)
        out_dir = _resolve_out_dir(cfg, args.out)
        if args.command == "simulate":
            return cmd_simulate(cfg, out_dir, args.debug_matrices)
        if args.command == "constants":
            return cmd_constants(cfg)
        if args.command == "hardy":
            return cmd_hardy(cfg)
        if args.command == "static-solve":
            return cmd_static_solve(cfg, args.lam, args.mu, args.csv)
        if args.command == "sweep":
            return cmd_sweep(cfg, out_dir, args.jobs, args.debug_matrices)
        raise AssertionError(args.command)
    except (ConfigError, coefficient.CoefficientError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
