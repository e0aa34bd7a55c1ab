"""Command line driver for the reduction pipeline.

Subcommands map to pipeline stages that exchange artifacts through an
output directory, so a chained stage-by-stage invocation reproduces a
single ``run`` byte for byte:

    simulate            integrate the full model, write snapshot CSVs
    basis               compute the orthogonal basis from training data
    infer               fit the mass-normalized reduced model
    infer-constrained   fit the symmetric definite reduced model
    evaluate            replay every reduced model and write error series
    run                 all of the above plus manifest and timings

Configuration lives in an INI file with one section per concern; any
value a flag also covers can be overridden on the command line. All
artifacts are plain text with 17 significant digits, so identical
configuration produces identical bytes.

Exit codes: 0 success, 1 usage or configuration error, 2 unreadable or
inconsistent data, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import (
    DegenerateInputError,
    FormatError,
    IllConditionedModesError,
    InsufficientDataError,
    InvalidComparisonError,
    InvalidInputError,
    InvalidParameterError,
    MechromError,
    MissingDataError,
    NoViableLambdaError,
    NotSeparableError,
    SingularOperatorError,
)
from .evaluate import relative_error, save_error_series
from .model import (
    FLOAT_FORMAT,
    SecondOrderSystem,
    build_mass_spring_chain,
    load_matrix,
    load_system,
    save_matrix,
)
from .newmark import IntegratorConfig, simulate
from .opinf import infer, select_lambda
from .copinf import DEFAULT_OMEGA, infer_constrained
from .pod import PodBasis, compute_basis, intrusive_reduce
from .roms import MassNormalizedRom, StructuredRom
from .snapshots import TrajectoryData, load_csv, project, save_csv

__all__ = ["ExperimentConfig", "load_config", "run", "main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

_METHODS = ("pod", "opinf", "copinf")
_WAVEFORMS = ("sine", "constant", "chirp")

# Default regularization sweep: no regularization plus a log-spaced
# ladder from 1e-12 to 1.
DEFAULT_LAMBDA_GRID = [0.0] + list(np.logspace(-12.0, 0.0, 13))


class UsageError(MechromError):
    """Configuration or invocation problem; maps to exit code 1."""


# ---------------------------------------------------------------------------
# Configuration.
# ---------------------------------------------------------------------------

_KNOWN_KEYS = {
    "system": {
        "kind", "n", "masses", "stiffnesses", "alpha_r", "beta_r",
        "input_nodes", "x0", "v0", "mass_path", "damping_path",
        "stiffness_path", "input_path",
    },
    "integrator": {"dt", "gamma", "beta", "alpha"},
    "input": {
        "waveform", "amplitude", "frequency", "angular_frequency", "phase",
        "value", "f0", "f1", "sweep_time",
    },
    "training": {"t_end"},
    "testing": {"t_end"},
    "basis": {"rank", "tol", "energy"},
    "inference": {"methods", "lambda_grid", "omega"},
    "output": {"directory", "seed"},
}


@dataclass
class ExperimentConfig:
    """Fully resolved pipeline configuration; every field has its final
    value, defaults included, so the manifest can dump it verbatim."""

    # system
    kind: str = "chain"
    n: int | None = None
    masses: list = field(default_factory=list)
    stiffnesses: list = field(default_factory=list)
    alpha_r: float = 0.0
    beta_r: float = 0.0
    input_nodes: list = field(default_factory=lambda: [0])
    x0: list = field(default_factory=list)
    v0: list = field(default_factory=list)
    mass_path: str | None = None
    damping_path: str | None = None
    stiffness_path: str | None = None
    input_path: str | None = None
    # integrator
    dt: float = 0.0
    gamma: float | None = None
    beta: float | None = None
    alpha: float = 0.0
    # input signal
    waveform: str = "sine"
    amplitude: float = 1.0
    frequency: float | None = None
    angular_frequency: float | None = None
    phase: float = 0.0
    value: float = 1.0
    f0: float | None = None
    f1: float | None = None
    sweep_time: float | None = None
    # horizons
    train_t_end: float = 0.0
    test_t_end: float = 0.0
    # basis
    rank: int | None = None
    tol: float | None = None
    energy: float | None = None
    # inference
    methods: list = field(default_factory=lambda: list(_METHODS))
    lambda_grid: list = field(default_factory=lambda: list(DEFAULT_LAMBDA_GRID))
    omega: float = DEFAULT_OMEGA
    # output
    directory: str = ""
    seed: int = 0

    def manifest_dict(self) -> dict:
        return {
            "system": {
                "kind": self.kind,
                "n": self.n,
                "masses": self.masses,
                "stiffnesses": self.stiffnesses,
                "alpha_r": self.alpha_r,
                "beta_r": self.beta_r,
                "input_nodes": self.input_nodes,
                "x0": self.x0,
                "v0": self.v0,
                "mass_path": self.mass_path,
                "damping_path": self.damping_path,
                "stiffness_path": self.stiffness_path,
                "input_path": self.input_path,
            },
            "integrator": {
                "dt": self.dt,
                "gamma": (
                    self.gamma if self.gamma is not None
                    else (1.0 - 2.0 * self.alpha) / 2.0
                ),
                "beta": (
                    self.beta if self.beta is not None
                    else (1.0 - self.alpha) ** 2 / 4.0
                ),
                "alpha": self.alpha,
            },
            "input": {
                "waveform": self.waveform,
                "amplitude": self.amplitude,
                "frequency": self.frequency,
                "angular_frequency": self.angular_frequency,
                "phase": self.phase,
                "value": self.value,
                "f0": self.f0,
                "f1": self.f1,
                "sweep_time": self.sweep_time,
            },
            "training": {"t_end": self.train_t_end},
            "testing": {"t_end": self.test_t_end},
            "basis": {
                "rank": self.rank,
                "tol": self.tol,
                "energy": self.energy,
            },
            "inference": {
                "methods": self.methods,
                "lambda_grid": self.lambda_grid,
                "omega": self.omega,
            },
            "output": {"directory": self.directory, "seed": self.seed},
        }


def _parse_float(section, key, raw):
    try:
        return float(raw)
    except ValueError:
        raise UsageError(f"[{section}] {key} must be a number, got {raw!r}")


def _parse_int(section, key, raw):
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"[{section}] {key} must be an integer, got {raw!r}")


def _parse_float_list(section, key, raw):
    try:
        return [float(p) for p in raw.split(",") if p.strip()]
    except ValueError:
        raise UsageError(
            f"[{section}] {key} must be a comma-separated number list"
        )


def load_config(path) -> ExperimentConfig:
    """Parse and validate an INI configuration file."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}")
    except configparser.Error as exc:
        raise UsageError(f"malformed config {path}: {exc}")

    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            raise UsageError(f"unknown config section [{section}]")
        for key in parser[section]:
            if key not in _KNOWN_KEYS[section]:
                raise UsageError(f"unknown key {key!r} in section [{section}]")

    cfg = ExperimentConfig()

    def get(section, key, default=None):
        if parser.has_option(section, key):
            return parser.get(section, key).strip()
        return default

    # system
    cfg.kind = get("system", "kind", "chain")
    if cfg.kind not in ("chain", "files"):
        raise UsageError(f"[system] kind must be chain or files, got {cfg.kind!r}")
    if cfg.kind == "chain":
        raw_n = get("system", "n")
        if raw_n is None:
            raise UsageError("[system] n is required for kind = chain")
        cfg.n = _parse_int("system", "n", raw_n)
        if cfg.n < 1:
            raise UsageError(f"[system] n must be >= 1, got {cfg.n}")
        masses = _parse_float_list("system", "masses", get("system", "masses", "1.0"))
        cfg.masses = masses * cfg.n if len(masses) == 1 else masses
        stiff = _parse_float_list(
            "system", "stiffnesses", get("system", "stiffnesses", "1.0")
        )
        cfg.stiffnesses = stiff * (cfg.n + 1) if len(stiff) == 1 else stiff
        nodes_raw = get("system", "input_nodes", "0")
        try:
            cfg.input_nodes = [int(p) for p in nodes_raw.split(",") if p.strip()]
        except ValueError:
            raise UsageError("[system] input_nodes must be a comma list of ints")
    else:
        for key in ("mass_path", "damping_path", "stiffness_path", "input_path"):
            raw = get("system", key)
            if raw is None:
                raise UsageError(f"[system] {key} is required for kind = files")
            setattr(cfg, key, raw)
    cfg.alpha_r = _parse_float("system", "alpha_r", get("system", "alpha_r", "0.0"))
    cfg.beta_r = _parse_float("system", "beta_r", get("system", "beta_r", "0.0"))
    for key in ("x0", "v0"):
        raw = get("system", key)
        if raw is not None:
            setattr(cfg, key, _parse_float_list("system", key, raw))

    # integrator
    raw_dt = get("integrator", "dt")
    if raw_dt is None:
        raise UsageError("[integrator] dt is required")
    cfg.dt = _parse_float("integrator", "dt", raw_dt)
    if cfg.dt <= 0.0:
        raise UsageError(f"[integrator] dt must be positive, got {cfg.dt}")
    for key in ("gamma", "beta"):
        raw = get("integrator", key)
        if raw is not None:
            setattr(cfg, key, _parse_float("integrator", key, raw))
    cfg.alpha = _parse_float("integrator", "alpha", get("integrator", "alpha", "0.0"))

    # input signal
    cfg.waveform = get("input", "waveform", "sine")
    if cfg.waveform not in _WAVEFORMS:
        raise UsageError(
            f"[input] waveform must be one of {', '.join(_WAVEFORMS)}, "
            f"got {cfg.waveform!r}"
        )
    cfg.amplitude = _parse_float("input", "amplitude", get("input", "amplitude", "1.0"))
    cfg.phase = _parse_float("input", "phase", get("input", "phase", "0.0"))
    cfg.value = _parse_float("input", "value", get("input", "value", "1.0"))
    for key in ("frequency", "angular_frequency", "f0", "f1", "sweep_time"):
        raw = get("input", key)
        if raw is not None:
            setattr(cfg, key, _parse_float("input", key, raw))
    if cfg.waveform == "sine":
        given = (cfg.frequency is not None) + (cfg.angular_frequency is not None)
        if given != 1:
            raise UsageError(
                "[input] sine needs exactly one of frequency, angular_frequency"
            )
    if cfg.waveform == "chirp":
        if cfg.f0 is None or cfg.f1 is None or cfg.sweep_time is None:
            raise UsageError("[input] chirp needs f0, f1, and sweep_time")
        if cfg.sweep_time <= 0.0:
            raise UsageError("[input] sweep_time must be positive")

    # horizons
    for section, attr in (("training", "train_t_end"), ("testing", "test_t_end")):
        raw = get(section, "t_end")
        if raw is None:
            raise UsageError(f"[{section}] t_end is required")
        setattr(cfg, attr, _parse_float(section, "t_end", raw))
    if cfg.train_t_end < cfg.dt:
        raise UsageError("[training] t_end must cover at least one step")
    if cfg.test_t_end < cfg.train_t_end:
        raise UsageError(
            f"[testing] t_end ({cfg.test_t_end}) must be >= "
            f"[training] t_end ({cfg.train_t_end})"
        )

    # basis
    raw_rank = get("basis", "rank")
    if raw_rank is not None:
        cfg.rank = _parse_int("basis", "rank", raw_rank)
    for key in ("tol", "energy"):
        raw = get("basis", key)
        if raw is not None:
            setattr(cfg, key, _parse_float("basis", key, raw))
    _check_basis_selectors(cfg)

    # inference
    methods_raw = get("inference", "methods", ",".join(_METHODS))
    cfg.methods = [p.strip() for p in methods_raw.split(",") if p.strip()]
    if not cfg.methods:
        raise UsageError("[inference] methods must not be empty")
    for method in cfg.methods:
        if method not in _METHODS:
            raise UsageError(
                f"[inference] unknown method {method!r}; "
                f"choose from {', '.join(_METHODS)}"
            )
    grid_raw = get("inference", "lambda_grid", "default")
    if grid_raw == "default":
        cfg.lambda_grid = list(DEFAULT_LAMBDA_GRID)
    else:
        cfg.lambda_grid = _parse_float_list("inference", "lambda_grid", grid_raw)
        if not cfg.lambda_grid:
            raise UsageError("[inference] lambda_grid must not be empty")
        if any(g < 0.0 for g in cfg.lambda_grid):
            raise UsageError("[inference] lambda_grid values must be >= 0")
    cfg.omega = _parse_float("inference", "omega", get("inference", "omega",
                                                       repr(DEFAULT_OMEGA)))
    if cfg.omega <= 0.0:
        raise UsageError(f"[inference] omega must be positive, got {cfg.omega}")

    # output
    cfg.directory = get("output", "directory", "")
    raw_seed = get("output", "seed", "0")
    cfg.seed = _parse_int("output", "seed", raw_seed)
    return cfg


def _check_basis_selectors(cfg: ExperimentConfig):
    given = sum(v is not None for v in (cfg.rank, cfg.tol, cfg.energy))
    if given != 1:
        raise UsageError(
            "[basis] exactly one of rank, tol, energy must be set"
        )
    if cfg.rank is not None and cfg.rank < 1:
        raise UsageError(f"[basis] rank must be >= 1, got {cfg.rank}")
    if cfg.tol is not None and not 0.0 < cfg.tol < 1.0:
        raise UsageError(f"[basis] tol must lie in (0, 1), got {cfg.tol}")
    if cfg.energy is not None and not 0.0 < cfg.energy < 1.0:
        raise UsageError(f"[basis] energy must lie in (0, 1), got {cfg.energy}")


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if getattr(args, "out", None):
        cfg.directory = args.out
    if getattr(args, "method", None):
        methods = []
        for chunk in args.method:
            methods.extend(p.strip() for p in chunk.split(",") if p.strip())
        for method in methods:
            if method not in _METHODS:
                raise UsageError(f"--method: unknown method {method!r}")
        if not methods:
            raise UsageError("--method must name at least one method")
        cfg.methods = methods
    if getattr(args, "rank", None) is not None:
        cfg.rank, cfg.tol, cfg.energy = args.rank, None, None
    if getattr(args, "tol", None) is not None:
        cfg.rank, cfg.tol, cfg.energy = None, args.tol, None
    _check_basis_selectors(cfg)
    if getattr(args, "lam", None) is not None:
        if args.lam < 0.0:
            raise UsageError(f"--lambda must be >= 0, got {args.lam}")
        cfg.lambda_grid = [args.lam]
    if getattr(args, "omega", None) is not None:
        if args.omega <= 0.0:
            raise UsageError(f"--omega must be positive, got {args.omega}")
        cfg.omega = args.omega
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if not cfg.directory:
        raise UsageError("no output directory: set [output] directory or --out")
    return cfg


# ---------------------------------------------------------------------------
# Shared stage pieces.
# ---------------------------------------------------------------------------


def _tag_stage(exc: BaseException, name: str) -> None:
    # First tag wins: the innermost stage is the one to report.
    if not hasattr(exc, "stage"):
        try:
            exc.stage = name
        except AttributeError:  # pragma: no cover
            pass


def _build_system(cfg: ExperimentConfig) -> SecondOrderSystem:
    if cfg.kind == "chain":
        try:
            return build_mass_spring_chain(
                cfg.n,
                cfg.masses,
                cfg.stiffnesses,
                alpha_r=cfg.alpha_r,
                beta_r=cfg.beta_r,
                input_nodes=cfg.input_nodes,
            )
        except (MechromError, OSError) as exc:
            _tag_stage(exc, "build_system")
            raise
    try:
        return load_system(
            cfg.mass_path,
            cfg.damping_path,
            cfg.stiffness_path,
            cfg.input_path,
            label="files",
        )
    except (MechromError, OSError) as exc:
        _tag_stage(exc, "load_system")
        raise


def _waveform(cfg: ExperimentConfig):
    if cfg.waveform == "sine":
        w = (
            cfg.angular_frequency
            if cfg.angular_frequency is not None
            else 2.0 * np.pi * cfg.frequency
        )
        return lambda t: cfg.amplitude * np.sin(w * t + cfg.phase)
    if cfg.waveform == "constant":
        return lambda t: cfg.value
    f0, f1, sweep = cfg.f0, cfg.f1, cfg.sweep_time

    def chirp(t):
        return cfg.amplitude * np.sin(
            cfg.phase + 2.0 * np.pi * (f0 * t + (f1 - f0) * t * t / (2.0 * sweep))
        )

    return chirp


def _input_sampler(cfg: ExperimentConfig, m: int):
    wave = _waveform(cfg)
    return lambda t: np.full(m, wave(t))


def _initial_conditions(cfg: ExperimentConfig, n: int):
    def expand(values, name):
        if not values:
            return np.zeros(n)
        if len(values) == 1:
            return np.full(n, values[0])
        if len(values) != n:
            raise InvalidInputError(
                f"[system] {name} has {len(values)} entries for dimension {n}"
            )
        return np.asarray(values)

    return expand(cfg.x0, "x0"), expand(cfg.v0, "v0")


def _train_columns(cfg: ExperimentConfig) -> int:
    return IntegratorConfig(dt=cfg.dt, t_end=cfg.train_t_end).num_steps


def _slice_columns(data: TrajectoryData, count: int) -> TrajectoryData:
    return TrajectoryData(
        times=data.times[:count],
        displacement=data.displacement[:, :count],
        velocity=data.velocity[:, :count],
        acceleration=data.acceleration[:, :count],
        input=None if data.input is None else data.input[:, :count],
        force=None if data.force is None else data.force[:, :count],
    )


def _basis_dir(outdir):
    return os.path.join(outdir, "basis")


def _load_basis(outdir) -> PodBasis:
    modes_path = os.path.join(_basis_dir(outdir), "modes.mtx")
    svals_path = os.path.join(_basis_dir(outdir), "singular_values.csv")
    if not (os.path.exists(modes_path) and os.path.exists(svals_path)):
        raise MissingDataError(
            f"no basis artifacts under {outdir}; run the basis stage first"
        )
    modes = load_matrix(modes_path)
    svals = []
    with open(svals_path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    for lineno, ln in enumerate(lines[1:], start=2):
        if not ln.strip():
            continue
        parts = ln.split(",")
        if len(parts) != 2:
            raise FormatError("expected 'index,sigma'", path=svals_path, line=lineno)
        try:
            svals.append(float(parts[1]))
        except ValueError:
            raise FormatError("non-numeric sigma", path=svals_path, line=lineno)
    return PodBasis(modes=modes, singular_values=np.asarray(svals))


def _load_train_projected(cfg, outdir):
    train = load_csv(os.path.join(outdir, "fom", "train"))
    basis = _load_basis(outdir)
    return project(train, basis), basis


def _write_table_csv(path, header, rows):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(FLOAT_FORMAT % v for v in row) + "\n")


# ---------------------------------------------------------------------------
# Stages.
# ---------------------------------------------------------------------------


def stage_simulate(cfg: ExperimentConfig, outdir) -> None:
    system = _build_system(cfg)
    sampler = _input_sampler(cfg, system.m)
    x0, v0 = _initial_conditions(cfg, system.n)
    config = IntegratorConfig(
        dt=cfg.dt, t_end=cfg.test_t_end, gamma=cfg.gamma, beta=cfg.beta,
        alpha=cfg.alpha,
    )
    data = simulate(system, sampler, x0, v0, config)
    n_train = _train_columns(cfg)
    save_csv(data, os.path.join(outdir, "fom", "test"))
    save_csv(_slice_columns(data, n_train), os.path.join(outdir, "fom", "train"))
    print(f"simulate: {n_train} training and {data.num_snapshots} test snapshots")


def stage_basis(cfg: ExperimentConfig, outdir) -> None:
    train = load_csv(os.path.join(outdir, "fom", "train"))
    basis = compute_basis(
        train.displacement, rank=cfg.rank, tol=cfg.tol, energy=cfg.energy
    )
    bdir = _basis_dir(outdir)
    os.makedirs(bdir, exist_ok=True)
    save_matrix(os.path.join(bdir, "modes.mtx"), basis.modes, symmetry="general")
    s = basis.singular_values
    _write_table_csv(
        os.path.join(bdir, "singular_values.csv"),
        "index,sigma",
        [(i + 1, s[i]) for i in range(s.size)],
    )
    _write_table_csv(
        os.path.join(bdir, "decay.csv"),
        "index,ratio",
        [(i + 1, s[i] / s[0]) for i in range(s.size)],
    )
    print(f"basis: selected rank r = {basis.rank}")


def stage_infer(cfg: ExperimentConfig, outdir) -> None:
    if "opinf" not in cfg.methods:
        return
    from .snapshots import assemble_opinf_data

    rdata, basis = _load_train_projected(cfg, outdir)
    D, rhs = assemble_opinf_data(rdata)
    lam, trials = select_lambda(D, rhs, cfg.lambda_grid, rdata)
    rom, report = infer(D, rhs, lam, basis=basis)
    mdir = os.path.join(outdir, "opinf")
    os.makedirs(mdir, exist_ok=True)
    save_matrix(os.path.join(mdir, "damping.mtx"), rom.damping, symmetry="general")
    save_matrix(os.path.join(mdir, "stiffness.mtx"), rom.stiffness,
                symmetry="general")
    save_matrix(os.path.join(mdir, "input.mtx"), rom.input_map, symmetry="general")
    _write_table_csv(
        os.path.join(mdir, "lambda_table.csv"),
        "lambda,train_residual,validation_error,operator_norm",
        [(t.lam, t.train_residual, t.validation_error, t.operator_norm)
         for t in trials],
    )
    print(f"infer: selected lambda = {FLOAT_FORMAT % lam} "
          f"(residual {report.residual:.3e})")


def stage_infer_constrained(cfg: ExperimentConfig, outdir) -> None:
    if "copinf" not in cfg.methods:
        return
    from .snapshots import assemble_force_data

    rdata, basis = _load_train_projected(cfg, outdir)
    D, rhs = assemble_force_data(rdata)
    mdir = os.path.join(outdir, "copinf")
    os.makedirs(mdir, exist_ok=True)
    rom, report = infer_constrained(
        D, rhs, omega=cfg.omega, basis=basis,
        trace_path=os.path.join(mdir, "trace.csv"),
    )
    save_matrix(os.path.join(mdir, "mass.mtx"), rom.mass, symmetry="symmetric")
    save_matrix(os.path.join(mdir, "damping.mtx"), rom.damping,
                symmetry="symmetric")
    save_matrix(os.path.join(mdir, "stiffness.mtx"), rom.stiffness,
                symmetry="symmetric")
    print(
        f"infer-constrained: objective {report.objective:.6e} after "
        f"{report.iterations} iterations"
        + ("" if report.converged else " (iteration limit)")
    )


def _replay_reduced(cfg, operators, basis, system, x0, v0):
    """Integrate a reduced model over the test window and lift it."""
    sampler = _input_sampler(cfg, system.m)
    config = IntegratorConfig(
        dt=cfg.dt, t_end=cfg.test_t_end, gamma=cfg.gamma, beta=cfg.beta,
        alpha=cfg.alpha,
    )
    Vt = basis.modes.T
    reduced = simulate(
        operators, sampler, Vt @ x0, Vt @ v0, config
    )
    return basis.modes @ reduced.displacement, reduced


def stage_evaluate(cfg: ExperimentConfig, outdir) -> None:
    system = _build_system(cfg)
    basis = _load_basis(outdir)
    test = load_csv(os.path.join(outdir, "fom", "test"))
    x0, v0 = _initial_conditions(cfg, system.n)
    Bred = basis.modes.T @ system.input_map

    for method in cfg.methods:
        if method == "pod":
            reduced = intrusive_reduce(system, basis)
            pdir = os.path.join(outdir, "pod")
            os.makedirs(pdir, exist_ok=True)
            save_matrix(os.path.join(pdir, "mass.mtx"), reduced.mass,
                        symmetry="symmetric")
            save_matrix(os.path.join(pdir, "damping.mtx"), reduced.damping,
                        symmetry="symmetric")
            save_matrix(os.path.join(pdir, "stiffness.mtx"), reduced.stiffness,
                        symmetry="symmetric")
            save_matrix(os.path.join(pdir, "input.mtx"), reduced.input_map,
                        symmetry="general")
            operators = reduced.operators
        elif method == "opinf":
            mdir = os.path.join(outdir, "opinf")
            for name in ("damping.mtx", "stiffness.mtx", "input.mtx"):
                if not os.path.exists(os.path.join(mdir, name)):
                    raise MissingDataError(
                        f"no {name} under {mdir}; run the infer stage first"
                    )
            rom = MassNormalizedRom(
                damping=load_matrix(os.path.join(mdir, "damping.mtx")),
                stiffness=load_matrix(os.path.join(mdir, "stiffness.mtx")),
                input_map=load_matrix(os.path.join(mdir, "input.mtx")),
                basis=basis,
            )
            operators = rom.operators()
        else:
            mdir = os.path.join(outdir, "copinf")
            for name in ("mass.mtx", "damping.mtx", "stiffness.mtx"):
                if not os.path.exists(os.path.join(mdir, name)):
                    raise MissingDataError(
                        f"no {name} under {mdir}; run the infer-constrained "
                        "stage first"
                    )
            rom = StructuredRom(
                mass=load_matrix(os.path.join(mdir, "mass.mtx")),
                damping=load_matrix(os.path.join(mdir, "damping.mtx")),
                stiffness=load_matrix(os.path.join(mdir, "stiffness.mtx")),
                basis=basis,
                omega=cfg.omega,
            )
            operators = rom.operators(input_map=Bred)

        lifted, reduced_traj = _replay_reduced(cfg, operators, basis, system, x0, v0)
        if lifted.shape[1] != test.num_snapshots:
            raise InvalidInputError(
                f"replay produced {lifted.shape[1]} snapshots, test data has "
                f"{test.num_snapshots}"
            )
        rom_dir = os.path.join(outdir, f"rom_{method}")
        os.makedirs(rom_dir, exist_ok=True)
        from .snapshots import _write_matrix_csv

        _write_matrix_csv(
            os.path.join(rom_dir, "displacement.csv"), test.times, lifted, "x"
        )
        series = relative_error(
            test.displacement, lifted, times=test.times,
            phase_split=cfg.train_t_end,
        )
        save_error_series(series, os.path.join(outdir, f"errors_{method}.csv"))
        print(f"evaluate: {method} max relative error {series.max_eps:.6e}")


_STAGES = [
    ("simulate", stage_simulate),
    ("basis", stage_basis),
    ("infer", stage_infer),
    ("infer_constrained", stage_infer_constrained),
    ("evaluate", stage_evaluate),
]


def run(cfg: ExperimentConfig, outdir) -> None:
    """Execute every stage, then write the manifest and stage timings.

    The manifest records the fully resolved configuration (defaults
    made explicit) and the tool version; per-stage wall-clock goes to a
    separate timings.csv, which is the only artifact that varies
    between identical runs.
    """
    os.makedirs(outdir, exist_ok=True)
    timings = []
    for name, fn in _STAGES:
        start = time.perf_counter()
        try:
            fn(cfg, outdir)
        except (MechromError, OSError) as exc:
            _tag_stage(exc, name)
            raise
        timings.append((name, time.perf_counter() - start))

    manifest = {
        "tool": "mechrom",
        "version": __version__,
        "config": cfg.manifest_dict(),
    }
    with open(os.path.join(outdir, "manifest.json"), "w", encoding="ascii",
              newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(outdir, "timings.csv"), "w", encoding="ascii",
              newline="\n") as fh:
        fh.write("stage,seconds\n")
        for name, seconds in timings:
            fh.write(f"{name},{seconds:.6f}\n")


# ---------------------------------------------------------------------------
# Argument parsing and dispatch.
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage problems, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="mechrom", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "simulate": "integrate the full model and write snapshot CSVs",
        "basis": "compute the orthogonal basis from training snapshots",
        "infer": "fit the mass-normalized reduced model",
        "infer-constrained": "fit the symmetric definite reduced model",
        "evaluate": "replay reduced models and write error series",
        "run": "run the whole pipeline and write the manifest",
    }
    for name, help_text in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="INI configuration file")
        p.add_argument("--out", help="artifact directory (overrides config)")
        p.add_argument("--method", action="append",
                       help="restrict methods (repeatable, comma lists allowed)")
        p.add_argument("--rank", type=int, help="basis rank (overrides config)")
        p.add_argument("--tol", type=float,
                       help="basis truncation tolerance (overrides config)")
        p.add_argument("--lambda", dest="lam", type=float,
                       help="single regularization weight (overrides the grid)")
        p.add_argument("--omega", type=float,
                       help="definiteness margin (overrides config)")
        p.add_argument("--seed", type=int, help="seed recorded in the manifest")
    return parser


_COMMANDS = {
    "simulate": [("simulate", stage_simulate)],
    "basis": [("basis", stage_basis)],
    "infer": [("infer", stage_infer)],
    "infer-constrained": [("infer_constrained", stage_infer_constrained)],
    "evaluate": [("evaluate", stage_evaluate)],
}

_DATA_ERRORS = (
    FormatError,
    InvalidInputError,
    InvalidComparisonError,
    MissingDataError,
    InsufficientDataError,
    OSError,
)
_NUMERICAL_ERRORS = (
    SingularOperatorError,
    DegenerateInputError,
    NotSeparableError,
    IllConditionedModesError,
    NoViableLambdaError,
)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    stage = "configure"
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        outdir = cfg.directory
        if args.command == "run":
            stage = "run"
            run(cfg, outdir)
        else:
            for stage, fn in _COMMANDS[args.command]:
                os.makedirs(outdir, exist_ok=True)
                try:
                    fn(cfg, outdir)
                except (MechromError, OSError) as exc:
                    _tag_stage(exc, stage)
                    raise
    except UsageError as exc:
        print(f"error in stage '{getattr(exc, 'stage', stage)}': {exc}",
              file=sys.stderr)
        return EXIT_USAGE
    except InvalidParameterError as exc:
        print(f"error in stage '{getattr(exc, 'stage', stage)}': {exc}",
              file=sys.stderr)
        return EXIT_USAGE
    except _NUMERICAL_ERRORS as exc:
        print(f"error in stage '{getattr(exc, 'stage', stage)}': {exc}",
              file=sys.stderr)
        return EXIT_NUMERICAL
    except _DATA_ERRORS as exc:
        print(f"error in stage '{getattr(exc, 'stage', stage)}': {exc}",
              file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
