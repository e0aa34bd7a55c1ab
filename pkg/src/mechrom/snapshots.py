"""Trajectory containers, regression data assembly, and CSV exchange.

Snapshot collections hold displacement, velocity, and acceleration
histories column per time instant, plus optional input and force
histories. Reduced collections are obtained by projecting onto a basis
and feed the regression problems: the data matrix stacks velocity,
displacement, and input blocks for the mass-normalized problem, and
acceleration, velocity, and displacement blocks for the force-driven
constrained problem.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import (
    FormatError,
    InsufficientDataError,
    InvalidInputError,
    MissingDataError,
)
from .model import FLOAT_FORMAT
from .pod import PodBasis

__all__ = [
    "TrajectoryData",
    "ReducedTrajectoryData",
    "project",
    "assemble_opinf_data",
    "assemble_force_data",
    "finite_difference_derivatives",
    "save_csv",
    "load_csv",
]

# Relative tolerance on time-grid uniformity.
_GRID_RTOL = 1e-12

# Fixed file names used by save_csv / load_csv when given a directory.
CSV_NAMES = {
    "displacement": "displacement.csv",
    "velocity": "velocity.csv",
    "acceleration": "acceleration.csv",
    "input": "input.csv",
    "force": "force.csv",
}
_CSV_PREFIX = {
    "displacement": "x",
    "velocity": "xd",
    "acceleration": "xdd",
    "input": "u",
    "force": "f",
}


def _check_block(name, A, n_rows, n_cols):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got ndim={A.ndim}")
    if n_rows is not None and A.shape[0] != n_rows:
        raise InvalidInputError(
            f"{name} must have {n_rows} rows, got {A.shape[0]}"
        )
    if A.shape[1] != n_cols:
        raise InvalidInputError(
            f"{name} must have {n_cols} columns, got {A.shape[1]}"
        )
    return A


def _check_times(times) -> np.ndarray:
    times = np.asarray(times, dtype=float).ravel()
    if times.size < 1:
        raise InvalidInputError("at least one snapshot is required")
    if times.size > 1:
        gaps = np.diff(times)
        if np.any(gaps <= 0.0):
            raise InvalidInputError("snapshot times must be strictly increasing")
        dt = gaps[0]
        if np.any(np.abs(gaps - dt) > _GRID_RTOL * max(abs(dt), 1.0)):
            raise InvalidInputError("snapshot times must be uniformly spaced")
    return times


@dataclass(frozen=True)
class TrajectoryData:
    """Sampled state history of a second-order model.

    All matrices store one column per entry of ``times``. ``input`` and
    ``force`` are optional; workflows that need them raise
    :class:`MissingDataError` when absent.
    """

    times: np.ndarray
    displacement: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    input: np.ndarray | None = None
    force: np.ndarray | None = None

    def __post_init__(self):
        times = _check_times(self.times)
        N = times.size
        X = _check_block("displacement", self.displacement, None, N)
        n = X.shape[0]
        Xd = _check_block("velocity", self.velocity, n, N)
        Xdd = _check_block("acceleration", self.acceleration, n, N)
        U = self.input
        if U is not None:
            U = _check_block("input", U, None, N)
        F = self.force
        if F is not None:
            F = _check_block("force", F, n, N)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "displacement", X)
        object.__setattr__(self, "velocity", Xd)
        object.__setattr__(self, "acceleration", Xdd)
        object.__setattr__(self, "input", U)
        object.__setattr__(self, "force", F)

    @property
    def n(self) -> int:
        return self.displacement.shape[0]

    @property
    def num_snapshots(self) -> int:
        return self.times.size

    @property
    def dt(self) -> float:
        if self.times.size < 2:
            raise InvalidInputError("time step undefined with one snapshot")
        return float(self.times[1] - self.times[0])


@dataclass(frozen=True)
class ReducedTrajectoryData(TrajectoryData):
    """Trajectory projected onto a basis; produced by :func:`project`."""

    basis: PodBasis | None = None


def project(data: TrajectoryData, basis: PodBasis) -> ReducedTrajectoryData:
    """Project a trajectory onto the span of a basis.

    Displacement, velocity, acceleration, and force (when present) are
    left-multiplied by the transposed mode matrix; the input signal is
    independent of the state space and is copied unchanged.
    """
    V = basis.modes
    if data.n != V.shape[0]:
        raise InvalidInputError(
            f"trajectory dimension {data.n} does not match basis rows {V.shape[0]}"
        )
    Vt = V.T
    return ReducedTrajectoryData(
        times=data.times,
        displacement=Vt @ data.displacement,
        velocity=Vt @ data.velocity,
        acceleration=Vt @ data.acceleration,
        input=None if data.input is None else data.input.copy(),
        force=None if data.force is None else Vt @ data.force,
        basis=basis,
    )


def assemble_opinf_data(rdata: ReducedTrajectoryData):
    """Stack the data matrix and right-hand side for mass-normalized
    regression.

    Returns
    -------
    D : (2 r + m, N) ndarray
        Rows are the velocity block, then the displacement block, then
        the input block.
    rhs : (r, N) ndarray
        The acceleration block.
    """
    if rdata.input is None:
        raise MissingDataError("input block is required and absent")
    D = np.vstack([rdata.velocity, rdata.displacement, rdata.input])
    return D, rdata.acceleration.copy()


def assemble_force_data(rdata: ReducedTrajectoryData):
    """Stack the data matrix and right-hand side for force-driven
    constrained regression.

    Returns
    -------
    D : (3 r, N) ndarray
        Rows are the acceleration block, then velocity, then displacement.
    rhs : (r, N) ndarray
        The projected force block.
    """
    if rdata.force is None:
        raise MissingDataError("force block is required and absent")
    D = np.vstack([rdata.acceleration, rdata.velocity, rdata.displacement])
    return D, rdata.force.copy()


def finite_difference_derivatives(displacement, dt: float):
    """Second-order finite-difference velocity and acceleration.

    Central stencils are used in the interior and one-sided second-order
    stencils at both ends, so both outputs are exact for trajectories
    that are polynomials of degree two in time.

    Parameters
    ----------
    displacement : (n, N) ndarray
        Snapshot columns on a uniform grid with step ``dt``; N >= 5.
    dt : float
        Grid spacing, positive.

    Returns
    -------
    velocity, acceleration : (n, N) ndarray
    """
    X = np.asarray(displacement, dtype=float)
    if X.ndim != 2:
        raise InvalidInputError("displacement must be 2-D")
    if dt <= 0.0:
        raise InvalidInputError(f"dt must be positive, got {dt}")
    N = X.shape[1]
    if N < 5:
        raise InsufficientDataError(
            f"finite differences need at least 5 snapshots, got {N}"
        )
    V = np.empty_like(X)
    A = np.empty_like(X)

    V[:, 1:-1] = (X[:, 2:] - X[:, :-2]) / (2.0 * dt)
    V[:, 0] = (-3.0 * X[:, 0] + 4.0 * X[:, 1] - X[:, 2]) / (2.0 * dt)
    V[:, -1] = (3.0 * X[:, -1] - 4.0 * X[:, -2] + X[:, -3]) / (2.0 * dt)

    A[:, 1:-1] = (X[:, 2:] - 2.0 * X[:, 1:-1] + X[:, :-2]) / dt**2
    A[:, 0] = (2.0 * X[:, 0] - 5.0 * X[:, 1] + 4.0 * X[:, 2] - X[:, 3]) / dt**2
    A[:, -1] = (2.0 * X[:, -1] - 5.0 * X[:, -2] + 4.0 * X[:, -3] - X[:, -4]) / dt**2
    return V, A


# ---------------------------------------------------------------------------
# CSV exchange. One file per matrix; row layout "t, entry_1, ..., entry_k"
# with a header row naming the columns. All floats carry 17 significant
# digits so a write-read cycle is lossless.
# ---------------------------------------------------------------------------


def _write_matrix_csv(path, times, A, prefix):
    n = A.shape[0]
    header = "t," + ",".join(f"{prefix}_{i + 1}" for i in range(n))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(header + "\n")
        for j in range(times.size):
            row = [FLOAT_FORMAT % times[j]]
            row.extend(FLOAT_FORMAT % v for v in A[:, j])
            fh.write(",".join(row) + "\n")


def _read_matrix_csv(path):
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].strip():
        raise FormatError("empty snapshot file", path=path, line=1)
    header = lines[0].split(",")
    if len(header) < 2 or header[0].strip() != "t":
        raise FormatError(
            "header must be 't,<name>_1,...'", path=path, line=1
        )
    width = len(header)
    times = []
    cols = []
    for lineno, ln in enumerate(lines[1:], start=2):
        if not ln.strip():
            continue
        parts = ln.split(",")
        if len(parts) != width:
            raise FormatError(
                f"expected {width} fields, found {len(parts)}",
                path=path,
                line=lineno,
            )
        try:
            values = [float(p) for p in parts]
        except ValueError:
            raise FormatError("non-numeric field", path=path, line=lineno)
        times.append(values[0])
        cols.append(values[1:])
    if not cols:
        raise InvalidInputError(f"{path}: no snapshots in file")
    return np.asarray(times), np.asarray(cols).T


def save_csv(data: TrajectoryData, directory) -> list:
    """Write one CSV file per present matrix into ``directory``.

    Returns the list of paths written.
    """
    os.makedirs(directory, exist_ok=True)
    written = []
    blocks = {
        "displacement": data.displacement,
        "velocity": data.velocity,
        "acceleration": data.acceleration,
        "input": data.input,
        "force": data.force,
    }
    for key, A in blocks.items():
        if A is None:
            continue
        path = os.path.join(directory, CSV_NAMES[key])
        _write_matrix_csv(path, data.times, A, _CSV_PREFIX[key])
        written.append(path)
    return written


def load_csv(source) -> TrajectoryData:
    """Read a trajectory back from CSV files.

    ``source`` is either a directory written by :func:`save_csv` or a
    mapping from block name (displacement, velocity, acceleration,
    input, force) to file path. The displacement, velocity, and
    acceleration blocks are required; time columns must agree exactly
    across files.
    """
    if isinstance(source, (str, os.PathLike)):
        paths = {}
        for key, name in CSV_NAMES.items():
            candidate = os.path.join(source, name)
            if os.path.exists(candidate):
                paths[key] = candidate
    else:
        paths = dict(source)

    for key in ("displacement", "velocity", "acceleration"):
        if key not in paths:
            raise MissingDataError(f"no {key} file to load")

    times = None
    blocks = {}
    for key, path in paths.items():
        t, A = _read_matrix_csv(path)
        if times is None:
            times = t
        elif t.shape != times.shape or np.any(t != times):
            raise InvalidInputError(
                f"{path}: time column disagrees with other blocks"
            )
        blocks[key] = A
    return TrajectoryData(
        times=times,
        displacement=blocks["displacement"],
        velocity=blocks["velocity"],
        acceleration=blocks["acceleration"],
        input=blocks.get("input"),
        force=blocks.get("force"),
    )
