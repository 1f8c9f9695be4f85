"""Trajectory reconstruction, CoM energetics, and walking-economy surfaces."""
from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dynamics import DOUBLE, SINGLE, DegenerateModelError, ForceSolution, solve_forces
from .gaits import (
    GaitSolution, InfeasibleConstraintsError, NullSpaceDimensionError,
    synthesize_gait,
)
from .layout import IP_X, IP_Y, IX_X1X, IX_X1Y, IX_X2X, IX_X2Y
from .model import (
    BodyParams, StrideTiming, com_position_matrix, com_velocity_matrix,
    geometry, mass_velocity_matrix,
)
from .transition import ControlDegeneracyError, stride_maps


@dataclass(frozen=True)
class TrajectorySample:
    """State, geometry, wrenches and CoM kinematics at one stride time."""

    t: float
    Q: np.ndarray
    y1: np.ndarray
    y2: np.ndarray
    y3: np.ndarray
    foot_swing: np.ndarray
    foot_stance: np.ndarray
    com_pos: np.ndarray
    com_vel: np.ndarray
    kinetic_energy: float
    forces: ForceSolution | None


def sample_times(timing: StrideTiming, n: int) -> np.ndarray:
    """Uniform times over the stride with the phase boundary inserted."""
    if n < 2:
        raise ValueError("need at least two samples")
    ts = np.linspace(0.0, timing.T_stride, n)
    if np.min(np.abs(ts - timing.T_ds)) > 1e-12:
        ts = np.sort(np.append(ts, timing.T_ds))
    return ts


def propagate_states(gait: GaitSolution, ts: np.ndarray) -> np.ndarray:
    """States (len(ts), 23) along the stride, by exact segment flows."""
    maps = stride_maps(gait.params, gait.timing)
    out = np.zeros((len(ts), len(gait.Q0)))
    Q = np.asarray(gait.Q0, dtype=float)
    t_prev = 0.0
    for k, t in enumerate(ts):
        if t > t_prev:
            Q = maps.flow(t_prev, t) @ Q
            t_prev = t
        out[k] = Q
    return out


def _phase_at(timing: StrideTiming, t: float) -> tuple[str, float]:
    if t <= timing.T_ds:
        return DOUBLE, t
    return SINGLE, t - timing.T_ds


def sample_trajectory(gait: GaitSolution, n: int = 401,
                      with_forces: bool = True) -> list[TrajectorySample]:
    """Reconstruct the stride at n uniform times (plus the phase boundary)."""
    ts = sample_times(gait.timing, n)
    states = propagate_states(gait, ts)
    Cp = com_position_matrix(gait.params)
    Cv = com_velocity_matrix(gait.params)
    M = gait.params.total_mass
    samples = []
    for t, Q in zip(ts, states):
        X1 = np.array([Q[IX_X1X], Q[IX_X1Y], gait.params.z1])
        X2 = np.array([Q[IX_X2X], Q[IX_X2Y], 0.0])
        X3 = np.array([Q[IP_X], Q[IP_Y], 0.0])
        geo = geometry(gait.params, X1, X2, X3, Q[22])
        vel = Cv @ Q
        forces = None
        if with_forces:
            phase, tl = _phase_at(gait.timing, t)
            forces = solve_forces(gait.params, gait.timing, phase, Q, tl)
        samples.append(TrajectorySample(
            t=float(t), Q=Q, y1=geo["y1"], y2=geo["y2"], y3=geo["y3"],
            foot_swing=X2, foot_stance=X3,
            com_pos=Cp @ Q, com_vel=vel,
            kinetic_energy=float(0.5 * M * vel @ vel),
            forces=forces))
    return samples


def _golden_extremum(f, a: float, b: float, sign: float, tol: float = 1e-10) -> float:
    """Golden-section maximizer (sign=+1) or minimizer (sign=-1) of f."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = sign * f(c), sign * f(d)
    while (b - a) > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = sign * f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = sign * f(d)
    return 0.5 * (a + b)


def com_work_per_distance(gait: GaitSolution, n_dense: int = 1000) -> float:
    """Net positive mechanical work per unit mass and distance, J/(kg m).

    The work is the sum of kinetic-energy rises over one stride (equal to
    the kinetic-energy range when the profile has a single rise and fall).
    The energy is that of the three moving masses; the swing leg's
    pump-and-brake flow is what penalizes fast stepping.  Turning points
    are located on a dense grid and sharpened by golden-section search, so
    the value is insensitive to the sampling density.
    """
    if gait.v_des == 0.0:
        raise ValueError("work per distance is undefined at zero speed")
    maps = stride_maps(gait.params, gait.timing)
    Vm = mass_velocity_matrix(gait.params)
    masses = np.repeat([gait.params.m1, gait.params.m2, gait.params.m3], 2)
    ts = sample_times(gait.timing, n_dense)
    states = propagate_states(gait, ts)
    ke = 0.5 * np.sum(masses * (states @ Vm.T) ** 2, axis=1)

    def ke_at(t: float) -> float:
        v = Vm @ (maps.H(t) @ gait.Q0)
        return float(0.5 * np.sum(masses * v * v))

    d = np.diff(ke)
    turn = [i for i in range(1, len(ts) - 1)
            if d[i - 1] * d[i] <= 0.0 and (d[i - 1] != 0.0 or d[i] != 0.0)]
    if not turn:
        return 0.0  # constant kinetic energy over the stride
    values = []
    for i in turn:
        sign = 1.0 if d[i - 1] > 0.0 else -1.0
        t_star = _golden_extremum(ke_at, ts[i - 1], ts[i + 1], sign)
        v_star = ke_at(t_star)
        values.append(max(v_star, ke[i]) if sign > 0 else min(v_star, ke[i]))
    # cyclic sequence of extrema (KE is stride-periodic for a valid gait)
    work = sum(max(values[(k + 1) % len(values)] - values[k], 0.0)
               for k in range(len(values)))
    distance = abs(gait.v_des) * gait.timing.T_stride
    return work / (gait.params.total_mass * distance)


@dataclass(frozen=True)
class TdsPolicy:
    """Double-support share of the stride: a fixed ratio, or the human
    speed-dependent law ratio(v) = 0.12 + (2.5 - v) * 0.09."""

    kind: str                  # "fixed" or "human"
    ratio: float | None = None

    def ratio_at(self, speed: float) -> float:
        if self.kind == "fixed":
            return float(self.ratio)
        if self.kind == "human":
            return 0.12 + (2.5 - speed) * 0.09
        raise ValueError(f"unknown T_ds policy kind {self.kind!r}")


def parse_tds_policy(text: str) -> TdsPolicy:
    """Parse 'human' or 'fixed:R' (e.g. fixed:0.1)."""
    if text == "human":
        return TdsPolicy(kind="human")
    if text.startswith("fixed:"):
        try:
            ratio = float(text.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad fixed T_ds ratio in {text!r}")
        if not 0.0 < ratio < 1.0:
            raise ValueError("fixed T_ds ratio must be in (0, 1)")
        return TdsPolicy(kind="fixed", ratio=ratio)
    raise ValueError(f"unknown T_ds policy {text!r}; expected 'human' or 'fixed:R'")


@dataclass(frozen=True)
class EconomyGrid:
    """Inverse cost of transport over a speed x step-frequency grid."""

    speeds: np.ndarray
    frequencies: np.ndarray
    economy: np.ndarray     # (n_speeds, n_frequencies), nan where infeasible
    tds_ratio: np.ndarray
    feasible: np.ndarray    # bool mask


_CELL_ERRORS = (NullSpaceDimensionError, InfeasibleConstraintsError,
                DegenerateModelError, ControlDegeneracyError,
                np.linalg.LinAlgError, ValueError)


def economy_cell(params: BodyParams, speed: float, frequency: float,
                 ratio: float, n_dense: int = 1000) -> float:
    """Economy (kg m / J) of the minimal-torque gait at one grid cell."""
    T_stride = 1.0 / frequency
    timing = StrideTiming(T_ds=ratio * T_stride, T_ss=(1.0 - ratio) * T_stride)
    gait = synthesize_gait(params, timing, v_des=speed)
    work = com_work_per_distance(gait)
    if not np.isfinite(work) or work <= 0.0:
        raise ValueError("non-positive CoM work")
    return 1.0 / work


def _economy_row(args) -> list[tuple[float, bool]]:
    params, speed, frequencies, ratio = args
    row = []
    for f in frequencies:
        try:
            if not 0.0 < ratio < 1.0:
                raise ValueError("T_ds ratio outside (0, 1)")
            row.append((economy_cell(params, speed, float(f), ratio), True))
        except _CELL_ERRORS:
            row.append((np.nan, False))
    return row


def economy_surface(params: BodyParams, speeds, frequencies,
                    policy: TdsPolicy, workers: int | None = None) -> EconomyGrid:
    """Walking economy over a speed x frequency grid.

    Step frequency defines the stride time (T_stride = 1/f); the policy
    fixes the double-support share per speed.  Cells where gait synthesis
    fails are flagged infeasible, never zeroed.  Rows are independent and
    may be evaluated in parallel; output ordering is deterministic.
    """
    speeds = np.asarray(list(speeds), dtype=float)
    frequencies = np.asarray(list(frequencies), dtype=float)
    if speeds.size == 0 or frequencies.size == 0:
        raise ValueError("speed and frequency grids must be non-empty")
    ratios = np.array([policy.ratio_at(v) for v in speeds])
    jobs = [(params, float(v), frequencies, float(r))
            for v, r in zip(speeds, ratios)]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_economy_row, jobs))
    else:
        rows = [_economy_row(j) for j in jobs]
    econ = np.array([[c[0] for c in row] for row in rows])
    ok = np.array([[c[1] for c in row] for row in rows])
    ratio_grid = np.repeat(ratios[:, None], len(frequencies), axis=1)
    return EconomyGrid(speeds=speeds, frequencies=frequencies,
                       economy=econ, tds_ratio=ratio_grid, feasible=ok)


@dataclass(frozen=True)
class PeakPoint:
    speed: float
    frequency: float
    boundary: bool


def peak_line(grid: EconomyGrid) -> list[PeakPoint]:
    """Economy-maximizing frequency per speed, parabola-refined.

    Interior maxima are sharpened by a quadratic fit through the three
    surrounding cells; maxima at the grid edge (or beside an infeasible
    cell) are flagged as boundary points.
    """
    peaks = []
    for i, v in enumerate(grid.speeds):
        row = grid.economy[i]
        ok = grid.feasible[i]
        if not np.any(ok):
            raise ValueError(f"all cells infeasible at speed {v}")
        masked = np.where(ok, row, -np.inf)
        j = int(np.argmax(masked))
        interior = 0 < j < len(row) - 1 and ok[j - 1] and ok[j + 1]
        if not interior:
            peaks.append(PeakPoint(speed=float(v),
                                   frequency=float(grid.frequencies[j]),
                                   boundary=True))
            continue
        em, e0, ep = row[j - 1], row[j], row[j + 1]
        denom = em - 2.0 * e0 + ep
        df = grid.frequencies[j + 1] - grid.frequencies[j]
        shift = 0.0 if denom == 0.0 else 0.5 * (em - ep) / denom
        peaks.append(PeakPoint(speed=float(v),
                               frequency=float(grid.frequencies[j] + shift * df),
                               boundary=False))
    return peaks


def _fmt(x) -> str:
    return format(float(x), ".17g")


TRAJECTORY_HEADER = ("t,X2x,X2y,X1x,X1y,vX2x,vX2y,vX1x,vX1y,comx,comy,"
                     "comvx,comvy,grf3z,grf2z,tau2y,tau2x,M3y,M3x,tau1y,tau1x")


def write_trajectory_csv(path: str | Path, samples: list[TrajectorySample]) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(TRAJECTORY_HEADER.split(","))
        for s in samples:
            if s.forces is None:
                raise ValueError("trajectory CSV needs force reconstruction")
            F = s.forces
            out.writerow([_fmt(x) for x in (
                s.t, *s.Q[0:4], *s.Q[4:8], *s.com_pos, *s.com_vel,
                F.F3[2], F.F2[2], F.tau2[1], F.tau2[0],
                F.M3[1], F.M3[0], F.tau1[1], F.tau1[0])])


def write_economy_csv(path: str | Path, grid: EconomyGrid) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["speed", "frequency", "tds_ratio", "economy", "feasible"])
        for i, v in enumerate(grid.speeds):
            for j, f in enumerate(grid.frequencies):
                out.writerow([_fmt(v), _fmt(f), _fmt(grid.tds_ratio[i, j]),
                              _fmt(grid.economy[i, j]),
                              "1" if grid.feasible[i, j] else "0"])


def write_peaks_csv(path: str | Path, peaks: list[PeakPoint]) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["speed", "frequency", "boundary"])
        for p in peaks:
            out.writerow([_fmt(p.speed), _fmt(p.frequency), "1" if p.boundary else "0"])
