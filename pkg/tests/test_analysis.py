"""Trajectory reconstruction, CoM work, and economy surfaces."""
import numpy as np
import pytest

from linwalk.gaits import GaitSolution, M_MAT, O_MAT, T_MAT, synthesize_gait
from linwalk.layout import selection_matrices
from linwalk.model import (
    StrideTiming, com_velocity_matrix, default_params, scaled_body,
)
from linwalk.analysis import (
    EconomyGrid, TdsPolicy, com_work_per_distance, economy_cell,
    economy_surface, parse_tds_policy, peak_line, sample_trajectory,
    write_economy_csv, write_peaks_csv, write_trajectory_csv,
    TRAJECTORY_HEADER,
)

SIIIC = StrideTiming(T_ds=0.1, T_ss=0.6028)


@pytest.fixture(scope="module")
def gait(adult):
    return synthesize_gait(adult, SIIIC, 1.0)


@pytest.fixture(scope="module")
def body66(adult):
    return scaled_body(adult, 66.0)


def test_sampling_includes_phase_boundary(gait):
    samples = sample_trajectory(gait, 50, with_forces=False)
    ts = [s.t for s in samples]
    assert any(abs(t - gait.timing.T_ds) < 1e-12 for t in ts)
    assert ts[0] == 0.0 and ts[-1] == pytest.approx(gait.timing.T_stride)


def test_endpoints_satisfy_mirror_relation(gait):
    samples = sample_trajectory(gait, 11, with_forces=False)
    sel = selection_matrices()
    v0 = sel.S_XP @ samples[0].Q
    v1 = sel.S_XP @ samples[-1].Q
    residual = M_MAT @ v0 - O_MAT @ M_MAT @ T_MAT @ v1
    assert np.max(np.abs(residual)) <= 1e-7


def test_swing_foot_at_rest_at_stride_ends(gait):
    samples = sample_trajectory(gait, 11, with_forces=False)
    assert np.max(np.abs(samples[0].Q[4:6])) <= 1e-8
    assert np.max(np.abs(samples[-1].Q[4:6])) <= 1e-8


def test_vertical_grf_is_trapezoidal(adult, gait):
    """Constant single-support plateau; affine double-support ramps that
    sum to body weight."""
    samples = sample_trajectory(gait, 201)
    W = adult.total_mass * adult.g
    ds = [s for s in samples if s.t <= gait.timing.T_ds + 1e-12]
    ss = [s for s in samples if s.t > gait.timing.T_ds + 1e-12]
    plateau = np.array([s.forces.F3[2] for s in ss])
    assert np.max(np.abs(plateau - W)) <= 1e-9 * W
    t_ds = np.array([s.t for s in ds])
    f2 = np.array([s.forces.F2[2] for s in ds])
    f3 = np.array([s.forces.F3[2] for s in ds])
    assert np.max(np.abs(f2 + f3 - W)) <= 1e-9 * W
    for trace in (f2, f3):
        coef = np.polyfit(t_ds, trace, 1)
        assert np.max(np.abs(np.polyval(coef, t_ds) - trace)) <= 1e-9 * W
    assert f2[0] == pytest.approx(W, rel=1e-9)
    assert f3[0] == pytest.approx(0.0, abs=1e-9 * W)


def test_com_velocity_matches_finite_differences(adult, gait):
    """CoM velocity from the linear operator equals the derivative of the
    sampled CoM positions."""
    from linwalk.analysis import propagate_states
    from linwalk.model import com_position_matrix
    dt = 1e-4
    t0 = 0.23
    states = propagate_states(gait, np.array([t0 - dt, t0, t0 + dt]))
    Cp = com_position_matrix(adult)
    Cv = com_velocity_matrix(adult)
    fd = (Cp @ states[2] - Cp @ states[0]) / (2 * dt)
    assert np.max(np.abs(fd - Cv @ states[1])) <= 1e-5


def test_constant_kinetic_energy_gives_zero_work(adult):
    """Degenerate check: a motionless stride does no CoM work."""
    frozen = GaitSolution(params=adult, timing=SIIIC, scenario="x", v_des=1.0,
                          d_sign=1.0, alpha=np.zeros(7),
                          basis=np.zeros((23, 7)), Q0=np.zeros(23))
    assert com_work_per_distance(frozen) == 0.0


def test_work_rejects_zero_speed(adult, gait):
    still = GaitSolution(params=adult, timing=SIIIC, scenario="x", v_des=0.0,
                         d_sign=1.0, alpha=gait.alpha, basis=gait.basis,
                         Q0=gait.Q0)
    with pytest.raises(ValueError):
        com_work_per_distance(still)


def test_work_matches_dense_positive_power_integral(body66):
    """Independent check of the refined-extrema evaluation: sum of positive
    kinetic-energy increments on a very dense grid."""
    from linwalk.analysis import propagate_states, sample_times
    from linwalk.model import mass_velocity_matrix
    ratio = TdsPolicy("human").ratio_at(1.6)
    T = 1.0 / 1.8
    tm = StrideTiming(ratio * T, (1 - ratio) * T)
    g = synthesize_gait(body66, tm, 1.6)
    work = com_work_per_distance(g)
    Vm = mass_velocity_matrix(body66)
    masses = np.repeat([body66.m1, body66.m2, body66.m3], 2)
    ts = sample_times(tm, 20000)
    ke = 0.5 * np.sum(masses * (propagate_states(g, ts) @ Vm.T) ** 2, axis=1)
    dense = np.sum(np.clip(np.diff(ke), 0.0, None))
    dense /= body66.total_mass * 1.6 * tm.T_stride
    assert work == pytest.approx(dense, rel=1e-4)


def test_work_invariant_under_grid_refinement(body66):
    g = synthesize_gait(body66, SIIIC, 1.3)
    w1 = com_work_per_distance(g, n_dense=1000)
    w2 = com_work_per_distance(g, n_dense=2000)
    assert abs(w2 - w1) <= 1e-6 * w1


def test_lip_like_has_larger_sagittal_com_swings(adult):
    """Removing swing/torso mass dynamics costs more CoM speed variation."""
    def sagittal_range(tag):
        g = synthesize_gait(adult, SIIIC, 1.0, tag)
        samples = sample_trajectory(g, 400, with_forces=False)
        vx = np.array([s.com_vel[0] for s in samples])
        return vx.max() - vx.min()
    assert sagittal_range("lip-like") > sagittal_range("minimal-torque")


def test_lip_like_costs_more_work(adult):
    """The mass-to-torso surgery raises the CoM work at matched speed and
    frequency."""
    w_lip = com_work_per_distance(synthesize_gait(adult, SIIIC, 1.0, "lip-like"))
    w_base = com_work_per_distance(synthesize_gait(adult, SIIIC, 1.0))
    assert w_lip > w_base


def test_peak_lines_differ_across_fixed_ratios(body66):
    """10 and 30 percent double-support shares give distinct optima."""
    freqs = np.arange(1.6, 3.01, 0.1)
    peaks = {}
    for ratio in (0.10, 0.30):
        grid = economy_surface(body66, [1.6], freqs, TdsPolicy("fixed", ratio))
        peaks[ratio] = peak_line(grid)[0].frequency
    assert abs(peaks[0.10] - peaks[0.30]) > 1e-3


def test_economy_mirror_invariance(body66):
    """Left- and right-support gaits burn identical energy."""
    g_pos = synthesize_gait(body66, SIIIC, 1.2, d_sign=+1.0)
    g_neg = synthesize_gait(body66, SIIIC, 1.2, d_sign=-1.0)
    w_pos = com_work_per_distance(g_pos)
    w_neg = com_work_per_distance(g_neg)
    assert abs(w_pos - w_neg) <= 1e-10 * w_pos


def test_tds_policy_values():
    human = TdsPolicy("human")
    assert human.ratio_at(0.8) == pytest.approx(0.273, abs=1e-12)
    assert human.ratio_at(2.5) == pytest.approx(0.12, abs=1e-12)
    fixed = parse_tds_policy("fixed:0.1")
    assert fixed.ratio_at(1.0) == 0.1
    assert parse_tds_policy("human") == human
    with pytest.raises(ValueError):
        parse_tds_policy("fixed:2")
    with pytest.raises(ValueError):
        parse_tds_policy("nonsense")


def test_economy_surface_and_flags(body66):
    grid = economy_surface(body66, [1.4, 1.6], [1.6, 1.8, 2.0],
                           TdsPolicy("human"))
    assert grid.economy.shape == (2, 3)
    assert np.all(grid.feasible)
    assert np.all(np.isfinite(grid.economy))
    assert np.all(grid.economy > 0)
    with pytest.raises(ValueError):
        economy_surface(body66, [], [1.0], TdsPolicy("human"))


def test_infeasible_cells_flagged_not_zeroed(body66):
    """A double-support share above one cannot time a stride."""
    bad = TdsPolicy("human")  # ratio_at(-12) = 1.425 > 1
    grid = economy_surface(body66, [-12.0, 1.4], [1.8], bad)
    assert not grid.feasible[0, 0]
    assert np.isnan(grid.economy[0, 0])
    assert grid.feasible[1, 0]


def test_parallel_surface_matches_serial(body66):
    """Worker processes produce bit-identical grids in the same order."""
    speeds = [1.5, 1.7]
    freqs = [1.8, 2.0]
    serial = economy_surface(body66, speeds, freqs, TdsPolicy("fixed", 0.2))
    parallel = economy_surface(body66, speeds, freqs, TdsPolicy("fixed", 0.2),
                               workers=2)
    assert np.array_equal(serial.economy, parallel.economy)
    assert np.array_equal(serial.feasible, parallel.feasible)


def test_peak_line_interior_and_boundary():
    grid = EconomyGrid(
        speeds=np.array([1.0, 2.0]),
        frequencies=np.array([1.0, 2.0, 3.0]),
        economy=np.array([[1.0, 3.0, 1.0], [1.0, 2.0, 4.0]]),
        tds_ratio=np.full((2, 3), 0.2),
        feasible=np.ones((2, 3), dtype=bool))
    peaks = peak_line(grid)
    assert peaks[0].frequency == pytest.approx(2.0)
    assert not peaks[0].boundary
    assert peaks[1].boundary and peaks[1].frequency == 3.0
    grid_bad = EconomyGrid(speeds=np.array([1.0]), frequencies=np.array([1.0]),
                           economy=np.array([[np.nan]]),
                           tds_ratio=np.array([[0.2]]),
                           feasible=np.zeros((1, 1), dtype=bool))
    with pytest.raises(ValueError):
        peak_line(grid_bad)


def test_csv_outputs(tmp_path, gait, body66):
    traj = tmp_path / "traj.csv"
    write_trajectory_csv(traj, sample_trajectory(gait, 11))
    lines = traj.read_text().splitlines()
    assert lines[0] == TRAJECTORY_HEADER
    assert len(lines) >= 12
    assert len(lines[1].split(",")) == len(TRAJECTORY_HEADER.split(","))
    # 17-significant-digit round trip
    value = float(lines[1].split(",")[1])
    assert value == gait.Q0[0]

    grid = economy_surface(body66, [1.5], [1.7, 1.9], TdsPolicy("fixed", 0.2))
    econ = tmp_path / "econ.csv"
    write_economy_csv(econ, grid)
    rows = econ.read_text().splitlines()
    assert rows[0] == "speed,frequency,tds_ratio,economy,feasible"
    assert len(rows) == 3
    peaks = tmp_path / "peaks.csv"
    write_peaks_csv(peaks, peak_line(grid))
    assert peaks.read_text().splitlines()[0] == "speed,frequency,boundary"
