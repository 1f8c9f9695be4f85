"""Independent verification path: algebraically reduced accelerations + RK4.

The balance laws reduce by hand to small closed forms:

  single support, per axis, unknowns (pelvis accel a1, swing accel a2):
    the swing-leg moment row and the pelvis-moment row (with the stance-leg
    wrench substituted) form a constant 2x2 system;
  double support: the pelvis-moment rows close directly once the vertical
    loads follow the linear weight transfer F2z = (1 - t/T_ds) M g,
    F3z = (t/T_ds) M g.

RK4 integrates these at fixed step, rebuilding the instantaneous linear
acceleration map from the reduced equations at every stage time; it never
touches the production elimination or the stride maps.  Fixed-step RK4 is
used (not adaptive) so trajectories are bit-reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layout import (
    Q_DIM, ID_SIDE, IP_X, IP_Y, IU_AX, IU_AY, IU_HX, IU_HY,
    IRU_AX, IRU_AY, IRU_HX, IRU_HY, IW_F1X, IW_F1Y, IW_M1X, IW_M1Y,
    IX_X1X, IX_X1Y, IX_X2X, IX_X2Y, W_SLICE,
)
from .model import BodyParams, StrideTiming


def _consts(params: BodyParams) -> dict[str, float]:
    m1, m_leg = params.m1, params.m2
    k = params.kappa
    return {
        "m1": m1, "m_leg": m_leg, "z1": params.z1, "z3": params.z3,
        "g": params.g, "k": k, "w": params.w,
        "Mg": (m1 + 2.0 * m_leg) * params.g,
        # effective masses of the pelvis-moment rows
        "mbar1": m1 + (1.0 - k) * (2.0 - k) * m_leg,      # one leg swinging
        "mbar": m1 + 2.0 * m_leg * (1.0 - k) ** 2,        # both feet planted
    }


def accel_single(params: BodyParams, T_ss: float, q: np.ndarray, t) -> np.ndarray:
    """Closed-form single-support accelerations (a2x a2y a1x a1y).

    Entries of q may broadcast against array-valued t.
    """
    c = _consts(params)
    k, z1, z3, g = c["k"], c["z1"], c["z3"], c["g"]
    m1, m_leg, Mg, w = c["m1"], c["m_leg"], c["Mg"], c["w"]
    d = q[ID_SIDE]
    rt = np.asarray(t, dtype=float) / T_ss

    r2x = q[IX_X2X] - q[IX_X1X]
    r2y = q[IX_X2Y] - q[IX_X1Y] - w * d / 2.0
    r3x = q[IP_X] - q[IX_X1X]
    r3y = q[IP_Y] - q[IX_X1Y] + w * d / 2.0
    tau2y = q[IU_HY] + rt * q[IRU_HY]
    tau2x = q[IU_HX] + rt * q[IRU_HX]
    M3y = q[IU_AY] + rt * q[IRU_AY]
    M3x = q[IU_AX] + rt * q[IRU_AX]

    # swing-leg moment row / pelvis moment row, per axis
    a11 = k * z1 * m_leg * (1.0 - k)
    a12 = k * k * z1 * m_leg
    a21 = z3 * m1 + z1 * c["mbar1"]
    a22 = z1 * k * m_leg
    det = a11 * a22 - a12 * a21
    if abs(det) < 1e-14 * (abs(a21) + 1.0) * (abs(a22) + abs(a12) + 1.0):
        from .dynamics import DegenerateModelError
        raise DegenerateModelError("swing dynamics singular (massless or hip-borne leg mass)")

    b1s = -(tau2y + k * m_leg * g * r2x)
    b2s = (q[IW_M1Y] + (z1 + z3) * q[IW_F1X] - tau2y + M3y
           - r3x * Mg + k * m_leg * g * r3x)
    a1x = (a22 * b1s - a12 * b2s) / det
    a2x = (-a21 * b1s + a11 * b2s) / det

    b1l = tau2x - k * m_leg * g * r2y
    b2l = (-q[IW_M1X] + (z1 + z3) * q[IW_F1Y] + tau2x - M3x
           - r3y * Mg + k * m_leg * g * r3y + (w * d / 2.0) * Mg)
    a1y = (a22 * b1l - a12 * b2l) / det
    a2y = (-a21 * b1l + a11 * b2l) / det

    shape = np.broadcast(rt, q[0]).shape
    out = np.zeros((4,) + shape)
    out[0], out[1], out[2], out[3] = a2x, a2y, a1x, a1y
    return out


def accel_double(params: BodyParams, T_ds: float, q: np.ndarray, t) -> np.ndarray:
    """Closed-form double-support accelerations (0 0 a1x a1y)."""
    c = _consts(params)
    k, z1, z3, g = c["k"], c["z1"], c["z3"], c["g"]
    m1, m_leg, Mg, w = c["m1"], c["m_leg"], c["Mg"], c["w"]
    d = q[ID_SIDE]
    s = np.asarray(t, dtype=float) / T_ds

    r2x = q[IX_X2X] - q[IX_X1X]
    r2y = q[IX_X2Y] - q[IX_X1Y] - w * d / 2.0
    r3x = q[IP_X] - q[IX_X1X]
    r3y = q[IP_Y] - q[IX_X1Y] + w * d / 2.0
    M2y = (1.0 - s) * (q[IU_AY] + q[IRU_AY])
    M2x = -(1.0 - s) * (q[IU_AX] + q[IRU_AX])
    M3y = s * q[IU_AY]
    M3x = s * q[IU_AX]
    F2z = (1.0 - s) * Mg
    F3z = s * Mg

    den = z3 * m1 + z1 * c["mbar"]
    a1x = (q[IW_M1Y] + (z1 + z3) * q[IW_F1X] + (M2y + M3y)
           - (r2x * F2z + r3x * F3z) + k * m_leg * g * (r2x + r3x)) / den
    a1y = (-q[IW_M1X] + (z1 + z3) * q[IW_F1Y] - (M2x + M3x)
           - (r2y * F2z + r3y * F3z) + k * m_leg * g * (r2y + r3y)
           + (w * d / 2.0) * (F3z - F2z)) / den

    shape = np.broadcast(s, q[0]).shape
    out = np.zeros((4,) + shape)
    out[2], out[3] = a1x, a1y
    return out


def phase_operator(params: BodyParams, phase_T: float, single: bool,
                   ts: np.ndarray) -> np.ndarray:
    """Instantaneous acceleration maps K(t), shape (len(ts), 4, 23).

    The closed forms are linear in Q at fixed t; probing with basis vectors
    recovers the map, vectorized over the stage times.
    """
    fn = accel_single if single else accel_double
    ts = np.asarray(ts, dtype=float)
    K = np.zeros((len(ts), 4, Q_DIM))
    zero = fn(params, phase_T, np.zeros(Q_DIM), ts)
    for i in range(Q_DIM):
        e = np.zeros(Q_DIM)
        e[i] = 1.0
        K[:, :, i] = (fn(params, phase_T, e, ts) - zero).T
    return K


@dataclass(frozen=True)
class Push:
    """Piecewise-constant disturbance wrench active on [t_on, t_on + duration)."""

    t_on: float
    duration: float
    wrench: tuple[float, float, float, float]  # (F1x, F1y, M1y, M1x)


@dataclass(frozen=True)
class OracleConfig:
    step: float = 1e-5
    pushes: tuple[Push, ...] = field(default_factory=tuple)
    save_every: int = 200

    def __post_init__(self):
        if self.step <= 0.0:
            raise ValueError("step must be positive")


@dataclass(frozen=True)
class OracleTrajectory:
    t: np.ndarray       # (n,)
    Q: np.ndarray       # (n, 23)

    @property
    def end(self) -> np.ndarray:
        return self.Q[-1]


_W_COLS = list(range(18, 22))


def _rk4_phase(params: BodyParams, phase_T: float, single: bool,
               Q: np.ndarray, step: float, t_local: float = 0.0,
               duration: float | None = None,
               record=None, record_offset: float = 0.0) -> np.ndarray:
    """March a batch of states (n, 23) over [t_local, t_local + duration]
    of one phase (default: the whole phase).  All non-state entries of Q,
    including the disturbance wrench, are held constant."""
    if duration is None:
        duration = phase_T - t_local
    n_steps = max(1, int(round(duration / step)))
    h = duration / n_steps
    Q = Q.copy()
    pos = [0, 1, 2, 3] if single else [2, 3]
    vel = [p + 4 for p in pos]
    frozen = [i for i in range(Q_DIM) if i not in pos and i not in vel]

    chunk = 2000
    done = 0
    while done < n_steps:
        m = min(chunk, n_steps - done)
        base = (done + np.arange(m)) * h
        keys = np.concatenate([
            np.round(base / (0.5 * h)).astype(np.int64),
            np.round(base / (0.5 * h)).astype(np.int64) + 1,
            np.round(base / (0.5 * h)).astype(np.int64) + 2,
        ])
        uniq, inv = np.unique(keys, return_inverse=True)
        ts = t_local + uniq * (0.5 * h)
        K = phase_operator(params, phase_T, single, ts)
        Krows = K[:, pos, :]
        Kpos = Krows[:, :, pos]                      # (nt, na, na)
        # forcing contribution of the frozen entries, per stage time
        ct = np.einsum("trj,nj->tnr", Krows[:, :, frozen], Q[:, frozen])

        i0, im, ie = inv[:m], inv[m:2 * m], inv[2 * m:]
        for j in range(m):
            K0, Km, Ke = Kpos[i0[j]], Kpos[im[j]], Kpos[ie[j]]
            c0, cm, ce = ct[i0[j]], ct[im[j]], ct[ie[j]]
            P, V = Q[:, pos], Q[:, vel]
            k1v = P @ K0.T + c0
            p2 = P + 0.5 * h * V
            k2v = p2 @ Km.T + cm
            p3 = P + 0.5 * h * (V + 0.5 * h * k1v)
            k3v = p3 @ Km.T + cm
            p4 = P + h * (V + 0.5 * h * k2v)
            k4v = p4 @ Ke.T + ce
            Q[:, pos] = P + h * V + (h * h / 6.0) * (k1v + k2v + k3v)
            Q[:, vel] = V + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
            if record is not None:
                record(record_offset + (done + j + 1) * h, Q)
        done += m
    return Q


def integrate_batch(params: BodyParams, timing: StrideTiming, Q0: np.ndarray,
                    step: float = 1e-5, phase: str | None = None) -> np.ndarray:
    """End states after one stride (or one phase) for a batch (n, 23)."""
    Q0 = np.atleast_2d(np.asarray(Q0, dtype=float))
    if phase == "single":
        return _rk4_phase(params, timing.T_ss, True, Q0, step)
    if phase == "double":
        return _rk4_phase(params, timing.T_ds, False, Q0, step)
    mid = _rk4_phase(params, timing.T_ds, False, Q0, step)
    return _rk4_phase(params, timing.T_ss, True, mid, step)


def apply_push(params: BodyParams, timing: StrideTiming, Q0: np.ndarray,
               push: Push, config: OracleConfig | None = None) -> OracleTrajectory:
    """RK4 trajectory with one extra scheduled push added to the config."""
    from dataclasses import replace

    config = config or OracleConfig()
    return integrate(params, timing, Q0,
                     replace(config, pushes=config.pushes + (push,)))


def push_end_state(params: BodyParams, timing: StrideTiming, Q0: np.ndarray,
                   push: Push) -> np.ndarray:
    """Stride end state under one push, by piecewise map composition.

    The disturbance columns are constant within each segment, so the exact
    closed-form flows carry the state to the push onset, across the pushed
    window with the wrench substituted, and on to the stride end.
    """
    from .transition import stride_maps

    if push.t_on < 0.0 or push.t_on + push.duration > timing.T_stride + 1e-12:
        raise ValueError("push interval extends beyond the stride")
    maps = stride_maps(params, timing)
    Q = np.asarray(Q0, dtype=float).copy()
    base_w = Q[W_SLICE].copy()
    t1 = push.t_on
    t2 = push.t_on + push.duration
    if t1 > 0.0:
        Q = maps.flow(0.0, t1) @ Q
    Q[W_SLICE] = push.wrench
    if t2 > t1:
        Q = maps.flow(t1, t2) @ Q
    Q[W_SLICE] = base_w
    if t2 < timing.T_stride:
        Q = maps.flow(t2, timing.T_stride) @ Q
    return Q


def integrate(params: BodyParams, timing: StrideTiming, Q0: np.ndarray,
              config: OracleConfig | None = None) -> OracleTrajectory:
    """RK4 trajectory over one full stride with optional scheduled pushes.

    The march is split at the phase boundary and at every push edge, so
    each RK4 segment sees constant forcing (pushes must not overlap).
    """
    config = config or OracleConfig()
    if config.step > min(timing.T_ds, timing.T_ss) / 100.0:
        raise ValueError("step too coarse: must be <= phase duration / 100")
    Q0 = np.asarray(Q0, dtype=float)
    if not np.all(np.isfinite(Q0)):
        raise ValueError("initial state must be finite")
    for p in config.pushes:
        if p.t_on < 0.0 or p.t_on + p.duration > timing.T_stride + 1e-12:
            raise ValueError("push interval extends beyond the stride")

    base_w = Q0[W_SLICE].copy()

    def w_on(a: float, b: float) -> np.ndarray:
        for p in config.pushes:
            if p.t_on <= a + 1e-15 and b <= p.t_on + p.duration + 1e-15:
                return np.asarray(p.wrench, dtype=float)
        return base_w

    cuts = {0.0, timing.T_ds, timing.T_stride}
    for p in config.pushes:
        cuts.add(p.t_on)
        cuts.add(p.t_on + p.duration)
    edges = sorted(t for t in cuts if 0.0 <= t <= timing.T_stride + 1e-12)

    times = [0.0]
    states = [Q0.copy()]
    counter = {"k": 0}

    def record(t, Q):
        counter["k"] += 1
        if counter["k"] % config.save_every == 0:
            times.append(t)
            states.append(Q[0].copy())

    Q = np.atleast_2d(Q0).copy()
    for a, b in zip(edges[:-1], edges[1:]):
        if b - a < 1e-15:
            continue
        Q[:, W_SLICE] = w_on(a, b)
        single = a >= timing.T_ds - 1e-15
        phase_T = timing.T_ss if single else timing.T_ds
        t_local = a - timing.T_ds if single else a
        Q = _rk4_phase(params, phase_T, single, Q, config.step,
                       t_local=t_local, duration=b - a,
                       record=record, record_offset=a)
    end = Q[0].copy()
    end[W_SLICE] = base_w
    if times[-1] < timing.T_stride - 1e-12:
        times.append(timing.T_stride)
        states.append(end)
    else:
        states[-1] = end
    return OracleTrajectory(t=np.array(times), Q=np.vstack(states))
