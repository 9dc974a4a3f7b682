"""Simulation engines: exact switched propagation and RK4 averaging.

The switched engine never discretizes: within each switch configuration the
model is affine, so states advance through matrix exponentials of the
augmented 5x5 block [[A, c], [0, 0]] (exact to rounding). The averaged engine
is a classical fixed-step RK4 on dx/dt = A(mu(t)) x + B u(t).

All internal integration happens in the shifted x-frame; trajectories are
returned in the frame of the supplied initial state. Energy is always
V = x' P x of the shifted state, the storage function of the stability
analysis.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .circuit import CircuitParams, ModelMatrices, StateVector, a_of_mu, build
from .signals import DutyProfile, PwmSignal, mu_at

__all__ = [
    "DivergenceError",
    "SimConfig",
    "Trajectory",
    "simulate_averaged",
    "simulate_switched",
    "period_map",
    "cycle_map",
]

CSV_HEADER = ["t", "i_L1", "i_L2", "v_C1", "v_C2", "v_o", "input", "V_energy", "event"]

# states beyond this norm are treated as numerical blow-up
DIVERGENCE_LIMIT = 1e12


class DivergenceError(RuntimeError):
    """Integration produced a non-finite or absurdly large state.

    Attributes
    ----------
    last_valid_time : float
        Last time at which the state was still finite.
    """

    def __init__(self, message: str, last_valid_time: float):
        super().__init__(message)
        self.last_valid_time = float(last_valid_time)


@dataclass(frozen=True)
class SimConfig:
    """Run controls shared by both engines.

    horizon applies to the averaged engine (the switched engine runs over its
    signal's full span). avg_step is an upper bound on the RK4 step; the
    effective step also respects the fastest natural frequency of A(0).
    sample_stride decimates emitted rows. ccm_check records a ccm-violation
    event whenever the instantaneous v_C1 drops below -Vin (flag only,
    integration continues).
    """

    horizon: float | None = None
    avg_step: float = 0.01
    sample_stride: int = 10
    ccm_check: bool = True

    def __post_init__(self):
        if self.horizon is not None and self.horizon <= 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.avg_step <= 0:
            raise ValueError(f"avg_step must be positive, got {self.avg_step}")
        if self.sample_stride < 1:
            raise ValueError(f"sample_stride must be >= 1, got {self.sample_stride}")


@dataclass
class Trajectory:
    """Sampled run: times, states in `frame`, duty offset, energy, row kinds.

    inputs holds the duty offset mu(t) at each row. energy holds
    V = x' P x of the shifted-frame state (frame-independent by definition).
    kinds entries are 'sample', 'switch', or 'ccm-violation'.
    """

    t: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    energy: np.ndarray
    kinds: list[str]
    frame: str
    params: CircuitParams
    events: list[tuple[float, str]] = field(init=False)

    def __post_init__(self):
        n = len(self.t)
        if not (self.states.shape == (n, 4) and len(self.inputs) == n and len(self.energy) == n and len(self.kinds) == n):
            raise ValueError("trajectory arrays must share one length")
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        self.events = list(zip((float(x) for x in self.t), self.kinds))

    def to_frame(self, frame: str) -> "Trajectory":
        """Return the same run expressed in 'z' or 'x' coordinates."""
        if frame not in ("z", "x"):
            raise ValueError(f"frame must be 'z' or 'x', got {frame!r}")
        if frame == self.frame:
            return self
        shift = np.array([0.0, 0.0, self.params.Vin, 0.0])
        states = self.states + shift if frame == "z" else self.states - shift
        return Trajectory(self.t, states, self.inputs, self.energy, list(self.kinds), frame, self.params)

    def recompute_energy(self) -> np.ndarray:
        """V = x' P x re-evaluated from the stored states (diagnostic)."""
        x = self.to_frame("x").states
        w = 0.5 * np.array([self.params.L1, self.params.L2, self.params.C1, self.params.C2])
        return np.einsum("ij,j,ij->i", x, w, x)

    def row_indices_at(self, times: np.ndarray) -> np.ndarray:
        """Indices of rows matching `times` (within emission dedup tolerance)."""
        times = np.asarray(times, dtype=float)
        idx = np.clip(np.searchsorted(self.t, times), 0, len(self.t) - 1)
        left = np.clip(idx - 1, 0, len(self.t) - 1)
        idx = np.where(np.abs(self.t[left] - times) < np.abs(self.t[idx] - times), left, idx)
        tol = 1e-9 * np.maximum(1.0, np.abs(times))
        if np.any(np.abs(self.t[idx] - times) > tol):
            raise KeyError("some requested times are not trajectory rows")
        return idx

    def write_csv(self, path) -> None:
        """17-significant-digit CSV with the fixed interface header.

        State columns carry this trajectory's frame; v_o repeats the output
        voltage v_C2 (identical in both frames since the frame shift only
        moves v_C1).
        """
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER)
            for i in range(len(self.t)):
                row = [
                    format(self.t[i], ".17g"),
                    *[format(v, ".17g") for v in self.states[i]],
                    format(self.states[i, 3], ".17g"),
                    format(self.inputs[i], ".17g"),
                    format(self.energy[i], ".17g"),
                    self.kinds[i],
                ]
                writer.writerow(row)


def _energy(x: np.ndarray, params: CircuitParams) -> float:
    w = 0.5 * np.array([params.L1, params.L2, params.C1, params.C2])
    return float(np.dot(x * w, x))


def _as_x_frame(x0: StateVector, params: CircuitParams) -> tuple[np.ndarray, str]:
    if x0.frame == "z":
        return x0.values - np.array([0.0, 0.0, params.Vin, 0.0]), "z"
    return x0.values.copy(), "x"


def _drive_fn(drive, profile_mu):
    """Normalize the drive spec to a callable u(t).

    'mu' ties the input to the duty offset (the nominal inverter model);
    a float is a constant replacement input; None means unforced; a callable
    is used as-is.
    """
    if drive == "mu":
        return profile_mu
    if drive is None:
        return lambda t: 0.0
    if isinstance(drive, (int, float)):
        u = float(drive)
        return lambda t: u
    if callable(drive):
        return drive
    raise ValueError(f"drive must be 'mu', a number, a callable, or None; got {drive!r}")


class _Propagator:
    """Caches exact one-segment affine maps keyed by (mode, duration, input)."""

    def __init__(self, m: ModelMatrices):
        self.m = m
        self.cache: dict[tuple[float, float, float], tuple[np.ndarray, np.ndarray]] = {}

    def segment(self, mu: float, dt: float, u: float) -> tuple[np.ndarray, np.ndarray]:
        key = (mu, dt, u)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        a = a_of_mu(self.m, mu)
        c = self.m.b_drive * u
        if np.all(c == 0.0):
            phi = numerics.expm(a, dt)
            psi = np.zeros(4)
        else:
            aug = np.zeros((5, 5))
            aug[:4, :4] = a
            aug[:4, 4] = c
            e = numerics.expm(aug, dt)
            phi, psi = e[:4, :4], e[:4, 4]
        self.cache[key] = (phi, psi)
        return phi, psi


def _segment_drive(drive, mode_mu: float, t_start: float) -> float:
    """Constant input value over one switched segment."""
    if drive == "mu":
        return mode_mu
    if drive is None:
        return 0.0
    if isinstance(drive, (int, float)):
        return float(drive)
    raise ValueError(
        "switched simulation needs a piecewise-constant drive: 'mu', a number, or None"
    )


def simulate_switched(
    params: CircuitParams,
    sig: PwmSignal,
    x0: StateVector,
    cfg: SimConfig | None = None,
    drive="mu",
    sample_times: np.ndarray | None = None,
) -> Trajectory:
    """Exact trajectory of the switched model under a PWM signal.

    Rows are emitted at every switch instant, at the per-period sampling
    instants kT + eps/2 (when eps > 0), and at a uniform grid of spacing
    avg_step * sample_stride (or at `sample_times` when given). The state is
    advanced segment-by-segment through cached matrix exponentials, so row
    placement does not affect accuracy.

    drive: 'mu' runs the nominal model dx/dt = A(mu)x + B*mu; a float runs
    the replacement-input variant dx/dt = A(mu)x + B*u.
    """
    cfg = cfg or SimConfig()
    m = build(params)
    x, frame_in = _as_x_frame(x0, params)
    total = sig.total_time

    # -- assemble emission targets: time -> kind, switch beats sample
    targets: dict[float, str] = {0.0: "sample", total: "sample"}
    for k in range(sig.horizon):
        for tt in (k * sig.T, float(sig.switch_times[k])):
            if 0.0 < tt < total:
                targets[tt] = "switch"
        if sig.eps > 0.0:
            ts = k * sig.T + 0.5 * sig.eps
            targets.setdefault(ts, "sample")
    if sample_times is None:
        dt_samp = cfg.avg_step * cfg.sample_stride
        n_samp = int(np.floor(total / dt_samp))
        sample_times = np.arange(1, n_samp + 1) * dt_samp
    for ts in np.asarray(sample_times, dtype=float):
        if 0.0 <= ts <= total:
            targets.setdefault(float(ts), "sample")
    # drop near-duplicates from independently computed time expressions,
    # keeping the switch-kind row when the two collide
    tol = 1e-12 * max(sig.T, 1.0)
    emit_times = []
    for tt in sorted(targets):
        if emit_times and tt - emit_times[-1] <= tol:
            if targets[tt] == "switch" and targets.get(emit_times[-1]) != "switch":
                targets[emit_times[-1]] = "switch"
            continue
        emit_times.append(tt)
    emit_times = np.array(emit_times)

    # -- segment boundaries: period starts and fall instants
    bounds = [0.0]
    modes = []
    for k in range(sig.horizon):
        fall = float(sig.switch_times[k])
        end = (k + 1) * sig.T
        if fall > bounds[-1]:
            bounds.append(min(fall, total))
            modes.append(0.5)
        if end > bounds[-1]:
            bounds.append(min(end, total))
            modes.append(-0.5)

    prop = _Propagator(m)
    shift_vc1 = params.Vin  # x3 + Vin is the physical v_C1
    rows_t, rows_x, rows_mu, rows_kind = [], [], [], []

    def emit(t: float, x: np.ndarray, mu: float, kind: str):
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > DIVERGENCE_LIMIT:
            last = rows_t[-1] if rows_t else 0.0
            raise DivergenceError(f"state diverged by t={t:.6g}", last_valid_time=last)
        if cfg.ccm_check and (x[2] + shift_vc1) < -params.Vin:
            kind = "ccm-violation"
        rows_t.append(t)
        rows_x.append(x.copy())
        rows_mu.append(mu)
        rows_kind.append(kind)

    ei = 0
    if emit_times[0] == 0.0:
        emit(0.0, x, mu_at(sig, 0.0), targets.get(0.0, "sample"))
        ei = 1
    t_cur = 0.0
    for si in range(len(modes)):
        seg_end, mode = bounds[si + 1], modes[si]
        u_seg = _segment_drive(drive, mode, t_cur)
        while ei < len(emit_times) and emit_times[ei] <= seg_end:
            t_next = emit_times[ei]
            phi, psi = prop.segment(mode, t_next - t_cur, u_seg)
            x = phi @ x + psi
            t_cur = t_next
            kind = targets.get(t_next, "sample")
            # boundary rows belong to the segment they close; right continuity
            # of mu means the new mode's value shows from the boundary onward
            mu_here = mu_at(sig, t_next) if t_next < total else mode
            emit(t_next, x, mu_here, kind)
            ei += 1
        if t_cur < seg_end:
            phi, psi = prop.segment(mode, seg_end - t_cur, u_seg)
            x = phi @ x + psi
            t_cur = seg_end

    states = np.array(rows_x)
    energy = np.array([_energy(xx, params) for xx in states])
    if frame_in == "z":
        states = states + np.array([0.0, 0.0, params.Vin, 0.0])
    return Trajectory(
        np.array(rows_t), states, np.array(rows_mu), energy, rows_kind, frame_in, params
    )


def simulate_averaged(
    params: CircuitParams,
    profile: DutyProfile,
    x0: StateVector,
    cfg: SimConfig,
    drive="mu",
) -> Trajectory:
    """Fixed-step RK4 integration of the averaged model dx/dt = A(mu)x + Bu.

    The step is min(cfg.avg_step, 1/(50 * max natural frequency)), the latter
    estimated from the eigenvalue moduli of A(0); the horizon is then divided
    evenly. Every sample_stride-th step is emitted (plus the endpoints).
    """
    if cfg.horizon is None:
        raise ValueError("averaged simulation needs cfg.horizon")
    m = build(params)
    x, frame_in = _as_x_frame(x0, params)
    mu_fn = profile.mu_at
    u_fn = _drive_fn(drive, mu_fn)

    omega_max = numerics.spectral_radius(a_of_mu(m, 0.0))
    dt_cap = cfg.avg_step if omega_max == 0.0 else min(cfg.avg_step, 1.0 / (50.0 * omega_max))
    n_steps = max(1, int(np.ceil(cfg.horizon / dt_cap)))
    dt = cfg.horizon / n_steps

    a1, a2, b = m.a1, m.a2, m.b_drive

    def rhs(t: float, xx: np.ndarray) -> np.ndarray:
        mu = float(mu_fn(t))
        a = (mu + 0.5) * a1 + (0.5 - mu) * a2
        return a @ xx + b * float(u_fn(t))

    rows_t, rows_x, rows_mu, rows_kind = [], [], [], []

    def emit(t: float, xx: np.ndarray):
        kind = "sample"
        if cfg.ccm_check and (xx[2] + params.Vin) < -params.Vin:
            kind = "ccm-violation"
        rows_t.append(t)
        rows_x.append(xx.copy())
        rows_mu.append(float(mu_fn(t)))
        rows_kind.append(kind)

    emit(0.0, x)
    t = 0.0
    for i in range(n_steps):
        k1 = rhs(t, x)
        k2 = rhs(t + 0.5 * dt, x + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, x + 0.5 * dt * k2)
        k4 = rhs(t + dt, x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = (i + 1) * dt
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > DIVERGENCE_LIMIT:
            raise DivergenceError(f"state diverged by t={t:.6g}", last_valid_time=rows_t[-1])
        if (i + 1) % cfg.sample_stride == 0 or i == n_steps - 1:
            emit(t, x)

    states = np.array(rows_x)
    energy = np.array([_energy(xx, params) for xx in states])
    if frame_in == "z":
        states = states + np.array([0.0, 0.0, params.Vin, 0.0])
    return Trajectory(
        np.array(rows_t), states, np.array(rows_mu), energy, rows_kind, frame_in, params
    )


def period_map(
    params: CircuitParams,
    sig: PwmSignal,
    k: int = 0,
    drive="mu",
    offset: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Exact affine map (Phi, psi) across period k, sampled at kT + offset.

    Maps x(kT + offset) to x((k+1)T + offset); offset defaults to eps/2, the
    sampling instant of the contraction analysis, and must satisfy
    0 <= offset <= eps so both endpoints land inside the first configuration.
    With the drive off, Phi is the product e^(A_I offset) e^(A_II t2) e^(A_I t1)
    of the period's segment exponentials. Class membership of the signal is
    not enforced here, so degenerate periods (zero-length second segment)
    compose correctly.
    """
    if not (0 <= k < sig.horizon):
        raise ValueError(f"period index {k} outside signal horizon {sig.horizon}")
    if offset is None:
        offset = 0.5 * sig.eps
    if not (0.0 <= offset <= max(sig.eps, 0.0)):
        raise ValueError(f"offset must lie in [0, eps], got {offset}")
    fall = float(sig.switch_times[k])
    t0 = k * sig.T + offset
    if fall < t0:
        raise ValueError(f"period {k} fall time {fall} precedes sampling instant {t0}")
    t1 = fall - t0  # remaining first-configuration time
    t2 = (k + 1) * sig.T - fall  # second-configuration time
    if t2 < 0:
        raise ValueError(f"period {k} fall time {fall} beyond period end")
    m = build(params)
    prop = _Propagator(m)
    phi = np.eye(4)
    psi = np.zeros(4)
    for mode, dur in ((0.5, t1), (-0.5, t2), (0.5, offset)):
        if dur == 0.0:
            continue
        u = _segment_drive(drive, mode, 0.0)
        p_seg, q_seg = prop.segment(mode, dur, u)
        phi = p_seg @ phi
        psi = p_seg @ psi + q_seg
    return phi, psi


def cycle_map(
    params: CircuitParams,
    sig: PwmSignal,
    drive="mu",
    offset: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Affine map across the signal's whole span (all periods composed)."""
    phi = np.eye(4)
    psi = np.zeros(4)
    for k in range(sig.horizon):
        p_k, q_k = period_map(params, sig, k=k, drive=drive, offset=offset)
        phi = p_k @ phi
        psi = p_k @ psi + q_k
    return phi, psi


def averaged_affine_map(
    params: CircuitParams,
    profile: DutyProfile,
    cfg: SimConfig,
    drive="mu",
) -> tuple[np.ndarray, np.ndarray]:
    """Affine map (Phi, psi) of the averaged flow over [0, cfg.horizon].

    Every RK4 step of an affine system is itself an affine map of the state,
    so integrating the identity matrix and the zero offset with the same step
    rule as simulate_averaged reproduces that endpoint exactly: for any x0,
    Phi @ x0 + psi matches the simulated x(horizon) to rounding.
    """
    if cfg.horizon is None:
        raise ValueError("averaged affine map needs cfg.horizon")
    m = build(params)
    mu_fn = profile.mu_at
    u_fn = _drive_fn(drive, mu_fn)

    omega_max = numerics.spectral_radius(a_of_mu(m, 0.0))
    dt_cap = cfg.avg_step if omega_max == 0.0 else min(cfg.avg_step, 1.0 / (50.0 * omega_max))
    n_steps = max(1, int(np.ceil(cfg.horizon / dt_cap)))
    dt = cfg.horizon / n_steps

    a1, a2, b = m.a1, m.a2, m.b_drive

    # state is [Phi | psi] as a 4x5 block; the drive only enters the psi column
    def rhs(t: float, w: np.ndarray) -> np.ndarray:
        mu = float(mu_fn(t))
        a = (mu + 0.5) * a1 + (0.5 - mu) * a2
        out = a @ w
        out[:, 4] += b * float(u_fn(t))
        return out

    w = np.hstack([np.eye(4), np.zeros((4, 1))])
    for i in range(n_steps):
        t = i * dt
        k1 = rhs(t, w)
        k2 = rhs(t + 0.5 * dt, w + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, w + 0.5 * dt * k2)
        k4 = rhs(t + dt, w + dt * k3)
        w = w + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(w)):
            raise DivergenceError(f"affine map diverged by t={(i + 1) * dt:.6g}", i * dt)
    return w[:, :4].copy(), w[:, 4].copy()
