"""Higher-level studies built on the simulator and the certificates.

Four entry points: trajectory_difference fits an exponential envelope to the
gap between two runs sharing an input; periodic_orbit extracts the periodic
steady state as the fixed point of the one-period affine map; inverter_demo
runs the open-loop sinusoidal strategy end to end and scores the output
waveform; averaging_sweep tabulates the switched-vs-averaged gap as the
switching period shrinks. Everything here is a deterministic function of its
arguments, so repeated calls reproduce results bit for bit.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from . import numerics
from .certificates import PreconditionError
from .circuit import CircuitParams, StateVector, to_z
from .signals import DutyProfile, PwmSignal, pwm_from_duty
from .sim import (
    SimConfig,
    Trajectory,
    averaged_affine_map,
    cycle_map,
    simulate_averaged,
    simulate_switched,
)

# samples below FLOOR_FACTOR * eps_machine * ||delta0|| are rounding noise,
# not decay, and are excluded from the envelope fit
FLOOR_FACTOR = 1e3
SETTLE_REL = 1e-3
ORBIT_RESIDUAL_TOL = 1e-9


class NoContractionError(PreconditionError):
    """The one-period map has no attracting fixed point to extract."""


@dataclass(frozen=True)
class DecayFit:
    """Affine fit of log||delta(t)|| between two trajectories.

    The implied envelope is ||delta(t)|| <= K_fit * ||delta(0)|| * e^(-lambda_fit t).
    residual is the RMS misfit of the log-norm samples inside window. exact
    flags the degenerate case delta identically zero, where no finite rate
    describes the data; lambda_fit is infinite there and K_fit is zero.
    """

    lambda_fit: float
    K_fit: float
    residual: float
    window: tuple[float, float]
    exact: bool = False

    def as_dict(self) -> dict:
        def clean(v: float):
            return v if math.isfinite(v) else None

        return {
            "lambda_fit": clean(self.lambda_fit),
            "K_fit": clean(self.K_fit),
            "residual": clean(self.residual),
            "window": [self.window[0], self.window[1]],
            "exact": self.exact,
        }


@dataclass(frozen=True)
class WaveformReport:
    """Output-waveform quality of one settled modulation cycle."""

    rms_error_rel: float
    fundamental_amplitude: float
    fundamental_phase: float
    settle_time: float
    ccm_violations: int
    settled: bool

    def as_dict(self) -> dict:
        return {
            "rms_error_rel": self.rms_error_rel,
            "fundamental_amplitude": self.fundamental_amplitude,
            "fundamental_phase": self.fundamental_phase,
            "settle_time": self.settle_time,
            "ccm_violations": self.ccm_violations,
            "settled": self.settled,
        }


@dataclass(frozen=True)
class SweepRow:
    """One line of the averaging table: sup-norm gap at switching period T."""

    T: float
    eps: float
    sup_gap: float

    def as_dict(self) -> dict:
        return {"T": self.T, "eps": self.eps, "sup_gap": self.sup_gap}


def _as_state(x0, frame: str = "x") -> StateVector:
    if isinstance(x0, StateVector):
        return x0
    return StateVector(np.asarray(x0, dtype=float), frame=frame)


def trajectory_difference(
    params: CircuitParams,
    inpt: DutyProfile | PwmSignal,
    x0,
    y0,
    horizon: float | None = None,
    cfg: SimConfig | None = None,
    drive="mu",
) -> DecayFit:
    """Run the same input from x0 and y0 and fit the gap's decay envelope.

    Both runs use identical numerics, so their sample grids coincide and the
    difference is formed row by row. The fit window opens once ||delta|| has
    dropped by a factor e from its initial value (skipping the transient where
    the envelope constant dominates) and closes at the rounding-noise floor.
    horizon applies to duty profiles; a PWM signal fixes its own span.
    """
    xa = _as_state(x0)
    ya = _as_state(y0)
    if isinstance(inpt, PwmSignal):
        run_cfg = cfg if cfg is not None else SimConfig(ccm_check=False, sample_stride=1)
        ta = simulate_switched(params, inpt, xa, run_cfg, drive=drive)
        tb = simulate_switched(params, inpt, ya, run_cfg, drive=drive)
    elif isinstance(inpt, DutyProfile):
        if cfg is None:
            if horizon is None:
                raise ValueError("duty-profile runs need a horizon")
            run_cfg = SimConfig(
                horizon=horizon, avg_step=horizon / 2000.0, sample_stride=1, ccm_check=False
            )
        else:
            run_cfg = cfg if horizon is None else dataclasses.replace(cfg, horizon=horizon)
        ta = simulate_averaged(params, inpt, xa, run_cfg, drive=drive)
        tb = simulate_averaged(params, inpt, ya, run_cfg, drive=drive)
    else:
        raise ValueError(f"input must be a DutyProfile or PwmSignal, got {type(inpt).__name__}")

    sa = ta.to_frame("x").states
    sb = tb.to_frame("x").states
    delta = np.linalg.norm(sa - sb, axis=1)
    t = ta.t
    d0 = delta[0]
    if d0 == 0.0 and np.all(delta == 0.0):
        return DecayFit(math.inf, 0.0, 0.0, (float(t[0]), float(t[-1])), exact=True)

    floor = FLOOR_FACTOR * np.finfo(float).eps * d0
    usable = delta > floor
    dropped = np.nonzero(delta <= d0 / math.e)[0]
    start = int(dropped[0]) if dropped.size else 0
    idx = np.nonzero(usable[start:])[0] + start
    if idx.size < 2:
        idx = np.nonzero(usable)[0]
    if idx.size < 2:
        # every sample already sits at the noise floor: converged before the
        # first emitted row, indistinguishable from exact coincidence
        return DecayFit(math.inf, 0.0, 0.0, (float(t[0]), float(t[-1])), exact=True)

    tw = t[idx]
    logd = np.log(delta[idx])
    coeffs = np.polynomial.polynomial.polyfit(tw, logd, 1)
    pred = coeffs[0] + coeffs[1] * tw
    residual = float(np.sqrt(np.mean((logd - pred) ** 2)))
    lambda_fit = -float(coeffs[1])
    k_fit = float(np.exp(coeffs[0]) / d0)
    return DecayFit(lambda_fit, k_fit, residual, (float(tw[0]), float(tw[-1])))


def _orbit_cfg(t_mod: float) -> SimConfig:
    return SimConfig(horizon=t_mod, avg_step=t_mod / 256.0, sample_stride=1, ccm_check=False)


def periodic_orbit(
    params: CircuitParams,
    inpt: DutyProfile | PwmSignal,
    t_mod: float | None = None,
    cfg: SimConfig | None = None,
    drive="mu",
) -> tuple[Trajectory, float]:
    """Extract the periodic steady state reached under a periodic input.

    The flow over one period is an affine map x -> Phi x + psi; when that map
    contracts, its fixed point x* = (I - Phi)^(-1) psi anchors the unique
    periodic orbit, returned here as one simulated period starting at x*
    together with the fixed-point residual ||Phi x* + psi - x*||.

    A PWM signal is taken to span exactly one modulation period, so t_mod is
    read off the signal. For duty profiles, t_mod defaults to the modulation
    period of a sinusoidal profile; a constant profile is periodic with any
    period, and t_mod fixes the span of the returned trajectory (default 1).
    """
    if isinstance(inpt, PwmSignal):
        t_mod = inpt.total_time
        run_cfg = cfg if cfg is not None else SimConfig(ccm_check=False, sample_stride=1)
        phi, psi = cycle_map(params, inpt, drive=drive, offset=0.0)
    elif isinstance(inpt, DutyProfile):
        if t_mod is None:
            t_mod = 2.0 * math.pi / inpt.omega if inpt.kind == "sinusoidal" else 1.0
        run_cfg = _orbit_cfg(t_mod) if cfg is None else dataclasses.replace(cfg, horizon=t_mod)
        phi, psi = averaged_affine_map(params, inpt, run_cfg, drive=drive)
    else:
        raise ValueError(f"input must be a DutyProfile or PwmSignal, got {type(inpt).__name__}")

    rho = numerics.spectral_radius(phi)
    if rho >= 1.0 - 1e-12:
        raise NoContractionError(
            f"one-period map has spectral radius {rho:.9g}; no attracting orbit"
        )
    try:
        xstar = numerics.solve(np.eye(4) - phi, psi)
    except numerics.SingularMatrixError as exc:
        raise NoContractionError("one-period map leaves I - Phi singular") from exc
    residual = float(np.linalg.norm(phi @ xstar + psi - xstar))

    start = StateVector(xstar, frame="x")
    if isinstance(inpt, PwmSignal):
        orbit = simulate_switched(params, inpt, start, run_cfg, drive=drive)
    else:
        orbit = simulate_averaged(params, inpt, start, run_cfg, drive=drive)
    return orbit, residual


def inverter_demo(
    params: CircuitParams,
    m: float,
    omega: float,
    t_pwm: float,
    eps: float,
    horizon: int = 8,
) -> tuple[WaveformReport, Trajectory]:
    """Run the open-loop sinusoidal strategy and score one settled cycle.

    The duty reference that inverts the DC gain is carried per switching
    period, the switched model starts at the constant-duty operating point
    (x = 0), and the transient is discarded by iterating the one-cycle affine
    map until the state is within SETTLE_REL of the periodic fixed point.
    One further cycle is then simulated and compared against
    Vin * M * sin(omega t); the report carries the relative RMS error, the
    fundamental (amplitude, phase), the settle time, and any ccm-violation
    events seen during the measurement cycle. horizon caps the total budget
    in modulation cycles, settling plus the final measurement cycle.

    Returns the report and the measurement-cycle trajectory in the circuit
    frame; the trajectory's clock starts at the measurement window, so add
    settle_time for absolute times.
    """
    if not (0.0 <= m < 1.0):
        raise ValueError(f"modulation depth must satisfy 0 <= M < 1, got {m}")
    if omega <= 0.0:
        raise ValueError(f"modulation frequency must be positive, got {omega}")
    if horizon < 2:
        raise ValueError(f"demo needs at least 2 modulation cycles, got {horizon}")
    half = params.resonance_half_period
    if not (0.0 < 2.0 * eps <= t_pwm):
        raise PreconditionError(f"need 0 < 2*eps <= T, got eps={eps}, T={t_pwm}")
    if not (t_pwm < half):
        raise PreconditionError(
            f"switching period {t_pwm} must stay below the resonance half-period {half:.9g}"
        )
    t_mod = 2.0 * math.pi / omega
    ratio = t_mod / t_pwm
    n_per = round(ratio)
    if n_per < 1 or abs(ratio - n_per) > 1e-9 * max(1.0, ratio):
        raise ValueError(
            f"modulation period {t_mod:.9g} must be an integer multiple "
            f"of the switching period {t_pwm:.9g}"
        )

    profile = DutyProfile.sinusoidal(m, omega) if m > 0.0 else DutyProfile.constant(0.5)
    sig = pwm_from_duty(profile, t_pwm, eps, horizon=n_per)
    phi, psi = cycle_map(params, sig, drive="mu", offset=0.0)
    rho = numerics.spectral_radius(phi)
    if rho >= 1.0 - 1e-12:
        raise NoContractionError(
            f"one-cycle map has spectral radius {rho:.9g}; no attracting orbit"
        )
    xstar = numerics.solve(np.eye(4) - phi, psi)

    # settle by iterating the exact one-cycle map from the operating point
    x = np.zeros(4)
    scale = max(float(np.linalg.norm(xstar)), float(np.linalg.norm(x - xstar)), 1e-12)
    tol = SETTLE_REL * scale
    settled = np.linalg.norm(x - xstar) <= tol
    cycles = 0
    while not settled and cycles < horizon - 1:
        x = phi @ x + psi
        cycles += 1
        settled = np.linalg.norm(x - xstar) <= tol
    settle_time = cycles * t_mod

    n_samp = 8 * n_per
    grid = np.arange(n_samp) * (t_mod / n_samp)
    meas_cfg = SimConfig(ccm_check=True, sample_stride=1)
    start = to_z(StateVector(x, frame="x"), params)
    traj = simulate_switched(params, sig, start, meas_cfg, drive="mu", sample_times=grid)

    rows = traj.row_indices_at(grid)
    v_o = traj.states[rows, 3]  # v_C2 is the output in either frame
    ref = params.Vin * m * np.sin(omega * grid)
    denom = params.Vin * (m if m > 0.0 else 1.0) / math.sqrt(2.0)
    rms_error_rel = float(np.sqrt(np.mean((v_o - ref) ** 2)) / denom)
    a = 2.0 / n_samp * float(np.sum(v_o * np.sin(omega * grid)))
    b = 2.0 / n_samp * float(np.sum(v_o * np.cos(omega * grid)))
    report = WaveformReport(
        rms_error_rel=rms_error_rel,
        fundamental_amplitude=math.hypot(a, b),
        fundamental_phase=math.atan2(b, a),
        settle_time=float(settle_time),
        ccm_violations=sum(1 for k in traj.kinds if k == "ccm-violation"),
        settled=bool(settled),
    )
    return report, traj


def averaging_sweep(
    params: CircuitParams,
    profile: DutyProfile,
    x0,
    t_list: list[float],
) -> list[SweepRow]:
    """Tabulate the switched-vs-averaged gap as the switching period shrinks.

    One averaged reference run covers eight periods of the coarsest entry;
    each switching period T then gets a PWM realization of the same duty
    profile with the guard eps = T/10, simulated and sampled on the reference
    run's own time grid, and the row records the sup over that grid of the
    state-space distance. t_list must be strictly decreasing.
    """
    if len(t_list) == 0:
        raise ValueError("t_list must not be empty")
    t_arr = [float(v) for v in t_list]
    if any(v <= 0.0 or not math.isfinite(v) for v in t_arr):
        raise ValueError(f"switching periods must be positive and finite, got {t_arr}")
    if any(b >= a for a, b in zip(t_arr, t_arr[1:])):
        raise ValueError(f"t_list must be strictly decreasing, got {t_arr}")

    span = 8.0 * t_arr[0]
    x_state = _as_state(x0)
    avg_cfg = SimConfig(
        horizon=span, avg_step=min(t_arr[-1] / 8.0, span / 256.0),
        sample_stride=1, ccm_check=False,
    )
    ref = simulate_averaged(params, profile, x_state, avg_cfg).to_frame("x")
    grid = ref.t

    rows = []
    for t_sw in t_arr:
        eps = 0.1 * t_sw
        n = int(math.ceil(span / t_sw - 1e-9))
        sig = pwm_from_duty(profile, t_sw, eps, horizon=n)
        sw = simulate_switched(
            params, sig, x_state, SimConfig(ccm_check=False, sample_stride=1),
            sample_times=grid,
        ).to_frame("x")
        idx = sw.row_indices_at(grid)
        gap = float(np.max(np.linalg.norm(sw.states[idx] - ref.states, axis=1)))
        rows.append(SweepRow(T=t_sw, eps=eps, sup_gap=gap))
    return rows
