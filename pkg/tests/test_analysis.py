from __future__ import annotations

import math

import numpy as np
import pytest

from zsource.analysis import (
    NoContractionError,
    averaging_sweep,
    inverter_demo,
    periodic_orbit,
    trajectory_difference,
)
from zsource.certificates import PreconditionError, certify_averaged, certify_switched
from zsource.circuit import CircuitParams, StateVector, steady_state
from zsource.signals import DutyProfile, pwm_from_duty
from zsource.sim import SimConfig, simulate_averaged, simulate_switched

UNIT = CircuitParams()
# light load keeps the gap norm close to the energy norm, so the log fit
# carries little periodic ripple and the residual stays informative
LIGHT_LOAD = CircuitParams(R=8.0)
HALF = UNIT.resonance_half_period


def test_difference_exact_verdict_when_starts_coincide():
    x = np.array([0.3, -0.1, 0.2, 0.4])
    fit = trajectory_difference(UNIT, DutyProfile.constant(0.4), x, x, horizon=3.0)
    assert fit.exact
    assert math.isinf(fit.lambda_fit)
    assert fit.K_fit == 0.0
    assert fit.as_dict()["lambda_fit"] is None


def test_difference_averaged_modulated_duty_decays():
    rng = np.random.default_rng(104)
    x0, y0 = rng.standard_normal(4), rng.standard_normal(4)
    fit = trajectory_difference(
        LIGHT_LOAD, DutyProfile.sinusoidal(0.2, 0.7), x0, y0, horizon=200.0
    )
    assert not fit.exact
    assert fit.lambda_fit > 0.0
    assert fit.residual <= 0.1
    assert fit.window[0] < fit.window[1]


def test_difference_switched_decays():
    rng = np.random.default_rng(105)
    x0, y0 = rng.standard_normal(4), rng.standard_normal(4)
    sig = pwm_from_duty(DutyProfile.constant(0.5), T=0.5, eps=0.05, horizon=400)
    fit = trajectory_difference(LIGHT_LOAD, sig, x0, y0)
    assert fit.lambda_fit > 0.0
    assert fit.residual <= 0.1


def test_difference_rejects_unknown_input():
    with pytest.raises(ValueError):
        trajectory_difference(UNIT, "duty", np.zeros(4), np.ones(4), horizon=1.0)
    with pytest.raises(ValueError):
        trajectory_difference(UNIT, DutyProfile.constant(0.4), np.zeros(4), np.ones(4))


def test_certificate_envelope_bounds_gap_switched():
    cert = certify_switched(UNIT, 1.0, 0.1)
    sig = pwm_from_duty(DutyProfile.constant(0.5), T=1.0, eps=0.1, horizon=12)
    rng = np.random.default_rng(7)
    x0, y0 = rng.standard_normal(4), rng.standard_normal(4)
    grid = np.arange(12) * 1.0 + 0.05  # the analysis sampling instants kT + eps/2
    cfg = SimConfig(ccm_check=False, sample_stride=1)
    ta = simulate_switched(UNIT, sig, StateVector(x0, frame="x"), cfg, sample_times=grid)
    tb = simulate_switched(UNIT, sig, StateVector(y0, frame="x"), cfg, sample_times=grid)
    rows = ta.row_indices_at(grid)
    delta = np.linalg.norm(ta.states[rows] - tb.states[rows], axis=1)
    for i in range(len(grid)):
        for j in range(i + 1, len(grid)):
            bound = cert.K * math.exp(-cert.lam * (grid[j] - grid[i])) * delta[i]
            assert delta[j] <= bound * (1.0 + 1e-9)


def test_certificate_envelope_bounds_gap_averaged():
    cert = certify_averaged(UNIT, 0.1)
    prof = DutyProfile.sinusoidal(0.6, 0.9, eps_duty=0.1)
    rng = np.random.default_rng(8)
    x0, y0 = rng.standard_normal(4), rng.standard_normal(4)
    cfg = SimConfig(horizon=40.0, avg_step=0.02, sample_stride=1, ccm_check=False)
    ta = simulate_averaged(UNIT, prof, StateVector(x0, frame="x"), cfg)
    tb = simulate_averaged(UNIT, prof, StateVector(y0, frame="x"), cfg)
    delta = np.linalg.norm(ta.states - tb.states, axis=1)
    t = ta.t
    pick = np.arange(0, len(t), 37)
    for ii, i in enumerate(pick):
        for j in pick[ii + 1 :]:
            bound = cert.K * math.exp(-cert.lam * (t[j] - t[i])) * delta[i]
            assert delta[j] <= bound * (1.0 + 1e-9)


def test_orbit_constant_duty_matches_steady_state():
    orbit, residual = periodic_orbit(UNIT, DutyProfile.constant(0.35))
    xbar = steady_state(UNIT, 0.35) - np.array([0.0, 0.0, UNIT.Vin, 0.0])
    assert residual <= 1e-9
    assert orbit.frame == "x"
    assert np.linalg.norm(orbit.states[0] - xbar) <= 1e-9


def test_orbit_symmetric_pwm_has_zero_mean_output():
    sig = pwm_from_duty(DutyProfile.constant(0.5), T=0.1, eps=0.01, horizon=1)
    orbit, residual = periodic_orbit(UNIT, sig)
    assert residual <= 1e-9
    grid = np.arange(4096) * (0.1 / 4096)
    fine = simulate_switched(
        UNIT, sig, StateVector(orbit.states[0], frame="x"),
        SimConfig(ccm_check=False), sample_times=grid,
    )
    v_o = fine.states[fine.row_indices_at(grid), 3]
    assert np.max(np.abs(v_o)) > 1e-5  # the ripple orbit is not the zero orbit
    assert abs(np.mean(v_o)) <= 1e-6


def test_orbit_restart_reproduces_fixed_point():
    prof = DutyProfile.sinusoidal(0.5, 2.0 * math.pi / 4.0)
    sig = pwm_from_duty(prof, T=0.5, eps=0.05, horizon=8)  # spans one modulation period
    orbit, _ = periodic_orbit(UNIT, sig)
    assert np.linalg.norm(orbit.states[-1] - orbit.states[0]) <= 1e-8

    avg_orbit, _ = periodic_orbit(UNIT, prof)
    assert abs(avg_orbit.t[-1] - 4.0) <= 1e-12
    assert np.linalg.norm(avg_orbit.states[-1] - avg_orbit.states[0]) <= 1e-8


def test_orbit_resonant_pwm_has_no_contraction():
    # d = 0.5 with T = 2*pi*sqrt(L1 C1) parks the second segment exactly on
    # the resonance half-period, so the one-period map has a unit multiplier
    sig = pwm_from_duty(DutyProfile.constant(0.5), T=2.0 * HALF, eps=0.1, horizon=1)
    with pytest.raises(NoContractionError):
        periodic_orbit(UNIT, sig)


def test_orbit_rejects_unknown_input():
    with pytest.raises(ValueError):
        periodic_orbit(UNIT, "constant")


def test_demo_tracks_slow_modulation():
    t_pwm = HALF / 40
    omega = 2.0 * math.pi / (800 * t_pwm)
    report, traj = inverter_demo(UNIT, 0.5, omega, t_pwm, t_pwm / 10, horizon=8)
    assert report.settled
    assert report.ccm_violations == 0
    assert report.rms_error_rel < 0.35
    assert 0.4 < report.fundamental_amplitude < 0.6
    assert traj.frame == "z"
    assert abs(traj.t[-1] - (800 * t_pwm)) <= 1e-6


def test_demo_fundamental_approaches_target_as_frequency_drops():
    t_pwm = HALF / 40
    errs = []
    for n in (200, 400, 800):
        omega = 2.0 * math.pi / (n * t_pwm)
        report, _ = inverter_demo(UNIT, 0.5, omega, t_pwm, t_pwm / 10, horizon=8)
        errs.append(abs(report.fundamental_amplitude - 0.5 * UNIT.Vin))
    assert errs[0] > errs[1] > errs[2]


def test_demo_error_strictly_increases_with_frequency():
    t_pwm = HALF / 40
    omega = 2.0 * math.pi / (800 * t_pwm)
    slow, _ = inverter_demo(UNIT, 0.5, omega, t_pwm, t_pwm / 10, horizon=8)
    fast, _ = inverter_demo(UNIT, 0.5, 10.0 * omega, t_pwm, t_pwm / 10, horizon=8)
    assert fast.rms_error_rel > slow.rms_error_rel


def test_demo_zero_modulation_fundamental_below_ripple():
    t_pwm = HALF / 40
    omega = 2.0 * math.pi / (40 * t_pwm)
    report, traj = inverter_demo(UNIT, 0.0, omega, t_pwm, t_pwm / 10, horizon=8)
    ripple = float(np.max(np.abs(traj.states[:, 3])))
    assert report.fundamental_amplitude < ripple
    assert report.rms_error_rel < 0.01
    assert report.ccm_violations == 0


def test_demo_validation():
    t_pwm = HALF / 40
    omega = 2.0 * math.pi / (40 * t_pwm)
    with pytest.raises(ValueError):
        inverter_demo(UNIT, 1.0, omega, t_pwm, t_pwm / 10)
    with pytest.raises(ValueError):
        inverter_demo(UNIT, 0.5, 0.0, t_pwm, t_pwm / 10)
    with pytest.raises(ValueError):
        inverter_demo(UNIT, 0.5, omega, t_pwm, t_pwm / 10, horizon=1)
    with pytest.raises(PreconditionError):
        inverter_demo(UNIT, 0.5, omega, t_pwm, 0.6 * t_pwm)
    with pytest.raises(PreconditionError):
        inverter_demo(UNIT, 0.5, 2.0 * math.pi / (40 * HALF), HALF, HALF / 10)
    with pytest.raises(ValueError):
        inverter_demo(UNIT, 0.5, 1.37 * omega, t_pwm, t_pwm / 10)


def test_demo_is_deterministic():
    t_pwm = HALF / 40
    omega = 2.0 * math.pi / (40 * t_pwm)
    r1, t1 = inverter_demo(UNIT, 0.3, omega, t_pwm, t_pwm / 10, horizon=6)
    r2, t2 = inverter_demo(UNIT, 0.3, omega, t_pwm, t_pwm / 10, horizon=6)
    assert r1 == r2
    assert np.array_equal(t1.states, t2.states)


def test_sweep_gap_halves_with_switching_period():
    rows = averaging_sweep(UNIT, DutyProfile.constant(0.5), np.zeros(4), [0.8, 0.4, 0.2, 0.1])
    gaps = [r.sup_gap for r in rows]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    for a, b in zip(gaps, gaps[1:]):
        assert 0.3 <= b / a <= 0.7
    assert gaps[-1] / gaps[0] <= 0.25
    assert [r.eps for r in rows] == [0.1 * r.T for r in rows]


def test_sweep_modulated_profile_monotone():
    prof = DutyProfile.sinusoidal(0.4, 0.5)
    rows = averaging_sweep(UNIT, prof, np.full(4, 0.3), [0.6, 0.3, 0.15])
    gaps = [r.sup_gap for r in rows]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert rows[0].as_dict() == {"T": 0.6, "eps": 0.06, "sup_gap": gaps[0]}


def test_averaged_self_comparison_gap_is_zero():
    prof = DutyProfile.sinusoidal(0.3, 0.8)
    cfg = SimConfig(horizon=6.0, avg_step=0.02, sample_stride=1, ccm_check=False)
    x0 = StateVector(np.array([0.2, -0.1, 0.4, 0.0]), frame="x")
    ta = simulate_averaged(UNIT, prof, x0, cfg)
    tb = simulate_averaged(UNIT, prof, x0, cfg)
    assert float(np.max(np.linalg.norm(ta.states - tb.states, axis=1))) == 0.0


def test_sweep_validation():
    with pytest.raises(ValueError):
        averaging_sweep(UNIT, DutyProfile.constant(0.5), np.zeros(4), [])
    with pytest.raises(ValueError):
        averaging_sweep(UNIT, DutyProfile.constant(0.5), np.zeros(4), [0.2, 0.4])
    with pytest.raises(ValueError):
        averaging_sweep(UNIT, DutyProfile.constant(0.5), np.zeros(4), [0.4, -0.2])
