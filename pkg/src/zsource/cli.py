"""Command-line front end: JSON experiment configs in, artifacts out.

Usage: zsource <command> [--config path] [--key value ...]

Overrides use dotted paths into the config (--params.L1 0.001); bare keys
resolve inside the command's own settings group first, so
`zsource steady-state --D 0.4` and `zsource certify-switched --T 2 --eps 0.2`
do what they read as. Artifacts (CSV time series, JSON reports, PNG figures)
land in output_dir, resolved from the config, the ZSOURCE_OUTPUT_DIR
environment variable, or ./zsource-out, in that order. Every run finishes by
writing manifest.json; identical configs and seeds reproduce every other
artifact byte for byte (the manifest carries wall time, so it is metadata,
not a comparable artifact).

Exit codes: 0 all verdicts pass, 1 verdict failure, 2 config or precondition
error, 3 internal numerics failure. Failure paths emit a one-line JSON error
object on stderr.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import os
import sys
import time
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, plots
from .analysis import (
    averaging_sweep,
    inverter_demo,
    periodic_orbit,
    trajectory_difference,
)
from .certificates import (
    CertificateNotFoundError,
    PreconditionError,
    certify_averaged,
    certify_switched,
    monodromy_check,
)
from .circuit import CircuitParams, StateVector, gain, steady_state
from .numerics import SingularMatrixError
from .signals import DutyProfile, pwm_from_duty
from .sim import DivergenceError, SimConfig, simulate_averaged, simulate_switched

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_CONFIG = 2
EXIT_NUMERICS = 3

COMMANDS = (
    "simulate-averaged",
    "simulate-switched",
    "steady-state",
    "certify-averaged",
    "certify-switched",
    "monodromy",
    "orbit",
    "demo",
    "sweep",
    "diff",
)

# bare override keys look through these config groups, first match wins
BARE_KEY_GROUPS = {
    "simulate-averaged": ("duty", "sim"),
    "simulate-switched": ("duty", "pwm", "sim"),
    "steady-state": ("steady_state",),
    "certify-averaged": ("certificate",),
    "certify-switched": ("certificate",),
    "monodromy": ("monodromy",),
    "orbit": ("orbit", "duty", "pwm"),
    "demo": ("demo",),
    "sweep": ("sweep", "duty"),
    "diff": ("diff", "duty", "pwm"),
}

# the default duty profile repeats every 20 s; the default PWM group spans
# exactly that (40 periods of 0.5 s), keeping the orbit command coherent
DEFAULTS = {
    "schema": "experiment-v1",
    "params": {"L1": 1.0, "L2": 1.0, "C1": 1.0, "C2": 1.0, "R": 1.0, "Vin": 1.0},
    "seed": 0,
    "x0": "random",
    "y0": "random",
    "frame": "x",
    "duty": {
        "kind": "sinusoidal",
        "d": 0.5,
        "m": 0.3,
        "omega": math.pi / 10.0,
        "phase": 0.0,
        "eps_duty": 0.05,
    },
    "pwm": {"T": 0.5, "eps": 0.05, "horizon": 40},
    "sim": {"horizon": 40.0, "avg_step": 0.01, "sample_stride": 10, "ccm_check": True},
    "certificate": {"eps_duty": 0.1, "T": 1.0, "eps": 0.1, "grid_n": 65},
    "steady_state": {"D": 0.5},
    "monodromy": {"t_i": 1.0, "t_ii": 1.0, "eps": 0.1},
    "orbit": {"model": "switched"},
    "demo": {
        "M": 0.5,
        "omega": 0.1,
        "T_pwm": math.pi / 20.0,
        "eps": math.pi / 200.0,
        "horizon": 8,
    },
    "sweep": {"T_list": [0.8, 0.4, 0.2, 0.1]},
    "diff": {"model": "averaged", "horizon": 60.0},
}


class ConfigError(Exception):
    """Bad config or overrides; violations name the offending fields."""

    def __init__(self, message: str, violations: list[dict] | None = None):
        super().__init__(message)
        self.violations = violations or []


def _schema() -> dict:
    text = resources.files("zsource.schemas").joinpath("experiment-v1.json").read_text()
    return json.loads(text)


def _deep_merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _parse_overrides(tokens: list[str]) -> list[tuple[str, object]]:
    pairs = []
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--") or len(tok) == 2:
            raise ConfigError(f"expected --key, got {tok!r}")
        if i + 1 >= len(tokens):
            raise ConfigError(f"override {tok} is missing a value")
        pairs.append((tok[2:], _parse_value(tokens[i + 1])))
        i += 2
    return pairs


def _apply_override(config: dict, schema: dict, command: str, key: str, value) -> None:
    props = schema["properties"]
    if "." in key:
        parts = key.split(".")
        node = config
        for part in parts[:-1]:
            nxt = node.get(part)
            if not isinstance(nxt, dict):
                nxt = {}
                node[part] = nxt
            node = nxt
        node[parts[-1]] = value
        return
    for group in BARE_KEY_GROUPS.get(command, ()):
        if key in props[group].get("properties", {}):
            config.setdefault(group, {})[key] = value
            return
    if key in props:
        config[key] = value
        return
    raise ConfigError(
        f"unknown override key {key!r} for command {command}",
        violations=[{"field": key, "message": "not a recognized setting"}],
    )


def _validate(config: dict, schema: dict) -> list[dict]:
    validator = jsonschema.Draft202012Validator(schema)
    out = []
    for err in sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path)):
        field = ".".join(str(p) for p in err.absolute_path) or "(root)"
        out.append({"field": field, "message": err.message})
    return out


def _emit_error(exit_code: int, kind: str, message: str, **extra) -> int:
    obj = {"error": {"type": kind, "exit_code": exit_code, "message": message, **extra}}
    print(json.dumps(obj, sort_keys=True), file=sys.stderr)
    return exit_code


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [format(v, ".17g") if isinstance(v, float) else v for v in row]
            )


def _params(config: dict) -> CircuitParams:
    return CircuitParams(**config["params"])


def _duty(config: dict) -> DutyProfile:
    d = config["duty"]
    if d["kind"] == "constant":
        return DutyProfile.constant(d["d"], eps_duty=d["eps_duty"])
    return DutyProfile.sinusoidal(d["m"], d["omega"], phase=d["phase"], eps_duty=d["eps_duty"])


def _pwm(config: dict):
    p = config["pwm"]
    return pwm_from_duty(_duty(config), p["T"], p["eps"], p["horizon"])


def _sim_cfg(config: dict, with_horizon: bool) -> SimConfig:
    s = config["sim"]
    return SimConfig(
        horizon=s["horizon"] if with_horizon else None,
        avg_step=s["avg_step"],
        sample_stride=s["sample_stride"],
        ccm_check=s["ccm_check"],
    )


def _state(config: dict, key: str, rng: np.random.Generator) -> StateVector:
    spec = config[key]
    if spec == "random":
        values = rng.standard_normal(4)
    else:
        values = np.asarray(spec, dtype=float)
    return StateVector(values, frame=config["frame"])


def _cmd_simulate_averaged(config, out, rng):
    traj = simulate_averaged(_params(config), _duty(config), _state(config, "x0", rng),
                             _sim_cfg(config, with_horizon=True))
    traj.write_csv(out / "trajectory.csv")
    plots.trajectory_figure(traj, out / "trajectory.png", title="averaged trajectory")
    ccm = sum(1 for k in traj.kinds if k == "ccm-violation")
    return {}, ["trajectory.csv", "trajectory.png"], [
        f"rows: {len(traj.t)}", f"ccm-violation rows: {ccm}"
    ]


def _cmd_simulate_switched(config, out, rng):
    traj = simulate_switched(_params(config), _pwm(config), _state(config, "x0", rng),
                             _sim_cfg(config, with_horizon=False))
    traj.write_csv(out / "trajectory.csv")
    plots.trajectory_figure(traj, out / "trajectory.png", title="switched trajectory")
    ccm = sum(1 for k in traj.kinds if k == "ccm-violation")
    return {}, ["trajectory.csv", "trajectory.png"], [
        f"rows: {len(traj.t)}", f"ccm-violation rows: {ccm}"
    ]


def _cmd_steady_state(config, out, rng):
    params = _params(config)
    d = config["steady_state"]["D"]
    z_bar = steady_state(params, d)
    payload = {
        "D": d,
        "z_bar": [float(v) + 0.0 for v in z_bar],
        "gain": float(gain(d)),
    }
    _write_json(out / "steady_state.json", payload)
    print(json.dumps(payload["z_bar"]))
    return {}, ["steady_state.json"], [f"gain: {payload['gain']:.12g}"]


def _cmd_certify_averaged(config, out, rng):
    cert = certify_averaged(_params(config), config["certificate"]["eps_duty"])
    _write_json(out / "certificate.json", cert.as_dict())
    verdicts = {c.name: bool(c.passed) for c in cert.verdicts}
    return verdicts, ["certificate.json"], [
        f"alpha: {cert.alpha:.9g}", f"K: {cert.K:.9g}",
        f"lambda: {cert.lam:.9g}", f"G: {cert.G:.9g}",
    ]


def _cmd_certify_switched(config, out, rng):
    c = config["certificate"]
    cert = certify_switched(_params(config), c["T"], c["eps"], grid_n=c["grid_n"])
    _write_json(out / "certificate.json", cert.as_dict())
    verdicts = {
        "contraction_certified": True,
        "empirical_gain_within_bound": bool(cert.G_emp <= cert.G),
    }
    return verdicts, ["certificate.json"], [
        f"kappa3: {cert.kappa3:.9g}", f"K: {cert.K:.9g}",
        f"lambda: {cert.lam:.9g}", f"G: {cert.G:.9g}", f"G_emp: {cert.G_emp:.9g}",
    ]


def _cmd_monodromy(config, out, rng):
    m = config["monodromy"]
    rep = monodromy_check(_params(config), m["t_i"], m["t_ii"], m["eps"])
    _write_json(out / "monodromy.json", rep.as_dict())
    if rep.resonant_k is not None:
        verdicts = {"resonance_boundary": bool(rep.resonance_ok)}
    else:
        verdicts = {"contraction": bool(rep.contraction_ok)}
    return verdicts, ["monodromy.json"], [
        f"rho(M0): {rep.rho_m0:.9g}", f"rho(M_eps): {rep.rho_m_eps:.9g}",
    ]


def _cmd_orbit(config, out, rng):
    params = _params(config)
    model = config["orbit"]["model"]
    if model == "switched":
        traj, residual = periodic_orbit(params, _pwm(config))
    else:
        traj, residual = periodic_orbit(params, _duty(config),
                                        t_mod=config["orbit"].get("t_mod"))
    traj.write_csv(out / "orbit.csv")
    plots.trajectory_figure(traj, out / "orbit.png", title=f"periodic orbit ({model})")
    _write_json(out / "orbit.json", {
        "model": model,
        "x_star": [float(v) for v in traj.states[0]],
        "residual": residual,
        "period": float(traj.t[-1]),
    })
    verdicts = {"fixed_point_residual": bool(residual <= 1e-9)}
    return verdicts, ["orbit.csv", "orbit.json", "orbit.png"], [f"residual: {residual:.3e}"]


def _cmd_demo(config, out, rng):
    params = _params(config)
    d = config["demo"]
    report, traj = inverter_demo(params, d["M"], d["omega"], d["T_pwm"], d["eps"],
                                 horizon=d["horizon"])
    traj.write_csv(out / "trajectory.csv")
    _write_json(out / "report.json", report.as_dict())
    plots.waveform_figure(traj, d["M"], d["omega"], params.Vin, out / "waveform.png")
    verdicts = {"settled": bool(report.settled), "ccm_clean": report.ccm_violations == 0}
    return verdicts, ["trajectory.csv", "report.json", "waveform.png"], [
        f"rms_error_rel: {report.rms_error_rel:.6g}",
        f"fundamental_amplitude: {report.fundamental_amplitude:.6g}",
        f"settle_time: {report.settle_time:.6g}",
    ]


def _cmd_sweep(config, out, rng):
    x0 = _state(config, "x0", rng)
    rows = averaging_sweep(_params(config), _duty(config), x0, config["sweep"]["T_list"])
    _write_csv(out / "sweep.csv", ["T", "eps", "sup_gap"],
               [(r.T, r.eps, r.sup_gap) for r in rows])
    plots.sweep_figure(rows, out / "sweep.png")
    gaps = [r.sup_gap for r in rows]
    monotone = all(b <= a for a, b in zip(gaps, gaps[1:]))
    return {"gaps_monotone": monotone}, ["sweep.csv", "sweep.png"], [
        f"T={r.T:g}: gap={r.sup_gap:.6g}" for r in rows
    ]


def _cmd_diff(config, out, rng):
    params = _params(config)
    x0 = _state(config, "x0", rng)
    y0 = _state(config, "y0", rng)
    if config["diff"]["model"] == "switched":
        inpt = _pwm(config)
        cfg = SimConfig(ccm_check=False, sample_stride=1)
        ta = simulate_switched(params, inpt, x0, cfg)
        tb = simulate_switched(params, inpt, y0, cfg)
        fit = trajectory_difference(params, inpt, x0, y0, cfg=cfg)
    else:
        inpt = _duty(config)
        horizon = config["diff"]["horizon"]
        cfg = SimConfig(horizon=horizon, avg_step=horizon / 2000.0,
                        sample_stride=1, ccm_check=False)
        ta = simulate_averaged(params, inpt, x0, cfg)
        tb = simulate_averaged(params, inpt, y0, cfg)
        fit = trajectory_difference(params, inpt, x0, y0, cfg=cfg)
    delta = np.linalg.norm(ta.to_frame("x").states - tb.to_frame("x").states, axis=1)
    _write_csv(out / "decay.csv", ["t", "delta"],
               [(float(t), float(dv)) for t, dv in zip(ta.t, delta)])
    _write_json(out / "report.json", fit.as_dict())
    plots.decay_figure(ta.t, delta, fit, out / "decay.png")
    verdicts = {"decay_positive": bool(fit.exact or fit.lambda_fit > 0.0)}
    summary = ["exact convergence (identical trajectories)"] if fit.exact else [
        f"lambda_fit: {fit.lambda_fit:.6g}", f"K_fit: {fit.K_fit:.6g}",
        f"residual: {fit.residual:.6g}",
    ]
    return verdicts, ["decay.csv", "report.json", "decay.png"], summary


HANDLERS = {
    "simulate-averaged": _cmd_simulate_averaged,
    "simulate-switched": _cmd_simulate_switched,
    "steady-state": _cmd_steady_state,
    "certify-averaged": _cmd_certify_averaged,
    "certify-switched": _cmd_certify_switched,
    "monodromy": _cmd_monodromy,
    "orbit": _cmd_orbit,
    "demo": _cmd_demo,
    "sweep": _cmd_sweep,
    "diff": _cmd_diff,
}


def _run_validate(config_path: str | None) -> int:
    if config_path is None:
        return _emit_error(EXIT_CONFIG, "config", "validate needs --config <path>")
    try:
        with open(config_path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        return _emit_error(EXIT_CONFIG, "config", f"cannot read config: {exc}")
    except json.JSONDecodeError as exc:
        return _emit_error(EXIT_CONFIG, "config", f"config is not valid JSON: {exc}")
    violations = _validate(raw, _schema())
    if violations:
        for v in violations:
            print(f"invalid: {v['field']}: {v['message']}")
        return _emit_error(EXIT_CONFIG, "config",
                           f"{len(violations)} schema violation(s)", violations=violations)
    print("valid")
    return EXIT_OK


def run(command: str, config_path: str | None, overrides: list[tuple[str, object]]) -> int:
    schema = _schema()
    config = copy.deepcopy(DEFAULTS)
    if config_path is not None:
        try:
            with open(config_path) as fh:
                file_cfg = json.load(fh)
        except OSError as exc:
            return _emit_error(EXIT_CONFIG, "config", f"cannot read config: {exc}")
        except json.JSONDecodeError as exc:
            return _emit_error(EXIT_CONFIG, "config", f"config is not valid JSON: {exc}")
        if not isinstance(file_cfg, dict):
            return _emit_error(EXIT_CONFIG, "config", "config root must be an object")
        config = _deep_merge(config, file_cfg)
    config["command"] = command
    try:
        for key, value in overrides:
            _apply_override(config, schema, command, key, value)
    except ConfigError as exc:
        return _emit_error(EXIT_CONFIG, "config", str(exc), violations=exc.violations)

    violations = _validate(config, schema)
    if violations:
        return _emit_error(
            EXIT_CONFIG, "config",
            "; ".join(f"{v['field']}: {v['message']}" for v in violations),
            violations=violations,
        )

    out = Path(config.get("output_dir") or os.environ.get("ZSOURCE_OUTPUT_DIR") or "zsource-out")
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(config["seed"])

    started = time.monotonic()
    try:
        verdicts, artifacts, summary = HANDLERS[command](config, out, rng)
    except CertificateNotFoundError as exc:
        return _emit_error(EXIT_VERDICT, "verdict", str(exc))
    except PreconditionError as exc:
        return _emit_error(EXIT_CONFIG, "config", str(exc))
    except (SingularMatrixError, DivergenceError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        return _emit_error(EXIT_NUMERICS, "numerics", str(exc))
    except ValueError as exc:
        return _emit_error(EXIT_CONFIG, "config", str(exc))

    manifest = {
        "schema": "experiment-v1",
        "version": __version__,
        "command": command,
        "config": config,
        "artifacts": sorted(artifacts),
        "verdicts": verdicts,
        "wall_time_s": time.monotonic() - started,
    }
    _write_json(out / "manifest.json", manifest)

    for line in summary:
        print(line)
    for name in sorted(artifacts):
        print(f"wrote {out / name}")
    for name, passed in verdicts.items():
        print(f"verdict {name}: {'pass' if passed else 'FAIL'}")

    failed = [name for name, passed in verdicts.items() if not passed]
    if failed:
        return _emit_error(EXIT_VERDICT, "verdict",
                           f"failed verdicts: {', '.join(failed)}", failed=failed)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="zsource",
        description="Semi-quasi-Z-source inverter models, certificates, and studies.",
    )
    parser.add_argument("command", choices=COMMANDS + ("validate",))
    parser.add_argument("--config", default=None, help="JSON experiment config")
    parser.add_argument("--version", action="version", version=f"zsource {__version__}")
    args, rest = parser.parse_known_args(argv)

    if args.command == "validate":
        if rest:
            return _emit_error(EXIT_CONFIG, "config",
                               f"validate takes no overrides, got {rest!r}")
        return _run_validate(args.config)
    try:
        overrides = _parse_overrides(rest)
    except ConfigError as exc:
        return _emit_error(EXIT_CONFIG, "config", str(exc))
    return run(args.command, args.config, overrides)


if __name__ == "__main__":
    sys.exit(main())
