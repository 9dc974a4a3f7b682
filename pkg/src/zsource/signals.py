"""Duty-ratio profiles and the PWM signal class driving the switched model.

A PWM signal of period T with dead margin eps > 0 holds the switch at r = 1
(mu = +1/2) on [kT, t_k) and at r = 0 (mu = -1/2) on [t_k, (k+1)T), with the
fall instant confined to [kT + eps, (k+1)T - eps]. Signals are right
continuous. Duty profiles generate such signals by sampling the duty at the
start of each period.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DutyProfile",
    "PwmSignal",
    "PwmVerdict",
    "duty_reference",
    "pwm_from_duty",
    "validate_pwm",
    "mu_at",
]


def duty_reference(t: float | np.ndarray, m: float, omega: float, phase: float = 0.0):
    """Open-loop duty trajectory that makes the DC gain track M sin(omega t).

    d(t) = (1 - M sin(omega t)) / (2 - M sin(omega t)); inverting the gain map
    exactly: gain(d(t)) = M sin(omega t). Requires 0 <= M < 1.
    """
    if not (0.0 <= m < 1.0):
        raise ValueError(f"modulation depth must satisfy 0 <= M < 1, got {m}")
    s = m * np.sin(omega * np.asarray(t, dtype=float) + phase)
    out = (1.0 - s) / (2.0 - s)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class DutyProfile:
    """Constant or sinusoidal duty-ratio reference with hard clamp bounds.

    The clamp [eps_duty, 1 - eps_duty] is applied on evaluation; for a
    sinusoidal profile with M < 0.9 and the default eps_duty it never engages,
    since the reference stays inside ((1-M)/(2-M), (1+M)/(2+M)).
    """

    kind: str = "constant"  # 'constant' | 'sinusoidal'
    d: float = 0.5
    m: float = 0.0
    omega: float = 0.0
    phase: float = 0.0
    eps_duty: float = 0.05

    def __post_init__(self):
        if self.kind not in ("constant", "sinusoidal"):
            raise ValueError(f"unknown duty profile kind {self.kind!r}")
        if not (0.0 < self.eps_duty <= 0.5):
            raise ValueError(f"eps_duty must lie in (0, 0.5], got {self.eps_duty}")
        if self.kind == "constant":
            if not (0.0 < self.d < 1.0):
                raise ValueError(f"constant duty must lie in (0, 1), got {self.d}")
        else:
            if not (0.0 <= self.m < 1.0):
                raise ValueError(f"modulation depth must satisfy 0 <= M < 1, got {self.m}")
            if self.omega <= 0.0:
                raise ValueError(f"modulation frequency must be positive, got {self.omega}")

    @classmethod
    def constant(cls, d: float, eps_duty: float = 0.05) -> "DutyProfile":
        return cls(kind="constant", d=d, eps_duty=eps_duty)

    @classmethod
    def sinusoidal(
        cls, m: float, omega: float, phase: float = 0.0, eps_duty: float = 0.05
    ) -> "DutyProfile":
        return cls(kind="sinusoidal", m=m, omega=omega, phase=phase, eps_duty=eps_duty)

    def duty_at(self, t: float | np.ndarray):
        """Evaluate the clamped duty ratio at time(s) t."""
        if self.kind == "constant":
            raw = np.full_like(np.asarray(t, dtype=float), self.d)
        else:
            raw = duty_reference(t, self.m, self.omega, self.phase)
        out = np.clip(raw, self.eps_duty, 1.0 - self.eps_duty)
        return float(out) if np.ndim(out) == 0 else out

    def mu_at(self, t: float | np.ndarray):
        """Duty offset mu(t) = d(t) - 1/2, the averaged model's input."""
        return self.duty_at(t) - 0.5

    @property
    def mu_bound(self) -> float:
        """sup |mu| permitted by the clamp: 1/2 - eps_duty."""
        return 0.5 - self.eps_duty

    def as_dict(self) -> dict:
        d = {"kind": self.kind, "eps_duty": self.eps_duty}
        if self.kind == "constant":
            d["d"] = self.d
        else:
            d.update(m=self.m, omega=self.omega, phase=self.phase)
        return d


@dataclass(frozen=True)
class PwmSignal:
    """One switching pattern: period T, margin eps, and per-period fall times.

    switch_times[k] is the fall instant of period k (mu drops to -1/2 there);
    membership in the admissible class means every fall lies inside
    [kT + eps, (k+1)T - eps]. Construction does not enforce membership; use
    validate_pwm, so deliberately degenerate signals can still be built.
    """

    T: float
    eps: float
    horizon: int  # number of periods
    switch_times: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not (np.isfinite(self.T) and self.T > 0):
            raise ValueError(f"period must be positive, got {self.T}")
        if not (np.isfinite(self.eps) and self.eps >= 0):
            raise ValueError(f"eps must be nonnegative, got {self.eps}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be at least one period, got {self.horizon}")
        st = np.asarray(self.switch_times, dtype=float)
        if st.shape != (self.horizon,):
            raise ValueError(
                f"need one switch time per period: shape {st.shape} vs horizon {self.horizon}"
            )
        object.__setattr__(self, "switch_times", st)

    @property
    def total_time(self) -> float:
        return self.horizon * self.T

    def to_json(self) -> str:
        return json.dumps(
            {
                "T": self.T,
                "eps": self.eps,
                "horizon": self.horizon,
                "switch_times": [float(t) for t in self.switch_times],
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "PwmSignal":
        obj = json.loads(text)
        return cls(
            T=float(obj["T"]),
            eps=float(obj["eps"]),
            horizon=int(obj["horizon"]),
            switch_times=np.asarray(obj["switch_times"], dtype=float),
        )


@dataclass(frozen=True)
class PwmVerdict:
    ok: bool
    first_violation: str | None = None
    period: int | None = None


def pwm_from_duty(profile: DutyProfile, T: float, eps: float, horizon: int) -> PwmSignal:
    """Sample a duty profile into an admissible PWM signal.

    The duty is sampled at each period start; the fall instant is
    t_k = kT + clamp(d_k * T, eps, T - eps), which keeps the signal in class
    by construction. Requires 2*eps <= T.
    """
    if not (0.0 < 2.0 * eps <= T):
        raise ValueError(f"need 0 < 2*eps <= T, got eps={eps}, T={T}")
    k = np.arange(horizon)
    d_k = np.asarray(profile.duty_at(k * T), dtype=float).reshape(-1)
    if d_k.shape == (1,):
        d_k = np.repeat(d_k, horizon)
    on_times = np.clip(d_k * T, eps, T - eps)
    return PwmSignal(T=T, eps=eps, horizon=horizon, switch_times=k * T + on_times)


def validate_pwm(sig: PwmSignal) -> PwmVerdict:
    """Check class membership; reports the first violated condition."""
    if sig.eps <= 0.0:
        return PwmVerdict(False, f"eps must be positive, got {sig.eps}")
    if 2.0 * sig.eps > sig.T:
        return PwmVerdict(False, f"need 2*eps <= T, got eps={sig.eps}, T={sig.T}")
    for k in range(sig.horizon):
        t_k = sig.switch_times[k]
        lo, hi = k * sig.T + sig.eps, (k + 1) * sig.T - sig.eps
        if not (lo <= t_k <= hi):
            return PwmVerdict(
                False,
                f"fall time {t_k:.12g} of period {k} outside [{lo:.12g}, {hi:.12g}]",
                period=k,
            )
    return PwmVerdict(True)


def mu_at(sig: PwmSignal, t: float) -> float:
    """Switched input mu(t) in {+1/2, -1/2}, right continuous.

    Defined on [0, horizon*T); +1/2 while the period's switch is on
    (t < fall time), -1/2 after.
    """
    if not (0.0 <= t < sig.total_time):
        raise ValueError(f"t={t} outside signal domain [0, {sig.total_time})")
    k = min(int(t // sig.T), sig.horizon - 1)
    return 0.5 if t < sig.switch_times[k] else -0.5
