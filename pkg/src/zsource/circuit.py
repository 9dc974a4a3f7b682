"""Semi-quasi-Z-source inverter model: matrices, frames, steady state.

State ordering is z = (i_L1, i_L2, v_C1, v_C2) throughout; the load voltage
is v_o = v_C2. Two switch configurations give the bilinear switched model

    dz/dt = [A_I z + b_I] r + [A_II z + b_II] (1 - r),   r in {0, 1},

and replacing r by a duty ratio d in (0, 1) gives the averaged model. All
analysis happens in the shifted frame x = z - z_bar(0.5), mu = d - 1/2, where
the model becomes dx/dt = A(mu) x + B mu with A affine in mu.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics

__all__ = [
    "CircuitParams",
    "ModelMatrices",
    "StateVector",
    "build",
    "a_of_mu",
    "steady_state",
    "steady_state_solved",
    "averaged_matrices",
    "gain",
    "to_x",
    "to_z",
]


@dataclass(frozen=True)
class CircuitParams:
    """Inverter component values. All strictly positive except Vin >= 0."""

    L1: float = 1.0
    L2: float = 1.0
    C1: float = 1.0
    C2: float = 1.0
    R: float = 1.0
    Vin: float = 1.0

    def __post_init__(self):
        for name in ("L1", "L2", "C1", "C2", "R"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        if not (np.isfinite(self.Vin) and self.Vin >= 0):
            raise ValueError(f"Vin must be nonnegative and finite, got {self.Vin}")

    @property
    def resonance_half_period(self) -> float:
        """pi * sqrt(L1*C1): half period of the L1-C1 loop that rings in
        configuration II. Switching periods must stay below this."""
        return float(np.pi * np.sqrt(self.L1 * self.C1))

    def as_dict(self) -> dict:
        return {k: float(getattr(self, k)) for k in ("L1", "L2", "C1", "C2", "R", "Vin")}


@dataclass(frozen=True)
class ModelMatrices:
    """All constant matrices of the model for one parameter set.

    a_i / b_i are the physical-units system matrices (P^-1 applied); the *_q
    variants are the charge/flux-weighted forms they derive from. p is the
    energy weight: V(x) = x' p x is the stored energy of the shifted state.
    """

    a1: np.ndarray  # configuration I (r = 1, mu = +1/2)
    a2: np.ndarray  # configuration II (r = 0, mu = -1/2)
    b1: np.ndarray
    b2: np.ndarray
    a0_q: np.ndarray  # mu-independent part, weighted form
    e0_q: np.ndarray  # mu coefficient, weighted form
    p: np.ndarray  # diag(L1, L2, C1, C2) / 2
    b_drive: np.ndarray  # input vector of the shifted frame: dx/dt = A(mu) x + b_drive * mu
    q: np.ndarray  # natural dissipation: A(mu)' p + p A(mu) = -q for every mu


def build(params: CircuitParams) -> ModelMatrices:
    """Assemble the model matrices for one parameter set."""
    r = params.R
    a1_q = np.array(
        [
            [0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 1.0],
            [0.0, -1.0, 0.0, 0.0],
            [0.0, -1.0, 0.0, -1.0 / r],
        ]
    )
    a2_q = np.array(
        [
            [0.0, 0.0, -1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, -1.0, 0.0, -1.0 / r],
        ]
    )
    b1_q = np.array([params.Vin, 0.0, 0.0, 0.0])
    b2_q = np.array([0.0, -params.Vin, 0.0, 0.0])
    # A(mu) = P^-1 [a0_q + e0_q mu] / 2, affine in mu, with A(+1/2) = A_I
    a0_q = 0.5 * (a1_q + a2_q)
    e0_q = a1_q - a2_q
    p = 0.5 * np.diag([params.L1, params.L2, params.C1, params.C2])
    w = np.diag(1.0 / np.array([params.L1, params.L2, params.C1, params.C2]))  # P^-1 / 2
    # consistency with the switched model forces B*(+-1/2) = A(+-1/2) z_bar + b_i
    b_drive = np.array([2.0 * params.Vin / params.L1, 2.0 * params.Vin / params.L2, 0.0, 0.0])
    q = np.diag([0.0, 0.0, 0.0, 1.0 / r])
    return ModelMatrices(
        a1=w @ a1_q,
        a2=w @ a2_q,
        b1=w @ b1_q,
        b2=w @ b2_q,
        a0_q=a0_q,
        e0_q=e0_q,
        p=p,
        b_drive=b_drive,
        q=q,
    )


def a_of_mu(m: ModelMatrices, mu: float) -> np.ndarray:
    """System matrix of the shifted frame at duty offset mu in [-1/2, 1/2]."""
    if not (-0.5 <= mu <= 0.5):
        raise ValueError(f"mu must lie in [-0.5, 0.5], got {mu}")
    # affine in mu with endpoints A(+1/2) = A_I, A(-1/2) = A_II
    return (mu + 0.5) * m.a1 + (0.5 - mu) * m.a2


def gain(d: float | np.ndarray) -> float | np.ndarray:
    """DC output gain v_C2 / Vin at constant duty d: (1 - 2d) / (1 - d).

    Monotone decreasing, maps (0, 2/3) onto (-1, 1); blows up only as d -> 1.
    """
    d = np.asarray(d, dtype=float)
    if np.any((d <= 0.0) | (d >= 1.0)):
        raise ValueError("duty must lie strictly inside (0, 1)")
    out = (1.0 - 2.0 * d) / (1.0 - d)
    return float(out) if out.ndim == 0 else out


def steady_state(params: CircuitParams, d: float) -> np.ndarray:
    """Equilibrium of the averaged model at constant duty d, z-frame.

    Closed form: v_C2 = Vin*(1-2d)/(1-d), v_C1 = Vin*d/(1-d),
    i_L2 = -v_C2/R, i_L1 = i_L2*d/(1-d).
    """
    if not (0.0 < d < 1.0):
        raise ValueError(f"duty must lie strictly inside (0, 1), got {d}")
    vin = params.Vin
    v_c2 = vin * (1.0 - 2.0 * d) / (1.0 - d)
    v_c1 = vin * d / (1.0 - d)
    i_l2 = -v_c2 / params.R
    i_l1 = i_l2 * d / (1.0 - d)
    return np.array([i_l1, i_l2, v_c1, v_c2])


@dataclass(frozen=True)
class StateVector:
    """A 4-state snapshot tagged with its frame ('z' physical or 'x' shifted)."""

    values: np.ndarray
    frame: str = "z"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (4,):
            raise ValueError(f"state must have shape (4,), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("state contains non-finite entries")
        if self.frame not in ("z", "x"):
            raise ValueError(f"frame must be 'z' or 'x', got {self.frame!r}")
        object.__setattr__(self, "values", v)


def _shift(params: CircuitParams) -> np.ndarray:
    # z_bar at d = 1/2; only v_C1 is displaced
    return np.array([0.0, 0.0, params.Vin, 0.0])


def to_x(v: StateVector, params: CircuitParams) -> StateVector:
    """Shift a z-frame state into the x-frame (x = z - z_bar(0.5))."""
    if v.frame != "z":
        raise ValueError("to_x expects a z-frame state")
    return StateVector(v.values - _shift(params), frame="x")


def to_z(v: StateVector, params: CircuitParams) -> StateVector:
    """Shift an x-frame state back to physical coordinates."""
    if v.frame != "x":
        raise ValueError("to_z expects an x-frame state")
    return StateVector(v.values + _shift(params), frame="z")


def averaged_matrices(m: ModelMatrices, d: float) -> tuple[np.ndarray, np.ndarray]:
    """(A_avg, b_avg) of the z-frame averaged model at constant duty d."""
    if not (0.0 < d < 1.0):
        raise ValueError(f"duty must lie strictly inside (0, 1), got {d}")
    return d * m.a1 + (1.0 - d) * m.a2, d * m.b1 + (1.0 - d) * m.b2


def steady_state_solved(params: CircuitParams, d: float) -> np.ndarray:
    """Equilibrium computed from the averaged linear system (cross-check path)."""
    m = build(params)
    a_avg, b_avg = averaged_matrices(m, d)
    return numerics.solve(a_avg, -b_avg)
