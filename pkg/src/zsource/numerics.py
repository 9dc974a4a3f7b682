"""Small dense linear-algebra kernel for the 4x4/5x5 matrices used here.

Thin, contract-checking wrappers around scipy/numpy: validated inputs,
explicit tolerance semantics, and errors that carry enough context to act on.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "SingularMatrixError",
    "SymVerdict",
    "expm",
    "sym_definiteness",
    "spectral_radius",
    "solve",
]

# Relative band around zero inside which a symmetric eigenvalue is treated as
# "on the boundary" rather than strictly signed.
BOUNDARY_BAND = 1e-9

# Pivots below this (relative to max|A|) mean the solve cannot be trusted.
PIVOT_TOL = 1e-12


class SingularMatrixError(ValueError):
    """Linear solve hit a pivot too small to trust.

    Attributes
    ----------
    pivot : float
        Magnitude of the offending pivot.
    """

    def __init__(self, message: str, pivot: float):
        super().__init__(message)
        self.pivot = float(pivot)


def _check_matrix(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square 2-D, got shape {a.shape}")
    if a.shape[0] not in (3, 4, 5):
        # reduced forms are 3x3, the state space is 4-D, affine lifts are 5x5
        raise ValueError(f"{name} must be 3x3 to 5x5, got {a.shape[0]}x{a.shape[0]}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def expm(a: np.ndarray, t: float = 1.0) -> np.ndarray:
    """Matrix exponential e^(a*t) via scaling/squaring with Pade-13.

    Parameters
    ----------
    a : (n, n) ndarray
        Square matrix, n in {4, 5}, finite entries.
    t : float
        Time scaling, finite.
    """
    a = _check_matrix(a, "expm argument")
    if not np.isfinite(t):
        raise ValueError(f"expm time must be finite, got {t}")
    return scipy.linalg.expm(a * t)


@dataclass(frozen=True)
class SymVerdict:
    """Definiteness classification of a symmetric matrix.

    verdict is one of 'positive-definite', 'negative-definite', 'indefinite',
    'semidefinite-boundary'. extreme_eigenvalue is lambda_min for PD, lambda_max
    for ND and indefinite (the witness against negativity), and the eigenvalue
    nearest zero for the boundary verdict. The full spectrum is kept so callers
    can pick their own margin.
    """

    verdict: str
    extreme_eigenvalue: float
    tolerance_used: float
    eigenvalues: tuple[float, ...]

    @property
    def is_positive_definite(self) -> bool:
        return self.verdict == "positive-definite"

    @property
    def is_negative_definite(self) -> bool:
        return self.verdict == "negative-definite"


def sym_definiteness(s: np.ndarray, tol: float | None = None) -> SymVerdict:
    """Classify a symmetric matrix as PD / ND / indefinite / boundary.

    Eigenvalues within +-band of zero, band = BOUNDARY_BAND * ||s||_2, are
    treated as zero and produce the 'semidefinite-boundary' verdict.

    Parameters
    ----------
    s : (n, n) ndarray
        Symmetric up to `tol` (default 1e-9 * ||s||_2); larger asymmetry raises.
    tol : float, optional
        Absolute asymmetry tolerance override.
    """
    s = _check_matrix(s, "sym_definiteness argument")
    scale = float(np.linalg.norm(s, 2))
    if tol is None:
        tol = BOUNDARY_BAND * scale
    asym = float(np.max(np.abs(s - s.T)))
    if asym > tol:
        raise ValueError(f"matrix asymmetry {asym:.3e} exceeds tolerance {tol:.3e}")
    # symmetrize before eigh so the verdict reflects the symmetric part only
    eigs = np.linalg.eigvalsh(0.5 * (s + s.T))
    band = BOUNDARY_BAND * scale
    lo, hi = float(eigs[0]), float(eigs[-1])
    if np.any(np.abs(eigs) <= band):
        verdict = "semidefinite-boundary"
        extreme = float(eigs[np.argmin(np.abs(eigs))])
    elif lo > band:
        verdict, extreme = "positive-definite", lo
    elif hi < -band:
        verdict, extreme = "negative-definite", hi
    else:
        verdict, extreme = "indefinite", hi
    return SymVerdict(verdict, extreme, float(tol), tuple(float(e) for e in eigs))


def spectral_radius(m: np.ndarray) -> float:
    """Largest eigenvalue modulus of a (possibly nonsymmetric) matrix."""
    m = _check_matrix(m, "spectral_radius argument")
    return float(np.max(np.abs(np.linalg.eigvals(m))))


def solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a x = b by LU with partial pivoting.

    Raises SingularMatrixError (with the offending pivot magnitude) when the
    smallest pivot falls below PIVOT_TOL * max|a|.
    """
    a = _check_matrix(a, "solve matrix")
    b = np.asarray(b, dtype=float)
    if b.shape not in ((a.shape[0],), (a.shape[0], 1)):
        raise ValueError(f"right-hand side shape {b.shape} does not match {a.shape}")
    if not np.all(np.isfinite(b)):
        raise ValueError("right-hand side contains non-finite entries")
    with warnings.catch_warnings():
        # we report singularity ourselves, with the pivot attached
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a)
    pivots = np.abs(np.diag(lu))
    scale = float(np.max(np.abs(a)))
    if np.min(pivots) <= PIVOT_TOL * scale:
        raise SingularMatrixError(
            f"matrix numerically singular: pivot {np.min(pivots):.3e} "
            f"below {PIVOT_TOL:.0e} * max|A| = {PIVOT_TOL * scale:.3e}",
            pivot=float(np.min(pivots)),
        )
    return scipy.linalg.lu_solve((lu, piv), b)
