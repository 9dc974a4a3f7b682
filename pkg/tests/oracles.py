"""Independent numerical oracles used by the tests.

Deliberately written from scratch (truncated-Taylor exponential,
Faddeev-LeVerrier characteristic polynomial, Durand-Kerner root finding) so
they share no code path with the library's scipy/numpy-backed kernel.
"""

from __future__ import annotations

import numpy as np


def expm_taylor(a: np.ndarray, t: float = 1.0) -> np.ndarray:
    """e^(a*t) by scaling, truncated Taylor series, and repeated squaring."""
    a = np.asarray(a, dtype=float) * t
    norm = np.max(np.abs(a))
    s = 0
    if norm > 0.5:
        s = int(np.ceil(np.log2(norm / 0.5)))
        a = a / (2.0**s)
    n = a.shape[0]
    result = np.eye(n)
    term = np.eye(n)
    for k in range(1, 60):
        term = term @ a / k
        result = result + term
        if np.max(np.abs(term)) < 1e-20:
            break
    for _ in range(s):
        result = result @ result
    return result


def charpoly_coeffs(a: np.ndarray) -> np.ndarray:
    """Monic characteristic polynomial coefficients via Faddeev-LeVerrier.

    Returns [1, c1, ..., cn] with p(x) = x^n + c1 x^(n-1) + ... + cn.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    coeffs = np.zeros(n + 1)
    coeffs[0] = 1.0
    m = np.zeros_like(a)
    for k in range(1, n + 1):
        m = a @ (m + coeffs[k - 1] * np.eye(n)) if k > 1 else a.copy()
        coeffs[k] = -np.trace(m) / k
    return coeffs


def durand_kerner_roots(coeffs: np.ndarray, iters: int = 500) -> np.ndarray:
    """All roots of a monic polynomial by Durand-Kerner iteration."""
    coeffs = np.asarray(coeffs, dtype=complex)
    n = len(coeffs) - 1
    # standard non-real, non-unit-modulus starting spread
    roots = np.array([(0.4 + 0.9j) ** k for k in range(1, n + 1)], dtype=complex)
    scale = max(1.0, np.max(np.abs(coeffs)))
    roots *= scale
    for _ in range(iters):
        shift = np.zeros_like(roots)
        for i in range(n):
            p = np.polyval(coeffs, roots[i])
            denom = np.prod(roots[i] - np.delete(roots, i))
            shift[i] = p / denom
        roots = roots - shift
        if np.max(np.abs(shift)) < 1e-14 * max(1.0, np.max(np.abs(roots))):
            break
    return roots


def eig_oracle(a: np.ndarray) -> np.ndarray:
    """Eigenvalues via characteristic polynomial + Durand-Kerner."""
    return durand_kerner_roots(charpoly_coeffs(a))


def spectral_radius_oracle(a: np.ndarray) -> float:
    return float(np.max(np.abs(eig_oracle(a))))


def classify_oracle(s: np.ndarray, band_rel: float = 1e-9) -> str:
    """Definiteness of a symmetric matrix from char-poly eigenvalues."""
    eigs = np.real(eig_oracle(s))
    # ||S||_2 of a symmetric matrix is max |eig|; take it from the oracle too
    band = band_rel * np.max(np.abs(eigs))
    if np.any(np.abs(eigs) <= band):
        return "semidefinite-boundary"
    if np.all(eigs > band):
        return "positive-definite"
    if np.all(eigs < -band):
        return "negative-definite"
    return "indefinite"
