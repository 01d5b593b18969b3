"""Stopping criteria: discrepancy principle, NCP whiteness test, residual
norm stagnation.

All three consume the true data-space residual ||b - A x_k||_2 (DP compares
against a noise norm that lives in data space); NCP additionally needs the
residual vector itself, flattened detector-major.
"""

from __future__ import annotations

import numpy as np

DEFAULT_DP_TAU = 1.01
DEFAULT_NCP_THRESHOLD = 0.05
DEFAULT_RNS_EPSILON = 1e-4


def dp_should_stop(residual_norm: float, noise_norm: float, tau: float = DEFAULT_DP_TAU) -> bool:
    """Discrepancy principle: stop once the residual falls to tau * ||e||_2."""
    if tau < 1.0:
        raise ValueError(f"DP safety factor must be >= 1, got {tau}")
    if noise_norm < 0.0:
        raise ValueError(f"noise norm must be nonnegative, got {noise_norm}")
    return residual_norm <= tau * noise_norm


def ncp_distance(residual: np.ndarray) -> float:
    """Kolmogorov-Smirnov-style distance of the residual's normalized
    cumulative periodogram from the white-noise diagonal.

    The residual is treated as a 1-D signal; the periodogram is taken over
    the m//2 non-DC frequencies. A zero residual has distance 0.
    """
    r = np.asarray(residual, dtype=np.float64)
    m = r.size
    if m < 8:
        raise ValueError(f"NCP needs a residual of length >= 8, got {m}")
    spectrum = np.abs(np.fft.rfft(r)) ** 2
    q = m // 2
    power = spectrum[1 : q + 1]
    total = power.sum()
    if total == 0.0:
        return 0.0
    c = np.cumsum(power) / total
    diagonal = np.arange(1, q + 1) / q
    return float(np.max(np.abs(c - diagonal)))


def ncp_should_stop(residual: np.ndarray, threshold: float = DEFAULT_NCP_THRESHOLD) -> bool:
    """Stop once the residual's spectrum is close enough to white noise."""
    return ncp_distance(residual) <= threshold


def rns_should_stop(history, epsilon: float = DEFAULT_RNS_EPSILON) -> bool:
    """Residual norm stagnation: relative change below epsilon.

    Needs at least two recorded norms; an exactly-zero previous residual
    counts as converged.
    """
    if epsilon <= 0.0:
        raise ValueError(f"RNS tolerance must be positive, got {epsilon}")
    if len(history) < 2:
        return False
    prev, cur = history[-2], history[-1]
    if prev == 0.0:
        return True
    return abs(prev - cur) / prev < epsilon
