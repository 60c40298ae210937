"""ULA steering vectors, their derivatives, beam-gain kernels and the
BS-signal cancellation projector.

Half-wavelength spacing with the array centre as phase reference: element
``k`` (0-based) of an ``m``-element response has phase
``pi * theta * (k - (m - 1) / 2)``.
"""

from __future__ import annotations

import numpy as np

_SINGULAR_TOL = 1e-9


def element_offsets(m: int) -> np.ndarray:
    return np.arange(m) - (m - 1) / 2.0


def steering(m: int, theta) -> np.ndarray:
    """Array response of an ``m``-element ULA.

    Scalar ``theta`` gives a length-``m`` vector; an array of directions
    gives an ``(m, len(theta))`` matrix with one response per column.
    """
    k = element_offsets(m)
    theta = np.asarray(theta, dtype=float)
    if theta.ndim == 0:
        return np.exp(1j * np.pi * theta * k)
    return np.exp(1j * np.pi * np.outer(k, theta))


def steering_derivative(m: int, theta) -> np.ndarray:
    """Elementwise d/dtheta of :func:`steering` (same shape convention)."""
    k = element_offsets(m)
    a = steering(m, theta)
    scale = 1j * np.pi * k
    return scale * a if a.ndim == 1 else scale[:, None] * a


def derivative_norm_sq(m: int) -> float:
    """Closed form of ||d a / d theta||^2, independent of theta."""
    return np.pi ** 2 * m * (m ** 2 - 1) / 12.0


def beam_kernel(m: int, delta):
    """|sin(pi m delta / 2) / sin(pi delta / 2)|, the ULA array factor.

    Returns ``m`` at the removable singularities ``delta = 2k``.
    """
    delta = np.asarray(delta, dtype=float)
    den = np.sin(np.pi * delta / 2.0)
    num = np.sin(np.pi * m * delta / 2.0)
    small = np.abs(den) < _SINGULAR_TOL
    out = np.abs(num / np.where(small, 1.0, den))
    out = np.where(small, float(m), out)
    return float(out) if out.ndim == 0 else out


def cancellation_project(
    se_snapshot: np.ndarray, theta_bi: float, m_se: int | None = None
) -> np.ndarray:
    """Remove the component along ``a_s(theta_bi)`` from SE snapshots.

    Accepts one length-``M_s`` snapshot or an ``(M_s, T)`` block of them
    (one per column). If ``m_se`` is given the leading dimension must match.
    """
    y = np.asarray(se_snapshot)
    ms = y.shape[0]
    if ms < 1:
        raise ValueError("empty snapshot")
    if m_se is not None and ms != m_se:
        raise ValueError(f"snapshot length {ms} does not match SE count {m_se}")
    a = steering(ms, theta_bi)
    if y.ndim == 1:
        return y - a * (a.conj() @ y) / ms
    return y - np.outer(a, a.conj() @ y) / ms


def projector(ms: int, theta_bi: float) -> np.ndarray:
    a = steering(ms, theta_bi)
    return np.eye(ms) - np.outer(a, a.conj()) / ms
