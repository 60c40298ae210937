"""Closed-form sensing performance: Fisher information, CRBs, outlier
probability, interval-error MSE prediction and SNR thresholds.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .array import derivative_norm_sq, steering, steering_derivative
from .channel import path_gains, target_snr
from .scanning import dft_codebook, nearest_beam
from .scenario import Scenario, watts_to_dbm


def fisher_information(u: np.ndarray, u_dot: np.ndarray, alpha_s: complex, sigma2: float) -> np.ndarray:
    """3x3 FIM for ``[theta, Re alpha, Im alpha]`` under ``vec(Y) = alpha vec(U(theta)) + noise``.

    Built directly from the mean derivatives:
    ``F_ij = 2/sigma^2 Re{d_i^H d_j}`` with ``d_theta = alpha vec(U_dot)``,
    ``d_re = vec(U)``, ``d_im = j vec(U)``.
    """
    d = np.stack(
        [alpha_s * np.ravel(u_dot), np.ravel(u), 1j * np.ravel(u)], axis=1
    )
    return 2.0 / sigma2 * np.real(d.conj().T @ d)


def crb_from_fim(fim: np.ndarray) -> float:
    """Angle CRB via the Schur complement of the nuisance block."""
    f_tt = fim[0, 0]
    f_ta = fim[0, 1:]
    f_aa = fim[1:, 1:]
    schur = f_tt - f_ta @ np.linalg.solve(f_aa, f_ta)
    return float(1.0 / schur)


def fim_crb_general(u: np.ndarray, u_dot: np.ndarray, alpha_s: complex, sigma2: float) -> float:
    """Angle CRB for an arbitrary signal matrix ``U(theta)`` and its derivative."""
    if not np.any(u):
        raise ValueError("zero-energy signal matrix")
    return crb_from_fim(fisher_information(u, u_dot, alpha_s, sigma2))


def crb_trace_form(u: np.ndarray, u_dot: np.ndarray, alpha_s: complex, sigma2: float) -> float:
    """Same bound written with traces (the nuisance gain eliminated analytically)."""
    e_dd = np.vdot(u_dot, u_dot).real
    e_uu = np.vdot(u, u).real
    cross = np.vdot(u_dot, u)  # tr(U U_dot^H)
    return float(sigma2 / (2 * abs(alpha_s) ** 2 * (e_dd - abs(cross) ** 2 / e_uu)))


def signal_matrix(s: Scenario, theta: float, x: np.ndarray, x2: np.ndarray | None = None):
    """Noise-free echo model ``U(theta) = sqrt(N P_t) alpha_g a_s(theta) q(theta)^H [X, X2]``
    and its analytic theta-derivative."""
    g = path_gains(s)
    c = math.sqrt(s.n_bs * s.tx_power_w) * g.alpha_g
    blocks = x if x2 is None else np.hstack([x, x2])
    a = steering(s.m_se, theta)
    a_dot = steering_derivative(s.m_se, theta)
    q = steering(s.m_re, theta - s.theta_bi)
    q_dot = steering_derivative(s.m_re, theta - s.theta_bi)
    row = q.conj() @ blocks
    row_dot = q_dot.conj() @ blocks
    u = c * np.outer(a, row)
    u_dot = c * (np.outer(a_dot, row) + np.outer(a, row_dot))
    return u, u_dot


def signal_matrix_fd(s: Scenario, theta: float, x: np.ndarray, x2=None, h: float = 1e-6):
    """Central finite-difference derivative of :func:`signal_matrix`."""
    u, _ = signal_matrix(s, theta, x, x2)
    up, _ = signal_matrix(s, theta + h, x, x2)
    um, _ = signal_matrix(s, theta - h, x, x2)
    return u, (up - um) / (2 * h)


def crb_phase1_closed(s: Scenario, rho_t: float | None = None) -> float:
    """Phase I angle CRB with a DFT sweep; independent of the target direction."""
    if rho_t is None:
        rho_t = target_snr(s)
    m, ms = s.m_re, s.m_se
    return 6.0 / (rho_t * math.pi ** 2 * s.n_bs * s.codebook_size * m * ms * (m ** 2 + ms ** 2 - 2))


def _lnmms(s: Scenario) -> float:
    return s.codebook_size * s.n_bs * s.m_re * s.m_se


def no_outlier_prob(s: Scenario, rho_t: float | None = None) -> float:
    if rho_t is None:
        rho_t = target_snr(s)
    e = 0.5 * math.exp(-_lnmms(s) * rho_t / 2.0)
    return float((1.0 - e) ** (s.m_se + s.m_re - 2))


def mse_from_parts(p: float, crb: float) -> float:
    return (1.0 - p) / 3.0 + p * crb


def mse_predict(s: Scenario, rho_t: float | None = None) -> float:
    """Interval-error MSE: uniform outliers weighted by ``1 - p`` plus the CRB."""
    return mse_from_parts(no_outlier_prob(s, rho_t), crb_phase1_closed(s, rho_t))


def thresholds(s: Scenario) -> tuple[float, float]:
    """No-information and breakdown target-SNR thresholds ``(rho_ni, rho_th)``."""
    k = s.m_se + s.m_re - 2
    x = _lnmms(s)
    rho_ni = -2.0 / x * math.log(2.0 * (1.0 - (1.0 - s.beta_ni) ** (1.0 / k)))
    rho0 = math.pi ** 2 * s.m_re ** 2 * s.m_se ** 2 * k / 2.0
    rho_th = 2.0 / x * (math.log(rho0) + math.log(math.log(rho0)))
    return rho_ni, rho_th


def rho_to_tx_dbm(s: Scenario, rho: float) -> float:
    """Transmit power (dBm) giving target SNR ``rho`` for the scenario geometry."""
    return watts_to_dbm(s.tx_power_w * rho / target_snr(s))


def crb_whole(
    s: Scenario, phi_used: np.ndarray, tau2: int | None = None, *, unit_modulus: bool = True
) -> tuple[float, float]:
    """Whole-phase CRB (exact) and its simpler upper bound.

    ``phi_used`` is the fixed phase II reflection vector; data symbols are
    unit modulus so ``X2 X2^H = tau2 phi phi^H``. ``unit_modulus=False``
    admits partially switched-off reflections (interference-free reference
    runs), for which the same expressions hold.
    """
    if tau2 is None:
        tau2 = s.data_symbols
    phi = np.asarray(phi_used, dtype=complex)
    if unit_modulus and not np.allclose(np.abs(phi), 1.0, atol=1e-9):
        raise ValueError("reflection vector must have unit-modulus entries")
    g = path_gains(s)
    m, ms = s.m_re, s.m_se
    base = s.n_bs * s.tx_power_w * abs(g.alpha_g) ** 2
    b1 = base * s.codebook_size
    b2 = base * tau2
    tb = s.theta_it_bar
    q = steering(m, tb)
    q_dot = steering_derivative(m, tb)
    qphi = np.vdot(q, phi)
    qdphi = np.vdot(q_dot, phi)
    ad2 = derivative_norm_sq(ms)
    qd2 = derivative_norm_sq(m)
    inner = (
        b1 * m * ad2
        + b2 * abs(qphi) ** 2 * ad2
        + b1 * ms * qd2
        + b2 * ms * abs(qdphi) ** 2
        - (b2 * ms) ** 2 * abs(qphi * np.conj(qdphi)) ** 2
        / (b1 * ms * m + b2 * ms * abs(qphi) ** 2)
    )
    scale = s.noise_power_w / (2 * abs(g.alpha_s) ** 2)
    crb_w = scale / inner
    rho_t = target_snr(s, g)
    crb_up = 6.0 / (
        rho_t * math.pi ** 2 * s.n_bs
        * (s.codebook_size * m * ms * (m ** 2 + ms ** 2 - 2) + tau2 * abs(qphi) ** 2 * ms * (ms ** 2 - 1))
    )
    return float(crb_w), float(crb_up)


def nominal_best_beam(s: Scenario) -> np.ndarray:
    """Reflection vector of the codebook beam nearest the true user direction."""
    cb = dft_codebook(s.m_re, s.codebook_size)
    return cb.columns[:, nearest_beam(cb, s.theta_iu_bar)]


@dataclass
class AnalyticsReport:
    crb_phase1: float
    crb_whole: float
    crb_up: float
    p_no_outlier: float
    mse_predicted: float
    rho_ni: float
    rho_th: float
    rho_t: float
    rho_ni_dbm: float
    rho_th_dbm: float
    outlier_floor_flag: bool  # true direction near the edge of [-1, 1]

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def analyze(s: Scenario, phi_used: np.ndarray | None = None) -> AnalyticsReport:
    """Evaluate every closed-form metric for ``s``.

    The whole-phase bounds assume single-beam phase II with the codebook beam
    nearest the user unless ``phi_used`` is given.
    """
    if phi_used is None:
        phi_used = nominal_best_beam(s)
    rho_t = target_snr(s)
    crb1 = crb_phase1_closed(s, rho_t)
    cw, cu = crb_whole(s, phi_used)
    rni, rth = thresholds(s)
    return AnalyticsReport(
        crb_phase1=crb1,
        crb_whole=cw,
        crb_up=cu,
        p_no_outlier=no_outlier_prob(s, rho_t),
        mse_predicted=mse_predict(s, rho_t),
        rho_ni=rni,
        rho_th=rth,
        rho_t=rho_t,
        rho_ni_dbm=rho_to_tx_dbm(s, rni),
        rho_th_dbm=rho_to_tx_dbm(s, rth),
        outlier_floor_flag=abs(s.theta_it) > 0.8,
    )
