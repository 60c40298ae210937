"""LoS path gains and the four rank-one channel blocks.

Two signal-synthesis routes are provided. :func:`received_full` multiplies
out the complete matrices (BS beamformer included); :func:`received_reduced`
uses the collapsed form obtained once the matched transmit beam has
eliminated the BS dimension. The full route exists mainly as a test oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .array import steering
from .scenario import Scenario


@dataclass(frozen=True)
class PathGains:
    alpha_g: complex  # BS -> REs
    alpha_h: complex  # REs -> user
    alpha_s: complex  # REs -> target -> SEs


@dataclass(frozen=True)
class ChannelSet:
    g: np.ndarray  # (M, N)
    h_u: np.ndarray  # (M,)
    g_s: np.ndarray  # (M_s, N)
    h_t: np.ndarray  # (M_s, M)
    gains: PathGains


def path_gains(s: Scenario) -> PathGains:
    lam = s.wavelength
    alpha_g = lam / (4 * np.pi * s.d_bi) * np.exp(2j * np.pi * s.d_bi / lam)
    alpha_h = lam / (4 * np.pi * s.d_iu) * np.exp(2j * np.pi * s.d_iu / lam)
    mag_s = np.sqrt(lam ** 2 * s.rcs_sqm / (64 * np.pi ** 3 * s.d_it ** 4))
    alpha_s = mag_s * np.exp(4j * np.pi * s.d_it / lam)
    return PathGains(complex(alpha_g), complex(alpha_h), complex(alpha_s))


def assemble_channels(s: Scenario, gains: PathGains | None = None) -> ChannelSet:
    if gains is None:
        gains = path_gains(s)
    a_b = steering(s.n_bs, s.vartheta_bi)
    a_r_bi = steering(s.m_re, s.theta_bi)
    a_s_bi = steering(s.m_se, s.theta_bi)
    g = gains.alpha_g * np.outer(a_r_bi, a_b.conj())
    h_u = gains.alpha_h * steering(s.m_re, s.theta_iu)
    g_s = gains.alpha_g * np.outer(a_s_bi, a_b.conj())
    h_t = gains.alpha_s * np.outer(
        steering(s.m_se, s.theta_it), steering(s.m_re, s.theta_it).conj()
    )
    return ChannelSet(g=g, h_u=h_u, g_s=g_s, h_t=h_t, gains=gains)


def transmit_beam(s: Scenario) -> np.ndarray:
    """Matched BS beamformer ``a_b(vartheta_BI) / sqrt(N)``."""
    return steering(s.n_bs, s.vartheta_bi) / np.sqrt(s.n_bs)


def target_snr(s: Scenario, gains: PathGains | None = None) -> float:
    """Target SNR ``P_t |alpha_g|^2 |alpha_s|^2 / sigma^2``."""
    if gains is None:
        gains = path_gains(s)
    return s.tx_power_w * abs(gains.alpha_g) ** 2 * abs(gains.alpha_s) ** 2 / s.noise_power_w


def channel_gain_snr(s: Scenario, gains: PathGains | None = None) -> float:
    """User channel gain ``N P_t |alpha_g|^2 |alpha_h|^2 / sigma^2``
    (the SNR before any IRS beamforming gain)."""
    if gains is None:
        gains = path_gains(s)
    return (
        s.n_bs * s.tx_power_w * abs(gains.alpha_g) ** 2 * abs(gains.alpha_h) ** 2
        / s.noise_power_w
    )


def received_full(s: Scenario, ch: ChannelSet, phi: np.ndarray):
    """Noiseless user and SE signals from the full matrix model.

    ``phi`` is one reflection vector (M,) or a block (M, K), one per symbol
    with unit training symbols. Returns ``(y_u, y_s)`` with shapes (K,) and
    (M_s, K), or scalar / (M_s,) for a single vector.
    """
    phi = np.asarray(phi)
    single = phi.ndim == 1
    if single:
        phi = phi[:, None]
    w = transmit_beam(s)
    gw = ch.g @ w  # (M,)
    gsw = ch.g_s @ w  # (M_s,)
    amp = np.sqrt(s.tx_power_w)
    y_u = amp * (ch.h_u.conj() @ (phi * gw[:, None]))
    y_s = amp * (ch.h_t @ (phi * gw[:, None]) + gsw[:, None])
    if single:
        return y_u[0], y_s[:, 0]
    return y_u, y_s


def received_reduced(s: Scenario, gains: PathGains, phi: np.ndarray, with_target: bool = True):
    """Same signals as :func:`received_full` via the collapsed expressions.

    The user term carries ``conj(alpha_h)`` because the channel enters as
    ``h_u^H``; only its modulus matters downstream.
    """
    phi = np.asarray(phi)
    single = phi.ndim == 1
    if single:
        phi = phi[:, None]
    c = np.sqrt(s.n_bs * s.tx_power_w) * gains.alpha_g
    q_u = steering(s.m_re, s.theta_iu_bar)
    y_u = c * np.conj(gains.alpha_h) * (q_u.conj() @ phi)
    direct = steering(s.m_se, s.theta_bi)
    y_s = np.repeat(direct[:, None], phi.shape[1], axis=1).astype(complex)
    if with_target:
        q_t = steering(s.m_re, s.theta_it_bar)
        y_s = y_s + gains.alpha_s * np.outer(steering(s.m_se, s.theta_it), q_t.conj() @ phi)
    y_s = c * y_s
    if single:
        return y_u[0], y_s[:, 0]
    return y_u, y_s
