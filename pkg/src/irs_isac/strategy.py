"""Phase II: choose between single-beam sensing, beam splitting and plain
communication, build the RE reflection vector and simulate the data phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .array import beam_kernel, cancellation_project, steering
from .channel import ChannelSet, assemble_channels, channel_gain_snr, received_reduced
from .scanning import complex_noise, rate_from_snr, snr_for_rate
from .scenario import Scenario, wrap_direction

SINGLE_BEAM = "single-beam"
BEAM_SPLIT = "beam-split"
COMM_ONLY = "communication-only"

SPLIT_SEPARATION = 11.0  # beam splitting needs |delta| > 11 / M


class InsufficientMargin(ValueError):
    """The user SNR does not exceed the target SNR."""


@dataclass(frozen=True)
class SplitReflection:
    phi_e: np.ndarray
    m_e: int


@dataclass
class StrategyDecision:
    kind: str
    m_e: int
    best_direction: float  # eta_ell
    theta_hat: float
    delta_ut: float
    reflection: np.ndarray
    # (centre, half-width) in spatial direction for the regions used
    regions: dict = field(default_factory=dict)


def split_reflection(m_e: int, theta_iu_bar: float, theta_hat_it_bar: float, m: int) -> SplitReflection:
    """RE reflection with the first ``m_e`` elements steered to the target.

    The remaining elements keep the phase progression of the user beam, so
    ``m_e = 0`` reproduces the user beam exactly.
    """
    if not 0 <= m_e <= m:
        raise ValueError(f"m_e={m_e} outside [0, {m}]")
    k = np.arange(m)
    phase = np.pi * theta_iu_bar * (k - (m - 1) / 2.0)
    head = k[:m_e]
    phase[:m_e] = np.pi * (theta_hat_it_bar * head - (m - 1) / 2.0 * theta_iu_bar)
    return SplitReflection(phi_e=np.exp(1j * phase), m_e=int(m_e))


def split_gain(m: int, m_e: int, delta_ut: float) -> float:
    """User-side IRS gain when ``m_e`` REs point ``delta_ut`` away from the user."""
    rho = np.exp(1j * np.pi * delta_ut * (m_e - 1) / 2.0)
    d = math.sin(math.pi * delta_ut / 2.0)
    if abs(d) < 1e-9:
        # signed limit at delta = 2k
        k = round(delta_ut / 2.0)
        core = float(m_e) * (-1.0) ** (k * (m_e - 1))
    else:
        core = math.sin(math.pi * m_e * delta_ut / 2.0) / d
    return float(abs((m - m_e) + rho * core))


def worst_case_snr(gamma_ell: float, m_e: int, m: int, l: int) -> float:
    """Pessimistic user SNR after splitting off ``m_e`` REs.

    Combines the smallest channel gain consistent with ``gamma_ell`` (user on
    the beam centre) with the smallest array gain of the remaining REs (user
    half a beam spacing away).
    """
    return (
        gamma_ell / m ** 2
        * math.sin(math.pi * (m - m_e) / (2 * l)) ** 2
        / math.sin(math.pi / (2 * l)) ** 2
    )


def element_allocation(gamma_ell: float, gamma_target: float, m: int, l: int, exact: bool = True) -> int:
    """Largest number of REs that can be split off for sensing.

    Returns 0 when even an unsplit beam cannot certify ``gamma_target`` in
    the worst case (the arcsine argument exceeds 1).
    """
    if gamma_target > gamma_ell:
        raise InsufficientMargin(f"insufficient margin: gamma={gamma_target} > gamma_ell={gamma_ell}")
    ratio = math.sqrt(gamma_target / gamma_ell)
    if exact:
        arg = m * ratio * math.sin(math.pi / (2 * l))
        if arg > 1.0:
            return 0
        bound = m - (2 * l / math.pi) * math.asin(arg)
    else:
        bound = m * (1.0 - ratio)
    # guard the floor against round-off just below an integer
    m_e = math.floor(bound + 1e-9)
    return int(min(max(m_e, 0), m - 1))


def element_allocation_genie(gamma_ell: float, gamma_target: float, m: int, delta_u: float) -> int:
    """Allocation using the true user offset instead of the worst case."""
    if gamma_target > gamma_ell:
        raise InsufficientMargin(f"insufficient margin: gamma={gamma_target} > gamma_ell={gamma_ell}")
    g_ch = gamma_ell / beam_kernel(m, delta_u) ** 2
    m_e = 0
    for cand in range(1, m):
        if g_ch * beam_kernel(m - cand, delta_u) ** 2 >= gamma_target:
            m_e = cand
        else:
            break
    return m_e


def decide_strategy(
    theta_hat: float,
    best_direction: float,
    gamma_ell: float,
    s: Scenario,
    *,
    worst_case_allocation: bool | None = None,
    delta_u: float | None = None,
    gamma_target: float | None = None,
) -> StrategyDecision:
    """Pick the phase II behaviour from what the IRS controller knows.

    ``theta_hat`` is the phase I target estimate, ``best_direction`` the
    direction of the fed-back beam and ``gamma_ell`` the reported SNR.
    """
    m = s.m_re
    if worst_case_allocation is None:
        worst_case_allocation = s.worst_case_allocation
    if gamma_target is None:
        gamma_target = snr_for_rate(s, s.rate_threshold_bps_hz)
    beam_centre = s.theta_bi + best_direction
    offset = abs(wrap_direction(theta_hat - beam_centre))
    regions = {
        "undetectable": (s.theta_bi, 2.0 / s.m_se),
        "single_beam": (beam_centre, 2.0 / m),
        "split": (beam_centre, SPLIT_SEPARATION / m),
    }
    phi_star = steering(m, best_direction)

    def decision(kind, m_e=0, phi=phi_star):
        return StrategyDecision(kind, m_e, best_direction, theta_hat, offset, phi, regions)

    if abs(wrap_direction(theta_hat - s.theta_bi)) < 2.0 / s.m_se:
        return decision(COMM_ONLY)
    if offset < 2.0 / m:
        return decision(SINGLE_BEAM)
    if offset > SPLIT_SEPARATION / m and gamma_ell > gamma_target:
        if worst_case_allocation or delta_u is None:
            m_e = element_allocation(gamma_ell, gamma_target, m, s.codebook_size)
        else:
            m_e = element_allocation_genie(gamma_ell, gamma_target, m, delta_u)
        if m_e >= 1:
            target_dir = wrap_direction(theta_hat - s.theta_bi)
            split = split_reflection(m_e, best_direction, target_dir, m)
            return decision(BEAM_SPLIT, m_e, split.phi_e)
    return decision(COMM_ONLY)


@dataclass
class Phase2Record:
    y2: np.ndarray  # (M_s, tau2) cancelled echoes
    x2: np.ndarray  # (M, tau2) reflection times data symbols
    user_snr: float
    user_rate: float


def user_snr_for(s: Scenario, phi: np.ndarray, channels: ChannelSet | None = None) -> float:
    gains = channels.gains if channels is not None else None
    q_u = steering(s.m_re, s.theta_iu_bar)
    return channel_gain_snr(s, gains) * abs(np.vdot(q_u, phi)) ** 2


def simulate_phase2(
    s: Scenario,
    channels: ChannelSet | None,
    decision: StrategyDecision | np.ndarray,
    rng: np.random.Generator | None = None,
    *,
    noise: bool = True,
    echo_reflection: np.ndarray | None = None,
) -> Phase2Record:
    """Data phase with a fixed reflection vector and unit-modulus data symbols.

    Symbols are drawn before noise and independently of the reflection, so
    two strategies fed the same generator state see identical randomness.
    ``echo_reflection`` optionally replaces the reflection seen by the target
    path (used for interference-free reference runs).
    """
    tau2 = s.data_symbols
    if tau2 <= 0:
        raise ValueError("no data symbols")
    if channels is None:
        channels = assemble_channels(s)
    phi = decision.reflection if isinstance(decision, StrategyDecision) else np.asarray(decision)
    if rng is None:
        if noise:
            raise ValueError("rng required when noise is enabled")
        symbols = np.ones(tau2, dtype=complex)
    else:
        symbols = np.exp(2j * np.pi * rng.random(tau2))
    phi_t = phi if echo_reflection is None else echo_reflection
    x2 = np.outer(phi_t, symbols)
    _, y_s = received_reduced(s, channels.gains, phi_t)
    # target and direct terms both scale with the symbol of their snapshot
    y_s = np.outer(y_s, symbols)
    if noise:
        y_s = y_s + complex_noise(rng, (s.m_se, tau2), s.noise_power_w)
    y2 = cancellation_project(y_s, s.theta_bi)
    snr = user_snr_for(s, phi, channels)
    return Phase2Record(y2=y2, x2=x2, user_snr=snr, user_rate=rate_from_snr(s, snr))
