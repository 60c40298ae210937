"""Phase I: DFT-codebook beam sweep at the IRS.

The user measures one received power per beam and feeds back the strongest
beam; concurrently the SEs collect the echoes, which are cleaned of the
direct BS signal by projection.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .array import beam_kernel, cancellation_project, steering
from .channel import ChannelSet, assemble_channels, channel_gain_snr, received_full, received_reduced
from .scenario import Scenario, wrap_direction


@dataclass(frozen=True)
class Codebook:
    columns: np.ndarray  # (M, L)
    directions: np.ndarray  # (L,)

    @property
    def size(self) -> int:
        return self.columns.shape[1]


def dft_codebook(m: int, l: int) -> Codebook:
    """L beams pointing at ``-1 + (2i - 1) / L``, i = 1..L."""
    if l < m:
        raise ValueError(f"codebook size {l} smaller than RE count {m}")
    eta = -1.0 + (2.0 * np.arange(1, l + 1) - 1.0) / l
    return Codebook(columns=steering(m, eta), directions=eta)


def nearest_beam(codebook: Codebook, theta: float) -> int:
    """Index of the beam closest to ``theta`` on the 2-periodic circle."""
    d = np.abs(wrap_direction(theta - codebook.directions))
    return int(np.argmin(d))


@dataclass
class ScanRecord:
    user_powers: np.ndarray  # (L,)
    se_raw: np.ndarray  # (M_s, L)
    se_echo: np.ndarray  # (M_s, L)
    best_index: int
    best_snr: float
    true_nearest_index: int
    genie_snr: float
    sensing_valid: bool

    def to_json(self) -> str:
        def pairs(a):
            a = np.asarray(a)
            return np.stack([a.real, a.imag], axis=-1).tolist()

        return json.dumps(
            {
                "user_powers": np.asarray(self.user_powers).tolist(),
                "se_raw": pairs(self.se_raw),
                "se_echo": pairs(self.se_echo),
                "best_index": self.best_index,
                "best_snr": self.best_snr,
                "true_nearest_index": self.true_nearest_index,
                "genie_snr": self.genie_snr,
                "sensing_valid": self.sensing_valid,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "ScanRecord":
        d = json.loads(text)

        def unpairs(x):
            a = np.asarray(x, dtype=float)
            return a[..., 0] + 1j * a[..., 1]

        return cls(
            user_powers=np.asarray(d["user_powers"], dtype=float),
            se_raw=unpairs(d["se_raw"]),
            se_echo=unpairs(d["se_echo"]),
            best_index=int(d["best_index"]),
            best_snr=float(d["best_snr"]),
            true_nearest_index=int(d["true_nearest_index"]),
            genie_snr=float(d["genie_snr"]),
            sensing_valid=bool(d["sensing_valid"]),
        )


def in_undetectable_region(s: Scenario, theta_it: float | None = None) -> bool:
    if theta_it is None:
        theta_it = s.theta_it
    return abs(wrap_direction(theta_it - s.theta_bi)) < 2.0 / s.m_se


def complex_noise(rng: np.random.Generator, shape, power: float) -> np.ndarray:
    """Circular complex Gaussian samples with variance ``power`` each."""
    scale = math.sqrt(power / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def simulate_phase1(
    s: Scenario,
    channels: ChannelSet | None = None,
    rng: np.random.Generator | None = None,
    *,
    noise: bool = True,
    path: str = "reduced",
    codebook: Codebook | None = None,
) -> ScanRecord:
    """Sweep the DFT codebook once, one unit training symbol per beam.

    Noise is drawn as user noise (L samples) followed by SE noise
    (M_s x L), so a given generator state fully determines the record.
    ``path='full'`` synthesizes through the complete channel matrices.
    """
    if s.scan_symbols != s.codebook_size:
        raise ValueError("phase I assumes one symbol per beam (scan_symbols == codebook_size)")
    if channels is None:
        channels = assemble_channels(s)
    if codebook is None:
        codebook = dft_codebook(s.m_re, s.codebook_size)
    X = codebook.columns
    L = codebook.size

    if path == "full":
        y_u, y_s = received_full(s, channels, X)
    elif path == "reduced":
        y_u, y_s = received_reduced(s, channels.gains, X)
    else:
        raise ValueError(f"unknown synthesis path {path!r}")

    if noise:
        if rng is None:
            raise ValueError("rng required when noise is enabled")
        y_u = y_u + complex_noise(rng, L, s.noise_power_w)
        y_s = y_s + complex_noise(rng, (s.m_se, L), s.noise_power_w)

    powers = np.abs(y_u) ** 2
    best = int(np.argmax(powers))  # first maximum on ties
    if noise:
        best_snr = max(powers[best] / s.noise_power_w - 1.0, 0.0)
    else:
        best_snr = powers[best] / s.noise_power_w

    nearest = nearest_beam(codebook, s.theta_iu_bar)
    delta_u = abs(wrap_direction(s.theta_iu_bar - codebook.directions[best]))
    genie = channel_gain_snr(s, channels.gains) * beam_kernel(s.m_re, delta_u) ** 2

    echo = cancellation_project(y_s, s.theta_bi)
    return ScanRecord(
        user_powers=powers,
        se_raw=y_s,
        se_echo=echo,
        best_index=best,
        best_snr=float(best_snr),
        true_nearest_index=nearest,
        genie_snr=float(genie),
        sensing_valid=not in_undetectable_region(s),
    )


def rate_from_snr(s: Scenario, snr: float) -> float:
    """Overhead-discounted spectral efficiency in bps/Hz."""
    return (s.coherence_symbols - s.scan_symbols) / s.coherence_symbols * math.log2(1.0 + snr)


def snr_for_rate(s: Scenario, rate: float) -> float:
    """Inverse of :func:`rate_from_snr`: SNR needed to reach ``rate``."""
    frac = (s.coherence_symbols - s.scan_symbols) / s.coherence_symbols
    if frac <= 0:
        return math.inf
    return 2.0 ** (rate / frac) - 1.0


def achievable_rate(s: Scenario, delta_u: float) -> float:
    """User rate with the best beam offset by ``delta_u`` from the user."""
    if not 0.0 <= delta_u <= 1.0 / s.codebook_size + 1e-15:
        raise ValueError(f"delta_u={delta_u} outside [0, 1/L]")
    snr = channel_gain_snr(s) * beam_kernel(s.m_re, delta_u) ** 2
    return rate_from_snr(s, snr)


def mean_achievable_rate(s: Scenario, points: int = 257) -> float:
    """Rate averaged over ``delta_u ~ U(0, 1/L)`` (Simpson quadrature)."""
    from scipy.integrate import simpson

    d = np.linspace(0.0, 1.0 / s.codebook_size, points)
    r = [achievable_rate(s, x) for x in d]
    return float(simpson(r, x=d) * s.codebook_size)


def undetectable_region(s: Scenario) -> list[tuple[float, float]]:
    """Physical target angles (degrees) whose echo cannot be separated
    from the direct BS signal.

    The set ``|theta_IT - theta_BI| < 2/M_s`` is taken modulo 2 and
    intersected with [-1, 1]; one or two intervals result.
    """
    half = 2.0 / s.m_se
    lo, hi = s.theta_bi - half, s.theta_bi + half
    pieces = []
    for shift in (-2.0, 0.0, 2.0):
        a, b = max(lo + shift, -1.0), min(hi + shift, 1.0)
        if a < b:
            pieces.append((a, b))
    out = [(math.degrees(math.asin(a)), math.degrees(math.asin(b))) for a, b in sorted(pieces)]
    return out
