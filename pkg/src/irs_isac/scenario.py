"""Scenario parameters, unit conversions and validation.

All quantities stored on a :class:`Scenario` are linear (watts, square
metres); decibel forms are converted once when a scenario is built from raw
parameters.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

SPEED_OF_LIGHT = 2.998e8  # m/s, pinned for reproducibility


class ScenarioError(ValueError):
    """Raised when raw parameters violate one or more scenario invariants."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def dbm_to_watts(x_dbm: float) -> float:
    return 10.0 ** ((x_dbm - 30.0) / 10.0)


def watts_to_dbm(x_w: float) -> float:
    return 10.0 * math.log10(x_w) + 30.0


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


def spatial_direction(zeta_deg: float) -> float:
    """Sine of a physical angle given in degrees.

    Raises ``ValueError`` for angles outside the open interval (-90, 90).
    """
    if not -90.0 < zeta_deg < 90.0:
        raise ValueError(f"angle {zeta_deg} deg outside (-90, 90)")
    return math.sin(math.radians(zeta_deg))


def wrap_direction(x):
    """Wrap a spatial-direction offset into [-1, 1) modulo 2.

    Works on scalars and numpy arrays.
    """
    return (x + 1.0) % 2.0 - 1.0


@dataclass(frozen=True)
class Scenario:
    """Immutable parameter set for one experiment.

    Angles are physical angles in degrees; powers in watts; RCS in m^2.
    ``scan_symbols`` defaults to the codebook size (one symbol per beam).
    """

    n_bs: int = 64
    m_re: int = 64
    m_se: int = 12
    codebook_size: int = 64
    coherence_symbols: int = 1000
    scan_symbols: int | None = None
    carrier_hz: float = 28e9
    tx_power_w: float = 1.0
    noise_power_w: float = 1e-15
    d_bi: float = 30.0
    d_iu: float = 10.0
    d_it: float = 5.0
    zeta_bi: float = -60.0
    zeta_iu: float = 0.0
    zeta_it: float = 30.0
    rcs_sqm: float = 10.0 ** 0.7
    rate_threshold_bps_hz: float = 5.0
    beta_ni: float = 8.0 / 9.0
    vartheta_bi: float = 0.2  # BS-side AoD; cancels under matched beamforming
    worst_case_allocation: bool = True  # False: split allocation uses the true user offset

    def __post_init__(self):
        if self.scan_symbols is None:
            object.__setattr__(self, "scan_symbols", self.codebook_size)

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    @property
    def theta_bi(self) -> float:
        return spatial_direction(self.zeta_bi)

    @property
    def theta_iu(self) -> float:
        return spatial_direction(self.zeta_iu)

    @property
    def theta_it(self) -> float:
        return spatial_direction(self.zeta_it)

    @property
    def theta_iu_bar(self) -> float:
        """User direction relative to the BS direction; may leave [-1, 1]."""
        return self.theta_iu - self.theta_bi

    @property
    def theta_it_bar(self) -> float:
        """Target direction relative to the BS direction; may leave [-1, 1]."""
        return self.theta_it - self.theta_bi

    @property
    def theta_it_bar_wrapped(self) -> bool:
        return not -1.0 <= self.theta_it_bar < 1.0

    @property
    def data_symbols(self) -> int:
        return self.coherence_symbols - self.scan_symbols

    @property
    def tx_power_dbm(self) -> float:
        return watts_to_dbm(self.tx_power_w)

    @property
    def noise_power_dbm(self) -> float:
        return watts_to_dbm(self.noise_power_w)

    def replace(self, **changes: Any) -> "Scenario":
        """Return a validated copy with ``changes`` applied (dB keys allowed)."""
        raw = dataclasses.asdict(self)
        if "codebook_size" in changes and "scan_symbols" not in changes:
            # keep one symbol per beam unless the caller decoupled them
            if self.scan_symbols == self.codebook_size:
                raw["scan_symbols"] = None
        for db_key, lin_key in _DB_KEYS.items():
            if db_key in changes:
                raw.pop(lin_key, None)
        raw.update(changes)
        return validate_scenario(raw)


_DB_KEYS = {
    "tx_power_dbm": "tx_power_w",
    "noise_power_dbm": "noise_power_w",
    "rcs_dbsm": "rcs_sqm",
}
_INT_FIELDS = {"n_bs", "m_re", "m_se", "codebook_size", "coherence_symbols", "scan_symbols"}
_FIELDS = {f.name for f in dataclasses.fields(Scenario)}


def _as_bool(v: Any) -> bool:
    if isinstance(v, str):
        low = v.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ScenarioError([f"worst_case_allocation must be a boolean, got {v!r}"])
    return bool(v)


def _convert(raw: Mapping[str, Any]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for key, value in raw.items():
        if key in _DB_KEYS:
            target = _DB_KEYS[key]
            if key == "rcs_dbsm":
                out[target] = db_to_linear(float(value))
            else:
                out[target] = dbm_to_watts(float(value))
        elif key in _FIELDS:
            out[key] = value
        else:
            raise ScenarioError([f"unknown parameter '{key}'"])
    for key in list(out):
        if out[key] is None:
            continue
        if key == "worst_case_allocation":
            out[key] = _as_bool(out[key])
        elif key in _INT_FIELDS:
            v = float(out[key])
            if v != int(v):
                raise ScenarioError([f"{key} must be an integer, got {out[key]}"])
            out[key] = int(v)
        else:
            out[key] = float(out[key])
    return out


def validate_scenario(raw: Mapping[str, Any] | Scenario | None = None) -> Scenario:
    """Build a :class:`Scenario` from raw parameters, checking every invariant.

    ``raw`` may hold field names directly or the dB forms ``tx_power_dbm``,
    ``noise_power_dbm`` and ``rcs_dbsm``. Missing keys take the defaults.
    All violations are collected and raised together as a
    :class:`ScenarioError`.
    """
    if raw is None:
        raw = {}
    if isinstance(raw, Scenario):
        raw = dataclasses.asdict(raw)
    params = _convert(raw)
    s = Scenario(**params)

    errs = []
    if s.m_re < 1:
        errs.append("RE count must be >= 1")
    if s.m_se < 1:
        errs.append("SE count must be >= 1")
    if s.n_bs < 1:
        errs.append("BS antenna count must be >= 1")
    if s.codebook_size < s.m_re:
        errs.append("codebook smaller than RE count")
    if s.scan_symbols <= 0:
        errs.append("scan time must be positive")
    if s.scan_symbols >= s.coherence_symbols:
        errs.append("no data-transmission symbols")
    for name in ("d_bi", "d_iu", "d_it"):
        if not getattr(s, name) > 0:
            errs.append(f"distance {name} must be positive")
    for name in ("tx_power_w", "noise_power_w"):
        if not getattr(s, name) > 0:
            errs.append(f"power {name} must be positive")
    if not s.rcs_sqm > 0:
        errs.append("RCS must be positive")
    if not s.carrier_hz > 0:
        errs.append("carrier frequency must be positive")
    for name in ("zeta_bi", "zeta_iu", "zeta_it"):
        if not -90.0 < getattr(s, name) < 90.0:
            errs.append(f"angle {name} outside (-90, 90) degrees")
    if not 0.0 < s.beta_ni < 1.0:
        errs.append("beta_ni must lie in (0, 1)")
    if not s.rate_threshold_bps_hz >= 0:
        errs.append("rate threshold must be non-negative")
    if errs:
        raise ScenarioError(errs)
    return s


def load_config(path: str | Path) -> Scenario:
    """Read a ``key = value`` text file into a validated scenario.

    A leading ``[scenario]`` section header is optional. The literal path
    ``defaults`` returns the built-in default scenario.
    """
    if str(path) == "defaults":
        return validate_scenario({})
    text = Path(path).read_text()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    if not text.lstrip().startswith("["):
        text = "[scenario]\n" + text
    parser.read_string(text)
    raw: dict[str, Any] = {}
    for section in parser.sections():
        raw.update(parser[section])
    return validate_scenario(raw)


def dump_config(s: Scenario) -> str:
    lines = ["[scenario]"]
    for f in dataclasses.fields(s):
        lines.append(f"{f.name} = {getattr(s, f.name)!r}")
    return "\n".join(lines) + "\n"
