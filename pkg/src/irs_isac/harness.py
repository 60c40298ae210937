"""Monte-Carlo campaigns: per-trial simulation, figure presets, summary rows
and table emission.

Each trial owns a Philox stream keyed by ``(seed, figure, sweep index,
trial index)``, so results do not depend on execution order or on how
sweep points are distributed over worker processes.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import analytics
from .array import beam_kernel
from .channel import assemble_channels, channel_gain_snr
from .estimation import EstimationError, mle_phase1, mle_whole
from .scanning import (
    dft_codebook,
    mean_achievable_rate,
    nearest_beam,
    rate_from_snr,
    simulate_phase1,
    snr_for_rate,
)
from .scenario import Scenario, validate_scenario, wrap_direction
from .strategy import (
    BEAM_SPLIT,
    decide_strategy,
    simulate_phase2,
    split_reflection,
    user_snr_for,
)

log = logging.getLogger(__name__)

FIGURES = ("fig4", "fig5", "fig6", "fig8", "fig9", "fig10", "fig11", "fig12", "fig13", "fig14", "custom")
MODES = ("phase1", "single-beam", "adaptive", "split-fixed", "split-reference")
DESK_TRIALS = 200
FULL_TRIALS = 1000

CSV_FIELDS = (
    "sweep",
    "empirical_mse",
    "mse_stderr",
    "predicted_mse",
    "crb_phase1",
    "crb_whole",
    "rate_mean",
    "rate_reference",
    "p_no_outlier",
    "trials",
)


@dataclass
class ExperimentSpec:
    figure_id: str = "custom"
    sweep_param: str = "tx_power_dbm"
    sweep_values: Sequence[Any] = (30.0,)
    trials: int = DESK_TRIALS
    seed: int = 42
    overrides: dict = field(default_factory=dict)
    mode: str = "phase1"
    m_e: int = 36  # used by the split-fixed / split-reference modes
    # optional second sweep axis (heatmaps); rows cover the cartesian product
    sweep2_param: str | None = None
    sweep2_values: Sequence[Any] = ()

    def __post_init__(self):
        if self.figure_id not in FIGURES:
            raise ValueError(f"unknown figure id {self.figure_id!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class SummaryRow:
    sweep: Any
    empirical_mse: float
    mse_stderr: float
    predicted_mse: float
    crb_phase1: float
    crb_whole: float
    rate_mean: float
    rate_reference: float
    p_no_outlier: float
    trials: int


_SCENARIO_KEYS = {f.name for f in fields(Scenario)} | {"tx_power_dbm", "noise_power_dbm", "rcs_dbsm"}
SWEEP_PARAMS = _SCENARIO_KEYS | {"scan_ratio", "m_e"}


def figure_spec(figure_id: str, trials: int = DESK_TRIALS, seed: int = 42) -> ExperimentSpec:
    """Desk-scale preset for one of the reproduced figures."""
    p_sweep = [float(x) for x in range(-30, 31, 5)]
    angle_sweep = [float(x) for x in range(-40, 71, 5)]
    presets = {
        "fig4": dict(sweep_param="tx_power_dbm", sweep_values=p_sweep, mode="phase1"),
        "fig5": dict(
            sweep_param="scan_ratio",
            sweep_values=[0.064, 0.096, 0.128, 0.192, 0.256, 0.384, 0.512],
            overrides={"tx_power_dbm": 20.0},
            mode="phase1",
        ),
        "fig6": dict(
            sweep_param="tx_power_dbm",
            sweep_values=p_sweep,
            overrides={"zeta_it": 0.0, "zeta_iu": 0.0},
            mode="single-beam",
        ),
        "fig8": dict(
            sweep_param="zeta_it",
            sweep_values=[float(x) for x in range(-85, 86, 5)],
            mode="split-fixed",
            m_e=36,
        ),
        "fig9": dict(
            sweep_param="m_e",
            sweep_values=list(range(0, 61, 6)),
            overrides={"zeta_it": 30.0},
            mode="split-fixed",
        ),
        "fig10": dict(
            sweep_param="m_e",
            sweep_values=list(range(0, 61, 6)),
            overrides={"zeta_it": 3.0},
            mode="split-fixed",
        ),
        "fig11": dict(sweep_param="zeta_it", sweep_values=angle_sweep, mode="single-beam"),
        "fig12": dict(sweep_param="zeta_it", sweep_values=angle_sweep, mode="adaptive"),
        "fig13": dict(
            sweep_param="zeta_it",
            sweep_values=[float(x) for x in range(-40, 71, 10)],
            sweep2_param="tx_power_dbm",
            sweep2_values=[float(x) for x in range(10, 41, 5)],
            mode="adaptive",
        ),
    }
    presets["fig14"] = presets["fig13"]
    if figure_id not in presets:
        raise ValueError(f"no preset for {figure_id!r}")
    return ExperimentSpec(figure_id=figure_id, trials=trials, seed=seed, **presets[figure_id])


def _apply_raw(raw: dict, param: str, value: Any, extra: dict) -> dict:
    raw = dict(raw)
    if param == "scan_ratio":
        l = int(round(float(value) * raw.get("coherence_symbols", Scenario.coherence_symbols)))
        raw["codebook_size"] = l
        raw["scan_symbols"] = l
    elif param == "m_e":
        extra["m_e"] = int(value)
    elif param in _SCENARIO_KEYS:
        linear = {"tx_power_dbm": "tx_power_w", "noise_power_dbm": "noise_power_w", "rcs_dbsm": "rcs_sqm"}
        if param in linear:
            raw.pop(linear[param], None)
        raw[param] = value
    else:
        raise ValueError(f"invalid sweep parameter {param!r}")
    return raw


def apply_sweep(base: dict, param: str, value: Any, param2: str | None = None, value2: Any = None) -> tuple[Scenario, dict]:
    """Scenario for one sweep point plus any non-scenario settings (``m_e``)."""
    extra: dict[str, Any] = {}
    raw = _apply_raw(base, param, value, extra)
    if param2 is not None:
        raw = _apply_raw(raw, param2, value2, extra)
    return validate_scenario(raw), extra


def trial_rng(seed: int, key: str, index: int, trial: int) -> np.random.Generator:
    tag = zlib.crc32(key.encode())
    ss = np.random.SeedSequence(seed, spawn_key=(tag, index, trial))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class TrialOutcome:
    sq_error: float
    rate: float
    kind: str
    m_e: int


def _sq_error(theta_hat: float, theta: float) -> float:
    # directions alias modulo 2, so errors are measured on that circle
    return float(wrap_direction(theta_hat - theta) ** 2)


def run_trial(s: Scenario, mode: str, rng: np.random.Generator, m_e: int = 0, ctx: dict | None = None) -> TrialOutcome:
    """Simulate one coherence interval and return the estimator's error.

    Random draws happen in a fixed order (phase I noise, then phase II
    symbols and noise) whatever the mode, so paired runs share noise.
    """
    ctx = ctx if ctx is not None else _context(s)
    cb, ch = ctx["codebook"], ctx["channels"]
    rec = simulate_phase1(s, ch, rng, codebook=cb)
    eta = float(cb.directions[rec.best_index])
    phi_star = cb.columns[:, rec.best_index]
    try:
        est1 = mle_phase1(rec.se_echo, cb.columns, s, gains=ch.gains)
        theta1 = est1.theta_hat
    except EstimationError:
        theta1 = 0.0

    if mode == "phase1":
        snr = user_snr_for(s, phi_star, ch)
        return TrialOutcome(_sq_error(theta1, s.theta_it), rate_from_snr(s, snr), "phase1", 0)

    echo_phi = None
    if mode == "single-beam":
        phi, kind, used = phi_star, "single-beam", 0
    elif mode == "adaptive":
        # the true offset is only consulted when worst-case allocation is off
        delta_u = abs(wrap_direction(s.theta_iu_bar - eta))
        dec = decide_strategy(theta1, eta, rec.best_snr, s, delta_u=delta_u)
        phi, kind, used = dec.reflection, dec.kind, dec.m_e
    else:
        target_dir = wrap_direction(theta1 - s.theta_bi)
        phi = split_reflection(m_e, eta, target_dir, s.m_re).phi_e
        kind, used = BEAM_SPLIT, m_e
        if mode == "split-reference":
            echo_phi = phi.copy()
            echo_phi[m_e:] = 0.0
            phi = phi.copy()
            phi[:m_e] = 0.0  # user sees only its own group
    p2 = simulate_phase2(s, ch, phi, rng, echo_reflection=echo_phi)
    try:
        est = mle_whole(rec.se_echo, cb.columns, p2.y2, p2.x2, s, gains=ch.gains)
        theta_w = est.theta_hat
    except EstimationError:
        theta_w = theta1
    return TrialOutcome(_sq_error(theta_w, s.theta_it), p2.user_rate, kind, used)


def _context(s: Scenario) -> dict:
    return {"codebook": dft_codebook(s.m_re, s.codebook_size), "channels": assemble_channels(s)}


def nominal_reflection(s: Scenario, mode: str, m_e: int = 0) -> np.ndarray | None:
    """Phase II reflection a noise-free run would use (None for phase I only)."""
    cb = dft_codebook(s.m_re, s.codebook_size)
    ell = nearest_beam(cb, s.theta_iu_bar)
    eta = float(cb.directions[ell])
    if mode == "phase1":
        return None
    if mode == "single-beam":
        return cb.columns[:, ell]
    target_dir = wrap_direction(s.theta_it_bar)
    if mode == "adaptive":
        delta_u = abs(wrap_direction(s.theta_iu_bar - eta))
        gamma = channel_gain_snr(s) * beam_kernel(s.m_re, delta_u) ** 2
        return decide_strategy(s.theta_it, eta, gamma, s, delta_u=delta_u).reflection
    phi = split_reflection(m_e, eta, target_dir, s.m_re).phi_e
    if mode == "split-reference":
        # the target only ever sees the sensing group
        phi = phi.copy()
        phi[m_e:] = 0.0
    return phi


def reference_rate(s: Scenario, mode: str, m_e: int = 0) -> float:
    """Noise-free rate reference for a sweep point.

    Phase I sweeps average over the user offset within a beam; split modes
    use the interference-free gain of the ``M - m_e`` user REs; the others
    use the nearest beam.
    """
    cb = dft_codebook(s.m_re, s.codebook_size)
    delta_u = abs(wrap_direction(s.theta_iu_bar - cb.directions[nearest_beam(cb, s.theta_iu_bar)]))
    if mode == "phase1":
        return mean_achievable_rate(s)
    if mode in ("split-fixed", "split-reference"):
        snr = channel_gain_snr(s) * beam_kernel(s.m_re - m_e, delta_u) ** 2
        return rate_from_snr(s, snr)
    return rate_from_snr(s, channel_gain_snr(s) * beam_kernel(s.m_re, delta_u) ** 2)


def _point_job(args) -> SummaryRow:
    spec, index, label, s, m_e, key = args
    ctx = _context(s)
    outcomes = [run_trial(s, spec.mode, trial_rng(spec.seed, key, index, t), m_e, ctx) for t in range(spec.trials)]
    return summarize(label, s, spec.mode, m_e, outcomes)


def summarize(label, s: Scenario, mode: str, m_e: int, outcomes: Sequence[TrialOutcome]) -> SummaryRow:
    errs = np.array([o.sq_error for o in outcomes])
    n = len(errs)
    mse = math.fsum(errs) / n
    stderr = math.sqrt(math.fsum((errs - mse) ** 2) / (n - 1) / n) if n > 1 else 0.0
    crb1 = analytics.crb_phase1_closed(s)
    phi = nominal_reflection(s, mode, m_e)
    if phi is None or not np.any(phi):
        crb_w = crb1
    else:
        crb_w = analytics.crb_whole(s, phi, unit_modulus=(mode != "split-reference"))[0]
    return SummaryRow(
        sweep=label,
        empirical_mse=mse,
        mse_stderr=stderr,
        predicted_mse=analytics.mse_predict(s),
        crb_phase1=crb1,
        crb_whole=crb_w,
        rate_mean=math.fsum(o.rate for o in outcomes) / n,
        rate_reference=reference_rate(s, mode, m_e),
        p_no_outlier=analytics.no_outlier_prob(s),
        trials=n,
    )


def _points(spec: ExperimentSpec, base: dict):
    if spec.sweep2_param:
        grid = [(a, b) for a in spec.sweep_values for b in spec.sweep2_values]
    else:
        grid = [(a, None) for a in spec.sweep_values]
    out = []
    for index, (a, b) in enumerate(grid):
        if b is None:
            s, extra = apply_sweep(base, spec.sweep_param, a)
            label: Any = a
        else:
            s, extra = apply_sweep(base, spec.sweep_param, a, spec.sweep2_param, b)
            label = f"{spec.sweep_param}={a};{spec.sweep2_param}={b}"
        out.append((spec, index, label, s, extra.get("m_e", spec.m_e), spec.figure_id))
    return out


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("ISAC_SIM_THREADS", "1")))
    except ValueError:
        return 1


def run_monte_carlo(spec: ExperimentSpec, base: Scenario | dict | None = None) -> list[SummaryRow]:
    """One summary row per sweep value; deterministic for a given seed."""
    for p in (spec.sweep_param, spec.sweep2_param):
        if p is not None and p not in SWEEP_PARAMS:
            raise ValueError(f"invalid sweep parameter {p!r}")
    raw = _base_raw(base)
    raw.update(spec.overrides)
    jobs = _points(spec, raw)
    workers = min(_workers(), len(jobs))
    log.info("%s: %d points x %d trials on %d worker(s)", spec.figure_id, len(jobs), spec.trials, workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_point_job, jobs))
    return [_point_job(j) for j in jobs]


def _base_raw(base) -> dict:
    if base is None:
        return {}
    if isinstance(base, Scenario):
        return asdict(base)
    return dict(base)


def paired_compare(spec_a: ExperimentSpec, spec_b: ExperimentSpec, seed: int,
                   base: Scenario | dict | None = None) -> list[np.ndarray]:
    """Per-trial squared-error differences (a minus b) under common noise.

    Both arms draw from the same per-trial streams, so only the strategy or
    estimator differs. Returns one array of deltas per sweep value.
    """
    if (list(spec_a.sweep_values) != list(spec_b.sweep_values)
            or spec_a.sweep_param != spec_b.sweep_param
            or spec_a.trials != spec_b.trials
            or spec_a.overrides != spec_b.overrides):
        raise ValueError("incompatible sweeps")
    raw = _base_raw(base)
    raw.update(spec_a.overrides)
    out = []
    for index, value in enumerate(spec_a.sweep_values):
        s, extra = apply_sweep(raw, spec_a.sweep_param, value)
        ctx = _context(s)
        deltas = np.empty(spec_a.trials)
        for t in range(spec_a.trials):
            oa = run_trial(s, spec_a.mode, trial_rng(seed, "paired", index, t), extra.get("m_e", spec_a.m_e), ctx)
            ob = run_trial(s, spec_b.mode, trial_rng(seed, "paired", index, t), extra.get("m_e", spec_b.m_e), ctx)
            deltas[t] = oa.sq_error - ob.sq_error
        out.append(deltas)
    return out


def _fmt(v: Any) -> str:
    if isinstance(v, bool) or isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.9g}"
    return str(v)


def emit_results(rows: Sequence[SummaryRow], fmt: str, path: str | Path | None) -> str:
    """Write rows as CSV or JSON (9 significant digits); returns the text.

    ``path=None`` only returns the text.
    """
    if not rows:
        raise ValueError("nothing to emit")
    if fmt == "csv":
        import io

        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in rows:
            d = asdict(r)
            w.writerow([_fmt(d[k]) for k in CSV_FIELDS])
        text = buf.getvalue()
    elif fmt == "json":
        recs = []
        for r in rows:
            d = asdict(r)
            recs.append({k: (float(_fmt(d[k])) if isinstance(d[k], (float, np.floating)) else d[k])
                         for k in CSV_FIELDS})
        text = json.dumps(recs, indent=1) + "\n"
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is not None:
        Path(path).write_text(text)
    return text


def load_results(path: str | Path) -> list[SummaryRow]:
    """Read back a JSON table written by :func:`emit_results`."""
    return [SummaryRow(**d) for d in json.loads(Path(path).read_text())]


def gamma_threshold(s: Scenario) -> float:
    return snr_for_rate(s, s.rate_threshold_bps_hz)
