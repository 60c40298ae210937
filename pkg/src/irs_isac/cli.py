"""Command-line entry point: ``irs-isac <verb> [options]``.

Data goes to standard output or ``--out``; diagnostics go to standard error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict

from . import analytics, harness
from .channel import assemble_channels
from .estimation import EstimationError, mle_phase1
from .scanning import ScanRecord, dft_codebook, in_undetectable_region, simulate_phase1, undetectable_region
from .scenario import Scenario, ScenarioError, load_config

log = logging.getLogger("irs_isac")

VERBS = ("validate", "analyze", "scan", "estimate", "reproduce", "sweep")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default="defaults", help="scenario file, or 'defaults'")
    common.add_argument("--out", default=None, help="output file (default: stdout)")
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--trials", type=int, default=harness.DESK_TRIALS)
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--full-scale", action="store_true", help=f"use {harness.FULL_TRIALS} trials")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="irs-isac", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="verb", required=True, metavar="verb")
    sub.add_parser("validate", parents=[common], help="check a scenario file")
    sub.add_parser("analyze", parents=[common], help="closed-form metrics as JSON")
    sub.add_parser("scan", parents=[common], help="one beam sweep: best beam, SNR, estimate")
    est = sub.add_parser("estimate", parents=[common], help="estimate from a saved scan record")
    est.add_argument("record", help="scan record JSON written by 'scan --record'")
    sub.choices["scan"].add_argument("--record", default=None, help="also save the scan record as JSON")
    rep = sub.add_parser("reproduce", parents=[common], help="figure table at desk scale")
    rep.add_argument("figure", choices=[f for f in harness.FIGURES if f != "custom"])
    sw = sub.add_parser("sweep", parents=[common], help="custom Monte-Carlo sweep")
    sw.add_argument("--param", required=True, help="sweep parameter (scenario field, scan_ratio or m_e)")
    sw.add_argument("--values", required=True, help="comma-separated values")
    sw.add_argument("--mode", choices=harness.MODES, default="phase1")
    sw.add_argument("--m-e", type=int, default=36)
    return p


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _trials(args) -> int:
    return harness.FULL_TRIALS if args.full_scale else args.trials


def _parse_values(text: str) -> list:
    vals = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        num = float(tok)
        vals.append(int(num) if num.is_integer() and "." not in tok else num)
    if not vals:
        raise ValueError("empty sweep value list")
    return vals


def _cmd_validate(s: Scenario, args) -> None:
    report = {
        "valid": True,
        "wavelength_m": s.wavelength,
        "data_symbols": s.data_symbols,
        "undetectable_region_deg": undetectable_region(s),
        "target_in_undetectable_region": in_undetectable_region(s),
    }
    _write(json.dumps(report, indent=2) + "\n", args.out)


def _cmd_analyze(s: Scenario, args) -> None:
    _write(analytics.analyze(s).to_json() + "\n", args.out)


def _scan_summary(s: Scenario, rec: ScanRecord) -> dict:
    cb = dft_codebook(s.m_re, s.codebook_size)
    out = {
        "best_index": rec.best_index,
        "best_direction": float(cb.directions[rec.best_index]),
        "gamma_ell": rec.best_snr,
        "true_nearest_index": rec.true_nearest_index,
        "sensing_valid": rec.sensing_valid,
    }
    try:
        est = mle_phase1(rec.se_echo, cb.columns, s)
        out.update(theta_hat=est.theta_hat, zeta_hat_deg=est.zeta_hat_deg,
                   alpha_hat=[est.alpha_hat.real, est.alpha_hat.imag])
    except EstimationError as exc:
        log.warning("estimation failed: %s", exc)
        out.update(theta_hat=None)
    return out


def _cmd_scan(s: Scenario, args) -> None:
    rng = harness.trial_rng(args.seed, "scan", 0, 0)
    rec = simulate_phase1(s, assemble_channels(s), rng)
    if args.record:
        with open(args.record, "w") as fh:
            fh.write(rec.to_json())
    _write(json.dumps(_scan_summary(s, rec), indent=2) + "\n", args.out)


def _cmd_estimate(s: Scenario, args) -> None:
    with open(args.record) as fh:
        rec = ScanRecord.from_json(fh.read())
    _write(json.dumps(_scan_summary(s, rec), indent=2) + "\n", args.out)


def _run_spec(spec: harness.ExperimentSpec, s: Scenario, args) -> None:
    rows = harness.run_monte_carlo(spec, base=asdict(s))
    text = harness.emit_results(rows, args.format, None)
    _write(text, args.out)


def _cmd_reproduce(s: Scenario, args) -> None:
    spec = harness.figure_spec(args.figure, trials=_trials(args), seed=args.seed)
    log.info("reproducing %s: %d points x %d trials", args.figure, len(spec.sweep_values), spec.trials)
    _run_spec(spec, s, args)


def _cmd_sweep(s: Scenario, args) -> None:
    spec = harness.ExperimentSpec(
        figure_id="custom",
        sweep_param=args.param,
        sweep_values=_parse_values(args.values),
        trials=_trials(args),
        seed=args.seed,
        mode=args.mode,
        m_e=args.m_e,
    )
    _run_spec(spec, s, args)


COMMANDS = {
    "validate": _cmd_validate,
    "analyze": _cmd_analyze,
    "scan": _cmd_scan,
    "estimate": _cmd_estimate,
    "reproduce": _cmd_reproduce,
    "sweep": _cmd_sweep,
}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage to stderr
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        s = load_config(args.config)
        COMMANDS[args.verb](s, args)
    except ScenarioError as exc:
        print("invalid scenario:", file=sys.stderr)
        for v in exc.violations:
            print(f"  - {v}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
