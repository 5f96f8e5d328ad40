"""Command-line entry point: ``emospread <subcommand> --config run.yaml``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import load_config
from .errors import EmospreadError
from .pipeline import STAGES, run_pipeline, run_stage

log = logging.getLogger("emospread")

STAGE_HELP = {
    "ingest": "parse GKG files, filter articles and bucket them into trading days",
    "emotions": "build daily emotion and LM indicators from the selected articles",
    "frame": "align market covariates with lagged news indicators",
    "rolling": "rolling-window quantile regressions with rank-inversion intervals",
    "forecast": "one-step-ahead check losses of the augmented and benchmark models",
    "fluctuation": "fluctuation test on the out-of-sample loss differentials",
    "report": "descriptive statistics, event table and run manifest",
}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, type=Path, help="YAML run configuration")
    p.add_argument("--output-dir", help="output directory (overrides output.dir and EMOSPREAD_OUTPUT_DIR)")
    p.add_argument("--country", help="country code of the spread")
    p.add_argument("--q", type=float, action="append", help="quantile level; repeat for several")
    p.add_argument("--h", type=int, action="append", help="news lag in trading days; repeat for several")
    p.add_argument("--emotion", action="append", dest="emotion_names", help="emotion to model; repeat for several")
    p.add_argument("--window-T0", type=int, dest="window_T0", help="rolling window length in rows")
    p.add_argument("--mu", type=float, help="fluctuation window as a share of the out-of-sample length")
    p.add_argument("--alpha", type=float, help="fluctuation test size (0.01, 0.05 or 0.10)")
    p.add_argument("--no-ci", action="store_true", help="skip confidence intervals in rolling fits")
    p.add_argument("--no-sweep", action="store_true", help="skip the full-sample quantile sweep")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="emospread", description="News emotions and sovereign spread quantiles.")
    sub = ap.add_subparsers(dest="command", required=True)
    for stage in STAGES:
        _add_common(sub.add_parser(stage, help=STAGE_HELP[stage], description=STAGE_HELP[stage]))
    _add_common(sub.add_parser("run", help="run every stage in order", description="run every stage in order"))
    sim = sub.add_parser(
        "simulate",
        help="write a synthetic dataset with a known emotion effect",
        description="write market data, a GKG corpus, a lexicon and a config for a location-scale model",
    )
    sim.add_argument("--outdir", required=True, type=Path, help="directory for the synthetic dataset")
    sim.add_argument("--seed", type=int, default=20150302, help="random seed")
    sim.add_argument("--n-days", type=int, default=400, help="number of trading days")
    sim.add_argument("--gamma", type=float, default=0.5, help="scale loading of the emotion indicator")
    sim.add_argument("--h", type=int, default=1, help="news lag in trading days")
    sim.add_argument("--error", choices=("normal", "t"), default="normal", help="error distribution")
    sim.add_argument("--country", default="IT", help="country code")
    sim.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return ap


def _configure(args):
    cfg = load_config(args.config)
    return cfg.with_overrides(
        output_override=str(Path(args.output_dir).resolve()) if args.output_dir else None,
        country=args.country,
        q=args.q,
        h=args.h,
        emotion_names=args.emotion_names,
        window_T0=args.window_T0,
        mu=args.mu,
        alpha=args.alpha,
        rolling_ci=False if args.no_ci else None,
        sweep=False if args.no_sweep else None,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        if args.command == "simulate":
            from .simulate import DGPSpec, write_synthetic_dataset

            spec = DGPSpec(n_days=args.n_days, gamma=args.gamma, h=args.h, error=args.error, country=args.country)
            path = write_synthetic_dataset(spec, args.seed, args.outdir)
            print(path)
            return 0
        cfg = _configure(args)
        if args.command == "run":
            bundle = run_pipeline(cfg)
        else:
            bundle = run_stage(cfg, args.command)
        print(bundle.outdir)
        return 0
    except EmospreadError as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
