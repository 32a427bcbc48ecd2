"""``tde`` command line: fig1 / fig2 sweeps and single trials."""

from __future__ import annotations

import argparse
import logging
import sys

from . import harness
from .errors import ParameterError
from .signal_model import ChirpSpec, SceneDrawSpec

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXIT_OK, EXIT_CONFIG, EXIT_FAILED_TRIALS = 0, 2, 3

log = logging.getLogger("tdecs")


def parse_list(text: str) -> list:
    """'a:step:b' (inclusive) or comma separated values."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(f"range must be start:step:stop, got {text!r}")
        start, step, stop = map(float, parts)
        return harness.frange(start, step, stop)
    return [float(v) for v in text.split(",") if v]


def parse_estimators(text: str) -> tuple:
    return tuple(name.strip() for name in text.split(",") if name.strip())


def load_config(path) -> dict:
    """Read a TOML file mirroring ExperimentConfig into constructor kwargs."""
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    kwargs = {}
    chirp = ChirpSpec(**raw.pop("chirp", {}))
    kwargs["chirp"] = chirp
    draw = raw.pop("draw", None)
    if draw is not None:
        for key in ("amp_range", "tau_range"):
            if key in draw:
                draw[key] = tuple(draw[key])
        defaults = SceneDrawSpec.for_chirp(chirp, draw.get("K", 3))
        kwargs["draw"] = SceneDrawSpec(**{**defaults.__dict__, **draw})
    known = set(harness.ExperimentConfig.__dataclass_fields__)
    for key, value in raw.items():
        if key not in known:
            raise ParameterError(f"unknown config key {key!r}")
        kwargs[key] = tuple(value) if isinstance(value, list) else value
    return kwargs


def _common(p):
    p.add_argument("--config", help="TOML file with ExperimentConfig fields")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int, dest="master_seed")
    p.add_argument("--estimators", type=parse_estimators,
                   help="comma separated subset of " + ",".join(harness.ESTIMATORS))
    p.add_argument("--timing", action="store_true", default=None,
                   help="fill the mean_runtime_ns column")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tde", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    fig1 = sub.add_parser("fig1", help="tau-MSE versus subsampling ratio (noise-free)")
    _common(fig1)
    fig1.add_argument("--kappas", type=parse_list, dest="kappa_list")
    fig1.add_argument("--out", default="fig1.csv")

    fig2 = sub.add_parser("fig2", help="tau-MSE versus SNR at fixed kappa")
    _common(fig2)
    fig2.add_argument("--snr", type=parse_list, dest="snr_list_db")
    fig2.add_argument("--kappa", type=float)
    fig2.add_argument("--out", default="fig2.csv")

    trial = sub.add_parser("trial", help="run one trial and print it as a CSV row")
    _common(trial)
    trial.add_argument("--kappa", type=float, required=True)
    trial.add_argument("--snr", type=float, dest="snr_db")
    trial.add_argument("--index", type=int, default=0, help="trial index within the sweep point")
    trial.add_argument("--header", action="store_true", help="print the column header first")
    return parser


def _config(args) -> harness.ExperimentConfig:
    base = load_config(args.config) if args.config else {}
    overrides = {key: getattr(args, key, None)
                 for key in ("trials", "master_seed", "estimators", "timing",
                             "kappa_list", "snr_list_db", "kappa")}
    if args.command == "fig2" and "snr_list_db" not in base and overrides["snr_list_db"] is None:
        overrides["snr_list_db"] = harness.frange(-5.0, 2.5, 30.0)
    return harness.with_overrides(harness.ExperimentConfig(**base), **overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        if args.command == "trial":
            record = harness.run_trial(cfg, args.kappa, args.snr_db, args.index)
            if args.header:
                print(harness.trial_header(cfg.estimators))
            print(harness.trial_row(record, cfg.estimators, timing=bool(cfg.timing)))
            failed = any(o.failed for o in record.outcomes.values())
        else:
            run = harness.run_experiment_kappa if args.command == "fig1" \
                else harness.run_experiment_snr
            rows = run(cfg)
            harness.write_csv(rows, args.out)
            failed = any(r.trials_failed for r in rows)
    except (ParameterError, ValueError, TypeError, OSError) as exc:
        print(f"tde: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_FAILED_TRIALS if failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
