"""Command-line entry point: `cransim uplink|downlink|sweep [options]`."""

import argparse
import sys

from .errors import ConfigurationError, DomainError
from .harness import (ExperimentConfig, PRESETS, alpha_sweep, default_out_dir,
                      run_experiment, write_report, write_sweep)


def _add_common(sub):
    sub.add_argument("--config", help="YAML config file mirroring the "
                     "experiment settings")
    sub.add_argument("--preset", choices=sorted(PRESETS),
                     help="named base configuration")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--drops", type=int)
    sub.add_argument("--slots", type=int)
    sub.add_argument("--mode", choices=["point_to_point", "multiterminal",
                                        "both"])
    sub.add_argument("--jobs", type=int)
    sub.add_argument("--out", default=None, help="output directory "
                     "(default: $CRANSIM_OUT or ./results)")
    sub.add_argument("--k-ms", type=int, dest="k_ms")
    sub.add_argument("--n-pico", type=int, dest="n_pico")
    sub.add_argument("--c-macro", type=float, dest="c_macro")
    sub.add_argument("--c-pico", type=float, dest="c_pico")
    sub.add_argument("--alpha", help="fairness exponent, or comma-separated "
                     "list for sweeps")
    sub.add_argument("--beta", type=float)


def _parse_alpha(text):
    parts = [p for p in text.split(",") if p.strip()]
    values = [float(p) for p in parts]
    return values if len(values) > 1 else values[0]


def build_config(args, direction=None):
    data = {}
    if args.preset:
        data.update(PRESETS[args.preset])
    if args.config:
        import yaml
        with open(args.config) as fh:
            file_data = yaml.safe_load(fh) or {}
        if not isinstance(file_data, dict):
            raise ConfigurationError("config file must contain a mapping")
        data.update(file_data)
    for key in ("seed", "drops", "slots", "mode", "jobs", "k_ms", "n_pico",
                "c_macro", "c_pico", "beta"):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    if getattr(args, "alpha", None) is not None:
        data["alpha"] = _parse_alpha(args.alpha)
    if direction is not None:
        data["direction"] = direction
    return ExperimentConfig.from_dict(data)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="cransim",
        description="Backhaul-compression gain simulator for clustered "
                    "cellular processing")
    subs = parser.add_subparsers(dest="command", required=True)
    for name, descr in (("uplink", "uplink sum-rate / CDF experiment"),
                        ("downlink", "downlink sum-rate / CDF experiment"),
                        ("sweep", "fairness sweep: cell edge vs efficiency")):
        sub = subs.add_parser(name, help=descr)
        _add_common(sub)
        if name == "sweep":
            sub.add_argument("--direction", choices=["uplink", "downlink"],
                             help="required unless given by preset/config")
    args = parser.parse_args(argv)

    try:
        if args.command == "sweep":
            config = build_config(args, direction=getattr(args, "direction",
                                                          None))
            out_dir = args.out or default_out_dir()
            if not isinstance(config.alpha, (list, tuple)):
                config.alpha = [config.alpha]
            sweep = alpha_sweep(config)
            write_sweep(sweep, out_dir)
            print(f"sweep written to {out_dir}")
            for note in sweep.notes:
                print(f"note: {note}")
        else:
            config = build_config(args, direction=args.command)
            out_dir = args.out or default_out_dir()
            report = run_experiment(config)
            write_report(report, out_dir)
            print(f"report written to {out_dir}")
    except (ConfigurationError, DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
