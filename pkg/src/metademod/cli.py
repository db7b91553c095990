"""Command-line interface.

Subcommands:
    experiment  full comparison sweep over P -> CSVs, metadata, figure
    meta-train  train one scheme's initialization -> checkpoint
    adapt       adapt a checkpoint to target-device pilots -> checkpoint
    eval        SER of a checkpoint on a specified device
    grid        decision-grid CSV/figure for a checkpoint
"""

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import experiment as xp
from .channel import DeviceChannel, transmit
from .evaluate import GridSpec, ser_on_samples
from .metalearn import target_adapt
from .numerics import rng_stream

_EVAL_STREAM = 900  # purpose tag, distinct from the experiment module's streams


def _add_common(parser, config_required=True):
    parser.add_argument("--config", required=config_required,
                        help="config JSON path or preset name (toy, realistic)")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--threads", type=int, default=1, help="parallel trial workers")
    parser.add_argument("--verbose", action="store_true", help="emit progress/telemetry lines")


def _load_config(args):
    config = xp.load_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    return config


def _out_dir(args, config, default=None):
    if args.out is not None:
        return Path(args.out)
    if default is not None:
        return Path(default)
    return Path(config.out_dir)


def _parse_device(spec):
    """Device spec as inline JSON or a JSON file path.

    Expected fields: h (number or [re, im]), alpha, beta, noise_power.
    """
    text = spec
    p = Path(spec)
    if p.is_file():
        text = p.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValueError(f"device spec is neither a file nor valid JSON: {e.msg}") from e
    try:
        h = data["h"]
        h = complex(h[0], h[1]) if isinstance(h, list) else complex(h)
        return DeviceChannel(h=h, alpha=float(data["alpha"]), beta=float(data["beta"]),
                             noise_power=float(data["noise_power"]),
                             real_noise=bool(data.get("real_noise", False)))
    except (KeyError, TypeError, ValueError) as e:
        raise ValueError(f"invalid device spec (need h, alpha, beta, noise_power): {e}") from e


def _cmd_experiment(args):
    config = _load_config(args)
    out = _out_dir(args, config)
    rows = xp.run_experiment(config, out_dir=out, threads=args.threads, verbose=args.verbose)
    for scheme, p, mean_ser, n in xp.aggregate_rows(rows):
        print(f"{scheme},{p},{mean_ser!r},{n}")
    print(f"wrote {out / 'results_raw.csv'}")
    return 0


def _cmd_meta_train(args):
    config = _load_config(args)
    out = _out_dir(args, config, default=".")
    out.mkdir(parents=True, exist_ok=True)
    log_fn = (lambda line: print(f"telemetry,{line}")) if args.verbose else None
    params = xp.train_scheme(config, args.scheme, log_fn=log_fn)
    path = out / f"{args.scheme}_checkpoint.json"
    xp.save_checkpoint(path, params)
    print(f"wrote {path}")
    return 0


def _cmd_adapt(args):
    config = _load_config(args)
    out = _out_dir(args, config, default=".")
    out.mkdir(parents=True, exist_ok=True)
    params = xp.load_checkpoint(args.checkpoint)
    if args.pilots is not None:
        pilots = xp.load_pilots(args.pilots)
    else:
        device, pilots = xp.draw_target(config, n_pilots=args.simulate_pilots)
        dev_path = out / "target_device.json"
        dev_path.write_text(json.dumps({"h": [device.h.real, device.h.imag],
                                        "alpha": device.alpha, "beta": device.beta,
                                        "noise_power": device.noise_power,
                                        "real_noise": device.real_noise}, indent=2))
        xp.save_pilots(out / "target_pilots.csv", pilots)
        if args.verbose:
            print(f"simulated target device written to {dev_path}")
    adapted = target_adapt(params, pilots, config.meta,
                           xp.adapt_stream(config, 0, len(pilots)))
    path = out / "adapted_checkpoint.json"
    xp.save_checkpoint(path, adapted)
    print(f"wrote {path}")
    return 0


def _cmd_eval(args):
    config = _load_config(args)
    params = xp.load_checkpoint(args.checkpoint)
    device = _parse_device(args.device)
    constellation = config.scenario.constellation()
    if constellation.size != params.arch.n_classes:
        raise ValueError(f"checkpoint has {params.arch.n_classes} outputs but the "
                         f"configured constellation has {constellation.size} symbols")
    rng = rng_stream(config.seed, 0, _EVAL_STREAM)
    labels = rng.integers(0, constellation.size, size=args.symbols)
    received = transmit(labels, device, constellation, rng)
    est = ser_on_samples(params, labels, received)
    print("ser,std_error")
    print(f"{est.rate!r},{est.std_error!r}")
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "eval.csv").write_text(f"ser,std_error\n{est.rate!r},{est.std_error!r}\n")
    return 0


def _cmd_grid(args):
    grid = GridSpec(re_range=(args.re_min, args.re_max), im_range=(args.im_min, args.im_max),
                    re_points=args.points, im_points=args.points)
    out = Path(args.out) if args.out is not None else Path(".")
    path = xp.dump_grid(args.checkpoint, grid, out, stem=args.stem)
    print(f"wrote {path}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="metademod",
                                     description="Few-pilot neural demodulation benchmark")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("experiment", help="run the full scheme-comparison sweep")
    _add_common(p)
    p.set_defaults(fn=_cmd_experiment)

    p = sub.add_parser("meta-train", help="train an initialization and save a checkpoint")
    _add_common(p)
    p.add_argument("--scheme", choices=("maml", "joint", "fixed"), default="maml")
    p.set_defaults(fn=_cmd_meta_train)

    p = sub.add_parser("adapt", help="adapt a checkpoint to target pilots")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--pilots", help="pilot CSV with header label,re,im")
    group.add_argument("--simulate-pilots", type=int, metavar="P",
                       help="draw a target device and P pilots from the config")
    p.set_defaults(fn=_cmd_adapt)

    p = sub.add_parser("eval", help="estimate SER of a checkpoint on a device")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--device", required=True,
                   help="device spec: inline JSON or JSON file with h, alpha, beta, noise_power")
    p.add_argument("--symbols", type=int, default=10000)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("grid", help="export a decision-probability grid")
    _add_common(p, config_required=False)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--re-min", type=float, default=-5.0)
    p.add_argument("--re-max", type=float, default=5.0)
    p.add_argument("--im-min", type=float, default=-5.0)
    p.add_argument("--im-max", type=float, default=5.0)
    p.add_argument("--points", type=int, default=81, help="grid resolution per axis")
    p.add_argument("--stem", default="grid", help="output file stem")
    p.set_defaults(fn=_cmd_grid)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except Exception as e:  # surface a clean message, nonzero exit
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
