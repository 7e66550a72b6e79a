"""Command-line interface: synth, train, eval, gates, route-stats.

Heavy imports happen inside the command handlers so --threads can pin the
BLAS pool before numpy loads. Exit codes: 0 success, 2 usage error
(argparse default), 1 runtime error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path


def _pin_threads(argv: list[str]) -> None:
    if "--threads" not in argv:
        return
    try:
        n = int(argv[argv.index("--threads") + 1])
    except (IndexError, ValueError):
        return  # argparse reports the usage error
    for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="restomoe",
        description="All-in-one image restoration: synthesis, training, evaluation, diagnostics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic degraded/clean dataset")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--kinds", default="noise,rain,haze", help="comma-separated degradation kinds")
    p.add_argument("--masked-noise", action="store_true", help="confine noise to a blob region and save the mask")
    p.add_argument("--sigma", type=float, default=25.0)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model from a key=value config")
    p.add_argument("--config", required=True, help="config file path")
    p.add_argument("--data", required=True, help="dataset manifest path")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None, help="directory for report.txt and figures")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gates", help="export encoder gate maps for an image")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image", required=True, help="P6 PPM input image")
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_gates)

    p = sub.add_parser("route-stats", help="per-expert load report for an image or dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image", default=None, help="P6 PPM input image")
    p.add_argument("--data", default=None, help="dataset manifest (first image is used)")
    p.add_argument("--out", default=None, help="directory for the load figure")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_route_stats)
    return parser


def cmd_synth(args) -> int:
    from .data import synth_dataset

    kinds = tuple(k.strip() for k in args.kinds.split(",") if k.strip())
    manifest = synth_dataset(
        args.out,
        seed=args.seed,
        count=args.count,
        size=args.size,
        kinds=kinds,
        masked_noise=args.masked_noise,
        sigma=args.sigma,
    )
    print(f"wrote {args.count} pairs, manifest at {manifest}")
    return 0


def cmd_train(args) -> int:
    from .config import model_config_from, model_config_text, parse_config_file, train_config_from, train_config_text
    from .data import load_pairs
    from .model import build_model
    from .report import save_loss_curves
    from .train import train

    values = parse_config_file(args.config)
    mcfg = model_config_from(values)
    tcfg = train_config_from(values)
    if args.seed is not None:
        tcfg.seed = args.seed
    pairs = load_pairs(args.data)
    model = build_model(mcfg, seed=tcfg.seed)
    out = Path(args.out)
    result = train(model, pairs, tcfg, out_dir=out)
    (out / "config_echo.txt").write_text(
        model_config_text(mcfg) + train_config_text(tcfg) + f"weight_decay_applied = uniform\n"
    )
    save_loss_curves(result.metrics, out / "loss_curves.png")
    print(result.metrics[-1])
    print(f"checkpoint: {result.checkpoint_path}")
    return 0


def cmd_eval(args) -> int:
    from .checkpoint import load_model
    from .data import load_pairs
    from .report import save_eval_figure, save_expert_load
    from .train import evaluate, routing_report

    model, _ = load_model(args.checkpoint)
    pairs = load_pairs(args.data)
    report = evaluate(model, pairs)
    lines = report.lines()
    summary = routing_report(report.stats)
    text = "\n".join(lines) + "\n" + summary + "\n"
    print(text, end="")
    for skip in report.skipped:
        print(f"warning: skipped {skip}", file=sys.stderr)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(text)
        save_eval_figure(report.records, out / "psnr_ssim.png")
        save_expert_load(report.stats, out / "expert_load.png")
    return 0


def cmd_gates(args) -> int:
    import numpy as np

    from .autodiff import Tensor, no_grad
    from .checkpoint import load_model
    from .data import read_ppm, write_pgm
    from .report import save_gate_grid

    model, _ = load_model(args.checkpoint)
    img = read_ppm(args.image)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with no_grad():
        maps = model.encoder_gate_maps(Tensor(img[None]))
    arrays = []
    for name, gm in maps:
        arr = gm.data[0, 0]
        write_pgm(out / f"gate_{name}.pgm", arr)
        arrays.append((name, arr))
    save_gate_grid(arrays, out / "gates.png")
    print(f"wrote {len(arrays)} gate maps to {out}")
    return 0


def cmd_route_stats(args) -> int:
    from .autodiff import Tensor, no_grad
    from .checkpoint import load_model
    from .data import load_pairs, read_ppm
    from .priors import DegradationLabel, oracle_prior
    from .report import save_expert_load
    from .train import routing_report

    if (args.image is None) == (args.data is None):
        print("route-stats needs exactly one of --image or --data", file=sys.stderr)
        return 2
    model, mcfg = load_model(args.checkpoint)
    if args.image is not None:
        img = read_ppm(args.image)
        label = DegradationLabel()
    else:
        pair = load_pairs(args.data)[0]
        img = pair.degraded
        label = pair.label
    x = Tensor(img[None])
    with no_grad():
        if mcfg.prior.mode == "learned":
            bundle = model.prior_encoder(x)
        else:
            bundle = oracle_prior([label], mcfg.prior)
        _, stats = model(x, bundle)
    print(routing_report(stats))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        save_expert_load(stats, out / "expert_load.png")
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    _pin_threads(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # runtime failures exit 1, usage errors exit 2 via argparse
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
