"""Command-line front end.

Subcommands: ``compress``, ``baseline``, ``metric``, ``make-fixtures``.
Exit status is 0 on success, 2 on bad arguments and 1 on runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import codec as codecs
from .codec import Budget, CodecError
from .driver import (RateSchedule, RunConfig, baseline, default_alpha, default_schedule,
                     report_dict, run, write_report)
from .fixtures import write_fixtures
from .flow import DEFAULT_LAMBDA, FlowParams
from .image import ImageIOError, load_image, psnr, save_image
from .metrics import dassd
from .warp import write_flo
from .weights import ALPHA_DEFAULTS, DEFAULT_SIGMA, WeightMap, build_weight_map, edge_map

log = logging.getLogger("dacomp")


def _add_codec_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="input PNG/PGM/PPM image")
    p.add_argument("--codec", required=True, choices=["global", "subband", "external"])
    p.add_argument("--codec-cmd", help="external encode template with {in}, {out}, {q}")
    p.add_argument("--decode-cmd", help="external decode template with {in}, {out}")
    p.add_argument("--q-min", type=int, default=1)
    p.add_argument("--q-max", type=int, default=100)
    p.add_argument("--q-lower-is-better", action="store_true",
                   help="lower parameter values mean higher quality (e.g. BPG)")
    p.add_argument("--in-ext", default="png", help="extension of the file handed to the encoder")
    p.add_argument("--out-ext", default="bin", help="extension of the encoded file")
    p.add_argument("--decoded-ext", default="png", choices=["png", "pgm", "ppm", "pnm"],
                   help="extension of the file the decode template writes")
    p.add_argument("--codec-family", default="jpeg2000", choices=sorted(ALPHA_DEFAULTS),
                   help="external codec family, selects the default --alpha")
    p.add_argument("--full-scan", action="store_true", help="probe every quality parameter")
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--levels", type=int, default=4, help="wavelet levels of built-in codecs")
    target = p.add_mutually_exclusive_group(required=True)
    target.add_argument("--ratio", type=float, help="compression ratio N (N:1)")
    target.add_argument("--quality", type=float, help="external codec quality parameter")
    target.add_argument("--bpp", type=float, help="bits per pixel")
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    p.add_argument("--alpha", type=float, default=None, help="default depends on the codec")
    p.add_argument("--sigma", type=float, default=DEFAULT_SIGMA)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--report", help="report path (default OUT_DIR/report.json)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dacomp", description="Deformation-aware image compression")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compress", help="deformation-aware compression")
    _add_codec_args(p)
    p.add_argument("--schedule", choices=["direct", "gradual"], default="gradual")
    p.add_argument("--direct-iterations", type=int, default=20,
                   help="iterations at the target budget for --schedule direct")
    p.add_argument("--max-iterations", type=int, default=500)
    p.add_argument("--constant-w-metric", action="store_true",
                   help="report DASSD with w = 1 instead of the optimization weights")
    p.add_argument("--dump-flow", action="store_true", help="also write flow.flo")
    p.add_argument("--dump-weights", action="store_true", help="also write edges.png and weights.png")
    p.add_argument("--no-timestamp", action="store_true", help="omit the 'created' report field")

    p = sub.add_parser("baseline", help="plain compression at the target budget")
    _add_codec_args(p)

    p = sub.add_parser("metric", help="SSD, PSNR and DASSD between two images")
    p.add_argument("--a", required=True, help="image the other is warped onto (e.g. compressed)")
    p.add_argument("--b", required=True, help="reference image that gets warped (e.g. original)")
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    p.add_argument("--constant-w", action="store_true", help="use w = 1")
    p.add_argument("--alpha", type=float, default=ALPHA_DEFAULTS["global"])
    p.add_argument("--sigma", type=float, default=DEFAULT_SIGMA)

    p = sub.add_parser("make-fixtures", help="write the synthetic test images")
    p.add_argument("--out-dir", required=True)
    return parser


def _codec_from_args(parser, args) -> codecs.CodecHandle:
    if args.codec != "external":
        if args.ratio is None:
            parser.error(f"--codec {args.codec} needs --ratio")
        return codecs.builtin(args.codec, args.levels)
    if not args.codec_cmd:
        parser.error("--codec external requires --codec-cmd")
    try:
        spec = codecs.ExternalSpec(
            args.codec_cmd, args.decode_cmd, q_min=args.q_min, q_max=args.q_max,
            higher_is_better=not args.q_lower_is_better, in_ext=args.in_ext, out_ext=args.out_ext,
            decoded_ext=args.decoded_ext, timeout=args.timeout, full_scan=args.full_scan,
            family=args.codec_family,
        )
    except ValueError as exc:
        parser.error(str(exc))
    return codecs.CodecHandle("external", spec)


def _target(args) -> tuple[str, float]:
    if args.ratio is not None:
        return "ratio", args.ratio
    if args.quality is not None:
        return "quality", args.quality
    return "bpp", args.bpp


def _cmd_compress(parser, args) -> int:
    codec = _codec_from_args(parser, args)
    mode, value = _target(args)
    y = load_image(args.input)
    if args.schedule == "direct":
        schedule = RateSchedule.direct(mode, value, args.direct_iterations)
    else:
        schedule = default_schedule(codec, mode, value)
    cfg = RunConfig(codec, schedule, lam=args.lam, alpha=args.alpha, sigma=args.sigma,
                    max_iterations=args.max_iterations, constant_w_metric=args.constant_w_metric)
    os.makedirs(args.out_dir, exist_ok=True)
    result = run(y, cfg)
    save_image(result.deformed, os.path.join(args.out_dir, "deformed.png"))
    save_image(result.compressed, os.path.join(args.out_dir, "compressed.png"))
    if args.dump_flow:
        write_flo(result.flow, os.path.join(args.out_dir, "flow.flo"))
    if args.dump_weights:
        _dump_weights(y, result.weights, args.out_dir)
    report_path = args.report or os.path.join(args.out_dir, "report.json")
    write_report(report_path, report_dict(cfg, result, timestamp=not args.no_timestamp))
    m = result.report
    print(f"rate {m.achieved_rate:.6g}  ssd {m.ssd:.6g}  psnr {m.psnr:.3f} dB  dassd {m.dassd:.6g}  "
          f"ssd(compressed, deformed) {result.ssd_to_deformed:.6g}")
    return 0


def _dump_weights(y, weights: WeightMap, out_dir: str) -> None:
    save_image(edge_map(y), os.path.join(out_dir, "edges.png"))
    w = weights.weights
    span = w.max() - w.min()
    save_image((w - w.min()) / span if span > 0 else w * 0, os.path.join(out_dir, "weights.png"))


def _cmd_baseline(parser, args) -> int:
    codec = _codec_from_args(parser, args)
    mode, value = _target(args)
    y = load_image(args.input)
    alpha = args.alpha if args.alpha is not None else default_alpha(codec)
    w = build_weight_map(y, alpha, args.sigma)
    compressed, report = baseline(y, codec, Budget(mode, value), w, FlowParams(lam=args.lam))
    os.makedirs(args.out_dir, exist_ok=True)
    save_image(compressed, os.path.join(args.out_dir, "baseline.png"))
    data = {"schema_version": 1, "metrics": report.to_dict(), "target": {"mode": mode, "value": value}}
    write_report(args.report or os.path.join(args.out_dir, "baseline.json"), data)
    print(f"rate {report.achieved_rate:.6g}  ssd {report.ssd:.6g}  psnr {report.psnr:.3f} dB  dassd {report.dassd:.6g}")
    return 0


def _cmd_metric(parser, args) -> int:
    a = load_image(args.a)
    b = load_image(args.b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    w = None if args.constant_w else build_weight_map(b, args.alpha, args.sigma)
    d = dassd(a, b, w, FlowParams(lam=args.lam))
    p = psnr(d.ssd, a.size)
    out = {"ssd": d.ssd, "psnr": None if p == float("inf") else p,
           "dassd": d.dassd, "flow_penalty": d.flow_penalty}
    print(json.dumps(out))
    return 0


def _cmd_make_fixtures(parser, args) -> int:
    files = write_fixtures(args.out_dir)
    for path in (files.square, files.square_shifted, files.strokes):
        print(path)
    return 0


COMMANDS = {
    "compress": _cmd_compress,
    "baseline": _cmd_baseline,
    "metric": _cmd_metric,
    "make-fixtures": _cmd_make_fixtures,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](parser, args)
    except (CodecError, ImageIOError, ValueError, OSError) as exc:
        print(f"dacomp: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
