"""``groundsight`` command line entry point.

Exit codes: 0 success, 2 usage or config errors, 3 I/O errors, 4 domain
errors.  Failures print a single ``groundsight: error: ...`` line.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import __version__
from .config import PipelineConfig
from .core import ImuAttitude, PlaneModel
from .errors import ConfigError, FormatError, GroundsightError

EXIT_USAGE, EXIT_IO, EXIT_DOMAIN = 2, 3, 4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config value (repeatable)")

    att = _Parser(add_help=False)
    att.add_argument("--pitch", type=float, default=0.0, help="radians")
    att.add_argument("--roll", type=float, default=0.0, help="radians")

    p = _Parser(prog="groundsight", description="Ground-plane segmentation and texture-collage toolkit.")
    p.add_argument("--version", action="version", version=f"groundsight {__version__}")
    p.add_argument("--threads", type=int, default=None,
                   help="cap worker threads (default: $GROUNDSIGHT_THREADS)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("segment", parents=[common, att], help="label ground points of a PLY cloud")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out-dir", default=".")

    s = sub.add_parser("mask", parents=[common, att], help="black out non-ground pixels of an RGB frame")
    s.add_argument("--rgb", required=True)
    s.add_argument("--depth", required=True)
    s.add_argument("--plane", required=True, help="plane JSON with 'normal' and 'd'")
    s.add_argument("--out", required=True)

    s = sub.add_parser("traverse", parents=[common, att], help="project a drivable mask onto the floor")
    s.add_argument("--mask", required=True, help="PGM, nonzero = drivable")
    s.add_argument("--plane", required=True)
    s.add_argument("--out", required=True, help="output PGM; a .json sidecar is written beside it")

    s = sub.add_parser("collage", parents=[common], help="generate (query, reference, truth) triples")
    s.add_argument("--bank", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--k", type=int, default=3)
    s.add_argument("--out", required=True)

    s = sub.add_parser("synth", parents=[common], help="write a synthetic labelled scene")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out", required=True, help="output PLY; a .json sidecar is written beside it")

    s = sub.add_parser("bench", parents=[common], help="segment synthetic scenes and report accuracy")
    s.add_argument("--count", type=int, default=None)
    s.add_argument("--first-seed", type=int, default=None)
    s.add_argument("--out", default=None, help="report path (default: stdout)")

    s = sub.add_parser("mosts-demo", parents=[common], help="toy one-shot forward pass")
    s.add_argument("--query", required=True)
    s.add_argument("--reference", required=True)
    s.add_argument("--weights", default=None, help="weight bundle (default: seeded init)")
    s.add_argument("--out", required=True)

    s = sub.add_parser("grad-check", parents=[common], help="finite-difference check of the combo loss")
    s.add_argument("--instances", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--tolerance", type=float, default=1e-4)
    return p


def _config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    return cfg.with_overrides(args.set)


def _attitude(args) -> ImuAttitude:
    return ImuAttitude(args.pitch, args.roll)


def _read_plane(path) -> PlaneModel:
    try:
        data = json.loads(Path(path).read_text())
        n = data["normal"]
        return PlaneModel.from_coefficients(n[0], n[1], n[2], data["d"])
    except (KeyError, IndexError, TypeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: expected a plane JSON with 'normal' and 'd' ({exc})") from None


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _cmd_segment(args, cfg):
    from .io import read_ply, write_ply
    from .mapping import project_occupancy
    from .plane import segment_ground

    cloud = read_ply(args.input)
    result = segment_ground(cloud, _attitude(args), cfg.segmentation_config())
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.input).stem
    write_ply(out / f"{stem}_labeled.ply", cloud.points, result.labels)
    _write_json(out / f"{stem}_plane.json", result.sidecar())
    grid = project_occupancy(result, result.aligned, cfg.grid)
    grid.save(out / f"{stem}_occupancy.pgm", out / f"{stem}_occupancy.json")
    print(json.dumps({"normal": list(result.plane.normal), "d": result.plane.offset,
                      "ground": int(result.ground_mask.sum()), "points": len(cloud)}))


def _cmd_mask(args, cfg):
    from .io import read_pgm, read_ppm, write_ppm
    from .masking import mask_ground

    rgb = read_ppm(args.rgb)
    depth = read_pgm(args.depth)
    out = mask_ground(rgb, depth, _read_plane(args.plane), cfg.intrinsics, _attitude(args), cfg.masking)
    write_ppm(args.out, out)


def _cmd_traverse(args, cfg):
    from .io import read_pgm
    from .mapping import traversability_from_mask

    mask = read_pgm(args.mask) != 0
    grid = traversability_from_mask(mask, _read_plane(args.plane), cfg.intrinsics, _attitude(args), cfg.grid)
    out = Path(args.out)
    grid.save(out, out.with_suffix(".json"))


def _cmd_collage(args, cfg):
    from .collage import TextureBank, write_triples

    bank = TextureBank.from_directory(args.bank)
    if args.count < 0:
        raise _UsageError("--count must be non-negative")
    write_triples(bank, args.out, args.seed, args.count, args.k, cfg.perlin)


def _cmd_synth(args, cfg):
    from dataclasses import replace

    from .io import write_ply
    from .scenes import spec_to_dict, synth_scene

    spec = cfg.scene if args.seed is None else replace(cfg.scene, seed=args.seed)
    scene = synth_scene(spec)
    out = Path(args.out)
    write_ply(out, scene.raw.points, scene.labels)
    _write_json(out.with_suffix(".json"), {
        "pitch": scene.attitude.pitch,
        "roll": scene.attitude.roll,
        "normal": list(scene.plane.normal),
        "d": scene.plane.offset,
        "spec": spec_to_dict(spec),
    })


def _cmd_bench(args, cfg):
    from dataclasses import replace

    from .scenes import run_benchmark

    count = cfg.bench.count if args.count is None else args.count
    first = cfg.bench.first_seed if args.first_seed is None else args.first_seed
    if count < 1:
        raise _UsageError("--count must be >= 1")
    specs = [replace(cfg.scene, seed=first + i) for i in range(count)]
    report = run_benchmark(specs, cfg.segmentation_config())
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_mosts_demo(args, cfg):
    from .io import read_ppm, write_pgm
    from .mosts import ToyMosts, init_weights, load_weights

    weights = load_weights(args.weights) if args.weights else init_weights(cfg.mosts)
    prob = ToyMosts(cfg.mosts, weights).forward(read_ppm(args.query), read_ppm(args.reference))
    write_pgm(args.out, np.clip(np.rint(prob * 255.0), 0, 255).astype(np.uint8))


def _cmd_grad_check(args, cfg):
    from .mosts.gradcheck import run_gradient_checks

    worst = run_gradient_checks(args.instances, args.seed, cfg.combo_loss)
    ok = worst <= args.tolerance
    print(f"combo_loss gradient: {args.instances} instances, max relative error {worst:.3e} "
          f"({'ok' if ok else 'FAILED'}, tolerance {args.tolerance:g})")
    if not ok:
        raise GroundsightError(f"gradient check exceeded tolerance ({worst:.3e})")


COMMANDS = {
    "segment": _cmd_segment,
    "mask": _cmd_mask,
    "traverse": _cmd_traverse,
    "collage": _cmd_collage,
    "synth": _cmd_synth,
    "bench": _cmd_bench,
    "mosts-demo": _cmd_mosts_demo,
    "grad-check": _cmd_grad_check,
}


def _thread_limit(args):
    n = args.threads
    if n is None and os.environ.get("GROUNDSIGHT_THREADS"):
        try:
            n = int(os.environ["GROUNDSIGHT_THREADS"])
        except ValueError:
            raise _UsageError("GROUNDSIGHT_THREADS must be an integer") from None
    if n is None:
        return nullcontext()
    if n < 1:
        raise _UsageError("--threads must be >= 1")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        with _thread_limit(args):
            cfg = _config(args)
            COMMANDS[args.command](args, cfg)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (_UsageError, ConfigError) as exc:
        print(f"groundsight: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, FormatError) as exc:
        print(f"groundsight: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (GroundsightError, ValueError) as exc:
        print(f"groundsight: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    return 0


if __name__ == "__main__":
    sys.exit(main())
