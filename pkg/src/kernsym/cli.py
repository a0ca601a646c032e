"""Command-line interface.

Subcommands:

* analyze      per-layer mean-kernel symmetry profile of a weight file
* arith        padding-consumption lint of a manifest (advisory by default)
* consistency  flip/shift consistency of a model over an image directory
* train-demo   toy training runs showing task-dependent symmetry

Exit codes: 0 success; 1 strict-mode lint found flags; 2 unreadable or
malformed inputs (files, containers, manifests, bindings); 3 shape
errors (non-square kernels, window/extent mismatches); 4 empty image
set; 5 diverged training loss.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import consistency as consistency_mod
from . import emergence
from .convarith import propagate_and_lint, suggest_input_size
from .engine import Model
from .errors import (
    BindingError,
    DivergedLoss,
    EmptyImageSet,
    KernsymError,
    MissingWeight,
    NonFiniteValues,
    NonSquareKernel,
    SafetensorsError,
    SchemaError,
    ShapeMismatch,
    ShapeUnderflow,
    ShiftTooLarge,
    WindowTooLarge,
)
from .manifest import parse_manifest
from .reports import (
    display_name,
    emit_svg_chart,
    file_digest,
    profile_to_csv,
    profile_to_json,
)
from .safetensors_io import read_safetensors_file
from .symmetry import model_symmetry_profile

_PARSE_ERRORS = (SafetensorsError, SchemaError, BindingError, MissingWeight, OSError)
_SHAPE_ERRORS = (
    NonSquareKernel,
    ShapeMismatch,
    ShapeUnderflow,
    WindowTooLarge,
    NonFiniteValues,
    ShiftTooLarge,
)


def _fail(code: int, msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def _load_inputs(weights_path: str, manifest_path: str):
    store = read_safetensors_file(weights_path)
    manifest = parse_manifest(Path(manifest_path).read_text(encoding="utf-8"), store=store)
    return store, manifest


def _parse_hw(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    if len(parts) == 1:
        v = int(parts[0])
        return (v, v)
    if len(parts) == 2:
        return (int(parts[0]), int(parts[1]))
    raise ValueError(f"expected HxW, got {text!r}")


def cmd_analyze(args) -> int:
    try:
        store, manifest = _load_inputs(args.weights, args.manifest)
        profile = model_symmetry_profile(store, manifest, args.filter)
    except _PARSE_ERRORS as exc:
        return _fail(2, str(exc))
    except _SHAPE_ERRORS as exc:
        return _fail(3, str(exc))
    if len(profile) == 0:
        print(f"warning: filter {args.filter!r} matched no conv layers", file=sys.stderr)
    if args.format == "csv":
        text = profile_to_csv(profile)
    elif args.format == "json":
        digests = {args.weights: file_digest(args.weights), args.manifest: file_digest(args.manifest)}
        text = profile_to_json(profile, digests)
    else:
        try:
            text = emit_svg_chart(profile)
        except KernsymError as exc:
            return _fail(3, str(exc))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    return 0


def cmd_arith(args) -> int:
    try:
        manifest = parse_manifest(Path(args.manifest).read_text(encoding="utf-8"))
        input_hw = _parse_hw(args.input) if args.input else manifest.input_hw
        rows = propagate_and_lint(manifest, input_hw)
    except (ValueError,) + _PARSE_ERRORS as exc:
        return _fail(2, str(exc))
    except _SHAPE_ERRORS as exc:
        return _fail(3, str(exc))
    header = f"{'layer':<16} {'kind':<16} {'in':>9} {'out':>9}  used t/b/l/r   flag"
    print(header)
    print("-" * len(header))
    flagged = 0
    for row in rows:
        name = row.name + ("*" if row.strided else "")
        insz = f"{row.input_hw[0]}x{row.input_hw[1]}"
        outsz = f"{row.output_hw[0]}x{row.output_hw[1]}"
        if row.consumption is not None:
            used = "/".join(str(u) for u in row.consumption.used)
            flag = "UNEVEN" if row.flagged else "even"
        else:
            used, flag = "-", "-"
        flagged += int(row.flagged)
        print(f"{name:<16} {row.kind:<16} {insz:>9} {outsz:>9}  {used:<13}  {flag}")
    if flagged:
        print(f"{flagged} layer(s) consume padding unevenly at {input_hw[0]}x{input_hw[1]}")
    if args.suggest:
        best = suggest_input_size(manifest, input_hw, args.search_limit)
        if best is None:
            print(
                f"no flag-free input size within +{args.search_limit} of "
                f"{input_hw[0]}x{input_hw[1]}"
            )
        else:
            print(f"suggested input size: {best[0]}x{best[1]}")
    if args.strict and flagged:
        return 1
    return 0


def _load_images(directory: str) -> list[np.ndarray]:
    paths = sorted(Path(directory).glob("*.safetensors"))
    images = []
    for p in paths:
        store = read_safetensors_file(p)
        for name in store.names():
            images.append(store.to_array(name))
    return images


def cmd_consistency(args) -> int:
    try:
        store, manifest = _load_inputs(args.weights, args.manifest)
        model = Model.from_manifest(manifest, store)
        images = _load_images(args.images)
        if not images:
            raise EmptyImageSet(f"no *.safetensors image tensors under {args.images!r}")
        if args.mode == "flip":
            report = consistency_mod.flip_consistency(model, images)
        else:
            dy, dx = (int(v) for v in args.shift.split(","))
            report = consistency_mod.shift_consistency(model, images, (dy, dx))
    except EmptyImageSet as exc:
        return _fail(4, str(exc))
    except (ValueError,) + _PARSE_ERRORS as exc:
        return _fail(2, str(exc))
    except _SHAPE_ERRORS as exc:
        return _fail(3, str(exc))
    if args.format == "json":
        import json

        print(json.dumps({
            "mode": report.kind,
            "shift": list(report.shift) if report.shift else None,
            "per_image": list(report.fractions),
            "mean": report.mean,
            "image_count": report.image_count,
        }, indent=2))
    else:
        for i, frac in enumerate(report.fractions):
            print(f"image {i:4d}  {frac:.6f}")
        print(f"mean {report.kind} consistency over {report.image_count} images: {report.mean:.6f}")
    return 0


def cmd_train_demo(args) -> int:
    seed = args.seed
    if args.task == "blur":
        model = emergence.build_blur_model(seed)
        data = emergence.gen_blur_task(args.samples, seed)
        loss = "mse"
        lr = args.lr if args.lr is not None else 0.1
    else:
        model = emergence.build_edge_model(seed)
        data = emergence.gen_edge_task(args.samples, seed)
        loss = "cross_entropy"
        lr = args.lr if args.lr is not None else 0.05
    config = emergence.TrainConfig(
        lr=lr,
        steps=args.steps,
        batch_size=args.batch,
        seed=seed,
        flip_augment=args.flip_aug,
        loss=loss,
        trace_interval=args.interval,
    )
    try:
        model, trace = emergence.train(model, data, config)
    except DivergedLoss as exc:
        return _fail(5, str(exc))
    first_step, first = trace.samples[0]
    last_step, last = trace.samples[-1]
    for a, b in zip(first, last):
        print(
            f"{a.layer_name}: symmetry {a.value:.6f} (step {first_step}) "
            f"-> {b.value:.6f} (step {last_step})"
        )
    if args.trace:
        with open(args.trace, "w", newline="", encoding="utf-8") as fh:
            emergence.write_trace_csv(trace, fh)
        print(f"trace written to {args.trace}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kernsym",
        description="Mean-kernel dihedral symmetry analysis for convolutional networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="per-layer symmetry profile of a weight file")
    p.add_argument("--weights", required=True, help="safetensors weight container")
    p.add_argument("--manifest", required=True, help="model manifest JSON")
    p.add_argument("--filter", default="*", help="glob over layer names (default *)")
    p.add_argument("--format", choices=("csv", "json", "svg"), default="csv")
    p.add_argument("--out", help="output path (default stdout)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("arith", help="padding-consumption lint of a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--input", help="input size HxW (default: manifest input)")
    p.add_argument("--suggest", action="store_true", help="search for a flag-free input size")
    p.add_argument("--search-limit", type=int, default=16)
    p.add_argument("--strict", action="store_true", help="exit 1 when any layer is flagged")
    p.set_defaults(func=cmd_arith)

    p = sub.add_parser("consistency", help="flip/shift consistency over an image directory")
    p.add_argument("--weights", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--images", required=True, help="directory of *.safetensors image tensors")
    p.add_argument("--mode", choices=("flip", "shift"), required=True)
    p.add_argument("--shift", default="0,1", help="DY,DX for --mode shift")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_consistency)

    p = sub.add_parser("train-demo", help="toy training runs with symmetry traces")
    p.add_argument("--task", choices=("blur", "edge"), required=True)
    p.add_argument("--flip-aug", action="store_true")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--trace", help="write the symmetry trace CSV here")
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--samples", type=int, default=64)
    p.add_argument("--interval", type=int, default=50)
    p.set_defaults(func=cmd_train_demo)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


def entry() -> None:
    raise SystemExit(main())
