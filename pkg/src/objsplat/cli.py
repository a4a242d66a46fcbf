"""Command-line interface.

Subcommands: synth, vote, train, render, query, edit, eval.  All randomness
is controlled by --seed; rerunning any command with identical inputs and
seed produces byte-identical outputs.

Dataset directory layout (produced by `synth`, consumed by the others):

    cameras.json       camera intrinsics/extrinsics
    rgb_0000.png ...   ground-truth RGB views
    id_0000.pgm ...    ground-truth ID maps (+ .json name sidecars)
    points.ply         labeled point cloud
    tracks.bin         track correspondences
    scene.json         object count and ID-to-name table
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import editing, synth
from .evaluate import evaluate_maps, evaluate_model, render_maps, report_rows
from .io import (
    FormatError,
    atomic_write,
    load_checkpoint,
    read_cameras,
    read_config,
    read_idmap,
    read_image,
    read_labeled_ply,
    read_tracks,
    save_checkpoint,
    write_cameras,
    write_idmap,
    write_image,
    write_labeled_ply,
    write_tracks,
)
from .io.checkpoint import Checkpoint
from .train import LOG_FIELDS, TrainConfig, TrainDataset, train
from .voting import assign_ids

RGB_PATTERN = "rgb_{:04d}.png"
ID_PATTERN = "id_{:04d}.pgm"


class CliError(RuntimeError):
    pass


def _write_scene_meta(path, n_objects: int, names: dict[int, str]) -> None:
    doc = {
        "format": "objsplat-scene",
        "n_objects": n_objects,
        "names": {str(k): v for k, v in sorted(names.items())},
    }
    with atomic_write(path, "w") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")


def _read_scene_meta(path) -> tuple[int, dict[int, str]]:
    try:
        with open(path, "r") as f:
            doc = json.load(f)
    except OSError as e:
        raise CliError(f"cannot read scene metadata: {e}") from e
    return int(doc["n_objects"]), {int(k): v for k, v in doc.get("names", {}).items()}


def _load_views(directory: Path) -> tuple[list, list, list]:
    """Cameras, RGB images, and ID maps from a dataset directory."""
    cameras = read_cameras(directory / "cameras.json")
    images, id_maps = [], []
    for i in range(len(cameras)):
        images.append(read_image(directory / RGB_PATTERN.format(i)))
        id_map, _ = read_idmap(directory / ID_PATTERN.format(i))
        id_maps.append(id_map)
    return cameras, images, id_maps


def cmd_synth(args) -> int:
    with open(args.spec, "r") as f:
        spec = synth.spec_from_dict(json.load(f))
    dataset = synth.synth_generate(spec, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_cameras(out / "cameras.json", dataset.cameras)
    for i, (img, ids) in enumerate(zip(dataset.images, dataset.id_maps)):
        write_image(out / RGB_PATTERN.format(i), img)
        write_idmap(out / ID_PATTERN.format(i), ids, names=dataset.names)
    write_labeled_ply(out / "points.ply", dataset.cloud)
    write_tracks(out / "tracks.bin", dataset.tracks)
    _write_scene_meta(out / "scene.json", dataset.n_objects, dataset.names)
    print(f"wrote {len(dataset.cameras)} views to {out}")
    return 0


def cmd_vote(args) -> int:
    data = Path(args.data)
    cloud = read_labeled_ply(args.cloud if args.cloud else data / "points.ply")
    cameras, id_maps = _load_views_for_vote(data)
    n_objects, _ = _read_scene_meta(data / "scene.json")
    tracks = None
    if args.strategy == "correspondence":
        tracks = read_tracks(data / "tracks.bin")
    voted = assign_ids(
        cloud,
        strategy=args.strategy,
        id_maps=id_maps,
        cameras=cameras,
        tracks=tracks,
        seed=args.seed,
        n_objects=n_objects,
    )
    write_labeled_ply(args.out, voted)
    print(f"voted IDs for {len(voted)} points -> {args.out}")
    return 0


def _load_views_for_vote(directory: Path):
    cameras = read_cameras(directory / "cameras.json")
    id_maps = []
    for i in range(len(cameras)):
        id_map, _ = read_idmap(directory / ID_PATTERN.format(i))
        id_maps.append(id_map)
    return cameras, id_maps


def _load_dataset(directory: Path, cloud_path=None) -> tuple[TrainDataset, dict[int, str]]:
    cameras, images, id_maps = _load_views(directory)
    cloud = read_labeled_ply(cloud_path if cloud_path else directory / "points.ply")
    n_objects, names = _read_scene_meta(directory / "scene.json")
    return (
        TrainDataset(
            cameras=cameras, images=images, id_maps=id_maps,
            cloud=cloud, n_objects=n_objects,
        ),
        names,
    )


def cmd_train(args) -> int:
    config = read_config(args.config) if args.config else TrainConfig()
    if args.iterations is not None:
        config.iterations = args.iterations
    if args.seed is not None:
        config.seed = args.seed
    if args.semantic_mode is not None:
        config.semantic_mode = args.semantic_mode
    if args.voxel_size is not None:
        config.voxel_size = args.voxel_size
    if args.lambda_semantic is not None:
        config.weights.semantic = args.lambda_semantic
    dataset, names = _load_dataset(Path(args.data), args.cloud)
    state, log = train(config, dataset)
    save_checkpoint(args.out, Checkpoint.from_state(state, config, names))
    if args.log:
        with atomic_write(args.log, "w") as f:
            writer = csv.writer(f)
            writer.writerow(LOG_FIELDS)
            for row in log:
                writer.writerow(
                    [row["iteration"]]
                    + [format(row[k], ".17g") for k in LOG_FIELDS[1:]]
                )
    print(
        f"trained {config.iterations} iterations, {len(state.grid)} anchors "
        f"-> {args.out}"
    )
    return 0


def _render_to_dir(ckpt: Checkpoint, cameras, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    images, id_maps = render_maps(
        ckpt.grid, ckpt.heads, cameras, ckpt.n_objects,
        semantic_mode=ckpt.config.semantic_mode,
        semantic_vectors=ckpt.semantic_vectors,
    )
    for i, (img, ids) in enumerate(zip(images, id_maps)):
        write_image(out / RGB_PATTERN.format(i), img)
        write_idmap(out / ID_PATTERN.format(i), ids, names=ckpt.names)


def cmd_render(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    cameras = read_cameras(args.cameras)
    _render_to_dir(ckpt, cameras, Path(args.out))
    print(f"rendered {len(cameras)} views -> {args.out}")
    return 0


def cmd_query(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    sub = editing.query_object(ckpt, args.object)
    save_checkpoint(args.out, sub)
    if args.cameras and args.render_out:
        _render_to_dir(sub, read_cameras(args.cameras), Path(args.render_out))
    print(f"object {args.object!r}: {len(sub.grid)} anchors -> {args.out}")
    return 0


def cmd_edit(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    if args.action == "remove":
        edited = editing.edit_remove(ckpt, args.object)
    else:
        if args.color is None:
            raise CliError("recolor requires --color R,G,B")
        rgb = [float(x) for x in args.color.split(",")]
        if len(rgb) != 3:
            raise CliError("--color expects three comma-separated values")
        edited = editing.edit_recolor(ckpt, args.object, rgb)
    save_checkpoint(args.out, edited)
    print(f"{args.action} object {args.object!r}: {len(edited.grid)} anchors -> {args.out}")
    return 0


def _write_report(path, rows) -> None:
    with atomic_write(path, "w") as f:
        writer = csv.writer(f)
        writer.writerow(("metric", "key", "value"))
        writer.writerows(rows)


def cmd_eval(args) -> int:
    if args.checkpoint:
        ckpt = load_checkpoint(args.checkpoint)
        gt = Path(args.gt)
        cameras, gt_images, gt_maps = _load_views(gt)
        report = evaluate_model(
            ckpt.grid, ckpt.heads, cameras, gt_images, gt_maps, ckpt.n_objects,
            semantic_mode=ckpt.config.semantic_mode,
            semantic_vectors=ckpt.semantic_vectors,
        )
    else:
        pred, gt = Path(args.pred), Path(args.gt)
        gt_rgbs = sorted(gt.glob("rgb_*.png"))
        if not gt_rgbs:
            raise CliError(f"no rgb_*.png views found in {gt}")
        pred_images, pred_maps, gt_images, gt_maps = [], [], [], []
        for rgb_path in gt_rgbs:
            name = rgb_path.name
            id_name = name.replace("rgb_", "id_").replace(".png", ".pgm")
            pred_images.append(read_image(pred / name))
            gt_images.append(read_image(rgb_path))
            pred_maps.append(read_idmap(pred / id_name)[0])
            gt_maps.append(read_idmap(gt / id_name)[0])
        report = evaluate_maps(pred_images, pred_maps, gt_images, gt_maps)
    _write_report(args.out, report_rows(report))
    print(
        f"PSNR {report.mean_psnr:.2f}  SSIM {report.mean_ssim:.4f}  "
        f"mIoU {report.seg.miou:.4f}  Acc {report.seg.accuracy:.4f} -> {args.out}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="objsplat",
        description="Object-aware Gaussian splatting: synthesize, vote, "
        "train, render, query, edit, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--spec", required=True, help="scene spec JSON")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("vote", help="lift 2D ID maps onto the point cloud")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--cloud", default=None, help="input PLY (default: data/points.ply)")
    p.add_argument(
        "--strategy", required=True,
        choices=("majority", "probability", "correspondence"),
    )
    p.add_argument("--out", required=True, help="output labeled PLY")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_vote)

    p = sub.add_parser("train", help="optimize a model on a dataset")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--cloud", default=None, help="labeled PLY (default: data/points.ply)")
    p.add_argument("--out", required=True, help="output checkpoint")
    p.add_argument("--config", default=None, help="key-value config file")
    p.add_argument("--log", default=None, help="loss-log CSV path")
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--semantic-mode", choices=("onehot", "learnable"), default=None)
    p.add_argument("--voxel-size", type=float, default=None)
    p.add_argument("--lambda-semantic", type=float, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("render", help="render views from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--cameras", required=True, help="camera JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("query", help="extract one object as a sub-model")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--object", required=True, help="object ID or exact name")
    p.add_argument("--out", required=True, help="output sub-checkpoint")
    p.add_argument("--cameras", default=None, help="camera JSON for renders")
    p.add_argument("--render-out", default=None, help="render output directory")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("edit", help="remove or recolor an object")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--action", required=True, choices=("remove", "recolor"))
    p.add_argument("--object", required=True, help="object ID or exact name")
    p.add_argument("--color", default=None, help="R,G,B in [0,1] for recolor")
    p.add_argument("--out", required=True, help="output checkpoint")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_edit)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--pred", default=None, help="predicted-views directory")
    p.add_argument("--checkpoint", default=None, help="render and score a checkpoint")
    p.add_argument("--gt", required=True, help="ground-truth dataset directory")
    p.add_argument("--out", required=True, help="report CSV path")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "eval" and not (args.pred or args.checkpoint):
        parser.error("eval requires --pred or --checkpoint")
    try:
        return args.func(args)
    except (FormatError, CliError, editing.UnknownObjectError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
