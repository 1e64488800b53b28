"""Command-line surface: asset inspection/conversion, offline rendering,
LiDAR export, marker generation, metrics, and the streaming service.

Poses on the command line are always seven numbers: tx ty tz qw qx qy qz.
Exit codes: 0 success, 1 usage error, 2 data error.

Environment overrides: SPLATSIM_HOST / SPLATSIM_PORT set defaults for
`splatsim serve`.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from . import lidar as lidar_mod
from .assets import crop_aabb, rescale_asset, transform_asset
from .camera import Intrinsics, intrinsics_from_hfov
from .geometry import RigidTransform
from .markers import MarkerSpec, image_to_splat
from .metrics import l1, psnr
from .ply import PlyParseError, load_ply, save_ply
from .rasterizer import RenderSettings, render
from .scenefile import SceneFileError, load_image, load_scene
from .service import SensorService

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


class DataError(Exception):
    pass


def _pose_from_args(values) -> RigidTransform:
    t = values[:3]
    q = values[3:]
    return RigidTransform.from_quat(q, t)


def _add_pose_arg(parser):
    parser.add_argument("--pose", type=float, nargs=7,
                        metavar=("TX", "TY", "TZ", "QW", "QX", "QY", "QZ"),
                        default=[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
                        help="rigid pose as tx ty tz qw qx qy qz")


def _intrinsics_from_args(args) -> Intrinsics:
    if args.fx is not None:
        return Intrinsics(fx=args.fx, fy=args.fy if args.fy is not None else args.fx,
                          cx=args.cx if args.cx is not None else args.width / 2 - 0.5,
                          cy=args.cy if args.cy is not None else args.height / 2 - 0.5,
                          width=args.width, height=args.height)
    return intrinsics_from_hfov(math.radians(args.hfov), args.width, args.height)


def _write_rgb_png(rgb: np.ndarray, path) -> None:
    img = np.clip(rgb * 255.0 + 0.5, 0, 255).astype(np.uint8)
    Image.fromarray(img, mode="RGB").save(path)


def _write_depth(depth: np.ndarray, path) -> None:
    path = Path(path)
    if path.suffix == ".npy":
        np.save(path, depth.astype(np.float32))
    else:
        mm = np.clip(depth * 1000.0 + 0.5, 0, 65535).astype(np.uint16)
        Image.fromarray(mm).save(path)


# -- subcommands -------------------------------------------------------------


def cmd_info(args) -> int:
    try:
        asset = load_ply(Path(args.asset).read_bytes(), name=Path(args.asset).stem)
    except (OSError, PlyParseError) as exc:
        raise DataError(f"cannot load {args.asset}: {exc}") from exc
    scales = asset.scales
    lo = asset.centers.min(axis=0)
    hi = asset.centers.max(axis=0)
    print(f"asset: {asset.name}")
    print(f"primitive count: {len(asset)}")
    print(f"sh degree: {asset.sh_degree}")
    print(f"bounding box min: {lo[0]:.4f} {lo[1]:.4f} {lo[2]:.4f}")
    print(f"bounding box max: {hi[0]:.4f} {hi[1]:.4f} {hi[2]:.4f}")
    print(f"opacity: mean {asset.opacities.mean():.4f} "
          f"min {asset.opacities.min():.4f} max {asset.opacities.max():.4f}")
    print(f"scale: mean {scales.mean():.6g} min {scales.min():.6g} max {scales.max():.6g}")
    return EXIT_OK


def cmd_render(args) -> int:
    try:
        scene = load_scene(args.scene)
    except (OSError, SceneFileError, PlyParseError, ValueError) as exc:
        raise DataError(f"cannot load scene {args.scene}: {exc}") from exc
    intr = _intrinsics_from_args(args)
    pose = _pose_from_args(args.pose).inverse()  # CLI pose is world-from-optical
    frame = render(scene, pose, intr, RenderSettings(tile_size=args.tile_size))
    _write_rgb_png(frame.rgb, args.output)
    print(f"wrote {args.output}")
    if args.depth_output:
        _write_depth(frame.depth, args.depth_output)
        print(f"wrote {args.depth_output}")
    return EXIT_OK


def cmd_lidar(args) -> int:
    try:
        scene = load_scene(args.scene)
    except (OSError, SceneFileError, PlyParseError, ValueError) as exc:
        raise DataError(f"cannot load scene {args.scene}: {exc}") from exc
    try:
        config = lidar_mod.ScanConfig(
            azimuth_count=args.azimuth_count, channels=args.channels,
            v_fov_min=math.radians(args.vfov_min), v_fov_max=math.radians(args.vfov_max),
            z_near=args.z_near, z_far=args.z_far, face_resolution=args.face_resolution)
    except ValueError as exc:
        raise DataError(f"invalid scan config: {exc}") from exc
    pose = _pose_from_args(args.pose)
    scan = lidar_mod.simulate_scan(scene, pose, config)
    out = Path(args.output)
    if out.suffix == ".csv":
        out.write_text(lidar_mod.scan_to_csv(scan))
    else:
        out.write_bytes(lidar_mod.scan_to_pcd(scan, binary=not args.ascii))
    populated = len(np.unique(scan.azimuth_index))
    print(f"wrote {out} with {len(scan)} points")
    print(f"azimuth bins populated: {populated}/{config.azimuth_count}")
    for key, count in scan.drop_counts.items():
        print(f"beams dropped ({key}): {count}")
    return EXIT_OK


class _OpAction(argparse.Action):
    """Record operations in the order their flags appear."""

    def __call__(self, parser, namespace, values, option_string=None):
        if not hasattr(namespace, "ops"):
            namespace.ops = []
        namespace.ops.append((self.dest, values))


def cmd_transform(args) -> int:
    ops = getattr(args, "ops", [])
    try:
        asset = load_ply(Path(args.asset).read_bytes(), name=Path(args.asset).stem)
    except (OSError, PlyParseError) as exc:
        raise DataError(f"cannot load {args.asset}: {exc}") from exc
    try:
        for op, values in ops:
            if op == "scale":
                asset = rescale_asset(asset, values)
            elif op == "rotate":
                asset = transform_asset(asset, RigidTransform.from_quat(values))
            elif op == "translate":
                asset = transform_asset(
                    asset, RigidTransform(np.eye(3), np.asarray(values)))
            elif op in ("crop", "crop_outside"):
                asset = crop_aabb(asset, values[:3], values[3:],
                                  keep_inside=(op == "crop"))
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    Path(args.output).write_bytes(save_ply(asset))
    print(f"wrote {args.output} ({len(asset)} primitives)")
    return EXIT_OK


def cmd_marker(args) -> int:
    try:
        image = load_image(args.image)
    except OSError as exc:
        raise DataError(f"cannot load image {args.image}: {exc}") from exc
    spec = MarkerSpec(image=image, physical_size=args.size,
                      sigma_ratio=args.sigma_ratio, name=Path(args.image).stem)
    asset = image_to_splat(spec)
    Path(args.output).write_bytes(save_ply(asset))
    print(f"wrote {args.output} ({len(asset)} primitives)")
    return EXIT_OK


def cmd_metrics(args) -> int:
    if len(args.images) % 2 != 0:
        raise DataError("need an even number of images (reference test pairs)")
    records = []
    for i in range(0, len(args.images), 2):
        ref_path, test_path = args.images[i], args.images[i + 1]
        try:
            ref = load_image(ref_path)
            tst = load_image(test_path)
            record = {"reference": str(ref_path), "test": str(test_path),
                      "l1": l1(ref, tst), "psnr": psnr(ref, tst)}
        except (OSError, ValueError) as exc:
            raise DataError(str(exc)) from exc
        records.append(record)
    if args.json:
        for r in records:
            r = dict(r)
            if math.isinf(r["psnr"]):
                r["psnr"] = "inf"
            print(json.dumps(r))
    else:
        print(f"{'reference':<30} {'test':<30} {'L1':>10} {'PSNR (dB)':>10}")
        for r in records:
            p = "inf" if math.isinf(r["psnr"]) else f"{r['psnr']:.2f}"
            print(f"{Path(r['reference']).name:<30} {Path(r['test']).name:<30} "
                  f"{r['l1']:>10.4f} {p:>10}")
    return EXIT_OK


def cmd_serve(args) -> int:
    config = {}
    if args.config:
        try:
            config = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read config {args.config}: {exc}") from exc
    host = args.host or config.get("host") or os.environ.get("SPLATSIM_HOST", "127.0.0.1")
    port = args.port if args.port is not None else \
        int(config.get("port", os.environ.get("SPLATSIM_PORT", 0)))
    try:
        scene = load_scene(args.scene)
        scan_config = lidar_mod.ScanConfig(**config.get("scan_config", {}))
    except (OSError, SceneFileError, PlyParseError, ValueError) as exc:
        raise DataError(str(exc)) from exc
    service = SensorService(scene=scene, host=host, port=port,
                            max_cameras=args.max_cameras or config.get("max_cameras", 8),
                            default_scan_config=scan_config)
    try:
        addr = service.start()
    except OSError as exc:
        raise DataError(f"cannot bind {host}:{port}: {exc}") from exc
    print(f"listening on {addr[0]}:{addr[1]}", flush=True)
    try:
        service.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        service.stop()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="splatsim",
                     description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("info", help="inspect a splat PLY asset")
    p.add_argument("asset")
    p.set_defaults(fn=cmd_info)

    p = sub.add_parser("render", help="render a scene to PNG")
    p.add_argument("scene")
    _add_pose_arg(p)
    p.add_argument("--width", type=int, default=640)
    p.add_argument("--height", type=int, default=480)
    p.add_argument("--hfov", type=float, default=90.0, help="horizontal FOV, degrees")
    p.add_argument("--fx", type=float)
    p.add_argument("--fy", type=float)
    p.add_argument("--cx", type=float)
    p.add_argument("--cy", type=float)
    p.add_argument("--tile-size", type=int, default=16)
    p.add_argument("-o", "--output", required=True, help="RGB PNG path")
    p.add_argument("--depth-output", help="depth output (.png = 16-bit mm, .npy = float32)")
    p.set_defaults(fn=cmd_render)

    p = sub.add_parser("lidar", help="simulate a 360-degree scan and export it")
    p.add_argument("scene")
    _add_pose_arg(p)
    p.add_argument("--azimuth-count", type=int, default=1024)
    p.add_argument("--channels", type=int, default=16)
    p.add_argument("--vfov-min", type=float, default=-15.0, help="degrees")
    p.add_argument("--vfov-max", type=float, default=15.0, help="degrees")
    p.add_argument("--z-near", type=float, default=0.1)
    p.add_argument("--z-far", type=float, default=100.0)
    p.add_argument("--face-resolution", type=int, default=512)
    p.add_argument("--ascii", action="store_true", help="write ASCII PCD instead of binary")
    p.add_argument("-o", "--output", required=True, help=".pcd or .csv path")
    p.set_defaults(fn=cmd_lidar)

    p = sub.add_parser("transform", help="rescale/rotate/translate/crop an asset "
                                         "(operations apply in flag order)")
    p.add_argument("asset")
    p.add_argument("--scale", dest="scale", type=float, action=_OpAction)
    p.add_argument("--rotate", dest="rotate", type=float, nargs=4,
                   metavar=("QW", "QX", "QY", "QZ"), action=_OpAction)
    p.add_argument("--translate", dest="translate", type=float, nargs=3,
                   metavar=("TX", "TY", "TZ"), action=_OpAction)
    p.add_argument("--crop", dest="crop", type=float, nargs=6,
                   metavar=("XMIN", "YMIN", "ZMIN", "XMAX", "YMAX", "ZMAX"),
                   action=_OpAction)
    p.add_argument("--crop-outside", dest="crop_outside", type=float, nargs=6,
                   metavar=("XMIN", "YMIN", "ZMIN", "XMAX", "YMAX", "ZMAX"),
                   action=_OpAction)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(fn=cmd_transform)

    p = sub.add_parser("marker", help="convert a marker image to a splat PLY")
    p.add_argument("image")
    p.add_argument("--size", type=float, required=True, help="physical width, meters")
    p.add_argument("--sigma-ratio", type=float, default=0.5)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(fn=cmd_marker)

    p = sub.add_parser("metrics", help="L1/PSNR for reference/test image pairs")
    p.add_argument("images", nargs="+", help="ref1 test1 [ref2 test2 ...]")
    p.add_argument("--json", action="store_true", help="machine-readable records")
    p.set_defaults(fn=cmd_metrics)

    p = sub.add_parser("serve", help="run the sensor streaming service")
    p.add_argument("scene")
    p.add_argument("--host", help="bind address (env: SPLATSIM_HOST)")
    p.add_argument("--port", type=int, help="bind port, 0 = ephemeral (env: SPLATSIM_PORT)")
    p.add_argument("--max-cameras", type=int)
    p.add_argument("--config", help="JSON config file (flags take precedence)")
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except DataError as exc:
        print(f"splatsim: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
