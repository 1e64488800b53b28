"""JSON scene files: a declarative, diffable description of a world.

A scene file references splat assets (PLY) and marker images (PNG/PGM)
by path relative to the file, each with a rigid pose and uniform scale.
Marker records double as ground truth for localization experiments.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import RigidTransform, normalize_quat
from .markers import MarkerSpec, image_to_splat, place_marker
from .ply import load_ply
from .scene import AssetInstance, SceneDescription

SCHEMA_VERSION = 1


class SceneFileError(ValueError):
    """Malformed or unresolvable scene file."""


@dataclass(frozen=True)
class InstanceRecord:
    asset_path: str
    pose: RigidTransform = field(default_factory=RigidTransform.identity)
    scale: float = 1.0


@dataclass(frozen=True)
class MarkerRecord:
    image_path: str
    physical_size: float
    pose: RigidTransform = field(default_factory=RigidTransform.identity)
    marker_id: str = ""


@dataclass(frozen=True)
class SceneFile:
    version: int = SCHEMA_VERSION
    background_color: tuple = (0.0, 0.0, 0.0)
    instances: tuple = ()
    markers: tuple = ()


def _pose_to_json(pose: RigidTransform) -> dict:
    return {"translation": [float(x) for x in pose.translation],
            "quaternion_wxyz": [float(x) for x in pose.quat_wxyz]}


def _pose_from_json(obj) -> RigidTransform:
    try:
        q = normalize_quat(np.asarray(obj["quaternion_wxyz"], dtype=np.float64))
        return RigidTransform.from_quat(q, obj["translation"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SceneFileError(f"bad pose record: {exc}") from exc


def scene_file_to_json(sf: SceneFile) -> str:
    doc = {
        "version": sf.version,
        "background_color": [float(c) for c in sf.background_color],
        "instances": [
            {"asset": r.asset_path, "pose": _pose_to_json(r.pose), "scale": float(r.scale)}
            for r in sf.instances
        ],
        "markers": [
            {"image": r.image_path, "physical_size": float(r.physical_size),
             "pose": _pose_to_json(r.pose), "id": r.marker_id}
            for r in sf.markers
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def scene_file_from_json(text: str) -> SceneFile:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneFileError(f"invalid JSON: {exc}") from exc
    version = doc.get("version")
    if version != SCHEMA_VERSION:
        raise SceneFileError(f"unrecognized schema version {version!r}")
    instances = tuple(
        InstanceRecord(asset_path=r["asset"], pose=_pose_from_json(r["pose"]),
                       scale=float(r.get("scale", 1.0)))
        for r in doc.get("instances", ())
    )
    markers = tuple(
        MarkerRecord(image_path=r["image"], physical_size=float(r["physical_size"]),
                     pose=_pose_from_json(r["pose"]), marker_id=str(r.get("id", "")))
        for r in doc.get("markers", ())
    )
    return SceneFile(version=version,
                     background_color=tuple(float(c) for c in doc.get("background_color", (0, 0, 0))),
                     instances=instances, markers=markers)


def save_scene_file(sf: SceneFile, path) -> None:
    Path(path).write_text(scene_file_to_json(sf))


def load_scene_file(path) -> SceneFile:
    path = Path(path)
    sf = scene_file_from_json(path.read_text())
    for rec in sf.instances:
        if not (path.parent / rec.asset_path).exists():
            raise SceneFileError(f"referenced asset does not exist: {rec.asset_path}")
    for rec in sf.markers:
        if not (path.parent / rec.image_path).exists():
            raise SceneFileError(f"referenced marker image does not exist: {rec.image_path}")
    return sf


def load_image(path) -> np.ndarray:
    """Load a PNG/PGM image as float RGB in [0, 1]."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
    return arr


def build_scene(sf: SceneFile, base_dir) -> SceneDescription:
    """Materialize a scene: load assets, generate marker splats, instance all."""
    base = Path(base_dir)
    scene = SceneDescription(background_color=sf.background_color)
    for rec in sf.instances:
        asset = load_ply((base / rec.asset_path).read_bytes(),
                         name=Path(rec.asset_path).stem)
        scene = scene.with_instance(AssetInstance(asset, rec.pose, rec.scale))
    for rec in sf.markers:
        spec = MarkerSpec(image=load_image(base / rec.image_path),
                          physical_size=rec.physical_size,
                          name=rec.marker_id or Path(rec.image_path).stem)
        scene = place_marker(scene, image_to_splat(spec), rec.pose,
                             rec.physical_size, marker_id=spec.name)
    return scene


def load_scene(path) -> SceneDescription:
    path = Path(path)
    return build_scene(load_scene_file(path), path.parent)
