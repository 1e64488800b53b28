"""splatsim: sensor simulation on planar Gaussian splat scenes.

Load splat assets from PLY, compose scenes, render RGB/depth by software
rasterization, synthesize 360-degree LiDAR scans from depth maps, embed
fiducial markers, score renders against captures, and stream frames to
robot clients over a small TCP protocol.
"""
from .assets import Primitive2D, SplatAsset, crop_aabb, rescale_asset, transform_asset
from .camera import (CameraPose, Intrinsics, back_project, depth_to_points,
                     intrinsics_from_hfov, project)
from .geometry import RigidTransform
from .lidar import (LidarScan, ScanConfig, downsample_depth, merge_faces,
                    scan_to_csv, scan_to_pcd, simulate_scan)
from .markers import MarkerSpec, image_to_splat, place_marker
from .metrics import l1, psnr
from .ply import PlyParseError, load_ply, save_ply
from .rasterizer import (RenderedFrame, RenderSettings, intersect_splat,
                         reference_render, render)
from .scene import AssetInstance, MarkerGroundTruth, SceneDescription, flatten_scene
from .scenefile import (SCHEMA_VERSION, InstanceRecord, MarkerRecord, SceneFile,
                        SceneFileError, build_scene, load_scene, load_scene_file,
                        save_scene_file)
from .service import SensorClient, SensorService
from .sh import eval_sh

__version__ = "0.1.0"

__all__ = [
    "SCHEMA_VERSION",
    "AssetInstance", "CameraPose", "InstanceRecord", "Intrinsics", "LidarScan",
    "MarkerGroundTruth", "MarkerRecord", "MarkerSpec", "PlyParseError",
    "Primitive2D", "RenderSettings", "RenderedFrame", "RigidTransform",
    "ScanConfig", "SceneDescription", "SceneFile", "SceneFileError",
    "SensorClient", "SensorService", "SplatAsset",
    "back_project", "build_scene", "crop_aabb", "depth_to_points",
    "downsample_depth", "eval_sh", "flatten_scene", "image_to_splat",
    "intersect_splat", "intrinsics_from_hfov", "l1", "load_ply", "load_scene",
    "load_scene_file", "merge_faces", "place_marker", "project", "psnr",
    "reference_render", "render", "rescale_asset", "save_ply",
    "save_scene_file", "scan_to_csv", "scan_to_pcd", "simulate_scan",
    "transform_asset",
]
