"""360-degree LiDAR synthesis from four 90-degree-FOV depth renders.

The sensor frame is x-forward, y-left, z-up. Four depth maps are rendered
at yaw offsets {0, 90, 180, 270} degrees, each covering a 90-degree
azimuth sector. Beams live on an equiangular (azimuth, elevation) grid;
each beam is snapped to the nearest depth pixel of its face (no
interpolation), clipped to [z_near, z_far] in z-depth, back-projected
through the pinhole model, and rotated into the sensor frame.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .camera import Intrinsics, intrinsics_from_hfov
from .geometry import RigidTransform
from .rasterizer import RenderSettings, render
from .scene import SceneDescription

FACE_YAWS = (0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi)


@dataclass(frozen=True)
class ScanConfig:
    azimuth_count: int = 1024
    channels: int = 16
    v_fov_min: float = math.radians(-15.0)
    v_fov_max: float = math.radians(15.0)
    z_near: float = 0.1
    z_far: float = 100.0
    face_resolution: int = 512

    def __post_init__(self):
        if self.azimuth_count <= 0 or self.azimuth_count % 4 != 0:
            raise ValueError("azimuth_count must be positive and divisible by 4")
        if self.channels <= 0:
            raise ValueError("channels must be positive")
        limit = math.pi / 4.0
        if not (-limit < self.v_fov_min < self.v_fov_max < limit):
            raise ValueError("vertical FOV must satisfy -45deg < min < max < 45deg "
                             "so every beam lands inside the four faces")
        if not 0.0 < self.z_near < self.z_far:
            raise ValueError("need 0 < z_near < z_far")
        if self.face_resolution < 8:
            raise ValueError("face_resolution must be at least 8 pixels")

    @property
    def elevations(self) -> np.ndarray:
        if self.channels == 1:
            return np.array([(self.v_fov_min + self.v_fov_max) / 2.0])
        return np.linspace(self.v_fov_min, self.v_fov_max, self.channels)

    @property
    def azimuths(self) -> np.ndarray:
        return np.arange(self.azimuth_count) * (2.0 * math.pi / self.azimuth_count)


@dataclass(frozen=True)
class LidarScan:
    """Points in the sensor frame with per-point beam metadata."""

    points: np.ndarray          # (M, 3) meters
    azimuth_index: np.ndarray   # (M,) int
    channel_index: np.ndarray   # (M,) int
    ranges: np.ndarray          # (M,) Euclidean range, meters
    face_depths: np.ndarray = field(default_factory=lambda: np.zeros(0))  # sampled z-depth per point
    drop_counts: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.points.shape[0]


def sensor_from_optical(yaw: float) -> np.ndarray:
    """Rotation mapping a face's optical frame into the sensor frame.

    The optical +z axis points along the face's yaw direction in the
    sensor xy-plane; +x right, +y down.
    """
    c, s = math.cos(yaw), math.sin(yaw)
    # columns: optical x, y, z expressed in the sensor frame
    return np.array([[s, 0.0, c],
                     [-c, 0.0, s],
                     [0.0, -1.0, 0.0]])


def face_of_azimuth(azimuth: np.ndarray) -> np.ndarray:
    """Face index for azimuth(s): sector [-45, 45) degrees around each face axis."""
    a = np.mod(np.asarray(azimuth, dtype=np.float64), 2.0 * math.pi)
    return (np.floor((a + math.pi / 4.0) / (math.pi / 2.0)).astype(np.int64)) % 4


def beam_directions(azimuths: np.ndarray, elevations: np.ndarray) -> np.ndarray:
    """Sensor-frame unit directions for an (azimuth, elevation) grid, (A, C, 3)."""
    a = np.asarray(azimuths)[:, None]
    e = np.asarray(elevations)[None, :]
    return np.stack([np.cos(e) * np.cos(a), np.cos(e) * np.sin(a),
                     np.broadcast_to(np.sin(e), np.broadcast_shapes(a.shape, e.shape))],
                    axis=-1)


@dataclass(frozen=True)
class DownsampleResult:
    beam_indices: np.ndarray  # (M,) indices into the input beam list
    pixels: np.ndarray        # (M, 2) integer (u, v)
    depths: np.ndarray        # (M,) sampled D[v, u]
    skipped: int              # beams outside the face frustum


def downsample_depth(depth: np.ndarray, intr: Intrinsics,
                     beam_dirs: np.ndarray) -> DownsampleResult:
    """Nearest-pixel depth lookup per beam direction (optical frame)."""
    dirs = np.asarray(beam_dirs, dtype=np.float64).reshape(-1, 3)
    z = dirs[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        uf = intr.fx * dirs[:, 0] / z + intr.cx
        vf = intr.fy * dirs[:, 1] / z + intr.cy
    # the continuous image spans [-0.5, W-0.5]; sector-boundary beams land
    # exactly on the edge (up to rounding) and must snap inward rather
    # than fall out of frame
    eps = 1e-6
    ok = ((z > 0.0) & (uf >= -0.5 - eps) & (uf <= intr.width - 0.5 + eps)
          & (vf >= -0.5 - eps) & (vf <= intr.height - 0.5 + eps))
    idx = np.nonzero(ok)[0]
    u = np.clip(np.rint(uf[idx]), 0, intr.width - 1).astype(np.int64)
    v = np.clip(np.rint(vf[idx]), 0, intr.height - 1).astype(np.int64)
    pixels = np.column_stack([u, v])
    depths = np.asarray(depth, dtype=np.float64)[pixels[:, 1], pixels[:, 0]]
    return DownsampleResult(beam_indices=idx, pixels=pixels, depths=depths,
                            skipped=int(dirs.shape[0] - idx.size))


@dataclass(frozen=True)
class FaceScan:
    """One face's clipped returns, still in the face optical frame."""

    yaw: float
    points_optical: np.ndarray  # (M, 3)
    azimuth_index: np.ndarray
    channel_index: np.ndarray
    depths: np.ndarray          # sampled z-depths (equal points_optical[:, 2])


def merge_faces(faces: list[FaceScan]) -> LidarScan:
    """Rotate per-face returns into the sensor frame and concatenate."""
    claimed: set = set()
    for f in faces:
        az = set(int(a) for a in np.unique(f.azimuth_index))
        if claimed & az:
            raise ValueError("overlapping azimuth sector assignment across faces")
        claimed |= az

    pts, azi, chi, dep = [], [], [], []
    for f in faces:
        r = sensor_from_optical(f.yaw)
        pts.append(f.points_optical @ r.T)
        azi.append(np.asarray(f.azimuth_index, dtype=np.int64))
        chi.append(np.asarray(f.channel_index, dtype=np.int64))
        dep.append(np.asarray(f.depths, dtype=np.float64))
    points = np.concatenate(pts) if pts else np.zeros((0, 3))
    return LidarScan(points=points,
                     azimuth_index=np.concatenate(azi) if azi else np.zeros(0, np.int64),
                     channel_index=np.concatenate(chi) if chi else np.zeros(0, np.int64),
                     ranges=np.linalg.norm(points, axis=1),
                     face_depths=np.concatenate(dep) if dep else np.zeros(0))


def simulate_scan(scene: SceneDescription, sensor_pose: RigidTransform,
                  config: ScanConfig | None = None,
                  settings: RenderSettings | None = None) -> LidarScan:
    """Full 360-degree scan of a scene from a world-frame sensor pose."""
    config = config or ScanConfig()
    settings = settings or RenderSettings()
    intr = intrinsics_from_hfov(math.pi / 2.0, config.face_resolution,
                                config.face_resolution)
    azimuths = config.azimuths
    elevations = config.elevations
    faces_for_az = face_of_azimuth(azimuths)

    faces: list[FaceScan] = []
    drops = {"out_of_frustum": 0, "invalid_depth": 0, "clipped": 0}
    for face, yaw in enumerate(FACE_YAWS):
        az_sel = np.nonzero(faces_for_az == face)[0]
        r_so = sensor_from_optical(yaw)
        cam_from_world = RigidTransform(r_so.T, np.zeros(3)).compose(sensor_pose.inverse())
        depth = render(scene, cam_from_world, intr, settings).depth

        dirs_sensor = beam_directions(azimuths[az_sel], elevations)  # (A_f, C, 3)
        a_grid, c_grid = np.meshgrid(az_sel, np.arange(config.channels), indexing="ij")
        dirs_opt = dirs_sensor.reshape(-1, 3) @ r_so  # rows @ R = R.T @ dir

        down = downsample_depth(depth, intr, dirs_opt)
        drops["out_of_frustum"] += down.skipped
        d = down.depths
        valid = d > 0.0
        drops["invalid_depth"] += int(np.sum(~valid))
        in_range = valid & (d >= config.z_near) & (d <= config.z_far)
        drops["clipped"] += int(np.sum(valid & ~in_range))

        keep = np.nonzero(in_range)[0]
        pix = down.pixels[keep]
        dk = d[keep]
        pts = np.column_stack([(pix[:, 0] - intr.cx) / intr.fx * dk,
                               (pix[:, 1] - intr.cy) / intr.fy * dk,
                               dk])
        beam = down.beam_indices[keep]
        faces.append(FaceScan(yaw=yaw, points_optical=pts,
                              azimuth_index=a_grid.ravel()[beam],
                              channel_index=c_grid.ravel()[beam],
                              depths=dk))

    scan = merge_faces(faces)
    return LidarScan(points=scan.points, azimuth_index=scan.azimuth_index,
                     channel_index=scan.channel_index, ranges=scan.ranges,
                     face_depths=scan.face_depths, drop_counts=drops)


def scan_to_pcd(scan: LidarScan, binary: bool = True) -> bytes:
    """Serialize a scan as a PCD v0.7 point cloud (fields x y z, float32)."""
    n = len(scan)
    header = (
        "# .PCD v0.7 - Point Cloud Data file format\n"
        "VERSION 0.7\n"
        "FIELDS x y z\n"
        "SIZE 4 4 4\n"
        "TYPE F F F\n"
        "COUNT 1 1 1\n"
        f"WIDTH {n}\n"
        "HEIGHT 1\n"
        "VIEWPOINT 0 0 0 1 0 0 0\n"
        f"POINTS {n}\n"
        f"DATA {'binary' if binary else 'ascii'}\n"
    ).encode("ascii")
    if binary:
        return header + scan.points.astype("<f4").tobytes()
    rows = "\n".join(f"{p[0]:.9g} {p[1]:.9g} {p[2]:.9g}"
                     for p in scan.points.astype(np.float32))
    return header + (rows + "\n" if n else "").encode("ascii")


def scan_to_csv(scan: LidarScan) -> str:
    """CSV rows: azimuth_index, channel, x, y, z, range."""
    lines = ["azimuth_index,channel,x,y,z,range"]
    for i in range(len(scan)):
        p = scan.points[i]
        lines.append(f"{int(scan.azimuth_index[i])},{int(scan.channel_index[i])},"
                     f"{p[0]:.9g},{p[1]:.9g},{p[2]:.9g},{scan.ranges[i]:.9g}")
    return "\n".join(lines) + "\n"
