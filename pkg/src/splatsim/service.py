"""Socket service streaming rendered camera frames and LiDAR scans.

Wire protocol (TCP, little-endian):
  frame   = u32 payload_length | u8 message_type | payload
  control payloads (register, ack, pose, camera info, error) are UTF-8
  JSON objects; bulk payloads (frames, scans) are a 32-byte binary header

      camera_id u32 | timestamp u64 | width u32 | height u32 |
      encoding u32 | reserved u64

  followed by raw row-major data.

The protocol deliberately contains no splat-specific fields: the server
is constructed around opaque `render_frame` / `simulate_scan` callables,
so any renderer (including a mock) can sit behind it.

Clients register a camera (intrinsics or a named preset, frame rate,
encoding), then stream world-from-optical pose updates; the server
renders at the registered rate using the latest pose (last-writer-wins
by timestamp; stale timestamps are dropped with a warning ack).
"""
from __future__ import annotations

import json
import logging
import math
import queue
import socket
import struct
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .camera import Intrinsics, intrinsics_from_hfov
from .geometry import RigidTransform
from .lidar import ScanConfig, simulate_scan
from .rasterizer import RenderSettings, render
from .scene import SceneDescription

log = logging.getLogger(__name__)

MSG_REGISTER = 1
MSG_REGISTER_OK = 2
MSG_CAMERA_INFO = 3
MSG_POSE = 4
MSG_ACK = 5
MSG_ERROR = 6
MSG_FRAME = 7
MSG_LIDAR_REQUEST = 8
MSG_LIDAR = 9

ENCODING_CODES = {"rgb8": 0, "depth32f": 1, "lidar_xyz32f": 2}

_HEADER = struct.Struct("<IQIIIQ")  # camera_id, timestamp, width, height, encoding, reserved

INTRINSICS_PRESETS = {
    "vga90": intrinsics_from_hfov(math.pi / 2.0, 640, 480),
    "qvga90": intrinsics_from_hfov(math.pi / 2.0, 320, 240),
    "thumb90": intrinsics_from_hfov(math.pi / 2.0, 64, 48),
}

MAX_FRAME_RATE = 120.0


def pack_message(msg_type: int, payload: bytes) -> bytes:
    return struct.pack("<IB", len(payload), msg_type) + payload


def pack_bulk_header(camera_id: int, timestamp: int, width: int, height: int,
                     encoding: int) -> bytes:
    return _HEADER.pack(camera_id, timestamp, width, height, encoding, 0)


def unpack_bulk_header(payload: bytes):
    cam, ts, w, h, enc, _ = _HEADER.unpack(payload[:_HEADER.size])
    return cam, ts, w, h, enc, payload[_HEADER.size:]


def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return buf


def read_message(sock: socket.socket):
    head = _recv_exact(sock, 5)
    if head is None:
        return None
    length, msg_type = struct.unpack("<IB", head)
    payload = _recv_exact(sock, length) if length else b""
    if payload is None:
        return None
    return msg_type, payload


def _pose_from_json(obj) -> RigidTransform:
    return RigidTransform.from_quat(obj["quaternion_wxyz"], obj["translation"])


def pose_to_json(pose: RigidTransform) -> dict:
    return {"translation": [float(x) for x in pose.translation],
            "quaternion_wxyz": [float(x) for x in pose.quat_wxyz]}


def default_render_fn(scene: SceneDescription, settings: RenderSettings | None = None):
    """Frame renderer used when the service is built from a splat scene."""
    settings = settings or RenderSettings()

    def render_frame(world_from_optical: RigidTransform, intr: Intrinsics,
                     encoding: str) -> bytes:
        frame = render(scene, world_from_optical.inverse(), intr, settings)
        if encoding == "rgb8":
            return np.clip(frame.rgb * 255.0 + 0.5, 0, 255).astype(np.uint8).tobytes()
        return frame.depth.astype("<f4").tobytes()

    return render_frame


def default_lidar_fn(scene: SceneDescription, settings: RenderSettings | None = None):
    def scan(world_from_sensor: RigidTransform, config: ScanConfig) -> np.ndarray:
        return simulate_scan(scene, world_from_sensor, config, settings).points

    return scan


@dataclass
class _CameraSession:
    camera_id: int
    intrinsics: Intrinsics | None
    frame_rate: float
    encoding: str
    scan_config: ScanConfig | None = None
    pose: RigidTransform | None = None
    pose_timestamp: int = -1
    lock: threading.Lock = field(default_factory=threading.Lock)
    stop: threading.Event = field(default_factory=threading.Event)


class SensorService:
    """Serves frames/scans to any number of clients over TCP."""

    def __init__(self, render_frame=None, lidar_scan=None, scene=None,
                 settings: RenderSettings | None = None,
                 host: str = "127.0.0.1", port: int = 0, max_cameras: int = 8,
                 default_scan_config: ScanConfig | None = None):
        if render_frame is None:
            if scene is None:
                raise ValueError("need either render_frame or a scene")
            render_frame = default_render_fn(scene, settings)
        if lidar_scan is None and scene is not None:
            lidar_scan = default_lidar_fn(scene, settings)
        self._render_frame = render_frame
        self._lidar_scan = lidar_scan
        self._default_scan_config = default_scan_config or ScanConfig()
        self._host = host
        self._port = port
        self._max_cameras = max_cameras
        self._next_id = 0
        self._cameras: dict[int, _CameraSession] = {}
        self._state_lock = threading.Lock()
        self._sock: socket.socket | None = None
        self._threads: list[threading.Thread] = []
        self._running = threading.Event()

    @property
    def address(self) -> tuple[str, int]:
        if self._sock is None:
            raise RuntimeError("service not started")
        return self._sock.getsockname()

    def start(self) -> tuple[str, int]:
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((self._host, self._port))
        self._sock.listen()
        self._running.set()
        t = threading.Thread(target=self._accept_loop, daemon=True)
        t.start()
        self._threads.append(t)
        log.info("sensor service listening on %s:%d", *self.address)
        return self.address

    def stop(self) -> None:
        self._running.clear()
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
        with self._state_lock:
            for session in self._cameras.values():
                session.stop.set()

    def serve_forever(self) -> None:
        self.start()
        try:
            while self._running.is_set():
                time.sleep(0.2)
        except KeyboardInterrupt:
            pass
        finally:
            self.stop()

    # -- connection handling ------------------------------------------------

    def _accept_loop(self) -> None:
        assert self._sock is not None
        while self._running.is_set():
            try:
                conn, addr = self._sock.accept()
            except OSError:
                break
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            t = threading.Thread(target=self._client_loop, args=(conn, addr), daemon=True)
            t.start()
            self._threads.append(t)

    def _client_loop(self, conn: socket.socket, addr) -> None:
        log.info("client connected: %s", addr)
        send_lock = threading.Lock()
        owned: list[int] = []

        def send(msg_type: int, payload: bytes) -> None:
            with send_lock:
                conn.sendall(pack_message(msg_type, payload))

        def send_json(msg_type: int, obj: dict) -> None:
            send(msg_type, json.dumps(obj).encode("utf-8"))

        try:
            while self._running.is_set():
                msg = read_message(conn)
                if msg is None:
                    break
                msg_type, payload = msg
                if msg_type == MSG_REGISTER:
                    if not self._handle_register(payload, owned, conn, send, send_json):
                        break
                elif msg_type == MSG_POSE:
                    self._handle_pose(payload, send_json)
                elif msg_type == MSG_LIDAR_REQUEST:
                    self._handle_lidar(payload, send, send_json)
                else:
                    send_json(MSG_ERROR, {"message": f"unexpected message type {msg_type}"})
        except (OSError, ConnectionError):
            pass
        finally:
            with self._state_lock:
                for cam_id in owned:
                    session = self._cameras.pop(cam_id, None)
                    if session is not None:
                        session.stop.set()
            try:
                conn.close()
            except OSError:
                pass
            log.info("client disconnected: %s", addr)

    def _handle_register(self, payload, owned, conn, send, send_json) -> bool:
        """Returns False when the connection must be closed (malformed request)."""
        try:
            req = json.loads(payload.decode("utf-8"))
            frame_rate = float(req["frame_rate"])
            if not 0.0 < frame_rate <= MAX_FRAME_RATE:
                raise ValueError(f"frame_rate must lie in (0, {MAX_FRAME_RATE:g}]")
            encoding = req["encoding"]
            if encoding not in ("rgb8", "depth32f", "lidar"):
                raise ValueError(f"unknown encoding {encoding!r}")
            intr = None
            scan_config = None
            if encoding == "lidar":
                scan_config = ScanConfig(**req.get("scan_config", {}))
            elif "preset" in req:
                intr = INTRINSICS_PRESETS[req["preset"]]
            else:
                intr = Intrinsics(**req["intrinsics"])
        except (KeyError, TypeError, ValueError) as exc:
            send_json(MSG_ERROR, {"message": f"malformed registration: {exc}"})
            return False

        with self._state_lock:
            if len(self._cameras) >= self._max_cameras:
                send_json(MSG_ERROR, {"message": "capacity exceeded: no camera slots left"})
                return True
            cam_id = self._next_id
            self._next_id += 1
            session = _CameraSession(camera_id=cam_id, intrinsics=intr,
                                     frame_rate=frame_rate, encoding=encoding,
                                     scan_config=scan_config)
            self._cameras[cam_id] = session
        owned.append(cam_id)
        channel = f"camera/{cam_id}/frames" if encoding != "lidar" else f"lidar/{cam_id}/scans"
        send_json(MSG_REGISTER_OK, {"camera_id": cam_id, "channel": channel})
        if intr is not None:
            send_json(MSG_CAMERA_INFO, {
                "camera_id": cam_id, "fx": intr.fx, "fy": intr.fy,
                "cx": intr.cx, "cy": intr.cy,
                "width": intr.width, "height": intr.height,
            })
        t = threading.Thread(target=self._frame_loop, args=(session, send, send_json),
                             daemon=True)
        t.start()
        self._threads.append(t)
        return True

    def _handle_pose(self, payload, send_json) -> None:
        try:
            req = json.loads(payload.decode("utf-8"))
            cam_id = int(req["camera_id"])
            ts = int(req["timestamp"])
            pose = _pose_from_json(req["pose"])
        except (KeyError, TypeError, ValueError) as exc:
            send_json(MSG_ERROR, {"message": f"malformed pose: {exc}"})
            return
        with self._state_lock:
            session = self._cameras.get(cam_id)
        if session is None:
            send_json(MSG_ERROR, {"message": f"unknown camera {cam_id}"})
            return
        with session.lock:
            if ts < session.pose_timestamp:
                send_json(MSG_ACK, {"camera_id": cam_id, "timestamp": ts, "status": "stale"})
                return
            session.pose = pose
            session.pose_timestamp = ts
        send_json(MSG_ACK, {"camera_id": cam_id, "timestamp": ts, "status": "ok"})

    def _handle_lidar(self, payload, send, send_json) -> None:
        if self._lidar_scan is None:
            send_json(MSG_ERROR, {"message": "no lidar backend configured"})
            return
        try:
            req = json.loads(payload.decode("utf-8"))
            pose = _pose_from_json(req["pose"])
            config = ScanConfig(**req.get("config", {})) if req.get("config") \
                else self._default_scan_config
            ts = int(req.get("timestamp", 0))
        except (KeyError, TypeError, ValueError) as exc:
            send_json(MSG_ERROR, {"message": f"malformed lidar request: {exc}"})
            return
        points = np.asarray(self._lidar_scan(pose, config), dtype=np.float64)
        header = pack_bulk_header(0, ts, points.shape[0], 1, ENCODING_CODES["lidar_xyz32f"])
        send(MSG_LIDAR, header + points.astype("<f4").tobytes())

    def _frame_loop(self, session: _CameraSession, send, send_json) -> None:
        period = 1.0 / session.frame_rate
        next_tick = time.monotonic()
        cached_ts = -1
        cached_payload = b""
        while self._running.is_set() and not session.stop.is_set():
            now = time.monotonic()
            if now < next_tick:
                time.sleep(min(next_tick - now, 0.05))
                continue
            next_tick += period
            if next_tick < now:  # fell behind; don't burst
                next_tick = now + period
            with session.lock:
                pose = session.pose
                ts = session.pose_timestamp
            if pose is None:
                continue  # nothing to render until the first pose arrives
            try:
                if ts != cached_ts:
                    if session.encoding == "lidar":
                        points = np.asarray(self._lidar_scan(pose, session.scan_config))
                        cached_payload = pack_bulk_header(
                            session.camera_id, ts, points.shape[0], 1,
                            ENCODING_CODES["lidar_xyz32f"]) + points.astype("<f4").tobytes()
                    else:
                        data = self._render_frame(pose, session.intrinsics, session.encoding)
                        cached_payload = pack_bulk_header(
                            session.camera_id, ts, session.intrinsics.width,
                            session.intrinsics.height,
                            ENCODING_CODES[session.encoding]) + data
                    cached_ts = ts
                send(MSG_LIDAR if session.encoding == "lidar" else MSG_FRAME, cached_payload)
            except (OSError, ConnectionError):
                return
            except Exception as exc:  # render failure: report, keep the loop alive
                log.exception("render failed for camera %d", session.camera_id)
                try:
                    send_json(MSG_ERROR, {"message": f"render failed: {exc}"})
                except (OSError, ConnectionError):
                    return


class SensorClient:
    """Small synchronous-ish client with a background reader thread."""

    def __init__(self, host: str, port: int, timeout: float = 10.0):
        self._sock = socket.create_connection((host, port), timeout=timeout)
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self.frames: list[tuple] = []      # (camera_id, timestamp, w, h, encoding, bytes)
        self.scans: list[tuple] = []       # (camera_id, timestamp, n_points, ndarray)
        self.camera_infos: list[dict] = []
        self.errors: list[str] = []
        self._control: queue.Queue = queue.Queue()
        self._closed = threading.Event()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _read_loop(self) -> None:
        try:
            while not self._closed.is_set():
                msg = read_message(self._sock)
                if msg is None:
                    break
                msg_type, payload = msg
                if msg_type == MSG_FRAME:
                    cam, ts, w, h, enc, data = unpack_bulk_header(payload)
                    self.frames.append((cam, ts, w, h, enc, data))
                elif msg_type == MSG_LIDAR:
                    cam, ts, n, _, _, data = unpack_bulk_header(payload)
                    pts = np.frombuffer(data, dtype="<f4").reshape(-1, 3)
                    self.scans.append((cam, ts, n, pts))
                elif msg_type == MSG_CAMERA_INFO:
                    self.camera_infos.append(json.loads(payload.decode("utf-8")))
                elif msg_type == MSG_ERROR:
                    self.errors.append(json.loads(payload.decode("utf-8"))["message"])
                else:
                    self._control.put((msg_type, json.loads(payload.decode("utf-8"))))
        except (OSError, ConnectionError):
            pass

    def _send(self, msg_type: int, payload: bytes) -> None:
        self._sock.sendall(pack_message(msg_type, payload))

    def _send_json(self, msg_type: int, obj: dict) -> None:
        self._send(msg_type, json.dumps(obj).encode("utf-8"))

    def _wait_control(self, expect_type: int, timeout: float = 10.0) -> dict:
        msg_type, obj = self._control.get(timeout=timeout)
        if msg_type != expect_type:
            raise RuntimeError(f"expected message type {expect_type}, got {msg_type}: {obj}")
        return obj

    def register(self, frame_rate: float, encoding: str = "rgb8",
                 intrinsics: Intrinsics | None = None, preset: str | None = None,
                 scan_config: dict | None = None, timeout: float = 10.0) -> dict:
        req: dict = {"frame_rate": frame_rate, "encoding": encoding}
        if preset is not None:
            req["preset"] = preset
        elif intrinsics is not None:
            req["intrinsics"] = {"fx": intrinsics.fx, "fy": intrinsics.fy,
                                 "cx": intrinsics.cx, "cy": intrinsics.cy,
                                 "width": intrinsics.width, "height": intrinsics.height}
        if scan_config is not None:
            req["scan_config"] = scan_config
        self._send_json(MSG_REGISTER, req)
        return self._wait_control(MSG_REGISTER_OK, timeout)

    def send_pose(self, camera_id: int, timestamp: int, pose: RigidTransform,
                  timeout: float = 10.0) -> dict:
        self._send_json(MSG_POSE, {"camera_id": camera_id, "timestamp": timestamp,
                                   "pose": pose_to_json(pose)})
        return self._wait_control(MSG_ACK, timeout)

    def request_lidar(self, pose: RigidTransform, config: dict | None = None,
                      timestamp: int = 0, timeout: float = 60.0) -> tuple:
        n_before = len(self.scans)
        req = {"pose": pose_to_json(pose), "timestamp": timestamp}
        if config:
            req["config"] = config
        self._send_json(MSG_LIDAR_REQUEST, req)
        deadline = time.monotonic() + timeout
        while len(self.scans) == n_before:
            if time.monotonic() > deadline:
                raise TimeoutError("no lidar scan received")
            time.sleep(0.005)
        return self.scans[-1]

    def send_raw(self, msg_type: int, payload: bytes) -> None:
        self._send(msg_type, payload)

    def close(self) -> None:
        self._closed.set()
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
