"""Procedural multi-object scene simulator with a software ray-cast renderer.

Scenes hold a few flat-colored primitives (cuboid / sphere / cylinder) over a
checkered ground plane, lit by ambient plus one directional light, z-buffered
with no shadows. Every rendered frame carries exact 3D and 2D box
annotations, which is what makes the color-probe evaluations quantitative.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import geometry
from .errors import BehindCamera, DegenerateBox, SpecInvalid

SHAPES = ("cuboid", "sphere", "cylinder")
MOTION_MODES = ("camera_orbit", "objects_move", "both")

# Saturated, chromatically well-separated albedos (ground/sky stay near-gray).
PALETTE = np.array(
    [
        [0.90, 0.10, 0.10],
        [0.10, 0.80, 0.15],
        [0.15, 0.20, 0.90],
        [0.92, 0.85, 0.10],
        [0.85, 0.10, 0.80],
        [0.10, 0.80, 0.85],
        [0.95, 0.50, 0.05],
        [0.55, 0.10, 0.90],
    ]
)

SKY_COLOR = np.array([0.70, 0.80, 0.90])
GROUND_COLORS = (np.array([0.45, 0.45, 0.45]), np.array([0.62, 0.62, 0.62]))
GROUND_CELL = 1.0

AMBIENT = 0.35
DIFFUSE = 0.65


@dataclass
class ObjectSpec:
    shape: str
    color: np.ndarray          # flat albedo, unique per object in a scene
    box: geometry.Box3D        # initial bounding box (pose + extents)
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    spin: float = 0.0          # yaw radians per frame

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise SpecInvalid(f"unknown shape {self.shape!r}")
        self.color = np.asarray(self.color, dtype=np.float64).reshape(3)
        self.velocity = np.asarray(self.velocity, dtype=np.float64).reshape(3)

    def to_dict(self) -> dict:
        return {
            "shape": self.shape,
            "color": self.color.tolist(),
            "box": self.box.to_dict(),
            "velocity": self.velocity.tolist(),
            "spin": self.spin,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ObjectSpec":
        return cls(
            shape=d["shape"],
            color=d["color"],
            box=geometry.Box3D.from_dict(d["box"]),
            velocity=d.get("velocity", [0, 0, 0]),
            spin=float(d.get("spin", 0.0)),
        )


@dataclass
class CameraPath:
    """Orbit parameters; a static camera is an orbit with zero rate."""

    radius: float = 7.0
    height: float = 3.0
    azimuth_start: float = 0.0
    azimuth_rate: float = 0.0  # radians per frame
    target: np.ndarray = field(default_factory=lambda: np.zeros(3))
    focal: float = 70.0        # fx = fy, pixels

    def __post_init__(self):
        self.target = np.asarray(self.target, dtype=np.float64).reshape(3)

    def camera_for_frame(self, frame: int, image_size: int) -> geometry.CameraModel:
        azim = self.azimuth_start + self.azimuth_rate * frame
        eye = self.target + np.array(
            [self.radius * np.cos(azim), self.radius * np.sin(azim), self.height]
        )
        return geometry.CameraModel(
            fx=self.focal,
            fy=self.focal,
            cx=image_size / 2.0,
            cy=image_size / 2.0,
            width=image_size,
            height=image_size,
            extrinsics=geometry.look_at(eye, self.target),
        )

    def to_dict(self) -> dict:
        return {
            "radius": self.radius,
            "height": self.height,
            "azimuth_start": self.azimuth_start,
            "azimuth_rate": self.azimuth_rate,
            "target": self.target.tolist(),
            "focal": self.focal,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraPath":
        return cls(**d)


@dataclass
class SceneSpec:
    seed: int
    objects: list[ObjectSpec]
    motion_mode: str = "both"
    n_frames: int = 8
    image_size: int = 64
    camera: CameraPath = field(default_factory=CameraPath)
    light_dir: np.ndarray = field(default_factory=lambda: np.array([-0.4, 0.25, -1.0]))

    def __post_init__(self):
        self.light_dir = np.asarray(self.light_dir, dtype=np.float64).reshape(3)

    def validate(self, n_max: int | None = None) -> None:
        if self.motion_mode not in MOTION_MODES:
            raise SpecInvalid(f"unknown motion_mode {self.motion_mode!r}")
        if self.n_frames < 2:
            raise SpecInvalid("n_frames must be >= 2")
        if not self.objects:
            raise SpecInvalid("scene needs at least one object")
        if n_max is not None and len(self.objects) > n_max:
            raise SpecInvalid(f"{len(self.objects)} objects exceeds n_max={n_max}")
        chromas = [o.color / o.color.sum() for o in self.objects]
        for i in range(len(chromas)):
            for j in range(i + 1, len(chromas)):
                if np.abs(chromas[i] - chromas[j]).sum() < 0.15:
                    raise SpecInvalid(f"objects {i} and {j} have indistinct colors")
        aabbs = [_world_aabb(o.box) for o in self.objects]
        for i in range(len(aabbs)):
            for j in range(i + 1, len(aabbs)):
                if _aabb_overlap(aabbs[i], aabbs[j]):
                    raise SpecInvalid(f"objects {i} and {j} interpenetrate initially")

    def box_for_frame(self, obj_index: int, frame: int) -> geometry.Box3D:
        obj = self.objects[obj_index]
        if self.motion_mode == "camera_orbit":
            return obj.box
        center = obj.box.center + obj.velocity * frame
        quat = obj.box.quat
        if obj.spin:
            quat = geometry.quat_multiply(geometry.yaw_quat(obj.spin * frame), quat)
            quat = quat / np.linalg.norm(quat)
        return geometry.Box3D(center, obj.box.size, quat)

    def camera_for_frame(self, frame: int) -> geometry.CameraModel:
        if self.motion_mode == "objects_move":
            return self.camera.camera_for_frame(0, self.image_size)
        return self.camera.camera_for_frame(frame, self.image_size)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "objects": [o.to_dict() for o in self.objects],
            "motion_mode": self.motion_mode,
            "n_frames": self.n_frames,
            "image_size": self.image_size,
            "camera": self.camera.to_dict(),
            "light_dir": self.light_dir.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        return cls(
            seed=int(d["seed"]),
            objects=[ObjectSpec.from_dict(o) for o in d["objects"]],
            motion_mode=d["motion_mode"],
            n_frames=int(d["n_frames"]),
            image_size=int(d["image_size"]),
            camera=CameraPath.from_dict(d["camera"]),
            light_dir=d["light_dir"],
        )

    @classmethod
    def sample(
        cls,
        seed: int,
        n_objects: int | tuple[int, int] = (1, 3),
        motion_mode: str = "both",
        n_frames: int = 8,
        image_size: int = 64,
    ) -> "SceneSpec":
        """Draw a random valid scene; deterministic for a fixed seed."""
        rng = np.random.default_rng(seed)
        if isinstance(n_objects, tuple):
            n = int(rng.integers(n_objects[0], n_objects[1] + 1))
        else:
            n = int(n_objects)
        color_order = rng.permutation(len(PALETTE))
        objects: list[ObjectSpec] = []
        placed: list[tuple[np.ndarray, np.ndarray]] = []
        attempts = 0
        while len(objects) < n and attempts < 200:
            attempts += 1
            shape = SHAPES[int(rng.integers(0, len(SHAPES)))]
            if shape == "cuboid":
                size = rng.uniform(0.7, 1.3, size=3)
            elif shape == "sphere":
                d = rng.uniform(0.7, 1.2)
                size = np.array([d, d, d])
            else:
                d = rng.uniform(0.6, 1.0)
                size = np.array([d, d, rng.uniform(0.8, 1.4)])
            center = np.array([*rng.uniform(-1.6, 1.6, size=2), size[2] / 2.0])
            quat = geometry.yaw_quat(rng.uniform(0, 2 * np.pi))
            box = geometry.Box3D(center, size, quat)
            aabb = _world_aabb(box)
            margin = 0.15
            grown = (aabb[0] - margin, aabb[1] + margin)
            if any(_aabb_overlap(grown, other) for other in placed):
                continue
            moving = motion_mode in ("objects_move", "both")
            velocity = np.zeros(3)
            spin = 0.0
            if moving:
                speed = rng.uniform(0.03, 0.09)
                angle = rng.uniform(0, 2 * np.pi)
                velocity = np.array([speed * np.cos(angle), speed * np.sin(angle), 0.0])
                spin = rng.uniform(-0.12, 0.12)
            objects.append(
                ObjectSpec(
                    shape=shape,
                    color=PALETTE[color_order[len(objects)]],
                    box=box,
                    velocity=velocity,
                    spin=spin,
                )
            )
            placed.append(grown)
        if len(objects) < n:
            raise SpecInvalid(f"could not place {n} non-overlapping objects (seed={seed})")
        orbiting = motion_mode in ("camera_orbit", "both")
        camera = CameraPath(
            radius=rng.uniform(6.0, 8.0),
            height=rng.uniform(2.5, 4.0),
            azimuth_start=rng.uniform(0, 2 * np.pi),
            azimuth_rate=rng.uniform(0.06, 0.14) if orbiting else 0.0,
            target=np.array([*rng.uniform(-0.2, 0.2, size=2), 0.5]),
            focal=rng.uniform(62.0, 80.0) * image_size / 64.0,
        )
        light = np.array([rng.uniform(-0.7, 0.7), rng.uniform(-0.7, 0.7), -1.0])
        spec = cls(
            seed=seed,
            objects=objects,
            motion_mode=motion_mode,
            n_frames=n_frames,
            image_size=image_size,
            camera=camera,
            light_dir=light,
        )
        spec.validate()
        return spec


@dataclass
class FrameObject:
    object_id: int
    box3d: geometry.Box3D
    box2d: geometry.Box2D


@dataclass
class RenderedFrame:
    image: np.ndarray                 # (H, W, 3) float32 in [0, 1]
    camera: geometry.CameraModel
    objects: list[FrameObject]


def _world_aabb(box: geometry.Box3D) -> tuple[np.ndarray, np.ndarray]:
    corners = box.corners()
    return corners.min(axis=0), corners.max(axis=0)


def _aabb_overlap(a, b) -> bool:
    return bool(np.all(a[0] <= b[1]) and np.all(b[0] <= a[1]))


def _ray_grid(cam: geometry.CameraModel) -> tuple[np.ndarray, np.ndarray]:
    """World-space ray origin (3,) and directions (H, W, 3).

    Directions have unit camera-frame z, so the ray parameter t equals the
    camera-frame depth of the hit, which is what the z-buffer compares.
    """
    H, W = cam.height, cam.width
    us = (np.arange(W) + 0.5 - cam.cx) / cam.fx
    vs = (np.arange(H) + 0.5 - cam.cy) / cam.fy
    uu, vv = np.meshgrid(us, vs)
    dirs_cam = np.stack([uu, vv, np.ones_like(uu)], axis=-1)
    rot_c2w = cam.extrinsics.rotation.T
    dirs_world = dirs_cam @ rot_c2w.T
    origin = -rot_c2w @ cam.extrinsics.translation
    return origin, dirs_world


def _intersect_ground(origin, dirs):
    dz = dirs[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = -origin[2] / dz
    t = np.where((np.abs(dz) > 1e-12) & (t > 1e-6), t, np.inf)
    return t


def _intersect_object(origin, dirs, obj: ObjectSpec, box: geometry.Box3D):
    """Per-pixel (t, world normal) for one primitive; t = inf where missed."""
    rot = box.rotation
    o_local = (origin - box.center) @ rot
    d_local = dirs @ rot
    half = box.size / 2.0
    if obj.shape == "cuboid":
        return _intersect_box(o_local, d_local, half, rot)
    if obj.shape == "sphere":
        return _intersect_ellipsoid(o_local, d_local, half, rot)
    return _intersect_cylinder(o_local, d_local, half, rot)


def _intersect_box(o, d, half, rot):
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
    t1 = (-half - o) * inv
    t2 = (half - o) * inv
    tmin = np.minimum(t1, t2).max(axis=-1)
    tmax = np.maximum(t1, t2).min(axis=-1)
    hit = (tmax >= tmin) & (tmax > 1e-6)
    t = np.where(tmin > 1e-6, tmin, tmax)
    t = np.where(hit, t, np.inf)
    # Face normal: the axis achieving the entering slab.
    point = o + np.where(np.isfinite(t), t, 0.0)[..., None] * d
    axis = np.argmax(np.abs(point) / half, axis=-1)
    normal_local = np.zeros(point.shape)
    idx = np.indices(axis.shape)
    normal_local[(*idx, axis)] = np.sign(point[(*idx, axis)])
    normal = normal_local @ rot.T
    return t, normal


def _intersect_ellipsoid(o, d, half, rot):
    os = o / half
    ds = d / half
    a = (ds * ds).sum(axis=-1)
    b = 2.0 * (os * ds).sum(axis=-1)
    c = (os * os).sum(axis=-1) - 1.0
    disc = b * b - 4 * a * c
    sq = np.sqrt(np.maximum(disc, 0.0))
    t0 = (-b - sq) / (2 * a)
    t1 = (-b + sq) / (2 * a)
    t = np.where(t0 > 1e-6, t0, t1)
    t = np.where((disc >= 0) & (t > 1e-6), t, np.inf)
    point = o + np.where(np.isfinite(t), t, 0.0)[..., None] * d
    normal_local = point / (half**2)
    norm = np.linalg.norm(normal_local, axis=-1, keepdims=True)
    normal_local = normal_local / np.where(norm > 0, norm, 1.0)
    normal = normal_local @ rot.T
    return t, normal


def _intersect_cylinder(o, d, half, rot):
    rx, ry, hz = half[0], half[1], half[2]
    ox, oy, oz = o[..., 0], o[..., 1], o[..., 2]
    dx, dy, dz = d[..., 0], d[..., 1], d[..., 2]
    a = (dx / rx) ** 2 + (dy / ry) ** 2
    b = 2 * (ox * dx / rx**2 + oy * dy / ry**2)
    c = (ox / rx) ** 2 + (oy / ry) ** 2 - 1.0
    disc = b * b - 4 * a * c
    sq = np.sqrt(np.maximum(disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        s0 = (-b - sq) / (2 * a)
        s1 = (-b + sq) / (2 * a)
    side_t = np.full(ox.shape, np.inf)
    side_normal = np.zeros((*ox.shape, 3))
    for s in (s0, s1):
        z = oz + s * dz
        ok = (disc >= 0) & (a > 1e-12) & (s > 1e-6) & (np.abs(z) <= hz) & (s < side_t)
        side_t = np.where(ok, s, side_t)
        px = ox + s * dx
        py = oy + s * dy
        n = np.stack([px / rx**2, py / ry**2, np.zeros_like(px)], axis=-1)
        side_normal = np.where(ok[..., None], n, side_normal)
    cap_t = np.full(ox.shape, np.inf)
    cap_normal = np.zeros((*ox.shape, 3))
    with np.errstate(divide="ignore", invalid="ignore"):
        for zcap, nz in ((hz, 1.0), (-hz, -1.0)):
            s = (zcap - oz) / dz
            px = ox + s * dx
            py = oy + s * dy
            inside = (px / rx) ** 2 + (py / ry) ** 2 <= 1.0
            ok = (np.abs(dz) > 1e-12) & (s > 1e-6) & inside & (s < cap_t)
            cap_t = np.where(ok, s, cap_t)
            cap_normal = np.where(
                ok[..., None], np.array([0.0, 0.0, nz]), cap_normal
            )
    use_cap = cap_t < side_t
    t = np.where(use_cap, cap_t, side_t)
    normal_local = np.where(use_cap[..., None], cap_normal, side_normal)
    norm = np.linalg.norm(normal_local, axis=-1, keepdims=True)
    normal_local = normal_local / np.where(norm > 0, norm, 1.0)
    normal = normal_local @ rot.T
    return t, normal


def render_frame(
    spec: SceneSpec,
    frame: int,
    box_overrides: dict[int, geometry.Box3D] | None = None,
    removed: set[int] | None = None,
) -> RenderedFrame:
    """Render one frame; overrides/removals support edit-task ground truth."""
    box_overrides = box_overrides or {}
    removed = removed or set()
    cam = spec.camera_for_frame(frame)
    origin, dirs = _ray_grid(cam)
    H, W = cam.height, cam.width

    to_light = -spec.light_dir / np.linalg.norm(spec.light_dir)

    depth = _intersect_ground(origin, dirs)
    safe_depth = np.where(np.isfinite(depth), depth, 0.0)
    ground_point = origin + safe_depth[..., None] * dirs
    checker = (
        np.floor(ground_point[..., 0] / GROUND_CELL)
        + np.floor(ground_point[..., 1] / GROUND_CELL)
    ).astype(np.int64) % 2
    ground_albedo = np.where(
        checker[..., None] == 0, GROUND_COLORS[0], GROUND_COLORS[1]
    )
    shade = AMBIENT + DIFFUSE * max(0.0, to_light[2])  # ground normal is +z
    color = np.where(
        np.isfinite(depth)[..., None], ground_albedo * shade, SKY_COLOR
    )

    frame_objects: list[FrameObject] = []
    for idx, obj in enumerate(spec.objects):
        if idx in removed:
            continue
        box = box_overrides.get(idx, spec.box_for_frame(idx, frame))
        t, normal = _intersect_object(origin, dirs, obj, box)
        closer = t < depth
        if np.any(closer):
            lam = np.clip((normal * to_light).sum(axis=-1), 0.0, None)
            shaded = obj.color * (AMBIENT + DIFFUSE * lam[..., None])
            color = np.where(closer[..., None], shaded, color)
            depth = np.where(closer, t, depth)
        try:
            box2d = geometry.box2d_from_box3d(box, cam)
        except (BehindCamera, DegenerateBox):
            continue
        frame_objects.append(FrameObject(object_id=idx, box3d=box, box2d=box2d))

    image = np.clip(color, 0.0, 1.0).astype(np.float32)
    return RenderedFrame(image=image, camera=cam, objects=frame_objects)


def render_clip(spec: SceneSpec) -> list[RenderedFrame]:
    """Render all frames of a scene; deterministic for a fixed spec."""
    spec.validate()
    return [render_frame(spec, f) for f in range(spec.n_frames)]


def color_mask(image: np.ndarray, albedo: np.ndarray, tol: float = 0.10) -> np.ndarray:
    """Boolean mask of pixels whose chromaticity matches ``albedo``.

    Lambertian shading scales RGB uniformly, so chromaticity survives shading
    exactly; a brightness floor rejects near-black pixels.
    """
    albedo = np.asarray(albedo, dtype=np.float64)
    target = albedo / albedo.sum()
    total = image.sum(axis=-1)
    safe = np.where(total > 1e-6, total, 1.0)
    chroma = image / safe[..., None]
    dist = np.abs(chroma - target).sum(axis=-1)
    return (dist < tol) & (total > 0.25)


def save_image(image: np.ndarray, path: str | Path) -> None:
    arr = np.clip(np.round(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr).save(str(path), format="PNG")


def load_image(path: str | Path) -> np.ndarray:
    with Image.open(str(path)) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0


def generate_dataset(
    out_dir: str | Path,
    n_clips: int = 8,
    frames_per_clip: int = 8,
    n_max: int = 4,
    n_objects: tuple[int, int] = (1, 3),
    motion_mode: str = "both",
    image_size: int = 64,
    seed: int = 0,
) -> Path:
    """Write a dataset of rendered clips; per-clip seeds are seed + index."""
    out = Path(out_dir)
    clips_dir = out / "clips"
    clips_dir.mkdir(parents=True, exist_ok=True)
    if isinstance(n_objects, tuple) and n_objects[1] > n_max:
        raise SpecInvalid(f"n_objects upper bound {n_objects[1]} exceeds n_max={n_max}")
    clip_names = []
    for clip_index in range(n_clips):
        clip_id = f"clip_{clip_index:05d}"
        clip_dir = clips_dir / clip_id
        clip_dir.mkdir(parents=True, exist_ok=True)
        spec = SceneSpec.sample(
            seed=seed + clip_index,
            n_objects=n_objects,
            motion_mode=motion_mode,
            n_frames=frames_per_clip,
            image_size=image_size,
        )
        spec.validate(n_max=n_max)
        frames = render_clip(spec)
        frame_entries = []
        for f, rendered in enumerate(frames):
            image_name = f"frame_{f:03d}.png"
            save_image(rendered.image, clip_dir / image_name)
            frame_entries.append(
                {
                    "image": image_name,
                    "extrinsics": rendered.camera.extrinsics.to_dict(),
                    "objects": [
                        {
                            "id": fo.object_id,
                            "box3d": fo.box3d.to_dict(),
                            "box2d": fo.box2d.to_dict(),
                        }
                        for fo in rendered.objects
                    ],
                }
            )
        cam0 = frames[0].camera
        annotation = {
            "schema_version": 1,
            "clip_id": clip_id,
            "intrinsics": {
                "fx": cam0.fx,
                "fy": cam0.fy,
                "cx": cam0.cx,
                "cy": cam0.cy,
                "width": cam0.width,
                "height": cam0.height,
            },
            "scene_spec": spec.to_dict(),
            "frames": frame_entries,
        }
        (clip_dir / "annotation.json").write_text(
            json.dumps(annotation, sort_keys=True, indent=1)
        )
        clip_names.append(f"clips/{clip_id}")
    manifest = {
        "schema_version": 1,
        "image_size": image_size,
        "n_clips": n_clips,
        "frames_per_clip": frames_per_clip,
        "n_max": n_max,
        "motion_mode": motion_mode,
        "seed": seed,
        "clips": clip_names,
    }
    (out / "dataset.json").write_text(json.dumps(manifest, sort_keys=True, indent=1))
    return out
