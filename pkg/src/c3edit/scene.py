"""Toy multi-view splat scene: cameras, differentiable rendering, fixtures, I/O.

The scene is a flat list of isotropic splats (position, color, opacity,
radius). Rendering projects splats through a pinhole camera and composites
Gaussian footprints back to front; it is differentiable with respect to splat
colors, opacities and positions so the lifting stage can backpropagate
through it. All internal arithmetic is float64.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import torch
from PIL import Image

from .errors import ParseError, ValidationError
from . import rasterizer

DEFAULT_BACKGROUND = (0.5, 0.5, 0.5)

# Splats closer than this to the image plane are culled.
NEAR_CLIP = 1e-4


@dataclass(frozen=True)
class Camera:
    """Pinhole camera; ``rotation`` maps world to camera coordinates.

    Camera axes: row 0 = image right, row 1 = image down, row 2 = viewing
    direction. A splat is visible when its camera-space z exceeds NEAR_CLIP.
    """

    id: int
    center: np.ndarray
    rotation: np.ndarray
    focal: float
    resolution: tuple[int, int]  # (width, height)

    def __post_init__(self):
        center = np.asarray(self.center, dtype=np.float64).reshape(3)
        rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "rotation", rotation)
        if not np.allclose(rotation.T @ rotation, np.eye(3), atol=1e-6):
            raise ValidationError(f"camera {self.id}: rotation is not orthonormal")
        width, height = self.resolution
        if width < 8 or height < 8:
            raise ValidationError(
                f"camera {self.id}: resolution {self.resolution} below minimum of 8"
            )
        if not np.isfinite(self.focal) or self.focal <= 0:
            raise ValidationError(f"camera {self.id}: focal must be positive")


@dataclass
class SplatScene:
    """Struct-of-arrays splat soup plus a background color."""

    positions: np.ndarray  # (N, 3) world units
    colors: np.ndarray  # (N, 3) in [0, 1]
    opacities: np.ndarray  # (N,) in [0, 1]
    radii: np.ndarray  # (N,) world units, > 0
    background: np.ndarray = field(
        default_factory=lambda: np.array(DEFAULT_BACKGROUND, dtype=np.float64)
    )

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        self.colors = np.asarray(self.colors, dtype=np.float64).reshape(-1, 3)
        self.opacities = np.asarray(self.opacities, dtype=np.float64).reshape(-1)
        self.radii = np.asarray(self.radii, dtype=np.float64).reshape(-1)
        self.background = np.asarray(self.background, dtype=np.float64).reshape(3)
        self.validate()

    def validate(self):
        n = len(self.positions)
        if n == 0:
            raise ValidationError("scene must contain at least one splat")
        if not (len(self.colors) == len(self.opacities) == len(self.radii) == n):
            raise ValidationError("splat arrays have mismatched lengths")
        for name, arr in (
            ("position", self.positions),
            ("color", self.colors),
            ("opacity", self.opacities),
            ("radius", self.radii),
            ("background", self.background),
        ):
            if not np.isfinite(arr).all():
                raise ValidationError(f"splat field '{name}' contains non-finite values")
        if self.colors.min() < 0 or self.colors.max() > 1:
            raise ValidationError("splat field 'color' must lie in [0, 1]")
        if self.opacities.min() < 0 or self.opacities.max() > 1:
            raise ValidationError("splat field 'opacity' must lie in [0, 1]")
        if self.background.min() < 0 or self.background.max() > 1:
            raise ValidationError("'background' must lie in [0, 1]")
        if self.radii.min() <= 0:
            raise ValidationError("splat field 'radius' must be > 0")

    @property
    def num_splats(self) -> int:
        return len(self.positions)

    def copy(self) -> "SplatScene":
        return SplatScene(
            positions=self.positions.copy(),
            colors=self.colors.copy(),
            opacities=self.opacities.copy(),
            radii=self.radii.copy(),
            background=self.background.copy(),
        )


@dataclass
class ViewImage:
    """An H x W x 3 image in [0, 1] associated with a view id."""

    view_id: int
    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ValidationError(
                f"view {self.view_id}: pixels must be HxWx3, got {self.pixels.shape}"
            )
        if not np.isfinite(self.pixels).all():
            raise ValidationError(f"view {self.view_id}: pixels contain non-finite values")
        if self.pixels.min() < 0 or self.pixels.max() > 1:
            raise ValidationError(f"view {self.view_id}: pixel values must lie in [0, 1]")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.pixels.shape


def camera_distance(a: Camera, b: Camera) -> float:
    """Euclidean distance between camera centers (orientation is ignored)."""
    return float(np.linalg.norm(a.center - b.center))


def project_splats(
    positions: torch.Tensor, camera: Camera, radii: torch.Tensor
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
    """Project splat centers into pixel coordinates.

    Returns (means2d, screen_radii, depths, visible_mask). Screen-space
    footprint radius is focal * world_radius / depth.
    """
    rot = torch.as_tensor(camera.rotation, dtype=torch.float64)
    center = torch.as_tensor(camera.center, dtype=torch.float64)
    cam_pts = (positions - center) @ rot.T
    depths = cam_pts[:, 2]
    visible = depths > NEAR_CLIP
    safe_z = torch.where(visible, depths, torch.ones_like(depths))
    width, height = camera.resolution
    cx = (width - 1) / 2.0
    cy = (height - 1) / 2.0
    u = camera.focal * cam_pts[:, 0] / safe_z + cx
    v = camera.focal * cam_pts[:, 1] / safe_z + cy
    means2d = torch.stack([u, v], dim=1)
    screen_radii = camera.focal * radii / safe_z
    return means2d, screen_radii, depths, visible


def render_tensors(
    positions: torch.Tensor,
    colors: torch.Tensor,
    opacities: torch.Tensor,
    radii: torch.Tensor,
    camera: Camera,
    background: torch.Tensor,
) -> torch.Tensor:
    """Differentiable render to an (H, W, 3) float64 tensor.

    Gradients flow to positions, colors, opacities and radii. Splats behind
    the near plane are culled; depth order is near-to-far with ties broken by
    splat index (stable sort), which fixes the compositing order.
    """
    width, height = camera.resolution
    means2d, screen_radii, depths, visible = project_splats(positions, camera, radii)
    idx = torch.nonzero(visible, as_tuple=False).reshape(-1)
    if idx.numel() == 0:
        return background.expand(height, width, 3).clone()
    order = idx[torch.argsort(depths[idx], stable=True)]
    image = rasterizer.rasterize(
        means2d[order],
        screen_radii[order],
        colors[order],
        opacities[order],
        background,
        height,
        width,
    )
    return image.clamp(0.0, 1.0)


def render(scene: SplatScene, camera: Camera) -> ViewImage:
    """Render the scene from one camera. Pure and deterministic."""
    scene.validate()
    with torch.no_grad():
        image = render_tensors(
            torch.from_numpy(scene.positions),
            torch.from_numpy(scene.colors),
            torch.from_numpy(scene.opacities),
            torch.from_numpy(scene.radii),
            camera,
            torch.from_numpy(scene.background),
        )
    return ViewImage(view_id=camera.id, pixels=image.numpy())


def _look_at_rotation(center: np.ndarray, target: np.ndarray) -> np.ndarray:
    forward = target - center
    forward = forward / np.linalg.norm(forward)
    world_up = np.array([0.0, 0.0, 1.0])
    if abs(forward @ world_up) > 0.999:  # degenerate: looking straight up/down
        world_up = np.array([0.0, 1.0, 0.0])
    right = np.cross(forward, world_up)
    right = right / np.linalg.norm(right)
    down = np.cross(forward, right)
    return np.stack([right, down, forward])


def make_ring_scene(
    n_views: int,
    n_splats: int,
    seed: int,
    *,
    resolution: tuple[int, int] = (64, 64),
    ring_radius: float = 4.0,
    camera_height: float = 0.8,
    focal: float = 90.0,
) -> tuple[SplatScene, list[Camera]]:
    """Random splat cloud watched by cameras evenly spaced on a circle.

    All cameras look at the splat centroid. Deterministic per seed.
    """
    if n_views < 3:
        raise ValidationError(f"n_views must be >= 3, got {n_views}")
    if n_splats < 1:
        raise ValidationError(f"n_splats must be >= 1, got {n_splats}")
    rng = np.random.default_rng(seed)
    positions = rng.normal(scale=0.55, size=(n_splats, 3))
    positions = np.clip(positions, -1.4, 1.4)
    # Color is tied to each splat's azimuth so the scene, like a real object,
    # looks different from different sides; purely random colors make every
    # viewpoint statistically identical.
    azimuth = np.arctan2(positions[:, 1], positions[:, 0])
    swatch = 0.5 + 0.45 * np.stack(
        [np.cos(azimuth), np.cos(azimuth - 2.0 * np.pi / 3), np.cos(azimuth + 2.0 * np.pi / 3)],
        axis=1,
    )
    colors = np.clip(0.6 * swatch + 0.4 * rng.uniform(0.0, 1.0, size=(n_splats, 3)), 0.0, 1.0)
    opacities = rng.uniform(0.4, 0.95, size=n_splats)
    radii = rng.uniform(0.08, 0.22, size=n_splats)
    scene = SplatScene(positions=positions, colors=colors, opacities=opacities, radii=radii)

    centroid = positions.mean(axis=0)
    cameras = []
    for i in range(n_views):
        angle = 2.0 * np.pi * i / n_views
        center = np.array(
            [
                centroid[0] + ring_radius * np.cos(angle),
                centroid[1] + ring_radius * np.sin(angle),
                centroid[2] + camera_height,
            ]
        )
        cameras.append(
            Camera(
                id=i,
                center=center,
                rotation=_look_at_rotation(center, centroid),
                focal=focal,
                resolution=resolution,
            )
        )
    return scene, cameras


# ---------------------------------------------------------------------------
# Scene file I/O (JSON with splats + cameras, lossless within float repr)
# ---------------------------------------------------------------------------


def save_scene(path, scene: SplatScene, cameras: list[Camera]) -> None:
    doc = {
        "splats": [
            {
                "position": [float(x) for x in scene.positions[i]],
                "color": [float(x) for x in scene.colors[i]],
                "opacity": float(scene.opacities[i]),
                "radius": float(scene.radii[i]),
            }
            for i in range(scene.num_splats)
        ],
        "cameras": [
            {
                "id": int(cam.id),
                "center": [float(x) for x in cam.center],
                "rotation": [float(x) for x in cam.rotation.reshape(-1)],
                "focal": float(cam.focal),
                "resolution": [int(cam.resolution[0]), int(cam.resolution[1])],
            }
            for cam in cameras
        ],
        "background": [float(x) for x in scene.background],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)


def _field(record, name, context):
    try:
        return record[name]
    except (KeyError, TypeError, IndexError):
        raise ParseError(f"{context}: missing field '{name}'") from None


def load_scene(path) -> tuple[SplatScene, list[Camera]]:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"scene file {path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"scene file {path}: top level must be an object")
    splats = _field(doc, "splats", "scene file")
    cam_records = _field(doc, "cameras", "scene file")
    if not isinstance(splats, list) or not splats:
        raise ParseError("scene file: 'splats' must be a non-empty array")
    if not isinstance(cam_records, list):
        raise ParseError("scene file: 'cameras' must be an array")

    positions, colors, opacities, radii = [], [], [], []
    for i, rec in enumerate(splats):
        ctx = f"splats[{i}]"
        positions.append(_field(rec, "position", ctx))
        colors.append(_field(rec, "color", ctx))
        opacities.append(_field(rec, "opacity", ctx))
        radii.append(_field(rec, "radius", ctx))
    try:
        scene = SplatScene(
            positions=np.array(positions, dtype=np.float64),
            colors=np.array(colors, dtype=np.float64),
            opacities=np.array(opacities, dtype=np.float64),
            radii=np.array(radii, dtype=np.float64),
            background=np.array(doc.get("background", DEFAULT_BACKGROUND), dtype=np.float64),
        )
    except ValueError as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ParseError(f"scene file: malformed splat arrays ({exc})") from exc

    cameras = []
    seen_ids = set()
    for i, rec in enumerate(cam_records):
        ctx = f"cameras[{i}]"
        cam_id = _field(rec, "id", ctx)
        if cam_id in seen_ids:
            raise ValidationError(f"{ctx}: duplicate camera id {cam_id}")
        seen_ids.add(cam_id)
        rotation = np.array(_field(rec, "rotation", ctx), dtype=np.float64)
        if rotation.size != 9:
            raise ParseError(f"{ctx}: field 'rotation' must hold 9 floats")
        resolution = _field(rec, "resolution", ctx)
        cameras.append(
            Camera(
                id=int(cam_id),
                center=np.array(_field(rec, "center", ctx), dtype=np.float64),
                rotation=rotation.reshape(3, 3),
                focal=float(_field(rec, "focal", ctx)),
                resolution=(int(resolution[0]), int(resolution[1])),
            )
        )
    return scene, cameras


# ---------------------------------------------------------------------------
# PNG I/O. Stored images are 8-bit; quantize() is the canonical float->8bit
# map so in-memory and reloaded images agree bit for bit.
# ---------------------------------------------------------------------------


def quantize(pixels: np.ndarray) -> np.ndarray:
    """Round-trip float pixels through the 8-bit representation."""
    as_u8 = np.clip(np.round(np.asarray(pixels, dtype=np.float64) * 255.0), 0, 255)
    return as_u8 / 255.0


def save_png(path, pixels: np.ndarray) -> None:
    as_u8 = np.clip(np.round(np.asarray(pixels, dtype=np.float64) * 255.0), 0, 255).astype(
        np.uint8
    )
    Image.fromarray(as_u8, mode="RGB").save(path, format="PNG")


def load_png(path) -> np.ndarray:
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float64)
    return arr / 255.0
