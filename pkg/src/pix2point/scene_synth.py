"""Deterministic generator of synthetic driving-like scenes.

A scene is a soup of primitives (ground strips, boxes, cylinders) ray-cast
from a pinhole camera at the origin (x right, y down, z forward).  The same
intersection routine renders the image and samples the LiDAR, so the
point-to-pixel correspondence is exact: LiDAR rays pass through the centers
of a regular sub-grid of pixels (a regular fan in tangent space), and each
returned point therefore carries the same primitive hit as its pixel.

The source and target domains share the geometry model but use different
palette transforms (hue rotation + brightness shift), so the appearance gap
is label-preserving by construction.  Source and target datasets are drawn
from disjoint random worlds.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ContractError, GenerationError
from .geometry import CameraIntrinsics, project_points

KIND_GROUND = "ground-strip"
KIND_BOX = "box"
KIND_CYLINDER = "cylinder"

# Roles cycled over class ids 1..C-1; class 0 is always "other"
# (sky background plus small clutter boxes).
ROLE_CYCLE = ("ground", "box-large", "box-small", "cylinder")

SKY_ALBEDO = np.array([0.75, 0.82, 0.90])

_T_EPS = 1e-9


@dataclass(frozen=True)
class ScenePrimitive:
    kind: str
    class_id: int
    position: tuple  # center (x, y, z), meters
    extent: tuple  # half-extents; cylinders use (radius, half_height, radius)
    albedo: tuple  # RGB in [0, 1]


@dataclass
class SceneGenConfig:
    n_classes: int = 6
    image_size: tuple = (64, 64)  # (H, W)
    focal: float = 55.0
    camera_height: float = 1.6  # ground plane at y = +camera_height
    n_strips: int = 6
    n_boxes: int = 9
    n_cylinders: int = 4
    n_clutter: int = 4
    n_rays: int = 4096
    noise_amplitude: float = 0.02
    hue_rotation_deg: float = 55.0  # target-domain palette
    brightness_scale: float = 0.82
    brightness_offset: float = 0.06
    ground_half_width: float = 24.0
    ground_z_range: tuple = (2.0, 60.0)

    def validate(self):
        h, w = self.image_size
        if self.n_classes < 2:
            raise ConfigurationError(f"need at least 2 classes, got {self.n_classes}")
        if h < 4 or w < 4:
            raise ConfigurationError(f"image size {self.image_size} too small")
        if self.focal <= 0:
            raise ConfigurationError("focal must be positive")
        if self.n_rays <= 0:
            raise ConfigurationError("n_rays must be positive")
        if self.noise_amplitude < 0:
            raise ConfigurationError("noise amplitude must be non-negative")
        lo, hi = self.ground_z_range
        if not (0 < lo < hi):
            raise ConfigurationError(f"bad ground z range {self.ground_z_range}")
        roles = class_roles(self.n_classes)
        needed = {
            "ground": self.n_strips,
            "box-large": self.n_boxes,
            "box-small": self.n_boxes,
            "cylinder": self.n_cylinders,
        }
        for role, classes in roles.items():
            if role == "other":
                if self.n_clutter < 1:
                    raise ConfigurationError("n_clutter must be >= 1 (class 0 needs a primitive)")
                continue
            if classes and needed[role] < len(classes):
                raise ConfigurationError(
                    f"{needed[role]} {role} primitives cannot cover {len(classes)} classes"
                )


def class_roles(n_classes: int) -> dict:
    """Map role name -> list of class ids. Class 0 is 'other'; 1..C-1 cycle ROLE_CYCLE."""
    roles = {name: [] for name in ROLE_CYCLE}
    roles["other"] = [0]
    for c in range(1, n_classes):
        roles[ROLE_CYCLE[(c - 1) % len(ROLE_CYCLE)]].append(c)
    return roles


def class_albedo(class_id: int, n_classes: int) -> np.ndarray:
    """Deterministic base albedo per class.

    Ground classes get strongly distinct colors (separable by appearance, not
    geometry); the two box roles get nearby grays (separable by geometry more
    than appearance); cylinders are dark.
    """
    if class_id == 0:
        return np.array([0.50, 0.42, 0.52])
    role = ROLE_CYCLE[(class_id - 1) % len(ROLE_CYCLE)]
    base = {
        "ground": np.array([0.24, 0.25, 0.28]),
        "box-large": np.array([0.46, 0.52, 0.62]),
        "box-small": np.array([0.62, 0.54, 0.46]),
        "cylinder": np.array([0.33, 0.26, 0.20]),
    }[role]
    # Second and later classes of a role shift hue by a golden-angle step so
    # arbitrary C stays distinguishable.
    rank = (class_id - 1) // len(ROLE_CYCLE)
    if rank == 0:
        return base
    if role == "ground" and rank == 1:
        return np.array([0.66, 0.55, 0.36])  # tan vs asphalt: the color-only pair
    ang = 2.399963 * rank
    rot = hue_rotation_matrix(np.degrees(ang))
    return np.clip(rot @ base, 0.05, 0.95)


def hue_rotation_matrix(degrees: float) -> np.ndarray:
    """Rotation of RGB space about the gray axis (1,1,1)/sqrt(3)."""
    th = np.radians(degrees)
    u = np.full(3, 1.0 / np.sqrt(3.0))
    k = np.array([[0, -u[2], u[1]], [u[2], 0, -u[0]], [-u[1], u[0], 0]])
    return np.eye(3) * np.cos(th) + np.sin(th) * k + (1 - np.cos(th)) * np.outer(u, u)


def domain_palette(domain: str, config: SceneGenConfig):
    """(matrix, scale, offset) for rgb' = clip(scale * (matrix @ rgb) + offset)."""
    if domain == "source":
        return np.eye(3), 1.0, 0.0
    if domain == "target":
        return (
            hue_rotation_matrix(config.hue_rotation_deg),
            config.brightness_scale,
            config.brightness_offset,
        )
    raise ContractError(f"unknown domain {domain!r}")


def make_camera(config: SceneGenConfig) -> CameraIntrinsics:
    h, w = config.image_size
    return CameraIntrinsics(
        focal=config.focal,
        principal_point=((w - 1) / 2.0, (h - 1) / 2.0),
        image_size=(h, w),
    )


# ---------------------------------------------------------------------------
# World generation
# ---------------------------------------------------------------------------

def generate_world(seed: int, config: SceneGenConfig) -> list:
    """Deterministic primitive soup; every class in [0, C) appears at least once."""
    config.validate()
    rng = np.random.default_rng(seed)
    roles = class_roles(config.n_classes)
    g = config.camera_height
    prims = []

    # Ground strips: contiguous x-bands over the full z range, no overlap.
    ground_classes = roles["ground"]
    if ground_classes:
        n_strips = max(config.n_strips, len(ground_classes))
        edges = np.sort(rng.uniform(-1.0, 1.0, n_strips - 1)) * config.ground_half_width
        edges = np.concatenate([[-config.ground_half_width], edges, [config.ground_half_width]])
        strip_classes = _cover_classes(rng, ground_classes, n_strips)
        z_lo, z_hi = config.ground_z_range
        for i in range(n_strips):
            x0, x1 = edges[i], edges[i + 1]
            if x1 - x0 < 0.2:  # keep strips visibly wide
                x1 = x0 + 0.2
            c = strip_classes[i]
            prims.append(
                ScenePrimitive(
                    kind=KIND_GROUND,
                    class_id=c,
                    position=(float((x0 + x1) / 2.0), float(g), float((z_lo + z_hi) / 2.0)),
                    extent=(float((x1 - x0) / 2.0), 0.01, float((z_hi - z_lo) / 2.0)),
                    albedo=_jitter_albedo(rng, c, config.n_classes),
                )
            )

    def place(z_range):
        z = rng.uniform(*z_range)
        x = rng.uniform(-0.55, 0.55) * z
        return x, z

    for c, lateral, height in _box_specs(rng, roles, config):
        x, z = place((4.5, 28.0))
        wx = rng.uniform(*lateral)
        wz = rng.uniform(*lateral)
        hy = rng.uniform(*height)
        prims.append(
            ScenePrimitive(
                kind=KIND_BOX,
                class_id=c,
                position=(float(x), float(g - hy), float(z)),
                extent=(float(wx), float(hy), float(wz)),
                albedo=_jitter_albedo(rng, c, config.n_classes),
            )
        )

    cyl_classes = roles["cylinder"]
    if cyl_classes:
        assigned = _cover_classes(rng, cyl_classes, config.n_cylinders)
        for c in assigned:
            x, z = place((4.0, 22.0))
            r = rng.uniform(0.14, 0.32)
            hy = rng.uniform(1.3, 2.3)
            prims.append(
                ScenePrimitive(
                    kind=KIND_CYLINDER,
                    class_id=c,
                    position=(float(x), float(g - hy), float(z)),
                    extent=(float(r), float(hy), float(r)),
                    albedo=_jitter_albedo(rng, c, config.n_classes),
                )
            )
    return prims


def _box_specs(rng, roles, config):
    """(class_id, lateral half-extent range, height half-extent range) per box."""
    large = roles["box-large"]
    small = roles["box-small"]
    specs = []
    if large or small:
        classes = _cover_classes(rng, large + small, config.n_boxes)
        for c in classes:
            if c in large:
                specs.append((c, (1.2, 2.4), (1.6, 2.9)))
            else:
                specs.append((c, (0.35, 0.75), (0.35, 0.65)))
    for _ in range(config.n_clutter):
        specs.append((0, (0.15, 0.45), (0.15, 0.40)))
    return specs


def _cover_classes(rng, classes, count):
    """`count` draws from `classes`, guaranteed to include each at least once."""
    out = list(classes) + [int(rng.choice(classes)) for _ in range(count - len(classes))]
    rng.shuffle(out)
    return out


def _jitter_albedo(rng, class_id, n_classes):
    base = class_albedo(class_id, n_classes)
    rgb = np.clip(base + rng.uniform(-0.07, 0.07, 3), 0.02, 0.98)
    return tuple(float(v) for v in rgb)


# ---------------------------------------------------------------------------
# Ray casting
# ---------------------------------------------------------------------------

def first_hit(world: list, dirs: np.ndarray):
    """Nearest positive-t intersection per ray (origin = camera center).

    Rays are o = 0, p(t) = t * d with d_z kept at 1 by callers so t is the
    camera-frame depth.  Cylinders are open tubes (side surface only).
    Returns (t, prim_index, hit_mask); t is +inf and index -1 where no hit.
    """
    if not world:
        raise ContractError("world is empty")
    d = np.asarray(dirs, dtype=np.float64)
    m = d.shape[0]
    best_t = np.full(m, np.inf)
    best_i = np.full(m, -1, dtype=np.int64)
    with np.errstate(divide="ignore", invalid="ignore"):
        for i, p in enumerate(world):
            t = _intersect(p, d)
            closer = t < best_t
            best_t[closer] = t[closer]
            best_i[closer] = i
    return best_t, best_i, best_i >= 0


def _intersect(p: ScenePrimitive, d: np.ndarray) -> np.ndarray:
    px, py, pz = p.position
    ex, ey, ez = p.extent
    t = np.full(d.shape[0], np.inf)
    if p.kind == KIND_GROUND:
        dy = d[:, 1]
        tc = py / dy
        ok = (dy > _T_EPS) & (tc > _T_EPS)
        hx = tc * d[:, 0]
        hz = tc * d[:, 2]
        ok &= (np.abs(hx - px) <= ex) & (np.abs(hz - pz) <= ez)
        t[ok] = tc[ok]
    elif p.kind == KIND_BOX:
        lo = np.array([px - ex, py - ey, pz - ez])
        hi = np.array([px + ex, py + ey, pz + ez])
        t1 = lo / d
        t2 = hi / d
        tnear = np.minimum(t1, t2).max(axis=1)
        tfar = np.maximum(t1, t2).min(axis=1)
        ok = (tnear <= tfar) & (tnear > _T_EPS)
        t[ok] = tnear[ok]
    elif p.kind == KIND_CYLINDER:
        r = ex
        a = d[:, 0] ** 2 + d[:, 2] ** 2
        b = d[:, 0] * px + d[:, 2] * pz
        c0 = px * px + pz * pz - r * r
        disc = b * b - a * c0
        root = np.sqrt(np.maximum(disc, 0.0))
        for tc in ((b - root) / a, (b + root) / a):
            hy = tc * d[:, 1]
            ok = (disc >= 0) & (a > _T_EPS) & (tc > _T_EPS) & (np.abs(hy - py) <= ey)
            ok &= tc < t
            t[ok] = tc[ok]
    else:
        raise ContractError(f"unknown primitive kind {p.kind!r}")
    return t


def _pixel_ray_dirs(rows, cols, camera: CameraIntrinsics):
    cx, cy = camera.principal_point
    f = camera.focal
    d = np.stack(
        [(cols - cx) / f, (rows - cy) / f, np.ones_like(rows, dtype=np.float64)],
        axis=1,
    )
    return d


# ---------------------------------------------------------------------------
# Rendering and LiDAR sampling
# ---------------------------------------------------------------------------

def render_image(world, camera, domain, seed, config: SceneGenConfig):
    """Ray-cast label map + image under the domain's palette, plus bounded noise.

    The label map depends only on geometry; noise and palette touch color only,
    so source/target renders of one world share label maps exactly.
    """
    if not world:
        raise ContractError("world is empty")
    h, w = camera.image_size
    rr, cc = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    dirs = _pixel_ray_dirs(rr.ravel(), cc.ravel(), camera)
    _, idx, hit = first_hit(world, dirs)

    classes = np.array([p.class_id for p in world], dtype=np.int64)
    albedos = np.array([p.albedo for p in world], dtype=np.float64)
    labels = np.zeros(h * w, dtype=np.int64)
    labels[hit] = classes[idx[hit]]
    base = np.tile(SKY_ALBEDO, (h * w, 1))
    base[hit] = albedos[idx[hit]]

    mat, scale, offset = domain_palette(domain, config)
    color = np.clip(base @ mat.T * scale + offset, 0.0, 1.0)
    if config.noise_amplitude > 0:
        rng = np.random.default_rng(seed)
        color = color + rng.uniform(-config.noise_amplitude, config.noise_amplitude, color.shape)
        color = np.clip(color, 0.0, 1.0)
    return color.reshape(h, w, 3), labels.reshape(h, w)


def lidar_grid(n_rays: int, image_size) -> tuple:
    """Evenly spaced pixel rows x cols whose centers carry the LiDAR rays."""
    h, w = image_size
    if n_rays <= 0:
        raise ConfigurationError("n_rays must be positive")
    n_el = int(np.floor(np.sqrt(n_rays * h / w)))
    n_el = min(max(n_el, 1), h)
    n_az = min(max(n_rays // n_el, 1), w)
    rows = np.floor(np.linspace(0, h - 1, n_el) + 0.5).astype(np.int64)
    cols = np.floor(np.linspace(0, w - 1, n_az) + 0.5).astype(np.int64)
    return rows, cols


def sample_lidar(world, camera, n_rays, seed):
    """Cast the regular ray fan; keep first hits (all inside the frustum).

    Returns (points (N,3), gt_point_labels (N,), pixel_of_point (N,2)).
    The `seed` identifies the scene in error messages; the fan itself is
    deterministic and needs no randomness.
    """
    rows, cols = lidar_grid(n_rays, camera.image_size)
    rg, cg = np.meshgrid(rows.astype(np.float64), cols.astype(np.float64), indexing="ij")
    dirs = _pixel_ray_dirs(rg.ravel(), cg.ravel(), camera)
    t, idx, hit = first_hit(world, dirs)
    if not np.any(hit):
        raise GenerationError(f"scene (seed {seed}) produced no LiDAR returns")
    points = t[hit, None] * dirs[hit]
    classes = np.array([p.class_id for p in world], dtype=np.int64)
    gt = classes[idx[hit]]
    pix, in_view = project_points(points, camera)
    if not np.all(in_view):  # rays start at pixel centers, so this cannot fire
        raise GenerationError(f"scene (seed {seed}) projected a point out of view")
    return points, gt, pix


# ---------------------------------------------------------------------------
# Scene containers
# ---------------------------------------------------------------------------

@dataclass
class SourceSample:
    image: np.ndarray  # (H, W, 3) in [0, 1]
    labels: np.ndarray  # (H, W) int
    domain_tag: str = "source"


@dataclass
class TargetScene:
    """Unlabeled image + LiDAR pair; ground truth is evaluation-only.

    The underscore fields are hidden from training code by convention and by
    test: only `eval_report.ground_truth_*` reads them.
    """

    image: np.ndarray
    points: np.ndarray  # (N, 3)
    pixel_of_point: np.ndarray  # (N, 2) int
    _gt_point_labels: np.ndarray = field(repr=False, default=None)
    _gt_pixel_labels: np.ndarray = field(repr=False, default=None)


def _scene_seed(base_seed: int, split: str, index: int, purpose: int) -> int:
    ss = np.random.SeedSequence([int(base_seed), hash_split(split), int(index), purpose])
    return int(ss.generate_state(1)[0])


def hash_split(split: str) -> int:
    return sum((i + 1) * b for i, b in enumerate(split.encode())) % (2**31)


def make_source_sample(base_seed, split, index, config) -> SourceSample:
    camera = make_camera(config)
    world = generate_world(_scene_seed(base_seed, split, index, 0), config)
    image, labels = render_image(world, camera, "source", _scene_seed(base_seed, split, index, 1), config)
    return SourceSample(image=image, labels=labels)


def make_target_scene(base_seed, split, index, config) -> TargetScene:
    camera = make_camera(config)
    world = generate_world(_scene_seed(base_seed, split, index, 0), config)
    image, labels = render_image(world, camera, "target", _scene_seed(base_seed, split, index, 1), config)
    points, gt, pix = sample_lidar(world, camera, config.n_rays, _scene_seed(base_seed, split, index, 2))
    return TargetScene(
        image=image,
        points=points,
        pixel_of_point=pix,
        _gt_point_labels=gt,
        _gt_pixel_labels=labels,
    )
