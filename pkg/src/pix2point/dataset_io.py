"""Dataset directory layout and binary formats.

    <root>/manifest.txt
    <root>/scenes/<split>/<index>.img      binary PPM (P6, maxval 255)
    <root>/scenes/<split>/<index>.labels   row-major u8 class ids, H*W bytes
    <root>/scenes/<split>/<index>.points   little-endian: u32 N, N*3 f32 xyz,
                                           N*2 u16 (row, col), N*1 u8 gt label

2D splits carry .img + .labels; 3D splits add .points.  For 3D splits the
.labels file holds the ground-truth pixel map, which loaders hide behind the
TargetScene underscore fields (evaluation-only).
"""

import os
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .scene_synth import SceneGenConfig, SourceSample, TargetScene, make_source_sample, make_target_scene

DEFAULT_SPLITS = {
    "source": (200, "2d"),
    "target": (200, "3d"),
    "eval": (50, "3d"),
    "val_source": (25, "2d"),
}


def save_ppm(path, image01):
    img = np.asarray(image01, dtype=np.float64)
    h, w = img.shape[:2]
    data = np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(data.tobytes())


def load_ppm(path):
    with open(path, "rb") as f:
        magic = f.readline().strip()
        if magic != b"P6":
            raise DataError(f"{path}: not a binary PPM")
        dims = f.readline().split()
        maxval = int(f.readline())
        w, h = int(dims[0]), int(dims[1])
        raw = f.read(h * w * 3)
    if len(raw) != h * w * 3:
        raise DataError(f"{path}: truncated pixel data")
    img = np.frombuffer(raw, dtype=np.uint8).reshape(h, w, 3)
    return img.astype(np.float64) / float(maxval)


def save_labels(path, labels):
    lab = np.asarray(labels)
    if lab.max(initial=0) > 255 or lab.min(initial=0) < 0:
        raise DataError("labels do not fit in u8")
    with open(path, "wb") as f:
        f.write(lab.astype(np.uint8).tobytes())


def load_labels(path, h, w):
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size != h * w:
        raise DataError(f"{path}: expected {h * w} label bytes, found {raw.size}")
    return raw.reshape(h, w).astype(np.int64)


def save_points(path, points, pixel_of_point, gt_labels):
    pts = np.asarray(points, dtype="<f4")
    pix = np.asarray(pixel_of_point)
    gt = np.asarray(gt_labels)
    n = pts.shape[0]
    if pix.shape != (n, 2) or gt.shape != (n,):
        raise DataError("points/pixels/labels length mismatch")
    with open(path, "wb") as f:
        f.write(np.asarray([n], dtype="<u4").tobytes())
        f.write(pts.tobytes())
        f.write(pix.astype("<u2").tobytes())
        f.write(gt.astype(np.uint8).tobytes())


def load_points(path):
    raw = open(path, "rb").read()
    n = int(np.frombuffer(raw[:4], dtype="<u4")[0])
    need = 4 + n * (12 + 4 + 1)
    if len(raw) != need:
        raise DataError(f"{path}: expected {need} bytes for {n} points, found {len(raw)}")
    off = 4
    pts = np.frombuffer(raw, dtype="<f4", count=n * 3, offset=off).reshape(n, 3).astype(np.float64)
    off += n * 12
    pix = np.frombuffer(raw, dtype="<u2", count=n * 2, offset=off).reshape(n, 2).astype(np.int64)
    off += n * 4
    gt = np.frombuffer(raw, dtype=np.uint8, count=n, offset=off).astype(np.int64)
    return pts, pix, gt


@dataclass
class DatasetMeta:
    n_classes: int
    image_size: tuple
    seed: int
    focal: float
    splits: dict  # name -> (count, kind)


@dataclass
class Dataset:
    meta: DatasetMeta
    splits: dict  # name -> list of SourceSample / TargetScene

    def source(self):
        return self.splits["source"]

    def target(self):
        return self.splits["target"]


def write_manifest(path, config: SceneGenConfig, seed, splits):
    h, w = config.image_size
    lines = [
        "# pix2point dataset manifest",
        f"classes = {config.n_classes}",
        f"height = {h}",
        f"width = {w}",
        f"seed = {seed}",
        f"focal = {config.focal!r}",
    ]
    for name, (count, kind) in splits.items():
        lines.append(f"split {name} {count} {kind}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def read_manifest(path):
    if not os.path.exists(path):
        raise DataError(f"missing manifest: {path}")
    vals = {}
    splits = {}
    for line in open(path):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("split "):
            _, name, count, kind = line.split()
            splits[name] = (int(count), kind)
        else:
            key, _, value = line.partition("=")
            vals[key.strip()] = value.strip()
    try:
        return DatasetMeta(
            n_classes=int(vals["classes"]),
            image_size=(int(vals["height"]), int(vals["width"])),
            seed=int(vals["seed"]),
            focal=float(vals["focal"]),
            splits=splits,
        )
    except KeyError as e:
        raise DataError(f"manifest missing key {e}")


def write_dataset(root, config: SceneGenConfig, seed: int, splits=None) -> DatasetMeta:
    """Generate every scene and write the directory layout. Deterministic in (seed, config)."""
    config.validate()
    splits = dict(DEFAULT_SPLITS if splits is None else splits)
    os.makedirs(root, exist_ok=True)
    for name, (count, kind) in splits.items():
        d = os.path.join(root, "scenes", name)
        os.makedirs(d, exist_ok=True)
        for i in range(count):
            if kind == "2d":
                s = make_source_sample(seed, name, i, config)
                save_ppm(os.path.join(d, f"{i}.img"), s.image)
                save_labels(os.path.join(d, f"{i}.labels"), s.labels)
            else:
                t = make_target_scene(seed, name, i, config)
                save_ppm(os.path.join(d, f"{i}.img"), t.image)
                save_labels(os.path.join(d, f"{i}.labels"), t._gt_pixel_labels)
                save_points(
                    os.path.join(d, f"{i}.points"),
                    t.points,
                    t.pixel_of_point,
                    t._gt_point_labels,
                )
    write_manifest(os.path.join(root, "manifest.txt"), config, seed, splits)
    return read_manifest(os.path.join(root, "manifest.txt"))


def load_dataset(root) -> Dataset:
    meta = read_manifest(os.path.join(root, "manifest.txt"))
    h, w = meta.image_size
    splits = {}
    for name, (count, kind) in meta.splits.items():
        d = os.path.join(root, "scenes", name)
        scenes = []
        for i in range(count):
            img_path = os.path.join(d, f"{i}.img")
            if not os.path.exists(img_path):
                raise DataError(f"missing scene file: {img_path}")
            image = load_ppm(img_path)
            labels = load_labels(os.path.join(d, f"{i}.labels"), h, w)
            if kind == "2d":
                scenes.append(SourceSample(image=image, labels=labels))
            else:
                pts, pix, gt = load_points(os.path.join(d, f"{i}.points"))
                scenes.append(
                    TargetScene(
                        image=image,
                        points=pts,
                        pixel_of_point=pix,
                        _gt_point_labels=gt,
                        _gt_pixel_labels=labels,
                    )
                )
        splits[name] = scenes
    return Dataset(meta=meta, splits=splits)
