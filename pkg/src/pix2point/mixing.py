"""Mixed-sample construction in both modalities.

2D: paste a masked region of a labeled source image onto a target image
(mixed = mask * source + (1 - mask) * target, elementwise), carrying along
the source labels and mask values gathered at the target's projected point
locations.  3D: merge two target point clouds by plain concatenation, each
half keeping its own label vector.
"""

import numpy as np

from .errors import ConfigurationError, ContractError
from .geometry import sample_at_points
from dataclasses import dataclass


@dataclass
class MixMask:
    mask: np.ndarray  # (H, W) in {0, 1}; 1 = take source pixel
    kind: str  # "region" | "class"


@dataclass
class MixedImageSample:
    image: np.ndarray
    mask: MixMask
    source_labels_at_points: np.ndarray  # (N,)
    mask_at_points: np.ndarray  # (N,) in {0, 1}
    parent_target: object  # TargetScene supplying points
    parent_source: object  # SourceSample supplying the pasted pixels


@dataclass
class MixedCloudSample:
    points: np.ndarray  # (N_i + N_j, 3)
    labels: np.ndarray  # (N_i + N_j,)
    boundary: int  # N_i: first half is scene i, remainder scene j


def make_region_mask(h, w, rng, area_range=(0.2, 0.5)) -> MixMask:
    """One axis-aligned rectangle; area fraction uniform in [lo, hi].

    `rng` may be a seed or a numpy Generator (callers own randomness).
    """
    lo, hi = area_range
    if not (0 < lo <= hi < 1):
        raise ConfigurationError(f"area range must satisfy 0 < lo <= hi < 1, got {area_range}")
    rng = np.random.default_rng(rng)
    while True:
        frac = rng.uniform(lo, hi)
        aspect = rng.uniform(0.5, 2.0)
        area = frac * h * w
        bw = int(np.clip(np.floor(np.sqrt(area * aspect) + 0.5), 1, w))
        bh = int(np.clip(np.floor(area / bw + 0.5), 1, h))
        if bw * bh < 1:  # unreachable with the clips, kept as a guard
            continue
        top = int(rng.integers(0, h - bh + 1))
        left = int(rng.integers(0, w - bw + 1))
        mask = np.zeros((h, w), dtype=np.int64)
        mask[top : top + bh, left : left + bw] = 1
        return MixMask(mask=mask, kind="region")


def make_class_mask(source_labels, chosen_classes=None, rng=None) -> MixMask:
    """Mask = 1 exactly where the source label is in the chosen class set.

    Default selection: half the classes present in the image, drawn uniformly
    without replacement.
    """
    labels = np.asarray(source_labels)
    present = np.unique(labels)
    if chosen_classes is None:
        rng = np.random.default_rng(rng)
        k = max(1, len(present) // 2)
        chosen_classes = rng.choice(present, size=k, replace=False)
    chosen = np.asarray(sorted(int(c) for c in np.atleast_1d(chosen_classes)))
    if chosen.size == 0:
        raise ConfigurationError("chosen_classes must be non-empty")
    mask = np.isin(labels, chosen).astype(np.int64)
    if not mask.any():
        raise ConfigurationError(f"classes {chosen.tolist()} absent from the source labels")
    return MixMask(mask=mask, kind="class")


def cutmix_images(source, target, mask: MixMask) -> MixedImageSample:
    """Compose mixed = M*source + (1-M)*target and gather per-point side data."""
    if source.image.shape != target.image.shape:
        raise ConfigurationError(
            f"source {source.image.shape} and target {target.image.shape} shapes differ"
        )
    if mask.mask.shape != source.image.shape[:2]:
        raise ConfigurationError(
            f"mask {mask.mask.shape} does not match image {source.image.shape[:2]}"
        )
    m = mask.mask[:, :, None].astype(source.image.dtype)
    image = m * source.image + (1 - m) * target.image
    return MixedImageSample(
        image=image,
        mask=mask,
        source_labels_at_points=sample_at_points(source.labels, target.pixel_of_point),
        mask_at_points=sample_at_points(mask.mask, target.pixel_of_point),
        parent_target=target,
        parent_source=source,
    )


def mix_pointclouds(scene_i, labels_i, scene_j, labels_j) -> MixedCloudSample:
    """Concatenate two clouds (i then j); no deduplication or resampling.

    labels_i are the 2D-derived pseudo-labels of scene i; labels_j come from
    the 3D teacher on scene j.
    """
    li = np.asarray(labels_i)
    lj = np.asarray(labels_j)
    if li.shape[0] != scene_i.points.shape[0]:
        raise ContractError(
            f"scene i has {scene_i.points.shape[0]} points but {li.shape[0]} labels"
        )
    if lj.shape[0] != scene_j.points.shape[0]:
        raise ContractError(
            f"scene j has {scene_j.points.shape[0]} points but {lj.shape[0]} labels"
        )
    return MixedCloudSample(
        points=np.concatenate([scene_i.points, scene_j.points], axis=0),
        labels=np.concatenate([li, lj], axis=0),
        boundary=int(li.shape[0]),
    )


def pair_batch(batch_indices, rng):
    """Partner j(i) drawn uniformly from the batch excluding i itself."""
    idx = list(batch_indices)
    b = len(idx)
    if b < 2:
        raise ConfigurationError(f"batch of {b} cannot be paired (need >= 2)")
    rng = np.random.default_rng(rng)
    partners = []
    for i in range(b):
        k = int(rng.integers(0, b - 1))
        if k >= i:
            k += 1
        partners.append(idx[k])
    return partners
