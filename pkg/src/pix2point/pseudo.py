"""Pseudo-label machinery for the target domain.

Per-point labels come from argmaxing 2D predictions sampled at projected
point locations.  Two producers are fused by max softmax confidence (ties go
to the in-training model), yielding the hybrid labels that supervise the 3D
net.  Class prototypes average the pre-softmax 3D predictions of points
sharing a pseudo-label; mixed-image alignment targets are prototypes at
source-patch pixels and raw point predictions elsewhere.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ContractError, NumericError
from .losses import softmax

PROV_ONLINE = 0
PROV_PRETRAINED = 1
PROV_TEACHER = 2


@dataclass
class PointPseudoLabels:
    labels: np.ndarray  # (N,) int
    confidence: np.ndarray  # (N,) max softmax probability of the producer
    provenance: np.ndarray  # (N,) PROV_* codes


@dataclass
class ClassPrototypes:
    values: np.ndarray  # (C, C) pre-softmax score vector per class
    support: np.ndarray  # (C,) point counts; 0 marks the prototype absent

    def present(self):
        return self.support > 0


def argmax_labels(point_logits, provenance=PROV_ONLINE) -> PointPseudoLabels:
    """Per-row argmax label + max-softmax confidence; ties break to the lowest class."""
    z = np.asarray(point_logits)
    if z.ndim != 2:
        raise ContractError(f"logits must be (N, C), got {z.shape}")
    if z.size and not np.isfinite(z).all():
        raise NumericError("argmax_labels received non-finite logits")
    labels = z.argmax(axis=1)
    conf = softmax(z).max(axis=1) if z.shape[0] else np.zeros(0, dtype=z.dtype)
    prov = np.full(z.shape[0], provenance, dtype=np.int8)
    return PointPseudoLabels(labels=labels.astype(np.int64), confidence=conf, provenance=prov)


def hybrid_fuse(online: PointPseudoLabels, pretrained: PointPseudoLabels) -> PointPseudoLabels:
    """Per point, keep the online label iff its confidence >= the pretrained one."""
    if online.labels.shape != pretrained.labels.shape:
        raise ContractError(
            f"label lengths differ: {online.labels.shape} vs {pretrained.labels.shape}"
        )
    take_online = online.confidence >= pretrained.confidence
    labels = np.where(take_online, online.labels, pretrained.labels)
    conf = np.where(take_online, online.confidence, pretrained.confidence)
    prov = np.where(take_online, PROV_ONLINE, PROV_PRETRAINED).astype(np.int8)
    return PointPseudoLabels(labels=labels, confidence=conf, provenance=prov)


def class_prototypes(point_logits, pseudo: PointPseudoLabels, n_classes=None) -> ClassPrototypes:
    """Mean pre-softmax row per pseudo-label class; zero support marks absence."""
    z = np.asarray(point_logits)
    if z.ndim != 2 or z.shape[0] < 1:
        raise ContractError(f"need at least one (N, C) logit row, got {z.shape}")
    if z.shape[0] != pseudo.labels.shape[0]:
        raise ContractError(
            f"{z.shape[0]} logit rows but {pseudo.labels.shape[0]} pseudo-labels"
        )
    c = int(n_classes) if n_classes is not None else z.shape[1]
    values = np.zeros((c, z.shape[1]), dtype=z.dtype)
    support = np.zeros(c, dtype=np.int64)
    np.add.at(values, pseudo.labels, z)
    np.add.at(support, pseudo.labels, 1)
    nz = support > 0
    values[nz] /= support[nz, None]
    return ClassPrototypes(values=values, support=support)


def assemble_alignment_targets(prototypes: ClassPrototypes, point_logits, mixed):
    """Targets for mixed-image mimicry at the projected point pixels.

    Where the mask took the source pixel: target = prototype of the source
    label there, valid only if that prototype has support.  Elsewhere:
    target = the point's own 3D prediction, always valid.
    """
    z = np.asarray(point_logits)
    n = z.shape[0]
    mask = np.asarray(mixed.mask_at_points).astype(bool)
    src_lab = np.asarray(mixed.source_labels_at_points)
    if mask.shape != (n,) or src_lab.shape != (n,):
        raise ContractError(
            f"{n} points but mask_at_points {mask.shape}, source labels {src_lab.shape}"
        )
    targets = z.copy()
    valid = np.ones(n, dtype=bool)
    if mask.any():
        lab = src_lab[mask]
        targets[mask] = prototypes.values[lab]
        valid[mask] = prototypes.support[lab] > 0
    return targets, valid


def icd_pixel_targets(prototypes, point_logits, mixed, select="projection", align="both", rng=None):
    """Pixel set + targets for the mixed-image loss under a source-pixel policy.

    select='projection': constrain only the projected point pixels (both mask
    branches).  'random': keep the point-to-pixel rows but move the
    source-side constraint to randomly drawn source-region pixels, matching
    the projected count.  'all': constrain every source-region pixel.
    align='mix_only' drops the source-side (prototype) constraint entirely;
    the prototype-only ablation is its mirror and is realized upstream with an
    all-ones mask.  Returns (pixels (M, 2), targets (M, C), valid (M,)).
    """
    if align not in ("both", "mix_only"):
        raise ConfigurationError(f"unknown alignment mode {align!r}")
    scene = mixed.parent_target
    targets, valid = assemble_alignment_targets(prototypes, point_logits, mixed)
    mask_pts = np.asarray(mixed.mask_at_points).astype(bool)
    if select == "projection":
        if align == "mix_only":
            valid = valid & ~mask_pts
        return scene.pixel_of_point, targets, valid

    # Point-to-pixel branch (target-region pixels) is common to all variants.
    pix_t = scene.pixel_of_point[~mask_pts]
    tgt_t = targets[~mask_pts]
    val_t = valid[~mask_pts]

    src_labels = mixed.parent_source.labels
    in_region = np.flatnonzero(mixed.mask.mask.ravel() == 1)
    if align == "mix_only":
        chosen = in_region[:0]
    elif select == "all":
        chosen = in_region
    elif select == "random":
        want = int(mask_pts.sum())
        rng = np.random.default_rng(rng)
        if want == 0 or in_region.size == 0:
            chosen = in_region[:0]
        else:
            chosen = rng.choice(in_region, size=min(want, in_region.size), replace=False)
    else:
        raise ConfigurationError(f"unknown pixel-select policy {select!r}")

    w = src_labels.shape[1]
    rows = chosen // w
    cols = chosen % w
    lab = src_labels[rows, cols]
    tgt_s = prototypes.values[lab]
    val_s = prototypes.support[lab] > 0
    pixels = np.concatenate([np.stack([rows, cols], axis=1), pix_t], axis=0)
    targets = np.concatenate([tgt_s, tgt_t], axis=0)
    valid = np.concatenate([val_s, val_t], axis=0)
    return pixels, targets, valid
