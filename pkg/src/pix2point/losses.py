"""Scalar objectives with their logit-space gradients.

Every loss returns a LossReport carrying the value, the number of rows that
contributed, and the gradient with respect to its (first) logits argument.
Zero contributing rows means value 0 and zero gradient, so disabled or empty
terms are exact no-ops downstream.

Cross-entropy is averaged over rows; KL divergence is averaged over the
contributing rows.  This keeps the loss weights scale-free in the number of
points (deliberate normalization; otherwise term magnitudes would grow with
scene size).
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ContractError, NumericError


@dataclass
class LossReport:
    name: str
    value: float
    count: int
    grad: np.ndarray  # d value / d first-logits argument
    grad_q: np.ndarray = None  # d value / d second argument; None when detached


@dataclass
class TotalLoss:
    name: str
    value: float
    grads: dict  # term name -> gradient already scaled by its weight


def softmax(logits):
    """Row-wise softmax with max subtraction; rows sum to 1."""
    z = np.asarray(logits)
    if z.size and not np.isfinite(z).all():
        raise NumericError("softmax received non-finite logits")
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits):
    z = np.asarray(logits)
    if z.size and not np.isfinite(z).all():
        raise NumericError("log_softmax received non-finite logits")
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def _empty_report(name, like):
    z = np.zeros_like(np.asarray(like))
    return LossReport(name=name, value=0.0, count=0, grad=z)


def cross_entropy(logits, labels, weights=None, name="ce") -> LossReport:
    """Mean over rows of -log softmax(logits)[label]; grad = (softmax - onehot)/M."""
    z = np.asarray(logits)
    if z.ndim != 2:
        raise ContractError(f"logits must be (M, C), got {z.shape}")
    m, c = z.shape
    if m == 0:
        return _empty_report(name, z)
    lab = np.asarray(labels)
    if lab.shape != (m,):
        raise ContractError(f"{m} logit rows but labels shaped {lab.shape}")
    if lab.min() < 0 or lab.max() >= c:
        bad = int(lab[(lab < 0) | (lab >= c)][0])
        raise ContractError(f"label {bad} outside [0, {c})")
    lsm = log_softmax(z)
    rows = np.arange(m)
    nll = -lsm[rows, lab]
    p = np.exp(lsm)
    grad = p.copy()
    grad[rows, lab] -= 1.0
    if weights is not None:
        wvec = np.asarray(weights, dtype=z.dtype)
        if wvec.shape != (m,):
            raise ContractError(f"weights shaped {wvec.shape} for {m} rows")
        nll = nll * wvec
        grad = grad * wvec[:, None]
    value = float(nll.sum() / m)
    grad = grad / m
    return LossReport(name=name, value=value, count=m, grad=grad)


def kl_pointwise(p_logits, q_logits, detach_q=True, name="kl") -> LossReport:
    """Mean over rows of KL(softmax(p) || softmax(q)).

    The gradient with respect to p_logits is always returned; the gradient
    with respect to q_logits only when detach_q is False (grad_q is None
    otherwise, so detachment is visible in the report, not just numerically).
    """
    zp = np.asarray(p_logits)
    zq = np.asarray(q_logits)
    if zp.shape != zq.shape or zp.ndim != 2:
        raise ContractError(f"logit shapes differ: {zp.shape} vs {zq.shape}")
    m = zp.shape[0]
    if m == 0:
        return _empty_report(name, zp)
    lp = log_softmax(zp)
    lq = log_softmax(zq)
    p = np.exp(lp)
    diff = lp - lq
    per_row = (p * diff).sum(axis=1)
    value = float(per_row.sum() / m)
    grad_p = p * (diff - per_row[:, None]) / m
    report = LossReport(name=name, value=value, count=m, grad=grad_p)
    if not detach_q:
        q = np.exp(lq)
        report.grad_q = (q - p) / m
    return report


def loss_2d_t(mimicry_logits_at_points, point_logits_3d) -> LossReport:
    """2D mimicry (sampled at points) learns the 3D point predictions; 3D side detached."""
    return kl_pointwise(mimicry_logits_at_points, point_logits_3d, detach_q=True, name="2d_t")


def loss_2d_m(mimicry_logits_at_points, targets, valid) -> LossReport:
    """Mixed-image mimicry against assembled prototype/point targets.

    Invalid rows (absent prototypes) are excluded; count reflects only the
    rows that contributed.  The gradient keeps the full (N, C) shape with
    zero rows where invalid.
    """
    z = np.asarray(mimicry_logits_at_points)
    t = np.asarray(targets)
    v = np.asarray(valid, dtype=bool)
    if z.shape != t.shape or v.shape != (z.shape[0],):
        raise ContractError(
            f"shapes disagree: logits {z.shape}, targets {t.shape}, valid {v.shape}"
        )
    inner = kl_pointwise(z[v], t[v], detach_q=True, name="2d_m")
    grad = np.zeros_like(z)
    grad[v] = inner.grad
    return LossReport(name="2d_m", value=inner.value, count=inner.count, grad=grad)


def loss_3d_t(point_logits, hybrid) -> LossReport:
    """Point classifier vs per-point pseudo-labels (cross-entropy)."""
    z = np.asarray(point_logits)
    if z.shape[0] != hybrid.labels.shape[0]:
        raise ContractError(
            f"{z.shape[0]} logit rows but {hybrid.labels.shape[0]} pseudo-labels"
        )
    rep = cross_entropy(z, hybrid.labels, name="3d_t")
    return rep


def loss_3d_m(mixed_logits, mixed_cloud) -> LossReport:
    """Point classifier on a merged cloud vs its merged label vector."""
    z = np.asarray(mixed_logits)
    if z.shape[0] != mixed_cloud.labels.shape[0]:
        raise ContractError(
            f"{z.shape[0]} logit rows but {mixed_cloud.labels.shape[0]} merged labels"
        )
    return cross_entropy(z, mixed_cloud.labels, name="3d_m")


def _check_weight(name, lam):
    if lam < 0:
        raise ConfigurationError(f"{name} must be non-negative, got {lam}")


def total_2d(rep_s, rep_t, rep_m, lam_t, lam_m) -> TotalLoss:
    """Weighted 2D objective: source CE + lam_t * point KL + lam_m * mixed KL.

    Missing terms (None) contribute 0.  Gradients are returned per term,
    already scaled, because each lives in a different forward pass.
    """
    _check_weight("lambda_2d_t", lam_t)
    _check_weight("lambda_2d_m", lam_m)
    value = 0.0
    grads = {}
    if rep_s is not None:
        value += rep_s.value
        grads["2d_s"] = rep_s.grad
    if rep_t is not None:
        value += lam_t * rep_t.value
        grads["2d_t"] = lam_t * rep_t.grad
    if rep_m is not None:
        value += lam_m * rep_m.value
        grads["2d_m"] = lam_m * rep_m.grad
    return TotalLoss(name="total_2d", value=float(value), grads=grads)


def total_3d(rep_t, rep_m, lam_m) -> TotalLoss:
    """Weighted 3D objective: pseudo-label CE + lam_m * mixed-cloud CE."""
    _check_weight("lambda_3d_m", lam_m)
    value = 0.0
    grads = {}
    if rep_t is not None:
        value += rep_t.value
        grads["3d_t"] = rep_t.grad
    if rep_m is not None:
        value += lam_m * rep_m.value
        grads["3d_m"] = lam_m * rep_m.grad
    return TotalLoss(name="total_3d", value=float(value), grads=grads)
