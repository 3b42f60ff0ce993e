"""Per-sample losses: cross-entropy, symmetric KL, and the joint objective.

Scalar operations mirror the per-sample definitions; the *_batch variants
vectorize them over (n, M) probability matrices and are what the training
loops call. The make_*_loss_fn closures adapt each loss to the callback
signature of network.gradient, returning per-sample losses together with
their derivatives w.r.t. the probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# clamp applied before every log; keeps saturated softmax outputs finite
# while staying far below any test tolerance
PROB_FLOOR = 1e-12


@dataclass
class PeerPredictions:
    """One sample's class-probability vectors from two peer networks."""

    probs_net1: np.ndarray
    probs_net2: np.ndarray

    def __post_init__(self) -> None:
        self.probs_net1 = np.asarray(self.probs_net1, dtype=np.float64)
        self.probs_net2 = np.asarray(self.probs_net2, dtype=np.float64)
        if self.probs_net1.shape != self.probs_net2.shape or self.probs_net1.ndim != 1:
            raise ValueError("peer predictions must be 1-d vectors of equal length")
        for name, p in (("probs_net1", self.probs_net1), ("probs_net2", self.probs_net2)):
            if abs(float(p.sum()) - 1.0) > 1e-9:
                raise ValueError(f"{name} does not sum to 1 within 1e-9")


def _floor(probs: np.ndarray) -> np.ndarray:
    return np.maximum(probs, PROB_FLOOR)


def _check_labels(labels: np.ndarray, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        bad = int(np.argmax((labels < 0) | (labels >= n_classes)))
        raise ValueError(
            f"label {int(labels[bad])} at position {bad} outside [0, {n_classes - 1}]"
        )
    return labels.astype(np.intp)


def ce_batch(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """-log(probs[i, labels[i]]) for each row, with the probability floor."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = _check_labels(labels, probs.shape[1])
    picked = _floor(probs[np.arange(probs.shape[0]), labels])
    return -np.log(picked)


def per_sample_ce(probs: np.ndarray, label: int) -> float:
    return float(ce_batch(np.asarray(probs, dtype=np.float64)[None, :], [label])[0])


def coteaching_pair_loss(pp: PeerPredictions, label: int) -> tuple[float, float]:
    """Cross-entropy of each peer; the pair sums to the combined supervised loss."""
    return per_sample_ce(pp.probs_net1, label), per_sample_ce(pp.probs_net2, label)


def symmetric_kl_batch(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Row-wise D_KL(p||q) + D_KL(q||p), both arguments floored before logs."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {q.shape}")
    pf, qf = _floor(p), _floor(q)
    log_p, log_q = np.log(pf), np.log(qf)
    # per-entry pair summed first so kl(p,q) == kl(q,p) bitwise
    terms = pf * (log_p - log_q) + qf * (log_q - log_p)
    return terms.sum(axis=1)


def symmetric_kl(p: np.ndarray, q: np.ndarray) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.ndim != 1 or q.ndim != 1:
        raise ValueError("symmetric_kl expects 1-d probability vectors")
    return float(symmetric_kl_batch(p[None, :], q[None, :])[0])


def jocor_batch(probs1: np.ndarray, probs2: np.ndarray, labels: np.ndarray,
                lambda_weight: float) -> np.ndarray:
    """(1-lambda)*(ce1 + ce2) + lambda*symmetric_kl, per sample."""
    if not 0.0 <= lambda_weight <= 1.0:
        raise ValueError(f"lambda_weight {lambda_weight} outside [0, 1]")
    ce = ce_batch(probs1, labels) + ce_batch(probs2, labels)
    return (1.0 - lambda_weight) * ce + lambda_weight * symmetric_kl_batch(probs1, probs2)


def jocor_per_sample_loss(pp: PeerPredictions, label: int, lambda_weight: float) -> float:
    return float(jocor_batch(pp.probs_net1[None, :], pp.probs_net2[None, :],
                             [label], lambda_weight)[0])


def _ce_prob_grad(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """d(ce)/d(probs); zero wherever the floor clamps."""
    grad = np.zeros_like(probs)
    rows = np.arange(probs.shape[0])
    picked = probs[rows, labels]
    active = picked > PROB_FLOOR
    grad[rows[active], labels[active]] = -1.0 / picked[active]
    return grad


def _symmetric_kl_prob_grad(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """d(symmetric_kl)/dp with q held constant; zero where the floor clamps p."""
    pf, qf = _floor(p), _floor(q)
    grad = np.log(pf) - np.log(qf) + 1.0 - qf / pf
    grad[p <= PROB_FLOOR] = 0.0
    return grad


def make_ce_loss_fn(labels: np.ndarray):
    """Loss callback for network.gradient: plain supervised cross-entropy."""
    labels = np.asarray(labels)

    def loss_fn(probs: np.ndarray):
        checked = _check_labels(labels, probs.shape[1])
        return ce_batch(probs, checked), _ce_prob_grad(probs, checked)

    return loss_fn


def make_joint_loss_fn(other_probs: np.ndarray, labels: np.ndarray, lambda_weight: float):
    """Loss callback for one peer's update under the joint objective.

    The other network's probabilities enter as constants: the returned
    per-sample values are the full joint loss, but only the calling
    network's probabilities carry gradient.
    """
    other_probs = np.asarray(other_probs, dtype=np.float64)
    labels = np.asarray(labels)

    def loss_fn(probs: np.ndarray):
        checked = _check_labels(labels, probs.shape[1])
        losses = jocor_batch(probs, other_probs, checked, lambda_weight)
        grad = (1.0 - lambda_weight) * _ce_prob_grad(probs, checked)
        grad += lambda_weight * _symmetric_kl_prob_grad(probs, other_probs)
        return losses, grad

    return loss_fn
