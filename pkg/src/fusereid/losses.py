"""Classification, hinge-triplet and softmax-triplet losses with batch-hard mining.

Distances are stabilized as sqrt(squared + 1e-12) so gradients stay finite
when an anchor and its hardest positive coincide (the PK sampler may repeat an
image for identities with too few samples).
"""

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .errors import InputError

_DIST_EPS = 1e-12


@dataclass(frozen=True)
class LossWeights:
    """Weights of the total target objective and the triplet margin.

    ``reid_weight`` scales the classification-plus-triplet block,
    ``triplet_weight`` balances the triplet term against classification, and
    ``part_weight`` scales the sum of per-part softmax triplet losses.
    """

    reid_weight: float = 1.0
    triplet_weight: float = 0.5
    part_weight: float = 0.5
    margin: float = 0.3


@dataclass
class MiningResult:
    """Per-anchor hardest positive/negative indices and their L2 distances."""

    positive_idx: torch.Tensor
    negative_idx: torch.Tensor
    positive_dist: torch.Tensor
    negative_dist: torch.Tensor


def pairwise_sq_dists(embeddings: torch.Tensor) -> torch.Tensor:
    diff = embeddings.unsqueeze(1) - embeddings.unsqueeze(0)
    return diff.pow(2).sum(dim=-1)


def batch_hard_mine(embeddings: torch.Tensor, labels: torch.Tensor) -> MiningResult:
    """For each anchor, find the farthest same-label and nearest different-label sample.

    Requires at least two distinct labels and at least two samples per label.
    Ties resolve to the lowest index. The returned distances keep the autograd
    graph of ``embeddings``; the index selection itself is not differentiated.
    """
    if embeddings.dim() != 2 or labels.dim() != 1 or len(labels) != len(embeddings):
        raise InputError("expected (B,C) embeddings and (B,) labels")
    n = len(labels)
    same = labels.unsqueeze(0) == labels.unsqueeze(1)
    eye = torch.eye(n, dtype=torch.bool, device=labels.device)
    pos_mask = same & ~eye
    neg_mask = ~same
    if not bool(pos_mask.any(dim=1).all()):
        raise InputError("every label must appear at least twice in the batch")
    if not bool(neg_mask.any(dim=1).all()):
        raise InputError("batch must contain at least two distinct labels")

    sq = pairwise_sq_dists(embeddings)
    with torch.no_grad():
        flat = sq.detach()
        pos_idx = flat.masked_fill(~pos_mask, float("-inf")).argmax(dim=1)
        neg_idx = flat.masked_fill(~neg_mask, float("inf")).argmin(dim=1)
    rows = torch.arange(n, device=labels.device)
    pos_dist = (sq[rows, pos_idx] + _DIST_EPS).sqrt()
    neg_dist = (sq[rows, neg_idx] + _DIST_EPS).sqrt()
    return MiningResult(pos_idx, neg_idx, pos_dist, neg_dist)


def classification_loss(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Mean cross entropy; rejects out-of-range labels."""
    if logits.dim() != 2 or len(logits) == 0:
        raise InputError("expected a nonempty (B,M) logit batch")
    num_classes = logits.shape[1]
    if bool((labels < 0).any()) or bool((labels >= num_classes).any()):
        raise InputError(f"labels must lie in [0, {num_classes})")
    return F.cross_entropy(logits, labels)


def hinge_triplet(mining: MiningResult, margin: float) -> torch.Tensor:
    """Mean over anchors of max(0, margin + d_pos - d_neg)."""
    return torch.relu(margin + mining.positive_dist - mining.negative_dist).mean()


def softmax_triplet(mining: MiningResult) -> torch.Tensor:
    """Mean over anchors of -log( e^{d_neg} / (e^{d_pos} + e^{d_neg}) ).

    Evaluated as softplus(d_pos - d_neg) for numerical stability.
    """
    return F.softplus(mining.positive_dist - mining.negative_dist).mean()


def source_loss(cls_loss: torch.Tensor, tri_loss: torch.Tensor, triplet_weight: float):
    """Supervised pretraining objective: classification + weighted triplet."""
    return cls_loss + triplet_weight * tri_loss


def total_target_loss(cls_loss, tri_loss, part_tri_losses, weights: LossWeights):
    """Fine-tuning objective: reid block plus weighted per-part triplet terms."""
    part_sum = sum(part_tri_losses) if part_tri_losses else 0.0
    return (
        weights.reid_weight * (cls_loss + weights.triplet_weight * tri_loss)
        + weights.part_weight * part_sum
    )
