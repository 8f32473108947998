"""Query-to-person matching and the training losses.

All L1-style terms are means rather than sums so the loss weights do not
depend on the number of people, joints, or vertices. The relative losses
act on the pairwise joint displacement matrix of all matched people
concatenated in ground-truth order; the diagonal and near-degenerate
pairs are excluded (the cosine of a zero displacement is undefined).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import ndgrad as nd
from .bodymodel import CameraIntrinsics, project
from .ndgrad import ShapeError, Tensor
from .pipeline import PredictionSet, _sigmoid_np

DEGENERATE_EPS = 1e-8


@dataclass
class LossWeights:
    l3d: float = 5.0
    l2d: float = 5.0
    smpl: float = 1.0
    rt: float = 1.0
    rt_inner: float = 1.0   # distance-vs-direction mix inside the relative term
    presence: float = 1.0

    def __post_init__(self):
        for name, v in self.__dict__.items():
            if v < 0:
                raise ValueError(f"loss weight {name} must be nonnegative, got {v}")

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @staticmethod
    def from_dict(d: dict) -> "LossWeights":
        return LossWeights(**d)


@dataclass
class MatchResult:
    pairs: list[tuple[int, int]]          # (query index, ground-truth index)
    unmatched_queries: list[int]

    def queries_in_gt_order(self) -> list[int]:
        return [q for q, _ in sorted(self.pairs, key=lambda p: p[1])]


def match_cost_matrix(joints2d: np.ndarray, gt_joints2d: list[np.ndarray],
                      image_size: int, presence_logits: np.ndarray | None = None,
                      presence_weight: float = 1.0) -> np.ndarray:
    """Cost (Q, n): mean 2D joint distance normalized by image size, plus
    an optional penalty for low presence scores."""
    Q = joints2d.shape[0]
    n = len(gt_joints2d)
    cost = np.zeros((Q, n))
    for i, gt in enumerate(gt_joints2d):
        d = np.linalg.norm(joints2d - gt[None, :, :], axis=2)  # (Q, K)
        cost[:, i] = d.mean(axis=1) / image_size
    if presence_logits is not None:
        cost += presence_weight * (1.0 - _sigmoid_np(presence_logits))[:, None]
    return cost


def hungarian(cost: np.ndarray) -> list[tuple[int, int]]:
    """Optimal assignment on a rectangular cost matrix."""
    rows, cols = linear_sum_assignment(cost)
    return list(zip(rows.tolist(), cols.tolist()))


def brute_force_assignment(cost: np.ndarray) -> float:
    """Exhaustive minimum over all injections; oracle for the matcher."""
    Q, n = cost.shape
    best = np.inf
    for perm in itertools.permutations(range(Q), n):
        best = min(best, sum(cost[q, i] for i, q in enumerate(perm)))
    return best


def match(preds: PredictionSet, gt_joints2d: list[np.ndarray], cam: CameraIntrinsics,
          image_size: int, presence_weight: float = 1.0) -> MatchResult:
    """Assign queries to ground-truth people (values only, no gradients)."""
    n = len(gt_joints2d)
    Q = preds.num_queries
    if n > Q:
        raise ValueError(f"{n} people but only {Q} queries; raise the query count")
    joints = preds.joints.data
    z = np.maximum(joints[:, :, 2], 1e-6)  # matching only: clamp behind-camera
    u = cam.f * joints[:, :, 0] / z + cam.cx
    v = cam.f * joints[:, :, 1] / z + cam.cy
    cost = match_cost_matrix(np.stack([u, v], axis=2), gt_joints2d, image_size,
                             preds.presence_logits.data, presence_weight)
    pairs = hungarian(cost)
    matched_q = {q for q, _ in pairs}
    return MatchResult(pairs=pairs,
                       unmatched_queries=[q for q in range(Q) if q not in matched_q])


# ---------------------------------------------------------------------------
# individual loss terms (differentiable; ground truth enters as constants)
# ---------------------------------------------------------------------------


def loss_3d(joints: Tensor, gt_joints: np.ndarray) -> Tensor:
    """Mean absolute deviation over all joint coordinates."""
    gt = np.asarray(gt_joints, dtype=np.float64)
    if joints.shape != gt.shape:
        raise ShapeError(f"loss_3d: predicted {joints.shape} vs ground truth {gt.shape}")
    return nd.tabs(joints - Tensor(gt)).mean()


def loss_2d(joints3d_list: list[Tensor], cam: CameraIntrinsics,
            gt_joints2d: list[np.ndarray], visibility: list[np.ndarray],
            image_size: int) -> tuple[Tensor, int]:
    """Mean absolute pixel deviation over visible joints, normalized by
    the image size.

    People with any joint at or behind the camera plane are skipped and
    counted instead of poisoning the loss; all-invisible input yields an
    exact zero with no gradient.
    """
    total, count, skipped = None, 0, 0
    for joints, gt, vis in zip(joints3d_list, gt_joints2d, visibility):
        if np.any(joints.data[:, 2] <= 1e-6):
            skipped += 1
            continue
        vis = np.asarray(vis, dtype=np.float64)
        if vis.sum() == 0:
            continue
        uv = project(joints, cam)
        mask = np.repeat(vis[:, None], 2, axis=1)
        dev = nd.tabs(uv - Tensor(np.asarray(gt, dtype=np.float64))) * Tensor(mask)
        total = dev.sum() if total is None else total + dev.sum()
        count += int(mask.sum())
    if total is None or count == 0:
        return Tensor(0.0), skipped
    return total / float(count * image_size), skipped


def loss_smpl(rotations: Tensor, betas: Tensor, gt_rotations: np.ndarray,
              gt_betas: np.ndarray) -> Tensor:
    """Mean absolute deviation over rotation entries plus over shapes."""
    gt_r = np.asarray(gt_rotations, dtype=np.float64)
    gt_b = np.asarray(gt_betas, dtype=np.float64)
    if rotations.shape != gt_r.shape:
        raise ShapeError(f"loss_smpl: rotations {rotations.shape} vs {gt_r.shape}")
    if betas.shape != gt_b.shape:
        raise ShapeError(f"loss_smpl: betas {betas.shape} vs {gt_b.shape}")
    return nd.tabs(rotations - Tensor(gt_r)).mean() + nd.tabs(betas - Tensor(gt_b)).mean()


@dataclass
class DisplacementMatrix:
    """Pairwise joint displacements D (3, nK, nK) over the concatenated
    joints of all matched people; antisymmetric with a zero diagonal."""

    d: Tensor
    norms: Tensor = field(init=False)

    def __post_init__(self):
        self.norms = nd.l2norm(self.d, axis=0)


def displacement_matrix(joints_all: Tensor) -> DisplacementMatrix:
    """joints_all: (nK, 3) concatenated joints -> D[., i, j] = X_i - X_j."""
    if joints_all.ndim != 2 or joints_all.shape[1] != 3:
        raise ShapeError(f"displacement_matrix: expected (nK, 3), got {joints_all.shape}")
    nk = joints_all.shape[0]
    a = nd.broadcast_to(joints_all.reshape(nk, 1, 3), (nk, nk, 3))
    b = nd.broadcast_to(joints_all.reshape(1, nk, 3), (nk, nk, 3))
    return DisplacementMatrix((a - b).transpose((2, 0, 1)))


def loss_rt_distance(d: DisplacementMatrix, d_star: DisplacementMatrix) -> Tensor:
    """Mean absolute deviation of pairwise distances, off-diagonal only.
    Invariant under any rigid motion of either side."""
    if d.d.shape != d_star.d.shape:
        raise ShapeError(f"loss_rt_distance: {d.d.shape} vs {d_star.d.shape}")
    nk = d.d.shape[1]
    if nk < 2:
        return Tensor(0.0)
    off = 1.0 - np.eye(nk)
    dev = nd.tabs(d.norms - d_star.norms.detach()) * Tensor(off)
    return dev.sum() / float(off.sum())


def loss_rt_directional(d: DisplacementMatrix, d_star: DisplacementMatrix) -> tuple[Tensor, bool]:
    """One minus the mean cosine between corresponding displacements.

    A pair is valid iff both displacement norms exceed a small epsilon
    (the diagonal never qualifies). Returns (loss, degenerate_flag); with
    no valid pairs the loss is zero and the flag is set. Range [0, 2].
    """
    if d.d.shape != d_star.d.shape:
        raise ShapeError(f"loss_rt_directional: {d.d.shape} vs {d_star.d.shape}")
    n = d.norms.data
    n_star = d_star.norms.data
    valid = (n > DEGENERATE_EPS) & (n_star > DEGENERATE_EPS)
    count = int(valid.sum())
    if count == 0:
        return Tensor(0.0), True
    mask = valid.astype(np.float64)
    dots = (d.d * d_star.d.detach()).sum(axis=0)
    denom = d.norms * d_star.norms.detach() + Tensor(1.0 - mask)  # masked slots: avoid 0/0
    cos = (dots / denom) * Tensor(mask)
    return 1.0 - cos.sum() / float(count), False


def loss_presence(logits: Tensor, matched_queries: set[int]) -> Tensor:
    """Binary cross-entropy, matched queries target 1, mean over all
    queries. Stable form: softplus(x) - target * x."""
    Q = logits.shape[0]
    targets = np.array([1.0 if q in matched_queries else 0.0 for q in range(Q)])
    return (nd.softplus(logits) - logits * Tensor(targets)).mean()


def loss_total(terms: dict[str, Tensor], weights: LossWeights) -> Tensor:
    """Weighted combination; the relative term mixes distance and
    direction with the inner weight."""
    rt = terms["rt_distance"] + weights.rt_inner * terms["rt_directional"]
    return (weights.l3d * terms["l3d"] + weights.l2d * terms["l2d"]
            + weights.smpl * terms["smpl"] + weights.rt * rt
            + weights.presence * terms["presence"])


# ---------------------------------------------------------------------------
# per-scene orchestration
# ---------------------------------------------------------------------------


@dataclass
class SceneLoss:
    total: Tensor
    terms: dict[str, float]
    match: MatchResult
    skipped_2d: int = 0
    degenerate_rt: bool = False


def scene_loss(preds: PredictionSet, people_gt: list, cam: CameraIntrinsics,
               image_size: int, weights: LossWeights) -> SceneLoss:
    """Match queries to the scene's people and evaluate every term.

    ``people_gt`` entries need attributes ``joints3d`` (K,3), ``joints2d``
    (K,2), ``visibility`` (K,), ``rotations`` (K,3,3), ``beta`` (B,).
    """
    result = match(preds, [p.joints2d for p in people_gt], cam, image_size,
                   presence_weight=weights.presence)
    order = result.queries_in_gt_order()
    n = len(order)

    joints_rows = [preds.joints[q] for q in order]
    joints_matched = nd.stack(joints_rows, axis=0)                 # (n, K, 3)
    gt_joints3d = np.stack([p.joints3d for p in people_gt], axis=0)

    rot_matched = nd.stack([preds.rotations[q] for q in order], axis=0)
    beta_matched = nd.stack([preds.betas[q] for q in order], axis=0)
    gt_rot = np.stack([p.rotations for p in people_gt], axis=0)
    gt_beta = np.stack([p.beta for p in people_gt], axis=0)

    K = preds.joints.shape[1]
    flat_pred = joints_matched.reshape(n * K, 3)
    d_pred = displacement_matrix(flat_pred)
    d_gt = displacement_matrix(Tensor(gt_joints3d.reshape(n * K, 3)))

    l2d_val, skipped = loss_2d(joints_rows, cam, [p.joints2d for p in people_gt],
                               [p.visibility for p in people_gt], image_size)
    rt_dir, degenerate = loss_rt_directional(d_pred, d_gt)
    terms = {
        "l3d": loss_3d(joints_matched, gt_joints3d),
        "l2d": l2d_val,
        "smpl": loss_smpl(rot_matched, beta_matched, gt_rot, gt_beta),
        "rt_distance": loss_rt_distance(d_pred, d_gt),
        "rt_directional": rt_dir,
        "presence": loss_presence(preds.presence_logits, {q for q, _ in result.pairs}),
    }
    total = loss_total(terms, weights)
    return SceneLoss(total=total,
                     terms={k: float(v.data) for k, v in terms.items()},
                     match=result, skipped_2d=skipped, degenerate_rt=degenerate)
