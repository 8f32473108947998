"""Parametric body: shape blendshapes, forward kinematics with linear
blend skinning, linear joint regression, and the perspective camera.

The template is generated procedurally (see :func:`default_template`)
instead of shipping licensed mesh assets: each joint owns a small vertex
cluster whose centroid sits exactly on the joint, so the regressor
reproduces the rest skeleton by construction. The math mirrors the
standard skinned linear body model; pose-corrective blendshapes are
deliberately omitted.

World/camera convention: right-handed, x right, y down (so heads render
above feet in image coordinates), z into the screen. Units are meters.
"""

from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import ndgrad as nd
from .ndgrad import ShapeError, Tensor

TEMPLATE_SCHEMA = "body-template/1"


class RotationError(ValueError):
    """A supplied matrix is not a proper rotation."""


class ProjectionError(ValueError):
    """A point sits behind or on the camera plane."""


@dataclass
class CameraIntrinsics:
    """Pinhole camera: focal length and principal point, both in pixels."""

    f: float = 500.0
    cx: float = 128.0
    cy: float = 128.0

    def __post_init__(self):
        if self.f <= 0:
            raise ValueError(f"focal length must be positive, got {self.f}")

    @staticmethod
    def for_image(size: int, f: float = 500.0) -> "CameraIntrinsics":
        return CameraIntrinsics(f=f, cx=size / 2.0, cy=size / 2.0)


@dataclass
class PoseParams:
    """One 3x3 rotation per joint, local to the parent frame."""

    rotations: np.ndarray  # (K, 3, 3)

    def validate(self, tol: float = 1e-4) -> None:
        check_rotations(self.rotations, tol)


@dataclass
class ShapeParams:
    beta: np.ndarray  # (B,)


@dataclass
class PersonState:
    """Everything needed to place one body in the camera frame."""

    pose: PoseParams
    shape: ShapeParams
    translation: np.ndarray  # (3,), camera frame, z > 0
    score: float = 1.0

    def __post_init__(self):
        self.translation = np.asarray(self.translation, dtype=np.float64)
        if self.translation[2] <= 0:
            raise ValueError(f"translation z must be positive, got {self.translation[2]}")


@dataclass
class BodyTemplate:
    vertices: np.ndarray          # (V, 3) rest positions
    parents: list[int]            # K entries, -1 for the root
    rest_joints: np.ndarray       # (K, 3)
    blendshapes: np.ndarray       # (B, V, 3)
    skin_weights: np.ndarray      # (V, K), rows sum to 1
    joint_regressor: np.ndarray   # (V, K), columns sum to 1
    faces: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), dtype=np.int64))

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_joints(self) -> int:
        return len(self.parents)

    @property
    def num_shapes(self) -> int:
        return self.blendshapes.shape[0]

    def validate(self) -> None:
        if self.parents[0] != -1:
            raise ValueError("joint 0 must be the root (parent -1)")
        for j, p in enumerate(self.parents[1:], start=1):
            if not 0 <= p < j:
                raise ValueError(f"parent of joint {j} must precede it, got {p}")
        if np.any(self.skin_weights < 0):
            raise ValueError("skinning weights must be nonnegative")
        if not np.allclose(self.skin_weights.sum(axis=1), 1.0, atol=1e-9):
            raise ValueError("skinning weight rows must sum to 1")
        if np.any(self.joint_regressor < 0):
            raise ValueError("joint regressor weights must be nonnegative")
        if not np.allclose(self.joint_regressor.sum(axis=0), 1.0, atol=1e-9):
            raise ValueError("joint regressor columns must sum to 1")

    # --- serialization ------------------------------------------------

    def to_json(self) -> str:
        def arr(a):
            return {"shape": list(a.shape),
                    "data": base64.b64encode(np.ascontiguousarray(a, dtype="<f8").tobytes()).decode()}

        doc = {
            "schema": TEMPLATE_SCHEMA,
            "parents": list(map(int, self.parents)),
            "vertices": arr(self.vertices),
            "rest_joints": arr(self.rest_joints),
            "blendshapes": arr(self.blendshapes),
            "skin_weights": arr(self.skin_weights),
            "joint_regressor": arr(self.joint_regressor),
            "faces": list(map(list, self.faces.tolist())),
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @staticmethod
    def from_json(text: str) -> "BodyTemplate":
        doc = json.loads(text)
        if doc.get("schema") != TEMPLATE_SCHEMA:
            raise ValueError(f"expected schema {TEMPLATE_SCHEMA}, got {doc.get('schema')!r}")

        def arr(d):
            a = np.frombuffer(base64.b64decode(d["data"]), dtype="<f8")
            return a.reshape(d["shape"]).astype(np.float64)

        tpl = BodyTemplate(
            vertices=arr(doc["vertices"]),
            parents=list(doc["parents"]),
            rest_joints=arr(doc["rest_joints"]),
            blendshapes=arr(doc["blendshapes"]),
            skin_weights=arr(doc["skin_weights"]),
            joint_regressor=arr(doc["joint_regressor"]),
            faces=np.asarray(doc["faces"], dtype=np.int64).reshape(-1, 3),
        )
        tpl.validate()
        return tpl


# Default humanoid skeleton: root/pelvis, spine, head, shoulders and
# elbows on both sides, and one merged hip joint. y is down, so the head
# sits at negative y. Deliberately not axis-aligned: every bone has all
# three components nonzero, so every joint rotation visibly moves the
# regressed skeleton.
_JOINT_POSITIONS = np.array([
    [0.00, 0.00, 0.00],    # 0 root (pelvis)
    [0.01, -0.25, 0.02],   # 1 spine
    [0.02, -0.55, -0.03],  # 2 head
    [-0.20, -0.42, 0.03],  # 3 left shoulder
    [-0.45, -0.38, -0.04], # 4 left elbow
    [0.20, -0.40, -0.02],  # 5 right shoulder
    [0.45, -0.44, 0.05],   # 6 right elbow
    [0.01, 0.30, -0.02],   # 7 hips (legs merged)
])
_JOINT_PARENTS = [-1, 0, 1, 1, 3, 1, 5, 0]

_CUBE = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)],
                 dtype=np.float64) / math.sqrt(3.0)


def _cluster_offsets(m: int, radius: float) -> np.ndarray:
    """m offsets summing exactly to zero (so the centroid is the joint)."""
    if m == 8:
        return radius * _CUBE
    if m % 2:
        raise ValueError("cluster size must be even")
    half = []
    for i in range(m // 2):
        theta = 2.0 * math.pi * i / (m // 2)
        phi = math.pi * (0.25 + 0.5 * i / max(1, m // 2 - 1))
        half.append([math.sin(phi) * math.cos(theta),
                     math.sin(phi) * math.sin(theta),
                     math.cos(phi)])
    half = np.asarray(half)
    return radius * np.concatenate([half, -half], axis=0)


def default_template(num_vertices: int = 64, num_joints: int = 8,
                     num_shapes: int = 4) -> BodyTemplate:
    """Procedural humanoid-ish template with configurable sizes.

    ``num_vertices`` must divide evenly across the joints. Shape basis:
    uniform scale, height, width, and limb thickness, all linear in the
    rest geometry.
    """
    if num_joints > len(_JOINT_PARENTS):
        raise ValueError(f"at most {len(_JOINT_PARENTS)} joints supported")
    if num_vertices % num_joints:
        raise ValueError("num_vertices must be a multiple of num_joints")
    m = num_vertices // num_joints

    joints = _JOINT_POSITIONS[:num_joints].copy()
    parents = _JOINT_PARENTS[:num_joints]

    verts = np.zeros((num_vertices, 3))
    skin = np.zeros((num_vertices, num_joints))
    jreg = np.zeros((num_vertices, num_joints))
    offsets = _cluster_offsets(m, radius=0.08)
    for j in range(num_joints):
        rows = slice(j * m, (j + 1) * m)
        verts[rows] = joints[j] + offsets
        if parents[j] < 0:
            skin[rows, j] = 1.0
        else:
            skin[rows, j] = 0.8
            skin[rows, parents[j]] = 0.2

    # Regressor: each joint reads mostly from its own cluster, plus a
    # small pull from the parent cluster compensated by tilted weights,
    # so joints stay exact at rest but respond to every joint rotation
    # (as with real regressors whose support spans body parts).
    q = 0.05
    cov = offsets.T @ offsets
    for j in range(num_joints):
        rows = slice(j * m, (j + 1) * m)
        if parents[j] < 0:
            jreg[rows, j] = 1.0 / m
            continue
        p = parents[j]
        tilt = offsets @ (np.linalg.pinv(cov) @ (q * (joints[j] - joints[p])))
        w = (1.0 - q) / m + tilt
        if w.min() <= 0:
            raise ValueError("regressor tilt produced negative weights; "
                             "increase cluster radius or reduce q")
        jreg[rows, j] = w
        jreg[p * m:(p + 1) * m, j] += q / m

    # thickness weights vary within each cluster so that every shape
    # direction also moves the regressed joints (keeps gradients to the
    # joint chain nonzero in all coordinates)
    taper = (0.5 + 0.2 * (np.arange(num_vertices) % m) / m)[:, None]
    thickness = taper * (verts - np.repeat(joints, m, axis=0))
    basis = [
        0.10 * verts,                                        # overall scale
        0.10 * np.stack([np.zeros(num_vertices), verts[:, 1],
                         np.zeros(num_vertices)], axis=1),   # height
        0.10 * np.stack([verts[:, 0], np.zeros(num_vertices),
                         np.zeros(num_vertices)], axis=1),   # width
        0.50 * thickness,                                    # limb thickness
    ]
    while len(basis) < num_shapes:
        k = len(basis)
        basis.append(0.02 * np.sin(k * verts))
    blend = np.stack(basis[:num_shapes], axis=0)

    faces = []
    for j in range(num_joints):
        base = j * m
        for i in range(1, m - 1):
            faces.append([base, base + i, base + i + 1])

    tpl = BodyTemplate(vertices=verts, parents=parents, rest_joints=joints,
                       blendshapes=blend, skin_weights=skin, joint_regressor=jreg,
                       faces=np.asarray(faces, dtype=np.int64))
    tpl.validate()
    return tpl


# ---------------------------------------------------------------------------
# operations (differentiable; all accept Tensors or arrays)
# ---------------------------------------------------------------------------


def check_rotations(rots: np.ndarray, tol: float = 1e-4) -> None:
    rots = np.asarray(rots, dtype=np.float64)
    eye = np.eye(3)
    for j, r in enumerate(rots.reshape(-1, 3, 3)):
        if np.abs(r.T @ r - eye).max() > tol or abs(np.linalg.det(r) - 1.0) > tol:
            raise RotationError(f"matrix {j} is not a rotation (tol {tol})")


def shape_mesh(template: BodyTemplate, beta) -> Tensor:
    """Rest mesh for shape coefficients: template plus the linear blend."""
    beta = nd.as_tensor(beta)
    B, V = template.num_shapes, template.num_vertices
    if beta.shape != (B,):
        raise ShapeError(f"shape_mesh: beta must have shape ({B},), got {beta.shape}")
    basis = Tensor(template.blendshapes.reshape(B, V * 3))
    offset = (beta.reshape(1, B) @ basis).reshape(V, 3)
    return Tensor(template.vertices) + offset


def regress_joints(mesh, joint_regressor: np.ndarray) -> Tensor:
    """Joints as convex combinations of mesh vertices: Jreg^T @ mesh."""
    mesh = nd.as_tensor(mesh)
    jreg = np.asarray(joint_regressor, dtype=np.float64)
    if mesh.ndim != 2 or mesh.shape[1] != 3 or mesh.shape[0] != jreg.shape[0]:
        raise ShapeError(f"regress_joints: mesh {mesh.shape} vs regressor {jreg.shape}")
    return Tensor(jreg.T) @ mesh


def _rigid_chain(template: BodyTemplate, rest_joints: Tensor, rotations: Tensor):
    """Global (R, t) per joint, composed root-down along the parent chain."""
    globals_: list[tuple[Tensor, Tensor]] = []
    for j, parent in enumerate(template.parents):
        R_local = rotations[j]
        joint = rest_joints[j].reshape(1, 3)
        if parent < 0:
            globals_.append((R_local, joint))
        else:
            R_p, t_p = globals_[parent]
            offset = joint - rest_joints[parent].reshape(1, 3)
            globals_.append((R_p @ R_local, offset @ R_p.T + t_p))
    return globals_


def pose_mesh(template: BodyTemplate, rest, pose) -> Tensor:
    """Skin the rest mesh with per-joint rotations.

    Joint positions for the kinematic chain are regressed from the given
    rest mesh, so shape changes move the skeleton consistently. Each
    vertex is a skin-weighted sum of the per-joint rigid transforms.
    """
    rest = nd.as_tensor(rest)
    if isinstance(pose, PoseParams):
        pose = pose.rotations
    rotations = nd.as_tensor(pose)
    K, V = template.num_joints, template.num_vertices
    if rotations.shape != (K, 3, 3):
        raise ShapeError(f"pose_mesh: rotations must be ({K},3,3), got {rotations.shape}")
    check_rotations(rotations.data)

    rest_joints = regress_joints(rest, template.joint_regressor)
    chain = _rigid_chain(template, rest_joints, rotations)

    posed = None
    weights = template.skin_weights
    for j in range(K):
        R_g, t_g = chain[j]
        anchor = rest_joints[j].reshape(1, 3)
        moved = (rest - nd.broadcast_to(anchor, (V, 3))) @ R_g.T \
            + nd.broadcast_to(t_g, (V, 3))
        w = Tensor(np.broadcast_to(weights[:, j:j + 1], (V, 3)).copy())
        term = w * moved
        posed = term if posed is None else posed + term
    return posed


def project(points3d, cam: CameraIntrinsics) -> Tensor:
    """Perspective projection: (u, v) = (f*x/z + cx, f*y/z + cy)."""
    pts = nd.as_tensor(points3d)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ShapeError(f"project: points must be P x 3, got {pts.shape}")
    z = pts.data[:, 2]
    if np.any(z <= 1e-6):
        bad = int(np.argmin(z))
        raise ProjectionError(f"project: point {bad} has z={z[bad]:.3e} <= 1e-6")
    P = pts.shape[0]
    xy = pts[:, 0:2]
    zc = nd.broadcast_to(pts[:, 2:3], (P, 2))
    pp = Tensor(np.array([[cam.cx, cam.cy]]))
    return cam.f * (xy / zc) + nd.broadcast_to(pp, (P, 2))


def rot6d_to_matrix(r) -> Tensor:
    """One 6-vector to a rotation matrix (columns via Gram-Schmidt)."""
    r = nd.as_tensor(r)
    if r.shape != (6,):
        raise ShapeError(f"rot6d_to_matrix: expected shape (6,), got {r.shape}")
    return rot6d_to_matrix_batch(r.reshape(1, 6))[0]


def rot6d_to_matrix_batch(r) -> Tensor:
    """N x 6 to N x 3 x 3 rotations; continuous and gradient-friendly.

    b1 normalizes the first triple; b2 is the second triple projected off
    b1 and normalized; b3 = b1 x b2. Determinant is +1 by construction.
    """
    r = nd.as_tensor(r)
    if r.ndim != 2 or r.shape[1] != 6:
        raise ShapeError(f"rot6d_to_matrix_batch: expected N x 6, got {r.shape}")
    N = r.shape[0]
    a1, a2 = r[:, 0:3], r[:, 3:6]

    n1 = nd.l2norm(a1, axis=1, keepdims=True)
    if np.any(n1.data < 1e-8):
        raise ValueError("rot6d: first triple has near-zero norm")
    b1 = a1 / nd.broadcast_to(n1, (N, 3))

    proj = (b1 * a2).sum(axis=1, keepdims=True)
    u2 = a2 - nd.broadcast_to(proj, (N, 3)) * b1
    n2 = nd.l2norm(u2, axis=1, keepdims=True)
    if np.any(n2.data < 1e-8):
        raise ValueError("rot6d: triples are near-parallel")
    b2 = u2 / nd.broadcast_to(n2, (N, 3))

    b3 = _cross_rows(b1, b2)
    cols = [b.reshape(N, 3, 1) for b in (b1, b2, b3)]
    return nd.concat(cols, axis=2)


def _cross_rows(a: Tensor, b: Tensor) -> Tensor:
    ax, ay, az = a[:, 0:1], a[:, 1:2], a[:, 2:3]
    bx, by, bz = b[:, 0:1], b[:, 1:2], b[:, 2:3]
    return nd.concat([ay * bz - az * by, az * bx - ax * bz, ax * by - ay * bx], axis=1)


def axis_angle_to_matrix(axis, angle: float) -> np.ndarray:
    """Rodrigues' formula; plain numpy, used by the scene sampler."""
    axis = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(axis)
    if n < 1e-12:
        return np.eye(3)
    x, y, z = axis / n
    K = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + math.sin(angle) * K + (1.0 - math.cos(angle)) * (K @ K)
