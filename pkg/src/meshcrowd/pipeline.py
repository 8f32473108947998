"""The full model: conv backbone, tokenization, encoder/decoder stacks,
and the shared prediction head, plus checkpoint serialization.

Query handling: ground-truth person positions are not available at test
time, so each query owns a learned 2D reference point (initialized on a
grid, stored in inverse-sigmoid space) that a small linear head refines
after every decoder layer. Query features start as a linear projection
of the positional encoding of the query's reference. A presence logit
per query decides whether the query emits a person.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ndgrad as nd
from .attention import (DecoderLayer, EncoderLayer, grid_references,
                        sinusoidal_pos_encoding, _tokens_to_maps)
from .bodymodel import (BodyTemplate, CameraIntrinsics, PersonState, PoseParams,
                        ShapeParams, default_template, pose_mesh, regress_joints,
                        rot6d_to_matrix_batch, shape_mesh)
from .ndgrad import ShapeError, Tensor
from .nn import LayerNorm, Linear, Module, MLP
from .rng import SplitMix64

CHECKPOINT_SCHEMA = "meshcrowd-ckpt/1"


@dataclass
class ModelConfig:
    encoder_layers: int = 6
    decoder_layers: int = 6
    heads: int = 8
    points: int = 4
    width: int = 64
    queries: int = 8
    image_size: int = 256
    focal_length: float = 500.0
    backbone_widths: tuple[int, ...] = (16, 32, 64, 64)
    num_vertices: int = 64
    num_joints: int = 8
    num_shapes: int = 4
    seed: int = 0

    def camera(self) -> CameraIntrinsics:
        return CameraIntrinsics.for_image(self.image_size, self.focal_length)

    def to_dict(self) -> dict:
        d = self.__dict__.copy()
        d["backbone_widths"] = list(self.backbone_widths)
        return d

    @staticmethod
    def from_dict(d: dict) -> "ModelConfig":
        d = dict(d)
        if "backbone_widths" in d:
            d["backbone_widths"] = tuple(d["backbone_widths"])
        return ModelConfig(**d)


@dataclass
class PredictionSet:
    """Per-query outputs; tensors stay on the tape for loss computation."""

    rotations: Tensor       # (Q, K, 3, 3)
    betas: Tensor           # (Q, B)
    translations: Tensor    # (Q, 3), z > 0 by construction
    presence_logits: Tensor  # (Q,)
    joints: Tensor          # (Q, K, 3) world-frame regressed joints

    @property
    def num_queries(self) -> int:
        return self.presence_logits.shape[0]


def _sigmoid_np(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -60, 60)))


def _logit_np(p):
    p = np.clip(p, 1e-6, 1 - 1e-6)
    return np.log(p / (1 - p))


class ConvBlock(Module):
    """conv(stride) -> channel layernorm -> tanh, twice."""

    def __init__(self, rng: SplitMix64, c_in: int, c_out: int, stride: int):
        super().__init__()
        k = 3
        std1 = 1.0 / math.sqrt(c_in * k * k)
        std2 = 1.0 / math.sqrt(c_out * k * k)
        self.w1 = self.param("w1", std1 * np.array(rng.gausses(c_out * c_in * k * k)).reshape(c_out, c_in * k * k))
        self.b1 = self.param("b1", np.zeros(c_out))
        self.w2 = self.param("w2", std2 * np.array(rng.gausses(c_out * c_out * k * k)).reshape(c_out, c_out * k * k))
        self.b2 = self.param("b2", np.zeros(c_out))
        self.norm1 = self.child("norm1", LayerNorm(c_out))
        self.norm2 = self.child("norm2", LayerNorm(c_out))
        self.stride = stride
        self.c_out = c_out

    def _conv(self, x: Tensor, w: Tensor, b: Tensor, stride: int) -> Tensor:
        C, H, W = x.shape
        cols = nd.unfold2d(x, kernel=3, stride=stride, padding=1)
        oh, ow = (H + 2 - 3) // stride + 1, (W + 2 - 3) // stride + 1
        out = w @ cols
        out = out + nd.broadcast_to(b.reshape(self.c_out, 1), out.shape)
        return out.reshape(self.c_out, oh, ow)

    def _norm_act(self, x: Tensor, norm: LayerNorm) -> Tensor:
        C, H, W = x.shape
        flat = x.reshape(C, H * W).T
        return nd.tanh(norm(flat)).T.reshape(C, H, W)

    def __call__(self, x: Tensor) -> Tensor:
        x = self._norm_act(self._conv(x, self.w1, self.b1, self.stride), self.norm1)
        return self._norm_act(self._conv(x, self.w2, self.b2, 1), self.norm2)


class Backbone(Module):
    """Strided conv stack emitting three scales at /8, /16, /32, each
    projected to the shared model width."""

    def __init__(self, rng: SplitMix64, widths: tuple[int, ...], out_width: int):
        super().__init__()
        w1, w2, w3, w4 = widths
        k = 3
        self.stem_w = self.param("stem_w", (1.0 / math.sqrt(3 * k * k)) *
                                 np.array(rng.gausses(w1 * 3 * k * k)).reshape(w1, 3 * k * k))
        self.stem_b = self.param("stem_b", np.zeros(w1))
        self.block1 = self.child("block1", ConvBlock(rng, w1, w1, 2))
        self.block2 = self.child("block2", ConvBlock(rng, w1, w2, 2))
        self.block3 = self.child("block3", ConvBlock(rng, w2, w3, 2))
        self.block4 = self.child("block4", ConvBlock(rng, w3, w4, 2))
        self.proj2 = self.child("proj2", Linear(rng, w2, out_width))
        self.proj3 = self.child("proj3", Linear(rng, w3, out_width))
        self.proj4 = self.child("proj4", Linear(rng, w4, out_width))
        self.w1 = w1
        self.out_width = out_width

    def _project(self, fmap: Tensor, proj: Linear) -> Tensor:
        C, H, W = fmap.shape
        return proj(fmap.reshape(C, H * W).T).T.reshape(self.out_width, H, W)

    def __call__(self, image: Tensor) -> list[Tensor]:
        C, H, W = image.shape
        if C != 3 or H % 32 or W % 32:
            raise ShapeError(f"backbone: image must be 3 x H x W with H, W "
                             f"divisible by 32, got {image.shape}")
        cols = nd.unfold2d(image, kernel=3, stride=2, padding=1)
        oh, ow = (H + 2 - 3) // 2 + 1, (W + 2 - 3) // 2 + 1
        x = self.stem_w @ cols
        x = x + nd.broadcast_to(self.stem_b.reshape(self.w1, 1), x.shape)
        x = x.reshape(self.w1, oh, ow)

        x = self.block1(x)     # /4
        f8 = self.block2(x)    # /8
        f16 = self.block3(f8)  # /16
        f32 = self.block4(f16)  # /32
        return [self._project(f8, self.proj2),
                self._project(f16, self.proj3),
                self._project(f32, self.proj4)]


class PredictionHead(Module):
    """Shared 2-layer trunk with linear branches for pose (6D per joint),
    shape, translation (tx, ty, log tz), and presence."""

    def __init__(self, rng: SplitMix64, width: int, num_joints: int, num_shapes: int,
                 init_depth: float = 5.5):
        super().__init__()
        self.num_joints = num_joints
        self.trunk = self.child("trunk", MLP(rng, width, width, width))
        # pose branch biased to identity rotations
        pose_bias = np.tile([1.0, 0.0, 0.0, 0.0, 1.0, 0.0], num_joints)
        self.pose = self.child("pose", Linear(rng, width, num_joints * 6,
                                              zero_init=True, bias_init=pose_bias))
        self.shape = self.child("shape", Linear(rng, width, num_shapes, zero_init=True))
        trans_bias = np.array([0.0, 0.0, math.log(init_depth)])
        self.trans = self.child("trans", Linear(rng, width, 3, zero_init=True,
                                                bias_init=trans_bias))
        self.presence = self.child("presence", Linear(rng, width, 1,
                                                      bias_init=np.array([1.0])))

    def __call__(self, feats: Tensor):
        Q = feats.shape[0]
        h = nd.tanh(self.trunk(feats))
        r6 = self.pose(h).reshape(Q * self.num_joints, 6)
        rotations = rot6d_to_matrix_batch(r6).reshape(Q, self.num_joints, 3, 3)
        betas = self.shape(h)
        tr = self.trans(h)
        txy, tz = tr[:, 0:2], nd.texp(tr[:, 2:3])
        translations = nd.concat([txy, tz], axis=1)
        logits = self.presence(h)[:, 0]
        return rotations, betas, translations, logits


class MeshRecoveryModel(Module):
    """Whole-image model: one forward pass yields all person candidates."""

    def __init__(self, config: ModelConfig, template: BodyTemplate | None = None):
        super().__init__()
        if config.width % 4 or config.width % config.heads:
            raise ValueError("model width must be divisible by 4 and by the head count")
        self.config = config
        self.template = template if template is not None else default_template(
            config.num_vertices, config.num_joints, config.num_shapes)
        rng = SplitMix64(config.seed)

        self.backbone = self.child("backbone", Backbone(rng, config.backbone_widths,
                                                        config.width))
        self.encoder = [
            self.child(f"encoder{i}", EncoderLayer(rng, config.width, config.heads,
                                                   config.points, num_scales=3))
            for i in range(config.encoder_layers)]
        self.memory_norm = self.child("memory_norm", LayerNorm(config.width))
        self.decoder = [
            self.child(f"decoder{i}", DecoderLayer(rng, config.width, config.heads,
                                                   config.points, num_scales=3))
            for i in range(config.decoder_layers)]
        # references are refined between decoder layers; a head after the
        # last layer would have nothing downstream to influence
        self.ref_heads = [
            self.child(f"ref_head{i}", Linear(rng, config.width, 2, zero_init=True))
            for i in range(max(0, config.decoder_layers - 1))]

        Q = config.queries
        side = math.ceil(math.sqrt(Q))
        grid = [((i % side + 0.5) / side, (i // side + 0.5) / side) for i in range(Q)]
        self.query_refs = self.param("query_refs", _logit_np(np.array(grid)))
        self.query_proj = self.child("query_proj", Linear(rng, config.width, config.width))
        self.head = self.child("head", PredictionHead(rng, config.width,
                                                      config.num_joints, config.num_shapes))

    # --- forward ------------------------------------------------------

    def scale_shapes(self) -> list[tuple[int, int]]:
        s = self.config.image_size
        return [(s // 8, s // 8), (s // 16, s // 16), (s // 32, s // 32)]

    def forward(self, image) -> PredictionSet:
        image = nd.as_tensor(image)
        if image.shape != (3, self.config.image_size, self.config.image_size):
            raise ShapeError(f"model_forward: expected image shape "
                             f"(3, {self.config.image_size}, {self.config.image_size}), "
                             f"got {image.shape}")
        maps = self.backbone(image)
        shapes = [(m.shape[1], m.shape[2]) for m in maps]

        refs_np = grid_references(shapes)
        pe = sinusoidal_pos_encoding(refs_np, self.config.width)
        tokens = nd.concat([m.reshape(self.config.width, h * w).T
                            for m, (h, w) in zip(maps, shapes)], axis=0) + pe

        for layer in self.encoder:
            tokens = layer(tokens, refs_np, shapes)
        memory = self.memory_norm(tokens)
        memory_maps = _tokens_to_maps(memory, shapes, self.config.width)

        ref_logit = self.query_refs
        refs = nd.sigmoid(ref_logit)
        feats = self.query_proj(sinusoidal_pos_encoding(refs, self.config.width))
        for i, layer in enumerate(self.decoder):
            feats = layer(feats, refs, memory_maps)
            if i < len(self.ref_heads):
                ref_logit = ref_logit + self.ref_heads[i](feats)
                refs = nd.sigmoid(ref_logit)

        rotations, betas, translations, logits = self.head(feats)
        joints = predicted_joints(self.template, rotations, betas, translations)
        return PredictionSet(rotations, betas, translations, logits, joints)

    __call__ = forward


def predicted_joints(template: BodyTemplate, rotations: Tensor, betas: Tensor,
                     translations: Tensor) -> Tensor:
    """Differentiable world-frame joints for every query: body model
    forward plus translation, joints regressed from the placed mesh."""
    Q = betas.shape[0]
    K, V = template.num_joints, template.num_vertices
    per_query = []
    for q in range(Q):
        rest = shape_mesh(template, betas[q])
        posed = pose_mesh(template, rest, rotations[q])
        verts = posed + nd.broadcast_to(translations[q].reshape(1, 3), (V, 3))
        per_query.append(regress_joints(verts, template.joint_regressor).reshape(1, K, 3))
    return nd.concat(per_query, axis=0)


def decode_people(preds: PredictionSet, threshold: float = 0.5) -> list[PersonState]:
    """Queries whose presence probability clears the threshold become
    people, ordered by descending score."""
    if not 0 <= threshold < 1:
        raise ValueError(f"threshold must be in [0, 1), got {threshold}")
    scores = _sigmoid_np(preds.presence_logits.data)
    people = []
    for q in np.argsort(-scores, kind="stable"):
        if scores[q] > threshold:
            people.append(PersonState(
                pose=PoseParams(preds.rotations.data[q].copy()),
                shape=ShapeParams(preds.betas.data[q].copy()),
                translation=preds.translations.data[q].copy(),
                score=float(scores[q])))
    return people


def mesh_for(person: PersonState, template: BodyTemplate):
    """World-frame vertices and regressed joints for one person."""
    rest = shape_mesh(template, person.shape.beta)
    posed = pose_mesh(template, rest, person.pose.rotations)
    verts = posed.data + person.translation[None, :]
    joints = template.joint_regressor.T @ verts
    return verts, joints


# --- checkpoints --------------------------------------------------------


def save_checkpoint(model: MeshRecoveryModel, directory, step: int = 0,
                    seed: int = 0) -> None:
    """Two-part checkpoint: a JSON manifest plus a little-endian f64 blob
    concatenated in manifest order. Round-trips bit-exactly."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    params = model.named_parameters()
    entries, blobs, offset = [], [], 0
    for name, t in params.items():
        raw = np.ascontiguousarray(t.data, dtype="<f8").tobytes()
        entries.append({"name": name, "shape": list(t.shape),
                        "offset": offset, "length": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    manifest = {
        "schema": CHECKPOINT_SCHEMA,
        "config": model.config.to_dict(),
        "step": step,
        "seed": seed,
        "entries": entries,
    }
    (directory / "checkpoint.json").write_text(
        json.dumps(manifest, sort_keys=True, separators=(",", ":")))
    (directory / "checkpoint.bin").write_bytes(b"".join(blobs))


def load_checkpoint(directory) -> tuple[MeshRecoveryModel, dict]:
    """Rebuild the model from its config snapshot and restore parameters."""
    directory = Path(directory)
    manifest = json.loads((directory / "checkpoint.json").read_text())
    if manifest.get("schema") != CHECKPOINT_SCHEMA:
        raise ValueError(f"expected schema {CHECKPOINT_SCHEMA}, "
                         f"got {manifest.get('schema')!r}")
    blob = (directory / "checkpoint.bin").read_bytes()
    model = MeshRecoveryModel(ModelConfig.from_dict(manifest["config"]))
    params = model.named_parameters()
    names_seen = set()
    for e in manifest["entries"]:
        name = e["name"]
        if name not in params:
            raise ValueError(f"checkpoint entry {name!r} has no matching parameter")
        t = params[name]
        if list(t.shape) != e["shape"]:
            raise ValueError(f"parameter {name!r}: shape {e['shape']} != {list(t.shape)}")
        arr = np.frombuffer(blob, dtype="<f8", count=int(np.prod(e["shape"]) or 1),
                            offset=e["offset"]).reshape(e["shape"])
        t.data = arr.astype(np.float64).copy()
        names_seen.add(name)
    missing = set(params) - names_seen
    if missing:
        raise ValueError(f"checkpoint missing parameters: {sorted(missing)}")
    return model, manifest
