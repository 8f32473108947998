"""Multi-scale deformable attention and the transformer layers built on it.

A query attends at a handful of sampled locations per feature scale:
sampling offsets and attention logits are linear projections of the
query feature, logits are softmax-normalized jointly across all scales
and points of one head, and each sampled value is read bilinearly from
the (value-projected) feature map. The per-head sums are concatenated
and sent through an output projection.

Conventions the underlying method leaves open, fixed here: bilinear
sampling with zero padding outside the map; offsets live in pixel units
of each scale and are unbounded; the offset projection starts at zero
weights with small directional biases forming a ring around the
reference; layers are pre-norm.
"""

from __future__ import annotations

import math

import numpy as np

from . import ndgrad as nd
from .ndgrad import ShapeError, Tensor
from .nn import Linear, Module, LayerNorm, MLP
from .rng import SplitMix64


def sinusoidal_pos_encoding(position, width: int) -> Tensor:
    """2D sinusoidal encoding of normalized positions.

    ``position`` is (N, 2) in [0,1]^2 (a single (2,) pair is promoted).
    Half the channels encode u, half encode v; each half alternates
    sin/cos over geometrically spaced frequencies. Differentiable in the
    positions, so learned reference points can be trained through it.
    """
    if width % 4:
        raise ValueError(f"positional encoding width must be divisible by 4, got {width}")
    pos = nd.as_tensor(position)
    single = pos.ndim == 1
    if single:
        pos = pos.reshape(1, 2)
    if pos.ndim != 2 or pos.shape[1] != 2:
        raise ShapeError(f"positions must be N x 2, got {pos.shape}")

    n, half = pos.shape[0], width // 2
    npairs = half // 2
    freqs = (2.0 * math.pi) / (10000.0 ** (np.arange(npairs) / max(1, npairs)))
    parts = []
    for k in range(2):
        angles = nd.broadcast_to(pos[:, k:k + 1], (n, npairs)) * Tensor(freqs[None, :].repeat(n, axis=0))
        parts.extend([nd.tsin(angles), nd.tcos(angles)])
    out = nd.concat(parts, axis=1)
    return out[0] if single else out


class DeformableAttention(Module):
    """Eq-style deformable attention over a set of feature scales."""

    def __init__(self, rng: SplitMix64, width: int, heads: int, points: int,
                 num_scales: int):
        super().__init__()
        if width % heads:
            raise ShapeError(f"width {width} not divisible by heads {heads}")
        self.width, self.heads, self.points, self.num_scales = width, heads, points, num_scales
        self.head_dim = width // heads
        npts = heads * num_scales * points

        self.offset_proj = self.child(
            "offset_proj",
            Linear(rng, width, npts * 2, zero_init=True, bias_init=self._ring_bias()))
        self.weight_proj = self.child("weight_proj",
                                      Linear(rng, width, npts, zero_init=True))
        self.value_proj = self.child("value_proj", Linear(rng, width, width))
        self.out_proj = self.child("out_proj", Linear(rng, width, width))

    def _ring_bias(self) -> np.ndarray:
        # initial sampling points form a small ring around the reference
        bias = np.zeros((self.heads, self.num_scales, self.points, 2))
        for h in range(self.heads):
            angle = 2.0 * math.pi * h / self.heads
            d = np.array([math.cos(angle), math.sin(angle)])
            for k in range(self.points):
                bias[h, :, k] = d * (k + 1)
        return bias.reshape(-1)

    def __call__(self, queries: Tensor, references, maps: list[Tensor],
                 mode: str = "zeros") -> Tensor:
        """queries: (N, C); references: (N, 2) normalized coordinates;
        maps: one (C, H_s, W_s) tensor per scale."""
        if len(maps) != self.num_scales:
            raise ShapeError(f"expected {self.num_scales} scales, got {len(maps)}")
        N, C = queries.shape
        h, S, K = self.heads, self.num_scales, self.points
        refs = nd.as_tensor(references)

        offsets = self.offset_proj(queries).reshape(N, h, S, K, 2)
        logits = self.weight_proj(queries).reshape(N * h, S * K)
        attn = nd.softmax(logits, axis=1).reshape(N, h, S, K)

        per_scale = []
        for s, fmap in enumerate(maps):
            Cs, H, W = fmap.shape
            if Cs != C:
                raise ShapeError(f"scale {s} width {Cs} != model width {C}")
            # value projection applied to the map once; bilinear sampling
            # commutes with the linear map
            flat = fmap.reshape(C, H * W).T
            vmap = self.value_proj(flat).T.reshape(C, H, W)

            scale_px = nd.broadcast_to(Tensor(np.array([[W - 1.0, H - 1.0]])), (N, 2))
            base = nd.broadcast_to((refs * scale_px).reshape(N, 1, 1, 2), (N, h, K, 2))
            pts = (base + offsets[:, :, s, :, :]).reshape(N * h * K, 2)
            sampled = nd.bilinear2d(vmap, pts, mode=mode).reshape(N, h, K, C)

            w = nd.broadcast_to(attn[:, :, s, :].reshape(N, h, K, 1), (N, h, K, C))
            per_scale.append((w * sampled).sum(axis=2))

        mixed = per_scale[0]
        for t in per_scale[1:]:
            mixed = mixed + t

        # keep each head's slice of the value dimension, then mix
        d = self.head_dim
        head_out = [mixed[:, i, i * d:(i + 1) * d] for i in range(h)]
        return self.out_proj(nd.concat(head_out, axis=1))


class DenseSelfAttention(Module):
    """Standard multi-head self-attention; used among decoder queries."""

    def __init__(self, rng: SplitMix64, width: int, heads: int):
        super().__init__()
        if width % heads:
            raise ShapeError(f"width {width} not divisible by heads {heads}")
        self.width, self.heads, self.head_dim = width, heads, width // heads
        self.q_proj = self.child("q_proj", Linear(rng, width, width))
        self.k_proj = self.child("k_proj", Linear(rng, width, width))
        self.v_proj = self.child("v_proj", Linear(rng, width, width))
        self.out_proj = self.child("out_proj", Linear(rng, width, width))

    def __call__(self, x: Tensor) -> Tensor:
        N, C = x.shape
        h, d = self.heads, self.head_dim
        q, k, v = self.q_proj(x), self.k_proj(x), self.v_proj(x)
        scale = 1.0 / math.sqrt(d)
        outs = []
        for i in range(h):
            cols = slice(i * d, (i + 1) * d)
            qi, ki, vi = q[:, cols], k[:, cols], v[:, cols]
            attn = nd.softmax((qi @ ki.T) * scale, axis=1)
            outs.append(attn @ vi)
        return self.out_proj(nd.concat(outs, axis=1))


def _tokens_to_maps(tokens: Tensor, shapes: list[tuple[int, int]], width: int) -> list[Tensor]:
    """Split a (T, C) token matrix back into per-scale (C, H, W) maps."""
    maps, offset = [], 0
    for (H, W) in shapes:
        n = H * W
        maps.append(tokens[offset:offset + n, :].T.reshape(width, H, W))
        offset += n
    return maps


def grid_references(shapes: list[tuple[int, int]]) -> np.ndarray:
    """Normalized cell-center positions for every token of every scale."""
    refs = []
    for (H, W) in shapes:
        ys, xs = np.meshgrid(np.arange(H), np.arange(W), indexing="ij")
        u = xs.reshape(-1) / max(1, W - 1)
        v = ys.reshape(-1) / max(1, H - 1)
        refs.append(np.stack([u, v], axis=1))
    return np.concatenate(refs, axis=0)


class EncoderLayer(Module):
    """Pre-norm: deformable self-attention over the token grid, then FFN.

    Every token is a query whose reference is its own grid position; the
    attention samples from the current (normalized) tokens reshaped back
    into per-scale maps.
    """

    def __init__(self, rng: SplitMix64, width: int, heads: int, points: int,
                 num_scales: int, ffn_mult: int = 2):
        super().__init__()
        self.width = width
        self.norm1 = self.child("norm1", LayerNorm(width))
        self.attn = self.child("attn", DeformableAttention(rng, width, heads, points, num_scales))
        self.norm2 = self.child("norm2", LayerNorm(width))
        self.ffn = self.child("ffn", MLP(rng, width, ffn_mult * width, width))

    def __call__(self, tokens: Tensor, references, shapes: list[tuple[int, int]],
                 mode: str = "zeros") -> Tensor:
        normed = self.norm1(tokens)
        maps = _tokens_to_maps(normed, shapes, self.width)
        tokens = tokens + self.attn(normed, references, maps, mode=mode)
        return tokens + self.ffn(self.norm2(tokens))


class DecoderLayer(Module):
    """Pre-norm: dense self-attention among queries, deformable
    cross-attention into the encoded memory, then FFN."""

    def __init__(self, rng: SplitMix64, width: int, heads: int, points: int,
                 num_scales: int, ffn_mult: int = 2):
        super().__init__()
        self.norm1 = self.child("norm1", LayerNorm(width))
        self.self_attn = self.child("self_attn", DenseSelfAttention(rng, width, heads))
        self.norm2 = self.child("norm2", LayerNorm(width))
        self.cross_attn = self.child(
            "cross_attn", DeformableAttention(rng, width, heads, points, num_scales))
        self.norm3 = self.child("norm3", LayerNorm(width))
        self.ffn = self.child("ffn", MLP(rng, width, ffn_mult * width, width))

    def __call__(self, queries: Tensor, references, memory_maps: list[Tensor],
                 mode: str = "zeros") -> Tensor:
        queries = queries + self.self_attn(self.norm1(queries))
        queries = queries + self.cross_attn(self.norm2(queries), references,
                                            memory_maps, mode=mode)
        return queries + self.ffn(self.norm3(queries))


def bilinear_sample(fmap, point, mode: str = "zeros") -> Tensor:
    """Sample one fractional (x, y) position from a C x H x W map."""
    pt = nd.as_tensor(point)
    if pt.shape != (2,):
        raise ShapeError(f"bilinear_sample: point must have shape (2,), got {pt.shape}")
    return nd.bilinear2d(fmap, pt.reshape(1, 2), mode=mode)[0]
