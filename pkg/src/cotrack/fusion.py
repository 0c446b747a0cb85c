"""Global spatial attention fusion over per-agent feature maps.

A fixed-weight (seeded, untrained) kernel meant for numeric validation of
the fusion math rather than for learning:

1. Per agent, multi-scale windowed self-attention. Each branch partitions
   the map into non-overlapping s x s windows and runs multi-head scaled
   dot-product attention with a relative-position bias inside every window;
   heads concatenate through a shared output projection and branch outputs
   concatenate along channels, giving P*C channels for P branches.
2. Per location, inter-agent fusion. A shared two-layer MLP scores every
   (receiver, sender) feature pair; a softmax over senders turns the scores
   into convex weights, so the fused vector is a convex combination of the
   agents' vectors at that location.
3. A residual feed-forward block with layer normalization over channels,
   followed by a linear projection back down to the input channel count.

All weights draw from uniform(-0.02, 0.02) under a fixed seed and stay
frozen; serialization keeps them reproducible for golden tests.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ShapeError, ValidationError

WEIGHT_INIT_SPAN = 0.02
LN_EPS = 1e-12
_WEIGHTS_SCHEMA = "cotrack/fusion-weights.v1"


@dataclass
class FeatureMap:
    """One agent's H x W x C feature grid."""

    agent_id: str
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 3:
            raise ShapeError("feature map must be H x W x C, got %s" % (self.data.shape,))
        if not np.isfinite(self.data).all():
            raise ValidationError("data", "feature map must be finite")

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.data.shape


@dataclass
class AttentionTrace:
    """Diagnostics: per-branch window attention and per-location agent weights.

    ``window_attn[p]`` has shape (n_windows, heads, s*s, s*s) with rows
    summing to 1; ``agent_weights`` has shape (H, W, N) summing to 1 over
    the last axis, with ``agent_order`` naming that axis.
    """

    window_attn: List[np.ndarray] = field(default_factory=list)
    agent_weights: Optional[np.ndarray] = None
    agent_order: List[str] = field(default_factory=list)

    def max_row_error(self) -> float:
        worst = 0.0
        for attn in self.window_attn:
            worst = max(worst, float(np.abs(attn.sum(axis=-1) - 1.0).max()))
        if self.agent_weights is not None:
            worst = max(worst, float(np.abs(self.agent_weights.sum(axis=-1) - 1.0).max()))
        return worst


@dataclass
class GsafConfig:
    """Weight bundle for the fusion kernel.

    Shapes, with C = channels, P = len(window_sizes), Cf = P * C:
      w_q/w_k/w_v[p]: (heads, C, head_dim)      per-branch projections
      bias[p]:        (heads, (2s-1)**2)        relative-position tables
      w_o:            (heads * head_dim, C)     shared head merge
      fuse_w1/b1/w2/b2: (2*Cf, fh), (fh,), (fh, 1), (1,)
      ffn_w1/b1/w2/b2:  (Cf, eh), (eh,), (eh, Cf), (Cf,)
      ln_gain/ln_bias:  (Cf,)
      out_proj:         (Cf, C)                 restores C channels
    """

    channels: int
    window_sizes: Tuple[int, ...]
    heads: int
    head_dim: int
    w_q: List[np.ndarray]
    w_k: List[np.ndarray]
    w_v: List[np.ndarray]
    bias: List[np.ndarray]
    w_o: np.ndarray
    fuse_w1: np.ndarray
    fuse_b1: np.ndarray
    fuse_w2: np.ndarray
    fuse_b2: np.ndarray
    ffn_w1: np.ndarray
    ffn_b1: np.ndarray
    ffn_w2: np.ndarray
    ffn_b2: np.ndarray
    ln_gain: np.ndarray
    ln_bias: np.ndarray
    out_proj: np.ndarray
    seed: Optional[int] = None

    @property
    def fused_channels(self) -> int:
        return self.channels * len(self.window_sizes)

    def validate(self) -> None:
        c, h, d = self.channels, self.heads, self.head_dim
        if not self.window_sizes:
            raise ShapeError("at least one window size is required")
        for p, size in enumerate(self.window_sizes):
            if size < 1:
                raise ShapeError("window size must be >= 1, got %d" % size)
            table = (2 * size - 1) ** 2
            for name, arr, want in (
                ("w_q", self.w_q[p], (h, c, d)),
                ("w_k", self.w_k[p], (h, c, d)),
                ("w_v", self.w_v[p], (h, c, d)),
                ("bias", self.bias[p], (h, table)),
            ):
                if arr.shape != want:
                    raise ShapeError(
                        "%s[%d]: expected %s, got %s" % (name, p, want, arr.shape)
                    )
        cf = self.fused_channels
        checks = (
            ("w_o", self.w_o, (h * d, c)),
            ("fuse_w1", self.fuse_w1, (2 * cf, self.fuse_w1.shape[1])),
            ("fuse_w2", self.fuse_w2, (self.fuse_w1.shape[1], 1)),
            ("ffn_w1", self.ffn_w1, (cf, self.ffn_w1.shape[1])),
            ("ffn_w2", self.ffn_w2, (self.ffn_w1.shape[1], cf)),
            ("ln_gain", self.ln_gain, (cf,)),
            ("ln_bias", self.ln_bias, (cf,)),
            ("out_proj", self.out_proj, (cf, c)),
        )
        for name, arr, want in checks:
            if arr.shape != want:
                raise ShapeError("%s: expected %s, got %s" % (name, want, arr.shape))

    def arrays(self) -> List[Tuple[str, np.ndarray]]:
        out: List[Tuple[str, np.ndarray]] = []
        for p in range(len(self.window_sizes)):
            out.append(("w_q.%d" % p, self.w_q[p]))
            out.append(("w_k.%d" % p, self.w_k[p]))
            out.append(("w_v.%d" % p, self.w_v[p]))
            out.append(("bias.%d" % p, self.bias[p]))
        out.extend(
            [
                ("w_o", self.w_o),
                ("fuse_w1", self.fuse_w1),
                ("fuse_b1", self.fuse_b1),
                ("fuse_w2", self.fuse_w2),
                ("fuse_b2", self.fuse_b2),
                ("ffn_w1", self.ffn_w1),
                ("ffn_b1", self.ffn_b1),
                ("ffn_w2", self.ffn_w2),
                ("ffn_b2", self.ffn_b2),
                ("ln_gain", self.ln_gain),
                ("ln_bias", self.ln_bias),
                ("out_proj", self.out_proj),
            ]
        )
        return out


def make_config(
    channels: int,
    window_sizes: Sequence[int] = (2, 4),
    heads: int = 2,
    head_dim: int = 4,
    seed: int = 0,
    fuse_hidden: Optional[int] = None,
    ffn_hidden: Optional[int] = None,
) -> GsafConfig:
    """Seeded frozen weight bundle; every tensor is uniform(-0.02, 0.02)."""
    rng = np.random.default_rng(seed)
    cf = channels * len(window_sizes)
    fuse_hidden = fuse_hidden if fuse_hidden is not None else 2 * channels
    ffn_hidden = ffn_hidden if ffn_hidden is not None else 2 * cf

    def draw(*shape):
        return rng.uniform(-WEIGHT_INIT_SPAN, WEIGHT_INIT_SPAN, size=shape)

    cfg = GsafConfig(
        channels=channels,
        window_sizes=tuple(int(s) for s in window_sizes),
        heads=heads,
        head_dim=head_dim,
        w_q=[draw(heads, channels, head_dim) for _ in window_sizes],
        w_k=[draw(heads, channels, head_dim) for _ in window_sizes],
        w_v=[draw(heads, channels, head_dim) for _ in window_sizes],
        bias=[draw(heads, (2 * s - 1) ** 2) for s in window_sizes],
        w_o=draw(heads * head_dim, channels),
        fuse_w1=draw(2 * cf, fuse_hidden),
        fuse_b1=draw(fuse_hidden),
        fuse_w2=draw(fuse_hidden, 1),
        fuse_b2=draw(1),
        ffn_w1=draw(cf, ffn_hidden),
        ffn_b1=draw(ffn_hidden),
        ffn_w2=draw(ffn_hidden, cf),
        ffn_b2=draw(cf),
        ln_gain=np.ones(cf),
        ln_bias=np.zeros(cf),
        out_proj=draw(cf, channels),
        seed=seed,
    )
    cfg.validate()
    return cfg


def _check_grid(shape: Tuple[int, int, int], cfg: GsafConfig) -> None:
    height, width, chans = shape
    if chans != cfg.channels:
        raise ShapeError("channels: expected %d, got %d" % (cfg.channels, chans))
    for size in cfg.window_sizes:
        if height % size:
            raise ShapeError("height %d not divisible by window %d" % (height, size))
        if width % size:
            raise ShapeError("width %d not divisible by window %d" % (width, size))


def _bias_index(size: int) -> np.ndarray:
    """(s*s, s*s) lookup into the (2s-1)^2 relative-displacement table."""
    coords = np.array([(r, c) for r in range(size) for c in range(size)])
    rel = coords[None, :, :] - coords[:, None, :] + (size - 1)
    return rel[..., 0] * (2 * size - 1) + rel[..., 1]


def _softmax(scores: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = scores - scores.max(axis=axis, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=axis, keepdims=True)


def multiscale_attention(
    fmap: FeatureMap, cfg: GsafConfig
) -> Tuple[FeatureMap, AttentionTrace]:
    """Windowed self-attention per branch; branch outputs concat to P*C."""
    cfg.validate()
    _check_grid(fmap.shape, cfg)
    height, width, chans = fmap.shape
    trace = AttentionTrace()
    branch_outputs = []
    for p, size in enumerate(cfg.window_sizes):
        tokens = size * size
        windows = (
            fmap.data.reshape(height // size, size, width // size, size, chans)
            .transpose(0, 2, 1, 3, 4)
            .reshape(-1, tokens, chans)
        )
        bias_mat = cfg.bias[p][:, _bias_index(size)]  # (heads, tokens, tokens)
        head_outs = []
        attn_all = np.empty((windows.shape[0], cfg.heads, tokens, tokens))
        for h in range(cfg.heads):
            q = windows @ cfg.w_q[p][h]
            k = windows @ cfg.w_k[p][h]
            v = windows @ cfg.w_v[p][h]
            scores = q @ k.transpose(0, 2, 1) / np.sqrt(cfg.head_dim) + bias_mat[h]
            attn = _softmax(scores)
            attn_all[:, h] = attn
            head_outs.append(attn @ v)
        merged = np.concatenate(head_outs, axis=-1) @ cfg.w_o
        grid = (
            merged.reshape(height // size, width // size, size, size, chans)
            .transpose(0, 2, 1, 3, 4)
            .reshape(height, width, chans)
        )
        branch_outputs.append(grid)
        trace.window_attn.append(attn_all)
    fused = np.concatenate(branch_outputs, axis=-1)
    return FeatureMap(fmap.agent_id, fused), trace


def interagent_fuse(
    maps: Sequence[FeatureMap], ego_id: str, cfg: GsafConfig
) -> Tuple[FeatureMap, AttentionTrace]:
    """Convex per-location blend of all agents' features toward the ego agent.

    A shared MLP scores concat(ego vector, sender vector) per location; the
    softmax over senders (the ego included) weights the blend. Agents are
    processed in sorted-id order so the result is independent of input order.
    """
    if not maps:
        raise ShapeError("at least one agent feature map is required")
    by_id = {m.agent_id: m for m in maps}
    if len(by_id) != len(maps):
        raise ValidationError("maps", "duplicate agent ids")
    if ego_id not in by_id:
        raise ValidationError("ego_id", "%r not among the agent maps" % ego_id)
    order = sorted(by_id)
    shape = by_id[ego_id].shape
    for m in maps:
        if m.shape != shape:
            raise ShapeError(
                "agent %s: map shape %s differs from %s" % (m.agent_id, m.shape, shape)
            )
    stack = np.stack([by_id[a].data for a in order])  # (N, H, W, Cf)
    ego = by_id[ego_id].data
    n = len(order)
    pair = np.concatenate(
        [np.broadcast_to(ego, stack.shape), stack], axis=-1
    )  # (N, H, W, 2Cf)
    hidden = np.tanh(pair @ cfg.fuse_w1 + cfg.fuse_b1)
    logits = (hidden @ cfg.fuse_w2 + cfg.fuse_b2)[..., 0]  # (N, H, W)
    weights = _softmax(logits, axis=0)
    fused = np.einsum("nhw,nhwc->hwc", weights, stack)
    trace = AttentionTrace(
        agent_weights=weights.transpose(1, 2, 0), agent_order=list(order)
    )
    return FeatureMap(ego_id, fused), trace


def residual_ffn(fmap: FeatureMap, cfg: GsafConfig) -> FeatureMap:
    """LayerNorm(x + MLP(x)) over the channel axis; shape preserving."""
    x = fmap.data
    if x.shape[-1] != cfg.ffn_w1.shape[0]:
        raise ShapeError(
            "channels %d do not match FFN input %d" % (x.shape[-1], cfg.ffn_w1.shape[0])
        )
    mlp = np.tanh(x @ cfg.ffn_w1 + cfg.ffn_b1) @ cfg.ffn_w2 + cfg.ffn_b2
    y = x + mlp
    mean = y.mean(axis=-1, keepdims=True)
    var = y.var(axis=-1, keepdims=True)
    normed = (y - mean) / np.sqrt(var + LN_EPS)
    return FeatureMap(fmap.agent_id, normed * cfg.ln_gain + cfg.ln_bias)


def gsaf_forward(maps: Sequence[FeatureMap], ego_id: str, cfg: GsafConfig) -> FeatureMap:
    """Full kernel: per-agent attention, inter-agent fusion, FFN, projection.

    Output is an H x W x C map for the ego agent; with a single agent the
    fusion stage is an exact identity. The final projection restores the
    input channel count from the P*C fused channels.
    """
    attended = [multiscale_attention(m, cfg)[0] for m in maps]
    fused, _ = interagent_fuse(attended, ego_id, cfg)
    out = residual_ffn(fused, cfg)
    return FeatureMap(ego_id, out.data @ cfg.out_proj)


def naive_forward(maps: Sequence[FeatureMap], ego_id: str, cfg: GsafConfig) -> FeatureMap:
    """Reference implementation with explicit per-window loops.

    Kept for the demo command's oracle diff; intentionally written without
    the batched reshapes of the fast path.
    """
    cfg.validate()
    attended = []
    for fmap in maps:
        _check_grid(fmap.shape, cfg)
        height, width, chans = fmap.shape
        branches = []
        for p, size in enumerate(cfg.window_sizes):
            out = np.zeros((height, width, chans))
            idx = _bias_index(size)
            for r0 in range(0, height, size):
                for c0 in range(0, width, size):
                    window = fmap.data[r0 : r0 + size, c0 : c0 + size].reshape(-1, chans)
                    heads = []
                    for h in range(cfg.heads):
                        q = window @ cfg.w_q[p][h]
                        k = window @ cfg.w_k[p][h]
                        v = window @ cfg.w_v[p][h]
                        scores = q @ k.T / np.sqrt(cfg.head_dim) + cfg.bias[p][h][idx]
                        attn = _softmax(scores)
                        heads.append(attn @ v)
                    merged = np.concatenate(heads, axis=-1) @ cfg.w_o
                    out[r0 : r0 + size, c0 : c0 + size] = merged.reshape(
                        size, size, chans
                    )
            branches.append(out)
        attended.append(FeatureMap(fmap.agent_id, np.concatenate(branches, axis=-1)))
    fused, _ = interagent_fuse(attended, ego_id, cfg)
    out = residual_ffn(fused, cfg)
    return FeatureMap(ego_id, out.data @ cfg.out_proj)


def save_config(cfg: GsafConfig, path) -> None:
    """Little-endian float64 flat binary with a JSON header line."""
    cfg.validate()
    arrays = cfg.arrays()
    header = {
        "schema": _WEIGHTS_SCHEMA,
        "seed": cfg.seed,
        "channels": cfg.channels,
        "window_sizes": list(cfg.window_sizes),
        "heads": cfg.heads,
        "head_dim": cfg.head_dim,
        "arrays": [{"name": name, "shape": list(arr.shape)} for name, arr in arrays],
        "dtype": "<f8",
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for _, arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_config(path) -> GsafConfig:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        if header.get("schema") != _WEIGHTS_SCHEMA:
            raise ValidationError("schema", "unexpected weight file schema")
        blobs: Dict[str, np.ndarray] = {}
        for spec in header["arrays"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(count * 8)
            if len(raw) != count * 8:
                raise ValidationError("arrays", "truncated weight file")
            blobs[spec["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
    sizes = header["window_sizes"]
    cfg = GsafConfig(
        channels=header["channels"],
        window_sizes=tuple(sizes),
        heads=header["heads"],
        head_dim=header["head_dim"],
        w_q=[blobs["w_q.%d" % p] for p in range(len(sizes))],
        w_k=[blobs["w_k.%d" % p] for p in range(len(sizes))],
        w_v=[blobs["w_v.%d" % p] for p in range(len(sizes))],
        bias=[blobs["bias.%d" % p] for p in range(len(sizes))],
        w_o=blobs["w_o"],
        fuse_w1=blobs["fuse_w1"],
        fuse_b1=blobs["fuse_b1"],
        fuse_w2=blobs["fuse_w2"],
        fuse_b2=blobs["fuse_b2"],
        ffn_w1=blobs["ffn_w1"],
        ffn_b1=blobs["ffn_b1"],
        ffn_w2=blobs["ffn_w2"],
        ffn_b2=blobs["ffn_b2"],
        ln_gain=blobs["ln_gain"],
        ln_bias=blobs["ln_bias"],
        out_proj=blobs["out_proj"],
        seed=header.get("seed"),
    )
    cfg.validate()
    return cfg
