"""A small RoBERTa-style encoder with a dual-ordering pair head, in numpy.

Forward and backward passes are written out by hand. Each pair is encoded in
both concatenation orders (alpha+beta and beta+alpha); the two pooled ``<s>``
states are concatenated (``concat`` mode) or summed (``symmetric`` mode) and
fed to a tanh dense layer and a linear output layer.

Encoder blocks are post-norm: ``x = LN(x + Attn(x)); x = LN(x + FFN(x))``
with exact GELU. Only the ``<s>`` position is read out, so the last block
computes its query side for position 0 alone; the result is identical to
running the full block and slicing.
"""
from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import erf

HEAD_MODES = ("concat", "symmetric")
_NEG = -1e30


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    max_len: int = 512
    num_layers: int = 2
    num_heads: int = 4
    model_dim: int = 64
    ff_dim: int | None = None
    dense_dim: int | None = None
    dropout_rate: float = 0.1
    num_classes: int = 2
    head_mode: str = "concat"
    pad_id: int = 2
    layer_norm_eps: float = 1e-5
    init_std: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if self.model_dim % self.num_heads:
            raise ValueError("model_dim must be divisible by num_heads")
        if self.head_mode not in HEAD_MODES:
            raise ValueError(f"head_mode must be one of {HEAD_MODES}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.ff_dim is None:
            object.__setattr__(self, "ff_dim", 4 * self.model_dim)
        if self.dense_dim is None:
            object.__setattr__(self, "dense_dim", self.model_dim)

    @classmethod
    def full_scale(cls, vocab_size: int, **kw) -> "ModelConfig":
        kw = {"num_layers": 6, "num_heads": 12, "model_dim": 768, **kw}
        return cls(vocab_size, **kw)

    @property
    def head_input_dim(self) -> int:
        return 2 * self.model_dim if self.head_mode == "concat" else self.model_dim

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "ModelConfig":
        return cls(**d)


def parameter_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    D, F = cfg.model_dim, cfg.ff_dim
    shapes: dict[str, tuple[int, ...]] = {
        "tok_emb": (cfg.vocab_size, D),
        "pos_emb": (cfg.max_len, D),
        "emb_ln.g": (D,),
        "emb_ln.b": (D,),
    }
    for l in range(cfg.num_layers):
        p = f"layer{l}."
        for w in ("q", "k", "v", "o"):
            shapes[p + f"attn.w{w}"] = (D, D)
            shapes[p + f"attn.b{w}"] = (D,)
        shapes[p + "ln1.g"] = (D,)
        shapes[p + "ln1.b"] = (D,)
        shapes[p + "ff.w1"] = (D, F)
        shapes[p + "ff.b1"] = (F,)
        shapes[p + "ff.w2"] = (F, D)
        shapes[p + "ff.b2"] = (D,)
        shapes[p + "ln2.g"] = (D,)
        shapes[p + "ln2.b"] = (D,)
    shapes["head.dense.w"] = (cfg.head_input_dim, cfg.dense_dim)
    shapes["head.dense.b"] = (cfg.dense_dim,)
    shapes["head.out.w"] = (cfg.dense_dim, cfg.num_classes)
    shapes["head.out.b"] = (cfg.num_classes,)
    return shapes


def init_parameters(cfg: ModelConfig, dtype=np.float32) -> dict[str, np.ndarray]:
    """Normal(0, init_std) weights, zero biases, unit layer-norm gains."""
    rng = np.random.default_rng(cfg.seed)
    params = {}
    for name, shape in parameter_shapes(cfg).items():
        leaf = name.rsplit(".", 1)[-1]
        if leaf == "g":
            arr = np.ones(shape)
        elif leaf.startswith("b"):
            arr = np.zeros(shape)
        else:
            arr = rng.normal(0.0, cfg.init_std, size=shape)
        params[name] = arr.astype(dtype)
    return params


def _layer_norm(x, g, b, eps):
    mu = x.mean(-1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(-1, keepdims=True) + eps)
    xhat = xc * inv
    return xhat * g + b, (xhat, inv, g)


def _layer_norm_back(dy, cache):
    xhat, inv, g = cache
    lead = tuple(range(dy.ndim - 1))
    dg = (dy * xhat).sum(lead)
    db = dy.sum(lead)
    dxh = dy * g
    dx = inv * (dxh - dxh.mean(-1, keepdims=True) - xhat * (dxh * xhat).mean(-1, keepdims=True))
    return dx, dg, db


_SQRT_HALF = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _gelu(x):
    """Exact GELU; also returns the normal CDF for the backward pass."""
    cdf = 0.5 * (1.0 + erf(x * _SQRT_HALF))
    return x * cdf, cdf


def _gelu_grad(x, cdf):
    return cdf + x * _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def _wgrad(x, dy):
    """Weight gradient summed over all leading axes."""
    return x.reshape(-1, x.shape[-1]).T @ dy.reshape(-1, dy.shape[-1])


def _dropout(x, rate, rng):
    if rate == 0.0 or rng is None:
        return x, None
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / x.dtype.type(1.0 - rate)
    return x * keep, keep


def _trim(ids: np.ndarray, pad_id: int) -> np.ndarray:
    """Drop the all-pad column tail; exact because pads are masked out."""
    nonpad = (ids != pad_id).any(0)
    last = int(np.flatnonzero(nonpad)[-1]) + 1 if nonpad.any() else 1
    return ids[:, :last]


def _encoder_forward(ids, params, cfg, rng=None, keep_cache=False):
    """Pooled ``<s>`` states for a batch of token sequences ``(N, T)``."""
    ids = _trim(np.asarray(ids), cfg.pad_id)
    N, T = ids.shape
    if T > cfg.max_len:
        raise ValueError(f"sequence length {T} exceeds max_len {cfg.max_len}")
    D, H = cfg.model_dim, cfg.num_heads
    dh = D // H
    dt = params["tok_emb"].dtype
    scale = dt.type(1.0 / math.sqrt(dh))
    rate = cfg.dropout_rate if rng is not None else 0.0
    eps = cfg.layer_norm_eps
    padded = ids == cfg.pad_id
    bias = np.where(padded, _NEG, 0.0).astype(dt)[:, None, None, :] if padded.any() else None

    emb = params["tok_emb"][ids] + params["pos_emb"][:T]
    x, ln_c = _layer_norm(emb, params["emb_ln.g"], params["emb_ln.b"], eps)
    x, drop_e = _dropout(x, rate, rng)
    caches = []
    for l in range(cfg.num_layers):
        p = f"layer{l}."
        last = l == cfg.num_layers - 1
        xq = x[:, :1] if last else x
        Tq = xq.shape[1]
        q = (xq @ params[p + "attn.wq"] + params[p + "attn.bq"]).reshape(N, Tq, H, dh).transpose(0, 2, 1, 3)
        q = q * scale
        k = (x @ params[p + "attn.wk"] + params[p + "attn.bk"]).reshape(N, T, H, dh).transpose(0, 2, 1, 3)
        v = (x @ params[p + "attn.wv"] + params[p + "attn.bv"]).reshape(N, T, H, dh).transpose(0, 2, 1, 3)
        att = q @ k.transpose(0, 1, 3, 2)
        if bias is not None:
            att += bias
        att -= att.max(-1, keepdims=True)
        np.exp(att, out=att)
        att /= att.sum(-1, keepdims=True)
        ctx = (att @ v).transpose(0, 2, 1, 3).reshape(N, Tq, D)
        a = ctx @ params[p + "attn.wo"] + params[p + "attn.bo"]
        a, drop_a = _dropout(a, rate, rng)
        h, ln1_c = _layer_norm(xq + a, params[p + "ln1.g"], params[p + "ln1.b"], eps)
        u = h @ params[p + "ff.w1"] + params[p + "ff.b1"]
        gu, cdf = _gelu(u)
        f = gu @ params[p + "ff.w2"] + params[p + "ff.b2"]
        f, drop_f = _dropout(f, rate, rng)
        x_out, ln2_c = _layer_norm(h + f, params[p + "ln2.g"], params[p + "ln2.b"], eps)
        if keep_cache:
            caches.append(dict(x=x, xq=xq, q=q, k=k, v=v, att=att, ctx=ctx, drop_a=drop_a,
                               ln1=ln1_c, h=h, u=u, gu=gu, cdf=cdf, drop_f=drop_f, ln2=ln2_c))
        x = x_out
    pooled = x[:, 0]
    cache = dict(ids=ids, ln_e=ln_c, drop_e=drop_e, layers=caches) if keep_cache else None
    return pooled, cache


def _encoder_backward(d_pooled, cache, params, cfg, grads):
    ids = cache["ids"]
    N, T = ids.shape
    D, H = cfg.model_dim, cfg.num_heads
    dh = D // H
    scale = params["tok_emb"].dtype.type(1.0 / math.sqrt(dh))
    dx = np.zeros((N, 1, D), dtype=d_pooled.dtype)
    dx[:, 0] = d_pooled
    for l in reversed(range(cfg.num_layers)):
        p = f"layer{l}."
        c = cache["layers"][l]
        Tq = c["xq"].shape[1]
        dz2, grads[p + "ln2.g"], grads[p + "ln2.b"] = _layer_norm_back(dx, c["ln2"])
        df = dz2 if c["drop_f"] is None else dz2 * c["drop_f"]
        grads[p + "ff.w2"] = _wgrad(c["gu"], df)
        grads[p + "ff.b2"] = df.sum((0, 1))
        du = (df @ params[p + "ff.w2"].T) * _gelu_grad(c["u"], c["cdf"])
        grads[p + "ff.w1"] = _wgrad(c["h"], du)
        grads[p + "ff.b1"] = du.sum((0, 1))
        dh_ = dz2 + du @ params[p + "ff.w1"].T
        dz1, grads[p + "ln1.g"], grads[p + "ln1.b"] = _layer_norm_back(dh_, c["ln1"])
        da = dz1 if c["drop_a"] is None else dz1 * c["drop_a"]
        grads[p + "attn.wo"] = _wgrad(c["ctx"], da)
        grads[p + "attn.bo"] = da.sum((0, 1))
        dctx = (da @ params[p + "attn.wo"].T).reshape(N, Tq, H, dh).transpose(0, 2, 1, 3)
        att = c["att"]
        dv = att.transpose(0, 1, 3, 2) @ dctx
        ds = dctx @ c["v"].transpose(0, 1, 3, 2)
        ds -= (ds * att).sum(-1, keepdims=True)
        ds *= att
        dq = (ds @ c["k"]) * scale
        dk = ds.transpose(0, 1, 3, 2) @ c["q"]
        dq = dq.transpose(0, 2, 1, 3).reshape(N, Tq, D)
        dk = dk.transpose(0, 2, 1, 3).reshape(N, T, D)
        dv = dv.transpose(0, 2, 1, 3).reshape(N, T, D)
        x, xq = c["x"], c["xq"]
        grads[p + "attn.wq"] = _wgrad(xq, dq)
        grads[p + "attn.bq"] = dq.sum((0, 1))
        grads[p + "attn.wk"] = _wgrad(x, dk)
        grads[p + "attn.bk"] = dk.sum((0, 1))
        grads[p + "attn.wv"] = _wgrad(x, dv)
        grads[p + "attn.bv"] = dv.sum((0, 1))
        dx_new = dk @ params[p + "attn.wk"].T + dv @ params[p + "attn.wv"].T
        dx_new[:, :Tq] += dz1 + dq @ params[p + "attn.wq"].T
        dx = dx_new
    if cache["drop_e"] is not None:
        dx = dx * cache["drop_e"]
    demb, grads["emb_ln.g"], grads["emb_ln.b"] = _layer_norm_back(dx, cache["ln_e"])
    flat = demb.reshape(-1, D)
    onehot = np.zeros((flat.shape[0], cfg.vocab_size), dtype=flat.dtype)
    onehot[np.arange(flat.shape[0]), ids.ravel()] = 1.0
    grads["tok_emb"] = onehot.T @ flat
    dpos = np.zeros_like(params["pos_emb"])
    dpos[:T] = demb.sum(0)
    grads["pos_emb"] = dpos


def encode_sequence(ids, params: dict, cfg: ModelConfig) -> np.ndarray:
    """Pooled ``<s>`` state(s): ``(D,)`` for one sequence, ``(N, D)`` for a batch."""
    arr = np.asarray(ids)
    pooled, _ = _encoder_forward(np.atleast_2d(arr), params, cfg)
    return pooled[0] if arr.ndim == 1 else pooled


def attention_maps(ids, params: dict, cfg: ModelConfig) -> list[np.ndarray]:
    """Per-layer attention weights ``(N, heads, queries, keys)`` for inspection."""
    _, cache = _encoder_forward(np.atleast_2d(np.asarray(ids)), params, cfg, keep_cache=True)
    return [c["att"] for c in cache["layers"]]


def _combine(h_ab, h_ba, mode):
    return np.concatenate([h_ab, h_ba], axis=1) if mode == "concat" else h_ab + h_ba


def _head_forward(z, params):
    d = np.tanh(z @ params["head.dense.w"] + params["head.dense.b"])
    return d @ params["head.out.w"] + params["head.out.b"], d


def pair_forward(ab_ids, ba_ids, params: dict, cfg: ModelConfig) -> np.ndarray:
    """Logits ``(B, num_classes)`` for pairs given in both orderings."""
    ab, ba = np.atleast_2d(ab_ids), np.atleast_2d(ba_ids)
    B = ab.shape[0]
    pooled, _ = _encoder_forward(np.concatenate([ab, ba]), params, cfg)
    logits, _ = _head_forward(_combine(pooled[:B], pooled[B:], cfg.head_mode), params)
    return logits


def predict_probabilities(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(-1, keepdims=True)


def loss_and_gradients(
    ab_ids,
    ba_ids,
    labels,
    params: dict,
    cfg: ModelConfig,
    rng: np.random.Generator | None = None,
    sample_ids: Sequence[int] | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy over the batch and its exact gradient.

    Dropout is applied only when ``rng`` is given.
    """
    ab, ba = np.atleast_2d(ab_ids), np.atleast_2d(ba_ids)
    y = np.asarray(labels, dtype=np.int64)
    B = ab.shape[0]
    pooled, cache = _encoder_forward(np.concatenate([ab, ba]), params, cfg, rng=rng, keep_cache=True)
    z = _combine(pooled[:B], pooled[B:], cfg.head_mode)
    logits, d = _head_forward(z, params)

    shifted = logits - logits.max(-1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(-1, keepdims=True))
    per_sample = -logp[np.arange(B), y]
    if not np.all(np.isfinite(per_sample)):
        bad = np.flatnonzero(~np.isfinite(per_sample))
        who = [sample_ids[i] for i in bad] if sample_ids is not None else bad.tolist()
        raise FloatingPointError(f"non-finite loss for samples {who}")
    loss = float(per_sample.mean())

    grads: dict[str, np.ndarray] = {}
    dlogits = np.exp(logp)
    dlogits[np.arange(B), y] -= 1.0
    dlogits /= B
    grads["head.out.w"] = d.T @ dlogits
    grads["head.out.b"] = dlogits.sum(0)
    dd = (dlogits @ params["head.out.w"].T) * (1.0 - d * d)
    grads["head.dense.w"] = z.T @ dd
    grads["head.dense.b"] = dd.sum(0)
    dz = dd @ params["head.dense.w"].T
    if cfg.head_mode == "concat":
        d_pooled = np.concatenate([dz[:, : cfg.model_dim], dz[:, cfg.model_dim:]])
    else:
        d_pooled = np.concatenate([dz, dz])
    _encoder_backward(d_pooled, cache, params, cfg, grads)
    return loss, {name: grads[name] for name in params}


# -- checkpoints -----------------------------------------------------------

_MAGIC = b"CSFICKPT"


class CheckpointError(ValueError):
    pass


def save_checkpoint(params: dict, cfg: ModelConfig, path: str | Path, extra: dict | None = None) -> Path:
    """Write a JSON manifest followed by a little-endian float32 blob.

    Layout: 8-byte magic, 8-byte manifest length, manifest, blob.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    shapes = parameter_shapes(cfg)
    chunks, tensors, offset = [], [], 0
    for name, shape in shapes.items():
        arr = np.ascontiguousarray(params[name], dtype="<f4")
        if arr.shape != shape:
            raise CheckpointError(f"{name}: shape {arr.shape} does not match config {shape}")
        raw = arr.tobytes()
        tensors.append({"name": name, "shape": list(shape), "offset": offset, "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    blob = b"".join(chunks)
    manifest = {
        "format": 1,
        "dtype": "float32-le",
        "config": cfg.to_json(),
        "tensors": tensors,
        "blob_bytes": len(blob),
        "blob_sha256": hashlib.sha256(blob).hexdigest(),
        "extra": extra or {},
    }
    header = json.dumps(manifest, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC + struct.pack("<Q", len(header)) + header + blob)
    return path


def load_checkpoint(path: str | Path, expected: ModelConfig | None = None):
    """Return ``(params, cfg, extra)``; raise :class:`CheckpointError` on any
    corruption or on shapes that disagree with ``expected``."""
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:8] != _MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    (hlen,) = struct.unpack("<Q", data[8:16])
    if 16 + hlen > len(data):
        raise CheckpointError(f"{path}: truncated manifest")
    try:
        manifest = json.loads(data[16 : 16 + hlen])
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: corrupt manifest") from exc
    blob = data[16 + hlen :]
    if len(blob) != manifest["blob_bytes"]:
        raise CheckpointError(f"{path}: blob has {len(blob)} bytes, expected {manifest['blob_bytes']}")
    if hashlib.sha256(blob).hexdigest() != manifest["blob_sha256"]:
        raise CheckpointError(f"{path}: blob checksum mismatch")
    cfg = ModelConfig.from_json(manifest["config"])
    shapes = parameter_shapes(cfg)
    if expected is not None:
        want = parameter_shapes(expected)
        for name in set(want) | set(shapes):
            if want.get(name) != shapes.get(name):
                raise CheckpointError(
                    f"{path}: tensor {name} has shape {shapes.get(name)}, config expects {want.get(name)}"
                )
    params = {}
    for t in manifest["tensors"]:
        if tuple(t["shape"]) != shapes.get(t["name"]):
            raise CheckpointError(f"{path}: manifest shape of {t['name']} disagrees with its config")
        raw = blob[t["offset"] : t["offset"] + t["nbytes"]]
        params[t["name"]] = np.frombuffer(raw, dtype="<f4").reshape(t["shape"]).astype(np.float32)
    if set(params) != set(shapes):
        raise CheckpointError(f"{path}: tensor set does not match config")
    return params, cfg, manifest["extra"]


def parameter_count(params: dict) -> int:
    return int(sum(a.size for a in params.values()))
