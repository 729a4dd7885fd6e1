"""Patch-transformer encoder with contact-prediction decoder and training loop.

Architecture: flattened distance-sorted patches are tokenized by a two-layer
MLP, learned positional embeddings of the patch centers are added, and a hand
token (position + 6D orientation) is appended. Two pre-normalization
transformer blocks (4-head self-attention, GELU feed-forward) mix the 17
tokens; a shared MLP decodes each patch token into one contact logit.

Inputs are expressed in an object-centered frame: the cloud is shifted so its
centroid is at the origin and the hand position is shifted the same way.

Checkpoint layout (little-endian): magic "CKPT", u32 version, then per tensor
u16 name length, name bytes, u8 rank, u32 dims, f64 values.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .contactgen import patch_labels
from .errors import (
    BadMagic,
    Divergence,
    EmptyDataset,
    NonFiniteGradient,
    NonFiniteInput,
    ShapeMismatch,
    TruncatedRecord,
    UnsupportedVersion,
)
from .geom import rot_to_6d
from .patches import PatchConfig, PatchSet, make_patches

CHECKPOINT_MAGIC = b"CKPT"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class EncoderConfig:
    d_model: int = 128
    n_layers: int = 2
    n_heads: int = 4
    ffn_dim: int = 256
    patch: PatchConfig = field(default_factory=PatchConfig)
    hand_dim: int = 9

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ShapeMismatch("d_model must be divisible by n_heads")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads

    @property
    def patch_dim(self) -> int:
        return 3 * self.patch.patch_size

    @property
    def n_tokens(self) -> int:
        return self.patch.n_patches + 1


@dataclass(frozen=True)
class HandState:
    position: np.ndarray     # (3,)
    orientation: np.ndarray  # (6,) first two rotation-matrix columns

    def vector(self) -> np.ndarray:
        v = np.concatenate(
            [np.asarray(self.position, dtype=np.float64).reshape(3),
             np.asarray(self.orientation, dtype=np.float64).reshape(6)]
        )
        if not np.all(np.isfinite(v)):
            raise NonFiniteInput("non-finite hand state")
        return v


def init_encoder_params(cfg: EncoderConfig = EncoderConfig(), seed: int = 0) -> dict[str, Tensor]:
    rng = np.random.default_rng(seed)
    d, f = cfg.d_model, cfg.ffn_dim

    def w(*shape):
        return Tensor(rng.normal(0.0, 0.02, size=shape))

    def b(n):
        return Tensor(np.zeros(n))

    params = {
        "tok.w1": w(cfg.patch_dim, d), "tok.b1": b(d),
        "tok.w2": w(d, d), "tok.b2": b(d),
        "pos.w": w(3, d), "pos.b": b(d),
        "hand.w": w(cfg.hand_dim, d), "hand.b": b(d),
    }
    for i in range(cfg.n_layers):
        p = f"blk{i}."
        params.update({
            p + "ln1.g": Tensor(np.ones(d)), p + "ln1.b": b(d),
            p + "wq": w(d, d), p + "bq": b(d),
            p + "wk": w(d, d), p + "bk": b(d),
            p + "wv": w(d, d), p + "bv": b(d),
            p + "wo": w(d, d), p + "bo": b(d),
            p + "ln2.g": Tensor(np.ones(d)), p + "ln2.b": b(d),
            p + "ffn.w1": w(d, f), p + "ffn.b1": b(f),
            p + "ffn.w2": w(f, d), p + "ffn.b2": b(d),
        })
    params.update({
        "dec.w1": w(d, d // 2), "dec.b1": b(d // 2),
        "dec.w2": w(d // 2, 1), "dec.b2": b(1),
    })
    return params


def _self_attention(params, prefix, x: Tensor, cfg: EncoderConfig) -> Tensor:
    batch, tokens = x.shape[0], x.shape[1]
    h, dh = cfg.n_heads, cfg.head_dim
    q = ad.linear(x, params[prefix + "wq"], params[prefix + "bq"])
    k = ad.linear(x, params[prefix + "wk"], params[prefix + "bk"])
    v = ad.linear(x, params[prefix + "wv"], params[prefix + "bv"])
    split = lambda t: ad.transpose(ad.reshape(t, (batch, tokens, h, dh)), (0, 2, 1, 3))
    q, k, v = split(q), split(k), split(v)
    scores = ad.scale(ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))), 1.0 / np.sqrt(dh))
    attn = ad.softmax(scores)
    out = ad.matmul(attn, v)
    out = ad.reshape(ad.transpose(out, (0, 2, 1, 3)), (batch, tokens, cfg.d_model))
    return ad.linear(out, params[prefix + "wo"], params[prefix + "bo"])


def _encode_graph(params, cfg: EncoderConfig, patch_flat, centers, hand) -> Tensor:
    """Token mixing over a batch; returns the (B, 17, d) token tensor."""
    tok = ad.linear(
        ad.gelu(ad.linear(Tensor(patch_flat), params["tok.w1"], params["tok.b1"])),
        params["tok.w2"], params["tok.b2"],
    )
    pos = ad.linear(Tensor(centers), params["pos.w"], params["pos.b"])
    patch_tokens = ad.add(tok, pos)
    hand_tok = ad.linear(Tensor(hand), params["hand.w"], params["hand.b"])
    hand_tok = ad.reshape(hand_tok, (hand.shape[0], 1, cfg.d_model))
    x = ad.concat([patch_tokens, hand_tok], axis=1)
    for i in range(cfg.n_layers):
        p = f"blk{i}."
        h = ad.layer_norm(x, params[p + "ln1.g"], params[p + "ln1.b"])
        x = ad.add(x, _self_attention(params, p, h, cfg))
        h = ad.layer_norm(x, params[p + "ln2.g"], params[p + "ln2.b"])
        ff = ad.linear(ad.gelu(ad.linear(h, params[p + "ffn.w1"], params[p + "ffn.b1"])),
                       params[p + "ffn.w2"], params[p + "ffn.b2"])
        x = ad.add(x, ff)
    return x


def _decode_graph(params, patch_tokens: Tensor) -> Tensor:
    """Shared per-patch MLP down to one logit per patch: (B, P, d) -> (B, P)."""
    h = ad.gelu(ad.linear(patch_tokens, params["dec.w1"], params["dec.b1"]))
    logits = ad.linear(h, params["dec.w2"], params["dec.b2"])
    return ad.reshape(logits, logits.shape[:-1])


def _check_batch_shapes(cfg, patch_flat, centers, hand):
    n_p = cfg.patch.n_patches
    if patch_flat.shape[1:] != (n_p, cfg.patch_dim):
        raise ShapeMismatch(f"patch batch shaped {patch_flat.shape}")
    if centers.shape[1:] != (n_p, 3) or hand.shape[1:] != (cfg.hand_dim,):
        raise ShapeMismatch("centers or hand state shaped incorrectly")
    for arr in (patch_flat, centers, hand):
        if not np.all(np.isfinite(arr)):
            raise NonFiniteInput("non-finite encoder input")


def encode(params, patches: PatchSet, hand: HandState, cfg: EncoderConfig = EncoderConfig()):
    """Single-sample forward pass.

    Returns (patch_embeddings (n_patches, d_model), hand_embedding (d_model,)).
    """
    patch_flat = patches.patches.reshape(1, patches.n_patches, -1)
    centers = patches.centers.reshape(1, patches.n_patches, 3)
    hand_vec = hand.vector().reshape(1, -1)
    _check_batch_shapes(cfg, patch_flat, centers, hand_vec)
    x = _encode_graph(params, cfg, patch_flat, centers, hand_vec)
    values = x.values[0]
    return values[: cfg.patch.n_patches].copy(), values[cfg.patch.n_patches].copy()


def decode_contact(params, patch_embeddings, cfg: EncoderConfig = EncoderConfig()) -> np.ndarray:
    emb = np.asarray(patch_embeddings, dtype=np.float64)
    if emb.shape != (cfg.patch.n_patches, cfg.d_model):
        raise ShapeMismatch(f"expected ({cfg.patch.n_patches}, {cfg.d_model}), got {emb.shape}")
    out = _decode_graph(params, Tensor(emb.reshape(1, *emb.shape)))
    return out.values[0].copy()


def bce_loss(logits, labels) -> float:
    """Stable elementwise mean of max(z,0) - z*y + log(1 + exp(-|z|))."""
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    return float(np.mean(np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))))


def batch_loss_graph(params, cfg, patch_flat, centers, hand, labels) -> Tensor:
    _check_batch_shapes(cfg, patch_flat, centers, hand)
    x = _encode_graph(params, cfg, patch_flat, centers, hand)
    patch_tokens = ad.narrow(x, 1, 0, cfg.patch.n_patches)
    logits = _decode_graph(params, patch_tokens)
    return ad.bce_with_logits_mean(logits, labels)


def backward(params, batch, cfg: EncoderConfig = EncoderConfig()):
    """Mean-BCE loss and its gradient for every parameter on one batch.

    batch holds patch_flat (B,P,3k), centers (B,P,3), hand (B,9), labels (B,P).
    """
    loss = batch_loss_graph(params, cfg, batch["patch_flat"], batch["centers"],
                            batch["hand"], batch["labels"])
    ad.backward(loss)
    grads = {}
    for name, p in params.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.values)
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"gradient of {name} is not finite")
        grads[name] = g
    return float(loss.values), grads


def batch_logits(params, cfg, patch_flat, centers, hand) -> np.ndarray:
    x = _encode_graph(params, cfg, patch_flat, centers, hand)
    patch_tokens = ad.narrow(x, 1, 0, cfg.patch.n_patches)
    return _decode_graph(params, patch_tokens).values


# ----------------------------------------------------------------- training


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    lr: float = 1e-3
    batch_size: int = 32
    weight_decay: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    val_fraction: float = 0.1
    warmup_steps: int = 0
    cosine_decay: bool = False


@dataclass
class TrainReport:
    train_losses: list
    val_accuracy: list
    val_precision: list
    val_recall: list
    majority_baseline: float
    n_train: int
    n_val: int

    @property
    def final_accuracy(self) -> float:
        return self.val_accuracy[-1]


# Coordinates are fed to the network in decimeters: desk-scale offsets in
# meters are two orders of magnitude below unit scale, which stalls
# optimization of the geometric decision boundary.
FEATURE_SCALE = 10.0


def record_features(records, patch_cfg: PatchConfig = PatchConfig()):
    """Object-centered features for every record.

    The cloud is shifted so its centroid sits at the origin and the hand
    position is expressed in the same shifted frame; all coordinates are then
    multiplied by FEATURE_SCALE.
    """
    n = len(records)
    n_p, k = patch_cfg.n_patches, patch_cfg.patch_size
    patch_flat = np.empty((n, n_p, 3 * k))
    centers = np.empty((n, n_p, 3))
    hand = np.empty((n, 9))
    labels = np.empty((n, n_p), dtype=bool)
    for i, rec in enumerate(records):
        pts = rec.points.astype(np.float64)
        centroid = pts.mean(axis=0)
        ps = make_patches(pts - centroid, patch_cfg)
        patch_flat[i] = ps.patches.reshape(n_p, 3 * k) * FEATURE_SCALE
        centers[i] = ps.centers * FEATURE_SCALE
        pose = rec.gripper_pose
        hand[i] = np.concatenate([(pose.translation - centroid) * FEATURE_SCALE,
                                  rot_to_6d(pose.rotation)])
        labels[i] = patch_labels(rec, ps)
    return {"patch_flat": patch_flat, "centers": centers, "hand": hand, "labels": labels}


def _metrics(logits: np.ndarray, labels: np.ndarray) -> dict:
    pred = logits > 0.0
    tp = int(np.sum(pred & labels))
    fp = int(np.sum(pred & ~labels))
    fn = int(np.sum(~pred & labels))
    correct = int(np.sum(pred == labels))
    return {
        "accuracy": correct / labels.size,
        "precision": tp / (tp + fp) if tp + fp else 0.0,
        "recall": tp / (tp + fn) if tp + fn else 0.0,
    }


def evaluate(params, features, cfg: EncoderConfig = EncoderConfig(),
             batch_size: int = 256) -> dict:
    logits = []
    n = len(features["labels"])
    for s in range(0, n, batch_size):
        sl = slice(s, s + batch_size)
        logits.append(batch_logits(params, cfg, features["patch_flat"][sl],
                                   features["centers"][sl], features["hand"][sl]))
    return _metrics(np.concatenate(logits), features["labels"])


def _take(features, idx):
    return {k: v[idx] for k, v in features.items()}


def train(params, records, train_cfg: TrainConfig = TrainConfig(),
          cfg: EncoderConfig = EncoderConfig(), features=None) -> TrainReport:
    """Minibatch AdamW on the joint encoder + decoder, mutating `params`.

    Split is 90/10 by record index (validation is the trailing slice). Raises
    Divergence if the loss goes non-finite.
    """
    if features is None:
        if not records:
            raise EmptyDataset("no records to train on")
        features = record_features(records, cfg.patch)
    n = len(features["labels"])
    if n == 0:
        raise EmptyDataset("no records to train on")
    n_val = int(n * train_cfg.val_fraction)
    train_idx = np.arange(n - n_val)
    val = _take(features, np.arange(n - n_val, n)) if n_val else None

    rng = np.random.default_rng(train_cfg.seed)
    m_state = {k: np.zeros_like(p.values) for k, p in params.items()}
    v_state = {k: np.zeros_like(p.values) for k, p in params.items()}
    step = 0
    batches_per_epoch = max(1, int(np.ceil(len(train_idx) / train_cfg.batch_size)))
    total_steps = train_cfg.epochs * batches_per_epoch
    report = TrainReport([], [], [], [],
                         majority_baseline=_majority_baseline(features["labels"]),
                         n_train=len(train_idx), n_val=n_val)
    for _ in range(train_cfg.epochs):
        order = rng.permutation(train_idx)
        losses = []
        for s in range(0, len(order), train_cfg.batch_size):
            idx = order[s : s + train_cfg.batch_size]
            batch = _take(features, idx)
            loss, grads = backward(params, batch, cfg)
            if not np.isfinite(loss):
                raise Divergence(f"training loss became {loss}")
            losses.append(loss)
            step += 1
            lr = train_cfg.lr
            if train_cfg.warmup_steps and step < train_cfg.warmup_steps:
                lr *= step / train_cfg.warmup_steps
            elif train_cfg.cosine_decay:
                done = (step - train_cfg.warmup_steps) / max(1, total_steps - train_cfg.warmup_steps)
                lr *= 0.5 * (1.0 + np.cos(np.pi * min(done, 1.0)))
            bc1 = 1.0 - train_cfg.beta1**step
            bc2 = 1.0 - train_cfg.beta2**step
            for name, p in params.items():
                g = grads[name]
                m_state[name] = train_cfg.beta1 * m_state[name] + (1 - train_cfg.beta1) * g
                v_state[name] = train_cfg.beta2 * v_state[name] + (1 - train_cfg.beta2) * g * g
                update = (m_state[name] / bc1) / (np.sqrt(v_state[name] / bc2) + train_cfg.adam_eps)
                if name.rsplit(".", 1)[-1].startswith("w"):
                    update = update + train_cfg.weight_decay * p.values
                p.values = p.values - lr * update
        report.train_losses.append(float(np.mean(losses)))
        if val is not None:
            m = evaluate(params, val, cfg)
            report.val_accuracy.append(m["accuracy"])
            report.val_precision.append(m["precision"])
            report.val_recall.append(m["recall"])
    return report


def _majority_baseline(labels: np.ndarray) -> float:
    p = float(np.mean(labels))
    return max(p, 1.0 - p)


# --------------------------------------------------------------- checkpoints


def save_checkpoint(path, named_arrays: dict) -> None:
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sI", CHECKPOINT_MAGIC, CHECKPOINT_VERSION))
        for name in sorted(named_arrays):
            arr = np.asarray(
                named_arrays[name].values if isinstance(named_arrays[name], Tensor)
                else named_arrays[name],
                dtype=np.float64,
            )
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.astype("<f8").tobytes())


def _read_exact(fh, size, what):
    buf = fh.read(size)
    if len(buf) != size:
        raise TruncatedRecord(f"checkpoint ends inside {what}")
    return buf


def load_checkpoint(path) -> dict[str, np.ndarray]:
    out = {}
    with open(path, "rb") as fh:
        magic, version = struct.unpack("<4sI", _read_exact(fh, 8, "header"))
        if magic != CHECKPOINT_MAGIC:
            raise BadMagic(f"expected {CHECKPOINT_MAGIC!r}, found {magic!r}")
        if version != CHECKPOINT_VERSION:
            raise UnsupportedVersion(f"checkpoint version {version} not supported")
        while True:
            head = fh.read(2)
            if not head:
                break
            if len(head) != 2:
                raise TruncatedRecord("checkpoint ends inside name length")
            (name_len,) = struct.unpack("<H", head)
            name = _read_exact(fh, name_len, "name").decode("utf-8")
            (rank,) = struct.unpack("<B", _read_exact(fh, 1, "rank"))
            dims = struct.unpack(f"<{rank}I", _read_exact(fh, 4 * rank, "dims"))
            count = int(np.prod(dims)) if rank else 1
            values = np.frombuffer(_read_exact(fh, 8 * count, "values"), dtype="<f8")
            out[name] = values.reshape(dims).copy()
    return out


def params_from_arrays(arrays: dict, cfg: EncoderConfig = EncoderConfig()) -> dict[str, Tensor]:
    reference = init_encoder_params(cfg, seed=0)
    params = {}
    for name, ref in reference.items():
        if name not in arrays:
            raise ShapeMismatch(f"checkpoint is missing tensor {name}")
        arr = np.asarray(arrays[name], dtype=np.float64)
        if arr.shape != ref.values.shape:
            raise ShapeMismatch(
                f"{name}: checkpoint shape {arr.shape} != expected {ref.values.shape}"
            )
        params[name] = Tensor(arr)
    return params
