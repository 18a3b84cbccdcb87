"""Model container format and in-memory model representation.

A container is a directory holding ``manifest.json`` plus ``weights.bin``.
The manifest fully determines the blob layout::

    {"format_version": 1,
     "config": {...},
     "tensors": [{"name", "dtype": "f32", "shape", "offset", "length"}, ...]}

Every payload is little-endian float32 and every tensor starts on a 64-byte
boundary. Token batches use a sibling single-file format: one JSON header
line followed by packed little-endian uint32 token ids.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .rng import SplitMix64
from .validation import check_fraction, check_positive_int, check_tensor

FORMAT_VERSION = 1
ALIGNMENT = 64

# Per-layer tensor schema, in manifest order.
LAYER_TENSOR_NAMES = (
    "w1", "b1", "w2", "b2",
    "wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo",
    "ln1_gain", "ln1_bias", "ln2_gain", "ln2_bias",
)
EMBED_TENSOR_NAMES = ("token", "position", "ln_gain", "ln_bias")


@dataclass(frozen=True)
class ModelConfig:
    num_layers: int
    hidden_dim: int
    num_filters: int
    num_heads: int
    vocab_size: int
    max_seq_len: int
    activation: str = "gelu_exact"
    per_layer_filters: tuple[int, ...] | None = None

    def __post_init__(self):
        check_positive_int("num_layers", self.num_layers)
        check_positive_int("hidden_dim", self.hidden_dim)
        check_positive_int("num_filters", self.num_filters)
        check_positive_int("num_heads", self.num_heads)
        check_positive_int("vocab_size", self.vocab_size)
        check_positive_int("max_seq_len", self.max_seq_len)
        if self.hidden_dim % self.num_heads != 0:
            raise ValidationError(
                f"hidden_dim {self.hidden_dim} is not divisible by "
                f"num_heads {self.num_heads}"
            )
        if self.activation != "gelu_exact":
            raise ValidationError(f"unsupported activation {self.activation!r}")
        if self.per_layer_filters is not None:
            counts = tuple(int(n) for n in self.per_layer_filters)
            if len(counts) != self.num_layers:
                raise ValidationError(
                    f"per_layer_filters has {len(counts)} entries, "
                    f"expected {self.num_layers}"
                )
            for i, n in enumerate(counts):
                if n < 0 or n > self.num_filters:
                    raise ValidationError(
                        f"per_layer_filters[{i}]={n} outside [0, {self.num_filters}]"
                    )
            object.__setattr__(self, "per_layer_filters", counts)

    def filters_in_layer(self, i: int) -> int:
        if self.per_layer_filters is None:
            return self.num_filters
        return self.per_layer_filters[i]

    def to_dict(self) -> dict:
        out = {
            "num_layers": self.num_layers,
            "hidden_dim": self.hidden_dim,
            "num_filters": self.num_filters,
            "num_heads": self.num_heads,
            "vocab_size": self.vocab_size,
            "max_seq_len": self.max_seq_len,
            "activation": self.activation,
        }
        if self.per_layer_filters is not None:
            out["per_layer_filters"] = list(self.per_layer_filters)
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "ModelConfig":
        try:
            plf = raw.get("per_layer_filters")
            return cls(
                num_layers=raw["num_layers"],
                hidden_dim=raw["hidden_dim"],
                num_filters=raw["num_filters"],
                num_heads=raw["num_heads"],
                vocab_size=raw["vocab_size"],
                max_seq_len=raw["max_seq_len"],
                activation=raw.get("activation", "gelu_exact"),
                per_layer_filters=tuple(plf) if plf is not None else None,
            )
        except KeyError as exc:
            raise ValidationError(f"config is missing field {exc}") from exc


def _layer_shapes(d: int, n: int) -> dict[str, tuple[int, ...]]:
    return {
        "w1": (d, n), "b1": (n,), "w2": (n, d), "b2": (d,),
        "wq": (d, d), "bq": (d,), "wk": (d, d), "bk": (d,),
        "wv": (d, d), "bv": (d,), "wo": (d, d), "bo": (d,),
        "ln1_gain": (d,), "ln1_bias": (d,), "ln2_gain": (d,), "ln2_bias": (d,),
    }


@dataclass
class LayerWeights:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    wq: np.ndarray
    bq: np.ndarray
    wk: np.ndarray
    bk: np.ndarray
    wv: np.ndarray
    bv: np.ndarray
    wo: np.ndarray
    bo: np.ndarray
    ln1_gain: np.ndarray
    ln1_bias: np.ndarray
    ln2_gain: np.ndarray
    ln2_bias: np.ndarray

    @property
    def n_filters(self) -> int:
        return self.w1.shape[1]

    def tensors(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in LAYER_TENSOR_NAMES}

    def validate(self, config: ModelConfig, index: int) -> None:
        shapes = _layer_shapes(config.hidden_dim, config.filters_in_layer(index))
        for name, want in shapes.items():
            check_tensor(f"layer.{index}.{name}", getattr(self, name), want)


@dataclass
class ModelBundle:
    config: ModelConfig
    token_emb: np.ndarray
    pos_emb: np.ndarray
    emb_ln_gain: np.ndarray
    emb_ln_bias: np.ndarray
    layers: list[LayerWeights] = field(default_factory=list)
    segment_emb: np.ndarray | None = None

    def validate(self) -> None:
        cfg = self.config
        if len(self.layers) != cfg.num_layers:
            raise ValidationError(
                f"bundle has {len(self.layers)} layers, expected {cfg.num_layers}"
            )
        check_tensor("embed.token", self.token_emb, (cfg.vocab_size, cfg.hidden_dim))
        check_tensor("embed.position", self.pos_emb, (cfg.max_seq_len, cfg.hidden_dim))
        check_tensor("embed.ln_gain", self.emb_ln_gain, (cfg.hidden_dim,))
        check_tensor("embed.ln_bias", self.emb_ln_bias, (cfg.hidden_dim,))
        if self.segment_emb is not None:
            if self.segment_emb.ndim != 2 or self.segment_emb.shape[1] != cfg.hidden_dim:
                raise ValidationError("embed.segment has wrong shape")
            check_tensor("embed.segment", self.segment_emb, self.segment_emb.shape)
        for i, layer in enumerate(self.layers):
            layer.validate(cfg, i)

    def named_tensors(self) -> list[tuple[str, np.ndarray]]:
        """All tensors in canonical manifest order."""
        out = [
            ("embed.token", self.token_emb),
            ("embed.position", self.pos_emb),
            ("embed.ln_gain", self.emb_ln_gain),
            ("embed.ln_bias", self.emb_ln_bias),
        ]
        if self.segment_emb is not None:
            out.append(("embed.segment", self.segment_emb))
        for i, layer in enumerate(self.layers):
            for name, arr in layer.tensors().items():
                out.append((f"layer.{i}.{name}", arr))
        return out


# ---------------------------------------------------------------------------
# Generic tensor-file layer (shared by models, captures, and score tables)
# ---------------------------------------------------------------------------

def write_tensor_file(path: str | Path, tensors: list[tuple[str, np.ndarray]],
                      meta: dict) -> None:
    """Write a manifest + blob directory; meta keys join the manifest root."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    entries = []
    chunks = []
    offset = 0
    for name, arr in tensors:
        arr32 = np.ascontiguousarray(arr, dtype=np.float32)
        if not np.all(np.isfinite(arr32)):
            raise ValidationError(f"{name} contains non-finite values")
        pad = (-offset) % ALIGNMENT
        if pad:
            chunks.append(b"\0" * pad)
            offset += pad
        data = arr32.astype("<f4", copy=False).tobytes()
        entries.append({
            "name": name,
            "dtype": "f32",
            "shape": list(arr32.shape),
            "offset": offset,
            "length": len(data),
        })
        chunks.append(data)
        offset += len(data)
    manifest = {"format_version": FORMAT_VERSION, **meta, "tensors": entries}
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    (path / "weights.bin").write_bytes(b"".join(chunks))


def read_tensor_file(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.is_file():
        raise FileNotFoundError(f"no manifest.json under {path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed manifest: {exc}") from exc
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ValidationError(
            f"unsupported format_version {manifest.get('format_version')!r}"
        )
    blob = (path / "weights.bin").read_bytes()
    tensors: dict[str, np.ndarray] = {}
    for entry in manifest.get("tensors", []):
        name = entry.get("name", "<unnamed>")
        if entry.get("dtype") != "f32":
            raise ValidationError(f"{name}: unsupported dtype {entry.get('dtype')!r}")
        shape = tuple(int(s) for s in entry["shape"])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        offset, length = int(entry["offset"]), int(entry["length"])
        if length != 4 * count:
            raise ValidationError(
                f"{name}: manifest length {length} does not match shape {shape}"
            )
        if offset < 0 or offset + length > len(blob):
            raise ValidationError(
                f"{name}: blob is truncated (need bytes [{offset}, {offset + length}), "
                f"have {len(blob)})"
            )
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
        arr = arr.reshape(shape).copy()
        if not np.all(np.isfinite(arr)):
            raise ValidationError(f"{name} contains non-finite values")
        tensors[name] = arr
    return manifest, tensors


def container_hash(path: str | Path) -> str:
    """sha256 over manifest.json then weights.bin."""
    path = Path(path)
    h = hashlib.sha256()
    h.update((path / "manifest.json").read_bytes())
    h.update((path / "weights.bin").read_bytes())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# Model containers
# ---------------------------------------------------------------------------

def write_container(bundle: ModelBundle, path: str | Path) -> None:
    bundle.validate()
    write_tensor_file(path, bundle.named_tensors(), {"config": bundle.config.to_dict()})


def read_container(path: str | Path) -> ModelBundle:
    manifest, tensors = read_tensor_file(path)
    if "config" not in manifest:
        raise ValidationError("malformed manifest: missing config")
    config = ModelConfig.from_dict(manifest["config"])

    def take(name: str) -> np.ndarray:
        if name not in tensors:
            raise ValidationError(f"container is missing tensor {name}")
        return tensors[name]

    layers = []
    for i in range(config.num_layers):
        layers.append(LayerWeights(**{
            name: take(f"layer.{i}.{name}") for name in LAYER_TENSOR_NAMES
        }))
    bundle = ModelBundle(
        config=config,
        token_emb=take("embed.token"),
        pos_emb=take("embed.position"),
        emb_ln_gain=take("embed.ln_gain"),
        emb_ln_bias=take("embed.ln_bias"),
        layers=layers,
        segment_emb=tensors.get("embed.segment"),
    )
    bundle.validate()
    return bundle


# ---------------------------------------------------------------------------
# Synthetic fixtures
# ---------------------------------------------------------------------------

def synth_model(seed: int, config: ModelConfig, redundancy: float = 0.0) -> ModelBundle:
    """Deterministic pseudo-random bundle; pure function of its arguments.

    A ``redundancy`` fraction of each layer's filters are exact copies of
    earlier filters: with s = N - round(redundancy * N) source filters,
    filter j >= s duplicates source (j - s) mod s (same w1 column, b1 entry,
    and w2 row). Second-projection rows are drawn with scale 1/sqrt(d) so
    they have O(1) norms, as in trained checkpoints.
    """
    if config.per_layer_filters is not None:
        raise ValidationError("synth_model expects a dense config")
    redundancy = check_fraction("redundancy", redundancy)
    d, n = config.hidden_dim, config.num_filters
    rng = SplitMix64(seed)

    def draw(shape: tuple[int, ...], scale: float, loc: float = 0.0) -> np.ndarray:
        size = int(np.prod(shape)) if shape else 1
        vals = rng.gaussians(size, scale) + loc
        return vals.reshape(shape).astype(np.float32)

    token_emb = draw((config.vocab_size, d), 0.5)
    pos_emb = draw((config.max_seq_len, d), 0.1)
    emb_ln_gain = draw((d,), 0.02, loc=1.0)
    emb_ln_bias = draw((d,), 0.02)

    n_dup = int(round(redundancy * n))
    n_src = max(n - n_dup, 1)
    attn_scale = 1.0 / np.sqrt(d)
    layers = []
    for _ in range(config.num_layers):
        layer = LayerWeights(
            w1=draw((d, n), 1.0 / np.sqrt(d)),
            b1=draw((n,), 0.5),
            w2=draw((n, d), 1.0 / np.sqrt(d)),
            b2=draw((d,), 0.02),
            wq=draw((d, d), attn_scale), bq=draw((d,), 0.02),
            wk=draw((d, d), attn_scale), bk=draw((d,), 0.02),
            wv=draw((d, d), attn_scale), bv=draw((d,), 0.02),
            wo=draw((d, d), attn_scale), bo=draw((d,), 0.02),
            ln1_gain=draw((d,), 0.02, loc=1.0), ln1_bias=draw((d,), 0.02),
            ln2_gain=draw((d,), 0.02, loc=1.0), ln2_bias=draw((d,), 0.02),
        )
        for j in range(n - n_dup, n):
            src = (j - (n - n_dup)) % n_src
            layer.w1[:, j] = layer.w1[:, src]
            layer.b1[j] = layer.b1[src]
            layer.w2[j, :] = layer.w2[src, :]
        layers.append(layer)

    bundle = ModelBundle(
        config=config,
        token_emb=token_emb,
        pos_emb=pos_emb,
        emb_ln_gain=emb_ln_gain,
        emb_ln_bias=emb_ln_bias,
        layers=layers,
    )
    bundle.validate()
    return bundle


def duplicate_groups(bundle: ModelBundle, layer: int) -> list[list[int]]:
    """Groups of filter indices with identical (w1 column, b1, w2 row)."""
    lw = bundle.layers[layer]
    seen: dict[bytes, int] = {}
    groups: list[list[int]] = []
    for i in range(lw.n_filters):
        key = (lw.w1[:, i].tobytes() + lw.b1[i].tobytes() + lw.w2[i, :].tobytes())
        if key in seen:
            groups[seen[key]].append(i)
        else:
            seen[key] = len(groups)
            groups.append([i])
    return groups


# ---------------------------------------------------------------------------
# Token batches
# ---------------------------------------------------------------------------

@dataclass
class TokenBatch:
    """Unlabeled token-id sequences; only real (non-padding) ids are stored."""

    sequences: list[np.ndarray]

    def __post_init__(self):
        cleaned = []
        for i, seq in enumerate(self.sequences):
            arr = np.asarray(seq, dtype=np.int64)
            if arr.ndim != 1 or arr.size < 1:
                raise ValidationError(f"sequence {i} must hold at least one token")
            if arr.min() < 0:
                raise ValidationError(f"sequence {i} has negative token ids")
            cleaned.append(arr)
        if not cleaned:
            raise ValidationError("token batch is empty")
        self.sequences = cleaned

    @property
    def num_sequences(self) -> int:
        return len(self.sequences)

    @property
    def total_tokens(self) -> int:
        return int(sum(len(s) for s in self.sequences))

    @property
    def max_len(self) -> int:
        return max(len(s) for s in self.sequences)

    def validate_against(self, config: ModelConfig) -> None:
        for i, seq in enumerate(self.sequences):
            if len(seq) > config.max_seq_len:
                raise ValidationError(
                    f"sequence {i} has {len(seq)} tokens, "
                    f"max_seq_len is {config.max_seq_len}"
                )
            if seq.max() >= config.vocab_size:
                raise ValidationError(
                    f"sequence {i} holds token id {int(seq.max())} "
                    f">= vocab_size {config.vocab_size}"
                )

    def padded(self) -> tuple[np.ndarray, np.ndarray]:
        """(ids, real-token flags) padded to the longest sequence."""
        width = self.max_len
        ids = np.zeros((self.num_sequences, width), dtype=np.int64)
        mask = np.zeros((self.num_sequences, width), dtype=bool)
        for i, seq in enumerate(self.sequences):
            ids[i, : len(seq)] = seq
            mask[i, : len(seq)] = True
        return ids, mask

    def take(self, n: int) -> "TokenBatch":
        """First n sequences (all, if fewer are present)."""
        if n < 1:
            raise ValidationError("cannot take fewer than one sequence")
        return TokenBatch(self.sequences[:n])


def synth_batch(seed: int, config: ModelConfig, num_sequences: int,
                max_len: int | None = None) -> TokenBatch:
    """Deterministic random batch with varying lengths in [1, max_len]."""
    check_positive_int("num_sequences", num_sequences)
    width = config.max_seq_len if max_len is None else min(max_len, config.max_seq_len)
    rng = SplitMix64(seed)
    sequences = []
    for _ in range(num_sequences):
        length = 1 + rng.next_below(width)
        sequences.append(np.array(
            [rng.next_below(config.vocab_size) for _ in range(length)], dtype=np.int64
        ))
    return TokenBatch(sequences)


def write_token_batch(path: str | Path, batch: TokenBatch,
                      vocab_size: int | None = None,
                      seq_len: int | None = None) -> None:
    header: dict = {
        "format_version": FORMAT_VERSION,
        "num_sequences": batch.num_sequences,
        "lengths": [int(len(s)) for s in batch.sequences],
    }
    if seq_len is not None:
        header["seq_len"] = int(seq_len)
    if vocab_size is not None:
        header["vocab_size"] = int(vocab_size)
        for i, seq in enumerate(batch.sequences):
            if seq.max() >= vocab_size:
                raise ValidationError(
                    f"sequence {i} holds token id >= vocab_size {vocab_size}"
                )
    flat = np.concatenate(batch.sequences).astype("<u4")
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8") + b"\n")
        fh.write(flat.tobytes())


def read_token_batch(path: str | Path) -> tuple[TokenBatch, dict]:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        payload = fh.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValidationError(f"malformed token-batch header: {exc}") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise ValidationError(
            f"unsupported token-batch format_version {header.get('format_version')!r}"
        )
    lengths = [int(x) for x in header.get("lengths", [])]
    total = sum(lengths)
    if len(payload) != 4 * total:
        raise ValidationError(
            f"token payload holds {len(payload)} bytes, expected {4 * total}"
        )
    flat = np.frombuffer(payload, dtype="<u4").astype(np.int64)
    sequences = []
    pos = 0
    for n in lengths:
        sequences.append(flat[pos: pos + n])
        pos += n
    batch = TokenBatch(sequences)
    vocab = header.get("vocab_size")
    if vocab is not None:
        for i, seq in enumerate(batch.sequences):
            if seq.max() >= vocab:
                raise ValidationError(
                    f"sequence {i} holds token id >= declared vocab_size {vocab}"
                )
    return batch, header


def batch_file_hash(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


__all__ = [
    "ALIGNMENT", "EMBED_TENSOR_NAMES", "FORMAT_VERSION", "LAYER_TENSOR_NAMES",
    "LayerWeights", "ModelBundle", "ModelConfig", "TokenBatch",
    "batch_file_hash", "container_hash", "duplicate_groups",
    "read_container", "read_tensor_file", "read_token_batch",
    "synth_batch", "synth_model", "write_container", "write_tensor_file",
    "write_token_batch",
]
