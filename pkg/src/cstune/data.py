"""Embedding datasets: the EMBX binary container, label-budget ladders,
class-balanced paired/unpaired splits, batch iteration, and a synthetic
generator for self-contained runs.

EMBX v1 layout (all little-endian):

    "EMBX" | u32 version=1 | u32 embed_dim | u32 num_classes | u64 N
    | u32 metadata_len | metadata (UTF-8 "key=value" lines)
    | N x (i32 label, embed_dim x f32)
    | u32 CRC32 of all preceding bytes

Labels use -1 for unlabeled rows. Round trips are bit-exact.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import (
    ContractError,
    FormatError,
    ParameterError,
    StratificationError,
    TruncationError,
)
from .rng import RngState

_MAGIC = b"EMBX"
_VERSION = 1
_HEADER = struct.Struct("<4sIIIQI")
UNLABELED = -1


@dataclass
class EmbeddingDataset:
    """Rows of precomputed embeddings with optional integer class labels."""

    embed_dim: int
    num_classes: int
    embeddings: np.ndarray  # (N, embed_dim) float32
    labels: np.ndarray  # (N,) int32, -1 = unlabeled
    split: str = "train"
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.embeddings = np.ascontiguousarray(self.embeddings, dtype=np.float32)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int32)
        n = len(self.embeddings)
        if n < 1:
            raise ContractError("dataset must contain at least one row")
        if self.embeddings.ndim != 2 or self.embeddings.shape[1] != self.embed_dim:
            raise ContractError(
                f"embeddings shape {self.embeddings.shape} != (N, {self.embed_dim})"
            )
        if self.labels.shape != (n,):
            raise ContractError(f"labels shape {self.labels.shape} != ({n},)")
        if not np.isfinite(self.embeddings).all():
            raise ContractError("embeddings contain non-finite values")
        bad = (self.labels < UNLABELED) | (self.labels >= self.num_classes)
        if bad.any():
            raise ContractError(
                f"label {int(self.labels[bad][0])} outside {{-1}} u [0, {self.num_classes})"
            )
        if self.split not in ("train", "test"):
            raise ContractError(f"split must be 'train' or 'test', got {self.split!r}")

    def __len__(self) -> int:
        return len(self.embeddings)

    @property
    def n_labeled(self) -> int:
        return int((self.labels != UNLABELED).sum())

    def wide(self) -> np.ndarray:
        """Embeddings widened to float64 (the kernel's working precision)."""
        return self.embeddings.astype(np.float64)


def _encode_metadata(metadata: dict[str, str]) -> bytes:
    lines = []
    for k in sorted(metadata):
        v = metadata[k]
        if "\n" in k or "=" in k or "\n" in v:
            raise ParameterError(f"metadata key/value may not contain '=' or newline: {k!r}")
        lines.append(f"{k}={v}")
    return "\n".join(lines).encode("utf-8")


def _decode_metadata(raw: bytes) -> dict[str, str]:
    text = raw.decode("utf-8")
    out: dict[str, str] = {}
    for line in text.splitlines():
        if line:
            k, _, v = line.partition("=")
            out[k] = v
    return out


def write_embx(path: str | Path, dataset: EmbeddingDataset) -> None:
    meta = dict(dataset.metadata)
    meta.setdefault("split", dataset.split)
    meta_bytes = _encode_metadata(meta)
    n = len(dataset)
    header = _HEADER.pack(
        _MAGIC, _VERSION, dataset.embed_dim, dataset.num_classes, n, len(meta_bytes)
    )
    rec = np.dtype([("label", "<i4"), ("vec", "<f4", (dataset.embed_dim,))])
    records = np.empty(n, dtype=rec)
    records["label"] = dataset.labels
    records["vec"] = dataset.embeddings
    body = header + meta_bytes + records.tobytes()
    crc = zlib.crc32(body) & 0xFFFFFFFF
    Path(path).write_bytes(body + struct.pack("<I", crc))


def read_embx(path: str | Path) -> EmbeddingDataset:
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size + 4:
        raise TruncationError(
            f"file is {len(blob)} bytes, shorter than the {_HEADER.size + 4}-byte minimum"
        )
    magic, version, dim, k, n, meta_len = _HEADER.unpack_from(blob, 0)
    if magic != _MAGIC:
        raise FormatError(f"bad magic {magic!r} at offset 0 (expected {_MAGIC!r})")
    if version != _VERSION:
        raise FormatError(f"unsupported version {version} at offset 4")
    expected = _HEADER.size + meta_len + n * (4 + 4 * dim) + 4
    if len(blob) < expected:
        raise TruncationError(f"file is {len(blob)} bytes but header promises {expected}")
    if len(blob) > expected:
        raise FormatError(f"{len(blob) - expected} trailing bytes after offset {expected}")
    stored_crc = struct.unpack_from("<I", blob, expected - 4)[0]
    actual_crc = zlib.crc32(blob[: expected - 4]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise FormatError(
            f"CRC mismatch at offset {expected - 4}: stored {stored_crc:#010x}, "
            f"computed {actual_crc:#010x}"
        )
    meta = _decode_metadata(blob[_HEADER.size : _HEADER.size + meta_len])
    rec = np.dtype([("label", "<i4"), ("vec", "<f4", (dim,))])
    records = np.frombuffer(blob, dtype=rec, count=n, offset=_HEADER.size + meta_len)
    split = meta.get("split", "train")
    return EmbeddingDataset(
        embed_dim=dim,
        num_classes=k,
        embeddings=records["vec"].copy(),
        labels=records["label"].copy(),
        split=split,
        metadata=meta,
    )


@dataclass(frozen=True)
class LabelBudget:
    """Descending labeled-sample totals to sweep, plus the selection seed."""

    ladder: tuple[int, ...]
    selection_seed: int = 0

    def __post_init__(self):
        if not self.ladder:
            raise ParameterError("ladder is empty")
        if list(self.ladder) != sorted(set(self.ladder), reverse=True):
            raise ParameterError(f"ladder must be strictly descending, got {self.ladder}")


def label_ladder(n_train: int, num_classes: int) -> LabelBudget:
    """Budgets n, n//5, n//25, ... n//5^5, with a one-per-class floor.

    Entries below the floor are dropped; duplicates collapse.
    """
    if n_train < num_classes:
        raise ParameterError(
            f"n_train={n_train} cannot cover one sample per class (K={num_classes})"
        )
    floor = num_classes
    entries = {n_train, floor}
    for k in range(1, 6):
        e = n_train // 5**k
        if e >= floor:
            entries.add(e)
    return LabelBudget(tuple(sorted(entries, reverse=True)))


@dataclass(frozen=True)
class DatasetView:
    """A row subset of a dataset; unlabeled views mask labels entirely."""

    dataset: EmbeddingDataset
    indices: np.ndarray
    labeled: bool

    def __len__(self) -> int:
        return len(self.indices)

    def gather(self, view_idx: np.ndarray) -> tuple[np.ndarray, np.ndarray | None]:
        rows = self.dataset.embeddings[self.indices[view_idx]].astype(np.float64)
        if not self.labeled:
            return rows, None
        return rows, self.dataset.labels[self.indices[view_idx]]

    def rows(self) -> np.ndarray:
        return self.dataset.embeddings[self.indices].astype(np.float64)


def select_labeled(
    dataset: EmbeddingDataset, budget: int, seed: int
) -> tuple[DatasetView, DatasetView]:
    """Class-balanced paired subset + full unpaired pool (labels masked).

    Quotas are budget//K per class with the remainder granted to the
    numerically first classes. Labeled rows stay in the unpaired pool.
    """
    n = len(dataset)
    if budget < 1 or budget > n:
        raise ContractError(f"budget {budget} outside [1, {n}]")
    if (dataset.labels == UNLABELED).any():
        raise ContractError("paired selection requires a fully labeled dataset")
    unpaired = DatasetView(dataset, np.arange(n), labeled=False)
    if budget == n:
        return DatasetView(dataset, np.arange(n), labeled=True), unpaired
    k = dataset.num_classes
    base, rem = divmod(budget, k)
    rng = RngState(seed).stream("select-labeled")
    chosen: list[np.ndarray] = []
    for c in range(k):
        quota = base + (1 if c < rem else 0)
        if quota == 0:
            continue
        pool = np.flatnonzero(dataset.labels == c)
        if len(pool) < quota:
            raise StratificationError(
                f"class {c} has {len(pool)} rows but quota {quota}"
            )
        picks = rng.permutation(len(pool))[:quota]
        chosen.append(pool[picks])
    paired_idx = np.sort(np.concatenate(chosen))
    return DatasetView(dataset, paired_idx, labeled=True), unpaired


@dataclass(frozen=True)
class Batch:
    x: np.ndarray  # (b, embed_dim) float64
    labels: np.ndarray | None
    wrapped: bool = False


def batches(view: DatasetView, batch_size: int, rng: np.random.Generator) -> Iterator[Batch]:
    """One shuffled epoch. Views smaller than the batch produce a single
    wrapped batch which repeats rows cyclically; otherwise the final short
    batch is emitted as-is."""
    n = len(view)
    if n == 0:
        raise ContractError("cannot iterate an empty view")
    if batch_size < 1:
        raise ParameterError(f"batch_size must be >= 1, got {batch_size}")
    perm = rng.permutation(n)
    if n < batch_size:
        idx = np.resize(perm, batch_size)
        x, labels = view.gather(idx)
        yield Batch(x, labels, wrapped=True)
        return
    for start in range(0, n, batch_size):
        idx = perm[start : start + batch_size]
        x, labels = view.gather(idx)
        yield Batch(x, labels)


class BatchStream:
    """Endless epoch-chained batches with a two-integer resume state.

    Epoch ``e``'s permutation derives from ``(seed, name, e)``, so a
    stream resumed from ``(epoch, position)`` continues bit-identically.
    """

    def __init__(self, view: DatasetView, batch_size: int, rng: RngState, name: str):
        if len(view) == 0:
            raise ContractError("cannot stream an empty view")
        self.view = view
        self.batch_size = batch_size
        self.rng = rng
        self.name = name
        self.epoch = 0
        self.pos = 0
        self._perm: np.ndarray | None = None

    def state(self) -> tuple[int, int]:
        return (self.epoch, self.pos)

    def restore(self, state: tuple[int, int]) -> None:
        self.epoch, self.pos = int(state[0]), int(state[1])
        self._perm = None

    def _epoch_perm(self) -> np.ndarray:
        if self._perm is None:
            g = self.rng.stream(f"shuffle-{self.name}", self.epoch)
            self._perm = g.permutation(len(self.view))
        return self._perm

    def next(self) -> Batch:
        n = len(self.view)
        perm = self._epoch_perm()
        if n < self.batch_size:
            idx = np.resize(perm, self.batch_size)
            self.epoch += 1
            self.pos = 0
            self._perm = None
            x, labels = self.view.gather(idx)
            return Batch(x, labels, wrapped=True)
        idx = perm[self.pos : self.pos + self.batch_size]
        self.pos += len(idx)
        if self.pos >= n:
            self.epoch += 1
            self.pos = 0
            self._perm = None
        x, labels = self.view.gather(idx)
        return Batch(x, labels)


@dataclass(frozen=True)
class SyntheticSpec:
    """Gaussian class clusters plus a class-independent nuisance subspace.

    Class means sit on mutually orthogonal directions, scaled so every
    pair of means is exactly ``2 * mean_scale`` apart: mean_scale is the
    per-pair half-distance in units of the within-class noise.
    """

    num_classes: int = 10
    embed_dim: int = 64
    mean_scale: float = 4.0
    noise_scale: float = 1.0
    nuisance_dim: int = 8
    nuisance_scale: float = 1.5
    train_rows: int = 6000
    test_rows: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2 or self.embed_dim < 1:
            raise ParameterError("need num_classes >= 2 and embed_dim >= 1")
        if self.num_classes > self.embed_dim:
            raise ParameterError("orthogonal class means need num_classes <= embed_dim")
        if self.noise_scale <= 0:
            raise ParameterError("noise_scale must be positive")
        if not (0 <= self.nuisance_dim <= self.embed_dim):
            raise ParameterError("nuisance_dim must lie in [0, embed_dim]")


def _synth_split(spec: SyntheticSpec, means, basis, g, n_rows, split) -> EmbeddingDataset:
    labels = g.integers(0, spec.num_classes, size=n_rows).astype(np.int32)
    x = means[labels] + spec.noise_scale * g.standard_normal((n_rows, spec.embed_dim))
    if spec.nuisance_dim > 0:
        coeff = spec.nuisance_scale * g.standard_normal((n_rows, spec.nuisance_dim))
        x += coeff @ basis.T
    return EmbeddingDataset(
        embed_dim=spec.embed_dim,
        num_classes=spec.num_classes,
        embeddings=x.astype(np.float32),
        labels=labels,
        split=split,
    )


def generate_synthetic(spec: SyntheticSpec) -> tuple[EmbeddingDataset, EmbeddingDataset]:
    """Deterministic class-clustered embeddings; metadata records the spec
    and the full-label linear-probe error measured at generation time."""
    g = RngState(spec.seed).stream("synth")
    frame, _ = np.linalg.qr(g.standard_normal((spec.embed_dim, spec.num_classes)))
    means = (spec.noise_scale * spec.mean_scale * np.sqrt(2.0)) * frame.T
    if spec.nuisance_dim > 0:
        basis, _ = np.linalg.qr(g.standard_normal((spec.embed_dim, spec.nuisance_dim)))
    else:
        basis = np.zeros((spec.embed_dim, 0))
    train = _synth_split(spec, means, basis, g, spec.train_rows, "train")
    test = _synth_split(spec, means, basis, g, spec.test_rows, "test")
    probe = linear_probe_error(train, test)
    meta = {f"synthetic-{k}": str(v) for k, v in vars(spec).items()}
    meta["linear-probe-error"] = repr(probe)
    train.metadata.update(meta)
    test.metadata.update(meta)
    return train, test


def linear_probe_error(train: EmbeddingDataset, test: EmbeddingDataset) -> float:
    """Ridge regression to one-hot targets, argmax prediction; an
    independent check that the classes are linearly separable."""
    x = train.wide()
    xa = np.hstack([x, np.ones((len(x), 1))])
    targets = np.eye(train.num_classes)[train.labels]
    gram = xa.T @ xa + 1e-3 * np.eye(xa.shape[1])
    w = np.linalg.solve(gram, xa.T @ targets)
    xt = np.hstack([test.wide(), np.ones((len(test), 1))])
    pred = (xt @ w).argmax(axis=1)
    return float((pred != test.labels).mean())
