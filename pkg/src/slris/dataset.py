"""Labeled I/Q datasets with a stratified split and the ``.risl`` file format.

File layout (little-endian)::

    b"RISL"  u16 version  u32 L  u32 count
    count x ( u8 label, 2*L float32 interleaved I,Q )

Windows are stored as complex64 in memory as well, so a save/load round trip
is exact.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .errors import BadMagicError, FormatError, PayloadSizeError, TruncatedFileError, VersionMismatchError
from .signalgen import (
    DESIRED_SIGNATURE,
    INTERFERER_SIGNATURE,
    TRAINING_SNR_RANGE_DB,
    WINDOW_LENGTHS,
    SignalClass,
    UserSignature,
    make_window,
)

MAGIC = b"RISL"
VERSION = 1
_HEADER = struct.Struct("<4sHII")


@dataclass(frozen=True)
class GenerationMeta:
    seed: int
    snr_range: Tuple[float, float]
    sig_d: UserSignature
    sig_i: UserSignature


@dataclass(eq=False)
class LabeledDataset:
    iq: np.ndarray  # (n, L) complex64
    labels: np.ndarray  # (n,) uint8
    gen_meta: Optional[GenerationMeta] = field(default=None)

    def __post_init__(self):
        self.iq = np.asarray(self.iq, dtype=np.complex64)
        self.labels = np.asarray(self.labels, dtype=np.uint8)
        if self.iq.ndim != 2 or self.labels.shape != (self.iq.shape[0],):
            raise ValueError(f"inconsistent shapes: iq {self.iq.shape}, labels {self.labels.shape}")
        if self.labels.size and self.labels.max() >= len(SignalClass):
            raise ValueError("labels must lie in 0..3")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def L(self) -> int:
        return self.iq.shape[1]

    @property
    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=len(SignalClass))

    def subset(self, idx) -> "LabeledDataset":
        return LabeledDataset(self.iq[idx], self.labels[idx], self.gen_meta)

    def __eq__(self, other) -> bool:
        # gen_meta is not persisted and does not take part in equality
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return (
            self.iq.shape == other.iq.shape
            and np.array_equal(self.labels, other.labels)
            and self.iq.tobytes() == other.iq.tobytes()
        )


@dataclass
class DatasetSplit:
    train: LabeledDataset
    test: LabeledDataset
    ratio: float

    @property
    def L(self) -> int:
        return self.train.L


def window_rng(seed: int, cls: int, index: int) -> np.random.Generator:
    """Independent stream per window so construction can be parallelised."""
    return np.random.default_rng(np.random.SeedSequence([seed, cls, index]))


def build_dataset(
    n_per_class: int,
    L: int,
    snr_range: Tuple[float, float] = TRAINING_SNR_RANGE_DB,
    sig_d: UserSignature = DESIRED_SIGNATURE,
    sig_i: UserSignature = INTERFERER_SIGNATURE,
    seed: int = 0,
) -> LabeledDataset:
    """``n_per_class`` windows of each class, ordered class by class.

    Each window's SNR is drawn uniformly from ``snr_range`` using that
    window's own stream, so the result depends only on the arguments.
    """
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    if L not in WINDOW_LENGTHS:
        raise ValueError(f"window length must be one of {WINDOW_LENGTHS}, got {L}")
    lo, hi = snr_range
    if lo > hi:
        raise ValueError("snr_range must be (low, high) with low <= high")

    n = 4 * n_per_class
    iq = np.empty((n, L), dtype=np.complex64)
    labels = np.empty(n, dtype=np.uint8)
    row = 0
    for cls in SignalClass:
        for i in range(n_per_class):
            rng = window_rng(seed, int(cls), i)
            snr_db = rng.uniform(lo, hi)
            iq[row] = make_window(cls, L, snr_db, sig_d, sig_i, rng).samples
            labels[row] = cls
            row += 1
    return LabeledDataset(iq, labels, GenerationMeta(seed, (float(lo), float(hi)), sig_d, sig_i))


def split(ds: LabeledDataset, ratio: float = 0.8, seed: int = 0) -> DatasetSplit:
    """Stratified train/test split.

    Per class, ``floor(ratio * n_c)`` windows go to train; the leftover units
    needed to reach ``round(ratio * n)`` overall are handed to the classes with
    the largest fractional parts (lowest class index on ties).
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie strictly between 0 and 1")
    if len(ds) < 4:
        raise ValueError("dataset must contain at least 4 windows to split")
    rng = np.random.default_rng(seed)
    counts = ds.class_counts
    exact = ratio * counts
    n_train = np.floor(exact).astype(int)
    target = int(np.floor(ratio * len(ds) + 0.5))
    frac_order = sorted(range(len(counts)), key=lambda c: (-(exact[c] - n_train[c]), c))
    for c in frac_order[: max(0, target - n_train.sum())]:
        if n_train[c] < counts[c]:
            n_train[c] += 1

    train_idx, test_idx = [], []
    for c in range(len(counts)):
        members = np.flatnonzero(ds.labels == c)
        members = members[rng.permutation(len(members))]
        train_idx.append(members[: n_train[c]])
        test_idx.append(members[n_train[c] :])
    train_idx = np.sort(np.concatenate(train_idx))
    test_idx = np.sort(np.concatenate(test_idx))
    return DatasetSplit(ds.subset(train_idx), ds.subset(test_idx), ratio)


def _record_dtype(L: int) -> np.dtype:
    return np.dtype([("label", "u1"), ("iq", "<f4", (2 * L,))])


def to_bytes(ds: LabeledDataset) -> bytes:
    rec = np.empty(len(ds), dtype=_record_dtype(ds.L))
    rec["label"] = ds.labels
    rec["iq"] = ds.iq.view(np.float32).reshape(len(ds), 2 * ds.L)
    return _HEADER.pack(MAGIC, VERSION, ds.L, len(ds)) + rec.tobytes()


def from_bytes(buf: bytes) -> LabeledDataset:
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise BadMagicError("not a RISL dataset (bad magic)")
    if len(buf) < _HEADER.size:
        raise TruncatedFileError("dataset truncated inside header")
    _, version, L, count = _HEADER.unpack_from(buf)
    if version != VERSION:
        raise VersionMismatchError(f"dataset version {version}, expected {VERSION}")
    if L < 1:
        raise FormatError("window length must be positive")
    dt = _record_dtype(L)
    payload = len(buf) - _HEADER.size
    if payload < count * dt.itemsize:
        raise TruncatedFileError(f"dataset truncated: {payload} payload bytes, header implies {count * dt.itemsize}")
    if payload > count * dt.itemsize:
        raise PayloadSizeError("trailing bytes after the last window")
    rec = np.frombuffer(buf, dtype=dt, count=count, offset=_HEADER.size)
    labels = rec["label"].copy()
    if labels.size and labels.max() > 3:
        raise FormatError(f"label byte {labels.max()} out of range 0..3")
    iq = rec["iq"].astype("<f4").view(np.complex64).reshape(count, L).copy()
    return LabeledDataset(iq, labels)


def save(ds: LabeledDataset, path) -> None:
    with open(path, "wb") as fh:
        fh.write(to_bytes(ds))


def load(path) -> LabeledDataset:
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
