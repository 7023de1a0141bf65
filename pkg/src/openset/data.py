"""Activation-set container, OSAV binary I/O, open-set splits, synthetic data.

OSAV v1 layout (little-endian, no padding):

    magic  4 bytes  "OSAV"
    u8     version  (1)
    u8     reserved (0)
    u32    N        rows
    u32    K        columns
    N*K    float32  activations, row-major
    N      int32    labels (-1 marks unknown)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    InvalidSplit,
    LabelOutOfRange,
    NonFiniteValue,
    TruncatedFile,
    UnknownLabel,
    UnsupportedVersion,
    ValidationError,
)
from .rng import SplitMix64

MAGIC = b"OSAV"
VERSION = 1
_HEADER = struct.Struct("<4sBBII")


@dataclass(frozen=True)
class ActivationSet:
    """N x K activation matrix with per-row labels (-1 = unknown)."""

    activations: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self) -> None:
        acts = np.asarray(self.activations, dtype=np.float32)
        labels = np.asarray(self.labels, dtype=np.int32)
        if acts.ndim != 2 or acts.shape[0] != labels.shape[0]:
            raise ValidationError("activations must be N x K with N matching labels")
        if acts.shape[0] < 1 or self.num_classes < 2:
            raise ValidationError("need N >= 1 and K >= 2")
        if acts.shape[1] != self.num_classes:
            raise ValidationError("column count must equal num_classes")
        if not np.all(np.isfinite(acts)):
            raise NonFiniteValue("activation matrix contains non-finite entries")
        if labels.max(initial=-1) >= self.num_classes or labels.min(initial=0) < -1:
            raise LabelOutOfRange("labels must lie in [-1, K-1]")
        object.__setattr__(self, "activations", acts)
        object.__setattr__(self, "labels", labels)

    @property
    def n_rows(self) -> int:
        return int(self.activations.shape[0])

    def class_rows(self, label: int) -> np.ndarray:
        return self.activations[self.labels == label]

    def correctly_classified(self) -> "ActivationSet":
        """Known-label rows whose argmax activation matches the label."""
        known = self.labels >= 0
        correct = known & (np.argmax(self.activations, axis=1) == self.labels)
        if not correct.any():
            raise ValidationError("no correctly classified rows available")
        return ActivationSet(
            self.activations[correct], self.labels[correct], self.num_classes
        )


def write_activations(aset: ActivationSet, path: str | Path) -> None:
    path = Path(path)
    header = _HEADER.pack(MAGIC, VERSION, 0, aset.n_rows, aset.num_classes)
    body = aset.activations.astype("<f4").tobytes(order="C")
    labels = aset.labels.astype("<i4").tobytes()
    path.write_bytes(header + body + labels)


def read_activations(path: str | Path) -> ActivationSet:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise TruncatedFile(f"{path}: shorter than the OSAV header")
    magic, version, _reserved, n, k = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise BadMagic(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersion(f"{path}: unsupported version {version}")
    expected = _HEADER.size + n * k * 4 + n * 4
    if len(raw) != expected:
        raise TruncatedFile(
            f"{path}: payload holds {len(raw) - _HEADER.size} bytes, "
            f"header implies {expected - _HEADER.size}"
        )
    acts = np.frombuffer(raw, dtype="<f4", count=n * k, offset=_HEADER.size)
    labels = np.frombuffer(raw, dtype="<i4", count=n, offset=_HEADER.size + n * k * 4)
    acts = acts.reshape(n, k).copy()
    labels = labels.copy()
    if not np.all(np.isfinite(acts)):
        raise NonFiniteValue(f"{path}: non-finite activation values")
    if n and (labels.max() >= k or labels.min() < -1):
        raise LabelOutOfRange(f"{path}: labels outside [-1, K-1]")
    return ActivationSet(acts, labels, int(k))


@dataclass(frozen=True)
class OpenSplit:
    """Deterministic partition of original class ids into known and unknown."""

    known_classes: tuple[int, ...]
    unknown_classes: tuple[int, ...]
    relabel_map: dict[int, int]
    seed: int

    def to_dict(self) -> dict:
        return {
            "known_classes": list(self.known_classes),
            "unknown_classes": list(self.unknown_classes),
            "relabel_map": {str(k): v for k, v in self.relabel_map.items()},
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OpenSplit":
        return cls(
            known_classes=tuple(d["known_classes"]),
            unknown_classes=tuple(d["unknown_classes"]),
            relabel_map={int(k): int(v) for k, v in d["relabel_map"].items()},
            seed=int(d["seed"]),
        )


def make_open_split(num_total_classes: int, num_known: int, seed: int) -> OpenSplit:
    """Uniformly choose ``num_known`` known classes with the seeded generator."""
    if not 2 <= num_known < num_total_classes:
        raise InvalidSplit(
            f"need 2 <= num_known < num_total_classes, got {num_known}/{num_total_classes}"
        )
    rng = SplitMix64(seed)
    known = sorted(rng.sample_without_replacement(num_total_classes, num_known))
    unknown = [c for c in range(num_total_classes) if c not in set(known)]
    relabel = {orig: new for new, orig in enumerate(known)}
    return OpenSplit(tuple(known), tuple(unknown), relabel, seed)


def apply_split(aset: ActivationSet, split: OpenSplit) -> ActivationSet:
    """Relabel known classes to [0, K-1] and unknown classes to -1.

    Activation columns are untouched: their semantics come from the K-way
    classifier that produced them, not from the split.
    """
    valid = set(split.known_classes) | set(split.unknown_classes)
    labels = np.empty_like(aset.labels)
    for i, lab in enumerate(aset.labels):
        lab = int(lab)
        if lab not in valid:
            raise UnknownLabel(f"label {lab} not covered by the split")
        labels[i] = split.relabel_map.get(lab, -1)
    return ActivationSet(aset.activations, labels, aset.num_classes)


@dataclass(frozen=True)
class SyntheticSpec:
    """Configuration for the desk-scale synthetic activation generator."""

    num_known: int = 6
    samples_per_class: int = 500
    class_separation: float = 10.0
    noise_sigma: float = 1.0
    unknown_count: int = 800
    unknown_offset: float = 15.0
    unknown_clusters: int = 4
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_known < 2 or self.samples_per_class < 1:
            raise ValidationError("need num_known >= 2 and samples_per_class >= 1")
        if self.unknown_count < 0 or self.unknown_clusters < 1:
            raise ValidationError("unknown_count/unknown_clusters out of range")
        if self.noise_sigma <= 0 or self.class_separation <= 0:
            raise ValidationError("noise_sigma and class_separation must be positive")

    @property
    def dim(self) -> int:
        # Penultimate width equals the class count in this setup.
        return self.num_known


# Known-class draws include a small "confusable" fraction with one or two
# boosted non-match coordinates, mimicking near-boundary training samples.
# Without them the pooled non-match distribution has no meaningful upper
# tail and every calibrator degenerates to plain softmax behavior.
_CONFUSABLE_FRACTION = 0.12
_CONFUSABLE_BOOST_LO = 3.5  # in units of noise_sigma
_CONFUSABLE_BOOST_HI = 9.0
_UNKNOWN_WOBBLE = 0.45  # relative spread of unknown cluster directions


def _unknown_center(rng: SplitMix64, spec: SyntheticSpec) -> np.ndarray:
    """Diffuse off-manifold center: elevated on all coordinates at once.

    Unknown inputs excite several class activations moderately instead of
    one strongly, so the direction is the all-ones vector with a random
    per-cluster wobble, scaled to unknown_offset.
    """
    k = spec.dim
    d = np.ones(k) + _UNKNOWN_WOBBLE * np.array([rng.normal() for _ in range(k)])
    d /= float(np.linalg.norm(d))
    return spec.unknown_offset * d


def generate_synthetic(spec: SyntheticSpec) -> tuple[ActivationSet, ActivationSet]:
    """Gaussian class clusters on the coordinate axes plus diffuse unknowns.

    Train holds known classes only; test holds fresh known draws and
    ``unknown_count`` rows spread round-robin over ``unknown_clusters``
    off-manifold centers. Fully deterministic for a fixed seed.
    """
    rng = SplitMix64(spec.seed)
    k = spec.dim

    def draw_rows(center: np.ndarray, count: int, known_class: int | None = None) -> np.ndarray:
        out = np.empty((count, k), dtype=np.float64)
        for r in range(count):
            for c in range(k):
                out[r, c] = center[c] + spec.noise_sigma * rng.normal()
            if known_class is not None and rng.uniform() < _CONFUSABLE_FRACTION:
                n_boost = 1 + rng.below(2)
                cols = [
                    c
                    for c in rng.sample_without_replacement(k, n_boost + 1)
                    if c != known_class
                ][:n_boost]
                span = _CONFUSABLE_BOOST_HI - _CONFUSABLE_BOOST_LO
                for c in cols:
                    out[r, c] += spec.noise_sigma * (
                        _CONFUSABLE_BOOST_LO + span * rng.uniform()
                    )
        return out

    centers = [spec.class_separation * np.eye(k)[j] for j in range(k)]

    train_rows = []
    train_labels = []
    for j in range(k):
        train_rows.append(draw_rows(centers[j], spec.samples_per_class, j))
        train_labels.extend([j] * spec.samples_per_class)

    test_rows = []
    test_labels = []
    for j in range(k):
        test_rows.append(draw_rows(centers[j], spec.samples_per_class, j))
        test_labels.extend([j] * spec.samples_per_class)

    unknown_centers = [_unknown_center(rng, spec) for _ in range(spec.unknown_clusters)]
    counts = [
        spec.unknown_count // spec.unknown_clusters
        + (1 if i < spec.unknown_count % spec.unknown_clusters else 0)
        for i in range(spec.unknown_clusters)
    ]
    for center, count in zip(unknown_centers, counts):
        if count:
            test_rows.append(draw_rows(center, count))
            test_labels.extend([-1] * count)

    train = ActivationSet(
        np.vstack(train_rows).astype(np.float32),
        np.array(train_labels, dtype=np.int32),
        k,
    )
    test = ActivationSet(
        np.vstack(test_rows).astype(np.float32),
        np.array(test_labels, dtype=np.int32),
        k,
    )
    return train, test
