"""The three scoring heads: SoftMax baseline, OpenMax, and the non-match head.

All three share one contract: an activation vector of length K goes in, a
(K+1)-way probability vector plus an accept/reject decision comes out. The
unknown class always lives at index K.

The non-match head ("metamax") pools, per class, every activation the class
produces at the *other* K-1 columns, fits a Weibull model to the q largest
pooled values, and at prediction time dampens each visited activation by its
tail survival probability. The mass removed by dampening becomes the unknown
logit. OpenMax instead models the largest distances to per-class mean
activation vectors and dampens by the distance CDF.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import weibull
from .data import ActivationSet
from .errors import DimensionMismatch, InsufficientData, ValidationError
from .weibull import WeibullModel

DISTANCE_KINDS = ("euclidean", "cosine", "euclidean_cosine_blend")


@dataclass(frozen=True)
class CalibratedOutput:
    """(K+1)-way probabilities with the revision internals exposed."""

    probabilities: np.ndarray
    predicted: int
    rejected: bool
    revised_activations: np.ndarray
    unknown_activation: float

    @property
    def num_classes(self) -> int:
        return len(self.probabilities) - 1


@dataclass(frozen=True)
class MetaMaxCalibrator:
    """Per-class Weibull models over pooled non-match activations."""

    class_models: tuple[WeibullModel, ...]
    q: int
    beta: int
    apply_translation: bool = True
    build_counts: tuple[int, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        if not 0 <= self.beta <= self.num_classes:
            raise ValidationError("beta must lie in [0, K]")

    @property
    def num_classes(self) -> int:
        return len(self.class_models)

    def to_dict(self) -> dict:
        return {
            "kind": "metamax",
            "q": self.q,
            "beta": self.beta,
            "apply_translation": self.apply_translation,
            "build_counts": list(self.build_counts),
            "class_models": [m.to_dict() for m in self.class_models],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetaMaxCalibrator":
        return cls(
            class_models=tuple(WeibullModel.from_dict(m) for m in d["class_models"]),
            q=int(d["q"]),
            beta=int(d["beta"]),
            apply_translation=bool(d["apply_translation"]),
            build_counts=tuple(d.get("build_counts", ())),
        )


@dataclass(frozen=True)
class OpenMaxCalibrator:
    """Per-class mean activation vectors plus Weibull models on distance tails."""

    mavs: np.ndarray
    class_models: tuple[WeibullModel, ...]
    alpha: int
    eta: int
    distance_kind: str = "euclidean"
    distance_scales: tuple[float, ...] = ()
    build_counts: tuple[int, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        if self.distance_kind not in DISTANCE_KINDS:
            raise ValidationError(f"unknown distance kind {self.distance_kind!r}")
        if not 1 <= self.alpha <= self.num_classes:
            raise ValidationError("alpha must lie in [1, K]")
        if len(self.class_models) != self.mavs.shape[0]:
            raise ValidationError("need one Weibull model per mean activation vector")

    @property
    def num_classes(self) -> int:
        return int(self.mavs.shape[0])

    def to_dict(self) -> dict:
        return {
            "kind": "openmax",
            "alpha": self.alpha,
            "eta": self.eta,
            "distance_kind": self.distance_kind,
            "distance_scales": list(self.distance_scales),
            "build_counts": list(self.build_counts),
            "mavs": self.mavs.tolist(),
            "class_models": [m.to_dict() for m in self.class_models],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OpenMaxCalibrator":
        return cls(
            mavs=np.asarray(d["mavs"], dtype=float),
            class_models=tuple(WeibullModel.from_dict(m) for m in d["class_models"]),
            alpha=int(d["alpha"]),
            eta=int(d["eta"]),
            distance_kind=str(d["distance_kind"]),
            distance_scales=tuple(d.get("distance_scales", ())),
            build_counts=tuple(d.get("build_counts", ())),
        )


def stable_softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=float)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def _descending_order(a: np.ndarray) -> np.ndarray:
    # Ties broken by ascending class index (stable sort on the negated vector).
    return np.argsort(-a, kind="stable")


def _finish(a: np.ndarray, modulation: np.ndarray) -> CalibratedOutput:
    revised = a * modulation
    unknown = float(np.sum(a - a * modulation))
    probs = stable_softmax(np.append(revised, unknown))
    predicted = int(np.argmax(probs))
    return CalibratedOutput(
        probabilities=probs,
        predicted=predicted,
        rejected=predicted == len(a),
        revised_activations=revised,
        unknown_activation=unknown,
    )


def _check_vector(a, k: int) -> np.ndarray:
    a = np.asarray(a, dtype=float).ravel()
    if a.shape[0] != k:
        raise DimensionMismatch(f"expected an activation vector of length {k}, got {a.shape[0]}")
    return a


def build_metamax_models(
    train: ActivationSet,
    q: int,
    beta: int | None = None,
    apply_translation: bool = True,
) -> MetaMaxCalibrator:
    """Fit one Weibull tail model per class on pooled non-match activations.

    Only correctly classified known rows contribute. For class j the class's
    rows lose column j and the remaining N_j * (K-1) scores are pooled before
    tail fitting.
    """
    correct = train.correctly_classified()
    k = correct.num_classes
    models = []
    counts = []
    for j in range(k):
        rows = correct.class_rows(j)
        pooled = np.delete(rows, j, axis=1).ravel(order="C")
        counts.append(rows.shape[0])
        if pooled.size < q:
            raise InsufficientData(
                f"class {j}: pooled non-match count {pooled.size} < q={q}"
            )
        models.append(weibull.fit_high(pooled, q))
    return MetaMaxCalibrator(
        class_models=tuple(models),
        q=q,
        beta=k if beta is None else beta,
        apply_translation=apply_translation,
        build_counts=tuple(counts),
    )


def metamax_predict(cal: MetaMaxCalibrator, a) -> CalibratedOutput:
    """Revise an activation vector with the pooled non-match tail models.

    Ranks are visited from the highest activation down; the winning index is
    skipped so it contributes nothing to the unknown activation. A visited
    activation at rank i (1-based) is scaled by
    1 - ((beta - i) / beta) * survival(a_i).
    """
    a = _check_vector(a, cal.num_classes)
    order = _descending_order(a)
    argmax_index = int(order[0])
    m = np.ones_like(a)
    for i in range(1, cal.beta + 1):
        idx = int(order[i - 1])
        if idx == argmax_index:
            continue
        weight = (cal.beta - i) / cal.beta
        s = weibull.survival(cal.class_models[idx], float(a[idx]), cal.apply_translation)
        m[idx] = 1.0 - weight * s
    return _finish(a, m)


def _class_distance(a: np.ndarray, mav: np.ndarray, kind: str, scale: float) -> float:
    euclid = float(np.linalg.norm(a - mav))
    if kind == "euclidean":
        return euclid
    na, nm = float(np.linalg.norm(a)), float(np.linalg.norm(mav))
    cosine = 1.0 if na == 0.0 or nm == 0.0 else 1.0 - float(np.dot(a, mav)) / (na * nm)
    if kind == "cosine":
        return cosine
    return 0.5 * (euclid / scale + cosine)


def build_openmax_models(
    train: ActivationSet,
    eta: int,
    distance_kind: str = "euclidean",
    alpha: int | None = None,
) -> OpenMaxCalibrator:
    """Per class: mean activation vector, distances of the class's correctly
    classified rows to it, and a Weibull fit to the eta largest distances."""
    if distance_kind not in DISTANCE_KINDS:
        raise ValidationError(f"unknown distance kind {distance_kind!r}")
    correct = train.correctly_classified()
    k = correct.num_classes
    mavs = np.empty((k, k), dtype=float)
    scales = []
    models = []
    counts = []
    for j in range(k):
        rows = correct.class_rows(j)
        counts.append(rows.shape[0])
        if rows.shape[0] < eta or eta < 2:
            raise InsufficientData(
                f"class {j}: {rows.shape[0]} correctly classified rows < eta={eta}"
            )
        mav = rows.mean(axis=0)
        mavs[j] = mav
        euclid = np.linalg.norm(rows - mav, axis=1)
        scale = float(euclid.mean()) or 1.0
        scales.append(scale)
        dists = [
            _class_distance(row, mav, distance_kind, scale) for row in rows
        ]
        models.append(weibull.fit_high(np.asarray(dists), eta))
    return OpenMaxCalibrator(
        mavs=mavs,
        class_models=tuple(models),
        alpha=min(3, k) if alpha is None else alpha,
        eta=eta,
        distance_kind=distance_kind,
        distance_scales=tuple(scales),
        build_counts=tuple(counts),
    )


def openmax_predict(cal: OpenMaxCalibrator, a) -> CalibratedOutput:
    """Dampen the top alpha activations by the CDF of the query's distance to
    each revised class's mean activation vector."""
    a = _check_vector(a, cal.num_classes)
    order = _descending_order(a)
    omega = np.ones_like(a)
    for i in range(1, cal.alpha + 1):
        idx = int(order[i - 1])
        scale = cal.distance_scales[idx] if cal.distance_scales else 1.0
        dist = _class_distance(a, cal.mavs[idx], cal.distance_kind, scale)
        weight = (cal.alpha - i + 1) / cal.alpha
        omega[idx] = 1.0 - weight * weibull.cdf(cal.class_models[idx], dist)
    return _finish(a, omega)


def softmax_predict(a, threshold: float = 0.0) -> CalibratedOutput:
    """Plain closed-set softmax with max-probability thresholding.

    The unknown slot gets probability zero; the input is rejected when the
    winning probability falls below ``threshold``.
    """
    a = np.asarray(a, dtype=float).ravel()
    if a.size < 2:
        raise DimensionMismatch("need at least two activations")
    known = stable_softmax(a)
    probs = np.append(known, 0.0)
    best = int(np.argmax(known))
    rejected = bool(known[best] < threshold)
    k = a.size
    return CalibratedOutput(
        probabilities=probs,
        predicted=k if rejected else best,
        rejected=rejected,
        revised_activations=a.copy(),
        unknown_activation=0.0,
    )
