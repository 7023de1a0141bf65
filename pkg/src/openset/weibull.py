"""Translated two-parameter Weibull distribution with upper-tail MLE fitting.

``fit_high`` models the q largest values of a sample: the tail is shifted
to strictly positive support, the shape parameter is found by bisecting the
profile-likelihood stationarity condition, and the scale follows in closed
form. Evaluation (``cdf`` / ``survival``) applies the stored translation by
default; callers that want the untranslated form can switch it off.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateData, InsufficientData, NoConvergence

_KAPPA_LO = 1e-3
_KAPPA_HI = 1e3
_SCORE_TOL = 1e-10
_MAX_ITER = 200


@dataclass(frozen=True)
class WeibullModel:
    """Fitted tail model: translation rho, shape kappa, scale lam."""

    rho: float
    kappa: float
    lam: float
    tail_size: int

    def __post_init__(self) -> None:
        if not (self.kappa > 0 and self.lam > 0):
            raise ValueError("kappa and lam must be positive")
        if self.tail_size < 2:
            raise ValueError("tail_size must be at least 2")

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "kappa": self.kappa,
            "lam": self.lam,
            "tail_size": self.tail_size,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WeibullModel":
        return cls(
            rho=float(d["rho"]),
            kappa=float(d["kappa"]),
            lam=float(d["lam"]),
            tail_size=int(d["tail_size"]),
        )


def _select_tail(values: np.ndarray, q: int) -> np.ndarray:
    """The q largest values; ties at the boundary kept in input order."""
    order = np.argsort(-values, kind="stable")
    keep = np.sort(order[:q])
    return values[keep]


def _shape_score(kappa: float, x: np.ndarray, log_x: np.ndarray, mean_log: float) -> float:
    # Weights normalized by the largest value so x**kappa cannot overflow.
    y = x / x.max()
    w = y**kappa
    return float(np.dot(w, log_x) / w.sum() - 1.0 / kappa - mean_log)


def fit_high(samples: Sequence[float], q: int) -> WeibullModel:
    """Maximum-likelihood Weibull fit to the q largest values of ``samples``.

    Raises InsufficientData when fewer than q samples (or q < 2) are given,
    DegenerateData when the selected tail has zero variance, and
    NoConvergence when the shape root-finder exhausts its budget.
    """
    values = np.asarray(samples, dtype=float)
    if q < 2 or values.size < q:
        raise InsufficientData(
            f"need at least q={q} samples with q >= 2, got {values.size}"
        )
    tail = _select_tail(values, q)
    lo = float(tail.min())
    if tail.max() == lo:
        raise DegenerateData("selected tail has zero variance")

    # Shift so every tail value is strictly positive. A tail that is already
    # positive keeps its natural support edge at zero; shifting it to its own
    # minimum would visibly bias the shape estimate whenever the minimum is
    # far from zero (e.g. full-sample fits of high-shape data).
    if lo > 0.0:
        rho = 0.0
    else:
        rho = lo - max(1e-6, 1e-6 * abs(lo))
    # Canonical (sorted) order makes the fit exactly invariant to input
    # permutations: floating-point sums depend on summation order.
    x = np.sort(tail - rho)
    log_x = np.log(x)
    mean_log = float(log_x.mean())

    a, b = _KAPPA_LO, _KAPPA_HI
    fa = _shape_score(a, x, log_x, mean_log)
    fb = _shape_score(b, x, log_x, mean_log)
    # The score is monotone increasing in kappa; when the root lies outside
    # the bracket the likelihood is maximized at the bracket edge (nearly
    # identical tail values push the shape arbitrarily high), so clamp.
    if fa >= 0.0:
        kappa = _KAPPA_LO
    elif fb <= 0.0:
        kappa = _KAPPA_HI
    else:
        converged = False
        kappa = a
        for _ in range(_MAX_ITER):
            kappa = 0.5 * (a + b)
            fk = _shape_score(kappa, x, log_x, mean_log)
            if abs(fk) < _SCORE_TOL:
                converged = True
                break
            if fk < 0:
                a = kappa
            else:
                b = kappa
        if not converged:
            raise NoConvergence("shape bisection exhausted its iteration budget")

    xmax = float(x.max())
    lam = xmax * float(np.mean((x / xmax) ** kappa)) ** (1.0 / kappa)
    return WeibullModel(rho=rho, kappa=kappa, lam=lam, tail_size=q)


def cdf(model: WeibullModel, x: float, apply_translation: bool = True) -> float:
    """P(X <= x); zero at and below the support edge."""
    shift = model.rho if apply_translation else 0.0
    z = x - shift
    if z <= 0.0:
        return 0.0
    return 1.0 - float(np.exp(-((z / model.lam) ** model.kappa)))


def survival(model: WeibullModel, x: float, apply_translation: bool = True) -> float:
    """P(X > x) = 1 - cdf."""
    return 1.0 - cdf(model, x, apply_translation)


def log_likelihood(tail: Sequence[float], kappa: float, lam: float) -> float:
    """Closed-form Weibull log-likelihood of an already-shifted positive tail."""
    x = np.asarray(tail, dtype=float)
    n = x.size
    return float(
        n * np.log(kappa)
        - n * kappa * np.log(lam)
        + (kappa - 1.0) * np.log(x).sum()
        - ((x / lam) ** kappa).sum()
    )
