"""Slow reference implementations the fast code paths are checked against.

Nothing here imports the package under test: the Weibull oracle maximizes
the closed-form log-likelihood by brute grid refinement, and the AUROC
oracle counts ordered pairs directly.
"""

from __future__ import annotations

import numpy as np


def weibull_log_likelihood(tail: np.ndarray, kappa: float, lam: float) -> float:
    """Two-parameter Weibull log-likelihood of a strictly positive sample."""
    x = np.asarray(tail, dtype=float)
    n = x.size
    return float(
        n * np.log(kappa)
        - n * kappa * np.log(lam)
        + (kappa - 1.0) * np.log(x).sum()
        - np.sum((x / lam) ** kappa)
    )


def grid_search_mle(tail: np.ndarray, stages: int = 3, points: int = 41):
    """Coarse-to-fine grid search for the Weibull MLE on a shifted tail.

    Returns (kappa, lam, log_likelihood). Each stage scans a log-spaced
    (kappa, lam) grid around the previous winner; for a fixed kappa the
    likelihood along lam is evaluated from one precomputed x**kappa, so a
    full 2-D scan costs one power per kappa value.
    """
    x = np.asarray(tail, dtype=float)
    n = x.size
    sum_log = float(np.log(x).sum())

    k_lo, k_hi = 1e-3, 1e3
    l_lo, l_hi = max(x.min() * 1e-3, 1e-12), x.max() * 10.0
    best = (1.0, 1.0, -np.inf)
    for _ in range(stages):
        kappas = np.exp(np.linspace(np.log(k_lo), np.log(k_hi), points))
        lams = np.exp(np.linspace(np.log(l_lo), np.log(l_hi), points))
        for kappa in kappas:
            with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
                xk = np.sum(x**kappa)  # one power per kappa, reused for all lam
                ll = (
                    n * np.log(kappa)
                    - n * kappa * np.log(lams)
                    + (kappa - 1.0) * sum_log
                    - xk / lams**kappa
                )
            ll = np.where(np.isfinite(ll), ll, -np.inf)
            i = int(np.argmax(ll))
            if ll[i] > best[2]:
                best = (float(kappa), float(lams[i]), float(ll[i]))
        # Shrink both axes around the winner for the next stage.
        k_span = (k_hi / k_lo) ** (1.0 / (points - 1))
        l_span = (l_hi / l_lo) ** (1.0 / (points - 1))
        k_lo, k_hi = best[0] / k_span**2, best[0] * k_span**2
        l_lo, l_hi = best[1] / l_span**2, best[1] * l_span**2
    return best


def pair_counting_auroc(scores, positives) -> float:
    """Brute-force AUROC: fraction of (pos, neg) pairs correctly ordered,
    ties counted half. O(n_pos * n_neg)."""
    scores = np.asarray(scores, dtype=float)
    positives = np.asarray(positives, dtype=bool)
    pos = scores[positives][:, None]
    neg = scores[~positives][None, :]
    wins = np.sum(pos > neg) + 0.5 * np.sum(pos == neg)
    return float(wins / (pos.size * neg.size))


def sample_weibull(rng: np.random.Generator, kappa: float, lam: float, n: int) -> np.ndarray:
    """Inverse-transform Weibull draws (independent of the package RNG)."""
    u = rng.uniform(size=n)
    return lam * (-np.log(1.0 - u)) ** (1.0 / kappa)
