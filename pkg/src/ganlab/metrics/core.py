"""Classifier score and Fréchet distance on plain arrays (float64)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.special import rel_entr

from ..errors import ContractError, NotPSDError, NumericError

ROW_SUM_TOL = 1e-5
SYM_TOL = 1e-6
PSD_CLAMP = 1e-6
PSD_REJECT = 1e-4


def check_predictions(probs: np.ndarray) -> np.ndarray:
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 2:
        raise ContractError("prediction matrix must be 2-D (N, K)")
    if (p < 0).any():
        raise ContractError("prediction matrix has negative entries")
    bad = np.abs(p.sum(1) - 1.0) > ROW_SUM_TOL
    if bad.any():
        raise ContractError(f"rows {np.flatnonzero(bad)[:5].tolist()} do not sum to 1")
    return p


def classifier_score(probs: np.ndarray, splits: int = 10) -> Tuple[float, float]:
    """``exp(mean_x KL(p(y|x) || p(y)))`` per contiguous split; returns (mean, std).

    ``std`` is the population standard deviation across splits (0 for one split).
    """
    p = check_predictions(probs)
    if splits < 1 or splits > len(p):
        raise ContractError(f"splits must lie in [1, N={len(p)}], got {splits}")
    scores = []
    for chunk in np.array_split(p, splits):
        marginal = chunk.mean(0, keepdims=True)
        kl = rel_entr(chunk, marginal).sum(1)
        scores.append(np.exp(kl.mean()))
    return float(np.mean(scores)), float(np.std(scores))


@dataclass
class GaussianStats:
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64).reshape(-1)
        self.sigma = np.atleast_2d(np.asarray(self.sigma, dtype=np.float64))
        d = self.mu.shape[0]
        if self.sigma.shape != (d, d):
            raise ContractError(f"sigma shape {self.sigma.shape} does not match mu dim {d}")
        if np.abs(self.sigma - self.sigma.T).max(initial=0.0) > SYM_TOL * max(1.0, np.abs(self.sigma).max(initial=0.0)):
            raise ContractError("covariance is not symmetric")

    @property
    def dim(self) -> int:
        return self.mu.shape[0]


def gaussian_stats(features: np.ndarray) -> GaussianStats:
    """Column mean and unbiased (N - 1) sample covariance."""
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 2 or f.shape[0] < 2:
        raise ContractError("gaussian_stats needs a (N, d) array with N >= 2")
    return GaussianStats(f.mean(0), np.cov(f, rowvar=False, ddof=1))


def matrix_sqrt_psd(A: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Small negative eigenvalues (>= -1e-4 relative to the spectrum scale)
    are treated as round-off and clamped to zero.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ContractError("matrix_sqrt_psd needs a square matrix")
    A = 0.5 * (A + A.T)
    w, Q = np.linalg.eigh(A)
    scale = max(1.0, float(np.abs(w).max(initial=0.0)))
    if w.min(initial=0.0) < -PSD_REJECT * scale:
        raise NotPSDError(f"matrix has eigenvalue {w.min():.3g}; not positive semi-definite")
    return (Q * np.sqrt(np.clip(w, 0.0, None))) @ Q.T


def frechet_distance(s1: GaussianStats, s2: GaussianStats) -> float:
    """``||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^1/2)``.

    The cross term uses ``sqrt(sqrt(S1) S2 sqrt(S1))``, which has the same
    trace as ``(S1 S2)^1/2`` but is symmetric PSD by construction.
    """
    if s1.dim != s2.dim:
        raise ContractError(f"dimension mismatch: {s1.dim} vs {s2.dim}")
    diff = s1.mu - s2.mu
    r1 = matrix_sqrt_psd(s1.sigma)
    cross = matrix_sqrt_psd(r1 @ s2.sigma @ r1)
    value = float(diff @ diff + np.trace(s1.sigma) + np.trace(s2.sigma) - 2.0 * np.trace(cross))
    if value < 0:
        if value < -PSD_CLAMP * max(1.0, float(np.trace(s1.sigma) + np.trace(s2.sigma))):
            raise NumericError(f"Fréchet distance evaluated to {value:.3g}")
        value = 0.0
    return value
