"""Summary statistics used by the diagnostic studies."""

import numpy as np
from scipy.stats import rankdata


def esnr(samples: np.ndarray) -> float:
    """Expected signal-to-noise ratio of K gradient samples of dimension D.

    sum_d mean_d^2 / sum_d var_d with the K-1 variance denominator. Zero noise
    gives inf when the signal is nonzero and nan when both vanish.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[:, None]
    samples = samples.reshape(samples.shape[0], -1)
    if samples.shape[0] < 2:
        raise ValueError("esnr needs at least two samples")
    signal = float(np.sum(samples.mean(axis=0) ** 2))
    noise = float(np.sum(samples.var(axis=0, ddof=1)))
    if noise == 0.0:
        return float("inf") if signal > 0.0 else float("nan")
    return signal / noise


def spearman(x, y) -> float:
    """Pearson correlation of average-tie ranks; nan when either input is constant."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("spearman needs two 1-d sequences of equal length")
    if len(x) < 3:
        raise ValueError("spearman needs at least three observations")
    rx = rankdata(x, method="average")
    ry = rankdata(y, method="average")
    dx, dy = rx - rx.mean(), ry - ry.mean()
    denom = np.sqrt(np.sum(dx * dx) * np.sum(dy * dy))
    if denom == 0.0:
        return float("nan")
    return float(np.clip(np.sum(dx * dy) / denom, -1.0, 1.0))


def quartile_bins(values) -> np.ndarray:
    """Quartile index 0-3 of each value; -1 for non-finite entries."""
    values = np.asarray(values, dtype=np.float64)
    bins = np.full(values.shape, -1, dtype=np.int64)
    finite = np.isfinite(values)
    if not finite.any():
        return bins
    edges = np.percentile(values[finite], [25.0, 50.0, 75.0])
    bins[finite] = np.digitize(values[finite], edges, right=True)
    return bins
