"""Largest Lyapunov exponent of a scalar series (Rosenstein's method).

The series is delay-embedded, every embedded point is paired with its
nearest neighbour outside a Theiler window, and the mean log separation of
the pairs is followed forward in time. The exponent is the slope of a
least-squares line through the initial, pre-saturation part of that curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .field import PQ, field_norm
from .mds import Embedding
from .series import FieldSeries

__all__ = [
    "LyapunovConfig",
    "LyapunovResult",
    "autocorrelation",
    "default_delay",
    "delay_embed",
    "divergence_curve",
    "saturation_step",
    "block_uncertainty",
    "max_lyapunov",
    "scalar_series_from_embedding",
    "norm_series",
]

MIN_SERIES_LENGTH = 100


@dataclass(frozen=True)
class LyapunovConfig:
    """Estimator settings; ``None`` means "choose from the data".

    delay : first local minimum of the autocorrelation, capped at n/10
    theiler_window : equal to the delay, or to ``mean_period_estimate``
        (rounded up) when that is given
    fit_range : (first, last) divergence step used for the slope, inclusive
    horizon : number of divergence steps followed (default min(n/5, 60))
    sample_time : time between samples, used to report 1/time units
    """

    embed_dim: int = 3
    delay: int | None = None
    theiler_window: int | None = None
    fit_range: tuple[int, int] | None = None
    horizon: int | None = None
    mean_period_estimate: float | None = None
    sample_time: float = 1.0

    def __post_init__(self):
        if self.embed_dim < 2:
            raise ValueError("embed_dim must be at least 2")
        if self.delay is not None and self.delay < 1:
            raise ValueError("delay must be a positive integer")
        if self.theiler_window is not None and self.theiler_window < 0:
            raise ValueError("theiler_window must be non-negative")
        if self.mean_period_estimate is not None and not self.mean_period_estimate > 0:
            raise ValueError("mean_period_estimate must be positive")
        if not self.sample_time > 0:
            raise ValueError("sample_time must be positive")


@dataclass(frozen=True)
class LyapunovResult:
    exponent: float  # per sample
    exponent_per_time: float
    r_squared: float
    fit_range: tuple[int, int]
    steps: np.ndarray
    divergence: np.ndarray  # mean log separation per step
    delay: int
    embed_dim: int
    theiler_window: int
    n_pairs: int


def autocorrelation(x: np.ndarray, max_lag: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    x = x - x.mean()
    denom = float(np.dot(x, x))
    if denom == 0:
        return np.ones(max_lag + 1)
    n = len(x)
    return np.array([np.dot(x[: n - k], x[k:]) / denom for k in range(max_lag + 1)])


def default_delay(x: np.ndarray) -> int:
    """First local minimum of the autocorrelation, at most n/10, at least 1."""
    cap = max(1, len(x) // 10)
    acf = autocorrelation(x, cap + 1)
    for k in range(1, cap + 1):
        if acf[k] <= acf[k - 1] and acf[k] < acf[k + 1]:
            return k
    return cap


def delay_embed(x: np.ndarray, dim: int, delay: int) -> np.ndarray:
    n = len(x) - (dim - 1) * delay
    if n <= 0:
        raise ValueError("series too short for this embedding")
    return np.stack([x[i * delay : i * delay + n] for i in range(dim)], axis=1)


def _nearest_neighbours(y: np.ndarray, window: int, chunk: int = 512) -> tuple[np.ndarray, np.ndarray]:
    """Index and distance of each point's nearest non-identical neighbour
    more than ``window`` samples away (-1 when none exists)."""
    m = len(y)
    idx = np.full(m, -1)
    dist = np.full(m, np.inf)
    sq = np.einsum("ij,ij->i", y, y)
    cols = np.arange(m)
    for lo in range(0, m, chunk):
        hi = min(m, lo + chunk)
        d2 = sq[lo:hi, None] + sq[None, :] - 2.0 * (y[lo:hi] @ y.T)
        # exact distances for the candidates keep ties and zeros reliable
        rows = np.arange(lo, hi)
        excluded = np.abs(rows[:, None] - cols[None, :]) <= window
        d2 = np.where(excluded, np.inf, np.maximum(d2, 0.0))
        for r, i in enumerate(rows):
            order = np.argsort(d2[r], kind="stable")[:16]
            for j in order:
                if not np.isfinite(d2[r, j]):
                    break
                dj = float(np.linalg.norm(y[i] - y[j]))
                if dj > 0:
                    if dj < dist[i]:
                        idx[i], dist[i] = j, dj
                    break
            if idx[i] < 0:
                # fall back to a full exact scan when the shortlist is all duplicates
                exact = np.linalg.norm(y - y[i], axis=1)
                exact[np.abs(cols - i) <= window] = np.inf
                exact[exact == 0] = np.inf
                if np.isfinite(exact).any():
                    j = int(np.argmin(exact))
                    idx[i], dist[i] = j, float(exact[j])
    return idx, dist


def divergence_curve(y: np.ndarray, window: int, horizon: int) -> tuple[np.ndarray, int]:
    """Mean log separation of nearest-neighbour pairs after k = 0..horizon steps."""
    m = len(y)
    nn, _ = _nearest_neighbours(y, window)
    ref = np.flatnonzero(nn >= 0)
    if ref.size == 0:
        raise ValueError("no valid neighbour pairs outside the Theiler window")
    curve = np.full(horizon + 1, np.nan)
    for k in range(horizon + 1):
        ok = (ref + k < m) & (nn[ref] + k < m)
        if not np.any(ok):
            break
        d = np.linalg.norm(y[ref[ok] + k] - y[nn[ref[ok]] + k], axis=1)
        d = d[d > 0]
        if d.size:
            curve[k] = float(np.mean(np.log(d)))
    return curve, int(ref.size)


def saturation_step(curve: np.ndarray) -> int:
    """Step of sharpest bend (most negative second difference) of the curve.

    Returns the last index when the curve never bends downwards.
    """
    if len(curve) < 3:
        return len(curve) - 1
    bend = curve[2:] - 2.0 * curve[1:-1] + curve[:-2]
    j = int(np.argmin(bend))
    if bend[j] >= 0:
        return len(curve) - 1
    return j + 1


def _auto_fit_range(curve: np.ndarray) -> tuple[int, int]:
    """First third of the curve before saturation, at least two steps long."""
    k_sat = saturation_step(curve)
    end = max(2, int(math.ceil(k_sat / 3.0)))
    return 0, min(end, len(curve) - 1)


def max_lyapunov(series, cfg: LyapunovConfig = LyapunovConfig()) -> LyapunovResult:
    """Estimate the largest Lyapunov exponent of a scalar series."""
    x = np.asarray(series, dtype=np.float64).ravel()
    if not np.all(np.isfinite(x)):
        raise ValueError("series must be finite")
    delay = cfg.delay if cfg.delay is not None else default_delay(x)
    if (cfg.embed_dim - 1) * delay >= len(x):
        raise ValueError("(embed_dim - 1) * delay must be shorter than the series")
    y = delay_embed(x, cfg.embed_dim, delay)
    if len(y) < MIN_SERIES_LENGTH:
        raise ValueError(f"need at least {MIN_SERIES_LENGTH} embedded points, got {len(y)}")
    if cfg.theiler_window is not None:
        window = cfg.theiler_window
    elif cfg.mean_period_estimate is not None:
        window = int(math.ceil(cfg.mean_period_estimate))
    else:
        window = delay
    horizon = cfg.horizon if cfg.horizon is not None else max(5, min(len(y) // 5, 60))
    curve, n_pairs = divergence_curve(y, window, horizon)
    valid = np.flatnonzero(np.isfinite(curve))
    if valid.size < 3:
        raise ValueError("divergence curve too short to fit")
    curve = curve[: valid[-1] + 1]
    if np.any(~np.isfinite(curve)):
        curve = np.interp(np.arange(len(curve)), valid, curve[valid])
    lo, hi = cfg.fit_range if cfg.fit_range is not None else _auto_fit_range(curve)
    hi = min(hi, len(curve) - 1)
    if hi - lo < 1:
        raise ValueError("fit range must cover at least two steps")
    ks = np.arange(lo, hi + 1, dtype=np.float64)
    ys = curve[lo : hi + 1]
    slope, intercept = np.polyfit(ks, ys, 1)
    resid = ys - (slope * ks + intercept)
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    steps = np.arange(len(curve))
    return LyapunovResult(
        float(slope),
        float(slope) / cfg.sample_time,
        r2,
        (int(lo), int(hi)),
        steps,
        curve,
        int(delay),
        cfg.embed_dim,
        int(window),
        n_pairs,
    )


def scalar_series_from_embedding(e: Embedding, j: int = 1) -> np.ndarray:
    """Principal coordinate ``j`` (1-based) as a time series."""
    if not 1 <= j <= e.k_retained:
        raise ValueError(f"coordinate index must be in [1, {e.k_retained}], got {j}")
    return np.array(e.coords[:, j - 1])


def norm_series(series: FieldSeries, pq: PQ = PQ()) -> np.ndarray:
    """L^{p,q} norm of every frame."""
    return np.array([field_norm(f, pq) for f in series])


def block_uncertainty(series, cfg: LyapunovConfig = LyapunovConfig(), n_blocks: int = 4) -> tuple[float, np.ndarray]:
    """Standard error of the exponent from contiguous blocks of the series.

    Each block is analysed independently with ``cfg``; the spread of the
    per-block exponents, divided by sqrt(n_blocks), estimates the noise of
    the estimator on this series. Returns (standard error, block exponents).
    """
    x = np.asarray(series, dtype=np.float64).ravel()
    if n_blocks < 2:
        raise ValueError("need at least two blocks")
    blocks = np.array_split(x, n_blocks)
    vals = np.array([max_lyapunov(b, cfg).exponent for b in blocks])
    return float(np.std(vals, ddof=1) / math.sqrt(n_blocks)), vals
