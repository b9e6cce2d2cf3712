"""Statistical estimation: first-order Fourier fits with unknown period,
normal fits with one-sigma band ratios, and Pearson correlation with
two-sided significance.

The period of the Fourier model is found by a coarse grid scan of the
least-squares error followed by golden-section refinement; for a fixed
period the three remaining coefficients are an ordinary linear solve. The
p-value engine is a self-contained regularized incomplete beta evaluated
by Lentz's continued fraction, so reported (r, n) pairs can be checked
without external tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .evolution import WaveParams, wave_extrema

DEFAULT_GRID_STEP = 0.05
DEGENERATE_AMPLITUDE = 1e-9
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_BETA_EPS = 1e-12
_BETA_MAX_ITER = 400


@dataclass(frozen=True)
class TimeSeries:
    """Ordered (t, y) observations with strictly increasing t."""

    t: tuple[float, ...]
    y: tuple[float, ...]

    def __post_init__(self):
        if len(self.t) != len(self.y):
            raise ValueError("t and y must have the same length")
        if len(self.t) == 0:
            raise ValueError("series is empty")
        if any(b <= a for a, b in zip(self.t, self.t[1:])):
            raise ValueError("t must be strictly increasing")

    @classmethod
    def from_pairs(cls, pairs) -> "TimeSeries":
        ts, ys = zip(*((float(a), float(b)) for a, b in pairs))
        return cls(ts, ys)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def span(self) -> float:
        return self.t[-1] - self.t[0]


@dataclass(frozen=True)
class FourierFit:
    """Result of a first-order Fourier fit.

    Degenerate fits (constant input or vanishing amplitude) report the
    level in a0 with a1 = b1 = 0 and no period.
    """

    a0: float
    a1: float
    b1: float
    period: float | None
    sse: float
    rmse: float
    r_squared: float
    degenerate: bool

    @property
    def params(self) -> WaveParams | None:
        if self.degenerate:
            return None
        return WaveParams(self.a0, self.a1, self.b1, self.period)

    @property
    def amplitude(self) -> float:
        return math.hypot(self.a1, self.b1)

    @property
    def phase(self) -> float:
        return math.atan2(self.b1, self.a1)


def _coeffs_and_sse(t: np.ndarray, y: np.ndarray, period: float):
    theta = 2.0 * math.pi * t / period
    design = np.column_stack([np.ones_like(t), np.cos(theta), np.sin(theta)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    return coef, float(resid @ resid)


def fit_fourier1(
    series: TimeSeries,
    period_range: tuple[float, float] | None = None,
    *,
    grid_step: float = DEFAULT_GRID_STEP,
) -> FourierFit:
    """Least-squares fit of y = a0 + a1*cos(2*pi*t/T) + b1*sin(2*pi*t/T).

    T is scanned over ``period_range`` (default [4, 2 * span]) in steps of
    ``grid_step`` and refined by golden section around the best grid point;
    on equal error the smaller period wins. Needs at least 4 points. A
    constant series is reported as degenerate, not an error.
    """
    if len(series) < 4:
        raise ValueError("Fourier fitting needs at least 4 points")
    if grid_step <= 0:
        raise ValueError("grid step must be positive")
    t = np.asarray(series.t, dtype=float)
    y = np.asarray(series.y, dtype=float)
    if period_range is None:
        period_range = (4.0, 2.0 * series.span)
    lo, hi = float(period_range[0]), float(period_range[1])
    if not (0.0 < lo <= hi):
        raise ValueError("empty period range")

    mean = float(y.mean())
    sst = float(((y - mean) ** 2).sum())
    if sst == 0.0:
        return FourierFit(mean, 0.0, 0.0, None, 0.0, 0.0, 1.0, True)

    steps = int(math.floor((hi - lo) / grid_step + 1e-9))
    grid = [lo + k * grid_step for k in range(steps + 1)]
    if grid[-1] < hi - 1e-12:
        grid.append(hi)
    best_period, best_sse = grid[0], math.inf
    for period in grid:
        _, sse = _coeffs_and_sse(t, y, period)
        if sse < best_sse:
            best_sse, best_period = sse, period

    # golden-section refinement inside the bracketing grid cells
    a = max(lo, best_period - grid_step)
    b = min(hi, best_period + grid_step)
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc = _coeffs_and_sse(t, y, c)[1]
    fd = _coeffs_and_sse(t, y, d)[1]
    while b - a > 1e-11 * max(1.0, b):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = _coeffs_and_sse(t, y, c)[1]
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = _coeffs_and_sse(t, y, d)[1]
    period = 0.5 * (a + b)
    coef, sse = _coeffs_and_sse(t, y, period)
    if best_sse < sse:
        # non-unimodal bracket; fall back to the raw grid winner
        period = best_period
        coef, sse = _coeffs_and_sse(t, y, period)

    a0, a1, b1 = (float(v) for v in coef)
    if math.hypot(a1, b1) < DEGENERATE_AMPLITUDE:
        return FourierFit(mean, 0.0, 0.0, None, sst, math.sqrt(sst / len(series)), 0.0, True)
    rmse = math.sqrt(sse / len(series))
    r_squared = 1.0 - sse / sst
    return FourierFit(a0, a1, b1, float(period), sse, rmse, r_squared, False)


def fourier_extrema(fit: FourierFit | WaveParams) -> tuple[float, float]:
    """(max, min) of a fitted or constructed wave; rejects degenerate fits."""
    if isinstance(fit, WaveParams):
        return wave_extrema(fit)
    if fit.degenerate:
        raise ValueError("degenerate fit has no reportable extrema")
    return wave_extrema(fit.params)


@dataclass(frozen=True)
class NormalFit:
    """Sample mean / standard deviation plus the one-sigma band ratio."""

    mu: float
    sigma: float
    band_ratio: float
    n: int


def fit_normal(samples: Sequence[float]) -> NormalFit:
    """Mean, n-1 standard deviation, and the fraction of samples inside the
    closed band [mu - sigma, mu + sigma].

    Band membership carries a 1e-12 relative guard so rounding of mu and
    sigma cannot eject samples that sit exactly on a band edge.
    """
    values = [float(v) for v in samples]
    n = len(values)
    if n < 2:
        raise ValueError("need at least two samples")
    mu = math.fsum(values) / n
    sigma = math.sqrt(math.fsum((v - mu) ** 2 for v in values) / (n - 1))
    guard = 1e-12 * max(1.0, abs(mu) + sigma)
    lo, hi = mu - sigma - guard, mu + sigma + guard
    band_ratio = sum(1 for v in values if lo <= v <= hi) / n
    return NormalFit(mu, sigma, band_ratio, n)


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    p_value: float
    n: int


def pearson(x: Sequence[float], y: Sequence[float]) -> CorrelationResult:
    """Product-moment correlation with a two-sided p-value."""
    xs = [float(v) for v in x]
    ys = [float(v) for v in y]
    if len(xs) != len(ys):
        raise ValueError("inputs must have the same length")
    n = len(xs)
    if n < 3:
        raise ValueError("need at least three pairs")
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    sxx = math.fsum((v - mx) ** 2 for v in xs)
    syy = math.fsum((v - my) ** 2 for v in ys)
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("correlation is undefined for a constant input")
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(xs, ys))
    r = max(-1.0, min(1.0, sxy / math.sqrt(sxx * syy)))
    return CorrelationResult(r, p_from_r(r, n), n)


def p_from_r(r: float, n: int) -> float:
    """Two-sided p-value of a correlation r at sample size n.

    Uses the exact identity p = I_x(nu/2, 1/2) with nu = n - 2 and
    x = nu / (nu + t^2), t = r*sqrt(nu/(1-r^2)). |r| >= 1 floors at 0.
    """
    if n < 3:
        raise ValueError("need n >= 3")
    r = float(r)
    if abs(r) >= 1.0:
        return 0.0
    nu = n - 2
    t_sq = r * r * nu / (1.0 - r * r)
    return regularized_incomplete_beta(nu / 2.0, 0.5, nu / (nu + t_sq))


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) by Lentz's continued fraction, relative accuracy ~1e-12."""
    if a <= 0 or b <= 0:
        raise ValueError("shape parameters must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def _beta_cf(a: float, b: float, x: float) -> float:
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, _BETA_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETA_EPS:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")
