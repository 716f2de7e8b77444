"""Inverse toolchain: empirical spatial autocorrelation of track
amplitudes, exponential model fitting, K-factor estimation, and fading CDFs.

The autocorrelation estimator correlates voltage amplitudes; the K-factor
estimator and power CDF operate on mean-normalized powers. Undefined
autocorrelation values (zero-variance windows) are reported as NaN, never
silently as zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import AutocorrParams


class TrackFileError(ValueError):
    """Raised when a track file does not match the expected schema."""


@dataclass(frozen=True, eq=False)
class TrackMeasurement:
    """PDP voltage amplitudes over a linear track.

    ``amplitudes`` is (num_positions, num_bins): rows are track positions at
    uniform delta_x (wavelengths) steps, columns are delay bins.
    """

    amplitudes: np.ndarray
    delta_x: float = 0.5
    delay_bin_ns: float = 2.5

    def __post_init__(self) -> None:
        a = np.asarray(self.amplitudes, dtype=float)
        if a.ndim != 2:
            raise ValueError("amplitudes must be a 2-D grid (positions x delay bins)")
        if a.shape[0] < 2:
            raise ValueError("a track needs at least 2 positions")
        if np.any(a < 0) or not np.all(np.isfinite(a)):
            raise ValueError("amplitudes must be finite and non-negative")
        if not self.delta_x > 0:
            raise ValueError("delta_x must be > 0")
        if not self.delay_bin_ns > 0:
            raise ValueError("delay_bin_ns must be > 0")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @property
    def num_positions(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def num_bins(self) -> int:
        return self.amplitudes.shape[1]


@dataclass(frozen=True, eq=False)
class AutocorrCurve:
    """Autocorrelation values on a lag grid of multiples of delta_x.

    Values are in [-1, 1]; NaN marks lags where the estimate is undefined
    (zero variance in a window).
    """

    lags: np.ndarray  # wavelengths
    values: np.ndarray

    def __post_init__(self) -> None:
        lags = np.asarray(self.lags, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if lags.shape != vals.shape or lags.ndim != 1:
            raise ValueError("lags and values must be matching 1-D arrays")
        finite = vals[np.isfinite(vals)]
        if finite.size and np.max(np.abs(finite)) > 1.0 + 1e-9:
            raise ValueError("autocorrelation values must lie in [-1, 1]")
        lags = lags.copy()
        vals = vals.copy()
        lags.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "lags", lags)
        object.__setattr__(self, "values", vals)

    def defined_mask(self) -> np.ndarray:
        return np.isfinite(self.values)


def _pearson_at_lag(seq, lag: int) -> float:
    """Correlation between the sequence and its lag-shifted copy, with
    means and variances computed over the overlapping window.

    Sequential float accumulation so a literal double-loop evaluation of
    the defining expectation reproduces the result bit for bit. Returns NaN
    when either window has zero variance.
    """
    n = len(seq) - lag
    sx = 0.0
    sy = 0.0
    for l in range(n):
        sx += seq[l]
        sy += seq[l + lag]
    mx = sx / n
    my = sy / n
    sxy = 0.0
    sxx = 0.0
    syy = 0.0
    for l in range(n):
        dx = seq[l] - mx
        dy = seq[l + lag] - my
        sxy += dx * dy
        sxx += dx * dx
        syy += dy * dy
    if sxx == 0.0 or syy == 0.0:
        return math.nan
    return sxy / math.sqrt(sxx * syy)


def spatial_autocorrelation(
    track: TrackMeasurement,
    delay_bin: int,
    min_overlap: int = 8,
) -> AutocorrCurve:
    """Empirical spatial autocorrelation of one delay bin's amplitudes.

    Evaluates lags i = 0, 1, 2, ... (in delta_x units) as long as the
    overlapping window keeps at least ``min_overlap`` samples (at least 2
    for very short tracks).
    """
    if not 0 <= delay_bin < track.num_bins:
        raise ValueError(f"delay_bin {delay_bin} out of range [0, {track.num_bins})")
    seq = [float(v) for v in track.amplitudes[:, delay_bin]]
    n = len(seq)
    keep = min(min_overlap, n) if n >= 2 else n
    keep = max(keep, 2)
    max_lag = max(n - keep, 0)
    lags = np.arange(max_lag + 1) * track.delta_x
    values = np.array([_pearson_at_lag(seq, i) for i in range(max_lag + 1)])
    return AutocorrCurve(lags=lags, values=values)


def average_autocorr(track: TrackMeasurement, min_overlap: int = 8) -> AutocorrCurve:
    """Per-lag unweighted mean over delay bins with a defined estimate.

    Bins that carry no fading (zero variance at every lag) drop out, which
    restricts the average to resolvable multipath bins. Raises when no bin
    is defined anywhere.
    """
    curves = [
        spatial_autocorrelation(track, b, min_overlap=min_overlap)
        for b in range(track.num_bins)
    ]
    values = np.vstack([c.values for c in curves])
    defined = np.isfinite(values)
    if not defined.any():
        raise ValueError("no delay bin has a defined autocorrelation (all zero variance)")
    counts = defined.sum(axis=0)
    sums = np.where(defined, values, 0.0).sum(axis=0)
    avg = np.where(counts > 0, sums / np.maximum(counts, 1), math.nan)
    return AutocorrCurve(lags=curves[0].lags, values=avg)


@dataclass(frozen=True)
class AutocorrFit:
    """MMSE exponential-model fit: parameters, mean squared residual, and
    whether the decay rate was identifiable."""

    params: AutocorrParams
    residual: float
    identifiable: bool


def _ls_given_b(x: np.ndarray, y: np.ndarray, b: float):
    """Best (a, c) for model a*x - c at fixed b (x = exp(-b*lag)), with the
    correlation-magnitude constraints a > 0 and 0 < a - c <= 1."""
    n = len(x)
    sx = float(np.sum(x))
    sxx = float(np.sum(x * x))
    sy = float(np.sum(y))
    sxy = float(np.sum(x * y))
    det = n * sxx - sx * sx
    if det <= 1e-15 * max(n * sxx, 1.0):
        # x constant (b = 0 or degenerate grid): model collapses to a constant
        mean_y = sy / n
        xc = float(x[0])
        a = max(mean_y, 1e-6) if xc == 1.0 else 1.0
        c = a * xc - mean_y
    else:
        # unconstrained LS for y = a*x - c
        a = (n * sxy - sx * sy) / det
        c = (a * sx - sy) / n
    if a <= 0.0:
        a = 1e-6
        c = a * (sx / n) - sy / n
    if a - c > 1.0:
        # refit on the boundary c = a - 1
        denom = float(np.sum((x - 1.0) ** 2))
        if denom > 0.0:
            a = float(np.sum((x - 1.0) * (y - 1.0))) / denom
            a = max(a, 1e-6)
        c = a - 1.0
    elif a - c <= 0.0:
        c = a - 1e-6
    resid = float(np.mean((a * x - c - y) ** 2))
    return a, c, resid


def fit_autocorr_mmse(curve: AutocorrCurve) -> AutocorrFit:
    """Fit a*exp(-b*lag) - c to the defined points of a curve by MMSE.

    Grid search over b in [0, 10] (step 0.01) with closed-form least
    squares for (a, c) at each b, followed by golden-section refinement of
    b around the grid optimum. A constant curve leaves b unidentifiable and
    is flagged instead of guessed.
    """
    mask = curve.defined_mask()
    lags = curve.lags[mask]
    y = curve.values[mask]
    if len(y) < 3:
        raise ValueError("need at least 3 defined lags to fit the exponential model")

    if float(np.max(y) - np.min(y)) < 1e-12:
        level = min(max(float(y[0]), 1e-6), 1.0)
        return AutocorrFit(
            params=AutocorrParams(a=level, b=0.0, c=0.0),
            residual=0.0,
            identifiable=False,
        )

    def objective(b: float):
        a, c, resid = _ls_given_b(np.exp(-b * lags), y, b)
        return resid, a, c

    best = None
    for b in np.arange(0.0, 10.0 + 1e-9, 0.01):
        resid, a, c = objective(float(b))
        if best is None or resid < best[0]:
            best = (resid, a, float(b), c)

    # golden-section polish inside the winning grid cell
    lo = max(best[2] - 0.01, 0.0)
    hi = min(best[2] + 0.01, 10.0)
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    b1 = hi - gr * (hi - lo)
    b2 = lo + gr * (hi - lo)
    f1, _, _ = objective(b1)
    f2, _, _ = objective(b2)
    for _ in range(40):
        if f1 <= f2:
            hi, b2, f2 = b2, b1, f1
            b1 = hi - gr * (hi - lo)
            f1, _, _ = objective(b1)
        else:
            lo, b1, f1 = b1, b2, f2
            b2 = lo + gr * (hi - lo)
            f2, _, _ = objective(b2)
    b_ref = (lo + hi) / 2.0
    resid, a, c = objective(b_ref)
    if resid > best[0]:
        resid, a, b_ref, c = best
    return AutocorrFit(
        params=AutocorrParams(a=a, b=b_ref, c=c),
        residual=resid,
        identifiable=True,
    )


@dataclass(frozen=True)
class KFactorEstimate:
    """Moment-based Rician K estimate. status is "ok", "non_rician"
    (power fluctuation heavier than Rayleigh), or "no_fading" (K -> inf)."""

    k_db: float
    status: str

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def estimate_k_factor(power_samples) -> KFactorEstimate:
    """Moment-based K-factor estimate from normalized power samples.

    With m2 the sample mean and m4 the second moment of the powers, the
    linear K is sqrt(2*m2^2 - m4) / (m2 - sqrt(2*m2^2 - m4)). A negative
    radicand flags heavier-than-Rayleigh fading (K ~ 0); a nonpositive
    denominator flags vanishing fading (K -> inf).
    """
    p = np.asarray(power_samples, dtype=float).ravel()
    if p.size < 100:
        raise ValueError("need at least 100 power samples")
    if np.any(p <= 0) or not np.all(np.isfinite(p)):
        raise ValueError("power samples must be finite and > 0")
    m2 = float(np.mean(p))
    m4 = float(np.mean(p * p))
    radicand = 2.0 * m2 * m2 - m4
    if radicand <= 0.0:
        return KFactorEstimate(k_db=-math.inf, status="non_rician")
    root = math.sqrt(radicand)
    denom = m2 - root
    if denom <= 0.0:
        return KFactorEstimate(k_db=math.inf, status="no_fading")
    k = root / denom
    return KFactorEstimate(k_db=10.0 * math.log10(k), status="ok")


def _ecdf_dedup(values: np.ndarray):
    """Sorted empirical CDF with duplicate abscissae collapsed to their
    final (largest) cumulative probability."""
    order = np.sort(values)
    n = order.size
    probs = np.arange(1, n + 1) / n
    keep = np.ones(n, dtype=bool)
    keep[:-1] = order[1:] != order[:-1]
    return order[keep], probs[keep]


def empirical_power_cdf(power_samples):
    """CDF of mean-normalized powers on a dB axis.

    Returns (power_db, cum_prob) arrays: sorted 10*log10(p / mean(p))
    against cumulative probability rank/N, duplicates collapsed.
    """
    p = np.asarray(power_samples, dtype=float).ravel()
    if p.size < 1:
        raise ValueError("need at least one power sample")
    if np.any(p <= 0) or not np.all(np.isfinite(p)):
        raise ValueError("power samples must be finite and > 0")
    norm = p / np.mean(p)
    vals, probs = _ecdf_dedup(10.0 * np.log10(norm))
    return vals, probs


TRACK_HEADER_FIELDS = ("delta_x_wavelengths", "delay_bin_ns", "num_positions", "num_bins")


def write_track(track: TrackMeasurement, path) -> None:
    """Write a track file: header names, header values, then the amplitude
    grid row-major (one CSV row per track position)."""
    lines = [
        ",".join(TRACK_HEADER_FIELDS),
        ",".join(
            repr(v)
            for v in (
                track.delta_x,
                track.delay_bin_ns,
                track.num_positions,
                track.num_bins,
            )
        ),
    ]
    for row in track.amplitudes:
        lines.append(",".join(repr(float(v)) for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_track(path) -> TrackMeasurement:
    """Parse and validate a track file; raises TrackFileError with
    line/field diagnostics."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip() and not ln.strip().startswith("#")]
    if len(lines) < 2:
        raise TrackFileError(f"{path}: expected a two-line header plus grid rows")
    names = tuple(s.strip() for s in lines[0].split(","))
    if names != TRACK_HEADER_FIELDS:
        raise TrackFileError(
            f"{path}: line 1: header {names} does not match expected {TRACK_HEADER_FIELDS}"
        )
    cells = [s.strip() for s in lines[1].split(",")]
    if len(cells) != 4:
        raise TrackFileError(f"{path}: line 2: expected 4 header values, got {len(cells)}")
    try:
        delta_x = float(cells[0])
        delay_bin_ns = float(cells[1])
        num_positions = int(float(cells[2]))
        num_bins = int(float(cells[3]))
    except ValueError as exc:
        raise TrackFileError(f"{path}: line 2: bad header value: {exc}") from exc
    rows = []
    for lineno0, line in enumerate(lines[2:], start=3):
        vals = [s.strip() for s in line.split(",")]
        if len(vals) != num_bins:
            raise TrackFileError(
                f"{path}: line {lineno0}: expected {num_bins} amplitudes, got {len(vals)}"
            )
        try:
            rows.append([float(v) for v in vals])
        except ValueError as exc:
            raise TrackFileError(f"{path}: line {lineno0}: not a number: {exc}") from exc
    if len(rows) != num_positions:
        raise TrackFileError(
            f"{path}: expected {num_positions} grid rows, got {len(rows)}"
        )
    try:
        return TrackMeasurement(
            amplitudes=np.asarray(rows, dtype=float),
            delta_x=delta_x,
            delay_bin_ns=delay_bin_ns,
        )
    except ValueError as exc:
        raise TrackFileError(f"{path}: invalid track: {exc}") from exc
