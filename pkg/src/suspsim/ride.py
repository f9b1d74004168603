"""Ride-quality evaluation: frequency-weighted RMS, peaks, comfort labels.

The vertical acceleration series is passed through a cascade of
second-order sections (the ride weighting), then reduced to the weighted
RMS over the record and to the peak magnitude. The default weighting
ships as a coefficients data file; user-supplied files with the same
plain-text format (one ``b0 b1 b2 a0 a1 a2`` row per section) substitute
exact standard tables when needed.

Comfort bands deliberately overlap, as printed in the source scale, so
classification returns a set of labels rather than a single one.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field

import numpy as np
import scipy.signal

# (lower, upper, label); upper=None means unbounded. Lower bounds closed,
# upper bounds open, except the last band which is open at its lower bound
# ("greater than"). Bands overlap by design.
COMFORT_BANDS: tuple[tuple[float, float | None, str], ...] = (
    (0.0, 0.315, "Not uncomfortable"),
    (0.315, 0.63, "A little uncomfortable"),
    (0.5, 1.0, "Fairly uncomfortable"),
    (0.8, 1.6, "Uncomfortable"),
    (1.25, 2.5, "Very uncomfortable"),
    (2.0, None, "Extremely uncomfortable"),
)


class SampleRateError(ValueError):
    """Series sample rate does not match the weighting design rate."""


@dataclass(frozen=True)
class WeightingFilter:
    """Second-order-section cascade with its design sample rate."""

    sos: np.ndarray
    fs: float = 1000.0

    def __post_init__(self):
        sos = np.atleast_2d(np.asarray(self.sos, dtype=float))
        if sos.shape[1] != 6:
            raise ValueError("sos rows must be (b0 b1 b2 a0 a1 a2)")
        if np.any(sos[:, 3] == 0.0):
            raise ValueError("a0 must be nonzero in every section")
        sos = sos / sos[:, 3:4]  # normalize a0 = 1
        for row in sos:
            if np.max(np.abs(np.roots(row[3:]))) >= 1.0:
                raise ValueError("weighting filter has a pole on/outside the unit circle")
        object.__setattr__(self, "sos", sos)

    def freq_response(self, freqs_hz) -> np.ndarray:
        _, h = scipy.signal.sosfreqz(self.sos, worN=np.atleast_1d(freqs_hz), fs=self.fs)
        return h

    def check_band_gain(self) -> None:
        """Contract on the vertical weighting: near-unity gain at 4-12.5 Hz."""
        mags = np.abs(self.freq_response([4.0, 8.0, 12.5]))
        if np.any(mags < 0.7) or np.any(mags > 1.1):
            raise ValueError(f"band gain contract violated: |H| = {mags}")


def load_weighting(path, fs: float = 1000.0) -> WeightingFilter:
    """Read a coefficients file: one ``b0 b1 b2 a0 a1 a2`` row per section."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            vals = [float(tok) for tok in line.split()]
            if len(vals) != 6:
                raise ValueError(f"expected 6 coefficients per row, got {len(vals)}")
            rows.append(vals)
    if not rows:
        raise ValueError(f"no coefficient rows in {path}")
    return WeightingFilter(np.array(rows), fs=fs)


def default_weighting() -> WeightingFilter:
    """The packaged default vertical weighting (designed for 1 kHz)."""
    ref = importlib.resources.files("suspsim.data") / "weighting_default.txt"
    with importlib.resources.as_file(ref) as path:
        filt = load_weighting(path, fs=1000.0)
    filt.check_band_gain()
    return filt


def weight(accel: np.ndarray, filt: WeightingFilter, fs: float = 1000.0) -> np.ndarray:
    """Causal filtering of the series through the cascade, zero initial state."""
    if fs != filt.fs:
        raise SampleRateError(f"series rate {fs} != filter design rate {filt.fs}")
    accel = np.asarray(accel, dtype=float)
    if accel.size < 1:
        raise ValueError("empty acceleration series")
    return scipy.signal.sosfilt(filt.sos, accel)


def weighted_rms(a_w: np.ndarray, duration: float) -> float:
    """RMS of the series by trapezoidal quadrature over [0, duration].

    ``duration`` must equal the series time span (N-1 sample intervals).
    """
    a_w = np.asarray(a_w, dtype=float)
    if a_w.size == 0:
        raise ValueError("empty series")
    if duration <= 0.0:
        raise ValueError("duration must be positive")
    if a_w.size < 2:
        raise ValueError("need at least two samples to span a positive duration")
    dt = duration / (a_w.size - 1)
    return float(np.sqrt(np.trapezoid(a_w * a_w, dx=dt) / duration))


def classify(a_rms: float) -> set[str]:
    """All comfort labels whose band contains the value (bands overlap)."""
    if a_rms < 0.0:
        raise ValueError("a_rms must be non-negative")
    labels = set()
    for lower, upper, label in COMFORT_BANDS:
        if upper is None:
            if a_rms > lower:
                labels.add(label)
        elif lower <= a_rms < upper:
            labels.add(label)
    return labels


@dataclass(frozen=True)
class RideMetrics:
    a_rms: float
    peak: float
    labels: frozenset[str]
    duration: float

    @classmethod
    def from_series(
        cls, accel: np.ndarray, dt: float, filt: WeightingFilter | None = None
    ) -> "RideMetrics":
        """Weight the raw acceleration series and reduce it to metrics."""
        if filt is None:
            filt = default_weighting()
        a_w = weight(accel, filt, fs=1.0 / dt)
        duration = dt * (len(a_w) - 1)
        rms = weighted_rms(a_w, duration)
        return cls(
            a_rms=rms,
            peak=float(np.max(np.abs(a_w))),
            labels=frozenset(classify(rms)),
            duration=duration,
        )


@dataclass(frozen=True)
class ReductionReport:
    rms_percent: float
    peak_percent: float


def percent_reduction(passive: RideMetrics, active: RideMetrics) -> ReductionReport:
    """Percent reduction of RMS and peak, active relative to passive."""
    if passive.a_rms <= 0.0:
        raise ValueError("passive RMS must be positive for a reduction figure")
    rms_pct = 100.0 * (passive.a_rms - active.a_rms) / passive.a_rms
    if passive.peak > 0.0:
        peak_pct = 100.0 * (passive.peak - active.peak) / passive.peak
    else:
        peak_pct = 0.0
    return ReductionReport(rms_percent=rms_pct, peak_percent=peak_pct)
