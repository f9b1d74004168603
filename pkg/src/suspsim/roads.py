"""Road input generators: bump, limited ramp, sinusoid, custom tables.

All generators are pure functions of (t, h) — same inputs, bit-identical
outputs. ``RoadProfile`` wraps a generator pair (height, rate) for the
simulation loop and supports a time-scale factor so the same spatial
profile can be replayed at different vehicle speeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

KINDS = ("bump", "ramp", "sine")


def road_bump(t: float, h: float) -> float:
    """Half-sine-squared bump: h*(1 - cos(8*pi*t))/2 on [0, 0.25], else 0."""
    if 0.0 <= t <= 0.25:
        return h * (1.0 - math.cos(8.0 * math.pi * t)) / 2.0
    return 0.0


def road_bump_rate(t: float, h: float) -> float:
    if 0.0 <= t <= 0.25:
        return h * 4.0 * math.pi * math.sin(8.0 * math.pi * t)
    return 0.0


def road_limited_ramp(t: float, h: float) -> float:
    """Ramp from 0 to the final elevation h over t in [1, 1.1)."""
    if t < 1.0:
        return 0.0
    if t < 1.1:
        return 10.0 * h * (t - 1.0)
    return h


def road_limited_ramp_rate(t: float, h: float) -> float:
    return 10.0 * h if 1.0 <= t < 1.1 else 0.0


def road_sinusoid(t: float, h: float = 0.04) -> float:
    """Raised sinusoid (h/2)*(1 + sin(pi*t - pi/2)); zero at t = 0."""
    return (h / 2.0) * (1.0 + math.sin(math.pi * t - math.pi / 2.0))


def road_sinusoid_rate(t: float, h: float = 0.04) -> float:
    return (h / 2.0) * math.pi * math.cos(math.pi * t - math.pi / 2.0)


_GENERATORS: dict[str, tuple[Callable, Callable]] = {
    "bump": (road_bump, road_bump_rate),
    "ramp": (road_limited_ramp, road_limited_ramp_rate),
    "sine": (road_sinusoid, road_sinusoid_rate),
}


@dataclass(frozen=True)
class RoadProfile:
    """Time-domain road input y0(t) with analytic rate.

    ``time_scale`` replays the base profile at sigma-times speed:
    y(t) = base(sigma*t), rate = sigma*base'(sigma*t). A scale of 2.8 on
    the sinusoid approximates the same surface driven 2.8x faster.
    """

    kind: str = "bump"
    peak: float = 0.04
    time_scale: float = 1.0
    table: np.ndarray | None = None  # (N, 2) samples for kind="custom"

    def __post_init__(self):
        if self.kind == "custom":
            if self.table is None:
                raise ValueError("custom road requires a sample table")
            tab = np.asarray(self.table, dtype=float)
            if tab.ndim != 2 or tab.shape[1] != 2 or tab.shape[0] < 2:
                raise ValueError("road table must have shape (N>=2, 2)")
            if not np.all(np.isfinite(tab)):
                raise ValueError("road table contains non-finite values")
            if np.any(np.diff(tab[:, 0]) <= 0.0):
                raise ValueError("road table times must strictly increase")
            object.__setattr__(self, "table", tab)
        elif self.kind not in _GENERATORS:
            raise ValueError(f"unknown road kind {self.kind!r}")
        if self.time_scale <= 0.0:
            raise ValueError("time_scale must be positive")

    def height(self, t: float) -> float:
        ts = self.time_scale * t
        if self.kind == "custom":
            return float(np.interp(ts, self.table[:, 0], self.table[:, 1]))
        return _GENERATORS[self.kind][0](ts, self.peak)

    def rate(self, t: float) -> float:
        ts = self.time_scale * t
        if self.kind == "custom":
            return self.time_scale * self._table_slope(ts)
        return self.time_scale * _GENERATORS[self.kind][1](ts, self.peak)

    def _table_slope(self, ts: float) -> float:
        t_col = self.table[:, 0]
        if ts <= t_col[0] or ts >= t_col[-1]:
            return 0.0
        i = int(np.searchsorted(t_col, ts, side="right")) - 1
        dt = t_col[i + 1] - t_col[i]
        return float((self.table[i + 1, 1] - self.table[i, 1]) / dt)

    def sample(self, t: float) -> tuple[float, float]:
        """(height, rate) at time t, for the integrator."""
        return self.height(t), self.rate(t)


def load_road_table(path) -> RoadProfile:
    """Load a two-column (t, y0) text table as a custom road profile."""
    table = np.loadtxt(path, dtype=float)
    if table.ndim == 1:
        table = table.reshape(-1, 2)
    return RoadProfile(kind="custom", peak=float(np.max(np.abs(table[:, 1]))),
                       table=table)
