"""Acceleration-driven reference trajectory for the arm angle.

The measured body vertical acceleration is low-pass filtered, squashed
through tanh against a saturation scale (1.5 m/s^2 is already a very
uncomfortable level), scaled by the available reference headroom, and
added to the initial reference. Downward acceleration raises the
commanded angle and vice versa, so the reference always leans against
the sensed motion. The continuous output is turned into discrete
reference-change events by a deadband, since the observer blend is
triggered per change event rather than per tick.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class TrajectoryConfig:
    cutoff_time_constant: float = 0.1   # tau_f [s]
    gain_front: float = 1.0             # k1
    gain_mid: float = 1.0               # k2
    initial_ref_front: float = 0.30     # r_i_fr [rad]
    initial_ref_mid: float = 0.30       # r_i_m [rad]
    ref_min: float = 0.15               # [rad]
    ref_max: float = 0.45               # [rad]
    accel_scale: float = 1.5            # a_sat [m/s^2]
    deadband: float = 0.005             # dispatch threshold [rad]

    def validate(self) -> None:
        if not self.ref_min < self.initial_ref_front < self.ref_max:
            raise ValueError("initial_ref_front must lie strictly inside the range")
        if not self.ref_min < self.initial_ref_mid < self.ref_max:
            raise ValueError("initial_ref_mid must lie strictly inside the range")
        for name in ("cutoff_time_constant", "gain_front", "gain_mid", "accel_scale"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.deadband < 0.0:
            raise ValueError("deadband must be non-negative")


def lowpass(state: float, sample: float, dt: float, tau_f: float) -> tuple[float, float]:
    """First-order IIR step: y <- y + (dt/tau_f)(sample - y).

    Returns (new filter state, filtered value); they coincide.
    """
    if tau_f <= 0.0:
        raise ValueError("tau_f must be positive")
    new = state + (dt / tau_f) * (sample - state)
    return new, new


def delta_ref(
    accel_filtered: float, r_i: float, r_min: float, r_max: float, a_sat: float
) -> float:
    """Headroom-limited reference offset tanh(-accel/a_sat) * min headroom."""
    headroom = min(r_max - r_i, r_i - r_min)
    return math.tanh(-accel_filtered / a_sat) * headroom


def reference(
    y: float, r_delta: float, r_i: float, k: float, r_min: float, r_max: float
) -> float:
    """Piecewise reference update with range protection.

    Inside the range the reference is r_i + k*r_delta; at the range edges
    the matching saturation branch pins it to the bound. Cases not covered
    by the saturation branches fall through to the interior formula; the
    result is clamped to [r_min, r_max] either way.
    """
    if r_min < y < r_max:
        r = r_i + k * r_delta
    elif y >= r_max and r_i + r_delta >= r_max:
        r = r_max
    elif y <= r_min and r_i + r_delta <= r_min:
        r = r_min
    else:
        r = r_i + k * r_delta
    return min(max(r, r_min), r_max)


class ReferenceCalculator:
    """Per-tick trajectory state: acceleration filter plus dispatch deadband."""

    def __init__(self, cfg: TrajectoryConfig, use_mid_profile: bool = False):
        cfg.validate()
        self.cfg = cfg
        self.use_mid = use_mid_profile
        self.filter_state = 0.0
        self.last_candidate = cfg.initial_ref_mid if use_mid_profile else cfg.initial_ref_front
        self.last_dispatched = self.last_candidate

    @property
    def r_initial(self) -> float:
        return self.cfg.initial_ref_mid if self.use_mid else self.cfg.initial_ref_front

    @property
    def gain(self) -> float:
        return self.cfg.gain_mid if self.use_mid else self.cfg.gain_front

    def update(self, accel_sample: float, y: float, dt: float) -> tuple[float, float | None]:
        """Advance one tick; return (candidate reference, dispatched or None).

        A reference-change event fires when the candidate has moved from
        the last dispatched value by more than the deadband.
        """
        c = self.cfg
        self.filter_state, filtered = lowpass(
            self.filter_state, accel_sample, dt, c.cutoff_time_constant
        )
        r_d = delta_ref(filtered, self.r_initial, c.ref_min, c.ref_max, c.accel_scale)
        cand = reference(y, r_d, self.r_initial, self.gain, c.ref_min, c.ref_max)
        self.last_candidate = cand
        if abs(cand - self.last_dispatched) > c.deadband:
            self.last_dispatched = cand
            return cand, cand
        return cand, None
