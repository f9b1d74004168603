"""Reference-blended Luenberger observer.

Alongside the working estimate ``xhat``, three parallel estimates are
propagated, each conditioned on one anchor reference (r_min, r_mid,
r_max): channel k is driven by the error ``y - r_k`` while sharing the
main estimate's control term ``B K_c xhat``. When the commanded reference
changes, ``xhat`` is replaced by the piecewise-linear blend of the two
bracketing channels instead of being left to relax from a now-wrong
value; this removes the transient excursion an ordinary observer shows on
a reference step. The parallel channels are never reset.

Every channel update uses a single shared explicit-Euler step::

    x <- x + dt * (A x + u_c - K_o (C x - err))

with the common control vector ``u_c = B K_c xhat_prev``; the working
estimate itself is the same update with ``err = y - r`` (its control term
folds in as (A + B K_c) xhat_prev). Because the update is affine in
(x, err), convex combinations of channels propagate exactly like a
channel conditioned on the same convex combination of references, which
is what makes the blend consistent.
"""

from __future__ import annotations

import math

import numpy as np

from .lq import Gains, StateSpaceModel


class ReferenceRangeError(ValueError):
    """Reference outside [r_min, r_max]; the caller must clamp first."""


def parallel_estimate_step(
    x: np.ndarray,
    err: float,
    A: np.ndarray,
    control: np.ndarray,
    K_o: np.ndarray,
    C: np.ndarray,
    dt: float,
) -> np.ndarray:
    """Shared explicit-Euler observer update (one channel, one tick)."""
    return x + dt * (A @ x + control - K_o * (float(C @ x) - err))


def blend(
    x1: np.ndarray,
    x2: np.ndarray,
    x3: np.ndarray,
    r: float,
    r_min: float,
    r_mid: float,
    r_max: float,
) -> np.ndarray:
    """Piecewise-linear interpolation of the anchored estimates at ``r``.

    Upper segment mixes (x2, x3), lower segment mixes (x1, x2); the
    weights are convex and sum to one. ``r`` must lie in [r_min, r_max].
    """
    if not (r_min <= r_mid <= r_max):
        raise ValueError("anchor references must satisfy r_min <= r_mid <= r_max")
    if r < r_min or r > r_max:
        raise ReferenceRangeError(f"r={r} outside [{r_min}, {r_max}]")
    if r >= r_mid:
        span = r_max - r_mid
        if span == 0.0:
            return np.array(x2, dtype=float, copy=True)
        w3 = (r - r_mid) / span
        return x3 * w3 + x2 * (1.0 - w3)
    span = r_mid - r_min
    w1 = (r_mid - r) / span
    return x1 * w1 + x2 * (1.0 - w1)


class MultiObserver:
    """Blended estimator state: xhat plus three anchored parallel channels.

    One instance per control loop. ``allow_degenerate`` relaxes the strict
    anchor ordering (r_min < r_mid < r_max) for test configurations where
    all anchors coincide.
    """

    def __init__(
        self,
        order: int,
        r_min: float,
        r_mid: float,
        r_max: float,
        r0: float,
        allow_degenerate: bool = False,
    ):
        if allow_degenerate:
            if not (r_min <= r_mid <= r_max):
                raise ValueError("anchors must be ordered")
        elif not (r_min < r_mid < r_max):
            raise ValueError("anchors must satisfy r_min < r_mid < r_max")
        if not r_min <= r0 <= r_max:
            raise ReferenceRangeError(f"initial reference {r0} outside anchors")
        self.n = order
        self.r_min, self.r_mid, self.r_max = r_min, r_mid, r_max
        self.r = r0
        # all estimates start at zero; the blend equality at a reference
        # change relies on the channels sharing this initial condition
        self.xhat = np.zeros(order)
        self.x1 = np.zeros(order)
        self.x2 = np.zeros(order)
        self.x3 = np.zeros(order)

    @property
    def deltas(self) -> tuple[float, float, float]:
        """(r_min - r, r_mid - r, r_max - r), recomputed against the live r."""
        return (self.r_min - self.r, self.r_mid - self.r, self.r_max - self.r)

    def step(self, y: float, gains: Gains, model: StateSpaceModel, dt: float) -> None:
        """Advance all four estimates one tick from the measurement ``y``.

        The four updates read the previous tick's xhat for the shared
        control channel, so their in-tick order is immaterial.
        """
        if not math.isfinite(y):
            raise ValueError(f"non-finite measurement y={y}")
        A, C = model.A, model.C
        K_o = gains.K_o.ravel()
        control = model.B.ravel() * float(gains.K_c @ self.xhat)
        e = y - self.r
        xhat_new = parallel_estimate_step(self.xhat, e, A, control, K_o, C, dt)
        self.x1 = parallel_estimate_step(self.x1, y - self.r_min, A, control, K_o, C, dt)
        self.x2 = parallel_estimate_step(self.x2, y - self.r_mid, A, control, K_o, C, dt)
        self.x3 = parallel_estimate_step(self.x3, y - self.r_max, A, control, K_o, C, dt)
        self.xhat = xhat_new

    def on_reference_change(self, r_new: float) -> None:
        """Replace xhat by the blend at the new reference; keep the channels."""
        if r_new < self.r_min or r_new > self.r_max:
            raise ReferenceRangeError(
                f"r_new={r_new} outside [{self.r_min}, {self.r_max}]"
            )
        self.xhat = blend(
            self.x1, self.x2, self.x3, r_new,
            self.r_min, self.r_mid, self.r_max,
        )
        self.r = r_new

    def snapshot(self) -> dict[str, np.ndarray | float]:
        """Copy of the estimator state for trace logging."""
        return {
            "xhat": self.xhat.copy(),
            "x1": self.x1.copy(),
            "x2": self.x2.copy(),
            "x3": self.x3.copy(),
            "r": self.r,
        }
