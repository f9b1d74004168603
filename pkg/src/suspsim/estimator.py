"""Online gradient estimation of the linearized plant coefficients.

The plant ``y = Z_p(s)/R_p(s) u`` is rewritten as the static parametric
model ``z = theta' phi`` by filtering both channels with a monic Hurwitz
polynomial Lambda(s) of the denominator degree n::

    z   = s^n y / Lambda
    phi = [s^m u, ..., u, -s^(n-1) y, ..., -y] / Lambda
    theta = [b_m ... b_0, a_(n-1) ... a_0]   (numerator, then denominator)

The filters are realized in phase-variable form and advanced with the
trapezoidal rule; the adaptation step is explicit Euler with the
normalized gradient law::

    eps = (z - theta' phi) / m^2,   m^2 = 1 + phi' phi
    theta <- project(theta + dt * gamma * eps * phi)

Projection clamps each coefficient to a box around the analytic
linearization and floors the leading numerator coefficient away from
zero, which keeps the estimate usable for LQ synthesis.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg
import scipy.signal

from .plant import PolynomialPlant


class PoisonedSignalError(ValueError):
    """Non-finite measurement offered to the estimator; state untouched."""


def project(
    theta: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    eps_z: float = 1e-9,
    lead_sign: float = 1.0,
) -> np.ndarray:
    """Componentwise clamp to [lower, upper], flooring the leading coefficient.

    ``theta[0]`` (the leading numerator coefficient) is additionally kept at
    magnitude >= eps_z, preserving its sign; ``lead_sign`` breaks the tie at
    exactly zero. Idempotent.
    """
    out = np.clip(np.asarray(theta, dtype=float), lower, upper)
    if abs(out[0]) < eps_z:
        sign = math.copysign(1.0, out[0]) if out[0] != 0.0 else math.copysign(1.0, lead_sign)
        out[0] = sign * eps_z
        # keep the floored value inside the box when the box allows it
        out[0] = min(max(out[0], lower[0]), upper[0])
    return out


class GradientEstimator:
    """Parametric model with filters, estimate and projection box.

    One instance per control loop; snapshot ``theta`` may be copied out at
    any tick for logging.
    """

    def __init__(
        self,
        theta0: np.ndarray,
        num_degree: int,
        den_degree: int,
        dt: float,
        lambda0: float = 20.0,
        gamma: float = 10.0,
        box_factor: float = 3.0,
        eps_z: float = 1e-9,
    ):
        theta0 = np.asarray(theta0, dtype=float).copy()
        n, m = den_degree, num_degree
        if theta0.size != n + m + 1:
            raise ValueError(f"theta0 must have length n+m+1 = {n + m + 1}")
        if lambda0 <= 0.0:
            raise ValueError("lambda0 must be positive (Lambda must be Hurwitz)")
        if gamma <= 0.0:
            raise ValueError("gamma must be positive")
        if dt <= 0.0:
            raise ValueError("dt must be positive")

        self.n, self.m = n, m
        self.dt = dt
        self.gamma = gamma
        self.eps_z = eps_z
        self.theta = theta0
        self.lead_sign = math.copysign(1.0, theta0[0]) if theta0[0] != 0.0 else 1.0
        span = box_factor * np.abs(theta0)
        self.box_lower = theta0 - span
        self.box_upper = theta0 + span
        self.theta = project(self.theta, self.box_lower, self.box_upper,
                             self.eps_z, self.lead_sign)

        # Lambda(s) = (s + lambda0)^n, monic Hurwitz by construction
        lam = np.poly(np.full(n, -lambda0))
        self.lambda_coeffs = lam
        if np.max(np.roots(lam).real) >= 0.0:
            raise ValueError("Lambda(s) must be Hurwitz")
        self._lam_low = lam[:0:-1].copy()  # [lam_0 ... lam_{n-1}]

        A = np.zeros((n, n))
        A[:-1, 1:] = np.eye(n - 1)
        A[-1, :] = -self._lam_low
        b = np.zeros(n)
        b[-1] = 1.0
        # trapezoidal (Tustin) one-step update matrices
        I = np.eye(n)
        M = np.linalg.inv(I - 0.5 * dt * A)
        self._F = M @ (I + 0.5 * dt * A)
        self._G = M @ (0.5 * dt * b)

        self.x_u = np.zeros(n)
        self.x_y = np.zeros(n)
        self._prev_u = 0.0
        self._prev_y = 0.0
        self.last_eps = 0.0
        self.last_m_sq = 1.0

    @classmethod
    def from_plant(cls, plant: PolynomialPlant, dt: float, **kwargs) -> "GradientEstimator":
        """Seed the estimator with an analytic linearization."""
        theta0 = np.concatenate([plant.num, plant.den[1:]])
        return cls(theta0, plant.numerator_degree, plant.denominator_degree,
                   dt, eps_z=plant.eps_z, **kwargs)

    def regress(self, u: float, y: float, dt: float) -> tuple[float, np.ndarray]:
        """Advance the channel filters one step; return (z, phi).

        ``dt`` must equal the configured period. Non-finite inputs raise
        PoisonedSignalError and leave the filters untouched.
        """
        if dt != self.dt:
            raise ValueError(f"dt {dt} differs from configured period {self.dt}")
        if not (math.isfinite(u) and math.isfinite(y)):
            raise PoisonedSignalError(f"non-finite estimator input u={u} y={y}")
        self.x_u = self._F @ self.x_u + self._G * (self._prev_u + u)
        self.x_y = self._F @ self.x_y + self._G * (self._prev_y + y)
        self._prev_u = u
        self._prev_y = y
        return self._measurement(y), self._regressor()

    def _measurement(self, y: float) -> float:
        # s^n y / Lambda = y - (lam_{n-1} s^{n-1} + ... + lam_0) y / Lambda
        return y - float(self._lam_low @ self.x_y)

    def _regressor(self) -> np.ndarray:
        # [s^m u_f ... u_f, -s^(n-1) y_f ... -y_f], descending powers
        return np.concatenate([self.x_u[self.m :: -1], -self.x_y[::-1]])

    def adapt(self, z: float, phi: np.ndarray,
              gamma: float | None = None, dt: float | None = None) -> float:
        """One normalized-gradient update; returns the normalized error eps."""
        g = self.gamma if gamma is None else gamma
        h = self.dt if dt is None else dt
        m_sq = 1.0 + float(phi @ phi)
        eps = (z - float(self.theta @ phi)) / m_sq
        self.theta = project(self.theta + h * g * eps * phi,
                             self.box_lower, self.box_upper,
                             self.eps_z, self.lead_sign)
        self.last_eps = eps
        self.last_m_sq = m_sq
        return eps

    def to_plant(self) -> PolynomialPlant:
        """Current estimate as a transfer function for gain synthesis."""
        num = self.theta[: self.m + 1]
        den = np.concatenate([[1.0], self.theta[self.m + 1 :]])
        return PolynomialPlant(num, den, eps_z=self.eps_z)


def band_limited_torque(
    n_samples: int,
    dt: float,
    amplitude: float,
    band: tuple[float, float] = (0.5, 15.0),
    seed: int = 0,
) -> np.ndarray:
    """Seeded band-limited pseudo-random torque for identification runs.

    White noise shaped by a 4th-order Butterworth band-pass, rescaled so
    the sample standard deviation equals ``amplitude``. Deterministic for
    a fixed (n_samples, dt, band, seed).
    """
    rng = np.random.default_rng(seed)
    white = rng.standard_normal(n_samples)
    fs = 1.0 / dt
    sos = scipy.signal.butter(4, band, btype="bandpass", fs=fs, output="sos")
    shaped = scipy.signal.sosfilt(sos, white)
    std = float(np.std(shaped))
    if std == 0.0:
        return np.zeros(n_samples)
    return amplitude * shaped / std
