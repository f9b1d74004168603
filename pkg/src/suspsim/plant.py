"""Nonlinear trailing-arm quarter-car dynamics and its linearization.

Implemented model
-----------------
Planar quarter car with two degrees of freedom, ``q = (a, y_b)``:

* ``a`` — trailing-arm angle (rad), measured downward from horizontal at
  the chassis-mounted pivot. The wheel end sits at radius ``L_a``, so its
  height is ``y_w = y_b - L_a*sin(a)``.
* ``y_b`` — chassis heave (m), the vertical position of the sprung mass
  ``M_tot`` (the pivot rides at ``y_b``).

Bodies carried by the arm:

* the arm itself: mass ``m_arm``, centre of mass at radius ``r_arm``,
  moment of inertia ``I_arm`` about the pivot (includes ``m_arm*r_arm**2``);
* the damper unit: point mass ``m_d`` at radius ``l_d`` and position angle
  ``a - phi0`` below horizontal (``phi0`` is the fixed linkage offset);
* the upper link: point mass ``m_u`` whose angle ``beta`` is kinematically
  slaved to the arm, ``beta(a) = beta0 + kappa*(a - a_beta_ref)``. Its
  centre of mass sits at the arm attachment (radius ``l_b``) plus ``l_u``
  along the link, height ``y_b - l_b*sin(a) + l_u*sin(beta)``.

With ``c = cos``, ``s = sin`` the kinetic energy is
``T = M11*adot**2/2 + M12*adot*ybdot + M22*ybdot**2/2`` where::

    M11(a) = I_arm + m_d*l_d**2
             + m_u*(l_b**2 + (l_u*kappa)**2 - 2*l_b*l_u*kappa*c(a + beta))
    M12(a) = -(m_arm*r_arm*c(a) + m_d*l_d*c(a - phi0)
               + m_u*(l_b*c(a) - l_u*kappa*c(beta)))
    M22    = M_tot + m_arm + m_d + m_u

Forces:

* gravity on every mass (potential; note ``dV_grav/da = g*M12(a)``, which
  makes torque-free free fall exact);
* pivot spring-damper between arm and chassis: torque
  ``-k_p*(a - a_spring) - c_p*adot`` (the passive suspension elements;
  they act in every mode, the actuator torque adds on top);
* hydraulic cylinder along the upper link, attached to the arm at radius
  ``l_b``: force law ``f_e(a, adot)`` (positive = supporting), generalized
  torque ``+f_e*l_b*s(a + beta)``. The default law is a linear gas spring
  ``f_e = f0 + k_f*(a - a_cyl_ref)`` (stroke affine in the arm angle);
* wheel-road contact at the arm tip: vertical force
  ``F_w = k_w*(y0 - y_w) + c_w*(y0dot - ywdot)`` acting up on the tip,
  generalized forces ``(-F_w*L_a*c(a), +F_w)`` on ``(a, y_b)``. This stiff
  contact element stands in for the (out of scope) tire/track model; it is
  the only path by which the road height and rate excite the system;
* actuator torque ``tau`` at the pivot, entering the ``a`` equation only
  (its moment reaction is carried by the suppressed pitch freedom).

Equations of motion (Lagrange)::

    M11*addd + M12*ybdd = tau + f_e*l_b*s(a+beta) - F_w*L_a*c(a)
                          - k_p*(a - a_spring) - c_p*adot
                          - g*M12(a) - dM11/da * adot**2 / 2
    M12*addd + M22*ybdd = F_w - M22*g - dM12/da * adot**2

solved per call for ``(addd, ybdd)``; the 2x2 mass matrix is symmetric
positive definite away from degenerate geometry. ``addd`` is affine in
``tau`` by construction.

All functions here are pure; state records have value semantics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple

import numpy as np

DEFAULT_DT = 1e-3


class DegenerateGeometryError(RuntimeError):
    """Effective inertia matrix is singular at the requested configuration."""


class NoEquilibriumError(RuntimeError):
    """No static equilibrium exists for the requested arm angle."""


@dataclass(frozen=True)
class PhysicalParams:
    """Physical constants of the quarter-car model (SI units).

    The cylinder force law defaults to the linear gas spring
    ``f0 + k_f*(a - a_cyl_ref)``; pass ``cylinder_force_law`` to substitute
    a measured map ``(arm angle, arm rate) -> force``.
    """

    arm_inertia: float = 11.0          # I_arm, about the pivot [kg m^2]
    arm_mass: float = 80.0             # m_arm [kg]
    arm_com_radius: float = 0.30       # r_arm [m]
    arm_length: float = 0.55           # L_a, pivot to wheel [m]
    total_body_mass: float = 4000.0    # M_tot, sprung mass per corner [kg]
    upper_link_mass: float = 15.0      # m_u [kg]
    upper_link_length: float = 0.25    # l_u [m]
    damper_mass: float = 25.0          # m_d [kg]
    link_offset_b: float = 0.18        # l_b, arm attachment radius [m]
    link_offset_d: float = 0.20        # l_d, damper mass radius [m]
    linkage_offset_angle: float = math.radians(41.0)  # phi0 [rad]
    gravity: float = 9.81              # g [m/s^2]
    passive_stiffness: float = 8.0e4   # k_p [N m/rad]
    passive_damping: float = 1.3e4     # c_p [N m s/rad]
    contact_stiffness: float = 5.0e5   # k_w, wheel-road contact [N/m]
    contact_damping: float = 4.0e3     # c_w [N s/m]
    spring_ref_angle: float = 0.30     # a_spring, pivot spring neutral [rad]
    link_angle_ref: float = 0.80       # beta0 [rad]
    link_ratio: float = 0.60           # kappa, d(beta)/d(a)
    link_angle_at: float = 0.30        # a_beta_ref [rad]
    cylinder_preload: float = 1.30e5   # f0 [N]
    cylinder_gradient: float = -1.2e5  # k_f [N/rad]
    cylinder_ref_angle: float = 0.30   # a_cyl_ref [rad]
    arm_angle_min: float = 0.05        # a_min [rad]
    arm_angle_max: float = 0.60        # a_max [rad]
    cylinder_force_law: Callable[[float, float], float] | None = None

    def link_angle(self, arm_angle: float) -> float:
        """beta(a), the slaved upper-link angle."""
        return self.link_angle_ref + self.link_ratio * (arm_angle - self.link_angle_at)

    def cylinder_force(self, arm_angle: float, arm_rate: float) -> float:
        """f_e(a, adot); positive supports the chassis."""
        if self.cylinder_force_law is not None:
            return self.cylinder_force_law(arm_angle, arm_rate)
        return self.cylinder_preload + self.cylinder_gradient * (
            arm_angle - self.cylinder_ref_angle
        )

    def validate(self) -> None:
        """Raise ValueError when an invariant is broken."""
        positive = {
            "arm_inertia": self.arm_inertia,
            "arm_mass": self.arm_mass,
            "arm_com_radius": self.arm_com_radius,
            "arm_length": self.arm_length,
            "total_body_mass": self.total_body_mass,
            "upper_link_mass": self.upper_link_mass,
            "upper_link_length": self.upper_link_length,
            "damper_mass": self.damper_mass,
            "link_offset_b": self.link_offset_b,
            "link_offset_d": self.link_offset_d,
        }
        for name, value in positive.items():
            if not (value > 0.0) or not math.isfinite(value):
                raise ValueError(f"{name} must be strictly positive, got {value}")
        if not 0.0 < self.linkage_offset_angle < math.pi / 2:
            raise ValueError("linkage_offset_angle must lie in (0, pi/2)")
        if self.gravity < 0.0:
            raise ValueError("gravity must be non-negative")
        if self.arm_angle_min >= self.arm_angle_max:
            raise ValueError("arm_angle_min must be below arm_angle_max")
        for name in ("passive_stiffness", "passive_damping",
                     "contact_stiffness", "contact_damping"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")
        # f_e must stay finite over the admissible angle range
        for a in np.linspace(self.arm_angle_min, self.arm_angle_max, 17):
            if not math.isfinite(self.cylinder_force(float(a), 0.0)):
                raise ValueError(f"cylinder force not finite at arm angle {a}")


@dataclass(frozen=True)
class PlantState:
    """Plant configuration and rates; ``link_angle`` is slaved to the arm."""

    arm_angle: float
    arm_rate: float
    body_heave: float
    body_rate: float

    def link_angle(self, params: PhysicalParams) -> float:
        return params.link_angle(self.arm_angle)

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.arm_angle, self.arm_rate, self.body_heave, self.body_rate]
        )

    @staticmethod
    def from_array(x) -> "PlantState":
        return PlantState(float(x[0]), float(x[1]), float(x[2]), float(x[3]))


class PlantDerivative(NamedTuple):
    arm_rate: float
    arm_accel: float
    body_rate: float
    body_accel: float


def _mass_matrix(a: float, p: PhysicalParams):
    """Return (M11, M12, M22, dM11/da, dM12/da) at arm angle ``a``."""
    beta = p.link_angle(a)
    ca, sa = math.cos(a), math.sin(a)
    cb, sb = math.cos(beta), math.sin(beta)
    cab, sab = math.cos(a + beta), math.sin(a + beta)
    cad = math.cos(a - p.linkage_offset_angle)
    sad = math.sin(a - p.linkage_offset_angle)
    k = p.link_ratio
    lu_k = p.upper_link_length * k

    m11 = (
        p.arm_inertia
        + p.damper_mass * p.link_offset_d**2
        + p.upper_link_mass
        * (p.link_offset_b**2 + lu_k**2 - 2.0 * p.link_offset_b * lu_k * cab)
    )
    m12 = -(
        p.arm_mass * p.arm_com_radius * ca
        + p.damper_mass * p.link_offset_d * cad
        + p.upper_link_mass * (p.link_offset_b * ca - lu_k * cb)
    )
    m22 = p.total_body_mass + p.arm_mass + p.damper_mass + p.upper_link_mass
    dm11 = 2.0 * p.upper_link_mass * p.link_offset_b * lu_k * (1.0 + k) * sab
    dm12 = (
        p.arm_mass * p.arm_com_radius * sa
        + p.damper_mass * p.link_offset_d * sad
        + p.upper_link_mass * (p.link_offset_b * sa - lu_k * k * sb)
    )
    return m11, m12, m22, dm11, dm12


def eval_dynamics(
    state: PlantState,
    torque: float,
    road_height: float,
    road_rate: float,
    params: PhysicalParams,
) -> PlantDerivative:
    """Evaluate the equations of motion at one state.

    Parameters
    ----------
    state : PlantState
    torque : float
        Actuator torque at the pivot [N m]; the passive pivot spring-damper
        acts in addition to it.
    road_height, road_rate : float
        Road elevation y0 and its rate under the wheel [m, m/s].
    params : PhysicalParams

    Returns
    -------
    PlantDerivative
        ``(arm_rate, arm_accel, body_rate, body_accel)``.

    Raises
    ------
    DegenerateGeometryError
        If the effective inertia matrix is numerically singular.
    ValueError
        On non-finite inputs.
    """
    a, adot = state.arm_angle, state.arm_rate
    yb, ybdot = state.body_heave, state.body_rate
    if not all(map(math.isfinite, (a, adot, yb, ybdot, torque, road_height, road_rate))):
        raise ValueError("non-finite input to eval_dynamics")

    p = params
    m11, m12, m22, dm11, dm12 = _mass_matrix(a, p)
    det = m11 * m22 - m12 * m12
    if abs(det) < 1e-12 * max(1.0, abs(m11) * abs(m22)):
        raise DegenerateGeometryError(
            f"singular effective inertia at arm angle {a:.6f} (det={det:.3e})"
        )

    beta = p.link_angle(a)
    ca = math.cos(a)
    y_w = yb - p.arm_length * math.sin(a)
    yw_dot = ybdot - p.arm_length * ca * adot
    f_contact = p.contact_stiffness * (road_height - y_w) + p.contact_damping * (
        road_rate - yw_dot
    )
    f_cyl = p.cylinder_force(a, adot)

    rhs_a = (
        torque
        + f_cyl * p.link_offset_b * math.sin(a + beta)
        - f_contact * p.arm_length * ca
        - p.passive_stiffness * (a - p.spring_ref_angle)
        - p.passive_damping * adot
        - p.gravity * m12
        - 0.5 * dm11 * adot * adot
    )
    rhs_y = f_contact - m22 * p.gravity - dm12 * adot * adot

    arm_accel = (rhs_a * m22 - m12 * rhs_y) / det
    body_accel = (m11 * rhs_y - m12 * rhs_a) / det
    return PlantDerivative(adot, arm_accel, ybdot, body_accel)


def holding_torque(params: PhysicalParams, arm_angle: float) -> float:
    """Actuator torque balancing the flat-road statics at one arm angle.

    The arm equation is affine in the torque, so the balance is closed
    form once the contact force is pinned to the total weight.
    """
    p = params
    a = float(arm_angle)
    _, m12, m22, _, _ = _mass_matrix(a, p)
    beta = p.link_angle(a)
    f_contact = m22 * p.gravity  # contact carries the full weight at rest
    return -(
        p.cylinder_force(a, 0.0) * p.link_offset_b * math.sin(a + beta)
        - f_contact * p.arm_length * math.cos(a)
        - p.passive_stiffness * (a - p.spring_ref_angle)
        - p.gravity * m12
    )


def equilibrium(
    params: PhysicalParams, target_arm_angle: float
) -> tuple[PlantState, float]:
    """Static equilibrium state and holding torque at a commanded arm angle.

    Solves the flat-road (y0 = 0) force balance: the contact force must
    carry the total weight (fixing the body heave), and the holding torque
    then zeroes the arm equation, which is affine in the torque.
    """
    p = params
    a = float(target_arm_angle)
    if not p.arm_angle_min <= a <= p.arm_angle_max:
        raise ValueError(
            f"target arm angle {a} outside [{p.arm_angle_min}, {p.arm_angle_max}]"
        )

    m11, m12, m22, _, _ = _mass_matrix(a, p)
    weight = m22 * p.gravity
    if p.contact_stiffness > 0.0:
        y_w = -weight / p.contact_stiffness
        yb = y_w + p.arm_length * math.sin(a)
    elif weight == 0.0:
        yb = 0.0  # heave-indifferent: nothing to support
    else:
        raise NoEquilibriumError("zero contact stiffness cannot support the weight")

    torque = holding_torque(p, a)
    state = PlantState(a, 0.0, yb, 0.0)
    deriv = eval_dynamics(state, torque, 0.0, 0.0, p)
    scale = 1.0 + p.gravity + abs(torque) / m11
    if abs(deriv.arm_accel) > 1e-10 * scale or abs(deriv.body_accel) > 1e-10 * scale:
        raise NoEquilibriumError(
            f"equilibrium residual too large at a={a}: "
            f"({deriv.arm_accel:.3e}, {deriv.body_accel:.3e})"
        )
    return state, torque


def linear_jacobians(
    params: PhysicalParams, eq: PlantState, holding_torque: float
) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference (A, B) of the dynamics about an equilibrium.

    Step 1e-6, scaled by the state magnitude; road inputs frozen at zero.
    """

    def f(x: np.ndarray, tau: float) -> np.ndarray:
        d = eval_dynamics(PlantState.from_array(x), tau, 0.0, 0.0, params)
        return np.array(d, dtype=float)

    x0 = eq.as_array()
    n = x0.size
    A = np.empty((n, n))
    for i in range(n):
        h = 1e-6 * max(1.0, abs(x0[i]))
        xp, xm = x0.copy(), x0.copy()
        xp[i] += h
        xm[i] -= h
        A[:, i] = (f(xp, holding_torque) - f(xm, holding_torque)) / (2.0 * h)
    h_tau = 1e-6 * max(1.0, abs(holding_torque))
    B = (f(x0, holding_torque + h_tau) - f(x0, holding_torque - h_tau)) / (2.0 * h_tau)
    return A, B.reshape(n, 1)


@dataclass(frozen=True)
class PolynomialPlant:
    """Strictly proper SISO transfer function Z_p(s)/R_p(s).

    Coefficients in descending powers of s; R_p is monic. The leading
    numerator coefficient is kept away from zero by the floor ``eps_z``
    (the estimator's projection relies on it).
    """

    num: np.ndarray
    den: np.ndarray
    eps_z: float = 1e-9
    conditioning_warning: bool = False
    observability_warning: bool = False

    def __post_init__(self):
        num = np.atleast_1d(np.asarray(self.num, dtype=float))
        den = np.atleast_1d(np.asarray(self.den, dtype=float))
        if den[0] == 0.0:
            raise ValueError("R_p leading coefficient is zero")
        if den[0] != 1.0:
            num = num / den[0]
            den = den / den[0]
        # trim numerator leading zeros down to the actual degree
        scale = max(np.max(np.abs(num)), self.eps_z)
        k = 0
        while k < num.size - 1 and abs(num[k]) <= 1e-12 * scale:
            k += 1
        num = num[k:]
        if num.size >= den.size:
            raise ValueError("Z_p/R_p must be strictly proper (n > m)")
        if abs(num[0]) < self.eps_z:
            raise ValueError(
                f"leading Z_p coefficient {num[0]:.3e} below floor {self.eps_z:.3e}"
            )
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @property
    def numerator_degree(self) -> int:
        return self.num.size - 1

    @property
    def denominator_degree(self) -> int:
        return self.den.size - 1

    def poles(self) -> np.ndarray:
        return np.roots(self.den)

    def zeros(self) -> np.ndarray:
        return np.roots(self.num)

    def dc_gain(self) -> float:
        return float(self.num[-1] / self.den[-1])

    def freq_response(self, w: np.ndarray) -> np.ndarray:
        s = 1j * np.asarray(w, dtype=float)
        return np.polyval(self.num, s) / np.polyval(self.den, s)


def _charpoly_and_numerator(A: np.ndarray, B: np.ndarray, C: np.ndarray):
    """Faddeev-LeVerrier: char poly of A and coefficients of C adj(sI-A) B."""
    n = A.shape[0]
    den = np.empty(n + 1)
    den[0] = 1.0
    M = np.eye(n)
    num = np.empty(n)
    num[0] = float(C @ M @ B)
    for k in range(1, n + 1):
        AM = A @ M
        den[k] = -np.trace(AM) / k
        if k < n:
            M = AM + den[k] * np.eye(n)
            num[k] = float(C @ M @ B)
    return num, den


def linearize(
    params: PhysicalParams,
    eq: PlantState,
    holding_torque: float,
    eps_z: float = 1e-9,
    cond_threshold: float = 1e12,
) -> PolynomialPlant:
    """Linearized transfer function from torque perturbation to arm angle.

    The four states are (arm angle, arm rate, body heave, body rate), so
    the monic denominator has degree 4. A conditioning warning is attached
    when the Jacobian is ill-conditioned beyond ``cond_threshold``.
    """
    A, B = linear_jacobians(params, eq, holding_torque)
    C = np.array([[1.0, 0.0, 0.0, 0.0]])
    num, den = _charpoly_and_numerator(A, B, C)
    warn = bool(np.linalg.cond(A) > cond_threshold)
    return PolynomialPlant(num, den, eps_z=eps_z, conditioning_warning=warn)


def rk4_step(
    state: PlantState,
    torque: float,
    road_fn: Callable[[float], tuple[float, float]],
    t: float,
    dt: float,
    params: PhysicalParams,
) -> PlantState:
    """One fixed-step RK4 integration step; torque held over the step.

    ``road_fn(t)`` returns (height, rate) so the half/full-step stages see
    the road at their own times.
    """

    def f(x: np.ndarray, ti: float) -> np.ndarray:
        y0, y0dot = road_fn(ti)
        d = eval_dynamics(PlantState.from_array(x), torque, y0, y0dot, params)
        return np.array(d, dtype=float)

    x = state.as_array()
    k1 = f(x, t)
    k2 = f(x + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = f(x + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = f(x + dt * k3, t + dt)
    return PlantState.from_array(x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))


def total_energy(
    state: PlantState, params: PhysicalParams, road_height: float = 0.0
) -> float:
    """Mechanical energy T + V for a frozen road height.

    The cylinder potential is integrated with fixed 32-node Gauss-Legendre
    quadrature from the spring reference angle (exact for the default
    affine law up to quadrature error; rate-dependent laws have no
    potential and are not supported here).
    """
    p = params
    a, adot = state.arm_angle, state.arm_rate
    yb, ybdot = state.body_heave, state.body_rate
    m11, m12, m22, _, _ = _mass_matrix(a, p)
    kinetic = 0.5 * m11 * adot**2 + m12 * adot * ybdot + 0.5 * m22 * ybdot**2

    beta = p.link_angle(a)
    height_sum = (
        p.arm_mass * p.arm_com_radius * math.sin(a)
        + p.damper_mass * p.link_offset_d * math.sin(a - p.linkage_offset_angle)
        + p.upper_link_mass * (p.link_offset_b * math.sin(a) - p.upper_link_length * math.sin(beta))
    )
    v_grav = p.gravity * (m22 * yb - height_sum)
    v_spring = 0.5 * p.passive_stiffness * (a - p.spring_ref_angle) ** 2
    y_w = yb - p.arm_length * math.sin(a)
    v_contact = 0.5 * p.contact_stiffness * (y_w - road_height) ** 2

    nodes, weights = np.polynomial.legendre.leggauss(32)
    lo, hi = p.spring_ref_angle, a
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    v_cyl = 0.0
    for xi, wi in zip(nodes, weights):
        ai = mid + half * xi
        v_cyl -= (
            wi
            * half
            * p.cylinder_force(ai, 0.0)
            * p.link_offset_b
            * math.sin(ai + p.link_angle(ai))
        )
    return kinetic + v_grav + v_spring + v_contact + v_cyl
