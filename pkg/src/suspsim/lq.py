"""LQ synthesis: canonical realization, CARE solution, feedback and observer gains.

The Riccati equation is solved by ordered real Schur decomposition of the
2n x 2n Hamiltonian (stable invariant subspace), followed by a short
Newton refinement that polishes the residual. All operations are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

HURWITZ_MARGIN = 1e-9


class CareBoundaryError(RuntimeError):
    """Hamiltonian eigenvalues on (or numerically at) the imaginary axis."""


class ConditioningError(RuntimeError):
    """Invariant-subspace basis too ill-conditioned to invert."""


class PlacementError(RuntimeError):
    """Observer pole placement impossible (pair not observable)."""


@dataclass(frozen=True)
class StateSpaceModel:
    """Controllable-canonical SISO realization (A, B, C)."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    realization: str = "controllable-canonical"
    observability_warning: bool = False

    @property
    def order(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class LqWeights:
    """State weight Q (symmetric PSD) and scalar control weight R > 0."""

    Q: np.ndarray
    R: float

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        if Q.shape[0] != Q.shape[1]:
            raise ValueError("Q must be square")
        if np.max(np.abs(Q - Q.T)) != 0.0:
            raise ValueError("Q must be exactly symmetric")
        if np.min(scipy.linalg.eigvalsh(Q)) < -1e-12:
            raise ValueError("Q must be positive semidefinite")
        if not self.R > 0.0:
            raise ValueError("R must be strictly positive")
        object.__setattr__(self, "Q", Q)


@dataclass(frozen=True)
class Gains:
    """Synthesized gains: state feedback K_c (1 x n), observer K_o (n x 1)."""

    K_c: np.ndarray
    K_o: np.ndarray
    P: np.ndarray


def _sylvester_resultant(num: np.ndarray, den: np.ndarray) -> float:
    """Normalized resultant of two polynomials; ~0 for near-common roots."""
    p, q = np.trim_zeros(np.asarray(num, float), "f"), np.asarray(den, float)
    n, m = q.size - 1, p.size - 1
    if m < 0:
        return 0.0
    if m == 0:
        return abs(p[0]) ** n
    S = np.zeros((n + m, n + m))
    for i in range(m):
        S[i, i : i + n + 1] = q
    for i in range(n):
        S[m + i, i : i + m + 1] = p
    scale = (np.linalg.norm(q) ** m) * (np.linalg.norm(p) ** n)
    return float(abs(np.linalg.det(S)) / max(scale, 1e-300))


def realize(plant, den=None, resultant_tol: float = 1e-8) -> StateSpaceModel:
    """Controllable canonical form of Z_p/R_p.

    Accepts a ``PolynomialPlant`` or raw (num, den) coefficient arrays in
    descending powers of s; the denominator must be monic. Near-common
    roots of Z_p and R_p set ``observability_warning`` on the result.
    """
    if den is None:
        num = np.asarray(plant.num, dtype=float)
        den = np.asarray(plant.den, dtype=float)
    else:
        num = np.atleast_1d(np.asarray(plant, dtype=float))
        den = np.atleast_1d(np.asarray(den, dtype=float))
    if den[0] != 1.0:
        raise ValueError("R_p must be monic")
    n = den.size - 1
    if num.size > n:
        raise ValueError("Z_p/R_p must be strictly proper")

    A = np.zeros((n, n))
    A[:-1, 1:] = np.eye(n - 1)
    A[-1, :] = -den[:0:-1]  # -r_0 ... -r_{n-1}
    B = np.zeros((n, 1))
    B[-1, 0] = 1.0
    C = np.zeros((1, n))
    C[0, : num.size] = num[::-1]
    warning = _sylvester_resultant(num, den) < resultant_tol
    return StateSpaceModel(A=A, B=B, C=C, observability_warning=warning)


def care_residual(A, B, Q, R, P) -> float:
    """Frobenius norm of A'P + PA - PBR^-1B'P + Q."""
    BRB = B @ B.T / R
    return float(np.linalg.norm(A.T @ P + P @ A - P @ BRB @ P + Q, "fro"))


def solve_care(A, B, Q, R) -> np.ndarray:
    """Stabilizing solution of A'P + PA - PBR^-1B'P + Q = 0.

    Ordered real Schur decomposition of the Hamiltonian selects the stable
    invariant subspace; a Newton pass then polishes the residual to the
    contract ``res <= 1e-8 * (1 + ||P||_F)``.

    Raises
    ------
    CareBoundaryError
        When Hamiltonian eigenvalues sit within 1e-9 of the imaginary axis
        (non-stabilizable or undetectable boundary case).
    ConditioningError
        When the subspace basis cannot be inverted reliably.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = float(R)
    n = A.shape[0]

    H = np.block([[A, -B @ B.T / R], [-Q, -A.T]])
    eigs = scipy.linalg.eigvals(H)
    if np.min(np.abs(eigs.real)) < 1e-9:
        raise CareBoundaryError(
            "Hamiltonian eigenvalue on the imaginary axis; "
            "system not stabilizable/detectable for these weights"
        )
    T, Z, sdim = scipy.linalg.schur(H, output="real", sort="lhp")
    if sdim != n:
        raise CareBoundaryError(f"stable subspace has dimension {sdim}, expected {n}")
    U1 = Z[:n, :n]
    U2 = Z[n:, :n]
    if np.linalg.cond(U1) > 1e12:
        raise ConditioningError("stable-subspace basis is numerically singular")
    P = scipy.linalg.solve(U1.T, U2.T).T
    P = 0.5 * (P + P.T)

    # Newton (Kleinman) refinement; each step solves a Lyapunov equation
    res = care_residual(A, B, Q, R, P)
    for _ in range(3):
        if res <= 1e-10 * (1.0 + np.linalg.norm(P, "fro")):
            break
        K = B.T @ P / R
        Acl = A - B @ K
        P_new = scipy.linalg.solve_continuous_lyapunov(Acl.T, -(Q + K.T @ K * R))
        P_new = 0.5 * (P_new + P_new.T)
        res_new = care_residual(A, B, Q, R, P_new)
        if res_new >= res:
            break
        P, res = P_new, res_new
    if res > 1e-8 * (1.0 + np.linalg.norm(P, "fro")):
        raise ConditioningError(f"CARE residual {res:.3e} above contract")
    return P


def feedback_gain(P, B, R) -> np.ndarray:
    """LQ state feedback K_c = -R^-1 B'P, shaped (1, n); A + B K_c is Hurwitz."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    B = np.asarray(B, dtype=float).reshape(P.shape[0], -1)
    return -(B.T @ P) / float(R)


def _ackermann(A: np.ndarray, b: np.ndarray, poles) -> np.ndarray:
    """Gain k (1 x n) with eig(A - b k) = poles; requires controllability."""
    n = A.shape[0]
    ctrb = np.hstack([np.linalg.matrix_power(A, k) @ b for k in range(n)])
    if np.linalg.cond(ctrb) > 1e12:
        raise PlacementError("pair not controllable/observable: placement impossible")
    coeffs = np.real(np.poly(np.asarray(poles, dtype=complex)))
    qA = np.zeros_like(A)
    for c in coeffs:
        qA = qA @ A + c * np.eye(n)
    e_n = np.zeros((1, n))
    e_n[0, -1] = 1.0
    return e_n @ np.linalg.solve(ctrb, qA)


def observer_gain(A, C, pole_set) -> np.ndarray:
    """Luenberger gain K_o (n x 1) placing eig(A - K_o C) at ``pole_set``.

    Ackermann's formula on the dual system; complex poles must come in
    conjugate pairs.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    C = np.asarray(C, dtype=float).reshape(1, -1)
    k = _ackermann(A.T, C.T, pole_set)
    return k.T


def default_observer_poles(closed_loop_eigs, cap: float | None = None) -> np.ndarray:
    """Observer pole set: 3x the closed-loop pole magnitudes, spread on the real axis.

    Reflecting onto the real axis avoids oscillatory estimation error;
    near-coincident magnitudes (conjugate pairs) are spread by 5% steps so
    the placement stays well conditioned. ``cap`` bounds the pole
    magnitudes; the observer integrates with explicit Euler, so its poles
    must stay well inside the Euler stability disk (|p| < 2/dt), which a
    3x rule can violate on plants with fast damped modes.
    """
    mags = np.sort(np.abs(np.asarray(closed_loop_eigs, dtype=complex)))
    poles = -3.0 * mags
    if cap is not None:
        poles = np.maximum(poles, -abs(cap))
    for i in range(1, poles.size):
        if abs(poles[i] - poles[i - 1]) < 1e-3 * abs(poles[i - 1]):
            # spread duplicates away from the cap when one is active
            poles[i] = poles[i - 1] * (1.05 if cap is None else 0.95)
    return poles


def control_torque(K_c, xhat, limit: float | None = None) -> float:
    """Feedback torque u = K_c xhat, optionally clamped to [-limit, limit]."""
    u = float(np.asarray(K_c).reshape(1, -1) @ np.asarray(xhat).reshape(-1, 1))
    if limit is not None:
        u = min(max(u, -limit), limit)
    return u


def synthesize(model: StateSpaceModel, weights: LqWeights,
               observer_poles=None, pole_cap: float | None = None) -> Gains:
    """Certainty-equivalence synthesis from a realized model.

    Solves the CARE, forms K_c, and places the observer poles (default:
    ``default_observer_poles`` of the closed-loop spectrum, magnitude
    capped at ``pole_cap``). Validates the Hurwitz contracts on both loops
    before returning.
    """
    P = solve_care(model.A, model.B, weights.Q, weights.R)
    K_c = feedback_gain(P, model.B, weights.R)
    Acl = model.A + model.B @ K_c
    cl_eigs = np.linalg.eigvals(Acl)
    if np.max(cl_eigs.real) >= -HURWITZ_MARGIN:
        raise CareBoundaryError("closed loop not Hurwitz after synthesis")
    if observer_poles is None:
        observer_poles = default_observer_poles(cl_eigs, cap=pole_cap)
    K_o = observer_gain(model.A, model.C, observer_poles)
    obs_eigs = np.linalg.eigvals(model.A - K_o @ model.C)
    if np.max(obs_eigs.real) >= -HURWITZ_MARGIN:
        raise PlacementError("observer loop not Hurwitz after placement")
    return Gains(K_c=K_c, K_o=K_o, P=P)
