"""2x2 real matrix algebra, the circle action of SL(2,R), and truncated
second-order Taylor jets of matrix families.

Conventions used throughout the package:

* angles live on [0, 2*pi); the projective line appears as a double cover
  and every derived density / polynomial is pi-periodic,
* ``e_theta = (cos theta, sin theta)``,
* the complex reference vector is ``v = (1, -i)/sqrt(2)`` and inner
  products conjugate the *first* slot, so ``<v|e_theta> = e^{i theta}/sqrt(2)``.

For a traceless real matrix ``X`` the two complex numbers

    alpha = <v|X|v> = i (x21 - x12) / 2
    beta  = <vbar|X|v> = x11 - i (x12 + x21) / 2

encode the first-order polynomial ``p(theta) = Im(alpha - beta e^{2 i theta})``
that drives the phase dynamics to first order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Algebraic identities (tracelessness, generator extraction) are checked at
# this absolute scale-free tolerance; round trips at the tighter one.
ALGEBRAIC_TOL = 1e-10
ROUNDTRIP_TOL = 1e-12
SL2_DET_TOL = 1e-12

TWO_PI = 2.0 * np.pi

# the reference vector v and its conjugate, for oracle-style checks
V_REF = np.array([1.0, -1.0j]) / np.sqrt(2.0)


def rotation(phi: float) -> np.ndarray:
    """Rotation matrix by angle ``phi``."""
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, -s], [s, c]])


def inv2(T: np.ndarray) -> np.ndarray:
    """Inverse of a 2x2 matrix via the adjugate."""
    det = T[0, 0] * T[1, 1] - T[0, 1] * T[1, 0]
    return np.array([[T[1, 1], -T[0, 1]], [-T[1, 0], T[0, 0]]]) / det


def check_sl2(T: np.ndarray, tol: float = SL2_DET_TOL) -> None:
    det = T[0, 0] * T[1, 1] - T[0, 1] * T[1, 0]
    if abs(det - 1.0) > tol:
        raise ValueError(f"matrix is not in SL(2,R): det = {det!r}")


def check_traceless(X: np.ndarray, tol: float = ALGEBRAIC_TOL) -> None:
    tr = X[0, 0] + X[1, 1]
    scale = max(1.0, float(np.abs(X).max()))
    if abs(tr) > tol * scale:
        raise ValueError(f"matrix is not traceless: trace = {tr!r}")


def phase_action(T: np.ndarray, theta, validate: bool = True):
    """Angle map S_T with ``e_{S_T(theta)} = T e_theta / ||T e_theta||``.

    ``theta`` may be a scalar or an array; the result lies in [0, 2*pi).
    """
    if validate:
        check_sl2(T)
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    x = T[0, 0] * c + T[0, 1] * s
    y = T[1, 0] * c + T[1, 1] * s
    out = np.arctan2(y, x) % TWO_PI
    return float(out) if out.ndim == 0 else out


def phase_action_inverse(T: np.ndarray, theta, validate: bool = True):
    """Inverse angle map; equals the action of T^{-1}."""
    if validate:
        check_sl2(T)
    return phase_action(inv2(T), theta, validate=False)


def expm_traceless(X: np.ndarray) -> np.ndarray:
    """Closed-form exponential of a traceless 2x2 matrix.

    Branches on det(X): rotation-like (det > 0), boost-like (det < 0) and
    the nilpotent limit, with a series fallback near det = 0 so the three
    branches join smoothly.
    """
    d = X[0, 0] * X[1, 1] - X[0, 1] * X[1, 0]
    eye = np.eye(2)
    if d > 1e-12:
        w = np.sqrt(d)
        return np.cos(w) * eye + (np.sin(w) / w) * X
    if d < -1e-12:
        w = np.sqrt(-d)
        if w > 15.0:
            # spectral form keeps the e^{-w} eigenvalue; the cosh/sinh form
            # would cancel it away once e^{-2w} drops below machine precision
            return (np.exp(w) * (X + w * eye) + np.exp(-w) * (w * eye - X)) / (2.0 * w)
        return np.cosh(w) * eye + (np.sinh(w) / w) * X
    # |det| tiny: cos(sqrt(d)) ~ 1 - d/2, sin(w)/w ~ 1 - d/6 (O(d^2) error)
    return (1.0 - d / 2.0) * eye + (1.0 - d / 6.0) * X


@dataclass(frozen=True, eq=False)
class Jet2:
    """Value, first and second Taylor coefficient of a matrix family at 0.

    ``t2`` is the coefficient of lambda^2 (i.e. half the second derivative).
    """

    t0: np.ndarray
    t1: np.ndarray
    t2: np.ndarray

    def __post_init__(self):
        for name in ("t0", "t1", "t2"):
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=float))


def jet_identity() -> Jet2:
    return Jet2(np.eye(2), np.zeros((2, 2)), np.zeros((2, 2)))


def jet_mul(a: Jet2, b: Jet2) -> Jet2:
    """Truncated product: the jet of ``lambda -> A(lambda) B(lambda)``."""
    return Jet2(
        a.t0 @ b.t0,
        a.t1 @ b.t0 + a.t0 @ b.t1,
        a.t2 @ b.t0 + a.t1 @ b.t1 + a.t0 @ b.t2,
    )


def jet_from_generator(sign: float, P: np.ndarray, Q: np.ndarray) -> Jet2:
    """Jet of ``lambda -> sign * exp(lambda P + lambda^2 Q)``."""
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    return Jet2(sign * np.eye(2), sign * P, sign * (Q + P @ P / 2.0))


def _det_mix(A: np.ndarray, B: np.ndarray) -> float:
    # polarization of det: det(A + B) - det(A) - det(B)
    return float(A[0, 0] * B[1, 1] + B[0, 0] * A[1, 1] - A[0, 1] * B[1, 0] - B[0, 1] * A[1, 0])


def det_jet_coefficients(j: Jet2) -> tuple[float, float, float]:
    """Coefficients of lambda^0,1,2 in det(t0 + lambda t1 + lambda^2 t2)."""
    d0 = float(np.linalg.det(j.t0))
    d1 = _det_mix(j.t0, j.t1)
    d2 = _det_mix(j.t0, j.t2) + float(np.linalg.det(j.t1))
    return d0, d1, d2


def check_jet(j: Jet2, det_tol: float = SL2_DET_TOL, coeff_tol: float = ALGEBRAIC_TOL) -> None:
    """Validate that the jet stays in SL(2,R) through order lambda^2."""
    d0, d1, d2 = det_jet_coefficients(j)
    scale = max(1.0, float(np.abs(j.t1).max()) ** 2, float(np.abs(j.t2).max()))
    if abs(d0 - 1.0) > det_tol * max(1.0, float(np.abs(j.t0).max()) ** 2):
        raise ValueError(f"jet value has det {d0!r} != 1")
    if abs(d1) > coeff_tol * scale or abs(d2) > coeff_tol * scale:
        raise ValueError(f"det of jet drifts at order lambda: coeffs ({d1!r}, {d2!r})")


@dataclass(frozen=True)
class PolyCoeff:
    """Coefficients alpha = <v|X|v>, beta = <vbar|X|v> of a traceless X."""

    alpha: complex
    beta: complex


def poly_coeffs(X: np.ndarray, tol: float = ALGEBRAIC_TOL) -> PolyCoeff:
    check_traceless(X, tol)
    alpha = 0.5j * (X[1, 0] - X[0, 1])
    beta = X[0, 0] - 0.5j * (X[0, 1] + X[1, 0])
    return PolyCoeff(complex(alpha), complex(beta))


def p_of_theta(c: PolyCoeff, theta):
    """First-order phase drift ``Im(alpha - beta e^{2 i theta})``; pi-periodic."""
    theta = np.asarray(theta, dtype=float)
    out = np.imag(c.alpha - c.beta * np.exp(2j * theta))
    return float(out) if out.ndim == 0 else out


def dp_dtheta(c: PolyCoeff, theta):
    """Derivative of :func:`p_of_theta` in theta: ``-2 Re(beta e^{2 i theta})``."""
    theta = np.asarray(theta, dtype=float)
    out = -2.0 * np.real(c.beta * np.exp(2j * theta))
    return float(out) if out.ndim == 0 else out


def e2_coefficient(X: np.ndarray) -> complex:
    """Coefficient of e^{2 i theta} in <e_theta|X|e_theta>, i.e. <vbar|X|v>.

    Valid for any real 2x2 matrix: <e|X|e> = Tr(X)/2 + Re(e2 * e^{2 i theta}).
    """
    return complex((X[0, 0] - X[1, 1]) / 2.0 - 0.5j * (X[0, 1] + X[1, 0]))
