"""Anomaly detection and classification for random SL(2,R) families.

Pipeline: find the smallest k whose k-fold products all equal a signed
identity at lambda = 0, strip the signs and read off per-atom traceless
generators (P, Q) from the jets, classify the mean drift E(P) by the sign
of its determinant, and conjugate the family into the matching normal form

    elliptic    E(P) ~ [[0, -eta/2], [eta/2, 0]],  eta > 0
    hyperbolic  E(P) ~ [[mu/2, 0], [0, -mu/2]],    mu > 0
    parabolic   E(P) ~ [[0, c], [0, 0]],           c in {+1, -1}

E(P) = 0 with non-vanishing variance is the diffusive (second degree) case;
no normal form is attempted there.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .family import FamilySpec, hat_family
from .sl2_core import (
    ALGEBRAIC_TOL,
    PolyCoeff,
    check_traceless,
    inv2,
    poly_coeffs,
)

SIGN_TOL = 1e-9
ZERO_TOL = 1e-9  # scale-free threshold for "E(P) vanishes" / "det vanishes"


class ClassificationError(RuntimeError):
    """Family cannot be classified; ``kind`` is 'not-an-anomaly' or 'degenerate'."""

    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


class TypeMismatchError(RuntimeError):
    """An operation was applied to a report of the wrong anomaly type."""


@dataclass(frozen=True, eq=False)
class GeneratorData:
    """Per-atom generators in the normal-form frame plus their coefficients."""

    weight: float
    label: str
    sign: float
    P: np.ndarray
    Q: np.ndarray
    alpha_p: complex
    beta_p: complex
    alpha_q: complex
    beta_q: complex


@dataclass(frozen=True, eq=False)
class AnomalyReport:
    order: int                      # hat power times factors per atom
    degree: str                     # 'first' | 'second'
    type: str                       # 'elliptic' | 'hyperbolic' | 'parabolic' | 'diffusive'
    signs: tuple
    M: np.ndarray                   # basis change, det +-1 (see normal_form)
    param: float                    # eta / mu / nilpotent coefficient c; 0 for diffusive
    nilpotent_sign: float | None    # +-1 for parabolic, else None
    per_atom: tuple                 # GeneratorData in the M frame
    mean_p: np.ndarray              # E(P) in the M frame
    det_mean_p: float
    min_mean_p2: float              # min over theta of E(p^2), 2048-point grid
    strictly_diffusive: bool
    kmax: int
    hat: FamilySpec = field(repr=False, default=None)  # hat-reduced family

    @property
    def mean_beta2(self) -> complex:
        return complex(sum(a.weight * a.beta_p ** 2 for a in self.per_atom))

    @property
    def mean_abs_beta2(self) -> float:
        return float(sum(a.weight * abs(a.beta_p) ** 2 for a in self.per_atom))


def detect_order(f: FamilySpec, kmax: int = 8, tol: float = SIGN_TOL):
    """Smallest k <= kmax with every k-fold product equal to +-identity at 0.

    Returns ``(k, signs)`` or ``None``.
    """
    if kmax < 1:
        raise ValueError("kmax must be >= 1")
    eye = np.eye(2)
    for k in range(1, kmax + 1):
        fh = hat_family(f, k)
        signs = []
        ok = True
        for a in fh.atoms:
            t0 = a.jet().t0
            s = 1.0 if t0[0, 0] + t0[1, 1] >= 0 else -1.0
            if np.abs(t0 - s * eye).max() > tol:
                ok = False
                break
            signs.append(s)
        if ok:
            return k, tuple(signs)
    return None


def extract_generators(fhat: FamilySpec, signs, M: np.ndarray):
    """Per-atom (P, Q) with P = s M t1 M^-1, Q = s M t2 M^-1 - P^2/2.

    Requires the hat-reduced property t0 = s * identity.  Tracelessness of
    the results is a consequence of det T(lambda) = 1 and is verified.
    """
    Minv = inv2(M)
    out = []
    for a, s in zip(fhat.atoms, signs):
        j = a.jet()
        P = s * (M @ j.t1 @ Minv)
        Q = s * (M @ j.t2 @ Minv) - P @ P / 2.0
        try:
            check_traceless(P)
            check_traceless(Q)
        except ValueError as exc:
            raise ClassificationError(
                "not-an-anomaly", f"atom {a.label!r}: generator not traceless ({exc}); "
                "the family drifts out of SL(2,R)") from exc
        out.append((P, Q))
    return out


def _mean_p2_coeffs(weights, coeffs):
    """(const, c2, s2, c4, s4) of E(p^2) from per-atom PolyCoeff of P."""
    out = np.zeros(5)
    for w, c in zip(weights, coeffs):
        ia, rb, ib = c.alpha.imag, c.beta.real, c.beta.imag
        out += w * np.array([
            ia * ia + (rb * rb + ib * ib) / 2.0,
            -2.0 * ia * ib,
            -2.0 * ia * rb,
            (ib * ib - rb * rb) / 2.0,
            ib * rb,
        ])
    return out


def _eval_trig(cf, theta):
    return (cf[0] + cf[1] * np.cos(2 * theta) + cf[2] * np.sin(2 * theta)
            + cf[3] * np.cos(4 * theta) + cf[4] * np.sin(4 * theta))


def _canonical_sign(M: np.ndarray) -> np.ndarray:
    # M and -M define the same conjugation; pick a stable representative
    flat = M.ravel()
    lead = flat[np.nonzero(np.abs(flat) > 1e-14)[0][0]]
    return -M if lead < 0 else M


def normal_form(mean_p: np.ndarray, kind: str):
    """Basis change M and parameter for a nonzero traceless mean drift.

    Returns ``(M, param)`` for elliptic/hyperbolic and ``(M, c)`` for
    parabolic.  det M = 1 except in the elliptic case with clockwise
    rotation, where an orientation flip forces det M = -1 (eta is kept > 0;
    every reported coefficient is invariant under the flip).
    """
    X = np.asarray(mean_p, dtype=float)
    check_traceless(X)
    det = float(np.linalg.det(X))
    if kind == "elliptic":
        if det <= 0:
            raise TypeMismatchError(f"elliptic normal form needs det E(P) > 0, got {det!r}")
        w = np.sqrt(det)
        refl = np.diag([1.0, -1.0])
        flip = X[1, 0] - X[0, 1] < 0
        Y = refl @ X @ refl if flip else X
        # columns (real, -imag) of the eigenvector (b, -a + i w); b < 0 here
        a, b = Y[0, 0], Y[0, 1]
        N = np.array([[b, 0.0], [-a, -w]])
        N /= np.sqrt(np.linalg.det(N))
        M = inv2(N)
        if flip:
            M = M @ refl
        return _canonical_sign(M), 2.0 * w
    if kind == "hyperbolic":
        if det >= 0:
            raise TypeMismatchError(f"hyperbolic normal form needs det E(P) < 0, got {det!r}")
        w = np.sqrt(-det)
        a, b, c = X[0, 0], X[0, 1], X[1, 0]

        def eigvec(ev):
            # rows of (X - ev) give two candidate kernels; take the larger
            u1 = np.array([b, ev - a])
            u2 = np.array([ev + a, c])
            u = u1 if np.linalg.norm(u1) >= np.linalg.norm(u2) else u2
            return u / np.linalg.norm(u)

        vp = eigvec(w)
        vm = eigvec(-w)
        d = vp[0] * vm[1] - vp[1] * vm[0]
        if d < 0:
            vm, d = -vm, -d
        N = np.column_stack([vp, vm]) / np.sqrt(d)
        return _canonical_sign(inv2(N)), 2.0 * w
    if kind == "parabolic":
        scale = float(np.linalg.norm(X))
        if scale == 0.0 or abs(det) > ZERO_TOL * scale ** 2:
            raise TypeMismatchError(f"parabolic normal form needs nilpotent E(P), got det {det!r}")
        e0, e1 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        w0 = e0 if np.linalg.norm(X @ e0) >= np.linalg.norm(X @ e1) else e1
        z = X @ w0
        d0 = z[0] * w0[1] - z[1] * w0[0]
        c = 1.0 if d0 > 0 else -1.0
        s = 1.0 / np.sqrt(abs(d0))
        N = np.column_stack([(s / c) * z, s * w0])
        return _canonical_sign(inv2(N)), c
    raise TypeMismatchError(f"no normal form for type {kind!r}")


def _build_per_atom(fhat, signs, M):
    gens = extract_generators(fhat, signs, M)
    out = []
    for a, s, (P, Q) in zip(fhat.atoms, signs, gens):
        cp = poly_coeffs(P)
        cq = poly_coeffs(Q)
        out.append(GeneratorData(weight=a.weight, label=a.label, sign=s, P=P, Q=Q,
                                 alpha_p=cp.alpha, beta_p=cp.beta,
                                 alpha_q=cq.alpha, beta_q=cq.beta))
    return tuple(out)


def classify_anomaly(f: FamilySpec, kmax: int = 8, grid_n: int = 2048) -> AnomalyReport:
    """Detect, hat-reduce and classify; generators are returned in the
    normal-form frame."""
    found = detect_order(f, kmax)
    if found is None:
        raise ClassificationError(
            "not-an-anomaly", f"no k <= {kmax} makes all k-fold products +-identity")
    k, signs = found
    fhat = hat_family(f, k)
    order = fhat.factors_per_atom

    gens = extract_generators(fhat, signs, np.eye(2))
    weights = fhat.weights
    mean_p = np.einsum("a,aij->ij", weights, np.array([P for P, _ in gens]))
    rms = np.sqrt(float(np.dot(weights, [np.sum(P * P) for P, _ in gens])))
    mean_norm = float(np.linalg.norm(mean_p))
    det_mean = float(np.linalg.det(mean_p))

    if mean_norm <= ZERO_TOL * max(1.0, rms):
        # second degree: purely fluctuating drift
        var = float(np.dot(weights, [np.sum(P * P) for P, _ in gens])) - mean_norm ** 2
        if var <= (ZERO_TOL * max(1.0, rms)) ** 2:
            raise ClassificationError(
                "degenerate", "E(P) and Var(P) both vanish (degree higher-or-degenerate); "
                "rescale the coupling before classifying")
        M = np.eye(2)
        per_atom = _build_per_atom(fhat, signs, M)
        p2 = _mean_p2_coeffs(weights, [PolyCoeff(a.alpha_p, a.beta_p) for a in per_atom])
        theta = np.linspace(0.0, 2 * np.pi, grid_n, endpoint=False)
        min_p2 = float(_eval_trig(p2, theta).min())
        return AnomalyReport(order=order, degree="second", type="diffusive", signs=signs,
                             M=M, param=0.0, nilpotent_sign=None, per_atom=per_atom,
                             mean_p=mean_p, det_mean_p=det_mean, min_mean_p2=min_p2,
                             strictly_diffusive=bool(min_p2 > ZERO_TOL * max(1.0, rms) ** 2),
                             kmax=kmax, hat=fhat)

    if abs(det_mean) <= ZERO_TOL * mean_norm ** 2:
        kind = "parabolic"
    elif det_mean > 0:
        kind = "elliptic"
    else:
        kind = "hyperbolic"
    M, param = normal_form(mean_p, kind)
    # parabolic param is the achieved nilpotent coefficient c = +-1, the only
    # conjugation invariant of the orbit (any Frobenius scale is absorbed by M)
    nil_sign = float(param) if kind == "parabolic" else None
    per_atom = _build_per_atom(fhat, signs, M)
    mean_p_nf = M @ mean_p @ inv2(M)
    p2 = _mean_p2_coeffs(weights, [PolyCoeff(a.alpha_p, a.beta_p) for a in per_atom])
    theta = np.linspace(0.0, 2 * np.pi, grid_n, endpoint=False)
    min_p2 = float(_eval_trig(p2, theta).min())
    return AnomalyReport(order=order, degree="first", type=kind, signs=signs,
                         M=M, param=float(param), nilpotent_sign=nil_sign,
                         per_atom=per_atom, mean_p=mean_p_nf, det_mean_p=det_mean,
                         min_mean_p2=min_p2, strictly_diffusive=bool(min_p2 > 0),
                         kmax=kmax, hat=fhat)


def is_critical_point(f: FamilySpec, tol: float = ALGEBRAIC_TOL) -> bool:
    """Diagnostic: all T(0) commute and are elliptic-or-signed-identity.

    True when every pair of lambda=0 values commutes and each has |trace| < 2
    or equals +-identity.  No further analysis of non-anomalous critical
    points is provided.
    """
    t0s = [a.jet().t0 for a in f.atoms]
    eye = np.eye(2)
    for t in t0s:
        tr = abs(t[0, 0] + t[1, 1])
        if tr >= 2.0 and not (np.abs(t - eye).max() <= tol or np.abs(t + eye).max() <= tol):
            return False
    for a, b in itertools.combinations(t0s, 2):
        if np.abs(a @ b - b @ a).max() > tol:
            return False
    return True
