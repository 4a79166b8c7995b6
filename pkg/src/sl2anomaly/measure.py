"""Lowest-order invariant densities on the circle and empirical measures.

For a first-degree elliptic anomaly the density is c / E(p).  For a second
degree (diffusive) anomaly it solves the once-integrated stationarity
equation

    1/2 E(p^2) rho' + 1/2 E(p dp) rho - E(q) rho = C,

whose positive 2*pi-periodic solution is, by variation of constants,

    rho(theta) = c e^{kappa} E(p^2)^{-1/2} (C K(theta) + 1),
    kappa = int_0^theta 2 E(q)/E(p^2),
    K     = int_0^theta 2 E(p^2)^{-1/2} e^{-kappa},
    C     = (e^{-kappa(2pi)} - 1) / K(2pi)   (then rescaled by c).

All integrands are analytic and 2*pi-periodic up to the linear drift of
kappa, so cumulative integrals are evaluated spectrally: Fourier series
term-by-term, with the e^{-kappa_bar * theta} weight handled in closed form.
Hyperbolic/parabolic anomalies concentrate on the zeros of E(p) and are
reported as support points, not densities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import phase_histogram
from .classify import AnomalyReport, TypeMismatchError
from .family import STREAM_DENSITY, FamilySpec, rng_stream
from .sl2_core import TWO_PI, inv2, phase_action

GRID_DEFAULT = 2048


@dataclass(frozen=True, eq=False)
class MeanPolys:
    """Trig-polynomial coefficients (const, cos2, sin2, cos4, sin4) of the
    averaged drift data E(p), E(p^2), E(p dp), E(q)."""

    p: np.ndarray
    p2: np.ndarray
    pdp: np.ndarray
    q: np.ndarray


def trig_eval(cf, theta):
    theta = np.asarray(theta, dtype=float)
    return (cf[0] + cf[1] * np.cos(2 * theta) + cf[2] * np.sin(2 * theta)
            + cf[3] * np.cos(4 * theta) + cf[4] * np.sin(4 * theta))


def mean_trig_polys(report: AnomalyReport) -> MeanPolys:
    """Exact averaged coefficients from the per-atom generator data.

    p and q are degree-1 polynomials in e^{2 i theta}, so E(p^2) and
    E(p dp) close at degree 2; grid evaluation of these is exact up to
    rounding.
    """
    Ep = np.zeros(5)
    Ep2 = np.zeros(5)
    Eq = np.zeros(5)
    for a in report.per_atom:
        w = a.weight
        ia, rb, ib = a.alpha_p.imag, a.beta_p.real, a.beta_p.imag
        Ep += w * np.array([ia, -ib, -rb, 0.0, 0.0])
        Ep2 += w * np.array([
            ia * ia + (rb * rb + ib * ib) / 2.0,
            -2.0 * ia * ib,
            -2.0 * ia * rb,
            (ib * ib - rb * rb) / 2.0,
            ib * rb,
        ])
        Eq += w * np.array([a.alpha_q.imag, -a.beta_q.imag, -a.beta_q.real, 0.0, 0.0])
    # E(p dp) = d/dtheta E(p^2) / 2
    Epdp = np.array([0.0, Ep2[2], -Ep2[1], 2.0 * Ep2[4], -2.0 * Ep2[3]])
    return MeanPolys(p=Ep, p2=Ep2, pdp=Epdp, q=Eq)


@dataclass(frozen=True, eq=False)
class DensityProfile:
    theta: np.ndarray
    rho0: np.ndarray
    kappa: np.ndarray
    big_k: np.ndarray
    C: float          # first-integral constant for the *normalized* rho0
    c: float          # normalization constant
    type: str


@dataclass(frozen=True, eq=False)
class SupportPoints:
    """Zeros of E(p) on the double cover with stability of the mean flow."""

    zeros: np.ndarray
    stable: np.ndarray
    type: str


def fourier_cumint(gvals: np.ndarray, damping: float = 0.0) -> np.ndarray:
    """F(theta_j) = int_0^theta_j g_per(t) e^{-damping * t} dt on the grid.

    ``gvals`` samples a smooth 2*pi-periodic function on a uniform grid
    starting at 0.  Each Fourier mode integrates in closed form, so the
    result is exact for resolved spectra.
    """
    n = gvals.shape[0]
    cm = np.fft.fft(gvals) / n
    m = np.fft.fftfreq(n, d=1.0 / n)
    theta = TWO_PI * np.arange(n) / n
    if abs(damping) < 1e-14:
        denom = 1j * m
        denom[0] = 1.0
        coef = cm / denom
        coef[0] = 0.0
        per = np.fft.ifft(coef * n)
        return np.real(cm[0]) * theta + np.real(per - per[0])
    coef = cm / (1j * m - damping)
    per = np.fft.ifft(coef * n)
    return np.real(np.exp(-damping * theta) * per - per[0])


def _cumint_endpoint(gvals: np.ndarray, damping: float) -> float:
    """Value of the same integral at theta = 2*pi."""
    n = gvals.shape[0]
    cm = np.fft.fft(gvals) / n
    if abs(damping) < 1e-14:
        return float(np.real(cm[0]) * TWO_PI)
    m = np.fft.fftfreq(n, d=1.0 / n)
    per0 = np.sum(cm / (1j * m - damping))
    return float(np.real((np.exp(-damping * TWO_PI) - 1.0) * per0))


def spectral_derivative(vals: np.ndarray) -> np.ndarray:
    n = vals.shape[0]
    m = np.fft.fftfreq(n, d=1.0 / n)
    return np.real(np.fft.ifft(1j * m * np.fft.fft(vals)))


def rho0_elliptic(report: AnomalyReport, n: int = GRID_DEFAULT) -> DensityProfile:
    """Density c / E(p), normalized to mean 1 on the grid.

    After the normal form E(p) is the constant eta/2 and the density is
    Lebesgue; in any other frame it is a positive analytic profile.
    """
    if report.type != "elliptic":
        raise TypeMismatchError(f"rho0_elliptic needs an elliptic report, got {report.type!r}")
    polys = mean_trig_polys(report)
    return _rho0_from_mean_p(polys.p, n)


def _rho0_from_mean_p(p_coeffs: np.ndarray, n: int) -> DensityProfile:
    theta = TWO_PI * np.arange(n) / n
    ep = trig_eval(p_coeffs, theta)
    if np.min(np.abs(ep)) <= 1e-12 * max(1.0, np.abs(ep).max()):
        raise TypeMismatchError("E(p) vanishes on the grid; family is not elliptic")
    rho = 1.0 / ep
    c = 1.0 / rho.mean()
    return DensityProfile(theta=theta, rho0=c * rho, kappa=np.zeros(n),
                          big_k=np.zeros(n), C=0.0, c=float(c), type="elliptic")


def rho0_diffusive(report: AnomalyReport, n: int = GRID_DEFAULT) -> DensityProfile:
    """Ground-state density of the drift-diffusion stationarity equation."""
    if report.type != "diffusive":
        raise TypeMismatchError(f"rho0_diffusive needs a diffusive report, got {report.type!r}")
    if not report.strictly_diffusive or report.min_mean_p2 <= 0:
        raise TypeMismatchError(
            f"family is not strictly diffusive: min E(p^2) = {report.min_mean_p2!r}")
    if n < 16:
        raise ValueError("grid too small")
    polys = mean_trig_polys(report)
    theta = TWO_PI * np.arange(n) / n
    p2 = trig_eval(polys.p2, theta)
    kprime = 2.0 * trig_eval(polys.q, theta) / p2
    kbar = float(np.mean(kprime))          # kappa(2 pi) / (2 pi), spectrally accurate
    kappa = fourier_cumint(kprime)
    kappa_end = kbar * TWO_PI
    g_k = 2.0 * p2 ** -0.5 * np.exp(-(kappa - kbar * theta))
    big_k = fourier_cumint(g_k, damping=kbar)
    k_end = _cumint_endpoint(g_k, kbar)
    C_raw = (np.exp(-kappa_end) - 1.0) / k_end
    rho = np.exp(kappa) * p2 ** -0.5 * (C_raw * big_k + 1.0)
    c = 1.0 / rho.mean()
    return DensityProfile(theta=theta, rho0=c * rho, kappa=kappa, big_k=big_k,
                          C=float(c * C_raw), c=float(c), type="diffusive")


def first_integral_residual(profile: DensityProfile, polys: MeanPolys) -> float:
    """Sup-norm defect of 1/2 E(p^2) rho' + 1/2 E(p dp) rho - E(q) rho - C."""
    th = profile.theta
    drho = spectral_derivative(profile.rho0)
    res = (0.5 * trig_eval(polys.p2, th) * drho
           + 0.5 * trig_eval(polys.pdp, th) * profile.rho0
           - trig_eval(polys.q, th) * profile.rho0
           - profile.C)
    return float(np.abs(res).max())


def support_points(report: AnomalyReport) -> SupportPoints:
    """Closed-form zeros of E(p) with stability flags (lambda > 0 flow).

    Four zeros for hyperbolic, two for parabolic, on the double cover; a
    zero is stable when dE(p)/dtheta < 0 there.  The formal lowest-order
    measure is a combination of Dirac peaks on these points; expectation
    values behave as if only the stable ones carried mass.
    """
    if report.type not in ("hyperbolic", "parabolic"):
        raise TypeMismatchError(f"support points need hyperbolic/parabolic, got {report.type!r}")
    cf = mean_trig_polys(report).p
    A, B, Cc = cf[0], cf[1], cf[2]
    R = np.hypot(B, Cc)
    phi = np.arctan2(Cc, B)
    # E(p) = A + R cos(2 theta - phi) = 0
    x = -A / R
    if abs(x) > 1:
        raise TypeMismatchError("E(p) has no zeros; classification inconsistent")
    zeros = []
    if abs(abs(x) - 1.0) <= 1e-12:
        base = np.arccos(np.clip(x, -1, 1))
        zeros = [(phi + base) / 2.0, (phi + base) / 2.0 + np.pi]
    else:
        base = np.arccos(x)
        for b in (base, -base):
            zeros.extend([(phi + b) / 2.0, (phi + b) / 2.0 + np.pi])
    zeros = np.sort(np.mod(zeros, TWO_PI))
    slope = trig_eval(np.array([0.0, cf[2], -cf[1], 0.0, 0.0]) * 2.0, zeros)
    return SupportPoints(zeros=zeros, stable=slope < 0, type=report.type)


@dataclass(frozen=True, eq=False)
class EmpiricalDensity:
    """Normalized histogram on [0, pi): mean of ``density`` is 1."""

    edges: np.ndarray
    density: np.ndarray
    steps: int


def empirical_density(f: FamilySpec, lam: float, seed: int, *, burn_in: int = 10_000,
                      steps: int = 1_000_000, bins: int = 256, chains: int = 1,
                      M: np.ndarray | None = None) -> EmpiricalDensity:
    """Histogram of the simulated phase orbit, folded to projective angles.

    Iterates the exact phase dynamics of the (optionally M-conjugated)
    family at coupling ``lam``; ``steps`` counts the kept steps per chain
    and independent seeded chains are merged in fixed order, so the result
    is deterministic for a fixed seed.
    """
    if steps < 1 or chains < 1 or bins < 2:
        raise ValueError("steps, chains and bins must be positive")
    mats = f.matrices(lam)
    if M is not None:
        Minv = inv2(M)
        mats = np.ascontiguousarray(np.einsum("ij,ajk,kl->ail", M, mats, Minv))
    cum = np.cumsum(f.weights)
    cum[-1] = 1.0
    counts = np.zeros(bins, dtype=np.int64)
    for c in range(chains):
        rng = rng_stream(seed, STREAM_DENSITY, c)
        idx = np.searchsorted(cum, rng.random(burn_in + steps), side="right").astype(np.int64)
        theta0 = rng.random() * TWO_PI
        counts += phase_histogram(mats, idx, theta0, burn_in, bins)
    total = counts.sum()
    density = counts.astype(float) * bins / total
    edges = np.linspace(0.0, np.pi, bins + 1)
    return EmpiricalDensity(edges=edges, density=density, steps=int(total))


def stationarity_residual(report: AnomalyReport, profile: DensityProfile,
                          lam: float, j: int = 1) -> float:
    """|E int f(S_lambda(theta)) rho0 - int f rho0| for f = e^{2 i j theta}.

    Uses the exact phase action of the hat family; for a diffusive profile
    the residual is O(lambda^3), which is the operational stationarity
    content of the once-integrated equation.
    """
    th = profile.theta
    f_of = np.exp(2j * j * th)
    lhs = 0.0 + 0.0j
    Minv = inv2(report.M)
    for atom in report.hat.atoms:
        T = report.M @ atom.matrix(lam) @ Minv
        s_th = phase_action(T, th, validate=False)
        lhs += atom.weight * np.mean(np.exp(2j * j * s_th) * profile.rho0)
    rhs = np.mean(f_of * profile.rho0)
    return float(abs(lhs - rhs))
