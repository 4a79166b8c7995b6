"""Monte-Carlo Lyapunov estimation, oscillatory-sum diagnostics and the
perturbative coefficients for each anomaly type.

The estimator iterates a unit vector through the exact random matrices,
renormalizing periodically and accumulating the log norm (Kahan-compensated).
Error bars come from independent chains driven by separate counter-based
streams, so results are bit-identical for a fixed seed regardless of the
worker count.

Reported values are normalized per matrix factor of the *underlying* model:
the accumulated log is divided by steps times ``factors_per_atom`` of the
family that was simulated.  The raw per-step value is kept alongside.

Lowest-order coefficients:

* elliptic   gamma = 1/2 lambda^2 E|beta|^2
* hyperbolic gamma = 1/2 |lambda mu| (+ O(lambda^{3/2}))
* diffusive  gamma = lambda^2/2 Re int rho0 [E|beta|^2
             + E<vbar|(P^T P + 2Q)|v> e^{2 i theta} - E(beta^2) e^{4 i theta}]
* parabolic  only the O(lambda^{3/2}) bound; checked by a log-log slope fit.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._kernels import phase_orbit_sums, product_log_norm
from .classify import AnomalyReport, TypeMismatchError
from .family import STREAM_MC, STREAM_OSC, FamilySpec, rng_stream
from .measure import DensityProfile
from .sl2_core import TWO_PI, e2_coefficient, inv2

# a quadratic coefficient may never be negative; tolerate rounding only
COEFF_FLOOR = -1e-12


@dataclass(frozen=True, eq=False)
class LyapEstimate:
    lam: float
    gamma: float                 # nats per matrix factor of the underlying model
    stderr: float
    chains: int
    steps_per_chain: int
    seed: int
    factors_per_step: int        # divisor applied to the per-step value
    gamma_raw: float             # nats per simulated family step
    stderr_raw: float
    renorm_every: int
    chain_gammas: tuple          # raw per-chain values, diagnostic


@dataclass(frozen=True)
class PerturbativeCoeff:
    order: str                   # 'linear' | 'quadratic' | 'three-halves-bound'
    value: float
    per_original_factor: bool = True
    nondegenerate: bool | None = None


@dataclass(frozen=True, eq=False)
class SweepResult:
    estimates: tuple
    fitted_exponent: float
    fitted_coefficient: float
    declared_order: float | None


@dataclass(frozen=True, eq=False)
class ScalingFit:
    slope: float
    lambdas: tuple
    gammas: tuple
    dropped: tuple               # lambdas whose estimate was not positive
    estimates: tuple


def _effective_renorm(mats: np.ndarray, renorm_every: int) -> int:
    # keep the running norm far from overflow: per-step growth is bounded by
    # the largest Frobenius norm
    maxlog = max(math.log(max(float(np.linalg.norm(m)), 1.0 + 1e-12)) for m in mats)
    eff = max(1, int(renorm_every))
    while eff > 1 and eff * maxlog > 600.0:
        eff //= 2
    return eff


def mc_gamma(f: FamilySpec, lam: float, seed: int, *, chains: int = 8,
             steps: int = 1_000_000, renorm_every: int = 32,
             threads: int = 1, stream_offset: int = 0) -> LyapEstimate:
    """Monte-Carlo top Lyapunov exponent of the family at coupling ``lam``.

    Each chain starts from a uniform angle, uses its own keyed stream, and
    contributes one i.i.d. estimate; ``gamma`` is their mean divided by the
    family's factors-per-atom, ``stderr`` the sample deviation over sqrt(chains).
    """
    if steps < 1 or chains < 1:
        raise ValueError("chains and steps must be positive")
    mats = f.matrices(lam)
    eff = _effective_renorm(mats, renorm_every)
    cum = np.cumsum(f.weights)
    cum[-1] = 1.0

    def run_chain(c: int) -> float:
        rng = rng_stream(seed, STREAM_MC, stream_offset + c)
        theta0 = rng.random() * TWO_PI
        idx = np.searchsorted(cum, rng.random(steps), side="right").astype(np.int64)
        return product_log_norm(mats, idx, eff, theta0) / steps

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vals = list(pool.map(run_chain, range(chains)))
    else:
        vals = [run_chain(c) for c in range(chains)]
    vals = np.array(vals)
    raw = float(vals.mean())
    raw_se = float(vals.std(ddof=1) / np.sqrt(chains)) if chains > 1 else 0.0
    k = f.factors_per_atom
    return LyapEstimate(lam=lam, gamma=raw / k, stderr=raw_se / k, chains=chains,
                        steps_per_chain=steps, seed=seed, factors_per_step=k,
                        gamma_raw=raw, stderr_raw=raw_se, renorm_every=eff,
                        chain_gammas=tuple(float(v) for v in vals))


@dataclass(frozen=True)
class OscSums:
    i1: complex
    i2: complex
    steps: int


def osc_sums(f: FamilySpec, lam: float, seed: int, *, steps: int = 1_000_000,
             M: np.ndarray | None = None, burn_in: int = 0) -> OscSums:
    """Birkhoff averages of e^{2 i theta_n}, e^{4 i theta_n} along the phase
    orbit in the (optionally conjugated) frame.

    Meaningful when steps * lam^2 >> 1; a warning is issued otherwise.
    """
    if steps < 1:
        raise ValueError("steps must be positive")
    if steps * lam * lam < 10.0:
        warnings.warn("osc_sums: steps * lambda^2 is small; averages are transient-dominated",
                      stacklevel=2)
    mats = f.matrices(lam)
    if M is not None:
        Minv = inv2(M)
        mats = np.ascontiguousarray(np.einsum("ij,ajk,kl->ail", M, mats, Minv))
    rng = rng_stream(seed, STREAM_OSC)
    cum = np.cumsum(f.weights)
    cum[-1] = 1.0
    idx = np.searchsorted(cum, rng.random(burn_in + steps), side="right").astype(np.int64)
    theta0 = rng.random() * TWO_PI
    r1, i1, r2, i2, cnt = phase_orbit_sums(mats, idx, theta0, burn_in)
    return OscSums(i1=complex(r1, i1) / cnt, i2=complex(r2, i2) / cnt, steps=cnt)


def _mean_coefficients(report: AnomalyReport):
    """E(beta), E|beta|^2, E(beta^2) and E<vbar|(P^T P + 2Q)|v> over atoms."""
    eb = 0.0j
    eb2 = 0.0
    ebsq = 0.0j
    emid = 0.0j
    for a in report.per_atom:
        eb += a.weight * a.beta_p
        eb2 += a.weight * abs(a.beta_p) ** 2
        ebsq += a.weight * a.beta_p ** 2
        emid += a.weight * e2_coefficient(a.P.T @ a.P + 2.0 * a.Q)
    return eb, eb2, ebsq, emid


def gamma_from_Ij(report: AnomalyReport, i1: complex, i2: complex, lam: float) -> float:
    """Second-order Lyapunov value from the oscillatory averages.

    gamma(lam) = 1/2 Re[2 lam E(beta) I1 + lam^2 (E|beta|^2
                 + E<vbar|(P^T P + 2Q)|v> I1 - E(beta^2) I2)],
    divided by the anomaly order for per-factor normalization.
    """
    eb, eb2, ebsq, emid = _mean_coefficients(report)
    val = 0.5 * np.real(2.0 * lam * eb * i1 + lam * lam * (eb2 + emid * i1 - ebsq * i2))
    return float(val) / report.order


def _check_floor(value: float, what: str) -> float:
    if value < COEFF_FLOOR:
        raise RuntimeError(f"{what} came out negative ({value!r}); "
                           "this contradicts the positivity of the Lyapunov exponent")
    return value


def coeff_elliptic(report: AnomalyReport) -> PerturbativeCoeff:
    """Quadratic coefficient 1/2 E|beta|^2 per factor (normal-form frame)."""
    if report.type != "elliptic":
        raise TypeMismatchError(f"coeff_elliptic needs an elliptic report, got {report.type!r}")
    val = 0.5 * report.mean_abs_beta2 / report.order
    return PerturbativeCoeff(order="quadratic", value=_check_floor(val, "elliptic coefficient"))


def coeff_hyperbolic(report: AnomalyReport) -> PerturbativeCoeff:
    """Linear coefficient mu/2 per factor.

    The hypothesis behind the linear law needs the centered perturbation
    r(theta) = Im(alpha - (beta - mu/2) e^{2 i theta}) to be nonzero at
    theta = pi/2 for almost every atom; the check result is reported and a
    violation only warns.
    """
    if report.type != "hyperbolic":
        raise TypeMismatchError(f"coeff_hyperbolic needs a hyperbolic report, got {report.type!r}")
    scale = max(1.0, max(abs(a.beta_p) for a in report.per_atom))
    nondeg = all(abs(a.alpha_p.imag + a.beta_p.imag) > 1e-9 * scale for a in report.per_atom)
    if not nondeg:
        warnings.warn("hyperbolic nondegeneracy check failed: some r(pi/2) vanish; "
                      "the linear law may acquire larger corrections", stacklevel=2)
    return PerturbativeCoeff(order="linear", value=0.5 * report.param / report.order,
                             nondegenerate=nondeg)


def coeff_second_degree(report: AnomalyReport, profile: DensityProfile) -> PerturbativeCoeff:
    """Quadratic coefficient of the diffusive law, integrated against rho0."""
    if report.type != "diffusive":
        raise TypeMismatchError(f"coeff_second_degree needs a diffusive report, got {report.type!r}")
    if profile is None or profile.type != "diffusive":
        raise TypeMismatchError("coeff_second_degree needs the diffusive density profile")
    _, eb2, ebsq, emid = _mean_coefficients(report)
    th = profile.theta
    integrand = np.real(eb2 + emid * np.exp(2j * th) - ebsq * np.exp(4j * th))
    val = 0.5 * float(np.mean(profile.rho0 * integrand)) / report.order
    return PerturbativeCoeff(order="quadratic", value=_check_floor(val, "diffusive coefficient"))


def perturbative_coefficient(report: AnomalyReport,
                             profile: DensityProfile | None = None) -> PerturbativeCoeff:
    """Dispatch on the anomaly type; parabolic reports only the exponent bound."""
    if report.type == "elliptic":
        return coeff_elliptic(report)
    if report.type == "hyperbolic":
        return coeff_hyperbolic(report)
    if report.type == "diffusive":
        return coeff_second_degree(report, profile)
    return PerturbativeCoeff(order="three-halves-bound", value=math.nan)


def sweep(f: FamilySpec, ladder, seed: int, *, chains: int = 8, steps: int = 1_000_000,
          renorm_every: int = 32, threads: int = 1,
          declared_order: float | None = None) -> SweepResult:
    """Estimates along a strictly decreasing lambda ladder plus power-law fits.

    The exponent comes from a free log-log least-squares fit; the coefficient
    is fitted at ``declared_order`` when given (least squares of gamma against
    lambda^order), otherwise at the free exponent.
    """
    lams = [float(x) for x in ladder]
    if any(b >= a for a, b in zip(lams, lams[1:])) or not lams:
        raise ValueError("ladder must be strictly decreasing")
    ests = []
    for i, lam in enumerate(lams):
        ests.append(mc_gamma(f, lam, seed, chains=chains, steps=steps,
                             renorm_every=renorm_every, threads=threads,
                             stream_offset=(i + 1) << 24))
    gs = np.array([e.gamma for e in ests])
    if np.any(gs <= 0):
        raise RuntimeError("non-positive estimate in sweep; use parabolic_scaling_check "
                           "for noisy ladders")
    slope, intercept = np.polyfit(np.log(lams), np.log(gs), 1)
    if declared_order is None:
        coef = float(np.exp(intercept))
    else:
        x = np.array(lams) ** declared_order
        coef = float(np.dot(x, gs) / np.dot(x, x))
    return SweepResult(estimates=tuple(ests), fitted_exponent=float(slope),
                       fitted_coefficient=coef, declared_order=declared_order)


def parabolic_scaling_check(f: FamilySpec, ladder, seed: int, *, chains: int = 8,
                            steps: int = 1_000_000, renorm_every: int = 32,
                            threads: int = 1) -> ScalingFit:
    """Log-log slope of the Monte-Carlo exponent over the ladder.

    Non-positive estimates are dropped (and reported); the slope of the
    remaining points is the scaling exponent.  A parabolic family should
    give a slope well above 1, consistent with the lambda^{3/2} bound.
    """
    lams = [float(x) for x in ladder]
    ests = []
    for i, lam in enumerate(lams):
        ests.append(mc_gamma(f, lam, seed, chains=chains, steps=steps,
                             renorm_every=renorm_every, threads=threads,
                             stream_offset=(i + 1) << 24))
    used_l, used_g, dropped = [], [], []
    for lam, e in zip(lams, ests):
        if e.gamma > 0:
            used_l.append(lam)
            used_g.append(e.gamma)
        else:
            dropped.append(lam)
    if len(used_l) < 2:
        raise RuntimeError("not enough positive estimates to fit a slope")
    slope = float(np.polyfit(np.log(used_l), np.log(used_g), 1)[0])
    return ScalingFit(slope=slope, lambdas=tuple(used_l), gammas=tuple(used_g),
                      dropped=tuple(dropped), estimates=tuple(ests))
