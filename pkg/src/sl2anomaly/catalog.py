"""Built-in families: two lattice models and synthetic one-parameter
families realizing each anomaly type.

All atoms are exact in lambda: lattice entries are polynomials with det
identically 1, synthetic atoms are closed-form exponentials of traceless
generators.
"""

from __future__ import annotations

import numpy as np

from .family import Atom, FamilySpec

SQRT2 = np.sqrt(2.0)


def anderson(values, eps: float = 0.0) -> FamilySpec:
    """Band-center hopping family T = [[lam*v - eps*lam^2, -1], [1, 0]].

    ``values`` lists (v, weight) pairs for the site potential; the energy
    window scales as eps * lambda^2 so the whole family sits at the
    degenerate point where plain second-order perturbation theory fails.
    Squares of these matrices are -identity at lambda = 0.
    """
    values = list(values)
    if not values:
        raise ValueError("need at least one potential value")
    atoms = []
    for v, w in values:
        coeffs = (
            np.array([[0.0, -1.0], [1.0, 0.0]]),
            np.array([[float(v), 0.0], [0.0, 0.0]]),
            np.array([[-float(eps), 0.0], [0.0, 0.0]]),
        )
        atoms.append(Atom.from_poly(w, coeffs, label=f"v={v:g}"))
    return FamilySpec(atoms=tuple(atoms), name=f"anderson(eps={eps:g})")


def _poly_mul(a, b):
    out = [np.zeros((2, 2)) for _ in range(len(a) + len(b) - 1)]
    for i, ca in enumerate(a):
        for j, cb in enumerate(b):
            out[i + j] = out[i + j] + ca @ cb
    return out


def dimer(e: float) -> FamilySpec:
    """Two-value dimer chain at its resonant energy, reduced to sign-blocks.

    The chain carries the potential sigma/sqrt(2), sigma = +-1 with mean
    ``e``, constant on pairs of sites, at energy 1/sqrt(2) + lambda.  One
    dimer block is the square of the site matrix; at lambda = 0 the two
    block values generate a finite rotation group, so the unit that reduces
    to a signed identity is the *pair of equal-sign blocks*,

        (T_{lambda,sigma})^2 = sigma * (1 + O(lambda)).

    Atoms are these squared blocks (exact quartic polynomials in lambda)
    with weights (1 +- e)/2, and each atom counts as two block factors, so
    reported orders and per-factor coefficients refer to single blocks.
    """
    if abs(e) > 1.0:
        raise ValueError("e must lie in [-1, 1]")
    atoms = []
    for sigma, w in ((1.0, (1.0 + e) / 2.0), ((-1.0), (1.0 - e) / 2.0)):
        if w == 0.0:
            continue
        a0 = (sigma - 1.0) / SQRT2
        site = [np.array([[a0, -1.0], [1.0, 0.0]]), np.array([[-1.0, 0.0], [0.0, 0.0]])]
        block = _poly_mul(site, site)
        squared = _poly_mul(block, block)
        atoms.append(Atom.from_poly(w, squared, label=f"({sigma:+g},{sigma:+g})"))
    return FamilySpec(atoms=tuple(atoms), name=f"dimer(e={e:g})", factors_per_atom=2)


def synthetic(kind: str, **params) -> FamilySpec:
    """Generator-form families T = exp(lambda P_sigma) exercising one normal
    form each.

    elliptic(eta, d)    P = [[s d, -eta/2], [eta/2, -s d]], fair s = +-1
    hyperbolic(mu, c)   P = [[mu/2, s c], [s c, -mu/2]]
    parabolic(d)        P = [[0, 1], [s d, 0]]
    diffusive()         P = [[s1, -s2], [s2, -s1]], independent fair signs
    """
    def positive(name, default):
        val = float(params.pop(name, default))
        if val <= 0:
            raise ValueError(f"{name} must be > 0")
        return val

    atoms = []
    if kind == "elliptic":
        eta = positive("eta", 1.0)
        d = positive("d", 1.0)
        for s in (1.0, -1.0):
            P = np.array([[s * d, -eta / 2.0], [eta / 2.0, -s * d]])
            atoms.append(Atom.from_generator(0.5, 1.0, P, label=f"s={s:+g}"))
    elif kind == "hyperbolic":
        mu = positive("mu", 1.0)
        c = positive("c", 1.0)
        for s in (1.0, -1.0):
            P = np.array([[mu / 2.0, s * c], [s * c, -mu / 2.0]])
            atoms.append(Atom.from_generator(0.5, 1.0, P, label=f"s={s:+g}"))
    elif kind == "parabolic":
        d = positive("d", 1.0)
        for s in (1.0, -1.0):
            P = np.array([[0.0, 1.0], [s * d, 0.0]])
            atoms.append(Atom.from_generator(0.5, 1.0, P, label=f"s={s:+g}"))
    elif kind == "diffusive":
        for s1 in (1.0, -1.0):
            for s2 in (1.0, -1.0):
                P = np.array([[s1, -s2], [s2, -s1]])
                atoms.append(Atom.from_generator(0.25, 1.0, P, label=f"s=({s1:+g},{s2:+g})"))
    else:
        raise ValueError(f"unknown synthetic kind {kind!r}")
    if params:
        raise ValueError(f"unexpected parameters for {kind!r}: {sorted(params)}")
    return FamilySpec(atoms=tuple(atoms), name=f"synthetic.{kind}")


CATALOG = {
    "anderson": {
        "build": lambda params: anderson(**params),
        "params": "values: list of [v, weight]; eps: float (default 0)",
        "about": "band-center hopping chain; diffusive when the potential is centered",
    },
    "dimer": {
        "build": lambda params: dimer(**params),
        "params": "e: mean of the +-1 sign in [-1, 1]",
        "about": "resonant two-value dimer chain, squared sign-blocks",
    },
    "synthetic": {
        "build": lambda params: synthetic(**params),
        "params": "kind: elliptic|hyperbolic|parabolic|diffusive; eta, d, mu, c as applicable",
        "about": "exponential families pinned to one normal form each",
    },
}


def build(name: str, params: dict) -> FamilySpec:
    if name not in CATALOG:
        raise ValueError(f"unknown catalog family {name!r}; have {sorted(CATALOG)}")
    return CATALOG[name]["build"](dict(params))
