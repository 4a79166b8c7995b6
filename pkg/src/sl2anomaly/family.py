"""Finitely supported random SL(2,R) families and their k-fold products.

A family is a finite list of weighted atoms.  Each atom knows two things:
its exact matrix T(lambda) (used by the Monte-Carlo estimators) and its
second-order jet at lambda = 0 (used by all perturbative algebra).  Atoms
come in three shapes:

* polynomial   -- T(lambda) = sum_d lambda^d C_d with det identically 1,
* generator    -- T(lambda) = sign * exp(lambda P + lambda^2 Q),
* product      -- an ordered product of other atoms (built by hat_family).

``factors_per_atom`` counts how many elementary transfer-matrix factors of
the underlying model one atom stands for; ``hat_family`` multiplies it.
Per-factor normalization of Lyapunov data divides by it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .sl2_core import Jet2, check_jet, expm_traceless, jet_from_generator, jet_mul

WEIGHT_TOL = 1e-12

# Philox stream namespaces; key = [seed, (purpose << 48) | index].
STREAM_CODE = 0
STREAM_MC = 1
STREAM_OSC = 2
STREAM_DENSITY = 3


def rng_stream(seed: int, purpose: int, index: int = 0) -> np.random.Generator:
    """Counter-based keyed generator: one independent stream per (seed, purpose, index)."""
    key = np.array([np.uint64(seed), np.uint64((purpose << 48) | index)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


class FamilyValidationError(ValueError):
    """Raised when atoms or weights violate the family invariants."""


@dataclass(frozen=True, eq=False)
class Atom:
    """One weighted matrix family ``lambda -> T(lambda)``."""

    weight: float
    label: str = ""
    coeffs: tuple = None          # polynomial: tuple of (2,2) arrays
    sign: float = None            # generator: sign in {+1, -1}
    P: np.ndarray = None
    Q: np.ndarray = None
    parts: tuple = None           # product: atoms applied right-to-left

    @classmethod
    def from_poly(cls, weight, coeffs, label=""):
        coeffs = tuple(np.array(c, dtype=float) for c in coeffs)
        return cls(weight=float(weight), label=label, coeffs=coeffs)

    @classmethod
    def from_jet(cls, weight, jet: Jet2, label=""):
        return cls.from_poly(weight, (jet.t0, jet.t1, jet.t2), label=label)

    @classmethod
    def from_generator(cls, weight, sign, P, Q=None, label=""):
        P = np.array(P, dtype=float)
        Q = np.zeros((2, 2)) if Q is None else np.array(Q, dtype=float)
        if float(sign) not in (1.0, -1.0):
            raise FamilyValidationError("generator sign must be +1 or -1")
        return cls(weight=float(weight), label=label, sign=float(sign), P=P, Q=Q)

    @classmethod
    def product(cls, weight, parts, label=""):
        return cls(weight=float(weight), label=label, parts=tuple(parts))

    def jet(self) -> Jet2:
        if self.coeffs is not None:
            pad = [np.zeros((2, 2))] * max(0, 3 - len(self.coeffs))
            c = list(self.coeffs) + pad
            return Jet2(c[0], c[1], c[2])
        if self.parts is not None:
            out = self.parts[0].jet()
            for a in self.parts[1:]:
                out = jet_mul(a.jet(), out)
            return out
        return jet_from_generator(self.sign, self.P, self.Q)

    def matrix(self, lam: float) -> np.ndarray:
        """Exact T(lambda), renormalized to det 1."""
        if self.coeffs is not None:
            T = np.zeros((2, 2))
            for d, c in enumerate(self.coeffs):
                T = T + lam ** d * c
        elif self.parts is not None:
            T = self.parts[0].matrix(lam)
            for a in self.parts[1:]:
                T = a.matrix(lam) @ T
        else:
            T = self.sign * expm_traceless(lam * self.P + lam * lam * self.Q)
        det = T[0, 0] * T[1, 1] - T[0, 1] * T[1, 0]
        if det <= 0:
            raise FamilyValidationError(
                f"atom {self.label!r}: det T({lam}) = {det!r} <= 0; lambda too large for this family")
        return T / np.sqrt(det)


@dataclass(frozen=True, eq=False)
class FamilySpec:
    """Immutable weighted family of matrix jets; expectation = weighted sum."""

    atoms: tuple
    name: str = ""
    factors_per_atom: int = 1
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        if self.validate:
            if not self.atoms:
                raise FamilyValidationError("family needs at least one atom")
            w = self.weights
            if np.any(w <= 0):
                raise FamilyValidationError("atom weights must be positive")
            if abs(w.sum() - 1.0) > WEIGHT_TOL:
                raise FamilyValidationError(f"weights sum to {w.sum()!r}, not 1")
            for a in self.atoms:
                try:
                    check_jet(a.jet())
                except ValueError as exc:
                    raise FamilyValidationError(f"atom {a.label!r}: {exc}") from exc

    @property
    def weights(self) -> np.ndarray:
        return np.array([a.weight for a in self.atoms])

    def jets(self) -> list:
        return [a.jet() for a in self.atoms]

    def matrices(self, lam: float) -> np.ndarray:
        """Stacked exact atom matrices at coupling ``lam``, shape (n, 2, 2)."""
        return np.ascontiguousarray([a.matrix(lam) for a in self.atoms])

    def expect(self, g) -> np.ndarray:
        """Weighted mean of ``g(atom)`` over the atoms (g returns a matrix)."""
        out = np.zeros((2, 2))
        for a in self.atoms:
            out = out + a.weight * np.asarray(g(a), dtype=float)
        return out


def hat_family(f: FamilySpec, k: int, size_guard: int = 10 ** 6) -> FamilySpec:
    """Family of all ordered k-fold products T_{sigma(k)} ... T_{sigma(1)}.

    Atom (a_1, ..., a_k) carries weight prod(w_i) and the product matrix with
    a_k leftmost.  Enumeration is lexicographic in the code, last index
    fastest, which makes hat_family(hat_family(f, j), k) coincide atom-for-atom
    with hat_family(f, j*k).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(f.atoms) ** k > size_guard:
        raise ValueError(f"hat family would have {len(f.atoms) ** k} atoms (guard {size_guard})")
    if k == 1:
        return f
    atoms = []
    for code in itertools.product(f.atoms, repeat=k):
        w = float(np.prod([a.weight for a in code]))
        label = "(" + ",".join(a.label for a in code) + ")"
        atoms.append(Atom.product(w, code, label=label))
    return FamilySpec(atoms=tuple(atoms), name=f"{f.name}^{k}" if f.name else "",
                      factors_per_atom=f.factors_per_atom * k, validate=False)


def sample_code(f: FamilySpec, seed: int, n: int) -> np.ndarray:
    """Deterministic i.i.d. atom indices under the family weights."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return np.empty(0, dtype=np.int64)
    cum = np.cumsum(f.weights)
    cum[-1] = 1.0
    u = rng_stream(seed, STREAM_CODE).random(n)
    return np.searchsorted(cum, u, side="right").astype(np.int64)
