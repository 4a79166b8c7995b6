import numpy as np
import pytest

from sl2anomaly.catalog import anderson, dimer, synthetic
from sl2anomaly.classify import (
    ClassificationError,
    TypeMismatchError,
    classify_anomaly,
    detect_order,
    extract_generators,
    is_critical_point,
    normal_form,
)
from sl2anomaly.family import Atom, FamilySpec, hat_family
from sl2anomaly.sl2_core import inv2, rotation

SQRT2 = np.sqrt(2.0)


def conjugated(f, M):
    """Family with every atom polynomial replaced by its M-conjugate."""
    Minv = inv2(M)
    atoms = []
    for a in f.atoms:
        if a.coeffs is not None:
            coeffs = tuple(M @ c @ Minv for c in a.coeffs)
            atoms.append(Atom.from_poly(a.weight, coeffs, label=a.label))
        else:
            atoms.append(Atom.from_generator(a.weight, a.sign, M @ a.P @ Minv,
                                             M @ a.Q @ Minv, label=a.label))
    return FamilySpec(atoms=tuple(atoms), name=f.name,
                      factors_per_atom=f.factors_per_atom)


def random_sl2(rng):
    s = np.exp(rng.normal() * 0.5)
    return rotation(rng.uniform(0, 2 * np.pi)) @ np.diag([s, 1 / s]) @ \
        rotation(rng.uniform(0, 2 * np.pi))


class TestDetectOrder:
    def test_identity_family(self):
        f = synthetic("elliptic")
        assert detect_order(f, 4) == (1, (1.0, 1.0))

    def test_band_center_is_second_order(self):
        f = anderson([(0.7, 0.5), (-0.2, 0.5)])
        k, signs = detect_order(f, 4)
        assert k == 2
        assert signs == (-1.0,) * 4

    def test_sign_blocks(self):
        # squared sign-blocks reduce at the first power with signs sigma
        f = dimer(0.0)
        k, signs = detect_order(f, 4)
        assert k == 1
        assert signs == (1.0, -1.0)

    def test_none_for_generic_family(self):
        gen = Atom.from_poly(1.0, (rotation(0.4),))
        f = FamilySpec(atoms=(gen,))
        assert detect_order(f, 6) is None


class TestExtractGenerators:
    def test_band_center_pair_formulas(self):
        v1, v2, eps = 0.4, -1.1, 0.3
        f = anderson([(v1, 0.5), (v2, 0.5)], eps=eps)
        fh = hat_family(f, 2)
        k, signs = detect_order(f, 2)
        gens = extract_generators(fh, signs, np.eye(2))
        # atom order is (first index slowest); code (a, b) acts as T_b T_a
        for (a, b), (P, Q) in zip([(v1, v1), (v1, v2), (v2, v1), (v2, v2)], gens):
            assert np.abs(P - np.array([[0.0, b], [-a, 0.0]])).max() < 1e-12
            assert np.abs(Q - np.array([[-a * b / 2, -eps], [eps, a * b / 2]])).max() < 1e-12

    def test_generator_round_trip(self):
        P = np.array([[0.3, -0.8], [1.1, -0.3]])
        Q = np.array([[0.0, 0.5], [0.2, 0.0]])
        f = FamilySpec(atoms=(Atom.from_generator(1.0, -1.0, P, Q),))
        k, signs = detect_order(f, 1)
        (Pg, Qg), = extract_generators(f, signs, np.eye(2))
        assert np.abs(Pg - P).max() < 1e-12
        assert np.abs(Qg - Q).max() < 1e-12

    def test_sign_block_generators_match_closed_form(self):
        f = dimer(0.0)
        k, signs = detect_order(f, 1)
        gens = extract_generators(f, signs, np.eye(2))
        for sigma, (P, Q) in zip((1.0, -1.0), gens):
            expect = np.array([[SQRT2 * (sigma - 1), -3.0 + sigma],
                               [3.0 - sigma, -SQRT2 * (sigma - 1)]])
            assert np.abs(P - expect).max() < 1e-12


class TestNormalForm:
    def test_rotation_form_is_fixed(self):
        X = np.array([[0.0, -1.0], [1.0, 0.0]])
        M, eta = normal_form(X, "elliptic")
        assert eta == pytest.approx(2.0, abs=1e-14)
        assert np.abs(M - np.eye(2)).max() < 1e-12

    def test_sign_block_explicit_basis_change(self):
        # det-normalized version of [[sqrt(7), 0], [sqrt(2), 3]] brings the
        # e = 0 mean drift to rotation form with eta = 2 sqrt(7)
        r = classify_anomaly(dimer(0.0))
        assert r.param == pytest.approx(2 * np.sqrt(7.0), rel=1e-12)
        Mp = np.array([[np.sqrt(7.0), 0.0], [SQRT2, 3.0]])
        Mp /= np.sqrt(np.linalg.det(Mp))
        EP = np.array([[-SQRT2, -3.0], [3.0, SQRT2]])
        out = Mp @ EP @ inv2(Mp)
        tgt = np.array([[0.0, -np.sqrt(7.0)], [np.sqrt(7.0), 0.0]])
        assert np.abs(out - tgt).max() < 1e-12

    def test_lower_nilpotent(self):
        X = np.array([[0.0, 0.0], [1.0, 0.0]])
        M, c = normal_form(X, "parabolic")
        out = M @ X @ inv2(X) if False else M @ X @ inv2(M)
        assert c in (1.0, -1.0)
        assert np.abs(out - np.array([[0.0, c], [0.0, 0.0]])).max() < 1e-12
        assert np.linalg.det(M) == pytest.approx(1.0, abs=1e-12)

    def test_type_mismatch_raises(self):
        with pytest.raises(TypeMismatchError):
            normal_form(np.diag([0.5, -0.5]), "elliptic")
        with pytest.raises(TypeMismatchError):
            normal_form(np.array([[0.0, -1.0], [1.0, 0.0]]), "hyperbolic")
        with pytest.raises(TypeMismatchError):
            normal_form(np.diag([0.5, -0.5]), "parabolic")


class TestClassify:
    def test_band_center_noncentered_is_elliptic(self):
        r = classify_anomaly(anderson([(0.0, 0.5), (1.0, 0.5)]))
        assert (r.order, r.degree, r.type) == (2, "first", "elliptic")
        assert r.param == pytest.approx(1.0, rel=1e-12)  # eta = 2 |E(v)|

    def test_band_center_centered_is_diffusive(self):
        r = classify_anomaly(anderson([(1.0, 0.5), (-1.0, 0.5)]))
        assert (r.order, r.degree, r.type) == (2, "second", "diffusive")
        assert r.strictly_diffusive
        # E(p^2) = E(v^2)/2 (1 + cos^2 2 theta) has minimum E(v^2)/2
        assert r.min_mean_p2 == pytest.approx(0.5, abs=1e-12)

    def test_sign_blocks_are_elliptic_with_known_det(self):
        for e in (-0.5, 0.0, 0.25, 0.5):
            r = classify_anomaly(dimer(e))
            assert (r.order, r.degree, r.type) == (2, "first", "elliptic")
            assert r.det_mean_p == pytest.approx(7 - 2 * e - e * e, rel=1e-12)

    def test_synthetic_round_trip(self):
        for kind in ("elliptic", "hyperbolic", "parabolic", "diffusive"):
            r = classify_anomaly(synthetic(kind))
            assert r.type == kind

    def test_normal_form_reached(self):
        for kind, target in [
            ("elliptic", np.array([[0.0, -0.5], [0.5, 0.0]])),
            ("hyperbolic", np.diag([0.5, -0.5])),
            ("parabolic", np.array([[0.0, 1.0], [0.0, 0.0]])),
        ]:
            r = classify_anomaly(synthetic(kind))
            assert np.abs(r.mean_p - target).max() < 1e-9

    def test_degenerate_errors(self):
        with pytest.raises(ClassificationError) as err:
            classify_anomaly(anderson([(0.0, 1.0)]))
        assert err.value.kind == "degenerate"

    def test_not_an_anomaly(self):
        f = FamilySpec(atoms=(Atom.from_poly(1.0, (rotation(0.4),)),))
        with pytest.raises(ClassificationError) as err:
            classify_anomaly(f, kmax=5)
        assert err.value.kind == "not-an-anomaly"

    def test_conjugation_invariance(self):
        rng = np.random.default_rng(11)
        bases = {
            "anderson-e": anderson([(0.0, 0.5), (1.0, 0.5)]),
            "anderson-d": anderson([(1.0, 0.5), (-1.0, 0.5)]),
            "dimer": dimer(0.25),
            "synthetic-h": synthetic("hyperbolic", mu=0.8, c=1.3),
            "synthetic-p": synthetic("parabolic", d=0.6),
        }
        refs = {name: classify_anomaly(f) for name, f in bases.items()}
        for _ in range(10):
            M = random_sl2(rng)
            for name, f in bases.items():
                r = classify_anomaly(conjugated(f, M))
                ref = refs[name]
                assert r.order == ref.order
                assert r.degree == ref.degree
                assert r.type == ref.type
                assert abs(abs(r.param) - abs(ref.param)) < 1e-8

    def test_generators_traceless_and_squared_identity(self):
        for f in (anderson([(1.0, 0.5), (-1.0, 0.5)]), dimer(0.3), synthetic("elliptic")):
            r = classify_anomaly(f)
            for a in r.per_atom:
                assert abs(np.trace(a.P)) < 1e-10
                assert abs(np.trace(a.Q)) < 1e-10
                P2 = a.P @ a.P
                assert np.abs(P2 + np.linalg.det(a.P) * np.eye(2)).max() < 1e-10

    def test_post_normal_form_mean_matches_declaration(self):
        r = classify_anomaly(anderson([(0.0, 0.5), (1.0, 0.5)]))
        mean = sum(a.weight * a.P for a in r.per_atom)
        assert np.abs(mean - np.array([[0.0, -r.param / 2], [r.param / 2, 0.0]])).max() < 1e-9

    def test_det_mean_p_sign_matches_type(self):
        for f, sgn in [(anderson([(0.0, 0.5), (1.0, 0.5)]), 1),
                       (synthetic("hyperbolic"), -1)]:
            r = classify_anomaly(f)
            assert np.sign(r.det_mean_p) == sgn


class TestCriticalPoint:
    def test_sign_block_chain_is_critical(self):
        # raw two-site blocks commute at lambda = 0 (values -1 and an
        # order-four rotation) without being a signed identity family
        atoms = []
        for sigma, w in ((1.0, 0.5), (-1.0, 0.5)):
            a0 = (sigma - 1.0) / SQRT2
            site = [np.array([[a0, -1.0], [1.0, 0.0]]),
                    np.array([[-1.0, 0.0], [0.0, 0.0]])]
            block = [site[0] @ site[0], site[0] @ site[1] + site[1] @ site[0],
                     site[1] @ site[1]]
            atoms.append(Atom.from_poly(w, block, label=f"s={sigma:+g}"))
        f = FamilySpec(atoms=tuple(atoms))
        assert is_critical_point(f)
        assert detect_order(f, 6) is None

    def test_noncommuting_not_critical(self):
        f = synthetic("diffusive")
        # at lambda = 0 all values are the identity: critical trivially
        assert is_critical_point(f)
        # generic rotations with distinct axes are not
        A = Atom.from_poly(0.5, (rotation(0.3),))
        B = Atom.from_poly(0.5, (np.diag([2.0, 0.5]) @ rotation(0.3) @ np.diag([0.5, 2.0]),))
        f2 = FamilySpec(atoms=(A, B))
        assert not is_critical_point(f2)
