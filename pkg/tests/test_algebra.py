import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stratheat.algebra import (
    StratifiedAlgebra,
    StructuralError,
    abelian,
    algebra_from_brackets,
    algebra_from_spec,
    bch_product,
    bracket,
    dilate,
    filiform,
    h_type_check,
    heisenberg_weyl,
    homogeneous_norm,
    identity_element,
    load_group,
    validate_algebra,
)

H1 = heisenberg_weyl(1)
F3 = filiform(3)


def cvec(*vals):
    return np.array(vals, dtype=complex)


def coeff_vectors(n, max_mag=2.0):
    scalar = st.floats(-max_mag, max_mag, allow_nan=False, allow_infinity=False)
    return st.lists(st.tuples(scalar, scalar), min_size=n, max_size=n).map(
        lambda pairs: np.array([complex(a, b) for a, b in pairs])
    )


class TestConstruction:
    def test_heisenberg_homogeneous_dimension(self):
        assert H1.D == 4
        for n in range(1, 5):
            assert heisenberg_weyl(n).D == 2 * n + 2

    def test_layer_bookkeeping(self):
        assert H1.N == 3 and H1.m == 2 and H1.d1 == 2
        assert list(H1.weights) == [1, 1, 2]
        assert F3.layers == (2, 1, 1)

    def test_builtins_validate(self):
        for alg in (H1, heisenberg_weyl(2), abelian(1), abelian(3), F3, filiform(4)):
            assert validate_algebra(alg) == []

    def test_bad_parameters(self):
        with pytest.raises(StructuralError):
            heisenberg_weyl(0)
        with pytest.raises(StructuralError):
            abelian(0)

    def test_out_of_range_bracket_entry(self):
        with pytest.raises(StructuralError):
            algebra_from_brackets("bad", (2, 1), {(0, 5): {2: 1.0}})


class TestBracket:
    def test_heisenberg_bracket(self):
        assert np.allclose(bracket(H1, cvec(1, 0, 0), cvec(0, 1, 0)), cvec(0, 0, 1))

    def test_antisymmetry_on_self(self):
        u = cvec(1.3, -0.2 + 1j, 0.7)
        assert np.allclose(bracket(H1, u, u), 0)

    def test_center_annihilates(self):
        assert np.allclose(bracket(H1, cvec(0, 0, 1), cvec(1, 0, 0)), 0)

    def test_grading_of_basis_brackets(self):
        for alg in (H1, F3):
            basis = np.eye(alg.N, dtype=complex)
            for i in range(alg.N):
                for j in range(alg.N):
                    out = bracket(alg, basis[i], basis[j])
                    target = alg.layer_of(i) + alg.layer_of(j)
                    for k in np.nonzero(np.abs(out) > 0)[0]:
                        assert alg.layer_of(int(k)) == target


class TestGroupLaw:
    def test_heisenberg_product(self):
        out = bch_product(H1, cvec(1, 0, 0), cvec(0, 1, 0))
        assert np.allclose(out, cvec(1, 1, 0.5))

    def test_identity_and_inverse(self):
        x = cvec(0.3 + 0.1j, -1.2, 0.4j)
        e = identity_element(H1)
        assert np.allclose(bch_product(H1, x, e), x)
        assert np.allclose(bch_product(H1, x, -x), 0)

    def test_inverse_step3(self):
        x = np.array([0.5, -0.2 + 0.3j, 1.1, 0.2j])
        assert np.max(np.abs(bch_product(F3, x, -x))) < 1e-14

    def test_dynkin_matches_hand_formula_order3(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            x = rng.normal(size=4) + 1j * rng.normal(size=4)
            y = rng.normal(size=4) + 1j * rng.normal(size=4)
            hand = (
                x + y + 0.5 * bracket(F3, x, y)
                + (1.0 / 12.0) * bracket(F3, x, bracket(F3, x, y))
                + (1.0 / 12.0) * bracket(F3, y, bracket(F3, y, x))
            )
            assert np.max(np.abs(bch_product(F3, x, y) - hand)) < 1e-14

    @settings(max_examples=100, deadline=None)
    @given(coeff_vectors(3), coeff_vectors(3), coeff_vectors(3))
    def test_associativity_heisenberg(self, x, y, z):
        lhs = bch_product(H1, bch_product(H1, x, y), z)
        rhs = bch_product(H1, x, bch_product(H1, y, z))
        assert np.max(np.abs(lhs - rhs)) < 1e-12

    @settings(max_examples=100, deadline=None)
    @given(coeff_vectors(4), coeff_vectors(4), coeff_vectors(4))
    def test_associativity_step3(self, x, y, z):
        lhs = bch_product(F3, bch_product(F3, x, y), z)
        rhs = bch_product(F3, x, bch_product(F3, y, z))
        assert np.max(np.abs(lhs - rhs)) < 1e-12

    def test_batched_product(self):
        rng = np.random.default_rng(0)
        xs = rng.normal(size=(10, 3)) + 1j * rng.normal(size=(10, 3))
        ys = rng.normal(size=(10, 3)) + 1j * rng.normal(size=(10, 3))
        batched = bch_product(H1, xs, ys)
        for i in range(10):
            assert np.allclose(batched[i], bch_product(H1, xs[i], ys[i]))


class TestDilation:
    def test_examples(self):
        assert np.allclose(dilate(H1, 2, cvec(1, 1, 1)), cvec(2, 2, 4))
        x = cvec(0.2, -1.0 + 0.5j, 0.3j)
        assert np.allclose(dilate(H1, 1.0, x), x)

    def test_zero_rejected(self):
        with pytest.raises(ValueError):
            dilate(H1, 0.0, cvec(1, 0, 0))

    @settings(max_examples=50, deadline=None)
    @given(coeff_vectors(3), st.complex_numbers(max_magnitude=3.0),
           st.complex_numbers(max_magnitude=3.0))
    def test_composition(self, x, lam, mu):
        if abs(lam) < 1e-3 or abs(mu) < 1e-3:
            return
        lhs = dilate(H1, lam, dilate(H1, mu, x))
        rhs = dilate(H1, lam * mu, x)
        assert np.max(np.abs(lhs - rhs)) < 1e-9 * max(1.0, np.max(np.abs(rhs)))

    @settings(max_examples=50, deadline=None)
    @given(coeff_vectors(3), coeff_vectors(3), st.complex_numbers(max_magnitude=2.0))
    def test_automorphism(self, x, y, lam):
        if abs(lam) < 1e-3:
            return
        lhs = dilate(H1, lam, bch_product(H1, x, y))
        rhs = bch_product(H1, dilate(H1, lam, x), dilate(H1, lam, y))
        assert np.max(np.abs(lhs - rhs)) < 1e-12 * max(1.0, np.max(np.abs(rhs)))


class TestHomogeneousNorm:
    def test_examples(self):
        assert homogeneous_norm(H1, cvec(0, 0, 4)) == pytest.approx(2.0)
        assert homogeneous_norm(H1, identity_element(H1)) == 0.0

    def test_positive_definite(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            x = rng.normal(size=3) + 1j * rng.normal(size=3)
            assert homogeneous_norm(H1, x) > 0

    @settings(max_examples=50, deadline=None)
    @given(coeff_vectors(3), st.complex_numbers(min_magnitude=1e-2, max_magnitude=4.0))
    def test_dilation_scaling(self, x, lam):
        lhs = homogeneous_norm(H1, dilate(H1, lam, x))
        rhs = abs(lam) * homogeneous_norm(H1, x)
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)


class TestValidation:
    def test_declared_layer_without_brackets(self):
        alg = StratifiedAlgebra("pad", (2, 1), np.zeros((3, 3, 3)))
        laws = {v.law for v in validate_algebra(alg)}
        assert laws == {"stratification"}

    def test_flipped_sign(self):
        table = np.array(H1.table)
        table[1, 0, 2] = 1.0
        bad = StratifiedAlgebra("flip", (2, 1), table)
        laws = {v.law for v in validate_algebra(bad)}
        assert "antisymmetry" in laws

    def test_violation_carries_witness(self):
        table = np.array(H1.table)
        table[1, 0, 2] = 1.0
        bad = StratifiedAlgebra("flip", (2, 1), table)
        v = [v for v in validate_algebra(bad) if v.law == "antisymmetry"][0]
        assert v.witness == (0, 1)


class TestHType:
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_heisenberg_is_h_type(self, n):
        assert h_type_check(heisenberg_weyl(n)).passed

    def test_abelian_fails(self):
        report = h_type_check(abelian(2))
        assert not report.passed
        assert any(v.law == "bracket-generates-center" for v in report.violations)

    def test_filiform_fails(self):
        report = h_type_check(F3)
        assert not report.passed
        assert report.violations

    def test_degenerate_metric_rejected(self):
        gram = np.zeros((6, 6))
        with pytest.raises(StructuralError):
            h_type_check(H1, gram)

    def test_non_symmetric_metric_rejected(self):
        gram = np.eye(6)
        gram[0, 1] = 0.5
        with pytest.raises(StructuralError):
            h_type_check(H1, gram)


class TestGroupSpecIO:
    def test_builtin_tags(self):
        assert load_group("heisenberg:2").layers == (4, 1)
        assert load_group("abelian:3").layers == (3,)
        assert load_group("filiform:3").layers == (2, 1, 1)

    def test_unknown_tag(self):
        with pytest.raises(StructuralError):
            load_group("nilpotent:9")

    def test_json_spec_roundtrip(self, tmp_path):
        spec = {
            "name": "heis-json",
            "layers": [2, 1],
            "brackets": [{"i": 0, "j": 1, "out": {"2": [1.0, 0.0]}}],
        }
        path = tmp_path / "group.json"
        path.write_text(json.dumps(spec))
        alg = load_group(str(path))
        assert validate_algebra(alg) == []
        assert np.allclose(alg.table, H1.table)

    def test_malformed_spec(self):
        with pytest.raises(StructuralError):
            algebra_from_spec({"name": "x", "layers": [2, 1], "brackets": [{"i": 0}]})

    def test_missing_file(self):
        with pytest.raises(StructuralError):
            load_group("/nonexistent/group.json")
