import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sobolev_jets.core.jets import (
    JetField,
    Poly,
    dump_field,
    field_from_polynomial,
    jet_difference,
    load_field,
    multi_indices,
    poly_eval_deriv,
    random_polynomial,
)
from sobolev_jets.errors import ExponentError, FieldSchemaError


class TestMultiIndices:
    def test_count_and_order(self):
        alphas = multi_indices(2, 2)
        assert len(alphas) == 6
        assert alphas[0] == (0, 0)
        assert [sum(a) for a in alphas] == sorted(sum(a) for a in alphas)

    def test_negative_order_is_empty(self):
        assert multi_indices(3, -1) == ()


class TestPoly:
    def test_linear_derivative(self):
        P = Poly.from_dict((0.0,), {(0,): 1.0, (1,): 2.0})
        for x in (-3.0, 0.0, 7.5):
            assert poly_eval_deriv(P, (1,), [x]) == pytest.approx(2.0)

    def test_derivative_of_order_m_vanishes(self):
        P = Poly.from_dict((0.0,), {(0,): 1.0, (1,): 2.0}, m=2)
        assert poly_eval_deriv(P, (2,), [0.4]) == 0.0

    def test_taylor_basis(self):
        # coeffs are derivatives at the basepoint: P = 1 + 3x + 2y^2
        P = Poly.from_dict((0.0, 0.0), {(0, 0): 1.0, (1, 0): 3.0, (0, 2): 4.0})
        assert P.m == 3
        assert poly_eval_deriv(P, (0, 1), [0.0, 1.0]) == pytest.approx(4.0)
        assert P([1.0, 1.0]) == pytest.approx(6.0)

    def test_addition_rebases(self):
        P = Poly.from_dict((0.0,), {(0,): 1.0, (1,): 2.0}, m=2)
        Q = Poly.from_dict((1.0,), {(0,): 0.0, (1,): -1.0}, m=2)
        S = P + Q
        assert S([2.0]) == pytest.approx(P([2.0]) + Q([2.0]))

    @given(st.integers(min_value=0, max_value=2**31 - 1), st.integers(min_value=1, max_value=3), st.integers(min_value=1, max_value=4))
    @settings(max_examples=40, deadline=None)
    def test_property_rebase_keeps_the_polynomial(self, seed, dim, m):
        rng = np.random.default_rng(seed)
        P = random_polynomial(rng, dim, m, rng.uniform(-1, 1, size=dim))
        R = P.rebase(rng.uniform(-1, 1, size=dim))
        X = rng.uniform(-2, 2, size=(5, dim))
        for alpha in multi_indices(dim, m - 1):
            np.testing.assert_allclose(R.derivative_many(alpha, X), P.derivative_many(alpha, X), rtol=1e-9, atol=1e-9)


class TestJetDifference:
    def test_identical_jets(self):
        P = Poly.from_dict((0.5,), {(0,): 1.0, (1,): -1.0}, m=2)
        assert jet_difference(P, P, (0,), [3.0]) == 0.0

    def test_constants(self):
        P = Poly.from_dict((0.0,), {(0,): 4.0}, m=1)
        Q = Poly.from_dict((1.0,), {(0,): 1.5}, m=1)
        assert jet_difference(P, Q, (0,), [0.7]) == pytest.approx(2.5)


class TestFieldFromPolynomial:
    def test_constant_generator(self):
        G = Poly.from_dict((0.0, 0.0), {(0, 0): 3.0}, m=1)
        field = field_from_polynomial(G, [[0.0, 0.0], [1.0, 2.0]], 1)
        assert field.coeffs[:, 0].tolist() == [3.0, 3.0]

    def test_product_generator(self):
        G = Poly.from_dict((0.0, 0.0), {(1, 1): 1.0})
        rng = np.random.default_rng(11)
        field = field_from_polynomial(G, rng.uniform(-1, 1, size=(4, 2)), 3)
        W = rng.uniform(-2, 2, size=(10, 2))
        for P in field.polys:
            for w in W:
                assert P(w) == pytest.approx(w[0] * w[1], abs=1e-12)
        for alpha in field.alphas:
            assert jet_difference(field.poly(0), field.poly(3), alpha, W[0]) == pytest.approx(0.0, abs=1e-12)

    def test_default_exponent(self):
        G = Poly.from_dict((0.0, 0.0), {(0, 0): 1.0}, m=1)
        assert field_from_polynomial(G, [[0.0, 0.0]], 1).p == 3.0


class TestJetField:
    def test_requires_exponent_above_dimension(self):
        with pytest.raises(ExponentError):
            JetField([[0.0, 0.0], [1.0, 0.0]], [[0.0], [1.0]], 1, 2.0)

    def test_infinite_exponent(self):
        assert JetField([[0.0]], [[1.0]], 1, float("inf")).p == float("inf")

    def test_rejects_repeated_points(self):
        with pytest.raises(FieldSchemaError):
            JetField([[0.0], [0.0]], [[0.0], [1.0]], 1, 2.0)

    def test_combine_and_scale(self, two_point_field):
        other = two_point_field.scaled(-2.0)
        mixed = two_point_field.combine(3.0, other, 0.5)
        np.testing.assert_allclose(mixed.coeffs, 2.0 * two_point_field.coeffs)


class TestSchema:
    def test_load_fixture(self, two_point_field):
        assert (two_point_field.dim, two_point_field.m, two_point_field.p) == (1, 1, 2.0)
        assert two_point_field.jet_value(1, (0,)) == 1.0

    def test_generator_survives_round_trip(self, linear_field, tmp_path):
        loaded = load_field(dump_field(linear_field, tmp_path / "field.json"))
        assert loaded.generator is not None
        assert loaded.generator([0.25]) == pytest.approx(1.5)
        np.testing.assert_allclose(loaded.coeffs, linear_field.coeffs)

    def test_infinite_exponent_is_written_as_string(self, tmp_path):
        path = dump_field(JetField([[0.0]], [[1.0]], 1, float("inf")), tmp_path / "inf.json")
        assert b'"p": "inf"' in path.read_bytes()
        assert load_field(path).p == float("inf")

    def test_bad_exponent(self, fixtures_dir):
        with pytest.raises(ExponentError):
            load_field(fixtures_dir / "bad_exponent.json")

    @pytest.mark.parametrize(
        "text",
        [
            b"not json",
            b'{"dim": 1, "m": 1, "p": 2, "points": [[0.0]]}',
            b'{"dim": 4, "m": 1, "p": 5, "points": [[0, 0, 0, 0]], "jets": [{"0,0,0,0": 1}]}',
            b'{"dim": 1, "m": 1, "p": 2, "points": [[0.0]], "jets": [{"1": 3.0}]}',
        ],
    )
    def test_schema_errors(self, tmp_path, text):
        path = tmp_path / "bad.json"
        path.write_bytes(text)
        with pytest.raises(FieldSchemaError):
            load_field(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FieldSchemaError):
            load_field(tmp_path / "missing.json")
