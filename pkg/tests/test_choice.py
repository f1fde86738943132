from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from assortplan import (
    Assortment,
    Catalog,
    MnlParameters,
    Product,
    choice_probabilities,
    choice_probability,
    expected_revenue,
)
from assortplan.errors import InvalidChoiceError, ParameterMismatchError

TOL = 1e-12


def make_params(v0, utils):
    return MnlParameters("t", "mnl", v0=v0, utilities=utils)


class TestChoiceProbability:
    def test_symmetric_two_way_split(self):
        params = make_params(1.0, {1: 1.0})
        assert choice_probability(params, Assortment.of({1}), 1) == 0.5

    def test_empty_offer_set_means_no_purchase(self):
        params = make_params(0.7, {1: 0.3})
        assert choice_probability(params, Assortment.of(()), 0) == 1.0

    def test_hand_evaluated_three_way(self):
        # 0.5 / (1 + 0.5 + 0.25)
        params = make_params(1.0, {1: 0.5, 2: 0.25})
        got = choice_probability(params, Assortment.of({1, 2}), 1)
        assert got == pytest.approx(0.5 / 1.75, abs=TOL)
        assert got == pytest.approx(0.2857142857142857, abs=1e-12)

    def test_unknown_product_id_rejected(self):
        params = make_params(1.0, {1: 0.5})
        with pytest.raises(ParameterMismatchError):
            choice_probability(params, Assortment.of({1, 9}), 1)

    def test_choice_outside_offer_set_rejected(self):
        params = make_params(1.0, {1: 0.5, 2: 0.25})
        with pytest.raises(InvalidChoiceError):
            choice_probability(params, Assortment.of({1}), 2)


class TestExpectedRevenue:
    def test_single_product_half_split(self):
        catalog = Catalog("t", (Product(1, "a", 10.0),))
        params = make_params(1.0, {1: 1.0})
        assert expected_revenue(catalog, params, Assortment.of({1})) == 5.0

    def test_empty_assortment_is_zero(self, two_product_catalog, two_product_params):
        assert expected_revenue(two_product_catalog, two_product_params, Assortment.of(())) == 0.0

    def test_hand_evaluated_pair(self, two_product_catalog, two_product_params):
        got = expected_revenue(two_product_catalog, two_product_params, Assortment.of({1, 2}))
        assert got == pytest.approx(6.5, abs=TOL)

    def test_catalog_mismatch_rejected(self, two_product_params):
        catalog = Catalog("t", (Product(1, "a", 10.0),))
        with pytest.raises(ParameterMismatchError):
            expected_revenue(catalog, two_product_params, Assortment.of({2}))


@st.composite
def random_model(draw):
    n = draw(st.integers(min_value=1, max_value=8))
    v0 = draw(st.floats(min_value=1e-6, max_value=1.0))
    utils = {
        i + 1: draw(st.floats(min_value=1e-6, max_value=1.0)) for i in range(n)
    }
    subset = frozenset(
        i for i in utils if draw(st.booleans())
    )
    return make_params(v0, utils), Assortment(subset)


class TestInvariants:
    @given(random_model())
    @settings(max_examples=200, deadline=None)
    def test_probabilities_normalize(self, model):
        params, assortment = model
        probs = choice_probabilities(params, assortment)
        assert abs(sum(probs.values()) - 1.0) < TOL

    @given(random_model())
    @settings(max_examples=200, deadline=None)
    def test_adding_a_product_shrinks_every_probability(self, model):
        params, assortment = model
        outside = sorted(set(params.utilities) - assortment.product_ids)
        if not outside:
            return
        bigger = Assortment(assortment.product_ids | {outside[0]})
        before = choice_probabilities(params, assortment)
        after = choice_probabilities(params, bigger)
        for k, p in before.items():
            assert after[k] < p

    @given(random_model(), st.floats(min_value=0.01, max_value=1.0))
    @settings(max_examples=200, deadline=None)
    def test_scale_invariance(self, model, c):
        params, assortment = model
        scaled = make_params(params.v0 * c, {k: v * c for k, v in params.utilities.items()})
        p1 = choice_probabilities(params, assortment)
        p2 = choice_probabilities(scaled, assortment)
        for k in p1:
            assert math.isclose(p1[k], p2[k], abs_tol=TOL)

    @given(random_model())
    @settings(max_examples=200, deadline=None)
    def test_revenue_strictly_below_max_price(self, model):
        params, assortment = model
        if len(assortment) == 0:
            return
        catalog = Catalog(
            "t", tuple(Product(i, f"p{i}", 1.0 + i) for i in sorted(params.utilities))
        )
        rev = expected_revenue(catalog, params, assortment)
        max_price = max(catalog.product(i).price for i in assortment)
        assert 0.0 <= rev < max_price


class TestTypes:
    def test_price_must_be_positive(self):
        with pytest.raises(ValueError):
            Product(1, "x", 0.0)

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValueError):
            Catalog("t", (Product(1, "a", 1.0), Product(1, "b", 2.0)))

    def test_utilities_must_be_in_unit_interval(self):
        with pytest.raises(ValueError):
            make_params(1.0, {1: 1.5})
        with pytest.raises(ValueError):
            make_params(1.0, {1: 0.0})
        with pytest.raises(ValueError):
            make_params(0.0, {1: 0.5})

    def test_parameters_are_immutable(self):
        params = make_params(1.0, {1: 0.5})
        with pytest.raises(TypeError):
            params.utilities[1] = 0.9
