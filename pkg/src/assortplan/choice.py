"""Multinomial logit (MNL) choice model: products, parameters, probabilities, revenue.

A customer offered the set S buys product k with probability

    P(k | S) = v_k / (v0 + sum_{j in S} v_j)

where v_j > 0 is the preference weight of product j and v0 > 0 the weight of
walking away without buying (index 0).  The expected revenue of an assortment
is R(S) = sum_{k in S} p_k * P(k | S).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping

from .errors import InvalidChoiceError, ParameterMismatchError

NO_PURCHASE = 0

# absolute tolerance for float equality checks throughout the package
ABS_TOL = 1e-12


@dataclass(frozen=True, slots=True)
class Product:
    id: int
    name: str
    price: float

    def __post_init__(self):
        if self.id <= 0:
            raise ValueError(f"product id must be a positive integer, got {self.id}")
        if not self.price > 0:
            raise ValueError(f"price of product {self.id} must be > 0, got {self.price}")


@dataclass(frozen=True)
class Catalog:
    """The product universe of one dataset."""

    dataset_id: str
    products: tuple[Product, ...]
    _by_id: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "products", tuple(self.products))
        by_id: dict[int, Product] = {}
        for prod in self.products:
            if prod.id in by_id:
                raise ValueError(f"duplicate product id {prod.id} in catalog '{self.dataset_id}'")
            by_id[prod.id] = prod
        object.__setattr__(self, "_by_id", by_id)

    @property
    def ids(self) -> frozenset[int]:
        return frozenset(self._by_id)

    def product(self, product_id: int) -> Product:
        try:
            return self._by_id[product_id]
        except KeyError:
            raise ParameterMismatchError(
                f"product id {product_id} not in catalog '{self.dataset_id}'"
            ) from None

    def __len__(self) -> int:
        return len(self.products)

    def __iter__(self) -> Iterator[Product]:
        return iter(self.products)

    def __contains__(self, product_id: int) -> bool:
        return product_id in self._by_id


@dataclass(frozen=True)
class MnlParameters:
    """Preference weights v0, v_1..v_n for one (dataset, model) pair.

    All weights live in (0, 1]; any positively scaled copy of a weight vector
    induces the same choice probabilities, so this normalization loses nothing.
    """

    dataset_id: str
    model_id: str
    v0: float
    utilities: Mapping[int, float]

    def __post_init__(self):
        if not 0.0 < self.v0 <= 1.0:
            raise ValueError(f"v0 must be in (0, 1], got {self.v0}")
        frozen = {}
        for pid, v in self.utilities.items():
            if not 0.0 < v <= 1.0:
                raise ValueError(f"utility of product {pid} must be in (0, 1], got {v}")
            frozen[int(pid)] = float(v)
        object.__setattr__(self, "utilities", MappingProxyType(frozen))

    def utility(self, product_id: int) -> float:
        try:
            return self.utilities[product_id]
        except KeyError:
            raise ParameterMismatchError(
                f"no utility stored for product id {product_id} "
                f"(dataset '{self.dataset_id}', model '{self.model_id}')"
            ) from None


@dataclass(frozen=True)
class Assortment:
    """A subset S of product ids offered to customers."""

    product_ids: frozenset[int]

    def __post_init__(self):
        ids = frozenset(int(i) for i in self.product_ids)
        if any(i <= 0 for i in ids):
            raise ValueError("assortments contain positive product ids only")
        object.__setattr__(self, "product_ids", ids)

    @classmethod
    def of(cls, ids: Iterable[int]) -> "Assortment":
        return cls(frozenset(ids))

    def sorted_ids(self) -> tuple[int, ...]:
        return tuple(sorted(self.product_ids))

    def __len__(self) -> int:
        return len(self.product_ids)

    def __iter__(self) -> Iterator[int]:
        return iter(sorted(self.product_ids))

    def __contains__(self, product_id: int) -> bool:
        return product_id in self.product_ids


def _denominator(params: MnlParameters, assortment: Assortment) -> float:
    denom = params.v0
    for pid in assortment.sorted_ids():
        denom += params.utility(pid)
    return denom


def choice_probability(params: MnlParameters, assortment: Assortment, k: int) -> float:
    """P(k | S) for k in S, or the no-purchase probability for k = 0."""
    denom = _denominator(params, assortment)
    if k == NO_PURCHASE:
        return params.v0 / denom
    if k not in assortment:
        raise InvalidChoiceError(f"product {k} is not in the offered assortment")
    return params.utility(k) / denom


def choice_probabilities(params: MnlParameters, assortment: Assortment) -> dict[int, float]:
    """All choice probabilities over S plus the no-purchase option (key 0)."""
    denom = _denominator(params, assortment)
    probs = {NO_PURCHASE: params.v0 / denom}
    for pid in assortment.sorted_ids():
        probs[pid] = params.utility(pid) / denom
    return probs


def expected_revenue(catalog: Catalog, params: MnlParameters, assortment: Assortment) -> float:
    """R(S) = sum_{k in S} p_k * P(k | S); 0 for the empty assortment.

    Terms are accumulated in ascending id order so repeated calls on the same
    instance produce bit-identical floats.
    """
    denom = params.v0
    revenue_mass = 0.0
    for pid in assortment.sorted_ids():
        price = catalog.product(pid).price
        v = params.utility(pid)
        denom += v
        revenue_mass += price * v
    return revenue_mass / denom
