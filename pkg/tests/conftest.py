from __future__ import annotations

import numpy as np
import pytest

from assortplan import Catalog, DataStore, MnlParameters, ParameterKey, Product

# The common two-product instance used in many hand-checked examples.
# Weights are (v0, v1, v2) = (0.5, 0.5, 1.0); any positive rescaling gives the
# same probabilities and revenues, so R({1}) = 5, R({2}) = 16/3, R({1,2}) = 6.5.
TWO_PRODUCT_PRICES = (10.0, 8.0)


@pytest.fixture
def two_product_catalog() -> Catalog:
    return Catalog(
        "demo",
        (Product(1, "high", TWO_PRODUCT_PRICES[0]), Product(2, "low", TWO_PRODUCT_PRICES[1])),
    )


@pytest.fixture
def two_product_params() -> MnlParameters:
    return MnlParameters("demo", "mnl", v0=0.5, utilities={1: 0.5, 2: 1.0})


def tafeng_fixture_products() -> tuple[Product, ...]:
    prices = (100.0, 90.0, 80.0, 70.0, 60.0, 50.0, 40.0, 30.0)
    names = (
        "Oolong Tea 600ml",
        "Rice Crackers 150g",
        "Soy Milk 1L",
        "Instant Noodles 5pk",
        "Frozen Dumplings 20pc",
        "Green Onion Pancake",
        "Pickled Radish 200g",
        "Barley Tea 2L",
    )
    return tuple(Product(i + 1, names[i], prices[i]) for i in range(8))


def tafeng_fixture_params() -> MnlParameters:
    # Equal weights 0.2, v0 = 1: the unconstrained optimum is products 1..6
    # (revenue 90/2.2 = 40.909...), while a size-5 cap yields 1..5 (revenue 40).
    return MnlParameters("ta-feng", "mnl", v0=1.0, utilities={i: 0.2 for i in range(1, 9)})


@pytest.fixture
def tafeng_store(tmp_path) -> DataStore:
    """A store holding the small 'ta-feng' fixture dataset with mnl parameters."""
    store = DataStore(tmp_path / "data")
    catalog_csv = tmp_path / "catalog.csv"
    rows = ["product_id,name,price"]
    rows += [f"{p.id},{p.name},{p.price!r}" for p in tafeng_fixture_products()]
    catalog_csv.write_text("\n".join(rows) + "\n", encoding="utf-8")
    store.ingest_catalog(catalog_csv, "ta-feng")
    store.put_parameters(ParameterKey("ta-feng", "mnl"), tafeng_fixture_params())
    return store


def random_instance(rng: np.random.Generator, n: int | None = None):
    """One random (catalog, params) pair with weights and v0 in (0, 1]."""
    if n is None:
        n = int(rng.integers(1, 13))
    prices = (1.0 - rng.random(n)) * 100.0  # (0, 100]
    utils = 1.0 - rng.random(n)             # (0, 1]
    v0 = float(1.0 - rng.random())
    catalog = Catalog(
        "rand", tuple(Product(i + 1, f"p{i + 1}", float(prices[i])) for i in range(n))
    )
    params = MnlParameters(
        "rand", "mnl", v0=v0, utilities={i + 1: float(utils[i]) for i in range(n)}
    )
    return catalog, params
