"""Exact expected-revenue maximization over assortments.

Three solvers, all exact:

* ``optimize_unconstrained`` scans price-descending prefixes of the catalog;
  the unconstrained MNL optimum is always such a prefix (every product priced
  above the optimal revenue belongs in, everything below stays out).
* ``optimize_constrained`` runs Dinkelbach's parametric search on the
  fractional objective R(S) = N(S)/D(S): at parameter lam the linearized
  subproblem max_S sum_{k in S} (p_k - lam) v_k is solved greedily under the
  cardinality / inclusion / exclusion constraints, and lam is updated to the
  achieved revenue until it stops increasing.
* ``brute_force_optimal`` enumerates every feasible subset on small instances
  and is the verification oracle for the other two.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .choice import Assortment, Catalog, MnlParameters, choice_probabilities, expected_revenue
from .errors import (
    EmptyUniverseError,
    InfeasibleConstraintsError,
    OracleSizeError,
    ParameterMismatchError,
)

LAMBDA_TOL = 1e-12            # Dinkelbach stops when lam gains less than this
MAX_DINKELBACH_ITERATIONS = 1000   # defensive cap; never reached on sane inputs
ORACLE_MAX_PRODUCTS = 20      # 2^20 subsets is the enumeration ceiling

ALGORITHM_REVENUE_ORDERED = "revenue-ordered"
ALGORITHM_DINKELBACH = "dinkelbach"
ALGORITHM_BRUTE_FORCE = "brute-force"


@dataclass(frozen=True)
class ConstraintSet:
    """The feasible family: size bound C, forced inclusions F, exclusions E."""

    cardinality: int | None = None
    include: frozenset[int] = frozenset()
    exclude: frozenset[int] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "include", frozenset(int(i) for i in self.include))
        object.__setattr__(self, "exclude", frozenset(int(i) for i in self.exclude))
        if self.cardinality is not None and self.cardinality < 1:
            raise InfeasibleConstraintsError(
                f"cardinality bound must be a positive integer, got {self.cardinality}"
            )
        overlap = self.include & self.exclude
        if overlap:
            raise InfeasibleConstraintsError(
                f"products {sorted(overlap)} are both forced in and excluded"
            )
        if self.cardinality is not None and len(self.include) > self.cardinality:
            raise InfeasibleConstraintsError(
                f"{len(self.include)} forced products exceed the cardinality bound {self.cardinality}"
            )

    @property
    def unconstrained(self) -> bool:
        return self.cardinality is None and not self.include and not self.exclude


@dataclass(frozen=True)
class OptimizationResult:
    assortment: Assortment
    revenue: float
    probabilities: dict[int, float] = field(compare=False)
    iterations: int
    algorithm: str

    def to_dict(self) -> dict:
        return {
            "assortment": list(self.assortment.sorted_ids()),
            "revenue": self.revenue,
            "probabilities": {str(k): p for k, p in sorted(self.probabilities.items())},
            "iterations": self.iterations,
            "algorithm": self.algorithm,
        }


def _check_coverage(catalog: Catalog, params: MnlParameters) -> None:
    if len(catalog) == 0:
        raise EmptyUniverseError(f"catalog '{catalog.dataset_id}' is empty")
    if catalog.ids != frozenset(params.utilities):
        missing = sorted(catalog.ids - frozenset(params.utilities))[:5]
        extra = sorted(frozenset(params.utilities) - catalog.ids)[:5]
        raise ParameterMismatchError(
            f"parameters do not cover catalog '{catalog.dataset_id}' exactly "
            f"(missing utilities for {missing}, stray utilities for {extra})"
        )


def _check_known(catalog: Catalog, ids: frozenset[int], label: str) -> None:
    unknown = sorted(ids - catalog.ids)
    if unknown:
        raise InfeasibleConstraintsError(f"{label} references unknown product ids {unknown}")


def _arrays(catalog: Catalog, params: MnlParameters, ids: list[int]):
    id_arr = np.array(ids, dtype=np.int64)
    prices = np.array([catalog.product(i).price for i in ids], dtype=np.float64)
    utils = np.array([params.utilities[i] for i in ids], dtype=np.float64)
    return id_arr, prices, utils


def _result(catalog, params, ids, iterations, algorithm) -> OptimizationResult:
    assortment = Assortment.of(ids)
    return OptimizationResult(
        assortment=assortment,
        revenue=expected_revenue(catalog, params, assortment),
        probabilities=choice_probabilities(params, assortment),
        iterations=iterations,
        algorithm=algorithm,
    )


def optimize_unconstrained(
    catalog: Catalog,
    params: MnlParameters,
    exclude: frozenset[int] = frozenset(),
) -> OptimizationResult:
    """Best assortment with no size or membership constraints.

    Sorts the non-excluded products by price descending (ties: lower id
    first), evaluates every prefix, and returns the first prefix attaining
    the maximum revenue, which is also the smallest one.
    """
    _check_coverage(catalog, params)
    exclude = frozenset(exclude)
    _check_known(catalog, exclude, "exclusion set")
    ids = sorted(catalog.ids - exclude)
    if not ids:
        raise EmptyUniverseError("every product is excluded; nothing to optimize over")

    id_arr, prices, utils = _arrays(catalog, params, ids)
    order = np.lexsort((id_arr, -prices))
    cum_mass = np.cumsum(prices[order] * utils[order])
    cum_denom = params.v0 + np.cumsum(utils[order])
    best = int(np.argmax(cum_mass / cum_denom))  # first max = shortest prefix
    chosen = id_arr[order[: best + 1]].tolist()
    return _result(catalog, params, chosen, 0, ALGORITHM_REVENUE_ORDERED)


def _greedy_subproblem(
    lam: float,
    free_ids: np.ndarray,
    free_prices: np.ndarray,
    free_utils: np.ndarray,
    capacity: int | None,
) -> list[int]:
    """Maximize sum_{k in S'} (p_k - lam) v_k over free products, |S'| <= capacity.

    Only strictly positive scores are worth taking; ties are broken toward
    the lower product id.
    """
    scores = (free_prices - lam) * free_utils
    positive = scores > 0.0
    if not positive.any():
        return []
    order = np.lexsort((free_ids, -scores))
    order = order[positive[order]]
    if capacity is not None:
        order = order[:capacity]
    return free_ids[order].tolist()


def _dinkelbach(
    catalog: Catalog,
    params: MnlParameters,
    constraints: ConstraintSet,
) -> tuple[list[int], list[float], int]:
    """Run the parametric iteration; returns (chosen ids, lam trace, iterations)."""
    forced = sorted(constraints.include)
    free = sorted(catalog.ids - constraints.exclude - constraints.include)
    free_ids, free_prices, free_utils = _arrays(catalog, params, free)
    capacity = None
    if constraints.cardinality is not None:
        capacity = constraints.cardinality - len(forced)

    def revenue_of(ids: list[int]) -> float:
        sel = sorted(ids)
        _, prices, utils = _arrays(catalog, params, sel)
        return float(prices @ utils) / (params.v0 + float(np.sum(utils)))

    lam = 0.0
    trace = [lam]
    iterations = 0
    chosen = list(forced)
    while iterations < MAX_DINKELBACH_ITERATIONS:
        picked = [] if capacity == 0 else _greedy_subproblem(
            lam, free_ids, free_prices, free_utils, capacity
        )
        chosen = forced + picked
        lam_next = revenue_of(chosen) if chosen else 0.0
        iterations += 1
        trace.append(lam_next)
        if abs(lam_next - lam) < LAMBDA_TOL:
            break
        lam = lam_next
    return chosen, trace, iterations


def optimize_constrained(
    catalog: Catalog,
    params: MnlParameters,
    constraints: ConstraintSet,
) -> OptimizationResult:
    """Exactly optimal assortment under cardinality / inclusion / exclusion.

    Dinkelbach's method: the lam sequence starts at 0, is non-decreasing, and
    fixes exactly at the optimal revenue because each linearized subproblem is
    solved exactly over the same feasible family.
    """
    _check_coverage(catalog, params)
    _check_known(catalog, constraints.include, "inclusion set")
    _check_known(catalog, constraints.exclude, "exclusion set")
    chosen, _, iterations = _dinkelbach(catalog, params, constraints)
    return _result(catalog, params, chosen, iterations, ALGORITHM_DINKELBACH)


def whatif_revenue(
    catalog: Catalog,
    params: MnlParameters,
    constraints: ConstraintSet,
) -> OptimizationResult:
    """Optimal revenue when given products are forced into the assortment.

    Same computation as :func:`optimize_constrained`; exists so callers asking
    "what would the revenue be if product k must be offered" can phrase the
    answer around the revenue figure.
    """
    return optimize_constrained(catalog, params, constraints)


def brute_force_optimal(
    catalog: Catalog,
    params: MnlParameters,
    constraints: ConstraintSet = ConstraintSet(),
) -> OptimizationResult:
    """Enumerate every feasible assortment; verification oracle.

    Ties are broken toward smaller cardinality, then the lexicographically
    smallest sorted id tuple. Refuses instances with more than
    ``ORACLE_MAX_PRODUCTS`` non-excluded products.
    """
    _check_coverage(catalog, params)
    _check_known(catalog, constraints.include, "inclusion set")
    _check_known(catalog, constraints.exclude, "exclusion set")
    universe = sorted(catalog.ids - constraints.exclude)
    m = len(universe)
    if m > ORACLE_MAX_PRODUCTS:
        raise OracleSizeError(
            f"{m} non-excluded products exceed the {ORACLE_MAX_PRODUCTS}-product enumeration limit"
        )

    pv = [catalog.product(i).price * params.utilities[i] for i in universe]
    v = [params.utilities[i] for i in universe]
    forced_bits = 0
    for idx, pid in enumerate(universe):
        if pid in constraints.include:
            forced_bits |= 1 << idx
    cap = constraints.cardinality

    n_masks = 1 << m
    mass = [0.0] * n_masks
    denom_add = [0.0] * n_masks
    for mask in range(1, n_masks):
        low = mask & -mask
        idx = low.bit_length() - 1
        rest = mask ^ low
        mass[mask] = mass[rest] + pv[idx]
        denom_add[mask] = denom_add[rest] + v[idx]

    best_mask = None
    best_rev = -1.0
    best_size = None
    v0 = params.v0
    for mask in range(n_masks):
        if (mask & forced_bits) != forced_bits:
            continue
        size = mask.bit_count()
        if cap is not None and size > cap:
            continue
        rev = mass[mask] / (v0 + denom_add[mask])
        if rev > best_rev:
            best_mask, best_rev, best_size = mask, rev, size
        elif rev == best_rev and best_mask is not None:
            if size < best_size or (
                size == best_size and _mask_ids(mask, universe) < _mask_ids(best_mask, universe)
            ):
                best_mask, best_size = mask, size

    ids = _mask_ids(best_mask, universe)
    return _result(catalog, params, ids, 0, ALGORITHM_BRUTE_FORCE)


def _mask_ids(mask: int, universe: list[int]) -> tuple[int, ...]:
    return tuple(universe[i] for i in range(len(universe)) if mask >> i & 1)
