"""Estimating MNL preference weights from data.

Two estimators:

* ``estimate_frequency`` turns raw purchase counts into weights, assuming the
  full catalog was always on offer.  The no-purchase weight is unidentifiable
  from purchase-only data and is pinned at v0 = 1, so downstream revenue
  figures are relative, not absolute.
* ``estimate_mle`` maximizes the choice log-likelihood over offer-set
  observations by gradient ascent in log space (v0 fixed at 1 during the
  search, rescaled afterwards).

``simulate_choices`` generates synthetic observations from known parameters
for testing the estimators end to end.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date
from typing import Iterable, Sequence

import numpy as np

from .choice import Assortment, Catalog, MnlParameters, choice_probabilities
from .errors import EmptyDataError, IdentifiabilityError

ZERO_COUNT_FLOOR = 1e-6
BACKTRACK_FACTOR = 0.5
INITIAL_STEP = 1.0
MAX_BACKTRACKS = 60


@dataclass(frozen=True, slots=True)
class TransactionRecord:
    timestamp: date
    user_id: str
    product_id: int
    quantity: int

    def __post_init__(self):
        if self.quantity < 1:
            raise ValueError(f"quantity must be >= 1, got {self.quantity}")


@dataclass(frozen=True)
class OfferSetObservation:
    """One customer decision: the offered assortment and what was chosen (0 = nothing)."""

    offered: Assortment
    chosen: int

    def __post_init__(self):
        if self.chosen != 0 and self.chosen not in self.offered:
            raise ValueError(f"chosen product {self.chosen} is not in the offered set")


@dataclass(frozen=True)
class MleFit:
    """Gradient-ascent outcome: fitted parameters plus convergence diagnostics.

    ``ll_trace`` holds the total log-likelihood after each accepted step,
    starting at the all-ones initialization; it is non-decreasing by
    construction of the line search.
    """

    params: MnlParameters
    converged: bool
    iterations: int
    log_likelihood: float
    ll_trace: tuple[float, ...]


def estimate_frequency(catalog: Catalog, transactions: Iterable[TransactionRecord]) -> MnlParameters:
    """Purchase-count weights: v_i = count_i / max_j count_j, v0 = 1.

    Products never observed get the floor weight ``ZERO_COUNT_FLOOR`` so the
    parameter invariants (strictly positive weights) stay intact.
    """
    counts = dict.fromkeys(catalog.ids, 0)
    seen_any = False
    for rec in transactions:
        if rec.product_id in counts:
            counts[rec.product_id] += rec.quantity
            seen_any = True
    if not seen_any:
        raise EmptyDataError("no transactions reference catalog products; nothing to estimate")
    top = max(counts.values())
    utilities = {
        pid: (cnt / top if cnt > 0 else ZERO_COUNT_FLOOR) for pid, cnt in counts.items()
    }
    return MnlParameters(dataset_id=catalog.dataset_id, model_id="mnl", v0=1.0, utilities=utilities)


def simulate_choices(
    catalog: Catalog,
    params: MnlParameters,
    offer_sets: Sequence[Assortment],
    seed: int,
) -> list[OfferSetObservation]:
    """Draw one choice per offered set from the model; deterministic given seed.

    Identical offer sets are grouped (in first-appearance order) so large
    simulations stay fast; the draw for each position depends only on the
    seed and the sequence of offer sets.
    """
    rng = np.random.default_rng(seed)
    groups: dict[tuple[int, ...], list[int]] = {}
    for pos, offered in enumerate(offer_sets):
        groups.setdefault(offered.sorted_ids(), []).append(pos)

    chosen = np.empty(len(offer_sets), dtype=np.int64)
    for key, positions in groups.items():
        offered = Assortment.of(key)
        probs = choice_probabilities(params, offered)
        options = np.array([0, *key], dtype=np.int64)
        weights = np.array([probs[k] for k in options], dtype=np.float64)
        weights /= weights.sum()
        draws = rng.choice(options, size=len(positions), p=weights)
        chosen[positions] = draws

    return [
        OfferSetObservation(offered=offer_sets[i], chosen=int(chosen[i]))
        for i in range(len(offer_sets))
    ]


def _aggregate(catalog: Catalog, observations: Sequence[OfferSetObservation]):
    """Collapse observations into (membership matrix, per-set counts, chosen counts)."""
    ids = sorted(catalog.ids)
    col = {pid: j for j, pid in enumerate(ids)}
    set_rows: dict[tuple[int, ...], int] = {}
    rows: list[tuple[int, ...]] = []
    n_per_set: list[int] = []
    chosen_counts = np.zeros(len(ids), dtype=np.float64)
    offered_ever = set()
    for obs in observations:
        key = obs.offered.sorted_ids()
        row = set_rows.get(key)
        if row is None:
            row = set_rows[key] = len(rows)
            rows.append(key)
            n_per_set.append(0)
        n_per_set[row] += 1
        offered_ever.update(key)
        if obs.chosen != 0:
            chosen_counts[col[obs.chosen]] += 1.0

    never = sorted(catalog.ids - offered_ever)
    if never:
        raise IdentifiabilityError(
            f"products never offered in any observation: {never[:10]}"
            + (" ..." if len(never) > 10 else "")
        )

    membership = np.zeros((len(rows), len(ids)), dtype=np.float64)
    for r, key in enumerate(rows):
        for pid in key:
            membership[r, col[pid]] = 1.0
    return ids, membership, np.array(n_per_set, dtype=np.float64), chosen_counts


def estimate_mle(
    catalog: Catalog,
    observations: Sequence[OfferSetObservation],
    max_iters: int = 500,
    tol: float = 1e-6,
) -> MleFit:
    """Maximum-likelihood weights via gradient ascent on log-utilities.

    Works in u_i = log v_i with v0 fixed at 1; each iteration takes the full
    gradient direction with a backtracking line search (halving from step 1.0
    until the mean log-likelihood strictly improves).  Stops when the mean
    gradient max-norm drops below ``tol`` or after ``max_iters`` iterations,
    in which case the fit is flagged as non-converged.  The returned weights
    are rescaled so every v_i (and v0) lies in (0, 1].
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if not tol > 0:
        raise ValueError("tol must be > 0")
    if not observations:
        raise EmptyDataError("no observations to estimate from")

    ids, membership, n_per_set, chosen_counts = _aggregate(catalog, observations)
    n_obs = float(len(observations))

    def mean_ll_and_grad(u: np.ndarray):
        with np.errstate(over="ignore", invalid="ignore"):
            v = np.exp(u)
            denom = 1.0 + membership @ v
            ll = (chosen_counts @ u - n_per_set @ np.log(denom)) / n_obs
            if not np.isfinite(ll):
                return -np.inf, None
            grad = (chosen_counts - v * (membership.T @ (n_per_set / denom))) / n_obs
        return float(ll), grad

    u = np.zeros(len(ids), dtype=np.float64)
    ll, grad = mean_ll_and_grad(u)
    trace = [ll * n_obs]
    iterations = 0
    converged = float(np.max(np.abs(grad))) < tol
    while not converged and iterations < max_iters:
        step = INITIAL_STEP
        improved = False
        for _ in range(MAX_BACKTRACKS):
            candidate = u + step * grad
            cand_ll, cand_grad = mean_ll_and_grad(candidate)
            if cand_ll > ll:
                u, ll, grad = candidate, cand_ll, cand_grad
                trace.append(ll * n_obs)
                improved = True
                break
            step *= BACKTRACK_FACTOR
        iterations += 1
        if not improved:
            break  # numerically flat: no ascent step of any tried length improves
        converged = float(np.max(np.abs(grad))) < tol

    v = np.exp(u)
    v = np.maximum(v, 1e-300)  # guard exp underflow in separation cases
    scale = float(np.max(v))
    v0 = 1.0
    if scale > 1.0:
        v = v / scale
        v0 = 1.0 / scale
    params = MnlParameters(
        dataset_id=catalog.dataset_id,
        model_id="mnl",
        v0=v0,
        utilities={pid: float(v[j]) for j, pid in enumerate(ids)},
    )
    return MleFit(
        params=params,
        converged=converged,
        iterations=iterations,
        log_likelihood=trace[-1],
        ll_trace=tuple(trace),
    )
