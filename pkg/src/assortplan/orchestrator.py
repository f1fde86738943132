"""Request validation, turn handling, and reply rendering.

The conversational loop for one turn: decompose the prompt (offline grammar
or LLM tool call, per mode), merge it onto the session's sticky frame, run
range and consistency checks, execute the right solver, and render a
readable reply.  The sticky frame only advances when validation succeeds, so
a failed what-if never corrupts the conversation state.
"""

from __future__ import annotations

import json
import os
import secrets
import threading
from dataclasses import dataclass
from pathlib import Path

from . import optimize
from .choice import Catalog, MnlParameters
from .datastore import DataStore, ParameterKey
from .errors import (
    DecompositionError,
    ProviderUnavailableError,
    UnknownDatasetError,
    UnknownModelError,
    ValidationError,
)
from .intent import (
    ENV_MODE,
    MODE_DETERMINISTIC,
    MODE_LLM,
    Action,
    EMPTY_FRAME,
    IntentFrame,
    NoToolCall,
    ProviderConfig,
    SessionContext,
    decompose_with_llm,
    merge_context,
    parse_deterministic,
)
from .optimize import ConstraintSet, OptimizationResult

# stable machine-readable error codes
UNKNOWN_DATASET = "UNKNOWN_DATASET"
UNKNOWN_MODEL = "UNKNOWN_MODEL"
CARDINALITY_RANGE = "CARDINALITY_RANGE"
UNKNOWN_PRODUCT = "UNKNOWN_PRODUCT"
CONFLICTING_CONSTRAINTS = "CONFLICTING_CONSTRAINTS"
INFEASIBLE_CARDINALITY = "INFEASIBLE_CARDINALITY"
UNPARSED = "UNPARSED"
DECOMPOSITION = "DECOMPOSITION"
SERVICE_DEGRADED = "SERVICE_DEGRADED"

HELP_TEXT = (
    "I turn plain requests into exact assortment optimizations. Try:\n"
    "  - What is the optimal assortment for the <dataset> dataset using the mnl model?\n"
    "  - I want an optimal assortment where assortment size is limited to 5 products\n"
    "  - What is the optimal assortment without product 4?\n"
    "  - What is the expected revenue if product 2 is to be part of the selection?\n"
    "  - list datasets | reset"
)


@dataclass(frozen=True)
class StructuredError:
    code: str
    message: str
    offending_field: str | None = None

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message, "offending_field": self.offending_field}


@dataclass(frozen=True)
class ValidatedRequest:
    catalog: Catalog
    params: MnlParameters
    constraints: ConstraintSet
    action: Action


@dataclass(frozen=True)
class PlannerReply:
    reply_text: str
    result: OptimizationResult | None
    frame: IntentFrame
    error: StructuredError | None

    def to_dict(self, catalog: Catalog | None = None) -> dict:
        return {
            "reply_text": self.reply_text,
            "result": result_to_dict(self.result, catalog) if self.result else None,
            "frame": self.frame.to_dict(),
            "error": self.error.to_dict() if self.error else None,
        }


def result_to_dict(result: OptimizationResult, catalog: Catalog | None = None) -> dict:
    """Wire document for a result; carries a per-product table when the catalog is known."""
    doc = result.to_dict()
    if catalog is not None:
        doc["products"] = [
            {
                "id": pid,
                "name": catalog.product(pid).name,
                "price": catalog.product(pid).price,
                "choice_probability": result.probabilities[pid],
            }
            for pid in _display_order(result, catalog)
        ]
    return doc


def _display_order(result: OptimizationResult, catalog: Catalog) -> list[int]:
    return sorted(result.assortment.product_ids, key=lambda pid: (-catalog.product(pid).price, pid))


def validate(frame: IntentFrame, store: DataStore) -> ValidatedRequest:
    """Range and consistency checks; raises ValidationError with a stable code.

    Checks run in a fixed order and the first failure wins, so every error
    names exactly one offending field and a remediation hint.
    """
    available = store.dataset_ids()
    if frame.dataset is None:
        raise ValidationError(
            UNKNOWN_DATASET,
            f"no dataset specified. Available datasets: {', '.join(available) or '(none ingested)'}",
            field="dataset",
        )
    try:
        catalog = store.catalog(frame.dataset)
    except UnknownDatasetError as exc:
        raise ValidationError(UNKNOWN_DATASET, str(exc), field="dataset") from None

    models = store.available_models(frame.dataset)
    if frame.model is None:
        raise ValidationError(
            UNKNOWN_MODEL,
            f"no choice model specified for '{frame.dataset}'. Available models: {', '.join(models) or '(none)'}",
            field="model",
        )
    if frame.model not in models:
        raise ValidationError(
            UNKNOWN_MODEL,
            f"model '{frame.model}' is not available for '{frame.dataset}'. "
            f"Available models: {', '.join(models) or '(none)'}",
            field="model",
        )

    n = len(catalog)
    if frame.cardinality is not None and not 1 <= frame.cardinality <= n:
        raise ValidationError(
            CARDINALITY_RANGE,
            f"cardinality must be between 1 and {n}, got {frame.cardinality}",
            field="cardinality",
        )

    include = frame.include or frozenset()
    exclude = frame.exclude or frozenset()
    for label, ids in (("include_products", include), ("exclude_products", exclude)):
        unknown = sorted(ids - catalog.ids)
        if unknown:
            raise ValidationError(
                UNKNOWN_PRODUCT,
                f"product ids {unknown} do not exist in dataset '{frame.dataset}'",
                field=label,
            )
    overlap = include & exclude
    if overlap:
        raise ValidationError(
            CONFLICTING_CONSTRAINTS,
            f"products {sorted(overlap)} are both forced in and excluded",
            field="include_products",
        )
    if frame.cardinality is not None and len(include) > frame.cardinality:
        raise ValidationError(
            INFEASIBLE_CARDINALITY,
            f"{len(include)} forced products cannot fit in an assortment of size {frame.cardinality}",
            field="cardinality",
        )

    try:
        params = store.get_parameters(ParameterKey(frame.dataset, frame.model))
    except UnknownModelError as exc:
        raise ValidationError(UNKNOWN_MODEL, str(exc), field="model") from None
    constraints = ConstraintSet(cardinality=frame.cardinality, include=include, exclude=exclude)
    return ValidatedRequest(catalog=catalog, params=params, constraints=constraints, action=frame.action)


def check_result_obeys_frame(result: OptimizationResult, frame: IntentFrame) -> None:
    """Independent re-check that a solver answer satisfies the frame's constraints.

    Runs at render time as a tripwire against solver regressions; a violation
    is a bug in this package, never a user error.
    """
    chosen = result.assortment.product_ids
    if frame.include and not frame.include <= chosen:
        raise RuntimeError(f"result drops forced products {sorted(frame.include - chosen)}")
    if frame.exclude and chosen & frame.exclude:
        raise RuntimeError(f"result contains excluded products {sorted(chosen & frame.exclude)}")
    if frame.cardinality is not None and len(chosen) > frame.cardinality:
        raise RuntimeError(f"result has {len(chosen)} products, bound was {frame.cardinality}")


def render_reply(
    outcome: OptimizationResult | StructuredError,
    frame: IntentFrame,
    catalog: Catalog | None = None,
) -> str:
    """Deterministic reply template: same inputs, byte-identical text."""
    if isinstance(outcome, StructuredError):
        if outcome.code == UNPARSED:
            return (
                "I could not map that message to an optimization request "
                f"({UNPARSED}). {HELP_TEXT}"
            )
        return f"I could not complete that request ({outcome.code}): {outcome.message}"

    result = outcome
    check_result_obeys_frame(result, frame)
    constraints_text = _constraints_text(frame)
    lines = []
    if frame.action is Action.WHATIF_INCLUDE and frame.include:
        forced = ", ".join(str(i) for i in sorted(frame.include))
        lines.append(
            f"Expected revenue with product(s) {forced} forced into the assortment: "
            f"{result.revenue:.2f} (dataset '{frame.dataset}', model '{frame.model}')."
        )
        lines.append(f"The optimal such assortment ({constraints_text}):")
    else:
        lines.append(
            f"Optimal assortment for dataset '{frame.dataset}' using model "
            f"'{frame.model}' ({constraints_text}):"
        )
    lines.append("")
    lines.append(f"  {'id':>6}  {'name':<28} {'price':>10}  {'choice prob':>11}")
    for pid in _display_order(result, catalog) if catalog else result.assortment.sorted_ids():
        name = catalog.product(pid).name if catalog else ""
        price = catalog.product(pid).price if catalog else float("nan")
        lines.append(f"  {pid:>6}  {name:<28} {price:>10.2f}  {result.probabilities[pid]:>11.4f}")
    if len(result.assortment) == 0:
        lines.append("  (empty assortment)")
    lines.append("")
    lines.append(
        f"Expected revenue: {result.revenue:.2f}. "
        f"No-purchase probability: {result.probabilities[0]:.4f}."
    )
    return "\n".join(lines)


def _constraints_text(frame: IntentFrame) -> str:
    parts = []
    if frame.cardinality is not None:
        parts.append(f"size <= {frame.cardinality}")
    if frame.include:
        parts.append("include {" + ", ".join(str(i) for i in sorted(frame.include)) + "}")
    if frame.exclude:
        parts.append("exclude {" + ", ".join(str(i) for i in sorted(frame.exclude)) + "}")
    return "; ".join(parts) if parts else "no additional constraints"


class Orchestrator:
    """Owns sessions and runs the decompose-merge-validate-solve-render loop."""

    def __init__(
        self,
        store: DataStore,
        mode: str | None = None,
        provider_config: ProviderConfig | None = None,
        provider_transport=None,
    ):
        self.store = store
        self.mode = mode or os.environ.get(ENV_MODE, MODE_DETERMINISTIC)
        if self.mode not in (MODE_DETERMINISTIC, MODE_LLM):
            raise ValueError(f"mode must be '{MODE_DETERMINISTIC}' or '{MODE_LLM}', got '{self.mode}'")
        self.provider_config = provider_config or ProviderConfig.from_env(os.environ)
        self.provider_transport = provider_transport
        self._sessions: dict[str, SessionContext] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    # -- sessions ------------------------------------------------------------

    def create_session(self) -> str:
        session_id = secrets.token_hex(16)
        with self._registry_lock:
            self._sessions[session_id] = SessionContext(session_id=session_id)
            self._locks[session_id] = threading.Lock()
        return session_id

    def has_session(self, session_id: str) -> bool:
        return session_id in self._sessions

    def session(self, session_id: str) -> SessionContext:
        return self._sessions[session_id]

    def _get_or_create(self, session_id: str) -> SessionContext:
        with self._registry_lock:
            if session_id not in self._sessions:
                self._sessions[session_id] = SessionContext(session_id=session_id)
                self._locks[session_id] = threading.Lock()
            return self._sessions[session_id]

    def snapshot_sessions(self, path: str | Path) -> int:
        """Dump all session transcripts and sticky frames to a JSON file.

        Sessions live in memory; this is the optional shutdown snapshot, not a
        durability mechanism.  Returns the number of sessions written.
        """
        with self._registry_lock:
            doc = [
                {
                    "session_id": session.session_id,
                    "sticky_frame": session.sticky_frame.to_dict(),
                    "history": [
                        {"role": t.role, "text": t.text, "timestamp": t.timestamp}
                        for t in session.history
                    ],
                }
                for session in self._sessions.values()
            ]
        Path(path).write_text(json.dumps(doc, ensure_ascii=False, indent=2), encoding="utf-8")
        return len(doc)

    # -- solving (shared by conversation, HTTP /v1/solve, and the CLI) --------

    def solve_frame(self, frame: IntentFrame) -> tuple[OptimizationResult, ValidatedRequest]:
        request = validate(frame, self.store)
        return self._dispatch(request), request

    def _dispatch(self, request: ValidatedRequest) -> OptimizationResult:
        cs = request.constraints
        if cs.unconstrained:
            return optimize.optimize_unconstrained(request.catalog, request.params)
        if request.action is Action.WHATIF_INCLUDE:
            return optimize.whatif_revenue(request.catalog, request.params, cs)
        return optimize.optimize_constrained(request.catalog, request.params, cs)

    # -- conversation ----------------------------------------------------------

    def handle_turn(self, session_id: str, text: str) -> PlannerReply:
        session = self._get_or_create(session_id)
        with self._locks[session_id]:
            session.append("user", text)
            reply = self._run_turn(session, text)
            session.append("assistant", reply.reply_text)
            return reply

    def _run_turn(self, session: SessionContext, text: str) -> PlannerReply:
        delta, problem = self._decompose(session, text)
        if problem is not None:
            return PlannerReply(
                reply_text=render_reply(problem, session.sticky_frame),
                result=None,
                frame=session.sticky_frame,
                error=problem,
            )

        if delta.action is Action.RESET:
            session.sticky_frame = EMPTY_FRAME
            return PlannerReply(
                reply_text="Context cleared: dataset, model, and constraints forgotten.",
                result=None,
                frame=IntentFrame(action=Action.RESET),
                error=None,
            )
        if delta.action is Action.HELP:
            return PlannerReply(reply_text=HELP_TEXT, result=None, frame=delta, error=None)
        if delta.action is Action.LIST_DATASETS:
            return PlannerReply(
                reply_text=self._render_datasets(),
                result=None,
                frame=delta,
                error=None,
            )

        merged = merge_context(session.sticky_frame, delta)
        try:
            request = validate(merged, self.store)
        except ValidationError as exc:
            error = StructuredError(code=exc.code, message=str(exc), offending_field=exc.field)
            return PlannerReply(
                reply_text=render_reply(error, merged),
                result=None,
                frame=merged,
                error=error,
            )
        result = self._dispatch(request)
        session.sticky_frame = merged
        return PlannerReply(
            reply_text=render_reply(result, merged, request.catalog),
            result=result,
            frame=merged,
            error=None,
        )

    def _decompose(self, session: SessionContext, text: str) -> tuple[IntentFrame | None, StructuredError | None]:
        if self.mode == MODE_DETERMINISTIC:
            frame = parse_deterministic(text)
            if frame is None:
                return None, StructuredError(code=UNPARSED, message="no rule matched the message")
            return frame, None
        try:
            outcome = decompose_with_llm(session, text, self.provider_config, self.provider_transport)
        except ProviderUnavailableError as exc:
            return None, StructuredError(
                code=SERVICE_DEGRADED,
                message=f"{exc}. Retry shortly or switch {ENV_MODE}={MODE_DETERMINISTIC}.",
            )
        except DecompositionError as exc:
            return None, StructuredError(code=DECOMPOSITION, message=str(exc))
        if isinstance(outcome, NoToolCall):
            return None, StructuredError(
                code=UNPARSED,
                message=outcome.text or "the assistant returned no tool call",
            )
        try:
            return outcome.to_frame(), None
        except DecompositionError as exc:
            return None, StructuredError(code=DECOMPOSITION, message=str(exc))

    def _render_datasets(self) -> str:
        descriptors = self.store.list_datasets()
        if not descriptors:
            return "No datasets ingested yet."
        lines = ["Available datasets:"]
        for d in descriptors:
            models = ", ".join(sorted(d.available_models)) or "(no parameters stored)"
            lines.append(f"  - {d.dataset_id}: {d.product_count} products; models: {models}")
        return "\n".join(lines)
