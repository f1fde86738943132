"""assortplan: conversational assortment planning with exact MNL optimization.

A planner asks for revenue-maximizing assortments in plain language; prompts
are decomposed into structured tool calls (offline grammar or LLM function
calling), validated, solved exactly, and answered in readable text. The
solvers, estimators, and datastore are also usable directly as a library.
"""

from .choice import (
    Assortment,
    Catalog,
    MnlParameters,
    Product,
    choice_probabilities,
    choice_probability,
    expected_revenue,
)
from .datastore import DataStore, DatasetDescriptor, IngestReport, ParameterKey
from .estimation import (
    MleFit,
    OfferSetObservation,
    TransactionRecord,
    estimate_frequency,
    estimate_mle,
    simulate_choices,
)
from .intent import (
    Action,
    IntentFrame,
    ProviderConfig,
    SessionContext,
    ToolCall,
    build_tool_schema,
    decompose_with_llm,
    merge_context,
    parse_deterministic,
)
from .optimize import (
    ConstraintSet,
    OptimizationResult,
    brute_force_optimal,
    optimize_constrained,
    optimize_unconstrained,
    whatif_revenue,
)
from .orchestrator import Orchestrator, PlannerReply, render_reply, validate

__version__ = "0.1.0"

__all__ = [
    "Action",
    "Assortment",
    "Catalog",
    "ConstraintSet",
    "DataStore",
    "DatasetDescriptor",
    "IngestReport",
    "IntentFrame",
    "MleFit",
    "MnlParameters",
    "OfferSetObservation",
    "OptimizationResult",
    "Orchestrator",
    "ParameterKey",
    "PlannerReply",
    "Product",
    "ProviderConfig",
    "SessionContext",
    "ToolCall",
    "TransactionRecord",
    "brute_force_optimal",
    "build_tool_schema",
    "choice_probabilities",
    "choice_probability",
    "decompose_with_llm",
    "estimate_frequency",
    "estimate_mle",
    "expected_revenue",
    "merge_context",
    "optimize_constrained",
    "optimize_unconstrained",
    "parse_deterministic",
    "render_reply",
    "simulate_choices",
    "validate",
    "whatif_revenue",
]
