"""Turning planner prompts into structured optimization requests.

Two decomposition paths produce the same :class:`IntentFrame`:

* ``parse_deterministic`` matches a canonical prompt grammar offline (the
  default; keeps tests and transcripts reproducible with no network).
* ``decompose_with_llm`` posts the conversation to a chat-completions
  endpoint with a function-calling tool attached and parses the returned
  tool call.  The tool schema is validated locally; the provider is never
  trusted to emit well-formed arguments.

Frames from follow-up turns are merged onto the session's sticky frame so a
prompt like "limit the size to 5" inherits the dataset and model chosen
earlier in the conversation.
"""

from __future__ import annotations

import copy
import json
import re
import time
from dataclasses import dataclass, field as dataclass_field
from enum import Enum
from typing import Mapping

import httpx
import jsonschema

from .errors import DecompositionError, ProviderUnavailableError

TOOL_FUNCTION_NAME = "solve_assortment"
DEFAULT_PROVIDER_TIMEOUT = 30.0

MODE_DETERMINISTIC = "deterministic"
MODE_LLM = "llm"

ENV_BASE_URL = "INTERASSORT_LLM_BASE_URL"
ENV_API_KEY = "INTERASSORT_LLM_API_KEY"
ENV_MODEL = "INTERASSORT_LLM_MODEL"
ENV_MODE = "INTERASSORT_MODE"


class Action(str, Enum):
    OPTIMIZE = "optimize"
    WHATIF_INCLUDE = "whatif_include"
    RESET = "reset"
    HELP = "help"
    LIST_DATASETS = "list_datasets"


@dataclass(frozen=True)
class IntentFrame:
    """Structured decomposition of one prompt: action plus slot values.

    A ``None`` slot means "not mentioned in this turn" and inherits from the
    sticky frame on merge; include/exclude are whole-set slots that replace
    (never union with) earlier values.
    """

    action: Action = Action.OPTIMIZE
    dataset: str | None = None
    model: str | None = None
    cardinality: int | None = None
    include: frozenset[int] | None = None
    exclude: frozenset[int] | None = None

    def __post_init__(self):
        if self.include is not None:
            object.__setattr__(self, "include", frozenset(int(i) for i in self.include))
        if self.exclude is not None:
            object.__setattr__(self, "exclude", frozenset(int(i) for i in self.exclude))

    @property
    def is_solve(self) -> bool:
        return self.action in (Action.OPTIMIZE, Action.WHATIF_INCLUDE)

    def to_dict(self) -> dict:
        return {
            "action": self.action.value,
            "dataset": self.dataset,
            "model": self.model,
            "cardinality": self.cardinality,
            "include": sorted(self.include) if self.include else [],
            "exclude": sorted(self.exclude) if self.exclude else [],
        }


EMPTY_FRAME = IntentFrame()


def normalize_dataset_id(text: str) -> str:
    """'Ta-Feng Dataset' -> 'ta-feng': lowercase, drop the noise words, hyphenate."""
    cleaned = text.strip().strip("\"'").lower()
    cleaned = re.sub(r"^the\s+", "", cleaned)
    cleaned = re.sub(r"\s+dataset$", "", cleaned)
    cleaned = re.sub(r"[?.!,;:]+$", "", cleaned).strip()
    return re.sub(r"\s+", "-", cleaned)


_TOOL_SCHEMA = {
    "name": TOOL_FUNCTION_NAME,
    "description": (
        "Solve an assortment optimization request: pick the revenue-maximizing "
        "set of products for a dataset under the given constraints."
    ),
    "parameters": {
        "type": "object",
        "properties": {
            "dataset": {
                "type": "string",
                "description": "Dataset identifier, e.g. 'ta-feng'.",
            },
            "model": {
                "type": "string",
                "enum": ["mnl"],
                "description": "Choice model identifier.",
            },
            "cardinality": {
                "type": "integer",
                "minimum": 1,
                "description": "Upper bound on the number of products offered.",
            },
            "include_products": {
                "type": "array",
                "items": {"type": "integer"},
                "description": "Product ids that must be part of the assortment.",
            },
            "exclude_products": {
                "type": "array",
                "items": {"type": "integer"},
                "description": "Product ids that must not appear in the assortment.",
            },
        },
        "required": ["dataset", "model"],
        "additionalProperties": False,
    },
}


def build_tool_schema() -> dict:
    """The function-calling specification handed to the provider.

    Returns a fresh deep copy each call; serializing two copies yields
    identical bytes.
    """
    return copy.deepcopy(_TOOL_SCHEMA)


@dataclass(frozen=True)
class ToolCall:
    function_name: str
    arguments: Mapping[str, object]

    def to_frame(self) -> IntentFrame:
        """Deserialize the arguments into an IntentFrame, or reject them."""
        if self.function_name != TOOL_FUNCTION_NAME:
            raise DecompositionError(
                f"unexpected function '{self.function_name}'", raw=self.arguments
            )
        args = dict(self.arguments)
        try:
            jsonschema.validate(args, _TOOL_SCHEMA["parameters"])
        except jsonschema.ValidationError as exc:
            raise DecompositionError(f"tool arguments violate the schema: {exc.message}", raw=args) from None
        if isinstance(args.get("cardinality"), bool):
            raise DecompositionError("cardinality must be an integer", raw=args)
        include = args.get("include_products")
        exclude = args.get("exclude_products")
        return IntentFrame(
            action=Action.OPTIMIZE,
            dataset=normalize_dataset_id(args["dataset"]),
            model=str(args["model"]).strip().lower(),
            cardinality=args.get("cardinality"),
            include=frozenset(include) if include is not None else None,
            exclude=frozenset(exclude) if exclude is not None else None,
        )


@dataclass(frozen=True)
class NoToolCall:
    """Provider answered with plain text instead of a tool call."""

    text: str


@dataclass(frozen=True)
class HistoryTurn:
    role: str  # user | assistant | tool
    text: str
    timestamp: float


@dataclass
class SessionContext:
    """Per-conversation state: append-only history plus the sticky frame."""

    session_id: str
    history: list[HistoryTurn] = dataclass_field(default_factory=list)
    sticky_frame: IntentFrame = EMPTY_FRAME

    def append(self, role: str, text: str) -> None:
        self.history.append(HistoryTurn(role=role, text=text, timestamp=time.time()))


# --- deterministic grammar ---------------------------------------------------

_ID_LIST = r"(?P<ids>\d+(?:\s*(?:,|and|&)\s*\d+)*)"

_RE_RESET = re.compile(r"^\s*reset\b", re.I)
_RE_HELP = re.compile(r"^\s*help\b", re.I)
_RE_LIST_DATASETS = re.compile(
    r"\b(?:list|show)\s+(?:the\s+)?(?:available\s+)?datasets?\b|\b(?:what|which)\s+datasets\b", re.I
)

_RE_DATASET = re.compile(
    r"\b(?:assortment|revenue)\s+for\s+(?:the\s+)?(?P<ds>[a-z0-9][a-z0-9 _\-]*?)(?:\s+dataset)?"
    r"(?=\s+using\b|\s+with\b|\s+where\b|\s+and\b|\s+if\b|[,.?!;]|$)",
    re.I,
)
_RE_DATASET_FALLBACK = re.compile(r"\bfor\s+(?:the\s+)?(?P<ds>[a-z0-9][a-z0-9 _\-]*?)\s+dataset\b", re.I)
_RE_MODEL = re.compile(r"\busing\s+(?:the\s+)?(?P<model>[a-z0-9_\-]+)(?:\s+model)?\b", re.I)

_RE_CARDINALITY = (
    re.compile(r"\bsize\s+(?:is\s+)?limit(?:ed)?\s+to\s+(?P<k>\d+)\b", re.I),
    re.compile(r"\blimit(?:ed)?\s+(?:the\s+)?(?:assortment\s+)?size\s+to\s+(?P<k>\d+)\b", re.I),
    re.compile(r"\blimit(?:ed)?\s+to\s+(?P<k>\d+)\s+(?:products?|items?)\b", re.I),
    re.compile(r"\bat\s+most\s+(?P<k>\d+)\s+(?:products?|items?)\b", re.I),
    re.compile(r"\bcardinality\s*(?:of|is|=|:)?\s*(?P<k>\d+)\b", re.I),
)

_RE_EXCLUDE = (
    re.compile(rf"\b(?:exclud(?:e|ing)|without|remov(?:e|ing)|drop(?:ping)?)\s+(?:products?\s+)?{_ID_LIST}", re.I),
    re.compile(rf"\bproducts?\s+{_ID_LIST}\s+(?:cannot|can\s*not|can't|must\s+not|may\s+not)\s+be\s+included\b", re.I),
)

_RE_INCLUDE = (
    re.compile(rf"\b(?:includ(?:e|ing)|must\s+contain|contain(?:s|ing)?|forc(?:e|ing))\s+(?:products?\s+)?{_ID_LIST}", re.I),
    re.compile(
        rf"\bif\s+products?\s+{_ID_LIST}\s+(?:is|are|were|must\s+be|has\s+to\s+be|have\s+to\s+be)?\s*"
        r"(?:to\s+be\s+)?(?:a\s+)?part\b",
        re.I,
    ),
    re.compile(rf"\bproducts?\s+{_ID_LIST}\s+(?:is|are)\s+(?:to\s+be\s+)?(?:a\s+)?part\b", re.I),
)

_RE_OPTIMIZE_TRIGGER = re.compile(
    r"\b(?:optimal|best)\s+assortment\b|\boptimi[sz]e\b|\bmaximi[sz]e\b|\bexpected\s+revenue\b", re.I
)


def _first_int(patterns, text: str) -> int | None:
    for pattern in patterns:
        match = pattern.search(text)
        if match:
            return int(match.group("k"))
    return None


def _id_sets(patterns, text: str) -> frozenset[int] | None:
    found: set[int] = set()
    matched = False
    for pattern in patterns:
        for match in pattern.finditer(text):
            matched = True
            found.update(int(tok) for tok in re.findall(r"\d+", match.group("ids")))
    return frozenset(found) if matched else None


def parse_deterministic(text: str) -> IntentFrame | None:
    """Match the canonical prompt grammar; returns None when nothing matches."""
    if _RE_RESET.search(text):
        return IntentFrame(action=Action.RESET)
    if _RE_HELP.search(text):
        return IntentFrame(action=Action.HELP)
    if _RE_LIST_DATASETS.search(text):
        return IntentFrame(action=Action.LIST_DATASETS)

    dataset = None
    match = _RE_DATASET.search(text) or _RE_DATASET_FALLBACK.search(text)
    if match:
        dataset = normalize_dataset_id(match.group("ds"))
    model_match = _RE_MODEL.search(text)
    model = model_match.group("model").strip().lower() if model_match else None
    cardinality = _first_int(_RE_CARDINALITY, text)
    exclude = _id_sets(_RE_EXCLUDE, text)
    include = _id_sets(_RE_INCLUDE, text)

    any_slot = any(v is not None for v in (dataset, model, cardinality, include, exclude))
    if not any_slot and not _RE_OPTIMIZE_TRIGGER.search(text):
        return None

    action = Action.OPTIMIZE
    if include and re.search(r"\brevenue\b", text, re.I):
        action = Action.WHATIF_INCLUDE
    return IntentFrame(
        action=action,
        dataset=dataset,
        model=model,
        cardinality=cardinality,
        include=include,
        exclude=exclude,
    )


def merge_context(sticky: IntentFrame, delta: IntentFrame) -> IntentFrame:
    """Overlay a turn's frame on the sticky frame: present slots win, absent inherit."""
    if delta.action is Action.RESET:
        return IntentFrame(action=Action.RESET)
    return IntentFrame(
        action=delta.action,
        dataset=delta.dataset if delta.dataset is not None else sticky.dataset,
        model=delta.model if delta.model is not None else sticky.model,
        cardinality=delta.cardinality if delta.cardinality is not None else sticky.cardinality,
        include=delta.include if delta.include is not None else sticky.include,
        exclude=delta.exclude if delta.exclude is not None else sticky.exclude,
    )


# --- provider client ----------------------------------------------------------


@dataclass(frozen=True)
class ProviderConfig:
    base_url: str
    api_key: str = ""
    model: str = ""
    timeout: float = DEFAULT_PROVIDER_TIMEOUT

    @classmethod
    def from_env(cls, env: Mapping[str, str]) -> "ProviderConfig":
        return cls(
            base_url=env.get(ENV_BASE_URL, "").rstrip("/"),
            api_key=env.get(ENV_API_KEY, ""),
            model=env.get(ENV_MODEL, ""),
        )


def _messages_for(context: SessionContext, text: str) -> list[dict]:
    messages = [{"role": turn.role, "content": turn.text} for turn in context.history]
    if not (messages and messages[-1]["role"] == "user" and messages[-1]["content"] == text):
        messages.append({"role": "user", "content": text})
    return messages


def decompose_with_llm(
    context: SessionContext,
    text: str,
    config: ProviderConfig,
    transport: httpx.BaseTransport | None = None,
) -> ToolCall | NoToolCall:
    """Ask the provider to decompose the prompt into a solve_assortment call.

    The full session history rides along (oldest first) so follow-up prompts
    resolve against earlier turns.  Never retried: a turn is at-most-once.
    """
    payload = {
        "model": config.model,
        "messages": _messages_for(context, text),
        "tools": [{"type": "function", "function": build_tool_schema()}],
        "tool_choice": "auto",
    }
    headers = {"Content-Type": "application/json"}
    if config.api_key:
        headers["Authorization"] = f"Bearer {config.api_key}"
    url = config.base_url.rstrip("/") + "/chat/completions"
    try:
        with httpx.Client(transport=transport, timeout=config.timeout) as client:
            response = client.post(url, json=payload, headers=headers)
            response.raise_for_status()
            body = response.json()
    except httpx.HTTPStatusError as exc:
        raise ProviderUnavailableError(
            f"provider returned HTTP {exc.response.status_code}"
        ) from exc
    except (httpx.TransportError, httpx.TimeoutException) as exc:
        raise ProviderUnavailableError(f"provider unreachable: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DecompositionError("provider response is not JSON", raw=response.text) from exc

    try:
        message = body["choices"][0]["message"]
    except (KeyError, IndexError, TypeError):
        raise DecompositionError("provider response lacks choices[0].message", raw=body) from None

    tool_calls = message.get("tool_calls") or []
    if not tool_calls:
        return NoToolCall(text=str(message.get("content") or ""))

    function = tool_calls[0].get("function") or {}
    name = function.get("name", "")
    raw_args = function.get("arguments", "{}")
    if isinstance(raw_args, str):
        try:
            arguments = json.loads(raw_args)
        except json.JSONDecodeError:
            raise DecompositionError("tool arguments are not valid JSON", raw=raw_args) from None
    elif isinstance(raw_args, dict):
        arguments = raw_args
    else:
        raise DecompositionError("tool arguments have an unexpected type", raw=raw_args)

    call = ToolCall(function_name=name, arguments=arguments)
    call.to_frame()  # schema conformance checked locally before anyone trusts it
    return call
