"""Command-line entry point: ingest, estimate, solve, serve, chat.

Exit codes: 0 success, 1 usage error, 2 validation/data error, 3 runtime or
provider error.  ``solve`` prints the rendered reply, a ``---`` separator,
then the same JSON document POST /v1/solve would return.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .datastore import DataStore, ParameterKey
from .errors import (
    AssortPlanError,
    ProviderUnavailableError,
    ValidationError,
)
from .estimation import estimate_frequency, estimate_mle
from .intent import ENV_MODE, MODE_DETERMINISTIC, MODE_LLM, Action, IntentFrame
from .orchestrator import Orchestrator, render_reply, result_to_dict

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); usage errors are exit 1 here
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="assortplan", description="Conversational assortment planning toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="load a catalog, transactions, or parameters file")
    p_ingest.add_argument("kind", choices=["catalog", "transactions", "parameters"])
    p_ingest.add_argument("--path", required=True)
    p_ingest.add_argument("--dataset", required=False)
    p_ingest.add_argument("--data-dir", default="data")

    p_estimate = sub.add_parser("estimate", help="estimate MNL parameters for a dataset")
    p_estimate.add_argument("--dataset", required=True)
    p_estimate.add_argument("--method", choices=["freq", "mle"], default="freq")
    p_estimate.add_argument("--max-iters", type=int, default=500)
    p_estimate.add_argument("--tol", type=float, default=1e-6)
    p_estimate.add_argument("--data-dir", default="data")

    p_solve = sub.add_parser("solve", help="solve one optimization problem")
    p_solve.add_argument("--dataset", required=True)
    p_solve.add_argument("--model", required=True)
    p_solve.add_argument("--cardinality", type=int, default=None)
    p_solve.add_argument("--include", default=None, help="comma-separated product ids to force in")
    p_solve.add_argument("--exclude", default=None, help="comma-separated product ids to keep out")
    p_solve.add_argument("--data-dir", default="data")

    p_serve = sub.add_parser("serve", help="run the HTTP API")
    p_serve.add_argument("--port", type=int, default=8080)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--data-dir", default="data")
    p_serve.add_argument("--mode", choices=[MODE_DETERMINISTIC, MODE_LLM], default=None)
    p_serve.add_argument("--snapshot-sessions", action="store_true",
                         help="write session transcripts to the data dir on shutdown")

    p_chat = sub.add_parser("chat", help="chat with the planner on stdin/stdout")
    p_chat.add_argument("--mode", choices=[MODE_DETERMINISTIC, MODE_LLM], default=None)
    p_chat.add_argument("--data-dir", default="data")

    return parser


def _parse_id_list(raw: str | None) -> frozenset[int] | None:
    if raw is None:
        return None
    try:
        return frozenset(int(tok) for tok in raw.split(",") if tok.strip())
    except ValueError:
        raise _UsageError(f"expected comma-separated integers, got '{raw}'") from None


def _cmd_ingest(args) -> int:
    store = DataStore(args.data_dir)
    if args.kind == "catalog":
        if not args.dataset:
            raise _UsageError("ingest catalog requires --dataset")
        catalog = store.ingest_catalog(args.path, args.dataset)
        print(f"ingested catalog '{catalog.dataset_id}': {len(catalog)} products")
    elif args.kind == "transactions":
        if not args.dataset:
            raise _UsageError("ingest transactions requires --dataset")
        _, report = store.ingest_transactions(args.path, args.dataset)
        print(
            f"ingested transactions for '{args.dataset.strip().lower()}': "
            f"valid={report.valid_count} skipped={report.skipped_count} "
            f"distinct_users={report.distinct_users}"
        )
    else:
        key, params = store.ingest_parameters(args.path, args.dataset)
        print(
            f"ingested parameters for ({key.dataset_id}, {key.model_id}): "
            f"{len(params.utilities)} utilities, v0={params.v0!r}"
        )
    return EXIT_OK


def _cmd_estimate(args) -> int:
    store = DataStore(args.data_dir)
    catalog = store.catalog(args.dataset)
    key = ParameterKey(args.dataset, "mnl")
    if args.method == "freq":
        records = store.transactions(args.dataset)
        params = estimate_frequency(catalog, records)
        store.put_parameters(key, params)
        print(
            f"estimated frequency parameters for ({key.dataset_id}, mnl) "
            f"from {len(records)} transactions; max utility 1.0, v0=1.0"
        )
    else:
        observations = store.observations(args.dataset)
        fit = estimate_mle(catalog, observations, max_iters=args.max_iters, tol=args.tol)
        store.put_parameters(key, fit.params)
        status = "converged" if fit.converged else "NOT converged"
        print(
            f"estimated MLE parameters for ({key.dataset_id}, mnl) from "
            f"{len(observations)} observations: {status} after {fit.iterations} "
            f"iteration(s), log-likelihood {fit.log_likelihood:.4f}"
        )
    return EXIT_OK


def _cmd_solve(args) -> int:
    from .service import wire_json  # shared wire format with POST /v1/solve

    store = DataStore(args.data_dir)
    orchestrator = Orchestrator(store, mode=MODE_DETERMINISTIC)
    frame = IntentFrame(
        action=Action.OPTIMIZE,
        dataset=args.dataset.strip().lower(),
        model=args.model.strip().lower(),
        cardinality=args.cardinality,
        include=_parse_id_list(args.include),
        exclude=_parse_id_list(args.exclude),
    )
    result, request = orchestrator.solve_frame(frame)
    print(render_reply(result, frame, request.catalog))
    print("---")
    print(wire_json(result_to_dict(result, request.catalog)))
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(data_dir=args.data_dir, mode=args.mode, snapshot_on_shutdown=args.snapshot_sessions)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def _cmd_chat(args) -> int:
    store = DataStore(args.data_dir)
    orchestrator = Orchestrator(store, mode=args.mode)
    session_id = "local"
    print("assortplan chat (EOF to quit)")
    for line in sys.stdin:
        text = line.strip()
        if not text:
            continue
        print(f"you> {text}")
        reply = orchestrator.handle_turn(session_id, text)
        print(reply.reply_text)
        print()
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {
            "ingest": _cmd_ingest,
            "estimate": _cmd_estimate,
            "solve": _cmd_solve,
            "serve": _cmd_serve,
            "chat": _cmd_chat,
        }[args.command]
        return handler(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ProviderUnavailableError as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except AssortPlanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except KeyboardInterrupt:
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
