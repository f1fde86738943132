from __future__ import annotations

import json

import httpx
import pytest

from assortplan import (
    Action,
    ConstraintSet,
    IntentFrame,
    Orchestrator,
    ProviderConfig,
    brute_force_optimal,
    validate,
)
from assortplan import optimize as optimize_module
from assortplan.errors import ValidationError
from assortplan.orchestrator import (
    CARDINALITY_RANGE,
    CONFLICTING_CONSTRAINTS,
    DECOMPOSITION,
    INFEASIBLE_CARDINALITY,
    SERVICE_DEGRADED,
    UNKNOWN_DATASET,
    UNKNOWN_MODEL,
    UNKNOWN_PRODUCT,
    UNPARSED,
    render_reply,
)

from conftest import tafeng_fixture_params, tafeng_fixture_products

TURN_1 = "What is the optimal assortment for the Ta-Feng Dataset using the MNL model?"
TURN_2 = "I want an optimal assortment where assortment size is limited to 5 products"


def frame(**kwargs) -> IntentFrame:
    base = {"action": Action.OPTIMIZE, "dataset": "ta-feng", "model": "mnl"}
    base.update(kwargs)
    return IntentFrame(**base)


class TestValidate:
    def test_clean_frame_passes(self, tafeng_store):
        request = validate(frame(), tafeng_store)
        assert request.constraints == ConstraintSet()
        assert len(request.catalog) == 8

    @pytest.mark.parametrize(
        "bad, code, field",
        [
            (dict(dataset="nope"), UNKNOWN_DATASET, "dataset"),
            (dict(dataset=None), UNKNOWN_DATASET, "dataset"),
            (dict(model="nested-logit"), UNKNOWN_MODEL, "model"),
            (dict(model=None), UNKNOWN_MODEL, "model"),
            (dict(cardinality=0), CARDINALITY_RANGE, "cardinality"),
            (dict(cardinality=9), CARDINALITY_RANGE, "cardinality"),
            (dict(include=frozenset({77})), UNKNOWN_PRODUCT, "include_products"),
            (dict(exclude=frozenset({77})), UNKNOWN_PRODUCT, "exclude_products"),
            (dict(include=frozenset({7}), exclude=frozenset({7})), CONFLICTING_CONSTRAINTS, "include_products"),
            (dict(include=frozenset({1, 2, 3}), cardinality=2), INFEASIBLE_CARDINALITY, "cardinality"),
        ],
    )
    def test_error_codes(self, tafeng_store, bad, code, field):
        with pytest.raises(ValidationError) as err:
            validate(frame(**bad), tafeng_store)
        assert err.value.code == code
        assert err.value.field == field

    def test_unknown_dataset_hint_lists_available(self, tafeng_store):
        with pytest.raises(ValidationError) as err:
            validate(frame(dataset="nope"), tafeng_store)
        assert "ta-feng" in str(err.value)


class TestGoldenDialogue:
    def test_two_turn_transcript(self, tafeng_store):
        orchestrator = Orchestrator(tafeng_store, mode="deterministic")
        session = orchestrator.create_session()

        reply1 = orchestrator.handle_turn(session, TURN_1)
        assert reply1.error is None
        # independently verified optimum: brute force over the fixture
        catalog = tafeng_store.catalog("ta-feng")
        oracle = brute_force_optimal(catalog, tafeng_fixture_params(), ConstraintSet())
        assert reply1.result.assortment == oracle.assortment
        assert reply1.result.assortment.sorted_ids() == (1, 2, 3, 4, 5, 6)
        assert reply1.result.revenue == pytest.approx(90.0 / 2.2, abs=1e-12)
        assert f"{reply1.result.revenue:.2f}" in reply1.reply_text

        reply2 = orchestrator.handle_turn(session, TURN_2)
        assert reply2.error is None
        assert len(reply2.result.assortment) == 5
        assert reply2.frame.dataset == "ta-feng"
        assert reply2.frame.model == "mnl"
        assert reply2.frame.cardinality == 5
        oracle5 = brute_force_optimal(catalog, tafeng_fixture_params(), ConstraintSet(cardinality=5))
        assert reply2.result.revenue == pytest.approx(oracle5.revenue, rel=1e-12)

    def test_transcripts_are_byte_identical_across_runs(self, tafeng_store):
        def run():
            orchestrator = Orchestrator(tafeng_store, mode="deterministic")
            session = orchestrator.create_session()
            return [
                orchestrator.handle_turn(session, TURN_1).reply_text,
                orchestrator.handle_turn(session, TURN_2).reply_text,
            ]

        first, second = run(), run()
        assert [t.encode() for t in first] == [t.encode() for t in second]

    def test_unparsed_leaves_sticky_frame_alone(self, tafeng_store):
        orchestrator = Orchestrator(tafeng_store, mode="deterministic")
        session = orchestrator.create_session()
        orchestrator.handle_turn(session, TURN_1)
        before = orchestrator.session(session).sticky_frame
        reply = orchestrator.handle_turn(session, "qwertyuiop")
        assert reply.error.code == UNPARSED
        assert reply.result is None
        assert orchestrator.session(session).sticky_frame == before

    def test_reset_clears_context(self, tafeng_store):
        orchestrator = Orchestrator(tafeng_store, mode="deterministic")
        session = orchestrator.create_session()
        orchestrator.handle_turn(session, TURN_1)
        reply = orchestrator.handle_turn(session, "reset")
        assert "cleared" in reply.reply_text.lower()
        follow_up = orchestrator.handle_turn(session, TURN_2)
        assert follow_up.error.code == UNKNOWN_DATASET  # nothing inherited anymore

    def test_validation_failure_keeps_sticky_frame(self, tafeng_store):
        orchestrator = Orchestrator(tafeng_store, mode="deterministic")
        session = orchestrator.create_session()
        orchestrator.handle_turn(session, TURN_1)
        reply = orchestrator.handle_turn(session, "optimal assortment without product 99")
        assert reply.error.code == UNKNOWN_PRODUCT
        assert orchestrator.session(session).sticky_frame.exclude is None
        healthy = orchestrator.handle_turn(session, TURN_2)
        assert healthy.error is None

    def test_session_isolation(self, tafeng_store):
        orchestrator = Orchestrator(tafeng_store, mode="deterministic")
        s1 = orchestrator.create_session()
        s2 = orchestrator.create_session()
        orchestrator.handle_turn(s1, TURN_1)
        leaked = orchestrator.handle_turn(s2, TURN_2)
        assert leaked.error.code == UNKNOWN_DATASET  # s2 never learned the dataset
        ok = orchestrator.handle_turn(s1, TURN_2)
        assert ok.error is None

    def test_whatif_reply_leads_with_revenue(self, tafeng_store):
        orchestrator = Orchestrator(tafeng_store, mode="deterministic")
        session = orchestrator.create_session()
        orchestrator.handle_turn(session, TURN_1)
        reply = orchestrator.handle_turn(
            session, "What is the expected revenue if product 8 is to be part of the selection?"
        )
        assert reply.error is None
        assert reply.frame.action is Action.WHATIF_INCLUDE
        assert 8 in reply.result.assortment
        assert reply.reply_text.startswith("Expected revenue with product(s) 8")

    def test_history_records_both_sides(self, tafeng_store):
        orchestrator = Orchestrator(tafeng_store, mode="deterministic")
        session = orchestrator.create_session()
        orchestrator.handle_turn(session, TURN_1)
        history = orchestrator.session(session).history
        assert [t.role for t in history] == ["user", "assistant"]
        assert history[0].text == TURN_1


class TestSolverGate:
    """Validation failures must never reach a solver."""

    @pytest.fixture
    def tripwired(self, tafeng_store, monkeypatch):
        calls = []

        def tripwire(*args, **kwargs):
            calls.append(args)
            raise AssertionError("solver invoked on an invalid frame")

        for name in ("optimize_unconstrained", "optimize_constrained", "whatif_revenue", "brute_force_optimal"):
            monkeypatch.setattr(optimize_module, name, tripwire)
        return Orchestrator(tafeng_store, mode="deterministic"), calls

    @pytest.mark.parametrize(
        "text, code",
        [
            ("optimal assortment for the nope dataset using the mnl model", UNKNOWN_DATASET),
            ("optimal assortment for the ta-feng dataset using the nested-logit model", UNKNOWN_MODEL),
            ("optimal assortment for the ta-feng dataset using the mnl model, size limited to 0 products", CARDINALITY_RANGE),
            ("optimal assortment for the ta-feng dataset using the mnl model without product 99", UNKNOWN_PRODUCT),
            ("optimal assortment for the ta-feng dataset using the mnl model including product 7 without product 7", CONFLICTING_CONSTRAINTS),
            ("optimal assortment for the ta-feng dataset using the mnl model containing products 1, 2 and 3, size limited to 2 products", INFEASIBLE_CARDINALITY),
        ],
    )
    def test_each_code_short_circuits(self, tripwired, text, code):
        orchestrator, calls = tripwired
        reply = orchestrator.handle_turn(orchestrator.create_session(), text)
        assert reply.error.code == code
        assert reply.result is None
        assert calls == []


class TestRendering:
    def test_success_text_contains_revenue_and_rows(self, tafeng_store):
        orchestrator = Orchestrator(tafeng_store, mode="deterministic")
        result, request = orchestrator.solve_frame(frame())
        text = render_reply(result, frame(), request.catalog)
        assert "40.91" in text
        assert "Oolong Tea 600ml" in text
        assert "no additional constraints" in text
        for pid in result.assortment:
            assert f"\n  {pid:>6}  " in text

    def test_unknown_dataset_error_lists_datasets(self, tafeng_store):
        orchestrator = Orchestrator(tafeng_store, mode="deterministic")
        reply = orchestrator.handle_turn(
            orchestrator.create_session(), "optimal assortment for the nope dataset using the mnl model"
        )
        assert "ta-feng" in reply.reply_text
        assert UNKNOWN_DATASET in reply.reply_text

    def test_constraints_sentence(self, tafeng_store):
        orchestrator = Orchestrator(tafeng_store, mode="deterministic")
        result, request = orchestrator.solve_frame(frame(cardinality=5, exclude=frozenset({8})))
        text = render_reply(result, frame(cardinality=5, exclude=frozenset({8})), request.catalog)
        assert "size <= 5" in text
        assert "exclude {8}" in text


class TestResultGuard:
    def test_render_recheck_catches_violated_constraints(self, tafeng_store):
        from assortplan.orchestrator import check_result_obeys_frame

        orchestrator = Orchestrator(tafeng_store, mode="deterministic")
        result, _ = orchestrator.solve_frame(frame(cardinality=5))
        check_result_obeys_frame(result, frame(cardinality=5))  # fine
        with pytest.raises(RuntimeError):
            check_result_obeys_frame(result, frame(cardinality=3))
        with pytest.raises(RuntimeError):
            check_result_obeys_frame(result, frame(exclude=frozenset({1})))
        with pytest.raises(RuntimeError):
            check_result_obeys_frame(result, frame(include=frozenset({8})))


class TestConcurrency:
    def test_same_session_turns_serialize(self, tafeng_store):
        import threading

        orchestrator = Orchestrator(tafeng_store, mode="deterministic")
        session = orchestrator.create_session()
        errors = []

        def turn(text):
            try:
                orchestrator.handle_turn(session, text)
            except Exception as exc:  # noqa: BLE001 - record to fail the test
                errors.append(exc)

        threads = [threading.Thread(target=turn, args=(TURN_1,)) for _ in range(4)]
        threads += [threading.Thread(target=turn, args=(TURN_2,)) for _ in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert errors == []
        history = orchestrator.session(session).history
        assert len(history) == 16  # 8 user turns, 8 assistant turns
        # strict serialization: every user turn is answered before the next begins
        assert [t.role for t in history] == ["user", "assistant"] * 8

    def test_distinct_sessions_run_concurrently(self, tafeng_store):
        import threading

        orchestrator = Orchestrator(tafeng_store, mode="deterministic")
        ids = [orchestrator.create_session() for _ in range(6)]
        done = []

        def turn(session_id):
            reply = orchestrator.handle_turn(session_id, TURN_1)
            done.append(reply.error is None)

        threads = [threading.Thread(target=turn, args=(s,)) for s in ids]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert done == [True] * 6


class TestSnapshot:
    def test_snapshot_round_trips_transcripts(self, tafeng_store, tmp_path):
        orchestrator = Orchestrator(tafeng_store, mode="deterministic")
        session = orchestrator.create_session()
        orchestrator.handle_turn(session, TURN_1)
        path = tmp_path / "snapshot.json"
        count = orchestrator.snapshot_sessions(path)
        assert count == 1
        doc = json.loads(path.read_text(encoding="utf-8"))
        assert doc[0]["session_id"] == session
        assert [t["role"] for t in doc[0]["history"]] == ["user", "assistant"]
        assert doc[0]["sticky_frame"]["dataset"] == "ta-feng"


class TestLlmMode:
    def make(self, tafeng_store, responses):
        import test_intent as helpers

        transport = helpers.scripted_provider(responses)
        return Orchestrator(
            tafeng_store,
            mode="llm",
            provider_config=ProviderConfig(base_url="http://stub/v1", api_key="k", model="m"),
            provider_transport=transport,
        )

    def test_tool_call_drives_solver(self, tafeng_store):
        import test_intent as helpers

        orchestrator = self.make(
            tafeng_store, [helpers.tool_call_response({"dataset": "ta-feng", "model": "mnl", "cardinality": 5})]
        )
        reply = orchestrator.handle_turn(orchestrator.create_session(), "limit to five please")
        assert reply.error is None
        assert len(reply.result.assortment) == 5

    def test_malformed_tool_call_is_decomposition_error(self, tafeng_store):
        import test_intent as helpers

        orchestrator = self.make(
            tafeng_store,
            [helpers.tool_call_response({"dataset": "ta-feng", "model": "mnl", "cardinality": "five"})],
        )
        reply = orchestrator.handle_turn(orchestrator.create_session(), "limit to five please")
        assert reply.error.code == DECOMPOSITION
        assert reply.result is None

    def test_provider_down_degrades_gracefully(self, tafeng_store):
        def handler(request):
            raise httpx.ConnectError("unreachable")

        orchestrator = Orchestrator(
            tafeng_store,
            mode="llm",
            provider_config=ProviderConfig(base_url="http://stub/v1"),
            provider_transport=httpx.MockTransport(handler),
        )
        reply = orchestrator.handle_turn(orchestrator.create_session(), "anything")
        assert reply.error.code == SERVICE_DEGRADED
        assert "INTERASSORT_MODE" in reply.reply_text

    def test_plain_text_reply_becomes_clarification(self, tafeng_store):
        orchestrator = self.make(
            tafeng_store, [{"choices": [{"message": {"role": "assistant", "content": "which dataset?"}}]}]
        )
        reply = orchestrator.handle_turn(orchestrator.create_session(), "optimize")
        assert reply.error.code == UNPARSED
        assert reply.result is None
