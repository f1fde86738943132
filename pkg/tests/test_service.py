from __future__ import annotations

import json

import httpx
import pytest
from fastapi.testclient import TestClient

from assortplan import Orchestrator, ProviderConfig
from assortplan.cli import main as cli_main
from assortplan.service import create_app

TURN_1 = "What is the optimal assortment for the Ta-Feng Dataset using the MNL model?"
TURN_2 = "I want an optimal assortment where assortment size is limited to 5 products"


@pytest.fixture
def client(tafeng_store):
    app = create_app(orchestrator=Orchestrator(tafeng_store, mode="deterministic"))
    return TestClient(app)


class TestSessions:
    def test_create_session(self, client):
        response = client.post("/v1/sessions")
        assert response.status_code == 201
        assert len(response.json()["session_id"]) == 32

    def test_message_round_trip(self, client):
        session = client.post("/v1/sessions").json()["session_id"]
        response = client.post(f"/v1/sessions/{session}/messages", json={"text": TURN_1})
        assert response.status_code == 200
        body = response.json()
        assert body["error"] is None
        assert body["result"]["assortment"] == [1, 2, 3, 4, 5, 6]
        assert body["frame"]["dataset"] == "ta-feng"
        assert "40.91" in body["reply_text"]
        # result document carries the product table for UI rendering
        assert [row["id"] for row in body["result"]["products"]] == [1, 2, 3, 4, 5, 6]
        assert body["result"]["products"][0]["name"] == "Oolong Tea 600ml"

    def test_follow_up_inherits_context(self, client):
        session = client.post("/v1/sessions").json()["session_id"]
        client.post(f"/v1/sessions/{session}/messages", json={"text": TURN_1})
        body = client.post(f"/v1/sessions/{session}/messages", json={"text": TURN_2}).json()
        assert body["error"] is None
        assert len(body["result"]["assortment"]) == 5
        assert body["frame"]["cardinality"] == 5
        assert body["frame"]["dataset"] == "ta-feng"

    def test_unknown_session_404(self, client):
        response = client.post("/v1/sessions/deadbeef/messages", json={"text": "hi"})
        assert response.status_code == 404
        assert response.json()["code"] == "UNKNOWN_SESSION"
        assert client.get("/v1/sessions/deadbeef/history").status_code == 404

    def test_empty_text_400(self, client):
        session = client.post("/v1/sessions").json()["session_id"]
        response = client.post(f"/v1/sessions/{session}/messages", json={"text": "  "})
        assert response.status_code == 400

    def test_history_mirrors_turns(self, client):
        session = client.post("/v1/sessions").json()["session_id"]
        client.post(f"/v1/sessions/{session}/messages", json={"text": TURN_1})
        client.post(f"/v1/sessions/{session}/messages", json={"text": TURN_2})
        turns = client.get(f"/v1/sessions/{session}/history").json()
        assert [t["role"] for t in turns] == ["user", "assistant", "user", "assistant"]
        assert turns[0]["text"] == TURN_1
        stamps = [t["timestamp"] for t in turns]
        assert stamps == sorted(stamps)

    def test_interleaved_sessions_do_not_share_state(self, client):
        s1 = client.post("/v1/sessions").json()["session_id"]
        s2 = client.post("/v1/sessions").json()["session_id"]
        client.post(f"/v1/sessions/{s1}/messages", json={"text": TURN_1})
        leaked = client.post(f"/v1/sessions/{s2}/messages", json={"text": TURN_2}).json()
        assert leaked["error"]["code"] == "UNKNOWN_DATASET"
        fine = client.post(f"/v1/sessions/{s1}/messages", json={"text": TURN_2}).json()
        assert fine["error"] is None

    def test_validation_error_rendered_conversationally(self, client):
        session = client.post("/v1/sessions").json()["session_id"]
        body = client.post(
            f"/v1/sessions/{session}/messages",
            json={"text": "optimal assortment for the nope dataset using the mnl model"},
        ).json()
        assert body["error"]["code"] == "UNKNOWN_DATASET"
        assert "ta-feng" in body["reply_text"]


class TestDatasets:
    def test_listing(self, client):
        body = client.get("/v1/datasets").json()
        assert body == [
            {
                "dataset_id": "ta-feng",
                "product_count": 8,
                "available_models": ["mnl"],
                "source_path": body[0]["source_path"],
            }
        ]
        assert body[0]["source_path"].endswith("catalog.csv")


class TestSolve:
    def test_stateless_solve(self, client):
        response = client.post(
            "/v1/solve", json={"dataset": "ta-feng", "model": "mnl", "cardinality": 5}
        )
        assert response.status_code == 200
        body = response.json()
        assert body["assortment"] == [1, 2, 3, 4, 5]
        assert body["algorithm"] == "dinkelbach"

    def test_validation_errors_are_400_with_codes(self, client):
        response = client.post("/v1/solve", json={"dataset": "nope", "model": "mnl"})
        assert response.status_code == 400
        assert response.json()["code"] == "UNKNOWN_DATASET"
        response = client.post("/v1/solve", json={"dataset": "ta-feng", "model": "mnl", "cardinality": 0})
        assert response.status_code == 400
        assert response.json()["code"] == "CARDINALITY_RANGE"
        response = client.post(
            "/v1/solve",
            json={"dataset": "ta-feng", "model": "mnl", "include_products": [1], "exclude_products": [1]},
        )
        assert response.status_code == 400
        assert response.json()["code"] == "CONFLICTING_CONSTRAINTS"

    def test_solve_equals_cli_output_byte_for_byte(self, client, tafeng_store, capsys):
        api_body = client.post(
            "/v1/solve",
            json={"dataset": "ta-feng", "model": "mnl", "cardinality": 5, "exclude_products": [2]},
        ).content
        code = cli_main(
            [
                "solve",
                "--dataset", "ta-feng",
                "--model", "mnl",
                "--cardinality", "5",
                "--exclude", "2",
                "--data-dir", str(tafeng_store.root),
            ]
        )
        assert code == 0
        machine = capsys.readouterr().out.split("---\n", 1)[1].strip()
        assert machine.encode() == api_body


class TestDegradedMode:
    def test_provider_down_maps_to_503(self, tafeng_store):
        def handler(request):
            raise httpx.ConnectError("unreachable")

        orchestrator = Orchestrator(
            tafeng_store,
            mode="llm",
            provider_config=ProviderConfig(base_url="http://stub/v1"),
            provider_transport=httpx.MockTransport(handler),
        )
        client = TestClient(create_app(orchestrator=orchestrator))
        session = client.post("/v1/sessions").json()["session_id"]
        response = client.post(f"/v1/sessions/{session}/messages", json={"text": "hello"})
        assert response.status_code == 503
        assert response.json()["code"] == "SERVICE_DEGRADED"
