#!/usr/bin/env python3
"""Regenerate frontend test fixtures from the real tracker API.

Runs the backend in-process (no network), drives a few scenarios over the
actual HTTP layer, and freezes the responses under tests/fixtures/. Run
from the frontend directory after backend changes:

    python3 scripts/generate_fixtures.py
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi.testclient import TestClient

from buglife import agents as ag
from buglife import kernel as k
from buglife.http_api import create_app
from buglife.service import BugTracker, ServiceConfig

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

CHAT_TURNS = [
    "the login page freezes after I click submit",
    "I expected to be redirected to my account dashboard",
    "1. open the login page; 2. enter credentials; 3. click submit",
    "os: linux, app_version: 2.4.1, browser: firefox",
]


def fixed_clock_factory():
    tick = {"n": 0}

    def clock() -> str:
        tick["n"] += 1
        return f"2026-08-10T12:{tick['n'] // 60:02d}:{tick['n'] % 60:02d}+00:00"

    return clock


def auth(token: str) -> dict:
    return {"Authorization": f"Bearer {token}"}


def build_client() -> TestClient:
    tracker = BugTracker(ServiceConfig.demo(), clock=fixed_clock_factory())
    return TestClient(create_app(tracker), raise_server_exceptions=False)


def chat_to_submission(client: TestClient) -> tuple[str, list[dict]]:
    responses = []
    first = client.post(
        "/bugs", json={"text": CHAT_TURNS[0], "metadata": {}, "title": "login freeze"},
        headers=auth("user-token"),
    ).json()
    responses.append(first)
    case_id = first["case_id"]
    for turn in CHAT_TURNS[1:]:
        response = client.post(
            f"/bugs/{case_id}/dialogue", json={"answer": turn},
            headers=auth("user-token"),
        ).json()
        responses.append(response)
        if response.get("status") == "submitted":
            break
    return case_id, responses


def decide(client: TestClient, token: str, role: str, decision: str) -> dict:
    tasks = client.get("/tasks", params={"role": role}, headers=auth(token)).json()["tasks"]
    return client.post(
        f"/tasks/{tasks[0]['task_id']}/decision",
        json={"decision": decision},
        headers=auth(token),
    ).json()


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    written: list[str] = []

    def dump(name: str, payload) -> None:
        (FIXTURES / name).write_text(
            json.dumps(payload, indent=2, sort_keys=False) + "\n", encoding="utf-8"
        )
        written.append(name)

    # Scenario A: reporter chat producing a case that pauses at the PM.
    client = build_client()
    case_id, chat_responses = chat_to_submission(client)
    dump("chat_flow.json", {
        "entered": {
            "title": "login freeze",
            "observed_behavior": CHAT_TURNS[0],
            "expected_behavior": CHAT_TURNS[1],
            "steps": CHAT_TURNS[2],
            "environment": CHAT_TURNS[3],
        },
        "responses": chat_responses,
    })
    pm_tasks = client.get(
        "/tasks", params={"role": "project_manager"}, headers=auth("pm-token")
    ).json()
    dump("tasks_project_manager.json", pm_tasks)
    dump("tasks_empty.json", client.get(
        "/tasks", params={"role": "tester"}, headers=auth("qa-token")
    ).json())
    dump("case_fix_decision.json", client.get(
        f"/bugs/{case_id}", headers=auth("pm-token")
    ).json())
    timeline_before = client.get(
        f"/bugs/{case_id}/timeline", headers=auth("pm-token")
    ).json()
    dump("timeline_fix_decision.json", timeline_before)

    # Drive scenario A onward: PM approves the fix, lead approves assignment,
    # developer merges. The case pauses at the reporter's final verification.
    decide(client, "pm-token", "project_manager", "Fix")
    dump("tasks_team_lead.json", client.get(
        "/tasks", params={"role": "team_lead"}, headers=auth("pm-token")
    ).json())
    decide(client, "pm-token", "team_lead", "Approve")
    tracker: BugTracker = client.app.state.tracker
    developer_tasks = client.get(
        "/tasks", params={"role": "developer"}, headers=auth("dev-token")
    ).json()
    dump("tasks_developer.json", developer_tasks)
    decide(client, "dev-token", "developer", "Merge")

    # Scenario B: decision flow — the reporter's acceptance closes the case,
    # so the timeline grows by exactly one row (no agent steps follow).
    user_queue = client.get(
        "/tasks", params={"role": "end_user"}, headers=auth("user-token")
    ).json()
    verification_before = client.get(
        f"/bugs/{case_id}/timeline", headers=auth("user-token")
    ).json()
    decision_response = client.post(
        f"/tasks/{user_queue['tasks'][0]['task_id']}/decision",
        json={"decision": "Accept"},
        headers=auth("user-token"),
    ).json()
    verification_after = client.get(
        f"/bugs/{case_id}/timeline", headers=auth("user-token")
    ).json()
    dump("decision_flow.json", {
        "queue": user_queue,
        "decision_response": decision_response,
        "timeline_before": verification_before,
        "timeline_after": verification_after,
    })
    try:
        tracker.broker.put_artifact(
            case_id, "OriginalReport", b"tamper",
            tracker.descriptors[ag.AgentKind.LOCALIZER],
        )
    except Exception:
        pass
    dump("timeline_closed_valid.json", client.get(
        f"/bugs/{case_id}/timeline", headers=auth("pm-token")
    ).json())

    # Scenario C: invalid branch (duplicate history) for the no-developer check.
    config = ServiceConfig.demo()
    config.history = [
        ag.HistoricalReport(
            "BUG-7", "login freeze",
            "the login page freezes after I click submit "
            "I expected to be redirected to my account dashboard",
        )
    ]
    invalid_client = TestClient(
        create_app(BugTracker(config, clock=fixed_clock_factory())),
        raise_server_exceptions=False,
    )
    invalid_case, _ = chat_to_submission(invalid_client)
    decide(invalid_client, "cs-token", "customer_support", "Pass")
    decide(invalid_client, "user-token", "end_user", "Accept")
    dump("timeline_closed_invalid.json", invalid_client.get(
        f"/bugs/{invalid_case}/timeline", headers=auth("cs-token")
    ).json())

    print(f"wrote {len(written)} fixtures to {FIXTURES}:")
    for name in written:
        print(f"  {name}")


if __name__ == "__main__":
    main()
