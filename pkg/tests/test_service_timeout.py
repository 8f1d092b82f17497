"""Compute timeout keeps the session single-writer until the worker exits."""

import time

from fastapi.testclient import TestClient

from dspace.canned import parabola_problem
from dspace.problem import problem_to_json
from dspace.service import create_app


def test_timeout_holds_the_session_lock(tmp_path, monkeypatch):
    slow_started = []

    def slow_compute(problem):
        slow_started.append(time.time())
        time.sleep(0.6)
        from dspace.engine import compute_design_space

        return compute_design_space(problem)

    import dspace.service as service_mod

    monkeypatch.setattr(service_mod, "compute_design_space", slow_compute)
    app = create_app(storage_dir=str(tmp_path / "s"), compute_timeout=0.1)
    client = TestClient(app)
    sid = client.post("/sessions", json=problem_to_json(parabola_problem())).json()["id"]

    r = client.post(f"/sessions/{sid}/compute")
    assert r.status_code == 500
    assert r.json()["code"] == "compute_timeout"

    # the abandoned worker is still running: new computes are rejected
    r2 = client.post(f"/sessions/{sid}/compute")
    assert r2.status_code == 409

    # once it finishes the session unlocks again
    time.sleep(1.0)
    monkeypatch.setattr(service_mod, "compute_design_space",
                        __import__("dspace.engine", fromlist=["x"]).compute_design_space)
    r3 = client.post(f"/sessions/{sid}/compute")
    assert r3.status_code == 200
