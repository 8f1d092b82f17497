"""HTTP service: session lifecycle, compute, slices, error contract."""

import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from dspace.canned import parabola_problem
from dspace.problem import canonical_json, problem_to_json
from dspace.service import create_app


@pytest.fixture
def client(tmp_path):
    app = create_app(storage_dir=str(tmp_path / "sessions"))
    return TestClient(app)


def _parabola_doc():
    return problem_to_json(parabola_problem())


def test_health(client):
    body = client.get("/health").json()
    assert body["status"] == "ok"
    assert body["backend"] in ("native", "pure")


def test_create_compute_get_flow(client):
    r = client.post("/sessions", json=_parabola_doc())
    assert r.status_code == 201
    sid = r.json()["id"]
    assert r.json()["revision"] == 1

    r = client.post(f"/sessions/{sid}/compute")
    assert r.status_code == 200
    body = r.json()
    assert body["revision"] == 2
    assert body["result"]["feasible"] is True

    state = client.get(f"/sessions/{sid}").json()
    assert state["revision"] == 2
    assert state["result_revision"] == 2
    assert state["result"] == body["result"]


def test_http_result_matches_cli_bytes(client, tmp_path):
    from click.testing import CliRunner

    from dspace.cli import main

    path = tmp_path / "p.json"
    path.write_text(json.dumps(_parabola_doc()))
    cli_out = CliRunner().invoke(main, ["compute", str(path)]).output.strip()

    sid = client.post("/sessions", json=_parabola_doc()).json()["id"]
    body = client.post(f"/sessions/{sid}/compute").json()
    assert canonical_json(body["result"]) == cli_out


def test_patch_bumps_revision_and_result_tagged(client):
    sid = client.post("/sessions", json=_parabola_doc()).json()["id"]
    r = client.patch(f"/sessions/{sid}/problem",
                     json={"weights": {"x1": 2.0}})
    assert r.status_code == 200
    assert r.json()["revision"] == 2
    r = client.post(f"/sessions/{sid}/compute")
    assert r.json()["revision"] == 3
    state = client.get(f"/sessions/{sid}").json()
    assert state["result_revision"] == 3
    assert state["problem"]["parameters"][0]["weight"] == 2.0


def test_patch_validation(client):
    sid = client.post("/sessions", json=_parabola_doc()).json()["id"]
    r = client.patch(f"/sessions/{sid}/problem",
                     json={"weights": {"nope": 2.0}})
    assert r.status_code == 400
    assert r.json()["code"] == "specification"
    r = client.patch(f"/sessions/{sid}/problem", json={"bogus": 1})
    assert r.status_code == 400


def test_unknown_session_404(client):
    assert client.get("/sessions/s000000000bad").status_code == 404
    assert client.post("/sessions/s000000000bad/compute").status_code == 404


def test_malformed_problem_400(client):
    r = client.post("/sessions", json={"parameters": []})
    assert r.status_code == 400
    body = r.json()
    assert "code" in body and "message" in body


def test_infeasible_setpoint_422(client):
    doc = _parabola_doc()
    doc["responses"][0]["acceptance"] = {"lower": None, "upper": -5.0}
    sid = client.post("/sessions", json=doc).json()["id"]
    r = client.post(f"/sessions/{sid}/compute")
    assert r.status_code == 422
    body = r.json()
    assert body["code"] == "infeasible_at_setpoint"
    assert "y" in body["message"]
    assert body["diagnostics"]["stage"] == "setpoint_check"


def test_slice_endpoint_parabola_contour(client):
    sid = client.post("/sessions", json=_parabola_doc()).json()["id"]
    r = client.get(f"/sessions/{sid}/slice",
                   params={"dims": "x1,x2", "resolution": 41})
    assert r.status_code == 200
    body = r.json()
    assert body["dims"] == ["x1", "x2"]
    margin = np.array(body["margin"])
    assert margin.shape == (41, 41)
    # analytic contour oracle: margin = -(x1^2 + x2), zero at x2 = -x1^2
    x1 = np.array(body["axes"]["x1"])
    x2 = np.array(body["axes"]["x2"])
    for i in (0, 10, 20, 30, 40):
        for j in (0, 20, 40):
            expected = 0.0 - (x1[i] ** 2 + x2[j])
            assert margin[i, j] == pytest.approx(expected, abs=1e-9)


def test_slice_fixed_value_1d_crossing(client):
    # fix x2 = 0: feasibility requires x1^2 <= 0, so only x1 = 0 is on the
    # boundary and every other x1 is infeasible
    sid = client.post("/sessions", json=_parabola_doc()).json()["id"]
    r = client.get(f"/sessions/{sid}/slice",
                   params={"dims": "x1,x2", "fixed": "x2=0", "resolution": 21})
    assert r.status_code == 200  # fixed only constrains non-slice dims: no-op
    r = client.get(f"/sessions/{sid}/slice",
                   params={"dims": "x1,x1", "resolution": 21})
    assert r.status_code == 400


def test_slice_resolution_cap(client):
    sid = client.post("/sessions", json=_parabola_doc()).json()["id"]
    r = client.get(f"/sessions/{sid}/slice",
                   params={"dims": "x1,x2", "resolution": 500})
    assert r.status_code == 422  # fastapi query validation


def test_persistence_across_restart(tmp_path):
    storage = str(tmp_path / "sessions")
    app1 = create_app(storage_dir=storage)
    c1 = TestClient(app1)
    sid = c1.post("/sessions", json=_parabola_doc()).json()["id"]
    c1.post(f"/sessions/{sid}/compute")
    state1 = c1.get(f"/sessions/{sid}").json()

    app2 = create_app(storage_dir=storage)
    c2 = TestClient(app2)
    state2 = c2.get(f"/sessions/{sid}").json()
    assert state2 == state1


def test_token_auth(tmp_path):
    app = create_app(storage_dir=str(tmp_path / "s"), token="sekrit")
    c = TestClient(app)
    assert c.get("/health").status_code == 200  # health stays open
    assert c.post("/sessions", json=_parabola_doc()).status_code == 401
    ok = c.post("/sessions", json=_parabola_doc(),
                headers={"Authorization": "Bearer sekrit"})
    assert ok.status_code == 201


def test_compute_query_overrides(client):
    sid = client.post("/sessions", json=_parabola_doc()).json()["id"]
    r = client.post(f"/sessions/{sid}/compute", params={"pass2": "slsqp"})
    assert r.status_code == 200
    assert r.json()["result"]["config"]["pass2_method"] == "slsqp"
    r = client.post(f"/sessions/{sid}/compute", params={"pass2": "bogus"})
    assert r.status_code == 400
