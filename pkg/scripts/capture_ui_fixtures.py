"""Capture golden service responses for the frontend test suite.

Drives the real HTTP service in-process (TestClient) through the canned
demo session: create, compute, patch a weight, recompute, fetch a slice,
and provoke a 422. Responses are written verbatim as fixtures so the UI
tests compare against exactly what the service emits.
"""

import json
import os

from fastapi.testclient import TestClient

from dspace.canned import parabola_problem
from dspace.problem import problem_to_json
from dspace.service import create_app

HERE = os.path.dirname(os.path.abspath(__file__))
ROOT = os.path.dirname(HERE)
FIXTURES = os.path.join(ROOT, "frontend", "test", "fixtures")


def dump(name: str, payload):
    os.makedirs(FIXTURES, exist_ok=True)
    with open(os.path.join(FIXTURES, name), "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"wrote {name}")


def main():
    import tempfile

    problem = problem_to_json(parabola_problem())
    dump("problem.json", problem)
    with open(os.path.join(ROOT, "frontend", "demo-problem.json"), "w") as fh:
        json.dump(problem, fh, indent=1, sort_keys=True)
        fh.write("\n")

    with tempfile.TemporaryDirectory() as tmp:
        client = TestClient(create_app(storage_dir=tmp))
        created = client.post("/sessions", json=problem).json()
        sid = created["id"]
        dump("created.json", created)

        compute1 = client.post(f"/sessions/{sid}/compute").json()
        dump("compute_baseline.json", compute1)

        patched = client.patch(f"/sessions/{sid}/problem",
                               json={"weights": {"x1": 3.0}}).json()
        dump("patch_weight.json", patched)

        compute2 = client.post(f"/sessions/{sid}/compute").json()
        dump("compute_weighted.json", compute2)

        slice_doc = client.get(
            f"/sessions/{sid}/slice",
            params={"dims": "x1,x2", "resolution": 21}).json()
        dump("slice.json", slice_doc)

        session = client.get(f"/sessions/{sid}").json()
        dump("session.json", session)

        # infeasible-at-setpoint diagnostics (acceptance band below reach)
        bad = json.loads(json.dumps(problem))
        bad["responses"][0]["acceptance"] = {"lower": None, "upper": -5.0}
        sid2 = client.post("/sessions", json=bad).json()["id"]
        r = client.post(f"/sessions/{sid2}/compute")
        assert r.status_code == 422, r.status_code
        doc = r.json()
        doc["_status"] = 422
        dump("compute_422.json", doc)


if __name__ == "__main__":
    main()
