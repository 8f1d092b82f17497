"""HTTP service for interactive design-space exploration.

Sessions hold a problem document, the last result and a revision counter
that increments on every problem update and every recompute. Results are
tagged with the revision they were computed at. Persistence is one JSON
file per session under the storage directory; reloading a session off disk
reproduces GET responses across restarts.

Computes are synchronous with a configurable timeout; a second compute for
the same session while one is in flight is rejected with 409. Every error
response carries a machine-readable code and a human message.
"""

from __future__ import annotations

import json
import math
import os
import re
import threading
from concurrent.futures import ThreadPoolExecutor
from concurrent.futures import TimeoutError as FutureTimeout

import numpy as np
from fastapi import Body, FastAPI, Query, Request
from fastapi.responses import JSONResponse, Response

from . import __version__
from ._kernels import backend_name
from .engine import compute_design_space
from .errors import DspaceError, SpecificationError
from .normalize import normalize_problem
from .problem import canonical_json, problem_from_json

_SESSION_ID = re.compile(r"^s[0-9a-f]{12}$")
_SLICE_MAX_RESOLUTION = 101


def _error(status: int, code: str, message: str, **extra) -> JSONResponse:
    return JSONResponse({"code": code, "message": message, **extra},
                        status_code=status)


class SessionStore:
    """In-memory session map persisted as one JSON file per session."""

    def __init__(self, storage_dir: str):
        self.dir = storage_dir
        os.makedirs(storage_dir, exist_ok=True)
        self._lock = threading.Lock()
        self._sessions: dict[str, dict] = {}
        self._compute_locks: dict[str, threading.Lock] = {}
        self._counter = 0

    def _path(self, sid: str) -> str:
        return os.path.join(self.dir, f"{sid}.json")

    def _persist(self, state: dict):
        tmp = self._path(state["id"]) + ".tmp"
        with open(tmp, "w") as fh:
            json.dump(state, fh)
        os.replace(tmp, self._path(state["id"]))

    def create(self, problem_doc: dict) -> dict:
        with self._lock:
            self._counter += 1
            sid = f"s{self._counter:012x}"
            state = {
                "schema_version": 1,
                "id": sid,
                "revision": 1,
                "problem": problem_doc,
                "result": None,
                "result_revision": None,
            }
            self._sessions[sid] = state
            self._compute_locks[sid] = threading.Lock()
            self._persist(state)
            return state

    def get(self, sid: str) -> dict | None:
        with self._lock:
            state = self._sessions.get(sid)
            if state is None and _SESSION_ID.match(sid or ""):
                try:
                    with open(self._path(sid)) as fh:
                        state = json.load(fh)
                    self._sessions[sid] = state
                    self._compute_locks.setdefault(sid, threading.Lock())
                    # keep new ids from colliding with reloaded ones
                    self._counter = max(self._counter, int(state["id"][1:], 16))
                except FileNotFoundError:
                    return None
            return state

    def compute_lock(self, sid: str) -> threading.Lock:
        with self._lock:
            return self._compute_locks.setdefault(sid, threading.Lock())

    def update(self, state: dict):
        with self._lock:
            self._sessions[state["id"]] = state
            self._persist(state)


def _apply_patch(problem_doc: dict, patch: dict) -> dict:
    """Apply weight/setpoint/acceptance/optimizer updates to a problem doc."""
    doc = json.loads(json.dumps(problem_doc))  # deep copy
    known = {"weights", "setpoints", "acceptance", "optimizer"}
    unknown = set(patch) - known
    if unknown:
        raise SpecificationError(f"unknown patch fields: {sorted(unknown)}")
    params = {p["name"]: p for p in doc["parameters"]}
    for name, w in (patch.get("weights") or {}).items():
        if name not in params:
            raise SpecificationError(f"unknown parameter {name!r} in weights")
        params[name]["weight"] = float(w)
    for name, s in (patch.get("setpoints") or {}).items():
        if name not in params:
            raise SpecificationError(f"unknown parameter {name!r} in setpoints")
        params[name]["setpoint"] = s
    responses = {r["name"]: r for r in doc["responses"]}
    for name, limits in (patch.get("acceptance") or {}).items():
        if name not in responses:
            raise SpecificationError(f"unknown response {name!r} in acceptance")
        acc = responses[name].setdefault("acceptance", {})
        for side in ("lower", "upper"):
            if side in limits:
                acc[side] = limits[side]
    if patch.get("optimizer"):
        doc.setdefault("optimizer", {}).update(patch["optimizer"])
    problem_from_json(doc)  # validate before committing
    return doc


def create_app(storage_dir: str = "dspace-sessions", token: str | None = None,
               compute_timeout: float = 120.0, ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="dspace service", version=__version__)
    store = SessionStore(storage_dir)
    executor = ThreadPoolExecutor(max_workers=4)

    @app.middleware("http")
    async def _auth(request: Request, call_next):
        if token and request.url.path != "/health":
            supplied = request.headers.get("authorization", "")
            if supplied != f"Bearer {token}":
                return _error(401, "unauthorized", "missing or invalid API token")
        return await call_next(request)

    from fastapi.exceptions import RequestValidationError

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_request: Request, exc: RequestValidationError):
        # keep the error contract uniform: machine-readable code + message
        first = exc.errors()[0] if exc.errors() else {}
        loc = ".".join(str(x) for x in first.get("loc", ()))
        return _error(422, "validation",
                      f"{loc}: {first.get('msg', 'invalid request')}")

    @app.get("/health")
    def health():
        return {"status": "ok", "backend": backend_name, "version": __version__}

    @app.post("/sessions", status_code=201)
    def create_session(problem: dict = Body(...)):
        try:
            problem_from_json(problem)
        except DspaceError as exc:
            return _error(400, exc.code, str(exc))
        state = store.create(problem)
        return {"id": state["id"], "revision": state["revision"]}

    @app.get("/sessions/{sid}")
    def get_session(sid: str):
        state = store.get(sid)
        if state is None:
            return _error(404, "unknown_session", f"no session {sid!r}")
        return state

    @app.patch("/sessions/{sid}/problem")
    def patch_problem(sid: str, patch: dict = Body(...)):
        state = store.get(sid)
        if state is None:
            return _error(404, "unknown_session", f"no session {sid!r}")
        try:
            state["problem"] = _apply_patch(state["problem"], patch)
        except DspaceError as exc:
            return _error(400, exc.code, str(exc))
        state["revision"] += 1
        store.update(state)
        return {"id": sid, "revision": state["revision"]}

    @app.post("/sessions/{sid}/compute")
    def compute(sid: str,
                pass2: str | None = Query(default=None),
                starts: int | None = Query(default=None),
                seed: int | None = Query(default=None)):
        state = store.get(sid)
        if state is None:
            return _error(404, "unknown_session", f"no session {sid!r}")
        lock = store.compute_lock(sid)
        if not lock.acquire(blocking=False):
            return _error(409, "compute_in_flight",
                          "a compute for this session is already running")
        release_now = True
        try:
            try:
                problem = problem_from_json(state["problem"])
                overrides = {}
                if pass2 is not None:
                    overrides["pass2_method"] = pass2
                if starts is not None:
                    overrides["n_starts"] = starts
                if seed is not None:
                    overrides["seed"] = seed
                if overrides:
                    problem = problem.with_config(**overrides)
            except DspaceError as exc:
                return _error(400, exc.code, str(exc))

            future = executor.submit(compute_design_space, problem)
            try:
                result = future.result(timeout=compute_timeout)
            except FutureTimeout:
                # the worker is still running: keep the session locked (409
                # for new computes) until it finishes, then discard it
                release_now = False

                def _release_when_done():
                    try:
                        future.result()
                    except Exception:
                        pass
                    finally:
                        lock.release()

                threading.Thread(target=_release_when_done, daemon=True).start()
                return _error(500, "compute_timeout",
                              f"compute exceeded {compute_timeout}s")
            except DspaceError as exc:
                return _error(400, exc.code, str(exc))

            state["revision"] += 1
            result_doc = result.to_json()
            state["result"] = result_doc
            state["result_revision"] = state["revision"]
            store.update(state)
            if result.failure and result.failure.get("stage") == "setpoint_check":
                return _error(
                    422, "infeasible_at_setpoint",
                    result.failure["message"],
                    diagnostics=result.failure,
                    revision=state["revision"],
                    result=result_doc,
                )
            body = ('{"revision":' + str(state["revision"])
                    + ',"result":' + canonical_json(result_doc) + "}")
            return Response(content=body, media_type="application/json")
        finally:
            if release_now:
                lock.release()

    @app.get("/sessions/{sid}/slice")
    def slice_margins(sid: str, dims: str, fixed: str = "",
                      resolution: int = Query(default=41, ge=5,
                                              le=_SLICE_MAX_RESOLUTION)):
        state = store.get(sid)
        if state is None:
            return _error(404, "unknown_session", f"no session {sid!r}")
        try:
            problem = problem_from_json(state["problem"])
        except DspaceError as exc:
            return _error(400, exc.code, str(exc))

        dim_names = [d.strip() for d in dims.split(",") if d.strip()]
        if len(dim_names) != 2 or dim_names[0] == dim_names[1]:
            return _error(400, "bad_dims", "dims must name two distinct parameters")
        nprob = normalize_problem(problem)
        for d in dim_names:
            if d not in nprob.dim_index:
                return _error(400, "bad_dims", f"unknown/inactive dimension {d!r}")

        fixed_norm = nprob.setpoints.copy()
        if fixed:
            for part in fixed.split(","):
                if not part:
                    continue
                name, _, value = part.partition("=")
                if name not in nprob.dim_index:
                    return _error(400, "bad_fixed", f"unknown dimension {name!r}")
                d = nprob.dims[nprob.dim_index[name]]
                try:
                    fixed_norm[nprob.dim_index[name]] = (float(value) - d.center) / d.half
                except ValueError:
                    return _error(400, "bad_fixed", f"{part!r}: not a number")

        ia, ib = nprob.dim_index[dim_names[0]], nprob.dim_index[dim_names[1]]
        axis = np.linspace(-1.0, 1.0, resolution)
        A, B = np.meshgrid(axis, axis, indexing="ij")
        pts = np.tile(fixed_norm, (resolution * resolution, 1))
        pts[:, ia] = A.ravel()
        pts[:, ib] = B.ravel()

        combined = np.full(pts.shape[0], np.inf)
        per_response = {}
        for resp in nprob.responses:
            til, tiu, _, _ = resp.exact_bounds(pts)
            m = np.full(pts.shape[0], np.inf)
            if math.isfinite(resp.lower):
                m = np.minimum(m, til - resp.lower)
            if math.isfinite(resp.upper):
                m = np.minimum(m, resp.upper - tiu)
            per_response[resp.name] = m.reshape(resolution, resolution).tolist()
            combined = np.minimum(combined, m)

        da, db = nprob.dims[ia], nprob.dims[ib]
        return {
            "schema_version": 1,
            "dims": dim_names,
            "revision": state["revision"],
            "result_revision": state["result_revision"],
            "resolution": resolution,
            "axes": {
                dim_names[0]: [float(da.center + da.half * v) for v in axis],
                dim_names[1]: [float(db.center + db.half * v) for v in axis],
            },
            "margin": combined.reshape(resolution, resolution).tolist(),
            "per_response": per_response,
        }

    if ui_dir and os.path.isdir(ui_dir):
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
