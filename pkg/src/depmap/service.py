"""HTTP service: ``POST /api/v1/dependency-map`` and ``GET /healthz``."""

from __future__ import annotations

import json
import logging
import threading
import time
import uuid
from collections.abc import Callable
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.concurrency import run_in_threadpool
from fastapi.responses import JSONResponse, Response

from .report import AnalysisError, content_hash, run_analysis

log = logging.getLogger(__name__)

ROUTE = "/api/v1/dependency-map"


class ReportCache:
    """TTL cache of serialized reports keyed by (repo path, filter, content hash).

    The hash covers every input byte, so entries never go stale; the TTL
    only bounds memory.
    """

    def __init__(self, ttl: float, clock: Callable[[], float] = time.monotonic) -> None:
        self.ttl = ttl
        self._clock = clock
        self._lock = threading.Lock()
        self._entries: dict[tuple[str, str | None, str], tuple[float, bytes]] = {}
        self.hits = 0
        self.misses = 0

    def get(self, key: tuple[str, str | None, str]) -> bytes | None:
        now = self._clock()
        with self._lock:
            self._evict(now)
            entry = self._entries.get(key)
            if entry is None:
                self.misses += 1
                return None
            self.hits += 1
            return entry[1]

    def put(self, key: tuple[str, str | None, str], body: bytes) -> bytes:
        """Insert unless present; returns the stored body either way."""
        now = self._clock()
        with self._lock:
            entry = self._entries.get(key)
            if entry is not None and now - entry[0] < self.ttl:
                return entry[1]
            self._entries[key] = (now, body)
            return body

    def _evict(self, now: float) -> None:
        stale = [k for k, (t, _) in self._entries.items() if now - t >= self.ttl]
        for k in stale:
            del self._entries[k]

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)


def _field_errors(body: object) -> list[dict]:
    if not isinstance(body, dict):
        return [{"field": "$", "message": "body must be a JSON object"}]
    errors = []
    if "repoPath" not in body:
        errors.append({"field": "repoPath", "message": "required"})
    elif not isinstance(body["repoPath"], str) or not body["repoPath"]:
        errors.append({"field": "repoPath", "message": "must be a non-empty string"})
    if "filter" in body and body["filter"] is not None and not isinstance(body["filter"], str):
        errors.append({"field": "filter", "message": "must be a string"})
    for key in sorted(set(body) - {"repoPath", "filter"}):
        errors.append({"field": key, "message": "unknown field"})
    return errors


def create_app(cache_ttl: float = 300.0) -> FastAPI:
    app = FastAPI(title="depmap", docs_url=None, redoc_url=None, openapi_url=None)
    cache = ReportCache(cache_ttl)
    app.state.cache = cache

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.post(ROUTE)
    async def dependency_map(request: Request) -> Response:
        raw = await request.body()
        try:
            body = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            return JSONResponse({"errors": [{"field": "$", "message": f"invalid JSON: {exc}"}]}, status_code=400)
        errors = _field_errors(body)
        if errors:
            return JSONResponse({"errors": errors}, status_code=400)
        # analysis is blocking; run it off the event loop
        return await run_in_threadpool(_answer, cache, body["repoPath"], body.get("filter"))

    return app


def _answer(cache: ReportCache, repo_path: str, filter: str | None) -> Response:
    try:
        key = (str(Path(repo_path).resolve()), filter, content_hash(repo_path))
        body = cache.get(key)
        if body is None:
            body = cache.put(key, run_analysis(repo_path, filter).dumps())
        return Response(body, media_type="application/json")
    except AnalysisError as exc:
        return JSONResponse({"error": str(exc)}, status_code=422)
    except Exception:
        diagnostic_id = uuid.uuid4().hex
        log.exception("internal failure %s for %s", diagnostic_id, repo_path)
        return JSONResponse({"error": "internal failure", "diagnostic_id": diagnostic_id}, status_code=500)


def parse_bind(bind: str) -> tuple[str, int]:
    host, sep, port = bind.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"bind address must be HOST:PORT, got {bind!r}")
    return host.strip("[]") or "127.0.0.1", int(port)


def serve(bind: str, cache_ttl: float = 300.0) -> None:
    """Run the service until interrupted."""
    import uvicorn

    host, port = parse_bind(bind)
    uvicorn.run(create_app(cache_ttl), host=host, port=port, log_level="info")
