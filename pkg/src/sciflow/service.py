"""Annotation service backing the verification workflow.

Data root layout: one directory per item under the root, each containing
`auto.json` (the automatically extracted graph), an optional figure image,
and `log.json` (append-only edit log, created on first edit). Mutations are
serialized per item; stale version tokens are rejected so concurrent
sessions cannot clobber each other.
"""

from __future__ import annotations

import base64
import threading
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response

from .docio import read_document, write_document
from .errors import ConfigError
from .graph import DiagramGraph, graph_document, parse_graph_document, serialize_graph
from .verify import (
    EditLog,
    NotFoundError,
    ProtocolError,
    VerifyError,
    agreement,
    apply_edit,
    log_document,
    parse_edit_document,
    parse_log_document,
    replay_log,
)

_IMAGE_TYPES = {".png": "image/png", ".jpg": "image/jpeg", ".jpeg": "image/jpeg", ".gif": "image/gif"}


@dataclass
class _Item:
    item_id: str
    path: Path
    auto: DiagramGraph
    verified: DiagramGraph
    log: EditLog
    version: int
    lock: threading.Lock


class ItemStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        if not self.root.is_dir():
            raise ConfigError(f"data root {self.root} is not a directory")
        self._items: dict[str, _Item] = {}
        for item_dir in sorted(p for p in self.root.iterdir() if p.is_dir()):
            auto_path = item_dir / "auto.json"
            if not auto_path.exists():
                continue
            auto = parse_graph_document(auto_path.read_bytes())
            log = EditLog(graph_id=auto.graph_id)
            log_path = item_dir / "log.json"
            if log_path.exists():
                log = parse_log_document(read_document(log_path))
            verified = replay_log(auto, log)
            self._items[item_dir.name] = _Item(
                item_id=item_dir.name,
                path=item_dir,
                auto=auto,
                verified=verified,
                log=log,
                version=len(log.entries),
                lock=threading.Lock(),
            )
        if not self._items:
            raise ConfigError(f"data root {self.root} contains no items (need <item>/auto.json)")

    def ids(self) -> list[str]:
        return sorted(self._items)

    def get(self, item_id: str) -> _Item:
        if item_id not in self._items:
            raise NotFoundError(f"item {item_id!r} not found")
        return self._items[item_id]

    def apply(self, item_id: str, version: int, edit_docs: list[dict]) -> tuple[int, list[str]]:
        """Apply an edit batch transactionally under the item lock."""
        item = self.get(item_id)
        with item.lock:
            if version != item.version:
                raise StaleVersionError(item.version)
            graph = item.verified
            produced = []
            for doc in edit_docs:
                edit = parse_edit_document(doc)
                graph, entries = apply_edit(graph, edit)
                produced.extend(entries)
            new_log = EditLog(
                graph_id=item.log.graph_id,
                entries=item.log.entries + tuple(produced),
                total_time=item.log.total_time,
            )
            write_document(item.path / "log.json", log_document(new_log))
            item.verified = graph
            item.log = new_log
            item.version = len(new_log.entries)
            return item.version, [e.edit_id for e in produced]


class StaleVersionError(VerifyError):
    code = "VERSION_CONFLICT"

    def __init__(self, current_version: int):
        self.current_version = current_version
        super().__init__(f"stale version token; current version is {current_version}")


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": {"code": code, "message": message}})


def _figure_payload(item: _Item) -> dict | None:
    for candidate in sorted(item.path.iterdir()):
        media_type = _IMAGE_TYPES.get(candidate.suffix.lower())
        if media_type:
            return {
                "media_type": media_type,
                "base64": base64.b64encode(candidate.read_bytes()).decode("ascii"),
            }
    return None


def create_app(store: ItemStore, auth_token: str | None = None) -> FastAPI:
    app = FastAPI(title="sciflow annotation service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["GET", "POST"],
        allow_headers=["Authorization", "Content-Type"],
    )

    @app.middleware("http")
    async def check_auth(request: Request, call_next):
        if auth_token is not None:
            supplied = request.headers.get("authorization", "")
            if supplied != f"Bearer {auth_token}":
                return _error(401, "UNAUTHORIZED", "missing or invalid token")
        return await call_next(request)

    @app.exception_handler(StaleVersionError)
    async def stale_version(request: Request, exc: StaleVersionError):
        return _error(409, exc.code, str(exc))

    @app.exception_handler(NotFoundError)
    async def not_found(request: Request, exc: NotFoundError):
        return _error(404, exc.code, str(exc))

    @app.exception_handler(ProtocolError)
    async def protocol_error(request: Request, exc: ProtocolError):
        return _error(400, exc.code, str(exc))

    @app.exception_handler(VerifyError)
    async def verify_error(request: Request, exc: VerifyError):
        return _error(400, exc.code, str(exc))

    @app.get("/api/items")
    def list_items():
        items = []
        for item_id in store.ids():
            item = store.get(item_id)
            items.append(
                {
                    "item_id": item_id,
                    "graph_id": item.auto.graph_id,
                    "node_count": len(item.auto.nodes),
                    "edge_count": len(item.auto.edges),
                    "version": item.version,
                }
            )
        return {"items": items}

    @app.get("/api/items/{item_id}")
    def get_item(item_id: str):
        item = store.get(item_id)
        return {
            "item_id": item_id,
            "version": item.version,
            "figure": _figure_payload(item),
            "auto_graph": graph_document(item.auto),
            "verified_graph": graph_document(item.verified),
            "log": log_document(item.log),
        }

    @app.post("/api/items/{item_id}/edits")
    async def post_edits(item_id: str, request: Request):
        try:
            body = await request.json()
        except Exception:
            return _error(400, "BAD_REQUEST", "body must be JSON")
        if not isinstance(body, dict) or "version" not in body or "edits" not in body:
            return _error(400, "BAD_REQUEST", "body must carry 'version' and 'edits'")
        if not isinstance(body["edits"], list):
            return _error(400, "BAD_REQUEST", "'edits' must be an array")
        version, applied = store.apply(item_id, int(body["version"]), body["edits"])
        return {"version": version, "applied": applied}

    @app.get("/api/items/{item_id}/agreement")
    def get_agreement(item_id: str):
        item = store.get(item_id)
        return agreement(item.auto, item.verified).as_document()

    @app.get("/api/items/{item_id}/export")
    def export(item_id: str):
        item = store.get(item_id)
        return Response(content=serialize_graph(item.verified), media_type="application/json")

    return app


def serve(data_root: str | Path, port: int, host: str = "127.0.0.1", auth_token: str | None = None) -> None:
    """Run the annotation service until stopped."""
    import uvicorn

    store = ItemStore(data_root)
    app = create_app(store, auth_token=auth_token)
    uvicorn.run(app, host=host, port=port, log_level="warning")
