"""HTTP facade over a single annotation session.

Every mutating endpoint persists the session archive before acknowledging,
so a killed process can restart from disk without losing any acknowledged
label. Errors carry machine-readable codes in a structured body:
``{"error": {"code": ..., "message": ...}}``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from fastapi import FastAPI, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .corpus import DelimiterConfig, ParseError, TokenizerConfig, serialize_record
from .quality import StoppingThresholds
from .scorer import ModelConfig, TrainConfig
from .session import Session, SessionConfig, create_session

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8000
    session_path: Union[str, Path] = "session.zip"
    cors_origins: tuple[str, ...] = ()
    max_request_bytes: int = 10 * 1024 * 1024

    def __post_init__(self):
        if not (1 <= self.port <= 65535):
            raise ValueError("port out of range")
        if self.max_request_bytes < 1:
            raise ValueError("max_request_bytes must be positive")


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


class LabelIn(BaseModel):
    id: str
    text: str


class CorpusIn(BaseModel):
    text: str
    kind: Optional[str] = None
    k: Optional[int] = None
    seed: Optional[int] = None
    retrain_interval: Optional[int] = None
    tokenizer: Optional[dict] = None
    delimiters: Optional[dict] = None
    thresholds: Optional[dict] = None
    model: Optional[dict] = None
    train: Optional[dict] = None


def _session_config(body: CorpusIn) -> SessionConfig:
    try:
        kwargs: dict = {"background_training": True}
        if body.kind is not None:
            kwargs["kind"] = body.kind
        if body.k is not None:
            kwargs["k"] = body.k
        if body.seed is not None:
            kwargs["seed"] = body.seed
        if body.retrain_interval is not None:
            kwargs["retrain_interval"] = body.retrain_interval
        if body.tokenizer:
            kwargs["tok"] = TokenizerConfig(**body.tokenizer)
        if body.delimiters:
            kwargs["delim"] = DelimiterConfig(**body.delimiters)
        if body.thresholds:
            kwargs["thresholds"] = StoppingThresholds(**body.thresholds)
        if body.model:
            kwargs["model"] = ModelConfig(**body.model)
        if body.train:
            kwargs["train"] = TrainConfig(**body.train)
        return SessionConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ServiceError(400, "invalid_config", str(exc)) from exc


def create_app(config: ServiceConfig = ServiceConfig()) -> FastAPI:
    """Build the application; loads an existing session archive if present."""
    app = FastAPI(title="annotation service")
    if config.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=list(config.cors_origins),
            allow_methods=["*"],
            allow_headers=["*"],
        )
    app.state.config = config
    app.state.session = None
    session_path = Path(config.session_path)
    if session_path.exists():
        app.state.session = Session.load(session_path)  # corrupt file -> startup error
        logger.info("resumed session with %d labels", app.state.session.labeled_count())

    @app.exception_handler(ServiceError)
    async def _service_error(_request: Request, exc: ServiceError) -> JSONResponse:
        return JSONResponse(
            status_code=exc.status,
            content={"error": {"code": exc.code, "message": exc.message}},
        )

    @app.middleware("http")
    async def _limit_size(request: Request, call_next):
        length = request.headers.get("content-length")
        if length and int(length) > config.max_request_bytes:
            return JSONResponse(
                status_code=413,
                content={"error": {"code": "too_large", "message": "request body too large"}},
            )
        return await call_next(request)

    def session_or_409() -> Session:
        if app.state.session is None:
            raise ServiceError(409, "no_session", "upload a corpus first")
        return app.state.session

    def persist(session: Session) -> None:
        session.save(session_path)

    @app.get("/health")
    def health() -> dict:
        session = app.state.session
        return {
            "status": "ok",
            "session": session is not None,
            "labeled_count": session.labeled_count() if session else 0,
        }

    @app.post("/corpus")
    def upload_corpus(body: CorpusIn) -> dict:
        cfg = _session_config(body)
        try:
            session = create_session(body.text, cfg)
        except ParseError as exc:
            raise ServiceError(400, "parse_error", str(exc)) from exc
        app.state.session = session
        persist(session)
        return {
            "ok": True,
            "corpus_size": len(session.corpus),
            "signatures": sorted(session.index.groups),
        }

    @app.get("/batch")
    def get_batch(size: int = Query(default=10)) -> dict:
        session = session_or_409()
        if size < 1:
            raise ServiceError(400, "invalid_size", "size must be >= 1")
        batch = session.request_batch(size)
        persist(session)  # the round-robin cursor moved
        items = []
        for item in batch.items:
            record = session.corpus.get(item.record_id)
            items.append(
                {
                    "id": item.record_id,
                    "data": serialize_record(record, session.config.delim),
                    "suggestion": item.suggestion.text if item.suggestion else None,
                    "pairs": [list(p) for p in record.pairs],
                }
            )
        return {"batch": items}

    @app.post("/labels")
    def post_label(body: LabelIn) -> dict:
        session = session_or_409()
        try:
            label = session.submit_label(body.id, body.text)
        except ValueError as exc:
            msg = str(exc)
            if "unknown id" in msg:
                raise ServiceError(404, "unknown_record", msg) from exc
            if "already labeled" in msg:
                raise ServiceError(409, "already_labeled", msg) from exc
            raise ServiceError(400, "empty_text", msg) from exc
        persist(session)  # before acknowledging: a crash must not lose this label
        return {"ok": True, "source": label.source, "labeled_count": session.labeled_count()}

    @app.get("/stats")
    def get_stats() -> dict:
        session = session_or_409()
        stats = session.stats()
        stats["history"] = [
            {
                "labeled_count": n,
                "ttr": rep.ttr,
                "msttr": rep.msttr,
                "unique_tokens": rep.unique_tokens,
                "unique_trigrams": rep.unique_trigrams,
                "shannon_token_entropy": rep.shannon_token_entropy,
                "conditional_bigram_entropy": rep.conditional_bigram_entropy,
            }
            for n, rep in session.history
        ]
        return stats

    @app.get("/export")
    def get_export() -> dict:
        session = session_or_409()
        bundle = session.export()
        return {
            "data": bundle.to_lines(session.config.delim, session.config.kind),
            "stats": bundle.report.to_text(),
        }

    @app.post("/train")
    def post_train() -> dict:
        session = session_or_409()
        persist(session)
        try:
            session.train_now(wait=False)
        except RuntimeError as exc:
            raise ServiceError(409, "training_running", str(exc)) from exc
        return {"ok": True, "state": session.status.state}

    return app


def serve(config: ServiceConfig = ServiceConfig()) -> None:
    """Run the service; blocks until shutdown."""
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port)
