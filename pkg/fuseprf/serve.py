"""
Read-only HTTP search service.

``POST /search`` runs one query through ``HybridPipeline`` with the server's
base configuration, optionally overridden per request; ``GET /healthz`` reports
readiness. Indexes load in a background thread at startup and both endpoints
answer 503 until loading has finished.
"""

import logging
import threading
from contextlib import asynccontextmanager
from typing import Any, Callable, Dict, List, Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import ValidationError

from .config import deep_merge
from .errors import ConfigError, DimensionMismatchError, MissingIdError
from .pipeline import HybridPipeline, RetrievalIndexes
from .schemas import PipelineConfig, Query, SearchRequest

logger = logging.getLogger("fuseprf_logger")


def _field_errors(errors: List[Dict[str, Any]]) -> List[Dict[str, str]]:
    return [
        {"field": ".".join(str(part) for part in error["loc"]), "message": error["msg"]}
        for error in errors
    ]


def _bad_request(detail: Any) -> JSONResponse:
    return JSONResponse(status_code=400, content={"detail": detail})


def _unavailable() -> JSONResponse:
    return JSONResponse(status_code=503, content={"detail": "indexes are loading"})


class SearchService:
    """
    Holds the loaded indexes and answers search requests.

    Attributes:
        base_config (PipelineConfig): Configuration every request starts from.
        indexes (Optional[RetrievalIndexes]): None until loading has finished.
        load_error (Optional[str]): Message of a failed load, if any.
    """

    def __init__(self, loader: Callable[[], RetrievalIndexes], base_config: PipelineConfig):
        self.loader = loader
        self.base_config = base_config
        self.indexes: Optional[RetrievalIndexes] = None
        self.load_error: Optional[str] = None
        self._thread: Optional[threading.Thread] = None

    @property
    def ready(self) -> bool:
        return self.indexes is not None

    def start_loading(self) -> None:
        self._thread = threading.Thread(target=self._load, name="fuseprf-loader", daemon=True)
        self._thread.start()

    def _load(self) -> None:
        try:
            self.indexes = self.loader()
            logger.info("Service ready")
        except Exception as e:
            self.load_error = str(e)
            logger.error(f"Error loading indexes: {str(e)}")

    def effective_config(self, overrides: Optional[Dict[str, Any]]) -> PipelineConfig:
        """Raises ValidationError when the merged configuration is invalid."""
        if not overrides:
            return self.base_config
        return PipelineConfig.model_validate(deep_merge(self.base_config.prune(), overrides))

    def search(self, request: SearchRequest) -> JSONResponse:
        if not self.ready:
            return _unavailable()
        try:
            config = self.effective_config(request.overrides)
        except ValidationError as e:
            return _bad_request(_field_errors(e.errors()))
        try:
            pipeline = HybridPipeline(self.indexes, config)
            result = pipeline.run_query(
                Query(id=request.query_id, text=request.query_text), request.query_vector
            )
        except (ConfigError, DimensionMismatchError, MissingIdError) as e:
            return _bad_request(str(e))
        logger.debug(f"Served query {request.query_id} with tag {config.tag()}")
        return JSONResponse(
            content={
                "query_id": request.query_id,
                "results": [{"passage_id": pid, "score": score} for pid, score in result.final],
                "config": config.prune(),
                "tag": config.tag(),
                "query_weight_source": result.query_weight_source,
            }
        )


def create_app(loader: Callable[[], RetrievalIndexes], base_config: PipelineConfig) -> FastAPI:
    """
    Build the FastAPI application.

    Args:
        loader: Called once, off the event loop, to load the indexes.
        base_config: Server default pipeline configuration.

    Returns:
        FastAPI: The application; loading starts with the lifespan.
    """
    service = SearchService(loader, base_config)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        service.start_loading()
        yield
        logger.info("Service shutting down")

    app = FastAPI(title="fuseprf", description="Hybrid sparse/dense search", lifespan=lifespan)
    app.state.service = service

    @app.exception_handler(RequestValidationError)
    async def request_validation_handler(request: Request, exc: RequestValidationError):
        return _bad_request(_field_errors(exc.errors()))

    @app.get("/healthz")
    def healthz():
        if not service.ready:
            content = {"detail": "indexes are loading"}
            if service.load_error:
                content["error"] = service.load_error
            return JSONResponse(status_code=503, content=content)
        dense = service.indexes.dense
        return {
            "status": "ok",
            "passages": len(dense) if dense is not None else None,
            "sparse": {
                backend.value: retriever.doc_count
                for backend, retriever in service.indexes.sparse.items()
            },
        }

    @app.post("/search")
    def search(request: SearchRequest):
        return service.search(request)

    return app
