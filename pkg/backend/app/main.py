import logging

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from starlette.middleware.base import BaseHTTPMiddleware
from starlette.requests import Request as StarletteRequest

from app.core.config import APP_NAME, APP_VERSION, load_pipeline_config, settings
from app.core.errors import PipelineError
from app.core.logging import setup_logging
from app.routers import evaluation, linking, simulation

app = FastAPI(
    title=APP_NAME,
    version=APP_VERSION,
    description="Online action-tube linking, evaluation and simulation API"
)

logger = logging.getLogger("app.main")


class ExceptionHandlingMiddleware(BaseHTTPMiddleware):
    """Outermost middleware: log unhandled exceptions and answer with a JSON 500"""

    async def dispatch(self, request: StarletteRequest, call_next):
        try:
            return await call_next(request)
        except Exception:
            logger.exception("Unhandled exception during request: %s %s", request.method, request.url)
            return JSONResponse(status_code=500, content={"detail": "Internal server error"})


app.add_middleware(ExceptionHandlingMiddleware)


@app.exception_handler(PipelineError)
async def pipeline_error_handler(request: StarletteRequest, exc: PipelineError):
    return JSONResponse(status_code=exc.status_code, content={"detail": exc.message})


@app.on_event("startup")
async def startup_event():
    try:
        setup_logging(load_pipeline_config().log)
    except PipelineError as e:
        logger.warning("Invalid pipeline config, using default logging: %s", e.message)
    logger.info("%s %s ready", APP_NAME, APP_VERSION)


# Include routers
app.include_router(linking.router, prefix=settings.API_V1_STR)
app.include_router(evaluation.router, prefix=settings.API_V1_STR)
app.include_router(simulation.router, prefix=settings.API_V1_STR)


@app.get("/health")
def health_check():
    return {"status": "healthy", "version": APP_VERSION}


@app.get("/api/v1")
def api_info():
    return {
        "message": f"{APP_NAME} API v1",
        "docs": "/docs",
        "redoc": "/redoc"
    }


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=8000)
