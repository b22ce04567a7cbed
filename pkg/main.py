import logging

from fastapi import FastAPI
from fastapi.responses import RedirectResponse

from app.config import settings
from app.routes import experiments, tuner

logging.basicConfig(level=settings.LOG_LEVEL)

app = FastAPI(
    title="Distributed Checkers",
    description="Communication-efficient probabilistic checkers on a simulated cluster",
    version="1.0.0",
)


@app.get("/", include_in_schema=False)
async def root():
    """
    Root endpoint that redirects to the API documentation
    """
    return RedirectResponse(url="/docs")


app.include_router(tuner.router)
app.include_router(experiments.router)
