import logging
from typing import List

from fastapi import APIRouter, HTTPException

from app.config import settings
from app.exceptions import CheckerError
from app.schemas.experiments import (
    AccuracyRequest,
    CostRequest,
    CostRow,
    ExperimentResult,
    Workload,
    WorkloadRequest,
    WorkloadSummary,
)
from app.schemas.hashing import HashFamily
from app.services import experiments

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/api/experiments", tags=["Experiments"])


@router.post("/accuracy", response_model=ExperimentResult)
def accuracy(request: AccuracyRequest):
    try:
        scenario = experiments.get_scenario(request.checker)
        workload = Workload(
            kind=scenario.default_workload(),
            n=request.elements,
            seed=request.seed,
            distinct_keys=settings.POWER_LAW_KEYS,
            hi=settings.UNIFORM_HIGH,
        )
        return experiments.run_accuracy(
            request.checker,
            request.config,
            workload,
            request.manipulator,
            request.trials,
            request.pes,
            request.seed,
            hash_family=HashFamily(settings.HASH),
            full_ledger=request.full_ledger,
        )
    except (CheckerError, ValueError) as e:
        logger.error(f"Accuracy experiment rejected: {e}")
        raise HTTPException(status_code=400, detail=str(e))


@router.post("/cost", response_model=List[CostRow])
def cost(request: CostRequest):
    try:
        return experiments.run_cost_report(
            request.checker, request.config, request.sizes, request.pes, request.seed, HashFamily(settings.HASH)
        )
    except (CheckerError, ValueError) as e:
        logger.error(f"Cost report rejected: {e}")
        raise HTTPException(status_code=400, detail=str(e))


@router.post("/workload", response_model=WorkloadSummary)
def workload(request: WorkloadRequest):
    try:
        w = Workload(
            kind=request.kind,
            n=request.elements,
            seed=request.seed,
            distinct_keys=request.distinct_keys,
            lo=request.lo,
            hi=request.hi,
        )
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    return experiments.summarize_workload(w, request.pes)
