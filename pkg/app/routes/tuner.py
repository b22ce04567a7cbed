import logging
from typing import Annotated, List

from fastapi import APIRouter, HTTPException, Query

from app.exceptions import InfeasibleConfiguration
from app.schemas.tuner import NamedConfig, TableRow, TuneRequest, TuneResult
from app.services import tuner

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/api/tuner", tags=["Tuner"])


@router.get("/optimize", response_model=TuneResult)
def optimize(request: Annotated[TuneRequest, Query()]):
    try:
        return tuner.optimize(request.budget_bits, request.delta)
    except InfeasibleConfiguration as e:
        logger.info(f"Infeasible tuning request: {e}")
        raise HTTPException(status_code=422, detail=str(e))


@router.get("/table", response_model=List[TableRow])
def table():
    return tuner.reference_table()


@router.get("/configs", response_model=List[NamedConfig])
def configs():
    return tuner.named_configs()
