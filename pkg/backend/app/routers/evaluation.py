"""
Evaluation Router - f-mAP and v-mAP reports
"""
from fastapi import APIRouter, HTTPException

from app.core.config import load_pipeline_config
from app.core.errors import PipelineError
from app.schemas.api import EvalRequest
from app.schemas.report import MapReport
from app.services.evaluation import map_suite
from app.services.records import frames_from_records, ground_truth_from_records, tube_class_count, tube_from_record

router = APIRouter(prefix="/eval", tags=["Evaluation"])


@router.post("", response_model=MapReport)
def evaluate(request: EvalRequest):
    try:
        config = load_pipeline_config(overrides=request.config)
        num_classes = request.num_classes
        preds = None
        if request.detections is not None:
            preds, num_classes = frames_from_records(((None, r) for r in request.detections), num_classes)
        tubes = [tube_from_record(r) for r in request.tubes]
        gt = ground_truth_from_records(request.ground_truth, num_classes, min_classes=tube_class_count(tubes))
        return map_suite(preds, tubes, gt, config.evaluation)
    except PipelineError as e:
        raise HTTPException(status_code=e.status_code, detail=e.message)
