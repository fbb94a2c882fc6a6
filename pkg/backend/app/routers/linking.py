"""
Linking Router - Online tube generation over posted detections
"""
from fastapi import APIRouter, HTTPException

from app.core.config import load_pipeline_config
from app.core.errors import PipelineError
from app.schemas.api import LinkRequest, LinkResponse
from app.services.records import frames_from_records, tube_to_record
from app.services.tubes import link_videos

router = APIRouter(prefix="/link", tags=["Linking"])


@router.post("", response_model=LinkResponse, response_model_by_alias=True)
def link(request: LinkRequest):
    """
    Link per-frame detections into action tubes.
    Each video in the body is linked independently; frames may arrive in any
    line order but must not repeat.
    """
    try:
        config = load_pipeline_config(overrides=request.config)
        videos, _ = frames_from_records((None, r) for r in request.detections)
        tubes = link_videos(videos, config.link)
    except PipelineError as e:
        raise HTTPException(status_code=e.status_code, detail=e.message)
    return LinkResponse(tubes=[tube_to_record(t) for t in tubes])
