"""
Simulation Router - Synthetic ground truth and detection streams
"""
from fastapi import APIRouter, HTTPException

from app.core.errors import PipelineError
from app.schemas.api import SimulateResponse
from app.schemas.scenario import ScenarioFile
from app.services.records import frame_records, ground_truth_to_records
from app.services.simulation import render_ground_truth, synth_detections

router = APIRouter(prefix="/simulate", tags=["Simulation"])


@router.post("", response_model=SimulateResponse, response_model_by_alias=True)
def simulate(scenario_file: ScenarioFile):
    try:
        scenario_file.noise.validate_ranges()
        gt = render_ground_truth(scenario_file.scenario)
        detections = synth_detections(scenario_file.scenario, scenario_file.noise, scenario_file.seed)
    except PipelineError as e:
        raise HTTPException(status_code=e.status_code, detail=e.message)
    return SimulateResponse(
        ground_truth=ground_truth_to_records(gt),
        detections=frame_records(detections, video=scenario_file.scenario.video),
    )
