"""
Pipeline Configuration Module
Centralized configuration for the action-tube toolkit.

Configuration is layered: built-in defaults, then a key-value config file,
then command-line flags. Keys are dotted (``ssim.window``, ``link.lambda``)
and every section rejects unknown keys.

Pipeline keys never come from the environment; ``Settings`` only holds
service-level values such as ACTIONTUBE_CONFIG, the default config file path.
"""
from pathlib import Path
from typing import Any, Dict, Iterator, Literal, Mapping, Optional, Tuple

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic.fields import FieldInfo
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.core.errors import InputError

APP_NAME = "actiontube"
APP_VERSION = "1.0.0"

TemporalMode = Literal["ssmap", "dsim", "raw_prev", "none"]


class Settings(BaseSettings):
    API_V1_STR: str = "/api/v1"

    # Default config file path; flags and explicit paths take precedence
    ACTIONTUBE_CONFIG: Optional[str] = Field(
        default=None,
        description="Path of the key-value pipeline config file used when --config is not given"
    )

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
        case_sensitive=True
    )


settings = Settings()


# =============================================================================
# SECTION MODELS
# =============================================================================

class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True, frozen=True)


class SsimParams(_Section):
    """Structural-similarity window and stabilizers"""
    window: int = Field(default=7, description="Odd patch side length (>= 3)")
    c1: Optional[float] = Field(default=None, description="Luminance stabilizer; (0.01*L)^2 when unset")
    c2: Optional[float] = Field(default=None, description="Contrast stabilizer; (0.03*L)^2 when unset")
    L: float = Field(default=255.0, gt=0, description="Dynamic range of pixel values")

    @field_validator("window")
    @classmethod
    def validate_window(cls, v: int) -> int:
        if v < 3 or v % 2 == 0:
            raise ValueError("ssim.window must be an odd integer >= 3")
        return v

    @model_validator(mode="after")
    def fill_stabilizers(self) -> "SsimParams":
        if self.c1 is None:
            object.__setattr__(self, "c1", (0.01 * self.L) ** 2)
        if self.c2 is None:
            object.__setattr__(self, "c2", (0.03 * self.L) ** 2)
        if self.c1 <= 0 or self.c2 <= 0:
            raise ValueError("ssim.c1 and ssim.c2 must be positive")
        return self


class TemporalConfig(_Section):
    mode: TemporalMode = "ssmap"
    frame_gap: int = Field(default=1, ge=1)
    topk: int = Field(default=1, ge=1, le=9, description="Sample among the top-k shift candidates")
    seed: int = 0


class DetectConfig(_Section):
    score_floor: float = Field(default=0.05, ge=0.0, le=1.0)
    max_per_class: int = Field(default=20, ge=1)
    nms_iou: float = Field(default=0.45, ge=0.0, le=1.0, description="Per-class NMS threshold after decoding")
    top_n: int = Field(default=10, ge=1, description="Detections kept per class after NMS")
    dense_scores: bool = False


class LinkerConfig(_Section):
    """Online tube-linking parameters"""
    lambda_: float = Field(default=0.5, alias="lambda", ge=0.0, le=1.0, description="Minimum IoU for a match")
    k: int = Field(default=5, ge=0, description="Maximum consecutive extrapolated frames")
    n: int = Field(default=10, ge=1, description="Maximum new tubes per class per frame")
    extrapolate: bool = Field(default=True, alias="explt")
    box_pred: bool = Field(default=False, alias="boxp")
    spawn_floor: float = Field(default=0.05, ge=0.0, le=1.0)
    nms_iou: float = Field(default=0.45, ge=0.0, le=1.0, description="NMS threshold applied before spawning")
    frame_width: Optional[float] = Field(default=None, gt=0)
    frame_height: Optional[float] = Field(default=None, gt=0)


class EvalConfig(_Section):
    iou_thresh: float = Field(default=0.5, gt=0.0, le=1.0)
    include_extrapolated_frames: bool = False
    include_extrapolated_tubes: bool = True


class LogConfig(_Section):
    level: str = "INFO"
    file: Optional[str] = None
    max_bytes: int = 10485760  # 10MB
    backup_count: int = 5

    @field_validator("level")
    @classmethod
    def normalize_level(cls, v: str) -> str:
        level = v.upper()
        if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"unknown log level {v!r}")
        return level


class PipelineConfig(_Section):
    """Union of all section configs"""
    ssim: SsimParams = SsimParams()
    temporal: TemporalConfig = TemporalConfig()
    detect: DetectConfig = DetectConfig()
    link: LinkerConfig = LinkerConfig()
    evaluation: EvalConfig = Field(default=EvalConfig(), alias="eval")
    log: LogConfig = LogConfig()


# =============================================================================
# KEY HANDLING
# =============================================================================

def _key_name(name: str, info: FieldInfo) -> str:
    return info.alias or name


def iter_config_keys() -> Iterator[Tuple[str, FieldInfo]]:
    """Yield every dotted config key with its field definition"""
    for section_name, section_info in PipelineConfig.model_fields.items():
        section_key = _key_name(section_name, section_info)
        section_model = section_info.annotation
        for field_name, field_info in section_model.model_fields.items():
            yield f"{section_key}.{_key_name(field_name, field_info)}", field_info


def _nest(flat: Mapping[str, Any]) -> Dict[str, Dict[str, Any]]:
    known = {key for key, _ in iter_config_keys()}
    nested: Dict[str, Dict[str, Any]] = {}
    for key, value in flat.items():
        if key not in known:
            raise InputError(f"Unknown config key: {key}")
        if value is None or value == "":
            continue
        section, field = key.split(".", 1)
        nested.setdefault(section, {})[field] = value
    return nested


def read_config_file(path: str) -> Dict[str, Optional[str]]:
    """Read a dotted key=value config file"""
    config_path = Path(path)
    if not config_path.is_file():
        raise InputError(f"Config file not found: {path}")
    return dict(dotenv_values(config_path))


def load_pipeline_config(
    path: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None
) -> PipelineConfig:
    """
    Build the effective configuration.

    Precedence: overrides (CLI flags) > config file > defaults. When no path is
    given, ACTIONTUBE_CONFIG is consulted.
    """
    flat: Dict[str, Any] = {}
    config_path = path or settings.ACTIONTUBE_CONFIG
    if config_path:
        flat.update(read_config_file(config_path))
    if overrides:
        flat.update({k: v for k, v in overrides.items() if v is not None})

    return build_pipeline_config(_nest(flat))


def build_pipeline_config(sections: Mapping[str, Any]) -> PipelineConfig:
    """Validate nested section values, raising InputError with every problem"""
    try:
        return PipelineConfig.model_validate(sections)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()
        )
        raise InputError(f"Invalid configuration: {problems}") from e


def flatten_config(config: PipelineConfig) -> Dict[str, Any]:
    """Dotted-key view of a config, as written to run manifests"""
    dumped = config.model_dump(by_alias=True)
    return {
        f"{section}.{key}": value
        for section, fields in dumped.items()
        for key, value in fields.items()
    }
