"""
Configuration Tests
Layered pipeline configuration and logging setup.
"""
import io
import logging
import sys
from pathlib import Path

import pytest

from app.core.config import (
    LinkerConfig,
    LogConfig,
    PipelineConfig,
    flatten_config,
    iter_config_keys,
    load_pipeline_config,
    read_config_file,
    settings,
)
from app.core.errors import InputError
from app.core.logging import setup_logging


class TestPipelineConfig:
    """Test defaults and key handling"""

    def test_defaults(self):
        config = PipelineConfig()
        assert config.ssim.window == 7
        assert config.temporal.frame_gap == 1
        assert config.link.lambda_ == 0.5
        assert config.link.k == 5
        assert config.link.extrapolate is True
        assert config.link.box_pred is False
        assert config.evaluation.iou_thresh == 0.5

    def test_dotted_keys_use_public_names(self):
        keys = {key for key, _ in iter_config_keys()}
        assert {"ssim.window", "link.lambda", "link.explt", "link.boxp", "eval.iou_thresh", "log.level"} <= keys
        assert "link.lambda_" not in keys

    def test_unknown_key(self):
        with pytest.raises(InputError):
            load_pipeline_config(overrides={"link.speed": 3})

    def test_invalid_value(self):
        with pytest.raises(InputError) as exc:
            load_pipeline_config(overrides={"temporal.frame_gap": 0})
        assert "frame_gap" in exc.value.message

    def test_sections_are_frozen(self):
        with pytest.raises(Exception):
            LinkerConfig().k = 3

    def test_flatten(self):
        flat = flatten_config(PipelineConfig())
        assert flat["link.lambda"] == 0.5
        assert flat["ssim.c1"] == pytest.approx(6.5025)


class TestConfigLayers:
    """Test precedence: flags over file over defaults"""

    def test_file_values(self, tmp_path):
        path = tmp_path / "pipeline.conf"
        path.write_text("# linking\nlink.k=2\nssim.window=11\n")
        config = load_pipeline_config(str(path))
        assert config.link.k == 2
        assert config.ssim.window == 11

    def test_flags_override_file(self, tmp_path):
        path = tmp_path / "pipeline.conf"
        path.write_text("link.k=2\n")
        assert load_pipeline_config(str(path), {"link.k": "4"}).link.k == 4

    def test_environment_path(self, tmp_path, monkeypatch):
        path = tmp_path / "pipeline.conf"
        path.write_text("link.boxp=on\n")
        monkeypatch.setattr(settings, "ACTIONTUBE_CONFIG", str(path))
        assert load_pipeline_config().link.box_pred is True

    def test_sample_file(self):
        path = Path(__file__).resolve().parent.parent / "samples" / "pipeline.conf"
        config = load_pipeline_config(str(path))
        assert config.link.frame_width == 160
        assert config.temporal.mode == "ssmap"

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            read_config_file(str(tmp_path / "missing.conf"))

    def test_blank_values_are_ignored(self, tmp_path):
        path = tmp_path / "pipeline.conf"
        path.write_text("link.k=\n")
        assert load_pipeline_config(str(path)).link.k == 5


class TestLogging:
    """Test logger setup"""

    def test_level_normalized(self):
        assert LogConfig(level="debug").level == "DEBUG"
        with pytest.raises(ValueError):
            LogConfig(level="chatty")

    def test_rotating_file(self, tmp_path):
        path = tmp_path / "logs" / "run.log"
        logger = setup_logging(LogConfig(level="INFO", file=str(path)))
        logging.getLogger("app.services.tubes").info("linked")
        for handler in logger.handlers:
            handler.flush()
        assert "linked" in path.read_text()
        setup_logging(LogConfig())

    def test_setup_replaces_handlers(self):
        setup_logging(LogConfig())
        logger = setup_logging(LogConfig(level="WARNING"))
        assert len(logger.handlers) == 1
        assert logger.level == logging.WARNING

    def test_console_follows_replaced_stderr(self, monkeypatch):
        """Test records go to the stderr current at emit time, not the one at setup"""
        setup_logging(LogConfig())
        buffer = io.StringIO()
        monkeypatch.setattr(sys, "stderr", buffer)
        logging.getLogger("app.cli").warning("late stderr")
        assert "late stderr" in buffer.getvalue()
