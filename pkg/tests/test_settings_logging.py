import logging

import pytest

from logging_config import RunContextFilter, get_logger, log_execution_time, log_solve, run_context, setup_logging
from settings import get_settings, load_settings, reset_settings


class TestSettings:
    def test_defaults(self):
        settings = get_settings()
        assert settings.mc_samples == 10_000
        assert settings.mc_paths == 200
        assert settings.trace_path is None
        assert settings.worker_count() >= 1

    def test_environment_overrides(self, monkeypatch):
        monkeypatch.setenv("SIM_JOBS", "3")
        monkeypatch.setenv("ORACLE_MC_SAMPLES", "500")
        monkeypatch.setenv("TRACE_PATH", "/data/batch_task.csv")
        reset_settings()
        settings = get_settings()
        assert settings.jobs == 3
        assert settings.worker_count() == 3
        assert settings.mc_samples == 500
        assert settings.trace_path == "/data/batch_task.csv"

    def test_empty_variable_counts_as_unset(self, monkeypatch):
        monkeypatch.setenv("ORACLE_MC_PATHS", "")
        assert load_settings().mc_paths == 200

    def test_invalid_values_fall_back_to_defaults(self, monkeypatch):
        monkeypatch.setenv("SIM_JOBS", "-4")
        settings = load_settings()
        assert settings.jobs == 0

    def test_cached_instance(self):
        assert get_settings() is get_settings()


class TestLogging:
    def test_run_context_tags_records(self):
        record = logging.LogRecord("x", logging.INFO, __file__, 1, "msg", None, None)
        with run_context(scenario="s4", policy="spucb", seed=3):
            RunContextFilter().filter(record)
        assert record.run_id == "s4/spucb/3"
        RunContextFilter().filter(record)
        assert record.run_id == "-"

    def test_setup_writes_log_file(self, tmp_path):
        setup_logging(level="DEBUG", log_dir=str(tmp_path))
        get_logger("tests").info("hello")
        for handler in logging.getLogger().handlers:
            handler.flush()
        assert "hello" in (tmp_path / "simulation.log").read_text()
        setup_logging(level="WARNING", log_to_file=False)

    def test_execution_time_reraises(self, caplog):
        @log_execution_time(get_logger("tests"))
        def broken():
            raise ValueError("boom")

        with caplog.at_level(logging.ERROR):
            with pytest.raises(ValueError):
                broken()
        assert "broken failed" in caplog.text

    def test_log_solve_error(self, caplog):
        with caplog.at_level(logging.DEBUG):
            log_solve(get_logger("tests"), "saddle", {"K": 2}, error="stalled", duration=0.5)
        assert "Solve failed" in caplog.text and "stalled" in caplog.text
