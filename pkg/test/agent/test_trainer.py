"""
Tests for the online training loop.
"""

import os

import numpy as np
import pandas as pd
import pytest

import dreammpc.agent.trainer as trainer_module
from dreammpc.agent.trainer import METRICS_COLUMNS, train
from dreammpc.config.settings import load_run_config
from dreammpc.errors import NumericalAbortError
from dreammpc.model.models import LossReport
from dreammpc.utils.run_logging import CsvStreamWriter


@pytest.mark.integration
class TestTrain:
    """End-to-end training on the tiny configuration"""

    def test_steps_and_update_count(self, tiny_config_file):
        """14 steps with 6 seed steps and ratio 1 run 8 updates."""
        result = train(load_run_config(tiny_config_file))
        assert result.steps == 14
        assert result.updates == 8

    def test_fractional_update_ratio(self, tiny_config_file):
        """floor(S * ratio) updates for a fractional ratio."""
        config = load_run_config(tiny_config_file, ["train.update_to_data_ratio=0.5"])
        assert train(config).updates == 4

    def test_metrics_rows(self, tiny_config_file, tmp_path):
        """One row per decision step; seed rows carry no losses."""
        path = str(tmp_path / "metrics.csv")
        with CsvStreamWriter(path, METRICS_COLUMNS) as metrics:
            train(load_run_config(tiny_config_file), metrics=metrics)
        frame = pd.read_csv(path)
        assert list(frame.columns) == METRICS_COLUMNS
        assert len(frame) == 14
        assert list(frame["phase"][:6]) == ["seed"] * 6
        assert frame["total_loss"][:6].isna().all()
        assert frame["updates"][6:].eq(1).all()
        assert frame["episode"].iloc[-1] == 2
        assert np.isfinite(frame["episode_return"][5])

    def test_deterministic(self, tiny_config_file, tmp_path):
        """Same seed, same metrics file."""
        contents = []
        for name in ("a.csv", "b.csv"):
            path = str(tmp_path / name)
            with CsvStreamWriter(path, METRICS_COLUMNS) as metrics:
                train(load_run_config(tiny_config_file), metrics=metrics)
            with open(path, encoding="utf-8") as f:
                contents.append(f.read())
        assert contents[0] == contents[1]

    def test_periodic_evaluation_and_checkpoint(self, tiny_config_file, tmp_path):
        """eval_interval triggers evaluations; a final checkpoint is saved."""
        config = load_run_config(
            tiny_config_file, ["train.eval_interval=7", "train.eval_episodes=1"]
        )
        result = train(config, checkpoint_dir=str(tmp_path / "checkpoints"))
        assert len(result.evaluations) == 2
        assert os.path.isfile(result.checkpoint_path)
        assert result.checkpoint_path.endswith("final.dmpc")

    @pytest.mark.parametrize("planner", ["policy", "mppi"])
    def test_other_planners(self, tiny_config_file, planner):
        """Policy and MPPI collection also run."""
        config = load_run_config(tiny_config_file, [f"train.planner={planner}"])
        assert train(config).steps == 14

    def test_non_finite_streak_aborts(self, tiny_config_file, monkeypatch):
        """Too many skipped updates in a row raise NumericalAbortError."""

        def skipped(*args, **kwargs):
            nan = float("nan")
            return LossReport(consistency=nan, reward=nan, value=nan, total=nan, applied=False)

        monkeypatch.setattr(trainer_module, "model_update", skipped)
        config = load_run_config(tiny_config_file, ["train.non_finite_streak_limit=3"])
        with pytest.raises(NumericalAbortError):
            train(config)
