import logging

import pytest

from utils.analytics import TrainingAnalytics
from utils.files import RunManifest, atomic_path, read_json, write_json
from utils.logger import LOGGER_NAME, AppLogger
from utils.monitor import PerformanceMonitor


def test_logger_attaches_handlers_once():
    AppLogger()
    AppLogger()
    logger = logging.getLogger(LOGGER_NAME)
    assert len(logger.handlers) == 2
    assert not logger.propagate


def test_monitor_metrics_and_health():
    monitor = PerformanceMonitor(thresholds={"thread_count": 0})
    metrics = monitor.get_metrics()
    assert {"cpu_percent", "rss_mb", "memory_percent", "thread_count", "uptime"} <= metrics.keys()
    health = monitor.check_health(metrics)
    assert health["status"] == "warning"
    assert any("thread count" in w for w in health["warnings"])

    averages = monitor.get_average_metrics()
    assert averages["samples_count"] == 1
    assert averages["peak_rss_mb"] == pytest.approx(metrics["rss_mb"])
    assert PerformanceMonitor().get_average_metrics() == {"error": "No metrics available"}


def test_analytics_log(tmp_path):
    path = tmp_path / "log.jsonl"
    analytics = TrainingAnalytics(path)
    analytics.track_epoch(1, 5, 2e-4, 1.5, (0.5, 0.4, 0.3), 40)
    analytics.track_epoch(2, 10, 1e-4, 1.2, (0.6, 0.5, 0.4), 40)
    records = TrainingAnalytics.read_log(path)
    assert [r["epoch"] for r in records] == [1, 2]
    stats = analytics.get_statistics()
    assert stats["steps"] == 10 and stats["sample_visits"] == 80
    assert stats["best_dice_sum"] == pytest.approx(1.5)
    assert TrainingAnalytics().get_statistics()["epochs"] == 0


def test_atomic_path_replaces_or_cleans_up(tmp_path):
    target = tmp_path / "out" / "data.json"
    write_json({"a": 1}, target)
    write_json({"a": 2}, target)
    assert read_json(target) == {"a": 2}

    with pytest.raises(RuntimeError):
        with atomic_path(tmp_path / "broken.txt") as tmp:
            tmp.write_text("partial")
            raise RuntimeError("interrupted")
    assert sorted(p.name for p in tmp_path.iterdir()) == ["out"]

    directory = tmp_path / "archive"
    for value in ("first", "second"):
        with atomic_path(directory) as tmp:
            tmp.mkdir()
            (tmp / "value.txt").write_text(value)
    assert (directory / "value.txt").read_text() == "second"


def test_run_manifest_round_trip(tmp_path):
    manifest = RunManifest(command="train", seed=4, inputs={"data": "d"}, outputs={"final": "f"},
                           code_version="1.0.0", argv=["train"], settings={"epochs": 2})
    manifest.write(tmp_path)
    assert RunManifest.read(tmp_path) == manifest
