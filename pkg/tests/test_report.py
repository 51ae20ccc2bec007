import csv

import pytest

from swimps.report import render_report, write_trace_csv
from swimps.scenario import run_scenario, scenario_from_dict


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    cfg = scenario_from_dict({
        "duration_s": 4 * 3600,
        "time_step_s": 60,
        "seed": 3,
        "initial_moisture_pct": 31.0,
        "fsync": False,
    })
    run_scenario(cfg, out)
    return out


class TestRenderReport:
    def test_writes_trace_and_figures(self, run_dir, tmp_path):
        written = render_report(run_dir, tmp_path)
        names = {p.name for p in written}
        assert names == {"trace.csv", "moisture.png", "power.png", "pump.png"}
        for path in written:
            assert path.exists()
            assert path.stat().st_size > 0

    def test_trace_rows_match_telemetry(self, run_dir, tmp_path):
        render_report(run_dir, tmp_path)
        with open(tmp_path / "trace.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 240
        first = rows[0]
        assert first["device"] == "1"
        assert 0.0 <= float(first["moisture_pct"]) <= 100.0
        assert first["pump_on"] in ("0", "1")

    def test_defaults_to_run_dir(self, run_dir):
        written = render_report(run_dir)
        assert all(p.parent == run_dir for p in written)

    def test_missing_log_raises(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            render_report(tmp_path / "empty")

    def test_threshold_lines_follow_registry(self, run_dir, tmp_path):
        from swimps.report import _thresholds, read_log
        import json

        entries = read_log(run_dir / "gateway.log")
        with open(run_dir / "registry.json") as fh:
            registry = json.load(fh)
        low, high = _thresholds(entries, 1, registry)
        assert (low, high) == (3000, 3500)
