"""Tests for the benchmark runner and the readme updater in scripts/."""

import importlib.util
import subprocess
import sys
from pathlib import Path
from types import ModuleType

import pytest

REPO_ROOT = Path(__file__).resolve().parents[1]


def _load_script(name: str) -> ModuleType:
    spec = importlib.util.spec_from_file_location(name, REPO_ROOT / "scripts" / f"{name}.py")
    assert spec is not None
    assert spec.loader is not None
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def test_parse_timings() -> None:
    benchmarks = _load_script("benchmarks")
    output = "\n".join(
        [
            "fairsynth: Score matrix (40 attributes) takes: 0.52 s.",
            "some other line",
            "  fairsynth: Greedy selection (40 attributes) takes: 0.03 s.  ",
            "fairsynth: Selftest toy graph weights: ok.",
        ]
    )
    assert benchmarks.parse_timings(output) == {
        "Score matrix (40 attributes)": 0.52,
        "Greedy selection (40 attributes)": 0.03,
    }


def test_format_helpers() -> None:
    update_readme = _load_script("update_readme")
    assert update_readme.format_duration(None) == "N/A"
    assert update_readme.format_duration(12.34) == "12.3s"
    assert update_readme.format_duration(75.0) == "1m 15.0s"
    assert update_readme.format_memory(512.4) == "512 MB"
    assert update_readme.format_memory(2048.0) == "2.0 GB"


def test_results_table() -> None:
    update_readme = _load_script("update_readme")
    results = {
        "meta": {"timestamp": "2025-01-01T00:00:00Z", "python": "3.12.0"},
        "runs": {
            "selection_speed": {
                "status": "ok",
                "duration_sec": 3.2,
                "exit_code": 0,
                "peak_memory_mb": 210.0,
                "timings": {"Greedy selection (40 attributes)": 0.03},
            },
            "selftest": {"status": "error", "duration_sec": 1.0, "exit_code": 1, "timings": {}},
        },
    }
    table = update_readme.create_results_table(results)
    assert "| Selection speed | total | ✅ | 3.2s | 210 MB |" in table
    assert "| Selection speed | Greedy selection (40 attributes) | | 0.0s | |" in table
    assert "❌ exit 1" in table
    assert "No benchmark results" in update_readme.create_results_table({"runs": {}})


def test_replace_between_markers() -> None:
    update_readme = _load_script("update_readme")
    content = f"intro\n{update_readme.START_MARKER}\nold\n{update_readme.END_MARKER}\noutro\n"
    replaced = update_readme.replace_between_markers(content, "new table")
    assert replaced == f"intro\n{update_readme.START_MARKER}\n\nnew table\n\n{update_readme.END_MARKER}\noutro\n"
    assert update_readme.replace_between_markers("no markers here", "table") is None


def test_readme_has_markers() -> None:
    update_readme = _load_script("update_readme")
    content = (REPO_ROOT / "readme.md").read_text(encoding="utf-8")
    assert update_readme.replace_between_markers(content, "table") is not None


@pytest.mark.integration
def test_selection_speed_script() -> None:
    """Test that the timing script runs and prints one timing line per phase."""
    result = subprocess.run(
        [sys.executable, "fairsynth/selection_speed.py"],
        check=False,
        capture_output=True,
        text=True,
        cwd=REPO_ROOT,
    )
    assert result.returncode == 0, result.stderr
    timings = _load_script("benchmarks").parse_timings(result.stdout)
    assert any(phase.startswith("Greedy selection") for phase in timings)
    assert timings[next(p for p in timings if p.startswith("Greedy selection"))] < 5.0


@pytest.mark.integration
def test_run_script_records_output_and_memory() -> None:
    benchmarks = _load_script("benchmarks")
    program = "import time; print('fairsynth: Nap takes: 0.50 s.'); time.sleep(0.5)"
    result = benchmarks.run_script(["-c", program])
    assert result.exit_code == 0
    assert benchmarks.parse_timings(result.output) == {"Nap": 0.5}
    assert result.peak_mem_mb is not None
    assert result.peak_mem_mb > 0
