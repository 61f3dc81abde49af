#!/usr/bin/env python
"""
Update readme.md with the latest timing results.

Looks for benchmarks/latest.json and injects a table between:
<!-- BENCHMARK_RESULTS_START -->
<!-- BENCHMARK_RESULTS_END -->

Usage:
    uv run python scripts/update_readme.py
"""

from __future__ import annotations

import json
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parents[1]
README_FILE = REPO_ROOT / "readme.md"
RESULTS_FILE = REPO_ROOT / "benchmarks" / "latest.json"

START_MARKER = "<!-- BENCHMARK_RESULTS_START -->"
END_MARKER = "<!-- BENCHMARK_RESULTS_END -->"

# Constants for formatting
SECONDS_PER_MINUTE = 60
MB_PER_GB = 1024

RUN_DISPLAY_NAMES = {
    "selection_speed": "Selection speed",
    "selftest": "Oracle selftest",
}


def format_duration(duration_sec: float | None) -> str:
    """Format duration in seconds to human-readable string."""
    if duration_sec is None:
        return "N/A"
    if duration_sec < SECONDS_PER_MINUTE:
        return f"{duration_sec:.1f}s"
    minutes = int(duration_sec // SECONDS_PER_MINUTE)
    seconds = duration_sec % SECONDS_PER_MINUTE
    return f"{minutes}m {seconds:.1f}s"


def format_memory(memory_mb: float | None) -> str:
    """Format memory usage in MB to human-readable string."""
    if memory_mb is None:
        return "N/A"
    if memory_mb < MB_PER_GB:
        return f"{memory_mb:.0f} MB"
    return f"{memory_mb / MB_PER_GB:.1f} GB"


def create_results_table(results: dict) -> str:
    """Create a Markdown table from timing results, one row per run plus one per timed phase."""
    if not results.get("runs"):
        return "**No benchmark results available**\n\n*Run `uv run python scripts/benchmarks.py` to generate them.*"

    meta = results.get("meta", {})
    lines = [
        f"**Last updated**: {meta.get('timestamp', 'Unknown')}  ",
        f"**Python**: {meta.get('python', 'Unknown')}",
        "",
        "| Run | Phase | Status | Duration | Peak RAM |",
        "|-----|-------|--------|----------|----------|",
    ]
    for name, run_data in results["runs"].items():
        display_name = RUN_DISPLAY_NAMES.get(name, name)
        status_icon = _status_icon(run_data)
        memory = format_memory(run_data.get("peak_memory_mb"))
        lines.append(
            f"| {display_name} | total | {status_icon} | {format_duration(run_data.get('duration_sec'))} | {memory} |"
        )
        for phase, seconds in run_data.get("timings", {}).items():
            lines.append(f"| {display_name} | {phase} | | {format_duration(seconds)} | |")
    return "\n".join(lines)


def _status_icon(run_data: dict) -> str:
    status = run_data.get("status", "unknown")
    if status == "ok":
        return "✅"
    if status == "error":
        return f"❌ exit {run_data.get('exit_code', '?')}"
    if status == "missing":
        return "⚠️ script not found"
    return f"❓ {status}"


def replace_between_markers(content: str, table: str) -> str | None:
    """Return the content with the table between the markers, or None when a marker is missing."""
    start_idx = content.find(START_MARKER)
    end_idx = content.find(END_MARKER, start_idx)
    if start_idx == -1 or end_idx == -1:
        return None
    before = content[: start_idx + len(START_MARKER)]
    after = content[end_idx:]
    return f"{before}\n\n{table}\n\n{after}"


def update_readme() -> bool:
    """Update readme with timing results. Returns True if updated."""
    if not README_FILE.exists():
        print(f"README file not found: {README_FILE}")
        return False

    if RESULTS_FILE.exists():
        try:
            results = json.loads(RESULTS_FILE.read_text(encoding="utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError) as e:
            print(f"Error reading results file: {e}")
            return False
    else:
        print(f"Results file not found: {RESULTS_FILE}")
        results = {"runs": {}}

    readme_content = README_FILE.read_text(encoding="utf-8")
    new_content = replace_between_markers(readme_content, create_results_table(results))
    if new_content is None:
        print(f"Could not find both '{START_MARKER}' and '{END_MARKER}' in README")
        return False
    if new_content != readme_content:
        README_FILE.write_text(new_content, encoding="utf-8")
        print("README updated with latest benchmark results")
        return True
    print("README already up to date")
    return False


def main() -> int:
    """Update readme with timing results."""
    try:
        update_readme()
    except (OSError, ValueError) as e:
        print(f"Error updating README: {e}")
        return 1
    else:
        return 0


if __name__ == "__main__":
    raise SystemExit(main())
