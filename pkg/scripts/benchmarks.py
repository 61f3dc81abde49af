#!/usr/bin/env python
"""
Run the repository's timing scripts and collect the results.

- Runs each timing script (and the in-process selftest) as a subprocess of the current interpreter.
- Samples the resident memory of the subprocess tree with psutil while it runs.
- Records wall-clock durations, exit codes, peak memory and the per-phase timing lines in
  benchmarks/latest.json.

Usage:
    uv run python scripts/benchmarks.py
"""

from __future__ import annotations

import contextlib
import json
import re
import subprocess
import sys
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import psutil

REPO_ROOT = Path(__file__).resolve().parents[1]
RESULTS_DIR = REPO_ROOT / "benchmarks"
RESULTS_FILE = RESULTS_DIR / "latest.json"
BYTES_PER_MB = 1024 * 1024

# Runs: name -> interpreter arguments
SCRIPTS: list[tuple[str, list[str]]] = [
    ("selection_speed", [str(REPO_ROOT / "fairsynth" / "selection_speed.py")]),
    ("selftest", ["-m", "fairsynth", "selftest", "--instances", "10"]),
]

TIMING_LINE = re.compile(r"^fairsynth: (?P<phase>.+?) takes: (?P<seconds>[0-9.]+) s\.$")


@dataclass
class RunResult:
    exit_code: int
    duration: float
    output: str
    peak_mem_mb: float | None = None


def parse_timings(output: str) -> dict[str, float]:
    """Pick the 'fairsynth: <phase> takes: <n> s.' lines out of a script's output."""
    timings = {}
    for line in output.splitlines():
        match = TIMING_LINE.match(line.strip())
        if match:
            timings[match["phase"]] = float(match["seconds"])
    return timings


class PeakMemorySampler(threading.Thread):
    """Polls the resident memory of this process's children until stopped."""

    def __init__(self, interval: float = 0.01) -> None:
        super().__init__(daemon=True)
        self.interval = interval
        self.peak_mb: float | None = None
        self._stop_event = threading.Event()

    def run(self) -> None:
        this_proc = psutil.Process()
        while not self._stop_event.is_set():
            rss = 0
            # Only the subprocess tree counts, not the runner itself
            for child in this_proc.children(recursive=True):
                with contextlib.suppress(psutil.Error):
                    rss += child.memory_info().rss
            if rss:
                self.peak_mb = max(self.peak_mb or 0.0, rss / BYTES_PER_MB)
            self._stop_event.wait(self.interval)

    def stop(self) -> float | None:
        self._stop_event.set()
        self.join(timeout=0.5)
        return self.peak_mb


def run_script(arguments: list[str]) -> RunResult:
    """Run one timing script and collect duration, output and peak memory."""
    sampler = PeakMemorySampler()
    sampler.start()
    start = time.perf_counter()
    try:
        proc = subprocess.run(  # noqa: S603
            [sys.executable, *arguments], check=False, capture_output=True, text=True, cwd=REPO_ROOT
        )
    except FileNotFoundError as e:
        return RunResult(127, time.perf_counter() - start, f"File not found: {e}", sampler.stop())
    duration = time.perf_counter() - start
    output = proc.stdout + (f"\n{proc.stderr}" if proc.stderr else "")
    return RunResult(proc.returncode, duration, output, sampler.stop())


def main() -> int:
    """Run all timing scripts and collect results."""
    RESULTS_DIR.mkdir(parents=True, exist_ok=True)
    results: dict[str, dict[str, object]] = {
        "meta": {
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "python": sys.version.split()[0],
        },
        "runs": {},
    }

    for name, arguments in SCRIPTS:
        script = Path(arguments[0])
        if script.suffix == ".py" and not script.exists():
            results["runs"][name] = {"status": "missing", "duration_sec": None, "exit_code": 127}
            continue
        result = run_script(arguments)
        run: dict[str, object] = {
            "status": "ok" if result.exit_code == 0 else "error",
            "duration_sec": round(result.duration, 3),
            "exit_code": result.exit_code,
            "timings": parse_timings(result.output),
        }
        if result.peak_mem_mb is not None:
            run["peak_memory_mb"] = round(result.peak_mem_mb, 1)
        # Keep a short log snippet in case of failure
        if result.exit_code != 0:
            run["log_tail"] = result.output.splitlines()[-20:]
        results["runs"][name] = run

    RESULTS_FILE.write_text(json.dumps(results, indent=2))
    print(f"Wrote results to {RESULTS_FILE}")
    print(json.dumps(results, indent=2))
    # Return 0 even on errors so CI can still update README
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
