"""Regenerate the committed probe transcript from the in-process executor.

Run from the repository root after changing any probe fixture or the probe
manifest:

    python3 scripts/record_transcripts.py

The live-runner acceptance test re-records the same manifest against a real
interpreter subprocess and compares bytes, so this file and the runner can
never drift apart silently.
"""

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from _fakes import RecordingInProcessExecutor  # noqa: E402
from _probes import PROBES_TRANSCRIPT, build_probes, run_probe  # noqa: E402

from fixeval.sandbox import TranscriptRecorder  # noqa: E402


def main() -> None:
    recorder = TranscriptRecorder()
    executor = RecordingInProcessExecutor(recorder)
    for name, request in build_probes():
        outcome = run_probe(executor, request)
        print(f"{name}: {outcome.status} {outcome.exception_class or ''}".rstrip())
    PROBES_TRANSCRIPT.parent.mkdir(parents=True, exist_ok=True)
    recorder.save(PROBES_TRANSCRIPT)
    print(f"wrote {len(recorder.entries)} entries to {PROBES_TRANSCRIPT}")


if __name__ == "__main__":
    main()
