"""Supervision of isolated interpreter runs, with record/replay transcripts.

Every compile check or test execution is served by a fresh runner process
speaking a one-shot JSON protocol: one request object on stdin, one outcome
object on stdout. Process isolation means one completion's side effects can
never leak into another's verdict, and a hard wall-clock backstop protects
the supervisor even when the runner's own watchdog cannot fire (native-code
busy loops).

For hermetic test runs the same interface answers from a transcript: a JSONL
file mapping request digests to recorded outcomes. Digests are computed over
a canonical serialization, so transcripts survive record reordering.
"""

from __future__ import annotations

import hashlib
import json
import subprocess
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

DEFAULT_TIMEOUT_S = 10.0
KILL_GRACE_S = 2.0  # backstop added on top of the runner's own watchdog

_STATUSES = ("pass", "fail", "timeout", "compile_error", "infra_error")
_PHASES = ("setup", "definition", "test")


class SandboxError(RuntimeError):
    """Supervisor misuse or unreadable transcript — never a code verdict."""


@dataclass(frozen=True)
class ExecutionRequest:
    mode: str  # compile | execute
    source: str
    setup_code: Optional[str] = None
    test_program: Optional[str] = None
    entry_point: Optional[str] = None
    timeout_s: float = DEFAULT_TIMEOUT_S

    def __post_init__(self):
        if self.mode not in ("compile", "execute"):
            raise ValueError(f"unknown request mode: {self.mode!r}")
        if self.mode == "execute" and self.test_program is None:
            raise ValueError("execute requests must carry a test_program")
        if not self.timeout_s > 0:
            raise ValueError("timeout_s must be positive")
        object.__setattr__(self, "timeout_s", float(self.timeout_s))

    def to_wire(self) -> dict:
        """Full-keyed wire form; absent optionals serialize as null."""
        return {
            "mode": self.mode,
            "source": self.source,
            "setup_code": self.setup_code,
            "test_program": self.test_program,
            "entry_point": self.entry_point,
            "timeout_s": self.timeout_s,
        }

    def digest(self) -> str:
        canonical = json.dumps(
            self.to_wire(), sort_keys=True, separators=(",", ":"), ensure_ascii=True
        )
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ExecutionOutcome:
    status: str  # pass | fail | timeout | compile_error | infra_error
    exception_class: Optional[str] = None
    message: Optional[str] = None
    phase: Optional[str] = None  # setup | definition | test
    duration_s: float = 0.0
    captured_output: Optional[str] = None

    def __post_init__(self):
        if self.status not in _STATUSES:
            raise ValueError(f"unknown outcome status: {self.status!r}")
        if self.phase is not None and self.phase not in _PHASES:
            raise ValueError(f"unknown outcome phase: {self.phase!r}")
        if self.status == "fail" and not self.exception_class:
            raise ValueError("fail outcomes must carry an exception class")
        if self.status == "pass" and self.exception_class:
            raise ValueError("pass outcomes must not carry an exception class")

    def to_record(self) -> dict:
        return {
            "status": self.status,
            "exception_class": self.exception_class,
            "message": self.message,
            "phase": self.phase,
            "duration_s": self.duration_s,
            "captured_output": self.captured_output,
        }

    @classmethod
    def from_record(cls, record: dict) -> "ExecutionOutcome":
        return cls(
            status=record["status"],
            exception_class=record.get("exception_class"),
            message=record.get("message"),
            phase=record.get("phase"),
            duration_s=record.get("duration_s", 0.0),
            captured_output=record.get("captured_output"),
        )


def _infra(message: str, duration_s: float = 0.0) -> ExecutionOutcome:
    return ExecutionOutcome(status="infra_error", message=message, duration_s=duration_s)


class TranscriptRecorder:
    """Collects digest → outcome pairs; first recording of a digest wins.

    Durations are normalized to zero at record time so that replayed runs are
    byte-identical regardless of host speed.
    """

    def __init__(self) -> None:
        self.entries: dict[str, ExecutionOutcome] = {}

    def record(self, request: ExecutionRequest, outcome: ExecutionOutcome) -> None:
        digest = request.digest()
        if digest not in self.entries:
            self.entries[digest] = ExecutionOutcome.from_record(
                outcome.to_record() | {"duration_s": 0.0}
            )

    def save(self, path: str | Path) -> None:
        lines = [
            json.dumps({"digest": digest, "outcome": outcome.to_record()}, sort_keys=True)
            for digest, outcome in sorted(self.entries.items())
        ]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_transcript(path: str | Path) -> dict[str, ExecutionOutcome]:
    """Parse a transcript file into a digest → outcome replay table."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise SandboxError(f"transcript not found: {path}") from None
    table: dict[str, ExecutionOutcome] = {}
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
            digest = entry["digest"]
            outcome = ExecutionOutcome.from_record(entry["outcome"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise SandboxError(f"{path}:{lineno}: malformed transcript entry ({exc})") from None
        table[digest] = outcome
    return table


def default_runner_cmd() -> list[str]:
    return [sys.executable, "-m", "fixeval_runner"]


class SandboxExecutor:
    """Serves execution requests from a live runner or a replay transcript.

    Exactly one of the two backends is active: pass ``transcript`` for replay
    mode, otherwise a fresh runner subprocess is spawned per request. An
    optional ``recorder`` captures live outcomes for later replay.
    """

    def __init__(
        self,
        runner_cmd: Optional[list[str]] = None,
        transcript: Optional[dict[str, ExecutionOutcome]] = None,
        recorder: Optional[TranscriptRecorder] = None,
    ) -> None:
        self.runner_cmd = list(runner_cmd) if runner_cmd else default_runner_cmd()
        self.transcript = transcript
        self.recorder = recorder

    def compile_check(
        self, source: str, timeout_s: float = DEFAULT_TIMEOUT_S
    ) -> ExecutionOutcome:
        return self.run(
            ExecutionRequest(mode="compile", source=source, timeout_s=timeout_s)
        )

    def execute(self, request: ExecutionRequest) -> ExecutionOutcome:
        if request.mode != "execute":
            raise ValueError("execute() requires an execute-mode request")
        return self.run(request)

    def run(self, request: ExecutionRequest) -> ExecutionOutcome:
        if self.transcript is not None:
            return self._replay(request)
        outcome = self._run_live(request)
        if self.recorder is not None:
            self.recorder.record(request, outcome)
        return outcome

    def batch_execute(
        self, requests: list[ExecutionRequest], parallelism: int = 1
    ) -> list[ExecutionOutcome]:
        """Run all requests, preserving order; failures stay per-request."""
        if parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        if not requests:
            return []
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            return list(pool.map(self.run, requests))

    def _replay(self, request: ExecutionRequest) -> ExecutionOutcome:
        digest = request.digest()
        outcome = self.transcript.get(digest)
        if outcome is None:
            return _infra(f"no transcript entry for request digest {digest}")
        return outcome

    def _run_live(self, request: ExecutionRequest) -> ExecutionOutcome:
        wire = json.dumps(request.to_wire())
        deadline = request.timeout_s + KILL_GRACE_S
        try:
            proc = subprocess.run(
                self.runner_cmd,
                input=wire,
                capture_output=True,
                text=True,
                timeout=deadline,
            )
        except FileNotFoundError:
            return _infra(f"runner command not found: {self.runner_cmd[0]}")
        except subprocess.TimeoutExpired:
            # The in-process watchdog failed to fire (native busy loop);
            # the kill itself is the timeout verdict.
            return ExecutionOutcome(
                status="timeout",
                exception_class="TimeoutError",
                message=f"runner killed after {deadline:.1f}s wall clock",
                duration_s=deadline,
            )
        except OSError as exc:
            return _infra(f"failed to spawn runner: {exc}")

        try:
            payload = json.loads(proc.stdout)
            outcome = ExecutionOutcome.from_record(payload)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            detail = (proc.stdout or proc.stderr or "").strip()[:500]
            return _infra(
                f"runner returned unparseable output (exit {proc.returncode}): {detail!r}"
            )
        if proc.returncode != 0 and outcome.status != "infra_error":
            return _infra(
                f"runner exited {proc.returncode} with non-diagnostic payload"
            )
        return outcome
