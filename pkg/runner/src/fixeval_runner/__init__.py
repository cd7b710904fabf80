"""One-shot execution shim for untrusted Python completions.

Reads a single JSON request from stdin, performs either a compile check or a
setup/definition/test execution inside exception capture, and emits exactly
one JSON verdict object on stdout. The executed code's stdout and stderr are
redirected into a captured field so they can never interleave with the
protocol, its stdin is replaced by an empty stream (interactive reads hit
EOF immediately), and a SIGALRM watchdog interrupts pure-Python busy loops.
The supervisor adds its own process-kill backstop on top, because an
in-process timer cannot interrupt native calls.

Verdicts: one of pass | fail | timeout | compile_error | infra_error, with
the exception class name reported unqualified and the message verbatim.
Normal verdicts exit 0; a request the shim cannot even parse produces an
infra_error diagnostic object and a nonzero exit.
"""

import io
import json
import signal
import sys
import time
from contextlib import redirect_stderr, redirect_stdout

OUTPUT_LIMIT = 10000
DEFAULT_TIMEOUT_S = 10.0

# User code is compiled under this filename in every phase. SyntaxError
# messages embed it, and recorded transcripts pin those exact strings, so it
# must never change.
COMPILE_FILENAME = "<fixture>"

_MODES = ("compile", "execute")
_EXIT_OK = 0
_EXIT_BAD_REQUEST = 1


class _Timeout(BaseException):
    # BaseException so the code under test can't swallow it with a broad
    # `except Exception` handler.
    pass


def _raise_timeout(signum, frame):
    raise _Timeout()


def _verdict(
    status,
    exception_class=None,
    message=None,
    phase=None,
    duration_s=0.0,
    captured_output=None,
) -> dict:
    return {
        "status": status,
        "exception_class": exception_class,
        "message": message,
        "phase": phase,
        "duration_s": duration_s,
        "captured_output": captured_output,
    }


def _parse_request(raw: str):
    """Validated request dict, or an infra_error verdict explaining why not."""
    try:
        request = json.loads(raw)
    except json.JSONDecodeError as exc:
        return None, _verdict("infra_error", message=f"request is not valid JSON: {exc}")
    if not isinstance(request, dict):
        return None, _verdict("infra_error", message="request must be a JSON object")
    mode = request.get("mode")
    if mode not in _MODES:
        return None, _verdict("infra_error", message=f"unknown request mode: {mode!r}")
    if not isinstance(request.get("source"), str):
        return None, _verdict("infra_error", message="request field 'source' must be a string")
    if mode == "execute" and not isinstance(request.get("test_program"), str):
        return None, _verdict(
            "infra_error", message="execute requests must carry a test_program string"
        )
    timeout_s = request.get("timeout_s", DEFAULT_TIMEOUT_S)
    if not isinstance(timeout_s, (int, float)) or isinstance(timeout_s, bool) or not timeout_s > 0:
        return None, _verdict(
            "infra_error", message=f"request field 'timeout_s' must be positive, got {timeout_s!r}"
        )
    for field in ("setup_code",):
        if request.get(field) is not None and not isinstance(request[field], str):
            return None, _verdict(
                "infra_error", message=f"request field {field!r} must be a string or null"
            )
    request["timeout_s"] = float(timeout_s)
    return request, None


def _run_compile(source: str) -> dict:
    start = time.monotonic()
    try:
        compile(source, COMPILE_FILENAME, "exec")
    except Exception as exc:
        return _verdict(
            "compile_error",
            exception_class=type(exc).__name__,
            message=str(exc),
            duration_s=time.monotonic() - start,
        )
    return _verdict("pass", duration_s=time.monotonic() - start)


def _run_execute(request: dict) -> dict:
    namespace = {"__name__": "__main__"}
    phases = [
        ("setup", request.get("setup_code")),
        ("definition", request["source"]),
        ("test", request["test_program"]),
    ]
    timeout_s = request["timeout_s"]
    captured = io.StringIO()
    original_stdin = sys.stdin
    sys.stdin = io.StringIO("")
    start = time.monotonic()
    phase = "setup"
    try:
        signal.signal(signal.SIGALRM, _raise_timeout)
        signal.setitimer(signal.ITIMER_REAL, timeout_s)
        with redirect_stdout(captured), redirect_stderr(captured):
            for phase, code in phases:
                if not code:
                    continue
                try:
                    exec(compile(code, COMPILE_FILENAME, "exec"), namespace)
                except _Timeout:
                    raise
                except BaseException as exc:
                    return _verdict(
                        "fail",
                        exception_class=type(exc).__name__,
                        message=str(exc),
                        phase=phase,
                        duration_s=time.monotonic() - start,
                        captured_output=captured.getvalue()[:OUTPUT_LIMIT],
                    )
    except _Timeout:
        return _verdict(
            "timeout",
            exception_class="TimeoutError",
            message=f"execution exceeded {timeout_s}s",
            phase=phase,
            duration_s=time.monotonic() - start,
            captured_output=captured.getvalue()[:OUTPUT_LIMIT],
        )
    finally:
        signal.setitimer(signal.ITIMER_REAL, 0)
        sys.stdin = original_stdin
    return _verdict(
        "pass",
        duration_s=time.monotonic() - start,
        captured_output=captured.getvalue()[:OUTPUT_LIMIT],
    )


def serve_once() -> int:
    """Handle exactly one request from stdin; the process serves and dies."""
    request, problem = _parse_request(sys.stdin.read())
    if problem is not None:
        print(json.dumps(problem), flush=True)
        return _EXIT_BAD_REQUEST
    if request["mode"] == "compile":
        outcome = _run_compile(request["source"])
    else:
        outcome = _run_execute(request)
    print(json.dumps(outcome), flush=True)
    return _EXIT_OK
