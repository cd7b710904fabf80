"""Shared manifest of recorded execution probes.

Each probe is a fully pinned ExecutionRequest over a fixture file. The same
manifest is used three ways: ``scripts/record_transcripts.py`` records the
outcomes into ``tests/fixtures/transcripts/probes.jsonl``; the replay-based
acceptance tests answer these requests from that committed file; and the
live-runner acceptance test re-records the manifest against a real
interpreter and requires the resulting bytes to match the committed file.
Any drift between the recorded semantics and the real runner shows up as a
byte diff there, so keep requests deterministic: fixed timeout, no
environment-dependent content.
"""

from pathlib import Path

from fixeval.sandbox import ExecutionRequest

FIXTURES = Path(__file__).parent / "fixtures" / "listings"
PROBES_TRANSCRIPT = Path(__file__).parent / "fixtures" / "transcripts" / "probes.jsonl"

_MD5_TEST = (
    "def check(candidate):\n"
    "    assert candidate('Hello world') == '3e25960a79dbc69b674cd4ec67a72c62'\n"
    "    assert candidate('') is None\n"
    "\n"
    "check(string_to_md5)\n"
)

_INTERSECTION_TEST = "assert intersection((1, 3), (2, 4)) == 'NO'\n"

_PAREN_TEST = "assert separate_paren_groups('( ) (( ))') == ['()', '(())']\n"


def _fixture(name: str) -> str:
    return (FIXTURES / name).read_text()


def build_probes() -> list[tuple[str, ExecutionRequest]]:
    return [
        (
            "missing-import-md5",
            ExecutionRequest(
                mode="execute",
                source=_fixture("md5_no_import.py"),
                test_program=_MD5_TEST,
                entry_point="string_to_md5",
                timeout_s=10.0,
            ),
        ),
        (
            "unbalanced-compile",
            ExecutionRequest(
                mode="compile",
                source=_fixture("common_unclosed.py"),
                timeout_s=10.0,
            ),
        ),
        (
            "misremembered-isprime",
            ExecutionRequest(
                mode="execute",
                source=_fixture("interval_isprime.py"),
                test_program=_INTERSECTION_TEST,
                entry_point="intersection",
                timeout_s=10.0,
            ),
        ),
        (
            "intentional-raise-parens",
            ExecutionRequest(
                mode="execute",
                source=_fixture("paren_groups_nie.py"),
                test_program=_PAREN_TEST,
                entry_point="separate_paren_groups",
                timeout_s=10.0,
            ),
        ),
    ]


def run_probe(executor, request: ExecutionRequest):
    """Dispatch a probe to either executor flavor by request mode.

    Compile probes go through compile_check(source, timeout_s) so the executor
    synthesizes a request with the same digest as the manifest entry.
    """
    if request.mode == "compile":
        return executor.compile_check(request.source, request.timeout_s)
    return executor.execute(request)
