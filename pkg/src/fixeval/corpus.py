"""Loading benchmark tasks and model completions from line-delimited JSON.

Two input schemas are understood: one where each record carries a function
signature/docstring prompt, a ``check``-style test function, and an explicit
entry point; and one where the record holds a natural-language description,
a reference solution, and a list of assert statements. Both are normalized
to the same :class:`Task` value so the rest of the pipeline never branches
on dataset origin.
"""

from __future__ import annotations

import json
import re
import warnings
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Optional

from . import pyscan

_CALL_IN_ASSERT_RE = re.compile(r"assert\s+\(?\s*([A-Za-z_]\w*)\s*\(")
_DEF_NAME_RE = re.compile(r"^\s*def\s+([A-Za-z_]\w*)", re.MULTILINE)


class CorpusError(ValueError):
    """Raised for unreadable, malformed, or inconsistent corpus files."""


@dataclass(frozen=True)
class Task:
    """One benchmark problem, normalized across input schemas."""

    task_id: str
    prompt: str
    test_program: str
    entry_point: str
    setup_code: Optional[str] = None

    def to_record(self) -> dict:
        return asdict(self)

    @classmethod
    def from_record(cls, record: dict) -> "Task":
        return cls(
            task_id=record["task_id"],
            prompt=record["prompt"],
            test_program=record["test_program"],
            entry_point=record["entry_point"],
            setup_code=record.get("setup_code"),
        )


@dataclass(frozen=True)
class Completion:
    """One model output for one task. ``text`` may legitimately be empty."""

    task_id: str
    model_id: str
    run_index: int
    text: str

    def to_record(self) -> dict:
        return asdict(self)

    @classmethod
    def from_record(cls, record: dict) -> "Completion":
        return cls(
            task_id=record["task_id"],
            model_id=record["model_id"],
            run_index=record["run_index"],
            text=record["text"],
        )


@dataclass(frozen=True)
class CorpusStats:
    task_count: int
    avg_tests_per_task: float


def _iter_records(path: Path):
    try:
        raw = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise CorpusError(f"corpus file not found: {path}") from None
    for lineno, line in enumerate(raw.split("\n"), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(record, dict):
            raise CorpusError(f"{path}:{lineno}: record is not a JSON object")
        yield lineno, record


def _require(record: dict, fields: tuple[str, ...], path: Path, lineno: int) -> None:
    for field in fields:
        if field not in record:
            raise CorpusError(f"{path}:{lineno}: missing field '{field}'")


def _entry_point_for_assert_style(record: dict, path: Path, lineno: int) -> str:
    for test in record["test_list"]:
        if m := _CALL_IN_ASSERT_RE.search(test):
            return m.group(1)
    if m := _DEF_NAME_RE.search(record.get("code", "")):
        return m.group(1)
    raise CorpusError(
        f"{path}:{lineno}: cannot determine entry point from test_list or code"
    )


def load_tasks(
    path: str | Path,
    schema: str,
    *,
    include_challenge_tests: bool = False,
) -> list[Task]:
    """Load tasks from a line-delimited JSON file in the named schema.

    ``schema`` is ``"humaneval"`` (signature prompt, ``check`` test function,
    explicit entry point) or ``"mbpp"`` (description, reference solution,
    assert list). Challenge asserts are appended only when
    ``include_challenge_tests`` is set.
    """
    path = Path(path)
    if schema not in ("humaneval", "mbpp"):
        raise CorpusError(f"unknown corpus schema: {schema!r}")
    tasks: list[Task] = []
    seen: set[str] = set()
    for lineno, record in _iter_records(path):
        if schema == "humaneval":
            _require(record, ("task_id", "prompt", "test", "entry_point"), path, lineno)
            entry_point = record["entry_point"]
            # The dataset's test text defines check(candidate) but never
            # calls it; the runnable program must add the invocation.
            test_program = record["test"].rstrip("\n") + f"\n\ncheck({entry_point})\n"
            task = Task(
                task_id=str(record["task_id"]),
                prompt=record["prompt"],
                test_program=test_program,
                entry_point=entry_point,
                setup_code=None,
            )
        else:
            _require(record, ("task_id", "text", "test_list"), path, lineno)
            test_lines = list(record["test_list"])
            if include_challenge_tests:
                test_lines.extend(record.get("challenge_test_list", ()))
            if not test_lines:
                raise CorpusError(f"{path}:{lineno}: empty test_list")
            entry_point = _entry_point_for_assert_style(record, path, lineno)
            setup = record.get("test_setup_code", "")
            task = Task(
                task_id=str(record["task_id"]),
                prompt=record["text"],
                test_program="\n".join(test_lines) + "\n",
                entry_point=entry_point,
                setup_code=setup if setup else None,
            )
        if not task.entry_point.isidentifier():
            raise CorpusError(
                f"{path}:{lineno}: entry point {task.entry_point!r} is not an identifier"
            )
        if task.task_id in seen:
            raise CorpusError(f"{path}:{lineno}: duplicate task_id {task.task_id!r}")
        seen.add(task.task_id)
        tasks.append(task)
    return tasks


def load_completions(path: str | Path) -> list[Completion]:
    """Load model completions; order-preserving, empty text allowed.

    Duplicate (task_id, model_id, run_index) triples are kept — they may be
    deliberate resamples — but each one triggers a warning.
    """
    path = Path(path)
    completions: list[Completion] = []
    seen: set[tuple[str, str, int]] = set()
    for lineno, record in _iter_records(path):
        _require(record, ("task_id", "model_id", "run_index", "text"), path, lineno)
        run_index = record["run_index"]
        if not isinstance(run_index, int) or isinstance(run_index, bool):
            raise CorpusError(f"{path}:{lineno}: run_index must be an integer")
        if run_index < 0:
            raise CorpusError(f"{path}:{lineno}: negative run_index {run_index}")
        if not isinstance(record["text"], str):
            raise CorpusError(f"{path}:{lineno}: text must be a string")
        completion = Completion(
            task_id=str(record["task_id"]),
            model_id=str(record["model_id"]),
            run_index=run_index,
            text=record["text"],
        )
        key = (completion.task_id, completion.model_id, completion.run_index)
        if key in seen:
            warnings.warn(
                f"{path}:{lineno}: duplicate completion for {key}; keeping both",
                stacklevel=2,
            )
        seen.add(key)
        completions.append(completion)
    return completions


def _defines_entry_point(text: str, entry_point: str) -> bool:
    for unit in pyscan.segment_top_level(text):
        if unit.kind in ("function_def", "decorated_def", "class_def"):
            if unit.name == entry_point:
                return True
    return False


def assemble_program(task: Task, completion: Completion, mode: str = "auto") -> str:
    """Produce the runnable definition text for one completion.

    ``concat`` appends the completion to the prompt (the completion is a
    function body); ``completion_only`` uses the completion verbatim (the
    model regenerated the whole function); ``auto`` picks ``completion_only``
    exactly when the completion already defines the entry point at top level.
    """
    if task.task_id != completion.task_id:
        raise ValueError(
            f"task {task.task_id!r} does not match completion {completion.task_id!r}"
        )
    if mode == "concat":
        return task.prompt + completion.text
    if mode == "completion_only":
        return completion.text
    if mode == "auto":
        if _defines_entry_point(completion.text, task.entry_point):
            return completion.text
        return task.prompt + completion.text
    raise ValueError(f"unknown assembly mode: {mode!r}")


_ASSERT_LINE_RE = re.compile(r"^\s*assert\b", re.MULTILINE)


def corpus_stats(tasks: list[Task]) -> CorpusStats:
    """Informational metadata: task count and mean assert-lines per task."""
    if not tasks:
        return CorpusStats(task_count=0, avg_tests_per_task=0.0)
    counts = [len(_ASSERT_LINE_RE.findall(t.test_program)) for t in tasks]
    return CorpusStats(
        task_count=len(tasks),
        avg_tests_per_task=sum(counts) / len(tasks),
    )
