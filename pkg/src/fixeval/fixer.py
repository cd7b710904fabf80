"""Three-step repair pipeline for failing completions.

Step 1 (filter) strips top-level scaffolding that models tend to append —
main guards, bare assert statements, interactive-input calls — and
normalizes all indentation to tabs. Step 2 (truncate) drops trailing
top-level units until the file compiles, never touching anything before the
break. Step 3 (import fix) reacts to NameError verdicts by prepending the
import that binds the undefined name, consulting a module database.

`run_pipeline` sequences the steps in that fixed order, re-testing after
every step that changed the text, and reports the first step index at which
the program passed (0 when it needed no repair at all).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from .classifier import extract_undefined_name
from .corpus import Completion, Task, assemble_program
from .moduledb import ModuleDatabase
from .pyscan import imported_names, masked_source, reindent, segment_top_level, syntactic_check
from .sandbox import ExecutionOutcome, ExecutionRequest

DEFAULT_IMPORT_BUDGET = 5

STEP_FILTER = "filter"
STEP_TRUNCATE = "truncate"
STEP_IMPORT_FIX = "import_fix"
STEP_ORDER = (STEP_FILTER, STEP_TRUNCATE, STEP_IMPORT_FIX)


class CompileCapabilityError(RuntimeError):
    """The compile oracle itself is unavailable — not a verdict on the code."""


class PipelineError(RuntimeError):
    """The sandbox could not serve a request; distinct from any code failure."""


@dataclass(frozen=True)
class FixStepResult:
    step: str
    input_source: str
    output_source: str
    changed: bool
    actions: list[str] = field(default_factory=list)
    exhausted: bool = False

    def __post_init__(self):
        if self.step not in STEP_ORDER:
            raise ValueError(f"unknown fix step: {self.step!r}")
        if self.changed != (self.input_source != self.output_source):
            raise ValueError("changed flag disagrees with the source texts")
        if self.changed and not self.actions:
            raise ValueError("a step that changed the source must say what it did")

    def to_record(self) -> dict:
        return {
            "step": self.step,
            "changed": self.changed,
            "actions": list(self.actions),
            "exhausted": self.exhausted,
            "input_source": self.input_source,
            "output_source": self.output_source,
        }


@dataclass(frozen=True)
class FixReport:
    task_id: str
    model_id: str
    run_index: int
    steps: tuple[FixStepResult, ...]
    final_source: str
    final_outcome: ExecutionOutcome
    steps_needed_to_pass: Optional[int]

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        if tuple(s.step for s in self.steps) != STEP_ORDER:
            raise ValueError("steps must follow the order filter, truncate, import_fix")
        if self.steps_needed_to_pass not in (None, 0, 1, 2, 3):
            raise ValueError("steps_needed_to_pass must be one of 0..3 when present")

    def to_record(self) -> dict:
        return {
            "task_id": self.task_id,
            "model_id": self.model_id,
            "run_index": self.run_index,
            "steps": [s.to_record() for s in self.steps],
            "final_source": self.final_source,
            "final_outcome": self.final_outcome.to_record(),
            "steps_needed_to_pass": self.steps_needed_to_pass,
        }


@dataclass(frozen=True)
class PipelineConfig:
    timeout_s: float = 10.0
    import_budget: int = DEFAULT_IMPORT_BUDGET
    assemble_mode: str = "auto"


def _noop(step: str, source: str) -> FixStepResult:
    return FixStepResult(step=step, input_source=source, output_source=source, changed=False)


def _is_bare_assert(masked_text: str) -> bool:
    head = masked_text.lstrip()
    return head == "assert" or head.startswith("assert ") or head.startswith("assert(")


_INPUT_CALL_RE = re.compile(r"(?<![\w.])input\s*\(")


def _calls_input(masked_text: str) -> bool:
    # masked text has string interiors blanked, so 'input(' in a literal
    # cannot trigger; identifier boundaries keep my_input/input_data out.
    return _INPUT_CALL_RE.search(masked_text) is not None


def filter_code(source: str) -> FixStepResult:
    """Drop top-level scaffolding, then normalize indentation to tabs.

    Only whole top-level units are removed; statements inside function or
    class bodies are never touched (in-body interactive reads are instead
    neutralized by the runner closing standard input).
    """
    lines = source.split("\n")
    masked = masked_source(source).split("\n")
    dropped: set[int] = set()
    actions: list[str] = []
    for unit in segment_top_level(source):
        start, end = unit.line_span  # 1-indexed inclusive
        unit_masked = "\n".join(masked[start - 1 : end])
        if unit.kind == "main_guard":
            reason = "removed main-guard block"
        elif unit.kind == "bare_statement" and _is_bare_assert(unit_masked):
            reason = "removed top-level assert"
        elif unit.kind == "bare_statement" and _calls_input(unit_masked):
            reason = "removed top-level interactive-input statement"
        else:
            continue
        dropped.update(range(start - 1, end))
        actions.append(f"{reason} (lines {start}-{end})")

    kept = "\n".join(line for i, line in enumerate(lines) if i not in dropped)
    output = reindent(kept)
    if output != kept:
        actions.append("normalized indentation to tabs")
    if output == source:
        actions = []
    return FixStepResult(
        step=STEP_FILTER,
        input_source=source,
        output_source=output,
        changed=output != source,
        actions=actions,
    )


def truncate_code(source: str, compile_fn: Callable[[str], bool]) -> FixStepResult:
    """Drop trailing top-level units until compile_fn accepts the text.

    Stops at a floor of one remaining unit; `exhausted` reports hitting that
    floor without a successful compile. The output is always a prefix of the
    input by top-level units.
    """
    current = source
    actions: list[str] = []
    exhausted = False
    while True:
        try:
            ok = compile_fn(current)
        except CompileCapabilityError:
            raise
        except Exception as exc:
            raise CompileCapabilityError(f"compile oracle failed: {exc}") from exc
        if ok:
            break
        units = segment_top_level(current)
        if len(units) <= 1:
            exhausted = True
            break
        last = units[-1]
        label = f"{last.kind} '{last.name}'" if last.name else last.kind
        if last.complete:
            actions.append(f"dropped trailing unit {label} (still not compiling)")
        else:
            actions.append(f"dropped incomplete trailing unit {label}")
        lines = current.split("\n")
        keep_through = units[-2].line_span[1]  # 1-indexed inclusive
        current = "\n".join(lines[:keep_through])
        if current and not current.endswith("\n"):
            current += "\n"
    return FixStepResult(
        step=STEP_TRUNCATE,
        input_source=source,
        output_source=current,
        changed=current != source,
        actions=actions,
        exhausted=exhausted,
    )


def fix_missing_imports(
    source: str,
    trigger: ExecutionOutcome,
    db: ModuleDatabase,
    budget: int = DEFAULT_IMPORT_BUDGET,
) -> FixStepResult:
    """Insert one import for the name a NameError outcome complains about.

    One call performs at most one insertion; the pipeline re-tests and calls
    again on fresh NameErrors, up to its budget. Names absent from the
    database are declined and left for the classifier to explain.
    """
    if budget < 1:
        raise ValueError("import budget must be >= 1")

    def declined(note: str) -> FixStepResult:
        return FixStepResult(
            step=STEP_IMPORT_FIX,
            input_source=source,
            output_source=source,
            changed=False,
            actions=[note],
        )

    if getattr(trigger, "exception_class", None) != "NameError":
        return declined("trigger is not a NameError; nothing to import")
    name = extract_undefined_name(getattr(trigger, "message", None))
    if name is None:
        return declined("NameError message does not name an undefined symbol")
    statement = db.import_statement_for(name)
    if statement is None:
        return declined(f"'{name}' is not in the module database; left for classification")
    if name in imported_names(source):
        return declined(f"'{name}' is already bound by an import; declining duplicate")

    units = segment_top_level(source)
    lines = source.split("\n")
    if units and units[0].kind == "import_stmt":
        # extend the existing leading import block, no separator
        block_end = units[0].line_span[1]  # 1-indexed inclusive
        for unit in units[1:]:
            if unit.kind != "import_stmt":
                break
            block_end = unit.line_span[1]
        output = "\n".join(lines[:block_end] + [statement] + lines[block_end:])
    else:
        output = statement + "\n\n" + source
    return FixStepResult(
        step=STEP_IMPORT_FIX,
        input_source=source,
        output_source=output,
        changed=True,
        actions=[f"inserted '{statement}' for undefined name '{name}'"],
    )


def _is_name_error(outcome: ExecutionOutcome) -> bool:
    return outcome.status == "fail" and outcome.exception_class == "NameError"


def run_pipeline(
    task: Task,
    completion: Completion,
    sandbox,
    db: ModuleDatabase,
    config: Optional[PipelineConfig] = None,
) -> FixReport:
    """Test, then filter / truncate / import-fix with a re-test after each change."""
    config = config or PipelineConfig()
    if completion.task_id != task.task_id:
        raise ValueError(
            f"completion for {completion.task_id!r} does not match task {task.task_id!r}"
        )
    source = assemble_program(task, completion, mode=config.assemble_mode)

    def test(text: str) -> ExecutionOutcome:
        outcome = sandbox.execute(
            ExecutionRequest(
                mode="execute",
                source=text,
                setup_code=task.setup_code,
                test_program=task.test_program,
                entry_point=task.entry_point,
                timeout_s=config.timeout_s,
            )
        )
        if outcome.status == "infra_error":
            raise PipelineError(f"sandbox could not serve the request: {outcome.message}")
        return outcome

    def report(steps, final_source, final_outcome, m):
        return FixReport(
            task_id=task.task_id,
            model_id=completion.model_id,
            run_index=completion.run_index,
            steps=tuple(steps),
            final_source=final_source,
            final_outcome=final_outcome,
            steps_needed_to_pass=m,
        )

    outcome = test(source)
    if outcome.status == "pass":
        return report([_noop(s, source) for s in STEP_ORDER], source, outcome, 0)

    current, last = source, outcome
    passed_at: Optional[int] = None

    step1 = filter_code(current)
    if step1.changed:
        current = step1.output_source
        last = test(current)
        if last.status == "pass":
            passed_at = 1

    if passed_at is None:
        step2 = _truncate_with_fallback(current, sandbox, config)
        if step2.changed:
            current = step2.output_source
            last = test(current)
            if last.status == "pass":
                passed_at = 2
    else:
        step2 = _noop(STEP_TRUNCATE, current)

    if passed_at is None and _is_name_error(last):
        base = current
        actions: list[str] = []
        inserted = 0
        exhausted = False
        while True:
            attempt = fix_missing_imports(current, last, db, config.import_budget)
            actions.extend(attempt.actions)
            if not attempt.changed:
                break
            inserted += 1
            current = attempt.output_source
            last = test(current)
            if last.status == "pass":
                passed_at = 3
                break
            if inserted >= config.import_budget:
                exhausted = _is_name_error(last)
                break
            if not _is_name_error(last):
                break
        step3 = FixStepResult(
            step=STEP_IMPORT_FIX,
            input_source=base,
            output_source=current,
            changed=current != base,
            actions=actions,
            exhausted=exhausted,
        )
    else:
        step3 = _noop(STEP_IMPORT_FIX, current)

    return report([step1, step2, step3], current, last, passed_at)


def _truncate_with_fallback(source: str, sandbox, config: PipelineConfig) -> FixStepResult:
    def compile_ok(text: str) -> bool:
        verdict = sandbox.compile_check(text, timeout_s=config.timeout_s)
        if verdict.status == "pass":
            return True
        if verdict.status == "compile_error":
            return False
        raise CompileCapabilityError(
            f"compile capability returned {verdict.status}: {verdict.message}"
        )

    try:
        return truncate_code(source, compile_ok)
    except CompileCapabilityError:
        result = truncate_code(source, lambda text: syntactic_check(text).ok)
        return replace(
            result,
            actions=[*result.actions, "substituted static syntactic check for the compile capability"],
        )
