"""Repair-step semantics and the full filter/truncate/import pipeline.

Pipeline tests run against the in-process executor from _fakes, which gives
real interpreter verdicts without subprocess round-trips; live-runner runs
of the same mini-corpus happen in the acceptance tests.
"""

import json
from pathlib import Path

import pytest

from _fakes import InProcessExecutor
from fixeval import fixer
from fixeval.corpus import Completion, load_completions, load_tasks
from fixeval.fixer import (
    CompileCapabilityError,
    FixReport,
    FixStepResult,
    PipelineConfig,
    PipelineError,
    filter_code,
    fix_missing_imports,
    run_pipeline,
    truncate_code,
)
from fixeval.moduledb import default_module_db
from fixeval.pyscan import defined_names
from fixeval.sandbox import ExecutionOutcome

FIXTURES = Path(__file__).parent / "fixtures" / "listings"
MINICORPUS = Path(__file__).parent / "fixtures" / "minicorpus"


def fixture(name: str) -> str:
    return (FIXTURES / name).read_text()


def compiles(source: str) -> bool:
    try:
        compile(source, "<fixture>", "exec")
        return True
    except (SyntaxError, ValueError):
        return False


def name_error(name: str) -> ExecutionOutcome:
    return ExecutionOutcome(
        status="fail",
        exception_class="NameError",
        message=f"name '{name}' is not defined",
        phase="test",
    )


@pytest.fixture(scope="module")
def db():
    return default_module_db()


@pytest.fixture(scope="module")
def minicorpus():
    tasks = {t.task_id: t for t in load_tasks(MINICORPUS / "tasks.jsonl", "humaneval")}
    completions = load_completions(MINICORPUS / "completions.jsonl")
    return tasks, completions


class TestFilterCode:
    def test_main_guard_removed_definitions_kept(self):
        source = (
            "def compute(x):\n"
            "\treturn x + 1\n"
            "\n"
            "if __name__ == '__main__':\n"
            "\tprint(compute(3))\n"
        )
        result = filter_code(source)
        assert result.changed
        assert "compute" in defined_names(result.output_source)
        assert "__main__" not in result.output_source
        assert any("main-guard" in a for a in result.actions)

    def test_top_level_assert_removed(self):
        source = "def f(x):\n\treturn x\n\nassert f(1) == 2\n"
        result = filter_code(source)
        assert "assert" not in result.output_source
        assert any("assert" in a for a in result.actions)

    def test_top_level_input_statement_removed(self):
        source = "def f(x):\n\treturn x\n\nn = input()\nf(n)\n"
        result = filter_code(source)
        assert "input" not in result.output_source
        # the bare call of the entry function is not scaffolding we remove
        assert "f(n)" in result.output_source

    def test_in_body_input_survives(self):
        source = fixture("play_hand_input.py")
        result = filter_code(source)
        assert "input(" in result.output_source

    def test_in_body_assert_survives(self):
        source = "def f(x):\n\tassert x > 0\n\treturn x\n"
        result = filter_code(source)
        assert "assert x > 0" in result.output_source

    def test_string_mentioning_input_not_removed(self):
        source = 'hint = "call input() to read"\n'
        assert filter_code(source).output_source == source

    def test_string_assert_not_removed(self):
        source = 'text = "assert nothing"\n'
        assert filter_code(source).output_source == source

    def test_space_indentation_rewritten_to_tabs(self):
        source = "def f(x):\n    return x\n"
        result = filter_code(source)
        assert result.output_source == "def f(x):\n\treturn x\n"
        assert any("tab" in a for a in result.actions)

    def test_clean_tab_source_unchanged(self):
        source = "def f(x):\n\treturn x\n"
        result = filter_code(source)
        assert not result.changed
        assert result.actions == []

    @pytest.mark.parametrize("name", sorted(p.name for p in FIXTURES.glob("*.py")))
    def test_idempotent_on_every_fixture(self, name):
        once = filter_code(fixture(name)).output_source
        again = filter_code(once)
        assert not again.changed

    def test_changed_flag_matches_text_difference(self):
        with pytest.raises(ValueError):
            FixStepResult(
                step="filter", input_source="a", output_source="a", changed=True,
                actions=["x"],
            )
        with pytest.raises(ValueError):
            FixStepResult(
                step="filter", input_source="a", output_source="b", changed=True,
            )


class TestTruncateCode:
    def test_compiling_source_untouched(self):
        source = "def f():\n\treturn 1\n\ndef g():\n\treturn 2\n"
        result = truncate_code(source, compiles)
        assert not result.changed
        assert result.actions == []
        assert not result.exhausted

    def test_broken_cipher_tail_dropped(self):
        result = truncate_code(fixture("ciphers_overflow.py"), compiles)
        assert result.changed
        assert compiles(result.output_source)
        kept = defined_names(result.output_source)
        assert {"encode_cyclic", "decode_cyclic"} <= kept
        assert "encode_caesar" not in kept

    def test_single_incomplete_unit_hits_floor(self):
        source = fixture("vigenere_header.py")
        result = truncate_code(source, compiles)
        assert not result.changed
        assert result.exhausted

    def test_unclosed_single_function_hits_floor(self):
        result = truncate_code(fixture("common_unclosed.py"), compiles)
        assert result.exhausted
        assert not result.changed

    def test_complete_but_rejected_last_unit_dropped(self):
        source = "def ok():\n\treturn 1\n\ndef bad():\n\treturn return 1\n"
        result = truncate_code(source, compiles)
        assert compiles(result.output_source)
        assert "bad" not in result.output_source
        assert any("still not compiling" in a for a in result.actions)

    @pytest.mark.parametrize("name", sorted(p.name for p in FIXTURES.glob("*.py")))
    def test_output_is_line_prefix_of_input(self, name):
        source = fixture(name)
        result = truncate_code(source, compiles)
        in_lines = source.split("\n")
        out_lines = result.output_source.rstrip("\n").split("\n")
        assert out_lines == in_lines[: len(out_lines)]

    def test_broken_oracle_raises_capability_error(self):
        def broken(_text):
            raise OSError("no interpreter")

        with pytest.raises(CompileCapabilityError):
            truncate_code("x = (\n", broken)


class TestFixMissingImports:
    def test_hashlib_prepended_byte_exactly(self, db):
        source = fixture("md5_no_import.py")
        result = fix_missing_imports(source, name_error("hashlib"), db)
        assert result.output_source == "import hashlib\n\n" + source
        assert result.output_source == fixture("md5_with_import.py")

    def test_math_prepended(self, db):
        source = fixture("sum_squares_math.py")
        result = fix_missing_imports(source, name_error("math"), db)
        assert result.output_source.startswith("import math\n\n")

    def test_second_import_joins_leading_block_without_blank(self, db):
        source = "import hashlib\n\ndef f():\n\treturn hashlib.md5(math.pi)\n"
        result = fix_missing_imports(source, name_error("math"), db)
        assert result.output_source.startswith("import hashlib\nimport math\n\ndef f")

    def test_member_uses_from_import(self, db):
        result = fix_missing_imports("def f(x):\n\treturn ceil(x)\n", name_error("ceil"), db)
        assert result.output_source.startswith("from math import ceil\n\n")

    def test_alias_member_uses_plain_import(self, db):
        result = fix_missing_imports("m = np.eye(3)\n", name_error("np"), db)
        assert result.output_source.startswith("import numpy as np\n\n")

    def test_unknown_name_declined(self, db):
        source = fixture("interval_isprime.py")
        result = fix_missing_imports(source, name_error("isPrime"), db)
        assert not result.changed
        assert result.output_source == source
        assert any("module database" in a for a in result.actions)

    def test_non_name_error_trigger_declined(self, db):
        trigger = ExecutionOutcome(
            status="fail", exception_class="KeyError", message="'x'"
        )
        assert not fix_missing_imports("x = 1\n", trigger, db).changed

    def test_unparseable_message_declined(self, db):
        trigger = ExecutionOutcome(
            status="fail", exception_class="NameError", message="something odd"
        )
        result = fix_missing_imports("x = 1\n", trigger, db)
        assert not result.changed
        assert result.actions  # reason recorded

    def test_duplicate_binding_declined(self, db):
        source = "import hashlib\n\nx = hashlib.md5\n"
        result = fix_missing_imports(source, name_error("hashlib"), db)
        assert not result.changed
        assert any("declining duplicate" in a for a in result.actions)

    def test_budget_must_be_positive(self, db):
        with pytest.raises(ValueError):
            fix_missing_imports("x = 1\n", name_error("math"), db, budget=0)


class CountingExecutor(InProcessExecutor):
    def __init__(self):
        self.execute_calls = 0

    def execute(self, request):
        self.execute_calls += 1
        return super().execute(request)


class NoCompileExecutor(InProcessExecutor):
    def compile_check(self, source, timeout_s=10.0):
        return ExecutionOutcome(status="infra_error", message="compile service down")


class DeadSandbox:
    def execute(self, request):
        return ExecutionOutcome(status="infra_error", message="no runner, no transcript")

    def compile_check(self, source, timeout_s=10.0):
        return ExecutionOutcome(status="infra_error", message="no runner, no transcript")


class TestRunPipeline:
    EXPECTED_STEPS = {
        "mini/0": 0,
        "mini/1": None,
        "mini/2": 0,
        "mini/3": 3,
        "mini/4": 2,
        "mini/5": 1,
    }

    def run_all(self, minicorpus, db):
        tasks, completions = minicorpus
        return {
            c.task_id: run_pipeline(tasks[c.task_id], c, InProcessExecutor(), db)
            for c in completions
        }

    def test_minicorpus_step_counts(self, minicorpus, db):
        reports = self.run_all(minicorpus, db)
        assert {tid: r.steps_needed_to_pass for tid, r in reports.items()} == self.EXPECTED_STEPS

    def test_minicorpus_pass_counts_rise_two_to_five(self, minicorpus, db):
        tasks, completions = minicorpus
        sandbox = InProcessExecutor()
        before = after = 0
        for c in completions:
            report = run_pipeline(tasks[c.task_id], c, sandbox, db)
            before += report.steps_needed_to_pass == 0
            after += report.final_outcome.status == "pass"
        assert (before, after) == (2, 5)

    def test_passing_completion_has_three_noop_steps(self, minicorpus, db):
        tasks, _ = minicorpus
        completion = Completion(task_id="mini/0", model_id="m", run_index=0, text="    return a + b\n")
        report = run_pipeline(tasks["mini/0"], completion, InProcessExecutor(), db)
        assert report.steps_needed_to_pass == 0
        assert [s.step for s in report.steps] == ["filter", "truncate", "import_fix"]
        assert all(not s.changed for s in report.steps)

    def test_fixed_sources_still_define_entry_point(self, minicorpus, db):
        tasks, _ = minicorpus
        for tid, report in self.run_all(minicorpus, db).items():
            entry = tasks[tid].entry_point
            assert entry in defined_names(report.final_source), tid

    def test_pipeline_idempotent_on_fixed_output(self, minicorpus, db):
        tasks, _ = minicorpus
        for tid, report in self.run_all(minicorpus, db).items():
            if report.final_outcome.status != "pass":
                continue
            again = run_pipeline(
                tasks[tid],
                Completion(task_id=tid, model_id="m", run_index=1, text=report.final_source),
                InProcessExecutor(),
                db,
            )
            assert again.steps_needed_to_pass == 0, tid
            assert again.final_source == report.final_source

    def test_import_fix_line_budget(self, minicorpus, db):
        tasks, completions = minicorpus
        completion = next(c for c in completions if c.task_id == "mini/3")
        report = run_pipeline(tasks["mini/3"], completion, InProcessExecutor(), db)
        step3 = report.steps[2]
        budget = PipelineConfig().import_budget
        delta = len(step3.output_source.split("\n")) - len(step3.input_source.split("\n"))
        assert 0 < delta <= budget + 1  # inserted imports plus one separator blank

    def test_chained_name_errors_fixed_within_budget(self, db):
        tasks = {t.task_id: t for t in load_tasks(MINICORPUS / "tasks.jsonl", "humaneval")}
        task = tasks["mini/0"]
        task = type(task)(
            task_id="mini/0",
            prompt=task.prompt,
            test_program="def check(candidate):\n    assert len(candidate()) == 3\n\ncheck(combo)\n",
            entry_point="combo",
        )
        completion = Completion(
            task_id="mini/0", model_id="m", run_index=0,
            text="def combo():\n\treturn [hashlib, json, os]\n",
        )
        report = run_pipeline(task, completion, InProcessExecutor(), db)
        assert report.steps_needed_to_pass == 3
        assert len([a for a in report.steps[2].actions if a.startswith("inserted")]) == 3
        assert not report.steps[2].exhausted

    def test_budget_exhaustion_reported(self, db):
        tasks = {t.task_id: t for t in load_tasks(MINICORPUS / "tasks.jsonl", "humaneval")}
        task = type(tasks["mini/0"])(
            task_id="mini/0",
            prompt=tasks["mini/0"].prompt,
            test_program="def check(candidate):\n    assert len(candidate()) == 3\n\ncheck(combo)\n",
            entry_point="combo",
        )
        completion = Completion(
            task_id="mini/0", model_id="m", run_index=0,
            text="def combo():\n\treturn [hashlib, json, os]\n",
        )
        report = run_pipeline(
            task, completion, InProcessExecutor(), db,
            PipelineConfig(import_budget=2),
        )
        assert report.steps_needed_to_pass is None
        assert report.steps[2].exhausted
        assert report.final_outcome.exception_class == "NameError"

    def test_retest_only_after_changes(self, minicorpus, db):
        tasks, completions = minicorpus
        sandbox = CountingExecutor()
        completion = next(c for c in completions if c.task_id == "mini/1")
        run_pipeline(tasks["mini/1"], completion, sandbox, db)
        # initial test + one re-test after the reindent; truncate and import
        # steps change nothing so trigger no further runs
        assert sandbox.execute_calls == 2

    def test_compile_capability_fallback_recorded(self, minicorpus, db):
        tasks, completions = minicorpus
        completion = next(c for c in completions if c.task_id == "mini/4")
        report = run_pipeline(tasks["mini/4"], completion, NoCompileExecutor(), db)
        assert report.steps_needed_to_pass == 2
        assert any("syntactic check" in a for a in report.steps[1].actions)

    def test_dead_sandbox_raises_pipeline_error(self, minicorpus, db):
        tasks, completions = minicorpus
        with pytest.raises(PipelineError):
            run_pipeline(tasks[completions[0].task_id], completions[0], DeadSandbox(), db)

    def test_mismatched_completion_rejected(self, minicorpus, db):
        tasks, _ = minicorpus
        stray = Completion(task_id="mini/9", model_id="m", run_index=0, text="")
        with pytest.raises(ValueError):
            run_pipeline(tasks["mini/0"], stray, InProcessExecutor(), db)

    def test_report_serializes_to_json(self, minicorpus, db):
        tasks, completions = minicorpus
        completion = next(c for c in completions if c.task_id == "mini/3")
        report = run_pipeline(tasks["mini/3"], completion, InProcessExecutor(), db)
        record = json.loads(json.dumps(report.to_record()))
        assert record["task_id"] == "mini/3"
        assert record["steps_needed_to_pass"] == 3
        assert [s["step"] for s in record["steps"]] == ["filter", "truncate", "import_fix"]

    def test_report_rejects_bad_step_count(self):
        with pytest.raises(ValueError):
            FixReport(
                task_id="t", model_id="m", run_index=0,
                steps=(),
                final_source="",
                final_outcome=ExecutionOutcome(status="pass"),
                steps_needed_to_pass=0,
            )

    def test_report_rejects_out_of_range_step_index(self, minicorpus, db):
        noop = lambda step: FixStepResult(
            step=step, input_source="", output_source="", changed=False
        )
        with pytest.raises(ValueError):
            FixReport(
                task_id="t", model_id="m", run_index=0,
                steps=(noop("filter"), noop("truncate"), noop("import_fix")),
                final_source="",
                final_outcome=ExecutionOutcome(status="pass"),
                steps_needed_to_pass=4,
            )
