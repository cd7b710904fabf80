"""Command-line surface: evaluate, fix, report, stats.

`evaluate` runs a completion corpus against its tasks (optionally applying
the repair pipeline) and writes one directory of artifacts: outcomes.jsonl,
errors.jsonl, fixes.jsonl, summary.csv, summary.md. `report` joins two such
directories — a without-fix and a with-fix run — into an improvement report
with figures. `fix` repairs a single source file, degrading to static
analysis when no task context is given. `stats` runs the statistics toolbox
over named CSV columns.

Exit codes: 0 success, 1 usage/config error, 2 infrastructure failure.
Configuration comes from defaults, then a TOML file, then flags — later
sources win.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - 3.10 fallback
    import tomli as tomllib

from . import report as reporting
from . import stats
from .classifier import build_error_record
from .corpus import Completion, CorpusError, assemble_program, load_completions, load_tasks
from .fixer import (
    FixStepResult,
    PipelineConfig,
    PipelineError,
    STEP_IMPORT_FIX,
    filter_code,
    fix_missing_imports,
    run_pipeline,
    truncate_code,
)
from .moduledb import ModuleDatabaseError, default_module_db
from .pyscan import defined_names, imported_names, referenced_names, syntactic_check
from .sandbox import (
    ExecutionOutcome,
    ExecutionRequest,
    SandboxError,
    SandboxExecutor,
    TranscriptRecorder,
    load_transcript,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFRA = 2

SCHEMAS = ("humaneval", "mbpp")
ASSEMBLY_MODES = ("auto", "concat", "completion_only")


class UsageError(ValueError):
    """Bad flags, config, or inputs — reported before any execution."""


@dataclass(frozen=True)
class RunConfig:
    tasks_path: str
    completions_path: str
    output_dir: str
    tasks_schema: str = "humaneval"
    assembly_mode: str = "auto"
    timeout_s: float = 10.0
    parallelism: int = 1
    import_budget: int = 5
    fix_enabled: bool = False
    transcript_path: Optional[str] = None
    record_transcript_path: Optional[str] = None
    challenge_tests: bool = False
    k_values: tuple[int, ...] = (1,)

    def __post_init__(self):
        object.__setattr__(self, "k_values", tuple(self.k_values))
        if self.tasks_schema not in SCHEMAS:
            raise UsageError(f"tasks_schema must be one of {SCHEMAS}")
        if self.assembly_mode not in ASSEMBLY_MODES:
            raise UsageError(f"assembly_mode must be one of {ASSEMBLY_MODES}")
        if self.parallelism < 1:
            raise UsageError("parallelism must be >= 1")
        if self.import_budget < 1:
            raise UsageError("import_budget must be >= 1")
        if not self.timeout_s > 0:
            raise UsageError("timeout_s must be positive")
        if not self.k_values or any(k < 1 for k in self.k_values):
            raise UsageError("k_values must be nonempty with every k >= 1")


_CONFIG_FIELDS = {f.name for f in fields(RunConfig)}
_REQUIRED_FIELDS = ("tasks_path", "completions_path", "output_dir")


def _load_config_file(path: str) -> dict:
    try:
        with open(path, "rb") as handle:
            values = tomllib.load(handle)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"{path}: invalid TOML ({exc})") from None
    unknown = sorted(set(values) - _CONFIG_FIELDS)
    if unknown:
        raise UsageError(f"{path}: unknown config keys: {', '.join(unknown)}")
    return values


def _merge_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if args.config:
        values.update(_load_config_file(args.config))
    for name in _CONFIG_FIELDS:
        flag_value = getattr(args, name, None)
        if flag_value is not None:
            values[name] = flag_value
    missing = [name for name in _REQUIRED_FIELDS if not values.get(name)]
    if missing:
        raise UsageError(f"missing required settings: {', '.join(missing)}")
    return RunConfig(**values)


# ---------------------------------------------------------------------------
# evaluate


def _outcome_row(completion: Completion, outcome: ExecutionOutcome) -> dict:
    return {
        "task_id": completion.task_id,
        "model_id": completion.model_id,
        "run_index": completion.run_index,
        **outcome.to_record(),
    }


def run_evaluate(config: RunConfig) -> int:
    tasks = load_tasks(
        config.tasks_path, config.tasks_schema,
        include_challenge_tests=config.challenge_tests,
    )
    task_map = {t.task_id: t for t in tasks}
    completions = load_completions(config.completions_path)
    orphans = sorted({c.task_id for c in completions} - set(task_map))
    if orphans:
        raise UsageError(f"completions reference unknown tasks: {', '.join(orphans)}")
    if not completions:
        print("warning: completions file is empty; writing empty outputs",
              file=sys.stderr)

    db = default_module_db()
    transcript = load_transcript(config.transcript_path) if config.transcript_path else None
    recorder = TranscriptRecorder() if config.record_transcript_path else None
    sandbox = SandboxExecutor(transcript=transcript, recorder=recorder)

    outcome_rows: list[dict] = []
    error_rows: list[dict] = []
    fix_rows: list[dict] = []

    if config.fix_enabled:
        pipe_config = PipelineConfig(
            timeout_s=config.timeout_s,
            import_budget=config.import_budget,
            assemble_mode=config.assembly_mode,
        )

        def fix_one(completion: Completion):
            try:
                return run_pipeline(
                    task_map[completion.task_id], completion, sandbox, db, pipe_config
                )
            except PipelineError as exc:
                return ExecutionOutcome(status="infra_error", message=str(exc))

        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            results = list(pool.map(fix_one, completions))
        for completion, result in zip(completions, results):
            task = task_map[completion.task_id]
            if isinstance(result, ExecutionOutcome):  # pipeline could not run
                outcome, source = result, None
            else:
                outcome, source = result.final_outcome, result.final_source
                fix_rows.append(result.to_record())
            outcome_rows.append(_outcome_row(completion, outcome))
            if outcome.status not in ("pass", "infra_error"):
                error_rows.append(
                    build_error_record(
                        completion.task_id, completion.model_id, completion.run_index,
                        outcome, source, db, entry_point=task.entry_point,
                    ).to_record()
                )
    else:
        requests = []
        sources = []
        for completion in completions:
            task = task_map[completion.task_id]
            source = assemble_program(task, completion, mode=config.assembly_mode)
            sources.append(source)
            requests.append(
                ExecutionRequest(
                    mode="execute",
                    source=source,
                    setup_code=task.setup_code,
                    test_program=task.test_program,
                    entry_point=task.entry_point,
                    timeout_s=config.timeout_s,
                )
            )
        outcomes = sandbox.batch_execute(requests, parallelism=config.parallelism)
        for completion, source, outcome in zip(completions, sources, outcomes):
            task = task_map[completion.task_id]
            outcome_rows.append(_outcome_row(completion, outcome))
            if outcome.status not in ("pass", "infra_error"):
                error_rows.append(
                    build_error_record(
                        completion.task_id, completion.model_id, completion.run_index,
                        outcome, source, db, entry_point=task.entry_point,
                    ).to_record()
                )

    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_jsonl(out_dir / reporting.OUTCOMES_FILE, outcome_rows)
    _write_jsonl(out_dir / reporting.ERRORS_FILE, error_rows)
    _write_jsonl(out_dir / reporting.FIXES_FILE, fix_rows)
    summary = reporting.summarize_run(outcome_rows, error_rows, config.k_values)
    (out_dir / reporting.SUMMARY_CSV).write_text(
        reporting.render_summary_csv(summary), encoding="utf-8"
    )
    (out_dir / reporting.SUMMARY_MD).write_text(
        reporting.render_summary_markdown(summary), encoding="utf-8"
    )
    if recorder is not None:
        recorder.save(config.record_transcript_path)

    infra = sum(row["status"] == "infra_error" for row in outcome_rows)
    if infra:
        print(f"error: {infra} completion(s) hit infrastructure failures",
              file=sys.stderr)
        return EXIT_INFRA
    return EXIT_OK


def _write_jsonl(path: Path, rows: list[dict]) -> None:
    text = "".join(json.dumps(row, sort_keys=True) + "\n" for row in rows)
    path.write_text(text, encoding="utf-8")


def cmd_evaluate(args: argparse.Namespace) -> int:
    return run_evaluate(_merge_config(args))


# ---------------------------------------------------------------------------
# fix


def _static_fix(text: str, budget: int) -> tuple[str, dict]:
    db = default_module_db()
    log: dict = {
        "mode": "static",
        "notes": [
            "no task context: tests unavailable, truncation uses the static "
            "syntactic check and imports come from name analysis"
        ],
    }
    step1 = filter_code(text)
    current = step1.output_source
    step2 = truncate_code(current, lambda t: syntactic_check(t).ok)
    current = step2.output_source

    base = current
    actions: list[str] = []
    inserted = 0
    for name in sorted(referenced_names(current) - defined_names(current)):
        if inserted >= budget:
            break
        if db.import_statement_for(name) is None or name in imported_names(current):
            continue
        trigger = ExecutionOutcome(
            status="fail",
            exception_class="NameError",
            message=f"name '{name}' is not defined",
        )
        attempt = fix_missing_imports(current, trigger, db, budget)
        if attempt.changed:
            current = attempt.output_source
            actions.extend(attempt.actions)
            inserted += 1
    step3 = FixStepResult(
        step=STEP_IMPORT_FIX,
        input_source=base,
        output_source=current,
        changed=current != base,
        actions=actions,
    )
    log["steps"] = [s.to_record() for s in (step1, step2, step3)]
    return current, log


def cmd_fix(args: argparse.Namespace) -> int:
    if args.source == "-":
        text = sys.stdin.read()
    else:
        try:
            text = Path(args.source).read_text(encoding="utf-8")
        except FileNotFoundError:
            raise UsageError(f"source file not found: {args.source}") from None

    if bool(args.tasks_path) != bool(args.task_id):
        raise UsageError("--tasks-path and --task-id must be given together")

    if not args.tasks_path:
        fixed, log = _static_fix(text, args.import_budget)
        sys.stdout.write(fixed)
        print(json.dumps(log, sort_keys=True), file=sys.stderr)
        return EXIT_OK

    tasks = load_tasks(args.tasks_path, args.tasks_schema)
    task = next((t for t in tasks if t.task_id == args.task_id), None)
    if task is None:
        raise UsageError(f"task {args.task_id!r} not found in {args.tasks_path}")
    completion = Completion(
        task_id=task.task_id, model_id="cli", run_index=0, text=text
    )
    transcript = load_transcript(args.transcript_path) if args.transcript_path else None
    sandbox = SandboxExecutor(transcript=transcript)
    fix_report = run_pipeline(
        task, completion, sandbox, default_module_db(),
        PipelineConfig(timeout_s=args.timeout_s, import_budget=args.import_budget),
    )
    sys.stdout.write(fix_report.final_source)
    log = {"mode": "pipeline", **fix_report.to_record()}
    print(json.dumps(log, sort_keys=True), file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# report


def cmd_report(args: argparse.Namespace) -> int:
    before = reporting.load_run(args.before_dir)
    after = reporting.load_run(args.after_dir)
    improvement = reporting.build_improvement_report(before, after, args.k_values or (1,))
    written = reporting.write_improvement_report(improvement, args.output_dir)
    for path in written:
        print(path)
    return EXIT_OK


# ---------------------------------------------------------------------------
# stats

_STATS_ARITY = {"pearson": 2, "wilcoxon": 2, "fit": 2, "summarize": 1}


def _numeric_column(rows: list[dict], name: str, table: str) -> list[float]:
    if not rows:
        raise UsageError(f"{table}: table has no data rows")
    if name not in rows[0]:
        available = ", ".join(rows[0].keys())
        raise UsageError(f"{table}: no column named {name!r} (available: {available})")
    values = []
    for lineno, row in enumerate(rows, start=2):  # header occupies line 1
        cell = row[name]
        try:
            values.append(float(cell))
        except (TypeError, ValueError):
            raise UsageError(
                f"{table}: line {lineno}: non-numeric value {cell!r} in column {name!r}"
            ) from None
    return values


def cmd_stats(args: argparse.Namespace) -> int:
    arity = _STATS_ARITY[args.operation]
    if len(args.columns) != arity:
        raise UsageError(
            f"operation {args.operation!r} needs exactly {arity} column(s), "
            f"got {len(args.columns)}"
        )
    try:
        with open(args.table, newline="", encoding="utf-8") as handle:
            rows = list(csv.DictReader(handle))
    except FileNotFoundError:
        raise UsageError(f"table not found: {args.table}") from None
    columns = [_numeric_column(rows, name, args.table) for name in args.columns]
    try:
        if args.operation == "pearson":
            result = stats.pearson(columns[0], columns[1])
        elif args.operation == "wilcoxon":
            result = stats.wilcoxon_signed_rank(columns[0], columns[1])
        elif args.operation == "fit":
            result = stats.linear_fit(columns[0], columns[1])
        else:
            result = stats.summarize(columns[0])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(json.dumps(asdict(result), sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; 2 means infra here
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="fixeval",
        description="Evaluate, repair, and report on model-generated code.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ev = sub.add_parser("evaluate", help="run a completion corpus against its tasks")
    ev.add_argument("--config", help="TOML config file; flags override it")
    ev.add_argument("--tasks-path")
    ev.add_argument("--tasks-schema", choices=SCHEMAS)
    ev.add_argument("--completions-path")
    ev.add_argument("--output-dir")
    ev.add_argument("--assembly-mode", choices=ASSEMBLY_MODES)
    ev.add_argument("--timeout-s", type=float)
    ev.add_argument("--parallelism", type=int)
    ev.add_argument("--import-budget", type=int)
    ev.add_argument("--fix-enabled", action=argparse.BooleanOptionalAction, default=None)
    ev.add_argument("--transcript-path")
    ev.add_argument("--record-transcript-path")
    ev.add_argument("--challenge-tests", action=argparse.BooleanOptionalAction, default=None)
    ev.add_argument("--k-values", type=int, nargs="+")
    ev.set_defaults(handler=cmd_evaluate)

    fx = sub.add_parser("fix", help="repair one source file")
    fx.add_argument("source", help="path to the source file, or - for stdin")
    fx.add_argument("--tasks-path")
    fx.add_argument("--tasks-schema", choices=SCHEMAS, default="humaneval")
    fx.add_argument("--task-id")
    fx.add_argument("--transcript-path")
    fx.add_argument("--timeout-s", type=float, default=10.0)
    fx.add_argument("--import-budget", type=int, default=5)
    fx.set_defaults(handler=cmd_fix)

    rp = sub.add_parser("report", help="compare a without-fix and a with-fix run")
    rp.add_argument("before_dir")
    rp.add_argument("after_dir")
    rp.add_argument("-o", "--output-dir", required=True)
    rp.add_argument("--k-values", type=int, nargs="+")
    rp.set_defaults(handler=cmd_report)

    st = sub.add_parser("stats", help="statistics over CSV columns")
    st.add_argument("table", help="CSV file with a header row")
    st.add_argument("operation", choices=sorted(_STATS_ARITY))
    st.add_argument("columns", nargs="+", help="column name(s) to analyze")
    st.set_defaults(handler=cmd_stats)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse help/usage paths
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CorpusError, ModuleDatabaseError, reporting.ReportError, SandboxError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PipelineError as exc:
        print(f"infrastructure failure: {exc}", file=sys.stderr)
        return EXIT_INFRA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
