"""Run summaries and before/after improvement reports.

An evaluate run leaves three JSONL artifacts (outcomes, error records, fix
reports) plus a delimited summary. This module turns those artifacts into
per-model pass@k tables, error-type distributions, fix-rate comparisons
between a without-fix and a with-fix run, and a paired significance test
over per-model means. Rendering is deterministic: stable orderings, no
timestamps, and figures drawn with a non-interactive backend.
"""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .stats import WilcoxonResult, pass_at_k, wilcoxon_signed_rank


class ReportError(ValueError):
    """Report inputs that cannot be joined or summarized."""


# ---------------------------------------------------------------------------
# Loading evaluate-run artifacts

OUTCOMES_FILE = "outcomes.jsonl"
ERRORS_FILE = "errors.jsonl"
FIXES_FILE = "fixes.jsonl"
SUMMARY_CSV = "summary.csv"
SUMMARY_MD = "summary.md"

REPORT_JSON = "report.json"
REPORT_CSV = "report.csv"
REPORT_MD = "report.md"
ERROR_TYPES_PNG = "error_types.png"
PASS_RATES_PNG = "pass_rates.png"


@dataclass(frozen=True)
class RunData:
    outcomes: tuple[dict, ...]
    errors: tuple[dict, ...]


def _read_jsonl(path: Path) -> list[dict]:
    if not path.exists():
        raise ReportError(f"missing run artifact: {path}")
    rows = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise ReportError(f"{path}:{lineno}: malformed JSON ({exc})") from None
    return rows


def load_run(directory: str | Path) -> RunData:
    directory = Path(directory)
    return RunData(
        outcomes=tuple(_read_jsonl(directory / OUTCOMES_FILE)),
        errors=tuple(_read_jsonl(directory / ERRORS_FILE)),
    )


def _key(row: dict) -> tuple[str, str, int]:
    return (row["task_id"], row["model_id"], row["run_index"])


# ---------------------------------------------------------------------------
# Per-run summary (consumed by the evaluate command)


@dataclass(frozen=True)
class ModelSummary:
    model_id: str
    n_completions: int
    n_pass: int
    n_infra: int
    pass_rate: float
    pass_at_k: dict[int, Optional[float]]


@dataclass(frozen=True)
class RunSummary:
    models: tuple[ModelSummary, ...]
    overall: ModelSummary
    type_counts: dict[str, int]
    k_values: tuple[int, ...]


def _model_summary(model_id: str, rows: list[dict], k_values) -> ModelSummary:
    n = len(rows)
    n_pass = sum(r["status"] == "pass" for r in rows)
    n_infra = sum(r["status"] == "infra_error" for r in rows)
    by_task: dict[str, list[dict]] = {}
    for row in rows:
        by_task.setdefault(row["task_id"], []).append(row)
    per_k: dict[int, Optional[float]] = {}
    for k in k_values:
        samples = [
            (len(task_rows), sum(r["status"] == "pass" for r in task_rows))
            for task_rows in by_task.values()
            if len(task_rows) >= k
        ]
        if samples:
            per_k[k] = sum(pass_at_k(tn, tc, k) for tn, tc in samples) / len(samples)
        else:
            per_k[k] = None
    return ModelSummary(
        model_id=model_id,
        n_completions=n,
        n_pass=n_pass,
        n_infra=n_infra,
        pass_rate=n_pass / n if n else 0.0,
        pass_at_k=per_k,
    )


def summarize_run(
    outcome_rows, error_rows, k_values=(1,)
) -> RunSummary:
    k_values = tuple(k_values)
    by_model: dict[str, list[dict]] = {}
    for row in outcome_rows:
        by_model.setdefault(row["model_id"], []).append(row)
    models = tuple(
        _model_summary(model_id, rows, k_values)
        for model_id, rows in sorted(by_model.items())
    )
    overall = _model_summary("(all)", list(outcome_rows), k_values)
    type_counts = dict(sorted(Counter(r["error_type"] for r in error_rows).items()))
    return RunSummary(models=models, overall=overall, type_counts=type_counts, k_values=k_values)


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.6f}"


def render_summary_csv(summary: RunSummary) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    header = ["model_id", "n_completions", "n_pass", "n_infra", "pass_rate"]
    header += [f"pass_at_{k}" for k in summary.k_values]
    writer.writerow(header)
    for row in (*summary.models, summary.overall):
        writer.writerow(
            [
                row.model_id,
                row.n_completions,
                row.n_pass,
                row.n_infra,
                _fmt(row.pass_rate),
            ]
            + [_fmt(row.pass_at_k[k]) for k in summary.k_values]
        )
    return out.getvalue()


def render_summary_markdown(summary: RunSummary) -> str:
    lines = ["# Evaluation summary", ""]
    header = ["model", "completions", "pass", "infra", "pass rate"]
    header += [f"pass@{k}" for k in summary.k_values]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "---|" * len(header))
    for row in (*summary.models, summary.overall):
        cells = [
            row.model_id,
            str(row.n_completions),
            str(row.n_pass),
            str(row.n_infra),
            _fmt(row.pass_rate),
        ] + [_fmt(row.pass_at_k[k]) for k in summary.k_values]
        lines.append("| " + " | ".join(cells) + " |")
    lines.append("")
    lines.append("## Error types")
    lines.append("")
    if summary.type_counts:
        lines.append("| error type | count |")
        lines.append("|---|---|")
        for name, count in summary.type_counts.items():
            lines.append(f"| {name} | {count} |")
    else:
        lines.append("No errors recorded.")
    lines.append("")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Before/after improvement report

MIN_WILCOXON_PAIRS = 5


@dataclass(frozen=True)
class ModelDelta:
    model_id: str
    k: int
    without_fix: Optional[float]
    with_fix: Optional[float]
    delta: Optional[float]


@dataclass(frozen=True)
class TypeFixRate:
    error_type: str
    before_count: int
    after_count: int
    fix_rate: Optional[float]  # 1 - after/before; None when before == 0


@dataclass(frozen=True)
class ImprovementReport:
    per_model: tuple[ModelDelta, ...]
    per_type: tuple[TypeFixRate, ...]
    wilcoxon: Optional[WilcoxonResult]
    wilcoxon_note: Optional[str]

    def to_record(self) -> dict:
        return {
            "per_model": [
                {
                    "model_id": m.model_id,
                    "k": m.k,
                    "without_fix": m.without_fix,
                    "with_fix": m.with_fix,
                    "delta": m.delta,
                }
                for m in self.per_model
            ],
            "per_type": [
                {
                    "error_type": t.error_type,
                    "before_count": t.before_count,
                    "after_count": t.after_count,
                    "fix_rate": t.fix_rate,
                }
                for t in self.per_type
            ],
            "wilcoxon": None
            if self.wilcoxon is None
            else {
                "w_statistic": self.wilcoxon.w_statistic,
                "p_two_sided": self.wilcoxon.p_two_sided,
                "method": self.wilcoxon.method,
                "n_effective": self.wilcoxon.n_effective,
            },
            "wilcoxon_note": self.wilcoxon_note,
        }


def build_improvement_report(
    before: RunData, after: RunData, k_values=(1,)
) -> ImprovementReport:
    k_values = tuple(k_values)
    before_keys = {_key(r) for r in before.outcomes}
    after_keys = {_key(r) for r in after.outcomes}
    if before_keys != after_keys:
        only_before = sorted(before_keys - after_keys)
        only_after = sorted(after_keys - before_keys)
        raise ReportError(
            "run key sets differ; "
            f"only in before: {only_before}; only in after: {only_after}"
        )

    before_summary = summarize_run(before.outcomes, before.errors, k_values)
    after_summary = summarize_run(after.outcomes, after.errors, k_values)
    before_models = {m.model_id: m for m in before_summary.models}
    after_models = {m.model_id: m for m in after_summary.models}

    per_model = []
    for model_id in sorted(before_models):
        for k in k_values:
            without = before_models[model_id].pass_at_k[k]
            with_fix = after_models[model_id].pass_at_k[k]
            delta = None if without is None or with_fix is None else with_fix - without
            per_model.append(
                ModelDelta(
                    model_id=model_id, k=k,
                    without_fix=without, with_fix=with_fix, delta=delta,
                )
            )

    all_types = sorted(set(before_summary.type_counts) | set(after_summary.type_counts))
    per_type = []
    for name in all_types:
        n_before = before_summary.type_counts.get(name, 0)
        n_after = after_summary.type_counts.get(name, 0)
        rate = None if n_before == 0 else 1 - n_after / n_before
        per_type.append(
            TypeFixRate(
                error_type=name, before_count=n_before, after_count=n_after,
                fix_rate=rate,
            )
        )

    head_k = k_values[0]
    model_ids = sorted(before_models)
    pairs = [
        (before_models[m].pass_at_k[head_k], after_models[m].pass_at_k[head_k])
        for m in model_ids
    ]
    pairs = [(b, a) for b, a in pairs if b is not None and a is not None]
    wilcoxon = None
    note = None
    if len(pairs) < MIN_WILCOXON_PAIRS:
        note = (
            f"signed-rank test skipped: {len(pairs)} model mean(s), "
            f"need at least {MIN_WILCOXON_PAIRS}"
        )
    else:
        try:
            wilcoxon = wilcoxon_signed_rank(
                [b for b, _ in pairs], [a for _, a in pairs]
            )
        except ValueError as exc:
            note = f"signed-rank test skipped: {exc}"

    return ImprovementReport(
        per_model=tuple(per_model),
        per_type=tuple(per_type),
        wilcoxon=wilcoxon,
        wilcoxon_note=note,
    )


def render_report_csv(report: ImprovementReport) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["model_id", "k", "without_fix", "with_fix", "delta"])
    for m in report.per_model:
        writer.writerow(
            [m.model_id, m.k, _fmt(m.without_fix), _fmt(m.with_fix), _fmt(m.delta)]
        )
    return out.getvalue()


def render_report_markdown(report: ImprovementReport) -> str:
    lines = ["# Improvement report", "", "## Pass rates by model", ""]
    lines.append("| model | k | without fix | with fix | delta |")
    lines.append("|---|---|---|---|---|")
    for m in report.per_model:
        lines.append(
            f"| {m.model_id} | {m.k} | {_fmt(m.without_fix)} "
            f"| {_fmt(m.with_fix)} | {_fmt(m.delta)} |"
        )
    lines += ["", "## Error types", ""]
    if report.per_type:
        lines.append("| error type | before | after | fix rate |")
        lines.append("|---|---|---|---|")
        for t in report.per_type:
            rate = "" if t.fix_rate is None else f"{t.fix_rate:.2%}"
            lines.append(
                f"| {t.error_type} | {t.before_count} | {t.after_count} | {rate} |"
            )
    else:
        lines.append("No errors in either run.")
    lines += ["", "## Paired signed-rank test over model means", ""]
    if report.wilcoxon is not None:
        w = report.wilcoxon
        lines.append(
            f"W = {w.w_statistic}, two-sided p = {w.p_two_sided:.6g} "
            f"({w.method}, n = {w.n_effective})"
        )
    else:
        lines.append(report.wilcoxon_note or "not computed")
    lines.append("")
    return "\n".join(lines)


def render_figures(report: ImprovementReport, directory: str | Path) -> list[Path]:
    """Draw the before/after error counts and per-model pass rates to PNG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    directory = Path(directory)
    written = []

    fig, ax = plt.subplots(figsize=(8, 4.5))
    names = [t.error_type for t in report.per_type]
    xs = range(len(names))
    ax.bar([x - 0.2 for x in xs], [t.before_count for t in report.per_type],
           width=0.4, label="before fix")
    ax.bar([x + 0.2 for x in xs], [t.after_count for t in report.per_type],
           width=0.4, label="after fix")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(names, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel("error count")
    ax.set_title("Error types before and after fixing")
    ax.legend()
    fig.tight_layout()
    path = directory / ERROR_TYPES_PNG
    fig.savefig(path)
    plt.close(fig)
    written.append(path)

    head = [m for m in report.per_model if m.k == report.per_model[0].k] if report.per_model else []
    fig, ax = plt.subplots(figsize=(8, 4.5))
    names = [m.model_id for m in head]
    xs = range(len(names))
    ax.bar([x - 0.2 for x in xs], [m.without_fix or 0.0 for m in head],
           width=0.4, label="without fix")
    ax.bar([x + 0.2 for x in xs], [m.with_fix or 0.0 for m in head],
           width=0.4, label="with fix")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(names, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel(f"pass@{head[0].k}" if head else "pass rate")
    ax.set_ylim(0, 1)
    ax.set_title("Per-model pass rates")
    ax.legend()
    fig.tight_layout()
    path = directory / PASS_RATES_PNG
    fig.savefig(path)
    plt.close(fig)
    written.append(path)

    return written


def write_improvement_report(
    report: ImprovementReport, directory: str | Path
) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    json_path = directory / REPORT_JSON
    json_path.write_text(
        json.dumps(report.to_record(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    csv_path = directory / REPORT_CSV
    csv_path.write_text(render_report_csv(report), encoding="utf-8")
    md_path = directory / REPORT_MD
    md_path.write_text(render_report_markdown(report), encoding="utf-8")
    return [json_path, csv_path, md_path, *render_figures(report, directory)]
