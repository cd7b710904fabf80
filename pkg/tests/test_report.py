"""Summaries and improvement reports over synthetic run artifacts."""

import json

import pytest

from fixeval.report import (
    ImprovementReport,
    ReportError,
    RunData,
    build_improvement_report,
    load_run,
    render_figures,
    render_report_csv,
    render_report_markdown,
    render_summary_csv,
    render_summary_markdown,
    summarize_run,
    write_improvement_report,
)


def outcome_row(task="t0", model="m0", run=0, status="pass"):
    return {
        "task_id": task,
        "model_id": model,
        "run_index": run,
        "status": status,
        "exception_class": None if status == "pass" else "AssertionError",
        "message": None,
        "phase": None,
        "duration_s": 0.0,
        "captured_output": None,
    }


def error_row(task="t0", model="m0", run=0, error_type="AssertionError"):
    return {
        "task_id": task,
        "model_id": model,
        "run_index": run,
        "error_type": error_type,
        "cause": "Test Case Failure",
        "confidence": "exact",
        "fixable": False,
    }


def mini_rows():
    """Six tasks, one run each, two passing — the mini-corpus shape."""
    statuses = ["pass", "fail", "pass", "fail", "fail", "fail"]
    return [
        outcome_row(task=f"mini/{i}", status=status)
        for i, status in enumerate(statuses)
    ]


class TestSummarizeRun:
    def test_six_single_run_tasks_two_passing(self):
        summary = summarize_run(mini_rows(), [], (1,))
        assert summary.overall.n_completions == 6
        assert summary.overall.n_pass == 2
        assert summary.overall.pass_at_k[1] == pytest.approx(1 / 3)
        assert summary.overall.pass_rate == pytest.approx(1 / 3)

    def test_models_separated_and_sorted(self):
        rows = [
            outcome_row(model="zeta", status="pass"),
            outcome_row(model="alpha", status="fail"),
        ]
        summary = summarize_run(rows, [], (1,))
        assert [m.model_id for m in summary.models] == ["alpha", "zeta"]
        assert summary.models[0].n_pass == 0
        assert summary.models[1].n_pass == 1

    def test_multi_run_pass_at_one_is_mean_pass_fraction(self):
        rows = [
            outcome_row(run=i, status="pass" if i < 3 else "fail") for i in range(10)
        ]
        summary = summarize_run(rows, [], (1,))
        assert summary.overall.pass_at_k[1] == pytest.approx(0.3)

    def test_k_above_run_count_gives_none(self):
        summary = summarize_run(mini_rows(), [], (1, 5))
        assert summary.overall.pass_at_k[5] is None

    def test_infra_rows_counted(self):
        rows = [outcome_row(status="infra_error"), outcome_row(task="t1")]
        summary = summarize_run(rows, [], (1,))
        assert summary.overall.n_infra == 1

    def test_type_counts_sorted(self):
        errors = [error_row(error_type="NameError"), error_row(error_type="AssertionError")]
        summary = summarize_run(mini_rows(), errors, (1,))
        assert list(summary.type_counts) == ["AssertionError", "NameError"]

    def test_empty_rows(self):
        summary = summarize_run([], [], (1,))
        assert summary.overall.n_completions == 0
        assert summary.overall.pass_at_k[1] is None
        assert render_summary_csv(summary).startswith("model_id,")
        assert "No errors recorded" in render_summary_markdown(summary)

    def test_csv_shape(self):
        text = render_summary_csv(summarize_run(mini_rows(), [], (1,)))
        lines = text.strip().split("\n")
        assert lines[0] == "model_id,n_completions,n_pass,n_infra,pass_rate,pass_at_1"
        assert lines[-1].startswith("(all),6,2,0,0.333333,0.333333")

    def test_markdown_contains_tables(self):
        text = render_summary_markdown(
            summarize_run(mini_rows(), [error_row(error_type="NameError")], (1,))
        )
        assert "| model |" in text
        assert "| NameError | 1 |" in text


def run_data(statuses_by_model: dict, error_types=()):
    """Build RunData with one task per status entry, single runs."""
    outcomes = []
    for model, statuses in statuses_by_model.items():
        for i, status in enumerate(statuses):
            outcomes.append(outcome_row(task=f"t{i}", model=model, status=status))
    errors = [error_row(task=f"e{i}", error_type=t) for i, t in enumerate(error_types)]
    return RunData(outcomes=tuple(outcomes), errors=tuple(errors))


class TestImprovementReport:
    def test_identical_runs_have_zero_deltas(self):
        data = run_data({"m0": ["pass", "fail", "fail"]}, ["AssertionError"])
        report = build_improvement_report(data, data, (1,))
        assert all(m.delta == 0 for m in report.per_model)
        assert all(t.fix_rate == 0 for t in report.per_type)

    def test_name_error_count_drop_shows_full_fix_rate(self):
        before = run_data(
            {"m0": ["pass", "fail", "fail"]}, ["NameError", "AssertionError"]
        )
        after = run_data({"m0": ["pass", "pass", "fail"]}, ["AssertionError"])
        report = build_improvement_report(before, after, (1,))
        by_type = {t.error_type: t for t in report.per_type}
        assert by_type["NameError"].before_count == 1
        assert by_type["NameError"].after_count == 0
        assert by_type["NameError"].fix_rate == 1.0
        delta = report.per_model[0]
        assert delta.delta == pytest.approx(1 / 3)

    def test_new_error_type_after_fix_has_no_rate(self):
        before = run_data({"m0": ["fail"]}, ["NameError"])
        after = run_data({"m0": ["fail"]}, ["KeyError"])
        report = build_improvement_report(before, after, (1,))
        by_type = {t.error_type: t for t in report.per_type}
        assert by_type["KeyError"].before_count == 0
        assert by_type["KeyError"].fix_rate is None

    def test_key_mismatch_lists_difference(self):
        before = run_data({"m0": ["pass", "fail"]})
        after = run_data({"m0": ["pass"]})
        with pytest.raises(ReportError, match="only in before"):
            build_improvement_report(before, after, (1,))

    def test_fourteen_improved_models_give_exact_small_p(self):
        # 10 runs of one task per model; every model gains one passing run
        def rows(extra):
            out = []
            for m in range(14):
                passes = (m % 5) + 1 + extra
                for run in range(10):
                    out.append(
                        outcome_row(
                            task="t0",
                            model=f"m{m:02d}",
                            run=run,
                            status="pass" if run < passes else "fail",
                        )
                    )
            return out

        before = RunData(outcomes=tuple(rows(0)), errors=())
        after = RunData(outcomes=tuple(rows(1)), errors=())
        report = build_improvement_report(before, after, (1,))
        assert report.wilcoxon is not None
        assert report.wilcoxon.method == "exact"
        assert report.wilcoxon.p_two_sided == pytest.approx(1.2207e-4, abs=1e-8)

    def test_too_few_models_notes_skip(self):
        data = run_data({"m0": ["pass", "fail"]})
        report = build_improvement_report(data, data, (1,))
        assert report.wilcoxon is None
        assert "need at least 5" in report.wilcoxon_note

    def test_equal_means_note_instead_of_crash(self):
        data = run_data({f"m{i}": ["pass", "fail"] for i in range(6)})
        report = build_improvement_report(data, data, (1,))
        assert report.wilcoxon is None
        assert "skipped" in report.wilcoxon_note

    def test_report_serializes(self):
        data = run_data({"m0": ["pass", "fail"]}, ["NameError"])
        report = build_improvement_report(data, data, (1,))
        record = json.loads(json.dumps(report.to_record()))
        assert record["per_model"][0]["model_id"] == "m0"
        assert record["wilcoxon"] is None

    def test_csv_rendering(self):
        before = run_data({"m0": ["fail", "fail"]})
        after = run_data({"m0": ["pass", "fail"]})
        text = render_report_csv(build_improvement_report(before, after, (1,)))
        lines = text.strip().split("\n")
        assert lines[0] == "model_id,k,without_fix,with_fix,delta"
        assert lines[1] == "m0,1,0.000000,0.500000,0.500000"

    def test_markdown_includes_note_or_test(self):
        data = run_data({"m0": ["pass"]})
        text = render_report_markdown(build_improvement_report(data, data, (1,)))
        assert "signed-rank test skipped" in text


class TestArtifacts:
    def test_load_run_missing_file(self, tmp_path):
        with pytest.raises(ReportError, match="missing run artifact"):
            load_run(tmp_path)

    def test_load_run_malformed_line(self, tmp_path):
        (tmp_path / "outcomes.jsonl").write_text('{"ok": 1}\n{broken\n')
        (tmp_path / "errors.jsonl").write_text("")
        with pytest.raises(ReportError, match="outcomes.jsonl:2"):
            load_run(tmp_path)

    def test_write_improvement_report_files(self, tmp_path):
        before = run_data({"m0": ["fail", "fail"]}, ["NameError"])
        after = run_data({"m0": ["pass", "fail"]})
        report = build_improvement_report(before, after, (1,))
        written = write_improvement_report(report, tmp_path / "out")
        names = sorted(p.name for p in written)
        assert names == [
            "error_types.png",
            "pass_rates.png",
            "report.csv",
            "report.json",
            "report.md",
        ]
        for path in written:
            assert path.exists()
            if path.suffix == ".png":
                assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
        record = json.loads((tmp_path / "out" / "report.json").read_text())
        assert record["per_type"][0]["error_type"] == "NameError"

    def test_render_figures_empty_report(self, tmp_path):
        report = ImprovementReport(per_model=(), per_type=(), wilcoxon=None, wilcoxon_note="n/a")
        written = render_figures(report, tmp_path)
        assert all(p.exists() for p in written)
