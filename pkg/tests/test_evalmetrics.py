import itertools
import json

import numpy as np
import pytest

from ragforge.backend import MockBackend, ScriptRule, mock_embed
from ragforge.evalmetrics import (
    METRIC_NAMES,
    BackendJudge,
    EvalError,
    EvalRecord,
    EvalTooling,
    MetricReport,
    SubstringJudge,
    answer_relevancy,
    backend_question_generator,
    context_precision,
    context_recall,
    echo_question_generator,
    evaluate_dataset,
    faithfulness,
    load_dataset,
)

JUDGE = SubstringJudge()


# -- context precision ---------------------------------------------------------


def test_context_precision_worked_example():
    # Relevant at ranks 1 and 3: (1/1 + 2/3) / 2 = 5/6.
    value = context_precision(["a", "b", "c"], [True, False, True])
    assert value == pytest.approx(5.0 / 6.0, abs=1e-9)


def test_context_precision_boundaries():
    assert context_precision(["a"] * 4, [True] * 4) == pytest.approx(1.0, abs=1e-12)
    assert context_precision(["a", "b"], [False, False]) == 0.0
    assert context_precision([], []) is None


def test_context_precision_prefers_relevant_early():
    early = context_precision(["a", "b"], [True, False])
    late = context_precision(["a", "b"], [False, True])
    assert early > late


def test_context_precision_length_mismatch():
    with pytest.raises(EvalError):
        context_precision(["a", "b"], [True])


def test_context_precision_exhaustive_against_reference():
    def reference(flags):
        relevant_total = sum(flags)
        if relevant_total == 0:
            return 0.0
        acc = 0.0
        for k in range(1, len(flags) + 1):
            if flags[k - 1]:
                acc += sum(flags[:k]) / k
        return acc / relevant_total

    for n in range(1, 6):
        for flags in itertools.product([False, True], repeat=n):
            got = context_precision(["ctx"] * n, list(flags))
            assert got == pytest.approx(reference(list(flags)), abs=1e-12), flags


# -- context recall --------------------------------------------------------------


GOLDEN_CONTEXTS = [
    "The brake caliper torque is 110 nm. Always use a torque wrench.",
    "Unrelated prose about xylophones qqq zzz.",
    "Brake fluid must be DOT 4. The caliper torque is checked twice.",
]


def test_context_recall_worked_example():
    ground_truth = (
        "The caliper torque is checked twice. Brake fluid must be DOT 4. "
        "The sky is green."
    )
    value = context_recall(ground_truth, GOLDEN_CONTEXTS, JUDGE)
    assert value == pytest.approx(2.0 / 3.0, abs=1e-9)


def test_context_recall_empty_ground_truth_is_null():
    assert context_recall("", GOLDEN_CONTEXTS, JUDGE) is None


def test_context_recall_judge_error_counts_as_unattributed():
    class FlakyJudge(SubstringJudge):
        def attributable(self, context, statement):
            if "broken" in statement:
                raise RuntimeError("judge offline")
            return super().attributable(context, statement)

    value = context_recall(
        "The caliper torque is checked twice. This sentence is broken.",
        GOLDEN_CONTEXTS,
        FlakyJudge(),
    )
    assert value == pytest.approx(0.5, abs=1e-12)


# -- faithfulness ------------------------------------------------------------------


def test_faithfulness_worked_example():
    answer = (
        "The brake caliper torque is 110 nm. Always use a torque wrench. "
        "Brake fluid must be DOT 4. Coolant is orange."
    )
    value = faithfulness(answer, GOLDEN_CONTEXTS, JUDGE)
    assert value == pytest.approx(0.75, abs=1e-9)


def test_faithfulness_empty_answer_is_null():
    assert faithfulness("", GOLDEN_CONTEXTS, JUDGE) is None


def test_faithfulness_no_contexts_supports_nothing():
    assert faithfulness("A claim here.", [], JUDGE) == 0.0


# -- answer relevancy ------------------------------------------------------------------


def test_answer_relevancy_echo_generator_is_exactly_one():
    question = "what torque fits the caliper bolts"
    value = answer_relevancy(
        question, "some answer", echo_question_generator(question), mock_embed, n=3
    )
    assert value == pytest.approx(1.0, abs=1e-9)


def test_answer_relevancy_cosine_mean():
    vectors = {
        "q": np.array([1.0, 0.0]),
        "same": np.array([1.0, 0.0]),
        "halfway": np.array([0.5, np.sqrt(3.0) / 2.0]),
    }
    value = answer_relevancy(
        "q", "ans", lambda answer, n: ["same", "halfway"], vectors.__getitem__, n=2
    )
    assert value == pytest.approx(0.75, abs=1e-9)


def test_answer_relevancy_clamps_negative_cosine():
    vectors = {
        "q": np.array([1.0, 0.0]),
        "same": np.array([1.0, 0.0]),
        "opposite": np.array([-1.0, 0.0]),
    }
    value = answer_relevancy(
        "q", "ans", lambda answer, n: ["same", "opposite"], vectors.__getitem__, n=2
    )
    assert value == pytest.approx(0.5, abs=1e-12)


def test_answer_relevancy_error_cases():
    with pytest.raises(EvalError):
        answer_relevancy("q", "a", echo_question_generator("q"), mock_embed, n=0)
    with pytest.raises(EvalError):
        answer_relevancy("q", "a", lambda answer, n: [], mock_embed, n=2)
    zero = lambda text: np.zeros(4)
    with pytest.raises(EvalError):
        answer_relevancy("q", "a", lambda answer, n: ["g"], zero, n=1)


# -- question generators ------------------------------------------------------------


def test_backend_question_generator_parses_and_truncates():
    backend = MockBackend(
        [ScriptRule(contains="distinct questions", response='{"questions": ["a", "b", "c"]}')]
    )
    gen = backend_question_generator(backend)
    assert gen("answer text", 2) == ["a", "b"]


def test_backend_question_generator_error_paths():
    empty = backend_question_generator(
        MockBackend([ScriptRule(contains=None, response='{"questions": []}')])
    )
    with pytest.raises(EvalError):
        empty("answer", 2)
    missing = backend_question_generator(
        MockBackend([ScriptRule(contains=None, response='{"other": 1}')])
    )
    with pytest.raises(EvalError):
        missing("answer", 2)


def test_backend_judge_calls_each_facet():
    backend = MockBackend(
        [
            ScriptRule(contains='"relevant"', response='{"relevant": true}'),
            ScriptRule(contains='"attributable"', response='{"attributable": false}'),
            ScriptRule(contains='"supported"', response='{"supported": "yes"}'),
        ]
    )
    judge = BackendJudge(backend)
    assert judge.relevant("q", "ctx") is True
    assert judge.attributable("ctx", "stmt") is False
    assert judge.supported("ctx", "claim") is True
    assert len(backend.calls) == 3


# -- dataset evaluation ------------------------------------------------------------


def golden_record():
    return EvalRecord(
        question="what is the brake caliper torque",
        ground_truth=(
            "The caliper torque is checked twice. Brake fluid must be DOT 4. "
            "The sky is green."
        ),
        contexts=list(GOLDEN_CONTEXTS),
        answer=(
            "The brake caliper torque is 110 nm. Always use a torque wrench. "
            "Brake fluid must be DOT 4. Coolant is orange."
        ),
    )


def tooling():
    return EvalTooling(judge=SubstringJudge(), embedder=mock_embed)


def test_evaluate_dataset_golden_row():
    report = evaluate_dataset([golden_record()], tooling())
    row = report.rows[0]
    assert row["context_precision"] == pytest.approx(5.0 / 6.0, abs=1e-9)
    assert row["context_recall"] == pytest.approx(2.0 / 3.0, abs=1e-9)
    assert row["faithfulness"] == pytest.approx(0.75, abs=1e-9)
    assert row["answer_relevancy"] == pytest.approx(1.0, abs=1e-9)
    assert row["failed"] is False
    assert report.failed_count == 0
    assert report.null_counts == {name: 0 for name in METRIC_NAMES}
    for name in METRIC_NAMES:
        assert report.aggregates[name] == pytest.approx(row[name], abs=1e-12)


def test_evaluate_dataset_null_conventions():
    record = EvalRecord(question="only a question")
    report = evaluate_dataset([record], tooling())
    row = report.rows[0]
    assert row["context_precision"] is None  # no contexts
    assert row["context_recall"] is None  # no ground truth
    assert row["faithfulness"] is None  # no answer claims
    assert row["answer_relevancy"] is None  # no answer
    assert report.aggregates == {name: None for name in METRIC_NAMES}
    assert report.null_counts == {name: 1 for name in METRIC_NAMES}
    assert report.failed_count == 0


def test_evaluate_dataset_aggregates_skip_nulls():
    rows = [golden_record(), EvalRecord(question="bare question")]
    report = evaluate_dataset(rows, tooling())
    assert report.aggregates["faithfulness"] == pytest.approx(0.75, abs=1e-12)
    assert report.null_counts["faithfulness"] == 1


def test_evaluate_dataset_aggregate_mean_is_exact():
    r1 = EvalRecord(
        question="alpha beta",
        contexts=["alpha beta gamma"],
        answer="Alpha beta gamma.",
        ground_truth="Alpha beta gamma.",
    )
    r2 = EvalRecord(
        question="alpha beta",
        contexts=["alpha beta gamma", "zzz qqq www"],
        answer="Alpha beta gamma.",
        ground_truth="Alpha beta gamma.",
    )
    report = evaluate_dataset([r1, r2], tooling())
    cp1 = report.rows[0]["context_precision"]
    cp2 = report.rows[1]["context_precision"]
    assert report.aggregates["context_precision"] == pytest.approx(
        (cp1 + cp2) / 2.0, abs=1e-12
    )


def test_evaluate_dataset_runs_pipeline_for_missing_fields():
    def pipeline(question):
        return "Alpha beta gamma.", ["alpha beta gamma context"]

    record = EvalRecord(question="alpha beta", ground_truth="Alpha beta gamma.")
    report = evaluate_dataset([record], tooling(), pipeline=pipeline)
    row = report.rows[0]
    assert row["failed"] is False
    assert row["context_precision"] is not None
    assert row["faithfulness"] is not None


def test_evaluate_dataset_pipeline_error_becomes_failed_row():
    def pipeline(question):
        raise RuntimeError("pipeline exploded")

    records = [golden_record(), EvalRecord(question="needs pipeline")]
    report = evaluate_dataset(records, tooling(), pipeline=pipeline)
    assert report.failed_count == 1
    failed = report.rows[1]
    assert failed["failed"] is True
    assert "pipeline exploded" in failed["error"]
    assert all(failed[name] is None for name in METRIC_NAMES)
    # Aggregates still come from the healthy row.
    assert report.aggregates["faithfulness"] == pytest.approx(0.75, abs=1e-9)


def test_evaluate_dataset_rejects_empty():
    with pytest.raises(EvalError):
        evaluate_dataset([], tooling())


def test_eval_record_requires_question():
    with pytest.raises(ValueError):
        EvalRecord(question="")


# -- report serialization -----------------------------------------------------------


def test_report_json_round_trip_and_stability():
    report1 = evaluate_dataset([golden_record()], tooling())
    report2 = evaluate_dataset([golden_record()], tooling())
    assert report1.to_json() == report2.to_json()
    back = MetricReport.from_json(report1.to_json())
    assert back.to_dict() == report1.to_dict()


def test_report_markdown_rendering():
    report = evaluate_dataset([golden_record(), EvalRecord(question="bare")], tooling())
    markdown = report.to_markdown()
    assert "| context_precision |" in markdown
    assert "Rows: 2 (0 failed)" in markdown
    all_null = evaluate_dataset([EvalRecord(question="bare")], tooling())
    assert "n/a" in all_null.to_markdown()


# -- dataset loading -------------------------------------------------------------------


def test_load_dataset_flattens_turns(data_dir):
    records = load_dataset(str(data_dir / "eval_turns.jsonl"))
    assert len(records) == 4
    assert records[2].question == "What torque is specified for the caliper bracket bolts?"
    assert records[3].question == (
        "Q: What torque is specified for the caliper bracket bolts? "
        "A: Torque the caliper bracket bolts to 110 Nm. "
        "What tool does the bleed procedure require?"
    )


def test_load_dataset_reports_line_numbers(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"question": "ok"}\nnot json\n', encoding="utf-8")
    with pytest.raises(EvalError, match=r"bad\.jsonl:2"):
        load_dataset(str(bad))


def test_load_dataset_rejects_non_objects(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('["a", "list"]\n', encoding="utf-8")
    with pytest.raises(EvalError, match=r"bad\.jsonl:1"):
        load_dataset(str(bad))


def test_load_dataset_skips_blank_lines(tmp_path):
    path = tmp_path / "ds.jsonl"
    path.write_text('{"question": "one"}\n\n{"question": "two"}\n', encoding="utf-8")
    assert [r.question for r in load_dataset(str(path))] == ["one", "two"]


def test_load_dataset_missing_question_names_line(tmp_path):
    path = tmp_path / "ds.jsonl"
    path.write_text('{"answer": "no question"}\n', encoding="utf-8")
    with pytest.raises(EvalError, match=r"ds\.jsonl:1"):
        load_dataset(str(path))
