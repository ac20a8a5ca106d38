"""Report emitters write matching CSV tables and rendered figures."""

import csv

from nerloop.evaluation import (
    ContextScope,
    EvalCounts,
    FoldMetrics,
    KFoldResult,
    context_frequencies,
)
from nerloop.extraction import EntityTally, ExtractionReport, MatchRates
from nerloop.loop import LoopParams, LoopState
from nerloop.reports import (
    write_context_report,
    write_extraction_report,
    write_f1_history,
    write_kfold_report,
    write_match_report,
)

from test_annotations import lp_from_text


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.reader(f))


def test_f1_history_outputs(tmp_path):
    state = LoopState(params=LoopParams(), stream_seed=1, run_seed=2)
    state.f1_history = [(1, 0.6), (2, 0.72), (3, 0.71)]
    paths = write_f1_history(state, tmp_path)
    rows = read_rows(paths["csv"])
    assert rows[0] == ["round", "f1"]
    assert rows[1] == ["1", "0.600000"]
    assert len(rows) == 4
    assert paths["png"].stat().st_size > 0


def test_kfold_report_outputs(tmp_path):
    result = KFoldResult(
        folds=[
            FoldMetrics(fold=i, precision=0.9, recall=0.8, f1=0.85, counts=EvalCounts(9, 1, 2))
            for i in range(5)
        ],
        mean_f1=0.85,
    )
    paths = write_kfold_report(result, tmp_path)
    rows = read_rows(paths["csv"])
    assert rows[0] == ["fold", "precision", "recall", "f1"]
    assert rows[-1][0] == "average"
    assert rows[-1][-1] == "85.0"
    assert paths["png"].stat().st_size > 0


def test_context_report_outputs(tmp_path):
    lp = lp_from_text("patients received drugx at 300 mg daily", [(2, 2)])
    stats = context_frequencies(
        [(lp, [lp.spans[0]])], window=3, include_stopwords=False,
        scope=ContextScope.AROUND_CORRECT,
    )
    paths = write_context_report([stats], tmp_path)
    rows = read_rows(paths["csv"])
    assert rows[0] == ["window", "scope", "rank", "token", "count"]
    assert any(row[3] == "mg" for row in rows[1:])
    assert paths["png"].stat().st_size > 0


def test_extraction_report_outputs(tmp_path):
    report = ExtractionReport(
        tallies=[
            EntityTally(surface="alpha", count_a=10, count_b=8),
            EntityTally(surface="beta", count_a=50, count_b=1),
        ]
    )
    paths = write_extraction_report(report, tmp_path)
    rows = read_rows(paths["csv"])
    assert rows[0] == ["surface", "count_a", "count_b", "balanced", "rank"]
    assert rows[1][0] == "alpha" and rows[1][3] == "balanced"
    assert rows[2][0] == "beta" and rows[2][3] == "imbalanced"
    assert paths["png"].stat().st_size > 0


def test_match_report_outputs(tmp_path):
    rates = [
        MatchRates(pool="ALL", top_k=100, exact=0.77, exact_plus_partial=0.86),
        MatchRates(pool="BALANCED", top_k=100, exact=0.88, exact_plus_partial=0.91),
    ]
    paths = write_match_report(rates, tmp_path)
    rows = read_rows(paths["csv"])
    assert rows[1] == ["ALL", "100", "0.7700", "0.8600"]
    assert rows[2] == ["BALANCED", "100", "0.8800", "0.9100"]
    assert paths["png"].stat().st_size > 0
