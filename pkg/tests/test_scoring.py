import math
from fractions import Fraction

import pytest

from conftest import make_study
from drt_harness.errors import HarnessError
from drt_harness.scoring import (
    Aggregate,
    BonusEntry,
    FileScore,
    aggregate,
    analyze_events,
    bonus_ranking,
    feature_breakdown,
    file_scores_csv,
    report_to_json,
    report_to_text,
    score_file,
)
from drt_harness.simulator import ListenerModel, simulate_panel


# -- score_file ---------------------------------------------------------------

def test_score_examples():
    assert score_file(20, 0) == 100.0
    assert score_file(10, 10) == 0.0
    assert score_file(15, 5) == 50.0


def test_score_matches_exact_rational_oracle_exhaustive():
    for total in range(1, 41):
        for r in range(total + 1):
            w = total - r
            exact = float(Fraction((r - w) * 100, r + w))
            mine = score_file(r, w)
            assert mine == pytest.approx(exact, abs=abs(exact) * 2.3e-16 + 0.0)
            assert abs(mine - exact) <= abs(
                math.ulp(exact)), (r, w)


def test_score_antisymmetry_and_scale_invariance():
    for r, w in ((3, 7), (12, 5), (1, 0), (4, 4)):
        assert score_file(r, w) == -score_file(w, r)
        for k in (2, 3, 7):
            assert score_file(k * r, k * w) == score_file(r, w)


def test_score_no_responses_raises():
    with pytest.raises(HarnessError):
        score_file(0, 0)


# -- aggregate -----------------------------------------------------------------

def test_aggregate_zero_variance():
    agg = aggregate([100.0, 100.0, 100.0])
    assert agg.mean == 100.0
    assert agg.ci95_half_width == 0.0


def test_aggregate_single_score_ci_undefined():
    agg = aggregate([73.0])
    assert agg.mean == 73.0
    assert agg.ci95_half_width is None


def test_aggregate_example_80_90_100():
    agg = aggregate([80.0, 90.0, 100.0])
    assert agg.mean == pytest.approx(90.0)
    # s = 10, t(0.975, df=2) = 4.302653, hw = 4.302653 * 10 / sqrt(3)
    assert agg.ci95_half_width == pytest.approx(24.84, abs=5e-3)
    assert agg.ci95_half_width == pytest.approx(
        4.302652729749 * 10 / math.sqrt(3), rel=1e-9)


def test_aggregate_empty_raises():
    with pytest.raises(HarnessError):
        aggregate([])


# -- feature breakdown ------------------------------------------------------------

def fs(rid, cls, r, w):
    return FileScore(rid, f"pair-{rid}", cls, r, w, score_file(r, w))


def test_breakdown_partition_identity():
    scores = [fs("a", "voicing", 18, 2), fs("b", "voicing", 15, 5),
              fs("c", "nasality", 20, 0), fs("d", "nasality", 10, 10),
              fs("e", "nasality", 19, 1)]
    rows = feature_breakdown(scores)
    assert [r.feature_class for r in rows] == ["voicing", "nasality"]
    weighted = sum(r.mean * r.n_files for r in rows) / sum(r.n_files
                                                           for r in rows)
    overall = aggregate([s.pc for s in scores]).mean
    assert weighted == pytest.approx(overall, rel=1e-12)


def test_breakdown_single_class_equals_overall():
    scores = [fs("a", "tonal", 18, 2), fs("b", "tonal", 15, 5)]
    rows = feature_breakdown(scores)
    assert len(rows) == 1
    assert rows[0].mean == aggregate([s.pc for s in scores]).mean


def test_breakdown_tonal_only():
    scores = [fs("a", "tone1-tone2", 18, 2), fs("b", "tone3-tone4", 15, 5)]
    rows = feature_breakdown(scores)
    assert {r.feature_class for r in rows} == {"tone1-tone2", "tone3-tone4"}


# -- bonus ranking -----------------------------------------------------------------

def test_bonus_top_third():
    entries = [BonusEntry("p1", "s1", 20, 100.0),
               BonusEntry("p2", "s2", 18, 50.0),
               BonusEntry("p3", "s3", 15, 10.0)]
    ranking = bonus_ranking(entries, 1 / 3)
    assert ranking.flagged == ("s1",)
    assert ranking.bonus_per_session == 0.10


def test_bonus_ties_broken_by_completion_time():
    entries = [BonusEntry("p1", "s1", 20, 300.0),
               BonusEntry("p2", "s2", 20, 100.0),
               BonusEntry("p3", "s3", 20, 200.0)]
    ranking = bonus_ranking(entries, 2 / 3)
    assert ranking.flagged == ("s2", "s3")


def test_bonus_zero_fraction():
    entries = [BonusEntry("p1", "s1", 20, 1.0)]
    assert bonus_ranking(entries, 0.0).flagged == ()


# -- event-log analysis -------------------------------------------------------------

@pytest.fixture(scope="module")
def analyzed(small_study_mod):
    events = simulate_panel(small_study_mod, ListenerModel(q=0.9),
                            listeners_per_block=8, seed=77)
    return small_study_mod, events, analyze_events(small_study_mod, events)


@pytest.fixture(scope="module")
def small_study_mod():
    from drt_harness.session import ProtocolConfig

    return make_study(study_id="scoring-1", n_pairs=24, n_classes=4,
                      block_count=6,
                      protocol=ProtocolConfig(catch_trials=10,
                                              practice_items=8))


def test_analyze_counts(analyzed):
    study, events, (report, outcomes) = analyzed
    assert report.n_sessions == 48
    assert report.n_included <= report.n_sessions
    assert report.overall.n == len(report.file_scores)
    # every scored file is a non-catch recording of the study
    catch_ids = {it.recording_id for p in study.plans for it in p.items
                 if it.is_catch}
    assert all(fsc.recording_id not in catch_ids
               for fsc in report.file_scores)


def test_analyze_overall_is_mean_of_file_scores(analyzed):
    _, _, (report, _) = analyzed
    mean = sum(f.pc for f in report.file_scores) / len(report.file_scores)
    assert report.overall.mean == pytest.approx(mean, rel=1e-12)


def test_analyze_deterministic_bytes(analyzed):
    study, events, (report, _) = analyzed
    again, _ = analyze_events(study, events)
    assert report_to_json(again) == report_to_json(report)


def test_analyze_replay_matches_session_module(analyzed):
    study, events, (report, outcomes) = analyzed
    from drt_harness.scoring import rebuild_sessions
    from drt_harness.session import filter_submission

    sessions = rebuild_sessions(study, events)
    included = sum(1 for s in sessions.values()
                   if filter_submission(s).included)
    assert included == report.n_included


def test_report_renderings(analyzed):
    _, _, (report, _) = analyzed
    text = report_to_text(report)
    assert "Overall:" in text
    assert "CI method: student_t" in text
    csv_text = file_scores_csv(report)
    header, *rows = csv_text.strip().split("\n")
    assert header == "recording_id,pair_id,feature_class,R,W,pc"
    assert len(rows) == len(report.file_scores)


def test_simulated_expectation_grand_mean(analyzed):
    _, _, (report, _) = analyzed
    scores = [f.pc for f in report.file_scores]
    n = len(scores)
    mean = sum(scores) / n
    se = math.sqrt(sum((v - mean) ** 2 for v in scores) / (n - 1) / n)
    assert abs(mean - 80.0) < 3 * se + 1e-9
