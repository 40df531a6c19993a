"""Guessing-adjusted scoring, aggregates with CI95, reports, rewards.

Scores are computed per audio file: pc = (R - W) / (R + W) * 100, zero at
chance and 100 at perfect identification. Aggregation reports the mean of
per-file scores and a Student-t CI95 half-width. Only Main-block,
non-catch responses from included sessions count.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from ..errors import HarnessError
from ..session import (
    FilterResult,
    Session,
    advance,
    evaluate_catch,
    evaluate_screening,
    filter_submission,
    ParticipantProfile,
)
from ..study import StudyDefinition
from .stats import (
    CorrelationResult,
    StatTestResult,
    pearson,
    reg_inc_beta,
    student_t_cdf,
    student_t_ppf,
    student_t_two_sided_p,
    t_test,
)

__all__ = [
    "score_file", "aggregate", "Aggregate", "FileScore", "FeatureRow",
    "ConditionReport", "feature_breakdown", "bonus_ranking", "BonusEntry",
    "BonusRanking", "rebuild_sessions", "analyze_events", "SessionOutcome",
    "report_to_json", "report_to_text", "file_scores_csv",
    "t_test", "pearson", "StatTestResult", "CorrelationResult",
    "student_t_two_sided_p", "student_t_cdf", "student_t_ppf", "reg_inc_beta",
]


def score_file(r: int, w: int) -> float:
    """Guessing-adjusted percent correct: (R - W) / (R + W) * 100."""
    if r < 0 or w < 0:
        raise HarnessError(f"response counts must be non-negative "
                           f"(R={r}, W={w})")
    if r + w == 0:
        raise HarnessError("no responses (R + W = 0)")
    return (r - w) * 100.0 / (r + w)


@dataclass(frozen=True)
class FileScore:
    recording_id: str
    pair_id: str
    feature_class: str
    r: int
    w: int
    pc: float


@dataclass(frozen=True)
class Aggregate:
    n: int
    mean: float
    ci95_half_width: float | None  # undefined for n < 2


def aggregate(scores: list[float]) -> Aggregate:
    """Mean and Student-t CI95 half-width of per-file scores."""
    if not scores:
        raise HarnessError("cannot aggregate an empty score list")
    n = len(scores)
    mean = sum(scores) / n
    if n < 2:
        return Aggregate(n, mean, None)
    var = sum((v - mean) ** 2 for v in scores) / (n - 1)
    s = math.sqrt(var)
    hw = student_t_ppf(0.975, n - 1) * s / math.sqrt(n)
    return Aggregate(n, mean, hw)


@dataclass(frozen=True)
class FeatureRow:
    feature_class: str
    n_files: int
    mean: float
    ci95_half_width: float | None


def feature_breakdown(file_scores: list[FileScore]) -> list[FeatureRow]:
    """Aggregate file scores per feature class, in first-seen class order."""
    order: list[str] = []
    groups: dict[str, list[float]] = {}
    for fs in file_scores:
        if fs.feature_class not in groups:
            order.append(fs.feature_class)
            groups[fs.feature_class] = []
        groups[fs.feature_class].append(fs.pc)
    rows = []
    for cls in order:
        agg = aggregate(groups[cls])
        rows.append(FeatureRow(cls, agg.n, agg.mean, agg.ci95_half_width))
    return rows


@dataclass(frozen=True)
class ConditionReport:
    study_id: str
    condition: str
    language: str
    n_sessions: int
    n_included: int
    excluded_by_reason: dict
    file_scores: tuple[FileScore, ...]
    overall: Aggregate
    per_feature: tuple[FeatureRow, ...]
    responses_total: int
    responses_per_file_min: int
    responses_per_file_max: int
    ci_method: str = "student_t"  # CI95 via t quantile over per-file scores


# ---------------------------------------------------------------------------
# Event-log analysis: rebuild sessions through the session state machine,
# filter submissions, tabulate R/W per recording.

@dataclass(frozen=True)
class SessionOutcome:
    session_id: str
    participant_id: str
    block_id: str
    state: str
    included: bool
    exclusion_reason: str | None
    catch_correct: int
    catch_total: int
    completed_at: float | None


def rebuild_sessions(study: StudyDefinition,
                     events: list[dict]) -> dict[str, Session]:
    """Replay an event log through the session state machine.

    Accepts bare session events or service log records ({"seq", "event"}).
    Item order is reconstructed deterministically from the logged session
    seed, so replays reproduce the original sessions exactly.
    """
    from ..blocks import shuffle_for_session

    sessions: dict[str, Session] = {}
    for record in events:
        event = record.get("event", record)
        etype = event.get("type")
        sid = event.get("session_id")
        if etype == "session_opened":
            profile = ParticipantProfile(**event["participant"])
            verdict = evaluate_screening(profile, study.screening)
            plan = study.plan_by_id(event["block_id"])
            seed = int(event["session_seed"])
            sessions[sid] = Session(
                session_id=sid,
                study_id=study.study_id,
                condition=study.condition,
                block_id=event["block_id"],
                profile=profile,
                screening=verdict,
                criteria=study.screening,
                config=study.protocol,
                digits=study.digits,
                practice_items=list(study.practice.items),
                main_items=shuffle_for_session(plan, seed),
                session_seed=seed,
                opened_at=float(event.get("ts", 0.0)),
            )
        elif etype in ("consent", "questionnaire", "response", "abandoned"):
            if sid not in sessions:
                raise HarnessError(f"event for unknown session '{sid}'")
            advance(sessions[sid], event)
        # presentation/state/completed records are derivable; accepted, ignored.
    return sessions


def _session_outcome(session: Session) -> SessionOutcome:
    verdict: FilterResult = filter_submission(session)
    catch_total = sum(1 for it in session.main_items if it.is_catch)
    catch_correct = 0
    if session.state == "Completed" and catch_total:
        catch_correct = round(evaluate_catch(session) * catch_total)
    return SessionOutcome(
        session_id=session.session_id,
        participant_id=session.profile.participant_id,
        block_id=session.block_id,
        state=session.state,
        included=verdict.included,
        exclusion_reason=verdict.reason,
        catch_correct=catch_correct,
        catch_total=catch_total,
        completed_at=session.completed_at,
    )


def analyze_events(study: StudyDefinition,
                   events: list[dict]) -> tuple[ConditionReport, list[SessionOutcome]]:
    """Full analysis of a study event log into a ConditionReport."""
    sessions = rebuild_sessions(study, events)
    outcomes = [_session_outcome(s) for s in sessions.values()]
    outcomes.sort(key=lambda o: o.session_id)

    included_ids = {o.session_id for o in outcomes if o.included}
    counts: dict[str, list[int]] = {}  # recording_id -> [R, W]
    for sid in sorted(included_ids):
        s = sessions[sid]
        for item, resp in zip(s.main_items, s.main_responses):
            if item.is_catch:
                continue
            rw = counts.setdefault(item.recording_id, [0, 0])
            if resp.choice_side == item.correct_side:
                rw[0] += 1
            else:
                rw[1] += 1

    pair_of: dict[str, tuple[str, str]] = {}
    for plan in study.plans:
        for item in plan.items:
            if not item.is_catch:
                pair_of[item.recording_id] = (
                    item.pair_id, study.feature_class_of(item.pair_id))

    file_scores = []
    for rid in sorted(counts):
        r, w = counts[rid]
        pair_id, feature = pair_of.get(rid, ("?", "?"))
        file_scores.append(FileScore(rid, pair_id, feature, r, w,
                                     score_file(r, w)))

    excluded: dict[str, int] = {}
    for o in outcomes:
        if not o.included:
            excluded[o.exclusion_reason or "unknown"] = \
                excluded.get(o.exclusion_reason or "unknown", 0) + 1

    if file_scores:
        overall = aggregate([fs.pc for fs in file_scores])
        per_feature = tuple(feature_breakdown(file_scores))
        totals = [fs.r + fs.w for fs in file_scores]
        resp_total, resp_min, resp_max = sum(totals), min(totals), max(totals)
    else:
        overall = Aggregate(0, math.nan, None)
        per_feature = ()
        resp_total = resp_min = resp_max = 0

    report = ConditionReport(
        study_id=study.study_id,
        condition=study.condition,
        language=study.language,
        n_sessions=len(outcomes),
        n_included=len(included_ids),
        excluded_by_reason=dict(sorted(excluded.items())),
        file_scores=tuple(file_scores),
        overall=overall,
        per_feature=per_feature,
        responses_total=resp_total,
        responses_per_file_min=resp_min,
        responses_per_file_max=resp_max,
    )
    return report, outcomes


# ---------------------------------------------------------------------------
# Rewards ranking by validation-question performance.

@dataclass(frozen=True)
class BonusEntry:
    participant_id: str
    session_id: str
    validation_correct: int
    completed_at: float


@dataclass(frozen=True)
class BonusRanking:
    ranked: tuple[BonusEntry, ...]
    flagged: tuple[str, ...]  # session_ids earning the bonus
    bonus_per_session: float


def bonus_ranking(entries: list[BonusEntry], top_fraction: float,
                  bonus_per_session: float = 0.10) -> BonusRanking:
    """Rank by validation correct (desc), ties by earlier completion."""
    if not 0.0 <= top_fraction <= 1.0:
        raise HarnessError(f"top_fraction must be in [0, 1], got {top_fraction}")
    ranked = sorted(entries, key=lambda e: (-e.validation_correct,
                                            e.completed_at, e.session_id))
    quota = int(len(ranked) * top_fraction + 1e-9)
    flagged = tuple(e.session_id for e in ranked[:quota])
    return BonusRanking(tuple(ranked), flagged, bonus_per_session)


# ---------------------------------------------------------------------------
# Rendering: canonical JSON (machine), aligned text (human), CSV per file.

def _fmt(value, nd=4):
    if value is None:
        return None
    if isinstance(value, float):
        if math.isnan(value):
            return None
        return round(value, nd)
    return value


def report_to_doc(report: ConditionReport) -> dict:
    return {
        "format": "drt-report",
        "version": 1,
        "study_id": report.study_id,
        "condition": report.condition,
        "language": report.language,
        "sessions": {
            "total": report.n_sessions,
            "included": report.n_included,
            "excluded_by_reason": report.excluded_by_reason,
        },
        "overall": {
            "n_files": report.overall.n,
            "mean": _fmt(report.overall.mean),
            "ci95_half_width": _fmt(report.overall.ci95_half_width),
        },
        "per_feature": [
            {
                "feature_class": row.feature_class,
                "n_files": row.n_files,
                "mean": _fmt(row.mean),
                "ci95_half_width": _fmt(row.ci95_half_width),
            }
            for row in report.per_feature
        ],
        "responses": {
            "total": report.responses_total,
            "per_file_min": report.responses_per_file_min,
            "per_file_max": report.responses_per_file_max,
        },
        "file_scores": [
            {
                "recording_id": fs.recording_id,
                "pair_id": fs.pair_id,
                "feature_class": fs.feature_class,
                "r": fs.r,
                "w": fs.w,
                "pc": _fmt(fs.pc),
            }
            for fs in report.file_scores
        ],
        "ci_method": report.ci_method,
    }


def report_to_json(report: ConditionReport) -> str:
    return json.dumps(report_to_doc(report), ensure_ascii=False, indent=2,
                      sort_keys=True) + "\n"


def report_to_text(report: ConditionReport) -> str:
    lines = []
    lines.append(f"Condition report: {report.condition} "
                 f"({report.language}, study {report.study_id})")
    lines.append(f"Sessions: {report.n_included} included "
                 f"of {report.n_sessions}")
    if report.excluded_by_reason:
        excl = ", ".join(f"{k}={v}" for k, v in
                         report.excluded_by_reason.items())
        lines.append(f"Excluded: {excl}")
    hw = report.overall.ci95_half_width
    ci = f" +/- {hw:.2f} (CI95)" if hw is not None else ""
    lines.append(f"Overall: {report.overall.mean:.2f}{ci} over "
                 f"{report.overall.n} files")
    if report.per_feature:
        width = max(len(r.feature_class) for r in report.per_feature)
        lines.append("Per feature class:")
        for row in report.per_feature:
            hw = row.ci95_half_width
            ci = f" +/- {hw:6.2f}" if hw is not None else ""
            lines.append(f"  {row.feature_class:<{width}} "
                         f"{row.mean:7.2f}{ci}  n={row.n_files}")
    lines.append(f"Responses: {report.responses_total} total, "
                 f"{report.responses_per_file_min}-"
                 f"{report.responses_per_file_max} per file")
    lines.append(f"CI method: {report.ci_method}")
    return "\n".join(lines) + "\n"


def file_scores_csv(report: ConditionReport) -> str:
    lines = ["recording_id,pair_id,feature_class,R,W,pc"]
    for fs in report.file_scores:
        lines.append(f"{fs.recording_id},{fs.pair_id},{fs.feature_class},"
                     f"{fs.r},{fs.w},{fs.pc:.6g}")
    return "\n".join(lines) + "\n"
