"""Synthetic listener panels: desk-scale verification of the full pipeline.

Simulated listeners answer each item independently with a configurable
correct-probability, so expected scores have closed forms: a listener at
probability q yields E[pc] = (2q - 1) * 100 per file. Emitted event logs
use the same format as the live service and replay through the session
and scoring modules unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .blocks import shuffle_for_session
from .scoring import ConditionReport, analyze_events
from .scoring.stats import StatTestResult, t_test
from .study import StudyDefinition

_EPOCH = 1_700_000_000.0  # synthetic wall clock origin


@dataclass(frozen=True)
class ListenerModel:
    """Item-level independent response model.

    q is the base correct-probability for scored items; per
    (condition, feature_class) overrides and a per-recording difficulty
    offset hook refine it. Catch trials and the digits screen have their
    own probabilities.
    """

    q: float = 0.9
    overrides: dict = field(default_factory=dict)  # (condition, class) -> q
    recording_offsets: dict = field(default_factory=dict)  # id -> delta
    catch_q: float = 0.97
    digits_q: float = 0.97

    def __post_init__(self):
        for value in (self.q, self.catch_q, self.digits_q,
                      *self.overrides.values()):
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"probability {value} outside [0, 1]")

    def item_probability(self, study: StudyDefinition, item) -> float:
        if item.is_catch:
            return self.catch_q
        cls = study.feature_class_of(item.pair_id)
        p = self.overrides.get((study.condition, cls), self.q)
        p += self.recording_offsets.get(item.recording_id, 0.0)
        return min(1.0, max(0.0, p))


def _eligible_profile(study: StudyDefinition, participant_id: str) -> dict:
    residency = sorted(study.screening.residency_countries)
    return {
        "participant_id": participant_id,
        "first_language": study.screening.required_language,
        "residency": residency[0] if residency else "US",
        "dyslexia": False,
        "hearing_problems": False,
        "headphone_use": True,
        "quiet_environment": True,
        "approval_rate": 1.0,
        "age_group": None,
        "gender": None,
    }


def _wrong_triplet(answer: str) -> str:
    digits = "".join(ch for ch in answer if ch.isdigit()) or "000"
    flipped = str((int(digits[-1]) + 1) % 10)
    return digits[:-1] + flipped


def simulate_session(study: StudyDefinition, model: ListenerModel,
                     session_id: str, participant_id: str, block_id: str,
                     session_seed: int, rng: np.random.Generator,
                     t0: float) -> list[dict]:
    """Generate one protocol-compliant session event log."""
    plan = study.plan_by_id(block_id)
    order = shuffle_for_session(plan, session_seed)
    profile = _eligible_profile(study, participant_id)
    clock = t0
    events: list[dict] = [{
        "type": "session_opened",
        "session_id": session_id,
        "study_id": study.study_id,
        "participant": profile,
        "block_id": block_id,
        "session_seed": session_seed,
        "ts": clock,
    }]
    clock += 5.0
    events.append({"type": "consent", "session_id": session_id,
                   "accepted": True, "ts": clock})
    clock += 10.0
    events.append({
        "type": "questionnaire",
        "session_id": session_id,
        "answers": {
            "first_language": profile["first_language"],
            "residency": profile["residency"],
            "dyslexia": profile["dyslexia"],
            "hearing_problems": profile["hearing_problems"],
            "headphone_use": profile["headphone_use"],
            "quiet_environment": profile["quiet_environment"],
        },
        "ts": clock,
    })

    digits_ok = rng.random(len(study.digits.trials)) < model.digits_q
    for i, trial in enumerate(study.digits.trials):
        clock += 3.0
        answer = trial.answer if digits_ok[i] else _wrong_triplet(trial.answer)
        events.append({
            "type": "response", "session_id": session_id, "phase": "digits",
            "index": i, "recording_id": trial.recording_ref,
            "triplet": answer, "presented_at": clock - 2.0,
            "responded_at": clock, "ts": clock,
        })
    if not digits_ok.sum() >= study.protocol.digits_pass_threshold:
        return events  # rejected at the digits gate; log ends here

    practice_ok = rng.random(len(study.practice.items)) < model.catch_q
    for i, item in enumerate(study.practice.items):
        clock += 3.0
        side = item.correct_side if practice_ok[i] else _other(item.correct_side)
        events.append({
            "type": "response", "session_id": session_id, "phase": "practice",
            "index": i, "recording_id": item.recording_id,
            "choice_side": side, "presented_at": clock - 2.0,
            "responded_at": clock, "ts": clock,
        })

    probs = np.array([model.item_probability(study, it) for it in order])
    correct = rng.random(len(order)) < probs
    for i, item in enumerate(order):
        clock += 3.0
        side = item.correct_side if correct[i] else _other(item.correct_side)
        events.append({
            "type": "response", "session_id": session_id, "phase": "main",
            "index": i, "recording_id": item.recording_id,
            "choice_side": side, "presented_at": clock - 2.0,
            "responded_at": clock, "ts": clock,
        })
    return events


def _other(side: str) -> str:
    return "absent" if side == "present" else "present"


def simulate_panel(study: StudyDefinition, model: ListenerModel,
                   listeners_per_block: int = 20,
                   seed: int = 0) -> list[dict]:
    """Simulate a full panel: listeners_per_block sessions per block.

    Returns the flat event log for all sessions, deterministic given the
    seed; each listener has an independent derived stream.
    """
    master = np.random.Generator(np.random.PCG64(seed))
    events: list[dict] = []
    counter = 0
    for plan in study.plans:
        for k in range(listeners_per_block):
            counter += 1
            session_seed = int(master.integers(0, 2 ** 62))
            listener_rng = np.random.Generator(np.random.PCG64(
                np.random.SeedSequence(entropy=seed,
                                       spawn_key=(counter,))))
            sid = f"{study.study_id}-s{counter:04d}"
            pid = f"sim-{counter:04d}"
            events.extend(simulate_session(
                study, model, sid, pid, plan.block_id, session_seed,
                listener_rng, _EPOCH + counter * 10_000.0))
    return events


@dataclass(frozen=True)
class ConditionPairResult:
    report_a: ConditionReport
    report_b: ConditionReport
    gap: float  # mean_a - mean_b
    test: StatTestResult


def simulate_condition_pair(study_a: StudyDefinition,
                            study_b: StudyDefinition,
                            model_a: ListenerModel, model_b: ListenerModel,
                            listeners_per_block: int = 20, seed: int = 0,
                            alpha: float = 0.05) -> ConditionPairResult:
    """Simulate both conditions and compare with a Welch t-test."""
    events_a = simulate_panel(study_a, model_a, listeners_per_block, seed)
    events_b = simulate_panel(study_b, model_b, listeners_per_block,
                              seed + 1)
    report_a, _ = analyze_events(study_a, events_a)
    report_b, _ = analyze_events(study_b, events_b)
    scores_a = [fs.pc for fs in report_a.file_scores]
    scores_b = [fs.pc for fs in report_b.file_scores]
    result = t_test(scores_a, scores_b, alpha=alpha)
    return ConditionPairResult(report_a, report_b,
                               report_a.overall.mean - report_b.overall.mean,
                               result)
