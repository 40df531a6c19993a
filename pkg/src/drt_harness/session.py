"""One participant's journey: screening, protocol state machine, filtering.

The protocol order is Consent -> Questionnaire -> DigitsInNoise ->
Practice -> Main -> Completed, with Rejected(reason) terminal at any
gate. Raw data is never deleted: exclusion is a label applied when the
submission is filtered for analysis.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .blocks import BlockItem
from .errors import ProtocolError

STATE_ORDER = ["Consent", "Questionnaire", "DigitsInNoise", "Practice",
               "Main", "Completed"]


@dataclass(frozen=True)
class ScreeningCriteria:
    required_language: str
    residency_countries: frozenset = frozenset()
    exclude_dyslexia: bool = True
    exclude_hearing_problems: bool = True
    min_approval_rate: float = 0.98
    require_headphones: bool = True

    def __post_init__(self):
        if not 0.0 <= self.min_approval_rate <= 1.0:
            raise ProtocolError(f"approval rate must be in [0, 1], got "
                                f"{self.min_approval_rate}")


@dataclass(frozen=True)
class ParticipantProfile:
    participant_id: str
    first_language: str
    residency: str
    dyslexia: bool
    hearing_problems: bool
    headphone_use: bool
    quiet_environment: bool
    approval_rate: float = 1.0
    age_group: str | None = None
    gender: str | None = None

    def __post_init__(self):
        if not self.participant_id:
            raise ProtocolError("participant_id must be non-empty")


@dataclass(frozen=True)
class ScreeningResult:
    eligible: bool
    reasons: tuple[str, ...] = ()


def _same_language(a: str, b: str) -> bool:
    return a.split("-")[0].lower() == b.split("-")[0].lower()


def evaluate_screening(profile: ParticipantProfile,
                       criteria: ScreeningCriteria,
                       questionnaire: dict | None = None) -> ScreeningResult:
    """Evaluate eligibility; lists every failed criterion.

    When questionnaire answers are given they must repeat the
    recruitment-time claims consistently; any mismatch is a failure.
    """
    reasons = []
    if not _same_language(profile.first_language, criteria.required_language):
        reasons.append("language")
    if criteria.residency_countries and \
            profile.residency not in criteria.residency_countries:
        reasons.append("residency")
    if criteria.exclude_dyslexia and profile.dyslexia:
        reasons.append("dyslexia")
    if criteria.exclude_hearing_problems and profile.hearing_problems:
        reasons.append("hearing")
    if profile.approval_rate < criteria.min_approval_rate:
        reasons.append("approval_rate")
    if criteria.require_headphones and not profile.headphone_use:
        reasons.append("headphones")
    if questionnaire is not None:
        checks = {
            "first_language": profile.first_language,
            "residency": profile.residency,
            "dyslexia": profile.dyslexia,
            "hearing_problems": profile.hearing_problems,
            "headphone_use": profile.headphone_use,
        }
        for key, claimed in checks.items():
            if key in questionnaire and questionnaire[key] != claimed:
                reasons.append(f"inconsistent:{key}")
    return ScreeningResult(not reasons, tuple(reasons))


@dataclass(frozen=True)
class DigitsTrial:
    recording_ref: str
    snr_db: float
    answer: str


@dataclass(frozen=True)
class DigitsTest:
    trials: tuple[DigitsTrial, ...]


def normalize_triplet(text: str) -> str:
    return "".join(ch for ch in text if ch.isdigit())


@dataclass(frozen=True)
class DigitsResult:
    passed: bool
    correct_count: int
    total: int


def evaluate_digits(responses: list[str], test: DigitsTest,
                    pass_threshold: int = 5) -> DigitsResult:
    """A trial counts only when the full normalized triplet matches."""
    if len(responses) != len(test.trials):
        raise ProtocolError(f"expected {len(test.trials)} digit responses, "
                            f"got {len(responses)}")
    correct = sum(
        1 for resp, trial in zip(responses, test.trials)
        if normalize_triplet(resp) == normalize_triplet(trial.answer))
    return DigitsResult(correct >= pass_threshold, correct, len(test.trials))


@dataclass(frozen=True)
class ProtocolConfig:
    catch_trials: int = 20
    catch_min_fraction: float = 0.8  # strictly greater than, per protocol
    practice_items: int = 16
    practice_min_correct: int | None = None  # off by default
    digits_pass_threshold: int = 5  # not published; study-configurable
    session_timeout_minutes: float = 120.0
    single_playback: bool = True
    allow_repeat_participation: bool = True


@dataclass
class ResponseEvent:
    phase: str  # digits | practice | main
    index: int
    recording_id: str
    choice_side: str | None
    triplet: str | None
    presented_at: float
    responded_at: float

    def __post_init__(self):
        if self.responded_at < self.presented_at:
            raise ProtocolError("response timestamp precedes presentation")


@dataclass
class Session:
    session_id: str
    study_id: str
    condition: str
    block_id: str
    profile: ParticipantProfile
    screening: ScreeningResult
    criteria: ScreeningCriteria
    config: ProtocolConfig
    digits: DigitsTest
    practice_items: list[BlockItem]
    main_items: list[BlockItem]  # session-shuffled, catch interleaved
    session_seed: int
    opened_at: float
    state: str = "Consent"
    rejected_reason: str | None = None
    questionnaire: dict | None = None
    digits_responses: list[ResponseEvent] = field(default_factory=list)
    practice_responses: list[ResponseEvent] = field(default_factory=list)
    main_responses: list[ResponseEvent] = field(default_factory=list)
    completed_at: float | None = None
    last_activity_at: float = 0.0

    def __post_init__(self):
        if self.last_activity_at == 0.0:
            self.last_activity_at = self.opened_at

    def digits_result(self) -> DigitsResult | None:
        if len(self.digits_responses) != len(self.digits.trials):
            return None
        return evaluate_digits([r.triplet or "" for r in self.digits_responses],
                               self.digits, self.config.digits_pass_threshold)

    def current_index(self) -> int:
        if self.state == "DigitsInNoise":
            return len(self.digits_responses)
        if self.state == "Practice":
            return len(self.practice_responses)
        if self.state == "Main":
            return len(self.main_responses)
        raise ProtocolError(f"no current item in state {self.state}")

    def _reject(self, reason: str) -> None:
        self.state = "Rejected"
        self.rejected_reason = reason


def advance(session: Session, event: dict) -> Session:
    """Apply one protocol event; illegal events raise without state change."""
    etype = event.get("type")
    ts = float(event.get("ts", session.last_activity_at))

    if session.state in ("Completed", "Rejected"):
        raise ProtocolError(f"session is terminal ({session.state})")

    if etype == "consent":
        if session.state != "Consent":
            raise ProtocolError(f"consent event illegal in {session.state}")
        if event.get("accepted"):
            session.state = "Questionnaire"
        else:
            session._reject("consent")

    elif etype == "questionnaire":
        if session.state != "Questionnaire":
            raise ProtocolError(f"questionnaire event illegal in "
                                f"{session.state}")
        answers = dict(event.get("answers", {}))
        session.questionnaire = answers
        verdict = evaluate_screening(session.profile, session.criteria,
                                     questionnaire=answers)
        if verdict.eligible:
            session.state = "DigitsInNoise"
        else:
            session._reject("screening")

    elif etype == "response":
        _apply_response(session, event)

    elif etype == "abandoned":
        session._reject(str(event.get("reason", "timeout")))

    else:
        raise ProtocolError(f"unknown event type {etype!r}")

    session.last_activity_at = ts
    return session


def _apply_response(session: Session, event: dict) -> None:
    phase = event.get("phase")
    expected_phase = {"DigitsInNoise": "digits", "Practice": "practice",
                      "Main": "main"}.get(session.state)
    if expected_phase is None or phase != expected_phase:
        raise ProtocolError(f"response for phase {phase!r} illegal in state "
                            f"{session.state}")
    index = int(event.get("index", -1))

    if phase == "digits":
        store = session.digits_responses
        total = len(session.digits.trials)
        ref = session.digits.trials[index].recording_ref \
            if 0 <= index < total else None
    elif phase == "practice":
        store = session.practice_responses
        total = len(session.practice_items)
        ref = session.practice_items[index].recording_id \
            if 0 <= index < total else None
    else:
        store = session.main_responses
        total = len(session.main_items)
        ref = session.main_items[index].recording_id \
            if 0 <= index < total else None

    if not 0 <= index < total:
        raise ProtocolError(f"unknown item index {index} for phase {phase}")
    if index != len(store):
        raise ProtocolError(f"expected response for item {len(store)}, "
                            f"got {index} (one response per item)")
    rec = ResponseEvent(
        phase=phase,
        index=index,
        recording_id=ref,
        choice_side=event.get("choice_side"),
        triplet=event.get("triplet"),
        presented_at=float(event.get("presented_at", 0.0)),
        responded_at=float(event.get("responded_at", 0.0)),
    )
    store.append(rec)

    if phase == "digits" and len(store) == total:
        result = session.digits_result()
        if result.passed:
            session.state = "Practice"
        else:
            session._reject("digits")
    elif phase == "practice" and len(store) == total:
        cfg = session.config
        if cfg.practice_min_correct is not None:
            correct = sum(
                1 for r, it in zip(store, session.practice_items)
                if r.choice_side == it.correct_side)
            if correct < cfg.practice_min_correct:
                session._reject("practice")
                return
        session.state = "Main"
    elif phase == "main" and len(store) == total:
        session.state = "Completed"
        session.completed_at = rec.responded_at


def evaluate_catch(session: Session) -> float:
    """Fraction of catch trials answered correctly, over catch trials only."""
    catch = [(it, r) for it, r in zip(session.main_items,
                                      session.main_responses) if it.is_catch]
    total_catch = sum(1 for it in session.main_items if it.is_catch)
    if total_catch == 0:
        raise ProtocolError("no catch trials configured")
    if len(session.main_responses) < len(session.main_items):
        raise ProtocolError("main block not completed")
    correct = sum(1 for it, r in catch if r.choice_side == it.correct_side)
    return correct / total_catch


@dataclass(frozen=True)
class FilterResult:
    included: bool
    reason: str | None = None


def filter_submission(session: Session,
                      config: ProtocolConfig | None = None) -> FilterResult:
    """Inclusion verdict for analysis; reports the first failing criterion.

    Included iff screening passed, headphones and a quiet environment were
    claimed, the digits test was passed, and strictly more than the catch
    threshold (80%) of validation questions were answered correctly.
    """
    cfg = config or session.config
    if not session.screening.eligible:
        return FilterResult(False, "screening")
    if not (session.profile.headphone_use and session.profile.quiet_environment):
        return FilterResult(False, "environment")
    if session.state == "Rejected":
        return FilterResult(False, session.rejected_reason or "rejected")
    if session.state != "Completed":
        return FilterResult(False, "incomplete")
    digits = session.digits_result()
    if digits is None or not digits.passed:
        return FilterResult(False, "digits")
    fraction = evaluate_catch(session)
    if not fraction > cfg.catch_min_fraction:
        return FilterResult(False, "validation")
    return FilterResult(True, None)


def is_expired(session: Session, now: float,
               config: ProtocolConfig | None = None) -> bool:
    cfg = config or session.config
    if session.state in ("Completed", "Rejected"):
        return False
    return (now - session.last_activity_at) > cfg.session_timeout_minutes * 60.0


def completion_token(session: Session) -> str:
    digest = hashlib.sha256(
        f"{session.study_id}:{session.session_id}:{session.session_seed}"
        .encode()).hexdigest()
    return digest[:16]
