"""Study hosting: session lifecycle, write-ahead event log, recovery, export.

Every accepted command is appended to the study's event log before it
touches in-memory state, so killing the process at any point loses at
most the in-flight command; replaying the log (plus an optional snapshot)
reconstructs the exact pre-crash session states and the exact report.
"""

from __future__ import annotations

import hashlib
import io
import json
import random
import time
import zipfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from threading import Lock

from ..blocks import BlockItem, plans_to_json, shuffle_for_session
from ..errors import ProtocolError, ServiceError
from ..scoring import ConditionReport, analyze_events, report_to_json
from ..session import (
    ParticipantProfile,
    Session,
    advance,
    completion_token,
    evaluate_screening,
    is_expired,
)
from ..study import StudyDefinition, study_from_doc, study_to_json
from .store import EventLog, SnapshotStore

PROFILE_FIELDS = ("participant_id", "first_language", "residency", "dyslexia",
                  "hearing_problems", "headphone_use", "quiet_environment",
                  "approval_rate", "age_group", "gender")


def _iso(ts: float) -> str:
    return datetime.fromtimestamp(ts, timezone.utc).isoformat()


@dataclass
class SessionRuntime:
    session: Session
    presented: dict = field(default_factory=dict)  # (phase, index) -> ts


@dataclass
class StudyRuntime:
    definition: StudyDefinition
    directory: Path
    log: EventLog
    records: list = field(default_factory=list)
    sessions: dict = field(default_factory=dict)  # sid -> SessionRuntime
    assignments: dict = field(default_factory=dict)  # block_id -> count
    counter: int = 0
    seq: int = 0
    lock: Lock = field(default_factory=Lock)


class HarnessService:
    """In-process service core; the HTTP layer is a thin wrapper."""

    def __init__(self, root: str | Path, *, clock=time.time,
                 fault_after: int | None = None, tear_on_fault: bool = False,
                 snapshot_every: int = 500):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.clock = clock
        self.fault_after = fault_after
        self.tear_on_fault = tear_on_fault
        self.snapshot_every = snapshot_every
        self.studies: dict[str, StudyRuntime] = {}
        self.audio_paths: dict[str, Path] = {}  # content hash -> file path
        self._recover_all()

    # -- study lifecycle ---------------------------------------------------

    def create_study(self, doc: dict) -> str:
        try:
            definition = study_from_doc(doc)
        except (KeyError, TypeError, ValueError) as exc:
            raise ServiceError("bad_study", f"invalid study document: {exc}")
        study_id = definition.study_id
        if study_id in self.studies:
            raise ServiceError("study_exists",
                               f"study '{study_id}' already exists", 409)
        if definition.status == "open" and not definition.plans:
            raise ServiceError("bad_study",
                               "an open study needs complete block plans")
        directory = self.root / study_id
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "study.json").write_text(study_to_json(definition),
                                              encoding="utf-8")
        runtime = StudyRuntime(
            definition=definition,
            directory=directory,
            log=self._open_log(directory),
        )
        self._register_audio(definition)
        self.studies[study_id] = runtime
        return study_id

    def _open_log(self, directory: Path) -> EventLog:
        return EventLog(directory / "events.jsonl",
                        fault_after=self.fault_after,
                        tear_on_fault=self.tear_on_fault)

    def _register_audio(self, definition: StudyDefinition) -> None:
        for entry in definition.audio.values():
            path = Path(entry["path"])
            if not path.is_absolute():
                path = self.root / path
            self.audio_paths[entry["hash"]] = path

    def _recover_all(self) -> None:
        for study_file in sorted(self.root.glob("*/study.json")):
            directory = study_file.parent
            definition = study_from_doc(
                json.loads(study_file.read_text(encoding="utf-8")))
            runtime = StudyRuntime(
                definition=definition,
                directory=directory,
                log=self._open_log(directory),
            )
            self._register_audio(definition)
            self.studies[definition.study_id] = runtime
            snapshot = SnapshotStore(directory / "snapshot.json").load()
            records = EventLog.read(directory / "events.jsonl")
            start_seq = 0
            if snapshot is not None:
                start_seq, state = snapshot
                self._restore_snapshot(runtime, state)
            runtime.seq = start_seq
            for record in records:
                runtime.records.append(record)
                if record["seq"] > start_seq:
                    self._apply(runtime, record["event"], replay=True)
                    runtime.seq = record["seq"]

    # -- snapshots ----------------------------------------------------------

    def _snapshot_state(self, runtime: StudyRuntime) -> dict:
        sessions = {}
        for sid, srt in runtime.sessions.items():
            s = srt.session
            sessions[sid] = {
                "session_id": s.session_id,
                "block_id": s.block_id,
                "session_seed": s.session_seed,
                "profile": {f: getattr(s.profile, f) for f in PROFILE_FIELDS},
                "state": s.state,
                "rejected_reason": s.rejected_reason,
                "questionnaire": s.questionnaire,
                "opened_at": s.opened_at,
                "completed_at": s.completed_at,
                "last_activity_at": s.last_activity_at,
                "responses": {
                    phase: [
                        {"phase": r.phase, "index": r.index,
                         "recording_id": r.recording_id,
                         "choice_side": r.choice_side, "triplet": r.triplet,
                         "presented_at": r.presented_at,
                         "responded_at": r.responded_at}
                        for r in store
                    ]
                    for phase, store in (
                        ("digits", s.digits_responses),
                        ("practice", s.practice_responses),
                        ("main", s.main_responses),
                    )
                },
                "presented": [[list(k), v] for k, v in
                              sorted(srt.presented.items())],
            }
        return {
            "counter": runtime.counter,
            "assignments": dict(sorted(runtime.assignments.items())),
            "sessions": sessions,
        }

    def _restore_snapshot(self, runtime: StudyRuntime, state: dict) -> None:
        from ..session import ResponseEvent

        runtime.counter = state["counter"]
        runtime.assignments = dict(state["assignments"])
        for sid, doc in state["sessions"].items():
            session = self._new_session(runtime, sid, doc["block_id"],
                                        doc["session_seed"], doc["profile"],
                                        doc["opened_at"])
            session.state = doc["state"]
            session.rejected_reason = doc["rejected_reason"]
            session.questionnaire = doc["questionnaire"]
            session.completed_at = doc["completed_at"]
            session.last_activity_at = doc["last_activity_at"]
            stores = {"digits": session.digits_responses,
                      "practice": session.practice_responses,
                      "main": session.main_responses}
            for phase, rows in doc["responses"].items():
                stores[phase].extend(ResponseEvent(**row) for row in rows)
            srt = SessionRuntime(session=session)
            srt.presented = {(key[0], key[1]): ts
                             for key, ts in doc["presented"]}
            runtime.sessions[sid] = srt

    def _maybe_snapshot(self, runtime: StudyRuntime) -> None:
        if self.snapshot_every and runtime.seq % self.snapshot_every == 0:
            SnapshotStore(runtime.directory / "snapshot.json").write(
                runtime.seq, self._snapshot_state(runtime))

    # -- command plumbing ----------------------------------------------------

    def _study(self, study_id: str) -> StudyRuntime:
        if study_id not in self.studies:
            raise ServiceError("unknown_study",
                               f"study '{study_id}' not found", 404)
        return self.studies[study_id]

    def _find_session(self, session_id: str) -> tuple[StudyRuntime, SessionRuntime]:
        for runtime in self.studies.values():
            if session_id in runtime.sessions:
                return runtime, runtime.sessions[session_id]
        raise ServiceError("unknown_session",
                           f"session '{session_id}' not found", 404)

    def _commit(self, runtime: StudyRuntime, session_id: str | None,
                event: dict) -> None:
        """Write-ahead append, then apply to memory."""
        record = {
            "seq": runtime.seq + 1,
            "session_id": session_id,
            "ts": _iso(event.get("ts", self.clock())),
            "event": event,
        }
        runtime.log.append(record)
        runtime.records.append(record)
        runtime.seq += 1
        self._apply(runtime, event, replay=False)
        self._maybe_snapshot(runtime)

    def _apply(self, runtime: StudyRuntime, event: dict, *, replay: bool) -> None:
        etype = event["type"]
        if etype == "session_opened":
            sid = event["session_id"]
            session = self._new_session(runtime, sid, event["block_id"],
                                        event["session_seed"],
                                        event["participant"], event["ts"])
            runtime.sessions[sid] = SessionRuntime(session=session)
            runtime.counter += 1
            runtime.assignments[event["block_id"]] = \
                runtime.assignments.get(event["block_id"], 0) + 1
        elif etype == "presentation":
            srt = runtime.sessions[event["session_id"]]
            srt.presented[(event["phase"], event["index"])] = event["ts"]
        elif etype in ("consent", "questionnaire", "response", "abandoned"):
            srt = runtime.sessions[event["session_id"]]
            advance(srt.session, event)
        elif etype == "state":
            pass  # informational; state is derived by advance()
        else:
            raise ServiceError("bad_event", f"unknown event type {etype!r}")

    def _new_session(self, runtime: StudyRuntime, session_id: str,
                     block_id: str, session_seed: int, profile_doc: dict,
                     opened_at: float) -> Session:
        definition = runtime.definition
        profile = ParticipantProfile(**{f: profile_doc.get(f)
                                        for f in PROFILE_FIELDS})
        verdict = evaluate_screening(profile, definition.screening)
        plan = definition.plan_by_id(block_id)
        return Session(
            session_id=session_id,
            study_id=definition.study_id,
            condition=definition.condition,
            block_id=block_id,
            profile=profile,
            screening=verdict,
            criteria=definition.screening,
            config=definition.protocol,
            digits=definition.digits,
            practice_items=list(definition.practice.items),
            main_items=shuffle_for_session(plan, session_seed),
            session_seed=session_seed,
            opened_at=float(opened_at),
        )

    # -- participant-facing commands -----------------------------------------

    def open_session(self, study_id: str, claims: dict) -> dict:
        runtime = self._study(study_id)
        with runtime.lock:
            definition = runtime.definition
            if definition.status != "open":
                raise ServiceError("study_closed",
                                   f"study '{study_id}' is not open", 409)
            if definition.quota is not None and \
                    runtime.counter >= definition.quota:
                raise ServiceError("study_full",
                                   f"study '{study_id}' reached its quota", 409)
            try:
                profile = ParticipantProfile(
                    **{f: claims.get(f) for f in PROFILE_FIELDS})
            except (ProtocolError, TypeError) as exc:
                raise ServiceError("bad_claims", str(exc))
            if not definition.protocol.allow_repeat_participation:
                for srt in runtime.sessions.values():
                    if srt.session.profile.participant_id == \
                            profile.participant_id:
                        raise ServiceError(
                            "repeat_participation",
                            "participant already has a session in this study",
                            409)
            verdict = evaluate_screening(profile, definition.screening)
            if not verdict.eligible:
                raise ServiceError(
                    "ineligible",
                    "screening failed: " + ", ".join(verdict.reasons), 403)

            block_id = self._least_served_block(runtime)
            counter = runtime.counter + 1
            session_id = f"{study_id}-s{counter:04d}"
            base_seed = int(definition.seeds.get("sessions", 0))
            session_seed = base_seed + counter
            now = self.clock()
            self._commit(runtime, session_id, {
                "type": "session_opened",
                "session_id": session_id,
                "study_id": study_id,
                "participant": {f: getattr(profile, f) for f in PROFILE_FIELDS},
                "block_id": block_id,
                "session_seed": session_seed,
                "ts": now,
            })
            return {
                "session_id": session_id,
                "state": "Consent",
                "block_id": block_id,
                "opened_at": _iso(now),
                "config": {
                    "single_playback": definition.protocol.single_playback,
                    "practice_items": definition.protocol.practice_items,
                    "language": definition.language,
                },
            }

    def _least_served_block(self, runtime: StudyRuntime) -> str:
        best_id, best_count = None, None
        for plan in runtime.definition.plans:
            count = runtime.assignments.get(plan.block_id, 0)
            if best_count is None or count < best_count:
                best_id, best_count = plan.block_id, count
        return best_id

    def _check_expiry(self, runtime: StudyRuntime, srt: SessionRuntime) -> None:
        now = self.clock()
        if is_expired(srt.session, now):
            self._commit(runtime, srt.session.session_id, {
                "type": "abandoned",
                "session_id": srt.session.session_id,
                "reason": "timeout",
                "ts": now,
            })

    def next_item(self, session_id: str) -> dict:
        runtime, srt = self._find_session(session_id)
        with runtime.lock:
            self._check_expiry(runtime, srt)
            session = srt.session
            state = session.state
            if state == "Rejected":
                return {"kind": "rejected", "reason": session.rejected_reason}
            if state == "Completed":
                return {"kind": "completed",
                        "completion_token": completion_token(session)}
            if state in ("Consent", "Questionnaire"):
                return {"kind": "phase", "phase": state}

            index = session.current_index()
            phase = {"DigitsInNoise": "digits", "Practice": "practice",
                     "Main": "main"}[state]
            if phase == "digits":
                total = len(session.digits.trials)
                if index >= total:
                    return {"kind": "phase", "phase": state}
                trial = session.digits.trials[index]
                descriptor = {
                    "kind": "digits_item",
                    "phase": "digits",
                    "index": index,
                    "total": total,
                    "audio_url": self._audio_url(runtime, trial.recording_ref),
                }
            else:
                items = (session.practice_items if phase == "practice"
                         else session.main_items)
                total = len(items)
                if index >= total:
                    return {"kind": "phase", "phase": state}
                item = items[index]
                descriptor = {
                    "kind": "trial",
                    "phase": phase,
                    "index": index,
                    "total": total,
                    "audio_url": self._audio_url(runtime, item.recording_id),
                    "choices": self._display_choices(session, phase, index,
                                                     item),
                }
                if phase == "practice":
                    descriptor["volume_check"] = True
            key = (phase, index)
            if key not in srt.presented:
                self._commit(runtime, session_id, {
                    "type": "presentation",
                    "session_id": session_id,
                    "phase": phase,
                    "index": index,
                    "recording_id": self._recording_for(session, phase, index),
                    "ts": self.clock(),
                })
            return descriptor

    def _recording_for(self, session: Session, phase: str, index: int) -> str:
        if phase == "digits":
            return session.digits.trials[index].recording_ref
        items = (session.practice_items if phase == "practice"
                 else session.main_items)
        return items[index].recording_id

    def _audio_url(self, runtime: StudyRuntime, recording_id: str) -> str | None:
        entry = runtime.definition.audio.get(recording_id)
        if entry is None:
            return None
        return f"/audio/{entry['hash']}"

    @staticmethod
    def _display_choices(session: Session, phase: str, index: int,
                         item: BlockItem) -> list[str]:
        rnd = random.Random(session.session_seed * 1_000_003
                            + index * 2 + (phase == "main"))
        left_first = rnd.random() < 0.5
        words = [item.word_present, item.word_absent]
        return words if left_first else words[::-1]

    def submit_response(self, session_id: str, payload: dict) -> dict:
        runtime, srt = self._find_session(session_id)
        with runtime.lock:
            self._check_expiry(runtime, srt)
            session = srt.session
            event = self._build_response_event(srt, payload)
            self._precheck(session, event)
            self._commit(runtime, session_id, event)
            self._commit(runtime, session_id, {
                "type": "state",
                "session_id": session_id,
                "state": session.state,
                "reason": session.rejected_reason,
                "ts": self.clock(),
            })
            out = {"accepted": True, "state": session.state}
            if session.state == "Completed":
                out["completion_token"] = completion_token(session)
            if session.state == "Rejected":
                out["reason"] = session.rejected_reason
            return out

    def _build_response_event(self, srt: SessionRuntime,
                              payload: dict) -> dict:
        session = srt.session
        phase = payload.get("phase")
        if phase not in ("digits", "practice", "main"):
            raise ServiceError("bad_response", f"unknown phase {phase!r}")
        try:
            index = int(payload.get("index"))
        except (TypeError, ValueError):
            raise ServiceError("bad_response", "index must be an integer")
        now = self.clock()
        presented = srt.presented.get((phase, index), now)
        event = {
            "type": "response",
            "session_id": session.session_id,
            "phase": phase,
            "index": index,
            "presented_at": float(payload.get("presented_at", presented)),
            "responded_at": float(payload.get("responded_at", now)),
            "ts": now,
        }
        if phase == "digits":
            triplet = payload.get("triplet")
            if not isinstance(triplet, str):
                raise ServiceError("bad_response",
                                   "digits response needs a 'triplet' string")
            event["triplet"] = triplet
            if 0 <= index < len(session.digits.trials):
                event["recording_id"] = \
                    session.digits.trials[index].recording_ref
        else:
            items = (session.practice_items if phase == "practice"
                     else session.main_items)
            if not 0 <= index < len(items):
                raise ServiceError("bad_response",
                                   f"item index {index} out of range")
            item = items[index]
            word = payload.get("choice_word")
            if word == item.word_present:
                side = "present"
            elif word == item.word_absent:
                side = "absent"
            else:
                raise ServiceError(
                    "bad_response",
                    f"choice {word!r} is not one of the displayed words")
            event["choice_side"] = side
            event["recording_id"] = item.recording_id
        return event

    def _precheck(self, session: Session, event: dict) -> None:
        """Mirror advance() legality checks without mutating state."""
        expected_phase = {"DigitsInNoise": "digits", "Practice": "practice",
                          "Main": "main"}.get(session.state)
        phase = event["phase"]
        if expected_phase != phase:
            raise ServiceError(
                "out_of_phase",
                f"response for phase {phase!r} illegal in state "
                f"{session.state}", 409)
        stores = {"digits": session.digits_responses,
                  "practice": session.practice_responses,
                  "main": session.main_responses}
        expected_index = len(stores[phase])
        if event["index"] != expected_index:
            raise ServiceError(
                "duplicate_or_out_of_order",
                f"expected response for item {expected_index}, got "
                f"{event['index']}", 409)
        if event["responded_at"] < event["presented_at"]:
            raise ServiceError("bad_response",
                               "response timestamp precedes presentation")

    def submit_event(self, session_id: str, payload: dict) -> dict:
        runtime, srt = self._find_session(session_id)
        with runtime.lock:
            self._check_expiry(runtime, srt)
            session = srt.session
            etype = payload.get("type")
            now = self.clock()
            if etype == "consent":
                if session.state != "Consent":
                    raise ServiceError("out_of_phase",
                                       f"consent illegal in {session.state}",
                                       409)
                event = {"type": "consent", "session_id": session_id,
                         "accepted": bool(payload.get("accepted")), "ts": now}
            elif etype == "questionnaire":
                if session.state != "Questionnaire":
                    raise ServiceError(
                        "out_of_phase",
                        f"questionnaire illegal in {session.state}", 409)
                answers = payload.get("answers")
                if not isinstance(answers, dict):
                    raise ServiceError("bad_event",
                                       "questionnaire needs an 'answers' map")
                event = {"type": "questionnaire", "session_id": session_id,
                         "answers": answers, "ts": now}
            elif etype == "abandoned":
                if session.state in ("Completed", "Rejected"):
                    raise ServiceError("out_of_phase",
                                       "session already terminal", 409)
                event = {"type": "abandoned", "session_id": session_id,
                         "reason": str(payload.get("reason", "abandoned")),
                         "ts": now}
            else:
                raise ServiceError("bad_event",
                                   f"unsupported event type {etype!r}")
            self._commit(runtime, session_id, event)
            self._commit(runtime, session_id, {
                "type": "state", "session_id": session_id,
                "state": session.state, "reason": session.rejected_reason,
                "ts": self.clock(),
            })
            out = {"accepted": True, "state": session.state}
            if session.state == "Rejected":
                out["reason"] = session.rejected_reason
            return out

    # -- researcher-facing ----------------------------------------------------

    def report(self, study_id: str) -> ConditionReport:
        runtime = self._study(study_id)
        with runtime.lock:
            report, _ = analyze_events(runtime.definition, runtime.records)
            return report

    def export_archive(self, study_id: str) -> bytes:
        """Deterministic zip: study config, block plans, full event log."""
        runtime = self._study(study_id)
        with runtime.lock:
            import json as _json

            events_text = "".join(
                _json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n"
                for r in runtime.records)
            files = [
                ("study.json", study_to_json(runtime.definition)),
                ("blocks.json", plans_to_json(list(runtime.definition.plans))),
                ("events.jsonl", events_text),
            ]
            buf = io.BytesIO()
            with zipfile.ZipFile(buf, "w", zipfile.ZIP_STORED) as zf:
                for name, text in files:
                    info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
                    zf.writestr(info, text.encode("utf-8"))
            return buf.getvalue()

    def report_json(self, study_id: str) -> str:
        return report_to_json(self.report(study_id))

    def audio_content(self, content_hash: str) -> bytes:
        path = self.audio_paths.get(content_hash)
        if path is None or not path.exists():
            raise ServiceError("unknown_audio",
                               f"no audio with hash '{content_hash}'", 404)
        data = path.read_bytes()
        if hashlib.sha256(data).hexdigest() != content_hash:
            raise ServiceError("audio_corrupt",
                               "stored audio does not match its hash", 500)
        return data

    def close(self) -> None:
        for runtime in self.studies.values():
            runtime.log.close()
