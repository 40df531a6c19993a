"""Study bundle: everything one study needs, serializable for export/replay.

A study binds exactly one treatment condition to a word list, balanced
block plans with catch trials, a practice set, a digits-in-noise screen,
screening criteria and protocol thresholds. The JSON form is embedded in
the service's study directory and in export archives so every report can
be recomputed bit-identically from an archive alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .blocks import BlockItem, BlockPlan, PracticeSet
from .corpus import WordList, WordPair
from .session import (
    DigitsTest,
    DigitsTrial,
    ProtocolConfig,
    ScreeningCriteria,
)


@dataclass(frozen=True)
class StudyDefinition:
    study_id: str
    condition: str
    language: str
    word_list: WordList
    catch_word_list: WordList | None
    plans: tuple[BlockPlan, ...]
    practice: PracticeSet
    digits: DigitsTest
    screening: ScreeningCriteria
    protocol: ProtocolConfig
    seeds: dict = field(default_factory=dict)
    audio: dict = field(default_factory=dict)  # recording_id -> {path, hash}
    quota: int | None = None
    status: str = "open"

    def plan_by_id(self, block_id: str) -> BlockPlan:
        for p in self.plans:
            if p.block_id == block_id:
                return p
        raise KeyError(block_id)

    def feature_class_of(self, pair_id: str) -> str:
        lookup = getattr(self, "_feature_lookup", None)
        if lookup is None:
            lookup = {p.pair_id: p.feature_class for p in self.word_list.pairs}
            if self.catch_word_list is not None:
                for p in self.catch_word_list.pairs:
                    lookup.setdefault(p.pair_id, p.feature_class)
            object.__setattr__(self, "_feature_lookup", lookup)
        if pair_id not in lookup:
            raise KeyError(f"unknown pair '{pair_id}'")
        return lookup[pair_id]


def _word_list_doc(wl: WordList) -> dict:
    return {
        "language": wl.language,
        "name": wl.name,
        "pairs": [
            {
                "pair_id": p.pair_id,
                "feature_class": p.feature_class,
                "contrast_position": p.contrast_position,
                "word_present": p.word_present,
                "word_absent": p.word_absent,
            }
            for p in wl.pairs
        ],
    }


def _word_list_from(doc: dict) -> WordList:
    return WordList(doc["language"], doc["name"],
                    tuple(WordPair(**p) for p in doc["pairs"]))


def _item_doc(it: BlockItem) -> dict:
    return {
        "recording_id": it.recording_id,
        "pair_id": it.pair_id,
        "word_present": it.word_present,
        "word_absent": it.word_absent,
        "correct_side": it.correct_side,
        "talker_gender": it.talker_gender,
        "is_catch": it.is_catch,
    }


def study_to_doc(study: StudyDefinition) -> dict:
    return {
        "format": "drt-study",
        "version": 1,
        "study_id": study.study_id,
        "condition": study.condition,
        "language": study.language,
        "status": study.status,
        "quota": study.quota,
        "seeds": dict(sorted(study.seeds.items())),
        "word_list": _word_list_doc(study.word_list),
        "catch_word_list": (_word_list_doc(study.catch_word_list)
                            if study.catch_word_list else None),
        "blocks": [
            {
                "block_id": p.block_id,
                "condition": p.condition,
                "language": p.language,
                "items": [_item_doc(it) for it in p.items],
            }
            for p in study.plans
        ],
        "practice": [_item_doc(it) for it in study.practice.items],
        "digits": {
            "trials": [
                {"recording_ref": t.recording_ref, "snr_db": t.snr_db,
                 "answer": t.answer}
                for t in study.digits.trials
            ],
        },
        "screening": {
            "required_language": study.screening.required_language,
            "residency_countries": sorted(study.screening.residency_countries),
            "exclude_dyslexia": study.screening.exclude_dyslexia,
            "exclude_hearing_problems": study.screening.exclude_hearing_problems,
            "min_approval_rate": study.screening.min_approval_rate,
            "require_headphones": study.screening.require_headphones,
        },
        "protocol": {
            "catch_trials": study.protocol.catch_trials,
            "catch_min_fraction": study.protocol.catch_min_fraction,
            "practice_items": study.protocol.practice_items,
            "practice_min_correct": study.protocol.practice_min_correct,
            "digits_pass_threshold": study.protocol.digits_pass_threshold,
            "session_timeout_minutes": study.protocol.session_timeout_minutes,
            "single_playback": study.protocol.single_playback,
            "allow_repeat_participation": study.protocol.allow_repeat_participation,
        },
        "audio": {k: dict(v) for k, v in sorted(study.audio.items())},
    }


def study_from_doc(doc: dict) -> StudyDefinition:
    if doc.get("format") != "drt-study":
        raise ValueError("not a drt-study document")
    plans = tuple(
        BlockPlan(b["block_id"], b["condition"], b["language"],
                  tuple(BlockItem(**it) for it in b["items"]))
        for b in doc["blocks"])
    practice = PracticeSet(tuple(BlockItem(**it) for it in doc["practice"]))
    digits = DigitsTest(tuple(DigitsTrial(**t) for t in doc["digits"]["trials"]))
    scr = doc["screening"]
    screening = ScreeningCriteria(
        required_language=scr["required_language"],
        residency_countries=frozenset(scr["residency_countries"]),
        exclude_dyslexia=scr["exclude_dyslexia"],
        exclude_hearing_problems=scr["exclude_hearing_problems"],
        min_approval_rate=scr["min_approval_rate"],
        require_headphones=scr["require_headphones"],
    )
    protocol = ProtocolConfig(**doc["protocol"])
    return StudyDefinition(
        study_id=doc["study_id"],
        condition=doc["condition"],
        language=doc["language"],
        word_list=_word_list_from(doc["word_list"]),
        catch_word_list=(_word_list_from(doc["catch_word_list"])
                         if doc.get("catch_word_list") else None),
        plans=plans,
        practice=practice,
        digits=digits,
        screening=screening,
        protocol=protocol,
        seeds=dict(doc.get("seeds", {})),
        audio=dict(doc.get("audio", {})),
        quota=doc.get("quota"),
        status=doc.get("status", "open"),
    )


def study_to_json(study: StudyDefinition) -> str:
    return json.dumps(study_to_doc(study), ensure_ascii=False, indent=2,
                      sort_keys=True) + "\n"


def study_from_json(text: str) -> StudyDefinition:
    return study_from_doc(json.loads(text))


def build_study(*, study_id: str, test_set, catch_pool, practice_pool,
                digits: DigitsTest, screening: ScreeningCriteria,
                protocol: ProtocolConfig, block_count: int, seeds: dict,
                audio: dict | None = None,
                quota: int | None = None) -> StudyDefinition:
    """Assemble and validate a complete study from curated material.

    Builds balanced blocks from the test set, injects catch trials from
    the catch pool (whose pairs must not overlap the blocks), and selects
    the practice set from the practice pool. `seeds` must name 'blocks',
    'catch' and 'practice' explicitly; per-block catch seeds derive from
    'catch' by block index.
    """
    from .blocks import build_blocks, inject_catch_trials, select_practice
    from .corpus import validate_test_set
    from .errors import HarnessError

    for key in ("blocks", "catch", "practice"):
        if key not in seeds:
            raise HarnessError(f"missing explicit seed '{key}'")
    violations = validate_test_set(test_set)
    if violations:
        first = violations[0]
        raise HarnessError(
            f"test set invalid ({len(violations)} violations; first: "
            f"{first.code} {first.pair_id}/{first.word_side}: {first.message})")

    plans = build_blocks(test_set, block_count, seeds["blocks"])
    if protocol.catch_trials:
        plans = [
            inject_catch_trials(plan, catch_pool, protocol.catch_trials,
                                seed=seeds["catch"] + i)
            for i, plan in enumerate(plans)
        ]
    practice = select_practice(practice_pool, protocol.practice_items,
                               seed=seeds["practice"])
    return StudyDefinition(
        study_id=study_id,
        condition=test_set.condition,
        language=test_set.word_list.language,
        word_list=test_set.word_list,
        catch_word_list=catch_pool.word_list if protocol.catch_trials else None,
        plans=tuple(plans),
        practice=practice,
        digits=digits,
        screening=screening,
        protocol=protocol,
        seeds=dict(seeds),
        audio=dict(audio or {}),
        quota=quota,
    )
