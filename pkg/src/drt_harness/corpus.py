"""Word lists and audio manifests: the domain vocabulary of the test.

A word list pairs contrasting words tagged with a distinctive-feature
class; a test set is the curated audio material for one treatment
condition, six instances per word by default (three female, three male).
Values are immutable after load and safe to share across threads.
"""

from __future__ import annotations

import csv
import json
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ParseError

CONTRAST_POSITIONS = frozenset({"initial", "final", "tonal"})
WORD_SIDES = frozenset({"present", "absent"})
GENDERS = frozenset({"female", "male"})

WORD_LIST_COLUMNS = [
    "pair_id",
    "feature_class",
    "contrast_position",
    "word_present",
    "word_absent",
]

MANIFEST_FIELDS = [
    "recording_id",
    "pair_id",
    "word_side",
    "talker_id",
    "talker_gender",
    "language",
    "condition",
    "audio_path",
    "sample_rate_hz",
]


@dataclass(frozen=True)
class WordPair:
    pair_id: str
    feature_class: str
    contrast_position: str
    word_present: str
    word_absent: str

    def words(self) -> tuple[str, str]:
        return (self.word_present, self.word_absent)

    def word_for_side(self, side: str) -> str:
        return self.word_present if side == "present" else self.word_absent


@dataclass(frozen=True)
class WordList:
    language: str
    name: str
    pairs: tuple[WordPair, ...]

    def __post_init__(self):
        seen = set()
        for p in self.pairs:
            if p.pair_id in seen:
                raise ParseError(f"duplicate pair_id '{p.pair_id}'")
            seen.add(p.pair_id)

    def by_id(self) -> dict[str, WordPair]:
        cached = getattr(self, "_by_id", None)
        if cached is None:
            cached = {p.pair_id: p for p in self.pairs}
            object.__setattr__(self, "_by_id", cached)
        return cached

    def feature_classes(self) -> list[str]:
        out = []
        for p in self.pairs:
            if p.feature_class not in out:
                out.append(p.feature_class)
        return out


@dataclass(frozen=True)
class Recording:
    recording_id: str
    pair_id: str
    word_side: str
    talker_id: str
    talker_gender: str
    language: str
    condition: str
    audio_path: str
    sample_rate_hz: int

    def key(self) -> tuple[str, str, str, str]:
        return (self.pair_id, self.word_side, self.talker_id, self.condition)


@dataclass(frozen=True)
class TestSet:
    word_list: WordList
    condition: str
    recordings: tuple[Recording, ...]
    instances_per_word: int = 6

    def by_id(self) -> dict[str, Recording]:
        return {r.recording_id: r for r in self.recordings}

    def for_pair_side(self, pair_id: str, side: str) -> list[Recording]:
        return [r for r in self.recordings
                if r.pair_id == pair_id and r.word_side == side]


@dataclass(frozen=True)
class Violation:
    """One invariant violation found in a test set; data, not an error."""

    code: str
    pair_id: str
    word_side: str
    message: str


def _nfc(s: str) -> str:
    # Orthography is opaque Unicode; NFC is the only normalization applied.
    return unicodedata.normalize("NFC", s)


def load_word_list(path: str | Path, *, language: str = "und",
                   name: str | None = None) -> WordList:
    """Load and validate a word-list CSV.

    Expected header: pair_id,feature_class,contrast_position,word_present,word_absent
    """
    path = Path(path)
    if not path.exists():
        raise ParseError("word list file not found", path=path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty word list file", path=path) from None
        header = [h.strip() for h in header]
        if header != WORD_LIST_COLUMNS:
            raise ParseError(
                f"bad header {header!r}, expected {WORD_LIST_COLUMNS!r}",
                path=path, line=1)
        pairs: list[WordPair] = []
        seen: set[str] = set()
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(WORD_LIST_COLUMNS):
                raise ParseError(f"expected {len(WORD_LIST_COLUMNS)} columns, "
                                 f"got {len(row)}", path=path, line=lineno)
            pair_id, feat, pos, w_pres, w_abs = (c.strip() for c in row)
            if not pair_id:
                raise ParseError("empty pair_id", path=path, line=lineno,
                                 field="pair_id")
            if pair_id in seen:
                raise ParseError(f"duplicate pair_id '{pair_id}'", path=path,
                                 line=lineno, field="pair_id")
            if not feat:
                raise ParseError("empty feature_class", path=path,
                                 line=lineno, field="feature_class")
            if pos not in CONTRAST_POSITIONS:
                raise ParseError(
                    f"unknown contrast_position '{pos}' "
                    f"(expected one of {sorted(CONTRAST_POSITIONS)})",
                    path=path, line=lineno, field="contrast_position")
            if not w_pres or not w_abs:
                raise ParseError("empty word", path=path, line=lineno,
                                 field="word_present/word_absent")
            w_pres, w_abs = _nfc(w_pres), _nfc(w_abs)
            if w_pres == w_abs:
                raise ParseError(f"pair '{pair_id}' has identical words",
                                 path=path, line=lineno)
            seen.add(pair_id)
            pairs.append(WordPair(pair_id, feat, pos, w_pres, w_abs))
    if not pairs:
        raise ParseError("word list contains no pairs", path=path)
    return WordList(language=language, name=name or path.stem,
                    pairs=tuple(pairs))


def load_manifest(path: str | Path, word_list: WordList, *,
                  instances_per_word: int = 6) -> TestSet:
    """Load a JSON Lines manifest (one Recording per line) into a TestSet.

    Cross-checks every pair_id against the word list; raises ParseError on
    malformed rows and referential errors. Invariant violations beyond
    referential integrity are reported by validate_test_set, not here.
    """
    path = Path(path)
    if not path.exists():
        raise ParseError("manifest file not found", path=path)
    known_pairs = word_list.by_id()
    recordings: list[Recording] = []
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", path=path,
                                 line=lineno) from None
            missing = [f for f in MANIFEST_FIELDS if f not in row]
            if missing:
                raise ParseError(f"missing fields {missing}", path=path,
                                 line=lineno, field=missing[0])
            rid = str(row["recording_id"])
            if rid in seen_ids:
                raise ParseError(f"duplicate recording_id '{rid}'",
                                 path=path, line=lineno, field="recording_id")
            seen_ids.add(rid)
            if row["pair_id"] not in known_pairs:
                raise ParseError(f"unknown pair_id '{row['pair_id']}'",
                                 path=path, line=lineno, field="pair_id")
            if row["word_side"] not in WORD_SIDES:
                raise ParseError(f"unknown word_side '{row['word_side']}'",
                                 path=path, line=lineno, field="word_side")
            if row["talker_gender"] not in GENDERS:
                raise ParseError(
                    f"unknown talker_gender '{row['talker_gender']}'",
                    path=path, line=lineno, field="talker_gender")
            rate = row["sample_rate_hz"]
            if not isinstance(rate, int) or rate <= 0:
                raise ParseError(f"bad sample_rate_hz {rate!r}", path=path,
                                 line=lineno, field="sample_rate_hz")
            recordings.append(Recording(
                recording_id=rid,
                pair_id=str(row["pair_id"]),
                word_side=row["word_side"],
                talker_id=str(row["talker_id"]),
                talker_gender=row["talker_gender"],
                language=str(row["language"]),
                condition=str(row["condition"]),
                audio_path=str(row["audio_path"]),
                sample_rate_hz=rate,
            ))
    if not recordings:
        raise ParseError("manifest contains no recordings", path=path)
    conditions = sorted({r.condition for r in recordings})
    if len(conditions) > 1:
        raise ParseError(f"manifest mixes conditions {conditions}", path=path)
    return TestSet(word_list=word_list, condition=conditions[0],
                   recordings=tuple(recordings),
                   instances_per_word=instances_per_word)


def validate_test_set(test_set: TestSet) -> list[Violation]:
    """Check every TestSet invariant; returns violations in deterministic order.

    An empty report means the set is valid. Checks per (pair_id, word_side):
    instance count, exact gender half-split, duplicate (pair, side, talker,
    condition) keys; plus a single uniform sample rate across the set.
    """
    out: list[Violation] = []
    n = test_set.instances_per_word
    half = n // 2

    by_pair_side: dict[tuple[str, str], list[Recording]] = {}
    for r in test_set.recordings:
        by_pair_side.setdefault((r.pair_id, r.word_side), []).append(r)

    seen_keys: dict[tuple, str] = {}
    for r in sorted(test_set.recordings, key=lambda r: r.recording_id):
        k = r.key()
        if k in seen_keys:
            out.append(Violation(
                "duplicate_key", r.pair_id, r.word_side,
                f"(pair, side, talker, condition) {k} appears more than once"))
        else:
            seen_keys[k] = r.recording_id

    expected = [(p.pair_id, side) for p in test_set.word_list.pairs
                for side in ("present", "absent")]
    for pair_id, side in expected:
        recs = by_pair_side.get((pair_id, side), [])
        if len(recs) != n:
            out.append(Violation(
                "instance_count", pair_id, side,
                f"expected {n} recordings, found {len(recs)}"))
        females = sum(1 for r in recs if r.talker_gender == "female")
        males = len(recs) - females
        if len(recs) == n and (females != half or males != n - half):
            out.append(Violation(
                "gender_balance", pair_id, side,
                f"expected {half}F/{n - half}M, found {females}F/{males}M"))

    extra = sorted(set(by_pair_side) - set(expected))
    for pair_id, side in extra:
        out.append(Violation("unknown_pair_side", pair_id, side,
                             "recordings for a pair/side not in the word list"))

    rates = sorted({r.sample_rate_hz for r in test_set.recordings})
    if len(rates) > 1:
        out.append(Violation("mixed_sample_rate", "*", "*",
                             f"multiple sample rates {rates}"))
    out.sort(key=lambda v: (v.code, v.pair_id, v.word_side))
    return out


def write_manifest(path: str | Path, test_set: TestSet) -> None:
    """Serialize a TestSet back to JSON Lines, one recording per line."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for r in test_set.recordings:
            fh.write(json.dumps({f: getattr(r, f) for f in MANIFEST_FIELDS},
                                ensure_ascii=False, sort_keys=True) + "\n")
