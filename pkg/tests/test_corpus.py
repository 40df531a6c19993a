import json

import pytest

from conftest import make_test_set, make_word_list
from drt_harness.corpus import (
    ParseError,
    Recording,
    TestSet,
    load_manifest,
    load_word_list,
    validate_test_set,
    write_manifest,
)

HEADER = "pair_id,feature_class,contrast_position,word_present,word_absent"


def write_word_list(path, rows):
    path.write_text("\n".join([HEADER] + rows) + "\n", encoding="utf-8")


def manifest_line(rid, pair_id, side, talker, gender, condition="WB",
                  rate=16000):
    return json.dumps({
        "recording_id": rid, "pair_id": pair_id, "word_side": side,
        "talker_id": talker, "talker_gender": gender, "language": "en",
        "condition": condition, "audio_path": f"audio/{rid}.wav",
        "sample_rate_hz": rate,
    })


def test_load_word_list_96_pairs(tmp_path):
    rows = [f"p{i:03d},voicing,initial,veal{i},feel{i}" for i in range(96)]
    path = tmp_path / "words.csv"
    write_word_list(path, rows)
    wl = load_word_list(path, language="en")
    assert len(wl.pairs) == 96
    assert wl.language == "en"
    assert wl.pairs[0].word_present == "veal0"


def test_duplicate_pair_id_rejected(tmp_path):
    path = tmp_path / "words.csv"
    write_word_list(path, ["a,voicing,initial,vee,bee",
                           "a,voicing,initial,zed,said"])
    with pytest.raises(ParseError) as err:
        load_word_list(path)
    assert "duplicate" in str(err.value)
    assert "line 3" in str(err.value)


def test_empty_file_is_parse_error(tmp_path):
    path = tmp_path / "words.csv"
    path.write_text("", encoding="utf-8")
    with pytest.raises(ParseError):
        load_word_list(path)


@pytest.mark.parametrize("row,field", [
    ("a,voicing,sideways,vee,bee", "contrast_position"),
    ("a,,initial,vee,bee", "feature_class"),
    ("a,voicing,initial,,bee", "word"),
    (",voicing,initial,vee,bee", "pair_id"),
])
def test_bad_rows_report_location(tmp_path, row, field):
    path = tmp_path / "words.csv"
    write_word_list(path, [row])
    with pytest.raises(ParseError) as err:
        load_word_list(path)
    assert "line 2" in str(err.value)


def test_identical_words_rejected(tmp_path):
    path = tmp_path / "words.csv"
    write_word_list(path, ["a,voicing,initial,same,same"])
    with pytest.raises(ParseError):
        load_word_list(path)


def test_load_is_pure_function_of_bytes(tmp_path):
    rows = [f"p{i},tonal,tonal,ma{i}_hi,ma{i}_lo" for i in range(4)]
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_word_list(p1, rows)
    write_word_list(p2, rows)
    wl1 = load_word_list(p1, language="zh", name="x")
    wl2 = load_word_list(p2, language="zh", name="x")
    assert wl1 == wl2


def test_unicode_round_trip(tmp_path):
    path = tmp_path / "words.csv"
    write_word_list(path, ["z1,tonal,tonal,妈,马", "g1,voicing,initial,Bär,Paar"])
    wl = load_word_list(path, language="zh")
    assert wl.pairs[0].word_present == "妈"
    assert wl.pairs[1].word_present == "Bär"


def test_load_manifest_happy_path(tmp_path):
    wl_path = tmp_path / "words.csv"
    write_word_list(wl_path, ["a,voicing,initial,vee,bee"])
    wl = load_word_list(wl_path, language="es")
    lines = [manifest_line(f"a-p-{k}", "a", "present", f"t{k}",
                           "female" if k < 3 else "male") for k in range(6)]
    lines += [manifest_line(f"a-a-{k}", "a", "absent", f"t{k}",
                            "female" if k < 3 else "male") for k in range(6)]
    mpath = tmp_path / "manifest.jsonl"
    mpath.write_text("\n".join(lines) + "\n", encoding="utf-8")
    ts = load_manifest(mpath, wl)
    assert ts.condition == "WB"
    assert len(ts.recordings) == 12
    assert validate_test_set(ts) == []


def test_manifest_unknown_pair_is_referential_error(tmp_path):
    wl_path = tmp_path / "words.csv"
    write_word_list(wl_path, ["a,voicing,initial,vee,bee"])
    wl = load_word_list(wl_path)
    mpath = tmp_path / "manifest.jsonl"
    mpath.write_text(manifest_line("x-1", "nope", "present", "t1", "female")
                     + "\n", encoding="utf-8")
    with pytest.raises(ParseError) as err:
        load_manifest(mpath, wl)
    assert "unknown pair_id" in str(err.value)


def test_manifest_mixed_conditions_rejected(tmp_path):
    wl_path = tmp_path / "words.csv"
    write_word_list(wl_path, ["a,voicing,initial,vee,bee"])
    wl = load_word_list(wl_path)
    mpath = tmp_path / "manifest.jsonl"
    mpath.write_text(
        manifest_line("r1", "a", "present", "t1", "female", condition="WB")
        + "\n"
        + manifest_line("r2", "a", "present", "t2", "female",
                        condition="NB") + "\n",
        encoding="utf-8")
    with pytest.raises(ParseError):
        load_manifest(mpath, wl)


def test_validate_full_synthetic_set_clean():
    assert validate_test_set(make_test_set(n_pairs=8, n_classes=2)) == []


def _replace_recording(ts, index, **changes):
    recs = list(ts.recordings)
    from dataclasses import replace

    recs[index] = replace(recs[index], **changes)
    return TestSet(ts.word_list, ts.condition, tuple(recs),
                   ts.instances_per_word)


def test_validate_gender_imbalance():
    ts = make_test_set(n_pairs=2, n_classes=1)
    # First recording of p000/present: make a 4F/2M split.
    bad = _replace_recording(ts, 3, talker_gender="female")
    report = validate_test_set(bad)
    assert [v.code for v in report] == ["gender_balance"]
    assert report[0].pair_id == "p000"
    assert report[0].word_side == "present"


def test_validate_instance_count():
    ts = make_test_set(n_pairs=2, n_classes=1)
    short = TestSet(ts.word_list, ts.condition, ts.recordings[:-1],
                    ts.instances_per_word)
    report = validate_test_set(short)
    assert [v.code for v in report] == ["instance_count"]
    assert report[0].pair_id == "p001"
    assert report[0].word_side == "absent"


def test_validate_mixed_sample_rate():
    ts = make_test_set(n_pairs=1, n_classes=1)
    bad = _replace_recording(ts, 0, sample_rate_hz=48000)
    codes = [v.code for v in validate_test_set(bad)]
    assert "mixed_sample_rate" in codes


def test_validate_duplicate_key():
    ts = make_test_set(n_pairs=1, n_classes=1)
    dup = _replace_recording(ts, 1, talker_id=ts.recordings[0].talker_id)
    codes = [v.code for v in validate_test_set(dup)]
    assert "duplicate_key" in codes


def test_validate_report_empty_iff_invariants_hold_bruteforce():
    # Over a small space of mutations, the report is empty exactly when the
    # enumerated TYPE invariants hold.
    base = make_test_set(n_pairs=2, n_classes=1)
    for idx in range(len(base.recordings)):
        for change in ({"talker_gender": "male"},
                       {"sample_rate_hz": 8000},
                       {"word_side": "absent"}):
            mutated = _replace_recording(base, idx, **change)
            report = validate_test_set(mutated)
            ok = _invariants_hold(mutated)
            assert (report == []) == ok


def _invariants_hold(ts):
    n = ts.instances_per_word
    seen = set()
    for r in ts.recordings:
        if r.key() in seen:
            return False
        seen.add(r.key())
    if len({r.sample_rate_hz for r in ts.recordings}) > 1:
        return False
    for p in ts.word_list.pairs:
        for side in ("present", "absent"):
            recs = [r for r in ts.recordings
                    if r.pair_id == p.pair_id and r.word_side == side]
            if len(recs) != n:
                return False
            if sum(1 for r in recs if r.talker_gender == "female") != n // 2:
                return False
    return True


def test_write_manifest_round_trip(tmp_path):
    ts = make_test_set(n_pairs=3, n_classes=1)
    path = tmp_path / "manifest.jsonl"
    write_manifest(path, ts)
    again = load_manifest(path, ts.word_list)
    assert again.recordings == ts.recordings
