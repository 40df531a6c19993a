import numpy as np
import pytest

from drt_harness.corpus import Recording, TestSet, WordList, WordPair
from drt_harness.session import (
    DigitsTest,
    DigitsTrial,
    ProtocolConfig,
    ScreeningCriteria,
)
from drt_harness.study import build_study

DIGIT_SNRS = [14.0, 9.0, 4.0, 2.0, 0.0, -2.0]


def make_word_list(n_pairs=96, n_classes=6, prefix="p", language="en"):
    pairs = []
    for i in range(n_pairs):
        pairs.append(WordPair(
            pair_id=f"{prefix}{i:03d}",
            feature_class=f"class{i % n_classes}",
            contrast_position="initial",
            word_present=f"{prefix}word{i}A",
            word_absent=f"{prefix}word{i}B",
        ))
    return WordList(language, f"synthetic-{prefix}", tuple(pairs))


def make_test_set(n_pairs=96, n_classes=6, n_inst=6, condition="WB",
                  prefix="p", language="en", word_list=None):
    wl = word_list or make_word_list(n_pairs, n_classes, prefix, language)
    recs = []
    for p in wl.pairs:
        for side in ("present", "absent"):
            for k in range(n_inst):
                gender = "female" if k < n_inst // 2 else "male"
                rid = f"{p.pair_id}-{side[0]}-{k}"
                recs.append(Recording(
                    recording_id=rid,
                    pair_id=p.pair_id,
                    word_side=side,
                    talker_id=f"talker-{p.pair_id}-{k}",
                    talker_gender=gender,
                    language=language,
                    condition=condition,
                    audio_path=f"audio/{rid}.wav",
                    sample_rate_hz=16000,
                ))
    return TestSet(wl, condition, tuple(recs), n_inst)


def make_digits():
    return DigitsTest(tuple(
        DigitsTrial(f"digit-{i}", snr, f"{(137 * (i + 3)) % 1000:03d}")
        for i, snr in enumerate(DIGIT_SNRS)))


def make_study(study_id="study-1", n_pairs=96, n_classes=6, block_count=12,
               condition="WB", protocol=None, language="en", seeds=None):
    test_set = make_test_set(n_pairs, n_classes, condition=condition,
                             language=language)
    catch_pool = make_test_set(20, 4, condition="WB", prefix="c",
                               language=language)
    return build_study(
        study_id=study_id,
        test_set=test_set,
        catch_pool=catch_pool,
        practice_pool=catch_pool,
        digits=make_digits(),
        screening=ScreeningCriteria(required_language=language),
        protocol=protocol or ProtocolConfig(),
        block_count=block_count,
        seeds=seeds or {"blocks": 11, "catch": 22, "practice": 33,
                        "sessions": 44},
    )


def eligible_claims(participant_id="part-1", language="en"):
    return {
        "participant_id": participant_id,
        "first_language": language,
        "residency": "US",
        "dyslexia": False,
        "hearing_problems": False,
        "headphone_use": True,
        "quiet_environment": True,
        "approval_rate": 0.99,
        "age_group": "25-34",
        "gender": None,
    }


def sine(freq_hz, duration_s=1.0, rate=16000, amplitude=0.5, phase=0.0):
    t = np.arange(int(round(duration_s * rate))) / rate
    return amplitude * np.sin(2 * np.pi * freq_hz * t + phase)


def fit_sine_snr(x, freq_hz, rate, skip=None):
    """Least-squares sine fit; returns (amplitude, residual SNR in dB)."""
    n = len(x)
    if skip is None:
        skip = min(n // 8, 2000)
    idx = np.arange(n)[skip:n - skip]
    t = idx / rate
    basis = np.stack([np.cos(2 * np.pi * freq_hz * t),
                      np.sin(2 * np.pi * freq_hz * t)], axis=1)
    coef, *_ = np.linalg.lstsq(basis, x[idx], rcond=None)
    fitted = basis @ coef
    resid = x[idx] - fitted
    amp = float(np.hypot(*coef))
    snr = 10.0 * np.log10(np.sum(fitted ** 2) / max(np.sum(resid ** 2),
                                                    1e-300))
    return amp, snr


@pytest.fixture(scope="session")
def small_study():
    """24 pairs, 6 blocks, 10 catch trials: fast end-to-end fixture."""
    return make_study(study_id="small-1", n_pairs=24, n_classes=4,
                      block_count=6,
                      protocol=ProtocolConfig(catch_trials=10,
                                              practice_items=8))


@pytest.fixture(scope="session")
def paper_scale_study():
    """96 pairs, 12 blocks, 20 catch trials: the paper-scale shape."""
    return make_study(study_id="paper-1")


class FakeClock:
    def __init__(self, start=1_700_000_000.0, step=1.0):
        self.now = start
        self.step = step

    def __call__(self):
        self.now += self.step
        return self.now

    def jump(self, seconds):
        self.now += seconds


class ScriptedClient:
    """Deterministic scripted participant against the service core.

    Knows the study definition (it is the test), so it can answer digit
    trials correctly and choose word answers by a reproducible policy:
    every `wrong_every`-th trial of a phase is answered wrong. Safe to
    re-run after a crash: already-finished sessions are skipped and
    partial ones resume from the served item.
    """

    def __init__(self, service, study, n_listeners=4, wrong_every=6,
                 language="en"):
        self.service = service
        self.study = study
        self.n = n_listeners
        self.wrong_every = wrong_every
        self.language = language
        self.sessions: dict[str, str] = {}  # participant -> session id

    def _correct_word(self, session_id, phase, index):
        runtime, srt = self.service._find_session(session_id)
        items = (srt.session.practice_items if phase == "practice"
                 else srt.session.main_items)
        return items[index].correct_word()

    def _choice(self, session_id, phase, index, choices):
        runtime, srt = self.service._find_session(session_id)
        items = (srt.session.practice_items if phase == "practice"
                 else srt.session.main_items)
        item = items[index]
        wrong = choices[0] if choices[0] != item.correct_word() else choices[1]
        if phase == "main" and not item.is_catch and \
                index % self.wrong_every == self.wrong_every - 1:
            return wrong
        return item.correct_word()

    def run_all(self):
        for k in range(1, self.n + 1):
            self.run_listener(f"part-{k:02d}")

    def run_listener(self, participant_id):
        svc = self.service
        if participant_id not in self.sessions:
            out = svc.open_session(self.study.study_id,
                                   eligible_claims(participant_id,
                                                   self.language))
            self.sessions[participant_id] = out["session_id"]
        sid = self.sessions[participant_id]
        guard = 0
        while True:
            guard += 1
            assert guard < 10000, "scripted client did not terminate"
            item = svc.next_item(sid)
            kind = item["kind"]
            if kind in ("completed", "rejected"):
                return item
            if kind == "phase" and item["phase"] == "Consent":
                svc.submit_event(sid, {"type": "consent", "accepted": True})
            elif kind == "phase" and item["phase"] == "Questionnaire":
                claims = eligible_claims(participant_id, self.language)
                svc.submit_event(sid, {
                    "type": "questionnaire",
                    "answers": {
                        "first_language": claims["first_language"],
                        "residency": claims["residency"],
                        "dyslexia": claims["dyslexia"],
                        "hearing_problems": claims["hearing_problems"],
                        "headphone_use": claims["headphone_use"],
                        "quiet_environment": claims["quiet_environment"],
                    },
                })
            elif kind == "digits_item":
                answer = self.study.digits.trials[item["index"]].answer
                svc.submit_response(sid, {"phase": "digits",
                                          "index": item["index"],
                                          "triplet": answer})
            elif kind == "trial":
                choice = self._choice(sid, item["phase"], item["index"],
                                      item["choices"])
                svc.submit_response(sid, {"phase": item["phase"],
                                          "index": item["index"],
                                          "choice_word": choice})
            else:
                raise AssertionError(f"unexpected descriptor {item}")
