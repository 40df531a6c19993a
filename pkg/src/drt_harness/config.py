"""Study configuration: one JSON schema shared by the CLI and the service.

Every randomized step takes its seed from the explicit `seeds` map; there
is no ambient randomness anywhere in the pipeline.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import HarnessError, ParseError
from .session import DigitsTest, DigitsTrial, ProtocolConfig, ScreeningCriteria

CONFIG_VERSION = 1
REQUIRED_SEEDS = ("blocks", "catch", "practice", "sessions", "simulation")


@dataclass(frozen=True)
class CurationParams:
    target_rate_hz: int = 16000
    lead_ms: float = 500.0
    trail_ms: float = 500.0
    fade_ms: float = 10.0
    target_rms_db: float = -26.0
    min_duration_ms: float = 200.0
    max_duration_ms: float = 10000.0
    clip_level: float = 0.999
    max_clip_fraction: float = 0.001


@dataclass(frozen=True)
class ConditionSpec:
    type: str  # wb | pcmu_nb | external
    label: str
    command: tuple[str, ...] = ()

    def __post_init__(self):
        if self.type not in ("wb", "pcmu_nb", "external"):
            raise HarnessError(f"unknown condition type '{self.type}'")
        if self.type == "external" and not self.command:
            raise HarnessError("external condition needs a command")


@dataclass(frozen=True)
class SimulationParams:
    listeners_per_block: int = 20
    model: dict = field(default_factory=dict)
    model_b: dict | None = None
    condition_b: str | None = None
    runs: int = 1


@dataclass(frozen=True)
class StudyConfig:
    version: int
    study_id: str
    language: str
    word_list: Path
    manifest: Path | None
    catch_word_list: Path | None
    catch_manifest: Path | None
    practice_manifest: Path | None
    raw_manifest: Path | None
    condition: ConditionSpec
    block_count: int
    instances_per_word: int
    curation: CurationParams
    protocol: ProtocolConfig
    screening: ScreeningCriteria
    digits: DigitsTest
    seeds: dict
    quota: int | None
    simulation: SimulationParams
    exclusions: frozenset = frozenset()


def data_root(config_path: str | Path) -> Path:
    env = os.environ.get("DRT_HARNESS_DATA")
    if env:
        return Path(env)
    return Path(config_path).resolve().parent


def _resolve(root: Path, value: str | None) -> Path | None:
    if value is None:
        return None
    path = Path(value)
    return path if path.is_absolute() else root / path


def load_config(path: str | Path, *, seed_override: int | None = None) -> StudyConfig:
    path = Path(path)
    if not path.exists():
        raise ParseError("config file not found", path=path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path=path,
                         line=exc.lineno) from None
    if doc.get("version") != CONFIG_VERSION:
        raise ParseError(f"unsupported config version {doc.get('version')!r} "
                         f"(expected {CONFIG_VERSION})", path=path,
                         field="version")
    for key in ("study_id", "language", "word_list", "condition", "seeds"):
        if key not in doc:
            raise ParseError(f"missing required key '{key}'", path=path,
                             field=key)

    seeds = dict(doc["seeds"])
    missing = [k for k in REQUIRED_SEEDS if k not in seeds]
    if missing:
        raise ParseError(f"seeds must be explicit; missing {missing}",
                         path=path, field="seeds")
    if seed_override is not None:
        seeds = {k: int(seed_override) + i for i, k in
                 enumerate(sorted(seeds))}

    root = data_root(path)
    cond = doc["condition"]
    condition = ConditionSpec(type=cond.get("type", "wb"),
                              label=cond.get("label", cond.get("type", "wb").upper()),
                              command=tuple(cond.get("command", ())))

    scr = doc.get("screening", {})
    screening = ScreeningCriteria(
        required_language=scr.get("required_language", doc["language"]),
        residency_countries=frozenset(scr.get("residency_countries", ())),
        exclude_dyslexia=scr.get("exclude_dyslexia", True),
        exclude_hearing_problems=scr.get("exclude_hearing_problems", True),
        min_approval_rate=scr.get("min_approval_rate", 0.98),
        require_headphones=scr.get("require_headphones", True),
    )
    protocol = ProtocolConfig(**doc.get("protocol", {}))
    digits = DigitsTest(tuple(
        DigitsTrial(t["recording_ref"], float(t.get("snr_db", 0.0)),
                    str(t["answer"]))
        for t in doc.get("digits", {}).get("trials", ())))
    sim = doc.get("simulation", {})
    simulation = SimulationParams(
        listeners_per_block=sim.get("listeners_per_block", 20),
        model=dict(sim.get("model", {})),
        model_b=dict(sim["model_b"]) if "model_b" in sim else None,
        condition_b=sim.get("condition_b"),
        runs=sim.get("runs", 1),
    )
    return StudyConfig(
        version=doc["version"],
        study_id=str(doc["study_id"]),
        language=str(doc["language"]),
        word_list=_resolve(root, doc["word_list"]),
        manifest=_resolve(root, doc.get("manifest")),
        catch_word_list=_resolve(root, doc.get("catch_word_list")),
        catch_manifest=_resolve(root, doc.get("catch_manifest")),
        practice_manifest=_resolve(root, doc.get("practice_manifest")
                                   or doc.get("catch_manifest")),
        raw_manifest=_resolve(root, doc.get("raw_manifest")),
        condition=condition,
        block_count=int(doc.get("block_count", 12)),
        instances_per_word=int(doc.get("instances_per_word", 6)),
        curation=CurationParams(**doc.get("curation", {})),
        protocol=protocol,
        screening=screening,
        digits=digits,
        seeds=seeds,
        quota=doc.get("quota"),
        simulation=simulation,
        exclusions=frozenset(doc.get("exclusions", ())),
    )
