"""Researcher command line: curate, condition, blocks, simulate, serve, analyze.

Every command is reproducible: identical config and inputs give identical
output bytes. Exit codes: 0 success, 1 validation failure, 2 I/O failure.
"""

from __future__ import annotations

import hashlib
import json
import sys
import zipfile
from pathlib import Path

import click

from . import audiopipe
from .blocks import plans_to_json
from .config import StudyConfig, load_config
from .corpus import (
    Recording,
    TestSet,
    load_manifest,
    load_word_list,
    validate_test_set,
    write_manifest,
)
from .errors import HarnessError
from .scoring import (
    analyze_events,
    file_scores_csv,
    pearson,
    report_to_json,
    report_to_text,
    t_test,
)
from .simulator import ListenerModel, simulate_condition_pair, simulate_panel
from .study import StudyDefinition, build_study, study_from_json, study_to_json

EXIT_VALIDATION = 1
EXIT_IO = 2


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guard(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except HarnessError as exc:
        _fail(EXIT_VALIDATION, str(exc))
    except (OSError, zipfile.BadZipFile) as exc:
        _fail(EXIT_IO, str(exc))


@click.group()
def main():
    """Crowdsourced DRT study harness."""


def _load_sets(config: StudyConfig):
    word_list = load_word_list(config.word_list, language=config.language)
    test_set = load_manifest(config.manifest, word_list,
                             instances_per_word=config.instances_per_word)
    catch_pool = None
    if config.catch_word_list and config.catch_manifest:
        catch_wl = load_word_list(config.catch_word_list,
                                  language=config.language)
        catch_pool = load_manifest(config.catch_manifest, catch_wl,
                                   instances_per_word=config.instances_per_word)
    practice_pool = catch_pool
    if config.practice_manifest and config.catch_manifest and \
            config.practice_manifest != config.catch_manifest:
        practice_pool = load_manifest(config.practice_manifest,
                                      catch_pool.word_list
                                      if catch_pool else word_list,
                                      instances_per_word=config.instances_per_word)
    return word_list, test_set, catch_pool, practice_pool


def _study_from_config(config: StudyConfig, *, audio: dict | None = None,
                       condition_label: str | None = None,
                       study_id: str | None = None) -> StudyDefinition:
    _, test_set, catch_pool, practice_pool = _load_sets(config)
    if condition_label is not None:
        import dataclasses

        recs = tuple(dataclasses.replace(r, condition=condition_label)
                     for r in test_set.recordings)
        test_set = TestSet(test_set.word_list, condition_label, recs,
                           test_set.instances_per_word)
    if catch_pool is None and config.protocol.catch_trials:
        raise HarnessError("config needs catch_word_list/catch_manifest for "
                           "catch trials")
    return build_study(
        study_id=study_id or config.study_id,
        test_set=test_set,
        catch_pool=catch_pool,
        practice_pool=practice_pool or catch_pool,
        digits=config.digits,
        screening=config.screening,
        protocol=config.protocol,
        block_count=config.block_count,
        seeds=config.seeds,
        audio=audio,
        quota=config.quota,
    )


def _model_from(doc: dict) -> ListenerModel:
    overrides = {}
    for cond, classes in doc.get("overrides", {}).items():
        for cls, q in classes.items():
            overrides[(cond, cls)] = float(q)
    return ListenerModel(
        q=float(doc.get("q", 0.9)),
        overrides=overrides,
        recording_offsets=dict(doc.get("recording_offsets", {})),
        catch_q=float(doc.get("catch_q", 0.97)),
        digits_q=float(doc.get("digits_q", 0.97)),
    )


# -- curate -------------------------------------------------------------------

@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
def curate(config_path, out_dir):
    """Curate raw recordings: checks, resample, trim, fade, normalize."""
    config = _guard(load_config, config_path)
    _guard(_curate, config, Path(out_dir))


def _curate(config: StudyConfig, out_dir: Path):
    if config.raw_manifest is None:
        raise HarnessError("config has no raw_manifest to curate")
    word_list = load_word_list(config.word_list, language=config.language)
    raw = load_manifest(config.raw_manifest, word_list,
                        instances_per_word=config.instances_per_word)
    params = config.curation
    audio_dir = out_dir / "audio"
    audio_dir.mkdir(parents=True, exist_ok=True)
    kept: list[Recording] = []
    dropped: list[dict] = []
    for rec in sorted(raw.recordings, key=lambda r: r.recording_id):
        if rec.recording_id in config.exclusions:
            dropped.append({"recording_id": rec.recording_id,
                            "reason": "excluded"})
            continue
        src = Path(rec.audio_path)
        if not src.is_absolute():
            src = config.raw_manifest.parent / src
        buf = audiopipe.read_wav(src)
        problem = _quality_check(buf, params)
        if problem:
            dropped.append({"recording_id": rec.recording_id,
                            "reason": problem})
            continue
        buf = audiopipe.resample(buf, params.target_rate_hz)
        try:
            buf = audiopipe.trim_to_margins(buf, params.lead_ms,
                                            params.trail_ms)
        except HarnessError:
            dropped.append({"recording_id": rec.recording_id,
                            "reason": "no_activity"})
            continue
        buf = audiopipe.fade(buf, params.fade_ms)
        buf = audiopipe.normalize_rms(
            buf, audiopipe.LevelDb(params.target_rms_db))
        rel = f"audio/{rec.recording_id}.wav"
        audiopipe.write_wav(out_dir / rel, buf)
        kept.append(Recording(
            recording_id=rec.recording_id, pair_id=rec.pair_id,
            word_side=rec.word_side, talker_id=rec.talker_id,
            talker_gender=rec.talker_gender, language=rec.language,
            condition=rec.condition, audio_path=rel,
            sample_rate_hz=params.target_rate_hz))
    curated = TestSet(word_list, raw.condition, tuple(kept),
                      config.instances_per_word)
    write_manifest(out_dir / "manifest.jsonl", curated)
    violations = validate_test_set(curated)
    report = {
        "kept": len(kept),
        "dropped": dropped,
        "violations": [
            {"code": v.code, "pair_id": v.pair_id, "word_side": v.word_side,
             "message": v.message}
            for v in violations
        ],
    }
    (out_dir / "curation_report.json").write_text(
        json.dumps(report, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    click.echo(f"curated {len(kept)} recordings, dropped {len(dropped)}, "
               f"{len(violations)} validation violations")
    if violations:
        sys.exit(EXIT_VALIDATION)


def _quality_check(buf, params) -> str | None:
    clipped = (abs(buf.samples) >= params.clip_level).mean()
    if clipped > params.max_clip_fraction:
        return "clipping"
    if buf.duration_ms < params.min_duration_ms:
        return "too_short"
    if buf.duration_ms > params.max_duration_ms:
        return "too_long"
    return None


# -- apply-condition ----------------------------------------------------------

@main.command("apply-condition")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
def apply_condition(config_path, out_dir):
    """Derive a treated test set (pcmu_nb chain or external command)."""
    config = _guard(load_config, config_path)
    _guard(_apply_condition, config, Path(out_dir))


def _apply_condition(config: StudyConfig, out_dir: Path):
    word_list = load_word_list(config.word_list, language=config.language)
    source = load_manifest(config.manifest, word_list,
                           instances_per_word=config.instances_per_word)
    spec = config.condition
    audio_dir = out_dir / "audio"
    audio_dir.mkdir(parents=True, exist_ok=True)
    derived: list[Recording] = []
    for rec in sorted(source.recordings, key=lambda r: r.recording_id):
        src = Path(rec.audio_path)
        if not src.is_absolute():
            src = config.manifest.parent / src
        buf = audiopipe.read_wav(src)
        if spec.type == "pcmu_nb":
            buf = audiopipe.apply_pcmu_nb(buf)
        elif spec.type == "external":
            buf = audiopipe.run_external_condition(buf, list(spec.command))
        # wb passes audio through untouched under the new label
        rel = f"audio/{rec.recording_id}.wav"
        audiopipe.write_wav(out_dir / rel, buf)
        derived.append(Recording(
            recording_id=rec.recording_id, pair_id=rec.pair_id,
            word_side=rec.word_side, talker_id=rec.talker_id,
            talker_gender=rec.talker_gender, language=rec.language,
            condition=spec.label, audio_path=rel,
            sample_rate_hz=buf.sample_rate_hz))
    treated = TestSet(word_list, spec.label, tuple(derived),
                      config.instances_per_word)
    write_manifest(out_dir / "manifest.jsonl", treated)
    click.echo(f"applied condition '{spec.label}' to "
               f"{len(derived)} recordings")


# -- make-blocks ---------------------------------------------------------------

@main.command("make-blocks")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--seed-override", type=int, default=None)
def make_blocks(config_path, out_path, seed_override):
    """Build the balanced block plan file for a study."""
    config = _guard(load_config, config_path, seed_override=seed_override)
    study = _guard(_study_from_config, config)
    out = Path(out_path)
    if out.suffix != ".json":
        out.mkdir(parents=True, exist_ok=True)
        out = out / "blocks.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(plans_to_json(list(study.plans)), encoding="utf-8")
    click.echo(f"wrote {len(study.plans)} blocks to {out}")


# -- simulate -------------------------------------------------------------------

@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed-override", type=int, default=None)
@click.option("--format", "fmt", type=click.Choice(["json", "text"]),
              default="json")
def simulate(config_path, out_dir, seed_override, fmt):
    """Run a synthetic panel (or condition pair) through the full pipeline."""
    config = _guard(load_config, config_path, seed_override=seed_override)
    _guard(_simulate, config, Path(out_dir), fmt)


def _simulate(config: StudyConfig, out_dir: Path, fmt: str):
    out_dir.mkdir(parents=True, exist_ok=True)
    sim = config.simulation
    study = _study_from_config(config)
    model = _model_from(sim.model)
    seed = config.seeds["simulation"]
    if sim.model_b is not None:
        study_b = _relabel_study(config, sim.condition_b or "B")
        result = simulate_condition_pair(
            study, study_b, model, _model_from(sim.model_b),
            listeners_per_block=sim.listeners_per_block, seed=seed)
        _write_report(out_dir, "report_a", result.report_a, fmt)
        _write_report(out_dir, "report_b", result.report_b, fmt)
        comparison = {
            "gap": round(result.gap, 4),
            "t": round(result.test.statistic, 6),
            "df": round(result.test.df, 4),
            "p": result.test.p_value,
            "significant": result.test.significant,
            "alpha": result.test.alpha,
            "method": result.test.method,
        }
        (out_dir / "comparison.json").write_text(
            json.dumps(comparison, ensure_ascii=False, indent=2,
                       sort_keys=True) + "\n", encoding="utf-8")
        click.echo(f"gap {result.gap:.2f} points, p={result.test.p_value:.4g}")
    else:
        events = simulate_panel(study, model,
                                listeners_per_block=sim.listeners_per_block,
                                seed=seed)
        report, _ = analyze_events(study, events)
        _write_report(out_dir, "report", report, fmt)
        (out_dir / "events.jsonl").write_text(
            "".join(json.dumps(e, ensure_ascii=False, sort_keys=True) + "\n"
                    for e in events), encoding="utf-8")
        click.echo(f"simulated {report.n_sessions} sessions, overall "
                   f"{report.overall.mean:.2f}")


def _relabel_study(config: StudyConfig, label: str) -> StudyDefinition:
    return _study_from_config(config, condition_label=label,
                              study_id=f"{config.study_id}-{label.lower()}")


def _write_report(out_dir: Path, stem: str, report, fmt: str):
    (out_dir / f"{stem}.json").write_text(report_to_json(report),
                                          encoding="utf-8")
    if fmt == "text":
        (out_dir / f"{stem}.txt").write_text(report_to_text(report),
                                             encoding="utf-8")
    (out_dir / f"{stem}_scores.csv").write_text(file_scores_csv(report),
                                                encoding="utf-8")


# -- serve ---------------------------------------------------------------------

@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--root", "root_dir", default=None, type=click.Path(),
              help="service state directory (default: <out>/service)")
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
@click.option("--webui", "webui_dir", default=None, type=click.Path())
def serve(config_path, root_dir, host, port, webui_dir):
    """Host the study over HTTP (participant API + researcher endpoints)."""
    import uvicorn

    from .service import HarnessService, create_app

    config = _guard(load_config, config_path)
    root = Path(root_dir) if root_dir else Path(config_path).parent / "service"
    audio = _guard(_hash_audio, config)
    study = _guard(_study_from_config, config, audio=audio)
    service = HarnessService(root)
    if study.study_id not in service.studies:
        _guard(service.create_study,
               json.loads(study_to_json(study)))
    app = create_app(service, webui_dir=webui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")


def _hash_audio(config: StudyConfig) -> dict:
    audio: dict[str, dict] = {}
    for manifest in (config.manifest, config.catch_manifest,
                     config.practice_manifest):
        if manifest is None or not manifest.exists():
            continue
        with open(manifest, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                row = json.loads(line)
                path = Path(row["audio_path"])
                if not path.is_absolute():
                    path = manifest.parent / path
                if not path.exists():
                    raise HarnessError(f"audio file missing: {path}")
                digest = hashlib.sha256(path.read_bytes()).hexdigest()
                audio[row["recording_id"]] = {"path": str(path),
                                              "hash": digest}
    return audio


# -- analyze / compare -----------------------------------------------------------

def _load_archive(path: Path) -> tuple[StudyDefinition, list[dict]]:
    with zipfile.ZipFile(path) as zf:
        study = study_from_json(zf.read("study.json").decode("utf-8"))
        events = [json.loads(line) for line in
                  zf.read("events.jsonl").decode("utf-8").splitlines()
                  if line.strip()]
    return study, events


@main.command()
@click.argument("export_path", type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--format", "fmt", type=click.Choice(["json", "text"]),
              default="json")
def analyze(export_path, out_dir, fmt):
    """Recompute the condition report from an export archive."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def _run():
        study, events = _load_archive(Path(export_path))
        report, _ = analyze_events(study, events)
        _write_report(out, "report", report, fmt)
        click.echo(f"analyzed {report.n_sessions} sessions -> "
                   f"{out / 'report.json'}")

    _guard(_run)


@main.command()
@click.argument("export_a", type=click.Path(exists=True))
@click.argument("export_b", type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--paired", is_flag=True, default=False,
              help="pair per-file scores by recording_id")
def compare(export_a, export_b, out_dir, paired):
    """Statistical comparison of two exported studies."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def _run():
        study_a, events_a = _load_archive(Path(export_a))
        study_b, events_b = _load_archive(Path(export_b))
        report_a, _ = analyze_events(study_a, events_a)
        report_b, _ = analyze_events(study_b, events_b)
        if paired:
            by_id_b = {fs.recording_id: fs.pc for fs in report_b.file_scores}
            pairs = [(fs.pc, by_id_b[fs.recording_id])
                     for fs in report_a.file_scores
                     if fs.recording_id in by_id_b]
            if len(pairs) < 3:
                raise HarnessError("fewer than 3 aligned recordings for a "
                                   "paired comparison")
            xs = [p[0] for p in pairs]
            ys = [p[1] for p in pairs]
            result = t_test(xs, ys, paired=True)
            correlation = pearson(xs, ys)
        else:
            result = t_test([fs.pc for fs in report_a.file_scores],
                            [fs.pc for fs in report_b.file_scores])
            correlation = None
        doc = {
            "study_a": report_a.study_id,
            "study_b": report_b.study_id,
            "mean_a": round(report_a.overall.mean, 4),
            "mean_b": round(report_b.overall.mean, 4),
            "gap": round(report_a.overall.mean - report_b.overall.mean, 4),
            "t": result.statistic,
            "df": result.df,
            "p": result.p_value,
            "significant": result.significant,
            "alpha": result.alpha,
            "method": result.method,
        }
        if correlation is not None:
            doc["pearson_rho"] = correlation.rho
            doc["pearson_p"] = correlation.p_value
        (out / "comparison.json").write_text(
            json.dumps(doc, ensure_ascii=False, indent=2, sort_keys=True)
            + "\n", encoding="utf-8")
        _write_report(out, "report_a", report_a, "json")
        _write_report(out, "report_b", report_b, "json")
        click.echo(f"gap {doc['gap']:.2f}, p={doc['p']:.4g}, "
                   f"significant={doc['significant']}")

    _guard(_run)


if __name__ == "__main__":
    main()
