"""Stage-wise pipeline engine.

Each stage reads the artifacts of earlier stages, writes its own store
plus a manifest entry, and refuses to mix artifacts produced under a
different configuration. Artifact files carry no timestamps, so a rerun
with the same config and inputs is byte-identical.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from hashlib import sha256
from pathlib import Path
from typing import Callable

from . import attribution, evaluation, nle, rationale, verdict
from .corpus import (
    ClaimRecord,
    SourceBlocklist,
    VerdictLabel,
    compute_stats,
    filter_evidence,
    parse_corpus,
    split_corpus,
    EmptyEvidenceAfterFilter,
)
from .errors import ValidationError
from .store import (
    MissingUpstreamArtifact,
    file_sha256,
    read_doc,
    read_records,
    write_doc,
    write_records,
)

logger = logging.getLogger(__name__)

# Artifact file names within the output directory.
CORPUS_CLEAN = "corpus_clean.jsonl"
CORPUS_STATS = "corpus_stats.json"
SPLITS = "splits.json"
RATIONALES = "rationales.jsonl"
MODEL_STATE = "model_state.json"
TRAIN_LOG = "train_log.json"
PREDICTIONS = "predictions.jsonl"
NLES = "nles.jsonl"
HIGHLIGHTS = "highlights.json"
HIGHLIGHTS_HTML = "highlights.html"
EVAL_F1 = "eval_f1.json"
EVAL_NLI = "eval_nli.json"
EVAL_REPORT = "eval_report.json"
ANNOTATION_TASKS = "annotation_tasks.tsv"
ANNOTATION_SUMMARY = "annotation_summary.json"
REPORT = "report.json"
MANIFEST = "manifest.jsonl"

# Published shape of the benchmark release; ingest prints a comparison
# when the cleaned corpus reproduces it.
BENCHMARK_TOTAL = 4006
BENCHMARK_PER_LABEL = {VerdictLabel.SUPPORTS: 2013, VerdictLabel.REFUTES: 1993}
BENCHMARK_SPLIT_SIZES = (2804, 601, 601)

# Backend registries; real backends plug in by id.
SUMMARIZER_BACKENDS: dict[str, Callable[[], rationale.SummarizationBackend]] = {
    "stub-lead": rationale.LeadSummarizer,
}
CLASSIFIER_BACKENDS: dict[str, Callable[[], verdict.Text2TextBackend]] = {
    "stub-memorizing": verdict.MemorizingBackend,
}
NLI_BACKENDS: dict[str, Callable[[], evaluation.NliBackend]] = {
    "stub-nli": evaluation.StubNliBackend,
}

ENV_OVERRIDES = {
    "CLAIMCHECK_SUMMARIZER": "summarizer",
    "CLAIMCHECK_CLASSIFIER": "classifier",
    "CLAIMCHECK_NLI": "nli",
}


@dataclass
class BackendIds:
    summarizer: str = "stub-lead"
    classifier: str = "stub-memorizing"
    nli: str = "stub-nli"


@dataclass
class ExplainSettings:
    records: int = 3  # how many test records to attribute
    permutations: int = 200
    seed: int = 7
    granularity: str = "sentence"


@dataclass
class AnnotationSettings:
    n: int = 100
    seed: int = 13
    system: str = "claimcheck"


@dataclass
class PipelineConfig:
    """Single flat configuration for a pipeline run."""

    corpus_path: str
    output_dir: str
    blocklist_path: str | None = None
    corpus_format: str = "json-lines"
    ratios: tuple[float, float, float] = (0.70, 0.15, 0.15)
    split_seed: int = 42
    summary: rationale.SummaryConfig = field(default_factory=rationale.SummaryConfig)
    train: verdict.TrainConfig = field(default_factory=verdict.TrainConfig)
    backends: BackendIds = field(default_factory=BackendIds)
    explain: ExplainSettings = field(default_factory=ExplainSettings)
    annotation: AnnotationSettings = field(default_factory=AnnotationSettings)
    limit: int | None = None  # fixture runs: keep only the first N records

    @property
    def config_hash(self) -> str:
        """Digest of the semantic parameters.

        Filesystem locations are excluded so the same run in a different
        directory hashes identically; input content is covered separately
        by the manifest's input hashes.
        """
        payload = asdict(self)
        for key in ("corpus_path", "blocklist_path", "output_dir"):
            payload.pop(key)
        canonical = json.dumps(payload, sort_keys=True)
        return sha256(canonical.encode("utf-8")).hexdigest()

    def artifact(self, name: str) -> Path:
        return Path(self.output_dir) / name


def load_config(path: str | Path, **overrides) -> PipelineConfig:
    """Read a JSON config file, then apply env and keyword overrides.

    Environment variables CLAIMCHECK_SUMMARIZER / _CLASSIFIER / _NLI
    override the backend ids; keyword overrides (CLI flags) win over both.
    """
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
    if "corpus_path" not in raw or "output_dir" not in raw:
        raise ValidationError("config must set corpus_path and output_dir")

    backends = BackendIds(**raw.get("backends", {}))
    for env_name, attr in ENV_OVERRIDES.items():
        if os.environ.get(env_name):
            setattr(backends, attr, os.environ[env_name])

    config = PipelineConfig(
        corpus_path=raw["corpus_path"],
        output_dir=raw["output_dir"],
        blocklist_path=raw.get("blocklist_path"),
        corpus_format=raw.get("corpus_format", "json-lines"),
        ratios=tuple(raw.get("ratios", (0.70, 0.15, 0.15))),
        split_seed=raw.get("split_seed", 42),
        summary=rationale.SummaryConfig(**raw.get("summary", {})),
        train=verdict.TrainConfig(**raw.get("train", {})),
        backends=backends,
        explain=ExplainSettings(**raw.get("explain", {})),
        annotation=AnnotationSettings(**raw.get("annotation", {})),
        limit=raw.get("limit"),
    )
    for key, value in overrides.items():
        if value is None:
            continue
        if key in ("summarizer", "classifier", "nli"):
            setattr(config.backends, key, value)
        elif key == "seed":
            config.split_seed = value
        elif hasattr(config, key):
            setattr(config, key, value)
        else:
            raise ValidationError(f"unknown config override {key!r}")
    return config


def _create(registry: dict, backend_id: str, role: str):
    factory = registry.get(backend_id)
    if factory is None:
        known = ", ".join(sorted(registry))
        raise ValidationError(f"unknown {role} backend {backend_id!r}; registered: {known}")
    return factory()


def create_summarizer(backend_id: str) -> rationale.SummarizationBackend:
    return _create(SUMMARIZER_BACKENDS, backend_id, "summarizer")


def create_classifier(backend_id: str) -> verdict.Text2TextBackend:
    return _create(CLASSIFIER_BACKENDS, backend_id, "classifier")


def create_nli(backend_id: str) -> evaluation.NliBackend:
    return _create(NLI_BACKENDS, backend_id, "NLI")


def append_manifest(config: PipelineConfig, stage: str, input_hashes: dict[str, str]) -> None:
    entry = {
        "stage": stage,
        "config_hash": config.config_hash,
        "input_hashes": input_hashes,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    path = config.artifact(MANIFEST)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a", encoding="utf-8") as fh:
        fh.write(json.dumps(entry, ensure_ascii=False) + "\n")


def _require(config: PipelineConfig, stage: str, *names: str) -> None:
    for name in names:
        path = config.artifact(name)
        if not path.exists():
            raise MissingUpstreamArtifact(stage, path)


def _load_clean_records(config: PipelineConfig) -> list[ClaimRecord]:
    rows = read_records(config.artifact(CORPUS_CLEAN), "corpus", config.config_hash)
    return [
        ClaimRecord(
            id=row["id"],
            claim=row["claim"],
            date=row["date"],
            source=row["source"],
            verdict=VerdictLabel(row["verdict"]),
            evidence=row["evidence"],
            url=row["url"],
        )
        for row in rows
    ]


def _load_rationales(config: PipelineConfig) -> dict[str, rationale.Rationale]:
    rows = read_records(config.artifact(RATIONALES), "rationales", config.config_hash)
    return {
        row["record_id"]: rationale.Rationale(
            record_id=row["record_id"],
            text=row["text"],
            token_length=row["token_length"],
            backend_id=row["backend_id"],
        )
        for row in rows
    }


def _load_split_ids(config: PipelineConfig) -> dict[str, list[str]]:
    doc = read_doc(config.artifact(SPLITS), "splits", config.config_hash)
    return {name: doc[name] for name in ("train", "validation", "test")}


# ---------------------------------------------------------------------------
# Stages


def stage_ingest(config: PipelineConfig) -> dict:
    """Parse, clean, and summarize the corpus; write the cleaned store."""
    records = parse_corpus(config.corpus_path, config.corpus_format)
    if config.limit is not None:
        records = records[: config.limit]

    input_hashes = {"corpus": file_sha256(config.corpus_path)}
    dropped: list[str] = []
    if config.blocklist_path:
        blocklist = SourceBlocklist.from_file(config.blocklist_path)
        if not blocklist.outlets:
            raise ValidationError(f"blocklist {config.blocklist_path} is empty")
        input_hashes["blocklist"] = file_sha256(config.blocklist_path)
        kept = []
        for record in records:
            try:
                kept.append(filter_evidence(record, blocklist))
            except EmptyEvidenceAfterFilter:
                dropped.append(record.id)
        if dropped:
            logger.warning("dropped %d records with fully blocklisted evidence: %s",
                           len(dropped), ", ".join(dropped))
        records = kept

    stats = compute_stats(records)
    write_records(
        config.artifact(CORPUS_CLEAN),
        "corpus",
        config.config_hash,
        (r.to_row() for r in records),
    )
    stats_payload = {
        "total": stats.total,
        "per_label": {label.value: count for label, count in stats.per_label.items()},
        "mean_claim_tokens": stats.mean_claim_tokens,
        "mean_evidence_tokens": stats.mean_evidence_tokens,
        "dropped_ids": dropped,
    }
    write_doc(config.artifact(CORPUS_STATS), "stats", config.config_hash, stats_payload)
    append_manifest(config, "ingest", input_hashes)
    matches_benchmark = stats.total == BENCHMARK_TOTAL and stats.per_label == BENCHMARK_PER_LABEL
    return {**stats_payload, "matches_benchmark": matches_benchmark}


def stage_split(config: PipelineConfig) -> dict:
    _require(config, "split", CORPUS_CLEAN)
    records = _load_clean_records(config)
    splits = split_corpus(records, config.ratios, config.split_seed)
    payload = {
        "seed": splits.seed,
        "ratios": list(config.ratios),
        "train": [r.id for r in splits.train],
        "validation": [r.id for r in splits.validation],
        "test": [r.id for r in splits.test],
    }
    write_doc(config.artifact(SPLITS), "splits", config.config_hash, payload)
    append_manifest(config, "split", {"corpus_clean": file_sha256(config.artifact(CORPUS_CLEAN))})
    return {"sizes": splits.sizes(), "seed": splits.seed}


def stage_rationales(config: PipelineConfig) -> dict:
    _require(config, "rationales", CORPUS_CLEAN, SPLITS)
    records = _load_clean_records(config)
    _load_split_ids(config)  # provenance check: splits must match this config
    backend = create_summarizer(config.backends.summarizer)
    result = rationale.batch_generate(records, backend, config.summary)
    rows = [
        {
            "record_id": record.id,
            "text": result.rationales[record.id].text,
            "token_length": result.rationales[record.id].token_length,
            "backend_id": result.rationales[record.id].backend_id,
            "config_hash": config.config_hash,
        }
        for record in records
        if record.id in result.rationales
    ]
    write_records(config.artifact(RATIONALES), "rationales", config.config_hash, rows)
    append_manifest(config, "rationales", {
        "corpus_clean": file_sha256(config.artifact(CORPUS_CLEAN)),
        "splits": file_sha256(config.artifact(SPLITS)),
    })
    return {"generated": len(rows), "failures": result.failures}


def stage_train(config: PipelineConfig) -> dict:
    _require(config, "train", CORPUS_CLEAN, SPLITS, RATIONALES)
    records = {r.id: r for r in _load_clean_records(config)}
    split_ids = _load_split_ids(config)
    rationales = _load_rationales(config)

    train_records = [records[i] for i in split_ids["train"] if i in rationales]
    val_records = [records[i] for i in split_ids["validation"] if i in rationales]
    pairs = verdict.make_training_pairs(train_records, rationales)
    validation_pairs = verdict.make_training_pairs(val_records, rationales) or None

    backend = create_classifier(config.backends.classifier)
    if not isinstance(backend, verdict.TrainableBackend):
        raise ValidationError(
            f"classifier backend {config.backends.classifier!r} is not trainable"
        )
    state, log = verdict.fine_tune(pairs, config.train, backend, validation_pairs)

    write_doc(config.artifact(MODEL_STATE), "model", config.config_hash, {
        "backend_id": config.backends.classifier,
        "state": state,
    })
    write_doc(config.artifact(TRAIN_LOG), "train-log", config.config_hash, {
        "optimizer": log.optimizer,
        "learning_rate": log.learning_rate,
        "weight_decay": log.weight_decay,
        "lr_schedule": log.lr_schedule,
        "best_step": log.best_step,
        "best_validation_f1": log.best_validation_f1,
        "final_step": log.final_step,
        "final_validation_f1": log.final_validation_f1,
        "entries": [
            {"step": e.step, "loss": e.loss, "validation_macro_f1": e.validation_macro_f1}
            for e in log.entries
        ],
    })
    append_manifest(config, "train", {
        "rationales": file_sha256(config.artifact(RATIONALES)),
        "splits": file_sha256(config.artifact(SPLITS)),
    })
    return {
        "pairs": len(pairs),
        "steps": log.final_step,
        "best_validation_f1": log.best_validation_f1,
        "final_validation_f1": log.final_validation_f1,
    }


def stage_predict(config: PipelineConfig) -> dict:
    _require(config, "predict", CORPUS_CLEAN, RATIONALES, MODEL_STATE)
    records = _load_clean_records(config)
    rationales = _load_rationales(config)
    model_doc = read_doc(config.artifact(MODEL_STATE), "model", config.config_hash)

    backend = create_classifier(model_doc["backend_id"])
    if model_doc.get("state") is not None and isinstance(backend, verdict.TrainableBackend):
        backend.restore(model_doc["state"])

    rows = []
    skipped = []
    for record in records:
        if record.id not in rationales:
            skipped.append(record.id)
            continue
        prediction = verdict.classify(record.claim, rationales[record.id], backend)
        rows.append({
            "record_id": prediction.record_id,
            "label": prediction.label.value,
            "raw_generation": prediction.raw_generation,
            "prompt_hash": prediction.prompt_hash,
        })
    if skipped:
        logger.warning("no rationale for %d records; skipped: %s", len(skipped), ", ".join(skipped))
    write_records(config.artifact(PREDICTIONS), "predictions", config.config_hash, rows)
    append_manifest(config, "predict", {
        "rationales": file_sha256(config.artifact(RATIONALES)),
        "model_state": file_sha256(config.artifact(MODEL_STATE)),
    })
    return {"predicted": len(rows), "skipped": skipped}


def stage_nle(config: PipelineConfig) -> dict:
    _require(config, "nle", RATIONALES, PREDICTIONS)
    rationales = _load_rationales(config)
    prediction_rows = read_records(config.artifact(PREDICTIONS), "predictions", config.config_hash)

    rows = []
    for row in prediction_rows:
        prediction = verdict.VerdictPrediction(
            record_id=row["record_id"],
            label=VerdictLabel(row["label"]),
            raw_generation=row["raw_generation"],
            prompt_hash=row["prompt_hash"],
        )
        explanation = nle.compose_nle(prediction, rationales[prediction.record_id])
        rows.append({"record_id": explanation.record_id, "text": explanation.text})
    write_records(config.artifact(NLES), "nles", config.config_hash, rows)
    append_manifest(config, "nle", {
        "predictions": file_sha256(config.artifact(PREDICTIONS)),
        "rationales": file_sha256(config.artifact(RATIONALES)),
    })
    return {"explanations": len(rows)}


def stage_explain(config: PipelineConfig) -> dict:
    """Attribute rationale generation for the first few test records."""
    _require(config, "explain", CORPUS_CLEAN, SPLITS, RATIONALES)
    records = {r.id: r for r in _load_clean_records(config)}
    split_ids = _load_split_ids(config)
    rationales = _load_rationales(config)
    backend = create_summarizer(config.backends.summarizer)

    target_ids = [i for i in split_ids["test"] if i in rationales][: config.explain.records]
    out_records = []
    docs = []
    for record_id in target_ids:
        record = records[record_id]
        features = attribution.evidence_features(record.evidence, config.explain.granularity)
        value_fn = attribution.rationale_value_fn(
            record, backend, config.summary, config.explain.granularity
        )
        if len(features) <= 10:
            result = attribution.exact_shapley(features, value_fn)
        else:
            result = attribution.sampled_shapley(
                features, value_fn, config.explain.permutations, config.explain.seed
            )
        doc = attribution.export_highlights(result, title=f"record {record_id}")
        docs.append(doc)
        out_records.append({
            "record_id": record_id,
            "granularity": config.explain.granularity,
            "method": result.method,
            "features": [f.text for f in result.features],
            "phi": list(result.phi),
            "polarity": [e.polarity for e in doc.entries],
        })
    write_doc(config.artifact(HIGHLIGHTS), "highlights", config.config_hash,
              {"records": out_records})
    html_page = render_with_provenance(docs, config.config_hash)
    config.artifact(HIGHLIGHTS_HTML).write_text(html_page, encoding="utf-8")
    append_manifest(config, "explain", {
        "corpus_clean": file_sha256(config.artifact(CORPUS_CLEAN)),
        "rationales": file_sha256(config.artifact(RATIONALES)),
    })
    return {"explained": target_ids}


def render_with_provenance(docs, config_hash: str) -> str:
    page = attribution.render_highlight_page(docs)
    return f"<!-- config_hash: {config_hash} -->\n{page}"


def stage_eval_f1(config: PipelineConfig) -> dict:
    """Macro-F1 of stored predictions against gold labels, per split."""
    _require(config, "eval-f1", CORPUS_CLEAN, SPLITS, PREDICTIONS)
    records = {r.id: r for r in _load_clean_records(config)}
    split_ids = _load_split_ids(config)
    prediction_rows = read_records(config.artifact(PREDICTIONS), "predictions", config.config_hash)
    predicted = {row["record_id"]: VerdictLabel(row["label"]) for row in prediction_rows}

    payload: dict = {"macro_f1": {}, "scored": {}}
    for split_name in ("validation", "test"):
        ids = [i for i in split_ids[split_name] if i in predicted]
        missing = [i for i in split_ids[split_name] if i not in predicted]
        if missing:
            logger.warning("%s split: %d records lack predictions", split_name, len(missing))
        golds = [records[i].verdict for i in ids]
        preds = [predicted[i] for i in ids]
        payload["macro_f1"][split_name] = evaluation.macro_f1(preds, golds) if ids else None
        payload["scored"][split_name] = len(ids)
    write_doc(config.artifact(EVAL_F1), "eval-f1", config.config_hash, payload)
    append_manifest(config, "eval-f1", {
        "predictions": file_sha256(config.artifact(PREDICTIONS)),
        "splits": file_sha256(config.artifact(SPLITS)),
    })
    return payload


def stage_eval_nli(config: PipelineConfig) -> dict:
    """Entailment audit of the test-split explanations."""
    _require(config, "eval-nli", CORPUS_CLEAN, SPLITS, NLES)
    records = {r.id: r for r in _load_clean_records(config)}
    split_ids = _load_split_ids(config)
    nle_rows = read_records(config.artifact(NLES), "nles", config.config_hash)
    nles = {row["record_id"]: nle.nle_from_row(row["record_id"], row["text"]) for row in nle_rows}

    pairs = [
        (records[i].claim, nles[i])
        for i in split_ids["test"]
        if i in nles
    ]
    backend = create_nli(config.backends.nli)
    report = evaluation.evaluate_nli(pairs, backend)
    payload = {
        "total": report.total,
        "counts": {label.value: report.counts[label] for label in evaluation.NliVerdict},
        "percentages": {label.value: report.percentages[label] for label in evaluation.NliVerdict},
    }
    write_doc(config.artifact(EVAL_NLI), "eval-nli", config.config_hash, payload)
    append_manifest(config, "eval-nli", {
        "nles": file_sha256(config.artifact(NLES)),
        "splits": file_sha256(config.artifact(SPLITS)),
    })
    return payload


def stage_eval(config: PipelineConfig) -> dict:
    """Both evaluation halves plus the combined report artifact."""
    f1_payload = stage_eval_f1(config)
    nli_payload = stage_eval_nli(config)
    payload = {
        "macro_f1": f1_payload["macro_f1"],
        "scored": f1_payload["scored"],
        "nli": {k: nli_payload[k] for k in ("total", "counts", "percentages")},
    }
    write_doc(config.artifact(EVAL_REPORT), "eval-report", config.config_hash, payload)
    return payload


STAGES: dict[str, Callable[[PipelineConfig], dict]] = {
    "split": stage_split,
    "rationales": stage_rationales,
    "train": stage_train,
    "predict": stage_predict,
    "nle": stage_nle,
    "explain": stage_explain,
    "eval": stage_eval,
}


def run_stage(config: PipelineConfig, stage: str) -> dict:
    """Run one named stage; upstream artifacts must already exist."""
    if stage not in STAGES:
        raise ValidationError(f"unknown stage {stage!r}; stages: {', '.join(STAGES)}")
    return STAGES[stage](config)


def run_all(config: PipelineConfig) -> dict[str, dict]:
    """Ingest followed by every stage, in dependency order."""
    summaries = {"ingest": stage_ingest(config)}
    for stage in STAGES:
        summaries[stage] = run_stage(config, stage)
    return summaries


# ---------------------------------------------------------------------------
# Annotation and report helpers (not part of the stage DAG)


def export_annotations(config: PipelineConfig, n: int | None = None) -> dict:
    _require(config, "annotate-export", CORPUS_CLEAN, SPLITS, NLES)
    records = {r.id: r for r in _load_clean_records(config)}
    split_ids = _load_split_ids(config)
    nle_rows = read_records(config.artifact(NLES), "nles", config.config_hash)
    texts = {row["record_id"]: row["text"] for row in nle_rows}
    items = [
        (i, records[i].claim, texts[i])
        for i in split_ids["test"]
        if i in texts
    ]
    tasks = evaluation.export_annotation_tasks(
        items,
        config.artifact(ANNOTATION_TASKS),
        n=config.annotation.n if n is None else n,
        seed=config.annotation.seed,
        system_id=config.annotation.system,
    )
    append_manifest(config, "annotate-export", {"nles": file_sha256(config.artifact(NLES))})
    return {"tasks": len(tasks), "path": str(config.artifact(ANNOTATION_TASKS))}


def aggregate_annotation_files(config: PipelineConfig, files: list[str]) -> dict:
    summary = evaluation.aggregate_annotations(files)
    payload = {
        "per_system": summary.per_system,
        "per_annotator": summary.per_annotator,
        "n_items": summary.n_items,
        "n_annotators": summary.n_annotators,
    }
    write_doc(config.artifact(ANNOTATION_SUMMARY), "annotation-summary", config.config_hash, payload)
    append_manifest(config, "annotate-aggregate",
                    {Path(f).name: file_sha256(f) for f in files})
    return payload


def build_report(config: PipelineConfig) -> dict:
    """Merge the evaluation artifacts (and annotation means, if present)."""
    _require(config, "report", EVAL_F1, EVAL_NLI)
    f1_doc = read_doc(config.artifact(EVAL_F1), "eval-f1", config.config_hash)
    nli_doc = read_doc(config.artifact(EVAL_NLI), "eval-nli", config.config_hash)
    payload = {
        "macro_f1": f1_doc["macro_f1"],
        "nli": {k: nli_doc[k] for k in ("total", "counts", "percentages")},
        "annotation": None,
    }
    summary_path = config.artifact(ANNOTATION_SUMMARY)
    if summary_path.exists():
        summary_doc = read_doc(summary_path, "annotation-summary", config.config_hash)
        payload["annotation"] = {
            "per_system": summary_doc["per_system"],
            "per_annotator": summary_doc["per_annotator"],
        }
    write_doc(config.artifact(REPORT), "report", config.config_hash, payload)
    return payload
