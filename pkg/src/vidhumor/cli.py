"""Command-line entry point: one binary, one subcommand per pipeline stage."""

from __future__ import annotations

import functools
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from importlib import metadata
from pathlib import Path

import click

from . import corpus as corpus_mod
from .backends import BackendError, TransportError, serve_mock
from .config import RunConfig, load_config
from .corpus import (
    ManifestError,
    StateError,
    corpus_stats,
    ingest_manifest,
    make_kfold_splits,
    make_tvt_split,
    write_split,
)
from .filtering import run_filter
from .metrics import (
    RatingRecord,
    RationaleQuality,
    aggregate_comparison,
    aggregate_rating,
    classify_taxonomy,
    concat_moments,
    ra_score,
    render_report_table,
    run_rationale_eval,
    sentbert_score,
    taxonomy_report,
    threshold_report,
)
from .prompting import MediaError, PromptError, build_video_prompt, explain

_ABLATE_CODES = {"v": "visual", "t": "speech", "a": "sound"}


def _version() -> str:
    try:
        return metadata.version("vidhumor")
    except metadata.PackageNotFoundError:
        return "0.0.0+unpackaged"


def handle_errors(fn):
    """Map internal exceptions to one-line categorized failures (exit 1)."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ManifestError as exc:
            click.echo(f"manifest_error: {exc}", err=True)
            sys.exit(1)
        except StateError as exc:
            click.echo(f"state_error: {exc}", err=True)
            sys.exit(1)
        except (MediaError, PromptError) as exc:
            click.echo(f"media_error: {exc}", err=True)
            sys.exit(1)
        except BackendError as exc:
            click.echo(f"backend_error: {exc}", err=True)
            sys.exit(1)
        except OSError as exc:
            click.echo(f"io_error: {exc}", err=True)
            sys.exit(1)
        except ValueError as exc:
            click.echo(f"argument_error: {exc}", err=True)
            sys.exit(1)

    return wrapper


def common_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(),
                      default=None, help="YAML config file.")(fn)
    fn = click.option("--seed", type=int, default=0,
                      help="Deterministic seed.")(fn)
    return fn


@click.group()
@click.version_option(_version(), "--version", message="vidhumor %(version)s")
def main():
    """Corpus curation, prompting, and evaluation for video humor
    explanation."""


# ---------------------------------------------------------------------------
# stats / split
# ---------------------------------------------------------------------------

@main.command()
@common_options
@click.option("--manifest", required=True, type=click.Path(exists=True))
@handle_errors
def stats(config_path, seed, manifest):
    """Print corpus statistics for a manifest."""
    records = ingest_manifest(manifest)
    report = corpus_stats(records)
    click.echo(json.dumps(report.to_dict(), indent=2))


@main.command()
@common_options
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--scheme", type=click.Choice(["kfold5", "tvt"]),
              default="kfold5", show_default=True)
@click.option("--k", type=int, default=5, show_default=True)
@click.option("--out", type=click.Path(), default=None,
              help="Split file path; defaults next to the manifest.")
@handle_errors
def split(config_path, seed, manifest, scheme, k, out):
    """Produce a deterministic experiment split for a manifest."""
    records = ingest_manifest(manifest)
    ids = [r.id for r in records]
    if scheme == "kfold5":
        assignment = make_kfold_splits(ids, k=k, seed=seed)
    else:
        assignment = make_tvt_split(ids, seed=seed)
    if out is None:
        out = str(Path(manifest).with_suffix(f".{scheme}.split.json"))
    write_split(assignment, out)
    sizes = {str(fold): len(v) for fold, v in assignment.folds().items()}
    click.echo(json.dumps({"scheme": assignment.scheme, "seed": seed,
                           "sizes": sizes, "path": out}))


# ---------------------------------------------------------------------------
# filter
# ---------------------------------------------------------------------------

@main.command("filter")
@common_options
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default="verdicts.jsonl",
              show_default=True)
@click.option("--stage-limit", type=click.Choice(["a", "b", "c", "d"]),
              default=None, help="Stop the pipeline after this stage.")
@click.option("--dry-run", is_flag=True,
              help="Compute verdicts without persisting anything.")
@click.option("--jobs", type=int, default=None,
              help="Concurrent videos (default: processor count).")
@handle_errors
def filter_cmd(config_path, seed, manifest, out, stage_limit, dry_run, jobs):
    """Run the four-step humor filter over every ingested record."""
    cfg = load_config(config_path)
    client = cfg.client()
    filter_cfg = cfg.filter_config()
    records = [r for r in ingest_manifest(manifest) if r.state == "ingested"]
    limit = None if stage_limit == "d" else stage_limit

    def one(record):
        try:
            return record.id, run_filter(record, client, filter_cfg,
                                         stage_limit=limit)
        except TransportError as exc:
            return record.id, exc

    with ThreadPoolExecutor(max_workers=jobs or cfg.jobs) as pool:
        results = list(pool.map(one, records))

    lines = []
    summary: dict[str, int] = {}
    for vid, result in results:
        if isinstance(result, TransportError):
            summary["retryable"] = summary.get("retryable", 0) + 1
            lines.append({"video_id": vid, "decision": "retryable",
                          "detail": str(result)})
        elif result is None:
            summary["undecided"] = summary.get("undecided", 0) + 1
            lines.append({"video_id": vid, "decision": "undecided",
                          "stage_limit": stage_limit})
        else:
            key = f"{result.decision}@{result.stage}"
            summary[key] = summary.get(key, 0) + 1
            lines.append(result.to_dict())

    if not dry_run:
        with open(out, "w", encoding="utf-8") as fh:
            for line in lines:
                fh.write(json.dumps(line) + "\n")
    width = max((len(k) for k in summary), default=8)
    click.echo(f"{'outcome'.ljust(width)}  count")
    for key in sorted(summary):
        click.echo(f"{key.ljust(width)}  {summary[key]}")
    if dry_run:
        click.echo("dry run: no verdict file written")


# ---------------------------------------------------------------------------
# prompt / explain
# ---------------------------------------------------------------------------

def _parse_ablate(spec: str) -> frozenset:
    if not spec:
        return frozenset()
    out = set()
    for code in spec.split(","):
        code = code.strip().lower()
        if code not in _ABLATE_CODES:
            raise ValueError(
                f"unknown ablation {code!r}; use v, t, a"
            )
        out.add(_ABLATE_CODES[code])
    return frozenset(out)


@main.command()
@common_options
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--ablate", default="",
              help="Comma list of modalities to drop: v, t, a.")
@click.option("--k", type=int, default=None,
              help="Caption candidates per frame.")
@click.option("--fps", type=float, default=None,
              help="Frame sampling rate.")
@handle_errors
def prompt(config_path, seed, manifest, out_dir, ablate, k, fps):
    """Build one multimodal prompt file per video."""
    cfg = load_config(config_path)
    client = cfg.client()
    pcfg = cfg.prompt_config()
    from dataclasses import replace as dc_replace
    overrides = {}
    if k is not None:
        overrides["k"] = k
    if fps is not None:
        overrides["fps"] = fps
    if ablate:
        overrides["ablate"] = _parse_ablate(ablate)
    if overrides:
        pcfg = dc_replace(pcfg, **overrides)

    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    records = ingest_manifest(manifest)
    for record in records:
        result = build_video_prompt(record, client, pcfg)
        (out_path / f"{record.id}.prompt.txt").write_text(
            result.document.render(), encoding="utf-8"
        )
        (out_path / f"{record.id}.meta.json").write_text(
            json.dumps(result.meta, indent=2), encoding="utf-8"
        )
    click.echo(f"wrote {len(records)} prompts to {out_dir}")


@main.command("explain")
@common_options
@click.option("--prompts", "prompts_dir", required=True,
              type=click.Path(exists=True))
@click.option("--out", "out_dir", default=None,
              help="Output directory (defaults to the prompts directory).")
@handle_errors
def explain_cmd(config_path, seed, prompts_dir, out_dir):
    """Generate one explanation per prompt file."""
    cfg = load_config(config_path)
    client = cfg.client()
    src = Path(prompts_dir)
    dst = Path(out_dir) if out_dir else src
    dst.mkdir(parents=True, exist_ok=True)
    predictions = []
    for prompt_file in sorted(src.glob("*.prompt.txt")):
        vid = prompt_file.name[:-len(".prompt.txt")]
        text = explain(prompt_file.read_text(encoding="utf-8"), client)
        (dst / f"{vid}.explanation.txt").write_text(text, encoding="utf-8")
        predictions.append({"id": vid, "explanation": text})
    with open(dst / "predictions.jsonl", "w", encoding="utf-8") as fh:
        for p in predictions:
            fh.write(json.dumps(p, ensure_ascii=False) + "\n")
    click.echo(f"wrote {len(predictions)} explanations to {dst}")


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

@main.group("eval")
def eval_group():
    """Evaluation subcommands: auto, rq, human, taxonomy."""


def _read_predictions(path: str) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                d = json.loads(line)
                out[str(d["id"])] = str(d["explanation"])
    return out


def _report_path(cfg: RunConfig, name: str) -> Path:
    reports = Path(cfg.reports_dir)
    reports.mkdir(parents=True, exist_ok=True)
    import time as _time

    return reports / f"{name}_{int(_time.time() * 1000)}.json"


@eval_group.command("auto")
@common_options
@click.option("--pred", required=True, type=click.Path(exists=True))
@click.option("--gold", required=True, type=click.Path(exists=True))
@click.option("--metrics", "metric_names", default="sentbert,ra",
              show_default=True)
@handle_errors
def eval_auto(config_path, seed, pred, gold, metric_names):
    """Embedding-based explanation scores with @K columns."""
    cfg = load_config(config_path)
    client = cfg.client()
    predictions = _read_predictions(pred)
    gold_records = {r.id: r for r in ingest_manifest(gold)
                    if r.annotations}
    ids = sorted(set(predictions) & set(gold_records))
    if not ids:
        raise ValueError("no overlapping ids between --pred and --gold")
    wanted = {m.strip() for m in metric_names.split(",") if m.strip()}
    unknown = wanted - {"sentbert", "ra"}
    if unknown:
        raise ValueError(f"unknown metrics: {sorted(unknown)}")

    payload: dict = {"ids": ids, "excluded": sorted(set(predictions) - set(ids))}
    sent_report = ra_report = None
    if "sentbert" in wanted:
        scores = {i: sentbert_score(predictions[i],
                                    concat_moments(gold_records[i]), client)
                  for i in ids}
        sent_report = threshold_report("sentbert", scores,
                                       cfg.sentbert_thresholds)
        payload["sentbert"] = sent_report.to_dict()
    if "ra" in wanted:
        scores = {i: ra_score(predictions[i],
                              concat_moments(gold_records[i]), client)
                  for i in ids}
        ra_report = threshold_report("roscoe_ra", scores,
                                     cfg.roscoe_thresholds)
        payload["roscoe_ra"] = ra_report.to_dict()

    out = _report_path(cfg, "auto")
    out.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    click.echo(render_report_table(sent_report, ra_report,
                                   label=Path(pred).stem))
    click.echo(f"report: {out}")


@eval_group.command("rq")
@common_options
@click.option("--pred", required=True, type=click.Path(exists=True))
@click.option("--gold", required=True, type=click.Path(exists=True))
@click.option("--tau", "taus", default=None,
              help="Comma list of IoU thresholds (default 0.3,0.5).")
@handle_errors
def eval_rq(config_path, seed, pred, gold, taus):
    """Rationale-quality score via moment localization."""
    cfg = load_config(config_path)
    client = cfg.client()
    predictions = _read_predictions(pred)
    gold_records = {r.id: r for r in ingest_manifest(gold)
                    if r.annotations}
    tau_values = (tuple(float(t) for t in taus.split(","))
                  if taus else cfg.taus)
    ids = sorted(gold_records)
    results: list[RationaleQuality] = []
    payload: dict = {"taus": list(tau_values)}
    excluded: tuple = ()
    for tau in tau_values:
        res = run_rationale_eval(ids, predictions, gold_records,
                                 client.localize, tau)
        results.append(res.quality)
        excluded = res.excluded
        payload[f"tau_{tau:g}"] = {
            "quality": res.quality.to_dict(),
            "per_item": res.per_item,
        }
    payload["excluded"] = list(excluded)
    out = _report_path(cfg, "rq")
    out.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    click.echo(render_report_table(rqs=results, label=Path(pred).stem))
    if excluded:
        click.echo(f"excluded (missing explanations): {list(excluded)}")
    click.echo(f"report: {out}")


@eval_group.command("human")
@common_options
@click.option("--ratings", required=True, type=click.Path(exists=True))
@click.option("--comparisons", type=click.Path(exists=True), default=None)
@handle_errors
def eval_human(config_path, seed, ratings, comparisons):
    """Aggregate 5-worker ratings (drop min/max) and pairwise votes."""
    cfg = load_config(config_path)
    per_item = {}
    with open(ratings, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            rec = RatingRecord(item_id=str(d["item_id"]),
                               ratings=tuple(float(r) for r in d["ratings"]))
            per_item[rec.item_id] = aggregate_rating(rec)
    payload: dict = {
        "per_item": per_item,
        "mean_rating": sum(per_item.values()) / len(per_item)
        if per_item else None,
    }
    if comparisons:
        with open(comparisons, encoding="utf-8") as fh:
            votes = {}
            for line in fh:
                if not line.strip():
                    continue
                d = json.loads(line)
                votes[tuple(d["pair"])] = list(d["votes"])
        tallies = aggregate_comparison(votes)
        payload["comparisons"] = {
            " vs ".join(pair): tally for pair, tally in tallies.items()
        }
    out = _report_path(cfg, "human")
    out.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    click.echo(json.dumps(payload, indent=2))


@eval_group.command("taxonomy")
@common_options
@click.option("--pred", required=True, type=click.Path(exists=True))
@click.option("--categories", type=click.Path(exists=True), default=None,
              help="Category list JSON (default: the bundled 20 categories).")
@click.option("--scores", type=click.Path(exists=True), default=None,
              help="eval-auto report whose sentbert per-item scores to use.")
@click.option("--gold", type=click.Path(exists=True), default=None,
              help="Manifest for computing scores when --scores is absent.")
@handle_errors
def eval_taxonomy(config_path, seed, pred, categories, scores, gold):
    """Classify explanations into humor categories and report per-category
    means."""
    cfg = load_config(config_path)
    client = cfg.client()
    predictions = _read_predictions(pred)
    if categories:
        with open(categories, encoding="utf-8") as fh:
            cats = json.load(fh)
    else:
        cats = cfg.taxonomy()

    classifications = {
        vid: classify_taxonomy(text, cats, client)
        for vid, text in sorted(predictions.items())
    }
    if scores:
        with open(scores, encoding="utf-8") as fh:
            report = json.load(fh)
        per_scores = {k: float(v)
                      for k, v in report["sentbert"]["per_item"].items()}
    elif gold:
        gold_records = {r.id: r for r in ingest_manifest(gold)
                        if r.annotations}
        per_scores = {
            vid: sentbert_score(predictions[vid],
                                concat_moments(gold_records[vid]), client)
            for vid in classifications if vid in gold_records
        }
    else:
        per_scores = {vid: 0.0 for vid in classifications}
    classifications = {vid: c for vid, c in classifications.items()
                       if vid in per_scores}
    rows = taxonomy_report(classifications, per_scores)
    out = _report_path(cfg, "taxonomy")
    out.write_text(json.dumps({"rows": rows,
                               "classifications": classifications},
                              indent=2), encoding="utf-8")
    for row in rows:
        click.echo(
            f"{row['category']:<22} n={row['count']:<5} "
            f"p={row['proportion']:.3f} mean={row['mean_score']:.3f}"
        )
    click.echo(f"report: {out}")


# ---------------------------------------------------------------------------
# serve / mock-backend
# ---------------------------------------------------------------------------

@main.command()
@common_options
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--media-root", type=click.Path(), default=None)
@click.option("--log", "log_path", type=click.Path(), default=None,
              help="Verdict log (default: next to the manifest).")
@click.option("--ui-dir", type=click.Path(), default=None,
              help="Static frontend assets to mount at /.")
@handle_errors
def serve(config_path, seed, manifest, port, media_root, log_path, ui_dir):
    """Serve the triage REST API (and the review UI, if built)."""
    import uvicorn

    from .service import CorpusStore, create_app

    cfg = load_config(config_path)
    records = ingest_manifest(manifest)
    if log_path is None:
        log_path = str(Path(manifest).with_suffix(".triage_log.jsonl"))
    store = CorpusStore(records, log_path)
    store.enqueue_accepted()
    app = create_app(store, reports_dir=cfg.reports_dir,
                     media_root=media_root or cfg.media_root,
                     static_dir=ui_dir)
    uvicorn.run(app, host="127.0.0.1", port=port)


@main.command("mock-backend")
@common_options
@click.option("--fixture", required=True, type=click.Path(exists=True))
@click.option("--port", type=int, default=8900, show_default=True)
@handle_errors
def mock_backend(config_path, seed, fixture, port):
    """Serve scripted backend responses from a fixture file."""
    serve_mock(fixture, port)


if __name__ == "__main__":
    main()
