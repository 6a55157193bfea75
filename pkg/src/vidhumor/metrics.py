"""Evaluation suite: embedding scores with @K reports, rationale quality
via moment localization, human-eval aggregation, and taxonomy reports.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence

from .backends import BackendClient, CompletionRequest, MomentCandidate
from .corpus import VideoRecord

# Threshold ladders for the @K report columns, per metric.
DEFAULT_THRESHOLDS = {
    "sentbert": (0.7, 0.6, 0.5, 0.4),
    "roscoe_ra": (0.8, 0.7),
}

# IoU thresholds for the rationale-quality score.
DEFAULT_TAUS = (0.3, 0.5)

RATING_SCALE = (0.0, 0.25, 0.5, 0.75, 1.0)


# ---------------------------------------------------------------------------
# Embedding scores
# ---------------------------------------------------------------------------

def cosine(u: Sequence[float], v: Sequence[float]) -> float:
    if len(u) != len(v):
        raise ValueError(f"dimension mismatch: {len(u)} vs {len(v)}")
    nu = math.sqrt(sum(x * x for x in u))
    nv = math.sqrt(sum(x * x for x in v))
    if nu == 0 or nv == 0:
        raise ValueError("cosine undefined for zero vectors")
    value = sum(a * b for a, b in zip(u, v)) / (nu * nv)
    return max(-1.0, min(1.0, value))


_ABBREVIATIONS = ("mr.", "mrs.", "ms.", "dr.", "e.g.", "i.e.", "etc.", "vs.",
                  "st.", "no.")

_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")


def split_sentences(text: str) -> list[str]:
    """Split on terminal punctuation, keeping common abbreviations intact."""
    parts = _SENTENCE_SPLIT.split(text.strip())
    out: list[str] = []
    for part in parts:
        if not part:
            continue
        if out and out[-1].lower().endswith(_ABBREVIATIONS):
            out[-1] = f"{out[-1]} {part}"
        else:
            out.append(part)
    return out or [text.strip()]


def sentbert_score(pred: str, gold: str, client: BackendClient) -> float:
    """Cosine similarity of the two full-text embeddings."""
    if not pred.strip() or not gold.strip():
        raise ValueError("pred and gold must be non-empty")
    u, v = client.embed([pred, gold])
    return cosine(u, v)


def ra_score(pred: str, gold: str, client: BackendClient) -> float:
    """Reasoning-alignment style score: mean over predicted sentences of the
    best cosine against any gold sentence."""
    if not pred.strip() or not gold.strip():
        raise ValueError("pred and gold must be non-empty")
    pred_sents = split_sentences(pred)
    gold_sents = split_sentences(gold)
    vectors = client.embed(pred_sents + gold_sents)
    pv = vectors[:len(pred_sents)]
    gv = vectors[len(pred_sents):]
    per_sentence = [
        max(cosine(p, g) for g in gv) for p in pv
    ]
    return sum(per_sentence) / len(per_sentence)


@dataclass(frozen=True)
class ScoreReport:
    metric: str  # "sentbert" | "roscoe_ra"
    per_item: dict  # id -> score in [-1, 1]
    mean: float
    at_thresholds: dict  # K -> proportion of items with score >= K

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "per_item": dict(self.per_item),
            "mean": self.mean,
            "at_thresholds": {str(k): v for k, v in self.at_thresholds.items()},
        }


def threshold_report(metric: str, scores: Mapping[str, float],
                     thresholds: Optional[Sequence[float]] = None
                     ) -> ScoreReport:
    """Mean plus @K columns: the share of items scoring at least K."""
    if not scores:
        raise ValueError("scores must be non-empty")
    if thresholds is None:
        thresholds = DEFAULT_THRESHOLDS.get(metric, ())
    values = list(scores.values())
    at = {
        k: sum(1 for s in values if s >= k) / len(values)
        for k in thresholds
    }
    return ScoreReport(
        metric=metric,
        per_item=dict(scores),
        mean=sum(values) / len(values),
        at_thresholds=at,
    )


# ---------------------------------------------------------------------------
# Temporal IoU and rationale quality
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Interval:
    start_s: float
    end_s: float

    def __post_init__(self):
        if not self.start_s < self.end_s:
            raise ValueError(
                f"interval inverted: [{self.start_s}, {self.end_s}]"
            )

    @property
    def length(self) -> float:
        return self.end_s - self.start_s


def temporal_iou(a: Interval, b: Interval) -> float:
    inter = max(0.0, min(a.end_s, b.end_s) - max(a.start_s, b.start_s))
    union = a.length + b.length - inter
    return inter / union if union > 0 else 0.0


def max_iou(candidates: Sequence[MomentCandidate],
            gold_moments: Sequence[Interval]) -> float:
    """Best IoU between any candidate and any gold moment; 0 with no
    candidates."""
    if not gold_moments:
        raise ValueError("gold_moments must be non-empty")
    if not candidates:
        return 0.0
    return max(
        temporal_iou(Interval(c.start_s, c.end_s), g)
        for c in candidates
        for g in gold_moments
    )


@dataclass(frozen=True)
class RationaleQuality:
    tau: float
    S: float
    counted: int  # items whose model-explanation IoU cleared tau
    n: int

    def to_dict(self) -> dict:
        return {"tau": self.tau, "S": self.S, "counted": self.counted,
                "n": self.n}


def rationale_quality(items: Sequence[tuple[float, float]],
                      tau: float) -> RationaleQuality:
    """S = sum over items with iou_m strictly above tau of (iou_g - iou_m).

    Items are (iou_g, iou_m) pairs; lower S is better.
    """
    for iou_g, iou_m in items:
        if not (0.0 <= iou_g <= 1.0 and 0.0 <= iou_m <= 1.0):
            raise ValueError("IoU values must lie in [0, 1]")
    counted = [(g, m) for g, m in items if m > tau]
    return RationaleQuality(
        tau=tau,
        S=sum(g - m for g, m in counted),
        counted=len(counted),
        n=len(items),
    )


@dataclass(frozen=True)
class RationaleEvalResult:
    quality: RationaleQuality
    per_item: dict  # id -> {"iou_g": float, "iou_m": float}
    excluded: tuple  # ids skipped for missing explanations, reported not dropped


def run_rationale_eval(
    test_ids: Sequence[str],
    explanations: Mapping[str, str],
    gold: Mapping[str, VideoRecord],
    localize: Callable[[str, str, int], Sequence[MomentCandidate]],
    tau: float,
    top_k: int = 5,
) -> RationaleEvalResult:
    """Localize gold and model explanations per item, then score S.

    `localize(video_ref, query, top_k)` is typically BackendClient.localize.
    Items missing a model explanation are excluded and listed, never imputed.
    """
    items: list[tuple[float, float]] = []
    per_item: dict[str, dict] = {}
    excluded: list[str] = []
    for vid in sorted(test_ids):
        record = gold[vid]
        pred = explanations.get(vid)
        if not pred or not record.annotations:
            excluded.append(vid)
            continue
        gold_text = concat_moments(record)
        gold_moments = [Interval(m.start_s, m.end_s)
                        for m in record.annotations]
        media_ref = record.media.frames_dir or record.id
        iou_g = max_iou(list(localize(media_ref, gold_text, top_k))[:top_k],
                        gold_moments)
        iou_m = max_iou(list(localize(media_ref, pred, top_k))[:top_k],
                        gold_moments)
        items.append((iou_g, iou_m))
        per_item[vid] = {"iou_g": iou_g, "iou_m": iou_m}
    return RationaleEvalResult(
        quality=rationale_quality(items, tau),
        per_item=per_item,
        excluded=tuple(excluded),
    )


def concat_moments(record: VideoRecord) -> str:
    """Join per-moment explanations in start-time order, space-separated."""
    if not record.annotations:
        raise ValueError(f"record {record.id} has no annotations")
    ordered = sorted(record.annotations, key=lambda m: m.start_s)
    return " ".join(m.explanation.strip() for m in ordered)


# ---------------------------------------------------------------------------
# Human evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RatingRecord:
    item_id: str
    ratings: tuple[float, ...]  # exactly 5 values on the fixed scale

    def __post_init__(self):
        if len(self.ratings) != 5:
            raise ValueError("exactly 5 ratings required")
        for r in self.ratings:
            if r not in RATING_SCALE:
                raise ValueError(f"rating {r} not on scale {RATING_SCALE}")


def aggregate_rating(rec: RatingRecord) -> float:
    """Drop one highest and one lowest rating, average the remaining three."""
    vals = sorted(rec.ratings)
    trimmed = vals[1:-1]
    return sum(trimmed) / len(trimmed)


def aggregate_comparison(votes: Mapping[tuple, Sequence[str]]) -> dict:
    """Tally 5-vote pairwise preferences into counts and proportions."""
    out = {}
    for pair, choices in votes.items():
        if len(choices) != 5:
            raise ValueError(f"pair {pair}: expected 5 votes, got "
                             f"{len(choices)}")
        a, b = pair
        count_a = sum(1 for c in choices if c == a)
        count_b = sum(1 for c in choices if c == b)
        if count_a + count_b != 5:
            raise ValueError(f"pair {pair}: votes must name one of the pair")
        out[pair] = {
            a: count_a,
            b: count_b,
            "proportions": {a: count_a / 5, b: count_b / 5},
        }
    return out


# ---------------------------------------------------------------------------
# Taxonomy classification
# ---------------------------------------------------------------------------

def classify_taxonomy(explanation: str, categories: Sequence[dict],
                      client: BackendClient) -> str:
    """Ask the completion backend to bucket one explanation.

    Each category dict carries name, description, and example. The reply is
    matched case-insensitively against the category names; anything
    unrecognizable maps to "unclassified".
    """
    if not categories:
        raise ValueError("categories must be non-empty")
    lines = ["Classify the following humor explanation into exactly one "
             "category. Answer with the category name only.", "", "Categories:"]
    for c in categories:
        lines.append(f"- {c['name']}: {c.get('description', '')} "
                     f"(e.g., {c.get('example', '')})")
    lines += ["", f"Explanation: {explanation}", "Category:"]
    reply = client.complete(CompletionRequest(prompt="\n".join(lines),
                                              temperature=0.0))
    reply_lower = reply.lower()
    names = [c["name"] for c in categories]
    for name in names:
        if reply_lower.strip().strip(".") == name.lower():
            return name
    hits = [(reply_lower.find(n.lower()), n) for n in names
            if n.lower() in reply_lower]
    if hits:
        return min(hits)[1]
    return "unclassified"


def taxonomy_report(classifications: Mapping[str, str],
                    per_item_scores: Mapping[str, float]) -> list[dict]:
    """Per-category count, proportion, and mean score, ordered by frequency."""
    total = len(classifications)
    buckets: dict[str, list[float]] = {}
    for item_id, category in classifications.items():
        if item_id not in per_item_scores:
            raise ValueError(f"no score for classified item {item_id!r}")
        buckets.setdefault(category, []).append(per_item_scores[item_id])
    rows = [
        {
            "category": cat,
            "count": len(scores),
            "proportion": len(scores) / total,
            "mean_score": sum(scores) / len(scores),
        }
        for cat, scores in buckets.items()
    ]
    rows.sort(key=lambda r: (-r["count"], r["category"]))
    return rows


# ---------------------------------------------------------------------------
# Report rendering
# ---------------------------------------------------------------------------

def render_report_table(
    sent: Optional[ScoreReport] = None,
    ra: Optional[ScoreReport] = None,
    rqs: Sequence[RationaleQuality] = (),
    rating: Optional[float] = None,
    label: str = "model",
) -> str:
    """Render results in the standard wide layout: embedding @K columns and
    means, rationale-quality columns per tau, and the human rating."""
    headers: list[str] = ["Model"]
    values: list[str] = [label]

    def add(metric_name: str, report: Optional[ScoreReport]):
        if report is None:
            return
        for k in report.at_thresholds:
            headers.append(f"{metric_name}@{k:g}")
            values.append(f"{report.at_thresholds[k]:.3f}")
        headers.append(f"{metric_name} Mean")
        values.append(f"{report.mean:.3f}")

    add("SentBERT", sent)
    add("RA", ra)
    for rq in rqs:
        headers.append(f"RQ@{rq.tau:g}")
        values.append(f"{rq.S:.3f}")
    if rating is not None:
        headers.append("Rating")
        values.append(f"{rating:.3f}")

    widths = [max(len(h), len(v)) for h, v in zip(headers, values)]
    head = "  ".join(h.ljust(w) for h, w in zip(headers, widths))
    row = "  ".join(v.ljust(w) for v, w in zip(values, widths))
    rule = "-" * len(head)
    return f"{head}\n{rule}\n{row}\n"
