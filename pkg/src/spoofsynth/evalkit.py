"""
Balanced batch schedules and presentation-attack detection metrics.

Scores are "liveness" scores: a sample is classified live when
``score >= threshold``. FAR is the fraction of spoofs accepted as live, FRR
the fraction of live samples rejected.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from decimal import ROUND_HALF_UP, Decimal
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import EmptyPool, IndivisibleRatio, MissingAttackType, NonLiveExternal, OneClassOnly

ATTACK_TYPES = ("none", "plane_print", "bent_print", "replay")
SPLITS = ("train", "dev", "test")


@dataclass(frozen=True)
class ScoreRecord:
    sample_id: str
    score: float
    truth: str  # live | spoof
    attack_type: str = "none"
    split: str = "test"

    def __post_init__(self):
        if self.truth not in ("live", "spoof"):
            raise ValueError(f"truth must be live or spoof, got {self.truth!r}")
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")
        attack = self.attack_type or ("none" if self.truth == "live" else "")
        if attack and attack not in ATTACK_TYPES:
            raise ValueError(f"{self.sample_id}: unknown attack type {attack!r}")
        # an empty attack type on a spoof is tolerated here; pad_metrics rejects it
        if (attack == "none") != (self.truth == "live") and attack:
            raise ValueError(f"{self.sample_id}: attack_type 'none' is reserved for live samples")
        object.__setattr__(self, "attack_type", attack)


def read_scores_csv(path) -> List[ScoreRecord]:
    """Read ``sample_id,score,truth,attack_type,split`` rows."""
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            ScoreRecord(row["sample_id"], float(row["score"]), row["truth"].strip(),
                        (row.get("attack_type") or "").strip(), (row.get("split") or "test").strip())
            for row in csv.DictReader(fh)
        ]


def _split_scores(scores) -> Tuple[np.ndarray, np.ndarray]:
    live = np.array([r.score for r in scores if r.truth == "live"], dtype=np.float64)
    spoof = np.array([r.score for r in scores if r.truth == "spoof"], dtype=np.float64)
    if live.size == 0 or spoof.size == 0:
        raise OneClassOnly(f"need both classes, got {live.size} live and {spoof.size} spoof")
    return live, spoof


def rates_at(scores, threshold: float) -> Tuple[float, float]:
    """``(FAR, FRR)`` at one threshold."""
    live, spoof = _split_scores(scores)
    return float(np.mean(spoof >= threshold)), float(np.mean(live < threshold))


def far_frr_curve(scores) -> List[Tuple[float, float, float]]:
    """
    ``(threshold, FAR, FRR)`` at every distinct score plus a ``+inf``
    sentinel. The lowest score already accepts everyone, so no low sentinel
    is needed: the curve runs from (1, 0) to (0, 1).
    """
    live, spoof = _split_scores(scores)
    thresholds = np.append(np.unique(np.concatenate([live, spoof])), np.inf)
    live_sorted, spoof_sorted = np.sort(live), np.sort(spoof)
    # counts strictly below each threshold
    spoof_below = np.searchsorted(spoof_sorted, thresholds, side="left")
    live_below = np.searchsorted(live_sorted, thresholds, side="left")
    far = (spoof.size - spoof_below) / spoof.size
    frr = live_below / live.size
    return [(float(t), float(a), float(r)) for t, a, r in zip(thresholds, far, frr)]


def eer(scores) -> Tuple[float, float]:
    """
    Equal error rate and its threshold.

    Picks the threshold minimising ``|FAR - FRR|`` (the lowest on ties) and
    reports ``(FAR + FRR) / 2`` there.
    """
    curve = far_frr_curve(scores)
    best = min(curve, key=lambda p: (abs(p[1] - p[2]), p[0]))
    return (best[1] + best[2]) / 2.0, best[0]


def hter(dev_scores, test_scores) -> float:
    """Half total error rate on ``test_scores`` at the dev-set EER threshold."""
    _, t = eer(dev_scores)
    far, frr = rates_at(test_scores, t)
    return (far + frr) / 2.0


def acer_from_rates(apcer: float, bpcer: float) -> float:
    return (apcer + bpcer) / 2.0


def round_half_up(value: float, places: int = 2) -> float:
    """Decimal rounding of the shortest repr, as tables report percentages."""
    q = Decimal(1).scaleb(-places)
    return float(Decimal(repr(value)).quantize(q, rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class PADMetrics:
    apcer_per_type: Dict[str, float]
    apcer: float
    bpcer: float
    acer: float
    top1: float
    threshold: float

    def as_percent(self, places: int = 2) -> dict:
        pct = lambda v: round_half_up(100.0 * v, places)
        return {
            "apcer_per_type": {k: pct(v) for k, v in self.apcer_per_type.items()},
            "apcer": pct(self.apcer),
            "bpcer": pct(self.bpcer),
            "acer": pct(self.acer),
            "top1": pct(self.top1),
            "threshold": self.threshold,
        }


def pad_metrics(scores, threshold: float) -> PADMetrics:
    """
    APCER per attack type and overall (the worst type), BPCER, ACER and
    thresholded accuracy.
    """
    live, spoof = _split_scores(scores)
    per_type: Dict[str, List[float]] = {}
    for r in scores:
        if r.truth != "spoof":
            continue
        if not r.attack_type or r.attack_type == "none":
            raise MissingAttackType(f"spoof sample {r.sample_id} has no attack type")
        per_type.setdefault(r.attack_type, []).append(r.score)
    apcer_per_type = {k: float(np.mean(np.asarray(v) >= threshold)) for k, v in sorted(per_type.items())}
    apcer = max(apcer_per_type.values())
    bpcer = float(np.mean(live < threshold))
    correct = int(np.sum(live >= threshold) + np.sum(spoof < threshold))
    return PADMetrics(apcer_per_type, apcer, bpcer, acer_from_rates(apcer, bpcer),
                      correct / (live.size + spoof.size), float(threshold))


# ---------------------------------------------------------------- schedules

@dataclass(frozen=True)
class BatchSchedule:
    batches: List[List[Tuple[str, str]]]
    ratio: Tuple[int, int]  # (live_k, spoof_k) per batch
    batch_size: int
    epochs: int = 1

    def batches_per_epoch(self) -> int:
        return len(self.batches) // max(self.epochs, 1)


def split_ratio(batch_size: int, ratio: Tuple[int, int]) -> Tuple[int, int]:
    """``(live_k, spoof_k)`` for ``batch_size`` at ``live:spoof`` ratio."""
    rl, rs = (int(r) for r in ratio)
    if rl <= 0 or rs <= 0 or batch_size <= 0:
        raise IndivisibleRatio(f"ratio {rl}:{rs} and batch {batch_size} must be positive")
    if (batch_size * rl) % (rl + rs):
        raise IndivisibleRatio(f"batch {batch_size} cannot be split {rl}:{rs} exactly")
    live_k = batch_size * rl // (rl + rs)
    return live_k, batch_size - live_k


def parse_ratio(text: str) -> Tuple[int, int]:
    a, b = text.split(":")
    return int(a), int(b)


class _Stream:
    """Endless draw from a pool: each pass is a fresh permutation."""

    def __init__(self, items: Sequence[str], rng: np.random.Generator):
        self.items = list(items)
        self.rng = rng
        self.order: List[int] = []

    def take(self, k: int) -> List[str]:
        out = []
        while len(out) < k:
            if not self.order:
                self.order = list(self.rng.permutation(len(self.items)))
            out.append(self.items[self.order.pop()])
        return out


def make_schedule(live_ids: Sequence[str], spoof_ids: Sequence[str], batch_size: int = 64,
                  ratio: Tuple[int, int] = (1, 3), epochs: int = 1, seed: int = 0,
                  shuffle_within_batch: bool = True) -> BatchSchedule:
    """
    Mini-batches with a fixed live/spoof split.

    Each epoch restarts both pools with a fresh shuffle and runs enough
    batches to see the larger pool (relative to its quota) once; the other
    pool is reshuffled and repeated as it runs out.
    """
    live_k, spoof_k = split_ratio(batch_size, ratio)
    if not live_ids or not spoof_ids:
        raise EmptyPool(f"both pools must be non-empty, got {len(live_ids)} live and {len(spoof_ids)} spoof")
    rng = np.random.default_rng(seed)
    per_epoch = max(math.ceil(len(live_ids) / live_k), math.ceil(len(spoof_ids) / spoof_k))
    batches = []
    for _ in range(int(epochs)):
        live_s, spoof_s = _Stream(live_ids, rng), _Stream(spoof_ids, rng)
        for _ in range(per_epoch):
            batch = [(i, "live") for i in live_s.take(live_k)] + [(i, "spoof") for i in spoof_s.take(spoof_k)]
            if shuffle_within_batch:
                batch = [batch[j] for j in rng.permutation(len(batch))]
            batches.append(batch)
    return BatchSchedule(batches, (live_k, spoof_k), batch_size, int(epochs))


def merge_external_live(base: Iterable, external: Iterable) -> list:
    """Append external live records, tagged ``origin="external"``."""
    ext = list(external)
    for rec in ext:
        if rec.label != "live":
            raise NonLiveExternal(f"external record {rec.source_path} is labelled {rec.label!r}")
    return list(base) + [replace(rec, origin="external") for rec in ext]


def live_spoof_ids(records) -> Tuple[List[str], List[str]]:
    """Split manifest records into live and spoof sample ids (their output paths)."""
    live, spoof = [], []
    for rec in records:
        sid = rec.output_path or rec.source_path
        (live if rec.label == "live" else spoof).append(sid)
    return live, spoof
