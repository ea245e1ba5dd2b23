"""Score population: classifier training files from annotations, pluggable
scorers, threshold filtering, and population-quality metrics."""

from __future__ import annotations

import json
import logging
import math
import random
import time
from dataclasses import dataclass
from typing import Iterable, Sequence

import requests

from .generation import Assertion, Relation

logger = logging.getLogger(__name__)

TYPICALITY_POSITIVE_MIN = 0.8  # annotated score must exceed this
TYPICALITY_NEGATIVE_MAX = 0.2  # annotated score must fall below this
DEFAULT_PLAUSIBILITY_THRESHOLD = 0.5


@dataclass(frozen=True)
class ScoredAssertion:
    assertion: Assertion
    plausibility: float
    typicality: float


@dataclass(frozen=True)
class LabeledExample:
    assertion_id: str
    text: str
    label: str  # positive | negative
    task: str


def derive_training_labels(task: str, labels: list[dict], sentences: dict[str, str]) -> list[LabeledExample]:
    """Turn exported annotation labels into classifier examples.

    Plausibility uses the majority label directly; typicality keeps only the
    confident ends of the scale (> 0.8 positive, < 0.2 negative).
    """
    examples = []
    for row in labels:
        aid = row["assertion_id"]
        if aid not in sentences:
            logger.warning("no sentence for labeled assertion %s; skipped", aid)
            continue
        if task == "plausibility":
            if "plausibility_label" not in row:
                continue
            label = "positive" if row["plausibility_label"] == "plausible" else "negative"
        elif task == "typicality":
            if "typicality_score" not in row:
                continue
            score = row["typicality_score"]
            if score > TYPICALITY_POSITIVE_MIN:
                label = "positive"
            elif score < TYPICALITY_NEGATIVE_MAX:
                label = "negative"
            else:
                continue
        else:
            raise ValueError(f"unknown task {task!r}")
        examples.append(LabeledExample(aid, sentences[aid], label, task))
    return examples


def split_train_dev(
    examples: Sequence[LabeledExample], ratio: float = 0.8, seed: int = 0
) -> tuple[list[LabeledExample], list[LabeledExample]]:
    """Deterministic label-stratified split. Minority classes contribute
    floor(count * ratio) examples to train; the largest class absorbs the
    remainder so the overall train size is round(ratio * n)."""
    by_label: dict[str, list[LabeledExample]] = {}
    for ex in examples:
        by_label.setdefault(ex.label, []).append(ex)
    total_train = round(ratio * len(examples))
    classes = sorted(by_label, key=lambda lbl: (len(by_label[lbl]), lbl))
    quota: dict[str, int] = {}
    assigned = 0
    for lbl in classes[:-1]:
        quota[lbl] = math.floor(len(by_label[lbl]) * ratio)
        assigned += quota[lbl]
    if classes:
        largest = classes[-1]
        quota[largest] = min(len(by_label[largest]), max(0, total_train - assigned))
    rng = random.Random(seed)
    train: list[LabeledExample] = []
    dev: list[LabeledExample] = []
    for lbl in classes:
        group = sorted(by_label[lbl], key=lambda ex: ex.assertion_id)
        rng.shuffle(group)
        train.extend(group[: quota[lbl]])
        dev.extend(group[quota[lbl] :])
    return train, dev


def write_examples_tsv(examples: Iterable[LabeledExample], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(f"{ex.text}\t{ex.label}\n")


class ScorerError(RuntimeError):
    pass


class FileScorer:
    """Scores read from scores.jsonl keyed by assertion_id."""

    def __init__(self, path: str):
        self.scores: dict[str, tuple[float, float]] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                obj = json.loads(line)
                self.scores[obj["assertion_id"]] = (float(obj["plausibility"]), float(obj["typicality"]))

    def score(self, assertions: Sequence[Assertion], sentences: dict[str, str]) -> dict[str, tuple[float, float]]:
        return {a.assertion_id: self.scores[a.assertion_id] for a in assertions if a.assertion_id in self.scores}


class HttpScorer:
    """Scores fetched from POST {endpoint}/v1/score {texts: [...]}."""

    def __init__(self, endpoint: str, batch_size: int = 64, retry_attempts: int = 3, timeout: float = 60.0):
        self.endpoint = endpoint.rstrip("/")
        self.batch_size = batch_size
        self.retry_attempts = retry_attempts
        self.timeout = timeout

    def _post(self, texts: list[str]) -> tuple[list[float], list[float]]:
        last_exc: Exception | None = None
        for attempt in range(self.retry_attempts):
            try:
                resp = requests.post(self.endpoint + "/v1/score", json={"texts": texts}, timeout=self.timeout)
                resp.raise_for_status()
                body = resp.json()
                plau, typ = body["plausibility"], body["typicality"]
                if len(plau) != len(texts) or len(typ) != len(texts):
                    raise ScorerError("score array length mismatch")
                return [float(p) for p in plau], [float(t) for t in typ]
            except (requests.RequestException, KeyError, ValueError, ScorerError) as exc:
                last_exc = exc
                if attempt + 1 < self.retry_attempts:
                    time.sleep(0.5 * (2**attempt))
        raise ScorerError(f"scoring failed after {self.retry_attempts} attempts: {last_exc}")

    def score(self, assertions: Sequence[Assertion], sentences: dict[str, str]) -> dict[str, tuple[float, float]]:
        out: dict[str, tuple[float, float]] = {}
        for start in range(0, len(assertions), self.batch_size):
            chunk = assertions[start : start + self.batch_size]
            texts = [sentences[a.assertion_id] for a in chunk]
            plau, typ = self._post(texts)
            for a, p, t in zip(chunk, plau, typ):
                out[a.assertion_id] = (p, t)
        return out


def score_assertions(scorer, assertions: Sequence[Assertion], sentences: dict[str, str]) -> list[ScoredAssertion]:
    """Attach both populated scores to every assertion. Assertions the scorer
    cannot cover are dropped with a warning; scorer failures abort the run."""
    scores = scorer.score(assertions, sentences)
    scored = []
    missing = 0
    for a in assertions:
        if a.assertion_id not in scores:
            missing += 1
            logger.warning("no score for assertion %s; dropped", a.assertion_id)
            continue
        p, t = scores[a.assertion_id]
        scored.append(ScoredAssertion(a, p, t))
    if missing:
        logger.warning("%d assertions dropped for missing scores", missing)
    return scored


def filter_by_threshold(
    scored: Iterable[ScoredAssertion], plau_t: float, typ_t: float | None = None
) -> list[ScoredAssertion]:
    """Keep assertions strictly above the plausibility threshold (and the
    typicality threshold when given)."""
    if not 0 <= plau_t <= 1 or (typ_t is not None and not 0 <= typ_t <= 1):
        raise ValueError("thresholds must lie in [0, 1]")
    out = []
    for s in scored:
        if s.plausibility > plau_t and (typ_t is None or s.typicality > typ_t):
            out.append(s)
    return out


PR_CUT_POINTS = (0.5, 0.7, 0.8, 0.9)


def pr_curve(predictions: Sequence[float], gold: Sequence[int]) -> list[tuple[float, float, float]]:
    """Precision/recall at every distinct prediction value plus the standard
    report cut points. A prediction counts as positive when score >= threshold;
    precision with no predicted positives is 1.0 by convention."""
    if len(predictions) != len(gold):
        raise ValueError("length mismatch")
    if any(g not in (0, 1) for g in gold):
        raise ValueError("gold labels must be binary")
    thresholds = sorted(set(predictions) | set(PR_CUT_POINTS))
    n_pos = sum(gold)
    curve = []
    for t in thresholds:
        tp = sum(1 for p, g in zip(predictions, gold) if p >= t and g == 1)
        fp = sum(1 for p, g in zip(predictions, gold) if p >= t and g == 0)
        precision = tp / (tp + fp) if tp + fp else 1.0
        recall = tp / n_pos if n_pos else 0.0
        curve.append((t, precision, recall))
    return curve


def _average_ranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1  # 1-based average rank across the tie run
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Spearman rank correlation with average ranks for ties, computed as the
    Pearson correlation of the rank vectors."""
    if len(xs) != len(ys):
        raise ValueError("length mismatch")
    if len(xs) < 2:
        raise ValueError("need at least 2 observations")
    rx = _average_ranks(xs)
    ry = _average_ranks(ys)
    n = len(rx)
    mx = sum(rx) / n
    my = sum(ry) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    vx = sum((a - mx) ** 2 for a in rx)
    vy = sum((b - my) ** 2 for b in ry)
    if vx == 0 or vy == 0:
        raise ValueError("zero rank variance; correlation undefined")
    return cov / math.sqrt(vx * vy)


# 50 common function words used to isolate content tokens for novelty.
STOP_WORDS = frozenset(
    """a an the and or but if then of in on at to for with by from as is are was
    were be been being it its they them their he she his her this that these
    those there here can could will would may might do does did not no so such
    about into over""".split()
)


def _content_tokens(text: str) -> set[str]:
    tokens = []
    for tok in text.lower().split():
        tok = tok.strip(".,!?;:\"'()[]")
        if tok and tok not in STOP_WORDS:
            tokens.append(tok)
    return set(tokens)


def _title_tokens(title: str) -> set[str]:
    return {tok.strip(".,!?;:\"'()[]").lower() for tok in title.split()} - {""}


def novelty_ratio(scored: Sequence[ScoredAssertion], pair_titles: dict[str, tuple[str, str]]) -> float:
    """Fraction of tails contributing at least one content token absent from
    the union of the pair's title tokens."""
    if not scored:
        return 0.0
    novel = 0
    for s in scored:
        t1, t2 = pair_titles[s.assertion.pair_id]
        titles = _title_tokens(t1) | _title_tokens(t2)
        content = _content_tokens(s.assertion.tail)
        if not content.issubset(titles):
            novel += 1
    return novel / len(scored)


def write_scored(scored: Iterable[ScoredAssertion], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in scored:
            fh.write(
                json.dumps(
                    {
                        "assertion_id": s.assertion.assertion_id,
                        "pair_id": s.assertion.pair_id,
                        "relation": s.assertion.relation.value,
                        "tail": s.assertion.tail,
                        "plausibility": s.plausibility,
                        "typicality": s.typicality,
                    }
                )
                + "\n"
            )


def read_scored(path: str) -> list[ScoredAssertion]:
    from .generation import assertion_id_for

    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            relation = Relation(obj["relation"])
            assertion = Assertion(
                assertion_id=obj.get("assertion_id") or assertion_id_for(obj["pair_id"], relation, obj["tail"]),
                pair_id=obj["pair_id"],
                relation=relation,
                tail=obj["tail"],
            )
            out.append(ScoredAssertion(assertion, float(obj["plausibility"]), float(obj["typicality"])))
    return out
