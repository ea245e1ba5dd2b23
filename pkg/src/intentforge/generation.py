"""Prompt rendering, text-generation client, and post-processing of raw
generations into candidate assertion tails."""

from __future__ import annotations

import hashlib
import json
import logging
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator

import requests

from .ingest import CoBuyPair

logger = logging.getLogger(__name__)


class RelationGroup(str, Enum):
    OPEN = "Open"
    ITEM = "Item"
    FUNCTION = "Function"
    HUMAN = "Human"


class Relation(str, Enum):
    Open = "Open"
    HasA = "HasA"
    HasProperty = "HasProperty"
    RelatedTo = "RelatedTo"
    SimilarTo = "SimilarTo"
    PartOf = "PartOf"
    IsA = "IsA"
    MadeOf = "MadeOf"
    CreatedBy = "CreatedBy"
    DistinctFrom = "DistinctFrom"
    DerivedFrom = "DerivedFrom"
    UsedFor = "UsedFor"
    CapableOf = "CapableOf"
    SymbolOf = "SymbolOf"
    MannerOf = "MannerOf"
    DefinedAs = "DefinedAs"
    Result = "Result"
    Cause = "Cause"
    CauseDesire = "CauseDesire"

    @property
    def group(self) -> RelationGroup:
        return _GROUPS[self]

    @property
    def continuation(self) -> str:
        return CONTINUATIONS[self]


# Prompt continuation appended after "... because"; Open appends nothing.
CONTINUATIONS: dict[Relation, str] = {
    Relation.Open: "",
    Relation.HasA: "they both have",
    Relation.HasProperty: "they both have a property of",
    Relation.RelatedTo: "they both are related to",
    Relation.SimilarTo: "they both are similar to",
    Relation.PartOf: "they both are a part of",
    Relation.IsA: "they both are a type of",
    Relation.MadeOf: "they both are made of",
    Relation.CreatedBy: "they are created by",
    Relation.DistinctFrom: "they are distinct from",
    Relation.DerivedFrom: "they are derived from",
    Relation.UsedFor: "they are both used for",
    Relation.CapableOf: "they both are capable of",
    Relation.SymbolOf: "they both are symbols of",
    Relation.MannerOf: "they both are a manner of",
    Relation.DefinedAs: "they both are defined as",
    Relation.Result: "as a result, the person",
    Relation.Cause: "the person wants to",
    Relation.CauseDesire: "the person wants his",
}

_GROUPS: dict[Relation, RelationGroup] = {
    Relation.Open: RelationGroup.OPEN,
    **{
        r: RelationGroup.ITEM
        for r in (
            Relation.HasA,
            Relation.HasProperty,
            Relation.RelatedTo,
            Relation.SimilarTo,
            Relation.PartOf,
            Relation.IsA,
            Relation.MadeOf,
            Relation.CreatedBy,
            Relation.DistinctFrom,
            Relation.DerivedFrom,
        )
    },
    **{
        r: RelationGroup.FUNCTION
        for r in (
            Relation.UsedFor,
            Relation.CapableOf,
            Relation.SymbolOf,
            Relation.MannerOf,
            Relation.DefinedAs,
        )
    },
    **{r: RelationGroup.HUMAN for r in (Relation.Result, Relation.Cause, Relation.CauseDesire)},
}


@dataclass
class GenerationConfig:
    endpoint: str = ""
    max_tokens: int = 100
    top_p: float = 0.9
    samples_per_prompt: int = 3
    max_in_flight: int = 4
    retry_attempts: int = 3
    retry_base_delay: float = 0.5
    timeout: float = 30.0


@dataclass(frozen=True)
class Assertion:
    assertion_id: str
    pair_id: str
    relation: Relation
    tail: str
    raw: str = ""


def assertion_id_for(pair_id: str, relation: Relation, tail: str) -> str:
    digest = hashlib.sha1(f"{pair_id}\x1f{relation.value}\x1f{tail}".encode("utf-8")).hexdigest()
    return digest[:16]


def render_prompt(pair: CoBuyPair, relation: Relation) -> str:
    """Build the generation prompt for a pair and relation. Single spaces
    throughout, no trailing space; Open appends nothing after "because"."""
    base = f"A user bought {_squash(pair.item1.title)} and {_squash(pair.item2.title)} because"
    cont = CONTINUATIONS[relation]
    return f"{base} {cont}" if cont else base


def _squash(text: str) -> str:
    return " ".join(text.split())


class GenerationError(RuntimeError):
    pass


def generate(prompt: str, cfg: GenerationConfig, session: requests.Session | None = None) -> list[str]:
    """Request ``cfg.samples_per_prompt`` completions from the generation
    service. Retries with exponential backoff before giving up."""
    sess = session or requests
    payload = {"prompt": prompt, "max_tokens": cfg.max_tokens, "top_p": cfg.top_p, "n": cfg.samples_per_prompt}
    url = cfg.endpoint.rstrip("/") + "/v1/generate"
    last_exc: Exception | None = None
    for attempt in range(cfg.retry_attempts):
        try:
            resp = sess.post(url, json=payload, timeout=cfg.timeout)
            resp.raise_for_status()
            texts = resp.json()["texts"]
            if len(texts) != cfg.samples_per_prompt:
                raise GenerationError(f"expected {cfg.samples_per_prompt} texts, got {len(texts)}")
            return [str(t) for t in texts]
        except (requests.RequestException, KeyError, ValueError, GenerationError) as exc:
            last_exc = exc
            if attempt + 1 < cfg.retry_attempts:
                delay = cfg.retry_base_delay * (2**attempt)
                logger.warning("generation attempt %d failed (%s); retrying in %.1fs", attempt + 1, exc, delay)
                time.sleep(delay)
    raise GenerationError(f"generation failed after {cfg.retry_attempts} attempts: {last_exc}")


# Terminators that end a sentence; a terminator-free fragment of >=3 tokens
# running to end-of-text also counts as complete.
_TERMINATORS = ".!?"
_ABBREVIATIONS = {
    "mr.", "mrs.", "ms.", "dr.", "prof.", "st.", "jr.", "sr.", "vs.", "etc.",
    "e.g.", "i.e.", "inc.", "ltd.", "co.", "corp.", "oz.", "pcs.", "approx.",
    "no.", "vol.", "ft.", "in.", "cm.", "mm.", "u.s.", "u.k.",
}
_MIN_FRAGMENT_TOKENS = 3


def _first_sentence(text: str) -> str | None:
    """Return the first complete sentence of ``text``, or None when the text
    holds no complete sentence."""
    tokens = text.split()
    if not tokens:
        return None
    out: list[str] = []
    for tok in tokens:
        out.append(tok)
        if tok[-1] in _TERMINATORS and tok.lower() not in _ABBREVIATIONS:
            # Guard single-letter initials like "J." mid-name.
            if not (len(tok) == 2 and tok[0].isupper() and tok[1] == "."):
                return " ".join(out)
    if len(tokens) >= _MIN_FRAGMENT_TOKENS:
        return " ".join(tokens)
    return None


def _strip_prompt_echo(raw: str, prompt: str) -> str:
    """Remove the longest echoed run of prompt tokens from the start of the
    raw generation. Matches whole tokens so ordinary tails are untouched."""
    raw_tokens = raw.split()
    prompt_tokens = prompt.split()
    best = 0
    limit = min(len(raw_tokens), len(prompt_tokens))
    for k in range(1, limit + 1):
        if raw_tokens[:k] == prompt_tokens[-k:]:
            best = k
    return " ".join(raw_tokens[best:])


def postprocess(raw: str, relation: Relation, prompt: str | None = None) -> str | None:
    """Normalize a raw generation into an assertion tail: strip the echoed
    prompt when the rendered prompt is supplied, then keep the first complete
    sentence. Returns None when no complete sentence survives."""
    text = _squash(raw)
    if prompt is not None:
        text = _strip_prompt_echo(text, _squash(prompt))
    return _first_sentence(text)


def dedup_corpus(assertions: Iterable[Assertion]) -> Iterator[Assertion]:
    """Drop exact (pair_id, relation, tail) duplicates, keeping first-seen order."""
    seen: set[tuple[str, str, str]] = set()
    for a in assertions:
        key = (a.pair_id, a.relation.value, a.tail)
        if key in seen:
            continue
        seen.add(key)
        yield a


@dataclass
class GenerationRecord:
    assertion_id: str | None
    pair_id: str
    relation: Relation
    prompt: str
    raw: str
    tail: str | None

    def to_json(self) -> str:
        return json.dumps(
            {
                "assertion_id": self.assertion_id,
                "pair_id": self.pair_id,
                "relation": self.relation.value,
                "prompt": self.prompt,
                "raw": self.raw,
                "tail": self.tail,
            }
        )


def run_generation(
    pairs: list[CoBuyPair],
    relations: list[Relation],
    cfg: GenerationConfig,
    session: requests.Session | None = None,
) -> tuple[list[GenerationRecord], list[dict]]:
    """Generate raw candidates for every (pair, relation), post-process, and
    return records in (pair_id, relation, sample index) order plus a ledger
    of failed pair-relations."""
    tasks = [(pair, rel) for pair in pairs for rel in relations]
    failures: list[dict] = []
    results: dict[tuple[str, str], list[str]] = {}

    def fetch(task: tuple[CoBuyPair, Relation]) -> tuple[tuple[str, str], list[str] | None, str]:
        pair, rel = task
        prompt = render_prompt(pair, rel)
        try:
            return (pair.pair_id, rel.value), generate(prompt, cfg, session=session), prompt
        except GenerationError as exc:
            logger.warning("pair %s relation %s failed: %s", pair.pair_id, rel.value, exc)
            failures.append({"pair_id": pair.pair_id, "relation": rel.value, "error": str(exc)})
            return (pair.pair_id, rel.value), None, prompt

    prompts: dict[tuple[str, str], str] = {}
    with ThreadPoolExecutor(max_workers=max(1, cfg.max_in_flight)) as pool:
        for key, raws, prompt in pool.map(fetch, tasks):
            prompts[key] = prompt
            if raws is not None:
                results[key] = raws

    records: list[GenerationRecord] = []
    for pair in pairs:
        for rel in relations:
            key = (pair.pair_id, rel.value)
            if key not in results:
                continue
            prompt = prompts[key]
            for raw in results[key]:
                tail = postprocess(raw, rel, prompt=prompt)
                records.append(
                    GenerationRecord(
                        assertion_id=assertion_id_for(pair.pair_id, rel, tail) if tail else None,
                        pair_id=pair.pair_id,
                        relation=rel,
                        prompt=prompt,
                        raw=raw,
                        tail=tail,
                    )
                )
    return records, failures


def assertions_from_records(records: Iterable[GenerationRecord]) -> Iterator[Assertion]:
    """Surviving tails as deduplicated assertions."""
    pending = (
        Assertion(r.assertion_id, r.pair_id, r.relation, r.tail, raw=r.raw)
        for r in records
        if r.tail is not None and r.assertion_id is not None
    )
    return dedup_corpus(pending)


def read_generation_records(path: str) -> list[GenerationRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            records.append(
                GenerationRecord(
                    assertion_id=obj["assertion_id"],
                    pair_id=obj["pair_id"],
                    relation=Relation(obj["relation"]),
                    prompt=obj["prompt"],
                    raw=obj["raw"],
                    tail=obj["tail"],
                )
            )
    return records
