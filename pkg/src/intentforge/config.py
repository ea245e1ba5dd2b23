"""Pipeline configuration: an INI file with one section per stage group.
Unknown sections or keys are rejected before any stage runs."""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field

from .generation import Relation


class ConfigError(ValueError):
    pass


_SCHEMA: dict[str, set[str]] = {
    "paths": {
        "workdir",
        "items",
        "cobuy",
        "concepts",
        "interactions",
        "parses",
        "parse_index",
        "scores",
        "tail_vectors",
        "votes",
        "labels",
    },
    "ingest": {"categories", "n_pairs", "min_degree", "seed"},
    "generation": {"endpoint", "max_tokens", "top_p", "samples_per_prompt", "max_in_flight", "relations"},
    "annotation": {"host", "port", "plausibility_votes", "typicality_votes", "typicality_pool_threshold"},
    "population": {"plau_threshold", "typ_threshold", "scorer_endpoint", "train_ratio", "seed"},
    "mining": {"min_support", "allow_list", "deny_list"},
    "conceptualize": {"top_k", "min_weight"},
    "embed": {"dim", "margin", "lr", "epochs", "negatives", "seed", "tails_trainable"},
    "receval": {"seed", "factors", "lr", "reg", "epochs", "ablation_seeds", "filters"},
}


@dataclass
class PipelineConfig:
    workdir: str
    items: str | None = None
    cobuy: str | None = None
    concepts: str | None = None
    interactions: str | None = None
    parses: str | None = None
    parse_index: str | None = None
    scores: str | None = None
    tail_vectors: str | None = None
    votes: str | None = None
    labels: str | None = None

    categories: list[str] = field(default_factory=list)
    n_pairs: int = 100
    min_degree: int = 5
    ingest_seed: int = 0

    endpoint: str = ""
    max_tokens: int = 100
    top_p: float = 0.9
    samples_per_prompt: int = 3
    max_in_flight: int = 4
    relations: list[Relation] = field(default_factory=lambda: list(Relation))

    host: str = "127.0.0.1"
    port: int = 8710
    plausibility_votes: int = 3
    typicality_votes: int = 5
    typicality_pool_threshold: float = 0.5

    plau_threshold: float = 0.5
    typ_threshold: float | None = None
    scorer_endpoint: str | None = None
    train_ratio: float = 0.8
    population_seed: int = 0

    min_support: int | None = None
    allow_list: str | None = None
    deny_list: str | None = None

    top_k: int = 10
    min_weight: float = 0.01

    embed_dim: int = 64
    embed_margin: float = 1.0
    embed_lr: float = 0.01
    embed_epochs: int = 100
    embed_negatives: int = 1
    embed_seed: int = 0
    tails_trainable: bool = True

    receval_seed: int = 0
    predictor_factors: int = 8
    predictor_lr: float = 0.02
    predictor_reg: float = 0.05
    predictor_epochs: int = 30
    ablation_seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    filters: list[tuple[float, float | None]] = field(
        default_factory=lambda: [(0.5, None), (0.5, 0.5), (0.9, None), (0.9, 0.9)]
    )

    # paths derived inside the workdir
    def path(self, name: str) -> str:
        return os.path.join(self.workdir, name)

    @property
    def pairs_path(self) -> str:
        return self.path("pairs.jsonl")

    @property
    def generations_path(self) -> str:
        return self.path("generations.jsonl")

    @property
    def failures_path(self) -> str:
        return self.path("failures.jsonl")

    @property
    def votes_path(self) -> str:
        return self.votes or self.path("votes.jsonl")

    @property
    def labels_path(self) -> str:
        return self.labels or self.path("labels.jsonl")

    @property
    def scored_path(self) -> str:
        return self.path("scored.jsonl")

    @property
    def filtered_path(self) -> str:
        return self.path("filtered.jsonl")

    @property
    def patterns_path(self) -> str:
        return self.path("patterns.jsonl")

    @property
    def assignments_path(self) -> str:
        return self.path("assignments.jsonl")

    @property
    def abstracts_path(self) -> str:
        return self.path("abstract.jsonl")

    @property
    def kg_dir(self) -> str:
        return self.path("kg")

    @property
    def tails_path(self) -> str:
        return self.path("tails.tsv")

    @property
    def item_vectors_path(self) -> str:
        return self.path("item_vectors.tsv")

    @property
    def ablation_path(self) -> str:
        return self.path("ablation.json")

    @property
    def report_path(self) -> str:
        return self.path("report.csv")

    @property
    def manifest_dir(self) -> str:
        return self.path("manifests")


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {raw!r}")


def _parse_filters(raw: str) -> list[tuple[float, float | None]]:
    out = []
    for chunk in raw.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        plau, _, typ = chunk.partition(":")
        out.append((float(plau), None if typ in ("", "-", "none") else float(typ)))
    return out


def load_config(path: str) -> PipelineConfig:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    parser.read(path)

    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")

    if "paths" not in parser or "workdir" not in parser["paths"]:
        raise ConfigError("config must set [paths] workdir")

    cfg = PipelineConfig(workdir=parser["paths"]["workdir"])
    paths = parser["paths"]
    for key in ("items", "cobuy", "concepts", "interactions", "parses", "parse_index",
                "scores", "tail_vectors", "votes", "labels"):
        if key in paths:
            setattr(cfg, key, paths[key])

    try:
        if "ingest" in parser:
            sec = parser["ingest"]
            if "categories" in sec:
                cfg.categories = [c.strip() for c in sec["categories"].split(",") if c.strip()]
            cfg.n_pairs = sec.getint("n_pairs", cfg.n_pairs)
            cfg.min_degree = sec.getint("min_degree", cfg.min_degree)
            cfg.ingest_seed = sec.getint("seed", cfg.ingest_seed)
        if "generation" in parser:
            sec = parser["generation"]
            cfg.endpoint = sec.get("endpoint", cfg.endpoint)
            cfg.max_tokens = sec.getint("max_tokens", cfg.max_tokens)
            cfg.top_p = sec.getfloat("top_p", cfg.top_p)
            cfg.samples_per_prompt = sec.getint("samples_per_prompt", cfg.samples_per_prompt)
            cfg.max_in_flight = sec.getint("max_in_flight", cfg.max_in_flight)
            if "relations" in sec:
                try:
                    cfg.relations = [Relation(name.strip()) for name in sec["relations"].split(",") if name.strip()]
                except ValueError as exc:
                    raise ConfigError(f"unknown relation in [generation] relations: {exc}")
        if "annotation" in parser:
            sec = parser["annotation"]
            cfg.host = sec.get("host", cfg.host)
            cfg.port = sec.getint("port", cfg.port)
            cfg.plausibility_votes = sec.getint("plausibility_votes", cfg.plausibility_votes)
            cfg.typicality_votes = sec.getint("typicality_votes", cfg.typicality_votes)
            cfg.typicality_pool_threshold = sec.getfloat("typicality_pool_threshold", cfg.typicality_pool_threshold)
        if "population" in parser:
            sec = parser["population"]
            cfg.plau_threshold = sec.getfloat("plau_threshold", cfg.plau_threshold)
            if "typ_threshold" in sec:
                cfg.typ_threshold = sec.getfloat("typ_threshold")
            cfg.scorer_endpoint = sec.get("scorer_endpoint", cfg.scorer_endpoint)
            cfg.train_ratio = sec.getfloat("train_ratio", cfg.train_ratio)
            cfg.population_seed = sec.getint("seed", cfg.population_seed)
        if "mining" in parser:
            sec = parser["mining"]
            if "min_support" in sec:
                cfg.min_support = sec.getint("min_support")
            cfg.allow_list = sec.get("allow_list", cfg.allow_list)
            cfg.deny_list = sec.get("deny_list", cfg.deny_list)
        if "conceptualize" in parser:
            sec = parser["conceptualize"]
            cfg.top_k = sec.getint("top_k", cfg.top_k)
            cfg.min_weight = sec.getfloat("min_weight", cfg.min_weight)
        if "embed" in parser:
            sec = parser["embed"]
            cfg.embed_dim = sec.getint("dim", cfg.embed_dim)
            cfg.embed_margin = sec.getfloat("margin", cfg.embed_margin)
            cfg.embed_lr = sec.getfloat("lr", cfg.embed_lr)
            cfg.embed_epochs = sec.getint("epochs", cfg.embed_epochs)
            cfg.embed_negatives = sec.getint("negatives", cfg.embed_negatives)
            cfg.embed_seed = sec.getint("seed", cfg.embed_seed)
            if "tails_trainable" in sec:
                cfg.tails_trainable = _parse_bool(sec["tails_trainable"])
        if "receval" in parser:
            sec = parser["receval"]
            cfg.receval_seed = sec.getint("seed", cfg.receval_seed)
            cfg.predictor_factors = sec.getint("factors", cfg.predictor_factors)
            cfg.predictor_lr = sec.getfloat("lr", cfg.predictor_lr)
            cfg.predictor_reg = sec.getfloat("reg", cfg.predictor_reg)
            cfg.predictor_epochs = sec.getint("epochs", cfg.predictor_epochs)
            if "ablation_seeds" in sec:
                cfg.ablation_seeds = tuple(int(s) for s in sec["ablation_seeds"].split(",") if s.strip())
            if "filters" in sec:
                cfg.filters = _parse_filters(sec["filters"])
    except (ValueError, ConfigError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid config value: {exc}") from exc

    _validate(cfg)
    return cfg


def _validate(cfg: PipelineConfig) -> None:
    if not 0 <= cfg.plau_threshold <= 1:
        raise ConfigError("plau_threshold must lie in [0, 1]")
    if cfg.typ_threshold is not None and not 0 <= cfg.typ_threshold <= 1:
        raise ConfigError("typ_threshold must lie in [0, 1]")
    if not 0 < cfg.top_p <= 1:
        raise ConfigError("top_p must lie in (0, 1]")
    if cfg.samples_per_prompt < 1:
        raise ConfigError("samples_per_prompt must be >= 1")
    if cfg.embed_margin <= 0:
        raise ConfigError("embed margin must be > 0")
    if not 0 < cfg.train_ratio < 1:
        raise ConfigError("train_ratio must lie in (0, 1)")
    if cfg.top_k < 1:
        raise ConfigError("top_k must be >= 1")
    if cfg.plausibility_votes % 2 == 0:
        raise ConfigError("plausibility_votes must be odd (majority voting)")
