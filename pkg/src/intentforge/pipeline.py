"""Stage orchestration: each stage declares its inputs, writes outputs
atomically, and records input digests in a manifest so unchanged re-runs are
skipped."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import shutil
import tempfile
from dataclasses import dataclass

from . import annotation, conceptualize, embed, generation, ingest, kgstore, mining, population, receval
from .config import PipelineConfig
from .deptree import read_conllu_file, read_parse_index

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_MISSING_INPUT = 2
EXIT_VALIDATION = 3

STAGES = (
    "ingest",
    "generate",
    "annotate-serve",
    "populate",
    "mine",
    "conceptualize",
    "assemble",
    "embed",
    "receval",
    "report",
)


class MissingInput(RuntimeError):
    def __init__(self, path: str):
        super().__init__(f"missing input: {path}")
        self.path = path


def _digest(path: str) -> str:
    h = hashlib.sha256()
    if os.path.isdir(path):
        for name in sorted(os.listdir(path)):
            sub = os.path.join(path, name)
            if os.path.isfile(sub):
                h.update(name.encode())
                h.update(_digest(sub).encode())
        return h.hexdigest()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _params_digest(params: dict) -> str:
    return hashlib.sha256(json.dumps(params, sort_keys=True, default=str).encode()).hexdigest()


def _atomic_write(path: str, writer) -> None:
    """Write via a sibling temp file and rename into place."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


class StageRunner:
    def __init__(self, cfg: PipelineConfig, force: bool = False):
        self.cfg = cfg
        self.force = force
        os.makedirs(cfg.workdir, exist_ok=True)
        os.makedirs(cfg.manifest_dir, exist_ok=True)

    # -- manifest bookkeeping -------------------------------------------------

    def _manifest_path(self, stage: str) -> str:
        return os.path.join(self.cfg.manifest_dir, f"{stage}.json")

    def _require(self, paths: list[str | None]) -> list[str]:
        resolved = []
        for p in paths:
            if p is None or not os.path.exists(p):
                raise MissingInput(p or "<unset path>")
            resolved.append(p)
        return resolved

    def _up_to_date(self, stage: str, inputs: list[str], params: dict, outputs: list[str]) -> bool:
        if self.force:
            return False
        path = self._manifest_path(stage)
        if not os.path.exists(path):
            return False
        try:
            manifest = json.load(open(path, encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            return False
        if manifest.get("params_digest") != _params_digest(params):
            return False
        if set(manifest.get("inputs", {})) != set(inputs):
            return False
        for p, digest in manifest["inputs"].items():
            if not os.path.exists(p) or _digest(p) != digest:
                return False
        return all(os.path.exists(o) for o in outputs)

    def _record(self, stage: str, inputs: list[str], params: dict, outputs: list[str]) -> None:
        manifest = {
            "stage": stage,
            "inputs": {p: _digest(p) for p in inputs},
            "params_digest": _params_digest(params),
            "outputs": outputs,
        }
        _atomic_write(self._manifest_path(stage), lambda tmp: json.dump(manifest, open(tmp, "w"), indent=2))

    # -- stages ---------------------------------------------------------------

    def run(self, stage: str) -> int:
        handler = {
            "ingest": self.stage_ingest,
            "generate": self.stage_generate,
            "annotate-serve": self.stage_annotate_serve,
            "populate": self.stage_populate,
            "mine": self.stage_mine,
            "conceptualize": self.stage_conceptualize,
            "assemble": self.stage_assemble,
            "embed": self.stage_embed,
            "receval": self.stage_receval,
            "report": self.stage_report,
        }.get(stage)
        if handler is None:
            raise ValueError(f"unknown stage {stage!r}; expected one of {', '.join(STAGES)}")
        try:
            handler()
        except MissingInput as exc:
            logger.error("%s", exc)
            print(f"error: {exc}")
            return EXIT_MISSING_INPUT
        return EXIT_OK

    def stage_ingest(self) -> None:
        cfg = self.cfg
        inputs = self._require([cfg.items, cfg.cobuy])
        params = {
            "categories": cfg.categories,
            "n_pairs": cfg.n_pairs,
            "min_degree": cfg.min_degree,
            "seed": cfg.ingest_seed,
        }
        outputs = [cfg.pairs_path]
        if self._up_to_date("ingest", inputs, params, outputs):
            logger.info("ingest up to date; skipped")
            return
        catalog = ingest.load_catalog(cfg.items)
        graph = ingest.build_cobuy_graph(ingest.load_cobuy_records(cfg.cobuy), catalog)
        pairs = ingest.sample_pairs(
            graph, catalog, set(cfg.categories) or None, cfg.n_pairs, cfg.min_degree, cfg.ingest_seed
        )
        logger.info("sampled %d pairs from %d nodes / %d edges", len(pairs), len(graph.nodes), len(graph.edges))
        _atomic_write(cfg.pairs_path, lambda tmp: ingest.write_pairs(pairs, tmp))
        self._record("ingest", inputs, params, outputs)

    def stage_generate(self) -> None:
        cfg = self.cfg
        inputs = self._require([cfg.items, cfg.pairs_path])
        params = {
            "endpoint": cfg.endpoint,
            "max_tokens": cfg.max_tokens,
            "top_p": cfg.top_p,
            "samples_per_prompt": cfg.samples_per_prompt,
            "relations": [r.value for r in cfg.relations],
        }
        outputs = [cfg.generations_path, cfg.failures_path]
        if self._up_to_date("generate", inputs, params, outputs):
            logger.info("generate up to date; skipped")
            return
        catalog = ingest.load_catalog(cfg.items)
        pairs = ingest.read_pairs(cfg.pairs_path, catalog)
        gen_cfg = generation.GenerationConfig(
            endpoint=cfg.endpoint,
            max_tokens=cfg.max_tokens,
            top_p=cfg.top_p,
            samples_per_prompt=cfg.samples_per_prompt,
            max_in_flight=cfg.max_in_flight,
        )
        records, failures = generation.run_generation(pairs, cfg.relations, gen_cfg)

        def write_records(tmp):
            with open(tmp, "w", encoding="utf-8") as fh:
                for r in records:
                    fh.write(r.to_json() + "\n")

        def write_failures(tmp):
            with open(tmp, "w", encoding="utf-8") as fh:
                for f in failures:
                    fh.write(json.dumps(f) + "\n")

        _atomic_write(cfg.generations_path, write_records)
        _atomic_write(cfg.failures_path, write_failures)
        logger.info("generated %d records (%d failed pair-relations)", len(records), len(failures))
        self._record("generate", inputs, params, outputs)

    def _annotation_store(self) -> annotation.AnnotationStore:
        cfg = self.cfg
        catalog = ingest.load_catalog(cfg.items)
        pairs = {p.pair_id: p for p in ingest.read_pairs(cfg.pairs_path, catalog)}
        records = generation.read_generation_records(cfg.generations_path)
        store = annotation.AnnotationStore(
            vote_targets={
                annotation.PLAUSIBILITY: cfg.plausibility_votes,
                annotation.TYPICALITY: cfg.typicality_votes,
            },
            log_path=cfg.votes_path,
        )
        for rec in records:
            if rec.tail is None or rec.assertion_id is None or rec.assertion_id in store.items:
                continue
            pair = pairs[rec.pair_id]
            cards = [
                {
                    "title": it.title,
                    "category": it.category,
                    "url": it.url,
                    "image_urls": list(it.image_urls[:3]),
                }
                for it in (pair.item1, pair.item2)
            ]
            store.add_item(
                annotation.AnnotationItem(
                    assertion_id=rec.assertion_id,
                    sentence=f"{rec.prompt} {rec.tail}",
                    items=cards,
                )
            )
        # typicality panels only see assertions the populated scores call plausible
        if os.path.exists(cfg.scored_path):
            scored = population.read_scored(cfg.scored_path)
            pool = {
                s.assertion.assertion_id
                for s in scored
                if s.plausibility > cfg.typicality_pool_threshold and s.assertion.assertion_id in store.items
            }
            if pool:
                store.set_task_pool(annotation.TYPICALITY, pool)
        if os.path.exists(cfg.votes_path):
            for vote in annotation.read_vote_log(cfg.votes_path):
                store.served[vote.task].setdefault(vote.worker_id, set()).add(vote.assertion_id)
                by_worker = store.votes[vote.task].setdefault(vote.assertion_id, {})
                by_worker[vote.worker_id] = vote
        return store

    def stage_annotate_serve(self) -> None:
        cfg = self.cfg
        self._require([cfg.items, cfg.pairs_path, cfg.generations_path])
        store = self._annotation_store()
        from .service import serve

        logger.info("serving annotation API on %s:%d", cfg.host, cfg.port)
        serve(store, host=cfg.host, port=cfg.port)

    def stage_populate(self) -> None:
        cfg = self.cfg
        inputs = self._require([cfg.generations_path])
        if cfg.scores:
            inputs += self._require([cfg.scores])
        elif not cfg.scorer_endpoint:
            raise MissingInput("[paths] scores or [population] scorer_endpoint")
        have_votes = os.path.exists(cfg.votes_path)
        have_labels = os.path.exists(cfg.labels_path)
        if have_votes and not (cfg.labels and have_labels):
            inputs += [cfg.votes_path]
        elif have_labels:
            inputs += [cfg.labels_path]
        params = {
            "plau_threshold": cfg.plau_threshold,
            "typ_threshold": cfg.typ_threshold,
            "scorer_endpoint": cfg.scorer_endpoint,
            "train_ratio": cfg.train_ratio,
            "seed": cfg.population_seed,
        }
        outputs = [cfg.scored_path, cfg.filtered_path, cfg.path("population_metrics.json")]
        if self._up_to_date("populate", inputs, params, outputs):
            logger.info("populate up to date; skipped")
            return

        records = generation.read_generation_records(cfg.generations_path)
        assertions = list(generation.assertions_from_records(records))
        sentences = {
            r.assertion_id: f"{r.prompt} {r.tail}" for r in records if r.assertion_id is not None
        }
        scorer = population.FileScorer(cfg.scores) if cfg.scores else population.HttpScorer(cfg.scorer_endpoint)
        scored = population.score_assertions(scorer, assertions, sentences)
        kept = population.filter_by_threshold(scored, cfg.plau_threshold, cfg.typ_threshold)
        _atomic_write(cfg.scored_path, lambda tmp: population.write_scored(scored, tmp))
        _atomic_write(cfg.filtered_path, lambda tmp: population.write_scored(kept, tmp))

        labels: list[dict] = []
        agreement: dict = {}
        if have_votes and not (cfg.labels and have_labels):
            store = self._annotation_store()
            labels = store.labels()
            _atomic_write(cfg.labels_path, lambda tmp: annotation.write_labels(labels, tmp))
            outputs.append(cfg.labels_path)
            for task in (annotation.PLAUSIBILITY, annotation.TYPICALITY):
                try:
                    rep = store.agreement(task)
                    agreement[task] = {
                        "pairwise_agreement": rep.pairwise_agreement,
                        "fleiss_kappa": rep.fleiss_kappa,
                        "n_items": rep.n_items,
                        "n_raters": rep.n_raters,
                    }
                except ValueError:
                    pass
        elif have_labels:
            labels = annotation.read_labels(cfg.labels_path)

        for task in ("plausibility", "typicality"):
            examples = population.derive_training_labels(task, labels, sentences)
            if not examples:
                continue
            train, dev = population.split_train_dev(examples, cfg.train_ratio, cfg.population_seed)
            train_path = cfg.path(f"train_{task}.tsv")
            dev_path = cfg.path(f"dev_{task}.tsv")
            _atomic_write(train_path, lambda tmp, ex=train: population.write_examples_tsv(ex, tmp))
            _atomic_write(dev_path, lambda tmp, ex=dev: population.write_examples_tsv(ex, tmp))
            outputs += [train_path, dev_path]

        metrics: dict = {
            "n_assertions": len(assertions),
            "n_scored": len(scored),
            "n_kept": len(kept),
            "plau_threshold": cfg.plau_threshold,
        }
        if agreement:
            metrics["agreement"] = agreement
        by_id = {s.assertion.assertion_id: s for s in scored}
        plau_gold = [
            (by_id[row["assertion_id"]].plausibility, 1 if row["plausibility_label"] == "plausible" else 0)
            for row in labels
            if "plausibility_label" in row and row["assertion_id"] in by_id
        ]
        if plau_gold:
            curve = population.pr_curve([p for p, _ in plau_gold], [g for _, g in plau_gold])
            metrics["pr_curve"] = [[t, p, r] for t, p, r in curve]
        try:
            metrics["spearman_plau_typ"] = population.spearman(
                [s.plausibility for s in scored], [s.typicality for s in scored]
            )
        except ValueError as exc:
            metrics["spearman_plau_typ"] = None
            logger.warning("spearman unavailable: %s", exc)
        if cfg.items and os.path.exists(cfg.items) and os.path.exists(cfg.pairs_path):
            catalog = ingest.load_catalog(cfg.items)
            pair_titles = {
                p.pair_id: (p.item1.title, p.item2.title) for p in ingest.read_pairs(cfg.pairs_path, catalog)
            }
            metrics["novelty_ratio"] = population.novelty_ratio(kept, pair_titles)
        _atomic_write(
            cfg.path("population_metrics.json"),
            lambda tmp: json.dump(metrics, open(tmp, "w", encoding="utf-8"), indent=2),
        )
        self._record("populate", inputs, params, outputs)

    def stage_mine(self) -> None:
        cfg = self.cfg
        inputs = self._require([cfg.filtered_path, cfg.parses, cfg.parse_index])
        params = {"min_support": cfg.min_support, "allow_list": cfg.allow_list, "deny_list": cfg.deny_list}
        outputs = [cfg.patterns_path, cfg.assignments_path]
        if self._up_to_date("mine", inputs, params, outputs):
            logger.info("mine up to date; skipped")
            return
        scored = population.read_scored(cfg.filtered_path)
        trees = read_conllu_file(cfg.parses)
        index = read_parse_index(cfg.parse_index)

        by_relation: dict[str, list] = {}
        for s in scored:
            ordinal = index.get(s.assertion.assertion_id)
            if ordinal is None or ordinal >= len(trees):
                logger.warning("no parse for assertion %s", s.assertion.assertion_id)
                continue
            by_relation.setdefault(s.assertion.relation.value, []).append((s.assertion.assertion_id, trees[ordinal]))

        allow = _read_id_list(cfg.allow_list) if cfg.allow_list else None
        deny = _read_id_list(cfg.deny_list) if cfg.deny_list else None

        all_patterns: list[mining.TreePattern] = []
        assignments: list[mining.PatternAssignment] = []
        for relation in sorted(by_relation):
            entries = by_relation[relation]
            rel_trees = [t for _, t in entries]
            support = cfg.min_support if cfg.min_support is not None else mining.default_min_support(len(rel_trees))
            candidates = mining.mine_patterns(rel_trees, support, relation)
            final = mining.select_final_patterns(candidates, rel_trees, support, allow, deny)
            all_patterns.extend(final)
            for aid, tree in entries:
                assignments.append(mining.assign_pattern(tree, final, assertion_id=aid))
            logger.info(
                "relation %s: %d trees, %d candidates, %d final patterns",
                relation, len(rel_trees), len(candidates), len(final),
            )
        logger.info("pattern coverage: %.4f", mining.coverage(assignments))
        _atomic_write(cfg.patterns_path, lambda tmp: mining.write_patterns(all_patterns, tmp))
        _atomic_write(cfg.assignments_path, lambda tmp: mining.write_assignments(assignments, tmp))
        self._record("mine", inputs, params, outputs)

    def stage_conceptualize(self) -> None:
        cfg = self.cfg
        inputs = self._require([cfg.filtered_path, cfg.assignments_path, cfg.concepts])
        params = {"top_k": cfg.top_k, "min_weight": cfg.min_weight}
        outputs = [cfg.abstracts_path]
        if self._up_to_date("conceptualize", inputs, params, outputs):
            logger.info("conceptualize up to date; skipped")
            return
        table = conceptualize.load_concept_table(cfg.concepts)
        tails = _intention_tails(cfg)
        abstracts = []
        for tail in sorted(tails):
            abstracts.extend(conceptualize.conceptualize_tail(tail, table, cfg.top_k, cfg.min_weight))
        logger.info("%d abstract intentions from %d tails", len(abstracts), len(tails))
        _atomic_write(cfg.abstracts_path, lambda tmp: conceptualize.write_abstracts(abstracts, tmp))
        self._record("conceptualize", inputs, params, outputs)

    def stage_assemble(self) -> None:
        cfg = self.cfg
        inputs = self._require([cfg.scored_path, cfg.assignments_path, cfg.abstracts_path, cfg.pairs_path, cfg.items])
        params = {"plau_threshold": cfg.plau_threshold}
        outputs = [cfg.kg_dir, cfg.tails_path, cfg.path("kg_stats.json")]
        if self._up_to_date("assemble", inputs, params, outputs):
            logger.info("assemble up to date; skipped")
            return
        catalog = ingest.load_catalog(cfg.items)
        pairs = {
            p.pair_id: (p.item1.id, p.item2.id) for p in ingest.read_pairs(cfg.pairs_path, catalog)
        }
        scored = population.read_scored(cfg.scored_path)
        assignments = mining.read_assignments(cfg.assignments_path)
        abstracts = conceptualize.read_abstracts(cfg.abstracts_path)
        kg = kgstore.assemble(scored, assignments, abstracts, pairs, cfg.plau_threshold)
        if os.path.isdir(cfg.kg_dir):
            shutil.rmtree(cfg.kg_dir)
        kgstore.export(kg, cfg.kg_dir)
        _atomic_write(cfg.tails_path, lambda tmp: kgstore.write_tails_manifest(kg, tmp))
        kg_stats = kgstore.stats(kg)
        _atomic_write(
            cfg.path("kg_stats.json"),
            lambda tmp: json.dump(
                {
                    "node_counts": kg_stats.node_counts,
                    "edge_counts": kg_stats.edge_counts,
                    "per_relation": kg_stats.per_relation,
                    "avg_tail_tokens": kg_stats.avg_tail_tokens,
                },
                open(tmp, "w", encoding="utf-8"),
                indent=2,
            ),
        )
        logger.info("assembled KG: %s nodes, %s edges", kg_stats.node_counts, kg_stats.edge_counts)
        self._record("assemble", inputs, params, outputs)

    def stage_embed(self) -> None:
        cfg = self.cfg
        inputs = self._require([cfg.kg_dir])
        if cfg.tail_vectors:
            inputs += self._require([cfg.tail_vectors])
        params = {
            "dim": cfg.embed_dim,
            "margin": cfg.embed_margin,
            "lr": cfg.embed_lr,
            "epochs": cfg.embed_epochs,
            "negatives": cfg.embed_negatives,
            "seed": cfg.embed_seed,
            "tails_trainable": cfg.tails_trainable,
        }
        outputs = [cfg.item_vectors_path, cfg.path("embed_log.csv")]
        if self._up_to_date("embed", inputs, params, outputs):
            logger.info("embed up to date; skipped")
            return
        kg = kgstore.import_graph(cfg.kg_dir)
        triples = embed.triples_from_kg(kg)
        tail_init = embed.load_vectors(cfg.tail_vectors) if cfg.tail_vectors else None
        train_cfg = embed.TrainConfig(
            dim=cfg.embed_dim,
            margin=cfg.embed_margin,
            lr=cfg.embed_lr,
            epochs=cfg.embed_epochs,
            negatives=cfg.embed_negatives,
            seed=cfg.embed_seed,
            tails_trainable=cfg.tails_trainable,
        )
        table, log = embed.train(triples, train_cfg, tail_init=tail_init)
        _atomic_write(cfg.item_vectors_path, lambda tmp: embed.export_item_vectors(table, tmp))

        def write_log(tmp):
            with open(tmp, "w", encoding="utf-8") as fh:
                fh.write("epoch,mean_loss\n")
                for epoch, loss in log:
                    fh.write(f"{epoch},{loss:.6f}\n")

        _atomic_write(cfg.path("embed_log.csv"), write_log)
        logger.info("trained %d item vectors over %d triples", len(table.items), len(triples))
        self._record("embed", inputs, params, outputs)

    def stage_receval(self) -> None:
        cfg = self.cfg
        inputs = self._require([cfg.kg_dir, cfg.interactions, cfg.cobuy])
        params = {
            "seed": cfg.receval_seed,
            "factors": cfg.predictor_factors,
            "lr": cfg.predictor_lr,
            "reg": cfg.predictor_reg,
            "epochs": cfg.predictor_epochs,
            "ablation_seeds": list(cfg.ablation_seeds),
            "filters": [list(f) for f in cfg.filters],
            "embed": [cfg.embed_dim, cfg.embed_lr, cfg.embed_epochs, cfg.embed_seed],
        }
        outputs = [cfg.ablation_path]
        if self._up_to_date("receval", inputs, params, outputs):
            logger.info("receval up to date; skipped")
            return
        kg = kgstore.import_graph(cfg.kg_dir)
        data = receval.read_interactions(cfg.interactions)
        train, dev, test = receval.split_interactions(data, cfg.receval_seed)
        matched = receval.match_kg(kg, train)
        dataset_items = {it.item_id for it in data}
        tail_vectors = embed.load_vectors(cfg.tail_vectors) if cfg.tail_vectors and os.path.exists(cfg.tail_vectors) else None

        embed_cfg = embed.TrainConfig(
            dim=cfg.embed_dim,
            margin=cfg.embed_margin,
            lr=cfg.embed_lr,
            epochs=cfg.embed_epochs,
            negatives=cfg.embed_negatives,
            seed=cfg.embed_seed,
            tails_trainable=cfg.tails_trainable,
        )

        def kg_features(graph: kgstore.KnowledgeGraph):
            triples = embed.triples_from_kg(graph)
            if not triples:
                return None
            init = None
            if tail_vectors is not None:
                covered = {t for _, _, _, t in triples} <= set(tail_vectors)
                init = tail_vectors if covered else None
            table, _ = embed.train(triples, embed_cfg, tail_init=init)
            return table.items

        configs = [receval.AblationConfig("no_features", None)]

        cobuy_edges = ingest.load_cobuy_records(cfg.cobuy)
        structure_triples = embed.cobuy_triples(cobuy_edges)
        if structure_triples:
            table, _ = embed.train(structure_triples, embed_cfg)
            configs.append(receval.AblationConfig("cobuy_structure_only", table.items))
        else:
            configs.append(receval.AblationConfig("cobuy_structure_only", None, missing=True))

        if tail_vectors is not None:
            pooled = {
                item: embed.avg_pool_tail_features(item, matched.kg, tail_vectors)
                for item in sorted({n["item_id"] for n in matched.kg.item_nodes.values()})
            }
            configs.append(receval.AblationConfig("text_features_only", pooled, coverage=matched.item_coverage))
        else:
            configs.append(receval.AblationConfig("text_features_only", None, missing=True))

        feats = kg_features(matched.kg)
        configs.append(
            receval.AblationConfig(
                "matched_kg", feats, coverage=matched.item_coverage, missing=feats is None
            )
        )
        for plau_t, typ_t in cfg.filters:
            sub = kgstore.filter_kg(matched.kg, plau_t, typ_t)
            feats = kg_features(sub)
            configs.append(
                receval.AblationConfig(
                    _filter_name(plau_t, typ_t),
                    feats,
                    coverage=kgstore.item_coverage(sub, dataset_items),
                    missing=feats is None,
                )
            )

        predictor_cfg = receval.PredictorConfig(
            factors=cfg.predictor_factors, lr=cfg.predictor_lr, reg=cfg.predictor_reg, epochs=cfg.predictor_epochs
        )
        rows = receval.run_ablation(train, test, configs, predictor_cfg, cfg.ablation_seeds)

        def write_rows(tmp):
            payload = [
                {
                    "config": r.name,
                    "mean_rmse": r.mean_rmse,
                    "std": r.std_rmse,
                    "coverage": r.coverage,
                    "runs": r.runs,
                }
                for r in rows
            ]
            json.dump(payload, open(tmp, "w", encoding="utf-8"), indent=2)

        _atomic_write(cfg.ablation_path, write_rows)
        self._record("receval", inputs, params, outputs)

    def stage_report(self) -> None:
        cfg = self.cfg
        inputs = self._require([cfg.ablation_path])
        params: dict = {}
        outputs = [cfg.report_path]
        if self._up_to_date("report", inputs, params, outputs):
            logger.info("report up to date; skipped")
            return
        payload = json.load(open(cfg.ablation_path, encoding="utf-8"))
        rows = [
            receval.AblationRow(
                name=r["config"],
                mean_rmse=r["mean_rmse"],
                std_rmse=r["std"],
                coverage=r.get("coverage"),
                runs=r.get("runs", 0),
            )
            for r in payload
        ]
        _atomic_write(cfg.report_path, lambda tmp: receval.write_report(rows, tmp))
        for row in rows:
            logger.info("%-28s rmse %.4f +/- %.4f", row.name, row.mean_rmse, row.std_rmse)
        self._record("report", inputs, params, outputs)


def _filter_name(plau_t: float, typ_t: float | None) -> str:
    name = f"matched_plau{plau_t:g}"
    if typ_t is not None:
        name += f"_typ{typ_t:g}"
    return name


def _read_id_list(path: str) -> set[str]:
    with open(path, encoding="utf-8") as fh:
        return {line.strip() for line in fh if line.strip()}


def _intention_tails(cfg: PipelineConfig) -> set[str]:
    """Distinct tails that become intention nodes: simplified tails where a
    pattern matched, raw tails otherwise."""
    scored = population.read_scored(cfg.filtered_path)
    by_assertion = {a.assertion_id: a for a in mining.read_assignments(cfg.assignments_path) if a.assertion_id}
    tails = set()
    for s in scored:
        assigned = by_assertion.get(s.assertion.assertion_id)
        if assigned and assigned.pattern_id:
            tails.add(assigned.simplified_tail)
        else:
            tails.add(s.assertion.tail)
    return tails
