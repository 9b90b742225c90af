"""Command-line front end for the linking pipeline.

Subcommands: build-stats, build-dictionary, candidates, link, train, eval,
gradcheck. A JSON config file may supply any long-option value; explicit
flags win over the file, the file wins over built-in defaults. All
randomness flows from --seed, and --jobs N parallelizes per-document work
with a reduction order fixed to document order, so parallel runs match
--jobs 1 byte for byte.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import multiprocessing
import sys
from pathlib import Path

import xelink
from xelink import candgen, kbstats, metrics
from xelink.burn import InferenceConfig, infer, init_burn_params
from xelink.corpus import (
    Document,
    Mention,
    read_corpus,
    read_predictions,
    write_corpus,
    write_linked,
)
from xelink.features import EmbeddingStore, FeatureTensors, featurize
from xelink.gradcheck import REL_ERR_LIMIT, run_gradcheck
from xelink.greedy import LinearParams, greedy_link
from xelink.modelio import load_model, save_model
from xelink.training import TrainConfig, train_burn, train_linear

DEFAULTS = {
    "k": 30,
    "gamma": 1.0,
    "feature_set": "FEAT",
    "inference": "burn",
    "t": 20,
    "context_window": 30,
    "hidden": 128,
    "dropout": 0.5,
    "lr": 1e-3,
    "epochs": 1,
    "seed": 0,
    "batch_size": None,
    "jobs": 1,
    "epsilon": kbstats.DEFAULT_EPSILON,
    "smoothing": kbstats.DEFAULT_SMOOTHING,
    "instances": 50,
    "step": 1e-5,
    "tol": 1e-6,
}

_ERRORS = (ValueError, OSError)


class _Config:
    """Layered option resolution: flag > config file > default."""

    def __init__(self, ns: argparse.Namespace):
        self.ns = ns
        self.file: dict = {}
        if getattr(ns, "config", None):
            with open(ns.config, encoding="utf-8") as fh:
                self.file = json.load(fh)

    def get(self, name: str):
        value = getattr(self.ns, name, None)
        if value is not None:
            return value
        if name in self.file:
            return self.file[name]
        return DEFAULTS.get(name)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xelink", description="Cross-lingual entity linking pipeline"
    )
    parser.add_argument("--version", action="version", version=xelink.__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON file with default option values")

    p = sub.add_parser("build-stats", help="ingest an anchor corpus into a statistics store")
    add_common(p)
    p.add_argument("--input", required=True, help="anchor corpus JSONL")
    p.add_argument("--output", required=True, help="statistics directory")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--smoothing", type=float)

    p = sub.add_parser(
        "build-dictionary",
        help="build the surface dictionary from source anchors and a bilingual map",
    )
    add_common(p)
    p.add_argument("--input", required=True, help="source-language anchor corpus JSONL")
    p.add_argument("--bilingual-map", required=True, help="source->english TSV")
    p.add_argument("--output", required=True, help="dictionary TSV")

    p = sub.add_parser("candidates", help="attach fused candidate lists to a corpus")
    add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--dictionary", help="dictionary TSV (probabilistic source)")
    p.add_argument(
        "--external",
        action="append",
        default=None,
        help="external scores JSONL; repeatable",
    )
    p.add_argument("--k", type=int)
    p.add_argument("--gamma", type=float)

    p = sub.add_parser("link", help="disambiguate a corpus with candidates")
    add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--stats", required=True, help="statistics directory")
    p.add_argument("--output", required=True, help="predictions JSONL")
    p.add_argument("--embeddings")
    p.add_argument("--model", help="model JSON; defaults to untrained parameters")
    p.add_argument("--inference", choices=["greedy", "burn"])
    p.add_argument("--feature-set", dest="feature_set", choices=["BASE", "FEAT"])
    p.add_argument("--t", type=int, help="max belief-update iterations")
    p.add_argument("--context-window", dest="context_window", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("train", help="train a disambiguation model")
    add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--stats", required=True)
    p.add_argument("--output", required=True, help="model JSON")
    p.add_argument("--embeddings")
    p.add_argument("--inference", choices=["greedy", "burn"])
    p.add_argument("--feature-set", dest="feature_set", choices=["BASE", "FEAT"])
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--dropout", type=float)
    p.add_argument("--hidden", type=int)
    p.add_argument("--t", type=int)
    p.add_argument("--context-window", dest="context_window", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--quiet", action="store_true", help="suppress per-epoch log lines")

    p = sub.add_parser("eval", help="score predictions against gold labels")
    add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--output", help="report JSON; stdout when omitted")
    p.add_argument("--stats", help="statistics directory defining the KB entity set")
    p.add_argument("--dictionary", help="dictionary TSV adding to the KB entity set")
    p.add_argument("--jobs", type=int)

    p = sub.add_parser("gradcheck", help="verify analytic gradients against finite differences")
    add_common(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--instances", type=int)
    p.add_argument("--step", type=float)

    return parser


def _cmd_build_stats(cfg: _Config) -> int:
    pages = kbstats.read_anchor_corpus(cfg.ns.input)
    stats = kbstats.ingest(pages, epsilon=cfg.get("epsilon"), smoothing=cfg.get("smoothing"))
    kbstats.save(stats, cfg.ns.output)
    print(
        f"ingested {stats.total_anchor_count} anchors over "
        f"{len(stats.entity_count)} entities into {cfg.ns.output}",
        file=sys.stderr,
    )
    return 0


def _cmd_build_dictionary(cfg: _Config) -> int:
    bimap = kbstats.BilingualMap.read_tsv(cfg.ns.bilingual_map)
    pages = kbstats.read_anchor_corpus(cfg.ns.input)
    mention_map = candgen.build_wikimention(pages, bimap)
    candgen.write_dictionary_tsv(mention_map, cfg.ns.output)
    print(
        f"{len(mention_map.table)} surfaces written; "
        f"{mention_map.dropped_anchors} anchors dropped (no bilingual entry)",
        file=sys.stderr,
    )
    return 0


def _cmd_candidates(cfg: _Config) -> int:
    docs = read_corpus(cfg.ns.corpus)
    mention_map = (
        candgen.read_dictionary_tsv(cfg.ns.dictionary) if cfg.ns.dictionary else None
    )
    externals = [candgen.read_external_scores(p) for p in (cfg.ns.external or ())]
    if mention_map is None and not externals:
        raise candgen.CandGenError("need --dictionary and/or --external sources")
    k = cfg.get("k")
    gamma = cfg.get("gamma")
    out_docs = []
    for doc in docs:
        new_mentions = []
        for m in doc.mentions:
            cands = candgen.generate_candidates(
                doc.doc_id, m.mention_id, m.surface, mention_map, externals, k, gamma
            )
            new_mentions.append(
                Mention(
                    mention_id=m.mention_id,
                    start=m.start,
                    end=m.end,
                    surface=m.surface,
                    gold=m.gold,
                    candidates=tuple(cands),
                )
            )
        out_docs.append(
            Document(doc_id=doc.doc_id, tokens=doc.tokens, mentions=tuple(new_mentions))
        )
    write_corpus(out_docs, cfg.ns.output)
    return 0


_LINK_CTX: dict = {}


def _link_one(doc: Document) -> list[tuple[str, str | None]]:
    ctx = _LINK_CTX
    tensors = featurize(doc, ctx["stats"], ctx["embeddings"], ctx["feature_set"])
    if ctx["inference"] == "greedy":
        preds = greedy_link(tensors, ctx["model"]).predictions
    else:
        preds = infer(tensors, ctx["model"], ctx["infer_cfg"]).predictions
    return [(m.mention_id, p) for m, p in zip(doc.mentions, preds)]


def _map_jobs(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(item) for item in items]
    ctx = multiprocessing.get_context("fork")
    chunk = max(1, len(items) // (jobs * 4) or 1)
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as ex:
        return list(ex.map(fn, items, chunksize=chunk))


def _load_link_model(cfg: _Config):
    """Model plus effective feature set for link; untrained defaults if no file."""
    inference = cfg.get("inference")
    feature_set = cfg.get("feature_set")
    if cfg.ns.model:
        model, feature_set, _ = load_model(cfg.ns.model)
        inference = "greedy" if isinstance(model, LinearParams) else "burn"
    elif inference == "greedy":
        model = LinearParams.for_feature_set(feature_set)
    else:
        model = init_burn_params(
            feature_set, hidden=cfg.get("hidden"), seed=cfg.get("seed")
        )
    return model, feature_set, inference


def _cmd_link(cfg: _Config) -> int:
    docs = read_corpus(cfg.ns.corpus)
    stats = kbstats.load(cfg.ns.stats)
    embeddings = (
        EmbeddingStore.read_text(cfg.ns.embeddings) if cfg.ns.embeddings else None
    )
    model, feature_set, inference = _load_link_model(cfg)
    _LINK_CTX.update(
        stats=stats,
        embeddings=embeddings,
        feature_set=feature_set,
        inference=inference,
        model=model,
        infer_cfg=InferenceConfig(
            max_iterations=cfg.get("t"),
            convergence_tol=cfg.get("tol"),
            context_window=cfg.get("context_window"),
        ),
    )
    per_doc = _map_jobs(_link_one, docs, cfg.get("jobs"))
    predictions = {
        (doc.doc_id, mention_id): pred
        for doc, row in zip(docs, per_doc)
        for mention_id, pred in row
        if pred is not None
    }
    write_linked(docs, predictions, cfg.ns.output)
    return 0


def _featurize_corpus(cfg: _Config) -> tuple[list[Document], list[FeatureTensors], str]:
    docs = read_corpus(cfg.ns.corpus)
    stats = kbstats.load(cfg.ns.stats)
    embeddings = (
        EmbeddingStore.read_text(cfg.ns.embeddings) if cfg.ns.embeddings else None
    )
    feature_set = cfg.get("feature_set")
    tensors = [featurize(doc, stats, embeddings, feature_set) for doc in docs]
    return docs, tensors, feature_set


def _cmd_train(cfg: _Config) -> int:
    _, tensors, feature_set = _featurize_corpus(cfg)
    inference = cfg.get("inference")
    train_cfg = TrainConfig(
        epochs=cfg.get("epochs"),
        lr=cfg.get("lr"),
        dropout=cfg.get("dropout"),
        batch_size=cfg.get("batch_size"),
        seed=cfg.get("seed"),
    )
    echo = {
        "inference": inference,
        "feature_set": feature_set,
        "epochs": train_cfg.epochs,
        "lr": train_cfg.lr,
        "dropout": train_cfg.dropout,
        "batch_size": train_cfg.batch_size,
        "seed": train_cfg.seed,
        "t": cfg.get("t"),
        "context_window": cfg.get("context_window"),
        "hidden": cfg.get("hidden"),
    }
    if inference == "greedy":
        model = LinearParams.for_feature_set(feature_set, fill=0.0)
        model, log = train_linear(tensors, model, train_cfg)
    else:
        infer_cfg = InferenceConfig(
            max_iterations=cfg.get("t"),
            convergence_tol=cfg.get("tol"),
            context_window=cfg.get("context_window"),
        )
        model = init_burn_params(
            feature_set, hidden=cfg.get("hidden"), seed=train_cfg.seed
        )
        model, log = train_burn(tensors, model, infer_cfg, train_cfg)
    if not cfg.ns.quiet:
        for entry in log:
            print(
                f"epoch {entry.epoch} loss {entry.loss:.6f} accuracy {entry.accuracy:.4f}",
                file=sys.stderr,
            )
    save_model(cfg.ns.output, model, feature_set, train_config=echo)
    return 0


_EVAL_CTX: dict = {}


def _eval_one(doc: Document) -> metrics.DocumentBreakdown:
    return metrics.document_counts(doc, _EVAL_CTX["preds"], _EVAL_CTX["kb"])


def _cmd_eval(cfg: _Config) -> int:
    docs = read_corpus(cfg.ns.corpus)
    preds = read_predictions(cfg.ns.predictions)
    kb_entities: set[str] | None = None
    if cfg.ns.stats:
        kb_entities = set(kbstats.load(cfg.ns.stats).entity_count)
    if cfg.ns.dictionary:
        entities = candgen.read_dictionary_tsv(cfg.ns.dictionary).entities()
        kb_entities = entities if kb_entities is None else kb_entities | entities
    _EVAL_CTX.update(preds=preds, kb=kb_entities)
    counts = _map_jobs(_eval_one, docs, cfg.get("jobs"))
    report = metrics.evaluate(docs, preds, kb_entities, per_doc_counts=counts)
    payload = report.to_json()
    payload["config"] = {
        "corpus": cfg.ns.corpus,
        "predictions": cfg.ns.predictions,
        "stats": cfg.ns.stats,
        "dictionary": cfg.ns.dictionary,
        "kb_restricted": kb_entities is not None,
    }
    payload["run"] = {"tool": "xelink eval", "version": xelink.__version__}
    text = json.dumps(payload, indent=1, sort_keys=True) + "\n"
    if cfg.ns.output:
        Path(cfg.ns.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_gradcheck(cfg: _Config) -> int:
    result = run_gradcheck(
        seed=cfg.get("seed"),
        n_instances=cfg.get("instances"),
        step=cfg.get("step"),
    )
    print(
        f"max relative error {result.max_rel_err:.3e} over "
        f"{result.n_coordinates} coordinates ({result.n_instances} instances); "
        f"limit {REL_ERR_LIMIT:.0e}"
    )
    return 0 if result.passed else 1


_COMMANDS = {
    "build-stats": _cmd_build_stats,
    "build-dictionary": _cmd_build_dictionary,
    "candidates": _cmd_candidates,
    "link": _cmd_link,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "gradcheck": _cmd_gradcheck,
}


def run(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = _Config(ns)
        return _COMMANDS[ns.command](cfg)
    except _ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
