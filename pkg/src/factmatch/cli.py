"""Command-line entry point: ``factmatch <command> [options]``.

Options can come from a JSON config file (``--config``); flags given on the
command line win.  Relative paths in a config file are resolved against the
file's directory.  Exit codes: 0 success, 1 usage, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from . import __version__
from .errors import FactMatchError, NumericalError

logger = logging.getLogger("factmatch")

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3

PATH_KEYS = {
    "tweets", "articles", "queries", "qrels", "dev_qrels", "split", "pairs", "annotations", "bins",
    "encoder", "encoder_c", "encoder_ct", "encoder_cts", "features", "model_file", "run", "ratings",
    "stopwords", "out", "pairs_out",
}

DEFAULTS = {
    "seed": 0,
    "strategy": "jaccard",
    "threshold": 0.1,
    "target": "best",
    "mode": "mix",
    "fields": "cts",
    "model": "bm25",
    "topk": 100,
    "feature_mode": "ensemble",
    "strip_handles": True,
    "stem": True,
    "ks": "1,3,5,10,20",
    "lm_trees": 300,
    "lm_depth": 3,
    "lm_lr": 0.1,
    "lm_min_leaf": 5,
}

# keys that only steer where output goes; kept out of the config hash
NON_CONFIG_KEYS = {"out", "config", "verbose", "cmd", "table", "pairs_out"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- config ------------------------------------------------------------------

def _train_defaults() -> dict:
    from .training import TrainConfig

    d = TrainConfig().to_dict()
    d.pop("seed")
    return d


def load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    p = Path(path)
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FactMatchError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise FactMatchError(f"{path}: config must be a JSON object")
    for k, v in list(data.items()):
        if k in PATH_KEYS and isinstance(v, str) and not Path(v).is_absolute():
            data[k] = str((p.parent / v).resolve())
    return data


def effective_config(ns: argparse.Namespace) -> dict:
    flags = {k: v for k, v in vars(ns).items() if k not in ("func",)}
    cfg = {**DEFAULTS, **_train_defaults(), **load_config(flags.get("config"))}
    cfg.update({k: v for k, v in flags.items() if v is not None})
    return cfg


def output_meta(cfg: dict, **extra) -> dict:
    from .fileio import config_hash

    hashed = {k: v for k, v in cfg.items() if k not in NON_CONFIG_KEYS}
    meta = {"cmd": cfg["cmd"], "config_hash": config_hash(hashed), "seed": cfg["seed"]}
    meta.update({k: v for k, v in extra.items() if v is not None})
    return meta


def need(cfg: dict, *keys: str):
    missing = [k for k in keys if cfg.get(k) in (None, "")]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))
    return [cfg[k] for k in keys]


def norm_config(cfg: dict):
    from .textnorm import NormConfig, load_stopwords

    kw = {"strip_handles": bool(cfg["strip_handles"]), "stem": bool(cfg["stem"])}
    if cfg.get("stopwords"):
        kw["stopwords"] = load_stopwords(cfg["stopwords"])
    return NormConfig(**kw)


def train_config(cfg: dict):
    from .training import TrainConfig

    return TrainConfig.from_dict({**cfg, "seed": int(cfg["seed"])})


def emit_json(cfg: dict, obj) -> None:
    from .fileio import write_json

    if cfg.get("out"):
        write_json(cfg["out"], obj)
    else:
        sys.stdout.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _articles(cfg):
    from .corpus import load_articles

    (path,) = need(cfg, "articles")
    return load_articles(path)


def _tweets(cfg):
    from .corpus import ingest_tweets

    (path,) = need(cfg, "tweets")
    res = ingest_tweets(path)
    if res.skipped:
        logger.info("tweets: %d malformed and %d filtered lines skipped", res.malformed, res.filtered)
    return res


def _restrict(queries: dict, cfg: dict) -> dict:
    """Keep only queries judged in ``--qrels`` when one is given."""
    from .fileio import read_qrels

    if not cfg.get("qrels"):
        return queries
    qrels = read_qrels(cfg["qrels"])
    missing = sorted(set(qrels) - set(queries))
    if missing:
        raise FactMatchError(f"qrels queries without text: {missing[:5]}")
    return {q: queries[q] for q in qrels}


# -- commands ----------------------------------------------------------------

def cmd_normalize(cfg):
    from .textnorm import normalize

    nc = norm_config(cfg)
    texts = list(cfg.get("text") or [])
    if cfg.get("input"):
        texts += Path(cfg["input"]).read_text(encoding="utf-8").splitlines()
    if not texts:
        raise UsageError("give --text or --input")
    lines = [json.dumps(normalize(t, nc)) for t in texts]
    if cfg.get("out"):
        from .fileio import atomic_write_text

        atomic_write_text(cfg["out"], "\n".join(lines) + "\n")
    else:
        sys.stdout.write("\n".join(lines) + "\n")


def cmd_stats(cfg):
    from .corpus import corpus_stats

    res = _tweets(cfg)
    stats = corpus_stats(res.tweets, norm_config(cfg))
    stats.update({"malformed_lines": res.malformed, "filtered_tweets": res.filtered})
    emit_json(cfg, {"meta": output_meta(cfg), "stats": stats})


def cmd_triples(cfg):
    from .corpus import resolve_triples
    from .fileio import write_tsv

    (out,) = need(cfg, "out")
    triples = resolve_triples(_tweets(cfg).tweets, [a.url for a in _articles(cfg)])
    rows = [(t.fc_tweet.id, t.article_url, t.root.id if t.root else "-", t.reply.id if t.reply else "-")
            for t in triples]
    write_tsv(out, rows, output_meta(cfg))
    logger.info("%d triples", len(rows))


def cmd_label(cfg):
    from .corpus import resolve_triples
    from .distsup import build_split, score_triples
    from .encoder import EncoderModel
    from .fileio import write_tsv
    from .pipeline import split_rows

    (out,) = need(cfg, "out")
    articles = _articles(cfg)
    tweets = _tweets(cfg).tweets
    model = None
    if cfg["strategy"] == "cosine":
        model = EncoderModel.load(need(cfg, "encoder")[0])
    triples = resolve_triples(tweets, [a.url for a in articles])
    pairs = score_triples(triples, {a.id: a for a in articles}, cfg["strategy"], cfg["target"],
                          norm_config(cfg), model)
    meta = output_meta(cfg, strategy=cfg["strategy"], threshold=cfg["threshold"], target=cfg["target"])
    if cfg.get("pairs_out"):
        rows = [(*r, p.target_text_kind) for r, p in zip(split_rows(pairs), pairs)]
        write_tsv(cfg["pairs_out"], rows, meta)
    split = build_split(pairs, cfg["strategy"], float(cfg["threshold"]))
    write_tsv(out, split_rows(split), meta)
    logger.info("%d of %d scored pairs kept", len(split), len(pairs))


def cmd_bins(cfg):
    from .distsup import LabeledPair, bin_statistics, load_bin_fixture
    from .fileio import read_tsv

    if cfg.get("fixture"):
        table = load_bin_fixture(cfg["fixture"])
    else:
        (path,) = need(cfg, "pairs")
        _, rows = read_tsv(path)
        pairs = [LabeledPair(r[0], r[1], r[4] if len(r) > 4 else "reply", float(r[2]), r[3]) for r in rows]
        ann = None
        if cfg.get("annotations"):
            _, arows = read_tsv(cfg["annotations"])
            ann = {(r[0], r[1]): r[2].strip() in ("1", "true", "yes") for r in arows}
        edges = [float(x) for x in cfg["edges"].split(",")] if cfg.get("edges") else None
        table = bin_statistics(pairs, ann, edges)
    emit_json(cfg, {"meta": output_meta(cfg), "bins": table.labels(), **table.to_dict()})


def cmd_estimate(cfg):
    from .distsup import BinTable, estimate_matches, fixture_total_pairs, load_bin_fixture
    from .fileio import read_json

    if cfg.get("fixture"):
        table = load_bin_fixture(cfg["fixture"])
        total = cfg.get("total") or fixture_total_pairs()
    else:
        (path,) = need(cfg, "bins")
        table = BinTable.from_dict(read_json(path))
        (total,) = need(cfg, "total")
    est = estimate_matches(table, int(total))
    emit_json(cfg, {"meta": output_meta(cfg), "total_pairs": int(total), **est})


def cmd_train(cfg):
    from .fileio import read_qrels
    from .pipeline import TrainingData, crowd_examples, labeled_examples, read_queries, read_split, train_encoder

    (out,) = need(cfg, "out")
    mode = cfg["mode"]
    articles = _articles(cfg)
    nc = norm_config(cfg)
    crowd, labeled = [], []
    if mode != "only-labeled":
        _, pairs = read_split(need(cfg, "split")[0])
        tweets = {t.id: t for t in _tweets(cfg).tweets}
        crowd = crowd_examples(pairs, tweets)
    queries = read_queries(cfg["queries"]) if cfg.get("queries") else {}
    if mode != "only-crowd":
        need(cfg, "queries", "qrels")
        labeled = labeled_examples(queries, read_qrels(cfg["qrels"]))
    dev = None
    if cfg.get("dev_qrels"):
        need(cfg, "queries")
        dev = (queries, read_qrels(cfg["dev_qrels"]))
    tc = train_config(cfg)
    model, states = train_encoder(TrainingData(crowd, labeled), articles, mode, cfg["fields"], tc, dev, nc)
    last = states[-1]
    meta = output_meta(cfg, mode=mode, fields=cfg["fields"])
    meta.update({
        "config": {k: v for k, v in cfg.items() if k not in NON_CONFIG_KEYS},
        "tau": last.tau,
        "best_dev_map5": last.best_map5,
        "best_step": last.best_step,
        "train_pairs": [len(s.labels) for s in states],
        "final_labels_mean": [float(np.mean(s.labels)) for s in states],
    })
    model.save(out, meta)
    logger.info("trained %s encoder (%s); tau=%.4f dev MAP@5=%s", cfg["fields"], mode, last.tau, last.best_map5)


def _encoder_fields(path: str) -> Optional[str]:
    from .fileio import read_json

    return read_json(path).get("meta", {}).get("fields")


def cmd_retrieve(cfg):
    from .encoder import EncoderModel
    from .fileio import write_predictions
    from .pipeline import encoder_scores, lexical_scores, rank_all, read_queries

    (out, qpath) = need(cfg, "out", "queries")
    queries = _restrict(read_queries(qpath), cfg)
    articles = _articles(cfg)
    kind, combo, k = cfg["model"], cfg["fields"], int(cfg["topk"])
    nc = norm_config(cfg)
    if kind == "encoder":
        model = EncoderModel.load(need(cfg, "encoder")[0])
        scores = encoder_scores(model, queries, articles, combo, nc)
    else:
        scores = lexical_scores(kind, queries, articles, combo, nc)
    write_predictions(out, rank_all(scores, k), tag=f"{kind}-{combo}",
                      meta=output_meta(cfg, model=kind, fields=combo, topk=k))


def cmd_features(cfg):
    from .encoder import EncoderModel
    from .pipeline import feature_matrix, read_queries, write_features

    (out, qpath) = need(cfg, "out", "queries")
    queries = _restrict(read_queries(qpath), cfg)
    articles = _articles(cfg)
    encoders = {}
    for combo in ("c", "ct", "cts"):
        path = cfg.get(f"encoder_{combo}") or (cfg.get("encoder") if combo == "cts" else None)
        if path:
            encoders[combo] = EncoderModel.load(path)
    fs = feature_matrix(queries, articles, encoders, cfg["feature_mode"], int(cfg["topk"]), norm_config(cfg))
    write_features(out, fs, output_meta(cfg, feature_mode=cfg["feature_mode"], topk=cfg["topk"]))


def cmd_rerank_train(cfg):
    from .fileio import read_qrels, write_json
    from .pipeline import read_features
    from .rerank import LambdaMartConfig, feature_importance, train_lambdamart

    out, fpath, qpath = need(cfg, "out", "features", "qrels")
    fs = read_features(fpath)
    lm = LambdaMartConfig(n_trees=int(cfg["lm_trees"]), max_depth=int(cfg["lm_depth"]),
                          learning_rate=float(cfg["lm_lr"]), min_samples_leaf=int(cfg["lm_min_leaf"]),
                          seed=int(cfg["seed"]))
    model = train_lambdamart(fs, read_qrels(qpath), lm)
    d = model.to_dict()
    d["meta"] = output_meta(cfg)
    d["importance"] = feature_importance(model)
    write_json(out, d)
    logger.info("LambdaMART kept %d trees; training MAP@5 %.4f", model.best_iteration,
                model.train_history[model.best_iteration])


def cmd_rerank(cfg):
    from .fileio import read_json, write_predictions
    from .pipeline import read_features
    from .rerank import GbdtModel, rerank

    out, fpath, mpath = need(cfg, "out", "features", "model_file")
    model = GbdtModel.from_dict(read_json(mpath))
    runs = rerank(model, read_features(fpath))
    k = int(cfg["topk"])
    from .evalmetrics import RankedList

    runs = [RankedList(r.query_id, r.doc_ids[:k], r.scores[:k]) for r in runs]
    write_predictions(out, sorted(runs, key=lambda r: r.query_id), tag="lambdamart",
                      meta=output_meta(cfg, topk=k))


def cmd_evaluate(cfg):
    from .evalmetrics import evaluate, format_table
    from .fileio import read_predictions, read_qrels

    run, qpath = need(cfg, "run", "qrels")
    ks = tuple(int(x) for x in str(cfg["ks"]).split(","))
    metrics = evaluate(read_predictions(run), read_qrels(qpath), ks)
    if cfg.get("table"):
        sys.stderr.write(format_table({Path(run).stem: metrics}, ks))
    emit_json(cfg, {"meta": output_meta(cfg), "metrics": metrics})


def cmd_kappa(cfg):
    from .evalmetrics import cohen_kappa, fleiss_kappa
    from .fileio import read_tsv

    (path,) = need(cfg, "ratings")
    _, rows = read_tsv(path)
    if not rows:
        raise FactMatchError(f"{path}: no ratings")
    width = {len(r) for r in rows}
    if len(width) != 1:
        raise FactMatchError(f"{path}: rows have differing numbers of raters")
    ratings = np.array([r[1:] for r in rows]) if cfg.get("item_column") else np.array(rows)
    result = {"items": int(ratings.shape[0]), "raters": int(ratings.shape[1]), "fleiss": fleiss_kappa(ratings)}
    if ratings.shape[1] == 2:
        result["cohen"] = cohen_kappa(ratings[:, 0].tolist(), ratings[:, 1].tolist())
    emit_json(cfg, {"meta": output_meta(cfg), **result})


def cmd_sweep(cfg):
    """MAP@5 on the dev queries of an encoder trained per distant-supervision threshold."""
    from .corpus import resolve_triples
    from .distsup import build_split, score_triples
    from .errors import EmptySplit
    from .evalmetrics import evaluate
    from .fileio import read_qrels, write_tsv
    from .pipeline import (TrainingData, crowd_examples, encoder_scores, labeled_examples, rank_all,
                           read_queries, train_encoder)

    out, qpath, dpath = need(cfg, "out", "queries", "dev_qrels")
    thresholds = [float(x) for x in str(need(cfg, "thresholds")[0]).split(",")]
    articles = _articles(cfg)
    tweets = _tweets(cfg).tweets
    nc = norm_config(cfg)
    queries = read_queries(qpath)
    dev_qrels = read_qrels(dpath)
    labeled = labeled_examples(queries, read_qrels(cfg["qrels"])) if cfg.get("qrels") else []
    pairs = score_triples(resolve_triples(tweets, [a.url for a in articles]), {a.id: a for a in articles},
                          cfg["strategy"], cfg["target"], nc)
    by_id = {t.id: t for t in tweets}
    mode = cfg["mode"] if labeled else "only-crowd"
    rows = [("threshold", "pairs", "MAP@5")]
    for th in thresholds:
        try:
            split = build_split(pairs, cfg["strategy"], th)
        except EmptySplit:
            rows.append((th, 0, "nan"))
            continue
        data = TrainingData(crowd_examples(split, by_id), labeled)
        model, _ = train_encoder(data, articles, mode, cfg["fields"], train_config(cfg), None, nc)
        dev_q = {q: queries[q] for q in dev_qrels}
        runs = rank_all(encoder_scores(model, dev_q, articles, cfg["fields"], nc), int(cfg["topk"]))
        rows.append((th, len(split), repr(float(evaluate(runs, dev_qrels, (5,))["MAP@5"]))))
    write_tsv(out, rows, output_meta(cfg, strategy=cfg["strategy"]))


# -- parser ------------------------------------------------------------------

def _common(p):
    p.add_argument("--config", help="JSON config file; command-line flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output path (stdout for JSON results when omitted)")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("--stopwords", help="stopword list, one word per line")
    p.add_argument("--strip-handles", dest="strip_handles", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--stem", action=argparse.BooleanOptionalAction, default=None)


def _corpus(p, tweets=True, articles=True):
    if tweets:
        p.add_argument("--tweets", help="tweets JSONL")
    if articles:
        p.add_argument("--articles", help="articles JSONL or a directory of HTML pages")


def _train_flags(p):
    p.add_argument("--lr", type=float)
    p.add_argument("--tau-lr", dest="tau_lr", type=float)
    p.add_argument("--tau-init", dest="tau_init", type=float)
    p.add_argument("--trainable-tau", dest="trainable_tau", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--alpha", type=float, help="refurbishment momentum")
    p.add_argument("--refurbish-start", dest="refurbish_start", type=int)
    p.add_argument("--refurbish", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--weighted", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--prediction", choices=("softmax", "cosine01"))
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--group-size", dest="group_size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--warmup", type=float)
    p.add_argument("--weight-decay", dest="weight_decay", type=float)
    p.add_argument("--max-seq", dest="max_seq", type=int)
    p.add_argument("--eval-every", dest="eval_every", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--mode", choices=("only-labeled", "only-crowd", "seq", "mix"))
    p.add_argument("--fields", choices=("c", "ct", "cts"))
    p.add_argument("--split", help="distant-supervision split TSV")
    p.add_argument("--queries", help="labeled query TSV (id, text)")
    p.add_argument("--qrels", help="qrels for the labeled training queries")
    p.add_argument("--dev-qrels", dest="dev_qrels", help="qrels for checkpoint selection")


COMMANDS: Dict[str, Callable] = {}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="factmatch", description="Claim matching against fact-check articles.")
    parser.add_argument("--version", action="version", version=f"factmatch {__version__}")
    sub = parser.add_subparsers(dest="cmd", parser_class=_Parser, metavar="command")

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        _common(p)
        p.set_defaults(func=func)
        COMMANDS[name] = func
        return p

    p = add("normalize", cmd_normalize, "Print normalized token lists, one JSON list per input text.")
    p.add_argument("--text", action="append")
    p.add_argument("--input", help="file with one text per line")

    p = add("stats", cmd_stats, "Tweet corpus statistics.")
    _corpus(p, articles=False)

    p = add("triples", cmd_triples, "Resolve fact-checker tweets to (tweet, article, root, reply) triples.")
    _corpus(p)

    p = add("label", cmd_label, "Score crowd pairs and write a distant-supervision split.")
    _corpus(p)
    p.add_argument("--strategy", choices=("jaccard", "cosine"))
    p.add_argument("--threshold", type=float)
    p.add_argument("--target", choices=("root", "reply", "best"))
    p.add_argument("--encoder", help="encoder model for the cosine strategy")
    p.add_argument("--pairs-out", dest="pairs_out", help="also write every scored pair")

    p = add("bins", cmd_bins, "Bin scored pairs and tabulate annotation outcomes per bin.")
    p.add_argument("--pairs", help="scored pairs TSV from label --pairs-out")
    p.add_argument("--annotations", help="TSV: tweet_id, article_url, correct (0/1)")
    p.add_argument("--edges", help="comma-separated bin edges")
    p.add_argument("--fixture", help="bundled reference table instead of pairs")

    p = add("estimate", cmd_estimate, "Estimate the number of matching pairs from a bin table.")
    p.add_argument("--bins", help="bin table JSON from the bins command")
    p.add_argument("--fixture", help="bundled reference table: jaccard-reply, jaccard-conversation, cosine")
    p.add_argument("--total", type=int, help="total number of crowd pairs")

    p = add("train", cmd_train, "Train a bi-encoder.")
    _corpus(p)
    _train_flags(p)

    p = add("retrieve", cmd_retrieve, "Rank articles for each query.")
    _corpus(p, tweets=False)
    p.add_argument("--model", choices=("bm25", "tfidf", "encoder"))
    p.add_argument("--fields", choices=("c", "ct", "cts"))
    p.add_argument("--topk", type=int)
    p.add_argument("--queries")
    p.add_argument("--qrels", help="only retrieve for queries judged here")
    p.add_argument("--encoder", help="encoder model file")

    p = add("features", cmd_features, "Build reranking features for the top-k encoder candidates.")
    _corpus(p, tweets=False)
    p.add_argument("--queries")
    p.add_argument("--qrels", help="only build features for queries judged here")
    p.add_argument("--encoder", help="cts encoder (single mode)")
    for combo in ("c", "ct", "cts"):
        p.add_argument(f"--encoder-{combo}", dest=f"encoder_{combo}", help=f"encoder trained on {combo} inputs")
    p.add_argument("--feature-mode", dest="feature_mode", choices=("ensemble", "single"))
    p.add_argument("--topk", type=int)

    p = add("rerank-train", cmd_rerank_train, "Train a LambdaMART reranker.")
    p.add_argument("--features")
    p.add_argument("--qrels")
    p.add_argument("--lm-trees", dest="lm_trees", type=int)
    p.add_argument("--lm-depth", dest="lm_depth", type=int)
    p.add_argument("--lm-lr", dest="lm_lr", type=float)
    p.add_argument("--lm-min-leaf", dest="lm_min_leaf", type=int)

    p = add("rerank", cmd_rerank, "Rerank candidates with a trained LambdaMART model.")
    p.add_argument("--features")
    p.add_argument("--model", dest="model_file")
    p.add_argument("--topk", type=int)

    p = add("evaluate", cmd_evaluate, "Score a run against qrels.")
    p.add_argument("--run")
    p.add_argument("--qrels")
    p.add_argument("--ks", help="comma-separated cutoffs")
    p.add_argument("--table", action="store_true", default=None, help="also print a text table to stderr")

    p = add("kappa", cmd_kappa, "Inter-annotator agreement from an items x raters TSV.")
    p.add_argument("--ratings")
    p.add_argument("--item-column", dest="item_column", action="store_true", default=None,
                   help="first column holds item ids")

    p = add("sweep", cmd_sweep, "Dev MAP@5 of the encoder across labeling thresholds.")
    _corpus(p)
    _train_flags(p)
    p.add_argument("--strategy", choices=("jaccard",))
    p.add_argument("--target", choices=("root", "reply", "best"))
    p.add_argument("--thresholds", help="comma-separated thresholds")
    p.add_argument("--topk", type=int)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    if not getattr(ns, "func", None):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(ns.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = effective_config(ns)
        ns.func(cfg)
    except UsageError as exc:
        sys.stderr.write(f"factmatch {ns.cmd}: {exc}\n")
        return EXIT_USAGE
    except NumericalError as exc:
        sys.stderr.write(f"factmatch {ns.cmd}: numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except (FactMatchError, OSError, ValueError, KeyError) as exc:
        sys.stderr.write(f"factmatch {ns.cmd}: {exc}\n")
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
