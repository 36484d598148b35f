"""Glue between the file formats and the modelling modules.

Everything the command line does beyond argument handling lives here so the
same steps can be driven from Python.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .corpus import FactCheckArticle, Tweet
from .distsup import LabeledPair
from .encoder import EncoderModel, build_vocab
from .errors import EmptyInput, FormatError, MissingScorer
from .evalmetrics import RankedList
from .fileio import read_tsv
from .rerank import ENSEMBLE_SLOTS, SINGLE_SLOTS, FeatureSet, build_features
from .retrieval import FIELD_COMBOS, InvertedIndex, TfIdfModel, tokenize_collection
from .textnorm import DEFAULT_CONFIG, NormConfig, normalize
from .training import DevSet, TrainConfig, TrainPair, TrainState, train

logger = logging.getLogger(__name__)

TRAIN_MODES = ("only-labeled", "only-crowd", "seq", "mix")


def read_queries(path) -> Dict[str, str]:
    """Two-column TSV ``query_id<TAB>text``."""
    _, rows = read_tsv(path)
    out = {}
    for i, row in enumerate(rows, 1):
        if len(row) < 2:
            raise FormatError(f"{path}: query row {i} needs an id and a text")
        qid, text = row[0], "\t".join(row[1:])
        if qid in out:
            raise FormatError(f"{path}: duplicate query id {qid!r}")
        out[qid] = text
    return out


def read_split(path) -> Tuple[Dict[str, str], List[LabeledPair]]:
    """Split TSV ``tweet_id article_url score strategy``; returns header and pairs."""
    meta, rows = read_tsv(path)
    pairs = []
    for i, row in enumerate(rows, 1):
        if len(row) != 4:
            raise FormatError(f"{path}: split row {i} has {len(row)} columns, expected 4")
        try:
            score = float(row[2])
        except ValueError as exc:
            raise FormatError(f"{path}: split row {i} has a bad score") from exc
        pairs.append(LabeledPair(row[0], row[1], meta.get("target", "reply"), score, row[3]))
    return meta, pairs


def split_rows(pairs: Sequence[LabeledPair]):
    return [(p.tweet_id, p.article_url, repr(float(p.score)), p.strategy) for p in pairs]


# -- encoder training ---------------------------------------------------------

@dataclass
class TrainingData:
    crowd: List[Tuple[str, str]]
    labeled: List[Tuple[str, str]]


def crowd_examples(pairs: Sequence[LabeledPair], tweets: Mapping[str, Tweet]) -> List[Tuple[str, str]]:
    out = []
    for p in pairs:
        tw = tweets.get(p.tweet_id)
        if tw is None:
            raise FormatError(f"split refers to unknown tweet {p.tweet_id}")
        out.append((tw.text, p.article_url))
    return out


def labeled_examples(queries: Mapping[str, str], qrels: Mapping[str, Mapping[str, int]]) -> List[Tuple[str, str]]:
    out = []
    for qid in sorted(qrels):
        if qid not in queries:
            raise FormatError(f"qrels query {qid!r} has no text in the queries file")
        for did, rel in sorted(qrels[qid].items()):
            if rel > 0:
                out.append((queries[qid], did))
    return out


def article_field_tokens(articles: Sequence[FactCheckArticle], combo: str,
                         cfg: NormConfig = DEFAULT_CONFIG) -> Dict[str, List[List[str]]]:
    return {a.id: [normalize(f, cfg) for f in a.fields(combo)] for a in articles}


def _make_pairs(model: EncoderModel, examples, fields, cfg, tag) -> List[TrainPair]:
    out = []
    for i, (text, did) in enumerate(examples):
        if did not in fields:
            raise FormatError(f"training pair refers to unknown article {did}")
        try:
            out.append(TrainPair(model.tweet_input(normalize(text, cfg)), model.article_input(fields[did]),
                                 1.0, (f"{tag}{i}", did)))
        except EmptyInput:
            logger.warning("skipping %s example %d: no tokens after normalization", tag, i)
    return out


def train_encoder(data: TrainingData, articles: Sequence[FactCheckArticle], mode: str, combo: str,
                  config: TrainConfig, dev: Optional[Tuple[Mapping[str, str], Mapping]] = None,
                  cfg: NormConfig = DEFAULT_CONFIG) -> Tuple[EncoderModel, List[TrainState]]:
    """Train a fresh encoder under one of the data-mixing modes.

    ``seq`` trains on crowd pairs and then continues on the labeled pairs
    with a fresh optimizer; ``mix`` trains once on their union.
    """
    if mode not in TRAIN_MODES:
        raise ValueError(f"unknown training mode {mode!r}")
    fields = article_field_tokens(articles, combo, cfg)
    texts = [normalize(t, cfg) for t, _ in data.crowd + data.labeled]
    texts += [tok for f in fields.values() for tok in f]
    vocab = build_vocab(texts, config.min_count, config.hash_buckets)
    model = EncoderModel.init(vocab, config.dim, config.hidden, config.seed, config.max_seq, cfg.fingerprint())
    crowd = _make_pairs(model, data.crowd, fields, cfg, "c")
    labeled = _make_pairs(model, data.labeled, fields, cfg, "l")
    dev_set = None
    if dev is not None:
        queries, qrels = dev
        qin = {}
        for q in qrels:
            try:
                qin[q] = model.tweet_input(normalize(queries[q], cfg))
            except EmptyInput:
                continue
        dev_set = DevSet(qin, {a: model.article_input(f) for a, f in fields.items()}, qrels)
    stages = {"only-labeled": [labeled], "only-crowd": [crowd], "seq": [crowd, labeled],
              "mix": [crowd + labeled]}[mode]
    states = []
    for stage in stages:
        states.append(train(stage, config, model, dev_set))
    return model, states


# -- scoring -----------------------------------------------------------------

def encoder_scores(model: EncoderModel, queries: Mapping[str, str], articles: Sequence[FactCheckArticle],
                   combo: str, cfg: NormConfig = DEFAULT_CONFIG) -> Dict[str, Dict[str, float]]:
    fields = article_field_tokens(articles, combo, cfg)
    ids = sorted(fields)
    A = model.encode_many([model.article_input(fields[i]) for i in ids])
    out = {}
    for qid in sorted(queries):
        try:
            qv = model.encode_many([model.tweet_input(normalize(queries[qid], cfg))])[0]
            sims = np.clip(A @ qv, -1.0, 1.0)
        except EmptyInput:
            sims = np.zeros(len(ids))
        out[qid] = dict(zip(ids, sims.tolist()))
    return out


def lexical_scores(kind: str, queries: Mapping[str, str], articles: Sequence[FactCheckArticle],
                   combo: str, cfg: NormConfig = DEFAULT_CONFIG) -> Dict[str, Dict[str, float]]:
    docs = tokenize_collection(articles, combo, cfg)
    model = InvertedIndex.build(docs, combo) if kind == "bm25" else TfIdfModel(docs, combo)
    return {qid: model.scores(normalize(queries[qid], cfg)) for qid in sorted(queries)}


def rank_all(scores: Mapping[str, Mapping[str, float]], k: int) -> List[RankedList]:
    return [RankedList.from_scores(q, scores[q], k) for q in sorted(scores)]


def feature_matrix(queries: Mapping[str, str], articles: Sequence[FactCheckArticle],
                   encoders: Mapping[str, EncoderModel], mode: str = "ensemble", topk: int = 100,
                   cfg: NormConfig = DEFAULT_CONFIG) -> FeatureSet:
    """Reranking features for every query; ``encoders`` maps field combo to model."""
    slots = ENSEMBLE_SLOTS if mode == "ensemble" else SINGLE_SLOTS
    per_slot = {}
    for scorer, combo in slots:
        if scorer == "tfidf":
            per_slot[(scorer, combo)] = lexical_scores("tfidf", queries, articles, combo, cfg)
        else:
            if combo not in encoders:
                raise MissingScorer(f"no encoder for field combination {combo!r}")
            per_slot[(scorer, combo)] = encoder_scores(encoders[combo], queries, articles, combo, cfg)
    fs = None
    for qid in sorted(queries):
        f = build_features(qid, {s: per_slot[s][qid] for s in per_slot}, slots, ("encoder", "cts"), topk)
        fs = f if fs is None else fs.concat(f)
    if fs is None:
        fs = FeatureSet([], [], [], np.zeros((0, 0)))
    return fs


def write_features(path, fs: FeatureSet, meta: Mapping) -> None:
    from .fileio import write_tsv

    rows = [("query_id", "doc_id", *fs.names)]
    for q, d, x in zip(fs.query_ids, fs.doc_ids, fs.X):
        rows.append((q, d, *(repr(float(v)) for v in x)))
    write_tsv(path, rows, {**meta, "layout_version": fs.layout_version})


def read_features(path) -> FeatureSet:
    meta, rows = read_tsv(path)
    if not rows or rows[0][:2] != ["query_id", "doc_id"]:
        raise FormatError(f"{path}: missing feature column header")
    names = rows[0][2:]
    q, d, X = [], [], []
    for i, row in enumerate(rows[1:], 2):
        if len(row) != len(names) + 2:
            raise FormatError(f"{path}: feature row {i} has {len(row)} columns")
        q.append(row[0])
        d.append(row[1])
        X.append([float(v) for v in row[2:]])
    version = int(meta.get("layout_version", 0))
    return FeatureSet(names, q, d, np.asarray(X, dtype=float).reshape(len(q), len(names)), version)


def default_data_dir() -> Path:
    from importlib import resources

    return Path(str(resources.files("factmatch.data").joinpath("minicorpus")))


__all__ = [
    "FIELD_COMBOS", "TRAIN_MODES", "TrainingData", "read_queries", "read_split", "split_rows",
    "crowd_examples", "labeled_examples", "train_encoder", "encoder_scores", "lexical_scores",
    "rank_all", "feature_matrix", "write_features", "read_features", "default_data_dir",
]
