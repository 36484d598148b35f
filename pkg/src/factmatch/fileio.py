"""File formats shared across commands: qrels, predictions, split TSVs and
JSON artifacts, all written atomically with a metadata header."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from collections import defaultdict
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

from .errors import FormatError

HEADER_PREFIX = "#"


def config_hash(config: Mapping) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def header_line(meta: Mapping) -> str:
    """``# key=value ...`` header, keys sorted so output is byte-stable."""
    return HEADER_PREFIX + " " + " ".join(f"{k}={meta[k]}" for k in sorted(meta))


def parse_header(line: str) -> Dict[str, str]:
    out = {}
    for item in line.lstrip(HEADER_PREFIX).split():
        if "=" in item:
            k, v = item.split("=", 1)
            out[k] = v
    return out


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=str(path.parent))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_tsv(path, rows: Iterable[Iterable], meta: Optional[Mapping] = None) -> None:
    lines = []
    if meta:
        lines.append(header_line(meta))
    for row in rows:
        lines.append("\t".join(str(x) for x in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_tsv(path) -> Tuple[Dict[str, str], List[List[str]]]:
    meta: Dict[str, str] = {}
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith(HEADER_PREFIX):
                meta.update(parse_header(line))
                continue
            rows.append(line.split("\t"))
    return meta, rows


Qrels = Dict[str, Dict[str, int]]


def read_qrels(path) -> Qrels:
    """TREC layout: ``query_id 0 article_id relevance`` (tab separated)."""
    _, rows = read_tsv(path)
    qrels: Qrels = defaultdict(dict)
    for i, row in enumerate(rows, 1):
        if len(row) != 4:
            raise FormatError(f"{path}: qrels row {i} has {len(row)} columns, expected 4")
        qid, _, did, rel = row
        try:
            rel_val = int(rel)
        except ValueError as exc:
            raise FormatError(f"{path}: qrels row {i} has non-integer relevance {rel!r}") from exc
        if rel_val not in (0, 1):
            raise FormatError(f"{path}: qrels row {i} relevance must be 0 or 1")
        if did in qrels[qid]:
            raise FormatError(f"{path}: duplicate qrels entry ({qid}, {did})")
        qrels[qid][did] = rel_val
    return dict(qrels)


def write_qrels(path, qrels: Qrels, meta: Optional[Mapping] = None) -> None:
    rows = []
    for qid in sorted(qrels):
        for did in sorted(qrels[qid]):
            rows.append((qid, 0, did, qrels[qid][did]))
    write_tsv(path, rows, meta)


def read_predictions(path):
    """Predictions TSV: ``query_id article_id rank score tag``.

    Returns ``{query_id: [(article_id, score), ...]}`` ordered by rank.
    """
    from .evalmetrics import RankedList

    _, rows = read_tsv(path)
    per_q = defaultdict(list)
    for i, row in enumerate(rows, 1):
        if len(row) != 5:
            raise FormatError(f"{path}: prediction row {i} has {len(row)} columns, expected 5")
        qid, did, rank, score, _tag = row
        try:
            per_q[qid].append((int(rank), did, float(score)))
        except ValueError as exc:
            raise FormatError(f"{path}: bad rank/score on prediction row {i}") from exc
    runs = []
    for qid in per_q:
        items = sorted(per_q[qid])
        runs.append(RankedList(qid, [d for _, d, _ in items], [s for _, _, s in items]))
    return runs


def write_predictions(path, runs, tag: str = "factmatch", meta: Optional[Mapping] = None) -> None:
    rows = []
    for run in runs:
        for rank, (did, score) in enumerate(zip(run.doc_ids, run.scores), 1):
            rows.append((run.query_id, did, rank, repr(float(score)), tag))
    write_tsv(path, rows, meta)
