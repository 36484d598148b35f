"""Tweets, fact-checking articles, conversation triples and offline ingestion."""

from __future__ import annotations

import json
import logging
import re
import statistics
from dataclasses import dataclass, field
from html import unescape
from html.parser import HTMLParser
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple
from urllib.parse import urlsplit, urlunsplit

from .errors import FormatError, ParseError
from .textnorm import DEFAULT_CONFIG, NormConfig, normalize

logger = logging.getLogger(__name__)

MALFORMED_LIMIT = 0.5


def canonical_url(url: str) -> str:
    """Lowercase the host, drop query string and fragment, drop trailing slash."""
    url = url.strip()
    parts = urlsplit(url)
    if not parts.netloc and "/" in parts.path and not url.startswith("/"):
        parts = urlsplit("//" + url)
    path = parts.path.rstrip("/")
    return urlunsplit((parts.scheme.lower(), parts.netloc.lower(), path, "", ""))


@dataclass(frozen=True)
class Tweet:
    id: str
    text: str
    in_reply_to: Optional[str] = None
    conversation_root: Optional[str] = None
    urls: Tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "in_reply_to": self.in_reply_to,
            "conversation_root": self.conversation_root,
            "urls": list(self.urls),
        }


@dataclass(frozen=True)
class FactCheckArticle:
    url: str
    title: str
    subtitle: str = ""
    claim: str = ""
    date: Optional[str] = None
    author: Optional[str] = None

    def __post_init__(self):
        if not self.title.strip():
            raise ValueError(f"article {self.url!r} has an empty title")

    @property
    def id(self) -> str:
        return canonical_url(self.url)

    def fields(self, combo: str) -> List[str]:
        """Article text fields for a field combination: c, ct or cts."""
        if combo == "c":
            return [self.claim]
        if combo == "ct":
            return [self.title, self.claim]
        if combo == "cts":
            return [self.title, self.subtitle, self.claim]
        raise ValueError(f"unknown field combination {combo!r}")

    def to_dict(self) -> dict:
        return {
            "url": self.url,
            "title": self.title,
            "subtitle": self.subtitle,
            "claim": self.claim,
            "date": self.date,
            "author": self.author,
        }


@dataclass(frozen=True)
class ConversationTriple:
    fc_tweet: Tweet
    article_url: str
    root: Optional[Tweet] = None
    reply: Optional[Tweet] = None


@dataclass
class IngestResult:
    tweets: List[Tweet] = field(default_factory=list)
    malformed: int = 0
    filtered: int = 0

    @property
    def skipped(self) -> int:
        return self.malformed + self.filtered

    def __iter__(self) -> Iterator[Tweet]:
        return iter(self.tweets)

    def __len__(self) -> int:
        return len(self.tweets)

    def __getitem__(self, i):
        return self.tweets[i]


_STATUS_RE = re.compile(r"(?:twitter|x)\.com/[^/]+/status(?:es)?/(\d+)", re.IGNORECASE)


def _parse_tweet(obj) -> Optional[Tweet]:
    if not isinstance(obj, dict):
        return None
    tid, text = obj.get("id"), obj.get("text")
    if tid is None or not isinstance(text, str):
        return None
    urls = obj.get("urls") or []
    if not isinstance(urls, list) or not all(isinstance(u, str) for u in urls):
        return None

    def opt(key):
        v = obj.get(key)
        return None if v in (None, "") else str(v)

    return Tweet(
        id=str(tid),
        text=text,
        in_reply_to=opt("in_reply_to"),
        conversation_root=opt("conversation_root"),
        urls=tuple(urls),
    )


def _links_to_itself(tweet: Tweet) -> bool:
    for u in tweet.urls:
        m = _STATUS_RE.search(u)
        if m and m.group(1) == tweet.id:
            return True
    return False


def ingest_tweets(path, require_links: bool = False) -> IngestResult:
    """Read a tweets JSONL dump, dropping malformed lines and filtered tweets.

    Filtered: empty text, self-links, duplicate ids, and (with
    ``require_links``) tweets without any URL.
    """
    result = IngestResult()
    seen = set()
    total = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            total += 1
            try:
                tweet = _parse_tweet(json.loads(line))
            except json.JSONDecodeError:
                tweet = None
            if tweet is None:
                result.malformed += 1
                logger.debug("%s:%d malformed tweet line", path, lineno)
                continue
            if (
                not tweet.text.strip()
                or _links_to_itself(tweet)
                or tweet.id in seen
                or (require_links and not tweet.urls)
            ):
                result.filtered += 1
                continue
            seen.add(tweet.id)
            result.tweets.append(tweet)
    if total and result.malformed / total > MALFORMED_LIMIT:
        raise FormatError(
            f"{path}: {result.malformed} of {total} lines are malformed; wrong file?"
        )
    return result


def resolve_triples(tweets: Sequence[Tweet], article_urls: Iterable[str]) -> List[ConversationTriple]:
    """One triple per (tweet, linked fact-check article) with root and reply looked up by id."""
    wanted = {canonical_url(u) for u in article_urls}
    by_id: Dict[str, Tweet] = {t.id: t for t in tweets}
    triples = []
    for tw in tweets:
        matched = []
        for u in tw.urls:
            cu = canonical_url(u)
            if cu in wanted and cu not in matched:
                matched.append(cu)
        if not matched:
            continue
        root = by_id.get(tw.conversation_root) if tw.conversation_root else None
        reply = by_id.get(tw.in_reply_to) if tw.in_reply_to else None
        if root is not None and root.id == tw.id:
            root = None
        if reply is not None and reply.id == tw.id:
            reply = None
        for cu in matched:
            triples.append(ConversationTriple(fc_tweet=tw, article_url=cu, root=root, reply=reply))
    return triples


# -- article pages ---------------------------------------------------------

class _MetaCollector(HTMLParser):
    _TRACKED = ("title", "h1", "subtitle", "claim", "author", "script")

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.meta: Dict[str, str] = {}
        self.found: Dict[str, str] = {}
        self.canonical: Optional[str] = None
        self.times: List[str] = []
        self.jsonld: List[str] = []
        self._stack: List[Tuple[str, Optional[str]]] = []
        self._buf: Dict[str, List[str]] = {}

    def _slot(self, tag, attrs):
        cls = (attrs.get("class") or "").lower().split()
        if tag == "script":
            return "jsonld" if (attrs.get("type") or "").lower() == "application/ld+json" else None
        if tag in ("title", "h1"):
            return tag
        if any(c in ("subtitle", "sub-title", "article-subtitle") for c in cls):
            return "subtitle"
        if any(c in ("claim", "claim-text", "claim_cont") for c in cls) or attrs.get("itemprop") == "claimReviewed":
            return "claim"
        if any(c in ("author", "author-name", "byline") for c in cls) or attrs.get("rel") == "author":
            return "author"
        return None

    def handle_starttag(self, tag, attrs):
        attrs = dict(attrs)
        if tag == "meta":
            key = (attrs.get("property") or attrs.get("name") or attrs.get("itemprop") or "").lower()
            if key and attrs.get("content") is not None and key not in self.meta:
                self.meta[key] = attrs["content"]
            return
        if tag == "link" and (attrs.get("rel") or "").lower() == "canonical":
            self.canonical = attrs.get("href")
            return
        if tag == "time" and attrs.get("datetime"):
            self.times.append(attrs["datetime"])
        if tag in ("br", "img", "input", "hr"):
            return
        slot = self._slot(tag, attrs)
        self._stack.append((tag, slot))
        if slot and slot not in self._buf:
            self._buf[slot] = []

    def handle_endtag(self, tag):
        for i in range(len(self._stack) - 1, -1, -1):
            if self._stack[i][0] == tag:
                closed = self._stack[i:]
                del self._stack[i:]
                for _, slot in closed:
                    if slot == "jsonld":
                        self.jsonld.append("".join(self._buf.pop("jsonld", [])))
                    elif slot and slot not in self.found:
                        text = " ".join("".join(self._buf.get(slot, [])).split())
                        if text:
                            self.found[slot] = text
                return

    def handle_data(self, data):
        for _, slot in self._stack:
            if slot and slot not in self.found:
                self._buf.setdefault(slot, []).append(data)


_CLAIM_RE = re.compile(r"Claim\s*:\s*(.+?)(?:\s+Rating\s*:|$)", re.IGNORECASE | re.DOTALL)
_DATE_RE = re.compile(r"\b(\d{4}-\d{2}-\d{2})")
_TAG_RE = re.compile(r"<[^>]+>")
_HEADLINE_TYPES = {"Article", "NewsArticle", "ClaimReview", "WebPage", "BlogPosting", "ReportageNewsArticle"}
_TITLE_SUFFIX_RE = re.compile(r"\s*[|\-–]\s*Snopes(?:\.com)?\s*$", re.IGNORECASE)


def _walk_jsonld(obj) -> Iterator[dict]:
    if isinstance(obj, dict):
        yield obj
        for v in obj.values():
            yield from _walk_jsonld(v)
    elif isinstance(obj, list):
        for v in obj:
            yield from _walk_jsonld(v)


def _iso_date(value: Optional[str]) -> Optional[str]:
    if not value:
        return None
    m = _DATE_RE.search(value)
    return m.group(1) if m else None


def parse_article_html(html: str, url: str) -> FactCheckArticle:
    """Extract title/subtitle/claim/date/author from a stored article page.

    Article body and rating are never read.
    """
    p = _MetaCollector()
    p.feed(html)
    p.close()
    ld: Dict[str, str] = {}
    for blob in p.jsonld:
        try:
            data = json.loads(blob)
        except json.JSONDecodeError:
            continue
        for node in _walk_jsonld(data):
            if "claimReviewed" in node and "claim" not in ld:
                ld["claim"] = str(node["claimReviewed"])
            types = node.get("@type")
            types = {types} if isinstance(types, str) else set(types or ())
            if "headline" in node and "title" not in ld and types & _HEADLINE_TYPES:
                ld["title"] = str(node["headline"])
            if "datePublished" in node and "date" not in ld:
                ld["date"] = str(node["datePublished"])
            author = node.get("author")
            if author and "author" not in ld:
                if isinstance(author, list) and author:
                    author = author[0]
                name = author.get("name") if isinstance(author, dict) else author
                if isinstance(name, str):
                    ld["author"] = name

    meta = p.meta
    title = (
        meta.get("og:title")
        or p.found.get("h1")
        or ld.get("title")
        or _TITLE_SUFFIX_RE.sub("", p.found.get("title", ""))
    )
    title = " ".join(unescape(title or "").split())
    if not title:
        raise ParseError(f"no title found for {url}")

    subtitle = p.found.get("subtitle") or meta.get("og:description") or meta.get("description") or ""
    claim = p.found.get("claim") or ld.get("claim") or ""
    if not claim:
        m = _CLAIM_RE.search(" ".join(_TAG_RE.sub(" ", html).split()))
        if m:
            claim = m.group(1)
    date = (
        _iso_date(meta.get("article:published_time"))
        or _iso_date(ld.get("date"))
        or next((d for d in map(_iso_date, p.times) if d), None)
        or _iso_date(meta.get("date"))
    )
    author = meta.get("author") or meta.get("article:author") or ld.get("author") or p.found.get("author")
    return FactCheckArticle(
        url=url,
        title=title,
        subtitle=" ".join(unescape(subtitle).split()),
        claim=" ".join(unescape(claim).split()),
        date=date,
        author=" ".join(author.split()) if author else None,
    )


def load_articles(path) -> List[FactCheckArticle]:
    """Articles from a JSONL file or from a directory of HTML snapshots.

    For HTML snapshots the URL is taken from ``<link rel=canonical>`` or
    ``og:url``, falling back to the file stem.
    """
    path = Path(path)
    articles = []
    if path.is_dir():
        for f in sorted(path.glob("*.htm*")):
            html = f.read_text(encoding="utf-8")
            probe = _MetaCollector()
            probe.feed(html)
            url = probe.canonical or probe.meta.get("og:url") or f.stem
            articles.append(parse_article_html(html, url))
    else:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    articles.append(
                        FactCheckArticle(
                            url=obj["url"],
                            title=obj["title"],
                            subtitle=obj.get("subtitle") or "",
                            claim=obj.get("claim") or "",
                            date=obj.get("date"),
                            author=obj.get("author"),
                        )
                    )
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise FormatError(f"{path}:{lineno}: bad article record ({exc})") from exc
    ids = [a.id for a in articles]
    if len(set(ids)) != len(ids):
        raise FormatError(f"{path}: duplicate article URLs")
    return articles


def corpus_stats(tweets: Sequence[Tweet], cfg: NormConfig = DEFAULT_CONFIG) -> dict:
    uniq: Dict[str, Tweet] = {}
    for t in tweets:
        uniq.setdefault(t.id, t)
    if not uniq:
        return {"unique_tweets": 0, "mean_words": 0.0, "median_words": 0.0, "max_words": 0, "vocab_size": 0}
    lengths = []
    vocab = set()
    for t in uniq.values():
        toks = normalize(t.text, cfg)
        lengths.append(len(toks))
        vocab.update(toks)
    return {
        "unique_tweets": len(uniq),
        "mean_words": sum(lengths) / len(lengths),
        "median_words": float(statistics.median(lengths)),
        "max_words": max(lengths),
        "vocab_size": len(vocab),
    }
