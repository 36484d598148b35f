import dataclasses
import json

import pytest

from factmatch.corpus import (
    FactCheckArticle, Tweet, canonical_url, corpus_stats, ingest_tweets, load_articles,
    parse_article_html, resolve_triples,
)
from factmatch.errors import FormatError, ParseError
from factmatch.textnorm import NormConfig


def write_jsonl(path, rows):
    path.write_text("".join((r if isinstance(r, str) else json.dumps(r)) + "\n" for r in rows), encoding="utf-8")
    return path


def tw(i, text="some text", **kw):
    return {"id": str(i), "text": text, "in_reply_to": kw.get("reply"), "conversation_root": kw.get("root"),
            "urls": kw.get("urls", [])}


@pytest.mark.parametrize("raw,expected", [
    ("https://WWW.Snopes.com/fact-check/x/", "https://www.snopes.com/fact-check/x"),
    ("https://www.snopes.com/fact-check/x/?utm_source=tw#top", "https://www.snopes.com/fact-check/x"),
    ("https://www.snopes.com/Fact-Check/X", "https://www.snopes.com/Fact-Check/X"),
    ("www.snopes.com/fact-check/x", "//www.snopes.com/fact-check/x"),
])
def test_canonical_url(raw, expected):
    assert canonical_url(raw) == expected
    assert canonical_url(canonical_url(raw)) == canonical_url(raw)


def test_ingest_three_lines(tmp_path):
    res = ingest_tweets(write_jsonl(tmp_path / "t.jsonl", [tw(1), tw(2), tw(3)]))
    assert [t.id for t in res] == ["1", "2", "3"] and res.skipped == 0


def test_ingest_empty_text_skipped(tmp_path):
    res = ingest_tweets(write_jsonl(tmp_path / "t.jsonl", [tw(1), tw(2, "")]))
    assert len(res) == 1 and res.filtered == 1 and res.skipped == 1


def test_ingest_mostly_malformed_is_format_error(tmp_path):
    rows = [tw(i) for i in range(4)] + ["{broken"] * 6
    with pytest.raises(FormatError):
        ingest_tweets(write_jsonl(tmp_path / "t.jsonl", rows))


def test_ingest_half_malformed_is_tolerated(tmp_path):
    rows = [tw(i) for i in range(5)] + ["{broken"] * 5
    assert ingest_tweets(write_jsonl(tmp_path / "t.jsonl", rows)).malformed == 5


def test_ingest_missing_file(tmp_path):
    with pytest.raises(OSError):
        ingest_tweets(tmp_path / "nope.jsonl")


def test_ingest_fixture(fixtures):
    res = ingest_tweets(fixtures / "tweets_small.jsonl")
    assert [t.id for t in res] == ["100", "101", "102", "105"]
    assert res.malformed == 1 and res.filtered == 3
    again = ingest_tweets(fixtures / "tweets_small.jsonl")
    assert again.tweets == res.tweets


def test_ingest_require_links(tmp_path):
    path = write_jsonl(tmp_path / "t.jsonl", [tw(1), tw(2, urls=["https://a.org/x"])])
    assert [t.id for t in ingest_tweets(path, require_links=True)] == ["2"]


def test_triples_fixture(fixtures):
    tweets = ingest_tweets(fixtures / "tweets_small.jsonl").tweets
    urls = {"https://www.snopes.com/fact-check/bleach-cure-covid", "https://www.snopes.com/fact-check/obama-pledge-ban/"}
    triples = resolve_triples(tweets, urls)
    assert [(t.fc_tweet.id, t.article_url) for t in triples] == [
        ("102", "https://www.snopes.com/fact-check/bleach-cure-covid"),
        ("105", "https://www.snopes.com/fact-check/obama-pledge-ban"),
    ]
    assert triples[0].root.id == "100" and triples[0].reply.id == "101"
    assert triples[1].root is None and triples[1].reply is None


def test_triple_reply_to_root_resolves_both():
    root = Tweet("1", "claim", None, "1")
    fc = Tweet("2", "false", "1", "1", ("https://a.org/fc",))
    (t,) = resolve_triples([root, fc], {"https://a.org/fc"})
    assert t.root is root and t.reply is root


def test_triple_missing_parent():
    fc = Tweet("2", "false", "99", "98", ("https://a.org/fc",))
    (t,) = resolve_triples([fc], {"https://a.org/fc"})
    assert t.reply is None and t.root is None


def test_triple_two_urls_two_triples():
    fc = Tweet("2", "false", None, None, ("https://a.org/fc1", "https://a.org/fc2/", "https://a.org/fc1?x=1"))
    triples = resolve_triples([fc], {"https://a.org/fc1", "https://a.org/fc2"})
    assert [t.article_url for t in triples] == ["https://a.org/fc1", "https://a.org/fc2"]


def test_triple_count_bounds():
    tweets = [Tweet(str(i), "t", None, None, (f"https://a.org/{i % 3}",)) for i in range(9)]
    triples = resolve_triples(tweets, {"https://a.org/0", "https://a.org/1"})
    assert len(triples) == sum(1 for t in tweets if t.urls[0][-1] in "01")
    assert all(t.fc_tweet.urls and canonical_url(t.fc_tweet.urls[0]) == t.article_url for t in triples)


def test_parse_full_page(fixtures):
    html = (fixtures / "articles" / "bleach-cure.html").read_text(encoding="utf-8")
    a = parse_article_html(html, "https://www.snopes.com/fact-check/bleach-cure-covid/")
    assert a.title == "Does Drinking Bleach Cure COVID-19?"
    assert a.subtitle and "&amp;" not in a.subtitle
    assert a.claim
    assert a.date == "2020-04-24" and a.author == "Dan Evon"


def test_parse_jsonld_page(fixtures):
    html = (fixtures / "articles" / "obama-ban.html").read_text(encoding="utf-8")
    a = parse_article_html(html, "https://www.snopes.com/fact-check/obama-pledge-ban/")
    assert a.title == "Did Obama Ban the Pledge of Allegiance?"
    assert "Pledge" in a.claim
    assert a.date == "2016-08-09" and a.author == "Snopes"


def test_parse_regex_fallbacks(fixtures):
    html = (fixtures / "articles" / "plain-page.html").read_text(encoding="utf-8")
    a = parse_article_html(html, "plain-page")
    assert a.title and "Snopes" not in a.title
    assert a.claim and "Rating" not in a.claim
    assert a.author == "Alex Kasprak"


def test_parse_missing_subtitle():
    a = parse_article_html("<html><head><title>Only a title</title></head><body></body></html>", "u")
    assert a.title == "Only a title" and a.subtitle == "" and a.claim == "" and a.date is None


def test_parse_no_title():
    with pytest.raises(ParseError):
        parse_article_html("<html><body><p>nothing here</p></body></html>", "u")


def test_no_body_or_verdict_fields():
    names = {f.name for f in dataclasses.fields(FactCheckArticle)}
    assert names == {"url", "title", "subtitle", "claim", "date", "author"}


def test_load_article_dir(fixtures):
    arts = load_articles(fixtures / "articles")
    assert len(arts) == 3
    assert {a.author for a in arts} == {"Dan Evon", "Snopes", "Alex Kasprak"}
    assert "plain-page" in {a.url for a in arts}


def test_load_articles_duplicate(tmp_path):
    rec = {"url": "https://a.org/x/", "title": "T"}
    path = write_jsonl(tmp_path / "a.jsonl", [rec, {**rec, "url": "https://A.org/x"}])
    with pytest.raises(FormatError):
        load_articles(path)


def test_load_articles_bad_record(tmp_path):
    with pytest.raises(FormatError):
        load_articles(write_jsonl(tmp_path / "a.jsonl", [{"url": "u", "title": ""}]))


def test_fields():
    a = FactCheckArticle("u", "T", "S", "C")
    assert a.fields("c") == ["C"] and a.fields("ct") == ["T", "C"] and a.fields("cts") == ["T", "S", "C"]
    with pytest.raises(ValueError):
        a.fields("x")


def test_corpus_stats_example():
    cfg = NormConfig(stopwords=frozenset(), stem=False)
    s = corpus_stats([Tweet("1", "a b c"), Tweet("2", "a b")], cfg)
    assert s == {"unique_tweets": 2, "mean_words": 2.5, "median_words": 2.5, "max_words": 3, "vocab_size": 3}


def test_corpus_stats_empty_and_duplicates():
    assert corpus_stats([]) == {"unique_tweets": 0, "mean_words": 0.0, "median_words": 0.0,
                                "max_words": 0, "vocab_size": 0}
    assert corpus_stats([Tweet("1", "same words"), Tweet("2", "same words")])["unique_tweets"] == 2
