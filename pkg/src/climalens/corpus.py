"""Snippet ingestion, GDELT TV fetching with fixture replay, and monthly buckets."""

from __future__ import annotations

import csv
import dataclasses
import datetime as dt
import hashlib
import io
import json
import logging
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

from .errors import FormatError, MissingFixture, TransportError
from .months import MonthKey, MonthWindow
from .textkit import (SentimentLexicon, ThemeVocabulary, compile_pattern,
                      count_sentiment, count_theme_matches, pattern_matches_at, tokenize)

log = logging.getLogger(__name__)

SNIPPET_FIELDS = ("station", "timestamp", "keyword", "text")
BUCKET_FIELDS = ("month", "snippet_count", "word_count", "n_cc", "n_re", "n_ghi",
                 "pos_words", "neg_words")
UTC = dt.timezone.utc


@dataclass(frozen=True)
class Snippet:
    station: str
    timestamp: dt.datetime
    text: str
    matched_keyword: str | None = None

    @property
    def month(self) -> MonthKey:
        return MonthKey(self.timestamp.year, self.timestamp.month)

    def record(self) -> dict[str, str]:
        return {
            "station": self.station,
            "timestamp": format_timestamp(self.timestamp),
            "keyword": self.matched_keyword or "",
            "text": self.text,
        }


def parse_timestamp(text: str) -> dt.datetime:
    """Parse ISO-8601 (or GDELT's ``YYYYMMDDHHMMSS`` / ``YYYYMMDDTHHMMSSZ``) to a UTC minute."""
    s = text.strip()
    if len(s) == 14 and s.isdigit():
        stamp = dt.datetime.strptime(s, "%Y%m%d%H%M%S")
    elif len(s) == 16 and s[8] == "T" and s[-1] in "Zz":
        stamp = dt.datetime.strptime(s[:15], "%Y%m%dT%H%M%S")
    else:
        if s.endswith(("Z", "z")):
            s = s[:-1] + "+00:00"
        stamp = dt.datetime.fromisoformat(s)
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=UTC)
    return stamp.astimezone(UTC).replace(second=0, microsecond=0)


def format_timestamp(stamp: dt.datetime) -> str:
    return stamp.astimezone(UTC).strftime("%Y-%m-%dT%H:%MZ")


def _snippet_from_record(rec: Mapping[str, object]) -> Snippet:
    station = str(rec.get("station") or "").strip()
    stamp = str(rec.get("timestamp") or "").strip()
    text = str(rec.get("text") or "")
    missing = [name for name, value in
               (("station", station), ("timestamp", stamp), ("text", text.strip())) if not value]
    if missing:
        raise ValueError(f"missing {', '.join(missing)}")
    try:
        when = parse_timestamp(stamp)
    except ValueError:
        raise ValueError(f"bad timestamp {stamp!r}") from None
    keyword = str(rec.get("keyword") or "").strip() or None
    return Snippet(station.upper(), when, text.strip(), keyword)


def parse_snippets(stream: IO[str], fmt: str = "csv", strict: bool = False,
                   source: str | None = None) -> tuple[list[Snippet], list[FormatError]]:
    """Parse a snippet CSV or JSONL stream.

    Bad records are collected as :class:`FormatError` (with line numbers) and
    skipped; with ``strict=True`` the first one is raised instead.
    """
    snippets: list[Snippet] = []
    errors: list[FormatError] = []

    def reject(msg: str, lineno: int):
        err = FormatError(msg, lineno, source)
        if strict:
            raise err
        errors.append(err)

    if fmt == "csv":
        reader = csv.DictReader(stream)
        header = reader.fieldnames or []
        absent = [f for f in ("station", "timestamp", "text") if f not in header]
        if absent:
            raise FormatError(f"CSV header lacks {', '.join(absent)}", 1, source)
        start = reader.line_num
        for rec in reader:
            try:
                if None in rec:
                    raise ValueError("too many fields")
                snippets.append(_snippet_from_record(rec))
            except ValueError as exc:
                reject(str(exc), start + 1)
            start = reader.line_num
    elif fmt == "jsonl":
        for lineno, line in enumerate(stream, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                if not isinstance(rec, dict):
                    raise ValueError("record is not a JSON object")
                snippets.append(_snippet_from_record(rec))
            except ValueError as exc:
                reject(str(exc), lineno)
    else:
        raise ValueError(f"unknown snippet format {fmt!r}")
    return snippets, errors


def read_snippet_file(path, strict: bool = False) -> tuple[list[Snippet], list[FormatError]]:
    path = Path(path)
    fmt = "jsonl" if path.suffix in (".jsonl", ".json") else "csv"
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_snippets(fh, fmt, strict=strict, source=str(path))


def write_snippets(snippets: Iterable[Snippet], stream: IO[str], fmt: str = "csv") -> None:
    if fmt == "csv":
        writer = csv.DictWriter(stream, SNIPPET_FIELDS, lineterminator="\n")
        writer.writeheader()
        for s in snippets:
            writer.writerow(s.record())
    elif fmt == "jsonl":
        for s in snippets:
            stream.write(json.dumps(s.record(), ensure_ascii=False) + "\n")
    else:
        raise ValueError(f"unknown snippet format {fmt!r}")


def deduplicate(snippets: Iterable[Snippet]) -> list[Snippet]:
    """Collapse exact (station, timestamp, text) repeats, keeping the first."""
    seen = set()
    out = []
    for s in snippets:
        key = (s.station, s.timestamp, s.text)
        if key not in seen:
            seen.add(key)
            out.append(s)
    return out


def in_window(snippets: Iterable[Snippet], window: MonthWindow) -> list[Snippet]:
    return [s for s in snippets if s.month in window]


# -- fetching ---------------------------------------------------------------

@dataclass(frozen=True)
class DateRange:
    start: dt.date
    end: dt.date  # inclusive

    @classmethod
    def from_window(cls, window: MonthWindow) -> "DateRange":
        return cls(window.start.first_day(), window.end.last_day())

    def month_slices(self) -> list["DateRange"]:
        out = []
        month = MonthKey.of(self.start)
        while month.first_day() <= self.end:
            out.append(DateRange(max(self.start, month.first_day()),
                                 min(self.end, month.last_day())))
            month = month.shift(1)
        return out


def fixture_key(query: str, station: str, window: DateRange) -> str:
    """Stable fixture key.

    SHA-256 hex digest of the UTF-8 bytes of
    ``query.strip().lower() + "\\n" + station.strip().upper() + "\\n" +
    start.isoformat() + "\\n" + end.isoformat()``.
    """
    material = "\n".join([query.strip().lower(), station.strip().upper(),
                          window.start.isoformat(), window.end.isoformat()])
    return hashlib.sha256(material.encode("utf-8")).hexdigest()


def encode_records(records: Iterable[Mapping[str, str]]) -> bytes:
    lines = []
    for rec in records:
        ordered = {k: rec.get(k, "") for k in SNIPPET_FIELDS}
        lines.append(json.dumps(ordered, ensure_ascii=False, separators=(",", ":")))
    return "".join(line + "\n" for line in lines).encode("utf-8")


def decode_records(payload: bytes) -> list[dict[str, str]]:
    return [json.loads(line) for line in payload.decode("utf-8").splitlines() if line.strip()]


class FixtureStore:
    """Directory of recorded responses, one ``<key>.jsonl`` file per request."""

    def __init__(self, directory):
        self.directory = Path(directory)

    def path(self, key: str) -> Path:
        return self.directory / f"{key}.jsonl"

    def load(self, key: str) -> bytes:
        p = self.path(key)
        if not p.is_file():
            raise MissingFixture(key, p)
        return p.read_bytes()

    def save(self, key: str, payload: bytes) -> Path:
        self.directory.mkdir(parents=True, exist_ok=True)
        p = self.path(key)
        tmp = p.with_suffix(".tmp")
        tmp.write_bytes(payload)
        tmp.replace(p)
        return p


class RateLimiter:
    """Enforce a minimum interval between calls, shared across threads."""

    def __init__(self, min_interval: float, clock=time.monotonic, sleep=time.sleep):
        self.min_interval = min_interval
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next = 0.0

    def wait(self) -> None:
        with self._lock:
            now = self._clock()
            if now < self._next:
                self._sleep(self._next - now)
                now = self._next
            self._next = now + self.min_interval


class GdeltTvClient:
    """Minimal client for the GDELT Television Explorer clip API.

    The window is paged one calendar month per request; pages are returned
    concatenated in chronological order.
    """

    BASE_URL = "https://api.gdeltproject.org/api/v2/tv/tv"

    def __init__(self, base_url: str | None = None, min_interval: float = 1.0,
                 timeout: float = 30.0, max_records: int = 3000, session=None):
        import requests

        self.base_url = base_url or self.BASE_URL
        self.timeout = timeout
        self.max_records = max_records
        self.limiter = RateLimiter(min_interval)
        self.session = session or requests.Session()
        self._inflight: dict[tuple[str, str], threading.Lock] = {}
        self._guard = threading.Lock()

    def page_params(self, query: str, station: str, page: DateRange) -> dict[str, str]:
        start = dt.datetime.combine(page.start, dt.time())
        end = dt.datetime.combine(page.end, dt.time(23, 59, 59))
        return {
            "query": f'"{query}" station:{station}',
            "mode": "clipgallery",
            "format": "json",
            "maxrecords": str(self.max_records),
            "startdatetime": start.strftime("%Y%m%d%H%M%S"),
            "enddatetime": end.strftime("%Y%m%d%H%M%S"),
        }

    def _get(self, params: dict[str, str]) -> dict:
        import requests

        self.limiter.wait()
        try:
            resp = self.session.get(self.base_url, params=params, timeout=self.timeout)
            resp.raise_for_status()
            return resp.json() if resp.content.strip() else {}
        except (requests.RequestException, ValueError) as exc:
            raise TransportError(f"GET {self.base_url} failed: {exc}") from exc

    def fetch(self, query: str, station: str, window: DateRange) -> list[dict[str, str]]:
        with self._guard:
            lock = self._inflight.setdefault((query, station), threading.Lock())
        with lock:
            records = []
            for page in window.month_slices():
                payload = self._get(self.page_params(query, station, page))
                for clip in payload.get("clips", []):
                    records.append({
                        "station": str(clip.get("station", station)),
                        "timestamp": str(clip.get("date", "")),
                        "keyword": query,
                        "text": str(clip.get("snippet", "")),
                    })
            return records


def fetch_snippets(query: str, station: str, window: DateRange | MonthWindow,
                   transport: str = "replay", store: FixtureStore | None = None,
                   client: GdeltTvClient | None = None) -> list[dict[str, str]]:
    """Return raw snippet records for one (query, station, window).

    ``replay`` reads the recorded fixture; ``live`` queries GDELT and, when a
    store is given, records the response for later replay.
    """
    if isinstance(window, MonthWindow):
        window = DateRange.from_window(window)
    key = fixture_key(query, station, window)
    if transport == "replay":
        if store is None:
            raise MissingFixture(key, None)
        return decode_records(store.load(key))
    if transport != "live":
        raise ValueError(f"unknown transport {transport!r}")
    client = client or GdeltTvClient()
    records = client.fetch(query, station, window)
    if store is not None:
        store.save(key, encode_records(records))
    return records


# -- keyword filtering ------------------------------------------------------

def first_keyword(tokens: Sequence[str], keywords: Sequence[str]) -> str | None:
    """The keyword occurring earliest in ``tokens`` (list order breaks ties)."""
    patterns = [compile_pattern(k) for k in keywords]
    for i in range(len(tokens)):
        for kw, pat in zip(keywords, patterns):
            if pattern_matches_at(pat, tokens, i):
                return kw
    return None


def filter_by_keywords(snippets: Iterable[Snippet], keywords: Sequence[str]) -> list[Snippet]:
    if not keywords:
        raise ValueError("keyword list is empty")
    kept = []
    for s in snippets:
        kw = first_keyword(tokenize(s.text), keywords)
        if kw is not None:
            kept.append(dataclasses.replace(s, matched_keyword=kw))
    return kept


# -- monthly aggregation ----------------------------------------------------

@dataclass(frozen=True)
class MonthlyBucket:
    month: MonthKey
    snippet_count: int = 0
    word_count: int = 0
    theme_counts: Mapping[str, int] = field(default_factory=dict)
    pos_words: int = 0
    neg_words: int = 0

    def __add__(self, other: "MonthlyBucket") -> "MonthlyBucket":
        if other.month != self.month:
            raise ValueError(f"cannot merge buckets for {self.month} and {other.month}")
        themes = dict(self.theme_counts)
        for theme, n in other.theme_counts.items():
            themes[theme] = themes.get(theme, 0) + n
        return MonthlyBucket(self.month, self.snippet_count + other.snippet_count,
                             self.word_count + other.word_count, dict(sorted(themes.items())),
                             self.pos_words + other.pos_words, self.neg_words + other.neg_words)

    def theme(self, name: str) -> int:
        return self.theme_counts.get(name, 0)


def bucket_snippet(snippet: Snippet, vocabularies: Mapping[str, ThemeVocabulary],
                   lexicon: SentimentLexicon | None) -> MonthlyBucket:
    tokens = tokenize(snippet.text)
    themes = {t: count_theme_matches(tokens, v) for t, v in sorted(vocabularies.items())}
    pos, neg = count_sentiment(tokens, lexicon) if lexicon is not None else (0, 0)
    return MonthlyBucket(snippet.month, 1, len(tokens), themes, pos, neg)


def aggregate_monthly(snippets: Iterable[Snippet], vocabularies: Mapping[str, ThemeVocabulary],
                      lexicon: SentimentLexicon | None,
                      window: MonthWindow | None = None) -> list[MonthlyBucket]:
    """Pool snippets from all stations into per-month buckets, sorted by month.

    With a window, snippets outside it are ignored and every month of the
    window gets a bucket, empty months included.
    """
    zero = {t: 0 for t in sorted(vocabularies)}
    buckets: dict[MonthKey, MonthlyBucket] = {}
    if window is not None:
        buckets = {m: MonthlyBucket(m, theme_counts=zero) for m in window}
    for s in snippets:
        if window is not None and s.month not in window:
            continue
        b = bucket_snippet(s, vocabularies, lexicon)
        prev = buckets.get(b.month)
        buckets[b.month] = b if prev is None else prev + b
    return [buckets[m] for m in sorted(buckets)]


def write_buckets(buckets: Iterable[MonthlyBucket], stream: IO[str]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(BUCKET_FIELDS)
    for b in buckets:
        writer.writerow([str(b.month), b.snippet_count, b.word_count, b.theme("CC"),
                         b.theme("RE"), b.theme("GHI"), b.pos_words, b.neg_words])


def read_buckets(stream: IO[str]) -> list[MonthlyBucket]:
    out = []
    for rec in csv.DictReader(stream):
        out.append(MonthlyBucket(
            MonthKey.parse(rec["month"]), int(rec["snippet_count"]), int(rec["word_count"]),
            {"CC": int(rec["n_cc"]), "GHI": int(rec["n_ghi"]), "RE": int(rec["n_re"])},
            int(rec["pos_words"]), int(rec["neg_words"])))
    return out


def buckets_to_text(buckets: Iterable[MonthlyBucket]) -> str:
    buf = io.StringIO()
    write_buckets(buckets, buf)
    return buf.getvalue()
