"""Monthly climate coverage and sentiment indices, and Table-1 style summaries."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

from .corpus import MonthlyBucket
from .errors import InsufficientData, UndefinedIndex
from .months import MonthKey

INDEX_FIELDS = ("ln_volcov", "cov_cc", "cov_re", "cov_ghi", "pos_sent", "neg_sent")
THEME_FIELD = {"CC": "cov_cc", "RE": "cov_re", "GHI": "cov_ghi"}
NAN = float("nan")


def vol_cov(bucket: MonthlyBucket) -> float:
    """Natural log of the month's snippet count."""
    if bucket.snippet_count <= 0:
        raise UndefinedIndex(f"no snippets in {bucket.month}")
    return math.log(bucket.snippet_count)


def _percent_of_words(count: int, bucket: MonthlyBucket) -> float:
    if bucket.word_count <= 0:
        raise UndefinedIndex(f"no words in {bucket.month}")
    return count / bucket.word_count * 100


def coverage_index(bucket: MonthlyBucket, theme: str) -> float:
    return _percent_of_words(bucket.theme(theme), bucket)


def sentiment_index(bucket: MonthlyBucket, polarity: str) -> float:
    if polarity == "pos":
        return _percent_of_words(bucket.pos_words, bucket)
    if polarity == "neg":
        return _percent_of_words(bucket.neg_words, bucket)
    raise ValueError(f"polarity must be 'pos' or 'neg', got {polarity!r}")


@dataclass(frozen=True)
class ClimateIndexRow:
    month: MonthKey
    ln_volcov: float
    cov_cc: float
    cov_re: float
    cov_ghi: float
    pos_sent: float
    neg_sent: float
    defined: bool

    def value(self, name: str) -> float | None:
        """Named index value, ``None`` when the month is undefined."""
        return getattr(self, name) if self.defined else None


def index_row(bucket: MonthlyBucket) -> ClimateIndexRow:
    if bucket.snippet_count == 0 or bucket.word_count == 0:
        return ClimateIndexRow(bucket.month, NAN, NAN, NAN, NAN, NAN, NAN, False)
    return ClimateIndexRow(
        bucket.month,
        vol_cov(bucket),
        coverage_index(bucket, "CC"),
        coverage_index(bucket, "RE"),
        coverage_index(bucket, "GHI"),
        sentiment_index(bucket, "pos"),
        sentiment_index(bucket, "neg"),
        True,
    )


def build_index_table(buckets: Iterable[MonthlyBucket]) -> list[ClimateIndexRow]:
    return [index_row(b) for b in buckets]


def write_index_table(rows: Iterable[ClimateIndexRow], stream: IO[str]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(("month",) + INDEX_FIELDS + ("defined",))
    for r in rows:
        values = [f"{getattr(r, f):.6f}" if r.defined else "" for f in INDEX_FIELDS]
        writer.writerow([str(r.month), *values, int(r.defined)])


def read_index_table(stream: IO[str]) -> list[ClimateIndexRow]:
    rows = []
    for rec in csv.DictReader(stream):
        defined = rec["defined"].strip() in ("1", "true", "True")
        values = [float(rec[f]) if defined else NAN for f in INDEX_FIELDS]
        rows.append(ClimateIndexRow(MonthKey.parse(rec["month"]), *values, defined))
    return rows


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    median: float
    std: float
    skew: float
    n: int


def summarize(series: Sequence[float]) -> SummaryStats:
    """Mean, median, sample std (n-1) and adjusted Fisher-Pearson skewness.

    Needs n >= 2. With n == 2, or a constant sample, skewness is NaN.
    """
    xs = [float(x) for x in series]
    n = len(xs)
    if n < 2:
        raise InsufficientData(f"need at least 2 observations, got {n}")
    mean = math.fsum(xs) / n
    ordered = sorted(xs)
    mid = n // 2
    median = ordered[mid] if n % 2 else (ordered[mid - 1] + ordered[mid]) / 2
    dev = [x - mean for x in xs]
    m2 = math.fsum(d * d for d in dev) / n
    m3 = math.fsum(d ** 3 for d in dev) / n
    std = math.sqrt(m2 * n / (n - 1))
    if n < 3 or m2 <= 1e-28 * max(1.0, mean * mean):
        skew = NAN
    else:
        skew = math.sqrt(n * (n - 1)) / (n - 2) * m3 / m2 ** 1.5
    return SummaryStats(mean, median, std, skew, n)


def write_summary(stats: dict[str, SummaryStats], stream: IO[str]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(("variable", "mean", "median", "std", "skew", "n"))
    for name, s in stats.items():
        writer.writerow([name, f"{s.mean:.3f}", f"{s.median:.3f}", f"{s.std:.3f}",
                         "" if math.isnan(s.skew) else f"{s.skew:.3f}", s.n])


def summarize_indices(rows: Sequence[ClimateIndexRow]) -> dict[str, SummaryStats]:
    defined = [r for r in rows if r.defined]
    return {name: summarize([getattr(r, name) for r in defined]) for name in INDEX_FIELDS}
