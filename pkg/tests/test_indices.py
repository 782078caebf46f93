import io
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy import stats

from climalens.corpus import MonthlyBucket
from climalens.errors import InsufficientData, UndefinedIndex
from climalens.indices import (build_index_table, coverage_index, index_row, read_index_table,
                               sentiment_index, summarize, summarize_indices, vol_cov,
                               write_index_table, write_summary)
from climalens.months import MonthKey

M = MonthKey(2020, 1)


def test_undefined_indices_raise():
    empty = MonthlyBucket(M)
    with pytest.raises(UndefinedIndex):
        vol_cov(empty)
    with pytest.raises(UndefinedIndex):
        coverage_index(empty, "CC")
    with pytest.raises(UndefinedIndex):
        sentiment_index(MonthlyBucket(M, snippet_count=1), "pos")
    with pytest.raises(ValueError):
        sentiment_index(MonthlyBucket(M, 1, 10), "neutral")


def test_undefined_month_row_and_csv():
    rows = build_index_table([MonthlyBucket(M), MonthlyBucket(M.shift(1), 4, 40, {"CC": 2}, 1, 3)])
    assert not rows[0].defined and rows[0].value("cov_cc") is None
    assert rows[1].value("cov_cc") == 5.0 and rows[1].neg_sent == 7.5
    buf = io.StringIO()
    write_index_table(rows, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "month,ln_volcov,cov_cc,cov_re,cov_ghi,pos_sent,neg_sent,defined"
    assert lines[1] == "2020-01,,,,,,,0"
    assert lines[2] == f"2020-02,{math.log(4):.6f},5.000000,0.000000,0.000000,2.500000,7.500000,1"
    back = read_index_table(io.StringIO(buf.getvalue()))
    assert [r.defined for r in back] == [False, True]
    assert back[1].cov_cc == 5.0


bucket_st = st.integers(1, 10_000).flatmap(lambda wc: st.builds(
    MonthlyBucket, month=st.just(M), snippet_count=st.integers(1, 5000), word_count=st.just(wc),
    theme_counts=st.fixed_dictionaries({t: st.integers(0, wc) for t in ("CC", "RE", "GHI")}),
    pos_words=st.integers(0, wc), neg_words=st.integers(0, wc)))


@given(bucket_st)
def test_index_formulas_match_exact_fractions(b):
    row = index_row(b)
    for theme, name in (("CC", "cov_cc"), ("RE", "cov_re"), ("GHI", "cov_ghi")):
        assert getattr(row, name) == pytest.approx(float(Fraction(100 * b.theme(theme), b.word_count)),
                                                   rel=1e-12, abs=1e-12)
    assert row.pos_sent == pytest.approx(float(Fraction(100 * b.pos_words, b.word_count)), rel=1e-12, abs=1e-12)
    assert 0 <= row.neg_sent <= 100
    assert math.exp(row.ln_volcov) == pytest.approx(b.snippet_count, rel=1e-12)


@given(bucket_st, st.integers(2, 50))
def test_indices_scale_invariant(b, k):
    """Replicating every snippet k times leaves the percentage indices unchanged."""
    big = MonthlyBucket(M, b.snippet_count * k, b.word_count * k,
                        {t: n * k for t, n in b.theme_counts.items()}, b.pos_words * k, b.neg_words * k)
    r1, r2 = index_row(b), index_row(big)
    assert r2.cov_cc == pytest.approx(r1.cov_cc, rel=1e-12, abs=1e-12)
    assert r2.ln_volcov == pytest.approx(r1.ln_volcov + math.log(k), rel=1e-12)


finite = st.floats(-1e6, 1e6, allow_nan=False)


@settings(max_examples=200)
@given(st.lists(finite, min_size=3, max_size=60))
def test_summary_matches_scipy(xs):
    s = summarize(xs)
    a = np.array(xs)
    assert s.mean == pytest.approx(a.mean(), rel=1e-9, abs=1e-9)
    assert s.median == pytest.approx(np.median(a), rel=1e-12, abs=1e-12)
    assert s.std == pytest.approx(a.std(ddof=1), rel=1e-9, abs=1e-6)
    spread = a.std()
    assume(spread > 1e-6 * max(1.0, abs(a.mean())))
    assert s.skew == pytest.approx(stats.skew(a, bias=False), rel=1e-6, abs=1e-6)


def test_summary_edge_cases():
    with pytest.raises(InsufficientData):
        summarize([1.0])
    two = summarize([1.0, 3.0])
    assert (two.mean, two.median, two.std) == (2.0, 2.0, math.sqrt(2)) and math.isnan(two.skew)
    assert math.isnan(summarize([0.1, 0.1, 0.1]).skew)


def test_write_summary_layout():
    rows = build_index_table([MonthlyBucket(M.shift(i), 10 + i, 100, {"CC": i}, i, 2 * i) for i in range(5)])
    buf = io.StringIO()
    write_summary(summarize_indices(rows), buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "variable,mean,median,std,skew,n"
    assert lines[2] == "cov_cc,2.000,2.000,1.581,0.000,5"
    assert len(lines) == 7


@given(bucket_st)
def test_coverage_sum_bounded(b):
    row = index_row(b)
    assert row.cov_cc + row.cov_re + row.cov_ghi <= 300 + 1e-9


@given(st.lists(bucket_st, max_size=10))
def test_build_index_table_order_preserving(buckets):
    buckets = [MonthlyBucket(M.shift(i), b.snippet_count, b.word_count, b.theme_counts,
                             b.pos_words, b.neg_words) for i, b in enumerate(buckets)]
    rows = build_index_table(buckets)
    assert [r.month for r in rows] == [b.month for b in buckets]
    assert rows == build_index_table(buckets)


@settings(max_examples=200)
@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=3, max_size=40))
def test_skew_antisymmetric(xs):
    a, b = summarize(xs), summarize([-x for x in xs])
    if math.isnan(a.skew):
        assert math.isnan(b.skew)
    else:
        assert b.skew == pytest.approx(-a.skew, rel=1e-9, abs=1e-9)
