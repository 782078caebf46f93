"""Firm-month three-factor regressions on daily returns.

For every firm and calendar month the daily excess return is regressed on
``[1, mkt_rf, smb, hml]``. The market slope is the systematic-risk measure
and the residual standard deviation (n - 4 degrees of freedom) is the
idiosyncratic-risk measure.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import FormatError, NoOverlap, RankDeficient
from .linreg import ols_fit
from .months import MonthKey, MonthWindow

DEFAULT_MIN_DAYS = 15
RISK_FIELDS = ("firm_id", "month", "beta_er", "beta_smb", "beta_hml", "alpha", "sigma_eps",
               "n_days", "r2", "quality")
# published daily research-factor header spelling -> ours
_FACTOR_ALIASES = {"mkt-rf": "mkt_rf", "mkt_rf": "mkt_rf", "smb": "smb", "hml": "hml",
                   "rf": "rf", "date": "date", "": "date"}


@dataclass(frozen=True)
class FactorRecord:
    date: dt.date
    mkt_rf: float
    smb: float
    hml: float
    rf: float


@dataclass(frozen=True)
class DailyReturnRecord:
    firm_id: str
    date: dt.date
    total_return: float


@dataclass(frozen=True)
class ExcessPair:
    date: dt.date
    excess: float
    mkt_rf: float
    smb: float
    hml: float


@dataclass(frozen=True)
class FirmMonthRisk:
    firm_id: str
    month: MonthKey
    beta_er: float | None
    beta_smb: float | None
    beta_hml: float | None
    alpha: float | None
    sigma_eps: float | None
    n_days: int
    r2: float | None
    quality: str
    reason: str = ""
    se_beta_er: float | None = None  # HC1

    @property
    def ok(self) -> bool:
        return self.quality == "ok"


def parse_date(text: str) -> dt.date:
    s = text.strip()
    if len(s) == 8 and s.isdigit():
        return dt.date(int(s[:4]), int(s[4:6]), int(s[6:]))
    return dt.date.fromisoformat(s)


def read_factors(stream: IO[str], source: str | None = None) -> list[FactorRecord]:
    """Read a daily factor CSV (``date,mkt_rf,smb,hml,rf`` or ``,Mkt-RF,SMB,HML,RF``)."""
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("empty factor file", 1, source) from None
    cols = [_FACTOR_ALIASES.get(h.strip().lower()) for h in header]
    missing = {"date", "mkt_rf", "smb", "hml", "rf"} - set(cols)
    if missing:
        raise FormatError(f"factor header lacks {sorted(missing)}", 1, source)
    out = []
    for lineno, row in enumerate(reader, 2):
        if not row or not row[0].strip():
            continue
        rec = {c: v for c, v in zip(cols, row) if c}
        try:
            vals = {k: float(rec[k]) for k in ("mkt_rf", "smb", "hml", "rf")}
            if not all(math.isfinite(v) for v in vals.values()):
                raise ValueError("non-finite factor value")
            out.append(FactorRecord(parse_date(rec["date"]), **vals))
        except (KeyError, ValueError) as exc:
            raise FormatError(str(exc), lineno, source) from None
    out.sort(key=lambda r: r.date)
    for a, b in zip(out, out[1:]):
        if a.date == b.date:
            raise FormatError(f"duplicate factor date {a.date}", None, source)
    return out


def read_returns(stream: IO[str], source: str | None = None) -> list[DailyReturnRecord]:
    out = []
    seen = set()
    for lineno, rec in enumerate(csv.DictReader(stream), 2):
        try:
            r = DailyReturnRecord(rec["firm_id"].strip(), parse_date(rec["date"]),
                                  float(rec["total_return"]))
        except (KeyError, ValueError, AttributeError) as exc:
            raise FormatError(f"bad return record: {exc}", lineno, source) from None
        if not math.isfinite(r.total_return):
            raise FormatError("non-finite return", lineno, source)
        if (r.firm_id, r.date) in seen:
            raise FormatError(f"duplicate return for {r.firm_id} on {r.date}", lineno, source)
        seen.add((r.firm_id, r.date))
        out.append(r)
    return out


def log_to_simple(percent_log_return: float) -> float:
    return 100.0 * math.expm1(percent_log_return / 100.0)


def join_excess_returns(returns: Iterable[DailyReturnRecord], factors: Sequence[FactorRecord],
                        log_returns: bool = False) -> tuple[list[ExcessPair], int]:
    """Inner-join one firm's daily returns with the factor series by date.

    Returns the date-sorted pairs and the number of return days dropped for
    lack of a factor row.
    """
    by_date = {f.date: f for f in factors}
    pairs = []
    dropped = 0
    for r in sorted(returns, key=lambda r: r.date):
        f = by_date.get(r.date)
        if f is None:
            dropped += 1
            continue
        ret = log_to_simple(r.total_return) if log_returns else r.total_return
        pairs.append(ExcessPair(r.date, ret - f.rf, f.mkt_rf, f.smb, f.hml))
    if not pairs:
        raise NoOverlap("no return date matches a factor date")
    return pairs, dropped


def _insufficient(firm_id, month, n, reason) -> FirmMonthRisk:
    return FirmMonthRisk(firm_id, month, None, None, None, None, None, n, None,
                         "insufficient", reason)


def estimate_ff3(firm_id: str, month: MonthKey, pairs: Sequence[ExcessPair],
                 min_days: int = DEFAULT_MIN_DAYS) -> FirmMonthRisk:
    n = len(pairs)
    if any(MonthKey.of(p.date) != month for p in pairs):
        raise ValueError(f"pairs for {firm_id} fall outside {month}")
    if n < max(min_days, 5):
        return _insufficient(firm_id, month, n, f"{n} trading days < {max(min_days, 5)}")
    X = np.array([[1.0, p.mkt_rf, p.smb, p.hml] for p in pairs])
    y = np.array([p.excess for p in pairs])
    try:
        fit = ols_fit(X, y, intercept=True, col_names=("alpha", "mkt_rf", "smb", "hml"))
    except RankDeficient as exc:
        return _insufficient(firm_id, month, n, f"RankDeficient: {exc}")
    alpha, b_mkt, b_smb, b_hml = (float(c) for c in fit.coef)
    return FirmMonthRisk(
        firm_id, month, b_mkt, b_smb, b_hml, alpha, math.sqrt(fit.sigma2), n,
        float(fit.r2), "ok", se_beta_er=float(fit.se("hc1")[1]))


def risk_panel(returns: Iterable[DailyReturnRecord], factors: Sequence[FactorRecord],
               window: MonthWindow | None = None, min_days: int = DEFAULT_MIN_DAYS,
               log_returns: bool = False) -> list[FirmMonthRisk]:
    """One risk record per (firm, month) with matched days, sorted by firm then month."""
    by_firm: dict[str, list[DailyReturnRecord]] = defaultdict(list)
    for r in returns:
        if window is None or MonthKey.of(r.date) in window:
            by_firm[r.firm_id].append(r)
    out = []
    for firm in sorted(by_firm):
        try:
            pairs, _ = join_excess_returns(by_firm[firm], factors, log_returns)
        except NoOverlap:
            continue
        by_month: dict[MonthKey, list[ExcessPair]] = defaultdict(list)
        for p in pairs:
            by_month[MonthKey.of(p.date)].append(p)
        for month in sorted(by_month):
            out.append(estimate_ff3(firm, month, by_month[month], min_days))
    return out


def _fmt(x: float | None) -> str:
    return "" if x is None else f"{x:.10g}"


def write_risks(risks: Iterable[FirmMonthRisk], stream: IO[str]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(RISK_FIELDS)
    for r in risks:
        writer.writerow([r.firm_id, str(r.month), _fmt(r.beta_er), _fmt(r.beta_smb),
                         _fmt(r.beta_hml), _fmt(r.alpha), _fmt(r.sigma_eps), r.n_days,
                         _fmt(r.r2), r.quality])


def read_risks(stream: IO[str]) -> list[FirmMonthRisk]:
    def opt(s: str) -> float | None:
        return float(s) if s.strip() else None

    return [FirmMonthRisk(rec["firm_id"], MonthKey.parse(rec["month"]), opt(rec["beta_er"]),
                          opt(rec["beta_smb"]), opt(rec["beta_hml"]), opt(rec["alpha"]),
                          opt(rec["sigma_eps"]), int(rec["n_days"]), opt(rec["r2"]),
                          rec["quality"])
            for rec in csv.DictReader(stream)]
