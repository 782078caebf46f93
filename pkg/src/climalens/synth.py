"""Seeded synthetic inputs for self-tests and end-to-end checks.

Generates a snippet corpus, daily factors and firm returns, firm covariates
and macro series with known effects of ln VolCov on firm risk, written in
the same file layouts the pipeline reads.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .months import MonthKey, MonthWindow, SAMPLE_WINDOW

STATIONS = ("BLOOMBERG", "CNBC", "FOXBUSINESS")
KEYWORD_PHRASES = ("climate change", "global warming", "carbon tax", "renewable energy",
                   "paris agreement", "greenhouse gases", "co2", "ipcc", "cap and trade",
                   "carbon emission")
CC_WORDS = ("hurricanes", "wildfires", "drought", "flooding", "pollution", "heatwave",
            "storms", "glaciers", "disaster", "smog", "emissions")
RE_WORDS = ("solar", "turbines", "renewables", "hydropower", "biofuels", "batteries",
            "lithium", "geothermal", "ethanol")
GHI_WORDS = ("regulation", "regulators", "subsidies", "treaty", "mandates", "epa",
             "legislation", "summit", "pledges", "biodiversity")
POS_WORDS = ("hope", "growth", "benefit", "opportunity", "progress", "success", "innovation")
NEG_WORDS = ("threat", "damage", "risk", "fear", "loss", "danger", "catastrophe", "warning")
FILLER = ("the", "a", "of", "and", "to", "in", "markets", "investors", "today", "says",
          "company", "shares", "week", "report", "new", "year", "we", "they", "about",
          "price", "stock", "analysts", "morning", "could", "more", "than", "this", "that")
NOISE = ("the weather is nice", "stocks rallied this morning", "earnings beat estimates",
         "the fed held rates steady", "oil prices slipped")


@dataclass
class Planted:
    idio_volcov: float = -0.12
    sys_volcov: float = 0.06
    idio_base: float = 2.3
    sys_base: float = 1.2
    idio_stockvol: float = 0.05
    alpha: float = 0.02
    beta_smb: float = 0.3
    beta_hml: float = -0.1


@dataclass
class FixturePaths:
    root: Path
    snippets: Path
    factors: Path
    returns: Path
    firm_covariates: Path
    macro: Path
    truth: Path
    extra: dict = field(default_factory=dict)


def trading_days(month: MonthKey) -> list[dt.date]:
    day = month.first_day()
    out = []
    while day.month == month.month:
        if day.weekday() < 5:
            out.append(day)
        day += dt.timedelta(days=1)
    return out


def _snippet_text(rng: np.random.Generator) -> str:
    words = list(rng.choice(FILLER, size=int(rng.integers(6, 12))))
    words.insert(int(rng.integers(0, len(words) + 1)), str(rng.choice(KEYWORD_PHRASES)))
    for pool, p in ((CC_WORDS, 0.7), (RE_WORDS, 0.25), (GHI_WORDS, 0.15),
                    (POS_WORDS, 0.6), (NEG_WORDS, 0.4)):
        while rng.random() < p:
            words.insert(int(rng.integers(0, len(words) + 1)), str(rng.choice(pool)))
            p /= 2
    text = " ".join(words)
    return text[0].upper() + text[1:] + "."


def generate_fixture(out_dir, seed: int = 20210831, n_firms: int = 48,
                     window: MonthWindow = SAMPLE_WINDOW, planted: Planted | None = None,
                     ln_volcov_mean: float = 5.863, ln_volcov_sd: float = 0.55) -> FixturePaths:
    planted = planted or Planted()
    rng = np.random.default_rng(seed)
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    months = list(window)

    # corpus: monthly snippet volume, plus off-topic rows and exact duplicates
    counts = np.maximum(1, np.round(np.exp(rng.normal(ln_volcov_mean, ln_volcov_sd, len(months))))).astype(int)
    snippets = root / "snippets.csv"
    with open(snippets, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("station", "timestamp", "keyword", "text"))
        for month, count in zip(months, counts):
            ndays = month.last_day().day
            for i in range(count + max(1, count // 50)):
                stamp = dt.datetime(month.year, month.month, int(rng.integers(1, ndays + 1)),
                                    int(rng.integers(0, 24)), int(rng.integers(0, 60)))
                station = str(rng.choice(STATIONS))
                if i < count:
                    row = (station, stamp.strftime("%Y-%m-%dT%H:%M:00Z"), "", _snippet_text(rng))
                    w.writerow(row)
                    if rng.random() < 0.01:
                        w.writerow(row)
                else:
                    w.writerow((station, stamp.strftime("%Y-%m-%dT%H:%M:00Z"), "",
                                str(rng.choice(NOISE))))
    ln_volcov = {m: math.log(c) for m, c in zip(months, counts)}

    # macro levels
    macro = root / "macro.csv"
    pse = 100 * np.exp(np.cumsum(rng.normal(0.005, 0.06, len(months))))
    msci = 100 * np.exp(np.cumsum(rng.normal(0.004, 0.04, len(months))))
    ovx = 30 * np.exp(np.cumsum(rng.normal(0.0, 0.2, len(months))))
    epu = np.exp(rng.normal(5.18, 0.39, len(months)))
    with open(macro, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("month", "pse", "msci", "ovx", "epu", "covid_deaths", "stringency",
                    "cpu", "chneg", "mccc"))
        deaths = 0.0
        for i, m in enumerate(months):
            stringency = 0.0
            if m >= MonthKey(2020, 1):
                deaths = deaths * 1.4 + float(rng.integers(1_000, 50_000))
                stringency = float(np.clip(rng.normal(60, 12), 0, 100))
            w.writerow((str(m), f"{pse[i]:.6f}", f"{msci[i]:.6f}", f"{ovx[i]:.6f}",
                        f"{epu[i]:.6f}", f"{deaths:.0f}", f"{stringency:.4f}",
                        f"{rng.gamma(4.0, 30.0):.6f}",
                        f"{rng.normal(0.0, 0.002):.6f}" if m <= MonthKey(2018, 5) else "",
                        f"{rng.normal(0.0, 0.5):.6f}" if m <= MonthKey(2018, 6) else ""))

    # firms
    firms = [f"F{i:02d}" for i in range(1, n_firms + 1)]
    fe_idio = rng.normal(0.0, 0.4, n_firms)
    fe_sys = rng.normal(0.0, 0.3, n_firms)
    firm_cov = root / "firm_covariates.csv"
    stockvol_log: dict[tuple[str, MonthKey], float] = {}
    with open(firm_cov, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("firm_id", "month", "roa", "mktcap", "leverage", "stockvol", "intasset", "mbv"))
        for f in firms:
            cap0, vol0, int0 = rng.normal(13.7, 1.5), rng.normal(9.3, 1.0), rng.normal(10.0, 2.0)
            for m in months:
                lsv = vol0 + rng.normal(0, 0.5)
                stockvol_log[(f, m)] = lsv
                w.writerow((f, str(m), f"{rng.normal(-1.7, 10):.6f}",
                            f"{math.exp(cap0 + rng.normal(0, 0.2)):.6f}",
                            f"{rng.normal(2.5, 1.0):.6f}", f"{math.exp(lsv):.6f}",
                            f"{math.exp(int0 + rng.normal(0, 0.1)):.6f}",
                            f"{rng.normal(1.0, 3.0):.6f}"))

    # daily factors and returns from the planted risk surfaces
    factors = root / "factors.csv"
    returns = root / "returns.csv"
    truth = root / "truth.csv"
    vbar = float(np.mean(list(ln_volcov.values())))
    with open(factors, "w", encoding="utf-8", newline="") as ff, \
            open(returns, "w", encoding="utf-8", newline="") as fr, \
            open(truth, "w", encoding="utf-8", newline="") as ft:
        wf, wr, wt = (csv.writer(x, lineterminator="\n") for x in (ff, fr, ft))
        wf.writerow(("date", "mkt_rf", "smb", "hml", "rf"))
        wr.writerow(("firm_id", "date", "total_return"))
        wt.writerow(("firm_id", "month", "sigma_eps", "beta_er"))
        for m in months:
            days = trading_days(m)
            nd = len(days)
            mkt = rng.normal(0.05, 1.0, nd)
            smb = rng.normal(0.0, 0.5, nd)
            hml = rng.normal(0.0, 0.5, nd)
            rf = 0.01
            for d, a, b, c in zip(days, mkt, smb, hml):
                wf.writerow((d.isoformat(), f"{a:.8f}", f"{b:.8f}", f"{c:.8f}", f"{rf:.8f}"))
            shift = ln_volcov[m] - vbar
            for i, f in enumerate(firms):
                sigma = (planted.idio_base + fe_idio[i] + planted.idio_volcov * shift
                         + planted.idio_stockvol * (stockvol_log[(f, m)] - 9.3)
                         + rng.normal(0, 0.1))
                sigma = max(sigma, 0.2)
                beta = planted.sys_base + fe_sys[i] + planted.sys_volcov * shift + rng.normal(0, 0.05)
                eps = rng.normal(0.0, sigma, nd)
                ret = rf + planted.alpha + beta * mkt + planted.beta_smb * smb + planted.beta_hml * hml + eps
                for d, r in zip(days, ret):
                    wr.writerow((f, d.isoformat(), f"{r:.8f}"))
                wt.writerow((f, str(m), f"{sigma:.8f}", f"{beta:.8f}"))
    return FixturePaths(root, snippets, factors, returns, firm_cov, macro, truth)


def simulate_ff3_months(n_months: int, n_days: int = 21, params=(0.1, 1.3, 0.4, -0.2),
                        sigma: float = 0.8, seed: int = 0):
    """Yield ``(mkt_rf, smb, hml, excess)`` arrays for independent firm-months."""
    rng = np.random.default_rng(seed)
    a, b_mkt, b_smb, b_hml = params
    for _ in range(n_months):
        mkt = rng.normal(0.05, 1.0, n_days)
        smb = rng.normal(0.0, 0.5, n_days)
        hml = rng.normal(0.0, 0.5, n_days)
        excess = a + b_mkt * mkt + b_smb * smb + b_hml * hml + rng.normal(0, sigma, n_days)
        yield mkt, smb, hml, excess
