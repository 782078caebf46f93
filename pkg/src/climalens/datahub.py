"""Firm and macro covariates: transforms, COVID interaction, and panel assembly."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import IO, Iterable, Mapping, Sequence

from .errors import EmptyPanel, FormatError, NonPositiveLevel
from .factor_model import FirmMonthRisk
from .indices import ClimateIndexRow, INDEX_FIELDS
from .months import MonthKey, MonthWindow

FIRM_VARS = ("roa", "ln_mktcap", "leverage", "ln_stockvol", "ln_intasset", "mbv")
MACRO_VARS = ("ln_pse", "ln_msci", "ln_ovx", "ln_epu", "ln_covid_x_ps")
MEDIA_VARS = ("cpu", "chneg", "mccc")

FIRM_RAW_FIELDS = ("firm_id", "month", "roa", "mktcap", "leverage", "stockvol", "intasset", "mbv")
MACRO_RAW_FIELDS = ("month", "pse", "msci", "ovx", "epu", "covid_deaths", "stringency",
                    "cpu", "chneg", "mccc")

SOURCE = {**{v: "index" for v in INDEX_FIELDS}, **{v: "firm" for v in FIRM_VARS},
          **{v: "macro" for v in MACRO_VARS + MEDIA_VARS}}

LABELS = {
    "ln_volcov": "ln VolCov", "cov_cc": "Cov_CC", "cov_re": "Cov_RE", "cov_ghi": "Cov_GHI",
    "pos_sent": "PosSent", "neg_sent": "NegSent", "chneg": "CHNeg", "mccc": "MCCC",
    "cpu": "CPU", "roa": "ROA", "ln_mktcap": "ln MktCap", "leverage": "Leverage",
    "ln_stockvol": "ln StockVol", "ln_intasset": "ln IntAsset", "mbv": "MBV",
    "ln_pse": "ln PSE", "ln_msci": "ln MSCI", "ln_ovx": "ln OVX", "ln_epu": "ln EPU",
    "ln_covid_x_ps": "ln Covid x PS",
}


@dataclass(frozen=True)
class FirmMonthCovariates:
    firm_id: str
    month: MonthKey
    roa: float | None = None
    ln_mktcap: float | None = None
    leverage: float | None = None
    ln_stockvol: float | None = None
    ln_intasset: float | None = None
    mbv: float | None = None


@dataclass(frozen=True)
class MacroMonth:
    month: MonthKey
    ln_pse: float | None = None
    ln_msci: float | None = None
    ln_ovx: float | None = None
    ln_epu: float | None = None
    ln_covid_x_ps: float | None = None
    cpu: float | None = None
    chneg: float | None = None
    mccc: float | None = None


# -- series transforms ------------------------------------------------------

def log_level(value: float | None, name: str, month) -> float | None:
    if value is None:
        return None
    if not value > 0:
        raise NonPositiveLevel(name, month, value)
    return math.log(value)


def log_returns(levels: Sequence[tuple[MonthKey, float | None]], name: str) -> list[float | None]:
    """Percent log returns ``100 ln(P_t / P_{t-1})`` over month-sorted levels.

    The first month, and any month whose predecessor month is absent or
    blank, has no return.
    """
    out: list[float | None] = []
    prev_month, prev = None, None
    for month, level in levels:
        if level is not None and not level > 0:
            raise NonPositiveLevel(name, month, level)
        if level is None or prev is None or prev_month.shift(1) != month:
            out.append(None)
        else:
            out.append(100.0 * math.log(level / prev))
        prev_month, prev = month, level
    return out


def covid_interaction(deaths: Sequence[float | None],
                      stringency: Sequence[float | None]) -> list[float | None]:
    """``ln(1 + deaths) * stringency`` per month; zero before the pandemic."""
    if len(deaths) != len(stringency):
        raise ValueError("deaths and stringency must be aligned month by month")
    out: list[float | None] = []
    for d, s in zip(deaths, stringency):
        if d is None or s is None:
            out.append(None)
            continue
        if d < 0:
            raise ValueError(f"cumulative deaths must be >= 0, got {d}")
        if not 0 <= s <= 100:
            raise ValueError(f"stringency must be in [0, 100], got {s}")
        out.append(math.log1p(d) * s)
    return out


def transform_firm_covariates(raw: Iterable[Mapping[str, object]]) -> list[FirmMonthCovariates]:
    """Log market cap, stock volume ('000) and intangible assets; pass the rest through."""
    out = []
    for rec in raw:
        month = rec["month"] if isinstance(rec["month"], MonthKey) else MonthKey.parse(str(rec["month"]))
        get = lambda k: _opt(rec.get(k))  # noqa: E731
        out.append(FirmMonthCovariates(
            str(rec["firm_id"]), month,
            roa=get("roa"),
            ln_mktcap=log_level(get("mktcap"), "mktcap", month),
            leverage=get("leverage"),
            ln_stockvol=log_level(get("stockvol"), "stockvol", month),
            ln_intasset=log_level(get("intasset"), "intasset", month),
            mbv=get("mbv"),
        ))
    out.sort(key=lambda c: (c.firm_id, c.month))
    return out


def transform_macro(raw: Iterable[Mapping[str, object]], ovx_mode: str = "return") -> list[MacroMonth]:
    """Monthly macro controls.

    PSE, MSCI (and OVX unless ``ovx_mode="level"``) become percent log
    returns, EPU is logged, COVID deaths and stringency are interacted, and
    CPU/CHNeg/MCCC pass through in raw units.
    """
    if ovx_mode not in ("return", "level"):
        raise ValueError(f"ovx_mode must be 'return' or 'level', got {ovx_mode!r}")
    rows = sorted(
        ({**rec, "month": rec["month"] if isinstance(rec["month"], MonthKey)
          else MonthKey.parse(str(rec["month"]))} for rec in raw),
        key=lambda r: r["month"])
    months = [r["month"] for r in rows]
    col = {k: [_opt(r.get(k)) for r in rows] for k in MACRO_RAW_FIELDS[1:]}
    pse = log_returns(list(zip(months, col["pse"])), "pse")
    msci = log_returns(list(zip(months, col["msci"])), "msci")
    if ovx_mode == "return":
        ovx = log_returns(list(zip(months, col["ovx"])), "ovx")
    else:
        ovx = [log_level(v, "ovx", m) for m, v in zip(months, col["ovx"])]
    epu = [log_level(v, "epu", m) for m, v in zip(months, col["epu"])]
    covid = covid_interaction(col["covid_deaths"], col["stringency"])
    return [MacroMonth(m, pse[i], msci[i], ovx[i], epu[i], covid[i],
                       col["cpu"][i], col["chneg"][i], col["mccc"][i])
            for i, m in enumerate(months)]


def _opt(value) -> float | None:
    if value is None:
        return None
    if isinstance(value, str):
        value = value.strip()
        if not value or value.lower() in ("na", "nan", "null"):
            return None
    x = float(value)
    return x if math.isfinite(x) else None


def _read_csv(stream: IO[str], required: Sequence[str], source: str | None) -> list[dict]:
    reader = csv.DictReader(stream)
    absent = [f for f in required if f not in (reader.fieldnames or [])]
    if absent:
        raise FormatError(f"CSV header lacks {', '.join(absent)}", 1, source)
    return list(reader)


def read_firm_covariates(stream: IO[str], source: str | None = None) -> list[FirmMonthCovariates]:
    rows = _read_csv(stream, FIRM_RAW_FIELDS, source)
    try:
        return transform_firm_covariates(rows)
    except ValueError as exc:
        if isinstance(exc, NonPositiveLevel):
            raise
        raise FormatError(str(exc), None, source) from exc


def read_macro(stream: IO[str], source: str | None = None, ovx_mode: str = "return") -> list[MacroMonth]:
    rows = _read_csv(stream, MACRO_RAW_FIELDS[:7], source)
    return transform_macro(rows, ovx_mode)


# -- panel assembly ---------------------------------------------------------

@dataclass(frozen=True)
class PanelRow:
    firm_id: str
    month: MonthKey
    y_id: float
    y_sys: float
    regressors: Mapping[str, float]

    def y(self, dependent: str) -> float:
        if dependent == "idio":
            return self.y_id
        if dependent == "sys":
            return self.y_sys
        raise ValueError(f"dependent must be 'idio' or 'sys', got {dependent!r}")


@dataclass(frozen=True)
class MissingRecord:
    variable: str
    n_missing: int
    first_month: MonthKey
    last_month: MonthKey


@dataclass(frozen=True)
class Panel:
    rows: tuple[PanelRow, ...]
    variables: tuple[str, ...]
    missing: tuple[MissingRecord, ...] = ()

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def firms(self) -> list[str]:
        return sorted({r.firm_id for r in self.rows})

    @property
    def months(self) -> list[MonthKey]:
        return sorted({r.month for r in self.rows})


@dataclass
class _MissTally:
    n: int = 0
    first: MonthKey | None = None
    last: MonthKey | None = None

    def add(self, month: MonthKey):
        self.n += 1
        self.first = month if self.first is None else min(self.first, month)
        self.last = month if self.last is None else max(self.last, month)


def assemble_panel(risks: Iterable[FirmMonthRisk], indices: Iterable[ClimateIndexRow],
                   firm_covariates: Iterable[FirmMonthCovariates], macro: Iterable[MacroMonth],
                   spec) -> Panel:
    """Join risks with firm covariates (by firm-month) and indices/macro (by month).

    ``spec`` supplies ``climate_vars``, ``control_vars`` and optionally
    ``window``. Firm-months missing any regressor, or either risk measure,
    are dropped and tallied per variable.
    """
    variables = tuple(spec.climate_vars) + tuple(spec.control_vars)
    unknown = [v for v in variables if v not in SOURCE]
    if unknown:
        raise ValueError(f"unknown regressors: {unknown}")
    if len(set(variables)) != len(variables):
        raise ValueError(f"duplicate regressors in {variables}")
    window: MonthWindow | None = getattr(spec, "window", None)

    idx = {r.month: r for r in indices}
    mac = {m.month: m for m in macro}
    firm = {(c.firm_id, c.month): c for c in firm_covariates}
    tally: dict[str, _MissTally] = defaultdict(_MissTally)
    rows = []
    for risk in sorted(risks, key=lambda r: (r.firm_id, r.month)):
        if window is not None and risk.month not in window:
            continue
        complete = True
        if not risk.ok or risk.sigma_eps is None or risk.beta_er is None:
            tally["risk"].add(risk.month)
            complete = False
        values = {}
        for v in variables:
            src = SOURCE[v]
            if src == "index":
                row = idx.get(risk.month)
                x = row.value(v) if row is not None else None
            elif src == "firm":
                row = firm.get((risk.firm_id, risk.month))
                x = getattr(row, v) if row is not None else None
            else:
                row = mac.get(risk.month)
                x = getattr(row, v) if row is not None else None
            if x is None or not math.isfinite(x):
                tally[v].add(risk.month)
                complete = False
            else:
                values[v] = x
        if complete:
            rows.append(PanelRow(risk.firm_id, risk.month, risk.sigma_eps, risk.beta_er, values))
    missing = tuple(MissingRecord(v, t.n, t.first, t.last) for v, t in sorted(tally.items()))
    if not rows:
        raise EmptyPanel(f"no complete firm-months for regressors {variables}")
    return Panel(tuple(rows), variables, missing)


def write_missingness(records: Iterable[MissingRecord], stream: IO[str]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(("variable", "n_missing", "first_month", "last_month"))
    for r in records:
        writer.writerow([r.variable, r.n_missing, str(r.first_month), str(r.last_month)])
