"""Firm fixed-effects regressions of risk on climate indices and controls.

The within estimator demeans by firm, then (as in Stata's ``xtreg, fe``)
adds back grand means so the constant is the grand-mean normalised
intercept. Firm effects satisfy ``sum_i n_i * gamma_i = 0``.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import IO, Iterable, Sequence

import numpy as np

from .datahub import (FIRM_VARS, LABELS, MACRO_VARS, FirmMonthCovariates, MacroMonth, Panel,
                      assemble_panel)
from .errors import ClimalensError, EmptyPanel, NoWithinVariation
from .factor_model import FirmMonthRisk
from .indices import ClimateIndexRow
from .linreg import ols_fit, within_transform
from .months import COVID_WINDOW, MonthKey, MonthWindow, SAMPLE_WINDOW

CLIMATE_VARS = ("ln_volcov", "cov_cc", "cov_re", "cov_ghi", "pos_sent", "neg_sent")
CONTROLS = FIRM_VARS + MACRO_VARS
# the COVID interaction is identically zero before 2020
PRINT_MEDIA_CONTROLS = FIRM_VARS + tuple(v for v in MACRO_VARS if v != "ln_covid_x_ps")
CHNEG_END = MonthKey(2018, 5)
MCCC_END = MonthKey(2018, 6)

NORMAL_CRITICAL = ((2.5758, "**"), (1.9600, "*"), (1.6449, "†"))
RESULT_FIELDS = ("table", "model", "dependent", "variable", "coef", "se", "stars", "n_obs",
                 "n_firms", "r2_within")


@dataclass(frozen=True)
class ModelSpec:
    name: str
    dependent: str
    climate_vars: tuple[str, ...]
    control_vars: tuple[str, ...] = CONTROLS
    se_flavor: str = "cluster"
    window: MonthWindow | None = None
    table: str = ""

    def __post_init__(self):
        if self.dependent not in ("idio", "sys"):
            raise ValueError(f"dependent must be 'idio' or 'sys', got {self.dependent!r}")
        if self.se_flavor not in ("cluster", "hc1", "classical"):
            raise ValueError(f"unknown se flavor {self.se_flavor!r}")
        names = self.regressors
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate regressors in {self.name}: {names}")

    @property
    def regressors(self) -> tuple[str, ...]:
        return tuple(self.climate_vars) + tuple(self.control_vars)


@dataclass
class FeEstimate:
    spec: ModelSpec
    coef: dict[str, float]
    se: dict[str, float]
    stars: dict[str, str]
    r2_within: float
    n_obs: int
    n_firms: int
    alpha_hat: float
    alpha_se: float
    firm_effects: dict[str, float]
    cov: np.ndarray = field(repr=False)

    @property
    def alpha_stars(self) -> str:
        return star_tiers(self.alpha_hat, self.alpha_se) if self.alpha_se > 0 else ""

    def ci95(self, name: str) -> tuple[float, float]:
        half = 1.959964 * self.se[name]
        return self.coef[name] - half, self.coef[name] + half


def critical_values(dist: str = "normal", df: int | None = None) -> tuple[tuple[float, str], ...]:
    """Two-sided 1%/5%/10% cut-offs; ``dist="t"`` needs ``df``."""
    if dist == "normal":
        return NORMAL_CRITICAL
    if dist == "t":
        from scipy.stats import t

        if not df or df <= 0:
            raise ValueError("t critical values need positive degrees of freedom")
        return tuple((float(t.ppf(1 - a / 2, df)), s)
                     for a, s in ((0.01, "**"), (0.05, "*"), (0.10, "†")))
    raise ValueError(f"unknown reference distribution {dist!r}")


def star_tiers(coef: float, se: float, critical=NORMAL_CRITICAL) -> str:
    """Significance marker from ``|coef/se|``; thresholds are inclusive."""
    if not se > 0:
        raise ValueError(f"standard error must be positive, got {se}")
    t = abs(coef / se)
    for cut, mark in critical:
        if t >= cut:
            return mark
    return ""


def _within_varies(raw: np.ndarray, demeaned: np.ndarray) -> bool:
    scale = max(1.0, float(np.max(np.abs(raw))))
    return bool(np.max(np.abs(demeaned)) > 1e-12 * scale)


def fit_fixed_effects(panel: Panel, spec: ModelSpec, critical=NORMAL_CRITICAL) -> FeEstimate:
    rows = panel.rows
    if spec.window is not None:
        rows = tuple(r for r in rows if r.month in spec.window)
    names = spec.regressors
    firms = np.array([r.firm_id for r in rows])
    n_firms = len(set(firms.tolist()))
    if n_firms < 2:
        raise EmptyPanel(f"{spec.name}: need at least 2 firms, got {n_firms}")
    y = np.array([r.y(spec.dependent) for r in rows])
    X = np.array([[r.regressors[v] for v in names] for r in rows], dtype=float).reshape(len(rows), len(names))

    Xd = within_transform(X, firms)
    yd = within_transform(y, firms)
    for j, name in enumerate(names):
        if not _within_varies(X[:, j], Xd[:, j]):
            raise NoWithinVariation(name)
    Z = np.column_stack([np.ones(len(rows)), Xd + X.mean(axis=0)])
    cluster = firms if spec.se_flavor == "cluster" else None
    fit = ols_fit(Z, yd + y.mean(), cluster_ids=cluster, intercept=True,
                  col_names=("const",) + names, absorbed=n_firms - 1)
    cov = fit.cov(spec.se_flavor)
    se_all = np.sqrt(np.clip(np.diag(cov), 0.0, None))

    beta = fit.coef[1:]
    alpha = float(fit.coef[0])
    resid_level = y - X @ beta
    effects = {}
    for f in sorted(set(firms.tolist())):
        effects[f] = float(resid_level[firms == f].mean()) - alpha

    coef = {v: float(b) for v, b in zip(names, beta)}
    se = {v: float(s) for v, s in zip(names, se_all[1:])}
    stars = {v: star_tiers(coef[v], se[v], critical) if se[v] > 0 else "" for v in names}
    return FeEstimate(spec, coef, se, stars, float(fit.r2), len(rows), n_firms, alpha,
                      float(se_all[0]), effects, cov)


def subsample(panel: Panel, window: MonthWindow) -> Panel:
    rows = tuple(r for r in panel.rows if r.month in window)
    if not rows:
        raise EmptyPanel(f"no panel rows inside {window}")
    return replace(panel, rows=rows)


# -- model batteries --------------------------------------------------------

def main_battery(se_flavor: str = "cluster", window: MonthWindow | None = None,
                 tables: tuple[str, str] = ("T2", "T3"), extra: tuple[str, ...] = (),
                 controls: tuple[str, ...] = CONTROLS, offset_sys: bool = False) -> list[ModelSpec]:
    """Models M1..M6 (one climate regressor each) for idiosyncratic then systematic risk."""
    specs = []
    for t, dep in enumerate(("idio", "sys")):
        for m, var in enumerate(CLIMATE_VARS, 1):
            num = m + (6 * t if offset_sys else 0)
            specs.append(ModelSpec(f"M{num}", dep, (var,) + extra, controls, se_flavor,
                                   window, tables[t]))
    return specs


def print_media_battery(se_flavor: str = "cluster", start: MonthKey = SAMPLE_WINDOW.start) -> list[ModelSpec]:
    specs = []
    for dep in ("idio", "sys"):
        specs.append(ModelSpec("CHNeg", dep, ("neg_sent", "chneg"), PRINT_MEDIA_CONTROLS,
                               se_flavor, MonthWindow(start, CHNEG_END), "T4"))
        specs.append(ModelSpec("MCCC", dep, ("neg_sent", "mccc"), PRINT_MEDIA_CONTROLS,
                               se_flavor, MonthWindow(start, MCCC_END), "T4"))
    return specs


def cpu_battery(se_flavor: str = "cluster", window: MonthWindow | None = None) -> list[ModelSpec]:
    return main_battery(se_flavor, window, ("T5", "T5"), extra=("cpu",), offset_sys=True)


def covid_battery(se_flavor: str = "cluster") -> list[ModelSpec]:
    return main_battery(se_flavor, COVID_WINDOW, ("T6", "T6"), offset_sys=True)


BATTERIES = {
    "main": lambda se, window: main_battery(se, window),
    "print_media": lambda se, window: print_media_battery(se, window.start if window else SAMPLE_WINDOW.start),
    "cpu": lambda se, window: cpu_battery(se, window),
    "covid": lambda se, window: covid_battery(se),
}


def battery_specs(names: Sequence[str], se_flavor: str = "cluster",
                  window: MonthWindow | None = None) -> list[ModelSpec]:
    specs = []
    for name in names:
        if name not in BATTERIES:
            raise ValueError(f"unknown battery {name!r}; choose from {sorted(BATTERIES)}")
        specs.extend(BATTERIES[name](se_flavor, window))
    return specs


@dataclass(frozen=True)
class PanelSources:
    risks: Sequence[FirmMonthRisk]
    indices: Sequence[ClimateIndexRow]
    firm_covariates: Sequence[FirmMonthCovariates]
    macro: Sequence[MacroMonth]


@dataclass
class BatteryResult:
    spec: ModelSpec
    estimate: FeEstimate | None
    panel: Panel | None = None
    error: str = ""


def run_model(sources: PanelSources, spec: ModelSpec, critical=NORMAL_CRITICAL) -> BatteryResult:
    try:
        panel = assemble_panel(sources.risks, sources.indices, sources.firm_covariates,
                               sources.macro, spec)
        return BatteryResult(spec, fit_fixed_effects(panel, spec, critical), panel)
    except (ClimalensError, ValueError, np.linalg.LinAlgError) as exc:
        return BatteryResult(spec, None, None, f"{type(exc).__name__}: {exc}")


def run_model_battery(sources: PanelSources, specs: Sequence[ModelSpec], workers: int = 1,
                      critical=NORMAL_CRITICAL) -> list[BatteryResult]:
    """Fit every spec; failures are recorded and the battery carries on.

    Results come back in spec order whatever the worker count.
    """
    if workers <= 1:
        return [run_model(sources, s, critical) for s in specs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: run_model(sources, s, critical), specs))


# -- output -----------------------------------------------------------------

def _num(x: float) -> str:
    return f"{x:.10g}"


def write_results(results: Iterable[BatteryResult], stream: IO[str]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(RESULT_FIELDS)
    for res in results:
        est = res.estimate
        if est is None:
            continue
        s = est.spec
        common = (est.n_obs, est.n_firms, _num(est.r2_within))
        writer.writerow([s.table, s.name, s.dependent, "const", _num(est.alpha_hat),
                         _num(est.alpha_se), est.alpha_stars, *common])
        for v in s.regressors:
            writer.writerow([s.table, s.name, s.dependent, v, _num(est.coef[v]), _num(est.se[v]),
                             est.stars[v], *common])


def results_text(results: Sequence[BatteryResult]) -> str:
    buf = io.StringIO()
    write_results(results, buf)
    return buf.getvalue()


def render_tables(results: Sequence[BatteryResult]) -> str:
    """Plain-text tables: variables as rows, models as columns, SEs beneath."""
    groups: dict[tuple[str, str], list[BatteryResult]] = {}
    for res in results:
        groups.setdefault((res.spec.table, res.spec.dependent), []).append(res)
    dep_label = {"idio": "idiosyncratic risk", "sys": "systematic risk"}
    out = []
    for (table, dep), group in groups.items():
        variables: list[str] = []
        for res in group:
            for v in res.spec.regressors:
                if v not in variables:
                    variables.append(v)
        width = 13
        head = f"{'':<16}" + "".join(f"{r.spec.name:>{width}}" for r in group)
        lines = [f"Table {table}: fixed-effects regression of {dep_label[dep]}", head,
                 "-" * len(head)]

        def cells(fn):
            return "".join(f"{fn(r):>{width}}" for r in group)

        def coef_cell(res, v):
            est = res.estimate
            if est is None:
                return "fail"
            if v == "const":
                return f"{est.alpha_hat:.4f}{est.alpha_stars}"
            return f"{est.coef[v]:.4f}{est.stars[v]}" if v in est.coef else ".."

        def se_cell(res, v):
            est = res.estimate
            if est is None:
                return ""
            if v == "const":
                return f"({est.alpha_se:.4f})"
            return f"({est.se[v]:.4f})" if v in est.se else ".."

        for v in ["const"] + variables:
            label = "Constant" if v == "const" else LABELS.get(v, v)
            lines.append(f"{label:<16}" + cells(lambda r: coef_cell(r, v)))
            lines.append(f"{'':<16}" + cells(lambda r: se_cell(r, v)))
        lines.append("-" * len(head))
        lines.append(f"{'R2 (within)':<16}" + cells(
            lambda r: f"{r.estimate.r2_within:.4f}" if r.estimate else ""))
        lines.append(f"{'N':<16}" + cells(lambda r: str(r.estimate.n_obs) if r.estimate else ""))
        lines.append(f"{'Firms':<16}" + cells(lambda r: str(r.estimate.n_firms) if r.estimate else ""))
        flavor = group[0].spec.se_flavor
        lines.append(f"SEs: {flavor}; ** 1%, * 5%, † 10% (two-sided normal); "
                     "Constant uses the grand-mean normalisation of firm effects.")
        for r in group:
            if r.error:
                lines.append(f"{r.spec.name} failed: {r.error}")
        out.append("\n".join(lines))
    return "\n\n".join(out) + "\n"
