"""``climalens`` command line: fetch, ingest, build-indices, estimate-risk, regress, report, selftest."""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import hashlib
import json
import logging
import re
import shutil
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import RunConfig, load_config
from .corpus import (FixtureStore, GdeltTvClient, SNIPPET_FIELDS, aggregate_monthly,
                     deduplicate, fetch_snippets, filter_by_keywords, in_window, read_buckets,
                     read_snippet_file, write_buckets, write_snippets)
from .datahub import (FIRM_VARS, MACRO_VARS, assemble_panel, read_firm_covariates, read_macro,
                      write_missingness)
from .errors import ClimalensError, MissingFixture
from .factor_model import read_factors, read_returns, read_risks, risk_panel, write_risks
from .indices import (build_index_table, read_index_table, summarize,
                      summarize_indices, write_index_table, write_summary)
from .panel import (CLIMATE_VARS, CONTROLS, ModelSpec, PanelSources, battery_specs, render_tables,
                    run_model_battery, write_results)
from .synth import Planted, generate_fixture
from .textkit import load_keywords, load_lexicon, load_vocabularies

log = logging.getLogger("climalens")


class StrictFailure(ClimalensError):
    pass


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _slug(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")


class Stage:
    """Content-addressed cache for one pipeline stage.

    The key hashes the stage name, its config section and the bytes of every
    input file; it is stored as ``.cache-key`` in the stage directory.
    """

    def __init__(self, cfg: RunConfig, name: str, inputs, settings: tuple[str, ...]):
        self.dir = cfg.out / name
        material = {
            "stage": name,
            "version": __version__,
            "config": cfg.section(*settings),
            "inputs": [[str(p), sha256_file(p)] for p in inputs],
        }
        self.key = hashlib.sha256(json.dumps(material, sort_keys=True).encode()).hexdigest()

    def fresh(self, outputs) -> bool:
        marker = self.dir / ".cache-key"
        return (marker.is_file() and marker.read_text().strip() == self.key
                and all((self.dir / o).is_file() for o in outputs))

    def seal(self) -> None:
        (self.dir / ".cache-key").write_text(self.key + "\n")


# -- stages -----------------------------------------------------------------

def cmd_fetch(cfg: RunConfig) -> list[Path]:
    keywords = load_keywords(cfg.keywords)
    store = FixtureStore(cfg.fixture_dir)
    client = None
    if cfg.transport == "live":
        client = GdeltTvClient(cfg.base_url or None, min_interval=cfg.rate_limit)
    raw_dir = cfg.out / "corpus" / "raw"
    raw_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for kw in keywords:
        for station in cfg.stations:
            records = fetch_snippets(kw, station, cfg.window, cfg.transport, store, client)
            path = raw_dir / f"{_slug(kw)}__{station}.csv"
            with open(path, "w", encoding="utf-8", newline="") as fh:
                writer = csv.DictWriter(fh, SNIPPET_FIELDS, lineterminator="\n",
                                        extrasaction="ignore")
                writer.writeheader()
                writer.writerows(records)
            written.append(path)
    log.info("fetched %d corpus files into %s", len(written), raw_dir)
    return written


def _corpus_files(cfg: RunConfig) -> list[Path]:
    if cfg.snippets:
        return list(cfg.snippets)
    raw_dir = cfg.out / "corpus" / "raw"
    files = sorted(raw_dir.glob("*.csv")) if raw_dir.is_dir() else []
    if not files:
        files = cmd_fetch(cfg)
    return files


def cmd_ingest(cfg: RunConfig) -> Path:
    files = _corpus_files(cfg)
    cfg.validate("keywords", "vocab_cc", "vocab_re", "vocab_ghi", "lexicon")
    text_files = [cfg.keywords, cfg.vocab_cc, cfg.vocab_re, cfg.vocab_ghi, cfg.lexicon]
    stage = Stage(cfg, "corpus", list(files) + text_files, ("window", "strict"))
    outputs = ("snippets.csv", "monthly.csv", "ingest_errors.csv")
    if stage.fresh(outputs):
        log.info("corpus up to date")
        return stage.dir / "monthly.csv"

    snippets, errors = [], []
    for path in files:
        got, errs = read_snippet_file(path, strict=cfg.strict)
        snippets.extend(got)
        errors.extend(errs)
    n_read = len(snippets)
    snippets = deduplicate(snippets)
    n_unique = len(snippets)
    snippets = in_window(snippets, cfg.window)
    snippets = filter_by_keywords(snippets, load_keywords(cfg.keywords))
    snippets.sort(key=lambda s: (s.timestamp, s.station, s.text))

    vocabs = load_vocabularies({"CC": cfg.vocab_cc, "RE": cfg.vocab_re, "GHI": cfg.vocab_ghi})
    buckets = aggregate_monthly(snippets, vocabs, load_lexicon(cfg.lexicon), cfg.window)

    stage.dir.mkdir(parents=True, exist_ok=True)
    with open(stage.dir / "snippets.csv", "w", encoding="utf-8", newline="") as fh:
        write_snippets(snippets, fh)
    with open(stage.dir / "monthly.csv", "w", encoding="utf-8", newline="") as fh:
        write_buckets(buckets, fh)
    with open(stage.dir / "ingest_errors.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("source", "line", "message"))
        for e in errors:
            w.writerow((e.source or "", e.lineno or "", str(e).split(": ", 1)[-1]))
    stage.seal()
    log.info("ingested %d records: %d unique, %d kept after window/keyword filters, "
             "%d rejected", n_read, n_unique, len(snippets), len(errors))
    if errors:
        print(f"{len(errors)} malformed snippet records skipped "
              f"(see {stage.dir / 'ingest_errors.csv'})", file=sys.stderr)
    return stage.dir / "monthly.csv"


def cmd_build_indices(cfg: RunConfig) -> Path:
    monthly = cmd_ingest(cfg)
    stage = Stage(cfg, "indices", [monthly], ())
    if stage.fresh(("indices.csv", "summary.csv")):
        log.info("indices up to date")
        return stage.dir / "indices.csv"
    with open(monthly, encoding="utf-8") as fh:
        buckets = read_buckets(fh)
    rows = build_index_table(buckets)
    stage.dir.mkdir(parents=True, exist_ok=True)
    with open(stage.dir / "indices.csv", "w", encoding="utf-8", newline="") as fh:
        write_index_table(rows, fh)
    with open(stage.dir / "summary.csv", "w", encoding="utf-8", newline="") as fh:
        write_summary(summarize_indices(rows), fh)
    stage.seal()
    n_undef = sum(not r.defined for r in rows)
    log.info("built %d index rows (%d undefined)", len(rows), n_undef)
    return stage.dir / "indices.csv"


def cmd_estimate_risk(cfg: RunConfig) -> Path:
    cfg.validate("factors", "returns")
    stage = Stage(cfg, "risk", [cfg.factors, cfg.returns], ("window", "min_days", "log_returns"))
    if stage.fresh(("risks.csv",)):
        log.info("risks up to date")
        return stage.dir / "risks.csv"
    with open(cfg.factors, encoding="utf-8", newline="") as fh:
        factors = read_factors(fh, str(cfg.factors))
    with open(cfg.returns, encoding="utf-8", newline="") as fh:
        returns = read_returns(fh, str(cfg.returns))
    risks = risk_panel(returns, factors, cfg.window, cfg.min_days, cfg.log_returns)
    stage.dir.mkdir(parents=True, exist_ok=True)
    with open(stage.dir / "risks.csv", "w", encoding="utf-8", newline="") as fh:
        write_risks(risks, fh)
    stage.seal()
    n_bad = sum(not r.ok for r in risks)
    log.info("estimated %d firm-months (%d insufficient)", len(risks), n_bad)
    return stage.dir / "risks.csv"


def _load_sources(cfg: RunConfig, indices_path: Path, risks_path: Path) -> PanelSources:
    with open(indices_path, encoding="utf-8") as fh:
        indices = read_index_table(fh)
    with open(risks_path, encoding="utf-8") as fh:
        risks = read_risks(fh)
    with open(cfg.firm_covariates, encoding="utf-8", newline="") as fh:
        firm = read_firm_covariates(fh, str(cfg.firm_covariates))
    with open(cfg.macro, encoding="utf-8", newline="") as fh:
        macro = read_macro(fh, str(cfg.macro), cfg.ovx_mode)
    return PanelSources(risks, indices, firm, macro)


def _data_summary(sources: PanelSources, cfg: RunConfig) -> dict:
    stats = {}
    climate = summarize_indices([r for r in sources.indices if r.month in cfg.window])
    stats.update(climate)
    spec = ModelSpec("all", "idio", CLIMATE_VARS, CONTROLS, window=cfg.window)
    try:
        panel = assemble_panel(sources.risks, sources.indices, sources.firm_covariates,
                               sources.macro, spec)
    except ClimalensError:
        return stats
    for v in FIRM_VARS + MACRO_VARS:
        stats[v] = summarize([r.regressors[v] for r in panel.rows])
    stats["sys_risk"] = summarize([r.y_sys for r in panel.rows])
    stats["idio_risk"] = summarize([r.y_id for r in panel.rows])
    return stats


def cmd_regress(cfg: RunConfig) -> Path:
    indices_path = cmd_build_indices(cfg)
    risks_path = cmd_estimate_risk(cfg)
    cfg.validate("firm_covariates", "macro")
    stage = Stage(cfg, "regress", [indices_path, risks_path, cfg.firm_covariates, cfg.macro],
                  ("window", "se_flavor", "batteries", "ovx_mode"))
    if stage.fresh(("results.csv", "tables.txt")):
        log.info("regressions up to date")
        return stage.dir / "results.csv"
    sources = _load_sources(cfg, indices_path, risks_path)
    specs = battery_specs(cfg.batteries, cfg.se_flavor, cfg.window)
    results = run_model_battery(sources, specs, workers=cfg.workers)

    stage.dir.mkdir(parents=True, exist_ok=True)
    with open(stage.dir / "results.csv", "w", encoding="utf-8", newline="") as fh:
        write_results(results, fh)
    (stage.dir / "tables.txt").write_text(render_tables(results), encoding="utf-8")
    with open(stage.dir / "data_summary.csv", "w", encoding="utf-8", newline="") as fh:
        write_summary(_data_summary(sources, cfg), fh)
    miss_dir = stage.dir / "missing"
    if miss_dir.exists():
        shutil.rmtree(miss_dir)
    miss_dir.mkdir()
    for res in results:
        if res.panel is not None:
            name = f"{res.spec.table}_{res.spec.name}_{res.spec.dependent}.csv"
            with open(miss_dir / name, "w", encoding="utf-8", newline="") as fh:
                write_missingness(res.panel.missing, fh)
    with open(stage.dir / "battery_errors.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("table", "model", "dependent", "error"))
        for res in results:
            if res.error:
                w.writerow((res.spec.table, res.spec.name, res.spec.dependent, res.error))
    stage.seal()
    failed = sum(1 for r in results if r.error)
    log.info("fitted %d models (%d failed)", len(results) - failed, failed)
    return stage.dir / "results.csv"


def _config_inputs(cfg: RunConfig) -> list[Path]:
    paths = list(cfg.snippets) + [cfg.keywords, cfg.vocab_cc, cfg.vocab_re, cfg.vocab_ghi,
                                  cfg.lexicon, cfg.factors, cfg.returns, cfg.firm_covariates,
                                  cfg.macro]
    return [Path(p) for p in paths if p is not None and Path(p).is_file()]


def cmd_report(cfg: RunConfig, now: dt.datetime | None = None) -> Path:
    cmd_regress(cfg)
    report = cfg.out / "report"
    if report.exists():
        shutil.rmtree(report)
    report.mkdir(parents=True)
    artifacts = {}
    for stage in ("corpus", "indices", "risk", "regress"):
        src = cfg.out / stage
        for path in sorted(src.rglob("*")):
            if path.is_file() and not path.name.startswith("."):
                rel = path.relative_to(cfg.out)
                dest = report / rel
                dest.parent.mkdir(parents=True, exist_ok=True)
                shutil.copyfile(path, dest)
                artifacts[str(rel)] = sha256_file(dest)
    manifest = {
        "software": {"name": "climalens", "version": __version__,
                     "python": sys.version.split()[0]},
        "created_utc": (now or dt.datetime.now(dt.timezone.utc)).strftime("%Y-%m-%dT%H:%M:%SZ"),
        "config_sha256": cfg.digest(),
        "config": cfg.section(),
        "inputs": {str(p): sha256_file(p) for p in _config_inputs(cfg)},
        "artifacts": artifacts,
    }
    path = report / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    log.info("report written to %s", report)
    return path


def cmd_selftest(cfg: RunConfig) -> bool:
    """Generate a seeded synthetic study, run the whole pipeline, check M1 recovery."""
    root = cfg.out / "selftest"
    planted = Planted()
    paths = generate_fixture(root / "inputs", seed=cfg.seed, window=cfg.window, planted=planted)
    run_cfg = replace(cfg, snippets=(paths.snippets,), factors=paths.factors,
                      returns=paths.returns, firm_covariates=paths.firm_covariates,
                      macro=paths.macro, out=root / "run", transport="replay")
    results_path = cmd_regress(run_cfg)
    ok = True
    with open(results_path, encoding="utf-8") as fh:
        rows = [r for r in csv.DictReader(fh)
                if r["model"] == "M1" and r["table"] in ("T2", "T3") and r["variable"] == "ln_volcov"]
    for row in rows:
        target = planted.idio_volcov if row["dependent"] == "idio" else planted.sys_volcov
        coef, se = float(row["coef"]), float(row["se"])
        lo, hi = coef - 1.959964 * se, coef + 1.959964 * se
        hit = lo <= target <= hi
        ok &= hit
        print(f"{'PASS' if hit else 'FAIL'} M1 {row['dependent']}: ln_volcov = {coef:.4f} "
              f"(se {se:.4f}), 95% CI [{lo:.4f}, {hi:.4f}], planted {target}")
    if len(rows) != 2:
        print("FAIL M1 estimates missing from results")
        ok = False
    print(f"results: {results_path}")
    return ok


# -- argument parsing -------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key/value config file")
    common.add_argument("--window", help="month range YYYY-MM:YYYY-MM")
    common.add_argument("--strict", action="store_true", default=None,
                        help="fail on the first malformed record")
    common.add_argument("--se", choices=("cluster", "hc1"), help="panel standard errors")
    common.add_argument("--min-days", type=int, help="minimum trading days per firm-month")
    mode = common.add_mutually_exclusive_group()
    mode.add_argument("--replay", dest="transport", action="store_const", const="replay")
    mode.add_argument("--live", dest="transport", action="store_const", const="live")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--seed", type=int, help="seed for synthetic data")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="climalens", description=__doc__)
    parser.add_argument("--version", action="version", version=f"climalens {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("fetch", "download or replay GDELT TV snippets"),
                        ("ingest", "parse, filter and bucket snippets by month"),
                        ("build-indices", "monthly coverage and sentiment indices"),
                        ("estimate-risk", "firm-month three-factor risks"),
                        ("regress", "fixed-effects model batteries"),
                        ("report", "run everything and write a manifest"),
                        ("selftest", "end-to-end run on seeded synthetic data")):
        sub.add_parser(name, parents=[common], help=help_)
    return parser


COMMANDS = {
    "fetch": cmd_fetch,
    "ingest": cmd_ingest,
    "build-indices": cmd_build_indices,
    "estimate-risk": cmd_estimate_risk,
    "regress": cmd_regress,
    "report": cmd_report,
    "selftest": cmd_selftest,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        from .months import MonthWindow

        overrides = {
            "window": MonthWindow.parse(args.window) if args.window else None,
            "strict": args.strict,
            "se_flavor": args.se,
            "min_days": args.min_days,
            "transport": args.transport,
            "out": args.out,
            "seed": args.seed,
        }
        cfg = load_config(args.config, overrides)
        result = COMMANDS[args.command](cfg)
    except MissingFixture as exc:
        print(f"error: missing fixture {exc.key}: {exc}", file=sys.stderr)
        return 2
    except (ClimalensError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.command == "selftest":
        return 0 if result else 1
    if isinstance(result, list):
        for p in result:
            print(p)
    else:
        print(result)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
