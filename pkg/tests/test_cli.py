import csv
import json
import os
from pathlib import Path

import pytest

from climalens.cli import main, sha256_file
from climalens.config import FIXTURES_ENV, RunConfig, load_config, write_config
from climalens.months import MonthWindow
from climalens.synth import generate_fixture

FIXTURES = Path(__file__).parent / "fixtures"


def _write_cfg(path: Path, **extra) -> Path:
    settings = {
        "window": "2020-01:2020-03",
        "stations": "CNBC",
        "keywords": str(FIXTURES / "replay_keywords.txt"),
        "fixtures": str(FIXTURES / "replay"),
        "vocab_cc": str(FIXTURES / "toy_vocab_cc.txt"),
        "vocab_re": str(FIXTURES / "toy_vocab_re.txt"),
        "vocab_ghi": str(FIXTURES / "toy_vocab_ghi.txt"),
        "lexicon": str(FIXTURES / "toy_lexicon.tsv"),
        "out": "out",
    }
    settings.update(extra)
    body = "[run]\n" + "".join(f"{k} = {v}\n" for k, v in settings.items())
    path.write_text(body, encoding="utf-8")
    return path


def _rows(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def test_fetch_replay_and_ingest(tmp_path, capsys):
    cfg = _write_cfg(tmp_path / "run.ini")
    assert main(["ingest", "--config", str(cfg)]) == 0
    out = tmp_path / "out" / "corpus"
    assert sorted(p.name for p in (out / "raw").iterdir()) == ["carbon-tax__CNBC.csv",
                                                               "climate-change__CNBC.csv"]
    kept = _rows(out / "snippets.csv")
    assert [r["keyword"] for r in kept] == ["climate change", "carbon tax", "climate change",
                                            "carbon tax"]
    monthly = _rows(out / "monthly.csv")
    assert [(r["month"], r["snippet_count"]) for r in monthly] == [
        ("2020-01", "2"), ("2020-02", "2"), ("2020-03", "0")]
    assert str(out / "monthly.csv") in capsys.readouterr().out


def test_missing_fixture_exit_code_names_key(tmp_path, capsys):
    cfg = _write_cfg(tmp_path / "run.ini", fixtures=str(tmp_path / "empty"))
    assert main(["fetch", "--config", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert "missing fixture" in err
    assert "5094868f43ee2d072dd52b1fa4fd3238a8525720ab258486085017b792faeb40" in err


def test_fixture_env_override(tmp_path, monkeypatch):
    cfg = _write_cfg(tmp_path / "run.ini", fixtures=str(tmp_path / "empty"))
    monkeypatch.setenv(FIXTURES_ENV, str(FIXTURES / "replay"))
    assert main(["fetch", "--config", str(cfg)]) == 0


def test_strict_mode_and_error_report(tmp_path, capsys):
    src = tmp_path / "snips.csv"
    src.write_text("station,timestamp,text\nCNBC,2020-01-05T10:00Z,Climate change now\n"
                   "CNBC,garbage,Climate change broken\n", encoding="utf-8")
    cfg = _write_cfg(tmp_path / "run.ini", snippets=str(src))
    assert main(["ingest", "--config", str(cfg)]) == 0
    assert "1 malformed" in capsys.readouterr().err
    errors = _rows(tmp_path / "out" / "corpus" / "ingest_errors.csv")
    assert errors[0]["line"] == "3"
    assert main(["ingest", "--config", str(cfg), "--strict", "--out", str(tmp_path / "o2")]) == 1
    assert "garbage" in capsys.readouterr().err


def test_stage_cache_reuses_and_invalidates(tmp_path):
    cfg = _write_cfg(tmp_path / "run.ini")
    assert main(["build-indices", "--config", str(cfg)]) == 0
    idx = tmp_path / "out" / "indices" / "indices.csv"
    key = tmp_path / "out" / "indices" / ".cache-key"
    first = (idx.stat().st_mtime_ns, key.read_text())
    assert main(["build-indices", "--config", str(cfg)]) == 0
    assert (idx.stat().st_mtime_ns, key.read_text()) == first

    vocab = tmp_path / "cc.txt"
    vocab.write_text("climate change\nclimate*\n", encoding="utf-8")
    cfg2 = _write_cfg(tmp_path / "run.ini", vocab_cc=str(vocab))
    assert main(["build-indices", "--config", str(cfg2)]) == 0
    assert key.read_text() != first[1]
    rows = _rows(idx)
    assert rows[2] == {"month": "2020-03", "ln_volcov": "", "cov_cc": "", "cov_re": "",
                       "cov_ghi": "", "pos_sent": "", "neg_sent": "", "defined": "0"}


def test_regress_reports_missing_inputs(tmp_path, capsys):
    cfg = _write_cfg(tmp_path / "run.ini")
    assert main(["regress", "--config", str(cfg)]) == 1
    assert "missing inputs" in capsys.readouterr().err


@pytest.fixture(scope="module")
def study(tmp_path_factory):
    root = tmp_path_factory.mktemp("study")
    paths = generate_fixture(root / "inputs", seed=3, n_firms=6,
                             window=MonthWindow.parse("2019-01:2021-08"))
    cfg = root / "study.ini"
    cfg.write_text(
        "[corpus]\nsnippets = inputs/snippets.csv\n"
        "[risk]\nfactors = inputs/factors.csv\nreturns = inputs/returns.csv\nmin_days = 10\n"
        "[panel]\nfirm_covariates = inputs/firm_covariates.csv\nmacro = inputs/macro.csv\n"
        "batteries = main, covid\nse = cluster\n"
        "[run]\nwindow = 2019-01:2021-08\nout = out\n", encoding="utf-8")
    return root, cfg, paths


def test_report_manifest(study):
    root, cfg, paths = study
    assert main(["report", "--config", str(cfg)]) == 0
    manifest_path = root / "out" / "report" / "manifest.json"
    m = json.loads(manifest_path.read_text())
    assert m["software"]["name"] == "climalens"
    assert m["config"]["min_days"] == 10 and m["config"]["batteries"] == ["main", "covid"]
    assert m["inputs"][str(paths.returns)] == sha256_file(paths.returns)
    for rel, digest in m["artifacts"].items():
        assert sha256_file(root / "out" / "report" / rel) == digest
    assert "regress/results.csv" in m["artifacts"] and "risk/risks.csv" in m["artifacts"]
    results = _rows(root / "out" / "regress" / "results.csv")
    assert {r["table"] for r in results} == {"T2", "T3", "T6"}
    assert {r["n_obs"] for r in results if r["table"] == "T6"} == {str(6 * 20)}

    assert main(["report", "--config", str(cfg)]) == 0
    again = json.loads(manifest_path.read_text())
    m.pop("created_utc")
    again.pop("created_utc")
    assert again == m


def test_cli_overrides_change_outputs(study):
    root, cfg, _ = study
    out = root / "hc1"
    assert main(["regress", "--config", str(cfg), "--se", "hc1", "--min-days", "15",
                 "--out", str(out)]) == 0
    assert "SEs: hc1" in (out / "regress" / "tables.txt").read_text(encoding="utf-8")


# -- config -----------------------------------------------------------------

def test_config_relative_paths_and_aliases(tmp_path):
    sub = tmp_path / "conf"
    sub.mkdir()
    cfg = sub / "a.ini"
    cfg.write_text("[x]\nfactors = data/f.csv\nsnippets = a.csv, b.csv\nse = hc1\n"
                   "stations = cnbc\nstrict = yes\n", encoding="utf-8")
    c = load_config(cfg, {"seed": 7, "min_days": None})
    assert c.factors == sub / "data" / "f.csv"
    assert c.snippets == (sub / "a.csv", sub / "b.csv")
    assert (c.se_flavor, c.stations, c.strict, c.seed, c.min_days) == ("hc1", ("CNBC",), True, 7, 15)


def test_config_rejects_bad_settings(tmp_path):
    cfg = tmp_path / "a.ini"
    cfg.write_text("[x]\nbogus = 1\n", encoding="utf-8")
    with pytest.raises(ValueError, match="bogus"):
        load_config(cfg)
    with pytest.raises(ValueError):
        load_config(None, {"se_flavor": "hc3"})
    with pytest.raises(ValueError):
        load_config(None, {"transport": "carrier-pigeon"})


def test_write_config_roundtrip(tmp_path):
    c = RunConfig(window=MonthWindow.parse("2015-01:2016-12"), snippets=(tmp_path / "s.csv",),
                  factors=tmp_path / "f.csv", min_days=12, strict=True, out=tmp_path / "o")
    write_config(c, tmp_path / "c.ini")
    back = load_config(tmp_path / "c.ini")
    assert back == c
    assert back.digest() == c.digest()


def test_fixture_dir_default(tmp_path, monkeypatch):
    monkeypatch.delenv(FIXTURES_ENV, raising=False)
    assert RunConfig(out=tmp_path).fixture_dir == tmp_path / "fixtures"
    monkeypatch.setenv(FIXTURES_ENV, os.fspath(tmp_path / "x"))
    assert RunConfig().fixture_dir == tmp_path / "x"
