"""Run configuration: an INI-style key/value file plus command-line overrides."""

from __future__ import annotations

import configparser
import hashlib
import json
import os
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

from .months import MonthWindow, SAMPLE_WINDOW
from .synth import STATIONS

FIXTURES_ENV = "CLIMALENS_FIXTURES"


def data_path(name: str) -> Path:
    return Path(str(resources.files("climalens") / "data" / name))


@dataclass(frozen=True)
class RunConfig:
    window: MonthWindow = SAMPLE_WINDOW
    seed: int = 20210831
    out: Path = Path("out")
    strict: bool = False
    # corpus
    keywords: Path = field(default_factory=lambda: data_path("keywords.txt"))
    stations: tuple[str, ...] = STATIONS
    snippets: tuple[Path, ...] = ()
    transport: str = "replay"
    fixtures: Path | None = None
    rate_limit: float = 1.0
    base_url: str = ""
    # text
    vocab_cc: Path = field(default_factory=lambda: data_path("vocab_cc.txt"))
    vocab_re: Path = field(default_factory=lambda: data_path("vocab_re.txt"))
    vocab_ghi: Path = field(default_factory=lambda: data_path("vocab_ghi.txt"))
    lexicon: Path = field(default_factory=lambda: data_path("lexicon_sample.tsv"))
    # risk
    factors: Path | None = None
    returns: Path | None = None
    min_days: int = 15
    log_returns: bool = False
    # panel
    firm_covariates: Path | None = None
    macro: Path | None = None
    se_flavor: str = "cluster"
    batteries: tuple[str, ...] = ("main", "print_media", "cpu", "covid")
    ovx_mode: str = "return"
    workers: int = 1

    @property
    def fixture_dir(self) -> Path:
        env = os.environ.get(FIXTURES_ENV)
        if env:
            return Path(env)
        return self.fixtures if self.fixtures is not None else self.out / "fixtures"

    def section(self, *names: str) -> dict:
        """JSON-friendly subset of settings, used for cache keys and manifests."""
        data = {}
        for f in fields(self):
            if not names or f.name in names:
                data[f.name] = _jsonable(getattr(self, f.name))
        return data

    def digest(self) -> str:
        blob = json.dumps(self.section(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()

    def validate(self, *required: str) -> None:
        """Check that the named path settings are set and exist."""
        missing = []
        for name in required:
            value = getattr(self, name)
            paths = value if isinstance(value, tuple) else (value,)
            if value is None or value == ():
                missing.append(f"{name} (not set)")
            for p in paths:
                if p is not None and not Path(p).exists():
                    missing.append(f"{name} ({p})")
        if missing:
            raise FileNotFoundError("missing inputs: " + ", ".join(missing))


def _jsonable(v):
    if isinstance(v, Path):
        return str(v)
    if isinstance(v, MonthWindow):
        return str(v)
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    return v


_PATH_KEYS = {"keywords", "fixtures", "vocab_cc", "vocab_re", "vocab_ghi", "lexicon",
              "factors", "returns", "firm_covariates", "macro", "out"}
_ALIASES = {"se": "se_flavor"}


def _split(value: str) -> list[str]:
    return [p.strip() for p in value.replace("\n", ",").split(",") if p.strip()]


def _coerce(name: str, raw: str, base: Path):
    def path(p: str) -> Path:
        q = Path(os.path.expanduser(p))
        return q if q.is_absolute() else base / q

    if name in _PATH_KEYS:
        return path(raw) if raw.strip() else None
    if name == "snippets":
        return tuple(path(p) for p in _split(raw))
    if name in ("stations", "batteries"):
        items = _split(raw)
        return tuple(s.upper() for s in items) if name == "stations" else tuple(items)
    if name == "window":
        return MonthWindow.parse(raw)
    if name in ("seed", "min_days", "workers"):
        return int(raw)
    if name == "rate_limit":
        return float(raw)
    if name in ("strict", "log_returns"):
        return raw.strip().lower() in ("1", "true", "yes", "on")
    return raw.strip()


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Read ``path`` (any section names; keys are global) then apply overrides.

    Relative paths in the file resolve against the file's directory.
    """
    values: dict = {}
    known = {f.name for f in fields(RunConfig)}
    if path is not None:
        path = Path(path)
        parser = configparser.ConfigParser(interpolation=None)
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
        base = path.resolve().parent
        for section in parser.sections():
            for key, raw in parser.items(section):
                name = _ALIASES.get(key, key)
                if name not in known:
                    raise ValueError(f"{path}: unknown setting [{section}] {key}")
                values[name] = _coerce(name, raw, base)
    for key, value in (overrides or {}).items():
        if value is not None:
            values[_ALIASES.get(key, key)] = value
    cfg = RunConfig(**values)
    if cfg.se_flavor not in ("cluster", "hc1"):
        raise ValueError(f"se must be cluster or hc1, got {cfg.se_flavor!r}")
    if cfg.transport not in ("replay", "live"):
        raise ValueError(f"transport must be replay or live, got {cfg.transport!r}")
    return cfg


def write_config(cfg: RunConfig, path) -> None:
    """Write ``cfg`` as a config file that :func:`load_config` reads back."""
    parser = configparser.ConfigParser(interpolation=None)
    parser["run"] = {}
    for f in fields(cfg):
        name, value = f.name, getattr(cfg, f.name)
        if value is None:
            continue
        if isinstance(value, tuple):
            text = ", ".join(str(v) for v in value)
        elif isinstance(value, bool):
            text = "true" if value else "false"
        else:
            text = str(value)
        parser["run"][name] = text
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)


__all__ = ["RunConfig", "load_config", "write_config", "data_path", "FIXTURES_ENV"]
