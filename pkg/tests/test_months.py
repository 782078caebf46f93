import csv
import datetime as dt

import pytest
from hypothesis import given, strategies as st

from climalens.months import COVID_WINDOW, SAMPLE_WINDOW, MonthKey, MonthWindow
from climalens.synth import generate_fixture, trading_days

months = st.builds(MonthKey, st.integers(1900, 2100), st.integers(1, 12))


@given(months, st.integers(-500, 500))
def test_shift_and_ordinal_roundtrip(m, k):
    assert MonthKey.from_ordinal(m.ordinal) == m
    assert m.shift(k).shift(-k) == m
    assert MonthKey.parse(str(m)) == m
    assert m.last_day() + dt.timedelta(days=1) == m.shift(1).first_day()


def test_windows():
    assert len(SAMPLE_WINDOW) == 93 and len(COVID_WINDOW) == 20
    assert len(list(SAMPLE_WINDOW)) == 93
    assert MonthKey(2021, 9) not in SAMPLE_WINDOW and MonthKey(2013, 12) in SAMPLE_WINDOW
    assert str(MonthWindow.parse(" 2020-01:2021-08")) == "2020-01:2021-08"
    with pytest.raises(ValueError):
        MonthWindow.parse("2020-01")
    with pytest.raises(ValueError):
        MonthWindow.parse("2021-01:2020-01")
    with pytest.raises(ValueError):
        MonthKey(2020, 13)


def test_trading_days_are_weekdays():
    days = trading_days(MonthKey(2020, 2))
    assert len(days) == 20 and all(d.weekday() < 5 for d in days)


def test_generate_fixture_is_seeded(tmp_path):
    w = MonthWindow.parse("2020-01:2020-03")
    a = generate_fixture(tmp_path / "a", seed=1, n_firms=3, window=w)
    b = generate_fixture(tmp_path / "b", seed=1, n_firms=3, window=w)
    c = generate_fixture(tmp_path / "c", seed=2, n_firms=3, window=w)
    for name in ("snippets", "factors", "returns", "firm_covariates", "macro", "truth"):
        assert getattr(a, name).read_bytes() == getattr(b, name).read_bytes()
    assert a.returns.read_bytes() != c.returns.read_bytes()
    with open(a.truth) as fh:
        truth = list(csv.DictReader(fh))
    assert len(truth) == 3 * 3
