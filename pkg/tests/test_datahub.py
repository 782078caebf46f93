import io
import math

import pytest

from climalens.datahub import (FirmMonthCovariates, MacroMonth, assemble_panel, covid_interaction,
                               log_returns, read_firm_covariates, read_macro, transform_macro,
                               write_missingness)
from climalens.errors import EmptyPanel, FormatError, NonPositiveLevel
from climalens.factor_model import FirmMonthRisk
from climalens.indices import ClimateIndexRow
from climalens.months import MonthKey, MonthWindow
from climalens.panel import ModelSpec

M = [MonthKey(2020, m) for m in range(1, 5)]


def test_log_returns_with_gaps():
    levels = [(M[0], 100.0), (M[1], 110.0), (M[2], None), (M[3], 99.0)]
    out = log_returns(levels, "pse")
    assert out[0] is None and out[2] is None and out[3] is None
    assert out[1] == pytest.approx(100 * math.log(1.1))
    skipped = log_returns([(M[0], 100.0), (M[2], 120.0)], "pse")
    assert skipped == [None, None]
    with pytest.raises(NonPositiveLevel) as info:
        log_returns([(M[0], 100.0), (M[1], 0.0)], "msci")
    assert info.value.series == "msci" and "2020-02" in str(info.value)


def test_covid_interaction():
    assert covid_interaction([0, 99, None], [0.0, 50.0, 10.0]) == [0.0, pytest.approx(math.log(100) * 50), None]
    with pytest.raises(ValueError):
        covid_interaction([1], [101.0])
    with pytest.raises(ValueError):
        covid_interaction([-1], [1.0])
    with pytest.raises(ValueError):
        covid_interaction([1, 2], [1.0])


MACRO_CSV = ("month,pse,msci,ovx,epu,covid_deaths,stringency,cpu,chneg,mccc\n"
             "2020-02,110,210,20,150,10,30,100,,0.5\n"
             "2020-01,100,200,25,120,0,0,90,0.001,\n")


def test_read_macro_transforms():
    rows = read_macro(io.StringIO(MACRO_CSV))
    assert [r.month for r in rows] == M[:2]
    jan, feb = rows
    assert jan.ln_pse is None and jan.ln_ovx is None
    assert feb.ln_pse == pytest.approx(100 * math.log(1.1))
    assert feb.ln_ovx == pytest.approx(100 * math.log(0.8))
    assert feb.ln_epu == pytest.approx(math.log(150))
    assert feb.ln_covid_x_ps == pytest.approx(math.log(11) * 30)
    assert jan.chneg == 0.001 and feb.chneg is None and feb.mccc == 0.5
    lvl = read_macro(io.StringIO(MACRO_CSV), ovx_mode="level")
    assert lvl[0].ln_ovx == pytest.approx(math.log(25))
    with pytest.raises(ValueError):
        transform_macro([], ovx_mode="diff")


def test_read_firm_covariates():
    text = ("firm_id,month,roa,mktcap,leverage,stockvol,intasset,mbv\n"
            "B,2020-01,1.5,1000,0.3,5000,200,NA\n"
            "A,2020-01,-2,2000,0.1,100,50,1.2\n")
    rows = read_firm_covariates(io.StringIO(text))
    assert [r.firm_id for r in rows] == ["A", "B"]
    assert rows[1].ln_mktcap == pytest.approx(math.log(1000)) and rows[1].mbv is None
    with pytest.raises(NonPositiveLevel):
        read_firm_covariates(io.StringIO(text.replace("1000", "-5")))
    with pytest.raises(FormatError, match="mbv"):
        read_firm_covariates(io.StringIO("firm_id,month,roa,mktcap,leverage,stockvol,intasset\n"))


def _risk(firm, month, ok=True):
    if ok:
        return FirmMonthRisk(firm, month, 1.1, 0.1, 0.0, 0.0, 2.0, 21, 0.5, "ok")
    return FirmMonthRisk(firm, month, None, None, None, None, None, 3, None, "insufficient")


def _index(month, defined=True):
    v = 1.0 if defined else float("nan")
    return ClimateIndexRow(month, 5.0, v, v, v, v, v, defined)


def test_assemble_panel_listwise_deletion_and_tally():
    risks = [_risk("A", m) for m in M] + [_risk("B", M[0], ok=False), _risk("B", M[1])]
    indices = [_index(M[0]), _index(M[1]), _index(M[2], defined=False), _index(M[3])]
    firm = [FirmMonthCovariates("A", m, roa=1.0 + i) for i, m in enumerate(M)] + \
        [FirmMonthCovariates("B", M[1], roa=None)]
    macro = [MacroMonth(m, ln_epu=5.0) for m in M[:3]]
    spec = ModelSpec("t", "idio", ("cov_cc",), ("roa", "ln_epu"), window=MonthWindow(M[0], M[3]))
    panel = assemble_panel(risks, indices, firm, macro, spec)
    assert [(r.firm_id, r.month) for r in panel.rows] == [("A", M[0]), ("A", M[1])]
    assert panel.variables == ("cov_cc", "roa", "ln_epu")
    tally = {m.variable: (m.n_missing, str(m.first_month), str(m.last_month)) for m in panel.missing}
    assert tally == {"risk": (1, "2020-01", "2020-01"), "cov_cc": (1, "2020-03", "2020-03"),
                     "roa": (2, "2020-01", "2020-02"), "ln_epu": (1, "2020-04", "2020-04")}
    assert panel.rows[0].y("sys") == 1.1 and panel.rows[0].y("idio") == 2.0
    buf = io.StringIO()
    write_missingness(panel.missing, buf)
    assert buf.getvalue().splitlines()[1] == "cov_cc,1,2020-03,2020-03"


def test_assemble_panel_errors():
    spec = ModelSpec("t", "idio", ("cov_cc",), ("roa",))
    with pytest.raises(EmptyPanel):
        assemble_panel([_risk("A", M[0])], [], [], [], spec)
    with pytest.raises(ValueError, match="unknown"):
        assemble_panel([], [], [], [], ModelSpec("t", "idio", ("bogus",), ()))


from hypothesis import given, strategies as st  # noqa: E402


@given(st.floats(0, 1e7), st.floats(0, 1e7), st.floats(0, 100), st.floats(0, 100))
def test_covid_interaction_monotone(d1, d2, s1, s2):
    lo_d, hi_d = sorted((d1, d2))
    lo_s, hi_s = sorted((s1, s2))
    a, b, c = covid_interaction([lo_d, hi_d, lo_d], [lo_s, lo_s, hi_s])
    assert a <= b and a <= c


@given(st.floats(1e-6, 1e12))
def test_log_transform_inverts(x):
    from climalens.datahub import log_level
    assert math.exp(log_level(x, "x", M[0])) == pytest.approx(x, rel=1e-10)


@given(st.lists(st.tuples(st.sampled_from("ABC"), st.integers(0, 3), st.booleans()), max_size=15),
       st.lists(st.tuples(st.sampled_from("ABC"), st.integers(0, 3)), max_size=15))
def test_panel_rows_bounded(risk_keys, firm_keys):
    risks = list({(f, m): _risk(f, M[m], ok) for f, m, ok in risk_keys}.values())
    firm = list({(f, m): FirmMonthCovariates(f, M[m], roa=1.0) for f, m in firm_keys}.values())
    spec = ModelSpec("t", "idio", ("cov_cc",), ("roa",))
    try:
        panel = assemble_panel(risks, [_index(m) for m in M], firm, [], spec)
    except EmptyPanel:
        return
    assert len(panel) <= min(sum(r.ok for r in risks), len(firm))
