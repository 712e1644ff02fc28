"""PRE tables, dominance gaps and the embedded-dataset reproduction."""
import math

import pytest

from strataux import (
    ESTIMATOR_ORDER,
    PopulationSummary,
    SampleDesign,
    StratumSummary,
    dominance_report,
    embedded_kk2009,
    min_mse_tp,
    moment_set,
    parse_microdata,
    pre_table,
    reconcile_covariances,
    reproduce_kk2009,
    summarize,
)
from strataux.efficiency import PUBLISHED_PRE

# Frozen PRE values for the embedded dataset under prefer-correlation,
# from an independent recomputation (1e-10 relative).
EXPECTED_PRE = {
    "mean": 100.0,
    "ratio": 1049.261007711885,
    "exp_ratio_x": 375.36726675174674,
    "exp_ratio_xz": 1831.8356505233482,
    "exp_product_xz": 28.948813809477617,
    "exp_ratio_x_product_z": 138.04820197228656,
    "exp_product_x_ratio_z": 72.25610805852125,
    "regression": 108.62336337485368,
    "exp_regression": 2931.067716959932,
}

COMPUTED_RANKING = (
    "exp_regression", "exp_ratio_xz", "ratio", "exp_ratio_x",
    "exp_ratio_x_product_z", "regression", "mean",
    "exp_product_x_ratio_z", "exp_product_xz",
)
PUBLISHED_RANKING = (
    "exp_regression", "regression", "exp_ratio_xz", "ratio", "exp_ratio_x",
    "exp_ratio_x_product_z", "mean", "exp_product_x_ratio_z", "exp_product_xz",
)


@pytest.fixture(scope="module")
def m_rho():
    pop, design = embedded_kk2009()
    fixed, _ = reconcile_covariances(pop, "prefer-correlation")
    return moment_set(fixed, design)


def test_published_values_stored_verbatim():
    assert PUBLISHED_PRE["exp_regression"] == 4656.35
    assert PUBLISHED_PRE["exp_product_xz"] == 27.94
    assert PUBLISHED_PRE["mean"] == 100.0
    assert set(PUBLISHED_PRE) == set(ESTIMATOR_ORDER)


def test_pre_table_matches_frozen_values(m_rho):
    report = pre_table(m_rho, provenance="prefer-correlation")
    assert report.provenance == "prefer-correlation"
    assert [r.estimator for r in report.rows] == list(ESTIMATOR_ORDER)
    for row in report.rows:
        assert row.pre == pytest.approx(EXPECTED_PRE[row.estimator], rel=1e-10)
        assert row.warning == ""
    assert report.row("mean").pre == 100.0  # identity, not approximation
    assert report.m1_opt == pytest.approx(-1.1771177911944053, rel=1e-10)
    assert report.m2_opt == pytest.approx(-0.8919633278800005, rel=1e-10)


def test_pre_table_ranks_and_deltas(m_rho):
    report = pre_table(m_rho)
    by_rank = sorted(report.rows, key=lambda r: r.rank)
    assert tuple(r.estimator for r in by_rank) == COMPUTED_RANKING
    tuned = report.row("exp_regression")
    assert tuned.rank == 1
    assert tuned.delta_vs_tuned == 0.0
    assert report.row("exp_product_xz").rank == 9
    best = min_mse_tp(m_rho).mse
    for row in report.rows:
        assert row.delta_vs_tuned == row.mse - best


def test_pre_is_scale_free(m_rho):
    import dataclasses

    scaled = dataclasses.replace(
        m_rho, ybar=m_rho.ybar * 7.5, b1=m_rho.b1 * 7.5, b2=m_rho.b2 * 7.5,
        regression_residual=m_rho.regression_residual * 7.5 ** 2)
    a = pre_table(m_rho)
    b = pre_table(scaled)
    for ra, rb in zip(a.rows, b.rows):
        assert rb.pre == pytest.approx(ra.pre, rel=1e-10)
        assert rb.rank == ra.rank


def test_census_pre_table_is_undefined():
    pop = summarize(parse_microdata(
        "stratum,y,x,z\nA,3,11,6\nA,5,14,9\nB,20,30,40\nB,26,34,46\n"))
    m = moment_set(pop, SampleDesign(n=(2, 2)))
    report = pre_table(m)
    for row in report.rows:
        assert row.mse == 0.0 and row.pre is None and row.rank is None
        assert "census" in row.warning
    assert report.m1_opt is None and report.m2_opt is None


def test_dominance_on_embedded_dataset(m_rho):
    rows = dominance_report(m_rho)
    assert [r.estimator for r in rows] == [
        e for e in ESTIMATOR_ORDER if e != "exp_regression"]
    for r in rows:
        assert r.satisfied and r.delta > 0.0, r.estimator
        assert r.note == ""


def test_dominance_flags_residual_beating_the_quadratic():
    # an unrealizable correlation triple (rho_yx^2 + rho_yz^2 > 1 with
    # rho_xz = 0) drives the regression residual below the tuned optimum
    s = StratumSummary(
        h=1, N=60, ybar=100.0, xbar=80.0, zbar=50.0,
        s_y=10.0, s_x=8.0, s_z=5.0,
        s_yx=0.8 * 10 * 8, s_yz=0.8 * 10 * 5, s_xz=0.0,
        rho_yx=0.8, rho_yz=0.8, rho_xz=0.0,
    )
    m = moment_set(PopulationSummary(strata=(s,)), SampleDesign(n=(10,)))
    assert m.regression_residual < 0.0
    rows = {r.estimator: r for r in dominance_report(m)}
    reg = rows["regression"]
    assert not reg.satisfied and reg.delta < 0.0
    assert "residual" in reg.note


def test_reproduction_report_structure():
    rep = reproduce_kk2009()
    assert [r.estimator for r in rep.rows] == list(ESTIMATOR_ORDER)
    assert rep.published_ranking == PUBLISHED_RANKING
    assert rep.computed_ranking == COMPUTED_RANKING
    for row in rep.rows:
        assert row.published_pre == PUBLISHED_PRE[row.estimator]
        assert row.delta is not None  # every row carries its delta
        assert row.delta == row.pre - row.published_pre
    mean_row = rep.rows[0]
    assert mean_row.estimator == "mean"
    assert mean_row.pre == 100.0
    assert mean_row.delta == 0.0


def test_reproduction_flags_rank_mismatches():
    rep = reproduce_kk2009()
    mismatched = {r.estimator for r in rep.rows if r.rank_mismatch}
    assert mismatched == {
        "ratio", "exp_ratio_x", "exp_ratio_xz", "exp_ratio_x_product_z",
        "regression",
    }
    for row in rep.rows:
        assert row.rank_mismatch == (row.rank != row.published_rank)
    assert any("disagrees with the published ranking" in n for n in rep.notes)


def test_reproduction_repair_logs():
    rep = reproduce_kk2009()
    repaired = {(e.h, e.pair) for e in rep.repairs_correlation.repaired}
    assert repaired == {(3, "xz"), (4, "yx"), (4, "yz"), (5, "yx"), (5, "xz")}
    assert {(e.h, e.pair) for e in rep.repairs_covariance.repaired} == {
        (4, "yx"), (4, "yz"), (5, "yx"), (5, "xz")}
    assert rep.m1_opt == pytest.approx(-1.1771177911944053, rel=1e-10)
    assert rep.m2_opt == pytest.approx(-0.8919633278800005, rel=1e-10)


def test_reproduction_covariance_column_degrades_but_reports():
    rep = reproduce_kk2009()
    tuned = rep.rows[-1]
    assert tuned.estimator == "exp_regression"
    assert tuned.pre_covariance is None
    assert "tuned optimum unavailable" in tuned.covariance_note
    t5 = next(r for r in rep.rows if r.estimator == "exp_ratio_x_product_z")
    assert t5.pre_covariance is not None and t5.pre_covariance < 0.0
    assert any("negative first-order MSE" in n for n in rep.notes)
    assert any("zbar in stratum 4" in n for n in rep.notes)
