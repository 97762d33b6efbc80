import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from polyhom.exceptions import ConfigError, GridTooSmall, IllConditionedFit
from polyhom.graph import GraphParams
from polyhom.studies import StudyConfig, fit_scaling, run_study
from polyhom.studies.poincare import poincare_probe, poincare_ratio, smooth_bump
from polyhom.studies.runner import CSV_COLUMNS
from polyhom.zero_temp import cell_graph

ROOT = Path(__file__).resolve().parents[1]
QUAD20 = ROOT / "fixtures" / "quad20.json"


def quad20_config(**over):
    data = json.loads(QUAD20.read_text())
    data.update(over)
    return data


def test_phantom_fixture_passes(tmp_path):
    res = run_study(QUAD20, output=tmp_path, threads=1)
    assert res.passed
    assert res.fits["max_rel_error"] <= 1e-10
    assert len(res.records) == 15
    header = (tmp_path / "results.csv").read_text().splitlines()[0]
    assert header.split(",") == list(CSV_COLUMNS)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["passed"] and summary["config_hash"] == res.config_hash
    assert res.table().splitlines()[0].split("\t") == list(CSV_COLUMNS[:10])


def test_rerun_and_resume_are_identical(tmp_path):
    a = run_study(QUAD20, output=tmp_path / "a", threads=1)
    b = run_study(QUAD20, output=tmp_path / "b", resume=False, threads=1)
    csv_a = (tmp_path / "a" / "results.csv").read_text()
    assert csv_a == (tmp_path / "b" / "results.csv").read_text()
    # interrupt: keep 6 records and a torn line
    ck = tmp_path / "b" / "checkpoint.jsonl"
    lines = ck.read_text().splitlines()
    ck.write_text("\n".join(lines[:6]) + "\n" + lines[6][:20])
    seen = []
    run_study(QUAD20, output=tmp_path / "b", threads=1, progress=seen.append)
    assert len(seen) == len(a.records) - 6
    assert (tmp_path / "b" / "results.csv").read_text() == csv_a
    assert b.config_hash == a.config_hash


def test_parallel_run_matches_serial(tmp_path):
    run_study(QUAD20, output=tmp_path / "s", threads=1)
    run_study(QUAD20, output=tmp_path / "p", threads=2)
    assert (tmp_path / "s" / "results.csv").read_text() == (tmp_path / "p" / "results.csv").read_text()


def test_failed_points_do_not_abort(tmp_path):
    # the Gaussian closed form needs a quadratic pair
    res = run_study(quad20_config(pair={"kind": "kuhn-grun-p10"}, betas=[1.0]), output=tmp_path, threads=1)
    assert len(res.records) == 5
    assert len(res.failed) == 5
    assert not res.passed
    assert all("error" in r for r in res.failed)
    assert "failed" in (tmp_path / "results.csv").read_text()


def test_hash_ignores_output_and_key_order():
    a = StudyConfig.from_dict(quad20_config())
    b = StudyConfig.from_dict(dict(reversed(list(quad20_config(output="elsewhere").items()))))
    assert a.hash == b.hash
    assert StudyConfig.from_dict(quad20_config(betas=[2.0])).hash != a.hash


def test_config_errors_point_at_the_problem():
    with pytest.raises(ConfigError, match="/bogus|bogus"):
        StudyConfig.from_dict(quad20_config(bogus=1))
    with pytest.raises(ConfigError, match="/kind"):
        StudyConfig.from_dict(quad20_config(kind="nope"))
    with pytest.raises(ConfigError, match="/seeds"):
        StudyConfig.from_dict(quad20_config(seeds=[1, 1]))
    with pytest.raises(ConfigError, match="/lambdas"):
        StudyConfig.from_dict(quad20_config(lambdas=[]))
    with pytest.raises(ConfigError, match="thresholds"):
        StudyConfig.from_dict(quad20_config(thresholds={"made_up": 1.0}))


def test_config_rejects_invalid_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        StudyConfig.from_json(p)


@pytest.mark.parametrize("data", [
    {"kind": "w-inf-convergence", "windows": [8, 16], "lambdas": [[[1, 0], [0, 1]]]},
    {"kind": "beta-gap", "windows": [8], "lambdas": [[[1, 0], [0, 1]]], "betas": [3, 30, 300]},
    {"kind": "two-temp", "windows": [8], "lambdas": [[[1, 0], [0, 1]]], "n_grid": [4, 16]},
])
def test_short_grids_refused(data):
    with pytest.raises(GridTooSmall):
        StudyConfig.from_dict(data)


def test_beta_gap_study_quadratic(tmp_path):
    cfg = quad20_config(kind="beta-gap", lambdas=[[[1.0, 0.0], [0.0, 1.0]]], betas=[np.e, 10.0, 100.0, 1000.0])
    res = run_study(cfg, output=tmp_path, threads=1)
    assert res.verdicts == {"lambda0": True}
    assert res.fits["lambda0"]["decreasing"]


def test_rank_one_study_quadratic_is_convex(tmp_path):
    cfg = quad20_config(kind="rank-one", lambdas=[[[1.0, 0.0], [0.0, 1.0]]], betas=[])
    res = run_study(cfg, output=tmp_path, threads=1)
    assert res.verdicts["midpoint_convexity"]


def test_fit_scaling_recovers_exact_data():
    x = np.array([3.0, 10.0, 100.0, 1000.0])
    r = fit_scaling(x, 0.7 * np.log(x) / x)
    assert r.coefficients[0] == pytest.approx(0.7, abs=1e-10)
    assert r.ratio_factor == pytest.approx(1.0)
    assert r.verdict
    r = fit_scaling(x, 2.0 - 3.0 / x, model="inverse-L")
    assert r.coefficients == pytest.approx((2.0, -3.0), abs=1e-10)


@given(st.floats(0.01, 100.0), st.floats(-10.0, 10.0))
def test_fit_scaling_inverse_l_property(a, b):
    x = np.array([8.0, 16.0, 32.0, 64.0, 128.0])
    r = fit_scaling(x, a + b / x, model="inverse-L")
    assert np.allclose(r.coefficients, (a, b), atol=1e-8 * (1 + abs(a) + abs(b)))


def test_fit_scaling_flags_outlier_and_bad_input():
    x = np.geomspace(3, 3000, 8)
    y = np.log(x) / x
    y[3] *= 5
    r = fit_scaling(x, y, sigma=0.01 * y)
    assert 3 in r.flagged and not r.verdict
    with pytest.raises(IllConditionedFit):
        fit_scaling(x[:3], y[:3])
    with pytest.raises(IllConditionedFit):
        fit_scaling([0.5, 2, 3, 4], [1, 1, 1, 1])
    with pytest.raises(IllConditionedFit):
        fit_scaling(x, y, sigma=np.zeros_like(y))
    with pytest.raises(ValueError):
        fit_scaling(x, y, model="cubic")


@pytest.fixture(scope="module")
def window_graph():
    return cell_graph(GraphParams(seed=1), [[0, 0], [32, 32]])


def test_poincare_ratio_zero_and_band(window_graph):
    G = window_graph
    assert poincare_ratio(G, 32.0, np.zeros(G.n_vertices), 2.0) == 0.0
    with pytest.raises(ValueError):
        poincare_ratio(G, 32.0, np.ones(G.n_vertices), 2.0)


def test_poincare_ratio_scaling(window_graph):
    # ratio is p-homogeneous in the amplitude up to the ε^{1-d} floor
    G = window_graph
    y = G.positions / 32.0
    b = smooth_bump(y, [((1, 0), 1.0, 0.0)], 0.3)
    r1 = poincare_ratio(G, 32.0, 32 * b, 2.0)
    assert r1 > 0
    assert poincare_ratio(G, 32.0, 64 * b, 2.0) > r1


def test_smooth_bump_vanishes_near_boundary():
    rng = np.random.default_rng(0)
    y = rng.random((500, 2)) * 0.1
    assert np.all(smooth_bump(y, [((1, 1), 1.0, 0.3)], 0.1) == 0.0)
    assert abs(smooth_bump(np.array([[0.5, 0.5]]), [((0, 0), 1.0, 0.0)], 0.1)[0] - 1.0) < 1e-12


def test_poincare_probe_small():
    rep = poincare_probe(GraphParams(), [24, 32, 48], 2.0, [0], n_functions=3)
    assert rep.constants.shape == (3,)
    assert np.all(rep.constants > 0)
    assert rep.factor < 2.0 and rep.passed()
    assert rep.to_dict()["windows"] == [24.0, 32.0, 48.0]
