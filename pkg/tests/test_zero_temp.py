import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from polyhom.energy import SOFT, PairPotential, VolumetricPotential
from polyhom.exceptions import GridTooSmall, NotConverged, PartitionInvalid, WindowTooSmall
from polyhom.finite_temp import QuadraticModel
from polyhom.fixtures import kuhn_grun_small, quad20
from polyhom.graph import GraphParams, generate_graph
from polyhom.zero_temp import (
    CellProblem,
    cell_graph,
    estimate_W_inf,
    fit_inverse_l,
    growth_sandwich,
    interior_surface,
    minimize_cell,
    partition_grid,
    rank_one_probe,
    rank_one_report,
    subadditivity_check,
    w_inf_from_densities,
)
from polyhom.zero_temp.cell import _SoftMap

LAM = np.array([[1.2, 0.1], [-0.05, 0.85]])


@pytest.fixture(scope="module")
def q20():
    return quad20()


@pytest.fixture(scope="module")
def kg():
    return kuhn_grun_small(physical=False)


def test_quadratic_minimum_matches_linear_solve(q20):
    # oracle: the quadratic minimizer solves the reduced linear system
    G, D, eps = q20.args
    prob = CellProblem(G, D, eps, q20.pair, Lambda=LAM, band=q20.band)
    res = minimize_cell(prob, n_restarts=3)
    model = QuadraticModel(prob.hamiltonian, prob.datum)
    assert res.converged
    assert res.energy == pytest.approx(model.min_energy, rel=1e-10)
    assert res.density == pytest.approx(model.min_energy / prob.volume, rel=1e-10)


def test_jittered_quadratic_minimum_matches_linear_solve():
    G = cell_graph(GraphParams(seed=3), [[0, 0], [8, 8]])
    pair = PairPotential(kind="quadratic", matrix=np.array([[2.0, 0.3], [0.3, 1.0]]))
    prob = CellProblem(G, [[0, 0], [8, 8]], 1.0, pair, Lambda=LAM, band=1.5)
    res = minimize_cell(prob, n_restarts=2)
    model = QuadraticModel(prob.hamiltonian, prob.datum)
    assert res.energy == pytest.approx(model.min_energy, rel=1e-9)
    assert res.energy <= res.affine_energy + 1e-12


def test_kuhn_grun_minimization_is_reproducible_and_dominated(kg):
    G, D, eps = kg.args
    prob = CellProblem(G, D, eps, kg.pair, kg.vol, Lambda=LAM, band=kg.band)
    a = minimize_cell(prob, n_restarts=3, seed=4)
    b = minimize_cell(prob, n_restarts=3, seed=4)
    assert a.energy == b.energy
    assert np.array_equal(a.deformation.values, b.deformation.values)
    assert a.energy <= a.affine_energy
    assert a.grad_norm <= a.tol_grad
    assert a.spread < 1e-6
    assert len(a.restart_values) == 3
    d = a.to_dict()
    assert d["converged"] and d["best_restart"] in range(3)


def test_soft_mode_not_above_clamped(kg):
    G, D, eps = kg.args
    clamped = minimize_cell(CellProblem(G, D, eps, kg.pair, kg.vol, Lambda=LAM, band=kg.band), n_restarts=2)
    soft = minimize_cell(CellProblem(G, D, eps, kg.pair, kg.vol, Lambda=LAM, band=kg.band, mode="soft"),
                         n_restarts=2)
    assert soft.energy <= clamped.energy + 1e-9 * abs(clamped.energy)
    u = soft.deformation
    band = u.roles == SOFT
    assert band.any()
    assert np.all(np.linalg.norm(u.values[band] - u.reference[band], axis=1) < 1)


def test_not_converged_carries_result(kg):
    G, D, eps = kg.args
    prob = CellProblem(G, D, eps, kg.pair, kg.vol, Lambda=np.diag([1.6, 0.7]), band=kg.band)
    with pytest.raises(NotConverged) as info:
        minimize_cell(prob, n_restarts=1, max_iter=1)
    assert info.value.result.energy <= info.value.result.affine_energy


def test_window_without_margin_rejected():
    G = generate_graph(GraphParams(), [[0, 0], [10, 10]], strict=False)
    with pytest.raises(WindowTooSmall):
        CellProblem(G, [[0, 0], [10, 10]], 1.0, PairPotential(), Lambda=np.eye(2))


def test_problem_needs_exactly_one_datum(q20):
    G, D, eps = q20.args
    with pytest.raises(ValueError):
        CellProblem(G, D, eps, q20.pair)
    with pytest.raises(ValueError):
        CellProblem(G, D, eps, q20.pair, Lambda=np.eye(2), phi=lambda y: y)


def test_general_datum_matches_affine(q20):
    G, D, eps = q20.args
    a = minimize_cell(CellProblem(G, D, eps, q20.pair, Lambda=LAM, band=q20.band), n_restarts=1)
    b = minimize_cell(CellProblem(G, D, eps, q20.pair, phi=lambda y: y @ LAM.T, band=q20.band), n_restarts=1)
    assert a.energy == pytest.approx(b.energy, rel=1e-12)


def test_w_inf_needs_three_windows():
    with pytest.raises(GridTooSmall):
        estimate_W_inf(np.eye(2), [8, 16], [0], PairPotential(kind="quadratic"))
    with pytest.raises(GridTooSmall):
        w_inf_from_densities(np.eye(2), [8, 16], [0], np.ones((2, 1)), np.zeros((2, 1)))


def test_w_inf_lattice_quadratic_windows_match_linear_solves():
    # zero-jitter lattice: each window's density has an independent linear-solve oracle
    gp = GraphParams(jitter=0.0)
    pair = PairPotential(kind="quadratic")
    Lam = np.diag([1.1, 0.9])
    est = estimate_W_inf(Lam, [4, 6, 8], [0], pair, graph_params=gp, band=1.0, n_restarts=1)
    for L, dens in zip(est.windows, est.densities[:, 0]):
        G = cell_graph(gp, [[0, 0], [L, L]])
        prob = CellProblem(G, [[0, 0], [L, L]], 1.0, pair, Lambda=Lam, band=1.0)
        model = QuadraticModel(prob.hamiltonian, prob.datum)
        assert dens == pytest.approx(model.min_energy / prob.volume, rel=1e-10)
    assert est.relative_gap == pytest.approx(abs(est.means[-1] - est.means[-2]) / est.means[-1])
    assert est.to_dict()["windows"] == [4.0, 6.0, 8.0]


def test_fit_inverse_l_exact():
    L = np.array([8.0, 16.0, 32.0, 64.0])
    a, b, r = fit_inverse_l(L, 3.0 - 2.0 / L)
    assert a == pytest.approx(3.0, abs=1e-12)
    assert b == pytest.approx(-2.0, abs=1e-10)
    assert r < 1e-12


def test_partition_helpers():
    I = np.array([[0.0, 0.0], [8.0, 8.0]])
    parts = partition_grid(I, [2, 2])
    assert len(parts) == 4
    # each interior face is counted once per adjacent part
    assert interior_surface(I, parts) == pytest.approx(32.0)
    assert interior_surface(I, partition_grid(I, [4, 1])) == pytest.approx(48.0)
    with pytest.raises(PartitionInvalid):
        subadditivity_check(np.eye(2), I, parts[:3], PairPotential(kind="quadratic"))
    overlapping = [np.array([[0, 0], [5, 8.0]]), np.array([[4, 0], [8, 8.0]])]
    with pytest.raises(PartitionInvalid):
        subadditivity_check(np.eye(2), I, overlapping, PairPotential(kind="quadratic"))


@pytest.mark.slow
def test_subadditivity_quadratic_small():
    I = np.array([[0.0, 0.0], [16.0, 16.0]])
    rep = subadditivity_check(np.diag([1.3, 0.8]), I, partition_grid(I, [2, 2]), PairPotential(kind="quadratic"),
                              n_restarts=1)
    assert rep.passed
    assert rep.slack >= 0 and rep.stitched_slack >= -rep.tolerance
    assert rep.surface == pytest.approx(64.0)


def test_rank_one_probe_convex_and_concave():
    a, n = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    ts = np.linspace(-0.2, 0.2, 5)
    convex = rank_one_probe(np.eye(2), a, n, ts, lambda M: float(np.sum(M**2)))
    assert np.allclose(convex.defects, 0.1**2)
    assert convex.passed()
    concave = rank_one_probe(np.eye(2), a, n, ts, lambda M: (-float(np.sum(M**2)), 1e-4))
    assert not concave.passed()
    assert np.allclose(concave.defect_stderr, 1e-4 * np.sqrt(1.5))
    with pytest.raises(ValueError):
        rank_one_probe(np.eye(2), a, n, [0.0, 0.1, 0.3], lambda M: 0.0)


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5), st.floats(0.01, 1.0))
def test_rank_one_defect_of_quadratic_is_curvature(a, b, c, h):
    ts = np.arange(5) * h
    vals = a * ts**2 + b * ts + c
    rep = rank_one_report(ts, vals, np.zeros(5))
    assert np.allclose(rep.defects, a * h * h, atol=1e-9 * (1 + abs(a) + abs(b) + abs(c)))


def test_growth_sandwich_recovers_bounds():
    s = np.arange(1.0, 7.0)
    c, C, ok = growth_sandwich(s, 0.5 * s**10 + 1.0, 10)
    assert ok and c > 0
    assert np.all(0.5 * s**10 + 1.0 <= C * (1 + s**10) * (1 + 1e-12))
    _, _, bad = growth_sandwich(s, -s**10, 10)
    assert not bad


@settings(max_examples=50)
@given(arrays(float, (4, 2), elements=st.floats(-20, 20)))
def test_soft_map_round_trip(V):
    m = _SoftMap(np.arange(4), 1 - 1e-6)
    W = m.forward(V)
    assert np.all(np.linalg.norm(W, axis=1) < 1)
    keep = np.linalg.norm(V, axis=1) < 5
    assert np.allclose(m.inverse(W[keep]), V[keep], atol=1e-6)


@settings(max_examples=30)
@given(arrays(float, (3, 2), elements=st.floats(-3, 3)), arrays(float, (3, 2), elements=st.floats(-1, 1)))
def test_soft_map_backward_is_chain_rule(V, G):
    m = _SoftMap(np.arange(3), 1 - 1e-6)
    h = 1e-6
    num = np.zeros_like(V)
    for i in range(3):
        for j in range(2):
            E = np.zeros_like(V)
            E[i, j] = h
            num[i, j] = (np.sum(G * m.forward(V + E)) - np.sum(G * m.forward(V - E))) / (2 * h)
    assert np.allclose(m.backward(V, G), num, atol=1e-6)


def test_volumetric_term_changes_minimum(kg):
    G, D, eps = kg.args
    plain = minimize_cell(CellProblem(G, D, eps, kg.pair, None, Lambda=LAM, band=kg.band), n_restarts=1)
    heavy = minimize_cell(CellProblem(G, D, eps, kg.pair, VolumetricPotential(weight=5.0), Lambda=LAM,
                                      band=kg.band), n_restarts=1)
    assert heavy.energy > plain.energy
