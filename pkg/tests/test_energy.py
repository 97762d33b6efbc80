import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import brute_force_volumetric, exact_kuhn_grun_mp, p10_fraction, solve_fractions, to_fraction

from polyhom.energy import (
    CLAMPED,
    SOFT,
    Deformation,
    Hamiltonian,
    PairPotential,
    VolumetricPotential,
    discrete_norms,
    growth_check,
    hamiltonian,
    hamiltonian_gradient,
    inverse_langevin,
    kuhn_grun,
    kuhn_grun_derivative,
    langevin,
    load_deformation,
    pair_energy,
    save_deformation,
)
from polyhom.exceptions import (
    DegenerateEdge,
    DimensionMismatch,
    MissingVertexValue,
    NonDifferentiablePotential,
    OutOfRange,
    SandwichViolated,
)
from polyhom.graph import ExtendedGraph, GraphParams, generate_graph, interior_voronoi_cells, lattice_fixture

BOX = [[2.0, 2.0], [26.0, 26.0]]


# ---------------------------------------------------------------- Langevin

def test_inverse_langevin_examples():
    assert inverse_langevin(0.0) == 0.0
    x = 1 / math.tanh(3) - 1 / 3
    assert abs(inverse_langevin(x) - 3) <= 1e-9
    th = inverse_langevin(0.999)
    assert np.isfinite(th) and th > 100
    with pytest.raises(OutOfRange):
        inverse_langevin(1.0)
    with pytest.raises(OutOfRange):
        inverse_langevin([0.2, -1.5])


@settings(max_examples=200, deadline=None)
@given(st.floats(-0.99999, 0.99999))
def test_inverse_langevin_residual_and_oddness(x):
    th = inverse_langevin(x)
    assert abs(langevin(th) - x) <= 1e-12
    assert inverse_langevin(-x) == -th


def test_inverse_langevin_small_argument():
    x = np.array([1e-8, 1e-5, 1e-3])
    np.testing.assert_allclose(inverse_langevin(x) / x, 3.0, rtol=1e-5)


def test_inverse_langevin_vectorized():
    x = np.linspace(-0.99, 0.99, 1001).reshape(7, 143)
    th = inverse_langevin(x)
    assert th.shape == x.shape
    assert np.abs(langevin(th.ravel()) - x.ravel()).max() <= 1e-12


# ---------------------------------------------------------------- Kuhn-Grün

def test_kuhn_grun_zero():
    assert kuhn_grun(0.0) == 0.0
    assert kuhn_grun(0.0, "exact") == 0.0


def test_p10_coefficients_readback():
    # evaluate in extended precision and solve the Vandermonde system exactly
    t = np.arange(1, 6, dtype=np.longdouble) / 10
    f = kuhn_grun(t, "p10")
    assert f.dtype == np.longdouble
    tq = [to_fraction(x) for x in t]
    A = [[x ** (2 * k) for k in range(1, 6)] for x in tq]
    c = solve_fractions(A, [to_fraction(v) for v in f])
    expected = [Fraction(3, 2), Fraction(9, 20), Fraction(9, 350), Fraction(81, 7000), Fraction(243, 673750)]
    for got, want in zip(c, expected):
        assert abs(float(got - want)) <= 1e-12


def test_kuhn_grun_modes_at_03():
    ref = exact_kuhn_grun_mp(0.3)
    assert kuhn_grun(0.3, "exact") == pytest.approx(float(ref), rel=1e-13)
    assert kuhn_grun(0.3, "p10") == pytest.approx(float(p10_fraction(Fraction(3, 10))), rel=1e-15)
    gap = kuhn_grun(0.3, "exact") - kuhn_grun(0.3, "p10")
    assert gap == pytest.approx(float(ref - p10_fraction(Fraction(3, 10))), rel=1e-9)


@pytest.mark.parametrize("t", [1e-4, 0.05, 0.5, 0.9, 0.99])
def test_kuhn_grun_exact_against_high_precision(t):
    assert kuhn_grun(t, "exact") == pytest.approx(float(exact_kuhn_grun_mp(t)), rel=1e-12)


def test_kuhn_grun_exact_out_of_range():
    with pytest.raises(OutOfRange):
        kuhn_grun(1.0, "exact")


@pytest.mark.parametrize("mode", ["p10", "exact"])
def test_kuhn_grun_convex_increasing(mode):
    t = np.linspace(0, 0.98, 500)
    f = kuhn_grun(t, mode)
    assert np.all(f >= 0)
    assert np.all(np.diff(f) > 0)
    assert np.all(np.diff(f, 2) > -1e-14)


@pytest.mark.parametrize("mode", ["p10", "exact"])
def test_kuhn_grun_derivative(mode):
    t = np.linspace(0.01, 0.9, 50)
    h = 1e-6
    fd = (kuhn_grun(t + h, mode) - kuhn_grun(t - h, mode)) / (2 * h)
    np.testing.assert_allclose(kuhn_grun_derivative(t, mode), fd, rtol=1e-7)


# ---------------------------------------------------------------- pair energy

def test_pair_energy_examples():
    quad = PairPotential(kind="quadratic")
    assert pair_energy(quad, [0, 0], [1, 0], [1, 0]) == 1.0
    kg = PairPotential(kind="kuhn-grun-p10", n_mean=100, monomer_length=0.1)
    assert pair_energy(kg, [0, 0], [1, 0], [0, 0]) == 0.0
    # N_xy = N° = 100 on an edge of length sqrt(N°) ℓ = 1, |ξ|/|x-y| = 1
    got = pair_energy(kg, [0, 0], [1, 0], [0.6, 0.8])
    assert got == pytest.approx(float(p10_fraction(Fraction(1, 10))), rel=1e-14)


def test_pair_energy_scaling_with_edge_length():
    kg = PairPotential(n_mean=100, monomer_length=0.1)
    # edge of length 2: N_xy = 400, argument λ / sqrt(N_xy) with λ = |ξ| / 2
    got = pair_energy(kg, [0, 0], [2, 0], [3.0, 0.0])
    assert got == pytest.approx(4.0 * float(p10_fraction(Fraction(3, 2) / 20)), rel=1e-14)


def test_pair_degenerate_edge():
    with pytest.raises(DegenerateEdge):
        pair_energy(PairPotential(), [1, 1], [1, 1], [0.1, 0])


def test_pair_multipliers_and_matrix_forms():
    z = np.array([[1.0, 0.0], [0.0, 1.0]])
    xi = np.array([[1.0, 2.0], [0.5, -1.0]])
    A = np.array([[2.0, 0.5], [0.5, 1.0]])
    per_edge = np.stack([A, 3 * A])
    e1 = PairPotential(kind="quadratic", matrix=A).energy(z, xi)
    e2 = PairPotential(kind="quadratic", matrix=per_edge).energy(z, xi)
    e3 = PairPotential(kind="quadratic", matrix=lambda zz: A * (1 + 2 * zz[1])).energy(z, xi)
    e4 = PairPotential(kind="quadratic", matrix=A, edge_multipliers=np.array([1.0, 3.0])).energy(z, xi)
    np.testing.assert_allclose(e2, e1 * [1, 3])
    np.testing.assert_allclose(e3, e1 * [1, 3])
    np.testing.assert_allclose(e4, e1 * [1, 3])


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 2 * math.pi), st.floats(0.01, 5.0), st.floats(0.5, 3.0))
def test_pair_frame_indifference(angle, r, length):
    kg = PairPotential()
    Q = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    xi = np.array([r, 0.3 * r])
    a = pair_energy(kg, [0, 0], [length, 0], xi)
    b = pair_energy(kg, [0, 0], [length, 0], Q @ xi)
    assert a == pytest.approx(b, rel=1e-12)


def test_polynomial_not_differentiable():
    pot = PairPotential(kind="polynomial", coefficients=[(1, 1.0)])
    with pytest.raises(NonDifferentiablePotential):
        pot.gradient(np.array([[1.0, 0.0]]), np.array([[0.0, 0.0]]))


# ---------------------------------------------------------------- Hamiltonian

def _two_vertex_graph():
    pos = np.array([[0.5, 0.5], [1.5, 0.5]])
    return ExtendedGraph(pos, [True, True], [[0, 1]], np.zeros((0, 3), int), [[0, 0], [2, 1]], fixture_only=True)


def test_single_edge_identity():
    G = _two_vertex_graph()
    u = Deformation.affine(G, [[0, 0], [2, 1]], 1.0, np.eye(2), band=0.0)
    assert hamiltonian(G, [[0, 0], [2, 1]], 1.0, u, PairPotential(kind="quadratic")) == 1.0


@pytest.fixture(scope="module")
def graph():
    return generate_graph(GraphParams(seed=1), [[0.0, 0.0], [28.0, 28.0]])


def test_affine_cell_determinants(graph):
    L = np.array([[1.3, 0.2], [-0.1, 0.8]])
    vol = VolumetricPotential(weight=0.7)
    H = Hamiltonian(graph, BOX, 1.0, PairPotential(), vol)
    U = H.values_from(Deformation.affine(graph, BOX, 1.0, L))
    np.testing.assert_allclose(H.cell_dets(U), np.linalg.det(L), rtol=1e-12)
    _, e_vol = H.terms(U)
    assert e_vol == pytest.approx(float(vol(np.linalg.det(L))) * H.cell_volumes.sum(), rel=1e-12)
    assert len(H.cells) > 300


def test_volumetric_against_brute_force(graph):
    vol = VolumetricPotential(weight=1.0)
    box = [[8.0, 8.0], [18.0, 18.0]]
    H = Hamiltonian(graph, box, 1.0, PairPotential(), vol)
    U = H.values_from(Deformation.affine(graph, box, 1.0, np.eye(2)))
    assert H.terms(U)[1] == pytest.approx(0.0, abs=1e-20)
    k = H.n_vertices // 2
    U[k] += 0.01
    by_vertex = {int(v): U[i] for i, v in enumerate(H.vertices)}
    ref = brute_force_volumetric(graph, interior_voronoi_cells(graph, box), by_vertex, vol)
    assert H.terms(U)[1] == pytest.approx(ref, rel=1e-10)
    assert ref > 0


def test_chain_gradient_by_hand():
    pos = np.array([[0.5], [1.5], [2.5]])
    G = ExtendedGraph(pos, [True] * 3, [[0, 1], [1, 2]], np.zeros((0, 2), int), [[0], [3]], fixture_only=True)
    lam = 0.7
    u = Deformation.affine(G, [[0], [3]], 1.0, [[lam]], band=0.6)
    assert list(u.roles) == [CLAMPED, 0, CLAMPED]
    pot = PairPotential(kind="quadratic")
    for u1 in (0.3, 1.05, 2.0):
        v = u.copy()
        v.values[1] = u1
        g = hamiltonian_gradient(G, [[0], [3]], 1.0, v, pot)
        u0, u2 = v.values[0, 0], v.values[2, 0]
        assert g.shape == (1, 1)
        assert g[0, 0] == pytest.approx(2 * (u1 - u0) + 2 * (u1 - u2))
    v = u.copy()
    assert abs(hamiltonian_gradient(G, [[0], [3]], 1.0, v, pot)[0, 0]) < 1e-14


def _fd_gradient(H, U, h=1e-5):
    g = np.zeros_like(U)
    for i in range(U.shape[0]):
        for c in range(U.shape[1]):
            Up, Um = U.copy(), U.copy()
            Up[i, c] += h
            Um[i, c] -= h
            g[i, c] = (H.energy(Up) - H.energy(Um)) / (2 * h)
    return g


@pytest.mark.parametrize("seed", range(50))
def test_gradient_matches_finite_differences(seed):
    G = generate_graph(GraphParams(seed=seed), [[0, 0], [11, 11]], strict=False)
    box = [[1.0, 1.0], [10.0, 10.0]]
    H = Hamiltonian(G, box, 1.0, PairPotential(n_mean=4, monomer_length=0.5), VolumetricPotential(weight=2.0))
    rng = np.random.default_rng(seed)
    L = np.eye(2) + 0.3 * rng.standard_normal((2, 2))
    U = H.values_from(Deformation.affine(G, box, 1.0, L)) + 0.2 * rng.standard_normal((H.n_vertices, 2))
    g = H.gradient(U)
    fd = _fd_gradient(H, U)
    err = np.abs(g - fd) / np.maximum(np.abs(fd), 1e-3 * np.abs(fd).max())
    assert err.max() <= 1e-6


def test_gradient_vanishes_at_critical_affine_state():
    G = lattice_fixture(14)
    box = [[0.0, 0.0], [14.0, 14.0]]
    L = np.array([[1.2, 0.3], [0.1, (1 + 0.03) / 1.2]])
    assert np.linalg.det(L) == pytest.approx(1.0)
    H = Hamiltonian(G, box, 1.0, PairPotential(), VolumetricPotential())
    U = H.values_from(Deformation.affine(G, box, 1.0, L))
    g = H.gradient(U)
    x = G.positions[H.vertices]
    interior = np.all((x >= 3) & (x <= 10), axis=1)
    assert np.abs(g[interior]).max() <= 1e-10


def test_missing_values_and_dimension(graph):
    H = Hamiltonian(graph, BOX, 1.0, PairPotential(), VolumetricPotential())
    with pytest.raises(MissingVertexValue):
        H.energy(np.zeros((H.n_vertices - 1, 2)))
    with pytest.raises(DimensionMismatch):
        H.energy(np.zeros((H.n_vertices, 3)))
    u = Deformation.affine(graph, [[3, 3], [20, 20]], 1.0, np.eye(2))
    with pytest.raises(MissingVertexValue):
        hamiltonian(graph, BOX, 1.0, u, PairPotential())


def test_translation_invariance_exact(graph):
    H = Hamiltonian(graph, BOX, 1.0, PairPotential(), VolumetricPotential())
    rng = np.random.default_rng(3)
    # dyadic values keep every increment exact
    U = np.round(H.values_from(Deformation.affine(graph, BOX, 1.0, np.eye(2))) * 1024) / 1024
    U += rng.integers(-8, 8, U.shape) / 64
    assert H.energy(U + np.array([5.0, -3.0])) == H.energy(U)


@settings(max_examples=20, deadline=None)
@given(st.floats(0, 2 * math.pi), st.floats(-5, 5), st.floats(-5, 5))
def test_frame_indifference_hamiltonian(graph, angle, c1, c2):
    H = Hamiltonian(graph, [[6, 6], [20, 20]], 1.0, PairPotential(), VolumetricPotential())
    rng = np.random.default_rng(11)
    U = H.values_from(Deformation.affine(graph, [[6, 6], [20, 20]], 1.0, np.eye(2) * 1.1))
    U = U + 0.1 * rng.standard_normal(U.shape)
    Q = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    assert H.energy(U @ Q.T + [c1, c2]) == pytest.approx(H.energy(U), rel=1e-10)


def test_monotonicity_in_domain(graph):
    rng = np.random.default_rng(5)
    U = graph.positions * 1.1 + 0.1 * rng.standard_normal(graph.positions.shape)
    pair, vol = PairPotential(), VolumetricPotential()
    big = Hamiltonian(graph, BOX, 1.0, pair, vol)
    small = Hamiltonian(graph, [[6, 4], [20, 22]], 1.0, pair, vol)
    assert small.energy(U[small.vertices]) <= big.energy(U[big.vertices])


def test_energy_nonnegative_and_scale(graph):
    pair = PairPotential(scale=100.0)
    H1 = Hamiltonian(graph, BOX, 1.0, PairPotential(), None)
    H2 = Hamiltonian(graph, BOX, 1.0, pair, None)
    U = graph.positions[H1.vertices] * 1.3
    assert H2.energy(U) == pytest.approx(100 * H1.energy(U))
    assert H1.energy(U) > 0


def test_eps_scaling_of_domain(graph):
    a = Hamiltonian(graph, BOX, 1.0, PairPotential(), VolumetricPotential())
    b = Hamiltonian(graph, np.array(BOX) / 4, 0.25, PairPotential(), VolumetricPotential())
    assert np.array_equal(a.vertices, b.vertices)
    assert np.array_equal(a.cells, b.cells)


# ---------------------------------------------------------------- norms

def test_discrete_norms():
    G = lattice_fixture(6)
    region = [[0, 0], [6, 6]]
    vn, en = discrete_norms(G, np.full((G.n_vertices, 2), 3.0), 2, region)
    assert en == 0.0 and vn == pytest.approx(math.sqrt(36 * 18))
    G2 = _two_vertex_graph()
    assert discrete_norms(G2, np.array([[0.0, 0.0], [2.0, 0.0]]), 2, [[0, 0], [2, 1]])[1] == 2.0
    L = np.array([[1.0, 0.5], [-0.2, 2.0]])
    u = G.positions @ L.T
    p = 3.0
    _, en = discrete_norms(G, u, p, region)
    ref = sum(np.linalg.norm(L @ (G.positions[i] - G.positions[j])) ** p for i, j in G.edges)
    assert en**p == pytest.approx(ref, rel=1e-12)


# ---------------------------------------------------------------- growth

def test_growth_kuhn_grun_p10():
    rep = growth_check(PairPotential(n_mean=100), VolumetricPotential())
    assert rep.passed and rep.consistent
    assert 3 / 200 / 4 <= rep.C2 <= 4 * 3 / 200
    assert rep.C2 <= rep.C2_upper and rep.Cp <= rep.Cp_upper
    assert rep.exponent_large == pytest.approx(10, abs=0.05)


def test_growth_quadratic_only_p2():
    rep = growth_check(PairPotential(kind="quadratic"))
    assert rep.p == 2 and rep.Cp == 0 and rep.Cp_upper == 0
    assert rep.C2 == pytest.approx(1) and rep.C2_upper == pytest.approx(1)


def test_growth_sublinear_rejected():
    with pytest.raises(SandwichViolated) as info:
        growth_check(PairPotential(kind="polynomial", coefficients=[(1, 1.0)]))
    assert "lower" in str(info.value)
    assert info.value.report is not None


def test_growth_exact_mode_rejected():
    with pytest.raises(SandwichViolated):
        growth_check(PairPotential(kind="kuhn-grun-exact"))


def test_growth_volumetric_exponent():
    with pytest.raises(SandwichViolated):
        growth_check(PairPotential(kind="quadratic"), VolumetricPotential(p=2, d=2))
    rep = growth_check(PairPotential(kind="quadratic"), VolumetricPotential(p=10, d=2))
    assert rep.W_exponent <= 5.25


@settings(max_examples=100, deadline=None)
@given(st.floats(-50, 50))
def test_volumetric_well(t):
    W = VolumetricPotential(weight=1.0, p=10, d=2)
    assert W(t) >= 0
    assert W(1.0) == 0
    assert W(t) <= 2 * (1 + abs(t) ** 5) + 2


# ---------------------------------------------------------------- deformations

def test_deformation_roles_and_snapshot(tmp_path, graph):
    u = Deformation.affine(graph, BOX, 1.0, np.eye(2) * 1.05, mode="soft")
    assert np.any(u.roles == SOFT) and u.is_admissible()
    v = u.copy()
    v.values[u.roles == SOFT] += 0.5
    assert v.is_admissible()
    v.values[u.roles == SOFT] += 0.6
    assert not v.is_admissible()
    path = tmp_path / "u.bin"
    save_deformation(path, u, meta={"eps": 1.0})
    w, meta = load_deformation(path)
    assert meta == {"eps": 1.0}
    assert np.array_equal(w.values, u.values) and np.array_equal(w.roles, u.roles)
    assert np.array_equal(w.vertices, u.vertices) and np.array_equal(w.reference, u.reference)


def test_clamped_band_default_is_C0(graph):
    u = Deformation.affine(graph, BOX, 1.0, np.eye(2))
    x = graph.positions[u.vertices]
    d = np.minimum(x - 2, 26 - x).min(axis=1)
    assert np.array_equal(u.roles == CLAMPED, d <= 7.0)
