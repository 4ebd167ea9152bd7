import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import mu_c_direct
from quiver_adhm.adhm import (
    GaugeElement,
    SolverError,
    SolverOptions,
    apply_star,
    complex_moment_map,
    dualize_t,
    expected_dimension,
    gauge_act,
    is_regular,
    moduli_equal,
    path_invariants,
    random_adhm,
    random_unitary_gauge,
    real_moment_map,
    residual,
    residual_jacobian,
    residual_vector,
    solve,
    stabilizer_dimension,
    star_arrow_signs,
    tangent_dimension,
    zero_adhm,
)
from quiver_adhm.diagram import build_affine_diagram, diagram_involution
from quiver_adhm.weyl import Parameter, random_on_level, star_param

SMALL = [("A", 1), ("A", 2), ("A", 3), ("D", 4), ("D", 5), ("E", 6)]


def _dims(d, rng, hi=2):
    return tuple(rng.integers(0, hi + 1, d.n_vertices)), tuple(rng.integers(0, hi + 1, d.n_vertices))


@st.composite
def random_data(draw, types=SMALL):
    d = build_affine_diagram(*draw(st.sampled_from(types)))
    n = d.n_vertices
    v = draw(st.lists(st.integers(0, 2), min_size=n, max_size=n))
    w = draw(st.lists(st.integers(0, 2), min_size=n, max_size=n))
    return random_adhm(d, v, w, draw(st.integers(0, 2**32 - 1)))


def test_random_adhm_contract(a1):
    x = random_adhm(a1, (1, 2), (1, 0), 7)
    y = random_adhm(a1, (1, 2), (1, 0), 7)
    z = random_adhm(a1, (1, 2), (1, 0), 8)
    assert np.array_equal(x.to_vector(), y.to_vector())
    assert not np.array_equal(x.to_vector(), z.to_vector())
    e = random_adhm(a1, (0, 0), (1, 0), 7)
    assert all(m.size == 0 for m in e.B) and e.a[0].shape == (0, 1) and e.b[0].shape == (1, 0)


def test_unit_variance():
    d = build_affine_diagram("A", 3)
    z = random_adhm(d, (4, 4, 4, 4), (4, 4, 4, 4), 0).to_vector()
    assert np.mean(np.abs(z) ** 2) == pytest.approx(1.0, abs=0.08)


@given(random_data())
def test_moment_maps_match_oracle(x):
    for got, want in zip(complex_moment_map(x), mu_c_direct(x)):
        assert np.allclose(got, want, atol=1e-12)


@given(random_data())
def test_trace_identities(x):
    d = x.diagram
    mc, mr = complex_moment_map(x), real_moment_map(x)
    scale = max(1.0, x.norm() ** 2)
    tr_b = sum(np.trace(mc[i] - x.a[i] @ x.b[i]) for i in d.vertices)
    assert abs(tr_b) <= 1e-12 * scale
    for m in mr:
        assert np.abs(m - m.conj().T).max(initial=0) <= 1e-14 * scale
    lhs = sum(np.trace(m).real for m in mr)
    rhs = 0.5 * sum(np.linalg.norm(x.a[i]) ** 2 - np.linalg.norm(x.b[i]) ** 2 for i in d.vertices)
    assert lhs == pytest.approx(rhs, abs=1e-12 * scale)


def test_moment_map_hand_example(a1):
    x = zero_adhm(a1, (1, 1), (1, 0))
    B = list(x.B)
    B[0] = np.array([[2.0 + 1j]])  # x on h1: 0 -> 1
    B[2] = np.array([[3.0 - 1j]])  # p on its reverse
    x = type(x)(a1, x.v, x.w, tuple(B), x.a, x.b)
    xp, px = complex(B[0][0, 0] * B[2][0, 0]), complex(B[2][0, 0] * B[0][0, 0])
    mc = complex_moment_map(x)
    # vertex 1 receives h1 with eps=+1; vertex 0 receives hbar1 with eps=-1
    assert mc[1][0, 0] == pytest.approx(xp)
    assert mc[0][0, 0] == pytest.approx(-px)


def test_zero_data_moment_and_residual(a1):
    x = zero_adhm(a1, (1, 1), (1, 0))
    assert all(not np.any(m) for m in complex_moment_map(x) + real_moment_map(x))
    assert residual(x, Parameter.zero(2)) == 0
    assert residual(x, Parameter([0, 0], [1j, -1j])) == pytest.approx(np.sqrt(2), abs=1e-15)


@given(random_data(), st.integers(0, 2**32 - 1))
def test_residual_unitary_invariance(x, seed):
    rng = np.random.default_rng(seed)
    z = random_on_level(x.diagram, rng)
    g = random_unitary_gauge(x.v, rng)
    r0 = residual(x, z)
    assert residual(gauge_act(g, x), z) == pytest.approx(r0, rel=1e-10, abs=1e-10)


@given(random_data(), st.integers(0, 2**32 - 1))
def test_gauge_action_law(x, seed):
    rng = np.random.default_rng(seed)
    ident = GaugeElement.identity(x.v)
    assert np.array_equal(gauge_act(ident, x).to_vector(), x.to_vector())
    g, h = random_unitary_gauge(x.v, rng), random_unitary_gauge(x.v, rng)
    lhs = gauge_act(g @ h, x).to_vector()
    rhs = gauge_act(g, gauge_act(h, x)).to_vector()
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_singular_gauge_rejected():
    with pytest.raises(ValueError):
        GaugeElement((np.zeros((2, 2)),))
    with pytest.raises(ValueError):
        GaugeElement((2 * np.eye(2),), unitary=True)


@given(random_data(), st.integers(0, 2**32 - 1))
def test_jacobian_finite_difference(x, seed):
    if x.size == 0:
        return
    rng = np.random.default_rng(seed)
    z = random_on_level(x.diagram, rng)
    jac = residual_jacobian(x)
    dz = rng.standard_normal(x.size) + 1j * rng.standard_normal(x.size)
    h = 1e-6
    fd = (residual_vector(x.with_vector(x.to_vector() + h * dz), z)
          - residual_vector(x.with_vector(x.to_vector() - h * dz), z)) / (2 * h)
    lin = jac @ np.concatenate([dz.real, dz.imag])
    assert np.allclose(fd, lin, atol=1e-6 * max(1.0, x.norm()))


# dualize_t ----------------------------------------------------------------

@given(random_data())
def test_dualize_twice_is_negation(x):
    # eps(h) eps(hbar) = -1 makes the square of t equal -1, exactly
    assert np.array_equal(dualize_t(dualize_t(x)).to_vector(), (-x).to_vector())


@given(random_data())
def test_dualize_moment_maps(x):
    y = dualize_t(x)
    scale = max(1.0, x.norm() ** 2)
    for p, q in zip(complex_moment_map(y), complex_moment_map(x)):
        assert np.abs(p + q.T).max(initial=0) <= 1e-12 * scale
    for p, q in zip(real_moment_map(y), real_moment_map(x)):
        assert np.abs(p + q.T).max(initial=0) <= 1e-12 * scale


@given(random_data(), st.integers(0, 2**32 - 1))
def test_dualize_residual(x, seed):
    z = random_on_level(x.diagram, np.random.default_rng(seed))
    y, mz = dualize_t(x, z)
    assert np.array_equal(mz.re, -z.re)
    assert residual(y, mz) == pytest.approx(residual(x, z), rel=1e-10, abs=1e-10)


# apply_star ---------------------------------------------------------------

def test_star_identity_involution(d4, rng):
    x = random_adhm(d4, (1, 2, 1, 0, 1), (1, 0, 1, 0, 0), 3)
    y = apply_star(x, diagram_involution(d4))
    assert np.array_equal(y.to_vector(), x.to_vector())


@given(random_data(), st.integers(0, 2**32 - 1))
def test_star_residual(x, seed):
    inv = diagram_involution(x.diagram)
    z = random_on_level(x.diagram, np.random.default_rng(seed))
    y = apply_star(x, inv)
    assert y.v == tuple(x.v[i] for i in inv.star)
    assert residual(y, star_param(z, inv)) == pytest.approx(residual(x, z), rel=1e-10, abs=1e-10)


def test_star_twice_on_a3():
    d = build_affine_diagram("A", 3)
    inv = diagram_involution(d)
    x = random_adhm(d, (1, 2, 1, 2), (1, 1, 0, 1), 5)
    y = apply_star(apply_star(x, inv), inv)
    s = star_arrow_signs(d, inv)
    assert y.v == x.v
    # arrows come back up to the product of signs along the orbit
    for h, (p, q) in enumerate(zip(y.B, x.B)):
        assert np.allclose(p, q) or np.allclose(p, -q)
    assert all(np.array_equal(p, q) for p, q in zip(y.a, x.a))
    # forms with phi_{i*}^T = phi_i give the framing back too
    phi = [np.eye(x.w[inv(i)], x.w[i]) for i in d.vertices]
    y = apply_star(apply_star(x, inv, phi), inv, phi)
    assert all(np.allclose(p, q) for p, q in zip(y.b, x.b))
    assert s


def test_star_rejects_bad_forms(a2):
    x = random_adhm(a2, (1, 1, 1), (1, 1, 1), 0)
    with pytest.raises(ValueError):
        apply_star(x, diagram_involution(a2), [np.eye(2)] * 3)


# path invariants and comparison --------------------------------------------

@given(random_data(), st.integers(0, 2**32 - 1))
def test_path_invariants_gauge_invariant(x, seed):
    g = random_unitary_gauge(x.v, np.random.default_rng(seed))
    p, q = path_invariants(x), path_invariants(gauge_act(g, x))
    for s, t in zip(p, q):
        assert np.linalg.norm(s.value - t.value) <= 1e-8 * max(1.0, np.linalg.norm(s.value))


def test_path_invariants_contents(a1):
    x = random_adhm(a1, (1, 1), (1, 1), 0)
    ps = path_invariants(x, 1)
    empty = [p for p in ps if p.path == ()]
    assert {(p.source, p.target) for p in empty} == {(0, 0), (1, 1)}
    for p in empty:
        assert np.array_equal(p.value, x.b[p.source] @ x.a[p.source])
    assert all(not np.any(p.value) for p in path_invariants(zero_adhm(a1, (1, 1), (1, 1))))
    with pytest.raises(ValueError):
        path_invariants(x, 0)


def test_moduli_equal_examples(a2, rng):
    z = random_on_level(a2, rng, real=False)
    x = solve(a2, (1, 1, 1), (2, 0, 0), z, 1)
    assert moduli_equal(x, x)
    assert moduli_equal(x, gauge_act(random_unitary_gauge(x.v, rng), x), 1e-6)
    y = solve(a2, (1, 1, 1), (2, 0, 0), z, 2)
    assert not moduli_equal(x, y, 1e-6)


# solver, stabilizer, tangent -------------------------------------------------

def test_stabilizer_examples(a1, d4):
    assert stabilizer_dimension(zero_adhm(d4, (1, 0, 0, 0, 0), (0,) * 5)) == 1
    assert stabilizer_dimension(zero_adhm(a1, (0, 0), (1, 0))) == 0
    x = random_adhm(a1, (1, 1), (1, 0), 0)
    assert stabilizer_dimension(x) == 0


def test_solve_empty(a1):
    x = solve(a1, (0, 0), (1, 0), Parameter([0, 0], [1j, -1j]), 0)
    assert x.size == 0 and tangent_dimension(x, Parameter.zero(2)) == 0


def test_solve_rejects_off_level(a1):
    with pytest.raises(ValueError):
        solve(a1, (1, 1), (1, 0), Parameter([1, 0], [0, 0]), 0)


def test_solve_failure_is_reported(a1):
    # with v_1 = 0 and no framing every map vanishes, so mu_C = 0 can never reach zeta_C,0 = 1
    z = Parameter([0.0, 0.0], [1.0, -1.0])
    with pytest.raises(SolverError) as info:
        solve(a1, (1, 0), (0, 0), z, 0, SolverOptions(max_iters=50))
    assert info.value.best_residual > 1e-3


def test_delta_lambda0_has_no_regular_points(a1, rng):
    # a_0 b_0 = zeta_C . delta = 0 and |a_0|^2 - |b_0|^2 = 2 zeta_R . delta = 0 force a = b = 0
    for seed in range(5):
        z = random_on_level(a1, rng, real=False)
        x = solve(a1, (1, 1), (1, 0), z, seed)
        assert residual(x, z) <= 1e-10
        assert max(abs(x.a[0][0, 0]), abs(x.b[0][0, 0])) <= 1e-5
        assert not is_regular(x, z)


REGULAR_CASES = [
    ("A", 1, (1, 1), (2, 0)),
    ("A", 1, (0, 1), (0, 2)),
    ("A", 1, (1, 1), (1, 1)),
    ("A", 2, (1, 1, 1), (2, 0, 0)),
    ("A", 2, (1, 1, 0), (1, 1, 0)),
    ("D", 4, (1, 1, 2, 1, 1), (2, 0, 0, 0, 0)),
    ("D", 4, (0, 0, 1, 0, 0), (0, 0, 2, 0, 0)),
]


@pytest.mark.parametrize("kind,rank,v,w", REGULAR_CASES)
def test_tangent_dimension_at_regular_points(kind, rank, v, w):
    d = build_affine_diagram(kind, rank)
    rng = np.random.default_rng(rank)
    z = random_on_level(d, rng, real=False)
    x = solve(d, v, w, z, 0)
    assert residual(x, z) <= 1e-10
    assert is_regular(x, z)
    assert tangent_dimension(x, z) == expected_dimension(v, w, d)


def test_tangent_requires_solution(a1):
    with pytest.raises(ValueError):
        tangent_dimension(random_adhm(a1, (1, 1), (1, 0), 0), Parameter.zero(2))


def test_two_stage_strategy(a2, rng):
    z = random_on_level(a2, rng)
    x = solve(a2, (1, 1, 1), (2, 0, 0), z, 4, SolverOptions(strategy="two_stage"))
    assert residual(x, z) <= 1e-10


def test_solver_deterministic(a2, rng):
    z = random_on_level(a2, rng)
    x = solve(a2, (1, 1, 1), (2, 0, 0), z, 9)
    y = solve(a2, (1, 1, 1), (2, 0, 0), z, 9)
    assert np.array_equal(x.to_vector(), y.to_vector())


def test_kempf_ness_matrix_free_matches_dense(monkeypatch, a2, rng):
    from quiver_adhm import adhm

    z = random_on_level(a2, rng)
    x = random_adhm(a2, (2, 3, 2), (2, 1, 0), 6)
    dense = adhm.kempf_ness(x, z.re)
    monkeypatch.setattr(adhm, "_DENSE_KN", 0)
    free = adhm.kempf_ness(x, z.re)
    zr = Parameter(z.re, np.zeros(3))
    assert residual(free, zr, "R") <= 1e-12
    # complexified gauge moves mu_C only by conjugation, so its spectrum is kept
    assert np.allclose(np.sort_complex(np.linalg.eigvals(complex_moment_map(free)[1])),
                       np.sort_complex(np.linalg.eigvals(complex_moment_map(x)[1])))
    assert moduli_equal(dense, free, 1e-8)
