import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import ALL_TYPES, brute_cyclic_adjacency, minus_w0_permutation, primitive_kernel
from quiver_adhm.diagram import (
    DiagramError,
    FormType,
    arrow_involution,
    build_affine_diagram,
    choose_orientation,
    diagram_involution,
    form_type_assignment,
    mckay_adjacency_cyclic,
)

# i* tables for the finite vertices 1..l
EXPECTED_STAR = {
    **{("A", n): [n - i + 1 for i in range(1, n + 1)] for n in range(1, 9)},
    ("D", 4): [1, 2, 3, 4],
    ("D", 5): [1, 2, 3, 5, 4],
    ("D", 6): [1, 2, 3, 4, 5, 6],
    ("D", 7): [1, 2, 3, 4, 5, 7, 6],
    ("D", 8): [1, 2, 3, 4, 5, 6, 7, 8],
    ("E", 6): [5, 4, 3, 2, 1, 6],
    ("E", 7): list(range(1, 8)),
    ("E", 8): list(range(1, 9)),
}


@pytest.mark.parametrize("kind,rank", ALL_TYPES)
def test_marks_are_primitive_kernel(kind, rank):
    d = build_affine_diagram(kind, rank)
    assert list(d.marks) == primitive_kernel(d.cartan)
    assert not np.any(d.cartan @ d.delta)
    assert d.marks[0] == 1


@pytest.mark.parametrize("kind,rank", ALL_TYPES)
def test_vertex_and_edge_counts(kind, rank):
    d = build_affine_diagram(kind, rank)
    assert d.n_vertices == rank + 1
    assert np.array_equal(d.adjacency, d.adjacency.T)
    # affine diagrams of rank l have l+1 edges for type A (a cycle), l otherwise
    assert d.n_omega == (rank + 1 if kind == "A" and rank > 1 else 2 if rank == 1 else rank)


def test_small_tables():
    a1 = build_affine_diagram("A", 1)
    assert a1.adjacency.tolist() == [[0, 2], [2, 0]]
    assert a1.marks == (1, 1)
    d4 = build_affine_diagram("D", 4)
    assert d4.marks == (1, 1, 2, 1, 1)
    assert d4.neighbors(2) == [0, 1, 3, 4]
    e8 = build_affine_diagram("E", 8)
    assert sum(e8.marks) == 30
    assert max(e8.marks) == 6


@pytest.mark.parametrize("kind,rank", [("A", 0), ("D", 3), ("E", 5), ("E", 9), ("B", 3)])
def test_illegal_diagrams(kind, rank):
    with pytest.raises(DiagramError):
        build_affine_diagram(kind, rank)


@pytest.mark.parametrize("kind,rank", ALL_TYPES)
def test_involution_table(kind, rank):
    d = build_affine_diagram(kind, rank)
    inv = diagram_involution(d)
    assert inv(0) == 0
    assert list(inv.star[1:]) == EXPECTED_STAR[(kind, rank)]


@pytest.mark.parametrize("kind,rank", ALL_TYPES)
def test_involution_is_minus_w0(kind, rank):
    d = build_affine_diagram(kind, rank)
    perm = [p + 1 for p in minus_w0_permutation(d.cartan[1:, 1:])]
    assert list(diagram_involution(d).star[1:]) == perm


@pytest.mark.parametrize("kind,rank", ALL_TYPES)
def test_involution_is_automorphism(kind, rank):
    d = build_affine_diagram(kind, rank)
    s = list(diagram_involution(d).star)
    assert sorted(s) == list(d.vertices)
    assert all(s[s[i]] == i for i in d.vertices)
    assert np.array_equal(d.adjacency[np.ix_(s, s)], d.adjacency)
    assert [d.marks[i] for i in s] == list(d.marks)


@pytest.mark.parametrize("kind,rank", ALL_TYPES)
def test_form_types(kind, rank):
    d = build_affine_diagram(kind, rank)
    inv = diagram_involution(d)
    ft = form_type_assignment(d, inv)
    assert set(ft) == set(inv.self_dual())
    assert ft[0] is FormType.ORTHOGONAL
    if kind == "A":
        if rank % 2:
            assert ft[(rank + 1) // 2] is FormType.ORTHOGONAL
    else:
        (i0,) = d.neighbors(0)
        assert ft[i0] is FormType.SYMPLECTIC
        for i, j in d.edges:
            if i in ft and j in ft:
                assert ft[i] is not ft[j]


def test_form_type_examples():
    a1 = build_affine_diagram("A", 1)
    assert form_type_assignment(a1, diagram_involution(a1))[1] is FormType.ORTHOGONAL
    d4 = build_affine_diagram("D", 4)
    ft = form_type_assignment(d4, diagram_involution(d4))
    assert ft[2] is FormType.SYMPLECTIC
    assert all(ft[i] is FormType.ORTHOGONAL for i in (1, 3, 4))
    e6 = build_affine_diagram("E", 6)
    ft = form_type_assignment(e6, diagram_involution(e6))
    assert ft[6] is FormType.SYMPLECTIC and ft[3] is FormType.ORTHOGONAL
    assert set(ft) == {0, 3, 6}


@pytest.mark.parametrize("n", range(2, 13))
def test_mckay_cyclic(n):
    a = mckay_adjacency_cyclic(n)
    assert np.array_equal(a, build_affine_diagram("A", n - 1).adjacency)
    assert np.array_equal(a, brute_cyclic_adjacency(n))


def test_mckay_rejects_trivial_group():
    with pytest.raises(DiagramError):
        mckay_adjacency_cyclic(1)


def test_orientation_examples():
    a1 = build_affine_diagram("A", 1)
    o = choose_orientation(a1, diagram_involution(a1))
    assert [(a1.vout(h), a1.vin(h)) for h in o.omega] == [(0, 1), (0, 1)]
    assert all(a1.eps(h) == 1 for h in o.omega)
    a2 = build_affine_diagram("A", 2)
    o = choose_orientation(a2, diagram_involution(a2))
    assert sorted((a2.vout(h), a2.vin(h)) for h in o.omega) == [(0, 1), (0, 2), (1, 2)]
    d4 = build_affine_diagram("D", 4)
    o = choose_orientation(d4, diagram_involution(d4))
    assert not any(o.displaced)
    assert set(o.arrow_star[h] for h in o.omega) == set(o.omega)


@pytest.mark.parametrize("kind,rank", ALL_TYPES)
def test_arrow_involution(kind, rank):
    d = build_affine_diagram(kind, rank)
    inv = diagram_involution(d)
    hs = arrow_involution(d, inv)
    assert sorted(hs) == list(range(d.n_arrows))
    for h in range(d.n_arrows):
        assert hs[hs[h]] == h
        assert d.vout(hs[h]) == inv(d.vout(h)) and d.vin(hs[h]) == inv(d.vin(h))
        assert hs[d.bar(h)] == d.bar(hs[h])


@given(st.sampled_from(ALL_TYPES))
def test_bar_is_fixed_point_free_involution(t):
    d = build_affine_diagram(*t)
    for h in range(d.n_arrows):
        hb = d.bar(h)
        assert hb != h and d.bar(hb) == h
        assert (d.vout(hb), d.vin(hb)) == (d.vin(h), d.vout(h))
        assert d.eps(h) == -d.eps(hb)


def test_to_json_fields():
    j = build_affine_diagram("A", 2).to_json()
    assert set(j) == {"kind", "rank", "adjacency", "marks", "orientation"}
