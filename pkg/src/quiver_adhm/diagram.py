"""Affine ADE (McKay) diagrams in Kac labeling.

Vertex ``i`` of an affine diagram stands for the irreducible representation
``rho_i`` of a finite subgroup of SU(2); the marks ``delta_i = dim rho_i`` span
the kernel of the affine Cartan matrix.  Arrows are enumerated once and for
all: the orientation Omega comes first (lower-index vertex is the source) and
the reversed arrows follow, so ``bar(h) = h + m`` for ``h < m``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np


class Kind(str, Enum):
    A = "A"
    D = "D"
    E = "E"


class FormType(str, Enum):
    ORTHOGONAL = "orthogonal"
    SYMPLECTIC = "symplectic"


class DiagramError(ValueError):
    """Raised for an illegal (kind, rank) pair."""


def _edges_and_marks(kind: Kind, rank: int) -> tuple[list[tuple[int, int]], list[int]]:
    n = rank
    if kind is Kind.A:
        if n < 1:
            raise DiagramError(f"A_{n}: rank must be >= 1")
        if n == 1:
            return [(0, 1), (0, 1)], [1, 1]
        edges = [(i, i + 1) for i in range(n)] + [(0, n)]
        return edges, [1] * (n + 1)
    if kind is Kind.D:
        if n < 4:
            raise DiagramError(f"D_{n}: rank must be >= 4")
        edges = [(0, 2), (1, 2)] + [(i, i + 1) for i in range(2, n - 2)]
        edges += [(n - 2, n - 1), (n - 2, n)]
        marks = [1, 1] + [2] * (n - 3) + [1, 1]
        return edges, marks
    if kind is Kind.E:
        if n == 6:
            edges = [(1, 2), (2, 3), (3, 4), (4, 5), (3, 6), (0, 6)]
            marks = [1, 1, 2, 3, 2, 1, 2]
        elif n == 7:
            edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (3, 7)]
            marks = [1, 2, 3, 4, 3, 2, 1, 2]
        elif n == 8:
            edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (5, 8)]
            marks = [1, 2, 3, 4, 5, 6, 4, 2, 3]
        else:
            raise DiagramError(f"E_{n}: rank must be 6, 7 or 8")
        return edges, marks
    raise DiagramError(f"unknown kind {kind!r}")


@dataclass(frozen=True)
class AffineDiagram:
    kind: Kind
    rank: int
    edges: tuple[tuple[int, int], ...]
    marks: tuple[int, ...]

    @property
    def n_vertices(self) -> int:
        return self.rank + 1

    @property
    def vertices(self) -> range:
        return range(self.rank + 1)

    @cached_property
    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n_vertices, self.n_vertices), dtype=np.int64)
        for i, j in self.edges:
            a[i, j] += 1
            a[j, i] += 1
        a.setflags(write=False)
        return a

    @cached_property
    def cartan(self) -> np.ndarray:
        c = 2 * np.eye(self.n_vertices, dtype=np.int64) - self.adjacency
        c.setflags(write=False)
        return c

    @property
    def delta(self) -> np.ndarray:
        return np.array(self.marks, dtype=np.int64)

    # arrows -------------------------------------------------------------
    @property
    def n_omega(self) -> int:
        return len(self.edges)

    @property
    def n_arrows(self) -> int:
        return 2 * len(self.edges)

    def vout(self, h: int) -> int:
        m = self.n_omega
        return self.edges[h][0] if h < m else self.edges[h - m][1]

    def vin(self, h: int) -> int:
        m = self.n_omega
        return self.edges[h][1] if h < m else self.edges[h - m][0]

    def bar(self, h: int) -> int:
        m = self.n_omega
        return h + m if h < m else h - m

    def eps(self, h: int) -> int:
        return 1 if h < self.n_omega else -1

    @cached_property
    def arrows_into(self) -> tuple[tuple[int, ...], ...]:
        return tuple(
            tuple(h for h in range(self.n_arrows) if self.vin(h) == i) for i in self.vertices
        )

    @cached_property
    def arrows_out_of(self) -> tuple[tuple[int, ...], ...]:
        return tuple(
            tuple(h for h in range(self.n_arrows) if self.vout(h) == i) for i in self.vertices
        )

    def neighbors(self, i: int) -> list[int]:
        return [j for j in self.vertices if self.adjacency[i, j] > 0]

    @cached_property
    def distance_from_zero(self) -> tuple[int, ...]:
        dist = [-1] * self.n_vertices
        dist[0] = 0
        queue = deque([0])
        while queue:
            i = queue.popleft()
            for j in self.neighbors(i):
                if dist[j] < 0:
                    dist[j] = dist[i] + 1
                    queue.append(j)
        return tuple(dist)

    @cached_property
    def parity(self) -> tuple[int, ...]:
        """``(-1)**dist(0, i)``; the sign by which the centre of SU(2) acts when it lies in the group."""
        return tuple((-1) ** d for d in self.distance_from_zero)

    def to_json(self) -> dict:
        orient = choose_orientation(self, diagram_involution(self))
        return {
            "kind": self.kind.value,
            "rank": self.rank,
            "adjacency": self.adjacency.tolist(),
            "marks": list(self.marks),
            "orientation": [[self.vout(h), self.vin(h)] for h in orient.omega],
        }


def build_affine_diagram(kind: str | Kind, rank: int) -> AffineDiagram:
    try:
        kind = Kind(kind)
    except ValueError:
        raise DiagramError(f"unknown kind {kind!r}") from None
    if not isinstance(rank, (int, np.integer)) or isinstance(rank, bool):
        raise DiagramError(f"rank must be an integer, got {rank!r}")
    edges, marks = _edges_and_marks(kind, int(rank))
    d = AffineDiagram(kind, int(rank), tuple(edges), tuple(marks))
    if np.any(d.cartan @ d.delta):
        raise AssertionError(f"marks of {kind.value}_{rank} not in kernel of affine Cartan")
    return d


def mckay_adjacency_cyclic(n: int) -> np.ndarray:
    """McKay adjacency of Z/n from characters: ``a_ij = <chi_i, chi_j chi_Q>``.

    Independent of :func:`build_affine_diagram`; Q = chi_1 + chi_{n-1}.
    """
    if n < 2:
        raise DiagramError("cyclic group order must be >= 2")
    g = np.arange(n)
    chi = np.exp(2j * np.pi * np.outer(np.arange(n), g) / n)
    chi_q = chi[1] + chi[n - 1]
    # <rho_i, rho_j (x) Q> = (1/n) sum_g conj(chi_i(g)) chi_j(g) chi_Q(g)
    inner = (chi.conj() @ (chi * chi_q).T) / n
    a = np.rint(inner.real).astype(np.int64)
    if np.max(np.abs(inner - a)) > 1e-9:
        raise AssertionError("character inner products are not integral")
    return a


@dataclass(frozen=True)
class Involution:
    star: tuple[int, ...]

    def __call__(self, i: int) -> int:
        return self.star[i]

    @property
    def is_identity(self) -> bool:
        return all(s == i for i, s in enumerate(self.star))

    def self_dual(self) -> list[int]:
        return [i for i, s in enumerate(self.star) if s == i]


def diagram_involution(diagram: AffineDiagram) -> Involution:
    n = diagram.rank
    star = list(range(n + 1))
    if diagram.kind is Kind.A:
        for i in range(1, n + 1):
            star[i] = n - i + 1
    elif diagram.kind is Kind.D and n % 2 == 1:
        star[n - 1], star[n] = n, n - 1
    elif diagram.kind is Kind.E and n == 6:
        star[1], star[5], star[2], star[4] = 5, 1, 4, 2
    return Involution(tuple(star))


def form_type_assignment(
    diagram: AffineDiagram, involution: Involution
) -> dict[int, FormType]:
    """Orthogonal/symplectic type of each self-dual vertex."""
    selfdual = set(involution.self_dual())
    types = {0: FormType.ORTHOGONAL}
    if diagram.kind is Kind.A:
        if diagram.rank % 2 == 1:
            types[(diagram.rank + 1) // 2] = FormType.ORTHOGONAL
        return types
    (i0,) = diagram.neighbors(0)
    types[i0] = FormType.SYMPLECTIC
    queue = deque([i0])
    while queue:
        i = queue.popleft()
        flip = FormType.ORTHOGONAL if types[i] is FormType.SYMPLECTIC else FormType.SYMPLECTIC
        for j in diagram.neighbors(i):
            if j in selfdual and j not in types:
                types[j] = flip
                queue.append(j)
    missing = selfdual - types.keys()
    if missing:
        raise AssertionError(f"self-dual vertices {sorted(missing)} unreachable from i0")
    return dict(sorted(types.items()))


@dataclass(frozen=True)
class Orientation:
    omega: tuple[int, ...]
    arrow_star: tuple[int, ...]
    displaced: tuple[bool, ...] = field(default=())

    def star_lands_in_omega(self, h: int) -> bool:
        return not self.displaced[h]


def arrow_involution(diagram: AffineDiagram, involution: Involution) -> tuple[int, ...]:
    """h -> h*: the k-th of ``n`` parallel arrows from i to j goes to the (n-1-k)-th from i* to j*.

    Parallel arrows only occur for A_1, where the multiplicity space of the
    double edge carries an antisymmetric pairing and * swaps its two lines.
    """
    by_ends: dict[tuple[int, int], list[int]] = {}
    for h in range(diagram.n_arrows):
        by_ends.setdefault((diagram.vout(h), diagram.vin(h)), []).append(h)
    image = [0] * diagram.n_arrows
    for (i, j), hs in by_ends.items():
        target = by_ends[(involution(i), involution(j))]
        for k, h in enumerate(hs):
            image[h] = target[len(hs) - 1 - k]
    return tuple(image)


def choose_orientation(diagram: AffineDiagram, involution: Involution) -> Orientation:
    star = arrow_involution(diagram, involution)
    m = diagram.n_omega
    displaced = tuple((h < m) != (star[h] < m) for h in range(diagram.n_arrows))
    return Orientation(tuple(range(m)), star, displaced)
