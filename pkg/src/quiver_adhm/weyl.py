"""Weyl group action on parameters, weights and dimension vectors.

Parameters are acted on through the affine Cartan matrix on all ``l+1``
components, which keeps the level ``zeta . delta`` fixed, while only the
finite simple reflections (vertices ``!= 0``) are ever used.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .diagram import AffineDiagram, Involution, diagram_involution


class UnrealizableDimension(ValueError):
    """No nonnegative integer dimension vector realizes the transported weight."""


@dataclass(frozen=True)
class Parameter:
    """Moment-map level: real part ``re`` and complex part ``c`` over the vertices."""

    re: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "re", np.asarray(self.re, dtype=float))
        object.__setattr__(self, "c", np.asarray(self.c, dtype=complex))
        if self.re.shape != self.c.shape or self.re.ndim != 1:
            raise ValueError("real and complex parts must be vectors of equal length")

    @classmethod
    def zero(cls, n: int) -> "Parameter":
        return cls(np.zeros(n), np.zeros(n, dtype=complex))

    def __neg__(self) -> "Parameter":
        return Parameter(-self.re, -self.c)

    def __sub__(self, other: "Parameter") -> "Parameter":
        return Parameter(self.re - other.re, self.c - other.c)

    def level(self, diagram: AffineDiagram) -> tuple[complex, complex]:
        """``(re . delta, c . delta)``; both vanish for ALE parameters."""
        return complex(self.re @ diagram.delta), complex(self.c @ diagram.delta)

    def on_level(self, diagram: AffineDiagram, tol: float = 1e-10) -> bool:
        lr, lc = self.level(diagram)
        return abs(lr) <= tol and abs(lc) <= tol

    def norm_inf(self) -> float:
        return float(max(np.max(np.abs(self.re), initial=0.0), np.max(np.abs(self.c), initial=0.0)))

    def is_zero(self, tol: float = 0.0) -> bool:
        return self.norm_inf() <= tol


def affine_cartan(diagram: AffineDiagram) -> np.ndarray:
    return np.array(diagram.cartan)


def _check_finite_vertex(diagram: AffineDiagram, i: int) -> None:
    if i == 0:
        raise ValueError("reflection at the affine vertex 0 is not part of the finite Weyl group")
    if not 0 < i <= diagram.rank:
        raise ValueError(f"vertex {i} out of range for {diagram.kind.value}_{diagram.rank}")


def _reflect(vec: np.ndarray, cartan: np.ndarray, i: int) -> np.ndarray:
    out = vec.copy()
    out -= cartan[:, i] * vec[i]
    return out


def simple_reflection_param(zeta: Parameter, i: int, diagram: AffineDiagram) -> Parameter:
    _check_finite_vertex(diagram, i)
    c = diagram.cartan
    return Parameter(_reflect(zeta.re, c, i), _reflect(zeta.c, c, i))


def longest_element(diagram: AffineDiagram) -> tuple[int, ...]:
    """Reduced word for w0 of the finite Weyl group by driving a regular dominant weight to anti-dominance.

    The word ``(i_1, ..., i_N)`` lists reflections in the order applied, so
    ``w0 = s_{i_N} ... s_{i_1}``; as ``w0`` is an involution the word read either
    way represents it.
    """
    fin = list(range(1, diagram.rank + 1))
    c = diagram.cartan[np.ix_(fin, fin)]
    lam = np.ones(len(fin), dtype=np.int64)
    word = []
    while True:
        pos = np.flatnonzero(lam > 0)
        if pos.size == 0:
            break
        k = int(pos[0])
        lam = lam - c[:, k] * lam[k]
        word.append(fin[k])
    return tuple(word)


def act_weyl_weight(word: Sequence[int], lam, diagram: AffineDiagram) -> np.ndarray:
    """Apply ``s_{i_1} ... s_{i_N}`` to an integer weight (rightmost letter first)."""
    out = np.array(lam, dtype=np.int64)
    for i in reversed(tuple(word)):
        _check_finite_vertex(diagram, i)
        out = _reflect(out, diagram.cartan, i)
    return out


def act_weyl_param(word: Sequence[int], zeta: Parameter, diagram: AffineDiagram) -> Parameter:
    for i in reversed(tuple(word)):
        zeta = simple_reflection_param(zeta, i, diagram)
    return zeta


def star_vector(vec, involution: Involution) -> np.ndarray:
    """``(v*)_i = v_{i*}``."""
    vec = np.asarray(vec)
    return vec[list(involution.star)]


def star_dimvec(v, involution: Involution) -> np.ndarray:
    return star_vector(np.asarray(v, dtype=np.int64), involution)


def star_param(zeta: Parameter, involution: Involution) -> Parameter:
    return Parameter(star_vector(zeta.re, involution), star_vector(zeta.c, involution))


def _solve_finite(c: np.ndarray, rhs: np.ndarray) -> list[Fraction]:
    """Exact Gauss-Jordan solve of a small nonsingular integer system."""
    n = len(rhs)
    m = [[Fraction(int(x)) for x in row] + [Fraction(int(r))] for row, r in zip(c, rhs)]
    for col in range(n):
        piv = next(r for r in range(col, n) if m[r][col] != 0)
        m[col], m[piv] = m[piv], m[col]
        p = m[col][col]
        m[col] = [x / p for x in m[col]]
        for r in range(n):
            if r != col and m[r][col] != 0:
                f = m[r][col]
                m[r] = [x - f * y for x, y in zip(m[r], m[col])]
    return [m[r][n] for r in range(n)]


def w0_star_v(v, w, diagram: AffineDiagram, word: Sequence[int] | None = None) -> np.ndarray:
    """Dimension vector ``v'`` with ``w0(w - C v) = w - C v'`` and ``v'_0 = v_0``."""
    v = np.asarray(v, dtype=np.int64)
    w = np.asarray(w, dtype=np.int64)
    if np.any(v < 0) or np.any(w < 0):
        raise ValueError("dimension vectors must be nonnegative")
    if word is None:
        word = longest_element(diagram)
    c = diagram.cartan
    lam = w - c @ v
    target = w - act_weyl_weight(word, lam, diagram)  # = C v'
    fin = list(range(1, diagram.rank + 1))
    rhs = target[fin] - c[fin, 0] * v[0]
    sol = _solve_finite(c[np.ix_(fin, fin)], rhs)
    if any(x.denominator != 1 for x in sol):
        raise UnrealizableDimension(f"non-integral solution {sol}")
    vp = np.array([v[0]] + [int(x) for x in sol], dtype=np.int64)
    # the vertex-0 row follows from the others because delta spans ker C
    if (c @ vp)[0] != target[0]:
        raise AssertionError("delta-kernel consistency failed for w0*v")
    if np.any(vp < 0):
        raise UnrealizableDimension(f"w0*v = {vp.tolist()} has a negative entry")
    return vp


def check_self_dual_parameter(
    zeta: Parameter, diagram: AffineDiagram, tol: float = 1e-10, word: Sequence[int] | None = None
) -> bool:
    """Whether ``-w0(zeta*) == zeta`` to ``tol`` in the sup norm."""
    if word is None:
        word = longest_element(diagram)
    image = -act_weyl_param(word, star_param(zeta, diagram_involution(diagram)), diagram)
    return (image - zeta).norm_inf() <= tol


def perturb_below_level(zeta_re, eta: float, diagram: AffineDiagram) -> np.ndarray:
    """Shift a level-0 real parameter along delta to level ``-eta``."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    zeta_re = np.asarray(zeta_re, dtype=float)
    delta = diagram.delta.astype(float)
    if abs(zeta_re @ delta) > 1e-10 * max(1.0, np.abs(zeta_re).max(initial=0.0)):
        raise ValueError("zeta_re must lie on the level-0 hyperplane")
    return zeta_re - eta * delta / (delta @ delta)


def random_on_level(diagram: AffineDiagram, rng: np.random.Generator, real: bool = True) -> Parameter:
    """Gaussian parameter projected onto the level-0 hyperplane."""
    n = diagram.n_vertices
    delta = diagram.delta.astype(float)

    def project(x):
        return x - delta * (x @ delta) / (delta @ delta)

    re = project(rng.standard_normal(n)) if real else np.zeros(n)
    c = project(rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return Parameter(re, c)
