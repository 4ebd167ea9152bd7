"""Orthogonal and symplectic structures: forms on W and V, the involution sigma, fixed points.

``sigma = t o * o F_{w0}``: reflect by the longest Weyl element, relabel by the
diagram involution while identifying ``W_i`` with ``W_{i*}^*`` through the
forms ``phi``, then transpose.  At ``zeta = 0`` the reflection functor is the
identity and sigma is linear, so ``Lambda = gauge(psi) o sigma`` (with forms
``psi`` on V) is a linear involution whose +1 eigenspace is an exact ansatz
for fixed data.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .adhm import (
    ADHMData,
    SolverError,
    SolverOptions,
    align,
    apply_star,
    compare_moduli,
    dualize_t,
    gauge_act,
    levenberg_marquardt,
    polish,
    random_adhm,
    residual,
    residual_jacobian,
    residual_vector,
    solve,
)
from .diagram import AffineDiagram, FormType, Involution, diagram_involution, form_type_assignment
from .reflection import functor_for_degenerate, w0_functor
from .weyl import Parameter, act_weyl_param, check_self_dual_parameter, longest_element, star_dimvec, star_param, w0_star_v

log = logging.getLogger(__name__)


class InstantonClass(str, Enum):
    SO = "SO"
    SP = "Sp"

    @property
    def sign(self) -> int:
        return 1 if self is InstantonClass.SO else -1


class ParityObstruction(ValueError):
    """An antisymmetric form is required on an odd-dimensional space."""

    def __init__(self, message: str, vertex: int):
        super().__init__(message)
        self.vertex = vertex


class NotSelfDual(ValueError):
    """Dimension vectors or parameters not preserved by the duality."""


def total_rank(w, diagram: AffineDiagram) -> int:
    """Rank ``n = sum_i w_i delta_i`` of the flat connection at infinity."""
    return int(np.asarray(w, dtype=np.int64) @ diagram.delta)


def standard_form(n: int, symmetric: bool) -> np.ndarray:
    """Identity, or the block matrix ``[[0, I], [-I, 0]]`` (needs even ``n``)."""
    if symmetric:
        return np.eye(n, dtype=complex)
    if n % 2:
        raise ValueError("antisymmetric form on an odd-dimensional space")
    k = n // 2
    j = np.zeros((n, n), dtype=complex)
    j[:k, k:] = np.eye(k)
    j[k:, :k] = -np.eye(k)
    return j


@dataclass(frozen=True)
class FormData:
    """Matrices ``phi_i`` (``w_{i*} x w_i``) with ``phi_{i*}^T = sign[i] * phi_i``."""

    phi: tuple[np.ndarray, ...]
    sign: tuple[int, ...]
    cls: InstantonClass
    star: tuple[int, ...]

    def __post_init__(self):
        _check_forms(self.phi, self.sign, self.star)

    def to_json(self) -> dict:
        return {
            "class": self.cls.value,
            "phi": {str(i): _cjson(p) for i, p in enumerate(self.phi)},
            "sign": list(self.sign),
            "star": list(self.star),
        }


@dataclass(frozen=True)
class VFormData:
    """Matrices ``psi_i`` (``v_{i*} x v_i``) identifying ``V_i`` with ``V_{i*}^*``."""

    psi: tuple[np.ndarray, ...]
    sign: tuple[int, ...]
    star: tuple[int, ...]

    def __post_init__(self):
        _check_forms(self.psi, self.sign, self.star)


def _check_forms(mats, signs, star) -> None:
    for i, (m, s) in enumerate(zip(mats, signs)):
        if m.shape != mats[star[i]].shape[::-1]:
            raise ValueError(f"form at vertex {i} has shape {m.shape}, incompatible with its dual")
        if m.size and np.linalg.matrix_rank(m) < len(m):
            raise ValueError(f"form at vertex {i} is singular")
        if not np.array_equal(mats[star[i]].T, s * m):
            raise ValueError(f"forms at {i} and {star[i]} violate the stated transpose symmetry")


def _cjson(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _vertex_forms(dims, diagram: AffineDiagram, involution: Involution, signs: Sequence[int], what: str):
    star = involution.star
    mats = [None] * diagram.n_vertices
    for i in diagram.vertices:
        j = star[i]
        if dims[i] != dims[j]:
            raise NotSelfDual(f"not self-dual {what}: dimension {dims[i]} at {i} but {dims[j]} at {j}")
        if j == i:
            symmetric = signs[i] == 1
            if not symmetric and dims[i] % 2:
                raise ParityObstruction(
                    f"parity obstruction at vertex {i}: antisymmetric form on {what} of odd dimension {dims[i]}",
                    i,
                )
            mats[i] = standard_form(dims[i], symmetric)
        elif i < j:
            mats[i] = np.eye(dims[i], dtype=complex)
            mats[j] = signs[i] * np.eye(dims[i], dtype=complex)
    return tuple(mats)


def _class_signs(diagram, involution, formtypes, cls: InstantonClass) -> list[int]:
    """Transpose sign ``phi_{i*}^T = s_i phi_i`` of the W-forms."""
    out = []
    for i in diagram.vertices:
        j = involution(i)
        if j == i:
            orth = formtypes[i] is FormType.ORTHOGONAL
            out.append(1 if (cls is InstantonClass.SO) == orth else -1)
        else:
            out.append(cls.sign * diagram.parity[min(i, j)])
    return out


def build_w_forms(w, diagram: AffineDiagram, involution: Involution | None = None,
                  formtypes: dict[int, FormType] | None = None,
                  cls: InstantonClass | str = InstantonClass.SO) -> FormData:
    """Standard forms on the framing: symmetric ``phi_i`` iff (SO iff ``rho_i`` orthogonal)."""
    cls = InstantonClass(cls)
    involution = involution or diagram_involution(diagram)
    formtypes = formtypes if formtypes is not None else form_type_assignment(diagram, involution)
    w = tuple(int(x) for x in w)
    signs = _class_signs(diagram, involution, formtypes, cls)
    phi = _vertex_forms(w, diagram, involution, signs, "framing")
    return FormData(phi, tuple(signs), cls, involution.star)


def build_v_forms(v, diagram: AffineDiagram, involution: Involution | None = None,
                  formtypes: dict[int, FormType] | None = None,
                  cls: InstantonClass | str = InstantonClass.SO) -> VFormData:
    """Forms on V of the opposite parity to the W-forms at every vertex."""
    cls = InstantonClass(cls)
    involution = involution or diagram_involution(diagram)
    formtypes = formtypes if formtypes is not None else form_type_assignment(diagram, involution)
    v = tuple(int(x) for x in v)
    signs = [-s for s in _class_signs(diagram, involution, formtypes, cls)]
    return VFormData(_vertex_forms(v, diagram, involution, signs, "V"), tuple(signs), involution.star)


def sigma_parameter(zeta: Parameter, diagram: AffineDiagram, word: Sequence[int] | None = None) -> Parameter:
    """``-(w0 zeta)*``, the level of sigma's output."""
    word = longest_element(diagram) if word is None else word
    return -star_param(act_weyl_param(word, zeta, diagram), diagram_involution(diagram))


def duality_involution_sigma(data: ADHMData, zeta: Parameter, forms: FormData,
                             word: Sequence[int] | None = None, param_tol: float = 1e-10) -> ADHMData:
    """``t o * o F_{w0}`` on data at a self-dual level ``zeta``; output lives at ``zeta`` again."""
    d = data.diagram
    inv = diagram_involution(d)
    word = longest_element(d) if word is None else tuple(word)
    if tuple(data.w) != tuple(star_dimvec(data.w, inv)):
        raise NotSelfDual("not self-dual framing")
    if not check_self_dual_parameter(zeta, d, param_tol, word):
        raise NotSelfDual("parameter is not fixed by -w0(.)*")
    out_zeta = sigma_parameter(zeta, d, word)
    if (out_zeta - zeta).norm_inf() > param_tol:
        raise AssertionError("sigma moved the parameter")
    if zeta.is_zero():
        x = functor_for_degenerate(data, zeta)
    else:
        x, _ = w0_functor(data, zeta, word)
        if tuple(x.v) != tuple(w0_star_v(data.v, data.w, d, word)):
            raise AssertionError("reflection functor produced unexpected dimensions")
    y = dualize_t(apply_star(x, inv, forms.phi))
    if tuple(y.v) != tuple(star_dimvec(x.v, inv)):
        raise AssertionError(f"sigma output has dimensions {y.v}, expected {tuple(star_dimvec(x.v, inv))}")
    return y


def _check_self_dual_class(data: ADHMData, word) -> None:
    d = data.diagram
    inv = diagram_involution(d)
    if tuple(w0_star_v(star_dimvec(data.v, inv), data.w, d, word)) != tuple(data.v):
        raise NotSelfDual("not in the self-dual class: w0 * v* != v")


def is_fixed_point(data: ADHMData, zeta: Parameter, forms: FormData, word: Sequence[int] | None = None,
                   tol: float = 1e-6) -> bool:
    """Whether sigma(data) is gauge equivalent to data."""
    word = longest_element(data.diagram) if word is None else tuple(word)
    _check_self_dual_class(data, word)
    if sum(data.v) == 0:
        return True
    image = duality_involution_sigma(data, zeta, forms, word)
    return compare_moduli(image, data, tol).status == "equal"


# --------------------------------------------------------------------------
# degenerate case: exact linear ansatz
# --------------------------------------------------------------------------

def symmetry_map(data: ADHMData, forms: FormData, vforms: VFormData) -> ADHMData:
    """``Lambda = gauge(psi) o t o *``, linear in the data and an involution."""
    inv = diagram_involution(data.diagram)
    return gauge_act(vforms.psi, dualize_t(apply_star(data, inv, forms.phi)))


def symmetry_matrix(diagram: AffineDiagram, v, w, forms: FormData, vforms: VFormData) -> np.ndarray:
    """Complex matrix of :func:`symmetry_map` on :meth:`ADHMData.to_vector` coordinates."""
    base = random_adhm(diagram, v, w, 0)
    n = base.size
    cols = [symmetry_map(base.with_vector(e), forms, vforms).to_vector() for e in np.eye(n, dtype=complex)]
    return np.array(cols).T


def fixed_subspace(diagram: AffineDiagram, v, w, forms: FormData, vforms: VFormData,
                   tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (columns) of ``{x : Lambda x = x}``."""
    lam = symmetry_matrix(diagram, v, w, forms, vforms)
    n = len(lam)
    if n == 0:
        return np.zeros((0, 0), dtype=complex)
    if np.linalg.norm(lam @ lam - np.eye(n)) > tol * n:
        raise AssertionError("symmetry map is not an involution for these forms")
    u, s, _ = np.linalg.svd((np.eye(n) + lam) / 2)
    return u[:, s > 0.5]


def _realify(p: np.ndarray) -> np.ndarray:
    return np.block([[p.real, -p.imag], [p.imag, p.real]])


def construct_fixed_degenerate(v, w, diagram: AffineDiagram, cls: InstantonClass | str, seed: int,
                               opts: SolverOptions | None = None) -> ADHMData:
    """Solve ``mu = 0`` inside the +1 eigenspace of ``Lambda`` from a seeded start."""
    opts = opts or SolverOptions()
    cls = InstantonClass(cls)
    inv = diagram_involution(diagram)
    types = form_type_assignment(diagram, inv)
    forms = build_w_forms(w, diagram, inv, types, cls)
    vforms = build_v_forms(v, diagram, inv, types, cls)
    basis = fixed_subspace(diagram, v, w, forms, vforms)
    template = random_adhm(diagram, v, w, seed)
    if template.size == 0:
        return template
    zeta = Parameter.zero(diagram.n_vertices)
    r = basis.shape[1]
    real_basis = _realify(basis)
    y0 = basis.conj().T @ template.to_vector()

    def point(y):
        return template.with_vector(basis @ (y[:r] + 1j * y[r:]))

    y, nr = levenberg_marquardt(
        lambda y: residual_vector(point(y), zeta),
        lambda y: residual_jacobian(point(y)) @ real_basis,
        np.concatenate([y0.real, y0.imag]),
        opts.tol * 1e-3,
        opts.max_iters,
    )
    x = point(y)
    if nr > opts.tol:
        raise SolverError("fixed-point ansatz did not reach mu = 0", nr, x)
    return x


# --------------------------------------------------------------------------
# general parameters: alternating projection
# --------------------------------------------------------------------------

def solve_fixed(v, w, zeta: Parameter, diagram: AffineDiagram, cls: InstantonClass | str, seed: int,
                opts: SolverOptions | None = None, outer_iters: int = 200, align_restarts: int = 2) -> ADHMData:
    """Search for a sigma-fixed solution at a self-dual level.

    Alternates between the midpoint of ``x`` and the aligned ``sigma(x)`` and
    Newton projection back onto the level set, until the alignment distance
    and the residual are both below ``opts.tol``.
    """
    opts = opts or SolverOptions()
    cls = InstantonClass(cls)
    if zeta.is_zero():
        return construct_fixed_degenerate(v, w, diagram, cls, seed, opts)
    word = longest_element(diagram)
    if not check_self_dual_parameter(zeta, diagram, 1e-10, word):
        raise NotSelfDual("parameter is not fixed by -w0(.)*")
    inv = diagram_involution(diagram)
    if tuple(w0_star_v(star_dimvec(v, inv), w, diagram, word)) != tuple(int(x) for x in v):
        raise NotSelfDual("not in the self-dual class: w0 * v* != v")
    forms = build_w_forms(w, diagram, inv, None, cls)
    x = solve(diagram, v, w, zeta, seed, opts)
    dist = np.inf
    for it in range(outer_iters):
        image = duality_involution_sigma(x, zeta, forms, word)
        al = align(image, x, restarts=align_restarts, seed=seed + it)
        dist = al.distance
        res = residual(x, zeta)
        log.debug("solve_fixed iter %d: align %.3e residual %.3e", it, dist, res)
        if dist <= opts.tol and res <= opts.tol:
            return x
        mid = x.with_vector((x.to_vector() + gauge_act(al.gauge, image).to_vector()) / 2)
        x = polish(mid, zeta, opts.tol * 1e-3, opts.max_iters)
    raise SolverError(f"no sigma-fixed point found (alignment distance {dist:.3e})", float(dist), x)

