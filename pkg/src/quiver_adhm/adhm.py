"""ADHM data on a McKay quiver and its calculus.

Conventions (fixed project-wide):

* ``mu_C(x)_i = sum_{vin(h)=i} eps(h) B_h B_hbar + a_i b_i``
* ``mu_R(x)_i = 1/2 [sum_{vin(h)=i} B_h B_h^+ - sum_{vout(h)=i} B_h^+ B_h + a_i a_i^+ - b_i^+ b_i]``
* gauge: ``B_h -> g_in B_h g_out^-1``, ``a_i -> g_i a_i``, ``b_i -> b_i g_i^-1``

Dual spaces are identified with coordinate spaces through the dual basis, so
every transpose below is a plain matrix transpose.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.sparse.linalg import LinearOperator, minres

from .diagram import AffineDiagram, FormType, Involution, arrow_involution, form_type_assignment
from .weyl import Parameter

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """Raised when a numerical solve stops short of its tolerance."""

    def __init__(self, message: str, best_residual: float, best=None):
        super().__init__(f"{message} (best residual {best_residual:.3e})")
        self.best_residual = best_residual
        self.best = best


@dataclass(frozen=True)
class ADHMData:
    diagram: AffineDiagram
    v: tuple[int, ...]
    w: tuple[int, ...]
    B: tuple[np.ndarray, ...]
    a: tuple[np.ndarray, ...]
    b: tuple[np.ndarray, ...]

    def __post_init__(self):
        d = self.diagram
        if len(self.v) != d.n_vertices or len(self.w) != d.n_vertices:
            raise ValueError("dimension vectors do not match the diagram")
        for h, m in enumerate(self.B):
            if m.shape != (self.v[d.vin(h)], self.v[d.vout(h)]):
                raise ValueError(f"B[{h}] has shape {m.shape}")
        for i in d.vertices:
            if self.a[i].shape != (self.v[i], self.w[i]) or self.b[i].shape != (self.w[i], self.v[i]):
                raise ValueError(f"framing maps at vertex {i} have wrong shape")

    # flat complex coordinates: B in arrow order, then a_i, then b_i (row-major)
    @property
    def blocks(self) -> list[np.ndarray]:
        return [*self.B, *self.a, *self.b]

    def to_vector(self) -> np.ndarray:
        parts = [m.ravel() for m in self.blocks]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=complex)

    def with_vector(self, z: np.ndarray) -> "ADHMData":
        return from_vector(self.diagram, self.v, self.w, z)

    @property
    def size(self) -> int:
        return sum(m.size for m in self.blocks)

    def norm(self) -> float:
        return float(np.linalg.norm(self.to_vector()))

    def __neg__(self) -> "ADHMData":
        return self.with_vector(-self.to_vector())


def block_shapes(diagram: AffineDiagram, v, w) -> list[tuple[int, int]]:
    shapes = [(v[diagram.vin(h)], v[diagram.vout(h)]) for h in range(diagram.n_arrows)]
    shapes += [(v[i], w[i]) for i in diagram.vertices]
    shapes += [(w[i], v[i]) for i in diagram.vertices]
    return shapes


def _split(z: np.ndarray, shapes: Sequence[tuple[int, int]]) -> list[np.ndarray]:
    """Split the trailing axis of ``z`` into blocks; a leading batch axis is kept."""
    out, k = [], 0
    batch = z.shape[:-1]
    for r, c in shapes:
        out.append(z[..., k : k + r * c].reshape(*batch, r, c))
        k += r * c
    return out


def from_vector(diagram: AffineDiagram, v, w, z: np.ndarray) -> ADHMData:
    v, w = tuple(int(x) for x in v), tuple(int(x) for x in w)
    blocks = [np.array(m, dtype=complex) for m in _split(np.asarray(z, dtype=complex), block_shapes(diagram, v, w))]
    m = diagram.n_arrows
    n = diagram.n_vertices
    return ADHMData(diagram, v, w, tuple(blocks[:m]), tuple(blocks[m : m + n]), tuple(blocks[m + n :]))


def zero_adhm(diagram: AffineDiagram, v, w) -> ADHMData:
    n = sum(r * c for r, c in block_shapes(diagram, v, w))
    return from_vector(diagram, v, w, np.zeros(n, dtype=complex))


def random_adhm(diagram: AffineDiagram, v, w, seed: int) -> ADHMData:
    """Complex Gaussian data with unit variance entries, reproducible from ``seed``."""
    rng = np.random.default_rng(seed)
    n = sum(r * c for r, c in block_shapes(diagram, v, w))
    z = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
    return from_vector(diagram, v, w, z)


# --------------------------------------------------------------------------
# moment maps
# --------------------------------------------------------------------------

def _mu_c(d: AffineDiagram, B, a, b) -> list[np.ndarray]:
    out = []
    for i in d.vertices:
        m = a[i] @ b[i]
        for h in d.arrows_into[i]:
            m = m + d.eps(h) * (B[h] @ B[d.bar(h)])
        out.append(m)
    return out


def _mu_r(d: AffineDiagram, B, a, b) -> list[np.ndarray]:
    out = []
    for i in d.vertices:
        m = a[i] @ _dag(a[i]) - _dag(b[i]) @ b[i]
        for h in d.arrows_into[i]:
            m = m + B[h] @ _dag(B[h])
        for h in d.arrows_out_of[i]:
            m = m - _dag(B[h]) @ B[h]
        out.append(0.5 * m)
    return out


def _dag(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def complex_moment_map(data: ADHMData) -> list[np.ndarray]:
    return _mu_c(data.diagram, data.B, data.a, data.b)


def real_moment_map(data: ADHMData) -> list[np.ndarray]:
    return _mu_r(data.diagram, data.B, data.a, data.b)


def _dmu(data: ADHMData, dB, da, db) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Derivatives of both moment maps along a (possibly batched) direction."""
    d = data.diagram
    B, a, b = data.B, data.a, data.b
    dmc, dmr = [], []
    for i in d.vertices:
        mc = da[i] @ b[i] + a[i] @ db[i]
        mr = da[i] @ _dag(a[i]) + a[i] @ _dag(da[i]) - _dag(db[i]) @ b[i] - _dag(b[i]) @ db[i]
        for h in d.arrows_into[i]:
            hb = d.bar(h)
            mc = mc + d.eps(h) * (dB[h] @ B[hb] + B[h] @ dB[hb])
            mr = mr + dB[h] @ _dag(B[h]) + B[h] @ _dag(dB[h])
        for h in d.arrows_out_of[i]:
            mr = mr - _dag(dB[h]) @ B[h] - _dag(B[h]) @ dB[h]
        dmc.append(mc)
        dmr.append(0.5 * mr)
    return dmc, dmr


def _gauge_infinitesimal(data: ADHMData, xi) -> tuple[list, list, list]:
    """Tangent of ``g -> g.x`` at ``g = 1`` along per-vertex matrices ``xi`` (batched)."""
    d = data.diagram
    dB = [xi[d.vin(h)] @ data.B[h] - data.B[h] @ xi[d.vout(h)] for h in range(d.n_arrows)]
    da = [xi[i] @ data.a[i] for i in d.vertices]
    db = [-(data.b[i] @ xi[i]) for i in d.vertices]
    return dB, da, db


# Hermitian matrices in orthonormal real coordinates: diag, sqrt2*Re(upper), sqrt2*Im(upper)
def _herm_coords(ms: Sequence[np.ndarray]) -> np.ndarray:
    parts = []
    for m in ms:
        n = m.shape[-1]
        iu = np.triu_indices(n, 1)
        parts.append(np.real(np.diagonal(m, axis1=-2, axis2=-1)))
        parts.append(np.sqrt(2) * np.real(m[..., iu[0], iu[1]]))
        parts.append(np.sqrt(2) * np.imag(m[..., iu[0], iu[1]]))
    if not parts:
        return np.zeros(0)
    return np.concatenate(parts, axis=-1)


def _herm_basis(n: int) -> np.ndarray:
    """Orthonormal basis of n x n Hermitian matrices, ordered like :func:`_herm_coords`."""
    basis = []
    for k in range(n):
        e = np.zeros((n, n), dtype=complex)
        e[k, k] = 1
        basis.append(e)
    iu = np.triu_indices(n, 1)
    for k, l in zip(*iu):
        e = np.zeros((n, n), dtype=complex)
        e[k, l] = e[l, k] = 1 / np.sqrt(2)
        basis.append(e)
    for k, l in zip(*iu):
        e = np.zeros((n, n), dtype=complex)
        e[k, l], e[l, k] = 1j / np.sqrt(2), -1j / np.sqrt(2)
        basis.append(e)
    return np.array(basis).reshape(len(basis), n, n)


def _herm_from_coords(x: np.ndarray, v) -> list[np.ndarray]:
    """Inverse of :func:`_herm_coords` for one Hermitian matrix per vertex."""
    out, k = [], 0
    for n in v:
        m = n * (n - 1) // 2
        iu = np.triu_indices(n, 1)
        h = np.diag(x[k : k + n]).astype(complex)
        off = (x[k + n : k + n + m] + 1j * x[k + n + m : k + n + 2 * m]) / np.sqrt(2)
        h[iu] = off
        h[iu[1], iu[0]] = off.conj()
        out.append(h)
        k += n * n
    return out


def _block_diag_batch(per_vertex: Sequence[np.ndarray], v) -> list[np.ndarray]:
    """Stack per-vertex bases into one batch where each element lives on one vertex."""
    total = sum(len(p) for p in per_vertex)
    out = [np.zeros((total, n, n), dtype=complex) for n in v]
    k = 0
    for i, p in enumerate(per_vertex):
        out[i][k : k + len(p)] = p
        k += len(p)
    return out


def _cplx_coords(ms: Sequence[np.ndarray]) -> np.ndarray:
    parts = [m.reshape(*m.shape[:-2], -1) for m in ms]
    if not parts:
        return np.zeros(0)
    z = np.concatenate(parts, axis=-1)
    return np.concatenate([z.real, z.imag], axis=-1)


def _real_directions(data: ADHMData):
    """Batched direction blocks for every real coordinate (Re z_k, then Im z_k)."""
    n = data.size
    dz = np.concatenate([np.eye(n), 1j * np.eye(n)]).astype(complex)
    blocks = _split(dz, block_shapes(data.diagram, data.v, data.w))
    m, nv = data.diagram.n_arrows, data.diagram.n_vertices
    return blocks[:m], blocks[m : m + nv], blocks[m + nv :]


def residual_vector(data: ADHMData, zeta: Parameter, parts: str = "CR") -> np.ndarray:
    """Real residual whose Euclidean norm is the Frobenius residual of the selected equations."""
    out = []
    if "C" in parts:
        mc = complex_moment_map(data)
        out.append(_cplx_coords([m - zeta.c[i] * np.eye(len(m)) for i, m in enumerate(mc)]))
    if "R" in parts:
        mr = real_moment_map(data)
        out.append(_herm_coords([m - zeta.re[i] * np.eye(len(m)) for i, m in enumerate(mr)]))
    return np.concatenate(out) if out else np.zeros(0)


def residual_jacobian(data: ADHMData, parts: str = "CR") -> np.ndarray:
    dB, da, db = _real_directions(data)
    dmc, dmr = _dmu(data, dB, da, db)
    cols = []
    if "C" in parts:
        cols.append(_cplx_coords(dmc))
    if "R" in parts:
        cols.append(_herm_coords(dmr))
    if not cols:
        return np.zeros((0, 2 * data.size))
    return np.concatenate(cols, axis=-1).T


def residual(data: ADHMData, zeta: Parameter, parts: str = "CR") -> float:
    """``sqrt(sum_i |mu_C,i - zeta_C,i|^2 + |mu_R,i - zeta_R,i|^2)`` (Frobenius)."""
    return float(np.linalg.norm(residual_vector(data, zeta, parts)))


# --------------------------------------------------------------------------
# gauge group
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GaugeElement:
    g: tuple[np.ndarray, ...]
    unitary: bool = False

    def __post_init__(self):
        for m in self.g:
            if m.size and np.linalg.cond(m) > 1e12:
                raise ValueError("gauge element is numerically singular")
            if self.unitary and m.size and np.linalg.norm(_dag(m) @ m - np.eye(len(m))) > 1e-10:
                raise ValueError("gauge element flagged unitary is not unitary")

    def inv(self) -> "GaugeElement":
        return GaugeElement(tuple(np.linalg.inv(m) if m.size else m for m in self.g), self.unitary)

    def __matmul__(self, other: "GaugeElement") -> "GaugeElement":
        return GaugeElement(tuple(p @ q for p, q in zip(self.g, other.g)), self.unitary and other.unitary)

    @classmethod
    def identity(cls, v) -> "GaugeElement":
        return cls(tuple(np.eye(n, dtype=complex) for n in v), True)


def random_unitary_gauge(v, rng: np.random.Generator) -> GaugeElement:
    gs = []
    for n in v:
        z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        q, r = np.linalg.qr(z) if n else (np.zeros((0, 0), dtype=complex), None)
        if n:
            q = q * (np.diag(r) / np.abs(np.diag(r)))
        gs.append(q)
    return GaugeElement(tuple(gs), True)


def gauge_act(g: GaugeElement | Sequence[np.ndarray], data: ADHMData) -> ADHMData:
    if not isinstance(g, GaugeElement):
        g = GaugeElement(tuple(np.asarray(m, dtype=complex) for m in g))
    d = data.diagram
    gi = g.inv().g
    B = tuple(g.g[d.vin(h)] @ data.B[h] @ gi[d.vout(h)] for h in range(d.n_arrows))
    a = tuple(g.g[i] @ data.a[i] for i in d.vertices)
    b = tuple(data.b[i] @ gi[i] for i in d.vertices)
    return replace(data, B=B, a=a, b=b)


def _numerical_rank(m: np.ndarray, rel: float) -> int:
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rel * s[0]))


def stabilizer_dimension(data: ADHMData, rel: float = 1e-8) -> int:
    """Complex dimension of the Lie algebra of the stabilizer in prod gl(V_i)."""
    v = data.v
    per = []
    for n in v:
        basis = np.zeros((n * n, n, n), dtype=complex)
        for k in range(n * n):
            basis.flat[k * n * n + k] = 1
        per.append(basis)
    xi = _block_diag_batch(per, v)
    total = sum(n * n for n in v)
    if total == 0:
        return 0
    dB, da, db = _gauge_infinitesimal(data, xi)
    cols = [m.reshape(total, -1) for m in (*dB, *da, *db)]
    mat = np.concatenate(cols, axis=1)
    return total - _numerical_rank(mat, rel)


def is_regular(data: ADHMData, zeta: Parameter, rel: float = 1e-8) -> bool:
    """Trivial stabilizer, with the rank cutoff widened to ``100 sqrt(residual)``.

    Near a solution with a nontrivial stabilizer, approximate solutions sit at
    distance about ``sqrt(residual)`` from it, so smaller singular values of
    the infinitesimal action cannot be told apart from zero.
    """
    scale = max(1.0, data.norm())
    cut = max(rel, 100 * np.sqrt(residual(data, zeta) / scale))
    return stabilizer_dimension(data, cut) == 0


def tangent_dimension(data: ADHMData, zeta: Parameter, rel: float = 1e-7, max_residual: float = 1e-8) -> int:
    """Real dimension of ker(d mu) modulo the infinitesimal unitary orbit."""
    r = residual(data, zeta)
    if r > max_residual:
        raise ValueError(f"tangent_dimension needs a solution, residual is {r:.3e}")
    if data.size == 0:
        return 0
    jac = residual_jacobian(data)
    rank_mu = _numerical_rank(jac, rel)
    xi = _block_diag_batch([1j * _herm_basis(n) for n in data.v], data.v)
    nxi = sum(n * n for n in data.v)
    rank_g = 0
    if nxi:
        dB, da, db = _gauge_infinitesimal(data, xi)
        rank_g = _numerical_rank(_cplx_coords([*dB, *da, *db]).reshape(nxi, -1), rel)
    return 2 * data.size - rank_mu - rank_g


def expected_dimension(v, w, diagram: AffineDiagram) -> int:
    v, w = np.asarray(v), np.asarray(w)
    return int(2 * (2 * v @ w - v @ diagram.cartan @ v))


# --------------------------------------------------------------------------
# solvers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SolverOptions:
    max_iters: int = 500
    tol: float = 1e-10
    strategy: str = "lm"  # "lm" or "two_stage"
    kn_max_iters: int = 200


@dataclass
class LMTrace:
    iterations: int = 0
    residuals: list[float] = field(default_factory=list)


def levenberg_marquardt(
    fun: Callable[[np.ndarray], np.ndarray],
    jac: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    tol: float,
    max_iters: int,
    trace: LMTrace | None = None,
) -> tuple[np.ndarray, float]:
    """Damped Gauss-Newton on ``|fun(x)|``; works for under- and over-determined systems."""
    x = np.array(x0, dtype=float)
    r = fun(x)
    nr = float(np.linalg.norm(r))
    lam = None
    for it in range(max_iters):
        if trace is not None:
            trace.iterations = it
            trace.residuals.append(nr)
        if nr <= tol:
            break
        J = jac(x)
        u, s, vt = np.linalg.svd(J, full_matrices=False)
        if lam is None:
            lam = 1e-3 * (s[0] ** 2 if s.size else 1.0)
        ur = u.T @ r
        while True:
            step = -vt.T @ (s / (s**2 + lam) * ur)
            xn = x + step
            rn = fun(xn)
            nrn = float(np.linalg.norm(rn))
            if nrn < nr:
                x, r, nr = xn, rn, nrn
                lam = max(lam / 5, 1e-300)
                break
            lam *= 4
            if lam > 1e20 * (1 + (s[0] ** 2 if s.size else 0)):
                return x, nr
    return x, nr


def _solve_parts(data: ADHMData, zeta: Parameter, parts: str, tol: float, max_iters: int, trace=None):
    n = data.size

    def pack(z):
        return np.concatenate([z.real, z.imag])

    def unpack(x):
        return x[:n] + 1j * x[n:]

    fun = lambda x: residual_vector(data.with_vector(unpack(x)), zeta, parts)  # noqa: E731
    jac = lambda x: residual_jacobian(data.with_vector(unpack(x)), parts)  # noqa: E731
    x, nr = levenberg_marquardt(fun, jac, pack(data.to_vector()), tol, max_iters, trace)
    return data.with_vector(unpack(x)), nr


def _hermitian_exp(ks: Sequence[np.ndarray], sign: float = 1.0) -> list[np.ndarray]:
    out = []
    for k in ks:
        if k.size == 0:
            out.append(k)
            continue
        lam, u = np.linalg.eigh(k)
        out.append((u * np.exp(sign * lam)) @ _dag(u))
    return out


def kempf_ness(data: ADHMData, zeta_re, tol: float = 1e-12, max_iters: int = 200) -> ADHMData:
    """Move ``data`` inside its complexified orbit until ``mu_R = zeta_re``.

    Newton iteration on the Kempf-Ness functional in exponential coordinates
    ``g = exp(K)``, ``K`` Hermitian, with step halving; ``mu_C`` is untouched
    because the complex gauge group preserves it.
    """
    zeta = Parameter(np.asarray(zeta_re, dtype=float), np.zeros(len(data.v), dtype=complex))
    v = data.v
    nk = sum(n * n for n in v)
    if nk == 0:
        return data
    dense = nk <= _DENSE_KN
    basis = _block_diag_batch([_herm_basis(n) for n in v], v) if dense else None

    def res(x):
        return residual_vector(x, zeta, "R")

    r = res(data)
    nr = float(np.linalg.norm(r))
    for _ in range(max_iters):
        if nr <= tol:
            return data
        if dense:
            dB, da, db = _gauge_infinitesimal(data, basis)
            _, dmr = _dmu(data, dB, da, db)
            hess = _herm_coords(dmr).reshape(nk, -1).T
            step = np.linalg.lstsq(hess, -r, rcond=1e-13)[0]
        else:
            step = _kn_newton_step(data, r, tol)
        t = 1.0
        while t > 1e-12:
            ks = _herm_from_coords(step * t, v)
            g = _hermitian_exp(ks)
            gi = _hermitian_exp(ks, -1.0)
            cand = _apply_pair(data, g, gi)
            rc = res(cand)
            nrc = float(np.linalg.norm(rc))
            if nrc < nr:
                data, r, nr = cand, rc, nrc
                break
            t /= 2
        else:
            break
    if nr > tol:
        raise SolverError("Kempf-Ness balancing did not converge", nr, data)
    return data


# above this many gauge coordinates the Hessian is applied matrix-free
_DENSE_KN = 300


def _kn_newton_step(data: ADHMData, r: np.ndarray, tol: float) -> np.ndarray:
    """Solve ``H k = -r`` for the (symmetric, semidefinite) Kempf-Ness Hessian by MINRES."""
    nk = len(r)

    def matvec(k):
        xi = _herm_from_coords(np.asarray(k).ravel(), data.v)
        _, dmr = _dmu(data, *_gauge_infinitesimal(data, xi))
        return _herm_coords(dmr)

    op = LinearOperator((nk, nk), matvec=matvec, dtype=float)
    rtol = min(1e-10, 0.1 * tol / max(float(np.linalg.norm(r)), 1e-300))
    step, _ = minres(op, -r, rtol=max(rtol, 1e-14), maxiter=10 * nk)
    return step


def _apply_pair(data: ADHMData, g, gi) -> ADHMData:
    d = data.diagram
    B = tuple(g[d.vin(h)] @ data.B[h] @ gi[d.vout(h)] for h in range(d.n_arrows))
    a = tuple(g[i] @ data.a[i] for i in d.vertices)
    b = tuple(data.b[i] @ gi[i] for i in d.vertices)
    return replace(data, B=B, a=a, b=b)


def solve(diagram: AffineDiagram, v, w, zeta: Parameter, seed: int, opts: SolverOptions | None = None,
          trace: LMTrace | None = None) -> ADHMData:
    """Find data with ``mu_C = zeta_C``, ``mu_R = zeta_R`` starting from :func:`random_adhm`."""
    opts = opts or SolverOptions()
    if not zeta.on_level(diagram):
        raise ValueError(f"parameter is off the level-0 hyperplane: {zeta.level(diagram)}")
    x0 = random_adhm(diagram, v, w, seed)
    if x0.size == 0:
        # nothing to vary; a nonzero v_i with no maps still has to meet its level
        nr = residual(x0, zeta)
        if nr > opts.tol:
            raise SolverError("no free coordinates and the moment-map equation fails", nr, x0)
        return x0
    # aim below tol: the last Newton steps are nearly free and downstream maps need the slack
    target = opts.tol * 1e-3
    if opts.strategy == "lm":
        x, nr = _solve_parts(x0, zeta, "CR", target, opts.max_iters, trace)
    elif opts.strategy == "two_stage":
        x, nr = _solve_parts(x0, zeta, "C", target, opts.max_iters, trace)
        if nr > opts.tol:
            raise SolverError("complex moment map not reached", nr, x)
        x = kempf_ness(x, zeta.re, target, opts.kn_max_iters)
        nr = residual(x, zeta)
    else:
        raise ValueError(f"unknown strategy {opts.strategy!r}")
    if nr > opts.tol:
        raise SolverError(f"no convergence after {opts.max_iters} iterations", nr, x)
    return x


def polish(data: ADHMData, zeta: Parameter, tol: float = 1e-12, max_iters: int = 100) -> ADHMData:
    """Newton-project nearby data back onto the level set (minimal-norm steps)."""
    x, _ = _solve_parts(data, zeta, "CR", tol, max_iters)
    return x


# --------------------------------------------------------------------------
# duality and the diagram automorphism
# --------------------------------------------------------------------------

def dualize_t(data: ADHMData, zeta: Parameter | None = None):
    """Transpose duality ``(B_h, a, b) -> (-eps(h) B_hbar^T, -b^T, a^T)``, level ``zeta -> -zeta``.

    Applying it twice gives ``-data`` exactly (``eps(h) eps(hbar) = -1``).
    """
    d = data.diagram
    B = tuple(-d.eps(h) * data.B[d.bar(h)].T for h in range(d.n_arrows))
    a = tuple(-data.b[i].T for i in d.vertices)
    b = tuple(data.a[i].T for i in d.vertices)
    out = replace(data, B=B, a=a, b=b)
    if zeta is None:
        return out
    return out, -zeta


def vertex_signs(diagram: AffineDiagram, involution: Involution) -> tuple[int, ...]:
    """``chi_i``: +1/-1 for orthogonal/symplectic self-dual vertices, ``parity[min(i, i*)]`` on swapped pairs."""
    types = form_type_assignment(diagram, involution)
    out = []
    for i in diagram.vertices:
        if i in types:
            out.append(1 if types[i] is FormType.ORTHOGONAL else -1)
        else:
            out.append(diagram.parity[min(i, involution(i))])
    return tuple(out)


def star_arrow_signs(diagram: AffineDiagram, involution: Involution) -> tuple[int, ...]:
    """Signs ``s_h`` with ``B'_{h*} = s_h B_h``.

    Two families of constraints, for ``h: i -> j``:

    * ``s_h s_hbar = eps(h) eps(h*)`` so that * carries ``mu`` at ``zeta`` to ``mu`` at ``zeta*``;
    * ``s_h s_{bar(h*)} = -eps(h) eps(h*) chi_i chi_j`` so that ``t o *`` squares to a
      gauge transformation once V carries forms of the opposite parity to those on W.

    They are propagated from ``s = +1`` on the smallest free arrow.
    """
    star = arrow_involution(diagram, involution)
    chi = vertex_signs(diagram, involution)
    n = diagram.n_arrows
    rel: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for h in range(n):
        e = diagram.eps(h) * diagram.eps(star[h])
        rel[h].append((diagram.bar(h), e))
        rel[h].append((diagram.bar(star[h]), -e * chi[diagram.vout(h)] * chi[diagram.vin(h)]))
    s = [0] * n
    for root in range(n):
        if s[root]:
            continue
        s[root] = 1
        stack = [root]
        while stack:
            h = stack.pop()
            for k, prod in rel[h]:
                want = prod * s[h]
                if s[k] == 0:
                    s[k] = want
                    stack.append(k)
                elif s[k] != want:
                    raise AssertionError(f"inconsistent arrow signs at arrows {h}, {k}")
    return tuple(s)


def apply_star(data: ADHMData, involution: Involution, wforms: Sequence[np.ndarray] | None = None) -> ADHMData:
    """Relabel vertices and arrows by ``i -> i*``.

    Levels transform by ``zeta -> zeta*``.  With ``wforms`` (``phi_j`` of shape
    ``w_{j*} x w_j``) the framing at new vertex ``j`` is ``a_{j*} phi_j^{-T}``,
    ``phi_j^T b_{j*}``: after :func:`dualize_t` this is exactly the framing
    pulled back along ``f_j: W_j -> W_{j*}^*``.
    """
    d = data.diagram
    st = involution.star
    arrows = arrow_involution(d, involution)
    signs = star_arrow_signs(d, involution)
    v = tuple(data.v[st[i]] for i in d.vertices)
    w = tuple(data.w[st[i]] for i in d.vertices)
    B = [None] * d.n_arrows
    for h in range(d.n_arrows):
        B[arrows[h]] = signs[h] * data.B[h]
    a = [data.a[st[j]] for j in d.vertices]
    b = [data.b[st[j]] for j in d.vertices]
    if wforms is not None:
        if len(wforms) != d.n_vertices:
            raise ValueError("need one form matrix per vertex")
        for j in d.vertices:
            phi = np.asarray(wforms[j], dtype=complex)
            if phi.shape != (data.w[st[j]], data.w[j]):
                raise ValueError(f"form at vertex {j} has shape {phi.shape}, expected "
                                 f"{(data.w[st[j]], data.w[j])}")
            if phi.size:
                a[j] = a[j] @ np.linalg.inv(phi).T
                b[j] = phi.T @ b[j]
            else:
                a[j] = np.zeros((v[j], data.w[j]), dtype=complex)
                b[j] = np.zeros((data.w[j], v[j]), dtype=complex)
        w = tuple(data.w)
    return ADHMData(d, v, w, tuple(B), tuple(a), tuple(b))


# --------------------------------------------------------------------------
# gauge-invariant comparison
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PathInvariant:
    path: tuple[int, ...]
    source: int
    target: int
    value: np.ndarray


def path_invariants(data: ADHMData, max_len: int = 3) -> list[PathInvariant]:
    """All ``b_j B_{h_k} ... B_{h_1} a_i`` over quiver paths of length ``<= max_len``."""
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    d = data.diagram
    out = []
    for i in d.vertices:
        if data.w[i] == 0:
            continue
        stack = [((), i, data.a[i])]
        while stack:
            path, here, x = stack.pop()
            if data.w[here]:
                out.append(PathInvariant(path, i, here, data.b[here] @ x))
            if len(path) < max_len:
                for h in d.arrows_out_of[here]:
                    stack.append((path + (h,), d.vin(h), data.B[h] @ x))
    out.sort(key=lambda p: (p.source, len(p.path), p.path))
    return out


def invariant_distance(d1: ADHMData, d2: ADHMData, max_len: int = 3) -> float:
    p1, p2 = path_invariants(d1, max_len), path_invariants(d2, max_len)
    if not p1:
        return 0.0
    num = sum(np.linalg.norm(x.value - y.value) ** 2 for x, y in zip(p1, p2))
    scale = max(1.0, sum(np.linalg.norm(x.value) ** 2 for x in p1))
    return float(np.sqrt(num / scale))


def _procrustes(n_mat: np.ndarray) -> np.ndarray:
    """Unitary ``g`` maximizing ``Re tr(g N)``."""
    u, _, vh = np.linalg.svd(n_mat)
    return _dag(vh) @ _dag(u)


def _align_sweeps(x1: ADHMData, x2: ADHMData, g: list[np.ndarray], sweeps: int) -> list[np.ndarray]:
    d = x1.diagram
    for _ in range(sweeps):
        moved = 0.0
        for i in d.vertices:
            if x1.v[i] == 0:
                continue
            n_mat = x1.a[i] @ _dag(x2.a[i]) + _dag(x1.b[i]) @ x2.b[i]
            for h in d.arrows_into[i]:
                n_mat = n_mat + x1.B[h] @ _dag(g[d.vout(h)]) @ _dag(x2.B[h])
            for h in d.arrows_out_of[i]:
                n_mat = n_mat + _dag(g[d.vin(h)] @ x1.B[h]) @ x2.B[h]
            gi = _procrustes(n_mat)
            moved = max(moved, float(np.linalg.norm(gi - g[i])))
            g[i] = gi
        # Newton finishes once the block sweeps settle
        if moved < 1e-9:
            break
    return g


def _align_newton(x1: ADHMData, x2: ADHMData, g: list[np.ndarray], iters: int = 30) -> list[np.ndarray]:
    """Gauss-Newton on ``|exp(iK) g . x1 - x2|`` over Hermitian ``K``."""
    v = x1.v
    nk = sum(n * n for n in v)
    if nk == 0:
        return g
    basis = _block_diag_batch([1j * _herm_basis(n) for n in v], v)
    target = x2.to_vector()
    for _ in range(iters):
        cur = gauge_act(GaugeElement(tuple(g)), x1)
        r = cur.to_vector() - target
        nr = np.linalg.norm(r)
        if nr < 1e-15 * max(1.0, np.linalg.norm(target)):
            break
        dB, da, db = _gauge_infinitesimal(cur, basis)
        jac = _cplx_coords([*dB, *da, *db]).reshape(nk, -1).T
        step = np.linalg.lstsq(jac, -np.concatenate([r.real, r.imag]), rcond=1e-12)[0]
        ks = [np.tensordot(step, basis[i] / 1j, axes=(0, 0)) for i in range(len(v))]
        trial = []
        for k, gi in zip(ks, g):
            if k.size == 0:
                trial.append(gi)
                continue
            lam, u = np.linalg.eigh(k)
            trial.append((u * np.exp(1j * lam)) @ _dag(u) @ gi)
        new = gauge_act(GaugeElement(tuple(trial)), x1)
        if np.linalg.norm(new.to_vector() - target) >= nr:
            break
        g = trial
    return g


@dataclass(frozen=True)
class Alignment:
    distance: float
    gauge: GaugeElement


def align(x1: ADHMData, x2: ADHMData, restarts: int = 6, seed: int = 0, sweeps: int = 300) -> Alignment:
    """Best unitary ``g`` found for ``min |g.x1 - x2|``; distance relative to ``max(1, |x2|)``."""
    if x1.v != x2.v or x1.w != x2.w:
        raise ValueError("cannot align data with different dimension vectors")
    rng = np.random.default_rng(seed)
    scale = max(1.0, x2.norm())
    best = None
    for k in range(restarts + 1):
        g0 = GaugeElement.identity(x1.v) if k == 0 else random_unitary_gauge(x1.v, rng)
        g = _align_sweeps(x1, x2, list(g0.g), sweeps)
        g = _align_newton(x1, x2, g)
        dist = np.linalg.norm(gauge_act(GaugeElement(tuple(g)), x1).to_vector() - x2.to_vector()) / scale
        if best is None or dist < best.distance:
            best = Alignment(float(dist), GaugeElement(tuple(g), True))
        if best.distance < 1e-13:
            break
    return best


@dataclass(frozen=True)
class Comparison:
    status: str  # "equal", "different" or "inconclusive"
    invariant_distance: float
    align_distance: float


def compare_moduli(x1: ADHMData, x2: ADHMData, tol: float = 1e-6, max_len: int = 3) -> Comparison:
    inv = invariant_distance(x1, x2, max_len)
    if inv > tol:
        return Comparison("different", inv, float("nan"))
    al = align(x1, x2).distance
    return Comparison("equal" if al <= tol else "inconclusive", inv, al)


def moduli_equal(x1: ADHMData, x2: ADHMData, tol: float = 1e-6, max_len: int = 3) -> bool:
    """Equality of points of the quotient by prod U(V_i); inconclusive counts as unequal."""
    if x1.v != x2.v or x1.w != x2.w:
        return False
    return compare_moduli(x1, x2, tol, max_len).status == "equal"
