"""Reflection functors on the complex moment-map level set.

At a vertex ``i`` with ``zeta_C,i != 0`` write ``E_i = (+)_{vin(h)=i} V_vout(h) (+) W_i``
with ``tau_i = (eps(h) B_h, a_i): E_i -> V_i`` and ``sigma_i = (B_hbar, b_i): V_i -> E_i``.
Then ``tau_i sigma_i = zeta_C,i`` splits ``E_i = im sigma_i (+) ker tau_i`` and the
reflected point lives on ``V_i' = ker tau_i``: the inclusion is the new ``sigma``
and ``-zeta_C,i`` times the projection along ``im sigma_i`` is the new ``tau``.
"""
from __future__ import annotations

from dataclasses import replace
from typing import Sequence

import numpy as np

from .adhm import ADHMData, kempf_ness, complex_moment_map
from .diagram import AffineDiagram
from .weyl import Parameter, simple_reflection_param


class ReflectionError(ValueError):
    """Inadmissible reflection: vanishing level, input off the level set, or genericity failure."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step


def reflected_dimension(v, w, i: int, diagram: AffineDiagram) -> np.ndarray:
    """``s_i * v``: only component ``i`` changes, to ``sum_j a_ij v_j + w_i - v_i``."""
    v = np.array(v, dtype=np.int64)
    v[i] = diagram.adjacency[i] @ v + w[i] - v[i]
    return v


def dimension_transport(v, w, word: Sequence[int], diagram: AffineDiagram) -> np.ndarray:
    """Compose :func:`reflected_dimension` along ``word``; raises if any step goes negative."""
    v = np.array(v, dtype=np.int64)
    for k, i in enumerate(word):
        v = reflected_dimension(v, w, i, diagram)
        if v[i] < 0:
            raise ReflectionError(f"negative dimension {v[i]} at vertex {i}", k)
    return v


def _slots(data: ADHMData, i: int):
    d = data.diagram
    hs = d.arrows_into[i]
    sizes = [data.v[d.vout(h)] for h in hs] + [data.w[i]]
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    return hs, offsets


def tau_sigma(data: ADHMData, i: int) -> tuple[np.ndarray, np.ndarray]:
    d = data.diagram
    hs, _ = _slots(data, i)
    tau = np.hstack([d.eps(h) * data.B[h] for h in hs] + [data.a[i]])
    sigma = np.vstack([data.B[d.bar(h)] for h in hs] + [data.b[i]])
    return tau, sigma


def simple_reflection_functor(data: ADHMData, i: int, zeta: Parameter, tol: float = 1e-8):
    """Reflect at vertex ``i``; returns ``(data', s_i zeta)`` with ``mu_C(data') = (s_i zeta)_C``."""
    d = data.diagram
    if i == 0:
        raise ReflectionError("reflection at vertex 0 is not supported")
    z = complex(zeta.c[i])
    if abs(z) <= 1e-12 * max(1.0, float(np.max(np.abs(zeta.c)))):
        raise ReflectionError(f"zeta_C at vertex {i} vanishes; reflection inadmissible")
    tau, sigma = tau_sigma(data, i)
    vi, e = data.v[i], tau.shape[1]
    err = np.linalg.norm(tau @ sigma - z * np.eye(vi)) if vi else 0.0
    if err > tol * max(1.0, abs(z)):
        raise ReflectionError(f"tau sigma differs from zeta_C Id by {err:.3e}")
    new_vi = e - vi
    if new_vi < 0:
        raise ReflectionError(f"negative target dimension {new_vi}")
    if vi:
        _, _, vh = np.linalg.svd(tau)
        kernel = vh[vi:].conj().T
        proj = np.eye(e) - (sigma @ tau) / z
    else:
        kernel = np.eye(e, dtype=complex)
        proj = np.eye(e, dtype=complex)
    new_tau = -z * (kernel.conj().T @ proj)
    hs, off = _slots(data, i)
    B = list(data.B)
    for k, h in enumerate(hs):
        sl = slice(off[k], off[k + 1])
        B[d.bar(h)] = kernel[sl, :]
        B[h] = d.eps(h) * new_tau[:, sl]
    a = list(data.a)
    b = list(data.b)
    a[i] = new_tau[:, off[-2] :]
    b[i] = kernel[off[-2] :, :]
    v = list(data.v)
    v[i] = new_vi
    out = replace(data, v=tuple(v), B=tuple(B), a=tuple(a), b=tuple(b))
    return out, simple_reflection_param(zeta, i, d)


def parameter_path(zeta: Parameter, word: Sequence[int], diagram: AffineDiagram) -> list[Parameter]:
    path = [zeta]
    for i in word:
        path.append(simple_reflection_param(path[-1], i, diagram))
    return path


def check_genericity(zeta: Parameter, word: Sequence[int], diagram: AffineDiagram, rel: float = 1e-8) -> None:
    scale = max(1.0, float(np.max(np.abs(zeta.c), initial=0.0)))
    for k, (i, z) in enumerate(zip(word, parameter_path(zeta, word, diagram))):
        if abs(z.c[i]) <= rel * scale:
            raise ReflectionError(f"zeta_C at vertex {i} vanishes before this step", k)


def w0_functor(data: ADHMData, zeta: Parameter, word: Sequence[int], rebalance: bool = True,
               tol: float = 1e-8, kn_tol: float = 1e-12):
    """Fold simple reflections along ``word`` (first letter first), then restore ``mu_R`` once."""
    d = data.diagram
    check_genericity(zeta, word, d)
    x = data
    for k, i in enumerate(word):
        try:
            x, zeta = simple_reflection_functor(x, i, zeta, tol)
        except ReflectionError as exc:
            raise ReflectionError(str(exc), k) from None
    if rebalance:
        x = kempf_ness(x, zeta.re, kn_tol)
    return x, zeta


def functor_for_degenerate(data: ADHMData, zeta: Parameter) -> ADHMData:
    """At ``zeta = 0`` the functor for w0 is the identity."""
    if not zeta.is_zero():
        raise ReflectionError("the degenerate functor needs zeta = 0")
    return data


def complex_residual_at(data: ADHMData, zeta_c) -> float:
    mc = complex_moment_map(data)
    return float(np.sqrt(sum(np.linalg.norm(m - zeta_c[i] * np.eye(len(m))) ** 2 for i, m in enumerate(mc))))
