"""Weyl manifolds in a single chart and their connections at a point.

A :class:`WeylManifold` stores the metric ``g_ij``, the Weyl 1-form ``T_k``
and the 1-form ``S_k`` of the semi-symmetric non-metric connection as
symbolic fields. Everything else is assembled numerically at a point into a
:class:`Frame`: the inverse metric, the Levi-Civita symbols, the Weyl
connection ``Gamma^i_jk`` and the semi-symmetric connection ``Gammabar^i_jk``
together with their exact first partial derivatives.

Index conventions used throughout the package:

* ``dg[i, j, k] = d_k g_ij`` (derivative index last).
* ``gamma[i, j, k] = Gamma^i_jk``; the covariant derivative of a covector is
  ``V_{i,j} = d_j V_i - Gamma^r_ij V_r``.
* ``dgamma[i, j, k, l] = d_l Gamma^i_jk``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .expr import DomainError, ScalarField, constant, differentiate, evaluate, parse
from .tensor import LOW, UP, Tensor, antisymmetrize_pair, invert_metric, kronecker

__all__ = [
    "WeylManifold",
    "Frame",
    "frame_at",
    "levi_civita",
    "weyl_connection",
    "ssnm_connection",
    "torsion",
    "torsion_formula",
    "compatibility_residual",
    "gauge_rescale",
    "covariant_derivative_covector",
    "bracket",
]


@dataclass(frozen=True, eq=False)
class WeylManifold:
    """Chart data ``(g_ij, T_k, S_k)`` of a Weyl manifold with a semi-symmetric connection.

    ``ssnm_offset`` is a constant array added to ``Gammabar^i_jk``; it is
    ``None`` for every honest manifold and exists for fault injection.
    ``positive`` lists fields that must be strictly positive wherever a frame
    is built (gauge functions, for instance).
    """

    coords: tuple[str, ...]
    g: tuple[tuple[ScalarField, ...], ...]
    T: tuple[ScalarField, ...]
    S: tuple[ScalarField, ...]
    name: str = ""
    ssnm_offset: np.ndarray | None = None
    positive: tuple[ScalarField, ...] = ()
    _dg: tuple = field(init=False, repr=False)
    _ddg: tuple = field(init=False, repr=False)
    _dT: tuple = field(init=False, repr=False)
    _dS: tuple = field(init=False, repr=False)

    def __post_init__(self):
        n = len(self.coords)
        if n < 2:
            raise ValueError("dimension must be at least 2")
        if len(self.g) != n or any(len(row) != n for row in self.g):
            raise ValueError(f"metric must be {n}x{n}")
        if len(self.T) != n or len(self.S) != n:
            raise ValueError(f"1-forms must have {n} components")
        for i in range(n):
            for j in range(i):
                if self.g[i][j] is not self.g[j][i]:
                    raise ValueError(f"metric is not symmetric at ({i}, {j}); use WeylManifold.build")
        for f in [*self.T, *self.S, *self.positive] + [e for row in self.g for e in row]:
            if f.nvars != n:
                raise ValueError("field dimension does not match the chart")
        if self.ssnm_offset is not None:
            off = np.array(self.ssnm_offset, dtype=float)
            if off.shape != (n, n, n):
                raise ValueError("ssnm_offset must have shape (n, n, n)")
            off.setflags(write=False)
            object.__setattr__(self, "ssnm_offset", off)

        # Exact derivative fields, shared across mirrored metric entries.
        dg_cache: dict[tuple[int, int], tuple] = {}
        for i in range(n):
            for j in range(i, n):
                first = tuple(differentiate(self.g[i][j], k) for k in range(n))
                second = tuple(tuple(differentiate(f, l) for l in range(n)) for f in first)
                dg_cache[i, j] = (first, second)
        key = lambda i, j: (min(i, j), max(i, j))  # noqa: E731
        object.__setattr__(self, "_dg", tuple(tuple(dg_cache[key(i, j)][0] for j in range(n)) for i in range(n)))
        object.__setattr__(self, "_ddg", tuple(tuple(dg_cache[key(i, j)][1] for j in range(n)) for i in range(n)))
        object.__setattr__(self, "_dT", tuple(tuple(differentiate(f, j) for j in range(n)) for f in self.T))
        object.__setattr__(self, "_dS", tuple(tuple(differentiate(f, j) for j in range(n)) for f in self.S))

    @property
    def n(self) -> int:
        return len(self.coords)

    @classmethod
    def build(
        cls,
        coords: Sequence[str],
        metric: Sequence[Sequence[ScalarField | str]],
        T: Sequence[ScalarField | str] | None = None,
        S: Sequence[ScalarField | str] | None = None,
        name: str = "",
    ) -> WeylManifold:
        """Construct from fields or expression strings; the upper triangle of ``metric`` is used."""
        coords = tuple(coords)
        n = len(coords)

        def as_field(v) -> ScalarField:
            if isinstance(v, ScalarField):
                return v
            if isinstance(v, (int, float)):
                return constant(v, n, coords)
            return parse(v, coords)

        upper = {(i, j): as_field(metric[i][j]) for i in range(n) for j in range(i, n)}
        g = tuple(tuple(upper[min(i, j), max(i, j)] for j in range(n)) for i in range(n))
        T = tuple(as_field(v) for v in (T if T is not None else ["0"] * n))
        S = tuple(as_field(v) for v in (S if S is not None else ["0"] * n))
        return cls(coords, g, T, S, name=name)

    def replace(self, **changes) -> WeylManifold:
        kw = dict(
            coords=self.coords,
            g=self.g,
            T=self.T,
            S=self.S,
            name=self.name,
            ssnm_offset=self.ssnm_offset,
            positive=self.positive,
        )
        kw.update(changes)
        return WeylManifold(**kw)

    def with_fault(self, component: tuple[int, int, int], delta: float = 1e-3) -> WeylManifold:
        """Copy whose ``Gammabar^i_jk`` field at ``component`` is shifted by ``delta``."""
        off = np.zeros((self.n,) * 3) if self.ssnm_offset is None else np.array(self.ssnm_offset)
        off[tuple(component)] += delta
        return self.replace(ssnm_offset=off)

    def digest(self) -> dict:
        """Dimension plus SHA-256 of every defining expression."""

        def h(f: ScalarField) -> str:
            return hashlib.sha256(f.to_string().encode()).hexdigest()[:16]

        n = self.n
        return {
            "dimension": n,
            "coordinates": list(self.coords),
            "metric": [[h(self.g[i][j]) for j in range(n)] for i in range(n)],
            "weyl_form": [h(f) for f in self.T],
            "connection_form": [h(f) for f in self.S],
            "fault": None if self.ssnm_offset is None else np.argwhere(self.ssnm_offset != 0).tolist(),
        }


def _ev(fields, x) -> np.ndarray:
    if isinstance(fields, ScalarField):
        return evaluate(fields, x)
    return np.array([_ev(f, x) for f in fields], dtype=float)


@dataclass(frozen=True, eq=False)
class Frame:
    """Everything about a manifold that is needed at one point, as plain arrays.

    Arrays are kept raw (not :class:`Tensor`) because the curvature code does
    its index gymnastics with ``einsum``; the accessor properties wrap them.
    """

    point: tuple[float, ...]
    n: int
    g: np.ndarray
    g_inv: np.ndarray
    cond: float
    dg: np.ndarray
    ddg: np.ndarray
    T: np.ndarray
    dT: np.ndarray
    S: np.ndarray
    dS: np.ndarray
    S_up: np.ndarray
    gamma_lc: np.ndarray
    gamma: np.ndarray
    gamma_bar: np.ndarray
    dgamma: np.ndarray
    dgamma_bar: np.ndarray

    @property
    def delta(self) -> np.ndarray:
        return np.eye(self.n)

    @property
    def metric(self) -> Tensor:
        return Tensor(self.g, LOW + LOW)

    @property
    def metric_inv(self) -> Tensor:
        return Tensor(self.g_inv, UP + UP)


def frame_at(m: WeylManifold, point: Sequence[float]) -> Frame:
    """Evaluate ``m`` and its connections at ``point``.

    Raises :class:`~weylcalc.expr.DomainError` if a field cannot be evaluated
    there and :class:`~weylcalc.tensor.SingularMetricError` if ``g_ij`` is
    singular.
    """
    n = m.n
    x = tuple(float(v) for v in point)
    if len(x) != n:
        raise ValueError(f"point has {len(x)} coordinates, manifold has dimension {n}")
    for f in m.positive:
        if evaluate(f, x) <= 0.0:
            raise DomainError("gauge function must be positive", f.to_string())

    g = _ev(m.g, x)
    dg = _ev(m._dg, x)
    ddg = _ev(m._ddg, x)
    T = _ev(m.T, x)
    dT = _ev(m._dT, x)
    S = _ev(m.S, x)
    dS = _ev(m._dS, x)
    gi_t, cond = invert_metric(Tensor(g, LOW + LOW))
    gi = gi_t.c
    delta = np.eye(n)

    lc_low = 0.5 * (np.einsum("mkj->mjk", dg) + dg - np.einsum("jkm->mjk", dg))
    w_low = np.einsum("mj,k->mjk", g, T) + np.einsum("mk,j->mjk", g, T) - np.einsum("jk,m->mjk", g, T)
    gamma_low = lc_low - w_low
    gamma_lc = np.einsum("im,mjk->ijk", gi, lc_low)
    gamma = np.einsum("im,mjk->ijk", gi, gamma_low)

    dlc_low = 0.5 * (np.einsum("mkjl->mjkl", ddg) + ddg - np.einsum("jkml->mjkl", ddg))
    dw_low = (
        np.einsum("mjl,k->mjkl", dg, T)
        + np.einsum("mj,kl->mjkl", g, dT)
        + np.einsum("mkl,j->mjkl", dg, T)
        + np.einsum("mk,jl->mjkl", g, dT)
        - np.einsum("jkl,m->mjkl", dg, T)
        - np.einsum("jk,ml->mjkl", g, dT)
    )
    dgi = -np.einsum("ia,abl,bm->iml", gi, dg, gi)
    dgamma = np.einsum("iml,mjk->ijkl", dgi, gamma_low) + np.einsum("im,mjkl->ijkl", gi, dlc_low - dw_low)

    S_up = gi @ S
    dS_up = np.einsum("iml,m->il", dgi, S) + gi @ dS
    gamma_bar = gamma + np.einsum("ik,j->ijk", delta, S) - np.einsum("jk,i->ijk", g, S_up)
    dgamma_bar = (
        dgamma
        + np.einsum("ik,jl->ijkl", delta, dS)
        - np.einsum("jkl,i->ijkl", dg, S_up)
        - np.einsum("jk,il->ijkl", g, dS_up)
    )
    if m.ssnm_offset is not None:
        gamma_bar = gamma_bar + m.ssnm_offset

    return Frame(
        point=x,
        n=n,
        g=g,
        g_inv=gi,
        cond=cond,
        dg=dg,
        ddg=ddg,
        T=T,
        dT=dT,
        S=S,
        dS=dS,
        S_up=S_up,
        gamma_lc=gamma_lc,
        gamma=gamma,
        gamma_bar=gamma_bar,
        dgamma=dgamma,
        dgamma_bar=dgamma_bar,
    )


def levi_civita(m: WeylManifold, p: Sequence[float]) -> Tensor:
    """Christoffel symbols ``{i jk}`` of ``g_ij``."""
    return Tensor(frame_at(m, p).gamma_lc, "ull")


def weyl_connection(m: WeylManifold, p: Sequence[float]) -> Tensor:
    """``Gamma^i_jk = {i jk} - g^im (g_mj T_k + g_mk T_j - g_jk T_m)``."""
    return Tensor(frame_at(m, p).gamma, "ull")


def ssnm_connection(m: WeylManifold, p: Sequence[float]) -> Tensor:
    """``Gammabar^i_jk = Gamma^i_jk + delta^i_k S_j - g_jk S^i``."""
    return Tensor(frame_at(m, p).gamma_bar, "ull")


def torsion(gamma_bar: Tensor) -> Tensor:
    """``T^i_jk = Gammabar^i_jk - Gammabar^i_kj``."""
    c = gamma_bar.c
    return Tensor(c - np.swapaxes(c, 1, 2), gamma_bar.variance)


def torsion_formula(S: np.ndarray) -> Tensor:
    """Closed form ``delta^i_k S_j - delta^i_j S_k`` of the semi-symmetric torsion."""
    d = np.eye(len(S))
    return Tensor(np.einsum("ik,j->ijk", d, S) - np.einsum("ij,k->ijk", d, S), "ull")


def compatibility_residual(m: WeylManifold, p: Sequence[float], gamma: np.ndarray | None = None) -> Tensor:
    """``d_k g_ij - Gamma^r_ik g_rj - Gamma^r_jk g_ir - 2 g_ij T_k``; vanishes for the Weyl connection.

    ``gamma`` overrides the connection (to demonstrate a non-vanishing residual).
    """
    fr = frame_at(m, p)
    return Tensor(_compatibility(fr, fr.gamma if gamma is None else np.asarray(gamma)), "lll")


def _compatibility(fr: Frame, gamma: np.ndarray) -> np.ndarray:
    return (
        fr.dg
        - np.einsum("rik,rj->ijk", gamma, fr.g)
        - np.einsum("rjk,ir->ijk", gamma, fr.g)
        - 2.0 * np.einsum("ij,k->ijk", fr.g, fr.T)
    )


def gauge_rescale(m: WeylManifold, lam: ScalarField | str) -> WeylManifold:
    """Gauge change ``g -> lambda^2 g``, ``T_k -> T_k + d_k ln(lambda)``; ``S`` is unchanged."""
    if isinstance(lam, str):
        lam = parse(lam, m.coords)
    n = m.n
    lam2 = lam**2
    upper = {(i, j): lam2 * m.g[i][j] for i in range(n) for j in range(i, n)}
    g = tuple(tuple(upper[min(i, j), max(i, j)] for j in range(n)) for i in range(n))
    T = tuple(m.T[k] + differentiate(lam, k) / lam for k in range(n))
    return m.replace(g=g, T=T, positive=m.positive + (lam,), name=f"{m.name}|gauge" if m.name else "gauge")


def covariant_derivative_covector(
    m: WeylManifold,
    p: Sequence[float],
    field: Sequence[ScalarField],
    gamma: Tensor | np.ndarray | None = None,
) -> Tensor:
    """``V_{i,j} = d_j V_i - Gamma^r_ij V_r`` as a tensor indexed ``[i, j]``.

    Defaults to the symmetric Weyl connection.
    """
    x = tuple(float(v) for v in p)
    if gamma is None:
        gamma = frame_at(m, x).gamma
    elif isinstance(gamma, Tensor):
        gamma = gamma.c
    n = m.n
    V = _ev(field, x)
    dV = np.array([[evaluate(differentiate(field[i], j), x) for j in range(n)] for i in range(n)])
    return Tensor(_covd(dV, V, gamma), "ll")


def _covd(dV: np.ndarray, V: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    return dV - np.einsum("rij,r->ij", gamma, V)


def bracket(cov: np.ndarray) -> np.ndarray:
    """Turn ``cov[i, j] = V_{i,j}`` into ``B[a, b] = nabla_[a V_b] = 1/2 (nabla_a V_b - nabla_b V_a)``."""
    return antisymmetrize_pair(Tensor(cov.T, "ll"), 0, 1).c


def weyl_frame_parts(fr: Frame) -> tuple[np.ndarray, np.ndarray]:
    """``(T_{i,j}, S_{i,j})`` with respect to the symmetric Weyl connection."""
    return _covd(fr.dT, fr.T, fr.gamma), _covd(fr.dS, fr.S, fr.gamma)
