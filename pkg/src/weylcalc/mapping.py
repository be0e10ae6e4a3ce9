"""Conformal mappings ``g* = g``, ``T* = T - P``, ``S* = S - Q`` and their transformation laws.

The target manifold is built concretely and pushed through the same frame
and curvature code as the source, so every transformation law checked here
compares two independent computations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .connection import Frame, WeylManifold, _covd, _ev, bracket, frame_at
from .curvature import Curvatures, _gg_up, curvatures, pattern_up
from .expr import ScalarField, differentiate, parse
from .tensor import max_abs

__all__ = [
    "ConformalMapping",
    "MappingFrame",
    "NotConcircularError",
    "apply_mapping",
    "mapping_frame",
    "mapping_residuals",
    "is_concircular",
    "concircular_invariance_residual",
]

DEFAULT_TOL = 1e-9


class NotConcircularError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ConformalMapping:
    """``P_j = T_j - T*_j`` and ``Q_j = S_j - S*_j``."""

    P: tuple[ScalarField, ...]
    Q: tuple[ScalarField, ...]

    def __post_init__(self):
        if len(self.P) != len(self.Q):
            raise ValueError("P and Q must have the same length")
        object.__setattr__(self, "_dP", tuple(tuple(differentiate(f, j) for j in range(f.nvars)) for f in self.P))
        object.__setattr__(self, "_dQ", tuple(tuple(differentiate(f, j) for j in range(f.nvars)) for f in self.Q))

    @property
    def n(self) -> int:
        return len(self.P)

    @classmethod
    def build(cls, coords: Sequence[str], P: Sequence[str | ScalarField], Q: Sequence[str | ScalarField]):
        conv = lambda v: v if isinstance(v, ScalarField) else parse(v, coords)  # noqa: E731
        return cls(tuple(conv(v) for v in P), tuple(conv(v) for v in Q))

    def inverse(self) -> ConformalMapping:
        return ConformalMapping(tuple(-f for f in self.P), tuple(-f for f in self.Q))


def apply_mapping(m: WeylManifold, mp: ConformalMapping) -> WeylManifold:
    """Target manifold ``(g, T - P, S - Q)``.

    A fault offset on the source is deliberately not carried over: the target
    is an honest manifold, so a corrupted source shows up in the laws.
    """
    if mp.n != m.n:
        raise ValueError("mapping dimension does not match manifold")
    T = tuple(t - p for t, p in zip(m.T, mp.P))
    S = tuple(s - q for s, q in zip(m.S, mp.Q))
    return m.replace(T=T, S=S, ssnm_offset=None, name=f"{m.name}*" if m.name else "target")


@dataclass(frozen=True)
class MappingFrame:
    """Deformation tensors of a mapping at one point (all indexed ``[i, j]``)."""

    P: np.ndarray
    Q: np.ndarray
    P_ij: np.ndarray
    Q_ij: np.ndarray
    P_under: np.ndarray
    Q_under: np.ndarray
    W_ij: np.ndarray
    phi: float
    PQ: float  # g^sr P_s Q_r
    BP: np.ndarray  # nabla_[a P_b]


def _mapping_frame(fr: Frame, mp: ConformalMapping) -> MappingFrame:
    x = fr.point
    g, gi = fr.g, fr.g_inv
    n = fr.n
    P, Q = _ev(mp.P, x), _ev(mp.Q, x)
    P_cov = _covd(_ev(mp._dP, x), P, fr.gamma)
    Q_cov = _covd(_ev(mp._dQ, x), Q, fr.gamma)
    P_ij = P_cov - np.outer(P, P) + 0.5 * g * (P @ gi @ P)
    Q_ij = Q_cov + np.outer(Q, Q) - 0.5 * g * (Q @ gi @ Q)
    P_under = P_ij - np.outer(P, fr.S)
    Q_under = Q_ij - np.outer(Q, fr.S)
    W = P_under - Q_under + np.outer(P, Q) + np.outer(Q, P)
    phi = float(np.einsum("ij,ij->", gi, W)) / n
    return MappingFrame(P, Q, P_ij, Q_ij, P_under, Q_under, W, phi, float(P @ gi @ Q), bracket(P_cov))


def mapping_frame(m: WeylManifold, mp: ConformalMapping, p: Sequence[float]) -> MappingFrame:
    """``P_ij``, ``Q_ij``, their underlined forms and ``W_ij`` at ``p``.

    ``phi`` is the trace estimate ``g^ij W_ij / n``.
    """
    return _mapping_frame(frame_at(m, p), mp)


def _concircular_residual(mf: MappingFrame, g: np.ndarray) -> float:
    return max_abs(mf.W_ij - mf.phi * g)


def mapping_residuals(
    src: Curvatures,
    dst: Curvatures,
    mp: ConformalMapping,
) -> dict[str, np.ndarray | float]:
    """Residuals of every transformation law at one point.

    ``src``/``dst`` are the curvature bundles of the source and of
    :func:`apply_mapping`'s target at the same point. The concircular laws are
    returned unconditionally; they only mean something when the mapping is
    concircular, which the caller decides over all sample points.
    """
    fs, ft = src.frame, dst.frame
    g, gi, n = fs.g, fs.g_inv, fs.n
    d = np.eye(n)
    mf = _mapping_frame(fs, mp)
    P, Q = mf.P, mf.Q
    U = P - Q

    def lower_change(A, B):
        return np.einsum("ij,k->ijk", d, A) + np.einsum("ik,j->ijk", d, B) - np.einsum("jk,i->ijk", g, gi @ B)

    delta_BP = 2 * np.einsum("hi,jk->hijk", d, mf.BP)
    P_wedge_S = 0.5 * (np.outer(P, fs.S) - np.outer(fs.S, P))
    gg = _gg_up(g)
    R_bar_star = dst.bar.R_up

    out: dict[str, np.ndarray | float] = {
        "weyl_connection_change": ft.gamma - (fs.gamma + lower_change(P, P)),
        "weyl_curvature_change": dst.sym.R_up - (src.sym.R_up + delta_BP + pattern_up(mf.P_ij, g, gi)),
        "ssnm_connection_change": ft.gamma_bar - (fs.gamma_bar + lower_change(P, U)),
        "ssnm_curvature_change": R_bar_star
        - (
            src.bar.R_up
            + 2 * np.einsum("hi,jk->hijk", d, mf.BP + P_wedge_S)
            + pattern_up(mf.W_ij, g, gi)
            - 2 * mf.PQ * gg
        ),
        "ssnm_curvature_change_derived": R_bar_star
        - (
            src.bar.R_up
            + delta_BP
            + pattern_up(mf.W_ij - np.outer(fs.S, U) + (fs.S @ gi @ U) * g, g, gi)
            - 2 * mf.PQ * gg
        ),
        "deformation_definitions": max(
            max_abs(mf.P_under - (mf.P_ij - np.outer(P, fs.S))),
            max_abs(mf.Q_under - (mf.Q_ij - np.outer(Q, fs.S))),
        ),
    }
    shift = mf.phi - mf.PQ
    out["concircularity"] = _concircular_residual(mf, g)
    out["concircular_curvature_change"] = R_bar_star - (src.bar.R_up + 2 * shift * gg)
    out["concircular_ricci_change"] = dst.bar.ricci - (src.bar.ricci + 2 * (n - 1) * shift * g)
    out["concircular_scalar_change"] = dst.bar.scalar - (src.bar.scalar + 2 * n * (n - 1) * shift)
    out["concircular_invariance"] = dst.bar.concircular_up - src.bar.concircular_up
    return out


def is_concircular(
    m: WeylManifold,
    mp: ConformalMapping,
    points: Iterable[Sequence[float]],
    tol: float = DEFAULT_TOL,
) -> tuple[bool, list[float]]:
    """Whether ``W_ij = phi g_ij`` at every point, and the pointwise ``phi``."""
    phis, worst = [], 0.0
    for p in points:
        fr = frame_at(m, p)
        mf = _mapping_frame(fr, mp)
        phis.append(mf.phi)
        worst = max(worst, _concircular_residual(mf, fr.g))
    if not phis:
        raise ValueError("need at least one point")
    return worst <= tol, phis


def concircular_invariance_residual(
    m: WeylManifold,
    mp: ConformalMapping,
    points: Sequence[Sequence[float]],
    tol: float = DEFAULT_TOL,
    detail: bool = False,
):
    """``max |Zbar*^h_ijk - Zbar^h_ijk|`` over ``points`` for a concircular mapping.

    With ``detail=True`` returns a dict that also holds the curvature, Ricci
    and scalar shift laws.
    """
    ok, _ = is_concircular(m, mp, points, tol)
    if not ok:
        raise NotConcircularError("mapping is not concircular at the given points")
    target = apply_mapping(m, mp)
    keys = (
        "concircular_invariance",
        "concircular_curvature_change",
        "concircular_ricci_change",
        "concircular_scalar_change",
    )
    worst = dict.fromkeys(keys, 0.0)
    for p in points:
        res = mapping_residuals(curvatures(frame_at(m, p)), curvatures(frame_at(target, p)), mp)
        for k in keys:
            worst[k] = max(worst[k], max_abs(res[k]))
    return worst if detail else worst["concircular_invariance"]
