"""Curvature of the Weyl connection and of the semi-symmetric connection.

Conventions (fixed, see the package README for why):

* ``R^h_ijk = d_j Gamma^h_ik - d_k Gamma^h_ij + Gamma^h_rj Gamma^r_ik - Gamma^h_rk Gamma^r_ij``
* Ricci ``R_ij = R^k_ijk``; scalar ``R = g^ij R_ij``; lowered ``R_mijk = g_mh R^h_ijk``
* brackets carry a factor 1/2: ``nabla_[k T_j] = 1/2 (nabla_k T_j - nabla_j T_k)``

Barred quantities (``Rbar``, ``Zbar``...) belong to the semi-symmetric
connection; unbarred ones to the symmetric Weyl connection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .connection import Frame, bracket, weyl_frame_parts
from .tensor import Tensor

__all__ = [
    "DimensionError",
    "CurvatureSet",
    "Curvatures",
    "riemann",
    "s_tensor",
    "ricci_and_scalar",
    "conformal_tensor",
    "concircular_tensor",
    "projective_tensor",
    "curvatures",
    "curvature_properties",
    "relation_residuals",
    "pattern_up",
    "pattern_low",
]


class DimensionError(ValueError):
    pass


def _riemann(gamma: np.ndarray, dgamma: np.ndarray) -> np.ndarray:
    # dgamma[h, i, k, j] = d_j Gamma^h_ik
    return (
        np.einsum("hikj->hijk", dgamma)
        - dgamma
        + np.einsum("hrj,rik->hijk", gamma, gamma)
        - np.einsum("hrk,rij->hijk", gamma, gamma)
    )


def riemann(frame: Frame, which: str = "symmetric") -> Tensor:
    """``R^h_ijk`` of the symmetric (``"symmetric"``) or semi-symmetric (``"ssnm"``) connection."""
    if which == "symmetric":
        return Tensor(_riemann(frame.gamma, frame.dgamma), "ulll")
    if which == "ssnm":
        return Tensor(_riemann(frame.gamma_bar, frame.dgamma_bar), "ulll")
    raise ValueError(f"which must be 'symmetric' or 'ssnm', got {which!r}")


def _s_tensor(fr: Frame, S_cov: np.ndarray) -> np.ndarray:
    S = fr.S
    return S_cov - np.outer(S, S) + 0.5 * fr.g * (S @ fr.S_up)


def s_tensor(frame: Frame) -> Tensor:
    """``S_ij = S_{i,j} - S_i S_j + 1/2 g_ij g^kr S_k S_r`` (``S_{i,j}`` w.r.t. the Weyl connection)."""
    _, S_cov = weyl_frame_parts(frame)
    return Tensor(_s_tensor(frame, S_cov), "ll")


def ricci_and_scalar(R_up: Tensor, g: Tensor, g_inv: Tensor) -> tuple[Tensor, float]:
    """``R_ij = R^k_ijk`` and ``R = g^ij R_ij``."""
    if R_up.variance != "ulll":
        raise ValueError(f"expected R^h_ijk, got variance {R_up.variance!r}")
    ric = np.einsum("kijk->ij", R_up.c)
    return Tensor(ric, "ll"), float(np.einsum("ij,ij->", g_inv.c, ric))


def pattern_up(M: np.ndarray, g: np.ndarray, g_inv: np.ndarray) -> np.ndarray:
    """``delta^h_k M_ij - delta^h_j M_ik + g_ij g^hr M_rk - g_ik g^hr M_rj``."""
    d = np.eye(len(g))
    Mu = g_inv @ M
    return (
        np.einsum("hk,ij->hijk", d, M)
        - np.einsum("hj,ik->hijk", d, M)
        + np.einsum("ij,hk->hijk", g, Mu)
        - np.einsum("ik,hj->hijk", g, Mu)
    )


def pattern_low(M: np.ndarray, g: np.ndarray) -> np.ndarray:
    """``g_mk M_ij - g_mj M_ik + g_ij M_mk - g_ik M_mj``."""
    return (
        np.einsum("mk,ij->mijk", g, M)
        - np.einsum("mj,ik->mijk", g, M)
        + np.einsum("ij,mk->mijk", g, M)
        - np.einsum("ik,mj->mijk", g, M)
    )


def _gg_up(g: np.ndarray) -> np.ndarray:
    """``delta^h_k g_ij - delta^h_j g_ik``."""
    d = np.eye(len(g))
    return np.einsum("hk,ij->hijk", d, g) - np.einsum("hj,ik->hijk", d, g)


def _gg_low(g: np.ndarray) -> np.ndarray:
    """``g_mk g_ij - g_mj g_ik``."""
    return np.einsum("mk,ij->mijk", g, g) - np.einsum("mj,ik->mijk", g, g)


@dataclass(frozen=True)
class CurvatureSet:
    """Curvature objects of one connection at one point (raw component arrays)."""

    R_up: np.ndarray
    R_low: np.ndarray
    ricci: np.ndarray
    scalar: float
    conformal: np.ndarray | None
    concircular_up: np.ndarray
    concircular_low: np.ndarray
    concircular_ricci: np.ndarray
    projective: np.ndarray

    @property
    def trace_first(self) -> np.ndarray:
        """``R^r_rjk`` indexed ``[j, k]``."""
        return np.einsum("rrjk->jk", self.R_up)


def _conformal(R_up, R_low, ric, scalar, g) -> np.ndarray:
    n = len(g)
    if n < 3:
        raise DimensionError(f"conformal curvature tensor needs n >= 3 (n - 2 denominator), got n={n}")
    V = np.einsum("rrjk->jk", R_up)
    return (
        R_low
        - np.einsum("mi,jk->mijk", g, V) / n
        + (
            np.einsum("mj,ik->mijk", g, ric)
            - np.einsum("mk,ij->mijk", g, ric)
            - np.einsum("ij,mk->mijk", g, ric)
            + np.einsum("ik,mj->mijk", g, ric)
        )
        / (n - 2)
        - (
            np.einsum("mj,ki->mijk", g, V)
            - np.einsum("mk,ji->mijk", g, V)
            - np.einsum("ij,km->mijk", g, V)
            + np.einsum("ik,jm->mijk", g, V)
        )
        / (n * (n - 2))
        - scalar / ((n - 1) * (n - 2)) * (np.einsum("mj,ik->mijk", g, g) - np.einsum("mk,ij->mijk", g, g))
    )


def conformal_tensor(curv: CurvatureSet, g: np.ndarray | Tensor) -> Tensor:
    """Conformal curvature tensor ``C_mijk`` (same formula for both connections)."""
    g = g.c if isinstance(g, Tensor) else g
    return Tensor(_conformal(curv.R_up, curv.R_low, curv.ricci, curv.scalar, g), "llll")


def _concircular(R_up, R_low, ric, scalar, g):
    n = len(g)
    f = scalar / (n * (n - 1))
    return R_up - f * _gg_up(g), R_low - f * _gg_low(g), ric - (scalar / n) * g


def concircular_tensor(curv: CurvatureSet, g: np.ndarray | Tensor) -> tuple[Tensor, Tensor, Tensor]:
    """``(Z^h_ijk, Z_mijk, Z_ij)``; the curvature minus its constant-curvature part."""
    g = g.c if isinstance(g, Tensor) else g
    up, low, ric = _concircular(curv.R_up, curv.R_low, curv.ricci, curv.scalar, g)
    return Tensor(up, "ulll"), Tensor(low, "llll"), Tensor(ric, "ll")


def _projective(R_low, ric, g, BS):
    # BS[a, b] = nabla_[a S_b]; pass zeros for the symmetric connection.
    n = len(g)
    H = n * ric + ric.T + 2 * (n - 1) * BS.T
    return (
        R_low
        + np.einsum("mi,jk->mijk", g, (ric - ric.T) + 2 * (n - 1) * BS) / (n + 1)
        + (np.einsum("mj,ik->mijk", g, H) - np.einsum("mk,ij->mijk", g, H)) / (n * n - 1)
    ), H


def projective_tensor(curv: CurvatureSet, g: np.ndarray | Tensor, BS: np.ndarray | None = None) -> Tensor:
    """Projective curvature tensor; ``BS`` is ``nabla_[a S_b]`` (omit for the symmetric connection)."""
    g = g.c if isinstance(g, Tensor) else g
    BS = np.zeros_like(g) if BS is None else BS
    return Tensor(_projective(curv.R_low, curv.ricci, g, BS)[0], "llll")


def _set(R_up: np.ndarray, g: np.ndarray, gi: np.ndarray, BS: np.ndarray) -> tuple[CurvatureSet, np.ndarray]:
    R_low = np.einsum("mh,hijk->mijk", g, R_up)
    ric = np.einsum("kijk->ij", R_up)
    scalar = float(np.einsum("ij,ij->", gi, ric))
    conf = _conformal(R_up, R_low, ric, scalar, g) if len(g) >= 3 else None
    z_up, z_low, z_ric = _concircular(R_up, R_low, ric, scalar, g)
    proj, H = _projective(R_low, ric, g, BS)
    return CurvatureSet(R_up, R_low, ric, scalar, conf, z_up, z_low, z_ric, proj), H


@dataclass(frozen=True)
class Curvatures:
    """Both curvature sets at a point plus the auxiliary tensors tying them together."""

    frame: Frame
    sym: CurvatureSet
    bar: CurvatureSet
    S_ij: np.ndarray
    S_trace: float
    H_bar: np.ndarray
    K: np.ndarray
    BT: np.ndarray  # nabla_[a T_b]
    BS: np.ndarray  # nabla_[a S_b]


def curvatures(fr: Frame) -> Curvatures:
    T_cov, S_cov = weyl_frame_parts(fr)
    BT, BS = bracket(T_cov), bracket(S_cov)
    g, gi = fr.g, fr.g_inv
    n = fr.n
    sym, _ = _set(_riemann(fr.gamma, fr.dgamma), g, gi, np.zeros_like(g))
    bar, H_bar = _set(_riemann(fr.gamma_bar, fr.dgamma_bar), g, gi, BS)
    S_ij = _s_tensor(fr, S_cov)
    S_trace = float(np.einsum("ij,ij->", gi, S_ij))
    K = n * S_ij + S_ij.T + (n + 1) * S_trace * g
    return Curvatures(fr, sym, bar, S_ij, S_trace, H_bar, K, BT, BS)


def _cyclic(A: np.ndarray) -> np.ndarray:
    """``A_mijk + A_mjki + A_mkij``."""
    return A + np.einsum("mjki->mijk", A) + np.einsum("mkij->mijk", A)


def _bianchi_rhs(g: np.ndarray, B: np.ndarray) -> np.ndarray:
    """``2 (g_mi B_kj + g_mj B_ik + g_mk B_ji)`` with ``B_ab = nabla_[a S_b]``."""
    return 2 * (np.einsum("mi,kj->mijk", g, B) + np.einsum("mj,ik->mijk", g, B) + np.einsum("mk,ji->mijk", g, B))


def curvature_properties(cv: Curvatures) -> dict[str, np.ndarray]:
    """Residual arrays of the algebraic properties of ``Rbar_mijk`` and ``Zbar_mijk``.

    Keys ``a``..``d`` refer to the curvature of the semi-symmetric connection,
    ``lemma_a``..``lemma_d`` to its concircular tensor. ``lemma_d`` is the
    cyclic sum as usually stated (right-hand side zero); ``lemma_d_closed``
    keeps the ``nabla_[k S_j]`` terms that survive when ``S`` is not closed.
    """
    g = cv.frame.g
    n = cv.frame.n
    Rb, Zb = cv.bar.R_low, cv.bar.concircular_low
    BT = cv.BT
    sym_rhs = 4 * np.einsum("mi,kj->mijk", g, BT)
    c_chain = cv.sym.trace_first
    return {
        "a": Rb + np.einsum("mikj->mijk", Rb),
        "b": Rb + np.einsum("imjk->mijk", Rb) - sym_rhs,
        "c_bar_vs_sym": cv.bar.trace_first - c_chain,
        # 2 R_[kj] = R_kj - R_jk, indexed [j, k]
        "c_sym_vs_ricci": c_chain - (cv.sym.ricci.T - cv.sym.ricci),
        "c_sym_vs_weyl_form": c_chain - 2 * n * BT.T,
        "d": _cyclic(Rb) - _bianchi_rhs(g, cv.BS),
        "lemma_a": Zb + np.einsum("mikj->mijk", Zb),
        "lemma_b": Zb + np.einsum("imjk->mijk", Zb) - sym_rhs,
        "lemma_c": np.einsum("rrjk->jk", cv.bar.concircular_up) - cv.bar.trace_first,
        "lemma_d": _cyclic(Zb),
        "lemma_d_closed": _cyclic(Zb) - _bianchi_rhs(g, cv.BS),
    }


def relation_residuals(cv: Curvatures) -> dict[str, np.ndarray]:
    """Residual arrays of every relation between the two curvature sets."""
    fr = cv.frame
    g, gi, n = fr.g, fr.g_inv, fr.n
    S_ij, S = cv.S_ij, cv.S_trace
    sym, bar = cv.sym, cv.bar
    X = pattern_low(S_ij, g)
    out = {
        "riemann_relation": bar.R_up - (sym.R_up + pattern_up(S_ij, g, gi)),
        "riemann_relation_lowered": bar.R_low - (sym.R_low + X),
        "ricci_relation": bar.ricci - (sym.ricci + (n - 2) * S_ij + S * g),
        "scalar_relation": np.array(bar.scalar - (sym.scalar + 2 * (n - 1) * S)),
        "concircular_relation_up": bar.concircular_up
        - (sym.concircular_up + pattern_up(S_ij, g, gi) - (2 / n) * S * _gg_up(g)),
        "concircular_relation_low": bar.concircular_low - (sym.concircular_low + X - (2 / n) * S * _gg_low(g)),
        "concircular_relation_ricci": bar.concircular_ricci
        - (sym.concircular_ricci + (n - 2) * S_ij - ((n - 2) / n) * S * g),
        "concircular_contraction": np.einsum("kijk->ij", bar.concircular_up) - bar.concircular_ricci,
    }
    if n >= 3:
        out["conformal_invariance"] = bar.conformal - sym.conformal
    BS = cv.BS
    common = (
        sym.projective
        + (2 / (n + 1)) * np.einsum("mi,jk->mijk", g, BS)
        + np.einsum("ij,mk->mijk", g, S_ij)
        - np.einsum("ik,mj->mijk", g, S_ij)
    )

    def with_k(K):
        return common + (np.einsum("mk,ij->mijk", g, K) - np.einsum("mj,ik->mijk", g, K)) / (n * n - 1)

    out["projective_relation"] = bar.projective - with_k(cv.K)
    K_fixed = n * S_ij + S_ij.T - (n + 1) * S * g
    out["projective_relation_trace_sign"] = bar.projective - with_k(K_fixed)
    return out
