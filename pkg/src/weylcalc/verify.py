"""Identity suite, S-concircularity test and the Z-coincidence dichotomy.

:func:`run_suite` samples points in a box, evaluates every identity at each
point and reduces the residuals into a :class:`VerificationReport`. Results
depend only on (manifold, box, count, seed): each point draws from its own
seeded stream and the reduction is ordered by point index, so the worker
count never changes the output.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np

from . import __version__
from .connection import WeylManifold, _compatibility, frame_at, gauge_rescale, torsion_formula
from .curvature import Curvatures, _gg_low, curvature_properties, curvatures, pattern_low, relation_residuals
from .expr import DomainError, ScalarField
from .mapping import ConformalMapping, apply_mapping, mapping_residuals
from .tensor import SingularMetricError, Tensor, kronecker, max_abs, product, raise_lower

__all__ = [
    "IDENTITIES",
    "IdentityRecord",
    "TheoremRecord",
    "VerificationReport",
    "SuiteConfig",
    "SamplingError",
    "s_concircular_residual",
    "theorem_check",
    "run_suite",
    "sample_points",
    "classify",
]

DEFAULT_TOL = 1e-9
DEFAULT_GAP = 1e-3
TORSION_TOL = 1e-12
RETRY_CAP = 10

# (name, equation label, group). Groups decide applicability:
#   core - always; conformal - n >= 3; gauge - spec has a gauge block;
#   mapping - spec has a mapping block; concircular - mapping is concircular;
#   s_concircular - D_S <= tol; z_coincide - D_Z <= tol.
IDENTITIES: tuple[tuple[str, str, str], ...] = (
    ("compatibility", "Eq. (1.1)", "core"),
    ("ssnm_connection_definition", "Eq. (1.10)", "core"),
    ("torsion", "Eq. (1.11)", "core"),
    ("riemann_relation", "Eq. (1.13)", "core"),
    ("riemann_relation_lowered", "Eq. (1.15)", "core"),
    ("ricci_relation", "Eq. (1.16)", "core"),
    ("scalar_relation", "Eq. (1.17)", "core"),
    ("property_a", "Sec. 1 property (a)", "core"),
    ("property_b", "Sec. 1 property (b)", "core"),
    ("property_c_bar_vs_sym", "Sec. 1 property (c), Rbar^r_rjk = R^r_rjk", "core"),
    ("property_c_sym_vs_ricci", "Sec. 1 property (c), R^r_rjk = 2R_[kj]", "core"),
    ("property_c_sym_vs_weyl_form", "Sec. 1 property (c), R^r_rjk = 2n nabla_[k T_j]", "core"),
    ("property_d", "Sec. 1 property (d)", "core"),
    ("conformal_invariance", "Eqs. (1.6), (1.18): Cbar = C", "conformal"),
    ("projective_relation", "Eq. (1.19) and the Wbar - W relation", "core"),
    ("projective_relation_trace_sign", "Wbar - W relation with K_ij = nS_ij + S_ji - (n+1)S g_ij", "core"),
    ("concircular_contraction", "Eq. (2.8)", "core"),
    ("concircular_relation_up", "Eq. (2.9)", "core"),
    ("concircular_relation_low", "Eq. (2.10)", "core"),
    ("concircular_relation_ricci", "Eq. (2.11)", "core"),
    ("lemma_a", "Lemma 2.1 (a)", "core"),
    ("lemma_b", "Lemma 2.1 (b)", "core"),
    ("lemma_c", "Lemma 2.1 (c)", "core"),
    ("lemma_d", "Lemma 2.1 (d)", "core"),
    ("lemma_d_closed", "Lemma 2.1 (d) keeping the nabla_[k S_j] terms of property (d)", "core"),
    ("gauge_compatibility", "Eqs. (1.1)-(1.2)", "gauge"),
    ("gauge_connection_invariance", "Eqs. (1.2)-(1.3)", "gauge"),
    ("weyl_connection_change", "Eq. (1.4)", "mapping"),
    ("weyl_curvature_change", "Eq. (1.5)", "mapping"),
    ("ssnm_connection_change", "Eq. (2.1)", "mapping"),
    ("ssnm_curvature_change", "Eq. (2.2)", "mapping"),
    ("ssnm_curvature_change_derived", "Eq. (2.2) re-derived from Eqs. (1.5), (1.13), (2.1)", "mapping"),
    ("deformation_definitions", "Sec. 2, definitions below Eq. (2.2)", "mapping"),
    ("concircular_curvature_change", "Eq. (2.3)", "concircular"),
    ("concircular_ricci_change", "Eq. (2.4)", "concircular"),
    ("concircular_scalar_change", "Eq. (2.5)", "concircular"),
    ("concircular_invariance", "Sec. 2, Zbar* = Zbar for the tensor of Eq. (2.6)", "concircular"),
    ("theorem_intermediate", "Eq. (3.2)", "z_coincide"),
    ("beta_consistency", "Eq. (3.3)", "s_concircular"),
)

_CURVATURE_KEYS = {
    "a": "property_a",
    "b": "property_b",
    "c_bar_vs_sym": "property_c_bar_vs_sym",
    "c_sym_vs_ricci": "property_c_sym_vs_ricci",
    "c_sym_vs_weyl_form": "property_c_sym_vs_weyl_form",
    "d": "property_d",
    "lemma_a": "lemma_a",
    "lemma_b": "lemma_b",
    "lemma_c": "lemma_c",
    "lemma_d": "lemma_d",
    "lemma_d_closed": "lemma_d_closed",
}


class SamplingError(RuntimeError):
    """A point could not be evaluated after the retry cap."""


# ---------------------------------------------------------------------------
# Theorem pieces
# ---------------------------------------------------------------------------


def _theorem_point(cv: Curvatures) -> dict[str, float]:
    fr = cv.frame
    g, gi, n = fr.g, fr.g_inv, fr.n
    beta = float(np.einsum("ij,ij->", gi, cv.S_ij)) / n
    d_s = max_abs(cv.S_ij - beta * g)
    d_z = max_abs(cv.bar.concircular_low - cv.sym.concircular_low)
    dR = cv.bar.scalar - cv.sym.scalar
    beta_pred = dR / (2 * n * (n - 1))
    intermediate = max_abs(pattern_low(cv.S_ij, g) - dR / (n * (n - 1)) * _gg_low(g))
    return {
        "D_S": d_s,
        "D_Z": d_z,
        "beta": beta,
        "beta_pred": beta_pred,
        "beta_gap": abs(beta - beta_pred),
        "intermediate": intermediate,
    }


def s_concircular_residual(m: WeylManifold, points: Sequence[Sequence[float]]) -> tuple[float, list[float]]:
    """Max over ``points`` of ``|S_ij - beta g_ij|`` with ``beta = g^ij S_ij / n``, and the betas."""
    if not points:
        raise ValueError("need at least one point")
    worst, betas = 0.0, []
    for p in points:
        t = _theorem_point(curvatures(frame_at(m, p)))
        worst = max(worst, t["D_S"])
        betas.append(t["beta"])
    return worst, betas


def classify(d_s: float, d_z: float, tol: float = DEFAULT_TOL, gap: float = DEFAULT_GAP) -> str:
    """Cell of the verdict table for one (D_S, D_Z) pair."""
    small_s, small_z = d_s <= tol, d_z <= tol
    big_s, big_z = d_s > gap, d_z > gap
    if small_s and small_z:
        return "forward"
    if big_s and big_z:
        return "contrapositive"
    if (small_s and big_z) or (big_s and small_z):
        return "violation"
    return "indeterminate"


@dataclass
class TheoremRecord:
    D_S: float
    D_Z: float
    cell: str
    beta_consistency_residual: float | None
    point_cells: dict[str, int]
    betas: list[float]
    note: str = ""

    @property
    def violated(self) -> bool:
        return self.cell == "violation" or self.point_cells.get("violation", 0) > 0


def _theorem_record(per_point: list[dict[str, float]], n: int, tol: float, gap: float) -> TheoremRecord:
    d_s = max(t["D_S"] for t in per_point)
    d_z = max(t["D_Z"] for t in per_point)
    cells = {"forward": 0, "contrapositive": 0, "violation": 0, "indeterminate": 0}
    for t in per_point:
        cells[classify(t["D_S"], t["D_Z"], tol, gap)] += 1
    cell = classify(d_s, d_z, tol, gap)
    beta_res = max(t["beta_gap"] for t in per_point) if d_s <= tol else None
    note = ""
    if n == 2:
        note = "n=2: Zbar - Z vanishes identically, so D_Z carries no information about S_ij"
    return TheoremRecord(d_s, d_z, cell, beta_res, cells, [t["beta"] for t in per_point], note)


def theorem_check(
    m: WeylManifold,
    points: Sequence[Sequence[float]],
    tol: float = DEFAULT_TOL,
    gap: float = DEFAULT_GAP,
) -> TheoremRecord:
    """Pointwise evidence for: S-concircular  <=>  Zbar_mijk = Z_mijk."""
    if not points:
        raise ValueError("need at least one point")
    per_point = [_theorem_point(curvatures(frame_at(m, p))) for p in points]
    return _theorem_record(per_point, m.n, tol, gap)


# ---------------------------------------------------------------------------
# Suite
# ---------------------------------------------------------------------------


@dataclass
class SuiteConfig:
    box: list[tuple[float, float]] | None = None
    points: int = 100
    seed: int = 0
    tol: float = DEFAULT_TOL
    gap: float = DEFAULT_GAP
    mapping: ConformalMapping | None = None
    gauge: ScalarField | None = None
    threads: int | None = None  # None: WEYLCALC_THREADS, else 1
    retry_cap: int = RETRY_CAP
    name: str = ""

    def resolved_box(self, n: int) -> list[tuple[float, float]]:
        box = self.box if self.box is not None else [(-0.5, 0.5)] * n
        if len(box) != n:
            raise ValueError(f"box has {len(box)} intervals, manifold has dimension {n}")
        for lo, hi in box:
            if not lo < hi:
                raise ValueError(f"empty box interval [{lo}, {hi}]")
        return [(float(lo), float(hi)) for lo, hi in box]

    def worker_count(self) -> int:
        t = self.threads
        if t is None:
            env = os.environ.get("WEYLCALC_THREADS", "")
            t = int(env) if env.strip() else 1
        if t <= 0:
            t = os.cpu_count() or 1
        return t


@dataclass
class IdentityRecord:
    name: str
    paper_ref: str
    tolerance: float
    verdict: str  # "pass" | "fail" | "n/a"
    max_residual: float | None
    worst_point: list[float] | None
    residuals: list[float] | None = None
    note: str = ""


@dataclass
class VerificationReport:
    meta: dict[str, Any]
    identities: list[IdentityRecord]
    theorem: TheoremRecord
    resampled: list[dict[str, Any]] = field(default_factory=list)

    @property
    def failures(self) -> list[str]:
        return [r.name for r in self.identities if r.verdict == "fail"]

    @property
    def passed(self) -> bool:
        return not self.failures and not self.theorem.violated

    def identity(self, name: str) -> IdentityRecord:
        for r in self.identities:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_dict(self) -> dict[str, Any]:
        return {
            "meta": self.meta,
            "identities": [asdict(r) for r in self.identities],
            "theorem": asdict(self.theorem),
            "resampled": self.resampled,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> VerificationReport:
        return cls(
            meta=d["meta"],
            identities=[IdentityRecord(**r) for r in d["identities"]],
            theorem=TheoremRecord(**d["theorem"]),
            resampled=d.get("resampled", []),
        )

    @classmethod
    def from_json(cls, text: str) -> VerificationReport:
        return cls.from_dict(json.loads(text))

    def summary(self) -> str:
        rows = [("identity", "reference", "max residual", "verdict")]
        for r in self.identities:
            res = "-" if r.max_residual is None else f"{r.max_residual:.3e}"
            rows.append((r.name, r.paper_ref, res, r.verdict))
        widths = [max(len(row[c]) for row in rows) for c in range(4)]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
        lines.insert(1, "  ".join("-" * w for w in widths))
        th = self.theorem
        beta = "-" if th.beta_consistency_residual is None else f"{th.beta_consistency_residual:.3e}"
        lines.append("")
        lines.append(f"theorem: D_S={th.D_S:.3e} D_Z={th.D_Z:.3e} cell={th.cell} beta_consistency={beta}")
        lines.append("point cells: " + ", ".join(f"{k}={v}" for k, v in th.point_cells.items()))
        if th.note:
            lines.append(th.note)
        lines.append("PASS" if self.passed else "FAIL: " + ", ".join(self.failures + (["theorem"] if th.violated else [])))
        return "\n".join(lines)


def sample_points(
    box: Sequence[tuple[float, float]], count: int, seed: int, attempt: int = 0
) -> list[tuple[float, ...]]:
    """Deterministic sample; point ``i`` uses its own stream ``(seed, i, attempt)``."""
    return [_draw(box, seed, i, attempt) for i in range(count)]


def _draw(box, seed: int, index: int, attempt: int) -> tuple[float, ...]:
    rng = np.random.default_rng([seed, index, attempt])
    u = rng.random(len(box))
    return tuple(float(lo + (hi - lo) * ui) for (lo, hi), ui in zip(box, u))


def _gamma_bar_from_definition(fr) -> np.ndarray:
    # Gammabar^i_jk = Gamma^i_jk + delta^i_k S_j - g_jk S^i, via tensor algebra
    S = Tensor(fr.S, "l")
    S_up = raise_lower(S, 0, Tensor(fr.g_inv, "uu"), "raise")
    first = product(kronecker(fr.n), S).transpose(0, 2, 1)
    second = product(S_up, Tensor(fr.g, "ll"))
    return (Tensor(fr.gamma, "ull") + first - second).c


def _evaluate_point(
    m: WeylManifold,
    x: tuple[float, ...],
    target: WeylManifold | None,
    gauged: WeylManifold | None,
    mapping: ConformalMapping | None,
) -> dict[str, Any]:
    fr = frame_at(m, x)
    cv = curvatures(fr)
    res: dict[str, float] = {
        "compatibility": max_abs(_compatibility(fr, fr.gamma)),
        "ssnm_connection_definition": max_abs(fr.gamma_bar - _gamma_bar_from_definition(fr)),
        "torsion": max_abs((fr.gamma_bar - np.swapaxes(fr.gamma_bar, 1, 2)) - torsion_formula(fr.S).c),
    }
    for key, arr in curvature_properties(cv).items():
        res[_CURVATURE_KEYS[key]] = max_abs(arr)
    for key, arr in relation_residuals(cv).items():
        res[key] = max_abs(arr)
    if gauged is not None:
        fg = frame_at(gauged, x)
        res["gauge_compatibility"] = max_abs(_compatibility(fg, fg.gamma))
        res["gauge_connection_invariance"] = max_abs(fg.gamma - fr.gamma)
    if target is not None:
        for key, val in mapping_residuals(cv, curvatures(frame_at(target, x)), mapping).items():
            res[key] = max_abs(val)
    th = _theorem_point(cv)
    res["theorem_intermediate"] = th["intermediate"]
    res["beta_consistency"] = th["beta_gap"]
    return {"point": x, "residuals": res, "theorem": th}


def run_suite(m: WeylManifold, config: SuiteConfig | None = None) -> VerificationReport:
    """Evaluate the whole identity suite on ``config.points`` sampled points."""
    cfg = config or SuiteConfig()
    if cfg.points < 1:
        raise ValueError("point count must be at least 1")
    if not 0 < cfg.tol or cfg.gap < 1000 * cfg.tol:
        raise ValueError(f"need tol > 0 and gap >= 1000 * tol (tol={cfg.tol}, gap={cfg.gap})")
    n = m.n
    box = cfg.resolved_box(n)
    target = apply_mapping(m, cfg.mapping) if cfg.mapping is not None else None
    gauged = gauge_rescale(m, cfg.gauge) if cfg.gauge is not None else None

    def work(index: int):
        events = []
        for attempt in range(cfg.retry_cap + 1):
            x = _draw(box, cfg.seed, index, attempt)
            try:
                return _evaluate_point(m, x, target, gauged, cfg.mapping), events
            except (DomainError, SingularMetricError) as exc:
                events.append({"index": index, "attempt": attempt, "point": list(x), "error": str(exc)})
        raise SamplingError(f"point {index}: no evaluable sample after {cfg.retry_cap} retries ({events[-1]['error']})")

    workers = cfg.worker_count()
    if workers == 1:
        results = [work(i) for i in range(cfg.points)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, range(cfg.points)))

    records = [r for r, _ in results]
    resampled = [e for _, evs in results for e in evs]
    theorem = _theorem_record([r["theorem"] for r in records], n, cfg.tol, cfg.gap)

    concircular = None
    if cfg.mapping is not None:
        concircular = max(r["residuals"]["concircularity"] for r in records) <= cfg.tol

    identities = []
    for name, ref, group in IDENTITIES:
        tol = min(cfg.tol, TORSION_TOL) if name == "torsion" else cfg.tol
        reason = _inapplicable(group, n, cfg, concircular, theorem)
        if reason:
            identities.append(IdentityRecord(name, ref, tol, "n/a", None, None, None, reason))
            continue
        values = [r["residuals"][name] for r in records]
        worst = int(np.argmax(values))
        identities.append(
            IdentityRecord(
                name,
                ref,
                tol,
                "pass" if values[worst] <= tol else "fail",
                values[worst],
                list(records[worst]["point"]),
                values,
            )
        )

    _flag_conventions(identities)

    meta = {
        "spec_name": cfg.name or m.name,
        "seed": cfg.seed,
        "points": cfg.points,
        "box": [list(b) for b in box],
        "tolerance": cfg.tol,
        "gap": cfg.gap,
        "version": __version__,
        "digest": m.digest(),
        "sample": [list(r["point"]) for r in records],
    }
    return VerificationReport(meta, identities, theorem, resampled)


# printed form -> re-derived form checked alongside it
_COMPANIONS = {
    "projective_relation": "projective_relation_trace_sign",
    "lemma_d": "lemma_d_closed",
    "ssnm_curvature_change": "ssnm_curvature_change_derived",
}
_BRACKET_NOTE = "residual comes from grad_[j P_k] != 0; the law holds when P is a gradient"


def _flag_conventions(identities: list[IdentityRecord]) -> None:
    """Annotate failing printed forms with the residual of their re-derived form."""
    by_name = {r.name: r for r in identities}
    for r in identities:
        if r.verdict != "fail":
            continue
        alt = by_name.get(_COMPANIONS.get(r.name, ""))
        if alt is not None and alt.verdict == "pass":
            r.note = f"convention mismatch: printed form fails, {alt.name} holds (max residual {alt.max_residual:.3e})"
        elif r.name in ("concircular_curvature_change", "concircular_ricci_change", "concircular_invariance"):
            r.note = _BRACKET_NOTE


def _inapplicable(group: str, n: int, cfg: SuiteConfig, concircular: bool | None, th: TheoremRecord) -> str:
    if group == "conformal" and n < 3:
        return f"undefined for n={n} (n - 2 denominator)"
    if group == "gauge" and cfg.gauge is None:
        return "no gauge function given"
    if group in ("mapping", "concircular") and cfg.mapping is None:
        return "no mapping given"
    if group == "concircular" and not concircular:
        return "mapping is not concircular (W_ij not proportional to g_ij)"
    if group == "z_coincide" and th.D_Z > cfg.tol:
        return "concircular tensors differ"
    if group == "s_concircular" and th.D_S > cfg.tol:
        return "connection is not S-concircular"
    return ""
