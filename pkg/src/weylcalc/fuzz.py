"""Seeded generators of random manifolds and mappings for property tests.

Every generator is a pure function of its seed. Coefficients are rounded to
three decimals so the generated expressions stay readable in reports.
"""

from __future__ import annotations

from itertools import combinations_with_replacement

import numpy as np

from .connection import WeylManifold, frame_at
from .curvature import curvatures
from .expr import differentiate, parse
from .mapping import ConformalMapping
from .verify import DEFAULT_GAP, _theorem_point, sample_points

COORDS = ("x", "y", "z", "w")


def _coords(n: int) -> list[str]:
    if not 2 <= n <= len(COORDS):
        raise ValueError(f"dimension must be in 2..{len(COORDS)}, got {n}")
    return list(COORDS[:n])


def _monomials(coords, degree):
    out = [""]
    for d in range(1, degree + 1):
        out += ["*".join(c) for c in combinations_with_replacement(coords, d)]
    return out


def random_polynomial(rng: np.random.Generator, coords, degree: int = 2, scale: float = 0.5, terms: int = 4) -> str:
    """A sparse polynomial string with coefficients in ``[-scale, scale]``."""
    monos = _monomials(coords, degree)
    picks = rng.choice(len(monos), size=min(terms, len(monos)), replace=False)
    parts = []
    for k in sorted(picks):
        c = round(float(rng.uniform(-scale, scale)), 3)
        if c == 0.0:
            continue
        parts.append(repr(c) if not monos[k] else f"{c!r}*{monos[k]}")
    return " + ".join(parts) if parts else "0"


def _metric(rng, coords):
    n = len(coords)
    g = [["0"] * n for _ in range(n)]
    for i in range(n):
        # squares keep the diagonal >= 1 on any box
        sq = coords[int(rng.integers(n))]
        g[i][i] = f"1 + {round(float(rng.uniform(0, 0.4)), 3)!r}*{sq}^2"
        for j in range(i + 1, n):
            g[i][j] = g[j][i] = random_polynomial(rng, coords, degree=2, scale=0.4 / n, terms=2)
    return g


def fuzz_manifold(seed: int, n: int, *, weyl: bool = True, name: str | None = None) -> WeylManifold:
    """Diagonally dominant polynomial metric with polynomial ``T`` and ``S``.

    Off-diagonal entries stay below ``0.4 / n`` in magnitude on the unit box,
    so the metric is positive definite on ``[-0.5, 0.5]^n``.
    """
    coords = _coords(n)
    rng = np.random.default_rng([seed, n, 1])
    g = _metric(rng, coords)
    T = [random_polynomial(rng, coords) if weyl else "0" for _ in range(n)]
    S = [random_polynomial(rng, coords) for _ in range(n)]
    return WeylManifold.build(coords, g, T, S, name=name or f"fuzz-{n}d-{seed}")


def fuzz_mapping(seed: int, n: int, *, equal: bool = False, closed: bool = False) -> ConformalMapping:
    """Random polynomial ``P, Q``.

    ``equal`` sets ``Q = P``; ``closed`` makes ``P`` a gradient field.
    """
    coords = _coords(n)
    rng = np.random.default_rng([seed, n, 2])
    if closed:
        phi = parse(random_polynomial(rng, coords, degree=3, terms=5), coords)
        P = [differentiate(phi, i).to_string() for i in range(n)]
    else:
        P = [random_polynomial(rng, coords) for _ in range(n)]
    Q = list(P) if equal else [random_polynomial(rng, coords) for _ in range(n)]
    return ConformalMapping.build(coords, P, Q)


def negative_witness(seed: int, n: int, gap: float = DEFAULT_GAP, probes: int = 5, max_tries: int = 50) -> WeylManifold:
    """First fuzzed manifold from ``seed`` on whose probe points ``D_S > gap``."""
    for k in range(max_tries):
        m = fuzz_manifold(seed * max_tries + k, n)
        pts = sample_points([(-0.5, 0.5)] * n, probes, seed)
        if min(_theorem_point(curvatures(frame_at(m, p)))["D_S"] for p in pts) > gap:
            return m
    raise RuntimeError(f"no non-proportional witness after {max_tries} tries")


def s_concircular_witness(b) -> WeylManifold:
    """Flat metric, ``T = 0`` and ``S_i = -b_i / (1 + b.x)``.

    Then ``S_ij = |b|^2 / (2 (1 + b.x)^2) g_ij``.
    """
    n = len(b)
    coords = _coords(n)
    lin = " + ".join(f"{float(bi)!r}*{c}" for bi, c in zip(b, coords) if bi)
    den = f"(1 + {lin})" if lin else "1"
    g = [["1" if i == j else "0" for j in range(n)] for i in range(n)]
    S = [f"{-float(bi)!r}/{den}" if bi else "0" for bi in b]
    return WeylManifold.build(coords, g, ["0"] * n, S, name=f"sconc-{n}d")
