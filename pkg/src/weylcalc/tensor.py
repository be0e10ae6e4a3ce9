"""Dense tensors at a point, with per-index variance.

Variance is a string with one character per index: ``"u"`` (upper,
contravariant) or ``"l"`` (lower, covariant). ``Tensor(c, "ulll")`` holds
components ``c[h, i, j, k]`` of an object like ``R^h_ijk``.
"""

from __future__ import annotations

import string
import warnings
import numpy as np
import scipy.linalg

UP = "u"
LOW = "l"

PIVOT_FLOOR = 1e-12


class VarianceError(ValueError):
    pass


class SingularMetricError(ArithmeticError):
    pass


class Tensor:
    """Immutable dense tensor of rank ``len(variance)`` over dimension ``dim``."""

    __slots__ = ("c", "variance", "dim")

    def __init__(self, components, variance: str = ""):
        c = np.array(components, dtype=float)
        if c.ndim != len(variance):
            raise VarianceError(f"rank {c.ndim} components with variance {variance!r}")
        if any(v not in (UP, LOW) for v in variance):
            raise VarianceError(f"variance must be made of 'u'/'l', got {variance!r}")
        if c.ndim and len(set(c.shape)) != 1:
            raise ValueError(f"components must have shape n^rank, got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("tensor components must be finite")
        c.setflags(write=False)
        self.c = c
        self.variance = variance
        self.dim = c.shape[0] if c.ndim else 0

    @property
    def rank(self) -> int:
        return len(self.variance)

    def __repr__(self) -> str:
        return f"Tensor(variance={self.variance!r}, dim={self.dim}, c={self.c.tolist()!r})"

    def __getitem__(self, idx):
        return self.c[idx]

    def _check_same(self, other: Tensor) -> None:
        if self.variance != other.variance or self.c.shape != other.c.shape:
            raise VarianceError(f"cannot combine {self.variance!r} with {other.variance!r}")

    def __add__(self, other: Tensor) -> Tensor:
        self._check_same(other)
        return Tensor(self.c + other.c, self.variance)

    def __sub__(self, other: Tensor) -> Tensor:
        self._check_same(other)
        return Tensor(self.c - other.c, self.variance)

    def __mul__(self, scalar: float) -> Tensor:
        return Tensor(self.c * float(scalar), self.variance)

    __rmul__ = __mul__

    def __neg__(self) -> Tensor:
        return Tensor(-self.c, self.variance)

    def __float__(self) -> float:
        if self.rank:
            raise TypeError("only rank-0 tensors convert to float")
        return float(self.c)

    def transpose(self, *order: int) -> Tensor:
        """Reorder indices; ``order[k]`` names the old index placed at position k."""
        return Tensor(np.transpose(self.c, order), "".join(self.variance[o] for o in order))


def zeros(n: int, variance: str) -> Tensor:
    return Tensor(np.zeros((n,) * len(variance)), variance)


def kronecker(n: int) -> Tensor:
    """delta^i_j."""
    return Tensor(np.eye(n), UP + LOW)


def product(a: Tensor, b: Tensor) -> Tensor:
    """Outer product; indices of ``a`` come first."""
    return Tensor(np.multiply.outer(a.c, b.c), a.variance + b.variance)


def _check_pos(t: Tensor, *positions: int) -> None:
    for p in positions:
        if not 0 <= p < t.rank:
            raise IndexError(f"index position {p} out of range for rank {t.rank}")


def contract(t: Tensor, a: int, b: int) -> Tensor:
    """Sum over the index pair (a, b); one must be upper and the other lower."""
    _check_pos(t, a, b)
    if a == b:
        raise ValueError("cannot contract an index with itself")
    if t.variance[a] == t.variance[b]:
        raise VarianceError(f"contraction needs one upper and one lower index, got {t.variance[a]!r} twice")
    letters = list(string.ascii_letters[: t.rank])
    letters[b] = letters[a]
    keep = [l for k, l in enumerate(letters) if k not in (a, b)]
    c = np.einsum(f"{''.join(letters)}->{''.join(keep)}", t.c)
    variance = "".join(v for k, v in enumerate(t.variance) if k not in (a, b))
    return Tensor(c, variance)


def raise_lower(t: Tensor, pos: int, metric: Tensor, direction: str) -> Tensor:
    """Transvect index ``pos`` with ``g^ij`` (``direction="raise"``) or ``g_ij`` ("lower")."""
    _check_pos(t, pos)
    if metric.rank != 2 or metric.c.shape[0] != metric.c.shape[1]:
        raise ValueError("metric must be a square rank-2 tensor")
    if direction == "raise":
        want, have, new = UP + UP, LOW, UP
    elif direction == "lower":
        want, have, new = LOW + LOW, UP, LOW
    else:
        raise ValueError(f"direction must be 'raise' or 'lower', got {direction!r}")
    if metric.variance != want:
        raise VarianceError(f"{direction} needs a metric with variance {want!r}, got {metric.variance!r}")
    if t.variance[pos] != have:
        raise VarianceError(f"index {pos} is not {'lower' if have == LOW else 'upper'}")
    if metric.dim != t.dim:
        raise ValueError("metric dimension does not match tensor")
    c = np.moveaxis(np.tensordot(metric.c, t.c, axes=([1], [pos])), 0, pos)
    return Tensor(c, t.variance[:pos] + new + t.variance[pos + 1 :])


def antisymmetrize_pair(t: Tensor, a: int, b: int) -> Tensor:
    """``1/2 (t[..a..b..] - t[..b..a..])``."""
    _check_pos(t, a, b)
    if t.variance[a] != t.variance[b]:
        raise VarianceError("antisymmetrized indices must share variance")
    return Tensor(0.5 * (t.c - np.swapaxes(t.c, a, b)), t.variance)


def symmetrize_pair(t: Tensor, a: int, b: int) -> Tensor:
    _check_pos(t, a, b)
    if t.variance[a] != t.variance[b]:
        raise VarianceError("symmetrized indices must share variance")
    return Tensor(0.5 * (t.c + np.swapaxes(t.c, a, b)), t.variance)


def max_abs(t: Tensor | np.ndarray | float) -> float:
    c = t.c if isinstance(t, Tensor) else np.asarray(t, dtype=float)
    return float(np.max(np.abs(c))) if c.size else 0.0


def invert_metric(g: Tensor) -> tuple[Tensor, float]:
    """Inverse metric ``g^ij`` and the 2-norm condition number of ``g_ij``.

    LU with partial pivoting; raises :class:`SingularMetricError` when a pivot
    falls below ``PIVOT_FLOOR`` in absolute value.
    """
    if g.variance != LOW + LOW:
        raise VarianceError("expected a covariant metric g_ij")
    with warnings.catch_warnings():
        # singularity is reported through the pivot check below
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(g.c, check_finite=True)
    pivots = np.abs(np.diag(lu))
    if pivots.min() < PIVOT_FLOOR:
        raise SingularMetricError(f"metric is singular (smallest pivot {pivots.min():.3e})")
    inv = scipy.linalg.lu_solve((lu, piv), np.eye(g.dim))
    inv = 0.5 * (inv + inv.T)
    return Tensor(inv, UP + UP), float(np.linalg.cond(g.c))
