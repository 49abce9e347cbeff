"""Grid fields, anisotropic differences, TV seminorms and random sampling.

Fields are plain ``numpy`` float arrays over ``{0..N-1}^d``.  Linear indices
follow C (row-major) order, i.e. axis 0 varies slowest, so a linear index
``i`` of a field ``u`` refers to ``u.reshape(-1)[i]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class ParameterError(ValueError):
    """Raised when an operation is called outside its documented domain."""


def as_field(u) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    if u.ndim == 0:
        raise ParameterError("a field needs at least one axis")
    if not np.all(np.isfinite(u)):
        raise ParameterError("field contains NaN or Inf")
    return u


def forward_diff(u) -> tuple[np.ndarray, ...]:
    """Forward differences along every axis, without wrap-around.

    Component ``j`` has extent ``n_j - 1`` along axis ``j`` and holds
    ``u[k + e_j] - u[k]``.
    """
    u = as_field(u)
    return tuple(np.diff(u, axis=j) for j in range(u.ndim))


def forward_diff_adjoint(p: Sequence[np.ndarray], shape) -> np.ndarray:
    """Adjoint of :func:`forward_diff` (a negative divergence)."""
    out = np.zeros(shape, dtype=np.float64)
    for j, pj in enumerate(p):
        pad = [(0, 0)] * len(shape)
        pad[j] = (1, 0)
        lo = np.pad(pj, pad)
        pad[j] = (0, 1)
        hi = np.pad(pj, pad)
        out += lo - hi
    return out


def tv_aniso(u) -> float:
    """Anisotropic TV: the l1 norm of all forward differences."""
    return float(sum(np.abs(c).sum() for c in forward_diff(u)))


def grad_support(u, tau: float = 0.0) -> int:
    """Number of grid points whose full forward stencil exists and is nonzero.

    Only points ``k`` with ``k + e_j`` inside the grid for *every* axis are
    counted, so the last slice along each axis is never included.  ``tau``
    is an absolute threshold on the summed stencil magnitude; the default 0
    is an exact test.
    """
    u = as_field(u)
    interior = tuple(slice(0, n - 1) for n in u.shape)
    total = np.zeros([max(n - 1, 0) for n in u.shape])
    for j in range(u.ndim):
        total += np.abs(np.diff(u, axis=j)[interior])
    return int(np.count_nonzero(total > tau))


@dataclass(frozen=True)
class SampleSet:
    """Sorted linear indices of the observed entries of a grid."""

    total: int
    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 1 or idx.size < 1:
            raise ParameterError("a sample set needs at least one index")
        if idx.size > self.total:
            raise ParameterError("more samples than grid points")
        if np.any(np.diff(idx) <= 0):
            raise ParameterError("indices must be strictly increasing")
        if idx[0] < 0 or idx[-1] >= self.total:
            raise ParameterError("index out of range")
        object.__setattr__(self, "indices", idx)

    @property
    def m(self) -> int:
        return int(self.indices.size)

    @property
    def density(self) -> float:
        return self.m / self.total

    def mask(self, shape) -> np.ndarray:
        if int(np.prod(shape)) != self.total:
            raise ParameterError(f"shape {tuple(shape)} does not match {self.total} grid points")
        out = np.zeros(self.total, dtype=bool)
        out[self.indices] = True
        return out.reshape(shape)

    def take(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        if u.size != self.total:
            raise ParameterError("field size does not match the sample set")
        return u.reshape(-1)[self.indices]

    def to_json(self) -> dict:
        return {"total": self.total, "indices": self.indices.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "SampleSet":
        return cls(int(obj["total"]), np.asarray(sorted(obj["indices"]), dtype=np.int64))


def partial_fisher_yates(rng: np.random.Generator, total: int, m: int) -> np.ndarray:
    """First ``m`` steps of a Fisher-Yates shuffle of ``range(total)``, sorted."""
    if not 1 <= m <= total:
        raise ParameterError(f"need 1 <= m <= total, got m={m}, total={total}")
    pool = np.arange(total, dtype=np.int64)
    draws = rng.integers(np.arange(m), total)  # draw i is uniform on [i, total)
    for i, j in enumerate(draws):
        pool[i], pool[j] = pool[j], pool[i]
    return np.sort(pool[:m])


def partial_fisher_yates_batch(rng: np.random.Generator, total: int, m: int, count: int) -> np.ndarray:
    """``count`` independent draws of :func:`partial_fisher_yates`, one per row."""
    if not 1 <= m <= total:
        raise ParameterError(f"need 1 <= m <= total, got m={m}, total={total}")
    pool = np.tile(np.arange(total, dtype=np.int64), (count, 1))
    draws = rng.integers(np.arange(m), total, size=(count, m))
    rows = np.arange(count)
    for i in range(m):
        j = draws[:, i]
        pool[rows, i], pool[rows, j] = pool[rows, j], pool[rows, i].copy()
    return np.sort(pool[:, :m], axis=1)


def sample_uniform_subset(total: int, m: int, seed) -> SampleSet:
    """Draw an m-subset of ``range(total)`` uniformly at random.

    ``seed`` may be an int or anything accepted by ``np.random.default_rng``.
    """
    rng = np.random.default_rng(seed)
    return SampleSet(total, partial_fisher_yates(rng, total, m))


def masked_mse(u, g, samples: SampleSet) -> float:
    """Mean squared residual ``(1/m) sum_{k in samples} |u[k] - g[k]|^2``.

    ``g`` holds one value per sample, in index order.
    """
    g = np.asarray(g, dtype=np.float64).reshape(-1)
    if g.size != samples.m:
        raise ParameterError(f"expected {samples.m} observed values, got {g.size}")
    r = samples.take(u) - g
    return float(np.dot(r, r) / samples.m)


def variance_on(g, samples: SampleSet | None = None) -> float:
    g = np.asarray(g, dtype=np.float64).reshape(-1)
    if g.size < 1:
        raise ParameterError("variance of an empty sample")
    if samples is not None and g.size != samples.m:
        raise ParameterError(f"expected {samples.m} observed values, got {g.size}")
    return float(np.mean((g - g.mean()) ** 2))


def clamp_box(u, M: float) -> np.ndarray:
    """Pointwise truncation to ``[0, M]``; never increases TV or data misfit."""
    if M <= 0:
        raise ParameterError("box bound M must be positive")
    return np.clip(as_field(u), 0.0, M)
