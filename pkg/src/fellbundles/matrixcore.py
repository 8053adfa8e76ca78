"""Dense complex matrix and subspace primitives shared by the algebraic modules.

Conventions fixed here and relied on everywhere else:

* the Frobenius inner product ``<A, B> = tr(A^* B)`` orders all subspace work;
* matrix subspaces are stored as orthonormal *flat* bases (rows of a 2-d array);
* rank and containment decisions are relative to the largest norm in play and
  absolute below norm 1 (see :func:`threshold`).

Spectral data comes from LAPACK via numpy (svd, eigh, lstsq).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

EPS = 1e-9
NORM_EPS = 1e-8  # comparisons between two independently computed norms


@dataclass(frozen=True)
class Tolerance:
    """Comparison thresholds: ``eps`` for subspace work, ``norm_eps`` for norms."""

    eps: float = EPS
    norm_eps: float = NORM_EPS

    def __post_init__(self):
        if not (self.eps > 0 and self.norm_eps > 0):
            raise ValueError("tolerances must be positive")


def threshold(eps: float, *scales: float) -> float:
    """Absolute cutoff for a comparison among quantities of the given norms."""
    return eps * max(1.0, *scales) if scales else eps


def as_matrix(data) -> np.ndarray:
    m = np.asarray(data, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError(f"expected a matrix, got array of dimension {m.ndim}")
    if m.size and not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def frobenius_inner(a: np.ndarray, b: np.ndarray) -> complex:
    return complex(np.vdot(a, b))


def frobenius_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a))


def spectral_norm(m) -> float:
    """Largest singular value."""
    m = as_matrix(m)
    if m.size == 0:
        return 0.0
    return float(np.linalg.svd(m, compute_uv=False)[0])


def is_positive(m, eps: float = EPS) -> bool:
    """Hermitian within tolerance with spectrum bounded below by ``-eps * max(1, |m|)``."""
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"positivity requires a square matrix, got shape {m.shape}")
    if m.size == 0:
        return True
    scale = spectral_norm(m)
    cut = threshold(eps, scale)
    if spectral_norm(m - m.conj().T) > cut:
        return False
    herm = (m + m.conj().T) / 2.0
    return float(np.linalg.eigvalsh(herm)[0]) >= -cut


@dataclass(frozen=True)
class MatrixSubspace:
    """Subspace of ``rowsx cols`` complex matrices with an orthonormal flat basis.

    ``basis`` has shape ``(dim, rows*cols)``; its rows are vectorized matrices,
    pairwise orthonormal under the Frobenius inner product.
    """

    rows: int
    cols: int
    basis: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def basis_matrix(self, i: int) -> np.ndarray:
        return self.basis[i].reshape(self.rows, self.cols)

    def matrices(self) -> list[np.ndarray]:
        return [self.basis_matrix(i) for i in range(self.dim)]

    def coords(self, m) -> np.ndarray:
        """Coefficients of the orthogonal projection of ``m`` onto the subspace."""
        m = as_matrix(m)
        self._check_shape(m)
        return self.basis.conj() @ m.reshape(-1)

    def from_coords(self, c) -> np.ndarray:
        c = np.asarray(c, dtype=np.complex128)
        return (self.basis.T @ c).reshape(self.rows, self.cols)

    def project(self, m) -> np.ndarray:
        return self.from_coords(self.coords(m))

    def residual(self, m) -> float:
        """Frobenius distance from ``m`` to the subspace."""
        m = as_matrix(m)
        self._check_shape(m)
        v = m.reshape(-1)
        return float(np.linalg.norm(v - self.basis.T @ (self.basis.conj() @ v)))

    def contains(self, m, eps: float = EPS) -> bool:
        m = as_matrix(m)
        return self.residual(m) <= threshold(eps, frobenius_norm(m))

    def _check_shape(self, m: np.ndarray) -> None:
        if m.shape != (self.rows, self.cols):
            raise ValueError(f"shape mismatch: subspace is {self.shape}, matrix is {m.shape}")


def span(generators: Iterable, shape: tuple[int, int] | None = None,
         eps: float = EPS) -> MatrixSubspace:
    """Orthonormal basis of the complex span of the generators.

    Rank is decided at ``eps`` relative to the largest singular value.  An empty
    generator list needs an explicit ``shape``.
    """
    mats = [as_matrix(g) for g in generators]
    if not mats:
        if shape is None:
            raise ValueError("empty generator list requires an explicit shape")
        rows, cols = shape
        return MatrixSubspace(rows, cols, np.zeros((0, rows * cols), dtype=np.complex128))
    rows, cols = mats[0].shape
    for m in mats:
        if m.shape != (rows, cols):
            raise ValueError(f"shape mismatch among generators: {m.shape} vs {(rows, cols)}")
    if shape is not None and (rows, cols) != tuple(shape):
        raise ValueError(f"generators have shape {(rows, cols)}, expected {tuple(shape)}")
    stack = np.stack([m.reshape(-1) for m in mats])
    u, s, vh = np.linalg.svd(stack, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return MatrixSubspace(rows, cols, np.zeros((0, rows * cols), dtype=np.complex128))
    rank = int(np.sum(s > eps * s[0]))
    return MatrixSubspace(rows, cols, vh[:rank].copy())


class SpanBuilder:
    """Incremental orthonormal span; reports which generators enlarged it.

    Used where a *small witness set* of spanning elements matters (corner
    fullness certificates), so the greedy selection must be deterministic.
    """

    def __init__(self, shape: tuple[int, int], eps: float = EPS):
        self.rows, self.cols = shape
        self.eps = eps
        self._rows: list[np.ndarray] = []

    @property
    def dim(self) -> int:
        return len(self._rows)

    def add(self, m) -> bool:
        """Add a generator; return True when it increased the dimension."""
        v = as_matrix(m).reshape(-1).astype(np.complex128)
        scale = np.linalg.norm(v)
        if scale == 0.0:
            return False
        for b in self._rows:
            v = v - b * np.vdot(b, v)
        # second pass guards against cancellation in near-dependent inputs
        for b in self._rows:
            v = v - b * np.vdot(b, v)
        norm = np.linalg.norm(v)
        if norm <= threshold(self.eps, scale):
            return False
        self._rows.append(v / norm)
        return True

    def subspace(self) -> MatrixSubspace:
        rc = self.rows * self.cols
        basis = (np.stack(self._rows) if self._rows
                 else np.zeros((0, rc), dtype=np.complex128))
        return MatrixSubspace(self.rows, self.cols, basis)


@dataclass(frozen=True)
class SpanMap:
    """Least-squares linear map defined on the span of the input matrices.

    ``residual`` is the largest per-equation misfit ``|L(in_i) - out_i|_F``
    relative to ``max(1, |out_i|_F)``; below tolerance it certifies that the
    requested assignment extends to a well-defined linear map on the span.
    """

    domain: MatrixSubspace
    out_shape: tuple[int, int]
    matrix: np.ndarray = field(repr=False)  # (domain.dim, out_rows*out_cols)
    residual: float

    def apply(self, m) -> np.ndarray:
        c = self.domain.coords(m)
        return (c @ self.matrix).reshape(self.out_shape)

    def apply_coords(self, c: np.ndarray) -> np.ndarray:
        return (np.asarray(c, dtype=np.complex128) @ self.matrix).reshape(self.out_shape)


def solve_on_span(inputs: Sequence, outputs: Sequence, eps: float = EPS) -> SpanMap:
    """Fit ``L`` minimizing ``sum |L(in_i) - out_i|_F^2`` over the span of the inputs."""
    if len(inputs) == 0:
        raise ValueError("empty equation list")
    if len(inputs) != len(outputs):
        raise ValueError("inputs and outputs differ in length")
    ins = [as_matrix(m) for m in inputs]
    outs = [as_matrix(m) for m in outputs]
    out_shape = outs[0].shape
    for m in outs:
        if m.shape != out_shape:
            raise ValueError("outputs do not share a shape")
    dom = span(ins, eps=eps)
    coeff = np.stack([dom.coords(m) for m in ins]) if dom.dim else \
        np.zeros((len(ins), 0), dtype=np.complex128)
    rhs = np.stack([m.reshape(-1) for m in outs])
    if dom.dim:
        lmat, *_ = np.linalg.lstsq(coeff, rhs, rcond=None)
    else:
        lmat = np.zeros((0, rhs.shape[1]), dtype=np.complex128)
    fit = coeff @ lmat
    res = 0.0
    for i in range(len(ins)):
        misfit = float(np.linalg.norm(fit[i] - rhs[i]))
        res = max(res, misfit / max(1.0, float(np.linalg.norm(rhs[i]))))
    return SpanMap(domain=dom, out_shape=out_shape, matrix=lmat, residual=res)


def random_matrix(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """Complex standard-normal matrix (real and imaginary parts iid N(0, 1/2))."""
    return (rng.standard_normal((rows, cols))
            + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2.0)
