"""Finite-dimensional C*-algebras of matrices and Hilbert modules over them.

A coefficient algebra is a matrix subspace of some ``M_n`` closed under product
and conjugate transpose, together with its (computed) unit.  A Hilbert module
over it is a subspace of ``m x n`` matrices closed under the right action, with
the algebra-valued inner product ``<u, v> = u^* v``; positivity and
definiteness are automatic in this concrete model and exercised by tests.

Compact operators, dual modules and balanced tensor products are all realized
through the same subspace machinery.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    IncompatibleAlgebras,
    InnerProductEscapesAlgebra,
    ModuleNotClosed,
    NotAStarAlgebra,
    NotFull,
)
from .matrixcore import (
    EPS,
    MatrixSubspace,
    as_matrix,
    frobenius_norm,
    span,
    threshold,
)


@dataclass(frozen=True)
class FinDimCStar:
    """Concrete finite-dimensional C*-algebra: a *-closed matrix span with unit."""

    carrier: MatrixSubspace
    unit: np.ndarray = field(repr=False)

    @property
    def ambient(self) -> int:
        return self.carrier.rows

    @property
    def dim(self) -> int:
        return self.carrier.dim

    def contains(self, m, eps: float = EPS) -> bool:
        return self.carrier.contains(m, eps)


def star_algebra(generators, ambient: int | None = None, eps: float = EPS) -> FinDimCStar:
    """Validate a matrix span as a C*-algebra and compute its unit.

    ``generators`` may be a :class:`MatrixSubspace` or an iterable of square
    matrices.  Raises :class:`NotAStarAlgebra` when the span is not closed
    under product or conjugate transpose, or admits no two-sided unit.
    """
    if isinstance(generators, MatrixSubspace):
        carrier = generators
    else:
        shape = (ambient, ambient) if ambient is not None else None
        carrier = span(list(generators), shape=shape, eps=eps)
    if carrier.rows != carrier.cols:
        raise NotAStarAlgebra(f"ambient shape {carrier.shape} is not square")
    if carrier.dim == 0:
        raise NotAStarAlgebra("zero algebra has no unit")
    mats = carrier.matrices()
    for i, a in enumerate(mats):
        if not carrier.contains(a.conj().T, eps):
            raise NotAStarAlgebra(f"not closed under conjugate transpose at basis {i}")
        for j, b in enumerate(mats):
            if not carrier.contains(a @ b, eps):
                raise NotAStarAlgebra(f"not closed under product at basis pair ({i}, {j})")
    unit = _solve_unit(carrier, eps)
    return FinDimCStar(carrier=carrier, unit=unit)


def _solve_unit(carrier: MatrixSubspace, eps: float) -> np.ndarray:
    """Least-squares two-sided identity for the span; raise when none exists."""
    mats = carrier.matrices()
    d, rc = carrier.dim, carrier.rows * carrier.cols
    rows = []
    rhs = []
    for b in mats:
        left = np.stack([(bj @ b).reshape(-1) for bj in mats], axis=1)
        right = np.stack([(b @ bj).reshape(-1) for bj in mats], axis=1)
        rows.extend((left, right))
        rhs.extend((b.reshape(-1), b.reshape(-1)))
    a = np.concatenate(rows, axis=0)
    y = np.concatenate(rhs, axis=0)
    x, *_ = np.linalg.lstsq(a, y, rcond=None)
    scale = max(float(np.linalg.norm(y)), 1.0)
    if float(np.linalg.norm(a @ x - y)) > threshold(eps, scale):
        raise NotAStarAlgebra("span admits no two-sided unit")
    return carrier.from_coords(x)


def scalars() -> FinDimCStar:
    """The complex numbers as 1x1 matrices."""
    return star_algebra([np.eye(1)])


def full_matrix_algebra(n: int) -> FinDimCStar:
    units = []
    for i in range(n):
        for j in range(n):
            m = np.zeros((n, n), dtype=np.complex128)
            m[i, j] = 1.0
            units.append(m)
    return star_algebra(units)


def diagonal_algebra(n: int) -> FinDimCStar:
    mats = []
    for i in range(n):
        m = np.zeros((n, n), dtype=np.complex128)
        m[i, i] = 1.0
        mats.append(m)
    return star_algebra(mats)


def same_algebra(a: FinDimCStar, b: FinDimCStar, eps: float = EPS) -> bool:
    if a.ambient != b.ambient or a.dim != b.dim:
        return False
    return all(b.carrier.contains(m, eps) for m in a.carrier.matrices())


@dataclass(frozen=True)
class HilbertModule:
    """Right Hilbert module over a concrete algebra; build via :func:`make_module`."""

    algebra: FinDimCStar
    carrier: MatrixSubspace

    @property
    def dim(self) -> int:
        return self.carrier.dim

    @property
    def shape(self) -> tuple[int, int]:
        return self.carrier.shape

    def inner(self, u, v) -> np.ndarray:
        """The algebra-valued inner product u^* v."""
        return as_matrix(u).conj().T @ as_matrix(v)


def make_module(basis, algebra: FinDimCStar, eps: float = EPS) -> HilbertModule:
    """Validate a matrix span as a right Hilbert module over ``algebra``.

    Checks the right action closes in the span and every inner product of
    basis elements lands in the algebra; raises :class:`ModuleNotClosed` or
    :class:`InnerProductEscapesAlgebra` with the first witness found.
    """
    carrier = basis if isinstance(basis, MatrixSubspace) else span(list(basis), eps=eps)
    if carrier.cols != algebra.ambient:
        raise IncompatibleAlgebras(
            f"module columns {carrier.cols} do not match algebra ambient {algebra.ambient}")
    mats = carrier.matrices()
    alg = algebra.carrier.matrices()
    for i, u in enumerate(mats):
        for k, a in enumerate(alg):
            prod = u @ a
            if not carrier.contains(prod, eps):
                raise ModuleNotClosed(i, k, carrier.residual(prod))
    for i, u in enumerate(mats):
        for j, v in enumerate(mats):
            ip = u.conj().T @ v
            if not algebra.carrier.contains(ip, eps):
                raise InnerProductEscapesAlgebra(i, j, algebra.carrier.residual(ip))
    return HilbertModule(algebra=algebra, carrier=carrier)


def algebra_as_module(a: FinDimCStar) -> HilbertModule:
    """The algebra as a right module over itself, ``<a, b> = a^* b``."""
    return make_module(a.carrier, a)


def column_module(n: int) -> HilbertModule:
    """C^n as column matrices over the scalars."""
    cols = []
    for i in range(n):
        m = np.zeros((n, 1), dtype=np.complex128)
        m[i, 0] = 1.0
        cols.append(m)
    return make_module(cols, scalars())


def row_module(n: int) -> HilbertModule:
    """Row vectors as a full module over the n x n matrix algebra."""
    rows = []
    for i in range(n):
        m = np.zeros((1, n), dtype=np.complex128)
        m[0, i] = 1.0
        rows.append(m)
    return make_module(rows, full_matrix_algebra(n))


def is_full(v: HilbertModule, eps: float = EPS) -> bool:
    """True when the inner products of basis elements span the whole algebra."""
    mats = v.carrier.matrices()
    products = [u.conj().T @ w for u in mats for w in mats]
    return span(products, shape=(v.algebra.ambient, v.algebra.ambient), eps=eps).dim \
        == v.algebra.dim


def theta(u, v) -> np.ndarray:
    """Concrete matrix of ``w -> u <v, w>``, namely ``u v^*``."""
    u, v = as_matrix(u), as_matrix(v)
    if u.shape[1] != v.shape[1]:
        raise IncompatibleAlgebras(
            f"coefficient sizes differ: {u.shape[1]} vs {v.shape[1]}")
    return u @ v.conj().T


@dataclass(frozen=True)
class CompactOperatorSpace:
    """Span of the operators theta(u, v) from a source to a target module."""

    source: HilbertModule
    target: HilbertModule
    carrier: MatrixSubspace

    @property
    def dim(self) -> int:
        return self.carrier.dim

    def as_algebra(self, eps: float = EPS) -> FinDimCStar:
        if self.source is not self.target and self.source.carrier is not self.target.carrier:
            raise IncompatibleAlgebras("only K(V) = K(V, V) is an algebra")
        return star_algebra(self.carrier, eps=eps)


def compacts(v: HilbertModule, u: HilbertModule | None = None,
             eps: float = EPS) -> CompactOperatorSpace:
    """K(V, U): the span of all theta(u_i, v_j) over basis pairs."""
    u = v if u is None else u
    if not same_algebra(u.algebra, v.algebra, eps):
        raise IncompatibleAlgebras("modules are not over the same algebra")
    thetas = [theta(x, y) for x in u.carrier.matrices() for y in v.carrier.matrices()]
    carrier = span(thetas, shape=(u.shape[0], v.shape[0]), eps=eps)
    return CompactOperatorSpace(source=v, target=u, carrier=carrier)


def dual_module(v) -> MatrixSubspace:
    """Carrier of the conjugate transposes (the left-module dual)."""
    carrier = v.carrier if isinstance(v, HilbertModule) else v
    return span([m.conj().T for m in carrier.matrices()],
                shape=(carrier.cols, carrier.rows))


@dataclass(frozen=True)
class BalancedTensor:
    """Balanced tensor product as the Gram-form quotient of elementary tensors.

    ``gram`` is the positive semidefinite matrix of scalarized inner products
    of elementary tensors u_i (x) v_j (indexed by ``i * dim(V) + j``), and
    ``coords`` maps elementary-tensor coefficient vectors isometrically onto
    the quotient coordinate space of dimension ``dim``.
    """

    left: HilbertModule
    right: HilbertModule
    gram: np.ndarray = field(repr=False)
    coords: np.ndarray = field(repr=False)
    dim: int
    balancing_residual: float

    def coords_of(self, i: int, j: int) -> np.ndarray:
        return self.coords[:, i * self.right.dim + j]

    def coords_of_element(self, cu, cv) -> np.ndarray:
        z = np.outer(np.asarray(cu, dtype=np.complex128),
                     np.asarray(cv, dtype=np.complex128)).reshape(-1)
        return self.coords @ z


def balanced_tensor(u: HilbertModule, v: HilbertModule, eps: float = EPS) -> BalancedTensor:
    """U (x)_B V for U a right module over B and V a left-B right-A module.

    Both actions are concrete matrix multiplications, so compatibility means
    the ambient of B equals the row size of V and B maps V into itself.  The
    balancing relations ``ub (x) v = u (x) bv`` are verified to lie in the
    null space of the Gram form.
    """
    b_alg = u.algebra
    if v.carrier.rows != b_alg.ambient:
        raise IncompatibleAlgebras(
            f"middle algebra acts on {b_alg.ambient} rows but V has {v.carrier.rows}")
    v_mats = v.carrier.matrices()
    for k, b in enumerate(b_alg.carrier.matrices()):
        for j, vm in enumerate(v_mats):
            if not v.carrier.contains(b @ vm, eps):
                raise IncompatibleAlgebras(
                    f"V is not a left module over the middle algebra "
                    f"(witness algebra basis {k}, module basis {j})")

    u_mats = u.carrier.matrices()
    du, dv = len(u_mats), len(v_mats)
    gram = np.zeros((du * dv, du * dv), dtype=np.complex128)
    for i in range(du):
        for k in range(du):
            h = u_mats[i].conj().T @ u_mats[k]
            for j in range(dv):
                for l in range(dv):
                    gram[i * dv + j, k * dv + l] = np.vdot(v_mats[j], h @ v_mats[l])
    gram = (gram + gram.conj().T) / 2.0
    evals, evecs = np.linalg.eigh(gram)
    top = float(evals[-1]) if evals.size else 0.0
    keep = evals > eps * max(top, 0.0) if top > 0 else np.zeros_like(evals, dtype=bool)
    coords = (np.sqrt(evals[keep])[:, None] * evecs[:, keep].conj().T)
    dim = int(np.count_nonzero(keep))

    bal = 0.0
    for i, um in enumerate(u_mats):
        for k, b in enumerate(b_alg.carrier.matrices()):
            cu = u.carrier.coords(um @ b)
            for j, vm in enumerate(v_mats):
                cv = v.carrier.coords(b @ vm)
                z = np.zeros(du * dv, dtype=np.complex128)
                z[np.arange(du) * dv + j] += cu
                z[i * dv + np.arange(dv)] -= cv
                sq = float(np.real(np.vdot(z, gram @ z)))
                term = float(np.real(np.vdot(cu, cu) + np.vdot(cv, cv)))
                bal = max(bal, np.sqrt(max(sq, 0.0)) / max(1.0, np.sqrt(term)))
    if bal > threshold(eps * 10, 1.0):
        raise IncompatibleAlgebras(
            f"balancing relations fail on the Gram form (residual {bal:.3e})")
    return BalancedTensor(left=u, right=v, gram=gram, coords=coords, dim=dim,
                          balancing_residual=bal)


@dataclass(frozen=True)
class CompactsIdentification:
    """Certificate for the identification W (x)_A V^* = K(V, W)."""

    tensor_dim: int
    compacts: CompactOperatorSpace
    gram_residual: float

    @property
    def bijective(self) -> bool:
        return self.tensor_dim == self.compacts.dim


def identify_compacts(w: HilbertModule, v: HilbertModule,
                      eps: float = EPS) -> CompactsIdentification:
    """Certify that ``w (x) v^* -> theta(w, v)`` is a bijective isometry.

    The abstract Gram of the tensor (computed from module inner products only)
    must coincide with the Frobenius Gram of the concrete operators, and the
    ranks must agree.  Requires both modules full.
    """
    if not same_algebra(w.algebra, v.algebra, eps):
        raise IncompatibleAlgebras("modules are not over the same algebra")
    if not is_full(w, eps):
        raise NotFull("left module is not full")
    if not is_full(v, eps):
        raise NotFull("right module is not full")
    w_mats, v_mats = w.carrier.matrices(), v.carrier.matrices()
    dw, dv = len(w_mats), len(v_mats)
    abstract = np.zeros((dw * dv, dw * dv), dtype=np.complex128)
    for i in range(dw):
        for k in range(dw):
            hw = w_mats[i].conj().T @ w_mats[k]
            for j in range(dv):
                for l in range(dv):
                    hv = v_mats[l].conj().T @ v_mats[j]
                    abstract[i * dv + j, k * dv + l] = np.trace(hw @ hv)
    ops = [theta(wm, vm) for wm in w_mats for vm in v_mats]
    flat = np.stack([o.reshape(-1) for o in ops])
    concrete = flat.conj() @ flat.T
    resid = float(np.linalg.norm(abstract - concrete)) / max(1.0, float(np.linalg.norm(abstract)))
    k_space = compacts(v, w, eps)
    top = float(np.linalg.eigvalsh((abstract + abstract.conj().T) / 2)[-1])
    evals = np.linalg.eigvalsh((abstract + abstract.conj().T) / 2)
    tensor_dim = int(np.sum(evals > eps * max(top, 0.0))) if top > 0 else 0
    return CompactsIdentification(tensor_dim=tensor_dim, compacts=k_space,
                                  gram_residual=resid)
