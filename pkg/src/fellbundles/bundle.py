"""Fell bundles over finite groupoids: data types, axiom checks, constructors.

A concrete bundle assigns a Hilbert-space dimension to every unit and a
subspace of ``n_r x n_s`` matrices to every arrow; multiplication is matrix
product and involution is conjugate transpose, so bilinearity, associativity,
submultiplicativity, the C*-identity and positivity hold by construction and
only closure, involution, and the unit-fiber algebra structure need checking.

Bundles that are not naturally matrix-shaped (cocycle line bundles,
semi-direct products) are described by structure constants and pushed through
the fiberwise regular representation (:func:`concretize`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bimodule import FinDimCStar, HilbertModule, is_full, make_module, star_algebra
from .errors import (
    ActionInvalid,
    ClosureViolation,
    CocycleIdentityViolated,
    FellBundleError,
    InvolutionViolation,
    NotAStarAlgebra,
    NotFull,
    NotNormalized,
    NotSaturated,
    RepresentationNotInjective,
    TraceNotFaithful,
    UnitFiberNotStarAlgebra,
)
from .groupoid import FiniteGroupoid, GroupoidMorphism, delta, pair_groupoid
from .matrixcore import EPS, MatrixSubspace, as_matrix, span, spectral_norm, threshold


class ConcreteFellBundle:
    """Matrix-subspace fibers over a finite groupoid.

    Construct with structurally consistent data, then run
    :func:`validate_fell_bundle` (all shipped constructors do).  The optional
    ``abstract_images`` records, for bundles produced by :func:`concretize`,
    the matrices realizing each abstract fiber basis vector.
    """

    def __init__(self, groupoid: FiniteGroupoid, unit_dims: dict[int, int],
                 fibers: dict[int, MatrixSubspace],
                 abstract_images: dict[int, np.ndarray] | None = None):
        self.groupoid = groupoid
        self.unit_dims = {int(x): int(n) for x, n in unit_dims.items()}
        self.fibers = dict(fibers)
        self.abstract_images = abstract_images
        if sorted(self.unit_dims) != list(groupoid.units):
            raise ValueError("unit_dims must cover exactly the unit space")
        for x, n in self.unit_dims.items():
            if n < 1:
                raise ValueError(f"unit {x} has non-positive Hilbert dimension {n}")
        g = groupoid
        self.rows = np.array([self.unit_dims[int(g.range[a])] for a in range(g.n_arrows)],
                             dtype=np.int64)
        self.cols = np.array([self.unit_dims[int(g.source[a])] for a in range(g.n_arrows)],
                             dtype=np.int64)
        for a in range(g.n_arrows):
            f = self.fibers.get(a)
            if f is None:
                raise ValueError(f"missing fiber for arrow {a}")
            if f.shape != (int(self.rows[a]), int(self.cols[a])):
                raise ValueError(
                    f"fiber at arrow {a} has shape {f.shape}, expected "
                    f"{(int(self.rows[a]), int(self.cols[a]))}")
        sizes = self.rows * self.cols
        self.offsets = np.zeros(g.n_arrows, dtype=np.int64)
        np.cumsum(sizes[:-1], out=self.offsets[1:])
        self.flat_size = int(sizes.sum())
        pairs = g.composable_pairs
        prods = g.compose_table[pairs[:, 0], pairs[:, 1]]
        self.triples = np.column_stack([prods, pairs[:, 0], pairs[:, 1]]).astype(np.int64)
        self._unit_algebras: dict[int, FinDimCStar | None] = {}
        self._module_blocks: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    # -- geometry ---------------------------------------------------------

    def fiber(self, gamma: int) -> MatrixSubspace:
        return self.fibers[int(gamma)]

    def fiber_dim(self, gamma: int) -> int:
        return self.fibers[int(gamma)].dim

    def total_fiber_dim(self) -> int:
        return sum(f.dim for f in self.fibers.values())

    def fiber_shape(self, gamma: int) -> tuple[int, int]:
        return (int(self.rows[gamma]), int(self.cols[gamma]))

    def module_blocks(self, x: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Block data of the fiber module at unit ``x``.

        Returns ``(arrows, row_offsets, block_arrow)`` where ``arrows`` lists
        the arrows with source ``x`` (the blocks), ``row_offsets`` their row
        positions in the stacked space, and ``block_arrow[i, j]`` the arrow
        ``gamma_i gamma_j^{-1}`` whose fiber value fills block ``(i, j)`` of a
        represented section.
        """
        x = int(x)
        if x not in self._module_blocks:
            g = self.groupoid
            arrows = g.arrows_by_source(x)
            heights = self.rows[arrows]
            row_off = np.zeros(arrows.shape[0], dtype=np.int64)
            np.cumsum(heights[:-1], out=row_off[1:])
            block = np.empty((arrows.shape[0], arrows.shape[0]), dtype=np.int64)
            for i, gi in enumerate(arrows):
                for j, gj in enumerate(arrows):
                    block[i, j] = g.compose_table[gi, g.inverse[gj]]
            self._module_blocks[x] = (arrows, row_off, block)
        return self._module_blocks[x]

    def stack_height(self, x: int) -> int:
        arrows, row_off, _ = self.module_blocks(x)
        return int(row_off[-1] + self.rows[arrows[-1]]) if arrows.size else 0

    def unit_algebra(self, x: int) -> FinDimCStar | None:
        """C*-algebra structure of the fiber over a unit (None when zero)."""
        x = int(x)
        if x not in self._unit_algebras:
            fib = self.fibers[x]
            if fib.dim == 0:
                self._unit_algebras[x] = None
            else:
                try:
                    self._unit_algebras[x] = star_algebra(fib)
                except NotAStarAlgebra as exc:
                    raise UnitFiberNotStarAlgebra(x, str(exc)) from exc
        return self._unit_algebras[x]

    def __repr__(self) -> str:
        return (f"ConcreteFellBundle({self.groupoid.n_arrows} arrows, "
                f"total fiber dim {self.total_fiber_dim()})")


@dataclass(frozen=True)
class BundleValidationReport:
    closure_residual: float
    involution_residual: float
    unit_algebra_dims: dict[int, int]


def validate_fell_bundle(bundle: ConcreteFellBundle, eps: float = EPS) -> BundleValidationReport:
    """Check closure, involution, and the unit-fiber algebras; raise on failure.

    Bilinearity, associativity, submultiplicativity, the C*-identity and
    positivity are automatic for matrix product and conjugate transpose, so
    the checks are: every product of fiber basis elements lies in the fiber at
    the product arrow, conjugate transpose maps each fiber exactly onto the
    fiber at the inverse arrow, and each nonzero unit fiber is a C*-algebra.
    """
    g = bundle.groupoid
    worst_closure = 0.0
    for a, b in g.composable_pairs:
        p = int(g.compose_table[a, b])
        ea, eb, ep = bundle.fibers[int(a)], bundle.fibers[int(b)], bundle.fibers[p]
        if ea.dim == 0 or eb.dim == 0:
            continue
        for i in range(ea.dim):
            ma = ea.basis_matrix(i)
            for j in range(eb.dim):
                prod = ma @ eb.basis_matrix(j)
                res = ep.residual(prod)
                scale = float(np.linalg.norm(prod))
                if res > threshold(eps, scale):
                    raise ClosureViolation(int(a), int(b), i, j, res)
                worst_closure = max(worst_closure, res)
    worst_inv = 0.0
    for a in range(g.n_arrows):
        ea, einv = bundle.fibers[a], bundle.fibers[int(g.inverse[a])]
        if ea.dim != einv.dim:
            raise InvolutionViolation(a, f"dims {ea.dim} vs {einv.dim} at the inverse")
        for i in range(ea.dim):
            adj = ea.basis_matrix(i).conj().T
            res = einv.residual(adj)
            if res > threshold(eps, float(np.linalg.norm(adj))):
                raise InvolutionViolation(a, f"basis {i} residual {res:.3e}")
            worst_inv = max(worst_inv, res)
    dims = {}
    for x in g.units:
        alg = bundle.unit_algebra(x)  # raises UnitFiberNotStarAlgebra on failure
        dims[x] = 0 if alg is None else alg.dim
    return BundleValidationReport(closure_residual=worst_closure,
                                  involution_residual=worst_inv,
                                  unit_algebra_dims=dims)


@dataclass(frozen=True)
class SpotCheckReport:
    samples: int
    involution_residual: float
    cstar_identity_residual: float
    positivity_failures: int


def spot_check(bundle: ConcreteFellBundle, rng: np.random.Generator,
               samples: int = 100, eps: float = EPS) -> SpotCheckReport:
    """Random fiber elements: e** = e, |e* e| = |e|^2, and e* e positive."""
    from .matrixcore import is_positive

    arrows = [a for a in range(bundle.groupoid.n_arrows) if bundle.fiber_dim(a) > 0]
    worst_inv = worst_cstar = 0.0
    pos_fail = 0
    for _ in range(samples):
        a = int(rng.choice(arrows))
        fib = bundle.fibers[a]
        coords = rng.standard_normal(fib.dim) + 1j * rng.standard_normal(fib.dim)
        e = fib.from_coords(coords)
        scale = float(np.linalg.norm(e))
        # e* lands in the fiber at the inverse and e** returns to e
        inv_fiber = bundle.fibers[int(bundle.groupoid.inverse[a])]
        star = e.conj().T
        res = max(inv_fiber.residual(star),
                  float(np.linalg.norm(fib.project(star.conj().T) - e)))
        worst_inv = max(worst_inv, res / max(1.0, scale))
        prod = e.conj().T @ e
        n1, n2 = spectral_norm(prod), spectral_norm(e) ** 2
        worst_cstar = max(worst_cstar, abs(n1 - n2) / max(1.0, n2))
        if not is_positive(prod, eps):
            pos_fail += 1
    return SpotCheckReport(samples=samples, involution_residual=worst_inv,
                           cstar_identity_residual=worst_cstar,
                           positivity_failures=pos_fail)


def is_nondegenerate(bundle: ConcreteFellBundle) -> bool:
    return all(f.dim >= 1 for f in bundle.fibers.values())


def is_saturated(bundle: ConcreteFellBundle, eps: float = EPS) -> bool:
    """Products of fiber bases span the fiber at every product arrow."""
    g = bundle.groupoid
    for a, b in g.composable_pairs:
        p = int(g.compose_table[a, b])
        ea, eb, ep = bundle.fibers[int(a)], bundle.fibers[int(b)], bundle.fibers[p]
        prods = [ea.basis_matrix(i) @ eb.basis_matrix(j)
                 for i in range(ea.dim) for j in range(eb.dim)]
        if span(prods, shape=ep.shape, eps=eps).dim != ep.dim:
            return False
    return True


def require_saturated(bundle: ConcreteFellBundle, eps: float = EPS) -> None:
    g = bundle.groupoid
    for a, b in g.composable_pairs:
        p = int(g.compose_table[a, b])
        ea, eb, ep = bundle.fibers[int(a)], bundle.fibers[int(b)], bundle.fibers[p]
        prods = [ea.basis_matrix(i) @ eb.basis_matrix(j)
                 for i in range(ea.dim) for j in range(eb.dim)]
        if span(prods, shape=ep.shape, eps=eps).dim != ep.dim:
            raise NotSaturated(int(a), int(b))


def restrict_to_units(bundle: ConcreteFellBundle) -> dict[int, FinDimCStar | None]:
    """Per-unit C*-algebras; their direct sum carries the pointwise operations."""
    return {x: bundle.unit_algebra(x) for x in bundle.groupoid.units}


# -- constructors ---------------------------------------------------------


def from_bimodule(a: FinDimCStar, b: FinDimCStar, c, eps: float = EPS) -> ConcreteFellBundle:
    """Fell bundle over the two-point transitive groupoid from a B-A bimodule.

    ``c`` is the carrier of a concrete equivalence bimodule: a span of
    ``ambient(B) x ambient(A)`` matrices, full as a right A-module under
    ``u^* v`` and as a left B-module under ``u v^*``.  Fibers: A and B over
    the units, ``c`` and its conjugate transpose over the two arrows.
    """
    carrier = c if isinstance(c, MatrixSubspace) else span(list(c), eps=eps)
    if carrier.shape != (b.ambient, a.ambient):
        raise ValueError(
            f"bimodule shape {carrier.shape} does not match "
            f"(ambient B, ambient A) = {(b.ambient, a.ambient)}")
    mats = carrier.matrices()
    right = span([u.conj().T @ v for u in mats for v in mats],
                 shape=(a.ambient, a.ambient), eps=eps)
    if right.dim != a.dim:
        raise NotFull("bimodule is not full as a right module")
    left = span([u @ v.conj().T for u in mats for v in mats],
                shape=(b.ambient, b.ambient), eps=eps)
    if left.dim != b.dim:
        raise NotFull("bimodule is not full as a left module")
    d = delta()
    dual = span([m.conj().T for m in mats], shape=(a.ambient, b.ambient), eps=eps)
    bundle = ConcreteFellBundle(
        d, {0: a.ambient, 1: b.ambient},
        {0: a.carrier, 1: b.carrier, 2: carrier, 3: dual})
    validate_fell_bundle(bundle, eps)
    return bundle


def space_bundle(algebras) -> ConcreteFellBundle:
    """C*-algebra bundle over a trivial groupoid: one algebra per point."""
    from .groupoid import trivial_groupoid

    algebras = list(algebras)
    g = trivial_groupoid(len(algebras))
    unit_dims = {x: algebras[x].ambient for x in range(len(algebras))}
    fibers = {x: algebras[x].carrier for x in range(len(algebras))}
    bundle = ConcreteFellBundle(g, unit_dims, fibers)
    validate_fell_bundle(bundle)
    return bundle


def compacts_bundle(dims) -> ConcreteFellBundle:
    """Full matrix spaces K(H_y, H_x) over the pair groupoid on len(dims) points."""
    dims = [int(n) for n in dims]
    if any(n < 1 for n in dims):
        raise ValueError("Hilbert dimensions must be positive")
    npts = len(dims)
    g = pair_groupoid(npts)
    unit_dims = {x * npts + x: dims[x] for x in range(npts)}
    fibers = {}
    for x in range(npts):
        for y in range(npts):
            arrow = x * npts + y
            basis = []
            for i in range(dims[x]):
                for j in range(dims[y]):
                    m = np.zeros((dims[x], dims[y]), dtype=np.complex128)
                    m[i, j] = 1.0
                    basis.append(m)
            fibers[arrow] = span(basis, shape=(dims[x], dims[y]))
    bundle = ConcreteFellBundle(g, unit_dims, fibers)
    validate_fell_bundle(bundle)
    return bundle


def pullback(j: GroupoidMorphism, bundle: ConcreteFellBundle,
             eps: float = EPS) -> ConcreteFellBundle:
    """Pull the bundle back along a morphism: fiber at omega is the fiber at j(omega)."""
    dom = j.domain
    unit_dims = {x: bundle.unit_dims[int(j.map[x])] for x in dom.units}
    fibers = {w: bundle.fibers[int(j.map[w])] for w in range(dom.n_arrows)}
    out = ConcreteFellBundle(dom, unit_dims, fibers)
    validate_fell_bundle(out, eps)
    return out


# -- abstract bundles and the fiberwise regular representation -------------


@dataclass
class AbstractFellBundle:
    """Fell bundle given by structure constants.

    ``mult[(a, b)]`` has shape ``(d_ab, d_a, d_b)`` with
    ``(e f)_k = sum_ij mult[k, i, j] e_i f_j``; ``invol[g]`` has shape
    ``(d_{g*}, d_g)`` acting conjugate-linearly, ``e* = invol[g] @ conj(e)``;
    ``traces[x]`` is a linear functional (coefficient vector) on the fiber
    over the unit ``x``, required positive definite on ``a* a``.
    """

    groupoid: FiniteGroupoid
    dims: np.ndarray
    mult: dict[tuple[int, int], np.ndarray]
    invol: dict[int, np.ndarray]
    traces: dict[int, np.ndarray]

    def product_coords(self, a: int, b: int, ca, cb) -> np.ndarray:
        t = self.mult[(int(a), int(b))]
        return np.einsum("kij,i,j->k", t, ca, cb)

    def star_coords(self, g: int, c) -> np.ndarray:
        return self.invol[int(g)] @ np.conj(c)


def validate_abstract(ab: AbstractFellBundle, eps: float = EPS) -> None:
    """Associativity, involution consistency, anti-multiplicativity, trace shapes."""
    g = ab.groupoid
    d = ab.dims
    for (a, b), t in ab.mult.items():
        p = int(g.compose_table[a, b])
        if t.shape != (int(d[p]), int(d[a]), int(d[b])):
            raise ValueError(f"multiplication tensor at ({a}, {b}) has shape {t.shape}")
    for a, b in g.composable_pairs:
        if (int(a), int(b)) not in ab.mult:
            raise ValueError(f"missing multiplication tensor at ({int(a)}, {int(b)})")
    for gm in range(g.n_arrows):
        gi = int(g.inverse[gm])
        j = ab.invol[gm]
        if j.shape != (int(d[gi]), int(d[gm])):
            raise ValueError(f"involution matrix at {gm} has shape {j.shape}")
        back = ab.invol[gi] @ np.conj(j)
        if np.linalg.norm(back - np.eye(int(d[gm]))) > threshold(eps, 1.0) * 10:
            raise InvolutionViolation(gm, "involution applied twice is not the identity")
    # associativity on basis triples
    for a, b, c in g.composable_triples():
        ab_arrow = int(g.compose_table[a, b])
        bc_arrow = int(g.compose_table[b, c])
        left = np.einsum("lmk,mij->lijk", ab.mult[(ab_arrow, c)], ab.mult[(a, b)],
                         optimize=True)
        right = np.einsum("lim,mjk->lijk", ab.mult[(a, bc_arrow)], ab.mult[(b, c)],
                          optimize=True)
        scale = max(float(np.linalg.norm(left)), float(np.linalg.norm(right)))
        if float(np.linalg.norm(left - right)) > threshold(eps, scale) * 10:
            raise FellBundleError(
                f"structure constants are not associative on triple ({a}, {b}, {c})")
    # (e1 e2)* = e2* e1*
    for a, b in g.composable_pairs:
        a, b = int(a), int(b)
        p = int(g.compose_table[a, b])
        ai, bi = int(g.inverse[a]), int(g.inverse[b])
        for i in range(int(d[a])):
            for j in range(int(d[b])):
                ca = np.zeros(int(d[a]), dtype=np.complex128)
                ca[i] = 1.0
                cb = np.zeros(int(d[b]), dtype=np.complex128)
                cb[j] = 1.0
                lhs = ab.star_coords(p, ab.product_coords(a, b, ca, cb))
                rhs = ab.product_coords(bi, ai, ab.star_coords(b, cb),
                                        ab.star_coords(a, ca))
                scale = max(float(np.linalg.norm(lhs)), float(np.linalg.norm(rhs)))
                if float(np.linalg.norm(lhs - rhs)) > threshold(eps, scale) * 10:
                    raise InvolutionViolation(
                        p, f"(e1 e2)* != e2* e1* at basis pair ({i}, {j}) of ({a}, {b})")


def fiber_gram(ab: AbstractFellBundle, beta: int) -> np.ndarray:
    """Gram matrix of the fiber at ``beta`` under ``<c, d> = trace(c* d)``."""
    g = ab.groupoid
    beta = int(beta)
    bi = int(g.inverse[beta])
    x = int(g.source[beta])
    d = int(ab.dims[beta])
    gram = np.zeros((d, d), dtype=np.complex128)
    tr = ab.traces[x]
    for i in range(d):
        ci = np.zeros(d, dtype=np.complex128)
        ci[i] = 1.0
        star_i = ab.star_coords(beta, ci)
        for j in range(d):
            cj = np.zeros(d, dtype=np.complex128)
            cj[j] = 1.0
            prod = ab.product_coords(bi, beta, star_i, cj)
            gram[i, j] = tr @ prod
    return (gram + gram.conj().T) / 2.0


def concretize(ab: AbstractFellBundle, eps: float = EPS) -> ConcreteFellBundle:
    """Realize an abstract bundle as matrices via the fiberwise regular representation.

    For each unit ``x`` the Hilbert space stacks the fibers with range ``x``
    (inner product from the traces); an element of the fiber at ``alpha`` acts
    from ``W_{s(alpha)}`` to ``W_{r(alpha)}`` by left multiplication on the
    composable blocks.  The map is checked injective on every fiber and the
    intertwining of multiplication and involution is certified.
    """
    validate_abstract(ab, eps)
    g = ab.groupoid
    d = ab.dims
    # orthonormalizing transforms per fiber
    transforms: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for beta in range(g.n_arrows):
        db = int(d[beta])
        if db == 0:
            transforms[beta] = (np.zeros((0, 0)), np.zeros((0, 0)))
            continue
        gram = fiber_gram(ab, beta)
        evals, evecs = np.linalg.eigh(gram)
        if evals[0] <= eps * max(float(evals[-1]), 0.0) or evals[-1] <= 0.0:
            if g.is_unit(beta):
                raise TraceNotFaithful(int(beta))
            raise RepresentationNotInjective(int(beta))
        s = np.sqrt(evals)[:, None] * evecs.conj().T           # coords -> orthonormal
        s_inv = evecs * (1.0 / np.sqrt(evals))[None, :]        # orthonormal -> coords
        transforms[beta] = (s, s_inv)

    # stacked spaces per unit: blocks are arrows with range x
    blocks: dict[int, np.ndarray] = {}
    row_off: dict[int, np.ndarray] = {}
    heights: dict[int, int] = {}
    for x in g.units:
        arr = np.array([b for b in g.arrows_by_range(x) if int(d[b]) > 0], dtype=np.int64)
        offs = np.zeros(arr.shape[0], dtype=np.int64)
        if arr.size:
            np.cumsum(d[arr][:-1], out=offs[1:])
            heights[x] = int(offs[-1] + d[arr[-1]])
        else:
            heights[x] = 0
        blocks[x] = arr
        row_off[x] = offs
    for x in g.units:
        if heights[x] == 0:
            raise RepresentationNotInjective(int(x))

    images: dict[int, np.ndarray] = {}
    fibers: dict[int, MatrixSubspace] = {}
    for alpha in range(g.n_arrows):
        da = int(d[alpha])
        xs, xr = int(g.source[alpha]), int(g.range[alpha])
        n_rows, n_cols = heights[xr], heights[xs]
        image = np.zeros((da, n_rows, n_cols), dtype=np.complex128)
        for bpos, beta in enumerate(blocks[xs]):
            beta = int(beta)
            prod = int(g.compose_table[alpha, beta])
            if int(d[prod]) == 0:
                continue
            ppos_list = np.flatnonzero(blocks[xr] == prod)
            ppos = int(ppos_list[0])
            s_out, _ = transforms[prod]
            _, s_in = transforms[beta]
            t = ab.mult[(alpha, beta)]
            for i in range(da):
                raw = t[:, i, :]                     # d_prod x d_beta on coords
                blk = s_out @ raw @ s_in
                r0, c0 = int(row_off[xr][ppos]), int(row_off[xs][bpos])
                image[i, r0:r0 + blk.shape[0], c0:c0 + blk.shape[1]] += blk
        if da:
            sub = span(list(image), shape=(n_rows, n_cols), eps=eps)
            if sub.dim != da:
                raise RepresentationNotInjective(int(alpha))
        else:
            sub = span([], shape=(n_rows, n_cols), eps=eps)
        images[alpha] = image
        fibers[alpha] = sub

    unit_dims = {x: heights[x] for x in g.units}
    bundle = ConcreteFellBundle(g, unit_dims, fibers, abstract_images=images)
    validate_fell_bundle(bundle, eps)
    _certify_intertwining(ab, bundle, eps)
    return bundle


def _certify_intertwining(ab: AbstractFellBundle, bundle: ConcreteFellBundle,
                          eps: float) -> None:
    g = ab.groupoid
    images = bundle.abstract_images
    for a, b in g.composable_pairs:
        a, b = int(a), int(b)
        p = int(g.compose_table[a, b])
        for i in range(int(ab.dims[a])):
            for j in range(int(ab.dims[b])):
                ca = np.zeros(int(ab.dims[a]), dtype=np.complex128)
                ca[i] = 1.0
                cb = np.zeros(int(ab.dims[b]), dtype=np.complex128)
                cb[j] = 1.0
                cp = ab.product_coords(a, b, ca, cb)
                lhs = images[a][i] @ images[b][j]
                rhs = np.einsum("k,kmn->mn", cp, images[p]) if cp.size else \
                    np.zeros_like(lhs)
                scale = max(float(np.linalg.norm(lhs)), float(np.linalg.norm(rhs)))
                if float(np.linalg.norm(lhs - rhs)) > threshold(eps, scale) * 100:
                    raise FellBundleError(
                        f"regular representation is not multiplicative at pair ({a}, {b})")
    for a in range(g.n_arrows):
        for i in range(int(ab.dims[a])):
            ca = np.zeros(int(ab.dims[a]), dtype=np.complex128)
            ca[i] = 1.0
            cs = ab.star_coords(a, ca)
            lhs = images[a][i].conj().T
            rhs = np.einsum("k,kmn->mn", cs, images[int(g.inverse[a])])
            scale = max(float(np.linalg.norm(lhs)), float(np.linalg.norm(rhs)))
            if float(np.linalg.norm(lhs - rhs)) > threshold(eps, scale) * 100:
                raise FellBundleError(
                    f"regular representation does not intertwine the involution at {a}")


def abstract_from_concrete(bundle: ConcreteFellBundle) -> AbstractFellBundle:
    """Structure constants of a concrete bundle with normalized-trace functionals."""
    g = bundle.groupoid
    dims = np.array([bundle.fiber_dim(a) for a in range(g.n_arrows)], dtype=np.int64)
    mult = {}
    for a, b in g.composable_pairs:
        a, b = int(a), int(b)
        p = int(g.compose_table[a, b])
        ea, eb, ep = bundle.fibers[a], bundle.fibers[b], bundle.fibers[p]
        t = np.zeros((ep.dim, ea.dim, eb.dim), dtype=np.complex128)
        for i in range(ea.dim):
            for j in range(eb.dim):
                t[:, i, j] = ep.coords(ea.basis_matrix(i) @ eb.basis_matrix(j))
        mult[(a, b)] = t
    invol = {}
    for a in range(g.n_arrows):
        ea, ei = bundle.fibers[a], bundle.fibers[int(g.inverse[a])]
        j = np.zeros((ei.dim, ea.dim), dtype=np.complex128)
        for i in range(ea.dim):
            j[:, i] = ei.coords(ea.basis_matrix(i).conj().T)
        invol[a] = j
    traces = {}
    for x in g.units:
        ex = bundle.fibers[x]
        n = bundle.unit_dims[x]
        traces[x] = np.array([np.trace(ex.basis_matrix(i)) / n for i in range(ex.dim)],
                             dtype=np.complex128)
    return AbstractFellBundle(groupoid=g, dims=dims, mult=mult, invol=invol,
                              traces=traces)


def from_cocycle(g: FiniteGroupoid, sigma, eps: float = EPS) -> ConcreteFellBundle:
    """Line bundle twisted by a circle-valued 2-cocycle.

    ``sigma`` maps composable pairs to unit-modulus scalars, normalized so that
    compositions with unit arrows carry weight 1.  Basis involution weights are
    the gauge ``e* = conj(sigma(g, g^{-1})) e_{g^{-1}}``; consistency of the
    resulting *-structure is re-verified exhaustively before concretizing.
    """
    table = {}
    for a, b in g.composable_pairs:
        a, b = int(a), int(b)
        key = (a, b)
        if isinstance(sigma, dict):
            if key not in sigma:
                raise ValueError(f"cocycle undefined on composable pair {key}")
            val = complex(sigma[key])
        else:
            val = complex(sigma(a, b))
        if abs(abs(val) - 1.0) > threshold(eps, 1.0):
            raise ValueError(f"cocycle value at {key} is not on the unit circle")
        table[key] = val
    for gm in range(g.n_arrows):
        r, s = int(g.range[gm]), int(g.source[gm])
        if abs(table[(r, gm)] - 1.0) > threshold(eps, 1.0):
            raise NotNormalized(gm, "left composition with the range unit is not 1")
        if abs(table[(gm, s)] - 1.0) > threshold(eps, 1.0):
            raise NotNormalized(gm, "right composition with the source unit is not 1")
    for a, b, c in g.composable_triples():
        ab_arrow = int(g.compose_table[a, b])
        bc_arrow = int(g.compose_table[b, c])
        lhs = table[(a, b)] * table[(ab_arrow, c)]
        rhs = table[(b, c)] * table[(a, bc_arrow)]
        if abs(lhs - rhs) > threshold(eps, 1.0):
            raise CocycleIdentityViolated(a, b, c, abs(lhs - rhs))
    dims = np.ones(g.n_arrows, dtype=np.int64)
    mult = {(int(a), int(b)): np.array([[[table[(int(a), int(b))]]]])
            for a, b in g.composable_pairs}
    invol = {gm: np.array([[np.conj(table[(gm, int(g.inverse[gm]))])]])
             for gm in range(g.n_arrows)}
    traces = {x: np.ones(1, dtype=np.complex128) for x in g.units}
    ab = AbstractFellBundle(groupoid=g, dims=dims, mult=mult, invol=invol, traces=traces)
    return concretize(ab, eps)


def trivial_cocycle(g: FiniteGroupoid):
    return {(int(a), int(b)): 1.0 + 0.0j for a, b in g.composable_pairs}


def trivial_line_bundle(g: FiniteGroupoid) -> ConcreteFellBundle:
    """Untwisted line bundle in its minimal realization: every fiber is C.

    Same *-algebra as ``from_cocycle`` with the trivial cocycle, but the
    fibers are 1x1 from the start instead of regular-representation images.
    """
    one = span([np.eye(1)])
    bundle = ConcreteFellBundle(g, {x: 1 for x in g.units},
                                {a: one for a in range(g.n_arrows)})
    validate_fell_bundle(bundle)
    return bundle


# -- groupoid actions and semi-direct products ------------------------------


@dataclass
class GroupoidAction:
    """Action of a groupoid on a C*-bundle over its unit space.

    ``maps[g]`` is the coordinate matrix of the *-isomorphism from the algebra
    at ``source(g)`` to the algebra at ``range(g)``, with respect to the
    carrier bases of ``algebras``.
    """

    groupoid: FiniteGroupoid
    algebras: dict[int, FinDimCStar]
    maps: dict[int, np.ndarray]

    def apply(self, g: int, m: np.ndarray) -> np.ndarray:
        src = self.algebras[int(self.groupoid.source[g])]
        dst = self.algebras[int(self.groupoid.range[g])]
        return dst.carrier.from_coords(self.maps[int(g)] @ src.carrier.coords(m))


def validate_action(action: GroupoidAction, eps: float = EPS) -> None:
    """Conditions on a groupoid action: shapes, *-isomorphisms, units, cocycle law."""
    g = action.groupoid
    for x in g.units:
        if x not in action.algebras:
            raise ActionInvalid("a", f"no algebra over unit {x}")
    for gm in range(g.n_arrows):
        src = action.algebras[int(g.source[gm])]
        dst = action.algebras[int(g.range[gm])]
        m = action.maps.get(gm)
        if m is None or m.shape != (dst.dim, src.dim):
            raise ActionInvalid("a", f"map at arrow {gm} has the wrong shape", gm)
        if src.dim != dst.dim or np.linalg.matrix_rank(m) < src.dim:
            raise ActionInvalid("b", f"map at arrow {gm} is not bijective", gm)
        for i in range(src.dim):
            bi = src.carrier.basis_matrix(i)
            out_star = action.apply(gm, bi.conj().T)
            star_out = action.apply(gm, bi).conj().T
            if np.linalg.norm(out_star - star_out) > threshold(eps, 1.0) * 10:
                raise ActionInvalid("b", f"map at arrow {gm} is not adjoint-preserving", gm)
            for j in range(src.dim):
                bj = src.carrier.basis_matrix(j)
                lhs = action.apply(gm, bi @ bj)
                rhs = action.apply(gm, bi) @ action.apply(gm, bj)
                if np.linalg.norm(lhs - rhs) > threshold(eps, float(np.linalg.norm(lhs))) * 10:
                    raise ActionInvalid("b", f"map at arrow {gm} is not multiplicative", gm)
    for x in g.units:
        ax = action.algebras[x]
        if np.linalg.norm(action.maps[x] - np.eye(ax.dim)) > threshold(eps, 1.0) * 10:
            raise ActionInvalid("c", f"unit arrow {x} does not act as the identity", x)
    for a, b in g.composable_pairs:
        a, b = int(a), int(b)
        p = int(g.compose_table[a, b])
        lhs = action.maps[p]
        rhs = action.maps[a] @ action.maps[b]
        if np.linalg.norm(lhs - rhs) > threshold(eps, float(np.linalg.norm(lhs))) * 10:
            raise ActionInvalid("d", f"composition law fails on pair ({a}, {b})", a)


def semidirect(g: FiniteGroupoid, action: GroupoidAction,
               eps: float = EPS) -> ConcreteFellBundle:
    """Semi-direct product bundle: the fiber at ``gamma`` is the algebra at its source.

    Multiplication ``(g1, a1)(g2, a2) = (g1 g2, alpha_{g2*}(a1) a2)`` and
    involution ``(g, a)* = (g*, alpha_g(a*))``, built as structure constants
    and concretized through the regular representation; axioms are re-verified
    on the output.
    """
    validate_action(action, eps)
    if action.groupoid is not g and not action.groupoid.same_tables(g):
        raise ActionInvalid("a", "action lives on a different groupoid")
    g = action.groupoid
    dims = np.array([action.algebras[int(g.source[a])].dim for a in range(g.n_arrows)],
                    dtype=np.int64)
    mult = {}
    for g1, g2 in g.composable_pairs:
        g1, g2 = int(g1), int(g2)
        src2 = action.algebras[int(g.source[g2])]
        d1, d2 = int(dims[g1]), int(dims[g2])
        t = np.zeros((src2.dim, d1, d2), dtype=np.complex128)
        twist = action.maps[int(g.inverse[g2])]
        for i in range(d1):
            moved = src2.carrier.from_coords(twist @ _unit_vec(d1, i))
            for j in range(d2):
                prod = moved @ src2.carrier.basis_matrix(j)
                t[:, i, j] = src2.carrier.coords(prod)
        mult[(g1, g2)] = t
    invol = {}
    for gm in range(g.n_arrows):
        src = action.algebras[int(g.source[gm])]
        dst = action.algebras[int(g.range[gm])]
        j = np.zeros((dst.dim, src.dim), dtype=np.complex128)
        for i in range(src.dim):
            j[:, i] = dst.carrier.coords(action.apply(gm, src.carrier.basis_matrix(i).conj().T))
        invol[gm] = j
    traces = {}
    for x in g.units:
        ax = action.algebras[x]
        traces[x] = np.array(
            [np.trace(ax.carrier.basis_matrix(i)) / ax.ambient for i in range(ax.dim)],
            dtype=np.complex128)
    ab = AbstractFellBundle(groupoid=g, dims=dims, mult=mult, invol=invol, traces=traces)
    try:
        return concretize(ab, eps)
    except (TraceNotFaithful, RepresentationNotInjective) as exc:
        raise ActionInvalid("b", f"semi-direct structure degenerates: {exc}") from exc


def _unit_vec(n: int, i: int) -> np.ndarray:
    v = np.zeros(n, dtype=np.complex128)
    v[i] = 1.0
    return v


def swap_action_on_two_scalars() -> tuple[FiniteGroupoid, GroupoidAction]:
    """Z/2 acting on the diagonal pair of scalars by the flip; a stock example."""
    from .bimodule import diagonal_algebra
    from .groupoid import cyclic_group_table, from_group

    z2 = from_group(cyclic_group_table(2))
    alg = diagonal_algebra(2)
    swap = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)
    x = z2.units[0]
    maps = {x: np.eye(alg.dim, dtype=np.complex128)}
    other = [a for a in range(2) if a != x][0]
    m = np.zeros((alg.dim, alg.dim), dtype=np.complex128)
    for i in range(alg.dim):
        b = alg.carrier.basis_matrix(i)
        m[:, i] = alg.carrier.coords(swap @ b @ swap)
    maps[other] = m
    action = GroupoidAction(groupoid=z2, algebras={x: alg}, maps=maps)
    return z2, action
