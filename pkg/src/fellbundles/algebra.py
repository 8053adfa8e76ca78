"""Sections of a Fell bundle and their reduced C*-algebra.

Everything here is finite: sections are dense (one fiber element per arrow),
the convolution algebra is finite dimensional and unital, and the completion
steps of the abstract construction are no-ops.  The operator norm is the
maximum over units of the spectral norm of the left-convolution block matrix
on the fiber module at that unit; by uniqueness of C*-norms in finite
dimensions this is the reduced norm.

Hot paths (convolution, block-matrix assembly) go through
:mod:`fellbundles._kernels`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import convolve_triples, represent_fill
from .bimodule import HilbertModule, is_full, make_module
from .bundle import ConcreteFellBundle, pullback
from .errors import FellBundleError, NotANormalizer, NotPrincipal
from .groupoid import ArrowSubset, GroupoidMorphism, is_gamma_set
from .matrixcore import (
    EPS,
    NORM_EPS,
    MatrixSubspace,
    as_matrix,
    is_positive,
    span,
    spectral_norm,
    threshold,
)


class Section:
    """Assignment of a fiber element to every arrow, stored flat.

    The flat layout (one contiguous row-major block per arrow) is shared with
    the numeric kernels.  Sections are immutable; arithmetic returns fresh
    instances.
    """

    __slots__ = ("bundle", "flat")

    def __init__(self, bundle: ConcreteFellBundle, flat: np.ndarray):
        if flat.shape != (bundle.flat_size,):
            raise ValueError("flat storage has the wrong size")
        self.bundle = bundle
        self.flat = flat
        self.flat.setflags(write=False)

    @classmethod
    def zero(cls, bundle: ConcreteFellBundle) -> "Section":
        return cls(bundle, np.zeros(bundle.flat_size, dtype=np.complex128))

    @classmethod
    def from_values(cls, bundle: ConcreteFellBundle, values: dict,
                    validate: bool = True, eps: float = EPS) -> "Section":
        flat = np.zeros(bundle.flat_size, dtype=np.complex128)
        for gamma, m in values.items():
            gamma = int(gamma)
            m = as_matrix(m)
            if m.shape != bundle.fiber_shape(gamma):
                raise ValueError(f"value at arrow {gamma} has shape {m.shape}, "
                                 f"expected {bundle.fiber_shape(gamma)}")
            if validate:
                res = bundle.fibers[gamma].residual(m)
                if res > threshold(eps, float(np.linalg.norm(m))):
                    raise ValueError(
                        f"value at arrow {gamma} is not in the fiber "
                        f"(residual {res:.3e})")
            o = bundle.offsets[gamma]
            flat[o:o + m.size] = m.reshape(-1)
        return cls(bundle, flat)

    @classmethod
    def random(cls, bundle: ConcreteFellBundle, rng: np.random.Generator) -> "Section":
        flat = np.zeros(bundle.flat_size, dtype=np.complex128)
        for gamma in range(bundle.groupoid.n_arrows):
            fib = bundle.fibers[gamma]
            if fib.dim == 0:
                continue
            coords = rng.standard_normal(fib.dim) + 1j * rng.standard_normal(fib.dim)
            o = bundle.offsets[gamma]
            flat[o:o + fib.rows * fib.cols] = fib.from_coords(coords).reshape(-1)
        return cls(bundle, flat)

    def value(self, gamma: int) -> np.ndarray:
        gamma = int(gamma)
        m, n = self.bundle.fiber_shape(gamma)
        o = self.bundle.offsets[gamma]
        return self.flat[o:o + m * n].reshape(m, n)

    def support(self, eps: float = EPS) -> list[int]:
        cut = threshold(eps, float(np.max(np.abs(self.flat))) if self.flat.size else 0.0)
        return [g for g in range(self.bundle.groupoid.n_arrows)
                if float(np.linalg.norm(self.value(g))) > cut]

    def __add__(self, other: "Section") -> "Section":
        _same_bundle(self, other)
        return Section(self.bundle, self.flat + other.flat)

    def __sub__(self, other: "Section") -> "Section":
        _same_bundle(self, other)
        return Section(self.bundle, self.flat - other.flat)

    def __mul__(self, scalar) -> "Section":
        return Section(self.bundle, self.flat * complex(scalar))

    __rmul__ = __mul__

    def norm_flat(self) -> float:
        return float(np.linalg.norm(self.flat))

    def __repr__(self) -> str:
        return f"Section(bundle={self.bundle!r})"


def _same_bundle(f: Section, g: Section) -> None:
    if f.bundle is not g.bundle:
        raise ValueError("sections live over different bundles")


def _rank(m: np.ndarray, eps: float) -> int:
    """Rank with the scale-aware cutoff: relative above norm 1, absolute below.

    A purely relative cutoff would report full rank for a matrix of numerical
    noise (commutators of an abelian algebra, say), so the cutoff floor is
    ``eps`` itself.
    """
    s = np.linalg.svd(m, compute_uv=False)
    if s.size == 0:
        return 0
    return int(np.sum(s > threshold(eps, float(s[0]))))


def section_basis(bundle: ConcreteFellBundle):
    """Deterministic standard basis: (arrow, fiber index, section) triples."""
    out = []
    for gamma in range(bundle.groupoid.n_arrows):
        fib = bundle.fibers[gamma]
        for k in range(fib.dim):
            flat = np.zeros(bundle.flat_size, dtype=np.complex128)
            o = bundle.offsets[gamma]
            flat[o:o + fib.rows * fib.cols] = fib.basis[k]
            out.append((gamma, k, Section(bundle, flat)))
    return out


def unit_section(bundle: ConcreteFellBundle) -> Section:
    """Units of the fiber algebras over the units, zero elsewhere."""
    values = {}
    for x in bundle.groupoid.units:
        alg = bundle.unit_algebra(x)
        if alg is not None:
            values[x] = alg.unit
    return Section.from_values(bundle, values, validate=False)


# -- *-algebra operations ------------------------------------------------------


def convolve(f: Section, g: Section) -> Section:
    """(f g)(gamma) = sum over factorizations gamma = alpha beta of f(alpha) g(beta)."""
    _same_bundle(f, g)
    b = f.bundle
    out = np.zeros(b.flat_size, dtype=np.complex128)
    convolve_triples(f.flat, g.flat, out, b.triples, b.offsets, b.rows, b.cols)
    return Section(b, out)


def involute(f: Section) -> Section:
    """f*(gamma) = f(gamma^{-1})^* pointwise."""
    b = f.bundle
    flat = np.zeros(b.flat_size, dtype=np.complex128)
    inv = b.groupoid.inverse
    for gamma in range(b.groupoid.n_arrows):
        m = f.value(int(inv[gamma])).conj().T
        o = b.offsets[gamma]
        flat[o:o + m.size] = m.reshape(-1)
    return Section(b, flat)


def restrict(f: Section) -> Section:
    """The conditional expectation onto unit-supported sections: f on units, 0 off."""
    b = f.bundle
    flat = np.zeros(b.flat_size, dtype=np.complex128)
    for x in b.groupoid.units:
        m = f.value(x)
        o = b.offsets[x]
        flat[o:o + m.size] = m.reshape(-1)
    return Section(b, flat)


def inner_product(f: Section, g: Section) -> Section:
    """P(f* g): at each unit x the sum of f(gamma)* g(gamma) over source x."""
    _same_bundle(f, g)
    b = f.bundle
    values = {}
    for x in b.groupoid.units:
        n = b.unit_dims[x]
        acc = np.zeros((n, n), dtype=np.complex128)
        for gamma in b.groupoid.arrows_by_source(x):
            acc += f.value(int(gamma)).conj().T @ g.value(int(gamma))
        values[x] = acc
    return Section.from_values(b, values, validate=False)


def sup_norm(f: Section) -> float:
    """Largest fiberwise spectral norm."""
    return max(spectral_norm(f.value(g)) for g in range(f.bundle.groupoid.n_arrows))


def l2_norm(f: Section) -> float:
    """Square root of the largest norm of <f, f> over the units."""
    ip = inner_product(f, f)
    worst = max(spectral_norm(ip.value(x)) for x in f.bundle.groupoid.units)
    return float(np.sqrt(worst))


@dataclass(frozen=True)
class L2Vector:
    """A section viewed inside the Hilbert module completion (finite: itself)."""

    section: Section
    norm: float


def embed_l2(f: Section) -> L2Vector:
    return L2Vector(section=f, norm=l2_norm(f))


# -- regular representation ----------------------------------------------------


@dataclass(frozen=True)
class RegularModule:
    """The fiber module at a unit: stacked fibers with source there.

    Elements are ``height x n_x`` matrices; the block of rows at
    ``row_offsets[i]`` is the component in the fiber at ``arrows[i]``.  The
    inner product ``c^* d`` realizes the blockwise sum of ``c_g^* d_g``.
    """

    bundle: ConcreteFellBundle
    unit: int
    arrows: np.ndarray
    row_offsets: np.ndarray
    height: int
    module: HilbertModule

    def block_position(self, gamma: int) -> int:
        hits = np.flatnonzero(self.arrows == int(gamma))
        if hits.size == 0:
            raise ValueError(f"arrow {gamma} does not have source {self.unit}")
        return int(hits[0])

    def embed(self, values: dict) -> np.ndarray:
        """Stack per-arrow matrices into a module element."""
        out = np.zeros((self.height, self.bundle.unit_dims[self.unit]),
                       dtype=np.complex128)
        for gamma, m in values.items():
            i = self.block_position(int(gamma))
            m = as_matrix(m)
            out[int(self.row_offsets[i]):int(self.row_offsets[i]) + m.shape[0], :] = m
        return out

    def embed_fiber(self, gamma: int, m) -> np.ndarray:
        return self.embed({gamma: m})


def fiber_module(bundle: ConcreteFellBundle, x: int, eps: float = EPS) -> RegularModule:
    """Build and certify the Hilbert module over the fiber algebra at ``x``."""
    x = int(x)
    alg = bundle.unit_algebra(x)
    if alg is None:
        raise FellBundleError(f"fiber algebra at unit {x} is zero")
    arrows, row_off, _ = bundle.module_blocks(x)
    height = bundle.stack_height(x)
    basis = []
    for pos, gamma in enumerate(arrows):
        fib = bundle.fibers[int(gamma)]
        for k in range(fib.dim):
            stacked = np.zeros((height, bundle.unit_dims[x]), dtype=np.complex128)
            r0 = int(row_off[pos])
            stacked[r0:r0 + fib.rows, :] = fib.basis_matrix(k)
            basis.append(stacked)
    carrier = span(basis, shape=(height, bundle.unit_dims[x]), eps=eps)
    module = make_module(carrier, alg, eps=eps)
    if not is_full(module, eps):
        raise FellBundleError(f"fiber module at unit {x} failed its fullness certificate")
    return RegularModule(bundle=bundle, unit=x, arrows=arrows, row_offsets=row_off,
                         height=height, module=module)


def represent(f: Section, x: int) -> np.ndarray:
    """Block matrix of left convolution by ``f`` on the fiber module at ``x``.

    Block ``(i, j)`` is the fiber value ``f(gamma_i gamma_j^{-1})``.
    """
    b = f.bundle
    arrows, row_off, block = b.module_blocks(int(x))
    n = b.stack_height(int(x))
    out = np.zeros((n, n), dtype=np.complex128)
    represent_fill(f.flat, out, block, row_off, b.offsets, b.rows, b.cols)
    return out


def operator_norm(f: Section) -> float:
    """Reduced norm: the largest spectral norm of the representing matrices."""
    return max(spectral_norm(represent(f, x)) for x in f.bundle.groupoid.units)


@dataclass
class AlgebraImage:
    """Basis of the image of all sections under the sum of the representations.

    Elements are block-diagonal matrices, one block per unit, of total size
    ``total``.  The image is closed under product and adjoint and the map from
    sections is injective (both certified at construction).
    """

    bundle: ConcreteFellBundle
    units: tuple[int, ...]
    heights: dict[int, int]
    offsets: dict[int, int]
    total: int
    carrier: MatrixSubspace
    basis_index: list[tuple[int, int]]  # (arrow, fiber index) per basis element
    _unit_matrix: np.ndarray | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.carrier.dim

    def represent(self, f: Section) -> np.ndarray:
        out = np.zeros((self.total, self.total), dtype=np.complex128)
        for x in self.units:
            o = self.offsets[x]
            out[o:o + self.heights[x], o:o + self.heights[x]] = represent(f, x)
        return out

    def unit_matrix(self) -> np.ndarray:
        if self._unit_matrix is None:
            self._unit_matrix = self.represent(unit_section(self.bundle))
        return self._unit_matrix

    def center_dim(self, eps: float = EPS) -> int:
        mats = self.carrier.matrices()
        k = len(mats)
        rows = []
        for bj in mats:
            block = np.stack([(bk @ bj - bj @ bk).reshape(-1) for bk in mats], axis=1)
            rows.append(block)
        m = np.concatenate(rows, axis=0)
        if m.size == 0:
            return k
        return k - _rank(m, eps)

    def commutant_dim_of(self, sub: MatrixSubspace, eps: float = EPS) -> int:
        """Dimension of the commutant of ``sub`` inside the image."""
        mats = self.carrier.matrices()
        k = len(mats)
        rows = []
        for dj in sub.matrices():
            block = np.stack([(bk @ dj - dj @ bk).reshape(-1) for bk in mats], axis=1)
            rows.append(block)
        m = np.concatenate(rows, axis=0) if rows else np.zeros((1, k))
        return k - _rank(m, eps)


def algebra_image(bundle: ConcreteFellBundle, eps: float = EPS) -> AlgebraImage:
    """Span of the represented standard section basis, with faithfulness check."""
    units = tuple(bundle.groupoid.units)
    heights = {x: bundle.stack_height(x) for x in units}
    offsets = {}
    total = 0
    for x in units:
        offsets[x] = total
        total += heights[x]
    mats = []
    index = []
    img = AlgebraImage(bundle=bundle, units=units, heights=heights, offsets=offsets,
                       total=total, carrier=span([], shape=(total, total)),
                       basis_index=[])
    for gamma, k, f in section_basis(bundle):
        mats.append(img.represent(f))
        index.append((gamma, k))
    carrier = span(mats, shape=(total, total), eps=eps)
    expected = bundle.total_fiber_dim()
    if carrier.dim != expected:
        raise FellBundleError(
            f"regular representation lost rank: {carrier.dim} of {expected}; "
            "the bundle is numerically degenerate")
    img.carrier = carrier
    img.basis_index = index
    return img


# -- normalizers and multipliers -------------------------------------------------


def is_normalizer(f: Section, eps: float = EPS) -> bool:
    """Support contained in a set on which range and source are injective."""
    return is_gamma_set(ArrowSubset(f.bundle.groupoid, tuple(f.support(eps))))


def normalizer_compression(g: Section, f: Section, eps: float = EPS) -> Section:
    """f* g f for unit-supported g and a normalizer f; lands on the units.

    The convolution result is certified to vanish off the units and to match
    the closed form f(gamma)* g(r(gamma)) f(gamma) at each source unit.
    """
    _same_bundle(g, f)
    b = f.bundle
    units = set(b.groupoid.units)
    if any(s not in units for s in g.support(eps)):
        raise ValueError("compression needs a unit-supported middle section")
    if not is_normalizer(f, eps):
        raise NotANormalizer()
    out = convolve(convolve(involute(f), g), f)
    scale = max(1.0, sup_norm(f) ** 2 * sup_norm(g))
    off = 0.0
    for gamma in range(b.groupoid.n_arrows):
        if gamma not in units:
            off = max(off, float(np.linalg.norm(out.value(gamma))))
    if off > threshold(eps, scale) * 10:
        raise FellBundleError(f"compression leaked off the units (residual {off:.3e})")
    closed = {}
    for gamma in f.support(eps):
        x = int(b.groupoid.source[gamma])
        r = int(b.groupoid.range[gamma])
        v = f.value(gamma).conj().T @ g.value(r) @ f.value(gamma)
        closed[x] = closed.get(x, 0) + v
    for x, v in closed.items():
        gap = float(np.linalg.norm(out.value(x) - v))
        if gap > threshold(eps, scale) * 10:
            raise FellBundleError(
                f"compression disagrees with the closed form at unit {x}")
    return restrict(out)


@dataclass(frozen=True)
class UnitMultiplier:
    """Multiplier from a bounded function on the unit space: (g f)(x) = g(r) f."""

    bundle: ConcreteFellBundle
    values: dict[int, complex]

    def apply(self, f: Section) -> Section:
        b = self.bundle
        flat = np.array(f.flat)
        for gamma in range(b.groupoid.n_arrows):
            o = b.offsets[gamma]
            size = int(b.rows[gamma] * b.cols[gamma])
            flat[o:o + size] *= self.values[int(b.groupoid.range[gamma])]
        return Section(b, flat)

    def apply_right(self, f: Section) -> Section:
        b = self.bundle
        flat = np.array(f.flat)
        for gamma in range(b.groupoid.n_arrows):
            o = b.offsets[gamma]
            size = int(b.rows[gamma] * b.cols[gamma])
            flat[o:o + size] *= self.values[int(b.groupoid.source[gamma])]
        return Section(b, flat)

    def adjoint(self) -> "UnitMultiplier":
        return UnitMultiplier(self.bundle,
                              {x: np.conj(v) for x, v in self.values.items()})

    def block(self, x: int) -> np.ndarray:
        """Diagonal matrix on the fiber module at ``x``: g(r(gamma)) per block."""
        b = self.bundle
        arrows, row_off, _ = b.module_blocks(int(x))
        n = b.stack_height(int(x))
        out = np.zeros((n, n), dtype=np.complex128)
        for pos, gamma in enumerate(arrows):
            r0 = int(row_off[pos])
            h = int(b.rows[int(gamma)])
            out[r0:r0 + h, r0:r0 + h] = \
                self.values[int(b.groupoid.range[int(gamma)])] * np.eye(h)
        return out

    def stacked_matrix(self, image: AlgebraImage) -> np.ndarray:
        out = np.zeros((image.total, image.total), dtype=np.complex128)
        for x in image.units:
            o = image.offsets[x]
            out[o:o + image.heights[x], o:o + image.heights[x]] = self.block(x)
        return out

    def is_indicator(self) -> bool:
        return all(abs(v) < 1e-12 or abs(v - 1.0) < 1e-12 for v in self.values.values())

    def multiplier_residual(self, image: AlgebraImage) -> float:
        """How far the stacked matrix is from acting as this multiplier."""
        big = self.stacked_matrix(image)
        worst = 0.0
        for _, _, f in section_basis(self.bundle):
            lhs = big @ image.represent(f)
            rhs = image.represent(self.apply(f))
            worst = max(worst, float(np.linalg.norm(lhs - rhs)))
            lhs2 = image.represent(f) @ big
            rhs2 = image.represent(self.apply_right(f))
            worst = max(worst, float(np.linalg.norm(lhs2 - rhs2)))
        return worst

    def centralizes(self, image: AlgebraImage, eps: float = EPS) -> bool:
        big = self.stacked_matrix(image)
        for m in image.carrier.matrices():
            if float(np.linalg.norm(big @ m - m @ big)) > threshold(eps, 1.0) * 10:
                return False
        return True


def multiplier_from_unit_function(bundle: ConcreteFellBundle, values) -> UnitMultiplier:
    vals = {int(x): complex(values[x]) for x in bundle.groupoid.units}
    return UnitMultiplier(bundle=bundle, values=vals)


# -- expectation and isometry suites ----------------------------------------------


@dataclass(frozen=True)
class ExpectationReport:
    samples: int
    psd_failures: int
    pointwise_domination_failures: int
    contraction_gap: float
    min_faithfulness_ratio: float
    bimodule_residual: float
    normalizer_residual: float

    def ok(self, norm_eps: float = NORM_EPS) -> bool:
        return (self.psd_failures == 0
                and self.pointwise_domination_failures == 0
                and self.contraction_gap <= norm_eps
                and self.min_faithfulness_ratio > 10 * norm_eps
                and self.bimodule_residual <= norm_eps
                and self.normalizer_residual <= norm_eps)


def _random_gamma_set_section(bundle: ConcreteFellBundle,
                              rng: np.random.Generator) -> Section:
    """Random normalizer: one random arrow per source unit, injective ranges."""
    g = bundle.groupoid
    chosen = []
    used_ranges: set[int] = set()
    order = list(g.units)
    rng.shuffle(order)
    for x in order:
        candidates = [int(a) for a in g.arrows_by_source(x)
                      if bundle.fiber_dim(int(a)) > 0
                      and int(g.range[int(a)]) not in used_ranges]
        if not candidates:
            continue
        pick = candidates[int(rng.integers(len(candidates)))]
        chosen.append(pick)
        used_ranges.add(int(g.range[pick]))
    flat = np.zeros(bundle.flat_size, dtype=np.complex128)
    for a in chosen:
        fib = bundle.fibers[a]
        coords = rng.standard_normal(fib.dim) + 1j * rng.standard_normal(fib.dim)
        o = bundle.offsets[a]
        flat[o:o + fib.rows * fib.cols] = fib.from_coords(coords).reshape(-1)
    return Section(bundle, flat)


def check_expectation(bundle: ConcreteFellBundle, rng: np.random.Generator,
                      samples: int = 100, eps: float = EPS,
                      norm_eps: float = NORM_EPS) -> ExpectationReport:
    """Randomized certificate for the conditional-expectation properties.

    Checks, per sample: <f, f> is positive at every unit and dominates
    <P f, P f> pointwise; |P(f)| <= |f|; P(f* f) detects f (faithfulness
    ratio); P(a f b) = a P(f) b for unit-supported a, b; and
    f* P(b) f = P(f* b f) for normalizers f.
    """
    g = bundle.groupoid
    psd_fail = dom_fail = 0
    contraction = 0.0
    faithful = np.inf
    bimodule_res = 0.0
    normalizer_res = 0.0
    for _ in range(samples):
        f = Section.random(bundle, rng)
        ip = inner_product(f, f)
        pf = restrict(f)
        ip_p = inner_product(pf, pf)
        for x in g.units:
            if not is_positive(ip.value(x), eps):
                psd_fail += 1
            if not is_positive(ip.value(x) - ip_p.value(x), eps):
                dom_fail += 1
        nf = operator_norm(f)
        npf = operator_norm(pf)
        contraction = max(contraction, (npf - nf) / max(1.0, nf))
        star = convolve(involute(f), f)
        pstar = restrict(star)
        flat_sq = float(np.linalg.norm(f.flat)) ** 2
        if flat_sq > 1e-12:
            faithful = min(faithful, operator_norm(pstar) / (nf ** 2))
        a = restrict(Section.random(bundle, rng))
        c = restrict(Section.random(bundle, rng))
        lhs = restrict(convolve(convolve(a, f), c))
        rhs = convolve(convolve(a, restrict(f)), c)
        scale = max(1.0, sup_norm(a) * sup_norm(f) * sup_norm(c))
        bimodule_res = max(bimodule_res,
                           float(np.linalg.norm(lhs.flat - rhs.flat)) / scale)
        h = _random_gamma_set_section(bundle, rng)
        bsec = Section.random(bundle, rng)
        lhs2 = convolve(convolve(involute(h), restrict(bsec)), h)
        rhs2 = restrict(convolve(convolve(involute(h), bsec), h))
        scale2 = max(1.0, sup_norm(h) ** 2 * sup_norm(bsec))
        normalizer_res = max(normalizer_res,
                             float(np.linalg.norm(lhs2.flat - rhs2.flat)) / scale2)
    return ExpectationReport(samples=samples, psd_failures=psd_fail,
                             pointwise_domination_failures=dom_fail,
                             contraction_gap=contraction,
                             min_faithfulness_ratio=float(faithful),
                             bimodule_residual=bimodule_res,
                             normalizer_residual=normalizer_res)


@dataclass(frozen=True)
class IsometryReport:
    samples: int
    max_gap: float

    def ok(self, norm_eps: float = NORM_EPS) -> bool:
        return self.max_gap <= norm_eps


def subbundle_inclusion_isometric(inclusion: GroupoidMorphism,
                                  bundle: ConcreteFellBundle,
                                  rng: np.random.Generator, samples: int = 50,
                                  eps: float = EPS) -> IsometryReport:
    """Reduced norms agree on sections supported in an embedded subgroupoid.

    ``inclusion`` must be injective; the subbundle is the pull-back along it.
    Each sample draws a random section of the subbundle and compares its norm
    there with the norm of its extension by zero.
    """
    m = inclusion.map
    if len(set(int(v) for v in m)) != inclusion.domain.n_arrows:
        raise ValueError("inclusion morphism must be injective")
    sub = pullback(inclusion, bundle, eps)
    worst = 0.0
    for _ in range(samples):
        h = Section.random(sub, rng)
        values = {int(m[w]): h.value(w) for w in range(sub.groupoid.n_arrows)}
        extended = Section.from_values(bundle, values, validate=False)
        inner = operator_norm(h)
        outer = operator_norm(extended)
        worst = max(worst, abs(inner - outer) / max(1.0, outer))
    return IsometryReport(samples=samples, max_gap=worst)


@dataclass(frozen=True)
class DiagonalReport:
    dim: int
    commutant_dim: int

    @property
    def maximal_abelian(self) -> bool:
        return self.dim == self.commutant_dim


def diagonal_subalgebra(bundle: ConcreteFellBundle, eps: float = EPS) -> DiagonalReport:
    """Unit-supported sections inside the image of a principal line bundle.

    Certifies the subalgebra is maximal abelian by computing its commutant
    within the image.  Requires a principal groupoid and one-dimensional
    fibers.
    """
    g = bundle.groupoid
    for gamma in range(g.n_arrows):
        if not g.is_unit(gamma) and int(g.range[gamma]) == int(g.source[gamma]):
            raise NotPrincipal(gamma)
    if any(bundle.fiber_dim(a) != 1 for a in range(g.n_arrows)):
        raise ValueError("diagonal subalgebras are computed for line bundles")
    img = algebra_image(bundle, eps)
    diag_mats = [img.represent(f) for gamma, _, f in section_basis(bundle)
                 if g.is_unit(gamma)]
    sub = span(diag_mats, shape=(img.total, img.total), eps=eps)
    comm = img.commutant_dim_of(sub, eps)
    return DiagonalReport(dim=sub.dim, commutant_dim=comm)
