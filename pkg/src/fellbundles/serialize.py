"""JSON encoding of groupoids, bundles, sections, certificates, and reports.

Conventions: complex scalars are ``[re, im]`` pairs, matrices are row-major
nested arrays of those pairs, dictionary keys are decimal strings, and
canonical dumps sort keys so identical data serializes byte-identically.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any

import numpy as np

from .bundle import ConcreteFellBundle, validate_fell_bundle
from .groupoid import FiniteGroupoid, GroupoidMorphism, delta, morphism, validate_groupoid
from .matrixcore import EPS, MatrixSubspace, span


def encode_complex(z: complex) -> list[float]:
    z = complex(z)
    return [float(z.real), float(z.imag)]


def decode_complex(v) -> complex:
    if isinstance(v, (int, float)):
        return complex(v)
    re, im = v
    return complex(float(re), float(im))


def encode_matrix(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=np.complex128)
    return [[encode_complex(m[i, j]) for j in range(m.shape[1])]
            for i in range(m.shape[0])]


def decode_matrix(rows, shape: tuple[int, int] | None = None) -> np.ndarray:
    if shape is not None and not rows:
        return np.zeros(shape, dtype=np.complex128)
    out = np.array([[decode_complex(v) for v in row] for row in rows],
                   dtype=np.complex128)
    if shape is not None and out.shape != tuple(shape):
        raise ValueError(f"matrix has shape {out.shape}, expected {tuple(shape)}")
    return out


def canonical_dumps(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":")) + "\n"


def digest(text_or_bytes) -> str:
    raw = text_or_bytes.encode() if isinstance(text_or_bytes, str) else text_or_bytes
    return hashlib.sha256(raw).hexdigest()


# -- groupoids -----------------------------------------------------------------


def groupoid_to_dict(g: FiniteGroupoid) -> dict:
    compose = [[int(a), int(b), int(g.compose_table[a, b])]
               for a, b in g.composable_pairs]
    return {
        "arrows": g.n_arrows,
        "units": [int(u) for u in g.units],
        "range": [int(v) for v in g.range],
        "source": [int(v) for v in g.source],
        "inverse": [int(v) for v in g.inverse],
        "compose": compose,
    }


def groupoid_from_dict(data: dict) -> FiniteGroupoid:
    n = int(data["arrows"])
    rng = data["range"]
    if len(rng) != n:
        raise ValueError("range table length does not match the arrow count")
    return validate_groupoid(data["units"], rng, data["source"], data["inverse"],
                             [tuple(t) for t in data["compose"]])


def morphism_to_dict(m: GroupoidMorphism) -> dict:
    return {
        "domain": groupoid_to_dict(m.domain),
        "codomain": groupoid_to_dict(m.codomain),
        "map": [int(v) for v in m.map],
    }


def morphism_from_dict(data: dict) -> GroupoidMorphism:
    dom = groupoid_from_dict(data["domain"])
    cod = delta() if data.get("codomain") == "delta" else \
        groupoid_from_dict(data["codomain"])
    return morphism(dom, cod, data["map"])


# -- bundles ---------------------------------------------------------------------


def bundle_to_dict(b: ConcreteFellBundle) -> dict:
    return {
        "groupoid": groupoid_to_dict(b.groupoid),
        "unit_dims": {str(x): int(n) for x, n in sorted(b.unit_dims.items())},
        "fibers": {str(a): [encode_matrix(m) for m in b.fibers[a].matrices()]
                   for a in range(b.groupoid.n_arrows)},
    }


def bundle_from_dict(data: dict, eps: float = EPS,
                     validate: bool = True) -> ConcreteFellBundle:
    g = groupoid_from_dict(data["groupoid"])
    unit_dims = {int(x): int(n) for x, n in data["unit_dims"].items()}
    fibers = {}
    for a in range(g.n_arrows):
        shape = (unit_dims[int(g.range[a])], unit_dims[int(g.source[a])])
        mats = [decode_matrix(m, shape) for m in data["fibers"].get(str(a), [])]
        fibers[a] = span(mats, shape=shape, eps=eps)
    bundle = ConcreteFellBundle(g, unit_dims, fibers)
    if validate:
        validate_fell_bundle(bundle, eps)
    return bundle


# -- sections ----------------------------------------------------------------------


def section_to_dict(f, inline_bundle: bool = True) -> dict:
    from .algebra import Section

    assert isinstance(f, Section)
    out = {"values": {str(g): encode_matrix(f.value(g))
                      for g in range(f.bundle.groupoid.n_arrows)}}
    if inline_bundle:
        out["bundle"] = bundle_to_dict(f.bundle)
    return out


def section_from_dict(data: dict, bundle: ConcreteFellBundle | None = None,
                      eps: float = EPS):
    from .algebra import Section

    if bundle is None:
        if "bundle" not in data or not isinstance(data["bundle"], dict):
            raise ValueError("section data carries no inline bundle")
        bundle = bundle_from_dict(data["bundle"], eps)
    values = {}
    for key, rows in data["values"].items():
        gamma = int(key)
        values[gamma] = decode_matrix(rows, bundle.fiber_shape(gamma))
    return Section.from_values(bundle, values, validate=True, eps=eps), bundle


# -- cocycles and actions ------------------------------------------------------------


def cocycle_from_dict(data: dict, g: FiniteGroupoid) -> dict:
    """Parse ``{"(a,b)": [re, im], ...}`` into a composable-pair table."""
    out = {}
    for key, val in data.items():
        inner = key.strip()
        if inner.startswith("(") and inner.endswith(")"):
            inner = inner[1:-1]
        a_str, b_str = inner.split(",")
        out[(int(a_str), int(b_str))] = decode_complex(val)
    return out


def action_from_dict(data: dict):
    """Decode ``{"groupoid": ..., "action": {"algebras": ..., "maps": ...}}``."""
    from .bimodule import star_algebra
    from .bundle import GroupoidAction

    g = groupoid_from_dict(data["groupoid"])
    spec = data["action"]
    algebras = {}
    for key, desc in spec["algebras"].items():
        n = int(desc["dim"])
        mats = [decode_matrix(m, (n, n)) for m in desc["basis"]]
        algebras[int(key)] = star_algebra(mats, ambient=n)
    maps = {}
    for key, rows in spec["maps"].items():
        maps[int(key)] = decode_matrix(rows)
    return g, GroupoidAction(groupoid=g, algebras=algebras, maps=maps)


# -- certificates ----------------------------------------------------------------------


def certificate_to_dict(cert) -> dict:
    from .morita import MoritaCertificate

    assert isinstance(cert, MoritaCertificate)
    img = cert.ambient
    return {
        "ambient": {
            "total": img.total,
            "units": [int(x) for x in img.units],
            "heights": {str(x): int(img.heights[x]) for x in img.units},
            "basis": [encode_matrix(m) for m in img.carrier.matrices()],
        },
        "projections": [encode_matrix(p) for p in cert.projections],
        "witnesses": [[[int(j), int(k)] for j, k in cert.witnesses[i]]
                      for i in (0, 1)],
        "corner_dims": [int(d) for d in cert.corner_dims],
        "residuals": {k: float(v) for k, v in sorted(cert.residuals.items())},
        "provenance": cert.provenance,
    }


def verify_certificate_dict(data: dict, eps: float = EPS) -> dict:
    """Re-check a stored certificate without re-deriving it.

    Verifies: basis orthonormality and closure under adjoint (spot), the two
    projections are Hermitian idempotents in the span summing to the span's
    unit action on itself, and the stored witness products span the full
    ambient dimension for both corners.  Returns a report dict.
    """
    total = int(data["ambient"]["total"])
    basis = [decode_matrix(m, (total, total)) for m in data["ambient"]["basis"]]
    amb = span(basis, shape=(total, total), eps=eps)
    checks = {}
    checks["basis_rank"] = {"expected": len(basis), "got": amb.dim,
                            "passed": amb.dim == len(basis)}
    adj_ok = all(amb.contains(m.conj().T, eps) for m in basis)
    prod_ok = all(amb.contains(basis[0] @ m, eps) for m in basis) if basis else True
    checks["star_closure"] = {"passed": bool(adj_ok and prod_ok)}
    ps = [decode_matrix(p, (total, total)) for p in data["projections"]]
    proj_res = 0.0
    for p in ps:
        proj_res = max(proj_res, float(np.linalg.norm(p @ p - p)),
                       float(np.linalg.norm(p - p.conj().T)))
    checks["projections"] = {"residual": proj_res,
                             "passed": proj_res <= eps * 100}
    full_ok = True
    for i, p in enumerate(ps):
        gens = [basis[j] @ p @ basis[k] for j, k in data["witnesses"][i]]
        got = span(gens, shape=(total, total), eps=eps).dim if gens else 0
        passed = got == len(basis)
        checks[f"corner_{i}_full"] = {"span": got, "needed": len(basis),
                                      "passed": passed}
        full_ok = full_ok and passed
    passed = all(c["passed"] for c in checks.values())
    return {"checks": checks, "passed": passed}
