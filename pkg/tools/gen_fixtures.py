#!/usr/bin/env python3
"""Regenerate the JSON fixtures shipped in fixtures/.

Run from the repository root: ``python3 tools/gen_fixtures.py``.  The test
suite cross-checks the committed fixtures against these constructions, so a
change here should be reflected by re-running this script.
"""

import json
from pathlib import Path

import numpy as np

from fellbundles.bimodule import diagonal_algebra, scalars
from fellbundles.bundle import compacts_bundle, from_bimodule, trivial_line_bundle
from fellbundles.groupoid import (
    cyclic_group_table,
    delta,
    find_isomorphism,
    from_group,
    klein_four_table,
    pair_groupoid,
)
from fellbundles.selftest import pauli_cocycle
from fellbundles.serialize import (
    bundle_to_dict,
    canonical_dumps,
    encode_complex,
    encode_matrix,
    groupoid_to_dict,
    section_to_dict,
)

OUT = Path(__file__).resolve().parent.parent / "fixtures"


def write(name: str, data: dict) -> None:
    (OUT / name).write_text(canonical_dumps(data), encoding="utf-8")
    print(f"wrote fixtures/{name}")


def main() -> None:
    OUT.mkdir(exist_ok=True)

    write("delta.json", groupoid_to_dict(delta()))

    # a deliberately non-associative table: Z/5 with one corrupted product
    broken = cyclic_group_table(5)
    broken[1, 1] = 3
    write("broken_groupoid.json", {
        "arrows": 5,
        "units": [0],
        "range": [0] * 5,
        "source": [0] * 5,
        "inverse": [0, 4, 3, 2, 1],
        "compose": [[a, b, int(broken[a, b])] for a in range(5) for b in range(5)],
    })

    write("delta_scalar_bundle.json",
          bundle_to_dict(from_bimodule(scalars(), scalars(), [np.eye(1)])))

    z2 = from_group(cyclic_group_table(2))
    z2_line = trivial_line_bundle(z2)
    write("z2_line.json", bundle_to_dict(z2_line))

    ones = {str(a): encode_matrix(np.eye(1)) for a in range(2)}
    write("z2_section_ones.json", {"bundle": "z2_line.json", "values": ones})

    b12 = compacts_bundle([1, 2])
    write("compacts_12.json", bundle_to_dict(b12))

    iso = find_isomorphism(b12.groupoid, delta())
    write("pair2_to_delta_morphism.json", {
        "domain": groupoid_to_dict(b12.groupoid),
        "codomain": "delta",
        "map": [int(v) for v in iso],
    })

    klein = from_group(klein_four_table())
    cocycle = {}
    for a, b in klein.composable_pairs:
        cocycle[f"({int(a)},{int(b)})"] = encode_complex(pauli_cocycle(int(a), int(b)))
    write("z2z2_cocycle.json", {"groupoid": groupoid_to_dict(klein),
                                "cocycle": cocycle})

    alg = diagonal_algebra(2)
    swap = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)
    flip = np.zeros((2, 2), dtype=np.complex128)
    for i in range(2):
        flip[:, i] = alg.carrier.coords(swap @ alg.carrier.basis_matrix(i) @ swap)
    e = z2.units[0]
    other = 1 - e
    write("swap_action.json", {
        "groupoid": groupoid_to_dict(z2),
        "action": {
            "algebras": {str(e): {
                "dim": 2,
                "basis": [encode_matrix(alg.carrier.basis_matrix(i)) for i in range(2)],
            }},
            "maps": {str(e): encode_matrix(np.eye(2)),
                     str(other): encode_matrix(flip)},
        },
    })


if __name__ == "__main__":
    main()
