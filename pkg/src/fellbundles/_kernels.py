"""Hot numeric kernels: section convolution and regular-representation assembly.

Sections live in a single flat complex array with one contiguous row-major
block per arrow.  The two inner loops that dominate randomized suites are

* convolution over the precomputed factorization triples ``(product, left,
  right)``, a sum of small matrix products per triple, and
* filling the dense block matrix of left convolution on a fiber module.

Both carry an ``@njit`` fast path and a pure-numpy fallback.  Set
``FELLBUNDLE_PURE_NUMPY=1`` to skip numba entirely (the fallback is also used
automatically when numba is unavailable).  Both paths compute identical
results; ``benchmarks/bench_kernels.py`` compares their speed.
"""

from __future__ import annotations

import os

import numpy as np

PURE_NUMPY = os.environ.get("FELLBUNDLE_PURE_NUMPY", "0") == "1"

if not PURE_NUMPY:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        PURE_NUMPY = True


def convolve_triples_numpy(a, b, out, triples, offsets, rows, cols):
    """out[p] += a[l] @ b[r] for every factorization triple (p, l, r)."""
    for t in range(triples.shape[0]):
        p, l, r = triples[t]
        m, k, n = rows[l], cols[l], cols[r]
        left = a[offsets[l]:offsets[l] + m * k].reshape(m, k)
        right = b[offsets[r]:offsets[r] + k * n].reshape(k, n)
        out[offsets[p]:offsets[p] + m * n] += (left @ right).reshape(-1)


def represent_fill_numpy(f, out, block_arrow, row_off, offsets, rows, cols):
    """Write the block matrix with (i, j) block f(gamma_i gamma_j^{-1})."""
    nb = block_arrow.shape[0]
    for i in range(nb):
        for j in range(nb):
            g = block_arrow[i, j]
            m, n = rows[g], cols[g]
            blk = f[offsets[g]:offsets[g] + m * n].reshape(m, n)
            out[row_off[i]:row_off[i] + m, row_off[j]:row_off[j] + n] = blk


if not PURE_NUMPY:

    @njit(cache=True)
    def _convolve_triples_jit(a, b, out, triples, offsets, rows, cols):
        for t in range(triples.shape[0]):
            p = triples[t, 0]
            l = triples[t, 1]
            r = triples[t, 2]
            m = rows[l]
            k = cols[l]
            n = cols[r]
            oa = offsets[l]
            ob = offsets[r]
            oo = offsets[p]
            for i in range(m):
                for j in range(n):
                    acc = 0.0 + 0.0j
                    for s in range(k):
                        acc += a[oa + i * k + s] * b[ob + s * n + j]
                    out[oo + i * n + j] += acc

    @njit(cache=True)
    def _represent_fill_jit(f, out, block_arrow, row_off, offsets, rows, cols):
        nb = block_arrow.shape[0]
        for i in range(nb):
            for j in range(nb):
                g = block_arrow[i, j]
                m = rows[g]
                n = cols[g]
                og = offsets[g]
                for u in range(m):
                    for v in range(n):
                        out[row_off[i] + u, row_off[j] + v] = f[og + u * n + v]

    convolve_triples = _convolve_triples_jit
    represent_fill = _represent_fill_jit
else:
    convolve_triples = convolve_triples_numpy
    represent_fill = represent_fill_numpy


def backend_name() -> str:
    return "numpy" if PURE_NUMPY else "numba"
