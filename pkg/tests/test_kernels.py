"""The jit kernels and the pure-numpy fallbacks compute identical results."""

import subprocess
import sys

import numpy as np

from fellbundles import _kernels
from fellbundles.algebra import Section, convolve, represent
from fellbundles.bundle import compacts_bundle, trivial_line_bundle
from fellbundles.groupoid import pair_groupoid


def bundles():
    return [compacts_bundle([1, 2]), trivial_line_bundle(pair_groupoid(4))]


def test_backend_selected():
    assert _kernels.backend_name() in ("numba", "numpy")


def test_convolve_fallback_matches_active_backend():
    rng = np.random.default_rng(0)
    for b in bundles():
        f, g = Section.random(b, rng), Section.random(b, rng)
        fast = convolve(f, g).flat
        slow = np.zeros(b.flat_size, dtype=np.complex128)
        _kernels.convolve_triples_numpy(f.flat, g.flat, slow, b.triples,
                                        b.offsets, b.rows, b.cols)
        assert np.allclose(fast, slow, atol=1e-13)


def test_represent_fallback_matches_active_backend():
    rng = np.random.default_rng(1)
    for b in bundles():
        f = Section.random(b, rng)
        for x in b.groupoid.units:
            fast = represent(f, x)
            arrows, row_off, block = b.module_blocks(x)
            slow = np.zeros_like(fast)
            _kernels.represent_fill_numpy(f.flat, slow, block, row_off,
                                          b.offsets, b.rows, b.cols)
            assert np.allclose(fast, slow, atol=1e-13)


def test_pure_numpy_env_flag_switches_backend():
    code = ("import fellbundles._kernels as k; "
            "print(k.backend_name())")
    out = subprocess.run([sys.executable, "-c", code],
                         env={"FELLBUNDLE_PURE_NUMPY": "1", "PATH": "/usr/bin:/bin"},
                         capture_output=True, text=True, cwd="src")
    assert out.stdout.strip() == "numpy"


def test_selftest_invariant_under_backend(tmp_path):
    # the numerical results of a small convolution chain agree across backends
    code = (
        "import numpy as np\n"
        "from fellbundles.algebra import Section, convolve, operator_norm\n"
        "from fellbundles.bundle import compacts_bundle\n"
        "b = compacts_bundle([2, 1])\n"
        "rng = np.random.default_rng(5)\n"
        "f, g = Section.random(b, rng), Section.random(b, rng)\n"
        "print(repr(operator_norm(convolve(f, g))))\n"
    )
    runs = {}
    for flag in ("0", "1"):
        out = subprocess.run([sys.executable, "-c", code],
                             env={"FELLBUNDLE_PURE_NUMPY": flag,
                                  "PATH": "/usr/bin:/bin"},
                             capture_output=True, text=True, cwd="src")
        assert out.returncode == 0, out.stderr
        runs[flag] = out.stdout.strip()
    assert abs(float(runs["0"]) - float(runs["1"])) <= 1e-12
