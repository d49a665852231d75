"""Parity between the compiled kernels and the numpy fallback."""

import numpy as np
import pytest

from voxmodem import kernels
from voxmodem.coding import ACC_NEXT_STATE, ACC_OUT_BITS, constellation, conv_trellis
from voxmodem.kernels import numpy_backend

try:
    from voxmodem.kernels import _core
except ImportError:
    _core = None

needs_core = pytest.mark.skipif(_core is None, reason="compiled kernels not built")


def _random_case(rng, n, trellis):
    ns, ob = trellis
    out_llr = rng.normal(0, 6, (n, ob.shape[2]))
    in_llr = rng.normal(0, 2, n)
    return ns, ob, out_llr, in_llr


@needs_core
@pytest.mark.parametrize("mode", [0, 1, 2])
@pytest.mark.parametrize("terminated", [True, False])
def test_bcjr_backends_agree_conv_trellis(mode, terminated):
    rng = np.random.default_rng(10 + mode)
    ns, ob, out_llr, in_llr = _random_case(rng, 311, conv_trellis())
    a1, b1 = numpy_backend.bcjr_siso(ns, ob, out_llr, in_llr, terminated, mode)
    a2, b2 = _core.bcjr_siso(ns, ob, out_llr, in_llr, terminated, mode)
    assert np.allclose(a1, a2, atol=1e-9)
    assert np.allclose(b1, b2, atol=1e-9)


@needs_core
@pytest.mark.parametrize("mode", [0, 1, 2])
def test_bcjr_backends_agree_accumulator(mode):
    rng = np.random.default_rng(20 + mode)
    ns, ob, out_llr, in_llr = _random_case(rng, 257, (ACC_NEXT_STATE, ACC_OUT_BITS))
    a1, b1 = numpy_backend.bcjr_siso(ns, ob, out_llr, in_llr, False, mode)
    a2, b2 = _core.bcjr_siso(ns, ob, out_llr, in_llr, False, mode)
    assert np.allclose(a1, a2, atol=1e-9)
    assert np.allclose(b1, b2, atol=1e-9)


@needs_core
@pytest.mark.parametrize("q", [2, 4, 6])
@pytest.mark.parametrize("mode", [0, 1, 2])
def test_demap_backends_agree(q, mode):
    rng = np.random.default_rng(q * 10 + mode)
    pts, pb = constellation(q)
    n = 97
    z = rng.normal(0, 1, n) + 1j * rng.normal(0, 1, n)
    nv = np.abs(rng.normal(0.4, 0.1, n)) + 0.05
    pr = rng.normal(0, 3, (n, q))
    e1 = numpy_backend.demap_maxlog(z, nv, pr, pts, pb, mode)
    e2 = _core.demap_maxlog(z, nv, pr, pts, pb, mode)
    assert np.allclose(e1, e2, atol=1e-9)


def test_exact_mode_matches_logsumexp():
    # mode 2 must be a true log-sum-exp posterior
    from scipy.special import logsumexp

    rng = np.random.default_rng(5)
    pts, pb = constellation(2)
    z = rng.normal(0, 1, 8) + 1j * rng.normal(0, 1, 8)
    nv = np.full(8, 0.7)
    pr = rng.normal(0, 1, (8, 2))
    ext = kernels.demap_maxlog(z, nv, pr, pts, pb, kernels.MODE_EXACT)
    metric = -np.abs(z[:, None] - pts[None, :]) ** 2 / nv[:, None] + pr @ pb.T.astype(float)
    for j in range(2):
        sel = pb[:, j] > 0
        want = logsumexp(metric[:, sel], axis=1) - logsumexp(metric[:, ~sel], axis=1)
        assert np.allclose(ext[:, j] + pr[:, j], want, atol=1e-9)


def test_backend_selection_reports_name():
    assert kernels.BACKEND in ("c", "numpy")
