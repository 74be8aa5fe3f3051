import os
import subprocess
import sys

import pytest
from hypothesis import given
from hypothesis import strategies as st

from consensus_cert import _pykernels, kernels
from consensus_cert.field import Q

try:
    from consensus_cert import _ckernels
except ImportError:
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled extension not built")
elements = st.integers(0, Q - 1)


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")
    if _ckernels is not None and not os.environ.get("CONSENSUS_CERT_PURE"):
        assert kernels.BACKEND == "cython"


def test_pure_backend_selected_by_env():
    code = "from consensus_cert import kernels; print(kernels.BACKEND)"
    env = {**os.environ, "CONSENSUS_CERT_PURE": "1"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@pytest.mark.parametrize("impl", [_pykernels, _ckernels], ids=["python", "cython"])
def test_known_values(impl):
    if impl is None:
        pytest.skip("compiled extension not built")
    assert impl.mul_fold(2**60, [2**60]) == pow(2, 120, Q)
    assert impl.mul_fold(Q - 1, [Q - 1]) == 1
    pairs = impl.set_equality_batch([0, 1], 1, 3, [[(2, 5), (7, 11)]])
    assert [tuple(p) for p in pairs] == [(-1 * 2 % Q, -3 * 5 % Q), (0 * 7 % Q, -2 * 11 % Q)]


def test_batch_rejects_pair_count_mismatch():
    with pytest.raises(ValueError):
        _pykernels.set_equality_batch([0, 1], 1, 2, [[(1, 1)]])
    if _ckernels is not None:
        with pytest.raises(ValueError):
            _ckernels.set_equality_batch([0, 1], 1, 2, [[(1, 1)]])


@needs_ext
@given(elements, st.lists(elements, max_size=50))
def test_mul_fold_parity(init, factors):
    assert _ckernels.mul_fold(init, factors) == _pykernels.mul_fold(init, factors)


@needs_ext
@given(
    st.lists(elements, min_size=1, max_size=12),
    elements,
    elements,
    st.data(),
)
def test_batch_parity(points, a, b, data):
    k = len(points)
    children = data.draw(st.lists(st.lists(st.tuples(elements, elements), min_size=k, max_size=k), max_size=4))
    py = _pykernels.set_equality_batch(points, a, b, children)
    cy = _ckernels.set_equality_batch(points, a, b, children)
    assert [tuple(p) for p in cy] == [tuple(p) for p in py]
    for i, (v, (p0, p1)) in enumerate(zip(points, py)):
        assert p0 == (v - a) * _prod(c[i][0] for c in children) % Q
        assert p1 == (v - b) * _prod(c[i][1] for c in children) % Q


def _prod(xs):
    out = 1
    for x in xs:
        out = out * x % Q
    return out
