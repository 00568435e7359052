import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bandspec.blockalg import (
    ScaledBlock,
    block_inverse,
    block_norm,
    from_scaled_arrays,
    log2_norms,
    normalize,
    scaled_dot,
    to_scaled_arrays,
)
from bandspec.errors import SingularBlock


def test_block_norm_examples():
    assert block_norm(np.zeros((2, 2))) == 0
    assert block_norm(np.eye(2)) == pytest.approx(1.41421356, abs=1e-8)
    assert block_norm(np.diag([3.0, 4.0])) == pytest.approx(5.0)


def test_block_inverse_examples():
    np.testing.assert_allclose(block_inverse(np.eye(2)), np.eye(2))
    np.testing.assert_allclose(block_inverse(np.diag([2.0, 4.0])), np.diag([0.5, 0.25]))
    np.testing.assert_allclose(block_inverse(np.array([[1.0, 1.0], [0.0, 1.0]])), [[1, -1], [0, 1]])


def test_block_inverse_reports_condition():
    inv, cond = block_inverse(np.diag([1.0, 4.0]), return_cond=True)
    assert cond == pytest.approx(4.0)


def test_block_inverse_singular():
    with pytest.raises(SingularBlock):
        block_inverse(np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(SingularBlock):
        block_inverse(np.diag([1.0, 1e-9]), cond_cap=1e8)


def test_block_inverse_random_residual():
    rng = np.random.default_rng(0)
    checked = 0
    for _ in range(200):
        a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        if np.linalg.cond(a) > 1e6:
            continue
        assert np.linalg.norm(a @ block_inverse(a) - np.eye(3)) <= 1e-10
        checked += 1
    assert checked > 150


def test_normalize_examples():
    x = normalize(ScaledBlock(8 * np.eye(1), 0))
    assert x.exponent == 3 and x.mantissa[0, 0] == 1.0
    z = normalize(ScaledBlock(np.zeros((2, 2)), 17))
    assert z.exponent == 0 and not np.any(z.mantissa)
    y = normalize(ScaledBlock(0.001 * np.eye(1), 0))
    assert y.exponent == -10
    assert y.mantissa[0, 0] == pytest.approx(1.024, rel=1e-15)


def test_submultiplicative():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        b = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        assert block_norm(a @ b) <= block_norm(a) * block_norm(b) * (1 + 1e-15)


def test_scaled_product_adds_exponents():
    a = ScaledBlock.from_block(2.0**600 * np.eye(2))
    b = ScaledBlock.from_block(2.0**500 * np.eye(2))
    c = a @ b
    assert c.log2_norm() == pytest.approx(1100 + 0.5)
    assert np.isinf(c.value()).any()


def test_scaled_sum_and_difference():
    a = ScaledBlock.from_block(np.array([[3.0]]))
    b = ScaledBlock.from_block(np.array([[5.0]]))
    assert (a + b).value()[0, 0] == 8.0
    assert (a - b).value()[0, 0] == -2.0
    assert (a - a).is_zero()


def test_scaled_dot_scale():
    am, ae = to_scaled_arrays(np.array([[[1e200]], [[-1e200]]], dtype=complex))
    bm, be = to_scaled_arrays(np.array([[[1e200]], [[1e200]]], dtype=complex))
    m, e, scale = scaled_dot(am, ae, bm, be, return_scale=True)
    assert not np.any(m)
    assert scale == pytest.approx(1 + 2 * np.log2(1e200))


# unit-scale entry pattern times a common power of two, spanning most of the double range
blocks = st.tuples(
    st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1)), min_size=4, max_size=4),
    st.integers(-1000, 1000),
).map(lambda v: np.ldexp(np.array([complex(a, b) for a, b in v[0]]).reshape(2, 2).real, v[1])
      + 1j * np.ldexp(np.array([complex(a, b) for a, b in v[0]]).reshape(2, 2).imag, v[1]))


def _log2_norm(b):
    amax = np.max(np.abs(np.concatenate([b.real.ravel(), b.imag.ravel()])))
    _, p = np.frexp(amax)
    return np.log2(block_norm(np.ldexp(b.real, -p) + 1j * np.ldexp(b.imag, -p))) + p


@settings(max_examples=200, deadline=None)
@given(blocks, st.integers(-3000, 3000))
def test_normalize_preserves_value(b, e):
    x = normalize(ScaledBlock(b, e))
    if not np.any(b):
        assert x.exponent == 0
        return
    assert 1 <= block_norm(x.mantissa) < 2
    # compare in the log domain so that huge exponents do not overflow
    assert x.log2_norm() == pytest.approx(_log2_norm(b) + e, abs=1e-12)
    # only the exponent moves, so undoing the shift is exact
    shift = x.exponent - e
    back = np.ldexp(x.mantissa.real, shift) + 1j * np.ldexp(x.mantissa.imag, shift)
    assert np.max(np.abs(back - b)) <= max(2.0**-1000 * np.max(np.abs(b)), 5e-324)


@settings(max_examples=100, deadline=None)
@given(st.lists(blocks, min_size=1, max_size=5))
def test_scaled_arrays_roundtrip(bs):
    vals = np.array(bs)
    m, e = to_scaled_arrays(vals)
    back = from_scaled_arrays(m, e)
    for v, w in zip(vals, back):
        # exact up to entries below 2^-1074 relative to the block's largest entry
        assert np.max(np.abs(v - w)) <= max(2.0**-1000 * np.max(np.abs(v)), 5e-324)
    lg = log2_norms(m, e)
    for v, x in zip(vals, lg):
        if np.any(v):
            assert x == pytest.approx(_log2_norm(v), abs=1e-12)
        else:
            assert np.isneginf(x)
