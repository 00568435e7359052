import json

import numpy as np
import pytest

from bandspec.bandop import BandOperator, finite_section, section_inverse, validate
from bandspec.errors import ParseError, SingularSection
from bandspec.testkit import OperatorSeed, free_jacobi, random_operator

from conftest import GOLDEN


def jacobi_with_gap(k_gap=5):
    upper = [[[1.0]]] * 12
    upper[k_gap] = [[0.0]]
    return BandOperator(1, 1, 1, "prefix_tail", {-1: [[1.0]], 0: [[0.0]], 1: upper})


def test_validate_free_jacobi(jacobi):
    rep = validate(jacobi, 100)
    assert rep.ok and rep.failures == []
    assert rep.bound == 1.0


def test_validate_reports_forced_failure():
    rep = validate(jacobi_with_gap(5), 10)
    assert not rep.ok
    assert [(k, which) for k, which, _ in rep.failures] == [(5, "upper")]


def test_validate_block_jacobi():
    B = np.array([[1.0, 1.0], [0.0, 1.0]])
    op = BandOperator(2, 1, 1, "constant", {-1: B, 0: np.zeros((2, 2)), 1: B})
    assert validate(op, 50).ok
    assert np.linalg.cond(B) == pytest.approx((3 + np.sqrt(5)) / 2)


def test_validate_needs_window():
    with pytest.raises(ValueError):
        validate(free_jacobi(), 1)


def test_entries_zero_outside_band(jacobi):
    assert not np.any(jacobi.entry(0, 2))
    assert not np.any(jacobi.entry(3, 0))
    assert not np.any(jacobi.entry(0, -1))
    assert jacobi.entry(4, 5)[0, 0] == 1


def test_periodic_and_prefix_tail_indexing():
    op = BandOperator(1, 1, 1, "periodic", {-1: [[[1.0]], [[2.0]]], 1: [[[1.0]], [[2.0]]]})
    assert [op.entry(k, k + 1)[0, 0] for k in range(4)] == [1, 2, 1, 2]
    assert [op.entry(k + 1, k)[0, 0] for k in range(4)] == [2, 1, 2, 1]
    assert op.bound == 2 and op.period == 2
    pt = BandOperator(1, 1, 1, "prefix_tail", {-1: [[1.0]], 1: [[[5.0]], [[6.0]], [[7.0]]]})
    assert [pt.entry(k, k + 1)[0, 0] for k in range(5)] == [5, 6, 7, 7, 7]


@pytest.mark.parametrize("r,s", [(1, 1), (2, 1), (1, 2), (2, 2), (3, 1), (1, 3), (3, 3), (2, 3)])
def test_ghost_coefficient_table(r, s):
    op = BandOperator(1, r, s, "constant", {-s: [[2.0]], r: [[3.0]]})
    minus_e = -np.eye(1)
    for k in range(s):
        # row k: A[k, k-s] = -E, and A[k, l] = O for the other negative columns
        assert np.array_equal(op.coeff(k, k - s), minus_e)
        for j in range(1, s - k):
            assert not np.any(op.coeff(k, k - s + j))
    for k in range(r):
        assert np.array_equal(op.coeff(k - r, k), minus_e)
        for j in range(1, r - k):
            assert not np.any(op.coeff(k - r + j, k))
    assert not np.any(op.coeff(-1, -1))
    # ordinary entries pass through
    assert op.coeff(s, 0)[0, 0] == 2 and op.coeff(0, r)[0, 0] == 3


def test_finite_section_examples(jacobi):
    sec = finite_section(jacobi, 0, 2)
    np.testing.assert_array_equal(sec.dense, [[0, -1], [-1, 0]])
    sec = finite_section(jacobi, 3, 3)
    np.testing.assert_array_equal(sec.dense, [[3, -1, 0], [-1, 3, -1], [0, -1, 3]])


def test_finite_section_lambda_zero_and_nesting():
    op = random_operator(OperatorSeed(3, 2, 2, 1))
    A = np.block([[op.entry(k, l) for l in range(8)] for k in range(8)])
    np.testing.assert_array_equal(finite_section(op, 0, 8).dense, -A)
    small = finite_section(op, 1 + 2j, 6).blocks()
    big = finite_section(op, 1 + 2j, 11).blocks()
    np.testing.assert_array_equal(small[:5, :5], big[:5, :5])


def test_hermitian_section():
    rng = np.random.default_rng(4)
    d0 = rng.normal(size=(4, 2, 2)) + 1j * rng.normal(size=(4, 2, 2))
    d0 = d0 + d0.conj().swapaxes(1, 2)
    up = rng.normal(size=(4, 2, 2)) + 1j * rng.normal(size=(4, 2, 2)) + 3 * np.eye(2)
    # A[k+1, k] = A[k, k+1]^*, stored row-indexed on the lower diagonal
    low = np.roll(up, 1, axis=0).conj().swapaxes(1, 2)
    op = BandOperator(2, 1, 1, "periodic", {-1: low, 0: d0, 1: up})
    T = finite_section(op, 0.7, 9).dense
    np.testing.assert_allclose(T, T.conj().T, atol=1e-15)


def test_section_inverse_examples(jacobi):
    inv = section_inverse(finite_section(jacobi, 3, 200))
    assert inv[0, 0][0, 0].real == pytest.approx(0.3819660113, abs=1e-9)
    assert inv[1, 0][0, 0].real == pytest.approx(0.1458980338, abs=1e-9)
    assert inv[1, 0][0, 0].real == pytest.approx(GOLDEN**2, rel=1e-12)


def test_section_inverse_decoupled():
    eps = 1e-12
    op = BandOperator(1, 1, 1, "constant", {-1: [[eps]], 0: [[2.0]], 1: [[eps]]})
    inv = section_inverse(finite_section(op, 3.0, 10))
    np.testing.assert_allclose([inv[k, k][0, 0] for k in range(10)], 1.0, atol=1e-10)


def test_section_inverse_identity():
    op = random_operator(OperatorSeed(2, 3, 1, 2))
    sec = finite_section(op, 3 * op.bound, 30)
    inv = section_inverse(sec)
    M, N = 30, 3
    dense_inv = inv.swapaxes(1, 2).reshape(M * N, M * N)
    assert np.linalg.cond(sec.dense) < 1e6
    assert np.linalg.norm(sec.dense @ dense_inv - np.eye(M * N)) <= 1e-9


def test_section_inverse_singular(jacobi):
    # lambda = 0 is an eigenvalue of the 3-block section of the free Jacobi matrix
    with pytest.raises(SingularSection):
        section_inverse(finite_section(jacobi, 0.0, 3))


def test_json_roundtrip_and_schema(tmp_path):
    op = random_operator(OperatorSeed(1, 2, 2, 1))
    again = BandOperator.from_dict(json.loads(json.dumps(op.to_dict())))
    assert again == op
    spec = {"N": 1, "r": 1, "s": 1, "kind": "constant",
            "diagonals": {"-1": [[1, 0]], "0": [[0, 0]], "1": [[1, 0]]}}
    assert BandOperator.from_dict(spec) == free_jacobi()
    del spec["diagonals"]["1"]
    with pytest.raises(ParseError) as exc:
        BandOperator.from_dict(spec)
    assert exc.value.field == "diagonals.1"


@pytest.mark.parametrize("patch,field", [
    ({"N": 0}, "N"),
    ({"kind": "banded"}, "kind"),
    ({"diagonals": {"-1": [[1, 0]], "1": [[1, 0]], "2": [[1, 0]]}}, "diagonals.2"),
    ({"diagonals": {"-1": [[1, 0], [0, 0]], "1": [[1, 0]]}}, "diagonals.-1"),
    ({"diagonals": {"-1": [["a", 0]], "1": [[1, 0]]}}, "diagonals.-1[0]"),
])
def test_schema_errors_name_field(patch, field):
    spec = {"N": 1, "r": 1, "s": 1, "kind": "constant",
            "diagonals": {"-1": [[1, 0]], "0": [[0, 0]], "1": [[1, 0]]}}
    spec.update(patch)
    with pytest.raises(ParseError) as exc:
        BandOperator.from_dict(spec)
    assert exc.value.field == field
    assert field in str(exc.value)
