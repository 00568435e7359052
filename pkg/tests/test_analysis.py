import warnings

import numpy as np
import pytest

from bandspec.analysis import (
    INCONCLUSIVE, NOT_RESOLVENT, RESOLVENT, DecayFit, classify, decay_fit, decaying_identity_residual,
    f_invariant, f_spread, growth_report, jump_residual, lemma2_residual, solution_pairs,
)
from bandspec.errors import DegenerateWindow
from bandspec.kernel import KernelWindow, kernel_window
from bandspec.recurrence import extend
from bandspec.testkit import OperatorSeed, probe_lambdas, random_operator
from bandspec.weyl import weyl_finite_section

from conftest import GOLDEN


@pytest.fixture(scope="module")
def jac_basis(jacobi):
    return extend(jacobi, 3.0, 60)


# --- bilinear invariant -------------------------------------------------------


def test_f_invariant_jacobi_values(jacobi, jac_basis):
    for k in (0, 1, 2, 10):
        assert f_invariant(jacobi, ("Q", 0), ("Pplus", 0), jac_basis, k)[0, 0] == pytest.approx(1.0, abs=1e-12)
        assert f_invariant(jacobi, ("Q", 0), ("Qplus", 0), jac_basis, k)[0, 0] == pytest.approx(0.0, abs=1e-12)
        assert f_invariant(jacobi, ("P", 0), ("Qplus", 0), jac_basis, k)[0, 0] == pytest.approx(-1.0, abs=1e-12)


def test_f_invariant_block_operator_constant():
    op = random_operator(OperatorSeed(1, 2, 2, 1))
    basis = extend(op, 2 + 1j, 35)
    for y, yp in solution_pairs(op):
        assert f_spread(op, y, yp, basis, 30) <= 1e-12


def test_f_invariant_rejects_bad_names(jacobi, jac_basis):
    with pytest.raises(ValueError):
        f_invariant(jacobi, ("Qplus", 0), ("Q", 0), jac_basis, 0)


def test_solution_pairs_count():
    op = random_operator(OperatorSeed(0, 1, 2, 3))
    assert len(solution_pairs(op)) == (2 + 3) ** 2


# --- block identity -----------------------------------------------------------


def test_block_identity_initial_index(jacobi, jac_basis):
    assert lemma2_residual(jacobi, jac_basis, 0) == 0.0


def test_block_identity_jacobi(jacobi, jac_basis):
    for k in range(1, 40):
        assert lemma2_residual(jacobi, jac_basis, k) <= 1e-13


def test_block_identity_block_operator():
    op = random_operator(OperatorSeed(4, 2, 1, 2))
    basis = extend(op, 1 - 2j, 30)
    assert max(lemma2_residual(op, basis, k) for k in range(26)) <= 1e-12


@pytest.mark.parametrize("idx", range(10))
def test_jump_identity_random_lambda(seeded, idx):
    op = seeded[idx]
    rng = np.random.default_rng(100 + idx)
    for lam in rng.normal(size=10) * 3 + 1j * rng.normal(size=10) * 3:
        basis = extend(op, lam, 25)
        assert max(jump_residual(op, basis, n) for n in range(op.s, 25)) <= 1e-12


@pytest.mark.parametrize("idx", range(10))
def test_decaying_identity(seeded, idx):
    op = seeded[idx]
    lam = probe_lambdas(op, 1)[0]
    basis = extend(op, lam, 40)
    W = weyl_finite_section(op, lam, 120)
    assert max(decaying_identity_residual(op, basis, W, k) for k in range(30)) <= 1e-8


# --- decay fit ----------------------------------------------------------------


def test_decay_fit_jacobi_resolvent(jacobi):
    fit = classify(jacobi, 3.0)
    assert fit.classification == RESOLVENT
    assert fit.q_hat == pytest.approx(GOLDEN, abs=1e-6)
    assert fit.rms_residual <= 1e-8
    assert 0 <= fit.weyl_gap <= 1e-8 and fit.error is None


def test_decay_fit_far_lambda(jacobi):
    fit = classify(jacobi, 100.0)
    assert fit.classification == RESOLVENT
    assert fit.q_hat <= jacobi.bound / 100 + 1e-3


def test_in_spectrum_not_resolvent(jacobi):
    fit = classify(jacobi, 0.5)
    assert fit.classification != RESOLVENT
    assert fit.error == "no_convergence"


def test_conjugate_symmetry(jacobi):
    a = classify(jacobi, 0.3 + 0.8j)
    b = classify(jacobi, 0.3 - 0.8j)
    assert a.classification == b.classification == RESOLVENT
    assert a.q_hat == pytest.approx(b.q_hat, rel=1e-10)


def test_fit_window_too_small_warns(jacobi):
    with pytest.warns(RuntimeWarning):
        fit = classify(jacobi, 3.0, K=10)
    assert fit.classification == INCONCLUSIVE and fit.error == "fit_window_too_small"
    assert fit.notes


def test_classification_thresholds():
    lam = 3.0
    op = random_operator(OperatorSeed(3, 1, 1, 1))
    W = weyl_finite_section(op, lam * op.bound, 200, depth=60)
    basis = extend(op, lam * op.bound, 60)
    win = kernel_window(basis, W, (0, 48), (0, 48))
    fit = decay_fit(win)
    assert fit.classification == RESOLVENT
    # the same window with tighter thresholds
    assert decay_fit(win, eps_class=1 - fit.q_hat + 1e-3).classification == INCONCLUSIVE
    assert decay_fit(win, fit_tol=fit.rms_residual / 2).classification in (INCONCLUSIVE, RESOLVENT)


def test_synthetic_window_classes():
    W = 48
    k = np.arange(W + 1)
    d = np.abs(np.subtract.outer(k, k))
    weyl = weyl_finite_section(random_operator(OperatorSeed(0)), 10.0, 8)
    for q, cls in ((0.5, RESOLVENT), (1.0, INCONCLUSIVE), (1.2, NOT_RESOLVENT)):
        vals = (q ** d)[:, :, None, None] * (1 + 0j)
        fit = decay_fit(KernelWindow.from_values(1.0, weyl, vals))
        assert fit.q_hat == pytest.approx(q, rel=1e-10)
        assert fit.classification == cls


def test_degenerate_window():
    W = 48
    weyl = weyl_finite_section(random_operator(OperatorSeed(0)), 10.0, 8)
    vals = np.zeros((W + 1, W + 1, 1, 1), complex)
    vals[np.arange(W + 1), np.arange(W + 1)] = 1
    with pytest.raises(DegenerateWindow):
        decay_fit(KernelWindow.from_values(1.0, weyl, vals))


def test_decay_fit_rejects_small_window(jacobi, jac_basis):
    W = weyl_finite_section(jacobi, 3.0, 200)
    with pytest.raises(ValueError):
        decay_fit(kernel_window(jac_basis, W, (0, 20), (0, 20)))
    with pytest.raises(ValueError):
        decay_fit(kernel_window(jac_basis, W, (1, 40), (1, 40)))


def test_doubled_section_stable_q(jacobi):
    basis = extend(jacobi, 3.0, 60)
    qs = []
    for M in (200, 400):
        W = weyl_finite_section(jacobi, 3.0, M, depth=60)
        qs.append(decay_fit(kernel_window(basis, W, (0, 48), (0, 48))).q_hat)
    assert abs(qs[0] - qs[1]) <= 1e-6


@pytest.mark.parametrize("idx", range(10))
def test_seeded_far_lambda_resolvent(seeded, idx):
    op = seeded[idx]
    fit = classify(op, probe_lambdas(op)[-1])
    assert isinstance(fit, DecayFit)
    assert fit.classification == RESOLVENT


# --- growth -------------------------------------------------------------------


def test_growth_jacobi_resolvent(jacobi):
    fit, parts = classify(jacobi, 3.0, K=200, return_parts=True)
    rep = growth_report(parts["basis"], parts["weyl"], classification=fit.classification)
    assert rep.rho_Q[0] == pytest.approx(1 / GOLDEN, rel=0.01)
    assert rep.rho_R[0] == pytest.approx(GOLDEN, rel=0.01)
    assert rep.rho_Q[0] * rep.rho_R[0] == pytest.approx(1.0, abs=0.01)
    assert rep.flags == []
    d = rep.to_dict()
    assert d["K"] == 200 and d["k_window"] == [160, 200]


def test_growth_on_spectrum_bounded(jacobi):
    basis = extend(jacobi, 0.0, 200)
    W = weyl_finite_section(jacobi, 1e-3, 100)
    rep = growth_report(basis, W)
    assert rep.rho_Q[0] == pytest.approx(1.0, abs=0.05)


def test_growth_flags_raised():
    # pretending an in-spectrum point is resolvent must raise flags
    from bandspec.testkit import free_jacobi
    op = free_jacobi()
    basis = extend(op, 0.5, 100)
    W = weyl_finite_section(op, 0.5, 200, depth=100)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = growth_report(basis, W, classification=RESOLVENT)
    assert rep.flags
