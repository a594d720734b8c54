import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from etscl import losses
from etscl.evidence import DirichletOpinion
from etscl.special import digamma, lgamma, trigamma

from oracles import central_difference, dirichlet_mse_monte_carlo, kl_uniform_quadrature, rel_error

Y0 = [1, 0, 0]


def test_special_functions_against_scipy():
    x = np.concatenate([np.linspace(1.0, 40.0, 500), [9.999, 10.0, 1e4]])
    np.testing.assert_allclose(digamma(x), special.digamma(x), rtol=0, atol=1e-12)
    np.testing.assert_allclose(trigamma(x), special.polygamma(1, x), rtol=1e-12)
    np.testing.assert_allclose(lgamma(x), special.gammaln(x), rtol=1e-13)


@pytest.mark.parametrize("alpha, y, expected", [
    ([2, 1, 1], Y0, 0.50),   # 0.30 + 0.10 + 0.10
    ([1, 1, 1], Y0, 5 / 6),
])
def test_mse_hand_values(alpha, y, expected):
    assert losses.mse_term(DirichletOpinion(alpha), y) == pytest.approx(expected, abs=1e-15)


def test_mse_limit_of_infinite_correct_evidence():
    assert losses.mse_term(DirichletOpinion([1e9, 1, 1]), Y0) < 1e-8


def test_mse_matches_monte_carlo(rng):
    for _ in range(5):
        alpha = rng.uniform(1, 10, size=3)
        y = np.eye(3)[rng.integers(3)]
        mean, se = dirichlet_mse_monte_carlo(alpha, y, 200_000, rng)
        assert abs(losses.mse_term(DirichletOpinion(alpha), y) - mean) < 4 * se


def test_mse_rejects_bad_label():
    with pytest.raises(ValueError):
        losses.mse_term(DirichletOpinion([1, 1, 1]), [1, 1, 0])
    with pytest.raises(ValueError):
        losses.mse_term(DirichletOpinion([1, 1, 1]), [1, 0])


def test_kl_examples():
    assert losses.kl_to_uniform(DirichletOpinion([1, 1, 1])) == pytest.approx(0, abs=1e-12)
    assert losses.kl_to_uniform(DirichletOpinion([2, 1, 1])) == pytest.approx(0.26528, abs=1e-5)
    assert (losses.kl_to_uniform(DirichletOpinion([10, 10, 10]))
            > losses.kl_to_uniform(DirichletOpinion([2, 2, 2])) > 0)


@pytest.mark.parametrize("alpha", [[2, 1, 1], [1, 2, 1], [3.5, 1.2, 7.0], [10, 10, 10]])
def test_kl_matches_quadrature(alpha):
    assert losses.kl_to_uniform(DirichletOpinion(alpha)) == pytest.approx(
        kl_uniform_quadrature(alpha), abs=1e-6)


@given(st.lists(st.floats(1.0, 50.0), min_size=2, max_size=6))
def test_kl_non_negative_and_zero_only_at_uniform(alpha):
    kl = losses.kl_to_uniform(DirichletOpinion(alpha))
    assert kl >= 0
    if np.max(np.abs(np.array(alpha) - 1)) > 1e-3:
        assert kl > 0


@pytest.mark.parametrize("alpha, y, expected", [
    ([5, 2, 1], [1, 0, 0], [1, 2, 1]),
    ([1, 1, 1], [0, 1, 0], [1, 1, 1]),
    ([3, 4, 5], [0, 0, 1], [3, 4, 1]),
])
def test_adjusted_alpha(alpha, y, expected):
    np.testing.assert_array_equal(losses.adjusted_alpha(DirichletOpinion(alpha), y).alpha, expected)


def test_anneal_coefficient():
    assert losses.anneal_coefficient(0, 10) == 0
    assert losses.anneal_coefficient(10, 10) == 1
    assert losses.anneal_coefficient(25, 10) == 1
    assert losses.anneal_coefficient(5, 10) == 0.5
    with pytest.raises(ValueError):
        losses.anneal_coefficient(3, 0)
    values = [losses.anneal_coefficient(t, 7) for t in range(20)]
    assert values == sorted(values)


def test_sample_loss_examples():
    o = DirichletOpinion([2, 1, 1])
    assert losses.sample_loss(o, Y0, 0.0) == losses.mse_term(o, Y0)
    # adjusted alpha is uniform here, so the KL term vanishes
    assert losses.sample_loss(o, Y0, 1.0) == pytest.approx(0.5, abs=1e-12)
    o = DirichletOpinion([1, 2, 1])
    assert losses.sample_loss(o, Y0, 1.0) == pytest.approx(losses.mse_term(o, Y0) + 0.26528, abs=1e-5)
    with pytest.raises(ValueError):
        losses.sample_loss(o, Y0, 1.5)


def test_raw_alpha_switch():
    o = DirichletOpinion([5, 2, 1])
    raw = losses.sample_loss(o, Y0, 1.0, adjusted=False)
    assert raw == pytest.approx(losses.mse_term(o, Y0) + losses.kl_to_uniform(o))


@given(st.lists(st.floats(0.0, 100.0), min_size=3, max_size=3), st.integers(0, 2), st.floats(0, 1))
def test_sample_loss_non_negative(e, k, lam):
    assert losses.sample_loss(DirichletOpinion(np.array(e) + 1), np.eye(3)[k], lam) >= 0


def test_total_loss_empty_and_duplicated():
    rep = losses.total_loss([[], [], []], [], [], 0.3)
    assert (rep.l_cfp, rep.l_oct, rep.l_vessel, rep.l_fusion, rep.total) == (0, 0, 0, 0, 0)
    o = DirichletOpinion([3, 1.5, 2])
    rep = losses.total_loss([[o], [o], [o]], [o], [0], 0.4)
    assert rep.total == pytest.approx(4 * losses.sample_loss(o, Y0, 0.4), rel=1e-14)


def test_total_loss_matches_resummation(rng):
    N, lam = 5, 0.7
    ops = [[DirichletOpinion(rng.uniform(1, 8, 3)) for _ in range(N)] for _ in range(4)]
    labels = rng.integers(0, 3, N)
    rep = losses.total_loss(ops[:3], ops[3], labels, lam)
    parts = [sum(losses.sample_loss(o, np.eye(3)[k], lam) for o, k in zip(branch, labels)) for branch in ops]
    np.testing.assert_allclose([rep.l_cfp, rep.l_oct, rep.l_vessel, rep.l_fusion], parts, rtol=1e-12)
    assert rep.total == pytest.approx(sum(parts), abs=1e-9)
    assert rep.lam == lam


def test_total_loss_length_mismatch():
    o = DirichletOpinion([1, 1, 1])
    with pytest.raises(ValueError, match="length"):
        losses.total_loss([[o], [o], [o, o]], [o], [0], 0.0)


def test_loss_report_csv_row():
    rep = losses.LossReport(1.0, 2.0, 3.0, 4.0, 10.0, 0.5)
    assert rep.csv_row(3) == "3,1.0,2.0,3.0,4.0,10.0,0.5"
    assert losses.LossReport.CSV_HEADER == "epoch,l_cfp,l_oct,l_vessel,l_fusion,total,lambda"


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([True, False]))
def test_evidence_gradient_matches_finite_differences(seed, adjusted):
    rng = np.random.default_rng(seed)
    e = rng.uniform(0.05, 20, size=3)
    y = np.eye(3)[rng.integers(3)]
    lam = rng.uniform()
    g = losses.loss_gradient_wrt_evidence(e, y, lam, adjusted)
    fd = central_difference(lambda v: losses.sample_loss(DirichletOpinion(v + 1), y, lam, adjusted), e)
    assert rel_error(g, fd) < 1e-4


def test_gradient_vanishes_with_overwhelming_evidence():
    g = losses.loss_gradient_wrt_evidence([1e7, 0, 0], Y0, 1.0)
    assert np.max(np.abs(g)) < 1e-6


def test_gradient_lambda_zero_is_mse_gradient():
    e = np.array([2.0, 0.5, 4.0])
    y = np.eye(3)[2]
    fd = central_difference(lambda v: losses.mse_term(DirichletOpinion(v + 1), y), e)
    assert rel_error(losses.loss_gradient_wrt_evidence(e, y, 0.0), fd) < 1e-6
