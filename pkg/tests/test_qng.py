import numpy as np
import pytest
from hypothesis import given, strategies as st

from qigeom import biortho as B
from qigeom import models as M
from qigeom import qng as Q
from qigeom.errors import DomainError, NumericalError
from qigeom.state import StateFamily

SZ = np.diag([1.0, -1.0])
A_GENERIC = np.array([[0.5, 1 - 0.3j], [0.2 + 0.4j, -0.7]])


def test_cost_spec_validation():
    with pytest.raises(DomainError):
        Q.CostSpec(np.array([[0, 1], [0, 0]]), "hermitian_expectation")
    with pytest.raises(DomainError):
        Q.CostSpec(SZ, "bogus")
    with pytest.raises(DomainError):
        Q.CostSpec(np.ones((2, 3)))


def test_optimizer_state_validation():
    with pytest.raises(DomainError):
        Q.OptimizerState([0.1], eta=-1)
    with pytest.raises(DomainError):
        Q.OptimizerState([0.1], svd_cutoff=1.5)
    assert Q.OptimizerState([0.1], eta=0.2, eta_i=0.05).rates == (0.2, 0.05)


def test_qubit_ground_state():
    tr = Q.qng_optimize(M.qubit(), Q.CostSpec(SZ), Q.OptimizerState([2.5, 0.3], eta=0.1, max_iters=200))
    assert tr.termination == Q.CONVERGED
    assert len(tr.records) <= 201
    assert tr.final.cost.real == pytest.approx(-1, abs=1e-6)


def test_eigenstate_start_gives_zero_step():
    step, d = Q.qng_step_hermitian(M.qubit(), Q.CostSpec(SZ), Q.OptimizerState([0.0, 0.3]))
    assert np.max(np.abs(step)) < 1e-14 and d["grad_norm"] < 1e-14


def test_step_linear_in_eta():
    f, c = M.qubit(), Q.CostSpec(SZ)
    steps = [Q.qng_step_hermitian(f, c, Q.OptimizerState([1.2, 0.3], eta=e))[0] / e for e in (1e-2, 1e-5, 1e-8)]
    assert np.allclose(steps[0], steps[1]) and np.allclose(steps[1], steps[2])
    # closed form for the Bloch sphere: dtheta/eta = 4 sin(theta)
    assert steps[0][0] == pytest.approx(4 * np.sin(1.2))


@given(st.integers(0, 10_000), st.floats(0.3, np.pi - 0.3), st.floats(-3.0, 3.0))
def test_cost_monotone_away_from_chart_poles(seed, t, p):
    # Near theta = 0, pi the Bloch chart metric degenerates and fixed-eta steps can
    # overshoot; the property is asserted for steps that start with sin(theta) >= 0.2.
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    H = 0.5 * (X + X.conj().T)
    H /= np.linalg.norm(H, 2)
    tr = Q.qng_optimize(M.qubit(), Q.CostSpec(H), Q.OptimizerState([t, p], eta=0.05, max_iters=60))
    away = np.sin(tr.thetas[:-1, 0]) >= 0.2
    assert np.all(np.diff(tr.costs.real)[away] <= 1e-12)


def test_cost_monotone_random_family():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    H = 0.5 * (X + X.conj().T)
    tr = Q.qng_optimize(M.random_analytic(3, 2, seed=3), Q.CostSpec(H),
                        Q.OptimizerState([0.1, -0.2], eta=0.01, max_iters=30))
    assert np.all(np.diff(tr.costs.real) <= 1e-12)


def test_pseudo_inverse_consistency():
    g = np.array([[1.0, 0.0], [0.0, 1e-14]])
    b = np.array([0.3, 0.7])
    sol = Q.pinv_solve(g, b, 1e-10)
    assert sol.rank == 1 and sol.x[1] == 0.0
    assert np.linalg.norm(g @ sol.x - b) <= np.linalg.norm(b)
    # solution is orthogonal to the null direction of the metric
    assert abs(sol.x @ np.array([0.0, 1.0])) == 0


def test_pseudo_inverse_on_qubit_pole():
    step, d = Q.qng_step_hermitian(M.qubit(), Q.CostSpec(np.array([[0, 1], [1, 0]], complex)),
                                   Q.OptimizerState([1e-9, 0.0]))
    assert d["rank"] == 1 and np.all(np.isfinite(step))
    g, grad = d["metric"], d["grad"]
    assert np.linalg.norm(g @ step + 0.1 * grad) <= 1e-10 * np.linalg.norm(grad) * d["condition"] + 1e-8


def test_singular_metric_raises():
    with pytest.raises(NumericalError) as exc:
        Q.qng_step_hermitian(M.constant_family(2, 2), Q.CostSpec(SZ), Q.OptimizerState([0.1, 0.2]))
    assert exc.value.code == "SINGULAR_METRIC"


def test_requires_hermitian_cost_and_unit_family():
    with pytest.raises(DomainError):
        Q.qng_step_hermitian(M.qubit(), Q.CostSpec(SZ, "rr_variance"), Q.OptimizerState([1.0, 0.0]))
    fam = StateFamily(lambda t: np.array([1.0, t[0]]), 1, normalized=False)
    with pytest.raises(DomainError):
        Q.qng_step_hermitian(fam, Q.CostSpec(SZ), Q.OptimizerState([1.0]))


def test_zero_iterations():
    tr = Q.qng_optimize(M.qubit(), Q.CostSpec(SZ), Q.OptimizerState([1.0, 0.0], max_iters=0))
    assert tr.records == [] and tr.termination == Q.ZERO_ITERS


# -- dual scheme ---------------------------------------------------------------------


def test_dual_hermitian_limit():
    e = B.eigen_families(M.hermitian_two_level, 2, 0)
    A = np.array([[0.2, 0.5], [0.5, -0.1]])
    d = Q.qng_step_nh_dual(e.left, e.right, Q.CostSpec(A, "biortho_expectation"), Q.OptimizerState([0.3, 0.8]))
    assert np.all(d.delta_i == 0) and d.incompatibility == 0.0
    assert np.linalg.norm(d.delta_r) > 0


def test_dual_zero_rates():
    e = B.eigen_families(M.pt_twisted, 3, 0)
    d = Q.qng_step_nh_dual(e.left, e.right, Q.CostSpec(A_GENERIC, "biortho_expectation"),
                           Q.OptimizerState([0.4, 1.0, 0.7], eta=0.0))
    assert np.all(d.delta_r == 0) and np.all(d.delta_i == 0) and d.incompatibility == 0


def test_dual_generic_point_is_incompatible_and_deterministic():
    e = B.eigen_families(M.pt_twisted, 3, 0)
    cost = Q.CostSpec(A_GENERIC, "biortho_expectation")
    st_ = Q.OptimizerState([0.4, 1.0, 0.7], eta_r=0.1, eta_i=0.05)
    a = Q.qng_step_nh_dual(e.left, e.right, cost, st_)
    b = Q.qng_step_nh_dual(e.left, e.right, cost, st_)
    assert np.all(np.isfinite(a.delta_r)) and np.all(np.isfinite(a.delta_i))
    assert 0 < a.incompatibility < np.pi
    assert np.array_equal(a.delta_r, b.delta_r) and np.array_equal(a.delta_i, b.delta_i)
    # each step solves its own system
    T = B.nh_fs_tensor(e.left, e.right, [0.4, 1.0, 0.7], "LR")
    _, grad = Q.biortho_cost(e.left, e.right, A_GENERIC, [0.4, 1.0, 0.7])
    assert np.allclose(T.g @ a.delta_r, -0.1 * grad.real, atol=1e-8)
    assert np.allclose(T.g_tilde @ a.delta_i, -0.05 * grad.imag, atol=1e-8)


def test_dual_reports_singular_subproblem():
    # the LR tensor of the PT family is real, so the imaginary subproblem has no metric
    e = B.eigen_families(M.pt_two_level, 2, 0)
    with pytest.raises(NumericalError) as exc:
        Q.qng_step_nh_dual(e.left, e.right, Q.CostSpec(A_GENERIC, "biortho_expectation"),
                           Q.OptimizerState([0.6, 1.0]))
    assert exc.value.context["subproblem"] == "imaginary"


def test_dual_requires_biortho_cost():
    e = B.eigen_families(M.pt_twisted, 3, 0)
    with pytest.raises(DomainError):
        Q.qng_step_nh_dual(e.left, e.right, Q.CostSpec(SZ), Q.OptimizerState([0.4, 1.0, 0.7]))


def test_step_angle():
    assert Q.step_angle(np.array([1.0, 0]), np.array([0, 2.0])) == pytest.approx(np.pi / 2)
    assert Q.step_angle(np.zeros(2), np.ones(2)) == 0.0


# -- RR eigensolver ------------------------------------------------------------------


def test_rr_pt_two_level():
    tr = Q.rr_variational_eigensolver(M.qubit(), M.pt_two_level([0.6, 1.0]), [1.0, 0.5],
                                      Q.OptimizerState([1.0, 0.5], eta=0.1, max_iters=500))
    assert tr.termination == Q.CONVERGED
    assert tr.final.cost.real < 1e-8
    assert abs(tr.extra["energy"]) == pytest.approx(0.8, abs=1e-5)


def test_rr_certificate():
    H = M.pt_two_level([0.6, 1.0])
    tr = Q.rr_variational_eigensolver(M.qubit(), H, [2.0, -0.4], Q.OptimizerState([2.0, -0.4], max_iters=500))
    psi = M.qubit().evaluator(tr.final.theta)
    E = tr.extra["energy"]
    assert np.linalg.norm(H @ psi - E * psi) <= np.sqrt(tr.final.cost.real) + 1e-10


def test_rr_hermitian_reduces_to_variance():
    H = M.hermitian_two_level([0.3, 0.8])
    tr = Q.rr_variational_eigensolver(M.qubit(), H, [1.0, 0.5], Q.OptimizerState([1.0, 0.5], max_iters=500))
    assert tr.termination == Q.CONVERGED and tr.final.cost.real < 1e-8
    assert np.min(np.abs(np.linalg.eigvalsh(H) - tr.extra["energy"].real)) < 1e-5


def test_rr_start_at_eigenvector():
    H = M.pt_two_level([0.6, 1.0])
    v = B.biortho_eig(H).right[:, 0]
    theta = [2 * np.arccos(abs(v[0])), np.angle(v[1]) - np.angle(v[0])]
    tr = Q.rr_variational_eigensolver(M.qubit(), H, theta, Q.OptimizerState(theta))
    assert len(tr.records) == 1 and tr.records[0].cost.real < 1e-12


def test_rr_local_minimum_on_restricted_family():
    real_circle = StateFamily(lambda t: np.array([np.cos(t[0]), np.sin(t[0])], complex), 1,
                              derivative_mode="analytic",
                              jacobian=lambda t: np.array([[-np.sin(t[0]), np.cos(t[0])]], complex))
    H = M.pt_two_level([0.6, 1.0])
    tr = Q.rr_variational_eigensolver(real_circle, H, [0.3],
                                      Q.OptimizerState([0.3], eta=0.1, max_iters=5000, grad_tol=1e-8))
    assert tr.termination == Q.LOCAL_MINIMUM and tr.final.cost.real > 1e-3


# -- imaginary-time comparator -------------------------------------------------------


def _assoc(seed=0):
    S, H0 = M.associated_pair(seed)
    left, right = M.associated_families(S)
    return left, right, S @ H0 @ np.linalg.inv(S), H0


def test_comparator_biortho_hermitian():
    left, right, H, _ = _assoc()
    rep = Q.imaginary_time_comparator(left, right, H, [1.0, 0.5], 1e-3, 50)
    assert rep.max_local < 1e-6
    assert rep.ite_thetas.shape == (51, 2)
    assert Q.comparator_order(left, right, H, [1.0, 0.5], 1e-2, steps=1) >= 1.9


def test_comparator_hermitian_family_quarters():
    q = M.qubit()
    rng = np.random.default_rng(2)
    X = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    H = 0.5 * (X + X.conj().T)
    d1 = Q.imaginary_time_comparator(q, q, H, [1.0, 0.3], 2e-3, 1).local_deviation[0]
    d2 = Q.imaginary_time_comparator(q, q, H, [1.0, 0.3], 1e-3, 1).local_deviation[0]
    assert d1 / d2 == pytest.approx(4, rel=0.05)


def test_comparator_generic_generator_first_order():
    left, right, _, _ = _assoc()
    Hg = np.array([[0.3, 1.0 + 0.5j], [0.2j, -0.4]])
    d1 = Q.imaginary_time_comparator(left, right, Hg, [1.0, 0.5], 1e-2, 1).local_deviation[0]
    d2 = Q.imaginary_time_comparator(left, right, Hg, [1.0, 0.5], 5e-3, 1).local_deviation[0]
    assert d1 / d2 < 2.5      # first-order: halving dtau only halves the deviation


def test_comparator_singular_projection():
    c = M.constant_family(2, 2)
    with pytest.raises(NumericalError):
        Q.imaginary_time_comparator(c, c, SZ, [0.1, 0.2], 1e-3, 1)
    with pytest.raises(DomainError):
        Q.imaginary_time_comparator(c, c, SZ, [0.1, 0.2], 0.0, 1)
