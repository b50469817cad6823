import numpy as np
import pytest
from hypothesis import given, strategies as st

from qigeom import biortho as B
from qigeom import fs
from qigeom import models as M
from qigeom.errors import DomainError, ExceptionalPointError, NormalizationError, NumericalError


@given(st.floats(0.0, 0.9), st.floats(1.0, 2.0))
def test_biortho_eig_pt(gamma, g):
    H = M.pt_two_level([gamma, g])
    es = B.biortho_eig(H)
    assert es.biorthonormality_defect() < 1e-10
    assert max(es.residuals(H)) < 1e-10
    assert np.allclose(es.eigenvalues, M.pt_eigenvalues([gamma, g]), atol=1e-10)


def test_biortho_eig_random_matrix():
    rng = np.random.default_rng(0)
    H = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    es = B.biortho_eig(H)
    assert es.biorthonormality_defect() < 1e-10 and max(es.residuals(H)) < 1e-10
    order = [(round(z.real, 12), round(z.imag, 12)) for z in es.eigenvalues]
    assert order == sorted(order)
    # largest component of each right vector is real positive
    for v in es.right.T:
        k = np.argmax(np.abs(v))
        assert abs(v[k].imag) < 1e-14 and v[k].real > 0


def test_exceptional_point_detected():
    with pytest.raises(ExceptionalPointError) as exc:
        B.biortho_eig(M.pt_two_level([1.0, 1.0]))
    assert exc.value.code == "EXCEPTIONAL_POINT"


def test_ep_error_carries_theta():
    e = B.eigen_families(M.pt_two_level, 2, 0)
    with pytest.raises(ExceptionalPointError) as exc:
        B.nh_fs_tensor(*e.pair("LR"), [1.0, 1.0], "LR")
    assert exc.value.theta == [1.0, 1.0]


def test_bad_inputs():
    with pytest.raises(DomainError):
        B.biortho_eig(np.ones((2, 3)))
    with pytest.raises(NumericalError):
        B.biortho_eig(np.array([[np.nan, 0], [0, 1]]))
    e = B.eigen_families(M.pt_two_level, 2, 0)
    with pytest.raises(DomainError):
        B.nh_fs_tensor(*e.pair("LR"), [0.6, 1.0], "XY")
    with pytest.raises(DomainError):
        e.pair("AB")


def test_kind_normalization_enforced():
    e = B.eigen_families(M.pt_two_level, 2, 0)
    with pytest.raises(NormalizationError):
        B.nh_fs_tensor(e.left, e.left, [0.6, 1.0], "LL")


def _fams():
    return [(B.eigen_families(M.pt_two_level, 2, 0), [0.6, 1.0]),
            (B.eigen_families(M.pt_two_level, 2, 1), [0.3, 1.2]),
            (B.eigen_families(M.pt_twisted, 3, 0), [0.4, 1.0, 0.7])]


@pytest.mark.parametrize("kind", B.KINDS)
def test_curvature_against_curl_and_parts(kind):
    for e, t in _fams():
        F = B.nh_berry_curvature(*e.pair(kind), t, kind)
        assert np.max(np.abs(F - B.nh_berry_curvature_curl(*e.pair(kind), t, kind))) < 1e-5
        T = B.nh_fs_tensor(*e.pair(kind), t, kind)
        assert np.max(np.abs(F - (-2 * T.omega + 2j * T.omega_tilde))) < 1e-10


def test_ll_rr_have_no_flipped_parts():
    for e, t in _fams():
        for k in ("LL", "RR"):
            T = B.nh_fs_tensor(*e.pair(k), t, k)
            assert np.max(np.abs(T.g_tilde)) < 1e-8 and np.max(np.abs(T.omega_tilde)) < 1e-8


def test_twisted_lr_has_flipped_parts():
    e = B.eigen_families(M.pt_twisted, 3, 0)
    T = B.nh_fs_tensor(*e.pair("LR"), [0.4, 1.0, 0.7], "LR")
    assert np.max(np.abs(T.g_tilde)) > 1e-2 and np.max(np.abs(T.omega_tilde)) > 1e-2


def test_rl_is_conjugate_transpose_of_lr():
    e = B.eigen_families(M.pt_twisted, 3, 0)
    t = [0.4, 1.0, 0.7]
    lr = B.nh_fs_tensor(*e.pair("LR"), t, "LR").matrix
    rl = B.nh_fs_tensor(*e.pair("RL"), t, "RL").matrix
    assert np.allclose(rl, lr.conj().T, atol=1e-8)


def test_hermitian_collapse():
    e = B.eigen_families(M.hermitian_two_level, 2, 0)
    t = [0.3, 0.8]
    ref = fs.fs_tensor(e.right_unit, t).matrix
    for k in B.KINDS:
        assert np.max(np.abs(B.nh_fs_tensor(*e.pair(k), t, k).matrix - ref)) < 1e-8
    c = B.nh_connections(*e.pair("LR"), t, "LR")
    assert np.max(np.abs(c.gamma1.real.coeffs - fs.metric_connection(e.right_unit, t).coeffs)) < 1e-6


def test_lr_duality():
    for e, t in _fams():
        assert B.lr_duality_residual(e.left, e.right, t) < 1e-8


def test_gauge_invariance_of_kinds():
    """A common phase on L and R leaves LR unchanged; independent phases leave LL/RR unchanged."""
    e = B.eigen_families(M.pt_twisted, 3, 0)
    t = [0.4, 1.0, 0.7]
    beta = fs.PolynomialPhase(0.3, np.array([0.4, -0.2, 0.7]), np.diag([0.1, 0.2, -0.3]))
    gamma = fs.PolynomialPhase(-0.1, np.array([-0.5, 0.3, 0.2]), np.diag([0.2, -0.1, 0.0]))
    L, R = fs.gauge_transformed(e.left, beta), fs.gauge_transformed(e.right, beta)
    d = B.nh_fs_tensor(L, R, t, "LR").matrix - B.nh_fs_tensor(e.left, e.right, t, "LR").matrix
    assert np.max(np.abs(d)) < 1e-6
    Lu = fs.gauge_transformed(e.left_unit, beta)
    Ru = fs.gauge_transformed(e.right_unit, gamma)
    for k, (a, b) in {"LL": (Lu, Lu), "RR": (Ru, Ru)}.items():
        ref = B.nh_fs_tensor(*e.pair(k), t, k).matrix
        assert np.max(np.abs(B.nh_fs_tensor(a, b, t, k).matrix - ref)) < 1e-6


def test_normalized_generator_qfi():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    H = 0.5 * (X + X.conj().T)
    psi0 = rng.normal(size=3) + 1j * rng.normal(size=3)
    psi0 /= np.linalg.norm(psi0)
    var = np.real(np.vdot(H @ psi0, H @ psi0) - np.vdot(psi0, H @ psi0) ** 2)
    for s in (0.0, 1.3):
        assert B.normalized_generator_qfi(H, psi0, [s])[0, 0] == pytest.approx(4 * var, abs=1e-8)
    Hpt = M.pt_two_level([0.6, 1.0])
    p0 = np.array([1.0, 0.3j]) / np.linalg.norm([1.0, 0.3])
    fam = B.normalized_generator_family(Hpt, p0)
    for s in (0.2, 0.9):
        g = fs.fs_tensor(fam.with_mode("richardson_fd"), [s]).g[0, 0]
        assert B.normalized_generator_qfi(Hpt, p0, [s])[0, 0] == pytest.approx(4 * g, abs=1e-5)
    with pytest.raises(NormalizationError):
        B.normalized_generator_qfi(H, 2 * psi0, [0.0])
