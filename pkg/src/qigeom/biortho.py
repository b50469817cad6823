"""Biorthogonal geometry of non-Hermitian eigenstate families."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from .alpha import DualConnectionPair
from .errors import DomainError, ExceptionalPointError, NormalizationError, NumericalError
from .fs import d0_1, d1_2, d2_1, gauge_invariant_connections, tensor_from_jets
from .state import EPS_NORM, StateFamily, as_point, fd_jacobian, state_jet
from .tensors import ConnectionField, GeometricTensor

KINDS = ("LR", "RL", "LL", "RR")


@dataclass(frozen=True)
class BiorthoEigensystem:
    """Columns of ``right``/``left`` are eigenvectors with ``left^dag right = 1``."""

    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray

    def biorthonormality_defect(self) -> float:
        return float(np.max(np.abs(self.left.conj().T @ self.right - np.eye(len(self.eigenvalues)))))

    def residuals(self, H: np.ndarray) -> tuple:
        r = np.max(np.linalg.norm(H @ self.right - self.right * self.eigenvalues, axis=0))
        l = np.max(np.linalg.norm(H.conj().T @ self.left - self.left * np.conj(self.eigenvalues), axis=0))
        return float(r), float(l)


def _phase_fix(v: np.ndarray, ref=None) -> np.ndarray:
    k = int(np.argmax(np.abs(v))) if ref is None else ref
    if abs(v[k]) == 0:
        k = int(np.argmax(np.abs(v)))
    return v * (abs(v[k]) / v[k])


def biortho_eig(H, ep_tol: float = 1e-8, ref=None) -> BiorthoEigensystem:
    """Biorthonormal eigensystem sorted by ``(Re, Im)`` of the eigenvalues.

    Right vectors are unit-normalized with the largest component (or component
    ``ref``) made real positive; left vectors are rescaled to ``<L_n|R_n> = 1``.
    Raises :class:`ExceptionalPointError` when two eigenvalues or a left-right
    overlap fall below ``ep_tol`` relative to the spectral scale.
    """
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DomainError("Hamiltonian must be a square matrix")
    if not np.all(np.isfinite(H)):
        raise NumericalError("NON_FINITE", "Hamiltonian has non-finite entries")
    lam, VL, VR = scipy.linalg.eig(H, left=True, right=True)
    scale = max(1.0, float(np.max(np.abs(lam))))
    order = np.lexsort((np.round(lam.imag, 12), np.round(lam.real, 12)))
    lam, VL, VR = lam[order], VL[:, order], VR[:, order]
    n = lam.size
    if n > 1:
        gaps = np.abs(lam[:, None] - lam[None, :])
        np.fill_diagonal(gaps, np.inf)
        if np.min(gaps) < ep_tol * scale:
            raise ExceptionalPointError(f"eigenvalue gap {np.min(gaps):.3e} below tolerance",
                                        gap=float(np.min(gaps)))
    R = np.empty_like(VR)
    L = np.empty_like(VL)
    for m in range(n):
        r = _phase_fix(VR[:, m] / np.linalg.norm(VR[:, m]), ref)
        l = VL[:, m] / np.linalg.norm(VL[:, m])
        ov = np.vdot(l, r)
        if abs(ov) < ep_tol:
            raise ExceptionalPointError(f"left-right overlap {abs(ov):.3e} below tolerance",
                                        overlap=float(abs(ov)))
        R[:, m] = r
        L[:, m] = l / np.conj(ov)
    return BiorthoEigensystem(lam, R, L)


# -- eigenvector families ---------------------------------------------------------


@dataclass(frozen=True)
class EigenFamilies:
    """Left/right families of one eigenvector branch.

    ``left``/``right`` satisfy ``<L|R> = 1``; ``left_unit``/``right_unit`` are
    pointwise unit-normalized.
    """

    left: StateFamily
    right: StateFamily
    left_unit: StateFamily
    right_unit: StateFamily

    def pair(self, kind: str):
        kind = kind.upper()
        if kind in ("LR", "RL"):
            return self.left, self.right
        if kind == "LL":
            return self.left_unit, self.left_unit
        if kind == "RR":
            return self.right_unit, self.right_unit
        raise DomainError(f"unknown tensor kind {kind!r}")


def eigen_families(builder: Callable, n_params: int, index: int = 0, ref: int = 0,
                   ep_tol: float = 1e-8, name: str = "eigen") -> EigenFamilies:
    """Families ``theta -> (L_index, R_index)`` of ``builder(theta)``.

    The phase reference is the fixed component ``ref`` so frames are smooth
    across a finite-difference stencil.
    """

    def eig(theta):
        try:
            es = biortho_eig(builder(theta), ep_tol, ref=ref)
        except ExceptionalPointError as exc:
            raise ExceptionalPointError(exc.message, theta=theta, **exc.context) from None
        return es.left[:, index], es.right[:, index]

    def left_unit(theta):
        l = eig(theta)[0]
        return _phase_fix(l / np.linalg.norm(l), ref)

    mk = lambda f, tag, unit: StateFamily(f, n_params, normalized=unit, name=f"{name}.{tag}",
                                          meta={"norm": tag})
    return EigenFamilies(
        mk(lambda t: eig(t)[0], "biortho", False),
        mk(lambda t: eig(t)[1], "biortho", False),
        mk(left_unit, "unit", True),
        mk(lambda t: eig(t)[1], "unit", True),
    )


# -- tensors ----------------------------------------------------------------------


def _bra_ket(left: StateFamily, right: StateFamily, theta, kind: str, order: int):
    kind = kind.upper()
    if kind not in KINDS:
        raise DomainError(f"unknown tensor kind {kind!r}")
    theta = as_point(theta, right.n_params)
    bra_f, ket_f = {"LR": (left, right), "RL": (right, left),
                    "LL": (left, left), "RR": (right, right)}[kind]
    bra = state_jet(bra_f, theta, order)
    ket = bra if bra_f is ket_f else state_jet(ket_f, theta, order)
    pair = complex(np.sum(np.conj(bra.value) * ket.value * bra.weights))
    if abs(pair - 1) > EPS_NORM:
        raise NormalizationError(f"{kind} normalization <.|.> = {pair:.6g} differs from 1",
                                 theta=theta, defect=abs(pair - 1), kind=kind)
    return bra, ket


def nh_fs_tensor(left: StateFamily, right: StateFamily, theta, kind: str = "LR") -> GeometricTensor:
    """``<d_i bra|d_j ket> - <d_i bra|ket><bra|d_j ket>`` for the chosen kind."""
    bra, ket = _bra_ket(left, right, theta, kind, order=1)
    return GeometricTensor(tensor_from_jets(bra, ket))


def nh_berry_connection(left, right, theta, kind: str = "LR") -> np.ndarray:
    bra, ket = _bra_ket(left, right, theta, kind, order=1)
    return 1j * d0_1(bra, ket)


def nh_berry_curvature(left, right, theta, kind: str = "LR") -> np.ndarray:
    """Complex ``F_ij = d_i A_j - d_j A_i`` with ``A_i = i<bra|d_i ket>``.

    With a constant pairing this is ``2i`` times the antisymmetric part of the
    kind's tensor, i.e. it collects both ``omega`` and ``omega_tilde``.
    """
    bra, ket = _bra_ket(left, right, theta, kind, order=1)
    B = np.einsum("in,jn,n->ij", np.conj(bra.d1), ket.d1, bra.weights)
    return 1j * (B - B.T)


def nh_berry_curvature_curl(left, right, theta, kind: str = "LR", h: float = 1e-4) -> np.ndarray:
    theta = as_point(theta, right.n_params)
    steps = h * np.maximum(1.0, np.abs(theta))
    dA = fd_jacobian(lambda t: nh_berry_connection(left, right, t, kind), theta, steps, True)
    return dA - dA.T


def nh_connections(left, right, theta, kind: str = "LR") -> DualConnectionPair:
    """Gauge-completed connections of the kind.

    ``LR``: ``(Gamma^LR, Gamma^RL)`` built on ``<L|.|R>``; ``RL`` the same with
    the roles of the states exchanged; ``LL``/``RR``: ``(Gamma^II, conj Gamma^II)``.
    """
    bra, ket = _bra_ket(left, right, theta, kind, order=2)
    g1, g2 = gauge_invariant_connections(bra, ket)
    return DualConnectionPair(ConnectionField(g1), ConnectionField(g2),
                              ConnectionField(d2_1(bra, ket)), ConnectionField(d1_2(bra, ket)))


def lr_duality_residual(left, right, theta) -> float:
    """Exchange ``L`` and ``R`` in ``Gamma^LR``, conjugate, compare with ``Gamma^RL``."""
    lr = nh_connections(left, right, theta, "LR")
    swapped = nh_connections(left, right, theta, "RL")
    return float(np.max(np.abs(np.conj(swapped.gamma1.coeffs) - lr.gamma2.coeffs)))


# -- normalized non-unitary orbits -------------------------------------------------


def normalized_generator_family(H, psi0) -> StateFamily:
    """``theta -> exp(-i H theta) psi0 / ||.||`` with analytic first derivative."""
    H = np.asarray(H, dtype=complex)
    psi0 = np.asarray(psi0, dtype=complex)

    def raw(theta):
        u = scipy.linalg.expm(-1j * H * theta[0]) @ psi0
        n = np.linalg.norm(u)
        if not np.isfinite(n) or n < 1e-150:
            raise NumericalError("UNDERFLOW", "norm of the evolved state underflows", theta=theta)
        return u, n

    def ev(theta):
        u, n = raw(theta)
        return u / n

    def jac(theta):
        u, n = raw(theta)
        psi = u / n
        du = -1j * H @ psi                 # d(u)/n
        dn = np.real(np.vdot(psi, du))     # d(ln n)
        return (du - dn * psi)[None, :]

    return StateFamily(ev, 1, derivative_mode="analytic", jacobian=jac, name="normalized_orbit")


def normalized_generator_qfi(H, psi0, theta) -> np.ndarray:
    """``4(<H^dag H> - <H^dag><H>)`` in the pointwise-normalized evolved state."""
    H = np.asarray(H, dtype=complex)
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.vdot(psi0, psi0) - 1) > EPS_NORM:
        raise NormalizationError("reference state is not unit-norm")
    theta = as_point(theta, 1)
    psi = normalized_generator_family(H, psi0).evaluator(theta)
    Hpsi = H @ psi
    val = 4 * np.real(np.vdot(Hpsi, Hpsi) - np.vdot(psi, H.conj().T @ psi) * np.vdot(psi, Hpsi))
    return np.array([[val]])
