"""Hermitian pure-state geometry: quantum geometric tensor, Berry objects,
metric-compatible and alpha-family connections, density-matrix trace forms."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DomainError
from .state import (
    EPS_NORM,
    StateFamily,
    StateJet,
    as_point,
    check_unit_norm,
    fd_jacobian,
    log_derivatives,
    state_jet,
)
from .tensors import ConnectionField, GeometricTensor

DENSE_CAP = 512


# -- bilinear building blocks -------------------------------------------------

def d1_d1(bra: StateJet, ket: StateJet) -> np.ndarray:
    """``<d_i bra | d_j ket>``."""
    return np.einsum("in,jn,n->ij", np.conj(bra.d1), ket.d1, bra.weights)


def d1_0(bra: StateJet, ket: StateJet) -> np.ndarray:
    """``<d_i bra | ket>``."""
    return np.einsum("in,n,n->i", np.conj(bra.d1), ket.value, bra.weights)


def d0_1(bra: StateJet, ket: StateJet) -> np.ndarray:
    """``<bra | d_j ket>``."""
    return np.einsum("n,jn,n->j", np.conj(bra.value), ket.d1, bra.weights)


def d2_1(bra: StateJet, ket: StateJet) -> np.ndarray:
    """``<d_i d_j bra | d_k ket>`` indexed ``[i, j, k]``."""
    return np.einsum("ijn,kn,n->ijk", np.conj(bra.d2), ket.d1, bra.weights)


def d1_2(bra: StateJet, ket: StateJet) -> np.ndarray:
    """``<d_k bra | d_i d_j ket>`` indexed ``[i, j, k]``."""
    return np.einsum("kn,ijn,n->ijk", np.conj(bra.d1), ket.d2, bra.weights)


def d2_0(bra: StateJet, ket: StateJet) -> np.ndarray:
    return np.einsum("ijn,n,n->ij", np.conj(bra.d2), ket.value, bra.weights)


def d0_2(bra: StateJet, ket: StateJet) -> np.ndarray:
    return np.einsum("n,ijn,n->ij", np.conj(bra.value), ket.d2, bra.weights)


def d0_0(bra: StateJet, ket: StateJet) -> complex:
    return complex(np.sum(np.conj(bra.value) * ket.value * bra.weights))


def tensor_from_jets(bra: StateJet, ket: StateJet, pairing: complex = 1.0) -> np.ndarray:
    """``<d_i bra|d_j ket> - <d_i bra|ket><bra|d_j ket> / pairing``."""
    return d1_d1(bra, ket) - np.outer(d1_0(bra, ket), d0_1(bra, ket)) / pairing


def gauge_invariant_connections(bra: StateJet, ket: StateJet, pairing: complex = 1.0):
    """Gauge-completed pair built from the third-order overlap expansion.

    Returns ``(gamma1, gamma2)`` with ``gamma1 ~ <d_i d_j bra|d_k ket>`` and
    ``gamma2 ~ <d_k bra|d_i d_j ket>`` plus the subtractions restoring
    invariance under a common phase of ``bra`` and ``ket``.  ``pairing`` is the
    constant value of ``<bra|ket>``; the product terms carry ``1/pairing``
    per extra factor.
    """
    c = 1.0 / pairing
    a = d1_0(bra, ket)       # <d_i bra|ket>
    b = d0_1(bra, ket)       # <bra|d_k ket>
    B = d1_d1(bra, ket)      # <d_i bra|d_k ket>
    g1 = (
        d2_1(bra, ket)
        - c * (np.einsum("ij,k->ijk", d2_0(bra, ket), b)
               + np.einsum("i,jk->ijk", a, B) + np.einsum("j,ik->ijk", a, B))
        + 2 * c**2 * np.einsum("i,j,k->ijk", a, a, b)
    )
    g2 = (
        d1_2(bra, ket)
        - c * (np.einsum("k,ij->ijk", a, d0_2(bra, ket))
               + np.einsum("i,kj->ijk", b, B) + np.einsum("j,ki->ijk", b, B))
        + 2 * c**2 * np.einsum("k,i,j->ijk", a, b, b)
    )
    return g1, g2


# -- Hermitian tensor -----------------------------------------------------------

def _unit_jet(family: StateFamily, theta, order: int) -> StateJet:
    theta = as_point(theta, family.n_params)
    jet = state_jet(family, theta, order)
    check_unit_norm(jet.value, jet.weights, theta, EPS_NORM)
    return jet


def fs_tensor(family: StateFamily, theta) -> GeometricTensor:
    jet = _unit_jet(family, theta, order=1)
    return GeometricTensor(tensor_from_jets(jet, jet))


def berry_connection(family: StateFamily, theta) -> np.ndarray:
    """``A_i = i <Psi|d_i Psi>`` (real for unit-norm families)."""
    jet = _unit_jet(family, theta, order=1)
    return np.real(1j * d0_1(jet, jet))


def berry_curvature(family: StateFamily, theta) -> np.ndarray:
    """``F_ij = d_i A_j - d_j A_i``, evaluated as ``-2 Im FS_ij``."""
    return -2.0 * fs_tensor(family, theta).omega


def berry_curvature_curl(family: StateFamily, theta, h: float = 1e-4) -> np.ndarray:
    """Curvature from central differences of the Berry connection."""
    theta = as_point(theta, family.n_params)
    steps = h * np.maximum(1.0, np.abs(theta))
    dA = fd_jacobian(lambda t: berry_connection(family, t), theta, steps, richardson=True)
    return dA - dA.T  # dA[i, j] = d_i A_j


# -- polar-form evaluation --------------------------------------------------------

@dataclass(frozen=True)
class PolarJet:
    """Derivatives of ``l = ln P`` and ``phi`` with the density ``P``."""

    P: np.ndarray
    weights: np.ndarray
    support: np.ndarray
    dl: np.ndarray
    dphi: np.ndarray
    ddl: Optional[np.ndarray]
    ddphi: Optional[np.ndarray]

    def E(self, f) -> np.ndarray:
        """Expectation over the last axis, restricted to the support."""
        return np.sum(np.where(self.support, f, 0.0) * self.P * self.weights, axis=-1)

    def degenerate_fraction(self) -> float:
        """Share of degenerate samples between the first and last supported one."""
        idx = np.flatnonzero(self.support)
        if idx.size == 0:
            return 1.0
        return 1.0 - float(np.mean(self.support[idx[0]:idx[-1] + 1]))


def polar_jet(jet: StateJet) -> PolarJet:
    P, sup, L1, L2 = log_derivatives(jet)
    dl = 2.0 * L1.real
    dphi = L1.imag
    ddl = ddphi = None
    if L2 is not None:
        dL = L2 - L1[:, None, :] * L1[None, :, :]
        ddl = 2.0 * dL.real
        ddphi = dL.imag
    return PolarJet(P, jet.weights, sup, dl, dphi, ddl, ddphi)


def _polar(family: StateFamily, theta, order: int) -> PolarJet:
    pj = polar_jet(_unit_jet(family, theta, order))
    frac = pj.degenerate_fraction()
    if frac > 0.5:
        warnings.warn(f"phase is degenerate on {frac:.0%} of the samples", RuntimeWarning)
    return pj


def qmt_polar(family: StateFamily, theta) -> np.ndarray:
    """``(1/4) E[dl dl] + Cov[dphi, dphi]``."""
    pj = _polar(family, theta, order=1)
    E = pj.E
    dl, dp = pj.dl, pj.dphi
    mp = E(dp)
    return 0.25 * E(dl[:, None] * dl[None, :]) + E(dp[:, None] * dp[None, :]) - np.outer(mp, mp)


def berry_curvature_polar(family: StateFamily, theta) -> np.ndarray:
    """``F_ij = -E[dl_i dphi_j - dl_j dphi_i]``, i.e. ``-2 omega`` in polar variables."""
    pj = _polar(family, theta, order=1)
    X = pj.E(pj.dl[:, None] * pj.dphi[None, :])
    return X.T - X


def _phase_blocks(pj: PolarJet):
    """Pieces ``S`` (amplitude + phase) of the polar connection and ``K``.

    The metric connection splits as ``K_ijk + S_ijk / 2`` with
    ``K = (1/4) E[d_ij l d_k l]``; the alpha family multiplies ``S`` by
    ``(1 - alpha)``.  Symmetrisation ``(ij)`` is ``(ij + ji)/2`` and ``[ij]``
    is ``(ij - ji)/2``.
    """
    E = pj.E
    dl, dp, ddl, ddp = pj.dl, pj.dphi, pj.ddl, pj.ddphi
    l3 = E(dl[:, None, None] * dl[None, :, None] * dl[None, None, :])
    K = 0.25 * E(ddl[:, :, None] * dl[None, None, :])
    # 2 d_(i l d_j) phi = dl_i dphi_j + dl_j dphi_i
    lp = dl[:, None] * dp[None, :]
    sym_lp = lp + np.swapaxes(lp, 0, 1)
    Q = E(
        2 * ddp[:, :, None] * dp[None, None, :]
        + sym_lp[:, :, None] * dp[None, None, :]
        - dp[:, None, None] * dp[None, :, None] * dl[None, None, :]
    )
    mp = E(dp)
    m_sym_lp = E(sym_lp)                       # 2 E[d_(i phi d_j) l]
    m_ddp = E(ddp)
    # 2 E[d_[k phi d_j] l] = E[dphi_k dl_j - dphi_j dl_k] = C[k, j]
    X = E(dp[:, None] * dl[None, :])
    C = X - X.T
    R = (
        2 * m_ddp[:, :, None] * mp[None, None, :]
        + m_sym_lp[:, :, None] * mp[None, None, :]
        + mp[:, None, None] * C.T[None, :, :]      # E[phi_i] C[k, j] at [i, j, k]
        + mp[None, :, None] * C.T[:, None, :]      # E[phi_j] C[k, i]
    )
    S = 0.25 * l3 + Q - R
    return K, S


def metric_connection(family: StateFamily, theta) -> ConnectionField:
    """Real metric connection ``Gamma^(c)_{ij,k}`` from bra-ket products."""
    jet = _unit_jet(family, theta, order=2)
    a = d1_0(jet, jet)
    b = d0_1(jet, jet)
    B = d1_d1(jet, jet)
    G = (
        d2_1(jet, jet)
        - np.einsum("ij,k->ijk", d2_0(jet, jet), b)
        - (np.einsum("i,jk->ijk", a, B) + np.einsum("j,ik->ijk", a, B))
    )
    return ConnectionField(G.real)


def metric_connection_polar(family: StateFamily, theta) -> ConnectionField:
    K, S = _phase_blocks(_polar(family, theta, order=2))
    return ConnectionField(K + 0.5 * S)


def nonmetricity(family: StateFamily, theta, alpha: float) -> ConnectionField:
    """Non-metric part ``N_{ij,k}(alpha) = -(alpha/2) S_ijk``."""
    _, S = _phase_blocks(_polar(family, theta, order=2))
    return ConnectionField(-0.5 * alpha * S)


def alpha_family_connection(family: StateFamily, theta, alpha: float) -> ConnectionField:
    """``Gamma^(alpha) = Gamma^(c) + N(alpha)``; ``alpha = 0`` returns ``Gamma^(c)``."""
    gamma_c = metric_connection(family, theta)
    if alpha == 0:
        return gamma_c
    return gamma_c + nonmetricity(family, theta, alpha)


def metric_derivative(family: StateFamily, theta, h: float = 1e-3) -> np.ndarray:
    """``d_k g^FS_ij`` indexed ``[k, i, j]`` by a five-point stencil."""
    theta = as_point(theta, family.n_params)
    steps = h * np.maximum(1.0, np.abs(theta))
    return fd_jacobian(lambda t: fs_tensor(family, t).g, theta, steps, richardson=True)


def metric_compatibility_residual(family: StateFamily, theta) -> np.ndarray:
    """``d_k g_ij - Gamma^(c)_{ki,j} - Gamma^(c)_{kj,i}`` indexed ``[i, j, k]``."""
    dg = metric_derivative(family, theta)           # [k, i, j]
    G = metric_connection(family, theta).coeffs      # [i, j, k]
    return (np.transpose(dg, (1, 2, 0))
            - np.transpose(G, (1, 2, 0))            # G[k, i, j] at [i, j, k]
            - np.transpose(G, (2, 1, 0)))           # G[k, j, i] at [i, j, k]


# -- density-matrix trace forms ---------------------------------------------------

def _dense_vectors(jet: StateJet, cap: int):
    dim = jet.value.shape[-1]
    if dim > cap:
        raise DomainError(f"dense trace forms capped at dimension {cap}, state has {dim}")
    s = np.sqrt(jet.weights)
    v = jet.value * s
    d1 = jet.d1 * s
    d2 = None if jet.d2 is None else jet.d2 * s
    return v, d1, d2


def _outer(a, b):
    return np.outer(a, np.conj(b))


def density_derivatives(jet: StateJet, cap: int = DENSE_CAP):
    """``rho``, ``d_i rho`` and ``d_i d_j rho`` for ``rho = |Psi><Psi|``."""
    v, d1, d2 = _dense_vectors(jet, cap)
    n = d1.shape[0]
    rho = _outer(v, v)
    drho = np.array([_outer(d1[i], v) + _outer(v, d1[i]) for i in range(n)])
    ddrho = None
    if d2 is not None:
        ddrho = np.array([[
            _outer(d2[i, j], v) + _outer(d1[i], d1[j]) + _outer(d1[j], d1[i]) + _outer(v, d2[i, j])
            for j in range(n)] for i in range(n)])
    return rho, drho, ddrho


@dataclass(frozen=True)
class TraceFormCheck:
    metric: np.ndarray
    connection: np.ndarray
    metric_check: float
    connection_check: float


def qfi_trace_forms(family: StateFamily, theta, cap: int = DENSE_CAP) -> TraceFormCheck:
    """Four-term metric and six-term connection traces vs. the bra-ket forms."""
    jet = _unit_jet(family, theta, order=2)
    rho, dr, ddr = density_derivatives(jet, cap)
    n = dr.shape[0]
    tr = lambda *ms: np.trace(np.linalg.multi_dot(ms)) if len(ms) > 1 else np.trace(ms[0])
    Fg = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            Fg[i, j] = 0.25 * np.real(
                tr(rho, dr[i], dr[j]) + tr(dr[j], dr[i], rho)
                + tr(rho, dr[j], dr[i]) + tr(dr[i], dr[j], rho)
            )
    Fc = np.empty((n, n, n))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                Fc[i, j, k] = 0.25 * np.real(
                    tr(rho, ddr[i, j], dr[k]) + tr(rho, dr[k], ddr[i, j])
                    + tr(ddr[i, j], dr[k], rho) + tr(dr[k], ddr[i, j], rho)
                    + tr(dr[i], dr[k], dr[j]) + tr(dr[j], dr[k], dr[i])
                )
    g = GeometricTensor(tensor_from_jets(jet, jet)).g
    a = d1_0(jet, jet)
    b = d0_1(jet, jet)
    B = d1_d1(jet, jet)
    G = (d2_1(jet, jet) - np.einsum("ij,k->ijk", d2_0(jet, jet), b)
         - np.einsum("i,jk->ijk", a, B) - np.einsum("j,ik->ijk", a, B)).real
    return TraceFormCheck(
        Fg, Fc,
        float(np.max(np.abs(Fg - g))),
        float(np.max(np.abs(Fc - G))),
    )


# -- gauge transformations --------------------------------------------------------

@dataclass(frozen=True)
class PolynomialPhase:
    """``beta(theta) = c + b . theta + theta^T Q theta`` with symmetric ``Q``."""

    c: float
    b: np.ndarray
    Q: np.ndarray

    @classmethod
    def random(cls, n: int, rng: np.random.Generator, scale: float = 1.0) -> "PolynomialPhase":
        Q = rng.normal(size=(n, n)) * scale
        return cls(float(rng.normal()), rng.normal(size=n) * scale, 0.5 * (Q + Q.T))

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        return self.c + self.b @ theta + theta @ self.Q @ theta

    def grad(self, theta):
        return self.b + 2 * self.Q @ np.asarray(theta, dtype=float)

    def hess(self, theta):
        return 2 * self.Q


def gauge_transformed(family: StateFamily, beta: Callable) -> StateFamily:
    """Family ``exp(i beta(theta)) Psi(theta)``.

    Analytic derivatives are composed when ``family`` is analytic and ``beta``
    exposes ``grad``/``hess``.
    """
    ev = lambda t: np.exp(1j * beta(t)) * family.evaluator(t)
    jac = hes = None
    mode = family.derivative_mode
    if mode == "analytic" and hasattr(beta, "grad"):
        def jac(t):
            ph = np.exp(1j * beta(t))
            return ph * (np.asarray(family.jacobian(t))
                         + 1j * beta.grad(t)[:, None] * family.evaluator(t))

        def hes(t):
            ph = np.exp(1j * beta(t))
            psi = family.evaluator(t)
            d1 = np.asarray(family.jacobian(t))
            d2 = np.asarray(family.hessian(t))
            gb = beta.grad(t)
            hb = beta.hess(t)
            return ph * (
                d2 + 1j * (gb[:, None, None] * d1[None, :, :] + gb[None, :, None] * d1[:, None, :])
                + (1j * hb - np.outer(gb, gb))[:, :, None] * psi
            )
    elif mode == "analytic":
        mode = "central_fd"
    return StateFamily(ev, family.n_params, family.grid, family.normalized, mode,
                       family.fd_step, jac, hes, family.domain, family.name + "+gauge")
