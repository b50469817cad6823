"""Alpha-deformed pure-state geometry.

Case 1 pairs ``l_{+-alpha} = Psi^{1 -+ alpha} / (1 -+ alpha)`` symmetrically and
is kept as a diagnostic.  Case 2 pairs

    l1 = P^{(1-alpha)/2} e^{i(1-alpha)phi} / (1 - alpha)
    l2 = P^{(1+alpha)/2} e^{i(1-alpha)phi} / (1 + alpha)

(``l2`` is the ``-alpha`` member of the phase-shifted family), so that
``<l1|l2> = 1/(1 - alpha^2)`` for every theta.  Powers of ``Psi`` are taken in
polar form with the unwrapped phase, never as principal-branch complex powers.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NormalizationError
from .fs import (
    DENSE_CAP,
    _unit_jet,
    d0_1,
    d1_2,
    d2_1,
    gauge_invariant_connections,
    metric_connection,
    polar_jet,
    tensor_from_jets,
)
from .state import EPS_NORM, StateFamily, StateJet, as_point, fd_jacobian, log_derivatives, polar, PureState
from .tensors import ConnectionField, GeometricTensor, compatibility_residual


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not np.isfinite(alpha) or abs(alpha) >= 1:
        raise DomainError(f"alpha = {alpha} outside the open interval (-1, 1)")
    return alpha


def _power_jet(jet: StateJet, a: float, b: float, scale: float) -> StateJet:
    """Jet of ``scale * P^{a/2} e^{i b phi}`` from the jet of ``Psi``.

    With ``L_i = d_i ln Psi``, ``D_i = a Re L_i + i b Im L_i`` is the log-derivative
    of the power and ``d_j D_i`` follows from ``d_j L_i = L_ij - L_i L_j``.
    """
    P, sup, L1, L2 = log_derivatives(jet)
    phi = polar(PureState(jet.value)).phi
    f = np.where(sup, scale * np.where(sup, P, 0.0) ** (a / 2) * np.exp(1j * b * phi), 0.0)
    D = a * L1.real + 1j * b * L1.imag
    d1 = D * f
    d2 = None
    if L2 is not None:
        dL = L2 - L1[:, None, :] * L1[None, :, :]
        dD = a * dL.real + 1j * b * dL.imag
        d2 = (D[:, None, :] * D[None, :, :] + dD) * f
    return StateJet(f, d1, d2, jet.weights)


def case2_jets(family: StateFamily, theta, alpha: float, order: int = 2):
    """``(l1(alpha), l2(-alpha))`` jets at ``theta``."""
    alpha = check_alpha(alpha)
    jet = _unit_jet(family, theta, order)
    l1 = _power_jet(jet, 1 - alpha, 1 - alpha, 1 / (1 - alpha))
    l2 = _power_jet(jet, 1 + alpha, 1 - alpha, 1 / (1 + alpha))
    pair = np.sum(np.conj(l1.value) * l2.value * jet.weights)
    target = 1 / (1 - alpha**2)
    if not np.isfinite(pair) or abs(pair - target) > EPS_NORM * max(1.0, target):
        raise NormalizationError(f"<l1|l2> = {pair} differs from {target}", theta=theta,
                                 defect=abs(pair - target))
    return l1, l2


def case2_pairing(family: StateFamily, theta, alpha: float) -> complex:
    l1, l2 = case2_jets(family, theta, alpha, order=1)
    return complex(np.sum(np.conj(l1.value) * l2.value * l1.weights))


# -- Case 1 (diagnostic) ----------------------------------------------------------


@dataclass(frozen=True)
class Case1Result:
    tensor: GeometricTensor
    normalization_defect: float


def case1_tensor(family: StateFamily, theta, alpha: float) -> Case1Result:
    """Symmetric deformation without a pairing constraint.

    ``normalization_defect = |(1 - alpha^2) <l_alpha|l_-alpha> - 1|`` vanishes for
    real states and measures the phase-induced loss of mutual normalization.
    """
    alpha = check_alpha(alpha)
    jet = _unit_jet(family, theta, order=1)
    la = _power_jet(jet, 1 - alpha, 1 - alpha, 1 / (1 - alpha))
    lm = _power_jet(jet, 1 + alpha, 1 + alpha, 1 / (1 + alpha))
    pair = np.sum(np.conj(la.value) * lm.value * jet.weights)
    return Case1Result(GeometricTensor(tensor_from_jets(la, lm)),
                       float(abs((1 - alpha**2) * pair - 1)))


# -- Case 2 -----------------------------------------------------------------------


def case2_tensor(family: StateFamily, theta, alpha: float) -> GeometricTensor:
    """``<d_i l1|d_j l2> - (1 - alpha^2) <d_i l1|l2><l1|d_j l2>``."""
    l1, l2 = case2_jets(family, theta, alpha, order=1)
    return GeometricTensor(tensor_from_jets(l1, l2, pairing=1 / (1 - alpha**2)))


@dataclass(frozen=True)
class Case2Components:
    """Real coefficient matrices: ``FS = g + i g_tilde + i omega`` (``omega_tilde = 0``)."""

    g: np.ndarray
    omega: np.ndarray
    g_tilde: np.ndarray

    def tensor(self) -> GeometricTensor:
        return GeometricTensor(self.g + 1j * self.omega + 1j * self.g_tilde)


def case2_components(family: StateFamily, theta, alpha: float) -> Case2Components:
    """Components from expectations of ``d ln P`` and ``d phi``."""
    alpha = check_alpha(alpha)
    pj = polar_jet(_unit_jet(family, theta, order=1))
    frac = pj.degenerate_fraction()
    if frac > 0.5:
        warnings.warn(f"phase is degenerate on {frac:.0%} of the samples", RuntimeWarning)
    E = pj.E
    dl, dp = pj.dl, pj.dphi
    mp = E(dp)
    r = (1 - alpha) / (1 + alpha)
    g = 0.25 * E(dl[:, None] * dl[None, :]) + r * (E(dp[:, None] * dp[None, :]) - np.outer(mp, mp))
    X = E(dl[:, None] * dp[None, :])            # E[dl_i dphi_j]
    omega = (X - X.T) / (2 * (1 + alpha))
    g_tilde = -alpha * (X + X.T) / (2 * (1 + alpha))
    return Case2Components(g, omega, g_tilde)


def alpha_berry_connection(family: StateFamily, theta, alpha: float) -> np.ndarray:
    """``A_i = i <l1|d_i l2>`` (complex in general)."""
    l1, l2 = case2_jets(family, theta, alpha, order=1)
    return 1j * d0_1(l1, l2)


def alpha_berry_field_strength(family: StateFamily, theta, alpha: float) -> np.ndarray:
    """``F_ij = d_i A_j - d_j A_i = i(<d_i l1|d_j l2> - <d_j l1|d_i l2>)``.

    Equals ``2i`` times the antisymmetric part of :func:`case2_tensor`; at
    ``alpha = 0`` it is the Hermitian Berry curvature.
    """
    l1, l2 = case2_jets(family, theta, alpha, order=1)
    B = np.einsum("in,jn,n->ij", np.conj(l1.d1), l2.d1, l1.weights)
    return 1j * (B - B.T)


def alpha_field_strength_curl(family: StateFamily, theta, alpha: float, h: float = 1e-4) -> np.ndarray:
    theta = as_point(theta, family.n_params)
    steps = h * np.maximum(1.0, np.abs(theta))
    dA = fd_jacobian(lambda t: alpha_berry_connection(family, t, alpha), theta, steps, True)
    return dA - dA.T


# -- alpha density matrix ---------------------------------------------------------


def _dense(jet: StateJet, cap: int):
    if jet.value.size > cap:
        raise DomainError(f"dense trace forms capped at dimension {cap}")
    s = np.sqrt(jet.weights)
    return jet.value * s, jet.d1 * s


def alpha_density(family: StateFamily, theta, alpha: float, cap: int = DENSE_CAP) -> np.ndarray:
    """``|l2><l1|`` as a dense matrix (grid weights folded into the vectors)."""
    l1, l2 = case2_jets(family, theta, alpha, order=1)
    v1, _ = _dense(l1, cap)
    v2, _ = _dense(l2, cap)
    return np.outer(v2, np.conj(v1))


def observable_density(rho: np.ndarray) -> np.ndarray:
    return 0.5 * (rho + rho.conj().T)


def alpha_qfi_trace(family: StateFamily, theta, alpha: float, cap: int = DENSE_CAP) -> GeometricTensor:
    """``(1 - alpha^2)^2 Tr[rho d_i rho d_j rho]`` with ``rho = |l2><l1|``."""
    l1, l2 = case2_jets(family, theta, alpha, order=1)
    v1, d1 = _dense(l1, cap)
    v2, d2 = _dense(l2, cap)
    rho = np.outer(v2, np.conj(v1))
    drho = [np.outer(d2[i], np.conj(v1)) + np.outer(v2, np.conj(d1[i])) for i in range(l1.n)]
    c = (1 - alpha**2) ** 2
    M = np.array([[c * np.trace(rho @ drho[i] @ drho[j]) for j in range(l1.n)]
                  for i in range(l1.n)])
    return GeometricTensor(M)


# -- connections ------------------------------------------------------------------


@dataclass(frozen=True)
class DualConnectionPair:
    gamma1: ConnectionField
    gamma2: ConnectionField
    bare1: ConnectionField
    bare2: ConnectionField

    def re_sum(self) -> np.ndarray:
        return np.real(self.gamma1.coeffs + self.gamma2.coeffs)


def dual_connections(family: StateFamily, theta, alpha: float) -> DualConnectionPair:
    """Bare ``<d_ij l1|d_k l2>``, ``<d_k l1|d_ij l2>`` and their gauge-completed forms."""
    l1, l2 = case2_jets(family, theta, alpha, order=2)
    g1, g2 = gauge_invariant_connections(l1, l2, pairing=1 / (1 - alpha**2))
    return DualConnectionPair(ConnectionField(g1), ConnectionField(g2),
                              ConnectionField(d2_1(l1, l2)), ConnectionField(d1_2(l1, l2)))


def star_duality_residual(family: StateFamily, theta, alpha: float) -> float:
    """Swap ``alpha -> -alpha`` and the roles of ``l1``/``l2``, conjugate, compare.

    The second bare connection at ``-alpha`` with the roles exchanged is
    ``<d_k l2(-alpha)|d_ij l1(alpha)>``; its conjugate must equal the first.
    """
    l1, l2 = case2_jets(family, theta, alpha, order=2)
    transformed = np.conj(d1_2(l2, l1))
    return float(np.max(np.abs(transformed - d2_1(l1, l2))))


def re_sum_residual(family: StateFamily, theta, alpha: float) -> float:
    """``max |Re[Gamma^1 + Gamma^2] - 2 Gamma^(c)|``."""
    pair = dual_connections(family, theta, alpha)
    return float(np.max(np.abs(pair.re_sum() - 2 * metric_connection(family, theta).coeffs)))


def symmetric_tensor_derivative(family: StateFamily, theta, alpha: float, gauge: bool = True,
                                h: float = 1e-3) -> np.ndarray:
    """``d_k FS^sy_ij`` indexed ``[k, i, j]``; ``gauge=False`` uses the bare ``<d_i l1|d_j l2>``."""
    theta = as_point(theta, family.n_params)

    def sym(t):
        if gauge:
            M = case2_tensor(family, t, alpha).matrix
        else:
            l1, l2 = case2_jets(family, t, alpha, order=1)
            M = np.einsum("in,jn,n->ij", np.conj(l1.d1), l2.d1, l1.weights)
        return 0.5 * (M + M.T)

    steps = h * np.maximum(1.0, np.abs(theta))
    return fd_jacobian(sym, theta, steps, richardson=True)


def pm_alpha_duality_residual(family: StateFamily, theta, alpha: float, gauge: bool = True) -> float:
    """``d_k FS^sy_ij - (G1_{ik,j} + G2_{jk,i} + G1_{jk,i} + G2_{ik,j}) / 2``."""
    dS = symmetric_tensor_derivative(family, theta, alpha, gauge)
    pair = dual_connections(family, theta, alpha)
    g1 = (pair.gamma1 if gauge else pair.bare1).coeffs
    g2 = (pair.gamma2 if gauge else pair.bare2).coeffs
    r = 0.5 * (compatibility_residual(dS, g1, g2) + compatibility_residual(dS, g2, g1))
    return float(np.max(np.abs(r)))


def overlap_conjugation_check(family: StateFamily, theta, theta_p, alpha: float) -> float:
    """``|D^alpha(theta, theta') - (D^{-alpha}(theta', theta))^**|``.

    ``D^alpha(theta, theta') = <l1(theta') - l1(theta)|l2(theta') - l2(theta)>``;
    ``**`` flips alpha, exchanges ``l1``/``l2`` and conjugates.
    """
    a1, a2 = case2_jets(family, theta, alpha, order=1)
    b1, b2 = case2_jets(family, theta_p, alpha, order=1)
    w = a1.weights
    lhs = np.sum(np.conj(b1.value - a1.value) * (b2.value - a2.value) * w)
    rhs = np.conj(np.sum(np.conj(a2.value - b2.value) * (a1.value - b1.value) * w))
    return float(abs(lhs - rhs))


def phase_block_scaling_residual(family: StateFamily, theta, alpha: float) -> float:
    """``|(g^alpha - g_amp) - (1-alpha)/(1+alpha) (g^0 - g_amp)|`` with ``g_amp = E[dl dl]/4``.

    The amplitude block is alpha-independent; only the phase covariance is rescaled.
    """
    alpha = check_alpha(alpha)
    pj = polar_jet(_unit_jet(family, theta, order=1))
    g_amp = 0.25 * pj.E(pj.dl[:, None] * pj.dl[None, :])
    ga = case2_tensor(family, theta, alpha).g - g_amp
    g0 = case2_tensor(family, theta, 0.0).g - g_amp
    return float(np.max(np.abs(ga - (1 - alpha) / (1 + alpha) * g0)))


def levi_civita(dmetric: np.ndarray) -> np.ndarray:
    """``(d_i g_jk + d_j g_ik - d_k g_ij) / 2`` indexed ``[i, j, k]`` from ``dmetric[k, i, j]``."""
    return 0.5 * (dmetric + np.swapaxes(dmetric, 0, 1) - np.transpose(dmetric, (1, 2, 0)))


def re_sum_levi_civita_residual(family: StateFamily, theta, alpha: float, h: float = 1e-4) -> float:
    """``max |Re[Gamma^1 + Gamma^2] - 2 LC(g^alpha)|`` with the metric derivative by FD."""
    theta = as_point(theta, family.n_params)
    steps = h * np.maximum(1.0, np.abs(theta))
    dg = fd_jacobian(lambda t: case2_tensor(family, t, alpha).g, theta, steps, True)
    pair = dual_connections(family, theta, alpha)
    return float(np.max(np.abs(pair.re_sum() - 2 * levi_civita(dg))))
