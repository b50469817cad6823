"""Classical information geometry of parametrized densities."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, NumericalError
from .state import (
    DERIVATIVE_MODES,
    EPS_P,
    SECOND_STEP,
    Grid,
    as_point,
    fd_hessian,
    fd_jacobian,
)
from .tensors import ConnectionField


@dataclass
class ClassicalFamily:
    """Density ``theta -> P`` on a grid (density convention) or finite outcome set.

    ``score`` optionally returns ``(d_i ln P, d_i d_j ln P)`` analytically.
    """

    density: Callable[[np.ndarray], np.ndarray]
    n_params: int
    grid: Optional[Grid] = None
    derivative_mode: str = "central_fd"
    fd_step: float = 1e-5
    score: Optional[Callable] = None
    domain: Optional[Sequence[tuple]] = None
    name: str = "classical"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.derivative_mode not in DERIVATIVE_MODES:
            raise ValueError(f"unknown derivative mode {self.derivative_mode!r}")
        if self.derivative_mode == "analytic" and self.score is None:
            raise ValueError("analytic mode needs a score closure")

    def weights(self, size: int) -> np.ndarray:
        return np.ones(size) if self.grid is None else self.grid.weights()


@dataclass(frozen=True)
class DensityJet:
    P: np.ndarray
    weights: np.ndarray
    support: np.ndarray
    dl: np.ndarray          # (n, m)
    ddl: np.ndarray         # (n, n, m)

    def E(self, f) -> np.ndarray:
        return np.sum(np.where(self.support, f, 0.0) * self.P * self.weights, axis=-1)


def _density(family: ClassicalFamily, theta) -> np.ndarray:
    if family.domain is not None:
        for k, (lo, hi) in enumerate(family.domain):
            if not lo <= theta[k] <= hi:
                raise DomainError(f"theta[{k}] outside [{lo}, {hi}]", theta=theta)
    P = np.asarray(family.density(theta), dtype=float)
    if not np.all(np.isfinite(P)) or np.any(P < 0):
        raise NumericalError("NON_FINITE", "density is negative or not finite", theta=theta)
    return P


def density_jet(family: ClassicalFamily, theta) -> DensityJet:
    theta = as_point(theta, family.n_params)
    P = _density(family, theta)
    w = family.weights(P.size)
    sup = P >= EPS_P
    if family.derivative_mode == "analytic":
        dl, ddl = (np.asarray(a, dtype=float) for a in family.score(theta))
    else:
        rich = family.derivative_mode == "richardson_fd"
        scale = np.maximum(1.0, np.abs(theta))
        f = lambda t: _density(family, t)
        dP = fd_jacobian(f, theta, family.fd_step * scale, rich)
        ddP = fd_hessian(f, theta, SECOND_STEP * scale * (2 if rich else 1), rich, P)
        inv = np.where(sup, 1.0 / np.where(sup, P, 1.0), 0.0)
        dl = dP * inv
        ddl = ddP * inv - dl[:, None] * dl[None, :]
    return DensityJet(P, w, sup, dl, ddl)


def fisher_rao(family: ClassicalFamily, theta) -> np.ndarray:
    """``E[d_i ln P d_j ln P]``."""
    j = density_jet(family, theta)
    g = j.E(j.dl[:, None] * j.dl[None, :])
    return 0.5 * (g + g.T)


def _check_alpha(alpha: float) -> None:
    if not np.isfinite(alpha) or abs(abs(alpha) - 1.0) < 1e-15:
        raise DomainError(f"alpha = {alpha} is excluded (alpha must differ from +-1)")


def alpha_embedding(family: ClassicalFamily, theta, alpha: float) -> np.ndarray:
    """``l_alpha = 2/(1-alpha) P^{(1-alpha)/2}``."""
    if alpha == 1:
        raise DomainError("the alpha = 1 embedding is ln P, not a power")
    P = _density(family, as_point(theta, family.n_params))
    return 2.0 / (1.0 - alpha) * P ** ((1.0 - alpha) / 2)


def classical_alpha_metric(family: ClassicalFamily, theta, alpha: float) -> np.ndarray:
    """``sum d_i l_alpha d_j l_{-alpha}`` with the power-law integrands evaluated directly."""
    _check_alpha(alpha)
    j = density_jet(family, theta)
    P = np.where(j.support, j.P, 1.0)
    dP = j.dl * P
    a = np.where(j.support, P ** (-(1 + alpha) / 2), 0.0) * dP
    b = np.where(j.support, P ** (-(1 - alpha) / 2), 0.0) * dP
    g = np.einsum("im,jm,m->ij", a, b, j.weights)
    return 0.5 * (g + g.T)


def classical_alpha_connection(family: ClassicalFamily, theta, alpha: float) -> ConnectionField:
    """``E[(d_ij l + (1-alpha)/2 d_i l d_j l) d_k l]``; defined for every real alpha."""
    if not np.isfinite(alpha):
        raise DomainError("alpha must be finite")
    j = density_jet(family, theta)
    inner_ = j.ddl + 0.5 * (1 - alpha) * j.dl[:, None] * j.dl[None, :]
    return ConnectionField(j.E(inner_[:, :, None, :] * j.dl[None, None, :, :]))


def fisher_rao_derivative(family: ClassicalFamily, theta, h: float = 1e-3) -> np.ndarray:
    """``d_k g_ij`` indexed ``[k, i, j]``, five-point stencil."""
    theta = as_point(theta, family.n_params)
    steps = h * np.maximum(1.0, np.abs(theta))
    return fd_jacobian(lambda t: fisher_rao(family, t), theta, steps, richardson=True)


def classical_duality_residual(family: ClassicalFamily, theta, alpha: float) -> float:
    """``max |d_k g_ij - Gamma^(alpha)_{ik,j} - Gamma^(-alpha)_{jk,i}|``."""
    dg = fisher_rao_derivative(family, theta)
    ga = classical_alpha_connection(family, theta, alpha).coeffs
    gb = classical_alpha_connection(family, theta, -alpha).coeffs
    from .tensors import compatibility_residual
    return float(np.max(np.abs(compatibility_residual(dg, ga, gb))))


# -- built-in classical families -------------------------------------------------


def gaussian_density(grid: Grid = Grid(-14.0, 14.0, 4001), mode: str = "analytic") -> ClassicalFamily:
    """``N(mu, sigma^2)`` with ``theta = (mu, sigma)``."""
    x = grid.x

    def density(theta):
        m, s = theta
        return np.exp(-(x - m) ** 2 / (2 * s * s)) / np.sqrt(2 * np.pi * s * s)

    def score(theta):
        m, s = theta
        y = x - m
        dl = np.array([y / s**2, -1 / s + y * y / s**3])
        ddl = np.array([[np.full_like(x, -1 / s**2), -2 * y / s**3],
                        [-2 * y / s**3, 1 / s**2 - 3 * y * y / s**4]])
        return dl, ddl

    return ClassicalFamily(density, 2, grid, mode, score=score,
                           domain=[(-np.inf, np.inf), (1e-3, np.inf)], name="gaussian")


def bernoulli(mode: str = "analytic") -> ClassicalFamily:
    """Two outcomes with ``P = (1 - p, p)``."""

    def score(theta):
        p = theta[0]
        dl = np.array([[-1 / (1 - p), 1 / p]])
        ddl = np.array([[[-1 / (1 - p) ** 2, -1 / p**2]]])
        return dl, ddl

    return ClassicalFamily(lambda t: np.array([1 - t[0], t[0]]), 1, None, mode,
                           score=score, domain=[(0.0, 1.0)], name="bernoulli")


def exponential_density(spec=None) -> ClassicalFamily:
    """``exp(C + theta . F - psi(theta))`` from an exponential-family spec."""
    from .models import default_exponential_spec, exp_family_moments, exp_family_normalizer

    spec = default_exponential_spec() if spec is None else spec

    def density(theta):
        return np.exp(spec.C + theta @ spec.F - exp_family_normalizer(spec, theta))

    def score(theta):
        mean, cov = exp_family_moments(spec, theta)
        m = spec.grid.points
        return spec.F - mean[:, None], np.broadcast_to(-cov[:, :, None], (spec.n, spec.n, m))

    return ClassicalFamily(density, spec.n, spec.grid, "analytic", score=score,
                           domain=spec.domain, name="exponential_density")


def constant_density(n: int = 2) -> ClassicalFamily:
    P = np.array([0.2, 0.3, 0.5])
    return ClassicalFamily(lambda t: P, n, None, "central_fd", name="constant")
