"""Parametrized pure-state families, derivative jets and the polar form.

A family maps a real parameter vector ``theta`` to complex amplitudes, either
on a finite basis or sampled on a uniform grid.  Grid integrals use the
trapezoid rule: ``<a|b> = sum(conj(a) * b * w)`` with ``w`` the trapezoid
weights, so ``P = |Psi|^2`` is a density and ``sum(P * w) = 1``.

All geometric quantities downstream are built from a :class:`StateJet`, the
value of the state plus its first and second parameter derivatives at one
point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, NormalizationError, NumericalError

# Tolerances shared by every module.
EPS_NORM = 1e-8
EPS_FD = 1e-4
EPS_ANALYTIC = 1e-10
EPS_P = 1e-12

DERIVATIVE_MODES = ("analytic", "central_fd", "richardson_fd")

# Relative step for second derivatives; balances h^2 truncation against
# eps/h^2 round-off for O(1) amplitudes.
SECOND_STEP = 2e-4


@dataclass(frozen=True)
class Grid:
    """Uniform 1D grid ``[xmin, xmax]`` with ``points`` samples."""

    xmin: float
    xmax: float
    points: int

    def __post_init__(self):
        if self.points < 2:
            raise ValueError("grid needs at least 2 points")
        if not self.xmax > self.xmin:
            raise ValueError("grid requires xmax > xmin")

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.xmin, self.xmax, self.points)

    @property
    def spacing(self) -> float:
        return (self.xmax - self.xmin) / (self.points - 1)

    def weights(self) -> np.ndarray:
        w = np.full(self.points, self.spacing)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.xmin, self.xmax, factor * (self.points - 1) + 1)


def quadrature_weights(dim: int, grid: Optional[Grid]) -> np.ndarray:
    if grid is None:
        return np.ones(dim)
    if grid.points != dim:
        raise ValueError(f"grid has {grid.points} points, state has {dim}")
    return grid.weights()


@dataclass(frozen=True)
class PureState:
    amplitudes: np.ndarray
    grid: Optional[Grid] = None
    norm_kind: str = "unit"

    @property
    def weights(self) -> np.ndarray:
        return quadrature_weights(self.amplitudes.shape[-1], self.grid)

    @property
    def grid_spacing(self) -> Optional[float]:
        return None if self.grid is None else self.grid.spacing

    def norm(self) -> float:
        return float(np.sqrt(np.real(inner(self, self))))


@dataclass(frozen=True)
class PolarForm:
    """``Psi = sqrt(P) exp(i phi)``; ``P`` is a density w.r.t. ``weights``."""

    P: np.ndarray
    phi: np.ndarray
    weights: np.ndarray
    degenerate: np.ndarray

    @property
    def support(self) -> np.ndarray:
        return ~self.degenerate

    def recompose(self) -> np.ndarray:
        return np.sqrt(self.P) * np.exp(1j * self.phi)


@dataclass
class StateFamily:
    """Differentiable map ``theta -> amplitudes``.

    ``jacobian`` / ``hessian`` are optional analytic closures returning arrays
    of shape ``(n, dim)`` and ``(n, n, dim)``; they are used when
    ``derivative_mode == "analytic"``.  ``fd_step`` is the base step of the
    central differences, scaled by ``max(1, |theta_i|)``.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    n_params: int
    grid: Optional[Grid] = None
    normalized: bool = True
    derivative_mode: str = "central_fd"
    fd_step: float = 1e-5
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    domain: Optional[Sequence[tuple]] = None
    name: str = "family"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.derivative_mode not in DERIVATIVE_MODES:
            raise ValueError(f"unknown derivative mode {self.derivative_mode!r}")
        if self.derivative_mode == "analytic" and self.jacobian is None:
            raise ValueError("analytic mode needs a jacobian closure")
        if self.fd_step <= 0:
            raise ValueError("fd_step must be positive")

    def with_mode(self, mode: str, fd_step: Optional[float] = None) -> "StateFamily":
        """Copy of the family using another derivative mode."""
        return StateFamily(
            evaluator=self.evaluator,
            n_params=self.n_params,
            grid=self.grid,
            normalized=self.normalized,
            derivative_mode=mode,
            fd_step=self.fd_step if fd_step is None else fd_step,
            jacobian=self.jacobian,
            hessian=self.hessian,
            domain=self.domain,
            name=self.name,
            meta=dict(self.meta),
        )

    @property
    def tolerance(self) -> float:
        return EPS_ANALYTIC if self.derivative_mode == "analytic" else EPS_FD


def as_point(theta, n: Optional[int] = None) -> np.ndarray:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.ndim != 1 or theta.size < 1:
        raise DomainError("parameter point must be a non-empty vector")
    if not np.all(np.isfinite(theta)):
        raise DomainError("parameter point has non-finite entries")
    if n is not None and theta.size != n:
        raise DomainError(f"expected {n} parameters, got {theta.size}")
    return theta


def _check_domain(family: StateFamily, theta: np.ndarray) -> None:
    if family.domain is None:
        return
    for k, (lo, hi) in enumerate(family.domain):
        if not lo <= theta[k] <= hi:
            raise DomainError(
                f"theta[{k}]={theta[k]!r} outside [{lo}, {hi}] for {family.name}",
                theta=theta,
            )


def _raw(family: StateFamily, theta: np.ndarray) -> np.ndarray:
    amps = np.asarray(family.evaluator(theta), dtype=complex)
    if not np.all(np.isfinite(amps)):
        raise NumericalError("NON_FINITE", "non-finite amplitudes", theta=theta)
    return amps


def evaluate(family: StateFamily, theta) -> PureState:
    theta = as_point(theta, family.n_params)
    _check_domain(family, theta)
    amps = _raw(family, theta)
    if family.grid is not None and amps.shape[-1] < 2:
        raise ValueError("grid states need at least 2 samples")
    return PureState(amps, family.grid, "unit" if family.normalized else "unnormalized")


def _steps(family: StateFamily, theta: np.ndarray, base: float) -> np.ndarray:
    return base * np.maximum(1.0, np.abs(theta))


def _fd_first(f, theta, i, h):
    e = np.zeros_like(theta)
    e[i] = h
    return (f(theta + e) - f(theta - e)) / (2 * h)


def _fd_second(f, theta, i, j, hi, hj, f0=None):
    if i == j:
        e = np.zeros_like(theta)
        e[i] = hi
        f0 = f(theta) if f0 is None else f0
        return (f(theta + e) - 2 * f0 + f(theta - e)) / hi**2
    ei = np.zeros_like(theta)
    ej = np.zeros_like(theta)
    ei[i] = hi
    ej[j] = hj
    return (
        f(theta + ei + ej) - f(theta + ei - ej) - f(theta - ei + ej) + f(theta - ei - ej)
    ) / (4 * hi * hj)


def fd_jacobian(f, theta, h, richardson=False) -> np.ndarray:
    """Central-difference Jacobian of a vector-valued ``f``; shape ``(n, dim)``."""
    theta = np.asarray(theta, dtype=float)
    out = []
    for i in range(theta.size):
        d = _fd_first(f, theta, i, h[i])
        if richardson:
            d2 = _fd_first(f, theta, i, h[i] / 2)
            d = (4 * d2 - d) / 3
        out.append(d)
    return np.array(out)


def fd_hessian(f, theta, h, richardson=False, f0=None) -> np.ndarray:
    """Central-difference Hessian; shape ``(n, n, dim)``, symmetric by construction."""
    theta = np.asarray(theta, dtype=float)
    n = theta.size
    f0 = f(theta) if f0 is None else f0
    out = np.empty((n, n) + np.shape(f0), dtype=np.result_type(f0, float))
    for i in range(n):
        for j in range(i, n):
            d = _fd_second(f, theta, i, j, h[i], h[j], f0)
            if richardson:
                d2 = _fd_second(f, theta, i, j, h[i] / 2, h[j] / 2, f0)
                d = (4 * d2 - d) / 3
            out[i, j] = d
            out[j, i] = d
    return out


def jacobian(family: StateFamily, theta) -> np.ndarray:
    theta = as_point(theta, family.n_params)
    if family.derivative_mode == "analytic":
        return np.asarray(family.jacobian(theta), dtype=complex)
    f = lambda t: _raw(family, t)
    return fd_jacobian(
        f, theta, _steps(family, theta, family.fd_step),
        richardson=family.derivative_mode == "richardson_fd",
    )


def hessian(family: StateFamily, theta) -> np.ndarray:
    theta = as_point(theta, family.n_params)
    if family.derivative_mode == "analytic" and family.hessian is not None:
        return np.asarray(family.hessian(theta), dtype=complex)
    f = lambda t: _raw(family, t)
    richardson = family.derivative_mode == "richardson_fd"
    if family.derivative_mode == "analytic":
        # Analytic first derivatives only: difference the jacobian closure.
        h = _steps(family, theta, family.fd_step)
        jac = lambda t: np.asarray(family.jacobian(t), dtype=complex)
        d = np.array([_fd_first(jac, theta, i, h[i]) for i in range(theta.size)])
        return 0.5 * (d + np.swapaxes(d, 0, 1))
    base = SECOND_STEP if not richardson else 2 * SECOND_STEP
    return fd_hessian(f, theta, _steps(family, theta, base), richardson=richardson)


def derivative(family: StateFamily, theta, i: int) -> np.ndarray:
    """``d Psi / d theta_i``."""
    theta = as_point(theta, family.n_params)
    if not 0 <= i < family.n_params:
        raise IndexError(f"axis {i} out of range for {family.n_params} parameters")
    return jacobian(family, theta)[i]


def second_derivative(family: StateFamily, theta, i: int, j: int) -> np.ndarray:
    """``d^2 Psi / d theta_i d theta_j``."""
    theta = as_point(theta, family.n_params)
    for k in (i, j):
        if not 0 <= k < family.n_params:
            raise IndexError(f"axis {k} out of range for {family.n_params} parameters")
    return hessian(family, theta)[i, j]


@dataclass(frozen=True)
class StateJet:
    """State value with first (``d1[i]``) and second (``d2[i, j]``) derivatives."""

    value: np.ndarray
    d1: np.ndarray
    d2: Optional[np.ndarray]
    weights: np.ndarray

    @property
    def n(self) -> int:
        return self.d1.shape[0]

    def scaled(self, c: complex) -> "StateJet":
        return StateJet(c * self.value, c * self.d1,
                        None if self.d2 is None else c * self.d2, self.weights)


def state_jet(family: StateFamily, theta, order: int = 2) -> StateJet:
    theta = as_point(theta, family.n_params)
    psi = evaluate(family, theta)
    d1 = jacobian(family, theta)
    d2 = hessian(family, theta) if order >= 2 else None
    return StateJet(psi.amplitudes, d1, d2, psi.weights)


def braket(a: np.ndarray, b: np.ndarray, w: np.ndarray) -> complex:
    """Weighted Hermitian inner product over the last axis, broadcasting."""
    return np.sum(np.conj(a) * b * w, axis=-1)


def inner(bra: PureState, ket: PureState) -> complex:
    a, b = bra.amplitudes, ket.amplitudes
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if (bra.grid is None) != (ket.grid is None) or (
        bra.grid is not None and bra.grid != ket.grid
    ):
        raise ValueError("states live on different bases/grids")
    return complex(braket(a, b, bra.weights))


def check_unit_norm(amps: np.ndarray, w: np.ndarray, theta=None, tol: float = EPS_NORM) -> None:
    nrm = float(np.real(braket(amps, amps, w)))
    if abs(nrm - 1.0) > tol:
        raise NormalizationError(
            f"<Psi|Psi> = {nrm!r} deviates from 1", theta=theta, defect=abs(nrm - 1.0)
        )


def polar(state: PureState, eps_p: float = EPS_P) -> PolarForm:
    amps = np.asarray(state.amplitudes, dtype=complex)
    if not np.all(np.isfinite(amps)):
        raise NumericalError("NON_FINITE", "non-finite amplitudes")
    P = np.abs(amps) ** 2
    if not np.any(P > 0):
        raise NumericalError("ZERO_STATE", "polar form of the zero state")
    degenerate = P < eps_p
    raw = np.angle(amps)
    phi = np.zeros_like(raw)
    idx = np.flatnonzero(~degenerate)
    if idx.size:
        # Nearest-branch continuation across the non-degenerate samples.
        phi[idx] = np.unwrap(raw[idx])
    return PolarForm(P, phi, state.weights, degenerate)


def expectation(form: PolarForm, f) -> float:
    f = np.broadcast_to(np.asarray(f), form.P.shape)
    sup = form.support
    if np.any(~np.isfinite(f[sup])):
        raise NumericalError("NON_FINITE", "integrand is not finite on the support of P")
    return np.sum(np.where(sup, f, 0) * form.P * form.weights)


def log_derivatives(jet: StateJet, eps_p: float = EPS_P):
    """``L_i = d_i Psi / Psi`` and ``L_ij = d_i d_j Psi / Psi`` (zero off-support).

    In polar variables ``L_i = d_i ln P / 2 + i d_i phi`` and
    ``d_j L_i = L_ij - L_i L_j``.
    """
    psi = jet.value
    P = np.abs(psi) ** 2
    sup = P >= eps_p
    inv = np.where(sup, 1.0 / np.where(sup, psi, 1.0), 0.0)
    L1 = jet.d1 * inv
    L2 = None if jet.d2 is None else jet.d2 * inv
    return P, sup, L1, L2
