"""Built-in state families and Hamiltonians used by tests, validation and the CLI."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import expm
from scipy.special import logsumexp

from .errors import DomainError, NumericalError
from .fs import PolarJet, _phase_blocks
from .state import EPS_NORM, Grid, StateFamily, as_point
from .tensors import ConnectionField, GeometricTensor

# -- helpers ----------------------------------------------------------------------


def from_log_jet(psi, L1, L2):
    """Jacobian/Hessian of ``psi`` given ``L_i = d_i ln psi`` and ``d_i d_j ln psi``."""
    d1 = L1 * psi
    d2 = (L1[:, None, :] * L1[None, :, :] + L2) * psi
    return d1, d2


def normalized_jet(u, du, ddu, w):
    """Value and derivatives of ``u / ||u||`` from those of ``u``."""
    n = np.real(np.sum(np.conj(u) * u * w))
    dn = 2 * np.real(np.einsum("n,in,n->i", np.conj(u), du, w))
    ddn = 2 * np.real(np.einsum("jn,in,n->ij", np.conj(du), du, w)
                      + np.einsum("n,ijn,n->ij", np.conj(u), ddu, w))
    s = n ** -0.5
    ds = -0.5 * n ** -1.5 * dn
    dds = 0.75 * n ** -2.5 * np.outer(dn, dn) - 0.5 * n ** -1.5 * ddn
    psi = s * u
    d1 = s * du + ds[:, None] * u
    d2 = (s * ddu + du[:, None, :] * ds[None, :, None] + du[None, :, :] * ds[:, None, None]
          + dds[:, :, None] * u)
    return psi, d1, d2


def _cached(fn):
    """Memoize a ``theta -> (value, d1, d2)`` map on the last argument.

    The key and value are stored as one tuple so concurrent callers never
    pair a key with another point's value.
    """
    last = [None]

    def get(theta):
        key = np.asarray(theta, dtype=float).tobytes()
        hit = last[0]
        if hit is not None and hit[0] == key:
            return hit[1]
        val = fn(np.asarray(theta, dtype=float))
        last[0] = (key, val)
        return val

    return get


def _analytic_family(jet_fn, n, name, grid=None, domain=None, meta=None) -> StateFamily:
    get = _cached(jet_fn)
    return StateFamily(
        evaluator=lambda t: get(t)[0], n_params=n, grid=grid, normalized=True,
        derivative_mode="analytic", jacobian=lambda t: get(t)[1],
        hessian=lambda t: get(t)[2], domain=domain, name=name, meta=meta or {},
    )


# -- qubit ------------------------------------------------------------------------


def qubit() -> StateFamily:
    """Bloch state ``(cos(t/2), e^{i p} sin(t/2))`` with ``theta = (t, p)``."""

    def jet(theta):
        t, p = theta
        c, s, e = np.cos(t / 2), np.sin(t / 2), np.exp(1j * p)
        psi = np.array([c, e * s], dtype=complex)
        d1 = np.array([[-s / 2, e * c / 2], [0, 1j * e * s]], dtype=complex)
        d2 = np.array([
            [[-c / 4, -e * s / 4], [0, 1j * e * c / 2]],
            [[0, 1j * e * c / 2], [0, -e * s]],
        ], dtype=complex)
        return psi, d1, d2

    return _analytic_family(jet, 2, "qubit")


def constant_family(dim: int = 3, n: int = 2) -> StateFamily:
    v = np.ones(dim, dtype=complex) / np.sqrt(dim)
    return StateFamily(lambda t: v, n, derivative_mode="analytic",
                       jacobian=lambda t: np.zeros((n, dim), complex),
                       hessian=lambda t: np.zeros((n, n, dim), complex), name="constant")


# -- Gaussian families ------------------------------------------------------------

PACKET_GRID = Grid(-8.0, 8.0, 2048)
WIDE_GRID = Grid(-12.0, 12.0, 2048)


def gaussian_packet(grid: Grid = PACKET_GRID) -> StateFamily:
    """``(pi s^2)^{-1/4} exp(-(x-m)^2 / (2 s^2))`` with ``theta = (m, s)``."""
    x = grid.x

    def jet(theta):
        m, s = theta
        y = x - m
        psi = (np.pi * s * s) ** -0.25 * np.exp(-y * y / (2 * s * s))
        L1 = np.array([y / s**2, -0.5 / s + y * y / s**3])
        L2 = np.array([[np.full_like(x, -1 / s**2), -2 * y / s**3],
                       [-2 * y / s**3, 0.5 / s**2 - 3 * y * y / s**4]])
        return (psi.astype(complex),) + from_log_jet(psi.astype(complex), L1, L2)

    return _analytic_family(jet, 2, "gaussian", grid, [(-np.inf, np.inf), (1e-3, np.inf)])


def boosted_gaussian(sigma: float = 1.0, grid: Grid = WIDE_GRID) -> StateFamily:
    """``sqrt(N(x; m, sigma^2)) e^{i k x}`` with ``theta = (m, k)``."""
    x = grid.x

    def jet(theta):
        m, k = theta
        y = x - m
        psi = (2 * np.pi * sigma**2) ** -0.25 * np.exp(-y * y / (4 * sigma**2) + 1j * k * x)
        L1 = np.array([y / (2 * sigma**2), 1j * x])
        L2 = np.zeros((2, 2, x.size), dtype=complex)
        L2[0, 0] = -1 / (2 * sigma**2)
        return (psi,) + from_log_jet(psi, L1, L2)

    return _analytic_family(jet, 2, "boosted_gaussian", grid)


def gaussian_amplitude(grid: Grid = WIDE_GRID) -> StateFamily:
    """Real amplitude ``sqrt(N(x; m, s^2))``; its density is the Gaussian model."""
    base = gaussian_packet(grid)

    def jet(theta):
        m, s = theta
        # sqrt N(m, s^2) is a packet of width s*sqrt(2).
        r = np.sqrt(2.0)
        psi, d1, d2 = base.evaluator(np.array([m, s * r])), base.jacobian(np.array([m, s * r])), \
            base.hessian(np.array([m, s * r]))
        scale = np.array([1.0, r])
        return psi, d1 * scale[:, None], d2 * np.outer(scale, scale)[:, :, None]

    return _analytic_family(jet, 2, "gaussian_amplitude", grid,
                            [(-np.inf, np.inf), (1e-3, np.inf)])


# -- random analytic finite-dimensional families ----------------------------------


def random_analytic(dim: int, n: int, seed: int = 0, scale: float = 0.5) -> StateFamily:
    """Normalized ``u_m = exp(c_m + b_m . theta + theta^T Q_m theta)`` (complex coefficients)."""
    rng = np.random.default_rng(seed)
    cplx = lambda *s: (rng.normal(size=s) + 1j * rng.normal(size=s)) * scale
    c = cplx(dim)
    b = cplx(dim, n)
    Q = cplx(dim, n, n)
    Q = 0.5 * (Q + np.swapaxes(Q, 1, 2))
    w = np.ones(dim)

    def jet(theta):
        lin = b + 2 * np.einsum("mij,j->mi", Q, theta)       # d_i of exponent, [m, i]
        u = np.exp(c + b @ theta + np.einsum("i,mij,j->m", theta, Q, theta))
        du = (lin * u[:, None]).T
        ddu = ((lin[:, :, None] * lin[:, None, :] + 2 * Q) * u[:, None, None]).transpose(1, 2, 0)
        return normalized_jet(u, du, ddu, w)

    return _analytic_family(jet, n, f"random{dim}x{n}", meta={"seed": seed})


def real_random_analytic(dim: int, n: int, seed: int = 0) -> StateFamily:
    """Real-valued analytic family (trivial phase)."""
    rng = np.random.default_rng(seed)
    c = rng.normal(size=dim) * 0.5
    b = rng.normal(size=(dim, n)) * 0.5
    w = np.ones(dim)

    def jet(theta):
        u = np.exp(c + b @ theta).astype(complex)
        du = (b * u[:, None]).T
        ddu = (b[:, :, None] * b[:, None, :] * u[:, None, None]).transpose(1, 2, 0)
        return normalized_jet(u, du, ddu, w)

    return _analytic_family(jet, n, f"real_random{dim}x{n}", meta={"seed": seed})


# -- exponential family -----------------------------------------------------------


@dataclass(frozen=True)
class ExponentialFamilySpec:
    """``Psi = exp((C + sum_j theta_j (F_j + i G_j) - psi(theta)) / 2)`` on a grid."""

    grid: Grid
    C: np.ndarray
    F: np.ndarray            # (n, points)
    G: np.ndarray            # (n, points)
    domain: Optional[Sequence[tuple]] = None

    def __post_init__(self):
        F = np.atleast_2d(self.F)
        G = np.atleast_2d(self.G)
        if F.shape != G.shape or F.shape[1] != self.grid.points or self.C.shape != (self.grid.points,):
            raise ValueError("C, F, G must be sampled on the grid with matching shapes")
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "G", G)
        w = self.grid.weights()
        basis = np.vstack([np.ones(self.grid.points), F])
        basis = basis / np.sqrt(np.sum(basis**2 * w, axis=1, keepdims=True))
        gram = (basis * w) @ basis.T
        if np.min(np.linalg.eigvalsh(gram)) <= 1e-10:
            raise ValueError("sufficient statistics {1, F_j} are numerically dependent")

    @property
    def n(self) -> int:
        return self.F.shape[0]


def default_exponential_spec() -> ExponentialFamilySpec:
    grid = Grid(-10.0, 10.0, 2001)
    x = grid.x
    return ExponentialFamilySpec(
        grid, -x**2, np.array([x, x**2]), np.array([0.5 * x**2, np.sin(x)]),
        domain=[(-np.inf, np.inf), (-np.inf, 0.5)],
    )


def _exponent(spec: ExponentialFamilySpec, theta) -> np.ndarray:
    return spec.C + theta @ spec.F


def exp_family_normalizer(spec: ExponentialFamilySpec, theta) -> float:
    """``psi(theta) = ln int exp(C + theta . F) dx`` via a max-shifted log-sum-exp."""
    theta = as_point(theta, spec.n)
    e = _exponent(spec, theta)
    if not np.all(np.isfinite(e)):
        raise NumericalError("NON_FINITE", "non-finite exponent", theta=theta)
    return float(logsumexp(e, b=spec.grid.weights()))


def _density(spec, theta):
    psi = exp_family_normalizer(spec, theta)
    return np.exp(_exponent(spec, theta) - psi), psi


def exp_family_moments(spec: ExponentialFamilySpec, theta):
    """``(d psi, dd psi)`` as mean and covariance of ``F`` under ``P``."""
    P, _ = _density(spec, as_point(theta, spec.n))
    w = spec.grid.weights()
    mean = spec.F @ (P * w)
    cov = (spec.F * P * w) @ spec.F.T - np.outer(mean, mean)
    return mean, cov


def exponential_family(spec: Optional[ExponentialFamilySpec] = None) -> StateFamily:
    spec = default_exponential_spec() if spec is None else spec
    w = spec.grid.weights()

    def jet(theta):
        P, psi_val = _density(spec, theta)
        amp = np.exp(0.5 * (_exponent(spec, theta) - psi_val) + 0.5j * (theta @ spec.G))
        mean = spec.F @ (P * w)
        cov = (spec.F * P * w) @ spec.F.T - np.outer(mean, mean)
        L1 = 0.5 * (spec.F + 1j * spec.G - mean[:, None])
        L2 = np.broadcast_to(-0.5 * cov[:, :, None], (spec.n, spec.n, P.size)).astype(complex)
        return (amp,) + from_log_jet(amp, L1, L2)

    return _analytic_family(jet, spec.n, "exponential", spec.grid, spec.domain, {"spec": spec})


@dataclass(frozen=True)
class ExponentialClosedForms:
    g: np.ndarray
    omega: np.ndarray
    gamma_c: ConnectionField
    S: np.ndarray

    def nonmetricity(self, alpha: float) -> ConnectionField:
        return ConnectionField(-0.5 * alpha * self.S)

    def alpha_connection(self, alpha: float) -> ConnectionField:
        return self.gamma_c + self.nonmetricity(alpha)


def exp_family_closed_forms(spec: ExponentialFamilySpec, theta) -> ExponentialClosedForms:
    """Metric, Berry coefficient, metric connection and non-metricity in closed form.

    Uses ``A_i = F_i - d_i psi``, ``d_i phi = G_i / 2``, ``d_ij ln P = -dd psi``
    and ``d_ij phi = 0``; no state derivatives are taken.
    """
    theta = as_point(theta, spec.n)
    P, _ = _density(spec, theta)
    w = spec.grid.weights()
    E = lambda f: np.sum(f * P * w, axis=-1)
    dpsi, ddpsi = exp_family_moments(spec, theta)
    A = spec.F - dpsi[:, None]
    G = spec.G
    mG = E(G)
    covG = E(G[:, None] * G[None, :]) - np.outer(mG, mG)
    g = 0.25 * (ddpsi + covG)
    FG = E(spec.F[:, None] * G[None, :])
    omega = 0.25 * (FG - FG.T - np.outer(dpsi, mG) + np.outer(mG, dpsi))
    m = P.size
    pj = PolarJet(P, w, np.ones(m, bool), A, 0.5 * G,
                  np.broadcast_to(-ddpsi[:, :, None], (spec.n, spec.n, m)),
                  np.zeros((spec.n, spec.n, m)))
    K, S = _phase_blocks(pj)
    return ExponentialClosedForms(g, omega, ConnectionField(K + 0.5 * S), S)


# -- commuting-generator families -------------------------------------------------


@dataclass(frozen=True)
class GeneratorFamilySpec:
    """States ``l_1(s) = exp(i s.A_1) l0_1`` and ``l_2(s) = exp(i s.A_2) l0_2``."""

    A1: tuple
    A2: tuple
    l0_1: np.ndarray
    l0_2: np.ndarray
    variant: str = "hermitian"

    def __post_init__(self):
        if self.variant not in ("hermitian", "biortho_pair"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if len(self.A1) != len(self.A2):
            raise ValueError("need one generator per axis on each side")
        pair = complex(np.vdot(self.l0_1, self.l0_2))
        if abs(pair - 1) > EPS_NORM:
            raise ValueError(f"reference pairing <l0_1|l0_2> = {pair} is not 1")

    @property
    def n(self) -> int:
        return len(self.A1)


def _commutator_norm(ops) -> float:
    return max((np.linalg.norm(a @ b - b @ a) for a in ops for b in ops), default=0.0)


def hermitian_generator_spec(dim: int, n: int, seed: int = 0) -> GeneratorFamilySpec:
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    U, _ = np.linalg.qr(X)
    A = tuple(U @ np.diag(rng.normal(size=dim)) @ U.conj().T for _ in range(n))
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    v = v / np.linalg.norm(v)
    return GeneratorFamilySpec(A, A, v, v, "hermitian")


def biortho_generator_spec(dim: int, n: int, seed: int = 0) -> GeneratorFamilySpec:
    """Commuting non-Hermitian ``A_1`` with ``A_2 = A_1^dagger`` (pairing preserved)."""
    rng = np.random.default_rng(seed)
    V = np.eye(dim) + 0.4 * (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
    Vi = np.linalg.inv(V)
    A1 = tuple(V @ np.diag(rng.normal(size=dim) + 0.3j * rng.normal(size=dim)) @ Vi
               for _ in range(n))
    A2 = tuple(a.conj().T for a in A1)
    u = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    v = v / np.conj(np.vdot(v, u))       # enforce <u|v> = 1
    return GeneratorFamilySpec(A1, A2, u, v, "biortho_pair")


def generator_families(spec: GeneratorFamilySpec):
    """Analytic ``(l_1, l_2)`` families of the generator spec."""

    def side(A, l0, name):
        A = [np.asarray(a) for a in A]

        def jet(s):
            U = expm(1j * sum(si * a for si, a in zip(s, A)))
            v = U @ l0
            d1 = np.array([1j * a @ v for a in A])
            d2 = np.array([[-(a @ b @ v) for b in A] for a in A])
            return v, d1, d2

        get = _cached(jet)
        return StateFamily(lambda t: get(t)[0], len(A), normalized=spec.variant == "hermitian",
                           derivative_mode="analytic", jacobian=lambda t: get(t)[1],
                           hessian=lambda t: get(t)[2], name=name)

    return side(spec.A1, spec.l0_1, "generator_l1"), side(spec.A2, spec.l0_2, "generator_l2")


def commuting_generator_tensor(spec: GeneratorFamilySpec, s) -> GeometricTensor:
    """Tensor from generator moments, ``<A_1^i dag A_2^j> - <A_1^i dag><A_2^j>``."""
    s = as_point(s, spec.n)
    if max(_commutator_norm(spec.A1), _commutator_norm(spec.A2)) > 1e-10:
        raise DomainError("generators do not commute", theta=s)
    defect = biortho_pairing(spec, s) - 1
    if abs(defect) > EPS_NORM:
        raise NumericalError("NORMALIZATION_VIOLATION", "pairing not preserved",
                             theta=s, defect=abs(defect))
    l1f, l2f = generator_families(spec)
    l1, l2 = l1f.evaluator(s), l2f.evaluator(s)
    ex = lambda X: np.vdot(l1, X @ l2)
    n = spec.n
    M = np.empty((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            Ai = spec.A1[i].conj().T
            M[i, j] = ex(Ai @ spec.A2[j]) - ex(Ai) * ex(spec.A2[j])
    return GeometricTensor(M)


def biortho_pairing(spec: GeneratorFamilySpec, s) -> complex:
    l1f, l2f = generator_families(spec)
    return complex(np.vdot(l1f.evaluator(s), l2f.evaluator(s)))


def biortho_preservation_defect(spec: GeneratorFamilySpec, s: float) -> float:
    """``|f'(s)|`` for ``f(s) = <l_1(s)|l_2(s)>`` with a single evolution parameter.

    ``f'(s) = i u^dag Z(s)`` with ``Z = M (A_2 - M^{-1} A_1^dag M) v`` and
    ``M = exp(-i s A_1^dag) exp(i s A_2)``.
    """
    if spec.n != 1:
        raise DomainError("preservation defect needs a single evolution parameter")
    A1, A2 = spec.A1[0], spec.A2[0]
    M = expm(-1j * s * A1.conj().T) @ expm(1j * s * A2)
    if np.linalg.cond(M) > 1e12:
        raise NumericalError("SINGULAR", "evolution overlap operator is singular", theta=[s])
    Z = M @ (A2 - np.linalg.solve(M, A1.conj().T @ M)) @ spec.l0_2
    return float(abs(np.vdot(spec.l0_1, Z)))


# -- non-Hermitian Hamiltonians ---------------------------------------------------


def pt_two_level(theta) -> np.ndarray:
    """``[[i gamma, g], [g, -i gamma]]`` with ``theta = (gamma, g)``."""
    gamma, g = as_point(theta, 2)
    return np.array([[1j * gamma, g], [g, -1j * gamma]])


def pt_eigenvalues(theta) -> np.ndarray:
    gamma, g = as_point(theta, 2)
    lam = np.sqrt(complex(g * g - gamma * gamma))
    return np.array([-lam, lam])


def pt_twisted(theta, kappa: float = 0.3) -> np.ndarray:
    """``[[i gamma, g e^{-i phi}], [g e^{i phi} + kappa gamma, -i gamma]]``, ``theta = (gamma, g, phi)``.

    The asymmetric coupling makes the eigenvalues complex and gives the LR
    tensor a non-zero imaginary-symmetric part.
    """
    gamma, g, phi = as_point(theta, 3)
    return np.array([[1j * gamma, g * np.exp(-1j * phi)],
                     [g * np.exp(1j * phi) + kappa * gamma, -1j * gamma]])


def hermitian_two_level(theta) -> np.ndarray:
    """Real-symmetric ``[[a, b], [b, -a]]``."""
    a, b = as_point(theta, 2)
    return np.array([[a, b], [b, -a]], dtype=complex)


def associated_pair(seed: int = 0, dim: int = 2):
    """``(S, H0)`` with ``H0`` Hermitian and ``S`` invertible, for ``H = S H0 S^{-1}``."""
    rng = np.random.default_rng(seed)
    S = np.eye(dim) + 0.3 * (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
    X = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return S, 0.5 * (X + X.conj().T)


def associated_families(S: np.ndarray, base: Optional[StateFamily] = None):
    """``(L, R) = (S^{-dag} V, S V)`` over a unit-norm analytic family ``V``.

    The pairing ``<L|R> = <V|V> = 1`` holds for every ``theta`` and
    ``H = S H0 S^{-1}`` with Hermitian ``H0`` is biorthogonal-Hermitian.
    """
    base = qubit() if base is None else base
    S = np.asarray(S, dtype=complex)
    Sl = np.linalg.inv(S).conj().T

    def side(M, tag):
        return StateFamily(lambda t: M @ base.evaluator(t), base.n_params, normalized=False,
                           derivative_mode="analytic",
                           jacobian=lambda t: base.jacobian(t) @ M.T,
                           hessian=lambda t: base.hessian(t) @ M.T, name=f"associated.{tag}")

    return side(Sl, "left"), side(S, "right")


# -- registry ---------------------------------------------------------------------


@dataclass(frozen=True)
class ModelEntry:
    name: str
    kind: str            # "state" or "hamiltonian"
    n_params: int
    default: tuple
    build: Callable
    description: str
    domain: Optional[Sequence[tuple]] = None


REGISTRY = {
    e.name: e for e in [
        ModelEntry("qubit", "state", 2, (np.pi / 3, 0.4), qubit, "Bloch state (theta, phi)"),
        ModelEntry("gaussian", "state", 2, (0.0, 1.0), gaussian_packet,
                   "real Gaussian packet (mu, sigma) on a grid"),
        ModelEntry("boosted_gaussian", "state", 2, (0.0, 0.0), boosted_gaussian,
                   "sqrt N(mu, 1) times exp(i k x), (mu, k)"),
        ModelEntry("exponential", "state", 2, (0.3, -0.2), exponential_family,
                   "exponential-family wavefunction with F=(x, x^2), G=(x^2/2, sin x)"),
        ModelEntry("random3", "state", 2, (0.1, -0.2), lambda: random_analytic(3, 2, seed=3),
                   "random analytic 3-level family"),
        ModelEntry("random4", "state", 2, (0.2, 0.1), lambda: random_analytic(4, 2, seed=4),
                   "random analytic 4-level family"),
        ModelEntry("pt_two_level", "hamiltonian", 2, (0.6, 1.0), lambda: pt_two_level,
                   "PT-symmetric [[i gamma, g], [g, -i gamma]], (gamma, g)"),
        ModelEntry("pt_twisted", "hamiltonian", 3, (0.4, 1.0, 0.7), lambda: pt_twisted,
                   "two-level with gain/loss, coupling phase and asymmetric coupling, (gamma, g, phi)"),
        ModelEntry("hermitian_two_level", "hamiltonian", 2, (0.3, 0.8),
                   lambda: hermitian_two_level, "real-symmetric [[a, b], [b, -a]]"),
    ]
}


def get_model(name: str) -> ModelEntry:
    try:
        return REGISTRY[name]
    except KeyError:
        raise DomainError(f"unknown model {name!r}; choose from {sorted(REGISTRY)}") from None
