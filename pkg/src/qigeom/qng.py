"""Natural-gradient optimisation on state manifolds."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import List, NamedTuple, Optional

import numpy as np
import scipy.linalg

from .biortho import _bra_ket, nh_fs_tensor
from .errors import DomainError, NumericalError
from .fs import fs_tensor
from .state import StateFamily, as_point, state_jet

COST_KINDS = ("hermitian_expectation", "biortho_expectation", "rr_variance")

CONVERGED = "CONVERGED"
MAX_ITERS = "MAX_ITERS"
LOCAL_MINIMUM = "LOCAL_MINIMUM"
ZERO_ITERS = "ZERO_ITERS"


@dataclass(frozen=True)
class CostSpec:
    """Operator cost on a state family."""

    operator: np.ndarray
    kind: str = "hermitian_expectation"

    def __post_init__(self):
        op = np.asarray(self.operator, dtype=complex)
        if op.ndim != 2 or op.shape[0] != op.shape[1]:
            raise DomainError("cost operator must be a square matrix")
        if self.kind not in COST_KINDS:
            raise DomainError(f"unknown cost kind {self.kind!r}; choose from {COST_KINDS}")
        if self.kind == "hermitian_expectation" and np.max(np.abs(op - op.conj().T)) > 1e-12:
            raise DomainError("hermitian_expectation needs a Hermitian operator")
        object.__setattr__(self, "operator", op)


@dataclass(frozen=True)
class OptimizerState:
    """Step sizes, pseudo-inverse cutoff and iteration budget."""

    theta: np.ndarray
    eta: float = 0.1
    eta_r: Optional[float] = None
    eta_i: Optional[float] = None
    svd_cutoff: float = 1e-10
    max_iters: int = 200
    grad_tol: float = 1e-10
    cost_tol: float = 1e-12

    def __post_init__(self):
        object.__setattr__(self, "theta", as_point(self.theta))
        for name in ("eta", "eta_r", "eta_i"):
            v = getattr(self, name)
            if v is not None and not v >= 0:
                raise DomainError(f"{name} must be non-negative")
        if not 0 < self.svd_cutoff < 1:
            raise DomainError("svd_cutoff must lie in (0, 1)")
        if self.max_iters < 0:
            raise DomainError("max_iters must be non-negative")

    @property
    def rates(self) -> tuple:
        er = self.eta if self.eta_r is None else self.eta_r
        ei = self.eta if self.eta_i is None else self.eta_i
        return er, ei


@dataclass(frozen=True)
class StepRecord:
    theta: np.ndarray
    cost: complex
    grad_norm: float
    condition: float
    incompatibility: float = 0.0


@dataclass
class OptimizerTrace:
    records: List[StepRecord] = field(default_factory=list)
    termination: str = ""
    extra: dict = field(default_factory=dict)

    def append(self, rec: StepRecord) -> None:
        self.records.append(rec)

    @property
    def final(self) -> StepRecord:
        if not self.records:
            raise IndexError("empty trace")
        return self.records[-1]

    @property
    def thetas(self) -> np.ndarray:
        return np.array([r.theta for r in self.records])

    @property
    def costs(self) -> np.ndarray:
        return np.array([r.cost for r in self.records])


# -- linear algebra -----------------------------------------------------------------


@dataclass(frozen=True)
class PinvSolve:
    x: np.ndarray
    condition: float
    rank: int


def pinv_solve(M: np.ndarray, b: np.ndarray, cutoff: float = 1e-10, label: str = "metric") -> PinvSolve:
    """Minimum-norm solution of ``M x = b`` by SVD with relative cutoff.

    Singular values below ``cutoff * s_max`` are dropped. A matrix whose
    largest singular value is itself below ``cutoff`` counts as zero.
    """
    M = np.asarray(M, dtype=float)
    U, s, Vt = np.linalg.svd(M)
    smax = s[0] if s.size else 0.0
    if smax < cutoff:
        raise NumericalError("SINGULAR_METRIC", f"{label} is numerically zero",
                             subproblem=label, smax=float(smax))
    keep = s > cutoff * smax
    x = Vt[keep].T @ ((U[:, keep].T @ b) / s[keep])
    cond = float(smax / s[keep][-1])
    return PinvSolve(x, cond, int(keep.sum()))


# -- Hermitian QNG ------------------------------------------------------------------


def _expectation_and_grad(family: StateFamily, A: np.ndarray, theta):
    jet = state_jet(family, theta, order=1)
    w = jet.weights
    Apsi = A @ jet.value
    val = np.sum(np.conj(jet.value) * Apsi * w)
    # d_i <psi|A|psi> = <d_i psi|A|psi> + <psi|A|d_i psi>
    left = np.sum(np.conj(jet.d1) * Apsi * w, axis=1)
    right = np.sum(np.conj(jet.value) * (jet.d1 @ A.T) * w, axis=1)
    return complex(val), left + right


def hermitian_cost(family: StateFamily, cost: CostSpec, theta) -> tuple:
    """``(L, grad L)`` for ``L = <psi|H|psi>``."""
    val, grad = _expectation_and_grad(family, cost.operator, as_point(theta, family.n_params))
    return float(val.real), grad.real


def qng_step_hermitian(family: StateFamily, cost: CostSpec, state: OptimizerState):
    """One natural-gradient step ``g dtheta = -eta grad L``.

    Returns ``(dtheta, diagnostics)``; diagnostics hold the cost, gradient
    norm, metric condition number and retained rank.
    """
    if cost.kind != "hermitian_expectation":
        raise DomainError("qng_step_hermitian needs a hermitian_expectation cost")
    if not family.normalized:
        raise DomainError("Hermitian natural gradient needs a unit-norm family")
    theta = as_point(state.theta, family.n_params)
    L, grad = hermitian_cost(family, cost, theta)
    g = fs_tensor(family, theta).g
    sol = pinv_solve(g, -state.eta * grad, state.svd_cutoff)
    diag = {"cost": L, "grad_norm": float(np.linalg.norm(grad)), "condition": sol.condition,
            "rank": sol.rank, "grad": grad, "metric": g}
    return sol.x, diag


def qng_optimize(family: StateFamily, cost: CostSpec, state: OptimizerState) -> OptimizerTrace:
    """Iterate :func:`qng_step_hermitian` until the gradient vanishes or the budget ends."""
    trace = OptimizerTrace()
    theta = as_point(state.theta, family.n_params)
    if state.max_iters == 0:
        trace.termination = ZERO_ITERS
        return trace
    for _ in range(state.max_iters + 1):
        step, d = qng_step_hermitian(family, cost, replace(state, theta=theta))
        trace.append(StepRecord(theta.copy(), complex(d["cost"]), d["grad_norm"], d["condition"]))
        if d["grad_norm"] < state.grad_tol:
            trace.termination = CONVERGED
            return trace
        if len(trace.records) > state.max_iters:
            break
        theta = theta + step
    trace.termination = MAX_ITERS
    return trace


# -- dual real/imaginary scheme ----------------------------------------------------


class DualStep(NamedTuple):
    delta_r: np.ndarray
    delta_i: np.ndarray
    incompatibility: float
    diagnostics: dict


def biortho_cost(left: StateFamily, right: StateFamily, A: np.ndarray, theta, kind: str = "LR"):
    """``(L, grad L)`` for the complex ``L = <bra|A|ket>`` of the chosen kind."""
    bra, ket = _bra_ket(left, right, theta, kind, order=1)
    w = ket.weights
    Aket = A @ ket.value
    val = np.sum(np.conj(bra.value) * Aket * w)
    grad = (np.sum(np.conj(bra.d1) * Aket * w, axis=1)
            + np.sum(np.conj(bra.value) * (ket.d1 @ A.T) * w, axis=1))
    return complex(val), grad


def step_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Angle between two steps in radians; 0 when either vanishes."""
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.arccos(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0)))


def _solve_part(M, grad, eta, cutoff, label):
    if eta == 0 or not np.any(grad):
        return np.zeros_like(grad), np.nan
    sol = pinv_solve(M, -eta * grad, cutoff, label)
    return sol.x, sol.condition


def qng_step_nh_dual(left: StateFamily, right: StateFamily, cost: CostSpec,
                     state: OptimizerState, kind: str = "LR") -> DualStep:
    """Separate steps for the real and imaginary parts of a biorthogonal cost.

    ``g dtheta_R = -eta_R d Re L`` and ``g_tilde dtheta_I = -eta_I d Im L``
    with ``g``/``g_tilde`` the real-symmetric and imaginary-symmetric
    coefficients of the kind's tensor. The two steps are never merged.
    """
    if cost.kind != "biortho_expectation":
        raise DomainError("qng_step_nh_dual needs a biortho_expectation cost")
    theta = as_point(state.theta, right.n_params)
    val, grad = biortho_cost(left, right, cost.operator, theta, kind)
    T = nh_fs_tensor(left, right, theta, kind)
    eta_r, eta_i = state.rates
    gr, gi = grad.real, grad.imag
    # Hermitian-limit noise: treat a gradient at round-off level as exactly zero.
    scale = max(1.0, float(np.max(np.abs(grad))))
    gi = np.where(np.abs(gi) < 1e-13 * scale, 0.0, gi)
    dr, cr = _solve_part(T.g, gr, eta_r, state.svd_cutoff, "real")
    di, ci = _solve_part(T.g_tilde, gi, eta_i, state.svd_cutoff, "imaginary")
    diag = {"cost": val, "grad_norm": float(np.linalg.norm(grad)),
            "condition_r": cr, "condition_i": ci}
    return DualStep(dr, di, step_angle(dr, di), diag)


# -- RR variational eigensolver -----------------------------------------------------


def rr_cost(family: StateFamily, H: np.ndarray, theta):
    """``(L, grad L, E)`` for ``L = <psi|(H^dag - conj E)(H - E)|psi>``, ``E = <psi|H|psi>``.

    ``E`` is stationary for ``L`` at the Rayleigh value, so the gradient is
    taken at fixed ``E``.
    """
    H = np.asarray(H, dtype=complex)
    theta = as_point(theta, family.n_params)
    E, _ = _expectation_and_grad(family, H, theta)
    n = H.shape[0]
    Hrr = (H.conj().T - np.conj(E) * np.eye(n)) @ (H - E * np.eye(n))
    L, grad = _expectation_and_grad(family, Hrr, theta)
    return max(L.real, 0.0), grad.real, E


def rr_variational_eigensolver(right: StateFamily, H, theta0, state: OptimizerState) -> OptimizerTrace:
    """Natural-gradient minimisation of the RR variance cost.

    Converges when ``L < state.cost_tol``, which certifies a right
    eigenvector; a vanishing gradient above that level ends the run with
    ``LOCAL_MINIMUM``.
    """
    if not right.normalized:
        raise DomainError("RR eigensolver needs a pointwise unit-normalized family")
    H = np.asarray(H, dtype=complex)
    theta = as_point(theta0, right.n_params)
    trace = OptimizerTrace()
    if state.max_iters == 0:
        trace.termination = ZERO_ITERS
        return trace
    for it in range(state.max_iters + 1):
        L, grad, E = rr_cost(right, H, theta)
        gn = float(np.linalg.norm(grad))
        if L < state.cost_tol:
            trace.append(StepRecord(theta.copy(), complex(L), gn, np.nan))
            trace.termination = CONVERGED
            break
        g = fs_tensor(right, theta).g
        if gn < state.grad_tol:
            trace.append(StepRecord(theta.copy(), complex(L), gn, np.nan))
            trace.termination = LOCAL_MINIMUM
            break
        sol = pinv_solve(g, -state.eta * grad, state.svd_cutoff)
        trace.append(StepRecord(theta.copy(), complex(L), gn, sol.condition))
        if it == state.max_iters:
            trace.termination = MAX_ITERS
            break
        theta = theta + sol.x
    trace.extra["energy"] = complex(E)
    return trace


# -- imaginary-time comparator -----------------------------------------------------


@dataclass(frozen=True)
class ComparatorReport:
    dtau: float
    steps: int
    ite_thetas: np.ndarray
    qng_thetas: np.ndarray
    local_deviation: np.ndarray       # one-step deviation from the shared ITE point
    trajectory_deviation: np.ndarray  # |theta_ITE(t) - theta_QNG(t)|

    @property
    def max_local(self) -> float:
        return float(np.max(self.local_deviation)) if self.steps else 0.0


def _ite_projected_step(left, right, H, theta, dtau, cutoff):
    """Project ``e^{-H dtau}`` applied to the right state back onto the family.

    Both states are evolved (``e^{-H dtau}`` and ``e^{-H^dag dtau}``) and
    rescaled so that their pairing is one; the displacement of the right state
    is then projected with the LR normal equations.
    """
    bra, ket = _bra_ket(left, right, theta, "LR", order=1)
    w = ket.weights
    U = scipy.linalg.expm(-dtau * H)
    R1 = U @ ket.value
    L1 = scipy.linalg.expm(-dtau * H.conj().T) @ bra.value
    pair = np.sum(np.conj(L1) * R1 * w)
    if abs(pair) < 1e-300:
        raise NumericalError("NORMALIZATION_VIOLATION", "evolved pairing vanishes", theta=theta)
    R1 = R1 / np.sqrt(pair)
    delta = R1 - ket.value
    rhs = (np.sum(np.conj(bra.d1) * delta * w, axis=1)
           - np.sum(np.conj(bra.d1) * ket.value * w, axis=1) * np.sum(np.conj(bra.value) * delta * w))
    g = nh_fs_tensor(left, right, theta, "LR").g
    try:
        return pinv_solve(g, rhs.real, cutoff, "projection").x
    except NumericalError as exc:
        raise NumericalError("SINGULAR_METRIC", "projection system is singular", theta=theta) from exc


def _qng_lr_step(left, right, H, theta, eta, cutoff):
    _, grad = biortho_cost(left, right, H, theta, "LR")
    g = nh_fs_tensor(left, right, theta, "LR").g
    return pinv_solve(g, -eta * grad.real, cutoff, "metric").x


def imaginary_time_comparator(left: StateFamily, right: StateFamily, H, theta0, dtau: float,
                              steps: int, cutoff: float = 1e-10) -> ComparatorReport:
    """Projected imaginary-time flow against natural gradient on ``Re <L|H|R>``.

    The projected flow moves by ``-(dtau/2) g^+ grad`` at first order, so the
    natural-gradient trajectory uses ``eta = dtau / 2``.
    """
    if dtau <= 0:
        raise DomainError("dtau must be positive")
    H = np.asarray(H, dtype=complex)
    eta = 0.5 * dtau
    a = b = as_point(theta0, right.n_params)
    ite, qng, local, traj = [a.copy()], [b.copy()], [], []
    for _ in range(steps):
        step_ite = _ite_projected_step(left, right, H, a, dtau, cutoff)
        local.append(float(np.linalg.norm(step_ite - _qng_lr_step(left, right, H, a, eta, cutoff))))
        a = a + step_ite
        b = b + _qng_lr_step(left, right, H, b, eta, cutoff)
        ite.append(a.copy())
        qng.append(b.copy())
        traj.append(float(np.linalg.norm(a - b)))
    return ComparatorReport(dtau, steps, np.array(ite), np.array(qng), np.array(local), np.array(traj))


def comparator_order(left, right, H, theta0, dtau: float, steps: int = 5) -> float:
    """Observed order of the one-step deviation from halving ``dtau``."""
    d1 = imaginary_time_comparator(left, right, H, theta0, dtau, steps).local_deviation[0]
    d2 = imaginary_time_comparator(left, right, H, theta0, dtau / 2, steps).local_deviation[0]
    if d1 == 0 or d2 == 0:
        return np.inf
    return float(np.log2(d1 / d2))
