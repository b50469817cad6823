"""Named residual checks over the built-in families.

Each check returns a scalar. ``upper`` checks pass when the value is at most
``tol * tol_scale``; ``lower`` checks pass when it is at least ``tol`` and are
not rescaled.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from . import alpha as A
from . import biortho as B
from . import classical as C
from . import fs
from . import models as M
from . import qng as Q
from .errors import ExceptionalPointError, GeometryError

ALPHAS = (-0.6, -0.3, 0.3, 0.6)
CLASSICAL_ALPHAS = tuple(np.round(np.arange(-0.9, 0.91, 0.3), 10))


@dataclass(frozen=True)
class Check:
    name: str
    tol: float
    run: Callable[[], float]
    mode: str = "analytic"          # "analytic" or "fd" (error floor set by differencing)
    bound: str = "upper"
    description: str = ""


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    tol: float
    bound: str
    passed: bool
    error: Optional[str] = None


def _max(values) -> float:
    return float(max(values))


# -- individual checks ----------------------------------------------------------


def _fr_gaussian():
    fam = C.gaussian_density()
    return _max(np.max(np.abs(C.fisher_rao(fam, [m, s]) - np.diag([1, 2]) / s**2))
                for m, s in [(0.0, 1.0), (0.7, 1.6), (-1.0, 0.8)])


def _classical_duality():
    fams = [(C.gaussian_density(), [0.3, 1.2]), (C.bernoulli(), [0.3]), (C.bernoulli(), [0.75])]
    return _max(C.classical_duality_residual(f, t, a) for f, t in fams for a in CLASSICAL_ALPHAS)


def _qubit_metric():
    q = M.qubit()
    return _max(np.max(np.abs(fs.fs_tensor(q, [t, 0.4]).g - np.diag([0.25, np.sin(t) ** 2 / 4])))
                for t in np.linspace(0.2, 2.9, 7))


def _qubit_curvature():
    q = M.qubit()
    return _max(abs(fs.berry_curvature(q, [t, 0.4])[0, 1] + 0.5 * np.sin(t))
                for t in np.linspace(0.2, 2.9, 7))


def _curvature_curl():
    fams = [(M.qubit(), [1.1, 0.4]), (M.random_analytic(3, 2, 3), [0.1, -0.2])]
    return _max(np.max(np.abs(fs.berry_curvature(f, t) - fs.berry_curvature_curl(f, t)))
                for f, t in fams)


def _gauge_invariance():
    out = []
    rng = np.random.default_rng(11)
    for fam, t in [(M.random_analytic(3, 2, 3), [0.1, -0.2]), (M.qubit(), [1.1, 0.4])]:
        for _ in range(3):
            ph = fs.PolynomialPhase.random(fam.n_params, rng)
            gf = fs.gauge_transformed(fam, ph)
            out.append(np.max(np.abs(fs.fs_tensor(gf, t).matrix - fs.fs_tensor(fam, t).matrix)))
            out.append(np.max(np.abs(fs.metric_connection(gf, t).coeffs
                                     - fs.metric_connection(fam, t).coeffs)))
    return _max(out)


def _fs_vs_fisher():
    amp, dens = M.gaussian_amplitude(), C.gaussian_density()
    out = [np.max(np.abs(fs.fs_tensor(amp, t).g - 0.25 * C.fisher_rao(dens, t)))
           for t in ([0.0, 1.0], [0.4, 1.3])]
    fam = M.real_random_analytic(4, 2, seed=5)
    for t in ([0.1, 0.2], [-0.3, 0.5]):
        psi = fam.evaluator(np.array(t))
        d = fam.jacobian(np.array(t)).real
        P = psi.real ** 2
        dl = 2 * d / psi.real
        out.append(np.max(np.abs(fs.fs_tensor(fam, t).g - 0.25 * (dl * P) @ dl.T)))
    return _max(out)


def _metric_compatibility():
    fams = [(M.qubit(), [1.1, 0.4]), (M.exponential_family(), [0.3, -0.2])]
    return _max(np.max(np.abs(fs.metric_compatibility_residual(f, t))) for f, t in fams)


def _exp_one_flat():
    fam = M.exponential_family()
    return _max(fs.alpha_family_connection(fam, t, 1.0).max_abs() for t in ([0.3, -0.2], [-0.5, 0.1]))


def _exp_closed_forms():
    spec = M.default_exponential_spec()
    fam = M.exponential_family(spec)
    out = []
    for t in ([0.3, -0.2], [-0.5, 0.1]):
        cf = M.exp_family_closed_forms(spec, np.array(t))
        T = fs.fs_tensor(fam, t)
        out += [np.max(np.abs(cf.g - T.g)), np.max(np.abs(cf.omega - T.omega)),
                np.max(np.abs(cf.gamma_c.coeffs - fs.metric_connection(fam, t).coeffs))]
    return _max(out)


def _polar_vs_braket():
    fams = [(M.exponential_family(), [0.3, -0.2]), (M.boosted_gaussian(), [0.2, 0.5]),
            (M.random_analytic(3, 2, 3), [0.1, -0.2])]
    return _max(np.max(np.abs(fs.metric_connection(f, t).coeffs - fs.metric_connection_polar(f, t).coeffs))
                for f, t in fams)


def _trace_forms():
    fams = [(M.qubit(), [1.1, 0.4]), (M.random_analytic(3, 2, 3), [0.1, -0.2]),
            (M.random_analytic(4, 2, 4), [0.2, 0.1])]
    out = []
    for f, t in fams:
        r = fs.qfi_trace_forms(f, t)
        out += [r.metric_check, r.connection_check]
    return _max(out)


_ALPHA_FAMS = lambda: [(M.qubit(), [1.1, 0.4]), (M.random_analytic(3, 2, 3), [0.1, -0.2])]


def _alpha_collapse():
    out = []
    for f, t in _ALPHA_FAMS() + [(M.exponential_family(), [0.3, -0.2])]:
        out.append(np.max(np.abs(A.case2_tensor(f, t, 0.0).matrix - fs.fs_tensor(f, t).matrix)))
        pair = A.dual_connections(f, t, 0.0)
        out.append(np.max(np.abs(pair.gamma1.real.coeffs - fs.metric_connection(f, t).coeffs)))
    return _max(out)


def _alpha_pairing():
    return _max(abs(A.case2_pairing(f, t, a) - 1 / (1 - a * a))
                for f, t in _ALPHA_FAMS() for a in ALPHAS + (0.5,))


def _alpha_omega_tilde():
    return _max(np.max(np.abs(A.case2_tensor(f, t, a).omega_tilde))
                for f, t in _ALPHA_FAMS() for a in ALPHAS)


def _alpha_components():
    return _max(np.max(np.abs(A.case2_tensor(f, t, a).matrix - A.case2_components(f, t, a).tensor().matrix))
                for f, t in _ALPHA_FAMS() for a in ALPHAS)


def _alpha_phase_scaling():
    return _max(A.phase_block_scaling_residual(f, t, a) for f, t in _ALPHA_FAMS() for a in ALPHAS)


def _alpha_qfi_trace():
    return _max(np.max(np.abs(A.alpha_qfi_trace(f, t, a).matrix - A.case2_tensor(f, t, a).matrix))
                for f, t in _ALPHA_FAMS() for a in ALPHAS)


def _alpha_field_strength():
    return _max(np.max(np.abs(A.alpha_berry_field_strength(f, t, a) - A.alpha_field_strength_curl(f, t, a)))
                for f, t in _ALPHA_FAMS() for a in ALPHAS)


def _star_duality():
    return _max(A.star_duality_residual(f, t, a) for f, t in _ALPHA_FAMS() for a in ALPHAS)


def _re_sum_valid_domain():
    """Re-sum against ``2 Gamma^(c)`` where it holds: alpha = 0, or a real family."""
    out = [A.re_sum_residual(f, t, 0.0) for f, t in _ALPHA_FAMS()]
    real = M.real_random_analytic(3, 2, seed=2)
    out += [A.re_sum_residual(real, [0.1, -0.3], a) for a in ALPHAS]
    return _max(out)


def _re_sum_levi_civita():
    return _max(A.re_sum_levi_civita_residual(f, t, a) for f, t in _ALPHA_FAMS() for a in ALPHAS)


def _pm_alpha():
    return _max(A.pm_alpha_duality_residual(f, t, a, gauge=g)
                for f, t in _ALPHA_FAMS() for a in ALPHAS for g in (True, False))


def _nh_families():
    return [(B.eigen_families(M.pt_two_level, 2, 0, name="pt"), [0.6, 1.0]),
            (B.eigen_families(M.pt_two_level, 2, 1, name="pt"), [0.3, 1.2]),
            (B.eigen_families(M.pt_twisted, 3, 0, name="tw"), [0.4, 1.0, 0.7])]


def _hermitian_collapse():
    e = B.eigen_families(M.hermitian_two_level, 2, 0)
    t = [0.3, 0.8]
    ref = fs.fs_tensor(e.right_unit, t).matrix
    return _max(np.max(np.abs(B.nh_fs_tensor(*e.pair(k), t, k).matrix - ref)) for k in B.KINDS)


def _flipped_ll_rr():
    out = []
    for e, t in _nh_families():
        for k in ("LL", "RR"):
            T = B.nh_fs_tensor(*e.pair(k), t, k)
            out += [np.max(np.abs(T.g_tilde)), np.max(np.abs(T.omega_tilde))]
    return _max(out)


def _nh_curvature():
    return _max(np.max(np.abs(B.nh_berry_curvature(*e.pair(k), t, k) - B.nh_berry_curvature_curl(*e.pair(k), t, k)))
                for e, t in _nh_families() for k in B.KINDS)


def _nh_curvature_parts():
    """Field strength against ``2i`` times the antisymmetric part (``omega`` and ``omega_tilde``)."""
    out = []
    for e, t in _nh_families():
        for k in B.KINDS:
            T = B.nh_fs_tensor(*e.pair(k), t, k)
            F = B.nh_berry_curvature(*e.pair(k), t, k)
            out.append(np.max(np.abs(F - (-2 * T.omega + 2j * T.omega_tilde))))
    return _max(out)


def _biortho_eig():
    out = []
    for gamma in np.linspace(0.0, 0.9, 7):
        for g in (1.0, 1.5):
            H = M.pt_two_level([gamma, g])
            es = B.biortho_eig(H)
            out += [es.biorthonormality_defect(), *es.residuals(H)]
    return _max(out)


def _ep_detection():
    try:
        B.biortho_eig(M.pt_two_level([1.0, 1.0]))
    except ExceptionalPointError:
        return 0.0
    return 1.0


def _lr_duality():
    return _max(B.lr_duality_residual(e.left, e.right, t) for e, t in _nh_families())


def _pairing_preserved():
    out = []
    for seed in (0, 1):
        for spec in (M.hermitian_generator_spec(3, 1, seed), M.biortho_generator_spec(3, 1, seed)):
            out += [M.biortho_preservation_defect(spec, s) for s in (0.3, 1.1)]
    return _max(out)


def _mismatched_spec():
    spec = M.biortho_generator_spec(3, 1, 0)
    rng = np.random.default_rng(99)
    X = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    return M.GeneratorFamilySpec(spec.A1, (spec.A1[0] + 0.5 * X,), spec.l0_1, spec.l0_2, "biortho_pair")


def _pairing_mismatch():
    spec = _mismatched_spec()
    return min(M.biortho_preservation_defect(spec, s) for s in (0.3, 1.1))


def _associated():
    S, H0 = M.associated_pair(0)
    left, right = M.associated_families(S)
    return left, right, S @ H0 @ np.linalg.inv(S)


def _ite_order():
    left, right, H = _associated()
    return Q.comparator_order(left, right, H, [1.0, 0.5], 1e-2, steps=1)


def _ite_deviation():
    left, right, H = _associated()
    return Q.imaginary_time_comparator(left, right, H, [1.0, 0.5], 1e-3, 50).max_local


def _normalized_qfi_hermitian():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    H = 0.5 * (X + X.conj().T)
    psi0 = rng.normal(size=3) + 1j * rng.normal(size=3)
    psi0 /= np.linalg.norm(psi0)
    var = np.real(np.vdot(H @ psi0, H @ psi0) - np.vdot(psi0, H @ psi0) ** 2)
    return _max(abs(B.normalized_generator_qfi(H, psi0, [s])[0, 0] - 4 * var) for s in (0.0, 0.7, 2.1))


def _normalized_qfi_pt():
    H = M.pt_two_level([0.6, 1.0])
    psi0 = np.array([1.0, 0.3j]) / np.linalg.norm([1.0, 0.3])
    fam = B.normalized_generator_family(H, psi0)
    fd = fam.with_mode("richardson_fd")
    return _max(abs(B.normalized_generator_qfi(H, psi0, [s])[0, 0] - 4 * fs.fs_tensor(fd, [s]).g[0, 0])
                for s in (0.2, 0.9))


def _qng_qubit():
    tr = Q.qng_optimize(M.qubit(), Q.CostSpec(np.diag([1.0, -1.0])),
                        Q.OptimizerState([2.5, 0.3], eta=0.1, max_iters=200))
    return abs(tr.final.cost.real + 1)


def _rr_solver():
    tr = Q.rr_variational_eigensolver(M.qubit(), M.pt_two_level([0.6, 1.0]), [1.0, 0.5],
                                      Q.OptimizerState([1.0, 0.5], eta=0.1, max_iters=500))
    if tr.termination != Q.CONVERGED:
        return np.inf
    return abs(abs(tr.extra["energy"]) - 0.8)


DUAL_OPERATOR = np.array([[0.5, 1 - 0.3j], [0.2 + 0.4j, -0.7]])


def _dual_scheme():
    e = B.eigen_families(M.pt_twisted, 3, 0)
    st = Q.OptimizerState([0.4, 1.0, 0.7], eta=0.1)
    cost = Q.CostSpec(DUAL_OPERATOR, "biortho_expectation")
    a = Q.qng_step_nh_dual(e.left, e.right, cost, st)
    b = Q.qng_step_nh_dual(e.left, e.right, cost, st)
    finite = np.all(np.isfinite(a.delta_r)) and np.all(np.isfinite(a.delta_i)) and np.isfinite(a.incompatibility)
    same = (np.array_equal(a.delta_r, b.delta_r) and np.array_equal(a.delta_i, b.delta_i)
            and a.incompatibility == b.incompatibility)
    return 0.0 if finite and same and a.incompatibility > 0 else 1.0


CHECKS: List[Check] = [
    Check("fisher_rao_gaussian", 1e-6, _fr_gaussian, description="Gaussian Fisher-Rao diag(1, 2)/sigma^2"),
    Check("classical_duality", 1e-4, _classical_duality, "fd", description="d g = G(a) + G(-a), Gaussian and Bernoulli"),
    Check("qubit_metric", 1e-6, _qubit_metric, description="qubit metric diag(1/4, sin^2/4)"),
    Check("qubit_curvature", 1e-6, _qubit_curvature, description="qubit curvature -sin/2"),
    Check("curvature_curl", 1e-6, _curvature_curl, "fd", description="curvature against curl of the connection"),
    Check("gauge_invariance", 1e-6, _gauge_invariance, description="tensor and metric connection under phase changes"),
    Check("fs_vs_fisher", 1e-8, _fs_vs_fisher, description="FS metric = Fisher-Rao / 4 for real families"),
    Check("metric_compatibility", 1e-4, _metric_compatibility, "fd", description="d g = Gc + Gc"),
    Check("exp_one_flat", 1e-5, _exp_one_flat, description="alpha = 1 connection of the exponential family"),
    Check("exp_closed_forms", 1e-8, _exp_closed_forms, description="exponential family closed forms"),
    Check("polar_vs_braket", 1e-6, _polar_vs_braket, description="metric connection, polar vs bra-ket"),
    Check("trace_forms", 1e-8, _trace_forms, description="QFI trace forms of metric and connection"),
    Check("alpha_collapse", 1e-8, _alpha_collapse, description="alpha = 0 reduces to FS objects"),
    Check("alpha_pairing", 1e-10, _alpha_pairing, description="<l1|l2> = 1/(1 - alpha^2)"),
    Check("alpha_omega_tilde", 1e-10, _alpha_omega_tilde, description="real antisymmetric part vanishes"),
    Check("alpha_components", 1e-10, _alpha_components, description="component formulas"),
    Check("alpha_phase_scaling", 1e-6, _alpha_phase_scaling, description="phase block scales by (1-a)/(1+a)"),
    Check("alpha_qfi_trace", 1e-8, _alpha_qfi_trace, description="alpha density trace form"),
    Check("alpha_field_strength", 1e-5, _alpha_field_strength, "fd", description="alpha field strength vs curl"),
    Check("star_duality", 1e-6, _star_duality, description="** duality of bare connections"),
    Check("re_sum_valid_domain", 1e-5, _re_sum_valid_domain,
          description="Re[G1 + G2] = 2 Gc at alpha = 0 and for real families"),
    Check("re_sum_levi_civita", 1e-5, _re_sum_levi_civita, "fd",
          description="Re[G1 + G2] = 2 LC(g^alpha)"),
    Check("pm_alpha_duality", 1e-4, _pm_alpha, "fd", description="+-alpha sum identity"),
    Check("hermitian_collapse", 1e-8, _hermitian_collapse, "fd", description="LR/RL/LL/RR agree for Hermitian H"),
    Check("flipped_ll_rr", 1e-8, _flipped_ll_rr, "fd", description="LL/RR flipped parts vanish"),
    Check("nh_curvature", 1e-5, _nh_curvature, "fd", description="field strength vs curl, all kinds"),
    Check("nh_curvature_parts", 1e-10, _nh_curvature_parts, "fd", description="field strength = 2i antisym part"),
    Check("lr_duality", 1e-5, _lr_duality, "fd", description="LR/RL connection exchange"),
    Check("biortho_eig", 1e-10, _biortho_eig, description="biorthonormality and eigen-residuals"),
    Check("ep_detection", 0.5, _ep_detection, description="EP raises at (1, 1)"),
    Check("pairing_preserved", 1e-10, _pairing_preserved, description="pairing preserved"),
    Check("pairing_mismatch", 1e-3, _pairing_mismatch, bound="lower",
          description="pairing drifts for a mismatched pair"),
    Check("ite_order", 1.9, _ite_order, bound="lower", description="ITE vs QNG deviation order"),
    Check("ite_deviation", 1e-6, _ite_deviation, "fd", description="one-step deviation at dtau=1e-3"),
    Check("normalized_qfi_hermitian", 1e-8, _normalized_qfi_hermitian, description="normalized QFI = 4 Var(H)"),
    Check("normalized_qfi_pt", 1e-5, _normalized_qfi_pt, "fd", description="normalized QFI vs FD metric"),
    Check("qng_qubit", 1e-6, _qng_qubit, description="QNG reaches -1"),
    Check("rr_eigensolver", 1e-5, _rr_solver, description="RR solver finds |E| = 0.8"),
    Check("dual_scheme", 0.5, _dual_scheme, description="dual steps finite, deterministic, incompatible"),
]

CHECK_NAMES = tuple(c.name for c in CHECKS)


def get_check(name: str) -> Check:
    for c in CHECKS:
        if c.name == name:
            return c
    raise KeyError(name)


def run_check(check: Check, tol_scale: float = 1.0) -> CheckResult:
    try:
        value = float(check.run())
        err = None
    except GeometryError as exc:
        value, err = np.nan, f"{exc.code}: {exc}"
    if check.bound == "upper":
        tol = check.tol * tol_scale
        passed = err is None and value <= tol
    else:
        tol = check.tol
        passed = err is None and value >= tol
    return CheckResult(check.name, value, tol, check.bound, bool(passed), err)


def run_checks(names: Optional[List[str]] = None, tol_scale: float = 1.0) -> List[CheckResult]:
    checks = CHECKS if not names else [get_check(n) for n in names]
    return [run_check(c, tol_scale) for c in checks]
