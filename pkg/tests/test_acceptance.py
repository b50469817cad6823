"""Acceptance criteria at their stated tolerances, one PASS/FAIL line each."""

import subprocess
import sys
import time

import numpy as np
import pytest

from qigeom import alpha as A
from qigeom import biortho as B
from qigeom import classical as C
from qigeom import fs
from qigeom import models as M
from qigeom import qng as Q
from qigeom import validate as V
from qigeom.errors import ExceptionalPointError

from conftest import bloch
from oracles import loop_curvature, overlap_fit_metric

ALPHAS = (-0.6, -0.3, 0.3, 0.6)


def report(capsys, label, parts, budget, start):
    """Print one line for a criterion and return whether every part held."""
    elapsed = time.perf_counter() - start
    ok = all(v <= tol if kind == "<=" else v >= tol for _, v, kind, tol in parts) and elapsed < budget
    detail = "; ".join(f"{name}={v:.2e} ({kind} {tol:g})" for name, v, kind, tol in parts)
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} {label} [{elapsed:.1f}s < {budget}s] {detail}")
    return ok


def worst(values):
    return float(max(values))


def alpha_families():
    return [(M.qubit(), np.array([1.1, 0.4])), (M.random_analytic(3, 2, seed=3), np.array([0.1, -0.2]))]


def test_criterion_01_classical_baseline(capsys):
    t0 = time.perf_counter()
    gauss, bern = C.gaussian_density(), C.bernoulli()
    fr = worst(np.max(np.abs(C.fisher_rao(gauss, [m, s]) - np.diag([1 / s**2, 2 / s**2])))
               for m, s in [(0.0, 1.0), (0.5, 0.7), (-1.2, 2.0)])
    alphas = np.round(np.linspace(-0.9, 0.9, 19), 10)
    dual = worst(C.classical_duality_residual(f, t, a)
                 for f, t in [(gauss, [0.3, 1.2]), (bern, [0.3]), (bern, [0.8])] for a in alphas)
    assert report(capsys, "1 classical baseline", [("fisher_rao", fr, "<=", 1e-6),
                                                     ("duality", dual, "<=", 1e-4)], 5, t0)


def test_criterion_02_hermitian_geometry(capsys):
    t0 = time.perf_counter()
    q = M.qubit()
    state = lambda p: bloch(*p)
    met, curv = [], []
    for t in (0.4, 1.1, 1.9, 2.7):
        theta = np.array([t, 0.3])
        g = fs.fs_tensor(q, theta).g
        F = fs.berry_curvature(q, theta)[0, 1]
        met += [np.max(np.abs(g - np.diag([0.25, np.sin(t) ** 2 / 4]))),
                np.max(np.abs(g - overlap_fit_metric(state, theta)))]
        curv += [abs(abs(F) - 0.5 * np.sin(t)), abs(F - loop_curvature(state, theta, 0, 1))]
    rng = np.random.default_rng(7)
    gauge = []
    for fam, t in [(M.random_analytic(3, 2, seed=3), [0.1, -0.2]), (q, [1.1, 0.4])]:
        ref = fs.fs_tensor(fam, t).matrix
        for _ in range(5):
            gf = fs.gauge_transformed(fam, fs.PolynomialPhase.random(fam.n_params, rng))
            gauge.append(np.max(np.abs(fs.fs_tensor(gf, t).matrix - ref)))
    amp, dens = M.gaussian_amplitude(), C.gaussian_density()
    quarter = worst(np.max(np.abs(fs.fs_tensor(amp, t).g - 0.25 * C.fisher_rao(dens, t)))
                    for t in ([0.0, 1.0], [0.4, 1.3], [-0.7, 0.6]))
    assert report(capsys, "2 hermitian geometry", [("metric", worst(met), "<=", 1e-6),
                                                     ("curvature", worst(curv), "<=", 1e-6),
                                                     ("gauge", worst(gauge), "<=", 1e-6),
                                                     ("fs_vs_fr", quarter, "<=", 1e-8)], 10, t0)


def test_criterion_03_connection_identities(capsys):
    t0 = time.perf_counter()
    q, ex = M.qubit(), M.exponential_family()
    compat = worst(np.max(np.abs(fs.metric_compatibility_residual(f, t)))
                   for f, t in [(q, [1.1, 0.4]), (q, [0.5, 2.0]), (ex, [0.3, -0.2]), (ex, [-0.5, 0.1])])
    flat = worst(fs.alpha_family_connection(ex, t, 1.0).max_abs() for t in ([0.3, -0.2], [-0.5, 0.1]))
    polar = worst(np.max(np.abs(fs.metric_connection(f, t).coeffs - fs.metric_connection_polar(f, t).coeffs))
                  for f, t in [(ex, [0.3, -0.2]), (M.boosted_gaussian(), [0.2, 0.5]),
                               (M.random_analytic(3, 2, seed=3), [0.1, -0.2])])
    assert report(capsys, "3 connection identities", [("compatibility", compat, "<=", 1e-4),
                                                        ("gamma1_exp", flat, "<=", 1e-5),
                                                        ("polar_braket", polar, "<=", 1e-6)], 30, t0)


def test_criterion_04_qfi_trace_forms(capsys):
    t0 = time.perf_counter()
    out = []
    for f, t in [(M.qubit(), [1.1, 0.4]), (M.random_analytic(3, 2, seed=3), [0.1, -0.2]),
                 (M.random_analytic(4, 2, seed=4), [0.2, 0.1]), (M.random_analytic(4, 3, seed=8), [0.1, 0.0, -0.1])]:
        r = fs.qfi_trace_forms(f, t)
        out += [r.metric_check, r.connection_check]
    assert report(capsys, "4 qfi trace forms", [("trace_forms", worst(out), "<=", 1e-8)], 5, t0)


def test_criterion_05_case2_alpha_geometry(capsys):
    t0 = time.perf_counter()
    fams = alpha_families()
    collapse = []
    for f, t in fams:
        collapse.append(np.max(np.abs(A.case2_tensor(f, t, 0.0).matrix - fs.fs_tensor(f, t).matrix)))
        collapse.append(np.max(np.abs(A.dual_connections(f, t, 0.0).gamma1.real.coeffs
                                      - fs.metric_connection(f, t).coeffs)))
    pairing = worst(abs(A.case2_pairing(f, t, a) - 1 / (1 - a * a)) for f, t in fams for a in ALPHAS + (0.5,))
    pairing = max(pairing, abs(A.case2_pairing(*fams[0], 0.5) - 4 / 3))
    om = worst(np.max(np.abs(A.case2_tensor(f, t, a).omega_tilde)) for f, t in fams for a in ALPHAS)
    scale = worst(A.phase_block_scaling_residual(f, t, a) for f, t in fams for a in ALPHAS)
    qfi = worst(np.max(np.abs(A.alpha_qfi_trace(f, t, a).matrix - A.case2_tensor(f, t, a).matrix))
                for f, t in fams for a in ALPHAS)
    assert report(capsys, "5 case-2 alpha geometry", [("collapse", worst(collapse), "<=", 1e-8),
                                                        ("pairing", pairing, "<=", 1e-10),
                                                        ("omega_tilde", om, "<=", 1e-10),
                                                        ("phase_scaling", scale, "<=", 1e-6),
                                                        ("alpha_qfi", qfi, "<=", 1e-8)], 20, t0)


def test_criterion_06_dualities(capsys):
    # The Re-sum part is kept at its stated form and domain. It holds at alpha = 0
    # and for real families only; for complex families at alpha != 0 the real part
    # of the sum is twice the Levi-Civita connection of g^alpha instead.
    t0 = time.perf_counter()
    fams = alpha_families()
    star = worst(A.star_duality_residual(f, t, a) for f, t in fams for a in ALPHAS)
    resum = worst(A.re_sum_residual(f, t, a) for f, t in fams for a in ALPHAS)
    pm = worst(A.pm_alpha_duality_residual(f, t, a) for f, t in fams for a in ALPHAS)
    assert report(capsys, "6 dualities", [("star", star, "<=", 1e-6),
                                           ("re_sum", resum, "<=", 1e-5),
                                           ("pm_alpha", pm, "<=", 1e-4)], 60, t0)


def test_criterion_07_non_hermitian(capsys):
    t0 = time.perf_counter()
    eh = B.eigen_families(M.hermitian_two_level, 2, 0)
    th = [0.3, 0.8]
    ref = fs.fs_tensor(eh.right_unit, th).matrix
    collapse = worst(np.max(np.abs(B.nh_fs_tensor(*eh.pair(k), th, k).matrix - ref)) for k in B.KINDS)
    nh = [(B.eigen_families(M.pt_two_level, 2, i), t) for i, t in ((0, [0.6, 1.0]), (1, [0.3, 1.2]))]
    nh.append((B.eigen_families(M.pt_twisted, 3, 0), [0.4, 1.0, 0.7]))
    flipped, curv = [], []
    for e, t in nh:
        for k in B.KINDS:
            T = B.nh_fs_tensor(*e.pair(k), t, k)
            F = B.nh_berry_curvature(*e.pair(k), t, k)
            if k in ("LL", "RR"):
                flipped += [np.max(np.abs(T.g_tilde)), np.max(np.abs(T.omega_tilde))]
            curv += [np.max(np.abs(F - (-2 * T.omega + 2j * T.omega_tilde))),
                     np.max(np.abs(F - B.nh_berry_curvature_curl(*e.pair(k), t, k)))]
    eig = []
    for gamma in np.linspace(0.0, 0.9, 10):
        for g in (1.0, 1.3, 2.0):
            H = M.pt_two_level([gamma, g])
            es = B.biortho_eig(H)
            eig += [es.biorthonormality_defect(), *es.residuals(H)]
    with pytest.raises(ExceptionalPointError):
        B.biortho_eig(M.pt_two_level([1.0, 1.0]))
    assert report(capsys, "7 non-hermitian classification", [("hermitian_collapse", collapse, "<=", 1e-8),
                                                               ("flipped", worst(flipped), "<=", 1e-8),
                                                               ("field_strength", worst(curv), "<=", 1e-5),
                                                               ("biortho", worst(eig), "<=", 1e-10),
                                                               ("ep_raised", 0.0, "<=", 0.0)], 30, t0)


def test_criterion_08_generator_families(capsys):
    t0 = time.perf_counter()
    consistent = V.run_check(V.get_check("pairing_preserved")).value
    mismatched = V.run_check(V.get_check("pairing_mismatch")).value
    S, H0 = M.associated_pair(0)
    left, right = M.associated_families(S)
    H = S @ H0 @ np.linalg.inv(S)
    order = Q.comparator_order(left, right, H, [1.0, 0.5], 1e-2, steps=1)
    rng = np.random.default_rng(3)
    X = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    Hh = 0.5 * (X + X.conj().T)
    psi0 = rng.normal(size=3) + 1j * rng.normal(size=3)
    psi0 /= np.linalg.norm(psi0)
    var = np.real(np.vdot(Hh @ psi0, Hh @ psi0) - np.vdot(psi0, Hh @ psi0) ** 2)
    herm = worst(abs(B.normalized_generator_qfi(Hh, psi0, [s])[0, 0] - 4 * var) for s in (0.0, 0.7, 2.1, 5.0))
    pt = V.run_check(V.get_check("normalized_qfi_pt")).value
    assert report(capsys, "8 generator families", [("preserved", consistent, "<=", 1e-10),
                                                     ("mismatched", mismatched, ">=", 1e-3),
                                                     ("ite_order", order, ">=", 1.9),
                                                     ("qfi_hermitian", herm, "<=", 1e-8),
                                                     ("qfi_pt", pt, "<=", 1e-5)], 60, t0)


def test_criterion_09_optimizers(capsys):
    t0 = time.perf_counter()
    tr = Q.qng_optimize(M.qubit(), Q.CostSpec(np.diag([1.0, -1.0])),
                        Q.OptimizerState([2.5, 0.3], eta=0.1, max_iters=200))
    qng = abs(tr.final.cost.real + 1)
    rr = Q.rr_variational_eigensolver(M.qubit(), M.pt_two_level([0.6, 1.0]), [1.0, 0.5],
                                      Q.OptimizerState([1.0, 0.5], eta=0.1, max_iters=500))
    L = rr.final.cost.real
    dE = abs(abs(rr.extra["energy"]) - 0.8)
    dual = V.run_check(V.get_check("dual_scheme")).value
    assert report(capsys, "9 optimizers", [("qng_cost", qng, "<=", 1e-6),
                                            ("rr_loss", L, "<=", 1e-8),
                                            ("rr_energy", dE, "<=", 1e-5),
                                            ("dual_smoke", dual, "<=", 0.0)], 60, t0)


def _cli(*args, cwd):
    return subprocess.run([sys.executable, "-m", "qigeom.cli", *args], cwd=cwd,
                          capture_output=True, text=True)


def test_criterion_10_cli(capsys, tmp_path):
    t0 = time.perf_counter()
    v = _cli("validate", cwd=tmp_path)
    cfg = tmp_path / "sweep.cfg"
    cfg.write_text("model = qubit\ngrid = 0.2:3:9,0:6:4\nworkers = 4\n")
    outs = []
    for name in ("a.csv", "b.csv"):
        r = _cli("sweep", "--config", str(cfg), "--out", name, cwd=tmp_path)
        assert r.returncode == 0, r.stderr
        outs.append((tmp_path / name).read_bytes())
    same = outs[0] == outs[1] and len(outs[0]) > 0
    assert report(capsys, "10 cli", [("validate_exit", float(v.returncode), "<=", 0),
                                      ("sweep_mismatch", float(not same), "<=", 0)], 120, t0)
