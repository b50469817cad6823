"""Command-line front end: tensor and connection sweeps, optimisation runs, validation.

Configuration comes from flags and/or a flat ``key = value`` file given with
``--config``; flags override the file. Keys are the long flag names with
dashes replaced by underscores (``tol_scale``, ``max_iters``, ...). ``#``
starts a comment.

Value syntax
    params     point ``a,b``; several points separated by ``;``
    grid       one item per axis, ``start:stop:num`` or a fixed value
    alpha      comma-separated list
    operator   rows separated by ``;``, entries by ``,`` (Python complex syntax)
    check      comma-separated check names
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import List, Optional, Sequence

import numpy as np

from . import alpha as A
from . import biortho as B
from . import fs
from . import models as M
from . import qng as Q
from . import validate as V
from .errors import DomainError, GeometryError

COMMANDS = ("tensor", "connections", "sweep", "optimize", "validate", "models")
KINDS = ("fs", "case1", "case2", "lr", "rl", "ll", "rr")
DERIV = {"analytic": "analytic", "fd": "central_fd", "richardson": "richardson_fd"}
OPTIMIZERS = ("qng", "rr", "dual")
FORMATS = ("csv", "json")


class ConfigError(Exception):
    code = "CONFIG_ERROR"

    def to_dict(self) -> dict:
        return {"code": self.code, "message": str(self)}


# -- configuration ------------------------------------------------------------------


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad number list {text!r}") from exc


def parse_points(text: str) -> List[List[float]]:
    return [_floats(p) for p in text.split(";") if p.strip()]


def parse_grid(text: str) -> List[List[float]]:
    axes = []
    for item in text.split(","):
        item = item.strip()
        if ":" in item:
            parts = item.split(":")
            if len(parts) != 3:
                raise ConfigError(f"grid axis {item!r} must be start:stop:num")
            try:
                lo, hi, num = float(parts[0]), float(parts[1]), int(parts[2])
            except ValueError as exc:
                raise ConfigError(f"bad grid axis {item!r}") from exc
            if num < 1:
                raise ConfigError("grid axis needs at least one point")
            axes.append(np.linspace(lo, hi, num).tolist())
        else:
            axes.append(_floats(item))
    return [list(p) for p in itertools.product(*axes)]


def parse_operator(text: str) -> np.ndarray:
    try:
        rows = [[complex(v.replace(" ", "")) for v in r.split(",")] for r in text.split(";") if r.strip()]
        op = np.array(rows, dtype=complex)
    except ValueError as exc:
        raise ConfigError(f"bad operator {text!r}") from exc
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ConfigError("operator must be square")
    return op


@dataclass
class RunConfig:
    """Validated run configuration; string-valued fields keep their source text."""

    command: str = ""
    model: str = "qubit"
    params: Optional[str] = None
    grid: Optional[str] = None
    alpha: str = "0"
    kind: str = "fs"
    deriv: Optional[str] = None
    index: int = 0
    out: Optional[str] = None
    format: str = "csv"
    tol_scale: float = 1.0
    check: Optional[str] = None
    optimizer: str = "qng"
    start: Optional[str] = None
    operator: Optional[str] = None
    eta: float = 0.1
    eta_r: Optional[float] = None
    eta_i: Optional[float] = None
    max_iters: int = 200
    svd_cutoff: float = 1e-10
    grad_tol: float = 1e-10
    cost_tol: float = 1e-12
    workers: int = 4

    def validate(self) -> "RunConfig":
        choices = {"command": COMMANDS, "kind": KINDS, "format": FORMATS, "optimizer": OPTIMIZERS}
        for key, allowed in choices.items():
            if getattr(self, key) not in allowed:
                raise ConfigError(f"{key} must be one of {allowed}, got {getattr(self, key)!r}")
        if self.deriv is not None and self.deriv not in DERIV:
            raise ConfigError(f"deriv must be one of {tuple(DERIV)}")
        if self.command != "validate" and self.command != "models" and self.model not in M.REGISTRY:
            raise ConfigError(f"unknown model {self.model!r}; choose from {sorted(M.REGISTRY)}")
        if self.tol_scale <= 0 or self.workers < 1 or self.max_iters < 0:
            raise ConfigError("tol_scale and workers must be positive, max_iters non-negative")
        if self.check:
            unknown = [c for c in self.check.split(",") if c.strip() not in V.CHECK_NAMES]
            if unknown:
                raise ConfigError(f"unknown check(s) {unknown}; choose from {list(V.CHECK_NAMES)}")
        # parse eagerly so syntax errors surface as config errors
        self.alphas()
        self.points()
        if self.operator:
            parse_operator(self.operator)
        return self

    def alphas(self) -> List[float]:
        return _floats(self.alpha)

    def points(self) -> List[List[float]]:
        if self.grid:
            return parse_grid(self.grid)
        if self.params:
            return parse_points(self.params)
        if self.model in M.REGISTRY:
            return [list(M.REGISTRY[self.model].default)]
        return []

    def to_text(self) -> str:
        lines = [f"{f.name} = {getattr(self, f.name)}" for f in fields(self)
                 if getattr(self, f.name) is not None]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_mapping(cls, values: dict) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(values) - set(known))
        if unknown:
            raise ConfigError(f"unknown config key(s) {unknown}")
        kw = {}
        for k, v in values.items():
            if v is None:
                continue
            default = known[k].default
            typ = type(default) if default is not None else None
            if k in ("eta_r", "eta_i"):
                typ = float
            try:
                kw[k] = typ(v) if typ in (int, float) else str(v)
            except ValueError as exc:
                raise ConfigError(f"bad value for {k}: {v!r}") from exc
        return cls(**kw)

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        return cls.from_mapping(read_config_text(text))


def read_config_text(text: str) -> dict:
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {n}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k] = v
    return out


# -- model resolution ---------------------------------------------------------------


@dataclass
class Resolved:
    entry: M.ModelEntry
    family: Optional[object] = None       # StateFamily for state models
    eigen: Optional[B.EigenFamilies] = None
    builder: Optional[object] = None


def _with_mode(fam, mode):
    return fam if mode is None else fam.with_mode(mode)


def resolve(cfg: RunConfig) -> Resolved:
    entry = M.get_model(cfg.model)
    mode = DERIV[cfg.deriv] if cfg.deriv else None
    if entry.kind == "state":
        fam = entry.build()
        if mode == "analytic" and fam.derivative_mode != "analytic":
            raise ConfigError(f"model {entry.name} has no analytic derivatives")
        return Resolved(entry, family=_with_mode(fam, mode))
    if mode == "analytic":
        raise ConfigError("eigenvector families are differentiated numerically; use fd or richardson")
    builder = entry.build()
    e = B.eigen_families(builder, entry.n_params, cfg.index, name=entry.name)
    if mode is not None:
        e = B.EigenFamilies(*(_with_mode(f, mode) for f in (e.left, e.right, e.left_unit, e.right_unit)))
    return Resolved(entry, eigen=e, builder=builder)


def _pair(res: Resolved, kind: str):
    if res.eigen is not None:
        return res.eigen.pair(kind)
    return res.family, res.family


def _needs_state(res: Resolved, kind: str):
    if res.family is None:
        raise ConfigError(f"kind {kind} needs a state model, {res.entry.name} is a Hamiltonian")


# -- row builders -------------------------------------------------------------------


def _tensor_columns(n: int) -> List[str]:
    cols = []
    for part, anti in (("g", False), ("omega", True), ("g_tilde", False), ("omega_tilde", True)):
        cols += [f"{part}.{i}{j}" for i in range(n) for j in range(n) if (i < j if anti else i <= j)]
    return cols


def _tensor_values(T) -> List[float]:
    n = T.n
    out = []
    for M_, anti in ((T.g, False), (T.omega, True), (T.g_tilde, False), (T.omega_tilde, True)):
        out += [M_[i, j] for i in range(n) for j in range(n) if (i < j if anti else i <= j)]
    return out


def _tensor_at(res: Resolved, kind: str, theta, alpha: float):
    extra = {}
    if kind == "fs":
        _needs_state(res, kind)
        T = fs.fs_tensor(res.family, theta)
    elif kind == "case1":
        _needs_state(res, kind)
        r = A.case1_tensor(res.family, theta, alpha)
        T, extra = r.tensor, {"normalization_defect": r.normalization_defect}
    elif kind == "case2":
        _needs_state(res, kind)
        T = A.case2_tensor(res.family, theta, alpha)
    else:
        T = B.nh_fs_tensor(*_pair(res, kind), theta, kind.upper())
    return T, extra


def _curvature_at(res, kind, theta, alpha):
    if kind == "fs":
        return fs.berry_curvature(res.family, theta)
    if kind == "case2":
        return A.alpha_berry_field_strength(res.family, theta, alpha)
    if kind == "case1":
        return None
    return B.nh_berry_curvature(*_pair(res, kind), theta, kind.upper())


def _connection_at(res, kind, theta, alpha):
    if kind == "fs":
        _needs_state(res, kind)
        return {"gc": fs.metric_connection(res.family, theta).coeffs}
    if kind == "case1":
        raise ConfigError("connections are not defined for case1")
    if kind == "case2":
        _needs_state(res, kind)
        p = A.dual_connections(res.family, theta, alpha)
    else:
        p = B.nh_connections(*_pair(res, kind), theta, kind.upper())
    return {"gamma1": p.gamma1.coeffs, "gamma2": p.gamma2.coeffs}


def _uses_alpha(kind: str) -> bool:
    return kind in ("case1", "case2")


def _jobs(cfg: RunConfig):
    alphas = cfg.alphas() if _uses_alpha(cfg.kind) else [None]
    return [(tuple(p), a) for p in cfg.points() for a in alphas]


def _row_prefix(theta, a):
    return list(theta) + ([] if a is None else [a])


def _prefix_cols(n: int, with_alpha: bool) -> List[str]:
    return [f"theta.{i}" for i in range(n)] + (["alpha"] if with_alpha else [])


def _check_dim(res: Resolved, jobs):
    n = res.entry.n_params
    for theta, _ in jobs:
        if len(theta) != n:
            raise ConfigError(f"model {res.entry.name} takes {n} parameters, got {len(theta)}")


def _parallel(fn, jobs, workers):
    if workers == 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs))


def cmd_tensor(cfg: RunConfig, sweep: bool = False):
    res = resolve(cfg)
    jobs = _jobs(cfg)
    _check_dim(res, jobs)
    n = res.entry.n_params
    wa = _uses_alpha(cfg.kind)
    cols = _prefix_cols(n, wa) + _tensor_columns(n)
    if cfg.kind == "case1":
        cols.append("normalization_defect")
    if sweep:
        cols += ["g.min_eig", "g.det"]
        if cfg.kind != "case1":
            cols += [f"F.{p}.{i}{j}" for p in ("re", "im") for i in range(n) for j in range(i + 1, n)]

    def row(job):
        theta, a = job
        T, extra = _tensor_at(res, cfg.kind, np.array(theta), a if a is not None else 0.0)
        vals = _row_prefix(theta, a) + _tensor_values(T) + list(extra.values())
        if sweep:
            vals += [float(np.min(np.linalg.eigvalsh(T.g))), float(np.linalg.det(T.g))]
            F = _curvature_at(res, cfg.kind, np.array(theta), a if a is not None else 0.0)
            if F is not None:
                for part in (F.real, F.imag):
                    vals += [part[i, j] for i in range(n) for j in range(i + 1, n)]
        return vals

    return cols, _parallel(row, jobs, cfg.workers), {}


def cmd_connections(cfg: RunConfig):
    res = resolve(cfg)
    jobs = _jobs(cfg)
    _check_dim(res, jobs)
    n = res.entry.n_params
    idx = [f"{i}{j}{k}" for i in range(n) for j in range(n) for k in range(n)]
    names = ["gc"] if cfg.kind == "fs" else ["gamma1", "gamma2"]
    cols = _prefix_cols(n, _uses_alpha(cfg.kind))
    for nm in names:
        cols += [f"{nm}.{idx_}" for idx_ in idx] if nm == "gc" else \
            [f"{nm}.{p}.{idx_}" for p in ("re", "im") for idx_ in idx]

    def row(job):
        theta, a = job
        conns = _connection_at(res, cfg.kind, np.array(theta), a if a is not None else 0.0)
        vals = _row_prefix(theta, a)
        for nm in names:
            c = conns[nm].reshape(-1)
            vals += list(c.real) if nm == "gc" else list(c.real) + list(c.imag)
        return vals

    return cols, _parallel(row, jobs, cfg.workers), {}


def _operator(cfg: RunConfig, default: Optional[np.ndarray]) -> np.ndarray:
    if cfg.operator:
        return parse_operator(cfg.operator)
    if default is None:
        raise ConfigError("this run needs an operator")
    return default


def _state(cfg: RunConfig, theta) -> Q.OptimizerState:
    return Q.OptimizerState(theta, eta=cfg.eta, eta_r=cfg.eta_r, eta_i=cfg.eta_i,
                            svd_cutoff=cfg.svd_cutoff, max_iters=cfg.max_iters,
                            grad_tol=cfg.grad_tol, cost_tol=cfg.cost_tol)


def _trace_rows(trace: Q.OptimizerTrace, n: int):
    cols = ["iter"] + [f"theta.{i}" for i in range(n)] + \
        ["cost.re", "cost.im", "grad_norm", "condition", "incompatibility"]
    rows = [[k] + list(r.theta) + [r.cost.real, r.cost.imag, r.grad_norm, r.condition, r.incompatibility]
            for k, r in enumerate(trace.records)]
    return cols, rows


def cmd_optimize(cfg: RunConfig):
    res = resolve(cfg)
    if cfg.optimizer == "qng":
        _needs_state(res, "qng")
        fam = res.family
        start = _floats(cfg.start) if cfg.start else cfg.points()[0]
        dim = np.asarray(fam.evaluator(np.asarray(start, float))).size
        op = _operator(cfg, np.diag([1.0, -1.0]) if dim == 2 else None)
        if op.shape[0] != dim:
            raise ConfigError(f"operator is {op.shape[0]}x{op.shape[0]}, states have {dim} components")
        trace = Q.qng_optimize(fam, Q.CostSpec(op), _state(cfg, start))
        cols, rows = _trace_rows(trace, fam.n_params)
        summary = {"termination": trace.termination}
        if trace.records:
            summary["final_cost"] = trace.final.cost.real
        return cols, rows, summary
    if res.builder is None:
        raise ConfigError(f"optimizer {cfg.optimizer} needs a Hamiltonian model")
    hparams = cfg.points()[0]
    if len(hparams) != res.entry.n_params:
        raise ConfigError(f"model {res.entry.name} takes {res.entry.n_params} parameters")
    if cfg.optimizer == "rr":
        H = res.builder(hparams)
        if H.shape[0] != 2:
            raise ConfigError("the built-in RR variational family covers two-level systems")
        fam = M.qubit()
        start = _floats(cfg.start) if cfg.start else [1.0, 0.5]
        trace = Q.rr_variational_eigensolver(fam, H, start, _state(cfg, start))
        cols, rows = _trace_rows(trace, 2)
        summary = {"termination": trace.termination}
        if "energy" in trace.extra:
            E = trace.extra["energy"]
            summary.update({"energy.re": E.real, "energy.im": E.imag})
        return cols, rows, summary
    # dual: both steps at the parameter point, never merged
    n = res.entry.n_params
    cols = ["iter"] + [f"theta.{i}" for i in range(n)] + ["cost.re", "cost.im", "grad_norm"] + \
        [f"delta_r.{i}" for i in range(n)] + [f"delta_i.{i}" for i in range(n)] + ["incompatibility"]
    if cfg.max_iters == 0:
        return cols, [], {"termination": Q.ZERO_ITERS}
    kind = cfg.kind.upper() if cfg.kind in ("lr", "rl", "ll", "rr") else "LR"
    cost = Q.CostSpec(_operator(cfg, V.DUAL_OPERATOR), "biortho_expectation")
    left, right = res.eigen.left, res.eigen.right
    if kind in ("LL", "RR"):
        left, right = res.eigen.pair(kind)
    step = Q.qng_step_nh_dual(left, right, cost, _state(cfg, hparams), kind)
    c = step.diagnostics["cost"]
    row = [0] + list(hparams) + [c.real, c.imag, step.diagnostics["grad_norm"]] + \
        list(step.delta_r) + list(step.delta_i) + [step.incompatibility]
    return cols, [row], {"termination": "SINGLE_STEP"}


def cmd_validate(cfg: RunConfig):
    names = [c.strip() for c in cfg.check.split(",")] if cfg.check else None
    results = V.run_checks(names, cfg.tol_scale)
    cols = ["check", "value", "tol", "bound", "passed"]
    rows = [[r.name, r.value, r.tol, r.bound, r.passed] for r in results]
    failed = [r.name for r in results if not r.passed]
    return cols, rows, {"failed": failed}


def cmd_models(cfg: RunConfig):
    cols = ["name", "kind", "n_params", "default", "description"]
    rows = [[e.name, e.kind, e.n_params, " ".join(f"{v:g}" for v in e.default), e.description]
            for e in M.REGISTRY.values()]
    return cols, rows, {}


# -- output -------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.16e" % v
    text = str(v)
    return f'"{text}"' if "," in text else text


def render_csv(cols, rows, summary) -> str:
    lines = [",".join(cols)] + [",".join(_fmt(v) for v in r) for r in rows]
    for k, v in summary.items():
        lines.append(f"# {k} = {v if not isinstance(v, float) else '%.16e' % v}")
    return "\n".join(lines) + "\n"


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        return float(v) if np.isfinite(v) else str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def render_json(cols, rows, summary, cfg: RunConfig) -> str:
    doc = {"config": {k: v for k, v in asdict(cfg).items() if v is not None},
           "columns": cols,
           "rows": [[_jsonable(v) for v in r] for r in rows],
           "summary": {k: _jsonable(v) for k, v in summary.items()}}
    return json.dumps(doc, indent=1) + "\n"


def run(cfg: RunConfig):
    cfg.validate()
    handler = {
        "tensor": cmd_tensor,
        "sweep": lambda c: cmd_tensor(c, sweep=True),
        "connections": cmd_connections,
        "optimize": cmd_optimize,
        "validate": cmd_validate,
        "models": cmd_models,
    }[cfg.command]
    return handler(cfg)


# -- argument parsing ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qigeom", description="Quantum and classical information geometry toolkit.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--model")
    p.add_argument("--params", help="point(s): a,b;c,d")
    p.add_argument("--grid", help="per-axis start:stop:num or fixed value, comma separated")
    p.add_argument("--alpha", help="comma-separated alpha values")
    p.add_argument("--kind", choices=KINDS)
    p.add_argument("--deriv", choices=tuple(DERIV))
    p.add_argument("--index", type=int, help="eigenvalue branch for Hamiltonian models")
    p.add_argument("--out")
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--tol-scale", type=float)
    p.add_argument("--check", action="append", help="validation check name (repeatable)")
    p.add_argument("--optimizer", choices=OPTIMIZERS)
    p.add_argument("--start", help="optimisation start point")
    p.add_argument("--operator", help="cost operator rows 'a,b;c,d'")
    p.add_argument("--eta", type=float)
    p.add_argument("--eta-r", type=float)
    p.add_argument("--eta-i", type=float)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--svd-cutoff", type=float)
    p.add_argument("--grad-tol", type=float)
    p.add_argument("--cost-tol", type=float)
    p.add_argument("--workers", type=int)
    return p


def config_from_args(argv: Optional[Sequence[str]] = None) -> RunConfig:
    ns = build_parser().parse_args(argv)
    values = {}
    if ns.config:
        try:
            with open(ns.config) as fh:
                values.update(read_config_text(fh.read()))
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        values.pop("command", None)
    flags = {k: v for k, v in vars(ns).items() if k not in ("config", "command") and v is not None}
    if "check" in flags:
        flags["check"] = ",".join(flags["check"])
    values.update(flags)
    values["command"] = ns.command
    return RunConfig.from_mapping(values)


def _fail(exc, code: int) -> int:
    sys.stderr.write(json.dumps({k: _jsonable(v) for k, v in exc.to_dict().items()}) + "\n")
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        cfg = config_from_args(argv)
        cols, rows, summary = run(cfg)
    except ConfigError as exc:
        return _fail(exc, 2)
    except DomainError as exc:
        return _fail(exc, 2)
    except GeometryError as exc:
        return _fail(exc, 3)
    if cfg.command == "validate" and cfg.format == "csv" and not cfg.out:
        text = "".join(f"{'PASS' if r[4] else 'FAIL'}  {r[0]:<24} {r[1]:.3e}  ({'<=' if r[3] == 'upper' else '>='} {r[2]:.1e})\n"
                       for r in rows)
    else:
        text = render_csv(cols, rows, summary) if cfg.format == "csv" else render_json(cols, rows, summary, cfg)
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
        with open(cfg.out + ".cfg", "w") as fh:
            fh.write(cfg.to_text())
    else:
        sys.stdout.write(text)
    if cfg.command == "validate" and summary["failed"]:
        sys.stderr.write("failed checks: " + ", ".join(summary["failed"]) + "\n")
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
