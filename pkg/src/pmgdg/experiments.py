"""Command-line harness reproducing the numerical studies as CSV reports.

Every run is driven by a :class:`RunConfig`.  Values come from built-in
per-experiment defaults, then an optional flat ``key = value`` config file,
then command-line flags; flag names mirror config keys.  List-valued keys
accept ``2,4,8`` and ranges ``2-6``.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import io
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import linalg
from .assembly import (PenaltyConfig, assemble_level, assemble_load, dg_error_norms, dump_level,
                       manufactured_solution)
from .dg_space import DgSpace
from .krylov import GmresConfig, gmres_solve
from .linalg import ConvergenceError
from .mesh import build_mesh
from .multigrid import (DivergenceError, HierarchyConfig, build_hierarchy, iterate_to_tolerance,
                        operator_complexity, parse_m_rule, two_level, wcycle)
from .smoother import OMEGA_METHODS, select_omega, smoothing_ratio

SCHEMA = 1
EXPERIMENTS = ("solve", "smooth_ratio", "two_level", "wcycle", "op_complexity", "compare",
               "gmres", "error_order")
EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGENCE = 0, 2, 3
INITIAL_GUESS_SEED = 42


class ConfigError(ValueError):
    pass


def parse_int_list(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    if isinstance(text, (int, np.integer)):
        return (int(text),)
    out = []
    for part in str(text).replace(" ", "").split(","):
        if not part:
            continue
        try:
            if "-" in part[1:]:
                lo, hi = part.split("-", 1)
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise ConfigError(f"not an integer list: {text!r}") from None
    return tuple(out)


def parse_str_list(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(str(v) for v in text)
    return tuple(s for s in str(text).replace(" ", "").split(",") if s)


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    dim: int = 1
    n: tuple = (8,)
    p: tuple = (2,)
    m_rule: tuple = ("p",)
    K: tuple = ()
    form: tuple = ("inherited",)
    alpha0: float = 10.0
    tol: float = 1e-8
    seed: int = INITIAL_GUESS_SEED
    omega: str = "gershgorin"
    sweep: str = "m"
    box: tuple = (0.0, 1.0)
    max_iter: int = 500
    out: str | None = None
    allow_3d: bool = False
    dump_matrices: str | None = None
    force: bool = False

    # keys that do not change the numbers
    _RUNTIME_KEYS = ("out", "allow_3d", "dump_matrices", "force")

    def validate(self) -> "RunConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.dim not in (1, 2, 3):
            raise ConfigError("dim must be 1, 2 or 3")
        if self.dim == 3 and not self.allow_3d:
            raise ConfigError("3D runs require --allow-3d")
        if not self.n or min(self.n) < 1:
            raise ConfigError("n must list positive element counts per axis")
        if not self.p or min(self.p) < 1:
            raise ConfigError("p must list positive degrees")
        if self.experiment in ("two_level", "wcycle", "compare", "gmres", "solve", "op_complexity"):
            if min(self.p) < 2:
                raise ConfigError("multigrid experiments need p >= 2")
        for f in self.form:
            if f not in ("inherited", "non-inherited"):
                raise ConfigError(f"unknown form {f!r}")
        for rule in self.m_rule:
            try:
                parse_m_rule(rule)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        if any(k < 2 for k in self.K):
            raise ConfigError("K must be at least 2")
        if not self.alpha0 > 0:
            raise ConfigError("alpha0 must be positive")
        if not 0 < self.tol < 1:
            raise ConfigError("tol must lie in (0, 1)")
        if self.omega not in OMEGA_METHODS:
            raise ConfigError(f"omega must be one of {OMEGA_METHODS}")
        if self.sweep not in ("m", "k", "h"):
            raise ConfigError("sweep must be m, k or h")
        if len(self.box) != 2 or not self.box[0] < self.box[1]:
            raise ConfigError("box must be 'lower,upper' with lower < upper")
        return self

    def canonical(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            if f.name in self._RUNTIME_KEYS:
                continue
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            lines.append(f"{f.name}={v}")
        return "\n".join(lines) + "\n"

    def fingerprint(self) -> str:
        """Git-style blob hash of the canonical config text."""
        body = self.canonical().encode()
        return hashlib.sha1(b"blob %d\0" % len(body) + body).hexdigest()


DEFAULTS = {
    "solve": dict(dim=1, n=(16,), p=(4,), form=("inherited",), m_rule=()),
    "smooth_ratio": dict(dim=2, n=(32,), p=(5,), m_rule=("2", "4", "8", "16", "32", "64"), sweep="m"),
    "two_level": dict(dim=1, n=(4, 8, 16, 32, 64), p=tuple(range(2, 9)), m_rule=("p",),
                      form=("non-inherited",), box=(-1.0, 1.0)),
    "wcycle": dict(dim=1, n=(8, 16, 32), p=(3, 4, 5, 6), form=("inherited", "non-inherited"), m_rule=()),
    "op_complexity": dict(dim=1, n=(4, 8, 16), p=(2, 3, 4, 5, 6)),
    "compare": dict(dim=2, n=(16,), p=(5,), m_rule=("2", "4", "6", "10", "20"), K=(2, 3, 4)),
    "gmres": dict(dim=2, n=(8, 16, 32), p=(2, 3, 4, 5, 6), m_rule=()),
    "error_order": dict(dim=1, n=(4, 8, 16, 32), p=(1, 2, 3)),
}

SWEEP_DEFAULTS = {
    "m": dict(n=(32,), p=(5,), m_rule=("2", "4", "8", "16", "32", "64")),
    "k": dict(n=(32,), p=tuple(range(1, 9)), m_rule=("20",)),
    "h": dict(n=(4, 8, 16, 32, 64), p=(5,), m_rule=("p^2",)),
}

_LIST_INT = {"n", "p", "K"}
_LIST_STR = {"m_rule", "form"}


def _coerce(key: str, value):
    if key in _LIST_INT:
        return parse_int_list(value)
    if key in _LIST_STR:
        return parse_str_list(value)
    if key == "box":
        return tuple(float(v) for v in parse_str_list(value))
    if key in ("dim", "seed", "max_iter"):
        return int(value)
    if key in ("alpha0", "tol"):
        return float(value)
    if key in ("allow_3d", "force"):
        return value if isinstance(value, bool) else str(value).lower() in ("1", "true", "yes", "on")
    return None if value is None else str(value)


def read_config_file(path) -> dict:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in {f.name for f in dataclasses.fields(RunConfig)}:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def make_config(experiment: str, overrides: dict | None = None) -> RunConfig:
    """Merge per-experiment defaults with ``overrides`` and validate."""
    experiment = experiment.replace("-", "_")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    values = dict(DEFAULTS[experiment])
    overrides = {k.replace("-", "_"): v for k, v in (overrides or {}).items() if v is not None}
    if experiment == "smooth_ratio":
        sweep = str(overrides.get("sweep", values["sweep"]))
        if sweep not in SWEEP_DEFAULTS:
            raise ConfigError("sweep must be m, k or h")
        values.update(SWEEP_DEFAULTS[sweep])
    try:
        for key, value in overrides.items():
            values[key] = _coerce(key, value)
        cfg = RunConfig(experiment=experiment, **values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()


@dataclass
class ExperimentReport:
    config: RunConfig
    header: tuple
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# schema={SCHEMA}\n")
        buf.write(f"# experiment={self.config.experiment}\n")
        buf.write(f"# fingerprint={self.config.fingerprint()}\n")
        buf.write("# config=" + ";".join(self.config.canonical().split()) + "\n")
        for key in sorted(self.meta):
            buf.write(f"# {key}={_fmt(self.meta[key])}\n")
        buf.write(",".join(self.header) + "\n")
        for row in self.rows:
            buf.write(",".join(_fmt(v) for v in row) + "\n")
        return buf.getvalue()

    def column(self, name: str) -> list:
        i = self.header.index(name)
        return [r[i] for r in self.rows]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.10g}"
    return str(v)


def read_fingerprint(path) -> str | None:
    with open(path) as fh:
        for line in fh:
            if line.startswith("# fingerprint="):
                return line.strip().split("=", 1)[1]
            if not line.startswith("#"):
                break
    return None


def write_report(report: ExperimentReport, path, force: bool = False) -> None:
    path = Path(path)
    if path.exists() and not force:
        old = read_fingerprint(path)
        if old != report.config.fingerprint():
            raise ConfigError(f"{path} holds a report with a different config; use --force to overwrite")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.to_csv())


# experiment drivers ---------------------------------------------------------

def _mesh(cfg: RunConfig, n: int):
    return build_mesh(cfg.dim, cfg.box, n)


def _hierarchy(cfg: RunConfig, n: int, p: int, form: str, K: int | None, m_rule=None):
    mesh = _mesh(cfg, n)
    space = DgSpace(mesh, p)
    hc = HierarchyConfig(p=p, K=K, form=form, m_rule=m_rule, alpha0=cfg.alpha0,
                         omega_method=cfg.omega, seed=cfg.seed)
    h = build_hierarchy(space, hc)
    if cfg.dump_matrices:
        target = Path(cfg.dump_matrices) / f"d{cfg.dim}_n{n}_p{p}_{form}"
        for lvl in h.levels.values():
            dump_level(lvl, target)
    return h


def _problem(cfg: RunConfig, h):
    space = h.finest.space
    u, grad_u, f = manufactured_solution(space.mesh)
    F = assemble_load(space, f)
    z0 = np.random.default_rng(cfg.seed).uniform(-1.0, 1.0, space.n_dofs)
    return F, z0, (u, grad_u)


def _rule_label(rule) -> str:
    return "default" if rule is None else str(rule)


def run_solve(cfg: RunConfig) -> ExperimentReport:
    rep = ExperimentReport(cfg, ("dim", "N_h", "p", "form", "N_it", "rho", "energy_error", "l2_error"))
    rules = cfg.m_rule or (None,)
    for n in cfg.n:
        for p in cfg.p:
            for form in cfg.form:
                h = _hierarchy(cfg, n, p, form, cfg.K[0] if cfg.K else None, rules[0])
                F, z0, (u, gu) = _problem(cfg, h)
                res = iterate_to_tolerance(lambda b, z: wcycle(h, p, b, z), h.finest.A, F, z0,
                                           cfg.tol, cfg.max_iter)
                e, l2 = dg_error_norms(h.finest.space, res.z, u, gu)
                rep.rows.append((cfg.dim, n**cfg.dim, p, form, res.iterations, res.rate, e, l2))
    return rep


def run_smooth_ratio(cfg: RunConfig) -> ExperimentReport:
    rep = ExperimentReport(cfg, ("sweep_var", "value", "N_h", "k", "m", "S"))
    xs, ys = [], []
    for n in cfg.n:
        mesh = _mesh(cfg, n)
        for k in cfg.p:
            level = assemble_level(DgSpace(mesh, k), PenaltyConfig(cfg.alpha0))
            omega = select_omega(level.A, level.D_diag, seed=cfg.seed, method=cfg.omega)
            for rule in cfg.m_rule:
                m = parse_m_rule(rule)(k, k)
                s = smoothing_ratio(level, omega, m, seed=cfg.seed)
                value = {"m": m, "k": k, "h": mesh.h}[cfg.sweep]
                xs.append(value)
                ys.append(s)
                rep.rows.append((cfg.sweep, value, n**cfg.dim, k, m, s))
    if len(set(xs)) >= 2:
        rep.meta["slope"] = loglog_slope(xs, ys)
    return rep


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def run_two_level(cfg: RunConfig) -> ExperimentReport:
    rep = ExperimentReport(cfg, ("N_h", "p", "m_rule", "m", "N_it", "rho"))
    form = cfg.form[0]
    for rule in cfg.m_rule:
        for p in cfg.p:
            for n in cfg.n:
                h = _hierarchy(cfg, n, p, form, 2, rule)
                F, z0, _ = _problem(cfg, h)
                res = iterate_to_tolerance(lambda b, z: two_level(h, b, z), h.finest.A, F, z0,
                                           cfg.tol, cfg.max_iter)
                rep.rows.append((n**cfg.dim, p, rule, h.finest.m, res.iterations, res.rate))
    return rep


def run_wcycle(cfg: RunConfig) -> ExperimentReport:
    rep = ExperimentReport(cfg, ("dim", "form", "N_h", "p", "m_rule", "N_it", "rho"))
    rules = cfg.m_rule or (None,)
    for form in cfg.form:
        for rule in rules:
            for n in cfg.n:
                for p in cfg.p:
                    h = _hierarchy(cfg, n, p, form, cfg.K[0] if cfg.K else None, rule)
                    F, z0, _ = _problem(cfg, h)
                    res = iterate_to_tolerance(lambda b, z: wcycle(h, p, b, z), h.finest.A, F, z0,
                                               cfg.tol, cfg.max_iter)
                    rep.rows.append((cfg.dim, form, n**cfg.dim, p, _rule_label(h.config.rule),
                                     res.iterations, res.rate))
    return rep


def run_op_complexity(cfg: RunConfig) -> ExperimentReport:
    rep = ExperimentReport(cfg, ("dim", "N_h", "p", "C_O"))
    for n in cfg.n:
        for p in cfg.p:
            h = _hierarchy(cfg, n, p, cfg.form[0], None, "p")
            rep.rows.append((cfg.dim, n**cfg.dim, p, operator_complexity(h)))
    return rep


def run_compare(cfg: RunConfig) -> ExperimentReport:
    rep = ExperimentReport(cfg, ("p", "m", "K", "rho"))
    Ks = cfg.K or (2,)
    for n in cfg.n:
        for p in cfg.p:
            for rule in cfg.m_rule:
                for K in Ks:
                    if K > p:
                        continue
                    h = _hierarchy(cfg, n, p, cfg.form[0], K, rule)
                    F, z0, _ = _problem(cfg, h)
                    res = iterate_to_tolerance(lambda b, z: wcycle(h, p, b, z), h.finest.A, F, z0,
                                               cfg.tol, cfg.max_iter)
                    rep.rows.append((p, h.finest.m, K, res.rate))
    return rep


def run_gmres(cfg: RunConfig) -> ExperimentReport:
    rep = ExperimentReport(cfg, ("dim", "N_h", "p", "preconditioned", "N_GMRES"))
    rules = cfg.m_rule or (None,)
    gcfg = GmresConfig(rel_tol=cfg.tol)
    for n in cfg.n:
        for p in cfg.p:
            h = _hierarchy(cfg, n, p, cfg.form[0], cfg.K[0] if cfg.K else None, rules[0])
            F, _, _ = _problem(cfg, h)
            pre = gmres_solve(h.finest.A, F, lambda r: wcycle(h, p, r, np.zeros_like(r)), gcfg)
            plain = gmres_solve(h.finest.A, F, None, gcfg)
            rep.rows.append((cfg.dim, n**cfg.dim, p, True, pre.iterations))
            rep.rows.append((cfg.dim, n**cfg.dim, p, False, plain.iterations))
    return rep


def run_error_order(cfg: RunConfig) -> ExperimentReport:
    rep = ExperimentReport(cfg, ("dim", "N_h", "k", "energy_error", "l2_error", "energy_order", "l2_order"))
    for k in cfg.p:
        prev = None
        for n in sorted(cfg.n):
            mesh = _mesh(cfg, n)
            space = DgSpace(mesh, k)
            level = assemble_level(space, PenaltyConfig(cfg.alpha0))
            u, gu, f = manufactured_solution(mesh)
            uh = linalg.direct_solve(level.A, assemble_load(space, f, q=k + 4))
            e, l2 = dg_error_norms(space, uh, u, gu)
            if prev is None:
                orders = ("", "")
            else:
                ratio = np.log(mesh.h / prev[0])
                orders = (np.log(e / prev[1]) / ratio, np.log(l2 / prev[2]) / ratio)
            rep.rows.append((cfg.dim, n**cfg.dim, k, e, l2, *orders))
            prev = (mesh.h, e, l2)
    return rep


RUNNERS = {
    "solve": run_solve,
    "smooth_ratio": run_smooth_ratio,
    "two_level": run_two_level,
    "wcycle": run_wcycle,
    "op_complexity": run_op_complexity,
    "compare": run_compare,
    "gmres": run_gmres,
    "error_order": run_error_order,
}


def run(cfg: RunConfig) -> ExperimentReport:
    return RUNNERS[cfg.experiment](cfg.validate())


# command line ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pmgdg", description="p-multigrid for SIPDG: reproduction runs")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name.replace("_", "-"))
        sp.add_argument("--config", help="flat key = value config file")
        sp.add_argument("--dim", type=int)
        sp.add_argument("--n", help="elements per axis, e.g. 8,16,32")
        sp.add_argument("--p", help="degrees, e.g. 2-6")
        sp.add_argument("--m-rule", dest="m_rule", help="k | p | <int> | p^<gamma>, comma separated")
        sp.add_argument("--K", help="number of levels")
        sp.add_argument("--form", help="inherited | non-inherited, comma separated")
        sp.add_argument("--alpha0", type=float)
        sp.add_argument("--tol", type=float)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--omega", choices=OMEGA_METHODS)
        sp.add_argument("--sweep", choices=("m", "k", "h"))
        sp.add_argument("--box", help="lower,upper")
        sp.add_argument("--max-iter", dest="max_iter", type=int)
        sp.add_argument("--out", help="CSV output path (stdout if omitted)")
        sp.add_argument("--allow-3d", dest="allow_3d", action="store_true", default=None)
        sp.add_argument("--dump-matrices", dest="dump_matrices")
        sp.add_argument("--force", action="store_true", default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    experiment = args.command.replace("-", "_")
    try:
        overrides = read_config_file(args.config) if args.config else {}
        if overrides.pop("experiment", experiment) != experiment:
            raise ConfigError("config file names a different experiment")
        flags = {k: v for k, v in vars(args).items() if k not in ("command", "config") and v is not None}
        overrides.update(flags)
        cfg = make_config(experiment, overrides)
        report = run(cfg)
        if cfg.out:
            write_report(report, cfg.out, force=cfg.force)
        else:
            sys.stdout.write(report.to_csv())
    except (ConfigError, ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, DivergenceError) as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
