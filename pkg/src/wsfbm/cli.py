"""Command-line front end: simulate | gram | fit | predict | bench | kernel2d.

Every command is deterministic given its flags, config file, and seed.
Option resolution precedence is flag > config file > built-in default; the
config file holds ``key = value`` lines (keys match the long option names
with dashes or underscores).  Tabular outputs are comma-separated with a
header row, and every output gets a ``.meta`` sidecar echoing the resolved
configuration and tool version.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 non-convergence (fit result still written).
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__, bench, inference, kernels, processes, rdkernels
from .kernels import KernelError, KernelSpec, PSDRepairError, TimeGrid
from .quadrature import NaNIntegrandError, QuadConfig, QuadratureError

_ENV_WORKERS = "WSFBM_WORKERS"


class ConfigError(ValueError):
    pass


class NonConvergence(RuntimeError):
    pass


def _read_config(path):
    values = {}
    try:
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"bad config line: {line!r}")
                key, _, val = line.partition("=")
                values[key.strip().replace("-", "_")] = val.strip()
        return values
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")


class Options:
    """Flag > config file > default resolution for one command invocation."""

    def __init__(self, args):
        self.args = vars(args)
        cfg_path = self.args.get("config")
        self.file_values = _read_config(cfg_path) if cfg_path else {}
        self.resolved = {}

    def get(self, name, default=None, cast=str, required=False):
        flag = self.args.get(name)
        if flag is not None:
            value = flag
        elif name in self.file_values:
            raw = self.file_values[name]
            try:
                value = cast(raw) if cast is not bool else raw.lower() in (
                    "1", "true", "yes", "on")
            except ValueError:
                raise ConfigError(f"config value {name}={raw!r} is not {cast}")
        else:
            value = default
        if value is None and required:
            raise ConfigError(f"missing required option --{name.replace('_','-')}")
        self.resolved[name] = value
        return value


def _quad_config(opts) -> QuadConfig:
    abs_tol = opts.get("abs_tol", 1e-10, float)
    rel_tol = opts.get("rel_tol", 1e-8, float)
    try:
        return QuadConfig(abs_tol=abs_tol, rel_tol=rel_tol)
    except ValueError as exc:
        raise ConfigError(str(exc))


def _weight(opts):
    family = opts.get("family", required=True).lower()
    a = opts.get("a", None, float)
    if family == "c1":
        if a is None:
            raise ConfigError("family c1 needs --a")
        return kernels.PowerLawWeight(a), "C1"
    if family == "c2":
        if a is None:
            raise ConfigError("family c2 needs --a")
        return kernels.ExponentialWeight(a), "C2"
    if family == "const":
        c = opts.get("c", 1.0, float)
        return kernels.ConstantWeight(c), "const"
    raise ConfigError(f"unknown family {family!r} (c1 | c2 | const)")


def _kernel_spec(opts) -> KernelSpec:
    weight, _ = _weight(opts)
    if opts.get("log", False, bool):
        return KernelSpec.log_kernel(weight)
    b = opts.get("b", None, float)
    if b is None:
        raise ConfigError("need --b or --log")
    try:
        return KernelSpec(weight, b)
    except KernelError as exc:
        raise ConfigError(str(exc))


def _grid(opts) -> TimeGrid:
    horizon = opts.get("horizon", required=True, cast=float)
    n = opts.get("n", required=True, cast=int)
    try:
        return TimeGrid.uniform(horizon, n)
    except KernelError as exc:
        raise ConfigError(str(exc))


def _out_path(opts, name):
    out_dir = opts.get("out", ".")
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, name)


def _write_meta(path, opts, extra=None):
    with open(path + ".meta", "w") as fh:
        fh.write(f"tool_version = {__version__}\n")
        for key, value in sorted(opts.resolved.items()):
            fh.write(f"{key} = {value}\n")
        for key, value in (extra or {}).items():
            fh.write(f"{key} = {value}\n")


def _load_observations(path):
    try:
        rows = np.genfromtxt(path, delimiter=",", names=True)
    except OSError as exc:
        raise ConfigError(f"cannot read input file {path}: {exc}")
    names = rows.dtype.names
    if names is None:
        raise ConfigError(f"{path} is not a headed CSV file")
    if "path_id" in names:
        mask = rows["path_id"] == rows["path_id"][0]
        rows = rows[mask]
    if not {"t", "value"} <= set(names):
        raise ConfigError(f"{path} needs 't' and 'value' columns")
    t = np.asarray(rows["t"], dtype=float)
    v = np.asarray(rows["value"], dtype=float)
    if np.any(np.isnan(t)) or np.any(np.isnan(v)):
        raise ConfigError(f"{path} contains unparsable or missing numbers")
    order = np.argsort(t)
    return t[order], v[order]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(opts) -> int:
    process = opts.get("process", required=True).lower()
    n_paths = opts.get("paths", 1, int)
    seed = opts.get("seed", None, int)
    if seed is None:
        raise ConfigError("simulate requires an explicit --seed")
    grid = _grid(opts)
    cfg = _quad_config(opts)
    spec = _kernel_spec(opts)
    if process == "wsfbm":
        method = opts.get("method", None, int)
        if method is None:
            gm = kernels.gram_fast(spec, grid)
        else:
            gm = kernels.gram(spec, grid, method=method, cfg=cfg)
        paths = processes.sample_paths(gm, grid, n_paths, seed)
    elif process == "ou":
        ou = processes.OUSpec(spec, beta=opts.get("beta", required=True, cast=float),
                              sigma=opts.get("sigma", 1.0, float),
                              v0=opts.get("v0", 0.0, float))
        paths = processes.ou_sample(ou, grid, n_paths, seed, cfg)
    elif process == "geometric":
        geom = processes.GeomSpec(spec, mu=opts.get("mu", required=True, cast=float),
                                  sigma=opts.get("sigma", 1.0, float),
                                  s0=opts.get("s0", 1.0, float))
        paths = processes.geometric_sample(geom, grid, n_paths, seed, cfg)
    else:
        raise ConfigError(f"unknown process {process!r}")
    out = _out_path(opts, "paths.csv")
    with open(out, "w") as fh:
        fh.write("path_id,t,value\n")
        for path in paths:
            for t, v in zip(path.grid.points, path.values):
                fh.write(f"{path.path_id},{float(t)!r},{float(v)!r}\n")
    _write_meta(out, opts)
    print(out)
    return 0


def cmd_gram(opts) -> int:
    spec = _kernel_spec(opts)
    grid = _grid(opts)
    method = opts.get("method", 1, int)
    if method not in kernels.METHOD_NAMES:
        raise ConfigError(f"method must be 1..4, got {method}")
    gm = kernels.gram(spec, grid, method=method, cfg=_quad_config(opts))
    out = _out_path(opts, "gram.csv")
    tt = grid.interior
    with open(out, "w") as fh:
        fh.write("i,j,t_i,t_j,value\n")
        for i in range(gm.dim):
            for j in range(i + 1):
                fh.write(f"{i + 1},{j + 1},{float(tt[i])!r},{float(tt[j])!r},"
                         f"{float(gm.entries[i, j])!r}\n")
    _write_meta(out, opts, {"jitter_applied": gm.jitter_applied,
                            "quad_failures": gm.quad_failures})
    print(out)
    return 0


def _write_fit(path, fit):
    with open(path, "w") as fh:
        fh.write(f"family = {fit.family}\n")
        fh.write(f"a_hat = {fit.a_hat!r}\n")
        fh.write(f"b_hat = {fit.b_hat!r}\n")
        fh.write(f"loglik = {fit.loglik!r}\n")
        fh.write(f"aic = {fit.aic!r}\n")
        fh.write(f"ci_a_lo = {fit.ci_a[0]!r}\nci_a_hi = {fit.ci_a[1]!r}\n")
        fh.write(f"ci_b_lo = {fit.ci_b[0]!r}\nci_b_hi = {fit.ci_b[1]!r}\n")
        fh.write(f"convergence = {str(fit.convergence).lower()}\n")
        fh.write(f"k = {fit.k}\n")
        for name, curve in (("profile_a", fit.profile_a),
                            ("profile_b", fit.profile_b)):
            fh.write(f"[{name}]\n")
            for theta, ll in curve:
                fh.write(f"{float(theta)!r},{float(ll)!r}\n")


def read_fit_file(path):
    """Parse the structured text emitted by the fit command."""
    values = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("["):
                break_on = line.startswith("[")
                if break_on:
                    break
                continue
            key, _, val = line.partition("=")
            values[key.strip()] = val.strip()
    return values


def cmd_fit(opts) -> int:
    path = opts.get("input", required=True)
    t, v = _load_observations(path)
    if t[0] != 0.0:
        t = np.concatenate([[0.0], t])
        v = np.concatenate([[0.0], v])
    try:
        data = inference.Dataset(TimeGrid(t), v)
    except (KernelError, inference.InferenceError) as exc:
        raise ConfigError(str(exc))
    family = opts.get("family", required=True).upper()
    if family not in inference.FAMILIES:
        raise ConfigError(f"fit family must be C1 or C2, got {family}")
    fix_b = opts.get("fix_b", None, float)
    level = opts.get("level", 0.95, float)
    fit = inference.fit_mle(data, family, fix_b=fix_b, ci_level=level)
    out = _out_path(opts, "fit.txt")
    _write_fit(out, fit)
    _write_meta(out, opts)
    print(out)
    if not fit.convergence:
        raise NonConvergence("fit did not converge (result written)")
    return 0


def cmd_predict(opts) -> int:
    path = opts.get("input", required=True)
    seed = opts.get("seed", None, int)
    if seed is None:
        raise ConfigError("predict requires an explicit --seed")
    t, v = _load_observations(path)
    if t[0] != 0.0:
        t = np.concatenate([[0.0], t])
        v = np.concatenate([[0.0], v])
    data = inference.Dataset(TimeGrid(t), v)
    fit_path = opts.get("fit", None)
    if fit_path:
        vals = read_fit_file(fit_path)
        family = vals["family"]
        a_hat, b_hat = float(vals["a_hat"]), float(vals["b_hat"])
    else:
        family = opts.get("family", required=True).upper()
        a_hat = opts.get("a", required=True, cast=float)
        b_hat = opts.get("b", required=True, cast=float)
    horizon_n = opts.get("horizon_n", 0, int)
    n_sims = opts.get("sims", 1000, int)
    step = float(np.mean(np.diff(data.grid.points)))
    horizon = data.grid.horizon + step * np.arange(1, horizon_n + 1)
    fit = inference.FitResult(family, a_hat, b_hat, 0.0, 0.0, (0, 0), (0, 0),
                              np.empty((0, 2)), np.empty((0, 2)), True)
    pred = inference.predict(data, fit, horizon, n_sims, seed)
    out = _out_path(opts, "prediction.csv")
    with open(out, "w") as fh:
        fh.write("t,mean,cond_sd,band_lo,band_hi\n")
        for row in zip(pred.times, pred.mean, pred.cond_sd, pred.band_lo,
                       pred.band_hi):
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
    extra = {}
    truth_path = opts.get("truth", None)
    if truth_path and horizon_n > 0:
        tt, tv = _load_observations(truth_path)
        take = np.isin(np.round(tt, 10), np.round(horizon, 10))
        if np.count_nonzero(take) == horizon_n:
            extra["mse"] = inference.mse(pred.mean, tv[take])
            print(f"mse = {extra['mse']!r}")
    _write_meta(out, opts, extra)
    print(out)
    return 0


def cmd_bench(opts) -> int:
    family_key = opts.get("family", required=True).lower()
    family = {"c1": "C1", "c2": "C2", "const": "const"}.get(family_key)
    if family is None:
        raise ConfigError(f"unknown family {family_key!r}")
    a = opts.get("a", required=True, cast=float)
    b = None if opts.get("log", False, bool) else opts.get(
        "b", required=True, cast=float)
    sizes = [int(s) for s in str(opts.get("sizes", "100")).split(",")]
    methods = [int(m) for m in str(opts.get("methods", "1,2,3,4")).split(",")]
    repeats = opts.get("repeats", 5, int)
    workers = opts.get("workers", None, int)
    if workers is None:
        workers = int(os.environ.get(_ENV_WORKERS, "1"))
    try:
        report = bench.run_bench(family, a, b, sizes, methods, repeats,
                                 cfg=_quad_config(opts), workers=workers)
    except bench.BenchError as exc:
        raise ConfigError(str(exc))
    times_out = _out_path(opts, "bench_times.csv")
    acc_out = _out_path(opts, "bench_accuracy.csv")
    bench.write_report(report, times_out, acc_out)
    _write_meta(times_out, opts, {"environment": report.environment})
    print(times_out)
    print(acc_out)
    return 0


def cmd_kernel2d(opts) -> int:
    kind = opts.get("kind", required=True).lower()
    radius = opts.get("ball_radius", 1.0, float)
    geom = rdkernels.SetGeometry((0.0, 0.0), radius)
    wkind = opts.get("weight", "power").lower()
    a = opts.get("a", 0.0, float)
    if wkind == "power":
        weight = rdkernels.RadialPowerWeight(a)
    elif wkind == "exp":
        weight = rdkernels.RadialExponentialWeight(a)
    else:
        raise ConfigError(f"unknown radial weight {wkind!r} (power | exp)")
    p_raw = opts.get("p", "2,2")
    try:
        p = tuple(float(x) for x in str(p_raw).split(","))
    except ValueError:
        raise ConfigError(f"bad reference point {p_raw!r}")
    if len(p) != 2:
        raise ConfigError("reference point must be 2-dimensional")
    nx = opts.get("nx", 21, int)
    ny = opts.get("ny", 21, int)
    xs = np.linspace(opts.get("xmin", -3.0, float), opts.get("xmax", 3.0, float), nx)
    ys = np.linspace(opts.get("ymin", -3.0, float), opts.get("ymax", 3.0, float), ny)
    cfg = _quad_config(opts)
    h_index = opts.get("h", 0.4, float)
    stat_name = opts.get("stationary", "doubleexp").lower()
    stationary = {
        "doubleexp": rdkernels.DoubleExp(opts.get("sigma", 1.0, float),
                                         opts.get("beta", 1.0, float)),
        "matern": rdkernels.Matern(opts.get("kappa", 1.5, float),
                                   opts.get("rho", 1.0, float)),
        "rq": rdkernels.RationalQuadratic(opts.get("sigma", 1.0, float),
                                          opts.get("rho", 1.0, float),
                                          opts.get("kappa", 1.5, float)),
        "periodic": rdkernels.Periodic(opts.get("sigma", 1.0, float),
                                       opts.get("rho", 1.0, float),
                                       opts.get("beta", 1.0, float)),
    }.get(stat_name)
    if stationary is None:
        raise ConfigError(f"unknown stationary kernel {stat_name!r}")

    def evaluate(pt):
        if kind == "kplus":
            return rdkernels.k_haf(geom, weight, h_index, "+", pt, p, cfg)
        if kind == "kminus":
            return rdkernels.k_haf(geom, weight, h_index, "-", pt, p, cfg)
        if kind == "caf":
            return rdkernels.c_af(geom, weight, pt, p, cfg)
        if kind == "mixed":
            return rdkernels.mixed_cov(stationary, geom, weight, pt, p, cfg)
        raise ConfigError(f"unknown kind {kind!r} (kplus|kminus|caf|mixed)")

    out = _out_path(opts, "kernel2d.csv")
    with open(out, "w") as fh:
        fh.write("x,y,value\n")
        for x in xs:
            for y in ys:
                fh.write(f"{float(x)!r},{float(y)!r},"
                         f"{float(evaluate((x, y)))!r}\n")
    _write_meta(out, opts)
    print(out)
    return 0


# ---------------------------------------------------------------------------

def _add_common(sub):
    sub.add_argument("--config", help="key = value option file")
    sub.add_argument("--out", help="output directory (default .)")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--abs-tol", dest="abs_tol", type=float)
    sub.add_argument("--rel-tol", dest="rel_tol", type=float)
    sub.add_argument("--method", type=int, help="Gram method 1..4")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wsfbm",
        description="Weighted sub-fractional Brownian motion toolkit")
    subs = parser.add_subparsers(dest="command", required=True)

    sim = subs.add_parser("simulate", help="simulate process paths")
    sim.add_argument("--process", choices=["wsfbm", "ou", "geometric"])
    for flag, typ in [("--family", str), ("--a", float), ("--c", float),
                      ("--b", float), ("--horizon", float), ("--n", int),
                      ("--paths", int), ("--beta", float), ("--sigma", float),
                      ("--v0", float), ("--mu", float), ("--s0", float)]:
        sim.add_argument(flag, type=typ)
    sim.add_argument("--log", action="store_const", const=True)
    _add_common(sim)

    gr = subs.add_parser("gram", help="write a covariance matrix")
    for flag, typ in [("--family", str), ("--a", float), ("--c", float),
                      ("--b", float), ("--horizon", float), ("--n", int)]:
        gr.add_argument(flag, type=typ)
    gr.add_argument("--log", action="store_const", const=True)
    _add_common(gr)

    fit = subs.add_parser("fit", help="maximum-likelihood fit of (a, b)")
    fit.add_argument("--input")
    fit.add_argument("--family")
    fit.add_argument("--fix-b", dest="fix_b", type=float)
    fit.add_argument("--level", type=float)
    _add_common(fit)

    pred = subs.add_parser("predict", help="conditional prediction")
    pred.add_argument("--input")
    pred.add_argument("--fit")
    pred.add_argument("--family")
    pred.add_argument("--a", type=float)
    pred.add_argument("--b", type=float)
    pred.add_argument("--horizon-n", dest="horizon_n", type=int)
    pred.add_argument("--sims", type=int)
    pred.add_argument("--truth")
    _add_common(pred)

    ben = subs.add_parser("bench", help="benchmark the Gram methods")
    ben.add_argument("--family")
    ben.add_argument("--a", type=float)
    ben.add_argument("--b", type=float)
    ben.add_argument("--log", action="store_const", const=True)
    ben.add_argument("--sizes")
    ben.add_argument("--methods")
    ben.add_argument("--repeats", type=int)
    ben.add_argument("--workers", type=int)
    _add_common(ben)

    k2 = subs.add_parser("kernel2d", help="evaluate a planar kernel on a grid")
    for flag, typ in [("--kind", str), ("--weight", str), ("--a", float),
                      ("--h", float), ("--ball-radius", float), ("--p", str),
                      ("--xmin", float), ("--xmax", float), ("--ymin", float),
                      ("--ymax", float), ("--nx", int), ("--ny", int),
                      ("--stationary", str), ("--sigma", float),
                      ("--beta", float), ("--rho", float), ("--kappa", float)]:
        k2.add_argument(flag, type=typ if typ is not str else str,
                        dest=flag[2:].replace("-", "_"))
    _add_common(k2)
    return parser


_DISPATCH = {
    "simulate": cmd_simulate,
    "gram": cmd_gram,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "bench": cmd_bench,
    "kernel2d": cmd_kernel2d,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    opts = Options(args)
    try:
        return _DISPATCH[args.command](opts)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (KernelError, inference.InferenceError, rdkernels.RdKernelError,
            processes.ProcessError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NonConvergence as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return 4
    except (PSDRepairError, QuadratureError, NaNIntegrandError,
            np.linalg.LinAlgError, OverflowError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
