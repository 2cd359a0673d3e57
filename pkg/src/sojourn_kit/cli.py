"""Command line front end: JSON problem in, CSV out.

    sojourn-kit <transform|joint|localtime|invert|mc|compare> --config FILE
                [--output FILE|-] [--check-integral] [--experimental] [--quiet]

Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 compare FAIL.
SOJOURN_KIT_THREADS caps the number of worker threads.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from importlib import resources

import jsonschema
import numpy as np

from .bases import make_basis
from .core import (ConfigError, LaplaceParams, NumericalError, PointSet, SojournError,
                   Unsupported, make_interval_union)
from .inversion import (InversionConfig, expectation_at_time, local_time_expectation_at_time,
                        sojourn_cdf_experimental)
from .joint import integrate_psi_over_y, solve_psi
from .localtime import solve_local_time
from .montecarlo import SimConfig, estimate_local_time_transform, estimate_sojourn_transform
from .transfer import assemble, solve_phi

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_FAIL = 0, 2, 3, 4
COMMANDS = ("transform", "joint", "localtime", "invert", "mc", "compare")


class QueryFailed(Exception):
    def __init__(self, query: dict, err: Exception):
        super().__init__(f"{err} (query: {json.dumps(query, sort_keys=True)})")
        self.query = query
        self.err = err


def load_schema() -> dict:
    return json.loads(resources.files("sojourn_kit").joinpath("schema/problem.schema.json").read_text())


def load_config(path: str) -> dict:
    try:
        text = sys.stdin.read() if path == "-" else open(path, encoding="utf-8").read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path!r}: {e.strerror}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"malformed JSON at line {e.lineno}, column {e.colno}: {e.msg}") from None
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config field '{where}': {e.message}")
    mode = cfg["mode"]
    key = "points" if mode == "localtime" else "intervals"
    if key not in cfg:
        raise ConfigError(f"config field '{key}' is required for mode '{mode}'")
    if len(cfg["mu"]) != len(cfg[key]):
        raise ConfigError(f"config field 'mu' has {len(cfg['mu'])} entries but '{key}' has {len(cfg[key])}")


# ---------------------------------------------------------------------------
# config helpers
# ---------------------------------------------------------------------------

def _grid(query: dict, name: str, required: bool = True) -> list[float]:
    if name in query:
        return [float(query[name])]
    g = query.get(name + "Grid")
    if g is None:
        if required:
            raise ConfigError(f"config field 'query/{name}' (or '{name}Grid') is required")
        return []
    if isinstance(g, dict):
        return [float(v) for v in np.linspace(g["start"], g["stop"], g["num"])]
    return [float(v) for v in g]


def _positive_grid(query, name, required=True):
    vals = _grid(query, name, required)
    for v in vals:
        if not v > 0:
            raise ConfigError(f"config field 'query/{name}Grid' must be positive, got {v}")
    return vals


def _basis(cfg):
    d = cfg.get("diffusion", {})
    return make_basis(d.get("kind", "brownian"), d.get("sigma"), d.get("drift"))


def _set(cfg):
    if cfg["mode"] == "localtime":
        return PointSet(tuple(cfg["points"]))
    return make_interval_union(cfg["intervals"])


def _order(cfg) -> int:
    return int(cfg.get("inversion", {}).get("order", 14))


def _sim(cfg, t: float) -> SimConfig:
    mc = cfg.get("mc")
    if mc is None:
        raise ConfigError("config field 'mc' is required for this command")
    return SimConfig(paths=int(mc["paths"]), dt=float(mc["dt"]), t=t, seed=int(mc.get("seed", 0)),
                     scheme=mc.get("scheme", "exact"), antithetic=bool(mc.get("antithetic", False)))


def _require_mode(cfg, *modes):
    if cfg["mode"] not in modes:
        raise ConfigError(f"config field 'mode' must be one of {modes} for this command, got '{cfg['mode']}'")


def thread_count() -> int:
    env = os.environ.get("SOJOURN_KIT_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"SOJOURN_KIT_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigError("SOJOURN_KIT_THREADS must be >= 1")
        return n
    return cap


def _pmap(fn, items, threads):
    """Ordered map; exceptions are re-raised with the failing query attached."""

    def wrapped(item):
        try:
            return fn(item)
        except (NumericalError, ArithmeticError) as e:
            raise QueryFailed(item, e) from e

    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(wrapped, items))
    return [wrapped(i) for i in items]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def to_csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _mu_cols(cfg):
    return [f"mu_{i}" for i in range(1, len(cfg["mu"]) + 1)]


# ---------------------------------------------------------------------------
# commands; each returns (header, rows, exit status)
# ---------------------------------------------------------------------------

def cmd_transform(cfg, args=None, threads=1):
    _require_mode(cfg, "sojourn")
    basis, E, mu = _basis(cfg), _set(cfg), tuple(cfg["mu"])
    xs, lams = _grid(cfg["query"], "x"), _positive_grid(cfg["query"], "lambda")
    sols = dict(zip(lams, _pmap(lambda q: solve_phi(basis, E, LaplaceParams(q["lambda"], mu)),
                                [{"lambda": lam} for lam in lams], threads)))
    rows = [[x, lam, *mu, sols[lam].value(x)] for x in xs for lam in lams]
    return ["x", "lambda", *_mu_cols(cfg), "phi"], rows, EXIT_OK


def cmd_joint(cfg, args=None, threads=1):
    _require_mode(cfg, "joint", "sojourn")
    basis, E, mu = _basis(cfg), _set(cfg), tuple(cfg["mu"])
    q = cfg["query"]
    xs, ys, lams = _grid(q, "x"), _grid(q, "y"), _positive_grid(q, "lambda")
    check = bool(args and args.check_integral)

    def one(item):
        params = LaplaceParams(item["lambda"], mu)
        sol = solve_psi(basis, E, params, item["y"], assembly=assemble(basis, E, params))
        return [sol.value(x) for x in xs]

    items = [{"y": y, "lambda": lam} for y in ys for lam in lams]
    vals = dict(zip([(i["y"], i["lambda"]) for i in items], _pmap(one, items, threads)))
    resid = {}
    if check:
        def res(item):
            params = LaplaceParams(item["lambda"], mu)
            return (integrate_psi_over_y(basis, E, params, item["x"])
                    - solve_phi(basis, E, params).value(item["x"]))

        pairs = [{"x": x, "lambda": lam} for x in xs for lam in lams]
        resid = dict(zip([(p["x"], p["lambda"]) for p in pairs], _pmap(res, pairs, threads)))
    header = ["x", "y", "lambda", *_mu_cols(cfg), "psi"] + (["integral_residual"] if check else [])
    rows = []
    for ix, x in enumerate(xs):
        for y in ys:
            for lam in lams:
                row = [x, y, lam, *mu, vals[(y, lam)][ix]]
                if check:
                    row.append(resid[(x, lam)])
                rows.append(row)
    return header, rows, EXIT_OK


def cmd_localtime(cfg, args=None, threads=1):
    _require_mode(cfg, "localtime")
    basis, pts, mu = _basis(cfg), _set(cfg), tuple(cfg["mu"])
    xs, lams = _grid(cfg["query"], "x"), _positive_grid(cfg["query"], "lambda")
    sols = dict(zip(lams, _pmap(lambda q: solve_local_time(pts, LaplaceParams(q["lambda"], mu), basis),
                                [{"lambda": lam} for lam in lams], threads)))
    rows = [[x, lam, *mu, sols[lam].value(x)] for x in xs for lam in lams]
    return ["x", "lambda", *_mu_cols(cfg), "transform"], rows, EXIT_OK


def _inverted(cfg, x, t):
    mu = tuple(cfg["mu"])
    order = InversionConfig(t=t, order=_order(cfg))
    if cfg["mode"] == "localtime":
        if cfg.get("diffusion", {}).get("kind", "brownian") != "brownian":
            raise Unsupported("local times are only available for the 'brownian' diffusion")
        return local_time_expectation_at_time(_set(cfg), mu, x, t, order, details=True)
    return expectation_at_time(_basis(cfg), _set(cfg), mu, x, t, order, details=True)


def cmd_invert(cfg, args=None, threads=1):
    _require_mode(cfg, "sojourn", "localtime")
    q = cfg["query"]
    xs, ts = _grid(q, "x"), _positive_grid(q, "t")
    experimental = bool(args and args.experimental) or cfg.get("inversion", {}).get("experimental2d", False)
    items = [{"x": x, "t": t} for x in xs for t in ts]
    ests = _pmap(lambda i: _inverted(cfg, i["x"], i["t"]), items, threads)
    mu = tuple(cfg["mu"])
    if not experimental:
        rows = [[i["x"], i["t"], *mu, e.value, e.clamped] for i, e in zip(items, ests)]
        return ["x", "t", *_mu_cols(cfg), "expectation", "clamped"], rows, EXIT_OK
    _require_mode(cfg, "sojourn")
    ss = _positive_grid(q, "s")
    basis, E = _basis(cfg), _set(cfg)
    cfg_inv = InversionConfig(order=_order(cfg))
    items2 = [{"x": i["x"], "t": i["t"], "s": s} for i in items for s in ss]
    cdfs = _pmap(lambda i: sojourn_cdf_experimental(basis, E, i["x"], i["t"], i["s"], cfg_inv),
                 items2, threads)
    rows = [[i["x"], i["t"], i["s"], c] for i, c in zip(items2, cdfs)]
    return ["x", "t", "s", "cdf_experimental"], rows, EXIT_OK


def _mc(cfg, x, t, threads):
    sim = _sim(cfg, t)
    mu = tuple(cfg["mu"])
    if cfg["mode"] == "localtime":
        band = cfg["mc"].get("band")
        if band is None:
            raise ConfigError("config field 'mc/band' is required for mode 'localtime'")
        return estimate_local_time_transform(_set(cfg), mu, x, sim, band, threads)
    return estimate_sojourn_transform(_basis(cfg), _set(cfg), mu, x, sim, threads)


def cmd_mc(cfg, args=None, threads=1):
    _require_mode(cfg, "sojourn", "localtime")
    q = cfg["query"]
    xs, ts = _grid(q, "x"), _positive_grid(q, "t")
    rows = []
    for x in xs:
        for t in ts:
            e = _mc(cfg, x, t, threads)
            rows.append([x, t, *cfg["mu"], e.mean, e.std_error, e.paths, e.dt])
    return ["x", "t", *_mu_cols(cfg), "mean", "std_error", "paths", "dt"], rows, EXIT_OK


def cmd_compare(cfg, args=None, threads=1):
    _require_mode(cfg, "sojourn", "localtime")
    q = cfg["query"]
    xs, ts = _grid(q, "x"), _positive_grid(q, "t")
    comp = cfg.get("compare", {})
    abs_tol = float(comp.get("absTol", 5e-3))
    sig = float(comp.get("seSigmas", 3.0))
    rows, status = [], EXIT_OK
    for x in xs:
        for t in ts:
            inv = _inverted(cfg, x, t).value
            e = _mc(cfg, x, t, threads)
            diff = abs(inv - e.mean)
            tol = sig * e.std_error + abs_tol
            ok = diff <= tol
            status = status if ok else EXIT_FAIL
            rows.append([x, t, inv, e.mean, e.std_error, diff, tol, "PASS" if ok else "FAIL"])
    return ["x", "t", "inverted", "mc_mean", "mc_std_error", "abs_diff", "tolerance", "verdict"], rows, status


DISPATCH = {
    "transform": cmd_transform,
    "joint": cmd_joint,
    "localtime": cmd_localtime,
    "invert": cmd_invert,
    "mc": cmd_mc,
    "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sojourn-kit",
                                description="Laplace transforms of sojourn and local times of diffusions")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON problem file ('-' for stdin)")
    p.add_argument("--output", default="-", help="CSV destination ('-' for stdout, the default)")
    p.add_argument("--check-integral", action="store_true",
                   help="joint: add the residual of the y-integral of psi against phi")
    p.add_argument("--experimental", action="store_true",
                   help="invert: also invert in mu toward P(T_t <= s) (unvalidated accuracy)")
    p.add_argument("--quiet", action="store_true", help="no progress or summary on stderr")
    return p


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK

    def say(msg):
        if not args.quiet:
            print(msg, file=stderr)

    start = time.perf_counter()
    try:
        cfg = load_config(args.config)
        threads = thread_count()
        header, rows, status = DISPATCH[args.command](cfg, args, threads)
    except QueryFailed as e:
        print(f"sojourn-kit: numerical error: {e}", file=stderr)
        return EXIT_NUMERIC
    except (ConfigError, Unsupported) as e:
        print(f"sojourn-kit: configuration error: {e}", file=stderr)
        return EXIT_CONFIG
    except (NumericalError, SojournError, ArithmeticError) as e:
        print(f"sojourn-kit: numerical error: {e}", file=stderr)
        return EXIT_NUMERIC
    text = to_csv(header, rows)
    if args.output == "-":
        stdout.write(text)
    else:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    say(f"sojourn-kit {args.command}: {len(rows)} rows in {time.perf_counter() - start:.2f}s")
    if status == EXIT_FAIL:
        say("sojourn-kit compare: FAIL")
    return status


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
