"""Command-line runner: ``sle-lab <subcommand> [--config FILE] [flags]``.

Settings come from an optional ``key=value`` file and from flags; flags
win.  Exit status is 0 when every check passes, 1 on a statistical failure
and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .ensemble import JOBS_ENV
from .params import DomainError, derive_exponents, zeta_of_lambda
from .stats import dumps


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(x) for x in str(text).replace(" ", "").split(",") if x]


def _ints(text) -> list[int]:
    return [int(round(x)) for x in _floats(text)]


def _complex(text) -> complex:
    return complex(str(text).replace(" ", "").replace("i", "j"))


def _complexes(text) -> list[complex]:
    return [_complex(x) for x in str(text).split(",") if x.strip()]


COMMON = {
    "seed": (int, 0),
    "jobs": (int, None),
    "output_dir": (str, "."),
}

# key -> (parser, default); default REQUIRED marks a mandatory key
REQUIRED = object()

SCHEMAS = {
    "simulate-trace": {
        "kappa": (float, REQUIRED), "T": (float, 1.0), "dt": (float, 1e-3), "index": (int, 0),
        "y0": (float, 0.0), "out": (str, None), "driver_out": (str, None),
    },
    "check-martingale": {
        "kappa": (float, REQUIRED), "r": (float, 1.0), "t": (_floats, [1.0]), "n_paths": (int, 10000),
        "dt": (float, 1e-3), "z": (_complex, 1j), "halvings": (int, 2), "out": (str, None),
    },
    "diffusion-stats": {
        "statistic": (str, "stationarity"), "q": (float, REQUIRED), "r": (float, 1.0), "delta": (float, 0.5),
        "t": (float, 1.0), "x0": (float, 0.0), "n_paths": (int, 20000), "dt": (float, None),
        "snapshots": (int, 5), "scheme": (str, "euler"), "out": (str, None), "kappa": (float, None),
    },
    "derivative-moments": {
        "kappa": (float, REQUIRED), "lambda": (float, None), "t": (_floats, [1, 2, 4, 8, 16, 32, 64]),
        "n_paths": (int, 20000), "dt": (float, 2e-3), "tol": (float, 0.05), "out": (str, None),
    },
    "green-function": {
        "kappa": (float, REQUIRED), "z": (_complexes, [1j, 1 + 1j, 2j]), "eps_list": (_floats, [0.05]),
        "n_paths": (int, 100000), "ds": (float, 1e-3), "band": (float, 0.15), "cstar_band": (float, None),
        "out": (str, None),
    },
    "natural-param": {
        "kappa": (float, REQUIRED), "n_list": (_ints, [64, 128, 256, 512]), "T": (float, 1.0),
        "dt": (float, None), "n_paths": (int, 200), "band": (float, 1.5), "compare": (int, 0),
        "phi0.C": (float, 10.0), "phi0.u": (float, 1.0), "out": (str, None), "series_out": (str, None),
    },
    "estimate-dimension": {
        "kappa": (float, REQUIRED), "method": (str, "box"), "n_paths": (int, 20), "n_points": (int, 20000),
        "T": (float, 1.0), "tol": (float, 0.15), "scales": (_floats, None), "out": (str, None),
    },
    "report-bundle": {
        "dir": (str, REQUIRED), "out": (str, None),
    },
}

ALIASES = {"paths": "n_paths", "lam": "lambda", "eps": "eps_list", "z_list": "z", "t_list": "t"}


def read_config(path) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    for num, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{num}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[ALIASES.get(key, key)] = value
    return out


def resolve_config(command: str, file_values: dict, flag_values: dict) -> dict:
    """Merge file and flag values, apply defaults and validate."""
    schema = dict(COMMON, **SCHEMAS[command])
    merged = dict(file_values)
    merged.update({k: v for k, v in flag_values.items() if v is not None})
    for key in merged:
        if key not in schema:
            raise UsageError(f"unknown key: {key}")
    cfg = {}
    for key, (conv, default) in schema.items():
        if key in merged:
            try:
                cfg[key] = conv(merged[key]) if merged[key] is not None else None
            except (TypeError, ValueError):
                raise UsageError(f"invalid value for key {key}: {merged[key]!r}") from None
        elif default is REQUIRED:
            raise UsageError(f"missing required key: {key}")
        else:
            cfg[key] = default
    if cfg.get("kappa") is not None and not cfg["kappa"] > 0:
        raise UsageError("invalid value for key kappa: must be positive")
    if "n_paths" in cfg and cfg["n_paths"] < 1:
        raise UsageError("invalid value for key n_paths: must be at least 1")
    for key in ("dt", "ds"):
        if cfg.get(key) is not None and not cfg[key] > 0:
            raise UsageError(f"invalid value for key {key}: must be positive")
    return cfg


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def make_report(command: str, cfg: dict, result: dict, passed) -> dict:
    return {
        "command": command,
        "config": cfg,
        "version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "passed": passed,
        "result": result,
    }


def write_report(cfg: dict, command: str, report: dict) -> Path:
    path = Path(cfg.get("out") or Path(cfg["output_dir"]) / f"{command}.json")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(report) + "\n")
    return path


def _status(passed) -> int:
    return 0 if passed in (True, None) else 1


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_simulate_trace(cfg: dict) -> int:
    from .driving import sample_brownian_driver
    from .loewner import trace

    sp = derive_exponents(cfg["kappa"])
    drv = sample_brownian_driver(cfg["T"], cfg["dt"], cfg["seed"], a=sp.a, index=cfg["index"])
    tr = trace(drv, y0=cfg["y0"])
    out = Path(cfg["out"] or Path(cfg["output_dir"]) / "trace.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    tr.to_csv(out)
    if cfg["driver_out"]:
        drv.to_csv(cfg["driver_out"])
    print(f"wrote {tr.points.size} points to {out}")
    return 0


def cmd_check_martingale(cfg: dict) -> int:
    from .martingales import martingale_conservation_test

    sp = derive_exponents(cfg["kappa"])
    res = martingale_conservation_test(
        cfg["r"], sp.a, cfg["z"], cfg["t"], cfg["n_paths"], cfg["dt"], cfg["seed"], cfg["halvings"], cfg["jobs"],
    )
    passed = bool(res["passed"] and res["violations"] == 0)
    write_report(cfg, "check-martingale", make_report("check-martingale", cfg, res, passed))
    for row in res["rows"]:
        print(f"t={row['t']:g} mean={row['estimate']:.5f} stderr={row['stderr']:.5f} "
              f"z={row['zscore']:+.2f} {'PASS' if row['passed'] else 'FAIL'}")
    return _status(passed)


def cmd_diffusion_stats(cfg: dict) -> int:
    from . import diffusion as D

    stat = cfg["statistic"]
    if stat == "stationarity":
        res = D.stationarity_check(cfg["q"], cfg["n_paths"], cfg["dt"] or 1e-2, cfg["seed"],
                                   snapshots=cfg["snapshots"], scheme=cfg["scheme"], jobs=cfg["jobs"])
    elif stat == "exp-moment":
        res = D.exp_moment_check(cfg["q"], cfg["delta"], cfg["t"], cfg["n_paths"], cfg["dt"] or 1e-3,
                                 cfg["seed"], cfg["x0"], scheme=cfg["scheme"], jobs=cfg["jobs"])
    elif stat == "n-martingale":
        res = D.n_martingale_check(cfg["q"], cfg["r"], cfg["t"], cfg["n_paths"], cfg["dt"] or 1e-3,
                                   cfg["seed"], cfg["x0"], scheme=cfg["scheme"], jobs=cfg["jobs"])
    else:
        raise UsageError(f"invalid value for key statistic: {stat!r}")
    passed = bool(res["passed"] and res["violations"] == 0)
    write_report(cfg, "diffusion-stats", make_report("diffusion-stats", cfg, res, passed))
    extra = f" ks={res['ks_distance']:.4f}" if "ks_distance" in res else ""
    print(f"{stat}: estimate={res['estimate']:.5f} target={res['target']:.5f} z={res['zscore']:+.2f}{extra} "
          f"{'PASS' if passed else 'FAIL'}")
    return _status(passed)


def cmd_derivative_moments(cfg: dict) -> int:
    from .martingales import derivative_moment_estimate

    sp = derive_exponents(cfg["kappa"])
    lam = sp.d if cfg["lambda"] is None else cfg["lambda"]
    res = derivative_moment_estimate(lam, sp.a, cfg["t"], cfg["n_paths"], cfg["dt"], cfg["seed"], jobs=cfg["jobs"])
    target = -zeta_of_lambda(lam, sp.a) / 2
    passed = bool(abs(res["slope"] - target) <= cfg["tol"] and res["violations"] == 0)
    res["target_slope"] = target
    write_report(cfg, "derivative-moments", make_report("derivative-moments", cfg, res, passed))
    csv = Path(cfg["output_dir"]) / "derivative-moments.csv"
    rows = np.array([[r["t"], r["estimate"], r["stderr"]] for r in res["rows"]])
    np.savetxt(csv, np.column_stack([np.log(rows[:, 0]), np.log(rows[:, 1]), rows]), delimiter=",",
               header="log_t,log_moment,t,moment,stderr", comments="", fmt="%.17g")
    print(f"slope={res['slope']:.4f} target={target:.4f} {'PASS' if passed else 'FAIL'}")
    return _status(passed)


def cmd_green_function(cfg: dict) -> int:
    from .martingales import green_agreement, one_point_green_estimate

    sp = derive_exponents(cfg["kappa"])
    res = one_point_green_estimate(sp.a, cfg["z"], cfg["eps_list"], cfg["n_paths"], cfg["ds"], cfg["seed"], cfg["jobs"])
    agree = green_agreement(res, cfg["band"], cfg["cstar_band"])
    res["agreement"] = agree
    passed = agree["passed"]
    write_report(cfg, "green-function", make_report("green-function", cfg, res, passed))
    for row in res["table"]:
        print(f"z={row['z']} eps={row['eps']:g} ratio={row['ratio']:.4f} +- {row['ratio_stderr']:.4f}")
    for row in agree["rows"]:
        print(f"eps={row['eps']:g} common={row['common']:.4f} c*={res['c_star']:.4f} "
              f"max_dev={row['max_rel_dev']:.3f} {'PASS' if row['passed'] else 'FAIL'}")
    return _status(passed)


def cmd_natural_param(cfg: dict) -> int:
    from .driving import sample_brownian_driver
    from .natural import candidate_comparison, derivative_sum_ensemble, tau_derivative_sum, trace_weights

    sp = derive_exponents(cfg["kappa"])
    ns = cfg["n_list"]
    dt = cfg["dt"] or 1.0 / (4 * max(ns))
    res = derivative_sum_ensemble(sp.a, ns, cfg["n_paths"], cfg["seed"], cfg["T"], dt, cfg["band"], cfg["jobs"])
    drv = sample_brownian_driver(cfg["T"], dt, cfg["seed"], a=sp.a, index=0)
    if cfg["compare"]:
        res["comparison"] = candidate_comparison(drv, ns, cfg["T"], sp.a)
    events = {}
    for n in ns:
        w, ok = trace_weights(drv, n, cfg["phi0.C"], cfg["phi0.u"], sp.a)
        events[n] = {"pass_rate": float(ok.mean()), "mean_weight": float(w.mean())}
    res["good_events"] = events
    series_dir = Path(cfg["series_out"] or cfg["output_dir"])
    series_dir.mkdir(parents=True, exist_ok=True)
    for n in ns:
        tau_derivative_sum(drv, n, sp.a, t_max=cfg["T"]).to_csv(series_dir / f"tau_derivative_sum_n{n}.csv")
    passed = res["passed"]
    write_report(cfg, "natural-param", make_report("natural-param", cfg, res, passed))
    for row in res["rows"]:
        print(f"n={row['n']} mean tau_n={row['mean']:.4f} +- {row['stderr']:.4f}")
    print(f"max/min={res['max_over_min']:.3f} band={cfg['band']} {'PASS' if passed else 'FAIL'}")
    return _status(passed)


def cmd_estimate_dimension(cfg: dict) -> int:
    from .dimension import METHODS, box_count_dimension, dimension_ensemble

    if cfg["method"] not in METHODS:
        raise UsageError(f"invalid value for key method: {cfg['method']!r}")
    if cfg["scales"] is not None:
        from .driving import sample_brownian_driver
        from .loewner import trace

        sp = derive_exponents(cfg["kappa"])
        est = []
        for i in range(cfg["n_paths"]):
            tr = trace(sample_brownian_driver(cfg["T"], cfg["T"] / cfg["n_points"], cfg["seed"], a=sp.a, index=i))
            est.append(box_count_dimension(tr, cfg["scales"]).slope)
        mean = float(np.mean(est))
        res = {"test": "dimension", "method": "box", "estimates": est, "mean": mean, "target": sp.d,
               "tol": cfg["tol"], "passed": bool(abs(mean - sp.d) <= cfg["tol"])}
    else:
        res = dimension_ensemble(cfg["kappa"], cfg["n_paths"], cfg["n_points"], cfg["seed"], cfg["T"],
                                 cfg["method"], cfg["tol"], cfg["jobs"])
    passed = res.get("passed")
    write_report(cfg, "estimate-dimension", make_report("estimate-dimension", cfg, res, passed))
    status = "REPORT" if passed is None else ("PASS" if passed else "FAIL")
    print(f"{cfg['method']}: mean={res['mean']:.4f} target={res['target']:.4f} {status}")
    return _status(passed)


def _write_table(path: Path, header: str, columns) -> str:
    np.savetxt(path, np.column_stack(columns), delimiter=",", header=header, comments="", fmt="%.17g")
    return path.name


def _plot_tables(directory: Path, stem: str, result: dict) -> list[str]:
    """Plot-ready CSVs for the report kinds that carry tables."""
    out = []
    try:
        if result.get("test") == "derivative_moment":
            rows = result["rows"]
            t = np.array([r["t"] for r in rows])
            m = np.array([r["estimate"] for r in rows])
            out.append(_write_table(directory / f"{stem}_loglog.csv", "log_t,log_moment",
                                    [np.log(t), np.log(m)]))
        if "histogram" in result:
            h = result["histogram"]
            out.append(_write_table(directory / f"{stem}_histogram.csv", "k,density,u_q",
                                    [h["centres"], h["density"], h["u_q"]]))
        if result.get("test") == "derivative_sum_stability":
            rows = result["rows"]
            out.append(_write_table(directory / f"{stem}_tau.csv", "n,mean,stderr",
                                    [[r["n"] for r in rows], [r["mean"] for r in rows],
                                     [r["stderr"] for r in rows]]))
    except (KeyError, TypeError, ValueError):
        pass
    return out


def report_bundle(directory) -> tuple[dict, int]:
    """Aggregate every ``*.json`` report in ``directory`` into an index."""
    directory = Path(directory)
    if not directory.is_dir():
        raise UsageError(f"not a directory: {directory}")
    entries, unreadable = [], []
    for path in sorted(directory.glob("*.json")):
        if path.name == "index.json":
            continue
        try:
            rep = json.loads(path.read_text())
            if not isinstance(rep, dict) or "passed" not in rep:
                raise ValueError("no pass/fail field")
        except (OSError, ValueError) as exc:
            unreadable.append({"file": path.name, "error": str(exc)})
            continue
        entry = {"file": path.name, "command": rep.get("command"), "passed": rep["passed"]}
        entry["tables"] = _plot_tables(directory, path.stem, rep.get("result") or {})
        entries.append(entry)
    summary = {
        "pass": sum(e["passed"] is True for e in entries),
        "fail": sum(e["passed"] is False for e in entries),
        "report_only": sum(e["passed"] is None for e in entries),
        "unreadable": len(unreadable),
    }
    index = {"version": __version__, "entries": entries, "unreadable": unreadable, "summary": summary}
    status = 1 if summary["fail"] or unreadable else 0
    return index, status


def cmd_report_bundle(cfg: dict) -> int:
    index, status = report_bundle(cfg["dir"])
    out = Path(cfg["out"] or Path(cfg["dir"]) / "index.json")
    out.write_text(dumps(index) + "\n")
    s = index["summary"]
    print(f"pass={s['pass']} fail={s['fail']} report_only={s['report_only']} unreadable={s['unreadable']}")
    return status


COMMANDS = {
    "simulate-trace": cmd_simulate_trace,
    "check-martingale": cmd_check_martingale,
    "diffusion-stats": cmd_diffusion_stats,
    "derivative-moments": cmd_derivative_moments,
    "green-function": cmd_green_function,
    "natural-param": cmd_natural_param,
    "estimate-dimension": cmd_estimate_dimension,
    "report-bundle": cmd_report_bundle,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sle-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key=value settings file; flags override it")
        p.add_argument("--jobs", type=int, help=f"worker processes (default ${JOBS_ENV} or 1)")
        keys = dict(COMMON, **SCHEMAS[name])
        for key in keys:
            if key == "jobs":
                continue
            flag = "--" + key.replace("_", "-").replace(".", "-")
            names = [flag]
            names += ["--" + alias.replace("_", "-") for alias, target in ALIASES.items() if target == key]
            p.add_argument(*names, dest=key, default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        file_values = read_config(args.config) if args.config else {}
        cfg = resolve_config(args.command, file_values, flags)
        return COMMANDS[args.command](cfg)
    except (UsageError, DomainError) as exc:
        print(f"sle-lab {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
