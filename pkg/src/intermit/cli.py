"""``intermit`` command-line front end.

Each command writes a CSV of the data series (``#`` metadata header lines,
then a header row) and a JSON summary into ``--out``.  Both embed the full
configuration and the package version.  Exit codes: 0 success, 2 bad
configuration, 3 numerical failure, 4 I/O failure; errors are printed to
stderr as a single JSON object.
"""
import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from . import __version__, analysis, maps, spectral, tower, ulam

COMMANDS = ("acim", "gap-scan", "escape-scan", "accim-converge", "bound-table", "tower", "twostate")
ALIASES = {"bound-table": ["table1"]}
CANONICAL = {a: name for name, al in ALIASES.items() for a in al}


class ConfigError(ValueError):
    pass


class NumericalError(RuntimeError):
    pass


# ---------------------------------------------------------------- config


def _parse_grid(text):
    """'1000' -> [1000]; '100,200,500' -> list; '128:8192:x2' -> doubling grid."""
    if isinstance(text, (list, tuple)):
        vals = [int(v) for v in text]
    elif isinstance(text, int):
        vals = [text]
    else:
        s = str(text).strip()
        if ":" in s:
            parts = s.split(":")
            if len(parts) != 3 or not parts[2].startswith("x"):
                raise ConfigError(f"grid {s!r}: expected start:stop:xFACTOR")
            start, stop, fac = int(parts[0]), int(parts[1]), int(parts[2][1:])
            if fac < 2 or start < 1:
                raise ConfigError(f"grid {s!r}: bad start or factor")
            vals, v = [], start
            while v <= stop:
                vals.append(v)
                v *= fac
        else:
            vals = [int(v) for v in s.split(",") if v.strip()]
    if not vals:
        raise ConfigError("empty N grid")
    return vals


def _parse_floats(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    if isinstance(text, (int, float)):
        return [float(text)]
    return [float(v) for v in str(text).split(",") if v.strip()]


DEFAULTS = {
    "alpha": "0.5",
    "n": None,
    "hole_bins": 1,
    "m": 4096,
    "tol": 1e-10,
    "max_iter": spectral.DEFAULT_MAX_ITER,
    "n_ref": 20000,
    "eps0": None,
    "out": ".",
    "cache": None,
}

COMMAND_N_DEFAULT = {
    "acim": "1000",
    "gap-scan": "128:8192:x2",
    "escape-scan": "128:8192:x2",
    "accim-converge": "100,200,500,1000,2000,5000",
    "bound-table": "100,200,500,1000,2000",
    "tower": "4,8,16,32",
    "twostate": "1000",
}


def build_config(args):
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            with open(args.config) as fh:
                filecfg = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(filecfg, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(filecfg) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(filecfg)
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    cfg["command"] = CANONICAL.get(args.command, args.command)
    if cfg["n"] is None:
        cfg["n"] = COMMAND_N_DEFAULT[cfg["command"]]
    return validate(cfg)


def validate(cfg):
    try:
        alphas = _parse_floats(cfg["alpha"])
        grid = _parse_grid(cfg["n"])
        tol = float(cfg["tol"])
        max_iter = int(cfg["max_iter"])
        M = int(cfg["m"])
        hole_bins = int(cfg["hole_bins"])
        n_ref = int(cfg["n_ref"])
        eps0 = None if cfg["eps0"] is None else float(cfg["eps0"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if not alphas or any(not 0.0 < a < 1.0 for a in alphas):
        raise ConfigError("alpha values must lie in (0, 1)")
    if not 0.0 < tol < 1e-2:
        raise ConfigError("tol must lie in (0, 1e-2)")
    if max_iter < 1:
        raise ConfigError("max_iter must be positive")
    if M < 16:
        raise ConfigError("m (tower base resolution) must be >= 16")
    cmd = cfg["command"]
    if any(N < 2 for N in grid):
        raise ConfigError("every n must be >= 2")
    if cmd in ("gap-scan", "escape-scan") and len(grid) < 4:
        raise ConfigError(f"{cmd} needs a grid of at least 4 N values")
    if cmd in ("acim", "twostate") and len(grid) != 1:
        raise ConfigError(f"{cmd} takes a single N")
    if cmd == "accim-converge":
        if len(grid) < 2:
            raise ConfigError("accim-converge needs at least 2 N values")
        bad = [N for N in grid if n_ref % N]
        if bad:
            raise ConfigError(f"n_ref={n_ref} is not a multiple of {bad}")
    if cmd == "escape-scan" and not 1 <= hole_bins < min(grid):
        raise ConfigError("hole_bins must be >= 1 and smaller than every N")
    if eps0 is not None and not 0.0 < eps0 < 0.5:
        raise ConfigError("eps0 must lie in (0, breakpoint)")
    out = dict(cfg)
    out.update(alpha=alphas, n=grid, tol=tol, max_iter=max_iter, m=M,
               hole_bins=hole_bins, n_ref=n_ref, eps0=eps0)
    return out


# ---------------------------------------------------------------- output


def _meta_lines(cfg):
    return [
        f"# intermit {__version__}",
        "# config " + json.dumps(cfg, sort_keys=True),
    ]


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, cfg, header, rows):
    buf = io.StringIO()
    for line in _meta_lines(cfg):
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(r.get(h, "")) for h in header])
    _write(path, buf.getvalue())


def write_json(path, cfg, summary):
    doc = {"version": __version__, "config": cfg, "summary": summary}
    _write(path, json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _write(path, text):
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def read_csv(path):
    """Rows of a CSV written by this module (metadata lines skipped)."""
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def _out(cfg, name):
    return os.path.join(cfg["out"], name)


def _assemble(m, N, cfg):
    if cfg.get("cache"):
        P, _ = ulam.cached_assemble(m, N, cfg["cache"])
        return P
    return ulam.assemble(m, N)


def _require(res, what):
    if not res.converged:
        raise NumericalError(f"{what} did not converge ({res.status}) after {res.iterations} iterations")
    return res


# ---------------------------------------------------------------- commands


def cmd_acim(cfg):
    m = maps.lsv(cfg["alpha"][0])
    N = cfg["n"][0]
    P = _assemble(m, N, cfg)
    r = _require(spectral.leading(P, tol=cfg["tol"], max_iter=cfg["max_iter"]), "invariant density")
    mid = P.partition.midpoints
    dens = r.eigenvector * N
    write_csv(_out(cfg, "acim.csv"), cfg, ["x", "density"],
              [{"x": x, "density": d} for x, d in zip(mid, dens)])
    summary = {"N": N, "residual": r.residual, "iterations": r.iterations,
               "eigenvalue": r.eigenvalue}
    lo, hi = max(1, N // 5000), N // 50
    if hi >= 10 * lo + 10:
        summary["tail_slope"] = analysis.density_tail_slope(r.eigenvector, (lo, hi))
    write_json(_out(cfg, "acim.json"), cfg, summary)
    return summary


def _scan(cfg, kind):
    rows, fits = [], {}
    for a in cfg["alpha"]:
        m = maps.lsv(a)
        pts = []
        for N in cfg["n"]:
            P = _assemble(m, N, cfg)
            if kind == "gap":
                pi = _require(spectral.leading(P, tol=cfg["tol"], max_iter=cfg["max_iter"]), "leading")
                s = spectral.second(P, pi, tol=cfg["tol"], max_iter=cfg["max_iter"])
                _require(s, f"second eigenvalue (alpha={a}, N={N})")
                lam = s.eigenvalue
                rows.append({"alpha": a, "N": N, "lambda2": lam, "one_minus_lambda2": 1.0 - lam})
            else:
                O = ulam.open_submatrix(P, range(cfg["hole_bins"]))
                s = spectral.substochastic_leading(O, tol=cfg["tol"], max_iter=cfg["max_iter"])
                _require(s, f"open leading eigenvalue (alpha={a}, N={N})")
                lam = s.eigenvalue
                rows.append({"alpha": a, "N": N, "lambda1_open": lam, "one_minus": 1.0 - lam})
            pts.append((N, 1.0 - lam))
        f = analysis.scaling_fit(pts)
        fits[repr(a)] = {"slope": f.slope, "intercept": f.intercept, "r_squared": f.r_squared}
    return rows, fits


def cmd_gap_scan(cfg):
    rows, fits = _scan(cfg, "gap")
    write_csv(_out(cfg, "gap_scan.csv"), cfg, ["alpha", "N", "lambda2", "one_minus_lambda2"], rows)
    write_json(_out(cfg, "gap_scan.json"), cfg, {"fits": fits})
    return fits


def cmd_escape_scan(cfg):
    rows, fits = _scan(cfg, "escape")
    write_csv(_out(cfg, "escape_scan.csv"), cfg, ["alpha", "N", "lambda1_open", "one_minus"], rows)
    write_json(_out(cfg, "escape_scan.json"), cfg, {"fits": fits})
    return fits


def cmd_accim_converge(cfg):
    rows = []
    for a in cfg["alpha"]:
        for r in analysis.accim_convergence(maps.lsv(a), cfg["n"], cfg["n_ref"], tol=cfg["tol"]):
            rows.append(dict(r, alpha=a))
    write_csv(_out(cfg, "accim_converge.csv"), cfg, ["alpha", "N", "tv", "lambda_open"], rows)
    summary = {"tv_normalisation": "half L1 of bin masses",
               "decreasing": {repr(a): rows_a[0]["tv"] > rows_a[-1]["tv"]
                              for a in cfg["alpha"]
                              for rows_a in [[r for r in rows if r["alpha"] == a]]}}
    write_json(_out(cfg, "accim_converge.json"), cfg, summary)
    return summary


TABLE_COLUMNS = ["N", "n", "one_minus_lambda2", "one_minus_lambda2_averaged", "eps2_over_eps1",
                 "bound_hi", "reference_one_minus_lambda2", "reference_eps2_over_eps1",
                 "converged", "error"]


def cmd_bound_table(cfg):
    rows = []
    for a in cfg["alpha"]:
        rows += analysis.bound_table(maps.lsv(a), cfg["n"], tol=cfg["tol"], max_iter=cfg["max_iter"])
    write_csv(_out(cfg, "bound_table.csv"), cfg, TABLE_COLUMNS, rows)
    ok = [r for r in rows if not r["error"]]
    summary = {
        "rows": len(rows),
        "failed_rows": len(rows) - len(ok),
        "bound_holds": all(r["eps2_over_eps1"] < r["one_minus_lambda2_averaged"] < r["bound_hi"] for r in ok),
    }
    write_json(_out(cfg, "bound_table.json"), cfg, summary)
    if len(ok) < len(rows):
        raise NumericalError(f"{len(rows) - len(ok)} table rows failed")
    return summary


def cmd_tower(cfg):
    m = maps.lsv(cfg["alpha"][0])
    results, rows = [], []
    N_check = max(2048, cfg["m"] // 2)
    for n in cfg["n"]:
        r = tower.accim_fixed_point(m, n, M=cfg["m"], tol=cfg["tol"], max_iter=cfg["max_iter"])
        if not r.converged:
            raise NumericalError(f"tower fixed point did not converge for n={n}")
        results.append(r)
        hole = maps.preimage_sequence(m, n - 1).values[n - 1]
        o = spectral.substochastic_leading(ulam.open_exact(m, N_check, hole), tol=cfg["tol"],
                                           max_iter=cfg["max_iter"])
        rows.append({
            "n": n,
            "lambda_n": r.lambda_n,
            "hole_mass": r.hole_mass,
            "identity_error": abs(1.0 - r.lambda_n - r.hole_mass),
            "interval_lambda": o.eigenvalue,
            "interval_hole": hole,
            "base_ratio": float(r.base_density.max() / r.base_density.min()),
            "iterations": r.iterations,
        })
    write_csv(_out(cfg, "tower.csv"), cfg, list(rows[0]), rows)
    summary = {"interval_N": N_check}
    if len(results) >= 1:
        rep = tower.accim_bounds_check(results)
        summary.update(base_ratio_spread=rep["base_ratio_spread"],
                       escape_ratio_range=list(rep["escape_ratio_range"]),
                       global_min=rep["global_min"], global_max=rep["global_max"])
    write_json(_out(cfg, "tower.json"), cfg, summary)
    return summary


def cmd_twostate(cfg):
    m = maps.lsv(cfg["alpha"][0])
    N = cfg["n"][0]
    eps0 = cfg["eps0"] if cfg["eps0"] is not None else 1.0 / N
    tm = analysis.two_state(m, eps0)
    ev = spectral.dense_spectrum(tm.matrix).real
    rows = [{"i": i, "p_to_1": tm.matrix[i, 0], "p_to_2": tm.matrix[i, 1]} for i in range(2)]
    write_csv(_out(cfg, "twostate.csv"), cfg, ["i", "p_to_1", "p_to_2"], rows)
    summary = {"eps0": eps0, "a": tm.a, "b": tm.b, "eigenvalues": tm.eigenvalues,
               "eigenvalue_check": float(np.max(np.abs(np.sort(ev) - np.sort(tm.eigenvalues)))),
               "invariant": tm.invariant}
    write_json(_out(cfg, "twostate.json"), cfg, summary)
    return summary


HANDLERS = {
    "acim": cmd_acim,
    "gap-scan": cmd_gap_scan,
    "escape-scan": cmd_escape_scan,
    "accim-converge": cmd_accim_converge,
    "bound-table": cmd_bound_table,
    "tower": cmd_tower,
    "twostate": cmd_twostate,
}


def make_parser():
    p = argparse.ArgumentParser(prog="intermit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"intermit {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name, aliases=ALIASES.get(name, []))
        s.add_argument("--alpha", help="alpha or comma list (default 0.5)")
        s.add_argument("--n", help="N (or tower depth) as int, comma list or start:stop:xFACTOR")
        s.add_argument("--hole-bins", dest="hole_bins", type=int, help="bins in the hole [0, k/N)")
        s.add_argument("--m", type=int, help="tower base resolution M")
        s.add_argument("--n-ref", dest="n_ref", type=int, help="reference resolution N*")
        s.add_argument("--eps0", type=float, help="two-state boundary (default 1/N)")
        s.add_argument("--tol", type=float)
        s.add_argument("--max-iter", dest="max_iter", type=int)
        s.add_argument("--out", help="output directory")
        s.add_argument("--cache", help="matrix cache directory")
        s.add_argument("--config", help="JSON file with the same keys as the flags")
    return p


def _fail(code, kind, msg):
    sys.stderr.write(json.dumps({"error": kind, "message": msg, "exit_code": code}) + "\n")
    return code


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        cfg = build_config(args)
    except ConfigError as exc:
        return _fail(2, "config", str(exc))
    if not os.path.isdir(cfg["out"]):
        return _fail(4, "io", f"output directory does not exist: {cfg['out']}")
    try:
        summary = HANDLERS[cfg["command"]](cfg)
    except (NumericalError, FloatingPointError, RuntimeError) as exc:
        return _fail(3, "numerical", str(exc))
    except (OSError, ulam.MatrixFileError) as exc:
        return _fail(4, "io", str(exc))
    except ValueError as exc:
        return _fail(2, "config", str(exc))
    sys.stdout.write(json.dumps(summary, sort_keys=True, default=_json_default) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
