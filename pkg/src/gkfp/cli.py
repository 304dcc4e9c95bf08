"""Command line driver: ``gkfp --suite NAME --config FILE --out DIR``.

Exit codes: 0 when every check passes, 2 when a check fails, 1 on a
configuration or I/O error.
"""

import argparse
import configparser
import csv
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from . import suites

log = logging.getLogger("gkfp")

DEFAULTS = """\
[run]
suite = identities
seed = 20240531
jobs = 1

[basis]
N = 64
d = 1
P = 12
M = 512

[metric]
preset = sin1d:0.3

[sweep]
b = 0.25, 1, 4
h = 1
ell = 0, 1, 2
xi = 0, 1, 4, 16
lambda = -64, -4, 0, 4, 64
A = 1, 2, 4, 8

[airy]
xi = 1, 4, 16, 64
lambda = -64, -4, 0, 4, 64
fit_xi = 4, 8, 16, 32, 64, 128, 256
hermite_N = 640

[euclid]
N = 64
xi = 0, 1, 4, 16
lambda = -64, -56, -48, -40, -32, -24, -16, -8, 0, 8, 16, 24, 32, 40, 48, 56, 64

[refined]
metric = sin1d:0.5
b = 1
ell = 3
kappa_fixed = 0.02
A = 0.25, 0.5, 1, 2, 4, 8
q_samples = 9

[partition]
A = 2
ell = 0

[sobolev]
N = 16
P = 24
M = 256
xi = 0, 1, 4

[quasimode]
metric = sin1d:0.3
b = 1, 2, 4, 8
q_points = 64
p_points = 256
p_half_width = 4

[oscillator]
N = 32

[metric_cert]
pairs = 100000

[tolerances]
identity_tol = 1e-12
drift_tol = 0.1
fit_tol = 0.02
"""

# keys whose values are comma separated lists of numbers
LIST_KEYS = {("sweep", k) for k in ("b", "h", "ell", "xi", "lambda", "a")} | \
    {("airy", "xi"), ("airy", "lambda"), ("airy", "fit_xi"), ("euclid", "xi"), ("euclid", "lambda"),
     ("refined", "a"), ("sobolev", "xi"), ("quasimode", "b")}
STRING_KEYS = {("run", "suite"), ("metric", "preset"), ("refined", "metric"), ("quasimode", "metric")}


class ConfigError(Exception):
    pass


def _number(text):
    value = float(text)
    return int(value) if value.is_integer() and "." not in text and "e" not in text.lower() else value


def _key_lines(text):
    """Map (section, key) to its line number in the config text."""
    out, section = {}, None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
        elif s and not s.startswith(("#", ";")) and ("=" in s or ":" in s) and section:
            key = s.split("=", 1)[0] if "=" in s else s.split(":", 1)[0]
            out.setdefault((section, key.strip().lower()), i)
    return out


def load_config(path=None):
    """Defaults overlaid with an optional INI file; returns a nested dict of typed values."""
    base = configparser.ConfigParser()
    base.read_string(DEFAULTS)
    if path is not None:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError("cannot read config %s: %s" % (path, exc))
        user = configparser.ConfigParser()
        try:
            user.read_string(text, source=path)
        except configparser.Error as exc:
            raise ConfigError(str(exc))
        lines = _key_lines(text)
        for section in user.sections():
            if not base.has_section(section):
                raise ConfigError("%s:%d: unknown section [%s]"
                                  % (path, lines.get((section, None), _section_line(text, section)), section))
            for key, value in user.items(section, raw=True):
                if not base.has_option(section, key):
                    raise ConfigError("%s:%d: unknown key '%s' in [%s]"
                                      % (path, lines.get((section, key), 0), key, section))
                base.set(section, key, value)
        return _typed(base, path, lines)
    return _typed(base, "<defaults>", {})


def _section_line(text, section):
    for i, line in enumerate(text.splitlines(), 1):
        if line.strip() == "[%s]" % section:
            return i
    return 0


def _typed(parser, path, lines):
    cfg = {}
    for section in parser.sections():
        sec = cfg.setdefault(section, {})
        for key, value in parser.items(section, raw=True):
            where = "%s:%d" % (path, lines.get((section, key), 0))
            if (section, key) in STRING_KEYS:
                sec[key] = value.strip()
                continue
            try:
                if (section, key) in LIST_KEYS:
                    items = [v for v in value.replace("\n", ",").split(",") if v.strip()]
                    if not items:
                        raise ConfigError("%s: empty list for '%s' in [%s]" % (where, key, section))
                    sec[key if key != "a" else "A"] = [_number(v.strip()) for v in items]
                else:
                    sec[key if key != "a" else "A"] = _number(value.strip())
            except ValueError:
                raise ConfigError("%s: bad value %r for '%s' in [%s]" % (where, value, key, section))
    # configparser lowercases keys; restore the spellings used by the suites
    cfg["basis"] = {k.upper() if k in ("n", "p", "m") else k: v for k, v in cfg["basis"].items()}
    cfg["sobolev"] = {k.upper() if k in ("n", "p", "m") else k: v for k, v in cfg["sobolev"].items()}
    cfg["euclid"] = {k.upper() if k == "n" else k: v for k, v in cfg["euclid"].items()}
    cfg["oscillator"] = {"N": cfg["oscillator"]["n"]}
    cfg["airy"]["hermite_N"] = cfg["airy"].pop("hermite_n")
    cfg["partition"]["A"] = cfg["partition"].pop("A", cfg["partition"].get("a"))
    cfg["partition"].pop("a", None)
    _validate(cfg)
    return cfg


def _validate(cfg):
    if cfg["run"]["suite"] not in suites.SUITES:
        raise ConfigError("unknown suite '%s'" % cfg["run"]["suite"])
    if cfg["run"]["jobs"] < 1:
        raise ConfigError("jobs must be >= 1")
    for b in cfg["sweep"]["b"] + cfg["quasimode"]["b"]:
        if b <= 0:
            raise ConfigError("b must be positive, got %g" % b)
    for t in cfg["tolerances"].values():
        if not t > 0:
            raise ConfigError("tolerances must be positive")


def _run_check(args):
    fun_name, cfg, seed = args
    fun = getattr(suites, fun_name)
    check_id = fun_name[len("check_"):]
    rng = suites.rng_for(seed, check_id)
    try:
        out = fun(cfg, rng)
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        return [suites.skipped(check_id, {}, "numerical failure: %s" % exc)], None
    if isinstance(out, tuple):
        return out
    return out, None


def run_suite(cfg, jobs=1):
    """Run every check of the configured suite; rows are sorted for byte-stable output."""
    name = cfg["run"]["suite"]
    seed = int(cfg["run"]["seed"])
    checks = suites.SUITES[name][1]
    tasks = [(c.__name__, cfg, seed) for c in checks]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_check, tasks))
    else:
        results = [_run_check(t) for t in tasks]
    rows, tables = [], {}
    for (fun_name, _, _), (rs, table) in zip(tasks, results):
        for r in rs:
            r["suite"] = name
        rows.extend(rs)
        if table is not None:
            tables[fun_name] = table
    rows.sort(key=lambda r: (r["check_id"], suites.params_json(r["params"])))
    return rows, tables


def fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.12g" % float(x)


def write_outputs(out_dir, cfg, cfg_text, rows, tables):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "summary.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["suite", "check_id", "param_json", "value", "bound", "margin", "drift", "status"])
        for r in rows:
            w.writerow([r["suite"], r["check_id"], suites.params_json(r["params"]), fmt(r["value"]),
                        fmt(r["bound"]), fmt(r["margin"]), fmt(r["drift"]), r["status"]])
    records = [{k: (json.loads(suites.params_json(v)) if k == "params" else
                    (fmt(v) if isinstance(v, float) else v)) for k, v in r.items()} for r in rows]
    report = {"suite": cfg["run"]["suite"], "seed": cfg["run"]["seed"], "records": records,
              "environment": {"gkfp": __version__, "numpy": np.__version__,
                              "config_sha256": hashlib.sha256(cfg_text.encode()).hexdigest()}}
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
        fh.write("\n")
    if cfg["run"]["suite"] in ("partition-check", "full"):
        _write_partition_table(out_dir)
    if "check_sobolev" in tables:
        with open(os.path.join(out_dir, "sobolev_constants.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["s", "N", "norm", "C_lower", "C_upper"])
            for s, n, name, lo, hi in sorted(tables["check_sobolev"]):
                w.writerow([fmt(s), fmt(n), name, fmt(lo), fmt(hi)])


def _write_partition_table(out_dir):
    from .partitions import DyadicPartition
    part = DyadicPartition()
    rows = part.table(np.linspace(0, 2.0 ** part.ell_max, 257))
    with open(os.path.join(out_dir, "partition_table.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["abs_p"] + ["theta_sq_%d" % l for l in part.levels] + ["sum"])
        for r in rows:
            w.writerow([fmt(v) for v in r])


def build_parser():
    ap = argparse.ArgumentParser(prog="gkfp", description="Numerical experiments for the geometric Kramers-Fokker-Planck operator.")
    ap.add_argument("--config", help="INI file overriding the defaults")
    ap.add_argument("--suite", help="suite to run: %s" % ", ".join(suites.SUITES))
    ap.add_argument("--jobs", type=int, help="worker processes")
    ap.add_argument("--seed", type=int, help="base seed for the Philox streams")
    ap.add_argument("--out", default="gkfp-out", help="output directory (default gkfp-out)")
    ap.add_argument("--print-defaults", action="store_true", help="print the default configuration and exit")
    ap.add_argument("--list", action="store_true", help="list suites and exit")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.print_defaults:
        sys.stdout.write(DEFAULTS)
        return 0
    if args.list:
        for name, desc in suites.list_suites():
            print("%-20s %s" % (name, desc))
        return 0
    try:
        cfg = load_config(args.config)
        cfg_text = open(args.config).read() if args.config else DEFAULTS
        if args.suite is not None:
            cfg["run"]["suite"] = args.suite
        if args.seed is not None:
            cfg["run"]["seed"] = args.seed
        if args.jobs is not None:
            cfg["run"]["jobs"] = args.jobs
        _validate(cfg)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 1
    cfg_text += "\n# effective: suite=%s seed=%s\n" % (cfg["run"]["suite"], cfg["run"]["seed"])
    log.info("running suite %s", cfg["run"]["suite"])
    rows, tables = run_suite(cfg, cfg["run"]["jobs"])
    try:
        write_outputs(args.out, cfg, cfg_text, rows, tables)
    except OSError as exc:
        print("cannot write outputs: %s" % exc, file=sys.stderr)
        return 1
    n_fail = sum(r["status"] == "fail" for r in rows)
    for r in rows:
        print("%-6s %-40s value=%s bound=%s" % (r["status"].upper(), r["check_id"], fmt(r["value"]), fmt(r["bound"])))
    print("%d checks, %d failed, %d skipped" % (len(rows), n_fail, sum(r["status"] == "skipped" for r in rows)))
    return 2 if n_fail else 0


if __name__ == "__main__":
    sys.exit(main())
