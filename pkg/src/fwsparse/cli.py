"""Command-line entry point: ``fwsparse exp1|exp2|exp3|audit|analyze``.

Exit codes: 0 success, 2 configuration error, 3 invariant violation found
by ``audit``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields

from .dictionary import analyze, load_dictionary
from .exceptions import ConfigError, FwSparseError
from .experiments import (
    ExperimentConfig,
    exp1_convergence,
    exp2_sparsity_sweep,
    exp3_beta_effect,
    fitted_slope,
    run_recovery_audit,
)

EXIT_OK, EXIT_CONFIG, EXIT_VIOLATION = 0, 2, 3

DEFAULTS = {
    "exp1": {"beta_mult": (8.0,), "m_mult": (1,)},
    "exp2": {"beta_mult": (8.0,), "m_mult": (1, 2, 5, 20)},
    "exp3": {"beta_mult": (1.1, 8.0), "m_mult": (1,)},
    "audit": {"beta_mult": (8.0,), "m_mult": (1,), "trials": 100},
}

# config-file key -> ExperimentConfig field
_KEYS = {"d": "d", "n": "n", "trials": "trials", "seed": "base_seed", "base_seed": "base_seed",
         "beta_mult": "beta_mult", "beta-mult": "beta_mult", "m_mult": "m_mult",
         "m-mult": "m_mult", "max_iters": "max_iters", "max-iters": "max_iters",
         "out": "out_dir", "out_dir": "out_dir", "jobs": "jobs", "beta": "beta_abs",
         "beta_abs": "beta_abs"}
_FLOAT_LISTS = {"beta_mult", "m_mult"}


def _float_list(text: str) -> tuple[float, ...]:
    parts = [p.strip() for p in str(text).split(",") if p.strip()]
    try:
        vals = tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"not a list of numbers: {text!r}") from exc
    return tuple(int(v) if v.is_integer() else v for v in vals)


def _coerce(key: str, value):
    if key in _FLOAT_LISTS:
        return _float_list(value)
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    t = types[key]
    try:
        if "int" in str(t):
            return int(value)
        if "float" in str(t):
            return float(value)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc
    return str(value)


def read_config_file(path: str) -> dict:
    """Parse ``key = value`` lines (``#`` comments, optional quotes, ``[sections]`` ignored)."""
    out = {}
    try:
        lines = open(path).read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for no, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line or (line.startswith("[") and line.endswith("]")):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{no}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        value = value.strip("\"'").strip("[]")
        if key not in _KEYS:
            raise ConfigError(f"{path}:{no}: unknown key {key!r}")
        field_name = _KEYS[key]
        out[field_name] = _coerce(field_name, value)
    return out


def build_config(command: str, args: argparse.Namespace) -> ExperimentConfig:
    values = dict(DEFAULTS.get(command, {}))
    if args.full_scale:
        values.update(d=10000, n=20000, trials=2000)
    if args.config:
        values.update(read_config_file(args.config))
    flags = {"d": args.d, "n": args.n, "trials": args.trials, "base_seed": args.seed,
             "max_iters": args.max_iters, "out_dir": args.out, "jobs": args.jobs}
    values.update({k: v for k, v in flags.items() if v is not None})
    if args.beta_mult is not None:
        values["beta_mult"] = _float_list(args.beta_mult)
    if args.m_mult is not None:
        values["m_mult"] = _float_list(args.m_mult)
    values.setdefault("out_dir", f"results/{command}")
    if command in ("exp1", "exp3") and tuple(values["m_mult"]) != (1,):
        raise ConfigError(f"{command} runs at m = m*; --m-mult is not accepted")
    return ExperimentConfig(**values)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--d", type=int, help="signal dimension (default 500)")
    p.add_argument("--n", type=int, help="number of atoms (default 1000)")
    p.add_argument("--trials", type=int, help="number of random trials")
    p.add_argument("--seed", type=int, help="base seed for all trials")
    p.add_argument("--beta-mult", help="comma-separated multipliers of ||x*||_1")
    p.add_argument("--m-mult", help="comma-separated multipliers of m*")
    p.add_argument("--max-iters", type=int, help="iteration budget per run")
    p.add_argument("--out", help="output directory")
    p.add_argument("--jobs", type=int, help="worker processes")
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--full-scale", action="store_true",
                   help="d=10000, n=20000, 2000 trials (slow)")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fwsparse", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [("exp1", "convergence at m = m*, beta = 8||x*||_1, writes fig1.svg"),
                        ("exp2", "sparsity sweep m = c m*, writes fig2.svg"),
                        ("exp3", "effect of beta at m = m*, writes fig3.svg"),
                        ("audit", "support-recovery audit of FW, MP and OMP")]:
        _add_common(sub.add_parser(name, help=help_))
    p = sub.add_parser("analyze", help="conditioning metrics of a dictionary file")
    p.add_argument("path", help="binary dictionary file or CSV (one atom per column)")
    p.add_argument("--normalize", action="store_true", help="rescale columns to unit norm")
    p.add_argument("--m-max", type=int, help="tabulate the Babel function up to this m")
    return parser


def _summary(result) -> dict:
    out = {"experiment": result.name, "files": result.files}
    if result.name == "exp2":
        out["slopes_last_half"] = result.metadata.get("slopes_last_half")
        out["skipped"] = result.metadata.get("skipped")
    else:
        out["slopes"] = {k: fitted_slope(c.mean) for k, c in result.curves.items()}
    return out


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "analyze":
            D = load_dictionary(args.path, normalize=args.normalize)
            metrics = analyze(D, args.m_max)
            print(json.dumps(metrics.to_dict(), indent=2))
            return EXIT_OK
        cfg = build_config(args.command, args)
        if args.command == "audit":
            summary = run_recovery_audit(cfg)
            print(json.dumps({k: summary[k] for k in
                              ("trials", "skipped", "guaranteed", "off_support_selections",
                               "omp_iterations_minus_m", "omp_exact_trials", "violation")},
                             indent=2))
            return EXIT_VIOLATION if summary["violation"] else EXIT_OK
        run = {"exp1": exp1_convergence, "exp2": exp2_sparsity_sweep,
               "exp3": exp3_beta_effect}[args.command]
        print(json.dumps(_summary(run(cfg)), indent=2))
        return EXIT_OK
    except ConfigError as exc:
        print(f"fwsparse: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FwSparseError as exc:
        print(f"fwsparse: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"fwsparse: I/O error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
