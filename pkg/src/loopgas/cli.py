"""Command-line entry point: `loopgas <experiment> --config <path>`.

Parses a strict YAML config (unknown keys rejected with a nearest-key
suggestion), runs the selected experiment, and writes results.csv plus
summary.json (and optionally chain.ckpt) into the output directory.
Identical config and seed produce byte-identical CSV; wall-clock fields
live only in the JSON summary.  Exit status: 0 on pass or no built-in
threshold, 1 on a failed verdict, 2 on config or runtime errors.
"""

import argparse
import csv
import difflib
import json
import math
import os
import sys
import time

import numpy as np
import yaml

from . import __version__, mc
from .experiments import RUNNERS, run_experiment

EXPERIMENT_NAMES = tuple(sorted(RUNNERS))


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _suggest(key, allowed):
    close = difflib.get_close_matches(str(key), sorted(allowed), n=1)
    return " (did you mean %r?)" % close[0] if close else ""


def _check_keys(section, allowed, path, errors):
    if not isinstance(section, dict):
        errors.append("at %s: expected a mapping, got %s"
                      % (path, type(section).__name__))
        return False
    for key in section:
        if key not in allowed:
            errors.append("unknown key %r at %s%s"
                          % (key, path, _suggest(key, allowed)))
    return True


def _num_field(section, key, path, errors, required=False, minimum=None,
               min_exclusive=None, maximum=None, integer=False):
    if key not in section:
        if required:
            errors.append("at %s.%s: required field missing" % (path, key))
        return None
    v = section[key]
    ok = _is_int(v) if integer else _is_num(v)
    if not ok:
        errors.append("at %s.%s: expected %s, got %r"
                      % (path, key, "an integer" if integer else "a number", v))
        return None
    if minimum is not None and v < minimum:
        errors.append("at %s.%s: value %r below minimum %r" % (path, key, v, minimum))
    if min_exclusive is not None and v <= min_exclusive:
        errors.append("at %s.%s: value %r must exceed %r" % (path, key, v, min_exclusive))
    if maximum is not None and v > maximum:
        errors.append("at %s.%s: value %r above maximum %r" % (path, key, v, maximum))
    return v


def _vector_field(section, key, path, errors, length=None, required=False):
    if key not in section:
        if required:
            errors.append("at %s.%s: required field missing" % (path, key))
        return None
    v = section[key]
    if not isinstance(v, list) or not all(_is_num(u) for u in v):
        errors.append("at %s.%s: expected a list of numbers" % (path, key))
        return None
    if length is not None and len(v) != length:
        errors.append("at %s.%s: expected %d entries, got %d"
                      % (path, key, length, len(v)))
    return v


_PROFILE_NAMES = ("square_well", "smooth_bump", "table")

_MODEL_KEYS = ("dimension", "n_types", "beta", "fugacity", "potentials")
_POTENTIAL_KEYS = ("types", "profile", "hard_core", "range", "height",
                   "table_r", "table_v")
_GEOMETRY_KEYS = ("box_half_side", "box0_half_side", "box0_center",
                  "window_half_side", "shift")
_SAMPLER_KEYS = ("slices_per_beta", "k_max", "move_weights",
                 "conservative_hard_core", "audit_interval",
                 "proposals_per_sweep", "seed", "chains")
_EXPERIMENT_KEYS = ("name", "options")
_EXTERNAL_KEYS = ("seed", "counts", "reach", "points")
_OUTPUT_KEYS = ("checkpoint",)
_TOP_KEYS = ("model", "geometry", "sampler", "experiment", "external", "output")

# option names each experiment understands; anything else is rejected
OPTION_KEYS = {
    "free-validate": ("sweeps", "burn_in", "thin"),
    "kernel": ("counts", "n_pairs", "burn_in", "n_snapshots", "thin",
               "inner_per_snapshot", "apply_exclusion"),
    "q-kernel": ("counts", "n_pairs", "n_samples"),
    "density": ("sweeps", "burn_in", "thin"),
    "k-tail": ("k0", "sweeps", "burn_in", "thin"),
    "shift-invariance": ("sweeps", "burn_in", "thin"),
    "bridge-laws": ("n_draws", "deviation_thresholds", "multiplicity",
                    "displacement", "dirichlet_half_side", "dirichlet_draws",
                    "ks_draws"),
    "analytic": ("points_per_axis", "n_samples", "counts", "envelope_grid",
                 "growth_family", "growth_grid_max"),
    "oracle": ("n_sites", "spacing", "n_max", "inner0", "inner1"),
    "b-condition": ("growth_family", "c", "grid_min", "grid_max", "grid_step"),
}


def _validate_model(model, errors):
    if not _check_keys(model, _MODEL_KEYS, "model", errors):
        return
    d = _num_field(model, "dimension", "model", errors, required=True,
                   integer=True, minimum=1, maximum=3)
    q = _num_field(model, "n_types", "model", errors, required=True,
                   integer=True, minimum=1)
    _num_field(model, "beta", "model", errors, required=True, min_exclusive=0.0)
    zs = _vector_field(model, "fugacity", "model", errors, required=True,
                       length=q if _is_int(q) else None)
    if zs is not None:
        for i, z in enumerate(zs):
            if not 0.0 < z < 1.0:
                errors.append("range violation at key model.fugacity[%d]: "
                              "value %r outside the open interval (0, 1)" % (i, z))
    for p_idx, entry in enumerate(model.get("potentials", []) or []):
        path = "model.potentials[%d]" % p_idx
        if not _check_keys(entry, _POTENTIAL_KEYS, path, errors):
            continue
        types = entry.get("types")
        if (not isinstance(types, list) or len(types) != 2
                or not all(_is_int(t) for t in types)):
            errors.append("at %s.types: expected two type indices" % path)
        elif _is_int(q) and not all(0 <= t < q for t in types):
            errors.append("at %s.types: indices outside [0, %d)" % (path, q))
        profile = entry.get("profile", "square_well")
        if profile not in _PROFILE_NAMES:
            errors.append("at %s.profile: %r is not one of %s"
                          % (path, profile, ", ".join(_PROFILE_NAMES)))
        hc = _num_field(entry, "hard_core", path, errors, minimum=0.0)
        rng_ = _num_field(entry, "range", path, errors, minimum=0.0)
        _num_field(entry, "height", path, errors, minimum=0.0)
        if _is_num(hc) and _is_num(rng_) and rng_ < hc:
            errors.append("at %s: range %r below hard_core %r" % (path, rng_, hc))
        if profile == "table":
            for key in ("table_r", "table_v"):
                if key not in entry:
                    errors.append("at %s.%s: required for table profiles" % (path, key))
    return d


def _validate_geometry(geo, dimension, errors):
    if not _check_keys(geo, _GEOMETRY_KEYS, "geometry", errors):
        return
    _num_field(geo, "box_half_side", "geometry", errors, required=True,
               min_exclusive=0.0)
    _num_field(geo, "box0_half_side", "geometry", errors, min_exclusive=0.0)
    _num_field(geo, "window_half_side", "geometry", errors, min_exclusive=0.0)
    _vector_field(geo, "box0_center", "geometry", errors, length=dimension)
    _vector_field(geo, "shift", "geometry", errors, length=dimension)


def _validate_sampler(sampler, errors):
    if not _check_keys(sampler, _SAMPLER_KEYS, "sampler", errors):
        return
    _num_field(sampler, "slices_per_beta", "sampler", errors, integer=True, minimum=1)
    _num_field(sampler, "k_max", "sampler", errors, integer=True, minimum=1)
    _num_field(sampler, "audit_interval", "sampler", errors, integer=True, minimum=0)
    _num_field(sampler, "proposals_per_sweep", "sampler", errors, integer=True, minimum=0)
    _num_field(sampler, "seed", "sampler", errors, integer=True, minimum=0)
    _num_field(sampler, "chains", "sampler", errors, integer=True, minimum=1)
    mw = _vector_field(sampler, "move_weights", "sampler", errors, length=3)
    if mw is not None and (any(w < 0 for w in mw) or sum(mw) <= 0):
        errors.append("at sampler.move_weights: weights must be non-negative "
                      "with a positive sum")
    if "conservative_hard_core" in sampler and not isinstance(
            sampler["conservative_hard_core"], bool):
        errors.append("at sampler.conservative_hard_core: expected a boolean")


def _validate_experiment(section, errors):
    if not _check_keys(section, _EXPERIMENT_KEYS, "experiment", errors):
        return
    name = section.get("name")
    if name is not None and name not in RUNNERS:
        errors.append("at experiment.name: %r is not an experiment%s"
                      % (name, _suggest(name, EXPERIMENT_NAMES)))
    options = section.get("options")
    if options is None:
        return
    if not isinstance(options, dict):
        errors.append("at experiment.options: expected a mapping")
        return
    if name in OPTION_KEYS:
        _check_keys(options, OPTION_KEYS[name], "experiment.options", errors)


def _validate_external(section, n_types, errors):
    if not _check_keys(section, _EXTERNAL_KEYS, "external", errors):
        return
    _num_field(section, "seed", "external", errors, integer=True, minimum=0)
    _num_field(section, "reach", "external", errors, minimum=0.0)
    counts = section.get("counts")
    if counts is not None:
        if (not isinstance(counts, list)
                or not all(_is_int(c) and c >= 0 for c in counts)):
            errors.append("at external.counts: expected non-negative integers")
        elif n_types is not None and len(counts) != n_types:
            errors.append("at external.counts: expected %d entries" % n_types)


def parse_config(text, experiment_name=None):
    """Parse and strictly validate a YAML config; returns the config dict.

    Collects every violation (unknown key, type mismatch, range violation)
    into a single ConfigError so a bad file is reported in one pass.
    """
    try:
        cfg = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(["config is not valid YAML: %s" % exc])
    if not isinstance(cfg, dict):
        raise ConfigError(["config must be a mapping of sections"])
    errors = []
    _check_keys(cfg, _TOP_KEYS, "top level", errors)
    dimension = None
    if "model" not in cfg:
        errors.append("at model: required section missing")
    else:
        dimension = _validate_model(cfg["model"], errors)
    if "geometry" not in cfg:
        errors.append("at geometry: required section missing")
    else:
        _validate_geometry(cfg["geometry"], dimension, errors)
    if "sampler" in cfg:
        _validate_sampler(cfg["sampler"], errors)
    if "experiment" in cfg:
        _validate_experiment(cfg["experiment"], errors)
    if "external" in cfg:
        n_types = cfg.get("model", {}).get("n_types")
        _validate_external(cfg["external"], n_types if _is_int(n_types) else None,
                           errors)
    if "output" in cfg:
        _check_keys(cfg["output"], _OUTPUT_KEYS, "output", errors)
    declared = cfg.get("experiment", {}).get("name") if "experiment" in cfg else None
    if (experiment_name is not None and declared is not None
            and declared != experiment_name):
        errors.append("at experiment.name: config declares %r but the "
                      "subcommand is %r" % (declared, experiment_name))
    if errors:
        raise ConfigError(errors)
    return cfg


# -- output writing -------------------------------------------------------------


def _csv_cell(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_results_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_csv_cell(row.get(col, "")) for col in columns])


def _jsonable(value):
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def write_summary_json(path, payload):
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- entry point ----------------------------------------------------------------


def build_arg_parser():
    parser = argparse.ArgumentParser(
        prog="loopgas",
        description="Loop-gas sampler and validation experiments.")
    sub = parser.add_subparsers(dest="experiment", required=True,
                                metavar="|".join(EXPERIMENT_NAMES))
    for name in EXPERIMENT_NAMES:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="YAML config path")
        sp.add_argument("--seed", type=int, default=None,
                        help="override sampler.seed")
        sp.add_argument("--out", default="loopgas-out",
                        help="output directory (default: loopgas-out)")
    return parser


def main(argv=None):
    args = build_arg_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        print("error: cannot read config: %s" % exc, file=sys.stderr)
        return 2
    try:
        cfg = parse_config(text, experiment_name=args.experiment)
    except ConfigError as exc:
        for line in exc.errors:
            print("config error: %s" % line, file=sys.stderr)
        return 2
    if args.seed is not None:
        if args.seed < 0:
            print("error: --seed must be non-negative", file=sys.stderr)
            return 2
        cfg.setdefault("sampler", {})["seed"] = args.seed
    effective_seed = int(cfg.get("sampler", {}).get("seed", 0))
    try:
        os.makedirs(args.out, exist_ok=True)
        t0 = time.perf_counter()
        result = run_experiment(args.experiment, cfg)
        wall = time.perf_counter() - t0
        write_results_csv(os.path.join(args.out, "results.csv"),
                          result.columns, result.rows)
        payload = {
            "experiment": args.experiment,
            "version": "loopgas-%s" % __version__,
            "seed": effective_seed,
            "wall_time_seconds": wall,
            "verdict": result.verdict,
            "summary": result.summary,
            "config": cfg,
        }
        write_summary_json(os.path.join(args.out, "summary.json"), payload)
        if cfg.get("output", {}).get("checkpoint") and result.chain_obj is not None:
            mc.save_checkpoint(result.chain_obj, os.path.join(args.out, "chain.ckpt"))
    except (ValueError, RuntimeError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    print("%s: verdict=%s rows=%d out=%s"
          % (args.experiment, result.verdict, len(result.rows), args.out))
    return 1 if result.verdict == "fail" else 0


if __name__ == "__main__":
    sys.exit(main())
