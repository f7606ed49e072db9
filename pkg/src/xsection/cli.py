"""Command-line front end.

Every command reads one validated :class:`ExperimentConfig`, built from a
YAML file (``--config``) and/or flags, and writes a JSON result record.
Exit status: 0 on pass, 1 when a checker fails, 2 on configuration errors.

The default number of worker threads for replicate runs comes from the
``XSECTION_THREADS`` environment variable; results never depend on it.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np
import yaml

from . import __version__
from ._rng import make_rng
from .entropy import (EntropyError, Partition, abramov_check, block_entropy, lex_rank_sample,
                      transfer_check)
from .group import ElementSet, GroupError, GroupModel, parse_group
from .mixing import MixingError, mixing_scan
from .section import (SectionError, collar_mask, deviation_measure, ergodic_average, from_orbit_window,
                      interval, is_castle_invariant, castle_ergodic_check, tiling_castle)
from .systems import SystemError_, analytic_entropy, parse_system, suspend
from .tiling import DELTA_MSG, TilingError, TilingParams, make_instance, params_for, quasi_tile, verify_tiling

SCHEMA = "xsection.result/1"
COMMANDS = ("tile", "entropy", "abramov", "mixing", "castle-check", "transfer")
THREADS_ENV = "XSECTION_THREADS"

DEFAULT_WINDOW = {"Z^1": 50_000, "Z^2": 158, "Z^3": 30, "H3": 10}


class ConfigError(ValueError):
    """One or more configuration violations."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


@dataclass
class ExperimentConfig:
    command: str
    seed: int
    group: str = "z"
    system: object = "bernoulli:0.5"
    params: dict = field(default_factory=dict)
    output: str | None = None

    def to_dict(self) -> dict:
        d = {"command": self.command, "seed": self.seed, "group": self.group, "system": self.system,
             "params": dict(self.params)}
        if self.output is not None:
            d["output"] = self.output
        return d

    def serialize(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)


# ----------------------------------------------------------------------
# validation
# ----------------------------------------------------------------------

_KNOWN = {
    "tile": {"delta", "eps", "window", "density", "saturate", "replicates"},
    "entropy": {"window", "sample_size", "method", "shards"},
    "abramov": {"cylinder", "roof", "window", "sample_size", "shards"},
    "mixing": {"scales", "family_size", "sample_size", "layout", "window"},
    "castle-check": {"window", "rule", "scale", "delta", "K", "eps", "observable", "replicates"},
    "transfer": {"window", "rule", "box", "length", "eps", "delta", "tol", "partition", "replicates"},
}


def _num(params, key, problems, kind=float, lo=None, hi=None, lo_open=False, hi_open=False, msg=None):
    if key not in params:
        return
    v = params[key]
    try:
        if kind is int and (isinstance(v, bool) or (isinstance(v, float) and not v.is_integer())):
            raise ValueError
        v = kind(v)
    except (TypeError, ValueError):
        problems.append(f"{key} must be {'an integer' if kind is int else 'a number'}, got {params[key]!r}")
        return
    bad = (lo is not None and (v <= lo if lo_open else v < lo)) or (hi is not None and (v >= hi if hi_open else v > hi))
    if bad:
        problems.append(msg or f"{key}={v} out of range")
    else:
        params[key] = v


def validate_config(raw) -> ExperimentConfig:
    """Parse YAML text (or a mapping) into a config, collecting every violation.

    Raises
    ------
    ConfigError
        Listing all problems found.
    """
    problems: list[str] = []
    if isinstance(raw, str):
        try:
            doc = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError([f"malformed config: {exc}"]) from None
    else:
        doc = raw
    if not isinstance(doc, dict):
        raise ConfigError(["config must be a mapping"])
    cmd = doc.get("command")
    if cmd not in COMMANDS:
        problems.append(f"command must be one of {', '.join(COMMANDS)}, got {cmd!r}")
    seed = doc.get("seed")
    if seed is None:
        problems.append("seed is required")
    elif isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        problems.append(f"seed must be a nonnegative integer, got {seed!r}")
    group = doc.get("group", "z")
    G = None
    try:
        G = parse_group(str(group))
    except GroupError as exc:
        problems.append(str(exc))
    system = doc.get("system", "bernoulli:0.5")
    sysobj = None
    if G is not None:
        try:
            sysobj = parse_system(system, G if str(system).lower().startswith("bernoulli") or
                                  (isinstance(system, dict) and system.get("kind") == "bernoulli") else None)
        except (SystemError_, KeyError, ValueError, TypeError) as exc:
            problems.append(f"system: {exc}")
    if sysobj is not None and G is not None and sysobj.group != G:
        problems.append(f"system {sysobj.kind} acts on {sysobj.group.name}, not on {G.name}")
    params = dict(doc.get("params") or {})
    unknown = set(doc) - {"command", "seed", "group", "system", "params", "output"}
    if unknown:
        problems.append(f"unknown top-level keys: {', '.join(sorted(unknown))}")
    if cmd in _KNOWN:
        extra = set(params) - _KNOWN[cmd]
        if extra:
            problems.append(f"unknown parameters for {cmd}: {', '.join(sorted(extra))}")
    # shared ranges
    _num(params, "delta", problems, float, 0, 0.1, lo_open=True,
         msg=f"{DELTA_MSG}; required by the tiling lemma")
    _num(params, "eps", problems, float, 0, 1, lo_open=True, hi_open=True, msg="eps must lie in (0, 1)")
    _num(params, "window", problems, int, 1, msg="window must be a positive integer")
    _num(params, "sample_size", problems, int, 10_000, msg="sample_size must be at least 10^4")
    _num(params, "density", problems, float, 0, 1, lo_open=True, msg="density must lie in (0, 1]")
    _num(params, "family_size", problems, int, 1, msg="family_size must be a positive integer")
    _num(params, "replicates", problems, int, 1, msg="replicates must be a positive integer")
    _num(params, "scale", problems, int, 1, msg="scale must be a positive integer")
    _num(params, "box", problems, int, 0, msg="box must be a nonnegative integer")
    _num(params, "length", problems, int, 1, msg="length must be a positive integer")
    _num(params, "K", problems, int, 0, msg="K must be a nonnegative radius")
    _num(params, "tol", problems, float, 0, lo_open=True, msg="tol must be positive")
    _num(params, "shards", problems, int, 2, msg="shards must be at least 2")
    if "scales" in params:
        sc = params["scales"]
        if isinstance(sc, str):
            try:
                sc = _parse_scales(sc)
            except ValueError:
                problems.append(f"scales must be a list of nonnegative integers, got {sc!r}")
                sc = None
        if sc is not None:
            if not isinstance(sc, list) or not all(isinstance(v, int) and not isinstance(v, bool) and v >= 0
                                                   for v in sc):
                problems.append(f"scales must be a list of nonnegative integers, got {sc!r}")
            else:
                params["scales"] = sc
    if cmd == "entropy" and sysobj is not None and G is not None and "window" in params and \
            isinstance(params["window"], int):
        size = params["window"] ** G.dim
        bits = size * math.log2(max(sysobj.alphabet_size, 2))
        if bits > 40:
            problems.append(f"window pattern space |F| log2|alphabet| = {bits:.4g} exceeds 40")
    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(cmd, int(seed), str(group), system, params, doc.get("output"))


def _parse_scales(text: str) -> list[int]:
    """``"1,2,5"`` or ``"1-30"`` (inclusive)."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if "-" in part:
            a, b = part.split("-")
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    if any(v < 0 for v in out):
        raise ValueError
    return out


# ----------------------------------------------------------------------
# output
# ----------------------------------------------------------------------

def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with every float written to 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}{_string(str(k))}: {dumps(v, indent, _level + 1)}' for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist(), indent, _level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v) or math.isinf(v):
            return _string(repr(v))
        return format(v, ".17g")
    return _string(str(obj))


def _string(s: str) -> str:
    import json
    return json.dumps(s)


def _csv(rows: list[dict], path: str) -> None:
    if not rows:
        return
    keys = list(rows[0])
    with open(path, "w") as fh:
        fh.write(",".join(keys) + "\n")
        for r in rows:
            fh.write(",".join("" if r[k] is None else (format(r[k], ".17g") if isinstance(r[k], float) else str(r[k]))
                              for k in keys) + "\n")


# ----------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------

def _threads(cli_value: int | None) -> int:
    if cli_value:
        return max(1, int(cli_value))
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _replicate_seeds(seed: int, n: int) -> list[int]:
    return [int(make_rng(seed, "replicate", i).integers(2**31)) for i in range(n)]


def _map(fn, items, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _group_and_system(cfg: ExperimentConfig):
    G = parse_group(cfg.group)
    spec = cfg.system
    bern = (isinstance(spec, str) and spec.lower().startswith("bernoulli")) or \
        (isinstance(spec, dict) and spec.get("kind") == "bernoulli")
    return G, parse_system(spec, G if bern else None)


def _cube(G: GroupModel, w: int) -> ElementSet:
    grids = np.meshgrid(*[np.arange(w)] * G.dim, indexing="ij")
    return ElementSet(G, np.stack([g.ravel() for g in grids], axis=1))


def _cmd_tile(cfg, threads):
    G = parse_group(cfg.group)
    p = cfg.params
    delta = p.get("delta", 0.1)
    if "eps" in p:
        params = TilingParams(delta, 1, 1, p["eps"])
        saturate = p.get("saturate", False)
    else:
        params = params_for(delta)
        saturate = p.get("saturate", True)
    window = p.get("window", DEFAULT_WINDOW.get(G.name, 10))
    density = p.get("density", 0.3)

    def one(seed):
        inst = make_instance(G, window, density, seed, params, saturate=saturate)
        res = quasi_tile(inst, params, check=not params.violations())
        rep = verify_tiling(inst, params, res)
        return {"seed": seed, "points": len(inst.A), "ladder": inst.meta["ladder"],
                "coverage": res.coverage, "centers_per_scale": [int(len(c)) for c in res.centers],
                "verify": rep.to_dict()}

    runs = _map(one, _replicate_seeds(cfg.seed, p.get("replicates", 1)) if p.get("replicates", 1) > 1
                else [cfg.seed], threads)
    ok = all(r["verify"]["ok"] for r in runs)
    return {"params": params.to_dict(), "instances": runs}, ok, None


def _cmd_entropy(cfg, threads):
    G, sysobj = _group_and_system(cfg)
    p = cfg.params
    F = _cube(G, p.get("window", 10))
    est = block_entropy(sysobj, F, p.get("sample_size", 1_000_000), cfg.seed, p.get("shards", 10),
                        p.get("method", "increment"))
    out = est.to_dict()
    try:
        out["analytic"] = analytic_entropy(sysobj)
    except SystemError_:
        out["analytic"] = None
    return out, True, None


def _cylinder(spec) -> list[int]:
    if isinstance(spec, list):
        return [int(v) for v in spec]
    s = str(spec)
    if s.startswith("x0="):
        s = s[3:]
    return [int(v) for v in s.split(",")]


def _cmd_abramov(cfg, threads):
    _, base = _group_and_system(cfg)
    p = cfg.params
    n = p.get("sample_size", 1_000_000)
    if "roof" in p:
        target = suspend(base, p["roof"])
        rep = abramov_check(base, target, n, cfg.seed, p.get("window", 10), p.get("shards", 10))
        ok = 0.95 <= rep["ratio"] <= 1.05
    else:
        rep = abramov_check(base, _cylinder(p.get("cylinder", "x0=0")), n, cfg.seed, p.get("window", 2),
                            p.get("shards", 10))
        kac_ok = abs(rep["kac_mean"] - rep["kac_target"]) <= 3 * rep["kac_stderr"] or rep["kac_stderr"] == 0
        ok = 0.95 <= rep["ratio"] <= 1.05 and kac_ok
        rep["kac_ok"] = kac_ok
    rep["ok"] = ok
    return rep, ok, None


def _cmd_mixing(cfg, threads):
    _, sysobj = _group_and_system(cfg)
    p = cfg.params
    scales = p.get("scales", list(range(0, 10)))
    layout = p.get("layout", "progression" if sysobj.group.dim == 1 else "random")

    def one(r):
        return mixing_scan(sysobj, None, [r], p.get("family_size", 2), p.get("sample_size", 1_000_000),
                           cfg.seed, layout, p.get("window"))[0]

    reps = _map(one, list(scales), threads)
    # deterministic systems have zero shard spread; the Miller-Madow offset is O(1/n)
    floor = 1.0 / p.get("sample_size", 1_000_000)
    rows, ok = [], True
    for r in reps:
        sub_ok = r.signed_defect <= 3 * r.stderr + floor
        if r.oracle_defect is not None:
            sub_ok &= abs(r.signed_defect - r.oracle_defect) <= 3 * r.stderr + floor
        ok &= bool(sub_ok)
        rows.append({"scale": r.K_radius, "defect": r.defect, "stderr": r.stderr,
                     "oracle_defect": None if r.oracle_defect is None else abs(r.oracle_defect)})
    return {"reports": [r.to_dict() for r in reps], "ok": ok}, ok, rows


def _observable(sample, spec: str) -> np.ndarray:
    if spec == "parity":
        return (sample.labels % 2).astype(float)
    if spec.startswith("indicator:"):
        return (sample.labels == int(spec.split(":")[1])).astype(float)
    raise ConfigError([f"unknown observable {spec!r}; use 'parity' or 'indicator:k'"])


def _tile_shape(G: GroupModel, scale: int) -> ElementSet:
    if G.dim == 1:
        return interval(0, scale - 1)
    return G.folner(scale)


def _cmd_castle(cfg, threads):
    G, sysobj = _group_and_system(cfg)
    p = cfg.params
    W = G.folner(p.get("window", 2000))
    scale = p.get("scale", 100)
    delta = p.get("delta", 0.1)
    K = G.ball(p.get("K", 1))
    F = _tile_shape(G, scale)

    def one(seed):
        s = from_orbit_window(sysobj, W, p.get("rule", "always"), seed)
        h = _observable(s, p.get("observable", "parity"))
        castle = tiling_castle(s, F, delta)
        inv, off = is_castle_invariant(castle, K, p.get("eps", 0.1))
        erg = castle_ergodic_check(s, castle, h, delta)
        mean_dev = deviation_measure(s, ergodic_average(s, h, F), erg.mean, delta, collar_mask(s, F))
        return {"seed": seed, "points": len(s), "towers": int(castle.base.shape[0]),
                "invariant": inv, "offending_mass": off, "ergodic": erg.to_dict(),
                "mean_ergodic_deviation": mean_dev}

    seeds = _replicate_seeds(cfg.seed, p.get("replicates", 1)) if p.get("replicates", 1) > 1 else [cfg.seed]
    runs = _map(one, seeds, threads)
    ok = all(r["ergodic"]["ok"] for r in runs)
    return {"runs": runs, "pass_rate": float(np.mean([r["ergodic"]["ok"] for r in runs]))}, ok, None


def _cmd_transfer(cfg, threads):
    G, sysobj = _group_and_system(cfg)
    p = cfg.params
    W = G.folner(p.get("window", 50))
    box = p.get("box", 1)
    length = p.get("length", (2 * box + 1) ** G.dim)
    eps = p.get("eps", 0.1)

    def one(seed):
        s = from_orbit_window(sysobj, W, p.get("rule", "always"), seed)
        lab = s.labels % 2 if p.get("partition", "symbol") == "parity" else s.labels
        P = Partition(lab)
        beta = lex_rank_sample(s)
        rep = transfer_check(s, beta, P, None, G.folner(box), interval(0, length - 1),
                             eps, p.get("delta", 0.05), p.get("tol", 0.1))
        rep["seed"] = seed
        rep["points"] = len(s)
        return rep

    seeds = _replicate_seeds(cfg.seed, p.get("replicates", 1)) if p.get("replicates", 1) > 1 else [cfg.seed]
    runs = _map(one, seeds, threads)
    ok = all(r["ok"] for r in runs)
    return {"runs": runs}, ok, None


_DISPATCH = {"tile": _cmd_tile, "entropy": _cmd_entropy, "abramov": _cmd_abramov, "mixing": _cmd_mixing,
             "castle-check": _cmd_castle, "transfer": _cmd_transfer}

CHECKERS = {"tile", "abramov", "mixing", "castle-check", "transfer"}


def run(cfg: ExperimentConfig, threads: int = 1) -> tuple[dict, int, list | None]:
    """Execute a validated config; returns (record, exit status, csv rows)."""
    try:
        result, ok, rows = _DISPATCH[cfg.command](cfg, threads)
    except (TilingError, SectionError, EntropyError, MixingError, SystemError_, GroupError) as exc:
        raise ConfigError([f"{type(exc).__name__}: {exc}"]) from None
    record = {
        "schema": SCHEMA,
        "config": cfg.to_dict(),
        "result": result,
        "verdict": ("pass" if ok else "fail") if cfg.command in CHECKERS else None,
        "provenance": {"seed": cfg.seed, "version": __version__,
                       "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds")},
    }
    return record, (0 if ok or cfg.command not in CHECKERS else 1), rows


# ----------------------------------------------------------------------
# argument parsing
# ----------------------------------------------------------------------

_FLAG_PARAMS = {
    "delta": float, "eps": float, "window": int, "density": float, "sample_size": int, "method": str,
    "cylinder": str, "scales": str, "family_size": int, "layout": str, "rule": str, "scale": int,
    "K": int, "observable": str, "box": int, "length": int, "tol": float, "partition": str,
    "replicates": int, "shards": int,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="xsection", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        sp = sub.add_parser(cmd)
        sp.add_argument("--config", help="YAML config file; flags override its values")
        sp.add_argument("--group")
        sp.add_argument("--system")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="write the JSON record here instead of stdout")
        sp.add_argument("--csv", help="write the scan table here (mixing)")
        sp.add_argument("--threads", type=int, help=f"worker threads (default ${THREADS_ENV} or 1)")
        sp.add_argument("--roof", help="comma-separated roof values per base symbol (abramov)")
        sp.add_argument("--samples", type=int, dest="sample_size")
        for name, typ in _FLAG_PARAMS.items():
            if name == "sample_size":
                continue
            flag = "--" + name.replace("_", "-")
            sp.add_argument(flag, type=typ, dest=name)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    doc: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                loaded = yaml.safe_load(fh.read())
        except (OSError, yaml.YAMLError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        if not isinstance(loaded, dict):
            print("config error: config must be a mapping", file=sys.stderr)
            return 2
        doc = loaded
    if doc.get("command") not in (None, args.command):
        print(f"config error: config command {doc.get('command')!r} does not match {args.command!r}", file=sys.stderr)
        return 2
    doc["command"] = args.command
    for key in ("group", "system", "seed"):
        if getattr(args, key) is not None:
            doc[key] = getattr(args, key)
    params = dict(doc.get("params") or {})
    for name in _FLAG_PARAMS:
        v = getattr(args, name, None)
        if v is not None:
            params[name] = v
    if args.roof is not None:
        params["roof"] = [int(v) for v in args.roof.split(",")]
    doc["params"] = params
    if args.out:
        doc["output"] = args.out
    try:
        cfg = validate_config(doc)
        record, status, rows = run(cfg, _threads(args.threads))
    except ConfigError as exc:
        for p in exc.problems:
            print(f"config error: {p}", file=sys.stderr)
        return 2
    text = dumps(record) + "\n"
    if cfg.output:
        with open(cfg.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.csv and rows:
        _csv(rows, args.csv)
    return status


if __name__ == "__main__":
    sys.exit(main())
