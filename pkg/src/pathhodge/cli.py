"""Command line harness: ``pathhodge run --config FILE`` and ``pathhodge list-suites``."""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import tomli

from . import suites as S

REPORT_SCHEMA = "pathhodge.report/1"
OUT_ENV = "PATHHODGE_OUT"
DEFAULT_SEED = 20240607


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    seed: int = DEFAULT_SEED
    suites: list = field(default_factory=lambda: list(S.SUITES))
    out: str = "pathhodge-out"
    params: dict = field(default_factory=dict)  # suite -> params dataclass
    source: dict = field(default_factory=dict)  # parsed TOML, echoed in the report


_TOP_KEYS = {"seed", "suites", "out", "manifold", "grid", "mc", "tolerances", "params"}
# global sections feed suite parameters of the same meaning
_GRID_KEYS = {"horizon": "horizon", "steps": "steps", "refinement": "refinement"}
_MC_KEYS = {"paths": "paths", "resamples": "resamples", "chunk": "chunk"}
_TOLERANCES = {
    "heat_sigmas",
    "derivative_rel",
    "filtering_sigmas",
    "filtering_allowance",
    "identity_tol",
    "reconstruction_tol",
    "correlation_scale",
    "variance_tol",
    "residual_tol",
    "flat_tol",
    "dd_tol",
    "chain_rel",
    "ibp_sigmas",
    "symmetry_tol",
    "spectrum_tol",
    "decomposition_tol",
}


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:  # message carries line and column
        raise ConfigError(f"{path}: {exc}") from exc
    return build_config(doc)


def build_config(doc: dict) -> ExperimentConfig:
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    seed = doc.get("seed", DEFAULT_SEED)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    names = doc.get("suites", list(S.SUITES))
    if isinstance(names, str):
        names = [names]
    missing = [n for n in names if n not in S.SUITES]
    if missing:
        raise ConfigError(f"unknown suites {missing}; available: {list(S.SUITES)}")

    overrides = {}
    if "manifold" in doc:
        m = doc["manifold"]
        extra = set(m) - {"kind", "dim"}
        if extra or "kind" not in m:
            raise ConfigError("[manifold] takes 'kind' and optional 'dim'")
        spec = m["kind"] + (f":{m['dim']}" if "dim" in m else "")
        try:
            S.parse_manifold(spec)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"[manifold]: {exc}") from exc
        overrides["manifold"] = spec
    for section, table in (("grid", _GRID_KEYS), ("mc", _MC_KEYS)):
        sec = doc.get(section, {})
        extra = set(sec) - set(table)
        if extra:
            raise ConfigError(f"unknown keys in [{section}]: {sorted(extra)}")
        for k, v in sec.items():
            overrides[table[k]] = v
    ref = overrides.get("refinement")
    if ref is not None and (not all(isinstance(n, int) for n in ref) or any(b <= a for a, b in zip(ref, ref[1:]))):
        raise ConfigError("grid.refinement must be a strictly increasing list of integers")
    tol = doc.get("tolerances", {})
    extra = set(tol) - _TOLERANCES
    if extra:
        raise ConfigError(f"unknown tolerances: {sorted(extra)}")
    overrides.update(tol)

    per_suite = doc.get("params", {})
    bad = set(per_suite) - set(S.SUITES)
    if bad:
        raise ConfigError(f"[params.*] for unknown suites: {sorted(bad)}")
    params = {}
    for name in S.SUITES:
        allowed = set(S.param_names(name))
        kw = {k: v for k, v in overrides.items() if k in allowed}
        own = per_suite.get(name, {})
        extra = set(own) - allowed
        if extra:
            raise ConfigError(f"unknown keys in [params.{name}]: {sorted(extra)}; allowed: {sorted(allowed)}")
        kw.update(own)
        params[name] = S.with_overrides(S.default_params(name), **kw)
    out = doc.get("out", "pathhodge-out")
    return ExperimentConfig(seed, list(names), out, params, doc)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in r])


def run_experiment(cfg: ExperimentConfig, out_dir=None, log=print) -> tuple[dict, bool]:
    """Run the selected suites and write ``report.json`` plus CSV tables."""
    out = Path(out_dir or os.environ.get(OUT_ENV) or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    from . import __version__

    report = {
        "schema": REPORT_SCHEMA,
        "artifact_version": __version__,
        "seed": cfg.seed,
        "config": {"suites": cfg.suites, "params": {k: asdict(cfg.params[k]) for k in cfg.suites}},
        "suites": [],
        "metadata": {"started": _dt.datetime.now(_dt.timezone.utc).isoformat(), "runtime_seconds": {}},
    }
    ok = True
    for name in cfg.suites:
        try:
            res = S.run_suite(name, cfg.params[name], cfg.seed)
        except Exception as exc:  # recorded, the run continues
            log(f"[{name}] ERROR {type(exc).__name__}: {exc}")
            report["suites"].append({"name": name, "passed": False, "error": f"{type(exc).__name__}: {exc}", "rows": []})
            ok = False
            continue
        report["metadata"]["runtime_seconds"][name] = round(res.runtime, 3)
        for row, sec in res.row_runtimes.items():
            report["metadata"]["runtime_seconds"][f"{name}.{row}"] = round(sec, 3)
        rows = [r.as_dict() for r in res.rows]
        report["suites"].append({"name": name, "passed": res.passed, "rows": rows})
        _write_csv(
            out / f"{name}_checks.csv",
            ["name", "measured", "bound", "stderr", "passed"],
            [(r["name"], r["measured"], r["bound"], "" if r["stderr"] is None else r["stderr"], r["passed"]) for r in rows],
        )
        for stem, (header, table) in res.tables.items():
            _write_csv(out / f"{stem}.csv", header, table)
        for fname, text in res.artifacts.items():
            (out / fname).write_text(text)
        for r in res.rows:
            log(f"[{name}] {'PASS' if r.passed else 'FAIL'} {r.name}: measured={r.measured:.4g} bound={r.bound:.4g}")
        ok = ok and res.passed
    (out / "report.json").write_text(json.dumps(report, indent=1, sort_keys=True))
    return report, ok


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="pathhodge", description="Path-space Hodge verification suites")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run verification suites from a TOML config")
    run.add_argument("--config", required=True, help="TOML experiment config")
    run.add_argument("--suite", action="append", help="run only this suite (repeatable)")
    run.add_argument("--out", help=f"output directory (overrides config and ${OUT_ENV})")
    run.add_argument("--seed", type=int, help="override the config seed")
    sub.add_parser("list-suites", help="list available suites")
    args = parser.parse_args(argv)

    if args.command == "list-suites":
        for name, (_, _, desc) in S.SUITES.items():
            print(f"{name:9s} {desc}")
        return 0
    try:
        cfg = load_config(args.config)
        if args.suite:
            missing = [n for n in args.suite if n not in S.SUITES]
            if missing:
                raise ConfigError(f"unknown suites {missing}; available: {list(S.SUITES)}")
            cfg.suites = list(args.suite)
        if args.seed is not None:
            cfg.seed = args.seed
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    _, ok = run_experiment(cfg, args.out)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
