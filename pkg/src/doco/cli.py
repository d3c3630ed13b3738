"""Command line driver: ``doco run`` and ``doco sweep``.

Configuration files are INI style::

    [run]
    scenario = sinusoidal     ; or rods
    algorithm = doco          ; or odg
    alpha = 1/(2Lg)           ; number, k/Lg, 1/(kLg), theoretical, theoretical/k
    T = 5000
    prediction = true

    [sinusoidal]
    period_s = 10

Any key can be overridden with ``--set key=value`` or ``--set section.key=value``.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import logging
import math
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import algo, metrics, scenarios, theory

log = logging.getLogger("doco")

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3
SCENARIOS = ("sinusoidal", "rods")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    algorithm: str = "doco"
    alpha: str = "1/(2Lg)"
    T: int = 5000
    seed: int = 0
    init: str = "zeros"
    prediction: bool = True
    backend: str = "auto"
    sinusoidal: scenarios.SinusoidalConfig = field(default_factory=scenarios.SinusoidalConfig)
    rods: scenarios.RodsConfig = field(default_factory=scenarios.RodsConfig)


_RUN_KEYS = {f.name: f for f in dataclasses.fields(RunConfig) if f.name not in SCENARIOS}
_SECTION_TYPES = {"sinusoidal": scenarios.SinusoidalConfig, "rods": scenarios.RodsConfig}
# owned by [run] so the seed and prediction switch have one source of truth
_SHADOWED = {"seed", "prediction"}


def _section_keys(section: str) -> dict:
    if section == "run":
        return {k: (f.default if f.default is not dataclasses.MISSING else None)
                for k, f in _RUN_KEYS.items()}
    cls = _SECTION_TYPES[section]
    return {f.name: f.default for f in dataclasses.fields(cls) if f.name not in _SHADOWED}


def _coerce(key: str, raw: str, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            states = configparser.ConfigParser.BOOLEAN_STATES
            if raw.lower() not in states:
                raise ValueError(raw)
            return states[raw.lower()]
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            vals = tuple(float(v) for v in raw.strip("()[] ").split(","))
            if len(vals) != 2:
                raise ValueError(raw)
            return vals
    except ValueError:
        raise ConfigError(f"cannot parse {key} = {raw!r}") from None
    return raw


def _split_key(key: str):
    if "." in key:
        section, name = key.split(".", 1)
        return section.strip(), name.strip()
    name = key.strip()
    owners = [s for s in ("run",) + SCENARIOS if name in _section_keys(s)]
    if not owners:
        return None, name
    return owners[0], name


def parse_config(path=None, overrides=(), seed=None) -> RunConfig:
    """Merge defaults, an optional config file and ``key=value`` overrides.

    Raises
    ------
    ConfigError
        Unknown sections or keys (all of them are listed), unparseable
        values, or a missing ``scenario``.
    """
    values = {s: {} for s in ("run",) + SCENARIOS}
    unknown = []
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        parser.optionxform = str
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from None
        for section in parser.sections():
            if section not in values:
                unknown.append(f"[{section}]")
                continue
            for key, raw in parser.items(section):
                values[section][key] = raw
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        section, name = _split_key(key)
        if section is None or section not in values:
            unknown.append(key.strip())
            continue
        values[section][name] = raw
    for section, entries in values.items():
        allowed = _section_keys(section)
        unknown.extend(f"{section}.{k}" for k in entries if k not in allowed)
    if unknown:
        raise ConfigError("unknown config keys: " + ", ".join(unknown))

    run = {k: _coerce(k, v, _section_keys("run")[k] if k != "scenario" else "")
           for k, v in values["run"].items()}
    if seed is not None:
        run["seed"] = int(seed)
    if "scenario" not in run:
        raise ConfigError("missing required key run.scenario")
    if run["scenario"] not in SCENARIOS:
        raise ConfigError(f"scenario must be one of {SCENARIOS}, got {run['scenario']!r}")
    if run.get("algorithm", "doco") not in algo.ALGORITHMS:
        raise ConfigError(f"algorithm must be one of {algo.ALGORITHMS}, got {run['algorithm']!r}")
    if run.get("backend", "auto") not in ("auto", "python", "compiled"):
        raise ConfigError(f"backend must be auto, python or compiled, got {run['backend']!r}")
    if int(run.get("T", 1)) < 1:
        raise ConfigError("T must be at least 1")
    if int(run.get("seed", 0)) < 0:
        raise ConfigError("seed must be nonnegative")
    parse_alpha(run.get("alpha", RunConfig.alpha))

    shared = {"seed": run.get("seed", RunConfig.seed)}
    sections = {}
    for name, cls in _SECTION_TYPES.items():
        defaults = _section_keys(name)
        kw = {k: _coerce(k, v, defaults[k]) for k, v in values[name].items()}
        kw.update(shared)
        if name == "sinusoidal":
            kw["prediction"] = run.get("prediction", RunConfig.prediction)
        sections[name] = cls(**kw)
    cfg = RunConfig(**run, **sections)
    log.info("resolved config: %s", cfg)
    return cfg


_ALPHA_RE = re.compile(
    r"^\s*(?P<num>[0-9.]+(?:e[-+]?\d+)?)\s*/\s*(?:\(\s*(?P<k>[0-9.]+(?:e[-+]?\d+)?)?\s*\*?\s*L_?g\s*\)"
    r"|(?P<k2>[0-9.]+(?:e[-+]?\d+)?)?\s*\*?\s*L_?g)\s*$", re.IGNORECASE)
_THEORY_RE = re.compile(r"^\s*theoretical\s*(?:/\s*(?P<k>[0-9.]+(?:e[-+]?\d+)?))?\s*$", re.IGNORECASE)


def parse_alpha(spec):
    """Parse a step size spec into ``(kind, factor)``.

    ``kind`` is ``"value"`` (factor is the step size), ``"Lg"`` (step size is
    ``factor / L_g``) or ``"theoretical"`` (``factor`` times the upper bound).
    """
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        spec = repr(float(spec))
    text = str(spec).strip()
    try:
        m = _THEORY_RE.match(text)
        if m:
            k = float(m.group("k")) if m.group("k") else 1.0
            if not k > 0:
                raise ValueError
            return "theoretical", 1.0 / k
        m = _ALPHA_RE.match(text)
        if m:
            num = float(m.group("num"))
            k = m.group("k") or m.group("k2")
            den = float(k) if k else 1.0
            if not (den > 0 and num > 0):
                raise ValueError
            return "Lg", num / den
    except ValueError:
        raise ConfigError(f"bad step size {spec!r}") from None
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"unknown step size {spec!r}") from None
    if not (value > 0 and math.isfinite(value)):
        raise ConfigError(f"step size must be positive and finite, got {spec!r}")
    return "value", value


def resolve_alpha(spec, L_g: float, mu: float, n: int, sigma_W: float) -> float:
    kind, factor = parse_alpha(spec)
    if kind == "value":
        return factor
    if kind == "Lg":
        return factor / L_g
    return factor * theory.stepsize_upper_bound(L_g, mu, n, sigma_W)


def build_scenario(cfg: RunConfig):
    steps = cfg.T
    if cfg.scenario == "sinusoidal":
        return scenarios.build_sinusoidal(cfg.sinusoidal, steps)
    return scenarios.build_rods(cfg.rods, steps)


@dataclass
class RunResult:
    config: RunConfig
    record: algo.TrajectoryRecord
    scenario: object
    summary: dict


def execute(cfg: RunConfig) -> RunResult:
    """Build the scenario, resolve the step size, run and collect the summary."""
    scen = build_scenario(cfg)
    L, mu = scen.objective.convexity_constants()
    n, sigma = scen.objective.n, scen.topology.sigma_W
    alpha = resolve_alpha(cfg.alpha, L, mu, n, sigma)
    log.info("alpha %s resolved to %.6g (L_g=%.6g, mu=%.6g)", cfg.alpha, alpha, L, mu)
    backend = None if cfg.backend == "auto" else cfg.backend
    rec = algo.run(scen, cfg.algorithm, alpha, cfg.T, init=cfg.init, seed=cfg.seed, backend=backend)
    return RunResult(cfg, rec, scen, summarize(cfg, scen, rec, L, mu))


def summarize(cfg: RunConfig, scen, rec: algo.TrajectoryRecord, L: float, mu: float) -> dict:
    n, sigma = scen.objective.n, scen.topology.sigma_W
    bound = theory.stepsize_upper_bound(L, mu, n, sigma)
    out = {
        "scenario": cfg.scenario, "algorithm": cfg.algorithm, "seed": cfg.seed,
        "alpha_spec": cfg.alpha, "alpha": rec.alpha, "T": cfg.T, "steps": rec.steps,
        "diverged": int(rec.diverged), "n": n, "d": scen.objective.d,
        "sigma_W": sigma, "L_g": L, "mu": mu, "norm_A": rec.meta["norm_A"],
        "stepsize_bound": bound, "alpha_within_bound": int(rec.alpha <= bound),
        "regret_final": rec.regret[-1], "path_length_final": rec.path_length[-1],
        "grad_variation_final": rec.grad_variation[-1],
        "G": rec.G, "C_w": rec.C_w, "C_g": rec.C_g,
        "C1": rec.C1, "C2": rec.C2, "C3": rec.C3,
        "conservation_max": float(rec.conservation.max()) if cfg.algorithm == "doco" else math.nan,
    }
    params = theory.TheoryParams(L, mu, n, sigma, rec.alpha, C_w=rec.C_w, C_g=rec.C_g, G=rec.G)
    try:
        const = theory.lemma_a1_constants(params)
    except theory.StepsizeError:
        const = None
    for i in range(3):
        for j in range(3):
            out[f"c{i + 1}{j + 1}"] = const.c[i, j] if const else math.nan
    out["det_I_minus_Phi"] = const.det if const else math.nan
    out["K"] = const.K if const else math.nan
    out["spectral_radius_Phi"] = theory.spectral_radius_3x3(theory.phi_matrix(params))
    out["stability_margin"] = theory.stability_margin(params)
    if const is not None and not rec.diverged:
        B = theory.regret_bound(const, rec.C1, rec.C2, rec.C3, rec.path_length, rec.grad_variation)
        out["regret_bound_final"] = float(B[-1])
        out["regret_within_bound"] = int(np.all(rec.regret <= B))
        out["tracking_limit_bound"] = theory.asymptotic_tracking_bound(const, rec.C_w, rec.C_g)
    else:
        out["regret_bound_final"] = out["tracking_limit_bound"] = math.nan
        out["regret_within_bound"] = ""
    if cfg.algorithm == "doco" and not rec.diverged:
        report = metrics.verify_step_inequalities(rec.z, rec.d, params, rec.meta["norm_A"])
        for name, res in report.items():
            out[f"{name}_status"] = res.status
            out[f"{name}_violations"] = res.violations
    return out


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def trajectory_rows(result: RunResult):
    rec, scen = result.record, result.scenario
    header = ["t"]
    for name in scen.report_names:
        header += [f"true_{name}", f"est_{name}"]
    header += ["regret", "path_length", "grad_variation",
               "z_tracking", "z_consensus_x", "z_consensus_y", "diverged"]
    rows = []
    for t in range(rec.steps + 1):
        row = [t]
        for k in scen.report_index:
            row += [scen.truth[t, k], rec.x[t, 0, k]]
        row += [rec.regret[t], rec.path_length[t], rec.grad_variation[t], *rec.z[t],
                int(rec.diverged and t == rec.steps)]
        rows.append([_fmt(v) for v in row])
    return header, rows


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_outputs(result: RunResult, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header, rows = trajectory_rows(result)
    _write_csv(out / "trajectory.csv", header, rows)
    _write_csv(out / "summary.csv", ["key", "value"],
               [[k, _fmt(v)] for k, v in result.summary.items()])


def with_override(cfg: RunConfig, key: str, raw: str) -> RunConfig:
    """Copy of `cfg` with one key replaced, validated like a ``--set`` override."""
    section, name = _split_key(key)
    if section is None or name not in _section_keys(section):
        raise ConfigError(f"unknown config keys: {key}")
    if section == "run":
        default = _section_keys("run")[name] if name != "scenario" else ""
        value = _coerce(name, raw, default)
        if name == "alpha":
            parse_alpha(value)
        new = dataclasses.replace(cfg, **{name: value})
        if name in ("seed", "prediction"):
            new = dataclasses.replace(
                new,
                sinusoidal=dataclasses.replace(new.sinusoidal, **{name: value}),
                rods=dataclasses.replace(new.rods, seed=new.seed))
        return new
    sub = getattr(cfg, section)
    value = _coerce(name, raw, _section_keys(section)[name])
    return dataclasses.replace(cfg, **{section: dataclasses.replace(sub, **{name: value})})


def _sweep_one(args):
    cfg, out_dir = args
    result = execute(cfg)
    write_outputs(result, out_dir)
    header, rows = trajectory_rows(result)
    return header, rows


def _safe_dirname(axis: str, value: str) -> str:
    return re.sub(r"[^A-Za-z0-9._=-]+", "_", f"{axis}={value}")


def sweep(cfg: RunConfig, axis: str, values, out_dir, jobs: int = 1) -> Path:
    """One independent run per value; per-run outputs plus a long-format ``sweep.csv``."""
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    cfgs = [with_override(cfg, axis, v) for v in values]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(c, out / _safe_dirname(axis, v)) for c, v in zip(cfgs, values)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            results = list(pool.map(_sweep_one, tasks))
    else:
        results = [_sweep_one(t) for t in tasks]
    # columns differ only if the axis changes the scenario shape; use the union in order
    header = ["axis_value"]
    for h, _ in results:
        header += [c for c in h if c not in header]
    rows = []
    for value, (h, body) in zip(values, results):
        idx = {c: i for i, c in enumerate(h)}
        for r in body:
            rows.append([value] + [r[idx[c]] if c in idx else "" for c in header[1:]])
    path = out / "sweep.csv"
    _write_csv(path, header, rows)
    return path


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="doco", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", type=Path, help="INI config file")
        sp.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config key (repeatable)")
        sp.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        sp.add_argument("--seed", type=int, help="run seed (overrides the config)")
        sp.add_argument("-v", "--verbose", action="count", default=0, help="log progress (-vv for debug)")

    common(sub.add_parser("run", help="run one experiment"))
    sw = sub.add_parser("sweep", help="run one experiment per value of a config key")
    common(sw)
    sw.add_argument("--axis", required=True, help="config key to vary, e.g. alpha or sinusoidal.period_s")
    sw.add_argument("--values", nargs="+", required=True, help="values of the axis")
    sw.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="parallel worker processes")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config, args.overrides, args.seed)
        if args.command == "run":
            result = execute(cfg)
            write_outputs(result, args.out)
            if result.record.diverged:
                log.warning("run diverged at step %d", result.record.steps)
        else:
            sweep(cfg, args.axis, args.values, args.out, max(1, args.jobs))
    except (ConfigError, theory.StepsizeError) as exc:
        print(f"doco: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"doco: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:  # invalid scenario parameters surface here
        print(f"doco: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
