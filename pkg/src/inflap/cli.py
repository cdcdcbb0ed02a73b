"""Command-line front end: config-driven solve / game / rates / depend /
verify / oracle1d runs emitting CSV and JSON artifacts.

Configs are plain key=value files with [section] headers (see KEY_DOC for
every recognized key).  Exit codes: 0 success, 2 validation error, 3
certification failure (solver bug class), 4 divergence.  Artifacts are
deterministic: the same config produces bit-identical bytes, and report.json
echoes the config so a run can be reproduced from its own report.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .expressions import Expression, ExpressionError
from .geometry import (DomainError, LatticeDomain, build_box, build_interval,
                       load_mask)
from .operator import GridFunction, OperatorError
from .solver import (CertificationError, DivergenceError, ProblemSpec,
                     standard_game_1d_oracle, solve)
from .game import GameConfig, GameError, Strategy, simulate
from . import study as study_mod

__all__ = ["main", "run", "RunConfig", "ConfigError"]

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CERTIFICATION = 3
EXIT_DIVERGENCE = 4


class ConfigError(ValueError):
    pass


KEY_DOC = {
    "run": {
        "command": "one of solve | game | rates | depend | verify | oracle1d",
        "output_dir": "directory for artifacts (created if missing)",
        "tol": "solver tolerance (default 1e-10)",
        "max_sweeps": "sweep cap before divergence is reported "
                      "(default 1000000)",
    },
    "domain": {
        "kind": "interval | box | mask",
        "a": "interval left endpoint",
        "b": "interval right endpoint",
        "x0": "box lower x", "x1": "box upper x",
        "y0": "box lower y", "y1": "box upper y",
        "mask_path": "path to a {0,1} text grid or plain PGM (P2) mask",
        "h": "lattice spacing",
    },
    "problem": {
        "f": "running payoff expression in x[,y] (default 0)",
        "g": "boundary data expression in x[,y] (default 0)",
        "eps": "step radius eps (solve, game, depend)",
        "eps_list": "comma-separated eps values (rates)",
        "gamma_list": "comma-separated gamma values, strictly decreasing "
                      "(depend)",
    },
    "game": {
        "strategy_i": "pull:<x[,y]> | greedy_max | greedy_min | uniform",
        "strategy_ii": "pull:<x[,y]> | greedy_max | greedy_min | uniform",
        "replications": "number of independent games",
        "seed": "64-bit RNG seed",
        "start": "starting coordinates x[,y] (nearest interior point)",
        "max_steps": "truncation cap (default min(1e7/eps^2, 1e8))",
        "trajectories": "1 to dump per-step trajectories.csv (small runs)",
    },
    "rates": {
        "family": "1d_linear | 1d_f1 | 2d_cone | 2d_tent",
    },
    "oracle1d": {
        "k": "number of interval cells (>= 2)",
    },
}

COMMANDS = ("solve", "game", "rates", "depend", "verify", "oracle1d")


class RunConfig:
    """Validated view of a parsed config file."""

    def __init__(self, text: str):
        self.text = text
        parser = configparser.ConfigParser(interpolation=None, strict=True)
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"config parse error: {exc}") from exc
        self.sections = {s: dict(parser.items(s)) for s in parser.sections()}
        unknown = []
        for sec, keys in self.sections.items():
            if sec not in KEY_DOC:
                unknown.append(f"[{sec}]")
                continue
            for key in keys:
                if key not in KEY_DOC[sec]:
                    unknown.append(f"[{sec}] {key}")
        if unknown:
            raise ConfigError("unknown config keys: " + ", ".join(unknown))
        self.command = self.get("run", "command", required=True)
        if self.command not in COMMANDS:
            raise ConfigError(f"command must be one of {COMMANDS}, got "
                              f"{self.command!r}")
        self.output_dir = self.get("run", "output_dir", required=True)
        self.tol = float(self.get("run", "tol", "1e-10"))
        self.max_sweeps = int(self.get("run", "max_sweeps", "1000000"))

    def get(self, section, key, default=None, required=False):
        val = self.sections.get(section, {}).get(key, default)
        if required and val is None:
            raise ConfigError(f"missing required key [{section}] {key}")
        return val

    def canonical(self) -> str:
        lines = []
        for sec in sorted(self.sections):
            lines.append(f"[{sec}]")
            for key in sorted(self.sections[sec]):
                lines.append(f"{key}={self.sections[sec][key]}")
        return "\n".join(lines) + "\n"

    def instance_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# config -> objects
# ---------------------------------------------------------------------------

def _build_domain(cfg: RunConfig, h_override: float | None = None
                  ) -> LatticeDomain:
    kind = cfg.get("domain", "kind", required=True)
    h = h_override if h_override is not None \
        else float(cfg.get("domain", "h", required=True))
    if kind == "interval":
        return build_interval(float(cfg.get("domain", "a", required=True)),
                              float(cfg.get("domain", "b", required=True)), h)
    if kind == "box":
        return build_box(float(cfg.get("domain", "x0", required=True)),
                         float(cfg.get("domain", "x1", required=True)),
                         float(cfg.get("domain", "y0", required=True)),
                         float(cfg.get("domain", "y1", required=True)), h)
    if kind == "mask":
        path = cfg.get("domain", "mask_path", required=True)
        if not os.path.exists(path):
            raise ConfigError(f"mask file does not exist: {path}")
        return load_mask(path, h)
    raise ConfigError(f"domain kind must be interval | box | mask, got "
                      f"{kind!r}")


def _grid_from_expr(cfg: RunConfig, dom: LatticeDomain, key: str,
                    default: str) -> GridFunction:
    text = cfg.get("problem", key, default)
    expr = Expression(text)
    lo = dom.points.min(axis=0)
    hi = dom.points.max(axis=0)
    expr.probe(lo, hi, dom.dim)
    return GridFunction(dom, expr.eval_many(dom.points))


def _problem(cfg: RunConfig) -> ProblemSpec:
    dom = _build_domain(cfg)
    eps = float(cfg.get("problem", "eps", required=True))
    f = _grid_from_expr(cfg, dom, "f", "0")
    g = _grid_from_expr(cfg, dom, "g", "0")
    return ProblemSpec(dom, f, g, eps, cfg.tol, cfg.max_sweeps)


def _nearest_point(dom: LatticeDomain, text: str, interior: bool) -> int:
    coords = np.array([float(t) for t in text.split(",")])
    if coords.size != dom.dim:
        raise ConfigError(f"coordinates {text!r} do not match the domain "
                          f"dimension {dom.dim}")
    ids = dom.interior_ids if interior else np.arange(dom.n_points)
    d = np.sum((dom.points[ids] - coords) ** 2, axis=1)
    return int(ids[int(np.argmin(d))])


def _strategy(cfg: RunConfig, key: str, u_max: GridFunction,
              dom: LatticeDomain) -> Strategy:
    text = cfg.get("game", key, required=True)
    if text.startswith("pull:"):
        return Strategy.pull_toward(_nearest_point(dom, text[5:],
                                                   interior=False))
    if text == "greedy_max":
        return Strategy.greedy_max(u_max)
    if text == "greedy_min":
        return Strategy.greedy_min(u_max)
    if text == "uniform":
        return Strategy.uniform()
    raise ConfigError(f"unknown strategy {text!r} for [game] {key}")


# ---------------------------------------------------------------------------
# artifact helpers
# ---------------------------------------------------------------------------

class _ArtifactSink:
    """Tracks written files so partial output is removed on failure."""

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        self.created_dir = not os.path.isdir(out_dir)
        self.files: list[str] = []
        os.makedirs(out_dir, exist_ok=True)

    def write_text(self, name: str, text: str) -> str:
        path = os.path.join(self.out_dir, name)
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
        self.files.append(path)
        print(f"wrote {path}")
        return path

    def write_json(self, name: str, obj: dict) -> str:
        return self.write_text(name, json.dumps(obj, sort_keys=True,
                                                indent=1) + "\n")

    def cleanup(self):
        for path in self.files:
            try:
                os.unlink(path)
            except OSError:
                pass
        if self.created_dir:
            try:
                os.rmdir(self.out_dir)
            except OSError:
                pass


def _report_stub(cfg: RunConfig) -> dict:
    return {
        "version": __version__,
        "instance_hash": cfg.instance_hash(),
        "command": cfg.command,
        "config_text": cfg.text,
        "config": cfg.sections,
    }


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _cmd_solve(cfg: RunConfig, sink: _ArtifactSink) -> int:
    p = _problem(cfg)
    rep = solve(p)
    dom = p.domain
    lines = ["point_id,x,u_max,u_min" if dom.dim == 1
             else "point_id,x,y,u_max,u_min"]
    for i in range(dom.n_points):
        coords = ",".join(f"{c:.17g}" for c in dom.points[i])
        lines.append(f"{i},{coords},{rep.u_max.values[i]:.17g},"
                     f"{rep.u_min.values[i]:.17g}")
    sink.write_text("solution.csv", "\n".join(lines) + "\n")
    report = _report_stub(cfg)
    report["solve"] = rep.to_json_obj()
    sink.write_json("report.json", report)
    print(f"solve: gap={rep.gap:.3e} unique={rep.unique} "
          f"sweeps={rep.sweeps_max}+{rep.sweeps_min}")
    return EXIT_OK


def _cmd_game(cfg: RunConfig, sink: _ArtifactSink) -> int:
    p = _problem(cfg)
    needs_value = any(
        cfg.get("game", key, required=True) in ("greedy_max", "greedy_min")
        for key in ("strategy_i", "strategy_ii"))
    u_max = solve(p).u_max if needs_value else GridFunction.zeros(p.domain)
    start = _nearest_point(p.domain, cfg.get("game", "start", required=True),
                           interior=True)
    game_cfg = GameConfig(
        p, start,
        _strategy(cfg, "strategy_i", u_max, p.domain),
        _strategy(cfg, "strategy_ii", u_max, p.domain),
        int(cfg.get("game", "replications", required=True)),
        int(cfg.get("game", "seed", required=True)),
        max_steps=(int(cfg.get("game", "max_steps"))
                   if cfg.get("game", "max_steps") else None),
    )
    stats = simulate(game_cfg)
    if cfg.get("game", "trajectories", "0") == "1":
        from .game import record_trajectories

        rows = record_trajectories(game_cfg)
        lines = ["replication,step,point_id"]
        lines += [f"{r},{s},{pid}" for r, s, pid in rows]
        sink.write_text("trajectories.csv", "\n".join(lines) + "\n")
    report = _report_stub(cfg)
    report["game"] = stats.to_json_obj()
    report["game"]["start"] = start
    sink.write_json("game.json", report)
    print(f"game: mean={stats.mean_payoff:.6g} stderr={stats.stderr:.3g} "
          f"mean_duration={stats.mean_duration:.1f}")
    return EXIT_OK


def _cmd_rates(cfg: RunConfig, sink: _ArtifactSink) -> int:
    family = cfg.get("rates", "family", required=True)
    if family not in study_mod.RATE_FAMILIES:
        raise ConfigError(f"unknown rate family {family!r}; choose from "
                          f"{sorted(study_mod.RATE_FAMILIES)}")
    eps_list = _float_list(cfg.get("problem", "eps_list", required=True))
    rep = study_mod.rate_study(family, eps_list, cfg.tol)
    sink.write_text("rates.csv", rep.to_csv())
    report = _report_stub(cfg)
    report["rates"] = rep.to_json_obj()
    sink.write_json("report.json", report)
    alpha = "exact" if rep.exact else f"{rep.alpha_hat:.3f}"
    print(f"rates[{family}]: alpha_hat={alpha}")
    return EXIT_OK


def _cmd_depend(cfg: RunConfig, sink: _ArtifactSink) -> int:
    p = _problem(cfg)
    gammas = _float_list(cfg.get("problem", "gamma_list", required=True))
    rep = study_mod.dependence_study(p, gammas)
    sink.write_text("depend.csv", rep.to_csv())
    report = _report_stub(cfg)
    report["depend"] = rep.to_json_obj()
    sink.write_json("report.json", report)
    print(f"depend: bound_constant={rep.bound_constant:.3f} "
          f"monotone={rep.pointwise_monotone}")
    return EXIT_OK


def _cmd_verify(cfg: RunConfig, sink: _ArtifactSink) -> int:
    from .verify import stock_verifier_suite

    results = stock_verifier_suite(tol=cfg.tol)
    report = _report_stub(cfg)
    report["verify"] = [{"name": n, "passed": ok, "detail": detail}
                        for n, ok, detail in results]
    sink.write_json("report.json", report)
    all_ok = all(ok for _, ok, _ in results)
    for name, ok, detail in results:
        print(f"verify {name}: {'pass' if ok else 'FAIL'} ({detail})")
    return EXIT_OK if all_ok else EXIT_CERTIFICATION


def _cmd_oracle1d(cfg: RunConfig, sink: _ArtifactSink) -> int:
    k = int(cfg.get("oracle1d", "k", required=True))
    v = standard_game_1d_oracle(k)
    lines = ["j,v_j"] + [f"{j + 1},{v[j]:.17g}" for j in range(k)]
    sink.write_text("oracle.csv", "\n".join(lines) + "\n")
    report = _report_stub(cfg)
    report["oracle1d"] = {"k": k, "values": [float(x) for x in v]}
    sink.write_json("report.json", report)
    print(f"oracle1d: k={k} v_1={v[0]:.6g}")
    return EXIT_OK


_DISPATCH = {
    "solve": _cmd_solve,
    "game": _cmd_game,
    "rates": _cmd_rates,
    "depend": _cmd_depend,
    "verify": _cmd_verify,
    "oracle1d": _cmd_oracle1d,
}


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad numeric list {text!r}") from exc


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def run(config_path: str) -> int:
    """Execute the command described by a config file; returns the exit
    code (0 ok, 2 validation, 3 certification failure, 4 divergence)."""
    try:
        with open(config_path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        cfg = RunConfig(text)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    sink = _ArtifactSink(cfg.output_dir)
    try:
        return _DISPATCH[cfg.command](cfg, sink)
    except (ConfigError, ExpressionError, DomainError, OperatorError,
            GameError, ValueError) as exc:
        sink.cleanup()
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except DivergenceError as exc:
        sink.cleanup()
        print(f"error: solver divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except CertificationError as exc:
        sink.cleanup()
        print(f"error: certification failure: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATION


def _key_help() -> str:
    lines = ["config keys:"]
    for sec, keys in KEY_DOC.items():
        lines.append(f"  [{sec}]")
        for key, doc in keys.items():
            lines.append(f"    {key:<12} {doc}")
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="inflap",
        description="Finite-difference infinity Laplace solver and "
                    "boundary-biased tug-of-war simulator.",
        epilog=_key_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("config", help="path to a key=value config file")
    parser.add_argument("--version", action="version",
                        version=f"inflap {__version__}")
    args = parser.parse_args(argv)
    return run(args.config)


if __name__ == "__main__":
    sys.exit(main())
