"""Command-line entry point.

Every subcommand writes ``<command>.json`` (summary) and ``<command>.csv``
(per-row detail) into ``--out`` and echoes the JSON to stdout. Both files
embed the resolved configuration and seed and contain no timing data, so
identical arguments give byte-identical files. Elapsed times go to stderr.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.

Config files hold ``key = value`` lines (``#`` starts a comment; values
are parsed as JSON when possible, otherwise kept as strings) or a single
JSON object. Keys are the long option names with ``-`` replaced by ``_``.
Explicit command-line flags override the file.
"""

from __future__ import annotations

import argparse
import csv
import inspect
import io
import json
import math
import os
import re
import sys
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .diagnostics import diagnostics_record
from .equalize import EqualizerConfig, EqualizerError, phase_ensemble
from .estimators import fast_path_abelian, group_avg_covariance
from .experiments import EXPERIMENTS, run_experiment
from .groups import GroupError, parse_group_spec
from .linalg import ConvergenceError, LinalgError
from .matching import TAU_NOISELESS, TAU_SAMPLE, GeneratorBasis, natural_basis, pipeline, sequential_gevp
from .rankpromo import mc_pi, pi_speedup
from .signals import (
    CovModel,
    Graph,
    build_covariance,
    complete_graph,
    cycle_graph,
    graph_laplacian,
    petersen_graph,
    read_edge_list,
    sample_snapshots,
)

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "run_command", "main"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

MODEL_KINDS = ("white", "tones", "chirp", "ar", "ma", "multipath", "graph")

# key -> default; the union over subcommands
DEFAULTS: Dict[str, Any] = {
    "seed": 0,
    "threads": 1,
    "out": ".",
    "M": None,
    "snr_db": None,
    "trials": None,
    "model": "white",
    "freqs": None,
    "amps": None,
    "coeffs": None,
    "mu": 0.0,
    "noise_var": 0.0,
    "circulant": False,
    "graph": None,
    "L": 1,
    "group": None,
    "fast": False,
    "tau": None,
    "cap": 64,
    "alpha_gate": 0.1,
    "cost": "cma",
    "const": "qpsk",
    "step": 5e-4,
    "n_taps": 11,
    "n_symbols": 20000,
    "mode": "both",
    "rounds": 100,
    "digits": 6,
    "name": None,
}


class ConfigError(ValueError):
    """Malformed config file or inconsistent options."""


@dataclass
class ExperimentConfig:
    """Resolved configuration of one CLI invocation."""

    command: str
    seed: int = 0
    params: Dict[str, Any] = field(default_factory=dict)
    output_dir: str = "."

    def to_dict(self) -> Dict[str, Any]:
        return {"command": self.command, "seed": self.seed, "params": dict(sorted(self.params.items())),
                "output_dir": self.output_dir}


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        low = raw.lower()
        if low in ("true", "false"):
            return low == "true"
        return raw


def load_config(path: str, command: str = "") -> ExperimentConfig:
    """Read a key/value or JSON config file and fill in defaults.

    Raises
    ------
    ConfigError
        On unreadable files, malformed lines (with the line number) and
        unknown keys.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    values: Dict[str, Any] = {}
    if text.lstrip().startswith("{"):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
        if not isinstance(obj, dict):
            raise ConfigError(f"{path}: JSON config must be an object")
        items = [(0, k, v) for k, v in obj.items()]
    else:
        items = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            k, v = (s.strip() for s in line.split("=", 1))
            if not k or not v:
                raise ConfigError(f"{path}:{lineno}: empty key or value")
            items.append((lineno, k, _parse_value(v)))
    for lineno, k, v in items:
        k = k.replace("-", "_")
        if k not in DEFAULTS:
            where = f"{path}:{lineno}" if lineno else path
            raise ConfigError(f"{where}: unknown key {k!r}")
        values[k] = v
    params = {**DEFAULTS, **values}
    try:
        seed = int(params.pop("seed"))
    except (TypeError, ValueError):
        raise ConfigError(f"{path}: seed must be an integer") from None
    out = str(params.pop("out"))
    return ExperimentConfig(command, seed, params, out)


def _floats(v) -> Optional[List[float]]:
    if v is None:
        return None
    if isinstance(v, (int, float)):
        return [float(v)]
    if isinstance(v, str):
        parts = [p for p in re.split(r"[,\s]+", v.strip()) if p]
        try:
            return [float(p) for p in parts]
        except ValueError:
            raise ConfigError(f"expected a list of numbers, got {v!r}") from None
    return [float(x) for x in v]


def resolve_graph(spec: str) -> Graph:
    """Edge-list path, or a named graph ``K<n>``, ``C<n>`` or ``petersen``.

    A missing file whose stem is a graph name (``k4.edges``) falls back to
    the named graph.
    """
    if os.path.exists(spec):
        return read_edge_list(spec)
    stem = os.path.splitext(os.path.basename(spec))[0].lower()
    if m := re.fullmatch(r"k(\d+)", stem):
        return complete_graph(int(m.group(1)))
    if m := re.fullmatch(r"c(\d+)", stem):
        return cycle_graph(int(m.group(1)))
    if stem == "petersen":
        return petersen_graph()
    raise ConfigError(f"graph {spec!r} is neither a file nor a known name (K<n>, C<n>, petersen)")


def build_model(p: Dict[str, Any]) -> CovModel:
    """Construct a :class:`CovModel` from resolved CLI parameters."""
    kind = p["model"]
    M = int(p["M"])
    if kind not in MODEL_KINDS:
        raise ConfigError(f"unknown model {kind!r}; choose from {MODEL_KINDS}")
    if kind == "graph":
        if not p.get("graph"):
            raise ConfigError("model 'graph' needs --graph")
        g = resolve_graph(p["graph"])
        return CovModel("graph_diffusion", g.n, {"graph": g})
    params: Dict[str, Any] = {}
    if kind in ("tones", "chirp"):
        params["freqs"] = _floats(p.get("freqs")) or [1.0]
        if p.get("amps") is not None:
            params["amps"] = _floats(p["amps"])
        params["noise_var"] = float(p.get("noise_var") or 0.0)
        if kind == "chirp":
            params["mu"] = float(p.get("mu") or 0.0)
    elif kind in ("ar", "ma"):
        c = _floats(p.get("coeffs"))
        if c is not None:
            params["coeffs"] = c
        params["circulant"] = bool(p.get("circulant"))
    elif kind == "multipath":
        params["noise_var"] = float(p.get("noise_var") or 0.0)
    return CovModel(kind, M, params)


def _factors(spec: str) -> Optional[List[int]]:
    s = spec.strip()
    if m := re.fullmatch(r"E2\^(\d+)", s):
        return [2] * int(m.group(1))
    if re.fullmatch(r"Z\d+(xZ\d+)*", s):
        return [int(t) for t in re.findall(r"\d+", s)]
    return None


# ---------------------------------------------------------------- commands

def _cmd_diagnose(cfg: ExperimentConfig):
    model = build_model(cfg.params)
    rec = diagnostics_record(build_covariance(model))
    summary = {"model": model.kind, "M": model.M, **rec.to_dict()}
    return summary, [{"metric": k, "value": v} for k, v in rec.to_dict().items()]


def _cmd_estimate(cfg: ExperimentConfig):
    p = cfg.params
    model = build_model(p)
    snaps = sample_snapshots(model, int(p["L"]), p["snr_db"], cfg.seed)
    spec = p["group"] or f"Z{model.M}"
    G = parse_group_spec(spec, M=model.M)
    if p["fast"]:
        factors = _factors(spec)
        if factors is None:
            raise ConfigError(f"no fast path for group {spec!r}; use a Z or E2 product")
        est = fast_path_abelian(factors, snaps)
    else:
        est = group_avg_covariance(G, snaps)
    R_true = build_covariance(model)
    err = float(np.linalg.norm(est.R_hat - R_true) / np.linalg.norm(R_true))
    summary = {"group": est.group_label, "L": est.L_used, "d_eff_claimed": est.d_eff_claimed,
               "fast_path": est.fast_path, "rel_frobenius_error": err,
               "diagnostics": diagnostics_record(est.R_hat).to_dict()}
    rows = [{"i": i, "j": j, "re": est.R_hat[i, j].real, "im": est.R_hat[i, j].imag}
            for i in range(model.M) for j in range(model.M)]
    return summary, rows


def _cmd_match(cfg: ExperimentConfig):
    p = cfg.params
    model = build_model(p)
    snaps = sample_snapshots(model, int(p["L"]), p["snr_db"], cfg.seed)
    rep = pipeline(snaps, {"alpha_gate": float(p["alpha_gate"]), "tau": float(p["tau"])})
    rows = [{"rank": i, "group": lab, "score": val} for i, (lab, val) in enumerate(rep.ranked)]
    return rep.to_dict(), rows


def _cmd_seqgevp(cfg: ExperimentConfig):
    p = cfg.params
    if p.get("graph"):
        g = resolve_graph(p["graph"])
        R = np.linalg.inv(np.eye(g.n) + graph_laplacian(g))
        R = (R + R.conj().T) / 2
        source = f"graph:{p['graph']}"
    else:
        model = build_model(p)
        R = build_covariance(model)
        source = f"model:{model.kind}"
    basis: GeneratorBasis = natural_basis(R.shape[0])
    trace = sequential_gevp(R, basis, tau=float(p["tau"]), cap=int(p["cap"]))
    summary = {"source": source, **trace.to_dict()}
    rows = [{"iteration": i, **{k: v for k, v in it.to_dict().items() if not isinstance(v, (list, dict))}}
            for i, it in enumerate(trace.iterations)]
    return summary, rows


def _cmd_equalize(cfg: ExperimentConfig):
    p = cfg.params
    try:
        ecfg = EqualizerConfig(constellation=p["const"], cost=p["cost"], n_taps=int(p["n_taps"]),
                               step=float(p["step"]), n_symbols=int(p["n_symbols"]),
                               snr_db=25.0 if p["snr_db"] is None else float(p["snr_db"]))
    except EqualizerError as exc:
        raise ConfigError(str(exc)) from None
    trials = 200 if p["trials"] is None else int(p["trials"])
    if trials < 50:
        raise ConfigError(f"equalize needs at least 50 trials, got {trials}")
    stats, results = phase_ensemble(ecfg, trials, cfg.seed, threads=int(p["threads"]))
    if not results:
        raise EqualizerError(f"all {trials} trials diverged with step={ecfg.step}")
    summary = {"cost": ecfg.cost, "constellation": ecfg.constellation, "trials": trials,
               "failed": stats.failed, "M_grid": stats.M_grid, "std_deg": stats.std_deg,
               "predicted_deg": stats.predicted_deg, "ks_distance": stats.ks_distance}
    rows = [{"trial": r.trial, "seed": r.seed, "residual_deg": r.residual_deg,
             "converged_cost": r.converged_cost, "mse": r.mse} for r in results]
    return summary, rows


def _cmd_mc_pi(cfg: ExperimentConfig):
    p = cfg.params
    M = int(p["M"])
    rounds = int(p["rounds"])
    n_seeds = 200 if p["trials"] is None else int(p["trials"])
    modes = ("plain", "stratified") if p["mode"] == "both" else (p["mode"],)
    rows = []
    sq: Dict[str, List[float]] = {m: [] for m in modes}
    for t in range(n_seeds):
        for mode in modes:
            est, err = mc_pi(mode, M, M * rounds, seed=cfg.seed * 1_000_003 + t)
            sq[mode].append(err * err)
            rows.append({"seed_index": t, "mode": mode, "estimate": est, "abs_error": err})
    summary: Dict[str, Any] = {"M": M, "rounds": rounds, "n_total": M * rounds, "seeds": n_seeds,
                               "mse": {m: float(np.mean(v)) for m, v in sq.items()}}
    if len(modes) == 2:
        summary["mse_ratio"] = summary["mse"]["plain"] / summary["mse"]["stratified"]
    sp = pi_speedup(M, int(p["digits"]))
    summary["speedup"] = {"digits": int(p["digits"]), "draws_plain": sp.draws_plain,
                          "draws_stratified": sp.draws_stratified, "rounds_stratified": sp.rounds_stratified,
                          "speedup_draws": sp.speedup_draws, "speedup_rounds": sp.speedup_rounds}
    return summary, rows


def _cmd_experiment(cfg: ExperimentConfig):
    p = cfg.params
    name = p["name"]
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
    accepted = inspect.signature(EXPERIMENTS[name]).parameters
    kwargs: Dict[str, Any] = {"seed": cfg.seed}
    for key in ("trials", "M", "snr_db", "threads", "tau"):
        if key in accepted and p.get(key) is not None:
            kwargs[key] = p[key]
    res = run_experiment(name, **kwargs)
    print(f"{name}: {res.elapsed_s:.2f} s", file=sys.stderr)
    summary = {"experiment": name, "passed": res.passed, "metrics": res.metrics,
               "arguments": {k: v for k, v in sorted(res.params.items())}}
    return summary, list(res.rows) or [{"metric": k, "value": v} for k, v in res.metrics.items()]


COMMANDS = {
    "diagnose": _cmd_diagnose,
    "estimate": _cmd_estimate,
    "match": _cmd_match,
    "seqgevp": _cmd_seqgevp,
    "equalize": _cmd_equalize,
    "mc-pi": _cmd_mc_pi,
    "experiment": _cmd_experiment,
}


# ---------------------------------------------------------------- output

def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else str(f)
    if isinstance(v, (complex, np.complexfloating)):
        return [_jsonable(v.real), _jsonable(v.imag)]
    if v is None or isinstance(v, str):
        return v
    return str(v)


def _csv_text(rows: Sequence[Dict[str, Any]], cfg: ExperimentConfig) -> str:
    buf = io.StringIO()
    buf.write(f"# config: {json.dumps(_jsonable(cfg.to_dict()), sort_keys=True)}\n")
    cols: List[str] = []
    for r in rows:
        cols.extend(k for k in r if k not in cols)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols or ["empty"])
    for r in rows:
        w.writerow([json.dumps(_jsonable(r[c])) if isinstance(r.get(c), (list, dict, tuple))
                    else _jsonable(r.get(c, "")) for c in cols])
    return buf.getvalue()


def _write_outputs(cfg: ExperimentConfig, summary: Dict[str, Any], rows) -> str:
    doc = {"config": cfg.to_dict(), "seed": cfg.seed, "result": summary}
    text = json.dumps(_jsonable(doc), sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    stem = cfg.command if cfg.command != "experiment" else f"experiment-{cfg.params['name']}"
    os.makedirs(cfg.output_dir, exist_ok=True)
    with open(os.path.join(cfg.output_dir, f"{stem}.json"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    with open(os.path.join(cfg.output_dir, f"{stem}.csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write(_csv_text(rows, cfg))
    return text


# ---------------------------------------------------------------- parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, help="base RNG seed (default 0)")
    common.add_argument("--threads", type=int, help="worker threads for Monte Carlo trials")
    common.add_argument("--out", help="output directory (default .)")
    common.add_argument("--config", help="key = value or JSON config file")
    common.add_argument("--M", type=int, help="dimension")
    common.add_argument("--snr-db", type=float, dest="snr_db", help="SNR in dB")
    common.add_argument("--trials", type=int, help="Monte Carlo trials or seeds")

    model = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    model.add_argument("--model", choices=MODEL_KINDS, help="covariance model (default white)")
    model.add_argument("--freqs", help="tone bins, comma separated")
    model.add_argument("--amps", help="tone amplitudes, comma separated")
    model.add_argument("--coeffs", help="AR or MA coefficients, comma separated")
    model.add_argument("--mu", type=float, help="chirp rate")
    model.add_argument("--noise-var", type=float, dest="noise_var", help="additive white noise variance")
    model.add_argument("--circulant", action="store_true", help="circulant AR/MA covariance")
    model.add_argument("--graph", help="edge-list file or K<n>/C<n>/petersen")
    model.add_argument("--L", type=int, help="snapshot count")

    parser = _Parser(prog="algdiv", description="Group-averaged covariance estimation and diagnostics.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub_kw = {"argument_default": argparse.SUPPRESS}
    sub.required = True
    sub.add_parser("diagnose", parents=[common, model], **sub_kw, help="structure diagnostics of a model covariance")
    sp = sub.add_parser("estimate", parents=[common, model], **sub_kw, help="group-averaged covariance from snapshots")
    sp.add_argument("--group", help="group spec such as Z8, Z4xZ2, D6 (default Z<M>)")
    sp.add_argument("--fast", action="store_true", help="use the FFT path for Abelian products")
    sp = sub.add_parser("match", parents=[common, model], **sub_kw, help="blind group matching pipeline")
    sp.add_argument("--alpha-gate", type=float, dest="alpha_gate", help="whiteness gate (default 0.1)")
    sp.add_argument("--tau", type=float, help="generator acceptance threshold (default 0.05)")
    sp = sub.add_parser("seqgevp", parents=[common, model], **sub_kw, help="sequential generator discovery")
    sp.add_argument("--tau", type=float, help="acceptance threshold (default 1e-8)")
    sp.add_argument("--cap", type=int, help="iteration cap (default 64)")
    sp = sub.add_parser("equalize", parents=[common], **sub_kw, help="residual-phase ensemble of a blind equalizer")
    sp.add_argument("--cost", choices=("cma", "mma", "ad_zm"), help="equalizer cost (default cma)")
    sp.add_argument("--const", help="constellation, e.g. qpsk, 8psk, 16qam (default qpsk)")
    sp.add_argument("--step", type=float, help="step size (default 5e-4)")
    sp.add_argument("--n-taps", type=int, dest="n_taps", help="equalizer taps (default 11)")
    sp.add_argument("--n-symbols", type=int, dest="n_symbols", help="symbols per trial (default 20000)")
    sp = sub.add_parser("mc-pi", parents=[common], **sub_kw, help="plain versus stratified Monte Carlo for pi")
    sp.add_argument("--mode", choices=("plain", "stratified", "both"), help="default both")
    sp.add_argument("--rounds", type=int, help="draws per stratum (default 100)")
    sp.add_argument("--digits", type=int, help="digits for the speedup report (default 6)")
    sp = sub.add_parser("experiment", parents=[common], **sub_kw, help="named acceptance experiment")
    sp.add_argument("name", choices=sorted(EXPERIMENTS), metavar="NAME",
                    help="one of: " + ", ".join(sorted(EXPERIMENTS)))
    sp.add_argument("--tau", type=float, help="threshold for the sequential GEVP experiments")
    return parser


def resolve(argv: Sequence[str]) -> ExperimentConfig:
    """Parse ``argv`` and merge it over the config file and defaults."""
    ns = vars(build_parser().parse_args(list(argv)))
    command = ns.pop("command")
    path = ns.pop("config", None)
    cfg = load_config(path, command) if path else ExperimentConfig(
        command, DEFAULTS["seed"], {k: v for k, v in DEFAULTS.items() if k not in ("seed", "out")}, DEFAULTS["out"])
    cfg.command = command
    if "seed" in ns:
        cfg.seed = int(ns.pop("seed"))
    if "out" in ns:
        cfg.output_dir = ns.pop("out")
    cfg.params.update(ns)
    # command-specific defaults for keys left unset
    if cfg.params["tau"] is None and command in ("match", "seqgevp"):
        cfg.params["tau"] = TAU_SAMPLE if command == "match" else TAU_NOISELESS
    if cfg.params["M"] is None and command not in ("experiment", "mc-pi"):
        cfg.params["M"] = 8
    if cfg.params["M"] is None and command == "mc-pi":
        cfg.params["M"] = 64
    for k in ("M", "trials", "threads", "L"):
        v = cfg.params.get(k)
        if v is not None and (not isinstance(v, int) or isinstance(v, bool) or v < 1):
            raise ConfigError(f"{k} must be a positive integer, got {v!r}")
    return cfg


def run_command(argv: Sequence[str]) -> int:
    """Run one subcommand and return its exit code."""
    t0 = time.perf_counter()
    try:
        cfg = resolve(argv)
        summary, rows = COMMANDS[cfg.command](cfg)
        text = _write_outputs(cfg, summary, rows)
    except (ConfigError, GroupError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (LinalgError, ConvergenceError, EqualizerError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    sys.stdout.write(text)
    print(f"elapsed {time.perf_counter() - t0:.3f} s", file=sys.stderr)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    return run_command(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
