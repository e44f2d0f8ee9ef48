"""Command-line driver: ``hamlearn {graph,plan,learn,bounds}``.

Every subcommand reads an optional JSON config, applies flag overrides, prints
its main JSON result to stdout and, with ``--out DIR``, writes JSON/CSV files
(and PNG figures with ``--figures``) into ``DIR``.

Exit codes: 0 success, 2 config error, 3 infeasible plan, 4 oracle failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .bounds import Scales, error_bound, log_commutator_norm_bound
from .graph import ORDERINGS, average_degree, build_graph, greedy_color, square_graph
from .hamiltonians import SpecError, TfimEnsemble, ensemble_from_spec, from_spec
from .learner import LearnOptions, binomial_upper, gibbs_infer, partition_infer, plan_for
from .oracle import OracleError, QuantumOracle
from .pauli import Hamiltonian
from .planner import InfeasiblePlanError, a_grid

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_ORACLE = 0, 2, 3, 4
CLI_MODES = ("unitary", "gibbs", "commuting")
BOUND_MODE = {"unitary": "general", "commuting": "commuting", "gibbs": "gibbs"}
PERCENTILES = (1, 16, 50, 84, 99)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    hamiltonian: dict | str | None = None
    mode: str = "unitary"
    epsilon: float = 0.1
    delta: float = 0.15
    trials: int = 1
    seed: int = 0
    avg_degree: bool = False
    shot_allocation: bool = False
    constrained_fit: bool = False
    ordering: str = "degree"
    noise: bool = True
    theta_max: float | None = None
    out: str | None = None
    figures: bool = False
    workers: int = 1
    sweep: dict = field(default_factory=lambda: {"eps_max": 0.1, "eps_min": 0.001, "points": 9})
    bounds: dict = field(default_factory=lambda: {"L_max": 8, "points": 60})
    base_dir: str = "."

    def validate(self) -> None:
        if self.mode not in CLI_MODES:
            raise ConfigError(f"mode must be one of {CLI_MODES}, got {self.mode!r}")
        if not (isinstance(self.epsilon, (int, float)) and self.epsilon > 0):
            raise ConfigError("epsilon must be positive")
        if not 0 < self.delta < 1:
            raise ConfigError("delta must lie in (0, 1)")
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError("trials must be an integer >= 1")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if self.ordering not in ORDERINGS:
            raise ConfigError(f"ordering must be one of {ORDERINGS}")
        if self.theta_max is not None and self.theta_max <= 0:
            raise ConfigError("theta_max must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.hamiltonian is None:
            raise ConfigError("no Hamiltonian given (config 'hamiltonian', --hamiltonian or --tfim)")

    @property
    def options(self) -> LearnOptions:
        return LearnOptions(self.constrained_fit, self.shot_allocation, self.avg_degree, self.noise, self.ordering)

    def ensemble(self) -> TfimEnsemble | None:
        src = self._source()
        return ensemble_from_spec(src["ensemble"]) if "ensemble" in src else None

    def _source(self) -> dict:
        src = self.hamiltonian
        if isinstance(src, str):
            path = Path(self.base_dir) / src
            try:
                text = path.read_text(encoding="utf-8")
            except OSError as exc:
                raise ConfigError(f"cannot read Hamiltonian spec {path}: {exc.strerror}") from exc
            try:
                return json.loads(text)
            except json.JSONDecodeError as exc:
                raise SpecError(f"{path}: invalid JSON: {exc.msg}", exc.lineno, exc.colno) from exc
        return src

    def hamiltonian_for(self, trial: int = 0) -> Hamiltonian:
        ens = self.ensemble()
        if ens is not None:
            return ens.draw(trial)
        return from_spec(self._source())


_CONFIG_KEYS = {f for f in ExperimentConfig.__dataclass_fields__ if f != "base_dir"}


def load_config(path: str | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    opts = data.pop("options", {}) or {}
    for key in ("avg_degree", "shot_allocation", "constrained_fit", "ordering"):
        if key in opts:
            data[key] = opts.pop(key)
    unknown = sorted((set(data) - _CONFIG_KEYS) | set(opts))
    if unknown:
        raise ConfigError(f"{path}: unknown config keys {unknown}")
    return ExperimentConfig(**data, base_dir=str(Path(path).parent))


def apply_overrides(cfg: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    changes = {}
    for name in ("mode", "epsilon", "delta", "trials", "seed", "ordering", "theta_max", "out", "workers"):
        val = getattr(args, name, None)
        if val is not None:
            changes[name] = val
    for flag, name in (("opt_avg_degree", "avg_degree"), ("opt_alloc", "shot_allocation"),
                       ("opt_constrained", "constrained_fit"), ("figures", "figures")):
        if getattr(args, flag, False):
            changes[name] = True
    if getattr(args, "no_noise", False):
        changes["noise"] = False
    if getattr(args, "hamiltonian", None):
        changes["hamiltonian"] = str(Path(args.hamiltonian).resolve())
    if getattr(args, "tfim", None):
        seed = changes.get("seed", cfg.seed)
        changes["hamiltonian"] = {"ensemble": {"family": "tfim", "n": args.tfim, "dist": "unif(-1,1)", "seed": seed}}
    return replace(cfg, **changes)


# -- output helpers -------------------------------------------------------

def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _out_dir(cfg: ExperimentConfig) -> Path | None:
    return Path(cfg.out) if cfg.out else None


def _finite(x: float) -> float | None:
    return float(x) if math.isfinite(x) else None


# -- subcommands ----------------------------------------------------------

def cmd_graph(cfg: ExperimentConfig) -> dict:
    h = cfg.hamiltonian_for(0)
    g = build_graph(h)
    g2 = square_graph(g)
    coloring = greedy_color(g2, cfg.ordering)
    coloring.validate(g2)
    result = {
        "n_qubits": h.n,
        "n_terms": h.r,
        "terms": [p.render() for p in h.paulis],
        "degree": g.degree(),
        "avg_degree": average_degree(g),
        "squared_degree": g2.degree(),
        "ordering": cfg.ordering,
        "n_colors": coloring.n_colors,
        "coloring": coloring.to_json(),
        "edges": [list(e) for e in g.edges()],
        "edges_squared": [list(e) for e in g2.edges()],
    }
    out = _out_dir(cfg)
    if out:
        _write_atomic(out / "graph.json", _dumps(result))
        _write_atomic(out / "edges.csv", "a,b\n" + "".join(f"{a},{b}\n" for a, b in g.edges()))
        _write_atomic(out / "edges_squared.csv", "a,b\n" + "".join(f"{a},{b}\n" for a, b in g2.edges()))
    return result


def _sweep_rows(cfg: ExperimentConfig, h: Hamiltonian) -> list[dict]:
    sw = cfg.sweep
    eps = np.logspace(math.log10(sw["eps_max"]), math.log10(sw["eps_min"]), int(sw["points"]))
    rows = []
    for e in eps:
        p = plan_for(h, float(e), cfg.delta, BOUND_MODE[cfg.mode], cfg.options, cfg.theta_max)
        rows.append({"epsilon": float(e), "A_over_tau": p.A_over_tau, "A": p.A, "L": p.L, "N": p.N, "K": p.K,
                     "queries_per_setting": p.shots_per_replicate * p.K})
    return rows


def cmd_plan(cfg: ExperimentConfig) -> dict:
    h = cfg.hamiltonian_for(0)
    p = plan_for(h, cfg.epsilon, cfg.delta, BOUND_MODE[cfg.mode], cfg.options, cfg.theta_max)
    rows = _sweep_rows(cfg, h)
    result = {"plan": p.to_json(), "target_epsilon": cfg.epsilon, "theta_max": cfg.theta_max or h.theta_max,
              "sweep": rows}
    out = _out_dir(cfg)
    if out:
        _write_atomic(out / "plan.json", _dumps(result))
        cols = list(rows[0])
        lines = [",".join(cols)] + [",".join(repr(r[c]) for c in cols) for r in rows]
        _write_atomic(out / "sweep.csv", "\n".join(lines) + "\n")
        if cfg.figures:
            from .plotting import plot_sweep

            plot_sweep(rows, out / "sweep.png")
    return result


def cmd_bounds(cfg: ExperimentConfig) -> dict:
    h = cfg.hamiltonian_for(0)
    scales = Scales.from_hamiltonian(h, cfg.theta_max, BOUND_MODE[cfg.mode], cfg.avg_degree)
    x = a_grid(scales.mode, int(cfg.bounds.get("points", 60)))
    curves = []
    for L in range(2, int(cfg.bounds.get("L_max", 8)) + 1):
        eb = [error_bound(xi * scales.tau, L, 1.0, scales) for xi in x]
        curves.append({"L": L, "A_over_tau": [float(v) for v in x],
                       "noise": [_finite(e.noise) for e in eb], "bias2": [_finite(e.bias2) for e in eb]})
    derivs = [{"m": m, "log_bound": log_commutator_norm_bound(m, scales)} for m in range(0, 11)]
    result = {"mode": scales.mode, "degree": scales.degree, "theta_max": scales.theta_max, "gamma": scales.gamma,
              "tau": scales.tau, "sigma2": 1.0, "curves": curves, "derivative_bounds": derivs}
    out = _out_dir(cfg)
    if out:
        _write_atomic(out / "bounds.json", _dumps(result))
        lines = ["L,A_over_tau,noise,bias2"]
        for c in curves:
            for xi, nz, b2 in zip(c["A_over_tau"], c["noise"], c["bias2"]):
                lines.append(f"{c['L']},{xi!r},{'' if nz is None else repr(nz)},{'' if b2 is None else repr(b2)}")
        _write_atomic(out / "bounds.csv", "\n".join(lines) + "\n")
        if cfg.figures:
            from .plotting import plot_bounds

            finite = [{**c, "bias2": [np.nan if b is None else b for b in c["bias2"]]} for c in curves]
            plot_bounds(finite, out / "bounds.png")
    return result


def trial_seed(seed: int, trial: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(trial,)).generate_state(1)[0])


def run_trial(cfg: ExperimentConfig, trial: int) -> dict:
    h = cfg.hamiltonian_for(trial)
    p = plan_for(h, cfg.epsilon, cfg.delta, BOUND_MODE[cfg.mode], cfg.options, cfg.theta_max)
    oracle = QuantumOracle(h, mode="gibbs" if cfg.mode == "gibbs" else "unitary", seed=trial_seed(cfg.seed, trial))
    infer = gibbs_infer if cfg.mode == "gibbs" else partition_infer
    report = infer(oracle, h, p, cfg.options, epsilon=cfg.epsilon)
    out = report.to_json()
    out["trial"] = trial
    return {"json": out, "csv": report.to_csv()}


def _percentiles(values) -> dict:
    pct = np.percentile(np.asarray(values, dtype=float), PERCENTILES)
    return {f"p{q}": float(v) for q, v in zip(PERCENTILES, pct)}


def summarize(cfg: ExperimentConfig, reports: list[dict]) -> dict:
    from scipy.stats import binom

    errs = [r["max_abs_error"] for r in reports]
    units = [r["error_in_target_units"] for r in reports]
    failures = int(sum(u > 1.0 for u in units))
    t = len(reports)
    p_value = float(binom.sf(failures - 1, t, cfg.delta)) if failures else 1.0
    return {
        "mode": cfg.mode,
        "epsilon": cfg.epsilon,
        "delta": cfg.delta,
        "trials": t,
        "seed": cfg.seed,
        "noise": cfg.noise,
        "options": {"avg_degree": cfg.avg_degree, "shot_allocation": cfg.shot_allocation,
                    "constrained_fit": cfg.constrained_fit, "ordering": cfg.ordering},
        "max_abs_error": _percentiles(errs),
        "error_in_target_units": _percentiles(units),
        "failures": failures,
        "failure_fraction": failures / t,
        "failure_upper95": binomial_upper(failures, t),
        "binomial_p_value": p_value,
        "consistent_with_delta": p_value >= 0.05,
        "queries": [r["queries"] for r in reports],
    }


def cmd_learn(cfg: ExperimentConfig) -> dict:
    start = time.perf_counter()
    trials = range(cfg.trials)
    if cfg.workers > 1 and cfg.trials > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(run_trial, [cfg] * cfg.trials, trials))
    else:
        results = [run_trial(cfg, k) for k in trials]
    reports = [r["json"] for r in results]
    summary = summarize(cfg, reports)
    out = _out_dir(cfg)
    if out:
        for k, r in enumerate(results):
            _write_atomic(out / "trials" / f"report_{k:03d}.json", _dumps(r["json"]))
            _write_atomic(out / "trials" / f"report_{k:03d}.csv", r["csv"])
        _write_atomic(out / "summary.json", _dumps(summary))
        lines = ["trial,max_abs_error,error_in_target_units,queries"]
        lines += [f"{r['trial']},{r['max_abs_error']!r},{r['error_in_target_units']!r},{r['queries']}" for r in reports]
        _write_atomic(out / "errors.csv", "\n".join(lines) + "\n")
        _write_atomic(out / "timing.json", _dumps({"wall_seconds": time.perf_counter() - start}))
        if cfg.figures:
            from .plotting import plot_errors

            plot_errors([r["max_abs_error"] for r in reports], None, out / "errors.png")
    return summary


COMMANDS = {"graph": cmd_graph, "plan": cmd_plan, "learn": cmd_learn, "bounds": cmd_bounds}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hamlearn", description="Hamiltonian learning from black-box queries")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    src = common.add_mutually_exclusive_group()
    src.add_argument("--hamiltonian", help="Hamiltonian spec JSON file")
    src.add_argument("--tfim", type=int, metavar="N", help="random N-qubit TFIM with Unif(-1,1) couplings")
    common.add_argument("--mode", choices=CLI_MODES)
    common.add_argument("--epsilon", type=float)
    common.add_argument("--delta", type=float)
    common.add_argument("--trials", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--theta-max", dest="theta_max", type=float, help="prior bound on max |theta|")
    common.add_argument("--ordering", choices=ORDERINGS, help="greedy coloring vertex order")
    common.add_argument("--opt-avg-degree", action="store_true", help="plan with the average degree")
    common.add_argument("--opt-alloc", action="store_true", help="allocate shots across Chebyshev nodes")
    common.add_argument("--opt-constrained", action="store_true", help="fit with f(0) = 0 imposed")
    common.add_argument("--no-noise", action="store_true", help="use exact expectation values")
    common.add_argument("--out", help="output directory")
    common.add_argument("--figures", action="store_true", help="also render PNG figures into --out")
    common.add_argument("--workers", type=int, help="parallel trial workers (learn)")
    helps = {"graph": "interaction graph, squared graph and coloring",
             "plan": "hyperparameter plan and epsilon sweep",
             "learn": "run seeded learning trials",
             "bounds": "dump error-bound curves"}
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = apply_overrides(load_config(args.config), args)
        cfg.validate()
        if cfg.figures and not cfg.out:
            raise ConfigError("--figures needs --out")
        result = COMMANDS[args.command](cfg)
    except (ConfigError, SpecError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasiblePlanError as exc:
        print(f"infeasible plan: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OracleError as exc:
        print(f"oracle failure: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    sys.stdout.write(_dumps(result))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
