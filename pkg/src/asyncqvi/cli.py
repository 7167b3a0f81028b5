"""Command-line experiment driver.

    asyncqvi solve CONFIG [--key value ...]
    asyncqvi evaluate CONFIG --policy FILE
    asyncqvi benchmark CONFIG --threads-list 1,2,4 --fixed-L 2000000
    asyncqvi validate [CONFIG] [--mdp FILE]

CONFIG holds ``key = value`` lines; every key can be overridden with ``--key value``
and ``ASYNCQ_THREADS`` overrides ``threads`` last. Exit codes: 1 usage error,
2 validation error, 3 runtime error.
"""

import argparse
import csv
import math
import os
import sys
import time
from dataclasses import dataclass


from .evaluation import evaluate_policy, speedup_benchmark
from .io import load_mdp, load_policy, save_policy
from .mdp import TabularGenerativeModel, random_mdp, validate_mdp
from .reference import epsilon_optimality_gap, value_iteration_exact
from .sailing import MAX_TABULAR_STATES, SailingConfig, SailingModel, sailing_tabularize
from .solvers import ScheduleSpec, SolverConfig, aql_run, asyncqvi_run, asyncqvi_run_exact
from .solvers.config import iterations_for_sample_budget

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2, 3

RESULT_HEADER = ["checkpoint_iterations", "wall_time_ms", "samples_drawn", "mean_return",
                 "flags", "sup_gap", "threads", "seed", "algorithm"]
BENCHMARK_HEADER = ["threads", "wall_time_ms", "iterations_per_second",
                    "samples_per_second"]

ALGORITHMS = ("asyncqvi", "asyncqvi_exact", "aqlc", "aqld", "aql_adaptive", "oracle_vi")
ENVIRONMENTS = ("sailing", "random_mdp", "file")


class ConfigError(ValueError):
    def __init__(self, message, lineno=None):
        super().__init__(f"line {lineno}: {message}" if lineno else message)
        self.lineno = lineno


def _choice(options):
    def check(v):
        if v not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
    return check


def _between(lo, hi, lo_open=False, hi_open=False):
    def check(v):
        if (v < lo or (lo_open and v == lo)) or (v > hi or (hi_open and v == hi)):
            lb, rb = "(" if lo_open else "[", ")" if hi_open else "]"
            raise ValueError(f"must lie in {lb}{lo}, {hi}{rb}")
    return check


def _at_least(lo):
    def check(v):
        if v < lo:
            raise ValueError(f"must be >= {lo}")
    return check


# key: (type, default, check)
SCHEMA = {
    "algorithm": (str, "asyncqvi", _choice(ALGORITHMS)),
    "env": (str, "sailing", _choice(ENVIRONMENTS)),
    "gamma": (float, 0.99, _between(0, 1, lo_open=True, hi_open=True)),
    "epsilon": (float, 0.1, _between(0, math.inf, lo_open=True)),
    "delta": (float, 0.1, _between(0, 1, lo_open=True, hi_open=True)),
    "threads": (int, 1, _at_least(1)),
    "L": (int, 0, _at_least(0)),
    "K": (int, 0, _at_least(0)),
    "schedule": (str, "constant", _choice(("constant", "adaptive"))),
    "sample_budget": (int, 0, _at_least(0)),
    "alpha": (float, 0.5, _between(0, 1, lo_open=True)),
    "selector": (str, "uniform", _choice(("uniform", "cyclic", "trajectory"))),
    "copy_period": (int, 1, _at_least(1)),
    "seed": (int, 0, _between(0, 2 ** 63 - 1)),
    "grid_size": (int, 100, _at_least(2)),
    "d": (float, 0.05, _between(0, 0.25)),
    "sigma1": (float, 0.5, _at_least(0)),
    "sigma2": (float, 2.0, _at_least(0)),
    "vortex_p": (float, 0.05, _between(0, 1)),
    "num_states": (int, 10, _at_least(1)),
    "num_actions": (int, 3, _at_least(1)),
    "density": (float, 1.0, _between(0, 1, lo_open=True)),
    "mdp_path": (str, "", None),
    "eval_episodes": (int, 100, _at_least(1)),
    "eval_horizon": (int, 200, _at_least(1)),
    "eval_gamma": (float, 0.99, _between(0, 1, hi_open=True)),
    "eval_every": (int, 0, _at_least(0)),
    "output_path": (str, "results.csv", None),
}


def _coerce(key, raw, lineno=None):
    if key not in SCHEMA:
        raise ConfigError(f"unknown key {key!r}", lineno)
    kind, _, check = SCHEMA[key]
    try:
        if kind is int:
            value = int(raw)
        elif kind is float:
            value = float(raw)
            if math.isnan(value):
                raise ValueError
        else:
            value = raw
    except ValueError:
        raise ConfigError(f"malformed value {raw!r} for {key} "
                          f"(expected {kind.__name__})", lineno) from None
    if check is not None:
        try:
            check(value)
        except ValueError as exc:
            raise ConfigError(f"{key} = {raw}: {exc}", lineno) from None
    return value


def _check_consistency(cfg):
    if cfg["algorithm"] in ("asyncqvi", "asyncqvi_exact") and cfg["epsilon"] > 1 / (1 - cfg["gamma"]):
        raise ConfigError(f"epsilon = {cfg['epsilon']} exceeds 1/(1-gamma)")
    if cfg["env"] == "file" and not cfg["mdp_path"]:
        raise ConfigError("env = file needs mdp_path")


def parse_config(text, overrides=None):
    """Parse ``key = value`` lines into a validated dict with defaults filled in.

    Errors carry the offending line number.
    """
    cfg = {key: spec[1] for key, spec in SCHEMA.items()}
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (first set on line {seen[key]})",
                              lineno)
        seen[key] = lineno
        cfg[key] = _coerce(key, value, lineno)
    for key, value in (overrides or {}).items():
        cfg[key] = _coerce(key, str(value))
    _check_consistency(cfg)
    return cfg


# -- environment and solver plumbing -------------------------------------------------

@dataclass
class Environment:
    gm: object
    mdp: object          # TabularMdp when an exact model is available, else None


def build_environment(cfg, tabular=True):
    """Generative model plus, when small enough and ``tabular``, its exact table."""
    if cfg["env"] == "sailing":
        scfg = SailingConfig(grid_size=cfg["grid_size"], d=cfg["d"], sigma1=cfg["sigma1"],
                             sigma2=cfg["sigma2"], vortex_p=cfg["vortex_p"])
        gm = SailingModel(scfg)
        mdp = None
        if tabular and scfg.num_states <= MAX_TABULAR_STATES:
            mdp = sailing_tabularize(scfg, gamma=cfg["gamma"])
        return Environment(gm, mdp)
    if cfg["env"] == "random_mdp":
        mdp = random_mdp(cfg["num_states"], cfg["num_actions"], cfg["gamma"],
                         density=cfg["density"], random_state=cfg["seed"])
    else:
        mdp = load_mdp(cfg["mdp_path"])
        validate_mdp(mdp)
        if abs(mdp.gamma - cfg["gamma"]) > 1e-12:
            mdp = type(mdp)(mdp.num_states, mdp.num_actions, mdp.indptr, mdp.next_states,
                            mdp.probs, mdp.rewards, cfg["gamma"])
    return Environment(TabularGenerativeModel(mdp), mdp)


def solver_config(cfg, gm):
    schedule = ScheduleSpec.adaptive_samples() if cfg["schedule"] == "adaptive" else None
    L = cfg["L"]
    aql = cfg["algorithm"] in ("aqlc", "aqld", "aql_adaptive")
    if cfg["sample_budget"]:
        if aql:
            L = cfg["sample_budget"]  # one sample per iteration
        elif cfg["algorithm"] == "asyncqvi":
            if schedule is None and not cfg["K"]:
                raise ConfigError("sample_budget needs K > 0 or schedule = adaptive")
            spec = schedule or ScheduleSpec.constant_samples(cfg["K"])
            L = iterations_for_sample_budget(spec, cfg["sample_budget"])
    if aql and not L:
        raise ConfigError("Q-learning baselines need L or sample_budget")
    # epsilon is unused by the baselines; clip it into the range SolverConfig accepts
    return SolverConfig(epsilon=min(cfg["epsilon"], 1 / (1 - cfg["gamma"])),
                        delta=cfg["delta"], gamma=cfg["gamma"],
                        num_threads=cfg["threads"], L=L, K=cfg["K"],
                        selector=cfg["selector"], schedule=schedule,
                        copy_period=cfg["copy_period"], seed=cfg["seed"])


def _stepsize(cfg):
    if cfg["algorithm"] == "aqlc":
        return ScheduleSpec.constant_stepsize(cfg["alpha"])
    if cfg["algorithm"] == "aqld":
        return ScheduleSpec.diminishing_stepsize()
    return ScheduleSpec.adaptive_stepsize()


def _fmt(x):
    return "" if x is None else repr(float(x)) if isinstance(x, float) else str(x)


def run_experiment(cfg, out=None):
    """Build, solve, evaluate at checkpoints and write result rows.

    Returns the metadata dict written to ``<output_path>.meta``.
    """
    env = build_environment(cfg)
    gm, mdp = env.gm, env.mdp
    algorithm = cfg["algorithm"]
    if algorithm in ("oracle_vi", "asyncqvi_exact") and mdp is None:
        raise RuntimeError(f"{algorithm} needs a tabular environment")
    oracle = None
    if mdp is not None:
        start = time.perf_counter()
        oracle = value_iteration_exact(mdp)
        oracle_time = time.perf_counter() - start
    rows = []

    def record(iterations, policy, wall_time, samples):
        report = evaluate_policy(gm, policy, cfg["eval_episodes"], cfg["eval_horizon"],
                                 cfg["eval_gamma"], random_state=cfg["seed"])
        gap = None
        if oracle is not None:
            gap = epsilon_optimality_gap(mdp, policy, solution=oracle)
        rows.append([iterations, round(wall_time * 1000.0, 3), samples,
                     report.mean_return, report.flags, gap, cfg["threads"], cfg["seed"],
                     cfg["algorithm"]])

    def checkpoint(iterations, policy, values, stats):
        record(iterations, policy, stats.wall_time, stats.samples_drawn)

    meta = dict(cfg)
    every = cfg["eval_every"] or None
    if algorithm == "oracle_vi":
        record(oracle.iterations, oracle.pi_star, oracle_time, 0)
        meta.update(iterations_done=oracle.iterations, residual=oracle.residual)
        policy = oracle.pi_star
    else:
        scfg = solver_config(cfg, gm)
        if algorithm == "asyncqvi":
            policy, _, stats = asyncqvi_run(gm, scfg, checkpoint_every=every,
                                            callback=checkpoint)
        elif algorithm == "asyncqvi_exact":
            policy, _, _, stats = asyncqvi_run_exact(mdp, scfg, checkpoint_every=every,
                                                     callback=checkpoint)
        else:
            policy, _, stats = aql_run(gm, scfg, _stepsize(cfg), checkpoint_every=every,
                                       callback=checkpoint)
        if not rows or rows[-1][0] != stats.iterations_done:
            record(stats.iterations_done, policy, stats.wall_time, stats.samples_drawn)
        L, schedule = scfg.resolve(gm.num_states, gm.num_actions)
        meta.update(L=L, K=int(schedule.value) if schedule.mode == "constant" else "adaptive",
                    iterations_done=stats.iterations_done,
                    observed_b1=stats.observed_b1, observed_b2=stats.observed_b2,
                    updates_accepted=stats.updates_accepted,
                    updates_rejected=stats.updates_rejected,
                    samples_drawn=stats.samples_drawn,
                    backend=stats.extra.get("backend", "python"))
    meta["final_sup_gap"] = rows[-1][5]

    path = cfg["output_path"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULT_HEADER)
        writer.writerows([_fmt(x) for x in row] for row in rows)
    with open(path + ".meta", "w", encoding="utf-8") as fh:
        fh.writelines(f"{k} = {v}\n" for k, v in meta.items())
    if path.endswith(".csv"):
        save_policy(policy, path[:-4] + ".policy")
    if out is not None:
        print(f"wrote {len(rows)} rows to {path}", file=out)
    return meta


# -- argument handling --------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_config_args(p):
    p.add_argument("config", nargs="?", help="key = value configuration file")
    group = p.add_argument_group("config overrides")
    for key in SCHEMA:
        group.add_argument(f"--{key}", dest=f"override_{key}", metavar="VALUE")


def build_parser():
    parser = _Parser(prog="asyncqvi", description="Asynchronous Q-value iteration driver")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("solve", help="run an experiment and write CSV results")
    _add_config_args(p)

    p = sub.add_parser("evaluate", help="evaluate a saved policy by rollouts")
    _add_config_args(p)
    p.add_argument("--policy", required=True, help="one action index per line")

    p = sub.add_parser("benchmark", help="thread-scaling benchmark")
    _add_config_args(p)
    p.add_argument("--threads-list", default="1,2,4", help="comma-separated thread counts")
    p.add_argument("--fixed-L", type=int, default=2_000_000)
    p.add_argument("--max-threads", type=int, default=None)

    p = sub.add_parser("validate", help="check a config and/or an MDP file")
    _add_config_args(p)
    p.add_argument("--mdp", help="MDP file to validate")
    return parser


def load_config(args):
    text = ""
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    overrides = {key: getattr(args, f"override_{key}") for key in SCHEMA
                 if getattr(args, f"override_{key}") is not None}
    env_threads = os.environ.get("ASYNCQ_THREADS")
    if env_threads:
        overrides["threads"] = env_threads
    return parse_config(text, overrides)


def _cmd_solve(args):
    run_experiment(load_config(args), out=sys.stdout)


def _cmd_evaluate(args):
    cfg = load_config(args)
    gm = build_environment(cfg).gm
    policy = load_policy(args.policy, gm.num_states, gm.num_actions)
    report = evaluate_policy(gm, policy, cfg["eval_episodes"], cfg["eval_horizon"],
                             cfg["eval_gamma"], random_state=cfg["seed"])
    print(f"episodes = {report.episodes}")
    print(f"mean_return = {report.mean_return!r}")
    print(f"std_error = {report.std_error!r}")
    print(f"flags = {report.flags}")


def _cmd_benchmark(args):
    cfg = load_config(args)
    try:
        threads = [int(t) for t in args.threads_list.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"bad --threads-list {args.threads_list!r}") from None
    gm = build_environment(cfg, tabular=False).gm
    scfg = solver_config(cfg, gm)
    rows = speedup_benchmark(gm, scfg, threads, args.fixed_L, max_threads=args.max_threads)
    with open(cfg["output_path"], "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(BENCHMARK_HEADER)
        for row in rows:
            writer.writerow([row.threads, _fmt(row.wall_time * 1000.0),
                             _fmt(row.iterations_per_second),
                             _fmt(row.samples_per_second)])
    base = rows[0].wall_time
    for row in rows:
        print(f"threads={row.threads} wall_time={row.wall_time:.3f}s "
              f"speedup={base / row.wall_time:.2f}")


def _cmd_validate(args):
    if args.config or any(getattr(args, f"override_{k}") is not None for k in SCHEMA):
        load_config(args)
        print("config ok")
    if args.mdp:
        mdp = load_mdp(args.mdp)
        validate_mdp(mdp)
        print(f"mdp ok: {mdp.num_states} states, {mdp.num_actions} actions")


COMMANDS = {"solve": _cmd_solve, "evaluate": _cmd_evaluate,
            "benchmark": _cmd_benchmark, "validate": _cmd_validate}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code
    try:
        COMMANDS[args.command](args)
    except (ValueError, TypeError) as exc:
        # ConfigError, FormatError and MdpValidationError are ValueErrors too
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, RuntimeError, MemoryError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
