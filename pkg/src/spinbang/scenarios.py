"""Batch reproduction scenarios with seeded, manifest-tracked outputs.

Each scenario maps to one benchmark family: a single optimized transfer with
population traces (flow-trace), uncontrolled baselines over chain lengths
(baseline-scan), threshold transfers across chain lengths (uniform-sweep),
the switch-count / target-time error grid (kt-sweep), a disordered-chain
ensemble (disorder-ensemble), and the closed-loop algorithm comparison
(closed-loop-bench).

Determinism contract: all randomness flows from the config's master seed.
Cell i of a scenario uses the i-th 64-bit word of
``numpy.random.SeedSequence(master_seed).generate_state(n_cells)``; cells are
ordered exactly as their rows appear in the output CSV.  Reruns with the same
config produce byte-identical CSV files; the run manifest lists every output
with a sha256 checksum.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .chain import (
    MODELS,
    SwitchOffCoupling,
    apply_actuator,
    build_subspace_hamiltonian,
    chain_to_dict,
    sample_disordered_chain,
    uniform_chain,
)
from .closedloop import QuasiNewtonPolicy, compare_algorithms
from .newton import (
    NewtonPolicy,
    OptimizationProblem,
    multistart,
    quantize_times,
)
from .propagate import (
    population_trace,
    spectral_decompose,
    uncontrolled_fidelity,
    uncontrolled_peak,
)

SCENARIOS = (
    "flow-trace",
    "baseline-scan",
    "uniform-sweep",
    "kt-sweep",
    "disorder-ensemble",
    "closed-loop-bench",
)

SCHEMA_VERSION = 1

ORACLE_MODES = ("exact", "quantized", "sampled")


# ---------------------------------------------------------------------------
# Config schema and validation
# ---------------------------------------------------------------------------

def _is_int(x):
    return isinstance(x, int) and not isinstance(x, bool)


def _is_num(x):
    return (_is_int(x) or isinstance(x, float)) and np.isfinite(x)


def _int_list(min_value):
    def check(v):
        if not isinstance(v, list) or not v or not all(_is_int(x) for x in v):
            return "must be a non-empty list of integers"
        if any(x < min_value for x in v):
            return f"every entry must be >= {min_value}"
        return None
    return check


def _num_list(min_value):
    def check(v):
        if not isinstance(v, list) or not v or not all(_is_num(x) for x in v):
            return "must be a non-empty list of numbers"
        if any(x <= min_value for x in v):
            return f"every entry must be > {min_value}"
        return None
    return check


def _int_ge(n):
    return lambda v: None if _is_int(v) and v >= n else f"must be an integer >= {n}"


def _num_gt(n):
    return lambda v: None if _is_num(v) and v > n else f"must be a number > {n}"


def _num_ge(n):
    return lambda v: None if _is_num(v) and v >= n else f"must be a number >= {n}"


def _open_unit():
    return lambda v: (None if _is_num(v) and 0 < v < 1
                      else "must be a number in (0, 1)")


def _choice(options):
    return lambda v: None if v in options else f"must be one of {sorted(options)}"


def _bool():
    return lambda v: None if isinstance(v, bool) else "must be true or false"


def _string():
    return lambda v: None if isinstance(v, str) else "must be a string"


# (check, default) pairs; default None with required=True marks a mandatory key
def _schema(scenario: str) -> dict:
    common = {
        "schema_version": (_choice((SCHEMA_VERSION,)), SCHEMA_VERSION),
        "scenario": (_choice(SCENARIOS), scenario),
        "seed": (_int_ge(0), 20260811),
        "output": {
            "dir": (_string(), f"out/{scenario}"),
        },
    }
    if scenario == "flow-trace":
        return {**common,
                "chain": {
                    "n": (_int_ge(2), 10),
                    "model": (_choice(MODELS), "xyz"),
                    "epsilon": (_num_ge(0), 0.1),
                },
                "problem": {
                    "k": (_int_ge(1), 40),
                    "t_target": (_num_gt(0), 95.474),
                    "error_threshold": (_open_unit(), 1e-4),
                    "restarts": (_int_ge(1), 20),
                    "max_iterations": (_int_ge(1), 1500),
                },
                "trace": {
                    "grid_step": (_num_gt(0), 0.05),
                }}
    if scenario == "baseline-scan":
        return {**common,
                "chain": {
                    "model": (_choice(MODELS), "heisenberg"),
                    "n_values": (_int_list(2), list(range(4, 21))),
                },
                "scan": {
                    "t_max": (_num_gt(0), 4000.0),
                    "coarse_step": (_num_gt(0), 0.05),
                }}
    if scenario == "uniform-sweep":
        return {**common,
                "chain": {
                    "model": (_choice(MODELS), "xyz"),
                    "n_values": (_int_list(2), list(range(4, 21))),
                },
                "problem": {
                    "k_per_n": (_int_ge(1), 4),
                    "t_max_per_n": (_num_gt(0), 12.0),
                    "t0_per_n": (_num_gt(0), 10.0),
                    "error_threshold": (_open_unit(), 1e-4),
                    "restarts": (_int_ge(1), 10),
                    "max_iterations": (_int_ge(1), 2500),
                    "quantize_digits": (_int_ge(1), 4),
                }}
    if scenario == "kt-sweep":
        return {**common,
                "chain": {
                    "n": (_int_ge(2), 10),
                    "model": (_choice(MODELS), "xyz"),
                },
                "sweep": {
                    "k_values": (_int_list(1), list(range(12, 41, 4))),
                    "t0_values": (_num_list(0), [40.0, 60.0, 80.0, 100.0, 120.0]),
                },
                "problem": {
                    "error_threshold": (_open_unit(), 1e-4),
                    "restarts": (_int_ge(1), 10),
                    "max_iterations": (_int_ge(1), 1500),
                    "stop_on_success": (_bool(), True),
                }}
    if scenario == "disorder-ensemble":
        return {**common,
                "chain": {
                    "n": (_int_ge(2), 10),
                    "model": (_choice(MODELS), "heisenberg"),
                    "epsilon": (_num_ge(0), 0.1),
                    "ensemble": (_int_ge(1), 20),
                },
                "problem": {
                    "k": (_int_ge(1), 40),
                    "t0": (_num_gt(0), 100.0),
                    "t_max": (_num_gt(0), 110.0),
                    "error_threshold": (_open_unit(), 1e-4),
                    "restarts": (_int_ge(1), 10),
                    "max_iterations": (_int_ge(1), 1500),
                },
                "scan": {
                    "t_max": (_num_gt(0), 4000.0),
                    "coarse_step": (_num_gt(0), 0.05),
                }}
    if scenario == "closed-loop-bench":
        return {**common,
                "chain": {
                    "n": (_int_ge(2), 10),
                    "model": (_choice(MODELS), "xyz"),
                },
                "problem": {
                    "k": (_int_ge(1), 40),
                    "t0": (_num_gt(0), 100.0),
                    "t_max": (_num_gt(0), 110.0),
                    "error_threshold": (_open_unit(), 1e-4),
                },
                "bench": {
                    "trials": (_int_ge(1), 20),
                    "budget": (_int_ge(1), 20000),
                    "oracle": {
                        "mode": (_choice(ORACLE_MODES), "quantized"),
                        "digits": (_int_ge(1), 10),
                        "shots": (_int_ge(1), 1_000_000),
                    },
                }}
    raise ValueError(f"unknown scenario {scenario!r}")


def _validate_level(data, schema, prefix, errors, out):
    for key, value in data.items():
        if key not in schema:
            errors.append(f"{prefix}{key}: unknown key "
                          f"(expected one of {sorted(schema)})")
    for key, rule in schema.items():
        path = f"{prefix}{key}"
        if isinstance(rule, dict):
            sub = data.get(key, {})
            if not isinstance(sub, dict):
                errors.append(f"{path}: must be an object")
                sub = {}
            out[key] = {}
            _validate_level(sub, rule, path + ".", errors, out[key])
        else:
            check, default = rule
            if key in data:
                msg = check(data[key])
                if msg:
                    errors.append(f"{path}: {msg}")
                    out[key] = default
                else:
                    out[key] = data[key]
            else:
                out[key] = default


@dataclass
class ConfigError(Exception):
    errors: list[str]

    def __str__(self):
        return "invalid configuration:\n" + "\n".join(f"  - {e}" for e in self.errors)


def validate_config_dict(data: dict, scenario: str | None = None) -> dict:
    """Validate and fill defaults; raises ConfigError listing every problem."""
    if not isinstance(data, dict):
        raise ConfigError(["top level: must be a JSON object"])
    errors: list[str] = []
    name = data.get("scenario", scenario)
    if name is None:
        raise ConfigError(["scenario: missing (no scenario name given)"])
    if name not in SCENARIOS:
        raise ConfigError([f"scenario: {name!r} is not a known scenario; "
                           f"valid names: {', '.join(SCENARIOS)}"])
    if scenario is not None and name != scenario:
        raise ConfigError([f"scenario: config says {name!r} but {scenario!r} "
                           "was requested"])
    out: dict = {}
    _validate_level(data, _schema(name), "", errors, out)
    if errors:
        raise ConfigError(errors)
    return out


def validate_config(path, scenario: str | None = None) -> dict:
    """Load a JSON config file and validate it (line numbers on parse errors)."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror or exc}"]) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            [f"{path}:{exc.lineno}:{exc.colno}: JSON parse error: {exc.msg}"]
        ) from exc
    return validate_config_dict(data, scenario)


def default_config(scenario: str) -> dict:
    return validate_config_dict({"scenario": scenario})


# ---------------------------------------------------------------------------
# Cell workers (top level so process pools can pickle them)
# ---------------------------------------------------------------------------

def _control_caches(chain):
    h1 = build_subspace_hamiltonian(chain)
    h2 = apply_actuator(chain, SwitchOffCoupling(1, 2))
    return spectral_decompose(h1), spectral_decompose(h2)


def _baseline_cell(args):
    n, model, t_max, coarse_step = args
    chain = uniform_chain(n, model)
    cache = spectral_decompose(build_subspace_hamiltonian(chain))
    best_f, best_t = uncontrolled_peak(cache, t_max, coarse_step)
    return {"n": n, "best_fidelity": best_f, "best_time": best_t}


def _uniform_sweep_cell(args):
    n, model, prob_cfg, cell_seed = args
    chain = uniform_chain(n, model)
    cache_off, cache_on = _control_caches(chain)
    problem = OptimizationProblem(
        k_max=prob_cfg["k_per_n"] * n,
        t_max=prob_cfg["t_max_per_n"] * n,
        t0_total=min(prob_cfg["t0_per_n"] * n, prob_cfg["t_max_per_n"] * n),
        error_threshold=prob_cfg["error_threshold"],
    )
    policy = NewtonPolicy(max_iterations=prob_cfg["max_iterations"])
    res = multistart(problem, cache_off, cache_on, prob_cfg["restarts"],
                     cell_seed, policy=policy, stop_on_success=True)
    _, q_err = quantize_times(cache_off, cache_on, res.sequence,
                              prob_cfg["quantize_digits"])
    return {"n": n, "total_time": res.total_time, "error": res.error,
            "k": problem.k_max, "quantized_error": q_err}


def _kt_cell(args):
    n, model, k, t0, prob_cfg, cell_seed = args
    chain = uniform_chain(n, model)
    cache_off, cache_on = _control_caches(chain)
    problem = OptimizationProblem(
        k_max=k, t_max=float(t0), t0_total=float(t0),
        error_threshold=prob_cfg["error_threshold"],
    )
    policy = NewtonPolicy(max_iterations=prob_cfg["max_iterations"])
    res = multistart(problem, cache_off, cache_on, prob_cfg["restarts"],
                     cell_seed, policy=policy,
                     stop_on_success=prob_cfg["stop_on_success"])
    return {"k": k, "t0": float(t0), "min_error": res.error}


def _disorder_cell(args):
    index, n, model, epsilon, prob_cfg, scan_cfg, cell_seed = args
    base = uniform_chain(n, model)
    chain = sample_disordered_chain(base, epsilon, cell_seed)
    cache_off, cache_on = _control_caches(chain)
    base_f, base_t = uncontrolled_peak(
        spectral_decompose(build_subspace_hamiltonian(chain)),
        scan_cfg["t_max"], scan_cfg["coarse_step"])
    problem = OptimizationProblem(
        k_max=prob_cfg["k"], t_max=prob_cfg["t_max"],
        t0_total=min(prob_cfg["t0"], prob_cfg["t_max"]),
        error_threshold=prob_cfg["error_threshold"],
    )
    policy = NewtonPolicy(max_iterations=prob_cfg["max_iterations"])
    res = multistart(problem, cache_off, cache_on, prob_cfg["restarts"],
                     cell_seed, policy=policy, stop_on_success=True)
    return {"chain": index, "seed": cell_seed,
            "baseline_fidelity": base_f, "baseline_time": base_t,
            "controlled_fidelity": res.fidelity, "controlled_time": res.total_time}


def _map_cells(fn, cells, jobs):
    if jobs <= 1:
        return [fn(c) for c in cells]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, cells))


# ---------------------------------------------------------------------------
# Scenario runners
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    return repr(float(x))


def _write_rows_csv(path: Path, header: list[str], rows: list[dict],
                    int_cols=()) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([str(int(row[h])) if h in int_cols else _fmt(row[h])
                        for h in header])


def _cell_seeds(master_seed: int, n: int) -> list[int]:
    words = np.random.SeedSequence(master_seed).generate_state(max(n, 1), dtype=np.uint64)
    return [int(w) for w in words[:n]]


@dataclass
class ScenarioRun:
    scenario: str
    out_dir: Path
    outputs: list[Path]
    failures: list[dict]
    manifest_path: Path


def _finish(scenario, out_dir, config, outputs, failures, started) -> ScenarioRun:
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "artifact": "spinbang",
        "version": __version__,
        "scenario": scenario,
        "seed": config["seed"],
        "config": config,
        "wall_time_s": time.perf_counter() - started,
        "outputs": [],
        "failures": failures,
    }
    for p in outputs:
        digest = hashlib.sha256(p.read_bytes()).hexdigest()
        manifest["outputs"].append({"path": p.name, "sha256": digest,
                                    "bytes": p.stat().st_size})
    manifest_path = out_dir / "manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return ScenarioRun(scenario, out_dir, outputs, failures, manifest_path)


def _run_cells(fn, cells, labels, jobs, failures):
    """Run cells, isolating per-cell failures (serial fallback on error)."""
    rows = []
    if jobs > 1:
        try:
            return _map_cells(fn, cells, jobs), failures
        except Exception:
            pass  # fall back to serial so the failing cell can be identified
    for label, cell in zip(labels, cells):
        try:
            rows.append(fn(cell))
        except Exception as exc:  # noqa: BLE001 - isolation is the point
            failures.append({"cell": label, "error": f"{type(exc).__name__}: {exc}"})
    return rows, failures


def run_scenario(config: dict, *, out_dir=None, jobs: int = 1,
                 quiet: bool = False) -> ScenarioRun:
    """Execute a validated scenario config and persist outputs + manifest."""
    scenario = config["scenario"]
    out = Path(out_dir if out_dir is not None else config["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    failures: list[dict] = []
    say = (lambda *a, **k: None) if quiet else print

    if scenario == "flow-trace":
        outputs = _run_flow_trace(config, out, say)
    elif scenario == "baseline-scan":
        cfg = config["chain"]
        cells = [(n, cfg["model"], config["scan"]["t_max"],
                  config["scan"]["coarse_step"]) for n in cfg["n_values"]]
        rows, failures = _run_cells(_baseline_cell, cells,
                                    [f"n={n}" for n in cfg["n_values"]],
                                    jobs, failures)
        path = out / "baseline_scan.csv"
        _write_rows_csv(path, ["n", "best_fidelity", "best_time"], rows,
                        int_cols=("n",))
        say(f"baseline-scan: {len(rows)} rows -> {path}")
        outputs = [path]
    elif scenario == "uniform-sweep":
        ns = config["chain"]["n_values"]
        seeds = _cell_seeds(config["seed"], len(ns))
        cells = [(n, config["chain"]["model"], config["problem"], s)
                 for n, s in zip(ns, seeds)]
        rows, failures = _run_cells(_uniform_sweep_cell, cells,
                                    [f"n={n}" for n in ns], jobs, failures)
        path = out / "uniform_sweep.csv"
        _write_rows_csv(path, ["n", "total_time", "error", "k", "quantized_error"],
                        rows, int_cols=("n", "k"))
        say(f"uniform-sweep: {len(rows)} rows -> {path}")
        outputs = [path]
    elif scenario == "kt-sweep":
        ks = config["sweep"]["k_values"]
        t0s = config["sweep"]["t0_values"]
        grid = [(k, t0) for k in ks for t0 in t0s]
        seeds = _cell_seeds(config["seed"], len(grid))
        cells = [(config["chain"]["n"], config["chain"]["model"], k, t0,
                  config["problem"], s) for (k, t0), s in zip(grid, seeds)]
        rows, failures = _run_cells(_kt_cell, cells,
                                    [f"k={k},t0={t0}" for k, t0 in grid],
                                    jobs, failures)
        path = out / "kt_sweep.csv"
        _write_rows_csv(path, ["k", "t0", "min_error"], rows, int_cols=("k",))
        say(f"kt-sweep: {len(rows)} rows -> {path}")
        outputs = [path]
    elif scenario == "disorder-ensemble":
        m = config["chain"]["ensemble"]
        seeds = _cell_seeds(config["seed"], m)
        cells = [(i, config["chain"]["n"], config["chain"]["model"],
                  config["chain"]["epsilon"], config["problem"], config["scan"], s)
                 for i, s in enumerate(seeds)]
        rows, failures = _run_cells(_disorder_cell, cells,
                                    [f"chain={i}" for i in range(m)],
                                    jobs, failures)
        path = out / "disorder_ensemble.csv"
        _write_rows_csv(path, ["chain", "seed", "baseline_fidelity",
                               "baseline_time", "controlled_fidelity",
                               "controlled_time"],
                        rows, int_cols=("chain", "seed"))
        say(f"disorder-ensemble: {len(rows)} rows -> {path}")
        outputs = [path]
    elif scenario == "closed-loop-bench":
        outputs = _run_closed_loop(config, out, say)
    else:
        raise ValueError(f"unknown scenario {scenario!r}")

    return _finish(scenario, out, config, outputs, failures, started)


def _run_flow_trace(config, out: Path, say) -> list[Path]:
    chain_cfg, prob_cfg = config["chain"], config["problem"]
    seeds = _cell_seeds(config["seed"], 2)
    base = uniform_chain(chain_cfg["n"], chain_cfg["model"])
    chain = (sample_disordered_chain(base, chain_cfg["epsilon"], seeds[0])
             if chain_cfg["epsilon"] > 0 else base)
    cache_off, cache_on = _control_caches(chain)
    problem = OptimizationProblem(
        k_max=prob_cfg["k"], t_max=prob_cfg["t_target"],
        t0_total=prob_cfg["t_target"],
        error_threshold=prob_cfg["error_threshold"],
    )
    policy = NewtonPolicy(max_iterations=prob_cfg["max_iterations"])
    res = multistart(problem, cache_off, cache_on, prob_cfg["restarts"],
                     seeds[1], policy=policy, stop_on_success=True)
    say(f"flow-trace: error={res.error:.3e} T={res.total_time:.4f}")

    step = config["trace"]["grid_step"]
    trace = population_trace(cache_off, cache_on, res.sequence, step)
    grid = trace[:, 0]
    free = uncontrolled_fidelity(spectral_decompose(
        build_subspace_hamiltonian(chain)), grid)

    paths = []
    p = out / "trace_controlled.csv"
    _write_trace(p, trace[:, 0], trace[:, 1])
    paths.append(p)
    p = out / "trace_uncontrolled.csv"
    _write_trace(p, grid, free)
    paths.append(p)
    p = out / "chain.json"
    with open(p, "w", encoding="utf-8") as fh:
        json.dump(chain_to_dict(chain), fh, indent=2)
        fh.write("\n")
    paths.append(p)
    p = out / "result.json"
    with open(p, "w", encoding="utf-8") as fh:
        fh.write(res.to_json(problem))
        fh.write("\n")
    paths.append(p)
    return paths


def _write_trace(path: Path, ts, ps) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "population"])
        for t, pv in zip(ts, ps):
            w.writerow([_fmt(t), _fmt(pv)])


def _run_closed_loop(config, out: Path, say) -> list[Path]:
    chain = uniform_chain(config["chain"]["n"], config["chain"]["model"])
    cache_off, cache_on = _control_caches(chain)
    prob_cfg = config["problem"]
    problem = OptimizationProblem(
        k_max=prob_cfg["k"], t_max=prob_cfg["t_max"],
        t0_total=min(prob_cfg["t0"], prob_cfg["t_max"]),
        error_threshold=prob_cfg["error_threshold"],
    )
    bench = config["bench"]
    oracle_cfg = {"mode": bench["oracle"]["mode"]}
    if oracle_cfg["mode"] == "quantized":
        oracle_cfg["digits"] = bench["oracle"]["digits"]
    elif oracle_cfg["mode"] == "sampled":
        oracle_cfg["shots"] = bench["oracle"]["shots"]
    report = compare_algorithms(
        problem, cache_off, cache_on, oracle_cfg, bench["trials"],
        config["seed"], budget=bench["budget"],
        qn_policy=QuasiNewtonPolicy(budget=bench["budget"]),
    )
    for row in report.rows:
        say(f"closed-loop-bench: {row.algorithm}: success {row.success_pct:.0f}% "
            f"evals {row.mean_evals:.1f}")
    table = out / "table1.csv"
    report.to_csv(table)
    details = out / "details.json"
    report.to_json(details)
    return [table, details]
