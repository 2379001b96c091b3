"""Simulated adaptive closed-loop experiments.

A closed-loop optimizer never sees the chain Hamiltonians: each candidate
switching sequence is "run on the experiment" and only the resulting transfer
fidelity comes back, at limited precision (digit quantization or projective
measurement statistics).  The algorithms here (discrete-gradient quasi-Newton,
Nelder-Mead simplex, generational GA) therefore consume nothing but a
:class:`MeasuredObjective` and the problem's constraint box.

``compare_algorithms`` reruns the whole benchmark: every algorithm starts each
trial from the same random sequence, with a private oracle whose call counter
provides exact evaluation accounting, and the model-based Newton optimizer is
included as the efficiency reference.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .chain import SubspaceHamiltonian
from .newton import (
    NewtonPolicy,
    OptimizationProblem,
    OptimizationResult,
    SequenceEvaluator,
    newton_optimize,
    project_feasible,
    random_initial_durations,
)
from .propagate import ON_FIRST, SpectralCache, SwitchingSequence

__all__ = [
    "FidelityOracle",
    "MeasuredObjective",
    "measure_fidelity",
    "DiscreteGradient",
    "discrete_gradient",
    "QuasiNewtonPolicy",
    "quasi_newton_closed_loop",
    "nelder_mead",
    "genetic_optimize",
    "AlgorithmStats",
    "TrialRecord",
    "BenchmarkReport",
    "compare_algorithms",
    "DEFAULT_ALGORITHMS",
]

MODE_EXACT = "exact"
MODE_QUANTIZED = "quantized"
MODE_SAMPLED = "sampled"
ORACLE_MODES = (MODE_EXACT, MODE_QUANTIZED, MODE_SAMPLED)

DEFAULT_BUDGET = 20_000


class FidelityOracle:
    """Exact, digit-quantized, or measurement-sampled fidelity evaluator.

    The counter increments exactly once per evaluation.  Sampled mode draws
    k ~ Binomial(shots, F) from a private generator, reproducible from seed.
    """

    def __init__(self, mode: str = MODE_EXACT, digits: int | None = None,
                 shots: int | None = None, seed: int | None = None):
        if mode not in ORACLE_MODES:
            raise ValueError(f"mode must be one of {ORACLE_MODES}")
        if mode == MODE_QUANTIZED and (digits is None or digits < 1):
            raise ValueError("quantized mode needs digits >= 1")
        if mode == MODE_SAMPLED and (shots is None or shots < 1):
            raise ValueError("sampled mode needs shots >= 1")
        self.mode = mode
        self.digits = digits
        self.shots = shots
        self.seed = seed
        self.evaluation_count = 0
        self._rng = np.random.default_rng(seed)

    def measure(self, exact_fidelity: float) -> float:
        """Degrade an exact fidelity according to the mode; bump the counter."""
        self.evaluation_count += 1
        f = min(max(float(exact_fidelity), 0.0), 1.0)
        if self.mode == MODE_EXACT:
            return f
        if self.mode == MODE_QUANTIZED:
            return float(np.round(f, self.digits))
        k = self._rng.binomial(self.shots, f)
        return k / self.shots

    @property
    def noise_floor(self) -> float:
        """Scale of the measurement error a single evaluation can carry."""
        if self.mode == MODE_QUANTIZED:
            return 10.0 ** (-self.digits)
        if self.mode == MODE_SAMPLED:
            return 0.5 / np.sqrt(self.shots)
        return 0.0

    @property
    def suggested_step(self) -> float:
        """Noise-aware finite-difference step, 10^ceil((1-D)/2) for D digits."""
        if self.mode == MODE_EXACT:
            return 1e-6
        digits = self.digits if self.mode == MODE_QUANTIZED else max(
            1, int(round(-np.log10(self.noise_floor))))
        return 10.0 ** int(np.ceil((1 - digits) / 2))

    def bind(self, cache_off: SpectralCache, cache_on: SpectralCache,
             source: int = 1, target: int | None = None,
             start_phase: str = ON_FIRST) -> "MeasuredObjective":
        return MeasuredObjective(self, cache_off, cache_on, source, target,
                                 start_phase)


class MeasuredObjective:
    """The only physics interface a closed-loop algorithm receives."""

    def __init__(self, oracle: FidelityOracle, cache_off: SpectralCache,
                 cache_on: SpectralCache, source: int = 1,
                 target: int | None = None, start_phase: str = ON_FIRST):
        self._oracle = oracle
        self._ev = SequenceEvaluator(cache_off, cache_on, source, target,
                                     start_phase)
        self.start_phase = start_phase

    def fidelity(self, durations) -> float:
        return self._oracle.measure(1.0 - self._ev.error(durations))

    def error(self, durations) -> float:
        return 1.0 - self.fidelity(durations)

    @property
    def evaluations(self) -> int:
        return self._oracle.evaluation_count

    @property
    def noise_floor(self) -> float:
        return self._oracle.noise_floor

    @property
    def suggested_step(self) -> float:
        return self._oracle.suggested_step


def measure_fidelity(oracle: FidelityOracle, cache_off: SpectralCache,
                     cache_on: SpectralCache, seq: SwitchingSequence,
                     source: int = 1, target: int | None = None) -> float:
    """One oracle evaluation of the sequence's transfer fidelity."""
    ev = SequenceEvaluator(cache_off, cache_on, source, target, seq.start_phase)
    return oracle.measure(1.0 - ev.error(seq.durations))


# ---------------------------------------------------------------------------
# Discrete gradients
# ---------------------------------------------------------------------------

class DiscreteGradient(NamedTuple):
    vector: np.ndarray
    reliable: bool


def discrete_gradient(objective: MeasuredObjective, durations, step: float,
                      t_min: float = 0.0) -> DiscreteGradient:
    """Central-difference gradient of the measured error (2K oracle calls).

    Flagged unreliable when every measured difference is exactly zero, which
    happens when ``step`` sits below the oracle's quantization plateau.
    """
    if step <= 0:
        raise ValueError("step must be > 0")
    t = np.asarray(durations, dtype=float)
    g = np.empty(t.size)
    any_nonzero = False
    for k in range(t.size):
        tp = t.copy()
        tp[k] = t[k] + step
        tm = t.copy()
        tm[k] = max(t[k] - step, t_min)
        ep = objective.error(tp)
        em = objective.error(tm)
        g[k] = (ep - em) / (tp[k] - tm[k])
        any_nonzero |= ep != em
    return DiscreteGradient(g, any_nonzero)


def _fd_gradient(objective, t, step, t_min, rng, jitter, central, e_here):
    """Internal estimator: optional forward mode, per-coordinate jitter, and
    (in central mode) the second-difference diagonal curvature that the same
    evaluations already determine."""
    g = np.empty(t.size)
    curv = np.empty(t.size) if central else None
    any_nonzero = False
    for k in range(t.size):
        h = step * (1.0 + jitter * rng.uniform(-0.5, 0.5)) if jitter else step
        tp = t.copy()
        tp[k] = t[k] + h
        ep = objective.error(tp)
        if central:
            tm = t.copy()
            tm[k] = max(t[k] - h, t_min)
            em = objective.error(tm)
            a = tp[k] - t[k]
            bk = t[k] - tm[k]
            g[k] = (ep - em) / (a + bk)
            if bk > 0:
                curv[k] = 2.0 * (bk * ep + a * em - (a + bk) * e_here) / (a * bk * (a + bk))
            else:
                curv[k] = 0.0
            any_nonzero |= ep != em
        else:
            g[k] = (ep - e_here) / h
            any_nonzero |= ep != e_here
    return g, any_nonzero, curv


def _diag_preconditioner(curv: np.ndarray | None) -> np.ndarray | None:
    """Inverse-diagonal-curvature seed for the BFGS model, when trustworthy."""
    if curv is None:
        return None
    pos = curv[curv > 1e-12]
    if pos.size < max(3, curv.size // 4):
        return None
    med = float(np.median(pos))
    if not np.isfinite(med) or med <= 0:
        return None
    c = np.where(curv > 1e-12, curv, med)
    c = np.clip(c, 0.1 * med, 10.0 * med)
    return np.diag(1.0 / c)


# ---------------------------------------------------------------------------
# Quasi-Newton on measured errors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuasiNewtonPolicy:
    """Tunables of the closed-loop quasi-Newton iteration."""

    max_iterations: int = 600
    pass_iterations: int = 150
    budget: int = DEFAULT_BUDGET
    armijo: float = 1e-4
    max_backtracks: int = 25
    step_cap: float = 2.0
    noise_margin: float = 2.0
    phase_switch: float = 0.04
    abandon_early: tuple[int, float] = (25, 0.5)
    abandon_late: tuple[int, float] = (60, 0.1)
    # threshold-relative tiers: (iterations, error as a multiple of threshold)
    abandon_stuck: tuple[int, float] = (45, 10.0)
    abandon_final: tuple[int, float] = (90, 3.0)
    kick_fraction: float = 0.35
    good_error: float = 0.05


def quasi_newton_closed_loop(problem: OptimizationProblem,
                             objective: MeasuredObjective, t0, *,
                             step: float | None = None, seed: int | None = None,
                             policy: QuasiNewtonPolicy | None = None) -> OptimizationResult:
    """BFGS-style iteration driven purely by measured fidelities.

    Discrete gradients (forward differences in the high-error phase when the
    oracle is precise enough, central otherwise) feed a secant-updated inverse
    curvature model; the line search tolerates measurement noise; the
    finite-difference step shrinks when quantization masks progress; and the
    search restarts from seeded points on stagnation, exactly as the
    model-based Newton does.  Every oracle call is counted.
    """
    pol = policy or QuasiNewtonPolicy()
    rng = np.random.default_rng(seed)
    start_phase = getattr(objective, "start_phase", ON_FIRST)
    if isinstance(t0, SwitchingSequence):
        start_phase = t0.start_phase
        t0 = t0.durations
    t0 = np.asarray(t0, dtype=float)
    k = t0.size
    if t0.min(initial=np.inf) < problem.t_min - 1e-9 or t0.sum() > problem.t_max + 1e-9:
        raise ValueError("infeasible initial sequence")

    h0 = step if step is not None else getattr(objective, "suggested_step", 1e-6)
    noise = getattr(objective, "noise_floor", 0.0)
    h_min = max(2.0 * np.sqrt(noise), 1e-6)
    jitter = 0.5 if noise > 1e-9 else 0.0
    noisy = noise > 1e-9
    allow_forward = noise <= 1e-7
    t_cap, t_floor = problem.t_max, problem.t_min
    thresh = problem.error_threshold

    started = time.perf_counter()
    evals0 = objective.evaluations

    def grad(point, err_here, h):
        central = (err_here <= pol.phase_switch) or not allow_forward
        return _fd_gradient(objective, point, h, t_floor, rng, jitter, central,
                            err_here)

    t = project_feasible(t0, t_cap, t_floor)
    err = objective.error(t)
    best_t, best_err = t.copy(), err
    iterations = 0
    restarts = 0
    first_pass = True

    while (best_err > thresh and objective.evaluations - evals0 < pol.budget
           and iterations < pol.max_iterations):
        if not first_pass:
            restarts += 1
            if best_err < pol.good_error:
                scale = pol.kick_fraction * problem.initial_total / k
                scale *= max(0.05, min(1.0, (best_err / 0.02) ** 0.5))
                t = project_feasible(best_t + rng.normal(scale=scale, size=k),
                                     t_cap, t_floor)
            else:
                t = project_feasible(random_initial_durations(problem, rng),
                                     t_cap, t_floor)
            err = objective.error(t)
        first_pass = False
        h = h0
        g, reliable, curv = grad(t, err, h)
        b = _diag_preconditioner(curv)
        scaled_once = b is not None
        central_prev = curv is not None
        if b is None:
            b = np.eye(k)
        stall = 0
        pass_iters = 0
        while iterations < pol.max_iterations and pass_iters < pol.pass_iterations:
            iterations += 1
            pass_iters += 1
            if best_err <= thresh or objective.evaluations - evals0 >= pol.budget:
                break
            it_lim, err_lim = pol.abandon_early
            if pass_iters > it_lim and err > err_lim:
                break
            it_lim, err_lim = pol.abandon_late
            if pass_iters > it_lim and err > err_lim:
                break
            it_lim, mult = pol.abandon_stuck
            if pass_iters > it_lim and err > mult * thresh:
                break
            it_lim, mult = pol.abandon_final
            if pass_iters > it_lim and err > mult * thresh:
                break
            if not reliable:
                h = min(h * 4.0, 1.0)
                g, reliable, curv = grad(t, err, h)
                if not reliable:
                    break
            d = -b @ g
            slope = float(g @ d)
            if slope >= 0:
                b = _diag_preconditioner(curv)
                scaled_once = b is not None
                if b is None:
                    b = np.eye(k)
                    d = -g
                    slope = -float(g @ g)
                else:
                    d = -b @ g
                    slope = float(g @ d)
                    if slope >= 0:
                        b = np.eye(k)
                        scaled_once = False
                        d = -g
                        slope = -float(g @ g)
            biggest = np.abs(d).max()
            if biggest > pol.step_cap:
                d *= pol.step_cap / biggest
                slope = float(g @ d)
            accepted = False
            gamma = 1.0
            for _ in range(pol.max_backtracks):
                cand = project_feasible(t + gamma * d, t_cap, t_floor)
                if np.max(np.abs(cand - t)) > 0:
                    cand_err = objective.error(cand)
                    if cand_err <= err + pol.armijo * gamma * slope + pol.noise_margin * noise:
                        accepted = True
                        break
                gamma *= 0.5
                if objective.evaluations - evals0 >= pol.budget:
                    break
            if not accepted:
                stall += 1
                b = np.eye(k)
                scaled_once = False
                if h > h_min:
                    h = max(h * 0.25, h_min)
                    g, reliable, curv = grad(t, err, h)
                    b = _diag_preconditioner(curv)
                    scaled_once = b is not None
                    if b is None:
                        b = np.eye(k)
                    continue
                if stall >= 2:
                    break
                continue
            stall = 0
            refreshed = False
            if noisy and (err - cand_err) < 10.0 * noise and cand_err > 2.0 * thresh and h > h_min:
                h = max(h * 0.25, h_min)
                refreshed = True
            g2, reliable, curv = grad(cand, cand_err, h)
            entered_central = curv is not None and not central_prev
            central_prev = curv is not None
            if refreshed or entered_central:
                # seed the curvature model from the free diagonal estimate
                seeded = _diag_preconditioner(curv)
                if seeded is not None:
                    b = seeded
                    scaled_once = True
                elif refreshed:
                    b = np.eye(k)
                    scaled_once = False
            s = cand - t
            y = g2 - g
            sy = float(s @ y)
            # the secant pair is inconsistent across an estimator-mode switch
            if not entered_central and sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
                if not scaled_once:
                    b = (sy / float(y @ y)) * np.eye(k)
                    scaled_once = True
                rho = 1.0 / sy
                v = np.eye(k) - rho * np.outer(s, y)
                b = v @ b @ v.T + rho * np.outer(s, s)
            t, err, g = cand, cand_err, g2
            if err < best_err - 1e-15:
                best_t, best_err = t.copy(), err
            if np.abs(s).max() < 1e-10:
                break

    seq = SwitchingSequence(best_t, start_phase)
    best_err = float(best_err)
    return OptimizationResult(
        sequence=seq,
        error=best_err,
        fidelity=1.0 - best_err,
        total_time=seq.total_time,
        iterations=iterations,
        fidelity_evaluations=objective.evaluations - evals0,
        wall_time=time.perf_counter() - started,
        converged=best_err <= thresh,
        seed=seed,
        restarts=restarts,
        message="error threshold reached" if best_err <= thresh else "budget or iteration cap",
    )


# ---------------------------------------------------------------------------
# Nelder-Mead simplex
# ---------------------------------------------------------------------------

def nelder_mead(problem: OptimizationProblem, objective: MeasuredObjective,
                t0, *, budget: int = DEFAULT_BUDGET, max_iterations: int = 20_000,
                xatol: float = 1e-9, fatol: float = 1e-12) -> OptimizationResult:
    """Standard reflection/expansion/contraction/shrink simplex search.

    Coefficients (1, 2, 0.5, 0.5); infeasible vertices are projected back onto
    the constraint set before evaluation.
    """
    start_phase = getattr(objective, "start_phase", ON_FIRST)
    if isinstance(t0, SwitchingSequence):
        start_phase = t0.start_phase
        t0 = t0.durations
    t0 = np.asarray(t0, dtype=float)
    k = t0.size
    t_cap, t_floor = problem.t_max, problem.t_min
    thresh = problem.error_threshold
    started = time.perf_counter()
    evals0 = objective.evaluations

    def proj(x):
        return project_feasible(x, t_cap, t_floor)

    base = proj(t0)
    verts = [base]
    for i in range(k):
        step = 0.05 * base[i] if base[i] != 0.0 else 0.00025
        cand = base.copy()
        cand[i] += step
        cand = proj(cand)
        if np.max(np.abs(cand - base)) == 0.0:
            cand = base.copy()
            cand[i] = max(base[i] - step, t_floor)
            cand = proj(cand)
        verts.append(cand)
    simplex = np.array(verts)
    fvals = np.array([objective.error(v) for v in simplex])

    iterations = 0
    while iterations < max_iterations:
        iterations += 1
        order = np.argsort(fvals, kind="stable")
        simplex = simplex[order]
        fvals = fvals[order]
        if fvals[0] <= thresh or objective.evaluations - evals0 >= budget:
            break
        if (fvals[-1] - fvals[0] <= fatol
                and np.max(np.abs(simplex[1:] - simplex[0])) <= xatol):
            break
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        reflected = proj(centroid + 1.0 * (centroid - worst))
        f_ref = objective.error(reflected)
        if f_ref < fvals[0]:
            expanded = proj(centroid + 2.0 * (centroid - worst))
            f_exp = objective.error(expanded)
            if f_exp < f_ref:
                simplex[-1], fvals[-1] = expanded, f_exp
            else:
                simplex[-1], fvals[-1] = reflected, f_ref
        elif f_ref < fvals[-2]:
            simplex[-1], fvals[-1] = reflected, f_ref
        else:
            if f_ref < fvals[-1]:
                contracted = proj(centroid + 0.5 * (reflected - centroid))
            else:
                contracted = proj(centroid + 0.5 * (worst - centroid))
            f_con = objective.error(contracted)
            if f_con < min(f_ref, fvals[-1]):
                simplex[-1], fvals[-1] = contracted, f_con
            else:
                for i in range(1, k + 1):
                    simplex[i] = proj(simplex[0] + 0.5 * (simplex[i] - simplex[0]))
                    fvals[i] = objective.error(simplex[i])
                    if objective.evaluations - evals0 >= budget:
                        break

    best = int(np.argmin(fvals))
    seq = SwitchingSequence(simplex[best], start_phase)
    err = float(fvals[best])
    return OptimizationResult(
        sequence=seq,
        error=err,
        fidelity=1.0 - err,
        total_time=seq.total_time,
        iterations=iterations,
        fidelity_evaluations=objective.evaluations - evals0,
        wall_time=time.perf_counter() - started,
        converged=err <= thresh,
        seed=None,
        message="simplex terminated",
    )


# ---------------------------------------------------------------------------
# Generational genetic algorithm
# ---------------------------------------------------------------------------

def genetic_optimize(problem: OptimizationProblem, objective: MeasuredObjective,
                     population_size: int = 50, seed: int | None = None, *,
                     t0=None, budget: int = DEFAULT_BUDGET,
                     tournament: int = 3, blend_alpha: float = 0.5,
                     mutation_sigma: float = 0.5, mutation_decay: float = 0.97,
                     max_generations: int = 100_000) -> OptimizationResult:
    """Generational GA: tournament selection, blend crossover, Gaussian
    mutation with decaying scale, elitism 1, feasibility by projection."""
    if population_size < 2:
        raise ValueError("population_size must be >= 2")
    rng = np.random.default_rng(seed)
    start_phase = getattr(objective, "start_phase", ON_FIRST)
    if isinstance(t0, SwitchingSequence):
        start_phase = t0.start_phase
        t0 = t0.durations
    k = problem.k_max
    t_cap, t_floor = problem.t_max, problem.t_min
    thresh = problem.error_threshold
    started = time.perf_counter()
    evals0 = objective.evaluations

    def proj(x):
        return project_feasible(x, t_cap, t_floor)

    pop = []
    if t0 is not None:
        pop.append(proj(np.asarray(t0, dtype=float)))
    while len(pop) < population_size:
        pop.append(proj(random_initial_durations(problem, rng)))
    pop = np.array(pop)
    fit = np.array([objective.error(ind) for ind in pop])
    best_i = int(np.argmin(fit))
    best_t, best_err = pop[best_i].copy(), float(fit[best_i])

    def pick_parent():
        idx = rng.integers(0, population_size, size=tournament)
        return pop[idx[np.argmin(fit[idx])]]

    generation = 0
    sigma = mutation_sigma
    while (best_err > thresh and objective.evaluations - evals0 < budget
           and generation < max_generations):
        generation += 1
        children = [best_t.copy()]  # elitism
        while len(children) < population_size:
            pa, pb = pick_parent(), pick_parent()
            lo = np.minimum(pa, pb)
            hi = np.maximum(pa, pb)
            spread = hi - lo
            child = rng.uniform(lo - blend_alpha * spread, hi + blend_alpha * spread)
            if sigma > 0:
                child = child + rng.normal(scale=sigma, size=k)
            children.append(proj(child))
        pop = np.array(children)
        fit = np.empty(population_size)
        fit[0] = best_err
        for i in range(1, population_size):
            fit[i] = objective.error(pop[i])
            if objective.evaluations - evals0 >= budget:
                fit[i + 1:] = np.inf
                break
        best_i = int(np.argmin(fit))
        if fit[best_i] < best_err:
            best_t, best_err = pop[best_i].copy(), float(fit[best_i])
        sigma *= mutation_decay

    seq = SwitchingSequence(best_t, start_phase)
    return OptimizationResult(
        sequence=seq,
        error=best_err,
        fidelity=1.0 - best_err,
        total_time=seq.total_time,
        iterations=generation,
        fidelity_evaluations=objective.evaluations - evals0,
        wall_time=time.perf_counter() - started,
        converged=best_err <= thresh,
        seed=seed,
        message=f"{generation} generations",
    )


# ---------------------------------------------------------------------------
# Benchmark harness
# ---------------------------------------------------------------------------

@dataclass
class TrialRecord:
    algorithm: str
    trial: int
    error: float
    fidelity: float
    total_time: float
    evaluations: int
    wall_time: float
    success: bool


@dataclass
class AlgorithmStats:
    algorithm: str
    success_pct: float
    mean_evals: float
    mean_exe_s: float
    mean_t: float
    min_t: float | None

    def as_row(self) -> list:
        return [self.algorithm, self.success_pct, self.mean_evals,
                self.mean_exe_s, self.mean_t,
                "" if self.min_t is None else self.min_t]


@dataclass
class BenchmarkReport:
    rows: list[AlgorithmStats]
    trials: list[TrialRecord]

    CSV_HEADER = ["algorithm", "success_pct", "mean_evals", "mean_exe_s",
                  "mean_T", "min_T"]

    def row(self, algorithm: str) -> AlgorithmStats:
        for r in self.rows:
            if r.algorithm == algorithm:
                return r
        raise KeyError(algorithm)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(self.CSV_HEADER)
            for r in self.rows:
                row = r.as_row()
                w.writerow([row[0]] + [repr(float(x)) if x != "" else ""
                                       for x in row[1:]])

    def to_json(self, path=None) -> str:
        payload = {
            "rows": [vars(r) for r in self.rows],
            "trials": [vars(t) for t in self.trials],
        }
        text = json.dumps(payload, indent=2)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
                fh.write("\n")
        return text


ALGO_GENETIC = "genetic"
ALGO_SIMPLEX = "simplex"
ALGO_NEWTON_DISCRETE = "newton_discrete"
ALGO_NEWTON_MODEL = "newton_model"
DEFAULT_ALGORITHMS = (ALGO_GENETIC, ALGO_SIMPLEX, ALGO_NEWTON_DISCRETE,
                      ALGO_NEWTON_MODEL)


def _make_oracle(oracle_config: dict, seed: int | None) -> FidelityOracle:
    cfg = dict(oracle_config)
    mode = cfg.pop("mode", MODE_QUANTIZED)
    digits = cfg.pop("digits", 10 if mode == MODE_QUANTIZED else None)
    shots = cfg.pop("shots", None)
    if cfg:
        raise ValueError(f"unknown oracle config keys: {sorted(cfg)}")
    return FidelityOracle(mode=mode, digits=digits, shots=shots, seed=seed)


def compare_algorithms(problem: OptimizationProblem, cache_off: SpectralCache,
                       cache_on: SpectralCache, oracle_config: dict,
                       trials: int, seed: int | None, *,
                       algorithms=DEFAULT_ALGORITHMS,
                       budget: int = DEFAULT_BUDGET,
                       newton_policy: NewtonPolicy | None = None,
                       qn_policy: QuasiNewtonPolicy | None = None,
                       start_phase: str = ON_FIRST) -> BenchmarkReport:
    """Seeded head-to-head benchmark of the registered algorithms.

    Every algorithm starts trial i from the same random initial sequence and
    owns a private oracle; reported evaluation counts are the oracle counter
    deltas.  Mean transfer time averages over all trials; the minimum is taken
    over successful trials only (absent when none succeeded).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    root = np.random.SeedSequence(seed)
    trial_seeds = root.spawn(trials)
    records: list[TrialRecord] = []

    for i, child in enumerate(trial_seeds):
        rng = np.random.default_rng(child)
        t0 = project_feasible(random_initial_durations(problem, rng),
                              problem.t_max, problem.t_min)
        algo_seeds = child.spawn(len(DEFAULT_ALGORITHMS))
        seed_of = {name: int(s.generate_state(1)[0])
                   for name, s in zip(DEFAULT_ALGORITHMS, algo_seeds)}
        for name in algorithms:
            run_seed = seed_of[name]
            if name == ALGO_NEWTON_MODEL:
                started = time.perf_counter()
                res = newton_optimize(problem, cache_off, cache_on, t0,
                                      policy=newton_policy, seed=run_seed,
                                      start_phase=start_phase)
                wall = time.perf_counter() - started
                evals = res.fidelity_evaluations
            else:
                oracle = _make_oracle(oracle_config, run_seed)
                objective = oracle.bind(cache_off, cache_on, problem.source,
                                        problem.target, start_phase)
                started = time.perf_counter()
                if name == ALGO_GENETIC:
                    res = genetic_optimize(problem, objective, seed=run_seed,
                                           t0=t0, budget=budget)
                elif name == ALGO_SIMPLEX:
                    res = nelder_mead(problem, objective, t0, budget=budget)
                elif name == ALGO_NEWTON_DISCRETE:
                    pol = qn_policy or QuasiNewtonPolicy(budget=budget)
                    res = quasi_newton_closed_loop(problem, objective, t0,
                                                   seed=run_seed, policy=pol)
                else:
                    raise ValueError(f"unknown algorithm {name!r}")
                wall = time.perf_counter() - started
                evals = oracle.evaluation_count
            records.append(TrialRecord(
                algorithm=name,
                trial=i,
                error=res.error,
                fidelity=res.fidelity,
                total_time=res.total_time,
                evaluations=evals,
                wall_time=wall,
                success=res.error <= problem.error_threshold,
            ))

    rows = []
    for name in algorithms:
        rs = [r for r in records if r.algorithm == name]
        succ = [r for r in rs if r.success]
        rows.append(AlgorithmStats(
            algorithm=name,
            success_pct=100.0 * len(succ) / len(rs),
            mean_evals=float(np.mean([r.evaluations for r in rs])),
            mean_exe_s=float(np.mean([r.wall_time for r in rs])),
            mean_t=float(np.mean([r.total_time for r in rs])),
            min_t=min((r.total_time for r in succ), default=None),
        ))
    return BenchmarkReport(rows=rows, trials=records)
