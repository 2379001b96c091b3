"""Model-based optimization of switching sequences.

The transfer error E(t) = 1 - |<target| U(t) |source>|^2 is minimized over
segment durations with an analytic gradient and Hessian.  Writing z_k for the
matrix element of the product with the segment Hamiltonian inserted at slot k
(and w_kl with two insertions), the derivatives are

    dE/dt_k    = -2 Im[ z_k * conj(z) ]
    d2E/dt_kdl =  2 Re[ w_kl * conj(z) ] - 2 Re[ z_k * conj(z_l) ]

computed in O(K^2 N^2) per point via forward/backward partial-product sweeps.

The Newton iteration t <- t - gamma * [H + mu I]^{-1} grad(E) uses Levenberg
regularization with an adaptive mu, Armijo backtracking on gamma, an active
set for durations pinned at the lower bound, and a KKT equality step along
the face sum(t) = t_max when the total-time cap is active.  Iterates stay
feasible (projection) and accepted steps decrease E monotonically.  On
stagnation the iteration restarts from a fresh seeded point (or a seeded
perturbation of the best point found, once that point is already good) and
keeps the best iterate seen.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, asdict

import numpy as np
import scipy.linalg as sla

from .propagate import (
    ON_FIRST,
    SpectralCache,
    SwitchingSequence,
    segment_hamiltonian_indices,
)

__all__ = [
    "OptimizationProblem",
    "OptimizationResult",
    "NewtonPolicy",
    "SequenceEvaluator",
    "gradient",
    "hessian",
    "newton_optimize",
    "multistart",
    "quantize_times",
    "random_initial_durations",
    "project_feasible",
]


@dataclass(frozen=True)
class OptimizationProblem:
    """Transfer task and constraints for switching-time optimization."""

    k_max: int
    t_max: float
    source: int = 1
    target: int | None = None
    t_min: float = 0.0
    error_threshold: float = 1e-4
    time_digits: int | None = None
    t0_total: float | None = None

    def __post_init__(self):
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        if self.t_max <= 0:
            raise ValueError("t_max must be > 0")
        if self.t_min < 0:
            raise ValueError("t_min must be >= 0")
        if self.t_min * self.k_max > self.t_max:
            raise ValueError("k_max * t_min exceeds t_max; no feasible sequence")
        if not 0 < self.error_threshold < 1:
            raise ValueError("error_threshold must lie in (0, 1)")
        if self.time_digits is not None and self.time_digits < 1:
            raise ValueError("time_digits must be >= 1")
        if self.t0_total is not None and not 0 < self.t0_total <= self.t_max:
            raise ValueError("t0_total must lie in (0, t_max]")

    @property
    def initial_total(self) -> float:
        return self.t_max if self.t0_total is None else self.t0_total


@dataclass
class OptimizationResult:
    """Outcome of one optimization run."""

    sequence: SwitchingSequence
    error: float
    fidelity: float
    total_time: float
    iterations: int
    fidelity_evaluations: int
    wall_time: float
    converged: bool
    seed: int | None = None
    restarts: int = 0
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "durations": [float(x) for x in self.sequence.durations],
            "start_phase": self.sequence.start_phase,
            "error": self.error,
            "fidelity": self.fidelity,
            "total_time": self.total_time,
            "iterations": self.iterations,
            "fidelity_evaluations": self.fidelity_evaluations,
            "wall_time": self.wall_time,
            "converged": self.converged,
            "seed": self.seed,
            "restarts": self.restarts,
            "message": self.message,
        }

    def to_json(self, problem: OptimizationProblem | None = None) -> str:
        d = self.to_dict()
        if problem is not None:
            d["problem"] = asdict(problem)
        return json.dumps(d, indent=2)


@dataclass(frozen=True)
class NewtonPolicy:
    """Tunables of the Newton iteration (defaults follow the benchmarks)."""

    max_iterations: int = 500
    armijo: float = 1e-4
    max_backtracks: int = 30
    mu_initial: float = 1e-3
    step_tol: float = 1e-10
    restart_on_stagnation: bool = True
    kick_fraction: float = 0.35
    good_error: float = 0.05


# ---------------------------------------------------------------------------
# Shared evaluation workspace
# ---------------------------------------------------------------------------

class SequenceEvaluator:
    """Error / gradient / Hessian of a fixed control system.

    Bound to the two spectral caches, the source/target sites, and a start
    phase; durations are the only variable.  ``evaluations`` counts error
    evaluations (each derivative sweep includes one).
    """

    def __init__(self, cache_off: SpectralCache, cache_on: SpectralCache,
                 source: int = 1, target: int | None = None,
                 start_phase: str = ON_FIRST):
        if cache_off.dim != cache_on.dim:
            raise ValueError("caches must share dimension")
        self.caches = (cache_off, cache_on)
        self.n = cache_off.dim
        if not 1 <= source <= self.n:
            raise ValueError(f"source site {source} outside 1..{self.n}")
        tgt = self.n if target is None else target
        if not 1 <= tgt <= self.n:
            raise ValueError(f"target site {tgt} outside 1..{self.n}")
        self.source = source - 1
        self.target = tgt - 1
        self.start_phase = start_phase
        self.evaluations = 0

    def _indices(self, k: int) -> np.ndarray:
        first = 1 if self.start_phase == ON_FIRST else 0
        slots = np.arange(k)
        return np.where((k - 1 - slots) % 2 == 0, first, 1 - first)

    def _unitaries(self, t: np.ndarray, idx: np.ndarray) -> np.ndarray:
        us = np.empty((t.size, self.n, self.n), dtype=complex)
        for m in (0, 1):
            sel = idx == m
            if not sel.any():
                continue
            v = self.caches[m].eigenvectors
            ph = np.exp(-1j * np.outer(t[sel], self.caches[m].eigenvalues))
            us[sel] = np.einsum("ij,kj,lj->kil", v, ph, v.conj())
        return us

    def error(self, durations) -> float:
        self.evaluations += 1
        t = np.asarray(durations, dtype=float)
        idx = self._indices(t.size)
        psi = np.zeros(self.n, dtype=complex)
        psi[self.source] = 1.0
        for dur, m in zip(t[::-1], idx[::-1]):
            cache = self.caches[m]
            v = cache.eigenvectors
            psi = v @ (np.exp(-1j * dur * cache.eigenvalues) * (v.conj().T @ psi))
        return 1.0 - min(float(abs(psi[self.target]) ** 2), 1.0)

    def error_gradient(self, durations) -> tuple[float, np.ndarray]:
        e, g, _ = self._sweeps(durations, want_hessian=False)
        return e, g

    def error_gradient_hessian(self, durations) -> tuple[float, np.ndarray, np.ndarray]:
        return self._sweeps(durations, want_hessian=True)

    def _sweeps(self, durations, want_hessian: bool):
        self.evaluations += 1
        t = np.asarray(durations, dtype=float)
        k = t.size
        n = self.n
        idx = self._indices(k)
        us = self._unitaries(t, idx)
        hmats = [self.caches[m].matrix for m in (0, 1)]

        psi = np.empty((k + 1, n), dtype=complex)
        psi[k] = 0.0
        psi[k, self.source] = 1.0
        for j in range(k - 1, -1, -1):
            psi[j] = us[j] @ psi[j + 1]
        phi = np.empty((k + 1, n), dtype=complex)
        phi[0] = 0.0
        phi[0, self.target] = 1.0
        for j in range(k):
            phi[j + 1] = us[j].conj().T @ phi[j]
        z = psi[0][self.target]
        err = 1.0 - min(float(abs(z) ** 2), 1.0)

        hpsi = np.empty((k, n), dtype=complex)
        hphi = np.empty((k, n), dtype=complex)
        for m in (0, 1):
            sel = idx == m
            if sel.any():
                hpsi[sel] = psi[:k][sel] @ hmats[m]  # real symmetric H
                hphi[sel] = phi[:k][sel] @ hmats[m]
        zs = np.einsum("kn,kn->k", phi[:k].conj(), hpsi)
        grad = -2.0 * (zs * np.conj(z)).imag
        if not want_hessian:
            return err, grad, None

        w = np.zeros((k, k), dtype=complex)
        w[np.arange(k), np.arange(k)] = np.einsum("kn,kn->k", hphi.conj(), hpsi)
        x = np.zeros((n, 0), dtype=complex)
        for j in range(k - 2, -1, -1):
            x = np.concatenate([hpsi[j + 1][:, None], x], axis=1)
            x = us[j] @ x
            w[j, j + 1:] = hphi[j].conj() @ x
        term1 = 2.0 * (w * np.conj(z)).real
        term1 = np.triu(term1) + np.triu(term1, 1).T
        term2 = 2.0 * np.real(np.outer(zs, np.conj(zs)))
        return err, grad, term1 - term2


def gradient(cache_off: SpectralCache, cache_on: SpectralCache,
             seq: SwitchingSequence, source: int = 1,
             target: int | None = None) -> np.ndarray:
    """Analytic gradient of the transfer error w.r.t. each duration."""
    ev = SequenceEvaluator(cache_off, cache_on, source, target, seq.start_phase)
    return ev.error_gradient(seq.durations)[1]


def hessian(cache_off: SpectralCache, cache_on: SpectralCache,
            seq: SwitchingSequence, source: int = 1,
            target: int | None = None) -> np.ndarray:
    """Analytic Hessian of the transfer error (symmetric by construction)."""
    ev = SequenceEvaluator(cache_off, cache_on, source, target, seq.start_phase)
    return ev.error_gradient_hessian(seq.durations)[2]


# ---------------------------------------------------------------------------
# Constrained Newton iteration
# ---------------------------------------------------------------------------

def project_feasible(t: np.ndarray, t_max: float, t_min: float = 0.0) -> np.ndarray:
    """Clip to the box t >= t_min, then rescale onto sum(t) <= t_max."""
    t = np.maximum(np.asarray(t, dtype=float), t_min)
    s = t.sum()
    if s > t_max:
        k = t.size
        if t_min > 0:
            t = t_min + (t - t_min) * (t_max - k * t_min) / (s - k * t_min)
        else:
            t = t * (t_max / s)
        for _ in range(4):  # float repair so the cap holds exactly
            excess = t.sum() - t_max
            if excess <= 0:
                break
            t[np.argmax(t)] -= excess
    return t


def random_initial_durations(problem: OptimizationProblem,
                             rng: np.random.Generator) -> np.ndarray:
    """Uniform draws rescaled so the total equals the problem's target time."""
    k = problem.k_max
    u = rng.uniform(size=k)
    budget = problem.initial_total - k * problem.t_min
    return problem.t_min + u / u.sum() * budget


def _regularized_direction(hf: np.ndarray, gf: np.ndarray, mu: float,
                           on_cap_face: bool) -> np.ndarray | None:
    """Solve (H + mu I) d = -g, optionally restricted to sum(d) = 0."""
    nf = gf.size
    a = hf + mu * np.eye(nf)
    try:
        if on_cap_face:
            kkt = np.zeros((nf + 1, nf + 1))
            kkt[:nf, :nf] = a
            kkt[:nf, nf] = 1.0
            kkt[nf, :nf] = 1.0
            sol = np.linalg.solve(kkt, np.concatenate([-gf, [0.0]]))
            d = sol[:nf]
        else:
            cho = sla.cho_factor(a, lower=True)
            d = -sla.cho_solve(cho, gf)
    except (np.linalg.LinAlgError, sla.LinAlgError, ValueError):
        return None
    if not np.all(np.isfinite(d)):
        return None
    return d


def newton_optimize(problem: OptimizationProblem, cache_off: SpectralCache,
                    cache_on: SpectralCache, t0, *,
                    policy: NewtonPolicy | None = None, seed: int | None = None,
                    start_phase: str = ON_FIRST, callback=None) -> OptimizationResult:
    """Minimize the transfer error from initial durations ``t0``.

    ``t0`` may be a SwitchingSequence or a plain duration vector; it must be
    feasible.  Terminates on error <= threshold, step norm <= step_tol with
    restarts disabled, the iteration cap, or exhausted stagnation restarts.
    ``callback(event, iteration, durations, error)`` is invoked with events
    "accept" and "restart" when provided.
    """
    pol = policy or NewtonPolicy()
    if isinstance(t0, SwitchingSequence):
        start_phase = t0.start_phase
        t0 = t0.durations
    t0 = np.asarray(t0, dtype=float)
    if t0.size != problem.k_max:
        raise ValueError(f"t0 has {t0.size} durations, problem.k_max is {problem.k_max}")
    if t0.min(initial=np.inf) < problem.t_min - 1e-9 or t0.sum() > problem.t_max + 1e-9:
        raise ValueError("infeasible initial sequence")

    ev = SequenceEvaluator(cache_off, cache_on, problem.source, problem.target,
                           start_phase)
    rng = np.random.default_rng(seed)
    t_cap, t_floor = problem.t_max, problem.t_min
    thresh = problem.error_threshold
    k = problem.k_max

    started = time.perf_counter()
    t = project_feasible(t0, t_cap, t_floor)
    err, grad_v, hess_m = ev.error_gradient_hessian(t)
    best_t, best_err = t.copy(), err
    mu = pol.mu_initial
    iterations = 0
    restarts = 0
    message = "iteration cap reached"

    def do_restart() -> np.ndarray:
        nonlocal mu
        mu = pol.mu_initial
        if best_err < pol.good_error:
            scale = pol.kick_fraction * problem.initial_total / k
            scale *= max(0.05, min(1.0, (best_err / 0.02) ** 0.5))
            fresh = project_feasible(best_t + rng.normal(scale=scale, size=k),
                                     t_cap, t_floor)
        else:
            fresh = project_feasible(random_initial_durations(problem, rng),
                                     t_cap, t_floor)
        if callback is not None:
            callback("restart", iterations, fresh, best_err)
        return fresh

    while iterations < pol.max_iterations:
        if err <= thresh:
            message = "error threshold reached"
            break
        iterations += 1
        pinned = (t <= t_floor + 1e-12) & (grad_v > 0.0)
        free = ~pinned
        nf = int(free.sum())
        accepted = False
        gradient_fallback = False
        if nf > 0:
            gf = grad_v[free]
            hf = hess_m[np.ix_(free, free)]
            at_cap = t.sum() >= t_cap - 1e-10
            for _ in range(60):
                d_free = _regularized_direction(hf, gf, mu, on_cap_face=False)
                if d_free is None:
                    mu = max(mu * 10.0, 1e-10)
                    continue
                if at_cap and d_free.sum() > 0.0:
                    d_free = _regularized_direction(hf, gf, mu, on_cap_face=True)
                    if d_free is None:
                        mu = max(mu * 10.0, 1e-10)
                        continue
                slope = float(gf @ d_free)
                if slope >= 0.0:
                    # singular/indefinite solve left no descent: steepest fallback
                    d_free = -gf
                    slope = float(gf @ d_free)
                    gradient_fallback = True
                    if slope >= 0.0:
                        break
                d_full = np.zeros(k)
                d_full[free] = d_free
                gamma = 1.0
                got = False
                for _ in range(pol.max_backtracks):
                    cand = project_feasible(t + gamma * d_full, t_cap, t_floor)
                    if np.max(np.abs(cand - t)) > 0.0:
                        cand_err = ev.error(cand)
                        if cand_err <= err + pol.armijo * gamma * slope:
                            got = True
                            break
                    gamma *= 0.5
                if got:
                    pred = -(gamma * (grad_v @ d_full)
                             + 0.5 * gamma * gamma * (d_full @ hess_m @ d_full))
                    rho = (err - cand_err) / pred if pred > 0 else 1.0
                    if rho > 0.75:
                        mu = max(mu * 0.25, 1e-12)
                    elif rho < 0.1:
                        mu *= 2.0
                    accepted = True
                    break
                mu = max(mu * 10.0, 1e-10)

        if accepted:
            step = float(np.max(np.abs(cand - t)))
            t, err = cand, cand_err
            if callback is not None:
                callback("accept", iterations, t, err)
            err, grad_v, hess_m = ev.error_gradient_hessian(t)
            if err < best_err:
                best_t, best_err = t.copy(), err
            if step <= pol.step_tol:
                if not pol.restart_on_stagnation:
                    message = "step below tolerance"
                    break
                restarts += 1
                t = do_restart()
                err, grad_v, hess_m = ev.error_gradient_hessian(t)
        else:
            if not pol.restart_on_stagnation:
                message = ("no descent step found (gradient fallback tried)"
                           if gradient_fallback else "no descent step found")
                break
            restarts += 1
            t = do_restart()
            err, grad_v, hess_m = ev.error_gradient_hessian(t)

    if err < best_err:
        best_t, best_err = t.copy(), err
    seq = SwitchingSequence(best_t, start_phase)
    converged = best_err <= thresh
    if converged:
        message = "error threshold reached"
    return OptimizationResult(
        sequence=seq,
        error=float(best_err),
        fidelity=1.0 - float(best_err),
        total_time=seq.total_time,
        iterations=iterations,
        fidelity_evaluations=ev.evaluations,
        wall_time=time.perf_counter() - started,
        converged=converged,
        seed=seed,
        restarts=restarts,
        message=message,
    )


def multistart(problem: OptimizationProblem, cache_off: SpectralCache,
               cache_on: SpectralCache, n_starts: int, seed: int | None, *,
               policy: NewtonPolicy | None = None, start_phase: str = ON_FIRST,
               stop_on_success: bool = False) -> OptimizationResult:
    """Best newton_optimize result over seeded random initial sequences.

    Deterministic given ``seed``.  With ``stop_on_success`` the loop ends at
    the first run that reaches the error threshold (the earlier runs' best is
    still returned if it is lower).
    """
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    seed_seq = np.random.SeedSequence(seed)
    children = seed_seq.spawn(n_starts)
    best: OptimizationResult | None = None
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        run_seed = int(child.generate_state(1)[0])
        t0 = random_initial_durations(problem, rng)
        res = newton_optimize(problem, cache_off, cache_on, t0, policy=policy,
                              seed=run_seed, start_phase=start_phase)
        if best is None or res.error < best.error:
            best = res
        if stop_on_success and res.converged:
            break
    return best


def quantize_times(cache_off: SpectralCache, cache_on: SpectralCache,
                   seq: SwitchingSequence, digits: int, source: int = 1,
                   target: int | None = None) -> tuple[SwitchingSequence, float]:
    """Round durations to ``digits`` decimals (half to even); re-evaluate error."""
    if digits < 1:
        raise ValueError("digits must be >= 1")
    q = SwitchingSequence(np.round(seq.durations, digits), seq.start_phase)
    ev = SequenceEvaluator(cache_off, cache_on, source, target, seq.start_phase)
    return q, ev.error(q.durations)
