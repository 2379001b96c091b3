"""Bang-bang propagation in the single-excitation sector.

Only two Hamiltonians ever appear (actuator off / actuator on), so both are
spectrally decomposed once and every segment propagator is assembled as
``V exp(-i t diag(w)) V^T`` from the cached eigensystem.  This is exact and
amortizes to a few matrix-vector products per segment across the millions of
sequence evaluations an optimization run performs.

Sequence convention: a switching sequence stores durations ``(t_1, ..., t_K)``
in product order, i.e. the evolution operator is

    U(t) = U^(a_1)(t_1) U^(a_2)(t_2) ... U^(a_K)(t_K)

and the rightmost factor (duration ``t_K``) acts chronologically first.
``start_phase`` fixes which Hamiltonian governs that chronologically first
segment; the default is actuator-on first.  Segments then alternate.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .chain import SubspaceHamiltonian

ON_FIRST = "actuator_on_first"
OFF_FIRST = "actuator_off_first"
START_PHASES = (ON_FIRST, OFF_FIRST)

HERMITICITY_ATOL = 1e-10


@dataclass(frozen=True)
class SpectralCache:
    """Eigendecomposition of a subspace Hamiltonian, eigenvalues ascending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]


def spectral_decompose(h: SubspaceHamiltonian) -> SpectralCache:
    """Decompose ``h`` so that matrix == V diag(w) V^dag, w ascending.

    Raises ValueError on non-Hermitian input.
    """
    m = np.asarray(h.matrix)
    if np.abs(m - m.conj().T).max(initial=0.0) > HERMITICITY_ATOL:
        raise ValueError("spectral_decompose requires a Hermitian matrix")
    w, v = np.linalg.eigh(m)
    for a in (w, v):
        a.setflags(write=False)
    mat = np.array(m)
    mat.setflags(write=False)
    return SpectralCache(eigenvalues=w, eigenvectors=v, matrix=mat)


@dataclass(frozen=True)
class SwitchingSequence:
    """Durations (t_1 .. t_K) in product order plus the start phase."""

    durations: np.ndarray
    start_phase: str = ON_FIRST

    def __post_init__(self):
        d = np.atleast_1d(np.asarray(self.durations, dtype=float))
        if d.ndim != 1 or d.size < 1:
            raise ValueError("durations must be a non-empty 1-D vector")
        if not np.all(np.isfinite(d)):
            raise ValueError("durations must be finite")
        if d.min(initial=0.0) < 0.0:
            raise ValueError("durations must be nonnegative")
        if self.start_phase not in START_PHASES:
            raise ValueError(f"start_phase must be one of {START_PHASES}")
        d = d.copy()
        d.setflags(write=False)
        object.__setattr__(self, "durations", d)

    @property
    def k(self) -> int:
        return self.durations.shape[0]

    @property
    def total_time(self) -> float:
        return float(self.durations.sum())


def segment_hamiltonian_indices(seq: SwitchingSequence) -> np.ndarray:
    """0 (off) / 1 (on) per product slot; slot K acts chronologically first."""
    k = seq.k
    first = 1 if seq.start_phase == ON_FIRST else 0
    slots = np.arange(k)
    return np.where((k - 1 - slots) % 2 == 0, first, 1 - first)


def chronological_segments(seq: SwitchingSequence) -> list[tuple[float, int]]:
    """(duration, hamiltonian index) pairs in time order."""
    idx = segment_hamiltonian_indices(seq)
    return [(float(t), int(m)) for t, m in zip(seq.durations[::-1], idx[::-1])]


def _check_pair(cache_off: SpectralCache, cache_on: SpectralCache):
    if cache_off.dim != cache_on.dim:
        raise ValueError("actuator-off and actuator-on caches must share dimension")


def segment_unitary(cache: SpectralCache, t: float) -> np.ndarray:
    """Dense exp(-i t H) from the cached eigensystem."""
    if t < 0:
        raise ValueError("negative duration")
    v = cache.eigenvectors
    phases = np.exp(-1j * t * cache.eigenvalues)
    return (v * phases) @ v.conj().T


def segment_unitaries(cache_off: SpectralCache, cache_on: SpectralCache,
                      seq: SwitchingSequence) -> np.ndarray:
    """All K segment propagators, stacked (K, N, N) in product order."""
    _check_pair(cache_off, cache_on)
    idx = segment_hamiltonian_indices(seq)
    n = cache_off.dim
    us = np.empty((seq.k, n, n), dtype=complex)
    for m, cache in enumerate((cache_off, cache_on)):
        sel = idx == m
        if not sel.any():
            continue
        v = cache.eigenvectors
        ph = np.exp(-1j * np.outer(seq.durations[sel], cache.eigenvalues))
        us[sel] = np.einsum("ij,kj,lj->kil", v, ph, v.conj())
    return us


def apply_segment(cache: SpectralCache, t: float, psi: np.ndarray) -> np.ndarray:
    """exp(-i t H) @ psi without building the dense propagator."""
    if t == 0.0:
        return psi
    v = cache.eigenvectors
    return v @ (np.exp(-1j * t * cache.eigenvalues) * (v.conj().T @ psi))


def evolve_sequence(cache_off: SpectralCache, cache_on: SpectralCache,
                    seq: SwitchingSequence) -> np.ndarray:
    """Full propagator U(t) of the switching sequence (rightmost factor first)."""
    us = segment_unitaries(cache_off, cache_on, seq)
    u = us[-1]
    for k in range(seq.k - 2, -1, -1):
        u = us[k] @ u
    return u


def _basis_indices(n: int, source: int, target: int | None) -> tuple[int, int]:
    tgt = n if target is None else target
    for name, s in (("source", source), ("target", tgt)):
        if not 1 <= s <= n:
            raise ValueError(f"{name} site {s} outside 1..{n}")
    return source - 1, tgt - 1


def transfer_fidelity(cache_off: SpectralCache, cache_on: SpectralCache,
                      seq: SwitchingSequence, source: int = 1,
                      target: int | None = None) -> tuple[float, float]:
    """(fidelity, error) of source -> target transfer under the sequence.

    Propagates the single source basis vector segment by segment; the full
    propagator is never formed.
    """
    _check_pair(cache_off, cache_on)
    n = cache_off.dim
    s, t = _basis_indices(n, source, target)
    idx = segment_hamiltonian_indices(seq)
    caches = (cache_off, cache_on)
    psi = np.zeros(n, dtype=complex)
    psi[s] = 1.0
    for dur, m in zip(seq.durations[::-1], idx[::-1]):
        psi = apply_segment(caches[m], dur, psi)
    fid = min(float(abs(psi[t]) ** 2), 1.0)
    return fid, 1.0 - fid


def population_trace(cache_off: SpectralCache, cache_on: SpectralCache,
                     seq: SwitchingSequence, grid_step: float,
                     source: int = 1, target: int | None = None) -> np.ndarray:
    """Target-site population on a uniform grid plus all switching instants.

    Returns an (M, 2) array of (t, |<target|psi(t)>|^2); the last row sits at
    the total time T and matches ``transfer_fidelity``.
    """
    if grid_step <= 0:
        raise ValueError("grid_step must be > 0")
    _check_pair(cache_off, cache_on)
    n = cache_off.dim
    s, tgt = _basis_indices(n, source, target)
    segments = chronological_segments(seq)
    bounds = np.concatenate([[0.0], np.cumsum([d for d, _ in segments])])
    total = bounds[-1]
    grid = np.arange(0.0, total, grid_step)
    grid = np.unique(np.concatenate([grid, bounds]))
    caches = (cache_off, cache_on)

    out_t: list[np.ndarray] = []
    out_p: list[np.ndarray] = []
    psi = np.zeros(n, dtype=complex)
    psi[s] = 1.0
    out_t.append(np.array([0.0]))
    out_p.append(np.array([abs(psi[tgt]) ** 2]))
    for j, (dur, m) in enumerate(segments):
        lo, hi = bounds[j], bounds[j + 1]
        cache = caches[m]
        ts = grid[(grid > lo) & (grid <= hi)]
        if ts.size:
            w = cache.eigenvectors.conj().T @ psi
            coeff = cache.eigenvectors[tgt, :] * w
            amps = np.exp(-1j * np.outer(ts - lo, cache.eigenvalues)) @ coeff
            out_t.append(ts)
            out_p.append(np.abs(amps) ** 2)
        psi = apply_segment(cache, dur, psi)
    trace = np.column_stack([np.concatenate(out_t), np.concatenate(out_p)])
    # segment boundaries appear once; dedupe guards against float coincidences
    _, keep = np.unique(trace[:, 0], return_index=True)
    return trace[keep]


# ---------------------------------------------------------------------------
# Uncontrolled (actuator permanently off) baselines
# ---------------------------------------------------------------------------

def uncontrolled_fidelity(cache: SpectralCache, times, source: int = 1,
                          target: int | None = None) -> np.ndarray:
    """|<target| exp(-i H t) |source>|^2 for an array of times."""
    s, t = _basis_indices(cache.dim, source, target)
    coeff = cache.eigenvectors[t, :] * np.conj(cache.eigenvectors[s, :])
    ts = np.atleast_1d(np.asarray(times, dtype=float))
    amps = np.exp(-1j * np.outer(ts, cache.eigenvalues)) @ coeff
    return np.abs(amps) ** 2


def _golden_max(f, lo: float, hi: float, xtol: float = 1e-7) -> tuple[float, float]:
    """Golden-section maximization of a scalar function on [lo, hi]."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > xtol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = c if fc > fd else d
    return x, max(fc, fd)


def uncontrolled_peak(cache: SpectralCache, t_max: float, coarse_step: float = 0.05,
                      source: int = 1, target: int | None = None,
                      fidelity_tol: float = 1e-9) -> tuple[float, float]:
    """Best uncontrolled transfer fidelity over [0, t_max] and when it occurs.

    Coarse grid scan, golden-section refinement of candidate local maxima to
    time resolution 1e-6, then the earliest time within ``fidelity_tol`` of
    the best refined fidelity.
    """
    if t_max <= 0 or coarse_step <= 0:
        raise ValueError("t_max and coarse_step must be > 0")
    ts = np.arange(0.0, t_max + 0.5 * coarse_step, coarse_step)
    ts[-1] = min(ts[-1], t_max)
    fs = uncontrolled_fidelity(cache, ts, source, target)

    def f(t):
        return float(uncontrolled_fidelity(cache, [min(max(t, 0.0), t_max)],
                                           source, target)[0])

    left = np.roll(fs, 1); left[0] = -np.inf
    right = np.roll(fs, -1); right[-1] = -np.inf
    local = (fs >= left) & (fs >= right)
    # refine every coarse local max that could plausibly tie the global one
    slack = 0.05
    cand = np.nonzero(local & (fs >= fs.max() - slack))[0]
    refined: list[tuple[float, float]] = []
    for i in cand:
        lo = ts[max(i - 1, 0)]
        hi = ts[min(i + 1, ts.size - 1)]
        if hi <= lo:
            refined.append((float(ts[i]), float(fs[i])))
            continue
        x, fx = _golden_max(f, lo, hi, xtol=1e-7)
        refined.append((float(x), float(fx)))
    best_f = max(fx for _, fx in refined)
    best_t = min(x for x, fx in refined if fx >= best_f - fidelity_tol)
    return min(best_f, 1.0), best_t


# ---------------------------------------------------------------------------
# CSV emission (column order documented in README)
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    return repr(float(x))


def write_trace_csv(path, trace: np.ndarray) -> None:
    """Population trace as CSV with header ``t,population``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "population"])
        for t, p in trace:
            w.writerow([_fmt(t), _fmt(p)])


def write_baseline_csv(path, rows) -> None:
    """Baseline scan rows (n, best_fidelity, best_time) as CSV."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "best_fidelity", "best_time"])
        for n, bf, bt in rows:
            w.writerow([int(n), _fmt(bf), _fmt(bt)])
