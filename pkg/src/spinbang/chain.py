"""Spin-chain coupling specifications and their single-excitation Hamiltonians.

A chain of N spin-1/2 sites with xy-isotropic couplings conserves the total
excitation number, so the dynamics split into excitation sectors.  Everything
here lives in the N-dimensional single-excitation sector, where basis state
``|n>`` has the excitation at site n (sites are labelled 1..N).

Normalization convention (fixed once, used consistently by the brute-force
checks in the test suite): the full-space Hamiltonian is

    H = (1/2) * sum_{m<n} [ Jx_mn (X_m X_n + Y_m Y_n) + Jz_mn Z_m Z_n ]

which restricted to the single-excitation sector gives off-diagonal entries
equal to Jx_mn and diagonal entries

    H_nn = (1/2) * sum_{m<l} Jz_ml  -  sum_{m != n} Jz_nm.

Uniform diagonal shifts are irrelevant global phases and are retained.
"""

from __future__ import annotations

import dataclasses
import json
import warnings
from dataclasses import dataclass
from typing import Union

import numpy as np

MODEL_XY = "xy"
MODEL_HEISENBERG = "heisenberg"
MODEL_XYZ = "xyz"
MODELS = (MODEL_XY, MODEL_HEISENBERG, MODEL_XYZ)

#: absolute tolerance for symmetry / hermiticity checks on inputs
SYMMETRY_ATOL = 1e-12

CHAIN_FORMAT = "spinbang-chain/1"


def _as_coupling_matrix(m, n_spins: int, name: str) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.shape != (n_spins, n_spins):
        raise ValueError(
            f"{name} must be a {n_spins}x{n_spins} matrix, got shape {a.shape}"
        )
    if np.abs(a - a.T).max(initial=0.0) > SYMMETRY_ATOL:
        raise ValueError(f"{name} must be symmetric")
    if np.abs(np.diag(a)).max(initial=0.0) > SYMMETRY_ATOL:
        raise ValueError(f"{name} must have zero diagonal (no self-coupling)")
    a = 0.5 * (a + a.T)
    np.fill_diagonal(a, 0.0)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ChainSpec:
    """Coupling constants of an N-spin chain, in units of the reference J.

    ``jx`` holds the transverse couplings Jx_mn (= Jy_mn by xy-isotropy; only
    Jx is stored), ``jz`` the longitudinal ones.  Both are symmetric with zero
    diagonal.  ``model_tag`` is metadata; the matrices are normative.  ``seed``
    and ``epsilon`` record disorder provenance when the chain was sampled.
    """

    n_spins: int
    jx: np.ndarray
    jz: np.ndarray
    model_tag: str = MODEL_XYZ
    seed: int | None = None
    epsilon: float | None = None

    def __post_init__(self):
        if self.n_spins < 2:
            raise ValueError("a chain needs at least 2 spins")
        if self.model_tag not in MODELS:
            raise ValueError(f"unknown model_tag {self.model_tag!r}; expected one of {MODELS}")
        jx = _as_coupling_matrix(self.jx, self.n_spins, "jx")
        jz = _as_coupling_matrix(self.jz, self.n_spins, "jz")
        if self.model_tag == MODEL_XY and np.abs(jz).max(initial=0.0) > SYMMETRY_ATOL:
            raise ValueError("model_tag 'xy' requires jz == 0")
        if self.model_tag == MODEL_HEISENBERG and np.abs(jz - jx).max(initial=0.0) > SYMMETRY_ATOL:
            raise ValueError("model_tag 'heisenberg' requires jz == jx")
        object.__setattr__(self, "jx", jx)
        object.__setattr__(self, "jz", jz)

    def bonds(self, which: str = "jx") -> list[tuple[int, int, float]]:
        """Nonzero couplings as (m, n, value) with 1-based m < n."""
        a = self.jx if which == "jx" else self.jz
        out = []
        for i in range(self.n_spins):
            for j in range(i + 1, self.n_spins):
                if a[i, j] != 0.0:
                    out.append((i + 1, j + 1, float(a[i, j])))
        return out

    def is_nearest_neighbor(self) -> bool:
        """True when all nonzero couplings sit on the first off-diagonal."""
        for a in (self.jx, self.jz):
            mask = a != 0.0
            idx = np.nonzero(np.triu(mask, 1))
            if any(j - i != 1 for i, j in zip(*idx)):
                return False
        return True


@dataclass(frozen=True)
class SubspaceHamiltonian:
    """Restriction of the chain Hamiltonian to the single-excitation sector.

    Real symmetric for every model in scope; entries in units of J.
    """

    dim: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (self.dim, self.dim):
            raise ValueError(f"matrix shape {m.shape} does not match dim {self.dim}")
        if np.abs(m - m.T).max(initial=0.0) > SYMMETRY_ATOL:
            raise ValueError("subspace Hamiltonian must be Hermitian (real symmetric)")
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


# ---------------------------------------------------------------------------
# Actuators: local binary perturbations of the chain
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SwitchOffCoupling:
    """Set the coupling between sites (m, n) to zero (both jx and jz)."""

    site_a: int = 1
    site_b: int = 2


@dataclass(frozen=True)
class AddCouplingDelta:
    """Add ``delta`` to the transverse coupling Jx between sites (m, n)."""

    site_a: int
    site_b: int
    delta: float


@dataclass(frozen=True)
class DiagonalShift:
    """Shift the subspace diagonal entry of one site by ``delta``.

    Not representable as a coupling change; applied to the subspace matrix.
    """

    site: int
    delta: float


Actuator = Union[SwitchOffCoupling, AddCouplingDelta, DiagonalShift]

DEFAULT_ACTUATOR = SwitchOffCoupling(1, 2)


def _check_site(site: int, n: int):
    if not 1 <= site <= n:
        raise ValueError(f"site {site} outside 1..{n}")


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------

def uniform_chain(n_spins: int, model: str = MODEL_XY, coupling: float = 1.0,
                  jz_coupling: float | None = None) -> ChainSpec:
    """Uniform nearest-neighbor chain with all bonds equal to ``coupling``.

    ``model`` picks the jz content: zero for 'xy', equal to jx for
    'heisenberg' and (by default) for 'xyz'; pass ``jz_coupling`` to set an
    independent longitudinal bond strength for 'xyz'.
    """
    jx = np.zeros((n_spins, n_spins))
    for i in range(n_spins - 1):
        jx[i, i + 1] = jx[i + 1, i] = coupling
    if model == MODEL_XY:
        jz = np.zeros_like(jx)
    elif model == MODEL_HEISENBERG:
        jz = jx.copy()
    elif model == MODEL_XYZ:
        if jz_coupling is None:
            jz = jx.copy()
        else:
            jz = jx * (jz_coupling / coupling if coupling != 0.0 else 0.0)
    else:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    return ChainSpec(n_spins, jx, jz, model_tag=model)


def build_subspace_hamiltonian(spec: ChainSpec) -> SubspaceHamiltonian:
    """Restrict the chain Hamiltonian to the single-excitation sector.

    Off-diagonal entries equal Jx_mn; the diagonal follows the normalization
    convention in the module docstring.
    """
    h = np.array(spec.jx, dtype=float)
    total_z = float(np.triu(spec.jz, 1).sum())
    row_z = spec.jz.sum(axis=1)
    np.fill_diagonal(h, 0.5 * total_z - row_z)
    return SubspaceHamiltonian(spec.n_spins, h)


def perturb_spec(spec: ChainSpec, act: Actuator) -> ChainSpec:
    """Chain with a coupling actuator applied (DiagonalShift has no spec form)."""
    if isinstance(act, DiagonalShift):
        raise TypeError("DiagonalShift acts on the subspace matrix, not on couplings")
    _check_site(act.site_a, spec.n_spins)
    _check_site(act.site_b, spec.n_spins)
    if act.site_a == act.site_b:
        raise ValueError("actuator must touch two distinct sites")
    i, j = act.site_a - 1, act.site_b - 1
    jx = np.array(spec.jx)
    jz = np.array(spec.jz)
    if isinstance(act, SwitchOffCoupling):
        if jx[i, j] == 0.0 and jz[i, j] == 0.0:
            warnings.warn(
                f"coupling ({act.site_a},{act.site_b}) is already zero; "
                "SwitchOffCoupling has no effect",
                stacklevel=2,
            )
        jx[i, j] = jx[j, i] = 0.0
        jz[i, j] = jz[j, i] = 0.0
    elif isinstance(act, AddCouplingDelta):
        jx[i, j] += act.delta
        jx[j, i] += act.delta
    else:
        raise TypeError(f"unknown actuator {act!r}")
    return ChainSpec(spec.n_spins, jx, jz, model_tag=_infer_tag(jx, jz),
                     seed=spec.seed, epsilon=spec.epsilon)


def _infer_tag(jx: np.ndarray, jz: np.ndarray) -> str:
    if np.abs(jz).max(initial=0.0) <= SYMMETRY_ATOL:
        return MODEL_XY
    if np.abs(jz - jx).max(initial=0.0) <= SYMMETRY_ATOL:
        return MODEL_HEISENBERG
    return MODEL_XYZ


def apply_actuator(spec: ChainSpec, act: Actuator = DEFAULT_ACTUATOR) -> SubspaceHamiltonian:
    """Subspace Hamiltonian of the chain with the actuator switched on."""
    if isinstance(act, DiagonalShift):
        _check_site(act.site, spec.n_spins)
        h = np.array(build_subspace_hamiltonian(spec).matrix)
        h[act.site - 1, act.site - 1] += act.delta
        return SubspaceHamiltonian(spec.n_spins, h)
    return build_subspace_hamiltonian(perturb_spec(spec, act))


def sample_disordered_chain(base: ChainSpec, epsilon: float, seed: int) -> ChainSpec:
    """Scale each nearest-neighbor bond by (1 + epsilon * xi), xi ~ N(0, 1).

    One Gaussian draw per bond (in site order), applied to jx and jz of that
    bond together, so Heisenberg chains stay Heisenberg.  Values are not
    clipped; large epsilon may flip bond signs.  Deterministic given ``seed``.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    if not base.is_nearest_neighbor():
        raise ValueError("disorder sampling expects a nearest-neighbor chain")
    if epsilon == 0:
        return base
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal(base.n_spins - 1)
    jx = np.array(base.jx)
    jz = np.array(base.jz)
    for b in range(base.n_spins - 1):
        f = 1.0 + epsilon * xi[b]
        jx[b, b + 1] *= f
        jx[b + 1, b] *= f
        jz[b, b + 1] *= f
        jz[b + 1, b] *= f
    return ChainSpec(base.n_spins, jx, jz, model_tag=base.model_tag,
                     seed=seed, epsilon=epsilon)


# ---------------------------------------------------------------------------
# Serialization (documented in README: "Chain file format")
# ---------------------------------------------------------------------------

def chain_to_dict(spec: ChainSpec) -> dict:
    d = {
        "format": CHAIN_FORMAT,
        "n_spins": spec.n_spins,
        "model": spec.model_tag,
        "jx_bonds": [[m, n, v] for m, n, v in spec.bonds("jx")],
        "jz_bonds": [[m, n, v] for m, n, v in spec.bonds("jz")],
    }
    if spec.seed is not None:
        d["seed"] = spec.seed
    if spec.epsilon is not None:
        d["epsilon"] = spec.epsilon
    return d


def chain_from_dict(d: dict) -> ChainSpec:
    fmt = d.get("format", CHAIN_FORMAT)
    if fmt != CHAIN_FORMAT:
        raise ValueError(f"unsupported chain format {fmt!r}")
    n = int(d["n_spins"])
    jx = np.zeros((n, n))
    jz = np.zeros((n, n))
    for target, key in ((jx, "jx_bonds"), (jz, "jz_bonds")):
        for m, nn, v in d.get(key, []):
            if not (1 <= m <= n and 1 <= nn <= n and m != nn):
                raise ValueError(f"bond ({m},{nn}) outside 1..{n}")
            target[m - 1, nn - 1] = v
            target[nn - 1, m - 1] = v
    return ChainSpec(n, jx, jz, model_tag=d.get("model", MODEL_XYZ),
                     seed=d.get("seed"), epsilon=d.get("epsilon"))


def save_chain(spec: ChainSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(chain_to_dict(spec), f, indent=2)
        f.write("\n")


def load_chain(path) -> ChainSpec:
    with open(path, encoding="utf-8") as f:
        return chain_from_dict(json.load(f))


def replace(spec: ChainSpec, **changes) -> ChainSpec:
    """dataclasses.replace with validation re-run."""
    return dataclasses.replace(spec, **changes)
