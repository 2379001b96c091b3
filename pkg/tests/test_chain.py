"""Chain construction, actuators, disorder, and the brute-force equivalence."""

import json

import numpy as np
import pytest

import bruteforce as bf
from spinbang.chain import (
    AddCouplingDelta,
    ChainSpec,
    DiagonalShift,
    SwitchOffCoupling,
    apply_actuator,
    build_subspace_hamiltonian,
    chain_from_dict,
    chain_to_dict,
    load_chain,
    perturb_spec,
    sample_disordered_chain,
    save_chain,
    uniform_chain,
)


def test_uniform_xy_is_hopping_matrix():
    h = build_subspace_hamiltonian(uniform_chain(3, "xy")).matrix
    expected = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
    np.testing.assert_allclose(h, expected, atol=1e-15)


def test_two_site_heisenberg_matches_brute_force():
    spec = uniform_chain(2, "heisenberg")
    h = build_subspace_hamiltonian(spec).matrix
    ref = bf.project_single_excitation(bf.full_hamiltonian(spec.jx, spec.jz), 2)
    np.testing.assert_allclose(h, ref.real, atol=1e-12)
    np.testing.assert_allclose(h, [[-0.5, 1.0], [1.0, -0.5]], atol=1e-12)


def test_zero_couplings_give_zero_matrix():
    spec = ChainSpec(4, np.zeros((4, 4)), np.zeros((4, 4)), model_tag="xy")
    assert np.abs(build_subspace_hamiltonian(spec).matrix).max() == 0.0


def test_offdiagonals_equal_jx_for_random_chains():
    rng = np.random.default_rng(11)
    for model in ("xy", "heisenberg", "xyz"):
        jx, jz = bf.random_chain_arrays(rng, 5, model)
        spec = ChainSpec(5, jx, jz, model_tag=model)
        h = build_subspace_hamiltonian(spec).matrix
        off = h - np.diag(np.diag(h))
        np.testing.assert_allclose(off, jx - np.diag(np.diag(jx)), atol=1e-14)


@pytest.mark.parametrize("model", ["xy", "heisenberg", "xyz"])
@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_brute_force_equivalence_up_to_uniform_shift(model, n):
    rng = np.random.default_rng(100 * n + len(model))
    jx, jz = bf.random_chain_arrays(rng, n, model)
    spec = ChainSpec(n, jx, jz, model_tag=model)
    h = build_subspace_hamiltonian(spec).matrix
    ref = bf.project_single_excitation(bf.full_hamiltonian(jx, jz), n).real
    diff = h - ref
    shift_removed = diff - np.mean(np.diag(diff)) * np.eye(n)
    assert np.abs(shift_removed).max() <= 1e-10


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_total_spin_commutes_for_xy_isotropic_chains(n):
    rng = np.random.default_rng(n)
    jx, jz = bf.random_chain_arrays(rng, n, "xyz")
    h = bf.full_hamiltonian(jx, jz)
    s = bf.total_sz(n)
    assert np.abs(h @ s - s @ h).max() <= 1e-10


# ---------------------------------------------------------------------------
# Actuators
# ---------------------------------------------------------------------------

def test_switch_off_bond_in_xy_chain():
    h2 = apply_actuator(uniform_chain(3, "xy"), SwitchOffCoupling(1, 2)).matrix
    expected = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
    np.testing.assert_allclose(h2, expected, atol=1e-15)


def test_zero_diagonal_shift_is_identity_perturbation():
    spec = uniform_chain(4, "heisenberg")
    h1 = build_subspace_hamiltonian(spec).matrix
    h2 = apply_actuator(spec, DiagonalShift(1, 0.0)).matrix
    np.testing.assert_array_equal(h1, h2)


def test_switch_off_only_bond_of_two_site_heisenberg():
    spec = uniform_chain(2, "heisenberg")
    h2 = apply_actuator(spec, SwitchOffCoupling(1, 2)).matrix
    # all couplings gone: the subspace matrix is exactly zero
    ref = bf.project_single_excitation(
        bf.full_hamiltonian(np.zeros((2, 2)), np.zeros((2, 2))), 2).real
    np.testing.assert_allclose(h2, ref, atol=1e-12)
    assert np.abs(h2).max() == 0.0


@pytest.mark.parametrize("act", [
    SwitchOffCoupling(1, 2),
    AddCouplingDelta(2, 3, 0.37),
    DiagonalShift(2, -0.8),
])
def test_actuator_locality(act):
    spec = uniform_chain(6, "heisenberg")
    h1 = build_subspace_hamiltonian(spec).matrix
    h2 = apply_actuator(spec, act).matrix
    diff = h2 - h1
    if isinstance(act, DiagonalShift):
        allowed = np.zeros_like(diff, dtype=bool)
        allowed[act.site - 1, act.site - 1] = True
    else:
        i, j = act.site_a - 1, act.site_b - 1
        allowed = np.zeros_like(diff, dtype=bool)
        allowed[i, j] = allowed[j, i] = True
        # jz perturbations move the diagonal as well
        allowed[np.diag_indices_from(allowed)] = True
    assert np.abs(diff[~allowed]).max(initial=0.0) == 0.0


def test_switch_off_missing_coupling_warns():
    spec = uniform_chain(4, "xy")
    with pytest.warns(UserWarning, match="already zero"):
        perturb_spec(spec, SwitchOffCoupling(1, 3))


def test_actuator_site_out_of_range():
    spec = uniform_chain(3, "xy")
    with pytest.raises(ValueError, match="outside"):
        apply_actuator(spec, SwitchOffCoupling(1, 7))
    with pytest.raises(ValueError, match="outside"):
        apply_actuator(spec, DiagonalShift(0, 1.0))


# ---------------------------------------------------------------------------
# Disorder
# ---------------------------------------------------------------------------

def test_zero_epsilon_returns_base_unchanged():
    base = uniform_chain(8, "heisenberg")
    assert sample_disordered_chain(base, 0.0, 42) is base


def test_disorder_is_deterministic():
    base = uniform_chain(10, "heisenberg")
    a = sample_disordered_chain(base, 0.1, 7)
    b = sample_disordered_chain(base, 0.1, 7)
    np.testing.assert_array_equal(a.jx, b.jx)
    np.testing.assert_array_equal(a.jz, b.jz)
    c = sample_disordered_chain(base, 0.1, 8)
    assert np.abs(a.jx - c.jx).max() > 0


def test_small_disorder_bonds_stay_within_five_sigma():
    base = uniform_chain(10, "heisenberg")
    bonds = []
    for seed in range(1112):  # 1112 chains x 9 bonds > 1e4 draws
        spec = sample_disordered_chain(base, 0.01, seed)
        bonds.extend(spec.jx[i, i + 1] for i in range(9))
    bonds = np.asarray(bonds)
    assert bonds.min() > 0.95 and bonds.max() < 1.05
    # mean/variance of the perturbation match (0, eps^2) within 3 SE
    pert = bonds - 1.0
    m = bonds.size
    assert abs(pert.mean()) <= 3 * 0.01 / np.sqrt(m)
    assert abs(pert.var() - 1e-4) <= 3 * 1e-4 * np.sqrt(2.0 / (m - 1))


def test_heisenberg_disorder_keeps_jz_equal_jx():
    base = uniform_chain(6, "heisenberg")
    spec = sample_disordered_chain(base, 0.3, 5)
    np.testing.assert_array_equal(spec.jx, spec.jz)
    assert spec.model_tag == "heisenberg"
    assert spec.seed == 5 and spec.epsilon == 0.3


def test_negative_epsilon_rejected():
    with pytest.raises(ValueError, match="epsilon"):
        sample_disordered_chain(uniform_chain(4, "xy"), -0.1, 1)


def test_disorder_requires_nearest_neighbor_chain():
    jx = np.zeros((4, 4))
    jx[0, 2] = jx[2, 0] = 1.0
    spec = ChainSpec(4, jx, np.zeros((4, 4)), model_tag="xy")
    with pytest.raises(ValueError, match="nearest-neighbor"):
        sample_disordered_chain(spec, 0.1, 1)


# ---------------------------------------------------------------------------
# Validation and serialization
# ---------------------------------------------------------------------------

def test_chain_spec_validation_errors():
    good = np.zeros((3, 3))
    asym = good.copy()
    asym[0, 1] = 1.0
    with pytest.raises(ValueError, match="symmetric"):
        ChainSpec(3, asym, good)
    diag = good.copy()
    diag[1, 1] = 2.0
    with pytest.raises(ValueError, match="zero diagonal"):
        ChainSpec(3, diag, good)
    with pytest.raises(ValueError, match="at least 2"):
        ChainSpec(1, np.zeros((1, 1)), np.zeros((1, 1)))
    with pytest.raises(ValueError, match="matrix"):
        ChainSpec(3, np.zeros((2, 2)), good)
    with pytest.raises(ValueError, match="jz == 0"):
        ChainSpec(2, np.array([[0.0, 1.0], [1.0, 0.0]]),
                  np.array([[0.0, 1.0], [1.0, 0.0]]), model_tag="xy")


def test_chain_dict_round_trip():
    rng = np.random.default_rng(3)
    jx, jz = bf.random_chain_arrays(rng, 5, "xyz")
    spec = ChainSpec(5, jx, jz, model_tag="xyz", seed=9, epsilon=0.05)
    back = chain_from_dict(chain_to_dict(spec))
    np.testing.assert_array_equal(spec.jx, back.jx)
    np.testing.assert_array_equal(spec.jz, back.jz)
    assert back.model_tag == "xyz" and back.seed == 9 and back.epsilon == 0.05


def test_chain_file_round_trip(tmp_path):
    spec = sample_disordered_chain(uniform_chain(7, "heisenberg"), 0.1, 13)
    path = tmp_path / "chain.json"
    save_chain(spec, path)
    loaded = load_chain(path)
    np.testing.assert_array_equal(spec.jx, loaded.jx)
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    assert set(d) == {"format", "n_spins", "model", "jx_bonds", "jz_bonds",
                      "seed", "epsilon"}


def test_chains_are_immutable():
    spec = uniform_chain(3, "xy")
    with pytest.raises(ValueError):
        spec.jx[0, 1] = 5.0
