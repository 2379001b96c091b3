"""Independent full-Hilbert-space reference implementation for the tests.

Builds the 2^N x 2^N chain Hamiltonian by explicit tensor products and
propagates states by dense eigendecomposition.  Used as the oracle against
which the N-dimensional single-excitation implementation is checked; nothing
here shares code with the package's propagation path.
"""

import numpy as np

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
ID2 = np.eye(2, dtype=complex)


def site_operator(pauli, site, n):
    """Pauli at 1-based ``site`` of an n-spin register, identity elsewhere."""
    ops = [ID2] * n
    ops[site - 1] = pauli
    out = ops[0]
    for op in ops[1:]:
        out = np.kron(out, op)
    return out


def two_site(pauli_a, site_a, pauli_b, site_b, n):
    ops = [ID2] * n
    ops[site_a - 1] = pauli_a
    ops[site_b - 1] = pauli_b
    out = ops[0]
    for op in ops[1:]:
        out = np.kron(out, op)
    return out


def full_hamiltonian(jx, jz):
    """H = 1/2 sum_{m<l} [Jx (XX + YY) + Jz ZZ], the package's convention."""
    n = jx.shape[0]
    dim = 2 ** n
    h = np.zeros((dim, dim), dtype=complex)
    for a in range(n):
        for b in range(a + 1, n):
            if jx[a, b] != 0.0:
                h += 0.5 * jx[a, b] * (
                    two_site(PAULI_X, a + 1, PAULI_X, b + 1, n)
                    + two_site(PAULI_Y, a + 1, PAULI_Y, b + 1, n))
            if jz[a, b] != 0.0:
                h += 0.5 * jz[a, b] * two_site(PAULI_Z, a + 1, PAULI_Z, b + 1, n)
    return h


def total_sz(n):
    dim = 2 ** n
    s = np.zeros((dim, dim), dtype=complex)
    for site in range(1, n + 1):
        s += site_operator(PAULI_Z, site, n)
    return s


def excitation_index(site, n):
    """Full-space index of |site>: spin up at ``site``, down elsewhere."""
    return 2 ** n - 1 - 2 ** (n - site)


def project_single_excitation(h_full, n):
    """N x N matrix <m| H |l> over the single-excitation basis."""
    idx = [excitation_index(s, n) for s in range(1, n + 1)]
    return h_full[np.ix_(idx, idx)]


def full_space_fidelity(jx_off, jz_off, jx_on, jz_on, durations, ham_indices,
                        source, target):
    """Transfer fidelity by brute-force propagation of the 2^N-dim state.

    ``durations`` and ``ham_indices`` (0 = actuator off, 1 = actuator on) are
    given in chronological order.
    """
    n = jx_off.shape[0]
    hs = [full_hamiltonian(jx_off, jz_off), full_hamiltonian(jx_on, jz_on)]
    eigs = [np.linalg.eigh(h) for h in hs]
    psi = np.zeros(2 ** n, dtype=complex)
    psi[excitation_index(source, n)] = 1.0
    for dur, m in zip(durations, ham_indices):
        w, v = eigs[m]
        psi = v @ (np.exp(-1j * dur * w) * (v.conj().T @ psi))
    return abs(psi[excitation_index(target, n)]) ** 2


def random_chain_arrays(rng, n, model):
    """Random symmetric zero-diagonal coupling matrices for a given model."""
    a = rng.uniform(-1.0, 1.0, size=(n, n))
    jx = np.triu(a, 1)
    jx = jx + jx.T
    if model == "xy":
        jz = np.zeros_like(jx)
    elif model == "heisenberg":
        jz = jx.copy()
    else:
        b = rng.uniform(-1.0, 1.0, size=(n, n))
        jz = np.triu(b, 1)
        jz = jz + jz.T
    return jx, jz
