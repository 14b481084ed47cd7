"""Capacitive and inductive coupling operators and transition matrix elements.

A weak drive applied across nodes (i, j) couples through
e_ij^T C^-1 R Q_hat (capacitive) or (1/l_ij) e_ij^T S Phi_hat (inductive,
through an existing inductor on that edge).  Drive amplitudes (c_d V_d,
M I_d) are not included; they only scale the returned operators.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .constants import E_CHARGE, HBAR
from .hamiltonian import (ModeBasis, annihilation_op, charge_numbers,
                          creation_op, lift)
from .solver import Spectrum
from .transform import TransformedCircuit


def node_pair_vector(n_nodes: int, nodes) -> np.ndarray:
    """e_ij with +1 at i and -1 at j; ground entries are dropped."""
    i, j = nodes
    if i == j:
        raise ValueError("coupling nodes must differ")
    for k in (i, j):
        if not 0 <= k <= n_nodes:
            raise ValueError(f"node {k} out of range 0..{n_nodes}")
    e = np.zeros(n_nodes)
    if i != 0:
        e[i - 1] = 1.0
    if j != 0:
        e[j - 1] = -1.0
    return e


def charge_operator_full(tc: TransformedCircuit, basis: ModeBasis,
                         mode: int) -> sp.csr_matrix:
    """Transformed charge operator of one mode, lifted to the product space."""
    p = tc.partition
    n = basis.truncations[mode]
    if mode < p.n_harmonic:
        coef = 1j * np.sqrt(HBAR / (2.0 * p.impedance[mode]))
        op = coef * (creation_op(n) - annihilation_op(n))
    else:
        ng = basis.charge_offsets[mode - p.n_harmonic]
        op = sp.diags(2.0 * E_CHARGE * (charge_numbers(n) + ng), 0,
                      dtype=complex, format="csr")
    return lift(op, mode, basis)


def flux_operator_full(tc: TransformedCircuit, basis: ModeBasis,
                       mode: int) -> sp.csr_matrix:
    """Transformed flux operator of a harmonic mode, lifted."""
    p = tc.partition
    if mode >= p.n_harmonic:
        raise ValueError("flux operator is only defined on harmonic modes")
    n = basis.truncations[mode]
    op = np.sqrt(HBAR * p.impedance[mode] / 2.0) * (creation_op(n)
                                                    + annihilation_op(n))
    return lift(op, mode, basis)


def _edge_inductance(tc: TransformedCircuit, nodes) -> float:
    edge = (min(nodes), max(nodes))
    invl = 0.0
    for b in tc.matrices.branches:
        if b.kind != "inductor":
            continue
        bn = b.nodes if 0 in b.nodes else tuple(sorted(b.nodes))
        if tuple(sorted(bn)) == edge:
            invl += 1.0 / b.value
    if invl == 0.0:
        raise ValueError(f"no inductor on edge {edge}; inductive coupling "
                         f"needs one")
    return 1.0 / invl


def coupling_op(tc: TransformedCircuit, basis: ModeBasis, kind: str,
                nodes) -> sp.csr_matrix:
    """Hermitian coupling operator on the truncated product space."""
    n_nodes = tc.matrices.n_nodes
    e = node_pair_vector(n_nodes, nodes)
    p = tc.partition

    if kind == "capacitive":
        vec = np.linalg.solve(tc.matrices.C, e) @ tc.transformation.R
        op = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
        for m in range(p.n_modes):
            if vec[m] != 0.0:
                op = op + vec[m] * charge_operator_full(tc, basis, m)
        return op.tocsr()

    if kind == "inductive":
        l_ij = _edge_inductance(tc, nodes)
        vec = (e @ tc.transformation.S) / l_ij
        # charge-mode components vanish identically for edges carrying an
        # inductor (the charge block is the null space of L*)
        resid = np.abs(vec[p.n_harmonic:]).max() if p.n_charge else 0.0
        scale = np.abs(vec).max()
        if scale and resid > 1e-9 * scale:
            raise RuntimeError("inductive coupling leaked into the charge "
                               "block")
        op = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
        for m in range(p.n_harmonic):
            if vec[m] != 0.0:
                op = op + vec[m] * flux_operator_full(tc, basis, m)
        return op.tocsr()

    raise ValueError(f"coupling kind must be 'capacitive' or 'inductive', "
                     f"got '{kind}'")


def matrix_element(op: sp.spmatrix, spectrum: Spectrum, states) -> complex:
    """<m|O|n> between two solved eigenstates (solver phase convention)."""
    m, n = states
    if max(m, n) >= spectrum.n_eig:
        raise ValueError(f"states {states} exceed the {spectrum.n_eig} "
                         f"solved eigenpairs")
    return complex(np.vdot(spectrum.evecs[:, m], op @ spectrum.evecs[:, n]))
