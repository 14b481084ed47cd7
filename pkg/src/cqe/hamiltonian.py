"""Sparse operator construction on the truncated Fock (x) charge product basis.

Harmonic modes carry Fock levels 0..N-1; charge modes carry a symmetric
Cooper-pair window -K..K (odd truncation enforced).  Mode order is harmonic
modes first, then charge modes, and Kronecker factors follow that order with
the first mode outermost.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import eval_genlaguerre, gammaln

from .constants import E_CHARGE, HBAR, PHI0_BAR
from .errors import CircuitWarning
from .transform import ModePartition, TransformedCircuit

HERMITICITY_TOL = 1e-12


@dataclass
class ModeBasis:
    """Truncation numbers plus per-charge-mode gate offsets (units of 2e).

    ``charge_offsets`` is indexed by position within the charge block.
    """

    truncations: tuple
    charge_offsets: np.ndarray = field(default=None)

    @classmethod
    def for_partition(cls, partition: ModePartition, truncations,
                      charge_offsets=None) -> "ModeBasis":
        truncations = list(int(t) for t in truncations)
        if len(truncations) != partition.n_modes:
            raise ValueError(
                f"need {partition.n_modes} truncation numbers, got "
                f"{len(truncations)}")
        if any(t < 1 for t in truncations):
            raise ValueError("truncation numbers must be >= 1")
        for i in range(partition.n_harmonic, partition.n_modes):
            if truncations[i] % 2 == 0:
                warnings.warn(
                    f"charge mode {i + 1}: even truncation "
                    f"{truncations[i]} rounded up to {truncations[i] + 1} to "
                    f"keep the charge window symmetric",
                    CircuitWarning, stacklevel=2)
                truncations[i] += 1
        if charge_offsets is None:
            charge_offsets = np.zeros(partition.n_charge)
        return cls(tuple(truncations), np.asarray(charge_offsets, dtype=float))

    @property
    def dim(self) -> int:
        return int(np.prod(self.truncations))


# ---------------------------------------------------------------------------
# single-mode operators


def annihilation_op(n: int) -> sp.csr_matrix:
    """Truncated ladder operator a."""
    return sp.diags(np.sqrt(np.arange(1, n)), 1, format="csr",
                    dtype=complex)


def creation_op(n: int) -> sp.csr_matrix:
    return annihilation_op(n).conj().T.tocsr()


def number_op(n: int) -> sp.csr_matrix:
    return sp.diags(np.arange(n, dtype=float), 0, format="csr", dtype=complex)


def charge_numbers(n: int) -> np.ndarray:
    """Symmetric Cooper-pair window for an odd truncation n."""
    k = (n - 1) // 2
    return np.arange(-k, k + 1, dtype=float)


def charge_op(n: int, n_g: float = 0.0) -> sp.csr_matrix:
    """Island charge operator, diagonal 2e (n + n_g)."""
    return sp.diags(2.0 * E_CHARGE * (charge_numbers(n) + n_g), 0,
                    format="csr", dtype=complex)


def charge_raise_op(n: int) -> sp.csr_matrix:
    """Cooper-pair raising operator |n+1><n| (top state truncated)."""
    return sp.diags(np.ones(n - 1), -1, format="csr", dtype=complex)


def displacement_op(n: int, alpha: complex) -> sp.csr_matrix:
    """Bosonic displacement exp(alpha a^dag - alpha* a) on the truncated
    space, filled from the closed-form Fock matrix elements

        <m|D|n> = sqrt(n!/m!) alpha^(m-n) e^(-|alpha|^2/2) L_n^(m-n)(|alpha|^2)

    for m >= n (associated Laguerre L), and the conjugate-transpose relation
    below the diagonal.  Exact to roundoff; no matrix exponential involved.
    """
    if alpha == 0:
        return sp.identity(n, format="csr", dtype=complex)
    x = abs(alpha) ** 2
    lo = np.tril_indices(n)
    m_idx, n_idx = lo
    k = m_idx - n_idx
    logratio = 0.5 * (gammaln(n_idx + 1) - gammaln(m_idx + 1))
    lag = eval_genlaguerre(n_idx, k, x)
    lower = np.exp(logratio - 0.5 * x) * alpha**k * lag
    D = np.zeros((n, n), dtype=complex)
    D[lo] = lower
    # <m|D|n> for m < n from D(alpha)^dag = D(-alpha)
    upper = np.exp(logratio - 0.5 * x) * (-np.conj(alpha)) ** k * lag
    D.T[lo] = upper
    D[np.diag_indices(n)] = np.exp(-0.5 * x) * eval_genlaguerre(
        np.arange(n), 0, x)
    return sp.csr_matrix(D)


def lift(op: sp.spmatrix, mode: int, basis: ModeBasis) -> sp.csr_matrix:
    """Embed a single-mode operator into the product space (identity on the
    other modes)."""
    dims = basis.truncations
    if op.shape != (dims[mode], dims[mode]):
        raise ValueError(
            f"operator dimension {op.shape[0]} does not match truncation "
            f"{dims[mode]} of mode {mode + 1}")
    pre = int(np.prod(dims[:mode], initial=1))
    post = int(np.prod(dims[mode + 1:], initial=1))
    out = op
    if pre > 1:
        out = sp.kron(sp.identity(pre, dtype=complex), out, format="csr")
    if post > 1:
        out = sp.kron(out, sp.identity(post, dtype=complex), format="csr")
    return out.tocsr()


# ---------------------------------------------------------------------------
# junction exponentials


def junction_exponential(tc: TransformedCircuit, basis: ModeBasis,
                         branch: int, half: bool = False):
    """Kronecker product of the junction's displacement and charge-translation
    factors: exp(i (2pi/Phi0) w^T Phi_hat [/2]).

    With ``half=True`` (quasiparticle sin(phi/2) operator) charge translations
    move half a Cooper pair; odd powers leave the 2e charge lattice and the
    projection back onto it vanishes, so ``None`` is returned in that case.
    """
    p = tc.partition
    alphas = tc.alpha(branch)
    factor = None
    for m in range(p.n_harmonic):
        a = 1j * alphas[m]
        if half:
            a = a / 2.0
        fac = displacement_op(basis.truncations[m], a)
        factor = fac if factor is None else sp.kron(factor, fac, format="csr")
    for c in range(p.n_charge):
        mode = p.n_harmonic + c
        n = basis.truncations[mode]
        power = int(tc.w_charge[branch, c]) if tc.w_charge.size else 0
        if half:
            if power % 2:
                return None
            power //= 2
        d = charge_raise_op(n)
        if power == 0:
            fac = sp.identity(n, format="csr", dtype=complex)
        else:
            base = d if power > 0 else d.conj().T.tocsr()
            fac = base
            for _ in range(abs(power) - 1):
                fac = (fac @ base).tocsr()
        factor = fac if factor is None else sp.kron(factor, fac, format="csr")
    return factor.tocsr()


# ---------------------------------------------------------------------------
# Hamiltonian assembly


def harmonic_part(tc: TransformedCircuit, basis: ModeBasis) -> sp.csr_matrix:
    p = tc.partition
    H = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    for m in range(p.n_harmonic):
        H = H + HBAR * p.omega[m] * lift(number_op(basis.truncations[m]), m,
                                         basis)
    return H.tocsr()


def charge_part(tc: TransformedCircuit, basis: ModeBasis) -> sp.csr_matrix:
    """(1/2) sum_mn (C_ch^-1)_mn Q_m Q_n with Q_m = 2e (n_m + n_g,m)."""
    p = tc.partition
    H = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    if p.n_charge == 0:
        return H
    cinv_ch = tc.cinv_charge
    q_ops = [
        lift(charge_op(basis.truncations[p.n_harmonic + c],
                       basis.charge_offsets[c]), p.n_harmonic + c, basis)
        for c in range(p.n_charge)
    ]
    for a in range(p.n_charge):
        H = H + 0.5 * cinv_ch[a, a] * (q_ops[a] @ q_ops[a])
        for b in range(a + 1, p.n_charge):
            if cinv_ch[a, b] != 0.0:
                H = H + cinv_ch[a, b] * (q_ops[a] @ q_ops[b])
    return H.tocsr()


def inductor_flux_ops(tc: TransformedCircuit, basis: ModeBasis) -> dict:
    """Per linear inductor, the operator sum_m w_m sqrt(hbar Z_m/2)(a+a^dag)
    that multiplies the external-flux coefficient."""
    p = tc.partition
    ops = {}
    for br in tc.matrices.branches:
        if br.kind != "inductor":
            continue
        if not br.loops and tc.matrices.n_loops == 0:
            continue
        op = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
        for m in range(p.n_harmonic):
            w = tc.w_harmonic[br.index, m]
            if w == 0.0:
                continue
            n = basis.truncations[m]
            x = annihilation_op(n) + creation_op(n)
            op = op + w * np.sqrt(HBAR * p.impedance[m] / 2.0) * lift(x, m,
                                                                      basis)
        ops[br.index] = op.tocsr()
    return ops


def assemble_hamiltonian(tc: TransformedCircuit, basis: ModeBasis,
                         phases: np.ndarray,
                         static: sp.csr_matrix = None,
                         inductor_ops: dict = None,
                         junction_exps: dict = None) -> sp.csr_matrix:
    """Full circuit Hamiltonian (joule) at the given loop phases (radians).

    The flux-independent pieces can be passed in to avoid rebuilding them
    across a sweep: ``static`` (harmonic + charge parts), ``inductor_ops``
    (from :func:`inductor_flux_ops`) and ``junction_exps`` (branch ->
    exponential operator).
    """
    phases = np.asarray(phases, dtype=float)
    if phases.shape != (tc.matrices.n_loops,):
        raise ValueError(
            f"need {tc.matrices.n_loops} loop phases, got {phases.shape}")
    if static is None:
        static = (harmonic_part(tc, basis) + charge_part(tc, basis)).tocsr()
    if inductor_ops is None:
        inductor_ops = inductor_flux_ops(tc, basis)
    if junction_exps is None:
        junction_exps = {
            b.index: junction_exponential(tc, basis, b.index)
            for b in tc.matrices.branches if b.kind == "junction"
        }

    H = static.copy()
    B = tc.matrices.B
    for br in tc.matrices.branches:
        if br.kind == "inductor":
            if br.index not in inductor_ops:
                continue
            coef = PHI0_BAR * float(B[br.index] @ phases) / br.value
            if coef != 0.0:
                H = H + coef * inductor_ops[br.index]
        else:
            theta = float(B[br.index] @ phases)
            term = (br.value / 2.0) * np.exp(1j * theta) * junction_exps[br.index]
            H = H - (term + term.conj().T)

    H = H.tocsr()
    herm = abs(H - H.conj().T)
    hmax = np.abs(H.data).max() if H.nnz else 0.0
    if hmax and herm.nnz and herm.data.max() > HERMITICITY_TOL * hmax:
        raise RuntimeError("assembled Hamiltonian is not Hermitian")
    return H
