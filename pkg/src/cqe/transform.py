"""Canonical coordinate transformation into harmonic and charge blocks.

Step one simultaneously block-diagonalizes the capacitance and susceptance
matrices through an SVD of sqrt(L*) sqrt(C)^-1, separating oscillator-like
(harmonic) coordinates from free-particle-like (charge) coordinates.  Step
two rescales the charge block so that junction tunneling translates island
charge by exactly one Cooper pair, making the junction charge prefactors
integers.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .constants import HBAR, PHI0_BAR
from .errors import CircuitWarning, TransformError
from .topology import CircuitMatrices

# singular values below this fraction of the largest are treated as zero
# (charge modes)
SINGULAR_THRESHOLD = 1e-11

# maximum acceptable condition number for the capacitance matrix
CAP_CONDITION_LIMIT = 1e12

# canonicality bound on |S^T R - I|
CANONICAL_TOL = 1e-9

# rank tolerance for picking linearly independent junction charge vectors
PIVOT_RANK_TOL = 1e-9

# junction cosine prefactors with zero-point phase below this are clipped to
# exactly zero (decoupled-mode cleanup; physical couplings are >> 1e-12)
ALPHA_CLIP = 1e-12


@dataclass(frozen=True)
class ModePartition:
    """Harmonic/charge split after the first transformation.

    ``omega`` (rad/s) and ``impedance`` are per harmonic mode; the impedance
    is expressed in the internal coordinate scaling (D_c = I), in which only
    the combinations entering zero-point amplitudes are physical.  Harmonic
    modes come first, ordered by descending frequency; charge modes follow.
    """

    n_harmonic: int
    n_charge: int
    omega: np.ndarray
    impedance: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.n_harmonic + self.n_charge

    def is_charge(self, mode: int) -> bool:
        return mode >= self.n_harmonic


@dataclass(frozen=True)
class Transformation:
    """Flux/charge coordinate change, S for fluxes and R for charges, with
    the two factors it was built from."""

    S: np.ndarray
    R: np.ndarray
    S1: np.ndarray
    R1: np.ndarray
    S2: np.ndarray
    R2: np.ndarray


@dataclass(frozen=True)
class TransformedCircuit:
    """Everything the Hamiltonian assembly needs, in transformed coordinates."""

    matrices: CircuitMatrices = field(repr=False)
    partition: ModePartition
    transformation: Transformation = field(repr=False)
    cinv: np.ndarray             # R^T C^-1 R
    lstar: np.ndarray            # S^T L* S
    w_harmonic: np.ndarray       # (n_B, n_H) harmonic-block prefactors
    w_charge: np.ndarray         # (n_B, n_C) integer charge-block prefactors
    pivot_branches: tuple        # junction branch indices defining the charge frame
    frozen_modes: tuple          # charge modes with no junction coupling

    @property
    def cinv_charge(self) -> np.ndarray:
        nh = self.partition.n_harmonic
        return self.cinv[nh:, nh:]

    def alpha(self, branch: int) -> np.ndarray:
        """Signed zero-point phase prefactors of one branch over the harmonic
        modes: (2pi/Phi0) w_m sqrt(hbar Z_m / 2)."""
        p = self.partition
        return (self.w_harmonic[branch]
                * np.sqrt(HBAR * p.impedance / 2.0) / PHI0_BAR)


def _psd_sqrt_and_inv(M: np.ndarray, require_pd: bool, name: str):
    evals, Q = np.linalg.eigh(M)
    if require_pd:
        if evals[0] <= 0 or evals[-1] / evals[0] > CAP_CONDITION_LIMIT:
            raise TransformError(
                f"{name} matrix is singular or ill-conditioned "
                f"(eigenvalues {evals[0]:.3e} .. {evals[-1]:.3e}); every node "
                f"needs a capacitive path to ground")
        root = (Q * np.sqrt(evals)) @ Q.T
        inv_root = (Q / np.sqrt(evals)) @ Q.T
        return root, inv_root
    evals = np.clip(evals, 0.0, None)
    return (Q * np.sqrt(evals)) @ Q.T, None


def first_transformation(C: np.ndarray, Lstar: np.ndarray, dc=None,
                         sigma_threshold: float = SINGULAR_THRESHOLD):
    """First canonical factor: normal-mode split of the quadratic problem.

    Returns ``(S1, R1, partition, C1, Lstar1)``.  The free diagonal scaling
    defaults to normalizing the columns of S1, which balances the SI scale
    disparity between flux and charge directions and keeps the canonicality
    residual at the roundoff floor; ``dc`` multiplies that default.  Physical
    observables are invariant under it.
    """
    n = C.shape[0]
    sqC, sqCi = _psd_sqrt_and_inv(C, True, "capacitance")
    sqL, _ = _psd_sqrt_and_inv(Lstar, False, "susceptance")

    V, sigma, Uh = np.linalg.svd(sqL @ sqCi)   # descending, zeros last
    U = Uh.T

    smax = sigma.max(initial=0.0)
    if smax == 0.0:
        n_charge = n
    else:
        n_charge = int(np.count_nonzero(sigma < sigma_threshold * smax))
    n_harmonic = n - n_charge

    base = sqCi @ U
    dcv = 1.0 / np.linalg.norm(base, axis=0)
    if dc is not None:
        dc = np.asarray(dc, dtype=float)
        if dc.shape != (n,) or np.any(dc <= 0):
            raise TransformError("dc must be a positive diagonal of length n")
        dcv = dcv * dc

    S1 = base * dcv
    R1 = sqC @ U / dcv

    C1 = np.diag(dcv**2)
    lvals = np.where(np.arange(n) < n_harmonic, sigma, 0.0)
    Lstar1 = np.diag(dcv**2 * lvals**2)

    omega = sigma[:n_harmonic].copy()
    impedance = 1.0 / (dcv[:n_harmonic] ** 2 * omega) if n_harmonic else \
        np.zeros(0)
    part = ModePartition(n_harmonic, n_charge, omega, impedance)
    return S1, R1, part, C1, Lstar1


def second_transformation(partition: ModePartition, w_tilde1: np.ndarray,
                          junction_rows) -> tuple:
    """Second canonical factor acting on the charge block only.

    ``w_tilde1`` holds the branch prefactor rows after the first
    transformation; ``junction_rows`` the branch indices that are junctions.
    Picks a maximal linearly independent set of junction charge vectors
    (greedy in branch order) and maps them to the standard basis, so charge
    translations are quantized in Cooper pairs.  Charge directions no
    junction reaches are frozen islands: they are kept in the basis,
    completed orthogonally, and reported.
    """
    n = partition.n_modes
    nh, nc = partition.n_harmonic, partition.n_charge
    S2 = np.eye(n)
    if nc == 0:
        return S2, np.eye(n), (), ()

    rows = []
    pivots = []
    for k in junction_rows:
        cand = w_tilde1[k, nh:]
        norm = np.linalg.norm(cand)
        if norm == 0:
            continue
        resid = cand.copy()
        for r in rows:
            resid -= (r @ resid) * r
        if np.linalg.norm(resid) > PIVOT_RANK_TOL * norm:
            rows.append(resid / np.linalg.norm(resid))
            pivots.append(k)
        if len(pivots) == nc:
            break

    frozen = tuple(range(nh + len(pivots), nh + nc))
    P = np.zeros((nc, nc))
    for i, k in enumerate(pivots):
        P[i] = w_tilde1[k, nh:]
    if frozen:
        warnings.warn(
            f"{nc - len(pivots)} charge mode(s) have no junction coupling "
            f"(isolated island); their charge is frozen",
            CircuitWarning, stacklevel=2)
        # complete with an orthonormal basis of the unreached subspace
        basis = np.linalg.svd(P[:len(pivots)])[2][len(pivots):] \
            if pivots else np.eye(nc)
        for i, row in enumerate(basis[:nc - len(pivots)]):
            P[len(pivots) + i] = row

    S2ch = np.linalg.inv(P)
    S2[nh:, nh:] = S2ch
    R2 = np.eye(n)
    R2[nh:, nh:] = np.linalg.inv(S2ch.T)
    return S2, R2, tuple(pivots), frozen


def transform_circuit(matrices: CircuitMatrices, dc=None) -> TransformedCircuit:
    """Run both transformation steps and verify the resulting block structure."""
    C, Lstar = matrices.C, matrices.Lstar
    S1, R1, part, _, _ = first_transformation(C, Lstar, dc=dc)

    has_junction = any(b.kind == "junction" for b in matrices.branches)
    if part.n_harmonic == 0 and not has_junction:
        raise TransformError("circuit has no dynamics: no inductors and no "
                             "junctions")

    w_tilde1 = matrices.W @ S1
    junction_rows = [b.index for b in matrices.branches if b.kind == "junction"]
    S2, R2, pivots, frozen = second_transformation(part, w_tilde1,
                                                   junction_rows)

    S = S1 @ S2
    R = R1 @ R2
    canon = np.abs(S.T @ R - np.eye(C.shape[0])).max()
    if canon > CANONICAL_TOL:
        raise TransformError(f"transformation is not canonical "
                             f"(|S^T R - I| = {canon:.2e})")

    cinv = R.T @ np.linalg.solve(C, R)
    cinv = 0.5 * (cinv + cinv.T)
    lstar = S.T @ Lstar @ S
    lstar = 0.5 * (lstar + lstar.T)
    w_tilde = matrices.W @ S

    nh = part.n_harmonic
    _verify_blocks(cinv, lstar, part)

    # harmonic prefactors, with numerically-dead couplings clipped to zero
    w_h = w_tilde[:, :nh].copy()
    if nh:
        zp = np.sqrt(HBAR * part.impedance / 2.0) / PHI0_BAR
        w_h[np.abs(w_h) * zp < ALPHA_CLIP] = 0.0

    # charge prefactors must be integers by construction
    w_c_raw = w_tilde[:, nh:]
    w_c = np.rint(w_c_raw)
    for k in junction_rows:
        if np.any(np.abs(w_c_raw[k] - w_c[k]) > 1e-6):
            raise TransformError(
                f"junction {k} charge prefactors {w_c_raw[k]} did not land "
                f"on integers")
    for b in matrices.branches:
        if b.kind == "inductor" and w_c_raw.shape[1] and \
                np.any(np.abs(w_c_raw[b.index]) > 1e-6):
            raise TransformError(
                f"inductor branch {b.index} leaks into the charge block")
    w_c = w_c.astype(int)
    for b in matrices.branches:
        if b.kind == "inductor" and w_c.shape[1]:
            w_c[b.index] = 0

    tr = Transformation(S=S, R=R, S1=S1, R1=R1, S2=S2, R2=R2)
    return TransformedCircuit(
        matrices=matrices, partition=part, transformation=tr, cinv=cinv,
        lstar=lstar, w_harmonic=w_h, w_charge=w_c,
        pivot_branches=pivots, frozen_modes=frozen)


def _verify_blocks(cinv: np.ndarray, lstar: np.ndarray,
                   part: ModePartition) -> None:
    nh = part.n_harmonic
    n = part.n_modes
    tol_c = 1e-9 * max(np.abs(cinv).max(), 1e-300)
    tol_l = 1e-9 * max(np.abs(lstar).max(), 1e-300)

    off_c = np.abs(cinv[:nh, nh:]).max() if nh and nh < n else 0.0
    offdiag_ha = np.abs(cinv[:nh, :nh] - np.diag(np.diag(cinv[:nh, :nh]))).max() \
        if nh else 0.0
    lower = np.abs(lstar[nh:, :]).max() if nh < n else 0.0
    offdiag_l = np.abs(lstar[:nh, :nh] - np.diag(np.diag(lstar[:nh, :nh]))).max() \
        if nh else 0.0
    if off_c > tol_c or offdiag_ha > tol_c or lower > tol_l or offdiag_l > tol_l:
        raise TransformError(
            "transformed matrices are not block diagonal "
            f"(residuals {off_c:.2e}, {offdiag_ha:.2e}, {lower:.2e}, "
            f"{offdiag_l:.2e})")
    if nh and (np.any(np.diag(cinv[:nh, :nh]) <= 0)
               or np.any(np.diag(lstar[:nh, :nh]) <= 0)):
        raise TransformError("harmonic block is not positive definite")
    if nh < n:
        ch = cinv[nh:, nh:]
        if np.any(np.linalg.eigvalsh(0.5 * (ch + ch.T)) <= 0):
            raise TransformError("charge block of C^-1 is not positive "
                                 "definite")


@dataclass(frozen=True)
class JunctionTerm:
    """Per-junction data entering the Hamiltonian cosine."""

    branch: int
    ej: float                # joule
    alpha: np.ndarray        # signed harmonic prefactors (zero-point phases)
    charge_powers: np.ndarray
    b: np.ndarray            # loop flux weights


def junction_cosine_prefactors(tc: TransformedCircuit) -> list:
    """Scaling-invariant junction prefactors: per junction, the zero-point
    phase on each harmonic mode and the integer charge-translation powers."""
    out = []
    for b in tc.matrices.branches:
        if b.kind != "junction":
            continue
        out.append(JunctionTerm(
            branch=b.index,
            ej=b.value,
            alpha=tc.alpha(b.index),
            charge_powers=tc.w_charge[b.index].copy()
            if tc.w_charge.size else np.zeros(0, dtype=int),
            b=tc.matrices.B[b.index].copy()))
    return out


def mode_display_scales(tc: TransformedCircuit) -> np.ndarray:
    """Per harmonic mode, the |w| of the branch used to normalize that mode
    in reports: the junction with the largest zero-point phase when one
    couples, otherwise the strongest linear inductor, otherwise 1.

    With this normalization the reported phi_zp of a mode times the reported
    integer-ish branch coefficients reproduces every branch's physical
    zero-point phase.
    """
    p = tc.partition
    scales = np.ones(p.n_harmonic)
    branches = tc.matrices.branches
    for m in range(p.n_harmonic):
        col = np.abs(tc.w_harmonic[:, m])
        jrows = [b.index for b in branches if b.kind == "junction"]
        lrows = [b.index for b in branches if b.kind == "inductor"]
        for rows in (jrows, lrows):
            if rows and col[rows].max() > 0:
                scales[m] = col[rows].max()
                break
    return scales


def mode_zero_point_phases(tc: TransformedCircuit) -> np.ndarray:
    """Reported phi_zp per harmonic mode (see :func:`mode_display_scales`)."""
    p = tc.partition
    if p.n_harmonic == 0:
        return np.zeros(0)
    return (mode_display_scales(tc)
            * np.sqrt(HBAR * p.impedance / 2.0) / PHI0_BAR)
