"""Phase-coordinate representation of eigenvectors.

Harmonic-mode factors are Hermite-Gaussian functions of the node phase with
oscillator length x0 = sqrt(hbar Z); charge-mode factors are plane waves
exp(i n phi)/sqrt(2 pi).  Each mode's factor table is evaluated once on its
grid and contracted against the coefficient tensor, and the Hermite functions
are generated with the Gaussian weight folded into the recurrence so large
level numbers do not overflow.

A factor sqrt(Phi0/2pi) per harmonic mode converts the flux-density
normalization of the Hermite-Gaussians into a density over phase, so
|psi|^2 integrates to one over the phase grid.
"""

from __future__ import annotations

import math

import numpy as np

from .constants import HBAR, PHI0_BAR
from .hamiltonian import ModeBasis, charge_numbers
from .transform import ModePartition


def hermite_function(n: int, x) -> np.ndarray:
    """Orthonormal Hermite function psi_n(x) = H_n(x) e^{-x^2/2} /
    sqrt(2^n n! sqrt(pi)), evaluated by the weighted three-term recurrence

        psi_{k+1} = sqrt(2/(k+1)) x psi_k - sqrt(k/(k+1)) psi_{k-1}

    which stays finite where the raw polynomials would overflow.
    """
    x = np.asarray(x, dtype=float)
    psi_prev = np.pi ** -0.25 * np.exp(-0.5 * x**2)
    if n == 0:
        return psi_prev
    psi = math.sqrt(2.0) * x * psi_prev
    for k in range(1, n):
        psi, psi_prev = (math.sqrt(2.0 / (k + 1)) * x * psi
                         - math.sqrt(k / (k + 1.0)) * psi_prev), psi
    return psi


def hermite_table(nmax: int, x) -> np.ndarray:
    """psi_0..psi_{nmax-1} stacked, shape (nmax, len(x))."""
    x = np.asarray(x, dtype=float)
    out = np.empty((nmax, x.size))
    out[0] = np.pi ** -0.25 * np.exp(-0.5 * x**2)
    if nmax > 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for k in range(1, nmax - 1):
        out[k + 1] = (math.sqrt(2.0 / (k + 1)) * x * out[k]
                      - math.sqrt(k / (k + 1.0)) * out[k - 1])
    return out


def _normalize_grid(grid, n_modes: int):
    if len(grid) != n_modes:
        raise ValueError(f"grid must give one entry per mode "
                         f"({n_modes}), got {len(grid)}")
    axes = []
    scalars = []
    for g in grid:
        arr = np.atleast_1d(np.asarray(g, dtype=float))
        if arr.ndim != 1:
            raise ValueError("each grid entry must be a scalar or 1-D array")
        if not np.all(np.isfinite(arr)):
            raise ValueError("grid values must be finite")
        axes.append(arr)
        scalars.append(np.ndim(g) == 0)
    return axes, scalars


def eig_phase_coord(evec: np.ndarray, basis: ModeBasis,
                    partition: ModePartition, grid) -> np.ndarray:
    """<phi_1...phi_n | psi> on the product grid.

    ``grid`` holds one scalar or 1-D array of phases (radians) per mode, in
    mode order.  The result axes follow mode order with scalar axes squeezed
    out; evaluation is linear in the eigenvector.
    """
    axes, scalars = _normalize_grid(grid, partition.n_modes)
    dims = basis.truncations
    if evec.shape != (int(np.prod(dims)),):
        raise ValueError("eigenvector length does not match the basis")

    tables = []
    for m in range(partition.n_modes):
        phi = axes[m]
        n = dims[m]
        if m < partition.n_harmonic:
            x0 = math.sqrt(HBAR * partition.impedance[m])
            y = PHI0_BAR * phi / x0
            tables.append(hermite_table(n, y).astype(complex)
                          * math.sqrt(PHI0_BAR / x0))
        else:
            ns = charge_numbers(n)
            tables.append(np.exp(1j * np.outer(ns, phi))
                          / math.sqrt(2.0 * math.pi))

    out = np.asarray(evec, dtype=complex).reshape(dims)
    for table in tables:
        out = np.tensordot(out, table, axes=([0], [0]))
    keep = tuple(i for i, s in enumerate(scalars) if not s)
    out = out.reshape(tuple(axes[i].size for i in keep))
    return out
