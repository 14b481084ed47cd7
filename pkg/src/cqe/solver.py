"""Eigenvalue extraction and parameter sweeps.

Uses Hermitian Lanczos (ARPACK) targeting the smallest algebraic eigenvalues,
with a dense fallback below :data:`DENSE_CUTOFF`.  Two extra eigenpairs are
requested internally to stabilize degenerate clusters.  The Lanczos start
vector is seeded, so repeated runs are bit-identical.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .constants import H_PLANCK
from .errors import SolverError

DENSE_CUTOFF = 512
RESIDUAL_TOL = 1e-8
_SEED = 0x5EED


@dataclass
class Spectrum:
    """Ascending eigenfrequencies (Hz, i.e. E/h) and unit-norm eigenvectors
    (columns), with the phase fixed so each vector's largest-magnitude
    component is real positive."""

    efreqs: np.ndarray
    evecs: np.ndarray

    @property
    def n_eig(self) -> int:
        return len(self.efreqs)


def _fix_phases(vecs: np.ndarray) -> np.ndarray:
    out = np.array(vecs, dtype=complex)
    for j in range(out.shape[1]):
        v = out[:, j]
        v /= np.linalg.norm(v)
        k = int(np.argmax(np.abs(v)))
        ph = v[k] / abs(v[k])
        out[:, j] = v * np.conj(ph)
    return out


def diag(H: sp.spmatrix, n_eig: int, dense_cutoff: int = DENSE_CUTOFF) -> Spectrum:
    """Lowest ``n_eig`` eigenpairs of a Hermitian sparse operator.

    Energies are returned in Hz (E/h).  Raises :class:`SolverError` on
    non-convergence, with the attained residuals attached.
    """
    dim = H.shape[0]
    if not 1 <= n_eig < dim:
        raise ValueError(f"need 1 <= n_eig < dim, got n_eig={n_eig}, "
                         f"dim={dim}")

    k = min(n_eig + 2, dim - 1)
    if dim <= dense_cutoff or k >= dim - 1:
        evals, evecs = np.linalg.eigh(H.toarray())
        evals, evecs = evals[:n_eig], evecs[:, :n_eig]
    else:
        rng = np.random.RandomState(_SEED)
        v0 = rng.randn(dim) + 1j * rng.randn(dim)
        v0 /= np.linalg.norm(v0)
        try:
            evals, evecs = spla.eigsh(H, k=k, which="SA", v0=v0)
        except spla.ArpackNoConvergence as exc:
            got = len(exc.eigenvalues)
            raise SolverError(
                f"eigensolver did not converge ({got}/{k} pairs after "
                f"maxiter)", residuals=exc) from exc
        order = np.argsort(evals)
        evals, evecs = evals[order][:n_eig], evecs[:, order][:, :n_eig]

    evecs = _fix_phases(evecs)
    hnorm = spla.norm(H) if sp.issparse(H) else np.linalg.norm(H)
    resid = np.array([np.linalg.norm(H @ evecs[:, j] - evals[j] * evecs[:, j])
                      for j in range(n_eig)])
    if hnorm > 0 and np.any(resid > RESIDUAL_TOL * hnorm):
        raise SolverError(
            f"eigenpair residual {resid.max():.2e} exceeds "
            f"{RESIDUAL_TOL:.0e} * |H|", residuals=resid)
    return Spectrum(efreqs=np.asarray(evals, dtype=float) / H_PLANCK,
                    evecs=evecs)


def sweep(circuit, handle, values, n_eig: int, threads: int = 1) -> np.ndarray:
    """Eigenfrequencies versus a swept parameter; column j is the spectrum at
    ``values[j]``.

    ``handle`` selects the parameter:

    * ``("flux", loop_id)`` — external flux of a loop, in units of Phi0.
      Reuses the circuit's transformation and operator caches; only the
      flux-dependent terms are rebuilt per point.
    * ``("ng", mode)`` — gate offset of a charge mode (1-based mode index).
    * ``("element", (edge, index))`` — value of one element, in its declared
      unit; the full pipeline is re-run per point.

    Points run serially for ``threads == 1`` (bit-reproducible) or on a
    thread pool otherwise.
    """
    kind, target = handle
    values = list(values)

    if kind == "flux":
        li = circuit.spec.loop_index(target)
        base = circuit.phases()

        def solve(j):
            phases = base.copy()
            phi = 2.0 * np.pi * values[j]
            if circuit.spec.flux_dist == "junctions":
                phi = np.mod(phi, 2.0 * np.pi)
            phases[li] = phi
            return diag(circuit.hamiltonian(phases=phases), n_eig).efreqs

    elif kind == "ng":
        pos = circuit.charge_mode_position(target)

        def solve(j):
            ng = circuit.basis.charge_offsets.copy()
            ng[pos] = values[j]
            return diag(circuit.hamiltonian(charge_offsets=ng), n_eig).efreqs

    elif kind == "element":
        edge, idx = target

        def solve(j):
            return diag(
                circuit.with_element_value(edge, idx, values[j]).hamiltonian(),
                n_eig).efreqs

    else:
        raise ValueError(f"unknown sweep handle kind '{kind}'")

    done = {}
    try:
        if threads <= 1:
            for j in range(len(values)):
                done[j] = _solve_point(solve, j)
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                futures = {pool.submit(_solve_point, solve, j): j
                           for j in range(len(values))}
                for fut, j in futures.items():
                    done[j] = fut.result()
    except SolverError as exc:
        # completed columns ride along so callers can flush partial output
        exc.partial = done
        raise

    out = np.zeros((n_eig, len(values)))
    for j, col in done.items():
        out[:, j] = col
    return out


def _solve_point(solve, j):
    try:
        return solve(j)
    except SolverError as exc:
        exc.sweep_index = j
        raise


@dataclass
class ConvergenceReport:
    """Per-level relative changes across a truncation schedule."""

    schedule: list
    efreqs: np.ndarray        # (len(schedule), n_eig)
    rel_change: np.ndarray    # (len(schedule) - 1, n_eig)
    converged: np.ndarray     # per level, final step change <= tol
    tol: float


def convergence_probe(circuit, n_eig: int, schedule,
                      tol: float = 1e-6) -> ConvergenceReport:
    """Re-diagonalize at increasing truncations and report per-level relative
    changes; levels whose final change exceeds ``tol`` are flagged."""
    schedule = [list(t) for t in schedule]
    freqs = []
    for truncs in schedule:
        circuit.set_trunc_nums(truncs)
        freqs.append(circuit.diag(n_eig).efreqs)
    freqs = np.array(freqs)
    scale = np.maximum(np.abs(freqs[1:]), np.abs(freqs[:-1]))
    scale[scale == 0] = 1.0
    rel = np.abs(np.diff(freqs, axis=0)) / scale
    converged = rel[-1] <= tol if len(schedule) > 1 else np.ones(n_eig, bool)
    return ConvergenceReport(schedule=schedule, efreqs=freqs, rel_change=rel,
                             converged=converged, tol=tol)
