"""Top-level circuit object tying the pipeline together.

``Circuit`` validates a spec, builds the topology matrices and the canonical
transformation once, and then assembles Hamiltonians on demand.  Operator
pieces that do not depend on external flux are cached per truncation setting,
so flux sweeps only rebuild phase factors.
"""

from __future__ import annotations

import copy
import warnings

import numpy as np

from . import noise as _noise
from . import solver as _solver
from .constants import E_CHARGE, H_PLANCK
from .coupling import coupling_op as _coupling_op
from .coupling import matrix_element as _matrix_element
from .errors import ValidationError
from .hamiltonian import (ModeBasis, assemble_hamiltonian, charge_part,
                          harmonic_part, inductor_flux_ops,
                          junction_exponential)
from .netlist import CircuitSpec, from_si, validate
from .topology import build_matrices, external_phases
from .transform import (junction_cosine_prefactors, mode_display_scales,
                        mode_zero_point_phases, transform_circuit)
from .wavefunction import eig_phase_coord as _eig_phase_coord

_GHZ = 1e9


class Circuit:
    """A quantized superconducting circuit.

    Parameters
    ----------
    spec:
        Parsed netlist (see :func:`cqe.netlist.parse_netlist`).
    branch_order:
        ``"default"`` or ``"reversed"``; selects the deterministic order in
        which inductive branches feed the spanning tree.  Spectra are
        independent of this choice for stationary fluxes.
    dc:
        Optional positive diagonal for the first transformation's free
        scaling; physical results are invariant under it.
    """

    def __init__(self, spec: CircuitSpec, branch_order: str = "default",
                 dc=None):
        diags = validate(spec)
        errors = [d for d in diags if d.severity == "error"]
        if errors:
            raise ValidationError(diags)
        for d in diags:
            warnings.warn(d.message, stacklevel=2)

        self.spec = spec
        self.matrices = build_matrices(spec, branch_order)
        self.tc = transform_circuit(self.matrices, dc=dc)
        self.basis: ModeBasis = None
        self.spectrum = None
        self._cache = None

    # ------------------------------------------------------------------
    # configuration

    @property
    def partition(self):
        return self.tc.partition

    @property
    def n_modes(self) -> int:
        return self.partition.n_modes

    def charge_mode_position(self, mode: int) -> int:
        """Position within the charge block of a 1-based global mode index."""
        nh = self.partition.n_harmonic
        if not nh < mode <= self.n_modes:
            raise ValueError(f"mode {mode} is not a charge mode "
                             f"(charge modes are {nh + 1}..{self.n_modes})")
        return mode - nh - 1

    def set_trunc_nums(self, truncations) -> None:
        offsets = np.zeros(self.partition.n_charge)
        for mode, ng in self.spec.charge_offsets.items():
            offsets[self.charge_mode_position(mode)] = ng
        self.basis = ModeBasis.for_partition(self.partition, truncations,
                                             offsets)
        self._cache = None
        self.spectrum = None

    def set_charge_offset(self, mode: int, ng: float) -> None:
        """Gate offset n_g (units of 2e) of a charge mode, 1-based mode index
        as printed by :meth:`description`."""
        pos = self.charge_mode_position(mode)
        self.spec.charge_offsets[mode] = float(ng)
        if self.basis is not None:
            self.basis.charge_offsets[pos] = float(ng)
            if self._cache is not None:
                self._cache.pop("charge", None)
        self.spectrum = None

    def set_flux(self, loop_id: str, value: float) -> None:
        """External flux of a loop, in units of Phi0."""
        self.spec.set_flux(loop_id, value)
        self.spectrum = None

    def phases(self) -> np.ndarray:
        return external_phases(self.spec)

    def with_element_value(self, edge, index: int, magnitude: float) -> "Circuit":
        """New circuit with one element's value replaced (same unit); the
        whole pipeline is re-run."""
        spec = copy.deepcopy(self.spec)
        edge = (min(edge), max(edge))
        elem = spec.edges[edge][index]
        field = "josephson_energy" if elem.kind == "junction" else "value"
        old = getattr(elem, field)
        setattr(elem, field, type(old)(magnitude, old.unit))
        other = Circuit(spec)
        if self.basis is not None:
            other.set_trunc_nums(self.basis.truncations)
        return other

    # ------------------------------------------------------------------
    # Hamiltonian assembly

    def _ops(self):
        if self.basis is None:
            raise RuntimeError("set truncation numbers first "
                               "(set_trunc_nums)")
        if self._cache is None:
            self._cache = {
                "harmonic": harmonic_part(self.tc, self.basis),
                "inductor": inductor_flux_ops(self.tc, self.basis),
                "junction": {
                    b.index: junction_exponential(self.tc, self.basis, b.index)
                    for b in self.matrices.branches if b.kind == "junction"
                },
            }
        if "charge" not in self._cache:
            self._cache["charge"] = charge_part(self.tc, self.basis)
        return self._cache

    def hamiltonian(self, phases=None, charge_offsets=None, ej_scale=None):
        """Sparse Hamiltonian (joule) at the current settings.

        ``phases``, ``charge_offsets`` and ``ej_scale`` (branch index ->
        multiplier) override the stored values without mutating the circuit;
        they exist for sweeps and finite-difference derivatives.
        """
        ops = self._ops()
        if phases is None:
            phases = self.phases()
        if charge_offsets is None:
            static = ops["harmonic"] + ops["charge"]
        else:
            basis = ModeBasis(self.basis.truncations,
                              np.asarray(charge_offsets, dtype=float))
            static = ops["harmonic"] + charge_part(self.tc, basis)
        tc = self.tc
        if ej_scale:
            tc = _scaled_tc(self.tc, ej_scale)
        return assemble_hamiltonian(tc, self.basis, phases,
                                    static=static.tocsr(),
                                    inductor_ops=ops["inductor"],
                                    junction_exps=ops["junction"])

    def diag(self, n_eig: int):
        """Lowest eigenpairs at the current settings; the spectrum is kept
        for later matrix-element and rate queries."""
        self.spectrum = _solver.diag(self.hamiltonian(), n_eig)
        return self.spectrum

    def _spectrum_for(self, n_eig: int):
        if self.spectrum is None or self.spectrum.n_eig < n_eig:
            self.diag(n_eig)
        return self.spectrum

    # ------------------------------------------------------------------
    # derived quantities

    def eig_phase_coord(self, k: int, grid):
        """Eigenfunction ``k`` on a per-mode phase grid."""
        spec = self._spectrum_for(k + 1)
        return _eig_phase_coord(spec.evecs[:, k], self.basis, self.partition,
                                grid)

    def coupling_op(self, kind: str, nodes):
        return _coupling_op(self.tc, self.basis, kind, nodes)

    def matrix_element(self, kind: str, nodes, states):
        spec = self._spectrum_for(max(states) + 1)
        return _matrix_element(self.coupling_op(kind, nodes), spec, states)

    def dec_rate(self, channel: str, states, total: bool = True, env=None):
        """Decoherence rate (1/s) for one channel between two eigenstates."""
        env = env or self.noise_environment()
        if channel in ("capacitive", "inductive", "quasiparticle"):
            return _noise.decay_rate(self, channel, states, total=total,
                                     env=env)
        if channel in ("cc", "charge", "flux"):
            return _noise.dephasing_rate(self, channel, states, env=env)
        raise ValueError(f"unknown decoherence channel '{channel}'")

    def noise_environment(self):
        return _noise.NoiseEnvironment.from_settings(self.spec.settings)

    # ------------------------------------------------------------------
    # reporting

    def mode_frequencies_ghz(self) -> np.ndarray:
        return self.partition.omega / (2.0 * np.pi * _GHZ)

    def charging_energy_ghz(self) -> np.ndarray:
        """E_C matrix of the charge block in GHz: 2 e^2 (C_ch^-1)_mn / h."""
        return 2.0 * E_CHARGE**2 * self.tc.cinv_charge / H_PLANCK / _GHZ

    def description(self) -> str:
        """Human-readable summary of the transformed circuit."""
        p = self.partition
        lines = []
        lines.append(
            f"circuit: {self.matrices.n_nodes} node(s), "
            f"{len(self.matrices.branches)} inductive branch(es), "
            f"{self.matrices.n_loops} loop(s); flux_dist = "
            f"{self.spec.flux_dist}")
        zp = mode_zero_point_phases(self.tc)
        for m in range(p.n_harmonic):
            lines.append(
                f"mode {m + 1}: harmonic   omega/2pi = "
                f"{p.omega[m] / (2 * np.pi * _GHZ):.6g} GHz   "
                f"phi_zp = {zp[m]:.6g}")
        for c in range(p.n_charge):
            mode = p.n_harmonic + c + 1
            ng = self.spec.charge_offsets.get(mode, 0.0)
            frozen = "   (frozen island)" if mode - 1 in self.tc.frozen_modes \
                else ""
            lines.append(f"mode {mode}: charge     n_g = {ng:.6g}{frozen}")

        ec = self.charging_energy_ghz()
        for a in range(p.n_charge):
            for b in range(a, p.n_charge):
                ma, mb = p.n_harmonic + a + 1, p.n_harmonic + b + 1
                lines.append(f"E_C{ma}{mb} = {ec[a, b]:.6g} GHz")

        scales = mode_display_scales(self.tc)
        loop_ids = self.matrices.loop_ids
        for term in junction_cosine_prefactors(self.tc):
            br = self.matrices.branches[term.branch]
            coefs = [self.tc.w_harmonic[term.branch, m] / scales[m]
                     for m in range(p.n_harmonic)]
            coefs += [float(term.charge_powers[c])
                      for c in range(p.n_charge)] if p.n_charge else []
            # the cosine is even: normalize the first mode coefficient to +
            sign = 1.0
            for c in coefs:
                if c != 0.0:
                    sign = 1.0 if c > 0 else -1.0
                    break
            parts = []
            for m, c in enumerate(coefs):
                if c != 0.0:
                    parts.append(f"{sign * c:+.4g}*phi_{m + 1}")
            for li, w in enumerate(term.b):
                if w != 0.0:
                    parts.append(f"{sign * w:+.4g}*phi_ext[{loop_ids[li]}]")
            arg = " ".join(parts) if parts else "0"
            i, j = sorted(br.nodes)
            lines.append(
                f"junction ({i},{j}): "
                f"E_J = {term.ej / H_PLANCK / _GHZ:.6g} GHz   cos({arg})")
        for b in self.matrices.branches:
            if b.kind != "inductor":
                continue
            factors = [f"{w:+.4g}*phi_ext[{loop_ids[li]}]"
                       for li, w in enumerate(self.matrices.B[b.index])
                       if w != 0.0]
            el = from_si(b.value, "GHz", "inductor")
            i, j = sorted(b.nodes)
            lines.append(
                f"inductor ({i},{j}): "
                f"E_L = {el:.6g} GHz   flux: "
                f"{' '.join(factors) if factors else '-'}")
        return "\n".join(lines)


def _scaled_tc(tc, ej_scale: dict):
    """Shallow variant of a transformed circuit with some junction energies
    multiplied; used by critical-current derivative estimates."""
    matrices = copy.copy(tc.matrices)
    branches = list(matrices.branches)
    for idx, scale in ej_scale.items():
        b = branches[idx]
        branches[idx] = type(b)(b.index, b.kind, b.nodes, b.value * scale,
                                b.loops, b.element)
    matrices.branches = branches
    out = copy.copy(tc)
    object.__setattr__(out, "matrices", matrices)
    return out
