"""Depolarization and 1/f dephasing rate estimates.

Depolarization sums golden-rule rates |<m|O|n>|^2 S(omega)/hbar^2 over the
lossy elements of a channel (capacitors, inductors, or junctions for
quasiparticle tunneling).  Every spectral density is evaluated at the
transition frequency magnitude, with absorption obtained from emission
through the detailed-balance factor exp(-hbar|w|/kT), so the balance relation
holds to roundoff by construction.

Dephasing treats 1/f noise in junction critical currents, island gate
charges, and loop fluxes: the first and second derivatives of the transition
frequency with respect to each noise parameter are estimated by
Richardson-extrapolated central differences and combined per the standard
free-induction-decay expression, independent sources adding in quadrature.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import k0e

from .constants import E_CHARGE, HBAR, K_BOLTZMANN, R_KLITZING
from .coupling import (coupling_op, flux_operator_full, matrix_element,
                       node_pair_vector)
from .errors import CircuitWarning
from .hamiltonian import junction_exponential
from .netlist import element_si_value

# transitions slower than this (rad/s) cannot be fed to the bath spectral
# densities, which diverge at zero frequency
MIN_TRANSITION_OMEGA = 1e3

# finite-difference steps relative to each parameter's scale
FD_STEP_FIRST = 1e-6
FD_STEP_SECOND = 1e-4


@dataclass
class NoiseEnvironment:
    """Bath and 1/f-noise parameters.

    ``omega_low``/``omega_high`` are angular frequencies (rad/s); the
    logarithms in the dephasing expression read them multiplied by the
    measurement time ``t_exp``.  ``charge_noise_amp`` is the default gate
    charge noise amplitude in units of e, overridable per charge mode through
    ``charge_noise``.
    """

    temperature: float = 0.015
    omega_low: float = 2.0 * math.pi * 1.0
    omega_high: float = 2.0 * math.pi * 3.0e9
    t_exp: float = 10e-6
    charge_noise_amp: float = 1e-4
    charge_noise: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("bath temperature must be positive")
        if not 0 < self.omega_low < self.omega_high:
            raise ValueError("need 0 < omega_low < omega_high")
        if self.t_exp <= 0:
            raise ValueError("measurement time must be positive")
        if self.charge_noise_amp < 0 or \
                any(a < 0 for a in self.charge_noise.values()):
            raise ValueError("noise amplitudes must be >= 0")

    @classmethod
    def from_settings(cls, settings: dict) -> "NoiseEnvironment":
        kw = {}
        if "temp" in settings:
            kw["temperature"] = settings["temp"]
        if "omega_low" in settings:
            kw["omega_low"] = 2.0 * math.pi * settings["omega_low"]
        if "omega_high" in settings:
            kw["omega_high"] = 2.0 * math.pi * settings["omega_high"]
        if "t_exp" in settings:
            kw["t_exp"] = settings["t_exp"]
        return cls(**kw)


@dataclass
class RateResult:
    rate: float            # 1/s
    channel: str
    states: tuple
    direction: str         # "downward" | "upward" | "total"
    breakdown: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# quality factors and spectral densities


def default_q_cap(omega: float) -> float:
    """Frequency-dependent dielectric quality factor,
    1e6 (2pi 6 GHz / |w|)^0.7."""
    return 1e6 * (2.0 * math.pi * 6e9 / abs(omega)) ** 0.7


def _k0_sinh(x: float) -> float:
    # K0(x) sinh(x) without overflow: k0e(x) e^-x sinh(x)
    return k0e(x) * 0.5 * (1.0 - math.exp(-2.0 * x)) if x > 0 else math.inf


def default_q_ind(omega: float, temperature: float) -> float:
    """Superinductor quality factor from thermal quasiparticle tunneling,
    pinned to 500e6 at 0.5 GHz."""
    xr = 0.5 * HBAR * (2.0 * math.pi * 0.5e9) / (K_BOLTZMANN * temperature)
    x = 0.5 * HBAR * abs(omega) / (K_BOLTZMANN * temperature)
    return 500e6 * _k0_sinh(xr) / _k0_sinh(x)


def _resolve_quality(quality, omega: float, default) -> float:
    if quality is None:
        return default(omega)
    if callable(quality):
        return float(quality(omega))
    return float(quality)


def thermal_factor(omega: float, temperature: float) -> float:
    """(1 + coth(hbar w / 2 k T)) continued to negative frequencies through
    detailed balance; always positive."""
    x = HBAR * abs(omega) / (K_BOLTZMANN * temperature)
    # 1 + coth(x/2) = 2 + 2/(e^x - 1); absorption gets the e^-x factor
    emission = 2.0 + (2.0 / math.expm1(x) if x < 700 else 0.0)
    if omega >= 0:
        return emission
    return emission * math.exp(-x) if x < 700 else 0.0


def s_vv(omega: float, cap: float, q_cap: float, temperature: float) -> float:
    """Voltage noise of a lossy capacitor."""
    return HBAR / (cap * q_cap) * thermal_factor(omega, temperature)


def s_ii(omega: float, ind: float, q_ind: float, temperature: float) -> float:
    """Current noise of a lossy inductor."""
    return HBAR / (ind * q_ind) * thermal_factor(omega, temperature)


def re_y_qp(omega: float, ej: float, gap_j: float, x_qp: float,
            temperature: float) -> float:
    """Real part of the junction quasiparticle admittance."""
    x = 0.5 * HBAR * abs(omega) / (K_BOLTZMANN * temperature)
    return (math.sqrt(2.0 / math.pi) * (8.0 * ej / (R_KLITZING * gap_j))
            * (2.0 * gap_j / (HBAR * abs(omega))) ** 1.5
            * x_qp * math.sqrt(x) * _k0_sinh(x))


def s_qp(omega: float, ej: float, gap_j: float, x_qp: float,
         temperature: float) -> float:
    """Quasiparticle tunneling spectral density."""
    return (HBAR * abs(omega)
            * re_y_qp(omega, ej, gap_j, x_qp, temperature)
            * thermal_factor(omega, temperature))


# ---------------------------------------------------------------------------
# depolarization


def _capacitor_elements(spec):
    """(nodes, capacitor def) for every physical capacitor, including those
    attached in parallel to inductive elements."""
    out = []
    for edge, elems in sorted(spec.edges.items()):
        for e in elems:
            if e.kind == "capacitor":
                out.append((edge, e))
            elif getattr(e, "parallel_cap", None) is not None:
                out.append((edge, e.parallel_cap))
    return out


def _flux_drop_op(circuit, nodes):
    """e_ij^T S Phi_hat on the product space (harmonic block only; the charge
    block cannot support a flux drop across an inductive edge)."""
    tc, basis = circuit.tc, circuit.basis
    e = node_pair_vector(tc.matrices.n_nodes, nodes)
    vec = e @ tc.transformation.S
    op = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    for m in range(tc.partition.n_harmonic):
        if vec[m] != 0.0:
            op = op + vec[m] * flux_operator_full(tc, basis, m)
    return op.tocsr()


def _transition(circuit, states):
    m, n = states
    spec = circuit._spectrum_for(max(states) + 1)
    omega = 2.0 * math.pi * (spec.efreqs[m] - spec.efreqs[n])
    if abs(omega) < MIN_TRANSITION_OMEGA:
        raise ValueError(
            f"transition frequency {abs(omega):.3g} rad/s between states "
            f"{states} is too small for bath spectral-density evaluation")
    return spec, abs(omega)


def decay_rate(circuit, channel: str, states, total: bool = True,
               env: NoiseEnvironment = None) -> RateResult:
    """Golden-rule depolarization rate for one channel.

    With ``total=False`` only the downward rate is returned; with
    ``total=True`` the upward rate (emission times the Boltzmann factor) is
    added.
    """
    env = env or NoiseEnvironment()
    spectrum, omega = _transition(circuit, states)
    T = env.temperature
    boltzmann = math.exp(-HBAR * omega / (K_BOLTZMANN * T)) \
        if HBAR * omega / (K_BOLTZMANN * T) < 700 else 0.0

    down = 0.0
    breakdown = []
    if channel == "capacitive":
        for nodes, cap in _capacitor_elements(circuit.spec):
            c = element_si_value(cap)
            q = _resolve_quality(cap.quality, omega, default_q_cap)
            op = coupling_op(circuit.tc, circuit.basis, "capacitive", nodes)
            mel = abs(matrix_element(op, spectrum, states)) * c
            rate = mel**2 / HBAR**2 * s_vv(omega, c, q, T)
            down += rate
            breakdown.append((f"C@{nodes}", rate))
    elif channel == "inductive":
        for b in circuit.matrices.branches:
            if b.kind != "inductor":
                continue
            q = _resolve_quality(b.element.quality, omega,
                                 lambda w: default_q_ind(w, T))
            op = _flux_drop_op(circuit, b.nodes)
            mel = abs(matrix_element(op, spectrum, states))
            rate = mel**2 / HBAR**2 * s_ii(omega, b.value, q, T)
            down += rate
            breakdown.append((f"L@{b.nodes}", rate))
    elif channel == "quasiparticle":
        for b in circuit.matrices.branches:
            if b.kind != "junction":
                continue
            op = _qp_sin_op(circuit, b.index)
            if op is None:
                warnings.warn(
                    f"junction {b.nodes}: sin(phi/2) translates island "
                    f"charge by half a Cooper pair, which leaves the charge "
                    f"basis; its quasiparticle contribution is dropped",
                    CircuitWarning, stacklevel=2)
                breakdown.append((f"JJ@{b.nodes}", 0.0))
                continue
            mel = abs(matrix_element(op, spectrum, states))
            gap_j = b.element.gap * E_CHARGE
            rate = mel**2 / HBAR**2 * s_qp(omega, b.value, gap_j,
                                           b.element.qp_density, T)
            down += rate
            breakdown.append((f"JJ@{b.nodes}", rate))
    else:
        raise ValueError(f"unknown depolarization channel '{channel}'")

    if total:
        return RateResult(down * (1.0 + boltzmann), channel, tuple(states),
                          "total", breakdown)
    return RateResult(down, channel, tuple(states), "downward", breakdown)


def _qp_sin_op(circuit, branch: int):
    """sin( (2pi/Phi0) w^T Phi_hat / 2 - b^T phi_ext / 2 )."""
    half = junction_exponential(circuit.tc, circuit.basis, branch, half=True)
    if half is None:
        return None
    theta = float(circuit.matrices.B[branch] @ circuit.phases())
    term = np.exp(-0.5j * theta) * half
    return ((term - term.conj().T) / 2j).tocsr()


# ---------------------------------------------------------------------------
# dephasing


def _fd_derivatives(f, scale: float, omega_scale: float):
    """Richardson-extrapolated central first derivative and plain central
    second derivative of ``f`` around zero."""
    d1s = FD_STEP_FIRST * scale
    f0 = f(0.0)
    coarse = (f(d1s) - f(-d1s)) / (2.0 * d1s)
    fine = (f(d1s / 2) - f(-d1s / 2)) / d1s
    d1 = (4.0 * fine - coarse) / 3.0

    noise_floor = 1e-9 * max(abs(omega_scale), 1.0) / d1s
    if abs(d1 - fine) > max(0.05 * abs(d1), 50.0 * noise_floor):
        raise ValueError(
            f"first-derivative estimate did not converge: step {d1s:.3e} "
            f"gave {coarse:.6e}, step {d1s / 2:.3e} gave {fine:.6e}, "
            f"extrapolation {d1:.6e}")

    d2s = FD_STEP_SECOND * scale
    d2 = (f(d2s) - 2.0 * f0 + f(-d2s)) / d2s**2
    return d1, d2


def _dephasing_sources(circuit, states, channel: str,
                       env: NoiseEnvironment) -> list:
    """(label, amplitude, f(lambda), scale) per noise parameter; f returns
    the transition angular frequency at an offset of the parameter."""
    from .solver import diag as _diag
    m, n = states
    n_eig = max(states) + 3

    def omega_of(H) -> float:
        fr = _diag(H, n_eig).efreqs
        return 2.0 * math.pi * (fr[m] - fr[n])

    sources = []
    if channel == "cc":
        for b in circuit.matrices.branches:
            if b.kind != "junction":
                continue

            def f(d, idx=b.index):
                return omega_of(circuit.hamiltonian(
                    ej_scale={idx: 1.0 + d}))

            sources.append((f"JJ@{b.nodes}", b.element.cc_noise_amp, f, 1.0))
    elif channel == "charge":
        base = circuit.basis.charge_offsets
        for c in range(circuit.partition.n_charge):
            mode = circuit.partition.n_harmonic + c + 1
            amp = env.charge_noise.get(mode, env.charge_noise_amp)

            # gate charge measured in units of e; offsets store Cooper pairs
            def f(d, pos=c):
                ng = base.copy()
                ng[pos] += d / 2.0
                return omega_of(circuit.hamiltonian(charge_offsets=ng))

            sources.append((f"mode{mode}", amp, f, 1.0))
    elif channel == "flux":
        if circuit.spec.flux_dist != "all" and circuit.matrices.n_loops:
            warnings.warn(
                "flux dephasing with flux_dist='junctions' is spanning-tree "
                "dependent; use flux_dist='all' for gauge-independent rates",
                CircuitWarning, stacklevel=3)
        base = circuit.phases()
        for li, lp in enumerate(circuit.spec.loops):

            def f(d, li=li):
                ph = base.copy()
                ph[li] += d
                return omega_of(circuit.hamiltonian(phases=ph))

            sources.append((f"loop {lp.id}", 2.0 * math.pi *
                            lp.flux_noise_amp, f, 2.0 * math.pi))
    else:
        raise ValueError(f"unknown dephasing channel '{channel}'")
    return sources


def dephasing_rate(circuit, channel: str, states,
                   env: NoiseEnvironment = None) -> RateResult:
    """Pure dephasing rate from 1/f noise in one channel.

    Independent parameters of the channel combine in quadrature: squared
    first-order terms and squared second-order terms are summed before the
    square root.
    """
    env = env or NoiseEnvironment()
    spec = circuit._spectrum_for(max(states) + 1)
    omega_scale = 2.0 * math.pi * max(abs(spec.efreqs[states[0]]),
                                      abs(spec.efreqs[states[1]]))

    log_low = abs(math.log(env.omega_low * env.t_exp))
    log_band = math.log(env.omega_high / env.omega_low)

    first = 0.0
    second = 0.0
    breakdown = []
    for label, amp, f, scale in _dephasing_sources(circuit, states, channel,
                                                   env):
        if amp == 0.0:
            breakdown.append((label, 0.0))
            continue
        d1, d2 = _fd_derivatives(f, scale, omega_scale)
        t1 = 2.0 * amp**2 * d1**2 * log_low
        t2 = 2.0 * amp**4 * d2**2 * (log_band**2 + 2.0 * log_low**2)
        first += t1
        second += t2
        breakdown.append((label, math.sqrt(t1 + t2)))
    return RateResult(math.sqrt(first + second), channel, tuple(states),
                      "total", breakdown)
