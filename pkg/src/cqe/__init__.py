"""Quantized analysis of superconducting circuits from plain-text netlists.

Typical use::

    import cqe

    spec = cqe.parse_netlist(text)
    cr = cqe.Circuit(spec)
    print(cr.description())
    cr.set_trunc_nums([25, 1, 25])
    spectrum = cr.diag(n_eig=5)
"""

from .circuit import Circuit
from .errors import (CircuitWarning, NetlistError, SolverError,
                     TransformError, ValidationError)
from .netlist import (CapacitorDef, CircuitSpec, ElementValue, InductorDef,
                      JunctionDef, LoopDef, format_netlist, parse_netlist,
                      parse_netlist_file, to_si, validate)
from .noise import NoiseEnvironment, RateResult
from .solver import Spectrum, convergence_probe, diag, sweep
from .transform import ModePartition, TransformedCircuit, Transformation

__version__ = "0.1.0"

__all__ = [
    "CapacitorDef",
    "Circuit",
    "CircuitSpec",
    "CircuitWarning",
    "ElementValue",
    "InductorDef",
    "JunctionDef",
    "LoopDef",
    "ModePartition",
    "NetlistError",
    "NoiseEnvironment",
    "RateResult",
    "SolverError",
    "Spectrum",
    "TransformError",
    "TransformedCircuit",
    "Transformation",
    "ValidationError",
    "format_netlist",
    "parse_netlist",
    "parse_netlist_file",
    "to_si",
    "validate",
    "convergence_probe",
    "diag",
    "sweep",
]
