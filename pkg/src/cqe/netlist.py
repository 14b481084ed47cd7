"""Plain-text netlist format: element definitions, parser, validator, serializer.

File format (UTF-8, ``#`` starts a comment)::

    [settings]
    flux_dist = junctions        # or "all"
    temp = 0.015                 # bath temperature, K

    [loops]
    l1 = flux 0.5 A 1e-6         # flux in units of Phi0

    [elements]
    (0,1): C 0.15 GHz; JJ 5 GHz loops l1
    (1,2): L 1.2 nH loops l1 Q 500e6 cap 3.6 GHz Q 1e6

Element clauses:

* ``C <val> [<unit>] [Q <float>]``
* ``L <val> [<unit>] [loops id,...] [Q <float>] [cap <val> <unit> [Q <float>]]``
* ``JJ <val> [<unit>] [loops id,...] [A <float>] [delta <float>] [x <float>]
  [cap <val> <unit> [Q <float>]]``

Hz-family values give the element's energy scale (charging energy for
capacitors, inductive energy for inductors, Josephson energy for junctions);
farad/henry values give the component value directly.  When the unit token is
omitted the file default applies (GHz unless overridden by the
``default_unit`` setting).  A ``cap`` clause attaches a parallel capacitance
to an inductive element; it is folded into the edge capacitance when the
circuit matrices are built and is the capacitance used by the time-dependent
flux distribution.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from .constants import E_CHARGE, H_PLANCK, PHI0_BAR
from .errors import NetlistError

Quality = Union[float, Callable[[float], float], None]

FREQ_UNITS = {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9, "THz": 1e12}
CAP_UNITS = {"F": 1.0, "mF": 1e-3, "uF": 1e-6, "nF": 1e-9, "pF": 1e-12,
             "fF": 1e-15, "aF": 1e-18}
IND_UNITS = {"H": 1.0, "mH": 1e-3, "uH": 1e-6, "nH": 1e-9, "pH": 1e-12,
             "fH": 1e-15}
ALL_UNITS = {**FREQ_UNITS, **CAP_UNITS, **IND_UNITS}

# legal unit families per element kind
_LEGAL_FAMILIES = {
    "capacitor": ("freq", "cap"),
    "inductor": ("freq", "ind"),
    "junction": ("freq",),
}


def unit_family(unit: str) -> str:
    if unit in FREQ_UNITS:
        return "freq"
    if unit in CAP_UNITS:
        return "cap"
    if unit in IND_UNITS:
        return "ind"
    raise NetlistError(f"unknown unit '{unit}'")


@dataclass(frozen=True)
class ElementValue:
    """Magnitude plus unit, as written in the netlist."""

    magnitude: float
    unit: str

    def __post_init__(self):
        if not math.isfinite(self.magnitude):
            raise NetlistError(f"non-finite element value {self.magnitude!r}")
        unit_family(self.unit)  # raises on unknown unit


@dataclass
class CapacitorDef:
    value: ElementValue
    quality: Quality = None

    kind = "capacitor"


@dataclass
class InductorDef:
    value: ElementValue
    loops: tuple = ()
    quality: Quality = None
    parallel_cap: Optional[CapacitorDef] = None

    kind = "inductor"


@dataclass
class JunctionDef:
    """Josephson junction.  ``gap`` is the superconducting gap in eV;
    ``cc_noise_amp`` the normalized critical-current noise amplitude A_J/E_J;
    ``qp_density`` the quasiparticle density x_qp.  A zero Josephson energy is
    allowed (degenerate limit useful in tests); the parser still rejects
    non-positive values in files."""

    josephson_energy: ElementValue = None
    loops: tuple = ()
    parallel_cap: Optional[CapacitorDef] = None
    cc_noise_amp: float = 1e-7
    gap: float = 3.4e-4
    qp_density: float = 3e-6

    kind = "junction"

    def __post_init__(self):
        if self.gap <= 0:
            raise NetlistError("junction gap must be positive")
        if self.cc_noise_amp < 0 or self.qp_density < 0:
            raise NetlistError("junction noise parameters must be >= 0")


@dataclass
class LoopDef:
    """Inductive loop.  ``external_flux`` is in units of Phi0 and may be
    mutated between solves; ``flux_noise_amp`` is the normalized 1/f flux
    noise amplitude A_phi/Phi0."""

    id: str
    external_flux: float = 0.0
    flux_noise_amp: float = 1e-6


@dataclass
class CircuitSpec:
    """Parsed netlist: elements per node pair, loops, flux-distribution policy.

    ``edges`` maps normalized node pairs ``(i, j)`` with ``i < j`` (node 0 is
    ground) to the list of element definitions on that edge.
    ``charge_offsets`` maps 1-based mode indices (as shown by ``describe``) to
    gate-charge offsets n_g in units of 2e; it is populated after the
    transformation identifies the charge modes.  ``settings`` carries
    temperature/cutoff overrides from the ``[settings]`` section.
    """

    edges: dict = field(default_factory=dict)
    loops: list = field(default_factory=list)
    flux_dist: str = "junctions"
    charge_offsets: dict = field(default_factory=dict)
    settings: dict = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        """Number of non-ground nodes."""
        return max((max(e) for e in self.edges), default=0)

    def loop_index(self, loop_id: str) -> int:
        for i, lp in enumerate(self.loops):
            if lp.id == loop_id:
                return i
        raise KeyError(f"no loop '{loop_id}'")

    def set_flux(self, loop_id: str, value: float) -> None:
        """Set a loop's external flux (units of Phi0)."""
        self.loops[self.loop_index(loop_id)].external_flux = value


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    message: str


# ---------------------------------------------------------------------------
# unit conversion


def to_si(value: ElementValue, kind: str) -> float:
    """Convert an element value to SI (farad, henry, or joule).

    Hz-family capacitor values invert E_c = e^2/2c; Hz-family inductor values
    invert E_l = (Phi0/2pi)^2/l; junction frequencies convert to E_J = h f.
    """
    fam = unit_family(value.unit)
    if fam not in _LEGAL_FAMILIES[kind]:
        raise NetlistError(f"unit '{value.unit}' not legal for a {kind}")
    mag = value.magnitude * ALL_UNITS[value.unit]
    if kind == "capacitor":
        if fam == "cap":
            return mag
        return E_CHARGE**2 / (2.0 * H_PLANCK * mag)
    if kind == "inductor":
        if fam == "ind":
            return mag
        return PHI0_BAR**2 / (H_PLANCK * mag)
    # junction: Hz only
    return H_PLANCK * mag


def from_si(si_value: float, unit: str, kind: str) -> float:
    """Inverse of :func:`to_si`: express an SI value in the given unit."""
    fam = unit_family(unit)
    if fam not in _LEGAL_FAMILIES[kind]:
        raise NetlistError(f"unit '{unit}' not legal for a {kind}")
    scale = ALL_UNITS[unit]
    if kind == "capacitor" and fam == "freq":
        return E_CHARGE**2 / (2.0 * H_PLANCK * si_value) / scale
    if kind == "inductor" and fam == "freq":
        return PHI0_BAR**2 / (H_PLANCK * si_value) / scale
    if kind == "junction":
        return si_value / H_PLANCK / scale
    return si_value / scale


def element_si_value(elem) -> float:
    if elem.kind == "junction":
        return to_si(elem.josephson_energy, "junction")
    return to_si(elem.value, elem.kind)


# ---------------------------------------------------------------------------
# parser

_EDGE_RE = re.compile(r"^\(\s*(\d+)\s*,\s*(\d+)\s*\)$")
_SECTIONS = ("loops", "elements", "settings")
_SETTING_KEYS = ("flux_dist", "temp", "omega_low", "omega_high", "t_exp",
                 "default_unit")
_FLOAT_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


def _is_float(tok: str) -> bool:
    return bool(_FLOAT_RE.match(tok))


class _Cursor:
    """Token cursor over one logical line, tracking columns for errors."""

    def __init__(self, text: str, line_no: int, offset: int = 0):
        self.line_no = line_no
        self.tokens = []
        for m in re.finditer(r"\S+", text):
            self.tokens.append((m.group(0), offset + m.start() + 1))
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos][0] if self.pos < len(self.tokens) else None

    def next(self, what="token"):
        if self.pos >= len(self.tokens):
            raise NetlistError(f"expected {what}, found end of line",
                               self.line_no)
        tok, col = self.tokens[self.pos]
        self.pos += 1
        self.col = col
        return tok

    def next_float(self, what="number") -> float:
        tok = self.next(what)
        if not _is_float(tok):
            raise NetlistError(f"expected {what}, found '{tok}'",
                               self.line_no, self.col)
        return float(tok)

    def error(self, message):
        col = self.tokens[self.pos][1] if self.pos < len(self.tokens) else None
        raise NetlistError(message, self.line_no, col)


def _strip_comment(line: str) -> str:
    idx = line.find("#")
    return line if idx < 0 else line[:idx]


def _parse_value_unit(cur: _Cursor, default_unit: str, kind: str) -> ElementValue:
    mag = cur.next_float("element value")
    if mag <= 0:
        raise NetlistError(f"non-positive value {mag} for {kind}",
                           cur.line_no, cur.col)
    unit = default_unit
    if cur.peek() in ALL_UNITS:
        unit = cur.next()
    if unit_family(unit) not in _LEGAL_FAMILIES[kind]:
        raise NetlistError(f"unit '{unit}' not legal for a {kind}", cur.line_no)
    return ElementValue(mag, unit)


def _parse_loop_list(cur: _Cursor, loop_ids, line_no) -> tuple:
    ids = tuple(s for s in cur.next("loop id list").split(",") if s)
    if not ids:
        raise NetlistError("empty loop list", line_no, cur.col)
    for lid in ids:
        if lid not in loop_ids:
            raise NetlistError(f"dangling loop reference '{lid}'",
                               line_no, cur.col)
    return ids


def _parse_cap_clause(cur: _Cursor, default_unit: str) -> CapacitorDef:
    value = _parse_value_unit(cur, default_unit, "capacitor")
    quality = None
    if cur.peek() == "Q":
        cur.next()
        quality = cur.next_float("quality factor")
        if quality <= 0:
            raise NetlistError("quality factor must be positive", cur.line_no,
                               cur.col)
    return CapacitorDef(value, quality)


def _parse_element(text: str, line_no: int, col0: int, loop_ids,
                   default_unit: str):
    cur = _Cursor(text, line_no, col0)
    head = cur.next("element kind")
    if head == "C":
        value = _parse_value_unit(cur, default_unit, "capacitor")
        quality = None
        if cur.peek() == "Q":
            cur.next()
            quality = cur.next_float("quality factor")
            if quality <= 0:
                raise NetlistError("quality factor must be positive",
                                   cur.line_no, cur.col)
        if cur.peek() is not None:
            cur.error(f"unexpected token '{cur.peek()}' after capacitor")
        return CapacitorDef(value, quality)

    if head == "L":
        value = _parse_value_unit(cur, default_unit, "inductor")
        loops, quality, pcap = (), None, None
        while cur.peek() is not None:
            clause = cur.next()
            if clause == "loops":
                loops = _parse_loop_list(cur, loop_ids, line_no)
            elif clause == "Q":
                quality = cur.next_float("quality factor")
                if quality <= 0:
                    raise NetlistError("quality factor must be positive",
                                       cur.line_no, cur.col)
            elif clause == "cap":
                pcap = _parse_cap_clause(cur, default_unit)
            else:
                raise NetlistError(f"unknown inductor clause '{clause}'",
                                   line_no, cur.col)
        return InductorDef(value, loops, quality, pcap)

    if head == "JJ":
        value = _parse_value_unit(cur, default_unit, "junction")
        kwargs = {}
        loops, pcap = (), None
        while cur.peek() is not None:
            clause = cur.next()
            if clause == "loops":
                loops = _parse_loop_list(cur, loop_ids, line_no)
            elif clause == "A":
                kwargs["cc_noise_amp"] = cur.next_float("noise amplitude")
            elif clause == "delta":
                kwargs["gap"] = cur.next_float("gap")
            elif clause == "x":
                kwargs["qp_density"] = cur.next_float("quasiparticle density")
            elif clause == "cap":
                pcap = _parse_cap_clause(cur, default_unit)
            else:
                raise NetlistError(f"unknown junction clause '{clause}'",
                                   line_no, cur.col)
        return JunctionDef(value, loops, pcap, **kwargs)

    raise NetlistError(f"unknown element kind '{head}'", line_no, col0 + 1)


def parse_netlist(text: str) -> CircuitSpec:
    """Parse netlist text into a validated :class:`CircuitSpec`.

    Raises :class:`~cqe.errors.NetlistError` with line/column information on
    syntax errors, unknown units, dangling loop references, non-positive
    values, duplicate loop ids, and empty edges.
    """
    spec = CircuitSpec()
    section = None
    loop_ids = set()
    default_unit = "GHz"

    # settings can appear anywhere; scan them first so default_unit applies
    lines = text.splitlines()
    in_settings = False
    for ln, raw in enumerate(lines, 1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if line.startswith("["):
            in_settings = line.lower() == "[settings]"
            continue
        if in_settings and "=" in line:
            key, _, val = (s.strip() for s in line.partition("="))
            if key == "default_unit":
                if val not in ALL_UNITS:
                    raise NetlistError(f"unknown unit '{val}'", ln)
                default_unit = val

    for ln, raw in enumerate(lines, 1):
        line = _strip_comment(raw).strip()
        if not line:
            continue

        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().lower()
            if name not in _SECTIONS:
                raise NetlistError(f"unknown section '[{name}]'", ln)
            section = name
            continue
        if section is None:
            raise NetlistError("content before any section header", ln)

        if section == "settings":
            if "=" not in line:
                raise NetlistError("settings line must be 'key = value'", ln)
            key, _, val = (s.strip() for s in line.partition("="))
            if key == "flux_dist":
                if val not in ("junctions", "all"):
                    raise NetlistError(
                        f"flux_dist must be 'junctions' or 'all', got '{val}'",
                        ln)
                spec.flux_dist = val
            elif key == "default_unit":
                pass  # handled in pre-scan
            elif key in _SETTING_KEYS:
                if not _is_float(val):
                    raise NetlistError(f"expected number for '{key}'", ln)
                spec.settings[key] = float(val)
            elif re.fullmatch(r"ng\d+", key):
                if not _is_float(val):
                    raise NetlistError(f"expected number for '{key}'", ln)
                spec.charge_offsets[int(key[2:])] = float(val)
            else:
                raise NetlistError(f"unknown setting '{key}'", ln)
            continue

        if section == "loops":
            m = re.match(r"^(\S+)\s*=\s*(.*)$", line)
            if not m:
                raise NetlistError("loop line must be 'id = flux <value>'", ln)
            lid, rest = m.group(1), m.group(2)
            if lid in loop_ids:
                raise NetlistError(f"duplicate loop id '{lid}'", ln)
            cur = _Cursor(rest, ln)
            if cur.next("'flux'") != "flux":
                raise NetlistError("loop line must be 'id = flux <value>'",
                                   ln, cur.col)
            flux = cur.next_float("flux value")
            amp = 1e-6
            if cur.peek() == "A":
                cur.next()
                amp = cur.next_float("noise amplitude")
                if amp < 0:
                    raise NetlistError("flux noise amplitude must be >= 0",
                                       ln, cur.col)
            if cur.peek() is not None:
                cur.error(f"unexpected token '{cur.peek()}' in loop line")
            loop_ids.add(lid)
            spec.loops.append(LoopDef(lid, flux, amp))
            continue

        # elements section
        m = re.match(r"^(\([^)]*\))\s*:\s*(.*)$", line)
        if not m:
            raise NetlistError("element line must be '(i,j): elem; ...'", ln)
        em = _EDGE_RE.match(m.group(1))
        if not em:
            raise NetlistError(f"malformed node pair '{m.group(1)}'", ln, 1)
        i, j = int(em.group(1)), int(em.group(2))
        if i == j:
            raise NetlistError(f"edge ({i},{j}) connects a node to itself", ln)
        edge = (min(i, j), max(i, j))
        body = m.group(2)
        col0 = len(line) - len(body)
        elems = []
        for part in body.split(";"):
            chunk = part.strip()
            if not chunk:
                continue
            off = col0 + part.index(chunk[0]) if chunk else col0
            elems.append(_parse_element(chunk, ln, off, loop_ids,
                                        default_unit))
            col0 += len(part) + 1
        if not elems:
            raise NetlistError(f"empty edge ({i},{j})", ln)
        spec.edges.setdefault(edge, []).extend(elems)

    return spec


def parse_netlist_file(path) -> CircuitSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_netlist(fh.read())


# ---------------------------------------------------------------------------
# canonical serializer


def _fmt(x: float) -> str:
    return repr(float(x))


def _format_element(elem) -> str:
    if elem.kind == "capacitor":
        s = f"C {_fmt(elem.value.magnitude)} {elem.value.unit}"
        if elem.quality is not None:
            if callable(elem.quality):
                raise ValueError("cannot serialize a callable quality factor")
            s += f" Q {_fmt(elem.quality)}"
        return s
    if elem.kind == "inductor":
        s = f"L {_fmt(elem.value.magnitude)} {elem.value.unit}"
        if elem.loops:
            s += " loops " + ",".join(elem.loops)
        if elem.quality is not None:
            if callable(elem.quality):
                raise ValueError("cannot serialize a callable quality factor")
            s += f" Q {_fmt(elem.quality)}"
        if elem.parallel_cap is not None:
            s += " " + _format_element(elem.parallel_cap).replace("C ", "cap ", 1)
        return s
    ev = elem.josephson_energy
    s = f"JJ {_fmt(ev.magnitude)} {ev.unit}"
    if elem.loops:
        s += " loops " + ",".join(elem.loops)
    if elem.cc_noise_amp != 1e-7:
        s += f" A {_fmt(elem.cc_noise_amp)}"
    if elem.gap != 3.4e-4:
        s += f" delta {_fmt(elem.gap)}"
    if elem.qp_density != 3e-6:
        s += f" x {_fmt(elem.qp_density)}"
    if elem.parallel_cap is not None:
        s += " " + _format_element(elem.parallel_cap).replace("C ", "cap ", 1)
    return s


def format_netlist(spec: CircuitSpec) -> str:
    """Canonical text form; ``parse_netlist(format_netlist(s)) == s`` for any
    spec expressible in the file format."""
    out = []
    if spec.flux_dist != "junctions" or spec.settings or spec.charge_offsets:
        out.append("[settings]")
        out.append(f"flux_dist = {spec.flux_dist}")
        for key in sorted(spec.settings):
            out.append(f"{key} = {_fmt(spec.settings[key])}")
        for mode in sorted(spec.charge_offsets):
            out.append(f"ng{mode} = {_fmt(spec.charge_offsets[mode])}")
        out.append("")
    if spec.loops:
        out.append("[loops]")
        for lp in spec.loops:
            line = f"{lp.id} = flux {_fmt(lp.external_flux)}"
            if lp.flux_noise_amp != 1e-6:
                line += f" A {_fmt(lp.flux_noise_amp)}"
            out.append(line)
        out.append("")
    out.append("[elements]")
    for edge in sorted(spec.edges):
        parts = "; ".join(_format_element(e) for e in spec.edges[edge])
        out.append(f"({edge[0]},{edge[1]}): {parts}")
    out.append("")
    return "\n".join(out)


# ---------------------------------------------------------------------------
# validation


def _capacitive_components(spec: CircuitSpec):
    """Union-find over nodes joined by nonzero capacitance (including
    parallel caps of inductive elements)."""
    parent = list(range(spec.n_nodes + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    for (i, j), elems in spec.edges.items():
        if any(e.kind == "capacitor" or getattr(e, "parallel_cap", None)
               for e in elems):
            union(i, j)
    return find


def validate(spec: CircuitSpec) -> list:
    """Graph-level validation; returns diagnostics instead of raising.

    Errors: disconnected nodes, loops not closed by inductive branches,
    junctions carrying non-frequency units, loop/cycle count mismatches.
    Warnings: nodes with no capacitive path to ground (the capacitance matrix
    will be singular).
    """
    diags = []
    n = spec.n_nodes
    seen = set()
    for e in spec.edges:
        seen.update(e)
    for k in range(n + 1):
        if k not in seen:
            diags.append(Diagnostic("error", f"disconnected node {k}"))

    for (i, j), elems in spec.edges.items():
        if not elems:
            diags.append(Diagnostic("error", f"empty edge ({i},{j})"))

    # junction unit legality (API-constructed specs may bypass the parser)
    for (i, j), elems in spec.edges.items():
        for e in elems:
            if e.kind == "junction" and \
                    unit_family(e.josephson_energy.unit) != "freq":
                diags.append(Diagnostic(
                    "error",
                    f"junction on ({i},{j}) has non-frequency unit "
                    f"'{e.josephson_energy.unit}'"))

    # loop closure: branches declaring a loop must form a single cycle
    declared = {lp.id for lp in spec.loops}
    ids = [lp.id for lp in spec.loops]
    if len(set(ids)) != len(ids):
        diags.append(Diagnostic("error", "duplicate loop ids"))
    members = {lid: [] for lid in declared}
    inductive_edges = []
    for edge, elems in sorted(spec.edges.items()):
        for e in elems:
            if e.kind == "capacitor":
                continue
            inductive_edges.append(edge)
            for lid in getattr(e, "loops", ()):
                if lid not in declared:
                    diags.append(Diagnostic(
                        "error", f"dangling loop reference '{lid}'"))
                else:
                    members[lid].append(edge)
    for lid in declared:
        branch_edges = members[lid]
        if len(branch_edges) < 2:
            diags.append(Diagnostic(
                "error",
                f"loop '{lid}' is referenced by fewer than two inductive "
                f"elements"))
            continue
        deg = {}
        for (i, j) in branch_edges:
            deg[i] = deg.get(i, 0) + 1
            deg[j] = deg.get(j, 0) + 1
        if any(d != 2 for d in deg.values()) or not _edges_connected(branch_edges):
            diags.append(Diagnostic(
                "error",
                f"loop '{lid}' is not closed by its inductive branches"))

    # independent-cycle count of the inductive multigraph must match the
    # declared loop count
    if inductive_edges:
        nodes = set()
        for e in inductive_edges:
            nodes.update(e)
        ncomp = _count_components(inductive_edges, nodes)
        n_cycles = len(inductive_edges) - len(nodes) + ncomp
        if n_cycles != len(spec.loops):
            diags.append(Diagnostic(
                "error",
                f"inductive graph has {n_cycles} independent cycle(s) but "
                f"{len(spec.loops)} loop(s) declared"))

    # capacitive path to ground
    find = _capacitive_components(spec)
    for k in range(1, n + 1):
        if k in seen and find(k) != find(0):
            diags.append(Diagnostic(
                "warning",
                f"node {k} has no capacitive path to ground; the capacitance "
                f"matrix will be singular"))
    return diags


def _edges_connected(edges) -> bool:
    nodes = set()
    for e in edges:
        nodes.update(e)
    if not nodes:
        return False
    adj = {v: set() for v in nodes}
    for (i, j) in edges:
        adj[i].add(j)
        adj[j].add(i)
    stack = [next(iter(nodes))]
    seen = set()
    while stack:
        v = stack.pop()
        if v in seen:
            continue
        seen.add(v)
        stack.extend(adj[v] - seen)
    return seen == nodes


def _count_components(edges, nodes) -> int:
    adj = {v: set() for v in nodes}
    for (i, j) in edges:
        adj[i].add(j)
        adj[j].add(i)
    seen = set()
    comps = 0
    for start in nodes:
        if start in seen:
            continue
        comps += 1
        stack = [start]
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            stack.extend(adj[v] - seen)
    return comps
