"""Classical circuit matrices: capacitance, susceptance, branch flux vectors.

Builds the node capacitance matrix C and susceptance matrix L* by the usual
stamping rules, enumerates the inductive branches (linear inductors and
junctions) in a deterministic order, grows a spanning tree over the inductive
multigraph, and distributes external loop fluxes over the branches either by
the spanning-tree assignment (``flux_dist = "junctions"``) or by the
capacitance-weighted linear solve that removes flux-velocity cross terms
(``flux_dist = "all"``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import TransformError
from .netlist import CircuitSpec, element_si_value

# placeholder parallel capacitance (F) for inductive branches without an
# explicit one; keeps the branch-capacitance matrix full rank in the
# time-dependent flux solve
DEFAULT_BRANCH_CAP = 1e-20

# residual tolerance for the flux-distribution defining equations
FLUX_RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class InductiveBranch:
    """One inductive branch.  ``nodes = (tail, head)`` orients the branch so
    its flux is phi_tail - phi_head (head is ground for ground-adjacent
    edges); ``value`` is the inductance in henry for inductors and the
    Josephson energy in joule for junctions."""

    index: int
    kind: str           # "inductor" | "junction"
    nodes: tuple
    value: float
    loops: tuple        # loop ids declared on the element
    element: object = field(repr=False, compare=False, default=None)

    def w_vector(self, n_nodes: int) -> np.ndarray:
        w = np.zeros(n_nodes, dtype=int)
        tail, head = self.nodes
        if tail != 0:
            w[tail - 1] = 1
        if head != 0:
            w[head - 1] = -1
        return w


@dataclass
class CircuitMatrices:
    """All topology-level data consumed by the coordinate transformation."""

    C: np.ndarray            # node capacitance matrix, F
    Lstar: np.ndarray        # node susceptance matrix, 1/H
    branches: list           # ordered InductiveBranch list
    W: np.ndarray            # stacked w_k rows, int, (n_B, n_N)
    B: np.ndarray            # stacked b_k rows, (n_B, n_L)
    G: np.ndarray            # loop incidence over branches, int, (n_L, n_B)
    C_ed: np.ndarray         # diagonal branch-capacitance matrix, F
    loop_ids: list
    closure_branches: dict   # loop index -> branch index
    tree_branches: set

    @property
    def n_nodes(self) -> int:
        return self.C.shape[0]

    @property
    def n_loops(self) -> int:
        return len(self.loop_ids)


def _branch_direction(i: int, j: int) -> tuple:
    """Orient an edge: ground-adjacent branches point into ground, others
    from the lower to the higher node."""
    if i == 0:
        return (j, 0)
    if j == 0:
        return (i, 0)
    return (min(i, j), max(i, j))


def _stamp(mat: np.ndarray, i: int, j: int, val: float) -> None:
    if i == 0 or j == 0:
        k = i + j
        mat[k - 1, k - 1] += val
    else:
        mat[i - 1, i - 1] += val
        mat[j - 1, j - 1] += val
        mat[i - 1, j - 1] -= val
        mat[j - 1, i - 1] -= val


def build_cap_matrix(spec: CircuitSpec) -> np.ndarray:
    """Node capacitance matrix with parallel capacitors summed per edge;
    parallel caps attached to inductive elements are included."""
    n = spec.n_nodes
    C = np.zeros((n, n))
    for (i, j), elems in sorted(spec.edges.items()):
        total = 0.0
        for e in elems:
            if e.kind == "capacitor":
                total += element_si_value(e)
            elif e.parallel_cap is not None:
                total += element_si_value(e.parallel_cap)
        if total:
            _stamp(C, i, j, total)
    return C


def build_susceptance_matrix(spec: CircuitSpec) -> np.ndarray:
    """Node susceptance (inverse inductance) matrix; junctions contribute
    nothing."""
    n = spec.n_nodes
    L = np.zeros((n, n))
    for (i, j), elems in sorted(spec.edges.items()):
        total = 0.0
        for e in elems:
            if e.kind == "inductor":
                total += 1.0 / element_si_value(e)
        if total:
            _stamp(L, i, j, total)
    return L


def inductive_branches(spec: CircuitSpec, branch_order: str = "default") -> list:
    """Inductive branches in deterministic order: edges sorted by
    (min node, max node), elements in declaration order.  ``branch_order =
    "reversed"`` reverses the enumeration (useful to exercise a different
    spanning tree)."""
    out = []
    for (i, j), elems in sorted(spec.edges.items()):
        tail, head = _branch_direction(i, j)
        for e in elems:
            if e.kind == "capacitor":
                continue
            out.append((tail, head, e))
    if branch_order == "reversed":
        out = out[::-1]
    elif branch_order != "default":
        raise ValueError(f"unknown branch_order '{branch_order}'")
    return [
        InductiveBranch(k, e.kind, (tail, head), element_si_value(e),
                        tuple(e.loops), e)
        for k, (tail, head, e) in enumerate(out)
    ]


def build_spanning_tree(spec: CircuitSpec, branch_order: str = "default"):
    """Spanning tree over the inductive multigraph and the loop bookkeeping.

    Returns ``(branches, W, G, closure)`` where ``closure`` maps each declared
    loop index to its closure branch index.  The tree is grown breadth-first
    from ground (and from the lowest node of any inductive component not
    touching ground), taking branches in their deterministic order, so the
    result is reproducible.  Each loop's incidence row is oriented so that its
    closure branch enters with +1.
    """
    branches = inductive_branches(spec, branch_order)
    n = spec.n_nodes
    W = np.array([b.w_vector(n) for b in branches], dtype=int)
    if W.size == 0:
        W = W.reshape(0, n)

    nodes = {0} | {v for b in branches for v in b.nodes}
    adj = {v: [] for v in nodes}
    for b in branches:
        t, h = b.nodes
        adj[t].append((b.index, h))
        adj[h].append((b.index, t))

    tree = set()
    visited = set()
    for root in sorted(nodes):
        if root in visited:
            continue
        visited.add(root)
        frontier = [root]
        while frontier:
            nxt = []
            for v in frontier:
                for bidx, other in sorted(adj[v]):
                    if other not in visited:
                        visited.add(other)
                        tree.add(bidx)
                        nxt.append(other)
            frontier = nxt
    closure_set = [b.index for b in branches if b.index not in tree]

    loop_ids = [lp.id for lp in spec.loops]
    n_loops = len(loop_ids)
    if len(closure_set) != n_loops:
        raise TransformError(
            f"{len(closure_set)} independent cycle(s) but {n_loops} loop(s) "
            f"declared; every inductive cycle needs exactly one loop")

    members = {lid: [] for lid in loop_ids}
    for b in branches:
        for lid in b.loops:
            if lid not in members:
                raise TransformError(f"dangling loop reference '{lid}'")
            members[lid].append(b.index)

    closure = _match_closure_branches(loop_ids, members, closure_set)

    G = np.zeros((n_loops, len(branches)), dtype=int)
    for li, lid in enumerate(loop_ids):
        G[li] = _orient_loop(branches, members[lid], closure[li])

    if np.any(G @ W != 0):
        raise TransformError("internal error: loop incidence does not "
                             "annihilate the branch flux map (G W != 0)")
    return branches, W, G, closure


def _match_closure_branches(loop_ids, members, closure_set) -> dict:
    """Assign one closure branch to each declared loop (greedy bipartite
    matching, fewest candidates first)."""
    closure_free = set(closure_set)
    candidates = {
        li: [k for k in members[loop_ids[li]] if k in closure_free]
        for li in range(len(loop_ids))
    }
    closure = {}
    for li in sorted(candidates, key=lambda li: len(candidates[li])):
        picks = [k for k in candidates[li] if k in closure_free]
        if not picks:
            raise TransformError(
                f"loop '{loop_ids[li]}' has no closure branch under the "
                f"chosen spanning tree")
        closure[li] = picks[0]
        closure_free.discard(picks[0])
    return closure


def _orient_loop(branches, member_idx, closure_idx) -> np.ndarray:
    """Incidence row for one loop: traverse its cycle starting along the
    closure branch's direction; +1 for branches traversed tail-to-head."""
    g = np.zeros(len(branches), dtype=int)
    incident = {}
    for k in member_idx:
        t, h = branches[k].nodes
        incident.setdefault(t, []).append(k)
        incident.setdefault(h, []).append(k)
    if any(len(v) != 2 for v in incident.values()):
        raise TransformError(
            "loop branches do not form a simple cycle "
            f"(branches {sorted(member_idx)})")

    start_t, start_h = branches[closure_idx].nodes
    g[closure_idx] = 1
    node, prev = start_h, closure_idx
    while node != start_t:
        nxt = [k for k in incident[node] if k != prev]
        if len(nxt) != 1:
            raise TransformError("loop traversal failed; branches do not "
                                 "form a simple cycle")
        k = nxt[0]
        t, h = branches[k].nodes
        g[k] = 1 if t == node else -1
        node = h if t == node else t
        prev = k
    return g


def assign_fluxes_static(spec: CircuitSpec, branches, W, G, closure) -> np.ndarray:
    """Spanning-tree flux assignment: tree branches carry none; each loop's
    closure branch carries that loop's full external flux."""
    n_loops = G.shape[0]
    B = np.zeros((len(branches), n_loops))
    for li, bidx in closure.items():
        B[bidx, li] = 1.0
    if not np.allclose(G @ B, np.eye(n_loops), atol=1e-12):
        # shared closure branches: fall back to the general solve on the
        # closure columns
        cols = [closure[li] for li in range(n_loops)]
        Bc = np.linalg.solve(G[:, cols].astype(float), np.eye(n_loops))
        B[:] = 0.0
        for pos, bidx in enumerate(cols):
            B[bidx] = Bc[pos]
        if not np.allclose(G @ B, np.eye(n_loops), atol=1e-9):
            raise TransformError("could not satisfy G B = I for the "
                                 "declared loops")
    return B


def branch_capacitances(branches) -> np.ndarray:
    caps = np.full(len(branches), DEFAULT_BRANCH_CAP)
    for k, b in enumerate(branches):
        pcap = getattr(b.element, "parallel_cap", None)
        if pcap is not None:
            caps[k] = element_si_value(pcap)
    return caps


def assign_fluxes_timedep(spec: CircuitSpec, branches, W, G,
                          C_ed: np.ndarray) -> np.ndarray:
    """Capacitance-weighted flux distribution: solve

        [W^T C_ed; G] B = [0; I]

    which simultaneously removes flux-velocity cross terms (W^T C_ed B = 0)
    and matches each loop's total flux (G B = I).  Requires the stacked matrix
    to be square, i.e. every node is on the inductive graph.
    """
    n_b = len(branches)
    n_n = W.shape[1]
    n_l = G.shape[0]
    if n_l == 0:
        return np.zeros((n_b, 0))
    if n_b != n_n + n_l:
        raise TransformError(
            f"flux_dist='all' needs one inductive branch per node plus one "
            f"per loop ({n_n + n_l}), found {n_b}; nodes reached only "
            f"through capacitors cannot carry a flux distribution")
    A = np.vstack([W.T @ C_ed, G.astype(float)])
    rhs = np.vstack([np.zeros((n_n, n_l)), np.eye(n_l)])
    # scale the capacitance rows to O(1) before conditioning checks
    row_norm = np.abs(A).max(axis=1)
    if np.any(row_norm == 0):
        dead = int(np.nonzero(row_norm == 0)[0][0])
        raise TransformError(
            f"flux-distribution system is rank deficient (row {dead} is "
            f"zero); a branch with zero capacitance makes it degenerate")
    As = A / row_norm[:, None]
    if np.linalg.cond(As) > 1e12:
        raise TransformError(
            "flux-distribution system is singular or ill-conditioned; check "
            "branch capacitances")
    B = np.linalg.solve(As, rhs / row_norm[:, None])

    scale = np.abs(W.T @ C_ed).max()
    res1 = np.abs(W.T @ C_ed @ B).max()
    res2 = np.abs(G @ B - np.eye(n_l)).max()
    if res1 > FLUX_RESIDUAL_TOL * scale or res2 > FLUX_RESIDUAL_TOL:
        raise TransformError(
            f"flux-distribution residuals too large "
            f"(|W^T C_ed B| = {res1:.2e}, |G B - I| = {res2:.2e})")
    return B


def build_matrices(spec: CircuitSpec, branch_order: str = "default") -> CircuitMatrices:
    """Full topology pass over a validated spec."""
    C = build_cap_matrix(spec)
    Lstar = build_susceptance_matrix(spec)
    branches, W, G, closure = build_spanning_tree(spec, branch_order)
    C_ed = np.diag(branch_capacitances(branches))
    if spec.flux_dist == "all":
        B = assign_fluxes_timedep(spec, branches, W, G, C_ed)
    else:
        B = assign_fluxes_static(spec, branches, W, G, closure)
    tree = {b.index for b in branches} - set(closure.values())
    return CircuitMatrices(C=C, Lstar=Lstar, branches=branches, W=W, B=B,
                           G=G, C_ed=C_ed, loop_ids=[lp.id for lp in spec.loops],
                           closure_branches=closure, tree_branches=tree)


def external_phases(spec: CircuitSpec, reduce_mod_2pi: bool = None) -> np.ndarray:
    """Loop fluxes as phases (radians).  Under the spanning-tree assignment
    phases are reduced mod 2pi, which keeps spectra exactly periodic in Phi0
    even when a linear inductor ends up on a closure branch."""
    phi = 2.0 * np.pi * np.array([lp.external_flux for lp in spec.loops])
    if reduce_mod_2pi is None:
        reduce_mod_2pi = spec.flux_dist == "junctions"
    if reduce_mod_2pi and phi.size:
        phi = np.mod(phi, 2.0 * np.pi)
    return phi
