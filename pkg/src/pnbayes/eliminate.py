"""Generalized variable elimination over modular Bayesian networks.

Evaluation is phrased over factors: one table per node on its source and
target wires.  Internal wires are summed out one at a time; eliminating a
wire multiplies the factors containing it and sums it away, and the final
product over the surviving factors, read at the external wires, is the
network's matrix.  The width of an elimination order (the largest factor
the order can force) is tracked alongside, together with the elimination
graph, fill-in, the min-degree heuristic, tree-decomposition checking and
the term-width calculus for compositional expressions.

Three optimizations from the evaluation-scheduling playbook are available
and used by the query layer: diagonal nodes merge their input/output wires
into equivalence classes instead of doubling factor arity, node outputs
that nobody reads are pre-summed at construction, and point-mass source
nodes pin their wires to constants so factors shrink by slicing.

Nodes whose factor would not fit in memory (sparse update matrices over
many wires) are never tabulated.  The scheduler keeps them as matrices and
contracts each in a single grouped step: the dense factors touching its
input wires are joined, reshaped into a block per input assignment, and
pushed through the matrix as one sparse-times-dense product.  Everything
below the size threshold runs through the ordinary one-wire-at-a-time
eliminator.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np
import scipy.sparse as sp

from . import kernels
from .bitmatrix import TypedMatrix
from .causality import (CausalityGraph, Generator, Wire, seq, tensor,
                        wiring_duplicate, wiring_identity, wiring_swap,
                        wiring_terminate, node_graph)
from .errors import BadOrder, TooLarge, TypeMismatch, ValidationError
from .mbn import MBN

POINT_EPS = 1e-12
MAX_FACTOR_BITS = kernels.MAX_CONTRACT_BITS
# node factors over more live wires than this are never tabulated; they stay
# sparse matrices and are contracted by one grouped step each
BULK_NODE_BITS = 20
# once a run escalates to grouped contraction, every node over this many live
# wires goes the grouped route, so the pool keeps only small tables and the
# schedule follows the wiring order
GROUP_NODE_BITS = 6


# -- factors ------------------------------------------------------------------

@dataclass(frozen=True)
class Factor:
    """A table over a duplicate-free, ascending wire tuple.

    The first wire indexes the most significant bit of the flat table.
    """

    wires: tuple[Wire, ...]
    table: np.ndarray

    def __post_init__(self):
        if len(set(self.wires)) != len(self.wires):
            raise ValidationError("factor wires contain duplicates")
        if tuple(sorted(self.wires)) != self.wires:
            raise ValidationError("factor wires must be sorted ascending")
        if self.table.shape != (1 << len(self.wires),):
            raise ValidationError("factor table size does not match wires")

    @property
    def size(self) -> int:
        return len(self.wires)

    def entry(self, bits: int) -> float:
        return float(self.table[bits])


def _graph_of(net: MBN | CausalityGraph) -> CausalityGraph:
    return net.graph if isinstance(net, MBN) else net


# -- elimination graphs and orders -------------------------------------------

class ElimGraph:
    """Undirected wire adjacency with fill-in under elimination."""

    def __init__(self, vertices: Iterable[Wire],
                 scopes: Iterable[Iterable[Wire]]):
        self.adj: dict[Wire, set[Wire]] = {w: set() for w in vertices}
        for scope in scopes:
            sc = list(scope)
            for w in sc:
                self.adj.setdefault(w, set())
            for i, a in enumerate(sc):
                for b in sc[i + 1:]:
                    if a != b:
                        self.adj[a].add(b)
                        self.adj[b].add(a)

    def neighbors(self, w: Wire) -> set[Wire]:
        return self.adj[w]

    def eliminate(self, w: Wire) -> tuple[Wire, ...]:
        """Remove ``w``, connecting its neighbourhood into a clique."""
        around = sorted(self.adj.pop(w))
        for a in around:
            self.adj[a].discard(w)
        for i, a in enumerate(around):
            for b in around[i + 1:]:
                self.adj[a].add(b)
                self.adj[b].add(a)
        return tuple(around)


@dataclass(frozen=True)
class ElimOrder:
    """A sequence of internal wires together with its recorded width."""

    wires: tuple[Wire, ...]
    width: int


def _order_problems(order: Sequence[Wire],
                    internal: Iterable[Wire]) -> list[str]:
    errors = []
    seen = set()
    internal = set(internal)
    for w in order:
        if w in seen:
            errors.append(f"wire {w} eliminated twice")
        seen.add(w)
        if w not in internal:
            errors.append(f"wire {w} is not internal")
    for w in sorted(internal - seen):
        errors.append(f"internal wire {w} missing from the order")
    return errors


def _scope_width(scopes: Iterable[Iterable[Wire]]) -> int:
    return max((len(set(s)) for s in scopes), default=0)


def _replay_width(vertices, scopes, order: Sequence[Wire]) -> int:
    graph = ElimGraph(vertices, scopes)
    width = _scope_width(scopes)
    for w in order:
        width = max(width, len(graph.neighbors(w)))
        graph.eliminate(w)
    return width


def _greedy_order(vertices, scopes, internal: Iterable[Wire],
                  prefix: Sequence[Wire] = ()) -> ElimOrder:
    """Min-degree greedy elimination, smallest wire id breaking ties.

    Wires in ``prefix`` are eliminated first, in the given order.
    """
    graph = ElimGraph(vertices, scopes)
    width = _scope_width(scopes)
    order: list[Wire] = []
    remaining = set(internal)
    for w in prefix:
        width = max(width, len(graph.neighbors(w)))
        graph.eliminate(w)
        order.append(w)
        remaining.discard(w)
    while remaining:
        w = min(remaining, key=lambda x: (len(graph.neighbors(x)), x))
        width = max(width, len(graph.neighbors(w)))
        graph.eliminate(w)
        order.append(w)
        remaining.remove(w)
    return ElimOrder(tuple(order), width)


def _node_scopes(graph: CausalityGraph) -> list[frozenset[Wire]]:
    return [frozenset(graph.scope(v)) for v in range(graph.node_count)]


def min_degree_order(net: MBN | CausalityGraph) -> ElimOrder:
    """Greedy min-degree order over the internal wires."""
    graph = _graph_of(net)
    return _greedy_order(graph.wires(), _node_scopes(graph),
                         graph.internal_wires())


def order_width(net: MBN | CausalityGraph,
                order: ElimOrder | Sequence[Wire]) -> int:
    """Replay ``order`` and report the largest factor it can force: the
    maximum of the initial node scopes and of each eliminated wire's
    filled neighbourhood."""
    graph = _graph_of(net)
    wires = order.wires if isinstance(order, ElimOrder) else tuple(order)
    problems = _order_problems(wires, graph.internal_wires())
    if problems:
        raise BadOrder("; ".join(problems))
    return _replay_width(graph.wires(), _node_scopes(graph), wires)


def elimination_width_exact(net: MBN | CausalityGraph,
                            limit: int = 8) -> int:
    """Minimum width over all elimination orders (factorial search)."""
    graph = _graph_of(net)
    internal = graph.internal_wires()
    if len(internal) > limit:
        raise TooLarge(f"{len(internal)} internal wires exceed the "
                       f"brute-force guard ({limit})")
    vertices = graph.wires()
    scopes = _node_scopes(graph)
    best = None
    for perm in itertools.permutations(internal):
        w = _replay_width(vertices, scopes, perm)
        if best is None or w < best:
            best = w
    return best if best is not None else _scope_width(scopes)


# -- union-find for diagonal wire merging -------------------------------------

class _UnionFind:
    def __init__(self):
        self.parent: dict[Wire, Wire] = {}

    def find(self, w: Wire) -> Wire:
        root = w
        while self.parent.get(root, root) != root:
            root = self.parent[root]
        while self.parent.get(w, w) != w:
            self.parent[w], w = root, self.parent[w]
        return root

    def union(self, a: Wire, b: Wire) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        # keep the smallest wire as the class representative
        if rb < ra:
            ra, rb = rb, ra
        self.parent[rb] = ra


# -- factor construction ------------------------------------------------------

def _gather_positions(stream, pinned):
    """Shared consistency machinery: ``stream`` yields (wire, bits) pairs.

    Returns (sorted unique unpinned wires, flat index array, keep mask).
    Repeated wires must agree bitwise; pinned wires must match their pin.
    """
    pairs = list(stream)
    unique = sorted({w for w, _ in pairs if w not in pinned})
    shift = {w: len(unique) - 1 - k for k, w in enumerate(unique)}
    if len(unique) > MAX_FACTOR_BITS:
        raise TooLarge(f"factor over {len(unique)} wires exceeds the "
                       f"2^{MAX_FACTOR_BITS} guard")
    flat = None
    ok = None
    seen: dict[Wire, np.ndarray] = {}
    for w, bits in pairs:
        if w in pinned:
            cond = bits == pinned[w]
            ok = cond if ok is None else ok & cond
            continue
        if w in seen:
            cond = bits == seen[w]
            ok = cond if ok is None else ok & cond
            continue
        seen[w] = bits
        term = bits.astype(np.int64) << shift[w]
        flat = term if flat is None else flat | term
    return unique, flat, ok


def _node_factor(mat: TypedMatrix, src: tuple[Wire, ...],
                 tgt: tuple[Wire, ...], live: Sequence[bool],
                 pinned: dict[Wire, int]) -> Factor:
    """Build a node's factor over its source wires and live target wires.

    Dead target wires (read by nobody, not outputs) are summed out on the
    fly; the construction walks the matrix nonzeros, so large sparse
    updates never materialize a dense table over all their wires.
    """
    n, m = mat.in_arity, mat.out_arity
    coo = mat.to_sparse().tocoo()
    rows, cols, vals = coo.row, coo.col, coo.data

    def stream():
        for j, w in enumerate(src):
            yield w, (cols >> (n - 1 - j)) & 1
        for p, w in enumerate(tgt, start=1):
            if live[p - 1]:
                yield w, (rows >> (m - p)) & 1

    unique, flat, ok = _gather_positions(stream(), pinned)
    if ok is not None:
        vals = np.where(ok, vals, 0.0)
    if flat is None:
        flat = np.zeros(vals.shape[0], dtype=np.int64)
    table = np.bincount(flat, weights=vals, minlength=1 << len(unique))
    return Factor(tuple(unique), table)


def _diagonal_factor(mat: TypedMatrix, pairs: tuple[Wire, ...],
                     pinned: dict[Wire, int]) -> Factor:
    """The merged-wire factor of a diagonal node: one wire per in/out pair,
    weighted by the diagonal."""
    ell = mat.in_arity
    diag = mat.diag_vector()
    idx = np.arange(1 << ell, dtype=np.int64)

    def stream():
        for j, w in enumerate(pairs):
            yield w, (idx >> (ell - 1 - j)) & 1

    unique, flat, ok = _gather_positions(stream(), pinned)
    vals = diag if ok is None else np.where(ok, diag, 0.0)
    if flat is None:
        flat = np.zeros(vals.shape[0], dtype=np.int64)
    table = np.bincount(flat, weights=vals, minlength=1 << len(unique))
    return Factor(tuple(unique), table)


# -- prepared elimination problems --------------------------------------------

@dataclass
class ElimStats:
    """Bookkeeping of one elimination run."""

    max_factor_wires: int = 0
    contractions: int = 0

    def track(self, size: int) -> None:
        if size > self.max_factor_wires:
            self.max_factor_wires = size


@dataclass(frozen=True)
class _LazyNode:
    """A node kept as a matrix because its factor table would be too big.

    Wire tuples are representative classes; dead targets carry live=False
    and are summed away when the matrix is reduced at application time.
    """

    mat: TypedMatrix
    src: tuple[Wire, ...]
    tgt: tuple[Wire, ...]
    live: tuple[bool, ...]


@dataclass
class _Problem:
    factors: list[Factor]
    rep: dict[Wire, Wire]
    internal: tuple[Wire, ...]
    ext_slots: tuple[Wire, ...]
    pinned: dict[Wire, int]
    zero: bool
    in_arity: int
    out_arity: int
    source_wires: tuple[Wire, ...]
    lazy: tuple[_LazyNode, ...] = ()

    def vertices(self):
        verts = set(self.ext_slots)
        for f in self.factors:
            verts.update(f.wires)
        return verts

    def scopes(self):
        return [frozenset(f.wires) for f in self.factors]


def _is_point_mass(mat: TypedMatrix) -> int | None:
    """The unique output bitstring of a point-mass source, else None."""
    if mat.in_arity != 0:
        return None
    if mat.is_sparse:
        coo = mat.to_sparse().tocoo()
        heavy = np.flatnonzero(coo.data > POINT_EPS)
        if heavy.shape[0] == 1 and abs(coo.data[heavy[0]] - 1) <= POINT_EPS:
            return int(coo.row[heavy[0]])
        return None
    col = mat.diag_vector() if mat.is_diagonal else mat.to_dense()[:, 0]
    heavy = np.flatnonzero(col > POINT_EPS)
    if heavy.shape[0] == 1 and abs(col[heavy[0]] - 1) <= POINT_EPS:
        return int(heavy[0])
    return None


def _prepare(net: MBN, merge_diagonal: bool, fold: bool, pin: bool,
             bulk_bits: int | None = None) -> _Problem:
    graph = net.graph
    uf = _UnionFind()
    diagonal_nodes = set()
    if merge_diagonal:
        for v in range(graph.node_count):
            mat = net.matrix(graph.gens[v].name)
            if mat.is_diagonal and mat.in_arity > 0:
                diagonal_nodes.add(v)
                for j, w in enumerate(graph.sources[v]):
                    uf.union(w, Wire(v, j + 1))
    rep = {w: uf.find(w) for w in graph.wires()}

    pinned: dict[Wire, int] = {}
    zero = False
    skipped = set()
    if pin:
        for v in range(graph.node_count):
            if v in diagonal_nodes or graph.gens[v].in_arity != 0:
                continue
            mat = net.matrix(graph.gens[v].name)
            point = _is_point_mass(mat)
            if point is None:
                continue
            skipped.add(v)
            m = graph.gens[v].out_arity
            for p in range(1, m + 1):
                bit = (point >> (m - p)) & 1
                w = rep[Wire(v, p)]
                if pinned.setdefault(w, bit) != bit:
                    zero = True

    consumed = {rep[w] for v in range(graph.node_count)
                if v not in skipped
                for w in graph.sources[v]}
    consumed |= {rep[w] for w in graph.out}

    factors: list[Factor] = []
    lazy: list[_LazyNode] = []
    for v in range(graph.node_count):
        if v in skipped:
            continue
        gen = graph.gens[v]
        mat = net.matrix(gen.name)
        src = tuple(rep[w] for w in graph.sources[v])
        if v in diagonal_nodes:
            factors.append(_diagonal_factor(mat, src, pinned))
            continue
        tgt = tuple(rep[Wire(v, p)] for p in range(1, gen.out_arity + 1))
        live = tuple(not fold or w in consumed for w in tgt)
        if bulk_bits is not None:
            scope = {w for w in src if w not in pinned}
            scope.update(w for w, alive in zip(tgt, live)
                         if alive and w not in pinned)
            if len(scope) > bulk_bits:
                lazy.append(_LazyNode(mat, src, tgt, live))
                continue
        factors.append(_node_factor(mat, src, tgt, live, pinned))

    ext_slots = tuple(rep[w] for w in graph.inputs()) + \
        tuple(rep[w] for w in graph.out)
    external = set(ext_slots)
    in_factors = set()
    for f in factors:
        in_factors.update(f.wires)
    for node in lazy:
        in_factors.update(w for w in node.src if w not in pinned)
        in_factors.update(w for w, alive in zip(node.tgt, node.live)
                          if alive and w not in pinned)
    internal = tuple(sorted(
        w for w in in_factors if w not in external and w not in pinned))
    internal_set = set(internal)
    from_sources = set()
    for v in range(graph.node_count):
        if graph.gens[v].in_arity != 0 or v in skipped:
            continue
        for p in range(1, graph.gens[v].out_arity + 1):
            w = rep[Wire(v, p)]
            if w in internal_set:
                from_sources.add(w)
    return _Problem(factors, rep, internal, ext_slots, pinned, zero,
                    graph.in_arity, graph.out_arity,
                    tuple(sorted(from_sources)), tuple(lazy))


# -- running an elimination ---------------------------------------------------

def _contract(group: list[Factor], z: Wire, stats: ElimStats) -> Factor:
    union: set[Wire] = set()
    for f in group:
        union.update(f.wires)
    union.discard(z)
    out_wires = tuple(sorted(union))
    slot = {w: k for k, w in enumerate(out_wires)}
    slot[z] = len(out_wires)
    tables = [f.table for f in group]
    slots = [tuple(slot[w] for w in f.wires) for f in group]
    table = kernels.sum_product_pair(tables, slots, len(out_wires))
    stats.contractions += 1
    out = Factor(out_wires, table)
    stats.track(out.size)
    return out


def _run(factors: list[Factor], order: Sequence[Wire],
         stats: ElimStats) -> list[Factor]:
    factors = list(factors)
    done = set()
    for z in order:
        if z in done:
            continue
        done.add(z)
        group = [f for f in factors if z in f.wires]
        factors = [f for f in factors if z not in f.wires]
        if not group:
            # a wire constrained by nothing sums to 2 over its two values
            factors.append(Factor((), np.array([2.0])))
            continue
        factors.append(_contract(group, z, stats))
    return factors


def _join(group: list[Factor], wires: tuple[Wire, ...]) -> np.ndarray:
    """Pointwise product of the factors, broadcast over ``wires``."""
    if len(wires) > MAX_FACTOR_BITS:
        raise TooLarge(f"joined factor over {len(wires)} wires exceeds "
                       f"the 2^{MAX_FACTOR_BITS} guard")
    slot = {w: k for k, w in enumerate(wires)}
    acc = None
    for f in group:
        sl = [slot[w] for w in f.wires]
        axes = sorted(range(len(sl)), key=lambda a: sl[a])
        view = f.table.reshape((2,) * len(sl))
        if axes != list(range(len(sl))):
            view = view.transpose(axes)
        shape = [1] * len(wires)
        for s in sl:
            shape[s] = 2
        view = view.reshape(shape)
        acc = view if acc is None else acc * view
    if acc is None:
        return np.ones(1 << len(wires))
    return np.ascontiguousarray(
        np.broadcast_to(acc, (2,) * len(wires))).ravel()


def _reduced_matrix(node: _LazyNode, pinned: dict[Wire, int]
                    ) -> tuple[tuple[Wire, ...], tuple[Wire, ...],
                               sp.csr_matrix]:
    """The node's matrix as rows over live targets, columns over sources.

    Dead targets are summed out and pinned wires sliced away, both by
    accumulating coordinate duplicates; wires index bits in ascending
    order on each side.
    """
    n, m = node.mat.in_arity, node.mat.out_arity
    coo = node.mat.to_sparse().tocoo()
    rows, cols, vals = coo.row, coo.col, coo.data

    def src_stream():
        for j, w in enumerate(node.src):
            yield w, (cols >> (n - 1 - j)) & 1

    def tgt_stream():
        for p, w in enumerate(node.tgt, start=1):
            if node.live[p - 1]:
                yield w, (rows >> (m - p)) & 1

    ins, col_flat, ok_c = _gather_positions(src_stream(), pinned)
    outs, row_flat, ok_r = _gather_positions(tgt_stream(), pinned)
    keep = np.ones(vals.shape[0], dtype=bool)
    if ok_c is not None:
        keep &= ok_c
    if ok_r is not None:
        keep &= ok_r
    if col_flat is None:
        col_flat = np.zeros(vals.shape[0], dtype=np.int64)
    if row_flat is None:
        row_flat = np.zeros(vals.shape[0], dtype=np.int64)
    reduced = sp.coo_matrix(
        (vals[keep], (row_flat[keep], col_flat[keep])),
        shape=(1 << len(outs), 1 << len(ins))).tocsr()
    return tuple(ins), tuple(outs), reduced


def _apply_lazy(node: _LazyNode, factors: list[Factor],
                pinned: dict[Wire, int], stats: ElimStats
                ) -> tuple[list[Factor], tuple[Wire, ...]]:
    """Contract one oversized node in a single grouped step.

    Joins the factors meeting the node's inputs, sums all inputs out
    through the reduced matrix and returns the surviving factors plus the
    wires this step eliminated.
    """
    ins, outs, reduced = _reduced_matrix(node, pinned)
    in_set = set(ins)
    touched = [f for f in factors if in_set.intersection(f.wires)]
    rest = [f for f in factors if not in_set.intersection(f.wires)]
    scope = set(in_set)
    for f in touched:
        scope.update(f.wires)
    passthrough = tuple(sorted(scope - in_set))
    # join with inputs leading so each input assignment indexes one block
    joined_wires = ins + passthrough
    joined = _join(touched, joined_wires)
    stats.track(len(joined_wires))
    stats.contractions += 1
    block = joined.reshape(1 << len(ins), -1)
    result = np.asarray(reduced @ block)
    stats.track(len(outs) + len(passthrough))

    # read the product back over the deduplicated result wires; a wire on
    # both sides (target merged into a passthrough class) must agree, so
    # duplicated axes collapse onto their diagonal (views throughout, one
    # materialization at the end)
    axis_wires = list(outs) + list(passthrough)
    view = result.reshape((2,) * len(axis_wires))
    while len(set(axis_wires)) != len(axis_wires):
        seen: dict[Wire, int] = {}
        for a, w in enumerate(axis_wires):
            if w in seen:
                view = np.diagonal(view, axis1=seen[w], axis2=a)
                del axis_wires[a], axis_wires[seen[w]]
                axis_wires.append(w)
                break
            seen[w] = a
    order = sorted(range(len(axis_wires)), key=lambda a: axis_wires[a])
    wires = tuple(sorted(axis_wires))
    rest.append(Factor(wires, np.ascontiguousarray(
        view.transpose(order)).ravel()))
    return rest, ins


def _sweep_confined(factors: list[Factor], protected: set[Wire],
                    eliminated: list[Wire]) -> list[Factor]:
    """Sum out unprotected wires confined to a single factor.

    Each grouped step strands wires whose every reader has already fired;
    marginalizing them inside their own factor keeps later joins from
    dragging the dead scope along.
    """
    count: dict[Wire, int] = {}
    for f in factors:
        for w in f.wires:
            count[w] = count.get(w, 0) + 1
    swept: list[Factor] = []
    for f in factors:
        dead = [w for w in f.wires if count[w] == 1 and w not in protected]
        if not dead:
            swept.append(f)
            continue
        axes = tuple(f.wires.index(w) for w in dead)
        table = f.table.reshape((2,) * f.size).sum(axis=axes).ravel()
        kept = tuple(w for w in f.wires if w not in dead)
        swept.append(Factor(kept, table))
        eliminated.extend(dead)
    return swept


def _run_hybrid(problem: _Problem, stats: ElimStats
                ) -> tuple[list[Factor], tuple[Wire, ...]]:
    """Grouped contraction of the oversized nodes, in wiring order, then
    ordinary min-degree elimination of whatever wires remain."""
    external = set(problem.ext_slots)
    pinned = problem.pinned
    # a grouped step sums out every input at once, so it must own them:
    # nodes reading external wires or wires another oversized node also
    # reads fall back to a table (the factor guard rules on feasibility)
    grouped: list[_LazyNode] = []
    demoted: list[Factor] = []
    taken: set[Wire] = set()
    for node in problem.lazy:
        ins = {w for w in node.src if w not in pinned}
        if ins & external or ins & taken:
            demoted.append(_node_factor(node.mat, node.src, node.tgt,
                                        node.live, pinned))
            continue
        taken |= ins
        grouped.append(node)
    factors = list(problem.factors) + demoted
    for f in factors:
        stats.track(f.size)
    eliminated: list[Wire] = []
    for i, node in enumerate(grouped):
        protected = set(external)
        for later in grouped[i:]:
            protected.update(w for w in later.src if w not in pinned)
            protected.update(w for w, alive in zip(later.tgt, later.live)
                             if alive and w not in pinned)
        factors = _sweep_confined(factors, protected, eliminated)
        factors, consumed = _apply_lazy(node, factors, problem.pinned,
                                        stats)
        eliminated.extend(consumed)
    factors = _sweep_confined(factors, external, eliminated)
    done = set(eliminated)
    remaining = tuple(w for w in problem.internal if w not in done)
    verts = set(external)
    scopes = []
    for f in factors:
        verts.update(f.wires)
        scopes.append(frozenset(f.wires))
    prefix = tuple(w for w in problem.source_wires if w not in done)
    plan = _greedy_order(verts, scopes, remaining, prefix=prefix)
    factors = _run(factors, plan.wires, stats)
    eliminated.extend(plan.wires)
    return factors, tuple(eliminated)


def _combine(problem: _Problem, factors: list[Factor]) -> TypedMatrix:
    n, m = problem.in_arity, problem.out_arity
    total_bits = n + m
    if total_bits > MAX_FACTOR_BITS:
        raise TooLarge(f"result over {total_bits} wires exceeds the "
                       f"2^{MAX_FACTOR_BITS} guard")
    size = 1 << total_bits
    if problem.zero:
        return TypedMatrix(n, m,
                           dense=np.zeros((1 << m, 1 << n)), check=False)
    space = np.arange(size, dtype=np.int64)
    # flat result index: output bits (most significant) then input bits
    slot_bits: dict[Wire, np.ndarray] = {}
    mask = np.ones(size, dtype=bool)
    positions = list(problem.ext_slots[n:]) + list(problem.ext_slots[:n])
    for k, w in enumerate(positions):
        bits = (space >> (total_bits - 1 - k)) & 1
        if w in problem.pinned:
            mask &= bits == problem.pinned[w]
        elif w in slot_bits:
            mask &= bits == slot_bits[w]
        else:
            slot_bits[w] = bits
    values = mask.astype(np.float64)
    for f in factors:
        idx = np.zeros(size, dtype=np.int64)
        for a, w in enumerate(f.wires):
            if w in problem.pinned:
                # already sliced away during construction
                raise ValidationError("pinned wire survived elimination")
            if w not in slot_bits:
                raise BadOrder(f"internal wire {w} was never eliminated")
            idx |= slot_bits[w] << (f.size - 1 - a)
        values = values * f.table[idx]
    return TypedMatrix(n, m, dense=values.reshape(1 << m, 1 << n),
                       check=False)


def initial_factors(net: MBN, merge_diagonal: bool = False) -> list[Factor]:
    """One factor per node; with ``merge_diagonal`` the diagonal-flagged
    nodes contribute a half-arity factor over merged wire classes."""
    return _prepare(net, merge_diagonal, fold=False, pin=False).factors


def run_elimination_stats(net: MBN, order: ElimOrder | Sequence[Wire],
                          merge_diagonal: bool = False
                          ) -> tuple[TypedMatrix, ElimStats]:
    graph = net.graph
    wires = order.wires if isinstance(order, ElimOrder) else tuple(order)
    problems = _order_problems(wires, graph.internal_wires())
    if problems:
        raise BadOrder("; ".join(problems))
    problem = _prepare(net, merge_diagonal, fold=False, pin=False)
    internal = set(problem.internal)
    rep_order = [problem.rep[w] for w in wires
                 if problem.rep[w] in internal]
    stats = ElimStats()
    for f in problem.factors:
        stats.track(f.size)
    left = _run(problem.factors, rep_order, stats)
    return _combine(problem, left), stats


def run_elimination(net: MBN, order: ElimOrder | Sequence[Wire],
                    merge_diagonal: bool = False) -> TypedMatrix:
    """Eliminate the internal wires in ``order`` and return the matrix.

    Agrees with naive evaluation on every valid order; the order must
    cover the internal wires exactly.
    """
    return run_elimination_stats(net, order, merge_diagonal)[0]


def scheduled_eliminate(net: MBN, order: Sequence[Wire] | None = None,
                        merge_diagonal: bool = True, fold: bool = True,
                        pin: bool = True, bulk_bits: int = BULK_NODE_BITS
                        ) -> tuple[TypedMatrix, ElimOrder, ElimStats]:
    """The query path: fold dead outputs, merge diagonal wires, pin point
    masses, then eliminate source wires first and the rest by min-degree
    (or by the caller-supplied order over the prepared problem's wires).

    Nodes whose factor would span more than ``bulk_bits`` live wires are
    never tabulated.  When such a node exists, or when no tabulated
    min-degree run would fit the factor guard, the run escalates: every
    node over GROUP_NODE_BITS live wires is kept as a sparse matrix and
    contracted in one grouped step, in wiring order.  The returned order
    then lists the wires in the sequence actually summed out and reports
    the realized width (the widest table the run produced).
    """
    problem = _prepare(net, merge_diagonal, fold, pin, bulk_bits=bulk_bits)
    stats = ElimStats()
    if order is not None:
        if problem.lazy:
            raise TooLarge(
                "an explicit order cannot eliminate nodes too large to "
                "tabulate; raise bulk_bits or use the default schedule")
        wires = tuple(order)
        problems = _order_problems(wires, problem.internal)
        if problems:
            raise BadOrder("; ".join(problems))
        plan = ElimOrder(wires, _replay_width(problem.vertices(),
                                              problem.scopes(), wires))
        for f in problem.factors:
            stats.track(f.size)
        left = _run(problem.factors, plan.wires, stats)
        return _combine(problem, left), plan, stats
    if not problem.lazy:
        plan = _greedy_order(problem.vertices(), problem.scopes(),
                             problem.internal, prefix=problem.source_wires)
        # width counts a factor's wires after the sum-out; the contraction
        # in flight holds one more, so a plan at the guard must escalate
        if plan.width < MAX_FACTOR_BITS:
            for f in problem.factors:
                stats.track(f.size)
            left = _run(problem.factors, plan.wires, stats)
            return _combine(problem, left), plan, stats
    problem = _prepare(net, merge_diagonal, fold, pin,
                       bulk_bits=min(bulk_bits, GROUP_NODE_BITS))
    if problem.zero:
        return _combine(problem, []), ElimOrder((), 0), stats
    left, sequence = _run_hybrid(problem, stats)
    plan = ElimOrder(sequence, stats.max_factor_wires)
    return _combine(problem, left), plan, stats


# -- tree decompositions ------------------------------------------------------

@dataclass(frozen=True)
class TreeDecomposition:
    """Bags of wires on an (undirected) tree, given as bag list plus edges
    between bag indices."""

    bags: tuple[frozenset[Wire], ...]
    edges: tuple[tuple[int, int], ...]


def validate_tree_decomposition(net: MBN | CausalityGraph,
                                td: TreeDecomposition) -> int:
    """Check the decomposition conditions; return max bag size minus one.

    Raises with the violated condition: (1) the bag graph is a tree,
    (2) every wire is covered, (3) every node's scope fits in one bag,
    (4) each wire's bags form a subtree.
    """
    graph = _graph_of(net)
    nb = len(td.bags)
    adj: dict[int, set[int]] = {i: set() for i in range(nb)}
    for a, b in td.edges:
        if not (0 <= a < nb and 0 <= b < nb) or a == b:
            raise ValidationError(f"condition 1: bad edge ({a}, {b})")
        adj[a].add(b)
        adj[b].add(a)
    if len(td.edges) != max(nb - 1, 0):
        raise ValidationError("condition 1: edge count is not bags - 1")
    if nb:
        seen = {0}
        queue = [0]
        while queue:
            for j in adj[queue.pop()]:
                if j not in seen:
                    seen.add(j)
                    queue.append(j)
        if len(seen) != nb:
            raise ValidationError("condition 1: bag graph is disconnected")
    covered = set().union(*td.bags) if nb else set()
    for w in graph.wires():
        if w not in covered:
            raise ValidationError(f"condition 2: wire {w} in no bag")
    for v in range(graph.node_count):
        scope = set(graph.scope(v))
        if not any(scope <= bag for bag in td.bags):
            raise ValidationError(
                f"condition 3: node {v}'s wires fit in no bag")
    for w in covered:
        holding = [i for i, bag in enumerate(td.bags) if w in bag]
        inside = set(holding)
        seen = {holding[0]}
        queue = [holding[0]]
        while queue:
            for j in adj[queue.pop()]:
                if j in inside and j not in seen:
                    seen.add(j)
                    queue.append(j)
        if len(seen) != len(holding):
            raise ValidationError(
                f"condition 4: bags containing {w} are not connected")
    return max((len(bag) for bag in td.bags), default=0) - 1


def tree_decomposition_from_order(net: MBN | CausalityGraph,
                                  order: ElimOrder | Sequence[Wire]
                                  ) -> TreeDecomposition:
    """The decomposition an elimination order induces: one bag per wire,
    holding the wire plus its filled neighbourhood at elimination time.

    The order covers the internal wires; external wires are appended
    greedily to complete the elimination.
    """
    graph = _graph_of(net)
    wires = order.wires if isinstance(order, ElimOrder) else tuple(order)
    problems = _order_problems(wires, graph.internal_wires())
    if problems:
        raise BadOrder("; ".join(problems))
    g = ElimGraph(graph.wires(), _node_scopes(graph))
    full_order = list(wires)
    # replay the internal part, then extend min-degree over the externals
    shadow = ElimGraph(graph.wires(), _node_scopes(graph))
    for w in wires:
        shadow.eliminate(w)
    remaining = set(graph.wires()) - set(wires)
    while remaining:
        w = min(remaining, key=lambda x: (len(shadow.neighbors(x)), x))
        shadow.eliminate(w)
        remaining.remove(w)
        full_order.append(w)
    position = {w: i for i, w in enumerate(full_order)}
    bags = []
    parents: list[int | None] = []
    for w in full_order:
        around = g.eliminate(w)
        bags.append(frozenset((w,) + around))
        parents.append(min((position[u] for u in around), default=None))
    edges = []
    roots = [i for i, p in enumerate(parents) if p is None]
    edges.extend((i, p) for i, p in enumerate(parents) if p is not None)
    edges.extend(zip(roots, roots[1:]))
    return TreeDecomposition(tuple(bags), tuple(edges))


# -- terms and term width -----------------------------------------------------

@dataclass(frozen=True)
class GenT:
    gen: Generator


@dataclass(frozen=True)
class ConstT:
    kind: str  # id | dup | swap | term
    n: int


@dataclass(frozen=True)
class SeqT:
    first: "Term"
    second: "Term"


@dataclass(frozen=True)
class TensorT:
    first: "Term"
    second: "Term"


Term = Union[GenT, ConstT, SeqT, TensorT]

_CONST_TYPES = {
    "id": lambda n: (n, n),
    "dup": lambda n: (n, 2 * n),
    "swap": lambda n: (2 * n, 2 * n),
    "term": lambda n: (n, 0),
}


def term_type(t: Term) -> tuple[int, int]:
    if isinstance(t, GenT):
        return t.gen.in_arity, t.gen.out_arity
    if isinstance(t, ConstT):
        if t.kind not in _CONST_TYPES:
            raise ValidationError(f"unknown constant kind {t.kind!r}")
        if t.n < 0 or (t.n == 0 and t.kind != "id"):
            raise ValidationError(f"bad constant arity {t.n}")
        return _CONST_TYPES[t.kind](t.n)
    n1, m1 = term_type(t.first)
    n2, m2 = term_type(t.second)
    if isinstance(t, SeqT):
        if m1 != n2:
            raise TypeMismatch(
                f"cannot compose {m1} outputs into {n2} inputs")
        return n1, m2
    return n1 + n2, m1 + m2


def term_width(t: Term) -> int:
    """The largest matrix type a term evaluation passes through."""
    n, m = term_type(t)
    if isinstance(t, (GenT, ConstT)):
        return n + m
    return max(term_width(t.first), term_width(t.second), n + m)


def term_graph(t: Term) -> CausalityGraph:
    return _build_term(t)[0]


def _build_term(t: Term) -> tuple[CausalityGraph, list[Wire]]:
    if isinstance(t, GenT):
        return node_graph(t.gen), []
    if isinstance(t, ConstT):
        term_type(t)  # validates
        maker = {"id": wiring_identity, "dup": wiring_duplicate,
                 "term": wiring_terminate,
                 "swap": lambda n: wiring_swap(n, n)}[t.kind]
        return maker(t.n), []
    g1, o1 = _build_term(t.first)
    g2, o2 = _build_term(t.second)
    shift = g1.node_count
    o2 = [Wire(w.node + shift, w.port) for w in o2]
    if isinstance(t, TensorT):
        return tensor(g1, g2), o1 + o2
    composite = seq(g1, g2)
    out_set = set(composite.out)
    mids: list[Wire] = []
    seen: set[Wire] = set()
    for w in g1.out:
        if w.node < 0 or w in out_set or w in seen:
            continue
        seen.add(w)
        mids.append(w)
    return composite, o1 + o2 + mids


def order_from_term(t: Term) -> ElimOrder:
    """The elimination order a compositional term induces: sub-term orders
    first, then the wires each sequential composite hides."""
    graph, order = _build_term(t)
    return ElimOrder(tuple(order),
                     _replay_width(graph.wires(), _node_scopes(graph), order))
