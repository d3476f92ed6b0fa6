"""Operation hypergraphs over repeater paths.

Vertices are (node-pair, fidelity) link states plus a source and a sink;
hyper-edges are start/swap/purify/end operations carrying LP rate
variables. Two builders are provided: the standard builder enumerates the
full discretized lattice (edge count grows as |V|^3 |F|^2), and the
pruned builder runs a dynamic program that keeps one best-rate incumbent
per (node-pair, fidelity-bucket) with its exact continuous fidelity
(edge count O(|V|^2 |F|)). Multi-path synthesis unions per-path
hypergraphs while pooling generation limits of shared physical links.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .capacity import pair_capacity
from .physics import NoiseParams, purify, purify_model_is_symmetric
from .topology import Path, link_egr

SOURCE = 0
SINK = 1

SERIALIZATION_VERSION = 1


class HypergraphError(ValueError):
    """Raised for invalid builder inputs or corrupt serialized documents."""


@dataclass(frozen=True)
class FidelityGrid:
    """Sorted fidelity values inside [0.5, 1] used for discretization.

    Bucket k is the half-open interval [values[k], values[k+1]), with the
    last bucket closed at 1.
    """

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.values:
            raise HypergraphError("grid must contain at least one value")
        prev = None
        for v in self.values:
            if not 0.5 <= v <= 1.0:
                raise HypergraphError(f"grid value {v} outside [0.5, 1]")
            if prev is not None and v <= prev:
                raise HypergraphError("grid values must be strictly increasing")
            prev = v

    @classmethod
    def uniform(cls, size: int = 100, lo: float = 0.5, hi: float = 1.0) -> FidelityGrid:
        if size < 1:
            raise HypergraphError("grid size must be >= 1")
        if size == 1:
            return cls((lo,))
        return cls(tuple(float(x) for x in np.linspace(lo, hi, size)))

    @property
    def resolution(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values)

    def round_down_index(self, f: float) -> int:
        """Largest k with values[k] <= f, or -1 below the grid."""
        return int(np.searchsorted(self.values, f, side="right")) - 1


@dataclass(frozen=True)
class HyperVertex:
    u: str
    v: str
    exact_fidelity: float
    bucket: int
    kind: str  # source | sink | link


@dataclass(frozen=True, slots=True)
class HyperEdge:
    op: str  # start | swap | purify | end
    inputs: tuple[int, ...]
    output: int
    p_succ: float = 1.0
    link_key: str | None = None
    capacity_coeff: float = 0.0
    rate_bound: float | None = None


@dataclass(frozen=True)
class HypergraphStats:
    num_vertices: int
    num_edges: int
    edges_by_op: dict[str, int]
    build_time_s: float


class BuildCounter:
    """Counts hypergraph builder invocations (construction instrumentation)."""

    def __init__(self) -> None:
        self.count = 0

    def reset(self) -> None:
        self.count = 0


BUILD_COUNTER = BuildCounter()


class Hypergraph:
    """Immutable operation hypergraph. Index 0 is the source, 1 the sink."""

    def __init__(
        self,
        vertices: list[HyperVertex],
        edges: list[HyperEdge],
        grid: FidelityGrid,
        noise: NoiseParams,
        link_limits: dict[str, float],
        endpoints: tuple[str, str],
        builder: str,
        purify_model: str,
        build_time_s: float = 0.0,
        check: bool = True,
    ) -> None:
        if len(vertices) < 2 or vertices[0].kind != "source" or vertices[1].kind != "sink":
            raise HypergraphError("vertices must start with source and sink")
        self.vertices = tuple(vertices)
        self.edges = tuple(edges)
        self.grid = grid
        self.noise = noise
        self.link_limits = dict(link_limits)
        self.endpoints = endpoints
        self.builder = builder
        self.purify_model = purify_model
        self.build_time_s = build_time_s
        if check:
            self._check_acyclic()

    def _check_acyclic(self) -> None:
        n = len(self.vertices)
        indeg = np.zeros(n, dtype=np.int64)
        out_lists: dict[int, list[int]] = {}
        for ei, e in enumerate(self.edges):
            indeg[e.output] += 1
            for vi in e.inputs:
                out_lists.setdefault(vi, []).append(ei)
        consumed = [0] * len(self.edges)
        ready = [i for i in range(n) if indeg[i] == 0]
        seen = 0
        while ready:
            vi = ready.pop()
            seen += 1
            for ei in out_lists.get(vi, ()):
                consumed[ei] += 1
                if consumed[ei] == len(self.edges[ei].inputs):
                    e = self.edges[ei]
                    indeg[e.output] -= 1
                    if indeg[e.output] == 0:
                        ready.append(e.output)
        cleared = sum(1 for ei, e in enumerate(self.edges) if consumed[ei] == len(e.inputs))
        if cleared != len(self.edges):
            raise HypergraphError("hypergraph contains a cycle")

    def stats(self) -> HypergraphStats:
        by_op: dict[str, int] = {"start": 0, "swap": 0, "purify": 0, "end": 0}
        for e in self.edges:
            by_op[e.op] = by_op.get(e.op, 0) + 1
        return HypergraphStats(
            num_vertices=len(self.vertices),
            num_edges=len(self.edges),
            edges_by_op=by_op,
            build_time_s=self.build_time_s,
        )

    def end_edges(self) -> list[tuple[int, HyperEdge]]:
        return [(i, e) for i, e in enumerate(self.edges) if e.op == "end"]

    def to_json(self) -> dict:
        return {
            "version": SERIALIZATION_VERSION,
            "builder": self.builder,
            "purify_model": self.purify_model,
            "endpoints": list(self.endpoints),
            "grid": list(self.grid.values),
            "noise": {
                "p1": self.noise.p1,
                "p2": self.noise.p2,
                "eta": self.noise.eta,
                "f0": self.noise.f0,
            },
            "link_limits": self.link_limits,
            "build_time_s": self.build_time_s,
            "vertices": [
                [v.u, v.v, v.exact_fidelity, v.bucket, v.kind] for v in self.vertices
            ],
            "edges": [
                [e.op, list(e.inputs), e.output, e.p_succ, e.link_key, e.capacity_coeff, e.rate_bound]
                for e in self.edges
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> Hypergraph:
        try:
            if doc["version"] != SERIALIZATION_VERSION:
                raise HypergraphError(f"unsupported version {doc['version']!r}")
            vertices = [
                HyperVertex(u=u, v=v, exact_fidelity=f, bucket=b, kind=k)
                for u, v, f, b, k in doc["vertices"]
            ]
            edges = [
                HyperEdge(
                    op=op,
                    inputs=tuple(inputs),
                    output=output,
                    p_succ=p_succ,
                    link_key=link_key,
                    capacity_coeff=cap,
                    rate_bound=rb,
                )
                for op, inputs, output, p_succ, link_key, cap, rb in doc["edges"]
            ]
            noise = doc["noise"]
            return cls(
                vertices=vertices,
                edges=edges,
                grid=FidelityGrid(tuple(doc["grid"])),
                noise=NoiseParams(**noise),
                link_limits=dict(doc["link_limits"]),
                endpoints=tuple(doc["endpoints"]),
                builder=doc["builder"],
                purify_model=doc["purify_model"],
                build_time_s=doc["build_time_s"],
                check=False,
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, HypergraphError):
                raise
            raise HypergraphError(f"corrupt hypergraph document: {exc}") from exc

    def to_json_text(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json_text(cls, text: str) -> Hypergraph:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise HypergraphError(f"corrupt hypergraph document: {exc}") from exc
        return cls.from_json(doc)


def _source_sink(s: str, d: str) -> list[HyperVertex]:
    return [
        HyperVertex(u=s, v=d, exact_fidelity=0.0, bucket=-1, kind="source"),
        HyperVertex(u=s, v=d, exact_fidelity=0.0, bucket=-1, kind="sink"),
    ]


def _swap_table(grid: FidelityGrid, noise: NoiseParams) -> tuple[np.ndarray, np.ndarray]:
    """(output fidelity, round-down bucket) for every grid value pair."""
    vals = grid.as_array()
    x = (4.0 * vals - 1.0) / 3.0
    g = noise.p1 ** 2 * noise.p2 * (4.0 * noise.eta ** 2 - 1.0) / 3.0
    f_out = 0.25 * (1.0 + 3.0 * g * np.outer(x, x))
    idx = np.searchsorted(vals, f_out, side="right") - 1
    return f_out, idx


def _purify_table(
    grid: FidelityGrid, noise: NoiseParams, purify_model: str
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(output fidelity, success prob, round-down bucket) per value pair."""
    vals = grid.as_array()
    n = len(vals)
    f_out = np.empty((n, n))
    p_succ = np.empty((n, n))
    for a in range(n):
        for b in range(n):
            f_out[a, b], p_succ[a, b] = purify(vals[a], vals[b], noise, purify_model)
    idx = np.searchsorted(vals, f_out, side="right") - 1
    return f_out, p_succ, idx


def build_standard_hypergraph(
    path: Path,
    grid: FidelityGrid,
    noise: NoiseParams,
    purify_model: str = "ideal-dejmps",
    check: bool = True,
) -> Hypergraph:
    """Full discretized lattice: every node pair at every grid value.

    Operation outputs are rounded DOWN to the grid (systematic pessimism);
    purifications whose rounded output does not strictly exceed both input
    buckets are dropped, which keeps the span-then-fidelity order acyclic.
    """
    BUILD_COUNTER.count += 1
    t0 = time.perf_counter()
    m = path.num_nodes
    if m < 2:
        raise HypergraphError("path must have at least 2 nodes")
    nodes = path.nodes
    nf = grid.resolution

    vertices = _source_sink(nodes[0], nodes[-1])
    vidx: dict[tuple[int, int, int], int] = {}
    for i in range(m):
        for j in range(i + 1, m):
            for k in range(nf):
                vidx[(i, j, k)] = len(vertices)
                vertices.append(
                    HyperVertex(
                        u=nodes[i], v=nodes[j], exact_fidelity=grid.values[k],
                        bucket=k, kind="link",
                    )
                )

    edges: list[HyperEdge] = []
    link_limits: dict[str, float] = {}

    for t, phys in enumerate(path.edges):
        k0 = grid.round_down_index(phys.f0)
        if k0 < 0:
            continue  # f0 below the grid generates no usable state
        r_e = link_egr(phys)
        link_limits[phys.key] = r_e
        edges.append(
            HyperEdge(op="start", inputs=(SOURCE,), output=vidx[(t, t + 1, k0)],
                      link_key=phys.key, rate_bound=r_e)
        )

    _, swap_idx = _swap_table(grid, noise)
    swap_pairs = np.argwhere(swap_idx >= 0)
    for i in range(m):
        for j in range(i + 2, m):
            for w in range(i + 1, j):
                for ka, kb in swap_pairs:
                    edges.append(
                        HyperEdge(
                            op="swap",
                            inputs=(vidx[(i, w, ka)], vidx[(w, j, kb)]),
                            output=vidx[(i, j, swap_idx[ka, kb])],
                        )
                    )

    _, pur_p, pur_idx = _purify_table(grid, noise, purify_model)
    ka_grid, kb_grid = np.meshgrid(np.arange(nf), np.arange(nf), indexing="ij")
    valid = pur_idx > np.maximum(ka_grid, kb_grid)
    if purify_model_is_symmetric(purify_model):
        valid &= ka_grid <= kb_grid
    pur_pairs = np.argwhere(valid)
    for i in range(m):
        for j in range(i + 1, m):
            for ka, kb in pur_pairs:
                edges.append(
                    HyperEdge(
                        op="purify",
                        inputs=(vidx[(i, j, ka)], vidx[(i, j, kb)]),
                        output=vidx[(i, j, pur_idx[ka, kb])],
                        p_succ=float(pur_p[ka, kb]),
                    )
                )

    for k in range(nf):
        edges.append(
            HyperEdge(op="end", inputs=(vidx[(0, m - 1, k)],), output=SINK,
                      capacity_coeff=pair_capacity(grid.values[k]))
        )

    return Hypergraph(
        vertices=vertices, edges=edges, grid=grid, noise=noise,
        link_limits=link_limits, endpoints=(nodes[0], nodes[-1]),
        builder="standard", purify_model=purify_model,
        build_time_s=time.perf_counter() - t0, check=check,
    )


@dataclass
class _Incumbent:
    exact_fidelity: float
    rate: float
    op: str  # start | swap | purify
    inputs: tuple[tuple[tuple[int, int], int], ...] = ()  # ((i, j), bucket) refs
    p_succ: float = 1.0
    link_key: str | None = None


def _better(cand_rate: float, cand_f: float, inc: _Incumbent | None) -> bool:
    # replacement rule: strictly better rate, else equal rate and higher fidelity
    if inc is None:
        return True
    if cand_rate != inc.rate:
        return cand_rate > inc.rate
    return cand_f > inc.exact_fidelity


def _purify_block(
    block: dict[int, _Incumbent],
    pair: tuple[int, int],
    grid: FidelityGrid,
    noise: NoiseParams,
    purify_model: str,
) -> None:
    """One increasing-bucket purification sweep over a node-pair block.

    Candidates always land in a strictly higher bucket than both inputs,
    so a single ascending pass also captures cascaded purification.
    """
    for k in range(grid.resolution):
        high = block.get(k)
        if high is None:
            continue
        for k1 in range(k + 1):
            low = block.get(k1)
            if low is None:
                continue
            f_new, p = purify(high.exact_fidelity, low.exact_fidelity, noise, purify_model)
            if f_new <= max(high.exact_fidelity, low.exact_fidelity):
                continue
            kn = grid.round_down_index(f_new)
            if kn <= k:
                continue  # must move up a bucket or the DAG order breaks
            if k1 == k:
                # both inputs drawn from one pool: half are attempts
                r_new = 0.5 * high.rate * p
            else:
                r_new = min(high.rate, low.rate) * p
            if _better(r_new, f_new, block.get(kn)):
                block[kn] = _Incumbent(
                    exact_fidelity=f_new, rate=r_new, op="purify",
                    inputs=((pair, k), (pair, k1)), p_succ=p,
                )


def build_pruned_hypergraph(
    path: Path,
    grid: FidelityGrid,
    noise: NoiseParams,
    purify_model: str = "ideal-dejmps",
    check: bool = True,
) -> Hypergraph:
    """Dynamic-programming builder with fidelity bucketing.

    Per (node-pair, bucket) at most one incumbent survives, holding its
    exact continuous fidelity and the best rate found; a candidate
    replaces the incumbent only on a strict rate improvement (fidelity
    breaks ties). Spans are processed bottom-up: swap combinations first,
    then a purification sweep within the block.
    """
    BUILD_COUNTER.count += 1
    t0 = time.perf_counter()
    m = path.num_nodes
    if m < 2:
        raise HypergraphError("path must have at least 2 nodes")
    nodes = path.nodes

    blocks: dict[tuple[int, int], dict[int, _Incumbent]] = {}
    link_limits: dict[str, float] = {}

    for t, phys in enumerate(path.edges):
        k0 = grid.round_down_index(phys.f0)
        block: dict[int, _Incumbent] = {}
        if k0 >= 0:
            r_e = link_egr(phys)
            link_limits[phys.key] = r_e
            block[k0] = _Incumbent(
                exact_fidelity=phys.f0, rate=r_e, op="start", link_key=phys.key
            )
            _purify_block(block, (t, t + 1), grid, noise, purify_model)
        blocks[(t, t + 1)] = block

    vals_min = grid.values[0]
    for span in range(2, m):
        for i in range(m - span):
            j = i + span
            block: dict[int, _Incumbent] = {}
            for w in range(i + 1, j):
                left = blocks[(i, w)]
                right = blocks[(w, j)]
                for ka, a in left.items():
                    for kb, b in right.items():
                        f_new = _swap_exact(a.exact_fidelity, b.exact_fidelity, noise)
                        if f_new < vals_min:
                            continue
                        r_new = min(a.rate, b.rate)
                        kn = grid.round_down_index(f_new)
                        if _better(r_new, f_new, block.get(kn)):
                            block[kn] = _Incumbent(
                                exact_fidelity=f_new, rate=r_new, op="swap",
                                inputs=(((i, w), ka), ((w, j), kb)),
                            )
            _purify_block(block, (i, j), grid, noise, purify_model)
            blocks[(i, j)] = block

    vertices = _source_sink(nodes[0], nodes[-1])
    vidx: dict[tuple[tuple[int, int], int], int] = {}
    for pair in sorted(blocks, key=lambda p: (p[1] - p[0], p[0])):
        for bucket in sorted(blocks[pair]):
            inc = blocks[pair][bucket]
            vidx[(pair, bucket)] = len(vertices)
            vertices.append(
                HyperVertex(
                    u=nodes[pair[0]], v=nodes[pair[1]],
                    exact_fidelity=inc.exact_fidelity, bucket=bucket, kind="link",
                )
            )

    edges: list[HyperEdge] = []
    for pair in sorted(blocks, key=lambda p: (p[1] - p[0], p[0])):
        for bucket in sorted(blocks[pair]):
            inc = blocks[pair][bucket]
            out = vidx[(pair, bucket)]
            if inc.op == "start":
                edges.append(
                    HyperEdge(op="start", inputs=(SOURCE,), output=out,
                              link_key=inc.link_key, rate_bound=inc.rate)
                )
            else:
                edges.append(
                    HyperEdge(
                        op=inc.op,
                        inputs=tuple(vidx[ref] for ref in inc.inputs),
                        output=out,
                        p_succ=inc.p_succ,
                        rate_bound=inc.rate,
                    )
                )

    for bucket in sorted(blocks[(0, m - 1)]):
        inc = blocks[(0, m - 1)][bucket]
        edges.append(
            HyperEdge(op="end", inputs=(vidx[((0, m - 1), bucket)],), output=SINK,
                      capacity_coeff=pair_capacity(inc.exact_fidelity),
                      rate_bound=inc.rate)
        )

    return Hypergraph(
        vertices=vertices, edges=edges, grid=grid, noise=noise,
        link_limits=link_limits, endpoints=(nodes[0], nodes[-1]),
        builder="pruned", purify_model=purify_model,
        build_time_s=time.perf_counter() - t0, check=check,
    )


def _swap_exact(f1: float, f2: float, noise: NoiseParams) -> float:
    g = noise.p1 ** 2 * noise.p2 * (4.0 * noise.eta ** 2 - 1.0) / 3.0
    return 0.25 * (1.0 + g * (4.0 * f1 - 1.0) * (4.0 * f2 - 1.0) / 3.0)


def best_dp_estimate(hg: Hypergraph) -> float:
    """Outer-loop ranking score: best end incumbent rate x pair capacity."""
    best = 0.0
    for _, e in hg.end_edges():
        if e.rate_bound is None:
            continue
        best = max(best, e.rate_bound * e.capacity_coeff)
    return best


def synthesize_multipath(hypergraphs: list[Hypergraph], check: bool = True) -> Hypergraph:
    """Disjoint union of per-path hypergraphs with pooled link limits.

    Vertices are never merged across paths; only start edges referencing
    the same physical link share one generation-limit group, plus a single
    shared source and sink.
    """
    if not hypergraphs:
        raise HypergraphError("need at least one hypergraph")
    first = hypergraphs[0]
    for hg in hypergraphs[1:]:
        if hg.endpoints != first.endpoints:
            raise HypergraphError("mismatched endpoints")
        if hg.grid.values != first.grid.values:
            raise HypergraphError("mismatched grids")
        if hg.noise != first.noise:
            raise HypergraphError("mismatched noise parameters")
        if hg.purify_model != first.purify_model:
            raise HypergraphError("mismatched purification models")

    BUILD_COUNTER.count += 1
    t0 = time.perf_counter()
    vertices = _source_sink(*first.endpoints)
    edges: list[HyperEdge] = []
    link_limits: dict[str, float] = {}
    for hg in hypergraphs:
        offset = len(vertices) - 2
        for v in hg.vertices[2:]:
            vertices.append(v)

        def remap(idx: int) -> int:
            return idx if idx in (SOURCE, SINK) else idx + offset

        for e in hg.edges:
            edges.append(
                HyperEdge(
                    op=e.op,
                    inputs=tuple(remap(i) for i in e.inputs),
                    output=remap(e.output),
                    p_succ=e.p_succ,
                    link_key=e.link_key,
                    capacity_coeff=e.capacity_coeff,
                    rate_bound=e.rate_bound,
                )
            )
        for key, limit in hg.link_limits.items():
            if key in link_limits and abs(link_limits[key] - limit) > 1e-9:
                raise HypergraphError(f"conflicting limits for physical link {key}")
            link_limits[key] = limit

    return Hypergraph(
        vertices=vertices, edges=edges, grid=first.grid, noise=first.noise,
        link_limits=link_limits, endpoints=first.endpoints,
        builder="synthesis", purify_model=first.purify_model,
        build_time_s=time.perf_counter() - t0, check=check,
    )
