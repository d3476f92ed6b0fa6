"""Two-loop planning controller.

The outer loop runs per demand pair: enumerate candidate paths, score
each with a cheap dynamic-programming capacity estimate, keep the top K,
synthesize their pruned hypergraphs into one cached model. The inner loop
answers requests against that immutable cache: retrieve, solve the
capacity LP, extract a scheme, all without constructing any hypergraph
(instrumented and enforced).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

from .hypergraph import (
    BUILD_COUNTER,
    FidelityGrid,
    Hypergraph,
    HypergraphError,
    best_dp_estimate,
    build_pruned_hypergraph,
    synthesize_multipath,
)
from .lp import DistributionScheme, EMPTY_SCHEME, extract_scheme, formulate_lp, solve_lp
from .physics import DEFAULT_NOISE, NoiseParams
from .topology import Topology, k_shortest_paths

CACHE_VERSION = 1


class CacheError(ValueError):
    """Raised for corrupt or incompatible cache documents."""


@dataclass(frozen=True)
class PlannerConfig:
    """Knobs of the two-loop controller."""

    n_candidates: int = 6
    k_keep: int = 3
    t_outer_s: float = 60.0
    grid: FidelityGrid = field(default_factory=lambda: FidelityGrid.uniform(100))
    noise: NoiseParams = DEFAULT_NOISE
    purify_model: str = "ideal-dejmps"
    latency_budget_s: float = 1.0
    t_cut_s: float | None = None
    path_weight: str = "km"
    lp_method: str = "auto"

    def __post_init__(self) -> None:
        if not 1 <= self.k_keep <= self.n_candidates:
            raise ValueError("need 1 <= k_keep <= n_candidates")
        if not 0.01 <= self.latency_budget_s <= 1.0:
            raise ValueError("latency budget must be within [0.01, 1.0] s")
        if self.t_outer_s <= 0:
            raise ValueError("outer period must be positive")

    def to_json(self) -> dict:
        return {
            "n_candidates": self.n_candidates,
            "k_keep": self.k_keep,
            "t_outer_s": self.t_outer_s,
            "grid": list(self.grid.values),
            "noise": {
                "p1": self.noise.p1, "p2": self.noise.p2,
                "eta": self.noise.eta, "f0": self.noise.f0,
            },
            "purify_model": self.purify_model,
            "latency_budget_s": self.latency_budget_s,
            "t_cut_s": self.t_cut_s,
            "path_weight": self.path_weight,
            "lp_method": self.lp_method,
        }

    @classmethod
    def from_json(cls, doc: dict) -> PlannerConfig:
        return cls(
            n_candidates=doc["n_candidates"],
            k_keep=doc["k_keep"],
            t_outer_s=doc["t_outer_s"],
            grid=FidelityGrid(tuple(doc["grid"])),
            noise=NoiseParams(**doc["noise"]),
            purify_model=doc["purify_model"],
            latency_budget_s=doc["latency_budget_s"],
            t_cut_s=doc["t_cut_s"],
            path_weight=doc["path_weight"],
            lp_method=doc["lp_method"],
        )


@dataclass(frozen=True)
class CacheEntry:
    hypergraph: Hypergraph | None
    estimates: tuple[tuple[float, tuple[str, ...]], ...]  # (score, path nodes), desc
    server_time_s: float


@dataclass
class Cache:
    config: PlannerConfig
    entries: dict[tuple[str, str], CacheEntry] = field(default_factory=dict)


@dataclass(frozen=True)
class InnerResult:
    scheme: DistributionScheme
    solver_time_s: float
    cached: bool
    over_budget: bool
    diagnostic: str = ""


def outer_loop_update(
    topology: Topology, demands: list[tuple[str, str]], config: PlannerConfig
) -> Cache:
    """Build the per-demand cache: rank candidate paths, keep K, synthesize."""
    if not demands:
        raise ValueError("need at least one demand pair")
    cache = Cache(config=config)
    for s, d in demands:
        t0 = time.perf_counter()
        paths = k_shortest_paths(topology, s, d, config.n_candidates, config.path_weight)
        scored = []
        for path in paths:
            hg = build_pruned_hypergraph(path, config.grid, config.noise, config.purify_model)
            scored.append((best_dp_estimate(hg), path, hg))
        # higher estimate first; shorter path breaks ties deterministically
        scored.sort(key=lambda item: (-item[0], item[1].total_length_km, item[1].nodes))
        kept = scored[: config.k_keep]
        if kept:
            synthesized = synthesize_multipath([hg for _, _, hg in kept])
        else:
            synthesized = None
        cache.entries[(s, d)] = CacheEntry(
            hypergraph=synthesized,
            estimates=tuple((score, path.nodes) for score, path, _ in scored),
            server_time_s=time.perf_counter() - t0,
        )
    return cache


def inner_loop_request(cache: Cache, s: str, d: str) -> InnerResult:
    """Solve one demand against the cache; no construction may happen."""
    builds_before = BUILD_COUNTER.count
    entry = cache.entries.get((s, d))
    if entry is None or entry.hypergraph is None:
        return InnerResult(
            scheme=EMPTY_SCHEME, solver_time_s=0.0, cached=entry is not None,
            over_budget=False,
            diagnostic="not cached" if entry is None else "no path available",
        )
    t0 = time.perf_counter()
    problem = formulate_lp(entry.hypergraph, "ensemble-capacity")
    solution = solve_lp(problem, method=cache.config.lp_method)
    scheme = extract_scheme(entry.hypergraph, solution)
    solver_time = time.perf_counter() - t0
    if BUILD_COUNTER.count != builds_before:
        raise RuntimeError("inner loop performed hypergraph construction")
    over = solver_time > cache.config.latency_budget_s
    diag = ""
    if cache.config.t_cut_s is not None and solver_time > cache.config.t_cut_s:
        diag = "coherence budget exceeded"
    return InnerResult(
        scheme=scheme, solver_time_s=solver_time, cached=True,
        over_budget=over, diagnostic=diag,
    )


def save_cache(cache: Cache) -> str:
    doc = {
        "version": CACHE_VERSION,
        "config": cache.config.to_json(),
        "entries": [
            {
                "s": s,
                "d": d,
                "hypergraph": entry.hypergraph.to_json() if entry.hypergraph else None,
                "estimates": [[score, list(nodes)] for score, nodes in entry.estimates],
                "server_time_s": entry.server_time_s,
            }
            for (s, d), entry in sorted(cache.entries.items())
        ],
    }
    return json.dumps(doc)


def load_cache(text: str) -> Cache:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CacheError(f"corrupt cache document: {exc}") from exc
    try:
        if doc["version"] != CACHE_VERSION:
            raise CacheError(f"unsupported cache version {doc['version']!r}")
        cache = Cache(config=PlannerConfig.from_json(doc["config"]))
        for item in doc["entries"]:
            hg = Hypergraph.from_json(item["hypergraph"]) if item["hypergraph"] else None
            cache.entries[(item["s"], item["d"])] = CacheEntry(
                hypergraph=hg,
                estimates=tuple(
                    (score, tuple(nodes)) for score, nodes in item["estimates"]
                ),
                server_time_s=item["server_time_s"],
            )
        return cache
    except (KeyError, TypeError, ValueError, HypergraphError) as exc:
        if isinstance(exc, CacheError):
            raise
        raise CacheError(f"corrupt cache document: {exc}") from exc
