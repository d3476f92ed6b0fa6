"""Seeded experiment harness and machine-readable reports.

Experiment kinds:

* ``benchmark``        -- all strategies over sampled node pairs grouped
                          by shortest-path node count.
* ``sweep-flb``        -- capacity of each strategy across a fidelity
                          lower-bound sweep on fixture chains.
* ``sweep-resolution`` -- builder size/time signatures across grid sizes.
* ``scale-path``       -- pruned build + solve times across path lengths.
* ``scale-network``    -- outer/inner loop times across topology sizes.
* ``intro-toy``        -- a 4-link chain solved under three objectives
                          (max capacity, max fidelity, max rate).

Reports are deterministic under a fixed config seed; timing columns are
populated only when ``record_timings`` is set (reproducibility checks
compare reports with timings off).
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .hypergraph import FidelityGrid, build_pruned_hypergraph, build_standard_hypergraph
from .lp import extract_scheme, formulate_lp, solve_lp
from .orchestrator import PlannerConfig, inner_loop_request, outer_loop_update
from .physics import DEFAULT_NOISE, NoiseParams
from .strategies import (
    STRATEGY_NAMES,
    StrategyResult,
    run_rate_dp,
    run_strategy,
)
from .topology import (
    Edge,
    Path,
    Topology,
    generate_gabriel,
    k_shortest_paths,
    load_gml,
    load_topology,
)

log = logging.getLogger(__name__)

EXPERIMENT_KINDS = (
    "benchmark",
    "sweep-flb",
    "sweep-resolution",
    "scale-path",
    "scale-network",
    "intro-toy",
)

COLUMNS = (
    "experiment",
    "fixture",
    "path_length",
    "s",
    "d",
    "strategy",
    "grid_size",
    "f_lb",
    "builder",
    "vertices",
    "edges",
    "egr",
    "fidelity",
    "capacity",
    "swaps",
    "purifications",
    "pairs",
    "server_time_s",
    "solver_time_s",
)

INTRO_TOY_F0 = 0.95
INTRO_TOY_LINKS = 4
INTRO_TOY_LINK_KM = 70.0
INTRO_TOY_MAX_FID_LB = 0.95
INTRO_TOY_MIN_FID_LB = 0.51


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int = 0
    topology_path: str | None = None
    topology_nodes: int = 100
    pairs_per_length: int = 10
    path_lengths: tuple[int, ...] = (3, 5, 7, 10)
    grid_size: int = 100
    grid_sizes: tuple[int, ...] = (10, 20, 40, 80)
    f_lb: float = 0.87
    f_lb_start: float = 0.815
    f_lb_stop: float = 0.995
    f_lb_step: float = 0.005
    strategies: tuple[str, ...] = STRATEGY_NAMES
    noise: NoiseParams = DEFAULT_NOISE
    purify_model: str = "ideal-dejmps"
    record_timings: bool = True
    workers: int = 1
    chain_nodes: int = 6
    repetitions: int = 5
    network_sizes: tuple[int, ...] = (30, 60, 100)
    scale_path_lengths: tuple[int, ...] = tuple(range(2, 11))
    distance_range_km: tuple[float, float] = (20.0, 150.0)
    bbox_km: float = 500.0

    def __post_init__(self) -> None:
        if self.kind not in EXPERIMENT_KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        for name in ("path_lengths", "grid_sizes", "strategies", "network_sizes"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be nonempty")
        for s in self.strategies:
            if s not in STRATEGY_NAMES:
                raise ValueError(f"unknown strategy {s!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.f_lb_step <= 0 or self.f_lb_stop < self.f_lb_start:
            raise ValueError("invalid f_lb sweep range")

    def to_json(self) -> dict:
        doc = {
            "kind": self.kind,
            "seed": self.seed,
            "topology_path": self.topology_path,
            "topology_nodes": self.topology_nodes,
            "pairs_per_length": self.pairs_per_length,
            "path_lengths": list(self.path_lengths),
            "grid_size": self.grid_size,
            "grid_sizes": list(self.grid_sizes),
            "f_lb": self.f_lb,
            "f_lb_start": self.f_lb_start,
            "f_lb_stop": self.f_lb_stop,
            "f_lb_step": self.f_lb_step,
            "strategies": list(self.strategies),
            "noise": {
                "p1": self.noise.p1, "p2": self.noise.p2,
                "eta": self.noise.eta, "f0": self.noise.f0,
            },
            "purify_model": self.purify_model,
            "record_timings": self.record_timings,
            "workers": self.workers,
            "chain_nodes": self.chain_nodes,
            "repetitions": self.repetitions,
            "network_sizes": list(self.network_sizes),
            "scale_path_lengths": list(self.scale_path_lengths),
            "distance_range_km": list(self.distance_range_km),
            "bbox_km": self.bbox_km,
        }
        return doc


@dataclass
class Report:
    config: ExperimentConfig
    rows: list[dict] = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)
    failures: int = 0

    def to_json(self) -> dict:
        return {
            "config": self.config.to_json(),
            "columns": list(COLUMNS),
            "rows": self.rows,
            "aggregates": self.aggregates,
            "failures": self.failures,
        }


def emit_report(report: Report, format: str = "json") -> str:
    """Serialize a report; CSV keeps 6 significant digits, JSON is exact."""
    if format == "json":
        return json.dumps(report.to_json(), sort_keys=True, allow_nan=False) + "\n"
    if format != "csv":
        raise ValueError(f"unknown report format {format!r}")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in report.rows:
        out = []
        for col in COLUMNS:
            value = row.get(col)
            if value is None or (isinstance(value, float) and math.isnan(value)):
                out.append("")
            elif isinstance(value, float):
                out.append(format_float(value))
            else:
                out.append(str(value))
        writer.writerow(out)
    return buf.getvalue()


def format_float(value: float) -> str:
    return f"{value:.6g}"


def _row(**kwargs) -> dict:
    row = {col: None for col in COLUMNS}
    for key, value in kwargs.items():
        if key not in row:
            raise KeyError(f"unknown report column {key!r}")
        row[key] = value
    return row


def _strategy_row(
    config: ExperimentConfig, result: StrategyResult, **extra
) -> dict:
    sc = result.scheme
    return _row(
        experiment=config.kind,
        strategy=result.strategy,
        grid_size=result.grid_size,
        f_lb=result.f_lb,
        egr=sc.egr,
        fidelity=sc.fidelity,
        capacity=sc.capacity,
        swaps=sc.swaps,
        purifications=sc.purifications,
        pairs=sc.pairs,
        server_time_s=result.server_time_s if config.record_timings else None,
        solver_time_s=result.solver_time_s if config.record_timings else None,
        **extra,
    )


def _load_or_generate_topology(config: ExperimentConfig, seed: int) -> Topology:
    if config.topology_path:
        with open(config.topology_path) as fh:
            text = fh.read()
        if config.topology_path.endswith(".gml"):
            return load_gml(text)
        return load_topology(text)
    return generate_gabriel(
        config.topology_nodes,
        seed,
        bbox_km=config.bbox_km,
        distance_range_km=config.distance_range_km,
        f0=config.noise.f0,
    )


def _chain(
    lengths_km: list[float], f0: float, name: str = "c"
) -> Path:
    nodes = [f"{name}{i}" for i in range(len(lengths_km) + 1)]
    edges = [
        Edge(u=nodes[i], v=nodes[i + 1], length_km=lengths_km[i], f0=f0)
        for i in range(len(lengths_km))
    ]
    topo = Topology(nodes, edges)
    return topo.path_from_nodes(nodes)


def _sample_pairs(
    topology: Topology, path_nodes: int, count: int, rng: np.random.Generator
) -> list[tuple[str, str]]:
    """Node pairs whose hop-shortest path has exactly ``path_nodes`` nodes."""
    hops_wanted = path_nodes - 1
    by_source: dict[str, list[str]] = {}
    for s in topology.nodes:
        # BFS levels
        level = {s: 0}
        frontier = [s]
        depth = 0
        while frontier and depth < hops_wanted:
            depth += 1
            nxt = []
            for u in frontier:
                for v in topology.neighbors(u):
                    if v not in level:
                        level[v] = depth
                        nxt.append(v)
            frontier = nxt
        exact = sorted(v for v, dd in level.items() if dd == hops_wanted)
        if exact:
            by_source[s] = exact
    sources = sorted(by_source)
    if not sources:
        return []
    pairs: list[tuple[str, str]] = []
    seen = set()
    attempts = 0
    while len(pairs) < count and attempts < count * 50:
        attempts += 1
        s = sources[int(rng.integers(len(sources)))]
        targets = by_source[s]
        d = targets[int(rng.integers(len(targets)))]
        if (s, d) in seen or (d, s) in seen:
            continue
        seen.add((s, d))
        pairs.append((s, d))
    return pairs


def _run_instances(config: ExperimentConfig, jobs: list, worker) -> list:
    """Run jobs across threads, preserving input order for determinism."""
    if config.workers == 1 or len(jobs) <= 1:
        return [worker(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        return list(pool.map(worker, jobs))


def run_experiment(config: ExperimentConfig) -> Report:
    runner = {
        "benchmark": _run_benchmark,
        "sweep-flb": _run_sweep_flb,
        "sweep-resolution": _run_sweep_resolution,
        "scale-path": _run_scale_path,
        "scale-network": _run_scale_network,
        "intro-toy": _run_intro_toy,
    }[config.kind]
    return runner(config)


def _run_benchmark(config: ExperimentConfig) -> Report:
    report = Report(config=config)
    topo = _load_or_generate_topology(config, config.seed)
    grid = FidelityGrid.uniform(config.grid_size)
    jobs = []
    for length in config.path_lengths:
        rng = np.random.default_rng([config.seed, length])
        pairs = _sample_pairs(topo, length, config.pairs_per_length, rng)
        for s, d in pairs:
            jobs.append((length, s, d))

    def worker(job):
        length, s, d = job
        try:
            path = k_shortest_paths(topo, s, d, 1, weight="hops")[0]
            results = [
                run_strategy(
                    name, path, grid, config.f_lb, config.noise, config.purify_model
                )
                for name in config.strategies
            ]
            return (job, results, None)
        except Exception as exc:  # noqa: BLE001 - skipped instances are counted
            return (job, None, exc)

    for (length, s, d), results, exc in _run_instances(config, jobs, worker):
        if exc is not None:
            log.warning("benchmark instance (%s, %s) failed: %s", s, d, exc)
            report.failures += 1
            continue
        for result in results:
            report.rows.append(
                _strategy_row(config, result, s=s, d=d, path_length=length)
            )

    # aggregate mean capacity per (path length, strategy) and improvement
    # relative to the rate-dp mean
    means: dict[tuple[int, str], float] = {}
    for length in config.path_lengths:
        for name in config.strategies:
            caps = [
                r["capacity"]
                for r in report.rows
                if r["path_length"] == length and r["strategy"] == name
            ]
            if caps:
                means[(length, name)] = float(np.mean(caps))
    agg = {}
    for (length, name), mean in sorted(means.items()):
        entry = {"mean_capacity": mean}
        base = means.get((length, "rate-dp"))
        if base and base > 0:
            entry["improvement_vs_rate_dp"] = (mean - base) / base
        agg[f"{length}/{name}"] = entry
    report.aggregates = agg
    return report


def _f_lb_values(config: ExperimentConfig) -> list[float]:
    out = []
    value = config.f_lb_start
    while value <= config.f_lb_stop + 1e-12:
        out.append(round(value, 10))
        value += config.f_lb_step
    return out


def _run_sweep_flb(config: ExperimentConfig) -> Report:
    report = Report(config=config)
    rng = np.random.default_rng([config.seed, 1])
    lo, hi = config.distance_range_km
    sweep = _f_lb_values(config)
    for fixture in range(config.repetitions):
        lengths = [float(rng.uniform(lo, hi)) for _ in range(config.chain_nodes - 1)]
        path = _chain(lengths, config.noise.f0, name=f"f{fixture}_")
        grid = FidelityGrid.uniform(config.grid_size)
        # hypergraphs do not depend on f_lb; build once per fixture
        hgs = {}
        if "rate-lp" in config.strategies or "ec-lp" in config.strategies:
            hgs["standard"] = build_standard_hypergraph(
                path, grid, config.noise, config.purify_model
            )
        if "ec-dp" in config.strategies:
            hgs["pruned"] = build_pruned_hypergraph(
                path, grid, config.noise, config.purify_model
            )
        for f_lb in sweep:
            for name in config.strategies:
                if name == "rate-dp":
                    result = run_rate_dp(path, grid, f_lb, config.noise, config.purify_model)
                    scheme = result.scheme
                    solver_time = result.solver_time_s
                    server_time = result.server_time_s
                else:
                    hg = hgs["pruned" if name == "ec-dp" else "standard"]
                    objective = "end-rate" if name == "rate-lp" else "ensemble-capacity"
                    t0 = time.perf_counter()
                    problem = formulate_lp(
                        hg, objective, f_lb if objective == "end-rate" else None
                    )
                    solution = solve_lp(problem)
                    solver_time = time.perf_counter() - t0
                    scheme = extract_scheme(hg, solution)
                    server_time = hg.build_time_s
                report.rows.append(
                    _row(
                        experiment=config.kind,
                        fixture=fixture,
                        path_length=config.chain_nodes,
                        strategy=name,
                        grid_size=config.grid_size,
                        f_lb=f_lb,
                        egr=scheme.egr,
                        fidelity=scheme.fidelity,
                        capacity=scheme.capacity,
                        swaps=scheme.swaps,
                        purifications=scheme.purifications,
                        pairs=scheme.pairs,
                        server_time_s=server_time if config.record_timings else None,
                        solver_time_s=solver_time if config.record_timings else None,
                    )
                )
    return report


def _run_sweep_resolution(config: ExperimentConfig) -> Report:
    report = Report(config=config)
    rng = np.random.default_rng([config.seed, 2])
    lo, hi = config.distance_range_km
    lengths = [float(rng.uniform(lo, hi)) for _ in range(config.chain_nodes - 1)]
    path = _chain(lengths, config.noise.f0)
    for size in config.grid_sizes:
        grid = FidelityGrid.uniform(size)
        for builder, build in (
            ("standard", build_standard_hypergraph),
            ("pruned", build_pruned_hypergraph),
        ):
            hg = build(path, grid, config.noise, config.purify_model)
            stats = hg.stats()
            report.rows.append(
                _row(
                    experiment=config.kind,
                    path_length=config.chain_nodes,
                    grid_size=size,
                    builder=builder,
                    vertices=stats.num_vertices,
                    edges=stats.num_edges,
                    server_time_s=stats.build_time_s if config.record_timings else None,
                )
            )
    return report


def _percentiles(values: list[float]) -> dict:
    if not values:
        return {}
    arr = np.array(values)
    return {
        "p1": float(np.percentile(arr, 1)),
        "p50": float(np.percentile(arr, 50)),
        "p99": float(np.percentile(arr, 99)),
    }


def _run_scale_path(config: ExperimentConfig) -> Report:
    report = Report(config=config)
    rng = np.random.default_rng([config.seed, 3])
    lo, hi = config.distance_range_km
    grid = FidelityGrid.uniform(config.grid_size)
    solver_times = []
    server_times = []
    for length in config.scale_path_lengths:
        lengths = [float(rng.uniform(lo, hi)) for _ in range(length - 1)]
        path = _chain(lengths, config.noise.f0, name=f"p{length}_")
        hg = build_pruned_hypergraph(path, grid, config.noise, config.purify_model)
        t0 = time.perf_counter()
        problem = formulate_lp(hg, "ensemble-capacity")
        solution = solve_lp(problem)
        solver_time = time.perf_counter() - t0
        scheme = extract_scheme(hg, solution)
        stats = hg.stats()
        server_times.append(stats.build_time_s)
        solver_times.append(solver_time)
        report.rows.append(
            _row(
                experiment=config.kind,
                path_length=length,
                grid_size=config.grid_size,
                builder="pruned",
                strategy="ec-dp",
                vertices=stats.num_vertices,
                edges=stats.num_edges,
                egr=scheme.egr,
                fidelity=scheme.fidelity,
                capacity=scheme.capacity,
                swaps=scheme.swaps,
                purifications=scheme.purifications,
                pairs=scheme.pairs,
                server_time_s=stats.build_time_s if config.record_timings else None,
                solver_time_s=solver_time if config.record_timings else None,
            )
        )
    if config.record_timings:
        report.aggregates = {
            "server_time_s": _percentiles(server_times),
            "solver_time_s": _percentiles(solver_times),
        }
    return report


def _run_scale_network(config: ExperimentConfig) -> Report:
    report = Report(config=config)
    grid = FidelityGrid.uniform(config.grid_size)
    solver_times = []
    server_times = []
    for size in config.network_sizes:
        topo = generate_gabriel(
            size, config.seed, bbox_km=config.bbox_km,
            distance_range_km=config.distance_range_km, f0=config.noise.f0,
        )
        rng = np.random.default_rng([config.seed, 4, size])
        nodes = list(topo.nodes)
        demands = []
        while len(demands) < config.pairs_per_length and len(demands) < size:
            s = nodes[int(rng.integers(len(nodes)))]
            d = nodes[int(rng.integers(len(nodes)))]
            if s != d and (s, d) not in demands:
                demands.append((s, d))
        planner = PlannerConfig(
            grid=grid, noise=config.noise, purify_model=config.purify_model
        )
        cache = outer_loop_update(topo, demands, planner)
        for s, d in demands:
            entry = cache.entries[(s, d)]
            result = inner_loop_request(cache, s, d)
            server_times.append(entry.server_time_s)
            solver_times.append(result.solver_time_s)
            sc = result.scheme
            report.rows.append(
                _row(
                    experiment=config.kind,
                    fixture=size,
                    s=s,
                    d=d,
                    strategy="ec-dp",
                    grid_size=config.grid_size,
                    egr=sc.egr,
                    fidelity=sc.fidelity,
                    capacity=sc.capacity,
                    swaps=sc.swaps,
                    purifications=sc.purifications,
                    pairs=sc.pairs,
                    server_time_s=entry.server_time_s if config.record_timings else None,
                    solver_time_s=result.solver_time_s if config.record_timings else None,
                )
            )
    if config.record_timings:
        report.aggregates = {
            "server_time_s": _percentiles(server_times),
            "solver_time_s": _percentiles(solver_times),
        }
    return report


def _run_intro_toy(config: ExperimentConfig) -> Report:
    """Equal-link chain solved under three objectives.

    The three rows answer "what should this network maximize": raw rate
    (fidelity bound just above the grid floor), end fidelity (bound at
    0.95), or aggregate capacity.
    """
    report = Report(config=config)
    noise = replace(config.noise, f0=INTRO_TOY_F0)
    path = _chain([INTRO_TOY_LINK_KM] * INTRO_TOY_LINKS, noise.f0, name="t")
    grid = FidelityGrid.uniform(config.grid_size)
    objectives = (
        ("max-egr", "rate-lp", INTRO_TOY_MIN_FID_LB),
        ("max-fidelity", "rate-lp", INTRO_TOY_MAX_FID_LB),
        ("max-capacity", "ec-dp", None),
    )
    for label, strategy, f_lb in objectives:
        result = run_strategy(
            strategy, path, grid,
            f_lb if f_lb is not None else 0.87,
            noise, config.purify_model,
        )
        report.rows.append(
            _strategy_row(
                config, result, fixture=label, path_length=INTRO_TOY_LINKS + 1
            )
        )
    return report
