"""Single-path planning strategies and the exhaustive desk-scale oracle.

Four strategies share one result shape:

* ``rate-dp`` -- discretized dynamic program restricted to entanglement
  pumping, maximizing delivered rate above a fidelity bound; emits one
  protocol.
* ``rate-lp`` -- standard hypergraph, maximize end rate above the bound.
* ``ec-lp``   -- standard hypergraph, maximize ensemble capacity.
* ``ec-dp``   -- pruned (exact-fidelity incumbent) hypergraph, maximize
  ensemble capacity; this is the planner's single-path core.

The brute-force oracle enumerates every swap order (full binary trees
over the link sequence) with bounded purification rounds at each tree
slot, evaluates exact fidelities, and solves a small LP over the
enumerated protocol set. It exists to certify the hypergraph/LP pipeline
on tiny instances, so its rate accounting matches the LP's flow rows:
a swap consumes its rate from both inputs, a purification consumes its
rate from both inputs and credits half the success-weighted rate.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .capacity import EnsembleSpec, ensemble_capacity, pair_capacity
from .hypergraph import (
    FidelityGrid,
    Hypergraph,
    build_pruned_hypergraph,
    build_standard_hypergraph,
)
from .lp import (
    EMPTY_SCHEME,
    DistributionScheme,
    LPProblem,
    ProtocolFlow,
    extract_scheme,
    formulate_lp,
    solve_lp,
)
from .physics import DEFAULT_NOISE, NoiseParams, purify
from .topology import Path, link_egr

STRATEGY_NAMES = ("rate-dp", "rate-lp", "ec-lp", "ec-dp")

DEFAULT_F_LB = 0.87


class OracleBoundsError(ValueError):
    """Raised when oracle inputs exceed its enumeration bounds."""


@dataclass(frozen=True)
class StrategyResult:
    strategy: str
    scheme: DistributionScheme
    server_time_s: float  # model/hypergraph construction
    solver_time_s: float  # LP or DP optimization
    grid_size: int
    f_lb: float | None
    noise: NoiseParams
    purify_model: str

    @property
    def egr(self) -> float:
        return self.scheme.egr

    @property
    def capacity(self) -> float:
        return self.scheme.capacity

    @property
    def fidelity(self) -> float:
        return self.scheme.fidelity

    def to_json(self) -> dict:
        return {
            "strategy": self.strategy,
            "egr": self.scheme.egr,
            "fidelity": self.scheme.fidelity,
            "capacity": self.scheme.capacity,
            "swaps": self.scheme.swaps,
            "purifications": self.scheme.purifications,
            "pairs": self.scheme.pairs,
            "server_time_s": self.server_time_s,
            "solver_time_s": self.solver_time_s,
            "grid_size": self.grid_size,
            "f_lb": self.f_lb,
            "purify_model": self.purify_model,
        }


def _lp_strategy(
    name: str,
    hg: Hypergraph,
    objective: str,
    f_lb: float | None,
    grid: FidelityGrid,
    noise: NoiseParams,
    purify_model: str,
    lp_method: str,
) -> StrategyResult:
    t0 = time.perf_counter()
    problem = formulate_lp(hg, objective, f_lb)
    solution = solve_lp(problem, method=lp_method)
    solver_time = time.perf_counter() - t0
    scheme = extract_scheme(hg, solution)
    return StrategyResult(
        strategy=name, scheme=scheme, server_time_s=hg.build_time_s,
        solver_time_s=solver_time, grid_size=grid.resolution, f_lb=f_lb,
        noise=noise, purify_model=purify_model,
    )


def run_rate_lp(
    path: Path,
    grid: FidelityGrid,
    f_lb: float = DEFAULT_F_LB,
    noise: NoiseParams = DEFAULT_NOISE,
    purify_model: str = "ideal-dejmps",
    lp_method: str = "auto",
) -> StrategyResult:
    hg = build_standard_hypergraph(path, grid, noise, purify_model)
    return _lp_strategy("rate-lp", hg, "end-rate", f_lb, grid, noise, purify_model, lp_method)


def run_ec_lp(
    path: Path,
    grid: FidelityGrid,
    noise: NoiseParams = DEFAULT_NOISE,
    purify_model: str = "ideal-dejmps",
    lp_method: str = "auto",
) -> StrategyResult:
    hg = build_standard_hypergraph(path, grid, noise, purify_model)
    return _lp_strategy("ec-lp", hg, "ensemble-capacity", None, grid, noise, purify_model, lp_method)


def run_ec_dp(
    path: Path,
    grid: FidelityGrid,
    noise: NoiseParams = DEFAULT_NOISE,
    purify_model: str = "ideal-dejmps",
    lp_method: str = "auto",
) -> StrategyResult:
    hg = build_pruned_hypergraph(path, grid, noise, purify_model)
    return _lp_strategy("ec-dp", hg, "ensemble-capacity", None, grid, noise, purify_model, lp_method)


@dataclass(frozen=True)
class _DpState:
    """Discretized pumping-DP state: delivered bucket and per-unit costs."""

    bucket: int
    rate: float
    swaps_per_unit: float
    purs_per_unit: float


def _pump_variants(
    base: _DpState,
    grid: FidelityGrid,
    noise: NoiseParams,
    purify_model: str,
    max_rounds: int = 64,
) -> list[_DpState]:
    """Base state plus every pumping depth until the grid stalls.

    Pumping round t consumes the round t-1 state plus an equal rate of
    fresh base states, crediting half the success-weighted rate. For a
    base production rate B split optimally, depth T delivers
    B * c_T / (1 + sum_{t<T} c_t) with c_t the product of the per-round
    half-success factors.
    """
    out = [base]
    vals = grid.values
    cur_k = base.bucket
    c = 1.0  # product of half-success factors up to the current round
    prefix = 1.0  # sum of that product over all completed depths
    for _ in range(max_rounds):
        f_new, p = purify(vals[cur_k], vals[base.bucket], noise, purify_model)
        kn = grid.round_down_index(f_new)
        if kn <= cur_k:
            break
        step = 0.5 * p
        c_new = c * step
        denom = 1.0 + prefix
        rate = base.rate * c_new / denom
        if rate <= 0.0:
            break
        consumed_per_unit = denom / c_new  # base units per delivered pair
        pur_edges_per_unit = prefix / c_new  # purify rate per delivered pair
        out.append(
            _DpState(
                bucket=kn,
                rate=rate,
                swaps_per_unit=base.swaps_per_unit * consumed_per_unit,
                purs_per_unit=base.purs_per_unit * consumed_per_unit + pur_edges_per_unit,
            )
        )
        prefix += c_new
        c = c_new
        cur_k = kn
    return out


def _merge_state(block: dict[int, _DpState], cand: _DpState) -> None:
    inc = block.get(cand.bucket)
    if inc is None or cand.rate > inc.rate:
        block[cand.bucket] = cand


def run_rate_dp(
    path: Path,
    grid: FidelityGrid,
    f_lb: float = DEFAULT_F_LB,
    noise: NoiseParams = DEFAULT_NOISE,
    purify_model: str = "ideal-dejmps",
) -> StrategyResult:
    """Pumping-restricted dynamic program on the round-down grid.

    Emits a single protocol: the best-rate (s, d) state whose grid
    fidelity clears ``f_lb``. Every state it reaches is also a feasible
    flow of the standard-hypergraph rate LP, so rate-lp dominates it.
    """
    if not 0.5 < f_lb < 1.0:
        raise ValueError(f"f_lb must be in (0.5, 1), got {f_lb}")
    t0 = time.perf_counter()
    m = path.num_nodes
    blocks: dict[tuple[int, int], dict[int, _DpState]] = {}
    for t, phys in enumerate(path.edges):
        block: dict[int, _DpState] = {}
        k0 = grid.round_down_index(phys.f0)
        if k0 >= 0:
            base = _DpState(bucket=k0, rate=link_egr(phys), swaps_per_unit=0.0, purs_per_unit=0.0)
            for st in _pump_variants(base, grid, noise, purify_model):
                _merge_state(block, st)
        blocks[(t, t + 1)] = block

    vals = grid.as_array()
    for span in range(2, m):
        for i in range(m - span):
            j = i + span
            block: dict[int, _DpState] = {}
            for w in range(i + 1, j):
                for a in blocks[(i, w)].values():
                    for b in blocks[(w, j)].values():
                        f_new = _swap_value(vals[a.bucket], vals[b.bucket], noise)
                        kn = grid.round_down_index(f_new)
                        if kn < 0:
                            continue
                        base = _DpState(
                            bucket=kn,
                            rate=min(a.rate, b.rate),
                            swaps_per_unit=a.swaps_per_unit + b.swaps_per_unit + 1.0,
                            purs_per_unit=a.purs_per_unit + b.purs_per_unit,
                        )
                        for st in _pump_variants(base, grid, noise, purify_model):
                            _merge_state(block, st)
            blocks[(i, j)] = block

    solver_time = time.perf_counter() - t0
    best: _DpState | None = None
    for st in blocks[(0, m - 1)].values():
        if grid.values[st.bucket] >= f_lb and (best is None or st.rate > best.rate):
            best = st
    if best is None:
        scheme = EMPTY_SCHEME
    else:
        f = grid.values[best.bucket]
        spec = EnsembleSpec(((f, best.rate),))
        scheme = DistributionScheme(
            protocols=(ProtocolFlow(fidelity=f, rate=best.rate, tree="pumping-dp"),),
            ensembles=spec,
            egr=best.rate,
            fidelity=f,
            capacity=ensemble_capacity(spec),
            swaps=best.swaps_per_unit,
            purifications=best.purs_per_unit,
            pairs=1,
        )
    return StrategyResult(
        strategy="rate-dp", scheme=scheme, server_time_s=0.0,
        solver_time_s=solver_time, grid_size=grid.resolution, f_lb=f_lb,
        noise=noise, purify_model=purify_model,
    )


def _swap_value(f1: float, f2: float, noise: NoiseParams) -> float:
    g = noise.p1 ** 2 * noise.p2 * (4.0 * noise.eta ** 2 - 1.0) / 3.0
    return 0.25 * (1.0 + g * (4.0 * f1 - 1.0) * (4.0 * f2 - 1.0) / 3.0)


def run_strategy(
    name: str,
    path: Path,
    grid: FidelityGrid,
    f_lb: float = DEFAULT_F_LB,
    noise: NoiseParams = DEFAULT_NOISE,
    purify_model: str = "ideal-dejmps",
    lp_method: str = "auto",
) -> StrategyResult:
    if name == "rate-dp":
        return run_rate_dp(path, grid, f_lb, noise, purify_model)
    if name == "rate-lp":
        return run_rate_lp(path, grid, f_lb, noise, purify_model, lp_method)
    if name == "ec-lp":
        return run_ec_lp(path, grid, noise, purify_model, lp_method)
    if name == "ec-dp":
        return run_ec_dp(path, grid, noise, purify_model, lp_method)
    raise ValueError(f"unknown strategy {name!r}; expected one of {STRATEGY_NAMES}")


# --- brute-force oracle ---------------------------------------------------

@dataclass(frozen=True)
class _Proto:
    fidelity: float
    usage: tuple[float, ...]  # base pairs consumed per delivered pair, per link
    tree: str


def _tree_shapes(lo: int, hi: int):
    """All full binary trees over contiguous links [lo, hi)."""
    if hi - lo == 1:
        yield ("leaf", lo)
        return
    for w in range(lo + 1, hi):
        for left in _tree_shapes(lo, w):
            for right in _tree_shapes(w, hi):
                yield ("swap", left, right)


def _tree_slots(shape) -> int:
    if shape[0] == "leaf":
        return 1
    return 1 + _tree_slots(shape[1]) + _tree_slots(shape[2])


def _eval_protocol(
    shape,
    rounds: tuple[int, ...],
    f0s: list[float],
    num_links: int,
    noise: NoiseParams,
    purify_model: str,
    cursor: list[int],
) -> tuple[float, np.ndarray, str]:
    """Exact fidelity and per-link usage; slot rounds apply symmetric
    purification (two copies of the slot state per attempt)."""
    if shape[0] == "leaf":
        link = shape[1]
        f = f0s[link]
        usage = np.zeros(num_links)
        usage[link] = 1.0
        tree = f"L{link}"
    else:
        f_l, u_l, t_l = _eval_protocol(shape[1], rounds, f0s, num_links, noise, purify_model, cursor)
        f_r, u_r, t_r = _eval_protocol(shape[2], rounds, f0s, num_links, noise, purify_model, cursor)
        f = _swap_value(f_l, f_r, noise)
        usage = u_l + u_r
        tree = f"s({t_l},{t_r})"
    slot = cursor[0]
    cursor[0] += 1
    for _ in range(rounds[slot]):
        f_new, p = purify(f, f, noise, purify_model)
        usage = usage * (4.0 / p)
        f = f_new
        tree = f"p({tree})"
    return f, usage, tree


def brute_force_oracle(
    path: Path,
    grid: FidelityGrid,
    noise: NoiseParams = DEFAULT_NOISE,
    max_purify_rounds: int = 2,
    max_ensembles: int | None = None,
    purify_model: str = "ideal-dejmps",
    lp_method: str = "auto",
) -> StrategyResult:
    """Exhaustive protocol enumeration plus a mixture LP over the set.

    Bounds are enforced, not advisory: at most 4 path nodes, grid
    resolution at most 6, at most 2 purification rounds per slot.
    ``max_ensembles`` optionally restricts the mixture LP to the best
    protocols by standalone capacity.
    """
    k = len(path.edges)
    if path.num_nodes > 4:
        raise OracleBoundsError("oracle paths are limited to 4 nodes")
    if grid.resolution > 6:
        raise OracleBoundsError("oracle grids are limited to 6 values")
    if max_purify_rounds > 2 or max_purify_rounds < 0:
        raise OracleBoundsError("oracle allows at most 2 purification rounds")

    t0 = time.perf_counter()
    f0s = [e.f0 for e in path.edges]
    limits = np.array([link_egr(e) for e in path.edges])

    protos: dict[tuple, _Proto] = {}
    for shape in _tree_shapes(0, k):
        slots = _tree_slots(shape)
        for rounds in np.ndindex(*([max_purify_rounds + 1] * slots)):
            f, usage, tree = _eval_protocol(
                shape, tuple(rounds), f0s, k, noise, purify_model, [0]
            )
            if f < grid.values[0]:
                continue
            key = (round(f, 12),) + tuple(round(u, 9) for u in usage)
            if key not in protos:
                protos[key] = _Proto(fidelity=f, usage=tuple(usage), tree=tree)
    server_time = time.perf_counter() - t0

    t1 = time.perf_counter()
    plist = sorted(protos.values(), key=lambda p: (-p.fidelity, p.usage))

    def standalone_capacity(p: _Proto) -> float:
        rate = float(np.min(limits / np.array(p.usage)))
        return rate * pair_capacity(p.fidelity)

    if max_ensembles is not None and len(plist) > max_ensembles:
        plist = sorted(plist, key=standalone_capacity, reverse=True)[:max_ensembles]

    n = len(plist)
    scheme = EMPTY_SCHEME
    if n:
        c = np.array([pair_capacity(p.fidelity) for p in plist])
        rows = [
            [(pi, p.usage[e]) for pi, p in enumerate(plist) if p.usage[e] > 0.0]
            for e in range(k)
        ]
        problem = LPProblem(
            num_vars=n, objective=c, rows=rows, rhs=limits,
            row_names=[f"l_{e}" for e in range(k)],
        )
        solution = solve_lp(problem, method=lp_method)
        entries = []
        prots = []
        swaps = 0.0
        purs = 0.0
        for pi, p in enumerate(plist):
            r = float(solution.rates[pi])
            if r <= 1e-9:
                continue
            entries.append((p.fidelity, r))
            prots.append(ProtocolFlow(fidelity=p.fidelity, rate=r, tree=p.tree))
            swaps += r * p.tree.count("s(")
            purs += r * p.tree.count("p(")
        egr = sum(r for _, r in entries)
        if egr > 0.0:
            spec = EnsembleSpec(tuple(entries))
            scheme = DistributionScheme(
                protocols=tuple(prots), ensembles=spec, egr=egr,
                fidelity=sum(f * r for f, r in entries) / egr,
                capacity=ensemble_capacity(spec),
                swaps=swaps / egr, purifications=purs / egr, pairs=len(entries),
            )
    solver_time = time.perf_counter() - t1

    return StrategyResult(
        strategy="oracle", scheme=scheme, server_time_s=server_time,
        solver_time_s=solver_time, grid_size=grid.resolution, f_lb=None,
        noise=noise, purify_model=purify_model,
    )


def oracle_best_single(
    path: Path,
    grid: FidelityGrid,
    noise: NoiseParams = DEFAULT_NOISE,
    max_purify_rounds: int = 2,
    purify_model: str = "ideal-dejmps",
) -> tuple[float, float, float]:
    """(capacity, rate, fidelity) of the best standalone protocol."""
    k = len(path.edges)
    if path.num_nodes > 4:
        raise OracleBoundsError("oracle paths are limited to 4 nodes")
    limits = np.array([link_egr(e) for e in path.edges])
    f0s = [e.f0 for e in path.edges]
    best = (0.0, 0.0, 0.0)
    for shape in _tree_shapes(0, k):
        slots = _tree_slots(shape)
        for rounds in np.ndindex(*([max_purify_rounds + 1] * slots)):
            f, usage, _ = _eval_protocol(
                shape, tuple(rounds), f0s, k, noise, purify_model, [0]
            )
            rate = float(np.min(limits / usage))
            cap = rate * pair_capacity(f)
            if cap > best[0]:
                best = (cap, rate, f)
    return best
