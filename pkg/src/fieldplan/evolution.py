"""Genome encoding and NSGA-II search over the field model.

A genome is a vector in [0, 1]: gene 0 picks the floorplan entry among the
entrance candidates, then five genes per room give the mass centre (x, y as
fractions of the envelope bounding box), the mass parameters (as fractions of
the room's width/height ranges) and the room entrance fraction.
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from fieldplan.circulation import (
    CirculationPattern,
    build_path_graph,
    path_generation,
    select_entrances,
)
from fieldplan.evaluation import ObjectiveVector, evaluate_layout
from fieldplan.field_engine import Allocation, FieldConstants, FieldParams, allocate_cells
from fieldplan.spec_model import DesignSpec, Grid, build_grid, entrance_candidate_cells

GENES_PER_ROOM = 5


@dataclass(frozen=True)
class OptimizerConfig:
    population_size: int = 50
    generations: int = 100
    crossover_probability: float = 0.9
    mutation_probability: float = 0.1
    eta_c: float = 20.0
    eta_m: float = 20.0
    seed: int = 0
    shorten_factor: float = 0.8
    constants: FieldConstants = field(default_factory=FieldConstants)

    def __post_init__(self):
        if self.population_size < 4 or self.population_size % 2:
            raise ValueError("population_size must be even and at least 4")
        if self.generations < 0:
            raise ValueError("generations must be non-negative")
        for name in ("crossover_probability", "mutation_probability"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not (self.eta_c > 0 and self.eta_m > 0):
            raise ValueError("distribution indices must be positive")
        if not 0 < self.shorten_factor <= 1:
            raise ValueError("shorten_factor must lie in (0, 1]")


def genome_length(spec: DesignSpec) -> int:
    return 1 + GENES_PER_ROOM * len(spec.rooms)


def genome_hash(genome: np.ndarray) -> str:
    return hashlib.sha256(np.asarray(genome, dtype="<f8").tobytes()).hexdigest()[:16]


class Decoded(NamedTuple):
    entry: int
    fields: list[FieldParams]
    entrance_fractions: list[float]


def _floor_index(gene: float, count: int) -> int:
    return min(int(math.floor(gene * count)), count - 1)


def decode_genome(g: np.ndarray, spec: DesignSpec, grid: Grid, candidates: Sequence[int] | None = None) -> Decoded:
    g = np.asarray(g, dtype=float)
    if g.shape != (genome_length(spec),):
        raise ValueError(f"genome length {g.size} does not match {genome_length(spec)} for this spec")
    if candidates is None:
        candidates = entrance_candidate_cells(spec, grid)
    minx, miny, maxx, maxy = spec.bounds
    fields, fractions = [], []
    for i, room in enumerate(spec.rooms):
        gx, gy, gmx, gmy, gent = g[1 + GENES_PER_ROOM * i : 1 + GENES_PER_ROOM * (i + 1)]
        wlo, whi = room.width_range
        hlo, hhi = room.height_range
        fields.append(
            FieldParams(
                x0=minx + float(gx) * (maxx - minx),
                y0=miny + float(gy) * (maxy - miny),
                m_x=wlo + float(gmx) * (whi - wlo),
                m_y=hlo + float(gmy) * (hhi - hlo),
            )
        )
        fractions.append(float(gent))
    return Decoded(candidates[_floor_index(float(g[0]), len(candidates))], fields, fractions)


class Phenotype(NamedTuple):
    decoded: Decoded
    alloc: Allocation
    entrances: list[int | None]
    pattern: CirculationPattern
    objectives: ObjectiveVector


def express(
    g: np.ndarray,
    spec: DesignSpec,
    grid: Grid,
    candidates: Sequence[int] | None = None,
    constants: FieldConstants = FieldConstants(),
    shorten_factor: float = 0.8,
) -> Phenotype:
    """Decode, allocate, route and evaluate one genome."""
    dec = decode_genome(g, spec, grid, candidates)
    alloc = allocate_cells(grid, dec.fields, constants)
    graph = build_path_graph(alloc, grid)
    entrances = select_entrances(dec.entrance_fractions, alloc, grid, graph)
    pattern = path_generation(graph, dec.entry, entrances, shorten_factor)
    objectives = evaluate_layout(spec, grid, dec.fields, alloc, pattern)
    return Phenotype(dec, alloc, entrances, pattern, objectives)


def initialize_population(
    config: OptimizerConfig, spec: DesignSpec, rng: np.random.Generator | None = None
) -> np.ndarray:
    """Uniform random genomes; without ``rng`` a generator is seeded from ``config.seed``."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    return rng.random((config.population_size, genome_length(spec)))


# -- NSGA-II machinery ----------------------------------------------------------


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def fast_nondominated_sort(objectives: Sequence[Sequence[float]]) -> list[list[int]]:
    n = len(objectives)
    if n == 0:
        return []
    width = len(objectives[0])
    if any(len(v) != width for v in objectives):
        raise ValueError("objective vectors differ in length")
    dominated_by: list[list[int]] = [[] for _ in range(n)]
    counts = [0] * n
    fronts: list[list[int]] = [[]]
    for p in range(n):
        for q in range(p + 1, n):
            if dominates(objectives[p], objectives[q]):
                dominated_by[p].append(q)
                counts[q] += 1
            elif dominates(objectives[q], objectives[p]):
                dominated_by[q].append(p)
                counts[p] += 1
    fronts[0] = [p for p in range(n) if counts[p] == 0]
    while fronts[-1]:
        nxt = []
        for p in fronts[-1]:
            for q in dominated_by[p]:
                counts[q] -= 1
                if counts[q] == 0:
                    nxt.append(q)
        fronts.append(sorted(nxt))
    return fronts[:-1]


def crowding_distance(front: Sequence[Sequence[float]]) -> list[float]:
    n = len(front)
    if n == 0:
        raise ValueError("front must be non-empty")
    dist = [0.0] * n
    for m in range(len(front[0])):
        order = sorted(range(n), key=lambda i: (front[i][m], i))
        lo, hi = front[order[0]][m], front[order[-1]][m]
        dist[order[0]] = dist[order[-1]] = math.inf
        if hi == lo:
            continue
        for k in range(1, n - 1):
            i = order[k]
            dist[i] += (front[order[k + 1]][m] - front[order[k - 1]][m]) / (hi - lo)
    return dist


def rank_and_crowding(objectives: Sequence[Sequence[float]]) -> tuple[np.ndarray, np.ndarray]:
    n = len(objectives)
    ranks = np.zeros(n, dtype=int)
    crowd = np.zeros(n)
    for r, front in enumerate(fast_nondominated_sort(objectives)):
        ranks[front] = r
        crowd[front] = crowding_distance([objectives[i] for i in front])
    return ranks, crowd


def _tournament(ranks: np.ndarray, crowd: np.ndarray, rng: np.random.Generator) -> int:
    a, b = (int(x) for x in rng.integers(0, len(ranks), size=2))
    ka = (ranks[a], -crowd[a], a)
    kb = (ranks[b], -crowd[b], b)
    return a if ka <= kb else b


def sbx_pair(
    p1: np.ndarray, p2: np.ndarray, eta: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Simulated binary crossover.

    Each gene is recombined with probability 0.5 and only where the parents
    differ, so genes shared by both parents (including exact bound values)
    pass through unchanged. Children are swapped per gene at random.
    """
    u = rng.random(p1.shape)
    beta = np.where(
        u <= 0.5,
        (2.0 * u) ** (1.0 / (eta + 1.0)),
        (1.0 / (2.0 * (1.0 - u))) ** (1.0 / (eta + 1.0)),
    )
    c1 = 0.5 * ((1.0 + beta) * p1 + (1.0 - beta) * p2)
    c2 = 0.5 * ((1.0 - beta) * p1 + (1.0 + beta) * p2)
    cross = (rng.random(p1.shape) < 0.5) & (np.abs(p1 - p2) > 1e-14)
    c1 = np.where(cross, c1, p1)
    c2 = np.where(cross, c2, p2)
    swap = rng.random(p1.shape) < 0.5
    return np.where(swap, c2, c1), np.where(swap, c1, c2)


def polynomial_mutation(x: np.ndarray, pm: float, eta: float, rng: np.random.Generator) -> np.ndarray:
    mask = rng.random(x.shape) < pm
    u = rng.random(x.shape)
    delta = np.where(
        u < 0.5,
        (2.0 * u) ** (1.0 / (eta + 1.0)) - 1.0,
        1.0 - (2.0 * (1.0 - u)) ** (1.0 / (eta + 1.0)),
    )
    return np.where(mask, x + delta, x)


def make_offspring(
    population: np.ndarray,
    ranks: np.ndarray,
    crowd: np.ndarray,
    config: OptimizerConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    n = config.population_size
    children = []
    while len(children) < n:
        p1 = population[_tournament(ranks, crowd, rng)]
        p2 = population[_tournament(ranks, crowd, rng)]
        if rng.random() < config.crossover_probability:
            c1, c2 = sbx_pair(p1, p2, config.eta_c, rng)
        else:
            c1, c2 = p1.copy(), p2.copy()
        for c in (c1, c2):
            c = polynomial_mutation(c, config.mutation_probability, config.eta_m, rng)
            children.append(np.clip(c, 0.0, 1.0))
    return np.array(children[:n])


def select_survivors(objectives: Sequence[Sequence[float]], size: int) -> list[int]:
    """Fill by front rank, breaking the last front by descending crowding distance."""
    chosen: list[int] = []
    for front in fast_nondominated_sort(objectives):
        if len(chosen) + len(front) <= size:
            chosen.extend(front)
            if len(chosen) == size:
                break
            continue
        crowd = crowding_distance([objectives[i] for i in front])
        order = sorted(range(len(front)), key=lambda k: (-crowd[k], front[k]))
        chosen.extend(front[k] for k in order[: size - len(chosen)])
        break
    return chosen


# -- run loop ---------------------------------------------------------------------


@dataclass
class Snapshot:
    genomes: np.ndarray
    objectives: list[tuple[float, ...]]
    born: list[int]

    def front(self) -> list[int]:
        return fast_nondominated_sort(self.objectives)[0]


@dataclass
class ParetoMember:
    genome: np.ndarray
    objectives: tuple[float, ...]
    generation: int


@dataclass
class RunArchive:
    labels: tuple[str, ...]
    snapshots: list[Snapshot]
    pareto: list[ParetoMember]
    evaluations: int
    wall_clock: float = 0.0

    def front_objectives(self, generation: int) -> list[tuple[float, ...]]:
        snap = self.snapshots[generation]
        return [snap.objectives[i] for i in snap.front()]


class Evaluator:
    """Memoised genome evaluation bound to one spec and grid."""

    def __init__(self, spec: DesignSpec, config: OptimizerConfig, grid: Grid | None = None):
        self.spec = spec
        self.grid = grid if grid is not None else build_grid(spec)
        self.candidates = entrance_candidate_cells(spec, self.grid)
        self.config = config
        self.cache: dict[bytes, tuple[float, ...]] = {}
        self.evaluations = 0

    def express(self, genome: np.ndarray) -> Phenotype:
        return express(
            genome,
            self.spec,
            self.grid,
            self.candidates,
            self.config.constants,
            self.config.shorten_factor,
        )

    def __call__(self, genome: np.ndarray) -> tuple[float, ...]:
        key = np.asarray(genome, dtype="<f8").tobytes()
        if key not in self.cache:
            self.cache[key] = self.express(genome).objectives.values
            self.evaluations += 1
        return self.cache[key]


def evolve(spec: DesignSpec, config: OptimizerConfig, grid: Grid | None = None) -> RunArchive:
    started = time.perf_counter()
    evaluator = Evaluator(spec, config, grid)
    rng = np.random.default_rng(config.seed)

    pop = initialize_population(config, spec, rng)
    objs = [evaluator(g) for g in pop]
    born = [0] * len(pop)
    snapshots = [Snapshot(pop.copy(), list(objs), list(born))]

    for gen in range(1, config.generations + 1):
        ranks, crowd = rank_and_crowding(objs)
        kids = make_offspring(pop, ranks, crowd, config, rng)
        kid_objs = [evaluator(g) for g in kids]
        merged = np.vstack([pop, kids])
        merged_objs = objs + kid_objs
        merged_born = born + [gen] * len(kids)
        keep = select_survivors(merged_objs, config.population_size)
        pop = merged[keep]
        objs = [merged_objs[i] for i in keep]
        born = [merged_born[i] for i in keep]
        snapshots.append(Snapshot(pop.copy(), list(objs), list(born)))

    final = snapshots[-1]
    seen = set()
    pareto = []
    for i in final.front():
        if final.objectives[i] in seen:
            continue
        seen.add(final.objectives[i])
        pareto.append(ParetoMember(final.genomes[i].copy(), final.objectives[i], final.born[i]))
    return RunArchive(
        labels=tuple(spec.objectives),
        snapshots=snapshots,
        pareto=pareto,
        evaluations=evaluator.evaluations,
        wall_clock=time.perf_counter() - started,
    )
