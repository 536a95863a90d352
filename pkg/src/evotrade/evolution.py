"""Generational evolution of neural genomes across parallel markets.

Each generation draws K market populations, runs them independently, pools
every neural genome with its realized profit, and applies tournament
selection: the pool is shuffled, split into disjoint groups of
tournament_size, and each group is replaced by its winner plus
tournament_size - 1 Gaussian-mutated copies. Mutation noise per coordinate
is mutation_scale^2 times the pooled population variance of that
coordinate. The remainder of the pool that does not fill a whole group
passes through unchanged.

Reproducibility: every random draw comes from a generator keyed as
SeedSequence([seed, stream, generation, ...]) with disjoint stream ids for
spec draws (1), market runs (2), selection (3), pool padding (4), so runs
are deterministic for a given seed and build.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import neural
from .agents import AgentParams
from .market import MarketResult, MarketSpec, run_market

SPECIES_ORDER = ("ZI", "ZIP", "MO", "FV", "MR", "MM")


def rng_from(*keys) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(list(keys)))


@dataclass
class EvoConfig:
    generations: int = 100
    markets: int = 24  # markets per generation (K)
    timesteps: int = 500  # batches per market (T)
    steps_per_day: int = 100  # end-of-day book clear cadence
    tournament_size: int = 17
    p_select: float = 0.5
    mutation_scale: float = 0.1
    nn_min: int = 2
    nn_max: int = 10
    n_agents: int = 60  # total agents per market
    static_probs: tuple = (1 / 6,) * 6  # ZI, ZIP, MO, FV, MR, MM
    seed: int = 0
    initial_price: float = 100.0
    tick_size: float = 0.01
    max_order_age: int = 100
    agents: AgentParams = field(default_factory=AgentParams)

    def __post_init__(self):
        if self.tournament_size < 2:
            raise ValueError("tournament_size must be at least 2")
        if not (0.0 < self.p_select <= 1.0):
            raise ValueError("p_select must be in (0, 1]")
        if not (0 <= self.nn_min <= self.nn_max):
            raise ValueError("need 0 <= nn_min <= nn_max")
        if self.n_agents < self.nn_max:
            raise ValueError("n_agents must cover the largest neural draw")
        if len(self.static_probs) != 6:
            raise ValueError("static_probs needs one entry per static species")
        s = float(sum(self.static_probs))
        if not math.isclose(s, 1.0, rel_tol=0, abs_tol=1e-9):
            raise ValueError(f"static_probs must sum to 1, got {s}")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")


@dataclass
class GenerationRecord:
    generation: int
    species_profits: dict  # species -> np.ndarray of final profits, pooled over markets
    prices: list  # one post-batch price series per market
    best_genome: np.ndarray | None
    best_fitness: float

    def species_stats(self) -> dict:
        """species -> (mean, median) of pooled final profits."""
        return {
            sp: (float(np.mean(v)), float(np.median(v)))
            for sp, v in self.species_profits.items()
            if len(v)
        }


def draw_spec(config: EvoConfig, rng) -> MarketSpec:
    """Draw one market composition: uniform neural count, multinomial rest."""
    a_nn = int(rng.integers(config.nn_min, config.nn_max + 1))
    counts = rng.multinomial(config.n_agents - a_nn, config.static_probs)
    return MarketSpec(
        zi=int(counts[0]),
        zip=int(counts[1]),
        mo=int(counts[2]),
        fv=int(counts[3]),
        mr=int(counts[4]),
        mm=int(counts[5]),
        nn=a_nn,
    )


def pool_variances(genomes) -> np.ndarray:
    """Per-coordinate population variance with exact zeros replaced by 1.

    The substitution keeps mutation alive when a coordinate has collapsed
    (or the pool has a single member): the noise std for such coordinates
    becomes mutation_scale itself.
    """
    arr = np.stack(genomes)
    var = arr.var(axis=0)
    var[var == 0.0] = 1.0
    return var


def mutate(genome, variances, config: EvoConfig, rng) -> np.ndarray:
    """Gaussian perturbation: std per coordinate = scale * sqrt(variance)."""
    std = config.mutation_scale * np.sqrt(variances)
    return genome + rng.standard_normal(neural.GENOME_SIZE) * std


def _select_and_mutate(pool, config: EvoConfig, rng, variances):
    """One tournament over pool; returns (members, winner_fitness)."""
    tau = config.tournament_size
    idx = rng.choice(len(pool), size=tau, replace=False)
    entrants = sorted((pool[i] for i in idx), key=lambda gf: -gf[1])
    winner_rank = 0
    for i in range(tau):
        if rng.random() < config.p_select:
            winner_rank = i
            break
    winner, winner_fit = entrants[winner_rank]
    members = [winner]
    members.extend(mutate(winner, variances, config, rng) for _ in range(tau - 1))
    return members, winner_fit


def tournament(pool, config: EvoConfig, rng, variances=None):
    """Replace a pool sample with a winner and its mutated copies.

    pool is a list of (genome, fitness); the winner is the rank-i entrant
    (sorted by fitness, best first) with probability
    p_select * (1 - p_select)^i, falling back to the best if every rank
    declines. Returns tournament_size genomes, the unmutated winner first.
    """
    if len(pool) < config.tournament_size:
        raise ValueError(
            f"pool of {len(pool)} is smaller than tournament_size {config.tournament_size}"
        )
    if variances is None:
        variances = pool_variances([g for g, _ in pool])
    members, _ = _select_and_mutate(pool, config, rng, variances)
    return members


def _fit_pool_to(pool, need, config: EvoConfig, g: int):
    """Pad with fresh random genomes or drop the lowest provisional fitness."""
    if len(pool) < need:
        pad_rng = rng_from(config.seed, 4, g)
        pool = pool + [
            (neural.init_random(pad_rng), float("-inf")) for _ in range(need - len(pool))
        ]
    elif len(pool) > need:
        ranked = sorted(range(len(pool)), key=lambda i: -pool[i][1])
        keep = set(ranked[:need])
        pool = [pool[i] for i in range(len(pool)) if i in keep]
    return pool


def _selection_step(pool, config: EvoConfig, g: int):
    """Shuffle, run disjoint tournaments, pass the remainder through."""
    rng = rng_from(config.seed, 3, g)
    perm = rng.permutation(len(pool))
    shuffled = [pool[i] for i in perm]
    variances = pool_variances([gen for gen, _ in pool])
    tau = config.tournament_size
    n_groups = len(pool) // tau
    out = []
    for j in range(n_groups):
        group = shuffled[j * tau : (j + 1) * tau]
        members, winner_fit = _select_and_mutate(group, config, rng, variances)
        out.extend((m, winner_fit) for m in members)
    out.extend(shuffled[n_groups * tau :])
    perm2 = rng.permutation(len(out))
    return [out[i] for i in perm2]


def _market_task(args):
    spec, genomes, config, seed_keys = args
    rng = rng_from(*seed_keys)
    return run_market(spec, genomes, config, rng)


def run_evolution(config: EvoConfig, mechanism: str = "tournament", jobs: int = 1,
                  progress=None) -> list:
    """Run the full generational loop; returns one record per generation.

    mechanism "tournament" applies selection between generations;
    "identity" passes every genome through unchanged (used for harvesting
    behavior corpora where selection must not interfere).
    """
    if mechanism not in ("tournament", "identity"):
        raise ValueError(f"unknown mechanism {mechanism!r}")
    records = []
    pool: list = []  # (genome, fitness) carried between generations

    for g in range(config.generations):
        spec_rng = rng_from(config.seed, 1, g)
        specs = [draw_spec(config, spec_rng) for _ in range(config.markets)]
        need = sum(s.nn for s in specs)
        pool = _fit_pool_to(pool, need, config, g)

        tasks = []
        start = 0
        for k, spec in enumerate(specs):
            genomes = [gf[0] for gf in pool[start : start + spec.nn]]
            start += spec.nn
            tasks.append((spec, genomes, config, (config.seed, 2, g, k)))

        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as ex:
                results = list(ex.map(_market_task, tasks))
        else:
            results = [_market_task(t) for t in tasks]

        pool = _collect_pool(tasks, results)
        records.append(_make_record(g, results, pool))
        if mechanism == "tournament":
            pool = _selection_step(pool, config, g)
        if progress is not None:
            progress(g, records[-1])
    return records


def _collect_pool(tasks, results):
    pool = []
    for (spec, genomes, _, _), res in zip(tasks, results):
        for genome, fit in zip(genomes, res.nn_profits):
            pool.append((genome, float(fit)))
    return pool


def _make_record(g: int, results: list, pool: list) -> GenerationRecord:
    by_species: dict = {}
    for res in results:
        for species, _, profit in res.agent_profits:
            by_species.setdefault(species, []).append(profit)
    best_genome = None
    best_fit = float("-inf")
    for genome, fit in pool:  # strict > keeps the first of equals
        if fit > best_fit:
            best_genome, best_fit = genome, fit
    return GenerationRecord(
        generation=g,
        species_profits={sp: np.array(v) for sp, v in by_species.items()},
        prices=[res.prices for res in results],
        best_genome=best_genome,
        best_fitness=best_fit,
    )
