"""Genetic algorithm that learns per-scale fusion weights.

A chromosome holds one weight per feature block (raw image plus each
Gaussian scale, so four by default). Fitness is the mean per-category
retrieval precision obtained when every database record is used as a query
and ranked by the weighted sum of precomputed block d1 distances.

Fitness only depends on the ranking, which is unchanged when all genes are
scaled by the same positive factor. The search therefore runs over
directions in weight space, and two chromosomes differing by a scale factor
are equivalent.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from flnip.errors import EmptyCategory, EmptyPopulation, FlnipError, TooFewRecords
from flnip.metrics import per_block_distances
from flnip.patterns import format_value

log = logging.getLogger(__name__)

WEIGHTS_MAGIC = "FLNIPW 1"


@dataclass(frozen=True)
class GAConfig:
    population_size: int = 20
    generations: int = 50
    mutation_rate: float = 0.01
    crossover_rate: float = 0.9
    elite_count: int = 1
    rng_seed: int = 42
    top_k: int | None = None  # None: k = the query's category size
    exclude_self: bool = False
    threads: int = 1

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if not 1 <= self.elite_count < self.population_size:
            raise ValueError("elite_count must be in [1, population_size)")
        for name in ("mutation_rate", "crossover_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be a probability")
        if self.top_k is not None and self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


def precompute_tensor(features) -> np.ndarray:
    """Block d1 distances between all records, shaped (n_blocks, N, N).

    ``features`` is an (N, L) array or anything with a ``features`` matrix
    (such as a :class:`~flnip.retrieval.FeatureDatabase`).
    """
    mat = np.asarray(getattr(features, "features", features), dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] < 2:
        raise TooFewRecords("need at least two records to build a distance tensor")
    n = mat.shape[0]
    n_blocks = mat.shape[1] // 256
    tensor = np.empty((n_blocks, n, n))
    for i in range(n):
        tensor[:, i, :] = per_block_distances(mat[i], mat)
    return tensor


def category_index(labels) -> tuple[np.ndarray, np.ndarray]:
    """Integer category code per record plus each record's category size."""
    _, codes, sizes = np.unique(np.asarray(labels, dtype=object).astype(str), return_inverse=True, return_counts=True)
    return codes, sizes[codes]


def precision_per_query(dist: np.ndarray, labels, top_k=None, exclude_self=False) -> np.ndarray:
    """Precision of every row's ranking at k = its category size (or ``top_k``).

    Rows are ranked by ascending distance with ties in insertion order.
    """
    codes, sizes = category_index(labels)
    n = len(codes)
    dist = np.array(dist, dtype=np.float64)
    if exclude_self:
        np.fill_diagonal(dist, np.inf)
        sizes = sizes - 1
        if np.any(sizes == 0):
            raise EmptyCategory("a singleton category has no relevant records once the query is excluded")
    order = np.argsort(dist, axis=1, kind="stable")
    hits = np.cumsum(codes[order] == codes[:, None], axis=1)
    k = np.full(n, top_k) if top_k is not None else sizes
    limit = n - 1 if exclude_self else n
    if np.any(k > limit):
        raise ValueError(f"cut-off exceeds the {limit} rankable records")
    return hits[np.arange(n), k - 1] / k


def mean_category_precision(per_query: np.ndarray, labels) -> float:
    codes, _ = category_index(labels)
    means = [per_query[codes == c].mean() for c in range(codes.max() + 1)]
    return float(np.mean(means))


def fitness(chromosome, tensor: np.ndarray, labels, config: GAConfig | None = None) -> float:
    """Average over categories of the mean per-query precision."""
    config = config or GAConfig()
    genes = np.asarray(chromosome, dtype=np.float64)
    if len(labels) != tensor.shape[1]:
        raise FlnipError(f"{len(labels)} labels for {tensor.shape[1]} records")
    if any(str(lab) == "" for lab in labels):
        raise EmptyCategory("every record needs a category")
    dist = np.zeros(tensor.shape[1:])
    for wj, dj in zip(genes, tensor):
        dist = dist + wj * dj
    per_query = precision_per_query(dist, labels, config.top_k, config.exclude_self)
    return mean_category_precision(per_query, labels)


def roulette_select(fitnesses, rng: np.random.Generator) -> int:
    """Index drawn with probability proportional to fitness; uniform if all are zero."""
    fit = np.asarray(fitnesses, dtype=np.float64)
    if fit.size == 0:
        raise EmptyPopulation("cannot select from an empty population")
    if np.any(fit < 0):
        raise ValueError("fitness values must be nonnegative")
    total = fit.sum()
    if total <= 0:
        return int(rng.integers(fit.size))
    cum = np.cumsum(fit)
    idx = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
    # u * total can round up to total itself
    return min(idx, int(np.flatnonzero(fit > 0)[-1]))


def two_point_crossover(p1, p2, rng: np.random.Generator | None = None, cuts=None):
    """Swap the genes between two distinct cut points drawn from the interior
    gene boundaries."""
    p1 = np.asarray(p1, dtype=np.float64)
    p2 = np.asarray(p2, dtype=np.float64)
    if p1.shape != p2.shape:
        raise ValueError("parents must have equal length")
    if cuts is None and len(p1) < 3:
        a, b = 1, len(p1)  # too few boundaries for two interior cuts
    elif cuts is None:
        a, b = sorted(rng.choice(np.arange(1, len(p1)), size=2, replace=False))
    else:
        a, b = sorted(cuts)
    c1, c2 = p1.copy(), p2.copy()
    c1[a:b], c2[a:b] = p2[a:b], p1[a:b]
    return c1, c2


def mutate(chromosome, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Redraw each gene from U[0, 1) with probability ``rate``.

    Both the flip mask and the replacement values are always drawn, so the
    RNG advances by the same amount regardless of the outcome.
    """
    genes = np.asarray(chromosome, dtype=np.float64)
    flips = rng.random(genes.size) < rate
    fresh = rng.random(genes.size)
    return np.where(flips, fresh, genes)


def _evaluate(population, tensor, labels, config, pool) -> np.ndarray:
    if pool is None:
        return np.array([fitness(c, tensor, labels, config) for c in population])
    return np.array(list(pool.map(lambda c: fitness(c, tensor, labels, config), population)))


def evolve(tensor: np.ndarray, labels, config: GAConfig | None = None, initial_population=None):
    """Run the GA and return ``(best_chromosome, history)``.

    ``history[g]`` is the best fitness found in generation ``g``'s population.
    All random draws come from one generator in a fixed serial order, so the
    thread count never changes the outcome.
    """
    config = config or GAConfig()
    rng = np.random.default_rng(config.rng_seed)
    n_genes = tensor.shape[0]
    if initial_population is None:
        population = rng.random((config.population_size, n_genes))
    else:
        population = np.array(initial_population, dtype=np.float64)
        if population.shape != (config.population_size, n_genes):
            raise ValueError(f"initial population must have shape {(config.population_size, n_genes)}")

    pool = ThreadPoolExecutor(config.threads) if config.threads > 1 else None
    best, best_fit = None, -1.0
    history = []
    try:
        for gen in range(config.generations):
            fit = _evaluate(population, tensor, labels, config, pool)
            ranked = np.argsort(-fit, kind="stable")
            if fit[ranked[0]] > best_fit:
                best, best_fit = population[ranked[0]].copy(), float(fit[ranked[0]])
            history.append(float(fit[ranked[0]]))
            log.debug("generation %d best %.6f", gen, history[-1])
            if gen == config.generations - 1:
                break
            children = [population[i].copy() for i in ranked[: config.elite_count]]
            while len(children) < config.population_size:
                p1 = population[roulette_select(fit, rng)]
                p2 = population[roulette_select(fit, rng)]
                if rng.random() < config.crossover_rate:
                    c1, c2 = two_point_crossover(p1, p2, rng)
                else:
                    c1, c2 = p1.copy(), p2.copy()
                children.append(mutate(c1, config.mutation_rate, rng))
                if len(children) < config.population_size:
                    children.append(mutate(c2, config.mutation_rate, rng))
            population = np.array(children)
    finally:
        if pool is not None:
            pool.shutdown()
    return best, history


def format_weights(w) -> str:
    lines = [WEIGHTS_MAGIC, *(format_value(x) for x in w)]
    return "\n".join(lines) + "\n"


def parse_weights(text: str) -> np.ndarray:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != WEIGHTS_MAGIC:
        raise FlnipError("weights file must start with 'FLNIPW 1'")
    try:
        w = np.array([float(ln) for ln in lines[1:]])
    except ValueError as exc:
        raise FlnipError(f"bad weight value: {exc}") from None
    if w.size == 0:
        raise FlnipError("weights file holds no weights")
    return w
