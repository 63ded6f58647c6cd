"""Differential evolution (rand/1/bin) over a box."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from steamflex.shared.errors import ConfigError
from steamflex.shared.log import vprint

BatchObjective = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class DeParams:
    population_size: int = 32
    F: float = 0.7
    CR: float = 0.9
    max_generations: int = 150
    # stop once the population objective spread is within tol·(1 + |best|); 0 disables
    tol: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if int(self.population_size) != self.population_size or self.population_size < 4:
            raise ConfigError(f"population_size must be an integer >= 4, got {self.population_size!r}")
        if not (0.0 < self.F < 2.0):
            raise ConfigError(f"differential weight F must be in (0, 2), got {self.F!r}")
        if not (0.0 <= self.CR <= 1.0):
            raise ConfigError(f"crossover rate CR must be in [0, 1], got {self.CR!r}")
        if self.max_generations < 0:
            raise ConfigError(f"max_generations must be >= 0, got {self.max_generations!r}")
        if self.tol < 0:
            raise ConfigError(f"tol must be >= 0, got {self.tol!r}")


@dataclass
class DeResult:
    x: np.ndarray
    fun: float
    # best-so-far objective after initialisation and after every generation
    trace: List[float] = field(default_factory=list)
    nfev: int = 0
    generations: int = 0
    converged: bool = False


def _rowwise(objective: Callable[[np.ndarray], float]) -> BatchObjective:
    def run(X: np.ndarray) -> np.ndarray:
        return np.array([objective(x) for x in X], dtype=float)

    return run


def differential_evolution(
    objective: Optional[Callable[[np.ndarray], float]],
    bounds: Sequence[Tuple[float, float]],
    params: DeParams = DeParams(),
    initial: Optional[np.ndarray] = None,
    batch_objective: Optional[BatchObjective] = None,
) -> DeResult:
    """Minimise ``objective`` over the box ``bounds``.

    ``batch_objective`` evaluates a whole population at once (e.g. in a worker
    pool) and takes precedence over ``objective``. Rows of ``initial`` replace
    the first random population members. The random generator is owned by this
    loop, so results depend only on ``params.seed``.
    """
    if batch_objective is None:
        if objective is None:
            raise ConfigError("differential evolution needs an objective")
        batch_objective = _rowwise(objective)

    lo = np.array([b[0] for b in bounds], dtype=float)
    hi = np.array([b[1] for b in bounds], dtype=float)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ConfigError("differential evolution bounds must be finite")
    if np.any(lo > hi):
        raise ConfigError("differential evolution bounds must satisfy lower <= upper")

    n_pop, dim = int(params.population_size), lo.size
    rng = np.random.default_rng(params.seed)

    pop = lo + (hi - lo) * rng.random((n_pop, dim))
    if initial is not None and len(initial):
        seeds = np.clip(np.atleast_2d(np.asarray(initial, dtype=float))[:n_pop], lo, hi)
        pop[: len(seeds)] = seeds

    def evaluate(X: np.ndarray) -> np.ndarray:
        values = np.asarray(batch_objective(X), dtype=float)
        return np.where(np.isnan(values), np.inf, values)

    fit = evaluate(pop)
    nfev = n_pop
    best_i = int(np.argmin(fit))
    best_x, best_f = pop[best_i].copy(), float(fit[best_i])
    trace = [best_f]

    others = np.arange(n_pop)
    converged = False
    generation = 0
    for generation in range(1, params.max_generations + 1):
        trials = np.empty_like(pop)
        for i in range(n_pop):
            a, b, c = rng.choice(others[others != i], size=3, replace=False)
            mutant = pop[a] + params.F * (pop[b] - pop[c])
            cross = rng.random(dim) < params.CR
            if dim:
                cross[rng.integers(dim)] = True
            trials[i] = np.clip(np.where(cross, mutant, pop[i]), lo, hi)

        trial_fit = evaluate(trials)
        nfev += n_pop
        better = trial_fit <= fit
        pop[better] = trials[better]
        fit[better] = trial_fit[better]

        gen_best = int(np.argmin(fit))
        if fit[gen_best] < best_f:
            best_x, best_f = pop[gen_best].copy(), float(fit[gen_best])
        trace.append(best_f)
        vprint(f"[de] generation {generation}: best {best_f:.6g}")

        if params.tol > 0 and np.all(np.isfinite(fit)):
            if np.max(fit) - np.min(fit) <= params.tol * (1.0 + abs(best_f)):
                converged = True
                break

    return DeResult(x=best_x, fun=best_f, trace=trace, nfev=nfev, generations=generation, converged=converged)
