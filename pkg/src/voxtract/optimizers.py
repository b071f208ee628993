"""Bounded black-box minimizers sharing one stop criterion and result type.

Five methods are available: a binary-encoded genetic algorithm, particle
swarm optimization, CMA-ES, Nelder-Mead, and a trust-region-reflective
least-squares solver. All of them:

* only ever evaluate candidates inside the bounds box,
* count objective calls exactly (finite-difference probes included),
* keep a per-iteration best-so-far history that never increases,
* are deterministic given the config seed, and
* stop on the shared criterion: cost below `target_cost`, no relative
  improvement over the previous `patience_loops` iterations, or the
  evaluation budget.

The search space for the matching pipeline is the normalized parameter box,
so bounds default to [0, 1]^d.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

METHODS = ("ga", "pso", "cmaes", "nm", "trf")

CONTINUE = "continue"
STOP_TARGET = "target"
STOP_STALLED = "stalled"
STOP_BUDGET = "budget"


@dataclass(frozen=True)
class Bounds:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("lower and upper must be 1-D vectors of equal length")
        if not np.all(np.isfinite(lower)) or not np.all(np.isfinite(upper)):
            raise ValueError("bounds must be finite")
        if not np.all(lower < upper):
            raise ValueError("need lower < upper componentwise")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)

    def contains(self, x: np.ndarray) -> bool:
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    @classmethod
    def unit_box(cls, dim: int) -> "Bounds":
        return cls(np.zeros(dim), np.ones(dim))


@dataclass(frozen=True)
class StopCriteria:
    """Shared stop rule: target cost, stall patience, and evaluation budget."""

    target_cost: float = 1e-4
    patience_loops: int = 20
    relative_tol: float = 1e-6
    max_evals: int = 10000

    def __post_init__(self):
        if self.target_cost <= 0:
            raise ValueError("target_cost must be positive")
        if self.patience_loops < 1:
            raise ValueError("patience_loops must be at least 1")
        if self.max_evals < 1:
            raise ValueError("max_evals must be at least 1")


@dataclass(frozen=True)
class OptimizerConfig:
    """Method selection plus method-specific hyperparameters."""

    method: str
    seed: int = 0
    # GA: binary chromosomes, tournament-2 selection, single elite
    ga_bits_per_gene: int = 32
    ga_crossover_rate: float = 0.9
    ga_mutation_rate: float = 0.03
    ga_population: int = 10
    # PSO
    pso_c1: float = 0.5
    pso_c2: float = 0.3
    pso_inertia: float = 0.9
    pso_particles: int = 10
    # CMA-ES: population defaults to 4 + floor(3 ln d)
    cma_sigma0: float = 0.3
    cma_population: int | None = None
    # Nelder-Mead
    nm_step: float = 0.1
    # Trust-region reflective
    trf_fd_step: float = 1e-3
    trf_initial_radius: float = 0.1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")


@dataclass
class OptimizationResult:
    best_x: np.ndarray
    best_cost: float
    n_evals: int
    n_iterations: int
    elapsed_s: float
    stop_reason: str
    history: np.ndarray


def check_stop(history, stop: StopCriteria, n_evals: int | None = None) -> str:
    """Decide whether to keep iterating, given the best-so-far history."""
    history = np.asarray(history, dtype=float)
    if history.size == 0:
        raise ValueError("history must be non-empty")
    latest = history[-1]
    if latest < stop.target_cost:
        return STOP_TARGET
    if n_evals is not None and n_evals >= stop.max_evals:
        return STOP_BUDGET
    if history.size > stop.patience_loops:
        reference = history[-1 - stop.patience_loops]
        improvement = reference - latest
        if improvement <= stop.relative_tol * max(abs(reference), 1e-30):
            return STOP_STALLED
    return CONTINUE


class _OutOfBudget(Exception):
    pass


class _Run:
    """Evaluation bookkeeping shared by all methods."""

    def __init__(self, objective, residual_fn, bounds: Bounds, stop: StopCriteria):
        self._objective = objective
        self._residual_fn = residual_fn
        self._residual_len = None
        self.bounds = bounds
        self.stop = stop
        self.n_evals = 0
        self.best_x = None
        self.best_cost = np.inf
        self.history: list[float] = []

    def _record(self, x, cost):
        if cost < self.best_cost:
            self.best_cost = float(cost)
            self.best_x = np.array(x, dtype=float)

    def eval(self, x) -> float:
        if self.n_evals >= self.stop.max_evals:
            raise _OutOfBudget
        self.n_evals += 1
        cost = float(self._objective(np.asarray(x, dtype=float)))
        self._record(x, cost)
        return cost

    def eval_residual(self, x) -> tuple[np.ndarray, float]:
        """Evaluate the residual vector; best-so-far is tracked by its MAE."""
        if self.n_evals >= self.stop.max_evals:
            raise _OutOfBudget
        self.n_evals += 1
        r = np.asarray(self._residual_fn(np.asarray(x, dtype=float)), dtype=float)
        if self._residual_len is None:
            self._residual_len = r.size
        elif r.size != self._residual_len:
            raise ValueError(
                f"residual length changed between calls: {self._residual_len} "
                f"then {r.size}"
            )
        cost = float(np.mean(np.abs(r)))
        self._record(x, cost)
        return r, cost

    def end_iteration(self) -> str:
        self.history.append(self.best_cost)
        return check_stop(self.history, self.stop, self.n_evals)


def optimize(objective, bounds: Bounds, cfg: OptimizerConfig,
             stop: StopCriteria, x0=None, residual_fn=None) -> OptimizationResult:
    """Minimize `objective` over the bounds box with the configured method.

    `x0` is the initial sample every method evaluates first; when omitted it
    is drawn uniformly from the method's seeded stream. The TRF method
    requires `residual_fn` (and ignores `objective`): it minimizes half the
    squared residual norm but reports costs as the residual MAE so results
    compare directly with the other methods.
    """
    dim = bounds.dim
    if cfg.method == "cmaes" and dim < 2:
        raise ValueError("CMA-ES does not support single-parameter search")
    if cfg.method == "trf":
        if residual_fn is None:
            raise ValueError("the trf method needs residual_fn")
    elif objective is None:
        raise ValueError(f"method {cfg.method!r} needs a scalar objective")

    rng = np.random.Generator(np.random.Philox(seed=np.random.SeedSequence(cfg.seed)))
    if x0 is None:
        x0 = rng.uniform(bounds.lower, bounds.upper)
    else:
        x0 = np.asarray(x0, dtype=float)
        if x0.shape != (dim,):
            raise ValueError(f"x0 must have shape ({dim},)")
        if not bounds.contains(x0):
            raise ValueError("x0 outside bounds")

    run = _Run(objective, residual_fn, bounds, stop)
    runner = {
        "ga": _ga,
        "pso": _pso,
        "cmaes": _cmaes,
        "nm": _nelder_mead,
        "trf": _trf,
    }[cfg.method]

    started = time.perf_counter()
    try:
        # Every method evaluates the initial sample first; if it already
        # meets the target there is nothing to optimize.
        if cfg.method == "trf":
            first = run.eval_residual(x0)
        else:
            first = run.eval(x0)
        if run.best_cost < stop.target_cost:
            reason = STOP_TARGET
        else:
            reason = runner(run, cfg, rng, x0, first)
    except _OutOfBudget:
        reason = STOP_BUDGET
    elapsed = time.perf_counter() - started

    if not run.history or run.history[-1] != run.best_cost:
        run.history.append(run.best_cost)
    n_iterations = max(0, len(run.history) - 1)
    return OptimizationResult(
        best_x=run.best_x,
        best_cost=run.best_cost,
        n_evals=run.n_evals,
        n_iterations=n_iterations,
        elapsed_s=elapsed,
        stop_reason=reason,
        history=np.asarray(run.history),
    )


def ga_run(objective, bounds, cfg, stop, x0=None):
    return optimize(objective, bounds, _with_method(cfg, "ga"), stop, x0)


def pso_run(objective, bounds, cfg, stop, x0=None):
    return optimize(objective, bounds, _with_method(cfg, "pso"), stop, x0)


def cmaes_run(objective, bounds, cfg, stop, x0=None):
    return optimize(objective, bounds, _with_method(cfg, "cmaes"), stop, x0)


def nelder_mead_run(objective, bounds, cfg, stop, x0=None):
    return optimize(objective, bounds, _with_method(cfg, "nm"), stop, x0)


def trf_run(residual_fn, bounds, cfg, stop, x0=None):
    return optimize(None, bounds, _with_method(cfg, "trf"), stop, x0,
                    residual_fn=residual_fn)


def _with_method(cfg: OptimizerConfig, method: str) -> OptimizerConfig:
    if cfg.method == method:
        return cfg
    from dataclasses import replace
    return replace(cfg, method=method)


# ---------------------------------------------------------------------------
# Genetic algorithm

def _ga_decode(bits: np.ndarray, bounds: Bounds, bits_per_gene: int) -> np.ndarray:
    """Fixed-point decode; all-zero bits are exactly the lower bound."""
    pop = bits.reshape(bits.shape[0], bounds.dim, bits_per_gene)
    weights = 2.0 ** np.arange(bits_per_gene - 1, -1, -1)
    ints = pop @ weights
    frac = ints / (2.0 ** bits_per_gene - 1.0)
    return bounds.lower + frac * bounds.span


def _ga_encode(x: np.ndarray, bounds: Bounds, bits_per_gene: int) -> np.ndarray:
    frac = (x - bounds.lower) / bounds.span
    ints = np.round(frac * (2.0 ** bits_per_gene - 1.0)).astype(np.uint64)
    bits = np.zeros(bounds.dim * bits_per_gene, dtype=bool)
    for j, value in enumerate(ints):
        for b in range(bits_per_gene):
            bits[j * bits_per_gene + b] = (value >> (bits_per_gene - 1 - b)) & 1
    return bits


def _ga(run: _Run, cfg: OptimizerConfig, rng, x0, first) -> str:
    pop_size = cfg.ga_population
    n_bits = cfg.ga_bits_per_gene * run.bounds.dim

    pop = np.zeros((pop_size, n_bits), dtype=bool)
    pop[0] = _ga_encode(x0, run.bounds, cfg.ga_bits_per_gene)
    pop[1:] = rng.random((pop_size - 1, n_bits)) < 0.5
    costs = np.empty(pop_size)
    decoded = _ga_decode(pop, run.bounds, cfg.ga_bits_per_gene)
    for i in range(pop_size):
        costs[i] = run.eval(decoded[i])
    decision = run.end_iteration()

    while decision == CONTINUE:
        elite = int(np.argmin(costs))
        children = [pop[elite].copy()]
        child_costs = [costs[elite]]
        while len(children) < pop_size:
            parents = []
            for _ in range(2):
                a, b = rng.integers(0, pop_size, size=2)
                parents.append(pop[a if costs[a] <= costs[b] else b].copy())
            if rng.random() < cfg.ga_crossover_rate:
                point = int(rng.integers(1, n_bits))
                parents[0][point:], parents[1][point:] = (
                    parents[1][point:].copy(), parents[0][point:].copy())
            for child in parents:
                if len(children) == pop_size:
                    break
                child ^= rng.random(n_bits) < cfg.ga_mutation_rate
                children.append(child)
                child_costs.append(None)
        pop = np.array(children)
        decoded = _ga_decode(pop, run.bounds, cfg.ga_bits_per_gene)
        for i in range(pop_size):
            if child_costs[i] is None:
                child_costs[i] = run.eval(decoded[i])
        costs = np.asarray(child_costs, dtype=float)
        decision = run.end_iteration()
    return decision


# ---------------------------------------------------------------------------
# Particle swarm

def _pso(run: _Run, cfg: OptimizerConfig, rng, x0, first) -> str:
    n = cfg.pso_particles
    dim = run.bounds.dim
    pos = np.empty((n, dim))
    pos[0] = x0
    pos[1:] = rng.uniform(run.bounds.lower, run.bounds.upper, size=(n - 1, dim))
    vel = np.zeros((n, dim))

    costs = np.empty(n)
    costs[0] = first
    for i in range(1, n):
        costs[i] = run.eval(pos[i])
    pbest = pos.copy()
    pbest_cost = costs.copy()
    g = int(np.argmin(pbest_cost))
    gbest = pbest[g].copy()
    gbest_cost = pbest_cost[g]
    decision = run.end_iteration()

    while decision == CONTINUE:
        r1 = rng.random((n, dim))
        r2 = rng.random((n, dim))
        vel = (cfg.pso_inertia * vel
               + cfg.pso_c1 * r1 * (pbest - pos)
               + cfg.pso_c2 * r2 * (gbest - pos))
        pos = pos + vel
        below = pos < run.bounds.lower
        above = pos > run.bounds.upper
        pos = np.where(below, run.bounds.lower, pos)
        pos = np.where(above, run.bounds.upper, pos)
        vel[below | above] = 0.0

        for i in range(n):
            cost = run.eval(pos[i])
            if cost < pbest_cost[i]:
                pbest_cost[i] = cost
                pbest[i] = pos[i]
                if cost < gbest_cost:
                    gbest_cost = cost
                    gbest = pos[i].copy()
        decision = run.end_iteration()
    return decision


# ---------------------------------------------------------------------------
# CMA-ES

class CmaesState:
    """Standard (mu/mu_w, lambda) CMA-ES with rank-1 and rank-mu updates.

    Exposed as a class so the covariance dynamics can be inspected; the
    `optimize` dispatcher drives it through ask/tell.
    """

    def __init__(self, x0, sigma0, bounds: Bounds, rng, population=None):
        self.bounds = bounds
        self.rng = rng
        self.dim = d = bounds.dim
        self.mean = np.asarray(x0, dtype=float).copy()
        self.sigma = float(sigma0)

        self.lam = population if population else 4 + int(3 * np.log(d))
        self.mu = self.lam // 2
        w = np.log((self.lam + 1) / 2.0) - np.log(np.arange(1, self.mu + 1))
        self.weights = w / w.sum()
        self.mu_eff = 1.0 / np.sum(self.weights ** 2)

        self.c_sigma = (self.mu_eff + 2) / (d + self.mu_eff + 5)
        self.d_sigma = (1 + 2 * max(0.0, np.sqrt((self.mu_eff - 1) / (d + 1)) - 1)
                        + self.c_sigma)
        self.c_c = (4 + self.mu_eff / d) / (d + 4 + 2 * self.mu_eff / d)
        self.c_1 = 2 / ((d + 1.3) ** 2 + self.mu_eff)
        self.c_mu = min(1 - self.c_1,
                        2 * (self.mu_eff - 2 + 1 / self.mu_eff)
                        / ((d + 2) ** 2 + self.mu_eff))
        self.chi_n = np.sqrt(d) * (1 - 1 / (4 * d) + 1 / (21 * d * d))

        self.C = np.eye(d)
        self.p_sigma = np.zeros(d)
        self.p_c = np.zeros(d)
        self.generation = 0
        self._decompose()

    def _decompose(self):
        self.C = (self.C + self.C.T) / 2.0
        eigvals, self.B = np.linalg.eigh(self.C)
        self.D = np.sqrt(np.maximum(eigvals, 1e-20))

    def ask(self) -> np.ndarray:
        """Sample lambda candidates; out-of-bounds draws are resampled up to
        100 times, then clamped."""
        xs = np.empty((self.lam, self.dim))
        for i in range(self.lam):
            for _attempt in range(100):
                z = self.rng.standard_normal(self.dim)
                x = self.mean + self.sigma * (self.B @ (self.D * z))
                if self.bounds.contains(x):
                    break
            xs[i] = self.bounds.clip(x)
        return xs

    def tell(self, xs: np.ndarray, costs: np.ndarray):
        order = np.argsort(costs, kind="stable")[: self.mu]
        selected = xs[order]
        y = (selected - self.mean) / self.sigma
        y_w = self.weights @ y

        self.mean = self.mean + self.sigma * y_w

        c_inv_sqrt_yw = self.B @ ((self.B.T @ y_w) / self.D)
        self.p_sigma = ((1 - self.c_sigma) * self.p_sigma
                        + np.sqrt(self.c_sigma * (2 - self.c_sigma) * self.mu_eff)
                        * c_inv_sqrt_yw)
        self.generation += 1
        ps_norm = np.linalg.norm(self.p_sigma)
        h_sigma = (ps_norm
                   / np.sqrt(1 - (1 - self.c_sigma) ** (2 * self.generation))
                   < (1.4 + 2 / (self.dim + 1)) * self.chi_n)
        self.p_c = ((1 - self.c_c) * self.p_c
                    + h_sigma * np.sqrt(self.c_c * (2 - self.c_c) * self.mu_eff) * y_w)

        rank_mu = (self.weights[:, None] * y).T @ y
        self.C = ((1 - self.c_1 - self.c_mu) * self.C
                  + self.c_1 * (np.outer(self.p_c, self.p_c)
                                + (not h_sigma) * self.c_c * (2 - self.c_c) * self.C)
                  + self.c_mu * rank_mu)
        self.sigma *= np.exp((self.c_sigma / self.d_sigma)
                             * (ps_norm / self.chi_n - 1))
        self._decompose()


def _cmaes(run: _Run, cfg: OptimizerConfig, rng, x0, first) -> str:
    state = CmaesState(x0, cfg.cma_sigma0, run.bounds, rng, cfg.cma_population)
    decision = run.end_iteration()
    while decision == CONTINUE:
        xs = state.ask()
        costs = np.array([run.eval(x) for x in xs])
        state.tell(xs, costs)
        decision = run.end_iteration()
    return decision


# ---------------------------------------------------------------------------
# Nelder-Mead

def _nelder_mead(run: _Run, cfg: OptimizerConfig, rng, x0, first) -> str:
    alpha, gamma, rho, shrink = 1.0, 2.0, 0.5, 0.5
    dim = run.bounds.dim

    verts = [np.array(x0, dtype=float)]
    for j in range(dim):
        v = np.array(x0, dtype=float)
        step = cfg.nm_step
        if v[j] + step > run.bounds.upper[j]:
            step = -step  # reflect the initial step inward at the bound
        v[j] += step
        verts.append(run.bounds.clip(v))
    verts = np.array(verts)
    costs = np.array([first] + [run.eval(v) for v in verts[1:]])
    decision = run.end_iteration()

    while decision == CONTINUE:
        order = np.argsort(costs, kind="stable")
        verts, costs = verts[order], costs[order]
        centroid = verts[:-1].mean(axis=0)

        reflected = run.bounds.clip(centroid + alpha * (centroid - verts[-1]))
        cost_r = run.eval(reflected)
        if cost_r < costs[0]:
            expanded = run.bounds.clip(centroid + gamma * (reflected - centroid))
            cost_e = run.eval(expanded)
            if cost_e < cost_r:
                verts[-1], costs[-1] = expanded, cost_e
            else:
                verts[-1], costs[-1] = reflected, cost_r
        elif cost_r < costs[-2]:
            verts[-1], costs[-1] = reflected, cost_r
        else:
            if cost_r < costs[-1]:
                contracted = run.bounds.clip(centroid + rho * (reflected - centroid))
                threshold = cost_r
            else:
                contracted = run.bounds.clip(centroid + rho * (verts[-1] - centroid))
                threshold = costs[-1]
            cost_c = run.eval(contracted)
            if cost_c < threshold:
                verts[-1], costs[-1] = contracted, cost_c
            else:
                for i in range(1, dim + 1):
                    verts[i] = verts[0] + shrink * (verts[i] - verts[0])
                    costs[i] = run.eval(verts[i])
        decision = run.end_iteration()
    return decision


# ---------------------------------------------------------------------------
# Trust-region reflective least squares

def _trf_subproblem(A: np.ndarray, b: np.ndarray, radius: float) -> np.ndarray:
    """Minimize 0.5 a'Aa + b'a subject to ||a|| <= radius (A is 1x1 or 2x2 PSD)."""
    try:
        a = np.linalg.solve(A, -b)
        if np.linalg.norm(a) <= radius:
            return a
    except np.linalg.LinAlgError:
        pass
    eigvals, vecs = np.linalg.eigh(A)
    b_rot = vecs.T @ b
    lo = max(0.0, -float(eigvals.min())) + 1e-14

    def step_norm(nu):
        return np.linalg.norm(b_rot / (eigvals + nu))

    hi = lo + 1.0
    while step_norm(hi) > radius and hi < 1e16:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if step_norm(mid) > radius:
            lo = mid
        else:
            hi = mid
    nu = 0.5 * (lo + hi)
    return vecs @ (-b_rot / (eigvals + nu))


def _trf(run: _Run, cfg: OptimizerConfig, rng, x0, first) -> str:
    bounds = run.bounds
    dim = bounds.dim
    x = np.array(x0, dtype=float)
    r = first[0]
    cost_sq = 0.5 * float(r @ r)
    radius = cfg.trf_initial_radius
    max_radius = float(np.linalg.norm(bounds.span))
    decision = run.end_iteration()

    while decision == CONTINUE:
        # Jacobian by forward differences; probe backward when a bound is in
        # the way so probes stay feasible.
        J = np.empty((r.size, dim))
        for j in range(dim):
            h = cfg.trf_fd_step * bounds.span[j]
            if x[j] + h > bounds.upper[j]:
                h = -h
            probe = x.copy()
            probe[j] += h
            r_probe, _ = run.eval_residual(probe)
            J[:, j] = (r_probe - r) / h

        g = J.T @ r
        gnorm = np.linalg.norm(g)
        if gnorm == 0.0:
            decision = run.end_iteration()
            continue
        # 2-D subspace: steepest descent plus Gauss-Newton directions.
        p_gn = np.linalg.lstsq(J, -r, rcond=None)[0]
        basis = [-g / gnorm]
        gn_residual = p_gn - (p_gn @ basis[0]) * basis[0]
        gn_norm = np.linalg.norm(gn_residual)
        if gn_norm > 1e-12 * max(1.0, np.linalg.norm(p_gn)):
            basis.append(gn_residual / gn_norm)
        V = np.stack(basis, axis=1)

        JV = J @ V
        A = JV.T @ JV
        b = JV.T @ r
        a = _trf_subproblem(A, b, radius)
        p = V @ a
        hit_radius = np.linalg.norm(p) >= 0.999 * radius

        def model_reduction(step):
            Js = J @ step
            return -(0.5 * float(Js @ Js) + float(r @ Js))

        candidate = x + p
        if not bounds.contains(candidate):
            # Either stop exactly at the first bound crossed or reflect the
            # step back into the box; keep whichever the model prefers.
            with np.errstate(divide="ignore", invalid="ignore"):
                to_lo = np.where(p < 0, (bounds.lower - x) / p, np.inf)
                to_hi = np.where(p > 0, (bounds.upper - x) / p, np.inf)
            theta = min(1.0, float(np.minimum(to_lo, to_hi).min()))
            at_bound = bounds.clip(x + theta * p)
            reflected = x + p
            over = reflected > bounds.upper
            under = reflected < bounds.lower
            reflected[over] = 2 * bounds.upper[over] - reflected[over]
            reflected[under] = 2 * bounds.lower[under] - reflected[under]
            reflected = bounds.clip(reflected)
            candidate = max((at_bound, reflected),
                            key=lambda c: model_reduction(c - x))

        step = candidate - x
        predicted = model_reduction(step)
        r_new, _ = run.eval_residual(candidate)
        cost_sq_new = 0.5 * float(r_new @ r_new)
        actual = cost_sq - cost_sq_new
        ratio = actual / predicted if predicted > 0 else 0.0

        if actual > 0:
            x, r, cost_sq = candidate, r_new, cost_sq_new
        if ratio < 0.25:
            radius = max(radius * 0.25, 1e-12)
        elif ratio > 0.75 and hit_radius:
            radius = min(radius * 2.0, max_radius)
        decision = run.end_iteration()
    return decision
