"""Relay-selection solvers over a common interface.

All solvers take (topology, profiles, caps, config) and return a final
Matching plus an IterationTrace. The stochastic ones draw from a
numpy Generator, so fixed seeds reproduce runs bit-exactly.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, EnumerationLimitError
from .matching import (SATISFACTION_TOL, Matching, count_strategies,
                       enumerate_strategies)

log = logging.getLogger(__name__)

SOLVER_KINDS = ("pma", "best_response", "many_to_one", "substitutable", "exhaustive")


@dataclass
class SolverConfig:
    kind: str = "pma"
    max_iterations: int = 1000
    stop_window: int = 100           # iterations without improvement => converged
    beta_max: float = 1000.0         # clip for the annealing schedule
    # The inverse temperature rises by 1 per anneal_scale source activations,
    # so small systems keep exploring for as many activations as large ones.
    anneal_scale: float = 60.0
    seed: Optional[int] = None
    strategy_cap: int = 10 ** 8      # enumeration guard (oracle, best response)
    radio_quota: int = 2             # substitutable baseline only
    shared_rate_attractiveness: bool = True
    include_empty: bool = True       # oracle: allow the empty strategy
    max_set_size: Optional[int] = None
    # Convergence bookkeeping: a gain this small is indistinguishable from
    # the Boltzmann wandering that finite beta cannot suppress, so it does
    # not count as progress. Exact-identity checks use SATISFACTION_TOL.
    improvement_tol: float = 1e-2
    label: Optional[str] = None
    beta_schedule: Optional[Callable[[int], float]] = None

    def __post_init__(self):
        if self.kind not in SOLVER_KINDS:
            raise ConfigurationError(f"unknown solver kind {self.kind!r}")
        if self.max_iterations < 1:
            raise ConfigurationError("max_iterations must be >= 1")
        if self.stop_window < 1:
            raise ConfigurationError("stop_window must be >= 1")
        if self.beta_max < 0:
            raise ConfigurationError("beta_max must be >= 0")
        if self.anneal_scale <= 0:
            raise ConfigurationError("anneal_scale must be positive")

    def beta(self, activations: int) -> float:
        """Inverse temperature after a total number of source activations."""
        if self.beta_schedule is not None:
            return self.beta_schedule(activations)
        return min(activations / self.anneal_scale, self.beta_max)

    @property
    def name(self) -> str:
        return self.label or self.kind


@dataclass
class IterationTrace:
    """Per-activation record of one solver run.

    One entry per acting source; `iteration` holds the 1-based iteration
    index of each entry (several sources act within one iteration).
    initial_lambda is the value of the random initial state.
    """
    lam: np.ndarray
    actor: np.ndarray
    accepted: np.ndarray
    convergence_iteration: Optional[int]
    initial_lambda: float
    iteration: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.iteration is None:
            self.iteration = np.arange(1, len(self.lam) + 1)

    def __len__(self):
        return len(self.lam)

    @property
    def num_iterations(self) -> int:
        return int(self.iteration[-1]) if len(self.iteration) else 0

    def final_lambda(self) -> float:
        return float(self.lam[-1]) if len(self.lam) else self.initial_lambda

    def lambda_per_iteration(self) -> np.ndarray:
        """Global satisfaction at the end of each iteration."""
        out = np.empty(self.num_iterations)
        for k, lam in zip(self.iteration, self.lam):
            out[k - 1] = lam
        return out

    def write_csv(self, fh) -> None:
        fh.write("iteration,lambda,actor,accepted\n")
        for i in range(len(self.lam)):
            fh.write(f"{int(self.iteration[i])},{float(self.lam[i])!r},"
                     f"{int(self.actor[i])},{int(self.accepted[i])}\n")


def pma_accept(u_new: float, u_old: float, beta: float) -> float:
    """Two-point Boltzmann acceptance probability of the new strategy.

    Computed from the utility gap so pma_accept(a, b, beta) and its mirror
    sum to exactly 1.
    """
    if beta < 0:
        raise ConfigurationError("beta must be >= 0")
    d = beta * (u_new - u_old)
    if d >= 0:
        return 1.0 / (1.0 + math.exp(-d))
    return 1.0 - 1.0 / (1.0 + math.exp(d))


def pma_propose(attractiveness: Sequence[float], quota: int, rng,
                size: Optional[int] = None) -> tuple:
    """Sample a candidate radio set: size uniform in {1..quota} unless given,
    radios drawn without replacement with probability proportional to
    attractiveness."""
    w = np.asarray(attractiveness, dtype=float)
    idx = np.flatnonzero(w > 0)
    if idx.size == 0:
        log.info("all relay radios unattractive; proposing the empty set")
        return ()
    if size is None:
        size = int(rng.integers(1, quota + 1))
    size = min(size, idx.size)
    p = w[idx] / w[idx].sum()
    pick = rng.choice(idx, size=size, replace=False, p=p)
    return tuple(sorted(int(i) for i in pick))


class _MoveEvaluator:
    """Relay acceptance utility for one deviating source, cached across the
    candidate strategies of a single move.

    Utility of a candidate set: the deviator's satisfaction plus, for every
    source sharing a touched radio, its satisfaction change versus the
    deviator dropping out. Only sources on touched radios enter the sum;
    everyone else's terms are identically zero.
    """

    __slots__ = ("source", "caps", "profiles", "loads0", "occ", "strategies",
                 "_base")

    def __init__(self, strategies, loads, caps_rows, profiles, source):
        self.source = source
        self.caps = caps_rows
        self.profiles = profiles
        self.strategies = strategies
        loads0 = list(loads)
        for l in strategies[source]:
            loads0[l] -= 1
        self.loads0 = loads0
        occ = [[] for _ in loads0]
        for k, strat in enumerate(strategies):
            if k != source:
                for l in strat:
                    occ[l].append(k)
        self.occ = occ
        self._base = {}

    def _absent(self, k):
        """(rate, satisfaction) of source k with the deviator absent."""
        cached = self._base.get(k)
        if cached is None:
            rate = 0.0
            row = self.caps[k]
            loads0 = self.loads0
            for l in self.strategies[k]:
                rate += row[l] / loads0[l]
            cached = (rate, self.profiles[k].evaluate(rate))
            self._base[k] = cached
        return cached

    def utility(self, candidate) -> float:
        loads0 = self.loads0
        row = self.caps[self.source]
        rate = 0.0
        for l in candidate:
            rate += row[l] / (loads0[l] + 1)
        value = self.profiles[self.source].evaluate(rate)
        drops = {}
        for l in candidate:
            a = loads0[l]
            if a:
                shrink = 1.0 / a - 1.0 / (a + 1)
                for k in self.occ[l]:
                    drops[k] = drops.get(k, 0.0) + self.caps[k][l] * shrink
        for k, drop in drops.items():
            base_rate, base_f = self._absent(k)
            value += self.profiles[k].evaluate(base_rate - drop) - base_f
        return value


def _lambda_of(strategies, loads, caps_rows, profiles) -> float:
    total = 0.0
    for n, strat in enumerate(strategies):
        rate = 0.0
        row = caps_rows[n]
        for l in strat:
            rate += row[l] / loads[l]
        total += profiles[n].evaluate(rate)
    return total


def _random_initial(quotas, num_radios, rng):
    """Each source starts on a uniformly random nonempty radio set."""
    strategies = []
    for q in quotas:
        size = min(int(rng.integers(1, q + 1)), num_radios)
        pick = rng.choice(num_radios, size=size, replace=False)
        strategies.append(tuple(sorted(int(i) for i in pick)))
    return strategies


def _apply(strategies, loads, source, new_set):
    for l in strategies[source]:
        loads[l] -= 1
    for l in new_set:
        loads[l] += 1
    strategies[source] = tuple(new_set)


def run_pma(topology, profiles, caps, config: SolverConfig, rng=None,
            quota_override: Optional[int] = None, observer=None):
    """Potential matching: per iteration, every source (in random order)
    proposes a weighted random radio set — or a full withdrawal — which the
    relay side accepts with Boltzmann probability at the annealed inverse
    temperature.

    Sources act one at a time, so every state change is a unilateral
    deviation. The walk is stochastic, so the best state visited is tracked
    and returned; the run converges once stop_window iterations pass without
    a material gain over that best value.
    """
    rng = np.random.default_rng(config.seed) if rng is None else rng
    n_src, n_radio = topology.num_sources, topology.num_radios
    quotas = [min(s.num_radios, quota_override) if quota_override else s.num_radios
              for s in topology.sources]
    caps_rows = caps.tolist()
    strategies = _random_initial(quotas, n_radio, rng)
    loads = [0] * n_radio
    for strat in strategies:
        for l in strat:
            loads[l] += 1

    lam = _lambda_of(strategies, loads, caps_rows, profiles)
    initial_lambda = lam
    best_lam = lam
    best_strategies = list(strategies)
    last_improve = 0
    tol = config.improvement_tol
    lam_hist, actor_hist, acc_hist, iter_hist = [], [], [], []
    converged = None
    activations = 0

    for k in range(1, config.max_iterations + 1):
        for n in map(int, rng.permutation(n_src)):
            activations += 1
            beta = config.beta(activations)
            if config.shared_rate_attractiveness:
                weights = [caps_rows[n][l] / (loads[l] + (0 if l in strategies[n] else 1))
                           for l in range(n_radio)]
            else:
                weights = caps_rows[n]
            size = int(rng.integers(0, quotas[n] + 1))
            candidate = () if size == 0 else pma_propose(weights, quotas[n], rng,
                                                         size=size)
            ev = _MoveEvaluator(strategies, loads, caps_rows, profiles, n)
            u_old = ev.utility(strategies[n])
            u_new = ev.utility(candidate)
            accepted = bool(rng.random() < pma_accept(u_new, u_old, beta))
            if accepted and candidate != strategies[n]:
                _apply(strategies, loads, n, candidate)
                lam = _lambda_of(strategies, loads, caps_rows, profiles)
                if lam > best_lam + tol:
                    last_improve = k
                if lam > best_lam + SATISFACTION_TOL:
                    best_lam = lam
                    best_strategies = list(strategies)
            iter_hist.append(k)
            lam_hist.append(lam)
            actor_hist.append(n)
            acc_hist.append(accepted)
            if observer is not None:
                observer({"iteration": k, "actor": n, "candidate": candidate,
                          "u_old": u_old, "u_new": u_new, "accepted": accepted,
                          "lambda": lam, "strategies": tuple(strategies)})
        if k - last_improve >= config.stop_window:
            converged = last_improve
            break

    trace = IterationTrace(lam=np.array(lam_hist), actor=np.array(actor_hist),
                           accepted=np.array(acc_hist, dtype=bool),
                           convergence_iteration=converged,
                           initial_lambda=initial_lambda,
                           iteration=np.array(iter_hist))
    return Matching(best_strategies, n_radio), trace


def run_many_to_one(topology, profiles, caps, config: SolverConfig, rng=None,
                    observer=None):
    """PMA with every source quota clamped to a single radio."""
    return run_pma(topology, profiles, caps, config, rng=rng,
                   quota_override=1, observer=observer)


def run_best_response(topology, profiles, caps, config: SolverConfig, rng=None,
                      observer=None):
    """Round-robin sweeps where the acting source adopts its utility-maximizing
    feasible radio set; terminates once a full sweep changes nothing."""
    rng = np.random.default_rng(config.seed) if rng is None else rng
    n_src, n_radio = topology.num_sources, topology.num_radios
    quotas = [s.num_radios for s in topology.sources]
    for q in quotas:
        count = count_strategies(n_radio, q)
        if count > config.strategy_cap:
            raise EnumerationLimitError(
                f"per-source strategy count {count} exceeds cap {config.strategy_cap}")
    candidates = {q: enumerate_strategies(n_radio, q) for q in set(quotas)}

    caps_rows = caps.tolist()
    strategies = _random_initial(quotas, n_radio, rng)
    loads = [0] * n_radio
    for strat in strategies:
        for l in strat:
            loads[l] += 1

    lam = _lambda_of(strategies, loads, caps_rows, profiles)
    initial_lambda = lam
    lam_hist, actor_hist, acc_hist = [], [], []
    last_improve = 0
    converged = None
    iteration = 0

    while iteration < config.max_iterations:
        changed = False
        for n in range(n_src):
            if iteration >= config.max_iterations:
                break
            iteration += 1
            ev = _MoveEvaluator(strategies, loads, caps_rows, profiles, n)
            best_set = strategies[n]
            best_u = ev.utility(best_set)
            for cand in candidates[quotas[n]]:
                u = ev.utility(cand)
                if u > best_u + SATISFACTION_TOL:
                    best_u, best_set = u, cand
            accepted = best_set != strategies[n]
            if accepted:
                _apply(strategies, loads, n, best_set)
                lam = _lambda_of(strategies, loads, caps_rows, profiles)
                changed = True
                last_improve = iteration
            lam_hist.append(lam)
            actor_hist.append(n)
            acc_hist.append(accepted)
            if observer is not None:
                observer({"iteration": iteration, "actor": n,
                          "candidate": best_set, "accepted": accepted,
                          "lambda": lam, "strategies": tuple(strategies)})
        if not changed:
            converged = last_improve
            break

    trace = IterationTrace(lam=np.array(lam_hist), actor=np.array(actor_hist),
                           accepted=np.array(acc_hist, dtype=bool),
                           convergence_iteration=converged,
                           initial_lambda=initial_lambda)
    return Matching(strategies, n_radio), trace


def run_substitutable(topology, profiles, caps, config: SolverConfig, rng=None,
                      observer=None):
    """Deferred-acceptance baseline with substitutable radios.

    Sources propose one radio at a time in preference order (per-pair AF
    capacity); each radio holds at most config.radio_quota proposers and,
    when over quota, evicts the holder whose removal costs it the least
    satisfaction. Runs until proposals are exhausted.
    """
    del rng  # deterministic
    n_src, n_radio = topology.num_sources, topology.num_radios
    caps_rows = caps.tolist()
    quota = config.radio_quota
    prefs = [sorted(range(n_radio), key=lambda l: (-caps_rows[n][l], l))
             for n in range(n_src)]
    cursor = [0] * n_src
    holders = [[] for _ in range(n_radio)]
    strategies = [() for _ in range(n_src)]
    loads = [0] * n_radio

    lam = _lambda_of(strategies, loads, caps_rows, profiles)
    initial_lambda = lam
    lam_hist, actor_hist, acc_hist = [], [], []
    queue = deque(range(n_src))
    iteration = 0

    while queue and iteration < config.max_iterations:
        n = queue.popleft()
        if cursor[n] >= n_radio:
            continue
        l = prefs[n][cursor[n]]
        cursor[n] += 1
        holders[l].append(n)
        _apply(strategies, loads, n, (l,))
        accepted = True
        if len(holders[l]) > quota:
            # satisfaction of each holder at the post-eviction load
            reduced = len(holders[l]) - 1
            scores = [(profiles[h].evaluate(caps_rows[h][l] / reduced), -h)
                      for h in holders[l]]
            evicted = holders[l][scores.index(min(scores))]
            holders[l].remove(evicted)
            _apply(strategies, loads, evicted, ())
            queue.append(evicted)
            if evicted == n:
                accepted = False
        iteration += 1
        lam = _lambda_of(strategies, loads, caps_rows, profiles)
        lam_hist.append(lam)
        actor_hist.append(n)
        acc_hist.append(accepted)
        if observer is not None:
            observer({"iteration": iteration, "actor": n, "accepted": accepted,
                      "lambda": lam, "strategies": tuple(strategies)})

    trace = IterationTrace(lam=np.array(lam_hist), actor=np.array(actor_hist),
                           accepted=np.array(acc_hist, dtype=bool),
                           convergence_iteration=iteration if iteration else None,
                           initial_lambda=initial_lambda)
    return Matching(strategies, n_radio), trace


def exhaustive_search(topology, profiles, caps, include_empty: bool = True,
                      max_set_size: Optional[int] = None, cap: int = 10 ** 8):
    """Global optimum over the full Cartesian strategy space.

    Candidate sets are enumerated in canonical (size, lexicographic) order,
    and the first profile attaining the maximum wins, so ties break
    deterministically. Raises EnumerationLimitError, naming the profile
    count, when the space exceeds the cap.
    """
    n_radio = topology.num_radios
    counts = [count_strategies(n_radio, s.num_radios, include_empty, max_set_size)
              for s in topology.sources]
    total = math.prod(counts)
    if total > cap:
        raise EnumerationLimitError(
            f"{total} strategy profiles exceed the exhaustive-search cap of {cap}")

    per_source = [enumerate_strategies(n_radio, s.num_radios, include_empty,
                                       max_set_size)
                  for s in topology.sources]
    caps_rows = caps.tolist()
    evaluators = [p.evaluate for p in profiles]
    best_lam = -1.0
    best_profile = None
    for combo in itertools.product(*per_source):
        loads = [0] * n_radio
        for strat in combo:
            for l in strat:
                loads[l] += 1
        lam = 0.0
        for n, strat in enumerate(combo):
            rate = 0.0
            row = caps_rows[n]
            for l in strat:
                rate += row[l] / loads[l]
            lam += evaluators[n](rate)
        if lam > best_lam:
            best_lam = lam
            best_profile = combo
    return Matching(best_profile, n_radio), best_lam


def solve(topology, profiles, caps, config: SolverConfig, rng=None,
          observer=None):
    """Dispatch a solver by config.kind; always returns (Matching, trace)."""
    if config.kind == "pma":
        return run_pma(topology, profiles, caps, config, rng, observer=observer)
    if config.kind == "best_response":
        return run_best_response(topology, profiles, caps, config, rng,
                                 observer=observer)
    if config.kind == "many_to_one":
        return run_many_to_one(topology, profiles, caps, config, rng,
                               observer=observer)
    if config.kind == "substitutable":
        return run_substitutable(topology, profiles, caps, config, rng,
                                 observer=observer)
    if config.kind == "exhaustive":
        m, lam = exhaustive_search(topology, profiles, caps,
                                   include_empty=config.include_empty,
                                   max_set_size=config.max_set_size,
                                   cap=config.strategy_cap)
        trace = IterationTrace(lam=np.array([lam]), actor=np.array([-1]),
                               accepted=np.array([True]),
                               convergence_iteration=1, initial_lambda=lam)
        return m, trace
    raise ConfigurationError(f"unknown solver kind {config.kind!r}")
