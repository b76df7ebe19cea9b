"""Matching state, satisfaction utilities, feasibility and stability checks.

Sources and relay radios are referred to by their integer ids. Capacity
tables are (N, L) arrays with caps[n, l] = AF capacity of source n through
radio l. Every source connected to a radio gets an equal time share, so a
radio carrying A sources delivers caps[n, l] / A to each of them.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, EnumerationLimitError

#: absolute tolerance for equality of satisfaction-scale quantities
SATISFACTION_TOL = 1e-10


def _sigmoid(x: float) -> float:
    # overflow-safe logistic
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@dataclass(frozen=True)
class SatisfactionProfile:
    """Sigmoid rate-satisfaction: 1 / (1 + exp(-(slope*(u - required) + offset))).

    The offset shifts the curve so satisfaction is already ~1 when the
    requirement is exactly met (offset > 7 puts the midpoint offset/slope
    bit/s below the requirement).
    """

    required_rate_bps: float
    slope_per_bps: float = 1e-6
    offset: float = 7.5

    def __post_init__(self):
        if self.required_rate_bps <= 0:
            raise ConfigurationError("required rate must be positive")
        if self.slope_per_bps <= 0:
            raise ConfigurationError("satisfaction slope must be positive")
        if self.offset <= 7:
            raise ConfigurationError("satisfaction offset must exceed 7")

    def evaluate(self, rate_bps: float) -> float:
        return _sigmoid(self.slope_per_bps * (rate_bps - self.required_rate_bps)
                        + self.offset)


def satisfaction(rate_bps: float, profile: SatisfactionProfile) -> float:
    """Satisfaction of a source achieving rate_bps, in (0, 1)."""
    return profile.evaluate(rate_bps)


def default_profiles(topology, slope_per_bps: float = 1e-6,
                     offset: float = 7.5) -> tuple:
    return tuple(SatisfactionProfile(required_rate_bps=s.required_rate_bps,
                                     slope_per_bps=slope_per_bps, offset=offset)
                 for s in topology.sources)


class Matching:
    """Immutable bipartite assignment between sources and relay radios.

    Stored source-side as sorted radio tuples; the radio-side view and per
    radio loads are derived, so mutuality holds by construction. Use
    :func:`mutual` to validate matchings supplied as two independent maps.
    """

    __slots__ = ("_strategies", "_num_radios")

    def __init__(self, strategies: Sequence[Iterable[int]], num_radios: int):
        self._strategies = tuple(tuple(sorted(set(map(int, s)))) for s in strategies)
        self._num_radios = int(num_radios)
        for s in self._strategies:
            if s and (s[0] < 0 or s[-1] >= self._num_radios):
                raise ConfigurationError("radio id out of range")

    @classmethod
    def empty(cls, num_sources: int, num_radios: int) -> "Matching":
        return cls([()] * num_sources, num_radios)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple], num_sources: int,
                   num_radios: int) -> "Matching":
        strategies = [[] for _ in range(num_sources)]
        for n, l in pairs:
            strategies[n].append(l)
        return cls(strategies, num_radios)

    @property
    def num_sources(self) -> int:
        return len(self._strategies)

    @property
    def num_radios(self) -> int:
        return self._num_radios

    @property
    def strategies(self) -> tuple:
        return self._strategies

    def radios_of(self, source: int) -> tuple:
        return self._strategies[source]

    def sources_of(self, radio: int) -> tuple:
        if not 0 <= radio < self._num_radios:
            raise ConfigurationError(f"unknown radio id {radio}")
        return tuple(n for n, s in enumerate(self._strategies) if radio in s)

    def loads(self) -> np.ndarray:
        loads = np.zeros(self._num_radios, dtype=np.int64)
        for s in self._strategies:
            for l in s:
                loads[l] += 1
        return loads

    def load(self, radio: int) -> int:
        return len(self.sources_of(radio))

    def with_strategy(self, source: int, radios: Iterable[int]) -> "Matching":
        new = list(self._strategies)
        new[source] = tuple(sorted(set(map(int, radios))))
        m = Matching.__new__(Matching)
        m._strategies = tuple(new)
        m._num_radios = self._num_radios
        return m

    def __eq__(self, other):
        return (isinstance(other, Matching)
                and self._strategies == other._strategies
                and self._num_radios == other._num_radios)

    def __hash__(self):
        return hash((self._strategies, self._num_radios))

    def __repr__(self):
        return f"Matching({list(self._strategies)!r}, num_radios={self._num_radios})"

    def to_dict(self) -> dict:
        return {str(n): list(s) for n, s in enumerate(self._strategies)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict, num_radios: int) -> "Matching":
        n = max(int(k) for k in doc) + 1 if doc else 0
        strategies = [doc.get(str(i), []) for i in range(n)]
        return cls(strategies, num_radios)


def mutual(by_source: dict, by_radio: dict) -> bool:
    """True iff two independently supplied views agree: s in by_radio[c]
    exactly when c in by_source[s]."""
    for s, radios in by_source.items():
        for c in radios:
            if s not in by_radio.get(c, ()):
                return False
    for c, sources in by_radio.items():
        for s in sources:
            if c not in by_source.get(s, ()):
                return False
    return True


def sv_rate(m: Matching, source: int, caps: np.ndarray) -> float:
    """Achieved rate of one source: sum of its equal time shares (bit/s)."""
    if not 0 <= source < m.num_sources:
        raise ConfigurationError(f"unknown source id {source}")
    loads = m.loads()
    row = caps[source]
    return float(sum(row[l] / loads[l] for l in m.radios_of(source)))


def radio_throughput(m: Matching, radio: int, caps: np.ndarray) -> float:
    """Delivered throughput of one radio: mean AF capacity of its sources."""
    holders = m.sources_of(radio)
    if not holders:
        return 0.0
    return float(sum(caps[n, radio] for n in holders) / len(holders))


def global_satisfaction(m: Matching, profiles: Sequence[SatisfactionProfile],
                        caps: np.ndarray) -> float:
    """Aggregate satisfaction over all sources, in (0, N)."""
    loads = m.loads()
    total = 0.0
    for n, profile in enumerate(profiles):
        rate = sum(caps[n, l] / loads[l] for l in m.radios_of(n))
        total += profile.evaluate(rate)
    return total


def interference_set(m: Matching, source: int,
                     new_radios: Iterable[int]) -> frozenset:
    """Sources (other than the deviator) holding any radio touched by either
    the current or the candidate strategy."""
    union = set(new_radios) | set(m.radios_of(source))
    return frozenset(n for n, s in enumerate(m.strategies)
                     if n != source and any(l in union for l in s))


def relay_utility(m: Matching, source: int, radios: Iterable[int],
                  profiles: Sequence[SatisfactionProfile], caps: np.ndarray,
                  quota: Optional[int] = None,
                  context: Optional[Iterable[int]] = None) -> float:
    """Relay-side acceptance utility of a candidate strategy for one source.

    Own satisfaction plus the externality it imposes: for every source
    sharing a touched radio, the satisfaction change versus the deviator
    dropping out entirely. Unilateral differences of this value equal the
    corresponding differences of global satisfaction.

    `context` optionally fixes the set of touched radios (e.g. the union of
    old and new strategies when scoring a proposal pair); by default it is
    the union of `radios` with the source's current strategy in `m`.
    """
    radios = tuple(sorted(set(map(int, radios))))
    if quota is not None and len(radios) > quota:
        raise ConfigurationError(
            f"strategy of size {len(radios)} violates quota {quota}")
    union = set(radios) | set(m.radios_of(source)) if context is None else set(context)
    state = m.with_strategy(source, radios)
    absent = m.with_strategy(source, ())
    affected = [n for n, s in enumerate(m.strategies)
                if n != source and any(l in union for l in s)]
    value = profiles[source].evaluate(sv_rate(state, source, caps))
    for k in affected:
        value += (profiles[k].evaluate(sv_rate(state, k, caps))
                  - profiles[k].evaluate(sv_rate(absent, k, caps)))
    return value


def is_feasible(m: Matching, topology) -> bool:
    """All matching invariants: quotas respected, ids in range, sizes agree."""
    if m.num_sources != topology.num_sources or m.num_radios != topology.num_radios:
        return False
    for n, s in enumerate(m.strategies):
        if len(s) > topology.sources[n].num_radios:
            return False
        if s and (s[0] < 0 or s[-1] >= topology.num_radios):
            return False
    return True


def enumerate_strategies(num_radios: int, quota: int, include_empty: bool = True,
                         max_size: Optional[int] = None) -> list:
    """All radio subsets a source may hold, in canonical (size, lexicographic)
    order; this ordering fixes tie-breaking everywhere."""
    size_cap = quota if max_size is None else min(quota, max_size)
    out = [()] if include_empty else []
    for size in range(1, size_cap + 1):
        out.extend(itertools.combinations(range(num_radios), size))
    return out


def count_strategies(num_radios: int, quota: int, include_empty: bool = True,
                     max_size: Optional[int] = None) -> int:
    size_cap = quota if max_size is None else min(quota, max_size)
    total = 1 if include_empty else 0
    for size in range(1, size_cap + 1):
        total += math.comb(num_radios, size)
    return total


@dataclass(frozen=True)
class StabilityResult:
    stable: bool
    witness: Optional[tuple] = None   # (source, better strategy) when unstable

    def __bool__(self):
        return self.stable


def is_stable(m: Matching, topology, profiles: Sequence[SatisfactionProfile],
              caps: np.ndarray, tol: float = SATISFACTION_TOL,
              max_strategies: int = 200_000) -> StabilityResult:
    """No unilateral strategy change can strictly raise global satisfaction.

    Enumerates each source's full strategy space (subsets up to its quota,
    empty set included); raises EnumerationLimitError beyond the cap rather
    than silently truncating.
    """
    total = sum(count_strategies(topology.num_radios, s.num_radios)
                for s in topology.sources)
    if total > max_strategies:
        raise EnumerationLimitError(
            f"stability check needs {total} strategy evaluations, cap is {max_strategies}")
    base = global_satisfaction(m, profiles, caps)
    for n, src in enumerate(topology.sources):
        current = m.radios_of(n)
        for cand in enumerate_strategies(topology.num_radios, src.num_radios):
            if cand == current:
                continue
            alt = global_satisfaction(m.with_strategy(n, cand), profiles, caps)
            if alt > base + tol:
                return StabilityResult(stable=False, witness=(n, cand))
    return StabilityResult(stable=True)
