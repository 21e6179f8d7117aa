"""Deterministic utilities, shock distributions, meetings, and switching odds.

A switching model exposes two functions of (network, dyad): the probability
p that the dyad flips when it is evaluated, and the log-odds
phi = log(p(g) / p(toggled g)). Discrete-choice models derive both from a
utility function and a symmetric shock-difference distribution F1 via
p = F1(utility gain of toggling).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .graphs import (
    Dyad,
    Network,
    TypeProfile,
    dyad_from_index,
    dyad_index,
    n_dyads,
    out_mask,
    out_subgraph,
)


class DegenerateProbabilityError(Exception):
    """A switching probability hit 0 or 1 in floating point.

    Uniqueness of the stationary distribution needs p strictly inside (0,1),
    so we refuse rather than clamp.
    """


# ---------------------------------------------------------------------------
# Utility models
# ---------------------------------------------------------------------------

class UtilityModel:
    """Assigns a deterministic utility to every (agent, network) pair.

    `isolated` declares that the value depends only on the agent's own
    outgoing links; exhaustive checks can verify the declaration.
    """

    isolated: bool = False

    def value(self, i: int, g: Network) -> float:
        raise NotImplementedError

    def delta(self, g: Network, d: Dyad) -> float:
        """Utility gain for agent d.i of toggling dyad d: V_i(switched) - V_i(g)."""
        from .graphs import switch_link

        return self.value(d.i, switch_link(g, d)) - self.value(d.i, g)


class LinearOutDegreeUtility(UtilityModel):
    """V_i(g) = a * (out-degree of i)."""

    isolated = True

    def __init__(self, a: float):
        self.a = float(a)

    def value(self, i: int, g: Network) -> float:
        return self.a * bin(g.mask & out_mask(g.n_nodes, i)).count("1")

    def delta(self, g: Network, d: Dyad) -> float:
        return -self.a if g.has(d) else self.a


class PerDyadUtility(UtilityModel):
    """V_i(g) = sum of per-dyad payoffs b[i][j] over i's out-links.

    Covers every model whose marginal link value ignores the rest of the
    network; the induced chain is reversible for any symmetric shock spec.
    """

    isolated = True

    def __init__(self, payoff: np.ndarray):
        payoff = np.asarray(payoff, dtype=float)
        if payoff.ndim != 2 or payoff.shape[0] != payoff.shape[1]:
            raise ValueError("payoff must be a square (node x node) matrix")
        self.payoff = payoff
        self.n_nodes = payoff.shape[0]

    def value(self, i: int, g: Network) -> float:
        total = 0.0
        for j in range(g.n_nodes):
            if j != i and g.has_index(dyad_index(g.n_nodes, i, j)):
                total += self.payoff[i, j]
        return total

    def delta(self, g: Network, d: Dyad) -> float:
        b = self.payoff[d.i, d.j]
        return -b if g.has(d) else b


def homophily_payoff(v0: float, gamma: float, profile: TypeProfile, dist: np.ndarray) -> np.ndarray:
    """Per-dyad payoff matrix b[i][j] = v0 - gamma * dist[type_i][type_j]."""
    dist = np.asarray(dist, dtype=float)
    n = profile.n_nodes
    b = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                b[i, j] = v0 - gamma * dist[profile.type_of(i), profile.type_of(j)]
    return b


class HomophilyUtility(PerDyadUtility):
    """Linking payoff v0 minus gamma times the typed distance to the target."""

    def __init__(self, v0: float, gamma: float, profile: TypeProfile, dist: np.ndarray):
        super().__init__(homophily_payoff(v0, gamma, profile, dist))
        self.v0 = float(v0)
        self.gamma = float(gamma)
        self.profile = profile
        self.dist = np.asarray(dist, dtype=float)


class TradeUtility(UtilityModel):
    """Typed linking payoffs with a convex cost on the out-degree.

    V_i(g) = sum_{j in N_i} (v0 - gamma * D[type_i][type_j]) - (c/N) |N_i|^2.
    Still isolated: the cost depends only on i's own out-links.
    """

    isolated = True

    def __init__(self, v0: float, gamma: float, c: float, profile: TypeProfile, dist: np.ndarray):
        if c < 0:
            raise ValueError("convex-cost coefficient c must be >= 0")
        self.v0 = float(v0)
        self.gamma = float(gamma)
        self.c = float(c)
        self.profile = profile
        self.dist = np.asarray(dist, dtype=float)
        self.n_nodes = profile.n_nodes
        self._payoff = homophily_payoff(v0, gamma, profile, dist)

    def value(self, i: int, g: Network) -> float:
        total = 0.0
        deg = 0
        for j in range(g.n_nodes):
            if j != i and g.has_index(dyad_index(g.n_nodes, i, j)):
                total += self._payoff[i, j]
                deg += 1
        return total - (self.c / g.n_nodes) * deg * deg


class TableIsolatedUtility(UtilityModel):
    """Arbitrary isolated utility: one value per (agent, own out-link pattern).

    table[i] maps the (N-1)-bit pattern of i's out-row to a value, so any
    function of the out-subgraph can be represented exactly.
    """

    isolated = True

    def __init__(self, table: Sequence[Sequence[float]]):
        self.table = [np.asarray(t, dtype=float) for t in table]
        self.n_nodes = len(self.table)
        for i, t in enumerate(self.table):
            if len(t) != 1 << (self.n_nodes - 1):
                raise ValueError(f"agent {i} table must have 2^(N-1) entries")

    @classmethod
    def random(cls, n_nodes: int, rng: np.random.Generator, scale: float = 1.0) -> "TableIsolatedUtility":
        """Random isolated utilities with V_i(empty out-row) = 0."""
        tables = []
        for _ in range(n_nodes):
            t = rng.normal(0.0, scale, size=1 << (n_nodes - 1))
            t[0] = 0.0
            tables.append(t)
        return cls(tables)

    def value(self, i: int, g: Network) -> float:
        row = (g.mask >> (i * (g.n_nodes - 1))) & ((1 << (g.n_nodes - 1)) - 1)
        return float(self.table[i][row])


class PlannerUtility(UtilityModel):
    """All agents share one welfare function over networks."""

    isolated = False

    def __init__(self, welfare: Callable[[Network], float]):
        self.welfare = welfare

    def value(self, i: int, g: Network) -> float:
        return float(self.welfare(g))


class ValueTableUtility(UtilityModel):
    """Utilities read from a per-agent, per-state table (states by bitmask)."""

    isolated = False

    def __init__(self, values: np.ndarray, n_nodes: int):
        values = np.asarray(values, dtype=float)
        if values.shape != (n_nodes, 1 << n_dyads(n_nodes)):
            raise ValueError("values must have shape (n_nodes, 2^(N(N-1)))")
        self.values = values
        self.n_nodes = n_nodes

    def value(self, i: int, g: Network) -> float:
        return float(self.values[i, g.mask])


class ConstantUtility(UtilityModel):
    """V_i(g) = const; every switch is a coin flip."""

    isolated = True

    def __init__(self, value: float = 0.0):
        self._value = float(value)

    def value(self, i: int, g: Network) -> float:
        return self._value


# ---------------------------------------------------------------------------
# Shock-difference distributions
# ---------------------------------------------------------------------------

PROBE_GRID = np.linspace(-20.0, 20.0, 101)


class ShockSpec:
    """Distribution F1 of the shock difference driving switch decisions."""

    name = "base"

    def f1(self, x: float) -> float:
        raise NotImplementedError

    def log_f1(self, x: float) -> float:
        p = self.f1(x)
        if not 0.0 < p < 1.0:
            raise DegenerateProbabilityError(
                f"F1({x}) = {p} is degenerate; switching probabilities must lie in (0,1)"
            )
        return math.log(p)

    def phi_from_delta(self, dv: float) -> float:
        """log(F1(dv) / F1(-dv)): log-odds of toggling vs. toggling back."""
        return self.log_f1(dv) - self.log_f1(-dv)


def _logistic_degeneracy_threshold() -> float:
    """Smallest x where the logistic rounds to 1.0 in double precision."""
    lo, hi = 30.0, 50.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if 1.0 / (1.0 + math.exp(-mid)) < 1.0:
            lo = mid
        else:
            hi = mid
    return lo


LOGIT_DEGENERACY = _logistic_degeneracy_threshold()


class LogitShocks(ShockSpec):
    """Logistic F1; log-odds reduce exactly to the utility difference."""

    name = "logit"

    def f1(self, x: float) -> float:
        if x >= 0:
            return 1.0 / (1.0 + math.exp(-x))
        ex = math.exp(x)
        return ex / (1.0 + ex)

    def log_f1(self, x: float) -> float:
        # -log(1 + e^(-x)), stable for any sign of x
        return -float(np.logaddexp(0.0, -x))

    def phi_from_delta(self, dv: float) -> float:
        # the identity is exact, but the chain itself is degenerate once
        # either direction's probability rounds to 0 or 1
        if abs(dv) > LOGIT_DEGENERACY:
            raise DegenerateProbabilityError(
                f"logistic switching probability at gain {dv} rounds to 0/1"
            )
        return float(dv)


class CustomShocks(ShockSpec):
    """User-supplied F1, validated for symmetry and monotonicity on a probe grid.

    No shape restrictions beyond symmetry and full support are imposed;
    heavy-tailed choices are accepted as long as they stay non-degenerate
    on the probe grid, but their log-odds may grow sublinearly and exact
    potentials will generally not exist.
    """

    name = "custom"

    def __init__(self, f1: Callable[[float], float], name: str = "custom"):
        self._f1 = f1
        self.name = name
        values = np.array([float(f1(x)) for x in PROBE_GRID])
        if np.any(values <= 0.0) or np.any(values >= 1.0):
            raise ValueError("custom F1 must stay strictly inside (0,1) on the probe grid")
        sym = values + values[::-1] - 1.0
        if np.max(np.abs(sym)) > 1e-12:
            raise ValueError(
                f"custom F1 violates symmetry F1(x)+F1(-x)=1 by {np.max(np.abs(sym)):.2e}"
            )
        if np.any(np.diff(values) <= 0.0):
            raise ValueError("custom F1 must be strictly increasing on the probe grid")

    def f1(self, x: float) -> float:
        return float(self._f1(x))


def probit_like_shocks(scale: float = 4.0) -> CustomShocks:
    """Normal-CDF shock spec: symmetric and strictly monotone, but not logit.

    The default scale keeps F1 strictly inside (0,1) on the construction
    probe grid; unit-scale normal tails underflow there in double precision.
    """
    s = math.sqrt(2.0) * float(scale)
    return CustomShocks(lambda x: 0.5 * (1.0 + math.erf(x / s)), name="probit")


# ---------------------------------------------------------------------------
# Meeting processes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiscreteMeetings:
    """Per-period meeting probabilities q_d > 0 with total q in (0,1)."""

    n_nodes: int
    probs: tuple

    def __post_init__(self):
        q = np.asarray(self.probs, dtype=float)
        if len(q) != n_dyads(self.n_nodes):
            raise ValueError("need one meeting probability per dyad")
        if np.any(q <= 0.0):
            raise ValueError("meeting probabilities must be strictly positive")
        if q.sum() >= 1.0:
            raise ValueError(
                f"total meeting probability {q.sum()} must stay below 1 "
                "(some periods must have no meeting)"
            )

    @classmethod
    def uniform(cls, n_nodes: int, total: float) -> "DiscreteMeetings":
        m = n_dyads(n_nodes)
        return cls(n_nodes, tuple([float(total) / m] * m))

    @property
    def total(self) -> float:
        return float(np.sum(self.probs))

    def array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)


@dataclass(frozen=True)
class ContinuousMeetings:
    """Poisson evaluation rates per dyad (per unit time), all positive."""

    n_nodes: int
    rates: tuple

    def __post_init__(self):
        lam = np.asarray(self.rates, dtype=float)
        if len(lam) != n_dyads(self.n_nodes):
            raise ValueError("need one arrival rate per dyad")
        if np.any(lam <= 0.0):
            raise ValueError("arrival rates must be strictly positive")

    @classmethod
    def uniform(cls, n_nodes: int, total_rate: float) -> "ContinuousMeetings":
        m = n_dyads(n_nodes)
        return cls(n_nodes, tuple([float(total_rate) / m] * m))

    @property
    def total(self) -> float:
        return float(np.sum(self.rates))

    def array(self) -> np.ndarray:
        return np.asarray(self.rates, dtype=float)


def conditional_meeting_distribution(m) -> np.ndarray:
    """Dyad distribution conditional on an evaluation happening."""
    weights = m.array()
    return weights / weights.sum()


# ---------------------------------------------------------------------------
# Switching models
# ---------------------------------------------------------------------------

class SwitchingModel:
    """Anything exposing per-(network, dyad) flip probabilities and log-odds."""

    n_nodes: int

    def p(self, g: Network, d: Dyad) -> float:
        raise NotImplementedError

    def phi(self, g: Network, d: Dyad) -> float:
        raise NotImplementedError

    def p_index(self, g: Network, idx: int) -> float:
        return self.p(g, dyad_from_index(g.n_nodes, idx))

    def phi_index(self, g: Network, idx: int) -> float:
        return self.phi(g, dyad_from_index(g.n_nodes, idx))


class DiscreteChoiceModel(SwitchingModel):
    """Switching driven by utility comparison under shock differences.

    Utility evaluations are memoized per (agent, network mask): exhaustive
    conservativeness sweeps revisit the same networks many times.
    """

    def __init__(self, utility: UtilityModel, shocks: ShockSpec, n_nodes: int,
                 memoize: bool = True):
        self.utility = utility
        self.shocks = shocks
        self.n_nodes = int(n_nodes)
        self._cache: Optional[dict] = {} if memoize else None

    def value(self, i: int, g: Network) -> float:
        if self._cache is None:
            return self.utility.value(i, g)
        key = (i, g.mask)
        v = self._cache.get(key)
        if v is None:
            v = self.utility.value(i, g)
            self._cache[key] = v
        return v

    def delta(self, g: Network, d: Dyad) -> float:
        from .graphs import switch_link

        return self.value(d.i, switch_link(g, d)) - self.value(d.i, g)

    def p(self, g: Network, d: Dyad) -> float:
        return switch_probability_from_delta(self.shocks, self.delta(g, d))

    def phi(self, g: Network, d: Dyad) -> float:
        return self.shocks.phi_from_delta(self.delta(g, d))


def switch_probability_from_delta(shocks: ShockSpec, dv: float) -> float:
    p = shocks.f1(dv)
    if not 0.0 < p < 1.0:
        raise DegenerateProbabilityError(
            f"switching probability F1({dv}) = {p} is degenerate"
        )
    return p


def switching_probability(u: UtilityModel, f: ShockSpec, g: Network, d: Dyad) -> float:
    """Probability that dyad d flips when evaluated in network g."""
    return switch_probability_from_delta(f, u.delta(g, d))


def verify_isolated(u: UtilityModel, n_nodes: int, tol: float = 1e-12) -> bool:
    """Exhaustively confirm a declared-isolated utility ignores others' links."""
    from .graphs import enumerate_networks

    for g in enumerate_networks(n_nodes):
        for i in range(n_nodes):
            if abs(u.value(i, g) - u.value(i, out_subgraph(g, i))) > tol:
                return False
    return True


def phi_value(u: UtilityModel, f: ShockSpec, g: Network, d: Dyad) -> float:
    """Log-odds log(p(g,d) / p(switched g, d)); antisymmetric under the switch."""
    return f.phi_from_delta(u.delta(g, d))
