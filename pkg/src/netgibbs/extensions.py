"""Model variants: switching costs, noisy best response, a central planner,
and forward-looking agents solved as a discounted fixed point.

Each variant plugs into the same switching-model interface as the myopic
discrete-choice model, so the conservativeness checker, Gibbs construction,
and exact chain solver apply unchanged.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit

from .choice import (
    ContinuousMeetings,
    DegenerateProbabilityError,
    DiscreteChoiceModel,
    LogitShocks,
    SwitchingModel,
    UtilityModel,
    ValueTableUtility,
)
from .dynamics import build_transition_operator, stationary_exact
from .graphs import (
    DEFAULT_CAP_LOG2,
    Dyad,
    Network,
    check_state_space,
    dyad_from_index,
    n_dyads,
    switch_link,
)
from .potential import (
    ConservativenessReport,
    ConservativenessWitness,
    GibbsTable,
    build_phi_table,
    check_conservative,
)


# ---------------------------------------------------------------------------
# Switching costs
# ---------------------------------------------------------------------------

def switching_cost_chi(x: float, s: float) -> float:
    """Log-odds of a logit switch when keeping the state pays a premium s.

    chi(x; s) = x + log((1 + e^(x+s)) / (e^x + e^s)); odd in x, equal to x
    at s = 0, and x + s*tanh(x/2) + O(s^2) for small s.
    """
    return float(x + np.logaddexp(0.0, x + s) - np.logaddexp(x, s))


class SwitchingCostModel(SwitchingModel):
    """Logit switching with an additive bias s >= 0 toward the current state.

    p(g, d) = logistic(utility gain - s). The log-odds become chi(gain; s),
    nonlinear in the gain, so path independence generally fails even though
    the underlying utilities alone would be conservative.
    """

    def __init__(self, utility: UtilityModel, s: float, n_nodes: int):
        if s < 0:
            raise ValueError("switching cost must be nonnegative")
        self.utility = utility
        self.s = float(s)
        self.n_nodes = int(n_nodes)
        self._base = DiscreteChoiceModel(utility, LogitShocks(), n_nodes)

    def delta(self, g: Network, d: Dyad) -> float:
        return self._base.delta(g, d)

    def p(self, g: Network, d: Dyad) -> float:
        p = float(expit(self._base.delta(g, d) - self.s))
        if not 0.0 < p < 1.0:
            raise DegenerateProbabilityError(f"switching probability {p} degenerate")
        return p

    def phi(self, g: Network, d: Dyad) -> float:
        return switching_cost_chi(self._base.delta(g, d), self.s)


def switching_cost_probability(u: UtilityModel, g: Network, d: Dyad, s: float) -> float:
    """Flip probability under a keep-state premium s (logit shocks)."""
    return SwitchingCostModel(u, s, g.n_nodes).p(g, d)


# ---------------------------------------------------------------------------
# Noisy best response (epsilon-deviations)
# ---------------------------------------------------------------------------

def log_odds(p: float) -> float:
    """log(p / (1-p))."""
    if not 0.0 < p < 1.0:
        raise ValueError("log odds need p strictly inside (0,1)")
    return math.log(p / (1.0 - p))


class EpsilonDeviationModel(SwitchingModel):
    """Deterministic target strategy implemented with error rate epsilon.

    strategy(d, g) says whether dyad d should be present given the rest of
    the network; it is evaluated on the dyad-absent representative so that
    the target never depends on the dyad's own state. Every evaluation moves
    toward the target with probability 1 - epsilon and away with epsilon,
    making each flip probability epsilon or 1 - epsilon exactly.
    """

    def __init__(self, epsilon: float, strategy: Callable[[Dyad, Network], bool],
                 n_nodes: int):
        if not 0.0 < epsilon < 1.0:
            raise ValueError("epsilon must lie strictly inside (0,1)")
        self.epsilon = float(epsilon)
        self.strategy = strategy
        self.n_nodes = int(n_nodes)
        self._lambda = log_odds(epsilon)

    def target(self, g: Network, d: Dyad) -> bool:
        """Strategy on the representative with d removed (state-free)."""
        rep = switch_link(g, d) if g.has(d) else g
        return bool(self.strategy(d, rep))

    def matches(self, g: Network, d: Dyad) -> bool:
        """Whether the dyad's current state already equals the target."""
        return self.target(g, d) == g.has(d)

    def p(self, g: Network, d: Dyad) -> float:
        return self.epsilon if self.matches(g, d) else 1.0 - self.epsilon

    def phi(self, g: Network, d: Dyad) -> float:
        m = 1.0 if self.matches(g, d) else 0.0
        return self._lambda * (2.0 * m - 1.0)


def epsilon_phi(m: EpsilonDeviationModel, g: Network, d: Dyad) -> float:
    """Log-odds of the noisy-best-response flip: log-odds(eps) * (2*match-1)."""
    return m.phi(g, d)


def optimal_change_count(m: EpsilonDeviationModel, g: Network) -> int:
    """Additions along the canonical build of g whose new state is the target."""
    count = 0
    partial = Network(g.n_nodes, 0)
    for idx in range(g.n_dyads):
        if not g.has_index(idx):
            continue
        d = dyad_from_index(g.n_nodes, idx)
        if m.target(partial, d):
            count += 1
        partial = Network(g.n_nodes, partial.mask | (1 << idx))
    return count


def epsilon_aggregating(m: EpsilonDeviationModel, n_nodes: int,
                        cap_log2: int = DEFAULT_CAP_LOG2):
    """Gibbs table for the noisy-best-response chain, if one exists.

    Path independence reduces to an integer condition on the match
    indicator for every network and dyad pair. When it holds, the pathwise
    potential also has the closed form log-odds(eps) * (|g| - 2 * number of
    target-conforming additions), which is verified against the built table.
    Returns the witness report instead when the condition fails.
    """
    n_states = check_state_space(n_nodes, cap_log2)
    nd = n_dyads(n_nodes)

    def match_int(g: Network, idx: int) -> int:
        return int(m.matches(g, dyad_from_index(n_nodes, idx)))

    for mask in range(n_states):
        g = Network(n_nodes, mask)
        for a in range(nd):
            ga = Network(n_nodes, mask ^ (1 << a))
            for b in range(a + 1, nd):
                gb = Network(n_nodes, mask ^ (1 << b))
                lhs = match_int(g, a) + match_int(ga, b)
                rhs = match_int(g, b) + match_int(gb, a)
                if lhs != rhs:
                    witness = ConservativenessWitness(g, a, b, float(lhs), float(rhs))
                    return ConservativenessReport(
                        conservative=False,
                        n_nodes=n_nodes,
                        checked=0,
                        witness=witness,
                        all_witnesses=[witness],
                    )

    phi = build_phi_table(m, n_nodes, cap_log2=cap_log2)
    lam = log_odds(m.epsilon)
    for mask in range(n_states):
        g = Network(n_nodes, mask)
        closed = lam * (g.n_links - 2 * optimal_change_count(m, g))
        if abs(phi[mask] - closed) > 1e-9:
            raise AssertionError(
                f"pathwise potential {phi[mask]} disagrees with closed form "
                f"{closed} at {g.to_hex()}"
            )
    return GibbsTable.from_phi(n_nodes, phi)


# ---------------------------------------------------------------------------
# Central planner
# ---------------------------------------------------------------------------

def central_planner_table(welfare: Callable[[Network], float], n_nodes: int,
                          cap_log2: int = DEFAULT_CAP_LOG2) -> GibbsTable:
    """Gibbs table when one welfare function drives every decision.

    With logit shocks the potential is the welfare itself (shifted to zero
    at the empty network), no matter how non-separable the welfare is.
    """
    n_states = check_state_space(n_nodes, cap_log2)
    w0 = float(welfare(Network(n_nodes, 0)))
    phi = np.array([
        float(welfare(Network(n_nodes, mask))) - w0 for mask in range(n_states)
    ])
    return GibbsTable.from_phi(n_nodes, phi)


# ---------------------------------------------------------------------------
# Forward-looking agents (Markov-perfect values)
# ---------------------------------------------------------------------------

@dataclass
class MpeProblem:
    """Flow utilities, a discount rate, and Poisson meeting rates."""

    flow: np.ndarray  # (n_agents, n_states) flow utilities
    rho: float  # discount rate per unit time, > 0
    meetings: ContinuousMeetings

    def __post_init__(self):
        self.flow = np.asarray(self.flow, dtype=float)
        if self.rho <= 0:
            raise ValueError("discount rate must be positive")


@dataclass
class MpeSolution:
    values: np.ndarray  # (n_agents, n_states)
    residual: float
    iterations: int
    converged: bool


def _discounted_average(problem: MpeProblem, values: np.ndarray, n_nodes: int,
                        cap_log2: int) -> np.ndarray:
    """Apply the discounted-occupancy operator to a value profile.

    The candidate values induce switching probabilities, hence a generator Q;
    the discounted state weights from start g are the resolvent column
    rho*(rho I - Q)^{-1} e_g, so averaging flows needs one transposed solve
    per agent rather than one solve per state.
    """
    n_states = values.shape[1]
    model = DiscreteChoiceModel(
        ValueTableUtility(values, n_nodes), LogitShocks(), n_nodes, memoize=False
    )
    op = build_transition_operator(model, problem.meetings, n_nodes, cap_log2=cap_log2)
    lhs = (problem.rho * np.eye(n_states)) - op.matrix.toarray().T
    out = np.empty_like(values)
    for i in range(values.shape[0]):
        out[i] = np.linalg.solve(lhs, problem.rho * problem.flow[i])
    return out


def mpe_solve(
    problem: MpeProblem,
    n_nodes: int,
    damping: float = 0.5,
    max_iters: int = 500,
    tol: float = 1e-10,
    cap_log2: int = DEFAULT_CAP_LOG2,
) -> MpeSolution:
    """Damped fixed-point iteration on the discounted-occupancy operator.

    Existence is guaranteed but neither uniqueness nor contraction, so the
    undamped map may cycle; non-convergence is reported with the last
    iterate rather than forced. Iterates stay inside each agent's flow
    range, which is checked as a sanity invariant.
    """
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    n_states = check_state_space(n_nodes, cap_log2)
    if problem.flow.shape != (n_nodes, n_states):
        raise ValueError("flow utilities must have shape (n_nodes, n_states)")

    lo = problem.flow.min(axis=1, keepdims=True) - 1e-9
    hi = problem.flow.max(axis=1, keepdims=True) + 1e-9

    values = problem.flow.copy()
    residual = np.inf
    for it in range(1, max_iters + 1):
        image = _discounted_average(problem, values, n_nodes, cap_log2)
        residual = float(np.max(np.abs(image - values)))
        if np.any(image < lo) or np.any(image > hi):
            raise AssertionError("value iterate escaped the flow-utility box")
        values = (1.0 - damping) * values + damping * image
        if residual < tol:
            return MpeSolution(values=values, residual=residual, iterations=it,
                               converged=True)
    return MpeSolution(values=values, residual=residual, iterations=max_iters,
                       converged=False)


def mpe_induced_model(problem: MpeProblem, values: np.ndarray, n_nodes: int) -> DiscreteChoiceModel:
    """Myopic-style switching model with present values in place of utilities."""
    return DiscreteChoiceModel(
        ValueTableUtility(values, n_nodes), LogitShocks(), n_nodes, memoize=False
    )


def mpe_stationary(
    problem: MpeProblem,
    values: np.ndarray,
    n_nodes: int,
    cap_log2: int = DEFAULT_CAP_LOG2,
):
    """Stationary distribution of the chain the equilibrium values induce.

    Always returns the exact eigen-solved distribution; when the induced
    log-odds happen to be conservative the matching Gibbs table is returned
    alongside, otherwise None.
    """
    model = mpe_induced_model(problem, values, n_nodes)
    op = build_transition_operator(model, problem.meetings, n_nodes, cap_log2=cap_log2)
    pi = stationary_exact(op)
    report = check_conservative(model, n_nodes, cap_log2=cap_log2)
    table = None
    if report.conservative:
        table = GibbsTable.from_phi(n_nodes, build_phi_table(model, n_nodes, cap_log2))
    return pi, table, report
