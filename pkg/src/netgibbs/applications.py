"""Trade-route formation: gravity shares from a fixed point, and the
linear-response formula for weak interaction effects.

Firms form routes unilaterally; a convex cost on the out-degree couples a
firm's link choices to each other but not to other firms, so the asymptotic
analysis reduces to a one-dimensional root per origin type.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit

from .asymptotics import LimitModel, ZetaResult, bernoulli_entropy, zeta_isolated
from .graphs import Network, dyad_index
from .potential import GibbsTable, ensemble_average


@dataclass(frozen=True)
class TradeModel:
    """Linking payoff v0 - gamma*distance with convex cost c on route counts."""

    v0: float
    gamma: float
    c: float
    dist: np.ndarray  # type-to-type distances
    weights: np.ndarray  # limiting type fractions

    def __post_init__(self):
        object.__setattr__(self, "dist", np.asarray(self.dist, dtype=float))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        if self.c < 0:
            raise ValueError("cost coefficient c must be >= 0")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if np.any(self.dist < 0):
            raise ValueError("distances must be >= 0")
        if np.any(self.weights <= 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be positive and sum to 1")
        if self.dist.shape != (len(self.weights), len(self.weights)):
            raise ValueError("distance matrix must be C x C")

    @property
    def n_types(self) -> int:
        return len(self.weights)

    def payoff(self) -> np.ndarray:
        """Per-(origin, destination) linking payoff v0 - gamma * D."""
        return self.v0 - self.gamma * self.dist


@dataclass(frozen=True)
class TradeSolution:
    """Per-origin root B_r, its exponential A_r, and the share matrix T."""

    B: np.ndarray
    A: np.ndarray
    T: np.ndarray
    residuals: np.ndarray


def _share_row(tm: TradeModel, r: int, b: float) -> np.ndarray:
    """T_rs = logistic(v0 - gamma D_rs - B_r)."""
    return expit(tm.payoff()[r] - b)


def trade_fixed_point(tm: TradeModel, width: float = 1e-14) -> TradeSolution:
    """Solve B_r = 2c sum_q w_q / (1 + e^{B_r} e^{gamma D_rq - v0}) per type.

    The right side lies in (0, 2c) and is strictly decreasing in B_r, so the
    root is unique and bracketed by [0, 2c]; plain bisection closes the
    bracket to the requested width. c = 0 decouples the model and B_r = 0.
    """
    c = tm.n_types
    B = np.zeros(c)
    for r in range(c):
        if tm.c == 0.0:
            continue

        def gap(b: float) -> float:
            return b - 2.0 * tm.c * float(tm.weights @ _share_row(tm, r, b))

        lo, hi = 0.0, 2.0 * tm.c
        # gap(0) <= 0 and gap(2c) >= 0 by monotonicity of the right side
        while hi - lo > width:
            mid = 0.5 * (lo + hi)
            if gap(mid) > 0.0:
                hi = mid
            else:
                lo = mid
        B[r] = 0.5 * (lo + hi)

    T = np.vstack([_share_row(tm, r, B[r]) for r in range(c)])
    residuals = np.array([
        B[r] - 2.0 * tm.c * float(tm.weights @ T[r]) for r in range(c)
    ])
    return TradeSolution(B=B, A=np.exp(B), T=T, residuals=residuals)


def trade_shares_asymptotic(tm: TradeModel) -> np.ndarray:
    """Limiting origin-destination share matrix (the gravity equation)."""
    return trade_fixed_point(tm).T


def trade_objective_row(tm: TradeModel, r: int, x: np.ndarray) -> float:
    """Entropy plus payoff minus convex cost for origin type r."""
    w = tm.weights
    a = tm.payoff()[r]
    return float(np.sum(w * (bernoulli_entropy(x) + a * x)) - tm.c * float(w @ x) ** 2)


def zeta_trade(tm: TradeModel) -> float:
    """Partition density evaluated at the fixed-point shares.

    Independent of the general variational solver: the maximizer comes from
    the bisection route, and the two must agree for the concave objective.
    """
    sol = trade_fixed_point(tm)
    return float(sum(
        tm.weights[r] * trade_objective_row(tm, r, sol.T[r])
        for r in range(tm.n_types)
    ))


def trade_limit_model(tm: TradeModel) -> LimitModel:
    """The trade utilities as a general limit model (cross-check route)."""
    a = tm.payoff()

    def make_v(r: int) -> Callable[[np.ndarray], float]:
        return lambda y: float(a[r] @ y) - tm.c * float(np.sum(y)) ** 2

    def make_g(r: int) -> Callable[[np.ndarray], np.ndarray]:
        return lambda y: a[r] - 2.0 * tm.c * float(np.sum(y))

    return LimitModel(
        weights=tm.weights.copy(),
        utilities=[make_v(r) for r in range(tm.n_types)],
        gradients=[make_g(r) for r in range(tm.n_types)],
    )


def zeta_trade_variational(tm: TradeModel) -> ZetaResult:
    """zeta via the general maximizer; should match `zeta_trade` to 1e-8."""
    return zeta_isolated(trade_limit_model(tm))


def linear_response(
    gt0: GibbsTable,
    perturbation: Callable[[Network], float],
    observable: Callable[[Network], float],
) -> float:
    """Derivative of <observable> in the strength of an added network term.

    For potentials Phi_0 + eps*f the derivative at eps = 0 is the stationary
    covariance <A f> - <A><f>. Any function of the network alone keeps the
    perturbed potential valid, since its switch differences are path
    independent by construction.
    """
    af = ensemble_average(gt0, lambda g: observable(g) * perturbation(g))
    a0 = ensemble_average(gt0, observable)
    f0 = ensemble_average(gt0, perturbation)
    return af - a0 * f0


def perturbed_table(gt0: GibbsTable, perturbation: Callable[[Network], float],
                    eps: float) -> GibbsTable:
    """Gibbs table for Phi_0 + eps * f (finite-difference oracle helper)."""
    f_vals = np.array([
        perturbation(Network(gt0.n_nodes, mask)) for mask in range(gt0.n_states)
    ])
    return GibbsTable.from_phi(gt0.n_nodes, gt0.phi + eps * f_vals)


def reciprocity_count(g: Network) -> float:
    """Number of mutual pairs: dyads ij with ji also present."""
    total = 0
    for i in range(g.n_nodes):
        for j in range(i + 1, g.n_nodes):
            if g.has_index(dyad_index(g.n_nodes, i, j)) and g.has_index(
                dyad_index(g.n_nodes, j, i)
            ):
                total += 1
    return float(total)
