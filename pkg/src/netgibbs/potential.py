"""Conservativeness checking, Gibbs tables, and potential-game verification.

The log-odds function phi of a switching model is conservative exactly when
its sums along dyad paths between two networks never depend on the path.
When it is, summing phi along any ordering of a network's links yields a
state function Phi whose Gibbs measure is the chain's unique stationary
distribution.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from .choice import SwitchingModel
from .graphs import (
    DEFAULT_CAP_LOG2,
    Network,
    check_state_space,
    dyad_from_index,
    n_dyads,
    switch_index,
)

CONSERVATIVE_TOL = 1e-9


@dataclass(frozen=True)
class ConservativenessWitness:
    """One violation of path independence, reproducible by phi arithmetic."""

    g: Network
    dyad_a: int
    dyad_b: int
    lhs: float  # phi_a(g) + phi_b(switch_a(g))
    rhs: float  # phi_b(g) + phi_a(switch_b(g))

    def __str__(self) -> str:
        da = dyad_from_index(self.g.n_nodes, self.dyad_a)
        db = dyad_from_index(self.g.n_nodes, self.dyad_b)
        return (
            f"at {self.g.to_hex()} dyads ({da.i},{da.j})/({db.i},{db.j}): "
            f"{self.lhs!r} != {self.rhs!r} (gap {self.lhs - self.rhs:.3e})"
        )


@dataclass
class ConservativenessReport:
    conservative: bool
    n_nodes: int
    checked: int
    witness: Optional[ConservativenessWitness] = None
    all_witnesses: List[ConservativenessWitness] = field(default_factory=list)
    mode: str = "exhaustive"

    def __bool__(self) -> bool:
        return self.conservative


def check_conservative(
    model: SwitchingModel,
    n_nodes: int,
    tol: float = CONSERVATIVE_TOL,
    cap_log2: int = DEFAULT_CAP_LOG2,
    exhaustive_witnesses: bool = False,
    sample: Optional[int] = None,
    seed: int = 0,
) -> ConservativenessReport:
    """Verify path independence of the model's log-odds function.

    Two properties are checked for every network and dyad pair:
    antisymmetry under a switch, and equality of the two orders of applying
    two different switches. Either failing yields a witness. With `sample`
    set, (network, pair) combinations are drawn at random instead of swept;
    at 2^20 states the full sweep is ~1e9 evaluations, so sampling (default
    1e6 seeded draws) kicks in automatically there.
    """
    n_states = check_state_space(n_nodes, cap_log2)
    m = n_dyads(n_nodes)
    if sample is None and n_states * m * (m - 1) // 2 > 50_000_000:
        sample = 1_000_000
    witnesses: List[ConservativenessWitness] = []
    checked = 0

    def record(g, a, b, lhs, rhs) -> bool:
        witnesses.append(ConservativenessWitness(g, a, b, lhs, rhs))
        return not exhaustive_witnesses  # True means stop now

    def check_pair(g: Network, a: int, b: int) -> Optional[Tuple[float, float]]:
        lhs = model.phi_index(g, a) + model.phi_index(switch_index(g, a), b)
        rhs = model.phi_index(g, b) + model.phi_index(switch_index(g, b), a)
        if abs(lhs - rhs) > tol:
            return lhs, rhs
        return None

    if sample is None:
        done = False
        for mask in range(n_states):
            g = Network(n_nodes, mask)
            for a in range(m):
                # antisymmetry: phi_a(g) + phi_a(switch_a(g)) = 0
                back = model.phi_index(g, a) + model.phi_index(switch_index(g, a), a)
                checked += 1
                if abs(back) > tol and record(g, a, a, back, 0.0):
                    done = True
                    break
                for b in range(a + 1, m):
                    checked += 1
                    bad = check_pair(g, a, b)
                    if bad is not None and record(g, a, b, *bad):
                        done = True
                        break
                if done:
                    break
            if done:
                break
        mode = "exhaustive"
    else:
        rng = np.random.default_rng(seed)
        for _ in range(int(sample)):
            mask = int(rng.integers(0, n_states))
            a = int(rng.integers(0, m))
            b = int(rng.integers(0, m))
            g = Network(n_nodes, mask)
            checked += 1
            if a == b:
                back = model.phi_index(g, a) + model.phi_index(switch_index(g, a), a)
                if abs(back) > tol and record(g, a, a, back, 0.0):
                    break
                continue
            bad = check_pair(g, a, b)
            if bad is not None and record(g, a, b, *bad):
                break
        mode = f"sampled({sample})"

    return ConservativenessReport(
        conservative=not witnesses,
        n_nodes=n_nodes,
        checked=checked,
        witness=witnesses[0] if witnesses else None,
        all_witnesses=witnesses,
        mode=mode,
    )


class NotConservativeError(Exception):
    """Raised when a Gibbs construction is attempted on a non-conservative model."""

    def __init__(self, report: ConservativenessReport):
        self.report = report
        super().__init__(f"model is not conservative: {report.witness}")


@dataclass(frozen=True)
class GibbsTable:
    """Exhaustive map network -> (Phi, stationary probability).

    Phi is gauged so the empty network gets 0; probabilities are normalized
    through log-sum-exp so large potentials cannot overflow.
    """

    n_nodes: int
    phi: np.ndarray  # indexed by network bitmask
    log_partition: float
    pi: np.ndarray

    @classmethod
    def from_phi(cls, n_nodes: int, phi: np.ndarray) -> "GibbsTable":
        phi = np.asarray(phi, dtype=float)
        if len(phi) != 1 << n_dyads(n_nodes):
            raise ValueError("phi table must cover the whole network space")
        phi = phi - phi[0]  # gauge: Phi(empty) = 0
        log_z = float(logsumexp(phi))
        pi = np.exp(phi - log_z)
        return cls(n_nodes=n_nodes, phi=phi, log_partition=log_z, pi=pi)

    @property
    def n_states(self) -> int:
        return len(self.phi)

    def phi_of(self, g: Network) -> float:
        return float(self.phi[g.mask])

    def pi_of(self, g: Network) -> float:
        return float(self.pi[g.mask])

    def to_csv(self) -> str:
        """CSV with the canonical g:hex encoding, one row per network."""
        buf = io.StringIO()
        buf.write(f"# n_nodes={self.n_nodes} log_partition={self.log_partition:.17g}\n")
        buf.write("network,phi,pi\n")
        for mask in range(self.n_states):
            buf.write(f"g:{mask:x},{self.phi[mask]:.17g},{self.pi[mask]:.17g}\n")
        return buf.getvalue()


def build_phi_table(model: SwitchingModel, n_nodes: int,
                    cap_log2: int = DEFAULT_CAP_LOG2) -> np.ndarray:
    """Sum phi along the canonical dyad ordering of every network.

    Dynamic program over bitmasks: each network's value extends the network
    with its lowest-indexed link removed, so each state costs one phi
    evaluation. Path independence is exactly what conservativeness asserts,
    and is what `check_conservative` certifies beforehand.
    """
    n_states = check_state_space(n_nodes, cap_log2)
    phi = np.zeros(n_states)
    for mask in range(1, n_states):
        low = (mask & -mask).bit_length() - 1
        prev = mask ^ (1 << low)
        phi[mask] = phi[prev] + model.phi_index(Network(n_nodes, prev), low)
    return phi


def build_aggregating_function(
    model: SwitchingModel,
    n_nodes: int,
    cap_log2: int = DEFAULT_CAP_LOG2,
    check: bool = True,
    tol: float = CONSERVATIVE_TOL,
    force: bool = False,
) -> GibbsTable:
    """Construct the Gibbs table for a conservative switching model.

    Refuses non-conservative models (the report rides on the exception)
    unless `force` is set, which builds the path-ordered candidate table
    anyway -- useful only for demonstrating that detailed balance then fails.
    """
    if check and not force:
        report = check_conservative(model, n_nodes, tol=tol, cap_log2=cap_log2)
        if not report.conservative:
            raise NotConservativeError(report)
    phi = build_phi_table(model, n_nodes, cap_log2=cap_log2)
    return GibbsTable.from_phi(n_nodes, phi)


def rebuild_phi_random_order(model: SwitchingModel, g: Network,
                             rng: np.random.Generator) -> float:
    """Re-sum phi along a random ordering of g's links (path-independence probe)."""
    order = [idx for idx in range(g.n_dyads) if g.has_index(idx)]
    rng.shuffle(order)
    partial = Network(g.n_nodes, 0)
    total = 0.0
    for idx in order:
        total += model.phi_index(partial, idx)
        partial = switch_index(partial, idx)
    return total


def detailed_balance_residual(gt: GibbsTable, model: SwitchingModel, meetings) -> float:
    """Max |q_d p_d(g) pi(g) - q_d p_d(switched) pi(switched)| over all flips."""
    if meetings.n_nodes != gt.n_nodes:
        raise ValueError("meeting process and table disagree on node count")
    weights = meetings.array()
    worst = 0.0
    for mask in range(gt.n_states):
        g = Network(gt.n_nodes, mask)
        for idx in range(g.n_dyads):
            if g.has_index(idx):
                continue  # each unordered (g, switched g) pair once
            h = switch_index(g, idx)
            flow = weights[idx] * model.p_index(g, idx) * gt.pi[g.mask]
            back = weights[idx] * model.p_index(h, idx) * gt.pi[h.mask]
            worst = max(worst, abs(flow - back))
    return worst


@dataclass(frozen=True)
class PotentialGameResult:
    exact: bool
    ordinal: bool
    max_exact_gap: float
    ordinal_violation: Optional[Tuple[Network, int]] = None


def potential_game_check(model, gt: GibbsTable, tol: float = 1e-9) -> PotentialGameResult:
    """Compare Phi differences against each deviator's utility change.

    exact: the differences agree numerically everywhere.
    ordinal: they always share strict sign (or are both zero).
    """
    max_gap = 0.0
    ordinal = True
    violation = None
    for mask in range(gt.n_states):
        g = Network(gt.n_nodes, mask)
        for idx in range(g.n_dyads):
            if g.has_index(idx):
                continue
            h = switch_index(g, idx)
            dphi = gt.phi[h.mask] - gt.phi[g.mask]
            dv = model.delta(g, dyad_from_index(gt.n_nodes, idx))
            max_gap = max(max_gap, abs(dphi - dv))
            same_sign = (dphi > 0 and dv > 0) or (dphi < 0 and dv < 0) or (dphi == 0 and dv == 0)
            if not same_sign and ordinal:
                ordinal = False
                violation = (g, idx)
    return PotentialGameResult(
        exact=max_gap <= tol,
        ordinal=ordinal,
        max_exact_gap=max_gap,
        ordinal_violation=violation,
    )


def local_maxima_are_nash(gt: GibbsTable, model) -> Tuple[bool, List[Tuple[Network, int]]]:
    """Check that every local maximum of Phi is deviation-proof.

    At each network where no single switch raises Phi, no agent may gain
    from toggling one of their own dyads.
    """
    failures: List[Tuple[Network, int]] = []
    m = n_dyads(gt.n_nodes)
    for mask in range(gt.n_states):
        g = Network(gt.n_nodes, mask)
        if any(gt.phi[switch_index(g, idx).mask] > gt.phi[mask] for idx in range(m)):
            continue
        for idx in range(m):
            if model.delta(g, dyad_from_index(gt.n_nodes, idx)) > 0:
                failures.append((g, idx))
    return (not failures), failures


def local_maxima(gt: GibbsTable) -> List[Network]:
    """Networks where no single switch increases Phi."""
    m = n_dyads(gt.n_nodes)
    out = []
    for mask in range(gt.n_states):
        g = Network(gt.n_nodes, mask)
        if all(gt.phi[switch_index(g, idx).mask] <= gt.phi[mask] for idx in range(m)):
            out.append(g)
    return out


def log_partition_exact(gt: GibbsTable) -> float:
    return gt.log_partition


def ensemble_average(gt: GibbsTable, observable: Callable[[Network], float]) -> float:
    """Stationary expectation of a network observable."""
    return float(sum(
        gt.pi[mask] * observable(Network(gt.n_nodes, mask))
        for mask in range(gt.n_states)
    ))


def isolated_factorized_log_partition(model, n_nodes: int) -> float:
    """log Z via per-agent factorization, valid for isolated logit models.

    Each agent's own out-row contributes an independent factor
    sum over out-patterns of exp(V_i(pattern) - V_i(empty)), turning the
    2^(N(N-1))-term sum into N sums of 2^(N-1) terms.
    """
    total = 0.0
    for i in range(n_nodes):
        base = i * (n_nodes - 1)
        vals = []
        v_empty = model.value(i, Network(n_nodes, 0))
        for row in range(1 << (n_nodes - 1)):
            g = Network(n_nodes, row << base)
            vals.append(model.value(i, g) - v_empty)
        total += float(logsumexp(np.array(vals)))
    return total
