"""The formation chain itself: transition operators, exact solves, simulation.

Transition matrices are column-stochastic (distributions are column vectors),
matching pi_{t+1} = P pi_t. The continuous-time generator has the same
sparsity with rates in place of probabilities and zero column sums. Exact
stationary distributions come from a linear solve, so non-reversible models
are covered too.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .choice import ContinuousMeetings, DiscreteMeetings, SwitchingModel
from .graphs import DEFAULT_CAP_LOG2, Network, check_state_space, dyad_from_index, n_dyads

RNG_ALGORITHM = "philox4x64"
DENSE_SOLVE_MAX_STATES = 1 << 12


class StationarySolveError(Exception):
    """Exact stationary solve failed its residual check."""


@dataclass(frozen=True)
class TransitionOperator:
    """Sparse chain operator over the enumerated network space.

    kind "discrete": column-stochastic matrix P = I + q A.
    kind "continuous": generator Q with nonnegative off-diagonals and zero
    column sums; the master equation is d pi / dt = Q pi.
    """

    kind: str
    n_nodes: int
    matrix: sp.csc_matrix

    @property
    def n_states(self) -> int:
        return self.matrix.shape[0]


def _flip_probability_table(model: SwitchingModel, n_nodes: int, n_states: int) -> np.ndarray:
    """p[state, dyad] for the whole space; one evaluation per entry."""
    m = n_dyads(n_nodes)
    table = np.empty((n_states, m))
    for mask in range(n_states):
        g = Network(n_nodes, mask)
        for idx in range(m):
            table[mask, idx] = model.p_index(g, idx)
    return table


def build_transition_operator(
    model: SwitchingModel,
    meetings,
    n_nodes: int,
    cap_log2: int = DEFAULT_CAP_LOG2,
) -> TransitionOperator:
    """Assemble P (discrete meetings) or the generator Q (continuous rates).

    Column k holds the outflows of state k: entry (l, k) is the meeting
    weight of the flipped dyad times its switching probability, for the
    single-flip neighbours l of k; the diagonal balances the column.
    """
    n_states = check_state_space(n_nodes, cap_log2)
    m = n_dyads(n_nodes)
    weights = meetings.array()
    discrete = isinstance(meetings, DiscreteMeetings)
    if not discrete and not isinstance(meetings, ContinuousMeetings):
        raise TypeError(f"unsupported meeting process {type(meetings)!r}")

    p_table = _flip_probability_table(model, n_nodes, n_states)

    nnz = n_states * (m + 1)
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz)
    pos = 0
    for k in range(n_states):
        out = 0.0
        for idx in range(m):
            rate = weights[idx] * p_table[k, idx]
            rows[pos] = k ^ (1 << idx)
            cols[pos] = k
            vals[pos] = rate
            out += rate
            pos += 1
        rows[pos] = k
        cols[pos] = k
        vals[pos] = (1.0 - out) if discrete else -out
        pos += 1

    matrix = sp.csc_matrix((vals, (rows, cols)), shape=(n_states, n_states))
    return TransitionOperator(
        kind="discrete" if discrete else "continuous",
        n_nodes=n_nodes,
        matrix=matrix,
    )


def stationary_exact(op: TransitionOperator, residual_tol: float = 1e-10) -> np.ndarray:
    """Solve P pi = pi (or Q pi = 0) with the normalization replacing one row.

    Dense direct solve below 2^12 states, sparse iterative (LGMRES) above;
    the residual is always verified and failure is reported rather than
    silently returning an approximate answer.
    """
    n = op.n_states
    if op.kind == "discrete":
        balance = op.matrix - sp.identity(n, format="csc")
    else:
        balance = op.matrix.copy()

    if n <= DENSE_SOLVE_MAX_STATES:
        a = balance.toarray()
        a[-1, :] = 1.0
        b = np.zeros(n)
        b[-1] = 1.0
        try:
            pi = np.linalg.solve(a, b)
        except np.linalg.LinAlgError as exc:
            raise StationarySolveError(f"dense solve failed: {exc}") from exc
    else:
        a = sp.csr_matrix(balance)
        a = a.tolil()
        a[-1, :] = 1.0
        a = a.tocsr()
        b = np.zeros(n)
        b[-1] = 1.0
        pi, info = spla.lgmres(a, b, atol=1e-13, maxiter=5000)
        if info != 0:
            raise StationarySolveError(f"LGMRES did not converge (info={info})")

    if op.kind == "discrete":
        resid = np.max(np.abs(op.matrix @ pi - pi))
    else:
        resid = np.max(np.abs(op.matrix @ pi))
    if resid > residual_tol:
        raise StationarySolveError(
            f"stationary residual {resid:.3e} above tolerance {residual_tol:.1e}"
        )
    if np.any(pi <= 0.0):
        raise StationarySolveError("stationary solve produced non-positive entries")
    return pi / pi.sum()


def tv_distance(p: np.ndarray, q: np.ndarray) -> float:
    """Total variation distance between two distributions of equal length."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"length mismatch {p.shape} vs {q.shape}")
    return 0.5 * float(np.abs(p - q).sum())


@dataclass
class Trajectory:
    """One simulated chain: the event log plus an occupation measure.

    Occupation is a per-state vector in exhaustive mode (step counts for the
    discrete chain, sojourn times for the continuous one), normalized to a
    distribution over the post-burn-in horizon. In observable mode it is the
    time average of the tracked observable instead.
    """

    n_nodes: int
    seed: int
    algorithm: str
    kind: str
    initial_state: int
    final_state: int
    total: float  # steps (discrete) or elapsed time (continuous)
    event_times: np.ndarray
    event_dyads: np.ndarray
    event_flips: np.ndarray
    occupation: Optional[np.ndarray] = None
    observable_average: Optional[float] = None
    burn_in: float = 0.0

    @property
    def n_events(self) -> int:
        return len(self.event_times)

    def occupation_distribution(self) -> np.ndarray:
        if self.occupation is None:
            raise ValueError("trajectory was run in observable-tracking mode")
        total = self.occupation.sum()
        if total <= 0:
            raise ValueError("empty occupation measure (horizon shorter than burn-in?)")
        return self.occupation / total

    def to_csv(self) -> str:
        lines = [
            f"# kind={self.kind} seed={self.seed} rng={self.algorithm} "
            f"n_nodes={self.n_nodes} events={self.n_events}",
            "event_index,time,dyad_i,dyad_j,flipped,state_hex",
        ]
        state = self.initial_state
        for k in range(self.n_events):
            idx = int(self.event_dyads[k])
            d = dyad_from_index(self.n_nodes, idx)
            if self.event_flips[k]:
                state ^= 1 << idx
            lines.append(
                f"{k},{self.event_times[k]:.17g},{d.i},{d.j},"
                f"{int(self.event_flips[k])},g:{state:x}"
            )
        return "\n".join(lines) + "\n"


def _chain_rng(seed: int, chain: int = 0) -> np.random.Generator:
    """Counter-based generator stream derived from (master seed, chain index)."""
    key = (int(seed) + (int(chain) << 32)) & ((1 << 64) - 1)
    return np.random.Generator(np.random.Philox(key=key))


_EVENT_CHUNK = 1 << 16


class _Accumulator:
    """Occupation bookkeeping shared by both simulators.

    Exhaustive mode counts per-state weight (periods or sojourn time) in a
    plain list for speed; observable mode averages a tracked network
    function instead. Weight before the burn-in threshold is discarded,
    splitting the straddling interval.
    """

    def __init__(self, n_nodes, n_states, track_observable, burn_in):
        self.n_nodes = n_nodes
        self.track_observable = track_observable
        self.burn_in = burn_in
        self.slots = [0.0] * n_states if track_observable is None else None
        self.obs_sum = 0.0
        self.obs_weight = 0.0

    def credit(self, state: int, start: float, end: float):
        lo = start if start > self.burn_in else self.burn_in
        if end <= lo:
            return
        w = end - lo
        if self.slots is not None:
            self.slots[state] += w
        else:
            self.obs_sum += w * self.track_observable(Network(self.n_nodes, state))
            self.obs_weight += w

    def occupation(self) -> Optional[np.ndarray]:
        return None if self.slots is None else np.array(self.slots)

    def observable_average(self) -> Optional[float]:
        if self.track_observable is None:
            return None
        return self.obs_sum / self.obs_weight if self.obs_weight > 0 else float("nan")


def _prepare_sim(model, meetings, n_nodes, track_observable, cap_log2):
    """Flip-probability lookup plus the conditional dyad distribution."""
    if track_observable is None:
        n_states = check_state_space(n_nodes, cap_log2)
        table = _flip_probability_table(model, n_nodes, n_states)
        p_rows = table.tolist()  # list indexing beats ndarray scalar reads here

        def p_of(state: int, idx: int) -> float:
            return p_rows[state][idx]

    else:
        if n_nodes > 64:
            raise ValueError("observable tracking caps n_nodes at 64")
        n_states = 0

        def p_of(state: int, idx: int) -> float:
            return model.p_index(Network(n_nodes, state), idx)

    weights = meetings.array()
    cum = np.cumsum(weights / weights.sum())
    cum[-1] = 1.0
    return n_states, p_of, cum


def simulate_discrete(
    model: SwitchingModel,
    meetings: DiscreteMeetings,
    n_nodes: int,
    steps: int,
    seed: int,
    chain: int = 0,
    initial: Optional[Network] = None,
    burn_in_fraction: float = 0.1,
    track_observable: Optional[Callable[[Network], float]] = None,
    cap_log2: int = DEFAULT_CAP_LOG2,
) -> Trajectory:
    """Run the discrete-time chain for a fixed number of periods.

    Per period: no meeting with probability 1-q, otherwise one dyad is drawn
    from q/q and flipped with its switching probability. Periods between
    meetings are geometric, so the loop jumps meeting to meeting with
    geometric gap draws; the per-period law is unchanged and each event is
    touched exactly once.
    """
    if not isinstance(meetings, DiscreteMeetings):
        raise TypeError("simulate_discrete needs a DiscreteMeetings process")
    _, p_of, cum = _prepare_sim(model, meetings, n_nodes, track_observable, cap_log2)
    n_states_full = (1 << n_dyads(n_nodes)) if track_observable is None else 0
    burn_in_steps = float(int(burn_in_fraction * steps))
    acc = _Accumulator(n_nodes, n_states_full, track_observable, burn_in_steps)

    rng = _chain_rng(seed, chain)
    q_total = meetings.total
    state = initial.mask if initial is not None else 0
    times: list = []
    dyads: list = []
    flips: list = []

    step = 0
    done = steps == 0
    while not done:
        gaps = rng.geometric(q_total, size=_EVENT_CHUNK)
        idxs = np.searchsorted(cum, rng.random(size=_EVENT_CHUNK), side="right")
        us = rng.random(size=_EVENT_CHUNK)
        for k in range(_EVENT_CHUNK):
            gap = int(gaps[k])
            if step + gap > steps:
                acc.credit(state, step, steps)
                done = True
                break
            acc.credit(state, step, step + gap)
            step += gap
            idx = int(idxs[k])
            flipped = us[k] < p_of(state, idx)
            times.append(float(step - 1))  # period index of the meeting
            dyads.append(idx)
            flips.append(flipped)
            if flipped:
                state ^= 1 << idx
            if step >= steps:
                done = True
                break

    return Trajectory(
        n_nodes=n_nodes,
        seed=seed,
        algorithm=RNG_ALGORITHM,
        kind="discrete",
        initial_state=(initial.mask if initial is not None else 0),
        final_state=state,
        total=float(steps),
        event_times=np.array(times),
        event_dyads=np.array(dyads, dtype=np.int64),
        event_flips=np.array(flips, dtype=bool),
        occupation=acc.occupation(),
        observable_average=acc.observable_average(),
        burn_in=burn_in_steps,
    )


def simulate_continuous(
    model: SwitchingModel,
    meetings: ContinuousMeetings,
    n_nodes: int,
    horizon: float,
    seed: int,
    chain: int = 0,
    initial: Optional[Network] = None,
    burn_in_fraction: float = 0.1,
    track_observable: Optional[Callable[[Network], float]] = None,
    cap_log2: int = DEFAULT_CAP_LOG2,
) -> Trajectory:
    """Exact continuous-time simulation up to the given horizon.

    Evaluation arrivals are Poisson with state-independent rates, so the
    total rate is constant: Exp(total) interarrivals, a dyad from the
    normalized rates, a flip with the switching probability. Sojourn times
    between events accumulate into the occupation measure.
    """
    if not isinstance(meetings, ContinuousMeetings):
        raise TypeError("simulate_continuous needs a ContinuousMeetings process")
    _, p_of, cum = _prepare_sim(model, meetings, n_nodes, track_observable, cap_log2)
    n_states_full = (1 << n_dyads(n_nodes)) if track_observable is None else 0
    burn_in_time = burn_in_fraction * horizon
    acc = _Accumulator(n_nodes, n_states_full, track_observable, burn_in_time)

    rng = _chain_rng(seed, chain)
    lam_total = meetings.total
    state = initial.mask if initial is not None else 0
    times: list = []
    dyads: list = []
    flips: list = []

    t = 0.0
    done = horizon <= 0.0
    if done:
        acc.credit(state, 0.0, horizon)
    while not done:
        dts = rng.exponential(1.0 / lam_total, size=_EVENT_CHUNK)
        idxs = np.searchsorted(cum, rng.random(size=_EVENT_CHUNK), side="right")
        us = rng.random(size=_EVENT_CHUNK)
        for k in range(_EVENT_CHUNK):
            t_next = t + dts[k]
            if t_next >= horizon:
                acc.credit(state, t, horizon)
                done = True
                break
            acc.credit(state, t, t_next)
            t = t_next
            idx = int(idxs[k])
            flipped = us[k] < p_of(state, idx)
            times.append(t)
            dyads.append(idx)
            flips.append(flipped)
            if flipped:
                state ^= 1 << idx

    return Trajectory(
        n_nodes=n_nodes,
        seed=seed,
        algorithm=RNG_ALGORITHM,
        kind="continuous",
        initial_state=(initial.mask if initial is not None else 0),
        final_state=state,
        total=float(horizon),
        event_times=np.array(times),
        event_dyads=np.array(dyads, dtype=np.int64),
        event_flips=np.array(flips, dtype=bool),
        occupation=acc.occupation(),
        observable_average=acc.observable_average(),
        burn_in=burn_in_time,
    )
