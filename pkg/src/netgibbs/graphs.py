"""Directed networks on labelled nodes as dyad bitsets, plus type partitions.

A network over N nodes is a subset of the N(N-1) ordered pairs (dyads).
Dyads are indexed row-major over ordered pairs skipping the diagonal, so
index <-> (i, j) is O(1) both ways and the integer bitmask ordering is the
canonical enumeration of the whole network space.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

# Refuse exhaustive work above this many states unless the caller raises it.
DEFAULT_CAP_LOG2 = 20


class StateSpaceOverflowError(Exception):
    """State space 2^(N(N-1)) exceeds the exhaustive cap."""


def n_dyads(n_nodes: int) -> int:
    return n_nodes * (n_nodes - 1)


def dyad_index(n_nodes: int, i: int, j: int) -> int:
    """Canonical index of dyad (i, j): row-major, diagonal skipped."""
    if i == j:
        raise ValueError(f"self-dyad ({i},{i}) is not allowed")
    if not (0 <= i < n_nodes and 0 <= j < n_nodes):
        raise ValueError(f"dyad ({i},{j}) out of range for {n_nodes} nodes")
    return i * (n_nodes - 1) + (j if j < i else j - 1)


def dyad_from_index(n_nodes: int, idx: int) -> "Dyad":
    """Inverse of dyad_index."""
    if not (0 <= idx < n_dyads(n_nodes)):
        raise ValueError(f"dyad index {idx} out of range for {n_nodes} nodes")
    i, r = divmod(idx, n_nodes - 1)
    j = r if r < i else r + 1
    return Dyad(i, j)


@dataclass(frozen=True)
class Dyad:
    """Ordered pair (i, j), i != j: a potential directed link."""

    i: int
    j: int

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError(f"self-dyad ({self.i},{self.i}) is not allowed")
        if self.i < 0 or self.j < 0:
            raise ValueError(f"negative node index in dyad ({self.i},{self.j})")

    def index(self, n_nodes: int) -> int:
        return dyad_index(n_nodes, self.i, self.j)


@dataclass(frozen=True)
class Network:
    """Immutable directed network: node count plus a dyad bitmask.

    Cheap to copy and hash; all operations return new instances.
    """

    n_nodes: int
    mask: int = 0

    def __post_init__(self):
        if self.n_nodes < 2:
            raise ValueError("a network needs at least 2 nodes")
        if self.mask < 0 or self.mask >> n_dyads(self.n_nodes):
            raise ValueError("link mask has bits outside the dyad range")

    @classmethod
    def empty(cls, n_nodes: int) -> "Network":
        return cls(n_nodes, 0)

    @classmethod
    def complete(cls, n_nodes: int) -> "Network":
        return cls(n_nodes, (1 << n_dyads(n_nodes)) - 1)

    @classmethod
    def from_dyads(cls, n_nodes: int, dyads: Sequence) -> "Network":
        mask = 0
        for d in dyads:
            i, j = (d.i, d.j) if isinstance(d, Dyad) else d
            mask |= 1 << dyad_index(n_nodes, i, j)
        return cls(n_nodes, mask)

    @property
    def n_dyads(self) -> int:
        return n_dyads(self.n_nodes)

    @property
    def n_links(self) -> int:
        return bin(self.mask).count("1")

    def has(self, d: Dyad) -> bool:
        return bool(self.mask >> d.index(self.n_nodes) & 1)

    def has_index(self, idx: int) -> bool:
        return bool(self.mask >> idx & 1)

    def dyads(self) -> Iterator[Dyad]:
        """Present dyads in canonical index order."""
        mask = self.mask
        idx = 0
        while mask:
            if mask & 1:
                yield dyad_from_index(self.n_nodes, idx)
            mask >>= 1
            idx += 1

    def to_hex(self) -> str:
        """Serialization used in CSV output and golden files, e.g. 'g:3f'."""
        return f"g:{self.mask:x}"

    @classmethod
    def from_hex(cls, n_nodes: int, text: str) -> "Network":
        if not text.startswith("g:"):
            raise ValueError(f"network string must start with 'g:': {text!r}")
        return cls(n_nodes, int(text[2:], 16))

    def __repr__(self) -> str:
        pairs = ",".join(f"{d.i}{d.j}" for d in self.dyads())
        return f"Network(N={self.n_nodes}, {{{pairs}}})"


def switch_link(g: Network, d: Dyad) -> Network:
    """Toggle dyad d: creates the link if absent, severs it if present."""
    return Network(g.n_nodes, g.mask ^ (1 << d.index(g.n_nodes)))


def switch_index(g: Network, idx: int) -> Network:
    """switch_link by canonical dyad index (no Dyad allocation)."""
    if not (0 <= idx < g.n_dyads):
        raise ValueError(f"dyad index {idx} out of range")
    return Network(g.n_nodes, g.mask ^ (1 << idx))


def check_state_space(n_nodes: int, cap_log2: int = DEFAULT_CAP_LOG2) -> int:
    """Return the state count 2^(N(N-1)), refusing sizes above the cap."""
    bits = n_dyads(n_nodes)
    if bits > cap_log2:
        raise StateSpaceOverflowError(
            f"N={n_nodes} has 2^{bits} networks, above the 2^{cap_log2} cap"
        )
    return 1 << bits


def enumerate_networks(n_nodes: int, cap_log2: int = DEFAULT_CAP_LOG2) -> Iterator[Network]:
    """Yield every network on n_nodes exactly once, in bitmask order.

    The stream index is the bitmask, so position <-> network is a bijection.
    """
    if n_nodes < 2:
        raise ValueError("enumeration needs at least 2 nodes")
    n_states = check_state_space(n_nodes, cap_log2)
    for mask in range(n_states):
        yield Network(n_nodes, mask)


def out_mask(n_nodes: int, i: int) -> int:
    """Bitmask of all dyads with source i."""
    if not (0 <= i < n_nodes):
        raise ValueError(f"node {i} out of range")
    base = i * (n_nodes - 1)
    return ((1 << (n_nodes - 1)) - 1) << base


def out_subgraph(g: Network, i: int) -> Network:
    """Subnetwork keeping exactly g's dyads with source i."""
    return Network(g.n_nodes, g.mask & out_mask(g.n_nodes, i))


@dataclass(frozen=True)
class TypeProfile:
    """Partition of agents into C types.

    Finite-N mode carries a per-node assignment; asymptotic mode carries
    only the limiting type weights. Both use labels 0..C-1.
    """

    n_types: int
    assignment: Optional[tuple] = None
    weights: Optional[tuple] = None

    def __post_init__(self):
        if self.n_types < 1:
            raise ValueError("need at least one type")
        if self.assignment is None and self.weights is None:
            raise ValueError("TypeProfile needs an assignment or weights")
        if self.assignment is not None:
            labels = set(self.assignment)
            if not labels <= set(range(self.n_types)):
                raise ValueError(f"type labels {labels} not all in 0..{self.n_types - 1}")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if len(w) != self.n_types:
                raise ValueError("weights length must equal n_types")
            if np.any(w <= 0):
                raise ValueError("type weights must be strictly positive")
            if abs(w.sum() - 1.0) > 1e-12:
                raise ValueError(f"type weights sum to {w.sum()}, not 1")

    @classmethod
    def from_assignment(cls, assignment: Sequence[int], n_types: Optional[int] = None) -> "TypeProfile":
        assignment = tuple(int(t) for t in assignment)
        if n_types is None:
            n_types = max(assignment) + 1
        return cls(n_types=n_types, assignment=assignment)

    @classmethod
    def from_weights(cls, weights: Sequence[float]) -> "TypeProfile":
        return cls(n_types=len(weights), weights=tuple(float(w) for w in weights))

    @classmethod
    def from_counts(cls, counts: Sequence[int]) -> "TypeProfile":
        """Finite-N profile with the first count nodes of type 0, and so on."""
        assignment = []
        for label, c in enumerate(counts):
            assignment.extend([label] * int(c))
        return cls.from_assignment(assignment, n_types=len(counts))

    @property
    def n_nodes(self) -> int:
        if self.assignment is None:
            raise ValueError("asymptotic-mode profile has no node count")
        return len(self.assignment)

    def type_of(self, i: int) -> int:
        if self.assignment is None:
            raise ValueError("asymptotic-mode profile has no per-node types")
        return self.assignment[i]

    def counts(self) -> np.ndarray:
        """Group sizes N_r (finite-N mode)."""
        out = np.zeros(self.n_types, dtype=int)
        for t in self.assignment:
            out[t] += 1
        return out

    def weight_array(self) -> np.ndarray:
        if self.weights is not None:
            return np.asarray(self.weights, dtype=float)
        return self.counts() / self.n_nodes


def typed_outdegrees(g: Network, i: int, tp: TypeProfile) -> np.ndarray:
    """Count i's out-links per target type; entry r counts links to type r."""
    if tp.assignment is None:
        raise ValueError("typed_outdegrees needs a finite-N profile")
    if tp.n_nodes != g.n_nodes:
        raise ValueError(
            f"profile covers {tp.n_nodes} nodes but network has {g.n_nodes}"
        )
    counts = np.zeros(tp.n_types, dtype=int)
    for j in range(g.n_nodes):
        if j != i and g.has_index(dyad_index(g.n_nodes, i, j)):
            counts[tp.type_of(j)] += 1
    return counts
