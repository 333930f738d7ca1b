"""Domain types and maximum-likelihood frequency estimators.

States are integer delay minutes on the bounded domain [-N, N]. Station
indices are 1-based along a journey. Counts are kept as exact integers in
plain dicts keyed by state tuples; frequencies are derived double-precision
ratios. Rows with no observations are explicitly *undefined*, never emitted
as all-zero probability rows.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "StateSpace",
    "DelaySeries",
    "CountTensor",
    "FrequencyEstimates",
    "RowStatus",
    "TransitionMatrix",
    "DelayDistribution",
    "AlignmentError",
    "build_count_tensor",
    "estimate_frequencies",
]

ROW_SUM_TOL = 1e-9
FREQ_SUM_TOL = 1e-12


class AlignmentError(ValueError):
    """Series in one group do not share a station alignment."""


@dataclass(frozen=True)
class StateSpace:
    """The bounded integer delay domain [-n_max, n_max] in minutes."""

    n_max: int = 15

    def __post_init__(self) -> None:
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")

    @property
    def cardinality(self) -> int:
        return 2 * self.n_max + 1

    def states(self) -> np.ndarray:
        """All states as an ordered integer vector -N..N."""
        return np.arange(-self.n_max, self.n_max + 1)

    def index(self, delay: int) -> int:
        """Map a delay value to its row/column index (bijection onto 0..2N)."""
        if not -self.n_max <= delay <= self.n_max:
            raise ValueError(f"delay {delay} outside [-{self.n_max}, {self.n_max}]")
        return delay + self.n_max

    def state(self, index: int) -> int:
        if not 0 <= index < self.cardinality:
            raise ValueError(f"index {index} outside 0..{self.cardinality - 1}")
        return index - self.n_max

    def contains(self, delay: int) -> bool:
        return -self.n_max <= delay <= self.n_max

    def clip(self, delay: int) -> int:
        """Saturate a delay into the domain."""
        return max(-self.n_max, min(self.n_max, delay))


@dataclass(frozen=True)
class DelaySeries:
    """One train's per-station delays on one date. Station t maps to delays[t-1]."""

    train_id: str
    date: str
    delays: tuple[int, ...]
    clipped: int = 0  # observations saturated into the domain during assembly

    def __len__(self) -> int:
        return len(self.delays)


@dataclass(frozen=True)
class CountTensor:
    """Observation counts at station t.

    n1[j]       = n_j(t):      series delayed j minutes at station t
    n2[(i, j)]  = n_{i,j}(t):  j at t and i at t-1
    n3[(h,i,j)] = n_{h,i,j}(t): j at t, i at t-1, h at t-2

    Only series long enough to cover the relevant stations contribute; all
    series start at station 1, so the contributing set is identical for all
    three tallies and the aggregation relations hold exactly.
    """

    station_index: int
    n1: Mapping[int, int]
    n2: Mapping[tuple[int, int], int]
    n3: Mapping[tuple[int, int, int], int]

    def pair_counts(self) -> dict[tuple[int, int], int]:
        """n_{h,i}(t-1) aggregated from the triple counts."""
        out: dict[tuple[int, int], int] = {}
        for (h, i, _j), c in self.n3.items():
            out[(h, i)] = out.get((h, i), 0) + c
        return out

    def row_counts(self) -> dict[int, int]:
        """n_i(t-1) aggregated from the pair counts."""
        out: dict[int, int] = {}
        for (i, _j), c in self.n2.items():
            out[i] = out.get(i, 0) + c
        return out

    def destination_support(self, j: int) -> frozenset[int]:
        """C_j(t) = {i : n_{i,j}(t) > 0}. Derivable accessor, unused downstream."""
        return frozenset(i for (i, jj), c in self.n2.items() if jj == j and c > 0)

    def validate(self) -> None:
        """Assert the count-aggregation relations over the contributing series."""
        for c in list(self.n1.values()) + list(self.n2.values()) + list(self.n3.values()):
            if c < 0:
                raise ValueError("negative count")
        if self.n2:
            col = {}
            for (_i, j), c in self.n2.items():
                col[j] = col.get(j, 0) + c
            if col != {j: c for j, c in self.n1.items() if c > 0}:
                raise ValueError("n_j(t) != sum_i n_{i,j}(t)")
        if self.n3:
            col2 = {}
            for (_h, i, j), c in self.n3.items():
                col2[(i, j)] = col2.get((i, j), 0) + c
            if col2 != {k: c for k, c in self.n2.items() if c > 0}:
                raise ValueError("n_{i,j}(t) != sum_h n_{h,i,j}(t)")


@dataclass(frozen=True)
class FrequencyEstimates:
    """MLE frequencies derived from a CountTensor.

    p2/p3 rows exist only where the corresponding marginal count is positive;
    missing rows mean *undefined*, not zero.
    """

    station_index: int
    p1: Mapping[int, float]
    p2: Mapping[int, Mapping[int, float]]
    p3: Mapping[tuple[int, int], Mapping[int, float]]
    support_t: frozenset[int]        # A(t)
    support_tm1: frozenset[int]      # A(t-1)
    support_tm2: frozenset[int]      # A(t-2)
    row_support: Mapping[int, frozenset[int]]  # B_i(t)


def build_count_tensor(series_set: Iterable[DelaySeries], t: int) -> CountTensor:
    """Tally n_j(t), n_{i,j}(t), n_{h,i,j}(t) over a group of aligned series.

    A series contributes to n1 when it covers station t, to n2 additionally
    when t >= 2, and to n3 when t >= 3.
    """
    if t < 1:
        raise ValueError(f"station index must be >= 1, got {t}")
    series_list = list(series_set)
    train_ids = {s.train_id for s in series_list}
    if len(train_ids) > 1:
        raise AlignmentError(f"series from multiple alignment groups: {sorted(train_ids)}")

    n1: dict[int, int] = {}
    n2: dict[tuple[int, int], int] = {}
    n3: dict[tuple[int, int, int], int] = {}
    for s in series_list:
        if len(s) < t:
            continue
        j = s.delays[t - 1]
        n1[j] = n1.get(j, 0) + 1
        if t >= 2:
            i = s.delays[t - 2]
            n2[(i, j)] = n2.get((i, j), 0) + 1
            if t >= 3:
                h = s.delays[t - 3]
                n3[(h, i, j)] = n3.get((h, i, j), 0) + 1
    return CountTensor(station_index=t, n1=n1, n2=n2, n3=n3)


def estimate_frequencies(counts: CountTensor) -> FrequencyEstimates:
    """Turn counts into MLE frequencies p̂_j, p̂_{i,j}, p̂_{h,i,j}.

    Rows whose marginal count is zero are simply absent from p2/p3.
    """
    total = sum(counts.n1.values())
    p1 = {j: c / total for j, c in counts.n1.items() if c > 0} if total else {}

    row_tot: dict[int, int] = counts.row_counts()
    p2: dict[int, dict[int, float]] = {}
    for (i, j), c in counts.n2.items():
        if c > 0:
            p2.setdefault(i, {})[j] = c / row_tot[i]

    pair_tot = counts.pair_counts()
    p3: dict[tuple[int, int], dict[int, float]] = {}
    for (h, i, j), c in counts.n3.items():
        if c > 0:
            p3.setdefault((h, i), {})[j] = c / pair_tot[(h, i)]

    return FrequencyEstimates(
        station_index=counts.station_index,
        p1=p1,
        p2=p2,
        p3=p3,
        support_t=frozenset(p1),
        support_tm1=frozenset(p2),
        support_tm2=frozenset(h for (h, _i) in p3),
        row_support={i: frozenset(row) for i, row in p2.items()},
    )


class RowStatus(enum.Enum):
    OBSERVED = "observed"
    RECOVERED = "recovered"
    UNDEFINED = "undefined"


@dataclass(frozen=True)
class TransitionMatrix:
    """(2N+1) x (2N+1) row-stochastic matrix P(t), possibly partial.

    Undefined rows hold zeros in `probs` and carry status UNDEFINED; they must
    be recovered before the matrix can be used for propagation.
    """

    station_index: int
    probs: np.ndarray
    row_status: tuple[RowStatus, ...]

    def __post_init__(self) -> None:
        k = self.probs.shape[0]
        if self.probs.shape != (k, k) or len(self.row_status) != k:
            raise ValueError("matrix shape and row_status length disagree")
        for r, status in enumerate(self.row_status):
            if status is RowStatus.UNDEFINED:
                continue
            row = self.probs[r]
            if (row < -1e-15).any() or abs(row.sum() - 1.0) > ROW_SUM_TOL:
                raise ValueError(f"row {r} is not a probability row (sum={row.sum()!r})")

    @property
    def is_complete(self) -> bool:
        return RowStatus.UNDEFINED not in self.row_status

    def undefined_rows(self) -> list[int]:
        return [r for r, s in enumerate(self.row_status) if s is RowStatus.UNDEFINED]


@dataclass(frozen=True)
class DelayDistribution:
    """Probability vector v(t) over the state space at station t."""

    station_index: int
    probs: np.ndarray

    def __post_init__(self) -> None:
        if (self.probs < -1e-15).any():
            raise ValueError("negative probability mass")
        if abs(self.probs.sum() - 1.0) > ROW_SUM_TOL:
            raise ValueError(f"distribution sums to {self.probs.sum()!r}, not 1")
