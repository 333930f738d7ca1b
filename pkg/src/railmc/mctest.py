"""Chi-square test of the Markov order of delay evolution at one station.

Implements likelihood-ratio and chi-square statistics for the zero-order and
first-order null hypotheses on sparse count matrices. Degrees of freedom are
computed on the truncated matrices (all-zero rows and columns removed), so the
statistics and df are invariant under relabeling of unobserved states.

The accept/reject ladder tests H0(0) first and only proceeds to H0(1) when the
zero-order null is rejected. Both statistics are always computed; the ladder
uses Q by default, with LR available as an alternative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

from scipy import special

from .core import CountTensor, FrequencyEstimates, estimate_frequencies

__all__ = [
    "Verdict",
    "OrderTestReport",
    "chi_square_cdf",
    "chi_square_quantile",
    "zero_order_statistics",
    "first_order_statistics",
    "markov_property_test",
    "aggregate_reports",
]

Verdict = Literal["not_rejected", "rejected", "untestable"]
Statistic = Literal["LR", "Q"]


def chi_square_cdf(x: float, df: int) -> float:
    """P(X <= x) for X ~ chi-square with df degrees of freedom.

    Computed as the regularized lower incomplete gamma P(df/2, x/2).
    """
    if df < 1:
        raise ValueError(f"df must be >= 1, got {df}")
    if x < 0:
        raise ValueError(f"x must be >= 0, got {x}")
    return float(special.gammainc(df / 2.0, x / 2.0))


def chi_square_quantile(p: float, df: int) -> float:
    """Inverse of chi_square_cdf in its first argument."""
    if df < 1:
        raise ValueError(f"df must be >= 1, got {df}")
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must be in (0, 1), got {p}")
    return float(2.0 * special.gammaincinv(df / 2.0, p))


def zero_order_statistics(
    freq: FrequencyEstimates, counts: CountTensor
) -> tuple[float, float, int]:
    """Zero-order LR and Q statistics with truncated degrees of freedom.

    LR = 2 sum_{i,j: p_ij != 0} n_ij ln(p_ij / p_j)
    Q  = sum_{i,j: p_ij != 0} n_i(t-1) (p_ij - p_j)^2 / p_j
    df = (|A(t-1)| - 1)(|A(t)| - 1) on the zero-row/column-truncated matrix.

    Only observed cells enter the sums (the 0*ln 0 convention), so deleting
    all-zero rows and columns beforehand changes nothing.
    """
    if counts.station_index < 2:
        raise ValueError("zero-order test needs station index t >= 2")
    if not freq.p2:
        raise ValueError("no defined transition rows: untestable")
    row_tot = counts.row_counts()
    lr = 0.0
    q = 0.0
    for (i, j), n_ij in counts.n2.items():
        if n_ij == 0:
            continue
        p_ij = freq.p2[i][j]
        p_j = freq.p1[j]
        lr += 2.0 * n_ij * math.log(p_ij / p_j)
        q += row_tot[i] * (p_ij - p_j) ** 2 / p_j
    rows = {i for (i, j), c in counts.n2.items() if c > 0}
    cols = {j for (i, j), c in counts.n2.items() if c > 0}
    df = (len(rows) - 1) * (len(cols) - 1)
    return lr, q, df


def first_order_statistics(
    freq: FrequencyEstimates, counts: CountTensor
) -> tuple[float, float, int]:
    """First-order LR and Q statistics with truncated degrees of freedom.

    LR = 2 sum_{h,i,j: p_hij != 0} n_hij ln(p_hij / p_ij)
    Q  = sum_{h,i,j: p_hij != 0} n_hi(t-1) (p_hij - p_ij)^2 / p_ij
    df = (|A(t-2)| - 1) |A(t-1)| (|A(t)| - 1)

    n_{h,i}(t-1) is aggregated as sum_j n_{h,i,j}(t), the only reading
    consistent with the statistic.
    """
    if counts.station_index < 3:
        raise ValueError("first-order test needs station index t >= 3")
    if not freq.p3:
        raise ValueError("no defined second-order cells: untestable")
    pair_tot = counts.pair_counts()
    lr = 0.0
    q = 0.0
    for (h, i, j), n_hij in counts.n3.items():
        if n_hij == 0:
            continue
        p_hij = freq.p3[(h, i)][j]
        p_ij = freq.p2[i][j]
        lr += 2.0 * n_hij * math.log(p_hij / p_ij)
        q += pair_tot[(h, i)] * (p_hij - p_ij) ** 2 / p_ij
    sup_h = {h for (h, i, j), c in counts.n3.items() if c > 0}
    sup_i = {i for (h, i, j), c in counts.n3.items() if c > 0}
    sup_j = {j for (h, i, j), c in counts.n3.items() if c > 0}
    df = (len(sup_h) - 1) * len(sup_i) * (len(sup_j) - 1)
    return lr, q, df


@dataclass(frozen=True)
class OrderTestReport:
    """Outcome of the order-test ladder at one station."""

    station_index: int
    alpha1: float
    alpha2: float
    statistic: Statistic
    lr0: float | None = None
    q0: float | None = None
    df0: int | None = None
    lr1: float | None = None
    q1: float | None = None
    df1: int | None = None
    # verdicts keyed by statistic name, each a (H0(0), H0(1)) pair; the
    # H0(1) slot is None when the ladder stopped at order zero
    verdicts: dict[str, tuple[Verdict, Verdict | None]] = field(default_factory=dict)

    @property
    def verdict_h0_0(self) -> Verdict:
        return self.verdicts[self.statistic][0]

    @property
    def verdict_h0_1(self) -> Verdict | None:
        return self.verdicts[self.statistic][1]

    def to_dict(self) -> dict:
        return {
            "t": self.station_index,
            "alpha1": self.alpha1,
            "alpha2": self.alpha2,
            "statistic": self.statistic,
            "lr0": self.lr0,
            "q0": self.q0,
            "df0": self.df0,
            "lr1": self.lr1,
            "q1": self.q1,
            "df1": self.df1,
            "verdicts": {k: list(v) for k, v in self.verdicts.items()},
        }


def _ladder(
    stat0: float,
    df0: int,
    stat1: float | None,
    df1: int | None,
    alpha1: float,
    alpha2: float,
) -> tuple[Verdict, Verdict | None]:
    if df0 < 1:
        return "untestable", None
    if stat0 < chi_square_quantile(1.0 - alpha1, df0):
        return "not_rejected", None
    if stat1 is None or df1 is None or df1 < 1:
        return "rejected", "untestable"
    if stat1 < chi_square_quantile(1.0 - alpha2, df1):
        return "rejected", "not_rejected"
    return "rejected", "rejected"


def markov_property_test(
    counts: CountTensor,
    alpha1: float = 0.05,
    alpha2: float = 0.05,
    statistic: Statistic = "Q",
) -> OrderTestReport:
    """Run the order-test ladder on the counts for one station.

    Tests H0(0) at level alpha1; on rejection tests H0(1) at level alpha2.
    Ladders for both LR and Q are recorded; `statistic` selects which one the
    report's primary verdicts refer to.
    """
    if not 0.0 < alpha1 < 1.0 or not 0.0 < alpha2 < 1.0:
        raise ValueError("significance levels must lie in (0, 1)")
    freq = estimate_frequencies(counts)
    if not freq.p2:
        return OrderTestReport(
            station_index=counts.station_index,
            alpha1=alpha1,
            alpha2=alpha2,
            statistic=statistic,
            verdicts={"LR": ("untestable", None), "Q": ("untestable", None)},
        )
    lr0, q0, df0 = zero_order_statistics(freq, counts)
    lr1 = q1 = None
    df1 = None
    if counts.station_index >= 3 and freq.p3:
        lr1, q1, df1 = first_order_statistics(freq, counts)
    verdicts = {
        "LR": _ladder(lr0, df0, lr1, df1, alpha1, alpha2),
        "Q": _ladder(q0, df0, q1, df1, alpha1, alpha2),
    }
    return OrderTestReport(
        station_index=counts.station_index,
        alpha1=alpha1,
        alpha2=alpha2,
        statistic=statistic,
        lr0=lr0,
        q0=q0,
        df0=df0,
        lr1=lr1,
        q1=q1,
        df1=df1,
        verdicts=verdicts,
    )


def aggregate_reports(reports: list[OrderTestReport]) -> dict:
    """Aggregate per-station reports into a summary table.

    One row per statistic: total stations tested, stations rejecting H0(0),
    stations rejecting H0(1). Significance levels are recorded alongside.
    """
    agg: dict = {"total_stations": len(reports), "statistics": {}}
    if reports:
        agg["alpha1"] = reports[0].alpha1
        agg["alpha2"] = reports[0].alpha2
    for name in ("LR", "Q"):
        r0 = sum(1 for r in reports if r.verdicts.get(name, (None, None))[0] == "rejected")
        r1 = sum(1 for r in reports if r.verdicts.get(name, (None, None))[1] == "rejected")
        agg["statistics"][name] = {"reject_h0_0": r0, "reject_h0_1": r1}
    return agg
