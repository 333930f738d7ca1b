import math

import numpy as np
import pytest
from scipy.integrate import quad

from railmc.core import (
    CountTensor,
    DelaySeries,
    StateSpace,
    build_count_tensor,
    estimate_frequencies,
)
from railmc.mctest import (
    aggregate_reports,
    chi_square_cdf,
    chi_square_quantile,
    first_order_statistics,
    markov_property_test,
    zero_order_statistics,
)
from railmc.synth import ChainSpec, sample_series


def chi2_cdf_by_quadrature(x, df):
    """Numerical-integration oracle for the chi-square CDF."""

    def density(u):
        return math.exp((df / 2 - 1) * math.log(u) - u / 2) / (
            2 ** (df / 2) * math.gamma(df / 2)
        )

    val, _err = quad(density, 0.0, x, limit=200)
    return val


def series(*delay_tuples, train="x"):
    return [DelaySeries(train, f"d{k}", tuple(d)) for k, d in enumerate(delay_tuples)]


class TestChiSquareFunctions:
    def test_cdf_at_zero(self):
        for df in (1, 3, 10, 100):
            assert chi_square_cdf(0.0, df) == 0.0

    @pytest.mark.parametrize("x,df", [(3.841, 1), (11.070, 5), (18.307, 10)])
    def test_cdf_against_quadrature_oracle(self, x, df):
        assert chi_square_cdf(x, df) == pytest.approx(0.950, abs=1e-3)
        assert chi_square_cdf(x, df) == pytest.approx(chi2_cdf_by_quadrature(x, df), abs=1e-9)

    def test_quantile_95_df1(self):
        assert chi_square_quantile(0.95, 1) == pytest.approx(3.841, abs=1e-3)

    def test_quantile_small_p_goes_to_zero(self):
        assert chi_square_quantile(1e-12, 4) < 1e-4

    def test_round_trip(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            p = float(rng.uniform(0.01, 0.99))
            df = int(rng.integers(1, 200))
            assert chi_square_cdf(chi_square_quantile(p, df), df) == pytest.approx(p, abs=1e-9)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            chi_square_cdf(1.0, 0)
        with pytest.raises(ValueError):
            chi_square_quantile(0.0, 3)
        with pytest.raises(ValueError):
            chi_square_quantile(1.0, 3)


def direct_summation_zero_order(counts):
    """Independent oracle: materialize dense arrays and sum term by term."""
    states = sorted({i for i, _ in counts.n2} | {j for _, j in counts.n2})
    pos = {s: k for k, s in enumerate(states)}
    n = np.zeros((len(states), len(states)))
    for (i, j), c in counts.n2.items():
        n[pos[i], pos[j]] = c
    row = n.sum(axis=1)
    col = n.sum(axis=0)
    p_j = col / n.sum()
    lr = q = 0.0
    for a in range(len(states)):
        for b in range(len(states)):
            if n[a, b] > 0:
                p_ij = n[a, b] / row[a]
                lr += 2 * n[a, b] * math.log(p_ij / p_j[b])
                q += row[a] * (p_ij - p_j[b]) ** 2 / p_j[b]
    df = (int((row > 0).sum()) - 1) * (int((col > 0).sum()) - 1)
    return lr, q, df


class TestZeroOrderStatistics:
    def test_two_state_hand_case(self):
        c = build_count_tensor(series((0, 0), (0, 0), (1, 1), (1, 1)), 2)
        f = estimate_frequencies(c)
        lr0, q0, df0 = zero_order_statistics(f, c)
        assert q0 == pytest.approx(2.0, abs=1e-12)
        assert lr0 == pytest.approx(8 * math.log(2), abs=1e-12)
        assert df0 == 1
        oracle = direct_summation_zero_order(c)
        assert lr0 == pytest.approx(oracle[0], abs=1e-12)
        assert q0 == pytest.approx(oracle[1], abs=1e-12)
        assert df0 == oracle[2]

    def test_exact_null_gives_zero(self):
        # product counts: identical conditional rows for every i
        s = []
        for i in (0, 1):
            for j, reps in ((0, 3), (1, 1)):
                s += [(i, j)] * reps
        c = build_count_tensor(series(*s), 2)
        f = estimate_frequencies(c)
        lr0, q0, _df = zero_order_statistics(f, c)
        assert lr0 == pytest.approx(0.0, abs=1e-12)
        assert q0 == pytest.approx(0.0, abs=1e-12)

    def test_df_arithmetic(self):
        # 4 observed source states, 3 observed destination states
        s = [(i, j) for i in (-2, -1, 0, 1) for j in (0, 1, 2)]
        c = build_count_tensor(series(*s), 2)
        f = estimate_frequencies(c)
        _lr, _q, df0 = zero_order_statistics(f, c)
        assert df0 == 6

    def test_truncation_invariance(self):
        # relabeling through unobserved states changes nothing
        a = build_count_tensor(series((0, 0), (0, 1), (1, 1), (1, 0), (0, 0)), 2)
        shifted = [tuple(5 * d - 3 for d in s.delays) for s in series((0, 0), (0, 1), (1, 1), (1, 0), (0, 0))]
        b = build_count_tensor(series(*shifted), 2)
        ra = zero_order_statistics(estimate_frequencies(a), a)
        rb = zero_order_statistics(estimate_frequencies(b), b)
        assert ra == pytest.approx(rb)

    def test_random_counts_match_oracle(self):
        space = StateSpace(2)
        spec = ChainSpec(
            space, 2, 1,
            np.full(5, 0.2), seed=17,
            matrices=(np.array([
                [0.5, 0.2, 0.1, 0.1, 0.1],
                [0.1, 0.5, 0.2, 0.1, 0.1],
                [0.1, 0.1, 0.5, 0.2, 0.1],
                [0.1, 0.1, 0.2, 0.5, 0.1],
                [0.2, 0.1, 0.1, 0.1, 0.5],
            ]),),
        )
        c = build_count_tensor(sample_series(spec, 400), 2)
        f = estimate_frequencies(c)
        got = zero_order_statistics(f, c)
        expect = direct_summation_zero_order(c)
        assert got[0] == pytest.approx(expect[0], abs=1e-10)
        assert got[1] == pytest.approx(expect[1], abs=1e-10)
        assert got[2] == expect[2]


class TestFirstOrderStatistics:
    def test_hand_case(self):
        c = build_count_tensor(series((0, 0, 0), (0, 0, 0), (1, 0, 1), (1, 0, 1)), 3)
        f = estimate_frequencies(c)
        lr1, q1, df1 = first_order_statistics(f, c)
        assert q1 == pytest.approx(2.0, abs=1e-12)
        assert lr1 == pytest.approx(8 * math.log(2), abs=1e-12)
        assert df1 == 1

    def test_exact_first_order_null_gives_zero(self):
        # p(j | h, i) == p(j | i): h has no effect
        s = []
        for h in (0, 1):
            for i in (0, 1):
                s += [(h, i, 0), (h, i, 1)]
        c = build_count_tensor(series(*s), 3)
        f = estimate_frequencies(c)
        lr1, q1, _df = first_order_statistics(f, c)
        assert lr1 == pytest.approx(0.0, abs=1e-12)
        assert q1 == pytest.approx(0.0, abs=1e-12)

    def test_df_arithmetic(self):
        # |A(t-2)|=3, |A(t-1)|=2, |A(t)|=4 -> df1 = 2*2*3 = 12
        s = [(h, i, j) for h in (0, 1, 2) for i in (0, 1) for j in (0, 1, 2, 3)]
        c = build_count_tensor(series(*s), 3)
        f = estimate_frequencies(c)
        assert first_order_statistics(f, c)[2] == 12


class TestMarkovPropertyTest:
    def test_hand_case_not_rejected(self):
        c = build_count_tensor(series((0, 0), (0, 0), (1, 1), (1, 1)), 2)
        report = markov_property_test(c, alpha1=0.05)
        # q0 = 2 < 3.841 at df = 1
        assert report.verdict_h0_0 == "not_rejected"
        assert report.verdict_h0_1 is None

    def test_first_order_chain_detected(self):
        space = StateSpace(1)
        diag = np.array([[0.8, 0.1, 0.1], [0.1, 0.8, 0.1], [0.1, 0.1, 0.8]])
        spec = ChainSpec(
            space, 3, 1, np.array([1 / 3, 1 / 3, 1 / 3]), seed=23,
            matrices=(diag, diag),
        )
        c = build_count_tensor(sample_series(spec, 10_000), 3)
        report = markov_property_test(c)
        assert report.verdicts["Q"] == ("rejected", "not_rejected")
        assert report.verdicts["LR"] == ("rejected", "not_rejected")

    def test_degenerate_support_untestable(self):
        c = build_count_tensor(series((0, 0), (0, 0)), 2)
        assert markov_property_test(c).verdict_h0_0 == "untestable"

    def test_no_rows_untestable(self):
        c = build_count_tensor([], 2)
        assert markov_property_test(c).verdict_h0_0 == "untestable"

    def test_alpha_validation(self):
        c = build_count_tensor(series((0, 0)), 2)
        with pytest.raises(ValueError):
            markov_property_test(c, alpha1=0.0)

    def test_statistics_agree_near_null(self):
        # LR and Q coincide to first order; their relative gap shrinks with
        # the size of the departure from independence. Use exact expected
        # counts so the comparison is deterministic.
        base = np.array([0.5, 0.3, 0.2])
        bump_dirs = np.array(
            [[2.0, -1.0, -1.0], [-1.0, 2.0, -1.0], [-1.0, -1.0, 2.0]]
        )
        gaps = []
        for eps in (0.05, 0.01, 0.002):
            joint = (base[None, :] + eps * bump_dirs) / 3.0
            n2 = {
                (i - 1, j - 1): 10_000.0 * joint[i, j]
                for i in range(3)
                for j in range(3)
            }
            c = CountTensor(2, n1={j: sum(v for (_, jj), v in n2.items() if jj == j)
                                   for j in (-1, 0, 1)}, n2=n2, n3={})
            f = estimate_frequencies(c)
            lr0, q0, _ = zero_order_statistics(f, c)
            gaps.append(abs(q0 - lr0) / q0)
        assert gaps[0] > gaps[1] > gaps[2]


class TestReporting:
    def test_report_roundtrips_to_dict(self):
        c = build_count_tensor(series((0, 0), (0, 0), (1, 1), (1, 1)), 2)
        d = markov_property_test(c).to_dict()
        assert d["t"] == 2 and d["df0"] == 1
        assert d["verdicts"]["Q"][0] == "not_rejected"

    def test_aggregate_shape(self):
        reports = [
            markov_property_test(build_count_tensor(series((0, 0), (0, 0), (1, 1), (1, 1)), 2))
        ]
        agg = aggregate_reports(reports)
        assert agg["total_stations"] == 1
        assert agg["statistics"]["Q"] == {"reject_h0_0": 0, "reject_h0_1": 0}
        assert agg["alpha1"] == 0.05
