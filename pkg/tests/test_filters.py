import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scadafs.errors import ConfigError, DegenerateLabelsError, InsufficientClassSupport
from scadafs.filters import (
    FeatureRanking,
    ReliefConfig,
    correlation_score,
    fisher_score,
    mutual_information_score,
    rank_features,
    read_rankings,
    relief_neighbors,
    relief_sample,
    relief_score,
    scale_for_relief,
    select_candidates,
    write_rankings,
)


def brute_fisher(X, y):
    """Direct double loop over features and classes."""
    out = []
    for j in range(len(X[0])):
        col = [row[j] for row in X]
        mu = sum(col) / len(col)
        num = den = 0.0
        for k in sorted(set(y)):
            vals = [c for c, lab in zip(col, y) if lab == k]
            m = sum(vals) / len(vals)
            var = sum((v - m) ** 2 for v in vals) / len(vals)
            num += len(vals) * (m - mu) ** 2
            den += len(vals) * var
        if den == 0:
            out.append(math.inf if num > 0 else 0.0)
        else:
            out.append(num / den)
    return out


def brute_relief(X, y):
    """Every instance visited; neighbours found by scanning all rows in index order."""
    n, p = len(X), len(X[0])
    lo = [min(r[j] for r in X) for j in range(p)]
    hi = [max(r[j] for r in X) for j in range(p)]
    Z = [[(r[j] - lo[j]) / (hi[j] - lo[j]) if hi[j] > lo[j] else 0.0 for j in range(p)] for r in X]
    scores = [0.0] * p
    neighbours = []
    for i in range(n):
        best = {True: (math.inf, -1), False: (math.inf, -1)}
        for j in range(n):
            if j == i:
                continue
            d = sum((a - b) ** 2 for a, b in zip(Z[i], Z[j]))
            same = y[j] == y[i]
            if d < best[same][0]:  # strict: the earlier row keeps a tie
                best[same] = (d, j)
        hit, miss = best[True][1], best[False][1]
        neighbours.append((hit, miss))
        for f in range(p):
            scores[f] += 0.5 * (abs(Z[i][f] - Z[miss][f]) - abs(Z[i][f] - Z[hit][f]))
    return scores, neighbours


def _two_class_labels(rng, n):
    y = rng.integers(0, 2, n)
    y[:2], y[2:4] = 0, 1
    return rng.permutation(y)


class TestFisher:
    def test_worked_example(self):
        r = fisher_score(np.array([[0.0], [2.0], [4.0], [6.0]]), [0, 0, 1, 1])
        assert r.scores[0] == 4.0

    def test_identical_constant_classes(self):
        assert fisher_score(np.full((4, 1), 3.0), [0, 0, 1, 1]).scores[0] == 0.0

    def test_separable_limit_ranks_first(self):
        X = np.array([[1.0, 0.0], [1.0, 2.0], [5.0, 4.0], [5.0, 6.0]])
        r = fisher_score(X, [0, 0, 1, 1])
        assert math.isinf(r.scores[0]) and r.scores[0] > 0
        assert r.order == ["f0", "f1"]

    def test_single_class(self):
        with pytest.raises(DegenerateLabelsError, match="degenerate labels"):
            fisher_score(np.ones((3, 2)), [1, 1, 1])

    def test_brute_force_oracle_100_instances(self):
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(100):
            n, p = int(rng.integers(4, 201)), int(rng.integers(1, 11))
            X = rng.normal(size=(n, p)) * rng.uniform(0.1, 10, p) + rng.normal(0, 5, p)
            y = _two_class_labels(rng, n)
            got = fisher_score(X, y).scores
            want = brute_fisher(X.tolist(), y.tolist())
            worst = max(worst, max(abs(g - w) / max(1.0, abs(w)) for g, w in zip(got, want)))
        assert worst <= 1e-9

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31), st.floats(-100, 100), st.floats(0.01, 100))
    def test_shift_and_scale_invariance(self, seed, shift, scale):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(30, 3))
        y = _two_class_labels(rng, 30)
        a = fisher_score(X, y).scores
        b = fisher_score(X * scale + shift, y).scores
        np.testing.assert_allclose(a, b, rtol=1e-7, atol=1e-12)

    def test_missing_cells_drop_out_per_feature(self):
        X = np.array([[0.0, 1.0], [2.0, np.nan], [4.0, 3.0], [6.0, 5.0], [np.nan, 4.0]])
        y = np.array([0, 0, 1, 1, 1])
        got = fisher_score(X, y).scores
        assert got[0] == brute_fisher([[0.0], [2.0], [4.0], [6.0]], [0, 0, 1, 1])[0]
        assert got[1] == pytest.approx(brute_fisher([[1.0], [3.0], [5.0], [4.0]], [0, 1, 1, 1])[0])


class TestRelief:
    def test_worked_example(self):
        X = np.array([[0.0], [0.1], [0.9], [1.0]])
        r = relief_score(X, [0, 0, 1, 1], ReliefConfig(n_samples=4))
        assert r.scores[0] == pytest.approx(1.5, abs=1e-12)

    def test_constant_feature(self):
        rng = np.random.default_rng(0)
        X = np.column_stack([rng.normal(size=20), np.full(20, 7.0)])
        r = relief_score(X, _two_class_labels(rng, 20), ReliefConfig(n_samples=20))
        assert r.scores[1] == 0.0

    def test_class_support(self):
        with pytest.raises(InsufficientClassSupport, match="insufficient class support"):
            relief_score(np.ones((4, 1)), [0, 0, 0, 1])
        with pytest.raises(InsufficientClassSupport):
            relief_score(np.ones((4, 1)), [0, 0, 0, 0])

    def test_exhaustive_oracle_100_instances(self):
        rng = np.random.default_rng(99)
        for trial in range(100):
            n, p = int(rng.integers(4, 41)), int(rng.integers(1, 6))
            if trial % 2:
                # dyadic grid: exact distances, so index tie-breaks are exercised
                X = rng.integers(0, 9, size=(n, p)).astype(float)
                X[0], X[1] = 0.0, 8.0
            else:
                X = rng.normal(size=(n, p)) * rng.uniform(0.5, 20, p)
            y = _two_class_labels(rng, n)
            r = relief_score(X, y, ReliefConfig(n_samples=n, seed=trial))
            want, pairs = brute_relief(X.tolist(), y.tolist())
            hits, misses = relief_neighbors(scale_for_relief(X), y, np.arange(n))
            assert list(zip(hits.tolist(), misses.tolist())) == pairs
            np.testing.assert_allclose(r.scores, want, rtol=0, atol=1e-12)

    def test_sample_covers_all_rows_when_m_is_n(self):
        y = np.array([0, 1, 0, 1, 0])
        assert relief_sample(y, ReliefConfig(n_samples=5)).tolist() == [0, 1, 2, 3, 4]
        assert relief_sample(y, ReliefConfig(n_samples=50)).tolist() == [0, 1, 2, 3, 4]

    def test_stratified_sample_reaches_rare_class(self):
        y = np.zeros(5000, dtype=int)
        y[[10, 2000, 4000]] = 1
        s = relief_sample(y, ReliefConfig(n_samples=20, sampling="stratified", seed=3))
        assert len(s) == 20 and (y[s] == 1).sum() >= 1
        assert len(set(s.tolist())) == 20

    def test_independent_feature_near_zero(self):
        worst = 0.0
        for seed in range(30):
            rng = np.random.default_rng(seed)
            X = rng.normal(size=(60, 1))
            y = _two_class_labels(rng, 60)
            r = relief_score(X, y, ReliefConfig(n_samples=60)).scores[0]
            worst = max(worst, abs(r) / 60)  # per visited instance
        assert worst < 0.1

    def test_informative_feature_beats_noise(self):
        rng = np.random.default_rng(5)
        y = _two_class_labels(rng, 200)
        X = np.column_stack([y + 0.2 * rng.normal(size=200), rng.normal(size=200)])
        r = relief_score(X, y, ReliefConfig(n_samples=200))
        assert r.order == ["f0", "f1"]

    def test_seeded_sampling_is_deterministic(self):
        rng = np.random.default_rng(1)
        X, y = rng.normal(size=(300, 4)), _two_class_labels(rng, 300)
        a = relief_score(X, y, ReliefConfig(n_samples=40, seed=8)).scores
        b = relief_score(X, y, ReliefConfig(n_samples=40, seed=8)).scores
        assert a.tobytes() == b.tobytes()


class TestMutualInformation:
    @pytest.mark.parametrize("p", [0.5, 0.1, 0.01])
    def test_feature_equal_to_label(self, p):
        n = 1000
        y = np.zeros(n, dtype=int)
        y[: int(p * n)] = 1
        mi = mutual_information_score(y[:, None].astype(float), y).scores[0]
        assert mi == pytest.approx(-p * math.log(p) - (1 - p) * math.log(1 - p), abs=1e-12)

    def test_balanced_is_ln2(self):
        y = np.array([0, 1] * 50)
        assert mutual_information_score(y[:, None].astype(float), y).scores[0] == pytest.approx(math.log(2))

    def test_constant_is_zero(self):
        assert mutual_information_score(np.ones((10, 1)), [0, 1] * 5).scores[0] == 0.0

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31), st.integers(4, 100))
    def test_non_negative(self, seed, n):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(n, 3))
        X[rng.random(X.shape) < 0.1] = np.nan
        assert (mutual_information_score(X, _two_class_labels(rng, n)).scores >= 0).all()


class TestCorrelation:
    def test_equal_to_label(self):
        y = np.array([0, 1, 1, 0, 1])
        assert correlation_score(y[:, None].astype(float), y).scores[0] == pytest.approx(1.0)

    def test_constant(self):
        assert correlation_score(np.ones((5, 1)), [0, 1, 1, 0, 1]).scores[0] == 0.0

    def test_decreasing_in_noise(self):
        means = []
        for scale in (0.5, 1.0, 2.0, 4.0):
            vals = []
            for seed in range(20):
                rng = np.random.default_rng(seed)
                y = rng.integers(0, 2, 500)
                vals.append(correlation_score((y + scale * rng.normal(size=500))[:, None], y).scores[0])
            means.append(np.mean(vals))
            assert 0 < min(vals) and max(vals) < 1
        assert means == sorted(means, reverse=True)


class TestRankingsAndCandidates:
    def test_order_tie_breaks_by_catalog_index(self):
        r = FeatureRanking("fisher", ["a", "b", "c", "d"], [1.0, 3.0, 1.0, math.inf])
        assert r.order == ["d", "b", "a", "c"]

    def test_identical_rankings(self):
        r = FeatureRanking("fisher", list("abcdefgh"), np.arange(8.0))
        assert len(select_candidates([r, r], 5)) == 5

    def test_disjoint_rankings(self):
        ids = [f"f{i}" for i in range(10)]
        a = FeatureRanking("fisher", ids, [10 - i for i in range(10)])
        b = FeatureRanking("relief", ids, list(range(10)))
        out = select_candidates([a, b], 5)
        assert len(out) == 10
        # best rank first, catalog order within a rank
        assert out[:2] == ["f0", "f9"]

    def test_k_clamped_with_warning(self, caplog):
        r = FeatureRanking("fisher", ["a", "b"], [1.0, 2.0])
        with caplog.at_level(logging.WARNING):
            assert select_candidates([r], 15) == ["b", "a"]
        assert "clamped" in caplog.text

    def test_unknown_method(self):
        with pytest.raises(ConfigError):
            rank_features(np.ones((4, 1)), [0, 0, 1, 1], "chi2")

    def test_rankings_round_trip(self, tmp_path):
        rs = [
            FeatureRanking("fisher", ["a", "b", "c"], [0.1, math.inf, 1 / 3]),
            FeatureRanking("relief", ["a", "b", "c"], [-0.5, 2.0, 2.0]),
        ]
        write_rankings(rs, tmp_path / "r.tsv", comment="x")
        back = read_rankings(tmp_path / "r.tsv")
        for r, b in zip(rs, back):
            assert r.method == b.method and r.order == b.order
            assert r.as_dict() == b.as_dict()
