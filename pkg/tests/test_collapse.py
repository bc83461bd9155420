import numpy as np
import pytest

from hierkit.collapse import (ClassStats, ClassifierHead, class_statistics,
                              lift_to_superclass, nc1, nc2_metrics,
                              nc3_self_duality, nc4_mismatch, nc_report,
                              nearest_mean_labels)
from hierkit.labelspace import LabelSpace
from hierkit.manifold import FeatureSet
from hierkit.synth import gen_etf


def _stats(class_means, global_mean=None, counts=None, sigma_w=None, sigma_b=None):
    m = np.asarray(class_means, dtype=float)
    c, p = m.shape
    if global_mean is None:
        global_mean = m.mean(axis=0)
    if counts is None:
        counts = np.ones(c, dtype=int)
    if sigma_w is None:
        sigma_w = np.zeros((p, p))
    if sigma_b is None:
        dev = m - global_mean
        sigma_b = dev.T @ dev / c
    return ClassStats(global_mean=global_mean, class_means=m, counts=counts,
                      sigma_w=sigma_w, sigma_b=sigma_b)


def _random_setup(seed, n_per=20, c=6, p=10):
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(c), n_per)
    means = rng.standard_normal((c, p)) * 3
    x = means[labels] + rng.standard_normal((labels.size, p))
    f = FeatureSet(x, labels, c)
    head = ClassifierHead(weights=rng.standard_normal((c, p)),
                          bias=rng.standard_normal(c))
    return f, head


class TestClassStatistics:
    def test_identical_examples_zero_scatter(self):
        f = FeatureSet(np.ones((6, 3)), np.repeat([0, 1], 3), 2)
        st = class_statistics(f)
        assert not st.sigma_w.any()
        assert not st.sigma_b.any()
        np.testing.assert_array_equal(st.counts, [3, 3])

    def test_plus_minus_one_between_scatter(self):
        f = FeatureSet(np.array([[-1.0], [-1.0], [1.0], [1.0]]),
                       np.array([0, 0, 1, 1]), 2)
        st = class_statistics(f)
        np.testing.assert_allclose(st.sigma_b, [[1.0]])
        np.testing.assert_allclose(st.sigma_w, [[0.0]])
        np.testing.assert_allclose(st.class_means, [[-1.0], [1.0]])
        np.testing.assert_allclose(st.global_mean, [0.0])

    def test_within_scatter_hand_value(self):
        # class 0 at -1 and 1 around mean 0: per-example deviation 1
        f = FeatureSet(np.array([[-1.0], [1.0], [5.0]]), np.array([0, 0, 1]), 2)
        st = class_statistics(f)
        np.testing.assert_allclose(st.sigma_w, [[2.0 / 3.0]])

    def test_duplication_invariance(self):
        f, _ = _random_setup(0)
        doubled = FeatureSet(np.vstack([f.vectors, f.vectors]),
                             np.concatenate([f.labels, f.labels]), f.class_count)
        a, b = class_statistics(f), class_statistics(doubled)
        np.testing.assert_allclose(a.class_means, b.class_means, atol=1e-12)
        np.testing.assert_allclose(a.sigma_w, b.sigma_w, atol=1e-12)
        np.testing.assert_allclose(a.sigma_b, b.sigma_b, atol=1e-12)

    def test_empty_class_rejected(self):
        f = FeatureSet(np.zeros((2, 1)), np.array([0, 1]), 3)
        with pytest.raises(ValueError, match="class 2 has no examples"):
            class_statistics(f)

    def test_scatter_symmetry_enforced(self):
        with pytest.raises(ValueError, match="not symmetric"):
            ClassStats(global_mean=np.zeros(2), class_means=np.zeros((2, 2)),
                       counts=[1, 1], sigma_w=np.array([[0.0, 1.0], [0.0, 0.0]]),
                       sigma_b=np.zeros((2, 2)))


class TestNc1:
    def test_zero_within_scatter(self):
        st = _stats([[-1.0], [1.0]], sigma_w=np.zeros((1, 1)))
        assert nc1(st) == 0.0

    def test_hand_value(self):
        st = _stats([[-1.0], [1.0]], sigma_w=np.array([[1.0]]),
                    sigma_b=np.array([[2.0]]))
        assert nc1(st) == pytest.approx(0.25)

    def test_scale_invariance(self):
        f, _ = _random_setup(1)
        a = nc1(class_statistics(f))
        g = FeatureSet(f.vectors * 7.5, f.labels, f.class_count)
        b = nc1(class_statistics(g))
        assert a == pytest.approx(b, rel=1e-9)

    def test_zero_between_scatter_pinv(self):
        st = _stats([[1.0], [1.0]], global_mean=np.array([1.0]),
                    sigma_w=np.array([[3.0]]), sigma_b=np.zeros((1, 1)))
        assert nc1(st) == 0.0

    def test_explicit_class_count(self):
        st = _stats([[-1.0], [1.0]], sigma_w=np.array([[1.0]]),
                    sigma_b=np.array([[2.0]]))
        assert nc1(st, c_count=4) == pytest.approx(0.125)


class TestNc2:
    def test_etf_is_perfectly_regular(self):
        for c in (2, 5, 16):
            means = gen_etf(c, dim=c + 3)
            st = _stats(means, global_mean=np.zeros(c + 3))
            head = ClassifierHead(weights=means, bias=np.zeros(c))
            n2 = nc2_metrics(st, head)
            assert abs(n2.beta_mu) < 1e-12
            assert abs(n2.alpha_mu) < 1e-12
            assert abs(n2.beta_w) < 1e-12
            assert abs(n2.alpha_w) < 1e-12

    def test_hand_values(self):
        st = _stats([[1.0, 0.0], [0.0, 2.0]], global_mean=np.zeros(2))
        head = ClassifierHead(weights=np.array([[1.0, 0.0], [0.0, 2.0]]),
                              bias=np.zeros(2))
        n2 = nc2_metrics(st, head)
        # norms 1 and 2: popstd 0.5, mean 1.5
        assert n2.beta_mu == pytest.approx(1.0 / 3.0)
        assert n2.alpha_mu == 0.0
        assert n2.beta_w == pytest.approx(1.0 / 3.0)

    def test_scaled_weights_match_mean_stats(self):
        f, _ = _random_setup(2)
        st = class_statistics(f)
        head = ClassifierHead(weights=3.7 * (st.class_means - st.global_mean),
                              bias=np.zeros(st.class_count))
        n2 = nc2_metrics(st, head)
        assert n2.beta_w == pytest.approx(n2.beta_mu, rel=1e-12)
        assert n2.alpha_w == pytest.approx(n2.alpha_mu, rel=1e-12)

    def test_zero_centered_mean_rejected(self):
        st = _stats([[1.0, 1.0], [1.0, 1.0]])
        head = ClassifierHead(weights=np.eye(2), bias=np.zeros(2))
        with pytest.raises(ValueError, match="zero-length centered class mean"):
            nc2_metrics(st, head)

    def test_head_size_mismatch_rejected(self):
        st = _stats([[1.0], [-1.0]])
        head = ClassifierHead(weights=np.ones((3, 1)), bias=np.zeros(3))
        with pytest.raises(ValueError, match="does not match"):
            nc2_metrics(st, head)


class TestNc3:
    def test_proportional_weights_give_zero(self):
        f, _ = _random_setup(3)
        st = class_statistics(f)
        head = ClassifierHead(weights=2.5 * (st.class_means - st.global_mean),
                              bias=np.zeros(st.class_count))
        assert nc3_self_duality(st, head) == pytest.approx(0.0, abs=1e-12)

    def test_anti_aligned_weights_give_two(self):
        f, _ = _random_setup(4)
        st = class_statistics(f)
        head = ClassifierHead(weights=-(st.class_means - st.global_mean),
                              bias=np.zeros(st.class_count))
        assert nc3_self_duality(st, head) == pytest.approx(2.0, abs=1e-12)

    def test_orthogonal_hand_value(self):
        st = _stats([[0.0, 1.0]], global_mean=np.zeros(2))
        head = ClassifierHead(weights=np.array([[1.0, 0.0]]), bias=np.zeros(1))
        assert nc3_self_duality(st, head) == pytest.approx(np.sqrt(2.0))

    def test_zero_weights_rejected(self):
        st = _stats([[0.0, 1.0]], global_mean=np.zeros(2))
        head = ClassifierHead(weights=np.zeros((1, 2)), bias=np.zeros(1))
        with pytest.raises(ValueError, match="nc3 undefined"):
            nc3_self_duality(st, head)


class TestNc4:
    def test_dual_head_agrees_with_ncc(self):
        f, _ = _random_setup(5)
        st = class_statistics(f)
        head = ClassifierHead(weights=st.class_means,
                              bias=-0.5 * (st.class_means ** 2).sum(axis=1))
        assert nc4_mismatch(f, st, head) == 0.0

    def test_hand_disagreement(self):
        st = _stats([[0.0], [1.0]], counts=[1, 1])
        head = ClassifierHead(weights=np.array([[0.0], [10.0]]),
                              bias=np.array([0.0, -9.0]))
        # at h=0.85 the linear rule says class 0, NCC says class 1
        f = FeatureSet(np.array([[0.85]]), np.array([0]), 2)
        assert nc4_mismatch(f, st, head) == 1.0

    def test_ties_break_low_in_both_rules(self):
        st = _stats([[0.0], [1.0]])
        head = ClassifierHead(weights=np.array([[1.0], [1.0]]),
                              bias=np.zeros(2))
        f = FeatureSet(np.array([[0.5]]), np.array([1]), 2)
        assert nearest_mean_labels(f, st)[0] == 0
        assert nc4_mismatch(f, st, head) == 0.0

    def test_labels_ignored(self):
        f, head = _random_setup(6)
        st = class_statistics(f)
        relabeled = FeatureSet(f.vectors, np.zeros_like(f.labels), f.class_count)
        assert nc4_mismatch(f, st, head) == nc4_mismatch(relabeled, st, head)


class TestLift:
    def _space(self, groups, name="s"):
        return LabelSpace(name=name, superclasses=[(f"g{i}", frozenset(m))
                                                   for i, m in enumerate(groups)])

    def test_singleton_lift_is_identity(self):
        f, head = _random_setup(7, c=4)
        st = class_statistics(f)
        s = self._space([[0], [1], [2], [3]])
        lifted, lhead = lift_to_superclass(st, head, s)
        np.testing.assert_allclose(lifted.class_means, st.class_means, atol=1e-12)
        np.testing.assert_allclose(lifted.sigma_w, st.sigma_w, atol=1e-12)
        np.testing.assert_allclose(lifted.sigma_b, st.sigma_b, atol=1e-12)
        np.testing.assert_array_equal(lifted.counts, st.counts)
        np.testing.assert_allclose(lhead.weights, head.weights, atol=1e-12)
        np.testing.assert_allclose(lhead.bias, head.bias, atol=1e-12)

    def test_merged_mean_is_unweighted(self):
        # counts 1 and 3 but the superclass mean ignores the imbalance
        x = np.array([[0.0, 0.0], [2.0, 2.0], [2.0, 2.0], [2.0, 2.0]])
        f = FeatureSet(x, np.array([0, 1, 1, 1]), 2)
        st = class_statistics(f)
        lifted, _ = lift_to_superclass(st, None, self._space([[0, 1]]))
        np.testing.assert_allclose(lifted.class_means, [[1.0, 1.0]])
        np.testing.assert_array_equal(lifted.counts, [4])

    def test_full_merge_absorbs_between_scatter(self):
        rng = np.random.default_rng(8)
        x = rng.standard_normal((40, 3))
        # symmetric labels with equal counts keep the merged mean global
        labels = np.repeat([0, 1], 20)
        x[20:] += 2.0
        f = FeatureSet(np.vstack([x, -x]), np.concatenate([labels, labels[::-1]]), 2)
        st = class_statistics(f)
        lifted, _ = lift_to_superclass(st, None, self._space([[0, 1]]))
        np.testing.assert_allclose(lifted.sigma_b, 0.0, atol=1e-12)
        dev = f.vectors - f.vectors.mean(axis=0)
        total = dev.T @ dev / len(f)
        np.testing.assert_allclose(lifted.sigma_w, total, atol=1e-10)

    def test_head_rows_averaged(self):
        st = _stats([[0.0], [1.0], [4.0]])
        head = ClassifierHead(weights=np.array([[1.0], [3.0], [10.0]]),
                              bias=np.array([0.0, 2.0, 7.0]))
        _, lhead = lift_to_superclass(st, head, self._space([[0, 1], [2]]))
        np.testing.assert_allclose(lhead.weights, [[2.0], [10.0]])
        np.testing.assert_allclose(lhead.bias, [1.0, 7.0])

    def test_sigma_w_gains_offset_term(self):
        f, _ = _random_setup(9, c=4)
        st = class_statistics(f)
        s = self._space([[0, 1], [2, 3]])
        lifted, _ = lift_to_superclass(st, None, s)
        table = s.mapping()
        means_s = np.stack([st.class_means[:2].mean(axis=0),
                            st.class_means[2:].mean(axis=0)])
        dev = st.class_means - means_s[table]
        w = st.counts / st.counts.sum()
        expected = st.sigma_w + (dev * w[:, None]).T @ dev
        np.testing.assert_allclose(lifted.sigma_w, expected, atol=1e-12)

    def test_partition_mismatch_rejected(self):
        st = _stats([[0.0], [1.0], [2.0]])
        with pytest.raises(ValueError, match="partition mismatch"):
            lift_to_superclass(st, None, self._space([[0, 1]]))

    def test_lifted_nc1_differs_between_spaces(self):
        # hypernym-aligned geometry: superclass spread dwarfs class spread
        rng = np.random.default_rng(10)
        anchors = np.array([[10.0, 0.0], [-10.0, 0.0]])
        offsets = np.array([[0.0, 0.4], [0.0, -0.4]])
        labels = np.repeat(np.arange(4), 50)
        x = anchors[labels // 2] + offsets[labels % 2] + 0.2 * rng.standard_normal((200, 2))
        f = FeatureSet(x, labels, 4)
        st = class_statistics(f)
        s = self._space([[0, 1], [2, 3]])
        lifted, _ = lift_to_superclass(st, None, s)
        assert nc1(lifted) < nc1(st)


class TestNcReport:
    def test_matches_direct_calls(self):
        f, head = _random_setup(11)
        rep = nc_report(f, head)
        st = class_statistics(f)
        assert rep.nc1 == nc1(st)
        n2 = nc2_metrics(st, head)
        assert (rep.beta_mu, rep.beta_w, rep.alpha_mu, rep.alpha_w) == tuple(
            [n2.beta_mu, n2.beta_w, n2.alpha_mu, n2.alpha_w])
        assert rep.nc3 == nc3_self_duality(st, head)
        assert rep.nc4_mismatch == nc4_mismatch(f, st, head)
        assert rep.label_space_name == "hyponyms"
        assert rep.degenerate_flags == ()

    def test_degenerate_snapshot_flagged(self):
        f = FeatureSet(np.ones((4, 2)), np.array([0, 0, 1, 1]), 2)
        head = ClassifierHead(weights=np.eye(2), bias=np.zeros(2))
        rep = nc_report(f, head, label_space_name="x")
        assert rep.nc1 == 0.0 and rep.nc3 == 0.0
        assert (rep.beta_mu, rep.beta_w, rep.alpha_mu, rep.alpha_w) == (0, 0, 0, 0)
        assert "sigma_b_zero" in rep.degenerate_flags
        assert any(fl.startswith("nc2_degenerate:") for fl in rep.degenerate_flags)
        assert any(fl.startswith("nc3_degenerate:") for fl in rep.degenerate_flags)
        assert rep.label_space_name == "x"

    def test_lifted_report_uses_raw_features(self):
        f, head = _random_setup(12, c=4)
        st = class_statistics(f)
        s = LabelSpace(name="pairs", superclasses=[("a", frozenset({0, 1})),
                                                   ("b", frozenset({2, 3}))])
        lifted, lhead = lift_to_superclass(st, head, s)
        rep = nc_report(f, lhead, label_space_name="pairs", stats=lifted)
        assert rep.nc1 == nc1(lifted)
        assert rep.nc4_mismatch == nc4_mismatch(f, lifted, lhead)


class TestRotationInvariance:
    def test_all_statistics_invariant(self):
        f, head = _random_setup(13)
        q, _ = np.linalg.qr(np.random.default_rng(14).standard_normal((10, 10)))
        rot_f = FeatureSet(f.vectors @ q.T, f.labels, f.class_count)
        rot_head = ClassifierHead(weights=head.weights @ q.T, bias=head.bias)
        a = nc_report(f, head)
        b = nc_report(rot_f, rot_head)
        for field in ("nc1", "beta_mu", "beta_w", "alpha_mu", "alpha_w",
                      "nc3", "nc4_mismatch"):
            assert abs(getattr(a, field) - getattr(b, field)) < 1e-9, field
