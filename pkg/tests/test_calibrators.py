"""Tests for the three scoring heads and their shared output contract."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from openset.calibrators import (
    MetaMaxCalibrator,
    OpenMaxCalibrator,
    build_metamax_models,
    build_openmax_models,
    metamax_predict,
    openmax_predict,
    softmax_predict,
)
from openset.data import ActivationSet
from openset.errors import DimensionMismatch, InsufficientData, ValidationError
from openset.weibull import WeibullModel, fit_high


def _softmax(values):
    zmax = max(values)
    exps = [math.exp(v - zmax) for v in values]
    total = sum(exps)
    return [e / total for e in exps]


def _set(rows, labels, k):
    return ActivationSet(
        np.asarray(rows, dtype=np.float32), np.asarray(labels, dtype=np.int32), k
    )


def _flat_model(lam=2.0):
    return WeibullModel(rho=0.0, kappa=1.0, lam=lam, tail_size=4)


def _metamax(k=3, beta=None, lam=2.0, apply_translation=False):
    return MetaMaxCalibrator(
        class_models=tuple(_flat_model(lam) for _ in range(k)),
        q=4,
        beta=k if beta is None else beta,
        apply_translation=apply_translation,
    )


activation_vectors = st.lists(
    st.floats(-30, 30, allow_nan=False), min_size=2, max_size=8
)


class TestBuildMetamax:
    def test_column_removal_pooling(self):
        # Class 0 contributes rows [[5,1,2],[4,0,1]]; with column 0 removed
        # the pooled non-match scores are exactly [1, 2, 0, 1].
        rows = [
            [5, 1, 2], [4, 0, 1],
            [0, 6, 1], [1, 5, 2], [0, 7, 3],
            [1, 0, 4], [2, 1, 9], [0, 2, 5],
        ]
        labels = [0, 0, 1, 1, 1, 2, 2, 2]
        cal = build_metamax_models(_set(rows, labels, 3), q=4)
        assert cal.class_models[0] == fit_high([1.0, 2.0, 0.0, 1.0], 4)
        assert cal.beta == 3
        assert cal.build_counts == (2, 3, 3)
        assert all(m.tail_size == 4 for m in cal.class_models)

    def test_insufficient_pooled_scores(self):
        rows = [[3, 1], [0, 2], [1, 4]]
        with pytest.raises(InsufficientData, match="class 0"):
            build_metamax_models(_set(rows, [0, 1, 1], 2), q=2)

    def test_misclassified_rows_excluded(self):
        # The second class-0 row argmaxes at column 1, so only the first
        # contributes to the pool; q = 3 then exceeds the pool size 2.
        rows = [[5, 1, 2], [1, 6, 2], [0, 6, 1], [1, 5, 2], [1, 0, 4], [2, 1, 9]]
        labels = [0, 0, 1, 1, 2, 2]
        with pytest.raises(InsufficientData, match="class 0"):
            build_metamax_models(_set(rows, labels, 3), q=3)

    def test_beta_out_of_range(self):
        with pytest.raises(ValidationError):
            _metamax(k=3, beta=4)
        with pytest.raises(ValidationError):
            _metamax(k=3, beta=-1)

    def test_dict_round_trip(self):
        rows = np.tile([[9, 1, 0], [0, 8, 1], [1, 0, 7]], (4, 1))
        labels = [0, 1, 2] * 4
        cal = build_metamax_models(_set(rows + np.arange(12)[:, None] * 0.01, labels, 3), q=5)
        assert MetaMaxCalibrator.from_dict(cal.to_dict()) == cal


class TestMetamaxPredict:
    def test_two_class_no_op_ranks(self):
        # Rank 1 is the argmax (skipped) and rank 2 carries weight 0, so the
        # output reduces to softmax([3, 1, 0]).
        out = metamax_predict(_metamax(k=2), [3.0, 1.0])
        assert np.allclose(out.revised_activations, [3.0, 1.0])
        assert out.unknown_activation == 0.0
        assert out.probabilities == pytest.approx(_softmax([3.0, 1.0, 0.0]), abs=1e-12)
        assert out.predicted == 0 and not out.rejected

    def test_trace_fixture(self):
        # K=3, beta=3, a=[3,2,1], every class model (rho=0, kappa=1, lam=2)
        # without translation: only rank 2 (class 1) is dampened, by
        # (1/3) * exp(-1).
        out = metamax_predict(_metamax(k=3), [3.0, 2.0, 1.0])
        m = out.revised_activations / np.array([3.0, 2.0, 1.0])
        assert m == pytest.approx([1.0, 1.0 - math.exp(-1.0) / 3.0, 1.0], abs=1e-9)
        assert out.unknown_activation == pytest.approx(2.0 * math.exp(-1.0) / 3.0, abs=1e-9)
        assert out.probabilities == pytest.approx(
            [0.6726, 0.1936, 0.0910, 0.0428], abs=1e-4
        )
        assert out.predicted == 0 and not out.rejected

    def test_beta_zero_reduces_to_softmax(self):
        a = [1.3, -0.2, 4.0, 0.5]
        out = metamax_predict(_metamax(k=4, beta=0), a)
        assert out.unknown_activation == 0.0
        assert out.probabilities == pytest.approx(_softmax(a + [0.0]), abs=1e-12)

    @given(a=activation_vectors)
    @settings(max_examples=100, deadline=None)
    def test_modulation_bounds_and_argmax_skip(self, a):
        k = len(a)
        cal = _metamax(k=k, lam=1.0)
        out = metamax_predict(cal, a)
        arr = np.asarray(a, dtype=float)
        argmax = int(np.argmax(arr))
        # The winning activation passes through unmodulated.
        assert out.revised_activations[argmax] == arr[argmax]
        with np.errstate(invalid="ignore", divide="ignore"):
            m = np.where(arr != 0.0, out.revised_activations / arr, 1.0)
        beta = cal.beta
        assert np.all(m >= 1.0 - (beta - 1) / beta - 1e-12)
        assert np.all(m <= 1.0 + 1e-12)
        if np.all(arr >= 0.0):
            assert out.unknown_activation >= -1e-12

    def test_monotone_dampening(self):
        # Lowering a visited non-argmax activation raises its survival and
        # lowers its modulation weight.
        cal = _metamax(k=3)
        a_hi = metamax_predict(cal, [5.0, 3.0, 0.0])
        a_lo = metamax_predict(cal, [5.0, 1.0, 0.0])
        m_hi = a_hi.revised_activations[1] / 3.0
        m_lo = a_lo.revised_activations[1] / 1.0
        assert m_lo < m_hi

    def test_tie_break_by_ascending_index(self):
        # Equal activations rank by class index: index 0 wins and is
        # skipped, index 1 is visited at rank 2.
        out = metamax_predict(_metamax(k=3), [2.0, 2.0, 0.0])
        assert out.revised_activations[0] == 2.0
        assert out.revised_activations[1] < 2.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            metamax_predict(_metamax(k=3), [1.0, 2.0])

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(5)
        rows = np.vstack(
            [rng.normal(0, 1, (30, 3)) + 8.0 * np.eye(3)[j] for j in range(3)]
        )
        labels = np.repeat([0, 1, 2], 30)
        base = _set(rows, labels, 3)
        cal = build_metamax_models(base, q=10)
        perm = [2, 0, 1]  # new index -> old index
        relabel = {old: new for new, old in enumerate(perm)}
        permuted = _set(rows[:, perm], [relabel[int(l)] for l in labels], 3)
        cal_p = build_metamax_models(permuted, q=10)
        a = np.array([7.5, 1.0, -0.5])
        out = metamax_predict(cal, a)
        out_p = metamax_predict(cal_p, a[perm])
        assert out_p.probabilities[:-1] == pytest.approx(
            out.probabilities[:-1][perm], abs=1e-12
        )
        assert out_p.probabilities[-1] == pytest.approx(out.probabilities[-1], abs=1e-12)


class TestBuildOpenmax:
    def test_symmetric_cluster_degenerates(self):
        from openset.errors import DegenerateData

        rows = [[1, 0], [3, 0], [0, 5], [0, 6], [1, 7]]
        labels = [0, 0, 1, 1, 1]
        with pytest.raises(DegenerateData):
            build_openmax_models(_set(rows, labels, 2), eta=2)

    def test_mav_and_distance_tail(self):
        # Class 0 rows [[7,0],[7,4],[10,0]] give MAV [8, 4/3]; the deviations
        # are (-1,-4/3), (-1,8/3), (2,-4/3), so the euclidean distances are
        # [5/3, sqrt(73)/3, sqrt(52)/3]. With eta=3 the Weibull tail is
        # exactly that distance set.
        rows = [[7, 0], [7, 4], [10, 0], [0, 9], [1, 10], [2, 11]]
        labels = [0, 0, 0, 1, 1, 1]
        cal = build_openmax_models(_set(rows, labels, 2), eta=3)
        assert cal.mavs[0] == pytest.approx([8.0, 4.0 / 3.0], abs=1e-6)
        dists = [5.0 / 3.0, math.sqrt(73.0) / 3.0, math.sqrt(52.0) / 3.0]
        expected = fit_high(dists, 3)
        got = cal.class_models[0]
        assert got.kappa == pytest.approx(expected.kappa, rel=1e-6)
        assert got.lam == pytest.approx(expected.lam, rel=1e-6)

    def test_insufficient_rows(self):
        rows = [[5, 0], [0, 4], [1, 6]]
        with pytest.raises(InsufficientData, match="class 0"):
            build_openmax_models(_set(rows, [0, 1, 1], 2), eta=2)

    def test_alpha_defaults_and_validation(self):
        with pytest.raises(ValidationError):
            OpenMaxCalibrator(
                mavs=np.zeros((2, 2)),
                class_models=(_flat_model(), _flat_model()),
                alpha=3,
                eta=2,
            )
        with pytest.raises(ValidationError):
            build_openmax_models(
                _set([[1, 0], [0, 1]], [0, 1], 2), eta=2, distance_kind="manhattan"
            )

    def test_dict_round_trip(self):
        rng = np.random.default_rng(11)
        rows = np.vstack(
            [rng.normal(0, 0.5, (20, 2)) + 6.0 * np.eye(2)[j] for j in range(2)]
        )
        labels = np.repeat([0, 1], 20)
        cal = build_openmax_models(_set(rows, labels, 2), eta=8)
        back = OpenMaxCalibrator.from_dict(cal.to_dict())
        assert np.allclose(back.mavs, cal.mavs)
        assert back.class_models == cal.class_models
        assert back.distance_scales == cal.distance_scales


class TestOpenmaxPredict:
    def _manual(self, alpha=1, lam=2.0, kind="euclidean"):
        return OpenMaxCalibrator(
            mavs=np.array([[0.0, 0.0], [4.0, 0.0]]),
            class_models=(_flat_model(lam), _flat_model(lam)),
            alpha=alpha,
            eta=4,
            distance_kind=kind,
            distance_scales=(1.0, 1.0),
        )

    def test_weight_formula(self):
        # a = [3, 0]: argmax class 0, distance to MAV_0 is 3, alpha=1 gives
        # weight 1, so omega_0 = 1 - cdf(3) = exp(-1.5).
        out = openmax_predict(self._manual(), [3.0, 0.0])
        omega0 = out.revised_activations[0] / 3.0
        assert omega0 == pytest.approx(math.exp(-1.5), abs=1e-12)
        assert out.unknown_activation == pytest.approx(3.0 * (1.0 - math.exp(-1.5)), abs=1e-12)
        assert out.probabilities == pytest.approx(
            _softmax([3.0 * math.exp(-1.5), 0.0, 3.0 * (1.0 - math.exp(-1.5))]), abs=1e-12
        )

    def test_argmax_is_revised_not_skipped(self):
        # Unlike the non-match head, rank 1 carries the full weight here.
        out = openmax_predict(self._manual(alpha=2), [3.0, 0.0])
        assert out.revised_activations[0] < 3.0

    def test_query_at_mav_passes_through(self):
        out = openmax_predict(self._manual(alpha=2), [0.0, 0.0])
        # Distance to MAV_0 is zero -> cdf 0 -> omega 1 at rank for class 0;
        # class 1 is 4 away with cdf 1 - e^-2 but its activation is 0, so the
        # unknown logit stays 0.
        assert out.unknown_activation == 0.0
        assert out.probabilities == pytest.approx(_softmax([0.0, 0.0, 0.0]), abs=1e-12)
        assert out.predicted == 0 and not out.rejected

    def test_cosine_distance_kind(self):
        cal = OpenMaxCalibrator(
            mavs=np.array([[1.0, 0.0], [0.0, 1.0]]),
            class_models=(_flat_model(0.5), _flat_model(0.5)),
            alpha=1,
            eta=4,
            distance_kind="cosine",
            distance_scales=(1.0, 1.0),
        )
        out = openmax_predict(cal, [2.0, 0.0])
        # Query is parallel to MAV_0: cosine distance 0, no revision at all.
        assert out.unknown_activation == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            openmax_predict(self._manual(), [1.0, 2.0, 3.0])


class TestSoftmaxPredict:
    def test_uniform(self):
        out = softmax_predict([0.0, 0.0, 0.0], 0.0)
        assert out.probabilities == pytest.approx([1 / 3, 1 / 3, 1 / 3, 0.0], abs=1e-12)
        assert not out.rejected

    def test_spec_values(self):
        out = softmax_predict([2.0, 1.0, 1.0], 0.0)
        assert out.probabilities[:3] == pytest.approx(
            [0.5761, 0.2119, 0.2119], abs=1e-4
        )
        assert out.probabilities[3] == 0.0

    def test_large_logits_stable(self):
        out = softmax_predict([1000.0, 0.0], 0.0)
        assert np.all(np.isfinite(out.probabilities))
        assert out.probabilities[0] == pytest.approx(1.0, abs=1e-12)

    def test_threshold_rejection(self):
        out = softmax_predict([0.1, 0.0, 0.0], threshold=0.9)
        assert out.rejected and out.predicted == 3

    def test_too_short(self):
        with pytest.raises(DimensionMismatch):
            softmax_predict([1.0], 0.0)


class TestOutputContract:
    @given(a=activation_vectors)
    @settings(max_examples=100, deadline=None)
    def test_probabilities_normalized(self, a):
        k = len(a)
        outputs = [
            metamax_predict(_metamax(k=k), a),
            openmax_predict(
                OpenMaxCalibrator(
                    mavs=np.eye(k) * 5.0,
                    class_models=tuple(_flat_model() for _ in range(k)),
                    alpha=min(2, k),
                    eta=4,
                    distance_scales=tuple(1.0 for _ in range(k)),
                ),
                a,
            ),
            softmax_predict(a, 0.3),
        ]
        for out in outputs:
            assert np.all(out.probabilities >= 0.0)
            assert out.probabilities.sum() == pytest.approx(1.0, abs=1e-9)
            assert out.num_classes == k
            assert out.rejected == (out.predicted == k)
