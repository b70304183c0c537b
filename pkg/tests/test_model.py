import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hullreplay.core import ReplayBuffer, ValidationError
from hullreplay.model import (
    EmptyTrainingSet,
    InsufficientSamples,
    SynthConfig,
    TrainerConfig,
    ZeroVector,
    diagnostic_loss,
    evaluate,
    fit,
    frechet_distance,
    identity_score,
    invert,
    synthesize,
)
from hullreplay.policies import bound_training_set

from conftest import make_batch

TRIANGLE = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]])


class TestFit:
    def test_current_batch_only(self, default_stream):
        model = fit(default_stream.batch(1).train, 1)
        assert model.size == 20
        assert diagnostic_loss(model) <= 1e-12

    def test_with_replay(self, default_stream):
        buffer = ReplayBuffer(3, [default_stream.batch(j).train[0] for j in (1, 2, 3)])
        model = fit(list(default_stream.batch(4).train) + list(buffer.members), 4)
        assert model.size == 23

    def test_upper_bound(self, default_stream):
        train = bound_training_set("upper", default_stream.batches[:9], default_stream.batch(10))
        assert fit(train, 10).size == 200

    def test_empty(self):
        with pytest.raises(EmptyTrainingSet):
            fit([], 1)

    def test_future_samples_rejected(self, default_stream):
        with pytest.raises(ValidationError):
            fit(default_stream.batch(3).train, 2)

    def test_replay_weight_zero_drops_replay_term(self):
        current = make_batch(2, TRIANGLE).train
        replay = make_batch(1, [[5.0, 5.0]]).train
        model = fit(list(current) + list(replay), 2, TrainerConfig(replay_weight=0.0))
        assert diagnostic_loss(model) <= 1e-12

    def test_trainer_validation(self):
        with pytest.raises(ValidationError):
            TrainerConfig(replay_weight=-1.0)


class TestInvert:
    def test_anchor_fixpoint(self):
        model = fit(make_batch(1, TRIANGLE).train, 1)
        assert invert(model, TRIANGLE[2])[1] <= 1e-6

    def test_interior(self):
        model = fit(make_batch(1, TRIANGLE).train, 1)
        assert invert(model, [0.25, 0.25])[1] <= 1e-6

    def test_outside_matches_grid_oracle(self):
        # grid oracle distance for (2, 3): 2.8284271247461903
        model = fit(make_batch(1, TRIANGLE).train, 1)
        recon, dist = invert(model, [2.0, 3.0])
        assert dist == pytest.approx(2.8284271247461903, abs=1e-3)
        np.testing.assert_allclose(recon, [0.0, 1.0], atol=1e-6)


class TestIdentityScore:
    def test_self(self):
        assert identity_score([1.0, 2.0, 9.0], [1.0, 2.0, -4.0], [0, 1]) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert identity_score([1.0, 0.0, 3.0], [0.0, 2.0, 3.0], [0, 1]) == pytest.approx(0.0)

    def test_antipodal(self):
        assert identity_score([1.0, -2.0], [-1.0, 2.0], [0, 1]) == pytest.approx(-1.0)

    def test_zero_vector(self):
        with pytest.raises(ZeroVector):
            identity_score([0.0, 0.0, 1.0], [1.0, 1.0, 1.0], [0, 1])

    @settings(max_examples=100, deadline=None)
    @given(arrays(np.float64, 4, elements=st.floats(-10, 10)), arrays(np.float64, 4, elements=st.floats(-10, 10)))
    def test_bounded_and_symmetric(self, a, b):
        try:
            s = identity_score(a, b, [0, 1, 2])
        except ZeroVector:
            return
        assert -1.0 <= s <= 1.0
        assert s == pytest.approx(identity_score(b, a, [0, 1, 2]))


class TestSynthesize:
    def test_identity_when_source_inside_model(self):
        batch = make_batch(1, TRIANGLE)
        model = fit(batch.train, 1)
        out = synthesize(model, batch, 30, rng=np.random.default_rng(4))
        from hullreplay.hull import sample_in_hull

        np.testing.assert_array_equal(out, sample_in_hull(TRIANGLE, 1.0, np.random.default_rng(4), size=30))

    def test_distant_model_displaces(self):
        # mean displacement from the grid oracle over the same 20 draws: 4.318614919026312
        model = fit(make_batch(1, TRIANGLE).train, 1)
        source = make_batch(2, [[5.0, 0.0], [5.0, 1.0], [6.0, 0.0]])
        from hullreplay.hull import sample_in_hull

        draws = sample_in_hull(source.train_codes, 1.0, np.random.default_rng(0), size=20)
        out = synthesize(model, source, 20, rng=np.random.default_rng(0))
        displacement = np.linalg.norm(out - draws, axis=1).mean()
        assert displacement > 0
        assert displacement == pytest.approx(4.318614919026312, abs=1e-3)

    def test_single_anchor_source(self):
        model = fit(make_batch(1, TRIANGLE).train, 1)
        source = make_batch(2, [[3.0, 3.0]])
        out = synthesize(model, source, 1, rng=0)
        np.testing.assert_allclose(out, [[0.5, 0.5]], atol=1e-6)


class TestFrechet:
    def test_identical(self):
        x = np.random.default_rng(0).normal(size=(40, 5))
        assert frechet_distance(x, x) <= 1e-8

    def test_mean_shift(self):
        x = np.random.default_rng(1).normal(size=(40, 3))
        delta = np.array([0.5, -2.0, 1.0])
        assert frechet_distance(x, x + delta) == pytest.approx(delta @ delta, abs=1e-6)

    @pytest.mark.parametrize("sa, sb", [(1.0, 2.0), (0.3, 0.3), (2.5, 0.7), (0.05, 4.0)])
    def test_one_dimensional_with_ridge(self, sa, sb):
        base = np.random.default_rng(2).normal(size=(60, 1))
        base = (base - base.mean()) / base.std(ddof=1)
        # exact closed form once the 1e-6 ridge is added to both variances
        expected = (np.sqrt(sa**2 + 1e-6) - np.sqrt(sb**2 + 1e-6)) ** 2
        assert frechet_distance(base * sa, base * sb) == pytest.approx(expected, abs=1e-9)

    @pytest.mark.parametrize("sa, sb", [(1.0, 2.0), (0.3, 0.3), (1.5, 0.9), (0.5, 0.25)])
    def test_one_dimensional_plain(self, sa, sb):
        # the ridge biases the plain formula by about 1e-6 (sa-sb)^2 / (sa sb)
        base = np.random.default_rng(2).normal(size=(60, 1))
        base = (base - base.mean()) / base.std(ddof=1)
        assert frechet_distance(base * sa, base * sb) == pytest.approx((sa - sb) ** 2, abs=1e-6)

    def test_needs_two_samples(self):
        with pytest.raises(InsufficientSamples):
            frechet_distance([[1.0, 2.0]], [[1.0, 2.0], [0.0, 0.0]])

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000))
    def test_symmetric_nonnegative(self, seed):
        rng = np.random.default_rng(seed)
        a, b = rng.normal(size=(10, 3)), rng.normal(size=(12, 3)) * 2 + 1
        fab, fba = frechet_distance(a, b), frechet_distance(b, a)
        assert fab >= 0
        assert fab == pytest.approx(fba, rel=1e-6, abs=1e-9)


class TestEvaluate:
    def test_upper_fits_current_batch(self, default_stream):
        train = bound_training_set("upper", default_stream.batches[:4], default_stream.batch(5))
        scores = evaluate(fit(train, 5), default_stream.batch(5), (0, 1, 2, 3), rng=0)
        # fresh 16-D test codes sit ~0.2*sqrt(12) = 0.69 from their batch mean;
        # the hull of 100 anchors takes most of that away, and drift steps are 1.0
        nearest = np.min(
            np.linalg.norm(default_stream.batch(5).test_codes[:, None] - fit(train, 5).anchor_codes[None], axis=2),
            axis=1,
        ).mean()
        assert scores.recon_l2 < nearest
        assert scores.recon_l2 < 0.5  # half of one style-drift step
        assert scores.synth_frechet < 1.0
        assert scores.recon_id > 0.99

    def test_lower_forgets_first_batch(self, default_stream):
        s = default_stream
        lower = fit(bound_training_set("lower", s.batches[:9], s.batch(10)), 10)
        upper = fit(bound_training_set("upper", s.batches[:9], s.batch(10)), 10)
        lo = evaluate(lower, s.batch(1), (0, 1, 2, 3), rng=0)
        up = evaluate(upper, s.batch(1), (0, 1, 2, 3), rng=0)
        assert lo.recon_l2 > up.recon_l2

    def test_exact_synth_code_scores_one(self):
        x = np.array([1.0, 2.0, 0.5])
        batch = make_batch(1, [x], [x, [-1.0, 0.5, 3.0]])
        scores = evaluate(fit(batch.train, 1), batch, (0, 1), SynthConfig(count=5), rng=0)
        assert scores.synth_id == pytest.approx(1.0)

    def test_needs_test_split(self):
        batch = make_batch(1, TRIANGLE)
        with pytest.raises(ValidationError):
            evaluate(fit(batch.train, 1), batch, (0,))
