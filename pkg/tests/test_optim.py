"""Optimizer steps, projections, the iteration-count distribution, and the
training loop."""

import numpy as np
import pytest

from bhlr.divergence import make_generator
from bhlr.errors import ConfigError, NonFiniteGradient
from bhlr.hypernet import Hypernetwork, index_set_size
from bhlr.loss import LossSpec, full_gradient, full_loss
from bhlr.optim import (
    AdamState,
    Projection,
    Schedule,
    adam_step,
    sample_tau,
    sgd_step,
    tau_probabilities,
    train,
)
from bhlr.sampler import SamplerConfig
from bhlr.simfn import SimilarityModel

from conftest import compatible_spec, random_net


class TestSgdStep:
    def test_projected_example(self):
        sched = Schedule(kind="constant", gamma=0.5)
        out = sgd_step(np.array([1.0, -2.0]), np.array([1.0, 1.0]), sched, 1,
                       Projection("nonnegative"))
        np.testing.assert_array_equal(out, [0.5, 0.0])

    def test_zero_gradient_fixed_point(self, rng):
        theta = rng.standard_normal(4)
        sched = Schedule(kind="constant", gamma=0.3)
        np.testing.assert_array_equal(
            sgd_step(theta, np.zeros(4), sched, 1), theta)

    def test_inverse_t_halves(self):
        sched = Schedule(kind="inverse-t", gamma=1.0)
        theta = np.zeros(2)
        g = np.ones(2)
        step1 = theta - sgd_step(theta, g, sched, 1)
        step2 = theta - sgd_step(theta, g, sched, 2)
        np.testing.assert_allclose(step2, step1 / 2.0)

    def test_weight_decay_adds_to_gradient(self, rng):
        theta = rng.standard_normal(3)
        g = rng.standard_normal(3)
        sched = Schedule(kind="constant", gamma=0.1, weight_decay=0.01)
        out = sgd_step(theta, g, sched, 1)
        np.testing.assert_allclose(out, theta - 0.1 * (g + 0.01 * theta))

    def test_non_finite_rejected(self):
        sched = Schedule(kind="constant", gamma=0.1)
        with pytest.raises(NonFiniteGradient):
            sgd_step(np.zeros(2), np.array([1.0, np.nan]), sched, 1)


class TestProjection:
    def test_idempotent(self, rng):
        for proj in (Projection("none"), Projection("nonnegative"),
                     Projection("box", lo=-np.ones(5), hi=np.ones(5))):
            x = 3.0 * rng.standard_normal(5)
            once = proj.apply(x)
            np.testing.assert_array_equal(proj.apply(once), once)

    def test_box_is_l2_projection(self, rng):
        # the clamp must beat every other feasible point in distance
        lo, hi = -np.ones(4), np.ones(4)
        proj = Projection("box", lo=lo, hi=hi)
        x = 3.0 * rng.standard_normal(4)
        px = proj.apply(x)
        for _ in range(200):
            y = rng.uniform(lo, hi)
            assert np.linalg.norm(px - x) <= np.linalg.norm(y - x) + 1e-12

    def test_box_validation(self):
        with pytest.raises(ConfigError):
            Projection("box", lo=np.ones(2), hi=np.zeros(2))


class TestAdam:
    def test_first_step_is_signed(self, rng):
        g = rng.standard_normal(6)
        sched = Schedule(kind="adam", gamma=1e-2)
        state, theta = adam_step(AdamState.zeros(6), np.zeros(6), g, 1, sched)
        # bias correction makes the first step lr * g / (|g| + eps)
        np.testing.assert_allclose(theta, -1e-2 * np.sign(g), rtol=1e-5)

    def test_zero_gradient_forever(self):
        sched = Schedule(kind="adam", gamma=1e-2)
        theta = np.array([1.0, -2.0])
        state = AdamState.zeros(2)
        for t in range(1, 10):
            state, theta = adam_step(state, theta, np.zeros(2), t, sched)
        np.testing.assert_array_equal(theta, [1.0, -2.0])

    def test_deterministic_trajectories(self, rng):
        g_seq = rng.standard_normal((20, 3))

        def run():
            sched = Schedule(kind="adam", gamma=1e-2)
            theta = np.ones(3)
            state = AdamState.zeros(3)
            for t, g in enumerate(g_seq, start=1):
                state, theta = adam_step(state, theta, g, t, sched)
            return theta
        np.testing.assert_array_equal(run(), run())

    def test_projection_applied(self):
        sched = Schedule(kind="adam", gamma=0.5)
        _, theta = adam_step(AdamState.zeros(2), np.zeros(2),
                             np.array([1.0, -1.0]), 1, sched,
                             Projection("nonnegative"))
        assert theta[0] == 0.0 and theta[1] > 0.0


class TestTauDistribution:
    def test_single_iteration(self):
        np.testing.assert_array_equal(tau_probabilities(1, 0.5, 1.0), [1.0])

    def test_two_iteration_masses(self):
        # masses (2*1/1 - 1/1, 2*1/2 - 1/4) = (1, 3/4) -> (4/7, 3/7)
        np.testing.assert_allclose(tau_probabilities(2, 1.0, 1.0),
                                   [4 / 7, 3 / 7], rtol=1e-15)

    def test_all_masses_positive(self):
        assert np.all(tau_probabilities(100, 1.5, 1.0) > 0)

    def test_requires_small_gamma(self):
        with pytest.raises(ConfigError):
            tau_probabilities(10, 2.0, 1.0)
        with pytest.raises(ConfigError):
            Schedule(kind="inverse-t", gamma=2.0, T=10, tau_sampling=True,
                     H_estimate=1.0)

    def test_empirical_frequencies(self):
        sched = Schedule(kind="inverse-t", gamma=1.0, T=5, tau_sampling=True,
                         H_estimate=1.0)
        rng = np.random.default_rng(0)
        draws = 50_000
        counts = np.zeros(5)
        for _ in range(draws):
            counts[sample_tau(sched, rng) - 1] += 1
        p = tau_probabilities(5, 1.0, 1.0)
        se = np.sqrt(p * (1 - p) / draws)
        np.testing.assert_array_less(np.abs(counts / draws - p), 3 * se + 1e-12)


def least_squares_instance(rng, n=30, p=4):
    X = rng.standard_normal((n, p))
    theta_star = rng.standard_normal(p)
    w = X @ theta_star
    net = Hypernetwork(X, 1, {(i,): float(w[i]) for i in range(n)},
                       "increasing")
    return net, theta_star


class TestTrain:
    def test_full_batch_reaches_normal_equations(self, rng):
        net, _ = least_squares_instance(rng)
        model = SimilarityModel.create("linear", p=4, K=1, U=1, seed=0)
        spec = LossSpec(make_generator("quadratic"), model)
        train(net, spec, Schedule(kind="constant", gamma=0.5, T=400),
              cadence=400, record_loss=False)
        target, *_ = np.linalg.lstsq(net.vectors,
                                     [net.weight((i,)) for i in range(net.n)],
                                     rcond=None)
        assert np.linalg.norm(model.theta - target) <= 1e-4

    def test_exhaustive_sampler_matches_full_batch(self, rng):
        # one exhaustive-minibatch step with gamma/|I| equals one full-batch
        # step with gamma
        net = random_net(n=5, U=2, seed=3)
        size = index_set_size(net)
        spec_a = compatible_spec("kl", U=2, seed=4)
        spec_b = compatible_spec("kl", U=2, seed=4)
        train(net, spec_a, Schedule(kind="constant", gamma=0.1, T=1),
              cadence=10, record_loss=False)
        train(net, spec_b, Schedule(kind="constant", gamma=0.1 / size, T=1),
              sampler_cfg=SamplerConfig(v=0, m_plus=1, m_minus=1, seed=0,
                                        exhaustive=True),
              cadence=10, record_loss=False)
        np.testing.assert_allclose(spec_a.model.theta, spec_b.model.theta,
                                   rtol=1e-12)

    def test_zero_iterations_returns_initial(self):
        net = random_net(n=5, U=2, seed=5)
        spec = compatible_spec("logistic", U=2, seed=6)
        theta0 = spec.model.theta.copy()
        res = train(net, spec, Schedule(kind="constant", gamma=0.1, T=0))
        np.testing.assert_array_equal(res.theta, theta0)
        assert res.iterations == 0 and res.history == []

    def test_practical_scaling_mode_decreases_loss(self):
        net = random_net(n=8, U=2, seed=7)
        spec = compatible_spec("logistic", U=2, seed=8)
        before = full_loss(spec, net)
        res = train(net, spec, Schedule(kind="adam", gamma=5e-3, T=400),
                    sampler_cfg=SamplerConfig(v=1, u=(0,), m_plus=2,
                                              m_minus=4, seed=9),
                    cadence=400, practical_scaling=True)
        assert res.history[-1][1] < before

    def test_full_batch_descent_is_monotone(self):
        # convex instance: quadratic generator, linear-identity model
        net = random_net(n=7, U=2, seed=10, binary=False)
        spec = compatible_spec("quadratic", U=2, seed=11)
        losses = []
        train(net, spec, Schedule(kind="constant", gamma=5e-3, T=200),
              cadence=1,
              callbacks=[lambda t, m, row: losses.append(row[1]) and False])
        assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))

    def test_gradient_norm_running_min_decays(self):
        # operationalizes the O(1/log T) claim: the best gradient norm seen
        # keeps improving as the gamma/t schedule runs longer
        net = random_net(n=6, U=2, seed=12)
        spec = compatible_spec("logistic", U=2, seed=13)
        norms = []
        train(net, spec,
              Schedule(kind="inverse-t", gamma=0.5, T=10_000),
              sampler_cfg=SamplerConfig(v=1, u=(0,), m_plus=1, m_minus=2,
                                        seed=14),
              cadence=10_001, record_loss=False,
              callbacks=[lambda t, m, row:
                         norms.append(np.linalg.norm(full_gradient(
                             spec, net))) and False])
        m100 = min(norms[:100])
        m1000 = min(norms[:1000])
        m10000 = min(norms)
        assert m100 > m1000 > m10000

    def test_tau_sampling_runs_tau_iterations(self):
        net = random_net(n=5, U=2, seed=15)
        spec = compatible_spec("quadratic", U=2, seed=16)
        sched = Schedule(kind="inverse-t", gamma=0.05, T=50, tau_sampling=True,
                         H_estimate=10.0)
        res = train(net, spec, sched, seed=3,
                    sampler_cfg=SamplerConfig(v=0, m_plus=1, m_minus=3, seed=4),
                    cadence=1000, record_loss=False)
        assert 1 <= res.iterations <= 50

    def test_best_checkpoint_tracks_metric(self):
        net = random_net(n=6, U=2, seed=17)
        spec = compatible_spec("logistic", U=2, seed=18)
        seen = []

        def metric(model):
            val = full_loss(spec, net)
            seen.append((val, model.theta.copy()))
            return val
        res = train(net, spec, Schedule(kind="adam", gamma=1e-2, T=60),
                    sampler_cfg=SamplerConfig(v=0, m_plus=2, m_minus=4, seed=19),
                    cadence=10, eval_fn=metric, metric_direction="min",
                    record_loss=False)
        best_val, best_theta = min(seen, key=lambda s: s[0])
        np.testing.assert_array_equal(res.best_theta, best_theta)

    def test_callback_stops_early(self):
        net = random_net(n=5, U=2, seed=20)
        spec = compatible_spec("quadratic", U=2, seed=21)
        res = train(net, spec, Schedule(kind="constant", gamma=1e-3, T=100),
                    cadence=1000, record_loss=False,
                    callbacks=[lambda t, m, row: t >= 7])
        assert res.iterations == 7 and res.stopped_early
