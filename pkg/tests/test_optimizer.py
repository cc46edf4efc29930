import numpy as np
import pytest

from soul.core import ParameterDomain, averaged_iterate
from soul.models import ConjugateGaussianModel
from soul.optimizer import Model, ReplicateFailure, SoulConfig, replicate, soul_run, write_trace_csv
from soul.schedules import ScheduleSet


class FlatModel:
    """Zero parameter drift; the optimiser must stay put."""

    dim_x = 2
    dim_theta = 1
    domain = ParameterDomain.box(-5, 5, 1)

    def grad_x_log_posterior(self, x, theta):
        return -x

    def grad_theta_log_joint(self, x, theta):
        return np.zeros(1)

    def grad_penalty(self, theta):
        return np.zeros(1)

    def log_joint(self, x, theta):
        return -0.5 * float(x @ x)


class RecordingModel(ConjugateGaussianModel):
    def __init__(self, *args, **kw):
        super().__init__(*args, **kw)
        self.seen = []

    def grad_theta_log_joint(self, x, theta):
        self.seen.append(x.copy())
        return super().grad_theta_log_joint(x, theta)


class BrokenModel(ConjugateGaussianModel):
    def grad_theta_log_joint(self, x, theta):
        return np.array([np.inf])


def toy_run(seed=0, n=20_000, warmup=1000, **kw):
    model = ConjugateGaussianModel(1.0)
    return soul_run(model, [0.0], [0.0], ScheduleSet(0.5, 0.8, 0.05),
                    SoulConfig(n, theta_warmup=warmup, seed=seed, **kw))


class TestSoulRun:
    def test_model_protocol(self):
        assert isinstance(FlatModel(), Model)
        assert isinstance(ConjugateGaussianModel(0.0), Model)

    def test_zero_drift(self):
        trace = soul_run(FlatModel(), [1.5], [0.0, 0.0], ScheduleSet(1.0, 0.5, 0.1), SoulConfig(200))
        np.testing.assert_array_equal(trace.thetas, 1.5)
        np.testing.assert_array_equal(trace.theta_hat, [1.5])

    def test_conjugate_mle(self):
        # y | theta ~ N(theta, 2), so the MLE is y
        trace = toy_run(seed=1)
        assert abs(trace.theta_hat[0] - 1.0) < 0.05

    def test_trace_shapes_and_domain(self):
        model = ConjugateGaussianModel(50.0, bounds=(-2, 2))
        trace = soul_run(model, [0.0], [0.0], ScheduleSet(0.5, 0.8, 0.05), SoulConfig(1000, record_every=7))
        assert trace.thetas.shape == trace.averaged.shape == (143, 1)
        assert len(trace.deltas) == len(trace.iterations) == 143
        assert np.all(np.abs(trace.thetas) <= 2) and np.all(np.abs(trace.averaged) <= 2)
        assert 1.9 < trace.theta_hat[0] <= 2.0

    def test_thinning_does_not_change_estimate(self):
        a = toy_run(n=3000, warmup=0, record_every=1)
        b = toy_run(n=3000, warmup=0, record_every=1000)
        np.testing.assert_array_equal(a.theta_hat, b.theta_hat)
        np.testing.assert_array_equal(a.thetas[::1000], b.thetas)

    def test_average_matches_batch_form(self):
        trace = toy_run(n=5000, warmup=100)
        np.testing.assert_allclose(trace.averaged[-1], averaged_iterate(trace.thetas, trace.deltas), rtol=1e-12)
        np.testing.assert_allclose(trace.theta_hat, trace.averaged[-1], rtol=1e-12)

    def test_warmup_excluded_and_index_advanced(self):
        trace = toy_run(n=100, warmup=50)
        assert trace.warmup_thetas.shape == (50, 1)
        assert trace.iterations[0] == 51
        assert trace.deltas[0] == pytest.approx(0.5 * 51 ** -0.8)

    def test_warm_start(self):
        # drift samples of consecutive iterations chain together: with a fixed
        # noise stream, the sample handed to iteration n is the one produced last
        model = RecordingModel(0.0)
        s = ScheduleSet(0.1, 0.6, 0.05, m0=2)
        soul_run(model, [0.0], [0.0], s, SoulConfig(30, seed=3))
        replay = RecordingModel(0.0)
        # an identical run must hand over identical states
        soul_run(replay, [0.0], [0.0], s, SoulConfig(30, seed=3))
        np.testing.assert_array_equal(np.array(model.seen), np.array(replay.seen))
        assert len(model.seen) == 60

    def test_chain_burnin_consumes_noise(self):
        a = toy_run(n=10, warmup=0)
        b = toy_run(n=10, warmup=0, chain_burnin=5)
        assert not np.array_equal(a.thetas, b.thetas)

    def test_retained_latent(self):
        trace = toy_run(n=100, warmup=0, record_every=10, retain_latent=True)
        assert trace.retained_samples.shape == (10, 1)

    def test_theta0_outside_domain(self):
        with pytest.raises(ValueError):
            soul_run(ConjugateGaussianModel(0.0, bounds=(-1, 1)), [3.0], [0.0], ScheduleSet(1, 0.5, 0.1),
                     SoulConfig(10))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            soul_run(FlatModel(), [0.0], [0.0], ScheduleSet(1, 0.5, 0.1), SoulConfig(10))

    def test_nonfinite_reports_iteration(self):
        with pytest.raises(FloatingPointError) as info:
            soul_run(BrokenModel(0.0), [0.0], [0.0], ScheduleSet(1, 0.5, 0.1), SoulConfig(10, theta_warmup=2))
        assert info.value.iteration == 1

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SoulConfig(0)
        with pytest.raises(ValueError):
            SoulConfig(10, record_every=0)

    def test_deterministic_csv(self, tmp_path):
        write_trace_csv(toy_run(n=500, warmup=0, seed=4), tmp_path / "a.csv")
        write_trace_csv(toy_run(n=500, warmup=0, seed=4), tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        lines = (tmp_path / "a.csv").read_text().splitlines()
        assert lines[0] == "iter,delta,theta_0,avg_0"
        assert len(lines) == 501


class TestReplicate:
    def setup_method(self):
        self.model = ConjugateGaussianModel(1.0)
        self.s = ScheduleSet(0.5, 0.8, 0.05)

    def test_single_equals_run(self):
        cfg = SoulConfig(500, seed=2)
        out = replicate(self.model, [0.0], [0.0], self.s, cfg, 1, max_workers=1)
        np.testing.assert_array_equal(out[0], soul_run(self.model, [0.0], [0.0], self.s, cfg).theta_hat)

    def test_streams_differ(self):
        out = replicate(self.model, [0.0], [0.0], self.s, SoulConfig(500), 2, max_workers=1)
        assert out[0][0] != out[1][0]

    def test_parallel_matches_serial(self):
        cfg = SoulConfig(300, seed=5)
        serial = replicate(self.model, [0.0], [0.0], self.s, cfg, 4, max_workers=1)
        pooled = replicate(self.model, [0.0], [0.0], self.s, cfg, 4, max_workers=2)
        np.testing.assert_array_equal(np.array(serial), np.array(pooled))

    def test_failures_collected(self):
        out = replicate(BrokenModel(0.0), [0.0], [0.0], self.s, SoulConfig(5), 3, max_workers=1)
        assert all(isinstance(r, ReplicateFailure) for r in out)
        assert [r.index for r in out] == [0, 1, 2]

    def test_mean_near_mle(self):
        # 100 short replicates; the sample mean should sit within 3 standard errors of y
        cfg = SoulConfig(2000, theta_warmup=1000)
        out = np.array(replicate(self.model, [0.0], [0.0], self.s, cfg, 100, max_workers=1))[:, 0]
        se = out.std(ddof=1) / np.sqrt(len(out))
        assert abs(out.mean() - 1.0) < 3 * se

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            replicate(self.model, [0.0], [0.0], self.s, SoulConfig(5), 0)
