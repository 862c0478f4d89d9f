import numpy as np
import pytest

from app.core.errors import InvalidArgumentError, InvalidConfigError, TrainingAbortedError
from app.core.pta import (
    PTAAdapter,
    PTAParameters,
    clamp_eta,
    eta_values,
    jacobian_oracle,
    local_lyapunov,
    lyapunov_trace,
    pta_gradients,
    pta_update,
    train_pta,
)
from app.core.reservoir import build_reservoir, make_rng
from app.core.schemas import PTAHyper, ReservoirConfig, Topology


def _ring(n_units: int = 20, input_scaling: float = 0.1, seed: int = 0):
    cfg = ReservoirConfig(n_units=n_units, topology=Topology.ring, ring_weight=1.0,
                          input_scaling=input_scaling, seed=seed)
    return build_reservoir(cfg)


def _loss(a, b, net):
    """e = N·λ² with net held fixed."""
    x = np.tanh(a * net + b)
    lam = np.mean(np.log(np.abs((1.0 - x * x) * a)))
    return a.shape[0] * lam ** 2


class TestLyapunov:

    def test_eta(self):
        np.testing.assert_allclose(eta_values(np.array([0.0, 0.5]), np.array([2.0, 1.0])), [2.0, 0.75])

    def test_clamp_keeps_sign(self):
        eta = np.array([0.0, 1e-20, -1e-20, 0.3, -0.3])
        np.testing.assert_array_equal(clamp_eta(eta), [1e-12, 1e-12, -1e-12, 0.3, -0.3])

    def test_saturated_unit_stays_finite(self):
        lam = local_lyapunov(np.array([0.0, 1.0]))
        assert lam == pytest.approx(0.5 * np.log(1e-12))

    def test_closed_form_matches_jacobian_eigenvalues(self):
        rng = np.random.default_rng(7)
        for n in (2, 5, 50):
            for _ in range(1000):
                x = rng.uniform(-0.9, 0.9, n)
                a = rng.uniform(0.5, 1.5, n)
                moduli = np.abs(np.linalg.eigvals(jacobian_oracle(x, a)))
                assert abs(local_lyapunov(eta_values(x, a)) - np.mean(np.log(moduli))) <= 1e-10

    def test_jacobian_eigenvalues_share_modulus(self):
        rng = np.random.default_rng(8)
        for n in (2, 5, 10):
            for _ in range(200):
                x = rng.uniform(-0.5, 0.5, n)
                a = rng.uniform(0.8, 1.2, n)
                moduli = np.abs(np.linalg.eigvals(jacobian_oracle(x, a)))
                assert np.ptp(moduli) <= 1e-10

    def test_jacobian_structure(self):
        x = np.array([0.1, 0.2, 0.3])
        a = np.array([1.0, 2.0, 3.0])
        j = jacobian_oracle(x, a)
        eta = eta_values(x, a)
        assert j[0, 2] == eta[0]
        assert j[1, 0] == eta[1]
        assert j[2, 1] == eta[2]
        assert np.count_nonzero(j) == 3

    def test_trace_length(self):
        w = _ring()
        params = PTAParameters.initial(w.n_units, 0.9)
        trace = lyapunov_trace(w, params, make_rng(1).uniform(0, 0.5, 80), washout=30)
        assert trace.shape == (50,)
        assert np.all(trace < 0)


class TestGradients:

    def test_matches_central_differences(self):
        rng = np.random.default_rng(42)
        n, h = 20, 1e-6
        for _ in range(1000):
            a = rng.uniform(0.5, 1.5, n)
            b = rng.uniform(-1.0, 1.0, n)
            net = rng.uniform(-1.0, 1.0, n)
            x = np.tanh(a * net + b)
            eta = eta_values(x, a)
            if np.min(np.abs(eta)) < 1e-6:
                continue
            grad_a, grad_b = pta_gradients(local_lyapunov(eta), eta, x, net, a)

            fd_a = np.empty(n)
            fd_b = np.empty(n)
            for i in range(n):
                step = np.zeros(n)
                step[i] = h
                fd_a[i] = (_loss(a + step, b, net) - _loss(a - step, b, net)) / (2 * h)
                fd_b[i] = (_loss(a, b + step, net) - _loss(a, b - step, net)) / (2 * h)

            assert np.linalg.norm(grad_a - fd_a) <= 1e-6 * np.linalg.norm(fd_a)
            assert np.linalg.norm(grad_b - fd_b) <= 1e-6 * np.linalg.norm(fd_b)

    def test_zero_lambda_gives_zero_gradient(self):
        x = np.array([0.2, -0.3])
        a = np.ones(2)
        grad_a, grad_b = pta_gradients(0.0, eta_values(x, a), x, np.ones(2), a)
        assert not np.any(grad_a) and not np.any(grad_b)


class TestUpdate:

    def test_momentum_recurrence(self):
        hyper = PTAHyper(learning_rate=0.1, momentum=0.5)
        params = PTAParameters.initial(3, init_gain=1.0, init_bias=0.0)
        g = np.array([1.0, -2.0, 4.0])

        first = pta_update(params, g, -g, hyper)
        np.testing.assert_allclose(first.velocity_gain, 0.5 * g)
        np.testing.assert_allclose(first.gain, 1.0 - 0.05 * g)
        np.testing.assert_allclose(first.bias, 0.05 * g)

        second = pta_update(first, g, -g, hyper)
        np.testing.assert_allclose(second.velocity_gain, 0.75 * g)
        np.testing.assert_allclose(second.gain, first.gain - 0.075 * g)

    def test_update_leaves_input_untouched(self):
        params = PTAParameters.initial(2, 0.5)
        before = params.copy()
        pta_update(params, np.ones(2), np.ones(2), PTAHyper())
        np.testing.assert_array_equal(params.gain, before.gain)
        np.testing.assert_array_equal(params.velocity_bias, before.velocity_bias)


class TestTraining:

    def test_zero_epochs_returns_initial(self):
        w = _ring()
        params, trace = train_pta(w, np.zeros(200), PTAHyper(max_epochs=0), init_gain=0.7)
        np.testing.assert_array_equal(params.gain, np.full(20, 0.7))
        np.testing.assert_array_equal(params.bias, np.ones(20))
        assert trace.epochs_run == 0
        assert trace.stop_reason == "zero_epochs"

    def test_series_shorter_than_washout(self):
        with pytest.raises(InvalidArgumentError):
            train_pta(_ring(), np.zeros(50), PTAHyper(washout=50), init_gain=0.5)

    def test_requires_unit_ring(self):
        dense = build_reservoir(ReservoirConfig(n_units=10))
        with pytest.raises(InvalidConfigError):
            train_pta(dense, np.zeros(200), PTAHyper(), init_gain=0.5)
        scr = build_reservoir(ReservoirConfig(n_units=10, topology=Topology.ring, ring_weight=0.5))
        with pytest.raises(InvalidConfigError):
            train_pta(scr, np.zeros(200), PTAHyper(), init_gain=0.5)

    def test_stops_at_max_epochs(self):
        u = make_rng(3).uniform(0, 0.5, 300)
        hyper = PTAHyper(max_epochs=2, lambda_threshold=-1e-9)
        _, trace = train_pta(_ring(), u, hyper, init_gain=0.5)
        assert trace.epochs_run == 2
        assert trace.stop_reason == "max_epochs"
        assert len(trace.epoch_lambda) == 2

    def test_stops_at_threshold_after_first_epoch(self):
        u = make_rng(3).uniform(0, 0.5, 300)
        hyper = PTAHyper(max_epochs=10, lambda_threshold=-100.0)
        _, trace = train_pta(_ring(), u, hyper, init_gain=0.5)
        assert trace.epochs_run == 1
        assert trace.stop_reason == "threshold"

    def test_adaptation_moves_lambda_towards_zero(self):
        u = make_rng(4).uniform(0, 0.5, 500)
        hyper = PTAHyper(max_epochs=3, learning_rate=1e-4)
        _, trace = train_pta(_ring(), u, hyper, init_gain=0.5)
        assert trace.epoch_lambda[-1] > trace.epoch_lambda[0]

    def test_epoch_callback_and_step_recording(self):
        u = make_rng(5).uniform(0, 0.5, 250)
        seen = []
        _, trace = train_pta(
            _ring(), u, PTAHyper(max_epochs=3, lambda_threshold=-1e-9), init_gain=0.5,
            on_epoch_end=lambda epoch, params, lam: seen.append((epoch, lam)),
            record_steps=True,
        )
        assert [e for e, _ in seen] == [1, 2, 3]
        assert [lam for _, lam in seen] == trace.epoch_lambda
        assert len(trace.step_lambda) == 3
        assert trace.step_lambda[0].shape == (150,)
        assert trace.step_lambda[0].mean() == pytest.approx(trace.epoch_lambda[0])

    def test_single_epoch_equals_online_adapter(self):
        w = _ring()
        u = make_rng(6).uniform(0, 0.5, 220)
        hyper = PTAHyper(max_epochs=1, learning_rate=1e-3)
        params, _ = train_pta(w, u, hyper, init_gain=0.6)

        adapter = PTAAdapter(w, hyper, init_gain=0.6)
        for t in range(hyper.washout):
            adapter.advance(u[t:t + 1])
        for t in range(hyper.washout, u.shape[0]):
            adapter.step(u[t:t + 1])
        np.testing.assert_array_equal(params.gain, adapter.params.gain)
        np.testing.assert_array_equal(params.bias, adapter.params.bias)

    def test_multiple_series(self):
        rng = make_rng(7)
        series = [rng.uniform(0, 0.5, 200), rng.uniform(0, 0.5, 150)]
        _, trace = train_pta(_ring(), series, PTAHyper(max_epochs=1), init_gain=0.5, record_steps=True)
        assert trace.step_lambda[0].shape == (100 + 50,)

    def test_non_finite_lambda_aborts(self):
        u = np.zeros(200)
        u[120] = np.nan
        with pytest.raises(TrainingAbortedError) as exc:
            train_pta(_ring(), u, PTAHyper(max_epochs=2), init_gain=0.5)
        assert exc.value.epoch == 1
        assert exc.value.step == 120
