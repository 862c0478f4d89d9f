import numpy as np
import pandas as pd
import pytest

from app.core.errors import InvalidArgumentError
from app.core.reservoir import make_rng
from app.core.schemas import TaskName
from app.utils.datasets import (
    export_dataset,
    gen_mackey_glass,
    gen_mc,
    gen_narma20,
    gen_nlm,
    generate,
    mackey_glass_series,
    mc_targets,
    narma20_series,
    split,
    split_points,
)


def test_split_points_default_length():
    assert split_points(20000) == (15000, 20000, 5000)


def test_split_segments():
    ds = gen_narma20(400, make_rng(0), washout=20)
    train, validation, test = split(ds)
    assert (train.start, train.stop) == (0, 300)
    assert (validation.start, validation.stop) == (200, 300)
    assert (test.start, test.stop) == (300, 400)
    assert len(validation) == len(test)
    np.testing.assert_array_equal(validation.inputs, ds.inputs[:, 200:300])


def test_split_rejects_inconsistent_lengths():
    ds = gen_nlm(400, make_rng(0), washout=50)
    ds.targets = ds.targets[:, :-1]
    with pytest.raises(InvalidArgumentError):
        split(ds)


class TestMemoryCapacity:

    def test_targets_are_delayed_inputs(self):
        u = np.arange(1.0, 11.0)
        d = mc_targets(u, 3)
        np.testing.assert_array_equal(d[0], [0, 1, 2, 3, 4, 5, 6, 7, 8, 9])
        np.testing.assert_array_equal(d[2], [0, 0, 0, 1, 2, 3, 4, 5, 6, 7])

    def test_dataset(self):
        ds = gen_mc(1000, 10, make_rng(1))
        assert ds.targets.shape == (20, 1000)
        assert ds.washout == 20
        assert ds.target_names[0] == "delay_1"
        assert ds.inputs.min() >= 0.0 and ds.inputs.max() <= 0.5
        np.testing.assert_array_equal(ds.targets[4, 5:], ds.inputs[0, :-5])

    def test_too_short(self):
        with pytest.raises(InvalidArgumentError):
            gen_mc(40, 10, make_rng(1))


def test_nlm_target():
    ds = gen_nlm(500, make_rng(2))
    u = ds.inputs[0]
    np.testing.assert_allclose(ds.targets[0, 30:], np.sin(np.sqrt(2.0) * u[:-30]))
    np.testing.assert_array_equal(ds.targets[0, :30], 0.0)
    assert ds.washout == 100


class TestNarma:

    def test_recurrence_against_direct_loop(self):
        u = make_rng(3).uniform(0, 0.5, 200)
        d = {t: 0.0 for t in range(-19, 1)}
        for t in range(200):
            lag = u[t - 19] if t >= 19 else 0.0
            window = sum(d[t - i] for i in range(20))
            d[t + 1] = np.tanh(0.3 * d[t] + 0.05 * d[t] * window + 1.5 * lag * u[t] + 0.01)
        expected = np.array([d[t + 1] for t in range(200)])
        np.testing.assert_allclose(narma20_series(u), expected, rtol=1e-13, atol=1e-15)

    def test_dataset_is_bounded(self):
        ds = gen_narma20(2000, make_rng(4))
        assert np.all(np.isfinite(ds.targets))
        assert np.all(np.abs(ds.targets) < 1.0)


class TestMackeyGlass:

    def test_constant_history_phase_matches_under_step_halving(self):
        # for t <= delay the delayed term is the constant history
        coarse = mackey_glass_series(31, step=0.1, transient=0)
        fine = mackey_glass_series(31, step=0.05, transient=0)
        np.testing.assert_allclose(coarse, fine, rtol=0, atol=1e-9)

    def test_step_refinement_is_first_order(self):
        coarse, mid, fine = (mackey_glass_series(100, step=h, transient=0) for h in (0.1, 0.05, 0.025))
        ratio = np.max(np.abs(coarse - mid)) / np.max(np.abs(mid - fine))
        assert 1.5 < ratio < 2.5

    def test_unit_history_is_a_fixed_point(self):
        s = mackey_glass_series(1000, history=1.0, transient=0)
        assert np.all(s == 1.0)

    def test_starts_from_history(self):
        assert mackey_glass_series(5, transient=0)[0] == 1.2

    def test_chaotic_regime_range(self):
        s = mackey_glass_series(2000)
        assert s.shape == (2000,)
        assert 0.0 < s.min() and s.max() < 1.6
        assert s.std() > 0.1

    def test_delay_must_fit_step(self):
        with pytest.raises(InvalidArgumentError):
            mackey_glass_series(10, delay=30.05, step=0.1)

    def test_delay_of_one_step_is_deterministic(self):
        first = mackey_glass_series(20, delay=0.1, transient=0)
        assert np.all(np.isfinite(first))
        np.testing.assert_array_equal(first, mackey_glass_series(20, delay=0.1, transient=0))

    @pytest.mark.parametrize("delay", [0.0, -0.1])
    def test_delay_shorter_than_a_step(self, delay):
        with pytest.raises(InvalidArgumentError):
            mackey_glass_series(10, delay=delay)

    def test_next_step_targets(self):
        ds = gen_mackey_glass(300)
        np.testing.assert_array_equal(ds.targets[0, :-1], ds.inputs[0, 1:])


def test_generate_dispatch():
    ds = generate(TaskName.mc, 400, 5, make_rng(0))
    assert ds.name == "mc" and ds.washout == 10
    ds = generate(TaskName.narma20, 400, 5, make_rng(0), washout=30)
    assert ds.name == "narma20" and ds.washout == 30


def test_generate_is_seeded():
    a = generate(TaskName.nlm, 300, 5, make_rng(9))
    b = generate(TaskName.nlm, 300, 5, make_rng(9))
    np.testing.assert_array_equal(a.inputs, b.inputs)


def test_export_dataset(tmp_path):
    ds = gen_mc(200, 3, make_rng(5))
    path = export_dataset(ds, str(tmp_path / "fixtures" / "mc.csv"))
    frame = pd.read_csv(path, float_precision="round_trip")
    assert list(frame.columns) == ["input"] + [f"delay_{k}" for k in range(1, 7)]
    assert len(frame) == 200
    np.testing.assert_array_equal(frame["input"].to_numpy(), ds.inputs[0])
    np.testing.assert_array_equal(frame["delay_6"].to_numpy(), ds.targets[5])
