"""Path sampling and its moment / histogram / autocovariance diagnostics."""

import numpy as np
import pytest

import flowspec as fs


def drive_model(a=1.0, eps=0.2, n=64):
    return fs.build_model("constant_drive_circle", {"a": a, "epsilon": eps, "n": n})


def test_same_seed_reproduces_bit_for_bit():
    model = drive_model()
    kw = dict(dt=0.01, steps=500, n_paths=32, seed=5)
    e1 = fs.simulate_sde(model, **kw)
    e2 = fs.simulate_sde(model, **kw)
    np.testing.assert_array_equal(e1.positions, e2.positions)
    np.testing.assert_array_equal(e1.windings, e2.windings)
    e3 = fs.simulate_sde(model, dt=0.01, steps=500, n_paths=32, seed=6)
    assert np.any(e3.positions != e1.positions)


def test_path_streams_are_independent_of_ensemble_size():
    # per-path generators are spawned from the seed, so path 0 is the same
    # whether 4 or 32 paths are requested
    model = drive_model()
    init = np.full((32, 1), 3.0)
    small = fs.simulate_sde(model, dt=0.01, steps=200, n_paths=4, seed=9,
                            initial=init[:4])
    big = fs.simulate_sde(model, dt=0.01, steps=200, n_paths=32, seed=9,
                          initial=init)
    np.testing.assert_array_equal(small.positions[0], big.positions[0])


def test_storage_layout_and_windings():
    model = drive_model()
    ens = fs.simulate_sde(model, dt=0.01, steps=1000, n_paths=8, seed=1,
                          store_every=10)
    assert ens.positions.shape == (8, 101, 1)  # initial state always kept
    assert ens.windings.dtype == np.int32
    period = ens.periods[0]
    assert np.all(ens.positions >= 0) and np.all(ens.positions < period)
    # drift -1 per unit time: paths wind clockwise about 1.6 turns
    u = ens.unwrapped()
    assert np.all(u[:, -1, 0] < u[:, 0, 0])
    np.testing.assert_allclose(ens.times[-1], 10.0, rtol=1e-12)


def test_winding_velocity_matches_drift():
    model = drive_model(a=1.0, eps=0.2)
    ens = fs.simulate_sde(model, dt=0.005, steps=4000, n_paths=200, seed=12)
    v, se = fs.drift_velocity(ens)
    assert abs(v[0] - (-1.0)) < 3 * se[0]
    assert se[0] < 0.02


def test_msd_of_free_diffusion():
    # depth 0 gradient flow = zero drift: MSD grows as eps * t
    model = fs.build_model(
        "tilted_langevin_circle",
        {"depth": 0.0, "tilt": 0.0, "epsilon": 0.3, "n": 32},
    )
    ens = fs.simulate_sde(model, dt=0.01, steps=2000, n_paths=400, seed=21)
    times, msd = fs.mean_squared_displacement(ens)
    mask = times > 1.0
    ratio = msd[mask] / (0.3 * times[mask])
    assert abs(ratio.mean() - 1.0) < 0.1


def test_stability_warning_on_coarse_steps():
    model = drive_model(a=4.0, eps=0.05)
    with pytest.warns(fs.StabilityWarning):
        fs.simulate_sde(model, dt=0.05, steps=10, n_paths=2, seed=0)


def test_input_validation():
    model = drive_model()
    with pytest.raises(fs.ValidationError):
        fs.simulate_sde(model, dt=-0.01, steps=10, n_paths=2, seed=0)
    with pytest.raises(fs.ValidationError):
        fs.simulate_sde(model, dt=0.01, steps=0, n_paths=2, seed=0)
    with pytest.raises(fs.ValidationError):
        fs.simulate_sde(model, dt=0.01, steps=10, n_paths=2, seed=0,
                        initial=np.zeros((3, 1)))


def test_histogram_needs_enough_samples():
    model = drive_model()
    ens = fs.simulate_sde(model, dt=0.01, steps=50, n_paths=10, seed=2)
    with pytest.raises(fs.InsufficientSamplesError):
        fs.stationary_histogram(ens)


def test_histogram_matches_gradient_flow_density():
    model = fs.build_model(
        "langevin_double_well_circle", {"depth": 1.0, "epsilon": 0.4, "n": 64}
    )
    ens = fs.simulate_sde(model, dt=0.005, steps=2000, n_paths=400, seed=31,
                          store_every=2)
    hist = fs.stationary_histogram(ens, bins=48)
    assert hist.n_samples >= 300_000
    np.testing.assert_allclose(
        np.sum(hist.density) * hist.period / 48, 1.0, rtol=1e-12
    )
    tv = fs.tv_distance_to_density(hist, model.density)
    assert tv < 0.05
    # a deliberately wrong reference is far away
    wrong = fs.tv_distance_to_density(hist, lambda x: np.exp(np.cos(x)))
    assert wrong > 0.1


def test_autocovariance_of_rotating_decay():
    # e^{i phi} under constant drive: |C| decays at eps/2, phase advances at a
    model = drive_model(a=1.0, eps=0.2)
    ens = fs.simulate_sde(model, dt=0.01, steps=30_000, n_paths=200, seed=3,
                          store_every=5)
    fit = fs.autocorrelation_decay(ens, burn_in_fraction=0.2)
    assert abs(fit.rate - 0.1) < 0.015
    assert abs(fit.frequency - 1.0) < 0.01
    assert fit.n_lags >= 5
    assert fit.c0 == pytest.approx(1.0, rel=0.05)


def test_decay_fit_window_control():
    model = drive_model()
    ens = fs.simulate_sde(model, dt=0.01, steps=2000, n_paths=50, seed=4)
    with pytest.raises(fs.UnfittableDecayError, match="five lags"):
        fs.autocorrelation_decay(ens, fit_window=(0.0, 0.03))
    with pytest.raises(fs.UnfittableDecayError):
        # constant observable: zero variance, nothing to fit
        fs.autocorrelation_decay(ens, observable=lambda p: 0.0 * p[..., 0])


def test_torus_needs_explicit_observable():
    model = fs.build_model(
        "torus_shear_model", {"ax": 1.0, "ay": 0.5, "epsilon": 0.3, "n": 8}
    )
    ens = fs.simulate_sde(model, dt=0.01, steps=200, n_paths=16, seed=8)
    assert ens.positions.shape[2] == 2
    with pytest.raises(fs.ValidationError):
        fs.autocorrelation_decay(ens)
    fit = fs.autocorrelation_decay(
        ens, observable=lambda p: np.exp(1j * p[..., 0]),
        fit_window=(0.05, 1.5),
    )
    assert fit.rate > 0
