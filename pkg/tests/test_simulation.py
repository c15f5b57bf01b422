import numpy as np
import pytest
from scipy import integrate
from scipy.spatial.transform import Rotation

from mfso3.distribution import MatrixFisher, cumulative_isotropic
from mfso3.estimator import FilterState, GyroModel, propagate_first_order, run_filter
from mfso3.simulation import (
    PendulumConfig,
    ScenarioConfig,
    case_one,
    case_two,
    run_scenario,
    simulate_attitude_measurement,
    simulate_gyro,
    simulate_truth,
)
from mfso3.so3 import exp_so3, is_rotation, log_so3, rotation_angle

E1, E2, E3 = np.eye(3)


def expected_noise_length(H):
    """E|H xi| for standard normal xi, by direct integration in spherical coordinates."""
    h2 = np.asarray(H, dtype=float) ** 2

    def integrand(phi, theta):
        u = np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
        # E|Hxi| = E[r] E_dir|H u|, E[r] = 2 sqrt(2/pi) for the chi distribution with 3 dof
        return np.sqrt(h2 @ u**2) * np.sin(theta)

    value, _ = integrate.dblquad(integrand, 0.0, np.pi, 0.0, 2 * np.pi, epsabs=1e-12)
    return 2.0 * np.sqrt(2.0 / np.pi) * value / (4 * np.pi)


def test_torque_free_principal_spin():
    cfg = PendulumConfig(rho=np.zeros(3), omega0=np.array([0.0, 3.0, 0.0]))
    R, W = simulate_truth(cfg, 2.0, 50.0)
    np.testing.assert_allclose(W, np.tile([0.0, 3.0, 0.0], (101, 1)), atol=1e-12)
    t = np.arange(101) / 50.0
    expected = np.stack([exp_so3(3.0 * ti * E2) for ti in t])
    np.testing.assert_allclose(R, expected, atol=1e-10)


def test_kinetic_energy_conserved_without_gravity():
    cfg = PendulumConfig(rho=np.zeros(3))
    R, W = simulate_truth(cfg, 10.0, 50.0)
    ke = 0.5 * np.einsum("ni,ij,nj->n", W, cfg.J, W)
    assert np.max(np.abs(ke / ke[0] - 1.0)) < 1e-3


def test_default_pendulum_energy_and_tumbling():
    cfg = PendulumConfig()
    R, W = simulate_truth(cfg, 10.0, 50.0)
    energy = np.array([cfg.energy(r, w) for r, w in zip(R, W)])
    assert np.max(np.abs(energy / energy[0] - 1.0)) < 1e-3
    assert all(is_rotation(r, 1e-10) for r in R)
    # accumulated rotation angle over the maneuver
    assert np.sum(rotation_angle(np.einsum("nji,njk->nik", R[:-1], R[1:]))) > 2 * np.pi
    # self-check against halved step size
    fine = PendulumConfig(substeps=2 * cfg.substeps)
    R2, _ = simulate_truth(fine, 10.0, 50.0)
    assert np.max(rotation_angle(np.einsum("nji,njk->nik", R, R2))) < np.deg2rad(1.0)


def test_pendulum_validation():
    with pytest.raises(ValueError):
        PendulumConfig(J=-np.eye(3))
    with pytest.raises(ValueError):
        PendulumConfig(substeps=0)


def test_gyro_noise_models(rng):
    omega = rng.normal(size=(100_000, 3))
    np.testing.assert_array_equal(simulate_gyro(omega, np.zeros(3), 0.02, rng), omega)
    H = np.array([1.8, 1.6, 2.4])
    h = 0.02
    err = simulate_gyro(omega, H, h, rng) - omega
    length = np.linalg.norm(err, axis=1)
    expected = np.sqrt(h) * expected_noise_length(H)
    assert abs(length.mean() - expected) <= 3 * length.std() / np.sqrt(len(length))
    for i in range(3):
        lag1 = np.corrcoef(err[:-1, i], err[1:, i])[0, 1]
        assert abs(lag1) < 0.01
    white = simulate_gyro(omega, H, h, rng, model="white") - omega
    np.testing.assert_allclose(white.std(axis=0), H / np.sqrt(h), rtol=0.02)
    with pytest.raises(ValueError):
        simulate_gyro(omega, H, h, rng, model="pink")


def test_noise_length_oracle_against_sampling():
    xi = np.random.default_rng(1).standard_normal((400_000, 3))
    v = np.linalg.norm(xi * [1.8, 1.6, 2.4], axis=1)
    assert abs(v.mean() - expected_noise_length([1.8, 1.6, 2.4])) < 3 * v.std() / np.sqrt(len(v))


def test_attitude_measurements(rng):
    R_true = Rotation.random(random_state=rng).as_matrix()
    Z = simulate_attitude_measurement(np.repeat(R_true[None], 20_000, axis=0), 1e4 * np.eye(3), rng)
    angles = rotation_angle(np.einsum("ji,njk->nik", R_true, Z))
    assert cumulative_isotropic(1e4, np.deg2rad(2.0)) > 0.999
    assert np.mean(angles < np.deg2rad(2.0)) >= 0.999
    Z = simulate_attitude_measurement(np.repeat(R_true[None], 100_000, axis=0), np.zeros((3, 3)), rng)
    assert np.all(np.abs(Z.mean(axis=0)) < 3.0 / np.sqrt(100_000))
    single = simulate_attitude_measurement(R_true, np.diag([40.0, 50.0, 35.0]), rng)
    assert is_rotation(single)


def mean_error_angle(f_diag, n_theta=200, n_z=64, n_phi=128):
    """E[angle(R)] for ``R ~ M(diag f)`` by angle-axis quadrature.

    Haar measure in angle-axis form is ``(1 - cos t)/pi dt`` times the uniform
    axis measure, and ``tr(F R) = tr F cos t + (1 - cos t) n^T F n``.
    """
    f = np.asarray(f_diag, dtype=float)
    x, w = np.polynomial.legendre.leggauss(n_theta)
    theta = 0.5 * np.pi * (x + 1.0)
    w_theta = 0.5 * w * (1.0 - np.cos(theta))
    z, wz = np.polynomial.legendre.leggauss(n_z)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    Z, P = np.meshgrid(z, phi, indexing="ij")
    r = np.sqrt(1.0 - Z**2)
    q = (f[0] * (r * np.cos(P)) ** 2 + f[1] * (r * np.sin(P)) ** 2 + f[2] * Z**2).ravel()
    w_axis = np.repeat(wz, n_phi) / (2.0 * n_phi)
    cos_t = np.cos(theta)[:, None]
    inner = np.exp(f.sum() * (cos_t - 1.0) + (1.0 - cos_t) * q[None, :]) @ w_axis
    return np.degrees((w_theta * theta) @ inner / (w_theta @ inner))


def test_mean_attitude_measurement_error(rng):
    exact = mean_error_angle([40.0, 50.0, 35.0])
    assert abs(exact - mean_error_angle([40.0, 50.0, 35.0], n_theta=400, n_z=128, n_phi=256)) < 1e-10
    assert abs(exact - 10.0778) < 1e-4
    Z = simulate_attitude_measurement(np.repeat(np.eye(3)[None], 200_000, axis=0), np.diag([40.0, 50.0, 35.0]), rng)
    angles = np.degrees(rotation_angle(Z))
    assert abs(angles.mean() - exact) <= 3 * angles.std() / np.sqrt(len(angles))


def test_filter_diffusion_matches_monte_carlo_paths():
    """Propagated first moment equals the average over simulated noisy attitude paths."""
    rng = np.random.default_rng(7)
    h, steps, n = 0.02, 25, 40_000
    H = np.array([0.3, 0.2, 0.4])
    omega = np.array([1.0, -0.5, 2.0])
    prior = MatrixFisher(50.0 * np.eye(3))
    R = prior.sample(rng, n)
    state = FilterState(0, prior, h)
    gyro = GyroModel(H)
    for _ in range(steps):
        # the gyro error integrated over the step is the Wiener increment H dW
        noisy = simulate_gyro(np.broadcast_to(omega, (n, 3)), H, h, rng, model="white")
        R = R @ Rotation.from_rotvec(h * noisy).as_matrix()
        state = propagate_first_order(state, omega, gyro)
    se = R.std(axis=0) / np.sqrt(n)
    assert np.all(np.abs(R.mean(axis=0) - state.dist.first_moment()) <= 3 * se + 2e-4)


def test_scenario_validation_and_presets():
    with pytest.raises(ValueError):
        ScenarioConfig(gyro_rate=50.0, attitude_rate=15.0)
    with pytest.raises(ValueError):
        ScenarioConfig(duration=0.0)
    np.testing.assert_allclose(case_one().F0, 100.0 * exp_so3(np.pi * E1))
    np.testing.assert_array_equal(case_two().F0, np.zeros((3, 3)))
    assert case_one().steps_per_measurement == 5 and case_one().h == 0.02


def test_gyro_sample_hold_bias_is_bounded():
    """Holding the gyro sample over a step costs at most h^2 max|dOmega/dt| / 2 per step."""
    R, W = simulate_truth(PendulumConfig(), 10.0, 50.0)
    h = 0.02
    step_err = rotation_angle(np.stack([R[k + 1].T @ R[k] @ exp_so3(h * W[k]) for k in range(500)]))
    accel = np.max(np.linalg.norm(np.diff(W, axis=0), axis=1)) / h
    assert np.max(step_err) <= 0.5 * h**2 * accel * 1.1
    assert np.degrees(np.max(step_err)) < 0.3


def test_noise_free_scenario_converges():
    sc = case_two(duration=2.0, H=np.zeros(3), F_Z=1e4 * np.eye(3), seed=3)
    result = run_scenario(sc)
    ks = sorted(result.measurements)
    second = ks[1]
    # readings equal to the exact step increments isolate the filter from sample-hold bias
    incr = np.stack([log_so3(r0.T @ r1) for r0, r1 in zip(result.R_true[:-1], result.R_true[1:])]) / sc.h
    gyro = GyroModel(np.zeros(3))
    for mode in ("first_order", "unscented"):
        run = run_filter(
            MatrixFisher(sc.F0), incr, sc.h, gyro, result.measurements, mode, sc.sigma, truth=result.R_true
        )
        assert np.all(run.error_deg[second:] < 1.0)
    # with sampled readings and no diffusion the filter grows overconfident and the hold bias accumulates
    for run in (result.first_order, result.unscented):
        assert run.error_deg[ks[0]] < 1.0
        assert np.all(np.diff(run.s[ks, 0]) > 0)


def test_scenario_is_deterministic():
    sc = case_one(duration=0.6, seed=5)
    a, b = run_scenario(sc), run_scenario(sc)
    np.testing.assert_array_equal(a.omega_meas, b.omega_meas)
    np.testing.assert_array_equal(a.first_order.F, b.first_order.F)
    np.testing.assert_array_equal(a.unscented.F, b.unscented.F)
    c = run_scenario(sc.with_seed(6))
    assert not np.array_equal(a.omega_meas, c.omega_meas)
    summary = a.summary()
    assert summary["seed"] == 5 and set(summary) == {"name", "seed", "first_order", "unscented"}


def test_scenario_with_direction_sensors():
    from mfso3.distribution import VonMisesFisherS2

    sc = case_two(duration=1.0, seed=2, directions=(VonMisesFisherS2(E3, 20.0), VonMisesFisherS2(E1, 20.0)))
    result = run_scenario(sc)
    k = sorted(result.measurements)[0]
    assert len(result.measurements[k].direction) == 2
    assert np.all(np.isfinite(result.unscented.error_deg))
