"""Ground truth and sensor simulation for the estimation scenarios.

The truth is a rigid body pivoting under uniform gravity (a 3D pendulum),
integrated with an explicit Lie-group midpoint rule so the attitude never
leaves SO(3). Sensors add matrix Fisher attitude errors, von Mises-Fisher
direction errors and Gaussian gyro noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from .distribution import MatrixFisher, VonMisesFisherS2
from .estimator import (
    DEFAULT_SIGMA,
    AttitudeSensor,
    EstimationRun,
    GyroModel,
    Measurements,
    run_filter,
)
from .so3 import exp_so3

E3 = np.array([0.0, 0.0, 1.0])

GyroNoiseModel = Literal["increment", "white"]


@dataclass(frozen=True)
class PendulumConfig:
    """Rigid body about a fixed pivot; gravity acts along the inertial ``+e3``."""

    J: np.ndarray = field(default_factory=lambda: np.diag([0.2, 0.3, 0.4]))
    rho: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 0.2]))
    mass: float = 1.0
    gravity: float = 9.81
    R0: np.ndarray = field(default_factory=lambda: np.eye(3))
    omega0: np.ndarray = field(default_factory=lambda: 4.14 * np.ones(3))
    substeps: int = 4

    def __post_init__(self):
        J = np.asarray(self.J, dtype=float)
        if J.shape != (3, 3) or not np.allclose(J, J.T) or np.any(np.linalg.eigvalsh(J) <= 0):
            raise ValueError("inertia must be symmetric positive definite")
        if self.substeps < 1:
            raise ValueError("substeps must be at least 1")
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "rho", np.asarray(self.rho, dtype=float).reshape(3))
        object.__setattr__(self, "R0", np.asarray(self.R0, dtype=float).reshape(3, 3))
        object.__setattr__(self, "omega0", np.asarray(self.omega0, dtype=float).reshape(3))

    def angular_acceleration(self, R: np.ndarray, omega: np.ndarray) -> np.ndarray:
        torque = self.mass * self.gravity * np.cross(self.rho, R.T @ E3)
        return np.linalg.solve(self.J, np.cross(self.J @ omega, omega) + torque)

    def energy(self, R: np.ndarray, omega: np.ndarray) -> float:
        return float(0.5 * omega @ self.J @ omega - self.mass * self.gravity * E3 @ R @ self.rho)


def _midpoint_step(cfg: PendulumConfig, R, omega, dt):
    # explicit midpoint in the Lie algebra: R stays exactly on SO(3)
    a1 = cfg.angular_acceleration(R, omega)
    R_half = R @ exp_so3(0.5 * dt * omega)
    omega_half = omega + 0.5 * dt * a1
    a2 = cfg.angular_acceleration(R_half, omega_half)
    return R @ exp_so3(dt * omega_half), omega + dt * a2


def simulate_truth(cfg: PendulumConfig, duration: float, rate: float) -> tuple[np.ndarray, np.ndarray]:
    """Attitude and body angular velocity at ``t = k / rate`` for ``k = 0..duration*rate``."""
    n = int(round(duration * rate))
    dt = 1.0 / rate / cfg.substeps
    R = np.empty((n + 1, 3, 3))
    W = np.empty((n + 1, 3))
    R[0], W[0] = cfg.R0, cfg.omega0
    r, w = cfg.R0.copy(), cfg.omega0.copy()
    for k in range(n):
        for _ in range(cfg.substeps):
            r, w = _midpoint_step(cfg, r, w, dt)
        R[k + 1], W[k + 1] = r, w
    return R, W


def simulate_gyro(
    omega_true: np.ndarray,
    H,
    h: float,
    rng: np.random.Generator,
    model: GyroNoiseModel = "increment",
) -> np.ndarray:
    """Gyro readings ``omega_true + noise`` with independent Gaussian noise per sample.

    ``"increment"``: noise ``sqrt(h) H xi``, the Wiener increment ``H dW`` over
    one step expressed as a rate error of the order quoted for the sensor.
    ``"white"``: noise ``H xi / sqrt(h)``, whose integral over one step
    reproduces ``H dW`` itself.
    """
    omega_true = np.asarray(omega_true, dtype=float)
    H = np.asarray(H, dtype=float)
    if H.ndim == 1:
        H = np.diag(H)
    xi = rng.standard_normal(omega_true.shape)
    if model == "increment":
        scale = np.sqrt(h)
    elif model == "white":
        scale = 1.0 / np.sqrt(h)
    else:
        raise ValueError(f"unknown gyro noise model {model!r}")
    return omega_true + scale * xi @ H.T


def simulate_attitude_measurement(R_true: np.ndarray, F_Z, rng: np.random.Generator) -> np.ndarray:
    """``Z = R_true E`` with ``E ~ M(F_Z)``; accepts one rotation or a stack."""
    R_true = np.asarray(R_true, dtype=float)
    dist = F_Z if isinstance(F_Z, MatrixFisher) else MatrixFisher(F_Z)
    if R_true.ndim == 2:
        return R_true @ dist.sample(rng)
    return R_true @ dist.sample(rng, len(R_true))


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "scenario"
    duration: float = 10.0
    gyro_rate: float = 50.0
    attitude_rate: float = 10.0
    H: np.ndarray = field(default_factory=lambda: np.diag([1.8, 1.6, 2.4]))
    F_Z: np.ndarray = field(default_factory=lambda: np.diag([40.0, 50.0, 35.0]))
    directions: tuple[VonMisesFisherS2, ...] = ()
    F0: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    sigma: float = DEFAULT_SIGMA
    seed: int = 0
    pendulum: PendulumConfig = field(default_factory=PendulumConfig)
    gyro_noise: GyroNoiseModel = "increment"
    filter_H: np.ndarray | None = None

    def __post_init__(self):
        if not (self.duration > 0 and self.gyro_rate > 0 and self.attitude_rate > 0):
            raise ValueError("duration and rates must be positive")
        ratio = self.gyro_rate / self.attitude_rate
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("gyro rate must be an integer multiple of the measurement rate")

    @property
    def h(self) -> float:
        return 1.0 / self.gyro_rate

    @property
    def steps_per_measurement(self) -> int:
        return int(round(self.gyro_rate / self.attitude_rate))

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return replace(self, seed=seed)


def case_one(**overrides) -> ScenarioConfig:
    """Confident but wrong prior: mean attitude off by a half turn."""
    F0 = 100.0 * exp_so3(np.pi * np.array([1.0, 0.0, 0.0]))
    return ScenarioConfig(name="case1", F0=F0, **overrides)


def case_two(**overrides) -> ScenarioConfig:
    """Uniform prior."""
    return ScenarioConfig(name="case2", F0=np.zeros((3, 3)), **overrides)


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    t: np.ndarray
    R_true: np.ndarray
    omega_true: np.ndarray
    omega_meas: np.ndarray
    measurements: dict[int, Measurements]
    first_order: EstimationRun
    unscented: EstimationRun

    def summary(self, t_from: float = 0.5) -> dict:
        return {
            "name": self.config.name,
            "seed": self.config.seed,
            "first_order": self.first_order.steady_state(t_from),
            "unscented": self.unscented.steady_state(t_from),
        }


def simulate_measurements(
    sc: ScenarioConfig, R_true: np.ndarray, rng_att: np.random.Generator, rng_dir: np.random.Generator
) -> dict[int, Measurements]:
    n = len(R_true) - 1
    every = sc.steps_per_measurement
    ks = np.arange(every, n + 1, every)
    sensor = AttitudeSensor(sc.F_Z)
    Z = simulate_attitude_measurement(R_true[ks], sc.F_Z, rng_att) if len(ks) else []
    out = {}
    for idx, k in enumerate(ks):
        dirs = tuple((m.sample(R_true[k], rng_dir), m) for m in sc.directions)
        out[int(k)] = Measurements(attitude=((Z[idx], sensor),), direction=dirs)
    return out


def run_scenario(sc: ScenarioConfig) -> ScenarioResult:
    """Run both filters on one shared realization of truth and sensor noise."""
    gyro_seq, att_seq, dir_seq = np.random.SeedSequence(sc.seed).spawn(3)
    R_true, omega_true = simulate_truth(sc.pendulum, sc.duration, sc.gyro_rate)
    h = sc.h
    omega_meas = simulate_gyro(omega_true, sc.H, h, np.random.default_rng(gyro_seq), sc.gyro_noise)
    meas = simulate_measurements(sc, R_true, np.random.default_rng(att_seq), np.random.default_rng(dir_seq))
    gyro = GyroModel(sc.H if sc.filter_H is None else sc.filter_H)
    initial = MatrixFisher(sc.F0)
    # the gyro sample at t_k drives the step to t_{k+1}
    omegas = omega_meas[:-1]
    runs = {
        mode: run_filter(initial, omegas, h, gyro, meas, mode, sc.sigma, truth=R_true)
        for mode in ("first_order", "unscented")
    }
    t = h * np.arange(len(R_true))
    return ScenarioResult(sc, t, R_true, omega_true, omega_meas, meas, runs["first_order"], runs["unscented"])
