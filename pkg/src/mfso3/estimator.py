"""Bayesian attitude filters built on the matrix Fisher distribution.

Both filters share the exact conjugate measurement update. They differ in
how the first moment is carried through one gyro step: analytically, or by
transporting seven weighted sigma points. In both cases the propagated
distribution is recovered by moment matching.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .distribution import CYCLIC, MatrixFisher
from .fitting import fit_from_moment
from .so3 import exp_so3, rotation_angle

DEFAULT_SIGMA = 0.9


class SigmaOutOfRange(ValueError):
    """The sigma-point spread parameter lies outside its admissible interval."""


class FilterStepError(RuntimeError):
    """A propagation or correction failed; carries the step index and time."""

    def __init__(self, k: int, t: float, cause: Exception):
        super().__init__(f"filter step k={k} (t={t:.4f} s): {type(cause).__name__}: {cause}")
        self.k = k
        self.t = t


@dataclass(frozen=True)
class GyroModel:
    """Angular-velocity noise ``H dW`` in the attitude kinematics; ``H`` is diagonal."""

    H: np.ndarray

    def __post_init__(self):
        H = np.array(self.H, dtype=float)
        if H.ndim == 1:
            H = np.diag(H)
        if H.shape != (3, 3) or np.any(H != np.diag(np.diag(H))):
            raise ValueError("H must be a diagonal 3x3 matrix")
        H.setflags(write=False)
        object.__setattr__(self, "H", H)

    @property
    def G(self) -> np.ndarray:
        return self.H @ self.H.T

    def diffusion_factor(self, h: float) -> np.ndarray:
        """``I + (h/2)(G - tr(G) I)``: the first-order effect of noise on ``E[R]``."""
        G = self.G
        trG = float(np.trace(G))
        if h * trG >= 2.0 / 3.0:
            raise ValueError(f"step too large for the diffusion model: h tr(G) = {h * trG:.3g} >= 2/3")
        return np.eye(3) + 0.5 * h * (G - trG * np.eye(3))


@dataclass(frozen=True)
class AttitudeSensor:
    """Full-attitude sensor with ``R^T Z ~ M(F_Z)``."""

    F_Z: np.ndarray

    def __post_init__(self):
        F = np.array(self.F_Z, dtype=float).reshape(3, 3)
        F.setflags(write=False)
        object.__setattr__(self, "F_Z", F)


@dataclass(frozen=True)
class Measurements:
    """Measurements available at one instant."""

    attitude: tuple = ()
    direction: tuple = ()

    def __bool__(self) -> bool:
        return bool(self.attitude or self.direction)


@dataclass(frozen=True)
class UnscentedSet:
    """Seven sigma rotations and weights reproducing the first moment of ``M(F)``.

    Order: the mean attitude, then ``R_i(+theta_i), R_i(-theta_i)`` for
    ``i = 1, 2, 3``.
    """

    rotations: np.ndarray
    weights: np.ndarray
    angles: np.ndarray
    sigma: float

    def moment(self) -> np.ndarray:
        return np.einsum("n,nij->ij", self.weights, self.rotations)

    def transported(self, A: np.ndarray) -> "UnscentedSet":
        """Every sigma point right-multiplied by ``A``."""
        return UnscentedSet(self.rotations @ A, self.weights, self.angles, self.sigma)


@dataclass(frozen=True)
class FilterState:
    k: int
    dist: MatrixFisher
    h: float

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("step size must be positive")


def sigma_lower_bound(s) -> float:
    """Infimum of admissible ``sigma`` for proper singular values ``s``.

    With ``K = 2 s1 + s2 - s3``, the bound ``(K - m)/(K + m)`` keeps
    ``cos(theta_i) > -1`` on the ``m = s_j + s_k >= 1`` branch and
    ``(K - 1)/(K + 1)`` does so on the other. The result is clipped at 0, so
    any ``sigma`` in ``(0, 1)`` is admissible for the uniform distribution.
    """
    s = np.asarray(s, dtype=float)
    K = 2.0 * s[0] + s[1] - s[2]
    lo = 0.0
    for i, j, k in CYCLIC:
        m = s[j] + s[k]
        width = max(m, 1.0)
        lo = max(lo, (K - width) / (K + width))
    return lo


def _cos_angles(dist: MatrixFisher, sigma: float) -> np.ndarray:
    s = dist.s
    log_cbar = np.log(dist.info.c_bar)
    cos = np.empty(3)
    one_minus = np.empty(3)
    for i, j, k in CYCLIC:
        m = s[j] + s[k]
        if m >= 1.0:
            one_minus[i] = -(1.0 - sigma) * log_cbar / m
            cos[i] = 1.0 - one_minus[i]
        else:
            # pi/3 at m = 0, continuous with the other branch at m = 1
            cos[i] = (sigma + (1.0 - sigma) * (m + log_cbar) - 0.5) * m + 0.5
            one_minus[i] = 1.0 - cos[i]
    return cos, one_minus


def unscented_transform(dist: MatrixFisher, sigma: float = DEFAULT_SIGMA) -> UnscentedSet:
    """Sigma points along the principal axes whose weighted mean equals ``E[R]``."""
    lo = sigma_lower_bound(dist.s)
    if not lo < sigma < 1.0:
        raise SigmaOutOfRange(f"sigma={sigma} outside the admissible interval ({lo:.6g}, 1)")
    cos, one_minus = _cos_angles(dist, sigma)
    if np.any(one_minus <= 0.0) or np.any(cos <= -1.0):
        raise SigmaOutOfRange(f"sigma={sigma} gives sigma-point angles outside (0, pi): cos={cos}")
    angles = np.arccos(np.clip(cos, -1.0, 1.0))
    g = dist.info.grad_bar / dist.info.c_bar
    w = np.empty(3)
    for i, j, k in CYCLIC:
        w[i] = (g[i] - g[j] - g[k]) / (4.0 * one_minus[i])
    weights = np.concatenate([[1.0 - 2.0 * w.sum()], np.repeat(w, 2)])
    U, V = dist.U, dist.V
    rots = [U @ V.T]
    for i in range(3):
        e = np.zeros(3)
        e[i] = angles[i]
        for sign in (1.0, -1.0):
            rots.append(U @ exp_so3(sign * e) @ V.T)
    return UnscentedSet(np.array(rots), weights, angles, float(sigma))


def inverse_unscented(sigma_set: UnscentedSet, s0=None) -> MatrixFisher:
    """Matrix Fisher distribution matching the weighted first moment of the set."""
    return fit_from_moment(sigma_set.moment(), s0=s0)


def propagate_first_order(state: FilterState, omega, gyro: GyroModel) -> FilterState:
    """One gyro step of the analytic moment propagation, then moment matching."""
    h = state.h
    M = state.dist.first_moment() @ gyro.diffusion_factor(h) @ exp_so3(h * np.asarray(omega, dtype=float))
    dist = fit_from_moment(M)
    return FilterState(state.k + 1, dist, h)


def propagate_unscented(
    state: FilterState, omega, gyro: GyroModel, sigma: float = DEFAULT_SIGMA
) -> FilterState:
    """One gyro step by transporting sigma points, then applying the noise factor."""
    h = state.h
    sigma_set = unscented_transform(state.dist, sigma).transported(exp_so3(h * np.asarray(omega, dtype=float)))
    M = sigma_set.moment() @ gyro.diffusion_factor(h)
    dist = fit_from_moment(M)
    return FilterState(state.k + 1, dist, h)


def posterior_parameter(F, attitude: Sequence = (), direction: Sequence = ()) -> np.ndarray:
    """``F + sum Z F_Z^T + sum b B a z^T``."""
    F = np.array(F, dtype=float)
    for Z, sensor in attitude:
        F = F + np.asarray(Z) @ sensor.F_Z.T
    for z, sensor in direction:
        F = F + sensor.b * np.outer(sensor.B @ sensor.a, np.asarray(z, dtype=float))
    return F


def correct(state: FilterState, attitude: Sequence = (), direction: Sequence = ()) -> FilterState:
    """Exact conjugate update with independent attitude and direction measurements."""
    if not attitude and not direction:
        return state
    F = posterior_parameter(state.dist.F, attitude, direction)
    return FilterState(state.k, MatrixFisher(F), state.h)


@dataclass
class EstimationRun:
    """Per-step record of a filter run; row ``k`` is the posterior at ``t[k]``."""

    t: np.ndarray
    F: np.ndarray
    s: np.ndarray
    mean: np.ndarray
    error_deg: np.ndarray
    mode: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def uncertainty(self) -> np.ndarray:
        """``1/(s2+s3), 1/(s3+s1), 1/(s1+s2)`` per step."""
        s = self.s
        sums = np.stack([s[:, 1] + s[:, 2], s[:, 2] + s[:, 0], s[:, 0] + s[:, 1]], axis=1)
        with np.errstate(divide="ignore"):
            return np.where(sums > 0, 1.0 / np.where(sums > 0, sums, 1.0), np.inf)

    def steady_state(self, t_from: float = 0.5) -> dict:
        """Mean error and mean ``s_j + s_k`` after ``t_from``."""
        sel = self.t > t_from
        s = self.s[sel]
        return {
            "mean_error_deg": float(np.nanmean(self.error_deg[sel])),
            "s2_plus_s3": float(np.mean(s[:, 1] + s[:, 2])),
            "s3_plus_s1": float(np.mean(s[:, 2] + s[:, 0])),
            "s1_plus_s2": float(np.mean(s[:, 0] + s[:, 1])),
        }


Mode = Literal["first_order", "unscented"]


def run_filter(
    initial: MatrixFisher,
    omegas: np.ndarray,
    h: float,
    gyro: GyroModel,
    measurements: dict[int, Measurements],
    mode: Mode = "first_order",
    sigma: float = DEFAULT_SIGMA,
    truth: np.ndarray | None = None,
) -> EstimationRun:
    """Alternate correction and propagation over ``len(omegas)`` gyro steps.

    ``measurements[k]`` is applied at ``t = k h`` before propagating with
    ``omegas[k]``, which is held fixed over the step. ``truth`` (shape
    ``(len(omegas) + 1, 3, 3)``) enables the attitude-error record.
    """
    omegas = np.asarray(omegas, dtype=float)
    n = len(omegas)
    if mode not in ("first_order", "unscented"):
        raise ValueError(f"unknown filter mode {mode!r}")
    state = FilterState(0, initial, h)
    F = np.empty((n + 1, 3, 3))
    s = np.empty((n + 1, 3))
    mean = np.empty((n + 1, 3, 3))
    for k in range(n + 1):
        meas = measurements.get(k)
        try:
            if meas:
                state = correct(state, meas.attitude, meas.direction)
            F[k] = state.dist.F
            s[k] = state.dist.s
            mean[k] = state.dist.mean_attitude()
            if k == n:
                break
            if mode == "first_order":
                state = propagate_first_order(state, omegas[k], gyro)
            else:
                state = propagate_unscented(state, omegas[k], gyro, sigma)
        except (ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
            raise FilterStepError(k, k * h, exc) from exc
    t = h * np.arange(n + 1)
    if truth is not None:
        truth = np.asarray(truth, dtype=float)
        err = np.rad2deg(rotation_angle(np.einsum("nji,njk->nik", truth, mean)))
    else:
        err = np.full(n + 1, np.nan)
    return EstimationRun(t, F, s, mean, err, mode)

