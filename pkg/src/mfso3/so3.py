"""Rotation-group primitives on SO(3).

Rotations are plain ``(3, 3)`` float arrays and vectors are ``(3,)`` arrays.
Quaternions are stored as ``[q1, q2, q3, q4]`` with the scalar part last.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

_SMALL_ANGLE = 1e-6
_NEAR_PI = 1e-4
_SKEW_TOL = 1e-10


def hat(v: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrix with ``hat(v) @ w == np.cross(v, w)``."""
    v = np.asarray(v, dtype=float).reshape(3)
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def vee(S: np.ndarray, tol: float = _SKEW_TOL) -> np.ndarray:
    """Inverse of :func:`hat`.

    Off-diagonal pairs are averaged, so a symmetric perturbation below ``tol``
    is discarded. Larger symmetric parts raise ``ValueError``.
    """
    S = np.asarray(S, dtype=float).reshape(3, 3)
    sym = 0.5 * (S + S.T)
    if np.max(np.abs(sym)) > tol:
        raise ValueError(f"matrix is not skew-symmetric (symmetric part {np.max(np.abs(sym)):.3e})")
    return 0.5 * np.array([S[2, 1] - S[1, 2], S[0, 2] - S[2, 0], S[1, 0] - S[0, 1]])


def exp_so3(v: np.ndarray) -> np.ndarray:
    """Rodrigues' formula: rotation about ``v / |v|`` by angle ``|v|``."""
    v = np.asarray(v, dtype=float).reshape(3)
    theta = float(np.linalg.norm(v))
    K = hat(v)
    if theta < _SMALL_ANGLE:
        t2 = theta * theta
        a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0
        b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0
    else:
        a = np.sin(theta) / theta
        b = (1.0 - np.cos(theta)) / (theta * theta)
    return np.eye(3) + a * K + b * (K @ K)


def _canonical_sign(axis: np.ndarray) -> np.ndarray:
    for c in axis:
        if abs(c) > 1e-12:
            return axis if c > 0 else -axis
    return axis


def log_so3(R: np.ndarray) -> np.ndarray:
    """Rotation vector of ``R`` with norm in ``[0, pi]``.

    At exactly ``pi`` the axis sign is fixed so that its first nonzero
    component is positive.
    """
    R = np.asarray(R, dtype=float).reshape(3, 3)
    w = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    sin_t = float(np.linalg.norm(w))
    cos_t = 0.5 * (np.trace(R) - 1.0)
    theta = float(np.arctan2(sin_t, cos_t))

    if theta < _SMALL_ANGLE:
        return (1.0 + theta * theta / 6.0) * w
    if np.pi - theta > _NEAR_PI:
        return theta / sin_t * w

    # near pi the skew part vanishes; recover the axis from the symmetric part
    B = 0.5 * (R + R.T) - cos_t * np.eye(3)
    B /= 1.0 - cos_t
    idx = int(np.argmax(np.diag(B)))
    axis = B[:, idx] / np.sqrt(max(B[idx, idx], 1e-300))
    axis /= np.linalg.norm(axis)
    proj = float(axis @ w)
    if abs(proj) > 1e-14:
        axis = axis if proj > 0 else -axis
    else:
        axis = _canonical_sign(axis)
    return theta * axis


def rotation_angle(R: np.ndarray) -> np.ndarray:
    """Angle of rotation(s) in ``[0, pi]``; accepts ``(..., 3, 3)``."""
    R = np.asarray(R, dtype=float)
    w = 0.5 * np.stack(
        [R[..., 2, 1] - R[..., 1, 2], R[..., 0, 2] - R[..., 2, 0], R[..., 1, 0] - R[..., 0, 1]],
        axis=-1,
    )
    cos_t = 0.5 * (np.trace(R, axis1=-2, axis2=-1) - 1.0)
    return np.arctan2(np.linalg.norm(w, axis=-1), cos_t)


class ProperSVD(NamedTuple):
    """``F = U @ diag(s) @ V.T`` with ``U, V`` in SO(3) and ``s1 >= s2 >= |s3|``."""

    U: np.ndarray
    s: np.ndarray
    V: np.ndarray

    def matrix(self) -> np.ndarray:
        return (self.U * self.s) @ self.V.T


def proper_svd(F: np.ndarray) -> ProperSVD:
    """Singular value decomposition with both frames forced into SO(3).

    The sign of ``det(U') det(V')`` is absorbed into the third singular
    value, which may therefore be negative.
    """
    F = np.asarray(F, dtype=float).reshape(3, 3)
    if not np.all(np.isfinite(F)):
        raise ValueError("matrix has non-finite entries")
    if not np.any(F):
        return ProperSVD(np.eye(3), np.zeros(3), np.eye(3))
    Up, sp, Vh = np.linalg.svd(F)
    Vp = Vh.T
    du = np.sign(np.linalg.det(Up))
    dv = np.sign(np.linalg.det(Vp))
    U = Up.copy()
    V = Vp.copy()
    U[:, 2] *= du
    V[:, 2] *= dv
    s = sp.copy()
    s[2] *= du * dv
    return ProperSVD(U, s, V)


def quat_to_rotation(x: np.ndarray) -> np.ndarray:
    """Rotation matrix of unit quaternion(s) ``[q, q4]``; accepts ``(..., 4)``."""
    x = np.asarray(x, dtype=float)
    q = x[..., :3]
    q4 = x[..., 3]
    qq = np.einsum("...i,...i->...", q, q)
    R = np.einsum("...i,...j->...ij", q, q) * 2.0
    diag = q4 * q4 - qq
    for i in range(3):
        R[..., i, i] += diag
    R[..., 0, 1] -= 2.0 * q4 * q[..., 2]
    R[..., 1, 0] += 2.0 * q4 * q[..., 2]
    R[..., 0, 2] += 2.0 * q4 * q[..., 1]
    R[..., 2, 0] -= 2.0 * q4 * q[..., 1]
    R[..., 1, 2] -= 2.0 * q4 * q[..., 0]
    R[..., 2, 1] += 2.0 * q4 * q[..., 0]
    return R


def sample_uniform(rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Haar-uniform rotation(s) from normalized Gaussian quaternions."""
    shape = (4,) if size is None else (size, 4)
    x = rng.standard_normal(shape)
    x /= np.linalg.norm(x, axis=-1, keepdims=True)
    return quat_to_rotation(x)


def is_rotation(R: np.ndarray, tol: float = 1e-12) -> bool:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        return False
    return bool(
        np.linalg.norm(R.T @ R - np.eye(3)) <= tol and abs(np.linalg.det(R) - 1.0) <= tol
    )
