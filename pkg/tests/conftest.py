"""Shared oracles and the acceptance summary."""

import numpy as np
import pytest

from scipy.spatial.transform import Rotation

ACCEPTANCE_LINES: list[str] = []


def euler_313(alpha, beta, gamma):
    """``Rz(alpha) Rx(beta) Rz(gamma)`` for broadcastable angle arrays."""
    ca, sa = np.cos(alpha), np.sin(alpha)
    cb, sb = np.cos(beta), np.sin(beta)
    cg, sg = np.cos(gamma), np.sin(gamma)
    R = np.empty(np.broadcast(alpha, beta, gamma).shape + (3, 3))
    R[..., 0, 0] = ca * cg - sa * cb * sg
    R[..., 0, 1] = -ca * sg - sa * cb * cg
    R[..., 0, 2] = sa * sb
    R[..., 1, 0] = sa * cg + ca * cb * sg
    R[..., 1, 1] = -sa * sg + ca * cb * cg
    R[..., 1, 2] = -ca * sb
    R[..., 2, 0] = sb * sg
    R[..., 2, 1] = sb * cg
    R[..., 2, 2] = cb
    return R


class EulerQuadrature:
    """Brute-force Haar integration over 3-1-3 Euler angles.

    Periodic trapezoid in alpha and gamma, Gauss-Legendre in beta, with the
    Haar weight ``sin(beta) / (8 pi^2)``. Weights sum to one.
    """

    def __init__(self, n_periodic: int = 64, n_beta: int = 48):
        a = 2.0 * np.pi * np.arange(n_periodic) / n_periodic
        x, w = np.polynomial.legendre.leggauss(n_beta)
        b = 0.5 * np.pi * (x + 1.0)
        wb = 0.5 * np.pi * w * np.sin(b)
        A, B, G = np.meshgrid(a, b, a, indexing="ij")
        self.R = euler_313(A, B, G).reshape(-1, 3, 3)
        W = (2.0 * np.pi / n_periodic) ** 2 * np.broadcast_to(wb[None, :, None], A.shape)
        self.w = W.ravel() / (8.0 * np.pi**2)
        self.diag = np.einsum("nii->ni", self.R)

    def expect(self, log_f, g=None):
        """``E_Haar[exp(log_f) g]`` with a stabilizing shift; returns (value, shift)."""
        shift = float(np.max(log_f))
        e = np.exp(log_f - shift)
        if g is None:
            return float(self.w @ e), shift
        return np.tensordot(self.w * e, g, axes=(0, 0)), shift


@pytest.fixture(scope="session")
def euler():
    return EulerQuadrature()


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_rotations(rng, n=None):
    """Haar-uniform rotations from scipy, independent of the package sampler."""
    R = Rotation.random(1 if n is None else n, random_state=rng).as_matrix()
    return R[0] if n is None else R


def random_proper_s(rng, top: float):
    """Random ``s1 >= s2 >= |s3|`` with ``s1 <= top``."""
    s1 = rng.uniform(0.0, top)
    s2 = rng.uniform(0.0, s1)
    s3 = rng.uniform(-s2, s2)
    return np.array([s1, s2, s3])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
