"""Estimating the matrix parameter from a first moment or from samples.

The moment conditions ``E[Q_ii] = d_i`` are solved for the proper singular
values by Newton's method on the exponentially scaled system
``grad c_bar / c_bar = d - 1``. Its Jacobian is the covariance of
``diag(Q)``, which is positive definite, so the solve is well posed for every
``d`` strictly inside the feasible tetrahedron.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .distribution import MatrixFisher, NormalizingInfo, normalizer
from .so3 import proper_svd
from .special import QuadratureRule

FEASIBILITY_MARGIN = 1e-9


class InfeasibleMoment(ValueError):
    """The moment lies on or outside the boundary of the attainable set."""


class NoConvergence(RuntimeError):
    """Newton's method did not reach the requested residual."""


class NewtonResult(NamedTuple):
    s: np.ndarray
    iterations: int
    residual: float
    info: NormalizingInfo | None = None


class FitInfo(NamedTuple):
    s: np.ndarray
    d: np.ndarray
    iterations: int
    residual: float
    tied: bool


def _canonical(s: np.ndarray):
    # permutation and even sign flip taking s to s1 >= s2 >= |s3|
    order = np.argsort(-np.abs(s), kind="stable")
    a = s[order]
    delta = np.where(a < 0, -1.0, 1.0)
    if np.prod(delta) < 0:
        delta[2] = -delta[2]
    return order, delta, delta * a


def diag_moment_stats(s, rule: QuadratureRule | None = None, return_info: bool = False):
    """``E[diag Q] - 1`` and ``Cov[diag Q]`` for ``Q ~ M(diag s)``, any real ``s``.

    The matrix Fisher family is invariant under permuting the diagonal and
    flipping the sign of two entries, which maps ``s`` onto the ordered cone
    where the scaled integrals are valid. ``return_info`` appends the
    normalizing information of the reordered values.
    """
    s = np.asarray(s, dtype=float).reshape(3)
    order, delta, sc = _canonical(s)
    info = normalizer(sc, rule)
    g = info.grad_bar / info.c_bar
    cov = info.hess_bar / info.c_bar - np.outer(g, g)
    # E[Q_ii] - 1 = g_i; a sign flip maps 1 + g to -(1 + g)
    shifted_c = np.where(delta > 0, g, -2.0 - g)
    shifted = np.empty(3)
    shifted[order] = shifted_c
    cov_c = delta[:, None] * cov * delta[None, :]
    out = np.empty((3, 3))
    out[np.ix_(order, order)] = cov_c
    if return_info:
        return shifted, out, info
    return shifted, out


def initial_guess(d: np.ndarray) -> np.ndarray:
    """Starting point: zero for diffuse targets, high-concentration inverse otherwise.

    For concentrated distributions ``1 - d_i`` is close to
    ``(1/(s_i+s_j) + 1/(s_i+s_k)) / 2``, which inverts in closed form.
    """
    d = np.asarray(d, dtype=float)
    if d[0] <= 0.5:
        return np.zeros(3)
    x = 1.0 - d
    v = np.array([x[1] + x[2] - x[0], x[2] + x[0] - x[1], x[0] + x[1] - x[2]])
    if np.any(v <= 0.0):
        return np.zeros(3)
    total = 0.5 * np.sum(1.0 / v)
    return total - 1.0 / v


def newton_solve(
    d,
    rule: QuadratureRule | None = None,
    tol: float = 1e-10,
    max_iter: int = 100,
    s0=None,
) -> NewtonResult:
    """Solve ``E[diag Q] = d`` for ``s`` with a halving line search on the residual norm."""
    d = np.asarray(d, dtype=float).reshape(3)
    target = d - 1.0
    s = initial_guess(d) if s0 is None else np.asarray(s0, dtype=float).copy()
    m, J, info = diag_moment_stats(s, rule, return_info=True)
    f = m - target
    res = float(np.max(np.abs(f)))
    for it in range(max_iter + 1):
        if res < tol:
            step = np.linalg.solve(J, f)
            if np.linalg.norm(step) > 1e-13 * max(1.0, float(np.linalg.norm(s))):
                # one polishing step, kept only if it helps
                s_new = s - step
                m_new, _, info_new = diag_moment_stats(s_new, rule, return_info=True)
                res_new = float(np.max(np.abs(m_new - target)))
                if res_new < res:
                    s, res, info = s_new, res_new, info_new
            return NewtonResult(s, it, res, info)
        if it == max_iter:
            break
        step = np.linalg.solve(J, f)
        norm = float(np.linalg.norm(f))
        alpha = 1.0
        for _ in range(60):
            s_try = s - alpha * step
            m_try, J_try, info_try = diag_moment_stats(s_try, rule, return_info=True)
            f_try = m_try - target
            if np.linalg.norm(f_try) < norm:
                break
            alpha *= 0.5
        else:
            raise NoConvergence(f"line search stalled at s={s}, residual {res:.3e}")
        s, J, f, info = s_try, J_try, f_try, info_try
        res = float(np.max(np.abs(f)))
    raise NoConvergence(f"no convergence after {max_iter} iterations, residual {res:.3e}")


def _has_ties(s: np.ndarray, rtol: float = 1e-8) -> bool:
    scale = rtol * max(1.0, float(np.max(np.abs(s))))
    return bool(s[0] - s[1] <= scale or s[1] - abs(s[2]) <= scale)


def fit_from_moment(
    M,
    rule: QuadratureRule | None = None,
    tol: float = 1e-10,
    max_iter: int = 100,
    full_output: bool = False,
    s0=None,
):
    """Matrix Fisher distribution whose first moment equals ``M``.

    ``s0`` optionally warm-starts Newton's method, e.g. from the previous
    filter step. With ``full_output=True`` also returns a :class:`FitInfo`
    carrying the iteration count, final residual and a flag for tied singular
    values, where the maximizer of the likelihood is not unique.
    """
    M = np.asarray(M, dtype=float).reshape(3, 3)
    U, d, V = proper_svd(M)
    edge = d[0] + d[1] - d[2]
    if edge >= 1.0 - FEASIBILITY_MARGIN:
        raise InfeasibleMoment(
            f"moment singular values {d} are not strictly inside the attainable set "
            f"(d1 + d2 - d3 = {edge:.12g} must be below 1)"
        )
    sol = newton_solve(d, rule, tol, max_iter, s0)
    s = sol.s
    # the solution inherits the ordering of d; clean rounding-level violations
    ordered = np.array([max(s[0], s[1]), min(s[0], s[1]), s[2]])
    if abs(ordered[2]) > ordered[1]:
        ordered[2] = np.copysign(ordered[1], ordered[2])
    info = sol.info if np.array_equal(ordered, s) else None
    s = ordered
    dist = MatrixFisher.from_parts(U, s, V, info, rule)
    if not full_output:
        return dist
    return dist, FitInfo(s, d, sol.iterations, sol.residual, _has_ties(s))


def fit_from_samples(samples, rule: QuadratureRule | None = None, **kwargs):
    """Maximum likelihood estimate from rotations of shape ``(N, 3, 3)``."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 3 or samples.shape[1:] != (3, 3) or len(samples) == 0:
        raise ValueError("samples must have shape (N, 3, 3) with N >= 1")
    return fit_from_moment(samples.mean(axis=0), rule, **kwargs)
