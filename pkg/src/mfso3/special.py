"""Modified Bessel functions of orders 0 and 1 and Gauss-Legendre rules.

Power series are used for ``|x| <= 15`` and the large-argument asymptotic
expansion beyond that. Every function accepts scalars or arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

SERIES_LIMIT = 15.0
_SERIES_TERMS = 60
_ASYMPTOTIC_TERMS = 28
_OVERFLOW_LIMIT = 700.0


def _series_pair(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # sum_n (x/2)^(2n+nu) / (n! (n+nu)!) for nu = 0, 1
    q = 0.25 * x * x
    t0 = np.ones_like(x)
    t1 = 0.5 * x
    s0 = t0.copy()
    s1 = t1.copy()
    for n in range(1, _SERIES_TERMS):
        t0 = t0 * (q / (n * n))
        t1 = t1 * (q / (n * (n + 1)))
        s0 += t0
        s1 += t1
        # terms decay monotonically once n exceeds x / 2
        if n % 8 == 0 and np.all(t0 <= 1e-17 * s0):
            break
    return s0, s1


def _asymptotic_pair(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # sqrt(2 pi x) e^{-x} I_nu(x) for nu = 0, 1 and their difference, x > SERIES_LIMIT
    inv = 1.0 / (8.0 * x)
    t0 = np.ones_like(x)
    t1 = np.ones_like(x)
    a0 = np.ones_like(x)
    a1 = np.ones_like(x)
    diff = np.zeros_like(x)
    # terms shrink monotonically for k < 2x, which covers every term used here
    for k in range(1, _ASYMPTOTIC_TERMS):
        odd = (2 * k - 1) ** 2
        t0 = t0 * (odd / k) * inv
        t1 = t1 * ((odd - 4.0) / k) * inv
        a0 += t0
        a1 += t1
        diff += t0 - t1
        if k % 4 == 0 and np.max(np.abs(t0)) < 1e-17:
            break
    return a0, a1, diff


def bessel_scaled_pair(x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``e^{-x} I0(x)``, ``e^{-x} I1(x)`` and their difference for ``x >= 0``.

    The difference is formed termwise in the asymptotic regime, so it keeps
    full relative accuracy even though both functions agree to ``O(1/x)``.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("argument must be non-negative")
    i0 = np.empty_like(x)
    i1 = np.empty_like(x)
    diff = np.empty_like(x)
    small = x <= SERIES_LIMIT
    if np.all(small):
        s0, s1 = _series_pair(x)
        e = np.exp(-x)
        return e * s0, e * s1, e * (s0 - s1)
    if np.any(small):
        xs = x[small]
        s0, s1 = _series_pair(xs)
        e = np.exp(-xs)
        i0[small] = e * s0
        i1[small] = e * s1
        diff[small] = e * (s0 - s1)
    big = ~small
    xb = x[big]
    a0, a1, d = _asymptotic_pair(xb)
    root = 1.0 / np.sqrt(2.0 * np.pi * xb)
    i0[big] = a0 * root
    i1[big] = a1 * root
    diff[big] = d * root
    return i0, i1, diff


def _finish(out: np.ndarray):
    return out[()] if out.ndim == 0 else out


def bessel_i0_scaled(x):
    """``exp(-|x|) * I0(x)``, finite for any finite argument."""
    x = np.asarray(x, dtype=float)
    return _finish(bessel_scaled_pair(np.abs(x))[0])


def bessel_i1_scaled(x):
    """``exp(-|x|) * I1(x)``, odd in ``x``."""
    x = np.asarray(x, dtype=float)
    i1 = bessel_scaled_pair(np.abs(x))[1]
    return _finish(np.where(x < 0, -i1, i1))


def bessel_i0_minus_i1_scaled(x):
    """``exp(-x) * (I0(x) - I1(x))`` for ``x >= 0`` without cancellation."""
    return _finish(bessel_scaled_pair(x)[2])


def _unscaled(x, order: int):
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > _OVERFLOW_LIMIT):
        raise OverflowError("argument too large for unscaled Bessel function; use the scaled form")
    scaled = bessel_i0_scaled(x) if order == 0 else bessel_i1_scaled(x)
    return np.exp(np.abs(x)) * scaled


def bessel_i0(x):
    """Modified Bessel function of the first kind, order 0."""
    return _unscaled(x, 0)


def bessel_i1(x):
    """Modified Bessel function of the first kind, order 1."""
    return _unscaled(x, 1)


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and positive weights on ``[-1, 1]``; weights sum to 2."""

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return len(self.nodes)

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Contract sampled integrand values (last axis = nodes) with the weights."""
        return np.asarray(values) @ self.weights

    def mapped(self, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and weights transported to ``[a, b]``."""
        half = 0.5 * (b - a)
        return a + half * (self.nodes + 1.0), half * self.weights


@lru_cache(maxsize=64)
def gauss_legendre(n: int) -> QuadratureRule:
    """``n``-point Gauss-Legendre rule, exact for polynomials of degree ``2n - 1``."""
    if not isinstance(n, (int, np.integer)) or not 2 <= n <= 512:
        raise ValueError(f"node count must be an integer in [2, 512], got {n!r}")
    nodes, weights = np.polynomial.legendre.leggauss(int(n))
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(nodes, weights)


@lru_cache(maxsize=64)
def graded_rule(n: int = 20, levels: int = 14, ratio: float = 0.25) -> QuadratureRule:
    """Composite Gauss-Legendre rule graded geometrically toward both ends.

    Panel breakpoints sit at ``+-(1 - ratio**k)`` for ``k = 0..levels``, so
    integrands with boundary layers of width down to ``ratio**levels`` are
    resolved with ``n`` nodes per panel.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie in (0, 1)")
    base = gauss_legendre(n)
    inner = 1.0 - ratio ** np.arange(levels + 1)
    edges = np.concatenate([-inner[::-1], inner[1:], [1.0]])
    edges = np.concatenate([[-1.0], edges])
    edges = np.unique(edges)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        x, w = base.mapped(a, b)
        nodes.append(x)
        weights.append(w)
    nodes = np.concatenate(nodes)
    weights = np.concatenate(weights)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(nodes, weights)
