"""The matrix Fisher distribution on SO(3).

A random rotation ``R`` has density ``exp(tr(F^T R)) / c(F)`` with respect to
the Haar measure of total mass one. Everything that touches the normalizing
constant works with the exponentially scaled constant
``c_bar(S) = exp(-tr S) c(S)`` and its derivatives, so concentrated
distributions (singular values in the thousands) never overflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .so3 import ProperSVD, proper_svd, quat_to_rotation
from .special import (
    QuadratureRule,
    bessel_i0_minus_i1_scaled,
    bessel_i0_scaled,
    bessel_scaled_pair,
    graded_rule,
)

# circular shifts of (1, 2, 3), zero-based
CYCLIC = ((0, 1, 2), (1, 2, 0), (2, 0, 1))


def default_rule(s=None) -> QuadratureRule:
    """Graded rule fine enough for singular values ``s``.

    The integrands have boundary layers of width about ``1 / (s1 + s2)`` at
    both ends, so the number of geometric refinement levels grows with the
    base-4 logarithm of the concentration. Without ``s`` the finest rule is
    returned.
    """
    if s is None:
        return graded_rule()
    scale = 1.0 + max(float(s[0] + s[1]), 0.0)
    levels = int(np.clip(np.ceil(np.log(scale) / np.log(4.0)) + 2, 1, 14))
    return graded_rule(levels=levels)


@dataclass(frozen=True)
class NormalizingInfo:
    """Scaled normalizing constant and its first two derivatives.

    ``grad_bar[i]`` and ``hess_bar[i, j]`` are derivatives of ``c_bar`` with
    respect to the proper singular values.
    """

    log_c: float
    c_bar: float
    grad_bar: np.ndarray
    hess_bar: np.ndarray

    @property
    def moment_diag(self) -> np.ndarray:
        """``E[Q_ii]`` for ``Q ~ M(S)``."""
        return 1.0 + self.grad_bar / self.c_bar


def check_ordering(s, tol: float = 1e-12) -> np.ndarray:
    s = np.asarray(s, dtype=float).reshape(3)
    scale = tol * max(1.0, float(np.max(np.abs(s))))
    if not (s[0] + scale >= s[1] and s[1] + scale >= abs(s[2])):
        raise ValueError(f"singular values must satisfy s1 >= s2 >= |s3|, got {s}")
    return s


def _integrands(s: np.ndarray, u: np.ndarray):
    """Integrand pieces for the three circular shifts, stacked along axis 0.

    Row ``r`` carries ``s[CYCLIC[r][0]]`` in the exponential factor. Returns
    the scaled constant integrand and the mixed-derivative integrand.
    """
    idx = np.array(CYCLIC)
    si, sj, sk = s[idx[:, 0]], s[idx[:, 1]], s[idx[:, 2]]
    A = 0.5 * (sj - sk)[:, None] * (1.0 - u)
    B = 0.5 * (sj + sk)[:, None] * (1.0 + u)
    m = si + np.minimum(sj, sk)
    E = np.exp(m[:, None] * (u - 1.0))
    n = A.size
    i0, i1, d = bessel_scaled_pair(np.concatenate([np.abs(A).ravel(), B.ravel()]))
    i0a, i0b = i0[:n].reshape(A.shape), i0[n:].reshape(B.shape)
    # scaled I1(A) - I0(A) for signed A without cancellation
    i1_minus_i0_a = np.where(A >= 0, -d[:n].reshape(A.shape), -(i0a + i1[:n].reshape(A.shape)))
    base = 0.5 * i0a * i0b * E
    # d/ds_j of the scaled product, by dI0_bar/dx = I1_bar - sgn(x) I0_bar
    dj = 0.5 * (1.0 - u) * i0b * i1_minus_i0_a - 0.5 * (1.0 + u) * i0a * d[n:].reshape(B.shape)
    mixed = 0.5 * (u - 1.0) * dj * E
    return base, mixed


def scaled_constant(s, perm: int = 0, rule: QuadratureRule | None = None) -> float:
    """``c_bar(S)`` from the one-dimensional integral for circular shift ``perm``."""
    s = check_ordering(s)
    rule = rule or default_rule(s)
    base, _ = _integrands(s, rule.nodes)
    return float(rule.integrate(base[perm]))


def normalizer(s, rule: QuadratureRule | None = None) -> NormalizingInfo:
    """Scaled normalizing constant, gradient and Hessian for proper singular values ``s``."""
    s = check_ordering(s)
    rule = rule or default_rule(s)
    u = rule.nodes
    base, mixed = _integrands(s, u)
    w = rule.weights
    c_bar = float(base[0] @ w)
    um1 = u - 1.0
    diag = (base * um1) @ w
    second = (base * (um1 * um1)) @ w
    cross = mixed @ w
    grad = diag
    hess = np.diag(second)
    for r, (i, j, _) in enumerate(CYCLIC):
        hess[i, j] = hess[j, i] = cross[r]
    return NormalizingInfo(
        log_c=float(np.sum(s) + np.log(c_bar)),
        c_bar=c_bar,
        grad_bar=grad,
        hess_bar=hess,
    )


def bingham_parameter(s) -> np.ndarray:
    """Diagonal of the 4x4 Bingham matrix with ``tr(S Q(x)) = x^T B x``."""
    s = np.asarray(s, dtype=float).reshape(3)
    t = float(np.sum(s))
    return np.concatenate([2.0 * s - t, [t]])


def _acg_concentration(lam: np.ndarray) -> float:
    # root of sum 1 / (b + 2 lam) = 1 on (0, q]; lam >= 0 with min 0
    q = lam.size
    lo, hi = 0.0, float(q)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.sum(1.0 / (mid + 2.0 * lam)) > 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15 * hi:
            break
    return 0.5 * (lo + hi)


def sample_bingham(bdiag: np.ndarray, rng: np.random.Generator, size: int) -> tuple[np.ndarray, float]:
    """Draw unit quaternions with density proportional to ``exp(x^T diag(bdiag) x)``.

    Angular central Gaussian envelope with rejection. Returns the samples and
    the empirical acceptance rate.
    """
    lam = np.max(bdiag) - bdiag
    q = lam.size
    b = _acg_concentration(lam)
    omega = 1.0 + 2.0 * lam / b
    log_const = 0.5 * (q - b) + 0.5 * q * np.log(b / q)
    out = np.empty((size, q))
    filled = 0
    drawn = 0
    accepted = 0
    rate = 1.0
    while filled < size:
        batch = int(min(max(64, 1.2 * (size - filled) / max(rate, 1e-3)), 4_000_000))
        y = rng.standard_normal((batch, q)) / np.sqrt(omega)
        x = y / np.linalg.norm(y, axis=1, keepdims=True)
        x2 = x * x
        log_ratio = -(x2 @ lam) + 0.5 * q * np.log(x2 @ omega) + log_const
        keep = np.log(rng.random(batch)) < log_ratio
        drawn += batch
        accepted += int(np.count_nonzero(keep))
        rate = accepted / drawn
        take = x[keep][: size - filled]
        out[filled : filled + len(take)] = take
        filled += len(take)
    return out, accepted / drawn


class MatrixFisher:
    """Matrix Fisher distribution ``M(F)``.

    The proper SVD and the normalizing information are computed once at
    construction; instances are treated as immutable.
    """

    __slots__ = ("F", "svd", "info")

    def __init__(self, F, rule: QuadratureRule | None = None):
        F = np.array(F, dtype=float).reshape(3, 3)
        F.setflags(write=False)
        self.F = F
        self.svd: ProperSVD = proper_svd(F)
        self.info: NormalizingInfo = normalizer(self.svd.s, rule)

    @classmethod
    def from_parts(
        cls, U, s, V, info: NormalizingInfo | None = None, rule: QuadratureRule | None = None
    ) -> "MatrixFisher":
        """Build from a known proper SVD, keeping the given frames.

        ``info`` may carry a normalizer already evaluated at ``s``.
        """
        U = np.asarray(U, dtype=float)
        V = np.asarray(V, dtype=float)
        s = check_ordering(s)
        self = cls.__new__(cls)
        F = (U * s) @ V.T
        F.setflags(write=False)
        self.F = F
        self.svd = ProperSVD(U, s, V)
        self.info = info if info is not None else normalizer(s, rule)
        return self

    def __repr__(self) -> str:
        return f"MatrixFisher(s={np.array2string(self.s, precision=6)})"

    @property
    def U(self) -> np.ndarray:
        return self.svd.U

    @property
    def V(self) -> np.ndarray:
        return self.svd.V

    @property
    def s(self) -> np.ndarray:
        return self.svd.s

    @property
    def log_c(self) -> float:
        return self.info.log_c

    @property
    def is_degenerate(self) -> bool:
        """True when every rotation is a mode (``s1 + s2 == 0``)."""
        return bool(self.s[0] + self.s[1] <= 0.0)

    def log_pdf(self, R) -> np.ndarray | float:
        """Log density relative to the normalized Haar measure; accepts ``(..., 3, 3)``."""
        R = np.asarray(R, dtype=float)
        tr = np.einsum("ij,...ij->...", self.F, R)
        return tr - np.sum(self.s) - np.log(self.info.c_bar)

    def pdf(self, R):
        return np.exp(self.log_pdf(R))

    def first_moment(self) -> np.ndarray:
        """``E[R] = U diag(E[Q_ii]) V^T``."""
        return (self.U * self.info.moment_diag) @ self.V.T

    def second_moments(self) -> np.ndarray:
        """Matrix of ``E[Q_ii Q_jj]`` for ``Q = U^T R V``; all other products vanish."""
        g = self.info.grad_bar
        return 1.0 + (g[:, None] + g[None, :] + self.info.hess_bar) / self.info.c_bar

    def mean_attitude(self) -> np.ndarray:
        """``U V^T``: the mode and the minimum mean-square-error rotation."""
        return self.U @ self.V.T

    def principal_log_pdf(self, axis: int, theta) -> np.ndarray:
        """Log density along rotations of the mean about principal axis ``axis`` (1-based)."""
        i, j, k = CYCLIC[axis - 1]
        s = self.s
        theta = np.asarray(theta, dtype=float)
        return s[i] + (s[j] + s[k]) * np.cos(theta) - self.log_c

    def sample(self, rng: np.random.Generator, size: int | None = None, return_rate: bool = False):
        """Exact draws via the quaternion Bingham representation."""
        n = 1 if size is None else int(size)
        x, rate = sample_bingham(bingham_parameter(self.s), rng, n)
        Q = quat_to_rotation(x)
        R = self.U @ Q @ self.V.T
        out = R[0] if size is None else R
        return (out, rate) if return_rate else out

    def marginal_axis_density(self, axis: int, r) -> np.ndarray | float:
        """Density of the ``axis``-th column of ``R`` (1-based), relative to uniform on S^2."""
        i, j, k = CYCLIC[axis - 1]
        r = np.asarray(r, dtype=float)
        F = self.F
        fi, fj, fk = F[:, i], F[:, j], F[:, k]
        rj = r @ fj
        rk = r @ fk
        a = fj @ fj - rj * rj
        c = fk @ fk - rk * rk
        b = fj @ fk - rj * rk
        # eigenvalues of the projected 2x2 Gram matrix
        half_tr = 0.5 * (a + c)
        disc = np.sqrt(np.maximum(0.25 * (a - c) ** 2 + b * b, 0.0))
        s1 = np.sqrt(np.maximum(half_tr + disc, 0.0))
        s2 = np.sqrt(np.maximum(half_tr - disc, 0.0))
        sign = np.where(r @ np.cross(fj, fk) >= 0.0, 1.0, -1.0)
        x = s1 + sign * s2
        log_p = r @ fi + np.abs(x) + np.log(bessel_i0_scaled(x)) - np.sum(self.s) - np.log(self.info.c_bar)
        return np.exp(log_p)


def cumulative_isotropic(s: float, theta: float, rule: QuadratureRule | None = None) -> float:
    """Probability that ``R ~ M(s I)`` lies within angle ``theta`` of its mean."""
    if not np.isfinite(s) or s < 0:
        raise ValueError(f"concentration must be finite and non-negative, got {s}")
    if not 0.0 <= theta <= np.pi:
        raise ValueError(f"angle must lie in [0, pi], got {theta}")
    if theta == 0.0:
        return 0.0
    rule = rule or default_rule()
    rho, w = rule.mapped(0.0, theta)
    one_minus_cos = 2.0 * np.sin(0.5 * rho) ** 2
    integrand = np.exp(-2.0 * s * one_minus_cos) * one_minus_cos
    value = float(w @ integrand) / (np.pi * float(bessel_i0_minus_i1_scaled(2.0 * s)))
    return min(max(value, 0.0), 1.0)


@dataclass(frozen=True)
class VonMisesFisherS2:
    """Direction-sensor noise model: pole ``R^T B a`` with concentration ``b``."""

    a: np.ndarray
    b: float
    B: np.ndarray = None

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).reshape(3)
        if abs(np.linalg.norm(a) - 1.0) > 1e-12:
            raise ValueError("mean direction must be a unit vector")
        if not self.b > 0:
            raise ValueError(f"concentration must be positive, got {self.b}")
        B = np.eye(3) if self.B is None else np.asarray(self.B, dtype=float).reshape(3, 3)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "B", B)

    def pole(self, R) -> np.ndarray:
        """``R^T B a``; accepts ``(..., 3, 3)``."""
        return np.swapaxes(np.asarray(R, dtype=float), -1, -2) @ (self.B @ self.a)

    def log_pdf(self, R, z, measure: str = "uniform") -> np.ndarray | float:
        """Log density of measured direction(s) ``z`` given attitude ``R``.

        ``measure="uniform"`` is relative to the uniform distribution on the
        sphere and tends to one as ``b -> 0``. ``measure="area"`` is relative
        to surface area, i.e. the familiar ``b / (4 pi sinh b)`` normalization.
        """
        b = self.b
        z = np.asarray(z, dtype=float)
        # log(b / (4 pi sinh b)) written to avoid overflow
        log_norm = np.log(b) - np.log(2.0 * np.pi) - b - np.log(-np.expm1(-2.0 * b))
        if measure == "uniform":
            log_norm = log_norm + np.log(4.0 * np.pi)
        elif measure != "area":
            raise ValueError(f"unknown measure {measure!r}")
        return log_norm + b * np.sum(z * self.pole(R), axis=-1)

    def pdf(self, R, z, measure: str = "uniform"):
        return np.exp(self.log_pdf(R, z, measure))

    def sample(self, R, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        """Exact draws by inverting the CDF of the cosine to the pole."""
        n = 1 if size is None else int(size)
        mu = self.pole(R)
        b = self.b
        u = rng.random(n)
        w = 1.0 + np.log(u + (1.0 - u) * np.exp(-2.0 * b)) / b
        w = np.clip(w, -1.0, 1.0)
        phi = 2.0 * np.pi * rng.random(n)
        # orthonormal complement of the pole
        helper = np.eye(3)[int(np.argmin(np.abs(mu)))]
        e1 = np.cross(mu, helper)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(mu, e1)
        rad = np.sqrt(np.maximum(1.0 - w * w, 0.0))
        z = w[:, None] * mu + rad[:, None] * (np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2)
        return z[0] if size is None else z
