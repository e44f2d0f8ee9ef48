"""Chebyshev nodes, interpolation and first-derivative extraction at t = 0.

A window ``[0, A]`` is mapped onto ``[-1, 1]`` by ``t = (A/2)(1 + z)``, so the
origin ``t = 0`` sits at ``z = -1`` and ``T_m'(-1) = (-1)**(m+1) m**2`` gives the
derivative of a Chebyshev series there in closed form.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np


def cheb_roots(L: int) -> np.ndarray:
    """Roots of ``T_L`` in ascending order."""
    if L < 1:
        raise ValueError("need at least one Chebyshev node")
    m = np.arange(1, L + 1)
    return -np.cos((2 * m - 1) * np.pi / (2 * L))


def cheb_eval(m: int, z):
    """``T_m(z)`` by the three-term recurrence (valid on and off ``[-1, 1]``)."""
    if m < 0:
        raise ValueError("Chebyshev degree must be non-negative")
    z = np.asarray(z, dtype=float)
    prev, cur = np.ones_like(z), z.copy()
    if m == 0:
        return prev if prev.ndim else float(prev)
    for _ in range(m - 1):
        prev, cur = cur, 2 * z * cur - prev
    return cur if cur.ndim else float(cur)


def cheb_vander(z, L: int) -> np.ndarray:
    """Matrix with columns ``T_0(z) .. T_{L-1}(z)``."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    out = np.empty((z.size, L))
    out[:, 0] = 1.0
    if L > 1:
        out[:, 1] = z
    for m in range(2, L):
        out[:, m] = 2 * z * out[:, m - 1] - out[:, m - 2]
    return out


@dataclass(frozen=True)
class ChebFit:
    """Chebyshev series ``sum_m b_m T_m(2t/A - 1)`` on the window ``[0, A]``."""

    L: int
    A: float
    coeffs: np.ndarray = field(repr=False)

    def __call__(self, t):
        z = 2 * np.asarray(t, dtype=float) / self.A - 1
        vals = cheb_vander(z, self.L) @ self.coeffs
        return vals if np.ndim(t) else float(vals[0])

    def value_at_zero(self) -> float:
        signs = (-1.0) ** np.arange(self.L)
        return float(signs @ self.coeffs)


@dataclass
class DerivativeDataset:
    """Noisy samples of a black-box function at the Chebyshev nodes of ``[0, A]``."""

    A: float
    y: np.ndarray
    shots: np.ndarray
    sigma2: np.ndarray

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        self.shots = np.asarray(self.shots, dtype=np.int64)
        self.sigma2 = np.asarray(self.sigma2, dtype=float)
        if not (self.y.shape == self.shots.shape == self.sigma2.shape) or self.y.ndim != 1:
            raise ValueError("y, shots and sigma2 must be 1-d arrays of equal length")
        if np.any(self.shots < 1):
            raise ValueError("every node needs at least one shot")
        if np.any(self.sigma2 < 0):
            raise ValueError("variances must be non-negative")
        if self.A <= 0:
            raise ValueError("window A must be positive")

    @property
    def L(self) -> int:
        return self.y.size

    @property
    def z(self) -> np.ndarray:
        return cheb_roots(self.L)

    @property
    def t(self) -> np.ndarray:
        return node_abscissas(self.A, self.L)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["ell", "z", "t", "y", "N", "sigma2"])
        for ell, (z, t, y, n, s2) in enumerate(zip(self.z, self.t, self.y, self.shots, self.sigma2), 1):
            w.writerow([ell, repr(float(z)), repr(float(t)), repr(float(y)), int(n), repr(float(s2))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, A: float) -> "DerivativeDataset":
        rows = list(csv.DictReader(io.StringIO(text)))
        rows.sort(key=lambda r: int(r["ell"]))
        return cls(
            A=A,
            y=[float(r["y"]) for r in rows],
            shots=[int(r["N"]) for r in rows],
            sigma2=[float(r["sigma2"]) for r in rows],
        )


def node_abscissas(A: float, L: int) -> np.ndarray:
    return A / 2 * (1 + cheb_roots(L))


def interp_coeffs(ys, A: float = 2.0) -> ChebFit:
    """Interpolating Chebyshev coefficients through values at ``cheb_roots(len(ys))``."""
    ys = np.asarray(ys, dtype=float)
    L = ys.size
    if L < 1:
        raise ValueError("need at least one sample")
    basis = cheb_vander(cheb_roots(L), L)
    b = 2.0 / L * (basis.T @ ys)
    b[0] /= 2.0
    return ChebFit(L, float(A), b)


def constrained_fit(ds: DerivativeDataset, weights=None) -> ChebFit:
    """Weighted least squares over ``T_0..T_{L-1}`` subject to ``f(t=0) = 0``.

    ``b_0`` is eliminated via the constraint ``sum_m (-1)**m b_m = 0``, leaving an
    ordinary weighted fit for ``b_1..b_{L-1}``.  Weights default to ``1/sigma2``,
    or uniform when all variances are equal (including the noiseless case).
    """
    L = ds.L
    if L < 2:
        raise ValueError("constrained fit needs at least two nodes")
    if weights is None:
        s2 = ds.sigma2
        if np.all(s2 == s2[0]):
            weights = np.ones(L)
        elif np.any(s2 <= 0):
            raise ValueError("zero variance at some nodes but not others; pass explicit weights")
        else:
            weights = 1.0 / s2
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (L,) or np.any(weights < 0) or not np.any(weights > 0):
        raise ValueError("degenerate weights")
    basis = cheb_vander(ds.z, L)
    signs = (-1.0) ** np.arange(L)
    design = basis[:, 1:] - signs[1:]
    sw = np.sqrt(weights)
    sol, *_ = np.linalg.lstsq(design * sw[:, None], ds.y * sw, rcond=None)
    b = np.empty(L)
    b[1:] = sol
    b[0] = -signs[1:] @ sol
    return ChebFit(L, float(ds.A), b)


def fit_dataset(ds: DerivativeDataset, constrained: bool = False) -> ChebFit:
    return constrained_fit(ds) if constrained else interp_coeffs(ds.y, ds.A)


def derivative_at_zero(fit: ChebFit) -> float:
    """``f'(0)`` of a Chebyshev series on ``[0, A]``."""
    if fit.A <= 0:
        raise ValueError("window A must be positive")
    m = np.arange(1, fit.L)
    return float(-2.0 / fit.A * np.sum((-1.0) ** m * fit.coeffs[1:] * m**2))


def node_sensitivity(L: int) -> np.ndarray:
    """``sum_{m=1}^{L-1} (-1)**m m**2 T_m(z_l)`` at each node."""
    m = np.arange(1, L)
    basis = cheb_vander(cheb_roots(L), L)[:, 1:]
    return basis @ ((-1.0) ** m * m**2)


def derivative_weights(L: int, A: float) -> np.ndarray:
    """Linear weights ``w`` with ``derivative_at_zero(interp_coeffs(y, A)) == w @ y``."""
    return -4.0 / (A * L) * node_sensitivity(L)


def derivative_variance(L: int, A: float, sigma2) -> float:
    """Variance of the interpolation-based ``f'(0)`` estimate for independent node noise."""
    sigma2 = np.broadcast_to(np.asarray(sigma2, dtype=float), (L,))
    return float(16.0 / (L**2 * A**2) * np.sum(sigma2 * node_sensitivity(L) ** 2))


def derivative_variance_closed_form(L: int, A: float, sigma2: float = 1.0) -> float:
    """Closed form of :func:`derivative_variance` for equal node variances."""
    return 4.0 * (L - 1) * (2 * L - 1) * (3 * L * L - 3 * L - 1) / (15.0 * A * A) * sigma2
