"""Choose the window ``A``, node count ``L``, shots ``N`` and median groups ``K``.

The plan minimises ``N * L`` subject to the bias bound being below the
target, scanning a log-spaced grid of ``A`` and every ``L`` up to ``L_CAP``.
Targets ``epsilon`` here are relative to ``gamma`` (see :class:`Scales`).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .bounds import Scales, error_bound, log_commutator_norm_bound, noise_factor
from .chebyshev import node_sensitivity

L_CAP = 40
GRID_POINTS = 200
GRID_LOW = 1e-3
GRID_HIGH = {"general": 4.0, "gibbs": 4.0, "commuting": 40.0}
MOM_CONSTANT = 34.0


class InfeasiblePlanError(ValueError):
    pass


@dataclass(frozen=True)
class LearnPlan:
    A: float
    L: int
    N: int
    K: int
    mode: str
    degree_used: float
    epsilon: float
    delta: float
    gamma: float
    sigma2_max: float = 1.0
    predicted_bias: float = 0.0
    predicted_noise: float = 0.0
    allocation: tuple[int, ...] | None = None

    @property
    def tau(self) -> float:
        return 1.0 / self.gamma

    @property
    def A_over_tau(self) -> float:
        return self.A * self.gamma

    @property
    def shots_per_replicate(self) -> int:
        return int(sum(self.allocation)) if self.allocation else self.N * self.L

    def node_shots(self) -> list[int]:
        return list(self.allocation) if self.allocation else [self.N] * self.L

    def with_allocation(self, enabled: bool = True) -> "LearnPlan":
        alloc = tuple(allocate_shots(self.L, self.N * self.L)) if enabled else None
        return LearnPlan(**{**asdict(self), "allocation": alloc})

    def replace(self, **changes) -> "LearnPlan":
        return LearnPlan(**{**asdict(self), **changes})

    def to_json(self) -> dict:
        out = asdict(self)
        out["allocation"] = list(self.allocation) if self.allocation else None
        out["tau"] = self.tau
        out["A_over_tau"] = self.A_over_tau
        out["queries_per_setting"] = self.shots_per_replicate * self.K
        return out

    @classmethod
    def from_json(cls, data: dict) -> "LearnPlan":
        fields = {k: data[k] for k in cls.__dataclass_fields__ if k in data}
        if fields.get("allocation") is not None:
            fields["allocation"] = tuple(fields["allocation"])
        return cls(**fields)


def median_groups(delta: float) -> int:
    """``K = ceil(2 ln(2/delta))``."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return math.ceil(2.0 * math.log(2.0 / delta))


def a_grid(mode: str, points: int = GRID_POINTS) -> np.ndarray:
    """Grid of ``A / tau`` values, log-spaced on ``[1e-3, high)``."""
    return np.logspace(math.log10(GRID_LOW), math.log10(GRID_HIGH[mode]), points, endpoint=False)


def _log_bias_curve(x: np.ndarray, L: int, scales: Scales) -> np.ndarray:
    # log of L^2 (A/4)^(L-1) M_L / (L! gamma) with A = x tau
    log_a = np.log(x) - math.log(scales.gamma)
    return (
        2 * math.log(L)
        + (L - 1) * (log_a - math.log(4.0))
        + log_commutator_norm_bound(L, scales)
        - math.lgamma(L + 1)
        - math.log(scales.gamma)
    )


def plan(
    epsilon: float,
    delta: float,
    scales: Scales,
    sigma2_max: float = 1.0,
    allocate: bool = False,
    l_cap: int = L_CAP,
) -> LearnPlan:
    """Minimise ``N * L`` over the ``(A, L)`` grid for a target relative error ``epsilon``."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    K = median_groups(delta)
    grid = a_grid(scales.mode)
    best = None
    min_bias = math.inf
    for L in range(2, l_cap + 1):
        log_bias = _log_bias_curve(grid, L, scales)
        bias = np.exp(np.minimum(log_bias, 700.0))
        min_bias = min(min_bias, float(bias.min()))
        ok = bias < epsilon
        if not ok.any():
            continue
        x = grid[ok]
        margin = epsilon - bias[ok]
        var1 = 8.0 * L**4 / (5.0 * x**2) * sigma2_max
        n_float = MOM_CONSTANT * var1 / margin**2
        cost = np.ceil(n_float) * L
        j = int(np.argmin(cost))  # first minimum is the smallest A on ties
        key = (float(cost[j]), L, float(x[j]))
        if best is None or key < best[0]:
            best = (key, L, float(x[j]), int(math.ceil(n_float[j])), float(bias[ok][j]))
    if best is None:
        raise InfeasiblePlanError(
            f"no (A, L) with L <= {l_cap} meets the bias constraint bias < epsilon={epsilon:g} "
            f"(smallest achievable bias bound {min_bias:.3g})"
        )
    _, L, x, N, bias = best
    A = x * scales.tau
    noise = math.sqrt(MOM_CONSTANT * noise_factor(A, L, scales) * sigma2_max / N)
    out = LearnPlan(
        A=A,
        L=L,
        N=N,
        K=K,
        mode=scales.mode,
        degree_used=scales.degree,
        epsilon=epsilon,
        delta=delta,
        gamma=scales.gamma,
        sigma2_max=sigma2_max,
        predicted_bias=bias,
        predicted_noise=noise,
    )
    return out.with_allocation() if allocate else out


def fixed_plan(A: float, L: int, N: int, K: int, scales: Scales, allocate: bool = False) -> LearnPlan:
    """A plan with hand-picked hyperparameters (bounds still filled in for reference)."""
    eb = error_bound(A, L, 1.0, scales) if L >= 2 else None
    out = LearnPlan(
        A=A,
        L=L,
        N=N,
        K=K,
        mode=scales.mode,
        degree_used=scales.degree,
        epsilon=math.nan,
        delta=math.nan,
        gamma=scales.gamma,
        predicted_bias=math.sqrt(eb.bias2 / 2) if eb else math.nan,
        predicted_noise=math.nan,
    )
    return out.with_allocation() if allocate else out


def allocate_shots(L: int, n_max: int) -> list[int]:
    """Split ``n_max`` shots across nodes proportionally to ``sqrt(c_l)``.

    ``c_l = (sum_m (-1)**m m**2 T_m(z_l))**2``.  Every node keeps at least one shot
    and rounding is settled by largest remainder so the total is exactly ``n_max``.
    """
    if n_max < L:
        raise ValueError(f"need at least one shot per node: n_max={n_max} < L={L}")
    if L == 1:
        return [n_max]
    w = np.abs(node_sensitivity(L))
    raw = w / w.sum() * n_max
    alloc = np.maximum(np.floor(raw).astype(np.int64), 1)
    rem = raw - np.floor(raw)
    diff = n_max - int(alloc.sum())
    if diff > 0:
        for i in np.argsort(-rem, kind="stable")[:diff]:
            alloc[i] += 1
    while diff < 0:
        # only reachable after floor-to-one bumps; take from the largest nodes
        i = int(np.argmax(alloc))
        alloc[i] -= 1
        diff += 1
    return [int(a) for a in alloc]


def allocation_variance(L: int, A: float, shots) -> float:
    """Variance bound ``16/(L A)**2 sum_l c_l / N_l`` for a given allocation."""
    shots = np.asarray(shots, dtype=float)
    return float(16.0 / (L**2 * A**2) * np.sum(node_sensitivity(L) ** 2 / shots))


def sweep(epsilons, delta: float, scales: Scales, sigma2_max: float = 1.0) -> list[LearnPlan]:
    return [plan(eps, delta, scales, sigma2_max) for eps in epsilons]
