"""Derivative bounds, subtree counting and the bias/noise error bound.

Everything that can overflow a double is computed in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .graph import average_degree, build_graph
from .pauli import Hamiltonian, OperatorSum, PauliString

MODES = ("general", "commuting", "gibbs")
GIBBS_FACTOR = 2 * math.e**2


class TupleLimitError(RuntimeError):
    pass


@dataclass(frozen=True)
class Scales:
    """Typical coefficient scale ``gamma`` and time (or inverse-temperature) scale ``tau``.

    ``degree`` is the interaction-graph degree used for the bounds (the maximum
    degree, or the heuristic average degree).  Degrees below 1 make the counting
    bounds vacuous, so they are clamped; the Gibbs factor ``D**2 - 1`` is
    clamped to at least 1 for the same reason.
    """

    degree: float
    theta_max: float
    mode: str = "general"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.theta_max <= 0:
            raise ValueError("theta_max must be positive")
        if self.degree < 0:
            raise ValueError("degree must be non-negative")

    @classmethod
    def from_hamiltonian(
        cls, h: Hamiltonian, theta_max: float | None = None, mode: str = "general", use_avg_degree: bool = False
    ) -> "Scales":
        g = build_graph(h)
        degree = average_degree(g) if use_avg_degree else g.degree()
        return cls(float(degree), float(theta_max if theta_max is not None else h.theta_max), mode)

    @property
    def effective_degree(self) -> float:
        return max(self.degree, 1.0)

    @property
    def gibbs_factor(self) -> float:
        """``2 e**2 (D**2 - 1)``."""
        return GIBBS_FACTOR * max(self.effective_degree**2 - 1.0, 1.0)

    @property
    def gamma(self) -> float:
        if self.mode == "gibbs":
            return self.gibbs_factor * self.theta_max
        return 2.0 * self.effective_degree * self.theta_max

    @property
    def tau(self) -> float:
        return 1.0 / self.gamma


def log_commutator_norm_bound(m: int, scales: Scales, mode: str | None = None) -> float:
    """Natural log of the bound on the ``m``-th derivative of the learned signal at 0."""
    if m < 0:
        raise ValueError("order must be non-negative")
    mode = mode or scales.mode
    theta, d = scales.theta_max, scales.effective_degree
    if mode == "general":
        return m * math.log(2 * d * theta) + math.lgamma(m + 2)
    if mode == "commuting":
        return m * math.log(2 * (d + 1) * theta)
    if mode == "gibbs":
        return m * math.log(theta) + math.lgamma(m + 2) + (m + 1) * math.log(scales.gibbs_factor)
    raise ValueError(f"unknown mode {mode!r}")


def commutator_norm_bound(m: int, scales: Scales, mode: str | None = None) -> float:
    """Bound on ``||[H^m P]||`` (unitary modes) or ``|d^m <P_i>_beta / d beta^m|`` (Gibbs).

    Returns ``inf`` when the value does not fit in a double.
    """
    log_val = log_commutator_norm_bound(m, scales, mode)
    return math.exp(log_val) if log_val < 709.0 else math.inf


def count_bound(m: int, d: int) -> int:
    """Number of increasingly-labelled rooted subtrees of size ``m`` in a ``d``-ary tree."""
    if m < 1 or d < 1:
        raise ValueError("need m >= 1 and d >= 1")
    out = 1
    for k in range(1, m):
        out *= k * (d - 1) + 1
    return out


def relaxed_count_bound(m: int, d: int) -> int:
    """``(d - 1)**(m - 1) m!`` (an upper bound on :func:`count_bound` once ``d >= 2``)."""
    if m < 1 or d < 1:
        raise ValueError("need m >= 1 and d >= 1")
    return (d - 1) ** (m - 1) * math.factorial(m)


def tuple_count_bound(m: int, degree: int) -> int:
    """``D**m (m+1)!``: the bound on non-vanishing term tuples of size ``m``."""
    return max(degree, 1) ** m * math.factorial(m + 1)


def enumerate_nonvanishing_tuples(h: Hamiltonian, p: PauliString, m: int, cap: int = 10**6) -> list[tuple[int, ...]]:
    """Candidate term tuples ``(s_1, .., s_m)`` with ``[P_{s_1}, [.., [P_{s_m}, P]]] != 0``.

    Builds tuples from the inside out: each new term must overlap the probe or a
    term already chosen.  The result is a superset of the truly non-vanishing
    tuples, returned sorted and without repeats.
    """
    if m < 0:
        raise ValueError("tuple size must be non-negative")
    masks = [q.support_mask for q in h.paulis]
    children = [frozenset(j for j, mj in enumerate(masks) if mj & mi) for mi in masks]
    root = frozenset(j for j, mj in enumerate(masks) if mj & p.support_mask)
    found: set[tuple[int, ...]] = set()

    def grow(chosen: tuple[int, ...], frontier: frozenset[int], left: int) -> None:
        if left == 0:
            # chosen is innermost-first; tuples are reported outermost-first
            found.add(chosen[::-1])
            if len(found) > cap:
                raise TupleLimitError(f"more than {cap} tuples of size {m}")
            return
        for v in sorted(frontier):
            grow(chosen + (v,), (frontier - {v}) | children[v], left - 1)

    grow((), root, m)
    return sorted(found)


def nested_commutator(h: Hamiltonian, tup: tuple[int, ...], p: PauliString) -> OperatorSum:
    """``[P_{s_1}, [P_{s_2}, .., [P_{s_m}, P]]]`` with unit coefficients."""
    out = OperatorSum.from_pauli(p)
    for s in reversed(tup):
        out = out.commutator_with(Hamiltonian(h.n, ((h.paulis[s], 1.0),)))
    return out


@dataclass(frozen=True)
class ErrorBound:
    noise: float
    bias2: float

    @property
    def total(self) -> float:
        return self.noise + self.bias2


def log_bias_bound(A: float, L: int, scales: Scales, mode: str | None = None) -> float:
    """Log of the bound on ``|E[c1_hat] - c1| / gamma`` for an ``L``-node fit on ``[0, A]``."""
    if A <= 0 or L < 1:
        raise ValueError("need A > 0 and L >= 1")
    return (
        2 * math.log(L)
        + (L - 1) * math.log(A / 4)
        + log_commutator_norm_bound(L, scales, mode)
        - math.lgamma(L + 1)
        - math.log(scales.gamma)
    )


def bias_bound(A: float, L: int, scales: Scales, mode: str | None = None) -> float:
    log_val = log_bias_bound(A, L, scales, mode)
    return math.exp(log_val) if log_val < 709.0 else math.inf


def noise_factor(A: float, L: int, scales: Scales) -> float:
    """``8 L**4 / (5 (A gamma)**2)``: single-shot variance scale of ``c1_hat / gamma``."""
    return 8.0 * L**4 / (5.0 * (A * scales.gamma) ** 2)


def error_bound(A: float, L: int, sigma2: float, scales: Scales, mode: str | None = None) -> ErrorBound:
    """Noise and squared-bias terms of the mean-squared relative error bound.

    ``noise = 8/(A/tau)**2 * (L - 1/2)**4 / 5 * sigma2`` and, in the general
    mode, ``bias2 = 8/(A/tau)**2 * 4 L**4 (L+1)**2 (A/(4 tau))**(2L)``.  Other modes
    substitute their own derivative bound.
    """
    if A <= 0 or L < 2:
        raise ValueError("need A > 0 and L >= 2")
    x = A * scales.gamma
    noise = 8.0 / x**2 * (L - 0.5) ** 4 / 5.0 * sigma2
    log_b2 = math.log(2.0) + 2 * log_bias_bound(A, L, scales, mode)
    bias2 = math.exp(log_b2) if log_b2 < 709.0 else math.inf
    return ErrorBound(noise, bias2)
