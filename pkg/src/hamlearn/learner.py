"""Learning algorithms: one derivative, naive per-term, partitioned, and Gibbs.

Unitary learning of term ``i`` prepares a state whose only first-order
response to ``H`` comes from ``theta_i``: a single-site probe ``P'`` that
anticommutes with ``P_i`` is measured, and the state on ``supp(P_i)`` is
``(I + i[P_i, P']/2) / 2**|supp P_i|`` with every other qubit maximally mixed.
Then ``d/dt Tr(P' rho(t))`` at ``t = 0`` equals ``Tr(i[H, P'] rho0) = 2 theta_i``:
the selector block has ``Tr(i[P_i, P'] rho0) = 2``, so the fitted slope is halved.
On Gibbs states ``d<P_i>/d beta`` at ``beta = 0`` is ``-theta_i``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import Scales
from .chebyshev import derivative_at_zero, fit_dataset
from .graph import Coloring, build_graph, greedy_color, square_graph
from .oracle import PreparedState, QuantumOracle
from .pauli import Hamiltonian, PauliString, commutator
from .planner import LearnPlan, plan

LETTERS = ("X", "Y", "Z")
# theta_i = slope / SIGNAL_GAIN
SIGNAL_GAIN = {"unitary": 2.0, "gibbs": -1.0}


@dataclass(frozen=True)
class LearnOptions:
    constrained: bool = False
    allocation: bool = False
    avg_degree: bool = False
    noise: bool = True
    ordering: str = "degree"


@dataclass(frozen=True)
class SpamSetting:
    index: int
    probe: PauliString
    selector: PauliString
    sign: int
    moat: tuple[int, ...]

    @property
    def state_block(self) -> tuple[PauliString, int]:
        """``(Q, s)`` with ``i[P_i, P']/2 = s Q``."""
        return (self.selector, self.sign)


def spam_for_term(h: Hamiltonian, i: int) -> SpamSetting:
    """Probe, selector block and moat for term ``i``.

    The probe is the first single-site Pauli, by site then by letter ``X < Y < Z``,
    on ``supp(P_i)`` that anticommutes with ``P_i``.
    """
    p = h.paulis[i]
    if p.is_identity():
        raise ValueError("cannot select the identity term")
    probe = None
    for site in p.support:
        for letter in LETTERS:
            cand = PauliString.single(h.n, site, letter)
            if not cand.commutes(p):
                probe = cand
                break
        if probe is not None:
            break
    (word, coeff), = commutator(p, probe).terms.items()
    # i [P, P'] / 2 = (i coeff / 2) word, and the prefactor is +/-1
    sign = int(round((1j * coeff / 2).real))
    moat_mask = 0
    for q in h.paulis:
        if q.support_mask & p.support_mask:
            moat_mask |= q.support_mask
    moat_mask &= ~p.support_mask
    moat = tuple(s for s in range(h.n) if (moat_mask >> s) & 1)
    return SpamSetting(i, probe, word, sign, moat)


def partition_state(h: Hamiltonian, settings: list[SpamSetting]) -> PreparedState:
    return PreparedState(h.n, tuple(s.state_block for s in settings))


def estimate_derivative(oracle: QuantumOracle, rho0, probe: PauliString, plan: LearnPlan,
                        constrained: bool = False, noise: bool = True, key: tuple[int, ...] = ()) -> float:
    """One dataset, one Chebyshev fit, one first-derivative estimate."""
    (ds,) = oracle.build_dataset(rho0, [probe], plan, key=key, noise=noise)
    return derivative_at_zero(fit_dataset(ds, constrained))


@dataclass
class TermEstimate:
    index: int
    pauli: str
    theta_hat: float
    replicates: list[float]
    theta_true: float | None = None

    def to_json(self) -> dict:
        out = {"index": self.index, "pauli": self.pauli, "theta_hat": self.theta_hat, "replicates": self.replicates}
        if self.theta_true is not None:
            out["theta_true"] = self.theta_true
        return out


@dataclass
class LearnReport:
    algorithm: str
    plan: LearnPlan
    terms: list[TermEstimate]
    partitions: list[list[int]]
    queries: int
    options: LearnOptions = field(default_factory=LearnOptions)
    epsilon: float | None = None
    theta_scale: float | None = None

    @property
    def theta_hat(self) -> np.ndarray:
        return np.array([t.theta_hat for t in self.terms])

    @property
    def has_truth(self) -> bool:
        return all(t.theta_true is not None for t in self.terms)

    def errors(self) -> np.ndarray:
        if not self.has_truth:
            raise ValueError("report carries no true coefficients")
        return np.array([abs(t.theta_hat - t.theta_true) for t in self.terms])

    def max_abs_error(self) -> float:
        return float(self.errors().max())

    def error_in_target_units(self) -> float | None:
        """Max-abs error divided by ``epsilon * ||Theta||_inf`` (``> 1`` means failure)."""
        if not self.has_truth or self.epsilon is None or not self.theta_scale:
            return None
        return self.max_abs_error() / (self.epsilon * self.theta_scale)

    def to_json(self) -> dict:
        out = {
            "algorithm": self.algorithm,
            "plan": self.plan.to_json(),
            "options": {
                "constrained": self.options.constrained,
                "allocation": self.options.allocation,
                "avg_degree": self.options.avg_degree,
                "noise": self.options.noise,
                "ordering": self.options.ordering,
            },
            "partitions": self.partitions,
            "queries": self.queries,
            "terms": [t.to_json() for t in self.terms],
        }
        if self.has_truth:
            out["max_abs_error"] = self.max_abs_error()
            if self.epsilon is not None:
                out["epsilon"] = self.epsilon
                out["theta_scale"] = self.theta_scale
                out["error_in_target_units"] = self.error_in_target_units()
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "pauli", "theta_true", "theta_hat", "abs_error", "replicate", "replicate_value"])
        for t in self.terms:
            err = abs(t.theta_hat - t.theta_true) if t.theta_true is not None else ""
            for k, v in enumerate(t.replicates):
                w.writerow([t.index, t.pauli, "" if t.theta_true is None else repr(t.theta_true),
                            repr(t.theta_hat), repr(err) if err != "" else "", k, repr(v)])
        return buf.getvalue()


def plan_for(h: Hamiltonian, epsilon: float, delta: float, mode: str = "general", options: LearnOptions | None = None,
             theta_max: float | None = None, l_cap: int | None = None) -> LearnPlan:
    """Plan for a max-abs error target ``epsilon * ||Theta||_inf``.

    The planner bounds the error of the fitted slope in units of ``gamma``.  The
    slope is ``SIGNAL_GAIN`` times the coefficient, so the target is rescaled by
    ``|gain| theta_max / gamma``.  In simulation ``theta_max`` defaults to the
    true value.
    """
    options = options or LearnOptions()
    scales = Scales.from_hamiltonian(h, theta_max=theta_max, mode=mode, use_avg_degree=options.avg_degree)
    gain = abs(SIGNAL_GAIN["gibbs" if mode == "gibbs" else "unitary"])
    eps_rel = epsilon * gain * scales.theta_max / scales.gamma
    kwargs = {"l_cap": l_cap} if l_cap else {}
    return plan(eps_rel, delta, scales, allocate=options.allocation, **kwargs)


def _terms_from(h: Hamiltonian, estimates: dict[int, list[float]], truth: bool) -> list[TermEstimate]:
    out = []
    for i, (p, theta) in enumerate(h.terms):
        reps = estimates[i]
        out.append(TermEstimate(i, p.render(), float(np.median(reps)), reps, float(theta) if truth else None))
    return out


def _run_partition(oracle: QuantumOracle, h: Hamiltonian, part: list[int], plan_: LearnPlan,
                   options: LearnOptions, gibbs: bool) -> dict[int, list[float]]:
    part = sorted(part)
    if gibbs:
        rho0 = None
        observables = [h.paulis[i] for i in part]
        gain = SIGNAL_GAIN["gibbs"]
    else:
        settings = [spam_for_term(h, i) for i in part]
        rho0 = partition_state(h, settings)
        observables = [s.probe for s in settings]
        gain = SIGNAL_GAIN["unitary"]
    stream = (len(part), *part)
    reps: dict[int, list[float]] = {i: [] for i in part}
    cached = None
    for k in range(plan_.K):
        if options.noise or cached is None:
            datasets = oracle.build_dataset(rho0, observables, plan_, key=stream + (k,), noise=options.noise)
            cached = [derivative_at_zero(fit_dataset(ds, options.constrained)) / gain for ds in datasets]
        else:
            # noiseless replicates are identical; still charge the queries
            oracle.queries += plan_.shots_per_replicate
        for i, v in zip(part, cached):
            reps[i].append(float(v))
    return reps


def _infer(oracle: QuantumOracle, h: Hamiltonian, plan_: LearnPlan, partitions: list[list[int]], options: LearnOptions,
           algorithm: str, gibbs: bool, truth: bool, epsilon: float | None) -> LearnReport:
    start = oracle.queries
    estimates: dict[int, list[float]] = {}
    for part in partitions:
        estimates.update(_run_partition(oracle, h, part, plan_, options, gibbs))
    queries = oracle.queries - start
    expected = plan_.shots_per_replicate * plan_.K * len(partitions)
    if queries != expected:
        raise RuntimeError(f"query ledger mismatch: {queries} != {expected}")
    return LearnReport(algorithm, plan_, _terms_from(h, estimates, truth), [sorted(p) for p in partitions], queries,
                       options, epsilon, h.theta_max if truth else None)


def naive_infer(oracle: QuantumOracle, h: Hamiltonian, plan_: LearnPlan, options: LearnOptions | None = None,
                truth: bool = True, epsilon: float | None = None) -> LearnReport:
    """One term at a time.  ``h`` supplies the structure; its coefficients are only used as truth."""
    options = options or LearnOptions()
    return _infer(oracle, h, plan_, [[i] for i in range(h.r)], options, "naive", False, truth, epsilon)


def term_partitions(h: Hamiltonian, squared: bool = True, ordering: str = "degree") -> Coloring:
    g = build_graph(h)
    coloring = greedy_color(square_graph(g) if squared else g, ordering)
    coloring.validate(square_graph(g) if squared else g)
    return coloring


def partition_infer(oracle: QuantumOracle, h: Hamiltonian, plan_: LearnPlan, options: LearnOptions | None = None,
                    coloring: Coloring | None = None, truth: bool = True, epsilon: float | None = None) -> LearnReport:
    """Learn every term of a color class of the squared interaction graph from shared shots."""
    options = options or LearnOptions()
    if oracle.mode != "unitary":
        raise ValueError("partition_infer needs a unitary-mode oracle")
    g2 = square_graph(build_graph(h))
    coloring = coloring or greedy_color(g2, options.ordering)
    coloring.validate(g2)
    return _infer(oracle, h, plan_, coloring.partitions, options, "partition", False, truth, epsilon)


def gibbs_infer(oracle: QuantumOracle, h: Hamiltonian, plan_: LearnPlan, options: LearnOptions | None = None,
                coloring: Coloring | None = None, truth: bool = True, epsilon: float | None = None) -> LearnReport:
    """Learn from Gibbs states: measure each ``P_i`` of a color class of the interaction graph."""
    options = options or LearnOptions()
    if oracle.mode != "gibbs":
        raise ValueError("gibbs_infer needs a gibbs-mode oracle")
    g = build_graph(h)
    coloring = coloring or greedy_color(g, options.ordering)
    coloring.validate(g)
    return _infer(oracle, h, plan_, coloring.partitions, options, "gibbs", True, truth, epsilon)


def learn(h: Hamiltonian, epsilon: float, delta: float, mode: str = "unitary", seed: int = 0,
          options: LearnOptions | None = None, theta_max: float | None = None) -> LearnReport:
    """Plan and run one simulated experiment end to end."""
    options = options or LearnOptions()
    bound_mode = {"unitary": "general", "commuting": "commuting", "gibbs": "gibbs"}[mode]
    plan_ = plan_for(h, epsilon, delta, bound_mode, options, theta_max)
    oracle = QuantumOracle(h, mode="gibbs" if mode == "gibbs" else "unitary", seed=seed)
    run = gibbs_infer if mode == "gibbs" else partition_infer
    return run(oracle, h, plan_, options, epsilon=epsilon)


def failure_threshold(epsilon: float, h: Hamiltonian) -> float:
    return epsilon * h.theta_max


def binomial_upper(failures: int, trials: int, level: float = 0.95) -> float:
    """One-sided Clopper-Pearson upper bound on a failure probability."""
    from scipy.stats import beta

    if failures >= trials:
        return 1.0
    return float(beta.ppf(level, failures + 1, trials - failures))


def is_finite_plan(p: LearnPlan) -> bool:
    return math.isfinite(p.A) and p.L >= 1 and p.N >= 1
