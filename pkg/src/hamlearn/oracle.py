"""Exact small-system stand-in for the black box.

The oracle owns a Hamiltonian, diagonalises it once, and answers two kinds of
query: exact expectation values and seeded shot samples of simultaneous
single-site-basis measurements, either after unitary evolution for time ``t``
or on the Gibbs state at inverse temperature ``beta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .chebyshev import DerivativeDataset, node_abscissas
from .pauli import N_MAX_DENSE, Hamiltonian, PauliString

ORACLE_MODES = ("unitary", "gibbs")

_HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_S_DAG = np.diag([1, -1j])
# single-qubit rotations R with R P R^dagger = Z
_ROTATIONS = {"X": _HADAMARD, "Y": _HADAMARD @ _S_DAG, "Z": np.eye(2, dtype=complex)}


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class PreparedState:
    """``rho0 = prod_b (I + s_b Q_b) / 2**n`` for signed Paulis ``Q_b`` on disjoint sites.

    Sites not covered by any block are maximally mixed.  Single-site blocks give
    the product states ``(I +/- sigma)/2``; multi-site blocks are the correlated
    states needed to isolate a multi-qubit term.
    """

    n: int
    blocks: tuple[tuple[PauliString, int], ...] = ()

    def __post_init__(self):
        used = 0
        for q, s in self.blocks:
            if q.n != self.n:
                raise ValueError(f"block {q.render()} has {q.n} qubits, expected {self.n}")
            if q.is_identity():
                raise ValueError("identity block is redundant; leave the sites maximally mixed")
            if s not in (1, -1):
                raise ValueError("block sign must be +1 or -1")
            if used & q.support_mask:
                raise ValueError(f"block {q.render()} overlaps another block")
            used |= q.support_mask

    @classmethod
    def maximally_mixed(cls, n: int) -> "PreparedState":
        return cls(n)

    @classmethod
    def product(cls, n: int, factors: dict[int, str]) -> "PreparedState":
        """Per-site factors such as ``{0: "+X", 3: "-Z"}``; other sites get ``I/2``."""
        blocks = []
        for site, spec in sorted(factors.items()):
            sign = -1 if spec.startswith("-") else 1
            blocks.append((PauliString.single(n, site, spec.lstrip("+-")), sign))
        return cls(n, tuple(blocks))

    @property
    def covered_mask(self) -> int:
        mask = 0
        for q, _ in self.blocks:
            mask |= q.support_mask
        return mask

    def pauli_expectation(self, p: PauliString) -> float:
        """``Tr(P rho0)`` from the block structure alone."""
        if p.support_mask & ~self.covered_mask:
            return 0.0
        val = 1.0
        for q, s in self.blocks:
            part = p.restricted(q.support)
            if part.is_identity():
                continue
            if part != q:
                return 0.0
            val *= s
        return val

    def to_matrix(self) -> np.ndarray:
        if self.n > N_MAX_DENSE:
            raise ValueError(f"{self.n} qubits exceeds the dense limit of {N_MAX_DENSE}")
        dim = 1 << self.n
        rho = np.eye(dim, dtype=complex) / dim
        for q, s in self.blocks:
            rho = rho + s * (q.to_matrix() @ rho)
        return rho

    def to_json(self) -> list:
        return [{"pauli": q.render(), "sign": s} for q, s in self.blocks]


@dataclass
class ShotBatch:
    """Joint outcomes of simultaneously measured disjoint-support Paulis.

    ``counts[k]`` is the number of shots with outcome pattern ``k``: bit ``j``
    of ``k`` set means observable ``j`` returned -1.
    """

    x: float
    observables: tuple[PauliString, ...]
    counts: np.ndarray
    shots: int

    @property
    def tallies(self) -> list[tuple[int, int]]:
        """Per observable ``(#(+1), #(-1))``."""
        patterns = np.arange(self.counts.size)
        out = []
        for j in range(len(self.observables)):
            minus = int(self.counts[(patterns >> j) & 1 == 1].sum())
            out.append((self.shots - minus, minus))
        return out

    def means(self) -> np.ndarray:
        return np.array([(p - m) / self.shots for p, m in self.tallies])


def rng_stream(seed: int, key: tuple[int, ...] = ()) -> np.random.Generator:
    """Counter-based generator for the stream ``key`` under ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=tuple(key))))


def plugin_variance(y: float, shots: int) -> float:
    return max((1.0 - y * y) / shots, 1.0 / (4.0 * shots * shots))


@dataclass
class QuantumOracle:
    hamiltonian: Hamiltonian
    mode: str = "unitary"
    seed: int = 0
    n_max: int = N_MAX_DENSE
    queries: int = field(default=0, init=False)

    def __post_init__(self):
        if self.mode not in ORACLE_MODES:
            raise ValueError(f"unknown oracle mode {self.mode!r}; expected one of {ORACLE_MODES}")
        if self.hamiltonian.n > self.n_max:
            raise OracleError(f"{self.hamiltonian.n} qubits exceeds the oracle limit of {self.n_max}")
        self._rot_cache: dict = {}
        self._state_cache: dict = {}
        self._obs_cache: dict = {}

    @property
    def n(self) -> int:
        return self.hamiltonian.n

    @cached_property
    def _eig(self) -> tuple[np.ndarray, np.ndarray]:
        return np.linalg.eigh(self.hamiltonian.to_matrix())

    # -- exact quantities ------------------------------------------------
    def _gibbs_weights(self, beta: float) -> np.ndarray:
        energies = self._eig[0]
        logw = -beta * energies
        w = np.exp(logw - logw.max())
        return w / w.sum()

    def _rho0_eigbasis(self, rho0: PreparedState) -> np.ndarray:
        if rho0 not in self._state_cache:
            vecs = self._eig[1]
            self._state_cache[rho0] = vecs.conj().T @ rho0.to_matrix() @ vecs
        return self._state_cache[rho0]

    def state(self, rho0: PreparedState | None, x: float) -> np.ndarray:
        """Dense ``rho(t = x)`` or ``rho(beta = x)``."""
        energies, vecs = self._eig
        if self.mode == "gibbs":
            return (vecs * self._gibbs_weights(x)) @ vecs.conj().T
        phases = np.exp(-1j * energies * x)
        evolved = phases[:, None] * self._rho0_eigbasis(rho0) * phases.conj()[None, :]
        return vecs @ evolved @ vecs.conj().T

    def exact_expectation(self, rho0: PreparedState | None, obs: PauliString, x: float) -> float:
        if x < 0:
            raise ValueError("abscissa must be non-negative")
        return self._expectation(rho0, obs, x)

    def _expectation(self, rho0, obs: PauliString, x: float) -> float:
        energies, vecs = self._eig
        if obs not in self._obs_cache:
            self._obs_cache[obs] = vecs.conj().T @ obs.to_matrix() @ vecs
        obs_eig = self._obs_cache[obs]
        if self.mode == "gibbs":
            return float(np.real(np.diag(obs_eig) @ self._gibbs_weights(x)))
        phases = np.exp(-1j * energies * x)
        mixed = self._rho0_eigbasis(rho0) * obs_eig.T
        return float(np.real(phases @ mixed @ phases.conj()))

    # -- measurement -----------------------------------------------------
    def _measurement_basis(self, observables: tuple[PauliString, ...]):
        if observables in self._rot_cache:
            return self._rot_cache[observables]
        n = self.n
        used = 0
        for o in observables:
            if o.n != n:
                raise ValueError(f"observable {o.render()} has {o.n} qubits, expected {n}")
            if o.is_identity():
                raise ValueError("cannot measure the identity")
            if used & o.support_mask:
                raise ValueError(f"observable {o.render()} overlaps another observable")
            used |= o.support_mask
        rot = np.ones((1, 1), dtype=complex)
        for site in range(n):
            letter = "Z"
            for o in observables:
                if (o.support_mask >> site) & 1:
                    letter = o.letter(site)
            rot = np.kron(rot, _ROTATIONS[letter])
        basis = np.arange(1 << n, dtype=np.int64)
        pattern = np.zeros(1 << n, dtype=np.int64)
        for j, o in enumerate(observables):
            mask = 0
            for s in o.support:
                mask |= 1 << (n - 1 - s)
            parity = np.bitwise_count(basis & mask) & 1
            pattern |= parity.astype(np.int64) << j
        entry = (rot @ self._eig[1], pattern)
        self._rot_cache[observables] = entry
        return entry

    def outcome_probabilities(self, rho0, observables, x: float) -> np.ndarray:
        """Probabilities of the ``2**k`` joint outcome patterns (see :class:`ShotBatch`)."""
        observables = tuple(observables)
        rotated, pattern = self._measurement_basis(observables)
        if self.mode == "gibbs":
            diag = (np.abs(rotated) ** 2) @ self._gibbs_weights(x)
        else:
            scaled = rotated * np.exp(-1j * self._eig[0] * x)[None, :]
            diag = np.real(np.sum((scaled @ self._rho0_eigbasis(rho0)) * scaled.conj(), axis=1))
        probs = np.bincount(pattern, weights=np.clip(diag, 0.0, None), minlength=1 << len(observables))
        return probs / probs.sum()

    def sample_shots(self, rho0, observables, x: float, shots: int, key: tuple[int, ...] = ()) -> ShotBatch:
        if shots < 1:
            raise ValueError("need at least one shot")
        if x < 0:
            raise ValueError("abscissa must be non-negative")
        observables = tuple(observables)
        probs = self.outcome_probabilities(rho0, observables, x)
        counts = rng_stream(self.seed, key).multinomial(int(shots), probs)
        self.queries += int(shots)
        return ShotBatch(float(x), observables, counts, int(shots))

    def build_dataset(self, rho0, observables, plan, key: tuple[int, ...] = (), noise: bool = True) -> list[DerivativeDataset]:
        """One dataset per observable over the plan's Chebyshev nodes on ``[0, A]``."""
        observables = tuple(observables)
        xs = node_abscissas(plan.A, plan.L)
        node_shots = plan.node_shots()
        ys = np.empty((len(observables), plan.L))
        s2 = np.zeros_like(ys)
        for ell, (x, n_l) in enumerate(zip(xs, node_shots)):
            if noise:
                batch = self.sample_shots(rho0, observables, x, n_l, key=tuple(key) + (ell,))
                ys[:, ell] = batch.means()
                s2[:, ell] = [plugin_variance(y, n_l) for y in ys[:, ell]]
            else:
                self.queries += int(n_l)
                ys[:, ell] = [self._expectation(rho0, o, x) for o in observables]
        return [DerivativeDataset(plan.A, ys[j], node_shots, s2[j]) for j in range(len(observables))]


def gibbs_finite_difference_check(h: Hamiltonian, i: int, dbeta: float = 1e-3) -> float:
    """Central difference of ``<P_i>_beta`` at ``beta = 0`` from exact Gibbs states."""
    if not 0 < dbeta <= 0.01:
        raise ValueError("dbeta must lie in (0, 0.01]")
    oracle = QuantumOracle(h, mode="gibbs")
    p = h.paulis[i]
    return (oracle._expectation(None, p, dbeta) - oracle._expectation(None, p, -dbeta)) / (2 * dbeta)
