"""Exact algebra on n-qubit Pauli strings.

Pauli words are stored symplectically: one x-bit and one z-bit per site,
packed into Python integers (bit ``j`` is site ``j``).  The letter on a site is

    ====  =====  =====
    I     x=0    z=0
    X     x=1    z=0
    Y     x=1    z=1
    Z     x=0    z=1
    ====  =====  =====

Text format
-----------
A Pauli string is written as whitespace-separated ``<letter><site>`` tokens,
e.g. ``"X2 Z5"``.  Sites are 0-based, letters are one of ``IXYZ`` (upper case),
and every site not mentioned carries the identity.  ``I<site>`` tokens are
accepted and ignored, a site may appear at most once, and the empty string (or
a lone ``"I"``) denotes the identity.  :meth:`PauliString.render` emits the
canonical form: non-identity sites only, ascending by site.

Dense matrices use the Kronecker ordering in which site 0 is the most
significant qubit, i.e. ``P = P_0 (x) P_1 (x) ... (x) P_{n-1}``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping

import numpy as np

EPS_ZERO = 1e-12
N_MAX_DENSE = 10

_LETTER_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_BITS_LETTER = {v: k for k, v in _LETTER_BITS.items()}
_TOKEN = re.compile(r"^([IXYZ])(\d+)$")


def _popcount(v: int) -> int:
    return bin(v).count("1")


@dataclass(frozen=True)
class PauliString:
    """An unsigned Pauli word on ``n`` qubits."""

    n: int
    x: int = 0
    z: int = 0

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("qubit count must be non-negative")
        full = (1 << self.n) - 1
        if self.x & ~full or self.z & ~full:
            raise ValueError(f"bit masks exceed {self.n} qubits")

    # -- construction ---------------------------------------------------
    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(n)

    @classmethod
    def single(cls, n: int, site: int, letter: str) -> "PauliString":
        if not 0 <= site < n:
            raise ValueError(f"site {site} out of range for {n} qubits")
        xb, zb = _LETTER_BITS[letter]
        return cls(n, xb << site, zb << site)

    @classmethod
    def parse(cls, text: str, n: int) -> "PauliString":
        """Parse the ``"X2 Z5"`` site-indexed format (see module docstring)."""
        x = z = 0
        seen = set()
        for tok in text.split():
            m = _TOKEN.match(tok)
            if m is None:
                if tok == "I":
                    continue
                raise ValueError(f"bad Pauli token {tok!r} in {text!r}")
            letter, site = m.group(1), int(m.group(2))
            if site >= n:
                raise ValueError(f"site {site} out of range for {n} qubits in {text!r}")
            if site in seen:
                raise ValueError(f"site {site} repeated in {text!r}")
            seen.add(site)
            xb, zb = _LETTER_BITS[letter]
            x |= xb << site
            z |= zb << site
        return cls(n, x, z)

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """Dense label, one letter per site with site 0 first (``"XIZ"``)."""
        x = z = 0
        for site, letter in enumerate(label):
            if letter not in _LETTER_BITS:
                raise ValueError(f"bad Pauli letter {letter!r} in {label!r}")
            xb, zb = _LETTER_BITS[letter]
            x |= xb << site
            z |= zb << site
        return cls(len(label), x, z)

    # -- inspection -----------------------------------------------------
    def letter(self, site: int) -> str:
        return _BITS_LETTER[((self.x >> site) & 1, (self.z >> site) & 1)]

    @property
    def support_mask(self) -> int:
        return self.x | self.z

    @property
    def support(self) -> tuple[int, ...]:
        mask = self.support_mask
        return tuple(j for j in range(self.n) if (mask >> j) & 1)

    @property
    def weight(self) -> int:
        return _popcount(self.support_mask)

    def is_identity(self) -> bool:
        return self.support_mask == 0

    def overlaps(self, other: "PauliString") -> bool:
        return bool(self.support_mask & other.support_mask)

    def commutes(self, other: "PauliString") -> bool:
        _check_dims(self, other)
        return _popcount((self.x & other.z) ^ (self.z & other.x)) % 2 == 0

    def label(self) -> str:
        return "".join(self.letter(j) for j in range(self.n))

    def render(self) -> str:
        toks = [f"{self.letter(j)}{j}" for j in self.support]
        return " ".join(toks) if toks else "I"

    def __str__(self) -> str:
        return self.render()

    def __repr__(self) -> str:
        return f"PauliString({self.n}, {self.render()!r})"

    def __mul__(self, other: "PauliString") -> "PhasedPauli":
        return multiply(self, other)

    def restricted(self, sites: Iterable[int]) -> "PauliString":
        """Same word with every site outside ``sites`` set to identity."""
        mask = 0
        for s in sites:
            mask |= 1 << s
        return PauliString(self.n, self.x & mask, self.z & mask)

    def to_matrix(self) -> np.ndarray:
        return OperatorSum.from_pauli(self).to_matrix()

    def _dense_action(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Columns, rows and phases of the (permutation-with-phase) dense matrix."""
        n = self.n
        if n > N_MAX_DENSE:
            raise ValueError(f"{n} qubits exceeds the dense limit of {N_MAX_DENSE}")
        xm = zm = 0
        for j in range(n):
            xm |= ((self.x >> j) & 1) << (n - 1 - j)
            zm |= ((self.z >> j) & 1) << (n - 1 - j)
        cols = np.arange(1 << n, dtype=np.int64)
        rows = cols ^ xm
        signs = 1 - 2 * (np.bitwise_count(cols & zm) & 1).astype(np.int64)
        phase = 1j ** (_popcount(self.x & self.z) % 4)
        return cols, rows, phase * signs


@dataclass(frozen=True)
class PhasedPauli:
    """A Pauli word with a phase ``i**k``, ``k`` in {0, 1, 2, 3}."""

    k: int
    word: PauliString

    @property
    def phase(self) -> complex:
        return (1, 1j, -1, -1j)[self.k % 4]

    def __mul__(self, other: "PhasedPauli") -> "PhasedPauli":
        prod = multiply(self.word, other.word)
        return PhasedPauli((self.k + other.k + prod.k) % 4, prod.word)


def _check_dims(a: PauliString, b: PauliString) -> None:
    if a.n != b.n:
        raise ValueError(f"dimension mismatch: {a.n} vs {b.n} qubits")


def _product_phase(a: PauliString, b: PauliString) -> int:
    ax, ay, az = a.x & ~a.z, a.x & a.z, a.z & ~a.x
    bx, by, bz = b.x & ~b.z, b.x & b.z, b.z & ~b.x
    # XY = iZ, YZ = iX, ZX = iY and the reversed orders pick up -i
    up = _popcount((ax & by) | (ay & bz) | (az & bx))
    down = _popcount((ay & bx) | (az & by) | (ax & bz))
    return (up - down) % 4


def multiply(a: PauliString, b: PauliString) -> PhasedPauli:
    """Group product ``a * b`` including its phase."""
    _check_dims(a, b)
    return PhasedPauli(_product_phase(a, b), PauliString(a.n, a.x ^ b.x, a.z ^ b.z))


def commutator(a: PauliString, b: PauliString) -> "OperatorSum":
    """``[a, b] = ab - ba``: empty if they commute, else ``2 ab``."""
    _check_dims(a, b)
    if a.commutes(b):
        return OperatorSum(a.n)
    prod = multiply(a, b)
    return OperatorSum(a.n, {prod.word: 2 * prod.phase})


class OperatorSum:
    """Complex linear combination of Pauli words on a fixed number of qubits.

    Immutable; coefficients with ``|c| <= EPS_ZERO`` are dropped on construction.
    """

    __slots__ = ("n", "_terms")

    def __init__(self, n: int, terms: Mapping[PauliString, complex] | None = None):
        self.n = n
        clean = {}
        for p, c in (terms or {}).items():
            if p.n != n:
                raise ValueError(f"dimension mismatch: {p.n} vs {n} qubits")
            if abs(c) > EPS_ZERO:
                clean[p] = complex(c)
        self._terms = MappingProxyType(clean)

    @classmethod
    def from_pauli(cls, p: PauliString, coeff: complex = 1.0) -> "OperatorSum":
        return cls(p.n, {p: coeff})

    @property
    def terms(self) -> Mapping[PauliString, complex]:
        return self._terms

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self) -> Iterator[tuple[PauliString, complex]]:
        return iter(self._terms.items())

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __getitem__(self, p: PauliString) -> complex:
        return self._terms.get(p, 0j)

    def __add__(self, other: "OperatorSum") -> "OperatorSum":
        if self.n != other.n:
            raise ValueError(f"dimension mismatch: {self.n} vs {other.n} qubits")
        acc = dict(self._terms)
        for p, c in other:
            acc[p] = acc.get(p, 0j) + c
        return OperatorSum(self.n, acc)

    def __sub__(self, other: "OperatorSum") -> "OperatorSum":
        return self + (-1) * other

    def __mul__(self, scalar: complex) -> "OperatorSum":
        return OperatorSum(self.n, {p: scalar * c for p, c in self})

    __rmul__ = __mul__

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, OperatorSum):
            return NotImplemented
        return self.n == other.n and dict(self._terms) == dict(other._terms)

    def allclose(self, other: "OperatorSum", atol: float = 1e-9) -> bool:
        keys = set(self._terms) | set(other._terms)
        return self.n == other.n and all(abs(self[k] - other[k]) <= atol for k in keys)

    def support_mask(self) -> int:
        mask = 0
        for p in self._terms:
            mask |= p.support_mask
        return mask

    def commutator_with(self, h: "Hamiltonian") -> "OperatorSum":
        """``[H, self]`` expanded term by term."""
        acc: dict[PauliString, complex] = {}
        for q, c in self._terms.items():
            for p, theta in h.terms:
                if p.commutes(q):
                    continue
                prod = multiply(p, q)
                acc[prod.word] = acc.get(prod.word, 0j) + 2 * theta * c * prod.phase
        return OperatorSum(self.n, acc)

    def expectation(self, rho: np.ndarray) -> complex:
        return complex(np.trace(self.to_matrix() @ rho))

    def to_matrix(self) -> np.ndarray:
        if self.n > N_MAX_DENSE:
            raise ValueError(f"{self.n} qubits exceeds the dense limit of {N_MAX_DENSE}")
        dim = 1 << self.n
        out = np.zeros((dim, dim), dtype=complex)
        for p, c in self._terms.items():
            cols, rows, vals = p._dense_action()
            out[rows, cols] += c * vals
        return out

    def __repr__(self) -> str:
        inner = ", ".join(f"{c:.6g}*[{p.render()}]" for p, c in self._terms.items())
        return f"OperatorSum({self.n}, {{{inner}}})"


@dataclass(frozen=True)
class Hamiltonian:
    """Traceless Pauli-basis Hamiltonian ``H = sum_m theta_m P_m``."""

    n: int
    terms: tuple[tuple[PauliString, float], ...]

    def __post_init__(self):
        seen = set()
        for p, theta in self.terms:
            if p.n != self.n:
                raise ValueError(f"term {p.render()} has {p.n} qubits, expected {self.n}")
            if p.is_identity():
                raise ValueError("identity term not allowed (Hamiltonian must be traceless)")
            if p in seen:
                raise ValueError(f"duplicate Pauli term {p.render()}")
            if not np.isfinite(theta):
                raise ValueError(f"non-finite coefficient for {p.render()}")
            seen.add(p)

    @classmethod
    def from_terms(cls, n: int, terms: Iterable[tuple[str | PauliString, float]]) -> "Hamiltonian":
        built = []
        for p, theta in terms:
            if isinstance(p, str):
                p = PauliString.parse(p, n)
            built.append((p, float(theta)))
        return cls(n, tuple(built))

    @classmethod
    def from_structure(cls, paulis: Iterable[PauliString], coeffs: Iterable[float]) -> "Hamiltonian":
        paulis = tuple(paulis)
        if not paulis:
            raise ValueError("Hamiltonian needs at least one term")
        return cls(paulis[0].n, tuple(zip(paulis, (float(c) for c in coeffs))))

    @property
    def r(self) -> int:
        return len(self.terms)

    @property
    def paulis(self) -> tuple[PauliString, ...]:
        return tuple(p for p, _ in self.terms)

    @property
    def coeffs(self) -> np.ndarray:
        return np.array([theta for _, theta in self.terms], dtype=float)

    @property
    def theta_max(self) -> float:
        """``max_m |theta_m|``, zero for an empty Hamiltonian."""
        return float(np.max(np.abs(self.coeffs))) if self.terms else 0.0

    def with_coeffs(self, coeffs: Iterable[float]) -> "Hamiltonian":
        return Hamiltonian.from_structure(self.paulis, coeffs)

    def subset(self, indices: Iterable[int]) -> "Hamiltonian":
        return Hamiltonian(self.n, tuple(self.terms[i] for i in indices))

    def is_commuting(self) -> bool:
        ps = self.paulis
        return all(ps[i].commutes(ps[j]) for i in range(len(ps)) for j in range(i))

    def to_operator_sum(self) -> OperatorSum:
        return OperatorSum(self.n, {p: theta for p, theta in self.terms})

    def to_matrix(self) -> np.ndarray:
        return self.to_operator_sum().to_matrix()


def iterated_commutator(h: Hamiltonian, p: PauliString, m: int) -> OperatorSum:
    """``[H^m P] = [H, [H, ..., [H, P]]]`` with ``[H^0 P] = P``."""
    if m < 0:
        raise ValueError("order must be non-negative")
    if p.n != h.n:
        raise ValueError(f"dimension mismatch: {p.n} vs {h.n} qubits")
    s = OperatorSum.from_pauli(p)
    for _ in range(m):
        s = s.commutator_with(h)
    return s


def spectral_norm(s: OperatorSum, n_max: int = N_MAX_DENSE) -> float:
    """Largest singular value of the dense realization of ``s``."""
    if s.n > n_max:
        raise ValueError(f"{s.n} qubits exceeds the dense limit of {n_max}")
    if not s:
        return 0.0
    if len(s) == 1:
        return abs(next(iter(s.terms.values())))
    mat = s.to_matrix()
    herm = mat.conj().T
    if np.allclose(mat, herm, atol=1e-13, rtol=0):
        return float(np.max(np.abs(np.linalg.eigvalsh(mat))))
    if np.allclose(mat, -herm, atol=1e-13, rtol=0):
        return float(np.max(np.abs(np.linalg.eigvalsh(1j * mat))))
    return float(np.linalg.norm(mat, 2))
