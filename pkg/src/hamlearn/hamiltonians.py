"""Model Hamiltonians, random ensembles and the JSON spec format.

Spec files look like ``{"n": 3, "terms": [{"pauli": "Z0 Z1", "coeff": 0.5}, ...]}``.
Instead of explicit terms a spec may carry an ``ensemble`` block, e.g.
``{"family": "tfim", "n": 8, "dist": "unif(-1,1)", "seed": 7}``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

import numpy as np

from .pauli import Hamiltonian, PauliString

_UNIF = re.compile(r"^unif\(\s*([-+0-9.eE]+)\s*,\s*([-+0-9.eE]+)\s*\)$")


class SpecError(ValueError):
    """Malformed Hamiltonian spec; ``line``/``column`` are set for JSON syntax errors."""

    def __init__(self, msg: str, line: int | None = None, column: int | None = None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(msg + where)
        self.line = line
        self.column = column


def tfim_structure(n: int) -> list[PauliString]:
    """Open-chain TFIM terms: ``Z_i Z_{i+1}`` for ``i < n-1``, then ``X_i``."""
    if n < 2:
        raise ValueError("a TFIM chain needs at least two sites")
    zz = [PauliString.parse(f"Z{i} Z{i + 1}", n) for i in range(n - 1)]
    xs = [PauliString.single(n, i, "X") for i in range(n)]
    return zz + xs


def tfim(J, B) -> Hamiltonian:
    J = np.asarray(J, dtype=float)
    B = np.asarray(B, dtype=float)
    if J.size != B.size - 1:
        raise ValueError("need n-1 couplings for n fields")
    return Hamiltonian.from_structure(tfim_structure(B.size), np.concatenate([J, B]))


def random_tfim(n: int, rng: np.random.Generator, low: float = -1.0, high: float = 1.0) -> Hamiltonian:
    J = rng.uniform(low, high, n - 1)
    B = rng.uniform(low, high, n)
    return tfim(J, B)


def random_sparse(
    n: int,
    rng: np.random.Generator,
    n_terms: int | None = None,
    max_weight: int = 2,
    span: int = 2,
) -> Hamiltonian:
    """Random geometrically local Paulis on a chain with ``Unif(-1, 1)`` coefficients.

    Each term acts on ``1..max_weight`` sites chosen inside a window of ``span + 1``
    consecutive sites, with uniformly random non-identity letters.
    """
    if n < 1:
        raise ValueError("need at least one qubit")
    n_terms = n_terms if n_terms is not None else int(rng.integers(n, 2 * n + 1))
    seen: dict[PauliString, None] = {}
    attempts = 0
    while len(seen) < n_terms and attempts < 50 * n_terms:
        attempts += 1
        start = int(rng.integers(0, n))
        window = list(range(start, min(n, start + span + 1)))
        weight = int(rng.integers(1, min(max_weight, len(window)) + 1))
        sites = sorted(rng.choice(window, size=weight, replace=False).tolist())
        letters = rng.choice(["X", "Y", "Z"], size=weight)
        p = PauliString.parse(" ".join(f"{a}{s}" for a, s in zip(letters, sites)), n)
        seen.setdefault(p)
    paulis = list(seen)
    return Hamiltonian.from_structure(paulis, rng.uniform(-1.0, 1.0, len(paulis)))


def random_commuting(n: int, rng: np.random.Generator, n_terms: int | None = None, max_weight: int = 2) -> Hamiltonian:
    """Random diagonal (``Z``-only) local Hamiltonian; all terms commute."""
    h = random_sparse(n, rng, n_terms, max_weight)
    paulis = [PauliString(n, 0, p.support_mask) for p in h.paulis]
    uniq = list(dict.fromkeys(paulis))
    return Hamiltonian.from_structure(uniq, h.coeffs[: len(uniq)])


# -- spec files -----------------------------------------------------------

def _parse_dist(text: str) -> tuple[float, float]:
    m = _UNIF.match(text.strip().lower())
    if not m:
        raise SpecError(f"unsupported distribution {text!r}; expected unif(a,b)")
    low, high = float(m.group(1)), float(m.group(2))
    if not low < high:
        raise SpecError("distribution bounds must satisfy a < b")
    return low, high


def ensemble_from_spec(spec: dict) -> "TfimEnsemble":
    if not isinstance(spec, dict):
        raise SpecError("ensemble must be a JSON object")
    family = spec.get("family")
    if family != "tfim":
        raise SpecError(f"unknown ensemble family {family!r}")
    n = spec.get("n")
    if not isinstance(n, int) or n < 2:
        raise SpecError("ensemble n must be an integer >= 2")
    low, high = _parse_dist(spec.get("dist", "unif(-1,1)"))
    seed = spec.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise SpecError("ensemble seed must be a non-negative integer")
    return TfimEnsemble(n, seed, low, high)


def from_ensemble(spec: dict, trial: int = 0) -> Hamiltonian:
    return ensemble_from_spec(spec).draw(trial)


def from_spec(data: dict) -> Hamiltonian:
    if not isinstance(data, dict):
        raise SpecError("spec must be a JSON object")
    if "ensemble" in data:
        return from_ensemble(data["ensemble"])
    n = data.get("n")
    if not isinstance(n, int) or n < 1:
        raise SpecError("spec needs an integer n >= 1")
    terms = data.get("terms")
    if not isinstance(terms, list) or not terms:
        raise SpecError("spec needs a non-empty terms list")
    parsed = []
    seen: dict[PauliString, int] = {}
    for k, t in enumerate(terms):
        if not isinstance(t, dict) or "pauli" not in t or "coeff" not in t:
            raise SpecError(f"term {k} must have 'pauli' and 'coeff'")
        try:
            p = PauliString.parse(str(t["pauli"]), n)
            c = float(t["coeff"])
        except (TypeError, ValueError) as exc:
            raise SpecError(f"term {k}: {exc}") from exc
        if p in seen:
            raise SpecError(f"duplicate term {p.render()!r} at positions {seen[p]} and {k}")
        seen[p] = k
        parsed.append((p, c))
    try:
        return Hamiltonian.from_terms(n, parsed)
    except ValueError as exc:
        raise SpecError(str(exc)) from exc


def loads_spec(text: str) -> Hamiltonian:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from exc
    return from_spec(data)


def load_spec(path) -> Hamiltonian:
    with open(path, encoding="utf-8") as fh:
        return loads_spec(fh.read())


def to_spec(h: Hamiltonian) -> dict:
    return {"n": h.n, "terms": [{"pauli": p.render(), "coeff": float(c)} for p, c in zip(h.paulis, h.coeffs)]}


def dumps_spec(h: Hamiltonian) -> str:
    return json.dumps(to_spec(h), indent=2)


@dataclass(frozen=True)
class TfimEnsemble:
    """Seeded family of random TFIMs; trial ``k`` draws from its own stream."""

    n: int
    seed: int = 0
    low: float = -1.0
    high: float = 1.0

    def draw(self, trial: int) -> Hamiltonian:
        rng = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(trial,)))
        return random_tfim(self.n, rng, self.low, self.high)
