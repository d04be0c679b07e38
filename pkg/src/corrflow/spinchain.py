"""Spin-1/2 chain Hamiltonians and Pauli-string observables as dense matrices.

Basis convention: site ``s`` is bit ``s`` of the basis-state integer, and a
zero bit is spin up (the +1 eigenstate of sigma^z).  Site indices are 0-based.

The chain Hamiltonian is

    H = sum_s (gamma X_s + lam Z_s) + j1 sum_s Z_s Z_{s+1} + j2 sum_s Z_s Z_{s+2}

with open boundaries by default (L-1 nearest and L-2 next-nearest bonds).
"""
from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import asdict, dataclass

import numpy as np

MAX_LENGTH = 14

_AXES = ("X", "Y", "Z")


@dataclass(frozen=True)
class SpinChainSpec:
    length: int
    gamma: float = 0.0
    lam: float = 0.0
    j1: float = 0.0
    j2: float = 0.0
    boundary: str = "open"

    def __post_init__(self):
        if not isinstance(self.length, (int, np.integer)) or isinstance(self.length, bool):
            raise TypeError(f"length must be an integer, got {self.length!r}")
        if self.length < 2:
            raise ValueError(f"chain length must be >= 2, got {self.length}")
        for name in ("gamma", "lam", "j1", "j2"):
            value = getattr(self, name)
            if not math.isfinite(float(value)):
                raise ValueError(f"coupling {name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.boundary not in ("open", "periodic"):
            raise ValueError(f"boundary must be 'open' or 'periodic', got {self.boundary!r}")
        if self.boundary == "periodic" and self.length < 3:
            raise ValueError("periodic boundary needs at least 3 sites")
        object.__setattr__(self, "length", int(self.length))

    @classmethod
    def eth(cls, length: int) -> "SpinChainSpec":
        """Non-integrable point (gamma, lam, j1, j2) = (0.8, 0.5, 1, 1)."""
        return cls(length, 0.8, 0.5, 1.0, 1.0)

    @classmethod
    def integrable(cls, length: int) -> "SpinChainSpec":
        """Transverse-field Ising point (-0.5, 0, -0.5, 0)."""
        return cls(length, -0.5, 0.0, -0.5, 0.0)

    @property
    def dim(self) -> int:
        return 1 << self.length

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SpinChainSpec":
        d = dict(d)
        if "lambda" in d:
            if "lam" in d:
                raise ValueError("give either 'lambda' or 'lam', not both")
            d["lam"] = d.pop("lambda")
        unknown = set(d) - {"length", "gamma", "lam", "j1", "j2", "boundary"}
        if unknown:
            raise ValueError(f"unknown spin-chain fields: {sorted(unknown)}")
        return cls(**d)

    def content_hash(self) -> str:
        """sha256 of the canonical JSON form; keys the spectrum cache."""
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-site Paulis, e.g. ``PauliString.parse("X3 Z4")``."""

    ops: tuple[tuple[int, str], ...] = ()

    def __post_init__(self):
        ops = tuple((int(s), str(a).upper()) for s, a in self.ops)
        sites = [s for s, _ in ops]
        for s, a in ops:
            if a not in _AXES:
                raise ValueError(f"unknown Pauli axis {a!r}")
            if s < 0:
                raise ValueError(f"negative site index {s}")
        if len(set(sites)) != len(sites):
            raise ValueError(f"duplicate site in Pauli string: {sites}")
        object.__setattr__(self, "ops", tuple(sorted(ops)))

    @classmethod
    def single(cls, site: int, axis: str) -> "PauliString":
        return cls(((site, axis),))

    @classmethod
    def parse(cls, label: str) -> "PauliString":
        label = label.strip()
        if label in ("", "I"):
            return cls()
        tokens = re.findall(r"([XYZxyz])\s*(\d+)", label)
        if "".join(a + s for a, s in tokens).upper() != re.sub(r"[\s,*]", "", label).upper():
            raise ValueError(f"cannot parse Pauli string {label!r}")
        return cls(tuple((int(s), a) for a, s in tokens))

    def __str__(self):
        return " ".join(f"{a}{s}" for s, a in self.ops) or "I"


def build_pauli_string(ps: PauliString, length: int) -> np.ndarray:
    """Dense ``2**length`` matrix of a Pauli string.

    Every column has exactly one nonzero entry, found by flipping the X/Y
    bits of the column index.  The result is real unless the string has Y
    factors.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    for s, _ in ps.ops:
        if s >= length:
            raise ValueError(f"site {s} out of range for chain of length {length}")
    dim = 1 << length
    cols = np.arange(dim)
    flip = 0
    sign = np.ones(dim)
    n_y = 0
    for s, a in ps.ops:
        bit = (cols >> s) & 1
        if a in ("X", "Y"):
            flip |= 1 << s
        if a in ("Z", "Y"):
            sign = sign * (1 - 2 * bit)
        if a == "Y":
            n_y += 1
    rows = cols ^ flip
    # Y = i X Z as a matrix product, so each Y contributes a factor i.
    if n_y:
        values = (1j ** n_y) * sign
        out = np.zeros((dim, dim), dtype=complex)
    else:
        values = sign
        out = np.zeros((dim, dim))
    out[rows, cols] = values
    return out


def _bonds(length: int, distance: int, boundary: str) -> list[tuple[int, int]]:
    if boundary == "open":
        return [(s, s + distance) for s in range(length - distance)]
    return [(s, (s + distance) % length) for s in range(length)]


def build_hamiltonian(spec: SpinChainSpec, max_length: int = MAX_LENGTH) -> np.ndarray:
    if spec.length > max_length:
        raise ValueError(
            f"L={spec.length} exceeds the dense-storage cap of {max_length} "
            f"(dimension {spec.dim})"
        )
    L = spec.length
    dim = spec.dim
    idx = np.arange(dim)
    z = 1.0 - 2.0 * ((idx[None, :] >> np.arange(L)[:, None]) & 1)

    diag = spec.lam * z.sum(axis=0)
    if spec.j1:
        for a, b in _bonds(L, 1, spec.boundary):
            diag += spec.j1 * z[a] * z[b]
    if spec.j2 and L > 2:
        for a, b in _bonds(L, 2, spec.boundary):
            diag += spec.j2 * z[a] * z[b]

    H = np.zeros((dim, dim))
    H[idx, idx] = diag
    if spec.gamma:
        for s in range(L):
            H[idx ^ (1 << s), idx] += spec.gamma
    return H


def mid_site(length: int) -> int:
    """Mid-chain site, floor(L/2) in 0-based labels."""
    return length // 2


def default_observable(spec: SpinChainSpec) -> np.ndarray:
    """sigma^x on the mid-chain site ``floor(L/2)``."""
    return build_pauli_string(PauliString.single(mid_site(spec.length), "X"), spec.length)


def central_pair(length: int) -> tuple[int, int]:
    """Adjacent sites straddling the chain centre.

    For even L this is (L/2 - 1, L/2), the pair mapped onto itself by the
    reflection s -> L-1-s.  For odd L it is (floor(L/2), floor(L/2) + 1).
    """
    if length < 2:
        raise ValueError("need at least two sites")
    if length % 2 == 0:
        return length // 2 - 1, length // 2
    return length // 2, length // 2 + 1
