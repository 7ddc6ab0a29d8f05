"""Foundational types: spin configurations, subregions, affine features and
seeded random streams.

Spins are +/-1 valued. Configuration ``bits`` encode spin ``i`` (0-indexed)
in bit ``i``: set bit means +1, clear bit means -1. All enumeration is in
ascending ``bits`` order, so array indices of a statevector coincide with
configuration bits.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import CapacityError, ContractError

DEFAULT_SPIN_CAP = 24
HARD_SPIN_CAP = 26

_MASK64 = (1 << 64) - 1


def resolve_spin_cap(max_n: int | None = None) -> int:
    """Effective spin cap: explicit override, then NQS_MAX_N env var, then 24.

    The hard ceiling of 26 cannot be raised (1 GiB of amplitudes).
    """
    cap = max_n
    if cap is None:
        env = os.environ.get("NQS_MAX_N")
        cap = int(env) if env else DEFAULT_SPIN_CAP
    if cap > HARD_SPIN_CAP:
        raise CapacityError(f"spin cap {cap} exceeds hard ceiling {HARD_SPIN_CAP}")
    return cap


def check_n(n: int, max_n: int | None = None) -> None:
    cap = resolve_spin_cap(max_n)
    if not 1 <= n <= cap:
        raise CapacityError(f"n={n} outside supported range 1..{cap}")


@dataclass(frozen=True)
class SpinConfig:
    """One configuration of ``n`` spins packed into an unsigned integer."""

    bits: int
    n: int

    def __post_init__(self):
        if not 0 <= self.bits < (1 << self.n):
            raise ContractError(f"bits={self.bits} out of range for n={self.n}")

    def spin(self, i: int) -> int:
        """Value (+1 or -1) of spin ``i`` (0-indexed)."""
        return 1 if (self.bits >> i) & 1 else -1

    def values(self) -> np.ndarray:
        """All spin values as a float array of +/-1, index = spin."""
        idx = np.arange(self.n)
        return ((self.bits >> idx) & 1) * 2.0 - 1.0


def enumerate_configs(n: int, max_n: int | None = None) -> Iterator[SpinConfig]:
    """Yield all 2^n configurations in ascending bits order."""
    check_n(n, max_n)  # validate eagerly, before the first next()

    def _gen():
        for bits in range(1 << n):
            yield SpinConfig(bits, n)

    return _gen()


def spin_matrix(bits: np.ndarray, n: int) -> np.ndarray:
    """(len(bits), n) float64 matrix of spin values for an array of configs."""
    bits = np.asarray(bits, dtype=np.int64)
    return ((bits[:, None] >> np.arange(n)) & 1) * 2.0 - 1.0


@dataclass(frozen=True)
class Subregion:
    """Subset A of the n spins, stored as a bit mask."""

    mask: int
    n: int

    def __post_init__(self):
        if not 0 <= self.mask < (1 << self.n):
            raise ContractError(f"mask={self.mask:#x} out of range for n={self.n}")

    @classmethod
    def from_members(cls, members, n: int) -> "Subregion":
        mask = 0
        for i in members:
            if not 0 <= i < n:
                raise ContractError(f"spin index {i} out of range for n={n}")
            mask |= 1 << i
        return cls(mask, n)

    @property
    def size(self) -> int:
        return bin(self.mask).count("1")

    def members(self) -> list[int]:
        """Member spin indices in ascending order."""
        return [i for i in range(self.n) if (self.mask >> i) & 1]

    def complement(self) -> "Subregion":
        return Subregion(~self.mask & ((1 << self.n) - 1), self.n)


@dataclass(frozen=True)
class AffineFeature:
    """Scalar map s -> sum_i w_i s_i + b on +/-1 spin configurations."""

    weights: np.ndarray
    bias: float

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=np.float64))

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def evaluate(self, s: SpinConfig) -> float:
        """Single-config value, accumulating terms in ascending spin index."""
        if s.n != self.n:
            raise ContractError(f"config has n={s.n}, feature has n={self.n}")
        acc = 0.0
        for i in range(self.n):
            acc += self.weights[i] * (1.0 if (s.bits >> i) & 1 else -1.0)
        return acc + self.bias

    def evaluate_split_order(self, s: SpinConfig, region: Subregion) -> float:
        """Value with summation grouped as (members of A asc + b/2) + (rest asc + b/2).

        This is the floating-point order matched bit-exactly by
        :func:`split_feature` parts.
        """
        if s.n != self.n or region.n != self.n:
            raise ContractError("dimension mismatch")
        accx = 0.0
        for i in region.members():
            accx += self.weights[i] * (1.0 if (s.bits >> i) & 1 else -1.0)
        accx += self.bias / 2.0
        accy = 0.0
        for i in region.complement().members():
            accy += self.weights[i] * (1.0 if (s.bits >> i) & 1 else -1.0)
        accy += self.bias / 2.0
        return accx + accy

    def eval_bits(self, bits: np.ndarray) -> np.ndarray:
        """Vectorized values for an array of configuration bits."""
        return spin_matrix(bits, self.n) @ self.weights + self.bias

    def eval_all(self) -> np.ndarray:
        """Values over all 2^n configurations in ascending bits order.

        Uses index doubling: flipping spin i from -1 to +1 adds 2 w_i, so the
        full table is built in O(2^n) additions independent of n per entry.
        """
        out = np.empty(1 << self.n, dtype=np.float64)
        out[0] = self.bias - self.weights.sum()
        size = 1
        for i in range(self.n):
            np.add(out[:size], 2.0 * self.weights[i], out=out[size : 2 * size])
            size *= 2
        return out


@dataclass(frozen=True)
class SplitFeature:
    """Affine feature split across a bipartition: x lives on A, y on the rest.

    The parent bias is shared half/half, so x(u) + y(v) reconstructs the
    parent value on every configuration.
    """

    x_part: AffineFeature
    y_part: AffineFeature
    region: Subregion

    def evaluate_parts(self, s: SpinConfig) -> tuple[float, float]:
        accx = 0.0
        for i in self.region.members():
            accx += self.x_part.weights[i] * (1.0 if (s.bits >> i) & 1 else -1.0)
        accx += self.x_part.bias
        accy = 0.0
        for i in self.region.complement().members():
            accy += self.y_part.weights[i] * (1.0 if (s.bits >> i) & 1 else -1.0)
        accy += self.y_part.bias
        return accx, accy

    def reconstruct(self, s: SpinConfig) -> float:
        x, y = self.evaluate_parts(s)
        return x + y


def split_feature(f: AffineFeature, region: Subregion) -> SplitFeature:
    """Split f into parts supported on the subregion and its complement."""
    if f.n != region.n:
        raise ContractError(f"feature has n={f.n}, region has n={region.n}")
    wx = np.zeros(f.n)
    wy = np.zeros(f.n)
    for i in range(f.n):
        if (region.mask >> i) & 1:
            wx[i] = f.weights[i]
        else:
            wy[i] = f.weights[i]
    half = f.bias / 2.0
    return SplitFeature(AffineFeature(wx, half), AffineFeature(wy, half), region)


def feature_supnorm(f: AffineFeature) -> float:
    """Tight sup of |f| over the hypercube: sum_i |w_i| + |b|."""
    return float(np.abs(f.weights).sum() + abs(f.bias))


def _splitmix64(h: int) -> int:
    h = (h + 0x9E3779B97F4A7C15) & _MASK64
    h = ((h ^ (h >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    h = ((h ^ (h >> 27)) * 0x94D049BB133111EB) & _MASK64
    return h ^ (h >> 31)


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream keyed by (seed, stream_id).

    Identical keys reproduce identical draw sequences regardless of thread
    scheduling; substreams derived via :meth:`child` are statistically
    independent.
    """

    seed: int
    stream_id: int = 0

    def child(self, *indices: int) -> "RngStream":
        h = self.stream_id
        for ix in indices:
            h = _splitmix64(h ^ (ix & _MASK64))
        return RngStream(self.seed, h)

    def generator(self) -> np.random.Generator:
        key = [self.seed & _MASK64, self.stream_id & _MASK64]
        return np.random.Generator(np.random.Philox(key=key))
