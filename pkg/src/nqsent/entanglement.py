"""Reduced density matrices, von Neumann entropy, Schmidt rank and trace
distances.

Entropies are computed and stored in nats; base 2 is a presentation
conversion. Eigenvalues come from the Gram matrix of the bipartition matrix
formed on the smaller side, which costs O(4^min(|A|, n-|A|)) memory instead
of a full SVD of the 2^|A| x 2^(n-|A|) matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import Subregion
from .errors import CapacityError, ContractError, ConsistencyError, DomainError, NumericError
from .statevector import Statevector

RANK_THRESHOLD_REL = 1e-10
RANK_THRESHOLD_ABS = 1e-14
_EIG_CLAMP = -1e-12
_DRIFT_RENORM = 1e-10
_DRIFT_ERROR = 1e-8
REDUCED_DM_MAX_ROWS = 1 << 13


@dataclass
class BipartitionMatrix:
    """Amplitudes rearranged as M[u, v] with u indexing subregion bits.

    Row index bit j corresponds to the j-th smallest member of A; column
    bits run over the complement the same way. The rearrangement is a
    permutation, so the Frobenius norm equals the state norm.
    """

    M: np.ndarray
    region: Subregion

    @property
    def n(self) -> int:
        return self.region.n


def _scatter_indices(members: list[int], count: int) -> np.ndarray:
    """Map dense indices 0..2^m-1 onto configuration bits at given positions."""
    idx = np.arange(count, dtype=np.int64)
    out = np.zeros(count, dtype=np.int64)
    for j, pos in enumerate(members):
        out |= ((idx >> j) & 1) << pos
    return out


def bipartition(psi: Statevector, region: Subregion) -> BipartitionMatrix:
    """Bit-scatter the amplitudes into a 2^|A| x 2^(n-|A|) matrix."""
    if region.n != psi.n:
        raise ContractError(f"region has n={region.n}, state has n={psi.n}")
    m = region.size
    if m == 0 or m == psi.n:
        raise ContractError("subregion must be a proper nonempty subset")
    rows = _scatter_indices(region.members(), 1 << m)
    cols = _scatter_indices(region.complement().members(), 1 << (psi.n - m))
    M = psi.amplitudes[rows[:, None] | cols[None, :]]
    return BipartitionMatrix(M, region)


def flatten(bm: BipartitionMatrix) -> np.ndarray:
    """Inverse of :func:`bipartition`: amplitudes back in bits order."""
    m = bm.region.size
    rows = _scatter_indices(bm.region.members(), 1 << m)
    cols = _scatter_indices(bm.region.complement().members(), 1 << (bm.n - m))
    out = np.empty(1 << bm.n, dtype=np.complex128)
    out[rows[:, None] | cols[None, :]] = bm.M
    return out


@dataclass
class EntropyResult:
    eigenvalues: np.ndarray  # descending, nonnegative, summing to 1
    entropy: float
    schmidt_rank: int
    log_base: str = "e"

    def converted(self, base: str) -> "EntropyResult":
        if base == self.log_base:
            return self
        if base == "2":
            return replace(self, entropy=self.entropy / math.log(2.0), log_base="2")
        if base == "e":
            return replace(self, entropy=self.entropy * math.log(2.0), log_base="e")
        raise DomainError(f"unsupported log base {base!r}")


def entropy(bm: BipartitionMatrix, threshold_rel: float = RANK_THRESHOLD_REL) -> EntropyResult:
    """Spectrum, entropy (nats) and numerical Schmidt rank of the bipartition.

    The Gram matrix is accumulated over fixed-size blocks of the long axis in
    block order, so results do not depend on the thread count of upstream
    evaluation.
    """
    M = bm.M if bm.M.shape[0] <= bm.M.shape[1] else bm.M.conj().T
    gram = _blocked_gram(M)
    try:
        lam = np.linalg.eigvalsh(gram)[::-1]
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigensolver failed: {exc}") from exc
    if lam.size and lam[-1] < _EIG_CLAMP:
        raise NumericError(f"Gram eigenvalue {lam[-1]:.3e} below clamp window")
    lam = np.clip(lam, 0.0, None)
    drift = abs(float(lam.sum()) - 1.0)
    if drift > _DRIFT_ERROR:
        raise ConsistencyError(f"eigenvalue sum drifts from 1 by {drift:.3e}")
    if drift > _DRIFT_RENORM or lam.sum() != 1.0:
        lam = lam / lam.sum()
    nz = lam[lam > 0.0]
    ent = float(-(nz * np.log(nz)).sum()) if nz.size else 0.0
    cut = max(threshold_rel * float(lam[0]) if lam.size else 0.0, RANK_THRESHOLD_ABS)
    rank = int((lam > cut).sum())
    return EntropyResult(eigenvalues=lam, entropy=ent, schmidt_rank=rank)


def _blocked_gram(M: np.ndarray, block: int = 1 << 14) -> np.ndarray:
    rows, cols = M.shape
    if cols <= block:
        return M @ M.conj().T
    gram = np.zeros((rows, rows), dtype=np.complex128)
    for start in range(0, cols, block):
        piece = M[:, start : start + block]
        gram += piece @ piece.conj().T
    return gram


def subregion_entropy(
    psi: Statevector, region: Subregion, threshold_rel: float = RANK_THRESHOLD_REL
) -> EntropyResult:
    return entropy(bipartition(psi, region), threshold_rel)


def reduced_density(psi: Statevector, region: Subregion) -> np.ndarray:
    """Dense reduced density matrix on the subregion (rows capped at 2^13)."""
    if (1 << region.size) > REDUCED_DM_MAX_ROWS:
        raise CapacityError(
            f"|A|={region.size} needs {1 << region.size} rows, above the dense cap {REDUCED_DM_MAX_ROWS}"
        )
    M = bipartition(psi, region).M
    return M @ M.conj().T


def pure_trace_distance(psi: Statevector, phi: Statevector) -> float:
    """Half trace distance of two pure states: sqrt(1 - |<psi|phi>|^2)."""
    if psi.n != phi.n:
        raise ContractError(f"dimension mismatch: n={psi.n} vs n={phi.n}")
    ov = np.vdot(psi.amplitudes, phi.amplitudes)
    return float(np.sqrt(max(0.0, 1.0 - min(1.0, abs(ov) ** 2))))


def reduced_trace_distance(psi: Statevector, phi: Statevector, region: Subregion) -> float:
    """Half trace distance of the reduced density matrices on the subregion."""
    if psi.n != phi.n:
        raise ContractError(f"dimension mismatch: n={psi.n} vs n={phi.n}")
    diff = reduced_density(psi, region) - reduced_density(phi, region)
    try:
        eig = np.linalg.eigvalsh(diff)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigensolver failed: {exc}") from exc
    return 0.5 * float(np.abs(eig).sum())


def binary_entropy(t: float) -> float:
    """H2(t) in nats, continuous at the endpoints."""
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"H2 argument {t} outside [0, 1]")
    if t in (0.0, 1.0):
        return 0.0
    return float(-t * math.log(t) - (1.0 - t) * math.log(1.0 - t))


def fannes_audenaert_bound(T: float, size_a: int, log_base: str = "e") -> float:
    """Entropy-difference bound T*log(2^|A| - 1) + H2(T).

    T is the half trace distance of the two reduced density matrices.
    """
    if not 0.0 <= T <= 1.0:
        raise DomainError(f"trace distance {T} outside [0, 1]")
    if size_a < 1:
        raise DomainError("subregion must have at least one spin")
    val = T * math.log((1 << size_a) - 1) + binary_entropy(T)
    if log_base == "2":
        return val / math.log(2.0)
    if log_base == "e":
        return val
    raise DomainError(f"unsupported log base {log_base!r}")


def fa_slack_from_bound(trace_bound: float, size_a: int) -> float:
    """Worst-case entropy difference when only an upper bound on T is known.

    The bound T log(2^|A|-1) + H2(T) peaks at T* = 1 - 2^(-|A|) and decreases
    beyond it, so for trace_bound >= T* the supremum over feasible T is the
    peak value log(2^|A|) = |A| ln 2.
    """
    if trace_bound < 0.0:
        raise DomainError("trace bound must be nonnegative")
    t_star = 1.0 - 0.5**size_a
    if trace_bound >= t_star:
        return size_a * math.log(2.0)
    return fannes_audenaert_bound(trace_bound, size_a)
