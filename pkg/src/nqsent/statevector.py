"""Exact dense statevectors over all 2^n configurations.

Amplitudes are stored as complex128 indexed by configuration bits. Chunked
evaluation parallelizes over fixed-size index ranges; the chunk structure
(and therefore every floating-point result including the norm, which is
reduced over per-chunk partial norms in chunk order) does not depend on the
thread count, so output is byte-identical across --threads settings.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .core import check_n
from .errors import ContractError, DegenerateStateError
from .graph import DEFAULT_CHUNK, ComputationGraph, ReducedForm

NQSV_MAGIC = b"NQSV"
NQSV_VERSION = 1


@dataclass
class Statevector:
    """Normalized amplitudes plus the pre-normalization 2-norm."""

    amplitudes: np.ndarray
    n: int
    norm_was: float

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (1 << self.n,):
            raise ContractError(
                f"amplitude array has shape {self.amplitudes.shape}, expected ({1 << self.n},)"
            )


def from_amplitudes(raw: np.ndarray, max_n: int | None = None) -> Statevector:
    """Normalize a raw amplitude array of length 2^n into a Statevector."""
    raw = np.asarray(raw, dtype=np.complex128)
    n = int(raw.shape[0]).bit_length() - 1
    if raw.shape != (1 << n,):
        raise ContractError(f"length {raw.shape[0]} is not a power of two")
    check_n(n, max_n)
    norm = float(np.linalg.norm(raw))
    if norm == 0.0:
        raise DegenerateStateError("all amplitudes vanish")
    return Statevector(raw / norm, n, norm)


def materialize(
    obj: ComputationGraph | ReducedForm,
    threads: int = 1,
    chunk: int = DEFAULT_CHUNK,
    max_n: int | None = None,
) -> Statevector:
    """Evaluate every amplitude of a graph or reduced form and normalize."""
    n = obj.n
    check_n(n, max_n)
    total = 1 << n
    starts = list(range(0, total, chunk))

    def run(start):
        bits = np.arange(start, min(start + chunk, total), dtype=np.int64)
        return obj.eval_bits(bits, threads=1, chunk=chunk)

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            pieces = list(pool.map(run, starts))
    else:
        pieces = [run(s) for s in starts]

    amplitudes = np.concatenate(pieces)
    # individual amplitudes can sit near the float ceiling (or floor), so the
    # squared norm is accumulated in units of the largest magnitude
    scale = 0.0
    for piece in pieces:
        if piece.size:
            scale = max(scale, float(np.abs(piece).max()))
    if scale == 0.0:
        raise DegenerateStateError("all amplitudes vanish; state cannot be normalized")
    norm_sq_scaled = 0.0
    for piece in pieces:  # sequential, chunk-ordered reduction
        scaled = piece / scale
        norm_sq_scaled += float(np.sum(scaled.real**2 + scaled.imag**2))
    norm = scale * float(np.sqrt(norm_sq_scaled))
    if not np.isfinite(norm) or norm == 0.0:
        raise DegenerateStateError(f"state norm {norm} cannot normalize the amplitudes")
    return Statevector(amplitudes / norm, n, norm)


def overlap(psi: Statevector, phi: Statevector) -> complex:
    """<psi|phi> with conjugation on the first argument."""
    if psi.n != phi.n:
        raise ContractError(f"dimension mismatch: n={psi.n} vs n={phi.n}")
    return complex(np.vdot(psi.amplitudes, phi.amplitudes))


def two_norm_distance(psi: Statevector, phi: Statevector) -> float:
    if psi.n != phi.n:
        raise ContractError(f"dimension mismatch: n={psi.n} vs n={phi.n}")
    return float(np.linalg.norm(psi.amplitudes - phi.amplitudes))


def save_nqsv(psi: Statevector, path) -> None:
    """16-byte header (magic, u32 version, u32 n, u32 reserved) then little-endian
    interleaved re/im float64 pairs in ascending bits order."""
    header = NQSV_MAGIC + struct.pack("<III", NQSV_VERSION, psi.n, 0)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(psi.amplitudes.astype("<c16").tobytes())


def load_nqsv(path) -> Statevector:
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16 or header[:4] != NQSV_MAGIC:
            raise ContractError(f"{path}: not a statevector dump")
        version, n, _ = struct.unpack("<III", header[4:])
        if version != NQSV_VERSION:
            raise ContractError(f"{path}: unsupported dump version {version}")
        data = np.frombuffer(fh.read(), dtype="<c16")
    if data.shape != (1 << n,):
        raise ContractError(f"{path}: truncated dump")
    amplitudes = data.astype(np.complex128)
    norm = float(np.linalg.norm(amplitudes))
    if norm == 0.0:
        raise DegenerateStateError(f"{path}: zero-norm state")
    return Statevector(amplitudes / norm, n, norm)
