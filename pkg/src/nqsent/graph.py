"""Computation graphs for feed-forward network states and feature reduction.

A graph maps n spins to one complex amplitude. Node kinds:

* ``input``     reads one raw spin, value = w * s_i + b
* ``linear``    affine combination of predecessor scalars
* ``nonlinear`` sigma(b + sum w_j x_j), the only nonlinear primitive
* ``output``    affine sink; mode ``amplitude`` or ``log_amplitude`` (exp of value)

Weights and biases are real except at the output node, where complex
coefficients are permitted on edges from nodes that carry no direct affine
spin dependence (so the direct output feature stays real). Raw spins are
referenced as ``("s", i)`` internally and ``"s_1"``..``"s_n"`` in JSON.

Feature reduction rewrites the amplitude as G(t_1..t_mu) over mu affine
features with mu <= k+1, k the number of live nonlinear nodes: each
nonlinear pre-activation contributes its direct affine part as a candidate
feature, the output contributes one more, constants are folded, and
linearly dependent rows are dropped by a greedy QR pass.
"""

from __future__ import annotations

import heapq
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .activations import Activation, format_activation, parse_activation, _checked_exp
from .core import AffineFeature, SpinConfig, spin_matrix
from .errors import AmplitudeOverflowError, ContractError, CycleError

# node input references are int node ids or ("s", spin_index) raw-spin tuples
DEFAULT_CHUNK = 1 << 16
DEPENDENCE_TOL = 1e-10
# rows whose weight part is pure cancellation debris relative to the row
# magnitude count as constants; anything larger stays a feature so folding
# never discards float-significant spin dependence
_CONST_TOL = 1e-15


@dataclass(frozen=True)
class Node:
    id: int
    kind: str
    inputs: tuple = ()
    bias: complex = 0.0
    activation: Activation | None = None
    output_mode: str | None = None

    def __post_init__(self):
        if self.kind not in ("input", "linear", "nonlinear", "output"):
            raise ContractError(f"unknown node kind {self.kind!r}")
        if self.kind == "nonlinear" and self.activation is None:
            raise ContractError(f"nonlinear node {self.id} needs an activation")
        if self.kind == "output" and self.output_mode not in ("amplitude", "log_amplitude"):
            raise ContractError(f"output node {self.id} needs a valid output_mode")
        object.__setattr__(self, "inputs", tuple((ref, complex(w)) for ref, w in self.inputs))
        object.__setattr__(self, "bias", complex(self.bias))


def _is_raw(ref) -> bool:
    return isinstance(ref, tuple) and len(ref) == 2 and ref[0] == "s"


class ComputationGraph:
    """Validated DAG over n spins with exactly one output node."""

    def __init__(self, nodes: Sequence[Node], n: int):
        self.n = int(n)
        self.nodes = {node.id: node for node in nodes}
        if len(self.nodes) != len(nodes):
            raise ContractError("duplicate node ids")
        self._validate_refs()
        self.order = _kahn_sort(self.nodes)
        self._validate_output_and_weights()
        self._flag_reachability()
        self.live_order = [i for i in self.order if i not in self.dead]
        self.k = sum(1 for i in self.live_order if self.nodes[i].kind == "nonlinear")
        self.k_total = sum(1 for v in self.nodes.values() if v.kind == "nonlinear")
        self._consumers = _consumer_counts(self.nodes, self.live_order)
        self._value_real, self._acc_real = self._node_real_flags()
        for nid in self.live_order:
            node = self.nodes[nid]
            if node.kind != "nonlinear" or node.activation.holomorphic:
                continue
            if not self._acc_real[nid]:
                raise ContractError(
                    f"node {nid}: activation {node.activation.kind} cannot take a complex pre-activation"
                )

    # -- validation ---------------------------------------------------------

    def _validate_refs(self):
        for node in self.nodes.values():
            raw = [r for r, _ in node.inputs if _is_raw(r)]
            for r, _ in node.inputs:
                if _is_raw(r):
                    if not 0 <= r[1] < self.n:
                        raise ContractError(f"node {node.id} reads spin {r[1]} outside 0..{self.n - 1}")
                elif r not in self.nodes:
                    raise ContractError(f"node {node.id} references missing node {r}")
                elif self.nodes[r].kind == "output":
                    raise ContractError(f"node {node.id} reads the output node")
            if node.kind == "input":
                if len(node.inputs) != 1 or not raw:
                    raise ContractError(f"input node {node.id} must read exactly one raw spin")

    def _validate_output_and_weights(self):
        outputs = [v for v in self.nodes.values() if v.kind == "output"]
        if len(outputs) != 1:
            raise ContractError(f"graph needs exactly one output node, found {len(outputs)}")
        self.output_id = outputs[0].id
        carries = self._carries_spin_dependence()
        for node in self.nodes.values():
            if node.kind != "output":
                if node.bias.imag != 0.0 or any(w.imag != 0.0 for _, w in node.inputs):
                    raise ContractError(f"node {node.id}: complex parameters are only allowed at the output")
            else:
                for ref, w in node.inputs:
                    if w.imag != 0.0 and (_is_raw(ref) or carries[ref]):
                        raise ContractError(
                            "complex output weights are only allowed on edges without direct spin dependence"
                        )
        self._carries = carries

    def _carries_spin_dependence(self) -> dict[int, bool]:
        carries: dict[int, bool] = {}
        for nid in self.order:
            node = self.nodes[nid]
            if node.kind == "nonlinear":
                carries[nid] = False  # treated as an opaque atom downstream
            else:
                flag = False
                for ref, _ in node.inputs:
                    flag = flag or (_is_raw(ref) or carries[ref])
                carries[nid] = flag
        return carries

    def _flag_reachability(self):
        preds: dict[int, list[int]] = {nid: [] for nid in self.nodes}
        for node in self.nodes.values():
            for ref, _ in node.inputs:
                if not _is_raw(ref):
                    preds[node.id].append(ref)
        co = set()
        stack = [self.output_id]
        while stack:
            nid = stack.pop()
            if nid in co:
                continue
            co.add(nid)
            stack.extend(preds[nid])
        self.dead = frozenset(self.nodes) - co

    # -- structure helpers ---------------------------------------------------

    def pruned(self) -> "ComputationGraph":
        """Copy without dead nodes; evaluates identically on every config."""
        return ComputationGraph([v for k, v in self.nodes.items() if k not in self.dead], self.n)

    @property
    def output_node(self) -> Node:
        return self.nodes[self.output_id]

    # -- evaluation -----------------------------------------------------------

    def _node_real_flags(self) -> tuple[dict[int, bool], dict[int, bool]]:
        """Per-node realness of the value and of the affine accumulator.

        A nonlinear node with a complex mode has a complex value but may
        still take a real pre-activation (e.g. i*relu of real inputs), so
        the two flags differ.
        """
        value_real: dict[int, bool] = {}
        acc_real: dict[int, bool] = {}
        for nid in self.live_order:
            node = self.nodes[nid]
            preds_real = all(_is_raw(r) or value_real[r] for r, _ in node.inputs)
            coeffs_real = node.bias.imag == 0.0 and all(w.imag == 0.0 for _, w in node.inputs)
            acc_real[nid] = preds_real and coeffs_real
            if node.kind == "nonlinear":
                value_real[nid] = acc_real[nid] and node.activation.mode == "real"
            else:
                value_real[nid] = acc_real[nid]
        return value_real, acc_real

    def eval_ports(self, ports: np.ndarray, bits: np.ndarray | None = None) -> np.ndarray:
        """Forward pass on a batch; ports has shape (n, B) of port values.

        Port values are +/-1 spins for ordinary graphs and feature values for
        residual graphs produced by feature reduction.
        """
        ports = np.atleast_2d(np.asarray(ports))
        B = ports.shape[1]
        complex_ports = np.iscomplexobj(ports)
        values: dict[int, np.ndarray] = {}
        remaining = dict(self._consumers)
        out = None
        for nid in self.live_order:
            node = self.nodes[nid]
            dtype = np.float64 if self._acc_real[nid] and not complex_ports else np.complex128
            acc = np.full(B, node.bias if dtype == np.complex128 else node.bias.real, dtype=dtype)
            for ref, w in node.inputs:
                src = ports[ref[1]] if _is_raw(ref) else values[ref]
                coeff = w if dtype == np.complex128 else w.real
                acc += coeff * src
            if node.kind == "nonlinear":
                try:
                    val = node.activation.apply(acc)
                except AmplitudeOverflowError as exc:
                    raise _relabel_overflow(exc, bits) from None
            elif node.kind == "output" and node.output_mode == "log_amplitude":
                try:
                    val = _checked_exp(acc)
                except AmplitudeOverflowError as exc:
                    raise _relabel_overflow(exc, bits) from None
            else:
                val = acc
            values[nid] = val
            for ref, _ in node.inputs:
                if not _is_raw(ref):
                    remaining[ref] -= 1
                    if remaining[ref] == 0:
                        del values[ref]
            if node.kind == "output":
                out = val
        return np.asarray(out, dtype=np.complex128)

    def eval_bits(self, bits: np.ndarray, threads: int = 1, chunk: int = DEFAULT_CHUNK) -> np.ndarray:
        """Amplitudes for an array of configuration bits.

        Work is split into fixed-size chunks; the chunking (and therefore
        every floating-point operation) is independent of the thread count.
        """
        bits = np.asarray(bits, dtype=np.int64)
        pieces = [bits[i : i + chunk] for i in range(0, len(bits), chunk)]

        def run(piece):
            return self.eval_ports(spin_matrix(piece, self.n).T, bits=piece)

        if threads > 1 and len(pieces) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(run, pieces))
        else:
            results = [run(p) for p in pieces]
        return np.concatenate(results) if results else np.zeros(0, dtype=np.complex128)


def _relabel_overflow(exc: AmplitudeOverflowError, bits: np.ndarray | None) -> AmplitudeOverflowError:
    if bits is None or exc.bits is None:
        return exc
    global_bits = int(bits[exc.bits])
    return AmplitudeOverflowError(
        f"amplitude overflow at configuration bits={global_bits:#x}: {exc}", bits=global_bits
    )


def _kahn_sort(nodes: dict[int, Node]) -> list[int]:
    indeg = {nid: 0 for nid in nodes}
    succ: dict[int, list[int]] = {nid: [] for nid in nodes}
    for node in nodes.values():
        for ref, _ in node.inputs:
            if not _is_raw(ref):
                succ[ref].append(node.id)
                indeg[node.id] += 1
    heap = [nid for nid, d in indeg.items() if d == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        nid = heapq.heappop(heap)
        order.append(nid)
        for nxt in succ[nid]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                heapq.heappush(heap, nxt)
    if len(order) < len(nodes):
        raise CycleError(_find_cycle(nodes, {nid for nid in nodes if nid not in set(order)}))
    return order


def _find_cycle(nodes: dict[int, Node], remaining: set[int]) -> list[int]:
    start = min(remaining)
    path, seen = [], {}
    nid = start
    while nid not in seen:
        seen[nid] = len(path)
        path.append(nid)
        nid = next(r for r, _ in nodes[nid].inputs if not _is_raw(r) and r in remaining)
    return path[seen[nid] :] + [nid]


def _consumer_counts(nodes: dict[int, Node], live_order: list[int]) -> dict[int, int]:
    counts = {nid: 0 for nid in live_order}
    live = set(live_order)
    for nid in live_order:
        for ref, _ in nodes[nid].inputs:
            if not _is_raw(ref) and ref in live:
                counts[ref] += 1
    return counts


def validate_and_sort(g: ComputationGraph) -> list[int]:
    """Deterministic topological ordering (Kahn, lowest id first)."""
    return list(g.order)


def eval_full(g: ComputationGraph, s: SpinConfig) -> complex:
    """Amplitude of a single configuration via a full forward pass."""
    if s.n != g.n:
        raise ContractError(f"config has n={s.n}, graph has n={g.n}")
    return complex(g.eval_bits(np.array([s.bits]))[0])


# ---------------------------------------------------------------------------
# feature reduction
# ---------------------------------------------------------------------------


@dataclass
class ReducedForm:
    """Amplitude as G(t_1..t_mu) over affine features of the spins.

    ``residual`` is a computation graph whose ports are the feature values,
    so G carries no symbolic algebra: it is the original DAG with all input
    dependence rerouted through the retained features.
    """

    features: list[AffineFeature]
    residual: ComputationGraph
    n: int
    k: int

    @property
    def mu(self) -> int:
        return len(self.features)

    def feature_matrix(self) -> np.ndarray:
        """(mu, n) stacked weights; used for vectorized feature evaluation."""
        if not self.features:
            return np.zeros((0, self.n))
        return np.stack([f.weights for f in self.features])

    def feature_values(self, bits: np.ndarray) -> np.ndarray:
        """(mu, B) feature values for an array of configuration bits."""
        if not self.features:
            return np.zeros((0, len(np.atleast_1d(bits))))
        W = self.feature_matrix()
        b = np.array([f.bias for f in self.features])
        return (spin_matrix(bits, self.n) @ W.T + b).T

    def g_eval(self, tvals) -> np.ndarray:
        """Evaluate G on feature values of shape (mu,) or (mu, B)."""
        arr = np.asarray(tvals, dtype=np.float64)
        single = arr.ndim == 1
        if single:
            arr = arr[:, None]
        out = self.residual.eval_ports(arr)
        return complex(out[0]) if single else out

    def eval_bits(self, bits: np.ndarray, threads: int = 1, chunk: int = DEFAULT_CHUNK) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.int64)
        pieces = [bits[i : i + chunk] for i in range(0, len(bits), chunk)]

        def run(piece):
            return self.residual.eval_ports(self.feature_values(piece), bits=piece)

        if threads > 1 and len(pieces) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(run, pieces))
        else:
            results = [run(p) for p in pieces]
        return np.concatenate(results) if results else np.zeros(0, dtype=np.complex128)


def eval_reduced(r: ReducedForm, s: SpinConfig) -> complex:
    if s.n != r.n:
        raise ContractError(f"config has n={s.n}, reduced form has n={r.n}")
    t = np.array([f.evaluate(s) for f in r.features])
    return complex(r.g_eval(t))


class _Affine:
    """Value decomposed as w.s + c + lam.phi over nonlinear outputs phi."""

    __slots__ = ("w", "c", "lam")

    def __init__(self, n, k):
        self.w = np.zeros(n)
        self.c = 0.0 + 0.0j
        self.lam = np.zeros(k, dtype=np.complex128)


def feature_reduce(g: ComputationGraph, tol: float = DEPENDENCE_TOL) -> ReducedForm:
    """Collect candidate features, drop constants and dependent rows, and
    rewrite the graph over the retained feature ports."""
    nonlinear_ids = [nid for nid in g.live_order if g.nodes[nid].kind == "nonlinear"]
    k = len(nonlinear_ids)
    phi_index = {nid: j for j, nid in enumerate(nonlinear_ids)}

    sym: dict[int, _Affine] = {}
    pre_forms: list[_Affine] = [None] * k
    out_form = None
    for nid in g.live_order:
        node = g.nodes[nid]
        form = _Affine(g.n, k)
        form.c = node.bias
        for ref, w in node.inputs:
            if _is_raw(ref):
                form.w[ref[1]] += w.real
            else:
                src = sym[ref]
                form.w += w.real * src.w
                form.c += w * src.c
                form.lam += w * src.lam
        if node.kind == "nonlinear":
            pre_forms[phi_index[nid]] = form
            atom = _Affine(g.n, k)
            atom.lam[phi_index[nid]] = 1.0
            sym[nid] = atom
        elif node.kind == "output":
            out_form = form
            sym[nid] = form
        else:
            sym[nid] = form

    candidates = [(f.w, f.c.real) for f in pre_forms] + [(out_form.w, out_form.c.real)]

    # constants fold into the residual graph rather than becoming features
    is_const = [np.abs(w).sum() <= _CONST_TOL * max(1.0, abs(b) + np.abs(w).sum()) for w, b in candidates]

    rows = [np.concatenate([w, [b]]) for w, b in candidates]
    retained: list[int] = []
    basis: list[np.ndarray] = []
    for j, row in enumerate(rows):
        if is_const[j]:
            continue
        v = row.copy()
        for _ in range(2):  # re-orthogonalize for stability
            for q in basis:
                v -= (q @ v) * q
        if np.linalg.norm(v) > tol * np.linalg.norm(row):
            retained.append(j)
            basis.append(v / np.linalg.norm(v))

    mu = len(retained)
    features = [AffineFeature(candidates[j][0].copy(), candidates[j][1]) for j in retained]

    # express every candidate as beta . features + gamma
    betas = np.zeros((len(candidates), mu))
    gammas = np.zeros(len(candidates), dtype=np.complex128)
    if mu:
        A = np.column_stack([rows[j] for j in retained] + [np.eye(g.n + 1)[-1]])
    for j, row in enumerate(rows):
        if j in retained:
            betas[j, retained.index(j)] = 1.0
        elif is_const[j] or mu == 0:
            gammas[j] = candidates[j][1]
        else:
            x, *_ = np.linalg.lstsq(A, row, rcond=None)
            betas[j] = x[:mu]
            gammas[j] = x[mu]

    # imaginary constant part of the output reappears in its residual bias
    out_imag = out_form.c - out_form.c.real

    residual_nodes = []
    port = lambda m: ("s", m)
    new_phi_id = {}
    for j, nid in enumerate(nonlinear_ids):
        inputs = [(port(m), betas[j, m]) for m in range(mu) if betas[j, m] != 0.0]
        inputs += [
            (new_phi_id[nonlinear_ids[i]], pre_forms[j].lam[i].real)
            for i in range(j)
            if pre_forms[j].lam[i] != 0.0
        ]
        residual_nodes.append(
            Node(
                id=j,
                kind="nonlinear",
                inputs=tuple(inputs),
                bias=gammas[j].real,
                activation=g.nodes[nid].activation,
            )
        )
        new_phi_id[nid] = j
    out_j = len(candidates) - 1
    out_inputs = [(port(m), betas[out_j, m]) for m in range(mu) if betas[out_j, m] != 0.0]
    out_inputs += [
        (new_phi_id[nonlinear_ids[i]], out_form.lam[i]) for i in range(k) if out_form.lam[i] != 0.0
    ]
    residual_nodes.append(
        Node(
            id=k,
            kind="output",
            inputs=tuple(out_inputs),
            bias=gammas[out_j] + out_imag,
            output_mode=g.output_node.output_mode,
        )
    )
    residual = ComputationGraph(residual_nodes, n=mu)
    return ReducedForm(features=features, residual=residual, n=g.n, k=k)


# ---------------------------------------------------------------------------
# JSON interchange
# ---------------------------------------------------------------------------


def _num_to_json(x: complex):
    x = complex(x)
    return x.real if x.imag == 0.0 else [x.real, x.imag]


def _num_from_json(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


def _ref_to_json(ref):
    return f"s_{ref[1] + 1}" if _is_raw(ref) else ref


def _ref_from_json(v):
    if isinstance(v, str):
        if not v.startswith("s_"):
            raise ContractError(f"bad raw spin reference {v!r}")
        return ("s", int(v[2:]) - 1)
    return int(v)


def to_json(g: ComputationGraph) -> dict:
    nodes = []
    for nid in sorted(g.nodes):
        node = g.nodes[nid]
        entry = {
            "id": node.id,
            "kind": node.kind,
            "inputs": [{"from": _ref_to_json(r), "weight": _num_to_json(w)} for r, w in node.inputs],
            "bias": _num_to_json(node.bias),
        }
        if node.activation is not None:
            entry["activation"] = format_activation(node.activation)
        if node.output_mode is not None:
            entry["output_mode"] = node.output_mode
        nodes.append(entry)
    return {"schema_version": 1, "n": g.n, "nodes": nodes}


def from_json(doc: dict) -> ComputationGraph:
    nodes = []
    for entry in doc["nodes"]:
        kind = entry["kind"]
        nodes.append(
            Node(
                id=int(entry["id"]),
                kind=kind,
                inputs=tuple(
                    (_ref_from_json(e["from"]), _num_from_json(e["weight"]))
                    for e in entry.get("inputs", [])
                ),
                bias=_num_from_json(entry.get("bias", 0.0)),
                activation=parse_activation(entry["activation"]) if entry.get("activation") else None,
                output_mode=entry.get("output_mode", "amplitude") if kind == "output" else None,
            )
        )
    return ComputationGraph(nodes, n=int(doc["n"]))


def save_graph(g: ComputationGraph, path) -> None:
    with open(path, "w") as fh:
        json.dump(to_json(g), fh, indent=1)
        fh.write("\n")


def load_graph(path) -> ComputationGraph:
    with open(path) as fh:
        return from_json(json.load(fh))
