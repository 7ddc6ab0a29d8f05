"""Chebyshev approximation (one and several variables), polynomial auxiliary
states, and the explicit entropy-bound chain.

Coefficients come from Chebyshev-Gauss quadrature at 4(d+1) nodes per axis
(2(d+1) for three or more variables), which reproduces the truncated
Chebyshev series up to negligible aliasing. Certified error bounds use the
ellipse parameter a and sup bound C of the approximated function:

    1 variable :  2 C rho^-d / (rho - 1),            rho = e^a
    k variables:  C k rho^-1 (2 rho / (rho-1))^k rho^-d   (shared a)

The bound chain for a state with reduced form G(t_1..t_mu) is: fit error
eps -> auxiliary-state 2-norm distance 2 sqrt(eps/norm) 2^(n/4) -> reduced
trace distance (monotone under partial trace) -> entropy difference via the
Fannes-Audenaert inequality -> measured entropy <= ln(rank bound) + slack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from .activations import _KINDS
from .core import Subregion, feature_supnorm
from .errors import CapacityError, ContractError, DegreeError, DomainError, NumericError
from .graph import ComputationGraph, ReducedForm, feature_reduce, _is_raw
from .statevector import Statevector, materialize
from .entanglement import fa_slack_from_bound, subregion_entropy

MULTIVAR_CAP = 4
MONOMIAL_DEGREE_CAP = 30
DENSE_GRID_POINTS = 10_000
_SUP_INFLATION = 1.1
_A_GRID = [0.25 * j for j in range(1, 15)]
_NON_ANALYTIC = {"relu", "gelu", "dicke_delta", "rsqrt", "recip"}
_POLY_KINDS = {"identity", "poly"}
_EINSUM = {
    1: "a,aB->B",
    2: "ab,aB,bB->B",
    3: "abc,aB,bB,cB->B",
    4: "abcd,aB,bB,cB,dB->B",
}


@dataclass
class ChebyshevApprox:
    """Tensor of Chebyshev coefficients with per-variable domains [-t_bar, t_bar]."""

    coeffs: np.ndarray
    t_bars: tuple[float, ...]
    degree: int
    error_bound: float | None
    error_empirical: float

    @property
    def mu(self) -> int:
        return len(self.t_bars)

    def evaluate(self, tvals: np.ndarray) -> np.ndarray:
        """Evaluate at raw feature values of shape (mu, B)."""
        tvals = np.atleast_2d(np.asarray(tvals, dtype=np.float64))
        if tvals.shape[0] != self.mu:
            raise ContractError(f"expected {self.mu} variables, got {tvals.shape[0]}")
        x = tvals / np.asarray(self.t_bars)[:, None]
        return self.evaluate_unit(x)

    def evaluate_unit(self, x: np.ndarray) -> np.ndarray:
        """Evaluate at rescaled points in [-1, 1]^mu, shape (mu, B)."""
        x = np.atleast_2d(np.asarray(x))
        d = self.degree
        mats = []
        for j in range(self.mu):
            T = np.empty((d + 1,) + x.shape[1:], dtype=x.dtype)
            T[0] = 1.0
            if d >= 1:
                T[1] = x[j]
            for i in range(2, d + 1):
                T[i] = 2.0 * x[j] * T[i - 1] - T[i - 2]
            mats.append(T)
        return np.einsum(_EINSUM[self.mu], self.coeffs, *mats)


def _quad_nodes(count: int) -> np.ndarray:
    return np.cos(np.pi * (np.arange(count) + 0.5) / count)


def _cos_matrix(degree: int, count: int) -> np.ndarray:
    j = np.arange(degree + 1)[:, None]
    i = np.arange(count)[None, :]
    return np.cos(np.pi * j * (i + 0.5) / count)


def _grid_1d(points: int) -> np.ndarray:
    return np.linspace(-1.0, 1.0, points)


def bernstein_bound_1d(a: float, C: float, d: int) -> float:
    rho = math.exp(a)
    return 2.0 * C * rho ** (-d) / (rho - 1.0)


def bernstein_bound_multi(a: float, C: float, d: int, mu: int) -> float:
    rho = math.exp(a)
    prefactor = C * mu / rho * (2.0 * rho / (rho - 1.0)) ** mu
    return prefactor * rho ** (-d)


def cheb_fit_1d(f, t_bar: float, d: int, analytic: tuple[float, float] | None = None) -> ChebyshevApprox:
    """Fit x -> f(t_bar * x) on [-1, 1] by a degree-d Chebyshev expansion.

    ``analytic`` optionally supplies (a, C) for a certified error bound.
    """
    if d < 0:
        raise DomainError("degree must be nonnegative")
    if t_bar <= 0:
        raise DomainError("t_bar must be positive")
    K = 4 * (d + 1)
    nodes = _quad_nodes(K)
    fv = np.asarray(f(t_bar * nodes), dtype=np.complex128)
    if not np.all(np.isfinite(fv)):
        raise NumericError("function not finite at quadrature nodes")
    coeffs = (_cos_matrix(d, K) @ fv) * (2.0 / K)
    coeffs[0] /= 2.0
    approx = ChebyshevApprox(coeffs, (float(t_bar),), d, None, 0.0)
    grid = _grid_1d(DENSE_GRID_POINTS)
    resid = np.abs(np.asarray(f(t_bar * grid), dtype=np.complex128) - approx.evaluate_unit(grid[None, :]))
    approx.error_empirical = float(resid.max())
    if analytic is not None:
        approx.error_bound = bernstein_bound_1d(analytic[0], analytic[1], d)
    return approx


def cheb_fit_multi(
    G, t_bars, d: int, analytic: tuple[float, float] | None = None
) -> ChebyshevApprox:
    """Tensor-product fit of G(t_1..t_mu); G maps a (mu, B) array to (B,) values.

    ``analytic`` supplies a shared ellipse parameter and sup bound; the
    certified constant follows the multivariable Bernstein lemma.
    """
    t_bars = tuple(float(t) for t in t_bars)
    mu = len(t_bars)
    if mu > MULTIVAR_CAP:
        raise CapacityError(f"mu={mu} above the tensor-grid cap {MULTIVAR_CAP}")
    if mu == 0:
        raise ContractError("need at least one variable")
    if d < 0:
        raise DomainError("degree must be nonnegative")
    if mu == 1:
        out = cheb_fit_1d(lambda t: G(np.atleast_2d(t)), t_bars[0], d, analytic=None)
        if analytic is not None:
            out.error_bound = bernstein_bound_1d(analytic[0], analytic[1], d)
        return out

    K = (4 if mu <= 2 else 2) * (d + 1)
    nodes = _quad_nodes(K)
    mesh = np.meshgrid(*([nodes] * mu), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh]) * np.asarray(t_bars)[:, None]
    vals = np.asarray(G(pts), dtype=np.complex128).reshape((K,) * mu)
    if not np.all(np.isfinite(vals)):
        raise NumericError("function not finite on the quadrature grid")
    cos = _cos_matrix(d, K)
    coeffs = vals
    for _ in range(mu):
        # contract the leading axis and rotate it to the back
        coeffs = np.tensordot(cos, coeffs, axes=([1], [0]))
        coeffs = np.moveaxis(coeffs, 0, -1) * (2.0 / K)
    scale = np.ones(d + 1)
    scale[0] = 0.5
    for ax in range(mu):
        shape = [1] * mu
        shape[ax] = d + 1
        coeffs = coeffs * scale.reshape(shape)
    approx = ChebyshevApprox(coeffs, t_bars, d, None, 0.0)

    per_axis = max(2, int(math.ceil(DENSE_GRID_POINTS ** (1.0 / mu))))
    g1 = _grid_1d(per_axis)
    gmesh = np.meshgrid(*([g1] * mu), indexing="ij")
    gx = np.stack([m.ravel() for m in gmesh])
    gt = gx * np.asarray(t_bars)[:, None]
    resid = np.abs(np.asarray(G(gt), dtype=np.complex128) - approx.evaluate_unit(gx))
    approx.error_empirical = float(resid.max())
    if analytic is not None:
        approx.error_bound = bernstein_bound_multi(analytic[0], analytic[1], d, mu)
    return approx


def monomial_expand(c: ChebyshevApprox) -> np.ndarray:
    """Exact per-variable change of basis to monomials in the rescaled
    variables x_j = t_j / t_bar_j; index order matches the coefficient tensor."""
    if c.degree > MONOMIAL_DEGREE_CAP:
        raise DegreeError(
            f"degree {c.degree} above the monomial conversion limit {MONOMIAL_DEGREE_CAP}; "
            "evaluate in the Chebyshev basis instead"
        )
    d = c.degree
    conv = np.zeros((d + 1, d + 1))
    for j in range(d + 1):
        unit = np.zeros(j + 1)
        unit[j] = 1.0
        conv[: j + 1, j] = np.polynomial.chebyshev.cheb2poly(unit)
    out = c.coeffs
    for _ in range(c.mu):
        out = np.tensordot(conv, out, axes=([1], [0]))
        out = np.moveaxis(out, 0, -1)
    return out


class _PolyStateEvaluator:
    """Amplitude evaluator P(t_1(s)..t_mu(s)) for materialize()."""

    def __init__(self, reduced: ReducedForm, poly: ChebyshevApprox):
        self.reduced = reduced
        self.poly = poly
        self.n = reduced.n

    def eval_bits(self, bits, threads: int = 1, chunk: int = 1 << 16):
        return self.poly.evaluate(self.reduced.feature_values(np.asarray(bits)))


def auxiliary_state(r: ReducedForm, P: ChebyshevApprox, threads: int = 1) -> Statevector:
    """Normalized state whose amplitudes are the fitted polynomial of the features."""
    if P.mu != r.mu:
        raise ContractError(f"fit has {P.mu} variables, reduced form has {r.mu}")
    for f, t_bar in zip(r.features, P.t_bars):
        if feature_supnorm(f) > t_bar * (1.0 + 1e-12):
            raise ContractError(
                f"feature sup-norm {feature_supnorm(f):.6g} exceeds fit domain {t_bar:.6g}"
            )
    return materialize(_PolyStateEvaluator(r, P), threads=threads)


def rank_bound(d: int, mu: int) -> int:
    """Schmidt-rank bound ((d+1)(d+2)/2)^mu of any polynomial auxiliary state."""
    if d < 0 or mu < 1:
        raise DomainError("need d >= 0 and mu >= 1")
    return ((d + 1) * (d + 2) // 2) ** mu


def degree_for_n(n: int, a: float, C: float) -> int:
    """Smallest degree making the one-variable chain bound O(1) at size n."""
    if a <= 0 or C <= 0:
        raise DomainError("need a > 0 and C > 0")
    value = (n / (2.0 * a)) * math.log(2.0) + math.log(n) / a + math.log(8.0 * C / (math.exp(a) - 1.0)) / a
    return max(0, math.ceil(value))


def degree_for_n_multi(n: int, rho_star: float, C: float, mu: int) -> int:
    """Multivariable analog; rho_star = exp(a) must exceed 1."""
    if rho_star <= 1.0:
        raise DomainError("rho_star must exceed 1")
    if C <= 0 or mu < 1:
        raise DomainError("need C > 0 and mu >= 1")
    log_r = math.log(rho_star)
    value = (
        n * math.log(2.0) / (2.0 * log_r)
        + 2.0 * math.log(n) / log_r
        + math.log(C * 2.0 ** (mu + 2) * mu * (rho_star - 1.0) ** (-mu) * rho_star ** (mu - 1)) / log_r
    )
    return max(0, math.ceil(value))


def poly_mlp_bound(w0: int, d0: int, h: int) -> float:
    """Entropy cap w0 * ln((h^d0 + 1)(h^d0 + 2)/2) for polynomial-activation MLPs."""
    if w0 < 1 or d0 < 1 or h < 1:
        raise DomainError("need w0, d0, h >= 1")
    hp = h**d0
    return w0 * math.log((hp + 1) * (hp + 2) // 2)


# ---------------------------------------------------------------------------
# certificates for reduced forms
# ---------------------------------------------------------------------------


def _residual_kinds(r: ReducedForm) -> list[str]:
    kinds = []
    for nid in r.residual.live_order:
        node = r.residual.nodes[nid]
        if node.kind == "nonlinear":
            kinds.append(node.activation.kind)
            if node.activation.mode == "pair":
                kinds.append(node.activation.second)
    return kinds


def polynomial_degree_vector(r: ReducedForm) -> np.ndarray | None:
    """Per-variable degree of G when the reduced evaluator is a polynomial."""
    res = r.residual
    if res.output_node.output_mode != "amplitude":
        return None
    deg: dict[int, np.ndarray] = {}
    for nid in res.live_order:
        node = res.nodes[nid]
        acc = np.zeros(r.mu, dtype=np.int64)
        for ref, _ in node.inputs:
            vec = np.eye(r.mu, dtype=np.int64)[ref[1]] if _is_raw(ref) else deg[ref]
            acc = np.maximum(acc, vec)
        if node.kind == "nonlinear":
            kind = node.activation.kind
            if kind not in _POLY_KINDS or (node.activation.mode == "pair" and node.activation.second not in _POLY_KINDS):
                return None
            if kind == "poly":
                coeffs = np.asarray(node.activation.coeffs)
                h = int(np.nonzero(coeffs)[0].max()) if np.any(coeffs) else 0
                acc = acc * h
        deg[nid] = acc
    return deg[res.output_id]


@dataclass
class Certificate:
    a: float | None  # shared ellipse parameter; None for exact polynomials
    C: float | None
    exact_degree: int | None  # max per-variable degree when G is polynomial

    def error_bound(self, d: int, mu: int) -> float:
        if self.exact_degree is not None:
            return 0.0 if d >= self.exact_degree else math.inf
        if mu == 1:
            return bernstein_bound_1d(self.a, self.C, d)
        return bernstein_bound_multi(self.a, self.C, d, mu)


def _boundary_grid(a: float, mu: int, total: int = DENSE_GRID_POINTS) -> np.ndarray:
    per_axis = max(8, int(round(total ** (1.0 / mu))))
    theta = 2.0 * math.pi * (np.arange(per_axis) + 0.5) / per_axis
    ring = np.cosh(a) * np.cos(theta) + 1j * np.sinh(a) * np.sin(theta)
    mesh = np.meshgrid(*([ring] * mu), indexing="ij")
    return np.stack([m.ravel() for m in mesh])


def reduced_certificate(r: ReducedForm, d_ref: int = 16) -> Certificate | None:
    """Analyticity certificate for the reduced evaluator, when obtainable.

    Exact polynomial evaluators certify with zero error. Otherwise all
    activation kinds must be analytic; pole-limited kinds (tanh, softplus)
    are only certified when their pre-activations read the feature ports
    directly, in which case the shared ellipse keeps the affine image away
    from the nearest singularity with a 10% margin. The sup bound C is a
    boundary-sampling estimate inflated by 10%.
    """
    if r.mu == 0:
        return None
    kinds = set(_residual_kinds(r))
    if kinds & _NON_ANALYTIC:
        return None
    degvec = polynomial_degree_vector(r)
    if degvec is not None:
        return Certificate(a=None, C=None, exact_degree=int(degvec.max()))
    if r.mu > MULTIVAR_CAP:
        return None

    t_bars = np.array([feature_supnorm(f) for f in r.features])
    sinh_cap = None
    for nid in r.residual.live_order:
        node = r.residual.nodes[nid]
        if node.kind != "nonlinear":
            continue
        limited = [
            k
            for k in ([node.activation.kind] + ([node.activation.second] if node.activation.mode == "pair" else []))
            if not _KINDS[k].entire
        ]
        if not limited:
            continue
        if any(not _is_raw(ref) for ref, _ in node.inputs):
            return None  # pole-limited nonlinearity composed with another one
        reach = sum(abs(w.real) * t_bars[ref[1]] for ref, w in node.inputs)
        if reach == 0.0:
            continue
        for k in limited:
            nearest = _KINDS[k].pole_spacing / 2.0
            cap = 0.9 * nearest / reach
            sinh_cap = cap if sinh_cap is None else min(sinh_cap, cap)

    def sup_on(a_try: float) -> float:
        pts = _boundary_grid(a_try, r.mu) * t_bars[:, None]
        vals = r.residual.eval_ports(pts)
        return float(np.max(np.abs(vals)))

    try:
        if sinh_cap is not None:
            a = math.asinh(sinh_cap)
            return Certificate(a=a, C=sup_on(a) * _SUP_INFLATION, exact_degree=None)
        best = None
        for a_try in _A_GRID:
            try:
                sup = sup_on(a_try)
            except (OverflowError, NumericError):
                break
            if not math.isfinite(sup):
                break
            score = math.log(max(sup, 1e-300)) - a_try * d_ref
            if best is None or score < best[0]:
                best = (score, a_try, sup * _SUP_INFLATION)
        if best is None:
            return None
        return Certificate(a=best[1], C=best[2], exact_degree=None)
    except NumericError:
        return None


# ---------------------------------------------------------------------------
# end-to-end bound report
# ---------------------------------------------------------------------------


@dataclass
class BoundReport:
    n: int
    k: int
    mu: int
    d: int
    rank_bound: int
    entropy_bound_aux: float
    eps_poly: float | None
    delta_norm_bound: float | None
    trace_bound: float | None
    fa_slack: float | None
    entropy_bound_final: float | None
    certified: bool
    empirical_only: bool
    eps_raw: float | None
    error_empirical: float
    ellipse_a: float | None
    ellipse_C: float | None
    measured_entropy: float
    measured_entropy_aux: float
    measured_two_norm_distance: float
    region_mask: int

    def to_json(self) -> dict:
        doc = asdict(self)
        doc["region_mask_hex"] = f"{self.region_mask:x}"
        del doc["region_mask"]
        doc["schema_version"] = 1
        return doc


def full_bound_report(
    g: ComputationGraph,
    region: Subregion,
    degree: int | str = "auto",
    threads: int = 1,
) -> BoundReport:
    """Assemble the explicit bound chain for one graph and subregion.

    With a certificate the report is rigorous (up to the sampled C); without
    one it carries the empirical fit error only and no final bound.
    """
    from .statevector import two_norm_distance  # local to avoid cycle noise

    r = feature_reduce(g)
    if r.mu == 0:
        raise ContractError("state has no feature dependence; nothing to bound")
    t_bars = tuple(feature_supnorm(f) for f in r.features)
    cert = reduced_certificate(r)

    if degree == "auto":
        if cert is None:
            raise DomainError("no analyticity certificate; pass an explicit degree")
        if cert.exact_degree is not None:
            d = cert.exact_degree
        elif r.mu == 1:
            d = degree_for_n(g.n, cert.a, cert.C)
        else:
            d = degree_for_n_multi(g.n, math.exp(cert.a), cert.C, r.mu)
    else:
        d = int(degree)

    analytic = (cert.a, cert.C) if cert is not None and cert.a is not None else None
    fit = cheb_fit_multi(r.g_eval, t_bars, d, analytic=analytic)
    if cert is not None and cert.exact_degree is not None:
        fit.error_bound = cert.error_bound(d, r.mu)

    psi = materialize(g, threads=threads)
    psi_aux = auxiliary_state(r, fit, threads=threads)
    s_measured = subregion_entropy(psi, region).entropy
    s_aux = subregion_entropy(psi_aux, region).entropy
    dist = two_norm_distance(psi, psi_aux)

    certified = fit.error_bound is not None and math.isfinite(fit.error_bound)
    if certified:
        eps_raw = fit.error_bound
        eps_poly = eps_raw / psi.norm_was
        delta_bound = 2.0 * math.sqrt(eps_poly) * 2.0 ** (g.n / 4.0)
        trace_bound = min(1.0, delta_bound)
        slack = fa_slack_from_bound(trace_bound, region.size)
        final = math.log(rank_bound(d, r.mu)) + slack
    else:
        eps_raw = eps_poly = delta_bound = trace_bound = slack = final = None

    return BoundReport(
        n=g.n,
        k=r.k,
        mu=r.mu,
        d=d,
        rank_bound=rank_bound(d, r.mu),
        entropy_bound_aux=math.log(rank_bound(d, r.mu)),
        eps_poly=eps_poly,
        delta_norm_bound=delta_bound,
        trace_bound=trace_bound,
        fa_slack=slack,
        entropy_bound_final=final,
        certified=certified,
        empirical_only=not certified,
        eps_raw=eps_raw,
        error_empirical=fit.error_empirical,
        ellipse_a=cert.a if cert else None,
        ellipse_C=cert.C if cert else None,
        measured_entropy=s_measured,
        measured_entropy_aux=s_aux,
        measured_two_norm_distance=dist,
        region_mask=region.mask,
    )
