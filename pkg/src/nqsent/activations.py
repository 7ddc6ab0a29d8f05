"""Scalar nonlinearities and their complex lifts.

An activation is a base real function plus a complex mode:

* ``real``  : sigma(x)
* ``imag``  : i * sigma(x)          (pure-phase states when exponentiated)
* ``mixed`` : (1 + i) * sigma(x)
* ``pair``  : sigma(x) + i * sigma2(x)

Base kinds also include ``rsqrt`` (x -> 1/sqrt(x)) and ``recip`` (x -> 1/x),
which are needed to express per-sample normalization (LayerNorm, softmax)
as scalar graph nodes. ``dicke_delta`` is the ReLU tent
relu(x-1) - 2 relu(x) + relu(x+1), equal to the Kronecker delta at 0 on
integer inputs.

For bound certification, :func:`analyticity_params` returns a Bernstein
ellipse parameter and a sup bound for the rescaled function; it returns
``None`` for kinds where the machinery does not apply (relu, gelu,
dicke_delta, rsqrt, recip).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .errors import AmplitudeOverflowError, ContractError, DomainError, NumericError

EXP_OVERFLOW_LIMIT = 700.0

_MODES = ("real", "imag", "mixed", "pair")


def _relu(x):
    return np.maximum(x, 0.0)


def _gelu(x):
    # exact Gaussian-CDF form x * Phi(x)
    return x * 0.5 * (1.0 + erf(x / math.sqrt(2.0)))


def _dicke_delta(x):
    return _relu(x - 1.0) - 2.0 * _relu(x) + _relu(x + 1.0)


def _checked_exp(x):
    re_part = np.real(x) if np.iscomplexobj(x) else x
    mx = np.max(re_part) if np.ndim(x) else re_part
    if mx > EXP_OVERFLOW_LIMIT:
        idx = int(np.argmax(re_part)) if np.ndim(x) else None
        raise AmplitudeOverflowError(
            f"exp argument real part {float(mx):.3g} exceeds {EXP_OVERFLOW_LIMIT}", bits=idx
        )
    return np.exp(x)


def _rsqrt(x):
    if np.iscomplexobj(x):
        raise NumericError("rsqrt requires real input")
    if np.any(x <= 0.0):
        raise NumericError("rsqrt argument must be positive")
    return 1.0 / np.sqrt(x)


def _recip(x):
    if np.any(x == 0.0):
        raise NumericError("recip argument must be nonzero")
    return 1.0 / x


class _Kind:
    def __init__(self, fn, holomorphic, entire, pole_spacing=None):
        self.fn = fn
        # holomorphic kinds accept complex arguments (numpy implementation
        # is the analytic continuation); others require real input
        self.holomorphic = holomorphic
        self.entire = entire
        # for pole-limited kinds: sigma(z) is singular at z = i*pole_spacing*(m + 1/2)
        self.pole_spacing = pole_spacing


_KINDS: dict[str, _Kind] = {
    "identity": _Kind(lambda x: x, True, True),
    "tanh": _Kind(np.tanh, True, False, pole_spacing=math.pi),
    "sin": _Kind(np.sin, True, True),
    "cos": _Kind(np.cos, True, True),
    "relu": _Kind(_relu, False, False),
    "gelu": _Kind(_gelu, False, False),
    "softplus": _Kind(None, False, False),  # fn built per beta
    "exp": _Kind(_checked_exp, True, True),
    "dicke_delta": _Kind(_dicke_delta, False, False),
    "poly": _Kind(None, True, True),  # fn built per coeffs
    "rsqrt": _Kind(_rsqrt, False, False),
    "recip": _Kind(_recip, False, False),
}


@dataclass(frozen=True)
class Activation:
    """Base kind plus complex mode; ``second`` is the imaginary part in pair mode."""

    kind: str
    mode: str = "real"
    second: str | None = None
    beta: float | None = None
    coeffs: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ContractError(f"unknown activation kind {self.kind!r}")
        if self.mode not in _MODES:
            raise ContractError(f"unknown complex mode {self.mode!r}")
        if self.mode == "pair":
            if self.second not in _KINDS:
                raise ContractError("pair mode requires a valid second kind")
        if self.kind == "softplus" and (self.beta is None or self.beta <= 0):
            raise ContractError("softplus requires beta > 0")
        if self.kind == "poly":
            if not self.coeffs:
                raise ContractError("poly requires coefficients")
            object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    def _base_fn(self, kind: str):
        if kind == "softplus":
            beta = self.beta

            def softplus(x):
                bx = beta * x
                return (np.maximum(bx, 0.0) + np.log1p(np.exp(-np.abs(bx)))) / beta

            return softplus
        if kind == "poly":
            coeffs = np.asarray(self.coeffs)

            def poly(x):
                return np.polynomial.polynomial.polyval(x, coeffs)

            return poly
        return _KINDS[kind].fn

    @property
    def holomorphic(self) -> bool:
        base = _KINDS[self.kind].holomorphic
        if self.mode == "pair":
            base = base and _KINDS[self.second].holomorphic
        return base

    @property
    def entire(self) -> bool:
        base = _KINDS[self.kind].entire
        if self.mode == "pair":
            base = base and _KINDS[self.second].entire
        return base

    def apply(self, x):
        """Apply to a real scalar or array; complex input only for holomorphic kinds."""
        arr = np.asarray(x)
        if not np.all(np.isfinite(arr)):
            raise NumericError(f"non-finite input to activation {self.kind}")
        if np.iscomplexobj(arr):
            if not self.holomorphic:
                raise NumericError(f"activation {self.kind} does not accept complex input")
        else:
            arr = arr.astype(np.float64, copy=False)
        y = self._base_fn(self.kind)(arr)
        if self.mode == "real":
            out = y
        elif self.mode == "imag":
            out = 1j * y
        elif self.mode == "mixed":
            out = (1.0 + 1j) * y
        else:  # pair
            out = y + 1j * self._base_fn(self.second)(arr)
        if np.ndim(x) == 0:
            return complex(out)
        return out


def apply(a: Activation, x):
    return a.apply(x)


# ---------------------------------------------------------------------------
# string encoding used by the graph JSON format
#
#   "tanh"            real mode
#   "i*tanh"          imag mode
#   "(1+i)*sin"       mixed mode
#   "tanh+i*sin"      pair mode
#   "softplus(2.0)"   parameterized kind
#   "poly(1,0,2)"     polynomial coefficients, low order first
# ---------------------------------------------------------------------------

_BASE_RE = re.compile(r"^([a-z_]+)(?:\(([^)]*)\))?$")


def _parse_base(text: str):
    m = _BASE_RE.match(text.strip())
    if not m:
        raise ContractError(f"cannot parse activation {text!r}")
    kind, args = m.group(1), m.group(2)
    beta = None
    coeffs = None
    if kind == "softplus":
        if args is None:
            raise ContractError("softplus requires a beta argument, e.g. softplus(2.0)")
        beta = float(args)
    elif kind == "poly":
        if args is None:
            raise ContractError("poly requires coefficients, e.g. poly(1,0,2)")
        coeffs = tuple(float(p) for p in args.split(","))
    elif args is not None:
        raise ContractError(f"activation {kind!r} takes no arguments")
    return kind, beta, coeffs


def parse_activation(text: str) -> Activation:
    t = text.strip()
    if t.startswith("(1+i)*"):
        kind, beta, coeffs = _parse_base(t[len("(1+i)*") :])
        return Activation(kind, "mixed", beta=beta, coeffs=coeffs)
    if t.startswith("i*"):
        kind, beta, coeffs = _parse_base(t[len("i*") :])
        return Activation(kind, "imag", beta=beta, coeffs=coeffs)
    if "+i*" in t:
        first, second = t.split("+i*", 1)
        kind, beta, coeffs = _parse_base(first)
        kind2, beta2, coeffs2 = _parse_base(second)
        if beta2 is not None or coeffs2 is not None:
            raise ContractError("pair mode second kind cannot carry parameters")
        return Activation(kind, "pair", second=kind2, beta=beta, coeffs=coeffs)
    kind, beta, coeffs = _parse_base(t)
    return Activation(kind, "real", beta=beta, coeffs=coeffs)


def format_activation(a: Activation) -> str:
    base = a.kind
    if a.kind == "softplus":
        base = f"softplus({a.beta!r})"
    elif a.kind == "poly":
        base = "poly(" + ",".join(repr(c) for c in a.coeffs) + ")"
    if a.mode == "real":
        return base
    if a.mode == "imag":
        return f"i*{base}"
    if a.mode == "mixed":
        return f"(1+i)*{base}"
    return f"{base}+i*{a.second}"


# ---------------------------------------------------------------------------
# Bernstein ellipse machinery
# ---------------------------------------------------------------------------

ELLIPSE_MARGIN = 0.9  # shrink semi-minor axis 10% away from nearest singularity
BOUNDARY_SAMPLES = 10_000
SUP_INFLATION = 1.1
_A_GRID = [0.25 * j for j in range(1, 15)]
_DEFAULT_D_REF = 16


def ellipse_boundary(a: float, count: int = BOUNDARY_SAMPLES) -> np.ndarray:
    """Points on the boundary of the Bernstein ellipse with parameter a."""
    theta = 2.0 * math.pi * (np.arange(count) + 0.5) / count
    return np.cosh(a) * np.cos(theta) + 1j * np.sinh(a) * np.sin(theta)


def ellipse_param_avoiding(poles, margin: float = ELLIPSE_MARGIN) -> float:
    """Largest safe parameter a such that B(a) avoids every pole, with margin.

    The critical ellipse through pole x+iy satisfies
    (x/cosh a)^2 + (y/sinh a)^2 = 1; we bisect for it and keep an ellipse
    whose semi-minor axis is ``margin`` times the critical one.
    """

    def inside(a, z):
        return (z.real / math.cosh(a)) ** 2 + (z.imag / math.sinh(a)) ** 2 < 1.0

    a_min = None
    for z in poles:
        lo, hi = 1e-9, 20.0
        if inside(lo, z):
            a_crit = lo
        elif not inside(hi, z):
            a_crit = hi
        else:
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                if inside(mid, z):
                    hi = mid
                else:
                    lo = mid
            a_crit = lo
        a_min = a_crit if a_min is None else min(a_min, a_crit)
    if a_min is None:
        raise DomainError("no poles supplied")
    return math.asinh(margin * math.sinh(a_min))


def poles_in_x(kind: str, scale: float, shift: float = 0.0, terms: int = 3) -> list[complex] | None:
    """Singularities of sigma(scale*x + shift) in the x plane, nearest first.

    None for entire kinds; raises for kinds with no analytic extension.
    """
    info = _KINDS[kind]
    if info.entire:
        return None
    if info.pole_spacing is None:
        return None  # non-analytic, caller must bail out
    out = []
    for m in range(-terms, terms):
        z = 1j * info.pole_spacing * (m + 0.5)
        out.append((z - shift) / scale)
    out.sort(key=abs)
    return out


def _certifiable_kinds(a: Activation) -> list[str]:
    kinds = [a.kind]
    if a.mode == "pair":
        kinds.append(a.second)
    return kinds


def analyticity_params(
    a: Activation, t_bar: float, wrap_exp: bool = False, d_ref: int = _DEFAULT_D_REF
) -> tuple[float, float] | None:
    """Conservative Bernstein parameter and sup bound for f(x) = F(t_bar * x).

    F is the activation's complex lift, composed with exp when ``wrap_exp``.
    Returns None for kinds without an analytic extension covering the domain
    (relu, gelu, dicke_delta, rsqrt, recip). For entire kinds the parameter
    is chosen from a small grid to roughly minimize the certified error at a
    reference degree; pole-limited kinds (tanh, softplus) get the largest
    ellipse clearing the nearest singularity by a 10% margin.
    """
    if t_bar <= 0:
        raise DomainError("t_bar must be positive")
    if not a.holomorphic:
        return None

    def f(z):
        return a.apply(z * t_bar) if np.iscomplexobj(z) else a.apply(np.asarray(z, dtype=complex) * t_bar)

    def lift(z):
        val = f(z)
        return _checked_exp(val) if wrap_exp else val

    if a.entire:
        best = None
        for a_try in _A_GRID:
            boundary = ellipse_boundary(a_try)
            try:
                sup = float(np.max(np.abs(lift(boundary))))
            except AmplitudeOverflowError:
                break
            if not math.isfinite(sup):
                break
            c_try = sup * SUP_INFLATION
            score = math.log(max(c_try, 1e-300)) - a_try * d_ref
            if best is None or score < best[0]:
                best = (score, a_try, c_try)
        if best is None:
            return None
        return best[1], best[2]

    # pole-limited: collect singularities of every certifiable kind
    poles = []
    for kind in _certifiable_kinds(a):
        p = poles_in_x(kind, t_bar)
        if p is None and not _KINDS[kind].entire:
            return None
        if p:
            poles.extend(p)
    if not poles:
        return None
    a_safe = ellipse_param_avoiding(poles)
    boundary = ellipse_boundary(a_safe)
    sup = float(np.max(np.abs(lift(boundary))))
    if not math.isfinite(sup):
        return None
    return a_safe, sup * SUP_INFLATION
