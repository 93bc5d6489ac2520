"""Holomorphic polynomial calculus on a stratified complex group.

Polynomials are sparse maps from exponent multi-indices to complex
coefficients.  The weighted degree of a monomial is the dilation-weighted
exponent sum, which grades the space into finite-dimensional homogeneous
pieces; the generator of the dilation flow acts on the piece of degree k as
multiplication by k, and everything else here (the scaled generator, its
semigroup, the Cesaro projection) is built on that decomposition.

Left-invariant derivatives are computed symbolically: the component fields
of a left-invariant vector field are polynomial in the coordinates, with
coefficients given by the Bernoulli series of x/(1 - e^{-x}) applied to the
adjoint action, which terminates by nilpotency.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Iterator, Mapping

import numpy as np

from .algebra import GroupElement, StratifiedAlgebra, StructuralError, dilate
from .rng import Stream

Exponents = tuple[int, ...]

# Taylor coefficients of x / (1 - e^{-x}); index k multiplies ad^k.
_INVARIANT_FIELD_COEFFS = (
    Fraction(1),
    Fraction(1, 2),
    Fraction(1, 12),
    Fraction(0),
    Fraction(-1, 720),
    Fraction(0),
    Fraction(1, 30240),
)


def _clean(terms: Mapping[Exponents, complex]) -> dict[Exponents, complex]:
    return {tuple(int(e) for e in k): complex(v) for k, v in terms.items() if v != 0}


@dataclass(frozen=True, eq=False)
class HoloPoly:
    """Sparse holomorphic polynomial over the adapted coordinates of ``alg``."""

    alg: StratifiedAlgebra
    terms: dict

    def __post_init__(self):
        object.__setattr__(self, "terms", _clean(self.terms))
        for exps in self.terms:
            if len(exps) != self.alg.N or any(e < 0 for e in exps):
                raise StructuralError(f"bad multi-index {exps} for N={self.alg.N}")

    # -- ring operations ----------------------------------------------------
    def __add__(self, other: "HoloPoly | complex") -> "HoloPoly":
        other = _coerce(self.alg, other)
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0.0) + v
        return HoloPoly(self.alg, out)

    def __radd__(self, other):
        return self.__add__(other)

    def __neg__(self) -> "HoloPoly":
        return HoloPoly(self.alg, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-_coerce(self.alg, other))

    def __rsub__(self, other):
        return _coerce(self.alg, other) + (-self)

    def __mul__(self, other: "HoloPoly | complex") -> "HoloPoly":
        if not isinstance(other, HoloPoly):
            return HoloPoly(self.alg, {k: v * other for k, v in self.terms.items()})
        out: dict[Exponents, complex] = {}
        for ka, va in self.terms.items():
            for kb, vb in other.terms.items():
                key = tuple(a + b for a, b in zip(ka, kb))
                out[key] = out.get(key, 0.0) + va * vb
        return HoloPoly(self.alg, out)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __eq__(self, other) -> bool:
        return isinstance(other, HoloPoly) and self.alg.key == other.alg.key and self.terms == other.terms

    def __repr__(self) -> str:
        return f"HoloPoly({poly_to_text(self)!r})"

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def max_weighted_degree(self) -> int:
        if not self.terms:
            return 0
        w = self.alg.weights
        return max(int(sum(e * c for e, c in zip(k, w))) for k in self.terms)


def _coerce(alg: StratifiedAlgebra, value) -> HoloPoly:
    if isinstance(value, HoloPoly):
        if value.alg.key != alg.key:
            raise StructuralError("polynomials live over different algebras")
        return value
    return constant(alg, complex(value))


def zero(alg: StratifiedAlgebra) -> HoloPoly:
    return HoloPoly(alg, {})


def constant(alg: StratifiedAlgebra, c: complex) -> HoloPoly:
    return HoloPoly(alg, {(0,) * alg.N: c})


def coordinate(alg: StratifiedAlgebra, j: int) -> HoloPoly:
    if not 0 <= j < alg.N:
        raise StructuralError(f"coordinate index {j} out of range")
    exps = [0] * alg.N
    exps[j] = 1
    return HoloPoly(alg, {tuple(exps): 1.0})


def weighted_degree(alg: StratifiedAlgebra, exps: Exponents) -> int:
    return int(sum(e * c for e, c in zip(exps, alg.weights)))


# ---------------------------------------------------------------------------
# evaluation


def evaluate(f: HoloPoly, z: np.ndarray) -> complex | np.ndarray:
    """Monomial sum in canonical (lexicographic) order; ``z`` may be a batch."""
    z = np.asarray(z, dtype=np.complex128)
    scalar = z.ndim == 1
    pts = z[None, :] if scalar else z
    if pts.shape[-1] != f.alg.N:
        raise StructuralError("point dimension mismatch")
    out = np.zeros(pts.shape[:-1], dtype=np.complex128)
    if f.terms:
        max_exp = np.max(np.array(list(f.terms)), axis=0)
        pows = []
        for j in range(f.alg.N):
            col = [np.ones(pts.shape[:-1], dtype=np.complex128)]
            for _ in range(int(max_exp[j])):
                col.append(col[-1] * pts[..., j])
            pows.append(col)
        for exps in sorted(f.terms):
            term = np.full(pts.shape[:-1], f.terms[exps], dtype=np.complex128)
            for j, e in enumerate(exps):
                if e:
                    term = term * pows[j][e]
            out = out + term
    return complex(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# grading


@dataclass(frozen=True)
class HomogeneousComponent:
    degree: int
    poly: HoloPoly


def homogeneous_decompose(f: HoloPoly) -> list[HomogeneousComponent]:
    """Group monomials by weighted degree; the zero polynomial gives []."""
    buckets: dict[int, dict[Exponents, complex]] = {}
    for exps, c in f.terms.items():
        buckets.setdefault(weighted_degree(f.alg, exps), {})[exps] = c
    return [
        HomogeneousComponent(k, HoloPoly(f.alg, terms))
        for k, terms in sorted(buckets.items())
    ]


def euler_Z(f: HoloPoly) -> HoloPoly:
    """The dilation generator: multiplies each homogeneous piece by its degree.

    Coordinate form: sum_j c_j z_j d/dz_j with c_j the coordinate weight;
    on exponent tuples this is exact integer arithmetic.
    """
    return HoloPoly(
        f.alg,
        {exps: c * weighted_degree(f.alg, exps) for exps, c in f.terms.items()},
    )


def apply_B(f: HoloPoly, a: float) -> HoloPoly:
    """The scaled generator (2/a) Z of the heat-kernel dilation semigroup."""
    if a <= 0:
        raise ValueError("time-scale parameter a must be positive")
    return (2.0 / a) * euler_Z(f)


def dilate_pullback(f: HoloPoly, lam: complex) -> HoloPoly:
    """f composed with the dilation by ``lam``: degree-k parts pick up lam**k."""
    if lam == 0:
        raise ValueError("dilation parameter must be nonzero")
    lam = complex(lam)
    return HoloPoly(
        f.alg,
        {exps: c * lam ** weighted_degree(f.alg, exps) for exps, c in f.terms.items()},
    )


def semigroup_B(f: HoloPoly, t: float, a: float) -> HoloPoly:
    """exp(-tB) f, realised literally as the pullback along the dilation."""
    if t < 0:
        raise ValueError("semigroup time must be nonnegative")
    if a <= 0:
        raise ValueError("time-scale parameter a must be positive")
    return dilate_pullback(f, math.exp(-2.0 * t / a))


def fejer_project(f: HoloPoly, n: int) -> HoloPoly:
    """Cesaro projection: keeps degree k < n with weight (1 - k/n).

    This is the closed form of averaging the circle action against the
    Fejer kernel; a quadrature oracle in the tests confirms the weights.
    """
    if n < 1:
        raise ValueError("projection order must be >= 1")
    out: dict[Exponents, complex] = {}
    for exps, c in f.terms.items():
        k = weighted_degree(f.alg, exps)
        if k < n:
            out[exps] = c * (1.0 - k / n)
    return HoloPoly(f.alg, out)


# ---------------------------------------------------------------------------
# left-invariant derivatives


def _partial(f: HoloPoly, j: int) -> HoloPoly:
    out: dict[Exponents, complex] = {}
    for exps, c in f.terms.items():
        if exps[j]:
            key = list(exps)
            key[j] -= 1
            key = tuple(key)
            out[key] = out.get(key, 0.0) + c * exps[j]
    return HoloPoly(f.alg, out)


def _ad_z(alg: StratifiedAlgebra, comps: list[HoloPoly]) -> list[HoloPoly]:
    """Apply ad_z to a vector of polynomial components: w -> [z, w]."""
    out = [zero(alg) for _ in range(alg.N)]
    nz = np.argwhere(np.abs(alg.table) > 0)
    for i, j, k in nz:
        if comps[j].is_zero:
            continue
        out[k] = out[k] + alg.table[i, j, k] * (coordinate(alg, int(i)) * comps[j])
    return out


def invariant_field_components(alg: StratifiedAlgebra, xi: np.ndarray) -> tuple[HoloPoly, ...]:
    """Polynomial components of the left-invariant field with value ``xi`` at e.

    The field at z is the linear-in-direction part of the group product
    z * (t xi), i.e. the Bernoulli series sum_k b_k ad_z^k (xi); nilpotency
    truncates the series at the step.
    """
    xi = np.asarray(xi, dtype=np.complex128)
    if xi.shape != (alg.N,):
        raise StructuralError("direction must be a length-N coefficient vector")
    cache = alg._field_cache
    key = ("field", xi.tobytes())
    if key not in cache:
        if alg.m - 1 >= len(_INVARIANT_FIELD_COEFFS):
            raise NotImplementedError("invariant fields implemented up to step 7")
        comps = [constant(alg, xi[j]) if xi[j] != 0 else zero(alg) for j in range(alg.N)]
        total = [float(_INVARIANT_FIELD_COEFFS[0]) * comps[j] for j in range(alg.N)]
        for k in range(1, alg.m):
            comps = _ad_z(alg, comps)
            coeff = _INVARIANT_FIELD_COEFFS[k]
            if coeff:
                total = [total[j] + float(coeff) * comps[j] for j in range(alg.N)]
        cache[key] = tuple(total)
    return cache[key]


def left_invariant_derivative(xi: np.ndarray, f: HoloPoly) -> HoloPoly:
    """Holomorphic directional derivative along the left-invariant field of xi."""
    comps = invariant_field_components(f.alg, xi)
    out = zero(f.alg)
    for j, comp in enumerate(comps):
        if comp.is_zero:
            continue
        df = _partial(f, j)
        if not df.is_zero:
            out = out + comp * df
    return out


def frame_derivatives(f: HoloPoly) -> list[HoloPoly]:
    """Derivatives of f along the horizontal frame directions (first layer)."""
    alg = f.alg
    out = []
    for j in range(alg.d1):
        e = np.zeros(alg.N, dtype=complex)
        e[j] = 1.0
        out.append(left_invariant_derivative(e, f))
    return out


# ---------------------------------------------------------------------------
# pointwise evaluators


def h_pairing(f: HoloPoly, g: HoloPoly, z: np.ndarray) -> complex | np.ndarray:
    """Dual-metric pairing of df and the conjugate of dg at z.

    For holomorphic arguments this is twice the sum over the horizontal
    frame of (frame derivative of f) times the conjugate of (frame
    derivative of g); the factor 2 is the Heisenberg normalisation of the
    metric on first-layer coordinates.
    """
    zf = frame_derivatives(f)
    zg = frame_derivatives(g) if g is not f else zf
    vals = None
    for df, dg in zip(zf, zg):
        part = evaluate(df, z) * np.conj(evaluate(dg, z))
        vals = part if vals is None else vals + part
    return 2.0 * vals if vals is not None else 0.0 * evaluate(zero(f.alg), z)


def grad_sq_holo(f: HoloPoly, z: np.ndarray) -> float | np.ndarray:
    """Squared horizontal gradient of a holomorphic f: real part of the pairing."""
    value = h_pairing(f, f, z)
    return value.real if isinstance(value, np.ndarray) else value.real


def xy_pair_eval(f: HoloPoly, g: HoloPoly, z: np.ndarray):
    """Pointwise (X(f conj g), Y(f conj g), Delta(f conj g)).

    X acts as the dilation-flow derivative, Y as its rotation counterpart,
    and the sub-Laplacian of a holomorphic-antiholomorphic product reduces
    to twice the metric pairing.
    """
    zf = evaluate(euler_Z(f), z)
    zg = evaluate(euler_Z(g), z)
    fv = evaluate(f, z)
    gv = evaluate(g, z)
    x_val = zf * np.conj(gv) + fv * np.conj(zg)
    y_val = 1j * (zf * np.conj(gv) - fv * np.conj(zg))
    lap = 2.0 * h_pairing(f, g, z)
    return x_val, y_val, lap


# ---------------------------------------------------------------------------
# enumeration and random polynomials


def monomials_of_weight(alg: StratifiedAlgebra, k: int) -> Iterator[Exponents]:
    """All exponent tuples of weighted degree exactly k, lexicographic order."""
    weights = [int(w) for w in alg.weights]

    def rec(j: int, remaining: int, prefix: tuple[int, ...]):
        if j == alg.N:
            if remaining == 0:
                yield prefix
            return
        w = weights[j]
        for e in range(remaining // w + 1):
            yield from rec(j + 1, remaining - e * w, prefix + (e,))

    if k < 0:
        return
    yield from rec(0, k, ())


def dim_Pk(alg: StratifiedAlgebra, k: int) -> int:
    """Dimension of the homogeneous piece of weighted degree k."""
    return sum(1 for _ in monomials_of_weight(alg, k))


def random_poly(alg: StratifiedAlgebra, max_degree: int, seed: int) -> HoloPoly:
    """Deterministic pseudo-random polynomial with unit-disc coefficients
    on every monomial of weighted degree <= max_degree."""
    if max_degree < 0:
        raise ValueError("max_degree must be >= 0")
    stream = Stream("random-poly", alg.key, seed)
    terms: dict[Exponents, complex] = {}
    for k in range(max_degree + 1):
        for exps in monomials_of_weight(alg, k):
            terms[exps] = stream.unit_disc()
    return HoloPoly(alg, terms)


def random_homogeneous(alg: StratifiedAlgebra, degree: int, seed: int) -> HoloPoly:
    """Deterministic random polynomial supported on a single degree."""
    stream = Stream("random-homogeneous", alg.key, degree, seed)
    terms = {exps: stream.unit_disc() for exps in monomials_of_weight(alg, degree)}
    return HoloPoly(alg, terms)


# ---------------------------------------------------------------------------
# text and JSON forms


_COORD_RE = re.compile(r"^z(\d+)(?:\^(\d+))?$")
_PAIR_RE = re.compile(r"^\(\s*([^,\s]+)\s*,\s*([^,\s]+)\s*\)$")


def _split_terms(text: str) -> list[tuple[int, str]]:
    """Split on top-level +/- (sign, chunk), respecting parentheses and exponents."""
    text = text.replace("−", "-").strip()
    if not text:
        raise StructuralError("empty polynomial expression")
    out: list[tuple[int, str]] = []
    depth = 0
    sign, start = 1, 0
    i = 0
    if text[0] in "+-":
        sign = -1 if text[0] == "-" else 1
        start = i = 1
    while i < len(text):
        ch = text[i]
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch in "+-" and depth == 0:
            prev = _nonspace_before(text, i - 1)
            if prev not in "eE*^(,+-":
                out.append((sign, text[start:i].strip()))
                sign = -1 if ch == "-" else 1
                start = i + 1
        i += 1
    out.append((sign, text[start:].strip()))
    return out


def _nonspace_before(text: str, i: int) -> str:
    while i >= 0 and text[i] == " ":
        i -= 1
    return text[i] if i >= 0 else "("


def parse_poly(alg: StratifiedAlgebra, text: str) -> HoloPoly:
    """Parse the polynomial grammar, e.g. ``"z1^2 + (0,1)*z3 - 0.5*z1*z2"``.

    A term is an optional coefficient (real, or a ``(re,im)`` pair) times
    ``z<index>`` factors with optional integer exponents; coordinate indices
    are 1-based in the adapted order.
    """
    result = zero(alg)
    for sign, chunk in _split_terms(text):
        if not chunk:
            raise StructuralError(f"empty term in polynomial {text!r}")
        coeff = complex(sign)
        exps = [0] * alg.N
        for factor in (p.strip() for p in chunk.split("*")):
            if not factor:
                raise StructuralError(f"empty factor in term {chunk!r}")
            m = _COORD_RE.match(factor)
            if m:
                idx = int(m.group(1)) - 1
                if not 0 <= idx < alg.N:
                    raise StructuralError(f"coordinate z{idx + 1} out of range")
                exps[idx] += int(m.group(2) or 1)
                continue
            m = _PAIR_RE.match(factor)
            if m:
                try:
                    coeff *= complex(float(m.group(1)), float(m.group(2)))
                except ValueError as exc:
                    raise StructuralError(f"bad complex coefficient {factor!r}") from exc
                continue
            try:
                coeff *= float(factor)
            except ValueError as exc:
                raise StructuralError(f"cannot parse factor {factor!r}") from exc
        result = result + HoloPoly(alg, {tuple(exps): coeff})
    return result


def poly_to_text(f: HoloPoly) -> str:
    if not f.terms:
        return "0"
    parts = []
    for exps in sorted(f.terms):
        c = f.terms[exps]
        factors = []
        if c.imag == 0:
            coeff = repr(c.real)
        else:
            coeff = f"({c.real!r},{c.imag!r})"
        factors.append(coeff)
        for j, e in enumerate(exps):
            if e == 1:
                factors.append(f"z{j + 1}")
            elif e > 1:
                factors.append(f"z{j + 1}^{e}")
        parts.append("*".join(factors))
    return " + ".join(parts)


def poly_to_json(f: HoloPoly) -> dict:
    return {
        "terms": [
            {"exps": list(exps), "re": f.terms[exps].real, "im": f.terms[exps].imag}
            for exps in sorted(f.terms)
        ]
    }


def poly_from_json(alg: StratifiedAlgebra, data: dict) -> HoloPoly:
    try:
        terms = {
            tuple(int(e) for e in item["exps"]): complex(item["re"], item["im"])
            for item in data["terms"]
        }
    except (KeyError, TypeError, ValueError) as exc:
        raise StructuralError(f"malformed polynomial JSON: {exc}") from exc
    return HoloPoly(alg, terms)
