"""Stratified complex Lie algebras and their simply connected groups.

The group carrier is the algebra itself in exponential coordinates of the
first kind: an element is a complex coefficient vector over an adapted basis
ordered by ascending layer, the identity is the zero vector, inversion is
negation, and the product is the Baker-Campbell-Hausdorff series, which
terminates at the step of the algebra.

All values are immutable after construction and all operations are pure
functions, so everything here is safe to share across threads.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np

from .rng import Stream

# A group element is a plain complex vector in the adapted basis.
GroupElement = np.ndarray

ExactEntry = tuple[Fraction, Fraction]  # Gaussian-rational re/im pair


class StructuralError(ValueError):
    """Malformed input data (bad index, non-PD metric), as opposed to a violated law."""


@dataclass(frozen=True)
class LawViolation:
    law: str
    witness: tuple
    detail: str

    def __str__(self) -> str:
        return f"{self.law} at {self.witness}: {self.detail}"


@dataclass(frozen=True, eq=False)
class StratifiedAlgebra:
    """Structure constants of a stratified complex Lie algebra.

    ``layers`` holds the complex dimension of each layer; ``table[i, j, k]``
    is the coefficient of basis vector ``k`` in the bracket of basis vectors
    ``i`` and ``j``.  When the constants are known exactly, ``exact`` carries
    Gaussian-rational values used by the law checks; numerics always run on
    the complex ``table``.
    """

    name: str
    layers: tuple[int, ...]
    table: np.ndarray = field(repr=False)
    exact: dict | None = field(default=None, repr=False)

    def __post_init__(self):
        n = sum(self.layers)
        if not self.layers or any(d < 1 for d in self.layers):
            raise StructuralError("every layer must have dimension >= 1")
        table = np.ascontiguousarray(self.table, dtype=np.complex128)
        if table.shape != (n, n, n):
            raise StructuralError(f"bracket table must be {n}x{n}x{n}")
        table.setflags(write=False)
        object.__setattr__(self, "table", table)
        weights = np.concatenate(
            [np.full(d, j + 1, dtype=np.int64) for j, d in enumerate(self.layers)]
        )
        weights.setflags(write=False)
        object.__setattr__(self, "_weights", weights)
        digest = hashlib.sha256()
        digest.update(repr((self.name, self.layers)).encode())
        digest.update(table.tobytes())
        object.__setattr__(self, "key", digest.hexdigest()[:16])
        object.__setattr__(self, "_field_cache", {})

    @property
    def N(self) -> int:
        """Complex dimension of the algebra."""
        return sum(self.layers)

    @property
    def m(self) -> int:
        """Step of the stratification."""
        return len(self.layers)

    @property
    def d1(self) -> int:
        """Dimension of the horizontal (first) layer."""
        return self.layers[0]

    @property
    def weights(self) -> np.ndarray:
        """Dilation weight (layer number) of each coordinate."""
        return self._weights

    @property
    def D(self) -> int:
        """Homogeneous dimension: sum of layer number times layer dimension."""
        return int(sum((j + 1) * d for j, d in enumerate(self.layers)))

    def layer_slice(self, j: int) -> slice:
        """Coordinate slice of layer ``j`` (1-based)."""
        start = sum(self.layers[: j - 1])
        return slice(start, start + self.layers[j - 1])

    def layer_of(self, coord: int) -> int:
        return int(self._weights[coord])


@dataclass(frozen=True)
class HorizontalFrame:
    """The first-layer basis directions declared orthonormal for the metric.

    The convention matches the Heisenberg normalisation: the dual metric
    pairs each first-layer complex coordinate differential with its
    conjugate to the value 2, i.e. the underlying real coordinate
    differentials are orthonormal.
    """

    alg: StratifiedAlgebra
    indices: tuple[int, ...]
    normalization: float = 2.0

    def directions(self) -> list[np.ndarray]:
        out = []
        for j in self.indices:
            e = np.zeros(self.alg.N, dtype=complex)
            e[j] = 1.0
            out.append(e)
        return out


def horizontal_frame(alg: StratifiedAlgebra) -> HorizontalFrame:
    return HorizontalFrame(alg, tuple(range(alg.d1)))


# ---------------------------------------------------------------------------
# construction


def _as_complex(value) -> complex:
    if isinstance(value, (list, tuple)):
        return complex(float(value[0]), float(value[1]))
    return complex(value)


def algebra_from_brackets(
    name: str,
    layers: tuple[int, ...] | list[int],
    entries: dict,
    exact: bool = False,
    antisymmetrize: bool = True,
) -> StratifiedAlgebra:
    """Build an algebra from sparse bracket entries.

    ``entries`` maps an ordered index pair ``(i, j)`` to ``{k: value}``.
    When ``antisymmetrize`` is set, a missing ``(j, i)`` entry is filled with
    the negated value; an explicitly supplied one is kept verbatim so that
    deliberately inconsistent tables can be fed to the validator.
    """
    layers = tuple(int(d) for d in layers)
    n = sum(layers)
    table = np.zeros((n, n, n), dtype=np.complex128)
    exact_table: dict | None = {} if exact else None
    seen = set()
    for (i, j), out in entries.items():
        if not (0 <= i < n and 0 <= j < n):
            raise StructuralError(f"bracket entry ({i},{j}) out of range for N={n}")
        seen.add((i, j))
        for k, value in out.items():
            if not 0 <= k < n:
                raise StructuralError(f"bracket output index {k} out of range for N={n}")
            table[i, j, k] = _as_complex(value)
            if exact_table is not None:
                c = _as_complex(value)
                exact_table.setdefault((i, j), {})[k] = (
                    Fraction(c.real).limit_denominator(10**12),
                    Fraction(c.imag).limit_denominator(10**12),
                )
    if antisymmetrize:
        for (i, j) in list(seen):
            if (j, i) not in seen:
                table[j, i] = -table[i, j]
                if exact_table is not None and (i, j) in exact_table:
                    exact_table[(j, i)] = {
                        k: (-re, -im) for k, (re, im) in exact_table[(i, j)].items()
                    }
    return StratifiedAlgebra(name=name, layers=layers, table=table, exact=exact_table)


def heisenberg_weyl(n: int) -> StratifiedAlgebra:
    """The complex Heisenberg-Weyl algebra on 2n+1 complex coordinates.

    Horizontal pairs (2k-1, 2k) bracket into the one-dimensional center:
    [z, z'] has center component sum_k (z_{2k-1} z'_{2k} - z'_{2k-1} z_{2k}).
    """
    if n < 1:
        raise StructuralError("heisenberg_weyl requires n >= 1")
    entries = {}
    center = 2 * n
    for k in range(n):
        entries[(2 * k, 2 * k + 1)] = {center: 1.0}
    return algebra_from_brackets(f"heisenberg:{n}", (2 * n, 1), entries, exact=True)


def abelian(n: int) -> StratifiedAlgebra:
    """The abelian algebra C^n: a single layer with zero bracket."""
    if n < 1:
        raise StructuralError("abelian requires n >= 1")
    return algebra_from_brackets(f"abelian:{n}", (n,), {}, exact=True)


def filiform(m: int) -> StratifiedAlgebra:
    """A step-m filiform chain: [e1, e_k] = e_{k+1}, layers (2, 1, ..., 1)."""
    if m < 2:
        raise StructuralError("filiform requires step >= 2")
    entries = {(0, k): {k + 1: 1.0} for k in range(1, m)}
    return algebra_from_brackets(f"filiform:{m}", (2,) + (1,) * (m - 1), entries, exact=True)


_BUILTINS = {"heisenberg": heisenberg_weyl, "abelian": abelian, "filiform": filiform}


def algebra_from_spec(spec: dict) -> StratifiedAlgebra:
    """Build an algebra from the group-spec JSON object."""
    try:
        name = str(spec["name"])
        layers = tuple(int(d) for d in spec["layers"])
        brackets = spec.get("brackets", [])
        entries = {}
        for item in brackets:
            i, j = int(item["i"]), int(item["j"])
            out = {int(k): _as_complex(v) for k, v in item["out"].items()}
            entries[(i, j)] = out
    except (KeyError, TypeError, ValueError) as exc:
        raise StructuralError(f"malformed group spec: {exc}") from exc
    return algebra_from_brackets(name, layers, entries)


def load_group(tag_or_path: str) -> StratifiedAlgebra:
    """Resolve a builtin tag like ``heisenberg:2`` or a path to a group-spec JSON."""
    if ":" in tag_or_path and not Path(tag_or_path).exists():
        base, _, arg = tag_or_path.partition(":")
        if base in _BUILTINS:
            try:
                return _BUILTINS[base](int(arg))
            except ValueError as exc:
                raise StructuralError(f"bad builtin parameter in {tag_or_path!r}") from exc
        raise StructuralError(f"unknown builtin group {tag_or_path!r}")
    path = Path(tag_or_path)
    if not path.exists():
        raise StructuralError(f"no such group spec: {tag_or_path}")
    try:
        spec = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise StructuralError(f"unreadable group spec {tag_or_path}: {exc}") from exc
    return algebra_from_spec(spec)


# ---------------------------------------------------------------------------
# basic operations


def identity_element(alg: StratifiedAlgebra) -> GroupElement:
    return np.zeros(alg.N, dtype=np.complex128)


def bracket(alg: StratifiedAlgebra, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Bilinear extension of the structure constants; supports batched inputs."""
    u = np.asarray(u, dtype=np.complex128)
    v = np.asarray(v, dtype=np.complex128)
    if u.shape[-1] != alg.N or v.shape[-1] != alg.N:
        raise StructuralError("coefficient vectors must have length N")
    return np.einsum("ijk,...i,...j->...k", alg.table, u, v)


@lru_cache(maxsize=None)
def _dynkin_terms(order: int) -> tuple[tuple[float, str], ...]:
    """Dynkin series words for log(exp x exp y) up to total degree ``order``.

    Words are strings over {'x','y'} evaluated as right-nested brackets
    [w0,[w1,[...]]]; coefficients are accumulated exactly as rationals and
    converted to float once.  Terms of degree above the step vanish by
    nilpotency, so the truncated series is the exact group law.
    """
    acc: dict[str, Fraction] = {}

    def extend(seq: list[tuple[int, int]], degree: int):
        n = len(seq)
        if n >= 1:
            total = degree
            coeff = Fraction((-1) ** (n - 1), n) / total
            for r, s in seq:
                coeff /= math.factorial(r) * math.factorial(s)
            word = "".join("x" * r + "y" * s for r, s in seq)
            if len(word) == 1 or word[-1] != word[-2]:
                acc[word] = acc.get(word, Fraction(0)) + coeff
        if degree >= order:
            return
        for r in range(order - degree + 1):
            for s in range(order - degree - r + 1):
                if r + s == 0:
                    continue
                extend(seq + [(r, s)], degree + r + s)

    extend([], 0)
    return tuple((float(c), w) for w, c in sorted(acc.items()) if c != 0)


def bch_product(alg: StratifiedAlgebra, x: np.ndarray, y: np.ndarray) -> GroupElement:
    """Group product in exponential coordinates (exact by nilpotency)."""
    x = np.asarray(x, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    if alg.m == 1:
        return x + y
    if alg.m == 2:
        return x + y + 0.5 * bracket(alg, x, y)
    letters = {"x": x, "y": y}
    out = np.zeros(np.broadcast_shapes(x.shape, y.shape), dtype=np.complex128)
    for coeff, word in _dynkin_terms(alg.m):
        v = letters[word[-1]]
        for ch in reversed(word[:-1]):
            v = bracket(alg, letters[ch], v)
        out = out + coeff * v
    return out


def group_inverse(x: np.ndarray) -> GroupElement:
    return -np.asarray(x, dtype=np.complex128)


def dilate(alg: StratifiedAlgebra, lam: complex, x: np.ndarray) -> GroupElement:
    """Scale layer j by lam**j.  lam = 0 is rejected: not an automorphism."""
    if lam == 0:
        raise ValueError("dilation parameter must be nonzero")
    x = np.asarray(x, dtype=np.complex128)
    scale = np.power(np.complex128(lam), alg.weights)
    return x * scale


def homogeneous_norm(alg: StratifiedAlgebra, x: np.ndarray) -> np.ndarray | float:
    """Sum over layers of the Euclidean block norm raised to 1/layer."""
    x = np.asarray(x, dtype=np.complex128)
    total = np.zeros(x.shape[:-1], dtype=np.float64)
    for j in range(1, alg.m + 1):
        block = x[..., alg.layer_slice(j)]
        nrm = np.sqrt(np.sum(np.abs(block) ** 2, axis=-1))
        total = total + nrm ** (1.0 / j)
    return total if total.shape else float(total)


# ---------------------------------------------------------------------------
# law validation


def _exact_bracket_basis(alg: StratifiedAlgebra, i: int, j: int) -> dict[int, ExactEntry]:
    if alg.exact is not None:
        return alg.exact.get((i, j), {})
    col = alg.table[i, j]
    return {
        k: (Fraction(col[k].real).limit_denominator(10**12),
            Fraction(col[k].imag).limit_denominator(10**12))
        for k in np.nonzero(col)[0]
    }


def validate_algebra(alg: StratifiedAlgebra, tol: float = 1e-12) -> list[LawViolation]:
    """Check every stratified-algebra law; empty return means valid.

    Antisymmetry, Jacobi and grading run in exact rational arithmetic when
    the structure constants were supplied exactly; the stratification span
    condition uses a numerical rank, which is safe at these scales.
    """
    out: list[LawViolation] = []
    n, m = alg.N, alg.m
    exact = alg.exact is not None

    def residual(vec) -> float:
        if exact:
            return float(sum(abs(re) + abs(im) for re, im in vec.values()))
        return float(np.max(np.abs(vec))) if vec.size else 0.0

    # antisymmetry
    for i in range(n):
        for j in range(i, n):
            if exact:
                a = _exact_bracket_basis(alg, i, j)
                b = _exact_bracket_basis(alg, j, i)
                keys = set(a) | set(b)
                bad = {
                    k: (a.get(k, (Fraction(0),) * 2)[0] + b.get(k, (Fraction(0),) * 2)[0],
                        a.get(k, (Fraction(0),) * 2)[1] + b.get(k, (Fraction(0),) * 2)[1])
                    for k in keys
                }
                r = residual({k: v for k, v in bad.items() if v != (0, 0)})
            else:
                r = float(np.max(np.abs(alg.table[i, j] + alg.table[j, i])))
            if r > tol:
                out.append(LawViolation("antisymmetry", (i, j), f"residual {r:.3e}"))

    # Jacobi on all basis triples
    basis = np.eye(n, dtype=np.complex128)
    for i, j, k in itertools.combinations(range(n), 3):
        r = (
            bracket(alg, basis[i], bracket(alg, basis[j], basis[k]))
            + bracket(alg, basis[j], bracket(alg, basis[k], basis[i]))
            + bracket(alg, basis[k], bracket(alg, basis[i], basis[j]))
        )
        rmax = float(np.max(np.abs(r)))
        if rmax > tol:
            out.append(LawViolation("jacobi", (i, j, k), f"residual {rmax:.3e}"))

    # grading: [V_a, V_b] inside V_{a+b}
    for i in range(n):
        for j in range(n):
            target = alg.layer_of(i) + alg.layer_of(j)
            col = alg.table[i, j]
            for k in np.nonzero(np.abs(col) > tol)[0]:
                if alg.layer_of(int(k)) != target:
                    out.append(
                        LawViolation(
                            "grading",
                            (i, j, int(k)),
                            f"layer {alg.layer_of(int(k))} component from layers "
                            f"({alg.layer_of(i)},{alg.layer_of(j)})",
                        )
                    )

    # stratification: span [V_1, V_j] = V_{j+1}, and [V_1, V_m] = 0
    for j in range(1, m):
        s1, sj, snext = alg.layer_slice(1), alg.layer_slice(j), alg.layer_slice(j + 1)
        cols = []
        for a in range(s1.start, s1.stop):
            for b in range(sj.start, sj.stop):
                cols.append(alg.table[a, b, snext])
        mat = np.array(cols)
        rank = int(np.linalg.matrix_rank(mat, tol=1e-10)) if mat.size else 0
        if rank != alg.layers[j]:
            out.append(
                LawViolation(
                    "stratification",
                    (1, j),
                    f"span [V_1, V_{j}] has dimension {rank}, expected {alg.layers[j]}",
                )
            )
    s1, sm = alg.layer_slice(1), alg.layer_slice(m)
    top = alg.table[s1, sm, :]
    if top.size and float(np.max(np.abs(top))) > tol:
        out.append(LawViolation("stratification", (1, m), "[V_1, V_m] != 0"))

    # homogeneous dimension bookkeeping (holds by construction; kept as a law)
    if alg.D != sum((j + 1) * d for j, d in enumerate(alg.layers)):
        out.append(LawViolation("homogeneous-dimension", (), "D mismatch"))
    return out


# ---------------------------------------------------------------------------
# H-type classification


@dataclass(frozen=True)
class HTypeReport:
    passed: bool
    violations: tuple[LawViolation, ...]


def euclidean_inner_product(alg: StratifiedAlgebra) -> np.ndarray:
    """Gram matrix of the standard Euclidean product on the realification."""
    return np.eye(2 * alg.N)


def _realify(v: np.ndarray) -> np.ndarray:
    return np.concatenate([v.real, v.imag], axis=-1)


def _complexify(r: np.ndarray) -> np.ndarray:
    n = r.shape[-1] // 2
    return r[..., :n] + 1j * r[..., n:]


def _real_bracket(alg: StratifiedAlgebra, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return _realify(bracket(alg, _complexify(u), _complexify(v)))


def _span_basis(vectors: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Rows spanning the row space of ``vectors`` (possibly empty)."""
    if vectors.size == 0:
        return np.zeros((0, vectors.shape[-1]))
    u, s, vt = np.linalg.svd(vectors, full_matrices=False)
    rank = int(np.sum(s > tol * max(1.0, s[0] if s.size else 1.0)))
    return vt[:rank]

def h_type_check(
    alg: StratifiedAlgebra,
    gram: np.ndarray | None = None,
    n_random: int = 16,
    seed: int = 2024,
    tol: float = 1e-10,
) -> HTypeReport:
    """Decide whether the realified algebra with this inner product is H-type.

    Computes the center z and its orthogonal complement v, requires
    span[v, v] = z, and requires the maps J_u defined by
    <J_u v, w> = <u, [v, w]> to act isometrically on v for every unit u in
    the center.  The isometry condition is quadratic in u, so checking an
    orthonormal basis of the center plus seeded random unit centers is a
    sound test with redundancy against implementation slips.
    """
    dim = 2 * alg.N
    if gram is None:
        gram = euclidean_inner_product(alg)
    gram = np.asarray(gram, dtype=float)
    if gram.shape != (dim, dim):
        raise StructuralError(f"inner product must be {dim}x{dim} on the realification")
    if not np.allclose(gram, gram.T, atol=1e-12):
        raise StructuralError("inner product must be symmetric")
    try:
        np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise StructuralError("inner product must be positive definite") from exc

    basis = np.eye(dim)
    # center: left null space of the row-stacked map u -> ([u, e_b])_b
    ad_stack = np.stack(
        [np.stack([_real_bracket(alg, basis[a], basis[b]) for b in range(dim)]).ravel()
         for a in range(dim)]
    )
    u_mat, s, _ = np.linalg.svd(ad_stack, full_matrices=False)
    scale = s[0] if s.size and s[0] > 0 else 1.0
    center = u_mat[:, s <= tol * scale].T
    violations: list[LawViolation] = []
    if center.shape[0] == 0:
        return HTypeReport(False, (LawViolation("center", (), "center is trivial"),))

    # v = orthogonal complement of the center w.r.t. gram
    comp = _span_basis((center @ gram))
    u_, s_, vt_ = np.linalg.svd(comp, full_matrices=True)
    v_basis = vt_[comp.shape[0]:]

    # span [v, v] must equal the center
    brackets = np.array(
        [_real_bracket(alg, va, vb) for va, vb in itertools.combinations(v_basis, 2)]
    ) if v_basis.shape[0] >= 2 else np.zeros((0, dim))
    bspan = _span_basis(brackets)
    cspan = _span_basis(center)
    joint_rank = _span_basis(np.vstack([bspan, cspan])).shape[0] if (bspan.size or cspan.size) else 0
    if not (bspan.shape[0] == cspan.shape[0] == joint_rank):
        violations.append(
            LawViolation(
                "bracket-generates-center",
                (bspan.shape[0], cspan.shape[0]),
                "span [v, v] differs from the center",
            )
        )

    # isometry of J_u on a gram-orthonormal basis of v
    if v_basis.shape[0] > 0 and not violations:
        g_v = v_basis @ gram @ v_basis.T
        chol = np.linalg.cholesky(g_v)
        ortho_v = np.linalg.solve(chol, v_basis)  # rows gram-orthonormal
        g_c = center @ gram @ center.T
        chol_c = np.linalg.cholesky(g_c)
        ortho_c = np.linalg.solve(chol_c, center)

        pair_table = np.array(
            [[gram @ _real_bracket(alg, va, vb) for vb in ortho_v] for va in ortho_v]
        )  # (dv, dv, dim): gram-paired brackets

        def isometry_defect(u_vec: np.ndarray) -> float:
            j_mat = np.einsum("abk,k->ab", pair_table, u_vec).T  # (J_u)_{b a} = <u,[v_a,v_b]>
            return float(np.max(np.abs(j_mat.T @ j_mat - np.eye(len(ortho_v)))))

        stream = Stream("h-type", alg.key, seed)
        candidates = [u for u in ortho_c]
        for _ in range(n_random):
            coeffs = np.array(stream.normal(len(ortho_c)), dtype=float).reshape(-1)
            u = coeffs @ ortho_c
            norm = math.sqrt(float(u @ gram @ u))
            if norm > 1e-12:
                candidates.append(u / norm)
        for u in candidates:
            defect = isometry_defect(u)
            if defect > tol:
                violations.append(
                    LawViolation(
                        "J-isometry",
                        tuple(np.round(u, 6)),
                        f"operator defect {defect:.3e}",
                    )
                )
                break

    return HTypeReport(not violations, tuple(violations))
