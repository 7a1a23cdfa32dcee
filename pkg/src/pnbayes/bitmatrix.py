"""Typed sub-stochastic matrices over bit vectors.

A matrix of type ``n -> m`` sends distributions on ``{0,1}^n`` to
(sub-)distributions on ``{0,1}^m`` and is stored as a ``2^m x 2^n`` array:
``M[x, y]`` is the weight of output bitstring ``x`` given input ``y``, where
bitstrings are read as integers with the *first* bit most significant.
Composition is diagrammatic (``compose(P, Q)`` applies ``P`` first), and the
tensor puts its first argument on the most significant bits, so it coincides
with the Kronecker product.

Three storage layouts are used behind one interface: dense arrays, bare
diagonals for matrices known to be diagonal, and CSC sparse matrices for
large-but-sparse maps such as marking updates on many places.
"""
from __future__ import annotations

from typing import Iterable

import numpy as np
import scipy.sparse as sp

from .errors import InconsistentEvidence, InvalidArity, TooLarge, TypeMismatch

# Tolerances: stochasticity predicates use STOCH_EPS, construction-time sanity
# checks are looser to absorb drift over long composites, and the zero-mass
# guard sits near the float64 floor so legitimately tiny posteriors survive.
STOCH_EPS = 1e-9
CONSTRUCT_EPS = 1e-6
MASS_EPS = 1e-12

# Refuse to materialize dense tables above 2**MAX_DENSE_BITS entries and
# prefer dense below 2**DENSIFY_BITS (where dense is faster than sparse).
MAX_DENSE_BITS = 26
DENSIFY_BITS = 16


def bits_to_int(bits: str) -> int:
    """Parse a bitstring, first character most significant."""
    if bits == "":
        return 0
    return int(bits, 2)


def int_to_bits(x: int, width: int) -> str:
    if x < 0 or x >= (1 << width):
        raise ValueError(f"{x} does not fit in {width} bits")
    return format(x, f"0{width}b") if width else ""


def _check_arity(n: int) -> int:
    if not isinstance(n, (int, np.integer)) or n < 0:
        raise InvalidArity(f"arity must be a non-negative int, got {n!r}")
    return int(n)


class TypedMatrix:
    """A sub-stochastic matrix of type ``in_arity -> out_arity``."""

    __slots__ = ("in_arity", "out_arity", "_dense", "_diag", "_sparse")

    def __init__(self, in_arity: int, out_arity: int, *, dense=None, diag=None,
                 sparse=None, check: bool = True):
        self.in_arity = _check_arity(in_arity)
        self.out_arity = _check_arity(out_arity)
        self._dense = None
        self._diag = None
        self._sparse = None
        if sum(x is not None for x in (dense, diag, sparse)) != 1:
            raise InvalidArity("exactly one storage layout must be supplied")
        if dense is not None:
            dense = np.ascontiguousarray(dense, dtype=np.float64)
            if dense.shape != (1 << self.out_arity, 1 << self.in_arity):
                raise InvalidArity(
                    f"dense shape {dense.shape} does not match type "
                    f"{self.in_arity} -> {self.out_arity}")
            dense.flags.writeable = False
            self._dense = dense
        elif diag is not None:
            if self.in_arity != self.out_arity:
                raise InvalidArity("diagonal matrices must be square")
            diag = np.ascontiguousarray(diag, dtype=np.float64)
            if diag.shape != (1 << self.in_arity,):
                raise InvalidArity("diagonal length does not match arity")
            diag.flags.writeable = False
            self._diag = diag
        else:
            sparse = sp.csc_matrix(sparse)
            if sparse.shape != (1 << self.out_arity, 1 << self.in_arity):
                raise InvalidArity("sparse shape does not match type")
            self._sparse = sparse
        if check:
            self._check_substochastic()

    # -- construction -----------------------------------------------------

    @classmethod
    def dense(cls, data, in_arity: int | None = None,
              out_arity: int | None = None) -> "TypedMatrix":
        data = np.asarray(data, dtype=np.float64)
        if data.ndim == 1:
            data = data.reshape(-1, 1)
        rows, cols = data.shape
        if out_arity is None:
            out_arity = rows.bit_length() - 1
        if in_arity is None:
            in_arity = cols.bit_length() - 1
        return cls(in_arity, out_arity, dense=data)

    @classmethod
    def diagonal(cls, diag) -> "TypedMatrix":
        diag = np.asarray(diag, dtype=np.float64)
        arity = diag.shape[0].bit_length() - 1
        return cls(arity, arity, diag=diag)

    @classmethod
    def sparse(cls, mat, in_arity: int, out_arity: int) -> "TypedMatrix":
        return cls(in_arity, out_arity, sparse=mat)

    def _check_substochastic(self) -> None:
        values = self._diag if self._diag is not None else (
            self._dense if self._dense is not None else self._sparse.data)
        if values.size:
            lo, hi = float(np.min(values)), float(np.max(values))
            if lo < -CONSTRUCT_EPS or hi > 1 + CONSTRUCT_EPS:
                raise InvalidArity(
                    f"entries outside [0, 1]: min {lo}, max {hi}")
        sums = self.column_sums()
        if sums.size and float(np.max(sums)) > 1 + CONSTRUCT_EPS:
            raise InvalidArity(
                f"column sums exceed 1: max {float(np.max(sums))}")

    # -- inspection -------------------------------------------------------

    @property
    def is_diagonal(self) -> bool:
        return self._diag is not None

    @property
    def is_sparse(self) -> bool:
        return self._sparse is not None

    def entry(self, x: int | str, y: int | str = 0) -> float:
        """``M(x | y)``: weight of output ``x`` given input ``y``."""
        if isinstance(x, str):
            x = bits_to_int(x)
        if isinstance(y, str):
            y = bits_to_int(y)
        if self._diag is not None:
            return float(self._diag[x]) if x == y else 0.0
        if self._dense is not None:
            return float(self._dense[x, y])
        return float(self._sparse[x, y])

    def diag_vector(self) -> np.ndarray:
        if self._diag is None:
            raise TypeMismatch("matrix is not diagonal-flagged")
        return self._diag

    def to_dense(self) -> np.ndarray:
        """Materialize the full array (guarded against exponential blowup)."""
        if self.in_arity + self.out_arity > MAX_DENSE_BITS:
            raise TooLarge(
                f"dense table would need 2^{self.in_arity + self.out_arity} "
                "entries")
        if self._dense is not None:
            return self._dense
        if self._diag is not None:
            return np.diag(self._diag)
        return self._sparse.toarray()

    def to_sparse(self) -> sp.csc_matrix:
        if self._sparse is not None:
            return self._sparse
        if self._diag is not None:
            return sp.diags(self._diag, format="csc")
        return sp.csc_matrix(self._dense)

    def column_sums(self) -> np.ndarray:
        if self._diag is not None:
            return self._diag
        if self._dense is not None:
            return self._dense.sum(axis=0)
        return np.asarray(self._sparse.sum(axis=0)).ravel()

    def is_substochastic(self, eps: float = STOCH_EPS) -> bool:
        sums = self.column_sums()
        return bool(np.all(sums <= 1 + eps))

    def is_stochastic(self, eps: float = STOCH_EPS) -> bool:
        sums = self.column_sums()
        return bool(np.all(np.abs(sums - 1) <= eps))

    def apply(self, p: "ProbVector") -> "ProbVector":
        """Matrix-vector action ``M . p`` (unnormalized)."""
        if p.arity != self.in_arity:
            raise TypeMismatch(
                f"vector arity {p.arity} != matrix input arity {self.in_arity}")
        if self._diag is not None:
            out = self._diag * p.data
        elif self._dense is not None:
            out = self._dense @ p.data
        else:
            out = self._sparse @ p.data
        return ProbVector(self.out_arity, out)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TypedMatrix):
            return NotImplemented
        if (self.in_arity, self.out_arity) != (other.in_arity, other.out_arity):
            return False
        return bool(np.array_equal(self.to_dense(), other.to_dense()))

    def __hash__(self):
        return hash((self.in_arity, self.out_arity))

    def allclose(self, other: "TypedMatrix", atol: float = STOCH_EPS) -> bool:
        if (self.in_arity, self.out_arity) != (other.in_arity, other.out_arity):
            return False
        if self.is_sparse or other.is_sparse:
            diff = self.to_sparse() - other.to_sparse()
            if diff.nnz == 0:
                return True
            return bool(np.max(np.abs(diff.data)) <= atol)
        return bool(np.allclose(self.to_dense(), other.to_dense(), atol=atol,
                                rtol=0.0))

    def __repr__(self):
        kind = ("diag" if self.is_diagonal else
                "sparse" if self.is_sparse else "dense")
        return (f"TypedMatrix({self.in_arity} -> {self.out_arity}, {kind})")


class ProbVector:
    """A sub-distribution on ``{0,1}^arity`` (mass at most 1)."""

    __slots__ = ("arity", "data")

    def __init__(self, arity: int, data):
        self.arity = _check_arity(arity)
        data = np.ascontiguousarray(data, dtype=np.float64)
        if data.shape != (1 << self.arity,):
            raise InvalidArity(
                f"vector length {data.shape} does not match arity {arity}")
        if data.size and (float(np.min(data)) < -CONSTRUCT_EPS
                          or float(np.max(data)) > 1 + CONSTRUCT_EPS):
            raise InvalidArity("entries outside [0, 1]")
        if float(data.sum()) > 1 + CONSTRUCT_EPS:
            raise InvalidArity(f"mass {float(data.sum())} exceeds 1")
        data.flags.writeable = False
        self.data = data

    @classmethod
    def point(cls, arity: int, marking: int | str) -> "ProbVector":
        if isinstance(marking, str):
            marking = bits_to_int(marking)
        data = np.zeros(1 << arity)
        data[marking] = 1.0
        return cls(arity, data)

    @classmethod
    def uniform(cls, arity: int) -> "ProbVector":
        return cls(arity, np.full(1 << arity, 1.0 / (1 << arity)))

    def entry(self, m: int | str) -> float:
        if isinstance(m, str):
            m = bits_to_int(m)
        return float(self.data[m])

    def mass(self) -> float:
        return float(self.data.sum())

    def as_matrix(self) -> TypedMatrix:
        return TypedMatrix(0, self.arity, dense=self.data.reshape(-1, 1))

    def allclose(self, other: "ProbVector", atol: float = STOCH_EPS) -> bool:
        return self.arity == other.arity and bool(
            np.allclose(self.data, other.data, atol=atol, rtol=0.0))

    def __repr__(self):
        return f"ProbVector(arity={self.arity}, mass={self.mass():.6g})"


def normalize(p: ProbVector, eps: float = MASS_EPS) -> ProbVector:
    """Scale ``p`` to total mass 1."""
    m = p.mass()
    if m <= eps:
        raise InconsistentEvidence(f"cannot normalize mass {m}")
    return ProbVector(p.arity, p.data / m)


def compose(first: TypedMatrix, second: TypedMatrix) -> TypedMatrix:
    """Diagrammatic composite: apply ``first``, then ``second``."""
    if first.out_arity != second.in_arity:
        raise TypeMismatch(
            f"cannot compose {first.out_arity}-bit output into "
            f"{second.in_arity}-bit input")
    n, m = first.in_arity, second.out_arity
    if first.is_diagonal and second.is_diagonal:
        return TypedMatrix(n, m, diag=second._diag * first._diag, check=False)
    if first.is_sparse or second.is_sparse or n + m > MAX_DENSE_BITS:
        prod = second.to_sparse() @ first.to_sparse()
        return _finalize_sparse(prod, n, m)
    return TypedMatrix(n, m, dense=second.to_dense() @ first.to_dense(),
                       check=False)


def tensor(a: TypedMatrix, b: TypedMatrix) -> TypedMatrix:
    """Parallel composite; ``a`` occupies the most significant bits."""
    n = a.in_arity + b.in_arity
    m = a.out_arity + b.out_arity
    if a.is_diagonal and b.is_diagonal:
        return TypedMatrix(n, m, diag=np.kron(a._diag, b._diag), check=False)
    if a.is_sparse or b.is_sparse or n + m > MAX_DENSE_BITS:
        prod = sp.kron(a.to_sparse(), b.to_sparse(), format="csc")
        return _finalize_sparse(prod, n, m)
    return TypedMatrix(n, m, dense=np.kron(a.to_dense(), b.to_dense()),
                       check=False)


def _finalize_sparse(mat, n: int, m: int) -> TypedMatrix:
    if n + m <= DENSIFY_BITS:
        return TypedMatrix(n, m, dense=sp.csc_matrix(mat).toarray(),
                           check=False)
    return TypedMatrix(n, m, sparse=mat, check=False)


def identity(n: int) -> TypedMatrix:
    return TypedMatrix(n, n, diag=np.ones(1 << n), check=False)


def duplicate(n: int) -> TypedMatrix:
    """The copy map ``n -> 2n``: output is the input repeated twice."""
    if n < 1:
        raise InvalidArity("duplicate needs arity >= 1")
    size = 1 << n
    data = np.zeros((size * size, size))
    idx = np.arange(size)
    data[idx * size + idx, idx] = 1.0
    return TypedMatrix(n, 2 * n, dense=data, check=False)


def terminator(n: int) -> TypedMatrix:
    """The discard map ``n -> 0`` (all-ones row)."""
    if n < 1:
        raise InvalidArity("terminator needs arity >= 1")
    return TypedMatrix(n, 0, dense=np.ones((1, 1 << n)), check=False)


def swap_blocks(n: int, m: int) -> TypedMatrix:
    """The permutation ``n + m -> m + n`` exchanging the two bit blocks."""
    _check_arity(n)
    _check_arity(m)
    size = 1 << (n + m)
    y = np.arange(size)
    x = ((y & ((1 << m) - 1)) << n) | (y >> m)
    data = np.zeros((size, size))
    data[x, y] = 1.0
    return TypedMatrix(n + m, n + m, dense=data, check=False)


def constant(kind: str, n: int) -> TypedMatrix:
    """Named structural constants: ``id``, ``dup``, ``swap`` and ``term``.

    ``constant("swap", n)`` is the block swap on two ``n``-bit halves; the
    base generator is ``n = 1``.  Mixed-arity swaps come from
    :func:`swap_blocks`.
    """
    if kind == "id":
        return identity(n)
    if kind == "dup":
        return duplicate(n)
    if kind == "swap":
        if n < 1:
            raise InvalidArity("swap needs arity >= 1")
        return swap_blocks(n, n)
    if kind == "term":
        return terminator(n)
    raise InvalidArity(f"unknown constant kind {kind!r}")


def dump_matrix(mat: TypedMatrix) -> str:
    """Serialize: ``n m`` header, then rows in descending bitstring order.

    Columns within each row are also listed in descending order, so the
    top-left entry is ``M(1...1 | 1...1)``.
    """
    dense = mat.to_dense()
    lines = [f"{mat.in_arity} {mat.out_arity}"]
    for x in range(dense.shape[0] - 1, -1, -1):
        row = dense[x, ::-1]
        lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def dump_vector(p: ProbVector) -> str:
    return dump_matrix(p.as_matrix())


def parse_vector(arity: int, values: Iterable[float]) -> ProbVector:
    """Read a vector listed in descending bitstring order."""
    data = np.asarray(list(values), dtype=np.float64)
    if data.shape != (1 << arity,):
        raise InvalidArity(
            f"expected {1 << arity} entries for arity {arity}, "
            f"got {data.shape[0]}")
    return ProbVector(arity, data[::-1])
