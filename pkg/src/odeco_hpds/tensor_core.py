"""Dense cubical tensor storage and multilinear operations.

Tensors are stored as dense numpy arrays of shape ``(n,) * k`` in C
(row-major) order.  External formats address entries with 1-based
multi-indices; internally everything is 0-based.  All tensor objects are
immutable after construction and every operation here is a pure function,
so instances are safe to share across threads.

The free-mode convention is fixed throughout the package: contracting a
state vector into the first ``k - 1`` modes leaves the last mode as the
output, i.e. the slice with fixed last index ``i`` carries the i-th state
equation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import SymmetryError

# Relative (to the Frobenius norm) tolerance used when checking that
# ingested entries actually carry the advertised symmetry.
SYMMETRY_RTOL = 1e-10


def _as_cubical_array(entries) -> np.ndarray:
    arr = np.asarray(entries, dtype=float)
    if arr.ndim < 2:
        raise ValueError("tensor must have order at least 2")
    n = arr.shape[0]
    if any(s != n for s in arr.shape):
        raise ValueError(f"tensor must be cubical, got shape {arr.shape}")
    return arr


def _symmetrized(arr: np.ndarray) -> np.ndarray:
    """Average each index orbit and write the identical value to every
    permuted position, so the result is symmetric bit for bit (a
    transpose-and-average scheme would leave summation-order dust)."""
    k = arr.ndim
    n = arr.shape[0]
    out = np.empty_like(arr)
    for rep in itertools.combinations_with_replacement(range(n), k):
        orbit = sorted(set(itertools.permutations(rep)))
        avg = sum(arr[p] for p in orbit) / len(orbit)
        for p in orbit:
            out[p] = avg
    return out


def _slice_symmetrized(arr: np.ndarray) -> np.ndarray:
    """Symmetrize the first k-1 modes only, leaving the last mode alone."""
    k = arr.ndim
    n = arr.shape[0]
    out = np.empty_like(arr)
    for rep in itertools.combinations_with_replacement(range(n), k - 1):
        orbit = sorted(set(itertools.permutations(rep)))
        avg = sum(arr[p] for p in orbit) / len(orbit)  # vector over last mode
        for p in orbit:
            out[p] = avg
    return out


class AlmostSymTensor:
    """Order-k cubical tensor symmetric in its first k-1 modes.

    Each slice with fixed last index is a supersymmetric order-(k-1)
    tensor; this is the natural carrier of a general homogeneous
    polynomial system, one slice per state equation.
    """

    __slots__ = ("_entries",)

    def __init__(self, entries):
        arr = _as_cubical_array(entries)
        self._check_symmetry(arr)
        arr = arr.copy()
        arr.setflags(write=False)
        self._entries = arr

    @staticmethod
    def _check_symmetry(arr):
        ref = _slice_symmetrized(arr)
        tol = SYMMETRY_RTOL * max(1.0, float(np.linalg.norm(arr)))
        dev = float(np.max(np.abs(arr - ref))) if arr.size else 0.0
        if dev > tol:
            raise SymmetryError(
                f"entries deviate from first-(k-1)-mode symmetry by {dev:.3e} "
                f"(tolerance {tol:.3e}); call symmetrize() to coerce"
            )

    @classmethod
    def _wrap(cls, arr: np.ndarray):
        """Internal constructor that skips the symmetry check."""
        obj = object.__new__(cls)
        arr = np.ascontiguousarray(arr, dtype=float)
        arr.setflags(write=False)
        obj._entries = arr
        return obj

    @classmethod
    def from_flat(cls, values, order: int, dim: int):
        """Build from a flat C-order list of dim**order values."""
        arr = np.asarray(values, dtype=float)
        if arr.size != dim**order:
            raise ValueError(
                f"expected {dim**order} entries for order {order}, dim {dim}, "
                f"got {arr.size}"
            )
        return cls(arr.reshape((dim,) * order))

    @property
    def order(self) -> int:
        return self._entries.ndim

    @property
    def dim(self) -> int:
        return self._entries.shape[0]

    @property
    def entries(self) -> np.ndarray:
        """Read-only view of the dense entry array."""
        return self._entries

    def slice_tensor(self, i: int) -> "SymTensor":
        """Supersymmetric order-(k-1) tensor of state equation i (0-based)."""
        return SymTensor._wrap(self._entries[..., i])

    def __eq__(self, other):
        if not isinstance(other, AlmostSymTensor):
            return NotImplemented
        return self._entries.shape == other._entries.shape and bool(
            np.array_equal(self._entries, other._entries)
        )

    def __hash__(self):
        return hash((self._entries.shape, self._entries.tobytes()))

    def __repr__(self):
        return f"{type(self).__name__}(order={self.order}, dim={self.dim})"


class SymTensor(AlmostSymTensor):
    """Supersymmetric order-k cubical tensor (invariant under all index
    permutations)."""

    __slots__ = ()

    @staticmethod
    def _check_symmetry(arr):
        ref = _symmetrized(arr)
        tol = SYMMETRY_RTOL * max(1.0, float(np.linalg.norm(arr)))
        dev = float(np.max(np.abs(arr - ref))) if arr.size else 0.0
        if dev > tol:
            raise SymmetryError(
                f"entries deviate from supersymmetry by {dev:.3e} "
                f"(tolerance {tol:.3e}); call symmetrize() to coerce"
            )


@dataclass(frozen=True)
class PolynomialSpec:
    """Homogeneous polynomial system of degree d = k - 1.

    ``equations[i]`` lists the monomials of the i-th state equation as
    ``(exponents, coeff)`` pairs, where ``exponents`` has one entry per
    state variable and sums to ``degree``.  Exponent vectors must be
    unique within one equation (coefficients pre-merged).
    """

    dim: int
    degree: int
    equations: tuple

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.degree < 1:
            raise ValueError("degree must be at least 1")
        if len(self.equations) != self.dim:
            raise ValueError(
                f"expected {self.dim} equations, got {len(self.equations)}"
            )
        normalized = []
        for i, eq in enumerate(self.equations):
            seen = set()
            monos = []
            for exponents, coeff in eq:
                exponents = tuple(int(e) for e in exponents)
                if len(exponents) != self.dim or any(e < 0 for e in exponents):
                    raise ValueError(
                        f"equation {i}: bad exponent vector {exponents}"
                    )
                if sum(exponents) != self.degree:
                    raise ValueError(
                        f"equation {i}: monomial {exponents} has degree "
                        f"{sum(exponents)}, expected {self.degree}"
                    )
                if exponents in seen:
                    raise ValueError(
                        f"equation {i}: duplicate exponent vector {exponents}"
                    )
                seen.add(exponents)
                monos.append((exponents, float(coeff)))
            normalized.append(tuple(monos))
        object.__setattr__(self, "equations", tuple(normalized))

    def evaluate(self, x) -> np.ndarray:
        """Direct monomial evaluation of the right-hand side at x."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"expected state of length {self.dim}")
        out = np.zeros(self.dim)
        for i, eq in enumerate(self.equations):
            for exponents, coeff in eq:
                term = coeff
                for xj, ej in zip(x, exponents):
                    if ej:
                        term *= xj**ej
                out[i] += term
        return out


def _multinomial(degree: int, exponents) -> int:
    m = math.factorial(degree)
    for e in exponents:
        m //= math.factorial(e)
    return m


def _exponents_to_indices(exponents) -> tuple:
    """(2, 1, 0) -> (0, 0, 1): the sorted index multiset of a monomial."""
    idx = []
    for var, e in enumerate(exponents):
        idx.extend([var] * e)
    return tuple(idx)


def _indices_to_exponents(indices, dim: int) -> tuple:
    exps = [0] * dim
    for j in indices:
        exps[j] += 1
    return tuple(exps)


def symmetric_tensor_from_form(dim: int, degree: int, monomials) -> SymTensor:
    """Supersymmetric tensor of a single homogeneous form.

    Each monomial coefficient is divided equally among the multinomial
    count of index permutations of its exponent vector, so the full
    contraction of the result reproduces the form.
    """
    arr = np.zeros((dim,) * degree)
    seen = set()
    for exponents, coeff in monomials:
        exponents = tuple(int(e) for e in exponents)
        if sum(exponents) != degree or len(exponents) != dim:
            raise ValueError(f"monomial {exponents} does not have degree {degree}")
        if exponents in seen:
            raise ValueError(f"duplicate exponent vector {exponents}")
        seen.add(exponents)
        share = float(coeff) / _multinomial(degree, exponents)
        for perm in set(itertools.permutations(_exponents_to_indices(exponents))):
            arr[perm] = share
    return SymTensor._wrap(arr)


def from_polynomial(spec: PolynomialSpec) -> AlmostSymTensor:
    """Order-(d+1) almost symmetric tensor of a degree-d polynomial system.

    The slice with fixed last index i is the unique supersymmetric tensor
    of state equation i.
    """
    n, d = spec.dim, spec.degree
    arr = np.zeros((n,) * (d + 1))
    for i, eq in enumerate(spec.equations):
        arr[..., i] = symmetric_tensor_from_form(n, d, eq).entries
    return AlmostSymTensor._wrap(arr)


def to_polynomial(tensor: AlmostSymTensor) -> PolynomialSpec:
    """Inverse of :func:`from_polynomial`.

    Coefficients are the multinomial-weighted symmetric entries; exact
    zeros are dropped, so a zero tensor yields empty monomial lists.
    """
    n, k = tensor.dim, tensor.order
    d = k - 1
    arr = tensor.entries
    equations = []
    for i in range(n):
        monos = []
        for indices in itertools.combinations_with_replacement(range(n), d):
            exponents = _indices_to_exponents(indices, n)
            coeff = arr[indices + (i,)] * _multinomial(d, exponents)
            if coeff != 0.0:
                monos.append((exponents, float(coeff)))
        equations.append(tuple(monos))
    return PolynomialSpec(dim=n, degree=d, equations=tuple(equations))


def _apply_arr(arr: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Contract modes 1..k-1 with x, leaving the last mode free."""
    out = arr
    for _ in range(arr.ndim - 1):
        out = np.tensordot(x, out, axes=(0, 0))
    return out


def apply(tensor: AlmostSymTensor, x) -> np.ndarray:
    """Tensor-vector product A x^(k-1): component i is the contraction of
    slice i with k-1 copies of x."""
    x = np.asarray(x, dtype=float)
    if x.shape != (tensor.dim,):
        raise ValueError(f"expected vector of length {tensor.dim}, got {x.shape}")
    return _apply_arr(tensor.entries, x)


def polyval(tensor: SymTensor, x) -> float:
    """Full contraction T x^k, the homogeneous polynomial attached to T."""
    if not isinstance(tensor, SymTensor):
        raise TypeError("polyval requires a supersymmetric tensor")
    x = np.asarray(x, dtype=float)
    if x.shape != (tensor.dim,):
        raise ValueError(f"expected vector of length {tensor.dim}, got {x.shape}")
    return float(_apply_arr(tensor.entries, x) @ x)


def symmetrize(tensor) -> SymTensor:
    """Average an arbitrary cubical tensor over all index permutations.

    Idempotent; fixes supersymmetric inputs exactly up to rounding.
    """
    if isinstance(tensor, AlmostSymTensor):
        arr = tensor.entries
    else:
        arr = _as_cubical_array(tensor)
    return SymTensor._wrap(_symmetrized(arr))


def unfold_psi(tensor: SymTensor) -> np.ndarray:
    """Square unfolding of an even-order tensor.

    The 2m indices are read as interleaved row/column digits: odd
    positions build the row index, even positions the column index, the
    first digit of each group varying fastest.  For supersymmetric input
    the result is a symmetric n^m x n^m matrix whose largest eigenvalue
    upper-bounds the largest Z-eigenvalue of the tensor.
    """
    if tensor.order % 2 != 0:
        raise ValueError(f"unfolding requires even order, got {tensor.order}")
    arr = tensor.entries
    m = tensor.order // 2
    n = tensor.dim
    row_axes = list(range(0, tensor.order, 2))
    col_axes = list(range(1, tensor.order, 2))
    interleaved = np.transpose(arr, row_axes + col_axes)
    return interleaved.reshape(n**m, n**m, order="F").copy()


def frob_distance(t1: AlmostSymTensor, t2: AlmostSymTensor) -> float:
    """Frobenius norm of the entrywise difference."""
    a, b = t1.entries, t2.entries
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


def frob_norm(tensor: AlmostSymTensor) -> float:
    return float(np.linalg.norm(tensor.entries))


def outer_power(v, order: int) -> np.ndarray:
    """Rank-one array v o v o ... o v with `order` factors."""
    v = np.asarray(v, dtype=float)
    out = v
    for _ in range(order - 1):
        out = np.multiply.outer(out, v)
    return out


def as_supersymmetric(tensor: AlmostSymTensor, rtol: float = SYMMETRY_RTOL):
    """Promote to SymTensor when the entries are fully supersymmetric.

    Returns None when the tensor is genuinely only almost symmetric.
    """
    arr = tensor.entries
    ref = _symmetrized(arr)
    tol = rtol * max(1.0, float(np.linalg.norm(arr)))
    if float(np.max(np.abs(arr - ref))) <= tol:
        return SymTensor._wrap(arr)
    return None
