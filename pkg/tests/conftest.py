"""Shared builders for the test suite.

The golden systems used throughout come from a published worked example
set: a two-dimensional cubic system with spectrum (-1, -2), a
two-species population model built from an explicit orthonormal pair
with both weights equal to 2, and a three-species model with constant
supply that is transformable to odeco coordinates.  Printed sources
carry four decimals, so golden tensors are reconstructed to full
precision (eigenvalues snapped to their exact integer values) and every
reconstruction is asserted against the printed entries within print
rounding.
"""

import itertools

import numpy as np
import pytest

from odeco_hpds import spectral
from odeco_hpds.tensor_core import (
    AlmostSymTensor,
    PolynomialSpec,
    SymTensor,
    from_polynomial,
    outer_power,
)

# ---------------------------------------------------------------------------
# golden system 1: synthetic two-dimensional cubic, spectrum (-1, -2)

SYNTHETIC_DISTINCT_ENTRIES = {
    (0, 0, 0, 0): -1.2593,
    (0, 0, 0, 1): 0.5543,
    (0, 0, 1, 1): -0.5185,
    (0, 1, 1, 1): -0.1386,
    (1, 1, 1, 1): -0.7037,
}
SYNTHETIC_EIGENVALUES = np.array([-1.0, -2.0])
# right-hand side coefficients as printed (four decimals)
SYNTHETIC_EQ1 = ((3, 0), -1.2593), ((2, 1), 1.6630), ((1, 2), -1.5554), ((0, 3), -0.1386)
SYNTHETIC_EQ2 = ((3, 0), 0.5543), ((2, 1), -1.5554), ((1, 2), -0.4158), ((0, 3), -0.7037)
PRINT_ATOL = 5.1e-5  # half-ulp of a four-decimal print


def tensor_from_distinct(distinct, n, k):
    arr = np.zeros((n,) * k)
    for idx, val in distinct.items():
        for perm in set(itertools.permutations(idx)):
            arr[perm] = val
    return arr


def synthetic_printed_tensor() -> SymTensor:
    """The quartic tensor exactly as printed (four-decimal entries)."""
    return SymTensor(tensor_from_distinct(SYNTHETIC_DISTINCT_ENTRIES, 2, 4))


_golden_cache = {}


def synthetic_golden():
    """Full-precision reconstruction of the synthetic tensor.

    Decomposes the printed tensor, snaps the eigenvalues to their exact
    values (-1, -2), and rebuilds; the rebuild must agree with the print
    within four-decimal rounding, which pins the reconstruction to the
    published entries.  Returns (tensor, eigenvalues, eigenvector matrix).
    """
    if "synthetic" not in _golden_cache:
        printed = synthetic_printed_tensor()
        d = spectral.odeco_decompose(printed, seed=0)
        assert np.allclose(d.eigenvalues, SYNTHETIC_EIGENVALUES, atol=5e-4)
        V = d.eigenvectors
        arr = sum(SYNTHETIC_EIGENVALUES[r] * outer_power(V[:, r], 4)
                  for r in range(2))
        assert np.max(np.abs(arr - printed.entries)) < PRINT_ATOL
        _golden_cache["synthetic"] = (SymTensor(arr),
                                      SYNTHETIC_EIGENVALUES.copy(), V.copy())
    tensor, lams, V = _golden_cache["synthetic"]
    return tensor, lams.copy(), V.copy()


# ---------------------------------------------------------------------------
# golden system 2: two-species population model, weights (2, 2)

POPULATION_WEIGHTS = np.array([2.0, 2.0])


def population_vectors():
    s = np.sqrt(2.0) / 2.0
    return np.array([s, s]), np.array([s, -s])


def population_tensor() -> SymTensor:
    v1, v2 = population_vectors()
    arr = 2.0 * outer_power(v1, 4) + 2.0 * outer_power(v2, 4)
    return SymTensor(arr)


POPULATION_X0 = np.array([0.5, 0.1])
POPULATION_BLOWUP = 25.0 / 18.0  # min(1/(4 a1^2), 1/(4 a2^2)) at that x0


# ---------------------------------------------------------------------------
# golden system 3: three-species model with constant supply

THREE_SPECIES_EQUATIONS = (
    (((3, 0, 0), -1.0), ((2, 1, 0), -3.0), ((1, 2, 0), -3.0)),
    (((0, 3, 0), -1.0),),
    (((0, 0, 3), -1.0), ((2, 0, 1), -3.0), ((1, 0, 2), -3.0),
     ((0, 2, 1), -3.0), ((0, 1, 2), -3.0), ((1, 1, 1), -6.0)),
)
THREE_SPECIES_CONTROL = np.array([2.0, 2.0, 2.0])
THREE_SPECIES_X0 = np.array([1.0, 1.0, 1.0])
# published factor matrices (integer entries) and transformation
THREE_SPECIES_V = np.array([[1.0, 0.0, 1.0],
                            [1.0, 1.0, 1.0],
                            [0.0, 0.0, 1.0]])
THREE_SPECIES_P = np.array([[1.0, -1.0, 0.0],
                            [0.0, 1.0, 0.0],
                            [-1.0, 0.0, 1.0]])
THREE_SPECIES_XE_PRINTED = np.array([0.3275, 1.2599, 0.2297])
THREE_SPECIES_XE_EXACT = np.array([
    np.cbrt(4.0) - np.cbrt(2.0), np.cbrt(2.0), np.cbrt(6.0) - np.cbrt(4.0),
])


def three_species_spec() -> PolynomialSpec:
    return PolynomialSpec(dim=3, degree=3, equations=THREE_SPECIES_EQUATIONS)


def three_species_tensor() -> AlmostSymTensor:
    return from_polynomial(three_species_spec())


# ---------------------------------------------------------------------------
# random builders (all deterministic through the supplied rng)

def random_orthonormal(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def separated_values(rng, n, low=0.5, high=2.5, min_gap=0.15, signs=None):
    """Eigenvalue draws with a guaranteed pairwise gap (keeps eigenvector
    matching in tests well posed)."""
    for _ in range(200):
        mags = rng.uniform(low, high, n)
        if signs is None:
            sgn = rng.choice([-1.0, 1.0], n)
        else:
            sgn = np.asarray(signs, dtype=float)
        vals = np.sort(mags * sgn)[::-1]
        if n == 1 or np.min(np.diff(np.sort(vals))) >= min_gap:
            return vals
    raise RuntimeError("could not draw separated eigenvalues")


def random_odeco(rng, n, k, lams=None, **kwargs):
    """(tensor, eigenvalues, eigenvector matrix) with exact structure."""
    if lams is None:
        lams = separated_values(rng, n, **kwargs)
    V = random_orthonormal(rng, n)
    arr = sum(lams[r] * outer_power(V[:, r], k) for r in range(n))
    return SymTensor(arr), np.asarray(lams, dtype=float), V


def random_supersymmetric(rng, n, k) -> SymTensor:
    from odeco_hpds.tensor_core import symmetrize

    return symmetrize(rng.standard_normal((n,) * k))


def random_invertible(rng, n, cond_cap=8.0):
    for _ in range(200):
        V = rng.standard_normal((n, n))
        V = V / np.linalg.norm(V, axis=0)
        if np.linalg.cond(V) <= cond_cap:
            return V
    raise RuntimeError("could not draw a well-conditioned matrix")


def random_transformable(rng, n, k, weights=None, cond_cap=8.0):
    """Almost symmetric tensor built from the inverse-transpose structure."""
    V = random_invertible(rng, n, cond_cap)
    if weights is None:
        weights = separated_values(rng, n, low=0.5, high=2.0)
    W = np.linalg.inv(V).T
    arr = np.zeros((n,) * k)
    for r in range(n):
        arr += weights[r] * np.multiply.outer(outer_power(V[:, r], k - 1), W[:, r])
    return AlmostSymTensor(arr), V, np.asarray(weights, dtype=float)


# ---------------------------------------------------------------------------
# assertions

def assert_decomposition_matches(d, lams_expected, V_expected,
                                 value_tol=1e-8, dot_tol=1e-6):
    """Match recovered eigenpairs to expected ones up to column
    permutation and the joint (lambda, v) ~ (-lambda, -v) sign freedom of
    odd orders."""
    n = d.dim
    used = set()
    for r in range(n):
        v_e = V_expected[:, r]
        dots = np.array([
            abs(float(v_e @ d.eigenvectors[:, c])) if c not in used else -1.0
            for c in range(n)
        ])
        c = int(np.argmax(dots))
        assert dots[c] > 1.0 - dot_tol, (
            f"no eigenvector matches expected column {r} (best |dot| {dots[c]})"
        )
        used.add(c)
        sign = 1.0 if float(v_e @ d.eigenvectors[:, c]) >= 0 else -1.0
        lam_e = lams_expected[r] * (sign if d.order % 2 == 1 else 1.0)
        assert abs(float(d.eigenvalues[c]) - lam_e) <= value_tol, (
            f"eigenvalue mismatch at expected column {r}: "
            f"{d.eigenvalues[c]} vs {lam_e}"
        )


def relative_state_error(reference, candidate, floor=1e-12):
    """Rowwise relative deviation between two state tables."""
    reference = np.atleast_2d(reference)
    candidate = np.atleast_2d(candidate)
    num = np.linalg.norm(reference - candidate, axis=1)
    den = np.maximum(np.linalg.norm(reference, axis=1), floor)
    return num / den


# ---------------------------------------------------------------------------
# fixtures

@pytest.fixture(scope="session")
def golden_synthetic():
    return synthetic_golden()


@pytest.fixture(scope="session")
def golden_population():
    v1, v2 = population_vectors()
    return population_tensor(), POPULATION_WEIGHTS.copy(), np.column_stack([v1, v2])


@pytest.fixture(scope="session")
def golden_three_species():
    return {
        "tensor": three_species_tensor(),
        "control": THREE_SPECIES_CONTROL.copy(),
        "x0": THREE_SPECIES_X0.copy(),
        "xe_exact": THREE_SPECIES_XE_EXACT.copy(),
        "xe_printed": THREE_SPECIES_XE_PRINTED.copy(),
        "V_printed": THREE_SPECIES_V.copy(),
        "P_printed": THREE_SPECIES_P.copy(),
    }
