"""Explicit solutions, blow-up domains, equilibria, and stability verdicts
for polynomial systems whose dynamic tensor is odeco.

In the orthonormal eigenvector basis the system decouples into scalar
modes ``c_r' = lambda_r c_r^{k-1}``, each solvable in closed form.  The
sign pattern of the modal products ``lambda_r alpha_r^{k-2}`` decides
everything: positive products blow up in finite time, negative ones decay
algebraically, zero ones stand still.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NotOdecoError
from .spectral import OdecoDecomposition, mu_max
from .tensor_core import AlmostSymTensor, SymTensor, apply, frob_norm

STABLE = "stable"
ASYMPTOTICALLY_STABLE = "asymptotically_stable"
UNSTABLE = "unstable"

# Default residual threshold below which a decomposition certifies its
# tensor as odeco and the closed forms apply.
ODECO_CERT_TOL = 1e-8

# Modal products within this factor of the problem scale are classified
# as exactly zero (the marginal branch of the trichotomy).
ZERO_PRODUCT_RTOL = 1e-12


@dataclass(frozen=True)
class HPDSystem:
    """A polynomial system x' = A x^{k-1} (+ b with constant control)."""

    tensor: AlmostSymTensor
    control: np.ndarray | None = None

    def __post_init__(self):
        if self.control is not None:
            b = np.asarray(self.control, dtype=float)
            if b.shape != (self.tensor.dim,):
                raise ValueError(
                    f"control length {b.shape} does not match dim {self.tensor.dim}"
                )
            b = b.copy()
            b.setflags(write=False)
            object.__setattr__(self, "control", b)

    @property
    def dim(self) -> int:
        return self.tensor.dim

    @property
    def order(self) -> int:
        return self.tensor.order

    def rhs(self, x: np.ndarray) -> np.ndarray:
        """Right-hand side A x^{k-1} (+ b)."""
        out = apply(self.tensor, x)
        if self.control is not None:
            out = out + self.control
        return out


@dataclass(frozen=True)
class ExplicitSolution:
    """Closed-form solution data of an uncontrolled odeco system.

    ``blowup_modes`` collects the indices (0-based) whose modal product is
    positive; the validity interval is [0, domain_end) with domain_end
    infinite when no mode blows up.
    """

    decomposition: OdecoDecomposition
    alphas: np.ndarray
    order: int
    domain_end: float
    blowup_modes: tuple

    def __post_init__(self):
        a = np.asarray(self.alphas, dtype=float)
        a.setflags(write=False)
        object.__setattr__(self, "alphas", a)

    def __call__(self, t: float) -> np.ndarray:
        return eval_solution(self, t)


@dataclass(frozen=True)
class EquilibriumStructure:
    """Either a unique equilibrium at the origin or infinitely many."""

    kind: str  # "unique_origin" | "infinitely_many"
    null_modes: tuple = ()


@dataclass(frozen=True)
class StabilityReport:
    verdict: str
    mode_products: np.ndarray
    blowup_time: float | None
    basis: str  # modal_products | eigenvalue_signs | unfolding_bound
    mu: float | None = None

    def __post_init__(self):
        p = np.asarray(self.mode_products, dtype=float)
        p.setflags(write=False)
        object.__setattr__(self, "mode_products", p)


def modal_coordinates(decomposition: OdecoDecomposition, x0) -> np.ndarray:
    """Coordinates of x0 in the orthonormal eigenvector basis, V^T x0."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (decomposition.dim,):
        raise ValueError(f"expected vector of length {decomposition.dim}")
    return decomposition.eigenvectors.T @ x0


def _modal_products(decomposition: OdecoDecomposition, alphas: np.ndarray) -> np.ndarray:
    k = decomposition.order
    return decomposition.eigenvalues * alphas ** (k - 2)


def _zero_tol(decomposition: OdecoDecomposition, x0_norm: float) -> float:
    k = decomposition.order
    lam1 = abs(float(decomposition.eigenvalues[0]))
    return ZERO_PRODUCT_RTOL * max(1.0, lam1 * x0_norm ** (k - 2))


def _domain_end(products: np.ndarray, k: int, tol: float):
    blowers = np.flatnonzero(products > tol)
    if blowers.size == 0:
        return np.inf, ()
    end = float(np.min(1.0 / ((k - 2) * products[blowers])))
    return end, tuple(int(r) for r in blowers)


def explicit_solution(decomposition: OdecoDecomposition, x0,
                      tol: float = ODECO_CERT_TOL) -> ExplicitSolution:
    """Closed-form modal solution for order k >= 3.

    Refuses decompositions whose residual exceeds the certification
    tolerance: those systems are not odeco and should be routed through
    the transform module.
    """
    k = decomposition.order
    if k < 3:
        raise ValueError("closed form requires order >= 3; order 2 uses the "
                         "exponential formula")
    if decomposition.residual > tol:
        raise NotOdecoError(
            f"decomposition residual {decomposition.residual:.3e} exceeds the "
            f"odeco certification tolerance {tol:.3e}; transform the system "
            "to odeco coordinates first",
            residual=decomposition.residual,
        )
    alphas = modal_coordinates(decomposition, x0)
    products = _modal_products(decomposition, alphas)
    ztol = _zero_tol(decomposition, float(np.linalg.norm(alphas)))
    end, modes = _domain_end(products, k, ztol)
    return ExplicitSolution(decomposition=decomposition, alphas=alphas,
                            order=k, domain_end=end, blowup_modes=modes)


def eval_solution(solution: ExplicitSolution, t: float) -> np.ndarray:
    """Evaluate the closed form at one time inside [0, domain_end)."""
    states = solution_states(solution, [t])
    return states[0]


def solution_states(solution: ExplicitSolution, times) -> np.ndarray:
    """Vectorized closed-form evaluation at many times."""
    times = np.asarray(times, dtype=float)
    if times.size and (times.min() < 0.0 or times.max() >= solution.domain_end):
        raise DomainError(
            f"time outside the validity interval [0, {solution.domain_end:g})",
            domain_end=solution.domain_end,
        )
    k = solution.order
    d = solution.decomposition
    products = _modal_products(d, solution.alphas)
    # base is positive throughout the validity interval, so the real
    # fractional power below is well defined
    base = 1.0 - (k - 2) * products[None, :] * times[:, None]
    coeff = base ** (-1.0 / (k - 2)) * solution.alphas[None, :]
    # modes with alpha exactly zero contribute nothing regardless of lambda
    coeff[:, solution.alphas == 0.0] = 0.0
    return coeff @ d.eigenvectors.T


def eval_solution_k2(decomposition: OdecoDecomposition, x0, t: float) -> np.ndarray:
    """Exponential modal solution of the order-2 (linear) case."""
    if decomposition.order != 2:
        raise ValueError("exponential formula applies to order 2 only")
    alphas = modal_coordinates(decomposition, x0)
    coeff = np.exp(decomposition.eigenvalues * t) * alphas
    return decomposition.eigenvectors @ coeff


def equilibrium_structure(decomposition: OdecoDecomposition) -> EquilibriumStructure:
    """Unique origin when every eigenvalue is nonzero, else infinitely many
    equilibria spanned by the null modes (0-based indices)."""
    lams = decomposition.eigenvalues
    tol = ZERO_PRODUCT_RTOL * max(1.0, abs(float(lams[0])))
    null_modes = tuple(int(r) for r in np.flatnonzero(np.abs(lams) <= tol))
    if null_modes:
        return EquilibriumStructure(kind="infinitely_many", null_modes=null_modes)
    return EquilibriumStructure(kind="unique_origin")


def classify_stability(decomposition: OdecoDecomposition, x0) -> StabilityReport:
    """Trichotomy from the modal products for a given initial condition.

    Unstable when some product is positive (finite-time blow-up, the
    escape time is reported), asymptotically stable when all are
    negative, stable when all are nonpositive with at least one zero.
    """
    k = decomposition.order
    if k < 3:
        raise ValueError("modal classification requires order >= 3")
    alphas = modal_coordinates(decomposition, x0)
    products = _modal_products(decomposition, alphas)
    ztol = _zero_tol(decomposition, float(np.linalg.norm(alphas)))
    end, modes = _domain_end(products, k, ztol)
    if modes:
        verdict, blowup = UNSTABLE, end
    elif np.all(products < -ztol):
        verdict, blowup = ASYMPTOTICALLY_STABLE, None
    else:
        verdict, blowup = STABLE, None
    return StabilityReport(verdict=verdict, mode_products=products,
                           blowup_time=blowup, basis="modal_products")


def classify_global_even(decomposition: OdecoDecomposition) -> StabilityReport:
    """Initial-condition independent verdict for even order >= 4.

    With an even order the modal products share the signs of the
    eigenvalues, so the eigenvalue signs alone decide stability globally.
    """
    k = decomposition.order
    if k < 4 or k % 2 != 0:
        raise ValueError("global eigenvalue-sign classification applies to "
                         "even order >= 4 only")
    lams = decomposition.eigenvalues
    tol = ZERO_PRODUCT_RTOL * max(1.0, abs(float(lams[0])))
    if np.any(lams > tol):
        verdict = UNSTABLE
    elif np.all(lams < -tol):
        verdict = ASYMPTOTICALLY_STABLE
    else:
        verdict = STABLE
    return StabilityReport(verdict=verdict, mode_products=lams.copy(),
                           blowup_time=None, basis="eigenvalue_signs")


def classify_by_unfolding(tensor: SymTensor):
    """Sufficient verdict from the unfolding eigenvalue bound.

    Returns None when the bound is positive: the test is one-sided and
    silent there.
    """
    k = tensor.order
    if k < 4 or k % 2 != 0:
        raise ValueError("unfolding bound applies to even order >= 4 only")
    mu = mu_max(tensor)
    tol = ZERO_PRODUCT_RTOL * max(1.0, frob_norm(tensor))
    if mu < -tol:
        verdict = ASYMPTOTICALLY_STABLE
    elif mu <= tol:
        verdict = STABLE
    else:
        return None
    return StabilityReport(verdict=verdict, mode_products=np.array([]),
                           blowup_time=None, basis="unfolding_bound", mu=mu)


def in_region_of_attraction(decomposition: OdecoDecomposition, x) -> bool:
    """Strict test: every modal product negative (the origin itself and
    marginal directions are excluded)."""
    if decomposition.order < 3:
        raise ValueError("region of attraction requires order >= 3")
    alphas = modal_coordinates(decomposition, x)
    products = _modal_products(decomposition, alphas)
    ztol = _zero_tol(decomposition, float(np.linalg.norm(alphas)))
    return bool(np.all(products < -ztol))
