"""Complete solutions of odeco systems under constant control.

In modal coordinates the controlled system splits into scalar equations
``c' = lambda c^{k-1} + b`` whose time map has the closed form

    t(c) = -g(a, -b / (lambda c^{k-1})) / ((k-2) lambda c^{k-2}) + const,
    a = (k-2)/(k-1),   g(a, z) = a * sum_{m>=0} z^m / (a + m),

valid while the argument z stays below the branch point at one.  The
primary computation path here is direct adaptive quadrature of the
separable integral dt = dc / (lambda c^{k-1} + b), which needs no branch
tracking; the hypergeometric formula is kept as an independent
cross-check wherever both of its arguments satisfy z < 1.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .errors import (
    BlowupError,
    BranchPointError,
    HPDSError,
    NoEquilibriumError,
    NotOdecoError,
    PathCrossingError,
)
from .spectral import OdecoDecomposition

QUAD_ABS_TOL = 1e-12
DEFAULT_SOLVE_TOL = 1e-10

_EXPANSION_CAP = 1e12


def gauss_g(a: float, z: float, method: str = "auto") -> float:
    """The hypergeometric ratio g(a, z) = a * sum_{m>=0} z^m / (a + m).

    Defined for a in (0, 1] and z < 1 on the real principal branch.  The
    power series is used for |z| <= 0.5; closer to the branch point (and
    for large negative z) the integral form a * int_0^1 t^{a-1}/(1 - z t) dt
    is evaluated instead, after the substitution u = t^a which removes
    the endpoint singularity.  Both paths agree on their overlap.
    """
    if not 0.0 < a <= 1.0:
        raise ValueError(f"a must lie in (0, 1], got {a}")
    if z >= 1.0:
        raise BranchPointError(
            f"argument z = {z:g} on or beyond the branch point at one"
        )
    if method == "auto":
        method = "series" if abs(z) <= 0.5 else "quadrature"
    if method == "series":
        return _g_series(a, z)
    if method == "quadrature":
        return _g_quadrature(a, z)
    raise ValueError(f"unknown method {method!r}")


def _g_series(a: float, z: float, max_terms: int = 200000) -> float:
    if abs(z) >= 1.0:
        raise BranchPointError("the series converges only for |z| < 1")
    total = 1.0  # m = 0 term is a / (a + 0)
    power = 1.0
    for m in range(1, max_terms):
        power *= z
        term = a * power / (a + m)
        total += term
        if abs(term) <= 1e-17 * abs(total):
            return total
    raise HPDSError(f"series for g({a}, {z}) failed to converge")


def _g_quadrature(a: float, z: float) -> float:
    inv_a = 1.0 / a
    value, _ = quad(lambda u: 1.0 / (1.0 - z * u**inv_a), 0.0, 1.0,
                    epsabs=QUAD_ABS_TOL, epsrel=1e-13, limit=200)
    return value


def _real_equilibria(lam: float, b: float, k: int):
    """Real roots of lambda c^{k-1} + b = 0, ascending."""
    if lam == 0.0:
        return []
    q = -b / lam
    p = k - 1
    if p % 2 == 1:
        return [math.copysign(abs(q) ** (1.0 / p), q)]
    if q < 0.0:
        return []
    if q == 0.0:
        return [0.0]
    root = q ** (1.0 / p)
    return [-root, root]


@dataclass(frozen=True)
class ControlledModalProblem:
    """One scalar mode c' = lambda c^{k-1} + b_tilde with c(0) = alpha.

    The flow is monotone until it reaches an equilibrium root; the
    `equilibrium` field holds the root the flow approaches (None on a
    divergent side where the coordinate escapes in finite time).
    """

    order: int
    lam: float
    b_tilde: float
    alpha: float
    equilibrium: float | None = None
    direction: int = 0  # sign of c' at alpha

    def __post_init__(self):
        if self.order < 3:
            raise ValueError("modal problems require order >= 3")
        v0 = self.velocity(self.alpha)
        scale = max(1.0, abs(self.lam) * abs(self.alpha) ** (self.order - 1),
                    abs(self.b_tilde))
        if abs(v0) <= 1e-14 * scale:
            direction = 0
            equilibrium = self.alpha
        else:
            direction = 1 if v0 > 0 else -1
            roots = _real_equilibria(self.lam, self.b_tilde, self.order)
            if direction > 0:
                ahead = [r for r in roots if r > self.alpha]
                equilibrium = min(ahead) if ahead else None
            else:
                ahead = [r for r in roots if r < self.alpha]
                equilibrium = max(ahead) if ahead else None
        if equilibrium is not None and self.lam != 0.0:
            res = abs(self.lam * equilibrium ** (self.order - 1) + self.b_tilde)
            if res > 1e-10 * scale:
                raise ValueError(f"equilibrium root residual {res:.3e} too large")
        object.__setattr__(self, "direction", direction)
        object.__setattr__(self, "equilibrium", equilibrium)

    def velocity(self, c: float) -> float:
        return self.lam * c ** (self.order - 1) + self.b_tilde

    @property
    def divergent(self) -> bool:
        return self.direction != 0 and self.equilibrium is None


def implicit_time(problem: ControlledModalProblem, c: float) -> float:
    """Time elapsed while the modal coordinate moves from alpha to c.

    Computed as the separable integral int_alpha^c ds / (lambda s^{k-1} +
    b); refuses paths that cross (or touch) an equilibrium pole, where
    the flow can never arrive.
    """
    p = problem
    if c == p.alpha:
        return 0.0
    if p.lam == 0.0:
        if p.b_tilde == 0.0:
            raise PathCrossingError(
                "degenerate mode with zero drift never leaves alpha"
            )
        return (c - p.alpha) / p.b_tilde
    lo, hi = min(p.alpha, c), max(p.alpha, c)
    for root in _real_equilibria(p.lam, p.b_tilde, p.order):
        if lo <= root <= hi:
            raise PathCrossingError(
                f"integration path [{lo:g}, {hi:g}] crosses the equilibrium "
                f"at {root:g}"
            )
    # root solving deliberately probes arbitrarily close to the pole, where
    # quad hits roundoff limits; accuracy there is controlled by the
    # bracketing logic, not the quadrature estimate
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        value, _ = quad(lambda s: 1.0 / p.velocity(s), p.alpha, c,
                        epsabs=QUAD_ABS_TOL, epsrel=1e-12, limit=400)
    return value


def implicit_time_hypergeometric(problem: ControlledModalProblem, c: float) -> float:
    """The closed hypergeometric form of the time map.

    Only valid when the argument -b/(lambda s^{k-1}) stays below one at
    both endpoints; used as an independent cross-check of the quadrature
    path.
    """
    p = problem
    if p.lam == 0.0:
        raise ValueError("the hypergeometric form needs lambda != 0")
    if p.alpha == 0.0 or c == 0.0:
        raise ValueError("the hypergeometric form is singular at zero")
    k = p.order
    a = (k - 2) / (k - 1)

    def piece(s: float) -> float:
        z = -p.b_tilde / (p.lam * s ** (k - 1))
        return -gauss_g(a, z) / ((k - 2) * p.lam * s ** (k - 2))

    return piece(c) - piece(p.alpha)


def modal_escape_time(problem: ControlledModalProblem) -> float:
    """Finite escape time of a divergent mode (the improper integral of
    the inverse velocity out to infinity)."""
    p = problem
    if not p.divergent:
        return float("inf")
    bound = np.inf if p.direction > 0 else -np.inf
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        value, _ = quad(lambda s: 1.0 / p.velocity(s), p.alpha, bound,
                        epsabs=QUAD_ABS_TOL, epsrel=1e-12, limit=400)
    return value


def solve_modal(problem: ControlledModalProblem, t: float,
                tol: float = DEFAULT_SOLVE_TOL) -> float:
    """Invert the implicit time map: the c with implicit_time(c) = t.

    Bisection on the monotone bracket (toward the approached equilibrium,
    or toward the escape bound on a divergent side) refined by Newton
    steps using the known derivative dt/dc = 1 / velocity(c).
    """
    p = problem
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    if t == 0.0 or p.direction == 0:
        return p.alpha
    if p.lam == 0.0:
        return p.alpha + p.b_tilde * t

    if p.divergent:
        esc = modal_escape_time(p)
        if t >= esc:
            raise BlowupError(
                f"modal coordinate escapes at t = {esc:.6g} before the "
                f"requested time {t:g}",
                escape_time=esc,
            )
        step = max(1.0, abs(p.alpha))
        hi = p.alpha + p.direction * step
        while implicit_time(p, hi) < t:
            step *= 2.0
            hi = p.alpha + p.direction * step
            if abs(hi) > _EXPANSION_CAP:
                raise HPDSError("bracket expansion exceeded 1e12")
        lo = p.alpha
    else:
        lo, hi = p.alpha, p.equilibrium

    # bisection in the flow direction; G(c) = implicit_time(c) - t goes
    # from -t at alpha to +inf toward the far end of the bracket.  On a
    # convergent side the far end is the equilibrium pole, which the true
    # solution may approach below float resolution; the loop then
    # saturates at the last representable interior point.
    a_, b_ = lo, hi
    c = 0.5 * (a_ + b_)
    for _ in range(200):
        if c == a_ or c == b_:
            break
        g = implicit_time(p, c) - t
        if abs(g) <= tol:
            return c
        if g < 0.0:
            a_ = c
        else:
            b_ = c
        # Newton from the current iterate, falling back to the midpoint
        # whenever the step leaves the open bracket
        c_newton = c - g * p.velocity(c)
        if min(a_, b_) < c_newton < max(a_, b_):
            c = c_newton
        else:
            c = 0.5 * (a_ + b_)
    return c


def modal_problems(decomposition: OdecoDecomposition, b, x0):
    """Per-mode scalar problems of a controlled odeco system."""
    b = np.asarray(b, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    n = decomposition.dim
    if b.shape != (n,) or x0.shape != (n,):
        raise ValueError(f"control and initial state must have length {n}")
    V = decomposition.eigenvectors
    b_tilde = V.T @ b
    alphas = V.T @ x0
    return [
        ControlledModalProblem(order=decomposition.order,
                               lam=float(decomposition.eigenvalues[r]),
                               b_tilde=float(b_tilde[r]),
                               alpha=float(alphas[r]))
        for r in range(n)
    ]


def _require_certified(decomposition: OdecoDecomposition, tol: float):
    if decomposition.order < 3:
        raise ValueError("controlled closed forms require order >= 3")
    if decomposition.residual > tol:
        raise NotOdecoError(
            f"decomposition residual {decomposition.residual:.3e} exceeds "
            f"the odeco certification tolerance {tol:.3e}",
            residual=decomposition.residual,
        )


def controlled_solution(decomposition: OdecoDecomposition, b, x0, t: float,
                        tol: float = DEFAULT_SOLVE_TOL,
                        odeco_tol: float = 1e-8) -> np.ndarray:
    """State x(t) of x' = A x^{k-1} + b via the per-mode time maps."""
    _require_certified(decomposition, odeco_tol)
    problems = modal_problems(decomposition, b, x0)
    c = np.empty(decomposition.dim)
    for r, p in enumerate(problems):
        try:
            c[r] = solve_modal(p, t, tol=tol)
        except BlowupError as exc:
            raise BlowupError(f"mode {r}: {exc}", escape_time=exc.escape_time)
    return decomposition.eigenvectors @ c


def controlled_states(decomposition: OdecoDecomposition, b, x0, times,
                      tol: float = DEFAULT_SOLVE_TOL,
                      odeco_tol: float = 1e-8) -> np.ndarray:
    """Vectorized closed-form evaluation at increasing times."""
    _require_certified(decomposition, odeco_tol)
    times = np.asarray(times, dtype=float)
    if times.size and np.any(np.diff(times) < 0):
        raise ValueError("times must be nondecreasing")
    problems = modal_problems(decomposition, b, x0)
    C = np.empty((times.size, decomposition.dim))
    for r, p in enumerate(problems):
        # the flow is autonomous, so each solved point re-anchors the mode
        # and the next inversion only covers the remaining time increment
        anchor, t_anchor = p, 0.0
        for i, t in enumerate(times):
            try:
                c = solve_modal(anchor, float(t) - t_anchor, tol=tol)
            except BlowupError as exc:
                raise BlowupError(
                    f"mode {r} at t = {t:g}: {exc}", escape_time=exc.escape_time
                )
            C[i, r] = c
            if c != anchor.alpha:
                anchor = ControlledModalProblem(order=p.order, lam=p.lam,
                                                b_tilde=p.b_tilde, alpha=c)
            t_anchor = float(t)
    return C @ decomposition.eigenvectors.T


def controlled_domain_end(decomposition: OdecoDecomposition, b, x0) -> float:
    """Right endpoint of the controlled solution's validity interval
    (the earliest modal escape time, infinite when every mode converges)."""
    problems = modal_problems(decomposition, b, x0)
    end = float("inf")
    for p in problems:
        if p.divergent:
            end = min(end, modal_escape_time(p))
    return end


def controlled_equilibrium(decomposition: OdecoDecomposition, b) -> np.ndarray:
    """Equilibrium of the controlled system, V e with modal roots
    lambda_r e_r^{k-1} = -b_r.

    With an even root power both signs solve the modal equation; the
    positive root is returned (the convention for population models whose
    states are abundances).  Modes with lambda zero admit no equilibrium
    unless their control component vanishes too.
    """
    b = np.asarray(b, dtype=float)
    n = decomposition.dim
    if b.shape != (n,):
        raise ValueError(f"control must have length {n}")
    k = decomposition.order
    b_tilde = decomposition.eigenvectors.T @ b
    e = np.empty(n)
    for r in range(n):
        lam = float(decomposition.eigenvalues[r])
        if lam == 0.0:
            if b_tilde[r] != 0.0:
                raise NoEquilibriumError(
                    f"mode {r} has zero eigenvalue but nonzero control",
                    mode=r,
                )
            e[r] = 0.0
            continue
        q = -b_tilde[r] / lam
        p = k - 1
        if p % 2 == 1:
            e[r] = math.copysign(abs(q) ** (1.0 / p), q)
        else:
            if q < 0.0:
                raise NoEquilibriumError(
                    f"mode {r}: no real equilibrium (negative radicand "
                    f"{q:.3e} under an even root)",
                    mode=r,
                )
            e[r] = q ** (1.0 / p)
    return decomposition.eigenvectors @ e
