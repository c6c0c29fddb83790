"""Transformability of general polynomial systems to odeco form.

A general system is carried by an almost symmetric tensor.  When that
tensor admits a CP decomposition whose first k-1 factors share one
invertible matrix V and whose last factor is tied to the inverse
transpose of V (columnwise, up to real weights), an invertible change of
coordinates turns the system into an odeco one, where every closed form
of this package applies.  The fit below enforces the inverse-transpose
coupling by construction: weights are solved linearly for fixed V, and V
is updated by damped Gauss-Newton steps whose Jacobian differentiates
the coupling through d(V^-T) = -V^-T dV^T V^-T.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import control as _control
from . import dynamics as _dynamics
from .errors import BlowupError, FitError, NotTransformableError
from .oracle import BLOWUP, COMPLETED, Termination, Trajectory
from .spectral import OdecoDecomposition, canonical_pairs
from .tensor_core import AlmostSymTensor, SymTensor, outer_power

DEFAULT_EPSILON = 1e-12
DEFAULT_RESTARTS = 20
DEFAULT_MAX_ITER = 200


class _RestartFailed(Exception):
    pass


@dataclass(frozen=True)
class TransformModel:
    """Structured CP factors of an almost symmetric tensor.

    The tensor is approximated by sum_r weights[r] * v_r o ... o v_r o
    w_r where w_r are the columns of W = (V^-1)^T.  `Vf` exposes the
    last-factor matrix with the weights multiplied in, W @ diag(weights).
    After `build_transformation` the fields P and U hold the change of
    coordinates with P^T V = U orthogonal.
    """

    order: int
    dim: int
    V: np.ndarray
    weights: np.ndarray
    fit_error: float
    P: np.ndarray | None = None
    U: np.ndarray | None = None

    def __post_init__(self):
        V = np.asarray(self.V, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if V.shape != (self.dim, self.dim) or w.shape != (self.dim,):
            raise ValueError("factor shapes do not match dim")
        V = V.copy()
        w = w.copy()
        V.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "weights", w)
        for name in ("P", "U"):
            m = getattr(self, name)
            if m is not None:
                m = np.asarray(m, dtype=float).copy()
                m.setflags(write=False)
                object.__setattr__(self, name, m)

    @property
    def W(self) -> np.ndarray:
        """Inverse transpose of the repeated factor."""
        return np.linalg.inv(self.V).T

    @property
    def Vf(self) -> np.ndarray:
        """Last CP factor with the weights multiplied in."""
        return self.W @ np.diag(self.weights)

    def reconstruct(self) -> np.ndarray:
        return _model_tensor(self.V, self.W, self.weights, self.order)


def _normalize_columns(V):
    return V / np.linalg.norm(V, axis=0)


def _model_tensor(V, W, w, k):
    n = V.shape[0]
    arr = np.zeros((n,) * k)
    for r in range(n):
        arr += w[r] * np.multiply.outer(outer_power(V[:, r], k - 1), W[:, r])
    return arr


def _solve_weights(arr, V, W, k):
    gram = (V.T @ V) ** (k - 1) * (W.T @ W)
    n = V.shape[0]
    rhs = np.empty(n)
    for r in range(n):
        c = arr
        for _ in range(k - 1):
            c = np.tensordot(V[:, r], c, axes=(0, 0))
        rhs[r] = c @ W[:, r]
    try:
        return np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(gram, rhs, rcond=None)[0]


def _jacobian(V, W, w, k):
    """d vec(model) / d vec(V), the coupling term included.

    Column (a, b) (C-order index a*n + b into V) carries the direct
    dependence through the k-1 symmetric slots of column b plus the
    inverse-transpose coupling -W e_b (W^T e_a)^T folded through every
    rank-one term.
    """
    n = V.shape[0]
    eye = np.eye(n)
    J = np.empty((n**k, n * n))
    # coupling accumulator: M[a] = sum_r w_r W[a, r] v_r^{o(k-1)}
    M = np.zeros((n,) + (n,) * (k - 1))
    for r in range(n):
        op = outer_power(V[:, r], k - 1)
        for a in range(n):
            M[a] += w[r] * W[a, r] * op
    for b in range(n):
        vb = V[:, b]
        wcol = W[:, b]
        for a in range(n):
            S = np.zeros((n,) * (k - 1))
            for slot in range(k - 1):
                term = eye[a] if slot == 0 else vb
                for q in range(1, k - 1):
                    term = np.multiply.outer(term, eye[a] if q == slot else vb)
                S += term
            col = w[b] * np.multiply.outer(S, wcol) - np.multiply.outer(M[a], wcol)
            J[:, a * n + b] = col.ravel()
    return J


def _fit_once(arr, k, rng, max_iter, target):
    n = arr.shape[0]
    for _ in range(50):
        V = rng.standard_normal((n, n))
        if np.linalg.cond(V) < 1e3:
            break
    else:
        raise _RestartFailed("no well-conditioned initialization found")
    V = _normalize_columns(V)

    def evaluate(Vc):
        W = np.linalg.inv(Vc).T
        w = _solve_weights(arr, Vc, W, k)
        resid = arr - _model_tensor(Vc, W, w, k)
        return W, w, resid, float(np.linalg.norm(resid))

    try:
        W, w, resid, err = evaluate(V)
    except np.linalg.LinAlgError:
        raise _RestartFailed("singular initialization")

    mu = 1e-3
    stall = 0
    for _ in range(max_iter):
        if err <= 0.3 * target:
            break
        J = _jacobian(V, W, w, k)
        g = J.T @ resid.ravel()
        H = J.T @ J
        damp = np.diag(H).copy()
        damp[damp < 1e-300] = 1e-300
        improved = False
        for _ in range(12):
            try:
                delta = np.linalg.solve(H + mu * np.diag(damp), g)
                Vt = _normalize_columns(V + delta.reshape(n, n))
                Wt, wt, residt, errt = evaluate(Vt)
            except np.linalg.LinAlgError:
                mu *= 10.0
                continue
            if errt < err:
                V, W, w, resid, err = Vt, Wt, wt, residt, errt
                mu = max(mu * 0.3, 1e-14)
                improved = True
                break
            mu *= 10.0
            if mu > 1e14:
                break
        if improved:
            stall = 0
        else:
            stall += 1
            if stall >= 3:
                break
    return err, V, w


def _canonical_model(V, w, k):
    """Unit columns, positive leading components, weights sorted descending."""
    V = V.copy()
    w = w.copy()
    n = V.shape[0]
    norms = np.linalg.norm(V, axis=0)
    V /= norms
    w *= norms ** (k - 2)
    for r in range(n):
        nz = np.flatnonzero(np.abs(V[:, r]) > 1e-8)
        lead = int(nz[0]) if nz.size else 0
        if V[lead, r] < 0:
            V[:, r] = -V[:, r]
            if k % 2 == 1:
                w[r] = -w[r]
    idx = sorted(range(n), key=lambda r: (-w[r], tuple(V[:, r])))
    return V[:, idx], w[idx]


def fit_structured_cpd(tensor: AlmostSymTensor,
                       restarts: int = DEFAULT_RESTARTS,
                       max_iter: int = DEFAULT_MAX_ITER,
                       seed: int = 0) -> TransformModel:
    """Best inverse-transpose constrained CP fit over seeded restarts.

    Returns the model with the smallest Frobenius misfit; ties keep the
    earliest restart, so the result is reproducible for a fixed seed.
    Raises FitError only when every restart collapses numerically.
    """
    arr = tensor.entries
    k, n = tensor.order, tensor.dim
    if k < 3:
        raise ValueError("structured fit requires order >= 3")
    norm_arr = max(1.0, float(np.linalg.norm(arr)))
    target = 1e-14 * norm_arr
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        try:
            err, V, w = _fit_once(arr, k, rng, max_iter, target)
        except _RestartFailed:
            continue
        if best is None or err < best[0]:
            best = (err, V, w)
        if best[0] <= target:
            break
    if best is None:
        raise FitError("structured fit failed on every restart")
    _, V, w = best
    V, w = _canonical_model(V, w, k)
    W = np.linalg.inv(V).T
    fit_error = float(np.linalg.norm(arr - _model_tensor(V, W, w, k)))
    return TransformModel(order=k, dim=n, V=V, weights=w, fit_error=fit_error)


def fit_threshold(tensor_norm: float, epsilon: float, absolute: bool) -> float:
    """Acceptance threshold; relative thresholds are floored at epsilon
    itself so the zero tensor certifies trivially."""
    if absolute:
        return epsilon
    return epsilon * max(1.0, tensor_norm)


def is_transformable(tensor: AlmostSymTensor, epsilon: float = DEFAULT_EPSILON,
                     absolute: bool = False, restarts: int = DEFAULT_RESTARTS,
                     max_iter: int = DEFAULT_MAX_ITER, seed: int = 0):
    """(flag, model): whether a structured fit below threshold was found.

    A False flag is a budget statement, not a certificate: the fit is a
    local optimizer, so failure means no fit was found at this restart
    budget.
    """
    try:
        model = fit_structured_cpd(tensor, restarts=restarts,
                                   max_iter=max_iter, seed=seed)
    except FitError:
        return False, None
    thresh = fit_threshold(float(np.linalg.norm(tensor.entries)), epsilon, absolute)
    return bool(model.fit_error < thresh), model


def build_transformation(model: TransformModel, U=None) -> TransformModel:
    """Attach the change of coordinates P = (U V^-1)^T for a chosen
    orthogonal target basis U (identity by default)."""
    n = model.dim
    if U is None:
        U = np.eye(n)
    U = np.asarray(U, dtype=float)
    if U.shape != (n, n) or np.max(np.abs(U.T @ U - np.eye(n))) > 1e-10:
        raise ValueError("U must be an orthogonal n x n matrix")
    P = (U @ np.linalg.inv(model.V)).T
    return replace(model, P=P, U=U)


def transformed_tensor(model: TransformModel) -> SymTensor:
    """The odeco tensor sum_r weights[r] (P^T v_r)^{ok} of the transformed
    coordinates."""
    if model.P is None:
        raise ValueError("call build_transformation first")
    cols = model.P.T @ model.V
    k = model.order
    arr = np.zeros((model.dim,) * k)
    for r in range(model.dim):
        arr += model.weights[r] * outer_power(cols[:, r], k)
    return SymTensor._wrap(arr)


def transformed_decomposition(model: TransformModel) -> OdecoDecomposition:
    """Orthogonal decomposition of the transformed tensor, assembled
    directly from the model factors (no power iteration needed)."""
    if model.P is None:
        raise ValueError("call build_transformation first")
    cols = model.P.T @ model.V
    k, n = model.order, model.dim
    norms = np.linalg.norm(cols, axis=0)
    lams = model.weights * norms**k
    U = cols / norms
    lams, U = canonical_pairs(lams, U, k)
    arr = transformed_tensor(model).entries
    recon = sum(lams[r] * outer_power(U[:, r], k) for r in range(n))
    residual = float(np.linalg.norm(arr - recon))
    return OdecoDecomposition(order=k, dim=n, eigenvalues=lams,
                              eigenvectors=U, residual=residual)


def solve_general(tensor: AlmostSymTensor, b, x0, times, *,
                  epsilon: float = DEFAULT_EPSILON, absolute: bool = False,
                  restarts: int = DEFAULT_RESTARTS,
                  max_iter: int = DEFAULT_MAX_ITER, seed: int = 0,
                  U=None, model: TransformModel | None = None,
                  allow_approximation: bool = False,
                  solve_tol: float = 1e-10) -> Trajectory:
    """Closed-form trajectory of a general system via odeco coordinates.

    Transforms to y with x = P y, solves the decoupled system exactly,
    and maps back.  Times past a finite blow-up are dropped and the
    trajectory carries a blowup marker.  Refuses untransformable input
    (use the numerical integrator instead) unless `allow_approximation`
    accepts the best approximate model regardless of its fit error.
    """
    times = np.asarray(times, dtype=float)
    if times.size == 0 or times[0] < 0 or np.any(np.diff(times) <= 0):
        raise ValueError("times must be nonnegative and strictly increasing")
    x0 = np.asarray(x0, dtype=float)

    if model is None:
        flag, model = is_transformable(tensor, epsilon, absolute=absolute,
                                       restarts=restarts, max_iter=max_iter,
                                       seed=seed)
    else:
        thresh = fit_threshold(float(np.linalg.norm(tensor.entries)),
                               epsilon, absolute)
        flag = model.fit_error < thresh
    if model is None or (not flag and not allow_approximation):
        err = None if model is None else model.fit_error
        raise NotTransformableError(
            "no structured fit below threshold at this budget; fall back to "
            "the numerical integrator for this system",
            fit_error=err,
        )
    if model.P is None or U is not None:
        model = build_transformation(model, U=U)

    d = transformed_decomposition(model)
    P = model.P
    y0 = np.linalg.solve(P, x0)
    k = model.order

    if b is None:
        if k == 2:
            ystates = np.array([_dynamics.eval_solution_k2(d, y0, float(t))
                                for t in times])
            kept = times
            term = Termination(COMPLETED)
        else:
            sol = _dynamics.explicit_solution(d, y0,
                                              tol=max(1e-8, 10 * d.residual))
            keep = times < sol.domain_end
            kept = times[keep]
            ystates = _dynamics.solution_states(sol, kept)
            term = (Termination(COMPLETED) if keep.all()
                    else Termination(BLOWUP, time=sol.domain_end))
    else:
        b = np.asarray(b, dtype=float)
        b_y = np.linalg.solve(P, b)
        domain_end = _control.controlled_domain_end(d, b_y, y0)
        keep = times < domain_end
        kept = times[keep]
        try:
            ystates = _control.controlled_states(d, b_y, y0, kept,
                                                 tol=solve_tol)
        except BlowupError as exc:
            raise BlowupError(
                f"modal blow-up inside the requested horizon: {exc}",
                escape_time=exc.escape_time,
            )
        term = (Termination(COMPLETED) if keep.all()
                else Termination(BLOWUP, time=domain_end))

    xstates = ystates @ P.T
    return Trajectory(times=kept, states=xstates, terminated=term)
