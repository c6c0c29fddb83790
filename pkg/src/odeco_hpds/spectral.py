"""Z-eigenpair computation and orthogonal (odeco) tensor decomposition.

Eigenpairs are found by a shifted symmetric higher-order power iteration
``v <- normalize(T v^{k-1} + gamma v)``.  The shift adapts upward whenever
an update fails to increase the polynomial form ``T v^k``, which keeps the
accepted iterates monotone in that functional; smallest eigenvalues are
reached by running the same scheme on the negated tensor.  A full
decomposition deflates one rank-one term at a time, each stage keeping
the largest-magnitude converged eigenvalue over a batch of seeded random
restarts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DecompositionError
from .tensor_core import SymTensor, outer_power, unfold_psi

# A deflation stage is accepted once the eigenpair residual drops below
# this factor times max(1, ||T||); scale invariance keeps the criterion
# meaningful for tensors of any magnitude.
STAGE_RTOL = 1e-10
# Remainders below this factor times max(1, ||T||) are treated as zero
# and the basis is completed with zero-weight directions.
NEGLIGIBLE_RTOL = 1e-13

DEFAULT_RESTARTS = 30
DEFAULT_MAX_ITER = 500


@dataclass(frozen=True)
class ZEigenPair:
    """A real eigenpair T v^{k-1} = lambda v with unit v."""

    value: float
    vector: np.ndarray
    converged: bool
    iterations: int

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "vector", v)
        if abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise ValueError("eigenvector must have unit length")


@dataclass(frozen=True)
class OdecoDecomposition:
    """Orthogonal decomposition T = sum_r lambda_r v_r^{ok}.

    Eigenvalues are sorted descending (ties broken by ascending
    lexicographic comparison of the eigenvectors) and each eigenvector is
    sign-normalized so its first nonzero component is positive.  The
    residual is the Frobenius distance between the input tensor and the
    reconstruction; only decompositions whose residual passes the
    caller's tolerance certify the input as odeco.
    """

    order: int
    dim: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns are the v_r
    residual: float
    stage_iterations: tuple = field(default=(), compare=False)

    def __post_init__(self):
        lams = np.asarray(self.eigenvalues, dtype=float)
        V = np.asarray(self.eigenvectors, dtype=float)
        if lams.shape != (self.dim,) or V.shape != (self.dim, self.dim):
            raise ValueError("eigenvalue/eigenvector shapes do not match dim")
        scale = max(1.0, float(np.max(np.abs(lams))) if lams.size else 0.0)
        if np.any(np.diff(lams) > 1e-9 * scale):
            raise ValueError("eigenvalues must be sorted descending")
        if np.max(np.abs(V.T @ V - np.eye(self.dim))) > 1e-8:
            raise ValueError("eigenvectors must be orthonormal")
        lams.setflags(write=False)
        V.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lams)
        object.__setattr__(self, "eigenvectors", V)

    def certified(self, tol: float) -> bool:
        return self.residual <= tol

    def reconstruct(self) -> SymTensor:
        return reconstruct(self)


def _apply_cols(arr: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Columnwise T x^{k-1} for a batch of vectors (columns of X)."""
    n = arr.shape[0]
    cols = X.shape[1]
    out = np.tensordot(arr, X, axes=([0], [0]))
    while out.ndim > 2:
        shape = (n,) + (1,) * (out.ndim - 2) + (cols,)
        out = (out * X.reshape(shape)).sum(axis=0)
    return out


def _power_batch(arr, X0, tol, max_iter, shift=0.0):
    """Run the adaptive shifted power iteration on every column of X0.

    Returns (values, vectors, converged, iterations); values are the form
    values T v^k of the final iterates, which equal the eigenvalues for
    converged columns.
    """
    X = X0 / np.linalg.norm(X0, axis=0)
    cols = X.shape[1]
    norm_arr = float(np.linalg.norm(arr))
    mono_slack = 1e-14 * max(1.0, norm_arr)
    # Shift this large provably convexifies the update; adaptation rarely
    # needs to climb anywhere near it.
    gamma_cap = (arr.ndim - 1) * norm_arr + 1.0
    gamma = np.full(cols, float(shift))

    Y = _apply_cols(arr, X)
    f = np.sum(Y * X, axis=0)
    res = np.linalg.norm(Y - f * X, axis=0)
    conv = res <= tol
    iters = np.zeros(cols, dtype=int)

    for _ in range(max_iter):
        if conv.all():
            break
        U = Y + gamma * X
        nu = np.linalg.norm(U, axis=0)
        alive = nu > 1e-300
        stuck = ~conv & ~alive
        if stuck.any():
            gamma[stuck] = np.minimum(2 * gamma[stuck] + 0.25 * gamma_cap, gamma_cap)
        safe_nu = np.where(alive, nu, 1.0)
        Xn = np.where(alive, U / safe_nu, X)
        Yn = _apply_cols(arr, Xn)
        fn = np.sum(Yn * Xn, axis=0)
        worse = ~conv & alive & (fn < f - mono_slack)
        if worse.any():
            gamma[worse] = np.minimum(2 * gamma[worse] + 0.25 * gamma_cap, gamma_cap)
        upd = ~conv & alive & ~worse
        X[:, upd] = Xn[:, upd]
        Y[:, upd] = Yn[:, upd]
        f[upd] = fn[upd]
        iters[~conv] += 1
        res = np.linalg.norm(Y - f * X, axis=0)
        conv = conv | (res <= tol)
    return f, X, conv, iters


def z_eigenpair(tensor: SymTensor, shift: float = 0.0, init=None,
                tol: float = 1e-10, max_iter: int = DEFAULT_MAX_ITER,
                seed: int = 0) -> ZEigenPair:
    """Single Z-eigenpair by adaptive shifted power iteration.

    The iteration climbs the form value, so it targets large eigenvalues;
    run it on the negated tensor to reach the smallest ones.  `shift` is
    the starting value of the adaptive shift.  Non-convergence within
    `max_iter` is reported through the `converged` flag rather than an
    exception.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = tensor.dim
    if init is None:
        init = np.random.default_rng(seed).standard_normal(n)
    init = np.asarray(init, dtype=float)
    if init.shape != (n,):
        raise ValueError(f"init must have length {n}")
    if np.linalg.norm(init) == 0.0:
        raise ValueError("init must be nonzero")
    f, X, conv, iters = _power_batch(
        tensor.entries, init.reshape(n, 1).copy(), tol, max_iter, shift=shift
    )
    return ZEigenPair(value=float(f[0]), vector=X[:, 0],
                      converged=bool(conv[0]), iterations=int(iters[0]))


def _best_stage_pair(arr, rng, restarts, tol, max_iter):
    """Largest-|lambda| converged eigenpair of arr over random restarts.

    Both the maximizing iteration on arr and (via negation) the
    minimizing one are attempted; the winner is selected deterministically
    by (|lambda| descending, side, restart index).  Returns
    (lam, v, best_residual) with lam/v None when nothing converged.
    """
    n = arr.shape[0]
    X0 = rng.standard_normal((n, restarts))
    candidates = []
    best_res = np.inf
    # iterate well past the acceptance threshold (when possible) so the
    # eigenvectors carry little residual into deflation and reconstruction
    polish_tol = 1e-3 * tol
    for side, a in enumerate((arr, -arr)):
        f, X, _, _ = _power_batch(a, X0.copy(), polish_tol, max_iter)
        lam = f if side == 0 else -f
        Y = _apply_cols(arr, X)
        res = np.linalg.norm(Y - lam * X, axis=0)
        best_res = min(best_res, float(res.min()))
        for j in np.flatnonzero(res <= tol):
            candidates.append((-abs(lam[j]), side, j, float(lam[j]), X[:, j]))
    if not candidates:
        return None, None, best_res
    candidates.sort(key=lambda c: c[:3])
    _, _, _, lam, v = candidates[0]
    return lam, v.copy(), best_res


def _complete_orthonormal(vectors, n):
    """Orthonormalize found directions in order and complete the basis."""
    cols = []
    for v in vectors:
        w = v.copy()
        for b in cols:
            w -= (b @ w) * b
        nw = np.linalg.norm(w)
        if nw > 1e-6:
            cols.append(w / nw)
    missing = n - len(cols)
    if missing > 0:
        if cols:
            _, _, vt = np.linalg.svd(np.column_stack(cols).T)
            comp = vt[len(cols):].T
        else:
            comp = np.eye(n)
        for j in range(missing):
            cols.append(comp[:, j])
    return np.column_stack(cols)


def canonical_pairs(lams, V, order):
    """Sign-normalize eigenvectors and sort pairs deterministically.

    Each column is flipped so its first nonzero component is positive;
    for odd tensor order the flip also negates the paired eigenvalue,
    keeping the rank-one sum unchanged.  Pairs are then sorted by
    descending eigenvalue with ascending lexicographic vector order
    breaking ties.
    """
    lams = np.array(lams, dtype=float)
    V = np.array(V, dtype=float)
    n = V.shape[1]
    for r in range(n):
        v = V[:, r]
        nz = np.flatnonzero(np.abs(v) > 1e-8)
        lead = int(nz[0]) if nz.size else 0
        if v[lead] < 0:
            V[:, r] = -v
            if order % 2 == 1:
                lams[r] = -lams[r]
    idx = sorted(range(n), key=lambda r: (-lams[r], tuple(V[:, r])))
    return lams[idx], V[:, idx]


def odeco_decompose(tensor: SymTensor, tol: float = 1e-8, *,
                    restarts: int = DEFAULT_RESTARTS,
                    max_iter: int = DEFAULT_MAX_ITER,
                    seed: int = 0) -> OdecoDecomposition:
    """Orthogonal decomposition by repeated eigenpair extraction.

    Each deflation stage finds the largest-magnitude eigenpair of the
    running remainder with up to `restarts` random initializations, then
    subtracts the rank-one term.  The collected directions are
    orthonormalized, the eigenvalues are re-projected as form values of
    the original tensor against the final basis (for odeco input this is
    exactly the eigenvalue of each stage), and the Frobenius residual of
    the reconstruction is reported.  `tol` is the certification threshold
    consumed by callers such as :func:`is_odeco`; the decomposition
    itself is returned whatever the residual.

    Raises DecompositionError when a stage stagnates on every restart.
    """
    n, k = tensor.dim, tensor.order
    entries = tensor.entries
    norm0 = float(np.linalg.norm(entries))
    stage_tol = STAGE_RTOL * max(1.0, norm0)
    negligible = NEGLIGIBLE_RTOL * max(1.0, norm0)
    rng = np.random.default_rng(seed)

    arr = entries.copy()
    found = []
    stage_iters = []
    for stage in range(n):
        if float(np.linalg.norm(arr)) <= negligible:
            break
        lam, v, best_res = _best_stage_pair(arr, rng, restarts, stage_tol, max_iter)
        if lam is None:
            raise DecompositionError(
                f"power iteration stagnated at stage {stage} "
                f"(best eigenpair residual {best_res:.3e})",
                best_residual=best_res,
            )
        found.append(v)
        stage_iters.append(stage)
        arr -= lam * outer_power(v, k)

    V = _complete_orthonormal(found, n)
    lams = np.array([_apply_cols(entries, V[:, r:r + 1])[:, 0] @ V[:, r]
                     for r in range(n)])
    lams, V = canonical_pairs(lams, V, k)
    recon = sum(lams[r] * outer_power(V[:, r], k) for r in range(n))
    residual = float(np.linalg.norm(entries - recon))
    return OdecoDecomposition(order=k, dim=n, eigenvalues=lams,
                              eigenvectors=V, residual=residual,
                              stage_iterations=tuple(stage_iters))


def is_odeco(tensor: SymTensor, tol: float = 1e-8, seed: int = 0):
    """(flag, residual): whether the best decomposition found certifies
    the tensor as odeco at the given residual tolerance."""
    try:
        d = odeco_decompose(tensor, tol, seed=seed)
    except DecompositionError as exc:
        best = exc.best_residual if exc.best_residual is not None else np.inf
        return False, float(best)
    return bool(d.residual <= tol), d.residual


def z_spectral_radius(decomposition: OdecoDecomposition) -> float:
    """Largest absolute Z-eigenvalue, max(|lambda_1|, |lambda_n|)."""
    lams = decomposition.eigenvalues
    return float(max(abs(lams[0]), abs(lams[-1])))


def mu_max(tensor: SymTensor) -> float:
    """Largest eigenvalue of the square unfolding of an even-order tensor.

    Upper-bounds the largest Z-eigenvalue: the tensor form at any unit x
    is a Rayleigh quotient of the unfolding at the unit vector
    vec(x^{om}).
    """
    matrix = unfold_psi(tensor)
    return float(np.linalg.eigvalsh(matrix)[-1])


def reconstruct(decomposition: OdecoDecomposition) -> SymTensor:
    """Assemble sum_r lambda_r v_r^{ok} back into a tensor."""
    k = decomposition.order
    V = decomposition.eigenvectors
    lams = decomposition.eigenvalues
    arr = sum(lams[r] * outer_power(V[:, r], k) for r in range(decomposition.dim))
    return SymTensor._wrap(arr)
