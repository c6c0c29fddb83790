import numpy as np
import pytest

from conftest import random_odeco, random_orthonormal, relative_state_error
from odeco_hpds import oracle
from odeco_hpds.control import (
    ControlledModalProblem,
    controlled_equilibrium,
    controlled_solution,
    controlled_states,
    gauss_g,
    implicit_time,
    implicit_time_hypergeometric,
    modal_escape_time,
    solve_modal,
)
from odeco_hpds.dynamics import HPDSystem, eval_solution, explicit_solution
from odeco_hpds.errors import (
    BlowupError,
    BranchPointError,
    NoEquilibriumError,
    PathCrossingError,
)
from odeco_hpds.spectral import OdecoDecomposition, odeco_decompose
from odeco_hpds.tensor_core import SymTensor, apply, outer_power


def euler_accelerated_g(a, z, rows=48):
    """Alternating-series oracle: partial sums refined by iterated means."""
    terms = [a * z**m / (a + m) for m in range(rows)]
    s = np.cumsum(terms)
    while len(s) > 1:
        s = 0.5 * (s[:-1] + s[1:])
    return float(s[0])


def simpson_time(lam, b, k, a, c, panels=20001):
    """Fixed-grid Simpson oracle for the modal time integral."""
    s = np.linspace(a, c, panels)
    f = 1.0 / (lam * s ** (k - 1) + b)
    h = (c - a) / (panels - 1)
    return h / 3.0 * (f[0] + f[-1] + 4.0 * f[1:-1:2].sum() + 2.0 * f[2:-2:2].sum())


def mode2_problem(alpha=1.0):
    """The middle mode of the three-species model in odeco coordinates."""
    return ControlledModalProblem(order=4, lam=-1.0, b_tilde=2.0, alpha=alpha)


# ---------------------------------------------------------------------------
# the hypergeometric helper

def test_g_at_zero_is_one():
    for a in (0.1, 0.5, 2.0 / 3.0, 1.0):
        assert gauss_g(a, 0.0) == 1.0


def test_g_at_a_one_has_log_closed_form():
    z = 0.3
    expected = -np.log1p(-z) / z
    assert abs(gauss_g(1.0, z) - expected) < 1e-14
    assert abs(expected - 1.18892) < 5e-6


def test_g_alternating_argument_matches_acceleration_oracle():
    got = gauss_g(2.0 / 3.0, -1.0)
    assert abs(got - euler_accelerated_g(2.0 / 3.0, -1.0)) < 1e-10


def test_g_series_and_quadrature_agree_on_overlap():
    for a in (0.25, 0.5, 2.0 / 3.0, 0.75, 1.0):
        for z in np.linspace(-0.9, 0.9, 37):
            s = gauss_g(a, float(z), method="series")
            q = gauss_g(a, float(z), method="quadrature")
            assert abs(s - q) < 1e-10, (a, z, s, q)


def test_g_rejects_branch_point_and_beyond():
    with pytest.raises(BranchPointError):
        gauss_g(0.5, 1.0)
    with pytest.raises(BranchPointError):
        gauss_g(0.5, 1.7)
    with pytest.raises(ValueError):
        gauss_g(1.5, 0.2)


# ---------------------------------------------------------------------------
# implicit time map

def test_implicit_time_zero_displacement():
    assert implicit_time(mode2_problem(), 1.0) == 0.0


def test_implicit_time_matches_simpson_oracle():
    p = mode2_problem()
    got = implicit_time(p, 1.2)
    assert abs(got - simpson_time(-1.0, 2.0, 4, 1.0, 1.2)) < 1e-9


def test_implicit_time_matches_hypergeometric_form_below_branch_point():
    # starting above the attracting root keeps both arguments below one
    p = mode2_problem(alpha=1.5)
    for c in (1.45, 1.38, 1.30):
        tq = implicit_time(p, c)
        th = implicit_time_hypergeometric(p, c)
        assert abs(tq - th) < 1e-9, (c, tq, th)


def test_implicit_time_reduces_to_uncontrolled_closed_form():
    k, lam, alpha, c = 4, -1.0, 1.0, 0.5
    p = ControlledModalProblem(order=k, lam=lam, b_tilde=0.0, alpha=alpha)
    expected = (c ** (-(k - 2)) - alpha ** (-(k - 2))) / (-(k - 2) * lam)
    assert abs(implicit_time(p, c) - expected) < 1e-12


def test_implicit_time_refuses_path_through_equilibrium():
    p = mode2_problem()  # attracting root at cbrt(2) ~ 1.2599
    with pytest.raises(PathCrossingError):
        implicit_time(p, 1.5)


def test_implicit_time_degenerate_linear_mode():
    p = ControlledModalProblem(order=4, lam=0.0, b_tilde=2.0, alpha=1.0)
    assert abs(implicit_time(p, 2.0) - 0.5) < 1e-15
    p0 = ControlledModalProblem(order=4, lam=0.0, b_tilde=0.0, alpha=1.0)
    with pytest.raises(PathCrossingError):
        implicit_time(p0, 2.0)


def test_derivative_of_time_map_is_inverse_velocity():
    rng = np.random.default_rng(0)
    h = 1e-6
    for _ in range(20):
        k = int(rng.choice([3, 4, 5]))
        lam = float(rng.uniform(0.3, 2.0) * rng.choice([-1.0, 1.0]))
        b = float(rng.uniform(0.0, 2.0) * rng.choice([-1.0, 1.0]))
        alpha = float(rng.uniform(0.3, 1.5) * rng.choice([-1.0, 1.0]))
        p = ControlledModalProblem(order=k, lam=lam, b_tilde=b, alpha=alpha)
        if p.direction == 0:
            continue
        if p.equilibrium is not None:
            c = alpha + 0.5 * (p.equilibrium - alpha)
        else:
            c = alpha + p.direction * 0.4
        if abs(c - alpha) < 10 * h:
            continue
        fd = (implicit_time(p, c + h) - implicit_time(p, c - h)) / (2 * h)
        exact = 1.0 / p.velocity(c)
        assert abs(fd - exact) <= 1e-5 * max(1.0, abs(exact))


# ---------------------------------------------------------------------------
# modal inversion

def test_solve_modal_at_zero_returns_alpha():
    assert solve_modal(mode2_problem(), 0.0) == 1.0


def test_solve_modal_approaches_asymptote():
    c = solve_modal(mode2_problem(), 50.0)
    assert abs(c - np.cbrt(2.0)) < 1e-9


def test_solve_modal_blowup_detected():
    p = ControlledModalProblem(order=3, lam=1.0, b_tilde=0.0, alpha=1.0)
    assert abs(modal_escape_time(p) - 1.0) < 1e-10
    with pytest.raises(BlowupError) as err:
        solve_modal(p, 2.0)
    assert abs(err.value.escape_time - 1.0) < 1e-10


def test_solve_modal_divergent_side_before_escape():
    p = ControlledModalProblem(order=3, lam=1.0, b_tilde=0.0, alpha=1.0)
    # uncontrolled closed form: c(t) = alpha / (1 - lam*alpha*t)
    c = solve_modal(p, 0.6)
    assert abs(c - 1.0 / 0.4) < 1e-8


def test_modal_round_trip_two_hundred_random():
    rng = np.random.default_rng(1)
    done = 0
    while done < 200:
        k = int(rng.choice([3, 4, 5]))
        lam = float(rng.uniform(0.3, 2.5) * rng.choice([-1.0, 1.0]))
        b = float(rng.uniform(0.0, 2.5) * rng.choice([-1.0, 1.0]))
        alpha = float(rng.uniform(0.2, 1.8) * rng.choice([-1.0, 1.0]))
        p = ControlledModalProblem(order=k, lam=lam, b_tilde=b, alpha=alpha)
        if p.direction == 0:
            continue
        frac = float(rng.uniform(0.05, 0.9))
        if p.equilibrium is not None:
            c_target = alpha + frac * (p.equilibrium - alpha)
            t = implicit_time(p, c_target)
        else:
            t = frac * modal_escape_time(p)
        if not np.isfinite(t) or t <= 0:
            continue
        c = solve_modal(p, t)
        assert abs(implicit_time(p, c) - t) <= 1e-8, (k, lam, b, alpha, t)
        done += 1


# ---------------------------------------------------------------------------
# full controlled solutions

def test_controlled_solution_reduces_to_uncontrolled():
    rng = np.random.default_rng(2)
    T, lams, V = random_odeco(rng, 3, 4, signs=[-1.0, -1.0, -1.0])
    d = odeco_decompose(T, seed=0)
    x0 = rng.standard_normal(3)
    sol = explicit_solution(d, x0)
    for t in (0.3, 2.0):
        with_control = controlled_solution(d, np.zeros(3), x0, t)
        assert np.linalg.norm(with_control - eval_solution(sol, t)) < 1e-9


def test_controlled_modal_asymptotes_three_species():
    d = OdecoDecomposition(order=4, dim=3,
                           eigenvalues=np.array([-1.0, -1.0, -1.0]),
                           eigenvectors=np.eye(3), residual=0.0)
    b = np.array([4.0, 2.0, 6.0])
    out = controlled_solution(d, b, np.ones(3), 5.0)
    assert np.allclose(out, np.cbrt([4.0, 2.0, 6.0]), atol=1e-3)


def test_controlled_solution_matches_integrator():
    rng = np.random.default_rng(3)
    V = random_orthonormal(rng, 3)
    lams = np.array([-0.8, -1.4, -2.1])
    arr = sum(lams[r] * outer_power(V[:, r], 4) for r in range(3))
    T = SymTensor(arr)
    d = odeco_decompose(T, seed=0)
    b_modal = np.array([1.2, -0.7, 0.4])
    b = V @ b_modal
    x0 = V @ np.array([0.9, -0.5, 1.1])
    system = HPDSystem(tensor=T, control=b)
    times = [0.1, 1.0, 5.0]
    rk4, _ = oracle.states_at(system, x0, times, rtol=1e-10, atol=1e-13)
    closed = controlled_states(d, b, x0, times)
    assert relative_state_error(closed, rk4).max() <= 1e-6


def test_controlled_ode_residual_by_central_differences():
    rng = np.random.default_rng(4)
    V = random_orthonormal(rng, 2)
    lams = np.array([-0.9, -1.7])
    arr = sum(lams[r] * outer_power(V[:, r], 4) for r in range(2))
    T = SymTensor(arr)
    d = odeco_decompose(T, seed=0)
    b = V @ np.array([0.8, -0.6])
    x0 = V @ np.array([1.1, 0.7])
    h = 1e-5
    for t in (0.2, 1.0):
        xm = controlled_solution(d, b, x0, t - h, tol=1e-12)
        xp = controlled_solution(d, b, x0, t + h, tol=1e-12)
        x = controlled_solution(d, b, x0, t, tol=1e-12)
        fd = (xp - xm) / (2 * h)
        rhs = apply(T, x) + b
        assert np.linalg.norm(fd - rhs) <= 1e-6 * max(1.0, np.linalg.norm(rhs))


def test_controlled_states_blowup_propagates_mode():
    d = OdecoDecomposition(order=3, dim=2, eigenvalues=np.array([1.0, -1.0]),
                           eigenvectors=np.eye(2), residual=0.0)
    b = np.zeros(2)
    x0 = np.array([1.0, 0.5])
    with pytest.raises(BlowupError) as err:
        controlled_states(d, b, x0, [0.5, 2.0])
    assert err.value.escape_time is not None


# ---------------------------------------------------------------------------
# controlled equilibria

def test_controlled_equilibrium_three_species_modal():
    d = OdecoDecomposition(order=4, dim=3,
                           eigenvalues=np.array([-1.0, -1.0, -1.0]),
                           eigenvectors=np.eye(3), residual=0.0)
    e = controlled_equilibrium(d, np.array([4.0, 2.0, 6.0]))
    assert np.allclose(e, np.cbrt([4.0, 2.0, 6.0]), atol=1e-14)


def test_controlled_equilibrium_zero_control_is_origin():
    rng = np.random.default_rng(5)
    T, _, _ = random_odeco(rng, 3, 4, signs=[-1.0, -1.0, -1.0])
    d = odeco_decompose(T, seed=0)
    assert np.allclose(controlled_equilibrium(d, np.zeros(3)), np.zeros(3),
                       atol=1e-15)


def test_controlled_equilibrium_even_root_power_sign_choice():
    # order 3: the modal equation lam*e^2 = -b has two real roots +-2;
    # the positive one is returned
    d = OdecoDecomposition(order=3, dim=1, eigenvalues=np.array([1.0]),
                           eigenvectors=np.eye(1), residual=0.0)
    e = controlled_equilibrium(d, np.array([-4.0]))
    assert abs(e[0] - 2.0) < 1e-14
    for root in (2.0, -2.0):
        assert abs(1.0 * root**2 + (-4.0)) < 1e-14


def test_controlled_equilibrium_no_real_root_raises():
    d = OdecoDecomposition(order=3, dim=1, eigenvalues=np.array([1.0]),
                           eigenvectors=np.eye(1), residual=0.0)
    with pytest.raises(NoEquilibriumError) as err:
        controlled_equilibrium(d, np.array([4.0]))
    assert err.value.mode == 0


def test_controlled_equilibrium_null_mode_needs_null_control():
    d = OdecoDecomposition(order=4, dim=2, eigenvalues=np.array([-1.0, 0.0]),
                           eigenvectors=np.eye(2), residual=0.0)
    with pytest.raises(NoEquilibriumError):
        controlled_equilibrium(d, np.array([1.0, 1.0]))
    e = controlled_equilibrium(d, np.array([1.0, 0.0]))
    assert np.allclose(e, [1.0, 0.0], atol=1e-14)


def test_modal_problem_invariants():
    p = mode2_problem()
    assert p.direction == 1
    assert abs(p.lam * p.equilibrium**3 + p.b_tilde) <= 1e-10
    stationary = ControlledModalProblem(order=4, lam=-1.0, b_tilde=1.0,
                                        alpha=1.0)
    assert stationary.direction == 0
    assert stationary.equilibrium == 1.0
    runaway = ControlledModalProblem(order=4, lam=1.0, b_tilde=0.0, alpha=0.5)
    assert runaway.divergent
