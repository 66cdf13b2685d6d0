"""
Testing `solvers.py` (Stokes start, AH / grad-div AH / IPP / Picard steps,
fixed-point driver).

Tests include:
- Stokes start: zero data, cavity constraint rows, zero-mean pressure.
- Defining equations of the AH velocity solve and pressure update.
- Scott-Vogelius divergence identity and the gamma=0 reduction.
- Fixed-point invariance of the discrete solution under every step.
- Equivalence of grad-div AH and IPP for matched parameters.
- Reuse of the velocity factorization, the effect of gamma on the divergence
  and Picard against grad-div AH.
- Driver statuses (converged, max iterations, diverged) and trace layout.
- Long runs reproducing published iteration counts (marked slow).
"""
import numpy as np
import pytest
from numpy.testing import assert_allclose

from ahflow.config import Method, NsConfig, StoppingNorm
from ahflow.fem import (BoundaryConditionSet, ElementPair, assemble_convection,
                        build_dofmap, no_slip)
from ahflow.mesh import alfeld_split, build_unit_square_mesh
from ahflow.solvers import (State, Status, ah_step, assemble_system,
                            fixed_point_solve, graddiv_ah_step, ipp_step,
                            picard_step, solve_stokes_initial, stepper_for)


def cavity_system(pair=ElementPair.SCOTT_VOGELIUS, n=4, bcs=None, f=None):
    mesh = build_unit_square_mesh(n)
    if pair is ElementPair.SCOTT_VOGELIUS:
        mesh = alfeld_split(mesh)
    dofmap = build_dofmap(mesh, pair, bcs or BoundaryConditionSet.cavity())
    return assemble_system(dofmap, f)


def h_norm(system, u, p, alpha):
    return np.sqrt(u @ (system.laplacian @ u) + alpha * p @ (system.pressure_mass @ p))


@pytest.fixture(scope="module")
def sv_system():
    return cavity_system()


@pytest.fixture(scope="module")
def sv_solution(sv_system):
    config = NsConfig(nu=0.01, method=Method.PICARD, tol=1e-12, max_iters=100)
    state, trace = fixed_point_solve(solve_stokes_initial(sv_system), picard_step,
                                     config, sv_system)
    assert trace.status is Status.CONVERGED
    return state


def test_stokes_zero_data():
    system = cavity_system(ElementPair.TAYLOR_HOOD,
                           bcs=BoundaryConditionSet.everywhere(no_slip))
    state = solve_stokes_initial(system)
    assert np.array_equal(state.u, np.zeros(system.dofmap.n_velocity))
    assert_allclose(state.p, 0.0, atol=1e-14)


@pytest.mark.parametrize("pair", [ElementPair.TAYLOR_HOOD, ElementPair.SCOTT_VOGELIUS])
def test_stokes_cavity(pair):
    system = cavity_system(pair)
    state = solve_stokes_initial(system)
    assert state.u @ (system.laplacian @ state.u) > 0
    assert np.max(np.abs(system.divergence @ state.u)) <= 1e-10
    assert abs(system.pressure_mean(state.p)) <= 1e-10
    dofs = system.dofmap.dirichlet_dofs
    assert_allclose(state.u[dofs], system.dofmap.dirichlet_values, atol=1e-14)


def test_ah_step_solves_its_equations(sv_system):
    config = NsConfig(nu=0.01, rho=20.0, alpha=100.0, method=Method.AH)
    state = solve_stokes_initial(sv_system)
    new = ah_step(state, config, sv_system)

    a, b = sv_system.laplacian, sv_system.divergence
    residual = ((1.0 / config.rho) * (a @ new.u)
                + assemble_convection(sv_system.dofmap, state.u) @ new.u
                - sv_system.load - (1.0 / config.rho - config.nu) * (a @ state.u)
                - b.T @ state.p)
    free = np.setdiff1d(np.arange(sv_system.dofmap.n_velocity),
                        sv_system.dofmap.dirichlet_dofs)
    scale = np.linalg.norm((1.0 / config.rho) * (a @ new.u))
    assert np.linalg.norm(residual[free]) <= 1e-10 * scale

    pressure_residual = (config.alpha * (sv_system.pressure_mass @ (new.p - state.p))
                         + config.rho * (b @ new.u))
    assert np.linalg.norm(pressure_residual) <= 1e-10 * config.rho * np.linalg.norm(b @ new.u)


def test_graddiv_with_zero_gamma_is_ah(sv_system):
    config = NsConfig(nu=0.01, rho=5.0, alpha=100.0, gamma=0.0, method=Method.AH)
    state = solve_stokes_initial(sv_system)
    first = ah_step(state, config, sv_system)
    second = graddiv_ah_step(state, config, sv_system)
    assert np.array_equal(first.u, second.u)
    assert np.array_equal(first.p, second.p)


def test_sv_divergence_identity(sv_system):
    config = NsConfig(nu=0.01, rho=20.0, alpha=100.0, gamma=1.0)
    state = solve_stokes_initial(sv_system)
    for _ in range(5):
        new = graddiv_ah_step(state, config, sv_system)
        div = np.sqrt(new.u @ (sv_system.graddiv @ new.u))
        dp = new.p - state.p
        jump = (config.alpha / config.rho) * np.sqrt(dp @ (sv_system.pressure_mass @ dp))
        assert_allclose(div, jump, rtol=1e-10)
        state = new


@pytest.mark.parametrize("config", [
    NsConfig(nu=0.01, rho=20.0, alpha=100.0, method=Method.AH),
    NsConfig(nu=0.01, rho=20.0, alpha=100.0, gamma=1.0, method=Method.GRAD_DIV_AH),
    NsConfig(nu=0.01, epsilon=0.1, method=Method.IPP),
    NsConfig(nu=0.01, gamma=1.0, method=Method.PICARD),
])
def test_discrete_solution_is_a_fixed_point(sv_system, sv_solution, config):
    new = stepper_for(config.method)(sv_solution, config, sv_system)
    scale = h_norm(sv_system, sv_solution.u, sv_solution.p, 1.0)
    change = h_norm(sv_system, new.u - sv_solution.u, new.p - sv_solution.p, 1.0)
    assert change <= 1e-8 * scale


def test_th_ah_fixed_point():
    system = cavity_system(ElementPair.TAYLOR_HOOD)
    picard = NsConfig(nu=0.01, method=Method.PICARD, element=ElementPair.TAYLOR_HOOD,
                      tol=1e-12, max_iters=100)
    solution, trace = fixed_point_solve(solve_stokes_initial(system), picard_step,
                                        picard, system)
    assert trace.status is Status.CONVERGED
    config = NsConfig(nu=0.01, rho=5.0, alpha=100.0, method=Method.AH,
                      element=ElementPair.TAYLOR_HOOD)
    new = ah_step(solution, config, system)
    assert_allclose(new.u, solution.u, atol=1e-8)
    assert_allclose(new.p, solution.p, atol=1e-8 * np.abs(solution.p).max())


def test_graddiv_ah_matches_ipp():
    system = cavity_system(n=16)
    eps, nu = 0.1, 0.01
    ah = NsConfig(nu=nu, rho=1.0 / nu, alpha=eps / nu, gamma=1.0 / eps)
    ipp = NsConfig(nu=nu, epsilon=eps, method=Method.IPP)
    x = y = solve_stokes_initial(system)
    for _ in range(20):
        x = graddiv_ah_step(x, ah, system)
        y = ipp_step(y, ipp, system)
        difference = h_norm(system, x.u - y.u, x.p - y.p, ah.alpha)
        assert difference <= 1e-10 * h_norm(system, y.u, y.p, ah.alpha)


def test_ipp_converges_to_the_picard_solution(sv_system, sv_solution):
    config = NsConfig(nu=0.01, epsilon=1e-4, method=Method.IPP, tol=1e-12, max_iters=200)
    state, trace = fixed_point_solve(solve_stokes_initial(sv_system), ipp_step,
                                     config, sv_system)
    assert trace.status is Status.CONVERGED
    assert_allclose(state.u, sv_solution.u, atol=1e-6)


def test_th_ipp_coupled_solve():
    system = cavity_system(ElementPair.TAYLOR_HOOD)
    config = NsConfig(nu=0.01, epsilon=1e-3, method=Method.IPP,
                      element=ElementPair.TAYLOR_HOOD, max_iters=300)
    state, trace = fixed_point_solve(solve_stokes_initial(system), ipp_step, config, system)
    assert trace.status is Status.CONVERGED
    assert abs(system.pressure_mean(state.p)) <= 1e-10


def test_picard_homogeneous_problem_goes_to_zero():
    system = cavity_system(bcs=BoundaryConditionSet.everywhere(no_slip))
    rng = np.random.default_rng(5)
    state = State(u=rng.standard_normal(system.dofmap.n_velocity),
                  p=rng.standard_normal(system.dofmap.n_pressure))
    new = picard_step(state, NsConfig(nu=0.01, method=Method.PICARD), system)
    assert_allclose(new.u, 0.0, atol=1e-14)
    assert_allclose(new.p, 0.0, atol=1e-12)


def test_converged_initial_state_takes_one_iteration(sv_system, sv_solution):
    config = NsConfig(nu=0.01, method=Method.PICARD, tol=1e-8)
    state, trace = fixed_point_solve(sv_solution, picard_step, config, sv_system)
    assert trace.status is Status.CONVERGED
    assert trace.iterations == 1
    assert len(trace.records) == 2


def test_zero_max_iters_returns_initial(sv_system):
    initial = solve_stokes_initial(sv_system)
    config = NsConfig(nu=0.01, rho=20.0, alpha=100.0, gamma=1.0, max_iters=0)
    state, trace = fixed_point_solve(initial, graddiv_ah_step, config, sv_system)
    assert state is initial
    assert trace.status is Status.MAX_ITERS
    assert trace.iterations == 0


def test_divergence_is_detected(sv_system):
    config = NsConfig(nu=0.01, rho=20.0, alpha=100.0, gamma=1.0, tol=1e-14,
                      divergence_threshold=1e-12)
    _, trace = fixed_point_solve(solve_stokes_initial(sv_system), graddiv_ah_step,
                                 config, sv_system)
    assert trace.status is Status.DIVERGED
    assert trace.iterations == 1


def test_trace_frame_and_stopping_norm(sv_system):
    config = NsConfig(nu=0.01, rho=20.0, alpha=100.0, gamma=1.0, max_iters=4,
                      stopping_norm=StoppingNorm.H1)
    _, trace = fixed_point_solve(solve_stokes_initial(sv_system), graddiv_ah_step,
                                 config, sv_system)
    assert trace.status is Status.MAX_ITERS
    assert all(r.update_norm == r.update_h1 for r in trace.records[1:])
    frame = trace.to_frame("demo")
    assert list(frame.columns) == ["run_id", "iter", "update_l2", "div_l2", "theta",
                                   "wall_ms", "status"]
    assert list(frame["iter"]) == [0, 1, 2, 3, 4]
    assert set(frame["status"]) == {"MaxIters"}
    assert frame["wall_ms"].is_monotonic_increasing


def test_velocity_solves_reuse_the_column_order(sv_system):
    config = NsConfig(nu=0.01, rho=20.0, alpha=100.0, gamma=1.0)
    state = graddiv_ah_step(solve_stokes_initial(sv_system), config, sv_system)
    first = sv_system.factorizations["arrow_hurwicz"]
    graddiv_ah_step(state, config, sv_system)
    second = sv_system.factorizations["arrow_hurwicz"]
    assert second is not first
    assert second.presorted
    assert second.column_order is first.column_order


def test_graddiv_never_increases_divergence():
    system = cavity_system(ElementPair.TAYLOR_HOOD)
    divergences = []
    for gamma in (1.0, 10.0, 100.0):
        config = NsConfig(nu=1.0, gamma=gamma, method=Method.PICARD,
                          element=ElementPair.TAYLOR_HOOD, tol=1e-12, max_iters=50)
        _, trace = fixed_point_solve(solve_stokes_initial(system), picard_step,
                                     config, system)
        assert trace.status is Status.CONVERGED
        divergences.append(trace.records[-1].divergence_l2)
    assert divergences[0] > 0.0
    assert np.all(np.diff(divergences) <= 0.0)


def test_picard_needs_fewer_iterations_than_graddiv_ah(sv_system):
    initial = solve_stokes_initial(sv_system)
    _, picard = fixed_point_solve(initial, picard_step,
                                  NsConfig(nu=0.01, method=Method.PICARD), sv_system)
    _, ah = fixed_point_solve(initial, graddiv_ah_step,
                              NsConfig(nu=0.01, rho=20.0, alpha=100.0, gamma=1.0),
                              sv_system)
    assert picard.status is Status.CONVERGED
    assert picard.iterations < ah.iterations


def test_small_data_iteration_contracts():
    from ahflow.harness.manufactured import smooth_solution
    exact = smooth_solution(nu=1.0, nonlinear=True, forcing_scale=0.1)
    system = cavity_system(bcs=BoundaryConditionSet.everywhere(exact.velocity),
                           f=exact.forcing)
    config = NsConfig(nu=1.0, rho=1.0, alpha=0.01, gamma=100.0, tol=1e-10, max_iters=500)
    _, trace = fixed_point_solve(solve_stokes_initial(system), graddiv_ah_step,
                                 config, system)
    assert trace.status is Status.CONVERGED
    updates = trace.update_norms
    slope = np.polyfit(np.arange(len(updates)), np.log(updates), 1)[0]
    assert np.exp(slope) < 1.0


@pytest.mark.slow
def test_cavity_re100_iteration_count():
    system = cavity_system(n=32)
    config = NsConfig(nu=0.01, rho=20.0, alpha=100.0, gamma=1.0)
    _, trace = fixed_point_solve(solve_stokes_initial(system), graddiv_ah_step,
                                 config, system)
    assert trace.status is Status.CONVERGED
    assert 56 <= trace.iterations <= 104


@pytest.mark.slow
def test_th_without_graddiv_mostly_fails():
    failures, runs = 0, 0
    for re in (100, 1000):
        system = cavity_system(ElementPair.TAYLOR_HOOD, n=32)
        for rho in (1.0, 5.0, 20.0, 50.0):
            config = NsConfig(nu=1.0 / re, rho=rho, alpha=float(re), method=Method.AH,
                              element=ElementPair.TAYLOR_HOOD)
            _, trace = fixed_point_solve(solve_stokes_initial(system), ah_step,
                                         config, system)
            failures += trace.status is not Status.CONVERGED
            runs += 1
    assert failures >= 0.75 * runs


if __name__ == "__main__":
    pytest.main([__file__])
