"""Auxiliary-formulation solver: block best responses, descent, debiasing."""

import numpy as np
import pytest

from conftest import complex_gaussian, feasible_point, random_instance
from prdl import problem, scaphase, scenario, tuning
from prdl.problem import phase_matched_target
from prdl.solver_common import SolverConfig

CASES = ["general", "time_invariant", "snapshot_selectors"]


def majorizer_with_penalty(inst, X, D, Z, Y_t, rho):
    F = inst.op.apply(X)
    return (
        0.5 * np.sum(np.abs(Y_t - F) ** 2)
        + 0.5 * inst.mu * np.sum(np.abs(X - D @ Z) ** 2)
        + rho * np.sum(np.abs(Z))
    )


def sample_point(rng, inst):
    X = complex_gaussian(rng, inst.op.shape_in)
    D, Z = feasible_point(rng, inst)
    return X, D, Z


@pytest.mark.parametrize("case", CASES)
def test_direction_X_is_entrywise_minimizer(rng, case):
    inst = random_instance(rng, case)
    X, D, Z = sample_point(rng, inst)
    Y_t = phase_matched_target(inst.Y, inst.op.apply(X))
    gX, _, _ = problem.gradients_aux(inst, X, D, Z, Y_t)
    X_new = scaphase.direction_X(inst, X, gX)
    N, I = X.shape
    for _ in range(30):
        n, i = rng.integers(N), rng.integers(I)
        best = np.array(X)
        best[n, i] = X_new[n, i]
        base = majorizer_with_penalty(inst, best, D, Z, Y_t, inst.rho)
        trial = np.array(X)
        trial[n, i] = X_new[n, i] + 0.1 * complex_gaussian(rng, ())
        assert majorizer_with_penalty(inst, trial, D, Z, Y_t, inst.rho) >= base - 1e-9


@pytest.mark.parametrize("case", CASES)
def test_direction_D_is_per_atom_minimizer(rng, case):
    inst = random_instance(rng, case)
    X, D, Z = sample_point(rng, inst)
    Y_t = phase_matched_target(inst.Y, inst.op.apply(X))
    _, gD, _ = problem.gradients_aux(inst, X, D, Z, Y_t)
    D_new = scaphase.direction_D(inst, X, D, Z, gD)
    assert np.all(np.linalg.norm(D_new, axis=0) <= 1.0 + 1e-9)
    for p in range(inst.P):
        best = np.array(D)
        best[:, p] = D_new[:, p]
        base = majorizer_with_penalty(inst, X, best, Z, Y_t, inst.rho)
        for _ in range(10):
            trial = np.array(D)
            pert = D_new[:, p] + 0.1 * complex_gaussian(rng, inst.shapes[0])
            trial[:, p] = pert / max(1.0, np.linalg.norm(pert))
            assert (
                majorizer_with_penalty(inst, X, trial, Z, Y_t, inst.rho)
                >= base - 1e-9
            )


@pytest.mark.parametrize("case", CASES)
def test_direction_Z_is_entrywise_minimizer(rng, case):
    inst = random_instance(rng, case)
    X, D, Z = sample_point(rng, inst)
    Y_t = phase_matched_target(inst.Y, inst.op.apply(X))
    _, _, gZ = problem.gradients_aux(inst, X, D, Z, Y_t)
    Z_new = scaphase.direction_Z(inst, D, Z, gZ)
    P, I = Z.shape
    for _ in range(30):
        p, i = rng.integers(P), rng.integers(I)
        best = np.array(Z)
        best[p, i] = Z_new[p, i]
        base = majorizer_with_penalty(inst, X, D, best, Y_t, inst.rho)
        trial = np.array(Z)
        trial[p, i] = Z_new[p, i] + 0.1 * complex_gaussian(rng, ())
        assert majorizer_with_penalty(inst, X, D, trial, Y_t, inst.rho) >= base - 1e-9


def test_direction_Z_requires_positive_mu(rng):
    inst = random_instance(rng, "general", mu=0.0)
    _, D, Z = sample_point(rng, inst)
    with pytest.raises(ValueError):
        scaphase.direction_Z(inst, D, Z, np.zeros_like(Z))


def test_line_search_matches_grid_oracle(rng):
    inst = random_instance(rng, "general")
    X, D, Z = sample_point(rng, inst)
    F_X = inst.op.apply(X)
    Y_t = phase_matched_target(inst.Y, F_X)
    gX, gD, gZ = problem.gradients_aux(inst, X, D, Z, Y_t, F_X)
    X_t = scaphase.direction_X(inst, X, gX)
    D_t = scaphase.direction_D(inst, X, D, Z, gD)
    Z_t = scaphase.direction_Z(inst, D, Z, gZ)
    dX, dD, dZ = X_t - X, D_t - D, Z_t - Z
    R = Y_t - F_X
    F_dX = inst.op.apply(dX)
    W0 = X - D @ Z
    W1 = dX - (dD @ Z + D @ dZ)
    W2 = dD @ dZ
    delta_g = inst.rho * (np.sum(np.abs(Z_t)) - np.sum(np.abs(Z)))
    gamma = scaphase.line_search(inst, R, F_dX, W0, W1, W2, delta_g)

    # the search minimizes the smooth quartic plus the convexity upper bound
    # of the l1 term along the segment: (1-g)*||Z||_1 + g*||Z_t||_1
    def phi(g):
        Xg, Dg, Zg = X + g * dX, D + g * dD, Z + g * dZ
        Fg = inst.op.apply(Xg)
        return (
            0.5 * np.sum(np.abs(Y_t - Fg) ** 2)
            + 0.5 * inst.mu * np.sum(np.abs(Xg - Dg @ Zg) ** 2)
            + inst.rho * ((1 - g) * np.sum(np.abs(Z)) + g * np.sum(np.abs(Z_t)))
        )

    grid = np.linspace(0.0, 1.0, 20001)
    vals = np.array([phi(g) for g in grid])
    assert phi(gamma) <= vals.min() + 1e-10 * max(1.0, abs(vals.min()))


def test_pinv_solve_matches_lstsq(rng):
    D = complex_gaussian(rng, (6, 4))
    X = complex_gaussian(rng, (6, 9))
    ref = np.linalg.lstsq(D, X, rcond=None)[0]
    assert np.allclose(scaphase.pinv_solve(D, X), ref, atol=1e-10)


def test_run_descends_and_reports(rng):
    inst = random_instance(rng, "time_invariant")
    report = scaphase.run(inst, config=SolverConfig(max_iters=60, rng_seed=7))
    obj = np.array(report.objective)
    assert np.all(np.diff(obj) <= 1e-9 * np.maximum(1.0, np.abs(obj[:-1])))
    assert report.X.shape == inst.op.shape_in
    assert np.all(np.linalg.norm(report.D, axis=0) <= 1.0 + 1e-8)


def test_converges_on_noiseless_scenario():
    scn = scenario.generate(case=1, N=8, P=4, I=32, M1=24, L=1,
                            snr_db=np.inf, seed=3)
    base = scn.inst
    mu = tuning.mu_default(base)
    inst = problem.ProblemInstance(Y=base.Y, op=base.op, P=base.P, mu=mu)
    rho = 0.75**13 * tuning.rho_max(inst)
    inst = problem.ProblemInstance(Y=base.Y, op=base.op, P=base.P, mu=mu, rho=rho)
    cfg = SolverConfig(epsilon=1e-5, max_iters=2000, rng_seed=0)
    report = scaphase.run(inst, config=cfg)
    assert report.converged
    r_D, r_Z, r_X = scaphase.stationarity_residual(
        inst, report.X, report.D, report.Z
    )
    N, P, I, M1, M2 = inst.shapes
    eps = cfg.epsilon
    assert r_D <= M1 * M2 * np.sqrt(N * P) * eps
    assert r_Z <= M1 * M2 * np.sqrt(P * I) * eps
    assert r_X <= M1 * M2 * np.sqrt(N * I) * eps


def test_debias_preserves_support_and_reduces_misfit(rng):
    inst = random_instance(rng, "time_invariant", rho=0.5)
    report = scaphase.run(inst, config=SolverConfig(max_iters=200, rng_seed=1))
    support = report.Z != 0
    deb = scaphase.debias(inst, report.X, report.D, report.Z,
                          config=SolverConfig(max_iters=200))
    assert np.all(deb.Z[~support] == 0)
    before = problem.objective_aux(inst, report.X, report.D, report.Z) - (
        inst.rho * np.sum(np.abs(report.Z))
    )
    after = problem.objective_aux(inst, deb.X, deb.D, deb.Z) - (
        inst.rho * np.sum(np.abs(deb.Z))
    )
    assert after <= before + 1e-9
