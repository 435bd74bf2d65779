"""Solver for the auxiliary-variable formulation in (X, D, Z).

The smooth majorizer decouples into N*I scalar quadratic subproblems for X,
P ball-projection subproblems for the atoms, and P*I scalar lasso subproblems
for the codes; all three blocks then move jointly with an exact quartic line
search.  Stopping adds a third residual: the plain gradient norm in X.
"""

from __future__ import annotations

import time

import numpy as np
import scipy.linalg

from prdl import problem
from prdl.operators import numerical_rank_tol
from prdl.problem import (
    gradients_aux,
    phase_matched_target,
    soft_threshold,
)
from prdl.solver_common import (
    SolverAbort,
    SolverConfig,
    SolverReport,
    frob,
    inner_real,
    minimize_quartic_on_unit_interval,
    random_dictionary,
    random_signal,
    subgradient_codes,
    subgradient_dictionary,
)


def direction_X(inst, X, grad_X, col_norms_sq=None):
    """Entrywise quadratic update: x - grad / (||f_col||^2 + mu).

    col_norms_sq caches the squared column norms of the assembled operator
    matrix.  Entries with zero curvature (possible only when mu = 0) stay put.
    """
    if col_norms_sq is None:
        col_norms_sq = inst.op.column_norms_sq()
    denom = col_norms_sq + inst.mu
    safe = np.where(denom > 0, denom, 1.0)
    step = grad_X / safe
    return np.where(denom > 0, X - step, X)


def direction_D(inst, X, D, Z, grad_D):
    """Closed-form ball projection of the per-atom quadratic minimizer.

    Atoms whose code row vanishes have a constant subproblem and stay put.
    """
    row_norms_sq = np.sum(np.abs(Z) ** 2, axis=1)
    D_new = np.array(D, dtype=np.complex128, copy=True)
    active = row_norms_sq > 0
    if inst.mu > 0 and np.any(active):
        step = grad_D[:, active] / (inst.mu * row_norms_sq[active])
        cand = D[:, active] - step
        norms = np.linalg.norm(cand, axis=0)
        cand = cand / np.maximum(1.0, norms)
        D_new[:, active] = cand
    return D_new


def direction_Z(inst, D, Z, grad_Z, rho=None):
    """Entrywise lasso update with threshold rho/mu.

    Atoms with zero norm leave the smooth term flat, so their entries go to 0.
    """
    if rho is None:
        rho = inst.rho
    if inst.mu <= 0:
        raise ValueError("code update requires mu > 0")
    dn = np.sum(np.abs(D) ** 2, axis=0)[:, None]
    safe = np.where(dn > 0, dn, 1.0)
    Z_new = soft_threshold(dn * Z - grad_Z / inst.mu, rho / inst.mu) / safe
    return np.where(dn > 0, Z_new, 0.0)


def line_search(inst, R, F_dX, W0, W1, W2, delta_g):
    """Exact step for the joint (X, D, Z) update.

    Data term: 0.5*||R - g*F(dX)||^2 with R = Y_t - F(X).  Coupling term:
    0.5*mu*||W0 + g*W1 - g^2*W2||^2 with W0 = X - DZ,
    W1 = dX - (dD Z + D dZ), W2 = dD dZ.
    """
    mu = inst.mu
    a = np.array(
        [
            0.5 * np.sum(np.abs(R) ** 2) + 0.5 * mu * np.sum(np.abs(W0) ** 2),
            delta_g - inner_real(R, F_dX) + mu * inner_real(W0, W1),
            0.5 * np.sum(np.abs(F_dX) ** 2)
            + 0.5 * mu * np.sum(np.abs(W1) ** 2)
            - mu * inner_real(W0, W2),
            -mu * inner_real(W1, W2),
            0.5 * mu * np.sum(np.abs(W2) ** 2),
        ]
    )
    return minimize_quartic_on_unit_interval(a)


def stationarity_residual(inst, X, D, Z, Y_t=None, F_X=None, rho=None, support=None):
    """(r_D, r_Z, r_X): minimum-norm subgradient norms of the three blocks."""
    if rho is None:
        rho = inst.rho
    if F_X is None:
        F_X = inst.op.apply(X)
    if Y_t is None:
        Y_t = phase_matched_target(inst.Y, F_X)
    gX, gD, gZ = gradients_aux(inst, X, D, Z, Y_t, F_X)
    sub_D = subgradient_dictionary(D, gD)
    sub_Z = subgradient_codes(Z, gZ, rho)
    if support is not None:
        sub_Z = np.where(support, sub_Z, 0.0)
    return frob(sub_D), frob(sub_Z), frob(gX)


def default_init(inst, rng, config):
    """Random X0 and D0; Z0 = pinv(D0) X0 as in the reference update scheme."""
    N, P, I, _, _ = inst.shapes
    scale = config.init_scale if config.init_scale is not None else 1.0
    D0 = random_dictionary(rng, N, P)
    X0 = random_signal(rng, N, I, scale)
    Z0 = pinv_solve(D0, X0)
    return X0, D0, Z0


def pinv_solve(D, X):
    """pinv(D) X with singular values below the numerical-rank rule dropped."""
    U, s, Vh = scipy.linalg.svd(D, full_matrices=False)
    r = int(np.sum(s > numerical_rank_tol(s, D.shape)))
    return Vh[:r].conj().T @ ((U[:, :r].conj().T @ X) / s[:r, None])


def run(inst, init=None, config=None, rho=None, support=None):
    """Iterate to a stationary point of the auxiliary formulation.

    init is (X0, D0, Z0); omit it for the default random start.  rho/support
    override the penalty and restrict movable code entries (debiasing).
    """
    config = config or SolverConfig()
    if rho is None:
        rho = inst.rho
    N, P, I, M1, M2 = inst.shapes
    if init is None:
        rng = np.random.default_rng(config.rng_seed)
        X, D, Z = default_init(inst, rng, config)
    else:
        X = np.array(init[0], dtype=np.complex128)
        D = np.array(init[1], dtype=np.complex128)
        Z = np.array(init[2], dtype=np.complex128)
        problem.check_feasible_dictionary(D)
    if support is not None:
        Z = np.where(support, Z, 0.0)

    op = inst.op
    mu = inst.mu
    thresh_D = M1 * M2 * np.sqrt(N * P) * config.epsilon
    thresh_Z = M1 * M2 * np.sqrt(P * I) * config.epsilon
    thresh_X = M1 * M2 * np.sqrt(N * I) * config.epsilon
    col_norms_sq = op.column_norms_sq()
    report = SolverReport()
    F_X = op.apply(X)
    DZ = D @ Z
    t_prev = time.perf_counter()

    for it in range(config.max_iters + 1):
        if config.cache_refresh and it and it % config.cache_refresh == 0:
            F_X = op.apply(X)
            DZ = D @ Z
        Y_t = phase_matched_target(inst.Y, F_X)
        R = Y_t - F_X
        W0 = X - DZ
        obj = (
            0.5 * np.sum((inst.Y - np.abs(F_X)) ** 2)
            + 0.5 * mu * np.sum(np.abs(W0) ** 2)
            + rho * np.sum(np.abs(Z))
        )
        if not np.isfinite(obj):
            raise SolverAbort(f"non-finite objective at iteration {it}")

        gX = op.adjoint(-R) + mu * W0
        gD = -mu * W0 @ Z.conj().T
        gZ = -mu * D.conj().T @ W0
        sub_D = subgradient_dictionary(D, gD)
        sub_Z = subgradient_codes(Z, gZ, rho)
        if support is not None:
            sub_Z = np.where(support, sub_Z, 0.0)
        r_D, r_Z, r_X = frob(sub_D), frob(sub_Z), frob(gX)

        now = time.perf_counter()
        report.objective.append(float(obj))
        report.residuals.append((r_D, r_Z, r_X))
        report.times.append(now - t_prev)
        t_prev = now
        if r_D <= thresh_D and r_Z <= thresh_Z and r_X <= thresh_X:
            report.converged = True
            break
        if it == config.max_iters:
            break

        X_t = direction_X(inst, X, gX, col_norms_sq)
        D_t = direction_D(inst, X, D, Z, gD)
        Z_t = direction_Z(inst, D, Z, gZ, rho)
        if support is not None:
            Z_t = np.where(support, Z_t, 0.0)
        dX = X_t - X
        dD = D_t - D
        dZ = Z_t - Z
        F_dX = op.apply(dX)
        DZ1 = dD @ Z + D @ dZ
        W1 = dX - DZ1
        W2 = dD @ dZ
        delta_g = rho * (np.sum(np.abs(Z_t)) - np.sum(np.abs(Z)))
        gamma = line_search(inst, R, F_dX, W0, W1, W2, delta_g)
        report.step_sizes.append(gamma)
        if gamma == 0.0:
            report.converged = (
                r_D <= thresh_D and r_Z <= thresh_Z and r_X <= thresh_X
            )
            break
        X = X + gamma * dX
        D = D + gamma * dD
        Z = Z + gamma * dZ
        F_X = F_X + gamma * F_dX
        DZ = DZ + gamma * DZ1 + gamma**2 * W2

    report.iterations = len(report.objective) - 1
    report.X, report.D, report.Z = X, D, Z
    return report


def debias(inst, X, D, Z, config=None):
    """Re-run with zero l1 penalty on the fixed support of Z."""
    config = config or SolverConfig()
    Z = np.asarray(Z, dtype=np.complex128)
    support = Z != 0
    if not np.any(support):
        report = SolverReport(X=np.array(X), D=np.array(D), Z=np.array(Z), converged=True)
        report.objective.append(float(problem.objective_aux(inst, X, D, Z)))
        return report
    return run(inst, init=(X, D, Z), config=config, rho=0.0, support=support)
