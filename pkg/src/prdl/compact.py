"""Solver for the compact formulation in (D, Z).

Each iteration majorizes the magnitude misfit with a phase-matched quadratic,
solves P independent ball-constrained LS subproblems for the atoms and P*I
scalar soft-threshold subproblems for the codes (all against the current
point), and moves both blocks jointly along the resulting direction with an
exact step from a quartic line search.  Termination is by the minimum-norm
subgradient of the majorizer.
"""

from __future__ import annotations

import time

import numpy as np
import scipy.linalg

from prdl import problem, secular
from prdl.operators import OperatorCase, numerical_rank_tol
from prdl.problem import (
    gradients_compact,
    objective_compact,
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
    random_codes,
    random_dictionary,
    subgradient_codes,
    subgradient_dictionary,
)


def _a_svd(op):
    """Cached compact SVD of the row-mixing matrix of a time-invariant operator."""
    cache = op._cache
    if "a_svd" not in cache:
        A, _ = op.components[0]
        U, s, Vh = scipy.linalg.svd(A, full_matrices=False)
        r = int(np.sum(s > numerical_rank_tol(s, A.shape)))
        cache["a_svd"] = (U[:, :r], s[:r], Vh[:r])
    return cache["a_svd"]


def direction_D(inst, D, Z, Y_t, R, secular_tol=secular.DEFAULT_TOL):
    """Best-response atoms: each column solves its ball-constrained LS.

    R = Y_t - F(DZ) is the cached majorizer residual; the per-atom target is
    recovered as R + F(d_p z_p) without rebuilding the full product.
    """
    op = inst.op
    P = inst.P
    D_new = np.array(D, dtype=np.complex128, copy=True)
    if op.case_tag is OperatorCase.TIME_INVARIANT:
        U_A, s_A, Vh_A = _a_svd(op)
        _, B = op.components[0]
        W = Z.T if op._b_is_identity else B.T @ Z.T  # (M2, P), col p = B^T z_p
        wnorm2 = np.sum(np.abs(W) ** 2, axis=0)
        UR = U_A.conj().T @ R  # (r, M2)
        SVD_D = (s_A**2)[:, None] * (Vh_A @ D)  # (r, P) = S_A U_A^H A D
        C = s_A[:, None] * (UR @ W.conj()) + SVD_D * wnorm2[None, :]
        active = wnorm2 > 0.0
        if np.any(active):
            sig = np.sqrt(wnorm2[active])[None, :] * s_A[:, None]
            coeffs, _ = secular.solve_spectrum_batch(
                sig, C[:, active], secular_tol
            )
            D_new[:, active] = Vh_A.conj().T @ coeffs
        return D_new
    for p in range(P):
        z_row = Z[p, :]
        if not np.any(z_row):
            continue
        Yp = R + op.apply(np.outer(D[:, p], z_row))
        Hp = None
        for A, B in op.components:
            term = np.kron((B.T @ z_row).reshape(-1, 1), A)
            Hp = term if Hp is None else Hp + term
        d, _ = secular.solve_ball_ls(Hp, Yp.flatten(order="F"), secular_tol)
        D_new[:, p] = d
    return D_new


def direction_Z(inst, D, Z, grad_Z, lam=None):
    """Best-response codes: entrywise soft-threshold update.

    Entries whose curvature ||F_i d_p||^2 vanishes are sent to zero (the
    smooth term is flat there and the l1 term is minimized at the origin).
    """
    if lam is None:
        lam = inst.lam
    cn = inst.op.block_image_norms_sq(D)
    safe = np.where(cn > 0, cn, 1.0)
    Z_new = soft_threshold(cn * Z - grad_Z, lam) / safe
    return np.where(cn > 0, Z_new, 0.0)


def line_search(inst, R, C1, C2, delta_g):
    """Exact step for the joint (D, Z) update.

    The majorizer along the direction is the quartic
    0.5 * ||R - g*C1 - g^2*C2||^2 + g * delta_g with
    C1 = F(dD Z + D dZ) and C2 = F(dD dZ).
    """
    a = np.array(
        [
            0.5 * np.sum(np.abs(R) ** 2),
            delta_g - inner_real(R, C1),
            0.5 * np.sum(np.abs(C1) ** 2) - inner_real(R, C2),
            inner_real(C1, C2),
            0.5 * np.sum(np.abs(C2) ** 2),
        ]
    )
    return minimize_quartic_on_unit_interval(a)


def stationarity_residual(inst, D, Z, Y_t=None, F_DZ=None, lam=None, support=None):
    """(r_D, r_Z): Frobenius norms of the minimum-norm subgradient blocks."""
    if lam is None:
        lam = inst.lam
    if F_DZ is None:
        F_DZ = inst.op.apply(D @ Z)
    if Y_t is None:
        Y_t = phase_matched_target(inst.Y, F_DZ)
    gD, gZ = gradients_compact(inst, D, Z, Y_t, F_DZ)
    sub_D = subgradient_dictionary(D, gD)
    sub_Z = subgradient_codes(Z, gZ, lam)
    if support is not None:
        sub_Z = np.where(support, sub_Z, 0.0)
    return frob(sub_D), frob(sub_Z)


def default_init(inst, rng, config):
    N, P, I, _, _ = inst.shapes
    scale = config.init_scale if config.init_scale is not None else 1.0 / np.sqrt(P)
    return random_dictionary(rng, N, P), random_codes(rng, P, I, scale)


def run(inst, init=None, config=None, lam=None, support=None):
    """Iterate to a stationary point of the compact formulation.

    init is (D0, Z0) with feasible D0; omit it to draw the default random
    start from config.rng_seed.  lam/support override the instance penalty
    and restrict the movable code entries (used by the debiasing pass).
    """
    config = config or SolverConfig()
    if lam is None:
        lam = inst.lam
    N, P, I, M1, M2 = inst.shapes
    if init is None:
        rng = np.random.default_rng(config.rng_seed)
        D, Z = default_init(inst, rng, config)
    else:
        D = np.array(init[0], dtype=np.complex128)
        Z = np.array(init[1], dtype=np.complex128)
        problem.check_feasible_dictionary(D)
    if support is not None:
        Z = np.where(support, Z, 0.0)

    op = inst.op
    thresh_D = M1 * M2 * np.sqrt(N * P) * config.epsilon
    thresh_Z = M1 * M2 * np.sqrt(P * I) * config.epsilon
    report = SolverReport()
    F_DZ = op.apply(D @ Z)
    t_prev = time.perf_counter()

    for it in range(config.max_iters + 1):
        if config.cache_refresh and it and it % config.cache_refresh == 0:
            F_DZ = op.apply(D @ Z)
        Y_t = phase_matched_target(inst.Y, F_DZ)
        R = Y_t - F_DZ
        obj = 0.5 * np.sum((inst.Y - np.abs(F_DZ)) ** 2) + lam * np.sum(np.abs(Z))
        if not np.isfinite(obj):
            raise SolverAbort(f"non-finite objective at iteration {it}")

        G = op.adjoint(-R)  # F*(F(DZ) - Y_t)
        gD = G @ Z.conj().T
        gZ = D.conj().T @ G
        sub_D = subgradient_dictionary(D, gD)
        sub_Z = subgradient_codes(Z, gZ, lam)
        if support is not None:
            sub_Z = np.where(support, sub_Z, 0.0)
        r_D, r_Z = frob(sub_D), frob(sub_Z)

        now = time.perf_counter()
        report.objective.append(float(obj))
        report.residuals.append((r_D, r_Z))
        report.times.append(now - t_prev)
        t_prev = now
        if r_D <= thresh_D and r_Z <= thresh_Z:
            report.converged = True
            break
        if it == config.max_iters:
            break

        D_t = direction_D(inst, D, Z, Y_t, R, config.secular_tol)
        Z_t = direction_Z(inst, D, Z, gZ, lam)
        if support is not None:
            Z_t = np.where(support, Z_t, 0.0)
        dD = D_t - D
        dZ = Z_t - Z
        C1 = op.apply(dD @ Z + D @ dZ)
        C2 = op.apply(dD @ dZ)
        delta_g = lam * (np.sum(np.abs(Z_t)) - np.sum(np.abs(Z)))
        gamma = line_search(inst, R, C1, C2, delta_g)
        report.step_sizes.append(gamma)
        if gamma == 0.0:
            # the direction gives no descent on the upper bound; stop moving
            report.converged = r_D <= thresh_D and r_Z <= thresh_Z
            break
        D = D + gamma * dD
        Z = Z + gamma * dZ
        F_DZ = F_DZ + gamma * C1 + gamma**2 * C2

    report.iterations = len(report.objective) - 1
    report.D, report.Z = D, Z
    return report


def debias(inst, D, Z, config=None):
    """Re-run with zero l1 penalty on the fixed support of Z.

    Entries that are exactly zero stay pinned; an all-zero Z is returned
    unchanged.
    """
    config = config or SolverConfig()
    Z = np.asarray(Z, dtype=np.complex128)
    support = Z != 0
    if not np.any(support):
        report = SolverReport(D=np.array(D), Z=np.array(Z), converged=True)
        report.objective.append(float(objective_compact(inst, D, Z)) )
        return report
    return run(inst, init=(D, Z), config=config, lam=0.0, support=support)
