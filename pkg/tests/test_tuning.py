"""Penalty upper bounds and coupling-weight default.

The key property of each bound: at or above it, the all-zero code matrix is
part of a stationary point, verified with explicit subgradient oracles.
"""

import numpy as np
import pytest

from conftest import complex_gaussian, random_instance
from prdl import compact, scaphase, tuning
from prdl.operators import MixingOperator
from prdl.problem import ProblemInstance, phase_matched_target
from prdl.solver_common import subgradient_codes, subgradient_dictionary, frob

CASES = ["general", "time_invariant", "snapshot_selectors"]


def unit_atoms(rng, N, P):
    D = complex_gaussian(rng, (N, P))
    return D / np.linalg.norm(D, axis=0, keepdims=True)


@pytest.mark.parametrize("case", CASES)
def test_lambda_max_makes_zero_codes_stationary(rng, case):
    inst = random_instance(rng, case)
    lam = tuning.lambda_max(inst) * (1 + 1e-12)
    N, P, I, _, _ = inst.shapes
    # at Z = 0 the phase-matched target is Y itself and the code gradient is
    # -D^H F*(Y); stationarity needs every entry below lam for any feasible D
    G = inst.op.adjoint(-inst.Y.astype(np.complex128))
    for _ in range(20):
        D = unit_atoms(rng, N, P)
        gZ = D.conj().T @ G
        assert np.max(np.abs(gZ)) <= lam
        res = subgradient_codes(np.zeros((P, I), dtype=np.complex128), gZ, lam)
        assert frob(res) == 0.0


def test_lambda_max_is_not_vacuous(rng):
    # a small fraction below the bound should admit a violating dictionary for
    # the matched extremal atom, so the bound is in the right ballpark
    inst = random_instance(rng, "snapshot_selectors")
    lam = tuning.lambda_max(inst)
    G = inst.op.adjoint(-inst.Y.astype(np.complex128))
    best = np.max(np.linalg.norm(G, axis=0))
    # best achievable |gZ| over unit atoms equals max column norm of G
    assert best <= lam
    assert best >= 0.05 * lam


def fixed_point_signal(inst):
    """X with zero auxiliary-block gradient when the codes are all zero.

    Minimizes 0.5*||Y - |F(X)|||^2 + 0.5*mu*||X||^2, whose stationarity
    condition is x = (F^H F + mu I)^{-1} F^H y_t(x) with phase-rematched y_t.
    """
    import scipy.optimize

    F = inst.op.assemble()
    y = inst.Y.flatten(order="F")
    n = F.shape[1]

    def fun(u):
        x = u[:n] + 1j * u[n:]
        fx = F @ x
        val = 0.5 * np.sum((y - np.abs(fx)) ** 2) + 0.5 * inst.mu * np.sum(
            np.abs(x) ** 2
        )
        phases = np.exp(1j * np.angle(fx))
        phases[fx == 0] = 1.0
        g = F.conj().T @ (fx - y * phases) + inst.mu * x
        return val, np.concatenate([g.real, g.imag])

    x0 = np.linalg.lstsq(
        F.conj().T @ F + inst.mu * np.eye(n), F.conj().T @ y, rcond=None
    )[0]
    res = scipy.optimize.minimize(
        fun, np.concatenate([x0.real, x0.imag]), jac=True, method="L-BFGS-B",
        options={"maxiter": 5000, "gtol": 1e-12, "ftol": 0.0},
    )
    x = res.x[:n] + 1j * res.x[n:]
    N, I = inst.op.shape_in
    return x.reshape((N, I), order="F")


@pytest.mark.parametrize("case", CASES)
def test_rho_max_admits_zero_code_stationary_triple(rng, case):
    inst = random_instance(rng, case, mu=0.7, rho=0.0)
    rho = tuning.rho_max(inst) * (1 + 1e-9)
    X = fixed_point_signal(inst)
    N, P, I, M1, M2 = inst.shapes
    Z = np.zeros((P, I), dtype=np.complex128)
    for _ in range(10):
        D = unit_atoms(rng, N, P)
        r_D, r_Z, r_X = scaphase.stationarity_residual(inst, X, D, Z, rho=rho)
        assert r_X <= 1e-4 * np.linalg.norm(inst.Y)
        assert r_D == 0.0
        assert r_Z == 0.0
    # the extremal code gradient magnitude is mu * max_i ||x_i||
    assert inst.mu * np.max(np.linalg.norm(X, axis=0)) <= rho


def test_rho_max_requires_positive_mu(rng):
    inst = random_instance(rng, "general", mu=0.0)
    with pytest.raises(ValueError):
        tuning.rho_max(inst)


@pytest.mark.parametrize("case", CASES)
def test_mu_default_matches_dense_svd(rng, case):
    inst = random_instance(rng, case)
    F = inst.op.assemble()
    sv = np.linalg.svd(F, compute_uv=False)
    tol = max(F.shape) * np.finfo(float).eps * sv[0]
    smin_nz = sv[sv > tol][-1]
    assert tuning.mu_default(inst) == pytest.approx(smin_nz**2, rel=1e-8)


def test_penalty_grid():
    grid = tuning.penalty_grid(8.0, [0, 1, 3], base=0.5)
    assert grid == [8.0, 4.0, 1.0]
    assert tuning.penalty_grid(1.0, []) == []
