"""Unit-ball-constrained least squares via the KKT system and its secular equation.

min 0.5 * ||H d - y||^2  s.t.  ||d||_2 <= 1 is solved through the compact SVD
H = U S V^H.  The optimal multiplier nu solves psi(nu) = 1 with

    psi(nu) = sum_i |c_i|^2 / (sigma_i^2 + nu)^2,   c = S^H U^H y,

a strictly decreasing rational function on [0, inf).  The root is found by
successively interpolating psi with alpha / (beta - nu)^2 matched in value and
slope, which approaches the root monotonically from below and converges
quadratically; the update collapses to

    nu <- nu + 2 psi (1 - sqrt(psi)) / psi'.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from prdl.operators import numerical_rank_tol

DEFAULT_TOL = 1e-9
MAX_SECULAR_ITERS = 100


class SecularDomainError(ValueError):
    """psi evaluated at or left of a pole, or with non-finite data."""


@dataclass(frozen=True)
class SecularSpectrum:
    """Positive singular values (descending) and rotated data vector c."""

    sigma: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=np.float64)
        c = np.asarray(self.c, dtype=np.complex128)
        if sigma.ndim != 1 or len(sigma) == 0 or sigma.shape != c.shape:
            raise ValueError("sigma and c must be 1-D of equal positive length")
        if np.any(sigma <= 0):
            raise ValueError("all singular values must be strictly positive")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "c", c)


def psi(spec, nu):
    """(psi(nu), psi'(nu)); requires nu to the right of every pole -sigma_r^2."""
    s2 = spec.sigma**2
    if not np.isfinite(nu) or nu <= -np.min(s2):
        raise SecularDomainError(f"nu={nu} is at or left of the rightmost pole")
    denom = s2 + nu
    w = np.abs(spec.c) ** 2
    val = float(np.sum(w / denom**2))
    deriv = float(-2.0 * np.sum(w / denom**3))
    if not np.isfinite(val) or not np.isfinite(deriv):
        raise SecularDomainError("non-finite psi evaluation")
    return val, deriv


@dataclass(frozen=True)
class SecularTrace:
    """Iterates of the rational-approximation loop, for diagnostics and tests."""

    nus: np.ndarray          # nu^(0), nu^(1), ...
    psis: np.ndarray         # psi at each iterate
    interpolants: tuple      # (alpha, beta) fitted at each non-final iterate
    iterations: int
    bisection_fallbacks: int


def interpolant_params(value, deriv):
    """(alpha, beta) of alpha/(beta-nu)^2 matching psi in value and slope at nu."""
    alpha = 4.0 * value**3 / deriv**2
    beta_offset = 2.0 * value / deriv  # beta = nu + beta_offset
    return alpha, beta_offset


def solve_secular(spec, tol=DEFAULT_TOL, with_trace=False):
    """Smallest nu >= 0 with psi(nu) <= 1 + tol, from nu = 0 upward.

    Returns nu, or (nu, SecularTrace) when with_trace is set.  A bisection
    fallback guards the (theoretically impossible) case where rounding makes
    an iterate overshoot the root.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    nu = 0.0
    value, deriv = psi(spec, nu)
    nus, psis, interps = [nu], [value], []
    fallbacks = 0
    iters = 0
    while value > 1.0 + tol:
        if iters >= MAX_SECULAR_ITERS:
            raise RuntimeError("secular iteration failed to converge")
        alpha, beta_off = interpolant_params(value, deriv)
        interps.append((alpha, nu + beta_off))
        nu_next = nu + 2.0 * value * (1.0 - np.sqrt(value)) / deriv
        value_next, deriv_next = psi(spec, nu_next)
        if value_next < 1.0 - tol:
            # overshoot from rounding: one bisection step back toward nu
            fallbacks += 1
            lo, hi = nu, nu_next
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                vm, dm = psi(spec, mid)
                if vm > 1.0:
                    lo = mid
                else:
                    hi = mid
                if vm <= 1.0 + tol and vm >= 1.0 - tol:
                    break
            nu_next, value_next, deriv_next = mid, vm, dm
        nu, value, deriv = nu_next, value_next, deriv_next
        nus.append(nu)
        psis.append(value)
        iters += 1
    if with_trace:
        trace = SecularTrace(
            nus=np.array(nus),
            psis=np.array(psis),
            interpolants=tuple(interps),
            iterations=iters,
            bisection_fallbacks=fallbacks,
        )
        return nu, trace
    return nu


def solve_spectrum(sigma, c, tol=DEFAULT_TOL):
    """Ball-constrained solve given a precomputed spectrum.

    Returns (coeffs, nu) where coeffs = (S^2 + nu)^-1 c gives the solution in
    the right-singular basis, d = V coeffs.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    c = np.asarray(c, dtype=np.complex128)
    keep = np.abs(c) > 0
    nu = 0.0
    if np.any(keep):
        spec = SecularSpectrum(sigma[keep], c[keep])
        if psi(spec, 0.0)[0] > 1.0:
            nu = solve_secular(spec, tol)
    coeffs = c / (sigma**2 + nu)
    if nu > 0.0:
        # psi tolerance can leave ||coeffs|| at 1 + O(tol); restore feasibility
        norm = np.linalg.norm(coeffs)
        if norm > 1.0:
            coeffs = coeffs / norm
    return coeffs, nu


def solve_spectrum_batch(sigma, C, tol=DEFAULT_TOL):
    """Columnwise ball-constrained solves sharing one spectrum layout.

    sigma is (r, P) with column p holding the singular values of the p-th
    subproblem; C is the matching (r, P) rotated data.  Runs the rational
    iteration on all columns simultaneously and returns (coeffs, nu) with
    coeffs (r, P) and nu (P,).  Equivalent to solve_spectrum per column.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    C = np.asarray(C, dtype=np.complex128)
    s2 = sigma**2
    w = np.abs(C) ** 2
    P = C.shape[1]
    nu = np.zeros(P)

    def eval_psi(nu_vec):
        denom = s2 + nu_vec[None, :]
        val = np.sum(w / denom**2, axis=0)
        deriv = -2.0 * np.sum(w / denom**3, axis=0)
        return val, deriv

    val, deriv = eval_psi(nu)
    active = val > 1.0 + tol
    for _ in range(MAX_SECULAR_ITERS):
        if not np.any(active):
            break
        step = np.zeros(P)
        step[active] = (
            2.0 * val[active] * (1.0 - np.sqrt(val[active])) / deriv[active]
        )
        nu = nu + step
        val, deriv = eval_psi(nu)
        overshoot = active & (val < 1.0 - tol)
        for p in np.flatnonzero(overshoot):
            # rounding pushed this column past the root; redo it scalar
            coeffs_p, nu_p = solve_spectrum(sigma[:, p], C[:, p], tol)
            nu[p] = nu_p
            val[p] = 1.0
        active = active & (val > 1.0 + tol)
    else:
        raise RuntimeError("secular iteration failed to converge")
    coeffs = C / (s2 + nu[None, :])
    constrained = nu > 0
    if np.any(constrained):
        norms = np.linalg.norm(coeffs[:, constrained], axis=0)
        coeffs[:, constrained] /= np.maximum(1.0, norms)[None, :]
    return coeffs, nu


def solve_ball_ls(H, y, tol=DEFAULT_TOL):
    """(d, nu) minimizing 0.5*||H d - y||^2 over the unit l2-ball.

    An all-zero H makes the objective constant; returns (0, 0) then.
    """
    H = np.asarray(H, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128).ravel()
    if H.ndim != 2 or H.shape[0] != y.shape[0]:
        raise ValueError("H and y have incompatible shapes")
    if not np.any(H):
        return np.zeros(H.shape[1], dtype=np.complex128), 0.0
    U, s, Vh = scipy.linalg.svd(H, full_matrices=False)
    rank_tol = numerical_rank_tol(s, H.shape)
    r = int(np.sum(s > rank_tol))
    U, s, Vh = U[:, :r], s[:r], Vh[:r]
    c = s * (U.conj().T @ y)
    coeffs, nu = solve_spectrum(s, c, tol)
    d = Vh.conj().T @ coeffs
    return d, nu


def solve_ball_ls_kron(A_svd, B, z_row, Y_target, tol=DEFAULT_TOL):
    """Fast path for H = (B^T z) (x) A using a precomputed SVD of A.

    A_svd is (U_A, s_A, Vh_A) with positive s_A.  The nonzero singular values
    of H are ||B^T z|| * s_A and the rotated data is c = S_A U_A^H Y B^H conj(z),
    so only O(M1 N) work is needed per column.  A zero ||B^T z|| makes the
    subproblem constant; (0-change, 0) is signalled by returning None.
    """
    U_A, s_A, Vh_A = A_svd
    z_row = np.asarray(z_row, dtype=np.complex128)
    w = np.asarray(B, dtype=np.complex128).T @ z_row
    wnorm = np.linalg.norm(w)
    if wnorm == 0.0:
        return None
    c = s_A * (U_A.conj().T @ (np.asarray(Y_target) @ w.conj()))
    coeffs, nu = solve_spectrum(wnorm * s_A, c, tol)
    d = Vh_A.conj().T @ coeffs
    return d, nu
