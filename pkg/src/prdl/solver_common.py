"""Shared solver machinery: configuration, reports, quartic line search,
minimum-norm-subgradient stationarity residuals, and random initialization."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class SolverConfig:
    epsilon: float = 1e-5
    max_iters: int = 2000
    debias: bool = False
    secular_tol: float = 1e-9
    rng_seed: int | None = None
    cache_refresh: int = 100
    # scale of the random Z^0 (compact) and X^0 (auxiliary) initializations;
    # None picks 1/sqrt(P) for Z^0 and 1.0 for X^0
    init_scale: float | None = None

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass
class SolverReport:
    """Per-iteration trace and final variables of one solver run."""

    objective: list = field(default_factory=list)
    residuals: list = field(default_factory=list)   # tuples of block residuals
    step_sizes: list = field(default_factory=list)
    times: list = field(default_factory=list)
    D: np.ndarray | None = None
    Z: np.ndarray | None = None
    X: np.ndarray | None = None
    converged: bool = False
    iterations: int = 0

    @property
    def final_objective(self):
        return self.objective[-1] if self.objective else np.inf


class SolverAbort(RuntimeError):
    """Non-finite objective encountered; the run cannot continue."""


def random_dictionary(rng, N, P):
    """Unit-norm i.i.d. complex Gaussian atoms."""
    D = rng.standard_normal((N, P)) + 1j * rng.standard_normal((N, P))
    return D / np.linalg.norm(D, axis=0, keepdims=True)


def random_codes(rng, P, I, scale):
    return scale * (rng.standard_normal((P, I)) + 1j * rng.standard_normal((P, I)))


def random_signal(rng, N, I, scale):
    return scale * (rng.standard_normal((N, I)) + 1j * rng.standard_normal((N, I)))


# -- quartic exact line search --------------------------------------------


def real_cubic_roots(c3, c2, c1, c0):
    """Real roots of c3 x^3 + c2 x^2 + c1 x + c0.

    Closed-form (Cardano/trigonometric) solution; falls back to the
    companion-matrix method when the leading coefficient is near-degenerate.
    """
    coeffs = np.array([c3, c2, c1, c0], dtype=np.float64)
    biggest = np.max(np.abs(coeffs))
    if biggest == 0.0:
        return np.array([])
    if abs(c3) < 1e-14 * biggest:
        if abs(c2) < 1e-14 * biggest:
            if abs(c1) < 1e-14 * biggest:
                return np.array([])
            return np.array([-c0 / c1])
        disc = c1 * c1 - 4.0 * c2 * c0
        if disc < 0:
            return np.array([])
        sq = np.sqrt(disc)
        return np.array([(-c1 - sq) / (2 * c2), (-c1 + sq) / (2 * c2)])
    # depressed cubic t^3 + p t + q with x = t - c2/(3 c3)
    a, b, c = c2 / c3, c1 / c3, c0 / c3
    shift = a / 3.0
    p = b - a * a / 3.0
    q = 2.0 * a**3 / 27.0 - a * b / 3.0 + c
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    scale_chk = max(abs(p) ** 3, abs(q) ** 2, 1e-300)
    if not np.isfinite(disc) or abs(disc) < 1e-12 * scale_chk:
        roots = np.roots([c3, c2, c1, c0])
        return roots.real[np.abs(roots.imag) <= 1e-8 * (1 + np.abs(roots.real))]
    if disc > 0:
        sq = np.sqrt(disc)
        t = np.cbrt(-q / 2.0 + sq) + np.cbrt(-q / 2.0 - sq)
        return np.array([t - shift])
    # three real roots
    r = np.sqrt(-(p**3) / 27.0)
    phi = np.arccos(np.clip(-q / (2.0 * r), -1.0, 1.0))
    m = 2.0 * np.sqrt(-p / 3.0)
    ts = m * np.cos((phi + 2.0 * np.pi * np.arange(3)) / 3.0)
    return ts - shift


def minimize_quartic_on_unit_interval(a):
    """argmin over [0, 1] of a[0] + a[1] g + a[2] g^2 + a[3] g^3 + a[4] g^4.

    Evaluates all real stationary points inside the interval plus both
    endpoints; ties go to the smallest step.
    """
    a = np.asarray(a, dtype=np.float64)
    candidates = [0.0, 1.0]
    roots = real_cubic_roots(4.0 * a[4], 3.0 * a[3], 2.0 * a[2], a[1])
    for r in roots:
        if 0.0 < r < 1.0:
            candidates.append(float(r))
    candidates = sorted(set(candidates))
    vals = [np.polyval(a[::-1], g) for g in candidates]
    # argmin returns the first hit, so exact ties go to the smallest gamma
    return candidates[int(np.argmin(vals))]


def inner_real(A, B):
    """Re <A, B> for the trace inner product."""
    return float(np.sum(A.conj() * B).real)


# -- minimum-norm subgradient residuals -----------------------------------

UNIT_NORM_TOL = 1e-9


def subgradient_dictionary(D, grad_D, norm_tol=UNIT_NORM_TOL):
    """Minimum-norm subgradient block for the ball-constrained dictionary.

    Interior atoms keep the raw gradient.  For a unit-norm atom the normal
    cone is the nonnegative radial ray, so the minimum-norm element of
    g + cone is g - min{0, Re<d, g>} * d.
    """
    G = np.array(grad_D, dtype=np.complex128, copy=True)
    norms = np.linalg.norm(D, axis=0)
    on_boundary = norms >= 1.0 - norm_tol
    for p in np.flatnonzero(on_boundary):
        radial = min(0.0, float((D[:, p].conj() @ G[:, p]).real))
        G[:, p] -= radial * D[:, p]
    return G


def subgradient_codes(Z, grad_Z, thresh):
    """Minimum-norm subgradient for the l1-regularized code matrix.

    Nonzero entries add thresh * phase(z); zero entries contribute
    max{0, |grad| - thresh}.
    """
    nz = Z != 0
    # exp(i*angle) stays finite even for subnormal magnitudes
    phase = np.where(nz, np.exp(1j * np.angle(Z)), 0.0)
    out = np.where(nz, grad_Z + thresh * phase, 0.0)
    mag_zero = np.maximum(0.0, np.abs(grad_Z) - thresh)
    out = np.where(nz, out, mag_zero)
    return out


def frob(M):
    return float(np.linalg.norm(M))
