"""Estimation-quality metrics modulo the trivial ambiguities.

Magnitude-only data leaves a global phase, a per-atom complex scaling, and an
atom permutation unrecoverable.  The pipeline here removes them in order:
phase correction from the reconstructed signal, atom matching by normalized
cross-correlation, then scale-invariant errors and a support-recovery score.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize


def phase_align(X_est, X_true, columnwise=False):
    """Optimal phase correction of X_est toward X_true.

    Global mode applies one phase e^{i*phi} with phi = -arg(tr(X_true^H X_est)),
    the exact minimizer of ||X_est e^{i*phi} - X_true||_F.  Columnwise mode
    (appropriate when snapshots are measured independently) corrects each
    column separately.  A zero inner product leaves the phase at 0.
    """
    X_est = np.asarray(X_est)
    X_true = np.asarray(X_true)
    if X_est.shape != X_true.shape:
        raise ValueError("shape mismatch")
    if columnwise:
        inner = np.sum(X_true.conj() * X_est, axis=0)
        phases = np.where(inner != 0, -np.angle(inner), 0.0)
        return X_est * np.exp(1j * phases)[None, :], phases
    inner = np.vdot(X_true, X_est)
    phi = -np.angle(inner) if inner != 0 else 0.0
    return X_est * np.exp(1j * phi), phi


def _correlation(D_est, D_true):
    norms_e = np.linalg.norm(D_est, axis=0)
    norms_t = np.linalg.norm(D_true, axis=0)
    corr = np.abs(D_est.conj().T @ D_true)
    scale = np.outer(norms_e, norms_t)
    return np.divide(corr, scale, out=np.zeros_like(corr), where=scale > 0)


def match_permutation(D_est, D_true, hungarian=False):
    """Index array perm with D_est[:, perm] matched against D_true.

    Default is greedy assignment on the normalized cross-correlation
    |d_p^H d_q| / (||d_p|| ||d_q||): repeatedly take the largest remaining
    correlation, retiring its row and column.  Zero atoms correlate with
    nothing and are assigned last.  hungarian=True uses the optimal
    assignment instead.
    """
    corr = _correlation(np.asarray(D_est), np.asarray(D_true))
    P = corr.shape[0]
    if corr.shape[0] != corr.shape[1]:
        raise ValueError("atom counts differ")
    perm = np.empty(P, dtype=int)
    if hungarian:
        rows, cols = scipy.optimize.linear_sum_assignment(-corr)
        perm[cols] = rows
        return perm
    work = corr.copy()
    for _ in range(P):
        p, q = np.unravel_index(np.argmax(work), work.shape)
        perm[q] = p
        work[p, :] = -1.0
        work[:, q] = -1.0
    return perm


def mnse_d(D_est, D_true):
    """Per-atom scale-invariant squared error, normalized by ||D_true||_F^2.

    Each column uses its optimal complex scale alpha_p = d_p^H d_p^true
    / ||d_p||^2; a zero estimated atom contributes ||d_p^true||^2.
    """
    D_est = np.asarray(D_est)
    D_true = np.asarray(D_true)
    total = 0.0
    for p in range(D_true.shape[1]):
        d, dt = D_est[:, p], D_true[:, p]
        nn = np.vdot(d, d).real
        if nn > 0:
            alpha = np.vdot(d, dt) / nn
            total += np.sum(np.abs(alpha * d - dt) ** 2)
        else:
            total += np.sum(np.abs(dt) ** 2)
    return float(total / np.sum(np.abs(D_true) ** 2))


def mnse_z(Z_est, Z_true):
    """Row-wise analogue of mnse_d for the sparse codes."""
    return mnse_d(np.asarray(Z_est).T, np.asarray(Z_true).T)


def f_measure(Z_est, Z_true, zero_tol=0.0):
    """Support-recovery score 2TP / (2TP + FP + FN).

    Entries of Z_est with magnitude <= zero_tol count as zero; the default
    exact test suits solvers whose soft-thresholding produces true zeros.
    Two empty supports score 1.
    """
    est = np.abs(np.asarray(Z_est)) > zero_tol
    true = np.asarray(Z_true) != 0
    tp = int(np.sum(est & true))
    fp = int(np.sum(est & ~true))
    fn = int(np.sum(~est & true))
    if tp + fp + fn == 0:
        return 1.0
    return 2.0 * tp / (2.0 * tp + fp + fn)


def to_db(value, floor=1e-300):
    """10*log10 with a floor to keep exact zeros finite."""
    return float(10.0 * np.log10(max(float(value), floor)))


@dataclass(frozen=True)
class Metrics:
    mnse_x: float
    mnse_d: float
    mnse_z: float
    f_measure: float
    permutation: np.ndarray


def evaluate(D_est, Z_est, D_true, Z_true, X_est=None, columnwise_phase=False,
             hungarian=False, zero_tol=0.0):
    """Full pipeline: phase correction, atom matching, then all metrics.

    The phase is estimated from the reconstructed signal X = DZ and applied
    to the codes; the permutation from the atoms is applied to both blocks.
    mnse_x is the normalized signal error after phase correction only.
    """
    X_true = D_true @ Z_true
    if X_est is None:
        X_est = D_est @ Z_est
    X_al, phases = phase_align(X_est, X_true, columnwise=columnwise_phase)
    nse_x = float(
        np.sum(np.abs(X_al - X_true) ** 2) / np.sum(np.abs(X_true) ** 2)
    )
    if columnwise_phase:
        Z_ph = Z_est * np.exp(1j * phases)[None, :]
    else:
        Z_ph = Z_est * np.exp(1j * phases)
    perm = match_permutation(D_est, D_true, hungarian=hungarian)
    D_m = D_est[:, perm]
    Z_m = Z_ph[perm, :]
    return Metrics(
        mnse_x=nse_x,
        mnse_d=mnse_d(D_m, D_true),
        mnse_z=mnse_z(Z_m, Z_true),
        f_measure=f_measure(Z_m, Z_true, zero_tol=zero_tol),
        permutation=perm,
    )
