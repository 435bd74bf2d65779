"""Upper bounds for the sparsity penalties and the coupling-weight heuristic.

Above lambda_max (compact) or rho_max (auxiliary) the all-zero code matrix is
stationary, so grid searches only need to scan below these bounds.  Structured
operators admit tighter bounds than the generic ones.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from prdl.operators import OperatorCase


def lambda_max(inst):
    """Smallest known penalty that forces Z = 0 in the compact formulation.

    general:            ||Y||_F * max_i sigma_max(F_i)
    time-invariant:     sigma_max(A) * max_i sum_m |b_im| * ||y_m||
    snapshot selectors: max_i sigma_max(A_i) * ||y_i||
    """
    op = inst.op
    Y = inst.Y
    if op.case_tag is OperatorCase.TIME_INVARIANT:
        A, B = op.components[0]
        col_norms = np.linalg.norm(Y, axis=0)  # ||y_m|| over measurement columns
        weights = np.abs(B) @ col_norms  # per snapshot i
        return float(scipy.linalg.svdvals(A)[0] * np.max(weights))
    if op.case_tag is OperatorCase.SNAPSHOT_SELECTORS:
        col_norms = np.linalg.norm(Y, axis=0)
        return float(
            max(
                scipy.linalg.svdvals(A)[0] * col_norms[i]
                for i, (A, _) in enumerate(op.components)
            )
        )
    _, I = op.shape_in
    block_smax = max(scipy.linalg.svdvals(op.block(i).matrix)[0] for i in range(I))
    return float(np.linalg.norm(Y) * block_smax)


def rho_max(inst):
    """Smallest known penalty admitting a Z = 0 stationary triple (needs mu > 0).

    general / STFT mixing: mu * sigma_max(F) * ||Y||_F / (sigma_min(F)^2 + mu)
    no temporal mixing:    max_i mu * sigma_max(A_i) * ||y_i|| / (sigma_min(A_i)^2 + mu)
    """
    op = inst.op
    mu = inst.mu
    if mu <= 0:
        raise ValueError("rho_max requires mu > 0")
    Y = inst.Y
    no_temporal = op.case_tag is OperatorCase.SNAPSHOT_SELECTORS or (
        op.case_tag is OperatorCase.TIME_INVARIANT
        and np.array_equal(op.components[0][1], np.eye(op.shape_in[1]))
    )
    if no_temporal:
        col_norms = np.linalg.norm(Y, axis=0)
        vals = []
        if op.case_tag is OperatorCase.SNAPSHOT_SELECTORS:
            mats = [A for A, _ in op.components]
        else:
            mats = [op.components[0][0]] * op.shape_in[1]
        for i, A in enumerate(mats):
            sv = scipy.linalg.svdvals(A)
            smin = sv[-1] if A.shape[0] >= A.shape[1] else 0.0
            vals.append(mu * sv[0] * col_norms[i] / (smin**2 + mu))
        return float(max(vals))
    smax, smin, _ = op.spectral_bounds()
    return float(mu * smax * np.linalg.norm(Y) / (smin**2 + mu))


def mu_default(inst):
    """Squared smallest nonzero singular value of the assembled operator."""
    return float(inst.op.spectral_bounds()[2] ** 2)


def penalty_grid(bound, exponents, base=0.75):
    """Grid of penalties bound * base^k for the given exponents k."""
    return [float(bound * base**k) for k in exponents]
