"""Problem instances, objectives, smooth majorizers, and their gradients.

Two formulations share the measurement model Y = |F(.)| + noise:

* compact: variables (D, Z), objective
      0.5 * ||Y - |F(D Z)||_F^2 + lam * ||Z||_1
* auxiliary: variables (X, D, Z), objective
      0.5 * ||Y - |F(X)||_F^2 + 0.5 * mu * ||X - D Z||_F^2 + rho * ||Z||_1

The nonsmooth data term is majorized through |x| >= Re(x * e^{i phi}), tight
at phi = -arg(x), which replaces |F(.)| by a phase-matched complex target.
Gradients follow the convention grad f = 2 * d f / d conj(x) (Wirtinger), so
a real step t along direction R changes f by t * Re<grad, R> to first order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from prdl.operators import DimensionError, MixingOperator

ATOM_NORM_SLACK = 1e-8


@dataclass(frozen=True)
class ProblemInstance:
    """Measurements plus operator and regularization parameters.

    Y must be elementwise nonnegative; P (dictionary size) must stay below
    the number of snapshots I so the sparse factorization is not trivial.
    lam regularizes the compact formulation; mu/rho the auxiliary one.
    """

    Y: np.ndarray
    op: MixingOperator
    P: int
    lam: float = 0.0
    mu: float = 0.0
    rho: float = 0.0

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=np.float64)
        if Y.shape != self.op.shape_out:
            raise DimensionError(
                f"Y shape {Y.shape} does not match operator output {self.op.shape_out}"
            )
        if np.any(Y < 0):
            raise ValueError("Y must be elementwise nonnegative")
        N, I = self.op.shape_in
        if not 1 <= self.P < I:
            raise ValueError(f"dictionary size P={self.P} must satisfy 1 <= P < I={I}")
        if self.lam < 0 or self.mu < 0 or self.rho < 0:
            raise ValueError("regularization parameters must be nonnegative")
        object.__setattr__(self, "Y", Y)

    @property
    def shapes(self):
        """(N, P, I, M1, M2)."""
        N, I = self.op.shape_in
        M1, M2 = self.op.shape_out
        return N, self.P, I, M1, M2


def phase_matched_target(Y, F_image):
    """Y * exp(i * arg(F_image)) elementwise, with arg(0) taken as 0.

    The result is the tightest complex-valued target whose distance to the
    operator image majorizes the magnitude misfit.
    """
    mag = np.abs(F_image)
    phase = np.where(mag > 0, F_image / np.where(mag > 0, mag, 1.0), 1.0)
    return Y * phase


def check_feasible_dictionary(D, slack=ATOM_NORM_SLACK):
    norms = np.linalg.norm(D, axis=0)
    if np.any(norms > 1.0 + slack):
        raise ValueError(f"dictionary atom norm {norms.max()} exceeds unit ball")


def soft_threshold(x, thresh):
    """Complex soft-thresholding: shrink magnitude by thresh, keep the phase."""
    mag = np.abs(x)
    scale = np.maximum(0.0, mag - thresh)
    return np.where(mag > 0, x * (scale / np.where(mag > 0, mag, 1.0)), 0.0)


# -- compact formulation (D, Z) -------------------------------------------


def objective_compact(inst, D, Z, F_DZ=None):
    """0.5 * ||Y - |F(DZ)||_F^2 + lam * ||Z||_1."""
    if F_DZ is None:
        F_DZ = inst.op.apply(np.asarray(D) @ np.asarray(Z))
    misfit = inst.Y - np.abs(F_DZ)
    return 0.5 * np.sum(misfit**2) + inst.lam * np.sum(np.abs(Z))


def majorizer_compact(inst, D, Z, Y_t, F_DZ=None):
    """Smooth part of the majorizer: 0.5 * ||Y_t - F(DZ)||_F^2.

    Y_t is the phase-matched target built at the anchor point.
    """
    if F_DZ is None:
        F_DZ = inst.op.apply(np.asarray(D) @ np.asarray(Z))
    return 0.5 * np.sum(np.abs(Y_t - F_DZ) ** 2)


def gradients_compact(inst, D, Z, Y_t, F_DZ=None):
    """(grad_D, grad_Z) of the smooth majorizer at (D, Z)."""
    D = np.asarray(D, dtype=np.complex128)
    Z = np.asarray(Z, dtype=np.complex128)
    if F_DZ is None:
        F_DZ = inst.op.apply(D @ Z)
    G = inst.op.adjoint(F_DZ - Y_t)
    return G @ Z.conj().T, D.conj().T @ G


# -- auxiliary formulation (X, D, Z) --------------------------------------


def objective_aux(inst, X, D, Z, F_X=None):
    """0.5*||Y - |F(X)||^2 + 0.5*mu*||X - DZ||^2 + rho*||Z||_1."""
    if F_X is None:
        F_X = inst.op.apply(np.asarray(X))
    misfit = inst.Y - np.abs(F_X)
    coupling = np.asarray(X) - np.asarray(D) @ np.asarray(Z)
    return (
        0.5 * np.sum(misfit**2)
        + 0.5 * inst.mu * np.sum(np.abs(coupling) ** 2)
        + inst.rho * np.sum(np.abs(Z))
    )


def majorizer_aux(inst, X, D, Z, Y_t, F_X=None):
    """0.5*||Y_t - F(X)||^2 + 0.5*mu*||X - DZ||^2."""
    if F_X is None:
        F_X = inst.op.apply(np.asarray(X))
    coupling = np.asarray(X) - np.asarray(D) @ np.asarray(Z)
    return 0.5 * np.sum(np.abs(Y_t - F_X) ** 2) + 0.5 * inst.mu * np.sum(
        np.abs(coupling) ** 2
    )


def gradients_aux(inst, X, D, Z, Y_t, F_X=None):
    """(grad_X, grad_D, grad_Z) of the smooth majorizer at (X, D, Z)."""
    X = np.asarray(X, dtype=np.complex128)
    D = np.asarray(D, dtype=np.complex128)
    Z = np.asarray(Z, dtype=np.complex128)
    if F_X is None:
        F_X = inst.op.apply(X)
    W = D @ Z - X
    gX = inst.op.adjoint(F_X - Y_t) - inst.mu * W
    gD = inst.mu * W @ Z.conj().T
    gZ = inst.mu * D.conj().T @ W
    return gX, gD, gZ
