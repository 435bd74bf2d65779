"""Structured complex linear mixing operators F(X) = sum_k A_k X B_k.

Operators are stored as component lists; the full matrix F = sum_k B_k^T (x) A_k
is assembled only on demand (small instances, test oracles).  Specialized code
paths exist for a single component pair (time-invariant mixing) and for
snapshot-selector temporal mixing, where B_k picks the k-th column of X.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg


class OperatorCase(enum.Enum):
    GENERAL = "general"
    TIME_INVARIANT = "time_invariant"
    SNAPSHOT_SELECTORS = "snapshot_selectors"


class DimensionError(ValueError):
    """Shape of an operand does not match the operator."""


def _as_complex(M):
    return np.asarray(M, dtype=np.complex128)


@dataclass(frozen=True)
class OperatorBlock:
    """The i-th column block F_i (M1*M2 x N) of the assembled matrix F."""

    index: int
    matrix: np.ndarray


@dataclass(frozen=True)
class MixingOperator:
    """Immutable linear map X (N x I) -> sum_k A_k X B_k (M1 x M2).

    components: list of (A_k, B_k) with A_k of shape (M1, N) and B_k of
    shape (I, M2).  All apply/adjoint evaluations are pure; instances are
    safe to share across threads.
    """

    components: tuple
    case_tag: OperatorCase = OperatorCase.GENERAL
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        comps = tuple((_as_complex(A), _as_complex(B)) for A, B in self.components)
        if not comps:
            raise ValueError("operator needs at least one (A_k, B_k) component")
        M1, N = comps[0][0].shape
        I, M2 = comps[0][1].shape
        for A, B in comps:
            if A.shape != (M1, N) or B.shape != (I, M2):
                raise DimensionError("all components must share shapes")
        if self.case_tag is OperatorCase.TIME_INVARIANT and len(comps) != 1:
            raise ValueError("time-invariant operator must have K = 1")
        if self.case_tag is OperatorCase.SNAPSHOT_SELECTORS:
            if len(comps) != I:
                raise ValueError("snapshot-selector operator must have K = I")
            for k, (_, B) in enumerate(comps):
                expected = np.zeros((I, M2))
                expected[k, k] = 1.0
                if M2 != I or not np.array_equal(B, expected):
                    raise ValueError("B_k must select the k-th snapshot")
        object.__setattr__(self, "components", comps)

    # -- constructors ------------------------------------------------------

    @classmethod
    def general(cls, components):
        return cls(tuple(components), OperatorCase.GENERAL)

    @classmethod
    def time_invariant(cls, A, B):
        return cls(((A, B),), OperatorCase.TIME_INVARIANT)

    @classmethod
    def snapshot_selectors(cls, A_list):
        A_list = [_as_complex(A) for A in A_list]
        I = len(A_list)
        comps = []
        for k, A in enumerate(A_list):
            B = np.zeros((I, I), dtype=np.complex128)
            B[k, k] = 1.0
            comps.append((A, B))
        return cls(tuple(comps), OperatorCase.SNAPSHOT_SELECTORS)

    # -- shapes ------------------------------------------------------------

    @property
    def K(self):
        return len(self.components)

    @property
    def shape_in(self):
        """(N, I) of the operand X."""
        A, B = self.components[0]
        return A.shape[1], B.shape[0]

    @property
    def shape_out(self):
        """(M1, M2) of the image F(X)."""
        A, B = self.components[0]
        return A.shape[0], B.shape[1]

    # -- evaluation --------------------------------------------------------

    @property
    def _b_is_identity(self):
        if "b_identity" not in self._cache:
            _, B = self.components[0]
            self._cache["b_identity"] = B.shape[0] == B.shape[1] and bool(
                np.array_equal(B, np.eye(B.shape[0]))
            )
        return self._cache["b_identity"]

    def apply(self, X):
        """Return sum_k A_k X B_k."""
        X = _as_complex(X)
        if X.shape != self.shape_in:
            raise DimensionError(f"expected X of shape {self.shape_in}, got {X.shape}")
        if self.case_tag is OperatorCase.TIME_INVARIANT:
            A, B = self.components[0]
            if self._b_is_identity:
                return A @ X
            return A @ X @ B
        if self.case_tag is OperatorCase.SNAPSHOT_SELECTORS:
            out = np.empty(self.shape_out, dtype=np.complex128)
            for k, (A, _) in enumerate(self.components):
                out[:, k] = A @ X[:, k]
            return out
        out = np.zeros(self.shape_out, dtype=np.complex128)
        for A, B in self.components:
            out += A @ X @ B
        return out

    def adjoint(self, Y):
        """Return sum_k A_k^H Y B_k^H, the adjoint for the trace inner product."""
        Y = _as_complex(Y)
        if Y.shape != self.shape_out:
            raise DimensionError(f"expected Y of shape {self.shape_out}, got {Y.shape}")
        if self.case_tag is OperatorCase.TIME_INVARIANT:
            A, B = self.components[0]
            if self._b_is_identity:
                return A.conj().T @ Y
            return A.conj().T @ Y @ B.conj().T
        if self.case_tag is OperatorCase.SNAPSHOT_SELECTORS:
            out = np.empty(self.shape_in, dtype=np.complex128)
            for k, (A, _) in enumerate(self.components):
                out[:, k] = A.conj().T @ Y[:, k]
            return out
        out = np.zeros(self.shape_in, dtype=np.complex128)
        for A, B in self.components:
            out += A.conj().T @ Y @ B.conj().T
        return out

    def __call__(self, X):
        return self.apply(X)

    # -- assembled forms ---------------------------------------------------

    def assemble(self):
        """Full matrix F = sum_k B_k^T (x) A_k of shape (M1*M2, N*I).

        Consistent with column-major vectorization vec(X) = X.flatten('F').
        """
        F = None
        for A, B in self.components:
            term = np.kron(B.T, A)
            F = term if F is None else F + term
        return F

    def block(self, i):
        """F_i, the i-th column block of F, so that F_i z = vec(F(z e_i^T))."""
        N, I = self.shape_in
        if not 0 <= i < I:
            raise IndexError(f"snapshot index {i} out of range [0, {I})")
        Fi = None
        for A, B in self.components:
            term = np.kron(B[i, :].reshape(-1, 1), A)
            Fi = term if Fi is None else Fi + term
        return OperatorBlock(index=i, matrix=Fi)

    def vec(self, X):
        """vec(F(X)) in column-major order."""
        return self.apply(X).flatten(order="F")

    # -- spectral quantities ----------------------------------------------

    def _gram_row_factors(self):
        """G_A[k,l] = A_k^H A_l diagonals (N,), G_B[k,l] = diag(B_k* B_l^T) (I,).

        Used to evaluate squared column norms of F without assembling it.
        """
        K = self.K
        N, I = self.shape_in
        GA = np.empty((K, K, N), dtype=np.complex128)
        GB = np.empty((K, K, I), dtype=np.complex128)
        for k, (Ak, Bk) in enumerate(self.components):
            for l, (Al, Bl) in enumerate(self.components):
                GA[k, l] = np.einsum("mn,mn->n", Ak.conj(), Al)
                GB[k, l] = np.einsum("im,im->i", Bk.conj(), Bl)
        return GA, GB

    def column_norms_sq(self):
        """(N, I) array of squared l2-norms of the columns of F.

        Entry (n, i) is ||F_i e_n||^2, the diagonal of F^H F reshaped.
        """
        if "colnorms" in self._cache:
            return self._cache["colnorms"]
        if self.case_tag is OperatorCase.TIME_INVARIANT:
            A, B = self.components[0]
            a = np.sum(np.abs(A) ** 2, axis=0)
            b = np.sum(np.abs(B) ** 2, axis=1)
            out = np.outer(a, b)
        elif self.case_tag is OperatorCase.SNAPSHOT_SELECTORS:
            out = np.stack(
                [np.sum(np.abs(A) ** 2, axis=0) for A, _ in self.components], axis=1
            )
        else:
            GA, GB = self._gram_row_factors()
            out = np.einsum("kln,kli->ni", GA, GB).real
        self._cache["colnorms"] = out
        return out

    def block_image_norms_sq(self, D):
        """(P, I) array of ||F_i d_p||^2 for all atoms d_p and snapshots i."""
        D = _as_complex(D)
        if self.case_tag is OperatorCase.TIME_INVARIANT:
            A, B = self.components[0]
            a = np.sum(np.abs(A @ D) ** 2, axis=0)
            b = np.sum(np.abs(B) ** 2, axis=1)
            return np.outer(a, b)
        if self.case_tag is OperatorCase.SNAPSHOT_SELECTORS:
            return np.stack(
                [np.sum(np.abs(A @ D) ** 2, axis=0) for A, _ in self.components],
                axis=1,
            )
        T = np.stack([A @ D for A, _ in self.components])  # (K, M1, P)
        GT = np.einsum("kmp,lmp->klp", T.conj(), T)
        _, GB = self._gram_row_factors()
        return np.einsum("klp,kli->pi", GT, GB).real

    def singular_values(self):
        """All singular values of F (descending), via structure where possible."""
        if "sv" in self._cache:
            return self._cache["sv"]
        if self.case_tag is OperatorCase.TIME_INVARIANT:
            A, B = self.components[0]
            sA = scipy.linalg.svdvals(A)
            sB = scipy.linalg.svdvals(B)
            sv = np.sort(np.outer(sA, sB).ravel())[::-1]
        elif self.case_tag is OperatorCase.SNAPSHOT_SELECTORS:
            sv = np.sort(
                np.concatenate([scipy.linalg.svdvals(A) for A, _ in self.components])
            )[::-1]
        else:
            sv = scipy.linalg.svdvals(self.assemble())
        self._cache["sv"] = sv
        return sv

    def spectral_bounds(self):
        """(sigma_max, sigma_min, sigma_min_nonzero) of the assembled F.

        Singular values below max(dims) * eps * sigma_max count as zero for
        the nonzero minimum (standard numerical-rank rule).
        """
        sv = self.singular_values()
        smax = sv[0] if len(sv) else 0.0
        M1, M2 = self.shape_out
        N, I = self.shape_in
        # F is M1*M2 x N*I; sv covers min of those dims, the rest are zeros
        n_full = min(M1 * M2, N * I)
        smin = sv[-1] if len(sv) >= n_full else 0.0
        tol = numerical_rank_tol(sv, (M1 * M2, N * I))
        nz = sv[sv > tol]
        smin_nz = nz[-1] if len(nz) else 0.0
        return float(smax), float(smin), float(smin_nz)


def numerical_rank_tol(sv, shape):
    """Threshold below which singular values are treated as numerically zero."""
    if len(sv) == 0:
        return 0.0
    return max(shape) * np.finfo(np.float64).eps * float(np.max(sv))
