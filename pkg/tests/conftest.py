"""Shared builders for randomized test instances."""

from __future__ import annotations

import numpy as np
import pytest

from prdl.operators import MixingOperator
from prdl.problem import ProblemInstance


def complex_gaussian(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_operator(rng, case="general", N=4, I=8, M1=6, M2=None, K=2):
    """Small mixing operator of the requested structure."""
    if case == "time_invariant":
        M2 = M2 or I + 2
        return MixingOperator.time_invariant(
            complex_gaussian(rng, (M1, N)), complex_gaussian(rng, (I, M2))
        )
    if case == "snapshot_selectors":
        return MixingOperator.snapshot_selectors(
            [complex_gaussian(rng, (M1, N)) for _ in range(I)]
        )
    M2 = M2 or I + 2
    return MixingOperator.general(
        [
            (complex_gaussian(rng, (M1, N)), complex_gaussian(rng, (I, M2)))
            for _ in range(K)
        ]
    )


def random_instance(rng, case="general", N=4, P=3, I=8, M1=6, M2=None, K=2,
                    lam=0.1, mu=1.0, rho=0.1):
    op = random_operator(rng, case, N=N, I=I, M1=M1, M2=M2, K=K)
    X = complex_gaussian(rng, op.shape_in)
    Y = np.abs(op.apply(X)) + 0.05 * np.abs(rng.standard_normal(op.shape_out))
    return ProblemInstance(Y=Y, op=op, P=P, lam=lam, mu=mu, rho=rho)


def feasible_point(rng, inst):
    """(D, Z) with unit-norm atoms and dense random codes."""
    N, P, I, _, _ = inst.shapes
    D = complex_gaussian(rng, (N, P))
    D /= np.linalg.norm(D, axis=0, keepdims=True)
    Z = complex_gaussian(rng, (P, I))
    return D, Z


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
