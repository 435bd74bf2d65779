"""Structured operator evaluation against dense assembled oracles."""

import numpy as np
import pytest

from conftest import complex_gaussian, random_operator
from prdl.operators import DimensionError, MixingOperator, OperatorCase

CASES = ["general", "time_invariant", "snapshot_selectors"]


@pytest.mark.parametrize("case", CASES)
def test_apply_matches_assembled_matrix(rng, case):
    op = random_operator(rng, case)
    F = op.assemble()
    for _ in range(5):
        X = complex_gaussian(rng, op.shape_in)
        direct = op.apply(X).flatten(order="F")
        assert np.allclose(direct, F @ X.flatten(order="F"), atol=1e-12)
        assert np.allclose(op.vec(X), direct)


@pytest.mark.parametrize("case", CASES)
def test_adjoint_inner_product_identity(rng, case):
    op = random_operator(rng, case)
    for _ in range(5):
        X = complex_gaussian(rng, op.shape_in)
        Y = complex_gaussian(rng, op.shape_out)
        lhs = np.vdot(Y, op.apply(X))
        rhs = np.vdot(op.adjoint(Y), X)
        assert abs(lhs - rhs) <= 1e-10 * (1 + abs(lhs))


def test_identity_temporal_mixing_shortcut(rng):
    A = complex_gaussian(rng, (6, 4))
    op = MixingOperator.time_invariant(A, np.eye(8))
    X = complex_gaussian(rng, (4, 8))
    assert np.allclose(op.apply(X), A @ X)
    Y = complex_gaussian(rng, (6, 8))
    assert np.allclose(op.adjoint(Y), A.conj().T @ Y)


@pytest.mark.parametrize("case", CASES)
def test_block_matches_assembled_columns(rng, case):
    op = random_operator(rng, case)
    F = op.assemble()
    N, I = op.shape_in
    for i in range(I):
        block = op.block(i).matrix
        assert np.allclose(block, F[:, i * N:(i + 1) * N], atol=1e-12)
    with pytest.raises(IndexError):
        op.block(I)


@pytest.mark.parametrize("case", CASES)
def test_column_norms_match_dense(rng, case):
    op = random_operator(rng, case)
    F = op.assemble()
    N, I = op.shape_in
    dense = np.linalg.norm(F, axis=0).reshape(N, I, order="F") ** 2
    assert np.allclose(op.column_norms_sq(), dense, rtol=1e-10)


@pytest.mark.parametrize("case", CASES)
def test_block_image_norms_match_dense(rng, case):
    op = random_operator(rng, case)
    N, I = op.shape_in
    P = 3
    D = complex_gaussian(rng, (N, P))
    dense = np.empty((P, I))
    for i in range(I):
        Fi = op.block(i).matrix
        dense[:, i] = np.linalg.norm(Fi @ D, axis=0) ** 2
    assert np.allclose(op.block_image_norms_sq(D), dense, rtol=1e-10)


@pytest.mark.parametrize("case", CASES)
def test_singular_values_match_dense(rng, case):
    op = random_operator(rng, case)
    import scipy.linalg

    dense = scipy.linalg.svdvals(op.assemble())
    sv = op.singular_values()
    assert np.allclose(np.sort(sv)[::-1][: len(dense)], dense, atol=1e-8)
    smax, smin, smin_nz = op.spectral_bounds()
    assert smax == pytest.approx(dense[0])
    n_full = min(op.assemble().shape)
    assert smin == pytest.approx(dense[n_full - 1] if len(dense) >= n_full else 0.0)
    assert smin_nz > 0


def test_rank_deficient_spectral_bounds(rng):
    # column of zeros in A makes F singular: smin = 0 but smin_nz > 0
    A = complex_gaussian(rng, (6, 4))
    A[:, 2] = 0.0
    op = MixingOperator.time_invariant(A, np.eye(5))
    smax, smin, smin_nz = op.spectral_bounds()
    assert smin <= 1e-12
    assert 0 < smin_nz < smax


def test_shape_validation(rng):
    op = random_operator(rng, "general")
    with pytest.raises(DimensionError):
        op.apply(np.zeros((3, 3)))
    with pytest.raises(DimensionError):
        op.adjoint(np.zeros((2, 2)))
    with pytest.raises(DimensionError):
        MixingOperator.general(
            [(np.zeros((3, 2)), np.zeros((4, 5))), (np.zeros((3, 3)), np.zeros((4, 5)))]
        )
    with pytest.raises(ValueError):
        MixingOperator.general([])


def test_selector_constructor_builds_selectors(rng):
    op = MixingOperator.snapshot_selectors(
        [complex_gaussian(rng, (5, 3)) for _ in range(4)]
    )
    assert op.case_tag is OperatorCase.SNAPSHOT_SELECTORS
    assert op.K == 4
    assert op.shape_out == (5, 4)
    X = complex_gaussian(rng, (3, 4))
    out = op.apply(X)
    for i, (A, _) in enumerate(op.components):
        assert np.allclose(out[:, i], A @ X[:, i])
