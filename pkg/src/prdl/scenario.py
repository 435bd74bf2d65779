"""Seeded synthetic scenario generation for the three mixing cases.

Case 1: one Gaussian spatial mixing matrix, no temporal mixing (B = I).
Case 2: one Gaussian spatial mixing matrix, short-time-Fourier temporal mixing.
Case 3: an independent Gaussian spatial mixing matrix per snapshot.

Ground truth is retained: Gaussian atoms, exactly L nonzero Gaussian code
entries per column, magnitudes observed under additive real Gaussian noise at
a prescribed SNR with negative entries clamped to zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from prdl.operators import MixingOperator
from prdl.problem import ProblemInstance


@dataclass(frozen=True)
class Scenario:
    inst: ProblemInstance
    D_true: np.ndarray
    Z_true: np.ndarray
    X_true: np.ndarray
    noise: np.ndarray
    case: int
    L: int
    snr_db: float
    seed: int

    @property
    def has_temporal_mixing(self):
        return self.case == 2


def _complex_gaussian(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def stft_matrix(I):
    """Temporal mixing matrix (I x 5I) of windowed DFT atoms.

    Five frames starting at -I/4, 0, I/4, I/2, 3I/4, each a rectangular
    window of length I/2 zero-padded outside [0, I), followed by an I-point
    DFT, giving temporal oversampling 5.
    """
    if I % 4 != 0:
        raise ValueError(f"snapshot count I={I} must be divisible by 4")
    window = I // 2
    starts = [-I // 4, 0, I // 4, I // 2, 3 * I // 4]
    t = np.arange(I)
    cols = []
    for start in starts:
        mask = ((t >= start) & (t < start + window)).astype(np.float64)
        for freq in range(I):
            cols.append(mask * np.exp(-2j * np.pi * freq * t / I))
    return np.stack(cols, axis=1)


def _make_operator(case, rng, N, I, M1):
    if case == 1:
        A = _complex_gaussian(rng, (M1, N))
        return MixingOperator.time_invariant(A, np.eye(I))
    if case == 2:
        A = _complex_gaussian(rng, (M1, N))
        return MixingOperator.time_invariant(A, stft_matrix(I))
    if case == 3:
        return MixingOperator.snapshot_selectors(
            [_complex_gaussian(rng, (M1, N)) for _ in range(I)]
        )
    raise ValueError(f"unknown mixing case {case}")


def generate(
    case,
    N,
    P,
    I,
    M1,
    L,
    snr_db,
    seed,
    lam=0.0,
    mu=0.0,
    rho=0.0,
    normalize_atoms=False,
):
    """Draw a seeded scenario with ground truth.

    snr_db = inf gives exact noiseless magnitudes.  The SNR convention is
    10*log10(||signal magnitudes||_F^2 / (M1*M2*sigma^2)) with sigma^2 the
    per-entry noise variance; the noise is real Gaussian added to the
    magnitudes, then negatives are clamped.
    """
    if not 1 <= P < I:
        raise ValueError("need 1 <= P < I")
    if not 1 <= L <= P:
        raise ValueError("need 1 <= L <= P")
    rng = np.random.default_rng(seed)
    op = _make_operator(case, rng, N, I, M1)
    D_true = _complex_gaussian(rng, (N, P))
    if normalize_atoms:
        D_true = D_true / np.linalg.norm(D_true, axis=0, keepdims=True)
    Z_true = np.zeros((P, I), dtype=np.complex128)
    for i in range(I):
        support = rng.choice(P, size=L, replace=False)
        Z_true[support, i] = _complex_gaussian(rng, L)
    X_true = D_true @ Z_true
    magnitudes = np.abs(op.apply(X_true))
    M1_, M2 = op.shape_out
    if np.isinf(snr_db):
        noise = np.zeros((M1_, M2))
    else:
        signal_power = np.sum(magnitudes**2) / (M1_ * M2)
        sigma = np.sqrt(signal_power / 10.0 ** (snr_db / 10.0))
        noise = sigma * rng.standard_normal((M1_, M2))
    Y = np.maximum(0.0, magnitudes + noise)
    inst = ProblemInstance(Y=Y, op=op, P=P, lam=lam, mu=mu, rho=rho)
    return Scenario(
        inst=inst,
        D_true=D_true,
        Z_true=Z_true,
        X_true=X_true,
        noise=noise,
        case=case,
        L=L,
        snr_db=float(snr_db),
        seed=seed,
    )


# -- serialization ---------------------------------------------------------


def save(scenario, path):
    """Self-describing .npz container; complex arrays stored natively."""
    inst = scenario.inst
    meta = {
        "case": scenario.case,
        "L": scenario.L,
        "snr_db": scenario.snr_db,
        "seed": scenario.seed,
        "P": inst.P,
        "lam": inst.lam,
        "mu": inst.mu,
        "rho": inst.rho,
        "case_tag": inst.op.case_tag.value,
        "K": inst.op.K,
    }
    arrays = {
        "Y": inst.Y,
        "D_true": scenario.D_true,
        "Z_true": scenario.Z_true,
        "X_true": scenario.X_true,
        "noise": scenario.noise,
        "meta": np.array(json.dumps(meta)),
    }
    for k, (A, B) in enumerate(inst.op.components):
        arrays[f"A_{k}"] = A
        arrays[f"B_{k}"] = B
    np.savez_compressed(path, **arrays)


def load(path):
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        comps = [(data[f"A_{k}"], data[f"B_{k}"]) for k in range(meta["K"])]
        tag = meta["case_tag"]
        if tag == "time_invariant":
            op = MixingOperator.time_invariant(*comps[0])
        elif tag == "snapshot_selectors":
            op = MixingOperator.snapshot_selectors([A for A, _ in comps])
        else:
            op = MixingOperator.general(comps)
        inst = ProblemInstance(
            Y=data["Y"], op=op, P=meta["P"],
            lam=meta["lam"], mu=meta["mu"], rho=meta["rho"],
        )
        return Scenario(
            inst=inst,
            D_true=data["D_true"],
            Z_true=data["Z_true"],
            X_true=data["X_true"],
            noise=data["noise"],
            case=meta["case"],
            L=meta["L"],
            snr_db=meta["snr_db"],
            seed=meta["seed"],
        )
