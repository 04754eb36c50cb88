"""RZF precoder blocks with exact per-TX power normalization, block assembly,
and the closed-form sum rate."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePrecoderError, NumericalDomainError, StructuralError
from .scenario import Scenario


@dataclass(frozen=True)
class PrecoderBlock:
    """One TX's precoding submatrix, normalized to its power budget."""

    tx_index: int
    matrix: np.ndarray  # (M_n, K)
    power: float


@dataclass(frozen=True)
class NetworkPrecoder:
    """The stacked network-wide precoding matrix and its per-TX blocks."""

    matrix: np.ndarray  # (M, K)
    blocks: tuple[PrecoderBlock, ...]


def rzf_directions(h_hat: np.ndarray, alphas: np.ndarray
                   ) -> tuple[np.ndarray, np.ndarray]:
    """F(alpha) = Hhat ((1-alpha) Hhat^H Hhat + alpha I)^(-1) for a grid of
    regularization factors.

    Returns (F, valid) with F of shape (A, M, K); valid[a] is False where the
    regularized system is singular (possible only at alpha = 0 with a
    rank-deficient Gram matrix).
    """
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    k = h_hat.shape[1]
    gram = h_hat.conj().T @ h_hat
    mats = ((1.0 - alphas)[:, None, None] * gram
            + alphas[:, None, None] * np.eye(k))
    rhs = np.broadcast_to(h_hat.conj().T, (len(alphas), k, h_hat.shape[0]))
    valid = np.ones(len(alphas), dtype=bool)
    try:
        y = np.linalg.solve(mats, rhs)
    except np.linalg.LinAlgError:
        y = np.zeros((len(alphas), k, h_hat.shape[0]), dtype=complex)
        for a in range(len(alphas)):
            try:
                y[a] = np.linalg.solve(mats[a], h_hat.conj().T)
            except np.linalg.LinAlgError:
                valid[a] = False
    # F = Hhat mats^{-1}; mats is Hermitian, so F = (mats^{-1} Hhat^H)^H.
    return y.conj().transpose(0, 2, 1), valid


def rzf_block(h_hat: np.ndarray, alpha: float, n: int, scenario: Scenario
              ) -> PrecoderBlock:
    """TX n's RZF submatrix from the estimate h_hat, scaled so that its
    squared Frobenius norm equals the power budget exactly."""
    if not 0.0 <= alpha <= 1.0:
        raise NumericalDomainError("alpha must lie in [0, 1]")
    m = scenario.num_antennas
    if h_hat.shape != (m, scenario.num_rx):
        raise StructuralError(
            f"estimate must be {m}x{scenario.num_rx}, got {h_hat.shape}")
    f, valid = rzf_directions(h_hat, np.array([alpha]))
    if not valid[0]:
        raise NumericalDomainError(
            f"singular regularized system at alpha={alpha} "
            "(rank-deficient estimate at alpha=0)")
    rows = f[0][scenario.row_slice(n), :]
    nrm = np.linalg.norm(rows)
    if nrm == 0.0:
        raise DegeneratePrecoderError(
            f"TX {n + 1} precoder direction has zero norm")
    p = scenario.power_budgets[n]
    return PrecoderBlock(tx_index=n, matrix=np.sqrt(p) * rows / nrm, power=p)


def assemble(blocks: list[PrecoderBlock] | tuple[PrecoderBlock, ...]
             ) -> NetworkPrecoder:
    """Stack per-TX blocks vertically in TX order."""
    blocks = tuple(sorted(blocks, key=lambda b: b.tx_index))
    if [b.tx_index for b in blocks] != list(range(len(blocks))):
        raise StructuralError("blocks must cover TX indices 0..N-1 exactly once")
    k = blocks[0].matrix.shape[1]
    if any(b.matrix.shape[1] != k for b in blocks):
        raise StructuralError("all blocks must have the same number of columns")
    return NetworkPrecoder(matrix=np.vstack([b.matrix for b in blocks]),
                           blocks=blocks)


def rates_from_cross_gains(g: np.ndarray, sigma2: float) -> np.ndarray:
    """Sum rate from precomputed cross gains g[..., k, j] = h_k^H w_j."""
    p = np.square(g.real)
    p += np.square(g.imag)
    sig = np.ascontiguousarray(np.diagonal(p, axis1=-2, axis2=-1))
    interf = p.sum(axis=-1)
    interf -= sig
    interf += sigma2
    sig /= interf
    sig += 1.0
    return np.log2(sig, out=sig).sum(axis=-1)


def sum_rate(h: np.ndarray, w: np.ndarray, sigma2: float) -> float:
    """Closed-form sum rate sum_k log2(1 + SINR_k) in bits/s/Hz."""
    if sigma2 <= 0:
        raise NumericalDomainError("noise power must be positive")
    return float(rates_from_cross_gains(h.conj().T @ w, sigma2))
