"""Correlated complex Gaussian machinery: channel sampling, per-TX channel
estimates, conditional laws of the channel (and of other TXs' estimates)
given a local estimate, and a deterministic stream-based RNG contract.

Complex Gaussian convention: CN(0, S) has real and imaginary parts each with
covariance S/2 and zero pseudo-covariance.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalDomainError
from .scenario import CovarianceSet, Scenario

#: Identifier recorded in run manifests; reproducibility is guaranteed only
#: across installations using the same algorithm.
RNG_ALGORITHM = "numpy.random PCG64 via SeedSequence(master_seed, spawn_key=stream_path)"


@dataclass(frozen=True)
class RngStream:
    """A named, forkable random stream.

    The produced sequence is a pure function of (master_seed, stream_path),
    independent of scheduling order or worker count.
    """

    master_seed: int
    stream_path: tuple[int, ...] = ()

    def child(self, *path: int) -> "RngStream":
        return RngStream(self.master_seed, self.stream_path + tuple(path))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.master_seed,
                                    spawn_key=self.stream_path)
        return np.random.Generator(np.random.PCG64(ss))


def complex_normal(gen: np.random.Generator, shape) -> np.ndarray:
    """Standard circularly-symmetric complex Gaussian entries."""
    z = gen.standard_normal(tuple(shape) + (2,))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)


def psd_factor(sigma: np.ndarray, clamp_tol: float = 1e-10) -> np.ndarray:
    """Factor L with L L^H = sigma, via eigendecomposition with negative
    eigenvalues clamped to zero.

    Chosen over Cholesky because conditional covariances can be exactly
    singular (perfect CSI) or rank deficient (small angle spread).
    """
    sigma = np.asarray(sigma)
    scale = 1.0 + np.abs(sigma).max(initial=0.0)
    if np.max(np.abs(sigma - sigma.conj().T), initial=0.0) > 1e-10 * scale:
        raise NumericalDomainError("psd_factor requires a Hermitian matrix")
    w, u = np.linalg.eigh((sigma + sigma.conj().T) / 2)
    tr = max(float(np.real(np.trace(sigma))), 0.0)
    # tolerance relative to the matrix scale, with an absolute floor so a
    # cancellation-noise zero matrix is clamped rather than rejected
    tol = clamp_tol * max(tr, float(np.abs(w).max(initial=0.0))) + 1e-14
    if w.min(initial=0.0) < -tol:
        raise NumericalDomainError(
            f"matrix is not PSD within tolerance (min eigenvalue {w.min():.3e}, "
            f"trace {tr:.3e})")
    return u * np.sqrt(np.clip(w, 0.0, None))


@dataclass(frozen=True)
class ChannelDraw:
    """One realization of the true channel plus all per-TX estimates."""

    true_channel: np.ndarray                 # (M, K)
    estimates: tuple[np.ndarray, ...]        # per TX, (M, K)
    error_draws: tuple[np.ndarray, ...]      # per TX, (M, K)


@dataclass(frozen=True)
class ConditionalGaussian:
    """Mean, covariance and a sampling factor of a conditional channel law."""

    mean: np.ndarray      # (M,)
    cov: np.ndarray       # (M, M) Hermitian PSD
    factor: np.ndarray    # (M, M), factor @ factor^H = cov


def channel_factors(covs: CovarianceSet) -> list[np.ndarray]:
    """Sampling factors of the per-RX covariance matrices."""
    return [psd_factor(s) for s in covs.per_rx]


def sample_channel(covs: CovarianceSet, rng: RngStream,
                   factors: list[np.ndarray] | None = None) -> np.ndarray:
    """Draw H with independent columns h_k ~ CN(0, Sigma_k)."""
    if factors is None:
        factors = channel_factors(covs)
    gen = rng.generator()
    m = covs.per_rx[0].shape[0]
    k_total = len(covs.per_rx)
    g = complex_normal(gen, (m, k_total))
    h = np.empty((m, k_total), dtype=complex)
    for k, lk in enumerate(factors):
        h[:, k] = lk @ g[:, k]
    return h


def sample_estimates(h: np.ndarray, scenario: Scenario, rng: RngStream
                     ) -> ChannelDraw:
    """Generate the per-TX channel estimates
    Hhat^(n) = sqrt(1 - eps_n^2) H + eps_n E^(n), error columns iid
    CN(0, Upsilon^(n)), independent across TXs and RXs."""
    gen = rng.generator()
    estimates = []
    errors = []
    for n in range(scenario.num_tx):
        lu = psd_factor(scenario.error_covariances[n])
        e = lu @ complex_normal(gen, h.shape)
        eps = scenario.csi_quality[n]
        estimates.append(np.sqrt(1.0 - eps ** 2) * h + eps * e)
        errors.append(e)
    return ChannelDraw(true_channel=h, estimates=tuple(estimates),
                       error_draws=tuple(errors))


def _mmse_gain(sigma_k: np.ndarray, upsilon: np.ndarray, eps: float
               ) -> np.ndarray:
    """sqrt(1-eps^2) Sigma_k ((1-eps^2) Sigma_k + eps^2 Upsilon)^(-1)."""
    c = 1.0 - eps ** 2
    inner = c * sigma_k + eps ** 2 * upsilon
    try:
        # Sigma inner^{-1} = (inner^{-1} Sigma)^H for Hermitian arguments.
        return np.sqrt(c) * np.linalg.solve(inner, sigma_k).conj().T
    except np.linalg.LinAlgError as exc:
        raise NumericalDomainError(
            "singular matrix in the conditional-law computation "
            "(requires Upsilon positive definite with eps > 0, or Sigma_k "
            "positive definite)") from exc


def conditional_h_given_estimate(h_hat: np.ndarray, sigma_k: np.ndarray,
                                 upsilon: np.ndarray, eps: float
                                 ) -> ConditionalGaussian:
    """Law of the channel h_k given the local estimate hhat_k^(n)."""
    if eps == 0.0:
        z = np.zeros_like(sigma_k)
        return ConditionalGaussian(mean=np.array(h_hat, copy=True), cov=z,
                                   factor=z.copy())
    gain = _mmse_gain(sigma_k, upsilon, eps)
    mean = gain @ h_hat
    # Sigma_k - (1-eps^2) Sigma_k inner^{-1} Sigma_k = Sigma_k - sqrt(1-eps^2) gain Sigma_k
    cov = sigma_k - np.sqrt(1.0 - eps ** 2) * (gain @ sigma_k)
    cov = (cov + cov.conj().T) / 2
    return ConditionalGaussian(mean=mean, cov=cov, factor=psd_factor(cov))


def conditional_estimate_given_estimate(ell: int, n: int,
                                        cond_n: ConditionalGaussian,
                                        upsilon_ell: np.ndarray,
                                        eps_ell: float) -> ConditionalGaussian:
    """Law of TX ell's estimate hhat_k^(ell) given TX n's estimate, built from
    the conditional law of h_k given that estimate."""
    del ell, n  # indices only identify the pair; the law depends on the args
    c = 1.0 - eps_ell ** 2
    mean = np.sqrt(c) * cond_n.mean
    cov = c * cond_n.cov + eps_ell ** 2 * upsilon_ell
    cov = (cov + cov.conj().T) / 2
    return ConditionalGaussian(mean=mean, cov=cov, factor=psd_factor(cov))


def sample_conditional(cond: ConditionalGaussian, rng: RngStream
                       ) -> np.ndarray:
    """One draw mean + L g from the conditional law."""
    gen = rng.generator()
    g = complex_normal(gen, cond.mean.shape)
    return cond.mean + cond.factor @ g


class TxConditionalModel:
    """Precomputed conditional machinery of one TX, valid for a whole
    scenario: estimate-independent gains, covariances and factors.

    The per-draw conditional means follow by applying the gain to the
    estimate columns.
    """

    def __init__(self, scenario: Scenario, covs: CovarianceSet, n: int):
        self.scenario = scenario
        self.n = n
        eps = scenario.csi_quality[n]
        m = scenario.num_antennas
        self.eps = eps
        self.gains = []     # per RX k: mu_k = gain @ hhat_k
        self.covs = []      # per RX k: conditional covariance of h_k
        self.factors = []
        for k in range(scenario.num_rx):
            sig = covs.per_rx[k]
            if eps == 0.0:
                gain = np.eye(m, dtype=complex)
                cov = np.zeros((m, m), dtype=complex)
            else:
                gain = _mmse_gain(sig, scenario.error_covariances[n], eps)
                cov = sig - np.sqrt(1.0 - eps ** 2) * (gain @ sig)
                cov = (cov + cov.conj().T) / 2
            self.gains.append(gain)
            self.covs.append(cov)
            self.factors.append(psd_factor(cov))
        # Cross-TX estimate laws hhat^(ell) | hhat^(n):
        # mean scale sqrt(1-eps_ell^2), cov (1-eps_ell^2) cov_k + eps_ell^2 Ups.
        self.cross_scale = {}
        self.cross_factors = {}
        for ell in range(scenario.num_tx):
            if ell == n:
                continue
            e2 = scenario.csi_quality[ell]
            c = 1.0 - e2 ** 2
            self.cross_scale[ell] = np.sqrt(c)
            facs = []
            for k in range(scenario.num_rx):
                cov = c * self.covs[k] + e2 ** 2 * scenario.error_covariances[ell]
                facs.append(psd_factor((cov + cov.conj().T) / 2))
            self.cross_factors[ell] = facs

    def means(self, h_hat: np.ndarray) -> np.ndarray:
        """Conditional means of all channel columns given the estimate."""
        mu = np.empty_like(h_hat)
        for k in range(self.scenario.num_rx):
            mu[:, k] = self.gains[k] @ h_hat[:, k]
        return mu

    def sample_h_given(self, h_hat: np.ndarray, num: int,
                       gen: np.random.Generator) -> np.ndarray:
        """num draws of H from the per-column conditional laws, shape
        (num, M, K)."""
        mu = self.means(h_hat)
        out = np.empty((num, mu.shape[0], mu.shape[1]), dtype=complex)
        for k in range(self.scenario.num_rx):
            g = complex_normal(gen, (mu.shape[0], num))
            out[:, :, k] = (mu[:, [k]] + self.factors[k] @ g).T
        return out

    def sample_estimate_given(self, ell: int, h_hat: np.ndarray, num: int,
                              gen: np.random.Generator) -> np.ndarray:
        """num draws of TX ell's estimate given this TX's estimate, shape
        (num, M, K)."""
        mu = self.cross_scale[ell] * self.means(h_hat)
        facs = self.cross_factors[ell]
        out = np.empty((num, mu.shape[0], mu.shape[1]), dtype=complex)
        for k in range(self.scenario.num_rx):
            g = complex_normal(gen, (mu.shape[0], num))
            out[:, :, k] = (mu[:, [k]] + facs[k] @ g).T
        return out
