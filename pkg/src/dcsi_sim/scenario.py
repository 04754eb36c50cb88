"""Physical setup: two-cell geometry, ULA steering vectors, angle-spread
spatial covariance matrices and pathloss attenuations.

All quantities are kept in linear units internally; dB inputs are converted
at the configuration boundary.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

# Default experiment setup: two TXs facing each other, K RXs on the
# semicircle between them.
DEFAULT_NUM_RX = 5
DEFAULT_ANTENNAS_PER_TX = (4, 4)
DEFAULT_TX_DISTANCE = 40.0          # m
DEFAULT_SPACING_RATIO = 0.5         # antenna spacing / wavelength
DEFAULT_ANGLE_SPREAD = np.pi / 8    # rad
DEFAULT_PATHLOSS_EXPONENT = 2.0
DEFAULT_NOISE_POWER_DBM = 0.0       # 0 dBm = 1 mW
DEFAULT_POWER_DBW = 10.0            # per-TX budget, 10 dBW = 10 W
DEFAULT_RHO1_DB = 0.0               # feedback SNR of TX 1
DEFAULT_FEEDBACK_BANDWIDTH = 1e3    # Hz
DEFAULT_COHERENCE_TIME = 5e-3       # s
DEFAULT_QUADRATURE_POINTS = 256


def dbm_to_watts(x_dbm: float) -> float:
    return 10.0 ** (x_dbm / 10.0) * 1e-3


def dbw_to_watts(x_dbw: float) -> float:
    return 10.0 ** (x_dbw / 10.0)


def epsilon_from_feedback_snr_db(rho_db: float) -> float:
    """CSI quality coefficient from the feedback SNR rho = (1-eps^2)/eps^2."""
    rho = 10.0 ** (rho_db / 10.0)
    return float(np.sqrt(1.0 / (1.0 + rho)))


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Scenario:
    """Immutable description of one experiment configuration."""

    num_tx: int
    num_rx: int
    antennas_per_tx: tuple[int, ...]
    antenna_spacing_ratio: float
    angle_spread: float
    mean_aods: np.ndarray           # (K, N), rad
    distances: np.ndarray           # (K, N), m
    pathloss_exponent: float
    attenuations: np.ndarray        # (K, N), beta_kn = r_kn^(-eta/2)
    noise_power: float              # W
    power_budgets: tuple[float, ...]
    csi_quality: tuple[float, ...]  # eps_n in [0, 1]
    error_covariances: tuple[np.ndarray, ...]  # per TX, M x M Hermitian PSD
    tx_distance: float
    feedback_bandwidth: float
    coherence_time: float

    def __post_init__(self):
        object.__setattr__(self, "mean_aods", _readonly(self.mean_aods))
        object.__setattr__(self, "distances", _readonly(self.distances))
        object.__setattr__(self, "attenuations", _readonly(self.attenuations))
        object.__setattr__(
            self, "error_covariances",
            tuple(_readonly(u) for u in self.error_covariances))
        if len(self.antennas_per_tx) != self.num_tx:
            raise ConfigurationError("antennas_per_tx must have num_tx entries")
        if len(self.power_budgets) != self.num_tx:
            raise ConfigurationError("power_budgets must have num_tx entries")
        if len(self.csi_quality) != self.num_tx:
            raise ConfigurationError("csi_quality must have num_tx entries")
        if any(not 0.0 <= e <= 1.0 for e in self.csi_quality):
            raise ConfigurationError("csi_quality entries must lie in [0, 1]")
        if any(p <= 0 for p in self.power_budgets):
            raise ConfigurationError("power_budgets must be positive")
        if self.noise_power <= 0:
            raise ConfigurationError("noise_power must be positive")
        m = self.num_antennas
        for n, u in enumerate(self.error_covariances):
            if u.shape != (m, m):
                raise ConfigurationError(
                    f"error_covariances[{n}] must be {m}x{m}")
            if np.max(np.abs(u - u.conj().T)) > 1e-10 * (1 + np.abs(u).max()):
                raise ConfigurationError(
                    f"error_covariances[{n}] must be Hermitian")
            w = np.linalg.eigvalsh((u + u.conj().T) / 2)
            if w.min() < -1e-10 * max(w.max(), 1.0):
                raise ConfigurationError(
                    f"error_covariances[{n}] must be PSD")
        beta = self.distances ** (-self.pathloss_exponent / 2.0)
        if not np.allclose(self.attenuations, beta, rtol=1e-10, atol=0):
            raise ConfigurationError(
                "attenuations inconsistent with distances and pathloss "
                "exponent (beta_kn must equal r_kn^(-eta/2))")

    @property
    def num_antennas(self) -> int:
        return int(sum(self.antennas_per_tx))

    def row_slice(self, n: int) -> slice:
        """Rows of the stacked channel/precoder belonging to TX n (0-based)."""
        start = int(sum(self.antennas_per_tx[:n]))
        return slice(start, start + self.antennas_per_tx[n])


@dataclass(frozen=True)
class CovarianceSet:
    """Per-link and per-RX channel covariance matrices."""

    per_link: tuple[tuple[np.ndarray, ...], ...]  # [k][n] -> (M_n, M_n)
    per_rx: tuple[np.ndarray, ...]                # [k] -> (M, M) block diagonal

    def __post_init__(self):
        object.__setattr__(
            self, "per_link",
            tuple(tuple(_readonly(s) for s in row) for row in self.per_link))
        object.__setattr__(
            self, "per_rx", tuple(_readonly(s) for s in self.per_rx))


def steering_vector(theta: float, m: int, delta: float) -> np.ndarray:
    """ULA steering vector a(theta), entry m = exp(-j 2 pi m delta cos theta)."""
    return np.exp(-2j * np.pi * np.arange(m) * delta * np.cos(theta))


def link_covariance(theta_bar: float, spread: float, beta: float, m: int,
                    delta: float,
                    quadrature_points: int = DEFAULT_QUADRATURE_POINTS
                    ) -> np.ndarray:
    """Spatial covariance beta^2 E[a(theta) a(theta)^H] for theta uniform on
    [theta_bar - spread, theta_bar + spread], via midpoint-rule quadrature."""
    q = int(quadrature_points)
    if q < 1:
        raise ConfigurationError("quadrature_points must be >= 1")
    if spread < 0:
        raise ConfigurationError("angle spread must be nonnegative")
    lo = theta_bar - spread
    thetas = lo + (np.arange(q) + 0.5) * (2.0 * spread / q) if spread > 0 \
        else np.full(q, theta_bar)
    a = np.exp(-2j * np.pi * np.outer(np.cos(thetas), np.arange(m)) * delta)
    sigma = (beta ** 2 / q) * (a.T @ a.conj())
    return (sigma + sigma.conj().T) / 2  # exact Hermitian symmetry


def assemble_covariances(scenario: Scenario,
                         quadrature_points: int = DEFAULT_QUADRATURE_POINTS
                         ) -> CovarianceSet:
    """All per-link covariances plus the block-diagonal per-RX matrices."""
    per_link = []
    per_rx = []
    m_total = scenario.num_antennas
    for k in range(scenario.num_rx):
        row = []
        big = np.zeros((m_total, m_total), dtype=complex)
        for n in range(scenario.num_tx):
            s = link_covariance(
                scenario.mean_aods[k, n], scenario.angle_spread,
                scenario.attenuations[k, n], scenario.antennas_per_tx[n],
                scenario.antenna_spacing_ratio, quadrature_points)
            row.append(s)
            sl = scenario.row_slice(n)
            big[sl, sl] = s
        per_link.append(tuple(row))
        per_rx.append(big)
    return CovarianceSet(per_link=tuple(per_link), per_rx=tuple(per_rx))


# Recognized override keys for build_default_scenario.
_OVERRIDE_KEYS = {
    "num_rx", "antennas_per_tx", "tx_distance", "antenna_spacing_ratio",
    "angle_spread", "pathloss_exponent", "noise_power_dbm", "noise_power",
    "power_dbw", "power_budgets", "rho1_db", "csi_quality",
    "feedback_bandwidth", "coherence_time", "error_cov_scale",
}


def build_default_scenario(overrides: dict | None = None) -> Scenario:
    """The two-TX evaluation setup, with optional parameter overrides.

    TX 1 sits at the origin and TX 2 at (d, 0), both ULAs along the x-axis.
    RX k is placed on the circle of radius d/2 centered at the TXs' midpoint,
    at polar angle phi_k equispaced in [pi/4, 3pi/4].
    """
    ov = dict(overrides or {})
    unknown = set(ov) - _OVERRIDE_KEYS
    if unknown:
        raise ConfigurationError(
            f"unrecognized scenario override(s): {sorted(unknown)}")

    num_rx = int(ov.pop("num_rx", DEFAULT_NUM_RX))
    antennas = tuple(int(a) for a in ov.pop("antennas_per_tx",
                                            DEFAULT_ANTENNAS_PER_TX))
    num_tx = len(antennas)
    d = float(ov.pop("tx_distance", DEFAULT_TX_DISTANCE))
    delta = float(ov.pop("antenna_spacing_ratio", DEFAULT_SPACING_RATIO))
    spread = float(ov.pop("angle_spread", DEFAULT_ANGLE_SPREAD))
    eta = float(ov.pop("pathloss_exponent", DEFAULT_PATHLOSS_EXPONENT))
    if "noise_power" in ov:
        sigma2 = float(ov.pop("noise_power"))
        ov.pop("noise_power_dbm", None)
    else:
        sigma2 = dbm_to_watts(float(ov.pop("noise_power_dbm",
                                           DEFAULT_NOISE_POWER_DBM)))
    if "power_budgets" in ov:
        powers = tuple(float(p) for p in ov.pop("power_budgets"))
        ov.pop("power_dbw", None)
    else:
        powers = (dbw_to_watts(float(ov.pop("power_dbw",
                                            DEFAULT_POWER_DBW))),) * num_tx
    if "csi_quality" in ov:
        eps = tuple(float(e) for e in ov.pop("csi_quality"))
        ov.pop("rho1_db", None)
    else:
        eps1 = epsilon_from_feedback_snr_db(
            float(ov.pop("rho1_db", DEFAULT_RHO1_DB)))
        eps = (eps1,) + (0.0,) * (num_tx - 1)
    bandwidth = float(ov.pop("feedback_bandwidth", DEFAULT_FEEDBACK_BANDWIDTH))
    coherence = float(ov.pop("coherence_time", DEFAULT_COHERENCE_TIME))
    cov_scale = ov.pop("error_cov_scale", "channel")
    assert not ov

    if num_tx != 2:
        raise ConfigurationError(
            "the default geometry places exactly 2 TXs facing each other; "
            "construct Scenario directly for other layouts")
    if num_rx < 1:
        raise ConfigurationError("num_rx must be >= 1")
    if d <= 0:
        raise ConfigurationError("tx_distance must be positive")
    if not 0 <= spread <= np.pi:
        raise ConfigurationError("angle_spread must lie in [0, pi]")

    tx_pos = np.array([[0.0, 0.0], [d, 0.0]])
    phi = np.linspace(np.pi / 4, 3 * np.pi / 4, num_rx) if num_rx > 1 \
        else np.array([np.pi / 2])
    rx_pos = np.stack([d / 2 + (d / 2) * np.cos(phi),
                       (d / 2) * np.sin(phi)], axis=1)

    diff = rx_pos[:, None, :] - tx_pos[None, :, :]     # (K, N, 2)
    dist = np.linalg.norm(diff, axis=2)
    # AoD measured from each TX's array axis (the x-axis), in [0, pi].
    aods = np.arctan2(diff[:, :, 1], diff[:, :, 0])
    beta = dist ** (-eta / 2.0)

    m_total = int(sum(antennas))
    # CSI error covariance Upsilon = c * I.  The default scale c is the
    # average per-antenna channel power, so that csi_quality measures the
    # estimation noise relative to the channel it corrupts rather than in
    # absolute units that depend on the pathloss normalization.
    if cov_scale == "channel":
        c = float((np.asarray(antennas) * beta ** 2).sum()
                  / (num_rx * m_total))
    elif cov_scale == "unit":
        c = 1.0
    else:
        c = float(cov_scale)
        if c <= 0:
            raise ConfigurationError("error_cov_scale must be positive")
    upsilon = tuple(c * np.eye(m_total, dtype=complex) for _ in range(num_tx))

    return Scenario(
        num_tx=num_tx, num_rx=num_rx, antennas_per_tx=antennas,
        antenna_spacing_ratio=delta, angle_spread=spread, mean_aods=aods,
        distances=dist, pathloss_exponent=eta, attenuations=beta,
        noise_power=sigma2, power_budgets=powers, csi_quality=eps,
        error_covariances=upsilon, tx_distance=d,
        feedback_bandwidth=bandwidth, coherence_time=coherence)
