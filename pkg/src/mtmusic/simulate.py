"""Array snapshot simulation: X(n) = A S(n) + W(n).

Uniform linear array geometry, 4-QAM sources (independent or coherent
amplitude-weighted replicas of one waveform), and spherically invariant
compound-Gaussian noise (Gaussian, Cauchy, K, inverse-Gaussian texture)
at a prescribed generalized SNR. All randomness flows through counter-based
generators keyed by (seed, stream), so parallel trial generation is
schedule-independent and bitwise reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

NOISE_FAMILIES = ("gaussian", "cauchy", "k", "inverse-gaussian")

# Stream ids appended to the seed tuple so source and noise draws never share
# a generator state.
SOURCE_STREAM = 0
NOISE_STREAM = 1

_INV_SQRT2 = 1.0 / np.sqrt(2.0)


class InvalidShapeError(ValueError):
    """Texture shape parameter out of its valid range."""


@dataclass(frozen=True)
class UlaGeometry:
    """Uniform linear array: sensor count and element spacing in wavelengths."""

    num_sensors: int
    spacing_wavelengths: float = 0.5

    def __post_init__(self):
        if self.num_sensors < 2:
            raise ValueError("a ULA needs at least 2 sensors")
        if self.spacing_wavelengths <= 0:
            raise ValueError("spacing must be positive")


@dataclass(frozen=True)
class SourceConfig:
    """Source directions plus either per-source powers or coherent attenuations.

    Non-coherent mode (attenuations is None) draws independent 4-QAM symbols
    per source with the given powers. Coherent mode emits amplitude-weighted
    replicas of a single 4-QAM waveform of power base_power, one complex
    attenuation per source.
    """

    doas_deg: tuple[float, ...]
    powers: tuple[float, ...] | None = None
    attenuations: tuple[complex, ...] | None = None
    base_power: float = 1.0

    def __post_init__(self):
        doas = tuple(float(d) for d in self.doas_deg)
        object.__setattr__(self, "doas_deg", doas)
        if len(doas) == 0:
            raise ValueError("need at least one source")
        if any(not (-90.0 <= d < 90.0) for d in doas):
            raise ValueError("DOAs must lie in [-90, 90) degrees")
        if sorted(doas) != list(doas) or len(set(doas)) != len(doas):
            raise ValueError("DOAs must be sorted and distinct")
        q = len(doas)
        if self.attenuations is not None:
            att = tuple(complex(a) for a in self.attenuations)
            object.__setattr__(self, "attenuations", att)
            if len(att) != q:
                raise ValueError("one attenuation per source required")
            if any(a == 0 for a in att):
                raise ValueError("attenuations must be nonzero")
            if self.base_power <= 0:
                raise ValueError("base_power must be positive")
        else:
            powers = self.powers
            if powers is None:
                powers = (1.0,) * q
            powers = tuple(float(p) for p in powers)
            object.__setattr__(self, "powers", powers)
            if len(powers) != q:
                raise ValueError("one power per source required")
            if any(p <= 0 for p in powers):
                raise ValueError("source powers must be positive")

    @property
    def num_sources(self) -> int:
        return len(self.doas_deg)

    @property
    def coherent(self) -> bool:
        return self.attenuations is not None


@dataclass(frozen=True)
class NoiseConfig:
    """Compound-Gaussian noise family and isotropic dispersion scale.

    Per snapshot a positive texture draw scales an independent proper complex
    Gaussian vector with covariance dispersion * I. Texture families are
    normalized to mean 1 where the mean exists (K via Gamma(shape, 1/shape),
    inverse-Gaussian via Wald(1, shape)); the Cauchy family uses texture
    1/chi-square(1), the complex-t construction with one degree of freedom.
    """

    family: str
    dispersion: float = 1.0
    shape: float | None = None

    def __post_init__(self):
        if self.family not in NOISE_FAMILIES:
            raise ValueError(f"unknown noise family {self.family!r}")
        if self.dispersion <= 0:
            raise ValueError("noise dispersion must be positive")
        if self.family in ("k", "inverse-gaussian"):
            if self.shape is None or self.shape <= 0:
                raise InvalidShapeError(
                    f"{self.family} noise needs a positive shape parameter"
                )


@dataclass(frozen=True)
class SnapshotBatch:
    """One simulated batch: p x N array output plus generating metadata."""

    x: np.ndarray
    geometry: UlaGeometry
    truth: SourceConfig
    noise: NoiseConfig
    gsnr_db: float
    seed: tuple[int, ...] = field(default=(0,))

    @property
    def num_snapshots(self) -> int:
        return self.x.shape[1]


def derive_rng(seed, *stream: int) -> np.random.Generator:
    """Counter-based generator keyed by the seed tuple plus stream ids.

    Distinct key tuples give statistically independent streams regardless of
    the order generators are created or consumed in.
    """
    if isinstance(seed, (int, np.integer)):
        key = (int(seed),) + tuple(stream)
    else:
        key = tuple(int(s) for s in seed) + tuple(stream)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def steering_matrix(geom: UlaGeometry, doas_deg) -> np.ndarray:
    """Array response columns for the given directions.

    Args:
        geom: Array geometry.
        doas_deg: Angles in degrees, each in [-90, 90).

    Returns:
        p x q complex matrix; column k is
        [1, e^{-i 2 pi (d/lambda) sin(theta_k)}, ..., e^{-i 2 pi (p-1)(d/lambda) sin(theta_k)}]^T.
    """
    doas = np.atleast_1d(np.asarray(doas_deg, dtype=float))
    if np.any(doas < -90.0) or np.any(doas >= 90.0):
        raise ValueError("DOAs must lie in [-90, 90) degrees")
    phase = -2.0 * np.pi * geom.spacing_wavelengths * np.sin(np.deg2rad(doas))
    sensors = np.arange(geom.num_sensors)
    return np.exp(1j * np.outer(sensors, phase))


def _qam_symbols(rng: np.random.Generator, shape) -> np.ndarray:
    bits = rng.integers(0, 2, size=(2,) + tuple(shape))
    return ((2 * bits[0] - 1) + 1j * (2 * bits[1] - 1)) * _INV_SQRT2


def sample_sources(cfg: SourceConfig, n_snapshots: int, rng: np.random.Generator) -> np.ndarray:
    """Draw the q x N source matrix for one batch.

    Non-coherent: independent unit-modulus 4-QAM symbols per source, scaled to
    the per-source powers. Coherent: one 4-QAM waveform of power base_power,
    replicated through the complex attenuations.
    """
    if n_snapshots < 1:
        raise ValueError("need at least one snapshot")
    q = cfg.num_sources
    if cfg.coherent:
        waveform = _qam_symbols(rng, (n_snapshots,)) * np.sqrt(cfg.base_power)
        return np.asarray(cfg.attenuations)[:, None] * waveform[None, :]
    symbols = _qam_symbols(rng, (q, n_snapshots))
    return np.sqrt(np.asarray(cfg.powers))[:, None] * symbols


def sample_textures(cfg: NoiseConfig, n_snapshots: int, rng: np.random.Generator) -> np.ndarray:
    """Draw the positive texture scale for each snapshot."""
    if cfg.family == "gaussian":
        return np.ones(n_snapshots)
    if cfg.family == "cauchy":
        return 1.0 / rng.chisquare(1.0, size=n_snapshots)
    if cfg.family == "k":
        return rng.gamma(shape=cfg.shape, scale=1.0 / cfg.shape, size=n_snapshots)
    # inverse-Gaussian, mean 1 so the dispersion scale is untouched on average
    return rng.wald(1.0, cfg.shape, size=n_snapshots)


def sample_noise(cfg: NoiseConfig, p: int, n_snapshots: int, rng: np.random.Generator) -> np.ndarray:
    """Draw the p x N compound-Gaussian noise matrix.

    Textures are drawn first, then the Gaussian speckle, so the draw sequence
    is fixed for a given generator state.
    """
    if n_snapshots < 1:
        raise ValueError("need at least one snapshot")
    textures = sample_textures(cfg, n_snapshots, rng)
    scale = np.sqrt(cfg.dispersion / 2.0)
    speckle_re = rng.standard_normal((p, n_snapshots))
    speckle_im = rng.standard_normal((p, n_snapshots))
    speckle = scale * (speckle_re + 1j * speckle_im)
    return np.sqrt(textures)[None, :] * speckle


def scale_to_gsnr(sources: SourceConfig, noise: NoiseConfig, gsnr_db: float) -> SourceConfig:
    """Rescale source powers so mean source power / dispersion hits the GSNR.

    GSNR = 10 log10( (1/q) sum_k sigma2_k / dispersion ), with
    sigma2_k = powers[k] in non-coherent mode and base_power * |xi_k|^2 in
    coherent mode. Relative power ratios between sources are preserved.
    """
    target_mean = noise.dispersion * 10.0 ** (gsnr_db / 10.0)
    q = sources.num_sources
    if sources.coherent:
        total = float(np.sum(np.abs(np.asarray(sources.attenuations)) ** 2))
        return replace(sources, base_power=q * target_mean / total)
    powers = np.asarray(sources.powers)
    scaled = powers * (target_mean / powers.mean())
    return replace(sources, powers=tuple(float(p) for p in scaled))


def synthesize_snapshots(
    geom: UlaGeometry,
    sources: SourceConfig,
    noise: NoiseConfig,
    gsnr_db: float,
    n_snapshots: int,
    seed,
) -> SnapshotBatch:
    """Simulate one batch X = A S + W at the requested GSNR.

    Args:
        geom: Array geometry (p sensors).
        sources: Source directions and mode; powers are rescaled so the GSNR
            identity holds exactly by construction.
        noise: Noise family and dispersion.
        gsnr_db: Generalized SNR in dB.
        n_snapshots: Number of snapshots N.
        seed: Integer or tuple of integers keying this batch's randomness.

    Returns:
        SnapshotBatch with the realized (rescaled) source config as truth.
    """
    if sources.num_sources >= geom.num_sensors:
        raise ValueError("need fewer sources than sensors")
    scaled = scale_to_gsnr(sources, noise, gsnr_db)
    a = steering_matrix(geom, scaled.doas_deg)
    s = sample_sources(scaled, n_snapshots, derive_rng(seed, SOURCE_STREAM))
    w = sample_noise(noise, geom.num_sensors, n_snapshots, derive_rng(seed, NOISE_STREAM))
    x = a @ s + w
    key = (int(seed),) if isinstance(seed, (int, np.integer)) else tuple(int(v) for v in seed)
    return SnapshotBatch(
        x=x, geometry=geom, truth=scaled, noise=noise, gsnr_db=float(gsnr_db), seed=key
    )
