"""Physical-layer pieces of the link model.

Three things the rest of the simulator needs from the radio: the
signal-to-interference-plus-noise ratio seen by the gateway, the
ambient-backscatter sample chain (modulate, per-bit energy average,
threshold decode), and a bit-error-rate sweep used by the reporting
harness.

Signal conventions: the ambient carrier x[n] is a complex baseband
sequence with unit average power unless stated otherwise. A tag bit B
multiplies the reflected path, so the received sample is

    y[n] = x[n] + zeta * B * x[n] + l[n]

with reflection coefficient zeta and additive circular complex noise
l[n]. A reflecting bit scales the expected per-sample power by
|1 + zeta|^2, which is what the energy detector thresholds on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SinrParams",
    "sinr",
    "constant_ambient",
    "gaussian_ambient",
    "modulate",
    "average_bit_power",
    "reflection_gain",
    "midpoint_threshold",
    "threshold_decode",
    "ber_records",
]


@dataclass(frozen=True)
class SinrParams:
    """Received-signal budget at the gateway.

    p_r:  received signal power, watts
    p_j:  jammer transmit power, watts
    phi:  jammer-to-gateway attenuation factor
    rho2: additive noise power
    """

    p_r: float
    p_j: float
    phi: float
    rho2: float

    def __post_init__(self) -> None:
        if self.p_r < 0 or self.p_j < 0 or self.phi < 0:
            raise ValueError("p_r, p_j and phi must be non-negative")
        if self.rho2 <= 0:
            raise ValueError("rho2 must be positive")


def sinr(params: SinrParams) -> float:
    """Ratio of received signal power to attenuated jamming plus noise."""
    return params.p_r / (params.phi * params.p_j + params.rho2)


def constant_ambient(num_samples: int) -> np.ndarray:
    """Unit-modulus carrier (all ones). Handy when exact decode matters."""
    return np.ones(num_samples, dtype=np.complex128)


def gaussian_ambient(num_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Circular complex Gaussian carrier with unit average power."""
    scale = 1.0 / np.sqrt(2.0)
    return scale * (rng.standard_normal(num_samples) + 1j * rng.standard_normal(num_samples))


def modulate(
    ambient: np.ndarray,
    bits: np.ndarray,
    spreading: int,
    zeta: complex,
    noise_sigma: float = 0.0,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Backscatter a bit sequence onto an ambient carrier.

    Each bit spans `spreading` consecutive carrier samples. The tag
    either reflects (bit 1, gain 1 + zeta) or stays silent (bit 0,
    gain 1). When noise_sigma > 0, circular complex noise with
    per-sample power noise_sigma^2 is added, which requires `rng`.
    """
    bits = np.asarray(bits)
    if spreading < 1:
        raise ValueError("spreading must be at least 1")
    if ambient.shape[0] != bits.shape[0] * spreading:
        raise ValueError("ambient length must equal len(bits) * spreading")
    gain = 1.0 + zeta * np.repeat(bits, spreading)
    y = ambient * gain
    if noise_sigma > 0.0:
        if rng is None:
            raise ValueError("noise_sigma > 0 requires an rng")
        scale = noise_sigma / np.sqrt(2.0)
        y = y + scale * (rng.standard_normal(y.shape[0]) + 1j * rng.standard_normal(y.shape[0]))
    return y


def average_bit_power(samples: np.ndarray, spreading: int) -> np.ndarray:
    """Mean |y|^2 over each bit's block of `spreading` samples."""
    if spreading < 1:
        raise ValueError("spreading must be at least 1")
    if samples.shape[0] % spreading != 0:
        raise ValueError("sample count must be a multiple of spreading")
    blocks = np.abs(samples.reshape(-1, spreading)) ** 2
    return blocks.mean(axis=1)


def reflection_gain(zeta: complex) -> float:
    """Power gain |1 + zeta|^2 of a reflecting bit."""
    return float(abs(1.0 + zeta) ** 2)


def midpoint_threshold(zeta: complex, ambient_power: float = 1.0) -> float:
    """Decision threshold halfway between the expected bit powers.

    A silent bit averages `ambient_power`, a reflecting bit averages
    |1 + zeta|^2 * ambient_power, so the midpoint is their mean.
    """
    return 0.5 * (1.0 + reflection_gain(zeta)) * ambient_power


def threshold_decode(bit_powers: np.ndarray, threshold: float) -> np.ndarray:
    """Energy detection: power above the threshold reads as bit 1."""
    return (np.asarray(bit_powers) > threshold).astype(np.int64)


def ber_records(
    zeta: complex,
    noise_sigma: float,
    spreadings: list[int],
    bits_per_point: int,
    rng: np.random.Generator,
) -> list[dict]:
    """Empirical bit-error rate of the chain at several spreading factors.

    Uses a Gaussian ambient carrier and the midpoint threshold. Returns
    one record per spreading factor with the raw error count, so a
    caller can attach binomial error bars.
    """
    records = []
    threshold = midpoint_threshold(zeta)
    for spreading in spreadings:
        bits = rng.integers(0, 2, bits_per_point)
        carrier = gaussian_ambient(bits_per_point * spreading, rng)
        y = modulate(carrier, bits, spreading, zeta, noise_sigma, rng)
        decoded = threshold_decode(average_bit_power(y, spreading), threshold)
        errors = int(np.sum(decoded != bits))
        records.append(
            {
                "spreading": spreading,
                "bits": bits_per_point,
                "errors": errors,
                "ber": errors / bits_per_point,
            }
        )
    return records
