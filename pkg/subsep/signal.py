"""
Signal containers, CSV ingestion/emission, synthetic scenarios and the
discrete derivative used by the curvature rule.
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import ParameterError, SignalFormatError, SizeError

logger = logging.getLogger(__name__)

# Relative tolerance on the spacing of the t column.
SPACING_RTOL = 1e-9

NOISE_STREAM = 0
BROADBAND_STREAM = 1


def _frozen_array(values) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Signal:
    """
    Uniformly sampled real trace.

    Attributes:
        samples: Sample values (read-only array).
        dt: Sample interval in seconds.
        t0: Time of the first sample in seconds.
    """

    samples: np.ndarray
    dt: float = 1.0
    t0: float = 0.0

    def __post_init__(self):
        samples = _frozen_array(self.samples)
        if samples.ndim != 1:
            raise SizeError(f"samples must be one-dimensional, got shape {samples.shape}")
        if samples.size < 2:
            raise SizeError(f"a signal needs at least 2 samples, got {samples.size}")
        if not np.all(np.isfinite(samples)):
            bad = int(np.flatnonzero(~np.isfinite(samples))[0])
            raise ParameterError(f"sample {bad} is not finite")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ParameterError(f"dt must be positive and finite, got {self.dt}")
        if not np.isfinite(self.t0):
            raise ParameterError(f"t0 must be finite, got {self.t0}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "t0", float(self.t0))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def length(self) -> int:
        return self.samples.size

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.length)

    @property
    def duration(self) -> float:
        """Distance between the first and last sample, d - c."""
        return self.dt * (self.length - 1)

    def replace(self, samples) -> "Signal":
        """Same time axis, new values."""
        return Signal(samples, self.dt, self.t0)


def central_difference(s: Signal) -> Signal:
    """
    First derivative on the sample grid: central differences inside,
    first-order one-sided differences at both ends.
    """
    if s.length < 3:
        raise SizeError(f"central_difference needs at least 3 samples, got {s.length}")
    return s.replace(np.gradient(s.samples, s.dt, edge_order=1))


class SynthSpec(BaseModel):
    """Parameters of a seeded synthetic scenario."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    length: int = Field(default=403, ge=2)
    seed: int = Field(default=0, ge=0)
    noise_n_max: int = Field(default=21, ge=0)
    noise_amplitude: float = Field(default=1.0, ge=0)
    wavelet_count: int = Field(default=8, ge=1)
    wavelet_width_range: Tuple[float, float] = (1.5, 3.0)
    wavelet_amplitude: float = Field(default=1.0, gt=0)
    dt: float = Field(default=1.0, gt=0)
    t0: float = 0.0

    @model_validator(mode="after")
    def _check_ranges(self) -> "SynthSpec":
        if 2 * self.noise_n_max >= self.length:
            raise ValueError(
                f"noise_n_max={self.noise_n_max} aliases on {self.length} samples "
                f"(must be < length/2)"
            )
        low, high = self.wavelet_width_range
        if not (0 < low <= high):
            raise ValueError(f"wavelet_width_range must satisfy 0 < min <= max, got {(low, high)}")
        return self


@dataclass(frozen=True)
class Scenario:
    noise: Signal
    signal: Signal
    mixed: Signal


def _generator(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream,))))


def ricker(tau, width: float) -> np.ndarray:
    """Peak-normalised Ricker (Mexican hat) pulse, tau and width in samples."""
    x = np.asarray(tau, dtype=float) / width
    return (1.0 - x**2) * np.exp(-0.5 * x**2)


def synth_noise(spec: SynthSpec) -> Signal:
    """Random member of the low-frequency Fourier subspace, scaled to the requested RMS."""
    if 2 * spec.noise_n_max >= spec.length:
        raise ParameterError(f"noise_n_max={spec.noise_n_max} aliases on {spec.length} samples")
    rng = _generator(spec.seed, NOISE_STREAM)
    n = np.arange(spec.noise_n_max + 1)
    a = rng.standard_normal(n.size)
    b = rng.standard_normal(n.size)
    phase = 2.0 * np.pi * np.outer(np.arange(spec.length), n) / spec.length
    values = np.cos(phase) @ a + np.sin(phase) @ b

    rms = np.sqrt(np.mean(values**2))
    if spec.noise_amplitude == 0 or rms == 0:
        values = np.zeros(spec.length)
    else:
        values *= spec.noise_amplitude / rms
    return Signal(values, spec.dt, spec.t0)


def synth_broadband(spec: SynthSpec) -> Signal:
    """
    Train of Ricker wavelets standing in for a seismic trace.

    With the default width range (1.5 to 3 samples) the pulses peak well above
    the 21st Fourier bin of a 403-sample trace, so most of the energy lies
    outside the default noise band.
    """
    rng = _generator(spec.seed, BROADBAND_STREAM)
    low, high = spec.wavelet_width_range
    centers = rng.uniform(0.0, spec.length - 1, spec.wavelet_count)
    widths = rng.uniform(low, high, spec.wavelet_count)
    signs = rng.choice([-1.0, 1.0], spec.wavelet_count)
    magnitudes = rng.uniform(0.5, 1.0, spec.wavelet_count)

    index = np.arange(spec.length)
    values = np.zeros(spec.length)
    for center, width, amplitude in zip(centers, widths, signs * magnitudes):
        values += amplitude * ricker(index - center, width)
    return Signal(spec.wavelet_amplitude * values, spec.dt, spec.t0)


def synth_scenario(spec: SynthSpec) -> Scenario:
    noise = synth_noise(spec)
    signal = synth_broadband(spec)
    logger.debug("Synthesised scenario: length=%d seed=%d n_max=%d", spec.length, spec.seed, spec.noise_n_max)
    return Scenario(noise=noise, signal=signal, mixed=signal.replace(signal.samples + noise.samples))


PathLike = Union[str, Path]


def read_signal_csv(path: PathLike) -> Signal:
    """Read a `t,value` CSV with uniformly spaced, strictly increasing t."""
    with open(path, "r", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "value"]:
            raise SignalFormatError(f"{path}: expected header 't,value', got {header}")
        times, values = [], []
        for line_number, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise SignalFormatError(f"{path}:{line_number}: expected 2 columns, got {len(row)}")
            try:
                times.append(float(row[0]))
                values.append(float(row[1]))
            except ValueError:
                raise SignalFormatError(f"{path}:{line_number}: non-numeric cell in {row}") from None

    if len(times) < 2:
        raise SignalFormatError(f"{path}: need at least 2 samples, got {len(times)}")
    t = np.array(times)
    steps = np.diff(t)
    if np.any(steps <= 0):
        bad = int(np.flatnonzero(steps <= 0)[0]) + 1
        raise SignalFormatError(f"{path}: t is not strictly increasing at row {bad + 1}")
    dt = (t[-1] - t[0]) / (t.size - 1)
    deviation = np.abs(steps - dt)
    # steps between large abscissae are only known to a few ulps
    tolerance = max(SPACING_RTOL * dt, 4 * np.spacing(np.abs(t).max()))
    if np.any(deviation > tolerance):
        bad = int(np.argmax(deviation)) + 1
        raise SignalFormatError(f"{path}: non-uniform spacing near row {bad + 1}")
    return Signal(np.array(values), dt, t[0])


def write_signal_csv(path: PathLike, signal: Signal) -> None:
    """Write a signal with 17 significant digits per value."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["t", "value"])
        for t, value in zip(signal.times, signal.samples):
            writer.writerow([f"{t:.17g}", f"{value:.17g}"])
