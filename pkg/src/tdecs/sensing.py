"""Discrete-equivalent Random Demodulator, measurement noise and plain decimation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True, eq=False)
class MeasurementMatrix:
    """M x N signed integrate-and-dump matrix.

    Row m sums Nyquist samples ``[edges[m], edges[m+1])`` weighted by the
    chipping signs. ``entries`` is the dense {-1, 0, +1} matrix.
    """

    signs: np.ndarray
    edges: np.ndarray

    @property
    def N(self) -> int:
        return self.signs.size

    @property
    def M(self) -> int:
        return self.edges.size - 1

    @property
    def kappa(self) -> float:
        return self.M / self.N

    @property
    def entries(self) -> np.ndarray:
        out = np.zeros((self.M, self.N))
        rows = np.repeat(np.arange(self.M), np.diff(self.edges))
        out[rows, np.arange(self.N)] = self.signs
        return out

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Phi @ x for a vector or for each column of a matrix."""
        x = np.asarray(x)
        if x.shape[0] != self.N:
            raise ParameterError(f"expected leading dimension {self.N}, got {x.shape}")
        signed = x * (self.signs if x.ndim == 1 else self.signs[:, None])
        return np.add.reduceat(signed, self.edges[:-1], axis=0)


def block_edges(N: int, M: int) -> np.ndarray:
    """Floor-rule block boundaries floor(m*N/M) for m = 0..M."""
    return (np.arange(M + 1) * N) // M


def random_demodulator(N: int, kappa: float, rng: np.random.Generator) -> MeasurementMatrix:
    M = int(round(kappa * N))
    if not 0 < kappa <= 1 or M < 1 or M > N:
        raise ParameterError(f"kappa={kappa!r} gives M={M} for N={N}")
    signs = rng.choice(np.array([-1.0, 1.0]), size=N)
    return MeasurementMatrix(signs=signs, edges=block_edges(N, M))


def measure(phi: MeasurementMatrix, f: np.ndarray) -> np.ndarray:
    f = np.asarray(f)
    if f.shape != (phi.N,):
        raise ParameterError(f"signal length {f.shape} does not match N={phi.N}")
    return phi.apply(f)


@dataclass(frozen=True)
class NoiseSpec:
    snr_db: float = np.inf
    enabled: bool = False

    def __post_init__(self):
        if self.enabled and (self.snr_db is None or np.isnan(self.snr_db)):
            raise ParameterError("snr_db must be a number when noise is enabled")


def noise_variance(y: np.ndarray, snr_db: float) -> float:
    """Per-sample noise variance giving the requested SNR for measurement y."""
    power = np.vdot(y, y).real / y.size
    if power <= 0:
        raise ParameterError("cannot set an SNR for an all-zero measurement")
    return power / 10 ** (snr_db / 10)


def complex_white(rng: np.random.Generator, n: int) -> np.ndarray:
    """Unit-variance circularly-symmetric complex Gaussian samples."""
    return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)


def add_noise(y: np.ndarray, spec: NoiseSpec, rng=None, unit_noise=None) -> np.ndarray:
    """Return y plus complex white Gaussian noise at ``spec.snr_db``.

    ``unit_noise`` may supply a pre-drawn unit-variance realization so that
    several estimators see the same noise; otherwise it is drawn from rng.
    """
    y = np.asarray(y)
    if not spec.enabled:
        return y
    sigma2 = noise_variance(y, spec.snr_db)
    if unit_noise is None:
        unit_noise = complex_white(rng, y.size)
    return y + np.sqrt(sigma2) * unit_noise[: y.size]


def kept_indices(N: int, M: int) -> np.ndarray:
    if not 1 <= M <= N:
        raise ParameterError(f"need 1 <= M <= N, got M={M}, N={N}")
    return (np.arange(M) * N) // M


def downsample(f: np.ndarray, M: int) -> np.ndarray:
    """Keep samples floor(k*N/M), k = 0..M-1."""
    f = np.asarray(f)
    return f[kept_indices(f.size, M)]
