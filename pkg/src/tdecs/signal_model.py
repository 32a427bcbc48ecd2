"""Known waveform, multi-pulse scenes and random scene draws."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import InfeasibleDrawError, ParameterError

MAX_DRAW_RETRIES = 10**6


@dataclass(frozen=True)
class ChirpSpec:
    """Raised-cosine windowed linear chirp and its Nyquist sampling grid.

    Attributes
    ----------
    f0 : float
        Center frequency in Hz.
    delta_f : float
        Swept bandwidth in Hz.
    T : float
        Pulse duration in seconds.
    fs : float
        Sampling frequency in Hz.
    N : int
        Record length in samples.
    """

    f0: float = 1e6
    delta_f: float = 40e6
    T: float = 1e-6
    fs: float = 50e6
    N: int = 500

    def __post_init__(self):
        for name in ("f0", "delta_f", "T", "fs"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ParameterError(f"{name} must be a positive finite number, got {value!r}")
        if int(self.N) != self.N or self.N < 2:
            raise ParameterError(f"N must be an integer >= 2, got {self.N!r}")
        if self.support > self.N:
            raise ParameterError(
                f"pulse support T*fs={self.T * self.fs:g} samples does not fit in N={self.N}")

    @property
    def delta(self) -> float:
        """Grid spacing in seconds."""
        return 1.0 / self.fs

    @property
    def support(self) -> int:
        """Number of samples spanned by one pulse, ceil(T*fs)."""
        return int(np.ceil(self.T * self.fs - 1e-9))

    @property
    def tau_max(self) -> float:
        """Largest delay for which the pulse is not truncated by the record end."""
        return (self.N - 1) / self.fs - self.T


def _raw_chirp(spec: ChirpSpec, t: np.ndarray) -> np.ndarray:
    T = spec.T
    tc = t - T / 2
    inside = (t > 0) & (t < T)
    phase = 2 * np.pi * (spec.f0 + spec.delta_f / (2 * T) * tc) * tc
    window = T / 2 * (1 + np.cos(2 * np.pi * tc / T))
    return np.where(inside, np.exp(1j * phase) * window, 0.0)


@lru_cache(maxsize=64)
def _energy_scale(spec: ChirpSpec) -> float:
    g0 = _raw_chirp(spec, np.arange(spec.N) / spec.fs)
    return 1.0 / np.linalg.norm(g0)


def _delay_in_samples(spec: ChirpSpec, tau: float) -> float:
    shift = tau * spec.fs
    # snap to the grid so that on-grid delays give bit-exact shifts
    nearest = np.round(shift)
    if abs(shift - nearest) < 1e-9:
        return float(nearest)
    return float(shift)


def chirp_template(spec: ChirpSpec, tau: float, circular: bool = False) -> np.ndarray:
    """Sample the unit-energy chirp delayed by ``tau`` seconds.

    Returns ``g(k/fs - tau)`` for ``k = 0..N-1``. The scale is fixed by the
    tau = 0 samples (unit l2 norm), so every shift reuses the same constant.
    Samples outside the open support ``(0, T)`` are exactly zero.

    With ``circular=True`` the shift wraps modulo N, matching the columns of
    the circulant dictionary. Both agree whenever the pulse ends inside the
    observation window.
    """
    if not np.isfinite(tau):
        raise ParameterError(f"tau must be finite, got {tau!r}")
    u = np.arange(spec.N) - _delay_in_samples(spec, tau)
    if circular:
        u = np.mod(u, spec.N)
    return _raw_chirp(spec, u / spec.fs) * _energy_scale(spec)


@dataclass(frozen=True)
class SparseScene:
    """Ground truth: K pulses with complex amplitudes and continuous delays."""

    amplitudes: tuple = ()
    delays: tuple = ()

    def __post_init__(self):
        if len(self.amplitudes) != len(self.delays):
            raise ParameterError("amplitudes and delays must have equal length")
        object.__setattr__(self, "amplitudes", tuple(complex(a) for a in self.amplitudes))
        object.__setattr__(self, "delays", tuple(float(t) for t in self.delays))

    @classmethod
    def from_pulses(cls, pulses):
        pulses = list(pulses)
        return cls(tuple(a for a, _ in pulses), tuple(t for _, t in pulses))

    @property
    def K(self) -> int:
        return len(self.delays)

    @property
    def pulses(self):
        return list(zip(self.amplitudes, self.delays))

    def validate(self, spec: ChirpSpec, rtol: float = 1e-9):
        """Raise ParameterError unless delays are in range and well spaced."""
        slack = rtol * spec.T
        for tau in self.delays:
            if tau < -slack or tau > spec.tau_max + slack:
                raise ParameterError(
                    f"delay {tau:g} s outside [0, {spec.tau_max:g}] s")
        d = np.sort(np.asarray(self.delays))
        if d.size > 1 and np.min(np.diff(d)) < spec.T - slack:
            raise ParameterError("pulses closer than the pulse duration T")


def synthesize(spec: ChirpSpec, scene: SparseScene) -> np.ndarray:
    """Noise-free Nyquist samples of the sum of delayed, scaled pulses."""
    scene.validate(spec)
    f = np.zeros(spec.N, dtype=complex)
    for alpha, tau in scene.pulses:
        f += alpha * chirp_template(spec, tau)
    return f


@dataclass(frozen=True)
class SceneDrawSpec:
    """Distribution of random scenes used by the Monte Carlo runs."""

    K: int = 3
    amp_range: tuple = (-10.0, 10.0)
    amp_min_abs: float = 1.0
    tau_range: tuple = (0.0, 8.98e-6)
    min_spacing: float = 1e-6

    def __post_init__(self):
        lo, hi = self.amp_range
        if self.K < 0:
            raise ParameterError("K must be non-negative")
        if not lo < hi:
            raise ParameterError("amp_range must be increasing")
        if self.amp_min_abs >= max(abs(lo), abs(hi)):
            raise ParameterError("amp_min_abs leaves no admissible amplitude")
        width = self.tau_range[1] - self.tau_range[0]
        if width < 0 or (self.K > 1 and self.K * self.min_spacing >= width):
            raise ParameterError(
                f"cannot place {self.K} pulses {self.min_spacing:g} s apart in {width:g} s")

    @classmethod
    def for_chirp(cls, spec: ChirpSpec, K: int = 3, **kwargs) -> "SceneDrawSpec":
        return cls(K=K, tau_range=(0.0, spec.tau_max), min_spacing=spec.T, **kwargs)


def _draw_parts(draw_spec: SceneDrawSpec, rng, n):
    lo, hi = draw_spec.amp_range
    out = np.empty(n)
    todo = np.arange(n)
    for _ in range(MAX_DRAW_RETRIES):
        if todo.size == 0:
            return out
        out[todo] = rng.uniform(lo, hi, size=todo.size)
        todo = todo[np.abs(out[todo]) < draw_spec.amp_min_abs]
    raise InfeasibleDrawError("amplitude rejection sampling did not terminate")


def draw_scene(draw_spec: SceneDrawSpec, rng: np.random.Generator) -> SparseScene:
    """Draw a random well-spaced scene.

    Real and imaginary parts are uniform on ``amp_range``, each redrawn
    until its magnitude reaches ``amp_min_abs``. The full delay set is
    redrawn until every pair is at least ``min_spacing`` apart.
    """
    K = draw_spec.K
    if K == 0:
        return SparseScene()
    re = _draw_parts(draw_spec, rng, K)
    im = _draw_parts(draw_spec, rng, K)
    lo, hi = draw_spec.tau_range
    for _ in range(MAX_DRAW_RETRIES):
        tau = rng.uniform(lo, hi, size=K)
        if K == 1 or np.min(np.diff(np.sort(tau))) >= draw_spec.min_spacing:
            return SparseScene(tuple(re + 1j * im), tuple(tau))
    raise InfeasibleDrawError(
        f"no admissible delay set after {MAX_DRAW_RETRIES} draws")
