"""l1 tap recovery followed by MUSIC, plus the decimate-then-MUSIC control."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np
import scipy.linalg

from .errors import ConvergenceError, ParameterError
from .recovery import EstimationResult, lstsq
from .sensing import MeasurementMatrix
from .signal_model import chirp_template


class L1Mode(enum.Enum):
    EQUALITY = "equality"
    DENOISING = "denoising"


class L1Method(enum.Enum):
    INTERIOR_POINT = "interior-point"
    ADMM = "admm"


@dataclass(frozen=True)
class L1SolverConfig:
    """Basis pursuit (equality) or basis pursuit denoising settings.

    ``method`` picks the conic interior-point backend (default) or the
    first-order ADMM iteration. ``rho`` is the ADMM penalty relative to
    ``1 / max|A^H y|``, which makes that iteration invariant to the scale
    of y.
    """

    mode: L1Mode = L1Mode.EQUALITY
    epsilon: float = 0.0
    max_iterations: int = 5000
    tolerance: float = 1e-8
    method: L1Method = L1Method.INTERIOR_POINT
    rho: float = 20.0

    def __post_init__(self):
        object.__setattr__(self, "mode", L1Mode(self.mode))
        object.__setattr__(self, "method", L1Method(self.method))
        if self.epsilon < 0:
            raise ParameterError("epsilon must be non-negative")
        if self.tolerance <= 0 or self.max_iterations < 1 or self.rho <= 0:
            raise ParameterError("tolerance, max_iterations and rho must be positive")

    @property
    def radius(self) -> float:
        return self.epsilon if self.mode is L1Mode.DENOISING else 0.0


def bpdn_epsilon(M: int, sigma2: float) -> float:
    """Residual budget for a known per-sample noise variance.

    Lower confidence bound of the noise norm: the true noise almost always
    exceeds it, so the fit keeps the small off-grid side taps instead of
    shrinking them away.
    """
    return float(np.sqrt(M * sigma2) * max(0.0, 1 - 2 * np.sqrt(2 / M)))


@dataclass
class SolverTrace:
    """Per-iteration diagnostics of :func:`l1_reconstruct`.

    ``fixed_point_residual`` is the squared change of the splitting
    variables and scaled duals between iterations; ADMM guarantees this
    sequence never increases.
    """

    l1_norm: list = field(default_factory=list)
    fixed_point_residual: list = field(default_factory=list)
    iterations: int = 0


def _soft(v, t):
    mag = np.abs(v)
    return v * np.maximum(1 - t / np.maximum(mag, 1e-300), 0.0)


def _project_ball(v, radius):
    if radius == 0:
        return np.zeros_like(v)
    n = np.linalg.norm(v)
    return v if n <= radius else v * (radius / n)


def l1_reconstruct(y, compressed_dict, cfg: L1SolverConfig = L1SolverConfig(), trace=None):
    """Minimize ||x||_1 subject to ||A x - y||_2 <= epsilon, A = compressed_dict.

    Because the dictionary is square and invertible, the minimizer is the
    tap vector itself and no pseudo-inverse is formed. ``trace`` (a
    SolverTrace) is only filled by the ADMM method.

    Raises ConvergenceError, holding the best iterate, when the solver
    stops short of ``cfg.tolerance``.
    """
    A = np.asarray(compressed_dict)
    y = np.asarray(y, dtype=complex)
    M, N = A.shape
    if y.shape != (M,):
        raise ParameterError(f"y has shape {y.shape}, expected ({M},)")
    if not np.any(y):
        return np.zeros(N, dtype=complex)
    if cfg.method is L1Method.ADMM:
        return _l1_admm(A, y, cfg, trace)
    return _l1_conic(A, y, cfg)


def _l1_conic(A, y, cfg):
    x = cp.Variable(A.shape[1], complex=True)
    if cfg.radius > 0:
        constraints = [cp.norm(A @ x - y, 2) <= cfg.radius]
    else:
        constraints = [A @ x == y]
    problem = cp.Problem(cp.Minimize(cp.norm1(x)), constraints)
    tol = cfg.tolerance
    try:
        problem.solve(solver=cp.CLARABEL, max_iter=cfg.max_iterations,
                      tol_gap_abs=tol, tol_gap_rel=tol, tol_feas=tol)
    except cp.error.SolverError as exc:
        raise ConvergenceError(str(exc), best=None, iterations=cfg.max_iterations) from exc
    if problem.status != cp.OPTIMAL:
        raise ConvergenceError(f"interior-point solver ended with status {problem.status}",
                               best=x.value, iterations=cfg.max_iterations)
    return np.asarray(x.value, dtype=complex)


def _l1_admm(A, y, cfg, trace):
    # splitting z = x, w = A x; x-update through the Woodbury identity
    M, N = A.shape
    AH = A.conj().T
    scale = np.max(np.abs(AH @ y))
    rho = cfg.rho / scale
    radius = cfg.radius
    chol = scipy.linalg.cho_factor(np.eye(M) + A @ AH)

    def solve_x(v):
        return v - AH @ scipy.linalg.cho_solve(chol, A @ v)

    z = AH @ scipy.linalg.cho_solve(chol, y)
    w = A @ z
    u1 = np.zeros(N, dtype=complex)
    u2 = np.zeros(M, dtype=complex)
    x = z
    for k in range(1, cfg.max_iterations + 1):
        x_new = solve_x(z - u1 + AH @ (w - u2))
        Ax = A @ x_new
        z_new = _soft(x_new + u1, 1 / rho)
        w_new = y + _project_ball(Ax + u2 - y, radius)
        du1 = x_new - z_new
        du2 = Ax - w_new
        u1 = u1 + du1
        u2 = u2 + du2
        if trace is not None:
            trace.l1_norm.append(float(np.sum(np.abs(z_new))))
            trace.fixed_point_residual.append(float(
                np.vdot(z_new - z, z_new - z).real + np.vdot(w_new - w, w_new - w).real
                + np.vdot(du1, du1).real + np.vdot(du2, du2).real))
            trace.iterations = k
        change = np.linalg.norm(x_new - x)
        feas = np.sqrt(np.vdot(du1, du1).real + np.vdot(du2, du2).real)
        x, z, w = x_new, z_new, w_new
        if max(change, feas) <= cfg.tolerance * np.linalg.norm(x):
            return z
    raise ConvergenceError(
        f"ADMM did not reach tolerance {cfg.tolerance:g} in {cfg.max_iterations} iterations",
        best=z, iterations=cfg.max_iterations)


@dataclass(frozen=True)
class MusicConfig:
    """MUSIC settings. ``subarray_length=None`` means floor(N/2)."""

    K: int = 3
    subarray_length: int | None = None
    grid_oversampling: int = 20

    def resolve_length(self, N: int) -> int:
        L = N // 2 if self.subarray_length is None else self.subarray_length
        if not self.K < L < N:
            raise ParameterError(f"need K < L < N, got K={self.K}, L={L}, N={N}")
        if self.grid_oversampling < 1:
            raise ParameterError("grid_oversampling must be >= 1")
        return L


def signal_subspace(x: np.ndarray, L: int, K: int) -> np.ndarray:
    """K principal eigenvectors of the forward-backward averaged covariance."""
    snapshots = np.lib.stride_tricks.sliding_window_view(x, L).T
    R = snapshots @ snapshots.conj().T / snapshots.shape[1]
    R = 0.5 * (R + np.flip(R.conj(), axis=(0, 1)))
    _, vecs = scipy.linalg.eigh(R, subset_by_index=(L - K, L - 1))
    return vecs


def pseudospectrum(Es: np.ndarray, n_grid: int) -> np.ndarray:
    """1 / ||E_n^H a(f)||^2 on f = j / n_grid, via the signal subspace."""
    L = Es.shape[0]
    proj = n_grid * np.fft.ifft(Es.conj(), n=n_grid, axis=0)
    noise_power = L - np.sum(np.abs(proj) ** 2, axis=1)
    return 1.0 / np.maximum(noise_power, 1e-12 * L)


def _peaks(P: np.ndarray, K: int, min_sep: int):
    n = P.size
    is_max = (P >= np.roll(P, 1)) & (P > np.roll(P, -1))
    cands = np.flatnonzero(is_max)
    cands = cands[np.argsort(P[cands])[::-1]]
    chosen = []
    for c in cands:
        if all(min(abs(c - q), n - abs(c - q)) >= min_sep for q in chosen):
            chosen.append(int(c))
            if len(chosen) == K:
                break
    return chosen


def _refine(logP: np.ndarray, j: int) -> float:
    n = logP.size
    left, mid, right = logP[(j - 1) % n], logP[j], logP[(j + 1) % n]
    denom = left - 2 * mid + right
    if denom >= 0:
        return float(j)
    return j + 0.5 * (left - right) / denom


def music_delays(h, cfg: MusicConfig, delta: float, flags=None) -> np.ndarray:
    """Delays (seconds, ascending) of the K strongest taps in h.

    The tap vector is moved to the frequency domain with an inverse DFT,
    taken in centered (signed frequency) order so that an off-grid tap is a
    single unbroken complex exponential, and fed to MUSIC. If fewer than K
    separated peaks exist, the strongest is repeated and a note is appended
    to ``flags``.
    """
    h = np.asarray(h, dtype=complex)
    N = h.size
    L = cfg.resolve_length(N)
    K = cfg.K
    norm = np.linalg.norm(h)
    if norm == 0:
        raise ParameterError("MUSIC needs a nonzero tap vector")
    x = np.fft.fftshift(np.fft.ifft(h / norm))
    Es = signal_subspace(x, L, K)
    n_grid = N * cfg.grid_oversampling
    P = pseudospectrum(Es, n_grid)
    found = _peaks(P, K, max(1, cfg.grid_oversampling))
    if len(found) < K:
        if flags is not None:
            flags.append(f"MUSIC found {len(found)} of {K} peaks")
        found = found + [found[0]] * (K - len(found)) if found else [int(np.argmax(P))] * K
    logP = np.log(P)
    freqs = np.array([_refine(logP, j) for j in found]) / n_grid
    return np.sort(np.mod(freqs, 1.0) * N * delta)


def _fit_amplitudes(y, measured_templates):
    coef, _ = lstsq(measured_templates, y)
    return coef, y - measured_templates @ coef


def _result(delays, coef, residual, templates, flags):
    return EstimationResult(
        delays=np.asarray(delays), amplitudes=np.asarray(coef),
        residual_norm=float(np.linalg.norm(residual)),
        reconstructed=templates @ coef, flags=flags)


def tde_music(y, phi: MeasurementMatrix, dictionary, K: int,
              l1cfg: L1SolverConfig = L1SolverConfig(), musiccfg: MusicConfig | None = None,
              *, compressed=None) -> EstimationResult:
    """l1 tap recovery, MUSIC on the transformed taps, then least-squares amplitudes."""
    musiccfg = musiccfg or MusicConfig(K=K)
    if compressed is None:
        compressed = phi.apply(dictionary.atoms)
    h = l1_reconstruct(y, compressed, l1cfg)
    flags = []
    delays = music_delays(h, musiccfg, dictionary.delta, flags)
    templates = np.column_stack([chirp_template(dictionary.spec, t, circular=True) for t in delays])
    coef, residual = _fit_amplitudes(np.asarray(y, dtype=complex), phi.apply(templates))
    return _result(delays, coef, residual, templates, flags)


def tikhonov_pinv_apply(D: np.ndarray, f: np.ndarray, reg: float = 1e-6) -> np.ndarray:
    """Regularized minimum-norm solve of D h = f, damping at reg * sigma_max."""
    U, s, Vh = np.linalg.svd(D, full_matrices=False)
    lam = reg * s[0]
    return Vh.conj().T @ ((s / (s ** 2 + lam ** 2)) * (U.conj().T @ f))


def downsample_music(f_low, dict_low: np.ndarray, K: int, musiccfg: MusicConfig | None,
                     spec, kept) -> EstimationResult:
    """Delay estimates from plainly decimated samples.

    ``dict_low`` holds the dictionary rows at the ``kept`` sample indices.
    Taps come from a Tikhonov pseudo-inverse of that fat matrix.
    """
    musiccfg = musiccfg or MusicConfig(K=K)
    f_low = np.asarray(f_low, dtype=complex)
    if dict_low.shape[0] != f_low.size:
        raise ParameterError("downsampled dictionary and samples disagree in length")
    h = tikhonov_pinv_apply(dict_low, f_low)
    flags = []
    delays = music_delays(h, musiccfg, spec.delta, flags)
    templates = np.column_stack([chirp_template(spec, t, circular=True) for t in delays])
    coef, residual = _fit_amplitudes(f_low, templates[kept])
    return _result(delays, coef, residual, templates, flags)
