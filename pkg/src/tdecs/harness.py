"""Monte Carlo runner for the delay-precision sweeps and their CSV output."""

from __future__ import annotations

import hashlib
import itertools
import logging
import math
import struct
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import baseline, dictionary as dct, recovery, sensing
from .errors import ParameterError, TDEError
from .signal_model import ChirpSpec, SceneDrawSpec, SparseScene, draw_scene, synthesize

log = logging.getLogger(__name__)

ESTIMATORS = ("BOMP", "IBOMP-Parabolic", "IBOMP-Polar", "TDE-MUSIC", "DS-MUSIC")
GREEDY_KIND = {
    "BOMP": recovery.InterpolationKind.NONE,
    "IBOMP-Parabolic": recovery.InterpolationKind.PARABOLIC,
    "IBOMP-Polar": recovery.InterpolationKind.POLAR,
}
CSV_HEADER = "sweep_var,estimator,mean_tau_mse_us2,trials_ok,trials_failed,mean_runtime_ns"
EXHAUSTIVE_MAX_K = 6


def frange(start: float, step: float, stop: float) -> list:
    """Inclusive arithmetic range, e.g. frange(0.05, 0.05, 1.0) has 20 points."""
    if step <= 0:
        raise ParameterError("range step must be positive")
    n = int(math.floor((stop - start) / step + 1e-9))
    return [round(start + i * step, 12) for i in range(n + 1)]


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines an experiment's output.

    ``snr_list_db=None`` runs noise-free. ``kappa`` is the fixed subsampling
    ratio of the SNR sweep.
    """

    chirp: ChirpSpec = field(default_factory=ChirpSpec)
    draw: SceneDrawSpec | None = None
    kappa_list: tuple = tuple(frange(0.05, 0.05, 1.0))
    snr_list_db: tuple | None = None
    kappa: float = 0.5
    trials: int = 100
    master_seed: int = 0
    estimators: tuple = ESTIMATORS
    eta: float = 0.0
    timing: bool = False

    def __post_init__(self):
        if self.draw is None:
            object.__setattr__(self, "draw", SceneDrawSpec.for_chirp(self.chirp))
        object.__setattr__(self, "kappa_list", tuple(float(k) for k in self.kappa_list))
        object.__setattr__(self, "estimators", tuple(self.estimators))
        if self.snr_list_db is not None:
            object.__setattr__(self, "snr_list_db", tuple(float(s) for s in self.snr_list_db))
        if self.trials < 1:
            raise ParameterError("trials must be at least 1")
        for k in self.kappa_list + (self.kappa,):
            if not 0 < k <= 1:
                raise ParameterError(f"kappa {k!r} outside (0, 1]")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown:
            raise ParameterError(f"unknown estimators {sorted(unknown)}; choose from {ESTIMATORS}")
        if not 0 <= self.master_seed < 2**64:
            raise ParameterError("master_seed must fit in 64 bits")


@dataclass
class EstimatorOutcome:
    sq_error_us2: float = math.nan
    runtime_ns: int = 0
    failed: bool = False
    error: str = ""


@dataclass
class TrialRecord:
    """One trial: squared delay errors are summed over the K pulses (us^2)."""

    trial_index: int
    kappa: float
    snr_db: float | None
    K: int
    outcomes: dict

    def tau_mse(self, name: str) -> float:
        return self.outcomes[name].sq_error_us2 / self.K


@dataclass(frozen=True)
class ResultRow:
    sweep_value: float
    estimator: str
    mean_tau_mse_us2: float
    trials_ok: int
    trials_failed: int
    mean_runtime_ns: float | None = None


def tau_mse(true_delays, est_delays) -> float:
    """Mean squared delay error in us^2 under the best matching of estimates to truth.

    Exhaustive over permutations for K <= 6, sorted pairing beyond that.
    """
    t = np.asarray(true_delays, dtype=float) * 1e6
    e = np.asarray(est_delays, dtype=float) * 1e6
    if t.shape != e.shape:
        raise ParameterError(f"{t.size} true delays vs {e.size} estimates")
    if t.size == 0:
        return 0.0
    if t.size > EXHAUSTIVE_MAX_K:
        return float(np.mean((np.sort(t) - np.sort(e)) ** 2))
    return float(min(np.mean((t - e[list(p)]) ** 2)
                     for p in itertools.permutations(range(t.size))))


def _hash64(*values) -> int:
    payload = b"".join(struct.pack("<d", float(v)) for v in values)
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


def trial_streams(master_seed: int, kappa: float, trial_index: int):
    """Independent (scene, sensing, noise) generators for one trial.

    Keyed on the subsampling ratio and trial index only, so every SNR point
    and every estimator subset sees the same scene and sensing matrix.
    """
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(_hash64(kappa), trial_index))
    return [np.random.default_rng(child) for child in ss.spawn(3)]


class _Context:
    """Per-experiment caches: dictionary, arc geometry."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.dictionary = dct.build(cfg.chirp)
        self.geom = dct.polar_geometry(self.dictionary)


def _run_estimator(name, ctx, y, phi, compressed, f, unit_noise, sigma_scale, K):
    spec = ctx.cfg.chirp
    if name in GREEDY_KIND:
        return recovery.ibomp(y, phi, ctx.dictionary, K, ctx.cfg.eta, GREEDY_KIND[name],
                              compressed=compressed, geom=ctx.geom)
    if name == "TDE-MUSIC":
        if sigma_scale is None:
            l1cfg = baseline.L1SolverConfig()
        else:
            sigma2 = sensing.noise_variance(phi.apply(f), sigma_scale)
            l1cfg = baseline.L1SolverConfig(mode="denoising",
                                            epsilon=baseline.bpdn_epsilon(phi.M, sigma2))
        return baseline.tde_music(y, phi, ctx.dictionary, K, l1cfg, compressed=compressed)
    if name == "DS-MUSIC":
        kept = sensing.kept_indices(spec.N, phi.M)
        f_low = f[kept]
        if sigma_scale is not None:
            f_low = sensing.add_noise(f_low, sensing.NoiseSpec(sigma_scale, True),
                                      unit_noise=unit_noise)
        return baseline.downsample_music(f_low, ctx.dictionary.atoms[kept], K, None, spec, kept)
    raise ParameterError(f"unknown estimator {name!r}")


def run_trial(cfg: ExperimentConfig, kappa: float, snr_db: float | None, trial_index: int,
              ctx: _Context | None = None, scene: SparseScene | None = None) -> TrialRecord:
    """Draw one scene and sensing matrix and run every enabled estimator on it.

    All estimators share the scene, the sensing matrix and the unit noise
    realization. ``scene`` overrides the random draw (the generators are
    still consumed identically).
    """
    ctx = ctx or _Context(cfg)
    spec = cfg.chirp
    scene_rng, phi_rng, noise_rng = trial_streams(cfg.master_seed, kappa, trial_index)
    drawn = draw_scene(cfg.draw, scene_rng)
    scene = scene or drawn
    f = synthesize(spec, scene)
    phi = sensing.random_demodulator(spec.N, kappa, phi_rng)
    unit_noise = sensing.complex_white(noise_rng, spec.N)
    y = sensing.measure(phi, f)
    if snr_db is not None:
        y = sensing.add_noise(y, sensing.NoiseSpec(snr_db, True), unit_noise=unit_noise)
    compressed = recovery.compress_dictionary(phi, ctx.dictionary)

    outcomes = {}
    for name in cfg.estimators:
        t0 = time.perf_counter_ns()
        try:
            res = _run_estimator(name, ctx, y, phi, compressed, f, unit_noise, snr_db, scene.K)
            err = tau_mse(scene.delays, res.delays) * scene.K
            outcome = EstimatorOutcome(sq_error_us2=err)
        except (TDEError, np.linalg.LinAlgError) as exc:
            log.warning("trial %d kappa=%g snr=%s: %s failed: %s",
                        trial_index, kappa, snr_db, name, exc)
            outcome = EstimatorOutcome(failed=True, error=str(exc))
        outcome.runtime_ns = time.perf_counter_ns() - t0
        outcomes[name] = outcome
    return TrialRecord(trial_index, kappa, snr_db, scene.K, outcomes)


def aggregate(sweep_value: float, records, estimators, timing: bool) -> list:
    rows = []
    for name in estimators:
        ok = [r for r in records if not r.outcomes[name].failed]
        failed = len(records) - len(ok)
        mean = float(np.mean([r.tau_mse(name) for r in ok])) if ok else math.nan
        runtime = float(np.mean([r.outcomes[name].runtime_ns for r in records])) if timing else None
        rows.append(ResultRow(sweep_value, name, mean, len(ok), failed, runtime))
    return rows


def _sweep(cfg, points, kappa_of, snr_of):
    ctx = _Context(cfg)
    rows = []
    for value in points:
        records = [run_trial(cfg, kappa_of(value), snr_of(value), t, ctx)
                   for t in range(cfg.trials)]
        rows.extend(aggregate(value, records, cfg.estimators, cfg.timing))
        log.info("sweep point %g done", value)
    return sort_rows(rows)


def run_experiment_kappa(cfg: ExperimentConfig) -> list:
    """Noise-free mean tau-MSE for every (kappa, estimator)."""
    return _sweep(cfg, cfg.kappa_list, lambda k: k, lambda k: None)


def run_experiment_snr(cfg: ExperimentConfig) -> list:
    """Mean tau-MSE versus SNR at the fixed ``cfg.kappa``; BPDN is used for the l1 step."""
    if not cfg.snr_list_db:
        raise ParameterError("SNR sweep needs a non-empty snr_list_db")
    return _sweep(cfg, cfg.snr_list_db, lambda s: cfg.kappa, lambda s: s)


def sort_rows(rows) -> list:
    return sorted(rows, key=lambda r: (r.sweep_value, r.estimator))


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def format_csv(rows) -> str:
    lines = [CSV_HEADER]
    for r in sort_rows(rows):
        lines.append(",".join([_fmt(r.sweep_value), r.estimator, _fmt(r.mean_tau_mse_us2),
                               _fmt(r.trials_ok), _fmt(r.trials_failed),
                               _fmt(r.mean_runtime_ns)]))
    return "\n".join(lines) + "\n"


def write_csv(rows, path) -> None:
    """Write result rows; raises OSError naming the path on failure."""
    text = format_csv(rows)
    try:
        with open(path, "w", newline="", encoding="ascii") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc


def trial_header(estimators) -> str:
    cols = ["trial_index", "kappa", "snr_db"]
    for name in estimators:
        cols += [f"{name}:sq_error_us2", f"{name}:runtime_ns", f"{name}:failed"]
    return ",".join(cols)


def trial_row(record: TrialRecord, estimators, timing: bool = True) -> str:
    cols = [str(record.trial_index), _fmt(record.kappa), _fmt(record.snr_db)]
    for name in estimators:
        o = record.outcomes[name]
        cols += [_fmt(o.sq_error_us2), str(o.runtime_ns) if timing else "", str(int(o.failed))]
    return ",".join(cols)


def with_overrides(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    return replace(cfg, **{k: v for k, v in changes.items() if v is not None})
