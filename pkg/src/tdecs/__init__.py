"""Compressive-sensing time delay estimation with off-grid interpolation."""

from .baseline import L1SolverConfig, MusicConfig, downsample_music, l1_reconstruct, music_delays, tde_music
from .dictionary import Dictionary, PolarGeometry, band, build, coherence, correlation_proxy, polar_geometry
from .harness import ExperimentConfig, run_experiment_kappa, run_experiment_snr, tau_mse, write_csv
from .recovery import EstimationResult, InterpolationKind, ibomp, parabolic_interpolate, polar_interpolate
from .sensing import MeasurementMatrix, NoiseSpec, add_noise, downsample, measure, random_demodulator
from .signal_model import ChirpSpec, SceneDrawSpec, SparseScene, chirp_template, draw_scene, synthesize

__version__ = "0.1.0"
