"""Band-excluded OMP with optional off-grid interpolation of each delay."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import dictionary as dct
from .errors import ParameterError, RankDeficientError, SelectionExhaustedError
from .sensing import MeasurementMatrix
from .signal_model import chirp_template

LSTSQ_RCOND = 1e-10


class InterpolationKind(enum.Enum):
    NONE = "none"
    PARABOLIC = "parabolic"
    POLAR = "polar"


@dataclass
class EstimationResult:
    """Output of one estimator run.

    ``delays`` are sorted ascending (seconds) with ``amplitudes`` in the
    same order. ``flags`` collects non-fatal diagnostics.
    """

    delays: np.ndarray
    amplitudes: np.ndarray
    residual_norm: float
    reconstructed: np.ndarray
    indices: list = field(default_factory=list)
    flags: list = field(default_factory=list)

    @property
    def K(self) -> int:
        return len(self.delays)


def parabolic_interpolate(proxy: np.ndarray, n: int, delta: float) -> float:
    """Vertex of the parabola through proxy[n-1], proxy[n], proxy[n+1] (indices mod N)."""
    N = proxy.size
    left, mid, right = proxy[(n - 1) % N], proxy[n % N], proxy[(n + 1) % N]
    denom = right - 2 * mid + left
    if abs(denom) < 1e-12 * abs(mid) or denom == 0:
        return n * delta
    return -(delta / 2) * (right - left) / denom + n * delta


def lstsq(B: np.ndarray, y: np.ndarray):
    """SVD least squares; returns (coefficients, rank)."""
    coef, _, rank, _ = np.linalg.lstsq(B, y, rcond=LSTSQ_RCOND)
    return coef, rank


def polar_interpolate(y_res, compressed_triple, geom: dct.PolarGeometry, p: int, delta: float):
    """Off-grid delay and amplitude from the circle-arc model around atom p.

    ``compressed_triple`` holds the measured versions of atoms p-1, p, p+1
    as three length-M vectors (or an M x 3 array). Returns ``(tau, alpha)``.
    """
    Q = np.column_stack(compressed_triple) if not isinstance(compressed_triple, np.ndarray) \
        else compressed_triple
    if Q.shape != (len(y_res), 3):
        raise ParameterError(f"triple must be {len(y_res)} x 3, got {Q.shape}")
    basis = Q @ geom.A.T
    c, rank = lstsq(basis, y_res)
    if rank < 3:
        center = Q[:, 1]
        alpha = np.vdot(center, y_res) / np.vdot(center, center).real
        return p * delta, complex(alpha)
    # c = alpha * (1, r cos(phi), r sin(phi)); alpha's phase cancels in c3 * conj(c2)
    phi = np.arctan2(np.real(c[2] * np.conj(c[1])), abs(c[1]) ** 2)
    phi = float(np.clip(phi, -geom.theta, geom.theta))
    return p * delta + delta * phi / geom.theta, complex(c[0])


def compress_dictionary(phi: MeasurementMatrix, dictionary: dct.Dictionary) -> np.ndarray:
    """Phi @ Psi, the M x N matrix of measured atoms."""
    return phi.apply(dictionary.atoms)


def _interpolate(kind, y_res, proxy, compressed, geom, i, delta):
    if kind is InterpolationKind.PARABOLIC:
        return parabolic_interpolate(proxy, i, delta)
    if kind is InterpolationKind.POLAR:
        N = compressed.shape[1]
        triple = compressed[:, [(i - 1) % N, i, (i + 1) % N]]
        return polar_interpolate(y_res, triple, geom, i, delta)[0]
    return i * delta


def ibomp(y, phi: MeasurementMatrix, dictionary: dct.Dictionary, K: int, eta: float = 0.0,
          kind: InterpolationKind = InterpolationKind.NONE, *, compressed=None, geom=None,
          residual_tol=None, history=None) -> EstimationResult:
    """Recover K delayed pulses from compressed measurements y.

    Each iteration picks the strongest proxy index outside the eta-band of
    the indices chosen so far, refines its delay with the chosen
    interpolation, appends the template at that continuous delay and refits
    all amplitudes by least squares. If the refined atom leaves a larger
    residual than the on-grid atom, the on-grid atom is kept.

    ``residual_tol`` turns on early stopping once the residual norm drops
    below it; ``history``, if a list, receives one dict per iteration.
    """
    kind = InterpolationKind(kind)
    y = np.asarray(y, dtype=complex)
    if K < 1:
        raise ParameterError("K must be at least 1")
    if y.shape != (phi.M,) or phi.N != dictionary.N:
        raise ParameterError("measurement, sensing matrix and dictionary sizes disagree")
    if compressed is None:
        compressed = compress_dictionary(phi, dictionary)
    if kind is InterpolationKind.POLAR and geom is None:
        geom = dct.polar_geometry(dictionary)

    spec = dictionary.spec
    delta = dictionary.delta
    y_res = y.copy()
    S, delays, atoms, flags = [], [], [], []
    excluded = np.zeros(dictionary.N, dtype=bool)
    a = np.zeros(0, dtype=complex)

    for it in range(K):
        if residual_tol is not None and np.linalg.norm(y_res) <= residual_tol:
            break
        proxy = dct.correlation_proxy(y_res, compressed)
        if excluded.all():
            raise SelectionExhaustedError(f"no admissible index at iteration {it + 1}")
        i = int(np.argmax(np.where(excluded, -np.inf, proxy)))

        tau = _interpolate(kind, y_res, proxy, compressed, geom, i, delta)
        candidates = [tau] if kind is InterpolationKind.NONE else [tau, i * delta]
        best = None
        for cand in candidates:
            atom = chirp_template(spec, cand, circular=True)
            B = np.column_stack(atoms + [phi.apply(atom)])
            coef, rank = lstsq(B, y)
            res = y - B @ coef
            if rank < B.shape[1]:
                continue
            if best is None or np.linalg.norm(res) < best[3] * (1 - 1e-12):
                best = (cand, phi.apply(atom), coef, np.linalg.norm(res), res)
        if best is None:
            raise RankDeficientError(
                f"atom {it} at index {i} makes the basis rank deficient", atom_index=it)
        cand, measured_atom, a, res_norm, y_res = best
        if cand != tau:
            flags.append(f"iter {it}: kept grid atom {i}")
        elif abs(cand - i * delta) > delta / 2 + 1e-15:
            flags.append(f"iter {it}: offset beyond half a grid cell")

        S.append(i)
        delays.append(cand)
        atoms.append(measured_atom)
        excluded |= dct.band_mask(eta, [i], dictionary)
        if history is not None:
            history.append({"index": i, "delay": cand, "residual": y_res.copy(),
                            "basis": np.column_stack(atoms), "coef": a.copy()})

    templates = np.column_stack([chirp_template(spec, t, circular=True) for t in delays]) if delays \
        else np.zeros((dictionary.N, 0), dtype=complex)
    reconstructed = templates @ a if delays else np.zeros(dictionary.N, dtype=complex)
    order = np.argsort(delays)
    return EstimationResult(
        delays=np.asarray(delays)[order],
        amplitudes=np.asarray(a)[order],
        residual_norm=float(np.linalg.norm(y_res)),
        reconstructed=reconstructed,
        indices=[S[k] for k in order],
        flags=flags,
    )
