"""Circulant dictionary of delayed templates, coherence bands, arc geometry."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg

from .errors import GeometryError, ParameterError
from .signal_model import ChirpSpec, chirp_template

BAND_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class Dictionary:
    """N x N circulant matrix whose column n is the template shifted by n samples."""

    atoms: np.ndarray
    spec: ChirpSpec

    @property
    def N(self) -> int:
        return self.atoms.shape[1]

    @property
    def delta(self) -> float:
        return self.spec.delta

    @cached_property
    def coherence_row(self) -> np.ndarray:
        """mu(0, k) for every k; mu(i, k) = coherence_row[(k - i) % N]."""
        return np.abs(self.atoms[:, 0].conj() @ self.atoms)

    def column(self, n: int) -> np.ndarray:
        return self.atoms[:, n % self.N]


def build(spec: ChirpSpec) -> Dictionary:
    """Circulant dictionary; columns past N - T*fs wrap around the record end."""
    atoms = scipy.linalg.circulant(chirp_template(spec, 0.0))
    atoms.setflags(write=False)
    return Dictionary(atoms=atoms, spec=spec)


def correlation_proxy(y_res: np.ndarray, compressed_atoms: np.ndarray) -> np.ndarray:
    """|<y_res, (Phi Psi)_n>| for every column n."""
    y_res = np.asarray(y_res)
    if compressed_atoms.ndim != 2 or y_res.shape != (compressed_atoms.shape[0],):
        raise ParameterError(
            f"residual of shape {y_res.shape} does not match atoms {compressed_atoms.shape}")
    return np.abs(compressed_atoms.conj().T @ y_res)


def _check_index(i, N):
    if not 0 <= i < N:
        raise ParameterError(f"atom index {i} outside [0, {N})")


def coherence(i: int, k: int, dictionary: Dictionary) -> float:
    """Absolute inner product of Nyquist-domain atoms i and k."""
    _check_index(i, dictionary.N)
    _check_index(k, dictionary.N)
    return float(abs(np.vdot(dictionary.atoms[:, i], dictionary.atoms[:, k])))


def band(eta: float, S, dictionary: Dictionary) -> set:
    """Indices whose coherence with some member of S exceeds eta.

    Coherences within ``1e-9 * r**2`` of eta count as equal (not exceeding),
    and S itself is always part of the band.
    """
    if eta < 0:
        raise ParameterError("eta must be non-negative")
    S = list(S)
    if not S:
        return set()
    N = dictionary.N
    row = dictionary.coherence_row
    thresh = eta + BAND_RTOL * row[0]
    offsets = np.flatnonzero(row > thresh)
    out = set(int(k) for k in S)
    for k in S:
        out.update(((offsets + k) % N).tolist())
    return out


def band_mask(eta: float, S, dictionary: Dictionary) -> np.ndarray:
    """Boolean mask form of :func:`band`."""
    mask = np.zeros(dictionary.N, dtype=bool)
    idx = list(band(eta, S, dictionary))
    mask[idx] = True
    return mask


@dataclass(frozen=True)
class PolarGeometry:
    """Circle-arc model through three adjacent atoms.

    ``A`` maps the stacked atoms (p-1, p, p+1) to the arc center and the two
    in-plane basis directions.
    """

    r: float
    theta: float
    A: np.ndarray


def arc_matrix(r: float, theta: float) -> np.ndarray:
    """The 3x3 matrix whose inverse is ``PolarGeometry.A``."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[1.0, r * c, -r * s],
                     [1.0, r, 0.0],
                     [1.0, r * c, r * s]])


def adjacent_angle(dictionary: Dictionary, p: int) -> float:
    """Angle between atoms p and p+1 from the real part of their inner product."""
    a = dictionary.column(p)
    b = dictionary.column(p + 1)
    cos = np.real(np.vdot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b))
    return float(np.arccos(np.clip(cos, -1.0, 1.0)))


def _three_point_arc(dictionary: Dictionary, p: int = 0):
    # circle through atoms p-1, p, p+1 (as real vectors): equal chords
    # 2 r sin(theta/2) between neighbours, 2 r sin(theta) across
    near = np.linalg.norm(dictionary.column(p) - dictionary.column(p + 1))
    far = np.linalg.norm(dictionary.column(p - 1) - dictionary.column(p + 1))
    theta = 2 * np.arccos(np.clip(far / (2 * near), -1.0, 1.0))
    return near / (2 * np.sin(theta / 2)), theta


def polar_geometry(dictionary: Dictionary, convention: str = "arc") -> PolarGeometry:
    """Radius, arc angle and basis-change matrix for polar interpolation.

    ``convention="arc"`` (default) fits the circle passing through three
    adjacent atoms, so ``r`` is the arc radius about an offset center.
    ``convention="norm"`` uses ``r = ||psi||`` and the angle between
    adjacent atoms as seen from the origin.
    """
    if convention == "arc":
        r, theta = _three_point_arc(dictionary)
    elif convention == "norm":
        r = float(np.linalg.norm(dictionary.column(0)))
        theta = adjacent_angle(dictionary, 0)
    else:
        raise ParameterError(f"unknown polar convention {convention!r}")
    if not (1e-8 < theta < np.pi - 1e-8) or not r > 0:
        raise GeometryError(f"degenerate arc: r={r!r}, theta={theta!r}")
    A = np.linalg.inv(arc_matrix(r, theta))
    A.setflags(write=False)
    return PolarGeometry(r=float(r), theta=float(theta), A=A)
