"""
The fixed low-frequency noise subspace and the complementary orthogonal
projectors onto it (P_noise) and away from it (P_W = I - P_noise).
"""

import functools
import logging
from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import DimensionError, ParameterError, RankError
from .signal import Signal

logger = logging.getLogger(__name__)

DEFAULT_RANK_TOL = 1e-10


class NoiseSubspaceSpec(BaseModel):
    """Fourier modes |n| <= n_max on a grid of `length` samples."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    length: int = Field(default=403, ge=2)
    n_max: int = Field(default=21, ge=0)
    include_dc: bool = True

    @model_validator(mode="after")
    def _check_dimension(self) -> "NoiseSubspaceSpec":
        if 2 * self.n_max + 1 > self.length:
            raise ValueError(
                f"subspace dimension {2 * self.n_max + 1} exceeds length {self.length}"
            )
        if not self.include_dc and self.n_max == 0:
            raise ValueError("an empty noise subspace (n_max=0 without DC) is not allowed")
        return self

    @property
    def dimension(self) -> int:
        return 2 * self.n_max + int(self.include_dc)


def build_noise_atoms(spec: NoiseSubspaceSpec) -> np.ndarray:
    """
    Real spanning set of the band: [1, cos 1, sin 1, ..., cos n_max, sin n_max]
    evaluated at 2*pi*n*i/L, i = 0..L-1.
    """
    if 2 * spec.n_max + 1 > spec.length:
        raise ParameterError(f"subspace dimension {2 * spec.n_max + 1} exceeds length {spec.length}")
    index = np.arange(spec.length)
    columns = [np.ones(spec.length)] if spec.include_dc else []
    for n in range(1, spec.n_max + 1):
        phase = 2.0 * np.pi * n * index / spec.length
        columns.append(np.cos(phase))
        columns.append(np.sin(phase))
    return np.column_stack(columns)


@dataclass(frozen=True)
class Projector:
    """Orthonormal basis Q (L x r) of a subspace."""

    q_basis: np.ndarray

    def __post_init__(self):
        basis = np.array(self.q_basis, dtype=float)
        if basis.ndim != 2 or basis.shape[1] == 0:
            raise RankError(f"projector needs a nonempty L x r basis, got shape {basis.shape}")
        basis.setflags(write=False)
        object.__setattr__(self, "q_basis", basis)

    @property
    def rank(self) -> int:
        return self.q_basis.shape[1]

    @property
    def ambient_dim(self) -> int:
        return self.q_basis.shape[0]

    def _coordinates(self, values: np.ndarray) -> np.ndarray:
        if values.shape[0] != self.ambient_dim:
            raise DimensionError(
                f"expected {self.ambient_dim} samples, got {values.shape[0]}"
            )
        return self.q_basis.T @ values

    def split(self, values) -> tuple:
        """(onto, out) computed from the same Q^T v product."""
        values = np.asarray(values, dtype=float)
        onto = self.q_basis @ self._coordinates(values)
        return onto, values - onto


def orthonormalize(atoms, tol: float = DEFAULT_RANK_TOL) -> Projector:
    """
    Orthonormal basis of the column space by column-pivoted QR. Columns whose
    residual norm at pivoting time falls below tol * (largest column norm) are
    dropped.
    """
    atoms = np.asarray(atoms, dtype=float)
    if atoms.ndim != 2 or atoms.size == 0:
        raise ParameterError(f"atoms must be a nonempty matrix, got shape {atoms.shape}")
    if tol <= 0:
        raise ParameterError(f"rank tolerance must be positive, got {tol}")

    reference = np.max(np.linalg.norm(atoms, axis=0))
    if reference == 0:
        raise RankError("every atom is zero")
    q, r, _ = scipy.linalg.qr(atoms, mode="economic", pivoting=True)
    residuals = np.abs(np.diag(r))
    rank = int(np.count_nonzero(residuals >= tol * reference))
    if rank == 0:
        raise RankError(f"no atom exceeds the rank tolerance {tol}")
    logger.debug("Orthonormalized %d atoms to rank %d", atoms.shape[1], rank)
    return Projector(q[:, :rank])


@functools.lru_cache(maxsize=32)
def noise_projector(spec: NoiseSubspaceSpec, tol: float = DEFAULT_RANK_TOL) -> Projector:
    return orthonormalize(build_noise_atoms(spec), tol)


Vector = Union[Signal, np.ndarray]


def _apply(values: Vector, transform):
    if isinstance(values, Signal):
        return values.replace(transform(values.samples))
    return transform(np.asarray(values, dtype=float))


def project_out(p: Projector, s: Vector) -> Vector:
    """P_W s = s - Q(Q^T s): the part of s orthogonal to the subspace."""
    return _apply(s, lambda v: p.split(v)[1])


def project_onto(p: Projector, s: Vector) -> Vector:
    """Q(Q^T s): the part of s inside the subspace."""
    return _apply(s, lambda v: p.split(v)[0])


def project_atoms(p: Projector, design) -> np.ndarray:
    """Dictionary U = P_W B, column by column."""
    design = np.asarray(design, dtype=float)
    if design.ndim != 2:
        raise DimensionError(f"design must be a matrix, got shape {design.shape}")
    return p.split(design)[1]


def shared_directions(p: Projector, atoms, tol: float) -> np.ndarray:
    """
    Orthonormal L x s basis of the part of the subspace that the column span
    of `atoms` also contains: principal directions whose sine against that
    span is at most tol.
    """
    atoms = np.asarray(atoms, dtype=float)
    if atoms.ndim != 2 or atoms.shape[0] != p.ambient_dim:
        raise DimensionError(f"atoms must be {p.ambient_dim} x m, got shape {atoms.shape}")
    span = scipy.linalg.orth(atoms)
    residual = p.q_basis - span @ (span.T @ p.q_basis)
    _, sines, vt = scipy.linalg.svd(residual, full_matrices=False)
    return p.q_basis @ vt[sines <= tol].T
