"""Working-medium and pointer specifications, Hamiltonians and thermal states.

Units: hbar = k_B = 1. Ground energies are pinned to zero.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from qmengine import qmath

TRACE_TOL = 1e-12
HERM_TOL = 1e-12
POSITIVITY_TOL = 1e-10


class SpecError(ValueError):
    """A specification violates one of its physical invariants."""


class StateError(ValueError):
    """A matrix is not a valid density operator."""


class Topology(str, enum.Enum):
    BIPARTITE_FULL = "bipartite_full"  # one pointer per qudit, layout (n_p, n_p)
    SINGLE_ON_B = "single_on_b"  # one pointer reading qudit B, layout (n_p,)


@dataclass(frozen=True)
class SystemSpec:
    """Two ``n_s``-level qudits A and B with local energies and swap couplings.

    ``couplings`` maps unordered pairs ``(i, j)`` with ``i < j`` to ``g_ij``.
    """

    energies_a: tuple[float, ...]
    energies_b: tuple[float, ...]
    couplings: Mapping[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "energies_a", tuple(float(e) for e in self.energies_a))
        object.__setattr__(self, "energies_b", tuple(float(e) for e in self.energies_b))
        object.__setattr__(self, "couplings", dict(self.couplings))

    @property
    def n_s(self) -> int:
        return len(self.energies_a)

    @property
    def dims(self) -> tuple[int, int]:
        return (self.n_s, self.n_s)

    def validate(self) -> None:
        ea, eb = self.energies_a, self.energies_b
        if len(ea) != len(eb):
            raise SpecError(f"energies_a has {len(ea)} levels, energies_b has {len(eb)}")
        if len(ea) < 2:
            raise SpecError("each qudit needs at least two levels")
        if ea[0] != 0.0 or eb[0] != 0.0:
            raise SpecError("ground energies must be 0 (gauge E_0 = 0)")
        for i in range(1, self.n_s):
            for j in range(i):
                gap_a = ea[i] - ea[j]
                gap_b = eb[i] - eb[j]
                if not (gap_b > gap_a >= 0.0):
                    raise SpecError(
                        f"ordering constraint E^B_i - E^B_j > E^A_i - E^A_j >= 0 fails "
                        f"at (i, j) = ({i}, {j}): gaps B={gap_b:g}, A={gap_a:g}"
                    )
        for (i, j), g in self.couplings.items():
            if not (0 <= i < j < self.n_s):
                raise SpecError(f"coupling key ({i}, {j}) must satisfy 0 <= i < j < n_s")
            if g < 0:
                raise SpecError(f"coupling g_{i}{j} = {g} is negative")


@dataclass(frozen=True)
class PointerSpec:
    """Thermal pointer held at ambient ``beta`` and cooled to ``beta_prime``.

    ``energies_b`` is the spectrum of the pointer reading qudit B. For the
    bipartite topology ``energies_a`` is the spectrum of the pointer reading A.
    """

    energies_b: tuple[float, ...]
    beta: float
    beta_prime: float
    topology: Topology = Topology.SINGLE_ON_B
    energies_a: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "energies_b", tuple(float(e) for e in self.energies_b))
        if self.energies_a is not None:
            object.__setattr__(self, "energies_a", tuple(float(e) for e in self.energies_a))
        object.__setattr__(self, "topology", Topology(self.topology))

    @classmethod
    def qubit(cls, e_p: float, beta: float, beta_prime: float) -> PointerSpec:
        return cls(energies_b=(0.0, e_p), beta=beta, beta_prime=beta_prime)

    @property
    def n_p(self) -> int:
        return len(self.energies_b)

    @property
    def dims(self) -> tuple[int, ...]:
        if self.topology is Topology.BIPARTITE_FULL:
            return (self.n_p, self.n_p)
        return (self.n_p,)

    def nu(self, n_s: int) -> int:
        if self.n_p % n_s:
            raise SpecError(f"n_p = {self.n_p} is not an integer multiple of n_s = {n_s}")
        return self.n_p // n_s

    def with_beta_prime(self, beta_prime: float) -> PointerSpec:
        return PointerSpec(self.energies_b, self.beta, beta_prime, self.topology, self.energies_a)

    def validate(self, n_s: int | None = None) -> None:
        if not self.beta > 0:
            raise SpecError(f"ambient beta must be > 0, got {self.beta}")
        if not self.beta_prime >= self.beta:
            raise SpecError(
                f"beta_prime = {self.beta_prime:g} < beta = {self.beta:g}: cooling never heats"
            )
        if self.n_p < 2:
            raise SpecError("pointer needs at least two levels")
        if self.topology is Topology.BIPARTITE_FULL:
            if self.energies_a is None or len(self.energies_a) != self.n_p:
                raise SpecError("bipartite pointer needs energies_a with n_p levels")
        if n_s is not None:
            self.nu(n_s)


@dataclass(frozen=True)
class DensityOp:
    """A density matrix together with its tensor-factor layout."""

    mat: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self):
        mat = qmath.as_cmat(self.mat).copy()
        dims = qmath.check_layout(self.dims, mat.shape[0])
        if mat.shape[0] != mat.shape[1]:
            raise qmath.DimensionError(f"density matrix must be square, got {mat.shape}")
        mat.setflags(write=False)
        object.__setattr__(self, "mat", mat)
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def diag(self) -> np.ndarray:
        return np.real(np.diag(self.mat)).copy()

    def eigvals(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.mat + qmath.dag(self.mat)))

    def is_full_rank(self) -> bool:
        return bool(self.eigvals()[0] > 0)

    def validate(self, full_rank: bool = False) -> DensityOp:
        herm = np.max(np.abs(self.mat - qmath.dag(self.mat)))
        if herm > HERM_TOL:
            raise StateError(f"not Hermitian (max deviation {herm:.3e})")
        tr = np.trace(self.mat)
        if abs(tr - 1) > TRACE_TOL:
            raise StateError(f"trace {tr.real:.15g} differs from 1")
        lam = self.eigvals()[0]
        if lam < -POSITIVITY_TOL:
            raise StateError(f"negative eigenvalue {lam:.3e}")
        if full_rank and not lam > 0:
            raise StateError(f"state is not full rank (smallest eigenvalue {lam:.3e})")
        return self

    def ptrace(self, keep) -> DensityOp:
        keep = sorted(set(keep))
        return DensityOp(qmath.partial_trace(self.mat, self.dims, keep),
                         tuple(self.dims[k] for k in keep))

    def tensor(self, other: DensityOp) -> DensityOp:
        return DensityOp(qmath.kron(self.mat, other.mat), self.dims + other.dims)


def build_h_loc(spec: SystemSpec) -> np.ndarray:
    """``sum_i E^A_i |i><i| ⊗ I + E^B_i I ⊗ |i><i|``."""
    spec.validate()
    ea = np.asarray(spec.energies_a)
    eb = np.asarray(spec.energies_b)
    return np.diag((ea[:, None] + eb[None, :]).ravel()).astype(complex)


def build_h_int(spec: SystemSpec) -> np.ndarray:
    """Excitation-exchange coupling ``(g_ij/2)(|ij><ji| + |ji><ij|)`` over pairs ``i < j``."""
    spec.validate()
    n = spec.n_s
    h = np.zeros((n * n, n * n), dtype=complex)
    for (i, j), g in spec.couplings.items():
        ij, ji = i * n + j, j * n + i
        h[ij, ji] += g / 2
        h[ji, ij] += g / 2
    return h


def build_h_p(pspec: PointerSpec) -> np.ndarray:
    eb = np.asarray(pspec.energies_b)
    if pspec.topology is Topology.SINGLE_ON_B:
        return np.diag(eb).astype(complex)
    ea = np.asarray(pspec.energies_a)
    return np.diag((ea[:, None] + eb[None, :]).ravel()).astype(complex)


def thermal_state(h: np.ndarray, beta: float, dims: Sequence[int] | None = None) -> DensityOp:
    """Gibbs state ``exp(-beta h) / Z``."""
    if beta < 0:
        raise SpecError(f"inverse temperature must be >= 0, got {beta}")
    w, v = qmath.herm_eigen(h)
    p = np.exp(-beta * (w - w[0]))
    p /= p.sum()
    rho = (v * p[None, :]) @ qmath.dag(v)
    if not np.count_nonzero(h - np.diag(np.diag(h))):
        # keep diagonal Hamiltonians exactly diagonal
        rho = np.diag(np.diag(rho))
    return DensityOp(rho, tuple(dims) if dims is not None else (h.shape[0],))


def pointer_state(pspec: PointerSpec, beta: float | None = None) -> DensityOp:
    b = pspec.beta_prime if beta is None else beta
    return thermal_state(build_h_p(pspec), b, pspec.dims)


def ground_probability(e_p: float, beta: float) -> float:
    """Ground population of a thermal qubit with gap ``e_p``."""
    return 1.0 / (1.0 + math.exp(-beta * e_p))


def purity_to_beta(p_ground: float, e_p: float) -> float:
    """Inverse temperature at which a qubit of gap ``e_p`` has ground population ``p_ground``.

    Only ``0.5 < p_ground < 1`` is reachable with a finite positive temperature.
    """
    if e_p <= 0:
        raise SpecError(f"pointer gap must be > 0, got {e_p}")
    if not 0.5 < p_ground < 1.0:
        raise SpecError(f"pointer ground probability must lie in (0.5, 1), got {p_ground}")
    return math.log(p_ground / (1.0 - p_ground)) / e_p
