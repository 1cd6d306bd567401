"""Non-ideal measurements of a two-qudit system by a thermal pointer.

The joint system-pointer layout is always ``(n_s, n_s, *pointer.dims)``:
qudit A, qudit B, then the pointer reading A (bipartite topology only) and the
pointer reading B.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from qmengine import qmath
from qmengine.model import (
    DensityOp,
    PointerSpec,
    SpecError,
    SystemSpec,
    Topology,
    build_h_loc,
    build_h_p,
    pointer_state,
)


class UnsupportedConfiguration(SpecError):
    pass


class Scheme(str, enum.Enum):
    NONINVASIVE = "noninvasive"
    UNBIASED = "unbiased"


@dataclass(frozen=True)
class CorrelationScheme:
    kind: Scheme
    nu: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", Scheme(self.kind))
        if self.nu < 1:
            raise SpecError(f"block size nu must be >= 1, got {self.nu}")
        if self.kind is Scheme.UNBIASED and self.nu != 1:
            raise UnsupportedConfiguration(
                f"unbiased correlator is only defined for nu = 1 (got nu = {self.nu})"
            )


def joint_dims(spec: SystemSpec, pspec: PointerSpec) -> tuple[int, ...]:
    return spec.dims + pspec.dims


def faithful_block_unitary(i: int, n_s: int, n_p: int) -> np.ndarray:
    """Pointer permutation exchanging block 0 with block ``i``.

    Blocks have size ``nu = n_p / n_s``. Built as
    ``I - sum_x (|x> - |nu*i + x>)(<x| - <nu*i + x|)``.
    """
    if n_p % n_s:
        raise SpecError(f"n_p = {n_p} is not an integer multiple of n_s = {n_s}")
    if not 0 <= i < n_s:
        raise SpecError(f"outcome index {i} outside 0..{n_s - 1}")
    nu = n_p // n_s
    basis = np.eye(n_p)
    u = np.eye(n_p, dtype=complex)
    for x in range(nu):
        d = basis[x] - basis[nu * i + x]
        u -= np.outer(d, d)
    return u


def block_unitaries(n_s: int, n_p: int) -> list[np.ndarray]:
    return [faithful_block_unitary(i, n_s, n_p) for i in range(n_s)]


def build_u_corr(scheme: CorrelationScheme, spec: SystemSpec, pspec: PointerSpec) -> np.ndarray:
    """System-pointer correlating unitary for the chosen scheme.

    The non-invasive correlator is controlled on the system basis,
    ``sum_nm |nm><nm| ⊗ U^n ⊗ U^m`` (only ``U^m`` for a single pointer on B).
    The unbiased one (``nu = 1`` only) follows it with a swap of each measured
    qudit and its pointer, which on qubits gives ``U_UNB`` entrywise.
    """
    n_s = spec.n_s
    nu = pspec.nu(n_s)
    if nu != scheme.nu:
        raise SpecError(f"scheme block size {scheme.nu} disagrees with n_p/n_s = {nu}")
    if scheme.kind is Scheme.UNBIASED and nu != 1:
        raise UnsupportedConfiguration("unbiased correlator requires n_p = n_s")

    blocks = block_unitaries(n_s, pspec.n_p)
    dp = int(np.prod(pspec.dims))
    dim = n_s * n_s * dp
    u = np.zeros((dim, dim), dtype=complex)
    for n in range(n_s):
        for m in range(n_s):
            proj = np.zeros((n_s * n_s, n_s * n_s))
            proj[n * n_s + m, n * n_s + m] = 1.0
            if pspec.topology is Topology.BIPARTITE_FULL:
                ptr = qmath.kron(blocks[n], blocks[m])
            else:
                ptr = blocks[m]
            u += qmath.kron(proj, ptr)

    if scheme.kind is Scheme.UNBIASED:
        dims = joint_dims(spec, pspec)
        perm = (2, 3, 0, 1) if pspec.topology is Topology.BIPARTITE_FULL else (0, 2, 1)
        u = qmath.factor_permutation(dims, perm) @ u
    return u


def total_hamiltonian(spec: SystemSpec, pspec: PointerSpec) -> np.ndarray:
    """``H_loc ⊗ I + I ⊗ H_P`` on the joint layout."""
    h_loc = build_h_loc(spec)
    h_p = build_h_p(pspec)
    return qmath.kron(h_loc, np.eye(h_p.shape[0])) + qmath.kron(np.eye(h_loc.shape[0]), h_p)


def correlate(rho_s: DensityOp, spec: SystemSpec, pspec: PointerSpec,
              u: np.ndarray) -> tuple[DensityOp, float]:
    """Couple the system to the cooled pointer.

    Returns the joint state ``U (rho_S ⊗ tau) U†`` and the energy spent,
    ``Tr[(H_loc + H_P)(rho_SP - rho_S ⊗ tau)]``.
    """
    dims = joint_dims(spec, pspec)
    if rho_s.dims != spec.dims:
        raise qmath.DimensionError(f"system state layout {rho_s.dims} != {spec.dims}")
    if u.shape != (int(np.prod(dims)),) * 2:
        raise qmath.DimensionError(f"correlator shape {u.shape} does not fit layout {dims}")
    prod = rho_s.tensor(pointer_state(pspec))
    rho_sp = DensityOp(u @ prod.mat @ qmath.dag(u), dims)
    h = total_hamiltonian(spec, pspec)
    return rho_sp, qmath.expect(h, rho_sp.mat - prod.mat)


@dataclass(frozen=True)
class JointProbTable:
    """Joint probabilities ``P_SP(i, j, k, l)`` indexed on the joint layout.

    For a single pointer on B the table is indexed ``(i, j, l)``; use
    :meth:`b_marginal` for the ``(j, l)`` table.
    """

    probs: np.ndarray

    def __getitem__(self, idx):
        return self.probs[idx]

    def b_marginal(self) -> np.ndarray:
        if self.probs.ndim != 3:
            raise ValueError("b_marginal is defined for the single-pointer layout")
        return self.probs.sum(axis=0)


def joint_probs(rho_sp: DensityOp) -> JointProbTable:
    return JointProbTable(rho_sp.diag().reshape(rho_sp.dims))


def _system_diag(rho_s) -> np.ndarray:
    d = rho_s.diag() if isinstance(rho_s, DensityOp) else np.real(np.asarray(rho_s))
    n = int(round(math.sqrt(d.size)))
    return d.reshape(n, n)


def noninvasive_psp(rho_s, tau: DensityOp, blocks: list[np.ndarray],
                    topology: Topology) -> JointProbTable:
    """Closed-form joint statistics of the non-invasive scheme.

    ``P(ijkl) = <ij|rho_S|ij> <kl| U^{ij} tau U^{ij}† |kl>``, evaluated term by
    term without touching the joint matrix.
    """
    pop = _system_diag(rho_s)
    n_s = pop.shape[0]
    n_p = blocks[0].shape[0]
    if topology is Topology.BIPARTITE_FULL:
        out = np.zeros((n_s, n_s, n_p, n_p))
        for i in range(n_s):
            for j in range(n_s):
                uij = np.kron(blocks[i], blocks[j])
                ptr = np.real(np.diag(uij @ tau.mat @ uij.conj().T)).reshape(n_p, n_p)
                out[i, j] = pop[i, j] * ptr
    else:
        out = np.zeros((n_s, n_s, n_p))
        for i in range(n_s):
            for j in range(n_s):
                ptr = np.real(np.diag(blocks[j] @ tau.mat @ blocks[j].conj().T))
                out[i, j] = pop[i, j] * ptr
    return JointProbTable(out)


def unbiased_psp(rho_s, tau: DensityOp, blocks: list[np.ndarray],
                 topology: Topology) -> JointProbTable:
    """Closed-form joint statistics of the unbiased scheme (``n_p = n_s``).

    ``P(ijkl) = <kl|rho_S|kl> <ij| U^{kl} tau U^{kl}† |ij>``: the pointer
    carries the system's statistics, the system inherits the pointer's.
    """
    pop = _system_diag(rho_s)
    n_s = pop.shape[0]
    if topology is Topology.BIPARTITE_FULL:
        out = np.zeros((n_s, n_s, n_s, n_s))
        for k in range(n_s):
            for l in range(n_s):
                ukl = np.kron(blocks[k], blocks[l])
                sysd = np.real(np.diag(ukl @ tau.mat @ ukl.conj().T)).reshape(n_s, n_s)
                out[:, :, k, l] = pop[k, l] * sysd
    else:
        # A is untouched; B and the pointer exchange roles
        out = np.zeros((n_s, n_s, n_s))
        for i in range(n_s):
            for l in range(n_s):
                sysd = np.real(np.diag(blocks[l] @ tau.mat @ blocks[l].conj().T))
                out[i, :, l] = pop[i, l] * sysd
    return JointProbTable(out)


@dataclass(frozen=True)
class OutcomeProjectors:
    """Pointer projectors ``Pi_i = sum_{x<nu} |nu*i+x><nu*i+x|``, one per system outcome."""

    n_s: int
    n_p: int
    topology: Topology

    @classmethod
    def for_specs(cls, spec: SystemSpec, pspec: PointerSpec) -> OutcomeProjectors:
        pspec.nu(spec.n_s)
        return cls(spec.n_s, pspec.n_p, pspec.topology)

    @property
    def nu(self) -> int:
        return self.n_p // self.n_s

    def pi(self, i: int) -> np.ndarray:
        p = np.zeros((self.n_p, self.n_p), dtype=complex)
        for x in range(self.nu):
            p[self.nu * i + x, self.nu * i + x] = 1.0
        return p

    def pointer_outcome(self, i: int, j: int) -> np.ndarray:
        """Pointer-side projector reporting system outcome ``|ij>``."""
        if self.topology is Topology.BIPARTITE_FULL:
            return qmath.kron(self.pi(i), self.pi(j))
        return self.pi(j)

    @property
    def pointer_dim(self) -> int:
        return self.n_p ** 2 if self.topology is Topology.BIPARTITE_FULL else self.n_p


def _outcomes(projs: OutcomeProjectors) -> list[tuple[int, int]]:
    n = projs.n_s
    if projs.topology is Topology.BIPARTITE_FULL:
        return [(i, j) for i in range(n) for j in range(n)]
    return [(0, j) for j in range(n)]


def _system_outcome(projs: OutcomeProjectors, i: int, j: int) -> np.ndarray:
    """System projector for outcome ``|ij>`` (``I ⊗ |j><j|`` when only B is read)."""
    n = projs.n_s
    pj = np.diag(np.eye(n)[j]).astype(complex)
    if projs.topology is Topology.BIPARTITE_FULL:
        return qmath.kron(np.diag(np.eye(n)[i]), pj)
    return qmath.kron(np.eye(n), pj)


def c_max(rho_sp: DensityOp, projs: OutcomeProjectors) -> float:
    """Probability that system and pointer agree, ``sum_i Tr[|i><i| ⊗ Pi_i rho_SP]``."""
    m = sum(qmath.kron(_system_outcome(projs, i, j), projs.pointer_outcome(i, j))
            for i, j in _outcomes(projs))
    return qmath.expect(m, rho_sp.mat)


@dataclass(frozen=True)
class AxiomReport:
    bias_residual: float
    invasive_residual: float
    c_max: float


def _measured_populations(rho_s: DensityOp, topology: Topology) -> np.ndarray:
    pop = _system_diag(rho_s)
    return pop.ravel() if topology is Topology.BIPARTITE_FULL else pop.sum(axis=0)


def axiom_report(rho_s: DensityOp, rho_sp: DensityOp, projs: OutcomeProjectors) -> AxiomReport:
    """Max-abs violations of unbiasedness and non-invasiveness, plus ``C_max``.

    Outcomes are the joint basis ``|ij>`` for the bipartite pointer and the
    basis of B for a single pointer on B.
    """
    dsys = projs.n_s ** 2
    ref = _measured_populations(rho_s, projs.topology)
    pointer_stats = []
    system_stats = []
    for i, j in _outcomes(projs):
        ptr = qmath.kron(np.eye(dsys), projs.pointer_outcome(i, j))
        pointer_stats.append(qmath.expect(ptr, rho_sp.mat))
        sys = qmath.kron(_system_outcome(projs, i, j), np.eye(projs.pointer_dim))
        system_stats.append(qmath.expect(sys, rho_sp.mat))
    return AxiomReport(
        bias_residual=float(np.max(np.abs(np.array(pointer_stats) - ref))),
        invasive_residual=float(np.max(np.abs(np.array(system_stats) - ref))),
        c_max=c_max(rho_sp, projs),
    )


def cooling_is_extrapolated(pspec: PointerSpec) -> bool:
    return pspec.n_p > 2


def cooling_cost(pspec: PointerSpec) -> float:
    """Free-energy cost of cooling the pointer from ``beta`` to ``beta_prime``.

    A qubit pointer uses
    ``(b'/b - 1)(E_P/(1+exp(-b' E_P)) - E_P/(1+exp(-b E_P)))``. Other pointers
    use ``(b'/b - 1)(<H_P>_b - <H_P>_b')``, which is the same expression for a
    qubit; for ``n_p > 2`` it is an extrapolation.
    """
    b, bp = pspec.beta, pspec.beta_prime
    if not b > 0:
        raise SpecError(f"ambient beta must be > 0, got {b}")
    if bp < b:
        raise SpecError(f"beta_prime = {bp:g} < beta = {b:g}: cooling never heats")
    if bp == b:
        return 0.0
    factor = bp / b - 1.0
    e = pspec.energies_b
    if pspec.topology is Topology.SINGLE_ON_B and pspec.n_p == 2 and e[0] == 0.0:
        e_p = e[1]
        return factor * (e_p / (1.0 + math.exp(-bp * e_p)) - e_p / (1.0 + math.exp(-b * e_p)))
    h_p = build_h_p(pspec)
    hot = qmath.expect(h_p, pointer_state(pspec, b).mat)
    cold = qmath.expect(h_p, pointer_state(pspec, bp).mat)
    return factor * (hot - cold)
