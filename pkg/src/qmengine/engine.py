"""The four-stroke measurement-engine cycle and its energy ledger.

Stages, in order: preparation, pointer cooling, system-pointer correlation,
pointer readout with swap feedback, reset of the system to the reference.
Sign convention: ``w < 0`` means work was extracted.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field

import numpy as np

from qmengine import qmath
from qmengine.measurement import (
    CorrelationScheme,
    OutcomeProjectors,
    build_u_corr,
    c_max,
    cooling_cost,
    cooling_is_extrapolated,
    correlate,
)
from qmengine.model import (
    DensityOp,
    PointerSpec,
    SystemSpec,
    Topology,
    build_h_loc,
    build_h_p,
)


class PrepMode(str, enum.Enum):
    FROM_REFERENCE = "from_reference"
    DISSIPATIVE_DIRECT = "dissipative_direct"


class SwapRule(str, enum.Enum):
    RAW_INDEX = "raw_index"
    DECODED_BLOCK = "decoded_block"


class CycleError(RuntimeError):
    """A cycle stage failed; ``stage`` names where."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
        self.message = message


@dataclass(frozen=True)
class CycleConfig:
    spec: SystemSpec
    pspec: PointerSpec
    scheme: CorrelationScheme
    rho_ref: DensityOp
    rho_work: DensityOp
    prep_mode: PrepMode = PrepMode.FROM_REFERENCE
    swap_rule: SwapRule = SwapRule.RAW_INDEX
    # replaces the scheme's correlator when given (diagnostics only)
    u_corr: np.ndarray | None = field(default=None, compare=False)


@dataclass(frozen=True)
class EnergyLedger:
    e_prep: float
    e_cool: float
    e_corr: float
    w: float
    e_reset: float
    e_reset_clamped: float
    e_meas: float
    eta: float | None
    c_max: float
    cooling_extrapolated: bool = False

    @classmethod
    def assemble(cls, e_prep, e_cool, e_corr, w, e_reset, c_max_value,
                 cooling_extrapolated=False) -> EnergyLedger:
        """Fill the derived fields: clamp a negative reset cost, sum, form ``-W/E_meas``."""
        clamped = max(e_reset, 0.0)
        e_meas = e_prep + e_cool + e_corr + clamped
        eta = -w / e_meas if (w < 0 and e_meas > 0) else None
        return cls(e_prep, e_cool, e_corr, w, e_reset, clamped, e_meas, eta,
                   c_max_value, cooling_extrapolated)

    def as_dict(self) -> dict:
        return asdict(self)


def prep_cost(rho_work: DensityOp, rho_ref: DensityOp, h_loc: np.ndarray) -> float:
    """``Tr[H_loc (rho_S - rho_cl)]``."""
    if rho_work.dims != rho_ref.dims:
        raise qmath.DimensionError(f"layouts differ: {rho_work.dims} vs {rho_ref.dims}")
    return qmath.expect(h_loc, rho_work.mat - rho_ref.mat)


def _swap_on(k: int, l: int, nu: int, rule: SwapRule) -> bool:
    if rule is SwapRule.DECODED_BLOCK:
        return k // nu < l // nu
    return k < l


def feedback_kraus(spec: SystemSpec, pspec: PointerSpec,
                   rule: SwapRule = SwapRule.RAW_INDEX) -> list[np.ndarray]:
    """Kraus operators ``U_kl ⊗ |kl><kl|`` of the readout-and-feedback channel.

    ``U_kl`` swaps the two qudits when the pointer says B sits higher than A
    (``k < l``) and is the identity otherwise. A single pointer on B is read
    with ``k = 0``, so it swaps whenever the pointer leaves the ground block.
    """
    n_s = spec.n_s
    nu = pspec.nu(n_s)
    eye_s = np.eye(n_s * n_s, dtype=complex)
    u_swap = qmath.factor_permutation(spec.dims, (1, 0))
    n_p = pspec.n_p
    if pspec.topology is Topology.BIPARTITE_FULL:
        readings = [(k, l) for k in range(n_p) for l in range(n_p)]
    else:
        readings = [(0, l) for l in range(n_p)]
    dp = len(readings)
    ops = []
    for idx, (k, l) in enumerate(readings):
        proj = np.zeros((dp, dp), dtype=complex)
        proj[idx, idx] = 1.0
        u = u_swap if _swap_on(k, l, nu, rule) else eye_s
        ops.append(qmath.kron(u, proj))
    return ops


def apply_kraus(ops: list[np.ndarray], rho: np.ndarray) -> np.ndarray:
    return sum(k @ rho @ qmath.dag(k) for k in ops)


def feedback_channel(rho_sp: DensityOp, cfg: CycleConfig) -> DensityOp:
    ops = feedback_kraus(cfg.spec, cfg.pspec, cfg.swap_rule)
    return DensityOp(apply_kraus(ops, rho_sp.mat), rho_sp.dims)


def work(rho_sp: DensityOp, rho_fb: DensityOp, h_loc: np.ndarray, h_p: np.ndarray) -> float:
    """``Tr[(H_loc + H_P)(Psi(rho_SP) - rho_SP)]``; negative when work is extracted."""
    h = qmath.kron(h_loc, np.eye(h_p.shape[0])) + qmath.kron(np.eye(h_loc.shape[0]), h_p)
    return qmath.expect(h, rho_fb.mat - rho_sp.mat)


def reset_cost(rho_fb: DensityOp, rho_ref: DensityOp, h_loc: np.ndarray) -> float:
    """``Tr[H_loc (rho_cl - Tr_P Psi(rho_SP))]``. May be negative."""
    n_sys = len(rho_ref.dims)
    rho_sys = rho_fb.ptrace(range(n_sys))
    if rho_sys.dims != rho_ref.dims:
        raise qmath.DimensionError(f"layouts differ: {rho_sys.dims} vs {rho_ref.dims}")
    return qmath.expect(h_loc, rho_ref.mat - rho_sys.mat)


def _stage(name, fn, *args):
    try:
        return fn(*args)
    except CycleError:
        raise
    except (ValueError, ArithmeticError) as exc:
        raise CycleError(name, str(exc)) from exc


def run_cycle(cfg: CycleConfig) -> EnergyLedger:
    """Run one engine cycle and return its energy ledger.

    Raises :class:`CycleError` tagged with the failing stage.
    """
    spec, pspec = cfg.spec, cfg.pspec

    def _validate():
        spec.validate()
        cfg.rho_ref.validate(full_rank=True)
        cfg.rho_work.validate(full_rank=True)
        if cfg.rho_ref.dims != spec.dims or cfg.rho_work.dims != spec.dims:
            raise qmath.DimensionError("reference and working states must have the system layout")
        return build_h_loc(spec)

    h_loc = _stage("validate", _validate)

    if cfg.prep_mode is PrepMode.DISSIPATIVE_DIRECT:
        # preparation and reset coincide; its cost is booked once, under reset
        e_prep = 0.0
    else:
        e_prep = _stage("prep", prep_cost, cfg.rho_work, cfg.rho_ref, h_loc)

    def _cool():
        pspec.validate(spec.n_s)
        return cooling_cost(pspec)

    e_cool = _stage("cool", _cool)

    def _correlate():
        u = cfg.u_corr if cfg.u_corr is not None else build_u_corr(cfg.scheme, spec, pspec)
        rho_sp, e_corr = correlate(cfg.rho_work, spec, pspec, u)
        rho_sp.validate()
        return rho_sp, e_corr

    rho_sp, e_corr = _stage("correlate", _correlate)

    def _feedback():
        rho_fb = feedback_channel(rho_sp, cfg)
        rho_fb.validate()
        return rho_fb, work(rho_sp, rho_fb, h_loc, build_h_p(pspec))

    rho_fb, w = _stage("feedback", _feedback)
    e_reset = _stage("reset", reset_cost, rho_fb, cfg.rho_ref, h_loc)
    cm = _stage("correlate", c_max, rho_sp, OutcomeProjectors.for_specs(spec, pspec))

    return EnergyLedger.assemble(e_prep, e_cool, e_corr, w, e_reset, cm,
                                 cooling_is_extrapolated(pspec))

