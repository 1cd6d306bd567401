"""Two-qubit entanglement (EME) and thermally correlated (TCME) engines.

Basis order is ``|AB> = |00>, |01>, |10>, |11>``. With ``E^A_1 = omega_a`` and
``E^B_1 = omega_a + delta`` the local energies are
``(0, omega_a + delta, omega_a, 2 omega_a + delta)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from qmengine import qmath
from qmengine.engine import CycleConfig, CycleError, EnergyLedger, PrepMode, SwapRule, run_cycle
from qmengine.measurement import CorrelationScheme, Scheme
from qmengine.model import (
    DensityOp,
    PointerSpec,
    SpecError,
    SystemSpec,
    build_h_int,
    build_h_loc,
    purity_to_beta,
    thermal_state,
)

DIMS = (2, 2)
I00, I01, I10, I11 = range(4)


@dataclass(frozen=True)
class TwoQubitConfig:
    omega_a: float = 10.0
    delta: float = 50.0
    theta: float = math.pi / 5
    q: float = 0.05
    beta: float = 1.0 / 30.0
    e_p: float = 1.0
    scheme: Scheme = Scheme.NONINVASIVE
    swap_rule: SwapRule = SwapRule.RAW_INDEX

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "swap_rule", SwapRule(self.swap_rule))

    def validate(self) -> None:
        if not 0 < self.q <= 1:
            raise SpecError(f"q = {self.q} must lie in (0, 1] to keep the state full rank")
        if not self.delta > 0:
            raise SpecError(f"delta = {self.delta} must be > 0 (positive detuning)")
        if not self.omega_a >= 0:
            raise SpecError(f"omega_a = {self.omega_a} must be >= 0")
        if not 0 <= self.theta < math.pi / 2:
            raise SpecError(f"theta = {self.theta} must lie in [0, pi/2)")
        if not self.beta > 0:
            raise SpecError(f"beta = {self.beta} must be > 0")
        if not self.e_p > 0:
            raise SpecError(f"e_p = {self.e_p} must be > 0")

    @property
    def g(self) -> float:
        return self.delta * math.tan(self.theta)

    @property
    def t1(self) -> float:
        return math.pi / math.hypot(self.g, self.delta)

    def system_spec(self) -> SystemSpec:
        return SystemSpec(
            energies_a=(0.0, self.omega_a),
            energies_b=(0.0, self.omega_a + self.delta),
            couplings={(0, 1): self.g},
        )

    def pointer_spec(self, beta_prime: float) -> PointerSpec:
        return PointerSpec.qubit(self.e_p, self.beta, beta_prime)

    def correlation_scheme(self) -> CorrelationScheme:
        return CorrelationScheme(self.scheme, nu=1)


class NthMode(str, enum.Enum):
    MATCH_EME = "match_eme"
    FROM_BATH = "from_bath"


@dataclass(frozen=True)
class TcmeBathConfig:
    n_th_mode: NthMode = NthMode.MATCH_EME
    gamma: float = 1.0
    gamma_prime: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "n_th_mode", NthMode(self.n_th_mode))

    def validate(self) -> None:
        if not (self.gamma > 0 and self.gamma_prime > 0):
            raise SpecError("dissipation rates gamma and gamma_prime must be > 0")

    def n_th(self, cfg: TwoQubitConfig) -> float:
        """Mean occupation of the bath driving the ``|01> <-> |10>`` exchange."""
        if self.n_th_mode is NthMode.FROM_BATH:
            return 1.0 / math.expm1(cfg.beta * cfg.delta)
        t2 = math.tan(cfg.theta) ** 2
        if t2 >= 1.0 - 1e-12:  # tan(pi/4)**2 rounds to just below 1
            raise SpecError(
                f"theta = {cfg.theta:.6g} >= pi/4: tan^2(theta) = n_th/(n_th+1) has no solution"
            )
        return t2 / (1.0 - t2)

    def theta(self, cfg: TwoQubitConfig) -> float:
        """Angle with ``tan^2(theta) = n_th / (n_th + 1)``."""
        n = self.n_th(cfg)
        return math.atan(math.sqrt(n / (n + 1.0)))


def _gibbs(cfg: TwoQubitConfig) -> np.ndarray:
    return thermal_state(build_h_loc(cfg.system_spec()), cfg.beta, DIMS).mat


def eme_initial(cfg: TwoQubitConfig) -> DensityOp:
    """``(1-q)|10><10| + q exp(-beta H_loc)/Z``."""
    cfg.validate()
    pure = np.zeros((4, 4), dtype=complex)
    pure[I10, I10] = 1.0
    return DensityOp((1 - cfg.q) * pure + cfg.q * _gibbs(cfg), DIMS)


def eme_entangle(rho0: DensityOp, cfg: TwoQubitConfig) -> DensityOp:
    """Evolve under ``H_loc + H_int`` for ``t1 = pi / sqrt(g^2 + delta^2)``."""
    spec = cfg.system_spec()
    h = build_h_loc(spec) + build_h_int(spec)
    return DensityOp(qmath.evolve_unitary(rho0.mat, h, cfg.t1), DIMS)


def tcme_state(cfg: TwoQubitConfig, bath: TcmeBathConfig) -> DensityOp:
    """``(1-q)(cos^2 th |10><10| + sin^2 th |01><01|) + q exp(-beta H_loc)/Z``.

    ``th`` follows from the bath occupation, so it equals ``cfg.theta`` only in
    ``MATCH_EME`` mode.
    """
    cfg.validate()
    th = bath.theta(cfg)
    mix = np.zeros((4, 4), dtype=complex)
    mix[I10, I10] = math.cos(th) ** 2
    mix[I01, I01] = math.sin(th) ** 2
    return DensityOp((1 - cfg.q) * mix + cfg.q * _gibbs(cfg), DIMS)


def _ketbra(i: int, j: int) -> np.ndarray:
    m = np.zeros((4, 4), dtype=complex)
    m[i, j] = 1.0
    return m


def jump_operators(cfg: TwoQubitConfig, bath: TcmeBathConfig) -> list[tuple[float, np.ndarray]]:
    """``(rate, L)`` pairs of the dissipative reset."""
    n = bath.n_th(cfg)
    sp = np.array([[0, 0], [1, 0]], dtype=complex)  # |1><0|
    sm = sp.T.copy()
    p0 = np.diag([1, 0]).astype(complex)
    p1 = np.diag([0, 1]).astype(complex)
    return [
        (bath.gamma, np.kron(sp, p0)),
        (bath.gamma, np.kron(p1, sm)),
        (bath.gamma_prime * n, _ketbra(I01, I10)),
        (bath.gamma_prime * (n + 1), _ketbra(I10, I01)),
    ]


def _make_rhs(cfg: TwoQubitConfig, bath: TcmeBathConfig):
    h = build_h_loc(cfg.system_spec())
    terms = []
    for rate, L in jump_operators(cfg, bath):
        Ld = qmath.dag(L)
        terms.append((rate, L, Ld, Ld @ L))

    def rhs(rho: np.ndarray) -> np.ndarray:
        out = -1j * (h @ rho - rho @ h)
        for rate, L, Ld, LdL in terms:
            out += rate * (L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL))
        return out

    return rhs, h


def lindblad_rhs(rho: np.ndarray, cfg: TwoQubitConfig, bath: TcmeBathConfig) -> np.ndarray:
    """``-i[H_loc, rho] + sum_k rate_k D[L_k] rho``."""
    rho = rho.mat if isinstance(rho, DensityOp) else qmath.as_cmat(rho)
    return _make_rhs(cfg, bath)[0](rho)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (n_samples, 4, 4)

    @property
    def final(self) -> DensityOp:
        return DensityOp(self.states[-1], DIMS)


def stability_bound(cfg: TwoQubitConfig, bath: TcmeBathConfig) -> float:
    """Largest rate scale the fixed step has to resolve."""
    e = np.real(np.diag(build_h_loc(cfg.system_spec())))
    n = bath.n_th(cfg)
    return max(bath.gamma, bath.gamma_prime * (n + 1), float(e.max() - e.min()))


def lindblad_evolve(rho0: DensityOp, cfg: TwoQubitConfig, bath: TcmeBathConfig,
                    dt: float, t_max: float, sample_every: int = 1) -> Trajectory:
    """Fixed-step classic RK4 integration of the reset master equation.

    Requires ``dt * stability_bound <= 0.1``.
    """
    bath.validate()
    if dt <= 0 or t_max < 0:
        raise ValueError("dt must be > 0 and t_max >= 0")
    scale = stability_bound(cfg, bath)
    if dt * scale > 0.1:
        raise ValueError(
            f"step dt = {dt:g} too large: dt * {scale:g} = {dt * scale:.3g} exceeds 0.1"
        )
    if sample_every < 1:
        raise ValueError("sample_every must be >= 1")
    n_steps = int(round(t_max / dt))
    rhs, _ = _make_rhs(cfg, bath)

    rho = rho0.mat.copy()
    times = [0.0]
    states = [rho.copy()]
    for step in range(1, n_steps + 1):
        k1 = rhs(rho)
        k2 = rhs(rho + 0.5 * dt * k1)
        k3 = rhs(rho + 0.5 * dt * k2)
        k4 = rhs(rho + dt * k3)
        rho = rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if step % sample_every == 0 or step == n_steps:
            times.append(step * dt)
            states.append(rho.copy())
    return Trajectory(np.array(times), np.array(states))


ENGINES = ("eme", "tcme")


@dataclass(frozen=True)
class SweepRow:
    scheme: str
    engine: str
    p: float
    beta_prime: float | None
    ledger: EnergyLedger | None = None
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error

    @property
    def eta(self) -> float | None:
        return self.ledger.eta if self.ledger is not None else None


@dataclass(frozen=True)
class EngineStates:
    rho_ref: DensityOp
    rho_work: DensityOp
    prep_mode: PrepMode


def engine_states(engine: str, cfg: TwoQubitConfig, bath: TcmeBathConfig) -> EngineStates:
    if engine == "eme":
        rho0 = eme_initial(cfg)
        return EngineStates(rho0, eme_entangle(rho0, cfg), PrepMode.FROM_REFERENCE)
    if engine == "tcme":
        rho = tcme_state(cfg, bath)
        return EngineStates(rho, rho, PrepMode.DISSIPATIVE_DIRECT)
    raise ValueError(f"unknown engine {engine!r}; expected one of {ENGINES}")


def cycle_config(states: EngineStates, cfg: TwoQubitConfig, beta_prime: float) -> CycleConfig:
    return CycleConfig(
        spec=cfg.system_spec(),
        pspec=cfg.pointer_spec(beta_prime),
        scheme=cfg.correlation_scheme(),
        rho_ref=states.rho_ref,
        rho_work=states.rho_work,
        prep_mode=states.prep_mode,
        swap_rule=cfg.swap_rule,
    )


def evaluate_point(engine: str, states: EngineStates, cfg: TwoQubitConfig, p: float) -> SweepRow:
    scheme = cfg.scheme.value
    try:
        bp = purity_to_beta(p, cfg.e_p)
    except SpecError as exc:
        return SweepRow(scheme, engine, p, None, error=f"pointer: {exc}")
    try:
        ledger = run_cycle(cycle_config(states, cfg, bp))
    except CycleError as exc:
        return SweepRow(scheme, engine, p, bp, error=str(exc))
    return SweepRow(scheme, engine, p, bp, ledger)


def sweep(cfg: TwoQubitConfig, bath: TcmeBathConfig, p_grid: Iterable[float],
          engines: Sequence[str] = ENGINES) -> list[SweepRow]:
    """Evaluate every engine at every pointer purity in ``p_grid``.

    Rows that fail carry an error tag instead of a ledger. Output is sorted by
    ``(scheme, engine, P)``.
    """
    p_grid = [float(p) for p in p_grid]
    rows = []
    for engine in engines:
        try:
            states = engine_states(engine, cfg, bath)
        except (SpecError, ValueError) as exc:
            rows.extend(SweepRow(cfg.scheme.value, engine, p, None, error=f"prep: {exc}")
                        for p in p_grid)
            continue
        rows.extend(evaluate_point(engine, states, cfg, p) for p in p_grid)
    rows.sort(key=lambda r: (r.scheme, r.engine, r.p))
    return rows


def default_grid() -> np.ndarray:
    return np.linspace(0.501, 0.999, 499)


# -- diagnostics for the qualitative shape of efficiency curves --

def curve(rows: Sequence[SweepRow], engine: str, field_name: str = "eta"):
    """``(P, values)`` for one engine; missing ledgers and null ``eta`` give NaN."""
    sel = [r for r in rows if r.engine == engine]
    ps = np.array([r.p for r in sel])
    vals = np.array([
        np.nan if r.ledger is None or getattr(r.ledger, field_name) is None
        else getattr(r.ledger, field_name)
        for r in sel
    ], dtype=float)
    return ps, vals


def eme_wins(rows: Sequence[SweepRow]) -> np.ndarray:
    """Purities where the EME is strictly more efficient than the TCME.

    A null efficiency (no net work) counts as zero.
    """
    p_e, eta_e = curve(rows, "eme")
    p_t, eta_t = curve(rows, "tcme")
    if not np.array_equal(p_e, p_t):
        raise ValueError("EME and TCME rows are on different grids")
    e = np.nan_to_num(eta_e, nan=0.0)
    t = np.nan_to_num(eta_t, nan=0.0)
    return p_e[e > t]


def sign_changes(ps: np.ndarray, values: np.ndarray) -> list[float]:
    """Midpoints between consecutive finite samples whose signs differ."""
    ok = np.isfinite(values)
    ps, values = ps[ok], values[ok]
    s = np.sign(values)
    idx = np.nonzero(s[:-1] * s[1:] < 0)[0]
    return [0.5 * (ps[i] + ps[i + 1]) for i in idx]


def argmax_p(ps: np.ndarray, values: np.ndarray) -> float:
    if not np.any(np.isfinite(values)):
        raise ValueError("curve has no finite values")
    return float(ps[np.nanargmax(values)])


@dataclass(frozen=True)
class KinkReport:
    p_star: float
    slope_before: float
    slope_after: float
    jump: float
    background_variation: float

    @property
    def ratio(self) -> float:
        return self.jump / self.background_variation if self.background_variation else math.inf


def kink_report(ps: np.ndarray, eta: np.ndarray, p_star: float, window: int = 8) -> KinkReport:
    """Compare the efficiency slope on either side of ``p_star``.

    Slopes are central differences whose stencils stay on one side of the
    kink. The background is the largest change between neighbouring slopes
    inside ``window`` points on either side.
    """
    h = np.diff(ps)
    slope = np.full(ps.shape, np.nan)
    slope[1:-1] = (eta[2:] - eta[:-2]) / (h[1:] + h[:-1])
    k = int(np.searchsorted(ps, p_star))  # first sample above p_star
    before = slope[k - 2]
    after = slope[k + 1]
    left = slope[max(k - 2 - window, 1):k - 1]
    right = slope[k + 1:k + 2 + window]
    var = max(np.nanmax(np.abs(np.diff(left)), initial=0.0),
              np.nanmax(np.abs(np.diff(right)), initial=0.0))
    return KinkReport(float(p_star), float(before), float(after),
                      float(abs(after - before)), float(var))
