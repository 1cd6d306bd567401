import math

import numpy as np
import pytest

from qmengine import qmath
from qmengine.measurement import (
    CorrelationScheme,
    OutcomeProjectors,
    Scheme,
    UnsupportedConfiguration,
    axiom_report,
    block_unitaries,
    build_u_corr,
    c_max,
    cooling_cost,
    cooling_is_extrapolated,
    correlate,
    faithful_block_unitary,
    joint_probs,
    noninvasive_psp,
    unbiased_psp,
)
from qmengine.model import (
    DensityOp,
    PointerSpec,
    SpecError,
    SystemSpec,
    Topology,
    build_h_p,
    pointer_state,
    purity_to_beta,
)
from conftest import random_density
from oracles import enumerate_cycle, qubit_pointer

QUBITS = SystemSpec((0, 10), (0, 60))
QUTRITS = SystemSpec((0, 1, 2), (0, 3, 7))
BETA = 1 / 30

CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
# |00><00| + |01><11| + |11><10| + |10><01| on (B, pointer)
U_UNB = np.zeros((4, 4))
U_UNB[0, 0] = U_UNB[1, 3] = U_UNB[3, 2] = U_UNB[2, 1] = 1


def qubit_pointer_spec(p, e_p=1.0):
    return PointerSpec.qubit(e_p, BETA, purity_to_beta(p, e_p))


NI = CorrelationScheme(Scheme.NONINVASIVE)
UNB = CorrelationScheme(Scheme.UNBIASED)


class TestFaithfulBlockUnitary:
    @pytest.mark.parametrize("n_s,n_p", [(2, 2), (2, 4), (3, 3), (3, 6)])
    def test_zero_is_identity(self, n_s, n_p):
        assert np.array_equal(faithful_block_unitary(0, n_s, n_p), np.eye(n_p))

    def test_qubit_is_x(self):
        assert np.array_equal(faithful_block_unitary(1, 2, 2), [[0, 1], [1, 0]])

    def test_block_size_two(self):
        u = faithful_block_unitary(1, 2, 4)
        expected = np.eye(4)[[2, 3, 0, 1]]
        assert np.array_equal(u, expected)

    @pytest.mark.parametrize("n_s,n_p", [(2, 2), (2, 4), (3, 3), (3, 6)])
    def test_involutive_hermitian_permutation(self, n_s, n_p):
        for u in block_unitaries(n_s, n_p):
            assert np.array_equal(u @ u, np.eye(n_p))
            assert np.array_equal(u, u.conj().T)
            assert set(np.unique(u.real)) <= {0.0, 1.0}

    def test_non_integral_block_rejected(self):
        with pytest.raises(SpecError):
            faithful_block_unitary(1, 2, 3)


class TestBuildUCorr:
    def test_noninvasive_qubits_is_cnot(self):
        u = build_u_corr(NI, QUBITS, qubit_pointer_spec(0.8))
        assert np.array_equal(u, np.kron(np.eye(2), CNOT))

    def test_unbiased_qubits_matrix(self):
        u = build_u_corr(UNB, QUBITS, qubit_pointer_spec(0.8))
        assert np.array_equal(u, np.kron(np.eye(2), U_UNB))

    @pytest.mark.parametrize("scheme,pspec", [
        (CorrelationScheme(Scheme.NONINVASIVE, 2), PointerSpec((0, 1, 2, 3), BETA, 1.0)),
        (NI, PointerSpec((0, 1), BETA, 1.0, Topology.BIPARTITE_FULL, (0, 1))),
        (UNB, PointerSpec((0, 1), BETA, 1.0, Topology.BIPARTITE_FULL, (0, 1))),
        (CorrelationScheme(Scheme.NONINVASIVE, 2),
         PointerSpec((0, 1, 2, 3), BETA, 1.0, Topology.BIPARTITE_FULL, (0, 1, 2, 3))),
    ])
    def test_unitary(self, scheme, pspec):
        u = build_u_corr(scheme, QUBITS, pspec)
        assert np.abs(u.conj().T @ u - np.eye(u.shape[0])).max() < 1e-12

    def test_unbiased_requires_unit_block(self):
        with pytest.raises(UnsupportedConfiguration):
            CorrelationScheme(Scheme.UNBIASED, nu=2)

    def test_block_size_must_match_pointer(self):
        with pytest.raises(SpecError):
            build_u_corr(NI, QUBITS, PointerSpec((0, 1, 2, 3), BETA, 1.0))

    def test_qutrit_bipartite_unitary(self):
        pspec = PointerSpec((0, 1, 2), BETA, 1.0, Topology.BIPARTITE_FULL, (0, 1, 2))
        for scheme in (NI, UNB):
            u = build_u_corr(scheme, QUTRITS, pspec)
            assert u.shape == (81, 81)
            assert np.abs(u.conj().T @ u - np.eye(81)).max() < 1e-12


class TestCorrelate:
    def test_identity_costs_nothing(self, rng):
        rho = DensityOp(random_density(rng, 4), (2, 2))
        pspec = qubit_pointer_spec(0.7)
        rho_sp, e = correlate(rho, QUBITS, pspec, np.eye(8))
        assert e == 0.0
        assert np.abs(rho_sp.mat - np.kron(rho.mat, pointer_state(pspec).mat)).max() < 1e-15

    @pytest.mark.parametrize("p", [0.55, 0.8, 0.95])
    def test_pointer_energy_rises_when_b_excited(self, p):
        e_p = 1.7
        rho = DensityOp(np.diag([0, 1, 0, 0]), (2, 2))
        pspec = qubit_pointer_spec(p, e_p)
        _, e = correlate(rho, QUBITS, pspec, build_u_corr(NI, QUBITS, pspec))
        assert abs(e - e_p * (2 * p - 1)) < 1e-12

    @pytest.mark.parametrize("kind", ["noninvasive", "unbiased"])
    def test_matches_enumeration(self, rng, kind):
        rho = DensityOp(random_density(rng, 4), (2, 2))
        pspec = qubit_pointer_spec(0.9)
        scheme = CorrelationScheme(kind)
        rho_sp, e = correlate(rho, QUBITS, pspec, build_u_corr(scheme, QUBITS, pspec))
        ref = enumerate_cycle(rho.diag(), (0, 10), (0, 60), qubit_pointer(0.9), (0, 1), kind)
        assert abs(e - ref.e_corr) < 1e-12
        rho_sp.validate()

    def test_dimension_mismatch(self, rng):
        rho = DensityOp(random_density(rng, 9), (3, 3))
        pspec = qubit_pointer_spec(0.9)
        with pytest.raises(qmath.DimensionError):
            correlate(rho, QUBITS, pspec, np.eye(8))


class TestJointProbs:
    def test_perfect_copy_limit(self, rng):
        rho = DensityOp(np.diag(rng.dirichlet(np.ones(4))), (2, 2))
        pspec = PointerSpec.qubit(1.0, BETA, 1e3)  # ground population is 1.0 in floating point
        rho_sp, _ = correlate(rho, QUBITS, pspec, build_u_corr(NI, QUBITS, pspec))
        table = joint_probs(rho_sp).b_marginal()
        pb = rho.diag().reshape(2, 2).sum(axis=0)
        assert np.abs(table - np.diag(pb)).max() < 1e-15

    @pytest.mark.parametrize("p", [0.6, 0.75, 0.99])
    def test_thermal_pointer_cnot(self, rng, p):
        rho = DensityOp(random_density(rng, 4), (2, 2))
        pspec = qubit_pointer_spec(p)
        rho_sp, _ = correlate(rho, QUBITS, pspec, build_u_corr(NI, QUBITS, pspec))
        table = joint_probs(rho_sp).b_marginal()
        pb = rho.diag().reshape(2, 2).sum(axis=0)
        for j in range(2):
            for l in range(2):
                assert abs(table[j, l] - pb[j] * (p if l == j else 1 - p)) < 1e-12

    @pytest.mark.parametrize("seed", range(5))
    @pytest.mark.parametrize("case", ["single", "single_nu2", "bipartite", "bipartite_qutrit"])
    def test_matrix_equals_closed_form(self, seed, case):
        rng = np.random.default_rng(seed)
        if case == "single":
            spec, pspec = QUBITS, qubit_pointer_spec(0.83)
        elif case == "single_nu2":
            spec, pspec = QUBITS, PointerSpec((0, 1, 1.5, 2.5), BETA, 0.6)
        elif case == "bipartite":
            spec, pspec = QUBITS, PointerSpec((0, 1), BETA, 0.9, Topology.BIPARTITE_FULL, (0, 2))
        else:
            spec = QUTRITS
            pspec = PointerSpec((0, 1, 2), BETA, 0.7, Topology.BIPARTITE_FULL, (0, 1.5, 2))
        n_s = spec.n_s
        nu = pspec.n_p // n_s
        rho = DensityOp(random_density(rng, n_s * n_s), spec.dims)
        tau = pointer_state(pspec)
        blocks = block_unitaries(n_s, pspec.n_p)
        kinds = [Scheme.NONINVASIVE] if nu > 1 else [Scheme.NONINVASIVE, Scheme.UNBIASED]
        for kind in kinds:
            scheme = CorrelationScheme(kind, nu)
            rho_sp, _ = correlate(rho, spec, pspec, build_u_corr(scheme, spec, pspec))
            oracle = noninvasive_psp if kind is Scheme.NONINVASIVE else unbiased_psp
            ref = oracle(rho, tau, blocks, pspec.topology)
            got = joint_probs(rho_sp)
            assert np.abs(got.probs - ref.probs).max() < 1e-12
            assert abs(got.probs.sum() - 1) < 1e-12 and got.probs.min() >= 0


class TestCMax:
    def _cmax(self, scheme, p, rho=None):
        rho = rho or DensityOp(np.diag([0.1, 0.2, 0.3, 0.4]), (2, 2))
        pspec = (PointerSpec.qubit(1.0, BETA, 1e3) if p == 1 else qubit_pointer_spec(p))
        rho_sp, _ = correlate(rho, QUBITS, pspec, build_u_corr(scheme, QUBITS, pspec))
        return c_max(rho_sp, OutcomeProjectors.for_specs(QUBITS, pspec))

    def test_ideal_limit(self):
        assert abs(self._cmax(NI, 1) - 1) < 1e-15

    @pytest.mark.parametrize("scheme", [NI, UNB])
    def test_equals_purity(self, scheme, rng):
        rho = DensityOp(random_density(rng, 4), (2, 2))
        for p in (0.51, 0.7, 0.93):
            assert abs(self._cmax(scheme, p, rho) - p) < 1e-12

    @pytest.mark.parametrize("scheme", [NI, UNB])
    def test_increasing_and_below_one(self, scheme):
        ps = np.linspace(0.501, 0.999, 40)
        vals = [self._cmax(scheme, p) for p in ps]
        assert np.all(np.diff(vals) > 0)
        assert max(vals) < 1

    def test_bipartite_qubits(self, rng):
        pspec = PointerSpec((0, 1), BETA, purity_to_beta(0.8, 1), Topology.BIPARTITE_FULL, (0, 1))
        rho = DensityOp(random_density(rng, 4), (2, 2))
        rho_sp, _ = correlate(rho, QUBITS, pspec, build_u_corr(NI, QUBITS, pspec))
        # both pointers must read correctly
        assert abs(c_max(rho_sp, OutcomeProjectors.for_specs(QUBITS, pspec)) - 0.64) < 1e-12


class TestAxiomReport:
    def _report(self, scheme, rho, p):
        pspec = qubit_pointer_spec(p)
        rho_sp, _ = correlate(rho, QUBITS, pspec, build_u_corr(scheme, QUBITS, pspec))
        return axiom_report(rho, rho_sp, OutcomeProjectors.for_specs(QUBITS, pspec))

    @pytest.mark.parametrize("seed", range(10))
    def test_cnot_is_non_invasive(self, seed):
        rho = DensityOp(random_density(np.random.default_rng(seed), 4), (2, 2))
        rep = self._report(NI, rho, 0.77)
        assert rep.invasive_residual <= 1e-12
        pb1 = rho.diag().reshape(2, 2).sum(axis=0)[1]
        assert abs(rep.bias_residual - (1 - 0.77) * abs(2 * pb1 - 1)) < 1e-12

    @pytest.mark.parametrize("seed", range(10))
    def test_unb_is_unbiased(self, seed):
        rho = DensityOp(random_density(np.random.default_rng(seed), 4), (2, 2))
        rep = self._report(UNB, rho, 0.77)
        assert rep.bias_residual <= 1e-12
        # B's post-measurement statistics are the pointer's, permuted by B's value
        pb1 = rho.diag().reshape(2, 2).sum(axis=0)[1]
        expected = abs((pb1 * 0.77 + (1 - pb1) * 0.23) - pb1)
        assert abs(rep.invasive_residual - expected) < 1e-12
        assert rep.invasive_residual > 0

    def test_bipartite_qutrits(self, rng):
        pspec = PointerSpec((0, 1, 2), BETA, 1.5, Topology.BIPARTITE_FULL, (0, 1, 2))
        rho = DensityOp(random_density(rng, 9), (3, 3))
        projs = OutcomeProjectors.for_specs(QUTRITS, pspec)
        for scheme, field in ((NI, "invasive_residual"), (UNB, "bias_residual")):
            rho_sp, _ = correlate(rho, QUTRITS, pspec, build_u_corr(scheme, QUTRITS, pspec))
            rep = axiom_report(rho, rho_sp, projs)
            assert getattr(rep, field) <= 1e-12
            assert 0 < rep.c_max < 1


class TestCoolingCost:
    def test_no_cooling(self):
        assert cooling_cost(PointerSpec.qubit(1.0, BETA, BETA)) == 0.0

    def test_default_point_value(self):
        bp = math.log(9)
        expected = (bp * 30 - 1) * (0.9 - 1 / (1 + math.exp(-1 / 30)))
        got = cooling_cost(PointerSpec.qubit(1.0, BETA, bp))
        assert abs(got - expected) < 1e-12
        assert abs(got - 25.4256) < 1e-3

    def test_third_law_divergence(self):
        # grows like ln(1/(1-P)) without bound
        costs = [cooling_cost(qubit_pointer_spec(1 - 10.0 ** -k)) for k in (3, 6, 9, 12)]
        steps = np.diff(costs)
        assert np.all(steps > 0)
        assert np.allclose(steps, steps[0], rtol=1e-2)

    def test_heating_rejected(self):
        with pytest.raises(SpecError):
            cooling_cost(PointerSpec.qubit(1.0, BETA, BETA / 2))

    def test_general_formula_reduces_to_qubit(self):
        # bipartite pair of qubit pointers: costs add
        bp = 1.3
        single = cooling_cost(PointerSpec.qubit(1.0, BETA, bp))
        pair = PointerSpec((0, 1), BETA, bp, Topology.BIPARTITE_FULL, (0, 1))
        assert abs(cooling_cost(pair) - 2 * single) < 1e-12
        assert not cooling_is_extrapolated(pair)

    def test_multilevel(self):
        pspec = PointerSpec((0, 1, 2, 3), BETA, 0.5)
        h = build_h_p(pspec)
        hot = np.real(np.trace(h @ pointer_state(pspec, BETA).mat))
        cold = np.real(np.trace(h @ pointer_state(pspec).mat))
        assert abs(cooling_cost(pspec) - (0.5 / BETA - 1) * (hot - cold)) < 1e-12
        assert cooling_is_extrapolated(pspec)
        costs = [cooling_cost(pspec.with_beta_prime(b)) for b in np.linspace(BETA, 5, 30)]
        assert costs[0] == 0 and np.all(np.diff(costs) > 0)
