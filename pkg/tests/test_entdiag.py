import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from pseudoent import efi, entdiag, families, locc, qcore
from pseudoent.efi import EfiSpec
from pseudoent.qcore import Bipartition

CUT2 = Bipartition([0], [1])


def _oracle_negativity(rho, side, n):
    w = np.linalg.eigvalsh(oracles.partial_transpose(rho, side, n))
    return -w[w < 0].sum()


class TestNegativity:
    def test_bell_state(self):
        bell = qcore.bell_state("phi+").density()
        assert entdiag.negativity(bell, CUT2) == pytest.approx(0.5)
        assert entdiag.log_negativity(bell, CUT2) == pytest.approx(1.0)

    def test_product_and_mixed(self):
        assert entdiag.negativity(qcore.basis_state("01"), CUT2) == 0
        assert entdiag.log_negativity(qcore.maximally_mixed(2), CUT2) == 0

    def test_werner(self):
        # p Phi+ + (1-p) I/4 is entangled iff p > 1/3, with negativity (3p - 1)/4
        bell = qcore.bell_state("phi+").density().data
        for p in (0.2, 1 / 3, 0.6, 0.9):
            w = p * bell + (1 - p) * np.eye(4) / 4
            assert entdiag.negativity(w, CUT2) == pytest.approx(max(0.0, (3 * p - 1) / 4), abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10 ** 6))
    def test_matches_oracle(self, seed):
        rho = oracles.random_density(3, np.random.default_rng(seed), rank=2)
        cut = Bipartition([0, 2], [1])
        assert entdiag.negativity(rho, cut) == pytest.approx(_oracle_negativity(rho, [0, 2], 3), abs=1e-10)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10 ** 6), st.integers(0, 10 ** 6))
    def test_log_negativity_additive(self, s1, s2):
        a = oracles.random_density(2, np.random.default_rng(s1))
        b = oracles.random_density(2, np.random.default_rng(s2))
        joint = np.kron(a, b)
        cut = Bipartition([0, 2], [1, 3])
        assert entdiag.log_negativity(joint, cut) == pytest.approx(
            entdiag.log_negativity(a, CUT2) + entdiag.log_negativity(b, CUT2), abs=1e-9)


class TestPpt:
    def test_bell_fails(self):
        res = entdiag.ppt_check(qcore.bell_state("phi-").density(), CUT2)
        assert not res.is_ppt and res.min_eigenvalue == pytest.approx(-0.5)

    def test_conclusive_only_for_small_cuts(self):
        assert entdiag.ppt_check(qcore.maximally_mixed(2), CUT2).conclusive_separability
        big = entdiag.ppt_check(qcore.maximally_mixed(4), Bipartition([0, 1], [2, 3]))
        assert big.is_ppt and not big.conclusive_separability

    @pytest.mark.parametrize("spec", [EfiSpec("orthogonal"), EfiSpec("angle", theta=0.4),
                                      EfiSpec("keyed_subset", register_qubits=2, seed=3)])
    def test_psi_is_ppt(self, spec):
        pair = families.build_pair(efi.make_instance(spec))
        res = entdiag.ppt_check(pair.psi, pair.cut)
        assert res.is_ppt and res.min_eigenvalue >= -1e-12


class TestGapReport:
    def test_orthogonal(self):
        pair = families.build_pair(efi.make_instance(EfiSpec("orthogonal")))
        rep = entdiag.gap_report(locc.certify(pair), pair.psi, pair.phi, pair.cut)
        assert (rep.cost_upper, rep.distill_lower, rep.gap) == (0, 1, 1)
        assert rep.log_negativity_psi == 0 and rep.log_negativity_phi == pytest.approx(1.0)
        assert rep.ppt_psi

    def test_angle_log_negativity(self):
        # phi = 1/2(Phi+ ⊗ |0><0| + Phi- ⊗ |v><v|); the PT spectrum is computed by brute force
        theta = math.pi / 4
        pair = families.build_pair(efi.make_instance(EfiSpec("angle", theta=theta)))
        want = math.log2(1 + 2 * _oracle_negativity(pair.phi.data, [0, 2], 3))
        assert entdiag.log_negativity(pair.phi, pair.cut) == pytest.approx(want, abs=1e-12)
        assert 0 < want < 1

    def test_missing_inputs(self):
        rep = entdiag.gap_report()
        assert rep.gap is None and rep.log_negativity_psi is None
