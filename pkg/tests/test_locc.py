import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from pseudoent import efi, families, locc, qcore
from pseudoent.efi import EfiInstance, EfiSpec
from pseudoent.errors import CapabilityError, ContractViolation, LocalityViolation
from pseudoent.locc import Coin, Compute, LocalGate, LoccEngine, Send, ShareEPR, measure_z
from pseudoent.qcore import CNOT, H, X, Z, DensityMatrix, Gate

FAMILIES = [
    EfiSpec("orthogonal"),
    EfiSpec("orthogonal", n_qubits=2),
    EfiSpec("angle", theta=math.pi / 6),
    EfiSpec("angle", theta=math.pi / 4),
    EfiSpec("angle", theta=math.pi / 3, n_qubits=2),
    EfiSpec("keyed_subset", register_qubits=3, seed=0),
]
IDS = ["orth1", "orth2", "angle30", "angle45", "angle60x2", "keyed3"]


def teleport_program():
    return [
        ShareEPR(1, 2),
        LocalGate("A", Gate("CNOT", CNOT, (0, 1))),
        LocalGate("A", Gate("H", H, (0,))),
        measure_z("A", 0, "m0"),
        measure_z("A", 1, "m1"),
        Send("A", "m0"),
        Send("A", "m1"),
        LocalGate("B", Gate("X", X, (2,)), control="m1"),
        LocalGate("B", Gate("Z", Z, (2,)), control="m0"),
    ]


class TestEngine:
    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10 ** 6))
    def test_teleportation(self, seed):
        rho = oracles.random_density(1, np.random.default_rng(seed))
        init = np.kron(rho, np.diag([1, 0, 0, 0]))
        eng = LoccEngine(3, [0, 1], [2], initial=init).run(teleport_program())
        assert np.allclose(eng.output([2]), rho, atol=1e-12)
        assert eng.epr_count == 1
        assert len(eng.branches) == 4

    def test_teleportation_sample_mode(self):
        rho = qcore.plus_state().density().data
        init = np.kron(rho, np.diag([1, 0, 0, 0]))
        outs = set()
        for seed in range(6):
            eng = LoccEngine(3, [0, 1], [2], initial=init, mode="sample", seed=seed)
            eng.run(teleport_program())
            assert len(eng.branches) == 1
            assert np.allclose(eng.output([2]), rho, atol=1e-12)
            outs.add((eng.branches[0].memory["B"]["m0"], eng.branches[0].memory["B"]["m1"]))
        assert len(outs) > 1

    @pytest.mark.parametrize("step", [
        LocalGate("A", Gate("X", X, (1,))),
        LocalGate("B", Gate("X", X, (0,))),
        measure_z("B", 0, "m"),
        LocalGate("A", Gate("CNOT", CNOT, (0, 1))),
        ShareEPR(1, 0),
        ShareEPR(0, 0),
    ])
    def test_locality_violations(self, step):
        eng = LoccEngine(2, [0], [1])
        with pytest.raises(LocalityViolation):
            eng.execute(step)

    def test_unknown_party(self):
        with pytest.raises(LocalityViolation):
            LoccEngine(2, [0], [1]).execute(LocalGate("C", Gate("X", X, (0,))))

    def test_register_must_be_received(self):
        eng = LoccEngine(2, [0], [1]).run([Coin("A", "c")])
        with pytest.raises(LocalityViolation):
            eng.execute(LocalGate("B", Gate("X", X, (1,)), control="c"))

    def test_compute_forget_merges_branches(self):
        eng = LoccEngine(2, [0], [1]).run([Coin("A", "a"), Coin("A", "b")])
        assert len(eng.branches) == 4
        eng.execute(Compute("A", ("a", "b"), lambda a, b: a ^ b, "x", forget_inputs=True))
        assert len(eng.branches) == 2
        assert eng.register_distribution("A", "x") == pytest.approx({0: 0.5, 1: 0.5})

    def test_bad_mode_and_initial(self):
        with pytest.raises(ContractViolation):
            LoccEngine(2, [0], [1], mode="fast")
        with pytest.raises(ContractViolation):
            LoccEngine(2, [0], [1], initial=np.eye(2) / 2)


class TestPreparePsi:
    @pytest.mark.parametrize("spec", FAMILIES, ids=IDS)
    def test_prepares_psi_without_entanglement(self, spec):
        inst = efi.make_instance(spec)
        tr, cert = locc.run_prepare_psi(inst)
        assert cert.kind == "cost_upper" and cert.value == 0 and tr.epr_count == 0
        assert tr.fidelity >= 1 - 1e-10
        assert cert.efficient
        pair = families.build_pair(inst)
        assert np.allclose(tr.final_state.data, pair.psi.data, atol=1e-12)

    def test_transcript_export(self):
        tr, _ = locc.run_prepare_psi(efi.make_instance(EfiSpec("orthogonal")))
        lines = [json.loads(x) for x in tr.to_jsonl().splitlines()]
        assert [x["op"] for x in lines] == ["coin", "prepare", "coin", "gate", "send", "gate"]
        assert all(set(x) == {"party", "op", "params", "msg_bits"} for x in lines)
        assert lines[4]["msg_bits"] == {"0": 0.5, "1": 0.5}
        assert {x["party"] for x in lines} == {"A", "B"}

    def test_replay(self):
        tr, _ = locc.run_prepare_psi(efi.make_instance(EfiSpec("angle", theta=0.3)))
        again = locc.replay(tr)
        assert again.fidelity == pytest.approx(tr.fidelity, abs=1e-12)
        assert again.epr_count == 0
        tr.check()

    def test_both_sides(self):
        inst = efi.make_instance(EfiSpec("angle", theta=0.8))
        tr, cert = locc.run_prepare_psi(inst, both_sides=True)
        assert cert.value == 0 and tr.fidelity >= 1 - 1e-10

    def test_sample_mode_gives_a_branch(self):
        inst = efi.make_instance(EfiSpec("orthogonal"))
        pair = families.build_pair(inst)
        tr, _ = locc.run_prepare_psi(inst, rng_seed=3, mode="sample")
        tr2, _ = locc.run_prepare_psi(inst, rng_seed=3, mode="sample")
        assert np.array_equal(tr.final_state.data, tr2.final_state.data)
        # each branch is one of the four terms of psi, so it has fidelity 1/4 with psi
        assert tr.fidelity == pytest.approx(0.25, abs=1e-12)
        assert qcore.fidelity(tr.final_state, pair.psi) == pytest.approx(0.25)


class TestDistillPhi:
    @pytest.mark.parametrize("spec", FAMILIES, ids=IDS)
    def test_helstrom_error(self, spec):
        inst = efi.make_instance(spec)
        tr, cert = locc.run_distill_phi(inst)
        assert tr.fidelity == pytest.approx(1 - 0.5 * (1 - inst.td), abs=1e-10)
        assert cert.value == 1 and not cert.efficient
        assert tr.epr_count == 0

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10 ** 6))
    def test_helstrom_error_random_pairs(self, seed):
        rng = np.random.default_rng(seed)
        r0, r1 = oracles.random_density(2, rng, rank=2), oracles.random_density(2, rng, rank=3)
        inst = EfiInstance(DensityMatrix(r0), DensityMatrix(r1),
                           EfiSpec("custom", n_qubits=2, paths=("a", "b")))
        tr, _ = locc.run_distill_phi(inst)
        assert tr.fidelity == pytest.approx(1 - 0.5 * (1 - oracles.trace_distance(r0, r1)), abs=1e-9)

    def test_orthogonal_is_exact(self):
        tr, cert = locc.run_distill_phi(efi.make_instance(EfiSpec("orthogonal", n_qubits=3)))
        assert tr.fidelity == 1.0 or tr.fidelity == pytest.approx(1.0, abs=1e-14)
        assert cert.epsilon <= 1e-14


class TestKeyed:
    @pytest.mark.parametrize("spec", FAMILIES, ids=IDS)
    def test_accept_probabilities(self, spec):
        inst = efi.make_instance(spec)
        kf = families.build_keyed(inst)
        tr, cert = locc.run_distill_phi_keyed(kf)
        ex = cert.extras
        assert ex["accept_prob_b0"] == pytest.approx(1.0, abs=1e-12)
        assert ex["accept_prob_b1"] == pytest.approx(ex["false_accept_inner_product"], abs=1e-10)
        # a false accept leaves Phi-, which has fidelity 0 with Phi+
        assert tr.fidelity == pytest.approx(1 - 0.5 * ex["false_accept_inner_product"], abs=1e-10)
        assert cert.efficient and cert.gate_count <= cert.gate_bound

    def test_angle_inner_product(self):
        # <chi0|rho1 ⊗ k0|chi0> = |<0|v>|^2 = cos^2(theta) when the key is |0>
        theta = math.pi / 6
        kf = families.build_keyed(efi.make_instance(EfiSpec("angle", theta=theta)))
        assert locc.keyed_false_accept(kf) == pytest.approx(math.cos(theta) ** 2, abs=1e-12)

    def test_orthogonal_never_false_accepts(self):
        kf = families.build_keyed(efi.make_instance(EfiSpec("orthogonal", n_qubits=2)))
        _, cert = locc.run_distill_phi_keyed(kf)
        assert cert.extras["accept_prob_b1"] == 0.0

    def test_requires_keyed_family(self):
        pair = families.build_pair(efi.make_instance(EfiSpec("orthogonal")))
        with pytest.raises(CapabilityError):
            locc.run_distill_phi_keyed(pair)


class TestCertify:
    @pytest.mark.parametrize("q", [1, 2, 3])
    def test_gap_scales(self, q):
        pair = families.build_pair(efi.make_instance(EfiSpec("angle", theta=math.pi / 3)))
        cert = locc.certify(families.amplify(pair, q))
        assert cert.gap == q and cert.cost.value == 0 and cert.distill.value == q
        assert cert.epsilon <= q * cert.epsilon_per_copy + 1e-9
        assert cert.bernoulli_ok
        f1 = 1 - 0.5 * (1 - math.sin(math.pi / 3))
        assert cert.distill.transcript.fidelity == pytest.approx(f1 ** q, abs=1e-10)

    def test_analytic_mode(self):
        pair = families.build_pair(efi.make_instance(EfiSpec("angle", theta=1.0)))
        fam = families.amplify(pair, 3, dim_cap=64)
        cert = locc.certify(fam)
        assert cert.gap == 3 and cert.cost.transcript.final_state is None
        d = cert.to_dict()
        assert d["c"] == 0 and d["d"] == 3

    def test_certificate_check(self):
        tr, cert = locc.run_prepare_psi(efi.make_instance(EfiSpec("orthogonal")))
        cert.value = 1
        with pytest.raises(ContractViolation):
            cert.check()
