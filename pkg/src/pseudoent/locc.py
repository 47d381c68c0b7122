"""Two-party LOCC engine and the three protocols used for the entanglement separation.

A protocol is a list of :class:`Step` objects. Each step belongs to one party
and may only touch that party's qubits and classical memory; the only way
information crosses the cut is a :class:`Send` of classical bits (plus
:class:`ShareEPR`, the single counted entanglement resource).

Execution is branch-exact by default: every coin flip and measurement outcome
is kept as a weighted branch, so output states and success probabilities are
exact mixtures rather than sample averages. ``mode="sample"`` follows a single
trajectory instead.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import qcore
from .adversary import helstrom_povm
from .efi import EfiInstance
from .errors import CapabilityError, ContractViolation, LocalityViolation
from .families import (PHI_MINUS, PHI_PLUS, AmplifiedFamily, FamilyPair, KeyedFamily,
                       bernoulli_holds, build_pair)
from .qcore import PROJ0, PROJ1, X, Z, Circuit, DensityMatrix, Gate

PRUNE = 1e-15


@dataclass
class PartyView:
    name: str
    local_qubits: tuple
    local_ancillas: tuple = ()

    @property
    def owned(self) -> frozenset:
        return frozenset(self.local_qubits) | frozenset(self.local_ancillas)

    @property
    def other(self) -> str:
        return "B" if self.name == "A" else "A"


@dataclass
class Branch:
    weight: float
    rho: np.ndarray
    memory: dict  # party name -> {register: int}

    def fork(self, weight: float, rho: np.ndarray) -> "Branch":
        return Branch(weight, rho, {k: dict(v) for k, v in self.memory.items()})


# ---------------------------------------------------------------------------
# Steps
# ---------------------------------------------------------------------------

class Step:
    party: str
    op = "step"
    gates = 0
    measurements = 0

    def qubits(self) -> tuple:
        return ()

    def params(self) -> dict:
        return {}

    def apply(self, engine: "LoccEngine", br: Branch) -> list[Branch]:
        raise NotImplementedError

    def _read(self, br: Branch, reg: str) -> int:
        mem = br.memory[self.party]
        if reg not in mem:
            raise LocalityViolation(
                f"party {self.party} has no classical register {reg!r} (never received)")
        return mem[reg]


@dataclass
class Coin(Step):
    party: str
    register: str
    p_one: float = 0.5
    op = "coin"

    def params(self):
        return {"register": self.register, "p_one": self.p_one}

    def apply(self, engine, br):
        out = []
        for bit, p in ((0, 1 - self.p_one), (1, self.p_one)):
            if p > 0:
                nb = br.fork(br.weight * p, br.rho)
                nb.memory[self.party][self.register] = bit
                out.append(nb)
        return out


@dataclass
class PrepareLocal(Step):
    """Replace a local register by a locally generated state, optionally chosen by a bit."""
    party: str
    targets: tuple
    states: dict  # value -> DensityMatrix; key None for unconditional
    control: str | None = None
    label: str = "prepare"
    generator_gates: int = 0
    op = "prepare"

    @property
    def gates(self):
        return self.generator_gates

    def qubits(self):
        return tuple(self.targets)

    def params(self):
        return {"targets": list(self.targets), "control": self.control, "label": self.label}

    def apply(self, engine, br):
        key = self._read(br, self.control) if self.control else None
        sigma = qcore.as_matrix(self.states[key])
        return [br.fork(br.weight, engine.replace_register(br.rho, self.targets, sigma))]


@dataclass
class LocalGate(Step):
    party: str
    gate: Gate
    control: str | None = None
    control_value: int = 1
    op = "gate"
    gates = 1

    def qubits(self):
        return tuple(self.gate.qubits)

    def params(self):
        return {"name": self.gate.name, "qubits": list(self.gate.qubits),
                "control": self.control,
                "control_value": self.control_value if self.control else None}

    def apply(self, engine, br):
        if self.control is not None and self._read(br, self.control) != self.control_value:
            return [br]
        rho = qcore.conjugate_by(self.gate.matrix, br.rho, self.gate.qubits, engine.n_qubits)
        return [br.fork(br.weight, rho)]


@dataclass
class Measure(Step):
    """Projective measurement on local qubits; outcome stored in a local register."""
    party: str
    targets: tuple
    projectors: list  # [(outcome, projector on targets)]
    register: str
    label: str = "measure"
    op = "measure"

    @property
    def measurements(self):
        return len(self.targets)

    def qubits(self):
        return tuple(self.targets)

    def params(self):
        return {"targets": list(self.targets), "register": self.register, "label": self.label,
                "outcomes": [o for o, _ in self.projectors]}

    def apply(self, engine, br):
        out = []
        for outcome, proj in self.projectors:
            r = qcore.conjugate_by(proj, br.rho, self.targets, engine.n_qubits)
            p = float(np.real(np.trace(r)))
            if p > engine.prune:
                nb = br.fork(br.weight * p, r / p)
                nb.memory[self.party][self.register] = outcome
                out.append(nb)
        return out


def measure_z(party: str, qubit: int, register: str) -> Measure:
    return Measure(party, (qubit,), [(0, PROJ0), (1, PROJ1)], register, label="Z")


@dataclass
class Compute(Step):
    """Classical post-processing on a party's own registers."""
    party: str
    inputs: tuple
    fn: Callable
    register: str
    label: str = "compute"
    forget_inputs: bool = False
    op = "compute"

    def params(self):
        return {"inputs": list(self.inputs), "register": self.register, "label": self.label,
                "forget_inputs": self.forget_inputs}

    def apply(self, engine, br):
        vals = [self._read(br, r) for r in self.inputs]
        nb = br.fork(br.weight, br.rho)
        nb.memory[self.party][self.register] = int(self.fn(*vals))
        if self.forget_inputs:
            for r in self.inputs:
                if r != self.register:
                    del nb.memory[self.party][r]
        return [nb]


@dataclass
class Send(Step):
    party: str
    register: str
    op = "send"

    def params(self):
        return {"register": self.register}

    def apply(self, engine, br):
        nb = br.fork(br.weight, br.rho)
        other = engine.parties[self.party].other
        nb.memory[other][self.register] = self._read(br, self.register)
        return [nb]


@dataclass
class ShareEPR(Step):
    """Place a fresh Phi+ on (qubit_a, qubit_b); the one allowed cross-cut quantum resource."""
    qubit_a: int
    qubit_b: int
    party: str = "AB"
    op = "share_epr"

    def qubits(self):
        return (self.qubit_a, self.qubit_b)

    def params(self):
        return {"qubit_a": self.qubit_a, "qubit_b": self.qubit_b}

    def apply(self, engine, br):
        rho = engine.replace_register(br.rho, (self.qubit_a, self.qubit_b), PHI_PLUS.data)
        return [br.fork(br.weight, rho)]


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------

class LoccEngine:
    def __init__(self, n_qubits: int, a_qubits: Sequence[int], b_qubits: Sequence[int],
                 initial=None, mode: str = "exact", seed: int = 0, prune: float = PRUNE):
        qcore.check_dim(2 ** n_qubits, what="LOCC register")
        qcore.Bipartition(a_qubits, b_qubits).validate(n_qubits)
        if mode not in ("exact", "sample"):
            raise ContractViolation(f"unknown mode {mode!r}")
        self.n_qubits = n_qubits
        self.parties = {"A": PartyView("A", tuple(a_qubits)), "B": PartyView("B", tuple(b_qubits))}
        if initial is None:
            rho = np.zeros((2 ** n_qubits, 2 ** n_qubits), dtype=complex)
            rho[0, 0] = 1
            self.initial_kind = "zero"
        else:
            rho = np.array(qcore.as_matrix(initial), dtype=complex)
            if rho.shape[0] != 2 ** n_qubits:
                raise ContractViolation("initial state does not match register size")
            self.initial_kind = "given"
        self.mode = mode
        self.rng = np.random.default_rng(seed)
        self.prune = prune
        self.branches = [Branch(1.0, rho, {"A": {}, "B": {}})]
        self.log: list[dict] = []
        self.epr_count = 0
        self.gate_count = 0
        self.measure_count = 0
        self.round = 0

    # -- helpers ------------------------------------------------------------
    def replace_register(self, rho: np.ndarray, targets: Sequence[int], sigma: np.ndarray) -> np.ndarray:
        n = self.n_qubits
        targets = list(targets)
        keep = [q for q in range(n) if q not in targets]
        red = qcore.reduce_operator(rho, keep, n)
        full = np.kron(red, sigma)
        cur = keep + targets
        return qcore.permute_qubits(full, [cur.index(j) for j in range(n)])

    def _check_locality(self, step: Step) -> None:
        qs = set(step.qubits())
        if isinstance(step, ShareEPR):
            if step.qubit_a not in self.parties["A"].owned or step.qubit_b not in self.parties["B"].owned:
                raise LocalityViolation("EPR pair must have one half on each side")
            return
        if step.party not in self.parties:
            raise LocalityViolation(f"unknown party {step.party!r}")
        foreign = qs - self.parties[step.party].owned
        if foreign:
            raise LocalityViolation(
                f"{step.op} by party {step.party} touches foreign qubits {sorted(foreign)}")

    def _merge(self) -> None:
        groups: dict = {}
        for br in self.branches:
            key = tuple((p, tuple(sorted(m.items()))) for p, m in sorted(br.memory.items()))
            if key in groups:
                g = groups[key]
                w = g.weight + br.weight
                g.rho = (g.weight * g.rho + br.weight * br.rho) / w
                g.weight = w
            else:
                groups[key] = Branch(br.weight, br.rho, br.memory)
        self.branches = list(groups.values())

    def _message_bits(self, step: Send):
        dist: dict = {}
        for br in self.branches:
            v = br.memory[step.party].get(step.register)
            dist[str(v)] = dist.get(str(v), 0.0) + br.weight
        if self.mode == "sample":
            return next(iter(dist))
        return {k: dist[k] for k in sorted(dist)}

    # -- execution ----------------------------------------------------------
    def execute(self, step: Step) -> None:
        self._check_locality(step)
        new: list[Branch] = []
        for br in self.branches:
            new.extend(step.apply(self, br))
        if self.mode == "sample" and len(new) > 1:
            w = np.array([b.weight for b in new])
            pick = new[int(self.rng.choice(len(new), p=w / w.sum()))]
            pick.weight = 1.0
            new = [pick]
        self.branches = new
        if isinstance(step, Compute) and step.forget_inputs:
            self._merge()
        if isinstance(step, ShareEPR):
            self.epr_count += 1
        self.gate_count += step.gates
        self.measure_count += step.measurements
        entry = {"round": self.round, "party": step.party, "op": step.op,
                 "params": step.params(), "msg_bits": None}
        if isinstance(step, Send):
            entry["msg_bits"] = self._message_bits(step)
            self.round += 1
        self.log.append(entry)

    def run(self, program: Sequence[Step]) -> "LoccEngine":
        for step in program:
            self.execute(step)
        return self

    def output(self, qubits: Sequence[int] | None = None) -> np.ndarray:
        """Branch-averaged state on ``qubits`` (all qubits by default)."""
        qubits = list(range(self.n_qubits)) if qubits is None else list(qubits)
        total = sum(b.weight for b in self.branches)
        out = sum(b.weight * qcore.reduce_operator(b.rho, qubits, self.n_qubits)
                  for b in self.branches)
        return out / total

    def register_distribution(self, party: str, register: str) -> dict:
        dist: dict = {}
        total = sum(b.weight for b in self.branches)
        for br in self.branches:
            v = br.memory[party].get(register)
            dist[v] = dist.get(v, 0.0) + br.weight / total
        return dist


# ---------------------------------------------------------------------------
# Transcripts and certificates
# ---------------------------------------------------------------------------

@dataclass
class ProtocolTranscript:
    steps: list
    final_state: DensityMatrix | None
    target: DensityMatrix | None
    fidelity: float
    epr_count: int
    gate_count: int = 0
    measure_count: int = 0
    program: list = field(default_factory=list, repr=False)
    layout: dict = field(default_factory=dict)
    output_qubits: tuple = ()
    initial: str = "zero"

    def recomputed_fidelity(self) -> float:
        return qcore.fidelity(self.final_state, self.target)

    def check(self, tol: float = 1e-10) -> None:
        if self.final_state is not None and self.target is not None:
            f = self.recomputed_fidelity()
            if abs(f - self.fidelity) > tol:
                raise ContractViolation(f"stored fidelity {self.fidelity} != recomputed {f}")
        for s in self.steps:
            if s["op"] in ("gate", "measure", "prepare") and s["party"] not in ("A", "B"):
                raise LocalityViolation(f"step without a party: {s}")

    def to_jsonl(self) -> str:
        lines = [json.dumps({k: s[k] for k in ("party", "op", "params", "msg_bits")},
                            sort_keys=True) for s in self.steps]
        return "\n".join(lines) + ("\n" if lines else "")


@dataclass
class EntanglementCertificate:
    kind: str  # "cost_upper" | "distill_lower"
    value: int
    epsilon: float
    transcript: ProtocolTranscript
    efficient: bool
    gate_count: int = 0
    gate_bound: int | None = None
    extras: dict = field(default_factory=dict)

    def check(self, tol: float = 1e-10) -> None:
        if self.kind == "cost_upper" and self.transcript.epr_count != self.value:
            raise ContractViolation(
                f"cost certificate declares {self.value} EPR pairs but the transcript used "
                f"{self.transcript.epr_count}")
        if self.kind == "distill_lower" and self.transcript.fidelity < 1 - self.epsilon - tol:
            raise ContractViolation("distillation fidelity is below 1 - epsilon")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "value": self.value,
            "epsilon": self.epsilon,
            "fidelity": self.transcript.fidelity,
            "epr_count": self.transcript.epr_count,
            "efficient": self.efficient,
            "gate_count": self.gate_count,
            "gate_bound": self.gate_bound,
            "steps": len(self.transcript.steps),
            **{k: v for k, v in self.extras.items()},
        }


def _finish(engine: LoccEngine, program, output_qubits, target) -> ProtocolTranscript:
    out = DensityMatrix(engine.output(output_qubits), check=False)
    tgt = target if isinstance(target, DensityMatrix) else DensityMatrix(target, check=False)
    return ProtocolTranscript(
        steps=engine.log, final_state=out, target=tgt, fidelity=qcore.fidelity(out, tgt),
        epr_count=engine.epr_count, gate_count=engine.gate_count,
        measure_count=engine.measure_count, program=list(program),
        layout={"n_qubits": engine.n_qubits, "A": list(engine.parties["A"].local_qubits),
                "B": list(engine.parties["B"].local_qubits)},
        output_qubits=tuple(output_qubits), initial=engine.initial_kind)


def replay(transcript: ProtocolTranscript, initial=None) -> ProtocolTranscript:
    """Re-run a transcript's program on a fresh engine (from |0..0> unless given)."""
    lay = transcript.layout
    eng = LoccEngine(lay["n_qubits"], lay["A"], lay["B"], initial=initial)
    eng.run(transcript.program)
    return _finish(eng, transcript.program, transcript.output_qubits, transcript.target)


def _generator_gates(inst: EfiInstance) -> int:
    if inst.purification is None:
        return 1
    return max(inst.purification.circuit0.gate_count, inst.purification.circuit1.gate_count, 1)


# ---------------------------------------------------------------------------
# Protocols
# ---------------------------------------------------------------------------

def prepare_psi_program(pair_layout_n_efi: int, inst: EfiInstance, both_sides: bool = False):
    n = pair_layout_n_efi
    efi_a = tuple(range(2, 2 + n))
    gen = _generator_gates(inst)
    states = {0: inst.rho0, 1: inst.rho1}
    program: list[Step] = [
        Coin("A", "c1"),
        PrepareLocal("A", efi_a, states, control="c1", label="efi_generate", generator_gates=gen),
    ]
    if both_sides:
        efi_b = tuple(range(2 + n, 2 + 2 * n))
        program += [
            Send("A", "c1"),
            PrepareLocal("B", efi_b, states, control="c1", label="efi_generate",
                         generator_gates=gen),
        ]
    program += [
        Coin("A", "c2"),
        LocalGate("A", Gate("X", X, (0,)), control="c2"),
        Send("A", "c2"),
        LocalGate("B", Gate("X", X, (1,)), control="c2"),
    ]
    return program


def run_prepare_psi(inst: EfiInstance | FamilyPair, rng_seed: int = 0, mode: str = "exact",
                    both_sides: bool = False):
    """Prepare psi from |0...0> with two coins and one classical bit; no EPR pairs.

    Returns ``(transcript, certificate)`` where the certificate is a
    ``cost_upper`` bound of 0.
    """
    pair = inst if isinstance(inst, FamilyPair) else build_pair(inst, both_sides)
    both = pair.both_sides
    src = pair.source
    n = src.n_qubits
    program = prepare_psi_program(n, src, both)
    eng = LoccEngine(pair.n_qubits, pair.cut.qubits_a, pair.cut.qubits_b, mode=mode, seed=rng_seed)
    eng.run(program)
    tr = _finish(eng, program, tuple(range(pair.n_qubits)), pair.psi)
    bound = 2 * _generator_gates(src) + 4
    cert = EntanglementCertificate(
        "cost_upper", tr.epr_count, max(0.0, 1.0 - tr.fidelity), tr,
        efficient=tr.gate_count <= bound, gate_count=tr.gate_count, gate_bound=bound)
    cert.check()
    return tr, cert


def distill_phi_program(pair: FamilyPair, effect: np.ndarray):
    ident = np.eye(effect.shape[0], dtype=complex)
    return [
        Measure("A", pair.efi_qubits, [(0, effect), (1, ident - effect)], "guess",
                label="helstrom"),
        Send("A", "guess"),
        LocalGate("B", Gate("Z", Z, (1,)), control="guess"),
    ]


def run_distill_phi(inst: EfiInstance | FamilyPair, mode: str = "exact", seed: int = 0):
    """A measures {Pi_P, I - Pi_P} on its EFI register, tells B, B fixes Phi- with Z.

    Returns ``(transcript, certificate)``; the certificate is a
    ``distill_lower`` bound of one EPR pair with epsilon = 1 - fidelity. It is
    marked inefficient because the Helstrom projector has no short circuit in
    general.
    """
    pair = inst if isinstance(inst, FamilyPair) else build_pair(inst)
    src = pair.source
    d = helstrom_povm(src.rho0, src.rho1)
    program = distill_phi_program(pair, d.accept_effect)
    eng = LoccEngine(pair.n_qubits, pair.cut.qubits_a, pair.cut.qubits_b, initial=pair.phi,
                     mode=mode, seed=seed)
    eng.run(program)
    tr = _finish(eng, program, (0, 1), PHI_PLUS)
    eps = max(0.0, 1.0 - tr.fidelity)
    cert = EntanglementCertificate(
        "distill_lower", 1, eps, tr, efficient=False, gate_count=tr.gate_count,
        extras={"helstrom_error": 0.5 * (1.0 - src.td), "td_rho": src.td})
    cert.check()
    return tr, cert


def keyed_input(kf: KeyedFamily, b: int | None = None) -> np.ndarray:
    """State of [bell_A, bell_B, purification register] handed to A and B.

    ``b=None`` gives the full mixture; ``b=0`` / ``b=1`` the conditional inputs
    ``Phi+ ⊗ |chi0><chi0|`` and ``Phi- ⊗ (rho1 ⊗ k0)``.
    """
    pur = kf.purification
    chi0 = pur.circuit0.run()
    pure0 = np.outer(chi0, chi0.conj())
    prod = np.kron(kf.base.source.rho1.data, kf.key_state.data)
    cur = list(pur.e_qubits) + list(pur.k_qubits)
    prod = qcore.permute_qubits(prod, [cur.index(j) for j in range(pur.n_qubits)])
    if b == 0:
        return np.kron(PHI_PLUS.data, pure0)
    if b == 1:
        return np.kron(PHI_MINUS.data, prod)
    return 0.5 * (np.kron(PHI_PLUS.data, pure0) + np.kron(PHI_MINUS.data, prod))


def keyed_false_accept(kf: KeyedFamily) -> float:
    """``<chi0| (rho1 ⊗ k0) |chi0>`` evaluated directly."""
    pur = kf.purification
    chi0 = pur.circuit0.run()
    prod = np.kron(kf.base.source.rho1.data, kf.key_state.data)
    cur = list(pur.e_qubits) + list(pur.k_qubits)
    prod = qcore.permute_qubits(prod, [cur.index(j) for j in range(pur.n_qubits)])
    return float(np.real(np.vdot(chi0, prod @ chi0)))


def distill_keyed_program(kf: KeyedFamily):
    pur = kf.purification
    off = 2
    inv = pur.circuit0.inverse()
    program: list[Step] = [LocalGate("A", g.shifted(off)) for g in inv.gates]
    regs = []
    for q in range(pur.n_qubits):
        reg = f"m{q}"
        regs.append(reg)
        program.append(measure_z("A", off + q, reg))
    program += [
        Compute("A", tuple(regs), lambda *m: 0 if not any(m) else 1, "guess",
                label="all_zero", forget_inputs=True),
        Send("A", "guess"),
        LocalGate("B", Gate("Z", Z, (1,)), control="guess"),
    ]
    return program


def run_distill_phi_keyed(kf: KeyedFamily, mode: str = "exact", seed: int = 0):
    """Efficient distillation using the coherent key.

    A undoes the b=0 generator on (EFI register, key), measures every qubit in
    the computational basis, guesses b=0 iff all outcomes are 0, and sends the
    guess; B applies Z when the guess is 1.
    """
    if not isinstance(kf, KeyedFamily):
        raise CapabilityError("keyed distillation needs a KeyedFamily (purified EFI instance)")
    pur = kf.purification
    n = 2 + pur.n_qubits
    a = [0] + list(range(2, n))
    program = distill_keyed_program(kf)

    eng = LoccEngine(n, a, [1], initial=keyed_input(kf), mode=mode, seed=seed)
    eng.run(program)
    tr = _finish(eng, program, (0, 1), PHI_PLUS)

    accept = []
    for b in (0, 1):
        e = LoccEngine(n, a, [1], initial=keyed_input(kf, b))
        e.run(program)
        accept.append(e.register_distribution("A", "guess").get(0, 0.0))

    bound = pur.circuit0.gate_count + pur.n_qubits + 1
    cert = EntanglementCertificate(
        "distill_lower", 1, max(0.0, 1.0 - tr.fidelity), tr,
        efficient=tr.gate_count <= bound, gate_count=tr.gate_count, gate_bound=bound,
        extras={"accept_prob_b0": accept[0], "accept_prob_b1": accept[1],
                "false_accept_inner_product": keyed_false_accept(kf)})
    cert.check()
    return tr, cert


# ---------------------------------------------------------------------------
# Certification of pairs and amplified families
# ---------------------------------------------------------------------------

@dataclass
class Certified:
    cost: EntanglementCertificate | None
    distill: EntanglementCertificate | None
    gap: int | None
    epsilon: float
    q: int = 1
    epsilon_per_copy: float | None = None
    bernoulli_ok: bool | None = None

    def to_dict(self) -> dict:
        return {
            "cost": None if self.cost is None else self.cost.to_dict(),
            "distill": None if self.distill is None else self.distill.to_dict(),
            "c": None if self.cost is None else self.cost.value,
            "d": None if self.distill is None else self.distill.value,
            "gap": self.gap,
            "epsilon": self.epsilon,
            "q": self.q,
            "epsilon_per_copy": self.epsilon_per_copy,
            "bernoulli_ok": self.bernoulli_ok,
        }


def _stack(transcripts: list[ProtocolTranscript], final, target, fid) -> ProtocolTranscript:
    steps = []
    for i, t in enumerate(transcripts):
        for s in t.steps:
            steps.append({**s, "params": {**s["params"], "copy": i}})
    return ProtocolTranscript(
        steps=steps, final_state=final, target=target, fidelity=fid,
        epr_count=sum(t.epr_count for t in transcripts),
        gate_count=sum(t.gate_count for t in transcripts),
        measure_count=sum(t.measure_count for t in transcripts),
        initial=transcripts[0].initial)


def certify(family: FamilyPair | AmplifiedFamily) -> Certified:
    """Cost and distillation certificates plus the certified gap ``d - c``.

    Copies of an amplified family are processed one by one; the joint output
    is the tensor product of the per-copy outputs, so joint fidelities are
    products of per-copy fidelities.
    """
    if isinstance(family, FamilyPair):
        _, cost = run_prepare_psi(family)
        _, dist = run_distill_phi(family)
        eps = max(cost.epsilon, dist.epsilon)
        return Certified(cost, dist, dist.value - cost.value, eps, 1, eps, True)

    q = family.q
    base = family.base
    t_cost, c1 = run_prepare_psi(base)
    t_dist, d1 = run_distill_phi(base)
    eps1 = max(c1.epsilon, d1.epsilon)

    # joint distillation output: q Bell pairs, small enough to materialize
    if 4 ** q <= qcore.get_dim_cap():
        out = qcore.tensor_power(t_dist.final_state, q)
        tgt = qcore.tensor_power(PHI_PLUS, q)
        fid_d = qcore.fidelity(out, tgt)
    else:
        out = tgt = None
        fid_d = t_dist.fidelity ** q
    if family.materialized:
        out_c = qcore.tensor_power(t_cost.final_state, q)
        fid_c = qcore.fidelity(out_c, family.psi_bar)
    else:
        out_c = None
        fid_c = t_cost.fidelity ** q

    cost = EntanglementCertificate(
        "cost_upper", c1.value * q, max(0.0, 1.0 - fid_c),
        _stack([t_cost] * q, out_c, family.psi_bar, fid_c),
        efficient=c1.efficient, gate_count=c1.gate_count * q,
        gate_bound=None if c1.gate_bound is None else c1.gate_bound * q)
    dist = EntanglementCertificate(
        "distill_lower", d1.value * q, max(0.0, 1.0 - fid_d),
        _stack([t_dist] * q, out, tgt, fid_d),
        efficient=False, gate_count=d1.gate_count * q,
        extras={"helstrom_error": d1.extras["helstrom_error"]})
    cost.check()
    dist.check()
    eps_q = max(cost.epsilon, dist.epsilon)
    ok = bernoulli_holds(eps1, q) and eps_q <= q * eps1 + 1e-9
    return Certified(cost, dist, dist.value - cost.value, eps_q, q, eps1, ok)


def helstrom_error(td: float) -> float:
    return 0.5 * (1.0 - td)


def expected_distill_fidelity(td: float) -> float:
    return 1.0 - helstrom_error(td)


__all__ = [
    "PartyView", "Branch", "Step", "Coin", "PrepareLocal", "LocalGate", "Measure", "measure_z",
    "Compute", "Send", "ShareEPR", "LoccEngine", "ProtocolTranscript", "EntanglementCertificate",
    "Certified", "replay", "run_prepare_psi", "run_distill_phi", "run_distill_phi_keyed",
    "certify", "keyed_input", "keyed_false_accept", "helstrom_error",
    "expected_distill_fidelity",
]
