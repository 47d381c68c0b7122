"""Distinguishers, exact and sampled advantages, the halving bound and the hybrid reduction.

Every distinguisher is reduced to a single accept effect ``E1`` (``0 <= E1 <= I``)
so that its advantage on a pair ``(rho, sigma)`` is the exact trace
``|Tr E1 (rho - sigma)|``. Sampling is only used as an empirical cross-check.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import qcore
from .errors import ContractViolation
from .qcore import CNOT, H, I2

_BASIS = {
    "Z": I2,
    "X": H,
    # maps the Y eigenbasis onto the computational one
    "Y": H @ np.diag([1, -1j]),
}

RULES = ("parity", "all_zero", "any_one", "first")


@dataclass(frozen=True)
class Distinguisher:
    kind: str
    accept_effect: np.ndarray = field(repr=False, compare=False)
    description: str = ""
    params: dict = field(default_factory=dict, compare=False)

    @property
    def dim(self) -> int:
        return self.accept_effect.shape[0]

    @property
    def n_qubits(self) -> int:
        return int(round(math.log2(self.dim)))

    def effects(self) -> tuple[np.ndarray, np.ndarray]:
        """``(E0, E1)`` with ``E0 + E1 = I``."""
        e1 = self.accept_effect
        return np.eye(self.dim) - e1, e1

    def check(self, tol: float = 1e-9) -> "Distinguisher":
        e = self.accept_effect
        if np.max(np.abs(e - e.conj().T)) > tol:
            raise ContractViolation("accept effect is not Hermitian")
        w = np.linalg.eigvalsh(0.5 * (e + e.conj().T))
        if w[0] < -tol or w[-1] > 1 + tol:
            raise ContractViolation(f"effects are not PSD (spectrum [{w[0]:.3g}, {w[-1]:.3g}])")
        return self

    def descriptor(self) -> dict:
        digest = hashlib.sha256(np.ascontiguousarray(np.round(self.accept_effect, 12)).tobytes())
        return {"kind": self.kind, "description": self.description, "n_qubits": self.n_qubits,
                "params": self.params, "effect_sha256": digest.hexdigest()}

    def to_json(self) -> str:
        return json.dumps(self.descriptor(), sort_keys=True)

    def descriptor_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


def _effect(kind, e1, description, params) -> Distinguisher:
    e1 = np.array(e1, dtype=complex)
    e1.setflags(write=False)
    return Distinguisher(kind, e1, description, params).check()


def helstrom_povm(rho0, sigma1) -> Distinguisher:
    """Projector onto the nonnegative eigenspace of ``rho0 - sigma1``."""
    a, b = qcore.as_matrix(rho0), qcore.as_matrix(sigma1)
    if a.shape != b.shape:
        raise ContractViolation(f"dimension mismatch {a.shape} vs {b.shape}")
    diff = a - b
    w, v = np.linalg.eigh(0.5 * (diff + diff.conj().T))
    pos = v[:, w >= -qcore.DEFAULT_TOL.support]
    return _effect("helstrom", pos @ pos.conj().T, "Helstrom projector Pi_P", {})


def fixed_povm(effects: Sequence, accept_index: int = 1) -> Distinguisher:
    """A two-or-more outcome POVM; outcome ``accept_index`` means "first state"."""
    mats = [qcore.as_matrix(e) for e in effects]
    total = sum(mats)
    if np.max(np.abs(total - np.eye(total.shape[0]))) > 1e-9:
        raise ContractViolation("POVM effects do not sum to the identity")
    for m in mats:
        if np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0] < -1e-9:
            raise ContractViolation("POVM effect is not PSD")
    return _effect("fixed_povm", mats[accept_index], f"fixed POVM, {len(mats)} outcomes",
                   {"outcomes": len(mats), "accept_index": accept_index})


def constant(n_qubits: int, accept: bool = False) -> Distinguisher:
    d = 2 ** n_qubits
    e = np.eye(d) if accept else np.zeros((d, d))
    return _effect("fixed_povm", e, f"constant {int(accept)}", {"constant": int(accept)})


def _rule_mask(rule: str, measured: Sequence[int], n: int) -> np.ndarray:
    """Accept mask over computational outcomes, reading only the measured bits."""
    idx = np.arange(2 ** n)
    bits = np.stack([(idx >> (n - 1 - q)) & 1 for q in measured]) if measured else np.zeros((0, 2 ** n), int)
    if rule == "parity":
        return (bits.sum(axis=0) % 2 == 0)
    if rule == "all_zero":
        return bits.sum(axis=0) == 0
    if rule == "any_one":
        return bits.sum(axis=0) > 0
    if rule == "first":
        return bits[0] == 0
    raise ContractViolation(f"unknown post-processing rule {rule!r}; known: {RULES}")


def local_measure(n_qubits: int, bases: dict, rule: str = "parity") -> Distinguisher:
    """Measure each listed qubit in its basis (Z, X or Y), then apply a classical rule.

    ``first`` accepts when the first measured qubit reads 0; the other rules
    act on all measured bits.
    """
    measured = sorted(int(q) for q in bases)
    rot = np.eye(2 ** n_qubits, dtype=complex)
    for q in measured:
        b = str(bases[q]).upper()
        if b not in _BASIS:
            raise ContractViolation(f"unknown basis {b!r}")
        rot = qcore.left_apply(_BASIS[b], rot, [q], n_qubits)
    mask = _rule_mask(rule, measured, n_qubits).astype(float)
    e1 = rot.conj().T @ np.diag(mask) @ rot
    label = ",".join(f"{q}:{str(bases[q]).upper()}" for q in measured)
    return _effect("local_measure", e1, f"local measurement [{label}] rule={rule}",
                   {"bases": {str(q): str(bases[q]).upper() for q in measured}, "rule": rule})


def _haar_2x2(rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_circuit(n_qubits: int, depth: int, seed: int, measure: str = "first") -> Distinguisher:
    """Layers of Haar single-qubit gates followed by a CNOT chain, then a Z-basis rule."""
    if depth < 0:
        raise ContractViolation("depth must be >= 0")
    rng = np.random.default_rng(seed)
    n = n_qubits
    u = np.eye(2 ** n, dtype=complex)
    for _ in range(depth):
        for q in range(n):
            u = qcore.left_apply(_haar_2x2(rng), u, [q], n)
        for q in range(n - 1):
            u = qcore.left_apply(CNOT, u, [q, q + 1], n)
    mask = _rule_mask(measure, list(range(n)), n).astype(float)
    e1 = u.conj().T @ np.diag(mask) @ u
    return _effect("random_circuit", e1, f"random circuit depth={depth} seed={seed}",
                   {"depth": depth, "seed": seed, "measure": measure})


def with_advice(d: Distinguisher, before=None, after=None) -> Distinguisher:
    """Fix the outer registers of ``d`` to advice states; the input sits in between.

    The resulting effect on the middle register is
    ``Tr_adv[E1 (before ⊗ I ⊗ after)]``.
    """
    a = np.ones((1, 1)) if before is None else qcore.as_matrix(before)
    b = np.ones((1, 1)) if after is None else qcore.as_matrix(after)
    dl, dr = a.shape[0], b.shape[0]
    if d.dim % (dl * dr):
        raise ContractViolation("advice registers do not fit the distinguisher")
    dm = d.dim // (dl * dr)
    e = d.accept_effect.reshape(dl, dm, dr, dl, dm, dr)
    e1 = np.einsum("ba,dc,ajcbkd->jk", a, b, e)
    return _effect("with_advice", e1, f"{d.kind} with advice",
                   {"inner": d.descriptor(), "advice_qubits_before": int(round(math.log2(dl))),
                    "advice_qubits_after": int(round(math.log2(dr)))})


def library(n_qubits: int, seed: int = 0, circuits: int = 5, depth: int = 3) -> list[Distinguisher]:
    """A fixed menu of non-optimal distinguishers for an ``n``-qubit input."""
    ds = [constant(n_qubits, False), constant(n_qubits, True)]
    for q in range(n_qubits):
        for basis in "ZX":
            ds.append(local_measure(n_qubits, {q: basis}, "first"))
    ds.append(local_measure(n_qubits, {q: "Z" for q in range(n_qubits)}, "parity"))
    ds.append(local_measure(n_qubits, {q: "Z" for q in range(n_qubits)}, "all_zero"))
    ds.append(local_measure(n_qubits, {q: "X" for q in range(n_qubits)}, "parity"))
    for k in range(circuits):
        ds.append(random_circuit(n_qubits, depth, seed + k))
    return ds


# ---------------------------------------------------------------------------
# Advantage
# ---------------------------------------------------------------------------

@dataclass
class AdvantageReport:
    exact: float
    signed: float
    td: float | None = None
    empirical: dict | None = None
    bound_checked: dict | None = None
    descriptor_hash: str = ""

    @property
    def within_4_sigma(self) -> bool | None:
        if self.empirical is None:
            return None
        return abs(self.empirical["estimate"] - self.signed) <= 4 * self.empirical["std_error"]

    def to_dict(self) -> dict:
        return {"exact": self.exact, "signed": self.signed, "td": self.td,
                "empirical": self.empirical, "bound_checked": self.bound_checked,
                "within_4_sigma": self.within_4_sigma, "descriptor_hash": self.descriptor_hash}


def _accept_probs(d: Distinguisher, rho, sigma) -> tuple[float, float]:
    a, b = qcore.as_matrix(rho), qcore.as_matrix(sigma)
    if a.shape != b.shape or a.shape[0] != d.dim:
        raise ContractViolation(
            f"effect of dim {d.dim} does not match states {a.shape} / {b.shape}")
    e = d.accept_effect
    return float(np.real(np.trace(e @ a))), float(np.real(np.trace(e @ b)))


def advantage_exact(d: Distinguisher, rho, sigma, with_td: bool = True) -> AdvantageReport:
    """``|Tr E1 rho - Tr E1 sigma|``, plus the trace distance it can never exceed."""
    pr, ps = _accept_probs(d, rho, sigma)
    signed = pr - ps
    td = qcore.trace_distance(rho, sigma) if with_td else None
    rep = AdvantageReport(abs(signed), signed, td, descriptor_hash=d.descriptor_hash())
    if td is not None:
        rep.bound_checked = {"name": "trace_distance", "bound_value": td,
                             "satisfied": bool(abs(signed) <= td + 1e-9)}
    return rep


def _trial_uniforms(seed: int, start: int, stop: int) -> np.ndarray:
    """Two uniforms per trial from a Philox stream keyed by ``seed``.

    Trial ``t`` always reads raw words ``2t`` and ``2t+1`` (counter block
    ``t // 2``), so any chunking of the trial range gives the same numbers.
    """
    first_block = start // 2
    bg = np.random.Philox(key=seed, counter=first_block)
    raw = bg.random_raw(2 * (stop - first_block * 2))
    raw = raw[2 * (start - first_block * 2):]
    u = (raw >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
    return u.reshape(-1, 2)


def advantage_monte_carlo(d: Distinguisher, rho, sigma, trials: int = 1000, seed: int = 0,
                          chunk: int | None = None) -> AdvantageReport:
    """Sampled estimate of ``Pr[accept | rho] - Pr[accept | sigma]``.

    Each trial runs the measurement once on each state; the estimate is the
    mean of the per-trial differences and ``std_error = sqrt(var / trials)``.
    """
    if trials < 100:
        raise ContractViolation("Monte-Carlo estimation needs at least 100 trials")
    pr, ps = _accept_probs(d, rho, sigma)
    chunk = trials if chunk is None else chunk
    diffs = []
    for start in range(0, trials, chunk):
        u = _trial_uniforms(seed, start, min(trials, start + chunk))
        diffs.append((u[:, 0] < pr).astype(float) - (u[:, 1] < ps).astype(float))
    x = np.concatenate(diffs)
    est = float(x.mean())
    se = float(math.sqrt(x.var(ddof=1) / trials))
    rep = advantage_exact(d, rho, sigma)
    rep.empirical = {"estimate": est, "trials": trials, "std_error": se, "seed": seed}
    return rep


# ---------------------------------------------------------------------------
# Halving bound
# ---------------------------------------------------------------------------

def induced_efi_distinguisher(d_prime: Distinguisher, pair) -> Distinguisher:
    """Turn a distinguisher for (psi, phi) into one for (rho0, rho1).

    Since ``psi - phi = 1/4 (Phi- - Phi+) ⊗ (rho0 - rho1)``, the effect
    ``F = 1/2 (I + E_{Phi-} - E_{Phi+})`` with ``E_B = Tr_bell[(B ⊗ I) E1]``
    satisfies ``Tr F (rho0 - rho1) = 2 Tr E1 (psi - phi)``. Operationally: draw
    a random Bell label, prepare it, run ``d_prime`` and XOR the label in.
    """
    from .families import PHI_MINUS, PHI_PLUS

    if pair.both_sides:
        raise ContractViolation("the induced distinguisher is defined for one-sided pairs")
    e_m = with_advice(d_prime, before=PHI_MINUS).accept_effect
    e_p = with_advice(d_prime, before=PHI_PLUS).accept_effect
    f = 0.5 * (np.eye(e_m.shape[0]) + e_m - e_p)
    return _effect("induced", f, f"EFI distinguisher induced by {d_prime.kind}",
                   {"inner": d_prime.descriptor()})


@dataclass
class HalvingReport:
    td_rho: float
    td_psi_phi: float
    bound: float
    entries: list
    helstrom_advantage: float
    helstrom_tight: bool
    identity_holds: bool
    all_satisfied: bool

    def to_dict(self) -> dict:
        return {"td_rho": self.td_rho, "td_psi_phi": self.td_psi_phi, "bound": self.bound,
                "entries": self.entries, "helstrom_advantage": self.helstrom_advantage,
                "helstrom_tight": self.helstrom_tight, "identity_holds": self.identity_holds,
                "all_satisfied": self.all_satisfied}


def verify_halving(inst, ds: Sequence[Distinguisher], tol: float = 1e-9) -> HalvingReport:
    """Check ``Adv(psi, phi) <= 1/2 TD(rho0, rho1)`` for each distinguisher in ``ds``.

    For every ``d`` the induced EFI distinguisher is also evaluated; its
    advantage is exactly twice that of ``d``.
    """
    from .families import FamilyPair, build_pair

    pair = inst if isinstance(inst, FamilyPair) else build_pair(inst)
    src = pair.source
    bound = 0.5 * src.td
    td_pp = qcore.trace_distance(pair.psi, pair.phi)
    entries = []
    for d in ds:
        adv = advantage_exact(d, pair.psi, pair.phi, with_td=False).exact
        row = {"kind": d.kind, "description": d.description, "hash": d.descriptor_hash(),
               "advantage": adv, "satisfied": bool(adv <= bound + tol)}
        if not pair.both_sides:
            ind = advantage_exact(induced_efi_distinguisher(d, pair), src.rho0, src.rho1,
                                  with_td=False).exact
            row["induced_advantage"] = ind
            row["halving_exact"] = bool(abs(adv - 0.5 * ind) <= tol)
        entries.append(row)
    hel = advantage_exact(helstrom_povm(pair.psi, pair.phi), pair.psi, pair.phi, with_td=False).exact
    return HalvingReport(
        src.td, td_pp, bound, entries, hel, bool(abs(hel - bound) <= tol),
        bool(abs(td_pp - bound) <= tol),
        all(e["satisfied"] for e in entries))


# ---------------------------------------------------------------------------
# Hybrid argument
# ---------------------------------------------------------------------------

@dataclass
class HybridSequence:
    p: int
    hybrids: list  # descriptors: number of psi / phi slots
    per_adjacent_advantage: list
    i_star: int
    total_advantage: float
    states: list = field(default_factory=list, repr=False)

    @property
    def max_adjacent(self) -> float:
        return self.per_adjacent_advantage[self.i_star]

    def telescoping_holds(self, tol: float = 1e-9) -> bool:
        s = sum(self.per_adjacent_advantage)
        return self.total_advantage <= s + tol and s <= self.p * self.max_adjacent + tol

    def to_dict(self) -> dict:
        return {"p": self.p, "hybrids": self.hybrids,
                "per_adjacent_advantage": self.per_adjacent_advantage, "i_star": self.i_star,
                "total_advantage": self.total_advantage,
                "sum_adjacent": sum(self.per_adjacent_advantage),
                "telescoping_holds": self.telescoping_holds()}


def hybrid_states(psi, phi, p: int) -> list[np.ndarray]:
    """``H_i = psi^{⊗(p-i)} ⊗ phi^{⊗i}`` for ``i = 0..p``."""
    a, b = qcore.as_matrix(psi), qcore.as_matrix(phi)
    qcore.check_dim(a.shape[0] ** p, what="hybrid states")
    out = []
    for i in range(p + 1):
        m = np.ones((1, 1), dtype=complex)
        for k in range(p):
            m = np.kron(m, a if k < p - i else b)
        out.append(m)
    return out


@dataclass
class HybridResult:
    sequence: HybridSequence
    single_copy: Distinguisher
    single_copy_advantage: float
    slot: int

    def to_dict(self) -> dict:
        return {**self.sequence.to_dict(), "slot": self.slot,
                "single_copy_advantage": self.single_copy_advantage,
                "single_copy_hash": self.single_copy.descriptor_hash()}


def hybrid_reduce(d: Distinguisher, pair, p: int, tol: float = 1e-9) -> HybridResult:
    """Reduce a ``p``-copy distinguisher to a single-copy one through the hybrids.

    ``H_{i*}`` and ``H_{i*+1}`` differ only in slot ``p - i* - 1``; the
    returned distinguisher places its input there, with psi copies as advice
    before it and phi copies after it.
    """
    psi, phi = pair.psi, pair.phi
    if p < 1:
        raise ContractViolation("p must be >= 1")
    hs = hybrid_states(psi, phi, p)
    if d.dim != hs[0].shape[0]:
        raise ContractViolation("distinguisher does not act on p copies of the pair")
    e = d.accept_effect
    acc = [float(np.real(np.trace(e @ h))) for h in hs]
    adj = [abs(acc[i] - acc[i + 1]) for i in range(p)]
    i_star = int(np.argmax(adj))
    total = abs(acc[0] - acc[p])
    seq = HybridSequence(p, [{"index": i, "psi_copies": p - i, "phi_copies": i} for i in range(p + 1)],
                         adj, i_star, total, hs)
    if not seq.telescoping_holds(tol):
        raise ContractViolation("hybrid telescoping inequality violated")

    slot = p - i_star - 1
    before = qcore.tensor_power(psi, slot) if slot > 0 else None
    after = qcore.tensor_power(phi, i_star) if i_star > 0 else None
    single = with_advice(d, before, after)
    single_adv = advantage_exact(single, psi, phi, with_td=False).exact
    if abs(single_adv - adj[i_star]) > tol:
        raise ContractViolation("single-copy distinguisher does not reproduce the best hybrid gap")
    return HybridResult(seq, single, single_adv, slot)


def many_copy_library(pair, p: int, seed: int = 0) -> list[Distinguisher]:
    """Distinguishers on ``p`` copies: Helstrom, a Bell/EFI parity test, a random circuit
    and a constant one."""
    n = pair.n_qubits * p
    bases = {}
    for c in range(p):
        off = c * pair.n_qubits
        bases.update({off: "X", off + 1: "X", off + 2: "Z"})
    return [
        helstrom_povm(qcore.tensor_power(pair.psi, p), qcore.tensor_power(pair.phi, p)),
        local_measure(n, bases, "parity"),
        random_circuit(n, 2, seed, measure="parity"),
        constant(n, True),
    ]


# ---------------------------------------------------------------------------
# Descriptive decay profile
# ---------------------------------------------------------------------------

def decay_profile(lams: Sequence[int], values: Sequence[float]) -> dict:
    """Fit ``log2(value)`` against lambda and compare with ``2^-lambda``.

    Descriptive only: a finite range of lambda cannot establish negligibility.
    """
    lams = np.asarray(lams, dtype=float)
    vals = np.asarray(values, dtype=float)
    pos = vals > 0
    out = {"lambdas": lams.tolist(), "values": vals.tolist(), "descriptive_only": True}
    if pos.sum() >= 2:
        slope, icpt = np.polyfit(lams[pos], np.log2(vals[pos]), 1)
        out["log2_slope"] = float(slope)
        out["log2_intercept"] = float(icpt)
        # smallest c with value <= c * 2^-lambda over the observed range
        out["envelope_c"] = float(np.max(vals * 2.0 ** lams))
    else:
        out["log2_slope"] = None
    return out
