"""The low-entanglement family psi, the reference family phi, and their q-fold products.

Register layout of one pair: ``[bell_A, bell_B, efi_0, ..., efi_{n-1}]``.
Party A holds ``bell_A`` and the EFI register; party B holds ``bell_B``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import qcore
from .efi import EfiInstance, Purification
from .errors import CapabilityError, ContractViolation, InputError, ResourceError
from .qcore import Bipartition, DensityMatrix

PHI_PLUS = qcore.bell_density("phi+")
PHI_MINUS = qcore.bell_density("phi-")


@dataclass
class FamilyPair:
    psi: DensityMatrix
    phi: DensityMatrix
    cut: Bipartition
    lam: int
    source: EfiInstance
    both_sides: bool = False

    @property
    def n_qubits(self) -> int:
        return self.psi.qubit_count

    @property
    def bell_qubits(self) -> tuple[int, int]:
        return 0, 1

    @property
    def efi_qubits(self) -> tuple:
        """Qubits of A's EFI register (the register the distillation protocol measures)."""
        return tuple(range(2, 2 + self.source.n_qubits))

    @property
    def efi_qubits_b(self) -> tuple:
        if not self.both_sides:
            return ()
        n = self.source.n_qubits
        return tuple(range(2 + n, 2 + 2 * n))

    def manifest(self) -> dict:
        return {
            "cut": self.cut.to_dict(),
            "lambda": self.lam,
            "family": self.source.spec.family,
            "hardness": self.source.spec.hardness,
            "efi_spec": self.source.spec.to_dict(),
            "qubits": self.n_qubits,
            "register_order": ["bell_A", "bell_B"]
            + [f"efi_A{i}" for i in range(self.source.n_qubits)]
            + ([f"efi_B{i}" for i in range(self.source.n_qubits)] if self.both_sides else []),
            "both_sides": self.both_sides,
            "td_rho": self.source.td,
            "td_psi_phi": qcore.trace_distance(self.psi, self.phi),
        }


@dataclass
class KeyedFamily:
    base: FamilyPair
    key_state: DensityMatrix
    purification: Purification

    @property
    def u0(self) -> np.ndarray:
        return self.purification.u0

    @property
    def chi0(self) -> np.ndarray:
        return self.purification.circuit0.run()


@dataclass
class AmplifiedFamily:
    """``q`` independent copies of a pair, laid out copy after copy."""
    q: int
    base: FamilyPair
    psi_bar: DensityMatrix | None
    phi_bar: DensityMatrix | None
    component_keys: list = field(default_factory=list)
    analytic: bool = False

    @property
    def materialized(self) -> bool:
        return self.psi_bar is not None

    @property
    def per_copy_qubits(self) -> int:
        return self.base.n_qubits

    @property
    def cut(self) -> Bipartition:
        m = self.per_copy_qubits
        a = [i * m + x for i in range(self.q) for x in self.base.cut.qubits_a]
        b = [i * m + x for i in range(self.q) for x in self.base.cut.qubits_b]
        return Bipartition(a, b)

    def diagnostics(self) -> dict:
        """Trace distance and log-negativity of the product, exact or aggregated."""
        from .entdiag import log_negativity

        base_ln_phi = log_negativity(self.base.phi, self.base.cut)
        if self.materialized:
            return {
                "q": self.q,
                "analytic": False,
                "td_psi_phi": qcore.trace_distance(self.psi_bar, self.phi_bar),
                "log_negativity_phi": log_negativity(self.phi_bar, self.cut),
                "q_times_log_negativity_phi1": self.q * base_ln_phi,
            }
        # trace distance of a q-fold product has no closed form; bracket it by
        # the fidelity, which is multiplicative
        f = qcore.fidelity(self.base.psi, self.base.phi) ** self.q
        return {
            "q": self.q,
            "analytic": True,
            "td_psi_phi_lower": 1.0 - math.sqrt(f),
            "td_psi_phi_upper": math.sqrt(max(0.0, 1.0 - f)),
            "log_negativity_phi": self.q * base_ln_phi,
            "q_times_log_negativity_phi1": self.q * base_ln_phi,
        }


def _pair_states(inst: EfiInstance, both_sides: bool):
    if not both_sides:
        return inst.rho0, inst.rho1
    return (qcore.tensor(inst.rho0, inst.rho0), qcore.tensor(inst.rho1, inst.rho1))


def build_psi(inst: EfiInstance, both_sides: bool = False) -> DensityMatrix:
    """``1/4 (Phi+ + Phi-) ⊗ (rho0 + rho1)``, a separable state."""
    r0, r1 = _pair_states(inst, both_sides)
    qcore.check_dim(4 * r0.dim, what="psi")
    bell = 0.25 * (PHI_PLUS.data + PHI_MINUS.data)
    return DensityMatrix(np.kron(bell, r0.data + r1.data))


def build_phi(inst: EfiInstance, both_sides: bool = False) -> DensityMatrix:
    """``1/2 (Phi+ ⊗ rho0 + Phi- ⊗ rho1)``: the Bell label is correlated with the EFI bit."""
    r0, r1 = _pair_states(inst, both_sides)
    qcore.check_dim(4 * r0.dim, what="phi")
    return DensityMatrix(0.5 * (np.kron(PHI_PLUS.data, r0.data) + np.kron(PHI_MINUS.data, r1.data)))


def family_cut(n_efi: int, both_sides: bool = False) -> Bipartition:
    a = [0] + list(range(2, 2 + n_efi))
    b = [1] + (list(range(2 + n_efi, 2 + 2 * n_efi)) if both_sides else [])
    return Bipartition(a, b)


def build_pair(inst: EfiInstance, both_sides: bool = False) -> FamilyPair:
    psi = build_psi(inst, both_sides)
    phi = build_phi(inst, both_sides)
    cut = family_cut(inst.n_qubits, both_sides).validate(psi.qubit_count)
    return FamilyPair(psi, phi, cut, inst.spec.lam, inst, both_sides)


def build_keyed(inst: EfiInstance) -> KeyedFamily:
    """Attach the coherent key ``k0 = Tr_E |chi_0><chi_0|`` to the pair built from ``inst``."""
    if inst.purification is None:
        raise CapabilityError("EFI instance has no purification; keyed family unavailable")
    pur = inst.purification
    chi0 = pur.state(0)
    if qcore.fidelity(chi0.efi_state, inst.rho0) < 1 - 1e-9:
        raise ContractViolation("purification does not reproduce rho0")
    return KeyedFamily(build_pair(inst), chi0.key_state, pur)


def amplify(pair: FamilyPair, q: int, dim_cap: int | None = None) -> AmplifiedFamily:
    """q-fold tensor products; above the cap only per-copy data is kept (``analytic``)."""
    if q < 1:
        raise ContractViolation("q must be >= 1")
    keys = [pair.lam] * q
    if q == 1:
        return AmplifiedFamily(1, pair, pair.psi, pair.phi, keys)
    try:
        qcore.check_dim(pair.psi.dim ** q, dim_cap, what="amplified family")
    except ResourceError:
        return AmplifiedFamily(q, pair, None, None, keys, analytic=True)
    psi_bar = qcore.tensor_power(pair.psi, q, dim_cap=dim_cap)
    phi_bar = qcore.tensor_power(pair.phi, q, dim_cap=dim_cap)
    return AmplifiedFamily(q, pair, psi_bar, phi_bar, keys)


def bernoulli_holds(eps: float, q: int) -> bool:
    """``(1 - eps)**q >= 1 - q*eps`` for eps in [0, 1] and integer q >= 1."""
    return (1.0 - eps) ** q >= 1.0 - q * eps - 1e-15


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def save_pair(pair: FamilyPair, directory) -> dict:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    qcore.save_dmx(d / "psi.dmx.json", pair.psi)
    qcore.save_dmx(d / "phi.dmx.json", pair.phi)
    manifest = pair.manifest()
    manifest["files"] = {"psi": "psi.dmx.json", "phi": "phi.dmx.json"}
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest


def load_pair_states(directory) -> tuple[DensityMatrix, DensityMatrix, dict]:
    d = Path(directory)
    try:
        manifest = json.loads((d / "manifest.json").read_text())
    except FileNotFoundError as exc:
        raise InputError(f"missing manifest in {d}") from exc
    files = manifest.get("files", {"psi": "psi.dmx.json", "phi": "phi.dmx.json"})
    return qcore.load_dmx(d / files["psi"]), qcore.load_dmx(d / files["phi"]), manifest
