"""Toy EFI-pair generators, their coherent purifications, and tensor-power amplification.

None of these families is computationally hiding; each carries a
``hardness`` tag saying what it is good for:

* ``orthogonal`` and ``angle`` are *transparent*: any distinguisher sees the bit.
  They exist to check protocol correctness against closed-form answers.
* ``keyed_subset`` is *restricted-hard*: the two states are orthogonal, but the
  support of each is a seeded permutation of a parity class, so single-qubit
  computational-basis statistics carry little information about the bit.
* ``custom`` loads two dmx-json files and makes no claim.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import qcore
from .errors import ContractViolation, InputError, ResourceError
from .qcore import CNOT, Circuit, DensityMatrix, Gate, H, PureStateVector, X

FAMILIES = ("orthogonal", "angle", "keyed_subset", "custom")
HARDNESS = {
    "orthogonal": "transparent",
    "angle": "transparent",
    "keyed_subset": "restricted-hard",
    "custom": "unspecified",
}


@dataclass(frozen=True)
class EfiSpec:
    family: str = "orthogonal"
    lam: int = 1
    n_qubits: int = 1
    theta: float | None = None
    register_qubits: int | None = None
    seed: int = 0
    paths: tuple | None = None
    # number of tensor copies taken of the base pair (1 = the base pair itself)
    copies: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ContractViolation(f"unknown EFI family {self.family!r}")
        if self.lam < 1:
            raise ContractViolation("lambda must be a positive integer")
        if self.copies < 1:
            raise ContractViolation("copies must be >= 1")
        if self.family == "angle":
            if self.theta is None or not (0 < self.theta <= math.pi / 2 + 1e-15):
                raise ContractViolation("angle family needs theta in (0, pi/2]")
        if self.family == "keyed_subset":
            r = self.register_qubits
            if r is None:
                object.__setattr__(self, "register_qubits", self.n_qubits)
            elif self.n_qubits != r:
                # register size determines the EFI register
                object.__setattr__(self, "n_qubits", r)
        if self.family == "custom" and (not self.paths or len(self.paths) != 2):
            raise ContractViolation("custom family needs two dmx-json paths")
        if self.n_qubits < 1:
            raise ContractViolation("n_qubits must be >= 1")

    @property
    def hardness(self) -> str:
        return HARDNESS[self.family]

    @property
    def total_qubits(self) -> int:
        return self.n_qubits * self.copies

    def to_dict(self) -> dict:
        d = {"family": self.family, "lambda": self.lam, "n_qubits": self.n_qubits,
             "seed": self.seed, "copies": self.copies}
        if self.theta is not None:
            d["theta"] = self.theta
        if self.register_qubits is not None:
            d["register_qubits"] = self.register_qubits
        if self.paths is not None:
            d["paths"] = [str(p) for p in self.paths]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EfiSpec":
        known = {"family", "lambda", "lam", "n_qubits", "theta", "register_qubits",
                 "seed", "paths", "copies"}
        extra = set(d) - known
        if extra:
            raise ContractViolation(f"unknown EFI spec fields: {sorted(extra)}")
        paths = d.get("paths")
        return cls(
            family=d.get("family", "orthogonal"),
            lam=int(d.get("lambda", d.get("lam", 1))),
            n_qubits=int(d.get("n_qubits", d.get("register_qubits", 1) or 1)),
            theta=None if d.get("theta") is None else float(d["theta"]),
            register_qubits=None if d.get("register_qubits") is None else int(d["register_qubits"]),
            seed=int(d.get("seed", 0)),
            paths=None if paths is None else tuple(str(p) for p in paths),
            copies=int(d.get("copies", 1)),
        )


@dataclass
class PurifiedState:
    """A coherent EFI output ``|chi_b> = A_b |0>`` split into E (EFI) and K (key)."""
    vector: PureStateVector
    e_qubits: tuple
    k_qubits: tuple
    circuit: Circuit

    @property
    def efi_state(self) -> DensityMatrix:
        return qcore.reduce_to(self.vector, self.e_qubits)

    @property
    def key_state(self) -> DensityMatrix:
        return qcore.reduce_to(self.vector, self.k_qubits)

    def schmidt_coefficients(self) -> np.ndarray:
        """Singular values of the amplitude matrix reshaped across E:K."""
        n = self.vector.qubit_count
        order = list(self.e_qubits) + list(self.k_qubits)
        v = qcore.permute_vector(self.vector.amplitudes, order)
        m = v.reshape(2 ** len(self.e_qubits), 2 ** len(self.k_qubits))
        assert len(order) == n
        return np.linalg.svd(m, compute_uv=False)


@dataclass
class Purification:
    circuit0: Circuit
    circuit1: Circuit
    e_qubits: tuple
    k_qubits: tuple

    @property
    def n_qubits(self) -> int:
        return self.circuit0.n_qubits

    def circuit(self, b: int) -> Circuit:
        return self.circuit1 if b else self.circuit0

    @property
    def u0(self) -> np.ndarray:
        return self.circuit0.unitary()

    @property
    def u1(self) -> np.ndarray:
        return self.circuit1.unitary()

    def state(self, b: int) -> PurifiedState:
        c = self.circuit(b)
        return PurifiedState(PureStateVector(c.run(), check=False), self.e_qubits,
                             self.k_qubits, c)


@dataclass
class EfiInstance:
    rho0: DensityMatrix
    rho1: DensityMatrix
    spec: EfiSpec
    purification: Purification | None = None
    declared_td_bound: float = 0.0
    td: float = field(init=False)

    def __post_init__(self):
        if self.rho0.dim != self.rho1.dim:
            raise ContractViolation("EFI pair elements have different dimensions")
        self.td = qcore.trace_distance(self.rho0, self.rho1)
        if self.td < self.declared_td_bound - 1e-9:
            raise ContractViolation(
                f"pair trace distance {self.td:.6g} is below the declared bound "
                f"{self.declared_td_bound:.6g}")

    @property
    def n_qubits(self) -> int:
        return self.rho0.qubit_count

    def rho(self, b: int) -> DensityMatrix:
        return self.rho1 if b else self.rho0

    def has_purification(self) -> bool:
        return self.purification is not None


# ---------------------------------------------------------------------------
# Family definitions
# ---------------------------------------------------------------------------

def _keyed_permutation(r: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).permutation(2 ** r)


def _base_circuit(spec: EfiSpec, b: int) -> tuple[Circuit, tuple, tuple]:
    """Purifying circuit for one copy: returns (circuit, e_qubits, k_qubits)."""
    n = spec.n_qubits
    if spec.family == "orthogonal":
        # E = n qubits, K = 1 qubit that stays |0>
        gates = tuple(Gate("X", X, (q,)) for q in range(n)) if b else ()
        return Circuit(n + 1, gates), tuple(range(n)), (n,)
    if spec.family == "angle":
        gates = (Gate(f"RY({2 * spec.theta:.6g})", qcore.ry(2 * spec.theta), (0,)),) if b else ()
        return Circuit(n + 1, gates), tuple(range(n)), (n,)
    if spec.family == "keyed_subset":
        r = spec.register_qubits
        perm = _keyed_permutation(r, spec.seed)
        pm = qcore.permutation_matrix(perm)
        gates = [Gate("H", H, (q,)) for q in range(r - 1)]
        gates += [Gate("CNOT", CNOT, (q, r - 1)) for q in range(r - 1)]
        if b:
            gates.append(Gate("X", X, (r - 1,)))
        gates += [Gate("CNOT", CNOT, (q, r + q)) for q in range(r)]
        gates.append(Gate("PERM", pm, tuple(range(r))))
        gates.append(Gate("PERM", pm, tuple(range(r, 2 * r))))
        return Circuit(2 * r, tuple(gates)), tuple(range(r)), tuple(range(r, 2 * r))
    if spec.family == "custom":
        rho = _load_custom(spec, b)
        return _canonical_purification(rho)
    raise ContractViolation(f"unknown family {spec.family!r}")


def _load_custom(spec: EfiSpec, b: int) -> DensityMatrix:
    path = Path(spec.paths[b])
    rho = qcore.load_dmx(path)
    if rho.qubit_count != spec.n_qubits:
        raise InputError(f"{path}: expected {spec.n_qubits} qubits, found {rho.qubit_count}")
    return rho


def _canonical_purification(rho: DensityMatrix) -> tuple[Circuit, tuple, tuple]:
    w, v = np.linalg.eigh(rho.data)
    keep = [i for i in range(len(w)) if w[i] > 1e-14]
    k = max(1, math.ceil(math.log2(len(keep)))) if keep else 1
    n = rho.qubit_count
    vec = np.zeros((2 ** n, 2 ** k), dtype=complex)
    for j, i in enumerate(keep):
        vec[:, j] = math.sqrt(w[i]) * v[:, i]
    vec = vec.reshape(-1)
    vec /= np.linalg.norm(vec)
    u = qcore.householder_prep(vec)
    circ = Circuit(n + k, (Gate("PREP", u, tuple(range(n + k))),))
    return circ, tuple(range(n)), tuple(range(n, n + k))


def _declared_bound(spec: EfiSpec) -> float:
    if spec.family in ("orthogonal", "keyed_subset"):
        return 1.0
    if spec.family == "angle" and spec.copies == 1:
        return math.sin(spec.theta)
    if spec.family == "angle":
        return fidelity_bound(math.sin(spec.theta), spec.copies)
    return 0.0


def _base_state(spec: EfiSpec, b: int) -> DensityMatrix:
    n = spec.n_qubits
    if spec.family == "orthogonal":
        return qcore.basis_state(str(b) * n)
    if spec.family == "angle":
        v = np.zeros(2 ** n, dtype=complex)
        v[0] = 1.0
        if b:
            # cos(theta)|0> + sin(theta)|1> on qubit 0, rest |0>
            v[0] = math.cos(spec.theta)
            v[2 ** (n - 1)] = math.sin(spec.theta)
        return DensityMatrix(np.outer(v, v.conj()), check=False)
    if spec.family == "keyed_subset":
        r = spec.register_qubits
        perm = _keyed_permutation(r, spec.seed)
        support = [int(perm[x]) for x in range(2 ** r) if bin(x).count("1") % 2 == b]
        diag = np.zeros(2 ** r)
        diag[support] = 1.0 / len(support)
        return DensityMatrix(np.diag(diag).astype(complex), check=False)
    return _load_custom(spec, b)


def generate(spec: EfiSpec, b: int) -> DensityMatrix:
    """The EFI element rho_b for ``spec`` (deterministic; mixedness lives in the matrix)."""
    if b not in (0, 1):
        raise ContractViolation("b must be 0 or 1")
    base = _base_state(spec, b)
    if spec.copies == 1:
        out = base
    else:
        out = qcore.tensor_power(base, spec.copies)
    return DensityMatrix(out.data)


def purification(spec: EfiSpec) -> Purification:
    """Purifying circuits for both bits, copies laid out as [E_1 K_1 E_2 K_2 ...]."""
    c0, e, k = _base_circuit(spec, 0)
    c1, _, _ = _base_circuit(spec, 1)
    if spec.copies == 1:
        return Purification(c0, c1, e, k)
    per = c0.n_qubits
    qcore.check_dim(2 ** (per * spec.copies), what="purified register")
    big0, big1 = c0, c1
    for _ in range(spec.copies - 1):
        big0, big1 = big0.parallel(c0), big1.parallel(c1)
    es = tuple(i * per + q for i in range(spec.copies) for q in e)
    ks = tuple(i * per + q for i in range(spec.copies) for q in k)
    return Purification(big0, big1, es, ks)


def purified_generate(spec: EfiSpec, b: int) -> PurifiedState:
    """Coherent output of the generator's unitary part, with its E:K split."""
    if b not in (0, 1):
        raise ContractViolation("b must be 0 or 1")
    return purification(spec).state(b)


def make_instance(spec: EfiSpec, with_purification: bool = True) -> EfiInstance:
    rho0, rho1 = generate(spec, 0), generate(spec, 1)
    pur = purification(spec) if with_purification else None
    return EfiInstance(rho0, rho1, spec, pur, _declared_bound(spec))


# ---------------------------------------------------------------------------
# Amplification and reporting
# ---------------------------------------------------------------------------

def lemma_bound(td: float, n: int) -> float:
    """``1 - exp(-n * td / 2)``, the advertised lower bound on the n-fold trace distance.

    Not valid for every pair: two pure qubit states at angle 0.0625 with
    n = 5 already violate it. :func:`fidelity_bound` is the safe version.
    """
    return 1.0 - math.exp(-n * td / 2.0)


def fidelity_bound(td: float, n: int) -> float:
    """``1 - (1 - td^2)^(n/2)``, a lower bound on the n-fold trace distance valid for all pairs.

    Fidelity is multiplicative under tensor powers and
    ``1 - sqrt(F) <= TD <= sqrt(1 - F)``.
    """
    return 1.0 - max(0.0, 1.0 - td * td) ** (n / 2.0)


def amplify_statistical(inst: EfiInstance, n: int) -> EfiInstance:
    """Replace rho_b by rho_b^{⊗n}; the purification (if any) is tensored alongside."""
    if n < 1:
        raise ContractViolation("n must be a positive integer")
    qcore.check_dim(inst.rho0.dim ** n, what="amplified EFI pair")
    if n == 1:
        return inst
    spec = replace(inst.spec, copies=inst.spec.copies * n)
    r0 = qcore.tensor_power(inst.rho0, n)
    r1 = qcore.tensor_power(inst.rho1, n)
    pur = None
    if inst.purification is not None:
        try:
            pur = purification(spec)
        except ResourceError:
            # the key register doubles the size; keep the mixed pair without it
            pur = None
    return EfiInstance(r0, r1, spec, pur, declared_td_bound=fidelity_bound(inst.td, n))


@dataclass
class FarnessReport:
    td: float
    bound_1_minus_2_pow_minus_lambda: float
    satisfied: bool
    lam: int

    def to_dict(self) -> dict:
        return {"td": self.td, "lambda": self.lam,
                "bound_1_minus_2_pow_minus_lambda": self.bound_1_minus_2_pow_minus_lambda,
                "satisfied": self.satisfied}


def farness_report(inst: EfiInstance, lam: int | None = None) -> FarnessReport:
    lam = inst.spec.lam if lam is None else lam
    bound = 1.0 - 2.0 ** (-lam)
    return FarnessReport(inst.td, bound, bool(inst.td >= bound - 1e-12), lam)


def copies_for_lambda(td: float, lam: int) -> int:
    """Copy count ``2 * lam * p`` with ``p = ceil(1 / td)``."""
    if td <= 0:
        raise ContractViolation("trace distance must be positive to amplify")
    return 2 * lam * math.ceil(1.0 / td - 1e-12)
