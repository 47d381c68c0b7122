"""Dense multi-qubit linear algebra: states, partial operations, distances, gates.

Qubit ordering is big-endian: qubit 0 is the most significant bit of a basis
index, so ``|q0 q1 ... q_{n-1}>`` has index ``sum(q_k * 2**(n-1-k))``.
"""
from __future__ import annotations

import json
import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ContractViolation, InputError, ResourceError


@dataclass(frozen=True)
class Tolerances:
    hermitian: float = 1e-10
    trace: float = 1e-10
    psd: float = 1e-9
    recon: float = 1e-9
    # eigenvalues below this are treated as zero when taking matrix square roots
    support: float = 1e-12

    def as_dict(self) -> dict:
        return {
            "hermitian": self.hermitian,
            "trace": self.trace,
            "psd": self.psd,
            "recon": self.recon,
            "support": self.support,
        }


DEFAULT_TOL = Tolerances()
DEFAULT_DIM_CAP = 2 ** 14
_dim_cap = DEFAULT_DIM_CAP


def get_dim_cap() -> int:
    return _dim_cap


def set_dim_cap(cap: int) -> None:
    global _dim_cap
    if cap < 1:
        raise ContractViolation(f"dimension cap must be positive, got {cap}")
    _dim_cap = int(cap)


@contextmanager
def dimension_cap(cap: int):
    """Temporarily change the global dimension cap."""
    old = get_dim_cap()
    set_dim_cap(cap)
    try:
        yield cap
    finally:
        set_dim_cap(old)


def check_dim(dim: int, cap: int | None = None, what: str = "state") -> None:
    cap = get_dim_cap() if cap is None else cap
    if dim > cap:
        raise ResourceError(f"{what} dimension {dim} exceeds cap {cap}")


def _qubits_of(dim: int) -> int:
    n = int(round(math.log2(dim))) if dim > 0 else -1
    if dim < 1 or 2 ** n != dim:
        raise ContractViolation(f"dimension {dim} is not a power of two")
    return n


# ---------------------------------------------------------------------------
# State containers
# ---------------------------------------------------------------------------

class DensityMatrix:
    """Immutable Hermitian, unit-trace, positive semidefinite matrix.

    Construction validates the three invariants against ``tol`` unless
    ``check=False`` is passed (used internally for results that are valid by
    construction, e.g. tensor products of valid states).
    """

    __slots__ = ("_data", "_n")

    def __init__(self, data, *, check: bool = True, tol: Tolerances | None = None):
        arr = np.array(data, dtype=complex)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ContractViolation(f"density matrix must be square, got shape {arr.shape}")
        self._n = _qubits_of(arr.shape[0])
        arr.setflags(write=False)
        self._data = arr
        if check:
            self.check(tol)

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def dim(self) -> int:
        return self._data.shape[0]

    @property
    def qubit_count(self) -> int:
        return self._n

    def check(self, tol: Tolerances | None = None) -> "DensityMatrix":
        tol = tol or DEFAULT_TOL
        m = self._data
        herm_err = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
        if herm_err > tol.hermitian:
            raise ContractViolation(f"matrix is not Hermitian (max deviation {herm_err:.3e})")
        tr = np.trace(m)
        if abs(tr - 1) > tol.trace:
            raise ContractViolation(f"trace is {tr:.12g}, expected 1")
        lo = float(np.linalg.eigvalsh(m)[0])
        if lo < -tol.psd:
            raise ContractViolation(f"matrix is not PSD (min eigenvalue {lo:.3e})")
        return self

    def purity(self) -> float:
        return float(np.real(np.trace(self._data @ self._data)))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self._data)[::-1]

    def __array__(self, dtype=None, copy=None):
        return self._data if dtype is None else self._data.astype(dtype)

    def __repr__(self) -> str:
        return f"DensityMatrix(qubits={self._n}, purity={self.purity():.6g})"


class PureStateVector:
    """Normalized state vector over ``qubit_count`` qubits."""

    __slots__ = ("_amps", "_n")

    def __init__(self, amplitudes, *, check: bool = True, tol: float = 1e-10):
        v = np.array(amplitudes, dtype=complex).reshape(-1)
        self._n = _qubits_of(v.shape[0])
        if check:
            nrm = float(np.vdot(v, v).real)
            if abs(nrm - 1) > tol:
                raise ContractViolation(f"state vector has squared norm {nrm:.12g}")
        v.setflags(write=False)
        self._amps = v

    @property
    def amplitudes(self) -> np.ndarray:
        return self._amps

    @property
    def dim(self) -> int:
        return self._amps.shape[0]

    @property
    def qubit_count(self) -> int:
        return self._n

    def density(self) -> DensityMatrix:
        return DensityMatrix(np.outer(self._amps, self._amps.conj()), check=False)

    def inner(self, other: "PureStateVector") -> complex:
        return complex(np.vdot(self._amps, other._amps))

    def __repr__(self) -> str:
        return f"PureStateVector(qubits={self._n})"


@dataclass(frozen=True)
class Bipartition:
    qubits_a: tuple
    qubits_b: tuple

    def __init__(self, qubits_a: Iterable[int], qubits_b: Iterable[int]):
        object.__setattr__(self, "qubits_a", tuple(int(q) for q in qubits_a))
        object.__setattr__(self, "qubits_b", tuple(int(q) for q in qubits_b))

    def validate(self, n_qubits: int) -> "Bipartition":
        a, b = set(self.qubits_a), set(self.qubits_b)
        if len(a) != len(self.qubits_a) or len(b) != len(self.qubits_b):
            raise ContractViolation("partition lists contain repeated qubits")
        if a & b:
            raise ContractViolation(f"partition sides overlap on {sorted(a & b)}")
        if a | b != set(range(n_qubits)):
            raise ContractViolation(
                f"partition {self.qubits_a}|{self.qubits_b} does not cover {n_qubits} qubits")
        return self

    def side(self, which: str) -> tuple:
        if which in ("A", "a"):
            return self.qubits_a
        if which in ("B", "b"):
            return self.qubits_b
        raise ContractViolation(f"side must be 'A' or 'B', got {which!r}")

    @property
    def n_qubits(self) -> int:
        return len(self.qubits_a) + len(self.qubits_b)

    @property
    def dims(self) -> tuple[int, int]:
        return 2 ** len(self.qubits_a), 2 ** len(self.qubits_b)

    @classmethod
    def split(cls, n_a: int, n_b: int) -> "Bipartition":
        """First ``n_a`` qubits on A, the following ``n_b`` on B."""
        return cls(range(n_a), range(n_a, n_a + n_b))

    def to_dict(self) -> dict:
        return {"a": list(self.qubits_a), "b": list(self.qubits_b)}


@dataclass
class SpectralDecomposition:
    """Distinct eigenvalues (descending) with their eigenprojectors."""
    eigenvalues: np.ndarray
    projectors: list
    multiplicities: list
    eigenvectors: np.ndarray = field(repr=False)
    all_eigenvalues: np.ndarray = field(repr=False)

    def reconstruct(self) -> np.ndarray:
        out = np.zeros_like(self.projectors[0])
        for lam, p in zip(self.eigenvalues, self.projectors):
            out = out + lam * p
        return out

    def projector_where(self, predicate) -> np.ndarray:
        """Sum of eigenprojectors whose eigenvalue satisfies ``predicate``."""
        out = np.zeros_like(self.projectors[0])
        for lam, p in zip(self.eigenvalues, self.projectors):
            if predicate(lam):
                out = out + p
        return out


# ---------------------------------------------------------------------------
# Helpers on raw arrays
# ---------------------------------------------------------------------------

def as_matrix(x) -> np.ndarray:
    """Return the dense operator for a DensityMatrix, PureStateVector or array."""
    if isinstance(x, DensityMatrix):
        return x.data
    if isinstance(x, PureStateVector):
        return np.outer(x.amplitudes, x.amplitudes.conj())
    arr = np.asarray(x, dtype=complex)
    if arr.ndim == 1:
        return np.outer(arr, arr.conj())
    return arr


def left_apply(op: np.ndarray, mat: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Compute ``(op on targets ⊗ I) @ mat`` for ``mat`` with 2**n rows."""
    targets = list(targets)
    k = len(targets)
    if k == 0:
        return op[0, 0] * mat
    if op.shape != (2 ** k, 2 ** k):
        raise ContractViolation(f"operator of shape {op.shape} does not act on {k} qubits")
    cols = mat.shape[1]
    t = mat.reshape([2] * n + [cols])
    o = op.reshape([2] * (2 * k))
    res = np.tensordot(o, t, axes=(list(range(k, 2 * k)), targets))
    rest = [q for q in range(n) if q not in targets]
    order = np.argsort(targets + rest)
    res = np.transpose(res, list(order) + [n])
    return res.reshape(2 ** n, cols)


def conjugate_by(op: np.ndarray, rho: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """``(O ⊗ I) rho (O ⊗ I)^†`` with O acting on ``targets``."""
    x = left_apply(op, rho, targets, n)
    return left_apply(op, x.conj().T, targets, n).conj().T


def embed(op: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Full 2**n operator equal to ``op`` on ``targets`` and identity elsewhere."""
    return left_apply(np.asarray(op, dtype=complex), np.eye(2 ** n, dtype=complex), targets, n)


def reduce_operator(mat: np.ndarray, keep: Sequence[int], n: int) -> np.ndarray:
    """Partial trace of an arbitrary 2**n operator, keeping ``keep`` in the given order."""
    keep = list(keep)
    drop = [q for q in range(n) if q not in keep]
    t = mat.reshape([2] * (2 * n))
    t = np.transpose(t, keep + drop + [n + q for q in keep] + [n + q for q in drop])
    dk, dd = 2 ** len(keep), 2 ** len(drop)
    t = t.reshape(dk, dd, dk, dd)
    return np.einsum("ajbj->ab", t)


def permute_qubits(mat: np.ndarray, order: Sequence[int]) -> np.ndarray:
    """Reorder qubits of an operator: new qubit k is old qubit ``order[k]``."""
    n = len(order)
    t = mat.reshape([2] * (2 * n))
    t = np.transpose(t, list(order) + [n + q for q in order])
    return t.reshape(2 ** n, 2 ** n)


def permute_vector(vec: np.ndarray, order: Sequence[int]) -> np.ndarray:
    n = len(order)
    return np.transpose(vec.reshape([2] * n), list(order)).reshape(-1)


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def tensor(a, b, *more, dim_cap: int | None = None):
    """Kronecker product of states (DensityMatrix or PureStateVector, not mixed)."""
    items = (a, b) + more
    if all(isinstance(x, PureStateVector) for x in items):
        dim = math.prod(x.dim for x in items)
        check_dim(dim, dim_cap)
        v = items[0].amplitudes
        for x in items[1:]:
            v = np.kron(v, x.amplitudes)
        return PureStateVector(v, check=False)
    mats = [as_matrix(x) for x in items]
    dim = math.prod(m.shape[0] for m in mats)
    check_dim(dim, dim_cap)
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return DensityMatrix(out, check=False)


def tensor_power(x, n: int, dim_cap: int | None = None):
    if n < 1:
        raise ContractViolation("tensor power needs n >= 1")
    if n == 1:
        return x
    return tensor(*([x] * n), dim_cap=dim_cap)


def partial_trace(rho, part: Bipartition, keep: str = "A") -> DensityMatrix:
    """Trace out the other side of ``part``; kept qubits follow the partition's order."""
    m = as_matrix(rho)
    n = _qubits_of(m.shape[0])
    part.validate(n)
    return DensityMatrix(reduce_operator(m, part.side(keep), n), check=False)


def reduce_to(rho, qubits: Sequence[int]) -> DensityMatrix:
    """Reduced state on ``qubits`` (in that order)."""
    m = as_matrix(rho)
    n = _qubits_of(m.shape[0])
    return DensityMatrix(reduce_operator(m, list(qubits), n), check=False)


def partial_transpose(rho, part: Bipartition, side: str = "A") -> np.ndarray:
    """Transpose the qubits on ``side`` of the cut. Returns a plain Hermitian array."""
    m = as_matrix(rho)
    n = _qubits_of(m.shape[0])
    part.validate(n)
    qs = set(part.side(side))
    axes = list(range(2 * n))
    for q in qs:
        axes[q], axes[n + q] = n + q, q
    t = np.transpose(m.reshape([2] * (2 * n)), axes)
    return t.reshape(m.shape)


def trace_norm_hermitian(m: np.ndarray) -> float:
    return float(np.sum(np.abs(np.linalg.eigvalsh(m))))


def trace_norm_svd(m: np.ndarray) -> float:
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def _same_dims(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ContractViolation(f"dimension mismatch: {a.shape} vs {b.shape}")


def trace_distance(rho, sigma) -> float:
    """Half the sum of absolute eigenvalues of ``rho - sigma``."""
    a, b = as_matrix(rho), as_matrix(sigma)
    _same_dims(a, b)
    d = a - b
    return 0.5 * trace_norm_hermitian(0.5 * (d + d.conj().T))


def trace_distance_svd(rho, sigma) -> float:
    """Same quantity via singular values; independent cross-check route."""
    a, b = as_matrix(rho), as_matrix(sigma)
    _same_dims(a, b)
    return 0.5 * trace_norm_svd(a - b)


def psd_sqrt(m: np.ndarray, tol: Tolerances | None = None) -> np.ndarray:
    tol = tol or DEFAULT_TOL
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    if w[0] < -tol.psd:
        raise ContractViolation(f"matrix is not PSD (min eigenvalue {w[0]:.3e})")
    w = np.where(w > tol.support, w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity(rho, sigma, tol: Tolerances | None = None) -> float:
    """Squared Uhlmann fidelity ``Tr(sqrt(sqrt(rho) sigma sqrt(rho)))**2``.

    Evaluated as the squared nuclear norm of ``sqrt(rho) sqrt(sigma)``, which
    equals the textbook expression and avoids square-rooting a product whose
    null space is polluted by rounding noise.
    """
    tol = tol or DEFAULT_TOL
    a, b = as_matrix(rho), as_matrix(sigma)
    _same_dims(a, b)
    for m in (a, b):
        w = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
        if np.count_nonzero(w > tol.support) == 1:
            # one argument is pure: F = <v|other|v> = Tr(rho sigma), no square roots needed
            return float(min(1.0, max(0.0, np.real(np.vdot(a.conj().T, b)))))
    s = np.linalg.svd(psd_sqrt(a, tol) @ psd_sqrt(b, tol), compute_uv=False)
    return float(min(1.0, np.sum(s) ** 2))


def _phase_fix(vecs: np.ndarray) -> np.ndarray:
    """Make the first non-negligible component of every column real positive."""
    out = vecs.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        idx = int(np.argmax(np.abs(col) > 1e-12))
        c = col[idx]
        if abs(c) > 0:
            out[:, j] = col * (abs(c) / c)
    return out


def spectral_decompose(herm, tol: Tolerances | None = None) -> SpectralDecomposition:
    """Eigen-decomposition of a Hermitian matrix, grouping degenerate eigenvalues."""
    tol = tol or DEFAULT_TOL
    m = as_matrix(herm)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ContractViolation("spectral_decompose needs a square matrix")
    if m.size and float(np.max(np.abs(m - m.conj().T))) > tol.hermitian:
        raise ContractViolation("spectral_decompose needs a Hermitian matrix")
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    w, v = w[::-1], v[:, ::-1]
    v = _phase_fix(v)
    groups: list[list[int]] = []
    for i, lam in enumerate(w):
        if groups and abs(w[groups[-1][0]] - lam) <= tol.hermitian:
            groups[-1].append(i)
        else:
            groups.append([i])
    vals, projs, mult = [], [], []
    for g in groups:
        vg = v[:, g]
        vals.append(float(np.mean(w[g])))
        projs.append(vg @ vg.conj().T)
        mult.append(len(g))
    return SpectralDecomposition(np.array(vals), projs, mult, v, w)


def is_unitary(u: np.ndarray, tol: float = 1e-10) -> bool:
    u = np.asarray(u)
    return u.ndim == 2 and u.shape[0] == u.shape[1] and bool(
        np.max(np.abs(u @ u.conj().T - np.eye(u.shape[0]))) <= tol)


def apply_unitary(state, u, target_qubits: Sequence[int] | None = None, tol: float = 1e-10):
    """Apply ``u`` on ``target_qubits`` (all qubits by default)."""
    u = np.asarray(u, dtype=complex)
    if not is_unitary(u, tol):
        raise ContractViolation("operator is not unitary")
    if isinstance(state, PureStateVector):
        n = state.qubit_count
        targets = list(range(n)) if target_qubits is None else list(target_qubits)
        out = left_apply(u, state.amplitudes.reshape(-1, 1), targets, n).reshape(-1)
        return PureStateVector(out, check=False)
    m = as_matrix(state)
    n = _qubits_of(m.shape[0])
    targets = list(range(n)) if target_qubits is None else list(target_qubits)
    return DensityMatrix(conjugate_by(u, m, targets, n), check=False)


def measure_computational(rho, qubits: Sequence[int] | None = None,
                          cutoff: float = 1e-15) -> dict[str, float]:
    """Outcome distribution of a computational-basis measurement on ``qubits``.

    Keys are bitstrings in the order of ``qubits``; outcomes with probability
    at most ``cutoff`` are omitted.
    """
    probs = _outcome_probs(rho, qubits)
    k = int(round(math.log2(len(probs))))
    return {format(i, f"0{k}b"): float(p) for i, p in enumerate(probs) if p > cutoff}


def _outcome_probs(rho, qubits) -> np.ndarray:
    m = as_matrix(rho)
    n = _qubits_of(m.shape[0])
    qubits = list(range(n)) if qubits is None else list(qubits)
    if len(set(qubits)) != len(qubits) or any(q < 0 or q >= n for q in qubits):
        raise ContractViolation(f"invalid qubit subset {qubits} for {n} qubits")
    diag = np.real(np.diag(reduce_operator(m, qubits, n)))
    diag = np.clip(diag, 0.0, None)
    return diag / diag.sum()


def sample(rho, qubits: Sequence[int] | None, rng: np.random.Generator) -> str:
    probs = _outcome_probs(rho, qubits)
    k = int(round(math.log2(len(probs))))
    i = int(rng.choice(len(probs), p=probs))
    return format(i, f"0{k}b")


# ---------------------------------------------------------------------------
# Named states and gates
# ---------------------------------------------------------------------------

_BELL = {
    "phi+": np.array([1, 0, 0, 1]),
    "phi-": np.array([1, 0, 0, -1]),
    "psi+": np.array([0, 1, 1, 0]),
    "psi-": np.array([0, 1, -1, 0]),
}
_BELL_ALIASES = {"Φ⁺": "phi+", "Φ⁻": "phi-", "Ψ⁺": "psi+", "Ψ⁻": "psi-"}


def bell_state(which: str = "phi+") -> PureStateVector:
    key = _BELL_ALIASES.get(which, which.lower())
    if key not in _BELL:
        raise ContractViolation(f"unknown Bell state {which!r}")
    return PureStateVector(_BELL[key] / np.sqrt(2))


def bell_density(which: str = "phi+") -> DensityMatrix:
    """Bell-state density matrix with exactly representable entries (0, ±1/2)."""
    key = _BELL_ALIASES.get(which, which.lower())
    if key not in _BELL:
        raise ContractViolation(f"unknown Bell state {which!r}")
    v = _BELL[key].astype(complex)
    return DensityMatrix(np.outer(v, v.conj()) / 2)


def ket(bits: str) -> PureStateVector:
    v = np.zeros(2 ** len(bits), dtype=complex)
    v[int(bits, 2) if bits else 0] = 1
    return PureStateVector(v, check=False)


def basis_state(bits: str) -> DensityMatrix:
    return ket(bits).density()


def maximally_mixed(n_qubits: int) -> DensityMatrix:
    d = 2 ** n_qubits
    return DensityMatrix(np.eye(d) / d, check=False)


def plus_state() -> PureStateVector:
    return PureStateVector(np.array([1, 1]) / np.sqrt(2))


I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
PROJ0 = np.array([[1, 0], [0, 0]], dtype=complex)
PROJ1 = np.array([[0, 0], [0, 1]], dtype=complex)


def ry(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def permutation_matrix(perm: Sequence[int]) -> np.ndarray:
    """Unitary mapping basis state |x> to |perm[x]>."""
    d = len(perm)
    p = np.zeros((d, d), dtype=complex)
    p[list(perm), list(range(d))] = 1
    return p


def householder_prep(target: np.ndarray) -> np.ndarray:
    """A unitary whose first column is ``target`` (normalized state vector)."""
    t = np.asarray(target, dtype=complex).reshape(-1)
    d = t.shape[0]
    phase = t[0] / abs(t[0]) if abs(t[0]) > 1e-15 else 1.0
    t0 = t / phase
    e0 = np.zeros(d, dtype=complex)
    e0[0] = 1
    w = e0 - t0
    nw = np.vdot(w, w).real
    if nw < 1e-30:
        u = np.eye(d, dtype=complex)
    else:
        u = np.eye(d, dtype=complex) - 2 * np.outer(w, w.conj()) / nw
    return u * phase


@dataclass(frozen=True)
class Gate:
    name: str
    matrix: np.ndarray = field(repr=False, compare=False)
    qubits: tuple

    def dagger(self) -> "Gate":
        name = self.name[:-1] if self.name.endswith("†") else self.name + "†"
        return Gate(name, self.matrix.conj().T, self.qubits)

    def shifted(self, offset: int) -> "Gate":
        return Gate(self.name, self.matrix, tuple(q + offset for q in self.qubits))

    def remapped(self, mapping: Sequence[int]) -> "Gate":
        return Gate(self.name, self.matrix, tuple(mapping[q] for q in self.qubits))


@dataclass(frozen=True)
class Circuit:
    """Ordered gate list on ``n_qubits`` qubits."""
    n_qubits: int
    gates: tuple = ()

    @property
    def gate_count(self) -> int:
        return len(self.gates)

    def inverse(self) -> "Circuit":
        return Circuit(self.n_qubits, tuple(g.dagger() for g in reversed(self.gates)))

    def unitary(self) -> np.ndarray:
        check_dim(2 ** self.n_qubits, what="circuit unitary")
        u = np.eye(2 ** self.n_qubits, dtype=complex)
        for g in self.gates:
            u = left_apply(g.matrix, u, g.qubits, self.n_qubits)
        return u

    def run(self, vec: np.ndarray | None = None) -> np.ndarray:
        """Apply to a state vector (default |0...0>) gate by gate."""
        if vec is None:
            vec = np.zeros(2 ** self.n_qubits, dtype=complex)
            vec[0] = 1
        v = np.asarray(vec, dtype=complex).reshape(-1, 1)
        for g in self.gates:
            v = left_apply(g.matrix, v, g.qubits, self.n_qubits)
        return v.reshape(-1)

    def parallel(self, other: "Circuit") -> "Circuit":
        """Circuit on ``self.n_qubits + other.n_qubits`` qubits running both side by side."""
        off = self.n_qubits
        return Circuit(self.n_qubits + other.n_qubits,
                       self.gates + tuple(g.shifted(off) for g in other.gates))

    def remapped(self, mapping: Sequence[int], n_qubits: int) -> "Circuit":
        return Circuit(n_qubits, tuple(g.remapped(mapping) for g in self.gates))


# ---------------------------------------------------------------------------
# dmx-json serialization
# ---------------------------------------------------------------------------

def to_dmx(rho) -> dict:
    m = as_matrix(rho)
    n = _qubits_of(m.shape[0])
    return {
        "qubits": n,
        "re": [[float(x) for x in row] for row in m.real],
        "im": [[float(x) for x in row] for row in m.imag],
    }


def from_dmx(obj: dict, check: bool = True) -> DensityMatrix:
    try:
        n = int(obj["qubits"])
        re = np.array(obj["re"], dtype=float)
        im = np.array(obj["im"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed dmx-json object: {exc}") from exc
    if re.shape != (2 ** n, 2 ** n) or im.shape != re.shape:
        raise InputError(f"dmx-json shape {re.shape}/{im.shape} does not match {n} qubits")
    try:
        return DensityMatrix(re + 1j * im, check=check)
    except ContractViolation as exc:
        raise InputError(f"dmx-json matrix is not a density matrix: {exc}") from exc


def save_dmx(path, rho) -> Path:
    path = Path(path)
    # json writes floats with repr(), which round-trips every double exactly
    path.write_text(json.dumps(to_dmx(rho)))
    return path


def load_dmx(path, check: bool = True) -> DensityMatrix:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise InputError(f"dmx-json file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc
    return from_dmx(obj, check=check)
