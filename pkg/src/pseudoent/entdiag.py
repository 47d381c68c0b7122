"""Partial-transpose diagnostics: negativity, log-negativity, PPT test, gap summary.

Negativity here is a structural witness only. The entanglement quantities the
pseudo-entanglement statements are about (distillable entanglement and
entanglement cost) are certified operationally by :mod:`pseudoent.locc`.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import qcore
from .qcore import Bipartition


def _pt_spectrum(rho, cut: Bipartition) -> np.ndarray:
    pt = qcore.partial_transpose(rho, cut)
    return np.linalg.eigvalsh(0.5 * (pt + pt.conj().T))


def negativity(rho, cut: Bipartition) -> float:
    """Sum of the magnitudes of the negative partial-transpose eigenvalues."""
    w = _pt_spectrum(rho, cut)
    return float(max(0.0, -np.sum(w[w < 0])))


def log_negativity(rho, cut: Bipartition) -> float:
    """``log2(1 + 2 N)``, i.e. ``log2`` of the trace norm of the partial transpose."""
    return math.log2(1.0 + 2.0 * negativity(rho, cut))


@dataclass
class PptResult:
    is_ppt: bool
    min_eigenvalue: float
    conclusive_separability: bool

    def to_dict(self) -> dict:
        return asdict(self)


def ppt_check(rho, cut: Bipartition, tol: float = 1e-9) -> PptResult:
    """Peres test. ``conclusive_separability`` is only set for 2x2 and 2x3 cuts,
    where PPT is equivalent to separability."""
    w = _pt_spectrum(rho, cut)
    lo = float(w[0])
    is_ppt = lo >= -tol
    dims = sorted(cut.dims)
    small = dims in ([2, 2], [2, 3])
    return PptResult(bool(is_ppt), lo, bool(is_ppt and small))


@dataclass
class GapReport:
    cost_upper: int | None
    distill_lower: int | None
    gap: int | None
    epsilon: float | None
    log_negativity_psi: float | None
    log_negativity_phi: float | None
    ppt_psi: bool | None

    def to_dict(self) -> dict:
        return asdict(self)


def gap_report(certified=None, psi=None, phi=None, cut: Bipartition | None = None) -> GapReport:
    """Merge locc certificates (``certified`` from ``locc.certify``) with PT diagnostics.

    Any of the inputs may be missing; the corresponding fields are then ``None``.
    """
    ln_psi = ln_phi = ppt_psi = None
    if psi is not None and cut is not None:
        ln_psi = log_negativity(psi, cut)
        ppt_psi = ppt_check(psi, cut).is_ppt
    if phi is not None and cut is not None:
        ln_phi = log_negativity(phi, cut)
    cost = distill = gap = eps = None
    if certified is not None:
        cost = certified.cost.value if certified.cost is not None else None
        distill = certified.distill.value if certified.distill is not None else None
        if cost is not None and distill is not None:
            gap = distill - cost
        eps = certified.epsilon
    return GapReport(cost, distill, gap, eps, ln_psi, ln_phi, ppt_psi)
