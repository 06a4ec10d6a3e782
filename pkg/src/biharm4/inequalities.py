"""Evaluators for the inequality chain and the equality-case reconstruction.

All checks operate on L2-normalized fields where stated.  Each evaluator
returns an :class:`InequalityReport` with both sides, the signed gap, and
whether the inequality holds at the report's tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import (
    DegenerateInputError,
    NormalizationError,
    NotAnExtremizerError,
    ParameterError,
)
from .potentials import PotentialModel
from .radial import (
    RadialField,
    RadialGrid,
    entropy,
    grad_sq,
    hessian_sq,
    l2_sq,
)
from .solver import extract_lambda, pde_residual, potential_V, rescale_to_groundstate

_L2_TOL = 1e-8


@dataclass(frozen=True)
class InequalityReport:
    """Two sides of one inequality.  ``gap = lhs - rhs``.

    For greater-or-equal inequalities ``satisfied`` means ``gap >= -tol``;
    strict less-than checks (see :func:`interpolation`) set ``satisfied``
    to ``gap < 0`` and record that orientation in ``context``.
    """

    name: str
    lhs: float
    rhs: float
    gap: float
    satisfied: bool
    tol: float
    context: dict = dc_field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name, "lhs": self.lhs, "rhs": self.rhs,
            "gap": self.gap, "satisfied": self.satisfied, "tol": self.tol,
            "context": self.context,
        }


def normalize_field(u: RadialField) -> RadialField:
    """Scale a field to unit L2 norm."""
    nrm = l2_sq(u)
    if nrm <= 0.0:
        raise DegenerateInputError("cannot normalize the zero field")
    return u.scaled(nrm ** -0.5)


def _require_normalized(u: RadialField) -> None:
    nrm = l2_sq(u)
    if abs(nrm - 1.0) > _L2_TOL:
        raise NormalizationError(
            f"field must satisfy int |u|^2 = 1 within {_L2_TOL:g}, got {nrm:.10f}"
        )


def classical_lsi(u: RadialField, tol: float = 1e-6) -> InequalityReport:
    """Entropy bound by the gradient energy for unit-norm fields.

    ``ln(int |grad u|^2 / (2 pi e)) >= int |u|^2 ln |u|``; equality holds
    exactly on the normalized Gaussian family.
    """
    _require_normalized(u)
    gs = grad_sq(u)
    if gs <= 0.0:
        raise DegenerateInputError("gradient energy vanished")
    lhs = math.log(gs / (2.0 * math.pi * math.e))
    rhs = entropy(u)
    gap = lhs - rhs
    return InequalityReport(
        name="classical_log_sobolev", lhs=lhs, rhs=rhs, gap=gap,
        satisfied=gap >= -tol, tol=tol, context={"grad_sq": gs},
    )


def biharmonic_lsi(u: RadialField, T: float, tol: float = 1e-4) -> InequalityReport:
    """Fourth-order entropy bound with the solved constant T.

    ``0.5 * ln(int |D^2 u|^2 / (2T)) >= int |u|^2 ln |u|`` for unit-norm
    fields; equality characterizes normalized ground states.
    """
    if not (T > 0.0) or not math.isfinite(T):
        raise ParameterError(f"constant T must be positive, got {T!r}")
    _require_normalized(u)
    hs = hessian_sq(u)
    if hs <= 0.0:
        raise DegenerateInputError("curvature energy vanished")
    lhs = 0.5 * math.log(hs / (2.0 * T))
    rhs = entropy(u)
    gap = lhs - rhs
    return InequalityReport(
        name="biharmonic_log_sobolev", lhs=lhs, rhs=rhs, gap=gap,
        satisfied=gap >= -tol, tol=tol, context={"hess_sq": hs, "T": T},
    )


def interpolation(u: RadialField) -> InequalityReport:
    """Strict interpolation bound between gradient, curvature, and mass.

    ``int |grad u|^2 < (int |Lap u|^2)^{1/2} (int |u|^2)^{1/2}`` for any
    nonzero field; the ratio lhs/rhs is dilation invariant.
    """
    if u.is_zero():
        raise DegenerateInputError("interpolation bound is undefined for the zero field")
    lhs = grad_sq(u)
    lw = u.grid.lap @ u.values
    lap_sq = float(u.grid.quad_weights @ (lw * lw).sum(axis=1))
    rhs = math.sqrt(lap_sq * l2_sq(u))
    gap = lhs - rhs
    return InequalityReport(
        name="interpolation", lhs=lhs, rhs=rhs, gap=gap,
        satisfied=gap < 0.0, tol=0.0,
        context={"sense": "strict_less_than", "ratio": lhs / rhs if rhs > 0 else math.inf},
    )


def constant_bound(T: float) -> InequalityReport:
    """Strict comparison of the solved constant against the second-order one.

    Requires ``2T > (pi e)^2``; fails on equality (strictness matters).
    """
    if not (T > 0.0) or not math.isfinite(T):
        raise ParameterError(f"constant T must be positive, got {T!r}")
    lhs = 2.0 * T
    rhs = (math.pi * math.e) ** 2
    gap = lhs - rhs
    return InequalityReport(
        name="constant_bound", lhs=lhs, rhs=rhs, gap=gap,
        satisfied=gap > 0.0, tol=0.0, context={"sense": "strict_greater_than"},
    )


@dataclass(frozen=True)
class ReconstructionResult:
    mu: float
    r: float
    candidate: RadialField
    pde_residual: float
    gap: float

    def to_dict(self) -> dict:
        return {
            "mu": self.mu, "r": self.r,
            "pde_residual": self.pde_residual, "gap": self.gap,
        }


def reconstruct_groundstate(
    u: RadialField,
    potential: PotentialModel,
    T: float,
    tol: float = 1e-4,
) -> ReconstructionResult:
    """Rebuild a ground state from an equality-case normalized field.

    For the logarithmic potential, an equality case u of the fourth-order
    entropy bound determines a unique amplitude ``mu = exp(-V(u))`` with
    ``V(mu u) = 0`` and a unique dilation rate r such that
    ``mu u(r x)`` solves the field equation.  Raises
    :class:`NotAnExtremizerError` when the equality gap exceeds ``tol``.
    """
    if potential.kind != "logarithmic":
        raise ParameterError("reconstruction requires the logarithmic potential")
    _require_normalized(u)
    report = biharmonic_lsi(u, T, tol=tol)
    if abs(report.gap) > tol:
        raise NotAnExtremizerError(
            f"equality gap {report.gap:.3e} exceeds tolerance {tol:g}"
        )
    ent = entropy(u)
    mu = math.exp(-ent)
    scaled = u.scaled(mu)
    v_scaled = potential_V(scaled, potential)
    if abs(v_scaled) > 1e-6 * (1.0 + abs(ent)):
        raise NotAnExtremizerError(
            f"amplitude correction left V = {v_scaled:.3e}, not zero"
        )
    lam = extract_lambda(scaled, potential)
    candidate = rescale_to_groundstate(scaled, lam)
    return ReconstructionResult(
        mu=mu,
        r=lam ** 0.25,
        candidate=candidate,
        pde_residual=pde_residual(candidate, potential),
        gap=report.gap,
    )


def make_corpus(
    grid: RadialGrid,
    count: int,
    seed: int = 20240817,
    normalized: bool = True,
) -> list:
    """Fixed-seed corpus of radial Gaussian-mixture fields for fuzzing.

    Each field is a sum of up to three bumps ``a_k exp(-r^2/(2 sigma_k^2))``
    with signed amplitudes, optionally scaled to unit L2 norm.
    """
    if count < 1:
        raise ParameterError("corpus size must be >= 1")
    rng = np.random.default_rng(seed)
    r2 = grid.nodes**2
    fields = []
    while len(fields) < count:
        k = int(rng.integers(1, 4))
        amps = rng.uniform(0.2, 2.0, size=k) * rng.choice([-1.0, 1.0], size=k)
        sigs = rng.uniform(0.35, 2.2, size=k)
        w = np.zeros(grid.n)
        for a, s in zip(amps, sigs):
            w += a * np.exp(-r2 / (2.0 * s * s))
        if np.max(np.abs(w)) < 1e-3:
            continue
        f = RadialField(grid, w)
        if normalized:
            nrm = l2_sq(f)
            if nrm < 1e-12:
                continue
            f = f.scaled(nrm ** -0.5)
        fields.append(f)
    return fields
