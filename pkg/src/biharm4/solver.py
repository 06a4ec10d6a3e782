"""Constrained minimization for ground states of the fourth-order field equation.

The target is the scale-invariant problem

    minimize  K(u) = 0.5 * int |Lap u|^2
    subject to V(u) = int G(u) = 0,  u != 0,

whose minimizers solve ``Lap^2 u = (1/lambda) g(u)`` for a positive
multiplier ``lambda``; the dilation ``u(lambda^{1/4} x)`` then solves the
unscaled equation ``Lap^2 u = g(u)``.

Both K and the active constraint V = 0 are invariant under dilation in four
dimensions, so minimizers come in one-parameter scale families.  A gauge
constraint ``int |u|^2 = gauge_l2`` removes that flat direction without
changing the attainable K.  Each seed goes through three stages:

1. feasibility entry: amplitude-scale the seed until V > 0, then dilate
   onto the gauge manifold;
2. an augmented-Lagrangian outer loop on the two equality constraints.
   The inner descent is a damped Newton iteration on the merit function
   with an Armijo backtracking line search; the collocation curvature
   operator spans roughly twelve decades, which defeats limited-memory
   quasi-Newton updates, so the exact (dense, cheap) Hessian is used.
   Accepted steps never increase the merit value.
3. a Newton sharpening of the pointwise stationarity system on the
   collocation grid with extended-precision residuals, followed by an
   exact one-dimensional amplitude correction restoring V = 0 to
   round-off.

Each multistart seed draws from its own counter-based random stream, so
results are reproducible and independent of execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field, asdict
from typing import Optional, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import lu_factor, lu_solve
from scipy.optimize import minimize as scipy_minimize

from .errors import (
    ConvergenceError,
    DegenerateMinimizerError,
    InfeasibilityError,
    ParameterError,
)
from .potentials import PotentialModel
from .radial import (
    EnergyReport,
    RadialField,
    RadialGrid,
    build_grid,
    dilate,
    energy_K,
    entropy,
    grad_sq,
    hessian_sq,
    l2_sq,
)

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class SolverConfig:
    """Grid, gauge, seeding, and tolerance settings for one solve."""

    n: int = 128
    R_max: float = 16.0
    m: int = 1
    gauge_l2: float = 1.0
    multistart: int = 8
    rng_seed: int = 0
    amp_range: tuple = (1.2, 3.5)
    sigma_range: tuple = (0.5, 2.0)
    outer_max: int = 16
    inner_max: int = 80
    grad_tol: float = 1e-6
    v_tol: float = 1e-9
    gauge_tol: float = 1e-8
    penalty_init: float = 10.0
    penalty_growth: float = 10.0
    penalty_max: float = 1e12
    polish: bool = True
    polish_max_iter: int = 15

    def __post_init__(self):
        if self.multistart < 1:
            raise ParameterError("multistart must be >= 1")
        if self.m < 1:
            raise ParameterError("component count must be >= 1")
        if self.gauge_l2 <= 0.0:
            raise ParameterError("gauge_l2 must be positive")
        for name in ("grad_tol", "v_tol", "gauge_tol", "penalty_init",
                     "penalty_growth", "penalty_max"):
            if getattr(self, name) <= 0.0:
                raise ParameterError(f"{name} must be positive")
        if self.outer_max < 1 or self.inner_max < 1:
            raise ParameterError("iteration budgets must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["amp_range"] = list(self.amp_range)
        d["sigma_range"] = list(self.sigma_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ParameterError(f"unknown solver options: {sorted(extra)}")
        kwargs = dict(d)
        for key in ("amp_range", "sigma_range"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


@dataclass(frozen=True)
class GroundStateResult:
    """Minimizer, multiplier, rescaled ground state, and diagnostics."""

    minimizer: RadialField
    T_estimate: float
    lam: float
    groundstate: RadialField
    pohozaev_residual: float
    pde_residual: float
    action_S: float
    converged: bool
    diagnostics: dict
    stationary_states: tuple = ()

    def to_dict(self) -> dict:
        return {
            "T_estimate": self.T_estimate,
            "lambda": self.lam,
            "pohozaev_residual": self.pohozaev_residual,
            "pde_residual": self.pde_residual,
            "action_S": self.action_S,
            "converged": self.converged,
            "truncation_warning": self.groundstate.truncation_warning,
            "diagnostics": self.diagnostics,
        }


# -- functionals of one field under a potential -------------------------------

def potential_V(u: RadialField, potential: PotentialModel) -> float:
    """``int G(u)`` over R^4."""
    return float(u.grid.quad_weights @ np.asarray(potential.eval_G(u.values)))


def action(u: RadialField, potential: PotentialModel) -> EnergyReport:
    """Fill every energy functional of a field under the given potential."""
    return EnergyReport.from_parts(
        K=energy_K(u),
        V=potential_V(u, potential),
        l2_sq=l2_sq(u),
        grad_sq=grad_sq(u),
        entropy=entropy(u),
        hess_sq=hessian_sq(u),
    )


def pde_residual(u: RadialField, potential: PotentialModel) -> float:
    """Sup over interior nodes of ``|Lap^2 u - g(u)| / (1 + |g(u)|)``.

    The fourth-order operator is the radial Laplacian applied twice,
    evaluated in extended precision so the reported number reflects the
    profile rather than accumulated round-off in the stiff near-origin
    rows.  The sup runs over the interior collocation set: the outermost
    two nodes carry the decay clamp and the slope boundary condition of
    the discretization, where the pointwise equation is not represented.
    """
    grid = u.grid
    lap_ld = grid.lap.astype(np.longdouble)
    w_ld = u.values.astype(np.longdouble)
    bil = np.asarray(lap_ld @ (lap_ld @ w_ld), dtype=float)
    gu = np.asarray(potential.eval_g(u.values), dtype=float)
    resid = bil - gu
    if u.m == 1:
        rnorm = np.abs(resid[:, 0])
        gnorm = np.abs(gu[:, 0])
    else:
        rnorm = np.linalg.norm(resid, axis=1)
        gnorm = np.linalg.norm(gu, axis=1)
    weighted = rnorm / (1.0 + gnorm)
    return float(np.max(weighted[1:-2]))


def extract_lambda(u: RadialField, potential: PotentialModel) -> float:
    """Multiplier from pairing the stationarity equation with u.

    Integrating ``Lap^2 u = (1/lambda) g(u)`` against u and integrating by
    parts twice gives ``lambda = int g(u).u / int |Lap u|^2``.  Degenerate
    pairings (vanishing denominator or nonpositive value) are rejected.
    """
    w = u.grid.quad_weights
    gu = np.asarray(potential.eval_g(u.values))
    num = float(w @ (gu * u.values).sum(axis=1))
    lw = u.grid.lap @ u.values
    den = float(w @ (lw * lw).sum(axis=1))
    if den <= 1e-14 * (1.0 + abs(num)):
        raise DegenerateMinimizerError("vanishing curvature pairing; field is flat")
    lam = num / den
    if lam <= 0.0:
        raise DegenerateMinimizerError(f"nonpositive multiplier {lam:.3e}")
    return lam


def rescale_to_groundstate(u: RadialField, lam: float) -> RadialField:
    """Dilation sending a minimizer to a solution of the unscaled equation.

    A field with ``Lap^2 u = (1/lambda) g(u)`` becomes a genuine solution
    under ``x -> u(lambda^{1/4} x)``, i.e. a dilation by ``lambda^{-1/4}``;
    K is unchanged and V = 0 is preserved.
    """
    if not (lam > 0.0) or not math.isfinite(lam):
        raise ParameterError(f"multiplier must be positive, got {lam!r}")
    return dilate(u, lam ** -0.25)


# -- internal machinery -------------------------------------------------------

class _SeedInfeasible(Exception):
    pass


@dataclass
class _Attempt:
    start: int
    w: Optional[NDArray] = None
    K: float = math.inf
    V: float = math.nan
    gauge_gap: float = math.nan
    grad_norm: float = math.nan
    outer_iters: int = 0
    inner_iters: int = 0
    converged: bool = False
    feasible: bool = True
    polished: bool = False
    message: str = ""
    history: list = dc_field(default_factory=list)

    def scalar_record(self) -> dict:
        return {
            "start": self.start,
            "feasible": self.feasible,
            "converged": self.converged,
            "polished": self.polished,
            "K": None if not math.isfinite(self.K) else self.K,
            "V_abs": None if math.isnan(self.V) else abs(self.V),
            "gauge_gap": None if math.isnan(self.gauge_gap) else self.gauge_gap,
            "grad_norm": None if math.isnan(self.grad_norm) else self.grad_norm,
            "outer_iters": self.outer_iters,
            "inner_iters": self.inner_iters,
            "message": self.message,
        }


class _Discretization:
    """Cached operators for one (grid, potential, gauge) combination."""

    def __init__(self, grid: RadialGrid, potential: PotentialModel, gauge: float, m: int):
        self.grid = grid
        self.potential = potential
        self.gauge = gauge
        self.m = m
        self.w = grid.quad_weights
        self.lap = grid.lap
        # outermost node clamped to zero (truncation surrogate for decay)
        self.free = grid.n - 1
        self.quadratic = grid.lap.T @ (grid.quad_weights[:, None] * grid.lap)
        self.quadratic_free = self.quadratic[: self.free, : self.free]
        self.abs_quadratic = np.abs(self.quadratic)

    def unpack(self, x: NDArray) -> NDArray:
        full = np.zeros((self.grid.n, self.m))
        full[: self.free] = x.reshape(self.free, self.m)
        return full

    def pack(self, full: NDArray) -> NDArray:
        return full[: self.free].reshape(-1).copy()

    def K(self, full: NDArray) -> float:
        lw = self.lap @ full
        return 0.5 * float(self.w @ (lw * lw).sum(axis=1))

    def V(self, full: NDArray) -> float:
        return float(self.w @ np.asarray(self.potential.eval_G(full)))

    def l2(self, full: NDArray) -> float:
        return float(self.w @ (full * full).sum(axis=1))

    def pieces(self, full: NDArray):
        """K, grad K, V, grad V, l2, grad l2 (gradients on the full node set)."""
        lw = self.lap @ full
        K = 0.5 * float(self.w @ (lw * lw).sum(axis=1))
        gK = self.quadratic @ full
        gvals = np.asarray(self.potential.eval_g(full))
        V = float(self.w @ np.asarray(self.potential.eval_G(full)))
        gV = self.w[:, None] * gvals
        l2 = float(self.w @ (full * full).sum(axis=1))
        gl2 = 2.0 * self.w[:, None] * full
        return K, gK, V, gV, l2, gl2

    def gradient_noise_floor(self, full: NDArray) -> float:
        """Round-off level of the merit gradient for profiles of this size."""
        mag = float(np.max(self.abs_quadratic @ np.abs(full)))
        return 50.0 * _EPS * max(mag, 1.0)

    def potential_hessian_blocks(self, full: NDArray) -> Optional[NDArray]:
        """Per-node Hessian of G, shape (free, m, m); None when unavailable."""
        pot = self.potential
        if pot.radial_gprime is None:
            return None
        sub = full[: self.free]
        if self.m == 1:
            gp = np.asarray(pot.radial_gprime(sub[:, 0]))
            return gp[:, None, None]
        t = np.linalg.norm(sub, axis=1)
        gvals = np.asarray(pot.eval_g(sub))
        gamma = np.asarray(pot.radial_gprime(t))
        t_safe = np.maximum(t, 1e-150)
        phi = (gvals * sub).sum(axis=1) / np.maximum(t_safe**2, 1e-300)
        phi = np.where(t > 1e-150, phi, gamma)
        dphi = np.where(t > 1e-150, (gamma - phi) / t_safe, 0.0)
        eye = np.eye(self.m)
        blocks = phi[:, None, None] * eye[None, :, :]
        blocks += dphi[:, None, None] * (
            sub[:, :, None] * sub[:, None, :] / t_safe[:, None, None]
        )
        return blocks


def _gaussian_seeds(grid: RadialGrid, config: SolverConfig) -> list:
    seeds = []
    r2 = grid.nodes**2
    for k in range(config.multistart):
        rng = np.random.default_rng([config.rng_seed, k])
        a = rng.uniform(*config.amp_range)
        sig = rng.uniform(*config.sigma_range)
        direction = np.zeros(config.m)
        if config.m == 1:
            direction[0] = 1.0
        else:
            direction = rng.normal(size=config.m)
            direction /= np.linalg.norm(direction)
        vals = (a * np.exp(-r2 / (2.0 * sig * sig)))[:, None] * direction[None, :]
        seeds.append(RadialField(grid, vals))
    return seeds


def _enter_feasible_set(disc: _Discretization, seed: RadialField) -> NDArray:
    """Amplitude-scale until V > 0, then dilate onto the gauge manifold."""
    if seed.is_zero():
        raise _SeedInfeasible("seed is the zero field")
    full = seed.values.copy()
    scale = 1.0
    for _ in range(60):
        if disc.V(scale * full) > 0.0:
            break
        scale *= 1.5
    else:
        raise _SeedInfeasible("amplitude scaling never reached V > 0")
    full = scale * full
    cur = disc.l2(full)
    if cur <= 0.0:
        raise _SeedInfeasible("seed has no mass on the grid")
    s = (disc.gauge / cur) ** 0.25
    dilated = dilate(RadialField(disc.grid, full), s)
    full = dilated.values.copy()
    if disc.V(full) <= 0.0:
        # dilation only scales V by s^4 in the continuum; re-enter if the
        # resampling noise flipped a marginal sign
        for _ in range(60):
            full *= 1.2
            if disc.V(full) > 0.0:
                break
        else:
            raise _SeedInfeasible("could not hold V > 0 on the gauge manifold")
    full[-1, :] = 0.0
    return full


def _merit(disc, x, mu_v, mu_g, rho):
    full = disc.unpack(x)
    K, gK, V, gV, l2, gl2 = disc.pieces(full)
    cg = l2 - disc.gauge
    val = K - mu_v * V - mu_g * cg + 0.5 * rho * (V * V + cg * cg)
    grad = gK - (mu_v - rho * V) * gV - (mu_g - rho * cg) * gl2
    return val, grad[: disc.free].reshape(-1), K, V, cg, gV, gl2, full


def _newton_inner(disc, x, mu_v, mu_g, rho, gtol, maxit):
    """Damped Newton descent on the merit; returns the new point and stats.

    The curvature matrix is regularized Levenberg-style: when a step fails
    the Armijo test the shift is increased and the step recomputed, which
    degrades gracefully toward (scaled) steepest descent on the stiffest
    profiles.  Exits once the gradient target or the round-off floor of
    the merit is reached.
    """
    nf = disc.free
    m = disc.m
    dim = nf * m
    val, grad, K, V, cg, gV, gl2, full = _merit(disc, x, mu_v, mu_g, rho)
    iters = 0
    progressed = False
    eye = np.eye(dim)
    tau_seed = 0.0  # warm start for the minimal-shift search
    for iters in range(1, maxit + 1):
        if np.max(np.abs(grad)) <= gtol:
            iters -= 1
            break
        blocks = disc.potential_hessian_blocks(full)
        if blocks is None:
            return None  # caller falls back to the quasi-Newton path
        if m == 1:
            H = disc.quadratic_free.copy()
            diag = (
                -(mu_v - rho * V) * disc.w[:nf] * blocks[:, 0, 0]
                - (mu_g - rho * cg) * 2.0 * disc.w[:nf]
            )
            H[np.diag_indices(nf)] += diag
        else:
            H = np.kron(disc.quadratic_free, np.eye(m))
            wb = -(mu_v - rho * V) * disc.w[:nf, None, None] * blocks
            wb -= (mu_g - rho * cg) * 2.0 * disc.w[:nf, None, None] * np.eye(m)[None]
            idx = np.arange(nf)
            for a in range(m):
                for b in range(m):
                    H[idx * m + a, idx * m + b] += wb[:, a, b]
        gVf = gV[:nf].reshape(-1)
        gl2f = gl2[:nf].reshape(-1)
        H += rho * (np.outer(gVf, gVf) + np.outer(gl2f, gl2f))

        scale = max(abs(float(np.trace(H))) / dim, 1.0)
        accepted = None
        tau = 0.0 if tau_seed == 0.0 else max(1e-12 * scale, 0.3 * tau_seed)
        for _ in range(12):
            chol = None
            for _ in range(200):
                try:
                    chol = np.linalg.cholesky(H if tau == 0.0 else H + tau * eye)
                    break
                except np.linalg.LinAlgError:
                    tau = max(1e-12 * scale, 8.0 * tau)
            if chol is None:
                break
            p = np.linalg.solve(chol.T, np.linalg.solve(chol, -grad))
            slope = float(grad @ p)
            if slope < 0.0:
                alpha = 1.0
                for _ in range(30):
                    trial = _merit(disc, x + alpha * p, mu_v, mu_g, rho)
                    if trial[0] <= val + 1e-4 * alpha * slope:
                        accepted = (trial, alpha)
                        break
                    alpha *= 0.5
            if accepted is not None:
                break
            tau = max(1e-10 * scale, 10.0 * tau)  # retry, stronger damping
        if accepted is None:
            break  # round-off floor: no decrease in any damped direction
        trial, alpha = accepted
        x = x + alpha * p
        val, grad, K, V, cg, gV, gl2, full = trial
        progressed = True
        tau_seed = tau
    pg = float(np.max(np.abs(grad)))
    return x, K, V, cg, pg, iters, progressed


def _lbfgs_inner(disc, x, mu_v, mu_g, rho, gtol, maxit):
    """Fallback inner descent for potentials without curvature evaluators."""
    def fun(xv):
        val, grad, *_ = _merit(disc, xv, mu_v, mu_g, rho)
        return val, grad

    res = scipy_minimize(
        fun, x, jac=True, method="L-BFGS-B",
        options={"maxiter": 40 * maxit, "maxfun": 120 * maxit,
                 "ftol": 1e-18, "gtol": gtol, "maxcor": 40},
    )
    _, grad, K, V, cg, _, _, _ = _merit(disc, res.x, mu_v, mu_g, rho)
    return res.x, K, V, cg, float(np.max(np.abs(grad))), int(res.nit), res.nit > 0


def _augmented_lagrangian(disc, full0, config, attempt):
    """Outer loop on the V and gauge constraints; returns the final iterate.

    The V-multiplier is warm-started by projecting the objective gradient
    onto the constraint gradient; the gauge multiplier starts at zero (it
    vanishes at any solution because the dilation direction is flat for
    both the objective and the V-constraint but not for the gauge).  The
    zero field is a stationary point of every merit in this family, so a
    collapse of the iterate is detected and restarted under a stiffer
    penalty.
    """
    x0 = disc.pack(full0)
    x = x0.copy()
    K0, gK, V0, gV, l20, gl2 = disc.pieces(full0)
    gKf = gK[: disc.free].reshape(-1)
    gVf = gV[: disc.free].reshape(-1)
    denom = float(gVf @ gVf)
    mu_v0 = max(0.0, float(gKf @ gVf) / denom) if denom > 0.0 else 0.0
    mu_v = mu_v0
    mu_g = 0.0
    rho = max(config.penalty_init, K0)

    prev_violation = max(
        abs(V0) / (1.0 + K0), abs(l20 - disc.gauge) / (1.0 + disc.gauge)
    )
    prev_K = None
    pg = math.inf
    resets = 0
    for outer in range(config.outer_max):
        noise = disc.gradient_noise_floor(disc.unpack(x))
        gtol_final = max(config.grad_tol, noise)
        gtol = max(gtol_final, 1e-4 * 10.0 ** (-outer))
        stepped = _newton_inner(disc, x, mu_v, mu_g, rho, gtol, config.inner_max)
        if stepped is None:
            stepped = _lbfgs_inner(disc, x, mu_v, mu_g, rho, gtol, config.inner_max)
        x, K, V, cg, pg, its, progressed = stepped
        attempt.inner_iters += its
        attempt.history.append((outer, K, abs(V), pg))
        attempt.outer_iters = outer + 1

        if cg <= -0.95 * disc.gauge and resets < 3:
            # fell into the trivial field; restart stiffer from the seed
            resets += 1
            x = x0.copy()
            mu_v = mu_v0
            mu_g = 0.0
            rho = min(rho * 100.0, config.penalty_max)
            prev_K = None
            continue

        v_ok = abs(V) <= config.v_tol * (1.0 + K)
        g_ok = abs(cg) <= config.gauge_tol * (1.0 + disc.gauge)
        noise = disc.gradient_noise_floor(disc.unpack(x))
        stationary = (
            prev_K is not None and abs(K - prev_K) <= 1e-11 * (1.0 + abs(K))
        )
        at_floor = stationary and not progressed
        if v_ok and g_ok and (pg <= 3.0 * max(config.grad_tol, noise) or at_floor):
            attempt.converged = True
            break
        prev_K = K
        violation = max(abs(V) / (1.0 + K), abs(cg) / (1.0 + disc.gauge))
        if violation <= 0.25 * prev_violation:
            mu_v -= rho * V
            mu_g -= rho * cg
            prev_violation = violation
        else:
            if rho >= config.penalty_max:
                mu_v -= rho * V
                mu_g -= rho * cg
            rho = min(rho * config.penalty_growth, config.penalty_max)

    full = disc.unpack(x)
    attempt.K = disc.K(full)
    attempt.V = disc.V(full)
    attempt.gauge_gap = disc.l2(full) - disc.gauge
    attempt.grad_norm = pg
    return full


def _restore_constraint(disc, full):
    """One-dimensional amplitude correction driving V to zero exactly.

    Newton on ``a -> V(a u)`` from a = 1, with a bisection fallback; the
    correction is O(|V|) so K moves only at second order.
    """
    def h(a):
        return disc.V(a * full)

    a = 1.0
    val = h(a)
    scale = 1.0 + abs(val)
    for _ in range(60):
        if abs(val) <= 1e-15 * scale:
            return a * full
        gu = np.asarray(disc.potential.eval_g(a * full))
        slope = float(disc.w @ (gu * full).sum(axis=1))
        if slope == 0.0:
            break
        a_new = a - val / slope
        if a_new <= 0.0:
            break
        val_new = h(a_new)
        if abs(val_new) >= abs(val):
            break
        a, val = a_new, val_new
    lo, hi = 0.8 * a, 1.25 * a
    vlo, vhi = h(lo), h(hi)
    if vlo == 0.0:
        return lo * full
    if vhi == 0.0:
        return hi * full
    if vlo * vhi < 0.0:
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            vm = h(mid)
            if abs(vm) <= 1e-15 * scale or hi - lo <= 1e-16 * hi:
                return mid * full
            if vlo * vm < 0.0:
                hi, vhi = mid, vm
            else:
                lo, vlo = mid, vm
    return a * full


def _newton_polish(disc, full, config, eta=None):
    """Sharpen the pointwise stationarity system on the collocation grid.

    Solves ``Lap^2 w = eta g(w)`` collocated at nodes 0..n-3, with the
    outermost node clamped to zero and the slope condition ``w'(R) = 0``
    as the second boundary row.  With ``eta=None`` (gauge mode) the scalar
    eta = 1/lambda is an unknown and the gauge row closes the system; with
    a fixed ``eta`` only the profile is refined (``eta=1`` refines a
    rescaled state on the unscaled equation).  Residuals are evaluated in
    extended precision so the iteration can settle below the
    double-precision composition noise of the stiff near-origin rows.
    Single-component profiles only.  Returns (values, eta, success).
    """
    pot = disc.potential
    if disc.m != 1 or pot.radial_gprime is None:
        return full, eta, False
    grid = disc.grid
    nf = disc.free          # free nodal values w_0 .. w_{n-2}
    ncol = grid.n - 2       # collocation rows at nodes 0 .. n-3
    bil = grid.lap @ grid.lap
    lap_ld = grid.lap.astype(np.longdouble)
    slope_row = grid.D1[-1, :nf]
    eta_free = eta is None

    wvec = full[:, 0].copy()
    wvec[-1] = 0.0
    if eta_free:
        gvals = np.asarray(pot.eval_g(wvec[:, None]))
        num = float(disc.w @ (gvals[:, 0] * wvec))
        lw = grid.lap @ wvec
        den = float(disc.w @ (lw * lw))
        if den <= 0.0 or num <= 0.0:
            return full, None, False
        eta = den / num  # 1/lambda from the stationarity pairing

    def residual(wv, et):
        g1 = np.asarray(pot.eval_g(wv[:, None]))[:, 0]
        lap2 = np.asarray(lap_ld @ (lap_ld @ wv.astype(np.longdouble)), dtype=float)
        rows = [lap2[:ncol] - et * g1[:ncol], [float(slope_row @ wv[:nf])]]
        if eta_free:
            rows.append([float(disc.w @ (wv * wv)) - disc.gauge])
        return np.concatenate(rows), g1

    def jacobian(wv, g1):
        gp = np.asarray(pot.radial_gprime(wv))
        dim = nf + 1 if eta_free else nf
        J = np.zeros((dim, dim))
        J[:ncol, :nf] = bil[:ncol, :nf]
        J[np.arange(ncol), np.arange(ncol)] -= eta * gp[:ncol]
        J[ncol, :nf] = slope_row
        if eta_free:
            J[:ncol, nf] = -g1[:ncol]
            J[ncol + 1, :nf] = 2.0 * disc.w[:nf] * wv[:nf]
        return J

    def converged(rows, g1):
        weighted = float(np.max(np.abs(rows[:ncol]) / (1.0 + np.abs(g1[:ncol]))))
        ok = weighted <= 1e-9 and abs(rows[ncol]) <= 1e-10
        if eta_free and abs(rows[-1]) > 1e-11 * (1.0 + disc.gauge):
            ok = False
        return weighted, ok

    res, g1 = residual(wvec, eta)
    weighted_start, _ = converged(res, g1)
    best = (wvec.copy(), eta, math.inf)
    for _ in range(config.polish_max_iter):
        _, done = converged(res, g1)
        if done:
            break
        J = jacobian(wvec, g1)
        scale = np.maximum(np.max(np.abs(J), axis=1), 1e-300)
        Js = J / scale[:, None]
        rhs = -res / scale
        try:
            lu, piv = lu_factor(Js)
        except (np.linalg.LinAlgError, ValueError):
            break
        step = lu_solve((lu, piv), rhs)
        # one extended-precision refinement pass recovers the digits the
        # ill-conditioned factorization loses
        lin_res = np.asarray(
            Js.astype(np.longdouble) @ step.astype(np.longdouble)
            - rhs.astype(np.longdouble), dtype=float,
        )
        step -= lu_solve((lu, piv), lin_res)
        # progress is measured in the row-equilibrated norm so the boundary
        # and gauge rows are not drowned out by the stiff collocation rows
        ref = float(np.linalg.norm(res / scale))
        improved = False
        for alpha in (1.0, 0.5, 0.25, 0.1, 0.03):
            w_try = wvec.copy()
            w_try[:nf] += alpha * step[:nf]
            eta_try = eta + alpha * step[nf] if eta_free else eta
            if eta_try <= 0.0:
                continue
            res_try, g1_try = residual(w_try, eta_try)
            if float(np.linalg.norm(res_try / scale)) < ref:
                wvec, eta, res, g1 = w_try, eta_try, res_try, g1_try
                improved = True
                break
        if not improved:
            break
        score = float(np.linalg.norm(res / scale))
        if score < best[2]:
            best = (wvec.copy(), eta, score)

    if best[2] < math.inf:
        wvec, eta = best[0], best[1]
    res, g1 = residual(wvec, eta)
    weighted, _ = converged(res, g1)
    slope_ok = abs(res[ncol]) <= 1e-7 * (1.0 + float(np.max(np.abs(wvec))))
    gauge_ok = (not eta_free) or abs(res[-1]) <= 1e-9 * (1.0 + disc.gauge)
    # nodal float64 quantization sets the attainable floor on fine grids;
    # accept any large improvement, not just the absolute target
    resid_ok = weighted <= 1e-4 or weighted <= 1e-2 * weighted_start
    if not resid_ok or not slope_ok or not gauge_ok:
        return full, eta, False
    out = np.zeros_like(full)
    out[:, 0] = wvec
    out[-1, :] = 0.0
    return out, eta, True


def _solve_single(disc, seed, config, start):
    attempt = _Attempt(start=start)
    full0 = _enter_feasible_set(disc, seed)
    full = _augmented_lagrangian(disc, full0, config, attempt)
    if config.polish and attempt.converged:
        polished, _, ok = _newton_polish(disc, full, config)
        if ok:
            full = polished
            attempt.polished = True
    full = _restore_constraint(disc, full)
    attempt.w = full
    attempt.K = disc.K(full)
    attempt.V = disc.V(full)
    attempt.gauge_gap = disc.l2(full) - disc.gauge
    if not attempt.converged:
        attempt.message = "outer budget exhausted before tolerances were met"
    return attempt


def _finalize(disc, winner_field, potential, config):
    """Rescale the minimizer and refine the result on the unscaled equation.

    The gauge-normalized minimizer is narrow, so the plain dilation carries
    its resampling error; refining the (well-resolved) rescaled profile
    directly on ``Lap^2 v = g(v)`` removes it.  The refined state is then
    projected back onto the constraint manifold V = 0 by an exact amplitude
    correction, which every continuum solution satisfies identically; the
    correction is O(|V|) and perturbs the equation residual only at the
    1e-5 scale.  Returns the ground state, the multiplier, and whether the
    refinement succeeded.
    """
    lam = extract_lambda(winner_field, potential)
    groundstate = rescale_to_groundstate(winner_field, lam)
    refined = False
    if config.polish:
        vals, _, ok = _newton_polish(disc, groundstate.values, config, eta=1.0)
        if ok:
            vals = _restore_constraint(disc, vals)
            groundstate = RadialField(
                disc.grid, vals, truncation_warning=groundstate.truncation_warning
            )
            refined = True
    return groundstate, lam, refined


def minimize(
    potential: PotentialModel,
    config: SolverConfig,
    initial_fields: Optional[Sequence[RadialField]] = None,
) -> GroundStateResult:
    """Solve the constrained minimization and rescale to a ground state.

    Runs every start (random Gaussian bumps, or the supplied fields),
    keeps the converged stationary point of lowest K, breaking ties within
    1e-6 by the smaller equation residual.  Raises
    :class:`InfeasibilityError` when no seed can reach V > 0 and
    :class:`ConvergenceError` (carrying the best attempt) when no start
    meets the tolerances.
    """
    grid = build_grid(config.n, config.R_max)
    if potential.m != config.m:
        raise ParameterError(
            f"potential has m={potential.m} but the solver is configured for m={config.m}"
        )
    disc = _Discretization(grid, potential, config.gauge_l2, config.m)

    if initial_fields is not None:
        seeds = list(initial_fields)
        if not seeds:
            raise ParameterError("initial_fields must contain at least one field")
        for f in seeds:
            if not f.grid.compatible_with(grid):
                raise ParameterError("initial field grid does not match the solver grid")
            if f.m != config.m:
                raise ParameterError("initial field component count mismatch")
    else:
        seeds = _gaussian_seeds(grid, config)

    attempts = []
    infeasible_msgs = []
    for k, seed in enumerate(seeds):
        try:
            attempts.append(_solve_single(disc, seed, config, k))
        except _SeedInfeasible as exc:
            rec = _Attempt(start=k, feasible=False, message=str(exc))
            attempts.append(rec)
            infeasible_msgs.append(f"start {k}: {exc}")

    usable = [a for a in attempts if a.feasible and a.w is not None]
    if not usable:
        raise InfeasibilityError(
            "no seed entered the feasible set V > 0: " + "; ".join(infeasible_msgs)
        )

    converged = [a for a in usable if a.converged]
    pool = converged if converged else usable
    K_min = min(a.K for a in pool)
    near = [a for a in pool if a.K <= K_min + 1e-6 * (1.0 + K_min)]
    if len(near) > 1:
        def _residual_of(a):
            f = RadialField(grid, a.w)
            return pde_residual(
                rescale_to_groundstate(f, extract_lambda(f, potential)), potential
            )
        winner = min(near, key=_residual_of)
    else:
        winner = near[0]

    minimizer = RadialField(grid, winner.w)
    groundstate, lam, refined = _finalize(disc, minimizer, potential, config)
    S = energy_K(groundstate)
    result = GroundStateResult(
        minimizer=minimizer,
        T_estimate=S if refined else winner.K,
        lam=lam,
        groundstate=groundstate,
        pohozaev_residual=abs(potential_V(groundstate, potential)),
        pde_residual=pde_residual(groundstate, potential),
        action_S=S,
        converged=bool(converged),
        diagnostics={
            "starts": [a.scalar_record() for a in attempts],
            "winner": winner.start,
            "n_converged": len(converged),
            "groundstate_refined": refined,
            "history": [list(row) for row in winner.history],
        },
        stationary_states=tuple(RadialField(grid, a.w) for a in converged),
    )
    if not converged:
        raise ConvergenceError(
            "no start met the constraint and gradient tolerances",
            best_result=result,
        )
    return result
