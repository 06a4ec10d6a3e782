"""Spectral calculus for radial functions on R^4.

A radial profile ``w(r)`` stands in for a vector field ``u(x) = w(|x|)``
on R^4, sampled at Chebyshev-Gauss-Lobatto collocation nodes mapped onto
``[0, R_max]``.  The grid carries dense differentiation matrices and
Clenshaw-Curtis quadrature weights folded with the ``2*pi^2*r^3`` surface
measure, so a plain weighted sum realizes an integral over all of R^4.

All grid and field objects are immutable after construction (arrays are
marked read-only) and every operation here is a pure function, so values
can be shared freely across worker processes or threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import toeplitz

from .errors import ParameterError

SPHERE_MEASURE = 2.0 * np.pi**2  # surface area of the unit 3-sphere in R^4
ENTROPY_FLOOR = 1e-150           # |u| below this contributes 0 to |u|^2 ln|u|


def _chebyshev_operators(npts: int):
    """Gauss-Lobatto nodes on [-1, 1] (descending order) with D1 and D2.

    Uses the trigonometric-identity and flipping constructions of Weideman
    and Reddy together with the negative-sum trick, which keeps the action
    of D1 on constant sequences at exact zero.
    """
    n = npts - 1
    k = np.arange(npts)
    x = np.sin(np.pi * (n - 2.0 * k) / (2.0 * n))  # cos(k*pi/n), evaluated stably
    th = k * np.pi / n
    half = np.tile(th / 2.0, (npts, 1)).T
    dx = 2.0 * np.sin(half.T + half) * np.sin(half.T - half)  # x_k - x_j
    m1 = npts // 2
    m2 = (npts + 1) // 2
    dx[m1:, :] = -np.flipud(np.fliplr(dx[:m2, :]))
    np.fill_diagonal(dx, 1.0)
    inv = 1.0 / dx
    np.fill_diagonal(inv, 0.0)
    c = toeplitz((-1.0) ** k).astype(float)
    c[0, :] *= 2.0
    c[-1, :] *= 2.0
    c[:, 0] *= 0.5
    c[:, -1] *= 0.5
    mats = []
    d = np.eye(npts)
    for order in (1, 2):
        d = order * inv * (c * np.tile(np.diag(d), (npts, 1)).T - d)
        np.fill_diagonal(d, -d.sum(axis=1))
        mats.append(d.copy())
    return x, mats[0], mats[1]


def _clenshaw_curtis_weights(npts: int) -> NDArray[np.float64]:
    """Quadrature weights over [-1, 1] for the Gauss-Lobatto node set."""
    n = npts - 1
    theta = np.pi * np.arange(npts) / n
    w = np.zeros(npts)
    v = np.ones(npts - 2)
    if n % 2 == 0:
        w[0] = w[-1] = 1.0 / (n * n - 1.0)
        for kk in range(1, n // 2):
            v -= 2.0 * np.cos(2.0 * kk * theta[1:-1]) / (4.0 * kk * kk - 1.0)
        v -= np.cos(n * theta[1:-1]) / (n * n - 1.0)
    else:
        w[0] = w[-1] = 1.0 / (n * n)
        for kk in range(1, (n - 1) // 2 + 1):
            v -= 2.0 * np.cos(2.0 * kk * theta[1:-1]) / (4.0 * kk * kk - 1.0)
    w[1:-1] = 2.0 * v / n
    return w


@dataclass(frozen=True)
class RadialGrid:
    """Collocation grid on [0, R_max] for radial fields on R^4.

    Attributes:
        n: number of nodes.
        R_max: truncation radius.
        nodes: strictly increasing nodes, ``nodes[0] == 0`` and
            ``nodes[-1] == R_max``.
        D1, D2: dense first and second derivative matrices in ``r``.
        quad_weights: nonnegative weights such that
            ``quad_weights @ f(nodes)`` approximates the R^4 integral
            ``2*pi^2 * int f(r) r^3 dr``; the weight at ``r = 0`` vanishes.
        lap: radial Laplacian ``w'' + 3 w'/r`` as a dense matrix, with the
            removable-singularity row ``4 * D2[0]`` at the origin.
        bary_weights: barycentric weights of the node set, used for
            polynomial resampling.
    """

    n: int
    R_max: float
    nodes: NDArray[np.float64]
    D1: NDArray[np.float64]
    D2: NDArray[np.float64]
    quad_weights: NDArray[np.float64]
    lap: NDArray[np.float64]
    bary_weights: NDArray[np.float64]

    def compatible_with(self, other: "RadialGrid") -> bool:
        return self.n == other.n and self.R_max == other.R_max


def build_grid(n: int, R_max: float) -> RadialGrid:
    """Build the collocation grid, derivative operators, and quadrature.

    Nodes are the images of Chebyshev-Gauss-Lobatto points under the affine
    map of [-1, 1] onto [0, R_max].  Requires ``n >= 16`` and ``R_max > 0``.
    """
    if not isinstance(n, (int, np.integer)) or n < 16:
        raise ParameterError(f"node count must be an integer >= 16, got {n!r}")
    R = float(R_max)
    if not np.isfinite(R) or R <= 0.0:
        raise ParameterError(f"truncation radius must be positive, got {R_max!r}")

    x, d1x, d2x = _chebyshev_operators(n)
    r = 0.5 * R * (1.0 - x)          # ascending: r[0] = 0, r[-1] = R
    r[0] = 0.0
    r[-1] = R
    D1 = (-2.0 / R) * d1x
    D2 = (4.0 / (R * R)) * d2x

    cc = _clenshaw_curtis_weights(n)
    quad = SPHERE_MEASURE * r**3 * (0.5 * R) * cc

    lap = D2.copy()
    lap[1:, :] += (3.0 / r[1:])[:, None] * D1[1:, :]
    lap[0, :] = 4.0 * D2[0, :]

    bary = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    bary[0] *= 0.5
    bary[-1] *= 0.5

    for arr in (r, D1, D2, quad, lap, bary):
        arr.setflags(write=False)
    return RadialGrid(
        n=n, R_max=R, nodes=r, D1=D1, D2=D2,
        quad_weights=quad, lap=lap, bary_weights=bary,
    )


class RadialField:
    """An m-component radial profile sampled on a :class:`RadialGrid`.

    The value at the outermost node is zeroed on construction (truncation
    surrogate for decay at infinity); pass ``project_boundary=False`` only
    for diagnostic profiles such as constants.  Regularity at the origin,
    ``w'(0) = 0``, holds by construction for samples of smooth radial
    functions and is the limit built into the grid's Laplacian row there.
    Values are stored as an ``(n, m)`` read-only array.
    """

    __slots__ = ("grid", "values", "truncation_warning")

    def __init__(
        self,
        grid: RadialGrid,
        values: NDArray,
        *,
        project_boundary: bool = True,
        truncation_warning: bool = False,
    ):
        arr = np.array(values, dtype=float, copy=True)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] != grid.n:
            raise ParameterError(
                f"field values must have shape ({grid.n},) or ({grid.n}, m), "
                f"got {np.shape(values)!r}"
            )
        if not np.all(np.isfinite(arr)):
            raise ParameterError("field values must be finite")
        if project_boundary:
            arr[-1, :] = 0.0
        arr.setflags(write=False)
        self.grid = grid
        self.values = arr
        self.truncation_warning = bool(truncation_warning)

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def amplitude(self) -> NDArray[np.float64]:
        """Pointwise norm |w(r_i)| over components."""
        if self.m == 1:
            return np.abs(self.values[:, 0])
        return np.linalg.norm(self.values, axis=1)

    def is_zero(self) -> bool:
        return bool(np.all(self.values == 0.0))

    def scaled(self, factor: float) -> "RadialField":
        return RadialField(
            self.grid, factor * self.values,
            truncation_warning=self.truncation_warning,
        )


def sample_profile(grid: RadialGrid, profile: Callable[[NDArray], NDArray]) -> RadialField:
    """Sample a scalar radial profile ``w(r)`` onto the grid."""
    return RadialField(grid, np.asarray(profile(grid.nodes), dtype=float))


def zero_field(grid: RadialGrid, m: int = 1) -> RadialField:
    return RadialField(grid, np.zeros((grid.n, m)))


def integrate(grid: RadialGrid, f: Union[NDArray, Callable[[NDArray], NDArray]]) -> float:
    """R^4 integral of a scalar radial integrand given as samples or callable."""
    vals = f(grid.nodes) if callable(f) else np.asarray(f, dtype=float)
    if vals.shape != (grid.n,):
        raise ParameterError(f"integrand must have shape ({grid.n},), got {vals.shape!r}")
    return float(grid.quad_weights @ vals)


def laplacian(f: RadialField) -> RadialField:
    """Radial Laplacian ``w'' + 3 w'/r``, with limit value ``4 w''(0)`` at the origin."""
    return RadialField(f.grid, f.grid.lap @ f.values, project_boundary=False)


def bilaplacian_values(f: RadialField) -> NDArray[np.float64]:
    """Nodal values of the fourth-order operator (Laplacian applied twice)."""
    return f.grid.lap @ (f.grid.lap @ f.values)


def energy_K(f: RadialField) -> float:
    """Kinetic energy ``0.5 * int |Lap u|^2`` over R^4; nonnegative."""
    lw = f.grid.lap @ f.values
    return 0.5 * float(f.grid.quad_weights @ (lw * lw).sum(axis=1))


def hessian_sq(f: RadialField) -> float:
    """``int |D^2 u|^2`` via the radial identity ``(w'')^2 + 3 (w'/r)^2``.

    At the origin the removable limit ``4 (w''(0))^2`` is used.
    """
    d1 = f.grid.D1 @ f.values
    d2 = f.grid.D2 @ f.values
    ratio = np.empty_like(d1)
    ratio[1:] = d1[1:] / f.grid.nodes[1:, None]
    ratio[0] = d2[0]  # w'/r -> w''(0), giving 4 (w'')^2 in total at r = 0
    integrand = (d2 * d2 + 3.0 * ratio * ratio).sum(axis=1)
    return float(f.grid.quad_weights @ integrand)


def grad_sq(f: RadialField) -> float:
    """``int |grad u|^2 = int |w'|^2`` over R^4."""
    d1 = f.grid.D1 @ f.values
    return float(f.grid.quad_weights @ (d1 * d1).sum(axis=1))


def l2_sq(f: RadialField) -> float:
    """``int |u|^2`` over R^4."""
    return float(f.grid.quad_weights @ (f.values * f.values).sum(axis=1))


def entropy(f: RadialField) -> float:
    """``int |u|^2 ln|u|``, with the integrand extended by 0 at ``u = 0``."""
    amp = f.amplitude()
    logs = np.zeros_like(amp)
    mask = amp > ENTROPY_FLOOR
    logs[mask] = np.log(amp[mask])
    return float(f.grid.quad_weights @ (amp * amp * logs))


def barycentric_resample(
    grid: RadialGrid, values: NDArray[np.float64], query: NDArray[np.float64]
) -> NDArray[np.float64]:
    """Evaluate the polynomial interpolant of nodal data at query radii."""
    diff = query[:, None] - grid.nodes[None, :]
    hit_q, hit_n = np.nonzero(diff == 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = grid.bary_weights[None, :] / diff
    num = coef @ values
    den = coef.sum(axis=1)
    with np.errstate(invalid="ignore"):
        out = num / den[:, None]
    out[hit_q] = values[hit_n]
    return out


def dilate(f: RadialField, s: float) -> RadialField:
    """Spatial dilation ``x -> u(x/s)``, i.e. ``w_s(r) = w(r/s)`` resampled.

    Values drawn from beyond the source support are zero.  If the dilated
    profile no longer decays before ``R_max`` the result carries a
    truncation warning.
    """
    s = float(s)
    if not np.isfinite(s) or s <= 0.0:
        raise ParameterError(f"dilation rate must be positive, got {s!r}")
    grid = f.grid
    if s == 1.0:
        return RadialField(grid, f.values, truncation_warning=f.truncation_warning)
    query = grid.nodes / s
    inside = query <= grid.R_max
    out = np.zeros_like(f.values)
    out[inside] = barycentric_resample(grid, f.values, query[inside])

    warn = f.truncation_warning
    peak = np.max(np.abs(f.values)) if f.values.size else 0.0
    if peak > 0.0 and s > 1.0:
        edge = barycentric_resample(grid, f.values, np.array([grid.R_max / s]))
        if np.max(np.abs(edge)) > 1e-9 * peak:
            warn = True
    return RadialField(grid, out, truncation_warning=warn)


@dataclass(frozen=True)
class EnergyReport:
    """All integral functionals of one field.

    ``S`` is defined as ``K - V`` at construction, never recomputed
    independently.
    """

    K: float
    V: float
    S: float
    l2_sq: float
    grad_sq: float
    entropy: float
    hess_sq: float

    @classmethod
    def from_parts(
        cls, *, K: float, V: float, l2_sq: float,
        grad_sq: float, entropy: float, hess_sq: float,
    ) -> "EnergyReport":
        return cls(K=K, V=V, S=K - V, l2_sq=l2_sq,
                   grad_sq=grad_sq, entropy=entropy, hess_sq=hess_sq)

    def to_dict(self) -> dict:
        return {
            "K": self.K, "V": self.V, "S": self.S, "l2_sq": self.l2_sq,
            "grad_sq": self.grad_sq, "entropy": self.entropy,
            "hess_sq": self.hess_sq,
        }


# -- serialization ----------------------------------------------------------

def save_field_csv(f: RadialField, path) -> None:
    """Write a field as CSV with columns ``r, w_1, ..., w_m``."""
    header = "r," + ",".join(f"w_{c + 1}" for c in range(f.m))
    data = np.column_stack([f.grid.nodes, f.values])
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")


def load_field_csv(path, grid: RadialGrid = None) -> RadialField:
    """Read a field written by :func:`save_field_csv`.

    When ``grid`` is omitted it is rebuilt from the radii column and checked
    against the stored nodes.
    """
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    r = data[:, 0]
    vals = data[:, 1:]
    if vals.shape[1] == 0:
        raise ParameterError(f"no component columns found in {path}")
    if grid is None:
        grid = build_grid(len(r), float(r[-1]))
    if len(r) != grid.n or not np.allclose(r, grid.nodes, atol=1e-9 * (1.0 + grid.R_max)):
        raise ParameterError(f"radii in {path} do not match the collocation grid")
    return RadialField(grid, vals, project_boundary=False)


def field_to_json(f: RadialField) -> dict:
    """JSON envelope carrying grid metadata alongside the samples."""
    return {
        "schema_version": 1,
        "grid": {"n": f.grid.n, "R_max": f.grid.R_max},
        "m": f.m,
        "truncation_warning": f.truncation_warning,
        "values": f.values.tolist(),
    }


def field_from_json(payload: Union[dict, str], grid: RadialGrid = None) -> RadialField:
    if isinstance(payload, str):
        payload = json.loads(payload)
    meta = payload["grid"]
    if grid is None:
        grid = build_grid(int(meta["n"]), float(meta["R_max"]))
    elif grid.n != int(meta["n"]) or grid.R_max != float(meta["R_max"]):
        raise ParameterError("grid metadata does not match the supplied grid")
    return RadialField(
        grid,
        np.asarray(payload["values"], dtype=float),
        project_boundary=False,
        truncation_warning=bool(payload.get("truncation_warning", False)),
    )
