"""Potentials G, their gradients g, and admissibility checking.

A potential is admissible when G(0) = 0 and g(0) = 0, G is strictly
negative on a punctured ball 0 < |u| <= epsilon, and G is positive
somewhere (witnessed by u0).  Built-ins are isotropic (G depends on |u|
only) and work for any component count m; anisotropic evaluators can be
supplied through a custom :class:`PotentialModel` but are untested
territory and only pass through :func:`validate` if they meet the same
assumptions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from numpy.typing import NDArray

from .errors import AdmissibilityError, ConfigError, ParameterError

_LOG_FLOOR = 1e-150


def _norm_last(u: NDArray) -> NDArray:
    u = np.asarray(u, dtype=float)
    if u.shape[-1] == 1:
        return np.abs(u[..., 0])
    return np.linalg.norm(u, axis=-1)


@dataclass(frozen=True)
class PotentialModel:
    """Evaluators for G and g plus admissibility witnesses.

    ``eval_G`` maps arrays of shape (..., m) to (...); ``eval_g`` maps
    (..., m) to (..., m).  ``epsilon`` is a radius on which G < 0 away from
    zero, and ``u0`` a point with G(u0) > 0.  ``radial_gprime``, when
    present, is the scalar derivative ``g'(t)`` of the isotropic profile,
    used by the Newton stage of the solver.
    """

    name: str
    m: int
    eval_G: Callable[[NDArray], NDArray]
    eval_g: Callable[[NDArray], NDArray]
    epsilon: float
    u0: NDArray[np.float64]
    params: dict = field(default_factory=dict)
    radial_gprime: Optional[Callable[[NDArray], NDArray]] = None

    @property
    def kind(self) -> str:
        return self.params.get("kind", "custom")


def make_logarithmic(m: int = 1) -> PotentialModel:
    """The logarithmic potential ``G(u) = |u|^2 ln|u|`` with ``G(0) = 0``.

    Its gradient is ``g(u) = u (2 ln|u| + 1)`` away from zero and vanishes
    at zero.  G is negative for 0 < |u| < 1, so any epsilon below 1 works;
    the witness radius used is just under the stationary radius
    ``exp(-1/2)`` of the profile ``t^2 ln t``.
    """
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise ParameterError(f"component count must be an integer >= 1, got {m!r}")

    def eval_G(u):
        amp = _norm_last(u)
        out = np.zeros_like(amp)
        mask = amp > _LOG_FLOOR
        out[mask] = amp[mask] ** 2 * np.log(amp[mask])
        return out if out.ndim else float(out)

    def eval_g(u):
        u = np.asarray(u, dtype=float)
        amp = _norm_last(u)
        factor = np.zeros_like(amp)
        mask = amp > _LOG_FLOOR
        factor[mask] = 2.0 * np.log(amp[mask]) + 1.0
        return u * factor[..., None]

    def gprime(t):
        t = np.abs(np.asarray(t, dtype=float))
        out = np.full_like(t, 3.0 + 2.0 * math.log(_LOG_FLOOR))
        mask = t > _LOG_FLOOR
        out[mask] = 2.0 * np.log(t[mask]) + 3.0
        return out

    u0 = np.zeros(m)
    u0[0] = 2.0
    return PotentialModel(
        name="logarithmic",
        m=int(m),
        eval_G=eval_G,
        eval_g=eval_g,
        epsilon=0.99 * math.exp(-0.5),
        u0=u0,
        params={"kind": "logarithmic", "m": int(m)},
        radial_gprime=gprime,
    )


def make_defocusing_well(m: int = 1, p: float = 4.0) -> PotentialModel:
    """``G(u) = -|u|^2/2 + |u|^p/p`` for an exponent p > 2.

    A standard admissible double-regime potential: negative near the
    origin, positive past ``|u| = (p/2)^{1/(p-2)}``.
    """
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise ParameterError(f"component count must be an integer >= 1, got {m!r}")
    p = float(p)
    if not math.isfinite(p) or p <= 2.0:
        raise ParameterError(f"exponent must satisfy p > 2, got {p!r}")

    def eval_G(u):
        amp = _norm_last(u)
        out = -0.5 * amp**2 + amp**p / p
        return out if out.ndim else float(out)

    def eval_g(u):
        u = np.asarray(u, dtype=float)
        amp = _norm_last(u)
        return u * (amp ** (p - 2.0) - 1.0)[..., None]

    def gprime(t):
        t = np.abs(np.asarray(t, dtype=float))
        return (p - 1.0) * t ** (p - 2.0) - 1.0

    zero_cross = (0.5 * p) ** (1.0 / (p - 2.0))
    u0_amp = 1.1 * p ** (1.0 / (p - 2.0))
    u0 = np.zeros(m)
    u0[0] = u0_amp
    while eval_G(u0) <= 0.0:
        u0[0] *= 2.0
    return PotentialModel(
        name=f"defocusing_well(p={p:g})",
        m=int(m),
        eval_G=eval_G,
        eval_g=eval_g,
        epsilon=0.99 * min(1.0, zero_cross),
        u0=u0,
        params={"kind": "defocusing_well", "m": int(m), "p": p},
        radial_gprime=gprime,
    )


def make_table(
    radii: NDArray, values: NDArray, *, m: int = 1,
    epsilon: float, u0_amplitude: float, name: str = "table",
) -> PotentialModel:
    """Isotropic potential interpolated from samples of G(|u|).

    The table is interpolated with a monotone cubic (PCHIP), g is its
    derivative applied radially.  The table must start at |u| = 0 with
    G = 0.
    """
    from scipy.interpolate import PchipInterpolator

    radii = np.asarray(radii, dtype=float)
    values = np.asarray(values, dtype=float)
    if radii.ndim != 1 or radii.shape != values.shape or len(radii) < 4:
        raise ParameterError("table needs matching 1-D radii/values with >= 4 entries")
    if radii[0] != 0.0 or values[0] != 0.0:
        raise ParameterError("table must start at (0, 0)")
    if np.any(np.diff(radii) <= 0.0):
        raise ParameterError("table radii must be strictly increasing")
    spline = PchipInterpolator(radii, values, extrapolate=False)
    dspline = spline.derivative()
    top = radii[-1]
    top_val = float(spline(top))
    top_slope = float(dspline(top))

    # beyond the tabulated range both G and g continue linearly, keeping
    # the gradient structure g = grad G intact
    def G_amp(t):
        t = np.asarray(t, dtype=float)
        out = np.asarray(spline(np.minimum(t, top)), dtype=float)
        over = t > top
        if np.any(over):
            out = np.where(over, top_val + top_slope * (t - top), out)
        return out

    def slope_amp(t):
        t = np.asarray(t, dtype=float)
        return np.where(t > top, top_slope, dspline(np.minimum(t, top)))

    def eval_G(u):
        out = G_amp(_norm_last(u))
        return out if np.ndim(out) else float(out)

    def eval_g(u):
        u = np.asarray(u, dtype=float)
        amp = _norm_last(u)
        slope = np.zeros_like(amp)
        mask = amp > 0.0
        slope[mask] = slope_amp(amp[mask]) / amp[mask]
        return u * slope[..., None]

    u0 = np.zeros(m)
    u0[0] = float(u0_amplitude)
    return PotentialModel(
        name=name, m=int(m), eval_G=eval_G, eval_g=eval_g,
        epsilon=float(epsilon), u0=u0,
        params={"kind": "table", "m": int(m)},
        radial_gprime=lambda t: slope_amp(np.abs(t)),
    )


@dataclass(frozen=True)
class ValidationReport:
    model_name: str
    passed: bool
    n_samples: int
    max_gradient_mismatch: float
    notes: tuple = ()

    def to_dict(self) -> dict:
        return {
            "model_name": self.model_name,
            "passed": self.passed,
            "n_samples": self.n_samples,
            "max_gradient_mismatch": self.max_gradient_mismatch,
            "notes": list(self.notes),
        }


def _fd_gradient(eval_G, u: NDArray, h: float) -> NDArray:
    grad = np.zeros_like(u)
    for c in range(u.shape[-1]):
        up = u.copy()
        dn = u.copy()
        up[c] += h
        dn[c] -= h
        grad[c] = (eval_G(up) - eval_G(dn)) / (2.0 * h)
    return grad


def validate(model: PotentialModel, samples: int = 1000, rng_seed: int = 0) -> ValidationReport:
    """Check the admissibility assumptions by dense sampling.

    Samples |u| on a log grid in (0, epsilon] along random directions,
    verifies G(0) = 0 and g(0) = 0 exactly, G < 0 on the punctured ball,
    G(u0) > 0, and that g matches the central finite difference of G to a
    relative error of 1e-5 away from the origin.  Raises
    :class:`AdmissibilityError` naming the failing assumption.
    """
    if samples < 100:
        raise ParameterError(f"need at least 100 samples, got {samples}")
    if model.epsilon <= 0.0:
        raise AdmissibilityError(f"{model.name}: witness radius epsilon must be positive")

    zero = np.zeros(model.m)
    if float(model.eval_G(zero)) != 0.0:
        raise AdmissibilityError(f"{model.name}: G(0) must vanish exactly")
    if np.any(np.asarray(model.eval_g(zero)) != 0.0):
        raise AdmissibilityError(f"{model.name}: g(0) must vanish exactly")

    rng = np.random.default_rng(rng_seed)
    radii = np.geomspace(model.epsilon * 1e-8, model.epsilon, samples)
    dirs = rng.normal(size=(samples, model.m))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    pts = radii[:, None] * dirs
    gvals = np.asarray(model.eval_G(pts))
    if np.any(gvals >= 0.0):
        bad = float(radii[np.argmax(gvals >= 0.0)])
        raise AdmissibilityError(
            f"{model.name}: G must be negative for 0 < |u| <= epsilon "
            f"(violated at |u| = {bad:.3e})"
        )
    if float(model.eval_G(np.asarray(model.u0, dtype=float))) <= 0.0:
        raise AdmissibilityError(f"{model.name}: G(u0) must be positive at the witness u0")

    # gradient consistency away from the origin
    amps = np.exp(rng.uniform(np.log(1e-3), np.log(10.0), size=samples))
    dirs = rng.normal(size=(samples, model.m))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    worst = 0.0
    for amp, d in zip(amps, dirs):
        u = amp * d
        g = np.asarray(model.eval_g(u), dtype=float)
        h = 1e-6 * (1.0 + amp)
        fd = _fd_gradient(model.eval_G, u, h)
        scale = max(np.linalg.norm(g), 1e-8)
        worst = max(worst, float(np.linalg.norm(fd - g) / scale))
    if worst > 1e-5:
        raise AdmissibilityError(
            f"{model.name}: g does not match the gradient of G "
            f"(relative mismatch {worst:.2e})"
        )
    return ValidationReport(
        model_name=model.name, passed=True,
        n_samples=samples, max_gradient_mismatch=worst,
    )


# -- config-defined potentials -----------------------------------------------

def potential_from_config(cfg: dict) -> PotentialModel:
    """Build a potential from a config mapping {kind, params...}."""
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError(f"potential config needs a 'kind' entry, got {cfg!r}")
    kind = cfg["kind"]
    params = dict(cfg.get("params", {}))
    m = int(cfg.get("m", params.pop("m", 1)))
    if kind == "logarithmic":
        return make_logarithmic(m=m)
    if kind == "defocusing_well":
        p = float(cfg.get("p", params.pop("p", 4.0)))
        return make_defocusing_well(m=m, p=p)
    if kind == "table":
        try:
            return make_table(
                np.asarray(params["radii"], dtype=float),
                np.asarray(params["values"], dtype=float),
                m=m,
                epsilon=float(params["epsilon"]),
                u0_amplitude=float(params["u0_amplitude"]),
                name=cfg.get("name", "table"),
            )
        except KeyError as exc:
            raise ConfigError(f"table potential config missing {exc}") from exc
    raise ConfigError(f"unknown potential kind {kind!r}")


def load_potential_config(path) -> PotentialModel:
    """Read a potential definition from a JSON or TOML file."""
    path = Path(path)
    text = path.read_bytes()
    if path.suffix.lower() == ".toml":
        import tomli

        cfg = tomli.loads(text.decode("utf-8"))
    else:
        cfg = json.loads(text)
    if "potential" in cfg:
        cfg = cfg["potential"]
    return potential_from_config(cfg)
