"""Analog dictionary between expanding-space, strong-field and horizon scenarios and trap frequency profiles.

Every scenario reduces to a single mode obeying ``chi'' + Omega_k(t)^2 chi = 0``.
:func:`compile` turns a :class:`ScenarioSpec` into a :class:`~pairtrap.ramps.FrequencyProfile`
that the Gaussian engine evolves unchanged.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy.constants import c as C_LIGHT
from scipy.constants import hbar as HBAR
from scipy.interpolate import CubicSpline
from scipy.signal import savgol_filter

from . import gaussian
from .errors import DomainError, TachyonicWindowError, UnmappableModeError
from .ramps import FrequencyProfile, Segment

KINDS = ("flrw_proper", "flrw_conformal", "vector_field", "sauter_schwinger", "hawking")
DEFAULT_SAMPLES = 2001


@dataclass(frozen=True)
class Units:
    c: float
    hbar: float


SI = Units(C_LIGHT, HBAR)
NATURAL = Units(1.0, 1.0)


# ---------------------------------------------------------------------------
# scale histories


class ScaleHistory:
    """``a(t)`` with its first two time derivatives."""

    def __init__(self, a: Callable, da: Callable, dda: Callable, name: str):
        self.a, self.da, self.dda, self.name = a, da, dda, name

    def __call__(self, t):
        return self.a(t)


def de_sitter_proper(hubble: float) -> ScaleHistory:
    """``a = exp(H tau)`` in proper time."""
    H = hubble
    return ScaleHistory(
        lambda t: np.exp(H * np.asarray(t)),
        lambda t: H * np.exp(H * np.asarray(t)),
        lambda t: H * H * np.exp(H * np.asarray(t)),
        "de_sitter_proper",
    )


def de_sitter_conformal(hubble: float) -> ScaleHistory:
    """``a = -1 / (H eta)`` for conformal time ``eta < 0``."""
    H = hubble
    return ScaleHistory(
        lambda t: -1.0 / (H * np.asarray(t)),
        lambda t: 1.0 / (H * np.asarray(t) ** 2),
        lambda t: -2.0 / (H * np.asarray(t) ** 3),
        "de_sitter_conformal",
    )


def tanh_expansion(a_initial: float, a_final: float, t_scale: float, t_mid: float = 0.0) -> ScaleHistory:
    """Smooth transition between two static eras."""
    h = 0.5 * (a_final - a_initial)

    def u(t):
        return np.tanh((np.asarray(t) - t_mid) / t_scale)

    return ScaleHistory(
        lambda t: a_initial + h * (1 + u(t)),
        lambda t: h * (1 - u(t) ** 2) / t_scale,
        lambda t: -2 * h * u(t) * (1 - u(t) ** 2) / t_scale**2,
        "tanh",
    )


def constant_scale(value: float = 1.0) -> ScaleHistory:
    return ScaleHistory(
        lambda t: np.full(np.shape(t), value, dtype=float) if np.ndim(t) else float(value),
        lambda t: np.zeros(np.shape(t)) if np.ndim(t) else 0.0,
        lambda t: np.zeros(np.shape(t)) if np.ndim(t) else 0.0,
        "constant",
    )


def _stencil_derivatives(y: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """First and second derivatives: 5-point central stencils, 2nd-order one-sided at the edges."""
    d1 = np.gradient(y, h, edge_order=2)
    d2 = np.gradient(d1, h, edge_order=2)
    if y.size >= 5:
        d1[2:-2] = (y[:-4] - 8 * y[1:-3] + 8 * y[3:-1] - y[4:]) / (12 * h)
        d2[2:-2] = (-y[:-4] + 16 * y[1:-3] - 30 * y[2:-2] + 16 * y[3:-1] - y[4:]) / (12 * h * h)
    return d1, d2


def sampled_scale(times, values, window: int = 9, polyorder: int = 3) -> ScaleHistory:
    """Scale history from uniform samples.

    The samples are smoothed with a local polynomial filter before the
    derivatives are taken, since ``a''`` amplifies sampling noise.
    """
    t = np.asarray(times, dtype=float)
    a = np.asarray(values, dtype=float)
    if t.ndim != 1 or t.shape != a.shape or t.size < 5:
        raise DomainError("need at least 5 matching samples of a(t)")
    h = np.diff(t)
    if np.any(h <= 0) or not np.allclose(h, h[0], rtol=1e-9, atol=0):
        raise DomainError("sampled a(t) needs a uniform increasing time grid")
    if np.any(a <= 0):
        raise DomainError("a(t) must be positive")
    if window > 1:
        window = min(window | 1, t.size if t.size % 2 else t.size - 1)
        a = savgol_filter(a, window, min(polyorder, window - 1))
    d1, d2 = _stencil_derivatives(a, float(h[0]))
    sa, s1, s2 = CubicSpline(t, a), CubicSpline(t, d1), CubicSpline(t, d2)
    return ScaleHistory(sa, s1, s2, "sampled")


def scale_history_from_dict(d: dict) -> ScaleHistory:
    """Build a scale history from a config mapping with a ``preset`` key or ``times``/``values``."""
    if "times" in d:
        return sampled_scale(d["times"], d["values"], int(d.get("window", 9)), int(d.get("polyorder", 3)))
    preset = d.get("preset", "constant")
    if preset == "de_sitter_proper":
        return de_sitter_proper(float(d["hubble"]))
    if preset == "de_sitter_conformal":
        return de_sitter_conformal(float(d["hubble"]))
    if preset == "tanh":
        return tanh_expansion(float(d["a_initial"]), float(d["a_final"]), float(d["t_scale"]), float(d.get("t_mid", 0.0)))
    if preset == "constant":
        return constant_scale(float(d.get("value", 1.0)))
    raise DomainError(f"unknown scale-history preset {preset!r}")


def sauter_potential(field_amplitude: float, tau: float) -> Callable:
    """Vector potential of the pulse ``E(t) = E0 / cosh^2(t / tau)``."""
    return lambda t: -field_amplitude * tau * np.tanh(np.asarray(t) / tau)


# ---------------------------------------------------------------------------
# scenarios


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    """One mode of a field in a time-dependent background.

    ``scale`` is a config mapping (see :func:`scale_history_from_dict`).
    ``vector_potential`` is ``{"preset": "sauter", "field": E0, "tau": tau}``
    or ``{"times": [...], "values": [...]}``. ``hawking_cutoff`` bounds
    ``|T|`` away from the horizon singularity at ``T = 0``.
    """

    kind: str
    k: float = 0.0
    mass: float = 1.0
    scale: dict = field(default_factory=lambda: {"preset": "constant"})
    charge: float = 0.0
    vector_potential: dict | None = None
    surface_gravity: float = 1.0
    hawking_cutoff: float = 1e-3
    natural_units: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"scenario kind must be one of {KINDS}")
        if self.mass < 0 or self.k < 0:
            raise DomainError("mass and k must be non-negative")
        if self.kind == "sauter_schwinger" and self.vector_potential is None:
            raise DomainError("sauter_schwinger needs a vector_potential")
        if self.kind == "hawking" and (self.surface_gravity <= 0 or self.hawking_cutoff <= 0):
            raise DomainError("hawking needs positive surface_gravity and hawking_cutoff")

    @property
    def units(self) -> Units:
        return NATURAL if self.natural_units else SI

    def scale_history(self) -> ScaleHistory:
        return scale_history_from_dict(self.scale)

    def potential(self) -> Callable:
        vp = self.vector_potential or {}
        if "times" in vp:
            return CubicSpline(np.asarray(vp["times"], float), np.asarray(vp["values"], float))
        if vp.get("preset", "sauter") == "sauter":
            return sauter_potential(float(vp["field"]), float(vp["tau"]))
        raise DomainError(f"unknown vector-potential preset {vp.get('preset')!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise DomainError(f"unknown scenario fields {sorted(extra)}")
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def proper_potential(history: ScaleHistory, t) -> np.ndarray:
    """Background term ``-(3/2)(a''/a + a'^2 / (2 a^2))`` of the proper-time mode equation."""
    a, da, dda = history.a(t), history.da(t), history.dda(t)
    return -1.5 * (dda / a + 0.5 * (da / a) ** 2)


def omega_squared(spec: ScenarioSpec, t) -> np.ndarray:
    """``Omega_k(t)^2`` of the scenario."""
    t = np.asarray(t, dtype=float)
    u = spec.units
    m2 = (spec.mass * u.c**2 / u.hbar) ** 2
    if spec.kind == "hawking":
        T = t
        if np.any(np.abs(T) < spec.hawking_cutoff):
            raise DomainError("hawking window reaches the T = 0 cutoff")
        return u.c**2 * spec.k**2 + m2 / (spec.surface_gravity * T) ** 2
    if spec.kind == "sauter_schwinger":
        A = spec.potential()(t)
        return u.c**2 * (spec.k - spec.charge * A / u.hbar) ** 2 + m2
    hist = spec.scale_history()
    a = hist.a(t)
    if np.any(a <= 0):
        raise DomainError("a(t) must be positive on the window")
    if spec.kind == "vector_field":
        return a**2 * m2 + u.c**2 * spec.k**2
    if spec.kind == "flrw_conformal":
        return a**2 * m2 + u.c**2 * spec.k**2 - hist.dda(t) / a
    return m2 + u.c**2 * spec.k**2 / a**2 + proper_potential(hist, t)


def compile(spec: ScenarioSpec, window: tuple[float, float], samples: int = DEFAULT_SAMPLES) -> FrequencyProfile:  # noqa: A001
    """Frequency profile ``Omega_k(t)`` of a scenario over ``window``.

    Raises
    ------
    TachyonicWindowError
        If ``Omega_k^2 <= 0`` anywhere on the sampled window.
    """
    t0, t1 = map(float, window)
    if not t1 > t0:
        raise DomainError("window must have positive length")
    times = np.linspace(t0, t1, samples)
    w2 = omega_squared(spec, times)
    bad = np.flatnonzero(~(w2 > 0))
    if bad.size:
        interval = (float(times[bad[0]]), float(times[bad[-1]]))
        raise TachyonicWindowError(f"Omega^2 <= 0 for t in [{interval[0]:.6g}, {interval[1]:.6g}]", interval)

    def omega_fn(t):
        return np.sqrt(omega_squared(spec, t))

    seg = Segment(spec.kind, t0, t1, omega_fn=omega_fn)
    return FrequencyProfile(times, np.sqrt(w2), (seg,))


def pair_spectrum(spec: ScenarioSpec, window: tuple[float, float], ks, samples: int = DEFAULT_SAMPLES) -> np.ndarray:
    """Created pair number ``|beta_k|^2`` per mode, relative to the instantaneous frequencies at the window ends."""
    out = []
    for k in ks:
        prof = compile(ScenarioSpec(**{**spec.to_dict(), "k": float(k)}), window, samples)
        tm = gaussian.transfer(prof)
        out.append(gaussian.bogoliubov(tm, prof.omega_initial, prof.omega_final).n_pair)
    return np.array(out)


# ---------------------------------------------------------------------------
# proper / conformal frames


def _raw(S: np.ndarray, omega0: float) -> np.ndarray:
    """Transfer matrix on ``(chi, d chi/dt)`` from one on ``(X, P)`` with ``P = X' / omega0``."""
    return np.diag([1.0, omega0]) @ S @ np.diag([1.0, 1.0 / omega0])


def conformal_to_proper(a: float, hubble_rate: float) -> np.ndarray:
    """Map ``(chi_c, d chi_c / d eta) -> (chi_p, d chi_p / d tau)`` with ``chi_p = a^{1/2} chi_c``.

    ``hubble_rate`` is ``(da/d tau)/a``.
    """
    s = math.sqrt(a)
    return np.array([[s, 0.0], [0.5 * hubble_rate * s, 1.0 / s]])


def proper_from_conformal_transfer(S_conf: np.ndarray, omega0_conf: float, a0: float, H0: float, a1: float, H1: float) -> np.ndarray:
    """Proper-time raw transfer matrix implied by a conformal-time one."""
    T0, T1 = conformal_to_proper(a0, H0), conformal_to_proper(a1, H1)
    return T1 @ _raw(S_conf, omega0_conf) @ np.linalg.inv(T0)


# ---------------------------------------------------------------------------
# strong fields


@dataclass(frozen=True)
class KeldyshResult:
    gamma: float
    regime: str


def keldysh(omega_field: float, m: float, q: float, E: float, units: Units = SI) -> KeldyshResult:
    """Keldysh parameter ``gamma = omega m c / (q E)`` and its regime.

    ``E = 0`` gives ``gamma = inf`` (perturbative limit).
    """
    if E < 0 or q <= 0 or m <= 0 or omega_field < 0:
        raise DomainError("need E >= 0 and positive m, q, omega")
    gamma = math.inf if E == 0 else omega_field * m * units.c / (q * E)
    if gamma < 1:
        regime = "tunneling"
    elif gamma > 1:
        regime = "multi-photon"
    else:
        regime = "crossover"
    return KeldyshResult(gamma, regime)


# ---------------------------------------------------------------------------
# trap -> cosmology


@dataclass(frozen=True, eq=False)
class AnalogMap:
    direction: str
    times: np.ndarray
    values: np.ndarray
    e_foldings: float

    def to_csv(self) -> str:
        name = "a" if self.direction == "trap_to_cosmo" else "omega_rad_per_s"
        rows = ["t_seconds," + name] + [f"{t:.17g},{v:.17g}" for t, v in zip(self.times, self.values)]
        return "\n".join(rows) + "\n"


def e_foldings(values) -> float:
    """``ln(max / min)`` of a positive history."""
    v = np.asarray(values, dtype=float)
    return float(math.log(np.max(v) / np.min(v)))


def trap_to_cosmo(profile: FrequencyProfile, k: float, m: float, units: Units = SI) -> AnalogMap:
    """Scale parameter ``a(t) = (hbar / m c^2) sqrt(omega^2 - c^2 k^2)`` implied by a trap profile."""
    if m <= 0 or k < 0:
        raise DomainError("need m > 0 and k >= 0")
    arg = profile.omega**2 - (units.c * k) ** 2
    if np.any(arg <= 0):
        raise UnmappableModeError("omega(t) falls to c k or below; no real scale parameter")
    a = units.hbar / (m * units.c**2) * np.sqrt(arg)
    return AnalogMap("trap_to_cosmo", profile.times.copy(), a, e_foldings(a))


def cosmo_to_trap(spec: ScenarioSpec, window: tuple[float, float], samples: int = DEFAULT_SAMPLES) -> AnalogMap:
    prof = compile(spec, window, samples)
    if spec.kind in ("sauter_schwinger", "hawking"):
        ef = e_foldings(prof.omega)
    else:
        ef = e_foldings(spec.scale_history().a(prof.times))
    return AnalogMap("cosmo_to_trap", prof.times.copy(), prof.omega.copy(), ef)


# ---------------------------------------------------------------------------
# ion crystals


def ion_mode_decomposition(omega_rad, lambdas) -> np.ndarray:
    """Mode frequencies ``sqrt(omega_rad^2 + lambda_I)``, one row per Coulomb eigenvalue.

    The ``lambda_I`` play the part of ``c^2 k^2``.
    """
    w = np.asarray(omega_rad, dtype=float)
    lam = np.asarray(lambdas, dtype=float)
    arg = w[None, ...] ** 2 + lam.reshape((-1,) + (1,) * w.ndim)
    if np.any(arg <= 0):
        raise DomainError("unstable mode: omega_rad^2 + lambda <= 0")
    out = np.sqrt(arg)
    return out if w.ndim else out.reshape(lam.shape)


def two_ion_lambdas(omega_lf: float) -> tuple[float, float]:
    """Coulomb eigenvalues of the two-ion radial modes (in-phase, rocking)."""
    return 0.0, -(omega_lf**2)
