"""Spatial entanglement of two trapped ions in a symmetric Gaussian state."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError

#: kappa quoted for the experimental mode frequencies
KAPPA_EXPERIMENT = 0.5008


def kappa_of(omega_plus: float, omega_minus: float) -> float:
    """``kappa = (sqrt(w+/w-) + sqrt(w-/w+)) / 4``; equals 1/2 at equal frequencies."""
    if omega_plus <= 0 or omega_minus <= 0:
        raise DomainError("mode frequencies must be positive")
    s = math.sqrt(omega_plus / omega_minus)
    return 0.25 * (s + 1.0 / s)


def ratio_from_kappa(kappa: float) -> float:
    """Mode-frequency ratio ``w+/w- >= 1`` that reproduces ``kappa`` (bracketed root)."""
    if kappa < 0.5:
        raise DomainError("kappa must be at least 1/2")
    if kappa == 0.5:
        return 1.0
    hi = 2.0
    while kappa_of(hi, 1.0) < kappa:
        hi *= 2.0
    return brentq(lambda x: kappa_of(x, 1.0) - kappa, 1.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


@dataclass(frozen=True, eq=False)
class SchmidtVacuum:
    """Ground state of the coupled pair written in the local number basis.

    ``coefficients[n]`` multiplies ``|n>_A |n>_B``.
    """

    kappa: float
    beta: float
    coefficients: np.ndarray

    @property
    def ratio(self) -> float:
        """``e^{-2 beta}``, the geometric ratio of the squared coefficients."""
        return math.exp(-2 * self.beta) if math.isfinite(self.beta) else 0.0

    def entropy(self) -> float:
        """Von Neumann entropy of either ion's reduced state, in nats (closed form)."""
        x = self.ratio
        if x == 0.0:
            return 0.0
        return -math.log1p(-x) - x * math.log(x) / (1.0 - x)


def schmidt_vacuum(kappa: float, n_terms: int = 32) -> SchmidtVacuum:
    if not kappa >= 0.5:
        raise DomainError("kappa must be at least 1/2")
    q = math.sqrt((kappa - 0.5) / (kappa + 0.5))  # e^{-beta}
    beta = -math.log(q) if q > 0 else math.inf
    n = np.arange(n_terms)
    c = math.sqrt(1.0 - q * q) * q**n
    return SchmidtVacuum(kappa, beta, c)


def perturbative_pair_state(xi: complex) -> dict[str, dict[str, complex]]:
    """First-order amplitudes of a weakly squeezed rocking mode.

    Returns the normal-mode amplitudes (keys ``"00"``, ``"02"`` for
    ``|0>_+|n>_-``) and the local-ion amplitudes (keys ``"00"``, ``"11"``,
    ``"02"``, ``"20"`` for ``|n>_A|m>_B``), unnormalized.
    """
    xi = complex(xi)
    normal = {"00": 1.0 + 0j, "02": xi / math.sqrt(2)}
    local = {"00": 1.0 + 0j, "11": -xi / 2, "02": -xi / math.sqrt(8), "20": -xi / math.sqrt(8)}
    return {"normal": normal, "local": local}


@dataclass(frozen=True)
class TwoModeSpec:
    omega_plus: float
    omega_minus: float
    n_plus: float = 0.03
    n_minus: float = 0.03
    r: float = 0.0

    def __post_init__(self):
        if not (self.omega_plus >= self.omega_minus > 0):
            raise DomainError("need omega_plus >= omega_minus > 0")
        if self.n_plus < 0 or self.n_minus < 0 or self.r < 0:
            raise DomainError("occupancies and squeezing must be non-negative")

    @classmethod
    def experimental(cls, r: float = 0.0, n_plus: float = 0.03, n_minus: float = 0.03, omega_minus: float = 1.0):
        """Mode pair with the ratio inverted from the quoted kappa."""
        return cls(ratio_from_kappa(KAPPA_EXPERIMENT) * omega_minus, omega_minus, n_plus, n_minus, r)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "TwoModeSpec":
        return cls(**{k: float(d[k]) for k in d})


def symplectic_eigs(spec: TwoModeSpec) -> tuple[float, float]:
    pre = math.sqrt(1 + 2 * spec.n_minus) * math.sqrt(1 + 2 * spec.n_plus) / 2
    s = math.sqrt(spec.omega_plus / spec.omega_minus)
    return math.exp(-spec.r) * pre * s, math.exp(spec.r) * pre / s


def _xlogx(x: float) -> float:
    return 0.0 if x == 0.0 else x * math.log(x)


def entanglement_of_formation(chi: float, clamp: bool = False) -> float:
    """Entanglement of formation in nats for the smaller symplectic eigenvalue ``chi``.

    The closed form is evaluated as printed for any ``chi > 0``. Above the
    separability threshold ``chi = 1/2`` it stays small and positive; pass
    ``clamp=True`` to return 0 there instead.
    """
    if not chi > 0:
        raise DomainError("chi must be positive")
    if clamp and chi >= 0.5:
        return 0.0
    a = (0.5 + chi) ** 2 / (2 * chi)
    b = (0.5 - chi) ** 2 / (2 * chi)
    return _xlogx(a) - _xlogx(b)


def nats_to_bits(value: float) -> float:
    return value / math.log(2)


@dataclass(frozen=True)
class EntanglementReport:
    kappa: float
    lambda1: float
    lambda2: float
    chi: float
    e_f_nats: float
    e_f_bits: float
    separable: bool

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True)


def report(spec: TwoModeSpec, clamp: bool = False) -> EntanglementReport:
    l1, l2 = symplectic_eigs(spec)
    chi = min(l1, l2)
    ef = entanglement_of_formation(chi, clamp=clamp)
    return EntanglementReport(kappa_of(spec.omega_plus, spec.omega_minus), l1, l2, chi, ef, nats_to_bits(ef), chi >= 0.5)
