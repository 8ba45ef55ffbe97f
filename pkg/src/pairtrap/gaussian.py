"""Exact Gaussian-state dynamics of a driven oscillator with time-dependent frequency.

Quadratures are dimensionless, ``X = (a + a^dag)/sqrt(2)`` and
``P = i(a^dag - a)/sqrt(2)``, defined at a reference frequency ``omega0``.
The vacuum has ``cov = diag(1/2, 1/2)``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import constants
from scipy.integrate import solve_ivp

from .errors import DomainError, NumericalError
from .ramps import FrequencyProfile, Segment

HBAR = constants.hbar
AMU = constants.atomic_mass
E_CHARGE = constants.e

#: default oscillator mass: one 25Mg+ ion
DEFAULT_MASS = 25.0 * AMU

RTOL = 1e-10
ATOL = 1e-12
# integrator tolerance allowed below the uncertainty bound
DET_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class GaussianState:
    """Quadrature means and covariance of a single-mode Gaussian state."""

    mean: np.ndarray
    cov: np.ndarray
    omega0: float

    def __post_init__(self):
        m = np.array(self.mean, dtype=float).reshape(2)
        c = np.array(self.cov, dtype=float).reshape(2, 2)
        if not abs(c[0, 1] - c[1, 0]) <= 1e-12 * max(1.0, abs(c).max()):
            raise DomainError("covariance must be symmetric")
        c = 0.5 * (c + c.T)
        if c[0, 0] <= 0 or np.linalg.det(c) <= 0:
            raise DomainError("covariance must be positive definite")
        if np.linalg.det(c) < 0.25 - DET_SLACK:
            raise DomainError("covariance violates the uncertainty bound det >= 1/4")
        if not self.omega0 > 0:
            raise DomainError("reference frequency must be positive")
        m.flags.writeable = False
        c.flags.writeable = False
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "cov", c)

    @classmethod
    def vacuum(cls, omega0: float) -> "GaussianState":
        return cls(np.zeros(2), 0.5 * np.eye(2), omega0)

    @classmethod
    def thermal(cls, n_bar: float, omega0: float) -> "GaussianState":
        if n_bar < 0:
            raise DomainError("thermal occupation must be non-negative")
        return cls(np.zeros(2), (0.5 + n_bar) * np.eye(2), omega0)

    @classmethod
    def squeezed(cls, r: float, theta: float, omega0: float, alpha: complex = 0.0, n_th: float = 0.0):
        """State with minor axis at angle ``theta``, thermal seed ``n_th`` and mean ``alpha``."""
        rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
        diag = (0.5 + n_th) * np.diag([math.exp(-2 * r), math.exp(2 * r)])
        mean = math.sqrt(2.0) * np.array([complex(alpha).real, complex(alpha).imag])
        return cls(mean, rot @ diag @ rot.T, omega0)

    @property
    def purity_det(self) -> float:
        return float(np.linalg.det(self.cov))

    def at_frequency(self, omega: float) -> "GaussianState":
        """Re-express the quadratures relative to reference frequency ``omega``."""
        k = math.sqrt(omega / self.omega0)
        d = np.diag([k, 1.0 / k])
        return GaussianState(d @ self.mean, d @ self.cov @ d, omega)

    def position_offset(self, mass: float = DEFAULT_MASS) -> float:
        """Mean position in metres."""
        return float(self.mean[0]) * math.sqrt(2.0) * ground_width(mass, self.omega0)


def ground_width(mass: float, omega0: float) -> float:
    """Ground-state width ``x0 = sqrt(hbar / (2 m omega0))``."""
    return math.sqrt(HBAR / (2.0 * mass * omega0))


@dataclass(frozen=True)
class TransferMatrix:
    """Affine phase-space map ``v -> S v + d`` between two times."""

    S: np.ndarray
    d: np.ndarray

    @classmethod
    def identity(cls) -> "TransferMatrix":
        return cls(np.eye(2), np.zeros(2))

    def then(self, other: "TransferMatrix") -> "TransferMatrix":
        """Compose: apply ``self`` first, then ``other``."""
        return TransferMatrix(other.S @ self.S, other.S @ self.d + other.d)

    def apply(self, state: GaussianState) -> GaussianState:
        return GaussianState(self.S @ state.mean + self.d, self.S @ state.cov @ self.S.T, state.omega0)

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.S))


# ---------------------------------------------------------------------------
# drives


@dataclass(frozen=True)
class Drive:
    """Force acting on the mode, ``F0(t)`` in newtons.

    ``constant`` is set for static forces, which lets constant-frequency
    segments be propagated in closed form.
    """

    force: Callable[[float], float] | None = None
    constant: float | None = None

    @classmethod
    def none(cls) -> "Drive":
        return cls(constant=0.0)

    @classmethod
    def static(cls, force: float) -> "Drive":
        return cls(constant=float(force))

    @classmethod
    def stray_field(cls, field: float, charge: float = E_CHARGE) -> "Drive":
        """Static force from a homogeneous stray field in V/m."""
        return cls.static(charge * field)

    def __call__(self, t):
        if self.constant is not None:
            return self.constant if np.ndim(t) == 0 else np.full(np.shape(t), self.constant)
        return self.force(t)

    def scaled(self, k: float) -> "Drive":
        if self.constant is not None:
            return Drive(constant=k * self.constant)
        f = self.force
        return Drive(force=lambda t: k * f(t))

    @property
    def is_zero(self) -> bool:
        return self.constant == 0.0


# ---------------------------------------------------------------------------
# propagation


def _const_transfer(omega: float, omega0: float, f: float, tau) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form propagation over ``tau`` at fixed frequency and force.

    Returns arrays of shape ``(..., 2, 2)`` and ``(..., 2)``.
    """
    tau = np.asarray(tau, dtype=float)
    q = omega / omega0
    c, s = np.cos(omega * tau), np.sin(omega * tau)
    S = np.empty(tau.shape + (2, 2))
    S[..., 0, 0] = c
    S[..., 0, 1] = s / q
    S[..., 1, 0] = -q * s
    S[..., 1, 1] = c
    x_eq = -f * omega0 / omega**2
    d = np.empty(tau.shape + (2,))
    d[..., 0] = (1.0 - c) * x_eq
    d[..., 1] = q * s * x_eq
    return S, d


def _rhs_factory(omega_fn, omega0, force_scale, drive: Drive):
    with_drive = not drive.is_zero

    def rhs(t, y):
        w2 = omega_fn(t) ** 2 / omega0
        # y = [S00, S01, S10, S11, d0, d1]
        out = np.empty_like(y)
        out[0] = omega0 * y[2]
        out[1] = omega0 * y[3]
        out[2] = -w2 * y[0]
        out[3] = -w2 * y[1]
        if with_drive:
            out[4] = omega0 * y[5]
            out[5] = -w2 * y[4] - force_scale * drive(t)
        else:
            out[4] = 0.0
            out[5] = 0.0
        return out

    return rhs


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time series of Gaussian states along a profile."""

    times: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    omega: np.ndarray
    omega0: float
    transfer: TransferMatrix
    symplectic_drift: float = 0.0  # raw max |det S - 1| before projection

    def __len__(self):
        return self.times.size

    def state(self, i: int, instantaneous: bool = False) -> GaussianState:
        st = GaussianState(self.means[i], self.covs[i], self.omega0)
        return st.at_frequency(float(self.omega[i])) if instantaneous else st

    @property
    def final(self) -> GaussianState:
        return self.state(-1)

    def observables(self) -> dict[str, np.ndarray]:
        """Squeezing, displacement and pair number relative to the instantaneous frequency."""
        k = np.sqrt(self.omega / self.omega0)
        mx, mp = self.means[:, 0] * k, self.means[:, 1] / k
        cxx = self.covs[:, 0, 0] * k**2
        cpp = self.covs[:, 1, 1] / k**2
        cxp = self.covs[:, 0, 1]
        tr, det = cxx + cpp, cxx * cpp - cxp**2
        disc = np.sqrt(np.maximum((cxx - cpp) ** 2 + 4 * cxp**2, 0.0))
        smax, smin = 0.5 * (tr + disc), 0.5 * (tr - disc)
        r = 0.25 * np.log(smax / smin)
        return {
            "r": r,
            "abs_alpha": np.hypot(mx, mp) / math.sqrt(2.0),
            "n_pair": np.sinh(r) ** 2,
            "det": det,
        }

    def to_csv(self, path=None) -> str:
        obs = self.observables()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "meanX", "meanP", "covXX", "covXP", "covPP", "r", "abs_alpha", "n_pair"])
        for i in range(len(self)):
            row = [
                self.times[i],
                self.means[i, 0],
                self.means[i, 1],
                self.covs[i, 0, 0],
                self.covs[i, 0, 1],
                self.covs[i, 1, 1],
                obs["r"][i],
                obs["abs_alpha"][i],
                obs["n_pair"][i],
            ]
            w.writerow([f"{v:.17g}" for v in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _segment_is_constant(seg: Segment) -> bool:
    return seg.constant is not None


def propagate_segments(
    profile: FrequencyProfile,
    drive: Drive,
    mass: float,
    omega0: float,
    t_eval: np.ndarray,
    rtol: float = RTOL,
    atol: float = ATOL,
):
    """Transfer maps from the profile start to every time in ``t_eval``.

    Returns ``(S, d, total)`` with ``S`` of shape ``(n, 2, 2)``.
    """
    force_scale = math.sqrt(2.0) * ground_width(mass, omega0) / HBAR
    n = t_eval.size
    S_out = np.empty((n, 2, 2))
    d_out = np.empty((n, 2))
    acc = TransferMatrix.identity()
    segs = [s for s in profile.segments if s.end > s.start]
    for k, seg in enumerate(segs):
        last = k == len(segs) - 1
        mask = (t_eval >= seg.start) & ((t_eval < seg.end) | (last & (t_eval <= seg.end)))
        if k == 0:
            mask |= t_eval < seg.start
        ts = t_eval[mask]
        if _segment_is_constant(seg) and drive.constant is not None:
            f = force_scale * drive.constant
            if ts.size:
                Sl, dl = _const_transfer(seg.constant, omega0, f, ts - seg.start)
                S_out[mask] = Sl @ acc.S
                d_out[mask] = np.einsum("nij,j->ni", Sl, acc.d) + dl
            Se, de = _const_transfer(seg.constant, omega0, f, seg.duration)
            acc = acc.then(TransferMatrix(Se, de))
            continue
        # the particular solution is integrated for a unit-amplitude force and
        # rescaled, so step selection does not depend on the drive strength
        amp = 0.0
        if not drive.is_zero:
            probe = np.linspace(seg.start, seg.end, 257)
            amp = float(np.max(np.abs(drive(probe))))
        unit = force_scale / amp if amp > 0 else 0.0
        rhs = _rhs_factory(profile.segment_evaluator(seg), omega0, unit, drive)
        y0 = np.array([1.0, 0.0, 0.0, 1.0, 0.0, 0.0])
        t_req = np.clip(ts, seg.start, seg.end)
        has_end = bool(t_req.size) and t_req[-1] >= seg.end
        t_req_full = t_req if has_end else np.concatenate([t_req, [seg.end]])
        sol = solve_ivp(
            rhs,
            (seg.start, seg.end),
            y0,
            method="DOP853",
            rtol=rtol,
            atol=atol,
            t_eval=t_req_full,
        )
        if sol.status != 0:
            raise NumericalError(f"integration failed in segment '{seg.label}': {sol.message}")
        Y = sol.y.T
        Y[:, 4:] *= amp
        if ts.size:
            Sl = Y[: ts.size, :4].reshape(-1, 2, 2)
            dl = Y[: ts.size, 4:]
            S_out[mask] = Sl @ acc.S
            d_out[mask] = np.einsum("nij,j->ni", Sl, acc.d) + dl
        acc = acc.then(TransferMatrix(Y[-1, :4].reshape(2, 2), Y[-1, 4:]))
    return S_out, d_out, acc


def evolve(
    initial: GaussianState,
    profile: FrequencyProfile,
    drive: Drive | None = None,
    mass: float = DEFAULT_MASS,
    t_eval: Sequence[float] | None = None,
    rtol: float = RTOL,
    atol: float = ATOL,
) -> Trajectory:
    """Evolve a Gaussian state through ``profile``.

    The classical equations ``x'' + omega(t)^2 x = F0(t)/m`` are integrated for
    the fundamental solutions and the driven particular solution; moments
    follow as ``cov(t) = S cov0 S^T`` and ``mean(t) = S mean0 + d``.
    ``initial`` is re-expressed at the profile's initial frequency if needed.
    """
    drive = drive or Drive.none()
    omega0 = profile.omega_initial
    if not math.isclose(initial.omega0, omega0, rel_tol=1e-14):
        initial = initial.at_frequency(omega0)
    t_eval = profile.times if t_eval is None else np.asarray(t_eval, dtype=float)
    S, d, total = propagate_segments(profile, drive, mass, omega0, t_eval, rtol, atol)
    dets = np.linalg.det(S)
    worst = float(np.max(np.abs(dets - 1.0)))
    if worst > 1e3 * rtol + 1e-9:
        raise NumericalError(f"transfer matrix lost symplecticity (|det - 1| = {worst:.3g})")
    # remove the residual integrator drift so that long runs stay physical
    S = S / np.sqrt(dets)[:, None, None]
    means = np.einsum("nij,j->ni", S, initial.mean) + d
    covs = S @ initial.cov @ np.transpose(S, (0, 2, 1))
    return Trajectory(t_eval, means, covs, profile.omega_at(t_eval), omega0, total, worst)


def transfer(profile: FrequencyProfile, drive: Drive | None = None, mass: float = DEFAULT_MASS) -> TransferMatrix:
    """Phase-space map across the whole profile at reference ``omega(0)``."""
    drive = drive or Drive.none()
    _, _, total = propagate_segments(
        profile, drive, mass, profile.omega_initial, np.array([profile.t_end])
    )
    return total


# ---------------------------------------------------------------------------
# observables


@dataclass(frozen=True)
class SqueezeParams:
    r: float
    theta: float
    n_th: float


def squeeze_params(state: GaussianState, omega_ref: float | None = None) -> SqueezeParams:
    """Squeezing amplitude, minor-axis angle in ``[0, pi)`` and thermal seed.

    ``omega_ref`` re-expresses the state at another frequency first; the
    squeezing of a state sitting in a trap of frequency ``w`` is measured
    relative to that trap's ground state, i.e. ``omega_ref=w``.
    """
    if omega_ref is not None:
        state = state.at_frequency(omega_ref)
    vals, vecs = np.linalg.eigh(state.cov)
    smin, smax = float(vals[0]), float(vals[1])
    r = 0.25 * math.log(smax / smin)
    n_th = max(math.sqrt(smax * smin) - 0.5, 0.0)
    vx, vp = vecs[:, 0]
    theta = math.atan2(vp, vx) % math.pi
    if r < 1e-14:
        theta = 0.0
    return SqueezeParams(r, theta, n_th)


def squeeze_r_arccosh(state: GaussianState, omega_ref: float | None = None) -> float:
    """Pure-state squeezing ``r = arccosh(var X + var P) / 2``."""
    if omega_ref is not None:
        state = state.at_frequency(omega_ref)
    return 0.5 * math.acosh(max(float(np.trace(state.cov)), 1.0))


def displacement(state: GaussianState, omega_ref: float | None = None) -> complex:
    """Coherent amplitude ``alpha = (<X> + i<P>)/sqrt(2)``."""
    if omega_ref is not None:
        state = state.at_frequency(omega_ref)
    return complex(state.mean[0], state.mean[1]) / math.sqrt(2.0)


@dataclass(frozen=True)
class BogoliubovPair:
    alpha_B: complex
    beta_B: complex

    @property
    def n_pair(self) -> float:
        return abs(self.beta_B) ** 2


def bogoliubov(S: TransferMatrix | np.ndarray, omega_in: float, omega_out: float, omega0: float | None = None) -> BogoliubovPair:
    """Bogoliubov coefficients of the map between in- and out-mode operators.

    ``S`` acts on quadratures referenced at ``omega0`` (defaults to
    ``omega_in``). It is first re-referenced so that ``a_in`` and ``a_out``
    annihilate the ground states of ``omega_in`` and ``omega_out``; then
    ``a_out = alpha_B a_in + beta_B a_in^dag``.
    """
    M = S.S if isinstance(S, TransferMatrix) else np.asarray(S, dtype=float)
    if abs(np.linalg.det(M) - 1.0) > 1e-7:
        raise DomainError("transfer matrix is not symplectic (det != 1)")
    omega0 = omega_in if omega0 is None else omega0
    k_in, k_out = math.sqrt(omega_in / omega0), math.sqrt(omega_out / omega0)
    M = np.diag([k_out, 1 / k_out]) @ M @ np.diag([1 / k_in, k_in])
    A, B, C, D = M[0, 0], M[0, 1], M[1, 0], M[1, 1]
    alpha = 0.5 * complex(A + D, C - B)
    beta = 0.5 * complex(A - D, C + B)
    return BogoliubovPair(alpha, beta)


def squeezing_db(r):
    """Variance suppression ``exp(-2r)`` expressed in decibels."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise DomainError("squeezing amplitude must be non-negative")
    out = 20.0 / math.log(10.0) * r_arr
    return float(out) if np.ndim(r) == 0 else out


def final_metrics(traj: Trajectory) -> dict[str, float]:
    """Final ``r``, ``|alpha|`` and pair number relative to the final frequency."""
    st = traj.final.at_frequency(float(traj.omega[-1]))
    sp = squeeze_params(st)
    return {
        "r": sp.r,
        "theta": sp.theta,
        "n_th": sp.n_th,
        "abs_alpha": abs(displacement(st)),
        "n_pair": math.sinh(sp.r) ** 2,
    }
