"""Truncated number-basis states and Schrodinger evolution.

Serves two purposes: an independent check of the Gaussian engine, and the
construction of squeezed, displaced thermal states with their phonon-number
distributions.
"""

from __future__ import annotations

import csv
import functools
import io
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .errors import DomainError, NumericalError, TruncationError, UnitarityError
from .gaussian import DEFAULT_MASS, HBAR, Drive, GaussianState, ground_width
from .ramps import FrequencyProfile

N_MAX_DYNAMICS = 128
N_MAX_STATES = 96
LEAK_THRESHOLD = 1e-8


@functools.lru_cache(maxsize=16)
def annihilation(n_max: int) -> np.ndarray:
    a = np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1)
    a.flags.writeable = False
    return a


def tail_population(p: np.ndarray) -> float:
    """Population in number states above ``0.8 * n_max``."""
    n_max = p.size - 1
    return float(np.sum(p[int(math.floor(0.8 * n_max)) + 1 :]))


@dataclass(frozen=True, eq=False)
class FockState:
    """Density matrix over number states ``0..n_max``."""

    rho: np.ndarray
    omega0: float = 1.0
    leak_threshold: float = LEAK_THRESHOLD

    def __post_init__(self):
        rho = np.array(self.rho, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise DomainError("density matrix must be square")
        if abs(np.trace(rho).real - 1.0) > 1e-9:
            raise DomainError(f"density matrix trace is {np.trace(rho).real!r}, expected 1")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
            raise DomainError("density matrix must be Hermitian")
        rho.flags.writeable = False
        object.__setattr__(self, "rho", rho)
        leak = tail_population(np.real(np.diag(rho)))
        if leak > self.leak_threshold:
            raise TruncationError(f"population {leak:.3g} above 0.8*n_max; increase n_max", leak)

    @property
    def n_max(self) -> int:
        return self.rho.shape[0] - 1

    @classmethod
    def from_ket(cls, psi: np.ndarray, omega0: float = 1.0, **kw) -> "FockState":
        psi = np.asarray(psi, dtype=complex)
        return cls(np.outer(psi, psi.conj()), omega0, **kw)

    def eigen_decomposition(self, cutoff: float = 1e-15):
        """Weights and kets of the non-negligible eigen-components."""
        vals, vecs = np.linalg.eigh(self.rho)
        keep = vals > cutoff
        return vals[keep], vecs[:, keep]

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_max": self.n_max,
                "omega0": self.omega0,
                "real": self.rho.real.tolist(),
                "imag": self.rho.imag.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "FockState":
        data = json.loads(text)
        rho = np.array(data["real"]) + 1j * np.array(data["imag"])
        return cls(rho, float(data.get("omega0", 1.0)))


@dataclass(frozen=True, eq=False)
class PhononDistribution:
    """Number-state populations with optional standard errors and covariance."""

    p: np.ndarray
    sigma: np.ndarray | None = None
    cov: np.ndarray | None = None

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if np.any(p < -1e-12):
            raise DomainError("populations must be non-negative")
        object.__setattr__(self, "p", np.clip(p, 0.0, None))
        if self.sigma is not None:
            s = np.array(self.sigma, dtype=float)
            if s.shape != p.shape or np.any(s < 0):
                raise DomainError("sigma must be non-negative and match p")
            object.__setattr__(self, "sigma", s)
        if self.cov is not None:
            object.__setattr__(self, "cov", np.array(self.cov, dtype=float))

    @property
    def n_max(self) -> int:
        return self.p.size - 1

    @property
    def total(self) -> float:
        return float(self.p.sum())

    def truncated(self, n_max: int) -> "PhononDistribution":
        sig = None if self.sigma is None else self.sigma[: n_max + 1]
        cov = None if self.cov is None else self.cov[: n_max + 1, : n_max + 1]
        return PhononDistribution(self.p[: n_max + 1], sig, cov)

    def mean_n(self) -> float:
        return float(np.dot(np.arange(self.p.size), self.p))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "p", "sigma"])
        for n, pn_ in enumerate(self.p):
            s = "" if self.sigma is None else f"{self.sigma[n]:.17g}"
            w.writerow([n, f"{pn_:.17g}", s])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "PhononDistribution":
        if isinstance(source, str) and "\n" in source:
            text = source
        else:
            with open(source) as fh:
                text = fh.read()
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise DomainError("distribution CSV is empty")
        p = np.array([float(r["p"]) for r in rows])
        sig = [r.get("sigma") for r in rows]
        sigma = None if any(s in (None, "") for s in sig) else np.array([float(s) for s in sig])
        return cls(p, sigma)


# ---------------------------------------------------------------------------
# state construction


def thermal_populations(n_bar: float, n_max: int) -> np.ndarray:
    n = np.arange(n_max + 1)
    if n_bar == 0:
        return (n == 0).astype(float)
    return n_bar**n / (1.0 + n_bar) ** (n + 1)


def make_thermal(n_bar: float, n_max: int = N_MAX_STATES, omega0: float = 1.0) -> FockState:
    """Thermal state ``rho_nn = n^n / (1 + n)^(n+1)`` with mean occupation ``n_bar``."""
    if n_bar < 0:
        raise DomainError("n_bar must be non-negative")
    p = thermal_populations(n_bar, n_max)
    leak = 1.0 - p.sum()
    if leak > LEAK_THRESHOLD:
        raise TruncationError(f"thermal tail {leak:.3g} beyond n_max={n_max}", leak)
    # renormalize the truncated distribution
    return FockState(np.diag(p / p.sum()).astype(complex), omega0)


def vacuum(n_max: int = N_MAX_STATES, omega0: float = 1.0) -> FockState:
    return make_thermal(0.0, n_max, omega0)


def displacement_operator(alpha: complex, n_max: int) -> np.ndarray:
    a = annihilation(n_max)
    return expm(alpha * a.T - np.conj(alpha) * a)


def squeeze_operator(xi: complex, n_max: int) -> np.ndarray:
    """``S(xi) = exp((xi^* a^2 - xi a^dag^2)/2)`` on the truncated space."""
    a = annihilation(n_max)
    a2 = a @ a
    return expm(0.5 * (np.conj(xi) * a2 - xi * a2.T))


def _conjugate(state: FockState, U: np.ndarray) -> FockState:
    rho = U @ state.rho @ U.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > 1e-9:
        raise TruncationError(f"operation lost {1 - tr:.3g} of the trace to truncation", 1.0 - tr)
    return FockState(rho, state.omega0, state.leak_threshold)


def displace(state: FockState, alpha: complex) -> FockState:
    """``D(alpha) rho D(alpha)^dag``."""
    return _conjugate(state, displacement_operator(alpha, state.n_max))


def squeeze(state: FockState, xi: complex) -> FockState:
    """``S(xi) rho S(xi)^dag``."""
    return _conjugate(state, squeeze_operator(xi, state.n_max))


def pn(state: FockState) -> PhononDistribution:
    """Diagonal of the density matrix."""
    return PhononDistribution(np.real(np.diag(state.rho)).copy())


def from_gaussian(state: GaussianState, omega_ref: float | None = None, n_max: int = N_MAX_STATES) -> FockState:
    """Number-basis density matrix ``D(alpha) S(xi) rho_th S^dag D^dag`` with the given moments.

    The moments are first re-referenced to ``omega_ref`` (defaults to the
    state's own frequency).
    """
    if omega_ref is not None:
        state = state.at_frequency(omega_ref)
    lam, vec = np.linalg.eigh(state.cov)
    r = 0.25 * math.log(lam[1] / lam[0])
    n_th = max(math.sqrt(lam[0] * lam[1]) - 0.5, 0.0)
    psi = math.atan2(vec[1, 0], vec[0, 0])  # direction of the squeezed quadrature
    alpha = complex(state.mean[0], state.mean[1]) / math.sqrt(2)
    best = None
    for phi in (2 * psi, -2 * psi):
        cand = displace(squeeze(make_thermal(n_th, n_max, state.omega0), r * np.exp(1j * phi)), alpha)
        err = float(np.max(np.abs(quadrature_moments(cand).cov - state.cov)))
        if best is None or err < best[0]:
            best = (err, cand)
    return best[1]


def squeezed_vacuum_pn(r: float, n_max: int) -> np.ndarray:
    """Closed-form ``P_2m = (2m)! tanh(r)^(2m) / (4^m (m!)^2 cosh r)``, odd terms zero."""
    p = np.zeros(n_max + 1)
    t = math.tanh(r)
    for n in range(0, n_max + 1, 2):
        m = n // 2
        p[n] = math.exp(
            math.lgamma(2 * m + 1) - 2 * math.lgamma(m + 1) - m * math.log(4.0)
        ) * t ** (2 * m) / math.cosh(r)
    return p


def quadrature_moments(state: FockState) -> GaussianState:
    """First and second quadrature moments as a :class:`GaussianState`."""
    return _moments_from_rho(state.rho, state.omega0)


def _moments_from_rho(rho: np.ndarray, omega0: float) -> GaussianState:
    n_max = rho.shape[0] - 1
    a = annihilation(n_max)
    ad = a.T
    X = (a + ad) / math.sqrt(2.0)
    P = 1j * (ad - a) / math.sqrt(2.0)

    def ev(op):
        return np.real(np.trace(rho @ op))

    mx, mp = ev(X), ev(P)
    cxx = ev(X @ X) - mx**2
    cpp = ev(P @ P) - mp**2
    cxp = 0.5 * ev(X @ P + P @ X) - mx * mp
    return GaussianState(np.array([mx, mp]), np.array([[cxx, cxp], [cxp, cpp]]), omega0)


def _moments_from_kets(kets: np.ndarray, weights: np.ndarray, omega0: float) -> GaussianState:
    """Moments of ``sum_k w_k |psi_k><psi_k|`` without building the matrix.

    Only valid well inside the truncation, where ``X`` and ``P`` act as on the
    infinite space.
    """
    n_max = kets.shape[0] - 1
    a = annihilation(n_max)
    apsi = a @ kets
    a2psi = a @ apsi
    c = kets.conj()
    ea = np.sum(weights * np.sum(c * apsi, axis=0))
    ea2 = np.sum(weights * np.sum(c * a2psi, axis=0))
    en = np.sum(weights * np.sum(np.abs(apsi) ** 2, axis=0)).real
    mx = math.sqrt(2.0) * ea.real
    mp = math.sqrt(2.0) * ea.imag
    # <X^2> = (<a^2> + <a^dag^2> + 2<n> + 1)/2, <P^2> = (2<n> + 1 - <a^2> - <a^dag^2>)/2
    x2 = ea2.real + en + 0.5
    p2 = -ea2.real + en + 0.5
    xp = ea2.imag  # symmetrized <XP + PX>/2
    cxx, cpp, cxp = x2 - mx**2, p2 - mp**2, xp - mx * mp
    return GaussianState(np.array([mx, mp]), np.array([[cxx, cxp], [cxp, cpp]]), omega0)


# ---------------------------------------------------------------------------
# dynamics


@dataclass(frozen=True, eq=False)
class FockTrajectory:
    """Quadrature moments along an evolution plus the final density matrix."""

    times: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    omega: np.ndarray
    omega0: float
    final: FockState
    norm_drift: float

    def state_moments(self, i: int) -> GaussianState:
        return GaussianState(self.means[i], self.covs[i], self.omega0)


def _fixed_basis_coeffs(omega, omega0):
    q2 = (omega / omega0) ** 2
    return 0.25 * omega0 * (q2 - 1.0), 0.5 * omega0 * (q2 + 1.0)


class _Generators:
    def __init__(self, n_max):
        a = annihilation(n_max)
        self.a = a
        self.ad = a.T.copy()
        a2 = a @ a
        self.sq_sum = a2 + a2.T  # a^2 + a^dag^2
        self.sq_diff = a2 - a2.T  # a^2 - a^dag^2
        self.num = np.diag(np.arange(n_max + 1) + 0.5)  # n + 1/2
        self.x = a + self.ad


def _kets_of(state: FockState):
    w, kets = state.eigen_decomposition()
    return w, kets.astype(complex)


def _check_and_build(kets, weights, omega0, n_max_leak, tol=1e-8, peak_tail=0.0):
    norms = np.sum(np.abs(kets) ** 2, axis=0)
    drift = float(np.max(np.abs(norms - 1.0)))
    if drift > tol:
        raise UnitarityError(f"norm drift {drift:.3g} exceeds {tol:g}")
    if peak_tail > n_max_leak:
        raise TruncationError(f"population {peak_tail:.3g} above 0.8*n_max during the evolution; increase n_max", peak_tail)
    rho = (kets * weights) @ kets.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    return FockState(rho, omega0, n_max_leak), drift


N_CHECKPOINTS = 16


def _checkpoints(seg) -> np.ndarray:
    return np.linspace(seg.start, seg.end, N_CHECKPOINTS + 2)[1:-1]


def _run(
    state: FockState,
    profile: FrequencyProfile,
    hamiltonian,
    const_hamiltonian,
    t_eval,
    rtol,
    atol,
    moments_transform=None,
    boundary=None,
):
    """Shared driver: integrate all eigen-kets of ``state`` segment by segment.

    ``moments_transform(seg, t, kets)`` maps kets before moments are taken;
    ``boundary(prev, seg, kets)`` is applied when crossing between segments.
    The largest tail population seen at the recorded times and at
    ``N_CHECKPOINTS`` interior points per segment is returned last.
    """
    weights, kets = _kets_of(state)
    dim, K = kets.shape
    omega0 = state.omega0
    means = np.empty((t_eval.size, 2))
    covs = np.empty((t_eval.size, 2, 2))
    peak_tail = 0.0

    def watch(ks):
        nonlocal peak_tail
        p = (np.abs(ks) ** 2) @ weights
        peak_tail = max(peak_tail, tail_population(p))

    def record(idx, ks, t, seg):
        watch(ks)
        if moments_transform is not None:
            ks = moments_transform(seg, t, ks)
        g = _moments_from_kets(ks, weights, omega0)
        means[idx] = g.mean
        covs[idx] = g.cov

    segs = [s for s in profile.segments if s.end > s.start]
    for k, seg in enumerate(segs):
        if k and boundary is not None:
            kets = boundary(segs[k - 1], seg, kets)
        last = k == len(segs) - 1
        mask = (t_eval >= seg.start) & ((t_eval < seg.end) | (last & (t_eval <= seg.end)))
        if k == 0:
            mask |= t_eval < seg.start
        idx = np.nonzero(mask)[0]
        ts = np.clip(t_eval[idx], seg.start, seg.end)
        Hc = const_hamiltonian(seg)
        if Hc is not None:
            E, V = np.linalg.eigh(Hc)
            c0 = V.conj().T @ kets
            for i, t in zip(idx, ts):
                record(i, V @ (np.exp(-1j * E * (t - seg.start))[:, None] * c0), t, seg)
            for t in _checkpoints(seg):
                watch(V @ (np.exp(-1j * E * (t - seg.start))[:, None] * c0))
            kets = V @ (np.exp(-1j * E * seg.duration)[:, None] * c0)
            continue
        H = hamiltonian(seg)

        def rhs(t, y):
            psi = y.reshape(dim, K)
            return (-1j * (H(t) @ psi)).ravel()

        has_end = bool(ts.size) and ts[-1] >= seg.end
        t_req = ts if has_end else np.concatenate([ts, [seg.end]])
        sol = solve_ivp(
            rhs, (seg.start, seg.end), kets.ravel(), method="DOP853", rtol=rtol, atol=atol, t_eval=t_req, dense_output=True
        )
        if sol.status != 0:
            raise NumericalError(f"Schrodinger integration failed in '{seg.label}': {sol.message}")
        for j, (i, t) in enumerate(zip(idx, ts)):
            record(i, sol.y[:, j].reshape(dim, K), t, seg)
        for t in _checkpoints(seg):
            watch(sol.sol(t).reshape(dim, K))
        kets = sol.y[:, -1].reshape(dim, K)
        watch(kets)
    return weights, kets, means, covs, peak_tail


def evolve_fixed_basis(
    state: FockState,
    profile: FrequencyProfile,
    drive: Drive | None = None,
    mass: float = DEFAULT_MASS,
    t_eval=None,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> FockTrajectory:
    """Schrodinger evolution in the number basis of the initial frequency.

    ``H = (w0/4)[(w^2/w0^2 - 1)(a^2 + a^dag^2) + 2(w^2/w0^2 + 1)(n + 1/2)]
    + x0 F0 (a + a^dag)``.
    """
    drive = drive or Drive.none()
    omega0 = profile.omega_initial
    if not math.isclose(state.omega0, omega0, rel_tol=1e-12):
        state = FockState(state.rho, omega0, state.leak_threshold)
    g = _Generators(state.n_max)
    f_scale = ground_width(mass, omega0) / HBAR
    t_eval = profile.times if t_eval is None else np.asarray(t_eval, dtype=float)

    def const_h(seg):
        if seg.constant is None or drive.constant is None:
            return None
        A, B = _fixed_basis_coeffs(seg.constant, omega0)
        return A * g.sq_sum + B * g.num + f_scale * drive.constant * g.x

    def ham(seg):
        wfn = profile.segment_evaluator(seg)

        def H(t):
            A, B = _fixed_basis_coeffs(float(wfn(t)), omega0)
            out = A * g.sq_sum + B * g.num
            if not drive.is_zero:
                out = out + f_scale * float(drive(t)) * g.x
            return out

        return H

    weights, kets, means, covs, tail = _run(state, profile, ham, const_h, t_eval, rtol, atol)
    final, drift = _check_and_build(kets, weights, omega0, state.leak_threshold, peak_tail=tail)
    return FockTrajectory(t_eval, means, covs, profile.omega_at(t_eval), omega0, final, drift)


def _log_rate(profile: FrequencyProfile, seg):
    """``d ln(omega)/dt`` on a segment by central differences."""
    wfn = profile.segment_evaluator(seg)
    if hasattr(wfn, "derivative"):
        dfn = wfn.derivative()
        return lambda t: float(dfn(t)) / float(wfn(t))
    h = 1e-5 * seg.duration

    def rate(t):
        lo, hi = max(t - h, seg.start), min(t + h, seg.end)
        return (math.log(float(wfn(hi))) - math.log(float(wfn(lo)))) / (hi - lo)

    return rate


def frame_squeeze(omega: float, omega0: float, n_max: int) -> np.ndarray:
    """Map from the instantaneous number basis at ``omega`` to the fixed basis."""
    return squeeze_operator(0.5 * math.log(omega / omega0), n_max)


def evolve_instantaneous_frame(
    state: FockState,
    profile: FrequencyProfile,
    drive: Drive | None = None,
    mass: float = DEFAULT_MASS,
    t_eval=None,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    to_fixed_frame: bool = True,
) -> FockTrajectory:
    """Evolution with ``H = w(t)(n + 1/2) - (i/4) d ln w/dt (a^2 - a^dag^2)``.

    The state is carried in the instantaneous number basis. With
    ``to_fixed_frame`` the recorded moments and the final state are mapped
    back to the fixed basis of ``omega(0)`` via ``S(ln(w/w0)/2)``; otherwise
    they are the raw instantaneous-frame values.
    A drive enters as ``x0 F0 sqrt(w0/w) (a + a^dag)``.
    """
    drive = drive or Drive.none()
    omega0 = profile.omega_initial
    if not math.isclose(state.omega0, omega0, rel_tol=1e-12):
        state = FockState(state.rho, omega0, state.leak_threshold)
    n_max = state.n_max
    g = _Generators(n_max)
    f_scale = ground_width(mass, omega0) / HBAR
    t_eval = profile.times if t_eval is None else np.asarray(t_eval, dtype=float)

    def const_h(seg):
        if seg.constant is None or drive.constant is None:
            return None
        w = seg.constant
        return w * g.num + f_scale * drive.constant * math.sqrt(omega0 / w) * g.x

    def ham(seg):
        wfn = profile.segment_evaluator(seg)
        rate = _log_rate(profile, seg)

        def H(t):
            w = float(wfn(t))
            out = w * g.num - 0.25j * rate(t) * g.sq_diff
            if not drive.is_zero:
                out = out + f_scale * float(drive(t)) * math.sqrt(omega0 / w) * g.x
            return out

        return H

    def omega_on(seg, t):
        return seg.constant if seg.constant is not None else float(profile.segment_evaluator(seg)(t))

    def boundary(prev, seg, kets):
        # the instantaneous basis jumps with a discontinuous frequency
        w_prev, w_next = omega_on(prev, prev.end), omega_on(seg, seg.start)
        if w_prev == w_next:
            return kets
        return frame_squeeze(w_prev, w_next, n_max) @ kets

    transform = None
    if to_fixed_frame:

        def transform(seg, t, kets):
            return frame_squeeze(omega_on(seg, t), omega0, n_max) @ kets

    weights, kets, means, covs, tail = _run(state, profile, ham, const_h, t_eval, rtol, atol, transform, boundary)
    if to_fixed_frame:
        kets = frame_squeeze(profile.omega_final, omega0, n_max) @ kets
    final, drift = _check_and_build(kets, weights, omega0, state.leak_threshold, peak_tail=tail)
    return FockTrajectory(t_eval, means, covs, profile.omega_at(t_eval), omega0, final, drift)
