"""Sideband readout simulation, phonon-number reconstruction and Gaussian-state fits."""

from __future__ import annotations

import csv
import functools
import io
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares
from scipy.special import eval_genlaguerre

from .errors import DomainError, FitError, IllPosedError
from .fock import PhononDistribution, annihilation, thermal_populations

KINDS = ("red", "blue")


@dataclass(frozen=True, eq=False)
class SidebandSignal:
    """Spin-down probability versus sideband pulse duration."""

    kind: str
    times: np.ndarray
    p_down: np.ndarray
    shots: int = 0
    rabi0: float = 2 * math.pi * 500e3
    eta: float = 0.1
    gamma: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"sideband kind must be one of {KINDS}")
        t = np.array(self.times, dtype=float)
        p = np.array(self.p_down, dtype=float)
        if t.shape != p.shape or t.ndim != 1 or t.size == 0:
            raise DomainError("times and p_down must be non-empty 1-d arrays of equal length")
        if np.any(t < 0) or np.any(np.diff(t) < 0):
            raise DomainError("times must be non-negative and increasing")
        if np.any(p < 0) or np.any(p > 1):
            raise DomainError("p_down must lie in [0, 1]")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "p_down", p)

    @property
    def rabi_eta(self) -> float:
        return self.rabi0 * self.eta

    def sigma(self) -> np.ndarray:
        """Binomial standard error per point (unit weights for noiseless data)."""
        if self.shots <= 0:
            return np.ones_like(self.p_down)
        k = self.p_down * self.shots
        pt = (k + 1.0) / (self.shots + 2.0)
        return np.sqrt(pt * (1.0 - pt) / self.shots)


def write_signals_csv(signals: Sequence[SidebandSignal], path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t_seconds", "p_down", "shots", "kind"])
    for s in signals:
        for t, p in zip(s.times, s.p_down):
            w.writerow([f"{t:.17g}", f"{p:.17g}", s.shots, s.kind])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def read_signals_csv(source, rabi0: float, eta: float, gamma: float = 0.0) -> list[SidebandSignal]:
    """Parse signal rows; raises :class:`DomainError` naming the first bad row."""
    if isinstance(source, str) and "\n" in source:
        text = source
    else:
        with open(source) as fh:
            text = fh.read()
    reader = csv.DictReader(io.StringIO(text))
    needed = {"t_seconds", "p_down", "shots", "kind"}
    if reader.fieldnames is None or not needed <= set(reader.fieldnames):
        raise DomainError(f"signal CSV needs columns {sorted(needed)}")
    groups: dict[tuple[str, int], list[tuple[float, float]]] = {}
    for lineno, row in enumerate(reader, start=2):
        try:
            t, p = float(row["t_seconds"]), float(row["p_down"])
            shots, kind = int(row["shots"]), row["kind"].strip()
        except (TypeError, ValueError) as exc:
            raise DomainError(f"malformed signal row {lineno}: {exc}") from None
        if kind not in KINDS:
            raise DomainError(f"malformed signal row {lineno}: unknown kind {kind!r}")
        if not (t >= 0 and 0 <= p <= 1) or shots < 0:
            raise DomainError(f"malformed signal row {lineno}: values out of range")
        groups.setdefault((kind, shots), []).append((t, p))
    if not groups:
        raise DomainError("signal CSV contains no data rows")
    out = []
    for (kind, shots), rows in groups.items():
        rows.sort()
        t, p = map(np.array, zip(*rows))
        out.append(SidebandSignal(kind, t, p, shots, rabi0, eta, gamma))
    return out


# ---------------------------------------------------------------------------
# forward model


def sideband_rates(n_levels: int, kind: str, rabi_eta: float, eta: float | None = None) -> np.ndarray:
    """Sideband Rabi rates for number states ``0..n_levels-1``.

    First-order Lamb-Dicke scaling by default; passing ``eta`` uses the full
    Laguerre-polynomial matrix elements instead.
    """
    n = np.arange(n_levels)
    if kind == "blue":
        lo = n
    else:
        lo = n - 1
    if eta is None:
        return rabi_eta * np.sqrt(np.clip(lo + 1, 0, None))
    rabi0 = rabi_eta / eta
    out = np.zeros(n_levels)
    ok = lo >= 0
    m = lo[ok]
    out[ok] = rabi0 * eta * math.exp(-eta**2 / 2) * np.sqrt(1.0 / (m + 1)) * eval_genlaguerre(m, 1, eta**2)
    return np.abs(out)


def _design(kind: str, times: np.ndarray, n_levels: int, rabi_eta: float, gamma: float, eta_full=None):
    """``p_down = 1/2 + A @ P`` and the derivatives of ``A`` w.r.t. rate and decay."""
    rates = sideband_rates(n_levels, kind, rabi_eta, eta_full)
    arg = np.outer(times, rates)
    decay = np.exp(-gamma * times)[:, None]
    A = 0.5 * np.cos(arg) * decay
    dA_drate = -0.5 * np.sin(arg) * decay * (rates / rabi_eta)[None, :] * times[:, None]
    dA_dgamma = -times[:, None] * A
    if kind == "red":
        # n = 0 is dark on the red sideband: constant, no decay
        A[:, 0] = 0.5
        dA_drate[:, 0] = 0.0
        dA_dgamma[:, 0] = 0.0
    return A, dA_drate, dA_dgamma


def sideband_model(p: np.ndarray, kind: str, times, rabi_eta: float, gamma: float = 0.0, eta_full=None) -> np.ndarray:
    """Noiseless ``p_down(t) = (1 + sum_n P_n cos(Omega_n t) e^{-gamma t}) / 2``."""
    times = np.asarray(times, dtype=float)
    A, _, _ = _design(kind, times, len(p), rabi_eta, gamma, eta_full)
    return np.clip(0.5 + A @ np.asarray(p, dtype=float), 0.0, 1.0)


def simulate_sideband(
    dist: PhononDistribution,
    kind: str,
    rabi0: float,
    eta: float,
    gamma: float,
    times,
    shots: int = 0,
    seed: int | None = None,
    full_lamb_dicke: bool = False,
) -> SidebandSignal:
    """Synthetic sideband flop, with binomial shot noise when ``shots > 0``."""
    if kind not in KINDS:
        raise DomainError(f"sideband kind must be one of {KINDS}")
    times = np.asarray(times, dtype=float)
    p = sideband_model(dist.p, kind, times, rabi0 * eta, gamma, eta if full_lamb_dicke else None)
    if shots > 0:
        rng = np.random.default_rng(seed)
        p = rng.binomial(shots, p) / shots
    return SidebandSignal(kind, times, p, shots, rabi0, eta, gamma)


# ---------------------------------------------------------------------------
# reconstruction


@dataclass(frozen=True, eq=False)
class Reconstruction:
    dist: PhononDistribution
    rabi_eta: float
    gamma: float
    rabi_eta_err: float
    gamma_err: float
    chi2_reduced: float


def reconstruct(
    signals: Sequence[SidebandSignal],
    n_max: int = 8,
    fit_rabi: bool = True,
    fit_gamma: bool = True,
    p_guess: Sequence[float] | None = None,
    reweight: int = 2,
) -> Reconstruction:
    """Weighted least-squares fit of ``P_0..P_nmax`` (plus rate and decay) to sideband data.

    ``P_0`` is eliminated through the normalization, so ``sum P = 1`` holds
    exactly; the remaining populations are bounded to ``[0, 1]``. Shot-noise
    weights start from the data and are then recomputed ``reweight`` times
    from the fitted curve, which removes the bias of data-derived weights.
    """
    signals = list(signals)
    if not signals:
        raise DomainError("need at least one sideband signal")
    if all(s.kind == "red" for s in signals) and np.mean(signals[0].p_down) > 0.95:
        warnings.warn("red-sideband data of a near-vacuum state constrain P_n poorly", stacklevel=2)
    L = n_max + 1
    rate0 = float(np.median([s.rabi_eta for s in signals]))
    gamma0 = float(np.median([s.gamma for s in signals]))
    ys = [s.p_down for s in signals]
    ws = [1.0 / s.sigma() for s in signals]
    n_data = sum(y.size for y in ys)

    def unpack(x):
        q = x[: L - 1]
        rate = x[L - 1] if fit_rabi else rate0
        gam = x[L - 1 + fit_rabi] if fit_gamma else gamma0
        return np.concatenate([[1.0 - q.sum()], q]), rate, gam

    def residuals(x):
        P, rate, gam = unpack(x)
        out = []
        for s, y, w in zip(signals, ys, ws):
            A, _, _ = _design(s.kind, s.times, L, rate, gam)
            out.append(w * (0.5 + A @ P - y))
        # P_0 >= 0 enforced as a stiff penalty
        out.append(np.array([1e6 * min(P[0], 0.0)]))
        return np.concatenate(out)

    def jacobian(x):
        P, rate, gam = unpack(x)
        rows = []
        for s, w in zip(signals, ws):
            A, dr, dg = _design(s.kind, s.times, L, rate, gam)
            cols = [A[:, 1:] - A[:, [0]]]
            if fit_rabi:
                cols.append((dr @ P)[:, None])
            if fit_gamma:
                cols.append((dg @ P)[:, None])
            rows.append(w[:, None] * np.hstack(cols))
        pen = np.zeros((1, rows[0].shape[1]))
        if P[0] < 0:
            pen[0, : L - 1] = -1e6
        rows.append(pen)
        return np.vstack(rows)

    if p_guess is None:
        p_guess = thermal_populations(0.5, n_max)
        p_guess = p_guess / p_guess.sum()
    x0 = list(np.asarray(p_guess, dtype=float)[1:L])
    lo, hi = [0.0] * (L - 1), [1.0] * (L - 1)
    if fit_rabi:
        x0.append(rate0)
        lo.append(0.5 * rate0)
        hi.append(2.0 * rate0)
    if fit_gamma:
        g_scale = 1.0 / max(max(s.times.max() for s in signals), 1e-30)
        x0.append(max(gamma0, 0.0))
        lo.append(0.0)
        hi.append(100.0 * g_scale)
    x0 = np.clip(np.array(x0), lo, hi)
    for it in range(1 + reweight):
        sol = least_squares(
            residuals, x0, jac=jacobian, bounds=(lo, hi), method="trf", x_scale="jac", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000
        )
        if not sol.success and sol.status == 0:
            raise FitError(f"population reconstruction did not converge after {sol.nfev} evaluations: {sol.message}")
        if it == reweight or all(s.shots <= 0 for s in signals):
            break
        # binomial errors from the fitted curve rather than the noisy data
        P, rate, gam = unpack(sol.x)
        for i, s in enumerate(signals):
            if s.shots > 0:
                A, _, _ = _design(s.kind, s.times, L, rate, gam)
                pm = np.clip(0.5 + A @ P, 0.5 / s.shots, 1.0 - 0.5 / s.shots)
                ws[i] = 1.0 / np.sqrt(pm * (1.0 - pm) / s.shots)
        x0 = sol.x
    P, rate, gam = unpack(sol.x)
    P = np.clip(P, 0.0, None)
    P = P / P.sum()
    # curvature covariance over all parameters, including those resting on a
    # bound, so that populations fitted to zero still carry an honest error
    J = sol.jac[:-1]
    s_vals = np.linalg.svd(J, compute_uv=False)
    if s_vals.size == 0 or s_vals[-1] <= 1e-12 * s_vals[0]:
        raise IllPosedError("sideband data do not determine the populations (rank-deficient design)")
    cov_x = np.linalg.inv(J.T @ J)
    n_par = x0.size
    free = sol.active_mask == 0
    # map the reduced parameters back to all L populations
    T = np.zeros((L, n_par))
    T[0, : L - 1] = -1.0
    T[1:, : L - 1] = np.eye(L - 1)
    cov_P = T @ cov_x @ T.T
    sigma = np.sqrt(np.clip(np.diag(cov_P), 0.0, None))
    dof = max(n_data - int(free.sum()), 1)
    chi2 = float(np.sum(sol.fun[:-1] ** 2) / dof)
    rate_err = float(math.sqrt(cov_x[L - 1, L - 1])) if fit_rabi else 0.0
    gam_err = float(math.sqrt(cov_x[-1, -1])) if fit_gamma else 0.0
    return Reconstruction(PhononDistribution(P, sigma, cov_P), float(rate), float(gam), rate_err, gam_err, chi2)


def reconstruct_pn(signals: Sequence[SidebandSignal], n_max: int = 8, **kw) -> PhononDistribution:
    """Phonon-number distribution reconstructed from sideband signals."""
    return reconstruct(signals, n_max=n_max, **kw).dist


# ---------------------------------------------------------------------------
# parametrized Gaussian-state distribution


class PnModel:
    """Fast ``P_n`` of ``S(r e^{i theta}) D(alpha) rho_th D^dag S^dag``.

    Exponentials of the real displacement and squeezing generators are
    evaluated through one cached eigendecomposition each, so a model
    evaluation is a couple of matrix products.
    """

    def __init__(self, n_max: int = 80):
        self.n_max = n_max
        a = annihilation(n_max)
        gen_d = a.T - a  # D(alpha) = exp(alpha * gen_d) for real alpha
        gen_s = 0.5 * (a @ a - (a @ a).T)  # S(r) = exp(r * gen_s) for real r
        self._d = np.linalg.eigh(1j * gen_d)
        self._s = np.linalg.eigh(1j * gen_s)
        self._n = np.arange(n_max + 1)

    @staticmethod
    def _exp(eig, x):
        lam, V = eig
        return (V * np.exp(-1j * x * lam)) @ V.conj().T

    def unitary(self, r: float, theta: float, alpha: float) -> np.ndarray:
        D = self._exp(self._d, alpha)
        S = self._exp(self._s, r)
        phase = np.exp(0.5j * theta * self._n)
        # S(r e^{i theta}) = R S(r) R^dag with R = exp(i theta n / 2)
        S = phase[:, None] * S * phase.conj()[None, :]
        return S @ D

    def __call__(self, r: float, theta: float, alpha: float, n_th: float) -> np.ndarray:
        U = self.unitary(r, theta, alpha)
        p_th = thermal_populations(n_th, self.n_max)
        return (np.abs(U) ** 2) @ p_th


@functools.lru_cache(maxsize=4)
def _model(n_max: int) -> PnModel:
    return PnModel(n_max)


def pn_parametrized(r: float, theta_rel: float, abs_alpha: float, n_th: float, n_max: int = 80) -> np.ndarray:
    """``P_n^par`` on ``0..n_max``."""
    return _model(n_max)(r, theta_rel, abs_alpha, n_th)


@dataclass(frozen=True)
class FitResult:
    r: float
    theta_rel: float
    abs_alpha: float
    n_th: float
    r_err: float
    theta_rel_err: float
    abs_alpha_err: float
    n_th_err: float
    chi2_reduced: float
    at_bound: tuple[str, ...] = field(default_factory=tuple)

    def to_json(self) -> str:
        d = asdict(self)
        d["at_bound"] = list(self.at_bound)
        return json.dumps(d, indent=1, sort_keys=True)


_BOUNDS = {"r": (0.0, 3.0), "theta_rel": (-math.pi, 3 * math.pi), "abs_alpha": (0.0, 4.0), "n_th": (0.0, 3.0)}


def fit_parametrized(
    dist: PhononDistribution,
    n_th: float | None = None,
    starts: int = 8,
    n_max_model: int = 80,
    renormalize: bool = True,
) -> FitResult:
    """Fit ``(r, theta_rel, |alpha|, n_th)`` of a displaced squeezed thermal state.

    Parameters
    ----------
    dist
        Populations to fit. Per-bin ``sigma`` sets the weights; when a full
        ``cov`` is present the parameter covariance is propagated through it
        (sandwich estimator), otherwise ``sigma`` is treated as independent.
    n_th
        Freeze the thermal occupation at this value; fitted if ``None``.
    starts
        Number of starting phases spread over ``[0, 2 pi)``.
    renormalize
        Compare against the model renormalized over the observed bins, which
        matches a reconstruction normalized on a truncated range.
    """
    p_obs = dist.p
    L = p_obs.size
    sigma = dist.sigma if dist.sigma is not None else np.full(L, 1e-3)
    sigma = np.where(sigma > 0, sigma, np.max(sigma[sigma > 0]) if np.any(sigma > 0) else 1e-3)
    # floor tiny errors of bins at the boundary so they cannot dominate
    sigma = np.maximum(sigma, 1e-6 * max(float(np.max(sigma)), 1e-12))
    model = _model(n_max_model)
    names = ["r", "theta_rel", "abs_alpha"] + (["n_th"] if n_th is None else [])

    def predict(x):
        nt = x[3] if n_th is None else n_th
        p = model(x[0], x[1], x[2], nt)[:L]
        if renormalize:
            p = p / p.sum()
        return p

    def residuals(x):
        return (predict(x) - p_obs) / sigma

    lo = [_BOUNDS[k][0] for k in names]
    hi = [_BOUNDS[k][1] for k in names]
    best = None
    mean_n = float(np.dot(np.arange(L), p_obs))
    r0 = 0.5 * math.asinh(math.sqrt(max(mean_n, 1e-4)))
    for k in range(starts):
        for a0 in (0.1, math.sqrt(max(mean_n, 0.01))):
            x0 = [r0, 2 * math.pi * k / starts, min(a0, 3.0)]
            if n_th is None:
                x0.append(0.05)
            # coarse pass from every start, then refine the best one
            sol = least_squares(residuals, np.clip(x0, lo, hi), bounds=(lo, hi), method="trf", xtol=1e-6, ftol=1e-6, gtol=1e-6, max_nfev=60)
            if best is None or sol.cost < best.cost:
                best = sol
    if best is not None:
        best = least_squares(residuals, best.x, bounds=(lo, hi), method="trf", xtol=1e-13, ftol=1e-13, gtol=1e-13, max_nfev=2000)
    if best is None or not np.all(np.isfinite(best.x)):
        raise FitError("parametrized fit failed")
    x = best.x.copy()
    J = best.jac
    # sandwich covariance: parameters as a linear function of the populations
    H = J.T @ J
    Hinv = np.linalg.pinv(H, rcond=1e-12)
    G = Hinv @ (J.T / sigma[None, :])
    if dist.cov is not None and dist.cov.shape == (L, L):
        cov = G @ dist.cov @ G.T
    else:
        cov = G @ np.diag(sigma**2) @ G.T
    errs = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    dof = max(L - len(names), 1)
    chi2 = float(2 * best.cost / dof)
    at_bound = tuple(
        k for k, v, a, b in zip(names, x, lo, hi) if k != "theta_rel" and (abs(v - a) < 1e-9 or abs(v - b) < 1e-9)
    )
    r, th, al = float(x[0]), float(x[1]), float(x[2])
    # P_n is even in theta and 2 pi periodic: fold into [0, pi]
    th = th % (2 * math.pi)
    if th > math.pi:
        th = 2 * math.pi - th
    nt_val = float(x[3]) if n_th is None else float(n_th)
    nt_err = float(errs[3]) if n_th is None else 0.0
    return FitResult(r, th, al, nt_val, float(errs[0]), float(errs[1]), float(errs[2]), nt_err, chi2, at_bound)
