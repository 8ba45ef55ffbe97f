"""Trap frequency programs: calibration, pulse shapes, filtering and diagnostics.

All frequencies are angular (rad/s), times in seconds, voltages in volts.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy import interpolate, optimize, signal
from scipy.integrate import cumulative_trapezoid
from scipy.special import comb

from .errors import CalibrationRangeError, DomainError, ModeInversionError

TWO_PI = 2.0 * math.pi
MHZ = TWO_PI * 1e6


# ---------------------------------------------------------------------------
# smooth steps


def smoothstep(s, order: int = 2):
    """C^k smooth-step polynomial of degree ``2*order + 1``.

    ``order=1`` is ``3s^2 - 2s^3``, ``order=2`` is ``10s^3 - 15s^4 + 6s^5``,
    ``order=3`` is ``35s^4 - 84s^5 + 70s^6 - 20s^7``. ``order=0`` is linear.
    The first ``order`` derivatives vanish at both ends.
    """
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0.0) or np.any(s_arr > 1.0) or np.any(np.isnan(s_arr)):
        raise DomainError("smoothstep argument must lie in [0, 1]")
    if order < 0:
        raise DomainError("smoothstep order must be non-negative")
    k = int(order)
    # evaluate on the lower half only; the alternating sum cancels badly near 1
    upper = s_arr > 0.5
    x = np.where(upper, 1.0 - s_arr, s_arr)
    total = np.zeros_like(x)
    for j in range(k + 1):
        total += comb(k + j, j, exact=True) * comb(2 * k + 1, k - j, exact=True) * (-x) ** j
    low = x ** (k + 1) * total
    out = np.where(upper, 1.0 - low, low)
    return float(out) if np.ndim(s) == 0 else out


def smoothstep_derivative(s, order: int = 2):
    """Derivative of :func:`smoothstep` with respect to ``s``."""
    s_arr = np.asarray(s, dtype=float)
    k = int(order)
    # d/ds of s^(k+1) * sum_j c_j (-s)^j
    out = np.zeros_like(s_arr)
    for j in range(k + 1):
        c = comb(k + j, j, exact=True) * comb(2 * k + 1, k - j, exact=True) * (-1) ** j
        out += c * (k + 1 + j) * s_arr ** (k + j)
    return float(out) if np.ndim(s) == 0 else out


# ---------------------------------------------------------------------------
# calibration


@dataclass(frozen=True)
class TrapCalibration:
    """Radial pseudopotential model ``omega_mf(U) = sqrt((kappa_rf U)^2 - omega_dc^2)``.

    Attributes
    ----------
    kappa_rf : float
        Pseudopotential slope in rad/s per volt.
    omega_dc : float
        Dc defocusing offset of the radial mode (rad/s).
    omega_lf : float
        Axial mode frequency (rad/s), taken independent of ``U``.
    """

    kappa_rf: float
    omega_dc: float
    omega_lf: float

    def __post_init__(self):
        if not self.kappa_rf > 0:
            raise DomainError("kappa_rf must be positive")
        if self.omega_dc < 0:
            raise DomainError("omega_dc must be non-negative")
        if not self.omega_lf > 0:
            raise DomainError("omega_lf must be positive")

    @property
    def u_threshold(self) -> float:
        """Lowest voltage at which the rocking mode is still confined."""
        return math.sqrt(self.omega_dc**2 + self.omega_lf**2) / self.kappa_rf

    def omega_a(self, U):
        """Rocking-mode frequency at voltage ``U``."""
        return rocking_from_modes(omega_of_U(U, self), self.omega_lf)

    def voltage_for(self, omega_a: float) -> float:
        """Voltage at which the rocking mode has frequency ``omega_a``."""
        return math.sqrt(omega_a**2 + self.omega_lf**2 + self.omega_dc**2) / self.kappa_rf

    def to_dict(self) -> dict:
        return {"kappa_rf": self.kappa_rf, "omega_dc": self.omega_dc, "omega_lf": self.omega_lf}

    @classmethod
    def from_dict(cls, data: dict) -> "TrapCalibration":
        return cls(float(data["kappa_rf"]), float(data["omega_dc"]), float(data["omega_lf"]))

    @classmethod
    def from_json(cls, path) -> "TrapCalibration":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def omega_of_U(U, cal: TrapCalibration):
    """Radial (mid-frequency) mode frequency for rf voltage ``U``."""
    U_arr = np.asarray(U, dtype=float)
    sq = (cal.kappa_rf * U_arr) ** 2 - cal.omega_dc**2
    if np.any(sq <= 0.0):
        raise CalibrationRangeError(
            f"voltage below the confinement threshold {cal.omega_dc / cal.kappa_rf:.6g} V"
        )
    out = np.sqrt(sq)
    return float(out) if np.ndim(U) == 0 else out


def rocking_from_modes(omega_mf, omega_lf):
    """Rocking-mode frequency ``sqrt(omega_mf^2 - omega_lf^2)`` of a two-ion crystal."""
    mf = np.asarray(omega_mf, dtype=float)
    lf = np.asarray(omega_lf, dtype=float)
    if np.any(mf <= lf):
        raise ModeInversionError("radial frequency must exceed the axial frequency")
    out = np.sqrt(mf**2 - lf**2)
    return float(out) if np.ndim(out) == 0 else out


def fit_calibration(U: Sequence[float], omega_mf: Sequence[float], omega_lf: float) -> TrapCalibration:
    """Fit ``kappa_rf`` and ``omega_dc`` to measured radial frequencies.

    The model is linear in ``kappa_rf**2`` and ``omega_dc**2`` once squared,
    so an ordinary linear least-squares solve is exact for noiseless data.
    """
    U = np.asarray(U, dtype=float)
    w = np.asarray(omega_mf, dtype=float)
    if U.size < 2:
        raise DomainError("need at least two calibration points")
    design = np.column_stack([U**2, -np.ones_like(U)])
    # scale columns for conditioning
    scale = np.array([1.0 / np.max(U**2), 1.0])
    coef, *_ = np.linalg.lstsq(design * scale, w**2, rcond=None)
    k2, dc2 = coef * scale
    if k2 <= 0:
        raise DomainError("calibration data do not increase with voltage")
    return TrapCalibration(math.sqrt(k2), math.sqrt(max(dc2, 0.0)), omega_lf)


def calibration_from_endpoints(
    omega_a_high: float,
    omega_a_low: float,
    U_high: float,
    U_low: float,
    mf_span: float,
) -> TrapCalibration:
    """Build a calibration from the rocking-mode endpoints and the radial-mode span.

    ``mf_span`` is ``omega_mf(U_high) - omega_mf(U_low)``; it fixes the axial
    frequency, after which ``kappa_rf`` and ``omega_dc`` follow from the two
    voltage endpoints.
    """

    def span(lf2):
        return math.sqrt(omega_a_high**2 + lf2) - math.sqrt(omega_a_low**2 + lf2) - mf_span

    hi = omega_a_high**2
    while span(hi) > 0:
        hi *= 4.0
    lf2 = optimize.brentq(span, 0.0, hi, xtol=1e-30, rtol=1e-15)
    mf_h2 = omega_a_high**2 + lf2
    mf_l2 = omega_a_low**2 + lf2
    k2 = (mf_h2 - mf_l2) / (U_high**2 - U_low**2)
    dc2 = k2 * U_high**2 - mf_h2
    if dc2 < 0:
        raise DomainError("voltage endpoints imply a negative dc offset")
    return TrapCalibration(math.sqrt(k2), math.sqrt(dc2), math.sqrt(lf2))


def reference_calibration() -> TrapCalibration:
    """Calibration reproducing the published 2.5 -> 0.5 MHz rocking-mode span.

    The radial mode spans 1.48 MHz between the two endpoints; the voltages
    (500 V and 250 V) are a free choice because only the frequency
    endpoints enter the dynamics.
    """
    return calibration_from_endpoints(2.5 * MHZ, 0.5 * MHZ, 500.0, 250.0, 1.48 * MHZ)


# ---------------------------------------------------------------------------
# profiles


@dataclass(frozen=True)
class Segment:
    """Labeled time interval of a profile.

    Exactly one of ``constant`` or ``omega_fn`` is normally set; a segment
    with neither is evaluated from the profile samples.
    """

    label: str
    start: float
    end: float
    constant: float | None = None
    omega_fn: Callable | None = field(default=None, compare=False, repr=False)

    @property
    def duration(self) -> float:
        return self.end - self.start

    def shifted(self, dt: float) -> "Segment":
        fn = self.omega_fn
        if fn is not None:
            fn = _shift_fn(fn, dt)
        return replace(self, start=self.start + dt, end=self.end + dt, omega_fn=fn)


def _shift_fn(fn, dt):
    return lambda t: fn(np.asarray(t) - dt)


@dataclass(frozen=True, eq=False)
class FrequencyProfile:
    """Sampled trap-frequency program ``omega(t)``.

    The samples live on a uniform grid. Segments carry exact evaluators where
    the profile is analytic; otherwise ``omega_at`` interpolates the samples
    with a C2 cubic spline.
    """

    times: np.ndarray
    omega: np.ndarray
    segments: tuple[Segment, ...]
    voltage: np.ndarray | None = None
    calibration: TrapCalibration | None = None

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        w = np.array(self.omega, dtype=float)
        if t.ndim != 1 or t.shape != w.shape or t.size < 2:
            raise DomainError("times and omega must be 1-d arrays of equal length >= 2")
        if np.any(np.diff(t) <= 0):
            raise DomainError("profile times must be strictly increasing")
        if not np.all(w > 0) or not np.all(np.isfinite(w)):
            raise DomainError("profile frequency must be positive and finite")
        t.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "omega", w)
        if self.voltage is not None:
            v = np.array(self.voltage, dtype=float)
            if v.shape != t.shape:
                raise DomainError("voltage samples must match the time grid")
            v.flags.writeable = False
            object.__setattr__(self, "voltage", v)
        segs = tuple(self.segments) or (Segment("profile", float(t[0]), float(t[-1])),)
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "_spline", None)

    # -- evaluation -------------------------------------------------------
    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    @property
    def omega_initial(self) -> float:
        return float(self.omega_at(self.t_start))

    @property
    def omega_final(self) -> float:
        return float(self.omega_at(self.t_end))

    def _sample_spline(self):
        if self._spline is None:
            object.__setattr__(self, "_spline", interpolate.CubicSpline(self.times, self.omega))
        return self._spline

    def segment_evaluator(self, seg: Segment) -> Callable:
        if seg.constant is not None:
            c = float(seg.constant)
            return lambda t: np.full(np.shape(t), c) if np.ndim(t) else c
        if seg.omega_fn is not None:
            return seg.omega_fn
        return self._sample_spline()

    def omega_at(self, t):
        """Evaluate ``omega`` at arbitrary times (right-continuous at jumps)."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty_like(t_arr)
        done = np.zeros(t_arr.shape, dtype=bool)
        for i, seg in enumerate(self.segments):
            last = i == len(self.segments) - 1
            mask = (t_arr >= seg.start) & ((t_arr < seg.end) | (last & (t_arr <= seg.end))) & ~done
            if np.any(mask):
                out[mask] = self.segment_evaluator(seg)(t_arr[mask])
                done |= mask
        if not np.all(done):
            # outside the segments: hold the end values
            out[~done & (t_arr < self.segments[0].start)] = self.omega[0]
            out[~done & (t_arr > self.segments[-1].end)] = self.omega[-1]
        return float(out[0]) if np.ndim(t) == 0 else out

    def segment_labels(self) -> list[str]:
        """Label of the segment containing each grid sample."""
        labels = []
        j = 0
        for t in self.times:
            while j < len(self.segments) - 1 and t >= self.segments[j].end:
                j += 1
            labels.append(self.segments[j].label)
        return labels

    # -- serialization ----------------------------------------------------
    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t_seconds", "omega_rad_per_s", "segment_label"])
        for t, w, lab in zip(self.times, self.omega, self.segment_labels()):
            writer.writerow([f"{t:.17g}", f"{w:.17g}", lab])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "FrequencyProfile":
        """Read a profile written by :meth:`to_csv` (path or text)."""
        if isinstance(source, str) and "\n" in source:
            text = source
        else:
            with open(source) as fh:
                text = fh.read()
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise DomainError("profile CSV contains no samples")
        t = np.array([float(r["t_seconds"]) for r in rows])
        w = np.array([float(r["omega_rad_per_s"]) for r in rows])
        labels = [r.get("segment_label") or "profile" for r in rows]
        segments = []
        start = 0
        for i in range(1, len(labels) + 1):
            if i == len(labels) or labels[i] != labels[start]:
                end_t = t[i] if i < len(labels) else t[-1]
                segments.append(Segment(labels[start], float(t[start]), float(end_t)))
                start = i
        return cls(t, w, tuple(segments))

    def to_json(self, spec: dict | None = None) -> str:
        data = {
            "spec": spec or {},
            "segments": [{"label": s.label, "start": s.start, "end": s.end} for s in self.segments],
            "t_seconds": self.times.tolist(),
            "omega_rad_per_s": self.omega.tolist(),
        }
        if self.voltage is not None:
            data["voltage"] = self.voltage.tolist()
        if self.calibration is not None:
            data["calibration"] = self.calibration.to_dict()
        return json.dumps(data, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "FrequencyProfile":
        data = json.loads(text)
        segs = tuple(Segment(s["label"], float(s["start"]), float(s["end"])) for s in data["segments"])
        cal = data.get("calibration")
        return cls(
            np.array(data["t_seconds"]),
            np.array(data["omega_rad_per_s"]),
            segs,
            voltage=np.array(data["voltage"]) if "voltage" in data else None,
            calibration=TrapCalibration.from_dict(cal) if cal else None,
        )


def default_grid_dt(omega_max: float) -> float:
    return 1.0 / (50.0 * omega_max)


def _uniform_grid(t0: float, t1: float, grid_dt: float) -> np.ndarray:
    n = max(int(math.ceil((t1 - t0) / grid_dt - 1e-9)), 1)
    return np.linspace(t0, t1, n + 1)


def profile_from_segments(
    segments: Sequence[Segment],
    grid_dt: float | None = None,
    voltage_fn: Callable | None = None,
    calibration: TrapCalibration | None = None,
) -> FrequencyProfile:
    """Sample analytic segments onto a uniform grid."""
    segments = tuple(segments)
    t0, t1 = segments[0].start, segments[-1].end
    if grid_dt is None:
        probe = FrequencyProfile(np.array([t0, t1]), np.ones(2), segments)
        fine = np.linspace(t0, t1, 2001)
        grid_dt = default_grid_dt(float(np.max(probe.omega_at(fine))))
    times = _uniform_grid(t0, t1, grid_dt)
    probe = FrequencyProfile(np.array([t0, t1]), np.ones(2), segments)
    omega = probe.omega_at(times)
    voltage = voltage_fn(times) if voltage_fn is not None else None
    return FrequencyProfile(times, omega, segments, voltage=voltage, calibration=calibration)


def constant_profile(omega: float, duration: float, grid_dt: float | None = None, label: str = "free"):
    seg = Segment(label, 0.0, float(duration), constant=float(omega))
    return profile_from_segments([seg], grid_dt or default_grid_dt(omega))


def step_profile(omega_before: float, omega_after: float, t_step: float, duration: float, grid_dt=None):
    """Instantaneous switch of the frequency at ``t_step``."""
    if not 0 < t_step < duration:
        raise DomainError("need 0 < t_step < duration")
    segs = [
        Segment("before", 0.0, float(t_step), constant=float(omega_before)),
        Segment("after", float(t_step), float(duration), constant=float(omega_after)),
    ]
    return profile_from_segments(segs, grid_dt or default_grid_dt(max(omega_before, omega_after)))


# ---------------------------------------------------------------------------
# pulses


@dataclass(frozen=True)
class PulseSpec:
    """One down-hold-up pulse of the rf voltage."""

    t_ramp: float
    t_hold: float
    U_high: float
    U_low: float
    smooth_order: int = 2
    t_delay: float = 0.0
    filter_bandwidth: float = 0.0

    def __post_init__(self):
        if not self.t_ramp > 0:
            raise DomainError("t_ramp must be positive")
        if self.t_hold < 0 or self.t_delay < 0 or self.filter_bandwidth < 0:
            raise DomainError("t_hold, t_delay and filter_bandwidth must be non-negative")
        if not self.U_high > self.U_low > 0:
            raise DomainError("need U_high > U_low > 0")

    @property
    def duration(self) -> float:
        return 2.0 * self.t_ramp + self.t_hold

    def to_dict(self) -> dict:
        return {
            "t_ramp": self.t_ramp,
            "t_hold": self.t_hold,
            "U_high": self.U_high,
            "U_low": self.U_low,
            "smooth_order": self.smooth_order,
            "t_delay": self.t_delay,
            "filter_bandwidth": self.filter_bandwidth,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PulseSpec":
        return cls(**{k: data[k] for k in cls.__dataclass_fields__ if k in data})


# Hold time of the reference pulse. Not published; chosen so that the single
# pulse lands in the experimentally observed squeezing range and the echo
# sequence purifies the displacement (see README).
REFERENCE_T_HOLD = 0.08e-6


def reference_pulse(t_hold: float = REFERENCE_T_HOLD, **overrides) -> PulseSpec:
    """Pulse spanning 2.5 -> 0.5 MHz in 1 us ramps with the reference calibration."""
    cal = reference_calibration()
    U_high = cal.voltage_for(2.5 * MHZ)
    U_low = cal.voltage_for(0.5 * MHZ)
    params = dict(t_ramp=1e-6, t_hold=t_hold, U_high=U_high, U_low=U_low, smooth_order=2)
    params.update(overrides)
    return PulseSpec(**params)


def _ramp_voltage(U_from, U_to, t0, T, order):
    def fn(t):
        s = np.clip((np.asarray(t, dtype=float) - t0) / T, 0.0, 1.0)
        return U_from + (U_to - U_from) * smoothstep(s, order)

    return fn


def _pulse_segments(spec: PulseSpec, cal: TrapCalibration, t0: float, prefix: str = ""):
    """Segments and voltage pieces of one pulse starting at ``t0``."""
    T, h = spec.t_ramp, spec.t_hold
    down = _ramp_voltage(spec.U_high, spec.U_low, t0, T, spec.smooth_order)
    up = _ramp_voltage(spec.U_low, spec.U_high, t0 + T + h, T, spec.smooth_order)
    w_low = cal.omega_a(spec.U_low)
    segs = [Segment(prefix + "ramp_down", t0, t0 + T, omega_fn=lambda t, f=down: cal.omega_a(f(t)))]
    volts = [(t0, t0 + T, down)]
    if h > 0:
        segs.append(Segment(prefix + "hold", t0 + T, t0 + T + h, constant=w_low))
        volts.append((t0 + T, t0 + T + h, lambda t: np.full(np.shape(t), spec.U_low)))
    segs.append(Segment(prefix + "ramp_up", t0 + T + h, t0 + 2 * T + h, omega_fn=lambda t, f=up: cal.omega_a(f(t))))
    volts.append((t0 + T + h, t0 + 2 * T + h, up))
    return segs, volts


def _piecewise_voltage(pieces, default):
    def fn(t):
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, float(default))
        for a, b, f in pieces:
            m = (t >= a) & (t <= b)
            if np.any(m):
                out[m] = f(t[m])
        return out

    return fn


def _finish(segs, volt_pieces, spec: PulseSpec, cal: TrapCalibration, grid_dt):
    if grid_dt is None:
        grid_dt = default_grid_dt(cal.omega_a(spec.U_high))
    vfn = _piecewise_voltage(volt_pieces, spec.U_high)
    prof = profile_from_segments(segs, grid_dt, voltage_fn=vfn, calibration=cal)
    if spec.filter_bandwidth > 0:
        prof = filter_distort(prof, spec.filter_bandwidth, spec.t_delay)
    return prof


def build_pulse(spec: PulseSpec, cal: TrapCalibration, grid_dt: float | None = None) -> FrequencyProfile:
    """Ramp down, hold at ``U_low``, ramp back up.

    When ``spec.filter_bandwidth`` is non-zero the voltage waveform is passed
    through :func:`filter_distort`.
    """
    segs, volts = _pulse_segments(spec, cal, 0.0)
    return _finish(segs, volts, spec, cal, grid_dt)


def build_echo(pulse: PulseSpec, t_free: float, cal: TrapCalibration, grid_dt: float | None = None) -> FrequencyProfile:
    """Two identical pulses separated by ``t_free`` at ``omega(U_high)``."""
    if t_free < 0:
        raise DomainError("t_free must be non-negative")
    s1, v1 = _pulse_segments(pulse, cal, 0.0, "p1_")
    t1 = pulse.duration
    segs = list(s1)
    if t_free > 0:
        segs.append(Segment("free", t1, t1 + t_free, constant=cal.omega_a(pulse.U_high)))
    s2, v2 = _pulse_segments(pulse, cal, t1 + t_free, "p2_")
    segs += s2
    return _finish(segs, v1 + v2, pulse, cal, grid_dt)


def build_ramp(
    U_from: float,
    U_to: float,
    t_ramp: float,
    cal: TrapCalibration,
    smooth_order: int = 2,
    grid_dt: float | None = None,
) -> FrequencyProfile:
    """A single smooth-step ramp of the voltage between two levels."""
    if not t_ramp > 0:
        raise DomainError("t_ramp must be positive")
    f = _ramp_voltage(U_from, U_to, 0.0, t_ramp, smooth_order)
    label = "ramp_up" if U_to > U_from else "ramp_down"
    seg = Segment(label, 0.0, t_ramp, omega_fn=lambda t: cal.omega_a(f(t)))
    if grid_dt is None:
        grid_dt = default_grid_dt(cal.omega_a(max(U_from, U_to)))
    return profile_from_segments([seg], grid_dt, voltage_fn=f, calibration=cal)


# ---------------------------------------------------------------------------
# bandwidth distortion


def lowpass(u: np.ndarray, dt: float, bandwidth: float) -> np.ndarray:
    """First-order low-pass of a uniformly sampled, piecewise-linear signal.

    Uses the ramp-invariant discretization, which is exact for inputs that
    are linear between samples. The filter starts in steady state.
    """
    u = np.asarray(u, dtype=float)
    tau = 1.0 / (TWO_PI * bandwidth)
    x = dt / tau
    a = math.exp(-x)
    # 1 - (1 - a)/x, written to stay accurate for small x
    b1 = 1.0 + math.expm1(-x) / x
    b0 = -math.expm1(-x) - b1
    b = np.array([b1, b0])
    den = np.array([1.0, -a])
    zi = signal.lfilter_zi(b, den) * u[0]
    y, _ = signal.lfilter(b, den, u, zi=zi)
    return y


def filter_distort(profile: FrequencyProfile, bandwidth: float, t_delay: float = 0.0) -> FrequencyProfile:
    """Low-pass filter the voltage waveform behind ``profile`` and re-map to ``omega``.

    The grid is extended by ``t_delay`` plus five filter time constants so
    that the delayed, filtered waveform settles inside the profile.
    """
    if not bandwidth > 0:
        raise DomainError("bandwidth must be positive")
    if profile.voltage is None or profile.calibration is None:
        raise DomainError("profile carries no voltage waveform to filter")
    cal = profile.calibration
    t = profile.times
    dt = float(t[1] - t[0])
    if not np.allclose(np.diff(t), dt, rtol=1e-6, atol=0):
        raise DomainError("filtering needs a uniform time grid")
    tau = 1.0 / (TWO_PI * bandwidth)
    n_extra = int(math.ceil((t_delay + 5.0 * tau) / dt))
    t_ext = t[0] + dt * np.arange(t.size + n_extra)
    u_ext = np.concatenate([profile.voltage, np.full(n_extra, profile.voltage[-1])])
    y = lowpass(u_ext, dt, bandwidth)
    if t_delay > 0:
        y = np.interp(t_ext - t_delay, t_ext, y, left=y[0])
    omega = cal.omega_a(y)
    segs = []
    if t_delay > 0:
        segs.append(Segment("delay", float(t_ext[0]), float(t_ext[0] + t_delay)))
    segs += [Segment(s.label, s.start + t_delay, s.end + t_delay) for s in profile.segments]
    segs.append(Segment("settle", segs[-1].end, float(t_ext[-1])))
    return FrequencyProfile(t_ext, omega, tuple(segs), voltage=y, calibration=cal)


# ---------------------------------------------------------------------------
# diagnostics


@dataclass(frozen=True)
class Diagnostics:
    times: np.ndarray
    scale: np.ndarray
    e_foldings: float
    adiabaticity: np.ndarray
    wkb_phase: np.ndarray

    @property
    def peak_adiabaticity(self) -> float:
        return float(np.max(np.abs(self.adiabaticity)))

    @property
    def peak_adiabaticity_per_cycle(self) -> float:
        """Peak of ``2 pi |omega_dot| / omega^2``, the change per oscillation period."""
        return TWO_PI * self.peak_adiabaticity


def diagnostics(profile: FrequencyProfile) -> Diagnostics:
    """Analog scale parameter, e-foldings, ``omega_dot/omega^2`` and WKB phase."""
    t, w = profile.times, profile.omega
    scale = w / w[0]
    e_fold = float(np.log(np.max(w) / np.min(w)))
    adiab = np.gradient(w, t, edge_order=2) / w**2
    phase = cumulative_trapezoid(w, t, initial=0.0)
    return Diagnostics(t, scale, e_fold, adiab, phase)
