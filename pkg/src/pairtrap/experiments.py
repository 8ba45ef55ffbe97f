"""Named experiments behind the command-line interface.

Each ``run_*`` function takes a validated parameter mapping and an output
directory, writes its data files there and returns the list of file names it
produced. Outputs depend only on the parameters and the seed, so repeated
runs give byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import metadata
from pathlib import Path

import jsonschema
import numpy as np
from scipy.optimize import least_squares

from . import cosmo, entangle, fock, gaussian, ramps, tomography
from .errors import ConfigError, DomainError

SCHEMA_VERSION = 1
EXPERIMENTS = ("single_pulse", "echo_sweep", "ramp_study", "fit", "entangle", "cosmo")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_int_pos = {"type": "integer", "minimum": 1}

PULSE_PROPS = {
    "shape": {"enum": ["pulse", "constant"]},
    "omega_high_mhz": _pos,
    "omega_low_mhz": _pos,
    "t_ramp": _pos,
    "t_hold": _nonneg,
    "smooth_order": {"type": "integer", "minimum": 1, "maximum": 6},
    "t_delay": _nonneg,
    "filter_bandwidth": _nonneg,
    "stray_field": _num,
    "mass_amu": _pos,
    "n_th": _nonneg,
    "duration": _pos,
    "calibration": {
        "type": "object",
        "properties": {"kappa_rf": _pos, "omega_dc": _nonneg, "omega_lf": _nonneg},
        "required": ["kappa_rf", "omega_dc", "omega_lf"],
        "additionalProperties": False,
    },
}

_range = {
    "type": "object",
    "properties": {"start": _nonneg, "stop": _nonneg, "num": {"type": "integer", "minimum": 0}},
    "required": ["start", "stop", "num"],
    "additionalProperties": False,
}
_values = {"type": "array", "items": _nonneg}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


PARAM_SCHEMAS = {
    "single_pulse": _obj(
        {**PULSE_PROPS, "fock_check": {"type": "boolean"}, "fock_n_max": _int_pos, "pn_n_max": _int_pos, "samples": {"type": "integer", "minimum": 2}, "svg": {"type": "boolean"}}
    ),
    "echo_sweep": _obj({**PULSE_PROPS, "t_free": {"oneOf": [_values, _range]}, "svg": {"type": "boolean"}}),
    "ramp_study": _obj({**PULSE_PROPS, "t_ramp_values": {"oneOf": [_values, _range]}, "svg": {"type": "boolean"}}),
    "fit": _obj(
        {
            "signals": {"type": "array", "items": {"type": "string"}},
            "synthetic": _obj(
                {
                    "r": _nonneg,
                    "theta_rel": _num,
                    "abs_alpha": _nonneg,
                    "n_th": _nonneg,
                    "shots": {"type": "integer", "minimum": 0},
                    "t_max": _pos,
                    "points": {"type": "integer", "minimum": 2},
                    "kinds": {"type": "array", "items": {"enum": ["red", "blue"]}, "minItems": 1},
                }
            ),
            "rabi0": _pos,
            "eta": _pos,
            "gamma": _nonneg,
            "n_max": _int_pos,
            "n_th_fixed": {"type": ["number", "null"], "minimum": 0},
            "fit_rabi": {"type": "boolean"},
            "fit_gamma": {"type": "boolean"},
        }
    ),
    "entangle": _obj(
        {
            "kappa": {"type": "number", "minimum": 0.5},
            "omega_plus": _pos,
            "omega_minus": _pos,
            "r": {"type": "array", "items": _nonneg},
            "n_plus": _nonneg,
            "n_minus": _nonneg,
        }
    ),
    "cosmo": _obj(
        {
            "scenario": {"type": "object"},
            "window": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
            "samples": {"type": "integer", "minimum": 5},
            "k_values": {"oneOf": [_values, _range]},
            "svg": {"type": "boolean"},
        }
    ),
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "experiment": {"enum": list(EXPERIMENTS)},
        "parameters": {"type": "object"},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "output_dir": {"type": "string"},
    },
    "required": ["schema_version", "experiment"],
    "additionalProperties": False,
}

DEFAULT_PULSE = {
    "shape": "pulse",
    "omega_high_mhz": 2.5,
    "omega_low_mhz": 0.5,
    "t_ramp": 1e-6,
    "t_hold": ramps.REFERENCE_T_HOLD,
    "smooth_order": 2,
    "t_delay": 0.0,
    "filter_bandwidth": 0.0,
    "stray_field": 11e-3,
    "mass_amu": 25.0,
    "n_th": 0.0,
    "duration": 3e-6,
}

DEFAULTS = {
    "single_pulse": {**DEFAULT_PULSE, "fock_check": False, "fock_n_max": fock.N_MAX_DYNAMICS, "pn_n_max": 40, "samples": 801, "svg": False},
    "echo_sweep": {**DEFAULT_PULSE, "t_free": {"start": 29.5e-6, "stop": 31.0e-6, "num": 151}, "svg": False},
    "ramp_study": {**DEFAULT_PULSE, "t_ramp_values": [1e-9, 1e-8, 3e-8, 1e-7, 2e-7, 5e-7, 9e-7, 1e-6, 1.1e-6, 1.5e-6, 2e-6], "svg": False},
    "fit": {
        "signals": [],
        "rabi0": 2 * math.pi * 250e3,
        "eta": 0.1,
        "gamma": 0.0,
        "n_max": 8,
        "n_th_fixed": None,
        "fit_rabi": True,
        "fit_gamma": True,
    },
    "entangle": {"kappa": entangle.KAPPA_EXPERIMENT, "r": [0.0, 0.83], "n_plus": 0.03, "n_minus": 0.03},
    "cosmo": {
        "scenario": {"kind": "flrw_conformal", "k": 1.0, "mass": 2.0, "scale": {"preset": "de_sitter_conformal", "hubble": 1.0}},
        "window": [-1.0, -0.05],
        "samples": 2001,
        "k_values": {"start": 0.1, "stop": 10.0, "num": 50},
        "svg": False,
    },
}

SYNTHETIC_DEFAULTS = {"r": 0.54, "theta_rel": 0.0, "abs_alpha": 0.88, "n_th": 0.03, "shots": 200, "t_max": 120e-6, "points": 61, "kinds": ["red", "blue"]}


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    parameters: dict
    seed: int = 0
    output_dir: str | None = None
    base_dir: str = "."

    def canonical(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "experiment": self.experiment, "parameters": self.parameters, "seed": self.seed}


def validate_config(data: dict, base_dir: str = ".") -> ExperimentConfig:
    """Check a config mapping against the schema and fill in defaults.

    Raises
    ------
    ConfigError
        On any schema violation; nothing is computed before this passes.
    """
    try:
        jsonschema.validate(data, CONFIG_SCHEMA)
        exp = data["experiment"]
        params = dict(data.get("parameters", {}))
        jsonschema.validate(params, PARAM_SCHEMAS[exp])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    merged = {**DEFAULTS[exp], **params}
    if exp == "fit" and not merged["signals"] and "synthetic" not in params:
        raise ConfigError("fit needs 'signals' files or a 'synthetic' block")
    if exp == "fit" and "synthetic" in params:
        merged["synthetic"] = {**SYNTHETIC_DEFAULTS, **params["synthetic"]}
    if exp in ("single_pulse", "echo_sweep", "ramp_study") and merged["omega_high_mhz"] <= merged["omega_low_mhz"]:
        raise ConfigError("omega_high_mhz must exceed omega_low_mhz")
    if exp == "cosmo" and not merged["window"][1] > merged["window"][0]:
        raise ConfigError("cosmo window must be increasing")
    return ExperimentConfig(exp, merged, int(data.get("seed", 0)), data.get("output_dir"), base_dir)


def load_config(path) -> ExperimentConfig:
    """Read and validate a JSON config file. I/O failures surface as ``OSError``."""
    with open(path) as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return validate_config(data, str(Path(path).resolve().parent))


def _series(spec) -> np.ndarray:
    if isinstance(spec, dict):
        return np.linspace(spec["start"], spec["stop"], spec["num"])
    return np.asarray(spec, dtype=float)


# ---------------------------------------------------------------------------
# shared helpers


def _calibration(p: dict) -> ramps.TrapCalibration:
    if "calibration" in p:
        return ramps.TrapCalibration(**p["calibration"])
    return ramps.reference_calibration()


def _pulse_spec(p: dict, cal: ramps.TrapCalibration, t_ramp: float | None = None) -> ramps.PulseSpec:
    return ramps.PulseSpec(
        t_ramp=p["t_ramp"] if t_ramp is None else t_ramp,
        t_hold=p["t_hold"],
        U_high=cal.voltage_for(p["omega_high_mhz"] * ramps.MHZ),
        U_low=cal.voltage_for(p["omega_low_mhz"] * ramps.MHZ),
        smooth_order=p["smooth_order"],
        t_delay=p["t_delay"],
        filter_bandwidth=p["filter_bandwidth"],
    )


def _drive(p: dict) -> gaussian.Drive:
    return gaussian.Drive.stray_field(p["stray_field"]) if p["stray_field"] else gaussian.Drive.none()


def _mass(p: dict) -> float:
    return p["mass_amu"] * gaussian.AMU


def _final(profile: ramps.FrequencyProfile, p: dict) -> dict:
    init = gaussian.GaussianState.thermal(p["n_th"], profile.omega_initial)
    traj = gaussian.evolve(init, profile, _drive(p), _mass(p), t_eval=[profile.t_end])
    return gaussian.final_metrics(traj)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _map(fn, items, jobs: int):
    """Ordered map, fanned out over processes when ``jobs > 1``."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def dominant_frequency(t, y) -> float:
    """Frequency (cycles per unit of ``t``) of the strongest sinusoid in ``y``.

    FFT peak of the detrended series, refined by a least-squares fit of
    ``c0 + c1 t + A cos(2 pi f t) + B sin(2 pi f t)``.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size < 8:
        raise DomainError("need at least 8 samples for a frequency fit")
    dt = float(np.mean(np.diff(t)))
    yd = y - np.polyval(np.polyfit(t, y, 1), t)
    pad = 16 * t.size
    spec = np.abs(np.fft.rfft(yd * np.hanning(t.size), pad))
    freqs = np.fft.rfftfreq(pad, dt)
    f0 = float(freqs[1 + np.argmax(spec[1:])])
    tc = t - t.mean()

    def resid(x):
        f = x[0]
        X = np.column_stack([np.ones_like(tc), tc, np.cos(2 * np.pi * f * tc), np.sin(2 * np.pi * f * tc)])
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        return X @ coef - y

    sol = least_squares(resid, [f0], x_scale=[f0], xtol=1e-14, ftol=1e-14)
    return float(sol.x[0])


# ---------------------------------------------------------------------------
# experiments


def run_single_pulse(p: dict, out: Path, jobs: int = 1, seed: int = 0) -> list[str]:
    cal = _calibration(p)
    if p["shape"] == "constant":
        profile = ramps.constant_profile(p["omega_low_mhz"] * ramps.MHZ, p["duration"])
    else:
        profile = ramps.build_pulse(_pulse_spec(p, cal), cal)
    drive, mass = _drive(p), _mass(p)
    init = gaussian.GaussianState.thermal(p["n_th"], profile.omega_initial)
    t_eval = np.linspace(profile.t_start, profile.t_end, p["samples"])
    traj = gaussian.evolve(init, profile, drive, mass, t_eval=t_eval)
    metrics = gaussian.final_metrics(traj)
    final_state = traj.final.at_frequency(profile.omega_final)
    summary = {
        **metrics,
        "squeezing_db": float(gaussian.squeezing_db(metrics["r"])),
        "purity_det": float(np.linalg.det(final_state.cov)),
        "omega_final": profile.omega_final,
        "e_foldings": ramps.diagnostics(profile).e_foldings,
    }
    if p["fock_check"]:
        fstate = fock.make_thermal(p["n_th"], p["fock_n_max"], profile.omega_initial)
        ft = fock.evolve_fixed_basis(fstate, profile, drive, mass, t_eval=[profile.t_end])
        fm = ft.state_moments(-1).at_frequency(profile.omega_final)
        summary["fock_delta_r"] = abs(gaussian.squeeze_params(fm).r - metrics["r"])
        summary["fock_delta_abs_alpha"] = abs(abs(gaussian.displacement(fm)) - metrics["abs_alpha"])
        summary["fock_norm_drift"] = ft.norm_drift
    dist = fock.pn(fock.from_gaussian(final_state, n_max=p["pn_n_max"]))
    profile.to_csv(out / "profile.csv")
    traj.to_csv(out / "trajectory.csv")
    dist.to_csv(out / "pn.csv")
    _write_json(out / "final.json", summary)
    files = ["profile.csv", "trajectory.csv", "pn.csv", "final.json"]
    if p["svg"]:
        from . import plots

        obs = traj.observables()
        us = (traj.times - traj.times[0]) * 1e6
        plots.line_plot(
            out / "trajectory.svg",
            us,
            {"r": obs["r"], "|alpha|": obs["abs_alpha"]},
            "t (us)",
            "excitation",
            twin={"omega / 2pi (MHz)": traj.omega / ramps.MHZ},
            twin_label="MHz",
        )
        files.append("trajectory.svg")
    return files


def _echo_point(args) -> tuple[float, float, float, float]:
    p, t_free = args
    cal = _calibration(p)
    prof = ramps.build_echo(_pulse_spec(p, cal), float(t_free), cal)
    m = _final(prof, p)
    return float(t_free), m["r"], m["abs_alpha"], m["n_pair"]


def echo_sweep_series(p: dict, jobs: int = 1) -> np.ndarray:
    """Rows ``(t_free, r, |alpha|, n_pair)`` in sweep order."""
    ts = _series(p["t_free"])
    rows = _map(_echo_point, [(p, t) for t in ts], jobs)
    return np.array(rows, dtype=float).reshape(-1, 4)


def run_echo_sweep(p: dict, out: Path, jobs: int = 1, seed: int = 0) -> list[str]:
    rows = echo_sweep_series(p, jobs)
    _write_csv(out / "sweep.csv", ["t_free", "r", "abs_alpha", "n_pair"], [tuple(float(v) for v in r) for r in rows])
    files = ["sweep.csv"]
    if len(rows) >= 8:
        cal = _calibration(p)
        single = _final(ramps.build_pulse(_pulse_spec(p, cal), cal), p)
        f_r = dominant_frequency(rows[:, 0], rows[:, 1])
        f_a = dominant_frequency(rows[:, 0], rows[:, 2])
        purified = (rows[:, 1] > single["r"]) & (rows[:, 2] < 0.4 * single["abs_alpha"])
        _write_json(
            out / "sweep_summary.json",
            {
                "single_pulse_r": single["r"],
                "single_pulse_abs_alpha": single["abs_alpha"],
                "freq_r_hz": f_r,
                "freq_abs_alpha_hz": f_a,
                "freq_ratio": f_r / f_a,
                "omega_free_over_2pi_hz": p["omega_high_mhz"] * 1e6,
                "purified_t_free": [float(t) for t in rows[purified, 0]],
            },
        )
        files.append("sweep_summary.json")
    if p["svg"] and len(rows):
        from . import plots

        plots.line_plot(out / "sweep.svg", rows[:, 0] * 1e6, {"r": rows[:, 1], "|alpha|": rows[:, 2]}, "t_free (us)", "excitation")
        files.append("sweep.svg")
    return files


def _ramp_point(args) -> tuple[float, float, float]:
    p, t_ramp = args
    cal = _calibration(p)
    U_low = cal.voltage_for(p["omega_low_mhz"] * ramps.MHZ)
    U_high = cal.voltage_for(p["omega_high_mhz"] * ramps.MHZ)
    prof = ramps.build_ramp(U_low, U_high, float(t_ramp), cal, smooth_order=p["smooth_order"])
    if p["filter_bandwidth"] > 0:
        prof = ramps.filter_distort(prof, p["filter_bandwidth"], p["t_delay"])
    m = _final(prof, p)
    return float(t_ramp), m["r"], m["abs_alpha"]


def ramp_study_series(p: dict, jobs: int = 1) -> np.ndarray:
    """Rows ``(t_ramp, r, |alpha|)`` for single low-to-high ramps."""
    rows = _map(_ramp_point, [(p, t) for t in _series(p["t_ramp_values"])], jobs)
    return np.array(rows, dtype=float).reshape(-1, 3)


def run_ramp_study(p: dict, out: Path, jobs: int = 1, seed: int = 0) -> list[str]:
    rows = ramp_study_series(p, jobs)
    _write_csv(out / "ramp_study.csv", ["t_ramp", "r", "abs_alpha"], [tuple(float(v) for v in r) for r in rows])
    r_max = 0.5 * math.log(p["omega_high_mhz"] / p["omega_low_mhz"])
    _write_json(out / "ramp_summary.json", {"r_max_sudden": r_max})
    files = ["ramp_study.csv", "ramp_summary.json"]
    if p["svg"] and len(rows):
        from . import plots

        plots.line_plot(out / "ramp_study.svg", rows[:, 0] * 1e6, {"r": rows[:, 1], "|alpha|": rows[:, 2]}, "t_ramp (us)", "excitation")
        files.append("ramp_study.svg")
    return files


def synthetic_signals(p: dict, seed: int) -> list[tomography.SidebandSignal]:
    """Sideband signals of a displaced squeezed thermal state, one seed stream per kind."""
    s = p["synthetic"]
    dist = fock.PhononDistribution(tomography.pn_parametrized(s["r"], s["theta_rel"], s["abs_alpha"], s["n_th"]))
    times = np.linspace(0.0, s["t_max"], s["points"])
    seeds = np.random.SeedSequence(seed).spawn(len(s["kinds"]))
    return [
        tomography.simulate_sideband(dist, kind, p["rabi0"], p["eta"], p["gamma"], times, s["shots"], np.random.default_rng(ss))
        for kind, ss in zip(s["kinds"], seeds)
    ]


def run_fit(p: dict, out: Path, jobs: int = 1, seed: int = 0, base_dir: str = ".") -> list[str]:
    files = []
    if p["signals"]:
        signals = []
        for name in p["signals"]:
            path = Path(name) if os.path.isabs(name) else Path(base_dir) / name
            try:
                signals += tomography.read_signals_csv(path, p["rabi0"], p["eta"], p["gamma"])
            except DomainError as exc:
                raise InputFileError(f"{path}: {exc}") from None
    else:
        signals = synthetic_signals(p, seed)
    rec = tomography.reconstruct(signals, p["n_max"], fit_rabi=p["fit_rabi"], fit_gamma=p["fit_gamma"])
    fit = tomography.fit_parametrized(rec.dist, n_th=p["n_th_fixed"])
    if not p["signals"]:
        tomography.write_signals_csv(signals, out / "signals.csv")
        files.append("signals.csv")
    rec.dist.to_csv(out / "pn.csv")
    result = json.loads(fit.to_json())
    result.update(
        {
            "rabi_eta": rec.rabi_eta,
            "rabi_eta_err": rec.rabi_eta_err,
            "gamma": rec.gamma,
            "gamma_err": rec.gamma_err,
            "reconstruction_chi2_reduced": rec.chi2_reduced,
            "squeezing_db": float(gaussian.squeezing_db(fit.r)),
        }
    )
    _write_json(out / "fit.json", result)
    return files + ["pn.csv", "fit.json"]


def run_entangle(p: dict, out: Path, jobs: int = 1, seed: int = 0) -> list[str]:
    if "omega_plus" in p and "omega_minus" in p:
        w_plus, w_minus = p["omega_plus"], p["omega_minus"]
    else:
        w_minus = 1.0
        w_plus = entangle.ratio_from_kappa(p["kappa"])
    sv = entangle.schmidt_vacuum(entangle.kappa_of(w_plus, w_minus))
    results = []
    for r in p["r"]:
        spec = entangle.TwoModeSpec(w_plus, w_minus, p["n_plus"], p["n_minus"], float(r))
        rep = entangle.report(spec)
        d = json.loads(rep.to_json())
        d["r"] = float(r)
        d["e_f_nats_clamped"] = entangle.entanglement_of_formation(rep.chi, clamp=True)
        results.append(d)
    _write_json(
        out / "entangle.json",
        {
            "omega_ratio": w_plus / w_minus,
            "kappa": sv.kappa,
            "schmidt_ratio": sv.ratio,
            "vacuum_entropy_nats": sv.entropy(),
            "states": results,
        },
    )
    return ["entangle.json"]


def run_cosmo(p: dict, out: Path, jobs: int = 1, seed: int = 0) -> list[str]:
    try:
        spec = cosmo.ScenarioSpec.from_dict(p["scenario"])
    except TypeError as exc:
        raise ConfigError(f"scenario invalid: {exc}") from None
    window = tuple(p["window"])
    prof = cosmo.compile(spec, window, p["samples"])
    prof.to_csv(out / "profile.csv")
    ks = _series(p["k_values"])
    n_pair = cosmo.pair_spectrum(spec, window, ks, p["samples"]) if ks.size else np.zeros(0)
    _write_csv(out / "spectrum.csv", ["k", "n_pair"], [(float(k), float(n)) for k, n in zip(ks, n_pair)])
    amap = cosmo.cosmo_to_trap(spec, window, p["samples"])
    report = {"kind": spec.kind, "e_foldings": amap.e_foldings, "omega_initial": prof.omega_initial, "omega_final": prof.omega_final}
    if spec.kind in ("flrw_proper", "flrw_conformal", "vector_field"):
        hist = spec.scale_history()
        report["a_initial"] = float(hist.a(window[0]))
        report["a_final"] = float(hist.a(window[1]))
    _write_json(out / "cosmo.json", report)
    files = ["profile.csv", "spectrum.csv", "cosmo.json"]
    if p["svg"] and ks.size:
        from . import plots

        plots.line_plot(out / "spectrum.svg", ks, {"n_pair": n_pair}, "k", "pairs per mode")
        files.append("spectrum.svg")
    return files


class InputFileError(OSError):
    """A data file named by the config is missing, empty or malformed."""


RUNNERS = {
    "single_pulse": run_single_pulse,
    "echo_sweep": run_echo_sweep,
    "ramp_study": run_ramp_study,
    "fit": run_fit,
    "entangle": run_entangle,
    "cosmo": run_cosmo,
}


# ---------------------------------------------------------------------------
# run records


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def toolkit_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


@dataclass(frozen=True)
class RunRecord:
    config: dict
    version: str
    wall_time_s: float
    outputs: dict
    input_hash: str

    def to_json(self) -> str:
        return json.dumps(
            {"config": self.config, "version": self.version, "wall_time_s": self.wall_time_s, "outputs": self.outputs, "input_hash": self.input_hash},
            indent=1,
            sort_keys=True,
        )


def input_hash(cfg: ExperimentConfig) -> str:
    h = hashlib.sha256(json.dumps(cfg.canonical(), sort_keys=True).encode())
    for name in cfg.parameters.get("signals", []) if cfg.experiment == "fit" else []:
        path = Path(name) if os.path.isabs(name) else Path(cfg.base_dir) / name
        if path.exists():
            h.update(path.read_bytes())
    return h.hexdigest()


def run(cfg: ExperimentConfig, output_dir, jobs: int = 1) -> RunRecord:
    """Execute an experiment into ``output_dir`` and write ``run.json`` beside its outputs.

    Data files are written to a scratch directory first and moved into place
    only once the experiment succeeded, so a failed run leaves no outputs.
    """
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    scratch = out / ".partial"
    scratch.mkdir(exist_ok=True)
    for f in scratch.iterdir():
        f.unlink()
    t0 = time.perf_counter()
    runner = RUNNERS[cfg.experiment]
    try:
        if cfg.experiment == "fit":
            files = runner(cfg.parameters, scratch, jobs, cfg.seed, base_dir=cfg.base_dir)
        else:
            files = runner(cfg.parameters, scratch, jobs, cfg.seed)
        for name in files:
            os.replace(scratch / name, out / name)
    finally:
        for f in scratch.iterdir():
            f.unlink()
        scratch.rmdir()
    wall = time.perf_counter() - t0
    record = RunRecord(cfg.canonical(), toolkit_version(), wall, {n: _sha256(out / n) for n in files}, input_hash(cfg))
    (out / "run.json").write_text(record.to_json() + "\n")
    return record
