"""Epsilon sweeps against the predicted transition profile.

``run_sweep`` reconstructs the scaled profile for each lattice step, compares
it with the prediction on a fixed x_check grid and runs the two
discretization controls (doubled oversampling, doubled window) at the finest
step. ``emit`` writes ``profiles.csv`` and ``report.json``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .dtb import TransitionPrediction, data_constants, predict_dtb
from .errors import ConfigError, DegenerateFit, IoFailure
from .geometry import geometry_report
from .presets import Built, Scenario, build
from .transform import ReconstructionRequest, continuous_interior_value, reconstruct

log = logging.getLogger(__name__)


@dataclass
class Profile:
    eps: float | None
    x_checks: np.ndarray  # (k, n) adapted offsets
    values: np.ndarray
    mode: str
    A: float


@dataclass
class SweepReport:
    scenario: dict
    kappa: float
    generic: bool
    verdict: str
    eps_list: list
    sup_errors: list
    rms_errors: list
    scale: float
    order: float | None
    controls: dict
    flags: dict
    status: str
    thresholds: dict
    prediction: dict
    interior: dict | None = None
    geometry: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.status != "fail"

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "kappa": self.kappa,
            "generic": self.generic,
            "verdict": self.verdict,
            "eps_list": self.eps_list,
            "sup_errors": self.sup_errors,
            "rms_errors": self.rms_errors,
            "scale": self.scale,
            "order": self.order,
            "controls": self.controls,
            "flags": self.flags,
            "status": self.status,
            "thresholds": self.thresholds,
            "prediction": self.prediction,
            "interior": self.interior,
            "geometry": self.geometry,
            "notes": self.notes,
        }


def estimate_order(errors, eps=None) -> float:
    """Least-squares slope of log(error) against log(eps).

    Without ``eps`` the steps are taken as successive halvings.
    """
    err = np.asarray(errors, float)
    if err.size < 3:
        raise DegenerateFit(f"need at least 3 errors, got {err.size}")
    if np.any(~np.isfinite(err)) or np.any(err <= 0):
        raise DegenerateFit("errors must be positive and finite")
    h = 0.5 ** np.arange(err.size) if eps is None else np.asarray(eps, float)
    if h.shape != err.shape or np.any(h <= 0):
        raise DegenerateFit("eps must be positive and match the error list")
    if np.ptp(np.log(h)) == 0:
        raise DegenerateFit("eps values are all equal")
    slope, _ = np.polyfit(np.log(h), np.log(err), 1)
    return float(slope)


def _x_points(scn: Scenario, n: int) -> np.ndarray:
    x1 = scn.x_grid
    pts = np.zeros((x1.size, n))
    pts[:, 0] = x1
    return pts


def interior_value_for(built: Built, jump_scale: float):
    s = built.scenario
    return continuous_interior_value(
        built.frame, built.source, built.symbol, delta_list=tuple(s.deltas),
        chart_radius=s.chart_radius, resolution=s.interior_resolution, rho=s.rho, jump_scale=jump_scale,
    )


def prediction_for(built: Built, lattice=None, interior=None) -> TransitionPrediction:
    data = built.conormal()
    const = data_constants(built.frame, data, built.symbol)
    if interior is None and abs(const["kappa"]) < 1e-12:
        interior = interior_value_for(built, abs(const["C1"] * const["c1_plus"]))
    return predict_dtb(built.frame, data, built.symbol, built.kernel, lattice=lattice, interior_value=interior)


def _measure(built: Built, eps: float, pts, rho: int, A: float):
    s = built.scenario
    req = ReconstructionRequest(pts, eps, A=A, rho=rho, chart_radius=s.chart_radius)
    res = reconstruct(req, built.source, built.kernel, built.symbol, built.frame, lattice=built.lattice(eps), genericity=built.genericity)
    return res


def run_sweep(scenario: Scenario | Built, *, progress=None) -> tuple[SweepReport, list[Profile]]:
    built = scenario if isinstance(scenario, Built) else build(scenario)
    s = built.scenario
    frame = built.frame
    gen = built.genericity
    pts = _x_points(s, frame.n)
    x1 = pts[:, 0]
    mask = np.abs(x1) >= s.exclude_below
    if not mask.any():
        raise ConfigError("no x_check point survives exclude_below")

    pred = prediction_for(built, lattice=built.lattice(s.eps_list[-1]))
    k = pred.kappa
    target = pred.at_xcheck(x1)
    if abs(k) < 1e-12:
        scale = float(abs(pred.jump))
    else:
        scale = float(np.max(np.abs(target[mask])))
    notes = []

    eps_list = [float(e) for e in s.eps_list]
    profiles: list[Profile] = []
    sup, rms, runs = [], [], {}
    for eps in eps_list:
        t0 = time.perf_counter()
        res = _measure(built, eps, pts, s.rho, s.A)
        d = (res.scaled - target)[mask]
        sup.append(float(np.max(np.abs(d)) / scale))
        rms.append(float(np.sqrt(np.mean(np.abs(d) ** 2)) / scale))
        runs[eps] = res
        profiles.append(Profile(eps, pts, res.scaled, "discrete", s.A))
        log.info("eps=%.6g sup=%.4f rms=%.4f (%.1fs)", eps, sup[-1], rms[-1], time.perf_counter() - t0)
        if progress:
            progress(eps, sup[-1])
    if any(r.info.get("window_clipped_to_chart") for r in runs.values()):
        notes.append("window clipped to the chart for at least one eps")

    controls = {}
    finest = eps_list[-1]
    base = runs[finest].scaled[mask]
    if s.controls:
        for key, kw in (("rho", {"rho": 2 * s.rho, "A": s.A}), ("A", {"rho": s.rho, "A": 2 * s.A})):
            res = _measure(built, finest, pts, **kw)
            controls[key] = {
                **kw,
                "delta": float(np.max(np.abs(res.scaled[mask] - base)) / scale),
                "window_clipped_to_chart": bool(res.info.get("window_clipped_to_chart")),
            }
            profiles.append(Profile(finest, pts, res.scaled, f"control-{key}", kw["A"]))
        if controls["A"]["window_clipped_to_chart"] and runs[finest].info.get("window_clipped_to_chart"):
            notes.append("A-doubling control leaves the clipped window unchanged")

    transverse = None
    if s.transverse:
        tpts = np.concatenate([np.column_stack([x1, np.full_like(x1, t)]) for t in s.transverse])
        res = _measure(built, finest, tpts, s.rho, s.A)
        ref = runs[finest].scaled
        dev = max(
            float(np.max(np.abs(res.scaled[i * x1.size:(i + 1) * x1.size][mask] - ref[mask])) / scale)
            for i in range(len(s.transverse))
        )
        transverse = {"offsets": list(s.transverse), "max_deviation": dev}
        profiles.append(Profile(finest, tpts, res.scaled, "transverse", s.A))

    try:
        order = estimate_order(sup, eps_list)
    except DegenerateFit:
        order = None

    limit = s.threshold_final / 2.0
    monotone = all(b < a for a, b in zip(sup, sup[1:]))
    final_ok = sup[-1] <= s.threshold_final
    inconclusive = any(c["delta"] >= limit for c in controls.values())
    flags = {
        "monotone_decrease": monotone,
        "final_below_threshold": final_ok,
        "inconclusive": inconclusive,
        "gated": not gen.condition1_pass,
    }
    if transverse is not None:
        flags["transverse_independent"] = transverse["max_deviation"] < 0.02
    if not gen.condition1_pass:
        status = "gated-skip"
    elif inconclusive:
        status = "inconclusive"
    else:
        status = "pass" if (monotone and final_ok) else "fail"

    h = pred.h_of_xcheck(x1)
    profiles.append(Profile(None, pts, target, "predicted", s.A))
    prediction = pred.to_dict()
    prediction["h"] = h.tolist()
    report = SweepReport(
        scenario=s.to_dict(),
        kappa=float(k),
        generic=gen.generic,
        verdict=gen.verdict,
        eps_list=eps_list,
        sup_errors=sup,
        rms_errors=rms,
        scale=scale,
        order=order,
        controls=controls,
        flags=flags,
        status=status,
        thresholds={"final": s.threshold_final, "control": limit, "exclude_below": s.exclude_below},
        prediction=prediction,
        geometry=geometry_report(frame, gen),
        notes=notes,
    )
    if pred.plateau_interior is not None:
        report.interior = {"value": [pred.plateau_interior.real, pred.plateau_interior.imag]}
    if transverse is not None:
        report.notes.append(f"transverse max deviation {transverse['max_deviation']:.4f}")
        report.controls["transverse"] = transverse
    return report, profiles


# ---------------------------------------------------------------------------
# output


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, (complex, np.complexfloating)):
        return [_jsonable(float(o.real)), _jsonable(float(o.imag))]
    if isinstance(o, (np.floating, float)):
        v = float(o)
        return v if math.isfinite(v) else str(v)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    return o


def dumps(doc) -> str:
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


def _num(x) -> str:
    return repr(float(x))


def profiles_csv(profiles) -> str:
    profiles = list(profiles)
    n = max((np.atleast_2d(p.x_checks).shape[1] for p in profiles), default=1)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["eps", *[f"xcheck_{i + 1}" for i in range(n)], "value_re", "value_im", "mode", "A"])
    for p in profiles:
        xc = np.atleast_2d(np.asarray(p.x_checks, float))
        vals = np.asarray(p.values, complex).ravel()
        eps = "" if p.eps is None else _num(p.eps)
        for row, v in zip(xc, vals):
            cols = [_num(c) for c in row] + [""] * (n - row.size)
            w.writerow([eps, *cols, _num(v.real), _num(v.imag), p.mode, _num(p.A)])
    return buf.getvalue()


def emit(report, profiles, path) -> dict:
    """Write ``profiles.csv`` and ``report.json`` into the directory ``path``."""
    doc = report.to_dict() if hasattr(report, "to_dict") else dict(report or {})
    if not doc:
        doc = {"eps_list": [], "sup_errors": [], "rms_errors": []}
    out = {"csv": os.path.join(path, "profiles.csv"), "json": os.path.join(path, "report.json")}
    try:
        os.makedirs(path, exist_ok=True)
        with open(out["csv"], "w", newline="") as fh:
            fh.write(profiles_csv(profiles))
        with open(out["json"], "w") as fh:
            fh.write(dumps(doc))
    except OSError as exc:
        raise IoFailure(f"cannot write reports to {path}: {exc}") from exc
    return out
