"""Command-line entry point: ``artifact <subcommand> --scenario NAME|PATH``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from fractions import Fraction

import numpy as np

from . import harness
from .dtb import ctb_from_prediction
from .errors import ArtifactError, ConfigError, EvalAtSingularity, IoFailure
from .geometry import geometry_report, q_via_hessian, q_via_x1
from .presets import PRESETS, Scenario, build, build_geometry, load_scenario
from .sampling import kernel_exactness, make_kernel
from .transform import ReconstructionRequest, reconstruct

log = logging.getLogger("artifact")


def _float(text: str) -> float:
    try:
        return float(Fraction(text)) if "/" in text else float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a number: {text!r}") from exc


def _floats(text: str) -> list:
    return [_float(t) for t in text.split(",") if t.strip()]


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _complex(text: str) -> complex:
    return complex(text.replace(" ", "").replace("i", "j"))


# key -> (parser, target, help); target "symbol" edits the filter document
OVERRIDES = {
    "eps_list": (_floats, None, "comma-separated lattice steps, descending (fractions allowed)"),
    "A": (_float, None, "window parameter A"),
    "rho": (int, None, "fine-grid oversampling factor"),
    "kernel": (str, None, "interpolation kernel name"),
    "threshold_final": (_float, None, "acceptance threshold on the final relative sup error"),
    "exclude_below": (_float, None, "ignore |x_check_1| below this value in error norms"),
    "x_lo": (_float, None, "x_check grid start"),
    "x_hi": (_float, None, "x_check grid end"),
    "x_num": (int, None, "x_check grid size"),
    "transverse": (_floats, None, "transverse x_check offsets for the independence check"),
    "chart_radius": (_float, None, "chart half-width in adapted y"),
    "amplitude": (_float, None, "phantom jump amplitude"),
    "taper_flat": (_float, None, "data taper: flat up to this |y_perp|"),
    "taper_zero": (_float, None, "data taper: zero beyond this |y_perp|"),
    "deltas": (_floats, None, "offsets for the interior-value extrapolation"),
    "interior_resolution": (_float, None, "sampling step of the continuous interior value"),
    "search_bound": (int, None, "genericity search bound"),
    "controls": (_bool, None, "run the rho- and A-doubling controls"),
    "beta0": (_float, "symbol", "filter order beta0"),
    "B_plus": (_complex, "symbol", "filter coefficient for lam > 0"),
    "B_minus": (_complex, "symbol", "filter coefficient for lam < 0"),
    "apodization": (_float, "symbol", "filter apodization fraction"),
}


def apply_overrides(scn: Scenario, pairs) -> Scenario:
    for item in pairs or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, text = item.split("=", 1)
        key = key.strip()
        if key not in OVERRIDES:
            raise ConfigError(f"unknown override key {key!r}; known keys: {', '.join(sorted(OVERRIDES))}")
        parse, target, _ = OVERRIDES[key]
        try:
            value = parse(text)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from exc
        if target == "symbol":
            scn.symbol[key] = [value.real, value.imag] if isinstance(value, complex) else value
        else:
            setattr(scn, key, value)
    validate(scn)
    return scn


def validate(scn: Scenario) -> None:
    eps = list(scn.eps_list)
    if not eps or any(e <= 0 for e in eps):
        raise ConfigError("eps_list must contain positive values")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigError("eps_list must be strictly descending")
    if scn.A <= 0 or scn.rho < 1 or scn.x_num < 1:
        raise ConfigError("A, rho and x_num must be positive")
    if not 0 <= scn.taper_flat < scn.taper_zero:
        raise ConfigError("need 0 <= taper_flat < taper_zero")
    if scn.kernel not in ("box", "linear", "keys", "bspline2", "nearest", "cubic", "keys-cubic", "quadratic"):
        raise ConfigError(f"unknown kernel {scn.kernel!r}")


def _fmt(a) -> str:
    return np.array2string(np.asarray(a, float), precision=6, suppress_small=True)


def _say(args, *parts) -> None:
    if not args.quiet:
        print(*parts)


def _out(args, name):
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _write(path, text) -> None:
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------


def cmd_geometry(args, scn: Scenario) -> int:
    _, _, frame, gen = build_geometry(scn)
    doc = geometry_report(frame, gen)
    _write(_out(args, "geometry.json"), harness.dumps(doc))
    qx, qh = q_via_x1(frame), q_via_hessian(frame)
    _say(args, f"scenario {scn.name}")
    _say(args, "M =\n" + _fmt(frame.M))
    _say(args, "C =\n" + _fmt(frame.C))
    _say(args, f"Q = {_fmt(frame.Q)}  (X1 route {qx.value:.8g}, Hessian route {_fmt(qh.Q_estimate)})")
    _say(args, f"dsf eigenvalues = {_fmt(frame.dsf_eigenvalues)}")
    _say(args, f"chi = {frame.chi:.8g}")
    _say(args, f"genericity: {gen.verdict}")
    return 0


def cmd_predict(args, scn: Scenario) -> int:
    built = build(scn)
    pred = harness.prediction_for(built, lattice=built.lattice(scn.eps_list[-1]))
    x1 = scn.x_grid
    pts = np.zeros((x1.size, built.frame.n))
    pts[:, 0] = x1
    profiles = [harness.Profile(None, pts, pred.at_xcheck(x1), "predicted", scn.A)]
    ctb = ctb_from_prediction(pred)
    h = pred.h_of_xcheck(x1)
    ctb_vals = np.full(h.size, np.nan + 0j)
    for i, hh in enumerate(h):
        try:
            ctb_vals[i] = ctb(hh)
        except EvalAtSingularity:
            pass
    profiles.append(harness.Profile(None, pts, ctb_vals, "ctb", scn.A))
    h_grid = np.linspace(-5.0, 5.0, 101)
    consts = pred.to_dict()
    consts["h_grid"] = h_grid.tolist()
    consts["dtb_on_h_grid"] = pred.profile(h_grid)
    _write(_out(args, "predicted.csv"), harness.profiles_csv(profiles))
    _write(_out(args, "constants.json"), harness.dumps(consts))
    _say(args, f"scenario {scn.name}: kappa = {pred.kappa:.6g}")
    _say(args, f"C1 = {pred.C1:.8g}  c1+ = {pred.c1_plus:.8g}  c1- = {pred.c1_minus:.8g}")
    if pred.plateau_interior is not None:
        _say(args, f"plateau interior = {pred.plateau_interior.real:.8g}")
        _say(args, f"plateau exterior = {pred.plateau_exterior.real:.8g}")
        _say(args, f"difference = {(pred.plateau_exterior - pred.plateau_interior).real:.8g}  (C1 c1 = {pred.jump.real:.8g})")
    vals = np.asarray(consts["dtb_on_h_grid"])
    _say(args, f"profile on |h| <= 5: min {vals.real.min():.6g}, max {vals.real.max():.6g}, finite {bool(np.all(np.isfinite(vals)))}")
    return 0


def cmd_reconstruct(args, scn: Scenario) -> int:
    built = build(scn)
    x1 = scn.x_grid
    pts = np.zeros((x1.size, built.frame.n))
    pts[:, 0] = x1
    profiles = []
    for eps in scn.eps_list:
        req = ReconstructionRequest(pts, eps, A=scn.A, mode=args.mode, rho=scn.rho, chart_radius=scn.chart_radius)
        res = reconstruct(req, built.source, built.kernel, built.symbol, built.frame,
                          lattice=built.lattice(eps), genericity=built.genericity)
        profiles.append(harness.Profile(eps, pts, res.scaled, args.mode, scn.A))
        _say(args, f"eps = {eps:.6g}: {args.mode} profile at {x1.size} points, "
                   f"range [{res.scaled.real.min():.6g}, {res.scaled.real.max():.6g}]")
    _write(_out(args, "profiles.csv"), harness.profiles_csv(profiles))
    return 0


def cmd_verify(args, scn: Scenario) -> int:
    if scn.rho < 8:
        log.warning("oversampling rho=%d is below the recommended 8", scn.rho)
    report, profiles = harness.run_sweep(scn)
    harness.emit(report, profiles, args.out)
    _say(args, f"scenario {scn.name}: kappa = {report.kappa:.6g}; {report.verdict}")
    _say(args, f"{'eps':>12} {'sup err':>10} {'rms err':>10}")
    for e, s, r in zip(report.eps_list, report.sup_errors, report.rms_errors):
        _say(args, f"{e:12.6g} {s:10.4%} {r:10.4%}")
    if report.order is not None:
        _say(args, f"fitted order {report.order:.3f}")
    for key, c in report.controls.items():
        if "delta" in c:
            _say(args, f"control {key}: delta {c['delta']:.4%}")
    for note in report.notes:
        _say(args, f"note: {note}")
    sys.stdout.flush()
    if report.status == "gated-skip":
        log.warning("genericity condition fails (%s); transition assertions skipped", report.verdict)
        return 0
    if report.status == "inconclusive":
        log.warning("discretization controls moved results by at least %.2f%%; report is inconclusive",
                    100 * report.thresholds["control"])
        return 0
    _say(args, f"status: {report.status}")
    return 0 if report.status == "pass" else 1


def cmd_kernel_info(args, scn: Scenario) -> int:
    try:
        kernel = make_kernel(args.kernel or scn.kernel)
    except KeyError as exc:
        raise ConfigError(str(exc)) from exc
    order, table = kernel_exactness(kernel, max_order=3)
    doc = {
        "name": kernel.name,
        "radius": kernel.radius,
        "smoothness": kernel.smoothness,
        "declared_order": kernel.declared_order,
        "verified_order": order,
        "integral": kernel.integral(),
        "residuals": table,
    }
    _write(_out(args, "kernel.json"), harness.dumps(doc))
    _say(args, f"kernel {kernel.name}: support radius {kernel.radius:g}, C^{kernel.smoothness}, "
               f"integral {doc['integral']:.12g}, exactness order {order}")
    return 0


COMMANDS = {
    "geometry": cmd_geometry,
    "predict": cmd_predict,
    "reconstruct": cmd_reconstruct,
    "verify": cmd_verify,
    "kernel-info": cmd_kernel_info,
}


def build_parser() -> argparse.ArgumentParser:
    keys = "\n".join(f"  {k:<20} {h}" for k, (_, _, h) in OVERRIDES.items())
    epilog = f"presets: {', '.join(sorted(PRESETS))}\n\noverride keys for --set:\n{keys}"
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", default="crt2d-ramp-k0", help="preset name or path to a scenario JSON file")
    common.add_argument("--out", default="artifact-out", help="output directory")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a scenario field (repeatable)")
    verb = common.add_mutually_exclusive_group()
    verb.add_argument("--quiet", action="store_true")
    verb.add_argument("--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="artifact", description="Transition behaviour of sampled generalized Radon reconstructions.",
                                epilog=epilog, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common], epilog=epilog, formatter_class=argparse.RawDescriptionHelpFormatter)
        if name == "reconstruct":
            sp.add_argument("--mode", choices=("discrete", "continuous"), default="discrete")
        if name == "kernel-info":
            sp.add_argument("--kernel", default=None, help="kernel name (defaults to the scenario kernel)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING if args.quiet else (logging.INFO if args.verbose else logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s: %(message)s")
    if args.quiet:
        logging.getLogger().setLevel(logging.ERROR)
    try:
        scn = apply_overrides(load_scenario(args.scenario), args.overrides)
        return COMMANDS[args.command](args, scn)
    except ArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except AssertionError as exc:
        print(f"assertion failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
