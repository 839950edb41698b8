"""Scenario documents and the objects built from them.

A scenario is a plain JSON-compatible description: family, interface,
filter, kernel, lattice and sweep parameters. ``build`` turns it into the
geometric frame, the data source and the prediction inputs.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .errors import ConfigError, IoFailure
from .families import FAMILIES, GrtFamily, InterfaceSurface, disk_surface
from .geometry import AdaptedFrame, GenericityReport, build_adapted_frame, check_genericity, solve_tangency
from .sampling import InterpolationKernel, Lattice, make_kernel
from .signals import ConormalData, FilterSymbol, SourcePhantom, e_phase, jump_phantom, push_forward_amplitudes
from .transform import DataSource, forward_grt

JITTER = (math.e / 7, math.pi / 11)


@dataclass
class Scenario:
    name: str
    family: str
    surface: dict
    seed: dict
    symbol: dict
    kernel: str = "linear"
    lattice_D: list = field(default_factory=lambda: [[1.0, 0.0], [0.0, 1.0]])
    origin_jitter: list = field(default_factory=lambda: list(JITTER))
    eps_list: list = field(default_factory=lambda: [1 / 64, 1 / 128, 1 / 256])
    A: float = 20.0
    rho: int = 8
    x_lo: float = -4.0
    x_hi: float = 4.0
    x_num: int = 81
    transverse: list = field(default_factory=list)
    chart_radius: float = 1.0
    taper_flat: float = 0.5
    taper_zero: float = 0.95
    amplitude: float = 1.0
    threshold_final: float = 0.05
    exclude_below: float = 0.0
    deltas: list = field(default_factory=lambda: [4e-2, 2e-2, 1e-2])
    interior_resolution: float = 1.0 / 512
    search_bound: int = 10_000
    controls: bool = True
    description: str = ""

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown scenario keys: {unknown}")
        missing = [k for k in ("name", "family", "surface", "seed", "symbol") if k not in d]
        if missing:
            raise ConfigError(f"scenario is missing keys: {missing}")
        return cls(**copy.deepcopy(d))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @property
    def x_grid(self) -> np.ndarray:
        return np.linspace(self.x_lo, self.x_hi, self.x_num)


def load_scenario(arg: str) -> Scenario:
    """A preset name or a path to a JSON scenario document."""
    if arg in PRESETS:
        return preset(arg)
    try:
        with open(arg) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read scenario {arg!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed scenario file {arg!r}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("scenario document must be a JSON object")
    return Scenario.from_dict(doc)


def save_scenario(scn: Scenario, path) -> None:
    try:
        with open(path, "w") as fh:
            fh.write(scn.to_json() + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# presets


def _pb_seed(center, radius, alpha0):
    c = np.asarray(center, float)
    th = np.array([math.cos(alpha0), math.sin(alpha0)])
    thp = np.array([-th[1], th[0]])
    return {"t": [float(c @ thp)], "y": [float(c @ th + radius), alpha0], "x0": (c + radius * th).tolist()}


def _arc_seed(center, radius, beta0):
    c = np.array([math.cos(beta0), math.sin(beta0)])
    d = np.asarray(center, float)
    L = float(np.linalg.norm(c - d))
    x0 = d + radius * (c - d) / L
    rho = L - radius
    v = (c - x0) / rho
    t0 = math.atan2(v[1], v[0]) - beta0
    t0 = (t0 + math.pi) % (2 * math.pi) - math.pi
    return {"t": [t0], "y": [rho, beta0], "x0": x0.tolist()}


def _golden_center(alpha0: float, along: float = 0.25, slope: float = (math.sqrt(5) - 1) / 2):
    # the data tangent of T_x0 has slope d.theta_perp(alpha0) in (p, alpha)
    th = np.array([math.cos(alpha0), math.sin(alpha0)])
    thp = np.array([-th[1], th[0]])
    return (along * th + slope * thp).tolist()


def _ramp() -> dict:
    return FilterSymbol(1.0, 1.0, 1.0).to_dict()


def _build_presets() -> dict:
    a0 = 0.65
    c = _golden_center(a0)
    arc_c, arc_r, arc_b = [-0.3, 0.3], 0.35, 0.7269885592133136
    out = {
        "crt2d-ramp-k0": Scenario(
            name="crt2d-ramp-k0",
            family="parallel-beam",
            surface={"kind": "disk", "center": c, "radius": 0.5},
            seed=_pb_seed(c, 0.5, a0),
            symbol=_ramp(),
            description="parallel beam, offset disk, ramp filter (kappa = 0)",
        ),
        "crt2d-lambda-k1": Scenario(
            name="crt2d-lambda-k1",
            family="parallel-beam",
            surface={"kind": "disk", "center": c, "radius": 0.5},
            seed=_pb_seed(c, 0.5, a0),
            symbol=FilterSymbol(2.0, 1.0, 1.0).to_dict(),
            kernel="keys",
            threshold_final=0.07,
            exclude_below=0.5,
            description="parallel beam, offset disk, second-order filter (kappa = 1)",
        ),
        "crt2d-frac-k05": Scenario(
            name="crt2d-frac-k05",
            family="parallel-beam",
            surface={"kind": "disk", "center": c, "radius": 0.5},
            seed=_pb_seed(c, 0.5, a0),
            symbol=FilterSymbol(1.5, e_phase(-1.5), e_phase(1.5)).to_dict(),
            threshold_final=0.07,
            exclude_below=0.5,
            description="parallel beam, offset disk, fractional filter of order 3/2 (kappa = 1/2)",
        ),
        "arcs2d-ramp-k0": Scenario(
            name="arcs2d-ramp-k0",
            family="circular-arcs",
            surface={"kind": "disk", "center": arc_c, "radius": arc_r},
            seed=_arc_seed(arc_c, arc_r, arc_b),
            symbol=_ramp(),
            description="circles centred on the unit circle, offset disk, ramp filter (kappa = 0)",
        ),
        "crt2d-nongeneric": Scenario(
            name="crt2d-nongeneric",
            family="parallel-beam",
            surface={"kind": "disk", "center": [0.0, 0.0], "radius": 1.0},
            seed=_pb_seed([0.0, 0.0], 1.0, 0.0),
            symbol=_ramp(),
            controls=False,
            description="parallel beam, centred unit disk seen at alpha = 0 (non-generic pair)",
        ),
    }
    for s in out.values():
        s.symbol = json.loads(json.dumps(s.symbol))
    return out


PRESETS = _build_presets()


def preset(name: str) -> Scenario:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    return copy.deepcopy(PRESETS[name])


# ---------------------------------------------------------------------------
# closed-form data


def chord_length(center, radius: float):
    """Parallel-beam transform of the disk indicator, ``2 sqrt(R^2 - (p - c.theta)^2)_+``."""
    c = np.asarray(center, float)

    def g(y):
        p, a = y[..., 0], y[..., 1]
        q = p - (c[0] * np.cos(a) + c[1] * np.sin(a))
        return 2.0 * np.sqrt(np.maximum(radius * radius - q * q, 0.0))

    return g


def arc_length(center, radius: float):
    """Length of the circle ``|x - theta(beta)| = rho`` inside the disk."""
    d = np.asarray(center, float)

    def g(y):
        r, b = y[..., 0], y[..., 1]
        L = np.hypot(np.cos(b) - d[0], np.sin(b) - d[1])
        with np.errstate(invalid="ignore", divide="ignore"):
            cosg = (r * r + L * L - radius * radius) / (2.0 * r * L)
        gam = np.arccos(np.clip(cosg, -1.0, 1.0))
        gam = np.where(r > 0, gam, 0.0)
        return 2.0 * np.abs(r) * gam

    return g


CLOSED_FORMS = {("parallel-beam", "disk"): chord_length, ("circular-arcs", "disk"): arc_length}


def raised_cosine_taper(flat: float, zero: float):
    def taper(s):
        s = np.abs(np.asarray(s, float))
        u = np.clip((s - flat) / (zero - flat), 0.0, 1.0)
        return 0.5 * (1.0 + np.cos(np.pi * u))

    return taper


# ---------------------------------------------------------------------------
# building


@dataclass
class Built:
    scenario: Scenario
    family: GrtFamily
    surface: InterfaceSurface
    frame: AdaptedFrame
    genericity: GenericityReport
    phantom: SourcePhantom
    source: DataSource
    symbol: FilterSymbol
    kernel: InterpolationKernel
    data_model: ConormalData | None = None

    def lattice(self, eps: float) -> Lattice:
        s = self.scenario
        D = np.asarray(s.lattice_D, float)
        origin = self.frame.pair.y0 + eps * (D @ np.asarray(s.origin_jitter, float))
        return Lattice(eps, D, origin)

    def conormal(self) -> ConormalData:
        if self.data_model is None:
            taper = raised_cosine_taper(self.scenario.taper_flat, self.scenario.taper_zero)
            self.data_model = push_forward_amplitudes(
                self.phantom, self.family, self.frame, chart_radius=self.scenario.chart_radius,
                taper=lambda y: taper(np.asarray(y)[..., 1]),
            )
        return self.data_model


def build_surface(spec: dict) -> InterfaceSurface:
    if spec.get("kind") != "disk":
        raise ConfigError(f"unsupported surface kind {spec.get('kind')!r}")
    return disk_surface(spec["center"], float(spec["radius"]))


def build_family(name: str) -> GrtFamily:
    if name not in FAMILIES:
        raise ConfigError(f"unknown family {name!r}; available: {sorted(FAMILIES)}")
    return FAMILIES[name]()


def build_geometry(scn: Scenario):
    fam = build_family(scn.family)
    surf = build_surface(scn.surface)
    seed = scn.seed
    pair = solve_tangency(fam, surf, (np.asarray(seed["t"], float), np.asarray(seed["y"], float)),
                          x0=None if seed.get("x0") is None else np.asarray(seed["x0"], float))
    frame = build_adapted_frame(fam, surf, pair)
    gen = check_genericity(frame, np.asarray(scn.lattice_D, float), search_bound=scn.search_bound)
    return fam, surf, frame, gen


def _support_box(g, frame: AdaptedFrame, chart: float, n: int = 241):
    """Bounding box (original coordinates) of the nonzero set of ``g``, padded."""
    y0 = frame.pair.y0
    half = 2.0 * chart + 1.0
    axes = [np.linspace(c - half, c + half, n) for c in y0]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    vals = np.abs(g(grid.reshape(-1, y0.size))).reshape(grid.shape[:-1])
    nz = np.argwhere(vals > 0)
    if nz.size == 0:
        return (y0 - chart, y0 + chart)
    step = np.array([a[1] - a[0] for a in axes])
    lo = np.array([axes[k][nz[:, k].min()] for k in range(y0.size)]) - 2 * step
    hi = np.array([axes[k][nz[:, k].max()] for k in range(y0.size)]) + 2 * step
    return (lo, hi)


def build_source(scn: Scenario, family: GrtFamily, surface: InterfaceSurface, frame: AdaptedFrame, phantom: SourcePhantom) -> DataSource:
    taper = raised_cosine_taper(scn.taper_flat, scn.taper_zero)
    maker = CLOSED_FORMS.get((scn.family, scn.surface.get("kind")))
    amp = phantom.amplitude
    if maker is not None:
        base = maker(scn.surface["center"], float(scn.surface["radius"]))
    else:  # pragma: no cover - exercised only by custom scenarios
        def base(y):
            y = np.atleast_2d(y)
            return np.array([forward_grt(phantom, family, yy, t_range=(-math.pi, math.pi)) for yy in y]) / amp

    def g(y):
        y = np.asarray(y, float)
        yt = frame.to_adapted_y(y)[..., 1]
        return amp * base(y) * taper(yt)

    box = _support_box(g, frame, scn.chart_radius)
    return DataSource(g, box, phantom.s0, name=f"{scn.family}:{scn.surface.get('kind')}")


def build(scn: Scenario) -> Built:
    fam, surf, frame, gen = build_geometry(scn)
    phantom = jump_phantom(surf, amplitude=scn.amplitude, N=frame.N)
    source = build_source(scn, fam, surf, frame, phantom)
    try:
        symbol = FilterSymbol.from_dict(scn.symbol)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad filter symbol: {exc}") from exc
    try:
        kernel = make_kernel(scn.kernel)
    except KeyError as exc:
        raise ConfigError(str(exc)) from exc
    return Built(scn, fam, surf, frame, gen, phantom, source, symbol, kernel)
