"""Simulation driver, convergence studies, and persistence.

A run is strictly sequential in time; the per-step minimizing-movements
ledger is checked against the variant's own energy (weighted for pinning,
domain-restricted for the bounded variants) and any violation beyond 1e-9
aborts the run with a diagnostic dump.  Identical config and seed reproduce
bit-identical records and snapshots.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .energy import LEDGER_TOL, e_h, e_h_localized, metric_term
from .geometry import (circle_curve, circle_filament_field, circle_reference,
                       dipole_field, extract_vorticity, line_curve,
                       periodic_filament_field, phi_sigma, save_curve)
from .grid import ScalarField, TorusGrid, VectorField, sample
from .mbo import (PinningPotential, dirichlet_step, hmhf_step, mbo_step,
                  neumann_step, pinning_step)
from .spectral import convolve_values

__all__ = [
    "SimulationConfig",
    "RunRecord",
    "LedgerViolation",
    "run",
    "convergence_study",
    "save_field",
    "load_field",
    "build_initial",
    "build_grid",
]

ABORT_TOL = 1e-9
FORMAT_VERSION = 1

VARIANTS = ("periodic", "neumann", "dirichlet", "pinning", "hmhf")
INITIAL_KINDS = ("straight_pair", "circle", "dipole", "file", "constant",
                 "plane_wave", "random_smooth")


class LedgerViolation(RuntimeError):
    """The exact per-step energy inequality failed beyond tolerance."""


@dataclass
class SimulationConfig:
    variant: str = "periodic"
    grid: dict = field(default_factory=lambda: {"resolution": [64, 64, 64],
                                                "period": [1.0, 1.0, 1.0]})
    h: float = 4e-4
    steps: int = 25
    sigma: float = 0.08
    initial: dict = field(default_factory=lambda: {
        "kind": "circle", "r0": 0.25, "center": [0.5, 0.5, 0.5], "plane_axis": 2})
    potential: dict | None = None
    mask: dict | None = None
    ubar: dict | None = None
    diagnostics: dict = field(default_factory=lambda: {
        "ledger": True, "gronwall": False, "el_residuals": False,
        "extraction_cadence": 5})
    output_dir: str | None = None
    seed: int = 1234

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if not (self.h > 0):
            raise ValueError("h must be positive")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        kind = self.initial.get("kind")
        if kind not in INITIAL_KINDS:
            raise ValueError(f"unknown initial kind {kind!r}; choose from {INITIAL_KINDS}")
        grid = build_grid(self.grid)
        if self.sigma <= 2.0 * max(grid.spacing):
            raise ValueError("sigma must exceed twice the largest grid spacing")

    @classmethod
    def from_dict(cls, data: dict) -> "SimulationConfig":
        known = {f for f in cls.__dataclass_fields__}
        clean = {}
        for key, val in data.items():
            if key.startswith("_"):
                continue
            if key not in known:
                raise ValueError(f"unknown config key {key!r}")
            clean[key] = val
        return cls(**clean)

    def to_dict(self) -> dict:
        return {
            "variant": self.variant, "grid": self.grid, "h": self.h,
            "steps": self.steps, "sigma": self.sigma, "initial": self.initial,
            "potential": self.potential, "mask": self.mask, "ubar": self.ubar,
            "diagnostics": self.diagnostics, "output_dir": self.output_dir,
            "seed": self.seed,
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def build_grid(spec: dict) -> TorusGrid:
    return TorusGrid(tuple(spec["resolution"]),
                     tuple(spec.get("period", [1.0] * len(spec["resolution"]))))


def _smooth_random_unit(grid: TorusGrid, codomain: int, seed: int,
                        amplitude: float = 0.35, max_mode: int = 2) -> VectorField:
    """Bandlimited random perturbation of a constant section, normalized."""
    rng = np.random.default_rng(seed)
    coords = grid.meshgrid()
    vals = np.zeros(grid.resolution + (codomain,))
    vals[..., -1] = 1.0
    modes = [m for m in np.ndindex(*((2 * max_mode + 1,) * grid.dim))]
    for c in range(codomain):
        for m in modes:
            k = np.array(m) - max_mode
            if np.all(k == 0):
                continue
            phase = sum(2 * np.pi * k[ax] * coords[ax] / grid.period[ax]
                        for ax in range(grid.dim))
            ab = amplitude * rng.standard_normal(2) / (1 + np.sum(k**2))
            vals[..., c] += ab[0] * np.cos(phase) + ab[1] * np.sin(phase)
    norms = np.sqrt(np.sum(vals**2, axis=-1))
    if np.min(norms) < 1e-6:
        raise ValueError("random field degenerate; change the seed")
    return VectorField(grid, vals / norms[..., None], unit_flag=True)


def build_initial(config: SimulationConfig, grid: TorusGrid) -> VectorField:
    spec = dict(config.initial)
    kind = spec.pop("kind")
    if kind == "constant":
        vec = np.asarray(spec.get("vector", [1.0, 0.0]), dtype=np.float64)
        vec = vec / np.sqrt(np.sum(vec**2))
        vals = np.broadcast_to(vec, grid.resolution + (len(vec),)).copy()
        return VectorField(grid, vals, unit_flag=True)
    if kind == "plane_wave":
        axis = int(spec.get("axis", 0))
        mode = int(spec.get("mode", 1))
        def f(*coords):
            ph = 2 * np.pi * mode * coords[axis] / grid.period[axis]
            return np.stack([np.cos(ph), np.sin(ph)], axis=-1)
        return sample(grid, f)
    if kind == "circle":
        return circle_filament_field(grid, float(spec["r0"]),
                                     spec.get("center", [p / 2 for p in grid.period]),
                                     int(spec.get("plane_axis", 2)),
                                     int(spec.get("sign", 1)))
    if kind == "straight_pair":
        axis = int(spec.get("axis", 2))
        pos = spec.get("positions", [[0.25, 0.5], [0.75, 0.5]])
        curves = [line_curve(pos[0], axis, grid.period, orientation=1),
                  line_curve(pos[1], axis, grid.period, orientation=-1)]
        return periodic_filament_field(grid, curves)
    if kind == "dipole":
        return dipole_field(grid, spec["p"], spec["q"],
                            balanced=bool(spec.get("balanced", True)))
    if kind == "random_smooth":
        return _smooth_random_unit(grid, int(spec.get("codomain", 3)),
                                   config.seed,
                                   float(spec.get("amplitude", 0.35)),
                                   int(spec.get("max_mode", 2)))
    if kind == "file":
        return load_field(spec["path"])
    raise ValueError(f"unhandled initial kind {kind!r}")


def _build_mask(grid: TorusGrid, spec: dict) -> ScalarField:
    kind = spec.get("kind", "slab")
    coords = grid.meshgrid()
    if kind == "slab":
        ax = int(spec.get("axis", 0))
        lo, hi = float(spec["lo"]), float(spec["hi"])
        vals = ((coords[ax] >= lo) & (coords[ax] < hi)).astype(np.float64)
    elif kind == "ball":
        c = np.asarray(spec["center"], dtype=np.float64)
        r = float(spec["radius"])
        d2 = sum(((coords[ax] - c[ax] + grid.period[ax] / 2) % grid.period[ax]
                  - grid.period[ax] / 2)**2 for ax in range(grid.dim))
        vals = (d2 < r**2).astype(np.float64)
    else:
        raise ValueError(f"unknown mask kind {kind!r}")
    if not vals.any():
        raise ValueError("mask is empty")
    return ScalarField(grid, vals)


def _build_ubar(grid: TorusGrid, spec: dict) -> VectorField:
    kind = spec.get("kind", "constant")
    if kind == "constant":
        vec = np.asarray(spec.get("vector", [1.0, 0.0]), dtype=np.float64)
        vec = vec / np.sqrt(np.sum(vec**2))
        vals = np.broadcast_to(vec, grid.resolution + (len(vec),)).copy()
        return VectorField(grid, vals, unit_flag=True)
    if kind == "plane_wave":
        axis = int(spec.get("axis", 0))
        mode = int(spec.get("mode", 1))
        def f(*coords):
            ph = 2 * np.pi * mode * coords[axis] / grid.period[axis]
            return np.stack([np.cos(ph), np.sin(ph)], axis=-1)
        return sample(grid, f)
    raise ValueError(f"unknown ubar kind {kind!r}")


def _build_potential(grid: TorusGrid, spec: dict) -> PinningPotential:
    kind = spec.get("kind", "cosine")
    if kind != "cosine":
        raise ValueError(f"unknown potential kind {kind!r}")
    axis = int(spec.get("axis", 0))
    amp = float(spec.get("amplitude", 0.25))
    coords = grid.meshgrid()
    vals = 1.0 + amp * np.cos(2 * np.pi * coords[axis] / grid.period[axis])
    if spec.get("reciprocal", False):
        vals = 1.0 / vals
    return PinningPotential(ScalarField(grid, vals))


@dataclass
class RunRecord:
    """Per-step ledger of a simulation run."""

    rows: list
    provenance: dict
    extra: dict = field(default_factory=dict)

    CSV_HEADER = "step,time,e_h,e_h_local,dissipation_cum,metric,radius_est,ledger_ok"

    def to_csv(self) -> str:
        lines = [self.CSV_HEADER]
        for r in self.rows:
            radius = "" if r["radius_est"] is None else repr(r["radius_est"])
            lines.append(
                f'{r["step"]},{r["time"]!r},{r["e_h"]!r},{r["e_h_local"]!r},'
                f'{r["dissipation_cum"]!r},{r["metric"]!r},{radius},'
                f'{str(r["ledger_ok"]).lower()}')
        return "\n".join(lines) + "\n"

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_csv())

    @property
    def all_ledger_ok(self) -> bool:
        return all(r["ledger_ok"] for r in self.rows[1:])


class _VariantEngine:
    """Per-variant stepping plus the matching energy/metric forms."""

    def __init__(self, config: SimulationConfig, grid: TorusGrid):
        self.variant = config.variant
        self.grid = grid
        self.h = config.h
        self.mask = _build_mask(grid, config.mask) if config.mask else None
        self.ubar = _build_ubar(grid, config.ubar) if config.ubar else None
        self.potential = (_build_potential(grid, config.potential)
                          if config.potential else None)
        if self.variant == "pinning" and self.potential is None:
            raise ValueError("pinning variant requires a potential spec")
        if self.variant in ("neumann", "dirichlet") and self.mask is None:
            raise ValueError(f"{self.variant} variant requires a mask spec")
        if self.variant == "dirichlet" and self.ubar is None:
            raise ValueError("dirichlet variant requires boundary data (ubar)")
        if self.variant == "dirichlet":
            ext = (1.0 - self.mask.values)[..., None] * self.ubar.values
            self.b_ext = convolve_values(grid, ext, self.h)
        if self.variant in ("neumann", "dirichlet"):
            self.chi_conv = convolve_values(grid, self.mask.values, self.h)
            self.chi_const = float(np.mean(self.mask.values * self.chi_conv)) \
                * grid.volume

    def step(self, u: VectorField):
        if self.variant in ("periodic",):
            return mbo_step(u, self.h)
        if self.variant == "hmhf":
            return hmhf_step(u, self.h)
        if self.variant == "pinning":
            return pinning_step(u, self.potential, self.h)
        if self.variant == "neumann":
            return neumann_step(u, self.mask, self.h)
        if self.variant == "dirichlet":
            return dirichlet_step(u, self.mask, self.ubar, self.h)
        raise AssertionError(self.variant)

    def energy(self, u: VectorField) -> float:
        h, grid = self.h, self.grid
        if self.variant in ("periodic", "hmhf"):
            return e_h(u, h)
        if self.variant == "pinning":
            a = self.potential.a.values
            conv = convolve_values(grid, u.values, h)
            dens = a * (1.0 - np.sum(u.values * conv, axis=-1))
            return float(np.mean(dens)) * grid.volume / h
        chi = self.mask.values
        masked = chi[..., None] * u.values
        conv = convolve_values(grid, masked, h)
        quad = float(np.mean(np.sum(masked * conv, axis=-1))) * grid.volume
        dom = (self.chi_const - quad) / h
        if self.variant == "neumann":
            return dom
        # dirichlet: domain energy plus the boundary penalization term
        pen_dens = chi * (1.0 - np.sum(u.values * self.b_ext, axis=-1))
        pen = 2.0 * float(np.mean(pen_dens)) * grid.volume / h
        return dom + pen

    def metric(self, u: VectorField, w: VectorField) -> float:
        h, grid = self.h, self.grid
        if self.variant in ("periodic", "hmhf"):
            return metric_term(u, w, h)
        diff = u.values - w.values
        if self.variant == "pinning":
            a = self.potential.a.values
            conv = convolve_values(grid, a[..., None] * diff, h) \
                + a[..., None] * convolve_values(grid, diff, h)
            dens = 0.5 * np.sum(diff * conv, axis=-1)
            return float(np.mean(dens)) * grid.volume / h
        chi = self.mask.values
        mdiff = chi[..., None] * diff
        conv = convolve_values(grid, mdiff, h)
        dens = np.sum(mdiff * conv, axis=-1)
        return float(np.mean(dens)) * grid.volume / h


def _circle_spec(config: SimulationConfig):
    if config.initial.get("kind") != "circle":
        return None
    return (float(config.initial["r0"]),
            np.asarray(config.initial.get("center", [0.5, 0.5, 0.5])),
            int(config.initial.get("plane_axis", 2)))


def _estimate_radius(grid: TorusGrid, u: VectorField, v: VectorField | None,
                     circle) -> float | None:
    """Mean in-plane distance of extracted marks near the reference plane."""
    r0, center, plane_axis = circle
    refine = None
    if v is not None:
        refine = ScalarField(grid, np.sqrt(np.sum(v.values**2, axis=-1)))
    res = extract_vorticity(u, refine_field=refine)
    pts = res.points
    if len(pts) == 0:
        return None
    inplane = [ax for ax in range(grid.dim) if ax != plane_axis]
    zoff = np.abs((pts[:, plane_axis] - center[plane_axis]
                   + grid.period[plane_axis] / 2) % grid.period[plane_axis]
                  - grid.period[plane_axis] / 2)
    near = pts[zoff < 0.15 * grid.period[plane_axis]]
    if len(near) == 0:
        return None
    da = (near[:, inplane[0]] - center[inplane[0]]
          + grid.period[inplane[0]] / 2) % grid.period[inplane[0]] \
        - grid.period[inplane[0]] / 2
    db = (near[:, inplane[1]] - center[inplane[1]]
          + grid.period[inplane[1]] / 2) % grid.period[inplane[1]] \
        - grid.period[inplane[1]] / 2
    return float(np.mean(np.hypot(da, db)))


def run(config: SimulationConfig, observer=None) -> RunRecord:
    """Execute a configured simulation and return its per-step record.

    ``observer(step, u_prev, outcome)`` is called after every step; it lets
    callers accumulate streaming diagnostics without the harness keeping the
    whole state history in memory.
    """
    grid = build_grid(config.grid)
    engine = _VariantEngine(config, grid)
    u = build_initial(config, grid)
    diag = dict(config.diagnostics)
    cadence = int(diag.get("extraction_cadence", 5))
    do_ledger = bool(diag.get("ledger", True))
    do_gronwall = bool(diag.get("gronwall", False))
    gron_cadence = int(diag.get("gronwall_cadence", max(cadence, 1)))
    circle = _circle_spec(config)
    sigma = config.sigma

    outdir = config.output_dir
    if outdir:
        os.makedirs(outdir, exist_ok=True)
        save_field(u, os.path.join(outdir, "state_initial"),
                   time=0.0, h=config.h, kind="state")

    def gron_phi(t: float) -> ScalarField | None:
        if circle is None:
            return None
        r0, center, plane_axis = circle
        if t >= r0**2 / 2:
            return None
        ref = circle_curve(circle_reference(r0, t), center, plane_axis)
        return phi_sigma(grid, ref, sigma)

    rows = []
    gron_rows = []
    e_prev = engine.energy(u)
    phi0 = gron_phi(0.0) if do_gronwall else None
    e_loc0 = e_h_localized(u, phi0, config.h) if phi0 is not None else 0.0
    radius = _estimate_radius(grid, u, None, circle) if circle else None
    rows.append({"step": 0, "time": 0.0, "e_h": e_prev, "e_h_local": e_loc0,
                 "dissipation_cum": 0.0, "metric": 0.0, "radius_est": radius,
                 "ledger_ok": True})
    if do_gronwall and phi0 is not None:
        gron_rows.append((0.0, e_loc0))

    diss_cum = 0.0
    states_kept = [u] if diag.get("keep_states", False) else None
    for n in range(1, config.steps + 1):
        outcome = engine.step(u)
        u_new = outcome.u_next
        if observer is not None:
            observer(n, u, outcome)
        t = n * config.h
        e_now = engine.energy(u_new)
        m = engine.metric(u_new, u) if do_ledger else 0.0
        diss_cum += m
        ledger_ok = bool(e_now + m <= e_prev + LEDGER_TOL)
        violation = e_now + m - e_prev
        e_loc = 0.0
        if do_gronwall and n % gron_cadence == 0:
            phi = gron_phi(t)
            if phi is not None:
                e_loc = e_h_localized(u_new, phi, config.h)
                gron_rows.append((t, e_loc))
        radius = None
        if circle and (n % cadence == 0 or n == config.steps):
            radius = _estimate_radius(grid, u_new, outcome.v, circle)
        if radius is None and rows:
            radius = rows[-1]["radius_est"]
        rows.append({"step": n, "time": t, "e_h": e_now, "e_h_local": e_loc,
                     "dissipation_cum": diss_cum, "metric": m,
                     "radius_est": radius, "ledger_ok": ledger_ok})
        if do_ledger and violation > ABORT_TOL:
            record = RunRecord(rows, _provenance(config))
            if outdir:
                record.save(os.path.join(outdir, "run_record_aborted.csv"))
                save_field(u, os.path.join(outdir, "state_before_violation"),
                           time=t - config.h, h=config.h, kind="state")
                save_field(u_new, os.path.join(outdir, "state_after_violation"),
                           time=t, h=config.h, kind="state")
            raise LedgerViolation(
                f"step {n}: E_h + metric exceeds predecessor energy by "
                f"{violation:.3e} (> {ABORT_TOL:.0e}); diagnostic dump "
                f"{'written to ' + outdir if outdir else 'skipped (no output dir)'}")
        u = u_new
        e_prev = e_now
        if states_kept is not None:
            states_kept.append(u)

    record = RunRecord(rows, _provenance(config))
    if do_gronwall and gron_rows:
        arr = np.asarray(gron_rows)
        record.extra["gronwall_times"] = arr[:, 0]
        record.extra["gronwall_energy"] = arr[:, 1]
        record.extra["gronwall_max"] = float(np.max(arr[:, 1]))
    if states_kept is not None:
        record.extra["states"] = states_kept
    record.extra["final_state"] = u
    if outdir:
        record.save(os.path.join(outdir, "run_record.csv"))
        save_field(u, os.path.join(outdir, "state_final"),
                   time=config.steps * config.h, h=config.h, kind="state")
        if circle:
            res = extract_vorticity(u)
            for i, c in enumerate(res.curves):
                save_curve(c, os.path.join(outdir, f"curve_{i}.csv"))
        if do_gronwall and gron_rows:
            with open(os.path.join(outdir, "gronwall.csv"), "w",
                      encoding="utf-8", newline="\n") as fh:
                fh.write("time,e_h_localized\n")
                for t, e in gron_rows:
                    fh.write(f"{t!r},{e!r}\n")
        with open(os.path.join(outdir, "meta.json"), "w", encoding="utf-8") as fh:
            json.dump(record.provenance, fh, indent=2, sort_keys=True)
    return record


def _provenance(config: SimulationConfig) -> dict:
    return {"config": config.to_dict(), "config_hash": config.digest(),
            "code_version": __version__}


def convergence_study(base: SimulationConfig, h_list) -> dict:
    """Run the base circle configuration across a decreasing h list.

    For each h: terminal extracted radius and its squared-radius error
    against the shrinking-circle reference, the integrated displacement
    ratio (measured normal motion over the reference motion, from one fifth
    of the horizon to the end), and the localized-energy running max.
    """
    h_list = list(h_list)
    if len(h_list) < 3:
        raise ValueError("need at least three h values")
    if any(h_list[i] <= h_list[i + 1] for i in range(len(h_list) - 1)):
        raise ValueError("h_list must be strictly decreasing")
    circle = _circle_spec(base)
    if circle is None:
        raise ValueError("convergence study requires a circle initial condition")
    r0 = circle[0]
    t_end = base.steps * base.h
    rows = []
    for h in h_list:
        steps = int(round(t_end / h))
        cfg_dict = base.to_dict()
        cfg_dict["h"] = h
        cfg_dict["steps"] = steps
        cfg_dict["output_dir"] = None
        cfg_dict["diagnostics"] = dict(base.diagnostics)
        cfg_dict["diagnostics"]["gronwall"] = True
        t1_step = max(1, steps // 5)
        cfg_dict["diagnostics"]["extraction_cadence"] = t1_step
        cfg = SimulationConfig.from_dict(cfg_dict)
        record = run(cfg)
        radii = {r["step"]: r["radius_est"] for r in record.rows
                 if r["radius_est"] is not None}
        r_end = record.rows[-1]["radius_est"]
        if r_end is None:
            raise RuntimeError(f"extraction failed at h={h}")
        ref_end = circle_reference(r0, t_end)
        t1 = t1_step * h
        r_t1 = radii.get(t1_step)
        ratio = None
        if r_t1 is not None:
            ref_t1 = circle_reference(r0, t1)
            denom = ref_t1 - ref_end
            if denom > 0:
                ratio = (r_t1 - r_end) / denom
        rows.append({
            "h": h, "steps": steps, "radius_terminal": r_end,
            "radius_reference": ref_end,
            "r2_error": abs(r_end**2 - ref_end**2),
            "kappa_h_ratio": ratio,
            "gronwall_max": record.extra.get("gronwall_max"),
        })
    errs = np.asarray([r["r2_error"] for r in rows])
    hs = np.asarray([r["h"] for r in rows])
    good = errs > 0
    slope = float(np.polyfit(np.log(hs[good]), np.log(errs[good]), 1)[0]) \
        if good.sum() >= 2 else 0.0
    return {"rows": rows, "error_trend_slope": slope, "t_end": t_end, "r0": r0}


# ---------------------------------------------------------------------------
# snapshot persistence


def _split_snapshot_path(path) -> str:
    path = str(path)
    if path.endswith(".json") or path.endswith(".bin"):
        return path.rsplit(".", 1)[0]
    return path


def save_field(u: VectorField, path, time: float = 0.0, h: float | None = None,
               kind: str = "state"):
    """Write ``<name>.json`` sidecar and ``<name>.bin`` raw payload.

    Payload is float64 little-endian, C order, component-interleaved; the
    round trip is bit exact.
    """
    base = _split_snapshot_path(path)
    header = {
        "format_version": FORMAT_VERSION,
        "dim": u.grid.dim,
        "resolution": list(u.grid.resolution),
        "period": list(u.grid.period),
        "codomain": u.codomain,
        "time": time,
        "h": h,
        "kind": kind,
        "byte_order": "little",
        "scalar": "f64",
        "layout": "C-order, component-interleaved",
    }
    payload = np.ascontiguousarray(u.values, dtype="<f8")
    with open(base + ".json", "w", encoding="utf-8") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(base + ".bin", "wb") as fh:
        fh.write(payload.tobytes(order="C"))


def load_field(path, expect_codomain: int | None = None) -> VectorField:
    base = _split_snapshot_path(path)
    with open(base + ".json", "r", encoding="utf-8") as fh:
        header = json.load(fh)
    if header.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported snapshot format {header.get('format_version')}")
    if header.get("scalar") != "f64" or header.get("byte_order") != "little":
        raise ValueError("unsupported payload encoding")
    res = tuple(int(n) for n in header["resolution"])
    if len(res) != int(header["dim"]):
        raise ValueError(
            f"header dim {header['dim']} does not match resolution rank {len(res)}")
    codomain = int(header["codomain"])
    if expect_codomain is not None and codomain != expect_codomain:
        raise ValueError(
            f"snapshot codomain {codomain} != expected {expect_codomain}")
    with open(base + ".bin", "rb") as fh:
        raw = fh.read()
    expected_bytes = int(np.prod(res)) * codomain * 8
    if len(raw) != expected_bytes:
        raise ValueError(
            f"payload size {len(raw)} bytes does not match header "
            f"({expected_bytes} expected)")
    vals = np.frombuffer(raw, dtype="<f8").reshape(res + (codomain,))
    if not np.all(np.isfinite(vals)):
        raise ValueError("snapshot payload contains non-finite values")
    grid = TorusGrid(res, tuple(float(p) for p in header["period"]))
    norms = np.sqrt(np.sum(vals**2, axis=-1))
    unit = bool(np.max(np.abs(norms - 1.0)) <= 1e-12)
    return VectorField(grid, vals.copy(), unit_flag=unit)
