"""Command-line front end.

Every command reads a JSON configuration (``--config``) with ``--set KEY=VALUE``
overrides, writes its artifacts into ``--out``, and records the resolved
configuration and a checksum manifest next to them.

Exit codes: 0 on success, 2 on a violated precondition, 3 on a numerical
failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import anosovgeo, modelgeo, recover, tracelab
from ._util import dumps
from .errors import NumericalError, PreconditionError

COMMANDS = ("spectrum", "weyl", "trace", "geodesics", "xray", "recover", "oplab")


@dataclass
class ExperimentConfig:
    """Resolved parameters of one run; unknown keys are rejected."""

    command: str = "spectrum"
    # model spectra
    model: str = "ball"
    n: int = 3
    kmax: int = 50
    L: float = 2.0
    boundary_eigenvalues: list | None = None
    profile: object = "identity"
    potential: object = 0.0
    spectrum_file: str | None = None
    # second spectrum for difference traces
    model_b: str | None = None
    profile_b: object = "identity"
    potential_b: object = 0.0
    # traces
    bandwidth: float | None = None
    t_min: float = 0.0
    t_max: float = 14.0
    dt: float | None = None
    lengths: list | None = None
    half_width: float | None = None
    # surface
    W: int = 3
    basis_size: int = 20
    bump_width: float = 0.45
    ridge: float = 0.0
    # recovery
    kind: str = "conformal"
    plant_order: int = 3
    plant_scale: float = 0.1
    Jmax: int = 4
    # return-operator lab
    N: int = 256
    t: float = math.pi
    k_order: int = 1
    b: str = "cos"
    # run
    seed: int = 0
    format: str = "csv"
    out: str = "out"

    @classmethod
    def keys(cls) -> set:
        return {f.name for f in fields(cls)}

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ExperimentConfig":
        unknown = set(mapping) - cls.keys()
        if unknown:
            raise PreconditionError(f"unknown configuration keys: {sorted(unknown)}")
        cfg = cls(**mapping)
        if cfg.command not in COMMANDS:
            raise PreconditionError(f"unknown command {cfg.command!r}")
        if cfg.format not in ("csv", "json", "svg"):
            raise PreconditionError(f"unknown format {cfg.format!r}")
        return cfg

    def to_json(self) -> dict:
        # the output location is not a parameter of the experiment
        doc = asdict(self)
        doc.pop("out")
        return doc


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def resolve_config(args) -> ExperimentConfig:
    mapping: dict = {}
    if args.config:
        try:
            mapping.update(json.loads(Path(args.config).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise PreconditionError(f"cannot read configuration {args.config}: {exc}") from exc
    for item in args.set or []:
        if "=" not in item:
            raise PreconditionError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        mapping[k.strip()] = _parse_value(v)
    mapping["command"] = args.command
    if args.seed is not None:
        mapping["seed"] = args.seed
    if args.format is not None:
        mapping["format"] = args.format
    if args.out is not None:
        mapping["out"] = args.out
    return ExperimentConfig.from_mapping(mapping)


# -- helpers ------------------------------------------------------------------


def _profile(spec) -> modelgeo.RadialProfile:
    if isinstance(spec, list):
        return modelgeo.RadialProfile.polynomial(spec)
    if isinstance(spec, dict):
        params = dict(spec)
        name = params.pop("preset")
        return modelgeo.RadialProfile.preset(name, **params)
    if isinstance(spec, (int, float)):
        return modelgeo.RadialProfile.constant(float(spec))
    if isinstance(spec, str) and spec in modelgeo.PRESETS:
        return modelgeo.RadialProfile.preset(spec)
    return modelgeo.RadialProfile(str(spec))


def _model_spectrum(cfg: ExperimentConfig, model: str, profile, potential) -> modelgeo.SteklovSpectrum:
    if model == "ball":
        return modelgeo.ball_steklov_exact(cfg.n, cfg.kmax)
    if model == "cylinder":
        lam = cfg.boundary_eigenvalues
        if lam is None:
            lam = modelgeo.circle_eigenvalues(cfg.kmax)
        return modelgeo.cylinder_steklov(cfg.L, lam)
    if model == "conformal_ball":
        return modelgeo.conformal_ball_spectrum(_profile(profile), cfg.n, cfg.kmax)
    if model == "potential_ball":
        return modelgeo.potential_ball_spectrum(_profile(potential), cfg.n, cfg.kmax)
    raise PreconditionError(f"unknown model {model!r}")


def _spectrum(cfg: ExperimentConfig) -> modelgeo.SteklovSpectrum:
    if cfg.spectrum_file:
        try:
            text = Path(cfg.spectrum_file).read_text()
        except OSError as exc:
            raise PreconditionError(f"cannot read spectrum file: {exc}") from exc
        if cfg.spectrum_file.endswith(".json"):
            return modelgeo.SteklovSpectrum.from_json(text)
        return modelgeo.SteklovSpectrum.from_csv(text, cfg.n)
    return _model_spectrum(cfg, cfg.model, cfg.profile, cfg.potential)


class Run:
    """Output directory with artifact bookkeeping."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.dir = Path(cfg.out)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.artifacts: list[str] = []

    def write(self, name: str, text: str):
        (self.dir / name).write_text(text)
        self.artifacts.append(name)

    def finish(self):
        self.write("config.json", dumps(self.cfg.to_json()))
        entries = []
        for name in sorted(set(self.artifacts)):
            data = (self.dir / name).read_bytes()
            entries.append({"file": name, "sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)})
        manifest = {"command": self.cfg.command, "seed": self.cfg.seed, "artifacts": entries}
        (self.dir / "manifest.json").write_text(dumps(manifest))


def _surface(cfg: ExperimentConfig):
    group = anosovgeo.build_default_surface()
    classes = anosovgeo.enumerate_classes(group, cfg.W)
    return group, classes


def _system(cfg: ExperimentConfig):
    group, classes = _surface(cfg)
    basis = anosovgeo.BumpBasis.random(group, cfg.basis_size, seed=cfg.seed, width=cfg.bump_width)
    return group, classes, basis, anosovgeo.build_xray_system(basis, classes)


# -- commands -----------------------------------------------------------------


def cmd_spectrum(cfg: ExperimentConfig, run: Run):
    spec = _spectrum(cfg)
    run.write("spectrum.csv", spec.to_csv())
    run.write("spectrum.json", dumps(spec.to_json()))
    return f"{len(spec)} distinct eigenvalues, {spec.total} with multiplicity"


def cmd_weyl(cfg: ExperimentConfig, run: Run):
    spec = _spectrum(cfg)
    fit = tracelab.weyl_fit(spec, spec.n, detail=True)
    run.write("weyl.json", dumps({
        "schema": "weyl/v1", "volume": fit.volume, "coefficient": fit.coefficient,
        "sigma_range": list(fit.sigma_range), "relative_residual": fit.residual, "n": spec.n,
    }))
    return f"boundary volume {fit.volume:.6f}"


def cmd_trace(cfg: ExperimentConfig, run: Run):
    spec = _spectrum(cfg)
    smax = max(spec.sigma_max, 1.0)
    if cfg.model_b:
        spec_b = _model_spectrum(cfg, cfg.model_b, cfg.profile_b, cfg.potential_b)
        smax = max(smax, spec_b.sigma_max)
    dt = cfg.dt if cfg.dt is not None else min(0.01, 0.9 * math.pi / smax)
    grid = (cfg.t_min, cfg.t_max, dt)
    if cfg.model_b:
        sig = tracelab.difference_trace(spec, spec_b, cfg.bandwidth, grid)
    else:
        sig = tracelab.mollified_trace(spec, cfg.bandwidth, grid)
    peaks = tracelab.find_peaks(sig)
    if cfg.format == "json":
        run.write("trace.json", dumps({
            "schema": "trace/v1", "window": sig.window, "t": sig.t, "re": sig.values.real, "im": sig.values.imag,
        }))
    else:
        run.write("trace.csv", sig.to_csv())
    if cfg.format == "svg":
        run.write("trace.svg", sig.to_svg())
    run.write("peaks.json", dumps(peaks.to_json()))
    if cfg.lengths:
        amps = tracelab.extract_invariants(sig, cfg.lengths, cfg.half_width)
        run.write("invariants.json", dumps({
            "schema": "invariants/v1",
            "lengths": list(cfg.lengths),
            "amplitudes": [[float(a.real), float(a.imag)] for a in amps],
        }))
    return f"{len(peaks)} peaks above {peaks.threshold:.4g}"


def cmd_geodesics(cfg: ExperimentConfig, run: Run):
    group, classes = _surface(cfg)
    run.write("classes.csv", anosovgeo.classes_to_csv(classes))
    tol = 1e-9
    coll = anosovgeo.length_spectrum_report(classes, tol) if len(classes) <= 2000 else []
    run.write("collisions.json", dumps({
        "schema": "collisions/v1", "tol": tol,
        "collisions": [{"a": c.word_a, "b": c.word_b, "difference": c.difference, "exact": c.exact} for c in coll],
    }))
    return f"{len(classes)} classes, systole {classes[0].length:.9f}"


def cmd_xray(cfg: ExperimentConfig, run: Run):
    group, classes, basis, system = _system(cfg)
    run.write("xray.json", dumps(system.to_json()))
    rng = np.random.default_rng(cfg.seed)
    x0 = rng.standard_normal(len(basis))
    ridge = cfg.ridge
    if system.rank_deficient and ridge == 0:
        ridge = 1e-10
    x = anosovgeo.xray_invert(system, system.matrix @ x0, ridge)
    err = float(np.linalg.norm(x - x0) / np.linalg.norm(x0))
    run.write("roundtrip.json", dumps({
        "schema": "roundtrip/v1", "ridge": ridge, "relative_error": err,
        "smallest_singular_value": system.smallest_singular_value, "condition": system.condition,
    }))
    return f"{system.shape[0]}x{system.shape[1]} system, condition {system.condition:.3e}, round trip {err:.2e}"


def cmd_recover(cfg: ExperimentConfig, run: Run):
    group, classes, basis, system = _system(cfg)
    rng = np.random.default_rng(cfg.seed)
    kind = cfg.kind
    if kind == "conformal":
        rows, row = cfg.Jmax + 2, cfg.plant_order + 1
    elif kind == "potential":
        rows, row = cfg.Jmax, cfg.plant_order - 1
    else:
        raise PreconditionError(f"unknown jet kind {kind!r}")
    if not 0 <= row < rows or (kind == "conformal" and row == 0):
        raise PreconditionError(f"plant order {cfg.plant_order} is outside the recoverable range")
    zero = recover.SurfaceJet.zeros(kind, rows - 1, basis)
    plant = cfg.plant_scale * rng.standard_normal(len(basis))
    other = recover.SurfaceJet.planted(kind, rows - 1, row, plant, basis)
    result = recover.run_pipeline(zero, other, system, cfg.n, cfg.Jmax, ridge=cfg.ridge)
    doc = result.to_json()
    if result.first_nonzero_order is not None:
        pts = recover.sample_points(group, 200, seed=cfg.seed)
        doc["planted_order"] = cfg.plant_order
        doc["field_relative_error"] = recover.field_error(basis, result.jet.row(row), plant, pts)
    run.write("recover.json", dumps(doc))
    summary = result.summary()
    run.write("summary.txt", summary + "\n")
    return summary


def cmd_oplab(cfg: ExperimentConfig, run: Run):
    funcs = {"cos": np.cos, "sin": np.sin, "zero": lambda x: 0 * x, "cos2": lambda x: np.cos(2 * x)}
    if cfg.b not in funcs:
        raise PreconditionError(f"unknown symbol {cfg.b!r}; choose from {sorted(funcs)}")
    res = tracelab.return_operator_lab(funcs[cfg.b], cfg.k_order, cfg.N, cfg.t)
    run.write("oplab.json", dumps({
        "schema": "oplab/v1", "N": res.N, "t": res.t, "k_order": res.k_order,
        "window": [int(np.abs(res.freqs).min()), int(np.abs(res.freqs).max())],
        "mean_relative_deviation": res.deviation, "decay_exponent": res.decay_exponent,
    }))
    lines = ["k,deviation,column_norm"] + [
        f"{int(k)},{d!r},{c!r}" for k, d, c in zip(res.freqs, res.deviations, res.column_norms)
    ]
    run.write("oplab.csv", "\n".join(lines) + "\n")
    return f"mean relative deviation {res.deviation:.4e}, decay exponent {res.decay_exponent:.3f}"


HANDLERS = {
    "spectrum": cmd_spectrum, "weyl": cmd_weyl, "trace": cmd_trace, "geodesics": cmd_geodesics,
    "xray": cmd_xray, "recover": cmd_recover, "oplab": cmd_oplab,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="steklov-lab", description="Steklov spectra, wave traces and boundary recovery.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", metavar="PATH", help="JSON configuration file")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--set", action="append", metavar="K=V", help="override a configuration key (repeatable)")
    p.add_argument("--seed", type=int, help="seed of the run's random generator")
    p.add_argument("--format", choices=("csv", "json", "svg"), help="main output format")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        run = Run(cfg)
        message = HANDLERS[cfg.command](cfg, run)
        run.finish()
    except PreconditionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    print(message)
    return 0


if __name__ == "__main__":
    sys.exit(main())
