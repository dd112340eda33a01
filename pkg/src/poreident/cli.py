"""Command-line workflows: ``mesh``, ``flow``, ``transport``, ``identify``, ``synthesize``.

All artifacts go below one output directory and are listed with their sha256
checksums in ``manifest.json``. Only the main process writes files; worker
processes compute breakthrough curves and hand them back.

Exit codes: 0 success, 2 configuration or file format, 3 geometry or mesh
quality, 4 solver, 5 identification, 6 missing prerequisite artifact.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import identification as ident
from .config import LEVEL_NAMES, ExperimentConfig, load_config
from .exceptions import EmptyAdmissibleError, MissingArtifactError, PoreIdentError
from .geometry import build_ladder, read_mesh, write_mesh
from .stokes import read_flow, sample_along_line, solve_stokes, write_flow
from .transport import assemble_transport, run_transport, sensitivity_sweep

OUTPUT_ENV = "POREIDENT_OUTPUT"
MANIFEST = "manifest.json"


def _g(x) -> str:
    return format(float(x), ".17g")


def _tag(x) -> str:
    """Compact value label for file names."""
    return format(float(x), "g")


def level_name(i: int) -> str:
    return LEVEL_NAMES[i] if i < len(LEVEL_NAMES) else f"level{i}"


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    config_checksum: str = ""
    mesh_checksum: str = ""
    flow_checksum: str = ""
    files: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    events: dict = field(default_factory=dict)

    @classmethod
    def load(cls, root: Path) -> "RunManifest":
        path = root / MANIFEST
        if not path.exists():
            return cls()
        data = json.loads(path.read_text())
        return cls(**{k: data.get(k, v) for k, v in dataclasses.asdict(cls()).items()})

    def record(self, root: Path, path: Path) -> None:
        self.files[str(path.relative_to(root))] = sha256_file(path)

    def verify(self, root: Path) -> list:
        """Files that are missing or no longer match their checksum."""
        return [
            name for name, digest in self.files.items()
            if not (root / name).exists() or sha256_file(root / name) != digest
        ]

    def save(self, root: Path) -> None:
        text = json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)
        (root / MANIFEST).write_text(text + "\n")


class Workspace:
    """Output directory layout plus manifest bookkeeping for one invocation."""

    def __init__(self, config: ExperimentConfig, root):
        self.config = config
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.manifest = RunManifest.load(self.root)
        self.manifest.config_checksum = config.checksum()

    def path(self, *parts) -> Path:
        p = self.root.joinpath(*parts)
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def written(self, path: Path) -> Path:
        self.manifest.record(self.root, path)
        return path

    def mesh_path(self, level: int) -> Path:
        return self.root / "mesh" / f"mesh_{level_name(level)}.txt"

    def flow_path(self, level: int) -> Path:
        return self.root / "flow" / f"flow_{level_name(level)}.txt"

    def load_mesh(self, level=None):
        level = self.config.mesh.level if level is None else level
        p = self.mesh_path(level)
        if not p.exists():
            raise MissingArtifactError(f"mesh file {p} not found; run the 'mesh' command first")
        return read_mesh(p)

    def load_flow(self, mesh, level=None):
        level = self.config.mesh.level if level is None else level
        p = self.flow_path(level)
        if not p.exists():
            raise MissingArtifactError(f"flow file {p} not found; run the 'flow' command first")
        return read_flow(p, mesh)

    def finish(self, command: str, seconds: float) -> None:
        self.manifest.timings[command] = seconds
        self.manifest.save(self.root)


# --- commands -------------------------------------------------------------------

def cmd_mesh(ws: Workspace, args) -> None:
    cfg = ws.config
    cfg.validate_geometry()
    ladder = build_ladder(cfg.geometry, cfg.mesh.h_target, cfg.mesh.refinements + 1)
    report = {}
    unchanged = []
    for i, mesh in enumerate(ladder.meshes):
        mesh.check()
        p = ws.mesh_path(i)
        p.parent.mkdir(parents=True, exist_ok=True)
        key = str(p.relative_to(ws.root))
        previous = ws.manifest.files.get(key)
        write_mesh(mesh, p)
        ws.written(p)
        same = previous == ws.manifest.files[key]
        unchanged.append(same)
        rep = mesh.quality_report()
        rep["checksum"] = mesh.checksum()
        report[level_name(i)] = rep
        print(f"{level_name(i)}: {rep['vertices']} vertices, {rep['triangles']} triangles, "
              f"min angle {rep['min_angle_deg']:.2f} deg{' (unchanged)' if same else ''}")
    ws.manifest.events["mesh_rebuild"] = "no-op" if all(unchanged) else "changed"
    q = ws.path("mesh", "quality.json")
    q.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    ws.written(q)
    ws.manifest.mesh_checksum = ladder.meshes[cfg.mesh.level].checksum()


def _flow(ws: Workspace, mesh):
    """Cached flow for ``mesh``; solved only when absent or stale."""
    p = ws.flow_path(ws.config.mesh.level)
    bcs = ws.config.flow
    if p.exists():
        try:
            flow = read_flow(p, mesh)
            if flow.bcs == bcs:
                ws.manifest.events["flow_cache"] = "hit"
                return flow, False
        except PoreIdentError:
            pass
    flow = solve_stokes(mesh, bcs)
    p.parent.mkdir(parents=True, exist_ok=True)
    write_flow(flow, p)
    ws.written(p)
    ws.manifest.events["flow_cache"] = "miss"
    return flow, True


def cmd_flow(ws: Workspace, args) -> None:
    mesh = ws.load_mesh()
    flow, solved = _flow(ws, mesh)
    table = sample_along_line(flow)
    p = ws.path("flow", "midline.csv")
    rows = [",".join(_g(v) for v in r) for r in table]
    p.write_text("x1,u1,u2,p\n" + "\n".join(rows) + "\n")
    ws.written(p)
    ws.manifest.mesh_checksum = mesh.checksum()
    ws.manifest.flow_checksum = flow.checksum()
    print(f"flow {'solved' if solved else 'reused from cache'}; residual {flow.solver_residual:.3e}")


def cmd_transport(ws: Workspace, args) -> None:
    cfg = ws.config.transport
    params = cfg.params()
    mesh = ws.load_mesh()
    flow = ws.load_flow(mesh)
    ops = assemble_transport(mesh, flow, params.Pe)
    res = run_transport(mesh, flow, params, snapshot_times=cfg.snapshot_times, operators=ops)
    p = ws.path("transport", "breakthrough.csv")
    res.curve.to_csv(p)
    ws.written(p)
    p = ws.path("transport", "mass_balance.csv")
    rows = [",".join(_g(v) for v in r) for r in res.balance.as_table()]
    p.write_text("t,bulk,surface,inflow,outflow,residual\n" + "\n".join(rows) + "\n")
    ws.written(p)
    for t, c in sorted(res.snapshots.items()):
        p = ws.path("transport", f"snapshot_t{_tag(t)}.csv")
        rows = [f"{_g(x)},{_g(y)},{_g(v)}" for (x, y), v in zip(mesh.vertices, c)]
        p.write_text("x1,x2,c\n" + "\n".join(rows) + "\n")
        ws.written(p)
    if cfg.sensitivity is not None and cfg.sensitivity.values:
        axis = cfg.sensitivity.axis
        curves = sensitivity_sweep(mesh, flow, params, axis, cfg.sensitivity.values, operators=ops)
        for v, curve in zip(cfg.sensitivity.values, curves):
            p = ws.path("transport", f"breakthrough_{axis}_{_tag(v)}.csv")
            curve.to_csv(p)
            ws.written(p)
    ws.manifest.flow_checksum = flow.checksum()
    print(f"{params.n_steps} steps; c_out(T) = {res.curve.values[-1]:.6f}; "
          f"max mass-balance residual {np.abs(res.balance.residual).max():.2e}")


def _simulator(ws: Workspace):
    params = ws.config.transport.params()
    mesh = ws.load_mesh()
    flow = ws.load_flow(mesh)
    sim = ident.BreakthroughSimulator(mesh, flow, params)
    cache = ws.root / "cache" / f"curves_{level_name(ws.config.mesh.level)}.npz"
    if cache.exists():
        sim.load_cache(cache)
    ws.manifest.flow_checksum = flow.checksum()
    return sim, cache


def _measurements(ws: Workspace, sim, seeds):
    """{(delta, seed): Measurement}; lab data replaces the synthetic generator."""
    icfg = ws.config.identification
    out = {}
    for delta in icfg.delta:
        if icfg.measurement_csv is not None:
            out[(delta, None)] = ident.Measurement.from_csv(icfg.measurement_csv, delta, sim.params.tau)
            continue
        if delta == 0:
            out[(delta, None)] = ident.synthesize_measurement(sim, *icfg.true_params)
            continue
        for seed in seeds:
            out[(delta, seed)] = ident.synthesize_measurement(sim, *icfg.true_params, delta=delta, seed=seed)
    return out


def _label(delta, seed) -> str:
    return f"d{_tag(delta)}" + ("" if seed is None else f"_s{seed}")


def cmd_synthesize(ws: Workspace, args) -> None:
    sim, _ = _simulator(ws)
    for (delta, seed), meas in _measurements(ws, sim, _seeds(ws, args)).items():
        p = ws.path("measurements", f"measurement_{_label(delta, seed)}.csv")
        meas.to_csv(p)
        ws.written(p)
        print(f"wrote {p.name}")


def _seeds(ws, args):
    return [args.seed] if getattr(args, "seed", None) is not None else list(ws.config.identification.seeds)


def cmd_identify(ws: Workspace, args) -> None:
    icfg = ws.config.identification
    sim, cache = _simulator(ws)
    workers = ws.config.workers
    box = icfg.feasible_box()
    measurements = _measurements(ws, sim, _seeds(ws, args))
    by_delta: dict = {}
    for (delta, seed), meas in measurements.items():
        tag = _label(delta, seed)
        p = ws.path("identify", f"measurement_{tag}.csv")
        meas.to_csv(p)
        ws.written(p)
        if icfg.strategy == "multistage":
            try:
                stages = ident.multistage_identify(icfg.plan(), meas, sim, icfg.gamma, workers)
            except EmptyAdmissibleError as exc:
                raise EmptyAdmissibleError(f"{tag}: {exc}", stage=exc.stage) from None
            for k, adm in enumerate(stages):
                _write_admissible(ws, adm, f"{tag}_stage{k + 1}")
            final = stages[-1]
        else:
            final = _single(ws, sim, meas, box, tag, workers)
            _write_admissible(ws, final, tag)
        mn = final.minimizer
        print(f"{tag}: minimizer ({mn.da_a:.6g}, {mn.da_d:.6g}), sqrt(J) = {np.sqrt(mn.J):.4g}, "
              f"{final.n_admissible}/{len(final.points)} admissible")
        by_delta.setdefault(delta, []).append((seed, final))
    for delta, runs in by_delta.items():
        if len(runs) > 1:
            _write_realizations(ws, delta, runs)
    cache.parent.mkdir(parents=True, exist_ok=True)
    sim.save_cache(cache)


def _single(ws, sim, meas, box, tag, workers):
    icfg = ws.config.identification
    T_eff = ident.effective_time(meas, icfg.T_cut)
    thr = ident.admissible_threshold(icfg.gamma, meas.delta, T_eff)
    if icfg.strategy == "sobol":
        return ident.random_search(box, icfg.n_samples, meas, sim, icfg.gamma, icfg.T_cut, workers)
    surf = ident.grid_sweep(box, tuple(icfg.grid_shape), meas, sim, icfg.T_cut, workers)
    p = ws.path("identify", f"surface_{tag}.csv")
    surf.to_csv(p)
    ws.written(p)
    p = ws.path("identify", f"contours_{tag}.csv")
    top = float(np.sqrt(surf.J.max()))
    surf.write_contours(p, ident.isoline_levels(thr, min(top, np.sqrt(thr) + 0.5)))
    ws.written(p)
    return surf.to_admissible(thr, icfg.gamma, box, T_eff)


def _write_admissible(ws, adm, tag):
    p = ws.path("identify", f"admissible_{tag}.csv")
    adm.to_csv(p)
    ws.written(p)
    p = ws.path("identify", f"minimizer_{tag}.json")
    ident.write_json(adm.minimizer_record(), p)
    ws.written(p)


def _write_realizations(ws, delta, runs):
    sets = [adm for _, adm in runs]
    report = ident.combine_realizations([s for s, _ in runs], sets)
    record = {
        "delta": delta,
        "seeds": [s for s, _ in runs],
        "minimizers": report.minimizers.tolist(),
        "n_admissible": [s.n_admissible for s in sets],
        "intersection_points": None if report.intersection is None else int(report.intersection.sum()),
        "intersection_area": report.intersection_area(),
        "notes": report.notes,
    }
    p = ws.path("identify", f"realizations_d{_tag(delta)}.json")
    ident.write_json(record, p)
    ws.written(p)


COMMANDS = {
    "mesh": cmd_mesh,
    "flow": cmd_flow,
    "transport": cmd_transport,
    "identify": cmd_identify,
    "synthesize": cmd_synthesize,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="poreident",
        description="Pore-scale flow, reactive transport and adsorption-rate identification.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config (defaults if omitted)")
    common.add_argument("--output", help=f"output directory (overrides ${OUTPUT_ENV} and the config)")
    common.add_argument("--workers", type=int, help="concurrent forward solves")
    common.add_argument("--seed", type=int, help="single noise seed, replaces identification.seeds")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "mesh": "build the mesh ladder and quality report",
        "flow": "solve Stokes flow and export the midline profile",
        "transport": "run transport, mass balance and sensitivity sweeps",
        "identify": "identify (Da_a, Da_d) by grid, Sobol or multistage search",
        "synthesize": "write synthetic noisy measurements",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    return parser


def resolve_output(args, config: ExperimentConfig) -> Path:
    if args.output:
        return Path(args.output)
    if os.environ.get(OUTPUT_ENV):
        return Path(os.environ[OUTPUT_ENV])
    return Path(config.output_dir)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        config = load_config(args.config)
        if args.workers is not None:
            config = dataclasses.replace(config, workers=args.workers).validate()
        ws = Workspace(config, resolve_output(args, config))
        t0 = time.perf_counter()
        COMMANDS[args.command](ws, args)
        ws.finish(args.command, time.perf_counter() - t0)
    except EmptyAdmissibleError as exc:
        print(f"error: {exc} (hint: increase gamma or the number of samples)", file=sys.stderr)
        return exc.exit_code
    except PoreIdentError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
