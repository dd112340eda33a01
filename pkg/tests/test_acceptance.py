"""Acceptance criteria 1 to 8.

Each test prints one ``ACCEPTANCE <n> PASS|FAIL`` line (collected again in the
terminal summary) and then asserts. Identification criteria run on the coarse
mesh with T = 40; measurement and sweep share the solver, so the argmin and
noise-floor statements do not depend on the mesh level. Breakthrough curves are
cached in the pytest cache directory, keyed by mesh checksum and transport
parameters, so a rerun only re-does the statistics.
"""

import warnings

import numpy as np
import pytest

from conftest import H_COARSE
from oracles import outlet_concentration_1d
from poreident.geometry import GeometryConfig, Tag, build_geometry, refine, triangulate
from poreident.identification import (
    DEFAULT_GAMMA,
    BreakthroughSimulator,
    FeasibleBox,
    Stage,
    StagePlan,
    admissible_threshold,
    grid_sweep,
    random_search,
    synthesize_measurement,
)
from poreident.stokes import FlowBCs, flux_through, sample_along_line, solve_stokes
from poreident.transport import (
    Isotherm,
    IsothermKind,
    TransportParams,
    assemble_transport,
    run_transport,
    surface_update,
)

pytestmark = pytest.mark.slow

TRUE = (0.005, 0.05)
G = FeasibleBox((0.0, 0.01), (0.0, 0.1))
STAGE2 = FeasibleBox((0.002, 0.009), (0.03, 0.07))
SEEDS = range(10)
T_END = 40.0

RESULTS: list[str] = []


def report(n, ok, detail):
    line = f"ACCEPTANCE {n} {'PASS' if ok else 'FAIL'}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


# --- shared curve library ----------------------------------------------------------

@pytest.fixture(scope="module")
def simulator(coarse_mesh, coarse_flow, request):
    sim = BreakthroughSimulator(coarse_mesh, coarse_flow, TransportParams(T_end=T_END))
    path = request.config.cache.mkdir("poreident_curves") / "coarse_T40.npz"
    if path.exists():
        sim.load_cache(path)
    n0 = sim.n_solves
    yield sim
    if sim.n_solves > n0:
        sim.save_cache(path)


@pytest.fixture(scope="module")
def measurements(simulator):
    out = {(0.0, None): synthesize_measurement(simulator, *TRUE)}
    for delta in (0.01, 0.05):
        for s in SEEDS:
            out[(delta, s)] = synthesize_measurement(simulator, *TRUE, delta=delta, seed=s)
    return out


@pytest.fixture(scope="module")
def surfaces(simulator, measurements):
    return {k: grid_sweep(G, (51, 51), m, simulator) for k, m in measurements.items()}


# --- identification --------------------------------------------------------------

def test_criterion_1_exact_data_recovery(surfaces):
    best = surfaces[(0.0, None)].minimizer
    ok = (best.da_a, best.da_d) == TRUE and best.J <= 1e-14
    report(1, ok, f"51x51 minimizer ({best.da_a}, {best.da_d}) with J = {best.J:.3g}")


def test_criterion_2_noise_floor(surfaces):
    parts, ok = [], True
    for delta in (0.01, 0.05):
        target = delta * np.sqrt(T_END / 3)
        vals = np.array([np.sqrt(surfaces[(delta, s)].minimizer.J) for s in SEEDS])
        hits = int(np.sum(np.abs(vals / target - 1) <= 0.25))
        ok &= hits >= 8
        parts.append(f"delta={delta}: {hits}/10 within 25% of {target:.4f} "
                     f"(min sqrtJ range {vals.min():.4f}..{vals.max():.4f})")
    report(2, ok, "; ".join(parts))


def test_criterion_3_admissible_set(surfaces):
    gen_hits, nested = 0, True
    for s in SEEDS:
        surf = surfaces[(0.01, s)]
        thr = admissible_threshold(DEFAULT_GAMMA, 0.01, T_END)
        tight = surf.to_admissible(thr, DEFAULT_GAMMA, G, T_END)
        loose = surf.to_admissible(admissible_threshold(1.21, 0.01, T_END), 1.21, G, T_END)
        gen = np.flatnonzero((surf.points() == TRUE).all(axis=1))[0]
        gen_hits += bool(tight.mask[gen])
        nested &= bool(np.all(loose.mask[tight.mask])) and loose.n_admissible >= tight.n_admissible
    ok = gen_hits >= 8 and nested
    report(3, ok, f"generator admissible in {gen_hits}/10 seeds at gamma={DEFAULT_GAMMA}; "
                  f"nested at gamma=1.21: {nested}")


@pytest.fixture(scope="module")
def sobol_sets(simulator, measurements):
    return {
        (n, s): random_search(G, n, measurements[(0.01, s)], simulator, DEFAULT_GAMMA)
        for n in (150, 600) for s in SEEDS
    }


def test_criterion_4_sobol_search(sobol_sets):
    boxes = [sobol_sets[(600, s)].bounding_box() for s in SEEDS]
    contain = sum(b is not None and b.contains(TRUE) for b in boxes)
    nonempty = sum(sobol_sets[(150, s)].n_admissible > 0 for s in SEEDS)
    ok = contain >= 8 and nonempty >= 7
    report(4, ok, f"N=600 bounding box contains generator in {contain}/10; N=150 nonempty in {nonempty}/10")


def test_criterion_5_multistage_shrinkage(simulator, measurements):
    # seeds whose stage 1 is empty have no area to compare against and are skipped;
    # every remaining seed must shrink, and its T_cut stage must be nonempty and narrow
    plan = StagePlan([Stage(G, 150), Stage(STAGE2, 150), Stage(STAGE2, 150, T_cut=15.0)])
    rows = []
    for s in SEEDS:
        meas = measurements[(0.01, s)]
        boxes = [
            random_search(st.box, st.samples, meas, simulator, DEFAULT_GAMMA, st.T_cut).bounding_box()
            for st in plan.stages
        ]
        if boxes[0] is None:
            continue
        shrink = boxes[1] is not None and boxes[1].area < boxes[0].area
        width = boxes[2].widths[1] if boxes[2] is not None else float("nan")
        rows.append((s, shrink, width < 0.03, boxes[0].area, boxes[1].area if boxes[1] else 0.0, width))
    n_shrink = sum(r[1] for r in rows)
    n_narrow = sum(r[2] for r in rows)
    ok = len(rows) > 0 and n_shrink == len(rows) and n_narrow == len(rows)
    detail = ", ".join(f"s{s}: {a1:.2g}->{a2:.2g}, w={w:.4f}" for s, _, _, a1, a2, w in rows)
    report(5, ok, f"{len(rows)} seeds with nonempty stage 1; area shrinks in {n_shrink}, "
                  f"T_cut=15 Da_d width < 0.03 in {n_narrow} [{detail}]")


# --- flow ------------------------------------------------------------------------

def test_criterion_6_flow_verification(rect_flow, coarse_flow, basic_mesh, basic_flow):
    plug = max(np.abs(rect_flow.u[:, 0] - 1.0).max(), np.abs(rect_flow.u[:, 1]).max())
    balance = abs(sum(flux_through(basic_flow, t) for t in Tag))
    fine_flow = solve_stokes(refine(basic_mesh), FlowBCs())
    tables = [sample_along_line(f) for f in (coarse_flow, basic_flow, fine_flow)]
    ok_rows = ~np.isnan(np.column_stack([t[:, 1] for t in tables])).any(axis=1)
    diffs = [np.linalg.norm(b[ok_rows, 1:] - a[ok_rows, 1:]) for a, b in zip(tables, tables[1:])]
    del fine_flow
    ok = plug <= 1e-10 and balance <= 1e-10 and diffs[1] < diffs[0]
    report(6, ok, f"plug-flow error {plug:.2g}; mass balance {balance:.2g}; "
                  f"midline differences {diffs[0]:.4g} > {diffs[1]:.4g}")


# --- transport -------------------------------------------------------------------

def _clamped(iso, steps=6000, tau=0.1):
    m = np.zeros(3)
    one = np.ones(3)
    for _ in range(steps):
        m = surface_update(m, one, one, iso, tau)
    return m


def test_criterion_7_transport_verification(coarse_mesh, coarse_flow):
    rect = refine(triangulate(build_geometry(GeometryConfig(obstacle_count=0)), H_COARSE))
    inert = TransportParams(isotherm=Isotherm(IsothermKind.HENRY, 0.0, 0.0), T_end=T_END)
    curve = run_transport(rect, solve_stokes(rect), inert, track_balance=False).curve
    oracle = outlet_concentration_1d(curve.times[::4], 10.0, 17.5)
    err_1d = np.abs(curve.values[::4] - oracle).max()

    henry = np.abs(_clamped(Isotherm(IsothermKind.HENRY, *TRUE)) - TRUE[0] / TRUE[1]).max()
    M = 1.0
    lang_exact = TRUE[0] * M / (TRUE[0] + TRUE[1] * M)
    lang = np.abs(_clamped(Isotherm(IsothermKind.LANGMUIR, *TRUE, M)) - lang_exact).max()

    ops = assemble_transport(coarse_mesh, coarse_flow, 10.0)
    runs = []
    for tau in (0.2, 0.1, 0.05):
        c = run_transport(coarse_mesh, None, TransportParams(tau=tau, T_end=T_END), operators=ops,
                          track_balance=False).curve.values
        runs.append(c[round(0.2 / tau) - 1::round(0.2 / tau)])
    order = np.log2(np.abs(runs[0] - runs[1]).max() / np.abs(runs[1] - runs[2]).max())

    ok = err_1d <= 2e-2 and henry <= 1e-8 and lang <= 1e-8 and 1.7 <= order <= 2.3
    report(7, ok, f"1D oracle sup error {err_1d:.3g}; Henry {henry:.2g}; Langmuir {lang:.2g}; "
                  f"CN order {order:.3f}")


def test_criterion_8_sensitivity_directions(coarse_mesh, coarse_flow):
    ops = assemble_transport(coarse_mesh, coarse_flow, 10.0)
    base = TransportParams(T_end=T_END)
    idx = [round(t / base.tau) - 1 for t in (10.0, 20.0, 40.0)]

    da_a = (0.0, 0.0025, 0.005, 0.0075, 0.01)
    c = np.array([
        run_transport(coarse_mesh, None, base.with_rates(Da_a=a), operators=ops,
                      track_balance=False).curve.values[idx]
        for a in da_a
    ])
    monotone_a = bool(np.all(np.diff(c, axis=0) <= 0))

    caps = (0.25, 0.5, 1.0, 2.0, 4.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        dep = [
            1 - run_transport(coarse_mesh, None,
                              TransportParams(isotherm=Isotherm(IsothermKind.LANGMUIR, *TRUE, M), T_end=T_END),
                              operators=ops, track_balance=False).curve.values[-1]
            for M in caps
        ]
    monotone_m = bool(np.all(np.diff(dep) > 0))
    report(8, monotone_a and monotone_m,
           f"c_out non-increasing in Da_a at t=10,20,40: {monotone_a}; "
           f"1-c_out(40) over M={caps}: {np.round(dep, 5).tolist()}")
