"""Identification of (Da_a, Da_d) from breakthrough data.

The forward model is wrapped by :class:`BreakthroughSimulator`, which caches one
breakthrough curve per parameter pair. Every strategy here (lattice sweep, Sobol
search, multistage refinement, repeated noise realizations) only evaluates the
residual against cached curves, so re-using a simulator across noise
realizations costs no extra PDE solves.
"""

from __future__ import annotations

import json
import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .exceptions import EmptyAdmissibleError, FormatError, GridMismatchError
from .sobol import sobol_points
from .transport import (
    BreakthroughCurve,
    TransportOperators,
    TransportParams,
    assemble_transport,
    run_transport,
)

__all__ = [
    "DEFAULT_GAMMA",
    "Measurement",
    "FeasibleBox",
    "EvaluatedPoint",
    "AdmissibleSet",
    "ResidualSurface",
    "Stage",
    "StagePlan",
    "RealizationReport",
    "BreakthroughSimulator",
    "uniform_noise",
    "synthesize_measurement",
    "residual",
    "residuals",
    "admissible_threshold",
    "grid_lattice",
    "grid_sweep",
    "sobol_sample",
    "evaluate_points",
    "random_search",
    "auto_box",
    "multistage_identify",
    "multi_realization",
    "combine_realizations",
    "effective_time",
    "isoline_levels",
]

DEFAULT_GAMMA = 1.02625
AUTO = "AUTO"
AUTO_EXPANSION = 0.2


# --- data types ---------------------------------------------------------------

@dataclass
class Measurement:
    times: np.ndarray
    values: np.ndarray
    delta: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape or self.times.ndim != 1 or len(self.times) == 0:
            raise GridMismatchError("times and values must be equal-length 1D arrays")
        if not np.all(np.isfinite(self.values)):
            raise FormatError("measurement values must be finite")
        tau = self.tau
        n = np.arange(1, len(self.times) + 1)
        if not np.allclose(self.times, n * tau, rtol=0, atol=1e-9 * max(1.0, self.times[-1])):
            raise GridMismatchError("measurement times are not a uniform grid t_n = n * tau")

    @property
    def tau(self) -> float:
        return float(self.times[0])

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def to_csv(self, path) -> None:
        rows = [f"{t:.17g},{v:.17g}" for t, v in zip(self.times, self.values)]
        Path(path).write_text("t,c_tilde\n" + "\n".join(rows) + "\n")

    @classmethod
    def from_csv(cls, path, delta: float = 0.0, tau: float | None = None) -> "Measurement":
        """Load lab data ``t,c_tilde``; times must be ``n * tau`` for n = 1..N."""
        lines = Path(path).read_text().split()
        if not lines or lines[0] != "t,c_tilde":
            raise FormatError("expected header 't,c_tilde'")
        try:
            data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
        except ValueError as exc:
            raise FormatError(f"malformed row: {exc}") from None
        if data.ndim != 2 or data.shape[1] != 2:
            raise FormatError("each row must have two columns")
        meas = cls(data[:, 0], data[:, 1], delta=delta)
        if tau is not None and not math.isclose(meas.tau, tau, rel_tol=1e-9):
            raise GridMismatchError(f"measurement step {meas.tau} differs from solver step {tau}")
        return meas


@dataclass(frozen=True)
class FeasibleBox:
    da_a_range: tuple = (0.0, 0.01)
    da_d_range: tuple = (0.0, 0.1)

    def __post_init__(self):
        for lo, hi in (self.da_a_range, self.da_d_range):
            if not (0 <= lo <= hi):
                raise ValueError(f"invalid range [{lo}, {hi}]")
        object.__setattr__(self, "da_a_range", tuple(float(v) for v in self.da_a_range))
        object.__setattr__(self, "da_d_range", tuple(float(v) for v in self.da_d_range))

    @property
    def lower(self) -> np.ndarray:
        return np.array([self.da_a_range[0], self.da_d_range[0]])

    @property
    def upper(self) -> np.ndarray:
        return np.array([self.da_a_range[1], self.da_d_range[1]])

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def area(self) -> float:
        return float(np.prod(self.widths))

    def contains(self, point) -> bool:
        p = np.asarray(point, dtype=float)
        return bool(np.all(p >= self.lower) and np.all(p <= self.upper))

    def from_unit(self, u: np.ndarray) -> np.ndarray:
        return self.lower + np.asarray(u) * self.widths

    def to_list(self):
        return [list(self.da_a_range), list(self.da_d_range)]


@dataclass(frozen=True)
class EvaluatedPoint:
    da_a: float
    da_d: float
    J: float


@dataclass
class AdmissibleSet:
    """Evaluated parameter points and the subset with ``J <= threshold``."""

    points: np.ndarray  # (n, 2)
    J: np.ndarray  # (n,)
    threshold: float
    gamma: float
    box: FeasibleBox | None = None
    T_effective: float | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        self.J = np.asarray(self.J, dtype=float)

    @property
    def mask(self) -> np.ndarray:
        return self.J <= self.threshold

    @property
    def admissible(self) -> np.ndarray:
        return self.points[self.mask]

    @property
    def n_admissible(self) -> int:
        return int(self.mask.sum())

    @property
    def minimizer(self) -> EvaluatedPoint:
        i = int(np.argmin(self.J))
        return EvaluatedPoint(float(self.points[i, 0]), float(self.points[i, 1]), float(self.J[i]))

    def evaluated(self) -> list[EvaluatedPoint]:
        return [EvaluatedPoint(float(a), float(d), float(j)) for (a, d), j in zip(self.points, self.J)]

    def bounding_box(self) -> FeasibleBox | None:
        adm = self.admissible
        if len(adm) == 0:
            return None
        lo, hi = adm.min(axis=0), adm.max(axis=0)
        return FeasibleBox((lo[0], hi[0]), (lo[1], hi[1]))

    def area_estimate(self) -> float:
        """Admissible area estimated as the admissible fraction of the box area."""
        if self.box is None:
            raise ValueError("area estimate needs the sampling box")
        return self.box.area * self.n_admissible / len(self.points)

    def to_csv(self, path) -> None:
        rows = [
            f"{a:.17g},{d:.17g},{j:.17g},{math.sqrt(j):.17g},{int(ok)}"
            for (a, d), j, ok in zip(self.points, self.J, self.mask)
        ]
        Path(path).write_text("da_a,da_d,J,sqrtJ,admissible\n" + "\n".join(rows) + "\n")

    def minimizer_record(self) -> dict:
        mn = self.minimizer
        bb = self.bounding_box()
        return {
            "da_a": mn.da_a,
            "da_d": mn.da_d,
            "J": mn.J,
            "threshold": self.threshold,
            "gamma": self.gamma,
            "n_points": int(len(self.points)),
            "n_admissible": self.n_admissible,
            "admissible_bbox": None if bb is None else bb.to_list(),
        }


@dataclass
class ResidualSurface:
    """Residual on a tensor lattice; ``J[i, j]`` belongs to ``(da_a[i], da_d[j])``."""

    da_a: np.ndarray
    da_d: np.ndarray
    J: np.ndarray

    @property
    def sqrtJ(self) -> np.ndarray:
        return np.sqrt(self.J)

    def points(self) -> np.ndarray:
        A, D = np.meshgrid(self.da_a, self.da_d, indexing="ij")
        return np.column_stack([A.ravel(), D.ravel()])

    @property
    def minimizer(self) -> EvaluatedPoint:
        i, j = np.unravel_index(int(np.argmin(self.J)), self.J.shape)
        return EvaluatedPoint(float(self.da_a[i]), float(self.da_d[j]), float(self.J[i, j]))

    def to_admissible(self, threshold, gamma, box=None, T_effective=None) -> AdmissibleSet:
        return AdmissibleSet(self.points(), self.J.ravel(), threshold, gamma, box, T_effective)

    def to_csv(self, path) -> None:
        P = self.points()
        J = self.J.ravel()
        rows = [f"{a:.17g},{d:.17g},{j:.17g},{math.sqrt(j):.17g}" for (a, d), j in zip(P, J)]
        Path(path).write_text("da_a,da_d,J,sqrtJ\n" + "\n".join(rows) + "\n")

    def contour_lines(self, levels) -> dict:
        """Isolines of sqrt(J) as polylines ``{level: [array (k, 2), ...]}``."""
        import contourpy

        gen = contourpy.contour_generator(self.da_d, self.da_a, self.sqrtJ, line_type="Separate")
        # contourpy's (x, y) are (da_d, da_a) here; swap back to (da_a, da_d)
        return {float(lv): [ln[:, ::-1].copy() for ln in gen.lines(lv)] for lv in levels}

    def write_contours(self, path, levels) -> None:
        rows = []
        for lv, lines in self.contour_lines(levels).items():
            for k, ln in enumerate(lines):
                rows += [f"{lv:.17g},{k},{a:.17g},{d:.17g}" for a, d in ln]
        Path(path).write_text("level,line,da_a,da_d\n" + "\n".join(rows) + ("\n" if rows else ""))


def isoline_levels(threshold: float, top: float, step: float = 0.02) -> np.ndarray:
    """sqrt(J) levels starting at sqrt(threshold) with a fixed step."""
    start = math.sqrt(max(threshold, 0.0))
    if top <= start:
        return np.array([start])
    return start + step * np.arange(int((top - start) / step) + 1)


@dataclass
class Stage:
    box: FeasibleBox | str = AUTO
    samples: int = 150
    strategy: str = "sobol"  # "sobol" or "grid"
    grid_shape: tuple | None = None
    T_cut: float | None = None

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("a stage needs at least one sample")
        if self.strategy not in ("sobol", "grid"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if isinstance(self.box, str) and self.box != AUTO:
            raise ValueError("box must be a FeasibleBox or 'AUTO'")


@dataclass
class StagePlan:
    stages: list

    def __post_init__(self):
        if not self.stages:
            raise ValueError("plan needs at least one stage")
        if self.stages[0].box == AUTO:
            raise ValueError("the first stage needs an explicit box")


@dataclass
class RealizationReport:
    seeds: list
    sets: list
    intersection: np.ndarray | None = None  # mask over the common points
    notes: list = field(default_factory=list)

    @property
    def minimizers(self) -> np.ndarray:
        return np.array([[s.minimizer.da_a, s.minimizer.da_d, s.minimizer.J] for s in self.sets])

    @property
    def intersection_empty(self) -> bool:
        return self.intersection is not None and not self.intersection.any()

    def intersection_area(self) -> float | None:
        if self.intersection is None:
            return None
        s = self.sets[0]
        return s.box.area * int(self.intersection.sum()) / len(s.points)


# --- forward model ------------------------------------------------------------

_WORKER_SIM = None


def _worker_init(sim):
    global _WORKER_SIM
    _WORKER_SIM = sim


def _worker_eval(task):
    idx, da_a, da_d = task
    return idx, _WORKER_SIM._solve(da_a, da_d)


class BreakthroughSimulator:
    """Breakthrough curves as a function of (Da_a, Da_d) for a fixed mesh and flow.

    Other transport parameters (Pe, isotherm kind, M, tau, T_end) come from
    ``params``. Curves are cached by the exact float pair.
    """

    def __init__(self, mesh, flow, params: TransportParams, operators: TransportOperators | None = None):
        self.mesh = mesh
        self.params = params
        self.operators = operators if operators is not None else assemble_transport(mesh, flow, params.Pe)
        self._cache: dict[tuple[float, float], np.ndarray] = {}

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_cache"] = {}
        return state

    @property
    def times(self) -> np.ndarray:
        return self.params.tau * np.arange(1, self.params.n_steps + 1)

    @property
    def n_solves(self) -> int:
        return len(self._cache)

    def _solve(self, da_a, da_d) -> np.ndarray:
        p = self.params.with_rates(Da_a=float(da_a), Da_d=float(da_d))
        return run_transport(self.mesh, None, p, operators=self.operators, track_balance=False).curve.values

    def curve(self, da_a: float, da_d: float) -> np.ndarray:
        key = (float(da_a), float(da_d))
        if key not in self._cache:
            self._cache[key] = self._solve(*key)
        return self._cache[key]

    def save_cache(self, path) -> None:
        keys = np.array(list(self._cache.keys()), dtype=float).reshape(-1, 2)
        vals = np.array(list(self._cache.values()), dtype=float).reshape(len(keys), -1)
        np.savez(path, keys=keys, values=vals, mesh=self.mesh.checksum(), params=repr(self.params))

    def load_cache(self, path) -> int:
        """Merge curves from ``save_cache``; returns how many were loaded (0 on context mismatch)."""
        with np.load(path) as data:
            if str(data["mesh"]) != self.mesh.checksum() or str(data["params"]) != repr(self.params):
                return 0
            for (a, d), v in zip(data["keys"], data["values"]):
                self._cache[(float(a), float(d))] = v
            return len(data["keys"])

    def breakthrough(self, da_a, da_d) -> BreakthroughCurve:
        return BreakthroughCurve(self.times, self.curve(da_a, da_d).copy())

    def curves(self, points, workers: int = 1) -> np.ndarray:
        """Curves for each row of ``points``; output order follows ``points``."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        keys = [(float(a), float(d)) for a, d in pts]
        todo = sorted({k for k in keys if k not in self._cache})
        if todo and workers > 1:
            ctx = multiprocessing.get_context("fork")
            tasks = [(i, a, d) for i, (a, d) in enumerate(todo)]
            results = [None] * len(todo)
            with ProcessPoolExecutor(workers, mp_context=ctx, initializer=_worker_init, initargs=(self,)) as ex:
                for i, vals in ex.map(_worker_eval, tasks, chunksize=max(1, len(tasks) // (4 * workers))):
                    results[i] = vals
            for k, vals in zip(todo, results):
                self._cache[k] = vals
        out = np.empty((len(keys), self.params.n_steps))
        for i, k in enumerate(keys):
            out[i] = self.curve(*k)
        return out


# --- noise, residual, threshold ------------------------------------------------

def uniform_noise(seed: int, n: int) -> np.ndarray:
    """sigma(t^1..t^n), i.i.d. uniform on [-1, 1], from a Philox stream keyed by ``seed``.

    Value ``k`` depends only on ``(seed, k)``.
    """
    gen = np.random.Generator(np.random.Philox(key=int(seed)))
    return gen.uniform(-1.0, 1.0, n)


def synthesize_measurement(simulator: BreakthroughSimulator, da_a, da_d, delta=0.0, seed=None) -> Measurement:
    if delta < 0:
        raise ValueError("delta must be non-negative")
    clean = simulator.curve(da_a, da_d)
    values = clean.copy()
    if delta > 0:
        if seed is None:
            raise ValueError("noisy measurements need a seed")
        values = clean + delta * uniform_noise(seed, len(clean))
    return Measurement(simulator.times.copy(), values, float(delta), seed)


def _n_cut(meas: Measurement, T_cut) -> int:
    if T_cut is None:
        return len(meas.times)
    n = int(round(T_cut / meas.tau))
    if n < 1 or n > len(meas.times) or not math.isclose(n * meas.tau, T_cut, rel_tol=1e-9):
        raise GridMismatchError(f"T_cut={T_cut} is not a measurement time")
    return n


def residual(curve, meas: Measurement, T_cut=None) -> float:
    """J = sum over t^n <= T_cut of tau * (c_out(t^n) - c_tilde(t^n))^2."""
    if isinstance(curve, BreakthroughCurve):
        times, values = curve.times, curve.values
        n = _n_cut(meas, T_cut)
        if len(times) < n or not np.allclose(times[:n], meas.times[:n], rtol=0, atol=1e-9 * meas.T):
            raise GridMismatchError("curve and measurement time grids differ")
    else:
        values = np.asarray(curve, dtype=float)
        n = _n_cut(meas, T_cut)
        if len(values) < n:
            raise GridMismatchError("curve is shorter than the measurement window")
    d = values[:n] - meas.values[:n]
    return float(meas.tau * np.dot(d, d))


def residuals(curves: np.ndarray, meas: Measurement, T_cut=None) -> np.ndarray:
    n = _n_cut(meas, T_cut)
    curves = np.atleast_2d(curves)
    if curves.shape[1] < n:
        raise GridMismatchError("curves are shorter than the measurement window")
    d = curves[:, :n] - meas.values[None, :n]
    return meas.tau * np.einsum("ij,ij->i", d, d)


def admissible_threshold(gamma: float, delta: float, T_effective: float) -> float:
    """gamma * delta^2 * T / 3, the expected noise energy scaled by gamma."""
    if not gamma > 1:
        raise ValueError("gamma must exceed 1")
    if delta < 0:
        raise ValueError("delta must be non-negative")
    return gamma * delta**2 * T_effective / 3.0


def effective_time(meas: Measurement, T_cut=None) -> float:
    """Last measurement time used by the residual (T, or T_cut when truncating)."""
    return float(meas.times[_n_cut(meas, T_cut) - 1])


# --- sampling strategies --------------------------------------------------------

def grid_lattice(box: FeasibleBox, n1: int, n2: int):
    """Uniform lattice nodes; the midpoint index lands exactly on the box center."""
    if n1 < 2 or n2 < 2:
        raise ValueError("a lattice needs at least 2 nodes per axis")
    (a0, a1), (d0, d1) = box.da_a_range, box.da_d_range
    da_a = np.array([a0 + (a1 - a0) * (i / (n1 - 1)) for i in range(n1)])
    da_d = np.array([d0 + (d1 - d0) * (j / (n2 - 1)) for j in range(n2)])
    return da_a, da_d


def sobol_sample(box: FeasibleBox, n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    return box.from_unit(sobol_points(n))


def evaluate_points(points, meas: Measurement, simulator: BreakthroughSimulator, T_cut=None, workers=1):
    return residuals(simulator.curves(points, workers=workers), meas, T_cut)


def grid_sweep(box, shape, meas, simulator, T_cut=None, workers=1) -> ResidualSurface:
    n1, n2 = shape
    da_a, da_d = grid_lattice(box, n1, n2)
    surf = ResidualSurface(da_a, da_d, np.zeros((n1, n2)))
    J = evaluate_points(surf.points(), meas, simulator, T_cut, workers)
    surf.J = J.reshape(n1, n2)
    return surf


def random_search(box, n, meas, simulator, gamma=DEFAULT_GAMMA, T_cut=None, workers=1) -> AdmissibleSet:
    """Pure random search over Sobol points, classified by the admissibility threshold."""
    pts = sobol_sample(box, n)
    J = evaluate_points(pts, meas, simulator, T_cut, workers)
    T_eff = effective_time(meas, T_cut)
    return AdmissibleSet(pts, J, admissible_threshold(gamma, meas.delta, T_eff), gamma, box, T_eff)


def auto_box(previous: AdmissibleSet, original: FeasibleBox, expansion=AUTO_EXPANSION) -> FeasibleBox:
    """Bounding box of the admissible points, grown by ``expansion`` per side, clipped to ``original``.

    A degenerate side (single admissible coordinate) is grown by ``expansion``
    times the previous sampling box width instead.
    """
    bb = previous.bounding_box()
    if bb is None:
        raise EmptyAdmissibleError("cannot derive a box from an empty admissible set")
    w = bb.widths
    ref = previous.box.widths if previous.box is not None else original.widths
    margin = expansion * np.where(w > 0, w, ref)
    lo = np.maximum(bb.lower - margin, original.lower)
    hi = np.minimum(bb.upper + margin, original.upper)
    return FeasibleBox((lo[0], hi[0]), (lo[1], hi[1]))


def multistage_identify(plan: StagePlan, meas, simulator, gamma=DEFAULT_GAMMA, workers=1) -> list:
    """Run the stages in order; each stage searches its own (or an automatic) box."""
    original = plan.stages[0].box
    results = []
    for k, stage in enumerate(plan.stages):
        box = stage.box if stage.box != AUTO else auto_box(results[-1], original)
        if stage.strategy == "sobol":
            res = random_search(box, stage.samples, meas, simulator, gamma, stage.T_cut, workers)
        else:
            shape = stage.grid_shape or (max(2, int(math.isqrt(stage.samples))),) * 2
            surf = grid_sweep(box, shape, meas, simulator, stage.T_cut, workers)
            T_eff = effective_time(meas, stage.T_cut)
            res = surf.to_admissible(admissible_threshold(gamma, meas.delta, T_eff), gamma, box, T_eff)
        if res.n_admissible == 0:
            raise EmptyAdmissibleError(
                f"stage {k + 1} produced no admissible points; increase gamma or the sample count",
                stage=k,
            )
        results.append(res)
    return results


def multi_realization(
    make_measurement: Callable[[int], Measurement],
    seeds: Sequence[int],
    pipeline: Callable[[Measurement], AdmissibleSet],
) -> RealizationReport:
    """Run ``pipeline`` for each noise seed and intersect the admissible sets.

    The intersection is taken point-wise and is only defined when every
    realization evaluated the same points (lattice or Sobol search).
    """
    if len(seeds) < 1:
        raise ValueError("need at least one realization")
    sets = [pipeline(make_measurement(s)) for s in seeds]
    return combine_realizations(list(seeds), sets)


def combine_realizations(seeds, sets) -> RealizationReport:
    """Intersect admissible sets that share their evaluation points."""
    report = RealizationReport(list(seeds), list(sets))
    ref = sets[0].points
    if all(s.points.shape == ref.shape and np.array_equal(s.points, ref) for s in sets):
        inter = np.logical_and.reduce([s.mask for s in sets])
        report.intersection = inter
        if not inter.any():
            report.notes.append("admissible sets of the realizations do not overlap")
    else:
        report.notes.append("realizations used different evaluation points; no intersection computed")
    return report


def write_json(record, path) -> None:
    Path(path).write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
