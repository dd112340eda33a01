"""Unsteady convection-diffusion with surface adsorption on P1 elements.

The bulk concentration ``c`` lives on mesh vertices, the adsorbed concentration
``m`` on SURFACE vertices with a lumped surface mass. Time stepping is
Crank-Nicolson for both fields. For the Henry law the surface update is affine in
``c`` and is eliminated exactly, leaving one linear solve per step with a matrix
that is factorized once per run. For the Langmuir law the bilinear
``Da_a c m / M`` term is lagged and iterated (Picard) against the same
factorization.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _fem
from .exceptions import ConfigError, FormatError, MeshMismatchError, NonConvergenceError
from .geometry import Mesh, Tag
from .stokes import FlowField

__all__ = [
    "IsothermKind",
    "Isotherm",
    "Nondimensionalization",
    "TransportParams",
    "TransportState",
    "BreakthroughCurve",
    "TransportOperators",
    "TransportResult",
    "MassBalance",
    "CrankNicolsonStepper",
    "assemble_transport",
    "surface_update",
    "step_cn",
    "run_transport",
    "compute_outlet_avg",
    "mass_balance_report",
    "sensitivity_sweep",
    "mesh_peclet",
]

PICARD_TOL = 1e-10
PICARD_MAXITER = 50


class IsothermKind(str, Enum):
    HENRY = "henry"
    LANGMUIR = "langmuir"


@dataclass(frozen=True)
class Isotherm:
    variant: IsothermKind = IsothermKind.HENRY
    Da_a: float = 0.005
    Da_d: float = 0.05
    M: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "variant", IsothermKind(self.variant))
        for name in ("Da_a", "Da_d"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ConfigError(f"{name} must be finite and non-negative, got {v}")
        if self.variant is IsothermKind.LANGMUIR:
            if self.M is None or not (math.isfinite(self.M) and self.M > 0):
                raise ConfigError("Langmuir isotherm requires M > 0")

    def rate(self, c, m):
        """Adsorption rate f(c, m) = dm/dt."""
        f = self.Da_a * c - self.Da_d * m
        if self.variant is IsothermKind.LANGMUIR:
            f = f - self.Da_a * c * m / self.M
        return f

    def equilibrium(self, c=1.0):
        """Surface concentration at which f(c, m) = 0."""
        if self.variant is IsothermKind.HENRY:
            return self.Da_a * c / self.Da_d
        return self.Da_a * c * self.M / (self.Da_a * c + self.Da_d * self.M)


@dataclass(frozen=True)
class Nondimensionalization:
    """Dimensional inputs and the dimensionless groups derived from them."""

    l: float
    u_bar: float
    c_bar: float
    D: float
    k_a: float
    k_d: float
    m_infty: float | None = None

    def __post_init__(self):
        scales = [self.l, self.u_bar, self.c_bar, self.D]
        if not all(s > 0 for s in scales):
            raise ConfigError("length, velocity, concentration and diffusivity scales must be positive")

    @property
    def Pe(self):
        return self.l * self.u_bar / self.D

    @property
    def Da_a(self):
        return self.k_a / self.u_bar

    @property
    def Da_d(self):
        return self.k_d * self.l / self.u_bar

    @property
    def M(self):
        return None if self.m_infty is None else self.m_infty / (self.l * self.c_bar)

    @property
    def m_bar(self):
        return self.l * self.c_bar

    def isotherm(self) -> Isotherm:
        if self.m_infty is None:
            return Isotherm(IsothermKind.HENRY, self.Da_a, self.Da_d)
        return Isotherm(IsothermKind.LANGMUIR, self.Da_a, self.Da_d, self.M)


@dataclass(frozen=True)
class TransportParams:
    Pe: float = 10.0
    isotherm: Isotherm = field(default_factory=Isotherm)
    tau: float = 0.1
    T_end: float = 40.0

    def __post_init__(self):
        if not self.Pe > 0:
            raise ConfigError("Pe must be positive")
        if not (self.tau > 0 and self.T_end > 0):
            raise ConfigError("tau and T_end must be positive")
        if self.tau > self.T_end:
            raise ConfigError("tau must not exceed T_end")
        n = round(self.T_end / self.tau)
        if abs(n * self.tau - self.T_end) > 1e-9 * self.T_end:
            raise ConfigError(f"tau={self.tau} does not divide T_end={self.T_end}")

    @property
    def n_steps(self) -> int:
        return round(self.T_end / self.tau)

    def with_rates(self, Da_a=None, Da_d=None, M=None) -> "TransportParams":
        iso = self.isotherm
        iso = replace(
            iso,
            Da_a=iso.Da_a if Da_a is None else Da_a,
            Da_d=iso.Da_d if Da_d is None else Da_d,
            M=iso.M if M is None else M,
        )
        return replace(self, isotherm=iso)


@dataclass
class TransportState:
    t: float
    c: np.ndarray
    m: np.ndarray


@dataclass
class BreakthroughCurve:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape:
            raise ValueError("times and values must have the same length")

    def __len__(self):
        return len(self.times)

    def to_csv(self, path) -> None:
        rows = [f"{t:.17g},{v:.17g}" for t, v in zip(self.times, self.values)]
        Path(path).write_text("t,c_out\n" + "\n".join(rows) + "\n")

    @classmethod
    def from_csv(cls, path) -> "BreakthroughCurve":
        lines = Path(path).read_text().split()
        if not lines or lines[0] != "t,c_out":
            raise FormatError("expected header 't,c_out'")
        try:
            data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]]).reshape(-1, 2)
        except ValueError as exc:
            raise FormatError(str(exc)) from None
        return cls(data[:, 0], data[:, 1])


@dataclass(eq=False)
class TransportOperators:
    """Assembled P1 operators for one mesh/flow pair.

    ``convection[i, j] = int phi_j u . grad(phi_i)``, ``diffusion`` is the
    unscaled stiffness matrix and ``outlet[i, j] = int_out (u . n) phi_i phi_j``.
    """

    mesh: Mesh
    Pe: float
    mass: sp.csr_matrix
    convection: sp.csr_matrix
    diffusion: sp.csr_matrix
    outlet: sp.csr_matrix
    surface_nodes: np.ndarray
    surface_weights: np.ndarray
    inlet_nodes: np.ndarray
    outlet_weights: np.ndarray  # sum(w * c) = int_out c
    mesh_peclet: float = 0.0

    @property
    def transport(self) -> sp.csr_matrix:
        """Matrix of d(c, s)."""
        return (-self.convection + self.diffusion / self.Pe + self.outlet).tocsr()

    @property
    def outlet_length(self) -> float:
        return float(self.outlet_weights.sum())

    def with_pe(self, Pe: float) -> "TransportOperators":
        return replace(self, Pe=float(Pe), mesh_peclet=self.mesh_peclet * Pe / self.Pe)


def mesh_peclet(mesh: Mesh, flow: FlowField, Pe: float) -> float:
    """max over elements of h_e |u_e| Pe / 2 with h_e the longest edge."""
    p = mesh.vertices[mesh.triangles]
    h = np.max(np.linalg.norm(p - np.roll(p, 1, axis=1), axis=2), axis=1)
    speed = np.linalg.norm(flow.u[_fem.p2_dofmap(mesh)], axis=2).max(axis=1)
    return float(np.max(h * speed) * Pe / 2.0)


def assemble_transport(mesh: Mesh, flow: FlowField, Pe: float) -> TransportOperators:
    if flow.mesh_checksum and flow.mesh_checksum != mesh.checksum():
        raise MeshMismatchError("flow field was computed on a different mesh")
    if not Pe > 0:
        raise ConfigError("Pe must be positive")
    nv = mesh.n_vertices
    t = mesh.triangles
    area, glam = _fem.geometry(mesh.vertices, t)

    lam = _fem.QUAD_BARY
    wq = _fem.QUAD_W[None, :] * area[:, None]
    Me = np.einsum("eq,qi,qj->eij", wq, lam, lam)
    Ae = area[:, None, None] * np.einsum("eid,ejd->eij", glam, glam)
    uq = np.einsum("qk,ekd->eqd", _fem.p2_values(lam), flow.u[_fem.p2_dofmap(mesh)])
    # test index i carries the gradient, trial index j the value
    Ce = np.einsum("eq,qj,eqd,eid->eij", wq, lam, uq, glam)

    r, c = _fem.coo_pattern(t)
    shape = (nv, nv)
    M = sp.csr_matrix((Me.ravel(), (r, c)), shape=shape)
    A = sp.csr_matrix((Ae.ravel(), (r, c)), shape=shape)
    C = sp.csr_matrix((Ce.ravel(), (r, c)), shape=shape)

    sel = mesh.facet_labels == int(Tag.OUTLET)
    f = mesh.facets[sel]
    ln = mesh.facet_lengths[sel]
    n = mesh.facet_normals[sel]
    mid = nv + mesh.facet_edges[sel]
    un = [np.einsum("ij,ij->i", flow.u[d], n) for d in (f[:, 0], mid, f[:, 1])]
    Be = np.zeros((len(f), 2, 2))
    for s, w in zip(_fem.GAUSS_S, _fem.GAUSS_W):
        q = (1 - s) * (1 - 2 * s) * un[0] + 4 * s * (1 - s) * un[1] + s * (2 * s - 1) * un[2]
        phi = np.array([1 - s, s])
        Be += (w * ln * q)[:, None, None] * np.outer(phi, phi)[None]
    br, bc = _fem.coo_pattern(f)
    B = sp.csr_matrix((Be.ravel(), (br, bc)), shape=shape)

    ow = np.zeros(nv)
    np.add.at(ow, f[:, 0], ln / 2)
    np.add.at(ow, f[:, 1], ln / 2)

    ssel = mesh.facet_labels == int(Tag.SURFACE)
    sf = mesh.facets[ssel]
    sl = mesh.facet_lengths[ssel]
    sw_full = np.zeros(nv)
    np.add.at(sw_full, sf[:, 0], sl / 2)
    np.add.at(sw_full, sf[:, 1], sl / 2)
    snodes = np.unique(sf)

    ops = TransportOperators(
        mesh=mesh,
        Pe=float(Pe),
        mass=M,
        convection=C,
        diffusion=A,
        outlet=B,
        surface_nodes=snodes,
        surface_weights=sw_full[snodes],
        inlet_nodes=mesh.nodes_with(Tag.INLET),
        outlet_weights=ow,
        mesh_peclet=mesh_peclet(mesh, flow, Pe),
    )
    if ops.mesh_peclet > 2:
        warnings.warn(
            f"mesh Peclet number {ops.mesh_peclet:.2f} > 2; Galerkin solution may oscillate",
            RuntimeWarning,
            stacklevel=2,
        )
    return ops


def surface_update(m0, c0, c1, isotherm: Isotherm, tau: float, correction=None):
    """Crank-Nicolson update of the adsorbed concentration at each surface node.

    Henry: ``m1 = alpha m0 + beta (c0 + c1)``.  For Langmuir, pass the lagged
    midpoint product ``correction = Da_a c_mid m_mid / M``; ``None`` solves the
    node-local midpoint equation exactly for the given ``c0, c1``.
    """
    a, d = isotherm.Da_a, isotherm.Da_d
    if isotherm.variant is IsothermKind.HENRY:
        den = 1 + tau * d / 2
        return ((1 - tau * d / 2) * m0 + tau * a / 2 * (c0 + c1)) / den
    cm = 0.5 * (np.asarray(c0) + np.asarray(c1))
    if correction is None:
        k = a * cm / isotherm.M + d
        return ((1 - tau * k / 2) * m0 + tau * a * cm) / (1 + tau * k / 2)
    den = 1 + tau * d / 2
    return ((1 - tau * d / 2) * m0 + tau * a * cm - tau * correction) / den


class CrankNicolsonStepper:
    """Pre-factorized Crank-Nicolson stepper for fixed operators and parameters."""

    def __init__(self, operators: TransportOperators, params: TransportParams, inlet_value: float = 1.0):
        if operators.Pe != params.Pe:
            operators = operators.with_pe(params.Pe)
        self.ops = operators
        self.params = params
        self.inlet_value = float(inlet_value)
        iso = params.isotherm
        tau = params.tau
        nv = operators.mesh.n_vertices
        self.tau = tau
        self.beta = tau * iso.Da_a / 2 / (1 + tau * iso.Da_d / 2)
        self.alpha = (1 - tau * iso.Da_d / 2) / (1 + tau * iso.Da_d / 2)
        self.g = tau / (1 + tau * iso.Da_d / 2)
        sn, sw = operators.surface_nodes, operators.surface_weights
        S = sp.csr_matrix((sw * self.beta / tau, (sn, sn)), shape=(nv, nv))
        K = operators.transport
        Mt = operators.mass / tau
        self.K = K
        self.A1 = (Mt + 0.5 * K + S).tocsr()
        self.A0 = (Mt - 0.5 * K - S).tocsr()
        mask = np.ones(nv, dtype=bool)
        mask[operators.inlet_nodes] = False
        self.free = np.flatnonzero(mask)
        self.fixed = operators.inlet_nodes
        A1f = self.A1[self.free]
        self._lu = spla.splu(A1f[:, self.free].tocsc())
        self._lift = A1f[:, self.fixed] @ np.full(len(self.fixed), self.inlet_value)
        # rows used for the consistent inlet flux in the balance report
        self._Mfix = (operators.mass / tau)[self.fixed]
        self._Kfix = K[self.fixed]
        self._outw = np.asarray(operators.outlet.sum(axis=0)).ravel()

    def initial_state(self) -> TransportState:
        """Zero bulk and surface concentration; inlet nodes already carry the inlet value."""
        c = np.zeros(self.ops.mesh.n_vertices)
        c[self.fixed] = self.inlet_value
        return TransportState(0.0, c, np.zeros(len(self.ops.surface_nodes)))

    def _solve(self, rhs):
        c1 = np.empty_like(rhs)
        c1[self.fixed] = self.inlet_value
        c1[self.free] = self._lu.solve(rhs[self.free] - self._lift)
        return c1

    def step(self, state: TransportState) -> TransportState:
        iso = self.params.isotherm
        sn, sw, tau = self.ops.surface_nodes, self.ops.surface_weights, self.tau
        c0, m0 = state.c, state.m
        base = self.A0 @ c0
        base[sn] -= sw * (self.alpha - 1) * m0 / tau
        if iso.variant is IsothermKind.HENRY:
            c1 = self._solve(base)
            m1 = self.alpha * m0 + self.beta * (c1[sn] + c0[sn])
            return TransportState(state.t + tau, c1, m1)

        coef = iso.Da_a / iso.M
        corr = coef * c0[sn] * m0
        c1 = m1 = None
        for it in range(1, PICARD_MAXITER + 1):
            rhs = base.copy()
            rhs[sn] += sw * self.g * corr / tau
            c_new = self._solve(rhs)
            m_new = self.alpha * m0 + self.beta * (c_new[sn] + c0[sn]) - self.g * corr
            corr = coef * 0.5 * (c0[sn] + c_new[sn]) * 0.5 * (m0 + m_new)
            if c1 is not None:
                upd = np.abs(c_new - c1).max() + np.abs(m_new - m1).max()
                if upd < PICARD_TOL:
                    return TransportState(state.t + tau, c_new, m_new)
            c1, m1 = c_new, m_new
        raise NonConvergenceError(
            f"Picard iteration did not converge in {PICARD_MAXITER} iterations (update {upd:.3e})",
            iterations=PICARD_MAXITER,
            residual=upd,
        )

    def fluxes(self, s0: TransportState, s1: TransportState):
        """(inflow, outflow) integrated over one step."""
        cm = 0.5 * (s0.c + s1.c)
        inflow = self._Mfix @ (s1.c - s0.c) + self._Kfix @ cm
        return self.tau * float(inflow.sum()), self.tau * float(self._outw @ cm)


def step_cn(state: TransportState, operators: TransportOperators, params: TransportParams) -> TransportState:
    """Single step; builds a stepper each call, use ``CrankNicolsonStepper`` in loops."""
    return CrankNicolsonStepper(operators, params).step(state)


def compute_outlet_avg(c, mesh_or_ops) -> float:
    """Length-averaged concentration over the outlet (exact for P1)."""
    if isinstance(c, TransportState):
        c = c.c
    if isinstance(mesh_or_ops, TransportOperators):
        w = mesh_or_ops.outlet_weights
    else:
        mesh = mesh_or_ops
        f = mesh.facets_with(Tag.OUTLET)
        if len(f) == 0:
            raise ValueError("mesh has no OUTLET facets")
        ln = np.linalg.norm(mesh.vertices[f[:, 1]] - mesh.vertices[f[:, 0]], axis=1)
        w = np.zeros(mesh.n_vertices)
        np.add.at(w, f[:, 0], ln / 2)
        np.add.at(w, f[:, 1], ln / 2)
    return float(w @ np.asarray(c) / w.sum())


@dataclass
class MassBalance:
    """Per-step global balance of bulk plus adsorbed mass."""

    times: np.ndarray
    bulk: np.ndarray
    surface: np.ndarray
    inflow: np.ndarray  # cumulative
    outflow: np.ndarray  # cumulative

    @property
    def residual(self) -> np.ndarray:
        return (self.bulk - self.bulk[0]) + (self.surface - self.surface[0]) - (self.inflow - self.outflow)

    def as_table(self) -> np.ndarray:
        return np.column_stack([self.times, self.bulk, self.surface, self.inflow, self.outflow, self.residual])


@dataclass
class TransportResult:
    curve: BreakthroughCurve
    final_state: TransportState
    snapshots: dict = field(default_factory=dict)
    balance: MassBalance | None = None


def run_transport(
    mesh: Mesh,
    flow: FlowField | None,
    params: TransportParams,
    snapshot_times=(),
    operators: TransportOperators | None = None,
    inlet_value: float = 1.0,
    track_balance: bool = True,
    initial_state: TransportState | None = None,
) -> TransportResult:
    if operators is None:
        operators = assemble_transport(mesh, flow, params.Pe)
    stepper = CrankNicolsonStepper(operators, params, inlet_value)
    n = params.n_steps
    tau = params.tau
    snap_steps = {int(round(t / tau)): t for t in snapshot_times}
    state = initial_state or stepper.initial_state()
    w = operators.outlet_weights / operators.outlet_length
    values = np.empty(n)
    snapshots = {}
    if track_balance:
        sw = operators.surface_weights
        bulk = np.empty(n + 1)
        surf = np.empty(n + 1)
        cin = np.zeros(n + 1)
        cout = np.zeros(n + 1)
        msum = np.asarray(operators.mass.sum(axis=0)).ravel()
        bulk[0] = msum @ state.c
        surf[0] = sw @ state.m
    if 0 in snap_steps:
        snapshots[snap_steps[0]] = state.c.copy()
    for k in range(1, n + 1):
        new = stepper.step(state)
        values[k - 1] = w @ new.c
        if track_balance:
            fi, fo = stepper.fluxes(state, new)
            bulk[k] = msum @ new.c
            surf[k] = sw @ new.m
            cin[k] = cin[k - 1] + fi
            cout[k] = cout[k - 1] + fo
        if k in snap_steps:
            snapshots[snap_steps[k]] = new.c.copy()
        state = new
    times = tau * np.arange(1, n + 1)
    balance = None
    if track_balance:
        balance = MassBalance(tau * np.arange(n + 1), bulk, surf, cin, cout)
    return TransportResult(BreakthroughCurve(times, values), state, snapshots, balance)


def mass_balance_report(result: TransportResult) -> MassBalance:
    if result.balance is None:
        raise ValueError("run was made with track_balance=False")
    return result.balance


def sensitivity_sweep(mesh, flow, base: TransportParams, axis: str, values, operators=None):
    """One breakthrough curve per value of ``axis`` in {Pe, Da_a, Da_d, M}."""
    if axis not in ("Pe", "Da_a", "Da_d", "M"):
        raise ConfigError(f"unknown sensitivity axis {axis!r}")
    if operators is None:
        operators = assemble_transport(mesh, flow, base.Pe)
    curves = []
    for v in values:
        if axis == "Pe":
            p = replace(base, Pe=float(v))
        else:
            p = base.with_rates(**{axis: float(v)})
        res = run_transport(mesh, flow, p, operators=operators.with_pe(p.Pe), track_balance=False)
        curves.append(res.curve)
    return curves
