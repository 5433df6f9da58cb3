"""Geometry and fixed-point structure of the qubit flows.

Closed forms for the dissipative torsion model (pump m, damping gamma,
torsion g): besides the origin, for m^2 > gamma^2 and g != 0 a mirror
pair of fixed points exists at

    r_fp(+,-) = ( +/- (|gamma|/g) sqrt(d),  (m/g) d,  +/- sign(gamma) (m/g) sqrt(d) ),
    d = (m^2 - gamma^2) / m^2,

with |r_fp| = g_min/|g| where g_min = sqrt((gamma^2 + m^2) d + m^2 d^2),
so the pair sits inside the Bloch ball iff |g| > g_min. Linearized about
the origin the coordinates xi_pm = (z +/- x)/2 decouple with rates
m - gamma (growth when m > gamma) and -(m + gamma), alongside dy/dt = -gamma y.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dynamics import (
    DissipativeTorsionParams,
    VectorField,
    dissipative_torsion_field,
    integrate,
    integrate_ensemble,
)

__all__ = [
    "FixedPointRecord",
    "PhaseDiagram",
    "divergence",
    "vorticity",
    "pair_separation_rate",
    "midpoint_k_matrix",
    "analytic_fixed_points",
    "g_min",
    "newton_refine",
    "jacobian_stability",
    "xi_transform",
    "xi_inverse",
    "basin_classify",
    "basin_classify_many",
    "phase_scan",
]

_FD_STEP = 1e-6


@dataclass(frozen=True)
class FixedPointRecord:
    location: np.ndarray
    kind: str  # "Origin" | "Plus" | "Minus" | "LineContinuum"
    eigenvalues: Optional[np.ndarray]
    stable: Optional[bool]
    in_ball: Optional[bool]
    residual: float = 0.0


@dataclass(frozen=True)
class PhaseDiagram:
    axis_names: tuple
    axis1: np.ndarray
    axis2: np.ndarray
    fixed: dict
    cells: np.ndarray  # (n1, n2) of label strings


def _num_jacobian_rhs(field, r, h=_FD_STEP):
    jac = np.empty((3, 3))
    for b in range(3):
        dr = np.zeros(3)
        dr[b] = h
        jac[:, b] = (field.rhs(r + dr) - field.rhs(r - dr)) / (2.0 * h)
    return jac


def _jacobian(field, r):
    jac = field.jacobian(r)
    return _num_jacobian_rhs(field, r) if jac is None else jac


def divergence(field, r):
    """div(dr/dt) at r: tr G(r) plus the generator-gradient term r_b d_a G_ab."""
    r = np.asarray(r, dtype=float)
    if isinstance(field, VectorField):
        quad = field.quad
        return float(
            np.trace(field.linear)
            + (np.einsum("aac->c", quad) + np.einsum("aca->c", quad)) @ r
        )
    return float(np.trace(_jacobian(field, r)))


def vorticity(field, r):
    """curl(dr/dt) at r."""
    r = np.asarray(r, dtype=float)
    jac = _jacobian(field, r)
    return np.array(
        [jac[2, 1] - jac[1, 2], jac[0, 2] - jac[2, 0], jac[1, 0] - jac[0, 1]]
    )


def pair_separation_rate(r_a, r_b, field, p=1.0):
    """Instantaneous rate of change of the Schatten-p distance of a state pair.

    d/dt ||X_a - X_b||_p = 2^(1/p - 1) (dr/|dr|) . (v(r_a) - v(r_b)); positive
    values mean the flow is expansive on this pair. Symmetric under swapping
    the pair.
    """
    r_a = np.asarray(r_a, dtype=float)
    r_b = np.asarray(r_b, dtype=float)
    diff = r_a - r_b
    dist = np.linalg.norm(diff)
    if dist == 0.0:
        raise ValueError("pair separation rate is undefined for coincident states")
    if not (p == np.inf or p >= 1.0):
        raise ValueError(f"requires p >= 1, got {p}")
    prefactor = 2.0 ** (1.0 / p - 1.0)  # 1/inf == 0.0, so p=inf gives 1/2
    return float(prefactor * diff @ (field.rhs(r_a) - field.rhs(r_b)) / dist)


def midpoint_k_matrix(field, midpoint):
    """K_ab(R) = R_c d_b G_ac(R); positive eigenvalues of its symmetric part
    mark expansive directions for pairs centered at R."""
    r = np.asarray(midpoint, dtype=float)
    if isinstance(field, VectorField):
        return np.einsum("acb,c->ab", field.quad, r)
    k = np.empty((3, 3))
    for b in range(3):
        dr = np.zeros(3)
        dr[b] = _FD_STEP
        dg = (field.generator(r + dr) - field.generator(r - dr)) / (2.0 * _FD_STEP)
        k[:, b] = dg @ r
    return k


def g_min(m, gamma):
    """Smallest |g| for which the off-origin fixed points fit in the Bloch ball."""
    if m * m <= gamma * gamma:
        raise ValueError("no finite pair exists: requires m^2 > gamma^2")
    d = (m * m - gamma * gamma) / (m * m)
    return float(np.sqrt((gamma * gamma + m * m) * d + m * m * d * d))


def _record_at(field, location, kind, in_ball=None):
    loc = np.asarray(location, dtype=float)
    jac = _jacobian(field, loc)
    evals = np.linalg.eigvals(jac)
    return FixedPointRecord(
        location=loc,
        kind=kind,
        eigenvalues=evals,
        stable=bool(np.max(evals.real) < -1e-10),
        in_ball=in_ball,
        residual=float(np.linalg.norm(field.rhs(loc))),
    )


def analytic_fixed_points(params: DissipativeTorsionParams):
    """All fixed points of the dissipative torsion flow, by closed form.

    Always contains the origin. Adds the mirror pair when m^2 > gamma^2 and
    g != 0, marked in_ball per |g| >= g_min. On the singular lines g = 0,
    gamma = +/-m a LineContinuum record stands for the fixed line z = +/-x,
    y = 0. gamma = 0 returns the origin only (unanalyzed corner).
    """
    m, gamma, g = params.m, params.gamma, params.g
    field = dissipative_torsion_field(params)
    records = [_record_at(field, np.zeros(3), "Origin", in_ball=True)]
    if gamma == 0.0:
        return records
    if g == 0.0 and (gamma == m or gamma == -m) and m != 0.0:
        sgn = 1.0 if gamma == m else -1.0
        records.append(
            FixedPointRecord(
                location=np.array([1.0, 0.0, sgn]) / np.sqrt(2.0),
                kind="LineContinuum",
                eigenvalues=None,
                stable=None,
                in_ball=None,
            )
        )
        return records
    if m * m > gamma * gamma and g != 0.0:
        d = (m * m - gamma * gamma) / (m * m)
        sq = np.sqrt(d)
        plus = np.array([abs(gamma) / g * sq, m / g * d, np.sign(gamma) * m / g * sq])
        minus = np.array([-plus[0], plus[1], -plus[2]])
        inside = abs(g) >= g_min(m, gamma)
        records.append(_record_at(field, plus, "Plus", in_ball=inside))
        records.append(_record_at(field, minus, "Minus", in_ball=inside))
    return records


def newton_refine(field, r0, iterations=1):
    """Newton steps on the flow's rhs; returns (refined point, total move)."""
    r = np.asarray(r0, dtype=float).copy()
    moved = 0.0
    for _ in range(iterations):
        step = np.linalg.solve(_jacobian(field, r), -field.rhs(r))
        r = r + step
        moved += float(np.linalg.norm(step))
    return r, moved


def jacobian_stability(field, r_star, residual_tol=1e-8):
    """Eigenvalues and stability of the linearization at a fixed point."""
    r_star = np.asarray(r_star, dtype=float)
    res = float(np.linalg.norm(field.rhs(r_star)))
    if res > residual_tol:
        raise ValueError(f"not a fixed point: |rhs| = {res:.3g} > {residual_tol:.3g}")
    kind = "Origin" if np.allclose(r_star, 0.0) else "Point"
    rec = _record_at(field, r_star, kind, in_ball=bool(r_star @ r_star <= 1.0 + 1e-9))
    return rec


def xi_transform(r):
    """Decoupling coordinates (xi_plus, xi_minus, y) with xi_pm = (z +/- x)/2."""
    r = np.asarray(r, dtype=float)
    return np.array([(r[2] + r[0]) / 2.0, (r[2] - r[0]) / 2.0, r[1]])


def xi_inverse(xi):
    """Inverse of xi_transform."""
    xi = np.asarray(xi, dtype=float)
    return np.array([xi[0] - xi[1], xi[2], xi[0] + xi[1]])


def basin_classify(
    r0,
    params: DissipativeTorsionParams,
    t_max=200.0,
    dt=1e-3,
    match_radius=1e-4,
    ball_tol=1e-9,
):
    """Label the attractor reached from r0: Plus, Minus, Origin, Unphysical,
    or Undecided when no fixed point is approached by t_max."""
    return basin_classify_many(
        np.asarray(r0, dtype=float)[None, :],
        params,
        t_max=t_max,
        dt=dt,
        match_radius=match_radius,
        ball_tol=ball_tol,
    )[0]


def basin_classify_many(
    r0s,
    params: DissipativeTorsionParams,
    t_max=200.0,
    dt=1e-3,
    match_radius=1e-4,
    ball_tol=1e-9,
    threads=1,
):
    """Basin labels for a batch of starts (one integration batch per call)."""
    field = dissipative_torsion_field(params)
    trajs = integrate_ensemble(
        field, np.asarray(r0s, dtype=float), t_max, dt=dt, ball_tol=ball_tol, threads=threads
    )
    fixed = [rec for rec in analytic_fixed_points(params) if rec.kind != "LineContinuum"]
    labels = []
    for traj in trajs:
        if traj.status == "Unphysical":
            labels.append("Unphysical")
            continue
        end = traj.final_bloch()
        best = "Undecided"
        best_d = match_radius
        for rec in fixed:
            dist = np.linalg.norm(end - rec.location)
            if dist <= best_d:
                best = rec.kind
                best_d = dist
        labels.append(best)
    return labels


def _phase_label(m, gamma, g):
    if g == 0.0 and abs(m) == abs(gamma) and m != 0.0:
        return "LineDegenerate"
    if m * m > gamma * gamma:
        if g != 0.0 and abs(g) >= g_min(m, gamma):
            return "Bistable"
        return "NoFiniteAttractorInBall"
    return "SingleStableOrigin"


def phase_scan(axis1, axis2, fixed):
    """Label each cell of a 2-D parameter grid by its fixed-point structure.

    axis1/axis2 are (name, values) pairs over two of {"m", "gamma", "g"};
    `fixed` supplies the third. Cells: SingleStableOrigin, Bistable,
    NoFiniteAttractorInBall, LineDegenerate.
    """
    name1, vals1 = axis1
    name2, vals2 = axis2
    names = {name1, name2} | set(fixed)
    if names != {"m", "gamma", "g"} or len(fixed) != 1:
        raise ValueError("scan needs two axes plus one fixed value covering m, gamma, g")
    vals1 = np.asarray(vals1, dtype=float)
    vals2 = np.asarray(vals2, dtype=float)
    cells = np.empty((vals1.size, vals2.size), dtype=object)
    for i, v1 in enumerate(vals1):
        for j, v2 in enumerate(vals2):
            p = dict(fixed)
            p[name1] = float(v1)
            p[name2] = float(v2)
            cells[i, j] = _phase_label(p["m"], p["gamma"], p["g"])
    return PhaseDiagram(
        axis_names=(name1, name2), axis1=vals1, axis2=vals2, fixed=dict(fixed), cells=cells
    )
