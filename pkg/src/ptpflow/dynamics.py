"""Continuous-time qubit models: Bloch-ball flows and the NINO master equation.

Every flow used here is polynomial in the Bloch vector,

    dr_a/dt = C_a + L_ab r_b + Q_abc r_b r_c,

i.e. a state-dependent generator G(r) = L + Q.r acting as dr/dt = G(r) r + C.
The torsion model is G(r) = g z J_z (a z-rotation whose rate grows with z),
and the dissipative torsion model adds pumping and uniform damping,
G = m lambda_4 - gamma I + g z J_z. Operator-form evolution follows the
normalization-fixing master equation

    dX/dt = sum_a zeta_a |z_a|^2 (L_a X + X L_a†) + sum_b zeta_b B_b X B_b†
            - X tr(X dF0),
    dF0 = sum_a zeta_a |z_a|^2 (L_a + L_a†) + sum_b zeta_b B_b† B_b,

whose right-hand side is traceless on unit-trace states, so the flow stays
on the physical slice without explicit renormalization.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from . import kernels
from .linalg import IDENTITY_2, PAULIS, dag, to_bloch

__all__ = [
    "J_Z",
    "LAMBDA_4",
    "BLOCH_MIRROR",
    "VectorField",
    "CallableField",
    "DissipativeTorsionParams",
    "NinoGeneratorSet",
    "Trajectory",
    "field_rhs",
    "torsion_field",
    "dissipative_torsion_field",
    "nino_rhs",
    "nino_bloch_field",
    "jump_coords_to_generator",
    "integrate",
    "integrate_ensemble",
    "first_entry_times",
]

J_Z = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
LAMBDA_4 = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])

# The dissipative torsion flow is equivariant under this rotation by pi
# about the y axis; it swaps the two off-origin fixed points.
BLOCH_MIRROR = np.diag([-1.0, 1.0, -1.0])

_STATUS_NAMES = ("MaxTime", "Converged", "Unphysical")


@dataclass(frozen=True)
class VectorField:
    """Polynomial Bloch flow dr/dt = G(r) r + C with G(r) = linear + quad.r."""

    linear: np.ndarray  # (3, 3)
    quad: np.ndarray  # (3, 3, 3); G_ab(r) = linear_ab + quad_abc r_c
    const: np.ndarray  # (3,)

    def __post_init__(self):
        lin = np.ascontiguousarray(self.linear, dtype=float)
        quad = np.ascontiguousarray(self.quad, dtype=float)
        const = np.ascontiguousarray(self.const, dtype=float)
        if lin.shape != (3, 3) or quad.shape != (3, 3, 3) or const.shape != (3,):
            raise ValueError("field arrays must have shapes (3,3), (3,3,3), (3,)")
        if not (np.isfinite(lin).all() and np.isfinite(quad).all() and np.isfinite(const).all()):
            raise ValueError("field coefficients must be finite")
        object.__setattr__(self, "linear", lin)
        object.__setattr__(self, "quad", quad)
        object.__setattr__(self, "const", const)

    def generator(self, r):
        """State-dependent generator G(r)."""
        r = np.asarray(r, dtype=float)
        return self.linear + self.quad @ r

    def rhs(self, r):
        r = np.asarray(r, dtype=float)
        return self.generator(r) @ r + self.const

    def jacobian(self, r):
        """Analytic Jacobian of the rhs: G(r) + (d_b G_ac) r_c."""
        r = np.asarray(r, dtype=float)
        return self.generator(r) + np.einsum("acb,c->ab", self.quad, r)


@dataclass(frozen=True)
class CallableField:
    """Generic flow given by a generator callable; integrates via the slow path."""

    generator_fn: Callable[[np.ndarray], np.ndarray]
    const: np.ndarray = dc_field(default_factory=lambda: np.zeros(3))
    jacobian_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def generator(self, r):
        return np.asarray(self.generator_fn(np.asarray(r, dtype=float)), dtype=float)

    def rhs(self, r):
        r = np.asarray(r, dtype=float)
        return self.generator(r) @ r + np.asarray(self.const, dtype=float)

    def jacobian(self, r):
        if self.jacobian_fn is None:
            return None
        return np.asarray(self.jacobian_fn(np.asarray(r, dtype=float)), dtype=float)


@dataclass(frozen=True)
class DissipativeTorsionParams:
    """Dimensionless pump (m), damping (gamma), and torsion (g) strengths."""

    m: float
    gamma: float
    g: float

    def __post_init__(self):
        for name in ("m", "gamma", "g"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


def field_rhs(r, field):
    """Velocity dr/dt of `field` at Bloch point r."""
    return field.rhs(r)


def torsion_field(g):
    """Incompressible twist G(r) = g z J_z: z-rotation at a z-dependent rate."""
    quad = np.zeros((3, 3, 3))
    quad[:, :, 2] = g * J_Z
    return VectorField(np.zeros((3, 3)), quad, np.zeros(3))


def dissipative_torsion_field(params: DissipativeTorsionParams):
    """Flow with components (mz - gx - gyz, -gy + gxz, mx - gz) in (x, y, z)."""
    quad = np.zeros((3, 3, 3))
    quad[:, :, 2] = params.g * J_Z
    lin = params.m * LAMBDA_4 - params.gamma * np.eye(3)
    return VectorField(lin, quad, np.zeros(3))


class NinoGeneratorSet:
    """Markovian generator data: nonjump terms (z_a, L_a) and jump terms (zeta_b, B_b).

    At least one nonjump term is required and the weights must satisfy
    sum_a zeta_a |z_a|^2 = 1 so the short-time limit is the identity.
    Nonjump signs default to +1; negative ones are accepted with a warning
    since the resulting flows are not analyzed here.
    """

    def __init__(self, nonjump, jump=(), nonjump_signs=None):
        zs, ls = [], []
        for z, l in nonjump:
            zs.append(complex(z))
            ls.append(np.asarray(l, dtype=complex))
        if not zs:
            raise ValueError("at least one nonjump generator is required")
        self.zs = np.array(zs, dtype=complex)
        self.ls = np.stack(ls)
        dim = self.ls.shape[1]
        if self.ls.shape[1:] != (dim, dim):
            raise ValueError("nonjump operators must be square and same-dim")
        if nonjump_signs is None:
            self.nonjump_signs = np.ones(len(zs))
        else:
            self.nonjump_signs = np.asarray(nonjump_signs, dtype=float)
        if self.nonjump_signs.shape != (len(zs),) or not np.all(
            np.abs(self.nonjump_signs) == 1.0
        ):
            raise ValueError("nonjump signs must be +/-1, one per term")
        if np.any(self.nonjump_signs < 0):
            warnings.warn("negative nonjump signs are outside the analyzed regime", stacklevel=2)
        zetas, bs = [], []
        for zeta, b in jump:
            if zeta not in (1, -1, 1.0, -1.0):
                raise ValueError("jump signs must be +/-1")
            zetas.append(float(zeta))
            bs.append(np.asarray(b, dtype=complex))
        self.jump_signs = np.array(zetas, dtype=float)
        self.bs = np.stack(bs) if bs else np.zeros((0, dim, dim), dtype=complex)
        if self.bs.shape[1:] != (dim, dim):
            raise ValueError("jump operators must match the nonjump dimension")
        norm = float(np.sum(self.nonjump_signs * np.abs(self.zs) ** 2))
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"nonjump weights must satisfy sum zeta |z|^2 = 1, got {norm}")
        self.dim = dim

    @classmethod
    def single(cls, l, z=1.0):
        return cls([(z, l)])

    @classmethod
    def unitary(cls, h):
        """Purely unitary evolution with Hamiltonian h (nonjump L = -i h)."""
        h = np.asarray(h, dtype=complex)
        return cls([(1.0, -1j * h)])

    @property
    def nonjump_weights(self):
        """zeta_a |z_a|^2 for each nonjump term."""
        return self.nonjump_signs * np.abs(self.zs) ** 2

    def df0(self):
        """dF_t/dt at t = 0: sum zeta|z|^2 (L + L†) + sum zeta B† B."""
        out = np.einsum("a,aij->ij", self.nonjump_weights, self.ls + dag(self.ls))
        if self.jump_signs.size:
            out = out + np.einsum("b,bji,bjk->ik", self.jump_signs, np.conj(self.bs), self.bs)
        return out


def nino_rhs(x, gens: NinoGeneratorSet):
    """dX/dt of the NINO master equation; traceless and Hermitian on states."""
    x = np.asarray(x, dtype=complex)
    w = gens.nonjump_weights
    out = np.einsum("a,aij,jk->ik", w, gens.ls, x)
    out += np.einsum("a,ij,akj->ik", w, x, np.conj(gens.ls))
    if gens.jump_signs.size:
        out += np.einsum("b,bij,jk,blk->il", gens.jump_signs, gens.bs, x, np.conj(gens.bs))
    out -= np.trace(x @ gens.df0()).real * x
    return out


def _linear_part(gens: NinoGeneratorSet, m):
    """The linear (pre-normalization) piece of the master equation on matrix m."""
    w = gens.nonjump_weights
    out = np.einsum("a,aij,jk->ik", w, gens.ls, m)
    out += np.einsum("a,ij,akj->ik", w, m, np.conj(gens.ls))
    if gens.jump_signs.size:
        out += np.einsum("b,bij,jk,blk->il", gens.jump_signs, gens.bs, m, np.conj(gens.bs))
    return out


def nino_bloch_field(gens: NinoGeneratorSet):
    """Bloch-space form of the NINO master equation (qubit generators only).

    The linear piece maps to an affine flow G_lin r + C by evaluating it on
    the Pauli basis, and the trace-fixing term contributes the nonlinear
    diagonal generator -(tr(X dF0)) I, quadratic in r.
    """
    if gens.dim != 2:
        raise ValueError("Bloch form requires qubit (2x2) generators")
    glin = np.empty((3, 3))
    const = np.empty(3)
    img_i = _linear_part(gens, IDENTITY_2)
    imgs = [_linear_part(gens, s) for s in PAULIS]
    for a, sa in enumerate(PAULIS):
        const[a] = 0.5 * np.trace(sa @ img_i).real
        for b in range(3):
            glin[a, b] = 0.5 * np.trace(sa @ imgs[b]).real
    df0 = gens.df0()
    w0 = np.trace(df0).real
    wvec = np.array([np.trace(s @ df0).real for s in PAULIS])
    quad = np.zeros((3, 3, 3))
    for a in range(3):
        quad[a, a, :] = -0.5 * wvec
    return VectorField(glin - 0.5 * w0 * np.eye(3), quad, const)


_EPS3 = np.zeros((3, 3, 3))
_EPS3[0, 1, 2] = _EPS3[1, 2, 0] = _EPS3[2, 0, 1] = 1.0
_EPS3[0, 2, 1] = _EPS3[2, 1, 0] = _EPS3[1, 0, 2] = -1.0


def jump_coords_to_generator(xi, zeta=1.0):
    """Bloch generator (G, C) of one jump term zeta B X B† with B = xi0 I + xi_a sigma_a.

    G_ab = zeta (|xi0|^2 - |xi1|^2 - |xi2|^2 - |xi3|^2) delta_ab
           + 2 zeta Im(xi0* xi_c) eps_abc + 2 zeta Re(xi_a* xi_b)
    C_a  = zeta [2 Re(xi0* xi_a) + eps_bca Im(xi_b* xi_c)]
    """
    xi = np.asarray(xi, dtype=complex)
    if xi.shape != (4,):
        raise ValueError("xi must be four complex coordinates (xi0, xi1, xi2, xi3)")
    x0, xv = xi[0], xi[1:]
    g = (abs(x0) ** 2 - float(np.sum(np.abs(xv) ** 2))) * np.eye(3)
    g += 2.0 * np.einsum("abc,c->ab", _EPS3, np.imag(np.conj(x0) * xv))
    g += 2.0 * np.real(np.outer(np.conj(xv), xv))
    c = 2.0 * np.real(np.conj(x0) * xv)
    c += np.einsum("bca,bc->a", _EPS3, np.imag(np.outer(np.conj(xv), xv)))
    return zeta * g, zeta * c


def _raise_if_nonfinite(traj):
    if np.isfinite(traj.states[-1]).all():
        return
    last_good = traj.times[-2] if len(traj.times) > 1 else traj.times[0]
    raise ValueError(
        f"non-finite state encountered at t = {traj.times[-1]}; last good time {last_good}"
    )


@dataclass
class Trajectory:
    """Sampled solution of a flow, with its stopping status.

    status is one of "Converged" (speed stayed below tolerance), "MaxTime",
    or "Unphysical" (left the closed Bloch ball; the final sample is the
    offending point). trace_error_max is the largest |tr X - 1| seen by
    operator-form runs and 0 for Bloch-space runs.
    """

    times: np.ndarray
    states: np.ndarray
    status: str
    trace_error_max: float = 0.0
    envelope_excess: float = -np.inf

    @property
    def final_time(self):
        return float(self.times[-1])

    @property
    def final_state(self):
        return self.states[-1]

    def final_bloch(self):
        s = self.states[-1]
        return to_bloch(s) if s.ndim == 2 else np.asarray(s, dtype=float)


def _steps_for(t_max, dt):
    n = int(round(t_max / dt))
    if n < 0 or not np.isfinite(t_max) or t_max < 0:
        raise ValueError(f"bad time span t_max={t_max}")
    return n


def _stride_for(sample_every, dt, n_max):
    if sample_every is None:
        return max(1, n_max // 512)
    return max(1, int(round(sample_every / dt)))


def integrate(
    rhs,
    initial,
    t_max,
    dt=1e-3,
    method="rk4",
    convergence_tol=1e-10,
    convergence_window=10,
    ball_tol=1e-9,
    renormalize=False,
    sample_every=None,
    t0=0.0,
    rtol=1e-9,
    atol=1e-12,
    max_steps=200_000,
    envelope_rate=None,
):
    """Integrate one trajectory of a VectorField, NinoGeneratorSet, or callable.

    Fixed-step RK4 by default; method="rk45" selects the embedded adaptive
    pair. Stops early as Converged when the speed |dr/dt| stays below
    convergence_tol for convergence_window consecutive steps, or as
    Unphysical as soon as |r| exceeds 1 + ball_tol. Operator-form runs
    (NinoGeneratorSet input) optionally renormalize the trace each step.
    When envelope_rate is given, the largest excess of |r(t)| over
    |r(0)| e^(rate t) across all steps is reported on the trajectory.
    """
    if isinstance(rhs, NinoGeneratorSet):
        return _integrate_nino(
            rhs,
            initial,
            t_max,
            dt,
            method,
            convergence_tol,
            convergence_window,
            ball_tol,
            renormalize,
            sample_every,
            t0,
        )
    if isinstance(rhs, VectorField):
        return integrate_ensemble(
            rhs,
            np.asarray(initial, dtype=float)[None, :],
            t_max,
            dt=dt,
            method=method,
            convergence_tol=convergence_tol,
            convergence_window=convergence_window,
            ball_tol=ball_tol,
            sample_every=sample_every,
            t0=t0,
            rtol=rtol,
            atol=atol,
            max_steps=max_steps,
            envelope_rate=envelope_rate,
        )[0]
    fn = rhs.rhs if isinstance(rhs, CallableField) else rhs
    return _integrate_callable(
        fn,
        initial,
        t_max,
        dt,
        method,
        convergence_tol,
        convergence_window,
        ball_tol,
        sample_every,
        t0,
        rtol,
        atol,
        max_steps,
    )


def integrate_ensemble(
    field: VectorField,
    initials,
    t_max,
    dt=1e-3,
    method="rk4",
    convergence_tol=1e-10,
    convergence_window=10,
    ball_tol=1e-9,
    sample_every=None,
    t0=0.0,
    rtol=1e-9,
    atol=1e-12,
    max_steps=200_000,
    envelope_rate=None,
    threads=1,
):
    """Integrate a batch of Bloch trajectories; results ordered like `initials`.

    Work is split into contiguous chunks across threads; each trajectory is
    an independent pure computation, so results are identical for any
    thread count.
    """
    r0s = np.ascontiguousarray(initials, dtype=float)
    if r0s.ndim != 2 or r0s.shape[1] != 3:
        raise ValueError("initials must have shape (n, 3)")
    if not np.isfinite(r0s).all():
        raise ValueError("initial states must be finite")
    track_env = envelope_rate is not None
    env_rate = float(envelope_rate) if track_env else 0.0

    def run_chunk(chunk):
        if method == "rk4":
            n_max = _steps_for(t_max, dt)
            stride = _stride_for(sample_every, dt, n_max)
            status, steps, counts, times, states, env = kernels.field_paths_rk4(
                field.linear,
                field.quad,
                field.const,
                chunk,
                t0,
                dt,
                n_max,
                stride,
                convergence_tol,
                convergence_window,
                ball_tol,
                env_rate,
                track_env,
            )
        elif method == "rk45":
            status, _, counts, times, states = kernels.field_paths_rk45(
                field.linear,
                field.quad,
                field.const,
                chunk,
                t0,
                t_max,
                dt,
                rtol,
                atol,
                max_steps,
                convergence_tol,
                convergence_window,
                ball_tol,
            )
            env = np.full(chunk.shape[0], -np.inf)
        else:
            raise ValueError(f"unknown method {method!r}; use 'rk4' or 'rk45'")
        out = []
        for i in range(chunk.shape[0]):
            traj = Trajectory(
                times=times[i, : counts[i]].copy(),
                states=states[i, : counts[i]].copy(),
                status=_STATUS_NAMES[status[i]],
                envelope_excess=float(env[i]),
            )
            _raise_if_nonfinite(traj)
            out.append(traj)
        return out

    if threads <= 1 or r0s.shape[0] <= 1:
        return run_chunk(r0s)
    chunks = np.array_split(r0s, min(threads, r0s.shape[0]))
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        parts = list(pool.map(run_chunk, chunks))
    return [traj for part in parts for traj in part]


def first_entry_times(field: VectorField, initials, targets, radius, t_max, dt=1e-3, ball_tol=1e-9):
    """First entry of each trajectory into a ball of `radius` around either target.

    Returns (labels, times, statuses): label 1 or 2 for the matching target
    (0 if never), entry time, and "Converged"/"MaxTime"/"Unphysical".
    """
    r0s = np.ascontiguousarray(initials, dtype=float)
    targets = np.ascontiguousarray(targets, dtype=float)
    if targets.shape != (2, 3):
        raise ValueError("targets must have shape (2, 3)")
    n_max = _steps_for(t_max, dt)
    labels, steps, status = kernels.field_first_entry(
        field.linear, field.quad, field.const, r0s, dt, n_max, ball_tol, targets, radius
    )
    return labels, steps * dt, np.array([_STATUS_NAMES[s] for s in status])


def _integrate_nino(
    gens,
    x0,
    t_max,
    dt,
    method,
    convergence_tol,
    convergence_window,
    ball_tol,
    renormalize,
    sample_every,
    t0,
):
    if gens.dim != 2:
        raise ValueError("operator-form integration is implemented for qubits only")
    if method != "rk4":
        raise ValueError("operator-form integration supports method='rk4'")
    x0 = np.ascontiguousarray(x0, dtype=complex)
    if x0.shape != (2, 2):
        raise ValueError("initial state must be a 2x2 density matrix")
    n_max = _steps_for(t_max, dt)
    stride = _stride_for(sample_every, dt, n_max)
    status, steps, counts, times, states, trace_err = kernels.nino_paths_rk4(
        x0[None, :, :],
        gens.nonjump_weights,
        gens.ls,
        gens.jump_signs,
        gens.bs,
        gens.df0(),
        t0,
        dt,
        n_max,
        stride,
        convergence_tol,
        convergence_window,
        ball_tol,
        bool(renormalize),
    )
    traj = Trajectory(
        times=times[0, : counts[0]].copy(),
        states=states[0, : counts[0]].copy(),
        status=_STATUS_NAMES[status[0]],
        trace_error_max=float(trace_err[0]),
    )
    if not np.isfinite(traj.states[-1]).all():
        last_good = traj.times[-2] if len(traj.times) > 1 else traj.times[0]
        raise ValueError(
            f"non-finite state encountered at t = {traj.times[-1]}; last good time {last_good}"
        )
    return traj


def _integrate_callable(
    fn,
    initial,
    t_max,
    dt,
    method,
    convergence_tol,
    convergence_window,
    ball_tol,
    sample_every,
    t0,
    rtol,
    atol,
    max_steps,
):
    r = np.asarray(initial, dtype=float).copy()
    if method not in ("rk4", "rk45"):
        raise ValueError(f"unknown method {method!r}")
    ball2 = (1.0 + ball_tol) ** 2
    times = [t0]
    samples = [r.copy()]
    below = 0
    status = "MaxTime"
    if method == "rk4":
        n_max = _steps_for(t_max, dt)
        stride = _stride_for(sample_every, dt, n_max)
        for i in range(n_max):
            k1 = np.asarray(fn(r), dtype=float)
            if not np.isfinite(k1).all():
                raise ValueError(f"non-finite rhs at t = {t0 + i * dt}")
            if np.linalg.norm(k1) < convergence_tol:
                below += 1
                if below >= convergence_window:
                    status = "Converged"
                    times.append(t0 + i * dt)
                    samples.append(r.copy())
                    break
            else:
                below = 0
            k2 = np.asarray(fn(r + 0.5 * dt * k1), dtype=float)
            k3 = np.asarray(fn(r + 0.5 * dt * k2), dtype=float)
            k4 = np.asarray(fn(r + dt * k3), dtype=float)
            r = r + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            step = i + 1
            if not (r @ r <= ball2):
                status = "Unphysical"
                times.append(t0 + step * dt)
                samples.append(r.copy())
                break
            if step % stride == 0 or step == n_max:
                times.append(t0 + step * dt)
                samples.append(r.copy())
        else:
            if times[-1] != t0 + n_max * dt:
                times.append(t0 + n_max * dt)
                samples.append(r.copy())
    else:
        out_t = np.zeros(max_steps + 2)
        out_s = np.zeros((max_steps + 2, 3))
        st, _, ct = _rk45_callable(
            fn,
            r,
            t0,
            t_max,
            dt,
            rtol,
            atol,
            max_steps,
            convergence_tol,
            convergence_window,
            ball_tol,
            out_t,
            out_s,
        )
        status = _STATUS_NAMES[st]
        times = out_t[:ct].tolist()
        samples = list(out_s[:ct])
    return Trajectory(times=np.array(times), states=np.array(samples), status=status)


def _rk45_callable(
    fn, r0, t0, t_max, dt0, rtol, atol, max_steps, conv_tol, conv_window, ball_tol, out_t, out_s
):
    from ._kernels_numpy import _CK_B4, _CK_B5
    a = (
        (),
        (0.2,),
        (3.0 / 40.0, 9.0 / 40.0),
        (0.3, -0.9, 1.2),
        (-11.0 / 54.0, 2.5, -70.0 / 27.0, 35.0 / 27.0),
        (1631.0 / 55296.0, 175.0 / 512.0, 575.0 / 13824.0, 44275.0 / 110592.0, 253.0 / 4096.0),
    )
    err_w = np.array(_CK_B5) - np.array(_CK_B4)
    b5 = np.array(_CK_B5)
    r = np.array(r0, dtype=float)
    ball2 = (1.0 + ball_tol) ** 2
    t = t0
    dt = dt0
    out_t[0] = t
    out_s[0] = r
    count = 1
    below = 0
    if not (r @ r <= ball2):
        return 2, t, count
    for _ in range(max_steps):
        if t >= t0 + t_max - 1e-15:
            return 0, t, count
        dt = min(dt, t0 + t_max - t)
        ks = [np.asarray(fn(r), dtype=float)]
        if np.linalg.norm(ks[0]) < conv_tol:
            below += 1
            if below >= conv_window:
                return 1, t, count
        else:
            below = 0
        for stage in range(1, 6):
            incr = sum(c * k for c, k in zip(a[stage], ks))
            ks.append(np.asarray(fn(r + dt * incr), dtype=float))
        new = r + dt * sum(c * k for c, k in zip(b5, ks))
        err_vec = dt * sum(c * k for c, k in zip(err_w, ks))
        scale = atol + rtol * np.maximum(np.abs(r), np.abs(new))
        err = np.sqrt(np.mean((err_vec / scale) ** 2))
        if err <= 1.0:
            t += dt
            r = new
            if count < out_t.shape[0]:
                out_t[count] = t
                out_s[count] = r
                count += 1
            if not (r @ r <= ball2):
                return 2, t, count
        factor = 0.9 * err**-0.2 if err > 0.0 else 5.0
        dt *= min(max(factor, 0.2), 5.0)
    return 0, t, count
